//! Bounded LRU cache from instantiated grammar text to generated tables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::lr::Tables;
use super::GrammarError;

const DEFAULT_CAPACITY: usize = 512;

#[derive(Debug, Default, Clone, Copy)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug)]
struct Inner {
    map: HashMap<String, (Arc<Tables>, u64)>,
    tick: u64,
    capacity: usize,
    stats: CacheStats,
}

/// Table cache shared by every parser node in a session (and safely across
/// sessions). A hit returns the identical `Arc<Tables>`.
#[derive(Debug)]
pub struct ParserCache {
    inner: Mutex<Inner>,
}

impl Default for ParserCache {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_CAPACITY)
    }
}

impl ParserCache {
    pub fn with_capacity(capacity: usize) -> Self {
        ParserCache {
            inner: Mutex::new(Inner {
                map: HashMap::new(),
                tick: 0,
                capacity: capacity.max(1),
                stats: CacheStats::default(),
            }),
        }
    }

    pub fn stats(&self) -> CacheStats {
        self.inner.lock().unwrap().stats
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_build(
        &self,
        key: &str,
        build: impl FnOnce() -> Result<Arc<Tables>, GrammarError>,
    ) -> Result<Arc<Tables>, GrammarError> {
        {
            let mut inner = self.inner.lock().unwrap();
            inner.tick += 1;
            let tick = inner.tick;
            if let Some(entry) = inner.map.get_mut(key) {
                entry.1 = tick;
                let tables = entry.0.clone();
                inner.stats.hits += 1;
                return Ok(tables);
            }
            inner.stats.misses += 1;
        }
        // build outside the lock; duplicate builds are possible but harmless
        let tables = build()?;
        let mut inner = self.inner.lock().unwrap();
        inner.tick += 1;
        let tick = inner.tick;
        inner
            .map
            .insert(key.to_string(), (tables.clone(), tick));
        if inner.map.len() > inner.capacity {
            if let Some(oldest) = inner
                .map
                .iter()
                .min_by_key(|(_, (_, t))| *t)
                .map(|(k, _)| k.clone())
            {
                inner.map.remove(&oldest);
            }
        }
        Ok(tables)
    }
}
