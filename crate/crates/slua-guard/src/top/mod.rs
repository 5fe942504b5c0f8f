//! The tree of parsers: root lifecycle, regex assembly with non-extensibility
//! enforcement, and the validation driver.
//!
//! A `TopRoot` owns one parsing session: the root parser node, the semantic
//! environment, the grammar-table cache and a DFA memo. `parse_program` walks
//! a program through the root's regexes character by character: each segment
//! must match the current regex exactly up to its first final state, then
//! advances the tree.

pub mod extend;

pub use extend::extend_for_nonextensibility;

use std::collections::HashMap;
use std::sync::Arc;

use crate::env::Environment;
use crate::grammar::{GrammarError, ParserCache};
use crate::nodes::{
    make_block, make_effect_root, make_talent_root, NodeCtx, ParserNode, ScopeStack,
};
use crate::regex::{Dfa, RegexError, RegexPattern};
use crate::translate::AstNode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopError {
    #[error("dead end: {detail}")]
    DeadEnd { expected: Vec<String>, detail: String },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Regex(#[from] RegexError),
    #[error("environment error: {0}")]
    Env(String),
    #[error("grammar design error: {0}")]
    GrammarDesign(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootKind {
    Program,
    Effect,
    Talent,
}

impl std::str::FromStr for RootKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "program" => Ok(RootKind::Program),
            "effect" => Ok(RootKind::Effect),
            "talent" => Ok(RootKind::Talent),
            other => Err(format!("unknown kind '{other}' (program|talent|effect)")),
        }
    }
}

/// Diagnostics for a failed parse: the byte offset and the regex the text
/// was expected to match, the artifact reflection prompts consume.
#[derive(Debug, Clone)]
pub struct Diag {
    pub offset: usize,
    pub expected: RegexPattern,
    pub message: String,
}

/// One line of the regex trace: where a segment started, what was consumed,
/// and the regex it matched.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub offset: usize,
    pub segment: String,
    pub regex: String,
}

impl TraceRecord {
    /// Tab-separated record; control characters in the segment are escaped so
    /// the line structure survives.
    pub fn to_line(&self) -> String {
        let escaped: String = self
            .segment
            .chars()
            .flat_map(|c| match c {
                '\n' => "\\n".chars().collect::<Vec<_>>(),
                '\t' => "\\t".chars().collect(),
                '\r' => "\\r".chars().collect(),
                '\\' => "\\\\".chars().collect(),
                c => vec![c],
            })
            .collect();
        format!("{}\t{}\t{}", self.offset, escaped, self.regex)
    }
}

#[derive(Debug)]
pub struct ParseOutcome {
    pub success: bool,
    pub finished: bool,
    pub diag: Option<Diag>,
    pub trace: Vec<TraceRecord>,
}

/// The overall context-sensitive parser: the root node of the tree plus the
/// session state it needs.
pub struct TopRoot {
    env: Environment,
    cache: Arc<ParserCache>,
    dfas: HashMap<String, Arc<Dfa>>,
    root: ParserNode,
    finalized: bool,
}

/// Process-wide table cache; sessions share generated tables by default.
pub fn shared_cache() -> Arc<ParserCache> {
    static CACHE: std::sync::OnceLock<Arc<ParserCache>> = std::sync::OnceLock::new();
    CACHE
        .get_or_init(|| Arc::new(ParserCache::default()))
        .clone()
}

impl TopRoot {
    pub fn new(kind: RootKind, env: Environment) -> Result<TopRoot, TopError> {
        Self::with_cache(kind, env, shared_cache(), None)
    }

    pub fn with_effect_id(
        kind: RootKind,
        env: Environment,
        effect_id: Option<String>,
    ) -> Result<TopRoot, TopError> {
        Self::with_cache(kind, env, shared_cache(), effect_id)
    }

    /// Sessions may share one table cache; each session owns its own nodes.
    pub fn with_cache(
        kind: RootKind,
        mut env: Environment,
        cache: Arc<ParserCache>,
        effect_id: Option<String>,
    ) -> Result<TopRoot, TopError> {
        let mut dfas = HashMap::new();
        if kind == RootKind::Talent {
            env.in_talent = true;
        }
        let mut scopes = ScopeStack::from_env(&env);
        let root = {
            let mut ctx = NodeCtx {
                env: &mut env,
                cache: &cache,
                dfas: &mut dfas,
            };
            match kind {
                RootKind::Program => {
                    // program-level locals live in their own mutable frame
                    scopes.push(crate::env::ScopeKind::Block);
                    make_block(scopes, &[], false, &mut ctx)?
                }
                RootKind::Effect => make_effect_root(scopes, effect_id, &mut ctx)?,
                RootKind::Talent => make_talent_root(scopes, &mut ctx)?,
            }
        };
        Ok(TopRoot {
            env,
            cache,
            dfas,
            root,
            finalized: false,
        })
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    /// The environment after a session, for chaining generations (registered
    /// effects stay visible to later sessions).
    pub fn into_env(self) -> Environment {
        self.env
    }

    pub fn has_finished(&self) -> bool {
        self.root.has_finished()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn broom_ok(&self) -> bool {
        self.root.broom_ok()
    }

    /// Regex matching every valid next segment, with the leading whitespace
    /// skip prepended.
    pub fn next_regex(&mut self) -> Result<RegexPattern, TopError> {
        let mut ctx = NodeCtx {
            env: &mut self.env,
            cache: &self.cache,
            dfas: &mut self.dfas,
        };
        let mut items = self.root.next_regex_items(&mut ctx)?;
        items.sort_unstable();
        items.dedup();
        Ok(RegexPattern::new(format!("\\s*({})", items.join("|"))))
    }

    pub fn feed_text(&mut self, segment: &str) -> Result<(), TopError> {
        let mut ctx = NodeCtx {
            env: &mut self.env,
            cache: &self.cache,
            dfas: &mut self.dfas,
        };
        self.root.feed_text(segment, &mut ctx)?;
        if self.root.has_finished() && !self.finalized {
            self.root.finalize(&mut ctx)?;
            self.finalized = true;
        }
        Ok(())
    }

    pub fn compile(&mut self, pattern: &RegexPattern) -> Result<Arc<Dfa>, TopError> {
        let mut ctx = NodeCtx {
            env: &mut self.env,
            cache: &self.cache,
            dfas: &mut self.dfas,
        };
        ctx.dfa(pattern.text())
    }

    pub fn ast(&self) -> Option<&AstNode> {
        self.root.ast()
    }

    /// AST of everything consumed so far. For finished roots this is the
    /// program AST; for open program blocks it covers the completed
    /// statements.
    pub fn ast_snapshot(&mut self) -> Result<AstNode, TopError> {
        if let Some(ast) = self.root.ast() {
            return Ok(ast.clone());
        }
        let mut probe = self.root.clone();
        let mut ctx = NodeCtx {
            env: &mut self.env,
            cache: &self.cache,
            dfas: &mut self.dfas,
        };
        probe.finalize(&mut ctx)?;
        Ok(probe.ast().cloned().unwrap())
    }

    pub fn root(&self) -> &ParserNode {
        &self.root
    }
}

/// Parse a complete or incomplete program with the context-sensitive parser.
///
/// Success means no character contradicted the tree; finished means the root
/// consumed a complete program. Trailing text after a finished root fails.
pub fn parse_program(root: &mut TopRoot, text: &str) -> Result<ParseOutcome, TopError> {
    let bytes = text.as_bytes();
    let mut i = 0usize;
    let mut trace = Vec::new();

    while !root.has_finished() {
        let regex = root.next_regex()?;
        let dfa = root.compile(&regex)?;
        let mut state = dfa.initial();
        let seg_start = i;
        while !dfa.is_final(state) {
            if i == bytes.len() {
                // incomplete program, valid so far
                return Ok(ParseOutcome {
                    success: true,
                    finished: false,
                    diag: None,
                    trace,
                });
            }
            let next = dfa.step(state, bytes[i]);
            if dfa.is_dead(next) {
                return Ok(ParseOutcome {
                    success: false,
                    finished: false,
                    diag: Some(Diag {
                        offset: i,
                        expected: regex.clone(),
                        message: format!(
                            "input does not match the expected continuation at byte {i}"
                        ),
                    }),
                    trace,
                });
            }
            state = next;
            i += 1;
        }
        let segment = &text[seg_start..i];
        if segment.is_empty() {
            return Err(TopError::Internal(format!(
                "regex {} matched the empty segment; the continuation grammar is broken",
                regex.text()
            )));
        }
        trace.push(TraceRecord {
            offset: seg_start,
            segment: segment.to_string(),
            regex: regex.text().to_string(),
        });
        if let Err(e) = root.feed_text(segment) {
            return Ok(ParseOutcome {
                success: false,
                finished: false,
                diag: Some(Diag {
                    offset: seg_start,
                    expected: regex.clone(),
                    message: format!("segment rejected by the parser tree: {e}"),
                }),
                trace,
            });
        }
    }

    // trailing whitespace is insignificant, matching the leading \s* skip
    while i < bytes.len() && matches!(bytes[i], b' ' | b'\t' | b'\r' | b'\n') {
        i += 1;
    }
    let success = i == bytes.len();
    let diag = if success {
        None
    } else {
        Some(Diag {
            offset: i,
            expected: RegexPattern::new(""),
            message: "program has extra characters after completion".to_string(),
        })
    };
    Ok(ParseOutcome {
        success,
        finished: success,
        diag,
        trace,
    })
}
