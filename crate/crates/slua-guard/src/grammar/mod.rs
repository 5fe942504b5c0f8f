//! Modular CFG templates and incremental LR parsers.
//!
//! Grammar sources use the notation of the language listings: one rule per
//! line (`name: alternative | alternative`), quoted literals, UPPERCASE
//! terminals, `( )` groups with `* + ?`, and `{slot}` holes filled at
//! instantiation. Quoted strings of the form `"<NAME>"` are placeholder
//! terminals: they are never lexed from text and mark the points where the
//! tree of parsers spawns a child.
//!
//! Parsers are generated with a canonical LR(1) construction, which detects
//! errors on the first invalid terminal; the `accepts()` set therefore falls
//! directly out of the action table. Tables are immutable, shared behind an
//! `Arc`, and memoized by instantiated grammar text in an LRU cache.

mod cache;
mod lr;
mod parser;
mod syntax;

pub use cache::ParserCache;
pub use lr::{Action, Tables, TermId};
pub use parser::{FeedError, InteractiveParser};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::regex::{escape_grammar_literal, RegexPattern};
use thiserror::Error;

pub const END_TERMINAL: &str = "$END";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    Literal(String),
    Pattern(RegexPattern),
}

/// An atomic grammar symbol: a literal, a pattern, or a placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terminal {
    pub name: String,
    /// `None` for placeholders and `$END`, which are never lexed from text.
    pub matcher: Option<Matcher>,
}

impl Terminal {
    pub fn literal(text: &str) -> Terminal {
        Terminal {
            name: text.to_string(),
            matcher: Some(Matcher::Literal(text.to_string())),
        }
    }

    pub fn pattern(name: &str, pattern: &str) -> Terminal {
        Terminal {
            name: name.to_string(),
            matcher: Some(Matcher::Pattern(RegexPattern::new(pattern))),
        }
    }

    pub fn placeholder(name: &str) -> Terminal {
        Terminal {
            name: name.to_string(),
            matcher: None,
        }
    }

    pub fn is_placeholder(&self) -> bool {
        self.name.starts_with('<') && self.name.ends_with('>')
    }

    pub fn is_end(&self) -> bool {
        self.name == END_TERMINAL
    }

    /// Pattern fragment this terminal contributes to an emitted regex.
    pub fn pattern_text(&self) -> Option<String> {
        match &self.matcher {
            Some(Matcher::Literal(s)) => Some(escape_grammar_literal(s)),
            Some(Matcher::Pattern(p)) => Some(p.text().to_string()),
            None => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("slot '{0}' is not filled")]
    MissingSlot(String),
    #[error("grammar syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),
    #[error("LR conflict on lookahead '{lookahead}': {items}")]
    Conflict { lookahead: String, items: String },
    #[error("bad terminal pattern: {0}")]
    BadPattern(#[from] crate::regex::RegexError),
}

/// A modular CFG template with `{slot}` holes, plus matcher definitions for
/// terminals the source references but does not define (NUMBER, STRING, ...).
#[derive(Debug, Clone)]
pub struct GrammarTemplate {
    pub name: String,
    pub source: String,
    pub slots: Vec<String>,
    pub extra_terminals: Vec<Terminal>,
}

impl GrammarTemplate {
    pub fn new(name: &str, source: &str, slots: &[&str], extra: Vec<Terminal>) -> Self {
        GrammarTemplate {
            name: name.to_string(),
            source: source.to_string(),
            slots: slots.iter().map(|s| s.to_string()).collect(),
            extra_terminals: extra,
        }
    }
}

/// Fully instantiated grammar: terminals resolved, EBNF lowered to plain
/// productions, ready for table construction.
#[derive(Debug, Clone)]
pub struct Grammar {
    /// Canonical identity of the instantiation; the parser-cache key.
    pub key: String,
    pub terminals: Vec<Terminal>,
    pub nonterminals: Vec<String>,
    /// (lhs nonterminal index, rhs symbols)
    pub productions: Vec<(usize, Vec<Sym>)>,
    pub start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    T(usize),
    N(usize),
}

/// Substitute slot fills into a template and parse the result.
pub fn instantiate_template(
    template: &GrammarTemplate,
    fills: &BTreeMap<String, String>,
) -> Result<Grammar, GrammarError> {
    for slot in &template.slots {
        if !fills.contains_key(slot) {
            return Err(GrammarError::MissingSlot(slot.clone()));
        }
    }
    let mut source = template.source.clone();
    for (slot, value) in fills {
        source = source.replace(&format!("{{{slot}}}"), value);
    }
    syntax::parse_grammar(&source, &template.extra_terminals)
}

/// Generate (or fetch from cache) the LR tables for `grammar` and return a
/// fresh interactive parser at the initial state.
pub fn build_interactive_parser(
    grammar: &Grammar,
    cache: &ParserCache,
) -> Result<InteractiveParser, GrammarError> {
    let tables = cache.get_or_build(&grammar.key, || lr::build_tables(grammar).map(Arc::new))?;
    Ok(InteractiveParser::new(tables))
}

#[cfg(test)]
mod tests;
