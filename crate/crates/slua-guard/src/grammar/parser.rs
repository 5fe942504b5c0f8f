//! The interactive parser: a state stack over shared tables with an exact
//! accepting set and a contextual lexer.

use std::sync::Arc;

use super::lr::{Action, Tables, TermId};
use super::{Matcher, Terminal};
use thiserror::Error;

/// Terminals shifted by a feed, as (terminal id, lexeme) pairs.
pub type Lexed = Vec<(TermId, String)>;

#[derive(Debug, Error, Clone)]
pub enum FeedError {
    #[error("no terminal matches input at byte {offset}; expected one of {expected:?}")]
    Lex {
        offset: usize,
        expected: Vec<String>,
    },
    #[error("terminal '{name}' is not acceptable here; expected one of {expected:?}")]
    Reject {
        name: String,
        expected: Vec<String>,
    },
    #[error("parser was poisoned by an earlier error")]
    Poisoned,
}

/// Incremental LR parser. Cloning copies the stack and shares the tables, so
/// clones diverge independently. A parser that returned an error from a feed
/// is poisoned and must be discarded.
#[derive(Debug, Clone)]
pub struct InteractiveParser {
    tables: Arc<Tables>,
    stack: Vec<u32>,
    poisoned: bool,
    accepted: bool,
}

impl InteractiveParser {
    pub fn new(tables: Arc<Tables>) -> Self {
        let start = tables.start_state;
        InteractiveParser {
            tables,
            stack: vec![start],
            poisoned: false,
            accepted: false,
        }
    }

    pub fn tables(&self) -> &Arc<Tables> {
        &self.tables
    }

    pub fn stack_depth(&self) -> usize {
        self.stack.len()
    }

    /// Terminal ids currently acceptable, including placeholders and `$END`.
    pub fn accepts(&self) -> Vec<TermId> {
        if self.poisoned || self.accepted {
            return Vec::new();
        }
        let state = *self.stack.last().unwrap();
        self.tables.actions[state as usize]
            .iter()
            .map(|&(t, _)| t)
            .collect()
    }

    pub fn accepts_terminals(&self) -> Vec<&Terminal> {
        self.accepts()
            .into_iter()
            .map(|t| self.tables.terminal(t))
            .collect()
    }

    pub fn accept_names(&self) -> Vec<String> {
        self.accepts_terminals()
            .iter()
            .map(|t| t.name.clone())
            .collect()
    }

    /// True when the only acceptable terminal is `$END`.
    pub fn only_end_accepted(&self) -> bool {
        let acc = self.accepts();
        acc.len() == 1 && self.tables.terminal(acc[0]).is_end()
    }

    /// Shift one terminal, running any pending reductions first.
    pub fn feed_terminal(&mut self, term: TermId) -> Result<(), FeedError> {
        if self.poisoned {
            return Err(FeedError::Poisoned);
        }
        loop {
            let state = *self.stack.last().unwrap();
            match self.tables.action(state, term) {
                Some(Action::Shift(next)) => {
                    self.stack.push(next);
                    return Ok(());
                }
                Some(Action::Reduce(p)) => {
                    let (lhs, rhs) = &self.tables.productions[p as usize];
                    for _ in 0..rhs.len() {
                        self.stack.pop();
                    }
                    let top = *self.stack.last().unwrap();
                    let goto = self.tables.gotos[top as usize][lhs];
                    self.stack.push(goto);
                }
                Some(Action::Accept) => {
                    self.accepted = true;
                    return Ok(());
                }
                None => {
                    let expected = self.accept_names();
                    self.poisoned = true;
                    return Err(FeedError::Reject {
                        name: self.tables.terminal(term).name.clone(),
                        expected,
                    });
                }
            }
        }
    }

    pub fn feed_terminal_by_name(&mut self, name: &str) -> Result<(), FeedError> {
        match self.tables.term_id(name) {
            Some(id) => self.feed_terminal(id),
            None => {
                let expected = self.accept_names();
                self.poisoned = true;
                Err(FeedError::Reject {
                    name: name.to_string(),
                    expected,
                })
            }
        }
    }

    /// Lex `text` into non-placeholder terminals and shift each in order.
    ///
    /// Whitespace between terminals is skipped; matching is longest-match
    /// with literals beating patterns on ties. Only terminals currently
    /// acceptable participate, which resolves keyword-versus-identifier
    /// overlap contextually. On error the parser is poisoned; partial
    /// consumption is not rolled back.
    pub fn feed_text(&mut self, text: &str) -> Result<Lexed, FeedError> {
        match self.feed_text_partial(text)? {
            (lexed, None) => Ok(lexed),
            (_, Some(offset)) => {
                let expected = self.accept_names();
                self.poisoned = true;
                Err(FeedError::Lex { offset, expected })
            }
        }
    }

    /// Like [`feed_text`], but an unlexable tail does not poison the parser:
    /// the consumed prefix stays shifted and the byte offset of the residue
    /// is returned. Look-ahead extensions produce segments whose tail belongs
    /// to an ancestor parser.
    pub fn feed_text_partial(
        &mut self,
        text: &str,
    ) -> Result<(Lexed, Option<usize>), FeedError> {
        if self.poisoned {
            return Err(FeedError::Poisoned);
        }
        let mut lexed = Vec::new();
        let bytes = text.as_bytes();
        let mut pos = 0usize;
        loop {
            while pos < bytes.len() && matches!(bytes[pos], b' ' | b'\t' | b'\r' | b'\n') {
                pos += 1;
            }
            if pos >= bytes.len() {
                return Ok((lexed, None));
            }
            let rest = &text[pos..];
            let mut best: Option<(usize, bool, TermId)> = None; // (len, is_literal, id)
            for term in self.accepts() {
                let t = self.tables.terminal(term);
                let candidate = match &t.matcher {
                    Some(Matcher::Literal(lit)) => {
                        rest.starts_with(lit.as_str()).then_some((lit.len(), true))
                    }
                    Some(Matcher::Pattern(_)) => {
                        let dfa = self.tables.term_dfas[term].as_ref().unwrap();
                        dfa.longest_match(dfa.initial(), rest)
                            .filter(|&l| l > 0)
                            .map(|l| (l, false))
                    }
                    None => None,
                };
                if let Some((len, is_lit)) = candidate {
                    let better = match best {
                        None => true,
                        Some((blen, blit, _)) => len > blen || (len == blen && is_lit && !blit),
                    };
                    if better {
                        best = Some((len, is_lit, term));
                    }
                }
            }
            match best {
                Some((len, _, term)) => {
                    self.feed_terminal(term)?;
                    lexed.push((term, rest[..len].to_string()));
                    pos += len;
                }
                None => return Ok((lexed, Some(pos))),
            }
        }
    }
}
