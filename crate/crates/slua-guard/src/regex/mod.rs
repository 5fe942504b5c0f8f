//! Character-level regex engine for the parser's constraint dialect.
//!
//! The dialect is deliberately small: literals, identity escapes, `[...]`
//! classes with ranges and negation, `\d` `\w` `\s`, grouping, alternation,
//! `*` `+` `?` `{m,n}`, and a dot-all wildcard. The alphabet is ASCII
//! printable plus tab/CR/LF; anything else is rejected at compile time so
//! tokenizer surprises become loud errors instead of silent dead states.
//!
//! Patterns compile to dense DFAs with an explicit dead state, making
//! `step` total and branch-free per character. `Dfa` values are immutable
//! after compilation and safe to share across threads.

mod compile;
mod dfa;
mod syntax;

pub use compile::compile_regex;
pub use dfa::{Dfa, StateId};

use thiserror::Error;

/// A regex in the supported dialect. Construction does not validate; use
/// [`compile_regex`] to check the pattern and obtain a DFA.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegexPattern(String);

impl RegexPattern {
    pub fn new(text: impl Into<String>) -> Self {
        RegexPattern(text.into())
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    /// Pattern text wrapped in a group whenever it contains a top-level
    /// alternation, so it can be concatenated into a larger pattern.
    pub fn grouped_text(&self) -> String {
        if has_top_level_alternation(&self.0) {
            format!("({})", self.0)
        } else {
            self.0.clone()
        }
    }
}

impl std::fmt::Display for RegexPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RegexPattern {
    fn from(s: &str) -> Self {
        RegexPattern::new(s)
    }
}

#[derive(Debug, Error)]
pub enum RegexError {
    #[error("regex syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("byte 0x{byte:02x} at offset {offset} is outside the supported alphabet")]
    Alphabet { offset: usize, byte: u8 },
    #[error("internal decoder bug: {0}")]
    Internal(String),
}

/// Bytes the engine operates over: tab, LF, CR and printable ASCII.
pub fn in_alphabet(b: u8) -> bool {
    matches!(b, 0x09 | 0x0A | 0x0D | 0x20..=0x7E)
}

fn check_alphabet(s: &str) -> Result<(), RegexError> {
    for (offset, &byte) in s.as_bytes().iter().enumerate() {
        if !in_alphabet(byte) {
            return Err(RegexError::Alphabet { offset, byte });
        }
    }
    Ok(())
}

fn has_top_level_alternation(s: &str) -> bool {
    let mut depth = 0usize;
    let mut bytes = s.bytes();
    while let Some(b) = bytes.next() {
        match b {
            b'\\' => {
                bytes.next();
            }
            b'[' => {
                // classes cannot nest; skip to the closing bracket
                let mut prev_escape = false;
                for c in bytes.by_ref() {
                    if prev_escape {
                        prev_escape = false;
                    } else if c == b'\\' {
                        prev_escape = true;
                    } else if c == b']' {
                        break;
                    }
                }
            }
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b'|' if depth == 0 => return true,
            _ => {}
        }
    }
    false
}

/// Characters that must be escaped when a literal string is embedded in a
/// pattern: the dialect's metacharacters plus space (so keyword lookaheads
/// like `"< "` stay unambiguous).
const ESCAPED_LITERAL_CHARS: &[u8] = b"(){}.*+-/|\\\"~ []?^$";

/// Escape `s` so the result matches exactly `{s}`.
pub fn escape_literal(s: &str) -> Result<RegexPattern, RegexError> {
    check_alphabet(s)?;
    let mut out = String::with_capacity(s.len() + 4);
    for ch in s.chars() {
        if ch.is_ascii() && ESCAPED_LITERAL_CHARS.contains(&(ch as u8)) {
            out.push('\\');
        }
        out.push(ch);
    }
    Ok(RegexPattern(out))
}

/// Union of patterns, alternatives sorted lexicographically for determinism,
/// always wrapped in a group.
pub fn union_patterns(patterns: &[RegexPattern]) -> Result<RegexPattern, RegexError> {
    if patterns.is_empty() {
        return Err(RegexError::Internal(
            "union of an empty pattern list".into(),
        ));
    }
    let mut texts: Vec<&str> = patterns.iter().map(|p| p.text()).collect();
    texts.sort_unstable();
    texts.dedup();
    Ok(RegexPattern(format!("({})", texts.join("|"))))
}

/// Run the DFA over `text` from `start`.
///
/// Returns the end state (possibly dead) and the 1-based index of the first
/// character at which a final state was entered, if any.
pub fn run(dfa: &Dfa, start: StateId, text: &str) -> (StateId, Option<usize>) {
    let mut state = start;
    let mut first_final = None;
    for (i, &b) in text.as_bytes().iter().enumerate() {
        state = dfa.step(state, b);
        if first_final.is_none() && dfa.is_final(state) {
            first_final = Some(i + 1);
        }
    }
    (state, first_final)
}

/// True iff no path of length >= 1 leads from a final state back to a final
/// state, i.e. no accepted string has an accepted proper extension.
pub fn is_nonextensible(dfa: &Dfa) -> bool {
    let n = dfa.num_states();
    let mut queue: Vec<StateId> = Vec::new();
    let mut seen = vec![false; n];
    for s in dfa.final_states() {
        for t in dfa.successors(s) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                queue.push(t);
            }
        }
    }
    while let Some(s) = queue.pop() {
        if dfa.is_final(s) {
            return false;
        }
        for t in dfa.successors(s) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                queue.push(t);
            }
        }
    }
    true
}

/// Smallest `k >= 1` such that consuming `token[..k]` after `context` reaches
/// a final state; `None` if no prefix of `token` completes a match.
///
/// The caller must have checked that `context` leaves the DFA live and
/// non-final; anything else indicates a decoder bookkeeping bug.
pub fn shortest_completing_prefix(
    dfa: &Dfa,
    context: &str,
    token: &str,
) -> Result<Option<usize>, RegexError> {
    let (state, _) = run(dfa, dfa.initial(), context);
    if dfa.is_final(state) {
        return Err(RegexError::Internal(
            "shortest_completing_prefix called with an already-final context".into(),
        ));
    }
    if dfa.is_dead(state) {
        return Err(RegexError::Internal(
            "shortest_completing_prefix called with a dead context".into(),
        ));
    }
    let mut s = state;
    for (i, &b) in token.as_bytes().iter().enumerate() {
        s = dfa.step(s, b);
        if dfa.is_final(s) {
            return Ok(Some(i + 1));
        }
        if dfa.is_dead(s) {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Escape used when a grammar literal is rendered as a pattern fragment.
///
/// This mirrors the convention of mainstream regex libraries (metacharacters
/// and whitespace escaped, `/` `;` `<` `=` left bare), which is distinct from
/// [`escape_literal`]; the printed lookahead regexes rely on both conventions.
pub(crate) fn escape_grammar_literal(s: &str) -> String {
    const SPECIAL: &[u8] = b"()[]{}?*+-|^$\\.&~# \t\n\r";
    let mut out = String::with_capacity(s.len() + 4);
    for ch in s.chars() {
        if ch.is_ascii() && SPECIAL.contains(&(ch as u8)) {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}
