//! Field leaves: the fixed-regex nodes spawned for `<FIELD>` and `<KEY>`.
//!
//! A field leaf owns a candidate set (variable or field names with their
//! types) and, per candidate, the lookahead lexemes that may follow it. Its
//! regex is the union of the candidates grouped by follow set; feeding
//! consumes the name and then exactly one follow lexeme, which the parent
//! replays into its own parser.

use crate::env::TypeDescriptor;
use crate::regex::escape_literal;

/// One permitted continuation after a candidate name.
#[derive(Debug, Clone, PartialEq)]
pub struct Follow {
    pub lexeme: String,
    /// `\s+`-prefixed for word-like lexemes so `data and` cannot fuse into an
    /// identifier.
    pub pattern: String,
}

impl Follow {
    pub fn new(lexeme: &str) -> Follow {
        let escaped = escape_literal(lexeme)
            .map(|p| p.text().to_string())
            .unwrap_or_else(|_| lexeme.to_string());
        let wordish = lexeme
            .chars()
            .next()
            .map(|c| c.is_ascii_alphanumeric() || c == '_')
            .unwrap_or(false);
        let pattern = if wordish {
            format!("\\s+{escaped}")
        } else {
            escaped
        };
        Follow {
            lexeme: lexeme.to_string(),
            pattern,
        }
    }

    fn needs_space(&self) -> bool {
        self.pattern.starts_with("\\s+")
    }
}

#[derive(Debug, Clone)]
pub struct FieldCandidate {
    pub name: String,
    pub ty: TypeDescriptor,
    pub follows: Vec<Follow>,
}

#[derive(Debug, Clone)]
pub struct FieldLeaf {
    pub candidates: Vec<FieldCandidate>,
    chosen: Option<usize>,
    trailing: Option<String>,
    /// whitespace seen after the chosen name, satisfying `\s+` follows
    saw_space: bool,
}

impl FieldLeaf {
    pub fn new(candidates: Vec<FieldCandidate>) -> FieldLeaf {
        FieldLeaf {
            candidates,
            chosen: None,
            trailing: None,
            saw_space: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn finished(&self) -> bool {
        self.trailing.is_some()
    }

    pub fn chosen(&self) -> Option<(&str, &TypeDescriptor)> {
        self.chosen
            .map(|i| (self.candidates[i].name.as_str(), &self.candidates[i].ty))
    }

    pub fn trailing(&self) -> Option<&str> {
        self.trailing.as_deref()
    }

    /// Alternation items: candidates grouped by follow set, names and follows
    /// sorted, bounded whitespace when a follow needs leading space.
    pub fn regex_items(&self) -> Vec<String> {
        match self.chosen {
            None => {
                let mut groups: Vec<(Vec<String>, Vec<String>)> = Vec::new();
                for cand in &self.candidates {
                    let mut follows: Vec<String> =
                        cand.follows.iter().map(|f| f.pattern.clone()).collect();
                    follows.sort_unstable();
                    follows.dedup();
                    let name = escape_literal(&cand.name)
                        .map(|p| p.text().to_string())
                        .unwrap_or_else(|_| cand.name.clone());
                    match groups.iter_mut().find(|(_, f)| *f == follows) {
                        Some((names, _)) => names.push(name),
                        None => groups.push((vec![name], follows)),
                    }
                }
                let mut items = Vec::new();
                for (mut names, follows) in groups {
                    if follows.is_empty() {
                        continue;
                    }
                    names.sort_unstable();
                    let gap = if follows.iter().any(|f| f.starts_with("\\s+")) {
                        "\\s{0,50}"
                    } else {
                        "\\s*"
                    };
                    items.push(format!(
                        "{}{}{}",
                        join_alts(&names),
                        gap,
                        join_alts(&follows)
                    ));
                }
                items
            }
            Some(i) => {
                // name consumed; the remaining segment is just the follow
                let mut follows: Vec<String> = self.candidates[i]
                    .follows
                    .iter()
                    .map(|f| {
                        if self.saw_space && f.needs_space() {
                            f.pattern["\\s+".len()..].to_string()
                        } else {
                            f.pattern.clone()
                        }
                    })
                    .collect();
                follows.sort_unstable();
                follows.dedup();
                vec![join_alts(&follows)]
            }
        }
    }

    /// Consume part of a segment. The caller guarantees the overall segment
    /// matched this leaf's emitted regex; partial consumption (name now,
    /// follow in a later segment) is legal.
    pub fn feed(&mut self, text: &str) -> Result<(), String> {
        let mut rest = text;
        loop {
            let trimmed = rest.trim_start_matches([' ', '\t', '\r', '\n']);
            if trimmed.len() != rest.len() && self.chosen.is_some() {
                self.saw_space = true;
            }
            rest = trimmed;
            if rest.is_empty() {
                return Ok(());
            }
            match self.chosen {
                None => {
                    // longest candidate name with a word boundary after it
                    let mut order: Vec<usize> = (0..self.candidates.len()).collect();
                    order.sort_by_key(|&i| std::cmp::Reverse(self.candidates[i].name.len()));
                    let hit = order.into_iter().find(|&i| {
                        let name = &self.candidates[i].name;
                        rest.starts_with(name.as_str())
                            && !rest[name.len()..]
                                .chars()
                                .next()
                                .map(|c| c.is_ascii_alphanumeric() || c == '_')
                                .unwrap_or(false)
                    });
                    match hit {
                        Some(i) => {
                            rest = &rest[self.candidates[i].name.len()..];
                            self.chosen = Some(i);
                        }
                        None => return Err(format!("no field candidate matches '{rest}'")),
                    }
                }
                Some(i) => {
                    let mut follows: Vec<&Follow> = self.candidates[i].follows.iter().collect();
                    follows.sort_by_key(|f| std::cmp::Reverse(f.lexeme.len()));
                    let hit = follows.into_iter().find(|f| {
                        rest.starts_with(f.lexeme.as_str()) && (!f.needs_space() || self.saw_space)
                    });
                    match hit {
                        Some(f) => {
                            let lexeme = f.lexeme.clone();
                            rest = &rest[lexeme.len()..];
                            self.trailing = Some(lexeme);
                            if !rest.trim().is_empty() {
                                return Err(format!(
                                    "unexpected input after field follow: '{rest}'"
                                ));
                            }
                            return Ok(());
                        }
                        None => return Err(format!("no follow matches '{rest}'")),
                    }
                }
            }
        }
    }
}

pub fn join_alts(items: &[String]) -> String {
    if items.len() == 1 {
        items[0].clone()
    } else {
        format!("({})", items.join("|"))
    }
}
