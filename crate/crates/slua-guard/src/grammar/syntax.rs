//! Parse grammar source text into lowered productions.

use std::collections::HashMap;

use super::{Grammar, GrammarError, Matcher, Sym, Terminal, END_TERMINAL};
use crate::regex::{escape_grammar_literal, RegexPattern};

#[derive(Debug, Clone)]
enum Item {
    Ref(String),
    Literal(String),
    Group(Vec<Vec<Item>>),
    Star(Box<Item>),
    Plus(Box<Item>),
    Opt(Box<Item>),
}

type Alts = Vec<Vec<Item>>;

pub fn parse_grammar(source: &str, extra_terminals: &[Terminal]) -> Result<Grammar, GrammarError> {
    let mut rules: Vec<(String, Alts)> = Vec::new();
    let mut terminal_defs: Vec<Terminal> = Vec::new();

    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (name, rhs) = split_definition(line, lineno + 1)?;
        if let Some(brace) = rhs.find('{') {
            if rhs[brace..].starts_with('{') && rhs[brace + 1..].contains('}') {
                let slot: String = rhs[brace + 1..]
                    .chars()
                    .take_while(|&c| c != '}')
                    .collect();
                if slot.chars().all(|c| c.is_ascii_lowercase() || c == '_') && !slot.is_empty() {
                    return Err(GrammarError::MissingSlot(slot));
                }
            }
        }
        if name.chars().all(|c| c.is_ascii_uppercase() || c == '_') {
            terminal_defs.push(parse_terminal_def(&name, rhs, lineno + 1)?);
        } else {
            let alts = parse_alternation(rhs, lineno + 1)?;
            rules.push((name, alts));
        }
    }
    if rules.is_empty() {
        return Err(GrammarError::Syntax {
            line: 0,
            message: "grammar has no rules".to_string(),
        });
    }

    lower(source, rules, terminal_defs, extra_terminals)
}

fn split_definition(line: &str, lineno: usize) -> Result<(String, &str), GrammarError> {
    let colon = line.find(':').ok_or_else(|| GrammarError::Syntax {
        line: lineno,
        message: "missing ':'".to_string(),
    })?;
    let name = line[..colon].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(GrammarError::Syntax {
            line: lineno,
            message: format!("bad rule name '{name}'"),
        });
    }
    Ok((name.to_string(), line[colon + 1..].trim()))
}

fn parse_terminal_def(name: &str, rhs: &str, lineno: usize) -> Result<Terminal, GrammarError> {
    // Alternation of quoted literals compiles to an escaped pattern;
    // anything else is taken verbatim as a regex.
    let parts: Vec<&str> = rhs.split('|').map(str::trim).collect();
    let all_quoted = !rhs.is_empty()
        && parts
            .iter()
            .all(|p| p.len() >= 2 && p.starts_with('"') && p.ends_with('"'));
    if all_quoted {
        let mut texts: Vec<String> = parts
            .iter()
            .map(|p| escape_grammar_literal(&p[1..p.len() - 1]))
            .collect();
        texts.sort_unstable();
        Ok(Terminal::pattern(name, &texts.join("|")))
    } else if rhs.is_empty() {
        Err(GrammarError::Syntax {
            line: lineno,
            message: format!("terminal '{name}' has an empty definition"),
        })
    } else {
        Ok(Terminal {
            name: name.to_string(),
            matcher: Some(Matcher::Pattern(RegexPattern::new(rhs))),
        })
    }
}

struct Tok<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Tok<'a> {
    fn error(&self, message: impl Into<String>) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }
}

fn parse_alternation(rhs: &str, line: usize) -> Result<Alts, GrammarError> {
    let mut tok = Tok { rest: rhs, line };
    let alts = alternation(&mut tok)?;
    if !tok.rest.trim().is_empty() {
        return Err(tok.error(format!("trailing input '{}'", tok.rest.trim())));
    }
    Ok(alts)
}

fn alternation(tok: &mut Tok) -> Result<Alts, GrammarError> {
    let mut alts = vec![sequence(tok)?];
    loop {
        tok.rest = tok.rest.trim_start();
        if let Some(rest) = tok.rest.strip_prefix('|') {
            tok.rest = rest;
            alts.push(sequence(tok)?);
        } else {
            break;
        }
    }
    Ok(alts)
}

fn sequence(tok: &mut Tok) -> Result<Vec<Item>, GrammarError> {
    let mut items = Vec::new();
    loop {
        tok.rest = tok.rest.trim_start();
        if tok.rest.is_empty() || tok.rest.starts_with('|') || tok.rest.starts_with(')') {
            break;
        }
        items.push(item(tok)?);
    }
    Ok(items)
}

fn item(tok: &mut Tok) -> Result<Item, GrammarError> {
    let mut node = atom(tok)?;
    loop {
        if let Some(rest) = tok.rest.strip_prefix('*') {
            tok.rest = rest;
            node = Item::Star(Box::new(node));
        } else if let Some(rest) = tok.rest.strip_prefix('+') {
            tok.rest = rest;
            node = Item::Plus(Box::new(node));
        } else if let Some(rest) = tok.rest.strip_prefix('?') {
            tok.rest = rest;
            node = Item::Opt(Box::new(node));
        } else {
            break;
        }
    }
    Ok(node)
}

fn atom(tok: &mut Tok) -> Result<Item, GrammarError> {
    if let Some(rest) = tok.rest.strip_prefix('(') {
        tok.rest = rest;
        let alts = alternation(tok)?;
        tok.rest = tok.rest.trim_start();
        match tok.rest.strip_prefix(')') {
            Some(rest) => {
                tok.rest = rest;
                Ok(Item::Group(alts))
            }
            None => Err(tok.error("unclosed group")),
        }
    } else if let Some(rest) = tok.rest.strip_prefix('"') {
        match rest.find('"') {
            Some(end) => {
                let text = rest[..end].to_string();
                tok.rest = &rest[end + 1..];
                if text.is_empty() {
                    return Err(tok.error("empty literal"));
                }
                Ok(Item::Literal(text))
            }
            None => Err(tok.error("unclosed literal")),
        }
    } else {
        let len = tok
            .rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(tok.rest.len());
        if len == 0 {
            return Err(tok.error(format!("unexpected character '{}'", &tok.rest[..1])));
        }
        let name = tok.rest[..len].to_string();
        tok.rest = &tok.rest[len..];
        Ok(Item::Ref(name))
    }
}

/// Lower the EBNF rule bodies to plain productions, resolving names and
/// synthesizing fresh nonterminals for groups and quantifiers.
fn lower(
    source: &str,
    rules: Vec<(String, Alts)>,
    terminal_defs: Vec<Terminal>,
    extra_terminals: &[Terminal],
) -> Result<Grammar, GrammarError> {
    let mut l = Lowerer {
        nonterminals: Vec::new(),
        nt_ids: HashMap::new(),
        terminals: vec![Terminal {
            name: END_TERMINAL.to_string(),
            matcher: None,
        }],
        term_ids: HashMap::from([(END_TERMINAL.to_string(), 0usize)]),
        productions: Vec::new(),
        defs: HashMap::new(),
        fresh: 0,
    };
    for t in terminal_defs.iter().chain(extra_terminals) {
        l.defs.entry(t.name.clone()).or_insert_with(|| t.clone());
    }
    let rule_names: Vec<String> = rules.iter().map(|(n, _)| n.clone()).collect();
    for name in &rule_names {
        l.nt_id(name);
    }

    for (name, alts) in &rules {
        let lhs = l.nt_id(name);
        for seq in alts {
            for rhs in l.lower_seq(seq, &rule_names)? {
                l.productions.push((lhs, rhs));
            }
        }
    }

    // start rule: the one named "start", else the first rule
    let start_name = if rule_names.iter().any(|n| n == "start") {
        "start"
    } else {
        &rule_names[0]
    };
    let start = l.nt_ids[start_name];

    // cache identity: instantiated source plus the matcher definitions of
    // every externally supplied terminal actually referenced
    let mut key = String::from(source.trim());
    let mut used: Vec<&Terminal> = l
        .terminals
        .iter()
        .filter(|t| l.defs.contains_key(&t.name))
        .collect();
    used.sort_by(|a, b| a.name.cmp(&b.name));
    for t in used {
        if let Some(Matcher::Pattern(p)) = &t.matcher {
            key.push_str(&format!("\n%{}: {}", t.name, p.text()));
        }
    }

    Ok(Grammar {
        key,
        terminals: l.terminals,
        nonterminals: l.nonterminals,
        productions: l.productions,
        start,
    })
}

struct Lowerer {
    nonterminals: Vec<String>,
    nt_ids: HashMap<String, usize>,
    terminals: Vec<Terminal>,
    term_ids: HashMap<String, usize>,
    productions: Vec<(usize, Vec<Sym>)>,
    defs: HashMap<String, Terminal>,
    fresh: usize,
}

impl Lowerer {
    fn nt_id(&mut self, name: &str) -> usize {
        if let Some(&id) = self.nt_ids.get(name) {
            return id;
        }
        let id = self.nonterminals.len();
        self.nonterminals.push(name.to_string());
        self.nt_ids.insert(name.to_string(), id);
        id
    }

    fn term_id(&mut self, terminal: Terminal) -> usize {
        if let Some(&id) = self.term_ids.get(&terminal.name) {
            return id;
        }
        let id = self.terminals.len();
        self.term_ids.insert(terminal.name.clone(), id);
        self.terminals.push(terminal);
        id
    }

    fn fresh_nt(&mut self, hint: &str) -> usize {
        let name = format!("__{}{}", hint, self.fresh);
        self.fresh += 1;
        self.nt_id(&name)
    }

    /// Lower a sequence into one or more plain right-hand sides. Optional
    /// items fork the sequence (present/absent) instead of introducing an
    /// empty nonterminal; the eager decision an empty rule would force at
    /// shared prefixes (e.g. a sign before a parenthesized atom) breaks
    /// LR(1) determinism in grammars that are otherwise fine.
    fn lower_seq(&mut self, seq: &[Item], rules: &[String]) -> Result<Vec<Vec<Sym>>, GrammarError> {
        let mut variants: Vec<Vec<Sym>> = vec![Vec::new()];
        for item in seq {
            match item {
                Item::Opt(inner) => {
                    let sym = self.lower_item(inner, rules)?;
                    let mut forked = Vec::with_capacity(variants.len() * 2);
                    for v in &variants {
                        let mut with = v.clone();
                        with.push(sym);
                        forked.push(with);
                        forked.push(v.clone());
                    }
                    variants = forked;
                }
                other => {
                    let sym = self.lower_item(other, rules)?;
                    for v in &mut variants {
                        v.push(sym);
                    }
                }
            }
        }
        Ok(variants)
    }

    fn lower_item(&mut self, item: &Item, rules: &[String]) -> Result<Sym, GrammarError> {
        match item {
            Item::Literal(text) => {
                if text.starts_with('<') && text.ends_with('>') && text.len() > 2 {
                    Ok(Sym::T(self.term_id(Terminal::placeholder(text))))
                } else {
                    Ok(Sym::T(self.term_id(Terminal::literal(text))))
                }
            }
            Item::Ref(name) => {
                if rules.iter().any(|r| r == name) {
                    Ok(Sym::N(self.nt_ids[name]))
                } else if let Some(def) = self.defs.get(name).cloned() {
                    Ok(Sym::T(self.term_id(def)))
                } else {
                    // lowercase references to a defined terminal resolve to it
                    // (the listings write `base_type` for the BASE_TYPE terminal)
                    let upper = name.to_uppercase();
                    if let Some(def) = self.defs.get(&upper).cloned() {
                        Ok(Sym::T(self.term_id(def)))
                    } else {
                        Err(GrammarError::UnknownSymbol(name.clone()))
                    }
                }
            }
            Item::Group(alts) => {
                let nt = self.fresh_nt("g");
                for seq in alts {
                    for rhs in self.lower_seq(seq, rules)? {
                        self.productions.push((nt, rhs));
                    }
                }
                Ok(Sym::N(nt))
            }
            Item::Star(inner) => {
                let sym = self.lower_item(inner, rules)?;
                let nt = self.fresh_nt("s");
                self.productions.push((nt, vec![]));
                self.productions.push((nt, vec![Sym::N(nt), sym]));
                Ok(Sym::N(nt))
            }
            Item::Plus(inner) => {
                let sym = self.lower_item(inner, rules)?;
                let nt = self.fresh_nt("p");
                self.productions.push((nt, vec![sym]));
                self.productions.push((nt, vec![Sym::N(nt), sym]));
                Ok(Sym::N(nt))
            }
            Item::Opt(inner) => {
                // reachable only for nested `x??`; forked at sequence level
                let sym = self.lower_item(inner, rules)?;
                let nt = self.fresh_nt("o");
                self.productions.push((nt, vec![]));
                self.productions.push((nt, vec![sym]));
                Ok(Sym::N(nt))
            }
        }
    }
}
