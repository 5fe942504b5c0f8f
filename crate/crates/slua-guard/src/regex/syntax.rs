//! Parser for the regex dialect.

use super::{in_alphabet, RegexError};

/// Set of characters, as a bitmask over byte values 0..=127.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CharSet(pub u128);

impl CharSet {
    pub const EMPTY: CharSet = CharSet(0);

    pub fn alphabet() -> CharSet {
        let mut mask = 0u128;
        for b in 0u8..=0x7E {
            if in_alphabet(b) {
                mask |= 1 << b;
            }
        }
        CharSet(mask)
    }

    pub fn single(b: u8) -> CharSet {
        CharSet(1 << b)
    }

    pub fn insert(&mut self, b: u8) {
        self.0 |= 1 << b;
    }

    pub fn union(self, other: CharSet) -> CharSet {
        CharSet(self.0 | other.0)
    }

    pub fn contains(self, b: u8) -> bool {
        b < 0x80 && self.0 & (1 << b) != 0
    }

    pub fn negated(self) -> CharSet {
        CharSet(Self::alphabet().0 & !self.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        (0u8..0x80).filter(move |&b| self.contains(b))
    }
}

pub fn digit_set() -> CharSet {
    let mut s = CharSet::EMPTY;
    for b in b'0'..=b'9' {
        s.insert(b);
    }
    s
}

pub fn word_set() -> CharSet {
    let mut s = digit_set();
    for b in b'a'..=b'z' {
        s.insert(b);
    }
    for b in b'A'..=b'Z' {
        s.insert(b);
    }
    s.insert(b'_');
    s
}

pub fn space_set() -> CharSet {
    let mut s = CharSet::EMPTY;
    for b in *b" \t\n\r" {
        s.insert(b);
    }
    s
}

#[derive(Debug, Clone)]
pub enum Ast {
    Empty,
    Class(CharSet),
    Concat(Vec<Ast>),
    Alt(Vec<Ast>),
    Star(Box<Ast>),
    Plus(Box<Ast>),
    Opt(Box<Ast>),
    Repeat(Box<Ast>, u32, u32),
}

pub fn parse(pattern: &str) -> Result<Ast, RegexError> {
    super::check_alphabet(pattern)?;
    let mut p = Parser {
        bytes: pattern.as_bytes(),
        pos: 0,
    };
    let ast = p.alternation()?;
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected character"));
    }
    Ok(ast)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> RegexError {
        RegexError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn alternation(&mut self) -> Result<Ast, RegexError> {
        let mut alts = vec![self.concat()?];
        while self.peek() == Some(b'|') {
            self.bump();
            alts.push(self.concat()?);
        }
        if alts.len() == 1 {
            Ok(alts.pop().unwrap())
        } else {
            Ok(Ast::Alt(alts))
        }
    }

    fn concat(&mut self) -> Result<Ast, RegexError> {
        let mut items = Vec::new();
        while let Some(b) = self.peek() {
            if b == b'|' || b == b')' {
                break;
            }
            items.push(self.postfix()?);
        }
        match items.len() {
            0 => Ok(Ast::Empty),
            1 => Ok(items.pop().unwrap()),
            _ => Ok(Ast::Concat(items)),
        }
    }

    fn postfix(&mut self) -> Result<Ast, RegexError> {
        let mut node = self.atom()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    node = Ast::Star(Box::new(node));
                }
                Some(b'+') => {
                    self.bump();
                    node = Ast::Plus(Box::new(node));
                }
                Some(b'?') => {
                    self.bump();
                    node = Ast::Opt(Box::new(node));
                }
                Some(b'{') => {
                    self.bump();
                    let (lo, hi) = self.bounds()?;
                    node = Ast::Repeat(Box::new(node), lo, hi);
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn bounds(&mut self) -> Result<(u32, u32), RegexError> {
        let lo = self.number()?;
        if self.bump() != Some(b',') {
            return Err(self.err("expected ',' in bounded repeat"));
        }
        let hi = self.number()?;
        if self.bump() != Some(b'}') {
            return Err(self.err("expected '}' closing bounded repeat"));
        }
        if hi < lo {
            return Err(self.err("bounded repeat has max < min"));
        }
        if hi > 256 {
            return Err(self.err("bounded repeat limit too large"));
        }
        Ok((lo, hi))
    }

    fn number(&mut self) -> Result<u32, RegexError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.bump();
        }
        if self.pos == start {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("repeat bound out of range"))
    }

    fn atom(&mut self) -> Result<Ast, RegexError> {
        match self.peek() {
            None => Err(self.err("expected an atom")),
            Some(b'(') => {
                self.bump();
                let inner = self.alternation()?;
                if self.bump() != Some(b')') {
                    return Err(self.err("unclosed group"));
                }
                Ok(inner)
            }
            Some(b'.') => {
                self.bump();
                Ok(Ast::Class(CharSet::alphabet()))
            }
            Some(b'[') => {
                self.bump();
                self.class()
            }
            Some(b'\\') => {
                self.bump();
                Ok(Ast::Class(self.escape()?))
            }
            Some(b @ (b'*' | b'+' | b'?' | b'{' | b'}' | b']')) => Err(RegexError::Syntax {
                offset: self.pos,
                message: format!("unescaped metacharacter '{}'", b as char),
            }),
            Some(b) => {
                self.bump();
                Ok(Ast::Class(CharSet::single(b)))
            }
        }
    }

    fn escape(&mut self) -> Result<CharSet, RegexError> {
        match self.bump() {
            None => Err(self.err("dangling escape")),
            Some(b'd') => Ok(digit_set()),
            Some(b'w') => Ok(word_set()),
            Some(b's') => Ok(space_set()),
            Some(b) if !b.is_ascii_alphanumeric() => Ok(CharSet::single(b)),
            Some(b) => Err(RegexError::Syntax {
                offset: self.pos - 1,
                message: format!("unsupported escape '\\{}'", b as char),
            }),
        }
    }

    fn class(&mut self) -> Result<Ast, RegexError> {
        let negate = if self.peek() == Some(b'^') {
            self.bump();
            true
        } else {
            false
        };
        let mut set = CharSet::EMPTY;
        loop {
            match self.peek() {
                None => return Err(self.err("unclosed character class")),
                Some(b']') => {
                    self.bump();
                    break;
                }
                _ => {
                    let lo_set = self.class_item()?;
                    // a-b range only when the left side was a single character
                    if self.peek() == Some(b'-') && self.bytes.get(self.pos + 1) != Some(&b']') {
                        let lo = single_of(lo_set).ok_or_else(|| self.err("range after a class"))?;
                        self.bump();
                        let hi_set = self.class_item()?;
                        let hi =
                            single_of(hi_set).ok_or_else(|| self.err("range into a class"))?;
                        if hi < lo {
                            return Err(self.err("inverted range"));
                        }
                        for b in lo..=hi {
                            if in_alphabet(b) {
                                set.insert(b);
                            }
                        }
                    } else {
                        set = set.union(lo_set);
                    }
                }
            }
        }
        if set.is_empty() && !negate {
            return Err(self.err("empty character class"));
        }
        Ok(Ast::Class(if negate { set.negated() } else { set }))
    }

    fn class_item(&mut self) -> Result<CharSet, RegexError> {
        match self.bump() {
            None => Err(self.err("unclosed character class")),
            Some(b'\\') => self.escape(),
            Some(b) => Ok(CharSet::single(b)),
        }
    }
}

fn single_of(set: CharSet) -> Option<u8> {
    let mut it = set.iter();
    let first = it.next()?;
    if it.next().is_none() {
        Some(first)
    } else {
        None
    }
}
