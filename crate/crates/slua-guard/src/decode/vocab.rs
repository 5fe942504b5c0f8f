//! LM token vocabulary: dense ids over byte strings.

use super::DecodeError;
use crate::regex::in_alphabet;

pub type TokenId = usize;

/// Token table with dense ids from 0. Tokens are non-empty strings over the
/// restricted alphabet; the LM's subword structure is otherwise opaque.
#[derive(Debug, Clone)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
}

impl TokenVocabulary {
    pub fn new(tokens: Vec<String>) -> Result<TokenVocabulary, DecodeError> {
        if tokens.is_empty() {
            return Err(DecodeError::Vocab("empty vocabulary".to_string()));
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(DecodeError::Vocab(format!("token {i} is empty")));
            }
            if t.bytes().any(|b| !in_alphabet(b)) {
                return Err(DecodeError::Vocab(format!(
                    "token {i} ({t:?}) leaves the restricted alphabet"
                )));
            }
        }
        Ok(TokenVocabulary { tokens })
    }

    /// Every single character of the restricted alphabet as its own token,
    /// optionally extended with multi-character tokens.
    pub fn chars_plus(extra: &[&str]) -> TokenVocabulary {
        let mut tokens: Vec<String> = (0u8..0x7F)
            .filter(|&b| in_alphabet(b))
            .map(|b| (b as char).to_string())
            .collect();
        tokens.extend(extra.iter().map(|s| s.to_string()));
        TokenVocabulary::new(tokens).expect("alphabet tokens are valid")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, text: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == text)
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&id| self.token(id)).collect()
    }

    /// Greedy longest-match tokenization. Deterministic and total whenever
    /// every character of `text` exists as a single-character token.
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, DecodeError> {
        let mut ids = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let mut best: Option<(usize, TokenId)> = None;
            for (id, tok) in self.tokens.iter().enumerate() {
                if rest.starts_with(tok.as_str()) {
                    let better = match best {
                        None => true,
                        Some((blen, _)) => tok.len() > blen,
                    };
                    if better {
                        best = Some((tok.len(), id));
                    }
                }
            }
            match best {
                Some((len, id)) => {
                    ids.push(id);
                    pos += len;
                }
                None => return Err(DecodeError::Untokenizable(pos)),
            }
        }
        Ok(ids)
    }
}
