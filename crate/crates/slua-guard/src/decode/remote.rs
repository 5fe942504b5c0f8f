//! Logit-oracle client speaking the JSON-over-HTTP protocol:
//!
//! - `GET  /v1/vocab`            -> `{"tokens": [string, ...]}`
//! - `POST /v1/tokenize {text}`  -> `{"ids": [int, ...]}`
//! - `POST /v1/logits {context}` -> `{"logits": [number, ...]}`
//!
//! `-1e30` is accepted as the minus-infinity sentinel. Transport or schema
//! failures surface as proposer errors and abort the generation.

use super::{DecodeError, TokenId, TokenProposer, TokenVocabulary};
use serde::Deserialize;

#[derive(Deserialize)]
struct VocabBody {
    tokens: Vec<String>,
}

#[derive(Deserialize)]
struct IdsBody {
    ids: Vec<TokenId>,
}

#[derive(Deserialize)]
struct LogitsBody {
    logits: Vec<f64>,
}

pub struct RemoteProposer {
    base: String,
    agent: ureq::Agent,
    vocab: TokenVocabulary,
}

impl RemoteProposer {
    /// Fetch the vocabulary and wrap the endpoint as a proposer.
    pub fn connect(base_url: &str) -> Result<RemoteProposer, DecodeError> {
        let agent = ureq::Agent::new_with_defaults();
        let base = base_url.trim_end_matches('/').to_string();
        let body: VocabBody = agent
            .get(format!("{base}/v1/vocab"))
            .call()
            .map_err(|e| DecodeError::Proposer(format!("GET /v1/vocab failed: {e}")))?
            .body_mut()
            .read_json()
            .map_err(|e| DecodeError::Proposer(format!("vocab response malformed: {e}")))?;
        let vocab = TokenVocabulary::new(body.tokens)?;
        Ok(RemoteProposer { base, agent, vocab })
    }
}

impl TokenProposer for RemoteProposer {
    fn vocab(&self) -> &TokenVocabulary {
        &self.vocab
    }

    fn tokenize(&mut self, text: &str) -> Result<Vec<TokenId>, DecodeError> {
        let body: IdsBody = self
            .agent
            .post(format!("{}/v1/tokenize", self.base))
            .send_json(serde_json::json!({ "text": text }))
            .map_err(|e| DecodeError::Proposer(format!("POST /v1/tokenize failed: {e}")))?
            .body_mut()
            .read_json()
            .map_err(|e| DecodeError::Proposer(format!("tokenize response malformed: {e}")))?;
        for &id in &body.ids {
            if id >= self.vocab.len() {
                return Err(DecodeError::Proposer(format!(
                    "tokenize returned out-of-range id {id}"
                )));
            }
        }
        Ok(body.ids)
    }

    fn next_logits(&mut self, context: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        let body: LogitsBody = self
            .agent
            .post(format!("{}/v1/logits", self.base))
            .send_json(serde_json::json!({ "context": context }))
            .map_err(|e| DecodeError::Proposer(format!("POST /v1/logits failed: {e}")))?
            .body_mut()
            .read_json()
            .map_err(|e| DecodeError::Proposer(format!("logits response malformed: {e}")))?;
        if body.logits.len() != self.vocab.len() {
            return Err(DecodeError::LogitsShape {
                got: body.logits.len(),
                want: self.vocab.len(),
            });
        }
        Ok(body.logits)
    }
}
