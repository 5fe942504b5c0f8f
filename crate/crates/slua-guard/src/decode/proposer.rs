//! The decoder's only model dependency: something that returns next-token
//! logits for a context. Mock proposers drive tests and the CLI without a
//! model server.

use super::{DecodeError, TokenId, TokenVocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub trait TokenProposer {
    fn vocab(&self) -> &TokenVocabulary;

    /// Logits over the vocabulary given the full token context.
    fn next_logits(&mut self, context: &[TokenId]) -> Result<Vec<f64>, DecodeError>;

    fn tokenize(&mut self, text: &str) -> Result<Vec<TokenId>, DecodeError> {
        self.vocab().tokenize(text)
    }
}

/// Boosts the scripted next token by +10, everything else at 0. Driving the
/// decoder with it reproduces the script exactly (modulo healing).
pub struct ReplayProposer {
    vocab: TokenVocabulary,
    script: Vec<TokenId>,
    prompt_len: Option<usize>,
}

impl ReplayProposer {
    pub fn new(vocab: TokenVocabulary, script_text: &str) -> Result<ReplayProposer, DecodeError> {
        let script = vocab.tokenize(script_text)?;
        Ok(ReplayProposer {
            vocab,
            script,
            prompt_len: None,
        })
    }

    pub fn script_len(&self) -> usize {
        self.script.len()
    }
}

impl TokenProposer for ReplayProposer {
    fn vocab(&self) -> &TokenVocabulary {
        &self.vocab
    }

    fn next_logits(&mut self, context: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        // the first call fixes the prompt boundary; the scripted position is
        // how many tokens of output the context carries beyond it
        let prompt_len = *self.prompt_len.get_or_insert(context.len());
        let pos = context.len() - prompt_len;
        match self.script.get(pos) {
            Some(&want) => {
                // only the scripted token is proposable; anything else would
                // occasionally win the Gumbel race and derail the replay
                let mut logits = vec![super::NEG_INF_SENTINEL; self.vocab.len()];
                logits[want] = 10.0;
                Ok(logits)
            }
            // script exhausted: nothing left to propose, which ends the
            // generation instead of wandering randomly
            None => Ok(vec![super::NEG_INF_SENTINEL; self.vocab.len()]),
        }
    }
}

/// Independent random logits per call, seeded for reproducibility.
pub struct RandomProposer {
    vocab: TokenVocabulary,
    rng: ChaCha12Rng,
}

impl RandomProposer {
    pub fn new(vocab: TokenVocabulary, seed: u64) -> RandomProposer {
        RandomProposer {
            vocab,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }
}

impl TokenProposer for RandomProposer {
    fn vocab(&self) -> &TokenVocabulary {
        &self.vocab
    }

    fn next_logits(&mut self, _context: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        Ok((0..self.vocab.len())
            .map(|_| self.rng.gen_range(-1.0..1.0))
            .collect())
    }
}

/// Replay that periodically boosts a chosen (invalid) token above the
/// scripted one, exercising the rejection path.
pub struct AdversarialProposer {
    inner: ReplayProposer,
    boost: TokenId,
    period: usize,
    calls: usize,
    pub boosted_calls: usize,
}

impl AdversarialProposer {
    pub fn new(
        vocab: TokenVocabulary,
        script_text: &str,
        boost: TokenId,
        period: usize,
    ) -> Result<AdversarialProposer, DecodeError> {
        Ok(AdversarialProposer {
            inner: ReplayProposer::new(vocab, script_text)?,
            boost,
            period: period.max(1),
            calls: 0,
            boosted_calls: 0,
        })
    }
}

impl TokenProposer for AdversarialProposer {
    fn vocab(&self) -> &TokenVocabulary {
        self.inner.vocab()
    }

    fn next_logits(&mut self, context: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        let mut logits = self.inner.next_logits(context)?;
        self.calls += 1;
        if self.calls.is_multiple_of(self.period) {
            logits[self.boost] = 20.0;
            self.boosted_calls += 1;
        }
        Ok(logits)
    }
}
