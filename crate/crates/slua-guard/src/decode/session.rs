//! The generation loop: segment regexes, adaptive rejection sampling,
//! boundary healing, budget enforcement.

use super::{DecodeError, TokenId, TokenProposer};
use crate::regex::{escape_literal, run, shortest_completing_prefix, Dfa, RegexPattern, StateId};
use crate::top::TopRoot;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub max_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            max_tokens: 1500,
            temperature: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    Finished,
    Budget,
    DeadEnd(String),
}

/// Decoder state. The healing invariant holds at every outer-loop boundary:
/// `decode(generated) + prefix == prog`, with `prefix` always a suffix of
/// `prog` (the carried start of a partially matched boundary token).
#[derive(Debug)]
pub struct GenerationSession {
    pub prompt_tokens: Vec<TokenId>,
    pub generated: Vec<TokenId>,
    pub prog: String,
    pub prefix: String,
    pub stop_reason: StopReason,
    /// tokens accepted over the whole session, including popped boundary ones
    pub accepted_tokens: usize,
    /// tokens rejected by the constraint before a valid one was found
    pub rejections: usize,
    pub proposer_calls: usize,
    pub diagnostics: Option<String>,
    /// segments fed to the parser, in order
    pub segments: Vec<String>,
}

/// Healing form of a segment regex: the escaped carried prefix in front, the
/// core grouped, and a dot-all tail so the final token may overshoot.
pub fn assemble_healing_regex(prefix: &str, core: &RegexPattern) -> RegexPattern {
    let escaped = escape_literal(prefix)
        .map(|p| p.text().to_string())
        .unwrap_or_default();
    RegexPattern::new(format!("{escaped}({}).*", core.text()))
}

/// First token in Gumbel order whose full character run from `state` never
/// dies. Returns the token, its end state, and how many tokens were rejected.
pub fn sample_valid_token<R: rand::Rng>(
    dfa: &Dfa,
    state: StateId,
    logits: &[f64],
    temperature: f64,
    rng: &mut R,
    vocab: &super::TokenVocabulary,
) -> Result<(TokenId, StateId, usize), DecodeError> {
    let order = super::gumbel_order(logits, temperature, rng);
    for (rejected, id) in order.into_iter().enumerate() {
        let (end, _) = run(dfa, state, vocab.token(id));
        if !dfa.is_dead(end) {
            return Ok((id, end, rejected));
        }
    }
    Err(DecodeError::Proposer(
        "no token in the vocabulary can extend the current regex".to_string(),
    ))
}

/// Boundary healing: when dropping the final character of the output still
/// reaches a final state, the last token crossed the segment boundary. It is
/// popped from the context and its shortest completing prefix is carried.
///
/// Returns (tokens kept, new prefix, segment to feed) where the segment
/// excludes the previously carried prefix.
pub fn heal_boundary(
    dfa: &Dfa,
    output_tokens: &[TokenId],
    old_prefix: &str,
    vocab: &super::TokenVocabulary,
) -> Result<(Vec<TokenId>, String, String), DecodeError> {
    let output = vocab.decode(output_tokens);
    debug_assert!(!output_tokens.is_empty());
    let all_but_last_char = &output[..output.len() - last_char_len(&output)];
    let (state, _) = run(dfa, dfa.initial(), all_but_last_char);
    let healed = dfa.is_final(state);

    if healed {
        let mut kept = output_tokens.to_vec();
        let last = kept.pop().expect("non-empty output");
        let context = vocab.decode(&kept);
        let last_text = vocab.token(last);
        let k = shortest_completing_prefix(dfa, &context, last_text)?
            .ok_or_else(|| DecodeError::Proposer("healing prefix not found".to_string()))?;
        let new_prefix = last_text[..k].to_string();
        let segment = format!("{context}{new_prefix}");
        let segment = segment[old_prefix.len()..].to_string();
        Ok((kept, new_prefix, segment))
    } else {
        let segment = output[old_prefix.len()..].to_string();
        Ok((output_tokens.to_vec(), String::new(), segment))
    }
}

fn last_char_len(s: &str) -> usize {
    s.chars().next_back().map(char::len_utf8).unwrap_or(0)
}

/// Run constrained decoding until the root finishes, the budget is exhausted
/// or a dead end is reached. The finished program is `session.prog`.
pub fn generate(
    mut root: TopRoot,
    proposer: &mut dyn TokenProposer,
    prompt: &str,
    cfg: &GenerationConfig,
) -> Result<(GenerationSession, TopRoot), DecodeError> {
    let prompt_tokens = proposer.tokenize(prompt)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut session = GenerationSession {
        prompt_tokens: prompt_tokens.clone(),
        generated: Vec::new(),
        prog: String::new(),
        prefix: String::new(),
        stop_reason: StopReason::Finished,
        accepted_tokens: 0,
        rejections: 0,
        proposer_calls: 0,
        diagnostics: None,
        segments: Vec::new(),
    };
    let vocab_len = proposer.vocab().len();

    while !root.has_finished() {
        let core = match root.next_regex() {
            Ok(r) => r,
            Err(e) => {
                session.stop_reason = StopReason::DeadEnd(e.to_string());
                session.diagnostics = Some(e.to_string());
                return Ok((session, root));
            }
        };
        let healing = assemble_healing_regex(&session.prefix, &core);
        let dfa = root.compile(&healing)?;
        let mut state = dfa.initial();
        let mut output_tokens: Vec<TokenId> = Vec::new();

        while !dfa.is_final(state) {
            let mut context = session.prompt_tokens.clone();
            context.extend_from_slice(&session.generated);
            context.extend_from_slice(&output_tokens);
            let logits = proposer.next_logits(&context)?;
            if logits.len() != vocab_len {
                return Err(DecodeError::LogitsShape {
                    got: logits.len(),
                    want: vocab_len,
                });
            }
            session.proposer_calls += 1;
            let sampled = sample_valid_token(
                &dfa,
                state,
                &logits,
                cfg.temperature,
                &mut rng,
                proposer.vocab(),
            );
            let (token, next_state, rejected) = match sampled {
                Ok(t) => t,
                Err(e) => {
                    session.stop_reason = StopReason::DeadEnd(e.to_string());
                    session.diagnostics = Some(e.to_string());
                    return Ok((session, root));
                }
            };
            session.rejections += rejected;
            output_tokens.push(token);
            state = next_state;
            session.accepted_tokens += 1;
            if session.accepted_tokens > cfg.max_tokens {
                // the in-flight segment is incomplete; prog keeps only text
                // the parser actually consumed, so it stays a valid prefix
                session.stop_reason = StopReason::Budget;
                return Ok((session, root));
            }
        }

        let (kept, new_prefix, segment) =
            heal_boundary(&dfa, &output_tokens, &session.prefix, proposer.vocab())?;
        if let Err(e) = root.feed_text(&segment) {
            session.stop_reason = StopReason::DeadEnd(e.to_string());
            session.diagnostics = Some(e.to_string());
            return Ok((session, root));
        }
        session.generated.extend_from_slice(&kept);
        session.prefix = new_prefix;
        session.prog.push_str(&segment);
        session.segments.push(segment);

        debug_assert_eq!(
            format!(
                "{}{}",
                proposer.vocab().decode(&session.generated),
                session.prefix
            ),
            session.prog,
            "healing invariant violated"
        );
    }

    session.stop_reason = StopReason::Finished;
    Ok((session, root))
}
