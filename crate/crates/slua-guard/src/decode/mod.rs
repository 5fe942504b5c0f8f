//! Constrained decoding with token healing.
//!
//! The outer loop asks the tree of parsers for the next-segment regex,
//! extends it for healing (escaped carried prefix in front, dot-all tail
//! behind), then samples tokens by adaptive rejection: tokens are tried in
//! Gumbel-perturbed logit order and the first whose character run stays live
//! is accepted, so sampling reduces to unconstrained sampling whenever the
//! top token is already valid. When the final token overshoots the segment
//! boundary it is popped from the context and its matching prefix is carried
//! into the next round.

mod gumbel;
mod proposer;
mod remote;
mod session;
mod vocab;

pub use gumbel::gumbel_order;
pub use proposer::{AdversarialProposer, RandomProposer, ReplayProposer, TokenProposer};
pub use remote::RemoteProposer;
pub use session::{
    assemble_healing_regex, generate, heal_boundary, sample_valid_token, GenerationConfig,
    GenerationSession, StopReason,
};
pub use vocab::{TokenId, TokenVocabulary};

use thiserror::Error;

/// Logit values at or below this sentinel are treated as minus infinity and
/// never sampled.
pub const NEG_INF_SENTINEL: f64 = -1e30;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("token vocabulary error: {0}")]
    Vocab(String),
    #[error("text cannot be tokenized at byte {0}")]
    Untokenizable(usize),
    #[error("proposer failure: {0}")]
    Proposer(String),
    #[error("logits length {got} does not match vocabulary size {want}")]
    LogitsShape { got: usize, want: usize },
    #[error(transparent)]
    Top(#[from] crate::top::TopError),
    #[error(transparent)]
    Regex(#[from] crate::regex::RegexError),
}
