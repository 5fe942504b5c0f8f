//! Gumbel-top-k ordering: a full sample-without-replacement permutation of
//! the vocabulary in one pass.

use super::{TokenId, NEG_INF_SENTINEL};
use rand::Rng;

/// Ascending sort of `ln(-ln u_i) - logits_i / temperature` with `u_i`
/// uniform. The head of the order is distributed as softmax(logits/T);
/// iterating it yields sampling without replacement. Tokens at the minus
/// infinity sentinel are excluded entirely. Ties break by token id.
pub fn gumbel_order<R: Rng>(logits: &[f64], temperature: f64, rng: &mut R) -> Vec<TokenId> {
    assert!(temperature > 0.0, "temperature must be positive");
    let mut keyed: Vec<(f64, TokenId)> = Vec::with_capacity(logits.len());
    for (id, &logit) in logits.iter().enumerate() {
        if logit <= NEG_INF_SENTINEL || logit.is_nan() || logit == f64::NEG_INFINITY {
            continue;
        }
        // clamp away from 0 and 1 so both logs stay finite
        let u: f64 = rng.gen::<f64>().clamp(1e-300, 1.0 - 1e-16);
        let key = (-(u.ln())).ln() - logit / temperature;
        keyed.push((key, id));
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, id)| id).collect()
}
