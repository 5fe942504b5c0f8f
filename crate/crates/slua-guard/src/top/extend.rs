//! Look-ahead extension restoring the non-extensible match property.

use super::TopError;
use crate::grammar::Terminal;
use crate::regex::{compile_regex, is_nonextensible, RegexPattern};

/// If `pattern` already satisfies non-extensibility it is returned unchanged;
/// otherwise the union of the follow terminals is appended after a whitespace
/// gap. The follow set must be non-empty and placeholder-free.
pub fn extend_for_nonextensibility(
    pattern: &RegexPattern,
    follow: &[Terminal],
) -> Result<RegexPattern, TopError> {
    if follow.iter().any(|t| t.is_placeholder()) {
        return Err(TopError::GrammarDesign(format!(
            "terminal '{}' is followed by a placeholder; a non-placeholder follow is required",
            pattern.text()
        )));
    }
    let dfa = compile_regex(pattern)?;
    if is_nonextensible(&dfa) {
        return Ok(pattern.clone());
    }
    let mut items: Vec<String> = follow
        .iter()
        .filter(|t| !t.is_end())
        .filter_map(|t| t.pattern_text())
        .collect();
    if items.is_empty() {
        return Err(TopError::GrammarDesign(format!(
            "extensible pattern '{}' has an empty follow set",
            pattern.text()
        )));
    }
    items.sort_unstable();
    items.dedup();
    let joined = if items.len() == 1 {
        items.pop().unwrap()
    } else {
        format!("({})", items.join("|"))
    };
    let extended = RegexPattern::new(format!("{}\\s*{}", pattern.grouped_text(), joined));
    debug_assert!(
        is_nonextensible(&compile_regex(&extended)?),
        "extension failed to restore non-extensibility for {extended}"
    );
    Ok(extended)
}
