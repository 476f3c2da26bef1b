//! Label normalization.
//!
//! Entity identity for backend-produced strings is defined here: Unicode NFC,
//! trimmed, internal whitespace runs collapsed to a single space. Matching
//! always uses a case-folded key; topic labels (Subtype, Word) are also
//! *stored* case-folded, while side-information labels keep their original
//! case for display.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalize, trim, and collapse internal whitespace runs.
///
/// Returns `None` when nothing but whitespace remains.
pub fn normalize(raw: &str) -> Option<String> {
    let composed: String = raw.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    let mut pending_space = false;
    for ch in composed.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Case-folded matching key for a normalized label.
pub fn fold_key(normalized: &str) -> String {
    normalized.to_lowercase()
}

/// Normalize and case-fold in one step, for labels stored folded.
pub fn normalize_folded(raw: &str) -> Option<String> {
    normalize(raw).map(|s| fold_key(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace_runs() {
        assert_eq!(normalize("  Hydrating \t Serum \n"), Some("Hydrating Serum".into()));
    }

    #[test]
    fn whitespace_only_is_none() {
        assert_eq!(normalize("   "), None);
        assert_eq!(normalize(""), None);
    }

    #[test]
    fn applies_nfc() {
        // e + combining acute composes to é
        let decomposed = "cafe\u{0301}";
        assert_eq!(normalize(decomposed), Some("café".into()));
    }

    #[test]
    fn fold_key_lowercases() {
        assert_eq!(fold_key("L'Oreal"), "l'oreal");
        assert_eq!(normalize_folded(" Plumping  Serum"), Some("plumping serum".into()));
    }
}
