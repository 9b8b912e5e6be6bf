//! Canonical forms for entity names and player aliases.

use unicode_normalization::UnicodeNormalization;

/// Canonical form of a display string: NFC-composed, lowercased, trimmed,
/// with internal whitespace runs collapsed to a single space.
///
/// Scripts without case (Han, Arabic) pass through unchanged apart from
/// composition and whitespace.
pub fn normalize_name(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let folded = composed.to_lowercase();
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    // Lowercasing can produce decomposed sequences (e.g. U+0130), so recompose.
    out.nfc().collect()
}

/// True iff the guess and the target share a canonical form.
pub fn guess_matches(guess: &str, target_display: &str) -> bool {
    normalize_name(guess) == normalize_name(target_display)
}
