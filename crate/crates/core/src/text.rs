//! Canonical text form shared by every comparison, vocabulary key and cache key.

use unicode_normalization::UnicodeNormalization;

/// Version tag recorded in manifests so outputs stay attributable if the
/// normalization rule ever changes.
pub const NORMALIZATION_VERSION: &str = "nfc-lower-collapse-v1";

/// NFC, lowercase, and collapse every whitespace run to a single space.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    collapse_whitespace(&lowered)
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte offset of the `char_idx`-th character, or `None` past the end.
pub(crate) fn char_to_byte(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (byte, _) in text.char_indices() {
        if count == char_idx {
            return Some(byte);
        }
        count += 1;
    }
    (count == char_idx).then_some(text.len())
}
