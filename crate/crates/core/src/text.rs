use unicode_normalization::UnicodeNormalization;

/// Trims surrounding whitespace and applies Unicode NFC.
pub fn normalize_name(name: &str) -> String {
    name.trim().nfc().collect()
}
