//! Shared text utilities: whitespace normalization, tokenization, and a
//! stable token hash. Everything here must be deterministic across runs
//! and platforms since cache keys and embeddings depend on it.

/// Collapse internal whitespace to single spaces and trim the ends.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased alphanumeric tokens. Punctuation splits tokens; digits kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for c in ch.to_lowercase() {
                cur.push(c);
            }
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Raw whitespace-separated tokens with original casing, for BLEU.
pub fn ws_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// FNV-1a 64-bit. Stable across platforms and Rust versions, unlike
/// `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Case-insensitive substring containment on whitespace-normalized text.
pub fn contains_ci(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    normalize_ws(haystack)
        .to_lowercase()
        .contains(&normalize_ws(needle).to_lowercase())
}
