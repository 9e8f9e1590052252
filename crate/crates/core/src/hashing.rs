use xxhash_rust::xxh3::Xxh3;

/// Stable 64-bit hash over length-prefixed parts, so `("ab", "c")` and
/// `("a", "bc")` differ. Stable across platforms and releases.
pub fn stable_hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Xxh3::new();
    for p in parts {
        h.update(&(p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.digest()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixing_separates_parts() {
        assert_ne!(stable_hash64(&[b"ab", b"c"]), stable_hash64(&[b"a", b"bc"]));
        assert_eq!(stable_hash64(&[b"x"]), stable_hash64(&[b"x"]));
    }
}
