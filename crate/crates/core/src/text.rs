//! Token normalization shared by hallucination filtering, vocabulary
//! construction, retrieval matching, BM25 and the encoder.

/// Normalizes a single whitespace-delimited word: lowercase, leading and
/// trailing non-alphanumerics stripped. Returns `None` when nothing is left.
pub fn normalize_word(word: &str) -> Option<String> {
    let trimmed = word.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Splits on whitespace and normalizes every word.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_word).collect()
}

/// Whole-token containment: true iff `needle` occurs as a contiguous
/// subsequence of `haystack`. An empty needle never matches.
pub fn contains_token_seq(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Byte offset of the `char_idx`-th character (or `s.len()` at the end).
pub(crate) fn char_to_byte(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (b, _) in s.char_indices() {
        if count == char_idx {
            return Some(b);
        }
        count += 1;
    }
    if count == char_idx {
        Some(s.len())
    } else {
        None
    }
}

/// Slices `s` by half-open character offsets.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = char_to_byte(s, start)?;
    let b1 = char_to_byte(s, end)?;
    Some(&s[b0..b1])
}
