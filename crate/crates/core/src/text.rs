//! Character-level text helpers shared by retrieval, schema checks, and dedup.
//!
//! Everything here works on Unicode scalar values. Chinese text has no word
//! boundaries, so n-grams are character n-grams and keyword matching is plain
//! substring search over normalized text.

use std::collections::HashSet;

/// Sentence terminators recognised by [`sentence_count`].
pub const SENTENCE_TERMINATORS: &[char] = &['。', '！', '？', '!', '?', '.'];

/// Interrogative terminators accepted at the end of a hook question.
pub const QUESTION_TERMINATORS: &[char] = &['？', '?'];

/// Case-folds and collapses every whitespace run to a single ASCII space.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(ch.to_lowercase());
    }
    out
}

/// Number of Unicode scalar values.
pub fn char_count(text: &str) -> usize {
    text.chars().count()
}

/// Number of non-whitespace Unicode scalar values.
pub fn visible_char_count(text: &str) -> usize {
    text.chars().filter(|c| !c.is_whitespace()).count()
}

/// Counts sentences: terminators end a sentence, runs of terminators collapse
/// into one boundary, and a trailing unterminated fragment counts as one more.
/// Whitespace-only text has zero sentences.
pub fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_sentence = false;
    for ch in text.chars() {
        if SENTENCE_TERMINATORS.contains(&ch) {
            if in_sentence {
                count += 1;
                in_sentence = false;
            }
        } else if !ch.is_whitespace() {
            in_sentence = true;
        }
    }
    if in_sentence {
        count += 1;
    }
    count
}

/// Splits text after each terminator run. Used to cut narration at sentence
/// boundaries.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut after_terminator = false;
    for ch in text.chars() {
        let is_term = SENTENCE_TERMINATORS.contains(&ch);
        if after_terminator && !is_term {
            if !current.trim().is_empty() {
                out.push(current.trim().to_string());
            }
            current.clear();
        }
        current.push(ch);
        after_terminator = is_term;
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

/// Ordered list of character n-grams; empty when the text is shorter than `n`.
pub fn char_ngrams(text: &str, n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram size must be at least 1");
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < n {
        return Vec::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Set of character n-grams.
pub fn char_ngram_set(text: &str, n: usize) -> HashSet<String> {
    char_ngrams(text, n).into_iter().collect()
}

/// Number of non-overlapping occurrences of `needle` in `haystack`.
pub fn occurrences(haystack: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    haystack.matches(needle).count()
}
