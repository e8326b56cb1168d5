//! Backend-independent tokenization.
//!
//! Length limits and the n-gram backend both work on whitespace tokens after
//! splitting off `, . ? ! :`. A punctuation mark sitting between two digits
//! stays inside its token so that times (`13:00`) and prices (`16.50`) survive.

const SPLIT_CHARS: [char; 5] = [',', '.', '?', '!', ':'];

/// Splits `text` into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let between_digits = i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_ascii_digit()
                && chars[i + 1].is_ascii_digit();
            if SPLIT_CHARS.contains(&c) && !between_digits {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Number of tokens `text` occupies.
pub fn count_tokens(text: &str) -> usize {
    tokenize(text).len()
}

/// Re-spaces `text` so that it is a fixed point of [`tokenize`] + join.
pub fn normalize_spacing(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Keeps at most `max` tokens, dropping from the tail.
pub fn truncate_tail(text: &str, max: usize) -> String {
    let tokens = tokenize(text);
    tokens[..tokens.len().min(max)].join(" ")
}

/// Keeps at most `max` tokens, dropping from the head.
pub fn truncate_head(text: &str, max: usize) -> String {
    let tokens = tokenize(text);
    tokens[tokens.len().saturating_sub(max)..].join(" ")
}

/// True when `haystack[start..end]` is delimited by non-alphanumeric characters.
pub(crate) fn at_word_boundary(haystack: &str, start: usize, end: usize) -> bool {
    let before = haystack[..start].chars().next_back();
    let after = haystack[end..].chars().next();
    !before.is_some_and(|c| c.is_alphanumeric()) && !after.is_some_and(|c| c.is_alphanumeric())
}

/// Byte offset of the first occurrence of `needle` in `haystack` on word boundaries.
pub(crate) fn find_phrase(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        if at_word_boundary(haystack, start, start + needle.len()) {
            return Some(start);
        }
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("i need a hotel."), ["i", "need", "a", "hotel", "."]);
        assert_eq!(tokenize("user: hi,there"), ["user", ":", "hi", ",", "there"]);
    }

    #[test]
    fn keeps_times_and_prices() {
        assert_eq!(tokenize("at 13:00, 16.50 pounds"), ["at", "13:00", ",", "16.50", "pounds"]);
        assert_eq!(tokenize("time = 13:00"), ["time", "=", "13:00"]);
    }

    #[test]
    fn trailing_colon_is_split() {
        assert_eq!(tokenize("number is: abc"), ["number", "is", ":", "abc"]);
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_tail("a b c d", 2), "a b");
        assert_eq!(truncate_head("a b c d", 2), "c d");
        assert_eq!(truncate_head("a b", 5), "a b");
    }

    #[test]
    fn phrase_search_respects_boundaries() {
        assert_eq!(find_phrase("guesthouses here", "guesthouse"), None);
        assert_eq!(find_phrase("a guesthouse .", "guesthouse"), Some(2));
        assert_eq!(find_phrase("east.", "east"), Some(0));
    }
}
