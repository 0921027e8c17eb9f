use std::collections::HashSet;
use std::sync::OnceLock;

// Common English function words.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

pub fn is_stopword(token: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
        .contains(token)
}

/// Lowercases, splits on every non-alphanumeric character and drops tokens
/// shorter than `min_token_len` characters (and stopwords when asked).
pub fn tokenize(text: &str, min_token_len: usize, drop_stopwords: bool) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= min_token_len)
        .filter(|t| !(drop_stopwords && is_stopword(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("Trump's Win!", 2, false), vec!["trump", "win"]);
        assert!(tokenize("", 2, true).is_empty());
        assert_eq!(
            tokenize("COVID-19 cases", 2, false),
            vec!["covid", "19", "cases"]
        );
    }

    #[test]
    fn stopwords_are_optional() {
        assert_eq!(tokenize("The end of it", 2, true), vec!["end"]);
        assert_eq!(tokenize("The end of it", 2, false), vec!["the", "end", "of", "it"]);
    }

    #[test]
    fn length_counts_characters_not_bytes() {
        assert_eq!(tokenize("é ün", 2, false), vec!["ün"]);
    }
}
