use std::collections::HashMap;

pub type TokenId = u32;

/// Lowercases, splits on Unicode whitespace and strips punctuation from both
/// edges of every piece. Pieces that are pure punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let t = piece.trim_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                None
            } else {
                Some(t.to_lowercase())
            }
        })
        .collect()
}

/// Append-only token table. Ids are assigned in first-seen order and never
/// change afterwards.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    ids: HashMap<String, TokenId>,
    words: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as TokenId;
        self.ids.insert(word.to_owned(), id);
        self.words.push(word.to_owned());
        id
    }

    pub fn intern_text(&mut self, text: &str) -> Vec<TokenId> {
        tokenize(text).iter().map(|w| self.intern(w)).collect()
    }

    pub fn get(&self, word: &str) -> Option<TokenId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n ").is_empty());
    }

    #[test]
    fn case_and_edge_punctuation() {
        assert_eq!(tokenize("The cat, the CAT."), vec!["the", "cat", "the", "cat"]);
        assert_eq!(tokenize("(don't) -- x!"), vec!["don't", "x"]);
        assert_eq!(tokenize("Ünïcode\u{2003}SPACE"), vec!["ünïcode", "space"]);
    }

    #[test]
    fn ids_are_stable() {
        let mut v = Vocabulary::new();
        let a = v.intern_text("a b c");
        let b = v.intern_text("c b a d");
        assert_eq!(a, vec![0, 1, 2]);
        assert_eq!(b, vec![2, 1, 0, 3]);
        assert_eq!(v.word(3), Some("d"));
    }

    proptest! {
        #[test]
        fn idempotent(t in "[ -~]{0,80}") {
            let once = tokenize(&t);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
