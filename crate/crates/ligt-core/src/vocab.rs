//! Word-level vocabulary shared by semantic tokens and layout letters.
//!
//! Ids are dense from zero with a fixed prelude: the four specials, the
//! literal `<sep>`, the question placeholder `0`, and the layout letters
//! `A..X`. Corpus words follow in sorted order so builds are deterministic.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from corpus words; specials and layout letters are always
    /// present regardless of the corpus.
    pub fn build<I, S>(corpus_words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = vec![
            PAD_TOKEN.into(),
            BOS_TOKEN.into(),
            EOS_TOKEN.into(),
            UNK_TOKEN.into(),
            crate::doc::SEP_TOKEN.into(),
            "0".into(),
        ];
        tokens.extend(('A'..='X').map(|c| c.to_string()));
        let reserved: BTreeSet<String> = tokens.iter().cloned().collect();
        let words: BTreeSet<String> = corpus_words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| !w.is_empty() && !reserved.contains(w))
            .collect();
        tokens.extend(words);
        Vocabulary::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(self.unk_id())
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn letter_id(&self, letter: char) -> Option<u32> {
        let mut buf = [0u8; 4];
        self.id(letter.encode_utf8(&mut buf))
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn bos_id(&self) -> u32 {
        1
    }

    pub fn eos_id(&self) -> u32 {
        2
    }

    pub fn unk_id(&self) -> u32 {
        3
    }

    pub fn sep_id(&self) -> u32 {
        4
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Vec<String> {
        v.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prelude_is_stable() {
        let v = Vocabulary::build(["zb", "za", "zb"]);
        assert_eq!(v.token(v.pad_id()), PAD_TOKEN);
        assert_eq!(v.token(v.bos_id()), BOS_TOKEN);
        assert_eq!(v.token(v.eos_id()), EOS_TOKEN);
        assert_eq!(v.token(v.unk_id()), UNK_TOKEN);
        assert_eq!(v.token(v.sep_id()), crate::doc::SEP_TOKEN);
        assert_eq!(v.id("0"), Some(5));
        assert_eq!(v.letter_id('A'), Some(6));
        assert_eq!(v.letter_id('X'), Some(29));
        // Corpus words deduplicated and sorted after the prelude.
        assert_eq!(v.id("za"), Some(30));
        assert_eq!(v.id("zb"), Some(31));
        assert_eq!(v.len(), 32);
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocabulary::build(["tok"]);
        assert_eq!(v.id_or_unk("missing"), v.unk_id());
        assert_eq!(v.id("missing"), None);
    }

    #[test]
    fn ids_dense_and_serializable() {
        let v = Vocabulary::build(["x", "y"]);
        for i in 0..v.len() {
            assert_eq!(v.id(v.token(i as u32)), Some(i as u32));
        }
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("y"), v.id("y"));
    }
}
