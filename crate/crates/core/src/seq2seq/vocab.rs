use std::collections::{BTreeMap, HashMap};

use crate::seqcodec::TokenSequence;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Token/id bijection. Ids 0..4 are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::new())
    }
}

impl Vocabulary {
    /// Orders tokens by descending frequency, then byte order.
    pub fn build<'a>(
        sequences: impl IntoIterator<Item = &'a TokenSequence>,
        min_count: usize,
    ) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in sequences {
            for tok in seq.tokens() {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count.max(1) && !RESERVED.contains(&t))
            .collect();
        // stable sort keeps the byte order among equal counts
        ranked.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t.to_owned()).collect())
    }

    /// Non-reserved tokens in id order (ids start at 4).
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|s| (*s).to_owned())
            .chain(tokens)
            .collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ids of the user tokens, out-of-vocabulary ones mapped to UNK.
    pub fn encode(&self, seq: &TokenSequence) -> Vec<usize> {
        seq.tokens().iter().map(|t| self.id(t)).collect()
    }

    /// Tokens for ids, skipping reserved ones.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i >= RESERVED.len())
            .filter_map(|&i| self.token(i).map(str::to_owned))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        s.parse().unwrap()
    }

    #[test]
    fn empty_corpus_has_reserved_only() {
        let v = Vocabulary::build([], 1);
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("<s>"), BOS);
        assert_eq!(v.id("nope"), UNK);
    }

    #[test]
    fn frequency_then_byte_order() {
        let data = [seq("B A"), seq("A _ C")];
        let v = Vocabulary::build(&data, 1);
        assert!(v.id("A") < v.id("B"));
        assert!(v.id("B") < v.id("C"));
        assert!(v.id("_") > v.id("A"));
        let v2 = Vocabulary::build(&data, 2);
        assert_eq!(v2.len(), 5);
    }

    #[test]
    fn encode_decode() {
        let v = Vocabulary::build([&seq("N Sg _ V")], 1);
        let ids = v.encode(&seq("N Pl _ V"));
        assert_eq!(ids[1], UNK);
        assert_eq!(v.decode(&[BOS, v.id("V"), EOS]), vec!["V".to_owned()]);
    }
}
