use std::collections::{BTreeSet, HashMap};

use crate::store::EvidenceStore;
use crate::text::tokenize;

pub const UNK: &str = "[UNK]";
pub const SEP: &str = "[SEP]";
pub const TYPE_SEP: &str = "[TYPE]";

pub const UNK_ID: usize = 0;
pub const SEP_ID: usize = 1;
pub const TYPE_SEP_ID: usize = 2;

/// Token table of the embedding encoder. Rows 0..3 are reserved for the
/// unknown token and the two separators.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Builds from raw texts: normalized tokens, sorted and deduplicated.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<String> = texts.into_iter().flat_map(tokenize).collect();
        Self::from_tokens(set)
    }

    /// Every word of the store's evidences, entity labels and types, plus
    /// `extra` texts (typically SRs of the training questions).
    pub fn for_corpus<'a>(store: &EvidenceStore, extra: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set: BTreeSet<String> = BTreeSet::new();
        for ev in store.evidences() {
            set.extend(tokenize(&ev.text));
        }
        for e in store.entities() {
            set.extend(tokenize(&e.label));
            set.extend(tokenize(&e.kb_type));
        }
        for t in extra {
            set.extend(tokenize(t));
        }
        Self::from_tokens(set)
    }

    /// Reserved tokens followed by `tokens` in the given order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = vec![UNK.into(), SEP.into(), TYPE_SEP.into()];
        for t in tokens {
            let t = t.into();
            if t != UNK && t != SEP && t != TYPE_SEP && !all.contains(&t) {
                all.push(t);
            }
        }
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens: all, index }
    }

    /// Token list including the reserved rows, as stored in checkpoints.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn from_stored(tokens: Vec<String>) -> Option<Self> {
        if tokens.len() < 3 || tokens[0] != UNK || tokens[1] != SEP || tokens[2] != TYPE_SEP {
            return None;
        }
        let index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != tokens.len() {
            return None;
        }
        Some(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Token ids of `text` after normalization; unknown words map to UNK.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}
