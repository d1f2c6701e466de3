//! Generic NER feature templates for the linear CRF baseline.
//!
//! Per position: bias; lowercased words at offsets -2..=2; word shapes at
//! -1..=1; prefixes and suffixes of length 1..=3; POS at -1..=1; the two
//! adjacent word bigrams. Positions outside the sentence read `<S>` (before)
//! or `</S>` (after). The current word's embedding is a dense block.

use std::collections::HashMap;

use crate::corpus::{heuristic_pos, Sentence};
use crate::embeddings::EmbeddingTable;

pub const BOS: &str = "<S>";
pub const EOS: &str = "</S>";

/// Sparse binary features plus a dense embedding block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub sparse: Vec<(u32, f64)>,
    pub dense: Vec<f64>,
}

/// `X` upper, `x` lower, `0` digit, `.` anything else; one symbol per char.
pub fn word_shape(word: &str) -> String {
    word.chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_ascii_digit() {
                '0'
            } else {
                '.'
            }
        })
        .collect()
}

fn offset_label(o: isize) -> String {
    if o > 0 {
        format!("+{o}")
    } else {
        o.to_string()
    }
}

/// Template instantiations at `position`, in a fixed order.
pub fn feature_names(sentence: &Sentence, position: usize) -> Vec<String> {
    let tokens = sentence.tokens();
    assert!(position < tokens.len(), "position {position} out of range");
    let at = |o: isize| -> Option<usize> {
        let j = position as isize + o;
        (0..tokens.len() as isize).contains(&j).then_some(j as usize)
    };
    let sentinel = |o: isize| if o < 0 { BOS } else { EOS };
    let lower = |o: isize| at(o).map_or_else(|| sentinel(o).to_string(), |j| tokens[j].word.to_lowercase());

    let mut out = vec!["bias".to_string()];
    for o in -2..=2 {
        out.push(format!("w{}={}", offset_label(o), lower(o)));
    }
    for o in -1..=1 {
        let shape = at(o).map_or_else(|| sentinel(o).to_string(), |j| word_shape(&tokens[j].word));
        out.push(format!("shape{}={shape}", offset_label(o)));
    }
    let word: Vec<char> = tokens[position].word.chars().collect();
    for n in 1..=3.min(word.len()) {
        out.push(format!("pre{n}={}", word[..n].iter().collect::<String>()));
        out.push(format!("suf{n}={}", word[word.len() - n..].iter().collect::<String>()));
    }
    for o in -1..=1 {
        let pos = at(o).map_or(sentinel(o), |j| {
            tokens[j]
                .pos
                .as_deref()
                .unwrap_or_else(|| heuristic_pos(&tokens[j].word))
        });
        out.push(format!("pos{}={pos}", offset_label(o)));
    }
    out.push(format!("w-1|w0={}|{}", lower(-1), lower(0)));
    out.push(format!("w0|w+1={}|{}", lower(0), lower(1)));
    out
}

/// Feature-name to id map, with ids assigned in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureDictionary {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl FeatureDictionary {
    pub fn build(corpus: &[Sentence]) -> Self {
        let mut dict = Self::default();
        for sentence in corpus {
            for i in 0..sentence.len() {
                for name in feature_names(sentence, i) {
                    dict.intern(name);
                }
            }
        }
        dict
    }

    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Self { names, index }
    }

    fn intern(&mut self, name: String) -> u32 {
        if let Some(&id) = self.index.get(&name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Features of the dictionary only; unseen names are dropped.
    pub fn extract(&self, sentence: &Sentence, position: usize, table: Option<&EmbeddingTable>) -> FeatureVector {
        let sparse = feature_names(sentence, position)
            .iter()
            .filter_map(|n| self.id(n).map(|id| (id, 1.0)))
            .collect();
        let dense = table.map_or_else(Vec::new, |t| t.lookup(&sentence.tokens()[position].word));
        FeatureVector { sparse, dense }
    }
}

pub fn extract_features(
    sentence: &Sentence,
    position: usize,
    dict: &FeatureDictionary,
    table: Option<&EmbeddingTable>,
) -> FeatureVector {
    dict.extract(sentence, position, table)
}
