//! Annotated sentences, the two CoNLL layouts, JSON corpus conversion,
//! sentence-level splitting and IOB2 span utilities.

use std::collections::HashMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

/// One IOB2 label, borrowed from its text form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Iob<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Iob<'a> {
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(Iob::Outside);
        }
        let (prefix, ty) = tag.split_once('-')?;
        if ty.is_empty() || ty.chars().any(char::is_whitespace) {
            return None;
        }
        match prefix {
            "B" => Some(Iob::Begin(ty)),
            "I" => Some(Iob::Inside(ty)),
            _ => None,
        }
    }

    pub fn entity_type(&self) -> Option<&'a str> {
        match *self {
            Iob::Outside => None,
            Iob::Begin(t) | Iob::Inside(t) => Some(t),
        }
    }
}

fn check_tag(tag: &str) -> Result<()> {
    Iob::parse(tag)
        .map(|_| ())
        .ok_or_else(|| Error::InvalidTag(tag.to_string()))
}

fn check_field(what: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        return Err(Error::InvalidToken(format!(
            "{what} `{value}` must be non-empty and free of whitespace"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    pub tag: String,
    pub pos: Option<String>,
    pub chunk: Option<String>,
}

impl Token {
    pub fn new(word: impl Into<String>, tag: impl Into<String>) -> Result<Self> {
        let word = word.into();
        let tag = tag.into();
        check_field("word", &word)?;
        check_tag(&tag)?;
        Ok(Self {
            word,
            tag,
            pos: None,
            chunk: None,
        })
    }

    pub fn with_annotations(
        word: impl Into<String>,
        tag: impl Into<String>,
        pos: impl Into<String>,
        chunk: impl Into<String>,
    ) -> Result<Self> {
        let mut token = Self::new(word, tag)?;
        let pos = pos.into();
        let chunk = chunk.into();
        check_field("pos", &pos)?;
        check_field("chunk", &chunk)?;
        token.pos = Some(pos);
        token.chunk = Some(chunk);
        Ok(token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("sentence without tokens"));
        }
        Ok(Self { tokens })
    }

    /// Builds a sentence from `(word, tag)` pairs.
    pub fn from_pairs<W: AsRef<str>, T: AsRef<str>>(pairs: &[(W, T)]) -> Result<Self> {
        let tokens = pairs
            .iter()
            .map(|(w, t)| Token::new(w.as_ref(), t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.word.as_str()).collect()
    }

    pub fn tags(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.tag.as_str()).collect()
    }

    /// Replaces the tag column, keeping words and annotations.
    pub fn with_tags<S: AsRef<str>>(&self, tags: &[S]) -> Result<Self> {
        if tags.len() != self.len() {
            return Err(Error::shape(format!(
                "{} tags for a sentence of {} tokens",
                tags.len(),
                self.len()
            )));
        }
        let mut tokens = self.tokens.clone();
        for (tok, tag) in tokens.iter_mut().zip(tags) {
            check_tag(tag.as_ref())?;
            tok.tag = tag.as_ref().to_string();
        }
        Ok(Self { tokens })
    }
}

/// Closed label inventory with dense ids. `O` is always id 0, followed by a
/// `B-`/`I-` pair per entity type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    /// Accepts an explicit ordering, validating the inventory invariants.
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            check_tag(label)?;
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate label `{label}`")));
            }
        }
        if !index.contains_key("O") {
            return Err(Error::Config("tag set must contain `O`".into()));
        }
        for label in &labels {
            if let Some(Iob::Inside(ty)) = Iob::parse(label) {
                if !index.contains_key(&format!("B-{ty}")) {
                    return Err(Error::Config(format!("`{label}` present without `B-{ty}`")));
                }
            }
        }
        Ok(Self { labels, index })
    }

    /// `O`, then `B-x`, `I-x` for each type in the given order.
    pub fn from_types<S: AsRef<str>>(types: &[S]) -> Result<Self> {
        let mut labels = vec!["O".to_string()];
        for ty in types {
            labels.push(format!("B-{}", ty.as_ref()));
            labels.push(format!("I-{}", ty.as_ref()));
        }
        Self::from_labels(labels)
    }

    /// Entity types of the corpus in lexicographic order.
    pub fn from_corpus(corpus: &[Sentence]) -> Result<Self> {
        let mut types: Vec<&str> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter())
            .filter_map(|t| Iob::parse(&t.tag).and_then(|iob| iob.entity_type()))
            .collect();
        types.sort_unstable();
        types.dedup();
        Self::from_types(&types)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    /// Entity types in first-appearance order of the label list.
    pub fn entity_types(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for label in &self.labels {
            if let Some(ty) = Iob::parse(label).and_then(|i| i.entity_type()) {
                if !out.contains(&ty) {
                    out.push(ty);
                }
            }
        }
        out
    }

    pub fn encode<S: AsRef<str>>(&self, tags: &[S]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| Error::UnknownTag(t.as_ref().to_string()))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.labels[i].clone()).collect()
    }

    /// Fails on the first tag of `corpus` outside the inventory.
    pub fn check_corpus(&self, corpus: &[Sentence]) -> Result<()> {
        for sentence in corpus {
            self.encode(&sentence.tags())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySpan {
    pub entity_type: String,
    /// Inclusive.
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

impl EntitySpan {
    pub fn new(entity_type: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            entity_type: entity_type.into(),
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub seed: u64,
}

fn blocks(text: &str) -> impl Iterator<Item = Vec<(usize, Vec<&str>)>> {
    let mut lines = text.lines().enumerate().peekable();
    std::iter::from_fn(move || {
        while lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.next();
        }
        let mut block = Vec::new();
        while let Some((i, line)) = lines.next_if(|(_, l)| !l.trim().is_empty()) {
            block.push((i + 1, line.split_whitespace().collect()));
        }
        (!block.is_empty()).then_some(block)
    })
}

fn columns_error(line: usize, want: usize, got: usize) -> Error {
    Error::parse(line, format!("expected {want} columns, found {got}"))
}

/// `word tag` lines, blank lines between sentences.
pub fn parse_conll2000(text: &str) -> Result<Vec<Sentence>> {
    blocks(text)
        .map(|block| {
            let tokens = block
                .into_iter()
                .map(|(line, cols)| match cols.as_slice() {
                    [word, tag] => Token::new(*word, *tag).map_err(|e| Error::parse(line, e.to_string())),
                    _ => Err(columns_error(line, 2, cols.len())),
                })
                .collect::<Result<Vec<_>>>()?;
            Sentence::new(tokens)
        })
        .collect()
}

pub fn write_conll2000(corpus: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in corpus {
        for tok in &sentence.tokens {
            let _ = writeln!(out, "{} {}", tok.word, tok.tag);
        }
        out.push('\n');
    }
    out
}

/// `tag word pos chunk` lines, blank lines between sentences.
pub fn parse_crf_conll(text: &str) -> Result<Vec<Sentence>> {
    blocks(text)
        .map(|block| {
            let tokens = block
                .into_iter()
                .map(|(line, cols)| match cols.as_slice() {
                    [tag, word, pos, chunk] => Token::with_annotations(*word, *tag, *pos, *chunk)
                        .map_err(|e| Error::parse(line, e.to_string())),
                    _ => Err(columns_error(line, 4, cols.len())),
                })
                .collect::<Result<Vec<_>>>()?;
            Sentence::new(tokens)
        })
        .collect()
}

/// Missing POS or chunk annotations are written as `_`.
pub fn write_crf_conll(corpus: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in corpus {
        for tok in &sentence.tokens {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                tok.tag,
                tok.word,
                tok.pos.as_deref().unwrap_or("_"),
                tok.chunk.as_deref().unwrap_or("_")
            );
        }
        out.push('\n');
    }
    out
}

/// Reads any of the three token-per-line layouts, chosen by the column count
/// of the first non-blank line: 1 (bare words, tagged `O`), 2 (CoNLL-2000) or
/// 4 (tag/word/pos/chunk).
pub fn parse_any(text: &str) -> Result<Vec<Sentence>> {
    let (line, width) = match text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
    {
        Some((i, l)) => (i + 1, l.split_whitespace().count()),
        None => return Ok(Vec::new()),
    };
    match width {
        1 => blocks(text)
            .map(|block| {
                let tokens = block
                    .into_iter()
                    .map(|(line, cols)| match cols.as_slice() {
                        [word] => Token::new(*word, "O").map_err(|e| Error::parse(line, e.to_string())),
                        _ => Err(columns_error(line, 1, cols.len())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Sentence::new(tokens)
            })
            .collect(),
        2 => parse_conll2000(text),
        4 => parse_crf_conll(text),
        n => Err(Error::parse(line, format!("unrecognized layout with {n} columns"))),
    }
}

#[derive(Deserialize)]
struct JsonEntry {
    tokens: Vec<String>,
    labels: Vec<String>,
}

/// Flattens `{corpus_name: [{"tokens": [...], "labels": [...]}, ...], ...}`
/// into one sentence list, corpora in file order. Entries with no tokens are
/// skipped.
pub fn convert_json_corpus(text: &str) -> Result<Vec<Sentence>> {
    let corpora: IndexMap<String, Vec<JsonEntry>> = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for (name, entries) in corpora {
        for (idx, entry) in entries.into_iter().enumerate() {
            let fail = |message: String| Error::Conversion {
                corpus: name.clone(),
                entry: idx,
                message,
            };
            if entry.tokens.len() != entry.labels.len() {
                return Err(fail(format!(
                    "{} tokens but {} labels",
                    entry.tokens.len(),
                    entry.labels.len()
                )));
            }
            if entry.tokens.is_empty() {
                continue;
            }
            let tokens = entry
                .tokens
                .into_iter()
                .zip(entry.labels)
                .map(|(w, l)| Token::new(w, l))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| fail(e.to_string()))?;
            out.push(Sentence::new(tokens)?);
        }
    }
    Ok(out)
}

const CLOSED_CLASS: &[(&str, &str)] = &[
    ("the", "DT"),
    ("a", "DT"),
    ("an", "DT"),
    ("this", "DT"),
    ("these", "DT"),
    ("those", "DT"),
    ("any", "DT"),
    ("all", "DT"),
    ("of", "IN"),
    ("in", "IN"),
    ("on", "IN"),
    ("at", "IN"),
    ("by", "IN"),
    ("for", "IN"),
    ("with", "IN"),
    ("from", "IN"),
    ("via", "IN"),
    ("into", "IN"),
    ("through", "IN"),
    ("before", "IN"),
    ("after", "IN"),
    ("over", "IN"),
    ("within", "IN"),
    ("without", "IN"),
    ("when", "WRB"),
    ("and", "CC"),
    ("or", "CC"),
    ("but", "CC"),
    ("to", "TO"),
    ("it", "PRP"),
    ("they", "PRP"),
    ("its", "PRP$"),
    ("their", "PRP$"),
    ("is", "VBZ"),
    ("are", "VBP"),
    ("was", "VBD"),
    ("were", "VBD"),
    ("be", "VB"),
    ("been", "VBN"),
    ("has", "VBZ"),
    ("have", "VBP"),
    ("can", "MD"),
    ("could", "MD"),
    ("may", "MD"),
    ("might", "MD"),
    ("will", "MD"),
    ("would", "MD"),
    ("not", "RB"),
    ("which", "WDT"),
    ("that", "WDT"),
    ("who", "WP"),
    (".", "."),
    (",", ","),
    (":", ":"),
    (";", ":"),
    ("(", "("),
    (")", ")"),
];

/// POS from a small closed-class lexicon plus orthographic fallbacks.
pub fn heuristic_pos(word: &str) -> &'static str {
    let lower = word.to_lowercase();
    if let Some((_, pos)) = CLOSED_CLASS.iter().find(|(w, _)| *w == lower) {
        return pos;
    }
    let has_digit = word.chars().any(|c| c.is_ascii_digit());
    if has_digit && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
        return "CD";
    }
    if word.chars().next().is_some_and(char::is_uppercase) {
        return "NNP";
    }
    if lower.ends_with("ing") {
        "VBG"
    } else if lower.ends_with("ed") {
        "VBD"
    } else if lower.ends_with('s') {
        "VBZ"
    } else if lower.ends_with("ly") {
        "RB"
    } else {
        "NN"
    }
}

/// Fills POS from [`heuristic_pos`] and sets every chunk to `O`.
pub fn heuristic_pos_tag(sentence: &Sentence) -> Sentence {
    let tokens = sentence
        .tokens
        .iter()
        .map(|t| Token {
            word: t.word.clone(),
            tag: t.tag.clone(),
            pos: Some(heuristic_pos(&t.word).to_string()),
            chunk: Some("O".to_string()),
        })
        .collect();
    Sentence { tokens }
}

pub const MIN_SPLIT_SIZE: usize = 10;

/// Shuffles sentences with the seed and cuts `floor(0.7n)` train,
/// `floor(0.1n)` dev and the remainder as test.
pub fn split_corpus(corpus: &[Sentence], seed: u64) -> Result<CorpusSplit> {
    let n = corpus.len();
    if n < MIN_SPLIT_SIZE {
        return Err(Error::TooSmall {
            got: n,
            need: MIN_SPLIT_SIZE,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let n_train = n * 7 / 10;
    let n_dev = n / 10;
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    Ok(CorpusSplit {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
        seed,
    })
}

/// Tolerant IOB2 decoding: an `I-x` that does not continue an open `x` span
/// opens a new one. Unparseable tags count as `O`.
pub fn extract_spans<S: AsRef<str>>(tags: &[S]) -> Vec<EntitySpan> {
    decode_spans(tags, true)
}

/// Strict decoding: orphan `I-x` tokens are ignored.
pub fn extract_spans_strict<S: AsRef<str>>(tags: &[S]) -> Vec<EntitySpan> {
    decode_spans(tags, false)
}

fn decode_spans<S: AsRef<str>>(tags: &[S], tolerant: bool) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<EntitySpan> = None;
    for (i, tag) in tags.iter().enumerate() {
        match Iob::parse(tag.as_ref()).unwrap_or(Iob::Outside) {
            Iob::Outside => spans.extend(open.take()),
            Iob::Begin(ty) => {
                spans.extend(open.take());
                open = Some(EntitySpan::new(ty, i, i));
            }
            Iob::Inside(ty) => match open.as_mut() {
                Some(span) if span.entity_type == ty => span.end = i,
                _ => {
                    spans.extend(open.take());
                    if tolerant {
                        open = Some(EntitySpan::new(ty, i, i));
                    }
                }
            },
        }
    }
    spans.extend(open);
    spans
}

/// Inverse of [`extract_spans`] for non-overlapping spans within `len`.
pub fn tags_of_spans(spans: &[EntitySpan], len: usize) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for span in spans {
        tags[span.start] = format!("B-{}", span.entity_type);
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = format!("I-{}", span.entity_type);
        }
    }
    tags
}

/// Rewrites every `I-x` that does not follow `B-x` or `I-x` to `B-x`.
pub fn repair_iob<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(tags.len());
    let mut prev_type: Option<String> = None;
    for tag in tags {
        let tag = tag.as_ref();
        match Iob::parse(tag) {
            Some(Iob::Inside(ty)) if prev_type.as_deref() != Some(ty) => {
                out.push(format!("B-{ty}"));
                prev_type = Some(ty.to_string());
            }
            Some(iob) => {
                out.push(tag.to_string());
                prev_type = iob.entity_type().map(str::to_string);
            }
            None => {
                out.push(tag.to_string());
                prev_type = None;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Apple B-vendor\nQuickTime B-application\nbefore B-version\n7.7 I-version\n\
allows B-relevant_term\nremote B-relevant_term\nattackers I-relevant_term\nto O\n";

    #[test]
    fn parse_two_column_blocks() {
        let c = parse_conll2000("Apple B-vendor\nQuickTime B-application\n\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].tags(), vec!["B-vendor", "B-application"]);
        assert!(c[0].tokens()[0].pos.is_none());
        assert!(parse_conll2000("").unwrap().is_empty());
        let c = parse_conll2000("to O\n\nallows B-relevant_term\n").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|s| s.len() == 1));
        let c = parse_conll2000("to\tO\r\n\r\n\r\nx O").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_conll2000("to O\nbad line here\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_conll2000("a O\n\nb X-foo\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_crf_conll("B-vendor Apple NNP\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_two_column() {
        let s = Sentence::from_pairs(&[("to", "O")]).unwrap();
        assert_eq!(write_conll2000(&[s]), "to O\n\n");
        assert_eq!(write_conll2000(&[]), "");
        let parsed = parse_conll2000(SAMPLE).unwrap();
        assert_eq!(write_conll2000(&parsed), format!("{SAMPLE}\n"));
    }

    #[test]
    fn four_column_layout() {
        let c = parse_crf_conll("B-vendor Apple NNP O\n\n").unwrap();
        let t = &c[0].tokens()[0];
        assert_eq!(t.word, "Apple");
        assert_eq!(t.tag, "B-vendor");
        assert_eq!(t.pos.as_deref(), Some("NNP"));
        assert_eq!(t.chunk.as_deref(), Some("O"));
        assert_eq!(write_crf_conll(&c), "B-vendor Apple NNP O\n\n");
        let c = parse_crf_conll("I-version 7.7 CD O").unwrap();
        let t = &c[0].tokens()[0];
        assert_eq!((t.word.as_str(), t.tag.as_str()), ("7.7", "I-version"));
        assert_eq!(t.pos.as_deref(), Some("CD"));
    }

    #[test]
    fn layout_detection() {
        assert_eq!(parse_any("Apple\nQuickTime\n\nx\n").unwrap().len(), 2);
        assert_eq!(parse_any("Apple B-vendor\n").unwrap()[0].tags(), vec!["B-vendor"]);
        assert_eq!(parse_any("B-vendor Apple NNP O\n").unwrap()[0].words(), vec!["Apple"]);
        assert!(parse_any("a b c\n").is_err());
        assert!(parse_any("\n\n").unwrap().is_empty());
    }

    #[test]
    fn json_conversion() {
        let c = convert_json_corpus(
            r#"{"nvd":[{"tokens":["Apple","QuickTime"],"labels":["B-vendor","B-application"]}]}"#,
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 2);
        assert!(convert_json_corpus(r#"{"a":[],"b":[]}"#).unwrap().is_empty());
        match convert_json_corpus(r#"{"nvd":[{"tokens":["x","y"],"labels":["O"]}]}"#) {
            Err(Error::Conversion { entry, corpus, .. }) => {
                assert_eq!(entry, 0);
                assert_eq!(corpus, "nvd");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_keeps_file_order_across_corpora() {
        let c = convert_json_corpus(
            r#"{"zeta":[{"tokens":["z"],"labels":["O"]}],"alpha":[{"tokens":["a"],"labels":["O"]}]}"#,
        )
        .unwrap();
        assert_eq!(c[0].words(), vec!["z"]);
        assert_eq!(c[1].words(), vec!["a"]);
    }

    #[test]
    fn pos_rules() {
        assert_eq!(heuristic_pos("7.7"), "CD");
        assert_eq!(heuristic_pos("allows"), "VBZ");
        assert_eq!(heuristic_pos("Apple"), "NNP");
        assert_eq!(heuristic_pos("before"), "IN");
        assert_eq!(heuristic_pos("to"), "TO");
        assert_eq!(heuristic_pos("running"), "VBG");
        assert_eq!(heuristic_pos("crafted"), "VBD");
        assert_eq!(heuristic_pos("remotely"), "RB");
        assert_eq!(heuristic_pos("code"), "NN");
        let s = parse_conll2000(SAMPLE).unwrap().remove(0);
        let tagged = heuristic_pos_tag(&s);
        assert!(tagged.tokens().iter().all(|t| t.chunk.as_deref() == Some("O")));
        assert_eq!(tagged, heuristic_pos_tag(&s));
    }

    #[test]
    fn split_sizes() {
        let corpus: Vec<Sentence> = (0..100)
            .map(|i| Sentence::from_pairs(&[(format!("w{i}"), "O")]).unwrap())
            .collect();
        let s = split_corpus(&corpus[..10], 3).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (7, 1, 2));
        let s = split_corpus(&corpus, 3).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (70, 10, 20));
        assert_eq!(s, split_corpus(&corpus, 3).unwrap());
        assert_ne!(s.train, split_corpus(&corpus, 4).unwrap().train);
        assert!(matches!(
            split_corpus(&corpus[..9], 0),
            Err(Error::TooSmall { got: 9, .. })
        ));
    }

    #[test]
    fn span_extraction() {
        assert_eq!(
            extract_spans(&["B-vendor", "I-vendor", "O", "B-version"]),
            vec![EntitySpan::new("vendor", 0, 1), EntitySpan::new("version", 3, 3)]
        );
        assert!(extract_spans(&["O", "O"]).is_empty());
        assert_eq!(
            extract_spans(&["I-os", "B-os"]),
            vec![EntitySpan::new("os", 0, 0), EntitySpan::new("os", 1, 1)]
        );
        assert_eq!(extract_spans_strict(&["I-os", "B-os"]), vec![EntitySpan::new("os", 1, 1)]);
        assert_eq!(
            extract_spans(&["B-a", "I-b", "I-b"]),
            vec![EntitySpan::new("a", 0, 0), EntitySpan::new("b", 1, 2)]
        );
    }

    #[test]
    fn repair_rules() {
        assert_eq!(repair_iob(&["I-os"]), vec!["B-os"]);
        assert_eq!(repair_iob(&["B-os", "I-os"]), vec!["B-os", "I-os"]);
        assert_eq!(repair_iob(&["B-a", "I-b"]), vec!["B-a", "B-b"]);
        assert_eq!(repair_iob(&["O", "I-x", "I-x"]), vec!["O", "B-x", "I-x"]);
    }

    #[test]
    fn tagset_inventory() {
        let corpus = parse_conll2000(SAMPLE).unwrap();
        let ts = TagSet::from_corpus(&corpus).unwrap();
        assert_eq!(ts.label(0), "O");
        assert_eq!(ts.entity_types(), vec!["application", "relevant_term", "vendor", "version"]);
        assert_eq!(ts.len(), 9);
        for (i, l) in ts.labels().iter().enumerate() {
            assert_eq!(ts.id(l), Some(i));
        }
        assert!(TagSet::from_labels(vec!["O".into(), "I-x".into()]).is_err());
        assert!(TagSet::from_labels(vec!["B-x".into()]).is_err());
        assert!(matches!(ts.encode(&["B-os"]), Err(Error::UnknownTag(t)) if t == "B-os"));
    }

    #[test]
    fn token_invariants() {
        assert!(Token::new("", "O").is_err());
        assert!(Token::new("a b", "O").is_err());
        assert!(Token::new("a", "B-").is_err());
        assert!(Token::new("a", "vendor").is_err());
        assert!(Sentence::new(vec![]).is_err());
    }
}
