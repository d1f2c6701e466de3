//! Word vocabulary, embedding tables, a skip-gram trainer with negative
//! sampling, and the word2vec-style text format.
//!
//! Words are normalized by collapsing every ASCII digit to `0`; case is kept.
//! Row 0 of every table is the unknown-word sentinel [`UNK`].

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::numerics::{dot, init_matrix, l2_norm, seeded_rng, sigmoid, Matrix, SeededRng};

pub const UNK: &str = "<UNK>";

pub fn normalize_word(word: &str) -> String {
    word.chars()
        .map(|c| if c.is_ascii_digit() { '0' } else { c })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Counts normalized words and keeps those seen at least `min_count`
    /// times, ordered by descending count then ascending text. Dropped
    /// occurrences are credited to [`UNK`].
    pub fn from_words<I, S>(words: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let min_count = min_count.max(1);
        let mut counts: HashMap<String, u64> = HashMap::new();
        for w in words {
            *counts.entry(normalize_word(w.as_ref())).or_default() += 1;
        }
        counts.remove(UNK);
        let mut kept: Vec<(String, u64)> = Vec::new();
        let mut unk_count = 0;
        for (w, c) in counts {
            if c >= min_count {
                kept.push((w, c));
            } else {
                unk_count += c;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Self::unk_only(unk_count);
        for (w, c) in kept {
            vocab.push(w, c);
        }
        vocab
    }

    fn unk_only(unk_count: u64) -> Self {
        let mut index = HashMap::new();
        index.insert(UNK.to_string(), 0);
        Self {
            words: vec![UNK.to_string()],
            counts: vec![unk_count],
            index,
        }
    }

    fn push(&mut self, word: String, count: u64) {
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.counts.push(count);
    }

    /// Rebuilds a vocabulary from stored words and counts.
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::shape("vocabulary words and counts differ in length"));
        }
        if words.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Format(format!("vocabulary must start with {UNK}")));
        }
        let mut vocab = Self::unk_only(counts[0]);
        for (w, c) in words.into_iter().zip(counts).skip(1) {
            if vocab.index.contains_key(&w) {
                return Err(Error::Format(format!("duplicate vocabulary word `{w}`")));
            }
            vocab.push(w, c);
        }
        Ok(vocab)
    }

    /// Adds a normalized word if absent; returns its id.
    pub fn insert(&mut self, word: &str, count: u64) -> usize {
        let word = normalize_word(word);
        if let Some(&id) = self.index.get(&word) {
            return id;
        }
        self.push(word, count);
        self.words.len() - 1
    }

    /// Id of the normalized word, or 0 for unknown words.
    pub fn id(&self, word: &str) -> usize {
        self.get(word).unwrap_or(0)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(&normalize_word(word)).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }
}

pub fn build_vocab(corpus: &[Sentence], min_count: u64) -> Vocabulary {
    Vocabulary::from_words(
        corpus.iter().flat_map(|s| s.tokens().iter().map(|t| t.word.as_str())),
        min_count,
    )
}

/// Equality compares words and vectors; counts are training metadata.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    vectors: Matrix,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.vocab.words == other.vocab.words && self.vectors == other.vectors
    }
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, vectors: Matrix) -> Result<Self> {
        if vectors.rows() != vocab.len() {
            return Err(Error::shape(format!(
                "{} vectors for {} words",
                vectors.rows(),
                vocab.len()
            )));
        }
        if vectors.cols() == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        Ok(Self { vocab, vectors })
    }

    pub fn random(vocab: Vocabulary, dim: usize, rng: &mut SeededRng) -> Result<Self> {
        let vectors = init_matrix(vocab.len(), dim, rng);
        Self::new(vocab, vectors)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut Matrix {
        &mut self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.vectors.row(id)
    }

    pub fn lookup(&self, word: &str) -> Vec<f64> {
        self.vectors.row(self.vocab.id(word)).to_vec()
    }

    /// `|V| d` header, then `word v1 .. vd` per row.
    pub fn save_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.len(), self.dim());
        for (word, row) in self.vocab.words.iter().zip(self.vectors.iter_rows()) {
            out.push_str(word);
            for v in row {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    /// Reads the text layout. Words are digit-normalized on the way in and a
    /// zero [`UNK`] row is prepended when the file has none; counts are not
    /// stored in the format and load as zero.
    pub fn load_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `count dim` header"))?;
        let header: Vec<&str> = header.split_whitespace().collect();
        let (rows, dim) = match header.as_slice() {
            [r, d] => (
                r.parse::<usize>().map_err(|e| Error::parse(1, e.to_string()))?,
                d.parse::<usize>().map_err(|e| Error::parse(1, e.to_string()))?,
            ),
            _ => return Err(Error::parse(1, "header must be `count dim`")),
        };
        if dim == 0 {
            return Err(Error::parse(1, "dimension must be at least 1"));
        }
        let mut row_count = 0;
        let mut data = Vec::with_capacity(rows);
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let mut cols = line.split_whitespace();
            let word = normalize_word(cols.next().unwrap_or_default());
            let values = cols
                .map(|c| c.parse::<f64>().map_err(|e| Error::parse(line_no, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    line_no,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            row_count += 1;
            if seen.insert(word.clone()) {
                data.push((word, values));
            }
        }
        if row_count != rows {
            return Err(Error::parse(
                1,
                format!("header declares {rows} rows, file has {row_count}"),
            ));
        }
        if data.first().map(|(w, _)| w.as_str()) != Some(UNK) {
            data.insert(0, (UNK.to_string(), vec![0.0; dim]));
        }
        let n = data.len();
        let (names, values): (Vec<String>, Vec<Vec<f64>>) = data.into_iter().unzip();
        let vocab = Vocabulary::from_parts(names, vec![0; n])?;
        let vectors = Matrix::from_vec(n, dim, values.concat())?;
        Self::new(vocab, vectors)
    }
}

/// `a·b / (|a| |b|)`
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub min_count: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            seed: 42,
            learning_rate: 0.025,
            min_count: 1,
        }
    }
}

/// `(center, context)` for every ordered pair at distance `1..=window`,
/// center-major.
pub fn skipgram_pairs(ids: &[usize], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, &center) in ids.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(ids.len() - 1);
        for j in lo..=hi {
            if j != i {
                pairs.push((center, ids[j]));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss `-ln σ(u·v) - Σ_k ln σ(-u·v_k)` and its gradients in `u`, `v`, `v_k`.
pub fn pair_loss_and_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let pos = sigmoid(dot(center, context));
    let mut loss = -pos.ln();
    let mut g_center: Vec<f64> = context.iter().map(|v| (pos - 1.0) * v).collect();
    let g_context: Vec<f64> = center.iter().map(|u| (pos - 1.0) * u).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = sigmoid(dot(center, neg));
        loss -= (1.0 - s).ln();
        for (g, v) in g_center.iter_mut().zip(neg.iter()) {
            *g += s * v;
        }
        g_negs.push(center.iter().map(|u| s * u).collect());
    }
    PairGradient {
        loss,
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

/// One positive pair with frozen negative samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipGramExample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

/// Input (center) and output (context) vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    pub vocab: Vocabulary,
    pub input: Matrix,
    pub output: Matrix,
}

impl SkipGramModel {
    pub fn objective(&self, examples: &[SkipGramExample]) -> f64 {
        examples
            .iter()
            .map(|ex| {
                let negs: Vec<&[f64]> = ex.negatives.iter().map(|&k| self.output.row(k)).collect();
                pair_loss_and_grad(self.input.row(ex.center), self.output.row(ex.context), &negs).loss
            })
            .sum()
    }

    pub fn into_table(self) -> Result<EmbeddingTable> {
        EmbeddingTable::new(self.vocab, self.input)
    }
}

const NEGATIVE_RETRIES: usize = 16;

/// `count` draws from `sampler`, each redrawn while it equals `context`.
/// A draw that keeps colliding is dropped.
fn draw_negatives(sampler: &WeightedIndex<f64>, rng: &mut SeededRng, context: usize, count: usize) -> Vec<usize> {
    (0..count)
        .filter_map(|_| {
            (0..NEGATIVE_RETRIES)
                .map(|_| sampler.sample(rng))
                .find(|&k| k != context)
        })
        .collect()
}

pub struct SkipGramTrainer {
    model: SkipGramModel,
    config: SkipGramConfig,
    sentences: Vec<Vec<usize>>,
    sampler: WeightedIndex<f64>,
    rng: SeededRng,
}

impl SkipGramTrainer {
    pub fn new(corpus: &[Sentence], config: SkipGramConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("skip-gram needs a non-empty corpus"));
        }
        if config.dim == 0 || config.window == 0 || config.negatives == 0 {
            return Err(Error::Config(
                "skip-gram dim, window and negatives must all be at least 1".into(),
            ));
        }
        let vocab = build_vocab(corpus, config.min_count);
        let sentences: Vec<Vec<usize>> = corpus
            .iter()
            .map(|s| s.tokens().iter().map(|t| vocab.id(&t.word)).collect())
            .collect();
        let sampler = WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(0.75)))
            .map_err(|e| Error::Config(format!("negative sampling table: {e}")))?;
        let mut rng = seeded_rng(config.seed);
        let input = init_matrix(vocab.len(), config.dim, &mut rng);
        let output = Matrix::zeros(vocab.len(), config.dim);
        Ok(Self {
            model: SkipGramModel {
                vocab,
                input,
                output,
            },
            config,
            sentences,
            sampler,
            rng,
        })
    }

    pub fn model(&self) -> &SkipGramModel {
        &self.model
    }

    pub fn into_model(self) -> SkipGramModel {
        self.model
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.sentences
            .iter()
            .flat_map(|ids| skipgram_pairs(ids, self.config.window))
            .collect()
    }

    /// Draws negatives for every pair from an independent generator, for
    /// evaluating the objective on a fixed sample.
    pub fn frozen_examples(&self, seed: u64) -> Vec<SkipGramExample> {
        let mut rng = seeded_rng(seed);
        self.pairs()
            .into_iter()
            .map(|(center, context)| SkipGramExample {
                center,
                context,
                negatives: draw_negatives(&self.sampler, &mut rng, context, self.config.negatives),
            })
            .collect()
    }

    /// One shuffled pass over all sentences; returns the summed loss observed
    /// before each update.
    pub fn train_epoch(&mut self) -> f64 {
        let mut order: Vec<usize> = (0..self.sentences.len()).collect();
        order.shuffle(&mut self.rng);
        let lr = self.config.learning_rate;
        let mut total = 0.0;
        for &s in &order {
            for (center, context) in skipgram_pairs(&self.sentences[s], self.config.window) {
                let negs = draw_negatives(&self.sampler, &mut self.rng, context, self.config.negatives);
                let model = &mut self.model;
                let grad = {
                    let neg_rows: Vec<&[f64]> = negs.iter().map(|&k| model.output.row(k)).collect();
                    pair_loss_and_grad(model.input.row(center), model.output.row(context), &neg_rows)
                };
                total += grad.loss;
                for (p, g) in model.input.row_mut(center).iter_mut().zip(&grad.center) {
                    *p -= lr * g;
                }
                for (p, g) in model.output.row_mut(context).iter_mut().zip(&grad.context) {
                    *p -= lr * g;
                }
                for (&k, g_neg) in negs.iter().zip(&grad.negatives) {
                    for (p, g) in model.output.row_mut(k).iter_mut().zip(g_neg) {
                        *p -= lr * g;
                    }
                }
            }
        }
        total
    }
}

pub fn train_skipgram(corpus: &[Sentence], config: SkipGramConfig) -> Result<EmbeddingTable> {
    let epochs = config.epochs;
    let mut trainer = SkipGramTrainer::new(corpus, config)?;
    for _ in 0..epochs {
        trainer.train_epoch();
    }
    trainer.into_model().into_table()
}
