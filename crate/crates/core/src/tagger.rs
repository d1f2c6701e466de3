//! BiLSTM-CRF tagger: embedding lookup, bidirectional LSTM, a linear
//! projection to per-tag emission scores and a CRF output layer.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bilstm::{bilstm_backward, bilstm_forward, BiLstmParams, BiLstmTrace, LstmCellParams, BLOCK_NAMES};
use crate::binfmt::{Reader, Writer};
use crate::corpus::{Sentence, TagSet};
use crate::crf::{nll_and_gradient, viterbi_decode, ChainCrfParams, EmissionLattice};
use crate::embeddings::{build_vocab, EmbeddingTable, Vocabulary, UNK};
use crate::error::{Error, Result};
use crate::numerics::{clipped_sgd_step, init_matrix, seeded_rng, Matrix, OptimizerState, SeededRng};
use crate::training::{evaluate, BestTracker, EpochRecord, SequenceTagger, TrainData, TrainLog};

pub const MAGIC: &[u8; 8] = b"SEQLTAGR";
pub const VERSION: u32 = 1;

/// Architecture settings frozen into a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    /// Dropout rate on the embedding output, training only.
    pub dropout: f64,
    /// Probability of replacing a training-set singleton with `<UNK>`.
    pub unk_dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 100,
            hidden: 100,
            dropout: 0.5,
            unk_dropout: 0.5,
            seed: 42,
        }
    }
}

impl ModelConfig {
    fn check(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("embedding and hidden sizes must be at least 1".into()));
        }
        for (name, p) in [("dropout", self.dropout), ("unk dropout", self.unk_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub optimizer: OptimizerState,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            optimizer: OptimizerState::default(),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    config: ModelConfig,
    tagset: TagSet,
    pub embeddings: EmbeddingTable,
    pub lstm: BiLstmParams,
    /// `T x 2H`.
    pub projection: Matrix,
    pub bias: Vec<f64>,
    pub crf: ChainCrfParams,
}

/// `vocab` plus every pretrained word, with pretrained rows copied verbatim
/// and the rest drawn from `init_matrix`. All other blocks are initialized
/// from the same seeded stream; biases start at zero.
pub fn build_model(
    tagset: TagSet,
    vocab: &Vocabulary,
    pretrained: Option<&EmbeddingTable>,
    config: &ModelConfig,
) -> Result<TaggerModel> {
    config.check()?;
    if tagset.is_empty() {
        return Err(Error::Empty("tag set"));
    }
    let d = config.embedding_dim;
    if let Some(p) = pretrained {
        if p.dim() != d {
            return Err(Error::Config(format!(
                "pretrained vectors have dimension {}, model expects {d}",
                p.dim()
            )));
        }
    }
    let mut vocab = vocab.clone();
    if let Some(p) = pretrained {
        for w in p.vocab().words() {
            vocab.insert(w, 0);
        }
    }
    let mut rng = seeded_rng(config.seed);
    let mut vectors = init_matrix(vocab.len(), d, &mut rng);
    if let Some(p) = pretrained {
        for (pid, w) in p.vocab().words().iter().enumerate() {
            let id = vocab.id(w);
            vectors.row_mut(id).copy_from_slice(p.row(pid));
        }
    }
    let t = tagset.len();
    let h = config.hidden;
    let lstm = BiLstmParams::random(d, h, &mut rng);
    let projection = init_matrix(t, 2 * h, &mut rng);
    let trans = init_matrix(t, t, &mut rng);
    Ok(TaggerModel {
        config: config.clone(),
        embeddings: EmbeddingTable::new(vocab, vectors)?,
        lstm,
        projection,
        bias: vec![0.0; t],
        crf: ChainCrfParams::new(vec![0.0; t], trans, vec![0.0; t])?,
        tagset,
    })
}

/// Per-sentence gradient. Embedding rows are sparse, keyed by word id.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerGradient {
    pub loss: f64,
    pub embeddings: BTreeMap<usize, Vec<f64>>,
    pub lstm: BiLstmParams,
    pub projection: Matrix,
    pub bias: Vec<f64>,
    pub crf: ChainCrfParams,
}

impl TaggerGradient {
    /// Dense copies in [`TaggerModel::block_names`] order; the sparse
    /// embedding rows are scattered into a `vocab x dim` block.
    pub fn dense_blocks(&self, vocab_len: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut emb = vec![0.0; vocab_len * dim];
        for (&id, g) in &self.embeddings {
            emb[id * dim..(id + 1) * dim].copy_from_slice(g);
        }
        let mut out = vec![emb];
        out.extend(self.lstm.forward.blocks().iter().map(|b| b.to_vec()));
        out.extend(self.lstm.backward.blocks().iter().map(|b| b.to_vec()));
        out.extend([
            self.projection.data().to_vec(),
            self.bias.clone(),
            self.crf.start.clone(),
            self.crf.trans.data().to_vec(),
            self.crf.end.clone(),
        ]);
        out
    }
}

struct ForwardPass {
    ids: Vec<usize>,
    /// Inverted-dropout multipliers, absent at inference.
    masks: Option<Vec<Vec<f64>>>,
    context: Vec<Vec<f64>>,
    trace: BiLstmTrace,
    lattice: EmissionLattice,
}

impl TaggerModel {
    /// All-zero parameters; emissions reduce to the bias.
    pub fn zeros(tagset: TagSet, vocab: Vocabulary, config: &ModelConfig) -> Result<Self> {
        config.check()?;
        let (d, h, t) = (config.embedding_dim, config.hidden, tagset.len());
        let vectors = Matrix::zeros(vocab.len(), d);
        Ok(Self {
            config: config.clone(),
            embeddings: EmbeddingTable::new(vocab, vectors)?,
            lstm: BiLstmParams::zeros(d, h),
            projection: Matrix::zeros(t, 2 * h),
            bias: vec![0.0; t],
            crf: ChainCrfParams::zeros(t),
            tagset,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn set_dropout(&mut self, dropout: f64, unk_dropout: f64) -> Result<()> {
        let config = ModelConfig {
            dropout,
            unk_dropout,
            ..self.config.clone()
        };
        config.check()?;
        self.config = config;
        Ok(())
    }

    fn word_ids(&self, sentence: &Sentence, rng: Option<&mut SeededRng>) -> Vec<usize> {
        let vocab = self.embeddings.vocab();
        let mut ids: Vec<usize> = sentence.tokens().iter().map(|t| vocab.id(&t.word)).collect();
        if let Some(rng) = rng {
            let p = self.config.unk_dropout;
            for id in &mut ids {
                if vocab.count(*id) == 1 && rng.random::<f64>() < p {
                    *id = 0;
                }
            }
        }
        ids
    }

    fn forward(&self, sentence: &Sentence, mut rng: Option<&mut SeededRng>) -> Result<ForwardPass> {
        let ids = self.word_ids(sentence, rng.as_deref_mut());
        let mut xs: Vec<Vec<f64>> = ids.iter().map(|&id| self.embeddings.row(id).to_vec()).collect();
        let masks = match rng {
            Some(rng) if self.config.dropout > 0.0 => {
                let keep = 1.0 - self.config.dropout;
                let masks: Vec<Vec<f64>> = xs
                    .iter()
                    .map(|x| {
                        x.iter()
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect()
                    })
                    .collect();
                for (x, m) in xs.iter_mut().zip(&masks) {
                    for (v, s) in x.iter_mut().zip(m) {
                        *v *= s;
                    }
                }
                Some(masks)
            }
            _ => None,
        };
        let (context, trace) = bilstm_forward(&self.lstm, &xs)?;
        let mut scores = Matrix::zeros(context.len(), self.tagset.len());
        for (i, ctx) in context.iter().enumerate() {
            let row = scores.row_mut(i);
            row.copy_from_slice(&self.bias);
            self.projection.matvec_acc(ctx, row);
        }
        Ok(ForwardPass {
            ids,
            masks,
            context,
            trace,
            lattice: EmissionLattice::new(scores)?,
        })
    }

    /// Emission scores; `rng` switches on training-time dropout.
    pub fn forward_lattice(&self, sentence: &Sentence, rng: Option<&mut SeededRng>) -> Result<EmissionLattice> {
        Ok(self.forward(sentence, rng)?.lattice)
    }

    /// CRF NLL of `gold` and its gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        sentence: &Sentence,
        gold: &[usize],
        rng: Option<&mut SeededRng>,
    ) -> Result<TaggerGradient> {
        let pass = self.forward(sentence, rng)?;
        let crf_grad = nll_and_gradient(&self.crf, &pass.lattice, gold)?;
        let h2 = 2 * self.lstm.hidden_dim();
        let mut projection = Matrix::zeros(self.tagset.len(), h2);
        let mut bias = vec![0.0; self.tagset.len()];
        let mut grad_ctx = Vec::with_capacity(pass.context.len());
        for (i, ctx) in pass.context.iter().enumerate() {
            let ge = crf_grad.emissions.row(i);
            projection.add_outer(ge, ctx, 1.0);
            crate::numerics::axpy(1.0, ge, &mut bias);
            let mut dc = vec![0.0; h2];
            self.projection.t_matvec_acc(ge, &mut dc);
            grad_ctx.push(dc);
        }
        let (lstm, mut grad_xs) = bilstm_backward(&self.lstm, &pass.trace, &grad_ctx)?;
        if let Some(masks) = &pass.masks {
            for (g, m) in grad_xs.iter_mut().zip(masks) {
                for (v, s) in g.iter_mut().zip(m) {
                    *v *= s;
                }
            }
        }
        let mut embeddings: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (&id, g) in pass.ids.iter().zip(grad_xs) {
            match embeddings.get_mut(&id) {
                Some(acc) => crate::numerics::axpy(1.0, &g, acc),
                None => {
                    embeddings.insert(id, g);
                }
            }
        }
        Ok(TaggerGradient {
            loss: crf_grad.loss,
            embeddings,
            lstm,
            projection,
            bias,
            crf: ChainCrfParams::new(crf_grad.start, crf_grad.trans, crf_grad.end)?,
        })
    }

    /// Block names in the order of [`Self::param_blocks`].
    pub fn block_names() -> Vec<String> {
        let mut names = vec!["embeddings".to_string()];
        for dir in ["forward", "backward"] {
            names.extend(BLOCK_NAMES.iter().map(|b| format!("{dir}.{b}")));
        }
        names.extend(["projection", "bias", "start", "trans", "end"].map(String::from));
        names
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embeddings.vectors().data()];
        out.extend(self.lstm.forward.blocks());
        out.extend(self.lstm.backward.blocks());
        out.extend([
            self.projection.data(),
            &self.bias[..],
            &self.crf.start[..],
            self.crf.trans.data(),
            &self.crf.end[..],
        ]);
        out
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embeddings.vectors_mut().data_mut()];
        out.extend(self.lstm.forward.blocks_mut());
        out.extend(self.lstm.backward.blocks_mut());
        out.extend([
            self.projection.data_mut(),
            &mut self.bias[..],
            &mut self.crf.start[..],
            self.crf.trans.data_mut(),
            &mut self.crf.end[..],
        ]);
        out
    }

    /// Clipped SGD step; only embedding rows with a gradient are touched but
    /// they count toward the clipping norm like every other block.
    pub fn apply_gradient(&mut self, grad: &TaggerGradient, optimizer: &OptimizerState) -> Result<f64> {
        let d = self.embeddings.dim();
        let mut params: Vec<&mut [f64]> = Vec::new();
        let mut grads: Vec<&[f64]> = Vec::new();
        let mut touched = grad.embeddings.iter().peekable();
        for (id, row) in self.embeddings.vectors_mut().data_mut().chunks_exact_mut(d).enumerate() {
            match touched.peek() {
                Some((&gid, g)) if gid == id => {
                    params.push(row);
                    grads.push(g);
                    touched.next();
                }
                None => break,
                _ => {}
            }
        }
        params.extend(self.lstm.forward.blocks_mut());
        params.extend(self.lstm.backward.blocks_mut());
        params.extend([
            self.projection.data_mut(),
            &mut self.bias[..],
            &mut self.crf.start[..],
            self.crf.trans.data_mut(),
            &mut self.crf.end[..],
        ]);
        grads.extend(grad.lstm.forward.blocks());
        grads.extend(grad.lstm.backward.blocks());
        grads.extend([
            grad.projection.data(),
            &grad.bias[..],
            &grad.crf.start[..],
            grad.crf.trans.data(),
            &grad.crf.end[..],
        ]);
        clipped_sgd_step(&mut params, &grads, optimizer)
    }

    pub fn save(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        w.usize(self.config.embedding_dim);
        w.usize(self.config.hidden);
        w.f64(self.config.dropout);
        w.f64(self.config.unk_dropout);
        w.u64(self.config.seed);
        w.strings(self.tagset.labels());
        w.table(&self.embeddings);
        for cell in [&self.lstm.forward, &self.lstm.backward] {
            write_cell(&mut w, cell);
        }
        w.matrix(&self.projection);
        w.reals(&self.bias);
        w.reals(&self.crf.start);
        w.matrix(&self.crf.trans);
        w.reals(&self.crf.end);
        w.finish()
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, MAGIC, VERSION)?;
        let config = ModelConfig {
            embedding_dim: r.usize()?,
            hidden: r.usize()?,
            dropout: r.f64()?,
            unk_dropout: r.f64()?,
            seed: r.u64()?,
        };
        config.check()?;
        let tagset = TagSet::from_labels(r.strings()?)?;
        let embeddings = r.table()?;
        let forward = read_cell(&mut r)?;
        let backward = read_cell(&mut r)?;
        let lstm = BiLstmParams { forward, backward };
        let projection = r.matrix()?;
        let bias = r.reals()?;
        let start = r.reals()?;
        let trans = r.matrix()?;
        let end = r.reals()?;
        r.finish()?;
        let crf = ChainCrfParams::new(start, trans, end)?;
        lstm.check()?;
        let (d, h, t) = (config.embedding_dim, config.hidden, tagset.len());
        if embeddings.dim() != d
            || lstm.input_dim() != d
            || lstm.hidden_dim() != h
            || projection.shape() != (t, 2 * h)
            || bias.len() != t
            || crf.num_tags() != t
        {
            return Err(Error::Format("inconsistent block shapes".into()));
        }
        Ok(Self {
            config,
            tagset,
            embeddings,
            lstm,
            projection,
            bias,
            crf,
        })
    }
}

fn write_cell(w: &mut Writer, cell: &LstmCellParams) {
    for m in [&cell.w_xi, &cell.w_hi] {
        w.matrix(m);
    }
    w.reals(&cell.w_ci);
    w.reals(&cell.b_i);
    w.matrix(&cell.w_xc);
    w.matrix(&cell.w_hc);
    w.reals(&cell.b_c);
    w.matrix(&cell.w_xo);
    w.matrix(&cell.w_ho);
    w.reals(&cell.w_co);
    w.reals(&cell.b_o);
}

fn read_cell(r: &mut Reader<'_>) -> Result<LstmCellParams> {
    Ok(LstmCellParams {
        w_xi: r.matrix()?,
        w_hi: r.matrix()?,
        w_ci: r.reals()?,
        b_i: r.reals()?,
        w_xc: r.matrix()?,
        w_hc: r.matrix()?,
        b_c: r.reals()?,
        w_xo: r.matrix()?,
        w_ho: r.matrix()?,
        w_co: r.reals()?,
        b_o: r.reals()?,
    })
}

impl SequenceTagger for TaggerModel {
    fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    fn predict_ids(&self, sentence: &Sentence) -> Vec<usize> {
        let lattice = self.forward_lattice(sentence, None).expect("model shapes are consistent");
        viterbi_decode(&self.crf, &lattice).expect("lattice matches parameters").0
    }
}

/// Per-sentence clipped SGD over `data.train`, shuffled each epoch, keeping
/// the parameters of the epoch with the best dev macro F1.
pub fn train_tagger(
    mut model: TaggerModel,
    data: TrainData<'_>,
    options: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(TaggerModel, TrainLog)> {
    let mut log = TrainLog::default();
    if options.epochs == 0 {
        return Ok((model, log));
    }
    if data.train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if data.dev.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    model.tagset.check_corpus(data.dev)?;
    if let Some(test) = data.test {
        model.tagset.check_corpus(test)?;
    }
    let golds: Vec<Vec<usize>> = data
        .train
        .iter()
        .map(|s| model.tagset.encode(&s.tags()))
        .collect::<Result<_>>()?;
    let mut rng = seeded_rng(options.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best = BestTracker::default();
    let mut best_model = model.clone();

    for epoch in 1..=options.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for &idx in &order {
            let grad = model.loss_and_gradient(&data.train[idx], &golds[idx], Some(&mut rng))?;
            total_loss += grad.loss;
            model.apply_gradient(&grad, &options.optimizer)?;
        }
        let (dev_accuracy, dev_macro_f1) = evaluate(&model, data.dev)?;
        let test_accuracy = data.test.map(|t| evaluate(&model, t).map(|r| r.0)).transpose()?;
        let record = EpochRecord {
            epoch,
            train_loss: total_loss,
            dev_accuracy,
            dev_macro_f1,
            test_accuracy,
            wall_time: started.elapsed(),
        };
        on_epoch(&record);
        log.records.push(record);
        if best.offer(epoch, dev_macro_f1) {
            best_model = model.clone();
        }
    }
    log.best_epoch = best.epoch();
    Ok((best_model, log))
}

/// Tag set and vocabulary from `data.train`, then [`build_model`] and
/// [`train_tagger`].
pub fn fit_tagger(
    data: TrainData<'_>,
    pretrained: Option<&EmbeddingTable>,
    config: &ModelConfig,
    options: &TrainOptions,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(TaggerModel, TrainLog)> {
    if data.train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let tagset = TagSet::from_corpus(data.train)?;
    let vocab = build_vocab(data.train, 1);
    debug_assert_eq!(vocab.words()[0], UNK);
    let model = build_model(tagset, &vocab, pretrained, config)?;
    train_tagger(model, data, options, on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Sentence> {
        let rows: &[&[(&str, &str)]] = &[
            &[("Apple", "B-vendor"), ("QuickTime", "B-application"), ("crashes", "O")],
            &[("Adobe", "B-vendor"), ("Reader", "B-application"), ("9.1", "B-version")],
        ];
        rows.iter().map(|r| Sentence::from_pairs(r).unwrap()).collect()
    }

    fn small() -> ModelConfig {
        ModelConfig {
            embedding_dim: 4,
            hidden: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_model_emits_bias_and_tag_zero() {
        let c = corpus();
        let tagset = TagSet::from_corpus(&c).unwrap();
        let mut m = TaggerModel::zeros(tagset, build_vocab(&c, 1), &small()).unwrap();
        assert!(m.predict_ids(&c[0]).iter().all(|&y| y == 0));
        m.bias = (0..m.bias.len()).map(|i| i as f64).collect();
        let l = m.forward_lattice(&c[1], None).unwrap();
        for i in 0..l.len() {
            assert_eq!(l.scores().row(i), &m.bias[..]);
        }
    }

    #[test]
    fn build_is_deterministic_and_copies_pretrained() {
        let c = corpus();
        let tagset = TagSet::from_corpus(&c).unwrap();
        let vocab = build_vocab(&c, 1);
        let pre_vocab = Vocabulary::from_words(["Apple", "Linux"], 1);
        let pre = EmbeddingTable::random(pre_vocab, 4, &mut seeded_rng(9)).unwrap();
        let a = build_model(tagset.clone(), &vocab, Some(&pre), &small()).unwrap();
        let b = build_model(tagset.clone(), &vocab, Some(&pre), &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.embeddings.lookup("Linux"), pre.lookup("Linux"));
        assert_eq!(a.embeddings.lookup("Apple"), pre.lookup("Apple"));
        let wrong = ModelConfig { embedding_dim: 5, ..small() };
        assert!(build_model(tagset, &vocab, Some(&pre), &wrong).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = corpus();
        let tagset = TagSet::from_corpus(&c).unwrap();
        let m = build_model(tagset, &build_vocab(&c, 1), None, &small()).unwrap();
        let bytes = m.save();
        let back = TaggerModel::load(&bytes).unwrap();
        assert_eq!(back, m);
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(TaggerModel::load(&bad).is_err());
        assert!(TaggerModel::load(&bytes[..bytes.len() - 3]).is_err());
        assert_eq!(TaggerModel::block_names().len(), m.param_blocks().len());
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let c = corpus();
        let data = TrainData { train: &c, dev: &c, test: None };
        let opts = TrainOptions { epochs: 0, ..Default::default() };
        let tagset = TagSet::from_corpus(&c).unwrap();
        let m = build_model(tagset, &build_vocab(&c, 1), None, &small()).unwrap();
        let (back, log) = train_tagger(m.clone(), data, &opts, |_| {}).unwrap();
        assert_eq!(back, m);
        assert!(log.records.is_empty());
    }
}
