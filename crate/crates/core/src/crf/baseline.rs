//! Feature-template linear CRF trained by SGD on L2-regularized NLL.
//!
//! Emission for tag `t` at position `i` is `Σ_f w[f][t] + dense[t] · e_i`
//! where `f` ranges over the binary features fired at `i` and `e_i` is the
//! (frozen) embedding of the word. Each step minimizes
//! `NLL(sentence) + l2/2 · ‖θ‖²` over all weights θ.

use std::time::Instant;

use rand::seq::SliceRandom;

use super::features::{FeatureDictionary, FeatureVector};
use super::{nll_and_gradient, viterbi_decode, ChainCrfParams, EmissionLattice};
use crate::binfmt::{Reader, Writer};
use crate::corpus::{Sentence, TagSet};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::{dot, seeded_rng, Matrix};
use crate::training::{evaluate, BestTracker, EpochRecord, SequenceTagger, TrainData, TrainLog};

pub const MAGIC: &[u8; 8] = b"SEQLBCRF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            epochs: 100,
            seed: 42,
            learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCrf {
    tagset: TagSet,
    dict: FeatureDictionary,
    /// `F x T`.
    weights: Matrix,
    /// `T x d`; `d = 0` without embeddings.
    dense: Matrix,
    crf: ChainCrfParams,
    embeddings: Option<EmbeddingTable>,
}

impl BaselineCrf {
    /// All-zero weights: every path scores 0.
    pub fn uniform(tagset: TagSet, dict: FeatureDictionary, embeddings: Option<EmbeddingTable>) -> Self {
        let t = tagset.len();
        let d = embeddings.as_ref().map_or(0, EmbeddingTable::dim);
        Self {
            weights: Matrix::zeros(dict.len(), t),
            dense: Matrix::zeros(t, d),
            crf: ChainCrfParams::zeros(t),
            tagset,
            dict,
            embeddings,
        }
    }

    pub fn crf(&self) -> &ChainCrfParams {
        &self.crf
    }

    pub fn dictionary(&self) -> &FeatureDictionary {
        &self.dict
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    pub fn features(&self, sentence: &Sentence) -> Vec<FeatureVector> {
        (0..sentence.len())
            .map(|i| self.dict.extract(sentence, i, self.embeddings.as_ref()))
            .collect()
    }

    fn emissions(&self, feats: &[FeatureVector], sparse_scale: f64) -> EmissionLattice {
        let t = self.tagset.len();
        let mut scores = Matrix::zeros(feats.len(), t);
        for (i, fv) in feats.iter().enumerate() {
            let row = scores.row_mut(i);
            for &(f, v) in &fv.sparse {
                let w = self.weights.row(f as usize);
                for (r, wt) in row.iter_mut().zip(w) {
                    *r += sparse_scale * v * wt;
                }
            }
            if !fv.dense.is_empty() {
                for (y, r) in row.iter_mut().enumerate() {
                    *r += dot(self.dense.row(y), &fv.dense);
                }
            }
        }
        EmissionLattice::new(scores).expect("non-empty sentence")
    }

    pub fn lattice(&self, sentence: &Sentence) -> EmissionLattice {
        self.emissions(&self.features(sentence), 1.0)
    }

    /// Unregularized NLL of `gold` and its gradient.
    pub fn loss_and_gradient(&self, sentence: &Sentence, gold: &[usize]) -> Result<BaselineGradient> {
        let feats = self.features(sentence);
        let g = nll_and_gradient(&self.crf, &self.emissions(&feats, 1.0), gold)?;
        let mut weights = Matrix::zeros(self.weights.rows(), self.weights.cols());
        let mut dense = Matrix::zeros(self.dense.rows(), self.dense.cols());
        for (i, fv) in feats.iter().enumerate() {
            let ge = g.emissions.row(i);
            for &(f, v) in &fv.sparse {
                crate::numerics::axpy(v, ge, weights.row_mut(f as usize));
            }
            if !fv.dense.is_empty() {
                dense.add_outer(ge, &fv.dense, 1.0);
            }
        }
        Ok(BaselineGradient {
            loss: g.loss,
            weights,
            dense,
            crf: ChainCrfParams::new(g.start, g.trans, g.end)?,
        })
    }

    pub fn block_names() -> Vec<String> {
        ["weights", "dense", "start", "trans", "end"].map(String::from).to_vec()
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        vec![
            self.weights.data(),
            self.dense.data(),
            &self.crf.start[..],
            self.crf.trans.data(),
            &self.crf.end[..],
        ]
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.weights.data_mut(),
            self.dense.data_mut(),
            &mut self.crf.start[..],
            self.crf.trans.data_mut(),
            &mut self.crf.end[..],
        ]
    }

    pub fn save(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        w.strings(self.tagset.labels());
        w.strings(self.dict.names());
        w.matrix(&self.weights);
        w.matrix(&self.dense);
        w.reals(&self.crf.start);
        w.matrix(&self.crf.trans);
        w.reals(&self.crf.end);
        match &self.embeddings {
            None => w.u32(0),
            Some(table) => {
                w.u32(1);
                w.table(table);
            }
        }
        w.finish()
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, MAGIC, VERSION)?;
        let tagset = TagSet::from_labels(r.strings()?)?;
        let dict = FeatureDictionary::from_names(r.strings()?);
        let weights = r.matrix()?;
        let dense = r.matrix()?;
        let start = r.reals()?;
        let trans = r.matrix()?;
        let end = r.reals()?;
        let crf = ChainCrfParams::new(start, trans, end)?;
        let embeddings = match r.u32()? {
            0 => None,
            1 => Some(r.table()?),
            flag => return Err(Error::Format(format!("bad embedding flag {flag}"))),
        };
        r.finish()?;
        let t = tagset.len();
        let d = embeddings.as_ref().map_or(0, EmbeddingTable::dim);
        if weights.shape() != (dict.len(), t) || dense.shape() != (t, d) || crf.num_tags() != t {
            return Err(Error::Format("inconsistent block shapes".into()));
        }
        Ok(Self {
            tagset,
            dict,
            weights,
            dense,
            crf,
            embeddings,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGradient {
    pub loss: f64,
    pub weights: Matrix,
    pub dense: Matrix,
    pub crf: ChainCrfParams,
}

impl BaselineGradient {
    /// Same order as [`BaselineCrf::param_blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.weights.data(),
            self.dense.data(),
            &self.crf.start[..],
            self.crf.trans.data(),
            &self.crf.end[..],
        ]
    }
}

impl SequenceTagger for BaselineCrf {
    fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    fn predict_ids(&self, sentence: &Sentence) -> Vec<usize> {
        viterbi_decode(&self.crf, &self.lattice(sentence))
            .expect("lattice matches parameters")
            .0
    }
}

fn scale_all(m: &mut [f64], factor: f64) {
    m.iter_mut().for_each(|x| *x *= factor);
}

/// Trains on `data.train`, returning the epoch with the best dev macro F1.
/// The tag set comes from the training split; dev or test tags outside it
/// are an error.
pub fn train_baseline(
    data: TrainData<'_>,
    table: Option<&EmbeddingTable>,
    config: &BaselineConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(BaselineCrf, TrainLog)> {
    if data.train.is_empty() {
        return Err(Error::Empty("baseline training set"));
    }
    if !(config.learning_rate > 0.0) || config.l2 < 0.0 {
        return Err(Error::Config("learning rate must be positive and l2 non-negative".into()));
    }
    let tagset = TagSet::from_corpus(data.train)?;
    tagset.check_corpus(data.dev)?;
    if let Some(test) = data.test {
        tagset.check_corpus(test)?;
    }
    let dict = FeatureDictionary::build(data.train);
    let mut model = BaselineCrf::uniform(tagset, dict, table.cloned());
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        return Ok((model, log));
    }

    let cached: Vec<(Vec<FeatureVector>, Vec<usize>)> = data
        .train
        .iter()
        .map(|s| Ok((model.features(s), model.tagset.encode(&s.tags())?)))
        .collect::<Result<_>>()?;
    let mut rng = seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..cached.len()).collect();
    let lr = config.learning_rate;
    let decay = 1.0 - lr * config.l2;
    let mut best = BestTracker::default();
    let mut best_model = model.clone();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        // sparse weights are stored divided by `scale` so decay stays O(1)
        let mut scale = 1.0;
        let mut total_loss = 0.0;
        for &idx in &order {
            let (feats, gold) = &cached[idx];
            let lattice = model.emissions(feats, scale);
            let g = nll_and_gradient(&model.crf, &lattice, gold)?;
            total_loss += g.loss;

            scale *= decay;
            scale_all(model.dense.data_mut(), decay);
            scale_all(&mut model.crf.start, decay);
            scale_all(model.crf.trans.data_mut(), decay);
            scale_all(&mut model.crf.end, decay);

            let step = lr / scale;
            for (i, fv) in feats.iter().enumerate() {
                let ge = g.emissions.row(i);
                for &(f, v) in &fv.sparse {
                    let w = model.weights.row_mut(f as usize);
                    for (wt, gy) in w.iter_mut().zip(ge) {
                        *wt -= step * v * gy;
                    }
                }
                if !fv.dense.is_empty() {
                    model.dense.add_outer(ge, &fv.dense, -lr);
                }
            }
            crate::numerics::axpy(-lr, &g.start, &mut model.crf.start);
            crate::numerics::axpy(-lr, g.trans.data(), model.crf.trans.data_mut());
            crate::numerics::axpy(-lr, &g.end, &mut model.crf.end);

            if scale < 1e-9 {
                scale_all(model.weights.data_mut(), scale);
                scale = 1.0;
            }
        }
        scale_all(model.weights.data_mut(), scale);

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

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Vec<Sentence> {
        let rows: &[&[(&str, &str)]] = &[
            &[("Apple", "B-vendor"), ("QuickTime", "B-application"), ("is", "O")],
            &[("Microsoft", "B-vendor"), ("Word", "B-application"), ("crashes", "O")],
            &[("the", "O"), ("Apple", "B-vendor"), ("Safari", "B-application")],
        ];
        rows.iter().map(|r| Sentence::from_pairs(r).unwrap()).collect()
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let c = tiny();
        let data = TrainData { train: &c, dev: &c, test: None };
        let cfg = BaselineConfig { epochs: 0, ..Default::default() };
        let (m, log) = train_baseline(data, None, &cfg, |_| {}).unwrap();
        assert!(log.records.is_empty());
        assert!(m.weights.data().iter().all(|&w| w == 0.0));
        assert!(m.predict_ids(&c[0]).iter().all(|&y| y == 0));
    }

    #[test]
    fn unknown_dev_tag_is_rejected() {
        let c = tiny();
        let dev = vec![Sentence::from_pairs(&[("Linux", "B-os")]).unwrap()];
        let data = TrainData { train: &c, dev: &dev, test: None };
        let err = train_baseline(data, None, &BaselineConfig::default(), |_| {}).unwrap_err();
        assert!(matches!(err, Error::UnknownTag(t) if t == "B-os"));
    }

    #[test]
    fn fits_tiny_corpus_and_round_trips() {
        let c = tiny();
        let data = TrainData { train: &c, dev: &c, test: Some(&c) };
        let cfg = BaselineConfig { epochs: 20, ..Default::default() };
        let mut lines = Vec::new();
        let (m, log) = train_baseline(data, None, &cfg, |r| lines.push(r.log_line())).unwrap();
        assert_eq!(lines.len(), 20);
        assert_eq!(log.records.len(), 20);
        for s in &c {
            assert_eq!(m.predict_tags(s), s.tags());
        }
        let bytes = m.save();
        let back = BaselineCrf::load(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.save(), bytes);
        let (again, _) = train_baseline(data, None, &cfg, |_| {}).unwrap();
        assert_eq!(again.save(), bytes);
        assert!(BaselineCrf::load(&bytes[..bytes.len() - 1]).is_err());
    }
}
