//! Pieces shared by both trainers: the per-epoch log, the train/dev/test
//! bundle and dev-set evaluation.

use std::time::Duration;

use crate::corpus::{Sentence, TagSet};
use crate::error::Result;
use crate::eval::{build_report_from_tags, token_accuracy, ScoringMode};

/// Anything that assigns one tag id per token.
pub trait SequenceTagger {
    fn tagset(&self) -> &TagSet;

    fn predict_ids(&self, sentence: &Sentence) -> Vec<usize>;

    fn predict_tags(&self, sentence: &Sentence) -> Vec<String> {
        self.tagset().decode(&self.predict_ids(sentence))
    }

    /// Copies of `corpus` with predicted tags in place of the gold column.
    fn tag_corpus(&self, corpus: &[Sentence]) -> Vec<Sentence> {
        corpus
            .iter()
            .map(|s| {
                s.with_tags(&self.predict_tags(s))
                    .expect("prediction length equals sentence length")
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a [Sentence],
    pub dev: &'a [Sentence],
    /// Evaluated after every epoch for the log only, never for selection.
    pub test: Option<&'a [Sentence]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
    pub dev_macro_f1: f64,
    pub test_accuracy: Option<f64>,
    pub wall_time: Duration,
}

impl EpochRecord {
    /// `epoch train_loss dev_acc dev_f1 [test_acc]`; wall time is left out so
    /// logs of repeated runs compare byte for byte.
    pub fn log_line(&self) -> String {
        let mut line = format!(
            "{} {:.6} {:.6} {:.6}",
            self.epoch, self.train_loss, self.dev_accuracy, self.dev_macro_f1
        );
        if let Some(t) = self.test_accuracy {
            line.push_str(&format!(" {t:.6}"));
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

/// `(token accuracy, entity-level macro F1)` of `tagger` on `corpus`.
pub fn evaluate<T: SequenceTagger + ?Sized>(tagger: &T, corpus: &[Sentence]) -> Result<(f64, f64)> {
    let gold: Vec<Vec<&str>> = corpus.iter().map(Sentence::tags).collect();
    let pred: Vec<Vec<String>> = corpus.iter().map(|s| tagger.predict_tags(s)).collect();
    let pred_ref: Vec<Vec<&str>> = pred.iter().map(|p| p.iter().map(String::as_str).collect()).collect();
    let acc = token_accuracy(&gold, &pred_ref)?;
    let report = build_report_from_tags(&gold, &pred_ref, tagger.tagset(), None, ScoringMode::Entity)?;
    Ok((acc, report.macro_avg.f1))
}

/// Tracks the best dev macro F1 seen so far; ties keep the earlier epoch.
#[derive(Debug, Default)]
pub(crate) struct BestTracker {
    best: Option<(usize, f64)>,
}

impl BestTracker {
    pub(crate) fn offer(&mut self, epoch: usize, f1: f64) -> bool {
        match self.best {
            Some((_, b)) if f1 <= b => false,
            _ => {
                self.best = Some((epoch, f1));
                true
            }
        }
    }

    pub(crate) fn epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}
