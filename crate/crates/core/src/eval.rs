//! Item accuracy, per-type precision/recall/F1 and macro averages.
//!
//! Entity-level scoring counts a predicted span as correct only when its type
//! and both boundaries match a gold span. Token-level scoring compares the
//! entity type of each token, ignoring the B/I prefix. Every ratio with a zero
//! denominator is 0.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::corpus::{extract_spans, EntitySpan, Iob, Sentence, TagSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    #[default]
    Entity,
    Token,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity" => Ok(ScoringMode::Entity),
            "token" => Ok(ScoringMode::Token),
            other => Err(Error::Config(format!("unknown scoring mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoringMode::Entity => "entity",
            ScoringMode::Token => "token",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl Prf {
    pub fn from_counts(tp: usize, gold: usize, pred: usize) -> Self {
        let precision = ratio(tp, pred);
        let recall = ratio(tp, gold);
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

fn check_aligned<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::shape(format!(
            "{} gold sequences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::shape(format!(
                "sequence {i}: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

/// Fraction of tokens whose predicted tag equals the gold tag.
pub fn token_accuracy<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<f64> {
    check_aligned(gold, pred)?;
    let mut total = 0;
    let mut correct = 0;
    for (g, p) in gold.iter().zip(pred) {
        total += g.len();
        correct += g.iter().zip(p).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
    }
    Ok(ratio(correct, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Counts {
    tp: usize,
    gold: usize,
    pred: usize,
}

fn entity_counts<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>], ty: &str) -> Counts {
    let mut c = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        let of_type = |tags: &[S]| -> BTreeSet<EntitySpan> {
            extract_spans(tags)
                .into_iter()
                .filter(|s| s.entity_type == ty)
                .collect()
        };
        let gs = of_type(g);
        let ps = of_type(p);
        c.gold += gs.len();
        c.pred += ps.len();
        c.tp += gs.intersection(&ps).count();
    }
    c
}

fn token_counts<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>], ty: &str) -> Counts {
    let type_of = |t: &S| Iob::parse(t.as_ref()).and_then(|i| i.entity_type()) == Some(ty);
    let mut c = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        for (a, b) in g.iter().zip(p) {
            let (ga, pb) = (type_of(a), type_of(b));
            c.gold += ga as usize;
            c.pred += pb as usize;
            c.tp += (ga && pb) as usize;
        }
    }
    c
}

/// Exact-match span precision, recall and F1 for one entity type.
pub fn entity_prf<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>], entity_type: &str) -> Result<Prf> {
    check_aligned(gold, pred)?;
    let c = entity_counts(gold, pred, entity_type);
    Ok(Prf::from_counts(c.tp, c.gold, c.pred))
}

/// Per-token precision, recall and F1 for one entity type.
pub fn token_prf<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>], entity_type: &str) -> Result<Prf> {
    check_aligned(gold, pred)?;
    let c = token_counts(gold, pred, entity_type);
    Ok(Prf::from_counts(c.tp, c.gold, c.pred))
}

pub fn macro_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("macro average of no values"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Cuts a value to one decimal place, toward zero. A relative slack of 1e-9
/// absorbs binary representation error (`82.8` stays `82.8`).
pub fn truncate_1dp(x: f64) -> f64 {
    let scaled = x * 10.0;
    let slack = 1e-9 * scaled.abs().max(1.0);
    (scaled + slack.copysign(scaled)).trunc() / 10.0
}

/// A fraction in `[0, 1]` as a one-decimal percentage string.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}", truncate_1dp(fraction * 100.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeScores {
    pub entity_type: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_count: usize,
    pub pred_count: usize,
    pub tp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: ScoringMode,
    pub token_accuracy: f64,
    /// Every type seen in the tag set, gold or predictions.
    pub per_type: Vec<TypeScores>,
    /// Mean over types with at least one gold or predicted occurrence.
    pub macro_avg: Prf,
    /// The restricted table, in the requested order, with its own macro row.
    pub selected: Option<(Vec<TypeScores>, Prf)>,
}

fn macro_of(rows: &[&TypeScores]) -> Prf {
    if rows.is_empty() {
        return Prf::default();
    }
    let avg = |f: fn(&TypeScores) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
    Prf {
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        f1: avg(|r| r.f1),
    }
}

fn check_corpora(gold: &[Sentence], pred: &[Sentence]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::shape(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.words() != p.words() {
            return Err(Error::shape(format!("sentence {i}: gold and predicted words differ")));
        }
    }
    Ok(())
}

pub fn build_report(
    gold: &[Sentence],
    pred: &[Sentence],
    tagset: &TagSet,
    selected_types: Option<&[&str]>,
    mode: ScoringMode,
) -> Result<EvalReport> {
    check_corpora(gold, pred)?;
    let gold_tags: Vec<Vec<&str>> = gold.iter().map(Sentence::tags).collect();
    let pred_tags: Vec<Vec<&str>> = pred.iter().map(Sentence::tags).collect();
    build_report_from_tags(&gold_tags, &pred_tags, tagset, selected_types, mode)
}

pub fn build_report_from_tags<S: AsRef<str>>(
    gold: &[Vec<S>],
    pred: &[Vec<S>],
    tagset: &TagSet,
    selected_types: Option<&[&str]>,
    mode: ScoringMode,
) -> Result<EvalReport> {
    let token_accuracy = token_accuracy(gold, pred)?;
    let mut types: Vec<String> = tagset.entity_types().into_iter().map(str::to_string).collect();
    let mut extra = BTreeSet::new();
    for seq in gold.iter().chain(pred) {
        for t in seq {
            if let Some(ty) = Iob::parse(t.as_ref()).and_then(|i| i.entity_type()) {
                if !types.iter().any(|x| x == ty) {
                    extra.insert(ty.to_string());
                }
            }
        }
    }
    types.extend(extra);

    let score = |ty: &str| {
        let c = match mode {
            ScoringMode::Entity => entity_counts(gold, pred, ty),
            ScoringMode::Token => token_counts(gold, pred, ty),
        };
        let prf = Prf::from_counts(c.tp, c.gold, c.pred);
        TypeScores {
            entity_type: ty.to_string(),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            gold_count: c.gold,
            pred_count: c.pred,
            tp: c.tp,
        }
    };
    let per_type: Vec<TypeScores> = types.iter().map(|ty| score(ty)).collect();
    let active: Vec<&TypeScores> = per_type
        .iter()
        .filter(|r| r.gold_count + r.pred_count > 0)
        .collect();
    let macro_avg = macro_of(&active);
    let selected = selected_types.map(|sel| {
        let rows: Vec<TypeScores> = sel.iter().map(|ty| score(ty)).collect();
        let m = macro_of(&rows.iter().collect::<Vec<_>>());
        (rows, m)
    });
    Ok(EvalReport {
        mode,
        token_accuracy,
        per_type,
        macro_avg,
        selected,
    })
}

fn render_rows(out: &mut String, title: &str, rows: &[TypeScores], avg: &Prf) {
    let width = rows
        .iter()
        .map(|r| r.entity_type.len())
        .chain([title.len(), "Average".len()])
        .max()
        .unwrap_or(0);
    let _ = writeln!(
        out,
        "{title:<width$}  {:>13}  {:>10}  {:>12}  {:>6}  {:>6}  {:>6}",
        "Precision (%)", "Recall (%)", "F1-score (%)", "Gold", "Pred", "TP"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>13}  {:>10}  {:>12}  {:>6}  {:>6}  {:>6}",
            r.entity_type,
            format_percent(r.precision),
            format_percent(r.recall),
            format_percent(r.f1),
            r.gold_count,
            r.pred_count,
            r.tp
        );
    }
    let _ = writeln!(
        out,
        "{:<width$}  {:>13}  {:>10}  {:>12}",
        "Average",
        format_percent(avg.precision),
        format_percent(avg.recall),
        format_percent(avg.f1)
    );
}

/// Fixed-width table; percentages are cut to one decimal.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Item accuracy (%): {}  [{}-level scores]",
        format_percent(report.token_accuracy),
        report.mode
    );
    out.push('\n');
    render_rows(&mut out, "Entity type", &report.per_type, &report.macro_avg);
    if let Some((rows, avg)) = &report.selected {
        out.push('\n');
        render_rows(&mut out, "Selected type", rows, avg);
    }
    out
}

/// One `key value` or `type precision recall f1 gold pred tp` record per line.
pub fn render_kv(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode {}", report.mode);
    let _ = writeln!(out, "token_accuracy {}", report.token_accuracy);
    let row = |out: &mut String, prefix: &str, r: &TypeScores| {
        let _ = writeln!(
            out,
            "{prefix}{} {} {} {} {} {} {}",
            r.entity_type, r.precision, r.recall, r.f1, r.gold_count, r.pred_count, r.tp
        );
    };
    for r in &report.per_type {
        row(&mut out, "type ", r);
    }
    let m = &report.macro_avg;
    let _ = writeln!(out, "macro {} {} {}", m.precision, m.recall, m.f1);
    if let Some((rows, m)) = &report.selected {
        for r in rows {
            row(&mut out, "selected ", r);
        }
        let _ = writeln!(out, "selected_macro {} {} {}", m.precision, m.recall, m.f1);
    }
    out
}
