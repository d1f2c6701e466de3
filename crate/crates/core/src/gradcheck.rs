//! Finite-difference suites over every parameter group of the CRF engine,
//! the BiLSTM, the full tagger and the feature baseline.

use rand::Rng;

use crate::bilstm::{bilstm_backward, bilstm_forward, BiLstmParams, BLOCK_NAMES};
use crate::corpus::{Sentence, TagSet};
use crate::crf::baseline::BaselineCrf;
use crate::crf::features::FeatureDictionary;
use crate::crf::{nll_and_gradient, ChainCrfParams, EmissionLattice};
use crate::embeddings::{build_vocab, EmbeddingTable};
use crate::error::Result;
use crate::numerics::{dot, finite_diff_check, seeded_rng, Matrix, SeededRng};
use crate::tagger::{build_model, ModelConfig, TaggerModel};

/// Relative-error bound for every group. Central differences in f64 are
/// accurate to about 1e-11 absolute, which a near-zero gradient coordinate
/// turns into a large relative error; this bound is robust to that.
pub const TOLERANCE: f64 = 1e-4;
pub const EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub name: String,
    pub params: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Folds repeated runs of the same group into one row keeping the worst error.
fn merge(into: &mut Vec<GroupResult>, run: Vec<GroupResult>) {
    for g in run {
        match into.iter_mut().find(|r| r.name == g.name) {
            Some(r) => {
                r.params += g.params;
                r.max_relative_error = r.max_relative_error.max(g.max_relative_error);
                r.passed &= g.passed;
            }
            None => into.push(g),
        }
    }
}

pub fn all_passed(groups: &[GroupResult]) -> bool {
    groups.iter().all(|g| g.passed)
}

/// One `name params max_rel_err tolerance PASS|FAIL` line per group.
pub fn render_groups(groups: &[GroupResult]) -> String {
    let mut out = String::new();
    for g in groups {
        out.push_str(&format!(
            "{:<20} {:>6} {:.3e} {:.0e} {}\n",
            g.name,
            g.params,
            g.max_relative_error,
            g.tolerance,
            if g.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}

/// Checks each block of `model` by perturbing it in a private copy.
fn check_blocks<M: Clone>(
    model: &M,
    names: &[String],
    analytic: &[Vec<f64>],
    blocks_mut: impl Fn(&mut M) -> Vec<&mut [f64]>,
    loss: impl Fn(&M) -> f64,
    tolerance: f64,
) -> Vec<GroupResult> {
    let mut out = Vec::new();
    let mut probe = model.clone();
    for (b, name) in names.iter().enumerate() {
        let start: Vec<f64> = blocks_mut(&mut probe)[b].to_vec();
        if start.is_empty() {
            continue;
        }
        let report = finite_diff_check(
            |p| {
                blocks_mut(&mut probe)[b].copy_from_slice(p);
                loss(&probe)
            },
            &start,
            &analytic[b],
            EPSILON,
            tolerance,
        );
        blocks_mut(&mut probe)[b].copy_from_slice(&start);
        out.push(GroupResult {
            name: name.clone(),
            params: start.len(),
            max_relative_error: report.max_relative_error,
            tolerance,
            passed: report.passed,
        });
    }
    out
}

fn uniform(rng: &mut SeededRng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..=r)).collect()
}

/// Random CRF instance with `min_tags ≤ T ≤ max_tags`, `n ≤ max_len` and
/// every entry uniform in `[-range, range]`, plus a random gold path.
pub fn random_crf_instance(
    rng: &mut SeededRng,
    min_tags: usize,
    max_tags: usize,
    max_len: usize,
    range: f64,
) -> (ChainCrfParams, EmissionLattice, Vec<usize>) {
    let t = rng.random_range(min_tags..=max_tags);
    let n = rng.random_range(1..=max_len);
    let params = ChainCrfParams::new(
        uniform(rng, t, range),
        Matrix::from_vec(t, t, uniform(rng, t * t, range)).expect("shape"),
        uniform(rng, t, range),
    )
    .expect("consistent shapes");
    let lattice = EmissionLattice::new(Matrix::from_vec(n, t, uniform(rng, n * t, range)).expect("shape"))
        .expect("non-empty");
    let gold = (0..n).map(|_| rng.random_range(0..t)).collect();
    (params, lattice, gold)
}

#[derive(Clone)]
struct CrfProbe {
    params: ChainCrfParams,
    lattice: EmissionLattice,
}

/// NLL gradients for start, transitions, end and emissions. Instances have
/// at least two tags: with one tag the loss is identically zero and the
/// difference quotient is pure roundoff.
pub fn crf_suite(seed: u64, instances: usize) -> Result<Vec<GroupResult>> {
    let mut rng = seeded_rng(seed);
    let names: Vec<String> = ["crf.start", "crf.trans", "crf.end", "crf.emissions"].map(String::from).to_vec();
    let mut out = Vec::new();
    for _ in 0..instances {
        let (params, lattice, gold) = random_crf_instance(&mut rng, 2, 5, 6, 2.0);
        let g = nll_and_gradient(&params, &lattice, &gold)?;
        let analytic = vec![g.start, g.trans.into_data(), g.end, g.emissions.into_data()];
        let probe = CrfProbe { params, lattice };
        let run = check_blocks(
            &probe,
            &names,
            &analytic,
            |m| {
                vec![
                    &mut m.params.start[..],
                    m.params.trans.data_mut(),
                    &mut m.params.end[..],
                    m.lattice.scores_mut().data_mut(),
                ]
            },
            |m| nll_and_gradient(&m.params, &m.lattice, &gold).map(|g| g.loss).expect("valid instance"),
            TOLERANCE,
        );
        merge(&mut out, run);
    }
    Ok(out)
}

#[derive(Clone)]
struct LstmProbe {
    params: BiLstmParams,
    xs: Vec<Vec<f64>>,
}

impl LstmProbe {
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.params.forward.blocks_mut());
        out.extend(self.params.backward.blocks_mut());
        out.extend(self.xs.iter_mut().map(|x| &mut x[..]));
        out
    }

    fn loss(&self, weights: &[Vec<f64>]) -> f64 {
        let (hs, _) = bilstm_forward(&self.params, &self.xs).expect("valid shapes");
        hs.iter().zip(weights).map(|(h, w)| dot(h, w)).sum()
    }
}

/// BiLSTM (d=3, H=4, n=5) under the loss `Σ_t r_t · out_t` for random `r_t`;
/// every block of both directions plus the inputs. Peepholes and biases are
/// randomized so no gradient is structurally zero.
pub fn bilstm_suite(seed: u64) -> Result<Vec<GroupResult>> {
    let (d, h, n) = (3, 4, 5);
    let mut rng = seeded_rng(seed);
    let mut params = BiLstmParams::random(d, h, &mut rng);
    for cell in [&mut params.forward, &mut params.backward] {
        for block in cell.blocks_mut() {
            for v in block.iter_mut() {
                *v += rng.random_range(-0.5..=0.5);
            }
        }
    }
    let xs: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut rng, d, 1.0)).collect();
    let weights: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut rng, 2 * h, 1.0)).collect();
    let (_, trace) = bilstm_forward(&params, &xs)?;
    let (grads, grad_xs) = bilstm_backward(&params, &trace, &weights)?;
    let mut analytic: Vec<Vec<f64>> = grads.forward.blocks().iter().map(|b| b.to_vec()).collect();
    analytic.extend(grads.backward.blocks().iter().map(|b| b.to_vec()));
    analytic.extend(grad_xs);
    let mut names: Vec<String> = Vec::new();
    for dir in ["forward", "backward"] {
        names.extend(BLOCK_NAMES.iter().map(|b| format!("{dir}.{b}")));
    }
    names.extend((0..n).map(|t| format!("input[{t}]")));
    let probe = LstmProbe { params, xs };
    Ok(check_blocks(
        &probe,
        &names,
        &analytic,
        LstmProbe::blocks_mut,
        |m| m.loss(&weights),
        TOLERANCE,
    ))
}

/// Two short sentences shared by the model-level suites.
pub fn gradcheck_corpus() -> Vec<Sentence> {
    let rows: &[&[(&str, &str)]] = &[
        &[
            ("Apple", "B-vendor"),
            ("QuickTime", "B-application"),
            ("before", "B-version"),
            ("7.7", "I-version"),
            ("crashes", "O"),
        ],
        &[("Buffer", "O"), ("overflow", "O"), ("in", "O"), ("Adobe", "B-vendor"), ("Reader", "B-application")],
    ];
    rows.iter().map(|r| Sentence::from_pairs(r).expect("valid")).collect()
}

fn jitter(blocks: Vec<&mut [f64]>, rng: &mut SeededRng, r: f64) {
    for block in blocks {
        for v in block.iter_mut() {
            *v += rng.random_range(-r..=r);
        }
    }
}

/// End-to-end NLL over [`gradcheck_corpus`] for every tagger block
/// (embeddings, 11 blocks per LSTM direction, projection, bias, CRF).
pub fn tagger_suite(seed: u64) -> Result<Vec<GroupResult>> {
    let corpus = gradcheck_corpus();
    let tagset = TagSet::from_corpus(&corpus)?;
    let config = ModelConfig {
        embedding_dim: 3,
        hidden: 4,
        seed,
        ..Default::default()
    };
    let mut model = build_model(tagset.clone(), &build_vocab(&corpus, 1), None, &config)?;
    let mut rng = seeded_rng(seed ^ 0x9e37_79b9);
    jitter(model.param_blocks_mut(), &mut rng, 0.5);
    let golds: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| tagset.encode(&s.tags()))
        .collect::<Result<_>>()?;
    let (vlen, dim) = (model.embeddings.len(), model.embeddings.dim());
    let mut analytic: Option<Vec<Vec<f64>>> = None;
    for (s, gold) in corpus.iter().zip(&golds) {
        let g = model.loss_and_gradient(s, gold, None)?.dense_blocks(vlen, dim);
        match analytic.as_mut() {
            None => analytic = Some(g),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(g) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
            }
        }
    }
    let analytic = analytic.expect("non-empty corpus");
    let loss = |m: &TaggerModel| -> f64 {
        corpus
            .iter()
            .zip(&golds)
            .map(|(s, gold)| m.loss_and_gradient(s, gold, None).expect("valid").loss)
            .sum()
    };
    Ok(check_blocks(
        &model,
        &TaggerModel::block_names(),
        &analytic,
        TaggerModel::param_blocks_mut,
        loss,
        TOLERANCE,
    ))
}

/// NLL over [`gradcheck_corpus`] for the feature baseline with random
/// weights and a random embedding block.
pub fn baseline_suite(seed: u64) -> Result<Vec<GroupResult>> {
    let corpus = gradcheck_corpus();
    let tagset = TagSet::from_corpus(&corpus)?;
    let mut rng = seeded_rng(seed);
    let table = EmbeddingTable::random(build_vocab(&corpus, 1), 3, &mut rng)?;
    let mut model = BaselineCrf::uniform(tagset.clone(), FeatureDictionary::build(&corpus), Some(table));
    jitter(model.param_blocks_mut(), &mut rng, 0.5);
    let golds: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| tagset.encode(&s.tags()))
        .collect::<Result<_>>()?;
    let mut analytic: Vec<Vec<f64>> = model.param_blocks().iter().map(|b| vec![0.0; b.len()]).collect();
    for (s, gold) in corpus.iter().zip(&golds) {
        let g = model.loss_and_gradient(s, gold)?;
        for (a, b) in analytic.iter_mut().zip(g.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    let loss = |m: &BaselineCrf| -> f64 {
        corpus
            .iter()
            .zip(&golds)
            .map(|(s, gold)| m.loss_and_gradient(s, gold).expect("valid").loss)
            .sum()
    };
    let names: Vec<String> = BaselineCrf::block_names().iter().map(|n| format!("baseline.{n}")).collect();
    Ok(check_blocks(
        &model,
        &names,
        &analytic,
        BaselineCrf::param_blocks_mut,
        loss,
        TOLERANCE,
    ))
}

/// Every suite relevant to one architecture.
pub fn run_all(arch_is_baseline: bool, seed: u64) -> Result<Vec<GroupResult>> {
    let mut groups = crf_suite(seed, 20)?;
    if arch_is_baseline {
        groups.extend(baseline_suite(seed)?);
    } else {
        groups.extend(bilstm_suite(seed)?);
        groups.extend(tagger_suite(seed)?);
    }
    Ok(groups)
}
