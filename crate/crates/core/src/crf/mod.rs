//! Linear-chain CRF dynamic programs over an emission lattice.
//!
//! A path `y` over `n` positions scores
//! `start[y_0] + Σ emis[i][y_i] + Σ trans[y_i][y_{i+1}] + end[y_{n-1}]`.
//! The same engine serves the neural tagger (emissions from the BiLSTM) and
//! the feature baseline (emissions from sparse feature weights).

pub mod baseline;
pub mod features;

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_unchecked, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCrfParams {
    pub start: Vec<f64>,
    /// `trans[i][j]`: score of moving from tag `i` to tag `j`.
    pub trans: Matrix,
    pub end: Vec<f64>,
}

impl ChainCrfParams {
    pub fn zeros(num_tags: usize) -> Self {
        Self {
            start: vec![0.0; num_tags],
            trans: Matrix::zeros(num_tags, num_tags),
            end: vec![0.0; num_tags],
        }
    }

    pub fn new(start: Vec<f64>, trans: Matrix, end: Vec<f64>) -> Result<Self> {
        let t = start.len();
        if trans.shape() != (t, t) || end.len() != t {
            return Err(Error::shape(format!(
                "start {}, trans {:?}, end {}",
                t,
                trans.shape(),
                end.len()
            )));
        }
        Ok(Self { start, trans, end })
    }

    pub fn num_tags(&self) -> usize {
        self.start.len()
    }

    fn check(&self, lattice: &EmissionLattice) -> Result<()> {
        if lattice.num_tags() != self.num_tags() {
            return Err(Error::shape(format!(
                "lattice has {} tags, parameters have {}",
                lattice.num_tags(),
                self.num_tags()
            )));
        }
        Ok(())
    }
}

/// `n x T` emission scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLattice {
    scores: Matrix,
}

impl EmissionLattice {
    pub fn new(scores: Matrix) -> Result<Self> {
        if scores.rows() == 0 || scores.cols() == 0 {
            return Err(Error::Empty("emission lattice needs at least one position and tag"));
        }
        Ok(Self { scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.scores.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.rows() == 0
    }

    pub fn num_tags(&self) -> usize {
        self.scores.cols()
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn scores_mut(&mut self) -> &mut Matrix {
        &mut self.scores
    }

    #[inline]
    pub fn at(&self, pos: usize, tag: usize) -> f64 {
        self.scores.get(pos, tag)
    }
}

pub fn score_sequence(params: &ChainCrfParams, lattice: &EmissionLattice, tags: &[usize]) -> Result<f64> {
    params.check(lattice)?;
    if tags.len() != lattice.len() {
        return Err(Error::shape(format!(
            "{} tags for a lattice of length {}",
            tags.len(),
            lattice.len()
        )));
    }
    let t = params.num_tags();
    if let Some(&bad) = tags.iter().find(|&&y| y >= t) {
        return Err(Error::shape(format!("tag id {bad} out of range for {t} tags")));
    }
    let mut score = params.start[tags[0]] + params.end[tags[tags.len() - 1]];
    for (i, &y) in tags.iter().enumerate() {
        score += lattice.at(i, y);
    }
    for w in tags.windows(2) {
        score += params.trans.get(w[0], w[1]);
    }
    Ok(score)
}

/// `alpha[i][t]`: log-sum over prefixes ending in tag `t` at `i`, emission included.
fn forward_table(params: &ChainCrfParams, lattice: &EmissionLattice) -> Matrix {
    let (n, t) = (lattice.len(), params.num_tags());
    let mut alpha = Matrix::zeros(n, t);
    for y in 0..t {
        alpha.set(0, y, params.start[y] + lattice.at(0, y));
    }
    let mut buf = vec![0.0; t];
    for i in 1..n {
        for y in 0..t {
            for (p, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(i - 1, p) + params.trans.get(p, y);
            }
            alpha.set(i, y, log_sum_exp_unchecked(&buf) + lattice.at(i, y));
        }
    }
    alpha
}

/// `beta[i][t]`: log-sum over suffixes after `i` given tag `t` at `i`, end score included.
fn backward_table(params: &ChainCrfParams, lattice: &EmissionLattice) -> Matrix {
    let (n, t) = (lattice.len(), params.num_tags());
    let mut beta = Matrix::zeros(n, t);
    beta.row_mut(n - 1).copy_from_slice(&params.end);
    let mut buf = vec![0.0; t];
    for i in (0..n - 1).rev() {
        for y in 0..t {
            for (nx, b) in buf.iter_mut().enumerate() {
                *b = params.trans.get(y, nx) + lattice.at(i + 1, nx) + beta.get(i + 1, nx);
            }
            beta.set(i, y, log_sum_exp_unchecked(&buf));
        }
    }
    beta
}

fn log_z_from_alpha(params: &ChainCrfParams, alpha: &Matrix) -> f64 {
    let last = alpha.rows() - 1;
    let finals: Vec<f64> = (0..params.num_tags())
        .map(|y| alpha.get(last, y) + params.end[y])
        .collect();
    log_sum_exp_unchecked(&finals)
}

/// Log partition function over all `T^n` paths.
pub fn forward_log_z(params: &ChainCrfParams, lattice: &EmissionLattice) -> Result<f64> {
    params.check(lattice)?;
    Ok(log_z_from_alpha(params, &forward_table(params, lattice)))
}

/// Best path and its score. Every argmax, including the final one, prefers
/// the lowest tag id on exact ties.
pub fn viterbi_decode(params: &ChainCrfParams, lattice: &EmissionLattice) -> Result<(Vec<usize>, f64)> {
    params.check(lattice)?;
    let (n, t) = (lattice.len(), params.num_tags());
    let mut delta: Vec<f64> = (0..t).map(|y| params.start[y] + lattice.at(0, y)).collect();
    let mut back = vec![0usize; n * t];
    let mut next = vec![0.0; t];
    for i in 1..n {
        for y in 0..t {
            let mut best = 0;
            let mut best_score = delta[0] + params.trans.get(0, y);
            for p in 1..t {
                let s = delta[p] + params.trans.get(p, y);
                if s > best_score {
                    best = p;
                    best_score = s;
                }
            }
            back[i * t + y] = best;
            next[y] = best_score + lattice.at(i, y);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    let mut best_score = delta[0] + params.end[0];
    for y in 1..t {
        let s = delta[y] + params.end[y];
        if s > best_score {
            last = y;
            best_score = s;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for i in (1..n).rev() {
        path[i - 1] = back[i * t + path[i]];
    }
    Ok((path, best_score))
}

/// `P(y_i = t | lattice)` as an `n x T` matrix.
pub fn posterior_marginals(params: &ChainCrfParams, lattice: &EmissionLattice) -> Result<Matrix> {
    params.check(lattice)?;
    let alpha = forward_table(params, lattice);
    let beta = backward_table(params, lattice);
    let log_z = log_z_from_alpha(params, &alpha);
    Ok(unary_marginals(&alpha, &beta, log_z))
}

fn unary_marginals(alpha: &Matrix, beta: &Matrix, log_z: f64) -> Matrix {
    let (n, t) = alpha.shape();
    let mut m = Matrix::zeros(n, t);
    for i in 0..n {
        for y in 0..t {
            m.set(i, y, (alpha.get(i, y) + beta.get(i, y) - log_z).exp());
        }
    }
    m
}

/// `P(y_i = a, y_{i+1} = b)` for each of the `n - 1` transitions.
pub fn pairwise_marginals(params: &ChainCrfParams, lattice: &EmissionLattice) -> Result<Vec<Matrix>> {
    params.check(lattice)?;
    let alpha = forward_table(params, lattice);
    let beta = backward_table(params, lattice);
    let log_z = log_z_from_alpha(params, &alpha);
    Ok((0..lattice.len() - 1)
        .map(|i| pair_marginal_at(params, lattice, &alpha, &beta, log_z, i))
        .collect())
}

fn pair_marginal_at(
    params: &ChainCrfParams,
    lattice: &EmissionLattice,
    alpha: &Matrix,
    beta: &Matrix,
    log_z: f64,
    i: usize,
) -> Matrix {
    let t = params.num_tags();
    let mut m = Matrix::zeros(t, t);
    for a in 0..t {
        for b in 0..t {
            let s = alpha.get(i, a) + params.trans.get(a, b) + lattice.at(i + 1, b) + beta.get(i + 1, b);
            m.set(a, b, (s - log_z).exp());
        }
    }
    m
}

/// Negative log-likelihood of a gold path and its gradient with respect to
/// every CRF parameter and every emission score.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient {
    pub loss: f64,
    pub start: Vec<f64>,
    pub trans: Matrix,
    pub end: Vec<f64>,
    pub emissions: Matrix,
}

pub fn nll_and_gradient(params: &ChainCrfParams, lattice: &EmissionLattice, gold: &[usize]) -> Result<CrfGradient> {
    let gold_score = score_sequence(params, lattice, gold)?;
    let (n, t) = (lattice.len(), params.num_tags());
    let alpha = forward_table(params, lattice);
    let beta = backward_table(params, lattice);
    let log_z = log_z_from_alpha(params, &alpha);

    let mut emissions = unary_marginals(&alpha, &beta, log_z);
    let mut start = emissions.row(0).to_vec();
    let mut end = emissions.row(n - 1).to_vec();
    let mut trans = Matrix::zeros(t, t);
    for i in 0..n - 1 {
        for a in 0..t {
            let base = alpha.get(i, a) - log_z;
            for b in 0..t {
                let s = base + params.trans.get(a, b) + lattice.at(i + 1, b) + beta.get(i + 1, b);
                trans.add_at(a, b, s.exp());
            }
        }
    }

    start[gold[0]] -= 1.0;
    end[gold[n - 1]] -= 1.0;
    for (i, &y) in gold.iter().enumerate() {
        emissions.add_at(i, y, -1.0);
    }
    for w in gold.windows(2) {
        trans.add_at(w[0], w[1], -1.0);
    }
    Ok(CrfGradient {
        loss: log_z - gold_score,
        start,
        trans,
        end,
        emissions,
    })
}
