//! Test-only oracles: exhaustive path enumeration and a double-double
//! forward algorithm used for high-precision finite differences.

#![allow(dead_code)]

pub mod dd;

use seqlab::crf::{ChainCrfParams, EmissionLattice};

/// Path score summed by hand from the raw parameter arrays.
pub fn hand_score(p: &ChainCrfParams, l: &EmissionLattice, path: &[usize]) -> f64 {
    let mut s = p.start[path[0]] + p.end[path[path.len() - 1]];
    for (i, &y) in path.iter().enumerate() {
        s += l.at(i, y);
        if i > 0 {
            s += p.trans.get(path[i - 1], y);
        }
    }
    s
}

/// Every path in lexicographic order.
pub fn all_paths(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(t.pow(n as u32));
    let mut path = vec![0; n];
    loop {
        out.push(path.clone());
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < t {
                break;
            }
            path[i] = 0;
        }
    }
}

pub struct Enumerated {
    pub log_z: f64,
    pub best_path: Vec<usize>,
    pub best_score: f64,
    /// `marginals[i][t]`
    pub marginals: Vec<Vec<f64>>,
}

pub fn enumerate(p: &ChainCrfParams, l: &EmissionLattice) -> Enumerated {
    let (n, t) = (l.len(), p.num_tags());
    let paths = all_paths(n, t);
    let scores: Vec<f64> = paths.iter().map(|path| hand_score(p, l, path)).collect();
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    let m = scores[best];
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
    let log_z = m + z.ln();
    let mut marginals = vec![vec![0.0; t]; n];
    for (path, s) in paths.iter().zip(&scores) {
        let w = (s - log_z).exp();
        for (i, &y) in path.iter().enumerate() {
            marginals[i][y] += w;
        }
    }
    Enumerated {
        log_z,
        best_path: paths[best].clone(),
        best_score: m,
        marginals,
    }
}

/// Largest relative error between `analytic` (in `block_names` order) and
/// central differences of `loss`, perturbing each coordinate through
/// `blocks_mut`. Returns `(block, index, error)` of the worst coordinate.
pub fn worst_central_difference<M>(
    model: &mut M,
    analytic: &[Vec<f64>],
    blocks_mut: impl Fn(&mut M) -> Vec<&mut [f64]>,
    loss: impl Fn(&M) -> f64,
    eps: f64,
) -> (usize, usize, f64) {
    let mut worst = (0, 0, 0.0);
    for (bi, block) in analytic.iter().enumerate() {
        for (k, &a) in block.iter().enumerate() {
            let base = blocks_mut(model)[bi][k];
            blocks_mut(model)[bi][k] = base + eps;
            let plus = loss(model);
            blocks_mut(model)[bi][k] = base - eps;
            let minus = loss(model);
            blocks_mut(model)[bi][k] = base;
            let err = seqlab::numerics::relative_error(a, (plus - minus) / (2.0 * eps));
            if err > worst.2 {
                worst = (bi, k, err);
            }
        }
    }
    worst
}
