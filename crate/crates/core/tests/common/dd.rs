//! Double-double arithmetic (about 32 significant digits) and a CRF
//! negative log-likelihood evaluated in it.

use seqlab::crf::{ChainCrfParams, EmissionLattice};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi);
        Dd { hi, lo }
    }

    /// Exact for powers of two.
    pub fn scale(self, k: f64) -> Dd {
        Dd { hi: self.hi * k, lo: self.lo * k }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn exp(self) -> Dd {
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self.sub(LN2.mul(Dd::from(k))).scale(1.0 / 1024.0);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=16 {
            term = term.mul(r).div(Dd::from(n as f64));
            sum = sum.add(term);
        }
        for _ in 0..10 {
            sum = sum.mul(sum);
        }
        sum.scale(2f64.powi(k as i32))
    }

    pub fn ln(self) -> Dd {
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..3 {
            y = y.add(self.mul(y.neg().exp())).sub(Dd::ONE);
        }
        y
    }

    pub fn max(self, o: Dd) -> Dd {
        if o.hi > self.hi || (o.hi == self.hi && o.lo > self.lo) {
            o
        } else {
            self
        }
    }
}

fn lse(v: &[Dd]) -> Dd {
    let m = v.iter().copied().fold(v[0], Dd::max);
    let s = v.iter().fold(Dd::ZERO, |acc, x| acc.add(x.sub(m).exp()));
    m.add(s.ln())
}

/// Which value a perturbation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Start(usize),
    Trans(usize, usize),
    End(usize),
    Emission(usize, usize),
}

/// NLL with `delta` added to one coordinate, all in double-double.
pub fn nll_dd(p: &ChainCrfParams, l: &EmissionLattice, gold: &[usize], coord: Coord, delta: Dd) -> Dd {
    let (n, t) = (l.len(), p.num_tags());
    let bump = |c: Coord, v: f64| if c == coord { Dd::from(v).add(delta) } else { Dd::from(v) };
    let start: Vec<Dd> = (0..t).map(|a| bump(Coord::Start(a), p.start[a])).collect();
    let end: Vec<Dd> = (0..t).map(|a| bump(Coord::End(a), p.end[a])).collect();
    let trans: Vec<Vec<Dd>> = (0..t)
        .map(|a| (0..t).map(|b| bump(Coord::Trans(a, b), p.trans.get(a, b))).collect())
        .collect();
    let emis: Vec<Vec<Dd>> = (0..n)
        .map(|i| (0..t).map(|b| bump(Coord::Emission(i, b), l.at(i, b))).collect())
        .collect();

    let mut alpha: Vec<Dd> = (0..t).map(|a| start[a].add(emis[0][a])).collect();
    for row in emis.iter().skip(1) {
        alpha = (0..t)
            .map(|b| {
                let terms: Vec<Dd> = (0..t).map(|a| alpha[a].add(trans[a][b])).collect();
                lse(&terms).add(row[b])
            })
            .collect();
    }
    let last: Vec<Dd> = (0..t).map(|a| alpha[a].add(end[a])).collect();
    let log_z = lse(&last);

    let mut gold_score = start[gold[0]].add(end[gold[n - 1]]);
    for (i, &y) in gold.iter().enumerate() {
        gold_score = gold_score.add(emis[i][y]);
        if i > 0 {
            gold_score = gold_score.add(trans[gold[i - 1]][y]);
        }
    }
    log_z.sub(gold_score)
}

/// Central difference `(f(x+ε) - f(x-ε)) / 2ε` evaluated in double-double.
pub fn central_difference(p: &ChainCrfParams, l: &EmissionLattice, gold: &[usize], coord: Coord, eps: f64) -> f64 {
    let e = Dd::from(eps);
    let plus = nll_dd(p, l, gold, coord, e);
    let minus = nll_dd(p, l, gold, coord, e.neg());
    plus.sub(minus).div(Dd::from(2.0 * eps)).hi
}
