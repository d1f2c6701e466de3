//! Coupled input/forget LSTM with diagonal peepholes, its bidirectional
//! composition and backpropagation through time.
//!
//! ```text
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + w_ci ⊙ c_{t-1} + b_i)
//! c_t = (1 - i_t) ⊙ c_{t-1} + i_t ⊙ tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + w_co ⊙ c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! Weight matrices are stored `H x d` / `H x H` so a gate pre-activation is a
//! plain matrix-vector product.

use crate::error::{Error, Result};
use crate::numerics::{init_matrix, sigmoid, tanh, Matrix, SeededRng};

pub const BLOCK_NAMES: [&str; 11] = [
    "W_xi", "W_hi", "w_ci", "b_i", "W_xc", "W_hc", "b_c", "W_xo", "W_ho", "w_co", "b_o",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_xi: Matrix,
    pub w_hi: Matrix,
    pub w_ci: Vec<f64>,
    pub b_i: Vec<f64>,
    pub w_xc: Matrix,
    pub w_hc: Matrix,
    pub b_c: Vec<f64>,
    pub w_xo: Matrix,
    pub w_ho: Matrix,
    pub w_co: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let x = || Matrix::zeros(hidden, input_dim);
        let h = || Matrix::zeros(hidden, hidden);
        let v = || vec![0.0; hidden];
        Self {
            w_xi: x(),
            w_hi: h(),
            w_ci: v(),
            b_i: v(),
            w_xc: x(),
            w_hc: h(),
            b_c: v(),
            w_xo: x(),
            w_ho: h(),
            w_co: v(),
            b_o: v(),
        }
    }

    /// Matrices and peepholes from `init_matrix`; biases zero.
    pub fn random(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        p.w_xi = init_matrix(hidden, input_dim, rng);
        p.w_hi = init_matrix(hidden, hidden, rng);
        p.w_ci = init_matrix(1, hidden, rng).into_data();
        p.w_xc = init_matrix(hidden, input_dim, rng);
        p.w_hc = init_matrix(hidden, hidden, rng);
        p.w_xo = init_matrix(hidden, input_dim, rng);
        p.w_ho = init_matrix(hidden, hidden, rng);
        p.w_co = init_matrix(1, hidden, rng).into_data();
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xi.rows()
    }

    /// Blocks in `BLOCK_NAMES` order.
    pub fn blocks(&self) -> [&[f64]; 11] {
        [
            self.w_xi.data(),
            self.w_hi.data(),
            &self.w_ci,
            &self.b_i,
            self.w_xc.data(),
            self.w_hc.data(),
            &self.b_c,
            self.w_xo.data(),
            self.w_ho.data(),
            &self.w_co,
            &self.b_o,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 11] {
        [
            self.w_xi.data_mut(),
            self.w_hi.data_mut(),
            &mut self.w_ci,
            &mut self.b_i,
            self.w_xc.data_mut(),
            self.w_hc.data_mut(),
            &mut self.b_c,
            self.w_xo.data_mut(),
            self.w_ho.data_mut(),
            &mut self.w_co,
            &mut self.b_o,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn check(&self) -> Result<()> {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        let mats = [
            (&self.w_xi, d),
            (&self.w_hi, h),
            (&self.w_xc, d),
            (&self.w_hc, h),
            (&self.w_xo, d),
            (&self.w_ho, h),
        ];
        for (m, cols) in mats {
            if m.shape() != (h, cols) {
                return Err(Error::shape(format!("LSTM matrix {:?}, expected {h}x{cols}", m.shape())));
            }
        }
        for v in [&self.w_ci, &self.b_i, &self.b_c, &self.w_co, &self.b_o] {
            if v.len() != h {
                return Err(Error::shape(format!("LSTM vector of length {}, expected {h}", v.len())));
            }
        }
        Ok(())
    }
}

/// Activations cached by one forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    /// `tanh` of the candidate pre-activation.
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn lstm_cell_forward(
    p: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, StepTrace)> {
    let (hd, d) = (p.hidden_dim(), p.input_dim());
    if x.len() != d || h_prev.len() != hd || c_prev.len() != hd {
        return Err(Error::shape(format!(
            "cell expects x[{d}], h[{hd}], c[{hd}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut a_i = p.b_i.clone();
    p.w_xi.matvec_acc(x, &mut a_i);
    p.w_hi.matvec_acc(h_prev, &mut a_i);
    let mut a_c = p.b_c.clone();
    p.w_xc.matvec_acc(x, &mut a_c);
    p.w_hc.matvec_acc(h_prev, &mut a_c);
    let mut a_o = p.b_o.clone();
    p.w_xo.matvec_acc(x, &mut a_o);
    p.w_ho.matvec_acc(h_prev, &mut a_o);

    let mut i = vec![0.0; hd];
    let mut g = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut o = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for k in 0..hd {
        i[k] = sigmoid(a_i[k] + p.w_ci[k] * c_prev[k]);
        g[k] = tanh(a_c[k]);
        c[k] = (1.0 - i[k]) * c_prev[k] + i[k] * g[k];
        o[k] = sigmoid(a_o[k] + p.w_co[k] * c[k]);
        tanh_c[k] = tanh(c[k]);
        h[k] = o[k] * tanh_c[k];
    }
    let trace = StepTrace {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        g,
        c: c.clone(),
        o,
        tanh_c,
    };
    Ok((h, c, trace))
}

/// Left fold of the cell over `xs` from `(h0, c0)`.
pub fn lstm_sequence_forward(
    p: &LstmCellParams,
    xs: &[Vec<f64>],
    h0: &[f64],
    c0: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<StepTrace>)> {
    if xs.is_empty() {
        return Err(Error::Empty("LSTM input sequence"));
    }
    let mut h = h0.to_vec();
    let mut c = c0.to_vec();
    let mut hs = Vec::with_capacity(xs.len());
    let mut traces = Vec::with_capacity(xs.len());
    for x in xs {
        let (h_next, c_next, trace) = lstm_cell_forward(p, x, &h, &c)?;
        hs.push(h_next.clone());
        traces.push(trace);
        h = h_next;
        c = c_next;
    }
    Ok((hs, traces))
}

/// Zero initial state.
pub fn lstm_sequence_forward_zero(p: &LstmCellParams, xs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<StepTrace>)> {
    let zero = vec![0.0; p.hidden_dim()];
    lstm_sequence_forward(p, xs, &zero, &zero)
}

/// Gradients of a scalar loss given `dL/dh_t` for every step. Returns
/// parameter gradients and `dL/dx_t`.
pub fn bptt_backward(
    p: &LstmCellParams,
    traces: &[StepTrace],
    grad_hs: &[Vec<f64>],
) -> Result<(LstmCellParams, Vec<Vec<f64>>)> {
    if traces.len() != grad_hs.len() {
        return Err(Error::shape(format!(
            "{} traces but {} upstream gradients",
            traces.len(),
            grad_hs.len()
        )));
    }
    let (hd, d) = (p.hidden_dim(), p.input_dim());
    let mut gp = LstmCellParams::zeros(d, hd);
    let mut grad_xs = vec![Vec::new(); traces.len()];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut da_i = vec![0.0; hd];
    let mut da_c = vec![0.0; hd];
    let mut da_o = vec![0.0; hd];

    for t in (0..traces.len()).rev() {
        let tr = &traces[t];
        if grad_hs[t].len() != hd {
            return Err(Error::shape(format!("upstream gradient at {t} has length {}", grad_hs[t].len())));
        }
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let dh = grad_hs[t][k] + dh_next[k];
            let (o, tc) = (tr.o[k], tr.tanh_c[k]);
            da_o[k] = dh * tc * o * (1.0 - o);
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc) + da_o[k] * p.w_co[k];
            let (i, g) = (tr.i[k], tr.g[k]);
            da_c[k] = dc * i * (1.0 - g * g);
            da_i[k] = dc * (g - tr.c_prev[k]) * i * (1.0 - i);
            dc_prev[k] = dc * (1.0 - i) + da_i[k] * p.w_ci[k];

            gp.w_co[k] += da_o[k] * tr.c[k];
            gp.b_o[k] += da_o[k];
            gp.b_c[k] += da_c[k];
            gp.w_ci[k] += da_i[k] * tr.c_prev[k];
            gp.b_i[k] += da_i[k];
        }
        gp.w_xo.add_outer(&da_o, &tr.x, 1.0);
        gp.w_ho.add_outer(&da_o, &tr.h_prev, 1.0);
        gp.w_xc.add_outer(&da_c, &tr.x, 1.0);
        gp.w_hc.add_outer(&da_c, &tr.h_prev, 1.0);
        gp.w_xi.add_outer(&da_i, &tr.x, 1.0);
        gp.w_hi.add_outer(&da_i, &tr.h_prev, 1.0);

        let mut dx = vec![0.0; d];
        p.w_xi.t_matvec_acc(&da_i, &mut dx);
        p.w_xc.t_matvec_acc(&da_c, &mut dx);
        p.w_xo.t_matvec_acc(&da_o, &mut dx);
        grad_xs[t] = dx;

        let mut dh_prev = vec![0.0; hd];
        p.w_hi.t_matvec_acc(&da_i, &mut dh_prev);
        p.w_hc.t_matvec_acc(&da_c, &mut dh_prev);
        p.w_ho.t_matvec_acc(&da_o, &mut dh_prev);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    Ok((gp, grad_xs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
}

impl BiLstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            forward: LstmCellParams::zeros(input_dim, hidden),
            backward: LstmCellParams::zeros(input_dim, hidden),
        }
    }

    pub fn random(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let forward = LstmCellParams::random(input_dim, hidden, rng);
        let backward = LstmCellParams::random(input_dim, hidden, rng);
        Self { forward, backward }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim()
    }

    pub fn check(&self) -> Result<()> {
        self.forward.check()?;
        self.backward.check()?;
        if self.forward.input_dim() != self.backward.input_dim() || self.forward.hidden_dim() != self.backward.hidden_dim() {
            return Err(Error::shape("forward and backward LSTM sizes differ"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmTrace {
    pub forward: Vec<StepTrace>,
    /// In processing order, i.e. for the reversed sequence.
    pub backward: Vec<StepTrace>,
}

/// `out[t] = [lh_t; rh_t]` where the right context runs over the reversed
/// sequence and is re-reversed.
pub fn bilstm_forward(p: &BiLstmParams, xs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, BiLstmTrace)> {
    let (fwd_hs, fwd_tr) = lstm_sequence_forward_zero(&p.forward, xs)?;
    let reversed: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let (bwd_hs, bwd_tr) = lstm_sequence_forward_zero(&p.backward, &reversed)?;
    let n = xs.len();
    let out = (0..n)
        .map(|t| {
            let mut v = fwd_hs[t].clone();
            v.extend_from_slice(&bwd_hs[n - 1 - t]);
            v
        })
        .collect();
    Ok((
        out,
        BiLstmTrace {
            forward: fwd_tr,
            backward: bwd_tr,
        },
    ))
}

/// Backward pass of `bilstm_forward` given `dL/d out[t]` (length `2H` each).
pub fn bilstm_backward(
    p: &BiLstmParams,
    trace: &BiLstmTrace,
    grad_out: &[Vec<f64>],
) -> Result<(BiLstmParams, Vec<Vec<f64>>)> {
    let h = p.hidden_dim();
    let n = grad_out.len();
    if trace.forward.len() != n || trace.backward.len() != n {
        return Err(Error::shape(format!(
            "trace of length {} but {n} upstream gradients",
            trace.forward.len()
        )));
    }
    if let Some(g) = grad_out.iter().find(|g| g.len() != 2 * h) {
        return Err(Error::shape(format!("upstream gradient of length {}, expected {}", g.len(), 2 * h)));
    }
    let fwd_g: Vec<Vec<f64>> = grad_out.iter().map(|g| g[..h].to_vec()).collect();
    let bwd_g: Vec<Vec<f64>> = grad_out.iter().rev().map(|g| g[h..].to_vec()).collect();
    let (gf, mut dxs) = bptt_backward(&p.forward, &trace.forward, &fwd_g)?;
    let (gb, dxs_rev) = bptt_backward(&p.backward, &trace.backward, &bwd_g)?;
    for (t, dx) in dxs.iter_mut().enumerate() {
        for (a, b) in dx.iter_mut().zip(&dxs_rev[n - 1 - t]) {
            *a += b;
        }
    }
    Ok((
        BiLstmParams {
            forward: gf,
            backward: gb,
        },
        dxs,
    ))
}
