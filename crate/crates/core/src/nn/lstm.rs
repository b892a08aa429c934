//! Recurrent cells: a sigmoid RNN baseline and an LSTM with exact
//! backpropagation.
//!
//! One LSTM layer holds four gate matrices of shape `hidden × (hidden +
//! input)`, each acting on the concatenation `[h_prev, x]`, plus four bias
//! vectors. The cell update is
//!
//! ```text
//! f = sigmoid(W_f [h_prev, x] + b_f)        forget gate
//! i = sigmoid(W_i [h_prev, x] + b_i)        input gate
//! g = tanh   (W_c [h_prev, x] + b_c)        candidate cell
//! c = f * c_prev + i * g
//! o = sigmoid(W_o [h_prev, x] + b_o)        output gate
//! h = o * tanh(c)
//! ```
//!
//! [`cell_forward`] records every intermediate so [`cell_backward`] can
//! produce exact gradients for backpropagation through time.

use crate::linalg::{add_assign, Matrix};

use super::NnError;

/// Parameters of one LSTM layer. Gate matrices have shape
/// `hidden × (hidden + input)`; biases have length `hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams {
    pub w_f: Matrix,
    pub b_f: Vec<f64>,
    pub w_i: Matrix,
    pub b_i: Vec<f64>,
    pub w_c: Matrix,
    pub b_c: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
}

/// All layers of a stacked LSTM, bottom first.
pub type LstmParams = Vec<LstmLayerParams>;

impl LstmLayerParams {
    pub fn zeros(hidden_dim: usize, input_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, hidden_dim + input_dim);
        let b = || vec![0.0; hidden_dim];
        LstmLayerParams {
            w_f: w(),
            b_f: b(),
            w_i: w(),
            b_i: b(),
            w_c: w(),
            b_c: b(),
            w_o: w(),
            b_o: b(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_f.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.cols() - self.w_f.rows()
    }

    fn shapes_consistent(&self) -> bool {
        let (h, cat) = (self.w_f.rows(), self.w_f.cols());
        cat > h
            && [&self.w_i, &self.w_c, &self.w_o]
                .iter()
                .all(|w| w.rows() == h && w.cols() == cat)
            && [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
                .iter()
                .all(|b| b.len() == h)
    }
}

/// Hidden and cell vectors of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LayerState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LayerState {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// State of a whole stack, bottom layer first.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub layers: Vec<LayerState>,
}

impl LstmState {
    pub fn zeros(num_layers: usize, hidden_dim: usize) -> Self {
        LstmState {
            layers: (0..num_layers)
                .map(|_| LayerState::zeros(hidden_dim))
                .collect(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Everything one cell evaluation produced, kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct CellStep {
    pub cat: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn gate(w: &Matrix, cat: &[f64], b: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; w.rows()];
    w.matvec(cat, &mut out);
    add_assign(&mut out, b);
    for v in &mut out {
        *v = act(*v);
    }
    out
}

pub(crate) fn cell_forward(
    p: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> CellStep {
    let hidden = p.hidden_dim();
    let mut cat = Vec::with_capacity(hidden + x.len());
    cat.extend_from_slice(h_prev);
    cat.extend_from_slice(x);

    let f = gate(&p.w_f, &cat, &p.b_f, sigmoid);
    let i = gate(&p.w_i, &cat, &p.b_i, sigmoid);
    let g = gate(&p.w_c, &cat, &p.b_c, f64::tanh);
    let o = gate(&p.w_o, &cat, &p.b_o, sigmoid);

    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }

    // Gates are sigmoids and the candidate is a tanh, so components sit in the
    // unit ranges below; saturated values round onto the interval ends in
    // floating point, which the closed comparison tolerates.
    debug_assert!(f
        .iter()
        .chain(&i)
        .chain(&o)
        .all(|v| (0.0..=1.0).contains(v)));
    debug_assert!(g.iter().chain(&tanh_c).chain(&h).all(|v| v.abs() <= 1.0));

    CellStep {
        cat,
        f,
        i,
        g,
        o,
        c_prev: c_prev.to_vec(),
        c,
        tanh_c,
        h,
    }
}

/// Backpropagates one cell evaluation.
///
/// `dh` and `dc_in` are the loss gradients flowing into this step's `h` and
/// `c`. Parameter gradients accumulate into `grads`; the returned pair is
/// `(dcat, dc_prev)`, where the first `hidden` entries of `dcat` are `dh_prev`
/// and the rest are `dx`.
pub(crate) fn cell_backward(
    p: &LstmLayerParams,
    s: &CellStep,
    dh: &[f64],
    dc_in: &[f64],
    grads: &mut LstmLayerParams,
) -> (Vec<f64>, Vec<f64>) {
    let hidden = p.hidden_dim();
    let mut dpre_f = vec![0.0; hidden];
    let mut dpre_i = vec![0.0; hidden];
    let mut dpre_c = vec![0.0; hidden];
    let mut dpre_o = vec![0.0; hidden];
    let mut dc_prev = vec![0.0; hidden];

    for k in 0..hidden {
        let dc = dc_in[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        let d_o = dh[k] * s.tanh_c[k];
        dpre_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
        dpre_f[k] = dc * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
        dpre_i[k] = dc * s.g[k] * s.i[k] * (1.0 - s.i[k]);
        dpre_c[k] = dc * s.i[k] * (1.0 - s.g[k] * s.g[k]);
        dc_prev[k] = dc * s.f[k];
    }

    let mut dcat = vec![0.0; s.cat.len()];
    p.w_f.matvec_t_add(&dpre_f, &mut dcat);
    p.w_i.matvec_t_add(&dpre_i, &mut dcat);
    p.w_c.matvec_t_add(&dpre_c, &mut dcat);
    p.w_o.matvec_t_add(&dpre_o, &mut dcat);

    grads.w_f.add_outer(&dpre_f, &s.cat);
    grads.w_i.add_outer(&dpre_i, &s.cat);
    grads.w_c.add_outer(&dpre_c, &s.cat);
    grads.w_o.add_outer(&dpre_o, &s.cat);
    add_assign(&mut grads.b_f, &dpre_f);
    add_assign(&mut grads.b_i, &dpre_i);
    add_assign(&mut grads.b_c, &dpre_c);
    add_assign(&mut grads.b_o, &dpre_o);

    (dcat, dc_prev)
}

/// One step of the sigmoid RNN baseline:
/// `h = sigmoid(W_x x + W_h h_prev + b)`.
pub fn rnn_cell(
    x: &[f64],
    h_prev: &[f64],
    w_x: &Matrix,
    w_h: &Matrix,
    b: &[f64],
) -> Result<Vec<f64>, NnError> {
    let hidden = w_x.rows();
    if w_h.rows() != hidden
        || w_h.cols() != hidden
        || h_prev.len() != hidden
        || b.len() != hidden
        || w_x.cols() != x.len()
    {
        return Err(NnError::ShapeMismatch {
            what: "rnn cell operands",
        });
    }
    let mut out = vec![0.0; hidden];
    w_x.matvec(x, &mut out);
    let mut rec = vec![0.0; hidden];
    w_h.matvec(h_prev, &mut rec);
    for k in 0..hidden {
        out[k] = sigmoid(out[k] + rec[k] + b[k]);
    }
    Ok(out)
}

/// One LSTM step, returning the layer's next state.
pub fn lstm_cell(
    x: &[f64],
    state: &LayerState,
    params: &LstmLayerParams,
) -> Result<LayerState, NnError> {
    if !params.shapes_consistent()
        || x.len() != params.input_dim()
        || state.h.len() != params.hidden_dim()
        || state.c.len() != params.hidden_dim()
    {
        return Err(NnError::ShapeMismatch {
            what: "lstm cell operands",
        });
    }
    if !x
        .iter()
        .chain(&state.h)
        .chain(&state.c)
        .all(|v| v.is_finite())
    {
        return Err(NnError::NonFiniteInput);
    }
    let step = cell_forward(params, x, &state.h, &state.c);
    Ok(LayerState {
        h: step.h,
        c: step.c,
    })
}
