//! LSTM cell, sequence unrolling and backpropagation through time.
//!
//! Gate pre-activations are stored fused, four blocks of `hidden` rows in the
//! order input `i`, forget `f`, input modulation `g`, output `o`:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)     f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g)  o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g             h' = o ⊙ tanh(c')
//! ```

use super::params::{join, Matrix, ParamBlock, Params};
use super::real::sigmoid;
use super::{check_finite, check_len, NnError, Real};

pub const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    /// `(4·hidden) × input`
    pub w: Matrix<T>,
    /// `(4·hidden) × hidden`
    pub u: Matrix<T>,
    /// `4·hidden`
    pub b: Vec<T>,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(GATES * hidden_dim, input_dim),
            u: Matrix::zeros(GATES * hidden_dim, hidden_dim),
            b: vec![T::zero(); GATES * hidden_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.cols()
    }

    /// Closed-form parameter count of one LSTM layer.
    pub fn count(input_dim: usize, hidden_dim: usize) -> usize {
        GATES * (hidden_dim * input_dim + hidden_dim * hidden_dim + hidden_dim)
    }
}

impl<T: Real> Params<T> for LstmParams<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>) {
        let (h, i) = (self.hidden_dim(), self.input_dim());
        out.push(ParamBlock { name: join(prefix, "w"), dims: vec![GATES, h, i], data: self.w.data() });
        out.push(ParamBlock { name: join(prefix, "u"), dims: vec![GATES, h, h], data: self.u.data() });
        out.push(ParamBlock { name: join(prefix, "b"), dims: vec![GATES, h], data: &self.b });
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        out.push(self.w.data_mut());
        out.push(self.u.data_mut());
        out.push(&mut self.b);
    }
}

/// Activations of one step kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    /// Post-activation gates `[i | f | g | o]`.
    pub gates: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
}

impl<T: Real> StepCache<T> {
    pub fn input_gate(&self) -> &[T] {
        &self.gates[..self.c.len()]
    }
    pub fn forget_gate(&self) -> &[T] {
        let h = self.c.len();
        &self.gates[h..2 * h]
    }
    pub fn modulation_gate(&self) -> &[T] {
        let h = self.c.len();
        &self.gates[2 * h..3 * h]
    }
    pub fn output_gate(&self) -> &[T] {
        let h = self.c.len();
        &self.gates[3 * h..]
    }
}

fn cell_step<T: Real>(x: &[T], h_prev: &[T], c_prev: &[T], p: &LstmParams<T>) -> StepCache<T> {
    let h = p.hidden_dim();
    let mut z = p.b.clone();
    p.w.matvec_acc(x, &mut z);
    p.u.matvec_acc(h_prev, &mut z);
    for (k, zk) in z.iter_mut().enumerate() {
        *zk = if k / h == 2 { zk.tanh() } else { sigmoid(*zk) };
    }
    let mut c = Vec::with_capacity(h);
    let mut tanh_c = Vec::with_capacity(h);
    for j in 0..h {
        let cj = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
        c.push(cj);
        tanh_c.push(cj.tanh());
    }
    StepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), gates: z, c, tanh_c }
}

impl<T: Real> StepCache<T> {
    pub fn h(&self) -> Vec<T> {
        let h = self.c.len();
        (0..h).map(|j| self.gates[3 * h + j] * self.tanh_c[j]).collect()
    }
}

/// One LSTM step. Returns `(h_t, c_t, cache)`.
pub fn lstm_cell_forward<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    params: &LstmParams<T>,
) -> Result<(Vec<T>, Vec<T>, StepCache<T>), NnError> {
    check_len("lstm input", params.input_dim(), x.len())?;
    check_len("lstm hidden state", params.hidden_dim(), h_prev.len())?;
    check_len("lstm cell state", params.hidden_dim(), c_prev.len())?;
    check_finite("lstm input", x)?;
    check_finite("lstm hidden state", h_prev)?;
    check_finite("lstm cell state", c_prev)?;
    let cache = cell_step(x, h_prev, c_prev, params);
    Ok((cache.h(), cache.c.clone(), cache))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceMode {
    ManyToMany,
    ManyToOne,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceOutput<T> {
    /// `T × hidden`
    All(Matrix<T>),
    Last(Vec<T>),
}

/// Recorded forward pass over a whole sequence, from `h_0 = c_0 = 0`.
#[derive(Debug, Clone)]
pub struct SequenceTape<T> {
    pub steps: Vec<StepCache<T>>,
    /// `T × hidden`
    pub hidden: Matrix<T>,
}

impl<T: Real> SequenceTape<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_hidden(&self) -> &[T] {
        self.hidden.row(self.hidden.rows() - 1)
    }

    pub(crate) fn record(xs: &Matrix<T>, params: &LstmParams<T>) -> Result<Self, NnError> {
        if xs.rows() == 0 {
            return Err(NnError::EmptySequence);
        }
        check_len("lstm input", params.input_dim(), xs.cols())?;
        check_finite("lstm input sequence", xs.data())?;
        Ok(Self::record_rows((0..xs.rows()).map(|t| xs.row(t)), params))
    }

    /// Unchecked unroll over any row iterator (callers validate shapes).
    pub(crate) fn record_rows<'a>(rows: impl Iterator<Item = &'a [T]>, params: &LstmParams<T>) -> Self {
        let hd = params.hidden_dim();
        let mut h = vec![T::zero(); hd];
        let mut c = vec![T::zero(); hd];
        let mut steps = Vec::new();
        let mut hidden = Vec::new();
        for x in rows {
            let step = cell_step(x, &h, &c, params);
            h = step.h();
            c.clone_from(&step.c);
            hidden.extend_from_slice(&h);
            steps.push(step);
        }
        let t = steps.len();
        Self { steps, hidden: Matrix::from_vec(t, hd, hidden) }
    }

    /// Backpropagation through time. `dh` holds the loss gradient arriving at
    /// each `h_t` from above (`T × hidden`). Parameter gradients accumulate into
    /// `grads`; input gradients are returned when `want_dx`.
    pub(crate) fn backward(
        &self,
        params: &LstmParams<T>,
        dh: &Matrix<T>,
        grads: &mut LstmParams<T>,
        want_dx: bool,
    ) -> Option<Matrix<T>> {
        let hd = params.hidden_dim();
        let mut dx = want_dx.then(|| Matrix::zeros(self.len(), params.input_dim()));
        let mut dh_next = vec![T::zero(); hd];
        let mut dc_next = vec![T::zero(); hd];
        let mut dz = vec![T::zero(); GATES * hd];
        let one = T::one();
        for (t, s) in self.steps.iter().enumerate().rev() {
            let (gi, gf, gg, go) = (s.input_gate(), s.forget_gate(), s.modulation_gate(), s.output_gate());
            let dh_t = dh.row(t);
            for j in 0..hd {
                let dhj = dh_t[j] + dh_next[j];
                let dc = dc_next[j] + dhj * go[j] * (one - s.tanh_c[j] * s.tanh_c[j]);
                dz[j] = dc * gg[j] * gi[j] * (one - gi[j]);
                dz[hd + j] = dc * s.c_prev[j] * gf[j] * (one - gf[j]);
                dz[2 * hd + j] = dc * gi[j] * (one - gg[j] * gg[j]);
                dz[3 * hd + j] = dhj * s.tanh_c[j] * go[j] * (one - go[j]);
                dc_next[j] = dc * gf[j];
            }
            grads.w.outer_acc(&dz, &s.x);
            grads.u.outer_acc(&dz, &s.h_prev);
            for (b, &d) in grads.b.iter_mut().zip(&dz) {
                *b = *b + d;
            }
            dh_next.fill(T::zero());
            params.u.t_matvec_acc(&dz, &mut dh_next);
            if let Some(dx) = dx.as_mut() {
                params.w.t_matvec_acc(&dz, dx.row_mut(t));
            }
        }
        dx
    }
}

pub fn lstm_sequence_forward<T: Real>(
    xs: &Matrix<T>,
    params: &LstmParams<T>,
    mode: SequenceMode,
) -> Result<SequenceOutput<T>, NnError> {
    let tape = SequenceTape::record(xs, params)?;
    Ok(match mode {
        SequenceMode::ManyToMany => SequenceOutput::All(tape.hidden),
        SequenceMode::ManyToOne => SequenceOutput::Last(tape.last_hidden().to_vec()),
    })
}

/// Runs BPTT for a tape produced by [`lstm_sequence_forward`]-equivalent
/// recording. See [`SequenceTape::backward`].
pub fn lstm_sequence_backward<T: Real>(
    tape: &SequenceTape<T>,
    params: &LstmParams<T>,
    dh: &Matrix<T>,
    grads: &mut LstmParams<T>,
) -> Result<Matrix<T>, NnError> {
    check_len("lstm upstream gradient rows", tape.len(), dh.rows())?;
    check_len("lstm upstream gradient cols", params.hidden_dim(), dh.cols())?;
    Ok(tape.backward(params, dh, grads, true).unwrap_or_else(|| Matrix::zeros(0, 0)))
}

/// Forward LSTM over `xs` and backward LSTM over reversed `xs`; returns the
/// concatenated final hiddens `[h_fwd | h_bwd]`.
pub fn bilstm_sequence_forward<T: Real>(
    xs: &Matrix<T>,
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
) -> Result<Vec<T>, NnError> {
    let f = SequenceTape::record(xs, fwd)?;
    check_len("bilstm input", bwd.input_dim(), xs.cols())?;
    let b = SequenceTape::record_rows((0..xs.rows()).rev().map(|t| xs.row(t)), bwd);
    let mut out = f.last_hidden().to_vec();
    out.extend_from_slice(b.last_hidden());
    Ok(out)
}
