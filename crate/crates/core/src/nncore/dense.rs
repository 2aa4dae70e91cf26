use serde::{Deserialize, Serialize};

use super::loss::softmax;
use super::params::{join, Matrix, ParamBlock, Params};
use super::{check_finite, check_len, NnError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Linear,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    /// `out × in`
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> DenseParams<T> {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self { w: Matrix::zeros(output_dim, input_dim), b: vec![T::zero(); output_dim] }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn count(input_dim: usize, output_dim: usize) -> usize {
        input_dim * output_dim + output_dim
    }

    /// `W x + b`
    pub(crate) fn affine(&self, x: &[T]) -> Vec<T> {
        let mut y = self.b.clone();
        self.w.matvec_acc(x, &mut y);
        y
    }
}

impl<T: Real> Params<T> for DenseParams<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>) {
        let (o, i) = (self.output_dim(), self.input_dim());
        out.push(ParamBlock { name: join(prefix, "w"), dims: vec![o, i], data: self.w.data() });
        out.push(ParamBlock { name: join(prefix, "b"), dims: vec![o], data: &self.b });
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        out.push(self.w.data_mut());
        out.push(&mut self.b);
    }
}

pub(crate) fn apply_activation<T: Real>(z: Vec<T>, act: Activation) -> Result<Vec<T>, NnError> {
    Ok(match act {
        Activation::Linear => z,
        Activation::Relu => z.into_iter().map(|v| v.max(T::zero())).collect(),
        Activation::Softmax => softmax(&z)?,
    })
}

/// `activation(W x + b)`.
pub fn dense_forward<T: Real>(x: &[T], params: &DenseParams<T>, activation: Activation) -> Result<Vec<T>, NnError> {
    check_len("dense input", params.input_dim(), x.len())?;
    check_finite("dense input", x)?;
    apply_activation(params.affine(x), activation)
}

/// Backward through the affine part given `dz = ∂L/∂(W x + b)`. Accumulates
/// parameter gradients and returns `∂L/∂x`.
pub fn dense_backward<T: Real>(x: &[T], dz: &[T], params: &DenseParams<T>, grads: &mut DenseParams<T>) -> Vec<T> {
    grads.w.outer_acc(dz, x);
    for (g, &d) in grads.b.iter_mut().zip(dz) {
        *g = *g + d;
    }
    let mut dx = vec![T::zero(); params.input_dim()];
    params.w.t_matvec_acc(dz, &mut dx);
    dx
}
