use crate::nncore::dense::apply_activation;
use crate::nncore::params::ParamBlock;
use crate::nncore::{dense_backward, Activation, DenseParams, Initializer, NnError, Params, Real};

use crate::corpus::Category;

/// `logits = dense₂(act(dense₁(d)))`; softmax is applied by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Head<T> {
    pub dense1: DenseParams<T>,
    pub dense2: DenseParams<T>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct HeadCache<T> {
    input: Vec<T>,
    pre: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Real> Head<T> {
    pub fn init(init: &mut Initializer, input_dim: usize, hidden_dim: usize, activation: Activation) -> Self {
        Self {
            dense1: init.dense(input_dim, hidden_dim),
            dense2: init.dense(hidden_dim, Category::COUNT),
            activation,
        }
    }

    pub fn count(input_dim: usize, hidden_dim: usize) -> usize {
        DenseParams::<T>::count(input_dim, hidden_dim) + DenseParams::<T>::count(hidden_dim, Category::COUNT)
    }

    pub fn forward(&self, d: &[T]) -> Result<(Vec<T>, HeadCache<T>), NnError> {
        let pre = self.dense1.affine(d);
        let hidden = apply_activation(pre.clone(), self.activation)?;
        let logits = self.dense2.affine(&hidden);
        Ok((logits, HeadCache { input: d.to_vec(), pre, hidden }))
    }

    /// Returns `∂L/∂d` given `∂L/∂logits`.
    pub fn backward(&self, cache: &HeadCache<T>, dlogits: &[T], grads: &mut Self) -> Vec<T> {
        let mut dhidden = dense_backward(&cache.hidden, dlogits, &self.dense2, &mut grads.dense2);
        if self.activation == Activation::Relu {
            for (g, &p) in dhidden.iter_mut().zip(&cache.pre) {
                if p <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        dense_backward(&cache.input, &dhidden, &self.dense1, &mut grads.dense1)
    }
}

impl<T: Real> Params<T> for Head<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>) {
        self.dense1.visit(&crate::nncore::params::join(prefix, "dense1"), out);
        self.dense2.visit(&crate::nncore::params::join(prefix, "dense2"), out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        self.dense1.visit_mut(out);
        self.dense2.visit_mut(out);
    }
}
