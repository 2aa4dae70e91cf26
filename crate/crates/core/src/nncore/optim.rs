use serde::{Deserialize, Serialize};

use super::{NnError, Params, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "OptimizerConfig::default_kind")]
    pub kind: OptimizerKind,
    #[serde(default = "OptimizerConfig::default_lr")]
    pub lr: f64,
    #[serde(default = "OptimizerConfig::default_beta1")]
    pub beta1: f64,
    #[serde(default = "OptimizerConfig::default_beta2")]
    pub beta2: f64,
    #[serde(default = "OptimizerConfig::default_epsilon")]
    pub epsilon: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
}

impl OptimizerConfig {
    fn default_kind() -> OptimizerKind {
        OptimizerKind::Adam
    }
    fn default_lr() -> f64 {
        1e-3
    }
    fn default_beta1() -> f64 {
        0.9
    }
    fn default_beta2() -> f64 {
        0.999
    }
    fn default_epsilon() -> f64 {
        1e-8
    }

    pub fn sgd(lr: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, lr, ..Self::default() }
    }

    pub fn adam(lr: f64) -> Self {
        Self { kind: OptimizerKind::Adam, lr, ..Self::default() }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: Self::default_kind(),
            lr: Self::default_lr(),
            beta1: Self::default_beta1(),
            beta2: Self::default_beta2(),
            epsilon: Self::default_epsilon(),
            clip_norm: None,
        }
    }
}

/// Optimizer with per-tensor first/second moments (Adam only).
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub config: OptimizerConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig) -> Self {
        Self { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step<P: Params<T>>(&mut self, params: &mut P, grads: &P) -> Result<(), NnError> {
        let gblocks = grads.blocks();
        let sizes: Vec<usize> = params.blocks().iter().map(|b| b.data.len()).collect();
        let gsizes: Vec<usize> = gblocks.iter().map(|b| b.data.len()).collect();
        if sizes != gsizes {
            return Err(NnError::ShapeMismatch {
                context: "optimizer gradients",
                expected: sizes.iter().sum(),
                found: gsizes.iter().sum(),
            });
        }
        if !grads.all_finite() {
            return Err(NnError::NonFinite("gradient"));
        }
        let scale = match self.config.clip_norm {
            Some(max) => {
                let norm = grads.squared_norm().as_f64().sqrt();
                if norm > max { T::of(max / norm) } else { T::one() }
            }
            None => T::one(),
        };
        self.step += 1;
        let lr = T::of(self.config.lr);
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.blocks_mut().into_iter().zip(&gblocks) {
                    for (pi, &gi) in p.iter_mut().zip(g.data) {
                        *pi = *pi - lr * scale * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = sizes.iter().map(|&n| vec![T::zero(); n]).collect();
                    self.v = self.m.clone();
                }
                let c = &self.config;
                let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.epsilon));
                let t = self.step as i32;
                let bc1 = T::of(1.0 - c.beta1.powi(t));
                let bc2 = T::of(1.0 - c.beta2.powi(t));
                for (((p, g), m), v) in params.blocks_mut().into_iter().zip(&gblocks).zip(&mut self.m).zip(&mut self.v)
                {
                    for k in 0..p.len() {
                        let gk = g.data[k] * scale;
                        m[k] = b1 * m[k] + (T::one() - b1) * gk;
                        v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] = p[k] - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::DenseParams;

    fn scalar(v: f64) -> DenseParams<f64> {
        let mut p = DenseParams::zeros(1, 1);
        p.w.set(0, 0, v);
        p.b[0] = v;
        p
    }

    #[test]
    fn sgd_step() {
        let mut p = scalar(1.0);
        Optimizer::new(OptimizerConfig::sgd(0.1)).step(&mut p, &scalar(2.0)).unwrap();
        assert!((p.w.get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerConfig::adam(0.01));
        opt.step(&mut p, &scalar(1.0)).unwrap();
        assert!((p.w.get(0, 0) - 0.99).abs() < 1e-8);
        assert!((p.b[0] - 0.99).abs() < 1e-8);
        assert_eq!(opt.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        for cfg in [OptimizerConfig::sgd(0.5), OptimizerConfig::adam(0.5)] {
            let mut p = scalar(0.7);
            let mut opt = Optimizer::new(cfg);
            opt.step(&mut p, &scalar(0.0)).unwrap();
            opt.step(&mut p, &scalar(0.0)).unwrap();
            assert_eq!(p, scalar(0.7));
        }
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1));
        assert!(matches!(opt.step(&mut p, &scalar(f64::NAN)), Err(NnError::NonFinite(_))));
        assert!(matches!(opt.step(&mut p, &DenseParams::zeros(2, 1)), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn clip_norm_rescales() {
        let mut p = scalar(0.0);
        let cfg = OptimizerConfig { clip_norm: Some(1.0), ..OptimizerConfig::sgd(1.0) };
        Optimizer::new(cfg).step(&mut p, &scalar(3.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.w.get(0, 0) + s).abs() < 1e-12);
    }
}
