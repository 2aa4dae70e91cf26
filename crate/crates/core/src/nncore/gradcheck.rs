//! Central finite-difference verification of analytic gradients.

use super::Params;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Minimum number of coordinates checked (all of them if the model is smaller).
    pub samples: usize,
    /// Per-block floor so every tensor gets coverage.
    pub min_per_block: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { samples: 200, min_per_block: 8, step: 1e-5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub block: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub worst: Option<Coordinate>,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` around `params`
/// on a seeded subsample of coordinates.
pub fn grad_check<P, F>(params: &P, analytic: &P, loss: F, opts: &GradCheckOptions) -> GradCheckReport
where
    P: Params<f64>,
    F: Fn(&P) -> f64,
{
    let meta: Vec<(String, usize)> = params.blocks().iter().map(|b| (b.name.clone(), b.data.len())).collect();
    let grads: Vec<Vec<f64>> = analytic.blocks().iter().map(|b| b.data.to_vec()).collect();
    let total: usize = meta.iter().map(|m| m.1).sum();
    let mut rng = SplitMix64::new(opts.seed);
    let mut work = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None, blocks: Vec::new() };
    for (bi, (name, len)) in meta.iter().enumerate() {
        let want = if total <= opts.samples {
            *len
        } else {
            (opts.samples * len).div_ceil(total).max(opts.min_per_block).min(*len)
        };
        let mut idx: Vec<usize> = (0..*len).collect();
        rng.shuffle(&mut idx);
        idx.truncate(want);
        idx.sort_unstable();
        let mut block = BlockReport { name: name.clone(), checked: 0, max_rel_error: 0.0 };
        for i in idx {
            let orig = work.blocks_mut()[bi][i];
            work.blocks_mut()[bi][i] = orig + opts.step;
            let up = loss(&work);
            work.blocks_mut()[bi][i] = orig - opts.step;
            let down = loss(&work);
            work.blocks_mut()[bi][i] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            let a = grads[bi][i];
            let err = relative_error(a, numeric);
            block.checked += 1;
            block.max_rel_error = block.max_rel_error.max(err);
            if report.worst.as_ref().is_none_or(|w| err > w.rel_error) {
                report.worst =
                    Some(Coordinate { block: name.clone(), index: i, analytic: a, numeric, rel_error: err });
            }
        }
        report.checked += block.checked;
        report.max_rel_error = report.max_rel_error.max(block.max_rel_error);
        report.blocks.push(block);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{DenseParams, Initializer, ParamBlock};

    fn quad_loss(p: &DenseParams<f64>) -> f64 {
        p.w.data().iter().chain(&p.b).enumerate().map(|(i, v)| (i % 7 + 1) as f64 * (v + 0.5).powi(2)).sum()
    }

    fn quad_grad(p: &DenseParams<f64>) -> DenseParams<f64> {
        let mut g = p.clone();
        for (i, v) in g.w.data_mut().iter_mut().chain(g.b.iter_mut()).enumerate() {
            *v = 2.0 * (i % 7 + 1) as f64 * (*v + 0.5);
        }
        g
    }

    #[test]
    fn correct_gradient_passes() {
        let p: DenseParams<f64> = Initializer::new(4).dense(30, 10);
        let r = grad_check(&p, &quad_grad(&p), quad_loss, &GradCheckOptions::default());
        assert!(r.checked >= 200, "{}", r.checked);
        assert!(r.passes(1e-4), "{}", r.max_rel_error);
        assert_eq!(r.blocks.len(), 2);
    }

    #[test]
    fn doubled_gradient_is_flagged() {
        let p: DenseParams<f64> = Initializer::new(4).dense(5, 3);
        let mut g = quad_grad(&p);
        g.scale(2.0);
        let r = grad_check(&p, &g, quad_loss, &GradCheckOptions::default());
        assert!(r.max_rel_error >= 0.333, "{}", r.max_rel_error);
        assert!(!r.passes(1e-4));
        assert!(r.worst.is_some());
    }

    #[derive(Clone)]
    struct Empty;
    impl Params<f64> for Empty {
        fn visit<'a>(&'a self, _: &str, _: &mut Vec<ParamBlock<'a, f64>>) {}
        fn visit_mut<'a>(&'a mut self, _: &mut Vec<&'a mut [f64]>) {}
    }

    #[test]
    fn zero_parameter_model_passes_vacuously() {
        let r = grad_check(&Empty, &Empty, |_| 1.0, &GradCheckOptions::default());
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.checked, 0);
        assert!(r.passes(1e-4));
    }
}
