use super::{check_finite, NnError, Real};

/// Clip bound of the categorical cross-entropy.
pub const DEFAULT_CLIP_EPSILON: f64 = 1e-7;

/// Max-shifted softmax.
pub fn softmax<T: Real>(z: &[T]) -> Result<Vec<T>, NnError> {
    if z.is_empty() {
        return Err(NnError::ShapeMismatch { context: "softmax input", expected: 1, found: 0 });
    }
    check_finite("softmax input", z)?;
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = e.iter().copied().sum();
    Ok(e.into_iter().map(|v| v / total).collect())
}

fn check_epsilon(eps: f64) -> Result<(), NnError> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(NnError::InvalidEpsilon(eps))
    }
}

/// `-ln(clip(probs[target], ε, 1-ε))`, evaluated in `T` so that at `f32` the
/// upper clip bound rounds to `1 - 2⁻²³`.
pub fn cross_entropy_clipped<T: Real>(probs: &[T], target: usize, eps: f64) -> Result<T, NnError> {
    check_epsilon(eps)?;
    let p = *probs.get(target).ok_or(NnError::TargetOutOfRange(target, probs.len()))?;
    let lo = T::of(eps);
    let hi = T::one() - lo;
    Ok(-p.max(lo).min(hi).ln())
}

/// Gradient of the clipped loss with respect to the softmax logits:
/// `probs - onehot(target)` inside the clip range, zero where the clip is active.
pub fn cross_entropy_grad_logits<T: Real>(probs: &[T], target: usize, eps: f64) -> Result<Vec<T>, NnError> {
    check_epsilon(eps)?;
    let p = *probs.get(target).ok_or(NnError::TargetOutOfRange(target, probs.len()))?;
    let lo = T::of(eps);
    if p < lo || p > T::one() - lo {
        return Ok(vec![T::zero(); probs.len()]);
    }
    let mut g = probs.to_vec();
    g[target] = g[target] - T::one();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_basics() {
        let p = softmax(&[0.0f64; 8]).unwrap();
        assert!(p.iter().all(|&v| v == 0.125));
        let z = [0.3, -1.2, 4.0, 0.0];
        let shifted: Vec<f64> = z.iter().map(|v| v + 123.0).collect();
        let (a, b) = (softmax(&z).unwrap(), softmax(&shifted).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(matches!(softmax(&[f64::INFINITY]), Err(NnError::NonFinite(_))));
        assert!(softmax::<f64>(&[]).is_err());
    }

    #[test]
    fn softmax_large_logit_argmax() {
        let mut z = [0.0f64; 8];
        z[5] = 9.0;
        let p = softmax(&z).unwrap();
        let arg = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(arg, 5);
        assert!(p[5] > 0.99);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loss_ceiling_and_floor() {
        let mut probs = [0.0f64; 8];
        probs[1] = 1.0;
        let ceil = cross_entropy_clipped(&probs, 0, 1e-7).unwrap();
        assert!((ceil - 16.1181).abs() < 1e-3);
        assert_eq!(ceil, 16.11809565095832);

        let probs32 = [1.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let floor = cross_entropy_clipped(&probs32, 0, 1e-7).unwrap();
        assert!((1.19e-7..=1.20e-7).contains(&floor), "{floor}");
    }

    #[test]
    fn loss_at_inverse_e() {
        let p = [1.0 / std::f64::consts::E, 1.0 - 1.0 / std::f64::consts::E];
        assert!((cross_entropy_clipped(&p, 0, 1e-7).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_validation() {
        assert!(matches!(cross_entropy_clipped(&[1.0f64], 0, 0.0), Err(NnError::InvalidEpsilon(_))));
        assert!(matches!(cross_entropy_clipped(&[1.0f64], 0, 0.5), Err(NnError::InvalidEpsilon(_))));
        assert!(matches!(cross_entropy_clipped(&[1.0f64], 3, 1e-7), Err(NnError::TargetOutOfRange(3, 1))));
    }

    #[test]
    fn gradient_identity_and_clip() {
        let p = [0.2f64, 0.5, 0.3];
        assert_eq!(cross_entropy_grad_logits(&p, 1, 1e-7).unwrap(), vec![0.2, -0.5, 0.3]);
        let sure = [1.0f64, 0.0, 0.0];
        assert_eq!(cross_entropy_grad_logits(&sure, 0, 1e-7).unwrap(), vec![0.0; 3]);
        assert_eq!(cross_entropy_grad_logits(&sure, 1, 1e-7).unwrap(), vec![0.0; 3]);
    }
}
