//! One-dimensional piecewise quadratic that is adversarial for canonical
//! Local SGD: f(x) = x²/2 for x ≥ 0 and x²/4 for x < 0.

use super::{Objective, ProblemConfig, ProblemSpec};
use crate::error::{Error, Result};

pub(crate) fn value(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * x * x
    } else {
        0.25 * x * x
    }
}

pub(crate) fn gradient(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.5 * x
    }
}

/// Builds the toy problem with additive Gaussian noise of standard deviation
/// `sigma` (so σ² = `sigma`²).
pub fn make_toy_adversarial(sigma: f64, x0: f64, n: usize) -> Result<ProblemSpec> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be finite and nonnegative, got {sigma}")));
    }
    if !x0.is_finite() {
        return Err(Error::invalid("x0", "must be finite"));
    }
    ProblemSpec::assemble(
        ProblemConfig::ToyAdversarial { sigma, x0, n },
        Objective::Toy { sigma },
        1.0,
        sigma * sigma,
        vec![x0],
        n,
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::sample_gradient;

    #[test]
    fn reference_setup() {
        let spec = make_toy_adversarial(10.0, -30.0, 100).unwrap();
        assert_eq!(spec.start_point, vec![-30.0]);
        assert_eq!(spec.smoothness_l, 1.0);
        assert_eq!(spec.noise_sigma2, 100.0);
        assert_eq!(spec.workers_n, 100);
        assert_eq!(spec.delta_gap, 225.0);
        assert_eq!(spec.dist_b, Some(30.0));
    }

    #[test]
    fn exact_gradient_branches() {
        let spec = make_toy_adversarial(1.0, 0.0, 1).unwrap();
        assert_eq!(spec.exact_gradient(&[3.0]), vec![3.0]);
        assert_eq!(spec.exact_gradient(&[-4.0]), vec![-2.0]);
    }

    #[test]
    fn zero_noise_samples_are_exact() {
        let spec = make_toy_adversarial(0.0, 1.0, 3).unwrap();
        let src = spec.noise_source(5);
        for w in 0..3 {
            let mut c = src.cursor(w, 0);
            for x in [-7.0, -0.5, 0.0, 3.0] {
                let g = sample_gradient(&spec, w, &[x], &mut c).unwrap();
                assert_eq!(g.gradient, spec.exact_gradient(&[x]));
            }
        }
    }

    #[test]
    fn rejects_negative_sigma() {
        assert!(make_toy_adversarial(-1.0, 0.0, 1).is_err());
    }
}
