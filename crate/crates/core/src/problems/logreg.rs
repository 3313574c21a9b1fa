//! Ridge-regularised binary logistic regression over a seeded synthetic
//! design. Each oracle call samples one data point uniformly.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Objective, ProblemConfig, ProblemSpec};
use crate::error::{Error, Result};

/// Ridge weight μ added to the averaged logistic loss. Keeps the minimiser
/// finite even when the sampled design is linearly separable.
pub const LOGREG_RIDGE: f64 = 1e-2;

const SOLVE_GRAD_TOL: f64 = 1e-10;
const SOLVE_MAX_ITERS: usize = 5_000_000;

#[derive(Clone, Debug)]
pub(crate) struct Logistic {
    /// Row-major `samples × dim` design; the last column is the bias.
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    ridge: f64,
    minimizer: Vec<f64>,
    inf: f64,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    pub(crate) fn samples(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    fn margin(&self, i: usize, x: &[f64]) -> f64 {
        self.labels[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let m = self.samples();
        let loss: f64 = (0..m).map(|i| log1p_exp(-self.margin(i, x))).sum::<f64>() / m as f64;
        loss + 0.5 * self.ridge * x.iter().map(|v| v * v).sum::<f64>()
    }

    pub(crate) fn inf_value(&self) -> f64 {
        self.inf
    }

    pub(crate) fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    /// ∇ of the i-th summand (loss_i + ridge) at x.
    pub(crate) fn sample_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let coeff = -self.labels[i] * sigmoid(-self.margin(i, x));
        for ((o, a), xv) in out.iter_mut().zip(self.row(i)).zip(x) {
            *o = coeff * a + self.ridge * xv;
        }
    }

    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.samples();
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..m {
            let coeff = -self.labels[i] * sigmoid(-self.margin(i, x));
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += coeff * a;
            }
        }
        for (o, xv) in out.iter_mut().zip(x) {
            *o = *o / m as f64 + self.ridge * xv;
        }
    }

    /// λ_max(XᵀX)/(4m) + μ.
    fn smoothness(&self) -> f64 {
        let m = self.samples();
        let x = DMatrix::from_row_slice(m, self.dim, &self.features);
        let gram = x.transpose() * &x;
        let lambda_max = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        lambda_max / (4.0 * m as f64) + self.ridge
    }

    /// sup_x E‖∇f_ξ(x) − ∇f(x)‖². Each per-sample loss gradient is c_i·a_i
    /// with |c_i| < 1, so the pairwise form of the variance gives
    /// (1/2m²)·Σ_{i≠k} (‖a_i‖ + ‖a_k‖)².
    fn variance_bound(&self) -> f64 {
        let m = self.samples();
        let norms: Vec<f64> = (0..m)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mut acc = 0.0;
        for i in 0..m {
            for k in 0..m {
                if i != k {
                    acc += (norms[i] + norms[k]).powi(2);
                }
            }
        }
        acc / (2.0 * (m * m) as f64)
    }

    /// Full-gradient descent with step 1/L until ‖∇f‖ ≤ 1e-10.
    fn solve(&mut self, l: f64) -> Result<()> {
        let mut x = vec![0.0; self.dim];
        let mut g = vec![0.0; self.dim];
        for _ in 0..SOLVE_MAX_ITERS {
            self.gradient_into(&x, &mut g);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= SOLVE_GRAD_TOL {
                self.inf = self.value(&x);
                self.minimizer = x;
                return Ok(());
            }
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= gi / l;
            }
        }
        Err(Error::invalid(
            "logreg",
            "reference solve did not reach the gradient tolerance",
        ))
    }
}

/// Builds a logistic-regression problem from an explicit design.
///
/// `features` rows must all have the same length (a bias column is not added
/// here); `labels` must be ±1. The start point is the origin.
pub fn make_logreg_from_data(features: &[Vec<f64>], labels: &[f64], n: usize) -> Result<ProblemSpec> {
    make_logreg(features, labels, n, None)
}

fn make_logreg(
    features: &[Vec<f64>],
    labels: &[f64],
    n: usize,
    config: Option<ProblemConfig>,
) -> Result<ProblemSpec> {
    if features.is_empty() {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("labels", "one label per sample required"));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("features", "rows must share a positive length"));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::invalid("labels", "labels must be ±1"));
    }
    let mut model = Logistic {
        features: features.iter().flatten().copied().collect(),
        labels: labels.to_vec(),
        dim,
        ridge: LOGREG_RIDGE,
        minimizer: Vec::new(),
        inf: 0.0,
    };
    let l = model.smoothness();
    model.solve(l)?;
    let sigma2 = model.variance_bound();
    let config = config.unwrap_or_else(|| ProblemConfig::LogregData {
        features: features.to_vec(),
        labels: labels.to_vec(),
        n,
    });
    ProblemSpec::assemble(
        config,
        Objective::Logistic(model),
        l,
        sigma2,
        vec![0.0; dim],
        n,
        false,
    )
}

/// Seeded synthetic logistic regression with `dimension − 1` standard normal
/// features plus a bias column. Labels follow a logistic model around a
/// seeded ground-truth weight vector.
pub fn make_synthetic_logreg(dimension: usize, samples: usize, n: usize, seed: u64) -> Result<ProblemSpec> {
    if samples < 1 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    if dimension < 1 {
        return Err(Error::invalid("dimension", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..dimension).map(|_| rng.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut row: Vec<f64> = (0..dimension - 1).map(|_| rng.sample(StandardNormal)).collect();
        row.push(1.0);
        let score: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let u: f64 = rng.random();
        labels.push(if u < sigmoid(score) { 1.0 } else { -1.0 });
        features.push(row);
    }
    make_logreg(
        &features,
        &labels,
        n,
        Some(ProblemConfig::LogregSynth {
            dimension,
            samples,
            n,
            seed,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::sample_gradient;

    #[test]
    fn identical_labels_push_bias_against_label_mean() {
        let features = vec![vec![0.3, 1.0], vec![-1.2, 1.0], vec![0.7, 1.0]];
        for y in [1.0, -1.0] {
            let spec = make_logreg_from_data(&features, &[y; 3], 1).unwrap();
            let g = spec.exact_gradient(&[0.0, 0.0]);
            assert!(g[1] * y < 0.0, "bias gradient {} vs label {y}", g[1]);
        }
    }

    #[test]
    fn single_sample_is_deterministic() {
        let spec = make_synthetic_logreg(3, 1, 2, 11).unwrap();
        assert_eq!(spec.noise_sigma2, 0.0);
        let src = spec.noise_source(4);
        let x = [0.2, -0.1, 0.4];
        let exact = spec.exact_gradient(&x);
        for w in 0..2 {
            let mut c = src.cursor(w, 0);
            for _ in 0..5 {
                let g = sample_gradient(&spec, w, &x, &mut c).unwrap();
                for (a, b) in g.gradient.iter().zip(&exact) {
                    assert!((a - b).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn smoothness_matches_two_by_two_eigenvalue() {
        let spec = make_synthetic_logreg(2, 8, 1, 3).unwrap();
        let Objective::Logistic(model) = &spec.objective else {
            unreachable!()
        };
        // Gram matrix [[p, q], [q, r]]; λ_max = (p + r)/2 + √(((p − r)/2)² + q²).
        let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
        for i in 0..8 {
            let row = model.row(i);
            p += row[0] * row[0];
            q += row[0] * row[1];
            r += row[1] * row[1];
        }
        let lambda = 0.5 * (p + r) + (0.25 * (p - r) * (p - r) + q * q).sqrt();
        let expected = lambda / 32.0;
        let got = spec.smoothness_l - LOGREG_RIDGE;
        assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    }

    #[test]
    fn minimizer_is_stationary() {
        let spec = make_synthetic_logreg(4, 50, 2, 9).unwrap();
        let xs = spec.minimizer().unwrap();
        let g = spec.exact_gradient(&xs);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-10);
        let expected = spec.value(&spec.start_point) - spec.inf_value();
        assert!((spec.delta_gap - expected).abs() <= 1e-12 * expected);
        assert!(spec.delta_gap > 0.0);
    }

    #[test]
    fn rejects_empty_dataset() {
        assert!(make_synthetic_logreg(2, 0, 1, 0).is_err());
    }
}
