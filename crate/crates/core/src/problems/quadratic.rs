//! f_i(x) = (L/2)‖x − c_i‖² with c = 0 and worker centres c_i = a_i·s whose
//! mean is zero, so the global objective is (L/2)‖x‖² + const.

use super::{Objective, ProblemConfig, ProblemSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct Quadratic {
    l: f64,
    center: Vec<f64>,
    /// Per-worker centre offsets; empty for the homogeneous variant.
    shifts: Vec<Vec<f64>>,
    inf: f64,
    /// Per-coordinate noise standard deviation, √(σ²/d).
    pub(crate) noise_scale: f64,
}

impl Quadratic {
    pub(crate) fn center(&self) -> &[f64] {
        &self.center
    }

    pub(crate) fn inf_value(&self) -> f64 {
        self.inf
    }

    pub(crate) fn gap(&self, x: &[f64]) -> f64 {
        0.5 * self.l * sq_dist(x, &self.center)
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.gap(x) + self.inf
    }

    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.center) {
            *o = self.l * (xi - ci);
        }
    }

    pub(crate) fn worker_gradient_into(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        match self.shifts.get(worker) {
            None => self.gradient_into(x, out),
            Some(shift) => {
                for (((o, xi), ci), si) in out.iter_mut().zip(x).zip(&self.center).zip(shift) {
                    *o = self.l * (xi - (ci + si));
                }
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weight of the shared shift vector for worker `i` of `n`: evenly spaced in
/// [−1, 1], starting at +1, summing to zero.
fn shift_weight(i: usize, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    ((n - 1) as f64 - 2.0 * i as f64) / (n - 1) as f64
}

/// Builds the isotropic quadratic centred at the origin.
///
/// Noise is Gaussian with total variance `sigma2` per draw (σ²/d per
/// coordinate). With `heterogeneous_shift = Some(s)` worker `i` minimises
/// (L/2)‖x − a_i s‖² where the weights a_i run from +1 down to −1 and average
/// to zero, leaving the global minimiser at the origin.
pub fn make_quadratic(
    dimension: usize,
    l: f64,
    sigma2: f64,
    x0: &[f64],
    n: usize,
    heterogeneous_shift: Option<&[f64]>,
) -> Result<ProblemSpec> {
    if !(l > 0.0) {
        return Err(Error::invalid("L", format!("must be positive, got {l}")));
    }
    if dimension == 0 {
        return Err(Error::invalid("dimension", "must be positive"));
    }
    if x0.len() != dimension {
        return Err(Error::invalid(
            "x0",
            format!("expected {dimension} coordinates, got {}", x0.len()),
        ));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid("sigma2", format!("must be finite and nonnegative, got {sigma2}")));
    }
    let center = vec![0.0; dimension];
    let shifts: Vec<Vec<f64>> = match heterogeneous_shift {
        None => Vec::new(),
        Some(s) => {
            if s.len() != dimension {
                return Err(Error::invalid(
                    "heterogeneous_shift",
                    format!("expected {dimension} coordinates, got {}", s.len()),
                ));
            }
            (0..n)
                .map(|i| {
                    let a = shift_weight(i, n);
                    s.iter().map(|v| a * v).collect()
                })
                .collect()
        }
    };
    let inf = if shifts.is_empty() {
        0.0
    } else {
        shifts
            .iter()
            .map(|c| 0.5 * l * sq_dist(c, &center))
            .sum::<f64>()
            / n as f64
    };
    let quad = Quadratic {
        l,
        center,
        inf,
        noise_scale: (sigma2 / dimension as f64).sqrt(),
        shifts,
    };
    let heterogeneous = heterogeneous_shift.is_some();
    ProblemSpec::assemble(
        ProblemConfig::Quadratic {
            dimension,
            smoothness_l: l,
            sigma2,
            x0: x0.to_vec(),
            n,
            heterogeneous_shift: heterogeneous_shift.map(<[f64]>::to_vec),
        },
        Objective::Quadratic(quad),
        l,
        sigma2,
        x0.to_vec(),
        n,
        heterogeneous,
    )
}
