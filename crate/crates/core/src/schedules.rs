//! Step-size rules and the parameter prescriptions (η_g, η_ℓ or b, K, R)
//! that guarantee ε-stationarity (nonconvex) or ε-optimality (convex).
//!
//! All logarithms are natural. Terms of a `min` whose denominator vanishes
//! (σ² = 0, R = 0) are dropped rather than evaluated as infinities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size parameters carried by a method configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub eta_g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "K")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_bound: Option<u64>,
}

/// Which rule a [`ScheduleParams`] is meant to drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleRule {
    /// A single step size η_g (Minibatch, Hero).
    Global,
    /// Global η_g plus constant local η_ℓ.
    Dual,
    /// Global η_g plus η_j = √(b/((j+1)(ln K+1)))·η_g.
    Decaying,
    /// Global γ_g plus the tree-distance bound with budget R.
    Birch,
}

impl ScheduleParams {
    pub fn global(eta_g: f64) -> Self {
        Self {
            eta_g,
            ..Self::default()
        }
    }

    pub fn dual(eta_g: f64, eta_l: f64) -> Self {
        Self {
            eta_g,
            eta_l: Some(eta_l),
            ..Self::default()
        }
    }

    pub fn decaying(eta_g: f64, b: f64, k: u64) -> Self {
        Self {
            eta_g,
            b: Some(b),
            k: Some(k),
            ..Self::default()
        }
    }

    pub fn birch(gamma_g: f64, r_bound: u64) -> Self {
        Self {
            eta_g: gamma_g,
            r_bound: Some(r_bound),
            ..Self::default()
        }
    }

    /// Checks that exactly the fields `rule` needs are present and in range.
    pub fn validate_for(&self, rule: ScheduleRule) -> Result<()> {
        if !(self.eta_g > 0.0) || !self.eta_g.is_finite() {
            return Err(Error::invalid("eta_g", format!("must be positive, got {}", self.eta_g)));
        }
        let want = match rule {
            ScheduleRule::Global => [false, false, false, false],
            ScheduleRule::Dual => [true, false, false, false],
            ScheduleRule::Decaying => [false, true, true, false],
            ScheduleRule::Birch => [false, false, false, true],
        };
        let have = [
            self.eta_l.is_some(),
            self.b.is_some(),
            self.k.is_some(),
            self.r_bound.is_some(),
        ];
        const NAMES: [&str; 4] = ["eta_l", "b", "K", "r_bound"];
        for ((w, h), name) in want.iter().zip(have).zip(NAMES) {
            if *w && !h {
                return Err(Error::invalid("schedule", format!("rule {rule:?} requires `{name}`")));
            }
            if !*w && h {
                return Err(Error::invalid("schedule", format!("rule {rule:?} does not take `{name}`")));
            }
        }
        if let Some(eta_l) = self.eta_l {
            if !(eta_l >= 0.0) || !eta_l.is_finite() {
                return Err(Error::invalid("eta_l", format!("must be nonnegative, got {eta_l}")));
            }
        }
        if let Some(b) = self.b {
            if !(b >= 1.0) || !b.is_finite() {
                return Err(Error::invalid("b", format!("must be at least 1, got {b}")));
            }
        }
        if self.k == Some(0) {
            return Err(Error::invalid("K", "must be positive"));
        }
        Ok(())
    }
}

/// Parameters of Dual Local SGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualParams {
    pub eta_g: f64,
    pub eta_l: f64,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "R")]
    pub r: u64,
}

/// Parameters of Decaying Local SGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayingParams {
    pub eta_g: f64,
    pub b: f64,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "R")]
    pub r: u64,
}

impl DualParams {
    pub fn schedule(&self) -> ScheduleParams {
        ScheduleParams::dual(self.eta_g, self.eta_l)
    }
}

impl DecayingParams {
    pub fn schedule(&self) -> ScheduleParams {
        ScheduleParams::decaying(self.eta_g, self.b, self.k)
    }
}

/// Ceiling that snaps values within 1e-12 relative of an integer onto it,
/// so that e.g. 64/0.1 lands on 640 rather than 641.
pub fn guarded_ceil(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-12 * nearest.abs().max(1.0) {
        nearest.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

fn min_nonzero(terms: &[(f64, f64)]) -> f64 {
    // (numerator, denominator) pairs; terms with a zero denominator drop out.
    terms
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .map(|(n, d)| n / d)
        .fold(f64::INFINITY, f64::min)
}

fn check_common(l: f64, sigma2: f64, n: usize, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    if !(l > 0.0) {
        return Err(Error::invalid("L", format!("must be positive, got {l}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("sigma2", format!("must be nonnegative, got {sigma2}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "need at least one worker"));
    }
    Ok(())
}

fn local_steps(ratio: f64) -> u64 {
    guarded_ceil(ratio).max(1)
}

/// Nonconvex Dual Local SGD: η_g = min{ε/(8Lσ²), 1/(4nL)}, η_ℓ = √n·η_g,
/// K = max{⌈σ²/(εn)⌉, 1}, R = ⌈32LΔ/ε⌉.
pub fn dual_params_nonconvex(l: f64, sigma2: f64, n: usize, epsilon: f64, delta: f64) -> Result<DualParams> {
    check_common(l, sigma2, n, epsilon)?;
    let nf = n as f64;
    let eta_g = min_nonzero(&[(epsilon, 8.0 * l * sigma2), (1.0, 4.0 * nf * l)]);
    Ok(DualParams {
        eta_g,
        eta_l: nf.sqrt() * eta_g,
        k: local_steps(sigma2 / (epsilon * nf)),
        r: guarded_ceil(32.0 * l * delta / epsilon),
    })
}

/// Nonconvex Decaying Local SGD: as [`dual_params_nonconvex`] with
/// b = max{σ²/ε, n}.
pub fn decaying_params_nonconvex(
    l: f64,
    sigma2: f64,
    n: usize,
    epsilon: f64,
    delta: f64,
) -> Result<DecayingParams> {
    let dual = dual_params_nonconvex(l, sigma2, n, epsilon, delta)?;
    Ok(DecayingParams {
        eta_g: dual.eta_g,
        b: (sigma2 / epsilon).max(n as f64),
        k: dual.k,
        r: dual.r,
    })
}

/// Convex Dual Local SGD: η_g = min{ε/(20σ²), 1/(10nL)}, η_ℓ = √n·η_g,
/// K = max{⌈σ²/(εnL)⌉, 1}, R = ⌈160LB²/ε⌉.
pub fn dual_params_convex(l: f64, sigma2: f64, n: usize, epsilon: f64, dist_b: f64) -> Result<DualParams> {
    check_common(l, sigma2, n, epsilon)?;
    let nf = n as f64;
    let eta_g = min_nonzero(&[(epsilon, 20.0 * sigma2), (1.0, 10.0 * nf * l)]);
    Ok(DualParams {
        eta_g,
        eta_l: nf.sqrt() * eta_g,
        k: local_steps(sigma2 / (epsilon * nf * l)),
        r: guarded_ceil(160.0 * l * dist_b * dist_b / epsilon),
    })
}

/// Convex Decaying Local SGD: as [`dual_params_convex`] with
/// b = max{σ²/(εL), n}.
pub fn decaying_params_convex(
    l: f64,
    sigma2: f64,
    n: usize,
    epsilon: f64,
    dist_b: f64,
) -> Result<DecayingParams> {
    let dual = dual_params_convex(l, sigma2, n, epsilon, dist_b)?;
    Ok(DecayingParams {
        eta_g: dual.eta_g,
        b: (sigma2 / (epsilon * l)).max(n as f64),
        k: dual.k,
        r: dual.r,
    })
}

/// Minibatch SGD batch size per worker: K = max{⌈σ²/(εn)⌉, 1} in the
/// nonconvex case and max{⌈σ²/(Lεn)⌉, 1} in the convex case.
pub fn minibatch_k(l: f64, sigma2: f64, n: usize, epsilon: f64, convex: bool) -> Result<u64> {
    check_common(l, sigma2, n, epsilon)?;
    let scale = if convex { l } else { 1.0 };
    Ok(local_steps(sigma2 / (scale * epsilon * n as f64)))
}

/// Hero SGD step η = min{1/L, εn/(Lσ²)}.
pub fn hero_step(l: f64, sigma2: f64, n: usize, epsilon: f64) -> Result<f64> {
    check_common(l, sigma2, n, epsilon)?;
    Ok(min_nonzero(&[(1.0, l), (epsilon * n as f64, l * sigma2)]))
}

/// η_j = √(b/((j+1)(ln K + 1)))·η_g for local step j < K.
pub fn decaying_step_raw(j: u64, b: f64, k: u64, eta_g: f64) -> Result<f64> {
    if j >= k {
        return Err(Error::StepIndexOutOfRange { index: j, limit: k });
    }
    Ok((b / ((j + 1) as f64 * ((k as f64).ln() + 1.0))).sqrt() * eta_g)
}

/// Decaying local step for index `j`; `params` must carry `b` and `K`.
pub fn decaying_step(j: u64, params: &ScheduleParams) -> Result<f64> {
    let b = params.b.ok_or(Error::MissingParameter("b"))?;
    let k = params.k.ok_or(Error::MissingParameter("K"))?;
    decaying_step_raw(j, b, k, params.eta_g)
}

/// Largest admissible off-main-branch step at tree distance `j`:
/// √(R/((j+1)(ln R + 1)))·γ_g, and 0 when R = 0.
pub fn birch_step_bound(j: u64, r_bound: u64, gamma_g: f64) -> Result<f64> {
    if r_bound == 0 {
        return Ok(0.0);
    }
    if j > r_bound {
        return Err(Error::StepIndexOutOfRange {
            index: j,
            limit: r_bound,
        });
    }
    let r = r_bound as f64;
    Ok((r / ((j + 1) as f64 * (r.ln() + 1.0))).sqrt() * gamma_g)
}

/// γ_g = min{1/(2L), 1/(4RL), ε/(8σ²L)}.
pub fn birch_gamma_g(l: f64, r_bound: u64, sigma2: f64, epsilon: f64) -> Result<f64> {
    check_common(l, sigma2, 1, epsilon)?;
    Ok(min_nonzero(&[
        (1.0, 2.0 * l),
        (1.0, 4.0 * r_bound as f64 * l),
        (epsilon, 8.0 * sigma2 * l),
    ]))
}

/// Step size of asynchronous worker step `m` with budget `b`: the tree
/// distance rule with R = b − 1.
pub fn async_worker_step(m: u64, b: u64, eta_g: f64) -> Result<f64> {
    if b == 0 {
        return Err(Error::invalid("b", "budget must be at least 1"));
    }
    birch_step_bound(m, b - 1, eta_g)
}

/// η_g = min{1/(4bL), ε/(8σ²L)} for the asynchronous variant, with
/// b = max{⌈σ²/ε⌉, 1}.
pub fn async_params(l: f64, sigma2: f64, epsilon: f64) -> Result<(f64, u64)> {
    check_common(l, sigma2, 1, epsilon)?;
    let b = local_steps(sigma2 / epsilon);
    let eta_g = min_nonzero(&[(1.0, 4.0 * b as f64 * l), (epsilon, 8.0 * sigma2 * l)]);
    Ok((eta_g, b))
}
