//! Objectives with known constants and their stochastic-gradient oracles.

mod logreg;
mod quadratic;
mod stream;
mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use logreg::{make_logreg_from_data, make_synthetic_logreg, LOGREG_RIDGE};
pub use quadratic::make_quadratic;
pub use stream::{NoiseSource, StreamCursor};
pub use toy::make_toy_adversarial;

pub(crate) use logreg::Logistic;
pub(crate) use quadratic::Quadratic;

/// An objective together with the constants the step-size rules consume.
///
/// Immutable after construction; runs share it by reference.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub smoothness_l: f64,
    /// σ²: bound on `E‖∇f(x;ξ) − ∇f(x)‖²`.
    pub noise_sigma2: f64,
    pub start_point: Vec<f64>,
    /// Δ = f(x⁰) − inf f.
    pub delta_gap: f64,
    /// B = ‖x⁰ − x*‖, present for convex problems.
    pub dist_b: Option<f64>,
    pub workers_n: usize,
    pub heterogeneous: bool,
    config: ProblemConfig,
    objective: Objective,
}

#[derive(Clone, Debug)]
pub(crate) enum Objective {
    Toy { sigma: f64 },
    Quadratic(Quadratic),
    Logistic(Logistic),
}

/// One stochastic gradient draw.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSample {
    pub gradient: Vec<f64>,
    /// Position of the draw in the worker's stream.
    pub noise_draw_id: u64,
}

/// JSON-facing problem description, keyed by the problem id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    ToyAdversarial {
        sigma: f64,
        x0: f64,
        n: usize,
    },
    Quadratic {
        dimension: usize,
        #[serde(rename = "L")]
        smoothness_l: f64,
        sigma2: f64,
        x0: Vec<f64>,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heterogeneous_shift: Option<Vec<f64>>,
    },
    LogregSynth {
        dimension: usize,
        samples: usize,
        n: usize,
        seed: u64,
    },
    /// Logistic regression over an explicit design (labels ±1).
    LogregData {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        n: usize,
    },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        match self {
            ProblemConfig::ToyAdversarial { sigma, x0, n } => make_toy_adversarial(*sigma, *x0, *n),
            ProblemConfig::Quadratic {
                dimension,
                smoothness_l,
                sigma2,
                x0,
                n,
                heterogeneous_shift,
            } => make_quadratic(
                *dimension,
                *smoothness_l,
                *sigma2,
                x0,
                *n,
                heterogeneous_shift.as_deref(),
            ),
            ProblemConfig::LogregSynth {
                dimension,
                samples,
                n,
                seed,
            } => make_synthetic_logreg(*dimension, *samples, *n, *seed),
            ProblemConfig::LogregData { features, labels, n } => {
                make_logreg_from_data(features, labels, *n)
            }
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ProblemConfig::ToyAdversarial { .. } => "toy_adversarial",
            ProblemConfig::Quadratic { .. } => "quadratic",
            ProblemConfig::LogregSynth { .. } => "logreg_synth",
            ProblemConfig::LogregData { .. } => "logreg_data",
        }
    }
}

impl ProblemSpec {
    pub(crate) fn assemble(
        config: ProblemConfig,
        objective: Objective,
        smoothness_l: f64,
        noise_sigma2: f64,
        start_point: Vec<f64>,
        workers_n: usize,
        heterogeneous: bool,
    ) -> Result<Self> {
        if !(smoothness_l > 0.0) || !smoothness_l.is_finite() {
            return Err(Error::invalid("L", format!("must be positive, got {smoothness_l}")));
        }
        if !(noise_sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2", format!("must be nonnegative, got {noise_sigma2}")));
        }
        if workers_n == 0 {
            return Err(Error::invalid("n", "need at least one worker"));
        }
        let mut spec = ProblemSpec {
            dimension: start_point.len(),
            smoothness_l,
            noise_sigma2,
            start_point,
            delta_gap: 0.0,
            dist_b: None,
            workers_n,
            heterogeneous,
            config,
            objective,
        };
        spec.delta_gap = spec.f_gap(&spec.start_point);
        spec.dist_b = spec
            .minimizer()
            .map(|xs| euclid_dist(&spec.start_point, &xs));
        Ok(spec)
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn id(&self) -> &'static str {
        self.config.id()
    }

    /// Whether the objective is convex (all built-ins are).
    pub fn is_convex(&self) -> bool {
        true
    }

    /// Global objective value f(x) (the average of the worker objectives).
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Toy { .. } => toy::value(x[0]),
            Objective::Quadratic(q) => q.value(x),
            Objective::Logistic(l) => l.value(x),
        }
    }

    /// inf f, known analytically (or by a cached high-precision solve).
    pub fn inf_value(&self) -> f64 {
        match &self.objective {
            Objective::Toy { .. } => 0.0,
            Objective::Quadratic(q) => q.inf_value(),
            Objective::Logistic(l) => l.inf_value(),
        }
    }

    /// f(x) − inf f, computed without cancellation where the form allows.
    pub fn f_gap(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Toy { .. } => toy::value(x[0]),
            Objective::Quadratic(q) => q.gap(x),
            Objective::Logistic(l) => l.value(x) - l.inf_value(),
        }
    }

    pub fn minimizer(&self) -> Option<Vec<f64>> {
        match &self.objective {
            Objective::Toy { .. } => Some(vec![0.0]),
            Objective::Quadratic(q) => Some(q.center().to_vec()),
            Objective::Logistic(l) => Some(l.minimizer().to_vec()),
        }
    }

    /// Exact gradient of the global objective.
    pub fn exact_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        match &self.objective {
            Objective::Toy { .. } => out[0] = toy::gradient(x[0]),
            Objective::Quadratic(q) => q.gradient_into(x, &mut out),
            Objective::Logistic(l) => l.gradient_into(x, &mut out),
        }
        out
    }

    /// Exact gradient of worker `worker`'s local objective f_i.
    pub fn worker_gradient(&self, worker: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_worker(worker)?;
        let mut out = vec![0.0; self.dimension];
        match &self.objective {
            Objective::Quadratic(q) => q.worker_gradient_into(worker, x, &mut out),
            _ => return Ok(self.exact_gradient(x)),
        }
        Ok(out)
    }

    pub fn noise_source(&self, seed: u64) -> NoiseSource {
        NoiseSource::new(seed)
    }

    fn check_worker(&self, worker: usize) -> Result<()> {
        if worker >= self.workers_n {
            return Err(Error::WorkerOutOfRange {
                worker,
                workers: self.workers_n,
            });
        }
        Ok(())
    }

    /// Draws one stochastic gradient of f_worker at `point` into `out`,
    /// returning the draw id and advancing `cursor`.
    pub fn sample_gradient_into(
        &self,
        worker: usize,
        point: &[f64],
        cursor: &mut StreamCursor,
        out: &mut [f64],
    ) -> Result<u64> {
        self.check_worker(worker)?;
        if cursor.worker() != worker {
            return Err(Error::ForeignCursor {
                worker,
                cursor_worker: cursor.worker(),
            });
        }
        match &self.objective {
            Objective::Toy { sigma } => {
                let xi = cursor.normal();
                out[0] = toy::gradient(point[0]) + sigma * xi;
            }
            Objective::Quadratic(q) => {
                q.worker_gradient_into(worker, point, out);
                if q.noise_scale > 0.0 {
                    for o in out.iter_mut() {
                        *o += q.noise_scale * cursor.normal();
                    }
                }
            }
            Objective::Logistic(l) => {
                let i = cursor.index_below(l.samples());
                l.sample_gradient_into(i, point, out);
            }
        }
        Ok(cursor.advance())
    }
}

/// Draws one stochastic gradient for `worker` at `point`.
///
/// Identical `(spec, worker, point, cursor)` inputs give identical outputs;
/// the cursor advances by exactly one draw.
pub fn sample_gradient(
    spec: &ProblemSpec,
    worker: usize,
    point: &[f64],
    cursor: &mut StreamCursor,
) -> Result<GradSample> {
    let mut gradient = vec![0.0; spec.dimension];
    let noise_draw_id = spec.sample_gradient_into(worker, point, cursor, &mut gradient)?;
    Ok(GradSample {
        gradient,
        noise_draw_id,
    })
}

pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_index_is_checked() {
        let spec = make_toy_adversarial(1.0, 0.5, 2).unwrap();
        let mut c = spec.noise_source(0).cursor(2, 0);
        let err = sample_gradient(&spec, 2, &[0.0], &mut c).unwrap_err();
        assert!(matches!(err, Error::WorkerOutOfRange { worker: 2, workers: 2 }));
    }

    #[test]
    fn cursor_must_belong_to_worker() {
        let spec = make_toy_adversarial(1.0, 0.5, 2).unwrap();
        let mut c = spec.noise_source(0).cursor(0, 0);
        assert!(matches!(
            sample_gradient(&spec, 1, &[0.0], &mut c),
            Err(Error::ForeignCursor { .. })
        ));
    }

    #[test]
    fn same_cursor_twice_is_identical() {
        let spec = make_toy_adversarial(10.0, -30.0, 4).unwrap();
        let c = spec.noise_source(99).cursor(3, 12);
        let a = sample_gradient(&spec, 3, &[1.5], &mut c.clone()).unwrap();
        let b = sample_gradient(&spec, 3, &[1.5], &mut c.clone()).unwrap();
        assert_eq!(a, b);
        let mut c2 = c.clone();
        sample_gradient(&spec, 3, &[1.5], &mut c2).unwrap();
        assert_eq!(c2.position(), 1);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ProblemConfig::Quadratic {
            dimension: 2,
            smoothness_l: 1.0,
            sigma2: 0.5,
            x0: vec![1.0, 2.0],
            n: 3,
            heterogeneous_shift: Some(vec![0.1, 0.0]),
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"id\":\"quadratic\""));
        let back: ProblemConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        let toy: ProblemConfig =
            serde_json::from_str(r#"{"id":"toy_adversarial","sigma":10,"x0":-30,"n":100}"#).unwrap();
        assert_eq!(toy.build().unwrap().start_point, vec![-30.0]);
    }
}
