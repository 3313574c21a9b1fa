//! The six distributed SGD variants, executed round by round in a single
//! deterministic virtual-time simulation.
//!
//! All synchronous variants and the asynchronous one share one aggregation
//! path, `x ← x − η_g·Σ g`, with the gradients summed pairwise in a fixed
//! order (worker-major, step-minor; virtual-time order for the asynchronous
//! variant). Canonical Local SGD is this update with η_g = η_ℓ/n.

mod engine;
mod output;
mod sum;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ctree::ComputationTree;
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::schedules::{ScheduleParams, ScheduleRule};
use crate::timemodel::{charge, TimeModel};

pub use output::{format_float, traces_to_csv, traces_to_json};
pub use sum::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LocalSgd,
    MinibatchSgd,
    HeroSgd,
    DualLocalSgd,
    DecayingLocalSgd,
    DecayingAsync,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::LocalSgd,
        Variant::MinibatchSgd,
        Variant::HeroSgd,
        Variant::DualLocalSgd,
        Variant::DecayingLocalSgd,
        Variant::DecayingAsync,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Variant::LocalSgd => "local_sgd",
            Variant::MinibatchSgd => "minibatch_sgd",
            Variant::HeroSgd => "hero_sgd",
            Variant::DualLocalSgd => "dual_local_sgd",
            Variant::DecayingLocalSgd => "decaying_local_sgd",
            Variant::DecayingAsync => "decaying_async",
        }
    }

    /// Rule the schedule parameters must follow for this variant.
    pub fn schedule_rule(self) -> ScheduleRule {
        match self {
            Variant::LocalSgd | Variant::DualLocalSgd => ScheduleRule::Dual,
            Variant::DecayingLocalSgd => ScheduleRule::Decaying,
            Variant::MinibatchSgd | Variant::HeroSgd | Variant::DecayingAsync => ScheduleRule::Global,
        }
    }

    pub fn is_synchronous(self) -> bool {
        !matches!(self, Variant::HeroSgd | Variant::DecayingAsync)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "variant",
                value: s.to_string(),
            })
    }
}

fn default_k() -> u64 {
    1
}

/// Which algorithm to run and with what parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub variant: Variant,
    pub n: usize,
    #[serde(rename = "K", default = "default_k")]
    pub k: u64,
    #[serde(rename = "R")]
    pub r: u64,
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_tree: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub async_budget_b: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub async_worker_speeds: Option<Vec<f64>>,
    #[serde(default)]
    pub time_model: TimeModel,
}

impl MethodConfig {
    pub fn new(variant: Variant, n: usize, k: u64, r: u64, schedule: ScheduleParams) -> Self {
        Self {
            variant,
            n,
            k,
            r,
            schedule,
            seed: 0,
            record_tree: false,
            async_budget_b: None,
            async_worker_speeds: None,
            time_model: TimeModel::default(),
        }
    }

    /// Canonical Local SGD with local step η_ℓ (global coefficient η_ℓ/n).
    pub fn local_sgd(n: usize, k: u64, r: u64, eta_l: f64) -> Self {
        Self::new(Variant::LocalSgd, n, k, r, ScheduleParams::dual(eta_l / n as f64, eta_l))
    }

    pub fn minibatch_sgd(n: usize, k: u64, r: u64, eta_g: f64) -> Self {
        Self::new(Variant::MinibatchSgd, n, k, r, ScheduleParams::global(eta_g))
    }

    pub fn hero_sgd(r: u64, eta: f64) -> Self {
        Self::new(Variant::HeroSgd, 1, 1, r, ScheduleParams::global(eta))
    }

    pub fn dual_local_sgd(n: usize, k: u64, r: u64, eta_g: f64, eta_l: f64) -> Self {
        Self::new(Variant::DualLocalSgd, n, k, r, ScheduleParams::dual(eta_g, eta_l))
    }

    pub fn decaying_local_sgd(n: usize, k: u64, r: u64, eta_g: f64, b: f64) -> Self {
        Self::new(Variant::DecayingLocalSgd, n, k, r, ScheduleParams::decaying(eta_g, b, k))
    }

    /// Asynchronous Decaying Local SGD with equal worker speeds.
    pub fn decaying_async(n: usize, r: u64, eta_g: f64, b: u64) -> Self {
        let mut c = Self::new(Variant::DecayingAsync, n, 1, r, ScheduleParams::global(eta_g));
        c.async_budget_b = Some(b);
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tree(mut self) -> Self {
        self.record_tree = true;
        self
    }

    pub fn with_time_model(mut self, tm: TimeModel) -> Self {
        self.time_model = tm;
        self
    }

    pub fn with_speeds(mut self, speeds: Vec<f64>) -> Self {
        self.async_worker_speeds = Some(speeds);
        self
    }

    /// Worker speeds of the asynchronous variant (all 1 unless configured).
    pub fn speeds(&self) -> Vec<f64> {
        self.async_worker_speeds.clone().unwrap_or_else(|| vec![1.0; self.n])
    }

    /// Workers that actually run: 1 for Hero SGD, n otherwise.
    pub fn active_workers(&self) -> usize {
        if self.variant == Variant::HeroSgd {
            1
        } else {
            self.n
        }
    }

    /// Checks field presence and ranges for the chosen variant against `spec`.
    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one worker"));
        }
        if self.k == 0 {
            return Err(Error::invalid("K", "must be positive"));
        }
        self.time_model.validate()?;
        self.schedule.validate_for(self.variant.schedule_rule())?;
        if self.variant != Variant::HeroSgd && self.n != spec.workers_n {
            return Err(Error::invalid(
                "n",
                format!("config has {} workers but the problem has {}", self.n, spec.workers_n),
            ));
        }
        let is_async = self.variant == Variant::DecayingAsync;
        if !is_async && (self.async_budget_b.is_some() || self.async_worker_speeds.is_some()) {
            return Err(Error::invalid("async_budget_b", "only decaying_async takes async fields"));
        }
        match self.variant {
            Variant::LocalSgd => {
                let eta_l = self.schedule.eta_l.unwrap_or_default();
                let expected = eta_l / self.n as f64;
                if (self.schedule.eta_g - expected).abs() > 1e-12 * expected.abs() {
                    return Err(Error::invalid(
                        "eta_g",
                        format!("local_sgd needs eta_g = eta_l/n = {expected}, got {}", self.schedule.eta_g),
                    ));
                }
            }
            Variant::DecayingLocalSgd => {
                if self.schedule.k != Some(self.k) {
                    return Err(Error::invalid("K", "schedule K must equal the method's K"));
                }
            }
            Variant::DecayingAsync => {
                let b = self.async_budget_b.ok_or(Error::MissingParameter("async_budget_b"))?;
                if b < 1 {
                    return Err(Error::invalid("async_budget_b", "must be at least 1"));
                }
                if let Some(s) = &self.async_worker_speeds {
                    if s.len() != self.n {
                        return Err(Error::invalid(
                            "async_worker_speeds",
                            format!("expected {} speeds, got {}", self.n, s.len()),
                        ));
                    }
                    if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                        return Err(Error::invalid("async_worker_speeds", "speeds must be positive"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Metrics of one round, measured at the round's starting iterate x^t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: u64,
    /// ‖∇f(x^t)‖² of the global objective.
    pub grad_norm_sq_at_xt: f64,
    /// f(x^t) − inf f.
    pub f_gap: f64,
    /// Simulated seconds elapsed at the end of the round.
    pub sim_time_s: f64,
    /// Local steps (gradients) each worker contributed this round.
    pub local_steps_executed: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// One row per executed round t = 0..R−1.
    pub traces: Vec<RoundTrace>,
    /// x^R.
    pub final_point: Vec<f64>,
    pub tree: Option<ComputationTree>,
    /// First round whose iterate was non-finite; later rows report ∞.
    pub diverged_at: Option<u64>,
}

/// Runs `config` on `spec` and charges simulated time.
pub fn run(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    let streams: Vec<usize> = (0..config.active_workers()).collect();
    execute(spec, config, &streams)
}

/// As [`run`], but worker i draws its noise from worker `perm[i]`'s stream.
pub fn run_permuted(spec: &ProblemSpec, config: &MethodConfig, perm: &[usize]) -> Result<RunOutput> {
    let n = config.active_workers();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::invalid("perm", format!("not a permutation of 0..{n}")));
    }
    execute(spec, config, perm)
}

fn execute(spec: &ProblemSpec, config: &MethodConfig, streams: &[usize]) -> Result<RunOutput> {
    config.validate(spec)?;
    let mut out = match config.variant {
        Variant::HeroSgd => engine::run_hero(spec, config)?,
        Variant::DecayingAsync => engine::run_async(spec, config, streams)?,
        _ => engine::run_sync(spec, config, streams)?,
    };
    charge(&mut out.traces, &config.time_model, config)?;
    Ok(out)
}

fn run_as(spec: &ProblemSpec, config: &MethodConfig, variant: Variant) -> Result<RunOutput> {
    if config.variant != variant {
        return Err(Error::invalid(
            "variant",
            format!("expected {variant}, got {}", config.variant),
        ));
    }
    run(spec, config)
}

/// Local SGD: K local steps of size η_ℓ, then averaging.
pub fn run_local_sgd(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    run_as(spec, config, Variant::LocalSgd)
}

/// Minibatch SGD: nK gradients at x^t, one global step η_g.
pub fn run_minibatch_sgd(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    run_as(spec, config, Variant::MinibatchSgd)
}

/// Hero SGD: plain SGD on one worker.
pub fn run_hero_sgd(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    run_as(spec, config, Variant::HeroSgd)
}

/// Dual Local SGD: local step η_ℓ, global step η_g.
pub fn run_dual_local_sgd(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    run_as(spec, config, Variant::DualLocalSgd)
}

/// Decaying Local SGD: local step η_j = √(b/((j+1)(ln K+1)))·η_g.
pub fn run_decaying_local_sgd(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    run_as(spec, config, Variant::DecayingLocalSgd)
}

/// Asynchronous Decaying Local SGD: workers step asynchronously until b gradients exist.
pub fn run_decaying_async(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    run_as(spec, config, Variant::DecayingAsync)
}
