//! Experiment orchestration: η_g grid tuning with multi-seed percentile
//! bands, theory-versus-simulation comparison, and CSV emission.
//!
//! Cells are evaluated in (method, η_g, seed) order on the calling thread,
//! so the emitted tables depend only on the plan.

mod stats;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complexity::{self, ComplexityQuery};
use crate::error::{Error, Result};
use crate::methods::{format_float, run, MethodConfig, RoundTrace, Variant};
use crate::problems::{ProblemConfig, ProblemSpec};
use crate::schedules::ScheduleParams;
use crate::timemodel::TimeModel;

pub use stats::{band, bands, first_running_mean_hit, mean_curve, percentile};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LSGD_OUT_DIR";

/// Output directory used when neither `--out` nor [`OUT_DIR_ENV`] is given.
pub const DEFAULT_OUT_DIR: &str = "lsgd-out";

/// Per-round quantity the harness aggregates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    FGap,
    GradNormSq,
}

impl Metric {
    pub fn of(self, row: &RoundTrace) -> f64 {
        match self {
            Metric::FGap => row.f_gap,
            Metric::GradNormSq => row.grad_norm_sq_at_xt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub problem: ProblemConfig,
    /// Method templates. `tune` overwrites their step sizes from the grid;
    /// `compare_theory` runs them as given.
    pub methods: Vec<MethodConfig>,
    pub eta_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub epsilon_target: f64,
    #[serde(default)]
    pub time_model: TimeModel,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "plan has no methods"));
        }
        if self.eta_grid.is_empty() {
            return Err(Error::invalid("eta_grid", "grid is empty"));
        }
        if let Some(bad) = self.eta_grid.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("eta_grid", format!("grid values must be positive, got {bad}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "no seeds"));
        }
        if !(self.epsilon_target > 0.0) {
            return Err(Error::invalid("epsilon_target", "must be positive"));
        }
        self.time_model.validate()
    }
}

/// {2⁻¹, …, 2⁻ᵐ}.
pub fn power_of_two_grid(m: u32) -> Vec<f64> {
    (1..=m as i32).map(|i| 2f64.powi(-i)).collect()
}

/// Method template with global step η_g: canonical Local SGD gets
/// η_ℓ = n·η_g, Dual Local SGD η_ℓ = √n·η_g, Decaying keeps its b and K.
pub fn instantiate(template: &MethodConfig, eta_g: f64) -> Result<MethodConfig> {
    let n = template.n as f64;
    let schedule = match template.variant {
        Variant::LocalSgd => ScheduleParams::dual(eta_g, n * eta_g),
        Variant::DualLocalSgd => ScheduleParams::dual(eta_g, n.sqrt() * eta_g),
        Variant::DecayingLocalSgd => {
            let b = template.schedule.b.ok_or(Error::MissingParameter("b"))?;
            ScheduleParams::decaying(eta_g, b, template.k)
        }
        Variant::MinibatchSgd | Variant::HeroSgd | Variant::DecayingAsync => ScheduleParams::global(eta_g),
    };
    Ok(MethodConfig {
        schedule,
        ..template.clone()
    })
}

/// Per-seed metric curves of one (method, η_g) cell.
#[derive(Clone, Debug)]
pub struct Cell {
    pub method: String,
    pub eta_g: f64,
    pub curves: Vec<Vec<f64>>,
    /// End-of-round simulated seconds (identical across seeds).
    pub sim_time: Vec<f64>,
}

impl Cell {
    fn evaluate(spec: &ProblemSpec, config: &MethodConfig, plan: &ExperimentPlan) -> Result<Self> {
        let mut curves = Vec::with_capacity(plan.seeds.len());
        let mut sim_time = Vec::new();
        for &seed in &plan.seeds {
            let c = MethodConfig {
                seed,
                time_model: plan.time_model,
                record_tree: false,
                ..config.clone()
            };
            let out = run(spec, &c)?;
            if sim_time.is_empty() {
                sim_time = out.traces.iter().map(|t| t.sim_time_s).collect();
            }
            curves.push(out.traces.iter().map(|t| plan.metric.of(t)).collect());
        }
        Ok(Self {
            method: config.variant.id().to_string(),
            eta_g: config.schedule.eta_g,
            curves,
            sim_time,
        })
    }

    /// First round count after which the running mean of the seed-averaged
    /// metric is at most `eps`, with the simulated seconds it took.
    pub fn eps_hit(&self, eps: f64) -> (Option<u64>, Option<f64>) {
        match first_running_mean_hit(&mean_curve(&self.curves), eps) {
            None => (None, None),
            Some(t) => {
                let secs = if t == 0 { 0.0 } else { self.sim_time[t - 1] };
                (Some(t as u64), Some(secs))
            }
        }
    }

    pub fn summary(&self, eps: f64) -> SummaryRow {
        let finals: Vec<f64> = self.curves.iter().map(|c| c.last().copied().unwrap_or(f64::NAN)).collect();
        let (metric_p5, metric_median, metric_p95) = band(&finals);
        let (rounds_to_eps, sim_time_to_eps) = self.eps_hit(eps);
        SummaryRow {
            method: self.method.clone(),
            eta_g: self.eta_g,
            metric_median,
            metric_p5,
            metric_p95,
            rounds_to_eps,
            sim_time_to_eps,
        }
    }
}

/// Final-round percentiles across seeds for one (method, η_g).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub eta_g: f64,
    pub metric_median: f64,
    pub metric_p5: f64,
    pub metric_p95: f64,
    pub rounds_to_eps: Option<u64>,
    pub sim_time_to_eps: Option<f64>,
}

/// Output of [`tune`]: summary rows plus the per-cell curves behind them.
#[derive(Clone, Debug)]
pub struct TuneResult {
    pub rows: Vec<SummaryRow>,
    pub cells: Vec<Cell>,
}

pub fn tune(plan: &ExperimentPlan) -> Result<TuneResult> {
    plan.validate()?;
    let spec = plan.problem.build()?;
    let mut cells = Vec::with_capacity(plan.methods.len() * plan.eta_grid.len());
    for template in &plan.methods {
        for &eta in &plan.eta_grid {
            cells.push(Cell::evaluate(&spec, &instantiate(template, eta)?, plan)?);
        }
    }
    let rows = cells.iter().map(|c| c.summary(plan.epsilon_target)).collect();
    Ok(TuneResult { rows, cells })
}

/// Best η_g per method: smallest final median, ties toward smaller η_g.
/// NaN medians never win. Methods keep their first-appearance order.
pub fn select_best(rows: &[SummaryRow]) -> Vec<(String, f64)> {
    let mut best: Vec<(String, f64, f64)> = Vec::new();
    for r in rows {
        let m = if r.metric_median.is_nan() { f64::INFINITY } else { r.metric_median };
        match best.iter_mut().find(|(name, _, _)| *name == r.method) {
            None => best.push((r.method.clone(), r.eta_g, m)),
            Some(entry) => {
                if m < entry.2 || (m == entry.2 && r.eta_g < entry.1) {
                    entry.1 = r.eta_g;
                    entry.2 = m;
                }
            }
        }
    }
    best.into_iter().map(|(name, eta, _)| (name, eta)).collect()
}

const SUMMARY_HEADER: &str = "method,eta_g,metric_median,metric_p5,metric_p95,rounds_to_eps,sim_time_to_eps";

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            format_float(r.eta_g),
            format_float(r.metric_median),
            format_float(r.metric_p5),
            format_float(r.metric_p95),
            r.rounds_to_eps.map(|v| v.to_string()).unwrap_or_default(),
            r.sim_time_to_eps.map(format_float).unwrap_or_default()
        );
    }
    out
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SUMMARY_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `{SUMMARY_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line: idx + 1,
            reason: format!("bad {what}"),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad("field count"));
        }
        let float = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        rows.push(SummaryRow {
            method: f[0].to_string(),
            eta_g: float(f[1], "eta_g")?,
            metric_median: float(f[2], "metric_median")?,
            metric_p5: float(f[3], "metric_p5")?,
            metric_p95: float(f[4], "metric_p95")?,
            rounds_to_eps: match f[5] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("rounds_to_eps"))?),
            },
            sim_time_to_eps: match f[6] {
                "" => None,
                s => Some(float(s, "sim_time_to_eps")?),
            },
        });
    }
    Ok(rows)
}

/// Round-wise bands, one row per (method, η_g, round).
pub fn curves_to_csv(cells: &[Cell]) -> String {
    let mut out = String::from("method,eta_g,round,sim_time_s,p5,median,p95\n");
    for c in cells {
        for (t, (lo, mid, hi)) in bands(&c.curves).into_iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.method,
                format_float(c.eta_g),
                t,
                format_float(c.sim_time[t]),
                format_float(lo),
                format_float(mid),
                format_float(hi)
            );
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryRow {
    pub method: String,
    pub empirical_seconds: Option<f64>,
    pub formula_seconds: f64,
    /// empirical / formula, absent when the target was not reached.
    pub ratio: Option<f64>,
}

/// Formula matching `variant` in the query's setting.
pub fn formula_for(variant: Variant, q: &ComplexityQuery) -> Result<f64> {
    use complexity::*;
    let convex = q.setting == Setting::Convex;
    match (variant, convex) {
        (Variant::LocalSgd, true) => local_sgd_lower_convex(q),
        (Variant::LocalSgd, false) => lower_upper(q).map(|p| p.0),
        (Variant::MinibatchSgd | Variant::HeroSgd, true) => minibatch_hero_upper_convex(q),
        (Variant::MinibatchSgd | Variant::HeroSgd, false) => lower_upper(q).map(|p| p.1),
        (Variant::DualLocalSgd | Variant::DecayingLocalSgd, true) => convex_dual_decaying_upper(q),
        (Variant::DualLocalSgd | Variant::DecayingLocalSgd, false) => {
            dual_decaying_upper_nonconvex(q).map(|p| p.0)
        }
        (Variant::DecayingAsync, true) => Err(Error::invalid("setting", "no convex formula for decaying_async")),
        (Variant::DecayingAsync, false) => async_decaying_upper(q).map(|p| p.0),
    }
}

/// Runs each method of the plan as configured and pairs the simulated time
/// at which the running mean of the seed-averaged metric reaches
/// `plan.epsilon_target` with the matching closed-form time. `plan.eta_grid`
/// is ignored.
pub fn compare_theory(plan: &ExperimentPlan, query: &ComplexityQuery) -> Result<Vec<TheoryRow>> {
    plan.validate()?;
    let spec = plan.problem.build()?;
    plan.methods
        .iter()
        .map(|m| {
            let cell = Cell::evaluate(&spec, m, plan)?;
            let empirical_seconds = cell.eps_hit(plan.epsilon_target).1;
            let formula_seconds = formula_for(m.variant, query)?;
            Ok(TheoryRow {
                method: cell.method,
                empirical_seconds,
                formula_seconds,
                ratio: empirical_seconds.map(|e| e / formula_seconds),
            })
        })
        .collect()
}

pub fn theory_to_csv(rows: &[TheoryRow]) -> String {
    let mut out = String::from("method,empirical_seconds,formula_seconds,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.method,
            r.empirical_seconds.map(format_float).unwrap_or_default(),
            format_float(r.formula_seconds),
            r.ratio.map(format_float).unwrap_or_default()
        );
    }
    out
}

/// `explicit`, else `$LSGD_OUT_DIR`, else `lsgd-out`.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from),
    }
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests;
