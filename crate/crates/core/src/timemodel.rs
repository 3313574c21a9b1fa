//! Simulated wall-clock accounting: every stochastic gradient costs exactly
//! `h` seconds on a unit-speed worker and every synchronization costs `tau`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{MethodConfig, RoundTrace, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeModel {
    /// Seconds per stochastic gradient.
    pub h: f64,
    /// Seconds per synchronization.
    pub tau: f64,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self { h: 1.0, tau: 1.0 }
    }
}

impl TimeModel {
    pub fn new(h: f64, tau: f64) -> Result<Self> {
        let tm = Self { h, tau };
        tm.validate()?;
        Ok(tm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(Error::invalid("h", format!("must be a nonnegative number, got {}", self.h)));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("tau", format!("must be a nonnegative number, got {}", self.tau)));
        }
        Ok(())
    }
}

/// τ + K·h: workers compute their K gradients in parallel, then synchronize once.
pub fn sync_round_time(tm: &TimeModel, k: u64) -> f64 {
    tm.tau + k as f64 * tm.h
}

/// R·h; Hero SGD never communicates.
pub fn hero_total_time(tm: &TimeModel, r: u64) -> f64 {
    r as f64 * tm.h
}

/// Completion order of one asynchronous round.
#[derive(Clone, Debug, PartialEq)]
pub struct AsyncSchedule {
    /// Worker that finished each of the `b` gradients, in virtual-time order.
    pub order: Vec<usize>,
    /// Gradients completed per worker (the M_i of the round).
    pub counts: Vec<u64>,
    /// Worker and per-worker count of the last (b-th) gradient.
    last: (usize, u64),
}

impl AsyncSchedule {
    /// Virtual compute time of the round: the instant the b-th gradient completes.
    pub fn compute_time(&self, tm: &TimeModel, speeds: &[f64]) -> f64 {
        let (worker, m) = self.last;
        if self.order.is_empty() {
            return 0.0;
        }
        m as f64 * tm.h / speeds[worker]
    }
}

fn check_speeds(speeds: &[f64]) -> Result<()> {
    if speeds.is_empty() {
        return Err(Error::invalid("async_worker_speeds", "need at least one worker"));
    }
    if let Some(s) = speeds.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("async_worker_speeds", format!("speeds must be positive, got {s}")));
    }
    Ok(())
}

/// Simulates which worker completes each gradient of a round with budget `b`.
///
/// Worker i finishes its m-th gradient at m·h/speed_i. Simultaneous finishers
/// are admitted in increasing worker index until the budget is exhausted.
pub fn async_schedule(speeds: &[f64], b: u64) -> Result<AsyncSchedule> {
    check_speeds(speeds)?;
    if b < 1 {
        return Err(Error::invalid("b", "budget must be at least 1"));
    }
    let n = speeds.len();
    let mut counts = vec![0u64; n];
    let mut order = Vec::with_capacity(b as usize);
    let mut last = (0, 0);
    for _ in 0..b {
        // Ordering key m/speed is independent of h, so h = 0 keeps the same interleaving.
        let mut best = 0;
        let mut best_key = (counts[0] + 1) as f64 / speeds[0];
        for (i, (&c, &s)) in counts.iter().zip(speeds).enumerate().skip(1) {
            let key = (c + 1) as f64 / s;
            if key < best_key {
                best = i;
                best_key = key;
            }
        }
        counts[best] += 1;
        order.push(best);
        last = (best, counts[best]);
    }
    Ok(AsyncSchedule {
        order,
        counts,
        last,
    })
}

/// τ plus the virtual time at which the b-th gradient of a round completes.
pub fn async_round_time(tm: &TimeModel, speeds: &[f64], b: u64) -> Result<f64> {
    let schedule = async_schedule(speeds, b)?;
    Ok(tm.tau + schedule.compute_time(tm, speeds))
}

/// Fills `sim_time_s` with the cumulative time at the end of each round.
///
/// Times are computed as (t + 1)·round_time rather than by accumulation, so
/// charging twice gives the same result.
pub fn charge(traces: &mut [RoundTrace], tm: &TimeModel, config: &MethodConfig) -> Result<()> {
    tm.validate()?;
    let per_round = match config.variant {
        Variant::HeroSgd => tm.h,
        Variant::DecayingAsync => {
            let b = config.async_budget_b.ok_or(Error::MissingParameter("async_budget_b"))?;
            async_round_time(tm, &config.speeds(), b)?
        }
        _ => sync_round_time(tm, config.k),
    };
    for tr in traces.iter_mut() {
        tr.sim_time_s = (tr.round + 1) as f64 * per_round;
    }
    Ok(())
}
