use std::fmt::Write as _;

use super::RoundTrace;
use crate::error::Result;

/// Shortest decimal that parses back to the same `f64` (`inf`, `-inf`,
/// `NaN` for non-finite values). Exponent form is used outside
/// [1e-5, 1e16).
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// CSV with columns `round,grad_norm_sq,f_gap,sim_time_s,m_1..m_n`.
pub fn traces_to_csv(traces: &[RoundTrace], n: usize) -> String {
    let mut out = String::from("round,grad_norm_sq,f_gap,sim_time_s");
    for i in 1..=n {
        let _ = write!(out, ",m_{i}");
    }
    out.push('\n');
    for t in traces {
        let _ = write!(
            out,
            "{},{},{},{}",
            t.round,
            format_float(t.grad_norm_sq_at_xt),
            format_float(t.f_gap),
            format_float(t.sim_time_s)
        );
        for i in 0..n {
            let m = t.local_steps_executed.get(i).copied().unwrap_or(0);
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
    }
    out
}

pub fn traces_to_json(traces: &[RoundTrace]) -> Result<String> {
    Ok(serde_json::to_string_pretty(traces)?)
}
