//! Closed-form time complexities (simulated seconds) of the methods.
//!
//! Expressions stated up to constant factors are evaluated with constant 1;
//! explicit constants (64, 320) are kept.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::format_float;
use crate::schedules::guarded_ceil;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Convex,
    Nonconvex,
    HeterogeneousNonconvex,
}

impl Setting {
    pub fn id(self) -> &'static str {
        match self {
            Setting::Convex => "convex",
            Setting::Nonconvex => "nonconvex",
            Setting::HeterogeneousNonconvex => "heterogeneous_nonconvex",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Setting::Convex, Setting::Nonconvex, Setting::HeterogeneousNonconvex]
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "setting",
                value: s.to_string(),
            })
    }
}

/// Problem and system constants of one complexity evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityQuery {
    pub epsilon: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub sigma2: f64,
    /// Δ, nonconvex settings only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// B², convex setting only.
    #[serde(rename = "B2", default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    pub n: u64,
    pub tau: f64,
    pub h: f64,
    pub setting: Setting,
}

impl ComplexityQuery {
    pub fn convex(epsilon: f64, l: f64, sigma2: f64, b2: f64, n: u64, tau: f64, h: f64) -> Self {
        Self {
            epsilon,
            l,
            sigma2,
            delta: None,
            b2: Some(b2),
            n,
            tau,
            h,
            setting: Setting::Convex,
        }
    }

    pub fn nonconvex(epsilon: f64, l: f64, sigma2: f64, delta: f64, n: u64, tau: f64, h: f64) -> Self {
        Self {
            epsilon,
            l,
            sigma2,
            delta: Some(delta),
            b2: None,
            n,
            tau,
            h,
            setting: Setting::Nonconvex,
        }
    }

    pub fn heterogeneous(mut self) -> Self {
        self.setting = Setting::HeterogeneousNonconvex;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("epsilon", self.epsilon), ("L", self.l)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        let nonneg = [("sigma2", self.sigma2), ("tau", self.tau), ("h", self.h)];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be nonnegative, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one worker"));
        }
        let (need, other, other_name) = match self.setting {
            Setting::Convex => (self.b2, self.delta, "delta"),
            _ => (self.delta, self.b2, "B2"),
        };
        let need_name = if self.setting == Setting::Convex { "B2" } else { "delta" };
        match need {
            None => return Err(Error::MissingParameter(need_name)),
            Some(v) if !(v >= 0.0) || !v.is_finite() => {
                return Err(Error::invalid(need_name, format!("must be nonnegative, got {v}")))
            }
            _ => {}
        }
        if other.is_some() {
            return Err(Error::invalid(
                other_name,
                format!("not used in the {} setting", self.setting),
            ));
        }
        Ok(())
    }

    fn expect(&self, setting: Setting) -> Result<()> {
        self.validate()?;
        let ok = match setting {
            Setting::Convex => self.setting == Setting::Convex,
            _ => self.setting != Setting::Convex,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "setting",
                format!("formula needs a {setting} query, got {}", self.setting),
            ))
        }
    }
}

/// Shared terms. Convex: A = τLB²/ε, C = hLB²/ε, D = hσ²B²/(nε²),
/// E = hσ²B²/ε². Nonconvex: the same with LΔ in place of LB² and Lσ²Δ in
/// place of σ²B².
struct Terms {
    a: f64,
    c: f64,
    d: f64,
    e: f64,
    /// √(A·E), the Local SGD cross term.
    cross: f64,
}

fn terms(q: &ComplexityQuery) -> Terms {
    let eps = q.epsilon;
    let n = q.n as f64;
    let (scale, noise) = match q.setting {
        Setting::Convex => {
            let b2 = q.b2.unwrap_or(0.0);
            (q.l * b2, q.sigma2 * b2)
        }
        _ => {
            let delta = q.delta.unwrap_or(0.0);
            (q.l * delta, q.l * q.sigma2 * delta)
        }
    };
    let a = q.tau * scale / eps;
    let e = q.h * noise / (eps * eps);
    Terms {
        a,
        c: q.h * scale / eps,
        d: q.h * noise / (n * eps * eps),
        e,
        cross: a.sqrt() * e.sqrt(),
    }
}

/// Local SGD, convex: min{√(τh·Lσ²B⁴/ε³) + h(LB²/ε + σ²B²/(nε²)), h(LB²/ε + σ²B²/ε²)}.
pub fn local_sgd_lower_convex(q: &ComplexityQuery) -> Result<f64> {
    q.expect(Setting::Convex)?;
    let t = terms(q);
    Ok((t.cross + t.c + t.d).min(t.c + t.e))
}

/// Minibatch or Hero SGD, convex: min{τLB²/ε + h(LB²/ε + σ²B²/(nε²)), h(LB²/ε + σ²B²/ε²)}.
pub fn minibatch_hero_upper_convex(q: &ComplexityQuery) -> Result<f64> {
    q.expect(Setting::Convex)?;
    let t = terms(q);
    Ok((t.a + t.c + t.d).min(t.c + t.e))
}

/// Local SGD, nonconvex: √(τh·L²σ²Δ²/ε³) + h(LΔ/ε + Lσ²Δ/(nε²)).
pub fn local_sgd_lower_nonconvex(q: &ComplexityQuery) -> Result<f64> {
    q.expect(Setting::Nonconvex)?;
    let t = terms(q);
    Ok(t.cross + t.c + t.d)
}

/// Minibatch or Hero SGD, nonconvex: min{τLΔ/ε + h(LΔ/ε + Lσ²Δ/(nε²)), h(LΔ/ε + Lσ²Δ/ε²)}.
pub fn minibatch_hero_upper_nonconvex(q: &ComplexityQuery) -> Result<f64> {
    q.expect(Setting::Nonconvex)?;
    let t = terms(q);
    Ok((t.a + t.c + t.d).min(t.c + t.e))
}

/// Heterogeneous nonconvex: (Local SGD / SCAFFOLD lower, Minibatch SGD upper).
/// Hero SGD has no counterpart here since one worker only sees its own f_i.
pub fn heterogeneous_pair(q: &ComplexityQuery) -> Result<(f64, f64)> {
    q.expect(Setting::Nonconvex)?;
    let t = terms(q);
    Ok((t.cross + t.c + t.d, t.a + t.c + t.d))
}

/// Dual or Decaying Local SGD, nonconvex. Returns the explicit-constant
/// bound 64τLΔ/ε + 64h(LΔ/ε + Lσ²Δ/(nε²)) and its minimum with the Hero
/// branch (constants 1).
pub fn dual_decaying_upper_nonconvex(q: &ComplexityQuery) -> Result<(f64, f64)> {
    q.expect(Setting::Nonconvex)?;
    let t = terms(q);
    Ok((64.0 * t.a + 64.0 * (t.c + t.d), (t.a + t.c + t.d).min(t.c + t.e)))
}

/// Dual or Decaying Local SGD, convex: 320τLB²/ε + 320h(LB²/ε + σ²B²/(nε²)).
pub fn convex_dual_decaying_upper(q: &ComplexityQuery) -> Result<f64> {
    q.expect(Setting::Convex)?;
    let t = terms(q);
    Ok(320.0 * t.a + 320.0 * (t.c + t.d))
}

/// Asynchronous Decaying Local SGD: τLΔ/ε + h(LΔ/ε + Lσ²Δ/(nε²)) together
/// with the budget b = max{⌈σ²/ε⌉, 1}.
pub fn async_decaying_upper(q: &ComplexityQuery) -> Result<(f64, u64)> {
    q.expect(Setting::Nonconvex)?;
    let t = terms(q);
    let b = guarded_ceil(q.sigma2 / q.epsilon).max(1);
    Ok((t.a + t.c + t.d, b))
}

/// Every formula that applies to the query's setting, as (name, seconds).
pub fn evaluate_all(q: &ComplexityQuery) -> Result<Vec<(&'static str, f64)>> {
    q.validate()?;
    Ok(match q.setting {
        Setting::Convex => vec![
            ("local_sgd_lower_convex", local_sgd_lower_convex(q)?),
            ("minibatch_hero_upper_convex", minibatch_hero_upper_convex(q)?),
            ("convex_dual_decaying_upper", convex_dual_decaying_upper(q)?),
        ],
        Setting::Nonconvex => {
            let (plain, with_hero) = dual_decaying_upper_nonconvex(q)?;
            let (asy, b) = async_decaying_upper(q)?;
            vec![
                ("local_sgd_lower_nonconvex", local_sgd_lower_nonconvex(q)?),
                ("minibatch_hero_upper_nonconvex", minibatch_hero_upper_nonconvex(q)?),
                ("dual_decaying_upper_nonconvex", plain),
                ("dual_decaying_hero_upper_nonconvex", with_hero),
                ("async_decaying_upper", asy),
                ("async_budget_b", b as f64),
            ]
        }
        Setting::HeterogeneousNonconvex => {
            let (lower, upper) = heterogeneous_pair(q)?;
            vec![
                ("local_sgd_lower_heterogeneous", lower),
                ("minibatch_upper_heterogeneous", upper),
            ]
        }
    })
}

/// Lower bound for Local SGD and upper bound for the best of Minibatch and
/// Hero SGD in the query's setting.
pub fn lower_upper(q: &ComplexityQuery) -> Result<(f64, f64)> {
    match q.setting {
        Setting::Convex => Ok((local_sgd_lower_convex(q)?, minibatch_hero_upper_convex(q)?)),
        Setting::Nonconvex => Ok((local_sgd_lower_nonconvex(q)?, minibatch_hero_upper_nonconvex(q)?)),
        Setting::HeterogeneousNonconvex => heterogeneous_pair(q),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRow {
    pub query: ComplexityQuery,
    pub lower: f64,
    pub upper: f64,
    /// lower / upper, formed as exp(ln lower − ln upper).
    pub ratio: f64,
    pub flags: Vec<String>,
}

fn ratio_of(lower: f64, upper: f64) -> f64 {
    match (lower > 0.0, upper > 0.0) {
        (true, true) => (lower.ln() - upper.ln()).exp(),
        (false, false) => 1.0,
        (true, false) => f64::INFINITY,
        (false, true) => 0.0,
    }
}

/// Ratio of the Local SGD lower bound to the Minibatch/Hero upper bound for
/// every query, sorted by ratio (ascending, stable). Rows whose ratio
/// exceeds a threshold get a `ratio>THRESHOLD` flag; nonconvex rows with
/// ε ≥ 2LΔ are flagged `already stationary` since x⁰ qualifies as is.
pub fn regime_report(queries: &[ComplexityQuery], thresholds: &[f64]) -> Result<Vec<RegimeRow>> {
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let (lower, upper) = lower_upper(q)?;
        let ratio = ratio_of(lower, upper);
        let mut flags: Vec<String> = thresholds
            .iter()
            .filter(|&&th| ratio > th)
            .map(|th| format!("ratio>{}", format_float(*th)))
            .collect();
        if let Some(delta) = q.delta {
            if q.epsilon >= 2.0 * q.l * delta {
                flags.push("already stationary".to_string());
            }
        }
        rows.push(RegimeRow {
            query: *q,
            lower,
            upper,
            ratio,
            flags,
        });
    }
    rows.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
    Ok(rows)
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

const QUERY_COLUMNS: &str = "setting,epsilon,L,sigma2,delta,B2,n,tau,h";

fn query_cells(q: &ComplexityQuery) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        q.setting,
        format_float(q.epsilon),
        format_float(q.l),
        format_float(q.sigma2),
        opt_float(q.delta),
        opt_float(q.b2),
        q.n,
        format_float(q.tau),
        format_float(q.h)
    )
}

/// One row per (formula, query).
pub fn formulas_to_csv(queries: &[ComplexityQuery]) -> Result<String> {
    let mut out = format!("formula,{QUERY_COLUMNS},value\n");
    for q in queries {
        for (name, value) in evaluate_all(q)? {
            let _ = writeln!(out, "{name},{},{}", query_cells(q), format_float(value));
        }
    }
    Ok(out)
}

pub fn regime_to_csv(rows: &[RegimeRow]) -> String {
    let mut out = format!("{QUERY_COLUMNS},lower,upper,ratio,flags\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            query_cells(&r.query),
            format_float(r.lower),
            format_float(r.upper),
            format_float(r.ratio),
            r.flags.join(";")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cq() -> ComplexityQuery {
        ComplexityQuery::convex(0.1, 1.0, 1.0, 1.0, 10, 1.0, 1.0)
    }

    fn nq() -> ComplexityQuery {
        ComplexityQuery::nonconvex(0.1, 1.0, 1.0, 1.0, 10, 1.0, 1.0)
    }

    #[test]
    fn convex_examples() {
        assert_relative_eq!(local_sgd_lower_convex(&cq()).unwrap(), 1000f64.sqrt() + 20.0, max_relative = 1e-15);
        assert_relative_eq!(minibatch_hero_upper_convex(&cq()).unwrap(), 30.0, max_relative = 1e-15);
        assert_relative_eq!(convex_dual_decaying_upper(&cq()).unwrap(), 9600.0, max_relative = 1e-15);

        let quiet = ComplexityQuery { sigma2: 0.0, ..cq() };
        assert_relative_eq!(local_sgd_lower_convex(&quiet).unwrap(), 10.0, max_relative = 1e-15);
        let free_sync = ComplexityQuery { tau: 0.0, ..cq() };
        assert_relative_eq!(local_sgd_lower_convex(&free_sync).unwrap(), 20.0, max_relative = 1e-15);
        let free_grad = ComplexityQuery { h: 0.0, ..cq() };
        assert_relative_eq!(minibatch_hero_upper_convex(&free_grad).unwrap(), 0.0);
        assert_relative_eq!(convex_dual_decaying_upper(&free_grad).unwrap(), 3200.0, max_relative = 1e-15);
        let many = ComplexityQuery { n: 1 << 50, ..cq() };
        assert_relative_eq!(minibatch_hero_upper_convex(&many).unwrap(), 20.0, max_relative = 1e-12);
        assert_relative_eq!(convex_dual_decaying_upper(&many).unwrap(), 6400.0, max_relative = 1e-12);
    }

    #[test]
    fn nonconvex_examples() {
        assert_relative_eq!(local_sgd_lower_nonconvex(&nq()).unwrap(), 1000f64.sqrt() + 20.0, max_relative = 1e-15);
        assert_relative_eq!(minibatch_hero_upper_nonconvex(&nq()).unwrap(), 30.0, max_relative = 1e-15);
        let (plain, with_hero) = dual_decaying_upper_nonconvex(&nq()).unwrap();
        assert_relative_eq!(plain, 1920.0, max_relative = 1e-15);
        assert_relative_eq!(with_hero, 30.0, max_relative = 1e-15);
        let (t, b) = async_decaying_upper(&nq()).unwrap();
        assert_relative_eq!(t, 30.0, max_relative = 1e-15);
        assert_eq!(b, 10);

        let quiet = ComplexityQuery { sigma2: 0.0, ..nq() };
        assert_relative_eq!(local_sgd_lower_nonconvex(&quiet).unwrap(), 10.0, max_relative = 1e-15);
        assert_relative_eq!(dual_decaying_upper_nonconvex(&quiet).unwrap().0, 1280.0, max_relative = 1e-15);
        assert_eq!(async_decaying_upper(&quiet).unwrap().1, 1);
        let coarse = ComplexityQuery { epsilon: 2.0, ..nq() };
        assert_eq!(async_decaying_upper(&coarse).unwrap().1, 1);
        let free_sync = ComplexityQuery { tau: 0.0, ..nq() };
        assert_relative_eq!(local_sgd_lower_nonconvex(&free_sync).unwrap(), 20.0, max_relative = 1e-15);
    }

    #[test]
    fn heterogeneous_mirrors_nonconvex() {
        let q = nq().heterogeneous();
        let (lower, upper) = heterogeneous_pair(&q).unwrap();
        assert_relative_eq!(lower, 1000f64.sqrt() + 20.0, max_relative = 1e-15);
        assert_relative_eq!(upper, 30.0, max_relative = 1e-15);
        let quiet = ComplexityQuery { sigma2: 0.0, ..q };
        let (lower, upper) = heterogeneous_pair(&quiet).unwrap();
        assert_relative_eq!(lower, 10.0, max_relative = 1e-15);
        assert_relative_eq!(upper, 20.0, max_relative = 1e-15);
    }

    #[test]
    fn wrong_setting_is_rejected() {
        assert!(local_sgd_lower_convex(&nq()).is_err());
        assert!(local_sgd_lower_nonconvex(&cq()).is_err());
        let both = ComplexityQuery { delta: Some(1.0), ..cq() };
        assert!(both.validate().is_err());
        let neither = ComplexityQuery { delta: None, ..nq() };
        assert!(matches!(neither.validate(), Err(Error::MissingParameter("delta"))));
        assert!(ComplexityQuery { epsilon: 0.0, ..nq() }.validate().is_err());
    }

    #[test]
    fn regime_examples() {
        let big = ComplexityQuery::convex(1e-4, 1.0, 1.0, 1.0, 1_000_000, 1.0, 1.0);
        let tie = ComplexityQuery { sigma2: 0.0, tau: 0.0, ..cq() };
        let done = ComplexityQuery { epsilon: 3.0, ..nq() };
        let rows = regime_report(&[big, tie, done], &[10.0]).unwrap();
        let big_row = rows.iter().find(|r| r.query == big).unwrap();
        assert!(big_row.ratio > 10.0, "{}", big_row.ratio);
        assert_eq!(big_row.flags, vec!["ratio>10.0".to_string()]);
        assert_eq!(rows.iter().find(|r| r.query == tie).unwrap().ratio, 1.0);
        assert!(rows.iter().find(|r| r.query == done).unwrap().flags.contains(&"already stationary".to_string()));
        assert!(rows.windows(2).all(|w| w[0].ratio <= w[1].ratio));
    }

    #[test]
    fn csv_rows_per_formula() {
        let csv = formulas_to_csv(&[cq(), nq()]).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 + 6);
        assert!(csv.contains("minibatch_hero_upper_nonconvex,nonconvex,0.1,1.0,1.0,1.0,,10,1.0,1.0,30.0"));
    }

    #[test]
    fn query_json_round_trip() {
        let text = serde_json::to_string(&cq()).unwrap();
        assert!(text.contains("\"B2\""));
        assert_eq!(serde_json::from_str::<ComplexityQuery>(&text).unwrap(), cq());
    }

    fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
        (lo.ln()..hi.ln()).prop_map(f64::exp)
    }

    prop_compose! {
        fn query(convex: bool)(
            tau in log_uniform(1e-3, 1e3), h in log_uniform(1e-3, 1e3),
            l in log_uniform(1e-2, 1e2), sigma2 in log_uniform(1e-2, 1e2),
            scale in log_uniform(1e-2, 1e2), eps in log_uniform(1e-6, 1.0),
            n in log_uniform(1.0, 1e6),
        ) -> ComplexityQuery {
            let n = n as u64;
            if convex {
                ComplexityQuery::convex(eps, l, sigma2, scale, n, tau, h)
            } else {
                ComplexityQuery::nonconvex(eps, l, sigma2, scale, n, tau, h)
            }
        }
    }

    fn all_values(q: &ComplexityQuery) -> Vec<f64> {
        evaluate_all(q).unwrap().into_iter().filter(|(k, _)| *k != "async_budget_b").map(|(_, v)| v).collect()
    }

    proptest! {
        #[test]
        fn upper_never_exceeds_lower(q in prop_oneof![query(true), query(false)]) {
            let (lower, upper) = lower_upper(&q).unwrap();
            prop_assert!(upper <= lower, "{upper} > {lower}");
        }

        #[test]
        fn hero_variant_is_the_minibatch_hero_bound(q in query(false)) {
            prop_assert_eq!(dual_decaying_upper_nonconvex(&q).unwrap().1, minibatch_hero_upper_nonconvex(&q).unwrap());
        }

        #[test]
        fn homogeneous_in_tau_and_h(q in prop_oneof![query(true), query(false)], c in log_uniform(1e-3, 1e3)) {
            let scaled = ComplexityQuery { tau: q.tau * c, h: q.h * c, ..q };
            for (a, b) in all_values(&q).into_iter().zip(all_values(&scaled)) {
                prop_assert!((b - c * a).abs() <= 1e-12 * (c * a).abs(), "{b} vs {}", c * a);
            }
        }

        #[test]
        fn monotone(q in prop_oneof![query(true), query(false)], f in 1.0f64..100.0) {
            let base = all_values(&q);
            let more_n = ComplexityQuery { n: q.n * 2, ..q };
            let more_s = ComplexityQuery { sigma2: q.sigma2 * f, ..q };
            let more_t = ComplexityQuery { tau: q.tau * f, ..q };
            let more_h = ComplexityQuery { h: q.h * f, ..q };
            let tol = |v: f64| v * (1.0 + 1e-14);
            for (b, v) in base.iter().zip(all_values(&more_n)) {
                prop_assert!(v <= tol(*b));
            }
            for other in [more_s, more_t, more_h] {
                for (b, v) in base.iter().zip(all_values(&other)) {
                    prop_assert!(v >= *b * (1.0 - 1e-14));
                }
            }
        }
    }
}
