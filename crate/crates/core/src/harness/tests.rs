use super::*;

fn quad_problem(sigma2: f64, n: usize) -> ProblemConfig {
    ProblemConfig::Quadratic {
        dimension: 3,
        smoothness_l: 1.0,
        sigma2,
        x0: vec![1.0, -0.5, 0.25],
        n,
        heterogeneous_shift: None,
    }
}

fn plan(problem: ProblemConfig, methods: Vec<MethodConfig>, grid: Vec<f64>, seeds: Vec<u64>) -> ExperimentPlan {
    ExperimentPlan {
        problem,
        methods,
        eta_grid: grid,
        seeds,
        epsilon_target: 0.05,
        time_model: TimeModel::new(1.0, 2.0).unwrap(),
        metric: Metric::FGap,
        output_path: None,
    }
}

fn local_template(n: usize) -> MethodConfig {
    MethodConfig::local_sgd(n, 2, 30, 0.1)
}

#[test]
fn grid_has_sixteen_powers() {
    let g = power_of_two_grid(16);
    assert_eq!(g.len(), 16);
    assert_eq!(g[0], 0.5);
    assert_eq!(g[15], 1.0 / 65536.0);
}

#[test]
fn instantiate_sets_local_steps() {
    let n = 4;
    let local = instantiate(&local_template(n), 0.25).unwrap();
    assert_eq!(local.schedule.eta_l, Some(1.0));
    let dual = instantiate(&MethodConfig::dual_local_sgd(n, 2, 5, 9.0, 9.0), 0.25).unwrap();
    assert_eq!(dual.schedule.eta_l, Some(0.5));
    let dec = instantiate(&MethodConfig::decaying_local_sgd(n, 3, 5, 9.0, 6.0), 0.25).unwrap();
    assert_eq!((dec.schedule.eta_g, dec.schedule.b, dec.schedule.k), (0.25, Some(6.0), Some(3)));
}

#[test]
fn single_seed_percentiles_equal_the_trace() {
    let p = plan(quad_problem(1.0, 2), vec![local_template(2)], vec![0.1], vec![3]);
    let res = tune(&p).unwrap();
    assert_eq!(res.rows.len(), 1);
    let row = &res.rows[0];
    let spec = p.problem.build().unwrap();
    let cfg = MethodConfig {
        seed: 3,
        time_model: p.time_model,
        ..instantiate(&p.methods[0], 0.1).unwrap()
    };
    let last = run(&spec, &cfg).unwrap().traces.last().unwrap().f_gap;
    assert_eq!((row.metric_p5, row.metric_median, row.metric_p95), (last, last, last));
}

#[test]
fn noiseless_seeds_agree() {
    let p = plan(quad_problem(0.0, 2), vec![local_template(2)], vec![0.1, 0.05], (0..30).collect());
    for r in tune(&p).unwrap().rows {
        assert_eq!(r.metric_p5, r.metric_p95);
        assert_eq!(r.metric_median, r.metric_p95);
    }
}

#[test]
fn band_widens_with_noise() {
    let width = |sigma2: f64| {
        let p = plan(quad_problem(sigma2, 2), vec![local_template(2)], vec![0.1], (0..40).collect());
        let r = &tune(&p).unwrap().rows[0];
        assert!(r.metric_p5 <= r.metric_median && r.metric_median <= r.metric_p95);
        r.metric_p95 - r.metric_p5
    };
    let (a, b, c) = (width(0.1), width(1.0), width(4.0));
    assert!(a < b && b < c, "{a} {b} {c}");
}

#[test]
fn csv_is_reproducible_and_selection_survives_a_round_trip() {
    let methods = vec![local_template(2), MethodConfig::dual_local_sgd(2, 2, 30, 0.1, 0.1)];
    let p = plan(quad_problem(1.0, 2), methods, power_of_two_grid(5), vec![1, 2, 3]);
    let a = tune(&p).unwrap();
    let b = tune(&p).unwrap();
    let csv = summary_to_csv(&a.rows);
    assert_eq!(csv, summary_to_csv(&b.rows));
    assert_eq!(curves_to_csv(&a.cells), curves_to_csv(&b.cells));
    let back = summary_from_csv(&csv).unwrap();
    assert_eq!(back, a.rows);
    assert_eq!(select_best(&back), select_best(&a.rows));
}

#[test]
fn selection_breaks_ties_toward_smaller_steps() {
    let row = |m: &str, eta: f64, med: f64| SummaryRow {
        method: m.into(),
        eta_g: eta,
        metric_median: med,
        metric_p5: med,
        metric_p95: med,
        rounds_to_eps: None,
        sim_time_to_eps: None,
    };
    let rows = vec![
        row("a", 0.5, 1.0),
        row("a", 0.25, 1.0),
        row("a", 0.125, 2.0),
        row("b", 0.5, f64::NAN),
        row("b", 0.25, 3.0),
    ];
    assert_eq!(select_best(&rows), vec![("a".into(), 0.25), ("b".into(), 0.25)]);
}

#[test]
fn empty_grid_is_an_error() {
    let p = plan(quad_problem(1.0, 2), vec![local_template(2)], vec![], vec![1]);
    assert!(tune(&p).is_err());
    let p = plan(quad_problem(1.0, 2), vec![local_template(2)], vec![-0.1], vec![1]);
    assert!(tune(&p).is_err());
}

#[test]
fn noiseless_rounds_to_eps_matches_geometric_decay() {
    // x^{t+1} = (1 − nη_g L)·x^t, so f_gap(x^t) = f_gap(x⁰)·ρ^{2t}.
    let (n, eta_g, eps) = (2usize, 0.1, 0.05);
    let m = MethodConfig::minibatch_sgd(n, 1, 60, eta_g);
    let mut p = plan(quad_problem(0.0, n), vec![m], vec![1.0], vec![0]);
    p.epsilon_target = eps;
    let f0 = 0.5 * (1.0 + 0.25 + 0.0625);
    let rho2 = (1.0 - n as f64 * eta_g).powi(2);
    let expected = (0..)
        .find(|&t| f0 * (1.0 - rho2.powi(t + 1)) / ((1.0 - rho2) * (t + 1) as f64) <= eps)
        .unwrap() as u64;
    let q = ComplexityQuery::convex(eps, 1.0, 0.0, 1.3125, n as u64, 2.0, 1.0);
    let rows = compare_theory(&p, &q).unwrap();
    let round_time = 2.0 + 1.0;
    assert_eq!(rows[0].empirical_seconds, Some(expected as f64 * round_time));
    let cell_hit = {
        let spec = p.problem.build().unwrap();
        Cell::evaluate(&spec, &p.methods[0], &p).unwrap().eps_hit(eps).0
    };
    assert_eq!(cell_hit, Some(expected));
}

#[test]
fn free_time_model_gives_zero_seconds() {
    let m = MethodConfig::minibatch_sgd(2, 1, 40, 0.2);
    let mut p = plan(quad_problem(0.0, 2), vec![m], vec![1.0], vec![0]);
    p.time_model = TimeModel::new(0.0, 0.0).unwrap();
    let q = ComplexityQuery::convex(0.05, 1.0, 0.0, 1.0, 2, 0.0, 0.0);
    let rows = compare_theory(&p, &q).unwrap();
    assert_eq!(rows[0].empirical_seconds, Some(0.0));
    assert_eq!(rows[0].formula_seconds, 0.0);
}

#[test]
fn out_dir_resolution() {
    let explicit = resolve_out_dir(Some(Path::new("/tmp/x")));
    assert_eq!(explicit, PathBuf::from("/tmp/x"));
}

#[test]
fn plan_json_round_trip() {
    let p = plan(quad_problem(1.0, 2), vec![local_template(2)], vec![0.1], vec![1, 2]);
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentPlan>(&text).unwrap(), p);
}
