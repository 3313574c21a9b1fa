use super::sum::pairwise_sum_in_place;
use super::{MethodConfig, RoundTrace, RunOutput, Variant};
use crate::ctree::{ComputationTree, NodeId};
use crate::error::{Error, Result};
use crate::problems::{ProblemSpec, StreamCursor};
use crate::schedules::{async_worker_step, decaying_step_raw};
use crate::timemodel::async_schedule;

/// Local step rule of a synchronous variant.
enum LocalRule {
    /// Gradients are all taken at x^t (Minibatch SGD).
    AtAnchor,
    /// Step size per inner index j.
    Steps(Vec<f64>),
}

fn local_rule(config: &MethodConfig) -> Result<LocalRule> {
    let k = config.k;
    let s = &config.schedule;
    Ok(match config.variant {
        Variant::MinibatchSgd => LocalRule::AtAnchor,
        Variant::LocalSgd | Variant::DualLocalSgd => {
            let eta_l = s.eta_l.ok_or(Error::MissingParameter("eta_l"))?;
            LocalRule::Steps(vec![eta_l; k as usize])
        }
        Variant::DecayingLocalSgd => {
            let b = s.b.ok_or(Error::MissingParameter("b"))?;
            LocalRule::Steps(
                (0..k)
                    .map(|j| decaying_step_raw(j, b, k, s.eta_g))
                    .collect::<Result<_>>()?,
            )
        }
        other => unreachable!("{other} is not synchronous"),
    })
}

fn is_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn measure(spec: &ProblemSpec, x: &[f64], round: u64, steps: Vec<u64>) -> RoundTrace {
    let (grad_norm_sq_at_xt, f_gap) = if is_finite(x) {
        let g = spec.exact_gradient(x);
        (g.iter().map(|v| v * v).sum(), spec.f_gap(x))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    RoundTrace {
        round,
        grad_norm_sq_at_xt,
        f_gap,
        sim_time_s: 0.0,
        local_steps_executed: steps,
    }
}

fn axpy(x: &mut [f64], a: f64, g: &[f64]) {
    for (xi, gi) in x.iter_mut().zip(g) {
        *xi -= a * gi;
    }
}

struct Recorder {
    tree: Option<ComputationTree>,
    next_draw: u64,
}

impl Recorder {
    fn new(on: bool) -> Self {
        Self {
            tree: on.then(ComputationTree::new),
            next_draw: 0,
        }
    }

    fn draw(&mut self) -> u64 {
        let d = self.next_draw;
        self.next_draw += 1;
        d
    }

    fn tip(&self) -> NodeId {
        self.tree.as_ref().map_or(0, |t| t.main_tip())
    }

    fn local(&mut self, base: NodeId, step: f64, draw: u64) -> Result<NodeId> {
        match &mut self.tree {
            Some(t) => t.record_step(base, base, step, draw),
            None => Ok(0),
        }
    }

    /// Appends the round's main-branch steps in the given order.
    fn main(&mut self, eta_g: f64, refs: &[(NodeId, u64)]) -> Result<()> {
        if let Some(t) = &mut self.tree {
            for &(grad_at, draw) in refs {
                let tip = t.main_tip();
                t.record_main_step(tip, grad_at, eta_g, draw)?;
            }
        }
        Ok(())
    }
}

/// Synchronous round loop shared by Local, Minibatch, Dual and Decaying SGD.
pub(super) fn run_sync(spec: &ProblemSpec, config: &MethodConfig, streams: &[usize]) -> Result<RunOutput> {
    let d = spec.dimension;
    let n = config.n;
    let k = config.k as usize;
    let eta_g = config.schedule.eta_g;
    let rule = local_rule(config)?;
    let src = spec.noise_source(config.seed);

    let mut x = spec.start_point.clone();
    let mut z = vec![0.0; d];
    let mut grads = vec![0.0; n * k * d];
    let mut traces = Vec::with_capacity(config.r as usize);
    let mut rec = Recorder::new(config.record_tree);
    let mut refs = Vec::with_capacity(if config.record_tree { n * k } else { 0 });
    let mut diverged_at = None;

    for t in 0..config.r {
        traces.push(measure(spec, &x, t, vec![config.k; n]));
        if diverged_at.is_some() {
            continue;
        }
        let anchor = rec.tip();
        refs.clear();
        for i in 0..n {
            let mut cursor: StreamCursor = src.cursor_on(i, streams[i], t);
            let block = &mut grads[i * k * d..(i + 1) * k * d];
            match &rule {
                LocalRule::AtAnchor => {
                    for g in block.chunks_exact_mut(d) {
                        spec.sample_gradient_into(i, &x, &mut cursor, g)?;
                        if rec.tree.is_some() {
                            let draw = rec.draw();
                            refs.push((anchor, draw));
                        }
                    }
                }
                LocalRule::Steps(steps) => {
                    z.copy_from_slice(&x);
                    let mut node = anchor;
                    for (g, &step) in block.chunks_exact_mut(d).zip(steps) {
                        spec.sample_gradient_into(i, &z, &mut cursor, g)?;
                        axpy(&mut z, step, g);
                        if rec.tree.is_some() {
                            let draw = rec.draw();
                            refs.push((node, draw));
                            node = rec.local(node, step, draw)?;
                        }
                    }
                }
            }
        }
        pairwise_sum_in_place(&mut grads, n * k, d);
        axpy(&mut x, eta_g, &grads[..d]);
        rec.main(eta_g, &refs)?;
        if !is_finite(&x) {
            diverged_at = Some(t + 1);
        }
    }
    Ok(RunOutput {
        traces,
        final_point: x,
        tree: rec.tree,
        diverged_at,
    })
}

/// Hero SGD: plain SGD on worker 0.
pub(super) fn run_hero(spec: &ProblemSpec, config: &MethodConfig) -> Result<RunOutput> {
    let eta = config.schedule.eta_g;
    let src = spec.noise_source(config.seed);
    let mut x = spec.start_point.clone();
    let mut g = vec![0.0; spec.dimension];
    let mut traces = Vec::with_capacity(config.r as usize);
    let mut rec = Recorder::new(config.record_tree);
    let mut diverged_at = None;
    for t in 0..config.r {
        traces.push(measure(spec, &x, t, vec![1]));
        if diverged_at.is_some() {
            continue;
        }
        let mut cursor = src.cursor(0, t);
        spec.sample_gradient_into(0, &x, &mut cursor, &mut g)?;
        axpy(&mut x, eta, &g);
        if rec.tree.is_some() {
            let draw = rec.draw();
            let tip = rec.tip();
            rec.main(eta, &[(tip, draw)])?;
        }
        if !is_finite(&x) {
            diverged_at = Some(t + 1);
        }
    }
    Ok(RunOutput {
        traces,
        final_point: x,
        tree: rec.tree,
        diverged_at,
    })
}

/// Asynchronous Decaying Local SGD. Every round replays the same completion
/// order (speeds are fixed); worker i's m-th local step uses the tree-distance rule with
/// R = b − 1. Gradients are aggregated in completion order; the recorded main
/// branch lists them worker-major.
pub(super) fn run_async(spec: &ProblemSpec, config: &MethodConfig, streams: &[usize]) -> Result<RunOutput> {
    let d = spec.dimension;
    let n = config.n;
    let b = config.async_budget_b.ok_or(Error::MissingParameter("async_budget_b"))?;
    let eta_g = config.schedule.eta_g;
    let speeds = config.speeds();
    let schedule = async_schedule(&speeds, b)?;
    let steps: Vec<f64> = (0..b).map(|m| async_worker_step(m, b, eta_g)).collect::<Result<_>>()?;
    let src = spec.noise_source(config.seed);

    let mut x = spec.start_point.clone();
    let mut zs = vec![0.0; n * d];
    let mut grads = vec![0.0; b as usize * d];
    let mut traces = Vec::with_capacity(config.r as usize);
    let mut rec = Recorder::new(config.record_tree);
    let mut per_worker_refs: Vec<Vec<(NodeId, u64)>> = vec![Vec::new(); n];
    let mut diverged_at = None;

    for t in 0..config.r {
        traces.push(measure(spec, &x, t, schedule.counts.clone()));
        if diverged_at.is_some() {
            continue;
        }
        let anchor = rec.tip();
        let mut cursors: Vec<StreamCursor> = (0..n).map(|i| src.cursor_on(i, streams[i], t)).collect();
        let mut done = vec![0usize; n];
        let mut nodes = vec![anchor; n];
        for z in zs.chunks_exact_mut(d) {
            z.copy_from_slice(&x);
        }
        per_worker_refs.iter_mut().for_each(Vec::clear);
        for (g, &i) in grads.chunks_exact_mut(d).zip(&schedule.order) {
            let z = &mut zs[i * d..(i + 1) * d];
            spec.sample_gradient_into(i, z, &mut cursors[i], g)?;
            let step = steps[done[i]];
            axpy(z, step, g);
            if rec.tree.is_some() {
                let draw = rec.draw();
                per_worker_refs[i].push((nodes[i], draw));
                nodes[i] = rec.local(nodes[i], step, draw)?;
            }
            done[i] += 1;
        }
        pairwise_sum_in_place(&mut grads, b as usize, d);
        axpy(&mut x, eta_g, &grads[..d]);
        let refs: Vec<(NodeId, u64)> = per_worker_refs.concat();
        rec.main(eta_g, &refs)?;
        if !is_finite(&x) {
            diverged_at = Some(t + 1);
        }
    }
    Ok(RunOutput {
        traces,
        final_point: x,
        tree: rec.tree,
        diverged_at,
    })
}
