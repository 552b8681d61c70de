//! CFQM and modified sixth-order steppers built on the splitting layer, and
//! fixed-step evolution over an interval.

mod schemes;

use std::time::{Duration, Instant};

use num_complex::Complex64;

pub use schemes::{
    bbk_coefficients, cfqm_registry, BbkCoefficients, CfqmScheme, Method, Outer, CFQM_NAMES,
    METHOD_NAMES,
};

use crate::error::{Error, Result};
use crate::model::{modified_potential, PotentialField, Problem};
use crate::spectral::{thread_transform_pairs, Field, Frame};
use crate::splitting::{apply_splitting_in_place, SplittingScheme};

/// Cost and timing of one step or an aggregate of steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub transform_pairs_used: u64,
    pub stages_executed: usize,
    pub wall_time: Duration,
}

impl StepReport {
    pub fn merge(&mut self, other: &StepReport) {
        self.transform_pairs_used += other.transform_pairs_used;
        self.stages_executed += other.stages_executed;
        self.wall_time += other.wall_time;
    }
}

struct Meter {
    pairs: u64,
    start: Instant,
}

impl Meter {
    fn start() -> Self {
        Meter {
            pairs: thread_transform_pairs(),
            start: Instant::now(),
        }
    }

    fn finish(self, stages: usize) -> StepReport {
        StepReport {
            transform_pairs_used: thread_transform_pairs() - self.pairs,
            stages_executed: stages,
            wall_time: self.start.elapsed(),
        }
    }
}

fn combine(weights: &[f64], fields: &[PotentialField], time: f64) -> Result<PotentialField> {
    let mut out = PotentialField::zeros(fields[0].grid().clone(), time);
    for (w, f) in weights.iter().zip(fields) {
        out.add_scaled(*w, f)?;
    }
    Ok(out)
}

fn node_potentials(problem: &Problem, nodes: &[f64], t0: f64, h: f64) -> Result<Vec<PotentialField>> {
    nodes.iter().map(|c| problem.potential(t0 + c * h)).collect()
}

/// `sum_k a[j][k] W(., t0 + c_k h)` for stage `j` (1-based).
pub fn stage_effective_potential(
    scheme: &CfqmScheme,
    j: usize,
    problem: &Problem,
    t0: f64,
    h: f64,
) -> Result<PotentialField> {
    if j == 0 || j > scheme.stages() {
        return Err(Error::InvalidArgument(format!(
            "stage {j} out of range 1..={} for {}",
            scheme.stages(),
            scheme.name
        )));
    }
    let nodes = node_potentials(problem, &scheme.nodes, t0, h)?;
    combine(&scheme.coeffs[j - 1], &nodes, t0)
}

fn check_step_input(field: &Field, problem: &Problem, h: f64) -> Result<()> {
    if field.frame != Frame::Rotating {
        return Err(Error::InvalidArgument(
            "steppers integrate rotating-frame fields".into(),
        ));
    }
    if !field.grid().same_geometry(&problem.grid) {
        return Err(Error::GridMismatch);
    }
    if !h.is_finite() || h == 0.0 {
        return Err(Error::InvalidArgument(format!("step size must be finite and nonzero, got {h}")));
    }
    Ok(())
}

fn check_finite(field: &Field, stage: impl FnOnce() -> String, t0: f64) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { stage: stage(), t0 })
    }
}

/// One step of a CFQM scheme, each stage solved by `splitting`.
pub fn cfqm_step(
    field: &Field,
    t0: f64,
    h: f64,
    cfqm: &CfqmScheme,
    splitting: &SplittingScheme,
    problem: &Problem,
) -> Result<(Field, StepReport)> {
    check_step_input(field, problem, h)?;
    let meter = Meter::start();
    let nodes = node_potentials(problem, &cfqm.nodes, t0, h)?;
    let theta = problem.trap.theta;
    let mut out = field.clone();
    for (j, row) in cfqm.coeffs.iter().enumerate() {
        let b: f64 = row.iter().sum();
        let p = combine(row, &nodes, t0)?;
        apply_splitting_in_place(&mut out, splitting, h, b, &p, theta)?;
        check_finite(&out, || format!("{} stage {}", cfqm.name, j + 1), t0)?;
    }
    out.time = t0 + h;
    Ok((out, meter.finish(cfqm.stages())))
}

fn multiply_phase(field: &mut Field, potential: &PotentialField, tau: f64) {
    for (z, p) in field.values_mut().iter_mut().zip(potential.values()) {
        *z *= Complex64::cis(-tau * p);
    }
}

/// One step of the modified sixth-order scheme: two pointwise stages around
/// two autonomous stages of duration `h/2`.
pub fn bbk_step(
    field: &Field,
    t0: f64,
    h: f64,
    splitting: &SplittingScheme,
    problem: &Problem,
) -> Result<(Field, StepReport)> {
    check_step_input(field, problem, h)?;
    let meter = Meter::start();
    let c = bbk_coefficients();
    let nodes = node_potentials(problem, &c.nodes, t0, h)?;
    let rev = |w: [f64; 3]| [w[2], w[1], w[0]];
    // the double commutator [[-Laplacian/2, D], D] is minus the squared gradient of D
    let correction = modified_potential(&problem.grid, &problem.schedule, &problem.trap, t0, h)?;

    let mut first = combine(&c.outer, &nodes, t0)?;
    first.add_scaled(-h * h, &correction)?;
    let mut last = combine(&rev(c.outer), &nodes, t0)?;
    last.add_scaled(-h * h, &correction)?;
    let inner_a = combine(&c.inner, &nodes, t0)?;
    let inner_b = combine(&rev(c.inner), &nodes, t0)?;

    let theta = problem.trap.theta;
    let mut out = field.clone();
    multiply_phase(&mut out, &first, h);
    check_finite(&out, || "bbk stage 1".into(), t0)?;
    apply_splitting_in_place(&mut out, splitting, 0.5 * h, 1.0, &inner_a, theta)?;
    check_finite(&out, || "bbk stage 2".into(), t0)?;
    apply_splitting_in_place(&mut out, splitting, 0.5 * h, 1.0, &inner_b, theta)?;
    check_finite(&out, || "bbk stage 3".into(), t0)?;
    multiply_phase(&mut out, &last, h);
    check_finite(&out, || "bbk stage 4".into(), t0)?;
    out.time = t0 + h;
    Ok((out, meter.finish(4)))
}

/// One step of any method.
pub fn step(field: &Field, t0: f64, h: f64, method: &Method, problem: &Problem) -> Result<(Field, StepReport)> {
    match &method.outer {
        Outer::Cfqm(s) => cfqm_step(field, t0, h, s, &method.splitting, problem),
        Outer::Bbk => bbk_step(field, t0, h, &method.splitting, problem),
    }
}

/// Step indices at which snapshots are due, nearest step to each requested time.
fn snapshot_steps(times: &[f64], t0: f64, t_end: f64, n_steps: usize) -> Result<Vec<usize>> {
    let h = (t_end - t0) / n_steps as f64;
    let tol = 1e-12 * (t_end - t0).abs().max(1.0);
    times
        .iter()
        .map(|&t| {
            if !(t >= t0 - tol && t <= t_end + tol) {
                return Err(Error::InvalidArgument(format!(
                    "snapshot time {t} outside [{t0}, {t_end}]"
                )));
            }
            Ok((((t - t0) / h).round() as usize).min(n_steps))
        })
        .collect()
}

/// Integrates from `t0` to `t_end` with `n_steps` uniform steps, calling
/// `on_snapshot` with the state at the step nearest each requested time.
/// Snapshots already emitted stay emitted when a later step fails.
pub fn evolve_with_snapshots(
    field: &Field,
    t0: f64,
    t_end: f64,
    n_steps: usize,
    method: &Method,
    problem: &Problem,
    snapshot_times: &[f64],
    mut on_snapshot: impl FnMut(&Field) -> Result<()>,
) -> Result<(Field, StepReport)> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!("need t_end > t0, got {t0} to {t_end}")));
    }
    let due = snapshot_steps(snapshot_times, t0, t_end, n_steps)?;
    let h = (t_end - t0) / n_steps as f64;
    let mut report = StepReport::default();
    let mut state = field.clone();
    state.time = t0;
    for n in 0..=n_steps {
        for _ in due.iter().filter(|&&d| d == n) {
            on_snapshot(&state)?;
        }
        if n == n_steps {
            break;
        }
        let tn = t0 + n as f64 * h;
        let (next, r) = step(&state, tn, h, method, problem)?;
        report.merge(&r);
        state = next;
    }
    state.time = t_end;
    Ok((state, report))
}

pub fn evolve(
    field: &Field,
    t0: f64,
    t_end: f64,
    n_steps: usize,
    method: &Method,
    problem: &Problem,
) -> Result<(Field, StepReport)> {
    evolve_with_snapshots(field, t0, t_end, n_steps, method, problem, &[], |_| Ok(()))
}
