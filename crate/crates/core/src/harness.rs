//! Convergence studies against a fine reference, self-convergence, and plain
//! simulation runs with snapshots.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{RunConfig, SnapshotQuantity};
use crate::error::{Error, Result};
use crate::integrators::{evolve, evolve_with_snapshots, Method, StepReport};
use crate::model::{rotation_matrix, RotationSchedule};
use crate::oracle::observed_order;
use crate::spectral::{forward_transform, l2_error, l2_norm, write_field, Field, Grid};

/// Error recorded for runs that produced non-finite values.
pub const DIVERGED: f64 = f64::INFINITY;

pub const CSV_HEADER: [&str; 6] = ["method", "h", "n_steps", "l2_error", "transform_pairs", "wall_ms"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub method: String,
    pub h: f64,
    pub n_steps: usize,
    /// Absolute discrete L2 error at the final time, or [`DIVERGED`].
    pub l2_error: f64,
    pub transform_pairs: u64,
    pub wall_time: Duration,
    pub diverged: bool,
}

impl ConvergenceRow {
    fn from_run(method: &Method, h: f64, n_steps: usize, run: Result<(Field, StepReport)>, exact: &Field) -> Result<Self> {
        let (l2, report, diverged) = match run {
            Ok((u, report)) => (l2_error(&u, exact)?, report, false),
            Err(Error::NonFinite { .. }) => (DIVERGED, StepReport::default(), true),
            Err(e) => return Err(e),
        };
        let transform_pairs = if diverged {
            // the run stopped early; report the cost it would have had
            method.pairs_per_step() * n_steps as u64
        } else {
            report.transform_pairs_used
        };
        Ok(ConvergenceRow {
            method: method.descriptor(),
            h,
            n_steps,
            l2_error: l2,
            transform_pairs,
            wall_time: report.wall_time,
            diverged,
        })
    }
}

/// Fine-step solution the study errors are measured against.
#[derive(Debug, Clone)]
pub struct Reference {
    pub field: Field,
    pub method: String,
    pub n_steps: usize,
    pub norm: f64,
    /// Deviation between the reference and a run with twice as many steps.
    pub self_check: f64,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub rows: Vec<ConvergenceRow>,
    pub reference: Reference,
}

impl Study {
    /// Rows of one method, largest step first.
    pub fn method_rows<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ConvergenceRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

fn check_descending(stepsizes: &[f64]) -> Result<()> {
    if stepsizes.is_empty() {
        return Err(Error::Degenerate("no step sizes given".into()));
    }
    if stepsizes.windows(2).any(|w| w[1] == w[0]) {
        return Err(Error::Degenerate("repeated step size".into()));
    }
    if stepsizes.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("step sizes must be given largest first".into()));
    }
    Ok(())
}

/// Reference at `config.reference_steps`, or ten times the finest resolution
/// of `stepsizes`, cross-checked against a run with twice as many steps.
pub fn compute_reference(config: &RunConfig, stepsizes: &[f64]) -> Result<Reference> {
    let problem = config.problem()?;
    let u0 = config.initial_field(&problem.grid)?;
    let method = Method::parse(&config.reference_method)?;
    let finest = stepsizes.iter().map(|&h| config.steps_for(h)).collect::<Result<Vec<_>>>()?;
    let n_min = finest.iter().copied().max().unwrap_or(config.n_steps);
    let n_ref = if config.reference_steps > 0 {
        config.reference_steps
    } else {
        10 * n_min
    };
    if n_ref < 4 * n_min + 1 {
        return Err(Error::InvalidArgument(format!(
            "reference uses {n_ref} steps; it needs more than four times the finest study resolution ({n_min} steps)"
        )));
    }
    let workers = config.worker_count().min(2);
    let (coarse, fine) = pool(workers)?.install(|| {
        rayon::join(
            || evolve(&u0, config.t0, config.t_end, n_ref, &method, &problem),
            || evolve(&u0, config.t0, config.t_end, 2 * n_ref, &method, &problem),
        )
    });
    let map_err = |e: Error| match e {
        Error::NonFinite { .. } => Error::ReferenceUnstable(format!("reference diverged: {e}")),
        e => e,
    };
    let coarse = coarse.map_err(map_err)?.0;
    let fine = fine.map_err(map_err)?.0;
    let self_check = l2_error(&coarse, &fine)?;
    if !(self_check < config.reference_tolerance) {
        return Err(Error::ReferenceUnstable(format!(
            "{} with {n_ref} and {} steps differ by {self_check:.3e} (tolerance {:.1e})",
            method,
            2 * n_ref,
            config.reference_tolerance
        )));
    }
    Ok(Reference {
        norm: l2_norm(&coarse),
        field: coarse,
        method: method.descriptor(),
        n_steps: n_ref,
        self_check,
    })
}

/// Runs every method at every step size and measures the final-time error
/// against a shared reference. Rows are ordered by method as given, then by
/// decreasing step size.
pub fn convergence_study(config: &RunConfig, methods: &[Method], stepsizes: &[f64]) -> Result<Study> {
    check_descending(stepsizes)?;
    let reference = compute_reference(config, stepsizes)?;
    let rows = measure_against(config, methods, stepsizes, &reference)?;
    Ok(Study { rows, reference })
}

/// Rows for `methods` against an existing reference. The caller is
/// responsible for the reference being far more accurate than the rows.
pub fn measure_against(
    config: &RunConfig,
    methods: &[Method],
    stepsizes: &[f64],
    reference: &Reference,
) -> Result<Vec<ConvergenceRow>> {
    check_descending(stepsizes)?;
    run_grid(config, methods, stepsizes, |_, _| Ok(reference.field.clone()))
}

fn run_grid(
    config: &RunConfig,
    methods: &[Method],
    stepsizes: &[f64],
    exact: impl Fn(&Method, usize) -> Result<Field> + Sync,
) -> Result<Vec<ConvergenceRow>> {
    let problem = config.problem()?;
    let u0 = config.initial_field(&problem.grid)?;
    let jobs: Vec<(usize, &Method, f64, usize)> = methods
        .iter()
        .enumerate()
        .flat_map(|(i, m)| stepsizes.iter().map(move |&h| (i, m, h)))
        .map(|(i, m, h)| Ok((i, m, h, config.steps_for(h)?)))
        .collect::<Result<_>>()?;
    let mut rows: Vec<(usize, ConvergenceRow)> = pool(config.worker_count())?.install(|| {
        jobs.par_iter()
            .map(|&(i, m, h, n)| {
                let run = evolve(&u0, config.t0, config.t_end, n, m, &problem);
                let exact = exact(m, n)?;
                Ok((i, ConvergenceRow::from_run(m, h, n, run, &exact)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|(i, a), (j, b)| i.cmp(j).then(b.h.total_cmp(&a.h)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

#[derive(Debug, Clone)]
pub struct SelfConvergence {
    pub rows: Vec<ConvergenceRow>,
    pub order: f64,
}

/// Errors of `method` at each step size against the same method at a tenth
/// of that step size.
pub fn self_convergence(config: &RunConfig, method: &Method, stepsizes: &[f64]) -> Result<SelfConvergence> {
    if stepsizes.len() < 4 {
        return Err(Error::Degenerate(format!(
            "self-convergence needs at least 4 step sizes, got {}",
            stepsizes.len()
        )));
    }
    check_descending(stepsizes)?;
    let problem = config.problem()?;
    let u0 = config.initial_field(&problem.grid)?;
    let rows = run_grid(config, std::slice::from_ref(method), stepsizes, |m, n| {
        evolve(&u0, config.t0, config.t_end, 10 * n, m, &problem)
            .map(|(u, _)| u)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::ReferenceUnstable(format!("fine run diverged: {e}")),
                e => e,
            })
    })?;
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    let order = observed_order(&hs, &errs)?;
    Ok(SelfConvergence { rows, order })
}

pub fn write_csv(rows: &[ConvergenceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.h.to_string(),
            r.n_steps.to_string(),
            format!("{:e}", r.l2_error),
            r.transform_pairs.to_string(),
            format!("{:.3}", r.wall_time.as_secs_f64() * 1e3),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Square window `[-half, half]^2` sampled with the grid spacing, either in
/// the rotating frame or mapped to lab coordinates `x = R(t) xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub axis: Vec<f64>,
    /// Row-major over (first axis, second axis).
    pub values: Vec<Complex64>,
}

/// Trigonometric interpolation of a 2-D field on a square window.
pub fn sample_window(field: &Field, half: f64, lab: Option<&RotationSchedule>) -> Result<WindowSample> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument("window sampling needs a 2-D field".into()));
    }
    let dx = grid.spacing()[0];
    let m = (half / dx).floor() as i64;
    let axis: Vec<f64> = (-m..=m).map(|i| i as f64 * dx).collect();
    let rot = lab.map(|s| rotation_matrix(s, field.time, 2));
    let spec = forward_transform(field);
    let values = axis
        .iter()
        .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
        .map(|(a, b)| {
            let xi = match &rot {
                // xi = R^T x
                Some(r) => [r[0][0] * a + r[1][0] * b, r[0][1] * a + r[1][1] * b],
                None => [a, b],
            };
            interpolate(grid, spec.coeffs(), xi)
        })
        .collect();
    Ok(WindowSample { axis, values })
}

fn interpolate(grid: &Grid, coeffs: &[Complex64], xi: [f64; 2]) -> Complex64 {
    let (n0, n1) = (grid.sizes()[0], grid.sizes()[1]);
    let hw = grid.half_widths();
    let e0: Vec<Complex64> = grid
        .wavenumbers(0)
        .iter()
        .map(|k| Complex64::from_polar(1.0, k * (xi[0] + hw[0])))
        .collect();
    let e1: Vec<Complex64> = grid
        .wavenumbers(1)
        .iter()
        .map(|k| Complex64::from_polar(1.0, k * (xi[1] + hw[1])))
        .collect();
    let sum: Complex64 = coeffs
        .chunks(n1)
        .zip(&e0)
        .map(|(row, a)| a * row.iter().zip(&e1).map(|(c, b)| c * b).sum::<Complex64>())
        .sum();
    sum / (n0 * n1) as f64
}

/// Grid points of the window that are isolated density minima: below every
/// neighbour, under a fifth of the neighbourhood peak, and inside the cloud
/// (neighbourhood peak above 1% of the window peak).
pub fn density_zeros(sample: &WindowSample) -> Vec<[f64; 2]> {
    let n = sample.axis.len();
    let rho: Vec<f64> = sample.values.iter().map(|z| z.norm_sqr()).collect();
    let peak = rho.iter().copied().fold(0.0, f64::max);
    let mut zeros = Vec::new();
    for i in 1..n.saturating_sub(1) {
        for j in 1..n - 1 {
            let c = rho[i * n + j];
            let neighbours = (-1i64..=1)
                .flat_map(|a| (-1i64..=1).map(move |b| (a, b)))
                .filter(|&ab| ab != (0, 0))
                .map(|(a, b)| rho[(i as i64 + a) as usize * n + (j as i64 + b) as usize]);
            let (lo, hi) = neighbours.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if c < lo && c < 0.2 * hi && hi > 0.01 * peak {
                zeros.push([sample.axis[i], sample.axis[j]]);
            }
        }
    }
    zeros
}

fn write_window(sample: &WindowSample, quantity: SnapshotQuantity, mut out: impl Write) -> Result<()> {
    let axis: Vec<String> = sample.axis.iter().map(|a| format!("{a}")).collect();
    writeln!(out, "# axis {}", axis.join(" "))?;
    let n = sample.axis.len();
    for row in sample.values.chunks(n) {
        let cells: Vec<String> = match quantity {
            SnapshotQuantity::Density => row.iter().map(|z| format!("{:.10e}", z.norm_sqr())).collect(),
            SnapshotQuantity::RealImag => row.iter().map(|z| format!("{:.10e} {:.10e}", z.re, z.im)).collect(),
        };
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: Field,
    /// Plain-text window, present for two-dimensional runs.
    pub window: Option<WindowSample>,
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub snapshots: Vec<Snapshot>,
    pub final_field: Field,
    /// `|norm(T) / norm(t0) - 1|`.
    pub norm_drift: f64,
    pub report: StepReport,
}

/// Evolves the configured initial state with `config.method`, writing a
/// binary dump per snapshot time, plus a window text file in 2-D, when `out`
/// is given.
pub fn simulate(config: &RunConfig, out: Option<&Path>) -> Result<SimulationRun> {
    let problem = config.problem()?;
    let method = Method::parse(&config.method)?;
    let u0 = config.initial_field(&problem.grid)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let lab = config.snapshot_lab_frame.then_some(&problem.schedule);
    let mut snapshots = Vec::new();
    let (u, report) = evolve_with_snapshots(
        &u0,
        config.t0,
        config.t_end,
        config.n_steps,
        &method,
        &problem,
        &config.snapshot_times,
        |f| {
            let window = match config.dim {
                2 => Some(sample_window(f, config.snapshot_window, lab)?),
                _ => None,
            };
            let mut paths = Vec::new();
            if let Some(dir) = out {
                let stem = format!("snapshot_t{:08.3}", f.time);
                let bin = dir.join(format!("{stem}.rgpe"));
                write_field(f, fs::File::create(&bin)?)?;
                paths.push(bin);
                if let Some(w) = &window {
                    let txt = dir.join(format!("{stem}.txt"));
                    write_window(w, config.snapshot_quantity, fs::File::create(&txt)?)?;
                    paths.push(txt);
                }
            }
            snapshots.push(Snapshot {
                field: f.clone(),
                window,
                paths,
            });
            Ok(())
        },
    )?;
    let norm_drift = (l2_norm(&u) / l2_norm(&u0) - 1.0).abs();
    Ok(SimulationRun {
        snapshots,
        final_field: u,
        norm_drift,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Frame;

    fn small(theta: f64) -> RunConfig {
        RunConfig {
            half_widths: vec![8.0, 8.0],
            sizes: vec![32, 32],
            t_end: 1.0,
            theta,
            workers: 2,
            reference_steps: 400,
            ..RunConfig::default()
        }
    }

    #[test]
    fn rows_are_ordered_and_costed() {
        let cfg = small(1.0);
        let methods: Vec<Method> = ["cf2+strang", "bbk+rkn116"].iter().map(|m| Method::parse(m).unwrap()).collect();
        let hs = [0.25, 0.125, 0.0625];
        let study = convergence_study(&cfg, &methods, &hs).unwrap();
        assert_eq!(study.rows.len(), 6);
        for (r, (m, h)) in study.rows.iter().zip(methods.iter().flat_map(|m| hs.iter().map(move |h| (m, h)))) {
            assert_eq!((&r.method, r.h), (&m.descriptor(), *h));
            assert_eq!(r.transform_pairs, m.pairs_per_step() * r.n_steps as u64);
            assert!(!r.diverged);
        }
        // halving h for the second-order pair divides the error by about 4
        let e: Vec<f64> = study.method_rows("cf2+strang").map(|r| r.l2_error).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
        }
        assert!(study.reference.self_check < 1e-11);
    }

    #[test]
    fn csv_layout_is_deterministic() {
        let cfg = small(0.0);
        let methods = [Method::parse("cf4+rkn74").unwrap()];
        let a = convergence_study(&cfg, &methods, &[0.5, 0.25]).unwrap();
        let b = convergence_study(&cfg, &methods, &[0.5, 0.25]).unwrap();
        let text = |rows: &[ConvergenceRow]| {
            let mut buf = Vec::new();
            write_csv(rows, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let strip = |s: String| s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
        let (ta, tb) = (text(&a.rows), text(&b.rows));
        assert!(ta.starts_with("method,h,n_steps,l2_error,transform_pairs,wall_ms\n"));
        assert_eq!(strip(ta), strip(tb));
    }

    #[test]
    fn study_inputs_validated() {
        let cfg = small(0.0);
        let m = [Method::parse("cf2+strang").unwrap()];
        assert!(matches!(convergence_study(&cfg, &m, &[0.25, 0.5]), Err(Error::InvalidArgument(_))));
        assert!(matches!(convergence_study(&cfg, &m, &[0.25, 0.25]), Err(Error::Degenerate(_))));
        // a reference coarser than a quarter of the finest step is refused
        let coarse = RunConfig { reference_steps: 8, ..small(0.0) };
        assert!(convergence_study(&coarse, &m, &[0.5]).is_err());
    }

    #[test]
    fn unstable_reference_aborts() {
        let cfg = RunConfig { reference_tolerance: 1e-30, ..small(1.0) };
        let m = [Method::parse("cf2+strang").unwrap()];
        assert!(matches!(convergence_study(&cfg, &m, &[0.5]), Err(Error::ReferenceUnstable(_))));
    }

    #[test]
    fn divergence_is_flagged_not_dropped() {
        // gamma^2 overflows, so the potential phase is not finite
        let cfg = RunConfig { gamma: vec![1e160, 1.0], ..small(0.0) };
        let m = [Method::parse("cf2+strang").unwrap()];
        let rows = run_grid(&cfg, &m, &[0.5], |_, _| Ok(cfg.initial_field(&cfg.grid().unwrap()).unwrap())).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].diverged && rows[0].l2_error == DIVERGED);
    }

    #[test]
    fn self_convergence_inputs() {
        let cfg = small(1.0);
        let m = Method::parse("bbk+strang").unwrap();
        assert!(matches!(self_convergence(&cfg, &m, &[0.5, 0.25, 0.125]), Err(Error::Degenerate(_))));
        assert!(matches!(
            self_convergence(&cfg, &m, &[0.5, 0.25, 0.25, 0.125]),
            Err(Error::Degenerate(_))
        ));
        // the splitting caps the modified scheme at second order
        let sc = self_convergence(&cfg, &m, &[0.25, 0.125, 0.0625, 0.03125]).unwrap();
        assert!((sc.order - 2.0).abs() < 0.2, "{}", sc.order);
    }

    #[test]
    fn window_interpolation_hits_grid_values() {
        let cfg = small(0.0);
        let grid = cfg.grid().unwrap();
        let f = Field::from_fn(grid, Frame::Rotating, 0.0, |x| {
            Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp())
        });
        let w = sample_window(&f, 3.0, None).unwrap();
        let n = w.axis.len();
        assert_eq!(n % 2, 1);
        let mid = n / 2;
        let exact = |a: f64, b: f64| Complex64::new((-(a * a + 2.0 * b * b)).exp(), a * (-(a * a + b * b)).exp());
        for (i, j) in [(mid, mid), (0, n - 1), (mid + 1, mid - 2)] {
            let (a, b) = (w.axis[i], w.axis[j]);
            assert!((w.values[i * n + j] - exact(a, b)).norm() < 1e-10);
        }
        // a quarter turn of the lab map swaps the roles of the axes
        let sched = RotationSchedule::linear(std::f64::consts::FRAC_PI_2);
        let mut g = f.clone();
        g.time = 1.0;
        let lab = sample_window(&g, 3.0, Some(&sched)).unwrap();
        for (i, j) in [(mid + 2, mid - 1), (mid - 3, mid + 1)] {
            let (a, b) = (w.axis[i], w.axis[j]);
            // x = R xi with R = [[0, 1], [-1, 0]], so xi = (-b, a)
            assert!((lab.values[i * n + j] - exact(-b, a)).norm() < 1e-10);
        }
    }

    #[test]
    fn initial_vortex_has_one_zero() {
        let cfg = RunConfig {
            t_end: 0.1,
            n_steps: 1,
            snapshot_times: vec![0.0],
            ..RunConfig::vortex()
        };
        let dir = tempfile::tempdir().unwrap();
        let run = simulate(&cfg, Some(dir.path())).unwrap();
        let zeros = density_zeros(run.snapshots[0].window.as_ref().unwrap());
        assert_eq!(zeros, vec![[0.0, 0.0]]);
        assert_eq!(run.snapshots[0].paths.len(), 2);
        let back = crate::spectral::read_field(fs::File::open(&run.snapshots[0].paths[0]).unwrap()).unwrap();
        assert_eq!(back.values(), run.snapshots[0].field.values());
        let text = fs::read_to_string(&run.snapshots[0].paths[1]).unwrap();
        assert!(text.starts_with("# axis "));
    }

    #[test]
    fn three_dimensional_run_writes_dumps_only() {
        let cfg = RunConfig {
            sizes: vec![8, 8, 8],
            t_end: 0.5,
            n_steps: 4,
            snapshot_times: vec![0.5],
            ..RunConfig::test_equation_3d()
        };
        let dir = tempfile::tempdir().unwrap();
        let run = simulate(&cfg, Some(dir.path())).unwrap();
        assert!(run.snapshots[0].window.is_none());
        assert_eq!(run.snapshots[0].paths.len(), 1);
        assert!(run.norm_drift < 1e-12);
    }
}
