use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rgpe::checks::{gradient_check as run_gradient_check, oracle_checks};
use rgpe::config::RunConfig;
use rgpe::harness::{self, density_zeros, write_csv, ConvergenceRow};
use rgpe::integrators::{bbk_coefficients, cfqm_registry, Method, CFQM_NAMES, METHOD_NAMES};
use rgpe::oracle::observed_order;
use rgpe::splitting::{splitting_registry, SPLITTING_NAMES};
use rgpe::Error;

use crate::RunArgs;

/// Exit categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation = 2,
    Runtime = 3,
    Divergence = 4,
    CheckFailed = 5,
}

#[derive(Debug)]
pub struct Failure {
    kind: Kind,
    msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Validation,
            msg: msg.into(),
        }
    }

    fn new(kind: Kind, msg: impl Into<String>) -> Self {
        Failure { kind, msg: msg.into() }
    }

    pub fn code(&self) -> u8 {
        self.kind as u8
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::NonFinite { .. } => Kind::Divergence,
            Error::Io(_) | Error::Format(_) | Error::ReferenceUnstable(_) | Error::GridMismatch => Kind::Runtime,
            _ => Kind::Validation,
        };
        Failure::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(Kind::Runtime, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn resolve(a: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match a.config_file.as_ref().or(a.config.as_ref()) {
        Some(path) => {
            let cfg = RunConfig::load(path).map_err(|e| match e {
                Error::Io(io) => Failure::new(Kind::Runtime, format!("{}: {io}", path.display())),
                e => e.into(),
            })?;
            if let Some(d) = a.dim.filter(|&d| d as usize != cfg.dim) {
                return Err(Failure::usage(format!(
                    "--dim {d} conflicts with dim = {} in {}",
                    cfg.dim,
                    path.display()
                )));
            }
            cfg
        }
        None if a.dim == Some(3) => RunConfig::test_equation_3d(),
        None => RunConfig::default(),
    };
    if let Some(theta) = a.theta {
        cfg.theta = theta;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(times) = &a.snapshot_times {
        cfg.snapshot_times = times.clone();
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    cfg.output_dir = Some(output_dir(a, &cfg));
    Ok(cfg)
}

fn output_dir(a: &RunArgs, cfg: &RunConfig) -> PathBuf {
    a.out
        .clone()
        .or_else(|| std::env::var_os("RGPE_OUT").map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("rgpe-out"))
}

/// Uses `--steps` as a list of step counts for a study.
fn study_steps(a: &RunArgs, cfg: &mut RunConfig) {
    if a.steps.is_empty() {
        return;
    }
    let mut ns = a.steps.clone();
    ns.sort_unstable();
    ns.dedup();
    cfg.stepsizes = ns.iter().map(|&n| (cfg.t_end - cfg.t0) / n as f64).collect();
}

fn prepare(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    cfg.validate()?;
    let out = cfg.output_dir.clone().expect("resolved");
    fs::create_dir_all(&out).map_err(|e| Failure::new(Kind::Runtime, format!("{}: {e}", out.display())))?;
    fs::write(out.join("effective.cfg"), cfg.to_toml())?;
    Ok(out)
}

fn methods(cfg: &RunConfig) -> Result<Vec<Method>, Failure> {
    Ok(cfg.methods.iter().map(|m| Method::parse(m)).collect::<Result<_, _>>()?)
}

fn write_rows(rows: &[ConvergenceRow], path: &Path) -> Outcome {
    write_csv(rows, fs::File::create(path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_orders(rows: &[ConvergenceRow], methods: &[Method]) {
    for m in methods {
        let name = m.descriptor();
        let (hs, es): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.method == name).map(|r| (r.h, r.l2_error)).unzip();
        let order = observed_order(&hs, &es).map_or("n/a".to_string(), |p| format!("{p:.2}"));
        println!("{name:<14} nominal order {}  observed {order}", m.order());
    }
}

fn divergence_check(rows: &[ConvergenceRow]) -> Outcome {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.diverged)
        .map(|r| format!("{} at h = {}", r.method, r.h))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(Kind::Divergence, format!("diverged: {}", bad.join(", "))))
    }
}

pub fn simulate(a: &RunArgs) -> Outcome {
    let mut cfg = resolve(a)?;
    match a.methods.as_slice() {
        [] => {}
        [m] => cfg.method = m.clone(),
        _ => return Err(Failure::usage("simulate takes a single method")),
    }
    match a.steps.as_slice() {
        [] => {}
        [n] => cfg.n_steps = *n,
        _ => return Err(Failure::usage("simulate takes a single step count")),
    }
    let out = prepare(&cfg)?;
    let run = harness::simulate(&cfg, Some(&out))?;
    println!(
        "{} steps of {} on [{}, {}]: {} transform pairs, {:.3} s, norm drift {:.2e}",
        cfg.n_steps,
        cfg.method,
        cfg.t0,
        cfg.t_end,
        run.report.transform_pairs_used,
        run.report.wall_time.as_secs_f64(),
        run.norm_drift
    );
    for s in &run.snapshots {
        let zeros = s
            .window
            .as_ref()
            .map(|w| format!(", {} density zeros in window", density_zeros(w).len()))
            .unwrap_or_default();
        println!("t = {:.3}{zeros}", s.field.time);
        for p in &s.paths {
            println!("  wrote {}", p.display());
        }
    }
    Ok(())
}

pub fn converge(a: &RunArgs) -> Outcome {
    let mut cfg = resolve(a)?;
    study_steps(a, &mut cfg);
    let out = prepare(&cfg)?;
    let ms = methods(&cfg)?;
    let study = harness::convergence_study(&cfg, &ms, &cfg.stepsizes)?;
    println!(
        "reference {} with {} steps, self-check {:.2e}",
        study.reference.method, study.reference.n_steps, study.reference.self_check
    );
    print_orders(&study.rows, &ms);
    write_rows(&study.rows, &out.join("convergence.csv"))?;
    divergence_check(&study.rows)
}

pub fn self_converge(a: &RunArgs) -> Outcome {
    let mut cfg = resolve(a)?;
    study_steps(a, &mut cfg);
    let out = prepare(&cfg)?;
    let ms = methods(&cfg)?;
    let mut rows = Vec::new();
    for m in &ms {
        rows.extend(harness::self_convergence(&cfg, m, &cfg.stepsizes)?.rows);
    }
    print_orders(&rows, &ms);
    write_rows(&rows, &out.join("self_convergence.csv"))?;
    divergence_check(&rows)
}

pub fn oracle_check(seed: u64) -> Outcome {
    let lines = oracle_checks(seed)?;
    for l in &lines {
        println!("{l}");
    }
    let failed = lines.iter().filter(|l| !l.passed()).count();
    if failed > 0 {
        return Err(Failure::new(Kind::CheckFailed, format!("{failed} oracle checks failed")));
    }
    Ok(())
}

pub fn gradient_check(a: &RunArgs, samples: usize) -> Outcome {
    let cfg = resolve(a)?;
    cfg.validate()?;
    if samples == 0 {
        return Err(Failure::usage("--samples must be positive"));
    }
    let r = run_gradient_check(&cfg, samples)?;
    println!("samples {}", r.samples);
    println!("max relative deviation {:.3e} (bound 1e-6)", r.max_relative);
    println!("isotropic correction max {:e} (must be 0)", r.isotropic_correction);
    if r.max_relative < 1e-6 && r.isotropic_correction == 0.0 {
        Ok(())
    } else {
        Err(Failure::new(Kind::CheckFailed, "gradient check failed"))
    }
}

pub fn list_schemes() -> Outcome {
    println!("splittings");
    for name in SPLITTING_NAMES {
        let s = splitting_registry(name)?;
        println!(
            "  {:<8} order {}  pairs {:>2}  transform pairs {:>2}  checksum {:016x}",
            s.name,
            s.order,
            s.pairs.len(),
            s.kinetic_stages(),
            s.checksum()
        );
    }
    println!("cfqm");
    for name in CFQM_NAMES {
        println!("  {}", cfqm_registry(name)?);
    }
    let b = bbk_coefficients();
    println!("  {:<8} order 6  J 4  K 3  checksum {:016x}", "bbk", b.checksum());
    println!("methods");
    for name in METHOD_NAMES {
        let m = Method::parse(name)?;
        println!(
            "  {:<14} order {}  transform pairs per step {}",
            name,
            m.order(),
            m.pairs_per_step()
        );
    }
    Ok(())
}
