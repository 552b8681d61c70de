//! Self-contained verification reports: the dense and classical oracles and
//! the finite-difference check of the analytic trap gradient.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::Result;
use crate::integrators::{step, Method};
use crate::model::{
    gauss_nodes3, grad_potential_rotating, initial_gaussian, modified_potential, rotation_matrix, Problem,
    RotationSchedule, TrapParams,
};
use crate::oracle::{
    alphas_from_samples, brute_force_midpoint, classical_transform_check, dense_reference_with, field_to_vector,
    magnus_omega6, magnus_omega6_modified, max_abs, observed_order, vector_l2_error, CMatrix, CVector,
    BRUTE_FORCE_STEPS,
};
use crate::spectral::make_grid;

/// One line of the oracle table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub measured: f64,
    /// Accepted interval for `measured`.
    pub accept: (f64, f64),
}

impl CheckLine {
    fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        CheckLine {
            name: name.into(),
            measured,
            accept: (f64::NEG_INFINITY, bound),
        }
    }

    pub fn passed(&self) -> bool {
        self.measured >= self.accept.0 && self.measured < self.accept.1
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let want = if self.accept.0.is_finite() {
            format!("[{}, {}]", self.accept.0, self.accept.1)
        } else {
            format!("< {:e}", self.accept.1)
        };
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{:<48} {:>10.3e}  {:<14} {verdict}", self.name, self.measured, want)
    }
}

/// Random Hermitian matrix with entries of size about `1/sqrt(n)`.
pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * Complex64::new(0.5 / (n as f64).sqrt(), 0.0)
}

fn magnus_local_order(seed: u64) -> Result<f64> {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = random_hermitian(n, &mut rng);
    let h1 = random_hermitian(n, &mut rng);
    let h2 = random_hermitian(n, &mut rng);
    let ham = |t: f64| &h0 + &h1 * Complex64::new(t.sin(), 0.0) + &h2 * Complex64::new((2.0 * t).cos(), 0.0);
    let u0 = CVector::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let t0 = 0.3;
    let hs = [0.4, 0.2, 0.1];
    let errs = hs
        .iter()
        .map(|&h| {
            let s: Vec<CMatrix> = gauss_nodes3().iter().map(|c| ham(t0 + c * h)).collect();
            let al = alphas_from_samples(h, [&s[0], &s[1], &s[2]]);
            let u = magnus_omega6(&al)?.exp() * &u0;
            let v = brute_force_midpoint(ham, &u0, t0, h, BRUTE_FORCE_STEPS);
            Ok((u - v).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    observed_order(&hs, &errs)
}

fn commuting_deviation(seed: u64) -> Result<f64> {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let diag: Vec<CMatrix> = (0..3)
            .map(|_| CMatrix::from_diagonal(&CVector::from_fn(n, |_, _| Complex64::new(rng.gen_range(-2.0..2.0), 0.0))))
            .collect();
        let h = rng.gen_range(0.05..0.5);
        let al = alphas_from_samples(h, [&diag[0], &diag[1], &diag[2]]);
        worst = worst.max(max_abs(&(magnus_omega6(&al)? - magnus_omega6_modified(&al)?)));
    }
    Ok(worst)
}

fn dense_single_step(name: &str) -> Result<f64> {
    let grid = make_grid(2, &[4.0, 4.0], &[8, 8])?;
    let trap = TrapParams::new(vec![0.8, 1.2], 0.0)?;
    let p = Problem::new(grid.clone(), RotationSchedule::linear(0.5), trap)?;
    let f = initial_gaussian(&grid, &[1.1, 0.9], 0.0)?;
    let (t0, h) = (0.3, 1e-3);
    let r = dense_reference_with(&field_to_vector(&f), &p, t0, h, 4)?;
    let (u, _) = step(&f, t0, h, &Method::parse(name)?, &p)?;
    Ok(vector_l2_error(&grid, &r, &field_to_vector(&u)))
}

/// Runs every oracle comparison; `seed` drives the random test matrices.
pub fn oracle_checks(seed: u64) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    for k in 0..3 {
        let s = magnus_local_order(seed.wrapping_add(k))?;
        lines.push(CheckLine {
            name: format!("sixth-order Magnus local order (seed {})", seed.wrapping_add(k)),
            measured: s,
            accept: (6.7, 7.3),
        });
    }
    lines.push(CheckLine::below(
        "modified vs full Magnus, commuting samples",
        commuting_deviation(seed)?,
        1e-13,
    ));
    for name in ["cf6af+rkn116", "bbk+rkn116"] {
        lines.push(CheckLine::below(
            format!("{name} single step vs dense propagator"),
            dense_single_step(name)?,
            1e-8,
        ));
    }
    let trap = TrapParams::new(vec![0.8, 1.2], 0.0)?;
    let s = RotationSchedule::linear(0.5);
    let mut worst = 0.0f64;
    for (q0, p0) in [([1.0, 0.0], [0.0, 1.0]), ([-0.7, 1.3], [0.4, -0.2]), ([2.0, 0.5], [-1.0, 0.3])] {
        worst = worst.max(classical_transform_check(q0, p0, &s, &trap, 4.0)?.max_deviation);
    }
    lines.push(CheckLine::below("rotating-frame transform, classical orbits", worst, 1e-8));
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    pub samples: usize,
    /// Max of `|fd - analytic| / max(|analytic|, 1e-3)`.
    pub max_relative: f64,
    /// Largest correction potential for the isotropic version of the trap.
    pub isotropic_correction: f64,
}

/// Compares the analytic gradient of the rotating-frame trap with central
/// differences of the lab potential at random times and grid nodes.
pub fn gradient_check(config: &RunConfig, samples: usize) -> Result<GradientReport> {
    let problem = config.problem()?;
    let grid = &problem.grid;
    let dim = grid.dim();
    let trap = &problem.trap;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = 1e-5;
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; dim];
    for _ in 0..samples {
        let t = rng.gen_range(config.t0..config.t_end);
        let i = rng.gen_range(0..grid.len());
        grid.unravel(i, &mut idx);
        let xi: Vec<f64> = (0..dim).map(|a| grid.coordinate(a, idx[a])).collect();
        let grad = grad_potential_rotating(grid, &problem.schedule, trap, t)?;
        let r = rotation_matrix(&problem.schedule, t, dim);
        let w = |p: &[f64]| {
            let x: Vec<f64> = r.iter().map(|row| row.iter().zip(p).map(|(a, b)| a * b).sum()).collect();
            trap.lab_potential(&x)
        };
        for axis in 0..dim {
            let (mut p, mut m) = (xi.clone(), xi.clone());
            p[axis] += d;
            m[axis] -= d;
            let fd = (w(&p) - w(&m)) / (2.0 * d);
            let an = grad[axis].values()[i];
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
        }
    }
    let mut iso_gamma = vec![config.gamma[0]; dim];
    if dim == 3 {
        iso_gamma[2] = config.gamma[2];
    }
    let iso = TrapParams::new(iso_gamma, config.theta)?;
    let tilde = modified_potential(grid, &problem.schedule, &iso, config.t0, config.t_end - config.t0)?;
    Ok(GradientReport {
        samples,
        max_relative: worst,
        isotropic_correction: tilde.max_abs(),
    })
}
