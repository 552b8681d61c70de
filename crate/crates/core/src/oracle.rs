//! Small independent references: dense Magnus propagators for the linear
//! problem on tiny grids, a brute-force exponential midpoint propagator, a
//! classical-trajectory check of the rotating-frame transform and
//! least-squares order estimation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrators::{bbk_coefficients, CfqmScheme};
use crate::model::{gauss_nodes3, rotation_matrix, Problem, RotationSchedule, TrapParams};
use crate::spectral::{Field, Frame, Grid};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest grid the dense oracles accept.
pub const MAX_DENSE_UNKNOWNS: usize = 4096;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Complex square matrix acting on flattened grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub entries: CMatrix,
}

impl DenseOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidArgument(format!(
                "dense operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|z| !z.is_finite()) {
            return Err(Error::Degenerate("non-finite operator entry".into()));
        }
        Ok(DenseOperator { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Max deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    /// Max deviation from anti-Hermitian symmetry.
    pub fn anti_hermitian_defect(&self) -> f64 {
        max_abs(&(&self.entries + self.entries.adjoint()))
    }

    pub fn exp(&self) -> CMatrix {
        self.entries.clone().exp()
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `X Y - Y X`.
pub fn commutator(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x * y - y * x
}

fn check_dense_size(grid: &Grid) -> Result<()> {
    if grid.len() > MAX_DENSE_UNKNOWNS {
        return Err(Error::TooLarge(grid.len(), MAX_DENSE_UNKNOWNS));
    }
    Ok(())
}

/// One-dimensional `-1/2 d^2/dx^2` in the Fourier basis, assembled from
/// explicit DFT sums.
fn kinetic_1d(n: usize, half_width: f64) -> CMatrix {
    let dx = 2.0 * half_width / n as f64;
    let modes: Vec<f64> = (0..n as i64)
        .map(|j| {
            let s = if j < n as i64 / 2 { j } else { j - n as i64 };
            PI / half_width * s as f64
        })
        .collect();
    CMatrix::from_fn(n, n, |r, c| {
        let d = (r as f64 - c as f64) * dx;
        modes
            .iter()
            .map(|k| Complex64::from_polar(0.5 * k * k, k * d))
            .sum::<Complex64>()
            / n as f64
    })
}

/// Spectral `-1/2 Laplacian` on the grid, as a dense matrix on row-major values.
pub fn dense_kinetic(grid: &Grid) -> Result<DenseOperator> {
    check_dense_size(grid)?;
    let mut total = CMatrix::zeros(grid.len(), grid.len());
    let sizes = grid.sizes();
    for axis in 0..grid.dim() {
        let before: usize = sizes[..axis].iter().product();
        let after: usize = sizes[axis + 1..].iter().product();
        let a = kinetic_1d(sizes[axis], grid.half_widths()[axis]);
        let term = CMatrix::identity(before, before)
            .kronecker(&a)
            .kronecker(&CMatrix::identity(after, after));
        total += term;
    }
    DenseOperator::new(total)
}

/// Diagonal operator of the rotating-frame potential at time `t`.
pub fn dense_potential(problem: &Problem, t: f64) -> Result<DenseOperator> {
    check_dense_size(&problem.grid)?;
    let w = problem.potential(t)?;
    let diag = CVector::from_iterator(w.values().len(), w.values().iter().map(|&v| real(v)));
    DenseOperator::new(CMatrix::from_diagonal(&diag))
}

/// `H(t) = -1/2 Laplacian + W(., t)` as a dense matrix.
pub fn build_dense(problem: &Problem, t: f64) -> Result<DenseOperator> {
    let a = dense_kinetic(&problem.grid)?;
    let b = dense_potential(problem, t)?;
    DenseOperator::new(a.entries + b.entries)
}

/// The three Magnus building blocks of one step.
#[derive(Debug, Clone)]
pub struct AlphaTriple {
    pub a1: CMatrix,
    pub a2: CMatrix,
    pub a3: CMatrix,
}

/// Builds the alphas from `H` sampled at the three Gauss nodes.
pub fn alphas_from_samples(h: f64, samples: [&CMatrix; 3]) -> AlphaTriple {
    let [h1, h2, h3] = samples;
    let s = -I * h;
    AlphaTriple {
        a1: h2 * s,
        a2: (h3 - h1) * (s * (15f64.sqrt() / 3.0)),
        a3: (h3 - h2 * real(2.0) + h1) * (s * (10.0 / 3.0)),
    }
}

pub fn alphas(problem: &Problem, kinetic: &CMatrix, t0: f64, h: f64) -> Result<AlphaTriple> {
    let c = gauss_nodes3();
    let samples = c
        .iter()
        .map(|ck| dense_potential(problem, t0 + ck * h).map(|b| kinetic + b.entries))
        .collect::<Result<Vec<_>>>()?;
    Ok(alphas_from_samples(h, [&samples[0], &samples[1], &samples[2]]))
}

fn omega6_terms(al: &AlphaTriple, with_23: bool) -> Result<CMatrix> {
    let n = al.a1.nrows();
    if [&al.a2, &al.a3].iter().any(|m| m.nrows() != n || m.ncols() != n) || al.a1.ncols() != n {
        return Err(Error::InvalidArgument("alpha dimensions differ".into()));
    }
    let c12 = commutator(&al.a1, &al.a2);
    let c13 = commutator(&al.a1, &al.a3);
    let c113 = commutator(&al.a1, &c13);
    let c212 = commutator(&al.a2, &c12);
    let c1112 = commutator(&al.a1, &commutator(&al.a1, &c12));
    let mut out = &al.a1 + &al.a3 / real(12.0) - c12 / real(12.0) + c113 / real(360.0)
        - c212 / real(240.0)
        + c1112 / real(720.0);
    if with_23 {
        out += commutator(&al.a2, &al.a3) / real(240.0);
    }
    Ok(out)
}

/// Sixth-order truncation of the Magnus series.
pub fn magnus_omega6(al: &AlphaTriple) -> Result<CMatrix> {
    omega6_terms(al, true)
}

/// The same truncation without the `[alpha2, alpha3]` term, which vanishes
/// when the potential samples commute.
pub fn magnus_omega6_modified(al: &AlphaTriple) -> Result<CMatrix> {
    omega6_terms(al, false)
}

fn check_linear(problem: &Problem) -> Result<()> {
    if problem.trap.theta != 0.0 {
        return Err(Error::InvalidArgument(
            "dense oracles cover the linear problem only (theta = 0)".into(),
        ));
    }
    Ok(())
}

/// Micro-steps per step used by [`dense_reference`].
pub const DENSE_MICRO_STEPS: usize = 256;

/// Propagates `u0` from `t0` over `h` with `micro` Magnus micro-steps.
pub fn dense_reference_with(
    u0: &CVector,
    problem: &Problem,
    t0: f64,
    h: f64,
    micro: usize,
) -> Result<CVector> {
    check_linear(problem)?;
    let kinetic = dense_kinetic(&problem.grid)?;
    if u0.len() != kinetic.n() {
        return Err(Error::ShapeMismatch {
            expected: kinetic.n(),
            actual: u0.len(),
        });
    }
    let dt = h / micro as f64;
    let mut u = u0.clone();
    for m in 0..micro {
        let al = alphas(problem, &kinetic.entries, t0 + m as f64 * dt, dt)?;
        u = magnus_omega6(&al)?.exp() * u;
    }
    Ok(u)
}

pub fn dense_reference(u0: &CVector, problem: &Problem, t0: f64, h: f64) -> Result<CVector> {
    dense_reference_with(u0, problem, t0, h, DENSE_MICRO_STEPS)
}

/// One step of a CFQM scheme with exact matrix exponentials of the stage
/// operators `b_j A + sum_k a_jk B(t0 + c_k h)`.
pub fn dense_cfqm_step(
    u0: &CVector,
    scheme: &CfqmScheme,
    problem: &Problem,
    t0: f64,
    h: f64,
) -> Result<CVector> {
    check_linear(problem)?;
    let kinetic = dense_kinetic(&problem.grid)?.entries;
    let nodes = scheme
        .nodes
        .iter()
        .map(|c| dense_potential(problem, t0 + c * h).map(|b| b.entries))
        .collect::<Result<Vec<_>>>()?;
    let mut u = u0.clone();
    for row in &scheme.coeffs {
        let b: f64 = row.iter().sum();
        let mut stage = &kinetic * real(b);
        for (a, bk) in row.iter().zip(&nodes) {
            stage += bk * real(*a);
        }
        u = (stage * (-I * h)).exp() * u;
    }
    Ok(u)
}

/// One step of the modified sixth-order scheme with exact matrix
/// exponentials and the discrete double commutator.
pub fn dense_bbk_step(u0: &CVector, problem: &Problem, t0: f64, h: f64) -> Result<CVector> {
    check_linear(problem)?;
    let a = dense_kinetic(&problem.grid)?.entries;
    let c = bbk_coefficients();
    let b = c
        .nodes
        .iter()
        .map(|ck| dense_potential(problem, t0 + ck * h).map(|op| op.entries))
        .collect::<Result<Vec<_>>>()?;
    let mix = |w: [f64; 3]| &b[0] * real(w[0]) + &b[1] * real(w[1]) + &b[2] * real(w[2]);
    let rev = |w: [f64; 3]| [w[2], w[1], w[0]];
    let d = &b[2] - &b[0];
    let tilde = commutator(&commutator(&a, &d), &d) / real(25920.0);
    let hh = real(h * h);
    let e1 = ((mix(c.outer) + &tilde * hh) * (-I * h)).exp();
    let e2 = ((&a + mix(c.inner)) * (-I * h / 2.0)).exp();
    let e3 = ((&a + mix(rev(c.inner))) * (-I * h / 2.0)).exp();
    let e4 = ((mix(rev(c.outer)) + &tilde * hh) * (-I * h)).exp();
    Ok(e4 * (e3 * (e2 * (e1 * u0))))
}

pub fn field_to_vector(field: &Field) -> CVector {
    CVector::from_column_slice(field.values())
}

pub fn vector_to_field(v: &CVector, like: &Field, time: f64) -> Result<Field> {
    Field::new(like.grid().clone(), v.as_slice().to_vec(), Frame::Rotating, time)
}

/// Discrete L2 distance between two grid vectors.
pub fn vector_l2_error(grid: &Grid, u: &CVector, v: &CVector) -> f64 {
    ((u - v).norm_squared() * grid.cell_volume()).sqrt()
}

/// Exponential midpoint rule with `steps` uniform micro-steps for
/// `i u' = H(t) u`.
pub fn brute_force_midpoint(
    hamiltonian: impl Fn(f64) -> CMatrix,
    u0: &CVector,
    t0: f64,
    h: f64,
    steps: usize,
) -> CVector {
    let dt = h / steps as f64;
    let mut u = u0.clone();
    for m in 0..steps {
        let tm = t0 + (m as f64 + 0.5) * dt;
        u = (hamiltonian(tm) * (-I * dt)).exp() * u;
    }
    u
}

/// Micro-steps used by the brute-force oracle.
pub const BRUTE_FORCE_STEPS: usize = 10_000;

/// Phase-space state `(q, p)` of a classical particle in the plane.
pub type PhasePoint = [f64; 4];

fn rk4(f: &impl Fn(f64, &PhasePoint) -> PhasePoint, t: f64, z: &PhasePoint, dt: f64) -> PhasePoint {
    let add = |a: &PhasePoint, b: &PhasePoint, s: f64| -> PhasePoint {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
    };
    let k1 = f(t, z);
    let k2 = f(t + dt / 2.0, &add(z, &k1, dt / 2.0));
    let k3 = f(t + dt / 2.0, &add(z, &k2, dt / 2.0));
    let k4 = f(t + dt, &add(z, &k3, dt));
    let mut out = *z;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn grad_v(trap: &TrapParams, q: [f64; 2]) -> [f64; 2] {
    let g = &trap.gamma;
    [g[0] * g[0] * q[0], g[1] * g[1] * q[1]]
}

/// `J v` with `J = [[0, 1], [-1, 0]]`.
fn apply_j(v: [f64; 2]) -> [f64; 2] {
    [v[1], -v[0]]
}

fn rotate(r: &[Vec<f64>], v: [f64; 2], transpose: bool) -> [f64; 2] {
    if transpose {
        [r[0][0] * v[0] + r[1][0] * v[1], r[0][1] * v[0] + r[1][1] * v[1]]
    } else {
        [r[0][0] * v[0] + r[0][1] * v[1], r[1][0] * v[0] + r[1][1] * v[1]]
    }
}

/// Lab-frame equations of a particle in the rotating trap:
/// `q' = p + omega' J q`, `p' = -grad V(q) + omega' J p`.
fn lab_rhs<'a>(
    schedule: &'a RotationSchedule,
    trap: &'a TrapParams,
) -> impl Fn(f64, &PhasePoint) -> PhasePoint + 'a {
    move |t, z| {
        let w = schedule.omega_prime(t);
        let jq = apply_j([z[0], z[1]]);
        let jp = apply_j([z[2], z[3]]);
        let gv = grad_v(trap, [z[0], z[1]]);
        [z[2] + w * jq[0], z[3] + w * jq[1], -gv[0] + w * jp[0], -gv[1] + w * jp[1]]
    }
}

/// Rotating-frame equations `q' = p`, `p' = -R^T grad V(R q)`.
fn rotating_rhs<'a>(
    schedule: &'a RotationSchedule,
    trap: &'a TrapParams,
) -> impl Fn(f64, &PhasePoint) -> PhasePoint + 'a {
    move |t, z| {
        let r = rotation_matrix(schedule, t, 2);
        let x = rotate(&r, [z[0], z[1]], false);
        let f = rotate(&r, grad_v(trap, x), true);
        [z[2], z[3], -f[0], -f[1]]
    }
}

/// Maps a lab state to rotating coordinates: `(R^T q, R^T p)`.
pub fn to_rotating(schedule: &RotationSchedule, t: f64, z: &PhasePoint) -> PhasePoint {
    let r = rotation_matrix(schedule, t, 2);
    let q = rotate(&r, [z[0], z[1]], true);
    let p = rotate(&r, [z[2], z[3]], true);
    [q[0], q[1], p[0], p[1]]
}

/// Lab Hamiltonian `1/2 p.p - omega' q.Jp + V(q)`.
pub fn lab_energy(schedule: &RotationSchedule, trap: &TrapParams, t: f64, z: &PhasePoint) -> f64 {
    let jp = apply_j([z[2], z[3]]);
    0.5 * (z[2] * z[2] + z[3] * z[3]) - schedule.omega_prime(t) * (z[0] * jp[0] + z[1] * jp[1])
        + trap.lab_potential(&[z[0], z[1]])
}

/// Rotating-frame Hamiltonian `1/2 p.p + V(R q)`.
pub fn rotating_energy(schedule: &RotationSchedule, trap: &TrapParams, t: f64, z: &PhasePoint) -> f64 {
    let r = rotation_matrix(schedule, t, 2);
    let x = rotate(&r, [z[0], z[1]], false);
    0.5 * (z[2] * z[2] + z[3] * z[3]) + trap.lab_potential(&x)
}

/// Outcome of [`classical_transform_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalReport {
    /// Max over the time mesh of `|z_rot(t) - e^{-omega J} z_lab(t)|`.
    pub max_deviation: f64,
    /// Max over the mesh of the mismatch between the lab energy and the
    /// rotating energy corrected by `-omega' q.Jp`.
    pub max_energy_mismatch: f64,
}

/// Classical step size of the trajectory oracle.
pub const CLASSICAL_STEP: f64 = 1e-4;

/// Integrates the lab-frame and rotating-frame particle equations with the
/// classical fourth-order Runge-Kutta method at step `dt` and compares the
/// trajectories through the frame change.
pub fn classical_transform_check_with(
    q0: [f64; 2],
    p0: [f64; 2],
    schedule: &RotationSchedule,
    trap: &TrapParams,
    t_end: f64,
    dt: f64,
) -> Result<ClassicalReport> {
    if trap.dim() != 2 {
        return Err(Error::InvalidArgument("classical check needs a 2-D trap".into()));
    }
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument("need positive T and step".into()));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let lab = lab_rhs(schedule, trap);
    let rot = rotating_rhs(schedule, trap);
    let mut z: PhasePoint = [q0[0], q0[1], p0[0], p0[1]];
    // R(0) maps the initial rotating state onto the lab state
    let mut zr = to_rotating(schedule, 0.0, &z);
    let mut report = ClassicalReport {
        max_deviation: 0.0,
        max_energy_mismatch: 0.0,
    };
    for n in 0..=steps {
        let t = n as f64 * dt;
        let mapped = to_rotating(schedule, t, &z);
        let dev = mapped
            .iter()
            .zip(&zr)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let jp = apply_j([zr[2], zr[3]]);
        let coupling = schedule.omega_prime(t) * (zr[0] * jp[0] + zr[1] * jp[1]);
        let energy = (lab_energy(schedule, trap, t, &z) - (rotating_energy(schedule, trap, t, &zr) - coupling)).abs();
        report.max_deviation = report.max_deviation.max(dev);
        report.max_energy_mismatch = report.max_energy_mismatch.max(energy);
        if n < steps {
            z = rk4(&lab, t, &z, dt);
            zr = rk4(&rot, t, &zr, dt);
        }
    }
    Ok(report)
}

pub fn classical_transform_check(
    q0: [f64; 2],
    p0: [f64; 2],
    schedule: &RotationSchedule,
    trap: &TrapParams,
    t_end: f64,
) -> Result<ClassicalReport> {
    classical_transform_check_with(q0, p0, schedule, trap, t_end, CLASSICAL_STEP)
}

/// Errors below this are treated as roundoff by [`observed_order`].
pub const ORDER_ERROR_FLOOR: f64 = 1e-12;

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn observed_order(stepsizes: &[f64], errors: &[f64]) -> Result<f64> {
    observed_order_in_band(stepsizes, errors, ORDER_ERROR_FLOOR, f64::INFINITY)
}

/// As [`observed_order`], keeping only points with `lo <= error <= hi`.
pub fn observed_order_in_band(stepsizes: &[f64], errors: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if stepsizes.len() != errors.len() {
        return Err(Error::Degenerate(format!(
            "{} step sizes but {} errors",
            stepsizes.len(),
            errors.len()
        )));
    }
    let pts: Vec<(f64, f64)> = stepsizes
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && e.is_finite() && **e >= lo && **e <= hi)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 usable points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-24 {
        return Err(Error::Degenerate("step sizes are all equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}
