//! Rotating-frame trap potentials, their gradients, the gradient correction
//! potential of the modified sixth-order scheme, the cubic nonlinearity and
//! the initial states of the benchmark problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Field, Frame, Grid};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Rotation angle `omega(t)` together with its derivative `omega'(t)`.
#[derive(Clone)]
pub struct RotationSchedule {
    omega: RealFn,
    omega_prime: RealFn,
    constant_rate: Option<f64>,
}

impl RotationSchedule {
    /// `omega(t) = rate * t`.
    pub fn linear(rate: f64) -> Self {
        RotationSchedule {
            omega: Arc::new(move |t| rate * t),
            omega_prime: Arc::new(move |_| rate),
            constant_rate: Some(rate),
        }
    }

    /// General schedule; `omega_prime` must be the derivative of `omega`.
    pub fn custom(
        omega: impl Fn(f64) -> f64 + Send + Sync + 'static,
        omega_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RotationSchedule {
            omega: Arc::new(omega),
            omega_prime: Arc::new(omega_prime),
            constant_rate: None,
        }
    }

    pub fn omega(&self, t: f64) -> f64 {
        (self.omega)(t)
    }

    pub fn omega_prime(&self, t: f64) -> f64 {
        (self.omega_prime)(t)
    }

    pub fn constant_rate(&self) -> Option<f64> {
        self.constant_rate
    }
}

impl fmt::Debug for RotationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant_rate {
            Some(rate) => write!(f, "RotationSchedule::linear({rate})"),
            None => write!(f, "RotationSchedule::custom"),
        }
    }
}

/// Quadratic trap `V(x) = 1/2 sum gamma_l^2 x_l^2` and cubic coupling `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapParams {
    pub gamma: Vec<f64>,
    pub theta: f64,
}

impl TrapParams {
    pub fn new(gamma: Vec<f64>, theta: f64) -> Result<Self> {
        if !(gamma.len() == 2 || gamma.len() == 3) {
            return Err(Error::InvalidArgument(format!(
                "trap needs 2 or 3 frequencies, got {}",
                gamma.len()
            )));
        }
        if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "trap frequencies must be positive, got {g}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        Ok(TrapParams { gamma, theta })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Lab-frame potential at a point.
    pub fn lab_potential(&self, x: &[f64]) -> f64 {
        0.5 * self
            .gamma
            .iter()
            .zip(x)
            .map(|(g, xl)| g * g * xl * xl)
            .sum::<f64>()
    }
}

/// Real-valued function sampled on a grid.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    pub time: f64,
}

impl PotentialField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(PotentialField { grid, values, time })
    }

    pub fn zeros(grid: Arc<Grid>, time: f64) -> Self {
        let values = vec![0.0; grid.len()];
        PotentialField { grid, values, time }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `self += weight * other`.
    pub fn add_scaled(&mut self, weight: f64, other: &PotentialField) -> Result<()> {
        if !self.grid.same_geometry(&other.grid) {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += weight * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Everything a stepper needs besides the state: grid, rotation and trap.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<Grid>,
    pub schedule: RotationSchedule,
    pub trap: TrapParams,
}

impl Problem {
    pub fn new(grid: Arc<Grid>, schedule: RotationSchedule, trap: TrapParams) -> Result<Self> {
        check_dims(&grid, &trap)?;
        Ok(Problem {
            grid,
            schedule,
            trap,
        })
    }

    pub fn potential(&self, t: f64) -> Result<PotentialField> {
        potential_rotating(&self.grid, &self.schedule, &self.trap, t)
    }
}

/// `R(t)`: rotation by `-omega(t)` in the (x1, x2) plane, identity on x3.
pub fn rotation_matrix(schedule: &RotationSchedule, t: f64, dim: usize) -> Vec<Vec<f64>> {
    let (s, c) = schedule.omega(t).sin_cos();
    let mut r = vec![vec![0.0; dim]; dim];
    r[0][0] = c;
    r[0][1] = s;
    r[1][0] = -s;
    r[1][1] = c;
    if dim == 3 {
        r[2][2] = 1.0;
    }
    r
}

fn check_dims(grid: &Grid, trap: &TrapParams) -> Result<()> {
    if grid.dim() != trap.dim() {
        return Err(Error::InvalidArgument(format!(
            "grid has dimension {} but the trap has {} frequencies",
            grid.dim(),
            trap.dim()
        )));
    }
    Ok(())
}

/// Coefficients of `W(xi, t) = 1/2 (q11 xi1^2 + 2 q12 xi1 xi2 + q22 xi2^2) + 1/2 g3^2 xi3^2`.
#[derive(Debug, Clone, Copy)]
struct RotatedQuadratic {
    q11: f64,
    q12: f64,
    q22: f64,
    axial: f64,
}

impl RotatedQuadratic {
    fn new(schedule: &RotationSchedule, trap: &TrapParams, t: f64) -> Self {
        let (s, c) = schedule.omega(t).sin_cos();
        let g1 = trap.gamma[0] * trap.gamma[0];
        let g2 = trap.gamma[1] * trap.gamma[1];
        // written so that an isotropic trap gives q12 = 0 and q11 = q22 exactly
        RotatedQuadratic {
            q11: g1 + (g2 - g1) * s * s,
            q12: (g1 - g2) * s * c,
            q22: g2 + (g1 - g2) * s * s,
            axial: trap.gamma.get(2).map_or(0.0, |g| g * g),
        }
    }
}

/// `W(xi, t) = V(R(t) xi)` evaluated pointwise on the grid.
pub fn potential_rotating(
    grid: &Arc<Grid>,
    schedule: &RotationSchedule,
    trap: &TrapParams,
    t: f64,
) -> Result<PotentialField> {
    check_dims(grid, trap)?;
    let (s, c) = schedule.omega(t).sin_cos();
    let g: Vec<f64> = trap.gamma.iter().map(|g| g * g).collect();
    let values = grid.map_points(|xi| {
        let x1 = c * xi[0] + s * xi[1];
        let x2 = -s * xi[0] + c * xi[1];
        let mut w = 0.5 * g[0] * x1 * x1 + 0.5 * g[1] * x2 * x2;
        if xi.len() == 3 {
            w += 0.5 * g[2] * xi[2] * xi[2];
        }
        w
    });
    PotentialField::new(grid.clone(), values, t)
}

/// The lab-frame trap `V(x)` on the grid.
pub fn potential_lab(grid: &Arc<Grid>, trap: &TrapParams) -> Result<PotentialField> {
    check_dims(grid, trap)?;
    let values = grid.map_points(|x| trap.lab_potential(x));
    PotentialField::new(grid.clone(), values, 0.0)
}

/// Analytic gradient components `d W / d xi_l`, one field per axis.
pub fn grad_potential_rotating(
    grid: &Arc<Grid>,
    schedule: &RotationSchedule,
    trap: &TrapParams,
    t: f64,
) -> Result<Vec<PotentialField>> {
    check_dims(grid, trap)?;
    let q = RotatedQuadratic::new(schedule, trap, t);
    let dim = grid.dim();
    let mut comps = vec![Vec::with_capacity(grid.len()); dim];
    grid.for_each_point(|_, xi| {
        comps[0].push(q.q11 * xi[0] + q.q12 * xi[1]);
        comps[1].push(q.q22 * xi[1] + q.q12 * xi[0]);
        if dim == 3 {
            comps[2].push(q.axial * xi[2]);
        }
    });
    comps
        .into_iter()
        .map(|v| PotentialField::new(grid.clone(), v, t))
        .collect()
}

/// Prefactor of the squared gradient difference in the correction potential.
pub const CORRECTION_PREFACTOR: f64 = 1.0 / 25920.0;

/// Nodes of the three-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_nodes3() -> [f64; 3] {
    let d = 15f64.sqrt() / 10.0;
    [0.5 - d, 0.5, 0.5 + d]
}

/// `sum_l (dW(xi, t0 + c3 h)/dxi_l - dW(xi, t0 + c1 h)/dxi_l)^2 / 25920`.
///
/// Nonnegative. It equals minus the double commutator
/// `[[-1/2 Laplacian, D], D] / 25920` with `D = W(t0 + c3 h) - W(t0 + c1 h)`,
/// so a stepper realizing that commutator term applies it with a negative sign.
pub fn modified_potential(
    grid: &Arc<Grid>,
    schedule: &RotationSchedule,
    trap: &TrapParams,
    t0: f64,
    h: f64,
) -> Result<PotentialField> {
    let c = gauss_nodes3();
    let late = grad_potential_rotating(grid, schedule, trap, t0 + c[2] * h)?;
    let early = grad_potential_rotating(grid, schedule, trap, t0 + c[0] * h)?;
    let mut out = PotentialField::zeros(grid.clone(), t0);
    for (l, e) in late.iter().zip(&early) {
        for ((o, a), b) in out.values.iter_mut().zip(l.values()).zip(e.values()) {
            let d = a - b;
            *o += CORRECTION_PREFACTOR * d * d;
        }
    }
    Ok(out)
}

/// Multiplication potential `f = theta * |phi|^2` of the cubic nonlinearity.
pub fn nonlinearity(density: &[f64], theta: f64) -> Vec<f64> {
    density.iter().map(|rho| theta * rho).collect()
}

/// `prod_l exp(-omega_l^2 xi_l^2 / 2)`.
pub fn initial_gaussian(grid: &Arc<Grid>, weights: &[f64], t0: f64) -> Result<Field> {
    if weights.len() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} Gaussian weights for a {}-D grid",
            weights.len(),
            grid.dim()
        )));
    }
    Ok(Field::from_fn(grid.clone(), Frame::Rotating, t0, |xi| {
        let e: f64 = weights.iter().zip(xi).map(|(w, x)| w * w * x * x).sum();
        Complex64::new((-0.5 * e).exp(), 0.0)
    }))
}

/// `(xi1 + i xi2) exp(-(xi1^2 + xi2^2)/2) / sqrt(pi)`, a unit-charge vortex.
pub fn initial_vortex(grid: &Arc<Grid>, t0: f64) -> Result<Field> {
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument(
            "the vortex initial state is two-dimensional".into(),
        ));
    }
    let norm = 1.0 / PI.sqrt();
    Ok(Field::from_fn(grid.clone(), Frame::Rotating, t0, |xi| {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        Complex64::new(xi[0], xi[1]) * (norm * (-0.5 * r2).exp())
    }))
}
