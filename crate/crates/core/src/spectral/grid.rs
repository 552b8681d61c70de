use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic rectangular grid on `[-L_1, L_1) x ... x [-L_d, L_d)`.
///
/// Values are stored row-major, the last axis contiguous. Wavenumbers follow
/// the usual FFT layout: zero first, negative frequencies in the upper half.
#[derive(Clone)]
pub struct Grid {
    half_width: Vec<f64>,
    size: Vec<usize>,
    spacing: Vec<f64>,
    wavenumber: Vec<Vec<f64>>,
    k_squared: Vec<f64>,
    plans: Vec<AxisPlan>,
}

#[derive(Clone)]
pub(crate) struct AxisPlan {
    pub(crate) forward: Arc<dyn Fft<f64>>,
    pub(crate) inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(dim: usize, half_widths: &[f64], sizes: &[usize]) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if half_widths.len() != dim || sizes.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} half-widths and sizes, got {} and {}",
                half_widths.len(),
                sizes.len()
            )));
        }
        for (axis, (&l, &n)) in half_widths.iter().zip(sizes).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "half-width on axis {axis} must be positive, got {l}"
                )));
            }
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "size on axis {axis} must be even and at least 4, got {n}"
                )));
            }
        }

        let spacing = half_widths
            .iter()
            .zip(sizes)
            .map(|(&l, &n)| 2.0 * l / n as f64)
            .collect();
        let wavenumber: Vec<Vec<f64>> = half_widths
            .iter()
            .zip(sizes)
            .map(|(&l, &n)| axis_wavenumbers(l, n))
            .collect();

        let total: usize = sizes.iter().product();
        let mut k_squared = vec![0.0; total];
        for (flat, k2) in k_squared.iter_mut().enumerate() {
            let mut rem = flat;
            for axis in (0..dim).rev() {
                let i = rem % sizes[axis];
                rem /= sizes[axis];
                *k2 += wavenumber[axis][i] * wavenumber[axis][i];
            }
        }

        let mut planner = FftPlanner::new();
        let plans = sizes
            .iter()
            .map(|&n| AxisPlan {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
            .collect();

        Ok(Grid {
            half_width: half_widths.to_vec(),
            size: sizes.to_vec(),
            spacing,
            wavenumber,
            k_squared,
            plans,
        })
    }

    pub fn dim(&self) -> usize {
        self.size.len()
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_width
    }

    pub fn sizes(&self) -> &[usize] {
        &self.size
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumber[axis]
    }

    /// `|k|^2` for every flat spectral index.
    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    pub fn len(&self) -> usize {
        self.k_squared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_squared.is_empty()
    }

    /// Volume element `dx_1 ... dx_d` of the discrete L2 inner product.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Node coordinate `-L + n * dx` on one axis.
    pub fn coordinate(&self, axis: usize, n: usize) -> f64 {
        -self.half_width[axis] + n as f64 * self.spacing[axis]
    }

    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        (0..self.size[axis]).map(|n| self.coordinate(axis, n)).collect()
    }

    /// Multi-index of a flat (row-major) index.
    pub fn unravel(&self, mut flat: usize, index: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            index[axis] = flat % self.size[axis];
            flat /= self.size[axis];
        }
    }

    /// Calls `f(flat, xi)` for every grid node in storage order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let dim = self.dim();
        let coords: Vec<Vec<f64>> = (0..dim).map(|a| self.axis_coordinates(a)).collect();
        let mut index = [0usize; 3];
        let mut xi = [0.0f64; 3];
        for flat in 0..self.len() {
            self.unravel(flat, &mut index[..dim]);
            for axis in 0..dim {
                xi[axis] = coords[axis][index[axis]];
            }
            f(flat, &xi[..dim]);
        }
    }

    /// Evaluates `f` at every node, in storage order.
    pub fn map_points<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_point(|_, xi| out.push(f(xi)));
        out
    }

    pub(crate) fn plans(&self) -> &[AxisPlan] {
        &self.plans
    }

    /// Geometric equality: same extents and point counts.
    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.size == other.size && self.half_width == other.half_width
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_geometry(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_width", &self.half_width)
            .field("size", &self.size)
            .field("spacing", &self.spacing)
            .finish()
    }
}

fn axis_wavenumbers(half_width: f64, n: usize) -> Vec<f64> {
    let scale = PI / half_width;
    (0..n)
        .map(|i| {
            let shifted = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
            scale * shifted as f64
        })
        .collect()
}

pub fn make_grid(dim: usize, half_widths: &[f64], sizes: &[usize]) -> Result<Arc<Grid>> {
    Grid::new(dim, half_widths, sizes).map(Arc::new)
}
