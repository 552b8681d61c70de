use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Coordinate frame a field is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Rotating,
    Lab,
}

impl Frame {
    pub fn code(self) -> u8 {
        match self {
            Frame::Rotating => 0,
            Frame::Lab => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Frame::Rotating),
            1 => Some(Frame::Lab),
            _ => None,
        }
    }
}

/// Complex wave function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    pub frame: Frame,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>, frame: Frame, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Field {
            grid,
            values,
            frame,
            time,
        })
    }

    pub fn zeros(grid: Arc<Grid>, frame: Frame, time: f64) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Field {
            grid,
            values,
            frame,
            time,
        }
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        frame: Frame,
        time: f64,
        f: impl FnMut(&[f64]) -> Complex64,
    ) -> Self {
        let values = grid.map_points(f);
        Field {
            grid,
            values,
            frame,
            time,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub(crate) fn check_same_grid(&self, grid: &Grid) -> Result<()> {
        if std::ptr::eq(Arc::as_ptr(&self.grid), grid) || self.grid.same_geometry(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Fourier coefficients of a [`Field`], in FFT ordering.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
    frame: Frame,
    time: f64,
}

impl Spectrum {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

static TRANSFORM_PAIRS: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static LOCAL_TRANSFORM_PAIRS: Cell<u64> = const { Cell::new(0) };
}

/// Transform pairs consumed by kinetic flows in the whole process.
pub fn transform_pairs() -> u64 {
    TRANSFORM_PAIRS.load(Ordering::Relaxed)
}

/// Transform pairs consumed by kinetic flows on the calling thread.
pub fn thread_transform_pairs() -> u64 {
    LOCAL_TRANSFORM_PAIRS.with(Cell::get)
}

fn count_transform_pair() {
    TRANSFORM_PAIRS.fetch_add(1, Ordering::Relaxed);
    LOCAL_TRANSFORM_PAIRS.with(|c| c.set(c.get() + 1));
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

/// Unnormalized multi-dimensional FFT, in place.
fn transform_in_place(grid: &Grid, data: &mut [Complex64], direction: Direction) {
    let sizes = grid.sizes();
    let total = data.len();
    let mut lanes = Vec::new();
    for (axis, plan) in grid.plans().iter().enumerate() {
        let fft = match direction {
            Direction::Forward => &plan.forward,
            Direction::Inverse => &plan.inverse,
        };
        let n = sizes[axis];
        let stride: usize = sizes[axis + 1..].iter().product();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        // gather each block of `n * stride` values lane-major, transform, scatter back
        let block = n * stride;
        lanes.resize(block, Complex64::new(0.0, 0.0));
        for start in (0..total).step_by(block) {
            let chunk = &mut data[start..start + block];
            for m in 0..n {
                for j in 0..stride {
                    lanes[j * n + m] = chunk[m * stride + j];
                }
            }
            fft.process_with_scratch(&mut lanes, &mut scratch);
            for m in 0..n {
                for j in 0..stride {
                    chunk[m * stride + j] = lanes[j * n + m];
                }
            }
        }
    }
}

pub fn forward_transform(field: &Field) -> Spectrum {
    let mut coeffs = field.values.clone();
    transform_in_place(&field.grid, &mut coeffs, Direction::Forward);
    Spectrum {
        grid: field.grid.clone(),
        coeffs,
        frame: field.frame,
        time: field.time,
    }
}

pub fn inverse_transform(spectrum: &Spectrum) -> Field {
    let mut values = spectrum.coeffs.clone();
    transform_in_place(&spectrum.grid, &mut values, Direction::Inverse);
    let scale = 1.0 / values.len() as f64;
    values.iter_mut().for_each(|z| *z *= scale);
    Field {
        grid: spectrum.grid.clone(),
        values,
        frame: spectrum.frame,
        time: spectrum.time,
    }
}

/// Exact flow of `i u' = -(b/2) Δ u` over time `tau`, in place.
///
/// Counts one transform pair.
pub fn kinetic_flow_in_place(field: &mut Field, tau: f64, b: f64) {
    let grid = field.grid.clone();
    transform_in_place(&grid, &mut field.values, Direction::Forward);
    let scale = 1.0 / field.values.len() as f64;
    let factor = -0.5 * b * tau;
    for (z, &k2) in field.values.iter_mut().zip(grid.k_squared()) {
        *z *= Complex64::from_polar(scale, factor * k2);
    }
    transform_in_place(&grid, &mut field.values, Direction::Inverse);
    count_transform_pair();
}

pub fn kinetic_flow(field: &Field, tau: f64, b: f64) -> Field {
    let mut out = field.clone();
    kinetic_flow_in_place(&mut out, tau, b);
    out
}

/// `sqrt(dx_1 ... dx_d * sum |u|^2)`.
pub fn l2_norm(field: &Field) -> f64 {
    let sum: f64 = field.values.iter().map(|z| z.norm_sqr()).sum();
    (field.grid.cell_volume() * sum).sqrt()
}

pub fn l2_error(f: &Field, g: &Field) -> Result<f64> {
    f.check_same_grid(&g.grid)?;
    let sum: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok((f.grid.cell_volume() * sum).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::make_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid2(l: f64, n: usize) -> Arc<Grid> {
        make_grid(2, &[l, l], &[n, n]).unwrap()
    }

    fn plane_wave(grid: &Arc<Grid>, modes: [i64; 2]) -> Field {
        let k: Vec<f64> = (0..2)
            .map(|a| PI / grid.half_widths()[a] * modes[a] as f64)
            .collect();
        Field::from_fn(grid.clone(), Frame::Rotating, 0.0, |xi| {
            Complex64::from_polar(1.0, k[0] * xi[0] + k[1] * xi[1])
        })
    }

    #[test]
    fn constant_field_spectrum_is_zero_mode() {
        let g = grid2(3.0, 8);
        let f = Field::from_fn(g, Frame::Rotating, 0.0, |_| Complex64::new(2.0, -1.0));
        let s = forward_transform(&f);
        assert!((s.coeffs()[0] - Complex64::new(128.0, -64.0)).norm() < 1e-12);
        assert!(s.coeffs()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn plane_wave_has_single_coefficient() {
        let g = grid2(2.0, 16);
        let f = plane_wave(&g, [3, -2]);
        let s = forward_transform(&f);
        let target = 3 * 16 + (16 - 2);
        for (i, z) in s.coeffs().iter().enumerate() {
            if i == target {
                assert!((z.norm() - 256.0).abs() < 1e-10);
            } else {
                assert!(z.norm() < 1e-10, "mode {i}: {z}");
            }
        }
    }

    #[test]
    fn three_dimensional_round_trip() {
        let g = make_grid(3, &[1.0, 2.0, 3.0], &[4, 6, 8]).unwrap();
        let f = Field::from_fn(g, Frame::Lab, 0.5, |xi| {
            Complex64::new(xi[0] * xi[1] - xi[2], (xi[0] + 2.0 * xi[2]).sin())
        });
        let back = inverse_transform(&forward_transform(&f));
        assert!(l2_error(&f, &back).unwrap() < 1e-13);
        assert_eq!(back.frame, Frame::Lab);
        assert_eq!(back.time, 0.5);
    }

    #[test]
    fn kinetic_flow_identity_cases() {
        let g = grid2(5.0, 16);
        let f = Field::from_fn(g.clone(), Frame::Rotating, 0.0, |xi| {
            Complex64::new((-xi[0] * xi[0]).exp(), xi[1] * (-xi[1] * xi[1]).exp())
        });
        assert!(l2_error(&kinetic_flow(&f, 0.0, 1.0), &f).unwrap() < 1e-14);
        let c = Field::from_fn(g, Frame::Rotating, 0.0, |_| Complex64::new(0.3, 0.4));
        assert!(l2_error(&kinetic_flow(&c, 1.7, 0.8), &c).unwrap() < 1e-13);
    }

    #[test]
    fn kinetic_flow_single_mode_phase() {
        let g = grid2(4.0, 16);
        let f = plane_wave(&g, [2, 5]);
        let (tau, b) = (0.37, -1.3);
        let k2 = (PI / 4.0 * 2.0).powi(2) + (PI / 4.0 * 5.0).powi(2);
        let phase = Complex64::from_polar(1.0, -0.5 * b * tau * k2);
        let out = kinetic_flow(&f, tau, b);
        for (o, i) in out.values().iter().zip(f.values()) {
            assert!((o - phase * i).norm() < 1e-12);
        }
    }

    #[test]
    fn kinetic_flow_counts_one_pair() {
        let g = grid2(1.0, 8);
        let f = Field::zeros(g, Frame::Rotating, 0.0);
        let before = thread_transform_pairs();
        let _ = kinetic_flow(&f, 0.1, 1.0);
        let _ = kinetic_flow(&f, 0.2, 1.0);
        assert_eq!(thread_transform_pairs() - before, 2);
        // plain transforms are not kinetic flows
        let _ = inverse_transform(&forward_transform(&f));
        assert_eq!(thread_transform_pairs() - before, 2);
    }

    #[test]
    fn norm_of_ones() {
        let g = grid2(1.0, 4);
        let f = Field::from_fn(g, Frame::Rotating, 0.0, |_| Complex64::new(1.0, 0.0));
        assert!((l2_norm(&f) - 2.0).abs() < 1e-15);
        assert_eq!(l2_error(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn l2_error_rejects_grid_mismatch() {
        let a = Field::zeros(grid2(1.0, 4), Frame::Rotating, 0.0);
        let b = Field::zeros(grid2(1.0, 8), Frame::Rotating, 0.0);
        assert!(matches!(l2_error(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn new_rejects_wrong_shape() {
        let g = grid2(1.0, 4);
        assert!(Field::new(g, vec![Complex64::new(0.0, 0.0); 15], Frame::Rotating, 0.0).is_err());
    }

    fn random_field(grid: &Arc<Grid>, seed: u64) -> Field {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::new(grid.clone(), values, Frame::Rotating, 0.0).unwrap()
    }

    #[test]
    fn round_trip_random_64() {
        let g = grid2(10.0, 64);
        let f = random_field(&g, 7);
        let back = inverse_transform(&forward_transform(&f));
        let dev = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12, "max deviation {dev}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kinetic_flow_is_unitary(seed in 0u64..1000, tau in -5.0f64..5.0, b in -2.0f64..2.0) {
            let g = grid2(3.0, 32);
            let f = random_field(&g, seed);
            let n0 = l2_norm(&f);
            let n1 = l2_norm(&kinetic_flow(&f, tau, b));
            prop_assert!((n1 - n0).abs() < 1e-12 * n0);
        }

        #[test]
        fn kinetic_flow_group_property(seed in 0u64..1000, t1 in -2.0f64..2.0, t2 in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = grid2(3.0, 16);
            let f = random_field(&g, seed);
            let two = kinetic_flow(&kinetic_flow(&f, t1, b), t2, b);
            let one = kinetic_flow(&f, t1 + t2, b);
            prop_assert!(l2_error(&two, &one).unwrap() < 1e-12 * l2_norm(&f));
        }
    }
}
