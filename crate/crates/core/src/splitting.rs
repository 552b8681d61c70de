//! Splitting schemes for the autonomous stage equations and the two exactly
//! solvable sub-flows they compose.
//!
//! Every table is stored in A-first form: pair `(alpha, beta)` applies the
//! kinetic flow for `alpha * h`, then the potential flow for `beta * h`. A
//! kinetic flow with `alpha = 0` is skipped, so the transform cost of one
//! application is the number of nonzero `alpha`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::PotentialField;
use crate::spectral::{kinetic_flow_in_place, Field};

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingScheme {
    pub name: &'static str,
    pub order: u32,
    pub pairs: Vec<(f64, f64)>,
}

impl SplittingScheme {
    /// Number of kinetic flows, i.e. transform pairs per application.
    pub fn kinetic_stages(&self) -> usize {
        self.pairs.iter().filter(|(a, _)| *a != 0.0).count()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.0).sum()
    }

    pub fn beta_sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.1).sum()
    }

    /// The composition read right to left, as a sequence of
    /// `(is_kinetic, weight)` flows, with zero-weight flows removed.
    pub fn flow_sequence(&self) -> Vec<(bool, f64)> {
        self.pairs
            .iter()
            .flat_map(|&(a, b)| [(true, a), (false, b)])
            .filter(|(_, w)| *w != 0.0)
            .collect()
    }

    /// True when the flow sequence reads the same in both directions.
    pub fn is_palindromic(&self) -> bool {
        let seq = self.flow_sequence();
        seq.iter()
            .zip(seq.iter().rev())
            .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= 1e-15)
    }

    /// FNV-1a hash over the little-endian coefficient bits.
    pub fn checksum(&self) -> u64 {
        checksum_f64(self.pairs.iter().flat_map(|&(a, b)| [a, b]))
    }
}

impl fmt::Display for SplittingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<8} order {}  pairs {:>2}  kinetic flows {:>2}  checksum {:016x}",
            self.name,
            self.order,
            self.pairs.len(),
            self.kinetic_stages(),
            self.checksum()
        )
    }
}

pub(crate) fn checksum_f64(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub const SPLITTING_NAMES: [&str; 3] = ["strang", "rkn74", "rkn116"];

// Symmetric Runge-Kutta-Nystrom methods, the variants that start and end
// with a potential flow: six kinetic flows of order 4, eleven of order 6.
const RKN74_B: [f64; 3] = [0.0829844064174052, 0.396309801498368, -0.0390563049223486];
const RKN74_A: [f64; 2] = [0.245298957184271, 0.604872665711080];
const RKN116_B: [f64; 5] = [
    0.0414649985182624,
    0.198128671918067,
    -0.0400061921041533,
    0.0752539843015807,
    -0.0115113874206879,
];
const RKN116_A: [f64; 5] = [
    0.123229775946271,
    0.290553797799558,
    -0.127049212625417,
    -0.246331761062075,
    0.357208872795928,
];

/// Pairs for the B-first palindrome `b1 a1 b2 ... a_m b_{m+1} a_m ... a1 b1`.
fn symmetric_rkn(b: &[f64], a: &[f64]) -> Vec<(f64, f64)> {
    // lengths: b holds m + 1 entries (centre last), a holds m entries
    let mut seq_b: Vec<f64> = b.to_vec();
    seq_b.extend(b[..b.len() - 1].iter().rev());
    let mut seq_a: Vec<f64> = a.to_vec();
    seq_a.extend(a.iter().rev());
    std::iter::once(0.0)
        .chain(seq_a)
        .zip(seq_b)
        .collect()
}

fn rkn74() -> Vec<(f64, f64)> {
    let [b1, b2, b3] = RKN74_B;
    let [a1, a2] = RKN74_A;
    let a3 = 0.5 - (a1 + a2);
    let b4 = 1.0 - 2.0 * (b1 + b2 + b3);
    symmetric_rkn(&[b1, b2, b3, b4], &[a1, a2, a3])
}

fn rkn116() -> Vec<(f64, f64)> {
    let mut b = RKN116_B.to_vec();
    b.push(0.5 - RKN116_B.iter().sum::<f64>());
    let mut a = RKN116_A.to_vec();
    a.push(1.0 - 2.0 * RKN116_A.iter().sum::<f64>());
    // a6 sits in the middle between the two b6 flows
    let mut seq_b = b.clone();
    seq_b.extend(b.iter().rev());
    let mut seq_a = a.clone();
    seq_a.extend(a[..a.len() - 1].iter().rev());
    std::iter::once(0.0).chain(seq_a).zip(seq_b).collect()
}

pub fn splitting_registry(name: &str) -> Result<SplittingScheme> {
    let (name, order, pairs) = match name {
        "strang" => ("strang", 2, vec![(0.5, 1.0), (0.5, 0.0)]),
        "rkn74" => ("rkn74", 4, rkn74()),
        "rkn116" => ("rkn116", 6, rkn116()),
        other => return Err(Error::UnknownSplitting(other.to_string())),
    };
    Ok(SplittingScheme { name, order, pairs })
}

/// `phi <- exp(-i tau (P + b f(|phi|^2))) phi` pointwise, with the modulus
/// taken at entry. `f` maps density to the nonlinear multiplication potential.
pub fn potential_flow_with(
    field: &mut Field,
    potential: &PotentialField,
    b: f64,
    tau: f64,
    f: impl Fn(f64) -> f64,
) -> Result<()> {
    if !field.grid().same_geometry(potential.grid()) {
        return Err(Error::GridMismatch);
    }
    if tau == 0.0 {
        return Ok(());
    }
    for (z, p) in field.values_mut().iter_mut().zip(potential.values()) {
        let rho = z.norm_sqr();
        let phase = -tau * (p + b * f(rho));
        *z *= Complex64::cis(phase);
    }
    Ok(())
}

/// Cubic case of [`potential_flow_with`].
pub fn potential_flow_in_place(
    field: &mut Field,
    potential: &PotentialField,
    b: f64,
    theta: f64,
    tau: f64,
) -> Result<()> {
    if theta == 0.0 {
        potential_flow_with(field, potential, b, tau, |_| 0.0)
    } else {
        potential_flow_with(field, potential, b, tau, |rho| theta * rho)
    }
}

pub fn potential_flow(
    field: &Field,
    potential: &PotentialField,
    b: f64,
    theta: f64,
    tau: f64,
) -> Result<Field> {
    let mut out = field.clone();
    potential_flow_in_place(&mut out, potential, b, theta, tau)?;
    Ok(out)
}

/// Solves `i u' = -b/2 Laplacian u + (P + b theta |u|^2) u` over `h` with the
/// given scheme, in place.
pub fn apply_splitting_in_place(
    field: &mut Field,
    scheme: &SplittingScheme,
    h: f64,
    b: f64,
    potential: &PotentialField,
    theta: f64,
) -> Result<()> {
    if !field.grid().same_geometry(potential.grid()) {
        return Err(Error::GridMismatch);
    }
    for &(alpha, beta) in &scheme.pairs {
        if alpha != 0.0 {
            kinetic_flow_in_place(field, alpha * h, b);
        }
        if beta != 0.0 {
            potential_flow_in_place(field, potential, b, theta, beta * h)?;
        }
    }
    Ok(())
}

pub fn apply_splitting(
    field: &Field,
    scheme: &SplittingScheme,
    h: f64,
    b: f64,
    potential: &PotentialField,
    theta: f64,
) -> Result<Field> {
    let mut out = field.clone();
    apply_splitting_in_place(&mut out, scheme, h, b, potential, theta)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{potential_rotating, RotationSchedule, TrapParams};
    use crate::spectral::{kinetic_flow, l2_error, l2_norm, make_grid, thread_transform_pairs, Frame, Grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn random_field(grid: &Arc<Grid>, seed: u64) -> Field {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::new(grid.clone(), values, Frame::Rotating, 0.0).unwrap()
    }

    fn smooth_field(grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid.clone(), Frame::Rotating, 0.0, |xi| {
            let r2: f64 = xi.iter().map(|x| x * x).sum();
            Complex64::new(1.0 + 0.3 * xi[0], 0.5 * xi[1]) * (-0.5 * r2).exp()
        })
    }

    fn harmonic(grid: &Arc<Grid>) -> PotentialField {
        let trap = TrapParams::new(vec![0.8, 1.2], 1.0).unwrap();
        potential_rotating(grid, &RotationSchedule::linear(0.5), &trap, 0.3).unwrap()
    }

    #[test]
    fn consistency_sums_and_sizes() {
        for name in SPLITTING_NAMES {
            let s = splitting_registry(name).unwrap();
            assert!((s.alpha_sum() - 1.0).abs() < 1e-15, "{name} alpha {}", s.alpha_sum());
            assert!((s.beta_sum() - 1.0).abs() < 1e-15, "{name} beta {}", s.beta_sum());
            assert!(s.is_palindromic(), "{name}");
        }
        let strang = splitting_registry("strang").unwrap();
        assert_eq!(strang.pairs, vec![(0.5, 1.0), (0.5, 0.0)]);
        assert_eq!(strang.kinetic_stages(), 2);
        assert_eq!(splitting_registry("rkn74").unwrap().pairs.len(), 7);
        assert_eq!(splitting_registry("rkn74").unwrap().kinetic_stages(), 6);
        assert_eq!(splitting_registry("rkn116").unwrap().kinetic_stages(), 11);
        assert!(matches!(splitting_registry("yoshida"), Err(Error::UnknownSplitting(_))));
    }

    #[test]
    fn checksums_are_distinct_and_stable() {
        let sums: Vec<u64> = SPLITTING_NAMES
            .iter()
            .map(|n| splitting_registry(n).unwrap().checksum())
            .collect();
        assert_ne!(sums[0], sums[1]);
        assert_ne!(sums[1], sums[2]);
        assert_eq!(sums[0], splitting_registry("strang").unwrap().checksum());
    }

    #[test]
    fn potential_flow_cases() {
        let g = make_grid(2, &[3.0, 3.0], &[16, 16]).unwrap();
        let f = random_field(&g, 1);
        let p = harmonic(&g);
        assert_eq!(potential_flow(&f, &p, 1.0, 1.0, 0.0).unwrap().values(), f.values());

        let c = PotentialField::new(g.clone(), vec![0.7; g.len()], 0.0).unwrap();
        let out = potential_flow(&f, &c, 1.0, 0.0, 0.4).unwrap();
        let phase = Complex64::cis(-0.4 * 0.7);
        for (o, i) in out.values().iter().zip(f.values()) {
            assert!((o - i * phase).norm() < 1e-15);
        }
    }

    #[test]
    fn potential_flow_matches_pointwise_oracle() {
        let g = make_grid(2, &[3.0, 3.0], &[16, 16]).unwrap();
        let f = random_field(&g, 2);
        let p = harmonic(&g);
        let (b, theta, tau) = (0.37, 1.0, 0.21);
        let out = potential_flow(&f, &p, b, theta, tau).unwrap();
        for ((o, i), w) in out.values().iter().zip(f.values()).zip(p.values()) {
            let rho = i.re * i.re + i.im * i.im;
            let ang = -tau * (w + b * theta * rho);
            let expect = Complex64::new(i.re * ang.cos() - i.im * ang.sin(), i.re * ang.sin() + i.im * ang.cos());
            assert!((o - expect).norm() < 1e-15);
            assert!((o.norm() - i.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn general_density_hook() {
        let g = make_grid(2, &[3.0, 3.0], &[8, 8]).unwrap();
        let f = random_field(&g, 3);
        let p = PotentialField::zeros(g.clone(), 0.0);
        let mut a = f.clone();
        potential_flow_with(&mut a, &p, 2.0, 0.5, |rho| 3.0 * rho).unwrap();
        let b = potential_flow(&f, &p, 2.0, 3.0, 0.5).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn strang_without_potential_is_kinetic_flow() {
        let g = make_grid(2, &[3.0, 3.0], &[16, 16]).unwrap();
        let f = smooth_field(&g);
        let zero = PotentialField::zeros(g.clone(), 0.0);
        let s = splitting_registry("strang").unwrap();
        let a = apply_splitting(&f, &s, 0.3, 0.7, &zero, 0.0).unwrap();
        let b = kinetic_flow(&f, 0.3, 0.7);
        assert!(l2_error(&a, &b).unwrap() < 1e-14);
    }

    #[test]
    fn transform_pair_counts() {
        let g = make_grid(2, &[3.0, 3.0], &[8, 8]).unwrap();
        let f = smooth_field(&g);
        let p = harmonic(&g);
        for (name, expect) in [("strang", 2), ("rkn74", 6), ("rkn116", 11)] {
            let s = splitting_registry(name).unwrap();
            let before = thread_transform_pairs();
            apply_splitting(&f, &s, 0.1, 1.0, &p, 1.0).unwrap();
            assert_eq!(thread_transform_pairs() - before, expect, "{name}");
        }
    }

    fn richardson_slope(name: &str) -> f64 {
        // local error of one step estimated against two half steps
        let g = make_grid(2, &[8.0, 8.0], &[32, 32]).unwrap();
        let f = smooth_field(&g);
        let p = harmonic(&g);
        let s = splitting_registry(name).unwrap();
        let hs = [0.2, 0.1, 0.05];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let one = apply_splitting(&f, &s, h, 1.0, &p, 1.0).unwrap();
                let half = apply_splitting(&f, &s, h / 2.0, 1.0, &p, 1.0).unwrap();
                let two = apply_splitting(&half, &s, h / 2.0, 1.0, &p, 1.0).unwrap();
                l2_error(&one, &two).unwrap()
            })
            .collect();
        (errs[1] / errs[2]).log2()
    }

    #[test]
    fn local_error_slopes() {
        let strang = richardson_slope("strang");
        assert!((strang - 3.0).abs() < 0.2, "strang {strang}");
        let rkn74 = richardson_slope("rkn74");
        // the leading error constant of rkn74 is small, so higher terms still
        // steepen the slope at these step sizes
        assert!(rkn74 > 4.7, "rkn74 {rkn74}");
        let rkn116 = richardson_slope("rkn116");
        assert!(rkn116 > 6.7, "rkn116 {rkn116}");
    }

    #[test]
    fn round_trip_reversibility() {
        let g = make_grid(2, &[6.0, 6.0], &[32, 32]).unwrap();
        let f = smooth_field(&g);
        let p = harmonic(&g);
        for name in SPLITTING_NAMES {
            let s = splitting_registry(name).unwrap();
            let fwd = apply_splitting(&f, &s, 0.2, 1.0, &p, 1.0).unwrap();
            let back = apply_splitting(&fwd, &s, -0.2, 1.0, &p, 1.0).unwrap();
            let rel = l2_error(&back, &f).unwrap() / l2_norm(&f);
            assert!(rel < 1e-10, "{name}: {rel}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn splitting_preserves_norm(seed in 0u64..1000, h in -1.0f64..1.0, b in -1.0f64..1.0, theta in -5.0f64..5.0, idx in 0usize..3) {
            let g = make_grid(2, &[4.0, 4.0], &[16, 16]).unwrap();
            let f = random_field(&g, seed);
            let p = harmonic(&g);
            let s = splitting_registry(SPLITTING_NAMES[idx]).unwrap();
            let out = apply_splitting(&f, &s, h, b, &p, theta).unwrap();
            let n0 = l2_norm(&f);
            prop_assert!((l2_norm(&out) - n0).abs() < 1e-12 * n0);
        }

        #[test]
        fn potential_flow_keeps_modulus(seed in 0u64..1000, tau in -3.0f64..3.0, theta in -100.0f64..100.0) {
            let g = make_grid(2, &[4.0, 4.0], &[8, 8]).unwrap();
            let f = random_field(&g, seed);
            let out = potential_flow(&f, &harmonic(&g), 1.0, theta, tau).unwrap();
            let max_in = f.values().iter().fold(0.0f64, |m, z| m.max(z.norm()));
            for (o, i) in out.values().iter().zip(f.values()) {
                prop_assert!((o.norm() - i.norm()).abs() < 1e-14 * max_in);
            }
        }
    }
}
