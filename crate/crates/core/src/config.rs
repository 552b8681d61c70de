//! Run configuration: a flat TOML document whose defaults describe the
//! two-dimensional Gaussian test problem.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::Method;
use crate::model::{initial_gaussian, initial_vortex, Problem, RotationSchedule, TrapParams};
use crate::spectral::{make_grid, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Gaussian,
    Vortex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotQuantity {
    Density,
    RealImag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub half_widths: Vec<f64>,
    pub sizes: Vec<usize>,
    pub t0: f64,
    pub t_end: f64,
    /// Steps for `simulate`.
    pub n_steps: usize,
    /// Step sizes for convergence studies, largest first.
    pub stepsizes: Vec<f64>,
    pub omega: f64,
    pub gamma: Vec<f64>,
    pub theta: f64,
    pub initial_state: InitialState,
    /// Gaussian widths `omega_l`; ignored for the vortex state.
    pub initial_weights: Vec<f64>,
    pub method: String,
    pub methods: Vec<String>,
    pub reference_method: String,
    /// Reference steps; `0` means ten times the finest study resolution.
    pub reference_steps: usize,
    /// Bound on the reference self-check deviation.
    pub reference_tolerance: f64,
    pub snapshot_times: Vec<f64>,
    pub snapshot_quantity: SnapshotQuantity,
    pub snapshot_lab_frame: bool,
    /// Half-width of the square window written as a plain-text density matrix.
    pub snapshot_window: f64,
    pub output_dir: Option<PathBuf>,
    /// `0` means available parallelism.
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            half_widths: vec![10.0, 10.0],
            sizes: vec![64, 64],
            t0: 0.0,
            t_end: 4.0,
            n_steps: 64,
            stepsizes: (2..=7).map(|m| 4.0 / f64::powi(2.0, m)).collect(),
            omega: 0.5,
            gamma: vec![0.8, 1.2],
            theta: 1.0,
            initial_state: InitialState::Gaussian,
            initial_weights: vec![1.1, 0.9],
            method: "bbk+rkn116".into(),
            methods: crate::integrators::METHOD_NAMES.iter().map(|s| s.to_string()).collect(),
            reference_method: "bbk+rkn116".into(),
            reference_steps: 0,
            reference_tolerance: 1e-10,
            snapshot_times: Vec::new(),
            snapshot_quantity: SnapshotQuantity::Density,
            snapshot_lab_frame: false,
            snapshot_window: 5.0,
            output_dir: None,
            workers: 0,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// The three-dimensional variant of the Gaussian test problem.
    pub fn test_equation_3d() -> Self {
        RunConfig {
            dim: 3,
            half_widths: vec![10.0; 3],
            sizes: vec![64; 3],
            gamma: vec![0.8, 1.2, 1.0],
            initial_weights: vec![1.1, 0.9, 1.0],
            ..RunConfig::default()
        }
    }

    /// Rotating condensate with a single initial vortex.
    pub fn vortex() -> Self {
        RunConfig {
            t_end: 15.0,
            n_steps: 1500,
            theta: 100.0,
            initial_state: InitialState::Vortex,
            snapshot_times: vec![0.0, 15.0],
            ..RunConfig::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let key = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field"))
                .unwrap_or("<document>")
                .to_string();
            Error::Config { key, msg }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::config("dim", format!("must be 2 or 3, got {}", self.dim)));
        }
        let per_axis = [
            ("half_widths", self.half_widths.len()),
            ("sizes", self.sizes.len()),
            ("gamma", self.gamma.len()),
        ];
        for (key, len) in per_axis {
            if len != self.dim {
                return Err(Error::config(key, format!("has {len} entries but dim is {}", self.dim)));
            }
        }
        match self.initial_state {
            InitialState::Gaussian if self.initial_weights.len() != self.dim => {
                return Err(Error::config(
                    "initial_weights",
                    format!("has {} entries but dim is {}", self.initial_weights.len(), self.dim),
                ));
            }
            InitialState::Vortex if self.dim != 2 => {
                return Err(Error::config("initial_state", "the vortex state needs dim = 2"));
            }
            _ => {}
        }
        if !self.t0.is_finite() || !self.t_end.is_finite() || self.t_end <= self.t0 {
            return Err(Error::config(
                "t_end",
                format!("need t_end > t0, got t0 = {} and t_end = {}", self.t0, self.t_end),
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        for &h in &self.stepsizes {
            self.steps_for(h)?;
        }
        if self.stepsizes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("stepsizes", "must be strictly decreasing"));
        }
        for (key, v) in [("omega", self.omega), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Method::parse(&self.method).map_err(|e| Error::config("method", e.to_string()))?;
        for m in &self.methods {
            Method::parse(m).map_err(|e| Error::config("methods", e.to_string()))?;
        }
        Method::parse(&self.reference_method)
            .map_err(|e| Error::config("reference_method", e.to_string()))?;
        if !(self.reference_tolerance > 0.0) {
            return Err(Error::config("reference_tolerance", "must be positive"));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("snapshot_times", "must be sorted"));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(t >= self.t0 && t <= self.t_end))
        {
            return Err(Error::config(
                "snapshot_times",
                format!("{t} lies outside [{}, {}]", self.t0, self.t_end),
            ));
        }
        if !(self.snapshot_window > 0.0) {
            return Err(Error::config("snapshot_window", "must be positive"));
        }
        // grid and trap validation report their own messages
        self.grid().map_err(|e| Error::config("sizes", e.to_string()))?;
        TrapParams::new(self.gamma.clone(), self.theta).map_err(|e| Error::config("gamma", e.to_string()))?;
        Ok(())
    }

    /// Number of uniform steps of size `h` spanning `[t0, t_end]`.
    pub fn steps_for(&self, h: f64) -> Result<usize> {
        let span = self.t_end - self.t0;
        let n = span / h;
        if !(h > 0.0) || !n.is_finite() || n.round() < 1.0 || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::config(
                "stepsizes",
                format!("{h} does not divide [{}, {}] into whole steps", self.t0, self.t_end),
            ));
        }
        Ok(n.round() as usize)
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        make_grid(self.dim, &self.half_widths, &self.sizes)
    }

    pub fn problem(&self) -> Result<Problem> {
        let trap = TrapParams::new(self.gamma.clone(), self.theta)?;
        Problem::new(self.grid()?, RotationSchedule::linear(self.omega), trap)
    }

    pub fn initial_field(&self, grid: &Arc<Grid>) -> Result<Field> {
        match self.initial_state {
            InitialState::Gaussian => initial_gaussian(grid, &self.initial_weights, self.t0),
            InitialState::Vortex => initial_vortex(grid, self.t0),
        }
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}
