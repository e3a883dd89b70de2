//! Uncertain switched systems: the linear class `x+ = A_sigma x + w` and the
//! Euler-discretized two-mode antimicrobial-resistance model.
//!
//! Mode indices are 1-based throughout the public API.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{AxisBox, HPolytope, GeomError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SysError {
    #[error("mode {sigma} out of range 1..={q}")]
    ModeOutOfRange { sigma: usize, q: usize },
    #[error("uncertainty vector lies outside the uncertainty set")]
    UncertaintyOutOfSet,
    #[error("bacterial load must be nonnegative, got {0}")]
    NegativeLoad(f64),
    #[error("state outside the feasible domain 0 <= s <= b <= N: ({b}, {s})")]
    DomainViolation { b: f64, s: f64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// Linear switched system with additive uncertainty, `q >= 2` nonsingular
/// modes, box state constraints, and a polytopic uncertainty set containing
/// the origin in its interior.
#[derive(Debug, Clone)]
pub struct LinearSwitchedSystem {
    modes: Vec<DMatrix<f64>>,
    pub state_box: AxisBox,
    pub uncertainty: HPolytope,
    w_vertices: Vec<DVector<f64>>,
    w_bbox: AxisBox,
}

impl LinearSwitchedSystem {
    pub fn new(
        modes: Vec<DMatrix<f64>>,
        state_box: AxisBox,
        uncertainty: HPolytope,
    ) -> Result<Self, SysError> {
        if modes.len() < 2 {
            return Err(SysError::InvalidSystem(format!(
                "need at least 2 modes, got {}",
                modes.len()
            )));
        }
        let n = state_box.dim();
        for (i, m) in modes.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(SysError::InvalidSystem(format!(
                    "mode {} has shape {}x{}, expected {n}x{n}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            let det = m.determinant();
            if det.abs() < 1e-12 * m.norm().powi(n as i32).max(1.0) {
                return Err(SysError::InvalidSystem(format!(
                    "mode {} is singular (det = {det:.3e})",
                    i + 1
                )));
            }
        }
        if !(0..n).all(|i| state_box.lower[i] < 0.0 && state_box.upper[i] > 0.0) {
            return Err(SysError::InvalidSystem(
                "state box must contain the origin in its interior".into(),
            ));
        }
        if uncertainty.is_empty() || uncertainty.offsets().iter().any(|&b| b <= 0.0) {
            return Err(SysError::InvalidSystem(
                "uncertainty set must contain the origin in its interior".into(),
            ));
        }
        let w_vertices = uncertainty.vertices()?;
        let w_bbox = uncertainty.bbox()?;
        Ok(Self { modes, state_box, uncertainty, w_vertices, w_bbox })
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.state_box.dim()
    }

    pub fn mode(&self, sigma: usize) -> Result<&DMatrix<f64>, SysError> {
        self.modes
            .get(sigma.wrapping_sub(1))
            .ok_or(SysError::ModeOutOfRange { sigma, q: self.modes.len() })
    }

    pub fn uncertainty_vertices(&self) -> &[DVector<f64>] {
        &self.w_vertices
    }

    /// One step `A_sigma x + w`. The successor is returned raw; constraint
    /// violations are the caller's to detect.
    pub fn step(&self, x: &DVector<f64>, sigma: usize, w: &DVector<f64>) -> Result<DVector<f64>, SysError> {
        let a = self.mode(sigma)?;
        if !self.uncertainty.contains(w, 1e-7) {
            return Err(SysError::UncertaintyOutOfSet);
        }
        Ok(a * x + w)
    }
}

/// Parameters of the bacterial load / susceptible-subpopulation model.
///
/// Units: rates in 1/h, loads in cells.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AmrParams {
    /// Net growth rate of all subpopulations.
    pub growth_rate: f64,
    /// Logistic carrying capacity.
    pub carrying_capacity: f64,
    /// Maximum immune kill rate; must exceed the growth rate.
    pub kill_rate_max: f64,
    /// Total load at which the immune kill rate is half-maximal.
    pub half_max_load: f64,
    /// Kill rate of susceptible bacteria at the MIC dose.
    pub antibiotic_kill_rate: f64,
    /// Antibiotic-induced resistance rate at the MIC dose.
    pub resistance_rate: f64,
}

impl AmrParams {
    pub fn validate(&self) -> Result<(), SysError> {
        let p = self;
        if !(p.growth_rate > 0.0) {
            return Err(SysError::InvalidSystem("growth_rate must be positive".into()));
        }
        if !(p.kill_rate_max > p.growth_rate) {
            return Err(SysError::InvalidSystem(
                "kill_rate_max must exceed growth_rate".into(),
            ));
        }
        if !(p.antibiotic_kill_rate > p.growth_rate) {
            return Err(SysError::InvalidSystem(
                "antibiotic_kill_rate must exceed growth_rate".into(),
            ));
        }
        if !(p.resistance_rate > 0.0) {
            return Err(SysError::InvalidSystem("resistance_rate must be positive".into()));
        }
        if !(p.half_max_load > 0.0 && p.half_max_load < p.carrying_capacity) {
            return Err(SysError::InvalidSystem(
                "half_max_load must lie in (0, carrying_capacity)".into(),
            ));
        }
        Ok(())
    }

    /// Immune kill rate `I(b) = beta * K / (K + b)`, strictly decreasing.
    pub fn immune_rate(&self, b: f64) -> Result<f64, SysError> {
        if b < 0.0 {
            return Err(SysError::NegativeLoad(b));
        }
        Ok(self.kill_rate_max * self.half_max_load / (self.half_max_load + b))
    }
}

/// Euler-discretized two-mode AMR system. State `x = (b, s)` with total load
/// `b` and susceptible load `s`, constrained to `0 <= s <= b <= N`. Mode 1
/// is immune response alone; mode 2 adds constant-dose antibiotic action on
/// the susceptible subpopulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmrSwitchedSystem {
    pub params: AmrParams,
    /// Sampling period of the forward-Euler discretization (h).
    pub delta: f64,
    /// Uncertainty bounds: `w in [-wb, wb] x [-ws, ws]` (cells).
    pub w_bound_b: f64,
    pub w_bound_s: f64,
}

impl AmrSwitchedSystem {
    pub fn new(params: AmrParams, delta: f64, w_bound_b: f64, w_bound_s: f64) -> Result<Self, SysError> {
        params.validate()?;
        if !(delta > 0.0) {
            return Err(SysError::InvalidSystem("delta must be positive".into()));
        }
        if w_bound_b < 0.0 || w_bound_s < 0.0 {
            return Err(SysError::InvalidSystem("uncertainty bounds must be nonnegative".into()));
        }
        Ok(Self { params, delta, w_bound_b, w_bound_s })
    }

    pub fn num_modes(&self) -> usize {
        2
    }

    /// Feasibility of `0 <= s <= b <= N` within an absolute tolerance.
    pub fn in_domain(&self, x: &DVector<f64>, tol: f64) -> bool {
        let (b, s) = (x[0], x[1]);
        s >= -tol && s <= b + tol && b <= self.params.carrying_capacity + tol
    }

    /// Continuous-time vector field of the active mode.
    pub fn vector_field(&self, x: &DVector<f64>, sigma: usize) -> Result<DVector<f64>, SysError> {
        if sigma == 0 || sigma > 2 {
            return Err(SysError::ModeOutOfRange { sigma, q: 2 });
        }
        let (b, s) = (x[0], x[1]);
        if !self.in_domain(x, 1e-9 * self.params.carrying_capacity.max(1.0)) {
            return Err(SysError::DomainViolation { b, s });
        }
        let p = &self.params;
        let logistic = p.growth_rate * (1.0 - b / p.carrying_capacity);
        let immune = p.immune_rate(b)?;
        let mut db = logistic * b - immune * b;
        let mut ds = logistic * s - immune * s;
        if sigma == 2 {
            db -= p.antibiotic_kill_rate * s;
            ds -= (p.antibiotic_kill_rate + p.resistance_rate) * s;
        }
        Ok(DVector::from_vec(vec![db, ds]))
    }

    /// Forward-Euler step `x + delta * f_sigma(x) + w`; the successor is not
    /// clipped to the domain.
    pub fn step(&self, x: &DVector<f64>, sigma: usize, w: &DVector<f64>) -> Result<DVector<f64>, SysError> {
        if w[0].abs() > self.w_bound_b + 1e-7 || w[1].abs() > self.w_bound_s + 1e-7 {
            return Err(SysError::UncertaintyOutOfSet);
        }
        let f = self.vector_field(x, sigma)?;
        Ok(x + f * self.delta + w)
    }

    /// The three positive-corner uncertainty realizations used by the
    /// grid-certification procedure.
    pub fn corner_uncertainties(&self) -> [DVector<f64>; 3] {
        corner_uncertainties(self.w_bound_b, self.w_bound_s)
    }
}

/// Worst-case corners `(wb, 0), (0, ws), (wb, ws)` of the uncertainty box.
pub fn corner_uncertainties(wb: f64, ws: f64) -> [DVector<f64>; 3] {
    [
        DVector::from_vec(vec![wb, 0.0]),
        DVector::from_vec(vec![0.0, ws]),
        DVector::from_vec(vec![wb, ws]),
    ]
}

/// A switched system of either supported class, with the uniform step /
/// noise / certification-point interface the control layer works against.
#[derive(Debug, Clone)]
pub enum SystemModel {
    Linear(LinearSwitchedSystem),
    Amr(AmrSwitchedSystem),
}

impl SystemModel {
    pub fn num_modes(&self) -> usize {
        match self {
            SystemModel::Linear(s) => s.num_modes(),
            SystemModel::Amr(s) => s.num_modes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemModel::Linear(s) => s.dim(),
            SystemModel::Amr(_) => 2,
        }
    }

    pub fn step(&self, x: &DVector<f64>, sigma: usize, w: &DVector<f64>) -> Result<DVector<f64>, SysError> {
        match self {
            SystemModel::Linear(s) => s.step(x, sigma, w),
            SystemModel::Amr(s) => s.step(x, sigma, w),
        }
    }

    /// Finitely many uncertainty realizations that certify a one-step
    /// inclusion into a convex target: all vertices of `W` for the linear
    /// class (exact), the three positive corners for the AMR class.
    pub fn certification_points(&self) -> Vec<DVector<f64>> {
        match self {
            SystemModel::Linear(s) => s.uncertainty_vertices().to_vec(),
            SystemModel::Amr(s) => s.corner_uncertainties().to_vec(),
        }
    }

    /// Uniform draw from the uncertainty set: per-coordinate for boxes,
    /// rejection from the bounding box for general polytopes.
    pub fn sample_noise<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            SystemModel::Linear(s) => {
                let bb = &s.w_bbox;
                for _ in 0..100_000 {
                    let cand = DVector::from_iterator(
                        bb.dim(),
                        (0..bb.dim()).map(|i| rng.gen_range(bb.lower[i]..=bb.upper[i])),
                    );
                    if s.uncertainty.contains(&cand, 0.0) {
                        return cand;
                    }
                }
                s.w_bbox.center()
            }
            SystemModel::Amr(s) => DVector::from_vec(vec![
                rng.gen_range(-s.w_bound_b..=s.w_bound_b),
                rng.gen_range(-s.w_bound_s..=s.w_bound_s),
            ]),
        }
    }

    /// State-constraint membership.
    pub fn in_state_domain(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            SystemModel::Linear(s) => s.state_box.contains(x, tol),
            SystemModel::Amr(s) => s.in_domain(x, tol * s.params.carrying_capacity.max(1.0)),
        }
    }
}
