//! Scenario files: everything a run needs, validated up front.

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setcert::geom::{regular_polygon, AxisBox, BallFit, HPolytope};
use setcert::sysmodel::{AmrParams, AmrSwitchedSystem, LinearSwitchedSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSpec,
    /// Seed set for the linear pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<SetSpec>,
    /// Controllable-set iteration parameters (linear pipeline).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmSpec>,
    /// Grid certification parameters (AMR pipeline).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certification: Option<CertificationSpec>,
    /// Closed-loop simulation parameters (linear pipeline).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSpec {
    Linear {
        modes: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "X")]
        x: BoxSpec,
        #[serde(rename = "W")]
        w: SetSpec,
    },
    Amr {
        params: AmrParams,
        delta: f64,
        #[serde(rename = "W")]
        w: AmrNoiseSpec,
        bmax: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Polytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Ball { radius: f64, facets: usize, fit: BallFit },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmrNoiseSpec {
    pub wb: f64,
    pub ws: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub k_stop: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationSpec {
    pub b0: f64,
    pub epsilon: f64,
    /// Growth iterations; 0 skips domain growth.
    pub k_max: usize,
    #[serde(default = "default_per_axis")]
    pub per_axis: usize,
}

fn default_per_axis() -> usize {
    150
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub x0: Vec<f64>,
    pub steps: usize,
    pub n_runs: usize,
    pub seed: u64,
}

impl SetSpec {
    pub fn to_polytope(&self, field: &str) -> Result<HPolytope> {
        match self {
            SetSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    bail!("{field}: box lower/upper length mismatch");
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    bail!("{field}: box requires lower <= upper");
                }
                Ok(AxisBox::new(lower.clone(), upper.clone()).to_hpolytope())
            }
            SetSpec::Polytope { a, b } => {
                if a.len() != b.len() {
                    bail!("{field}: A row count must match b length");
                }
                let n = a.first().map(|r| r.len()).unwrap_or(0);
                if n == 0 || a.iter().any(|r| r.len() != n) {
                    bail!("{field}: polytope rows must be nonempty and uniform");
                }
                let rows = a
                    .iter()
                    .zip(b)
                    .map(|(r, &off)| (DVector::from_column_slice(r), off))
                    .collect();
                let p = HPolytope::from_rows(rows, n);
                if p.is_empty() {
                    bail!("{field}: polytope is empty");
                }
                Ok(p)
            }
            SetSpec::Ball { radius, facets, fit } => {
                if *radius <= 0.0 {
                    bail!("{field}: ball radius must be positive");
                }
                if *facets < 3 {
                    bail!("{field}: ball needs at least 3 facets");
                }
                Ok(regular_polygon(*radius, *facets, *fit))
            }
        }
    }
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        let scenario: Scenario = serde_json::from_str(&raw)
            .with_context(|| format!("parsing scenario {}", path.display()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Check every downstream precondition before any computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            bail!("name: must be nonempty");
        }
        match &self.system {
            SystemSpec::Linear { modes, x, w } => {
                if modes.len() < 2 {
                    bail!("system.modes: need at least 2 modes");
                }
                let n = x.lower.len();
                if n == 0 || x.upper.len() != n {
                    bail!("system.X: inconsistent box dimensions");
                }
                for (i, m) in modes.iter().enumerate() {
                    if m.len() != n || m.iter().any(|row| row.len() != n) {
                        bail!("system.modes[{i}]: expected a {n}x{n} matrix");
                    }
                }
                self.linear_system()?;
                let _ = w;
                if self.omega0.is_none() {
                    bail!("omega0: required for linear scenarios");
                }
                let omega0 = self.omega0_polytope()?;
                if omega0.dim() != n {
                    bail!("omega0: dimension mismatch with the system");
                }
                let Some(algorithm) = &self.algorithm else {
                    bail!("algorithm: required for linear scenarios");
                };
                if algorithm.k_stop < 1 {
                    bail!("algorithm.k_stop: must be at least 1");
                }
                if algorithm.epsilon < 0.0 {
                    bail!("algorithm.epsilon: must be nonnegative");
                }
                if let Some(sim) = &self.simulation {
                    if sim.x0.len() != n {
                        bail!("simulation.x0: expected dimension {n}");
                    }
                    if sim.steps == 0 || sim.n_runs == 0 {
                        bail!("simulation: steps and n_runs must be positive");
                    }
                }
                if self.certification.is_some() {
                    bail!("certification: only valid for amr scenarios");
                }
            }
            SystemSpec::Amr { .. } => {
                self.amr_system()?;
                let Some(cert) = &self.certification else {
                    bail!("certification: required for amr scenarios");
                };
                let SystemSpec::Amr { bmax, .. } = &self.system else { unreachable!() };
                if cert.b0 >= *bmax {
                    bail!("certification.b0: must be below system.bmax");
                }
                if cert.per_axis < 2 {
                    bail!("certification.per_axis: must be at least 2");
                }
                if cert.epsilon < 0.0 {
                    bail!("certification.epsilon: must be nonnegative");
                }
                if self.simulation.is_some() || self.algorithm.is_some() || self.omega0.is_some() {
                    bail!("amr scenarios take only the certification block");
                }
            }
        }
        Ok(())
    }

    pub fn linear_system(&self) -> Result<LinearSwitchedSystem> {
        let SystemSpec::Linear { modes, x, w } = &self.system else {
            bail!("system: expected a linear system");
        };
        let n = x.lower.len();
        let mats: Vec<DMatrix<f64>> = modes
            .iter()
            .map(|m| DMatrix::from_fn(n, n, |r, c| m[r][c]))
            .collect();
        let state_box = AxisBox::new(x.lower.clone(), x.upper.clone());
        let uncertainty = w.to_polytope("system.W")?;
        LinearSwitchedSystem::new(mats, state_box, uncertainty)
            .map_err(|e| anyhow::anyhow!("system: {e}"))
    }

    pub fn amr_system(&self) -> Result<AmrSwitchedSystem> {
        let SystemSpec::Amr { params, delta, w, .. } = &self.system else {
            bail!("system: expected an amr system");
        };
        AmrSwitchedSystem::new(params.clone(), *delta, w.wb, w.ws)
            .map_err(|e| anyhow::anyhow!("system: {e}"))
    }

    pub fn omega0_polytope(&self) -> Result<HPolytope> {
        self.omega0
            .as_ref()
            .context("omega0: missing")?
            .to_polytope("omega0")
    }
}
