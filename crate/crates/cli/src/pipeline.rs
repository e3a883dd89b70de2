//! Run orchestration: execute the pipeline a scenario describes and persist
//! every artifact under the run directory.

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use setcert::control::{batch_simulate, write_summary_json, write_trajectory_csv, SwitchingLaw};
use setcert::gridcert::{
    certify_rccs_grid, grow_domain_grid, write_classification_csv, GridSpec,
};
use setcert::reach::{algorithm1, save_ladder, BoundaryConfig, Certificate, LFunction};
use setcert::sysmodel::SystemModel;

use crate::scenario::{Scenario, SystemSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    /// SHA-256 of the scenario file bytes.
    pub config_hash: String,
    pub outcome: RunOutcome,
    pub timings_s: BTreeMap<String, f64>,
    /// Files written, relative to the run directory, sorted.
    pub manifest: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "lowercase")]
pub enum RunOutcome {
    Linear {
        certificate: Certificate,
        levels_stored: Vec<usize>,
        levels_computed: Vec<usize>,
        simulation: Option<SimOutcome>,
    },
    Amr {
        certified: bool,
        b0: f64,
        epsilon: f64,
        grid_points: usize,
        inside_count: usize,
        growth: Option<GrowthOutcome>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOutcome {
    pub n_runs: usize,
    pub converged: usize,
    pub max_final_distance: f64,
    pub max_l_increase_outside: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthOutcome {
    pub iterations: usize,
    pub final_inside: usize,
    pub fixed_point_at: Option<usize>,
}

impl RunReport {
    pub fn certified(&self) -> bool {
        match &self.outcome {
            RunOutcome::Linear { certificate, .. } => certificate.rccs_at.is_some(),
            RunOutcome::Amr { certified, .. } => *certified,
        }
    }
}

/// Execute the scenario and write all artifacts into `out_dir`.
pub fn run(scenario_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<RunReport> {
    let scenario = Scenario::load(scenario_path)?;
    let raw = std::fs::read(scenario_path)?;
    let config_hash = hex_digest(&raw);
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut manifest: Vec<PathBuf> = Vec::new();
    let scenario_copy = out_dir.join("scenario.json");
    std::fs::write(&scenario_copy, &raw)?;
    manifest.push(scenario_copy);

    let mut timings = BTreeMap::new();
    let outcome = match &scenario.system {
        SystemSpec::Linear { .. } => {
            run_linear(&scenario, out_dir, seed_override, &mut manifest, &mut timings)?
        }
        SystemSpec::Amr { .. } => run_amr(&scenario, out_dir, &mut manifest, &mut timings)?,
    };

    let mut rel: Vec<String> = manifest
        .iter()
        .map(|p| {
            p.strip_prefix(out_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    rel.sort();
    let report = RunReport { name: scenario.name.clone(), config_hash, outcome, timings_s: timings, manifest: rel };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

fn run_linear(
    scenario: &Scenario,
    out_dir: &Path,
    seed_override: Option<u64>,
    manifest: &mut Vec<PathBuf>,
    timings: &mut BTreeMap<String, f64>,
) -> Result<RunOutcome> {
    let sys = scenario.linear_system()?;
    let omega0 = scenario.omega0_polytope()?;
    let algo = scenario.algorithm.as_ref().expect("validated");

    let t = Instant::now();
    let (certificate, mut ladder) = algorithm1(&sys, &omega0, algo.k_stop, algo.epsilon)
        .map_err(|e| anyhow::anyhow!("controllable-set iteration: {e}"))?;
    timings.insert("algorithm".into(), t.elapsed().as_secs_f64());

    let cfg = BoundaryConfig::default();
    let t = Instant::now();
    ladder.compute_h(&cfg);
    timings.insert("h_values".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let lfunction = LFunction::build(&ladder, &cfg).map_err(|e| anyhow::anyhow!("L build: {e}"))?;
    timings.insert("l_function".into(), t.elapsed().as_secs_f64());

    let ladder_dir = out_dir.join("ladder");
    let written = save_ladder(&ladder, &certificate, &ladder_dir)
        .map_err(|e| anyhow::anyhow!("saving ladder: {e}"))?;
    manifest.extend(written);
    let lf_path = out_dir.join("lfunction.json");
    std::fs::write(&lf_path, serde_json::to_string_pretty(&lfunction)?)?;
    manifest.push(lf_path);

    let simulation = if let Some(sim) = &scenario.simulation {
        let k_found = certificate.rccs_at.or(certificate.rcis_at);
        let target = match k_found {
            Some(k) => ladder.invariant_candidate(k),
            None => ladder.levels[0].clone(),
        };
        let model = SystemModel::Linear(sys);
        let law = SwitchingLaw::from_ladder(&model, &ladder, target);
        let x0 = DVector::from_column_slice(&sim.x0);
        let seed = seed_override.unwrap_or(sim.seed);
        let t = Instant::now();
        let (runs, summary) = batch_simulate(&law, Some(&lfunction), &x0, sim.steps, sim.n_runs, seed)
            .map_err(|e| anyhow::anyhow!("simulation: {e}"))?;
        timings.insert("simulation".into(), t.elapsed().as_secs_f64());
        let traj_dir = out_dir.join("trajectories");
        std::fs::create_dir_all(&traj_dir)?;
        for (i, run) in runs.iter().enumerate() {
            let path = traj_dir.join(format!("run_{i:03}.csv"));
            write_trajectory_csv(run, &path).map_err(|e| anyhow::anyhow!("writing csv: {e}"))?;
            manifest.push(path);
        }
        let summary_path = traj_dir.join("summary.json");
        write_summary_json(&summary, &summary_path)
            .map_err(|e| anyhow::anyhow!("writing summary: {e}"))?;
        manifest.push(summary_path);
        Some(SimOutcome {
            n_runs: summary.n_runs,
            converged: summary.converged,
            max_final_distance: summary.max_final_distance,
            max_l_increase_outside: summary.max_l_increase_outside,
        })
    } else {
        None
    };

    Ok(RunOutcome::Linear {
        levels_stored: ladder.meta.iter().map(|m| m.stored).collect(),
        levels_computed: ladder.meta.iter().map(|m| m.computed).collect(),
        certificate,
        simulation,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridCertificateFile {
    b0: f64,
    epsilon: f64,
    verdict: bool,
    grid_points: usize,
    inside_count: usize,
    per_axis: usize,
    b_max: f64,
}

fn run_amr(
    scenario: &Scenario,
    out_dir: &Path,
    manifest: &mut Vec<PathBuf>,
    timings: &mut BTreeMap<String, f64>,
) -> Result<RunOutcome> {
    let sys = scenario.amr_system()?;
    let cert_spec = scenario.certification.as_ref().expect("validated");
    let SystemSpec::Amr { bmax, .. } = &scenario.system else { unreachable!() };
    let spec = GridSpec { b_max: *bmax, per_axis: cert_spec.per_axis };

    let t = Instant::now();
    let (certified, classification, hull) =
        certify_rccs_grid(&sys, cert_spec.b0, &spec, cert_spec.epsilon)
            .map_err(|e| anyhow::anyhow!("grid certification: {e}"))?;
    timings.insert("certification".into(), t.elapsed().as_secs_f64());

    let grid_dir = out_dir.join("grid");
    std::fs::create_dir_all(&grid_dir)?;
    let csv_path = grid_dir.join("classification.csv");
    write_classification_csv(&classification, &csv_path)
        .map_err(|e| anyhow::anyhow!("writing classification: {e}"))?;
    manifest.push(csv_path);
    let hull_path = grid_dir.join("hull_cert.json");
    std::fs::write(&hull_path, serde_json::to_string_pretty(&hull)?)?;
    manifest.push(hull_path);
    let cert_file = GridCertificateFile {
        b0: cert_spec.b0,
        epsilon: cert_spec.epsilon,
        verdict: certified,
        grid_points: classification.points.len(),
        inside_count: classification.inside_count(),
        per_axis: spec.per_axis,
        b_max: spec.b_max,
    };
    let cert_path = grid_dir.join("certificate.json");
    std::fs::write(&cert_path, serde_json::to_string_pretty(&cert_file)?)?;
    manifest.push(cert_path);

    let growth = if certified && cert_spec.k_max >= 2 {
        let t = Instant::now();
        let ladder = grow_domain_grid(&sys, cert_spec.b0, &spec, cert_spec.k_max)
            .map_err(|e| anyhow::anyhow!("domain growth: {e}"))?;
        timings.insert("growth".into(), t.elapsed().as_secs_f64());
        let hulls_dir = grid_dir.join("hulls");
        std::fs::create_dir_all(&hulls_dir)?;
        for (i, h) in ladder.hulls.iter().enumerate() {
            let path = hulls_dir.join(format!("hull_{:04}.json", i + 1));
            std::fs::write(&path, serde_json::to_string(h)?)?;
            manifest.push(path);
        }
        let growth_path = grid_dir.join("growth.json");
        std::fs::write(
            &growth_path,
            serde_json::to_string_pretty(&serde_json::json!({
                "seed_b0": ladder.seed_b0,
                "inside_counts": ladder.inside_counts,
                "fixed_point_at": ladder.fixed_point_at,
            }))?,
        )?;
        manifest.push(growth_path);
        Some(GrowthOutcome {
            iterations: ladder.inside_counts.len(),
            final_inside: *ladder.inside_counts.last().unwrap(),
            fixed_point_at: ladder.fixed_point_at,
        })
    } else {
        None
    };

    Ok(RunOutcome::Amr {
        certified,
        b0: cert_spec.b0,
        epsilon: cert_spec.epsilon,
        grid_points: classification.points.len(),
        inside_count: classification.inside_count(),
        growth,
    })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Default run directory for a scenario: `runs/<name>` beside the cwd.
pub fn default_out_dir(scenario: &Path) -> Result<PathBuf> {
    let stem = scenario
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.to_owned());
    match stem {
        Some(s) => Ok(PathBuf::from("runs").join(s)),
        None => bail!("cannot derive a run directory from {}", scenario.display()),
    }
}
