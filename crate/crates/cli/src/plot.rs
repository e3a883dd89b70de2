//! Deterministic SVG rendering of run artifacts: fixed viewport, fixed
//! float precision, stable element order.

use anyhow::{bail, Result};
use nalgebra::DVector;
use setcert::control::SwitchingLaw;
use setcert::geom::{PolyUnion, VPolytope};
use setcert::gridcert::seed_triangle;
use setcert::reach::{domain_approximation, load_ladder};
use setcert::sysmodel::SystemModel;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::scenario::{Scenario, SystemSpec};

const SIZE: f64 = 840.0;
const MARGIN: f64 = 30.0;

const LEVEL_PALETTE: [&str; 10] = [
    "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c", "#083d7f",
    "#06306b", "#042451",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "lowercase")]
pub enum Figure {
    /// Seed set, eroded seed, and the computed domain approximation.
    Sets,
    /// Closed-loop trajectories over the domain approximation.
    Trajectories,
    /// The switching law as a two-color point field.
    Law,
    /// Grid classification of the AMR certification.
    Grid,
    /// Nested ladder levels or growth hulls.
    Ladder,
}

struct Canvas {
    world: (f64, f64, f64, f64),
    body: String,
}

impl Canvas {
    fn new(world: (f64, f64, f64, f64)) -> Self {
        Self { world, body: String::new() }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, y0, x1, y1) = self.world;
        let sx = (SIZE - 2.0 * MARGIN) / (x1 - x0);
        let sy = (SIZE - 2.0 * MARGIN) / (y1 - y0);
        let s = sx.min(sy);
        let cx = 0.5 * (x0 + x1);
        let cy = 0.5 * (y0 + y1);
        let px = SIZE / 2.0 + (x - cx) * s;
        let py = SIZE / 2.0 - (y - cy) * s;
        (px, py)
    }

    fn path_of(&self, pts: &[DVector<f64>], close: bool) -> String {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let (px, py) = self.map(p[0], p[1]);
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{px:.3} {py:.3} ");
        }
        if close {
            d.push('Z');
        }
        d
    }

    fn polygon(&mut self, pts: &[DVector<f64>], fill: &str, stroke: &str, width: f64, opacity: f64) {
        if pts.len() < 2 {
            return;
        }
        let d = self.path_of(pts, true);
        let _ = writeln!(
            self.body,
            r#"<path d="{d}" fill="{fill}" stroke="{stroke}" stroke-width="{width:.2}" fill-opacity="{opacity:.2}"/>"#
        );
    }

    fn polyline(&mut self, pts: &[DVector<f64>], stroke: &str, width: f64, opacity: f64) {
        if pts.len() < 2 {
            return;
        }
        let d = self.path_of(pts, false);
        let _ = writeln!(
            self.body,
            r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width:.2}" stroke-opacity="{opacity:.2}"/>"#
        );
    }

    fn dot(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let (px, py) = self.map(x, y);
        let _ = writeln!(self.body, r#"<circle cx="{px:.3}" cy="{py:.3}" r="{r:.2}" fill="{fill}"/>"#);
    }

    fn finish(self, title: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<title>{title}</title>\n<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn part_outline(part: &setcert::geom::HPolytope) -> Option<Vec<DVector<f64>>> {
    part.vertices().ok().filter(|v| v.len() >= 2)
}

fn draw_union(canvas: &mut Canvas, union: &PolyUnion, fill: &str, stroke: &str, opacity: f64) {
    for part in &union.parts {
        if let Some(verts) = part_outline(part) {
            canvas.polygon(&verts, fill, stroke, 0.4, opacity);
        }
    }
}

/// Render one figure from a finished run directory.
pub fn plot(run_dir: &Path, figure: Figure) -> Result<PathBuf> {
    let scenario_path = run_dir.join("scenario.json");
    if !scenario_path.exists() {
        bail!("missing artifact: {}", scenario_path.display());
    }
    let scenario = Scenario::load(&scenario_path)?;
    let svg = match (&scenario.system, figure) {
        (SystemSpec::Linear { .. }, Figure::Sets) => sets_figure(&scenario, run_dir)?,
        (SystemSpec::Linear { .. }, Figure::Trajectories) => trajectories_figure(&scenario, run_dir)?,
        (SystemSpec::Linear { .. }, Figure::Law) => law_figure(&scenario, run_dir)?,
        (SystemSpec::Linear { .. }, Figure::Ladder) => ladder_figure(&scenario, run_dir)?,
        (SystemSpec::Amr { .. }, Figure::Grid) => grid_figure(&scenario, run_dir)?,
        (SystemSpec::Amr { .. }, Figure::Ladder) => hulls_figure(&scenario, run_dir)?,
        (system, figure) => bail!(
            "figure {figure:?} is not available for a {} scenario",
            match system {
                SystemSpec::Linear { .. } => "linear",
                SystemSpec::Amr { .. } => "amr",
            }
        ),
    };
    let plots = run_dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    let name = match figure {
        Figure::Sets => "sets",
        Figure::Trajectories => "trajectories",
        Figure::Law => "law",
        Figure::Grid => "grid",
        Figure::Ladder => "ladder",
    };
    let path = plots.join(format!("{name}.svg"));
    std::fs::write(&path, svg)?;
    Ok(path)
}

fn linear_world(scenario: &Scenario) -> Result<(f64, f64, f64, f64)> {
    let SystemSpec::Linear { x, .. } = &scenario.system else { bail!("not linear") };
    Ok((x.lower[0], x.lower[1], x.upper[0], x.upper[1]))
}

fn require_ladder(run_dir: &Path) -> Result<(setcert::reach::ReachLadder, setcert::reach::Certificate)> {
    let dir = run_dir.join("ladder");
    if !dir.join("ladder_meta.json").exists() {
        bail!("missing artifact: {}", dir.join("ladder_meta.json").display());
    }
    load_ladder(&dir).map_err(|e| anyhow::anyhow!("loading ladder: {e}"))
}

fn sets_figure(scenario: &Scenario, run_dir: &Path) -> Result<String> {
    let (ladder, _) = require_ladder(run_dir)?;
    let sys = scenario.linear_system()?;
    let mut canvas = Canvas::new(linear_world(scenario)?);
    let domain = domain_approximation(&ladder);
    draw_union(&mut canvas, &domain, "#c6dbef", "#9ecae1", 0.9);
    // Eroded seed in orange, seed contour in black, uncertainty set in gray.
    if let Ok(eroded) = ladder.omega0.erode(&sys.uncertainty) {
        if !eroded.is_empty() {
            if let Some(v) = part_outline(&eroded) {
                canvas.polygon(&v, "#fdae6b", "#e6550d", 0.8, 0.95);
            }
        }
    }
    if let Some(v) = part_outline(&sys.uncertainty) {
        canvas.polygon(&v, "#bdbdbd", "#636363", 0.6, 0.9);
    }
    if let Some(v) = part_outline(&ladder.omega0) {
        canvas.polygon(&v, "none", "#000000", 1.6, 1.0);
    }
    Ok(canvas.finish(&format!("{}: seed, eroded seed, domain approximation", scenario.name)))
}

fn trajectories_figure(scenario: &Scenario, run_dir: &Path) -> Result<String> {
    let (ladder, cert) = require_ladder(run_dir)?;
    let traj_dir = run_dir.join("trajectories");
    if !traj_dir.exists() {
        bail!("missing artifact: {}", traj_dir.display());
    }
    let mut canvas = Canvas::new(linear_world(scenario)?);
    draw_union(&mut canvas, &domain_approximation(&ladder), "#deebf7", "#c6dbef", 0.9);
    if let Some(k) = cert.rccs_at.or(cert.rcis_at) {
        draw_union(&mut canvas, &ladder.cumulative(k), "#fee6ce", "#fdae6b", 0.8);
    }
    if let Some(v) = part_outline(&ladder.omega0) {
        canvas.polygon(&v, "none", "#000000", 1.6, 1.0);
    }
    let mut names: Vec<_> = std::fs::read_dir(&traj_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |e| e == "csv"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("missing artifact: no trajectory csv files in {}", traj_dir.display());
    }
    let mut start: Option<(f64, f64)> = None;
    for path in &names {
        let text = std::fs::read_to_string(path)?;
        let pts: Vec<DVector<f64>> = text
            .lines()
            .skip(1)
            .filter_map(|line| {
                let mut it = line.split(',');
                let _step = it.next()?;
                let x1: f64 = it.next()?.parse().ok()?;
                let x2: f64 = it.next()?.parse().ok()?;
                Some(DVector::from_vec(vec![x1, x2]))
            })
            .collect();
        if let Some(p) = pts.first() {
            start = Some((p[0], p[1]));
        }
        canvas.polyline(&pts, "#08519c", 0.8, 0.45);
    }
    if let Some((x, y)) = start {
        canvas.dot(x, y, 4.0, "#d62728");
    }
    Ok(canvas.finish(&format!("{}: closed-loop trajectories", scenario.name)))
}

fn law_figure(scenario: &Scenario, run_dir: &Path) -> Result<String> {
    let (ladder, cert) = require_ladder(run_dir)?;
    let sys = SystemModel::Linear(scenario.linear_system()?);
    let target = match cert.rccs_at.or(cert.rcis_at) {
        Some(k) => ladder.invariant_candidate(k),
        None => ladder.levels[0].clone(),
    };
    let law = SwitchingLaw::from_ladder(&sys, &ladder, target);
    let world = linear_world(scenario)?;
    let mut canvas = Canvas::new(world);
    let colors = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];
    let n = 161;
    for i in 0..n {
        for j in 0..n {
            let x = world.0 + (world.2 - world.0) * i as f64 / (n - 1) as f64;
            let y = world.1 + (world.3 - world.1) * j as f64 / (n - 1) as f64;
            let p = DVector::from_vec(vec![x, y]);
            if let Ok(sigma) = law.select_mode(&p) {
                canvas.dot(x, y, 1.6, colors[(sigma - 1) % colors.len()]);
            }
        }
    }
    if let Some(v) = part_outline(&ladder.omega0) {
        canvas.polygon(&v, "none", "#000000", 1.4, 1.0);
    }
    Ok(canvas.finish(&format!("{}: switching law", scenario.name)))
}

fn ladder_figure(scenario: &Scenario, run_dir: &Path) -> Result<String> {
    let (ladder, _) = require_ladder(run_dir)?;
    let mut canvas = Canvas::new(linear_world(scenario)?);
    for (k, level) in ladder.levels.iter().enumerate().rev() {
        let color = LEVEL_PALETTE[(ladder.levels.len() - 1 - k).min(LEVEL_PALETTE.len() - 1)];
        draw_union(&mut canvas, level, color, "#4292c6", 0.75);
    }
    if let Some(v) = part_outline(&ladder.omega0) {
        canvas.polygon(&v, "none", "#000000", 1.6, 1.0);
    }
    Ok(canvas.finish(&format!("{}: controllable-set ladder", scenario.name)))
}

fn amr_world(scenario: &Scenario) -> Result<(f64, f64, f64, f64)> {
    let SystemSpec::Amr { bmax, .. } = &scenario.system else { bail!("not amr") };
    let pad = 0.03 * bmax;
    Ok((-pad, -pad, bmax + pad, bmax + pad))
}

fn grid_figure(scenario: &Scenario, run_dir: &Path) -> Result<String> {
    let csv_path = run_dir.join("grid/classification.csv");
    if !csv_path.exists() {
        bail!("missing artifact: {}", csv_path.display());
    }
    let text = std::fs::read_to_string(&csv_path)?;
    let mut canvas = Canvas::new(amr_world(scenario)?);
    for line in text.lines().skip(1) {
        let mut it = line.split(',');
        let (Some(b), Some(s), Some(label)) = (it.next(), it.next(), it.next()) else { continue };
        let (b, s): (f64, f64) = (b.parse()?, s.parse()?);
        let color = if label == "inside" { "#3182bd" } else { "#d9d9d9" };
        canvas.dot(b, s, 1.8, color);
    }
    let hull_path = run_dir.join("grid/hull_cert.json");
    if hull_path.exists() {
        let hull: VPolytope = serde_json::from_str(&std::fs::read_to_string(&hull_path)?)?;
        canvas.polygon(&hull.to_vectors(), "none", "#08519c", 1.4, 1.0);
    }
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("grid/certificate.json"))?)?;
    if let Some(b0) = cert.get("b0").and_then(|v| v.as_f64()) {
        if let Ok(v) = seed_triangle(b0).vertices() {
            canvas.polygon(&v, "none", "#000000", 1.6, 1.0);
        }
    }
    Ok(canvas.finish(&format!("{}: grid classification", scenario.name)))
}

fn hulls_figure(scenario: &Scenario, run_dir: &Path) -> Result<String> {
    let hulls_dir = run_dir.join("grid/hulls");
    if !hulls_dir.exists() {
        bail!("missing artifact: {}", hulls_dir.display());
    }
    let mut names: Vec<_> = std::fs::read_dir(&hulls_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |e| e == "json"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("missing artifact: no hull files in {}", hulls_dir.display());
    }
    let mut canvas = Canvas::new(amr_world(scenario)?);
    let stride = (names.len() / 40).max(1);
    for (i, path) in names.iter().enumerate().rev() {
        if i % stride != 0 && i + 1 != names.len() {
            continue;
        }
        let hull: VPolytope = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let color = LEVEL_PALETTE[(i / stride).min(LEVEL_PALETTE.len() - 1)];
        canvas.polygon(&hull.to_vectors(), color, "#4292c6", 0.5, 0.5);
    }
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("grid/certificate.json"))?)?;
    if let Some(b0) = cert.get("b0").and_then(|v| v.as_f64()) {
        if let Ok(v) = seed_triangle(b0).vertices() {
            canvas.polygon(&v, "none", "#000000", 1.6, 1.0);
        }
    }
    Ok(canvas.finish(&format!("{}: growth hulls", scenario.name)))
}
