//! Grid-based contractivity certification and domain growth for the
//! nonlinear AMR system.
//!
//! A dense grid over the feasible triangle is classified point by point:
//! a point is inside the one-step robust controllable set of a target
//! region when, for some mode, all three worst-case corner uncertainties
//! land the successor in the target. The convex hull of inside points is an
//! inner approximation of the controllable set; containment of the
//! (inflated) seed certifies contractivity.
//!
//! Set membership here is taken relative to the feasible domain
//! `{0 <= s <= b}`: target facets that coincide with the domain boundary
//! impose no margin, mirroring interiors relative to the state constraints.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::geom::{convex_hull, hrep, GeomError, HPolytope, VPolytope};
use crate::sysmodel::{AmrSwitchedSystem, SysError};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("candidate threshold must satisfy b0 < b_max (b0 = {b0}, b_max = {b_max})")]
    ThresholdOutOfRange { b0: f64, b_max: f64 },
    #[error("fewer than 3 inside points ({0}); the hull is degenerate")]
    TooFewInsidePoints(usize),
    #[error("seed region not certified; domain growth requires a certified seed")]
    NotCertified,
    #[error("monotone growth violated at iteration {iteration}: {lost} points left the inside set")]
    NestingViolation { iteration: usize, lost: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    System(#[from] SysError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Uniform grid over the triangle `{0 <= s <= b <= b_max}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub b_max: f64,
    pub per_axis: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.per_axis < 2 {
            return Err(GridError::InvalidSpec(format!(
                "per_axis must be at least 2, got {}",
                self.per_axis
            )));
        }
        if !(self.b_max > 0.0) {
            return Err(GridError::InvalidSpec("b_max must be positive".into()));
        }
        Ok(())
    }

    /// Triangular-number point count `per_axis * (per_axis + 1) / 2`.
    pub fn point_count(&self) -> usize {
        self.per_axis * (self.per_axis + 1) / 2
    }
}

/// Grid points in deterministic row-major order: outer loop over the load
/// axis, inner loop over susceptible values up to the diagonal.
pub fn make_grid(spec: &GridSpec) -> Result<Vec<DVector<f64>>, GridError> {
    spec.validate()?;
    let n = spec.per_axis;
    let step = spec.b_max / (n - 1) as f64;
    let mut pts = Vec::with_capacity(spec.point_count());
    for i in 0..n {
        let b = i as f64 * step;
        for j in 0..=i {
            pts.push(DVector::from_vec(vec![b, j as f64 * step]));
        }
    }
    Ok(pts)
}

/// Target region for successor classification, evaluated relative to the
/// feasible domain.
#[derive(Debug, Clone)]
pub enum Region {
    /// `{ b <= b0 }`: the seed `{(b, s) in X : b <= b0}` with the
    /// domain-boundary facets relaxed.
    LoadSlab { b0: f64 },
    /// Membership in a polytope whose domain-coincident facets were
    /// dropped; tolerance is absolute.
    Polytope { poly: HPolytope, tol: f64 },
}

impl Region {
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Region::LoadSlab { b0 } => x[0] <= b0 + 1e-9,
            Region::Polytope { poly, tol } => poly.contains(x, *tol),
        }
    }
}

/// Drop facets that coincide with the domain boundary `s >= 0` or
/// `s <= b`, making membership relative to the feasible triangle.
pub fn relax_to_domain(poly: &HPolytope, scale: f64) -> HPolytope {
    let sqrt2_inv = std::f64::consts::FRAC_1_SQRT_2;
    let rows: Vec<(DVector<f64>, f64)> = poly
        .rows()
        .filter(|(a, b)| {
            let on_s_axis = a[0].abs() < 1e-9 && (a[1] + 1.0).abs() < 1e-9;
            let on_diagonal = (a[0] + sqrt2_inv).abs() < 1e-9 && (a[1] - sqrt2_inv).abs() < 1e-9;
            let through_origin = b.abs() <= 1e-6 * scale;
            !((on_s_axis || on_diagonal) && through_origin)
        })
        .collect();
    HPolytope::from_rows(rows, 2)
}

/// The seed region `{(b, s) in X : b <= b0}` as a polytope.
pub fn seed_triangle(b0: f64) -> HPolytope {
    let sqrt2_inv = std::f64::consts::FRAC_1_SQRT_2;
    HPolytope::from_rows(
        vec![
            (DVector::from_vec(vec![0.0, -1.0]), 0.0),
            (DVector::from_vec(vec![-sqrt2_inv, sqrt2_inv]), 0.0),
            (DVector::from_vec(vec![1.0, 0.0]), b0),
        ],
        2,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Inside,
    Outside,
}

/// Point labels with the smallest certifying mode for inside points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub points: Vec<(Vec<f64>, Label, Option<usize>)>,
}

impl Classification {
    pub fn inside_points(&self) -> Vec<DVector<f64>> {
        self.points
            .iter()
            .filter(|(_, label, _)| *label == Label::Inside)
            .map(|(x, _, _)| DVector::from_column_slice(x))
            .collect()
    }

    pub fn inside_count(&self) -> usize {
        self.points.iter().filter(|(_, label, _)| *label == Label::Inside).count()
    }
}

/// Label a single point: inside iff the three corner-uncertainty successors
/// of some mode all land in the target region; the smallest such mode is
/// recorded.
pub fn classify_point(
    sys: &AmrSwitchedSystem,
    x: &DVector<f64>,
    target: &Region,
) -> Result<(Label, Option<usize>), GridError> {
    let corners = sys.corner_uncertainties();
    for sigma in 1..=sys.num_modes() {
        let mut all_in = true;
        for w in &corners {
            let next = sys.step(x, sigma, w)?;
            if !target.contains(&next) {
                all_in = false;
                break;
            }
        }
        if all_in {
            return Ok((Label::Inside, Some(sigma)));
        }
    }
    Ok((Label::Outside, None))
}

fn classify_grid(
    sys: &AmrSwitchedSystem,
    grid: &[DVector<f64>],
    target: &Region,
) -> Result<Classification, GridError> {
    let points: Vec<(Vec<f64>, Label, Option<usize>)> = grid
        .par_iter()
        .map(|x| {
            classify_point(sys, x, target)
                .map(|(label, mode)| (x.iter().copied().collect(), label, mode))
        })
        .collect::<Result<_, _>>()?;
    Ok(Classification { points })
}

/// Classify the grid against the seed `{b <= b0}`, hull the inside points,
/// and test whether the seed inflated by `eps` (on its non-domain facets)
/// lies inside the hull.
pub fn certify_rccs_grid(
    sys: &AmrSwitchedSystem,
    b0: f64,
    spec: &GridSpec,
    eps: f64,
) -> Result<(bool, Classification, VPolytope), GridError> {
    spec.validate()?;
    if b0 >= spec.b_max {
        return Err(GridError::ThresholdOutOfRange { b0, b_max: spec.b_max });
    }
    let grid = make_grid(spec)?;
    let classification = classify_grid(sys, &grid, &Region::LoadSlab { b0 })?;
    let inside = classification.inside_points();
    if inside.len() < 3 {
        return Err(GridError::TooFewInsidePoints(inside.len()));
    }
    let hull = convex_hull(&inside)?;
    let verdict = seed_inside_hull(&hull, b0, eps, spec.b_max)?;
    Ok((verdict, classification, hull))
}

fn seed_inside_hull(hull: &VPolytope, b0: f64, eps: f64, scale: f64) -> Result<bool, GridError> {
    let hull_h = relax_to_domain(&hrep(hull)?, scale);
    // Inflate only the load-threshold facet; domain-boundary facets carry
    // no margin requirement.
    let inflated = relax_to_domain(&seed_triangle(b0 + eps), scale);
    let verts = seed_triangle(b0 + eps).vertices()?;
    let _ = inflated;
    Ok(verts.iter().all(|v| hull_h.contains(v, 1e-9 * scale)))
}

/// Nested family of inside-point hulls from iterating the classification
/// against the previous hull.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HullLadder {
    pub seed_b0: f64,
    /// Hull of the inside points after each growth iteration.
    pub hulls: Vec<VPolytope>,
    pub inside_counts: Vec<usize>,
    /// Iteration at which reclassification produced no new inside points.
    pub fixed_point_at: Option<usize>,
}

/// Iterate the grid classification, replacing the target with the convex
/// hull of the previous inside set (relative to the domain), up to `k_max`
/// iterations or until a fixed point.
pub fn grow_domain_grid(
    sys: &AmrSwitchedSystem,
    b0: f64,
    spec: &GridSpec,
    k_max: usize,
) -> Result<HullLadder, GridError> {
    let (certified, classification, hull) = certify_rccs_grid(sys, b0, spec, 0.0)?;
    if !certified {
        return Err(GridError::NotCertified);
    }
    let grid = make_grid(spec)?;
    let mut inside: Vec<bool> = classification
        .points
        .iter()
        .map(|(_, label, _)| *label == Label::Inside)
        .collect();
    let mut hulls = vec![hull];
    let mut inside_counts = vec![classification.inside_count()];
    let mut fixed_point_at = None;
    let membership_tol = 1e-7 * spec.b_max;
    for k in 2..=k_max {
        let target = Region::Polytope {
            poly: relax_to_domain(&hrep(hulls.last().unwrap())?, spec.b_max),
            tol: membership_tol,
        };
        let labels: Vec<bool> = grid
            .par_iter()
            .map(|x| classify_point(sys, x, &target).map(|(l, _)| l == Label::Inside))
            .collect::<Result<_, _>>()?;
        let lost = inside.iter().zip(&labels).filter(|(was, now)| **was && !**now).count();
        if lost > 0 {
            return Err(GridError::NestingViolation { iteration: k, lost });
        }
        if labels == inside {
            fixed_point_at = Some(k);
            break;
        }
        inside = labels;
        let pts: Vec<DVector<f64>> = grid
            .iter()
            .zip(&inside)
            .filter(|(_, &i)| i)
            .map(|(x, _)| x.clone())
            .collect();
        inside_counts.push(pts.len());
        hulls.push(convex_hull(&pts)?);
    }
    Ok(HullLadder { seed_b0: b0, hulls, inside_counts, fixed_point_at })
}

/// Level family for a ladder-based switching law on the grid-certified
/// system: level 0 is the seed slab, level k the k-th hull, all relative to
/// the domain.
pub fn hull_levels(ladder: &HullLadder, scale: f64) -> Result<Vec<crate::geom::PolyUnion>, GridError> {
    let mut levels =
        vec![crate::geom::PolyUnion::singleton(relax_to_domain(&seed_triangle(ladder.seed_b0), scale))];
    for hull in &ladder.hulls {
        levels.push(crate::geom::PolyUnion::singleton(relax_to_domain(&hrep(hull)?, scale)));
    }
    Ok(levels)
}

/// CSV export: `b,s,label,mode` in grid order.
pub fn write_classification_csv(c: &Classification, path: &Path) -> Result<(), GridError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "b,s,label,mode")?;
    for (x, label, mode) in &c.points {
        let label = match label {
            Label::Inside => "inside",
            Label::Outside => "outside",
        };
        let mode = mode.map(|m| m.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", x[0], x[1], label, mode)?;
    }
    Ok(())
}
