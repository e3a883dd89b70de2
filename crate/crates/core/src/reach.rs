//! Controllable-set recursion and contractivity certification for the
//! linear switched class, plus the ladder-based h, kappa, and L machinery.
//!
//! The one-step robust controllable set to a union target is computed
//! per part and per mode: `A_sigma^{-1}(P (-) W) /\ X` for every part `P`.
//! The per-part rule is a sound inner approximation of the controllable set
//! of the union and is what the iteration bookkeeping counts.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::geom::{
    boundary_distance_to_set, boundary_set_distance, union_covers_with_margin, GeomError,
    HPolytope, PolyUnion, MEMBERSHIP_TOL,
};
use crate::sysmodel::{LinearSwitchedSystem, SysError};

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("all parts of the target eroded to empty at iteration {k}")]
    AllPartsEroded { k: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    System(#[from] SysError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("invalid ladder artifact: {0}")]
    BadLadder(String),
}

/// Per-iteration polytope bookkeeping. `computed` counts the full recursion
/// tree (q children per computed parent, empty or not), which is the cost
/// figure the iteration reports; `stored` counts the nonempty parts kept.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct LevelMeta {
    pub computed: usize,
    pub attempted: usize,
    pub stored: usize,
    pub dropped_empty: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// Robust control contractive set certified.
    Rccs,
    /// A robust control invariant set was identified but contractivity was
    /// not established by `k_stop`.
    Rcis,
    /// No coverage of the seed by the computed iterates.
    Unsuccessful,
}

/// Outcome of the iterative construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// First iteration whose cumulative union covers the seed with interior
    /// margin in the sense that certifies a RCCS (see `algorithm1`).
    pub rccs_at: Option<usize>,
    /// First iteration whose cumulative union covers the seed (zero margin).
    pub rcis_at: Option<usize>,
    /// Cumulative computed-polytope count at `rcis_at`.
    pub rcis_polytope_count: Option<usize>,
    /// Diagnostic: first iteration with interior coverage of the seed
    /// itself, regardless of certificate semantics.
    pub omega0_interior_at: Option<usize>,
    /// Interior margin used for contractivity checks.
    pub margin: f64,
    /// Total computed polytopes over all iterations.
    pub polytope_count: usize,
    pub k_stop: usize,
    /// Set when the iteration terminated early because every part eroded.
    pub all_parts_eroded_at: Option<usize>,
}

/// The ordered family `{C^0, ..., C^K}` of one-step controllable-set
/// iterates, with per-level bookkeeping and boundary-distance values.
#[derive(Debug, Clone)]
pub struct ReachLadder {
    pub omega0: HPolytope,
    /// `levels[0]` is the seed; `levels[k]` the k-th iterate.
    pub levels: Vec<PolyUnion>,
    pub meta: Vec<LevelMeta>,
    /// `h_values[k]` approximates the boundary distance between levels
    /// `k-1` and `k`; `None` when skipped (cost cap) and `Some(0.0)` when
    /// the levels are not strictly nested.
    pub h_values: Vec<Option<f64>>,
}

impl ReachLadder {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Union of iterates 1..=k, the set Algorithm 1's step iii tests.
    pub fn cumulative(&self, k: usize) -> PolyUnion {
        let mut parts = Vec::new();
        for level in &self.levels[1..=k] {
            parts.extend(level.parts.iter().cloned());
        }
        PolyUnion { parts }
    }

    pub fn cumulative_computed(&self, k: usize) -> usize {
        self.meta[1..=k.min(self.meta.len() - 1)].iter().map(|m| m.computed).sum()
    }

    /// The invariant-set candidate found at iteration `k`: the cumulative
    /// union with the seed listed as an explicit part. Once the cumulative
    /// union covers the seed the two describe the same set, but keeping the
    /// seed as a part lets per-part one-step certification absorb
    /// successors that land in the seed across part boundaries.
    pub fn invariant_candidate(&self, k: usize) -> PolyUnion {
        let mut parts = vec![self.omega0.clone()];
        parts.extend(self.cumulative(k).parts);
        PolyUnion { parts }
    }

    pub fn cumulative_stored(&self, k: usize) -> usize {
        self.meta[1..=k.min(self.meta.len() - 1)].iter().map(|m| m.stored).sum()
    }
}

/// Robust one-step controllable set to a union target for a single mode.
pub fn controllable_set_mode(
    sys: &LinearSwitchedSystem,
    target: &PolyUnion,
    sigma: usize,
) -> Result<PolyUnion, ReachError> {
    let eroded = erode_parts(sys, target)?;
    let (parts, _) = preimage_parts(sys, &eroded, sigma)?;
    Ok(PolyUnion::new(parts))
}

/// Robust one-step controllable set: union over all modes. Also returns the
/// number of computed (attempted) children for bookkeeping.
pub fn controllable_set(
    sys: &LinearSwitchedSystem,
    target: &PolyUnion,
) -> Result<(PolyUnion, usize), ReachError> {
    let eroded = erode_parts(sys, target)?;
    let mut parts = Vec::new();
    for sigma in 1..=sys.num_modes() {
        let (mode_parts, _) = preimage_parts(sys, &eroded, sigma)?;
        parts.extend(mode_parts);
    }
    let attempted = sys.num_modes() * target.len();
    Ok((PolyUnion::new(parts), attempted))
}

/// Per-part erosions by the uncertainty set; empty results become `None`.
fn erode_parts(
    sys: &LinearSwitchedSystem,
    target: &PolyUnion,
) -> Result<Vec<Option<HPolytope>>, ReachError> {
    let eroded: Vec<Option<HPolytope>> = target
        .parts
        .par_iter()
        .map(|p| {
            p.erode(&sys.uncertainty)
                .map(|e| if e.is_empty() { None } else { Some(e) })
        })
        .collect::<Result<_, _>>()?;
    if !target.is_empty() && eroded.iter().all(Option::is_none) {
        return Err(ReachError::AllPartsEroded { k: 0 });
    }
    Ok(eroded)
}

fn preimage_parts(
    sys: &LinearSwitchedSystem,
    eroded: &[Option<HPolytope>],
    sigma: usize,
) -> Result<(Vec<HPolytope>, usize), ReachError> {
    let a = sys.mode(sigma)?;
    let results: Vec<Option<HPolytope>> = eroded
        .par_iter()
        .map(|e| {
            e.as_ref().and_then(|p| {
                let pre = p
                    .linear_preimage(a)
                    .expect("mode matrices are nonsingular by construction");
                let clipped = pre.intersect_box(&sys.state_box);
                if clipped.is_empty() {
                    None
                } else {
                    Some(clipped)
                }
            })
        })
        .collect();
    let kept: Vec<HPolytope> = results.into_iter().flatten().collect();
    let n = kept.len();
    Ok((kept, n))
}

/// Iterative controllable-set construction seeded by `omega0`.
///
/// Per iteration `k`: `level_k = union over modes of A^{-1}(level_{k-1} (-) W) /\ X`,
/// computed per part. Certificates:
///
/// * RCIS: first `k` whose cumulative union covers the seed (zero margin).
///   When that happens at `k = 1`, interior coverage of the seed certifies
///   the first iterate as a RCCS directly.
/// * RCCS beyond the first iteration: once a RCIS `union_{j<=N}` is found,
///   later iterations re-assess contractivity of that set — every part of
///   it must be covered with interior margin by the growing cumulative
///   union. This mirrors re-running the construction seeded by the found
///   invariant set.
///
/// The full ladder up to `k_stop` is built regardless of the verdict so the
/// switching law stays constructible.
pub fn algorithm1(
    sys: &LinearSwitchedSystem,
    omega0: &HPolytope,
    k_stop: usize,
    eps: f64,
) -> Result<(Certificate, ReachLadder), ReachError> {
    assert!(k_stop >= 1);
    assert!(eps >= 0.0);
    let mut levels = vec![PolyUnion::singleton(omega0.clone())];
    let mut meta = vec![LevelMeta { computed: 1, attempted: 1, stored: 1, dropped_empty: 0 }];
    let mut cumulative: Vec<HPolytope> = Vec::new();

    let mut rcis_at = None;
    let mut rcis_polytope_count = None;
    let mut rccs_at = None;
    let mut omega0_interior_at = None;
    let mut all_parts_eroded_at = None;
    // Parts of the found RCIS not yet certified as interior-covered; the
    // cumulative union only grows, so covered parts stay covered.
    let mut pending_rcis_parts: Vec<HPolytope> = Vec::new();

    for k in 1..=k_stop {
        let (level, attempted) = match controllable_set(sys, &levels[k - 1]) {
            Ok(v) => v,
            Err(ReachError::AllPartsEroded { .. }) => {
                all_parts_eroded_at = Some(k);
                break;
            }
            Err(e) => return Err(e),
        };
        let computed = sys.num_modes() * meta[k - 1].computed;
        meta.push(LevelMeta {
            computed,
            attempted,
            stored: level.len(),
            dropped_empty: attempted - level.len(),
        });
        cumulative.extend(level.parts.iter().cloned());
        levels.push(level);
        let cum = PolyUnion { parts: cumulative.clone() };

        if rcis_at.is_none() {
            if union_covers_with_margin(omega0, &cum, 0.0) {
                rcis_at = Some(k);
                rcis_polytope_count =
                    Some(meta[1..=k].iter().map(|m| m.computed).sum::<usize>());
                if eps > 0.0 && union_covers_with_margin(omega0, &cum, eps) {
                    omega0_interior_at = Some(k);
                    if k == 1 {
                        rccs_at = Some(1);
                    }
                }
                if rccs_at.is_none() {
                    pending_rcis_parts = cum.parts.clone();
                }
            }
        } else if rccs_at.is_none() {
            if omega0_interior_at.is_none() && union_covers_with_margin(omega0, &cum, eps) {
                omega0_interior_at = Some(k);
            }
            pending_rcis_parts.retain(|p| !union_covers_with_margin(p, &cum, eps));
            if pending_rcis_parts.is_empty() {
                rccs_at = Some(k);
            }
        }
    }

    let kind = if rccs_at.is_some() {
        CertificateKind::Rccs
    } else if rcis_at.is_some() {
        CertificateKind::Rcis
    } else {
        CertificateKind::Unsuccessful
    };
    let certificate = Certificate {
        kind,
        rccs_at,
        rcis_at,
        rcis_polytope_count,
        omega0_interior_at,
        margin: eps,
        polytope_count: meta[1..].iter().map(|m| m.computed).sum(),
        k_stop,
        all_parts_eroded_at,
    };
    let h_values = vec![None; levels.len()];
    let mut ladder = ReachLadder { omega0: omega0.clone(), levels, meta, h_values };
    ladder.h_values[0] = Some(0.0);
    Ok((certificate, ladder))
}

/// Is every state of `omega` driven back into `omega` by some mode for all
/// uncertainties? Checked as coverage of each part by the one-step
/// controllable set of the union. An empty union is vacuously invariant.
pub fn is_rcis(sys: &LinearSwitchedSystem, omega: &PolyUnion) -> Result<bool, ReachError> {
    if omega.is_empty() {
        return Ok(true);
    }
    let c = match controllable_set(sys, omega) {
        Ok((c, _)) => c,
        Err(ReachError::AllPartsEroded { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    Ok(omega.parts.iter().all(|p| union_covers_with_margin(p, &c, 0.0)))
}

/// Contractive variant: every part covered with interior margin `eps`.
pub fn is_rccs(sys: &LinearSwitchedSystem, omega: &PolyUnion, eps: f64) -> Result<bool, ReachError> {
    assert!(eps > 0.0);
    if omega.is_empty() {
        return Ok(true);
    }
    let c = match controllable_set(sys, omega) {
        Ok((c, _)) => c,
        Err(ReachError::AllPartsEroded { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    Ok(omega.parts.iter().all(|p| union_covers_with_margin(p, &c, eps)))
}

/// Boundary-discretization settings for h and L computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryConfig {
    /// Samples per facet segment.
    pub nsamples: usize,
    /// Skip h(k) when the inner level stores more parts than this.
    pub h_max_inner_parts: usize,
    /// Skip h(k) when the outer level stores more parts than this.
    pub h_max_outer_parts: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { nsamples: 64, h_max_inner_parts: 64, h_max_outer_parts: 256 }
    }
}

impl ReachLadder {
    /// Fill `h_values` for every level pair within the cost caps.
    /// `h(k) = 0` with a not-nested diagnostic when level `k-1` is not
    /// strictly inside level `k`.
    pub fn compute_h(&mut self, cfg: &BoundaryConfig) {
        self.h_values[0] = Some(0.0);
        for k in 1..self.levels.len() {
            if self.levels[k - 1].len() > cfg.h_max_inner_parts
                || self.levels[k].len() > cfg.h_max_outer_parts
            {
                self.h_values[k] = None;
                continue;
            }
            self.h_values[k] =
                match boundary_set_distance(&self.levels[k - 1], &self.levels[k], cfg.nsamples) {
                    Ok(d) => Some(d),
                    Err(GeomError::NotNested) => Some(0.0),
                    Err(_) => None,
                };
        }
    }
}

/// `h(k)`: boundary distance between consecutive iterates; 0 at k = 0 and
/// when the levels are not strictly nested.
pub fn h_function(ladder: &ReachLadder, k: usize, cfg: &BoundaryConfig) -> Result<f64, ReachError> {
    if k == 0 {
        return Ok(0.0);
    }
    assert!(k < ladder.levels.len());
    if let Some(Some(v)) = ladder.h_values.get(k) {
        return Ok(*v);
    }
    match boundary_set_distance(&ladder.levels[k - 1], &ladder.levels[k], cfg.nsamples) {
        Ok(d) => Ok(d),
        Err(GeomError::NotNested) => Ok(0.0),
        Err(e) => Err(e.into()),
    }
}

/// Smallest ladder index whose iterate contains `x`; `None` outside the
/// computed domain.
pub fn kappa(ladder: &ReachLadder, x: &DVector<f64>) -> Option<usize> {
    kappa_levels(&ladder.levels, x)
}

/// `kappa` over a bare level family (level 0 is the target set).
pub fn kappa_levels(levels: &[PolyUnion], x: &DVector<f64>) -> Option<usize> {
    levels.iter().position(|level| level.contains_point(x, MEMBERSHIP_TOL))
}

/// Union of all computed iterates (levels 1..K): the finite inner
/// approximation of the domain of attraction.
pub fn domain_approximation(ladder: &ReachLadder) -> PolyUnion {
    ladder.cumulative(ladder.max_level())
}

/// Piecewise-constant certificate function built on the ladder: constant on
/// each shell `C^k \ C^{k-1}`, equal to the distance from the discretized
/// boundary of `C^k` to the seed set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LFunction {
    pub level_values: Vec<f64>,
    pub l_bar: f64,
}

impl LFunction {
    pub fn build(ladder: &ReachLadder, cfg: &BoundaryConfig) -> Result<Self, ReachError> {
        let mut level_values = vec![0.0];
        for k in 1..ladder.levels.len() {
            let d = boundary_distance_to_set(&ladder.levels[k], &ladder.levels[0], cfg.nsamples)?;
            level_values.push(d);
        }
        let max = level_values.iter().copied().fold(0.0, f64::max);
        let last_h = ladder.h_values.iter().rev().flatten().copied().next().unwrap_or(0.0);
        Ok(Self { level_values, l_bar: max + last_h })
    }

    /// L at a state: the level value of its shell, `l_bar` outside the
    /// computed domain.
    pub fn value(&self, ladder: &ReachLadder, x: &DVector<f64>) -> f64 {
        self.value_levels(&ladder.levels, x)
    }

    pub fn value_levels(&self, levels: &[PolyUnion], x: &DVector<f64>) -> f64 {
        match kappa_levels(levels, x) {
            Some(k) => self.level_values[k],
            None => self.l_bar,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LadderMetaWire {
    omega0: HPolytope,
    meta: Vec<LevelMeta>,
    h_values: Vec<Option<f64>>,
    certificate: Certificate,
    num_levels: usize,
}

/// Persist a ladder as `level_k.json` files plus `ladder_meta.json`.
pub fn save_ladder(
    ladder: &ReachLadder,
    certificate: &Certificate,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>, ReachError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (k, level) in ladder.levels.iter().enumerate() {
        let path = dir.join(format!("level_{k}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(level)?)?;
        written.push(path);
    }
    let meta = LadderMetaWire {
        omega0: ladder.omega0.clone(),
        meta: ladder.meta.clone(),
        h_values: ladder.h_values.clone(),
        certificate: certificate.clone(),
        num_levels: ladder.levels.len(),
    };
    let path = dir.join("ladder_meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    written.push(path);
    Ok(written)
}

pub fn load_ladder(dir: &Path) -> Result<(ReachLadder, Certificate), ReachError> {
    let meta_raw = std::fs::read_to_string(dir.join("ladder_meta.json"))?;
    let wire: LadderMetaWire = serde_json::from_str(&meta_raw)?;
    let mut levels = Vec::with_capacity(wire.num_levels);
    for k in 0..wire.num_levels {
        let raw = std::fs::read_to_string(dir.join(format!("level_{k}.json")))?;
        levels.push(serde_json::from_str::<PolyUnion>(&raw)?);
    }
    if levels.is_empty() {
        return Err(ReachError::BadLadder("no levels".into()));
    }
    let ladder = ReachLadder {
        omega0: wire.omega0,
        levels,
        meta: wire.meta,
        h_values: wire.h_values,
    };
    Ok((ladder, wire.certificate))
}
