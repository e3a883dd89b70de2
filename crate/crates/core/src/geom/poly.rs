//! Convex polytopes in halfspace and vertex form.
//!
//! `HPolytope` is the atomic set representation: `{x : A x <= b}` with unit
//! row normals, deduplicated and irredundant rows, sorted lexicographically.
//! Canonical form makes polytope counts and serialized artifacts stable
//! across runs.
//!
//! Dimension 2 is the fully supported fast path (vertex enumeration via
//! pairwise facet intersection, hulls via monotone chain). Higher dimensions
//! work through LP-backed fallbacks but are not optimized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lp::{self, LpOutcome};

/// Absolute membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Slack used by facet-redundancy elimination.
pub const REDUNDANCY_SLACK: f64 = 1e-9;
/// Relative determinant threshold for singular-matrix detection.
pub const SINGULARITY_TOL: f64 = 1e-12;
/// Chebyshev radius below which a region is treated as a measure-zero sliver.
pub const SLIVER_RADIUS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("polytope is empty")]
    Empty,
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("matrix is singular (|det| = {det:.3e})")]
    SingularMatrix { det: f64 },
    #[error("boundary of inner union is not strictly inside the outer union")]
    NotNested,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("convex hull needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

/// Axis-aligned box `[lower, upper]`, the state-constraint representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l <= u),
            "box bounds must satisfy lower <= upper"
        );
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
    }

    pub fn to_hpolytope(&self) -> HPolytope {
        let n = self.dim();
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut pos = DVector::zeros(n);
            pos[i] = 1.0;
            rows.push((pos, self.upper[i]));
            let mut neg = DVector::zeros(n);
            neg[i] = -1.0;
            rows.push((neg, -self.lower[i]));
        }
        HPolytope::from_rows(rows, n)
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)),
        )
    }
}

/// Polytope in vertex form; the list holds only extreme points.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct VPolytope {
    pub vertices: Vec<Vec<f64>>,
}

impl VPolytope {
    pub fn from_vectors(vertices: Vec<DVector<f64>>) -> Self {
        Self { vertices: vertices.into_iter().map(|v| v.iter().copied().collect()).collect() }
    }

    pub fn to_vectors(&self) -> Vec<DVector<f64>> {
        self.vertices.iter().map(|v| DVector::from_column_slice(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Polytope in halfspace form `{x : A x <= b}`, canonical after construction.
#[derive(Debug, Clone)]
pub struct HPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    empty: bool,
    /// Vertex cache for 2-D polytopes, CCW order. `None` when not computed
    /// (degenerate or non-2-D input).
    verts: Option<Vec<DVector<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct HPolytopeWire {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Serialize for HPolytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = HPolytopeWire {
            a: (0..self.a.nrows()).map(|i| self.a.row(i).iter().copied().collect()).collect(),
            b: self.b.iter().copied().collect(),
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HPolytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = HPolytopeWire::deserialize(d)?;
        let n = wire.a.first().map_or(0, |r| r.len());
        let rows = wire
            .a
            .into_iter()
            .zip(wire.b)
            .map(|(r, b)| (DVector::from_vec(r), b))
            .collect();
        Ok(HPolytope::from_rows(rows, n))
    }
}

impl HPolytope {
    /// Canonical empty polytope of the given dimension (`0 <= -1`).
    pub fn empty(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(1, dim),
            b: DVector::from_element(1, -1.0),
            empty: true,
            verts: None,
        }
    }

    /// Build from a raw matrix pair and canonicalize.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        let n = a.ncols();
        let rows = (0..a.nrows()).map(|i| (a.row(i).transpose(), b[i])).collect();
        Self::from_rows(rows, n)
    }

    /// Build from `(normal, offset)` rows and canonicalize.
    pub fn from_rows(rows: Vec<(DVector<f64>, f64)>, dim: usize) -> Self {
        canonicalize(rows, dim)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn rows(&self) -> impl Iterator<Item = (DVector<f64>, f64)> + '_ {
        (0..self.a.nrows()).map(|i| (self.a.row(i).transpose(), self.b[i]))
    }

    /// Membership within an absolute tolerance on each facet.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if self.empty {
            return false;
        }
        (0..self.a.nrows()).all(|i| self.a.row(i).transpose().dot(x) <= self.b[i] + tol)
    }

    /// Largest facet violation; negative values mean strict interior.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        if self.empty {
            return f64::INFINITY;
        }
        (0..self.a.nrows())
            .map(|i| self.a.row(i).transpose().dot(x) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Chebyshev center and inscribed radius.
    pub fn chebyshev(&self) -> Option<(DVector<f64>, f64)> {
        if self.empty {
            return None;
        }
        lp::chebyshev(&self.a, &self.b)
    }

    /// Support function `max { d . x : x in P }`, via the vertex cache.
    pub fn support(&self, d: &DVector<f64>) -> Result<f64, GeomError> {
        let verts = self.vertices()?;
        Ok(verts
            .iter()
            .map(|v| d.dot(v))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Vertices of a bounded polytope (CCW order in 2-D).
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>, GeomError> {
        if self.empty {
            return Err(GeomError::Empty);
        }
        if let Some(v) = &self.verts {
            return Ok(v.clone());
        }
        enumerate_vertices(&self.a, &self.b)
    }

    /// Dual representation as a `VPolytope`.
    pub fn vrep(&self) -> Result<VPolytope, GeomError> {
        Ok(VPolytope::from_vectors(self.vertices()?))
    }

    /// Axis-aligned bounding box.
    pub fn bbox(&self) -> Result<AxisBox, GeomError> {
        let verts = self.vertices()?;
        let n = self.dim();
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        for v in &verts {
            for i in 0..n {
                lower[i] = lower[i].min(v[i]);
                upper[i] = upper[i].max(v[i]);
            }
        }
        Ok(AxisBox::new(lower, upper))
    }

    /// Pontryagin difference `P (-) W`: shrink every facet offset by the
    /// support of `W` in the facet direction. Exact for convex operands; the
    /// result may be the canonical empty polytope.
    pub fn erode(&self, w: &HPolytope) -> Result<HPolytope, GeomError> {
        if self.empty {
            return Ok(HPolytope::empty(self.dim()));
        }
        if w.dim() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), got: w.dim() });
        }
        let w_verts = w.vertices()?;
        let rows = self
            .rows()
            .map(|(a, b)| {
                let support = w_verts.iter().map(|v| a.dot(v)).fold(f64::NEG_INFINITY, f64::max);
                (a, b - support)
            })
            .collect();
        Ok(HPolytope::from_rows(rows, self.dim()))
    }

    /// Exact preimage `{x : M x in P}` for nonsingular `M`.
    pub fn linear_preimage(&self, m: &DMatrix<f64>) -> Result<HPolytope, GeomError> {
        let n = self.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(GeomError::DimensionMismatch { expected: n, got: m.nrows() });
        }
        let det = m.determinant();
        let scale = m.norm().powi(n as i32).max(1.0);
        if det.abs() < SINGULARITY_TOL * scale {
            return Err(GeomError::SingularMatrix { det });
        }
        if self.empty {
            return Ok(HPolytope::empty(n));
        }
        let new_a = &self.a * m;
        Ok(HPolytope::new(new_a, self.b.clone()))
    }

    /// Intersection by stacking halfspaces.
    pub fn intersect(&self, other: &HPolytope) -> HPolytope {
        if self.empty || other.empty {
            return HPolytope::empty(self.dim());
        }
        let rows = self.rows().chain(other.rows()).collect();
        HPolytope::from_rows(rows, self.dim())
    }

    pub fn intersect_box(&self, x: &AxisBox) -> HPolytope {
        self.intersect(&x.to_hpolytope())
    }

    /// Offset every facet outward by `eps` (rows are unit-norm).
    pub fn inflate(&self, eps: f64) -> HPolytope {
        if self.empty {
            return self.clone();
        }
        let rows = self.rows().map(|(a, b)| (a, b + eps)).collect();
        HPolytope::from_rows(rows, self.dim())
    }

    /// Euclidean projection of `x` onto the polytope: `(point, distance)`.
    ///
    /// Inside points project to themselves. The 2-D path projects onto the
    /// polygon edges exactly; other dimensions use Dykstra's alternating
    /// projections.
    pub fn project_point(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64), GeomError> {
        if self.empty {
            return Err(GeomError::Empty);
        }
        if self.contains(x, MEMBERSHIP_TOL) {
            return Ok((x.clone(), 0.0));
        }
        if self.dim() == 2 {
            let verts = self.vertices()?;
            return Ok(project_onto_polygon(x, &verts));
        }
        Ok(dykstra_projection(x, &self.a, &self.b))
    }
}

impl PartialEq for HPolytope {
    /// Structural equality of canonical forms.
    fn eq(&self, other: &Self) -> bool {
        self.empty == other.empty && self.a == other.a && self.b == other.b
    }
}

fn canonicalize(rows: Vec<(DVector<f64>, f64)>, dim: usize) -> HPolytope {
    // Trivial and infeasible zero rows.
    let mut work: Vec<(DVector<f64>, f64)> = Vec::with_capacity(rows.len());
    for (a, b) in rows {
        let norm = a.norm();
        if norm <= 1e-12 {
            if b < -MEMBERSHIP_TOL {
                return HPolytope::empty(dim);
            }
            continue;
        }
        if (norm - 1.0).abs() <= 1e-12 {
            // Already unit: renormalizing would drift last bits and break
            // the idempotence of the canonical form.
            work.push((a, b));
        } else {
            work.push((a / norm, b / norm));
        }
    }
    if work.is_empty() {
        // Whole space; callers never build these on purpose but keep it sane.
        return HPolytope { a: DMatrix::zeros(0, dim), b: DVector::zeros(0), empty: false, verts: None };
    }
    // Deduplicate parallel rows, keeping the most restrictive offset.
    let mut dedup: Vec<(DVector<f64>, f64)> = Vec::with_capacity(work.len());
    for (a, b) in work {
        if let Some(existing) = dedup.iter_mut().find(|(e, _)| (&a - &*e).norm() < 1e-9) {
            existing.1 = existing.1.min(b);
        } else {
            dedup.push((a, b));
        }
    }

    if dim == 2 {
        if let Some(poly) = canonicalize_2d(&dedup) {
            return poly;
        }
    }
    canonicalize_lp(dedup, dim)
}

/// 2-D reduction through vertex enumeration: a facet of a full-dimensional
/// polygon supports at least two vertices. Falls back to the LP path on
/// degenerate input.
fn canonicalize_2d(rows: &[(DVector<f64>, f64)]) -> Option<HPolytope> {
    let verts = basic_solutions_2d(rows);
    if verts.is_empty() {
        return None;
    }
    let scale = 1.0 + verts.iter().map(|v| v.amax()).fold(0.0, f64::max);
    // Full-dimensionality check via the shoelace area of the hull.
    let hull = monotone_chain(&verts);
    if hull.len() < 3 || polygon_area(&hull).abs() <= 1e-14 * scale * scale {
        return None;
    }
    let tol = 1e-7 * scale;
    let mut kept: Vec<(DVector<f64>, f64)> = Vec::new();
    for (a, b) in rows {
        let touching = verts.iter().filter(|v| (a.dot(v) - b).abs() <= tol).count();
        if touching >= 2 {
            kept.push((a.clone(), *b));
        }
    }
    if kept.len() < 3 {
        return None;
    }
    sort_rows(&mut kept);
    let (a, b) = rows_to_matrix(&kept, 2);
    Some(HPolytope { a, b, empty: false, verts: Some(hull) })
}

/// LP-based canonicalization: feasibility plus per-row redundancy checks.
fn canonicalize_lp(mut rows: Vec<(DVector<f64>, f64)>, dim: usize) -> HPolytope {
    let (a, b) = rows_to_matrix(&rows, dim);
    if !lp::feasible(&a, &b) {
        return HPolytope::empty(dim);
    }
    let mut i = 0;
    while i < rows.len() && rows.len() > 1 {
        let (ai, bi) = rows[i].clone();
        let mut others: Vec<(DVector<f64>, f64)> =
            rows.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r.clone()).collect();
        // Bound the LP so redundancy of `ai` is decidable even when the rest
        // is unbounded in that direction.
        others.push((ai.clone(), bi + 1.0));
        let (oa, ob) = rows_to_matrix(&others, dim);
        let redundant = match lp::maximize(&ai, &oa, &ob) {
            LpOutcome::Optimal { value, .. } => value <= bi + REDUNDANCY_SLACK,
            _ => false,
        };
        if redundant {
            rows.remove(i);
        } else {
            i += 1;
        }
    }
    sort_rows(&mut rows);
    let (a, b) = rows_to_matrix(&rows, dim);
    HPolytope { a, b, empty: false, verts: None }
}

fn sort_rows(rows: &mut [(DVector<f64>, f64)]) {
    rows.sort_by(|(a1, b1), (a2, b2)| {
        for (x, y) in a1.iter().zip(a2.iter()) {
            match x.partial_cmp(y) {
                Some(std::cmp::Ordering::Equal) | None => continue,
                Some(ord) => return ord,
            }
        }
        b1.partial_cmp(b2).unwrap_or(std::cmp::Ordering::Equal)
    });
}

fn rows_to_matrix(rows: &[(DVector<f64>, f64)], dim: usize) -> (DMatrix<f64>, DVector<f64>) {
    let m = rows.len();
    let mut a = DMatrix::zeros(m, dim);
    let mut b = DVector::zeros(m);
    for (i, (ai, bi)) in rows.iter().enumerate() {
        for j in 0..dim {
            a[(i, j)] = ai[j];
        }
        b[i] = *bi;
    }
    (a, b)
}

/// Feasible basic solutions of a 2-D system: pairwise facet-line
/// intersections that satisfy all rows.
fn basic_solutions_2d(rows: &[(DVector<f64>, f64)]) -> Vec<DVector<f64>> {
    let m = rows.len();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let scale = 1.0 + rows.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
    for i in 0..m {
        for j in (i + 1)..m {
            let (ai, bi) = &rows[i];
            let (aj, bj) = &rows[j];
            let det = ai[0] * aj[1] - ai[1] * aj[0];
            if det.abs() < 1e-10 {
                continue;
            }
            let x = (bi * aj[1] - bj * ai[1]) / det;
            let y = (ai[0] * bj - aj[0] * bi) / det;
            let v = DVector::from_vec(vec![x, y]);
            let feas = rows.iter().all(|(a, b)| a.dot(&v) <= b + 1e-7 * scale);
            if feas && !out.iter().any(|u| (u - &v).norm() < 1e-7 * scale) {
                out.push(v);
            }
        }
    }
    out
}

/// General vertex enumeration: basic solutions from row n-subsets, after LP
/// boundedness probes. Exponential in the row count; fine for the small
/// systems this toolkit manipulates.
fn enumerate_vertices(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<DVector<f64>>, GeomError> {
    let n = a.ncols();
    let m = a.nrows();
    if m < n {
        return Err(GeomError::Unbounded);
    }
    // Boundedness probes along +/- each axis.
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut c = DVector::zeros(n);
            c[j] = sign;
            match lp::maximize(&c, a, b) {
                LpOutcome::Optimal { .. } => {}
                LpOutcome::Unbounded => return Err(GeomError::Unbounded),
                LpOutcome::Infeasible => return Err(GeomError::Empty),
            }
        }
    }
    if n == 2 {
        let rows: Vec<_> = (0..m).map(|i| (a.row(i).transpose(), b[i])).collect();
        let verts = basic_solutions_2d(&rows);
        if verts.is_empty() {
            return Err(GeomError::Empty);
        }
        return Ok(ccw_sorted(verts));
    }
    let mut verts: Vec<DVector<f64>> = Vec::new();
    let scale = 1.0 + b.amax();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let sub_a = DMatrix::from_fn(n, n, |r, c| a[(idx[r], c)]);
        let sub_b = DVector::from_fn(n, |r, _| b[idx[r]]);
        if let Some(sol) = sub_a.lu().solve(&sub_b) {
            let feas = (0..m).all(|i| a.row(i).transpose().dot(&sol) <= b[i] + 1e-7 * scale);
            if feas && !verts.iter().any(|u| (u - &sol).norm() < 1e-7 * scale) {
                verts.push(sol);
            }
        }
        // Next combination in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return if verts.is_empty() { Err(GeomError::Empty) } else { Ok(verts) };
            }
            k -= 1;
            if idx[k] < m - (n - k) {
                idx[k] += 1;
                for l in (k + 1)..n {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
        }
    }
}

fn ccw_sorted(mut verts: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let n = verts.len() as f64;
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / n;
    verts.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.partial_cmp(&aq).unwrap_or(std::cmp::Ordering::Equal)
    });
    verts
}

fn polygon_area(hull: &[DVector<f64>]) -> f64 {
    let mut area = 0.0;
    for i in 0..hull.len() {
        let p = &hull[i];
        let q = &hull[(i + 1) % hull.len()];
        area += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * area
}

/// Andrew's monotone chain; returns extreme points in CCW order. Collinear
/// interior points are excluded.
pub fn monotone_chain(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut pts: Vec<DVector<f64>> = points.to_vec();
    pts.sort_by(|p, q| {
        p[0].partial_cmp(&q[0])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(p[1].partial_cmp(&q[1]).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts.dedup_by(|p, q| (&*p - &*q).norm() < 1e-12);
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<DVector<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<DVector<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Convex hull of a point cloud, extreme points only.
pub fn convex_hull(points: &[DVector<f64>]) -> Result<VPolytope, GeomError> {
    if points.is_empty() {
        return Err(GeomError::TooFewPoints { needed: 1, got: 0 });
    }
    let dim = points[0].len();
    match dim {
        1 => {
            let lo = points.iter().cloned().min_by(|p, q| p[0].total_cmp(&q[0])).unwrap();
            let hi = points.iter().cloned().max_by(|p, q| p[0].total_cmp(&q[0])).unwrap();
            let verts = if (&hi - &lo).norm() < 1e-12 { vec![lo] } else { vec![lo, hi] };
            Ok(VPolytope::from_vectors(verts))
        }
        2 => Ok(VPolytope::from_vectors(monotone_chain(points))),
        _ => extreme_points_lp(points),
    }
}

/// Extremity filter via LP: `p` is extreme iff it is not a convex
/// combination of the remaining points. Quadratic in the point count; used
/// only for dimensions above 2.
fn extreme_points_lp(points: &[DVector<f64>]) -> Result<VPolytope, GeomError> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = points[0].len();
    let mut extreme = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let others: Vec<&DVector<f64>> = points
            .iter()
            .enumerate()
            .filter(|(j, q)| *j != i && (*q - p).norm() > 1e-12)
            .map(|(_, q)| q)
            .collect();
        if others.is_empty() {
            extreme.push(p.clone());
            continue;
        }
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let lambdas: Vec<_> = others.iter().map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
        let ones: Vec<_> = lambdas.iter().map(|&l| (l, 1.0)).collect();
        problem.add_constraint(&ones, ComparisonOp::Eq, 1.0);
        for d in 0..n {
            let row: Vec<_> = lambdas.iter().zip(&others).map(|(&l, q)| (l, q[d])).collect();
            problem.add_constraint(&row, ComparisonOp::Eq, p[d]);
        }
        if problem.solve().is_err() {
            extreme.push(p.clone());
        }
    }
    if extreme.is_empty() {
        return Err(GeomError::TooFewPoints { needed: 1, got: 0 });
    }
    Ok(VPolytope::from_vectors(extreme))
}

/// Facet enumeration from vertices: 1-D and 2-D direct, >=3-D brute force
/// over point n-subsets.
pub fn hrep(v: &VPolytope) -> Result<HPolytope, GeomError> {
    if v.is_empty() {
        return Err(GeomError::Empty);
    }
    let pts = v.to_vectors();
    let dim = pts[0].len();
    match dim {
        1 => {
            let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok(AxisBox::new(vec![lo], vec![hi]).to_hpolytope())
        }
        2 => {
            let hull = monotone_chain(&pts);
            if hull.len() == 1 {
                // Single point as a tight box.
                let p = &hull[0];
                return Ok(AxisBox::new(vec![p[0], p[1]], vec![p[0], p[1]]).to_hpolytope());
            }
            if hull.len() == 2 {
                // Segment: two side constraints plus two end caps.
                let (p, q) = (&hull[0], &hull[1]);
                let d = q - p;
                let nrm = DVector::from_vec(vec![-d[1], d[0]]);
                let rows = vec![
                    (nrm.clone(), nrm.dot(p)),
                    (-nrm.clone(), -nrm.dot(p)),
                    (d.clone(), d.dot(q)),
                    (-d.clone(), -d.dot(p)),
                ];
                return Ok(HPolytope::from_rows(rows, 2));
            }
            let mut rows = Vec::with_capacity(hull.len());
            for i in 0..hull.len() {
                let p = &hull[i];
                let q = &hull[(i + 1) % hull.len()];
                let edge = q - p;
                // Outward normal for a CCW polygon.
                let nrm = DVector::from_vec(vec![edge[1], -edge[0]]);
                rows.push((nrm.clone(), nrm.dot(p)));
            }
            Ok(HPolytope::from_rows(rows, 2))
        }
        _ => hrep_brute_force(&pts, dim),
    }
}

fn hrep_brute_force(pts: &[DVector<f64>], dim: usize) -> Result<HPolytope, GeomError> {
    let m = pts.len();
    if m < dim + 1 {
        return Err(GeomError::TooFewPoints { needed: dim + 1, got: m });
    }
    let scale = 1.0 + pts.iter().map(|p| p.amax()).fold(0.0, f64::max);
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut idx: Vec<usize> = (0..dim).collect();
    loop {
        // Hyperplane through pts[idx]: normal orthogonal to the spanned
        // differences, via the last row of a QR-completed basis.
        let base = &pts[idx[0]];
        let diffs = DMatrix::from_fn(dim - 1, dim, |r, c| pts[idx[r + 1]][c] - base[c]);
        let svd = diffs.svd(false, true);
        if let Some(v_t) = svd.v_t {
            let normal = v_t.row(dim - 1).transpose();
            if normal.norm() > 1e-9 {
                let offset = normal.dot(base);
                let (mut above, mut below) = (false, false);
                for p in pts {
                    let s = normal.dot(p) - offset;
                    if s > 1e-7 * scale {
                        above = true;
                    } else if s < -1e-7 * scale {
                        below = true;
                    }
                }
                if above != below || (!above && !below) {
                    let (nrm, off) = if above { (-normal, -offset) } else { (normal, offset) };
                    rows.push((nrm, off));
                }
            }
        }
        let mut k = dim;
        loop {
            if k == 0 {
                let poly = HPolytope::from_rows(rows, dim);
                return if poly.is_empty() { Err(GeomError::Empty) } else { Ok(poly) };
            }
            k -= 1;
            if idx[k] < m - (dim - k) {
                idx[k] += 1;
                for l in (k + 1)..dim {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Distance from a point to a convex polygon given by CCW vertices.
fn project_onto_polygon(x: &DVector<f64>, verts: &[DVector<f64>]) -> (DVector<f64>, f64) {
    if verts.len() == 1 {
        return (verts[0].clone(), (x - &verts[0]).norm());
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    for i in 0..verts.len() {
        let p = &verts[i];
        let q = &verts[(i + 1) % verts.len()];
        if verts.len() == 2 && i == 1 {
            break;
        }
        let proj = project_onto_segment(x, p, q);
        let d = (x - &proj).norm();
        if best.as_ref().map_or(true, |(_, bd)| d < *bd) {
            best = Some((proj, d));
        }
    }
    best.unwrap()
}

pub fn project_onto_segment(
    x: &DVector<f64>,
    p: &DVector<f64>,
    q: &DVector<f64>,
) -> DVector<f64> {
    let d = q - p;
    let len2 = d.dot(&d);
    if len2 <= 1e-300 {
        return p.clone();
    }
    let t = ((x - p).dot(&d) / len2).clamp(0.0, 1.0);
    p + d * t
}

/// Dykstra's alternating projections onto the facet halfspaces.
fn dykstra_projection(x: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let m = a.nrows();
    let mut y = x.clone();
    let mut corrections = vec![DVector::zeros(x.len()); m];
    for _ in 0..5000 {
        let mut moved = 0.0_f64;
        for i in 0..m {
            let z = &y + &corrections[i];
            let ai = a.row(i).transpose();
            let viol = ai.dot(&z) - b[i];
            let proj = if viol > 0.0 { &z - &ai * viol } else { z.clone() };
            corrections[i] = &z - &proj;
            moved = moved.max((&proj - &y).norm());
            y = proj;
        }
        if moved < 1e-12 {
            break;
        }
    }
    let d = (x - &y).norm();
    (y, d)
}

/// Fit convention for regular-polygon approximations of a Euclidean ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallFit {
    /// Vertices on the circle: the polygon is a subset of the ball.
    Inscribed,
    /// Facets tangent to the circle: the polygon is a superset of the ball.
    Circumscribed,
}

/// Regular polygon approximation of the ball `{ ||x|| <= radius }` with
/// facet normals at angles `2*pi*j/facets`.
pub fn regular_polygon(radius: f64, facets: usize, fit: BallFit) -> HPolytope {
    assert!(facets >= 3, "a polygon needs at least 3 facets");
    assert!(radius > 0.0);
    let offset = match fit {
        BallFit::Inscribed => radius * (std::f64::consts::PI / facets as f64).cos(),
        BallFit::Circumscribed => radius,
    };
    let rows = (0..facets)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / facets as f64;
            (DVector::from_vec(vec![th.cos(), th.sin()]), offset)
        })
        .collect();
    HPolytope::from_rows(rows, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn unit_box() -> HPolytope {
        AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).to_hpolytope()
    }

    #[test]
    fn erode_box_by_box_shrinks_componentwise() {
        let w = AxisBox::new(vec![-0.1, -0.1], vec![0.1, 0.1]).to_hpolytope();
        let e = unit_box().erode(&w).unwrap();
        let expected = AxisBox::new(vec![-0.9, -0.9], vec![0.9, 0.9]).to_hpolytope();
        assert_eq!(e, expected);
    }

    #[test]
    fn erode_by_origin_is_identity() {
        let zero = HPolytope::from_rows(
            vec![
                (dvector![1.0, 0.0], 0.0),
                (dvector![-1.0, 0.0], 0.0),
                (dvector![0.0, 1.0], 0.0),
                (dvector![0.0, -1.0], 0.0),
            ],
            2,
        );
        let e = unit_box().erode(&zero).unwrap();
        assert_eq!(e, unit_box());
    }

    #[test]
    fn over_erosion_is_empty() {
        let w = AxisBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).to_hpolytope();
        let e = unit_box().erode(&w).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn erode_triangle_by_box_sampling_oracle() {
        use rand::{Rng, SeedableRng};
        let tri = hrep(&VPolytope {
            vertices: vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]],
        })
        .unwrap();
        let w = AxisBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).to_hpolytope();
        let e = tri.erode(&w).unwrap();
        assert!(!e.is_empty());
        let bb = e.bbox().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let corners = w.vertices().unwrap();
        let mut hits = 0;
        while hits < 10_000 {
            let x = dvector![
                rng.gen_range(bb.lower[0]..=bb.upper[0]),
                rng.gen_range(bb.lower[1]..=bb.upper[1])
            ];
            if !e.contains(&x, 0.0) {
                continue;
            }
            hits += 1;
            for c in &corners {
                assert!(tri.contains(&(&x + c), 1e-7), "x={x:?} corner={c:?}");
            }
        }
    }

    #[test]
    fn preimage_identity_and_scaling() {
        let p = unit_box();
        let pre_id = p.linear_preimage(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(pre_id, p);
        let pre_scaled = p.linear_preimage(&dmatrix![2.0, 0.0; 0.0, 2.0]).unwrap();
        let expected = AxisBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).to_hpolytope();
        assert_eq!(pre_scaled, expected);
    }

    #[test]
    fn preimage_rejects_singular() {
        let m = dmatrix![1.0, 1.0; 1.0, 1.0];
        match unit_box().linear_preimage(&m) {
            Err(GeomError::SingularMatrix { .. }) => {}
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn intersect_boxes() {
        let p = AxisBox::new(vec![0.0, 0.0], vec![2.0, 2.0]).to_hpolytope();
        let q = p.intersect_box(&AxisBox::new(vec![1.0, 1.0], vec![3.0, 3.0]));
        let expected = AxisBox::new(vec![1.0, 1.0], vec![2.0, 2.0]).to_hpolytope();
        assert_eq!(q, expected);
        let disjoint = p.intersect_box(&AxisBox::new(vec![5.0, 5.0], vec![6.0, 6.0]));
        assert!(disjoint.is_empty());
    }

    #[test]
    fn vrep_unit_box_corners() {
        let mut verts = unit_box().vertices().unwrap();
        assert_eq!(verts.len(), 4);
        verts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
        assert!((&verts[0] - dvector![-1.0, -1.0]).norm() < 1e-9);
        assert!((&verts[3] - dvector![1.0, 1.0]).norm() < 1e-9);
    }

    #[test]
    fn sixteen_gon_round_trip() {
        let p = regular_polygon(1.0, 16, BallFit::Inscribed);
        let v = p.vrep().unwrap();
        assert_eq!(v.len(), 16);
        for vert in v.to_vectors() {
            assert!((vert.norm() - 1.0).abs() < 1e-9, "inscribed vertices sit on the circle");
        }
        let back = hrep(&v).unwrap();
        assert_eq!(back.num_rows(), 16);
        // Same set: mutual membership of each other's vertices.
        for vert in back.vertices().unwrap() {
            assert!(p.contains(&vert, 1e-7));
        }
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts = vec![
            dvector![0.0, 0.0],
            dvector![1.0, 0.0],
            dvector![1.0, 1.0],
            dvector![0.0, 1.0],
            dvector![0.5, 0.5],
        ];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.len(), 4);

        let line = vec![dvector![0.0, 0.0], dvector![1.0, 1.0], dvector![2.0, 2.0]];
        let hull = convex_hull(&line).unwrap();
        assert_eq!(hull.len(), 2);
    }

    #[test]
    fn projection_distances() {
        let p = unit_box();
        let (_, d) = p.project_point(&dvector![2.0, 0.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let (_, d) = p.project_point(&dvector![2.0, 2.0]).unwrap();
        assert!((d - 2.0_f64.sqrt()).abs() < 1e-9);
        let (_, d) = p.project_point(&dvector![0.3, -0.2]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn serde_round_trip_preserves_set() {
        let p = regular_polygon(0.7, 16, BallFit::Circumscribed);
        let json = serde_json::to_string(&p).unwrap();
        let q: HPolytope = serde_json::from_str(&json).unwrap();
        assert_eq!(p, q);
        let e = HPolytope::empty(2);
        let json = serde_json::to_string(&e).unwrap();
        let q: HPolytope = serde_json::from_str(&json).unwrap();
        assert!(q.is_empty());
    }

    #[test]
    fn degenerate_point_polytope() {
        // x <= 0, -x <= 0, y <= 0, -y <= 0 pins the origin.
        let rows = vec![
            (dvector![1.0, 0.0], 0.0),
            (dvector![-1.0, 0.0], 0.0),
            (dvector![0.0, 1.0], 0.0),
            (dvector![0.0, -1.0], 0.0),
        ];
        let p = HPolytope::from_rows(rows, 2);
        assert!(!p.is_empty());
        assert!(p.contains(&dvector![0.0, 0.0], 1e-12));
        assert!(!p.contains(&dvector![0.1, 0.0], 1e-9));
    }
}
