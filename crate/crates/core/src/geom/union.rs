//! Finite unions of polytopes: membership, distances, coverage with an
//! interior margin, and discretized boundaries.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lp;
use super::poly::{project_onto_segment, GeomError, HPolytope, MEMBERSHIP_TOL, SLIVER_RADIUS};

/// Closed union of convex polytopes. Parts may overlap; empty parts are
/// dropped at construction.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PolyUnion {
    pub parts: Vec<HPolytope>,
}

impl PolyUnion {
    pub fn new(parts: Vec<HPolytope>) -> Self {
        Self { parts: parts.into_iter().filter(|p| !p.is_empty()).collect() }
    }

    pub fn singleton(p: HPolytope) -> Self {
        Self::new(vec![p])
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Membership in the closed union within an absolute tolerance.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x, tol))
    }

    /// Euclidean distance to the union: minimum of per-part projections.
    pub fn dist_point(&self, x: &DVector<f64>) -> f64 {
        assert!(!self.is_empty(), "distance to an empty union is undefined");
        self.parts
            .iter()
            .map(|p| p.project_point(x).map(|(_, d)| d).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn concat(&self, other: &PolyUnion) -> PolyUnion {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        PolyUnion { parts }
    }
}

/// `inner (+) eps` covered by the union? Decided exactly through recursive
/// polytope set difference: the inflated polytope minus all parts must be
/// empty (up to measure-zero slivers).
pub fn union_covers_with_margin(inner: &HPolytope, union: &PolyUnion, eps: f64) -> bool {
    assert!(eps >= 0.0);
    if inner.is_empty() {
        return true;
    }
    let inflated = inner.inflate(eps);
    let parts: Vec<&HPolytope> = union.parts.iter().collect();
    let rows: Vec<(DVector<f64>, f64)> = inflated.rows().collect();
    covered_region(rows, inflated.dim(), &parts)
}

fn covered_region(rows: Vec<(DVector<f64>, f64)>, dim: usize, parts: &[&HPolytope]) -> bool {
    // An interior point of the region, or nothing when the region is a
    // sliver. The 2-D path is exact arithmetic; the LP backend's own
    // tolerances would otherwise swallow margin-sized residuals.
    let center = if dim == 2 {
        region_interior_point_2d(&rows)
    } else {
        let (a, b) = stack_rows(&rows, dim);
        lp::chebyshev(&a, &b).and_then(|(c, r)| (r > SLIVER_RADIUS).then_some(c))
    };
    let Some(center) = center else {
        return true; // empty or measure-zero: covered by a closed union
    };
    // A part containing the center anchors the split; if none does, the
    // center itself witnesses uncovered volume.
    let Some(pos) = parts.iter().position(|p| p.contains(&center, MEMBERSHIP_TOL)) else {
        return false;
    };
    let chosen = parts[pos];
    let rest: Vec<&HPolytope> =
        parts.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, p)| *p).collect();
    let mut kept = rows;
    for (ai, bi) in chosen.rows() {
        // Region piece outside this facet of the chosen part.
        let mut piece = kept.clone();
        piece.push((-&ai, -bi));
        if !covered_region(piece, dim, &rest) {
            return false;
        }
        kept.push((ai, bi));
    }
    // What remains lies inside the chosen part.
    true
}

/// Interior point of a bounded 2-D halfspace intersection, or `None` when
/// the region has (essentially) no area. Vertices come from pairwise facet
/// intersections; the inradius is bounded below via area / perimeter.
fn region_interior_point_2d(rows: &[(DVector<f64>, f64)]) -> Option<DVector<f64>> {
    let m = rows.len();
    let scale = 1.0 + rows.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
    let mut verts: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let (ai, bi) = &rows[i];
            let (aj, bj) = &rows[j];
            let det = ai[0] * aj[1] - ai[1] * aj[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let v = DVector::from_vec(vec![
                (bi * aj[1] - bj * ai[1]) / det,
                (ai[0] * bj - aj[0] * bi) / det,
            ]);
            let feas = rows.iter().all(|(a, b)| a.dot(&v) <= b + 1e-9 * scale);
            if feas && !verts.iter().any(|u| (u - &v).norm() < 1e-12 * scale) {
                verts.push(v);
            }
        }
    }
    if verts.len() < 3 {
        return None;
    }
    let hull = crate::geom::poly::monotone_chain(&verts);
    if hull.len() < 3 {
        return None;
    }
    let mut area = 0.0;
    let mut perimeter = 0.0;
    for i in 0..hull.len() {
        let p = &hull[i];
        let q = &hull[(i + 1) % hull.len()];
        area += p[0] * q[1] - q[0] * p[1];
        perimeter += (q - p).norm();
    }
    area = 0.5 * area.abs();
    if perimeter <= 0.0 || area / perimeter <= SLIVER_RADIUS {
        return None;
    }
    let n = hull.len() as f64;
    let cx = hull.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = hull.iter().map(|v| v[1]).sum::<f64>() / n;
    Some(DVector::from_vec(vec![cx, cy]))
}

fn stack_rows(rows: &[(DVector<f64>, f64)], dim: usize) -> (DMatrix<f64>, DVector<f64>) {
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

/// A sub-segment of a part facet whose midpoint is not covered by sibling
/// parts, i.e. a piece of the boundary of the union (2-D only).
pub fn boundary_segments(
    union: &PolyUnion,
    nsamples: usize,
) -> Result<Vec<[DVector<f64>; 2]>, GeomError> {
    assert!(nsamples >= 1);
    let polygons: Vec<Vec<DVector<f64>>> =
        union.parts.iter().map(|p| p.vertices()).collect::<Result<_, _>>()?;
    let boxes: Vec<(f64, f64, f64, f64)> = polygons
        .iter()
        .map(|poly| {
            let (mut x0, mut y0, mut x1, mut y1) =
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for v in poly {
                x0 = x0.min(v[0]);
                y0 = y0.min(v[1]);
                x1 = x1.max(v[0]);
                y1 = y1.max(v[1]);
            }
            (x0, y0, x1, y1)
        })
        .collect();
    let overlaps = |i: usize, j: usize| {
        let (ax0, ay0, ax1, ay1) = boxes[i];
        let (bx0, by0, bx1, by1) = boxes[j];
        ax0 <= bx1 + 1e-9 && bx0 <= ax1 + 1e-9 && ay0 <= by1 + 1e-9 && by0 <= ay1 + 1e-9
    };
    let segments: Vec<Vec<[DVector<f64>; 2]>> = (0..union.parts.len())
        .into_par_iter()
        .map(|i| {
            let part_siblings: Vec<usize> =
                (0..union.parts.len()).filter(|&j| j != i && overlaps(i, j)).collect();
            let poly = &polygons[i];
            let mut segs = Vec::new();
            if poly.len() < 2 {
                return segs;
            }
            let edges = if poly.len() == 2 { 1 } else { poly.len() };
            for e in 0..edges {
                let p = &poly[e];
                let q = &poly[(e + 1) % poly.len()];
                // Only siblings whose box meets this edge's box can cover
                // any of its samples.
                let (ex0, ex1) = (p[0].min(q[0]), p[0].max(q[0]));
                let (ey0, ey1) = (p[1].min(q[1]), p[1].max(q[1]));
                let siblings: Vec<usize> = part_siblings
                    .iter()
                    .copied()
                    .filter(|&j| {
                        let (bx0, by0, bx1, by1) = boxes[j];
                        ex0 <= bx1 + 1e-9 && bx0 <= ex1 + 1e-9 && ey0 <= by1 + 1e-9 && by0 <= ey1 + 1e-9
                    })
                    .collect();
                for s in 0..nsamples {
                    let t0 = s as f64 / nsamples as f64;
                    let t1 = (s + 1) as f64 / nsamples as f64;
                    let mid = p + (q - p) * (0.5 * (t0 + t1));
                    // Closed membership: a facet piece inside (or on the
                    // boundary of) a sibling is not union boundary — shared
                    // seams between abutting parts are interior points.
                    let covered =
                        siblings.iter().any(|&j| union.parts[j].contains(&mid, MEMBERSHIP_TOL));
                    if !covered {
                        segs.push([p + (q - p) * t0, p + (q - p) * t1]);
                    }
                }
            }
            segs
        })
        .collect();
    Ok(segments.into_iter().flatten().collect())
}

/// Midpoints of the uncovered boundary sub-segments.
pub fn boundary_samples(
    union: &PolyUnion,
    nsamples: usize,
) -> Result<Vec<DVector<f64>>, GeomError> {
    Ok(boundary_segments(union, nsamples)?
        .iter()
        .map(|[p, q]| (p + q) * 0.5)
        .collect())
}

/// Approximate minimum distance between the boundaries of two nested unions,
/// from discretized `boundary(inner)` to the boundary sub-segments of
/// `outer`. Converges to the true value from above as `nsamples` grows.
pub fn boundary_set_distance(
    inner: &PolyUnion,
    outer: &PolyUnion,
    nsamples: usize,
) -> Result<f64, GeomError> {
    let samples = boundary_samples(inner, nsamples)?;
    // Strict nesting: every inner-boundary sample must sit in the interior
    // of some part of the outer union.
    let strictly_inside = |x: &DVector<f64>| {
        outer.parts.iter().any(|p| p.violation(x) < -MEMBERSHIP_TOL)
    };
    if samples.iter().any(|x| !strictly_inside(x)) {
        return Err(GeomError::NotNested);
    }
    let segs = boundary_segments(outer, nsamples)?;
    if segs.is_empty() {
        return Err(GeomError::NotNested);
    }
    let d = samples
        .par_iter()
        .map(|x| {
            segs.iter()
                .map(|[p, q]| (x - project_onto_segment(x, p, q)).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(d)
}

/// Minimum over the discretized boundary of `from` of the distance to the
/// set `target` (not its boundary).
pub fn boundary_distance_to_set(
    from: &PolyUnion,
    target: &PolyUnion,
    nsamples: usize,
) -> Result<f64, GeomError> {
    let samples = boundary_samples(from, nsamples)?;
    Ok(samples
        .par_iter()
        .map(|x| target.dist_point(x))
        .reduce(|| f64::INFINITY, f64::min))
}
