//! Thin wrapper around the LP backend for the polytope kernel.
//!
//! Every query the kernel needs reduces to maximizing a linear functional
//! over `{x : A x <= b}`: feasibility, Chebyshev center/radius, facet
//! redundancy, and boundedness probes.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

/// Outcome of a linear program over a halfspace system.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Maximize `c . x` subject to `A x <= b` with free variables.
pub fn maximize(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> LpOutcome {
    debug_assert_eq!(a.nrows(), b.len());
    debug_assert_eq!(a.ncols(), c.len());
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..c.len())
        .map(|j| problem.add_var(c[j], (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for i in 0..a.nrows() {
        let row: Vec<_> = vars.iter().enumerate().map(|(j, &v)| (v, a[(i, j)])).collect();
        problem.add_constraint(&row, ComparisonOp::Le, b[i]);
    }
    match problem.solve() {
        Ok(sol) => {
            let value = sol.objective();
            // minilp reports some unbounded problems as Ok(inf).
            if !value.is_finite() {
                return LpOutcome::Unbounded;
            }
            let x = DVector::from_iterator(c.len(), vars.iter().map(|&v| sol[v]));
            LpOutcome::Optimal { x, value }
        }
        Err(minilp::Error::Infeasible) => LpOutcome::Infeasible,
        Err(minilp::Error::Unbounded) => LpOutcome::Unbounded,
    }
}

/// Chebyshev center of `{x : A x <= b}`: maximizes `r` subject to
/// `a_i . x + r ||a_i|| <= b_i`, `r >= 0`.
///
/// Returns `None` when the system is infeasible. The radius is capped so
/// that unbounded systems still report a (large, finite) inscribed radius.
pub fn chebyshev(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Some((DVector::zeros(n), RADIUS_CAP));
    }
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n)
        .map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let radius = problem.add_var(1.0, (0.0, RADIUS_CAP));
    for i in 0..a.nrows() {
        let norm = a.row(i).norm();
        let mut row: Vec<_> = vars.iter().enumerate().map(|(j, &v)| (v, a[(i, j)])).collect();
        row.push((radius, norm));
        problem.add_constraint(&row, ComparisonOp::Le, b[i]);
    }
    match problem.solve() {
        Ok(sol) => {
            let center = DVector::from_iterator(n, vars.iter().map(|&v| sol[v]));
            Some((center, sol[radius]))
        }
        Err(_) => None,
    }
}

/// Cap for the Chebyshev radius variable; systems that can inscribe a ball
/// this large are treated as effectively unbounded but still nonempty.
pub const RADIUS_CAP: f64 = 1.0e12;

/// Feasibility of `{x : A x <= b}`.
pub fn feasible(a: &DMatrix<f64>, b: &DVector<f64>) -> bool {
    chebyshev(a, b).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn chebyshev_of_unit_box() {
        let a = dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0];
        let b = dvector![1.0, 1.0, 1.0, 1.0];
        let (center, radius) = chebyshev(&a, &b).unwrap();
        assert!((radius - 1.0).abs() < 1e-9);
        assert!(center.norm() < 1e-9);
    }

    #[test]
    fn infeasible_system() {
        let a = dmatrix![1.0, 0.0; -1.0, 0.0];
        let b = dvector![0.0, -1.0];
        assert!(!feasible(&a, &b));
    }

    #[test]
    fn maximize_on_triangle() {
        let a = dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0];
        let b = dvector![0.0, 0.0, 1.0];
        match maximize(&dvector![1.0, 1.0], &a, &b) {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-9),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_direction_detected() {
        let a = dmatrix![-1.0, 0.0];
        let b = dvector![0.0];
        match maximize(&dvector![1.0, 0.0], &a, &b) {
            LpOutcome::Unbounded => {}
            other => panic!("expected unbounded, got {other:?}"),
        }
    }
}
