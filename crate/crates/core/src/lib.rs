//! Set-theoretic certification of robust attractivity for discrete-time
//! uncertain switched systems.
//!
//! The toolkit computes robust controllable sets over a polytope kernel,
//! certifies invariance and contractivity of candidate sets, constructs a
//! piecewise-constant certificate function on the resulting ladder,
//! synthesizes the explicit stabilizing switching law, and validates the
//! closed loop by seeded simulation. A grid-based procedure covers the
//! nonlinear antimicrobial-resistance case study.

pub mod control;
pub mod geom;
pub mod gridcert;
pub mod reach;
pub mod sysmodel;

pub use geom::{AxisBox, BallFit, GeomError, HPolytope, PolyUnion, VPolytope};
pub use sysmodel::{AmrParams, AmrSwitchedSystem, LinearSwitchedSystem, SysError, SystemModel};
