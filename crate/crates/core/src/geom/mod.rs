//! Convex-polytope kernel: representations, conversions, erosion, preimage,
//! intersection, coverage with interior margin, and distances.

pub mod lp;
pub mod poly;
pub mod union;

pub use poly::{
    project_onto_segment,
    convex_hull, hrep, monotone_chain, regular_polygon, AxisBox, BallFit, GeomError, HPolytope,
    VPolytope, MEMBERSHIP_TOL, SLIVER_RADIUS,
};
pub use union::{
    boundary_distance_to_set, boundary_samples, boundary_segments, boundary_set_distance,
    union_covers_with_margin, PolyUnion,
};
