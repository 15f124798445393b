//! Normal-model theory of the problem of regions.
//!
//! Observing `y ~ N(mu, I)` and a region `R`, every p-value is a function of
//! the signed distance `beta0` (positive when `y` lies outside `R`) and the
//! mean curvature `beta1` of the boundary at the projection of `y`.

mod pvalues;
mod tail;

pub use pvalues::{
    au_from_geometry, bp_from_geometry, geometry_from_bp_au, pvalues, selective_z_pvalue,
    si_general, si_inside, si_outside, si_prime, z_pvalue, GeometricQuantities, PValueTriple,
    TestMode,
};
pub use tail::{
    density, inverse_mills, log_density, log_upper_tail, upper_tail, upper_tail_inverse,
    upper_tail_ratio,
};
