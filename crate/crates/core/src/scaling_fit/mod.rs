//! Scaling-law fits of multiscale bootstrap probabilities.
//!
//! With `psi(sigma^2) = sigma * Q^-1(BP_{sigma^2})`, the tangent line of `psi`
//! at `sigma^2 = 1` gives the signed distance and mean curvature.

mod average;
mod counts;
mod fit;
mod model;

pub use average::{
    fit_counts, geometry_at_unit_scale, pvalues_from_fit, select_and_average, AveragedFit,
    ItemFit,
};
pub use counts::{
    psi_display, psi_observed, read_counts_tsv, write_counts_tsv, MultiscaleCounts, PsiPoint,
    PsiProfile, ScaleGrid,
};
pub use fit::{fit_model, ScalingModelFit};
pub use model::ModelKind;
