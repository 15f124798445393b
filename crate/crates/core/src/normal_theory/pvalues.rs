use std::fmt;

use super::tail::{density, log_upper_tail, upper_tail, upper_tail_inverse, upper_tail_ratio};
use crate::{Error, Result};

/// Which hypothesis is tested, decided by the side of the boundary the
/// observation falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestMode {
    /// `y` lies in `R` (`beta0 <= 0`); the complement hypothesis is tested.
    Inside,
    /// `y` lies outside `R` (`beta0 > 0`); `mu in R` is tested.
    Outside,
}

impl fmt::Display for TestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMode::Inside => "inside",
            TestMode::Outside => "outside",
        })
    }
}

/// Signed distance and mean curvature of a region seen from an observation,
/// both in standard-deviation units, with optional standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricQuantities {
    pub beta0: f64,
    pub beta1: f64,
    pub se_beta0: Option<f64>,
    pub se_beta1: Option<f64>,
    pub cov01: Option<f64>,
}

impl GeometricQuantities {
    pub fn new(beta0: f64, beta1: f64) -> Self {
        GeometricQuantities {
            beta0,
            beta1,
            se_beta0: None,
            se_beta1: None,
            cov01: None,
        }
    }

    /// Attaches a 2x2 covariance `[[v00, c01], [c01, v11]]`.
    pub fn with_covariance(mut self, v00: f64, v11: f64, c01: f64) -> Self {
        self.se_beta0 = Some(v00.max(0.0).sqrt());
        self.se_beta1 = Some(v11.max(0.0).sqrt());
        self.cov01 = Some(c01);
        self
    }

    /// Geometry of the complement region: both quantities change sign.
    pub fn complement(&self) -> Self {
        GeometricQuantities {
            beta0: -self.beta0,
            beta1: -self.beta1,
            se_beta0: self.se_beta0,
            se_beta1: self.se_beta1,
            cov01: self.cov01,
        }
    }

    /// `beta0 = 0` counts as inside.
    pub fn mode(&self) -> TestMode {
        if self.beta0 > 0.0 {
            TestMode::Outside
        } else {
            TestMode::Inside
        }
    }

    fn covariance(&self) -> Option<[[f64; 2]; 2]> {
        let s0 = self.se_beta0?;
        let s1 = self.se_beta1?;
        let c = self.cov01.unwrap_or(0.0);
        Some([[s0 * s0, c], [c, s1 * s1]])
    }

    fn is_finite(&self) -> bool {
        self.beta0.is_finite() && self.beta1.is_finite()
    }
}

/// BP, AU and the orientation-normalised selective p-value SI' of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueTriple {
    pub bp: f64,
    pub au: f64,
    pub si_prime: f64,
    pub se_bp: Option<f64>,
    pub se_au: Option<f64>,
    pub se_si: Option<f64>,
    pub mode: TestMode,
}

/// Ordinary one-sided z-test p-value `P(Z > z | theta = 0)`.
pub fn z_pvalue(z: f64) -> f64 {
    upper_tail(z)
}

/// Selective z-test p-value `P(Z > z | Z > c, theta = 0)`.
pub fn selective_z_pvalue(z: f64, c: f64) -> Result<f64> {
    if !(z > c) {
        return Err(Error::Precondition(format!(
            "selective z-test requires z > c (z = {z}, c = {c})"
        )));
    }
    Ok(upper_tail_ratio(z, c).min(1.0))
}

/// Bootstrap probability `Q(beta0 + beta1)`.
pub fn bp_from_geometry(g: &GeometricQuantities) -> f64 {
    upper_tail(g.beta0 + g.beta1)
}

/// Approximately unbiased p-value `Q(beta0 - beta1)`.
pub fn au_from_geometry(g: &GeometricQuantities) -> f64 {
    upper_tail(g.beta0 - g.beta1)
}

/// Outside-mode selective p-value `Q(beta0 - beta1) / Q(-beta1)`.
pub fn si_outside(g: &GeometricQuantities) -> Result<f64> {
    if !(g.beta0 > 0.0) {
        return Err(Error::Mode(format!(
            "outside-mode SI needs beta0 > 0, got {}",
            g.beta0
        )));
    }
    Ok(upper_tail_ratio(g.beta0 - g.beta1, -g.beta1).min(1.0))
}

/// Inside-mode selective p-value of the complement,
/// `Q(-beta0 + beta1) / Q(beta1)`.
pub fn si_inside(g: &GeometricQuantities) -> Result<f64> {
    if g.beta0 > 0.0 {
        return Err(Error::Mode(format!(
            "inside-mode SI needs beta0 <= 0, got {}",
            g.beta0
        )));
    }
    Ok(upper_tail_ratio(-g.beta0 + g.beta1, g.beta1).min(1.0))
}

/// SI of the region itself when outside, one minus the SI of the complement
/// when inside, so that large values always mean support for `R`.
pub fn si_prime(g: &GeometricQuantities) -> f64 {
    match g.mode() {
        TestMode::Outside => upper_tail_ratio(g.beta0 - g.beta1, -g.beta1).min(1.0),
        TestMode::Inside => 1.0 - upper_tail_ratio(-g.beta0 + g.beta1, g.beta1).min(1.0),
    }
}

/// Selective p-value for a hypothesis region `H` under a general selection
/// region `S`, given the geometry of `H` and the signed distance of `S`.
///
/// Only meaningful when the two boundaries are nearly parallel.
pub fn si_general(h: &GeometricQuantities, beta0_selection: f64) -> Result<f64> {
    let numerator = h.beta0 - h.beta1;
    let denominator = beta0_selection + numerator;
    if !denominator.is_finite() || !numerator.is_finite() {
        return Err(Error::Domain("non-finite geometry in si_general".into()));
    }
    let log_den = log_upper_tail(denominator);
    if log_den < 1e-300f64.ln() {
        return Err(Error::Overflow(format!(
            "selection probability Q({denominator:.4}) = exp({log_den:.1}) is below 1e-300"
        )));
    }
    Ok((log_upper_tail(numerator) - log_den).exp())
}

/// Inverts `BP = Q(beta0 + beta1)` and `AU = Q(beta0 - beta1)`.
pub fn geometry_from_bp_au(bp: f64, au: f64) -> Result<GeometricQuantities> {
    let zb = upper_tail_inverse(bp)?;
    let za = upper_tail_inverse(au)?;
    Ok(GeometricQuantities::new(0.5 * (zb + za), 0.5 * (zb - za)))
}

/// Gradient of a tail ratio `Q(a) / Q(b)` is expressed through these partials.
fn ratio_partials(a: f64, b: f64) -> (f64, f64, f64) {
    let r = upper_tail_ratio(a, b);
    let qb = upper_tail(b);
    // d/da Q(a)/Q(b) = -phi(a)/Q(b);  d/db = Q(a) phi(b) / Q(b)^2 = r phi(b)/Q(b)
    let da = -(density(a) / qb);
    let db = r * density(b) / qb;
    (r, da, db)
}

fn delta_se(grad: [f64; 2], cov: &[[f64; 2]; 2]) -> f64 {
    let v = grad[0] * grad[0] * cov[0][0]
        + 2.0 * grad[0] * grad[1] * cov[0][1]
        + grad[1] * grad[1] * cov[1][1];
    v.max(0.0).sqrt()
}

/// BP, AU and SI' with delta-method standard errors when the geometry carries
/// a covariance.
pub fn pvalues(g: &GeometricQuantities) -> PValueTriple {
    debug_assert!(g.is_finite());
    let bp = bp_from_geometry(g);
    let au = au_from_geometry(g);
    let si = si_prime(g);
    let mode = g.mode();
    let (se_bp, se_au, se_si) = match g.covariance() {
        None => (None, None, None),
        Some(cov) => {
            let dbp = -density(g.beta0 + g.beta1);
            let dau = -density(g.beta0 - g.beta1);
            let grad_si = match mode {
                // a = beta0 - beta1, b = -beta1
                TestMode::Outside => {
                    let (_, da, db) = ratio_partials(g.beta0 - g.beta1, -g.beta1);
                    [da, -da - db]
                }
                // SI' = 1 - Q(a)/Q(b), a = beta1 - beta0, b = beta1
                TestMode::Inside => {
                    let (_, da, db) = ratio_partials(g.beta1 - g.beta0, g.beta1);
                    [da, -(da + db)]
                }
            };
            (
                Some(delta_se([dbp, dbp], &cov)),
                Some(delta_se([dau, -dau], &cov)),
                Some(delta_se(grad_si, &cov)),
            )
        }
    };
    PValueTriple {
        bp,
        au,
        si_prime: si,
        se_bp,
        se_au,
        se_si,
        mode,
    }
}
