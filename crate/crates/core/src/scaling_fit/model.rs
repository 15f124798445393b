use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Scaling-law models for `psi(sigma^2)`.
///
/// `poly.k` is `sum_{i<k} beta_i sigma^(2i)`; `sing.3` is
/// `beta0 + beta1 sigma^2 / (1 + beta2 (sigma - 1))` with `beta2` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Poly1,
    Poly2,
    Poly3,
    Sing3,
}

impl ModelKind {
    /// The averaging set used by default.
    pub const DEFAULT_SET: [ModelKind; 3] = [ModelKind::Poly2, ModelKind::Poly3, ModelKind::Sing3];

    pub fn n_params(self) -> usize {
        match self {
            ModelKind::Poly1 => 1,
            ModelKind::Poly2 => 2,
            ModelKind::Poly3 | ModelKind::Sing3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Poly1 => "poly.1",
            ModelKind::Poly2 => "poly.2",
            ModelKind::Poly3 => "poly.3",
            ModelKind::Sing3 => "sing.3",
        }
    }

    /// `psi` at `sigma_sq`. Polynomials accept any real `sigma_sq`
    /// (extrapolation); `sing.3` needs `sigma_sq > 0` and a positive denominator.
    pub fn psi(self, coef: &[f64], sigma_sq: f64) -> Result<f64> {
        debug_assert_eq!(coef.len(), self.n_params());
        match self {
            ModelKind::Sing3 => {
                let den = self.sing_denominator(coef, sigma_sq)?;
                Ok(coef[0] + coef[1] * sigma_sq / den)
            }
            _ => Ok(coef.iter().rev().fold(0.0, |acc, &b| acc * sigma_sq + b)),
        }
    }

    fn sing_denominator(self, coef: &[f64], sigma_sq: f64) -> Result<f64> {
        if !(sigma_sq > 0.0) {
            return Err(Error::Domain(format!(
                "sing.3 is defined only for sigma^2 > 0, got {sigma_sq}"
            )));
        }
        let den = 1.0 + coef[2] * (sigma_sq.sqrt() - 1.0);
        if !(den > 0.0) {
            return Err(Error::Domain(format!(
                "sing.3 denominator {den} is not positive at sigma^2 = {sigma_sq}"
            )));
        }
        Ok(den)
    }

    /// Gradient of `psi(sigma_sq)` with respect to the coefficients.
    pub fn psi_gradient(self, coef: &[f64], sigma_sq: f64, grad: &mut [f64]) -> Result<()> {
        match self {
            ModelKind::Sing3 => {
                let den = self.sing_denominator(coef, sigma_sq)?;
                grad[0] = 1.0;
                grad[1] = sigma_sq / den;
                grad[2] = -coef[1] * sigma_sq * (sigma_sq.sqrt() - 1.0) / (den * den);
            }
            _ => {
                let mut power = 1.0;
                for g in grad.iter_mut().take(self.n_params()) {
                    *g = power;
                    power *= sigma_sq;
                }
            }
        }
        Ok(())
    }

    /// `psi(1)` and `d psi / d sigma^2` at `sigma^2 = 1`.
    pub fn value_and_slope_at_unit(self, coef: &[f64]) -> (f64, f64) {
        match self {
            ModelKind::Sing3 => (coef[0] + coef[1], coef[1] * (1.0 - 0.5 * coef[2])),
            _ => (
                coef.iter().sum(),
                coef.iter().enumerate().map(|(i, b)| i as f64 * b).sum(),
            ),
        }
    }

    /// Tangent line at `sigma^2 = 1` as `(beta0, beta1)` together with its
    /// Jacobian with respect to the coefficients (rows: beta0, beta1).
    pub fn tangent_at_unit(self, coef: &[f64]) -> ((f64, f64), [Vec<f64>; 2]) {
        let (value, slope) = self.value_and_slope_at_unit(coef);
        let jac = match self {
            ModelKind::Sing3 => [
                vec![1.0, 0.5 * coef[2], 0.5 * coef[1]],
                vec![0.0, 1.0 - 0.5 * coef[2], -0.5 * coef[1]],
            ],
            _ => {
                let k = self.n_params();
                [
                    (0..k).map(|i| 1.0 - i as f64).collect(),
                    (0..k).map(|i| i as f64).collect(),
                ]
            }
        };
        let beta0 = match self {
            ModelKind::Sing3 => value - slope,
            // exact for poly.1 and poly.2
            _ => coef[0] - coef.iter().enumerate().skip(2).map(|(i, b)| (i as f64 - 1.0) * b).sum::<f64>(),
        };
        ((beta0, slope), jac)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('_', ".").as_str() {
            "poly.1" => Ok(ModelKind::Poly1),
            "poly.2" => Ok(ModelKind::Poly2),
            "poly.3" => Ok(ModelKind::Poly3),
            "sing.3" => Ok(ModelKind::Sing3),
            other => Err(Error::Config(format!("unknown scaling model {other:?}"))),
        }
    }
}
