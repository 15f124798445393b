use super::counts::MultiscaleCounts;
use super::fit::{fit_model, ScalingModelFit};
use super::model::ModelKind;
use crate::normal_theory::{pvalues, GeometricQuantities, PValueTriple};
use crate::{Error, Result};

const MIN_WEIGHT: f64 = 1e-6;

/// Candidate fits combined with Akaike weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedFit {
    pub fits: Vec<ScalingModelFit>,
    pub weights: Vec<f64>,
}

impl AveragedFit {
    /// Model with the smallest AIC.
    pub fn best(&self) -> &ScalingModelFit {
        self.fits
            .iter()
            .min_by(|a, b| a.aic.total_cmp(&b.aic))
            .expect("averaged fit is never empty")
    }

    /// Weighted average of the member curves.
    pub fn psi(&self, sigma_sq: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (f, w) in self.fits.iter().zip(&self.weights) {
            acc += w * f.psi(sigma_sq)?;
        }
        Ok(acc)
    }
}

/// Akaike weights `exp(-(aic - min) / 2)`, normalised; fits below `1e-6`
/// are dropped and the remaining weights renormalised.
pub fn select_and_average(fits: Vec<ScalingModelFit>) -> Result<AveragedFit> {
    let min = fits
        .iter()
        .map(|f| f.aic)
        .filter(|a| a.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::InsufficientData("no successful model fit to average".into()));
    }
    let raw: Vec<f64> = fits.iter().map(|f| (-(f.aic - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    let (fits, raw): (Vec<_>, Vec<_>) = fits
        .into_iter()
        .zip(raw)
        .filter(|(_, w)| w / total >= MIN_WEIGHT)
        .unzip();
    let total: f64 = raw.iter().sum();
    Ok(AveragedFit {
        fits,
        weights: raw.iter().map(|w| w / total).collect(),
    })
}

/// `beta0 = psi(1) - psi'(1)` and `beta1 = psi'(1)` from the averaged tangent
/// line at `sigma^2 = 1`. The covariance is the weighted average of each
/// member's delta-method covariance, weights held fixed.
pub fn geometry_at_unit_scale(avg: &AveragedFit) -> GeometricQuantities {
    let (mut b0, mut b1) = (0.0, 0.0);
    let mut cov = [[0.0; 2]; 2];
    for (fit, &w) in avg.fits.iter().zip(&avg.weights) {
        let ((t0, t1), jac) = fit.model.tangent_at_unit(&fit.coefficients);
        b0 += w * t0;
        b1 += w * t1;
        for a in 0..2 {
            for c in 0..2 {
                let mut v = 0.0;
                for i in 0..jac[a].len() {
                    for j in 0..jac[c].len() {
                        v += jac[a][i] * fit.param_cov[(i, j)] * jac[c][j];
                    }
                }
                cov[a][c] += w * v;
            }
        }
    }
    GeometricQuantities::new(b0, b1).with_covariance(cov[0][0], cov[1][1], cov[0][1])
}

pub fn pvalues_from_fit(avg: &AveragedFit) -> PValueTriple {
    pvalues(&geometry_at_unit_scale(avg))
}

/// Outcome of fitting one item with a model set.
#[derive(Debug)]
pub struct ItemFit {
    pub averaged: AveragedFit,
    /// Models that failed, with the reason.
    pub failures: Vec<(ModelKind, Error)>,
}

impl ItemFit {
    pub fn geometry(&self) -> GeometricQuantities {
        geometry_at_unit_scale(&self.averaged)
    }

    pub fn pvalues(&self) -> PValueTriple {
        pvalues_from_fit(&self.averaged)
    }
}

/// Fits every model in `models` and averages the ones that succeed.
pub fn fit_counts(counts: &MultiscaleCounts, models: &[ModelKind]) -> Result<ItemFit> {
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for &m in models {
        match fit_model(counts, m) {
            Ok(f) => fits.push(f),
            Err(e) => failures.push((m, e)),
        }
    }
    if fits.is_empty() {
        return Err(failures
            .into_iter()
            .next()
            .map(|(_, e)| e)
            .unwrap_or_else(|| Error::InsufficientData("empty model set".into())));
    }
    Ok(ItemFit {
        averaged: select_and_average(fits)?,
        failures,
    })
}
