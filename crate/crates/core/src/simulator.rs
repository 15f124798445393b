//! Regions of known geometry and Monte Carlo checks of the p-value theory.
//!
//! A region lives in `R^(m+1)`; an observation `y` and bootstrap replicates
//! `Y* ~ N(y, sigma^2 I)` are drawn directly from the normal model, so the
//! whole pipeline (counts, fit, p-values) can be compared with exact answers.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::normal_theory::{au_from_geometry, upper_tail_ratio, GeometricQuantities, PValueTriple};
use crate::scaling_fit::{fit_counts, ModelKind, MultiscaleCounts};
use crate::{rng, Error, Result};

const UNIT_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;
// stream index reserved for drawing the observation of a trial
const OBSERVATION_STREAM: usize = 0xFFFF;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `{x : x_last <= offset}`.
    HalfSpace { offset: f64 },
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Intersection of half-spaces `{x : n . x <= b}` with unit normals `n`.
    Cone { facets: Vec<(Vec<f64>, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub shape: Shape,
    pub dim: usize,
    /// The region is the complement of `shape`.
    pub complement: bool,
}

impl RegionSpec {
    pub fn half_space(dim: usize, offset: f64) -> Result<Self> {
        if dim == 0 || !offset.is_finite() {
            return Err(Error::Config("half-space needs dim >= 1 and a finite offset".into()));
        }
        Ok(RegionSpec {
            shape: Shape::HalfSpace { offset },
            dim,
            complement: false,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("ball center must be a finite, non-empty point".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
        }
        Ok(RegionSpec {
            dim: center.len(),
            shape: Shape::Ball { center, radius },
            complement: false,
        })
    }

    pub fn cone(facets: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dim = facets.first().map_or(0, |f| f.0.len());
        if dim == 0 {
            return Err(Error::Config("cone needs at least one facet".into()));
        }
        for (normal, offset) in &facets {
            if normal.len() != dim {
                return Err(Error::Config("cone facet normals differ in dimension".into()));
            }
            let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOL || !offset.is_finite() {
                return Err(Error::Config(format!(
                    "cone facet normal has length {norm}, expected 1"
                )));
            }
        }
        Ok(RegionSpec {
            shape: Shape::Cone { facets },
            dim,
            complement: false,
        })
    }

    pub fn complemented(mut self) -> Self {
        self.complement = !self.complement;
        self
    }

    /// `m` in `R^(m+1)`.
    pub fn m(&self) -> usize {
        self.dim - 1
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::Precondition(format!(
                "point has dimension {}, region {}",
                point.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn shape_contains(shape: &Shape, x: &[f64]) -> bool {
    match shape {
        Shape::HalfSpace { offset } => x[x.len() - 1] <= *offset,
        Shape::Ball { center, radius } => {
            x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() <= radius * radius
        }
        Shape::Cone { facets } => facets.iter().all(|(n, b)| dot(n, x) <= *b),
    }
}

/// Exact membership of `point` in the region.
pub fn membership(region: &RegionSpec, point: &[f64]) -> bool {
    debug_assert_eq!(point.len(), region.dim);
    shape_contains(&region.shape, point) != region.complement
}

/// Signed distance (positive outside) and mean curvature of the region seen
/// from `y`.
pub fn analytic_geometry(region: &RegionSpec, y: &[f64]) -> Result<GeometricQuantities> {
    region.check_point(y)?;
    let g = match &region.shape {
        Shape::HalfSpace { offset } => GeometricQuantities::new(y[y.len() - 1] - offset, 0.0),
        Shape::Ball { center, radius } => {
            let d = y.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
            if d < TIE_TOL {
                return Err(Error::Ambiguous("observation at the ball center".into()));
            }
            GeometricQuantities::new(d - radius, region.m() as f64 / (2.0 * radius))
        }
        Shape::Cone { facets } => cone_geometry(facets, y)?,
    };
    Ok(if region.complement { g.complement() } else { g })
}

fn cone_geometry(facets: &[(Vec<f64>, f64)], y: &[f64]) -> Result<GeometricQuantities> {
    let slack: Vec<f64> = facets.iter().map(|(n, b)| dot(n, y) - b).collect();
    let max = slack.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        let nearest: Vec<usize> = (0..facets.len()).filter(|&k| max - slack[k] <= TIE_TOL).collect();
        if nearest.len() > 1 && max < 0.0 {
            return Err(Error::Ambiguous(format!(
                "observation equidistant to facets {nearest:?}"
            )));
        }
        return Ok(GeometricQuantities::new(max, 0.0));
    }
    let mut active = Vec::new();
    for (k, (normal, _)) in facets.iter().enumerate() {
        if slack[k] <= 0.0 {
            continue;
        }
        let proj: Vec<f64> = y.iter().zip(normal).map(|(a, n)| a - slack[k] * n).collect();
        let feasible = facets
            .iter()
            .enumerate()
            .all(|(j, (n, b))| j == k || dot(n, &proj) - b < -TIE_TOL);
        if feasible {
            active.push(k);
        }
    }
    match active.as_slice() {
        [k] => Ok(GeometricQuantities::new(slack[*k], 0.0)),
        _ => Err(Error::Ambiguous(
            "projection onto the cone is not interior to a single facet".into(),
        )),
    }
}

fn draw_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Bootstrap counts drawn directly from `N(y, sigma^2 I)` at each scale.
/// Scale `s` uses its own random stream, so counts are reproducible per seed.
pub fn direct_multiscale_counts(
    region: &RegionSpec,
    y: &[f64],
    scales: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<MultiscaleCounts> {
    region.check_point(y)?;
    if replicates == 0 {
        return Err(Error::Config("at least one replicate per scale is required".into()));
    }
    let mut hits = Vec::with_capacity(scales.len());
    let mut x = vec![0.0; region.dim];
    for (si, &s) in scales.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Scale(format!("sigma^2 = {s} is not positive")));
        }
        let sigma = s.sqrt();
        let mut rng = rng::stream(seed, si, 0);
        let mut h = 0u64;
        match (&region.shape, region.complement) {
            // only the last coordinate matters
            (Shape::HalfSpace { offset }, complement) => {
                let last = y[y.len() - 1];
                for _ in 0..replicates {
                    let inside = last + sigma * draw_normal(&mut rng) <= *offset;
                    h += (inside != complement) as u64;
                }
            }
            _ => {
                for _ in 0..replicates {
                    for (xi, yi) in x.iter_mut().zip(y) {
                        *xi = yi + sigma * draw_normal(&mut rng);
                    }
                    h += membership(region, &x) as u64;
                }
            }
        }
        hits.push(h);
    }
    MultiscaleCounts::new("region", scales.to_vec(), vec![replicates; scales.len()], hits)
}

/// Settings of the counts, fit and p-value pipeline used in each trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scales: Vec<f64>,
    pub replicates: u64,
    pub models: Vec<ModelKind>,
    pub seed: u64,
}

/// Result of one simulated observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub y: Vec<f64>,
    /// `y` lies outside the region (the selection event of outside mode).
    pub outside: bool,
    /// Fitted geometry; `None` when no model could be fitted.
    pub geometry: Option<GeometricQuantities>,
    pub pvalues: Option<PValueTriple>,
}

impl TrialOutcome {
    pub fn au(&self) -> Option<f64> {
        self.geometry.as_ref().map(au_from_geometry)
    }

    /// Outside-mode SI from the fitted geometry, capped at 1. A fitted
    /// `beta0 <= 0` yields 1 (no rejection).
    pub fn si_outside(&self) -> Option<f64> {
        self.geometry
            .as_ref()
            .map(|g| upper_tail_ratio(g.beta0 - g.beta1, -g.beta1).min(1.0))
    }
}

/// Fitted geometry for counts drawn at `y`.
pub fn estimate_geometry(
    region: &RegionSpec,
    y: &[f64],
    config: &PipelineConfig,
) -> Result<crate::scaling_fit::ItemFit> {
    let counts = direct_multiscale_counts(region, y, &config.scales, config.replicates, config.seed)?;
    fit_counts(&counts, &config.models)
}

/// Draws `Y ~ N(mu, I)` for every trial and runs the full pipeline at `Y`.
/// Trial `t` derives its own seed from `(config.seed, t)`.
pub fn run_trials(
    region: &RegionSpec,
    mu: &[f64],
    trials: usize,
    config: &PipelineConfig,
) -> Result<Vec<TrialOutcome>> {
    region.check_point(mu)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = rng::derive_seed(config.seed, t as u64);
            let mut obs = rng::stream(seed, OBSERVATION_STREAM, 0);
            let y: Vec<f64> = mu.iter().map(|m| m + draw_normal(&mut obs)).collect();
            let outside = !membership(region, &y);
            let trial_config = PipelineConfig { seed, ..config.clone() };
            let fitted = estimate_geometry(region, &y, &trial_config);
            let (geometry, pvalues) = match fitted {
                Ok(f) => (Some(f.geometry()), Some(f.pvalues())),
                Err(Error::InsufficientData(_)) | Err(Error::Fit { .. }) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(TrialOutcome {
                y,
                outside,
                geometry,
                pvalues,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    /// Rejections `AU < alpha` among all trials.
    AuUnconditional,
    /// Rejections `SI < alpha` among trials with `Y` outside the region.
    SiConditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Qualifying trials (all trials, or those with `Y` outside).
    pub trials: usize,
    pub rejections: usize,
    pub rate: f64,
    pub binomial_se: f64,
    pub target_alpha: f64,
    /// Qualifying trials where no model could be fitted; counted as not rejected.
    pub failed_fits: usize,
}

/// Type-I error rate of one mode over already simulated trials.
pub fn summarize(outcomes: &[TrialOutcome], mode: ExperimentMode, alpha: f64) -> Result<ExperimentReport> {
    let mut trials = 0;
    let mut rejections = 0;
    let mut failed = 0;
    for o in outcomes {
        let p = match mode {
            ExperimentMode::AuUnconditional => o.au(),
            ExperimentMode::SiConditional if o.outside => o.si_outside(),
            ExperimentMode::SiConditional => continue,
        };
        trials += 1;
        match p {
            Some(p) => rejections += (p < alpha) as usize,
            None => failed += 1,
        }
    }
    if trials == 0 {
        return Err(Error::InsufficientData("no qualifying trials".into()));
    }
    let rate = rejections as f64 / trials as f64;
    Ok(ExperimentReport {
        trials,
        rejections,
        rate,
        binomial_se: (alpha * (1.0 - alpha) / trials as f64).sqrt(),
        target_alpha: alpha,
        failed_fits: failed,
    })
}

/// Checks that `mu` lies on the region boundary.
pub fn check_on_boundary(region: &RegionSpec, mu: &[f64]) -> Result<()> {
    let g = analytic_geometry(region, mu)?;
    if g.beta0.abs() >= UNIT_TOL {
        return Err(Error::Precondition(format!(
            "mu is at signed distance {} from the boundary",
            g.beta0
        )));
    }
    Ok(())
}

/// Monte Carlo type-I error of AU (unconditional) or SI (conditional on
/// selection) for a null mean on the region boundary.
pub fn type1_experiment(
    region: &RegionSpec,
    mu_on_boundary: &[f64],
    alpha: f64,
    trials: usize,
    mode: ExperimentMode,
    config: &PipelineConfig,
) -> Result<ExperimentReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} outside (0, 1)")));
    }
    check_on_boundary(region, mu_on_boundary)?;
    let outcomes = run_trials(region, mu_on_boundary, trials, config)?;
    summarize(&outcomes, mode, alpha)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `values` and the uniform distribution on `[0, 1]`.
pub fn ks_uniform_statistic(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_theory::upper_tail;
    use crate::scaling_fit::ScaleGrid;

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    // P(chi'^2_k(lambda) <= x) for even k via the Poisson mixture of central
    // chi-square CDFs, each in closed form for even degrees of freedom.
    fn noncentral_chi2_cdf_even(k: usize, lambda: f64, x: f64) -> f64 {
        assert!(k % 2 == 0);
        let half = x / 2.0;
        let central = |dof: usize| {
            let m = dof / 2;
            let tail: f64 = (0..m).map(|i| (i as f64 * half.ln() - half - ln_factorial(i)).exp()).sum();
            1.0 - tail
        };
        (0..600)
            .map(|j| {
                let w = (j as f64 * (lambda / 2.0).ln() - lambda / 2.0 - ln_factorial(j)).exp();
                w * central(k + 2 * j)
            })
            .sum()
    }

    #[test]
    fn oracle_sanity() {
        // lambda = 0 reduces to the central chi-square: P(chi2_4 <= 4) = 1 - 3 e^-2
        let got = noncentral_chi2_cdf_even(4, 1e-300, 4.0);
        assert!((got - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn memberships() {
        let h = RegionSpec::half_space(2, 0.0).unwrap();
        assert!(membership(&h, &[5.0, -0.1]));
        assert!(!membership(&h.clone().complemented(), &[5.0, -0.1]));
        let b = RegionSpec::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(!membership(&b, &[2.0, 0.0]));
        assert!(membership(&b, &[0.5, 0.5]));
        let c = RegionSpec::cone(vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)]).unwrap();
        assert!(membership(&c, &[-1.0, -1.0]));
        assert!(!membership(&c, &[-1.0, 0.5]));
        assert!(RegionSpec::cone(vec![(vec![1.0, 1.0], 0.0)]).is_err());
        assert!(RegionSpec::ball(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn geometry_of_shapes() {
        let h = RegionSpec::half_space(2, 0.0).unwrap();
        let g = analytic_geometry(&h, &[0.3, 1.3]).unwrap();
        assert_eq!((g.beta0, g.beta1), (1.3, 0.0));
        let b = RegionSpec::ball(vec![0.0; 4], 10.0).unwrap();
        let g = analytic_geometry(&b, &[0.0, 0.0, 0.0, 12.0]).unwrap();
        assert!((g.beta0 - 2.0).abs() < 1e-12 && (g.beta1 - 0.15).abs() < 1e-12);
        let g = analytic_geometry(&b, &[0.0, 10.0, 0.0, 0.0]).unwrap();
        assert_eq!((g.beta0, g.beta1), (0.0, 0.15));
        let g = analytic_geometry(&b, &[0.0, 7.0, 0.0, 0.0]).unwrap();
        assert!((g.beta0 + 3.0).abs() < 1e-12);
        let g = analytic_geometry(&b.clone().complemented(), &[0.0, 0.0, 0.0, 12.0]).unwrap();
        assert!((g.beta0 + 2.0).abs() < 1e-12 && (g.beta1 + 0.15).abs() < 1e-12);
        assert!(matches!(analytic_geometry(&b, &[0.0; 4]), Err(Error::Ambiguous(_))));
        assert!(analytic_geometry(&b, &[0.0; 3]).is_err());
    }

    #[test]
    fn cone_geometry_cases() {
        let c = RegionSpec::cone(vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)]).unwrap();
        let g = analytic_geometry(&c, &[-2.0, 0.7]).unwrap();
        assert!((g.beta0 - 0.7).abs() < 1e-12 && g.beta1 == 0.0);
        let g = analytic_geometry(&c, &[-2.0, -0.5]).unwrap();
        assert!((g.beta0 + 0.5).abs() < 1e-12);
        // projection onto the apex
        assert!(matches!(analytic_geometry(&c, &[1.0, 1.0]), Err(Error::Ambiguous(_))));
        // equidistant inside
        assert!(matches!(analytic_geometry(&c, &[-1.0, -1.0]), Err(Error::Ambiguous(_))));
    }

    fn within_4se(hits: u64, b: u64, p: f64) -> bool {
        let got = hits as f64 / b as f64;
        (got - p).abs() <= 4.0 * (p * (1.0 - p) / b as f64).sqrt()
    }

    #[test]
    fn direct_counts_match_exact_probabilities() {
        let b = 100_000;
        let h = RegionSpec::half_space(2, 0.0).unwrap();
        let c = direct_multiscale_counts(&h, &[0.0, 0.0], &[0.5, 1.0, 4.0], b, 1).unwrap();
        assert!(c.hits.iter().all(|&x| within_4se(x, b, 0.5)));
        let c = direct_multiscale_counts(&h, &[0.0, 1.0], &[1.0, 2.0], b, 2).unwrap();
        assert!(within_4se(c.hits[0], b, upper_tail(1.0)), "{:?}", c.hits);
        assert!(within_4se(c.hits[1], b, upper_tail(1.0 / 2f64.sqrt())));

        let ball = RegionSpec::ball(vec![0.0; 4], 10.0).unwrap();
        let y = [0.0, 0.0, 0.0, 11.0];
        let c = direct_multiscale_counts(&ball, &y, &[0.5, 1.0, 3.0], b, 3).unwrap();
        for (s, hits) in [0.5, 1.0, 3.0].iter().zip(&c.hits) {
            let p = noncentral_chi2_cdf_even(4, 121.0 / s, 100.0 / s);
            assert!(within_4se(*hits, b, p), "scale {s}: {hits} vs {p}");
        }
        let again = direct_multiscale_counts(&ball, &y, &[0.5, 1.0, 3.0], b, 3).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn complement_counts_are_complementary() {
        let ball = RegionSpec::ball(vec![0.0; 2], 2.0).unwrap();
        let y = [0.0, 2.5];
        let a = direct_multiscale_counts(&ball, &y, &[0.5, 1.0], 1000, 9).unwrap();
        let b = direct_multiscale_counts(&ball.clone().complemented(), &y, &[0.5, 1.0], 1000, 9).unwrap();
        for i in 0..2 {
            assert_eq!(a.hits[i] + b.hits[i], 1000);
        }
    }

    fn config(b: u64) -> PipelineConfig {
        PipelineConfig {
            scales: ScaleGrid::Wide13.sigma_squared(),
            replicates: b,
            models: ModelKind::DEFAULT_SET.to_vec(),
            seed: 11,
        }
    }

    #[test]
    fn half_space_fit_is_flat() {
        let h = RegionSpec::half_space(2, 0.0).unwrap();
        let fit = estimate_geometry(&h, &[0.0, 1.2], &config(100_000)).unwrap();
        let g = fit.geometry();
        assert!((g.beta0 - 1.2).abs() < 3.0 * g.se_beta0.unwrap(), "{g:?}");
        assert!(g.beta1.abs() < 3.0 * g.se_beta1.unwrap(), "{g:?}");
    }

    #[test]
    fn complement_duality() {
        let ball = RegionSpec::ball(vec![0.0; 3], 5.0).unwrap();
        let y = [0.0, 0.0, 6.0];
        let a = estimate_geometry(&ball, &y, &config(100_000)).unwrap().geometry();
        let b = estimate_geometry(&ball.complemented(), &y, &config(100_000)).unwrap().geometry();
        let tol = |s: Option<f64>| 4.0 * s.unwrap() + 1e-6;
        assert!((a.beta0 + b.beta0).abs() < tol(a.se_beta0), "{a:?} {b:?}");
        assert!((a.beta1 + b.beta1).abs() < tol(a.se_beta1), "{a:?} {b:?}");
    }

    #[test]
    fn small_experiment_runs_and_is_deterministic() {
        let h = RegionSpec::half_space(2, 0.0).unwrap();
        let cfg = PipelineConfig {
            scales: ScaleGrid::Wide13.sigma_squared(),
            replicates: 2000,
            models: vec![ModelKind::Poly2],
            seed: 5,
        };
        let out = run_trials(&h, &[0.0, 0.0], 200, &cfg).unwrap();
        assert_eq!(out, run_trials(&h, &[0.0, 0.0], 200, &cfg).unwrap());
        let au = summarize(&out, ExperimentMode::AuUnconditional, 0.05).unwrap();
        assert_eq!(au.trials, 200);
        assert!(au.rate < 0.15);
        let si = summarize(&out, ExperimentMode::SiConditional, 0.05).unwrap();
        assert!(si.trials > 50 && si.trials < 150);
        assert!(matches!(
            type1_experiment(&h, &[0.0, 0.5], 0.05, 10, ExperimentMode::AuUnconditional, &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ks_statistic() {
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_uniform_statistic(&grid) - 0.0005).abs() < 1e-12);
        let skewed: Vec<f64> = grid.iter().map(|x| x * x).collect();
        assert!(ks_uniform_statistic(&skewed) > ks_critical_value(1000, 0.01));
        assert!((ks_critical_value(10_000, 0.01) - 0.016_276).abs() < 1e-5);
    }
}
