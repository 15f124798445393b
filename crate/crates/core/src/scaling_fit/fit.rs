use nalgebra::{DMatrix, DVector};

use super::counts::{psi_observed, MultiscaleCounts, PsiProfile};
use super::model::ModelKind;
use crate::normal_theory::{inverse_mills, log_upper_tail};
use crate::{Error, Result};

const MAX_ITER: usize = 200;
const RESTARTS: usize = 5;
// |logit(beta2)| cap for sing.3, i.e. beta2 within about 3e-7 of its bounds
const LOGIT_BOUND: f64 = 15.0;

/// Maximum-likelihood fit of one scaling-law model to multiscale counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingModelFit {
    pub model: ModelKind,
    pub coefficients: Vec<f64>,
    /// Binomial log-likelihood at the optimum, without the combinatorial constant.
    pub max_loglik: f64,
    pub aic: f64,
    /// Inverse observed information (falls back to the expected information
    /// when the observed one is not positive definite).
    pub param_cov: DMatrix<f64>,
    /// Scales with hits of 0 or B. They are left out of the observed `psi`
    /// profile and the starting values; the likelihood still uses them.
    pub degenerate_scales_excluded: Vec<f64>,
}

impl ScalingModelFit {
    pub fn psi(&self, sigma_sq: f64) -> Result<f64> {
        self.model.psi(&self.coefficients, sigma_sq)
    }

    pub fn n_params(&self) -> usize {
        self.model.n_params()
    }
}

struct Objective<'a> {
    model: ModelKind,
    counts: &'a MultiscaleCounts,
    sigma: Vec<f64>,
}

struct Evaluation {
    loglik: f64,
    score: DVector<f64>,
    fisher: DMatrix<f64>,
}

impl<'a> Objective<'a> {
    fn new(model: ModelKind, counts: &'a MultiscaleCounts) -> Self {
        Objective {
            model,
            counts,
            sigma: counts.scales.iter().map(|s| s.sqrt()).collect(),
        }
    }

    fn loglik(&self, beta: &[f64]) -> Result<f64> {
        let mut ll = 0.0;
        for (i, &s) in self.counts.scales.iter().enumerate() {
            let z = self.model.psi(beta, s)? / self.sigma[i];
            let b = self.counts.replicates[i] as f64;
            let h = self.counts.hits[i] as f64;
            if h > 0.0 {
                ll += h * log_upper_tail(z);
            }
            if b > h {
                ll += (b - h) * log_upper_tail(-z);
            }
        }
        Ok(ll)
    }

    /// Log-likelihood, score and expected information in coefficient space.
    fn evaluate(&self, beta: &[f64]) -> Result<Evaluation> {
        let k = self.model.n_params();
        let mut score = DVector::zeros(k);
        let mut fisher = DMatrix::zeros(k, k);
        let mut grad = vec![0.0; k];
        let mut ll = 0.0;
        for (i, &s) in self.counts.scales.iter().enumerate() {
            let sigma = self.sigma[i];
            let z = self.model.psi(beta, s)? / sigma;
            self.model.psi_gradient(beta, s, &mut grad)?;
            let b = self.counts.replicates[i] as f64;
            let h = self.counts.hits[i] as f64;
            let log_p = log_upper_tail(z);
            let log_q = log_upper_tail(-z);
            if h > 0.0 {
                ll += h * log_p;
            }
            if b > h {
                ll += (b - h) * log_q;
            }
            let p = log_p.exp();
            // phi / (p q), evaluated from the side where it cannot underflow
            let m = if z >= 0.0 {
                inverse_mills(z) / log_q.exp()
            } else {
                inverse_mills(-z) / p
            };
            let dz = (b * p - h) * m;
            let phi = crate::normal_theory::density(z);
            let w = b * phi * m;
            for a in 0..k {
                let ga = grad[a] / sigma;
                score[a] += dz * ga;
                for c in 0..k {
                    fisher[(a, c)] += w * ga * grad[c] / sigma;
                }
            }
        }
        Ok(Evaluation {
            loglik: ll,
            score,
            fisher,
        })
    }

    // Unconstrained parameterisation: sing.3 optimises logit(beta2).
    fn to_beta(&self, theta: &[f64]) -> Vec<f64> {
        let mut beta = theta.to_vec();
        if self.model == ModelKind::Sing3 {
            beta[2] = logistic(theta[2]);
        }
        beta
    }

    fn to_theta(&self, beta: &[f64]) -> Vec<f64> {
        let mut theta = beta.to_vec();
        if self.model == ModelKind::Sing3 {
            let b = beta[2].clamp(1e-6, 1.0 - 1e-6);
            theta[2] = (b / (1.0 - b)).ln();
        }
        theta
    }

    fn evaluate_theta(&self, theta: &[f64]) -> Result<Evaluation> {
        let mut e = self.evaluate(&self.to_beta(theta))?;
        if self.model == ModelKind::Sing3 {
            let b2 = logistic(theta[2]);
            let d = b2 * (1.0 - b2);
            e.score[2] *= d;
            for j in 0..3 {
                e.fisher[(2, j)] *= d;
                e.fisher[(j, 2)] *= d;
            }
        }
        Ok(e)
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

struct Optimum {
    theta: Vec<f64>,
    loglik: f64,
    converged: bool,
    iterations: usize,
}

/// Levenberg-damped Fisher scoring from one starting point.
fn maximise(obj: &Objective<'_>, start: Vec<f64>) -> Result<Optimum> {
    let k = start.len();
    let mut theta = start;
    let mut current = obj.evaluate_theta(&theta)?;
    let mut lambda = 1e-3;
    for iter in 0..MAX_ITER {
        let mut improved = false;
        while lambda < 1e12 {
            let mut lhs = current.fisher.clone();
            for j in 0..k {
                lhs[(j, j)] += lambda * current.fisher[(j, j)].max(1e-12) + 1e-12;
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&current.score);
            let mut candidate: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            if obj.model == ModelKind::Sing3 {
                candidate[2] = candidate[2].clamp(-LOGIT_BOUND, LOGIT_BOUND);
            }
            let trial = obj.evaluate_theta(&candidate);
            match trial {
                Ok(next) if next.loglik.is_finite() && next.loglik >= current.loglik => {
                    let gain = next.loglik - current.loglik;
                    let small_step = theta
                        .iter()
                        .zip(&candidate)
                        .all(|(t, c)| (c - t).abs() <= 1e-9 * (1.0 + c.abs()));
                    theta = candidate;
                    current = next;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if gain <= 1e-10 * current.loglik.abs().max(1.0) || small_step {
                        return Ok(Optimum {
                            theta,
                            loglik: current.loglik,
                            converged: true,
                            iterations: iter + 1,
                        });
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            // No damped step improves the likelihood: stationary point.
            return Ok(Optimum {
                theta,
                loglik: current.loglik,
                converged: true,
                iterations: iter + 1,
            });
        }
    }
    Ok(Optimum {
        theta,
        loglik: current.loglik,
        converged: false,
        iterations: MAX_ITER,
    })
}

/// Weighted least squares of `psi` on the given regressors.
fn wls(profile: &PsiProfile, columns: impl Fn(f64) -> Vec<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = profile.points.iter().map(|p| columns(p.sigma_sq)).collect();
    let k = rows.first()?.len();
    if profile.points.len() < k {
        return None;
    }
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for (row, p) in rows.iter().zip(&profile.points) {
        let w = 1.0 / (p.se * p.se).max(1e-300);
        for a in 0..k {
            xty[a] += w * row[a] * p.psi;
            for c in 0..k {
                xtx[(a, c)] += w * row[a] * row[c];
            }
        }
    }
    let inv = xtx.try_inverse()?;
    let coef = &inv * xty;
    let se = (0..k).map(|j| inv[(j, j)].max(0.0).sqrt()).collect();
    Some((coef.iter().copied().collect(), se))
}

fn starting_points(model: ModelKind, profile: &PsiProfile) -> Vec<Vec<f64>> {
    const OFFSETS: [f64; RESTARTS] = [0.0, 1.0, -1.0, 2.0, -2.0];
    match model {
        ModelKind::Sing3 => [0.5, 0.1, 0.9, 0.3, 0.7]
            .iter()
            .filter_map(|&b2| {
                let (c, _) = wls(profile, |s| vec![1.0, s / (1.0 + b2 * (s.sqrt() - 1.0))])?;
                Some(vec![c[0], c[1], b2])
            })
            .collect(),
        _ => {
            let k = model.n_params();
            let Some((coef, se)) = wls(profile, |s| (0..k).map(|i| s.powi(i as i32)).collect())
            else {
                return Vec::new();
            };
            OFFSETS
                .iter()
                .map(|&o| {
                    coef.iter()
                        .zip(&se)
                        .enumerate()
                        .map(|(j, (c, s))| {
                            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                            c + sign * o * s.min(1.0)
                        })
                        .collect()
                })
                .collect()
        }
    }
}

fn symmetric_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse())
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let n = sym.nrows();
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = max * 1e-12;
    let mut out = DMatrix::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > tol {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// Observed information by central differences of the analytic score.
fn observed_information(obj: &Objective<'_>, beta: &[f64]) -> Option<DMatrix<f64>> {
    let k = beta.len();
    let mut info = DMatrix::zeros(k, k);
    for j in 0..k {
        let h = 1e-5 * beta[j].abs().max(1.0);
        let mut up = beta.to_vec();
        let mut dn = beta.to_vec();
        up[j] += h;
        dn[j] -= h;
        let su = obj.evaluate(&up).ok()?.score;
        let sd = obj.evaluate(&dn).ok()?.score;
        for i in 0..k {
            info[(i, j)] = -(su[i] - sd[i]) / (2.0 * h);
        }
    }
    Some(info)
}

/// Fits `model` to `counts` by binomial maximum likelihood with
/// `p_s = Q(psi(sigma_s^2) / sigma_s)`.
pub fn fit_model(counts: &MultiscaleCounts, model: ModelKind) -> Result<ScalingModelFit> {
    let profile = psi_observed(counts)?;
    let k = model.n_params();
    if profile.points.len() < k {
        return Err(Error::InsufficientData(format!(
            "{}: {} needs {k} informative scales, found {}",
            counts.item_id,
            model,
            profile.points.len()
        )));
    }
    let obj = Objective::new(model, counts);
    let starts = starting_points(model, &profile);
    let mut best: Option<Optimum> = None;
    let mut diagnostics = Vec::new();
    for start in starts {
        let theta0 = obj.to_theta(&start);
        match maximise(&obj, theta0) {
            Ok(opt) if opt.converged && opt.loglik.is_finite() => {
                if best.as_ref().map_or(true, |b| opt.loglik > b.loglik) {
                    best = Some(opt);
                }
            }
            Ok(opt) => diagnostics.push(format!(
                "start {start:?}: no convergence after {} iterations (loglik {:.6})",
                opt.iterations, opt.loglik
            )),
            Err(e) => diagnostics.push(format!("start {start:?}: {e}")),
        }
    }
    let Some(best) = best else {
        return Err(Error::Fit {
            model: model.name().into(),
            detail: format!("{}: {}", counts.item_id, diagnostics.join("; ")),
        });
    };
    let beta = obj.to_beta(&best.theta);
    let max_loglik = obj.loglik(&beta)?;
    let param_cov = observed_information(&obj, &beta)
        .and_then(|info| symmetric_inverse(&info))
        .unwrap_or_else(|| pseudo_inverse(&obj.evaluate(&beta).map(|e| e.fisher).unwrap_or_else(|_| DMatrix::zeros(k, k))));
    let degenerate = counts
        .scales
        .iter()
        .zip(counts.replicates.iter().zip(&counts.hits))
        .filter(|(_, (&b, &h))| h == 0 || h == b)
        .map(|(&s, _)| s)
        .collect();
    Ok(ScalingModelFit {
        model,
        coefficients: beta,
        max_loglik,
        aic: -2.0 * max_loglik + 2.0 * k as f64,
        param_cov,
        degenerate_scales_excluded: degenerate,
    })
}
