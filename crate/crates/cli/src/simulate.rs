//! `simulate`: type-I error experiments and fitted-vs-analytic geometry on
//! regions of known shape, described by a small TOML file:
//!
//! ```toml
//! region = "ball"          # half_space, ball or cone
//! center = [0.0, 0.0, 0.0, 0.0]
//! radius = 10.0
//! mu = [0.0, 0.0, 0.0, 10.0]   # null mean on the boundary
//! observation = [0.0, 0.0, 0.0, 11.0]
//! scales = "wide13"
//! replicates = 100000
//! trials = 0
//! alpha = 0.05
//! seed = 1
//! ```

use std::fmt::Write as _;
use std::path::Path;

use scalesi_core::simulator::{
    analytic_geometry, check_on_boundary, estimate_geometry, run_trials, summarize, ExperimentMode, PipelineConfig,
    TrialOutcome,
};
use scalesi_core::{Error, ModelKind, RegionSpec, Result, ScaleGrid};
use serde::Deserialize;

use crate::config::{check_alpha, parse_models, MIN_REPLICATES};
use crate::output::{io_context, num, opt, Staged};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalesSpec {
    Named(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub region: String,
    /// Dimension `m + 1` (half-space only; other shapes infer it).
    pub dim: Option<usize>,
    pub offset: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    #[serde(default)]
    pub facets: Vec<Facet>,
    #[serde(default)]
    pub complement: bool,
    /// Null mean on the boundary for the type-I experiment.
    pub mu: Option<Vec<f64>>,
    /// Fixed observation for the geometry comparison.
    pub observation: Option<Vec<f64>>,
    #[serde(default = "default_scales")]
    pub scales: ScalesSpec,
    pub replicates: u64,
    #[serde(default)]
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    pub models: Option<Vec<String>>,
}

fn default_scales() -> ScalesSpec {
    ScalesSpec::Named("wide13".into())
}

fn default_alpha() -> f64 {
    0.05
}

impl SimulationConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("simulation config: {e}")))
    }

    pub fn region(&self) -> Result<RegionSpec> {
        let missing = |key: &str| Error::Config(format!("region '{}' needs '{key}'", self.region));
        let spec = match self.region.as_str() {
            "half_space" => RegionSpec::half_space(self.dim.ok_or_else(|| missing("dim"))?, self.offset.unwrap_or(0.0))?,
            "ball" => RegionSpec::ball(
                self.center.clone().ok_or_else(|| missing("center"))?,
                self.radius.ok_or_else(|| missing("radius"))?,
            )?,
            "cone" => {
                if self.facets.is_empty() {
                    return Err(missing("facets"));
                }
                RegionSpec::cone(self.facets.iter().map(|f| (f.normal.clone(), f.offset)).collect())?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown region '{other}' (half_space, ball or cone)"
                )))
            }
        };
        if let Some(d) = self.dim {
            if d != spec.dim {
                return Err(Error::Config(format!("dim = {d} but the region lives in dimension {}", spec.dim)));
            }
        }
        Ok(if self.complement { spec.complemented() } else { spec })
    }

    pub fn scales(&self) -> Result<Vec<f64>> {
        let grid = match &self.scales {
            ScalesSpec::Named(s) => s.parse::<ScaleGrid>()?,
            ScalesSpec::List(v) => ScaleGrid::Custom(v.clone()),
        };
        let s = grid.sigma_squared();
        if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("scales must be positive".into()));
        }
        Ok(s)
    }

    pub fn models(&self) -> Result<Vec<ModelKind>> {
        match &self.models {
            Some(names) => parse_models(&names.join(",")),
            None => Ok(ModelKind::DEFAULT_SET.to_vec()),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "replicates = {} is below the minimum of {MIN_REPLICATES}",
                self.replicates
            )));
        }
        check_alpha(self.alpha)?;
        Ok(PipelineConfig {
            scales: self.scales()?,
            replicates: self.replicates,
            models: self.models()?,
            seed: self.seed,
        })
    }
}

/// Result tables of one simulation.
#[derive(Debug)]
pub struct SimulationOutput {
    pub outcomes: Vec<TrialOutcome>,
    pub report: Option<String>,
    pub trials: Option<String>,
    pub geometry: Option<String>,
}

fn trial_table(region: &RegionSpec, outcomes: &[TrialOutcome]) -> String {
    let mut s = String::from("trial\toutside\tbeta0_true\tbeta1_true\tbeta0_fit\tse_beta0\tbeta1_fit\tse_beta1\tau\tsi\n");
    for (t, o) in outcomes.iter().enumerate() {
        let truth = analytic_geometry(region, &o.y).ok();
        let _ = writeln!(
            s,
            "{t}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            o.outside as u8,
            opt(truth.map(|g| g.beta0)),
            opt(truth.map(|g| g.beta1)),
            opt(o.geometry.map(|g| g.beta0)),
            opt(o.geometry.and_then(|g| g.se_beta0)),
            opt(o.geometry.map(|g| g.beta1)),
            opt(o.geometry.and_then(|g| g.se_beta1)),
            opt(o.au()),
            opt(o.si_outside()),
        );
    }
    s
}

pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    let region = cfg.region()?;
    let pipeline = cfg.pipeline()?;
    if cfg.trials == 0 && cfg.observation.is_none() {
        return Err(Error::Config("nothing to do: set trials > 0 or an observation".into()));
    }
    let mut out = SimulationOutput {
        outcomes: Vec::new(),
        report: None,
        trials: None,
        geometry: None,
    };
    if let Some(y) = &cfg.observation {
        let truth = analytic_geometry(&region, y)?;
        let fit = estimate_geometry(&region, y, &pipeline)?;
        let g = fit.geometry();
        let mut s = String::from("quantity\tanalytic\tfitted\tse\tz\n");
        for (name, a, f, se) in [
            ("beta0", truth.beta0, g.beta0, g.se_beta0),
            ("beta1", truth.beta1, g.beta1, g.se_beta1),
        ] {
            let z = se.filter(|s| *s > 0.0).map(|s| (f - a) / s);
            let _ = writeln!(s, "{name}\t{}\t{}\t{}\t{}", num(a), num(f), opt(se), opt(z));
        }
        let _ = writeln!(s, "# best model {}", fit.averaged.best().model);
        out.geometry = Some(s);
    }
    if cfg.trials > 0 {
        let mu = cfg
            .mu
            .as_ref()
            .ok_or_else(|| Error::Config("type-I experiment needs 'mu' on the region boundary".into()))?;
        check_on_boundary(&region, mu)?;
        let outcomes = run_trials(&region, mu, cfg.trials, &pipeline)?;
        let mut s = String::from("mode\ttrials\trejections\trate\tbinomial_se\ttarget_alpha\tfailed_fits\n");
        for (name, mode) in [("au", ExperimentMode::AuUnconditional), ("si", ExperimentMode::SiConditional)] {
            match summarize(&outcomes, mode, cfg.alpha) {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{name}\t{}\t{}\t{}\t{}\t{}\t{}",
                        r.trials,
                        r.rejections,
                        num(r.rate),
                        num(r.binomial_se),
                        num(r.target_alpha),
                        r.failed_fits
                    );
                }
                Err(Error::InsufficientData(_)) => {
                    let _ = writeln!(s, "{name}\t0\t0\tNA\tNA\t{}\t0", num(cfg.alpha));
                }
                Err(e) => return Err(e),
            }
        }
        out.report = Some(s);
        out.trials = Some(trial_table(&region, &outcomes));
        out.outcomes = outcomes;
    }
    Ok(out)
}

pub fn run(config: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).map_err(|e| io_context(e, config))?;
    let cfg = SimulationConfig::parse(&text)?;
    let out = simulate(&cfg)?;
    let mut staged = Staged::default();
    if let Some(r) = &out.report {
        print!("{r}");
        staged.add("report.tsv", r.clone());
    }
    if let Some(t) = out.trials {
        staged.add("trials.tsv", t);
    }
    if let Some(g) = &out.geometry {
        print!("{g}");
        staged.add("geometry.tsv", g.clone());
    }
    staged.commit(out_dir)?;
    Ok(())
}
