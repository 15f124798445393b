use std::path::PathBuf;

use scalesi_core::rell::MatrixFormat;
use scalesi_core::{Error, ModelKind, Result, ScaleGrid};

use crate::PipelineArgs;

pub const MIN_REPLICATES: u64 = 100;

/// Which items of a phylogenetic run are fitted and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemSelection {
    pub trees: bool,
    pub edges: bool,
}

impl std::str::FromStr for ItemSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ItemSelection { trees: true, edges: true }),
            "trees" | "tree" => Ok(ItemSelection { trees: true, edges: false }),
            "edges" | "edge" => Ok(ItemSelection { trees: false, edges: true }),
            other => Err(Error::Config(format!("unknown item selection '{other}' (all, trees, edges)"))),
        }
    }
}

/// Validated settings of a `pvalues` or `bootstrap` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub format: MatrixFormat,
    pub topologies: Option<PathBuf>,
    pub outgroup: Option<usize>,
    pub scales: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub alpha: f64,
    pub items: ItemSelection,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_pipeline(a: &PipelineArgs) -> Result<Self> {
        let cfg = RunConfig {
            input: a.input.input.clone(),
            format: a.input.format.parse()?,
            topologies: a.topologies.clone(),
            outgroup: a.outgroup,
            scales: a.scales.parse::<ScaleGrid>()?.sigma_squared(),
            replicates: a.nb,
            seed: a.seed,
            models: parse_models(&a.fit.models)?,
            alpha: a.fit.alpha,
            items: a.items.parse()?,
            out: a.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "--nb {} is below the minimum of {MIN_REPLICATES} replicates per scale",
                self.replicates
            )));
        }
        if self.scales.is_empty() {
            return Err(Error::Config("no bootstrap scales".into()));
        }
        if self.scales.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("bootstrap scales must be distinct".into()));
        }
        check_alpha(self.alpha)?;
        if self.models.is_empty() {
            return Err(Error::Config("no scaling models".into()));
        }
        Ok(())
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Config(format!("alpha = {alpha} is outside (0, 0.5]")));
    }
    Ok(())
}

/// Comma-separated model names, duplicates removed, order kept.
pub fn parse_models(text: &str) -> Result<Vec<ModelKind>> {
    let mut out = Vec::new();
    for name in text.split(',').filter(|s| !s.trim().is_empty()) {
        let m: ModelKind = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("no scaling models in '{text}'")));
    }
    Ok(out)
}
