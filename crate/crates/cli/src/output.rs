//! Report tables and all-or-nothing file output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use scalesi_core::scaling_fit::{psi_display, ItemFit};
use scalesi_core::{Error, ModelKind, MultiscaleCounts, Result, TestMode};

/// Output files held in memory until the whole computation has succeeded.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every file into `dir`, each through a temporary file and a rename.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| io_context(e, dir))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, contents).map_err(|e| io_context(e, &tmp))?;
            fs::rename(&tmp, &path).map_err(|e| io_context(e, &path))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), num)
}

/// Counts and fit of one reported item. `fit` is `None` when no model could
/// be fitted.
#[derive(Debug)]
pub struct ItemResult {
    pub counts: MultiscaleCounts,
    pub fit: Option<ItemFit>,
    /// Extra trailing columns, e.g. a topology or edge mask.
    pub extra: Vec<String>,
}

/// Names of p-values at or beyond the significance level: `p < alpha` when
/// the observation is outside the region, `p > 1 - alpha` when inside.
pub fn significance(mode: TestMode, alpha: f64, named: &[(&str, f64)]) -> String {
    let flagged: Vec<&str> = named
        .iter()
        .filter(|(_, p)| match mode {
            TestMode::Outside => *p < alpha,
            TestMode::Inside => *p > 1.0 - alpha,
        })
        .map(|(n, _)| *n)
        .collect();
    if flagged.is_empty() {
        "-".into()
    } else {
        flagged.join(",")
    }
}

pub fn pvalue_table(items: &[ItemResult], alpha: f64, extra_headers: &[&str]) -> String {
    let mut s = String::from(
        "item\tbp\tse_bp\tau\tse_au\tsi\tse_si\tbeta0\tse_beta0\tbeta1\tse_beta1\tmode\tsignificant\tbest_model",
    );
    for h in extra_headers {
        s.push('\t');
        s.push_str(h);
    }
    s.push('\n');
    for item in items {
        s.push_str(&item.counts.item_id);
        match &item.fit {
            Some(fit) => {
                let g = fit.geometry();
                let p = fit.pvalues();
                let sig = significance(p.mode, alpha, &[("bp", p.bp), ("au", p.au), ("si", p.si_prime)]);
                let _ = write!(
                    s,
                    "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    num(p.bp),
                    opt(p.se_bp),
                    num(p.au),
                    opt(p.se_au),
                    num(p.si_prime),
                    opt(p.se_si),
                    num(g.beta0),
                    opt(g.se_beta0),
                    num(g.beta1),
                    opt(g.se_beta1),
                    p.mode,
                    sig,
                    fit.averaged.best().model,
                );
            }
            None => s.push_str(&"\tNA".repeat(13)),
        }
        for e in &item.extra {
            s.push('\t');
            s.push_str(e);
        }
        s.push('\n');
    }
    s
}

/// Observed and fitted `psi` against `sigma^2` for every item.
pub fn psi_table(items: &[ItemResult], models: &[ModelKind]) -> Result<String> {
    let mut s = String::from("item\tsigma_sq\tB\thits\tpsi\tse\tclamped\tpsi_avg");
    for m in models {
        let _ = write!(s, "\tpsi_{m}");
    }
    s.push('\n');
    for item in items {
        let c = &item.counts;
        for (i, pt) in psi_display(c)?.iter().enumerate() {
            let _ = write!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.item_id,
                num(pt.sigma_sq),
                c.replicates[i],
                c.hits[i],
                num(pt.psi),
                num(pt.se),
                pt.clamped as u8
            );
            let avg = item.fit.as_ref().and_then(|f| f.averaged.psi(pt.sigma_sq).ok());
            let _ = write!(s, "\t{}", opt(avg));
            for m in models {
                let v = item
                    .fit
                    .as_ref()
                    .and_then(|f| f.averaged.fits.iter().find(|x| x.model == *m))
                    .and_then(|x| x.psi(pt.sigma_sq).ok());
                let _ = write!(s, "\t{}", opt(v));
            }
            s.push('\n');
        }
    }
    Ok(s)
}

/// Per-item model coefficients, AIC and Akaike weight.
pub fn model_table(items: &[ItemResult]) -> String {
    let mut s = String::from("item\tmodel\taic\tweight\tcoefficients\n");
    for item in items {
        let Some(fit) = &item.fit else { continue };
        for (f, w) in fit.averaged.fits.iter().zip(&fit.averaged.weights) {
            let coef: Vec<String> = f.coefficients.iter().map(|c| num(*c)).collect();
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                item.counts.item_id,
                f.model,
                num(f.aic),
                num(*w),
                coef.join(",")
            );
        }
    }
    s
}

/// Human-readable summary in the layout of a p-value table.
pub fn summary(items: &[ItemResult]) -> String {
    let mut s = format!(
        "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "item", "BP", "AU", "SI", "beta0", "beta1"
    );
    for item in items {
        match &item.fit {
            Some(fit) => {
                let g = fit.geometry();
                let p = fit.pvalues();
                let _ = writeln!(
                    s,
                    "{:<8} {:>7.3} {:>7.3} {:>7.3} {:>7.2} {:>7.2}",
                    item.counts.item_id, p.bp, p.au, p.si_prime, g.beta0, g.beta1
                );
            }
            None => {
                let _ = writeln!(s, "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7}", item.counts.item_id, "NA", "NA", "NA", "NA", "NA");
            }
        }
    }
    s
}
