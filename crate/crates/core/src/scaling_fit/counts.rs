use std::io::{BufRead, Write};

use crate::normal_theory::{density, upper_tail_inverse};
use crate::{Error, Result};

/// Named bootstrap scale grids.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleGrid {
    /// Thirteen `sigma^2` values log-spaced from 1/9 to 9.
    Wide13,
    /// `sigma^-2` in {0.5, 0.6, ..., 1.4}.
    Narrow10,
    Custom(Vec<f64>),
}

impl ScaleGrid {
    /// `sigma^2` values in increasing order.
    pub fn sigma_squared(&self) -> Vec<f64> {
        match self {
            ScaleGrid::Wide13 => (0..13)
                .map(|i| 9f64.powf(-1.0 + i as f64 / 6.0))
                .collect(),
            ScaleGrid::Narrow10 => (0..10).rev().map(|i| 1.0 / (0.5 + 0.1 * i as f64)).collect(),
            ScaleGrid::Custom(v) => {
                let mut v = v.clone();
                v.sort_by(f64::total_cmp);
                v
            }
        }
    }
}

impl std::str::FromStr for ScaleGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide13" => Ok(ScaleGrid::Wide13),
            "narrow10" => Ok(ScaleGrid::Narrow10),
            list => {
                let values = list
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite() && *v > 0.0)
                            .ok_or_else(|| Error::Config(format!("bad scale {t:?} in {list:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if values.is_empty() {
                    return Err(Error::Config("empty scale list".into()));
                }
                Ok(ScaleGrid::Custom(values))
            }
        }
    }
}

/// Per-scale bootstrap hit counts for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleCounts {
    pub item_id: String,
    /// `sigma^2` per scale, strictly increasing.
    pub scales: Vec<f64>,
    pub replicates: Vec<u64>,
    pub hits: Vec<u64>,
}

impl MultiscaleCounts {
    pub fn new(
        item_id: impl Into<String>,
        scales: Vec<f64>,
        replicates: Vec<u64>,
        hits: Vec<u64>,
    ) -> Result<Self> {
        let c = MultiscaleCounts {
            item_id: item_id.into(),
            scales,
            replicates,
            hits,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.scales.len();
        if self.replicates.len() != n || self.hits.len() != n {
            return Err(Error::Precondition(format!(
                "{}: scales, replicates and hits differ in length",
                self.item_id
            )));
        }
        if n < 2 {
            return Err(Error::Precondition(format!(
                "{}: at least two scales are required",
                self.item_id
            )));
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || self.scales.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Precondition(format!(
                "{}: scales must be positive and strictly increasing",
                self.item_id
            )));
        }
        for (&b, &h) in self.replicates.iter().zip(&self.hits) {
            if b == 0 || h > b {
                return Err(Error::Precondition(format!(
                    "{}: need 0 <= hits <= replicates and replicates > 0 (hits {h}, replicates {b})",
                    self.item_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Number of scales with `0 < hits < replicates`.
    pub fn informative_scales(&self) -> usize {
        self.hits
            .iter()
            .zip(&self.replicates)
            .filter(|(&h, &b)| h > 0 && h < b)
            .count()
    }
}

/// One point of the observed `psi` profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiPoint {
    pub sigma_sq: f64,
    pub psi: f64,
    pub se: f64,
    /// The raw frequency was 0 or 1 and was clamped to `[0.5, B - 0.5] / B`.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiProfile {
    pub points: Vec<PsiPoint>,
    /// `sigma^2` of scales dropped because hits were 0 or B.
    pub excluded: Vec<f64>,
}

fn psi_point(sigma_sq: f64, p: f64, b: u64, clamped: bool) -> Result<PsiPoint> {
    let sigma = sigma_sq.sqrt();
    let z = upper_tail_inverse(p)?;
    let se = sigma * (p * (1.0 - p) / b as f64).sqrt() / density(z);
    Ok(PsiPoint {
        sigma_sq,
        psi: sigma * z,
        se,
        clamped,
    })
}

/// `psi = sigma * Q^-1(hits / B)` with delta-method standard errors at every
/// informative scale.
pub fn psi_observed(counts: &MultiscaleCounts) -> Result<PsiProfile> {
    counts.validate()?;
    let mut points = Vec::with_capacity(counts.len());
    let mut excluded = Vec::new();
    for ((&s, &b), &h) in counts.scales.iter().zip(&counts.replicates).zip(&counts.hits) {
        if h == 0 || h == b {
            excluded.push(s);
            continue;
        }
        points.push(psi_point(s, h as f64 / b as f64, b, false)?);
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: only {} scale(s) with 0 < hits < B",
            counts.item_id,
            points.len()
        )));
    }
    Ok(PsiProfile { points, excluded })
}

/// Like [`psi_observed`] but keeps every scale for display, clamping hits to
/// `[0.5, B - 0.5]`. Never feed these values into a fit.
pub fn psi_display(counts: &MultiscaleCounts) -> Result<Vec<PsiPoint>> {
    counts.validate()?;
    counts
        .scales
        .iter()
        .zip(&counts.replicates)
        .zip(&counts.hits)
        .map(|((&s, &b), &h)| {
            let bf = b as f64;
            let hf = (h as f64).clamp(0.5, bf - 0.5);
            psi_point(s, hf / bf, b, h == 0 || h == b)
        })
        .collect()
}

/// Writes counts as TSV. Each row is the item id followed by one
/// `scale<TAB>B<TAB>hits` triplet per scale.
pub fn write_counts_tsv<W: Write>(mut out: W, items: &[MultiscaleCounts]) -> Result<()> {
    writeln!(out, "# item\tscale\tB\thits ...")?;
    for c in items {
        write!(out, "{}", c.item_id)?;
        for i in 0..c.len() {
            write!(out, "\t{}\t{}\t{}", c.scales[i], c.replicates[i], c.hits[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads the format produced by [`write_counts_tsv`]. Lines starting with `#`
/// and blank lines are ignored.
pub fn read_counts_tsv<R: BufRead>(input: R) -> Result<Vec<MultiscaleCounts>> {
    let mut items = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 || (fields.len() - 1) % 3 != 0 {
            return Err(Error::parse(
                lineno,
                1,
                format!(
                    "expected item id followed by scale/B/hits triplets, got {} fields",
                    fields.len()
                ),
            ));
        }
        let mut scales = Vec::new();
        let mut replicates = Vec::new();
        let mut hits = Vec::new();
        for (j, chunk) in fields[1..].chunks(3).enumerate() {
            let col = 2 + 3 * j;
            scales.push(
                chunk[0]
                    .parse::<f64>()
                    .map_err(|e| Error::parse(lineno, col, format!("scale {:?}: {e}", chunk[0])))?,
            );
            replicates.push(
                chunk[1]
                    .parse::<u64>()
                    .map_err(|e| Error::parse(lineno, col + 1, format!("B {:?}: {e}", chunk[1])))?,
            );
            hits.push(
                chunk[2]
                    .parse::<u64>()
                    .map_err(|e| Error::parse(lineno, col + 2, format!("hits {:?}: {e}", chunk[2])))?,
            );
        }
        let c = MultiscaleCounts::new(fields[0], scales, replicates, hits).map_err(|e| match e {
            Error::Precondition(m) => Error::parse(lineno, 1, m),
            other => other,
        })?;
        items.push(c);
    }
    Ok(items)
}
