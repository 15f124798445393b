//! Resampling of estimated log-likelihoods (RELL).
//!
//! Bootstrap replicates reweight the rows of a fixed site-wise
//! log-likelihood matrix instead of refitting every tree, so a multiscale
//! bootstrap of `K` trees costs `O(n' K)` per replicate.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::scaling_fit::MultiscaleCounts;
use crate::{rng, Error, Result};

/// `n x K` matrix of per-site, per-tree log-likelihoods, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SitewiseLogLik {
    n: usize,
    k: usize,
    values: Vec<f64>,
    pub tree_labels: Vec<String>,
}

impl SitewiseLogLik {
    /// Builds the matrix from row-major values. Labels default to `T1..TK`.
    pub fn new(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::Precondition("empty log-likelihood matrix".into()));
        }
        if values.len() != n * k {
            return Err(Error::Precondition(format!(
                "{} values for a {n} x {k} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "non-finite log-likelihood at site {}, tree {}",
                pos / k + 1,
                pos % k + 1
            )));
        }
        Ok(SitewiseLogLik {
            n,
            k,
            values,
            tree_labels: (1..=k).map(|i| format!("T{i}")).collect(),
        })
    }

    /// Builds the matrix from per-tree columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Precondition("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(n * k);
        for t in 0..n {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(n, k, values)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.k {
            return Err(Error::Precondition(format!(
                "{} labels for {} trees",
                labels.len(),
                self.k
            )));
        }
        self.tree_labels = labels;
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn n_trees(&self) -> usize {
        self.k
    }

    pub fn get(&self, site: usize, tree: usize) -> f64 {
        self.values[site * self.k + tree]
    }

    pub fn row(&self, site: usize) -> &[f64] {
        &self.values[site * self.k..(site + 1) * self.k]
    }

    pub fn column(&self, tree: usize) -> Vec<f64> {
        (0..self.n).map(|t| self.get(t, tree)).collect()
    }

    /// Full-data log-likelihood of every tree (column sums).
    pub fn total_loglik(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for t in 0..self.n {
            for (o, v) in out.iter_mut().zip(self.row(t)) {
                *o += v;
            }
        }
        out
    }

    fn check_tree(&self, i: usize) -> Result<()> {
        if i >= self.k {
            return Err(Error::Precondition(format!(
                "tree index {i} out of range for {} trees",
                self.k
            )));
        }
        Ok(())
    }
}

/// Input layout of a log-likelihood matrix.
///
/// * `Plain`: header `n K`, then `n` rows of `K` whitespace-separated values.
/// * `ConselMt`: header `K n`, then `K` blocks of `n` values (one block per
///   tree, transposed relative to `Plain`). Values may wrap across lines.
///
/// In both formats blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Plain,
    ConselMt,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(MatrixFormat::Plain),
            "consel_mt" | "mt" => Ok(MatrixFormat::ConselMt),
            other => Err(Error::Config(format!(
                "unknown matrix format '{other}' (expected plain or consel_mt)"
            ))),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixFormat::Plain => "plain",
            MatrixFormat::ConselMt => "consel_mt",
        })
    }
}

struct Token {
    text: String,
    line: usize,
    column: usize,
}

fn content_lines<R: BufRead>(source: R) -> Result<Vec<(usize, Vec<Token>)>> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    tokens.push(Token {
                        text: line[s..pos].to_string(),
                        line: idx + 1,
                        column: s + 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        out.push((idx + 1, tokens));
    }
    Ok(out)
}

fn parse_number<T: FromStr>(tok: &Token, what: &str) -> Result<T> {
    tok.text.parse().map_err(|_| {
        Error::parse(tok.line, tok.column, format!("expected {what}, found '{}'", tok.text))
    })
}

fn parse_value(tok: &Token) -> Result<f64> {
    let v: f64 = parse_number(tok, "a number")?;
    if !v.is_finite() {
        return Err(Error::parse(tok.line, tok.column, "non-finite log-likelihood"));
    }
    Ok(v)
}

fn header(lines: &[(usize, Vec<Token>)]) -> Result<(usize, usize)> {
    let Some((line, tokens)) = lines.first() else {
        return Err(Error::parse(1, 1, "empty matrix file"));
    };
    if tokens.len() != 2 {
        return Err(Error::parse(*line, 1, "header must hold exactly two integers"));
    }
    let a: usize = parse_number(&tokens[0], "a dimension")?;
    let b: usize = parse_number(&tokens[1], "a dimension")?;
    if a == 0 || b == 0 {
        return Err(Error::parse(*line, 1, "empty matrix"));
    }
    Ok((a, b))
}

/// Reads a site-wise log-likelihood matrix.
pub fn load_matrix<R: BufRead>(source: R, format: MatrixFormat) -> Result<SitewiseLogLik> {
    let lines = content_lines(source)?;
    let (first, second) = header(&lines)?;
    let body = &lines[1..];
    match format {
        MatrixFormat::Plain => {
            let (n, k) = (first, second);
            if body.len() != n {
                let line = body.last().map_or(lines[0].0, |l| l.0);
                return Err(Error::parse(
                    line,
                    1,
                    format!("expected {n} rows, found {}", body.len()),
                ));
            }
            let mut values = Vec::with_capacity(n * k);
            for (line, tokens) in body {
                if tokens.len() != k {
                    let col = tokens.get(k).map_or_else(
                        || tokens.last().map_or(1, |t| t.column + t.text.len()),
                        |t| t.column,
                    );
                    return Err(Error::parse(
                        *line,
                        col,
                        format!("expected {k} values, found {}", tokens.len()),
                    ));
                }
                for tok in tokens {
                    values.push(parse_value(tok)?);
                }
            }
            SitewiseLogLik::new(n, k, values)
        }
        MatrixFormat::ConselMt => {
            let (k, n) = (first, second);
            let tokens: Vec<&Token> = body.iter().flat_map(|(_, t)| t.iter()).collect();
            if tokens.len() != n * k {
                let (line, col) = match tokens.get(n * k) {
                    Some(t) => (t.line, t.column),
                    None => (body.last().map_or(lines[0].0, |l| l.0), 1),
                };
                return Err(Error::parse(
                    line,
                    col,
                    format!("expected {} values ({k} trees x {n} sites), found {}", n * k, tokens.len()),
                ));
            }
            let mut values = vec![0.0; n * k];
            for (idx, tok) in tokens.iter().enumerate() {
                let (tree, site) = (idx / n, idx % n);
                values[site * k + tree] = parse_value(tok)?;
            }
            SitewiseLogLik::new(n, k, values)
        }
    }
}

/// Multinomial site counts of one bootstrap replicate of size `n_prime`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicateWeights {
    pub w: Vec<u32>,
    pub n_prime: usize,
}

impl ReplicateWeights {
    pub fn from_counts(w: Vec<u32>) -> Self {
        let n_prime = w.iter().map(|&x| x as usize).sum();
        ReplicateWeights { w, n_prime }
    }

    /// `n_prime` sites drawn uniformly with replacement from `n`.
    pub fn draw<R: Rng + ?Sized>(n: usize, n_prime: usize, rng: &mut R) -> Self {
        let mut w = vec![0u32; n];
        for _ in 0..n_prime {
            w[rng.random_range(0..n)] += 1;
        }
        ReplicateWeights { w, n_prime }
    }
}

/// Replicate log-likelihoods `l*_i = sum_t w_t xi_ti`, accumulated in site order.
pub fn resample_loglik(xi: &SitewiseLogLik, weights: &ReplicateWeights) -> Result<Vec<f64>> {
    if weights.w.len() != xi.n {
        return Err(Error::Precondition(format!(
            "{} weights for {} sites",
            weights.w.len(),
            xi.n
        )));
    }
    let mut out = vec![0.0; xi.k];
    accumulate(xi, &weights.w, &mut out);
    Ok(out)
}

fn accumulate(xi: &SitewiseLogLik, w: &[u32], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (t, &wt) in w.iter().enumerate() {
        if wt == 0 {
            continue;
        }
        let wt = wt as f64;
        for (o, v) in out.iter_mut().zip(xi.row(t)) {
            *o += wt * v;
        }
    }
}

/// Maximum-likelihood item of a replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlChoice {
    pub index: usize,
    /// Another item attained the same maximum; the lowest index won.
    pub tied: bool,
}

pub fn ml_item(loglik: &[f64]) -> Option<MlChoice> {
    let mut best: Option<MlChoice> = None;
    let mut best_value = f64::NEG_INFINITY;
    for (i, &v) in loglik.iter().enumerate() {
        match best {
            None => {
                best = Some(MlChoice { index: i, tied: false });
                best_value = v;
            }
            Some(ref mut b) => {
                if v > best_value {
                    *b = MlChoice { index: i, tied: false };
                    best_value = v;
                } else if v == best_value {
                    b.tied = true;
                }
            }
        }
    }
    best
}

/// `||xi_i - xi_j||^2`, the variance estimate of the log-likelihood
/// difference between trees `i` and `j`.
pub fn loglik_diff_variance(xi: &SitewiseLogLik, i: usize, j: usize) -> Result<f64> {
    xi.check_tree(i)?;
    xi.check_tree(j)?;
    let mut acc = 0.0;
    for t in 0..xi.n {
        let row = xi.row(t);
        let d = row[i] - row[j];
        acc += d * d;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    /// Requested `sigma^2 = n / n'`, strictly increasing.
    pub scales: Vec<f64>,
    /// Replicates per scale.
    pub replicates: u64,
    pub seed: u64,
}

/// A union of trees whose counts are summed, e.g. all trees containing an edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemGroup {
    pub id: String,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Realised `sigma^2 = n / n'` per scale.
    pub scales: Vec<f64>,
    pub n_prime: Vec<usize>,
    pub trees: Vec<MultiscaleCounts>,
    pub groups: Vec<MultiscaleCounts>,
    /// Replicates per scale whose maximum was shared by several trees.
    pub ties: Vec<u64>,
}

/// Realised scales and replicate sizes for `n` sites.
pub fn realize_scales(n: usize, scales: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    if scales.is_empty() {
        return Err(Error::Scale("no scales given".into()));
    }
    let mut realized = Vec::with_capacity(scales.len());
    let mut sizes = Vec::with_capacity(scales.len());
    for &s in scales {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Scale(format!("sigma^2 = {s} is not positive")));
        }
        let n_prime = (n as f64 / s).round();
        if n_prime < 1.0 {
            return Err(Error::Scale(format!(
                "sigma^2 = {s} gives replicate size n' < 1 for n = {n}"
            )));
        }
        let n_prime = n_prime as usize;
        let r = n as f64 / n_prime as f64;
        if realized.last().is_some_and(|&prev| r <= prev) {
            return Err(Error::Scale(format!(
                "sigma^2 = {s} does not realise a scale above the previous one for n = {n}"
            )));
        }
        realized.push(r);
        sizes.push(n_prime);
    }
    Ok((realized, sizes))
}

/// Multiscale RELL bootstrap: per scale, `B` replicates of `n'` sites; a
/// tree scores a hit when it has the largest replicate log-likelihood.
/// Group counts are summed from their members' counts.
pub fn multiscale_bootstrap(
    xi: &SitewiseLogLik,
    config: &BootstrapConfig,
    groups: &[ItemGroup],
) -> Result<BootstrapResult> {
    if config.replicates == 0 {
        return Err(Error::Config("at least one replicate per scale is required".into()));
    }
    for g in groups {
        if let Some(&bad) = g.members.iter().find(|&&m| m >= xi.k) {
            return Err(Error::Precondition(format!(
                "group {} refers to tree index {bad} of {}",
                g.id, xi.k
            )));
        }
    }
    let (scales, n_prime) = realize_scales(xi.n, &config.scales)?;
    let k = xi.k;
    let mut tree_hits = vec![vec![0u64; scales.len()]; k];
    let mut ties = vec![0u64; scales.len()];
    for (si, &np) in n_prime.iter().enumerate() {
        let winners: Vec<MlChoice> = (0..config.replicates)
            .into_par_iter()
            .map_init(
                || (vec![0u32; xi.n], vec![0.0; k]),
                |(w, ll), b| {
                    let mut rng = rng::stream(config.seed, si, b);
                    w.iter_mut().for_each(|x| *x = 0);
                    for _ in 0..np {
                        w[rng.random_range(0..xi.n)] += 1;
                    }
                    accumulate(xi, w, ll);
                    ml_item(ll).expect("at least one tree")
                },
            )
            .collect();
        for c in winners {
            tree_hits[c.index][si] += 1;
            ties[si] += c.tied as u64;
        }
    }
    let reps = vec![config.replicates; scales.len()];
    let trees = tree_hits
        .iter()
        .zip(&xi.tree_labels)
        .map(|(h, label)| MultiscaleCounts::new(label.clone(), scales.clone(), reps.clone(), h.clone()))
        .collect::<Result<Vec<_>>>()?;
    let groups = groups
        .iter()
        .map(|g| {
            let mut members = g.members.clone();
            members.sort_unstable();
            members.dedup();
            let hits = (0..scales.len())
                .map(|s| members.iter().map(|&m| tree_hits[m][s]).sum())
                .collect();
            MultiscaleCounts::new(g.id.clone(), scales.clone(), reps.clone(), hits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapResult {
        scales,
        n_prime,
        trees,
        groups,
        ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, k: usize, seed: u64) -> SitewiseLogLik {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * k).map(|_| -rng.random::<f64>() * 5.0).collect();
        SitewiseLogLik::new(n, k, values).unwrap()
    }

    #[test]
    fn plain_format() {
        let xi = load_matrix("2 3\n-1.0 -1.1 -1.2\n-2.0 -2.1 -2.2".as_bytes(), MatrixFormat::Plain).unwrap();
        assert_eq!((xi.n_sites(), xi.n_trees()), (2, 3));
        assert_eq!(xi.get(1, 2), -2.2);
        assert_eq!(xi.tree_labels, vec!["T1", "T2", "T3"]);
    }

    #[test]
    fn consel_format_is_transposed() {
        let text = "# two trees\n2 3\n-1.0 -2.0\n-3.0\n\n-4.0 -5.0 -6.0\n";
        let xi = load_matrix(text.as_bytes(), MatrixFormat::ConselMt).unwrap();
        assert_eq!((xi.n_sites(), xi.n_trees()), (3, 2));
        assert_eq!(xi.column(0), vec![-1.0, -2.0, -3.0]);
        assert_eq!(xi.row(2), &[-3.0, -6.0]);
    }

    #[test]
    fn malformed_inputs_report_positions() {
        let short = load_matrix("2 3\n-1 -1 -1\n-2 -2\n".as_bytes(), MatrixFormat::Plain);
        assert!(matches!(short, Err(Error::Parse { line: 3, .. })), "{short:?}");
        let bad = load_matrix("1 2\n-1 abc\n".as_bytes(), MatrixFormat::Plain);
        assert!(matches!(bad, Err(Error::Parse { line: 2, column: 4, .. })), "{bad:?}");
        let rows = load_matrix("3 1\n-1\n-2\n".as_bytes(), MatrixFormat::Plain);
        assert!(matches!(rows, Err(Error::Parse { .. })));
        assert!(matches!(load_matrix("".as_bytes(), MatrixFormat::Plain), Err(Error::Parse { .. })));
        assert!(matches!(load_matrix("0 3\n".as_bytes(), MatrixFormat::Plain), Err(Error::Parse { .. })));
        let mt = load_matrix("2 2\n-1 -2 -3\n".as_bytes(), MatrixFormat::ConselMt);
        assert!(matches!(mt, Err(Error::Parse { .. })));
        assert!(matches!(
            load_matrix("1 1\nnan\n".as_bytes(), MatrixFormat::Plain),
            Err(Error::Parse { line: 2, column: 1, .. })
        ));
    }

    #[test]
    fn resampling_identities() {
        let xi = random_matrix(7, 3, 1);
        let ones = ReplicateWeights::from_counts(vec![1; 7]);
        let full = resample_loglik(&xi, &ones).unwrap();
        for (a, b) in full.iter().zip(xi.total_loglik()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut w = vec![0; 7];
        w[0] = 7;
        let first = resample_loglik(&xi, &ReplicateWeights::from_counts(w)).unwrap();
        for i in 0..3 {
            assert!((first[i] - 7.0 * xi.get(0, i)).abs() < 1e-12);
        }
        assert!(resample_loglik(&xi, &ReplicateWeights::from_counts(vec![1; 6])).is_err());
    }

    #[test]
    fn resampling_matches_per_draw_accumulation() {
        let xi = random_matrix(11, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let draws: Vec<usize> = (0..9).map(|_| rng.random_range(0..11)).collect();
            let mut w = vec![0; 11];
            draws.iter().for_each(|&d| w[d] += 1);
            let got = resample_loglik(&xi, &ReplicateWeights::from_counts(w)).unwrap();
            for i in 0..4 {
                let direct: f64 = draws.iter().map(|&d| xi.get(d, i)).sum();
                assert!((got[i] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ml_item_ties() {
        assert_eq!(ml_item(&[-1.0, -2.0, -3.0]), Some(MlChoice { index: 0, tied: false }));
        assert_eq!(ml_item(&[-1.0, -1.0, -3.0]), Some(MlChoice { index: 0, tied: true }));
        assert_eq!(ml_item(&[-3.0, -2.0, -1.0]), Some(MlChoice { index: 2, tied: false }));
        assert_eq!(ml_item(&[-2.0, -1.0, -1.0, -0.5]), Some(MlChoice { index: 3, tied: false }));
        assert_eq!(ml_item(&[]), None);
    }

    #[test]
    fn diff_variance() {
        let xi = SitewiseLogLik::from_columns(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 3.0]]).unwrap();
        assert_eq!(loglik_diff_variance(&xi, 0, 1).unwrap(), 0.0);
        assert_eq!(loglik_diff_variance(&xi, 0, 2).unwrap(), 1.0);
        let xi = random_matrix(13, 3, 4);
        let direct: f64 = (0..13).map(|t| (xi.get(t, 0) - xi.get(t, 2)).powi(2)).sum();
        assert!((loglik_diff_variance(&xi, 0, 2).unwrap() - direct).abs() < 1e-12);
        assert!(loglik_diff_variance(&xi, 0, 3).is_err());
    }

    #[test]
    fn scale_realisation() {
        let (s, np) = realize_scales(100, &[0.5, 1.0, 3.0]).unwrap();
        assert_eq!(np, vec![200, 100, 33]);
        assert!((s[2] - 100.0 / 33.0).abs() < 1e-15);
        assert!(matches!(realize_scales(3, &[10.0]), Err(Error::Scale(_))));
        assert!(matches!(realize_scales(3, &[1.0, 1.1]), Err(Error::Scale(_))));
    }

    #[test]
    fn dominant_tree_wins_everywhere() {
        let xi = SitewiseLogLik::from_columns(&[vec![-1.0; 50], vec![-2.0; 50]]).unwrap();
        let cfg = BootstrapConfig { scales: vec![0.5, 1.0, 2.0], replicates: 200, seed: 1 };
        let r = multiscale_bootstrap(&xi, &cfg, &[]).unwrap();
        assert_eq!(r.trees[0].hits, vec![200; 3]);
        assert_eq!(r.trees[1].hits, vec![0; 3]);
    }

    #[test]
    fn partition_and_groups() {
        let xi = random_matrix(40, 5, 9);
        let groups = vec![
            ItemGroup { id: "a".into(), members: vec![0, 2] },
            ItemGroup { id: "b".into(), members: vec![1, 3, 4] },
        ];
        let cfg = BootstrapConfig { scales: vec![0.5, 1.0, 2.0], replicates: 500, seed: 5 };
        let r = multiscale_bootstrap(&xi, &cfg, &groups).unwrap();
        for s in 0..3 {
            let total: u64 = r.trees.iter().map(|c| c.hits[s]).sum();
            assert_eq!(total, 500);
            assert_eq!(r.groups[0].hits[s], r.trees[0].hits[s] + r.trees[2].hits[s]);
            assert_eq!(r.groups[0].hits[s] + r.groups[1].hits[s], 500);
        }
        let bad = [ItemGroup { id: "x".into(), members: vec![5] }];
        assert!(multiscale_bootstrap(&xi, &cfg, &bad).is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let xi = random_matrix(60, 6, 21);
        let cfg = BootstrapConfig { scales: vec![0.5, 1.0, 1.5], replicates: 300, seed: 77 };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| multiscale_bootstrap(&xi, &cfg, &[]).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(2));
        assert_eq!(one, run(8));
        let other = multiscale_bootstrap(&xi, &BootstrapConfig { seed: 78, ..cfg.clone() }, &[]).unwrap();
        assert_ne!(one, other);
    }

    // Sites carry independent unit-variance noise and tree means chosen so the
    // normal-model bootstrap probabilities are (0.5, 0.3, 0.2). The oracle
    // samples the normal approximation N(L, n S) of the replicate
    // log-likelihoods directly, using the fixture's own mean and covariance.
    #[test]
    fn matches_normal_model_probabilities() {
        let n = 2000;
        let c = [0.0, -0.418_855_46, -0.718_487_68];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        for (col, ci) in cols.iter_mut().zip(c) {
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter_mut().for_each(|v| *v += ci / (n as f64).sqrt() - mean);
        }
        let xi = SitewiseLogLik::from_columns(&cols).unwrap();

        let total = xi.total_loglik();
        let mut cov = nalgebra::Matrix3::<f64>::zeros();
        for t in 0..n {
            let r = xi.row(t);
            for a in 0..3 {
                for b in 0..3 {
                    cov[(a, b)] += (r[a] - total[a] / n as f64) * (r[b] - total[b] / n as f64);
                }
            }
        }
        let chol = cov.cholesky().unwrap().l();
        let draws = 1_000_000;
        let mut oracle = [0u64; 3];
        for _ in 0..draws {
            let z = nalgebra::Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let y = chol * z;
            let ll: Vec<f64> = (0..3).map(|i| total[i] + y[i]).collect();
            oracle[ml_item(&ll).unwrap().index] += 1;
        }

        let b = 20_000;
        let cfg = BootstrapConfig { scales: vec![1.0, 2.0], replicates: b, seed: 3 };
        let r = multiscale_bootstrap(&xi, &cfg, &[]).unwrap();
        for i in 0..3 {
            let p = oracle[i] as f64 / draws as f64;
            let got = r.trees[i].hits[0] as f64 / b as f64;
            let tol = 4.0 * (p * (1.0 - p) / b as f64).sqrt() + 4.0 * (p * (1.0 - p) / draws as f64).sqrt();
            assert!((got - p).abs() < tol, "tree {i}: {got} vs oracle {p}");
            assert!((p - [0.5, 0.3, 0.2][i]).abs() < 0.03, "fixture drifted: {p}");
        }
    }
}
