use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use scalesi_core::modelmap::{self, Centering, ModelMapConfig};
use scalesi_core::normal_theory::{geometry_from_bp_au, si_prime, upper_tail_ratio};
use scalesi_core::phylo::{self, RegionTarget};
use scalesi_core::rell::{self, BootstrapResult, MatrixFormat};
use scalesi_core::scaling_fit::{fit_counts, read_counts_tsv, write_counts_tsv, ItemFit};
use scalesi_core::{
    BootstrapConfig, Error, ItemGroup, ModelKind, MultiscaleCounts, Result, SitewiseLogLik, TestMode, Topology,
};

use crate::config::{check_alpha, parse_models, RunConfig};
use crate::output::{self, io_context, ItemResult, Staged};
use crate::{CountsArgs, FitArgs, ModelmapArgs};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_context(e, path))
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<SitewiseLogLik> {
    rell::load_matrix(open(path)?, format)
}

/// Bootstrap counts for the trees and the edges of a phylogenetic run.
#[derive(Debug)]
pub struct PhyloRun {
    pub xi: SitewiseLogLik,
    pub topologies: Option<Vec<Topology>>,
    pub edges: Vec<(phylo::EdgePartition, Vec<usize>)>,
    pub boot: BootstrapResult,
}

pub fn bootstrap_run(cfg: &RunConfig) -> Result<PhyloRun> {
    let xi = load_matrix(&cfg.input, cfg.format)?;
    let topologies = match &cfg.topologies {
        Some(path) => {
            let list = phylo::read_topology_list(open(path)?, None, cfg.outgroup)?;
            if list.len() != xi.n_trees() {
                return Err(Error::Config(format!(
                    "{} lists {} topologies but the matrix has {} trees",
                    path.display(),
                    list.len(),
                    xi.n_trees()
                )));
            }
            Some(list)
        }
        None => None,
    };
    if cfg.items.edges && !cfg.items.trees && topologies.is_none() {
        return Err(Error::Config("edge p-values need --topologies".into()));
    }
    let edges = match (&topologies, cfg.items.edges) {
        (Some(t), true) => phylo::associate(t),
        _ => Vec::new(),
    };
    let groups: Vec<ItemGroup> = edges
        .iter()
        .enumerate()
        .map(|(i, (_, members))| ItemGroup {
            id: format!("E{}", i + 1),
            members: members.clone(),
        })
        .collect();
    let boot = rell::multiscale_bootstrap(
        &xi,
        &BootstrapConfig {
            scales: cfg.scales.clone(),
            replicates: cfg.replicates,
            seed: cfg.seed,
        },
        &groups,
    )?;
    for (s, t) in boot.scales.iter().zip(&boot.ties) {
        if *t > 0 {
            log::info!("{t} replicates at sigma^2 = {s:.4} had tied maxima");
        }
    }
    Ok(PhyloRun {
        xi,
        topologies,
        edges,
        boot,
    })
}

/// Fits every item; items no model can fit are kept with `fit: None`.
pub fn fit_all(counts: Vec<MultiscaleCounts>, models: &[ModelKind]) -> Result<Vec<(MultiscaleCounts, Option<ItemFit>)>> {
    let fits: Vec<Result<ItemFit>> = counts.par_iter().map(|c| fit_counts(c, models)).collect();
    counts
        .into_iter()
        .zip(fits)
        .map(|(c, f)| match f {
            Ok(f) => {
                for (m, e) in &f.failures {
                    log::info!("{}: {m} not used: {e}", c.item_id);
                }
                Ok((c, Some(f)))
            }
            Err(e @ (Error::Fit { .. } | Error::InsufficientData(_))) => {
                log::warn!("{}: no p-values ({e})", c.item_id);
                Ok((c, None))
            }
            Err(e) => Err(e),
        })
        .collect()
}

fn tree_items(run: &PhyloRun, models: &[ModelKind]) -> Result<Vec<ItemResult>> {
    let fitted = fit_all(run.boot.trees.clone(), models)?;
    Ok(fitted
        .into_iter()
        .enumerate()
        .map(|(i, (counts, fit))| ItemResult {
            counts,
            fit,
            extra: run.topologies.as_ref().map(|t| vec![t[i].text()]).unwrap_or_default(),
        })
        .collect())
}

fn member_labels(run: &PhyloRun, members: &[usize]) -> String {
    members
        .iter()
        .map(|&m| run.xi.tree_labels[m].as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn edge_items(run: &PhyloRun, models: &[ModelKind]) -> Result<Vec<ItemResult>> {
    let fitted = fit_all(run.boot.groups.clone(), models)?;
    Ok(fitted
        .into_iter()
        .zip(&run.edges)
        .map(|((counts, fit), (edge, members))| ItemResult {
            counts,
            fit,
            extra: vec![edge.display(), member_labels(run, members)],
        })
        .collect())
}

fn edge_table(run: &PhyloRun) -> String {
    let mut s = String::from("edge\tmask\ttrees\n");
    for (i, (edge, members)) in run.edges.iter().enumerate() {
        s.push_str(&format!("E{}\t{}\t{}\n", i + 1, edge.display(), member_labels(run, members)));
    }
    s
}

fn counts_file(run: &PhyloRun, cfg: &RunConfig) -> Result<String> {
    let mut items = Vec::new();
    if cfg.items.trees {
        items.extend(run.boot.trees.iter().cloned());
    }
    items.extend(run.boot.groups.iter().cloned());
    let mut buf = Vec::new();
    write_counts_tsv(&mut buf, &items)?;
    Ok(String::from_utf8(buf).expect("counts are ASCII"))
}

/// Bootstrap, fit and p-values for the trees and, with topologies, their
/// edges. Returns a printable summary.
pub fn pvalues(cfg: &RunConfig) -> Result<String> {
    let run = bootstrap_run(cfg)?;
    let mut staged = Staged::default();
    staged.add("counts.tsv", counts_file(&run, cfg)?);
    let mut reported = Vec::new();
    if cfg.items.trees {
        let trees = tree_items(&run, &cfg.models)?;
        let headers: &[&str] = if run.topologies.is_some() { &["topology"] } else { &[] };
        staged.add("trees.tsv", output::pvalue_table(&trees, cfg.alpha, headers));
        reported.extend(trees);
    }
    if !run.edges.is_empty() {
        let edges = edge_items(&run, &cfg.models)?;
        staged.add("edges.tsv", output::pvalue_table(&edges, cfg.alpha, &["mask", "trees"]));
        staged.add("edge_table.tsv", edge_table(&run));
        reported.extend(edges);
    }
    staged.add("psi.tsv", output::psi_table(&reported, &cfg.models)?);
    staged.add("models.tsv", output::model_table(&reported));
    staged.commit(&cfg.out)?;
    Ok(output::summary(&reported))
}

/// Bootstrap only; the counts can be refitted later with `fit`.
pub fn bootstrap(cfg: &RunConfig) -> Result<()> {
    let run = bootstrap_run(cfg)?;
    let mut staged = Staged::default();
    staged.add("counts.tsv", counts_file(&run, cfg)?);
    if !run.edges.is_empty() {
        staged.add("edge_table.tsv", edge_table(&run));
    }
    staged.commit(&cfg.out)?;
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<String> {
    let models = parse_models(&args.fit.models)?;
    check_alpha(args.fit.alpha)?;
    let counts = read_counts_tsv(open(&args.counts)?)?;
    if counts.is_empty() {
        return Err(Error::InsufficientData(format!("{} holds no items", args.counts.display())));
    }
    let items: Vec<ItemResult> = fit_all(counts, &models)?
        .into_iter()
        .map(|(counts, fit)| ItemResult {
            counts,
            fit,
            extra: Vec::new(),
        })
        .collect();
    let mut staged = Staged::default();
    staged.add("pvalues.tsv", output::pvalue_table(&items, args.fit.alpha, &[]));
    staged.add("psi.tsv", output::psi_table(&items, &models)?);
    staged.add("models.tsv", output::model_table(&items));
    staged.commit(&args.out)?;
    Ok(output::summary(&items))
}

/// Geometry and SI values recovered from a published (BP, AU) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shortcut {
    pub beta0: f64,
    pub beta1: f64,
    /// `Q(beta0 - beta1) / Q(-beta1)`, the outside-mode formula.
    pub si_outside: f64,
    /// `Q(-beta0 + beta1) / Q(beta1)`, the inside-mode formula for the complement.
    pub si_inside: f64,
    pub si_prime: f64,
    pub mode: TestMode,
}

pub fn shortcut_values(bp: f64, au: f64) -> Result<Shortcut> {
    let g = geometry_from_bp_au(bp, au)?;
    Ok(Shortcut {
        beta0: g.beta0,
        beta1: g.beta1,
        si_outside: upper_tail_ratio(g.beta0 - g.beta1, -g.beta1).min(1.0),
        si_inside: upper_tail_ratio(-g.beta0 + g.beta1, g.beta1).min(1.0),
        si_prime: si_prime(&g),
        mode: g.mode(),
    })
}

pub fn shortcut<W: Write>(bp: f64, au: f64, out: &mut W) -> Result<()> {
    let s = shortcut_values(bp, au)?;
    let mode = if s.beta0 == 0.0 { "boundary".to_string() } else { s.mode.to_string() };
    writeln!(out, "beta0\t{}", output::num(s.beta0))?;
    writeln!(out, "beta1\t{}", output::num(s.beta1))?;
    writeln!(out, "si_outside\t{}", output::num(s.si_outside))?;
    writeln!(out, "si_inside\t{}", output::num(s.si_inside))?;
    writeln!(out, "si_prime\t{}", output::num(s.si_prime))?;
    writeln!(out, "mode\t{mode}")?;
    Ok(())
}

fn parse_mode(s: &str) -> Result<TestMode> {
    match s {
        "inside" => Ok(TestMode::Inside),
        "outside" => Ok(TestMode::Outside),
        other => Err(Error::Config(format!("unknown mode '{other}' (inside or outside)"))),
    }
}

pub fn counts<W: Write>(args: &CountsArgs, out: &mut W) -> Result<()> {
    let targets = match &args.target {
        Some(t) => vec![t.parse::<RegionTarget>()?],
        None => vec![RegionTarget::Tree, RegionTarget::Edge],
    };
    let modes = match &args.mode {
        Some(m) => vec![parse_mode(m)?],
        None => vec![TestMode::Inside, TestMode::Outside],
    };
    let mut rows = Vec::new();
    for &t in &targets {
        for &m in &modes {
            rows.push((t, m, phylo::region_counts(args.taxa, t, m)?));
        }
    }
    writeln!(out, "taxa\ttarget\tmode\tall\tselect\ttrue")?;
    for (t, m, c) in rows {
        let t = match t {
            RegionTarget::Tree => "tree",
            RegionTarget::Edge => "edge",
        };
        writeln!(out, "{}\t{t}\t{m}\t{}\t{}\t{}", args.taxa, c.all, c.select, c.true_)?;
    }
    Ok(())
}

fn centering(spec: &str, xi: SitewiseLogLik) -> Result<(Centering, SitewiseLogLik)> {
    match spec {
        "mean" => Ok((Centering::Mean, xi)),
        "origin" => Ok((Centering::Origin, xi)),
        other => {
            let k: usize = other
                .strip_prefix("column:")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| Error::Config(format!("unknown centering '{other}' (mean, origin, column:K)")))?;
            if k == 0 || k > xi.n_trees() {
                return Err(Error::Config(format!("centering column {k} outside 1..={}", xi.n_trees())));
            }
            let mut columns = Vec::new();
            let mut labels = Vec::new();
            for j in (0..xi.n_trees()).filter(|&j| j != k - 1) {
                columns.push(xi.column(j));
                labels.push(xi.tree_labels[j].clone());
            }
            let rest = SitewiseLogLik::from_columns(&columns)?.with_labels(labels)?;
            Ok((Centering::Column(xi.column(k - 1)), rest))
        }
    }
}

pub fn modelmap(args: &ModelmapArgs) -> Result<()> {
    let format: MatrixFormat = args.input.format.parse()?;
    let xi = load_matrix(&args.input.input, format)?;
    let (centering, xi) = centering(&args.center, xi)?;
    let cfg = ModelMapConfig {
        rank: args.rank,
        dims: args.dims,
        project_out_full: !args.no_project,
        centering,
        alpha: args.biplot_alpha,
    };
    let result = modelmap::map_coordinates(&xi, &cfg)?;
    let mut staged = Staged::default();
    let mut buf = Vec::new();
    modelmap::write_sites_csv(&mut buf, &result)?;
    staged.add("sites.csv", String::from_utf8(buf).expect("csv is ASCII"));
    let mut buf = Vec::new();
    modelmap::write_trees_csv(&mut buf, &result, &xi.tree_labels)?;
    staged.add("trees.csv", String::from_utf8(buf).expect("csv is UTF-8"));
    let mut buf = Vec::new();
    modelmap::write_svg(&mut buf, &result, &xi.tree_labels)?;
    staged.add("map.svg", String::from_utf8(buf).expect("svg is UTF-8"));
    staged.commit(&args.out)?;
    log::info!(
        "full model from {} singular values; centering: {}",
        result.effective_rank,
        result.centering
    );
    Ok(())
}
