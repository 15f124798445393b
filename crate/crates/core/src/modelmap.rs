//! Model map: a low-dimensional picture of the trees' site-wise
//! log-likelihood vectors.
//!
//! Squared distances `||xi_i - xi_j||^2` approximate `n` times the Jeffreys
//! divergence between models, so a PCA biplot of the centred vectors shows
//! how the candidate trees and the reconstructed full model are arranged.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::rell::{loglik_diff_variance, SitewiseLogLik};
use crate::{Error, Result};

/// Origin of the model vectors `a_i = xi_i - c`.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering {
    /// Average of all tree columns.
    Mean,
    /// A designated extra column, e.g. the star topology.
    Column(Vec<f64>),
    /// No centering.
    Origin,
}

impl Centering {
    fn describe(&self) -> &'static str {
        match self {
            Centering::Mean => "mean of tree columns",
            Centering::Column(_) => "designated column",
            Centering::Origin => "origin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMapConfig {
    /// Singular values kept when reconstructing the full model.
    pub rank: usize,
    /// 2 or 3.
    pub dims: usize,
    /// Project the model vectors orthogonally to the full model first.
    pub project_out_full: bool,
    pub centering: Centering,
    /// Biplot exponent: sites `U S^alpha`, trees `V S^(1 - alpha)`.
    pub alpha: f64,
}

impl Default for ModelMapConfig {
    fn default() -> Self {
        ModelMapConfig {
            rank: 10,
            dims: 2,
            project_out_full: true,
            centering: Centering::Mean,
            alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMapResult {
    pub site_coords: DMatrix<f64>,
    pub tree_coords: DMatrix<f64>,
    pub full_model_coord: DVector<f64>,
    /// Numerically nonzero singular values of the mapped matrix.
    pub singular_values: Vec<f64>,
    pub centering: String,
    /// Reconstructed full-model vector `a_X` in site space.
    pub full_model: DVector<f64>,
    /// Rank actually used for `a_X` after dropping numerically zero
    /// singular values.
    pub effective_rank: usize,
}

/// `n x K` matrix of model vectors `a_i = xi_i - c`.
pub fn model_vectors(xi: &SitewiseLogLik, centering: &Centering) -> Result<DMatrix<f64>> {
    let (n, k) = (xi.n_sites(), xi.n_trees());
    let mut a = DMatrix::from_fn(n, k, |t, i| xi.get(t, i));
    match centering {
        Centering::Mean => {
            for t in 0..n {
                let mean = a.row(t).sum() / k as f64;
                a.row_mut(t).add_scalar_mut(-mean);
            }
        }
        Centering::Column(c) => {
            if c.len() != n {
                return Err(Error::Precondition(format!(
                    "centering column has {} sites, matrix {n}",
                    c.len()
                )));
            }
            for t in 0..n {
                a.row_mut(t).add_scalar_mut(-c[t]);
            }
        }
        Centering::Origin => {}
    }
    Ok(a)
}

/// `a_X = B (B^T B)^-1 d` with `d_i = ||a_i||^2`, computed as
/// `U_r S_r^-1 V_r^T d` from the rank-`r` truncated SVD of `B`.
pub fn full_model_from_vectors(b: &DMatrix<f64>, rank: usize) -> Result<(DVector<f64>, usize)> {
    if rank == 0 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    if rank > b.ncols() {
        return Err(Error::Precondition(format!(
            "rank {rank} exceeds the number of trees {}",
            b.ncols()
        )));
    }
    let d = DVector::from_iterator(b.ncols(), b.column_iter().map(|c| c.norm_squared()));
    let svd = thin_svd(b);
    if svd.s.is_empty() {
        return Err(Error::Precondition("all model vectors are zero".into()));
    }
    let numerical = svd.s.len();
    let used = rank.min(numerical);
    if used < rank {
        log::warn!("requested rank {rank} exceeds numerical rank {numerical}; using {used}");
    }
    let mut a_x = DVector::zeros(b.nrows());
    for i in 0..used {
        let coef = svd.v.column(i).dot(&d) / svd.s[i];
        a_x.axpy(coef, &svd.u.column(i), 1.0);
    }
    Ok((a_x, used))
}

/// Reconstructed full-model vector for the trees of `xi`.
pub fn full_model_vector(xi: &SitewiseLogLik, rank: usize, centering: &Centering) -> Result<DVector<f64>> {
    let b = model_vectors(xi, centering)?;
    Ok(full_model_from_vectors(&b, rank)?.0)
}

/// `||xi_i - xi_j||^2`, approximately `n` times the Jeffreys divergence of
/// the two models. Same kernel as the log-likelihood difference variance.
pub fn jeffreys_distance_sq(xi: &SitewiseLogLik, i: usize, j: usize) -> Result<f64> {
    loglik_diff_variance(xi, i, j)
}

/// Thin SVD `a = U diag(s) V^T` restricted to singular values above
/// `1e-7 * s_max`, largest first, from the eigendecomposition of the smaller
/// Gram matrix.
struct ThinSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
}

fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (n, k) = a.shape();
    if n < k {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v, s: t.s, v: t.u };
    }
    let eig = (a.transpose() * a).symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let s_max = eig.eigenvalues[order[0]].max(0.0).sqrt();
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| s_max > 0.0 && eig.eigenvalues[i].max(0.0).sqrt() > 1e-7 * s_max)
        .collect();
    let s: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    let v = DMatrix::from_fn(k, kept.len(), |r, c| eig.eigenvectors[(r, kept[c])]);
    let mut u = a * &v;
    for (c, &sc) in s.iter().enumerate() {
        u.column_mut(c).unscale_mut(sc);
    }
    ThinSvd { u, s, v }
}

fn project_out(a: &DMatrix<f64>, direction: &DVector<f64>) -> DMatrix<f64> {
    let nn = direction.norm_squared();
    if nn == 0.0 {
        return a.clone();
    }
    let coef = a.transpose() * direction / nn;
    a - direction * coef.transpose()
}

/// Uncentred, unscaled PCA biplot of the model vectors.
pub fn map_coordinates(xi: &SitewiseLogLik, config: &ModelMapConfig) -> Result<ModelMapResult> {
    if !(2..=3).contains(&config.dims) {
        return Err(Error::Config(format!("dims must be 2 or 3, got {}", config.dims)));
    }
    let b = model_vectors(xi, &config.centering)?;
    let (n, k) = b.shape();
    if config.dims > n.min(k) {
        return Err(Error::Precondition(format!(
            "{} dimensions need at least that many sites and trees ({n} x {k})",
            config.dims
        )));
    }
    let (a_x, effective_rank) = full_model_from_vectors(&b, config.rank.min(k))?;
    let a = if config.project_out_full { project_out(&b, &a_x) } else { b };
    let ThinSvd { u, s, v } = thin_svd(&a);
    if s.len() < config.dims {
        return Err(Error::Precondition(format!(
            "model vectors span fewer than {} dimensions",
            config.dims
        )));
    }
    let d = config.dims;
    let site_coords = DMatrix::from_fn(n, d, |t, c| u[(t, c)] * s[c].powf(config.alpha));
    let tree_coords = DMatrix::from_fn(k, d, |i, c| v[(i, c)] * s[c].powf(1.0 - config.alpha));
    let full_model_coord =
        DVector::from_fn(d, |c, _| u.column(c).dot(&a_x) * s[c].powf(-config.alpha));
    Ok(ModelMapResult {
        site_coords,
        tree_coords,
        full_model_coord,
        singular_values: s,
        centering: config.centering.describe().to_string(),
        full_model: a_x,
        effective_rank,
    })
}

fn coord_header(d: usize) -> &'static str {
    if d == 3 {
        "x,y,z"
    } else {
        "x,y"
    }
}

fn write_row<W: Write>(out: &mut W, id: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut line = id.to_string();
    for v in values {
        write!(line, ",{v:.10e}").expect("write to string");
    }
    writeln!(out, "{line}")?;
    Ok(())
}

/// `site,x,y[,z]` with sites numbered from 1.
pub fn write_sites_csv<W: Write>(mut out: W, result: &ModelMapResult) -> Result<()> {
    writeln!(out, "site,{}", coord_header(result.site_coords.ncols()))?;
    for (t, row) in result.site_coords.row_iter().enumerate() {
        write_row(&mut out, &(t + 1).to_string(), row.iter().copied())?;
    }
    Ok(())
}

/// `tree,x,y[,z]` followed by a `full_model` row.
pub fn write_trees_csv<W: Write>(mut out: W, result: &ModelMapResult, labels: &[String]) -> Result<()> {
    writeln!(out, "tree,{}", coord_header(result.tree_coords.ncols()))?;
    for (row, label) in result.tree_coords.row_iter().zip(labels) {
        write_row(&mut out, label, row.iter().copied())?;
    }
    write_row(&mut out, "full_model", result.full_model_coord.iter().copied())
}

/// Static 800 x 800 scatter of the first two map axes: sites as grey dots,
/// trees as labelled points, the full model as a red cross.
pub fn write_svg<W: Write>(mut out: W, result: &ModelMapResult, labels: &[String]) -> Result<()> {
    const SIZE: f64 = 800.0;
    const MARGIN: f64 = 40.0;
    let points = result
        .tree_coords
        .row_iter()
        .chain(result.site_coords.row_iter())
        .map(|r| (r[0], r[1]))
        .chain(std::iter::once((result.full_model_coord[0], result.full_model_coord[1])));
    let extent = points
        .map(|(x, y)| x.abs().max(y.abs()))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let scale = (SIZE / 2.0 - MARGIN) / extent;
    let px = |x: f64| SIZE / 2.0 + x * scale;
    let py = |y: f64| SIZE / 2.0 - y * scale;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#
    )?;
    writeln!(out, r##"<rect width="800" height="800" fill="#ffffff"/>"##)?;
    writeln!(
        out,
        r##"<line x1="0" y1="400" x2="800" y2="400" stroke="#cccccc"/><line x1="400" y1="0" x2="400" y2="800" stroke="#cccccc"/>"##
    )?;
    for r in result.site_coords.row_iter() {
        writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#999999"/>"##,
            px(r[0]),
            py(r[1])
        )?;
    }
    for (r, label) in result.tree_coords.row_iter().zip(labels) {
        let (x, y) = (px(r[0]), py(r[1]));
        writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#1f4e9c"/>"##)?;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{}</text>"#,
            x + 4.0,
            y - 4.0,
            escape(label)
        )?;
    }
    let (x, y) = (px(result.full_model_coord[0]), py(result.full_model_coord[1]));
    writeln!(
        out,
        r##"<path d="M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}" stroke="#c0392b" stroke-width="2"/>"##,
        x - 6.0,
        y - 6.0,
        x + 6.0,
        y + 6.0,
        x - 6.0,
        y + 6.0,
        x + 6.0,
        y - 6.0
    )?;
    writeln!(out, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
