//! Posterior energy of a labeling and ICM label estimation.
//!
//! The energy of a configuration `x` given intensities `y` is
//! `U(y|x) + U(x)`: a Gaussian likelihood term per pixel plus a Potts
//! penalty of 1/2 for every 4-neighbor pair with different labels.
//! Pairs touching an edge pixel are removed from the prior.

use crate::edge::EdgeMap;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::model::{ClassParams, LabelField};

/// Which neighbor pairs an edge map decouples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeRule {
    /// A pair is coupled only if neither pixel is an edge. The ICM update is
    /// then an exact coordinate descent on the reported energy.
    #[default]
    Symmetric,
    /// While updating pixel `i`, neighbor `j` is skipped only if `j` is an
    /// edge. Monotone energy descent is not guaranteed in this mode.
    OneSided,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Raster-order in-place updates.
    #[default]
    Sequential,
    /// Every pixel updated from the previous sweep's labels.
    Synchronous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcmConfig {
    pub max_iters: usize,
    /// Stop once the absolute change of total energy between sweeps is at most this.
    pub energy_tol: f64,
    pub schedule: Schedule,
    pub edge_rule: EdgeRule,
}

impl Default for IcmConfig {
    fn default() -> Self {
        IcmConfig {
            max_iters: 10,
            energy_tol: 1e-6,
            schedule: Schedule::Sequential,
            edge_rule: EdgeRule::Symmetric,
        }
    }
}

impl IcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("ICM max_iters must be at least 1".into()));
        }
        if !(self.energy_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ICM energy tolerance must be non-negative, got {}",
                self.energy_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub likelihood: f64,
    pub prior: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(likelihood: f64, prior: f64) -> Self {
        EnergyBreakdown {
            likelihood,
            prior,
            total: likelihood + prior,
        }
    }
}

/// `(y - mu_l)^2 / (2 sigma_l^2) + ln sigma_l`
#[inline]
pub fn likelihood_energy_pixel(y: f64, l: usize, params: &ClassParams) -> f64 {
    let (mu, sigma) = (params.mu(l), params.sigma(l));
    (y - mu).powi(2) / (2.0 * sigma * sigma) + sigma.ln()
}

/// Potts pair potential: 0 for equal labels, 1/2 otherwise.
#[inline]
pub fn clique_potential(a: usize, b: usize) -> f64 {
    if a == b {
        0.0
    } else {
        0.5
    }
}

/// Up to four 4-neighbors of pixel `i` in a `w x h` grid.
#[inline]
pub(crate) fn neighbors(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

#[inline]
pub(crate) fn coupled(edges: Option<&EdgeMap>, i: usize, j: usize, rule: EdgeRule) -> bool {
    match edges {
        None => true,
        Some(e) => match rule {
            EdgeRule::Symmetric => !e.is_edge(i) && !e.is_edge(j),
            EdgeRule::OneSided => !e.is_edge(j),
        },
    }
}

/// `sum_{j in N_i, coupled} V_c(l, x_j)` for a candidate label `l` at pixel `i`.
#[inline]
pub(crate) fn local_prior(
    labels: &[usize],
    w: usize,
    h: usize,
    i: usize,
    l: usize,
    edges: Option<&EdgeMap>,
    rule: EdgeRule,
) -> f64 {
    neighbors(i, w, h)
        .filter(|&j| coupled(edges, i, j, rule))
        .map(|j| clique_potential(l, labels[j]))
        .sum()
}

pub(crate) fn check_edges(dims: (usize, usize), edges: Option<&EdgeMap>) -> Result<()> {
    match edges {
        Some(e) if e.dims() != dims => Err(Error::EdgeMapDimensionMismatch {
            expected: dims,
            found: e.dims(),
        }),
        _ => Ok(()),
    }
}

pub(crate) fn check_problem(
    img: &GrayImage,
    labels: &LabelField,
    params: &ClassParams,
    edges: Option<&EdgeMap>,
) -> Result<()> {
    if labels.dims() != img.dims() {
        return Err(Error::DimensionMismatch {
            what: "label field",
            expected: img.dims(),
            found: labels.dims(),
        });
    }
    if labels.k() != params.k() {
        return Err(Error::ClassCountMismatch(format!(
            "labels use k = {}, parameters have {} classes",
            labels.k(),
            params.k()
        )));
    }
    check_edges(img.dims(), edges)
}

/// Sum of pair potentials over each unordered 4-neighbor pair, skipping
/// pairs with an edge endpoint.
pub fn prior_energy(labels: &LabelField, edges: Option<&EdgeMap>) -> Result<f64> {
    check_edges(labels.dims(), edges)?;
    let (w, h) = labels.dims();
    let x = labels.data();
    let mut sum = 0.0;
    for i in 0..x.len() {
        let (px, py) = (i % w, i / w);
        if px + 1 < w && coupled(edges, i, i + 1, EdgeRule::Symmetric) {
            sum += clique_potential(x[i], x[i + 1]);
        }
        if py + 1 < h && coupled(edges, i, i + w, EdgeRule::Symmetric) {
            sum += clique_potential(x[i], x[i + w]);
        }
    }
    Ok(sum)
}

pub fn likelihood_energy(img: &GrayImage, labels: &LabelField, params: &ClassParams) -> Result<f64> {
    check_problem(img, labels, params, None)?;
    Ok(img
        .data()
        .iter()
        .zip(labels.data())
        .map(|(&y, &l)| likelihood_energy_pixel(y, l, params))
        .sum())
}

pub fn total_posterior_energy(
    img: &GrayImage,
    labels: &LabelField,
    params: &ClassParams,
    edges: Option<&EdgeMap>,
) -> Result<EnergyBreakdown> {
    check_problem(img, labels, params, edges)?;
    Ok(EnergyBreakdown::new(
        likelihood_energy(img, labels, params)?,
        prior_energy(labels, edges)?,
    ))
}

/// Per-pixel maximum-likelihood labeling (ties to the smallest label).
pub fn ml_labels(img: &GrayImage, params: &ClassParams) -> Result<LabelField> {
    let labels = img
        .data()
        .iter()
        .map(|&y| argmin((0..params.k()).map(|l| likelihood_energy_pixel(y, l, params))))
        .collect();
    LabelField::new(img.width(), img.height(), labels, params.k())
}

/// Index of the smallest value; first one wins on ties.
#[inline]
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (l, v) in values.enumerate() {
        if v < best.1 {
            best = (l, v);
        }
    }
    best.0
}

fn best_label(
    y: f64,
    params: &ClassParams,
    labels: &[usize],
    dims: (usize, usize),
    i: usize,
    edges: Option<&EdgeMap>,
    rule: EdgeRule,
) -> usize {
    argmin((0..params.k()).map(|l| {
        likelihood_energy_pixel(y, l, params) + local_prior(labels, dims.0, dims.1, i, l, edges, rule)
    }))
}

/// Iterated conditional modes. Returns the final labels and the energy after
/// every sweep, with the initial energy as entry 0.
pub fn icm_map(
    img: &GrayImage,
    labels_init: &LabelField,
    params: &ClassParams,
    edges: Option<&EdgeMap>,
    cfg: &IcmConfig,
) -> Result<(LabelField, Vec<EnergyBreakdown>)> {
    cfg.validate()?;
    check_problem(img, labels_init, params, edges)?;
    let dims = img.dims();
    let y = img.data();
    let mut labels = labels_init.clone();
    let mut history = vec![total_posterior_energy(img, &labels, params, edges)?];

    for _ in 0..cfg.max_iters {
        let mut changed = 0usize;
        match cfg.schedule {
            Schedule::Sequential => {
                for i in 0..y.len() {
                    let best = best_label(y[i], params, labels.data(), dims, i, edges, cfg.edge_rule);
                    if best != labels.data()[i] {
                        labels.set_index(i, best);
                        changed += 1;
                    }
                }
            }
            Schedule::Synchronous => {
                let frozen = labels.data().to_vec();
                for (i, &yi) in y.iter().enumerate() {
                    let best = best_label(yi, params, &frozen, dims, i, edges, cfg.edge_rule);
                    if best != frozen[i] {
                        labels.set_index(i, best);
                        changed += 1;
                    }
                }
            }
        }
        let energy = total_posterior_energy(img, &labels, params, edges)?;
        let prev = history.last().expect("history starts non-empty").total;
        history.push(energy);
        if changed == 0 || (energy.total - prev).abs() <= cfg.energy_tol {
            break;
        }
    }
    Ok((labels, history))
}
