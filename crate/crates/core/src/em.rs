//! EM fitting of the class parameters around the ICM labeling.
//!
//! Each iteration runs ICM with the current parameters, computes per-pixel
//! class posteriors from the Gaussian likelihood and the neighborhood prior
//! of the new labels, and re-estimates means and variances from those
//! posteriors.

use std::fmt::Write as _;
use std::path::Path;

use crate::edge::EdgeMap;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::model::{ClassParams, LabelField, SIGMA_FLOOR};
use crate::mrf::{check_problem, icm_map, local_prior, total_posterior_energy, EdgeRule, IcmConfig};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub em_iters: usize,
    pub icm: IcmConfig,
    pub record_trace: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            em_iters: 10,
            icm: IcmConfig::default(),
            record_trace: true,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.em_iters == 0 {
            return Err(Error::InvalidConfig("em_iters must be at least 1".into()));
        }
        self.icm.validate()
    }
}

pub fn gaussian_pdf(z: f64, mu: f64, sigma: f64) -> f64 {
    (-(z - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt()
}

#[inline]
fn log_gaussian_pdf(z: f64, mu: f64, sigma: f64) -> f64 {
    -(z - mu).powi(2) / (2.0 * sigma * sigma) - sigma.ln() - LN_SQRT_2PI
}

/// Unnormalized neighborhood prior `exp(-sum V_c(l, x_j))` over the coupled
/// 4-neighbors of pixel `i`.
pub fn neighborhood_label_prior(
    labels: &LabelField,
    i: usize,
    l: usize,
    edges: Option<&EdgeMap>,
    rule: EdgeRule,
) -> f64 {
    let (w, h) = labels.dims();
    (-local_prior(labels.data(), w, h, i, l, edges, rule)).exp()
}

/// Per-pixel class probabilities, `k` entries per pixel in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorField {
    width: usize,
    height: usize,
    k: usize,
    probs: Vec<f64>,
}

impl PosteriorField {
    /// Rows must be non-negative and sum to 1 within 1e-10.
    pub fn new(width: usize, height: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if k == 0 || probs.len() != width * height * k {
            return Err(Error::InvalidConfig(format!(
                "posterior of {} entries does not fit {width}x{height}x{k}",
                probs.len()
            )));
        }
        for (i, row) in probs.chunks_exact(k).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidConfig(format!(
                    "posterior row {i} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(PosteriorField {
            width,
            height,
            k,
            probs,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.probs[i * self.k + l]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.k)
    }

    pub fn data(&self) -> &[f64] {
        &self.probs
    }
}

/// `P(l | y_i) ∝ G(y_i; θ_l) · P(l | x_{N_i})`, evaluated in log space with the
/// per-pixel maximum subtracted before exponentiation.
pub fn class_posterior(
    img: &GrayImage,
    labels: &LabelField,
    params: &ClassParams,
    edges: Option<&EdgeMap>,
    rule: EdgeRule,
) -> Result<PosteriorField> {
    check_problem(img, labels, params, edges)?;
    let (w, h) = img.dims();
    let k = params.k();
    let x = labels.data();
    let mut probs = Vec::with_capacity(img.len() * k);
    let mut logs = vec![0.0; k];
    for (i, &y) in img.data().iter().enumerate() {
        for (l, lg) in logs.iter_mut().enumerate() {
            *lg = log_gaussian_pdf(y, params.mu(l), params.sigma(l)) - local_prior(x, w, h, i, l, edges, rule);
        }
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let start = probs.len();
        probs.extend(logs.iter().map(|&v| (v - peak).exp()));
        let row = &mut probs[start..];
        let z: f64 = row.iter().sum();
        if z > 0.0 && z.is_finite() {
            row.iter_mut().for_each(|p| *p /= z);
        } else {
            row.iter_mut().for_each(|p| *p = 1.0 / k as f64);
        }
    }
    Ok(PosteriorField {
        width: w,
        height: h,
        k,
        probs,
    })
}

/// Posterior-weighted means and variances. A class with zero total weight
/// keeps its entry from `previous`.
pub fn update_parameters(
    img: &GrayImage,
    post: &PosteriorField,
    previous: &ClassParams,
) -> Result<ClassParams> {
    if post.dims() != img.dims() {
        return Err(Error::DimensionMismatch {
            what: "posterior field",
            expected: img.dims(),
            found: post.dims(),
        });
    }
    if post.k() != previous.k() {
        return Err(Error::ClassCountMismatch(format!(
            "posterior has {} classes, previous parameters {}",
            post.k(),
            previous.k()
        )));
    }
    let k = post.k();
    let y = img.data();
    let mut weight = vec![0.0; k];
    let mut first = vec![0.0; k];
    for (row, &v) in post.rows().zip(y) {
        for l in 0..k {
            weight[l] += row[l];
            first[l] += row[l] * v;
        }
    }
    let mu: Vec<f64> = (0..k)
        .map(|l| if weight[l] > 0.0 { first[l] / weight[l] } else { previous.mu(l) })
        .collect();
    let mut second = vec![0.0; k];
    for (row, &v) in post.rows().zip(y) {
        for l in 0..k {
            second[l] += row[l] * (v - mu[l]).powi(2);
        }
    }
    let sigma: Vec<f64> = (0..k)
        .map(|l| {
            if weight[l] > 0.0 {
                (second[l] / weight[l]).sqrt().max(SIGMA_FLOOR)
            } else {
                previous.sigma(l)
            }
        })
        .collect();
    ClassParams::new(mu, sigma)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub total: f64,
    pub likelihood: f64,
    pub prior: f64,
}

/// Total posterior energy after each EM iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub entries: Vec<TraceEntry>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> Option<&TraceEntry> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    /// `iter,total,likelihood,prior` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,total,likelihood,prior\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", e.iter, e.total, e.likelihood, e.prior);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct EmOutcome {
    pub labels: LabelField,
    pub params: ClassParams,
    pub trace: EnergyTrace,
}

/// Runs `cfg.em_iters` rounds of ICM labeling, posterior computation and
/// parameter update. Trace entries use the updated parameters.
pub fn hmrf_em(
    img: &GrayImage,
    labels_init: &LabelField,
    params_init: &ClassParams,
    edges: Option<&EdgeMap>,
    cfg: &EmConfig,
) -> Result<EmOutcome> {
    hmrf_em_with(img, labels_init, params_init, edges, cfg, |_, _| {})
}

/// [`hmrf_em`] with a callback after every iteration.
pub fn hmrf_em_with(
    img: &GrayImage,
    labels_init: &LabelField,
    params_init: &ClassParams,
    edges: Option<&EdgeMap>,
    cfg: &EmConfig,
    mut on_iter: impl FnMut(&TraceEntry, &ClassParams),
) -> Result<EmOutcome> {
    cfg.validate()?;
    check_problem(img, labels_init, params_init, edges)?;
    let mut labels = labels_init.clone();
    let mut params = params_init.clone();
    let mut trace = EnergyTrace::default();

    for t in 1..=cfg.em_iters {
        labels = icm_map(img, &labels, &params, edges, &cfg.icm)?.0;
        let post = class_posterior(img, &labels, &params, edges, cfg.icm.edge_rule)?;
        params = update_parameters(img, &post, &params)?;
        if cfg.record_trace {
            let e = total_posterior_energy(img, &labels, &params, edges)?;
            let entry = TraceEntry {
                iter: t,
                total: e.total,
                likelihood: e.likelihood,
                prior: e.prior,
            };
            on_iter(&entry, &params);
            trace.entries.push(entry);
        }
    }
    Ok(EmOutcome {
        labels,
        params,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_values() {
        let peak = gaussian_pdf(0.3, 0.3, 1.0);
        assert!((peak - 0.398_942_280_401_432_7).abs() < 1e-15);
        let one = gaussian_pdf(0.3 + 0.2, 0.3, 0.2);
        assert!((one / gaussian_pdf(0.3, 0.3, 0.2) - (-0.5f64).exp()).abs() < 1e-14);
        assert!((log_gaussian_pdf(0.7, 0.2, 0.3) - gaussian_pdf(0.7, 0.2, 0.3).ln()).abs() < 1e-13);
    }

    #[test]
    fn neighborhood_weights() {
        let labels = LabelField::uniform(3, 3, 1, 2).unwrap();
        let r = EdgeRule::Symmetric;
        assert_eq!(neighborhood_label_prior(&labels, 4, 1, None, r), 1.0);
        assert!((neighborhood_label_prior(&labels, 4, 0, None, r) - (-2f64).exp()).abs() < 1e-15);
        assert!((neighborhood_label_prior(&labels, 0, 0, None, r) - (-1f64).exp()).abs() < 1e-15);
        let mut mask = vec![false; 9];
        for j in [1, 3, 5, 7] {
            mask[j] = true;
        }
        let e = EdgeMap::new(3, 3, mask).unwrap();
        for rule in [EdgeRule::Symmetric, EdgeRule::OneSided] {
            assert_eq!(neighborhood_label_prior(&labels, 4, 0, Some(&e), rule), 1.0);
        }
    }

    #[test]
    fn symmetric_posterior() {
        let img = GrayImage::new(2, 2, vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        let labels = LabelField::new(2, 2, vec![0, 1, 1, 0], 2).unwrap();
        let p = ClassParams::new(vec![0.5, 0.5], vec![0.2, 0.2]).unwrap();
        let uniform = LabelField::uniform(2, 2, 0, 2).unwrap();
        let edges = EdgeMap::filled(2, 2, true).unwrap();
        for (lab, e) in [(&uniform, Some(&edges)), (&labels, Some(&edges))] {
            let post = class_posterior(&img, lab, &p, e, EdgeRule::Symmetric).unwrap();
            assert!(post.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn single_pixel_posterior() {
        let img = GrayImage::new(1, 1, vec![0.5]).unwrap();
        let labels = LabelField::uniform(1, 1, 0, 2).unwrap();
        let p = ClassParams::new(vec![0.4, 0.8], vec![0.1, 0.1]).unwrap();
        let post = class_posterior(&img, &labels, &p, None, EdgeRule::Symmetric).unwrap();
        let g0 = (-(0.1f64).powi(2) / 0.02).exp();
        let g1 = (-(0.3f64).powi(2) / 0.02).exp();
        assert!((post.get(0, 0) - g0 / (g0 + g1)).abs() < 1e-14);
    }

    #[test]
    fn empty_class_keeps_previous() {
        let img = GrayImage::new(2, 1, vec![0.2, 0.4]).unwrap();
        let post = PosteriorField::new(2, 1, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let prev = ClassParams::new(vec![0.1, 0.77], vec![0.05, 0.123]).unwrap();
        let next = update_parameters(&img, &post, &prev).unwrap();
        assert!((next.mu(0) - 0.3).abs() < 1e-15);
        assert!((next.sigma(0) - 0.1).abs() < 1e-15);
        assert_eq!((next.mu(1), next.sigma(1)), (0.77, 0.123));
    }

    #[test]
    fn posterior_field_validation() {
        assert!(PosteriorField::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(PosteriorField::new(1, 1, 2, vec![1.5, -0.5]).is_err());
        assert!(PosteriorField::new(1, 1, 2, vec![0.5]).is_err());
    }

    #[test]
    fn csv_layout() {
        let trace = EnergyTrace {
            entries: vec![TraceEntry {
                iter: 1,
                total: 1.5,
                likelihood: 1.0,
                prior: 0.5,
            }],
        };
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iter,total,likelihood,prior"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "1");
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.5);
        assert!(lines.next().is_none());
    }
}
