//! Lloyd's k-means on scalar intensities, used to seed labels and parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::model::{ClassParams, LabelField};

#[derive(Clone, Debug)]
pub struct KmeansOutcome {
    pub labels: LabelField,
    pub params: ClassParams,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

impl KmeansOutcome {
    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

/// Nearest center; equidistant centers go to the lower index.
#[inline]
fn nearest(v: f64, centers: &[f64]) -> (usize, f64) {
    let mut best = (0, (v - centers[0]).powi(2));
    for (c, &m) in centers.iter().enumerate().skip(1) {
        let d = (v - m).powi(2);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn quantile_centers(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (0..k)
        .map(|i| {
            let idx = (((i as f64 + 0.5) / k as f64) * n as f64).floor() as usize;
            sorted[idx.min(n - 1)]
        })
        .collect()
}

fn lloyd(values: &[f64], mut centers: Vec<f64>, max_iters: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>, usize) {
    let k = centers.len();
    let mut assign = vec![usize::MAX; values.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut wcss = 0.0;
        for (a, &v) in assign.iter_mut().zip(values) {
            let (c, d) = nearest(v, &centers);
            wcss += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        history.push(wcss);
        if !changed {
            break;
        }

        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&a, &v) in assign.iter().zip(values) {
            sums[a] += v;
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
        // Empty clusters move to the intensity farthest from its nearest center.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (far_idx, far_d) = values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, nearest(v, &centers).1))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if far_d > 0.0 {
                centers[c] = values[far_idx];
            }
        }
    }
    (assign, centers, history, iterations)
}

fn finish(
    img: &GrayImage,
    k: usize,
    assign: Vec<usize>,
    centers: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
) -> Result<KmeansOutcome> {
    let values = img.data();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&a, &v) in assign.iter().zip(values) {
        sums[a] += v;
        counts[a] += 1;
    }
    let mu: Vec<f64> = (0..k)
        .map(|c| if counts[c] > 0 { sums[c] / counts[c] as f64 } else { centers[c] })
        .collect();
    let mut sq = vec![0.0; k];
    for (&a, &v) in assign.iter().zip(values) {
        sq[a] += (v - mu[a]).powi(2);
    }
    let sigma: Vec<f64> = (0..k)
        .map(|c| if counts[c] > 0 { (sq[c] / counts[c] as f64).sqrt() } else { 0.0 })
        .collect();

    // Renumber by ascending mean; stable sort keeps lower index first on ties.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let labels = LabelField::new(
        img.width(),
        img.height(),
        assign.iter().map(|&a| rank[a]).collect(),
        k,
    )?;
    let params = ClassParams::floored(
        order.iter().map(|&o| mu[o]).collect(),
        order.iter().map(|&o| sigma[o]).collect(),
    )?;
    Ok(KmeansOutcome {
        labels,
        params,
        wcss_history: history,
        iterations,
    })
}

fn check(img: &GrayImage, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > img.len() {
        return Err(Error::TooManyClasses {
            k,
            pixels: img.len(),
        });
    }
    Ok(())
}

/// Deterministic k-means with centers at the `(i + 0.5) / k` intensity quantiles.
pub fn kmeans_detailed(img: &GrayImage, k: usize, max_iters: usize) -> Result<KmeansOutcome> {
    check(img, k)?;
    let centers = quantile_centers(img.data(), k);
    let (assign, centers, history, iters) = lloyd(img.data(), centers, max_iters);
    finish(img, k, assign, centers, history, iters)
}

/// Labels and parameters from [`kmeans_detailed`]. `seed` only matters for
/// [`kmeans_restarts`]; the quantile start is deterministic.
pub fn kmeans_init(
    img: &GrayImage,
    k: usize,
    max_iters: usize,
    _seed: u64,
) -> Result<(LabelField, ClassParams)> {
    let out = kmeans_detailed(img, k, max_iters)?;
    Ok((out.labels, out.params))
}

/// Quantile start plus `restarts` extra runs from centers drawn at random
/// pixels; keeps the lowest final within-cluster sum of squares (earliest on ties).
pub fn kmeans_restarts(
    img: &GrayImage,
    k: usize,
    max_iters: usize,
    seed: u64,
    restarts: usize,
) -> Result<KmeansOutcome> {
    let mut best = kmeans_detailed(img, k, max_iters)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = img.data();
    for _ in 0..restarts {
        let centers: Vec<f64> = (0..k)
            .map(|_| values[rng.random_range(0..values.len())])
            .collect();
        let (assign, centers, history, iters) = lloyd(values, centers, max_iters);
        let cand = finish(img, k, assign, centers, history, iters)?;
        if cand.wcss() < best.wcss() {
            best = cand;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SIGMA_FLOOR;

    #[test]
    fn single_cluster() {
        let data = vec![0.1, 0.4, 0.5, 0.9, 0.3, 0.3];
        let img = GrayImage::new(3, 2, data.clone()).unwrap();
        let (labels, params) = kmeans_init(&img, 1, 20, 0).unwrap();
        assert!(labels.data().iter().all(|&l| l == 0));
        let mean = data.iter().sum::<f64>() / 6.0;
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        assert!((params.mu(0) - mean).abs() < 1e-15);
        assert!((params.sigma(0) - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_point_masses() {
        let mut data = vec![0.9; 50];
        data.extend(vec![0.1; 50]);
        let img = GrayImage::new(10, 10, data.clone()).unwrap();
        let (labels, params) = kmeans_init(&img, 2, 20, 0).unwrap();
        for (l, v) in labels.data().iter().zip(&data) {
            assert_eq!(*l, usize::from(*v > 0.5));
        }
        assert!((params.mu(0) - 0.1).abs() < 1e-12 && (params.mu(1) - 0.9).abs() < 1e-12);
        assert_eq!(params.sigmas(), &[SIGMA_FLOOR, SIGMA_FLOOR]);
    }

    #[test]
    fn constant_image_collapses() {
        let img = GrayImage::filled(4, 3, 0.6).unwrap();
        let (labels, params) = kmeans_init(&img, 2, 20, 0).unwrap();
        assert!(labels.data().iter().all(|&l| l == 0));
        assert!(params.mus().iter().all(|m| (m - 0.6).abs() < 1e-12));
        assert_eq!(params.sigmas(), &[SIGMA_FLOOR, SIGMA_FLOOR]);
    }

    #[test]
    fn too_many_classes() {
        let img = GrayImage::filled(2, 1, 0.6).unwrap();
        assert!(matches!(
            kmeans_init(&img, 3, 10, 0),
            Err(Error::TooManyClasses { k: 3, pixels: 2 })
        ));
    }

    #[test]
    fn restarts_never_worse() {
        let data: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64 / 63.0).collect();
        let img = GrayImage::new(8, 8, data).unwrap();
        let base = kmeans_detailed(&img, 3, 50).unwrap();
        let best = kmeans_restarts(&img, 3, 50, 7, 5).unwrap();
        assert!(best.wcss() <= base.wcss());
        let again = kmeans_restarts(&img, 3, 50, 7, 5).unwrap();
        assert_eq!(best.labels, again.labels);
    }
}
