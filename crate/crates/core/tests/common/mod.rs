#![allow(dead_code)]

use hmrf::{ClassParams, EdgeMap, GrayImage, LabelField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
}

pub fn random_params(rng: &mut impl Rng, k: usize) -> ClassParams {
    ClassParams::new(
        (0..k).map(|_| rng.random::<f64>()).collect(),
        (0..k).map(|_| rng.random_range(0.05..0.5)).collect(),
    )
    .unwrap()
}

/// Two-class image: left half `mu0`, right half `mu1`, plus clipped Gaussian noise.
/// Returns the image and the ground-truth labels.
pub fn two_class_image(
    w: usize,
    h: usize,
    mu0: f64,
    mu1: f64,
    noise: f64,
    seed: u64,
) -> (GrayImage, Vec<usize>) {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let mut data = Vec::with_capacity(w * h);
    let mut truth = Vec::with_capacity(w * h);
    for _y in 0..h {
        for x in 0..w {
            let l = usize::from(x >= w / 2);
            let mu = if l == 0 { mu0 } else { mu1 };
            data.push((mu + normal.sample(&mut r)).clamp(0.0, 1.0));
            truth.push(l);
        }
    }
    (GrayImage::new(w, h, data).unwrap(), truth)
}

/// Independent energy evaluation straight from the definitions: Gaussian
/// likelihood energy per pixel plus 1/2 per unequal right/down neighbor pair
/// whose endpoints are both non-edge.
pub fn brute_energy(
    y: &[f64],
    w: usize,
    h: usize,
    x: &[usize],
    mu: &[f64],
    sigma: &[f64],
    edges: Option<&[bool]>,
) -> f64 {
    let mut e = 0.0;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let l = x[i];
            e += (y[i] - mu[l]) * (y[i] - mu[l]) / (2.0 * sigma[l] * sigma[l]) + sigma[l].ln();
            let free = |j: usize| edges.is_none_or(|z| !z[i] && !z[j]);
            if c + 1 < w && free(i + 1) && x[i] != x[i + 1] {
                e += 0.5;
            }
            if r + 1 < h && free(i + w) && x[i] != x[i + w] {
                e += 0.5;
            }
        }
    }
    e
}

/// Global minimum over all `k^N` configurations.
pub fn exhaustive_min(
    img: &GrayImage,
    params: &ClassParams,
    edges: Option<&EdgeMap>,
) -> (f64, Vec<usize>) {
    let (w, h) = img.dims();
    let n = w * h;
    let k = params.k();
    let total = k.pow(n as u32);
    let mut best = (f64::INFINITY, vec![0; n]);
    let mut x = vec![0; n];
    for code in 0..total {
        let mut t = code;
        for xi in x.iter_mut() {
            *xi = t % k;
            t /= k;
        }
        let e = brute_energy(
            img.data(),
            w,
            h,
            &x,
            params.mus(),
            params.sigmas(),
            edges.map(|e| e.mask()),
        );
        if e < best.0 {
            best = (e, x.clone());
        }
    }
    best
}

/// Largest energy drop achievable by changing a single pixel's label.
pub fn best_single_flip_gain(img: &GrayImage, labels: &LabelField, params: &ClassParams) -> f64 {
    let (w, h) = img.dims();
    let base = brute_energy(img.data(), w, h, labels.data(), params.mus(), params.sigmas(), None);
    let mut x = labels.data().to_vec();
    let mut gain: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        for l in 0..params.k() {
            if l == orig {
                continue;
            }
            x[i] = l;
            let e = brute_energy(img.data(), w, h, &x, params.mus(), params.sigmas(), None);
            gain = gain.max(base - e);
        }
        x[i] = orig;
    }
    gain
}

pub fn misclassification(labels: &[usize], truth: &[usize]) -> f64 {
    let wrong = labels.iter().zip(truth).filter(|(a, b)| a != b).count();
    wrong as f64 / truth.len() as f64
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}
