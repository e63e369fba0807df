mod common;

use hmrf::{
    class_posterior, hmrf_em, icm_map, kmeans_init, update_parameters, ClassParams, EdgeRule,
    EmConfig, GrayImage, LabelField, PosteriorField, SIGMA_FLOOR,
};
use proptest::prelude::*;
use rand::Rng;

/// Weighted mean and population std computed directly from the definitions.
fn weighted_stats(y: &[f64], w: &[f64]) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let mean = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let var = y.iter().zip(w).map(|(a, b)| b * (a - mean) * (a - mean)).sum::<f64>() / total;
    (mean, var.sqrt())
}

fn random_posterior(r: &mut impl Rng, n: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * k);
    for _ in 0..n {
        let row: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 1e-3).collect();
        let s: f64 = row.iter().sum();
        out.extend(row.into_iter().map(|v| v / s));
    }
    out
}

#[test]
fn m_step_matches_weighted_oracle() {
    let mut r = common::rng(10);
    for _ in 0..20 {
        let img = common::random_image(&mut r, 5, 2);
        let probs = random_posterior(&mut r, 10, 3);
        let post = PosteriorField::new(5, 2, 3, probs.clone()).unwrap();
        let prev = common::random_params(&mut r, 3);
        let next = update_parameters(&img, &post, &prev).unwrap();
        for l in 0..3 {
            let w: Vec<f64> = (0..10).map(|i| probs[i * 3 + l]).collect();
            let (m, s) = weighted_stats(img.data(), &w);
            assert!((next.mu(l) - m).abs() <= 1e-12);
            assert!((next.sigma(l) - s.max(SIGMA_FLOOR)).abs() <= 1e-12);
        }
    }
}

#[test]
fn one_hot_and_uniform_posteriors() {
    let img = GrayImage::new(3, 2, vec![0.1, 0.2, 0.9, 0.7, 0.3, 0.5]).unwrap();
    let part = [0usize, 0, 1, 1, 0, 1];
    let onehot: Vec<f64> = part.iter().flat_map(|&l| if l == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
    let prev = ClassParams::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
    let p = update_parameters(&img, &PosteriorField::new(3, 2, 2, onehot).unwrap(), &prev).unwrap();
    let (m0, s0) = weighted_stats(&[0.1, 0.2, 0.3], &[1.0; 3]);
    let (m1, s1) = weighted_stats(&[0.9, 0.7, 0.5], &[1.0; 3]);
    assert!((p.mu(0) - m0).abs() < 1e-12 && (p.sigma(0) - s0).abs() < 1e-12);
    assert!((p.mu(1) - m1).abs() < 1e-12 && (p.sigma(1) - s1).abs() < 1e-12);

    let uniform = PosteriorField::new(3, 2, 2, vec![0.5; 12]).unwrap();
    let p = update_parameters(&img, &uniform, &prev).unwrap();
    let (m, s) = weighted_stats(img.data(), &[1.0; 6]);
    for l in 0..2 {
        assert!((p.mu(l) - m).abs() < 1e-12 && (p.sigma(l) - s).abs() < 1e-12);
    }
}

#[test]
fn posterior_matches_direct_evaluation() {
    // Full 3x3 instance: numerator G(y; θ_l) · exp(-Σ V_c) evaluated directly.
    let mut r = common::rng(31);
    let img = common::random_image(&mut r, 3, 3);
    let p = common::random_params(&mut r, 2);
    let x: Vec<usize> = (0..9).map(|_| r.random_range(0..2)).collect();
    let labels = LabelField::new(3, 3, x.clone(), 2).unwrap();
    let post = class_posterior(&img, &labels, &p, None, EdgeRule::Symmetric).unwrap();
    for i in 0..9 {
        let (cx, cy) = (i % 3, i / 3);
        let nbrs: Vec<usize> = (0..9)
            .filter(|&j| {
                let (jx, jy) = (j % 3, j / 3);
                (cx as isize - jx as isize).abs() + (cy as isize - jy as isize).abs() == 1
            })
            .collect();
        let num: Vec<f64> = (0..2)
            .map(|l| {
                let y = img.data()[i];
                let g = (-(y - p.mu(l)).powi(2) / (2.0 * p.sigma(l).powi(2))).exp()
                    / (2.0 * std::f64::consts::PI * p.sigma(l).powi(2)).sqrt();
                let u = nbrs.iter().filter(|&&j| x[j] != l).count() as f64 * 0.5;
                g * (-u).exp()
            })
            .collect();
        let z = num[0] + num[1];
        for l in 0..2 {
            assert!((post.get(i, l) - num[l] / z).abs() < 1e-12);
        }
    }
}

#[test]
fn single_pixel_posterior() {
    let img = GrayImage::new(1, 1, vec![0.5]).unwrap();
    let p = ClassParams::new(vec![0.4, 0.8], vec![0.1, 0.1]).unwrap();
    let labels = LabelField::uniform(1, 1, 0, 2).unwrap();
    let post = class_posterior(&img, &labels, &p, None, EdgeRule::Symmetric).unwrap();
    let g = |mu: f64, s: f64| (-(0.5 - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let want = g(0.4, 0.1) / (g(0.4, 0.1) + g(0.8, 0.1));
    assert!((post.get(0, 0) - want).abs() < 1e-12);
    assert!((post.get(0, 1) - (1.0 - want)).abs() < 1e-12);
}

#[test]
fn equal_classes_split_evenly() {
    let mut r = common::rng(5);
    let img = common::random_image(&mut r, 4, 4);
    let p = ClassParams::new(vec![0.5, 0.5], vec![0.2, 0.2]).unwrap();
    let labels = LabelField::new(4, 4, (0..16).map(|i| (i / 2) % 2).collect(), 2).unwrap();
    let edges = hmrf::EdgeMap::filled(4, 4, true).unwrap();
    let post = class_posterior(&img, &labels, &p, Some(&edges), EdgeRule::Symmetric).unwrap();
    for row in post.rows() {
        assert!((row[0] - 0.5).abs() < 1e-12 && (row[1] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn single_iteration_is_one_icm_run() {
    let (img, _) = common::two_class_image(24, 16, 0.3, 0.7, 0.1, 2);
    let (init, params) = kmeans_init(&img, 2, 100, 0).unwrap();
    let cfg = EmConfig {
        em_iters: 1,
        ..Default::default()
    };
    let out = hmrf_em(&img, &init, &params, None, &cfg).unwrap();
    let (icm, _) = icm_map(&img, &init, &params, None, &cfg.icm).unwrap();
    assert_eq!(out.labels, icm);
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn synthetic_64_recovery() {
    let (img, truth) = common::two_class_image(64, 64, 0.3, 0.7, 0.05, 64);
    let (init, params) = kmeans_init(&img, 2, 100, 0).unwrap();
    let out = hmrf_em(&img, &init, &params, None, &EmConfig::default()).unwrap();
    assert!(common::misclassification(out.labels.data(), &truth) < 0.01);
    assert!((out.params.mu(0) - 0.3).abs() < 0.01);
    assert!((out.params.mu(1) - 0.7).abs() < 0.01);
}

#[test]
fn noiseless_fixed_point() {
    let (img, truth) = common::two_class_image(16, 12, 0.3, 0.7, 1e-12, 1);
    let labels = LabelField::new(16, 12, truth, 2).unwrap();
    let params = ClassParams::new(vec![0.3, 0.7], vec![0.05, 0.05]).unwrap();
    let mut cur = (labels.clone(), params.clone());
    for _ in 0..10 {
        let cfg = EmConfig {
            em_iters: 1,
            ..Default::default()
        };
        let out = hmrf_em(&img, &cur.0, &cur.1, None, &cfg).unwrap();
        assert_eq!(out.labels, labels);
        assert!((out.params.mu(0) - 0.3).abs() < 0.01);
        assert!((out.params.mu(1) - 0.7).abs() < 0.01);
        cur = (out.labels, out.params);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn em_invariants(seed in any::<u64>(), k in 2usize..4) {
        let mut r = common::rng(seed);
        let img = common::random_image(&mut r, 9, 7);
        let (init, params) = kmeans_init(&img, k, 50, 0).unwrap();
        let (lo, hi) = img.min_max();
        let mut labels = init;
        let mut p = params;
        for _ in 0..4 {
            let cfg = EmConfig { em_iters: 1, ..Default::default() };
            let out = hmrf_em(&img, &labels, &p, None, &cfg).unwrap();
            let post = class_posterior(&img, &out.labels, &out.params, None, EdgeRule::Symmetric).unwrap();
            for row in post.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
            }
            prop_assert!(out.params.sigmas().iter().all(|&s| s >= SIGMA_FLOOR));
            prop_assert!(out.params.mus().iter().all(|&m| lo - 1e-12 <= m && m <= hi + 1e-12));
            labels = out.labels;
            p = out.params;
        }
    }
}
