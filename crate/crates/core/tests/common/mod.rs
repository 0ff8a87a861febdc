//! Independent reference computations used as test oracles. Nothing here
//! calls into the code paths it checks.

#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordmap::EmbeddingModel;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random lowercase-ish word, occasionally with non-ASCII characters.
pub fn random_word(rng: &mut impl Rng) -> String {
    const ALPHABET: &[char] = &[
        'a', 'b', 'c', 'd', 'e', 'k', 'n', 'q', 'z', 'é', 'ß', '_', '-', 'Ж', '9',
    ];
    let len = rng.random_range(1..12);
    (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

/// Any finite f32, drawn from raw bit patterns so subnormals, signed zeros
/// and extreme exponents all show up.
pub fn random_finite_f32(rng: &mut impl Rng) -> f32 {
    loop {
        let v = f32::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

pub fn random_model(
    rng: &mut impl Rng,
    max_vocab: usize,
    max_dim: usize,
    raw_bits: bool,
) -> EmbeddingModel {
    let vocab = rng.random_range(0..=max_vocab);
    let dim = rng.random_range(1..=max_dim);
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    while entries.len() < vocab {
        let w = random_word(rng);
        if !seen.insert(w.clone()) {
            continue;
        }
        let v: Vec<f32> = (0..dim)
            .map(|_| {
                if raw_bits {
                    random_finite_f32(rng)
                } else {
                    rng.random_range(-1.0f32..1.0)
                }
            })
            .collect();
        entries.push((w, v));
    }
    EmbeddingModel::from_entries(dim, entries).unwrap()
}

/// Brute-force 3CosAdd ranking computed from the raw vectors in f64.
pub fn brute_force_analogy(
    model: &EmbeddingModel,
    positive: &[&str],
    negative: &[&str],
    k: usize,
) -> Vec<(String, f64)> {
    let dim = model.dim();
    let unit = |w: &str| -> Vec<f64> {
        let v: Vec<f64> = model.lookup(w).unwrap().iter().map(|&x| x as f64).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            v
        } else {
            v.iter().map(|x| x / n).collect()
        }
    };
    let mut query = vec![0.0; dim];
    for w in positive {
        for (q, u) in query.iter_mut().zip(unit(w)) {
            *q += u;
        }
    }
    for w in negative {
        for (q, u) in query.iter_mut().zip(unit(w)) {
            *q -= u;
        }
    }
    let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored = Vec::new();
    for (word, v) in model.entries() {
        if positive.contains(&word) || negative.contains(&word) {
            continue;
        }
        let v: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        let dot: f64 = query.iter().zip(&v).map(|(a, b)| a * b).sum();
        scored.push((word.to_string(), dot / (qn * vn)));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0) * scale)
}

/// Shannon entropy in bits of point `i`'s conditional distribution at
/// Gaussian bandwidth `sigma`, recomputed from scratch.
pub fn realized_log2_perplexity(x: &Array2<f64>, i: usize, sigma: f64) -> f64 {
    let n = x.nrows();
    let d2: Vec<f64> = (0..n)
        .map(|j| {
            x.row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum()
        })
        .collect();
    let min = (0..n)
        .filter(|&j| j != i)
        .map(|j| d2[j])
        .fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = (0..n)
        .map(|j| {
            if j == i {
                0.0
            } else {
                (-(d2[j] - min) / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v / z)
        .map(|p| -p * p.log2())
        .sum()
}

/// KL(P || Q(y)) with Q the normalized Student-t kernel, written as plain
/// loops.
pub fn naive_objective(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let n = y.nrows();
    let mut num = Array2::<f64>::zeros((n, n));
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d2: f64 = y
                    .row(i)
                    .iter()
                    .zip(y.row(j))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                num[[i, j]] = 1.0 / (1.0 + d2);
                z += num[[i, j]];
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && p[[i, j]] > 0.0 {
                let q = (num[[i, j]] / z).max(1e-12);
                kl += p[[i, j]] * (p[[i, j]] / q).ln();
            }
        }
    }
    kl
}

/// Central-difference gradient of [`naive_objective`] with respect to `y`.
pub fn finite_difference_gradient(p: &Array2<f64>, y: &Array2<f64>, step: f64) -> Array2<f64> {
    let mut grad = Array2::zeros(y.raw_dim());
    let mut probe = y.clone();
    for i in 0..y.nrows() {
        for k in 0..y.ncols() {
            let orig = probe[[i, k]];
            probe[[i, k]] = orig + step;
            let up = naive_objective(p, &probe);
            probe[[i, k]] = orig - step;
            let down = naive_objective(p, &probe);
            probe[[i, k]] = orig;
            grad[[i, k]] = (up - down) / (2.0 * step);
        }
    }
    grad
}

/// Pass when either the relative error is within `rel` or the absolute error
/// within `abs_floor`.
pub fn close(analytic: f64, numeric: f64, rel: f64, abs_floor: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= abs_floor || err <= rel * analytic.abs().max(numeric.abs())
}

/// Fraction of points whose nearest other point (Euclidean) has the same label.
pub fn one_nn_agreement(coords: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = coords.nrows();
    let mut agree = 0;
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if i == j {
                continue;
            }
            let d: f64 = coords
                .row(i)
                .iter()
                .zip(coords.row(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        if labels[best.1] == labels[i] {
            agree += 1;
        }
    }
    agree as f64 / n as f64
}

/// Two Gaussian clusters of `per_cluster` points in `dim` dimensions with
/// unit within-cluster std, centers `separation` apart along the first axis.
pub fn two_clusters(
    seed: u64,
    per_cluster: usize,
    dim: usize,
    separation: f64,
) -> (Array2<f64>, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    let n = 2 * per_cluster;
    let labels: Vec<usize> = (0..n).map(|i| i / per_cluster).collect();
    let x = Array2::from_shape_fn((n, dim), |(i, k)| {
        let z: f64 = StandardNormal.sample(&mut r);
        z + if labels[i] == 1 && k == 0 {
            separation
        } else {
            0.0
        }
    });
    (x, labels)
}

/// The king/queen fixture: `queen = king - man + woman` holds exactly.
/// Axes are (royal, male, female, person, place).
pub fn royal_model() -> EmbeddingModel {
    let king = [1.0f32, 1.0, 0.0, 0.0, 0.0];
    let man = [0.0f32, 1.0, 0.0, 1.0, 0.0];
    let woman = [0.0f32, 0.0, 1.0, 1.0, 0.0];
    let queen: Vec<f32> = (0..5).map(|i| king[i] - man[i] + woman[i]).collect();
    EmbeddingModel::from_entries(
        5,
        vec![
            ("king", king.to_vec()),
            ("man", man.to_vec()),
            ("woman", woman.to_vec()),
            ("queen", queen),
            ("palace", vec![1.0, 0.0, 0.0, 0.0, 1.0]),
            ("prince", vec![1.0, 1.0, 0.0, 0.5, 0.0]),
            ("girl", vec![0.0, 0.0, 1.0, 0.8, 0.0]),
            ("city", vec![0.0, 0.0, 0.0, 0.0, 1.0]),
        ],
    )
    .unwrap()
}
