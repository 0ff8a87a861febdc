//! Seeded input generators shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordmap::EmbeddingModel;

/// `n` points in `dim` dimensions drawn uniformly from the unit cube.
pub fn random_points(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, dim), || rng.random_range(-1.0..1.0))
}

/// A model over `w0 .. w{vocab-1}` with random vectors.
pub fn random_model(vocab: usize, dim: usize, seed: u64) -> EmbeddingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<(String, Vec<f32>)> = (0..vocab)
        .map(|i| {
            (
                format!("w{}", i),
                (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            )
        })
        .collect();
    EmbeddingModel::from_entries(dim, entries).expect("generated entries are valid")
}

/// Whitespace-separated text of `tokens` words sampled from the first
/// `vocab` model words, with some punctuation mixed in.
pub fn random_text(tokens: usize, vocab: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::with_capacity(tokens * 6);
    for i in 0..tokens {
        text.push_str(&format!("w{}", rng.random_range(0..vocab)));
        text.push_str(if i % 12 == 11 { ". " } else { " " });
    }
    text
}
