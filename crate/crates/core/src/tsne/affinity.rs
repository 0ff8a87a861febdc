//! High-dimensional side: squared distances and perplexity-calibrated
//! Gaussian joint probabilities.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use super::TsneError;

/// Maximum bandwidth search steps per point.
pub const MAX_SEARCH_STEPS: usize = 50;
/// Search stops once `|log2(perplexity) - log2(target)|` is at most this.
pub const LOG2_PERPLEXITY_TOLERANCE: f64 = 1e-5;
/// Conditional probabilities below this are stored as zero.
pub const MIN_CONDITIONAL: f64 = 1e-12;
/// Tolerance on the total mass of an [`AffinityMatrix`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Symmetric joint probabilities over ordered pairs, zero diagonal, summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    p: Array2<f64>,
}

impl AffinityMatrix {
    /// Validates and wraps a joint probability matrix.
    pub fn new(p: Array2<f64>) -> Result<Self, TsneError> {
        let (n, m) = p.dim();
        if n != m {
            return Err(TsneError::InvalidAffinities(format!(
                "matrix is {}x{}, not square",
                n, m
            )));
        }
        let mut total = 0.0;
        for i in 0..n {
            if p[[i, i]] != 0.0 {
                return Err(TsneError::InvalidAffinities(format!(
                    "diagonal entry {} is nonzero",
                    i
                )));
            }
            for j in 0..n {
                let v = p[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(TsneError::InvalidAffinities(format!(
                        "entry ({}, {}) = {}",
                        i, j, v
                    )));
                }
                if v.to_bits() != p[[j, i]].to_bits() {
                    return Err(TsneError::InvalidAffinities(format!(
                        "not symmetric at ({}, {})",
                        i, j
                    )));
                }
                total += v;
            }
        }
        if n > 0 && (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(TsneError::InvalidAffinities(format!(
                "entries sum to {}",
                total
            )));
        }
        Ok(AffinityMatrix { p })
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.p.view()
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.p
    }
}

/// Output of [`calibrate_affinities`].
#[derive(Clone, Debug)]
pub struct Calibration {
    pub affinities: AffinityMatrix,
    /// Per-point precision `1 / (2 sigma^2)` of the Gaussian kernel.
    pub precisions: Vec<f64>,
    /// Points whose bandwidth search hit the step limit; the last bandwidth
    /// tried is used for them.
    pub unconverged: Vec<usize>,
}

impl Calibration {
    /// Gaussian bandwidth `sigma` for point `i`.
    pub fn bandwidth(&self, i: usize) -> f64 {
        (0.5 / self.precisions[i]).sqrt()
    }
}

pub(super) fn check_finite(x: ArrayView2<'_, f64>) -> Result<(), TsneError> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(TsneError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// `‖x_i - x_j‖²` for every pair of rows.
///
/// Each entry is summed directly over coordinate differences, so the result
/// is bitwise symmetric with an exactly zero diagonal.
pub fn pairwise_squared_distances(x: ArrayView2<'_, f64>) -> Result<Array2<f64>, TsneError> {
    let n = x.nrows();
    if n < 2 {
        return Err(TsneError::TooFewPoints { needed: 2, got: n });
    }
    check_finite(x)?;
    let mut out = Array2::zeros((n, n));
    squared_distances_into(x, &mut out);
    Ok(out)
}

pub(super) fn squared_distances_into(x: ArrayView2<'_, f64>, out: &mut Array2<f64>) {
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let xi = x.row(i);
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = if i == j {
                    0.0
                } else {
                    xi.iter()
                        .zip(x.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                };
            }
        });
}

/// Fills `out` with the conditional distribution of row `i` at precision
/// `beta` and returns its Shannon entropy in nats.
fn conditional_row(
    distances: ArrayView1<'_, f64>,
    i: usize,
    beta: f64,
    shift: f64,
    out: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, o)) in distances.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let scaled = beta * (d - shift);
        let w = (-scaled).exp();
        *o = w;
        total += w;
        weighted += w * scaled;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    total.ln() + weighted / total
}

struct RowSearch {
    beta: f64,
    converged: bool,
}

/// Bisection on the Gaussian precision with doubling/halving until the
/// target is bracketed.
fn search_row(
    distances: ArrayView1<'_, f64>,
    i: usize,
    target_entropy: f64,
    out: &mut [f64],
) -> RowSearch {
    let (shift, mean) = {
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        for (j, &d) in distances.iter().enumerate() {
            if j != i {
                min = min.min(d);
                sum += d;
            }
        }
        (min, sum / (distances.len() - 1) as f64)
    };
    let spread = mean - shift;
    let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;

    for _ in 0..MAX_SEARCH_STEPS {
        let entropy = conditional_row(distances, i, beta, shift, out);
        let gap = (entropy - target_entropy) / std::f64::consts::LN_2;
        if gap.abs() <= LOG2_PERPLEXITY_TOLERANCE {
            return RowSearch {
                beta,
                converged: true,
            };
        }
        let next = if gap > 0.0 {
            // Too flat: sharpen.
            lo = beta;
            if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                beta * 2.0
            }
        } else {
            hi = beta;
            if lo > 0.0 {
                0.5 * (lo + hi)
            } else {
                beta * 0.5
            }
        };
        if next == beta {
            break;
        }
        beta = next;
    }
    // `out` must match the returned precision.
    conditional_row(distances, i, beta, shift, out);
    RowSearch {
        beta,
        converged: false,
    }
}

/// Per-point bandwidth search followed by symmetrization
/// `p_ij = (p_{j|i} + p_{i|j}) / sum`.
pub fn calibrate_affinities(
    distances: ArrayView2<'_, f64>,
    perplexity: f64,
) -> Result<Calibration, TsneError> {
    let (n, m) = distances.dim();
    if n != m {
        return Err(TsneError::Shape(format!("distance matrix is {}x{}", n, m)));
    }
    if n < 2 {
        return Err(TsneError::TooFewPoints { needed: 2, got: n });
    }
    if !perplexity.is_finite() || perplexity <= 1.0 || perplexity >= n as f64 {
        return Err(TsneError::Config(format!(
            "perplexity {} must lie in (1, {})",
            perplexity, n
        )));
    }
    check_finite(distances)?;
    let target = perplexity.ln();

    let mut conditional = Array2::<f64>::zeros((n, n));
    let searches: Vec<RowSearch> = conditional
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let out = row.as_slice_mut().expect("standard layout");
            let search = search_row(distances.row(i), i, target, out);
            for v in out.iter_mut() {
                if *v < MIN_CONDITIONAL {
                    *v = 0.0;
                }
            }
            search
        })
        .collect();

    let mut joint = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            joint[[i, j]] = conditional[[i, j]] + conditional[[j, i]];
        }
    }
    let total: f64 = joint.rows().into_iter().map(|r| r.sum()).sum();
    joint.mapv_inplace(|v| v / total);

    let unconverged = searches
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.converged)
        .map(|(i, _)| i)
        .collect();
    Ok(Calibration {
        affinities: AffinityMatrix { p: joint },
        precisions: searches.iter().map(|s| s.beta).collect(),
        unconverged,
    })
}
