//! Low-dimensional Student-t affinities, the KL objective and its gradient.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use super::affinity::{squared_distances_into, AffinityMatrix};

/// Lower clamp applied to every off-diagonal `q_ij`.
pub const MIN_Q: f64 = 1e-12;

/// Student-t joint probabilities of a layout.
///
/// Returns `(q, numerators)` where `numerators[i][j] = 1 / (1 + ‖y_i - y_j‖²)`
/// (zero on the diagonal) and `q` is their normalization, floor-clamped at
/// [`MIN_Q`].
pub fn low_dim_affinities(y: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let n = y.nrows();
    let mut q = Array2::zeros((n, n));
    let mut num = Array2::zeros((n, n));
    low_dim_affinities_into(y, &mut q, &mut num);
    (q, num)
}

/// Returns the normalizer `sum_{i != j} num_ij`.
pub(super) fn low_dim_affinities_into(
    y: ArrayView2<'_, f64>,
    q: &mut Array2<f64>,
    num: &mut Array2<f64>,
) -> f64 {
    squared_distances_into(y, num);
    let row_sums: Vec<f64> = num
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let mut sum = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 0.0 } else { 1.0 / (1.0 + *v) };
                sum += *v;
            }
            sum
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    Zip::indexed(q).and(&*num).par_for_each(|(i, j), qv, &nv| {
        *qv = if i == j { 0.0 } else { (nv / total).max(MIN_Q) };
    });
    total
}

/// `sum_{i != j} p_ij ln(p_ij / q_ij)`; pairs with `p_ij == 0` contribute nothing.
pub fn kl_divergence(p: &AffinityMatrix, q: ArrayView2<'_, f64>) -> f64 {
    kl_divergence_raw(p.view(), q)
}

pub(super) fn kl_divergence_raw(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> f64 {
    let row_terms: Vec<f64> = p
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(q.axis_iter(Axis(0)))
        .enumerate()
        .map(|(i, (prow, qrow))| {
            let mut s = 0.0;
            for (j, (&pv, &qv)) in prow.iter().zip(qrow.iter()).enumerate() {
                if i != j && pv > 0.0 {
                    s += pv * (pv / qv).ln();
                }
            }
            s
        })
        .collect();
    row_terms.iter().sum()
}

/// Gradient of the KL objective with respect to each output point:
/// `4 sum_j (p_ij - q_ij) num_ij (y_i - y_j)`.
///
/// `p` may be an exaggerated copy of the affinities, so it is taken as a
/// plain matrix.
pub fn gradient(
    p: ArrayView2<'_, f64>,
    q: ArrayView2<'_, f64>,
    num: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let mut grad = Array2::zeros(y.raw_dim());
    gradient_into(p, q, num, y, &mut grad);
    grad
}

pub(super) fn gradient_into(
    p: ArrayView2<'_, f64>,
    q: ArrayView2<'_, f64>,
    num: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    grad: &mut Array2<f64>,
) {
    let n = y.nrows();
    assert_eq!(p.dim(), (n, n), "p shape");
    assert_eq!(q.dim(), (n, n), "q shape");
    assert_eq!(num.dim(), (n, n), "numerator shape");
    assert_eq!(grad.dim(), y.dim(), "gradient shape");

    grad.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut g)| {
            g.fill(0.0);
            let yi = y.row(i);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mult = (p[[i, j]] - q[[i, j]]) * num[[i, j]];
                for (gk, (a, b)) in g.iter_mut().zip(yi.iter().zip(y.row(j))) {
                    *gk += mult * (a - b);
                }
            }
            g.mapv_inplace(|v| 4.0 * v);
        });
}
