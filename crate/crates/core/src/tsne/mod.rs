//! Exact t-SNE.
//!
//! Gaussian joint probabilities are calibrated per point to a target
//! perplexity, then a low-dimensional layout is fitted by gradient descent
//! with momentum on the KL divergence to Student-t joint probabilities.
//! Cost is O(n²) per iteration; there is no Barnes-Hut approximation.
//!
//! Row-wise work runs on the rayon pool, but every reduction is summed in
//! row order, so results do not depend on the number of threads.

mod affinity;
mod objective;

use log::{debug, warn};
use ndarray::{Array2, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub use affinity::{
    calibrate_affinities, pairwise_squared_distances, AffinityMatrix, Calibration,
    LOG2_PERPLEXITY_TOLERANCE, MAX_SEARCH_STEPS, MIN_CONDITIONAL, SUM_TOLERANCE,
};
pub use objective::{gradient, kl_divergence, low_dim_affinities, MIN_Q};

/// Standard deviation of the random initial layout.
pub const INIT_STD: f64 = 1e-4;
/// Floor for adaptive step-size gains.
pub const MIN_GAIN: f64 = 0.01;
/// Smallest input accepted by [`run_tsne`].
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Error)]
pub enum TsneError {
    #[error("invalid t-SNE configuration: {0}")]
    Config(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("non-finite input value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("optimization diverged at iteration {0}")]
    Diverged(usize),

    #[error("invalid affinity matrix: {0}")]
    InvalidAffinities(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Optimizer settings. Defaults follow the common exact t-SNE schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TsneConfig {
    pub out_dims: usize,
    pub perplexity: f64,
    pub learning_rate: f64,
    pub n_iter: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    /// Seed for the ChaCha8 generator that draws the initial layout.
    pub seed: u64,
    /// The objective is recorded every `kl_every` iterations, plus once after
    /// the last update.
    pub kl_every: usize,
    /// Per-coordinate step-size gains: +0.2 when the gradient sign flips
    /// against the current velocity, ×0.8 otherwise, floored at
    /// [`MIN_GAIN`]. Without them the step is `learning_rate × gradient`.
    pub adaptive_gains: bool,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            out_dims: 2,
            perplexity: 30.0,
            learning_rate: 200.0,
            n_iter: 1000,
            early_exaggeration_factor: 12.0,
            early_exaggeration_iters: 250,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            kl_every: 10,
            adaptive_gains: true,
        }
    }
}

impl TsneConfig {
    /// Checks the settings that do not depend on the input.
    pub fn validate(&self) -> Result<(), TsneError> {
        let fail = |msg: String| Err(TsneError::Config(msg));
        if self.out_dims == 0 {
            return fail("out_dims must be positive".into());
        }
        if !self.perplexity.is_finite() || self.perplexity <= 1.0 {
            return fail(format!("perplexity must be > 1, got {}", self.perplexity));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return fail(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.n_iter == 0 {
            return fail("n_iter must be positive".into());
        }
        if !self.early_exaggeration_factor.is_finite() || self.early_exaggeration_factor < 1.0 {
            return fail(format!(
                "early exaggeration factor must be >= 1, got {}",
                self.early_exaggeration_factor
            ));
        }
        if self.early_exaggeration_iters > self.n_iter {
            return fail(format!(
                "early exaggeration lasts {} iterations but only {} are run",
                self.early_exaggeration_iters, self.n_iter
            ));
        }
        for (name, m) in [
            ("initial", self.momentum_initial),
            ("final", self.momentum_final),
        ] {
            if !(0.0..1.0).contains(&m) {
                return fail(format!("{} momentum must be in [0, 1), got {}", name, m));
            }
        }
        if self.kl_every == 0 {
            return fail("kl_every must be positive".into());
        }
        Ok(())
    }

    fn validate_for(&self, n: usize) -> Result<(), TsneError> {
        self.validate()?;
        if n < MIN_POINTS {
            return Err(TsneError::TooFewPoints {
                needed: MIN_POINTS,
                got: n,
            });
        }
        if self.perplexity >= n as f64 {
            return Err(TsneError::Config(format!(
                "perplexity {} must be below the number of points ({})",
                self.perplexity, n
            )));
        }
        Ok(())
    }
}

/// One recorded value of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlSample {
    /// Number of updates applied before the evaluation.
    pub iteration: usize,
    pub kl: f64,
}

#[derive(Clone, Debug)]
pub struct TsneResult {
    /// `n × out_dims` layout.
    pub coords: Array2<f64>,
    pub kl_history: Vec<KlSample>,
    pub final_kl: f64,
    /// Points whose bandwidth search did not converge.
    pub unconverged: Vec<usize>,
}

impl TsneResult {
    /// KL divergence of the seeded random layout.
    pub fn initial_kl(&self) -> f64 {
        self.kl_history[0].kl
    }

    /// The recorded KL after exactly `iteration` updates, if sampled.
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl_history
            .iter()
            .find(|s| s.iteration == iteration)
            .map(|s| s.kl)
    }

    /// `iteration,kl` lines with a header.
    pub fn kl_history_csv(&self) -> String {
        let mut out = String::from("iteration,kl\n");
        for s in &self.kl_history {
            out.push_str(&format!("{},{}\n", s.iteration, s.kl));
        }
        out
    }
}

/// Seeded Gaussian initial layout with standard deviation [`INIT_STD`].
pub fn initial_layout(n: usize, out_dims: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_simple_fn((n, out_dims), || normal.sample(&mut rng))
}

/// Embeds the rows of `x` into `config.out_dims` dimensions.
pub fn run_tsne(x: ArrayView2<'_, f64>, config: &TsneConfig) -> Result<TsneResult, TsneError> {
    let (n, d) = x.dim();
    config.validate_for(n)?;
    if d == 0 {
        return Err(TsneError::Config("input has zero columns".into()));
    }

    let distances = pairwise_squared_distances(x)?;
    let calibration = calibrate_affinities(distances.view(), config.perplexity)?;
    drop(distances);
    if !calibration.unconverged.is_empty() {
        warn!(
            "bandwidth search did not converge for {} of {} points",
            calibration.unconverged.len(),
            n
        );
    }
    let p = calibration.affinities.view();
    let exaggerated = p.mapv(|v| v * config.early_exaggeration_factor);

    let mut y = initial_layout(n, config.out_dims, config.seed);
    let mut velocity = Array2::<f64>::zeros((n, config.out_dims));
    let mut grad = Array2::<f64>::zeros((n, config.out_dims));
    let mut gains = Array2::<f64>::ones((n, config.out_dims));
    let mut q = Array2::<f64>::zeros((n, n));
    let mut num = Array2::<f64>::zeros((n, n));
    let mut kl_history = Vec::with_capacity(config.n_iter / config.kl_every + 2);

    for iter in 0..config.n_iter {
        let z = objective::low_dim_affinities_into(y.view(), &mut q, &mut num);
        if !(z > 0.0 && z.is_finite()) {
            return Err(TsneError::Diverged(iter));
        }
        if iter % config.kl_every == 0 {
            let kl = objective::kl_divergence_raw(p, q.view());
            debug!("iteration {}: KL {}", iter, kl);
            kl_history.push(KlSample {
                iteration: iter,
                kl,
            });
        }

        let target = if iter < config.early_exaggeration_iters {
            exaggerated.view()
        } else {
            p
        };
        objective::gradient_into(target, q.view(), num.view(), y.view(), &mut grad);

        let momentum = if iter < config.momentum_switch_iter {
            config.momentum_initial
        } else {
            config.momentum_final
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(TsneError::Diverged(iter));
        }
        if config.adaptive_gains {
            Zip::from(&mut gains)
                .and(&grad)
                .and(&velocity)
                .for_each(|gain, &g, &v| {
                    *gain = if (g > 0.0) != (v > 0.0) {
                        *gain + 0.2
                    } else {
                        *gain * 0.8
                    };
                    *gain = gain.max(MIN_GAIN);
                });
        }
        Zip::from(&mut velocity)
            .and(&grad)
            .and(&gains)
            .for_each(|v, &g, &gain| {
                *v = momentum * *v - config.learning_rate * gain * g;
            });
        y += &velocity;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TsneError::Diverged(iter));
        }
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n > 0");
        y -= &mean;
    }

    objective::low_dim_affinities_into(y.view(), &mut q, &mut num);
    let final_kl = objective::kl_divergence_raw(p, q.view());
    kl_history.push(KlSample {
        iteration: config.n_iter,
        kl: final_kl,
    });

    Ok(TsneResult {
        coords: y,
        kl_history,
        final_kl,
        unconverged: calibration.unconverged,
    })
}
