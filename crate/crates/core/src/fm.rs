//! Objective-stage differential privacy for the ranking loss.
//!
//! The pairwise loss `-ln sigmoid(s)` is replaced by its second-order Taylor
//! polynomial around 0. Every monomial of the projection vector `h` (degree 1
//! and 2) receives one Laplace draw at scale `sensitivity / (epsilon * |D|)`,
//! collected in a [`NoisePolynomial`] that is fixed for the whole run.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default objective-stage budget.
pub const DEFAULT_EPSILON: f64 = 0.4;

/// Taylor coefficients of `f(s) = ln(1 + e^{-s})` at 0, orders 0 to 2.
pub const TAYLOR_COEFFICIENTS: [f64; 3] = [std::f64::consts::LN_2, -0.5, 0.125];

/// `ln 2 - s/2 + s^2/8`.
pub fn truncated_bpr_approx(s_bar: f64) -> f64 {
    let [c0, c1, c2] = TAYLOR_COEFFICIENTS;
    c0 + c1 * s_bar + c2 * s_bar * s_bar
}

/// Derivative of [`truncated_bpr_approx`].
pub fn truncated_bpr_grad(s_bar: f64) -> f64 {
    TAYLOR_COEFFICIENTS[1] + 2.0 * TAYLOR_COEFFICIENTS[2] * s_bar
}

/// `-ln sigmoid(s)`, stable for large `|s|`.
pub fn bpr_term(s_bar: f64) -> f64 {
    if s_bar > 0.0 {
        (-s_bar).exp().ln_1p()
    } else {
        -s_bar + s_bar.exp().ln_1p()
    }
}

/// Derivative of [`bpr_term`]: `-sigmoid(-s)`.
pub fn bpr_term_grad(s_bar: f64) -> f64 {
    if s_bar >= 0.0 {
        let e = (-s_bar).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + s_bar.exp())
    }
}

/// Global L1 sensitivity of the truncated loss for projection width `d`: `d + d^2/4`.
pub fn global_sensitivity(d: usize) -> f64 {
    let d = d as f64;
    d + d * d / 4.0
}

/// Laplace scale `sensitivity / (epsilon * dataset_size)`.
pub fn laplace_scale(sensitivity: f64, epsilon: f64, dataset_size: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(domain(format!(
            "global budget must be positive, got {epsilon}"
        )));
    }
    if dataset_size == 0 {
        return Err(domain("dataset size must be at least 1"));
    }
    Ok(sensitivity / (epsilon * dataset_size as f64))
}

/// Inverse-CDF map from `u` in (-1/2, 1/2) to a Laplace(0, scale) variate.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One draw from Laplace(0, scale).
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(domain(format!(
            "Laplace scale must be positive, got {scale}"
        )));
    }
    // random::<f64>() is in [0, 1); reject the endpoint that maps to u = -1/2
    loop {
        let u = rng.random::<f64>() - 0.5;
        if u > -0.5 {
            return Ok(laplace_from_uniform(u, scale));
        }
    }
}

/// Laplace noise on the degree-1 and degree-2 coefficients of the truncated loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePolynomial {
    /// Noise on the monomials `h_m`.
    pub linear: Array1<f64>,
    /// Noise on `h_m h_n`; symmetric, with each upper-triangle entry drawn once.
    pub quadratic: Array2<f64>,
    pub scale: f64,
}

impl NoisePolynomial {
    pub fn zeros(d: usize) -> Self {
        NoisePolynomial {
            linear: Array1::zeros(d),
            quadratic: Array2::zeros((d, d)),
            scale: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// Number of independent draws: `d + d(d+1)/2`.
    pub fn num_coefficients(&self) -> usize {
        let d = self.dim();
        d + d * (d + 1) / 2
    }

    /// `n1 . h + h^T N2 h`.
    pub fn evaluate(&self, h: ArrayView1<'_, f64>) -> f64 {
        self.linear.dot(&h) + h.dot(&self.quadratic.dot(&h))
    }

    /// Gradient of [`NoisePolynomial::evaluate`] in `h`: `n1 + 2 N2 h`.
    pub fn gradient(&self, h: ArrayView1<'_, f64>) -> Array1<f64> {
        &self.linear + &(self.quadratic.dot(&h) * 2.0)
    }
}

/// Draws the run's noise polynomial at scale `delta / (epsilon * dataset_size)`.
pub fn draw_noise_polynomial<R: Rng + ?Sized>(
    d: usize,
    delta: f64,
    epsilon: f64,
    dataset_size: usize,
    rng: &mut R,
) -> Result<NoisePolynomial> {
    if d == 0 {
        return Err(domain("projection width must be at least 1"));
    }
    let scale = laplace_scale(delta, epsilon, dataset_size)?;
    if scale == 0.0 {
        let mut zero = NoisePolynomial::zeros(d);
        zero.scale = 0.0;
        return Ok(zero);
    }
    let mut linear = Array1::zeros(d);
    for m in 0..d {
        linear[m] = sample_laplace(scale, rng)?;
    }
    let mut quadratic = Array2::zeros((d, d));
    for m in 0..d {
        for n in m..d {
            let v = sample_laplace(scale, rng)?;
            quadratic[[m, n]] = v;
            quadratic[[n, m]] = v;
        }
    }
    Ok(NoisePolynomial {
        linear,
        quadratic,
        scale,
    })
}

/// Truncated loss summed over a minibatch plus the noise polynomial weighted
/// by `batch_size / dataset_size`. Regularization is left to the caller.
pub fn perturbed_batch_loss(
    score_diffs: &[f64],
    h: ArrayView1<'_, f64>,
    noise: &NoisePolynomial,
    batch_size: usize,
    dataset_size: usize,
) -> Result<f64> {
    if h.len() != noise.dim() {
        return Err(Error::Dimension(format!(
            "projection has {} entries, noise polynomial {}",
            h.len(),
            noise.dim()
        )));
    }
    if score_diffs.len() != batch_size {
        return Err(Error::Dimension(format!(
            "{} score differences for batch size {batch_size}",
            score_diffs.len()
        )));
    }
    if dataset_size == 0 {
        return Err(domain("dataset size must be at least 1"));
    }
    let data: f64 = score_diffs.iter().map(|&s| truncated_bpr_approx(s)).sum();
    let weight = batch_size as f64 / dataset_size as f64;
    Ok(data + weight * noise.evaluate(h))
}
