//! Input-stage local differential privacy for user feature vectors.
//!
//! Numerical scalars go through the piecewise mechanism, categorical one-hots
//! through optimized unary encoding, and [`perturb_features`] combines the two
//! over a random subset of `zeta` features so each one gets budget
//! `epsilon / zeta`.

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureMatrix, FeatureSchema};
use crate::error::{domain, Error, Result};

/// Default input-stage budget.
pub const DEFAULT_EPSILON_LOCAL: f64 = 20.0;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && !epsilon.is_nan() {
        Ok(())
    } else {
        Err(domain(format!(
            "privacy budget must be positive, got {epsilon}"
        )))
    }
}

/// Output range and densities of the piecewise mechanism at one budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseParams {
    pub epsilon: f64,
    /// Output bound: x_hat is always in [-c, c].
    pub c: f64,
    /// Density on the high-probability interval.
    pub p: f64,
}

/// Piecewise-mechanism constants for budget `epsilon`.
pub fn piecewise_params(epsilon: f64) -> Result<PiecewiseParams> {
    check_epsilon(epsilon)?;
    let half = (epsilon / 2.0).exp();
    let c = if half.is_infinite() {
        1.0
    } else {
        (half + 1.0) / (half - 1.0)
    };
    let p = (epsilon.exp() - half) / (2.0 * half + 2.0);
    Ok(PiecewiseParams { epsilon, c, p })
}

impl PiecewiseParams {
    pub fn left(&self, x: f64) -> f64 {
        (self.c + 1.0) / 2.0 * x - (self.c - 1.0) / 2.0
    }

    pub fn right(&self, x: f64) -> f64 {
        self.left(x) + self.c - 1.0
    }

    /// Probability that the output lands in `[left(x), right(x)]`.
    pub fn center_probability(&self) -> f64 {
        let half = (self.epsilon / 2.0).exp();
        if half.is_infinite() {
            1.0
        } else {
            half / (half + 1.0)
        }
    }

    /// Output density at `y` given input `x`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        if y < -self.c || y > self.c {
            0.0
        } else if y >= self.left(x) && y <= self.right(x) {
            self.p
        } else {
            self.p / self.epsilon.exp()
        }
    }

    pub fn perturb<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(domain(format!("piecewise input {x} outside [-1, 1]")));
        }
        let (l, r) = (self.left(x), self.right(x));
        let xi: f64 = rng.random();
        if xi < self.center_probability() {
            return Ok(l + (r - l) * rng.random::<f64>());
        }
        // the two side pieces have equal density, so sample over their joint length
        let left_len = l + self.c;
        let total = left_len + (self.c - r);
        let y = total * rng.random::<f64>();
        Ok(if y < left_len {
            -self.c + y
        } else {
            r + (y - left_len)
        })
    }
}

/// One draw of the piecewise mechanism.
pub fn piecewise_perturb<R: Rng + ?Sized>(x: f64, epsilon: f64, rng: &mut R) -> Result<f64> {
    piecewise_params(epsilon)?.perturb(x, rng)
}

/// Bit probabilities of optimized unary encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnaryEncoding {
    /// Pr[output 1 | input bit 1].
    pub keep_one: f64,
    /// Pr[output 1 | input bit 0].
    pub flip_zero: f64,
}

impl UnaryEncoding {
    pub fn new(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(UnaryEncoding {
            keep_one: 0.5,
            flip_zero: 1.0 / (epsilon.exp() + 1.0),
        })
    }

    pub fn perturb_bit<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> bool {
        let p = if bit { self.keep_one } else { self.flip_zero };
        rng.random::<f64>() < p
    }
}

/// Resamples every bit of a one-hot vector independently.
pub fn rr_perturb_onehot<R: Rng + ?Sized>(
    onehot: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let ones = onehot.iter().filter(|&&b| b).count();
    if ones != 1 {
        return Err(domain(format!(
            "expected a one-hot vector, found {ones} set bits"
        )));
    }
    let enc = UnaryEncoding::new(epsilon)?;
    Ok(onehot.iter().map(|&b| enc.perturb_bit(b, rng)).collect())
}

/// Number of features perturbed per user: `max(1, min(d', floor(epsilon / 2.5)))`.
pub fn choose_zeta(epsilon: f64, d_prime: usize) -> usize {
    let by_budget = (epsilon / 2.5).floor();
    let by_budget = if by_budget >= 1.0 {
        by_budget as usize
    } else {
        0
    };
    by_budget.min(d_prime).max(1)
}

/// A perturbed user vector and the feature indices that were kept.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedVector {
    pub values: Array1<f64>,
    /// Selected feature indices in ascending order.
    pub selected: Vec<usize>,
}

/// Perturbs `zeta` randomly chosen features of `x` with budget `epsilon / zeta`
/// each; every other feature is masked to zero.
pub fn perturb_features<R: Rng + ?Sized>(
    x: ArrayView1<'_, f64>,
    schema: &FeatureSchema,
    epsilon: f64,
    rng: &mut R,
) -> Result<PerturbedVector> {
    check_epsilon(epsilon)?;
    if x.len() != schema.d0() {
        return Err(domain(format!(
            "vector width {} does not match schema width {}",
            x.len(),
            schema.d0()
        )));
    }
    let d_prime = schema.d_prime();
    let zeta = choose_zeta(epsilon, d_prime);
    let per_feature = epsilon / zeta as f64;
    let scale = d_prime as f64 / zeta as f64;
    let pm = piecewise_params(per_feature)?;
    let oue = UnaryEncoding::new(per_feature)?;

    let mut selected = sample_indices(rng, d_prime, zeta).into_vec();
    selected.sort_unstable();

    let mut out = Array1::zeros(schema.d0());
    for &i in &selected {
        let f = &schema.features()[i];
        match f.kind {
            FeatureKind::Numerical => {
                let v = pm.perturb(x[f.offset], rng).map_err(|e| match e {
                    Error::Domain(m) => domain(format!("feature {}: {m}", f.name)),
                    other => other,
                })?;
                out[f.offset] = scale * v;
            }
            FeatureKind::Categorical => {
                let seg = x.slice(ndarray::s![f.offset..f.offset + f.width]);
                let bits: Vec<bool> = seg.iter().map(|&v| v == 1.0).collect();
                if bits.iter().filter(|&&b| b).count() != 1
                    || seg.iter().any(|&v| v != 0.0 && v != 1.0)
                {
                    return Err(domain(format!("feature {} is not one-hot", f.name)));
                }
                for (j, b) in bits.into_iter().enumerate() {
                    if oue.perturb_bit(b, rng) {
                        out[f.offset + j] = 1.0;
                    }
                }
            }
        }
    }
    Ok(PerturbedVector {
        values: out,
        selected,
    })
}

/// Perturbs every user row once, in row order, from a single rng stream.
pub fn perturb_matrix<R: Rng + ?Sized>(
    matrix: &FeatureMatrix,
    schema: &FeatureSchema,
    epsilon: f64,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    let mut out = FeatureMatrix::zeros(matrix.num_users(), matrix.d0());
    for u in 0..matrix.num_users() {
        let p = perturb_features(matrix.row(u), schema, epsilon, rng)?;
        out.values.row_mut(u).assign(&p.values);
    }
    Ok(out)
}

/// Equal-width histogram bins over `[lo, hi]`; `hi` falls in the last bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn index(&self, y: f64) -> Option<usize> {
        if y < self.lo || y > self.hi || self.count == 0 {
            return None;
        }
        let k = ((y - self.lo) / (self.hi - self.lo) * self.count as f64) as usize;
        Some(k.min(self.count - 1))
    }
}

/// Bins with empirical mass below this fraction (under either input) are ignored.
pub const LDP_RATIO_MASS_FLOOR: f64 = 1e-3;

/// Largest ratio of empirical output-bin masses between inputs `a` and `b`,
/// taken in both directions.
pub fn empirical_ldp_ratio<T, R, F>(
    mut mechanism: F,
    a: &T,
    b: &T,
    bins: Bins,
    trials: usize,
    rng: &mut R,
) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(&T, &mut R) -> f64,
{
    let mut hist = |input: &T, rng: &mut R| {
        let mut h = vec![0usize; bins.count];
        for _ in 0..trials {
            if let Some(k) = bins.index(mechanism(input, rng)) {
                h[k] += 1;
            }
        }
        h
    };
    let ha = hist(a, rng);
    let hb = hist(b, rng);
    let n = trials as f64;
    let mut worst: f64 = 1.0;
    for (&ca, &cb) in ha.iter().zip(&hb) {
        let (pa, pb) = (ca as f64 / n, cb as f64 / n);
        if pa < LDP_RATIO_MASS_FLOOR || pb < LDP_RATIO_MASS_FLOOR {
            continue;
        }
        worst = worst.max(pa / pb).max(pb / pa);
    }
    worst
}
