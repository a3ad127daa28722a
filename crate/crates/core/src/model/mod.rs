//! Graph-convolutional top-K recommender.
//!
//! Each node starts from a base embedding (`E_U x_u` for users, a column of
//! `E_V` for items), sends a message through a shared three-layer MLP, and is
//! re-embedded from the attention-weighted sum of its own message and its
//! one-hop neighbours' messages. A user-item pair is scored by projecting the
//! clipped ReLU of a linear map over the concatenated embeddings.

mod forward;
mod ops;
mod recommend;
mod train;

pub use forward::{loss_and_gradient, objective_value, ModelInputs, Objective};
pub use ops::{aggregate_node, attention_weights, base_embeddings, message, score_pair};
pub use recommend::{recommend_all, recommend_topk, Embeddings, RankedList};
pub use train::{
    sample_negative, sample_triples, train, EpochStats, TrainConfig, TrainOutcome, TrainingTriple,
    DEFAULT_INIT_STD, DEFAULT_NEIGHBOR_CAP, UNIT_INIT_STD,
};

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point element type of model tensors.
pub trait Real:
    ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;

    /// `exp`, possibly approximated to the type's precision.
    #[inline(always)]
    fn fast_exp(self) -> Self {
        self.exp()
    }
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn fast_exp(self) -> f32 {
        exp_f32(self)
    }
}

/// Branch-free single-precision exp (Cody-Waite reduction and a degree-6
/// polynomial), written so that slice loops vectorize. Relative error is a
/// few ulp; inputs are clamped to the finite range.
#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const ROUND: f32 = 12_582_912.0;
    let x = if x < -87.0 { -87.0 } else { x };
    let x = if x > 88.0 { 88.0 } else { x };
    let t = x * std::f32::consts::LOG2_E + ROUND;
    // the low mantissa bits of t hold round(x log2 e)
    let ni = (t.to_bits() as i32).wrapping_sub(ROUND.to_bits() as i32);
    let n = t - ROUND;
    let r = x - n * 0.693_359_4 + n * 2.121_944_4e-4;
    let mut p = 1.987_569_1e-4_f32;
    p = p * r + 1.398_199_9e-3;
    p = p * r + 8.333_452e-3;
    p = p * r + 4.166_579_6e-2;
    p = p * r + 1.666_666_5e-1;
    p = p * r + 5.000_001e-1;
    let y = p * r * r + r + 1.0;
    y * f32::from_bits(((ni + 127) as u32) << 23)
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn f64(self) -> f64 {
        self
    }
}

/// Nonlinearity inside the attention scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionActivation {
    #[default]
    Sigmoid,
    Tanh,
}

impl AttentionActivation {
    pub(crate) fn apply<F: Real>(self, x: F) -> F {
        match self {
            AttentionActivation::Sigmoid => F::one() / (F::one() + (-x).exp()),
            AttentionActivation::Tanh => x.tanh(),
        }
    }

    /// Applies the activation to every entry of `xs`.
    pub(crate) fn apply_slice<F: Real>(self, xs: &mut [F]) {
        let one = F::one();
        let two = one + one;
        match self {
            AttentionActivation::Sigmoid => {
                for x in xs.iter_mut() {
                    *x = one / (one + (-*x).fast_exp());
                }
            }
            AttentionActivation::Tanh => {
                // tanh(x) = 2 sigmoid(2x) - 1
                for x in xs.iter_mut() {
                    *x = two / (one + (-two * *x).fast_exp()) - one;
                }
            }
        }
    }

    /// Derivative expressed through the activation output.
    pub(crate) fn derivative_from_output<F: Real>(self, y: F) -> F {
        match self {
            AttentionActivation::Sigmoid => y * (F::one() - y),
            AttentionActivation::Tanh => F::one() - y * y,
        }
    }
}

/// Every trainable tensor of the recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ModelParams<F> {
    /// `d x d0`.
    pub user_embedding: Array2<F>,
    /// `d x |V|`.
    pub item_embedding: Array2<F>,
    /// Message MLP, three `d x d` layers.
    pub mlp_weights: [Array2<F>; 3],
    pub mlp_biases: [Array1<F>; 3],
    /// Post-aggregation affine map, `d x d`.
    pub agg_weight: Array2<F>,
    pub agg_bias: Array1<F>,
    /// Attention hidden layer over `[message, centre]`, `d x 2d`.
    pub att_weight: Array2<F>,
    pub att_bias: Array1<F>,
    /// Attention output vector.
    pub att_vector: Array1<F>,
    /// Attention output offset (a single entry).
    pub att_offset: Array1<F>,
    /// Pair feature map over `[user, item]`, `d x 2d`.
    pub score_weight: Array2<F>,
    pub score_bias: Array1<F>,
    /// Final projection `h`.
    pub projection: Array1<F>,
}

pub const TENSOR_NAMES: [&str; 17] = [
    "user_embedding",
    "item_embedding",
    "mlp_w0",
    "mlp_w1",
    "mlp_w2",
    "mlp_b0",
    "mlp_b1",
    "mlp_b2",
    "agg_weight",
    "agg_bias",
    "att_weight",
    "att_bias",
    "att_vector",
    "att_offset",
    "score_weight",
    "score_bias",
    "projection",
];

impl<F: Real> ModelParams<F> {
    pub fn zeros(d: usize, d0: usize, num_items: usize) -> Self {
        let sq = || Array2::zeros((d, d));
        let v = || Array1::zeros(d);
        ModelParams {
            user_embedding: Array2::zeros((d, d0)),
            item_embedding: Array2::zeros((d, num_items)),
            mlp_weights: [sq(), sq(), sq()],
            mlp_biases: [v(), v(), v()],
            agg_weight: sq(),
            agg_bias: v(),
            att_weight: Array2::zeros((d, 2 * d)),
            att_bias: v(),
            att_vector: v(),
            att_offset: Array1::zeros(1),
            score_weight: Array2::zeros((d, 2 * d)),
            score_bias: v(),
            projection: v(),
        }
    }

    /// Embedding width d.
    pub fn dim(&self) -> usize {
        self.projection.len()
    }

    pub fn feature_width(&self) -> usize {
        self.user_embedding.ncols()
    }

    pub fn num_items(&self) -> usize {
        self.item_embedding.ncols()
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<ArrayViewD<'_, F>> {
        let [w0, w1, w2] = &self.mlp_weights;
        let [b0, b1, b2] = &self.mlp_biases;
        vec![
            self.user_embedding.view().into_dyn(),
            self.item_embedding.view().into_dyn(),
            w0.view().into_dyn(),
            w1.view().into_dyn(),
            w2.view().into_dyn(),
            b0.view().into_dyn(),
            b1.view().into_dyn(),
            b2.view().into_dyn(),
            self.agg_weight.view().into_dyn(),
            self.agg_bias.view().into_dyn(),
            self.att_weight.view().into_dyn(),
            self.att_bias.view().into_dyn(),
            self.att_vector.view().into_dyn(),
            self.att_offset.view().into_dyn(),
            self.score_weight.view().into_dyn(),
            self.score_bias.view().into_dyn(),
            self.projection.view().into_dyn(),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        let [w0, w1, w2] = &mut self.mlp_weights;
        let [b0, b1, b2] = &mut self.mlp_biases;
        vec![
            self.user_embedding.view_mut().into_dyn(),
            self.item_embedding.view_mut().into_dyn(),
            w0.view_mut().into_dyn(),
            w1.view_mut().into_dyn(),
            w2.view_mut().into_dyn(),
            b0.view_mut().into_dyn(),
            b1.view_mut().into_dyn(),
            b2.view_mut().into_dyn(),
            self.agg_weight.view_mut().into_dyn(),
            self.agg_bias.view_mut().into_dyn(),
            self.att_weight.view_mut().into_dyn(),
            self.att_bias.view_mut().into_dyn(),
            self.att_vector.view_mut().into_dyn(),
            self.att_offset.view_mut().into_dyn(),
            self.score_weight.view_mut().into_dyn(),
            self.score_bias.view_mut().into_dyn(),
            self.projection.view_mut().into_dyn(),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Sum of squares over every tensor.
    pub fn l2_squared(&self) -> F {
        self.tensors()
            .iter()
            .map(|t| t.iter().map(|&x| x * x).sum::<F>())
            .sum()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: F, other: &ModelParams<F>) {
        for (mut a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            Zip::from(&mut a).and(&b).for_each(|x, &y| *x += alpha * y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Element-type conversion.
    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let c2 = |a: &Array2<F>| a.mapv(|x| G::of(x.f64()));
        let c1 = |a: &Array1<F>| a.mapv(|x| G::of(x.f64()));
        ModelParams {
            user_embedding: c2(&self.user_embedding),
            item_embedding: c2(&self.item_embedding),
            mlp_weights: [
                c2(&self.mlp_weights[0]),
                c2(&self.mlp_weights[1]),
                c2(&self.mlp_weights[2]),
            ],
            mlp_biases: [
                c1(&self.mlp_biases[0]),
                c1(&self.mlp_biases[1]),
                c1(&self.mlp_biases[2]),
            ],
            agg_weight: c2(&self.agg_weight),
            agg_bias: c1(&self.agg_bias),
            att_weight: c2(&self.att_weight),
            att_bias: c1(&self.att_bias),
            att_vector: c1(&self.att_vector),
            att_offset: c1(&self.att_offset),
            score_weight: c2(&self.score_weight),
            score_bias: c1(&self.score_bias),
            projection: c1(&self.projection),
        }
    }

    pub(crate) fn check_shapes(&self, d0: usize, num_items: usize) -> Result<()> {
        let d = self.dim();
        let ok = self.user_embedding.dim() == (d, d0)
            && self.item_embedding.dim() == (d, num_items)
            && self.mlp_weights.iter().all(|w| w.dim() == (d, d))
            && self.mlp_biases.iter().all(|b| b.len() == d)
            && self.agg_weight.dim() == (d, d)
            && self.agg_bias.len() == d
            && self.att_weight.dim() == (d, 2 * d)
            && self.att_bias.len() == d
            && self.att_vector.len() == d
            && self.att_offset.len() == 1
            && self.score_weight.dim() == (d, 2 * d)
            && self.score_bias.len() == d;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "parameters do not fit d={d}, d0={d0}, items={num_items}"
            )))
        }
    }
}

/// Draws every entry i.i.d. from N(0, std^2) in [`TENSOR_NAMES`] order.
pub fn init_params<F: Real, R: Rng + ?Sized>(
    d: usize,
    d0: usize,
    num_items: usize,
    std: f64,
    rng: &mut R,
) -> ModelParams<F> {
    let mut p = ModelParams::zeros(d, d0, num_items);
    if std > 0.0 {
        let normal = Normal::new(0.0, std).expect("finite positive std");
        for mut t in p.tensors_mut() {
            for x in t.iter_mut() {
                *x = F::of(normal.sample(rng));
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_shapes() {
        let p: ModelParams<f64> = init_params(60, 44, 1682, 0.1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.user_embedding.dim(), (60, 44));
        assert_eq!(p.item_embedding.dim(), (60, 1682));
        assert_eq!(p.att_weight.dim(), (60, 120));
        assert_eq!(p.tensors().len(), TENSOR_NAMES.len());
        p.check_shapes(44, 1682).unwrap();
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a: ModelParams<f32> = init_params(8, 5, 9, 0.1, &mut ChaCha8Rng::seed_from_u64(4));
        let b: ModelParams<f32> = init_params(8, 5, 9, 0.1, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_std_gives_zero_params() {
        let p: ModelParams<f64> = init_params(4, 3, 5, 0.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p.l2_squared(), 0.0);
    }

    #[test]
    fn add_scaled_and_cast() {
        let mut a: ModelParams<f64> = init_params(3, 2, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let b = a.clone();
        a.add_scaled(-1.0, &b);
        assert_eq!(a.l2_squared(), 0.0);
        let c: ModelParams<f32> = b.cast();
        assert_eq!(c.num_parameters(), b.num_parameters());
    }

    #[test]
    fn fast_exp_is_accurate() {
        for i in -8000..=8000 {
            let x = i as f32 * 0.01;
            let (a, b) = (x.fast_exp() as f64, (x as f64).exp());
            assert!((a - b).abs() <= 4e-7 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn slice_activation_matches_scalar() {
        for act in [AttentionActivation::Sigmoid, AttentionActivation::Tanh] {
            let mut xs: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.3).collect();
            let want: Vec<f64> = xs.iter().map(|&x| act.apply(x)).collect();
            act.apply_slice(&mut xs);
            for (a, b) in xs.iter().zip(&want) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let p: ModelParams<f64> = init_params(3, 2, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let s = serde_json::to_string(&p).unwrap();
        let back: ModelParams<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
