use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::forward::{loss_and_gradient, ModelInputs, Objective};
use super::{init_params, AttentionActivation, ModelParams, Real};
use crate::data::BipartiteGraph;
use crate::error::{Error, Result};
use crate::fm::{draw_noise_polynomial, global_sensitivity, NoisePolynomial, DEFAULT_EPSILON};
use crate::ldp::DEFAULT_EPSILON_LOCAL;

pub const DEFAULT_INIT_STD: f64 = 0.1;
pub const UNIT_INIT_STD: f64 = 1.0;
pub const DEFAULT_NEIGHBOR_CAP: usize = 200;

/// Hyperparameters and privacy switches of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Passes over the positive training edges.
    pub epochs: usize,
    pub gamma: f64,
    pub use_feature_perturbation: bool,
    pub use_loss_perturbation: bool,
    /// Objective-stage budget.
    pub epsilon: f64,
    /// Input-stage budget.
    pub epsilon_local: f64,
    pub seed: u64,
    pub init_std: f64,
    /// Neighbour subsampling cap during training; 0 disables it.
    pub neighbor_cap: usize,
    pub activation: AttentionActivation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 60,
            lr: 0.005,
            batch_size: 64,
            epochs: 30,
            gamma: 0.01,
            use_feature_perturbation: true,
            use_loss_perturbation: true,
            epsilon: DEFAULT_EPSILON,
            epsilon_local: DEFAULT_EPSILON_LOCAL,
            seed: 1,
            init_std: DEFAULT_INIT_STD,
            neighbor_cap: DEFAULT_NEIGHBOR_CAP,
            activation: AttentionActivation::Sigmoid,
        }
    }
}

impl TrainConfig {
    /// Non-private baseline: both perturbations off.
    pub fn non_private() -> Self {
        TrainConfig {
            use_feature_perturbation: false,
            use_loss_perturbation: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim as f64),
            ("lr", self.lr),
            ("batch_size", self.batch_size as f64),
            ("epsilon", self.epsilon),
            ("epsilon_local", self.epsilon_local),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.gamma >= 0.0) || !(self.init_std >= 0.0) {
            return Err(Error::Validation(
                "gamma and init_std must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn cap(&self) -> Option<usize> {
        (self.neighbor_cap > 0).then_some(self.neighbor_cap)
    }
}

/// A user, one of their training items and an item they never interacted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Uniform item outside `N(u)` in `exclude`, by rejection.
pub fn sample_negative<R: Rng + ?Sized>(
    exclude: &BipartiteGraph,
    user: usize,
    rng: &mut R,
) -> Result<usize> {
    if exclude.degree(user) >= exclude.num_items {
        return Err(Error::NoNegative(user));
    }
    loop {
        let v = rng.random_range(0..exclude.num_items);
        if !exclude.contains(user, v) {
            return Ok(v);
        }
    }
}

/// `count` triples with positives drawn uniformly (with replacement) from the
/// edges of `train` and negatives outside the user's items in `exclude`.
pub fn sample_triples<R: Rng + ?Sized>(
    train: &BipartiteGraph,
    exclude: &BipartiteGraph,
    count: usize,
    rng: &mut R,
) -> Result<Vec<TrainingTriple>> {
    let edges: Vec<(usize, usize)> = train.edges().collect();
    if edges.is_empty() && count > 0 {
        return Err(Error::Validation("training graph has no edges".into()));
    }
    (0..count)
        .map(|_| {
            let (user, positive) = edges[rng.random_range(0..edges.len())];
            let negative = sample_negative(exclude, user, rng)?;
            Ok(TrainingTriple {
                user,
                positive,
                negative,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean objective per triple, regularizer excluded.
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub params: ModelParams<F>,
    /// Noise polynomial the objective was perturbed with, if any.
    pub noise: Option<NoisePolynomial>,
    pub history: Vec<EpochStats>,
}

/// Minibatch SGD over the training edges.
///
/// `exclude` is the graph negatives must avoid (normally the full graph).
/// `features` are used as given; perturb them beforehand when the input-stage
/// mechanism is on. Initialization, the noise polynomial, edge shuffling,
/// negatives and neighbour subsampling all draw from `rng`, in that order.
pub fn train<F: Real, R: Rng + ?Sized>(
    train_graph: &BipartiteGraph,
    exclude: &BipartiteGraph,
    features: ArrayView2<'_, F>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainOutcome<F>> {
    config.validate()?;
    let d = config.dim;
    let mut params: ModelParams<F> = init_params(
        d,
        features.ncols(),
        train_graph.num_items,
        config.init_std,
        rng,
    );
    let mut positives: Vec<(usize, usize)> = train_graph.edges().collect();
    let dataset_size = positives.len();
    let noise = if config.use_loss_perturbation {
        Some(draw_noise_polynomial(
            d,
            global_sensitivity(d),
            config.epsilon,
            dataset_size,
            rng,
        )?)
    } else {
        None
    };
    let objective = match &noise {
        Some(noise) => Objective::Perturbed {
            noise,
            dataset_size,
        },
        None => Objective::Bpr,
    };
    let inputs = ModelInputs {
        graph: train_graph,
        features,
        activation: config.activation,
        neighbor_cap: config.cap(),
    };
    inputs.check(&params)?;

    let lr = F::of(-config.lr);
    let mut history = Vec::with_capacity(config.epochs);
    let mut triples = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        positives.shuffle(rng);
        let mut total = 0.0;
        for (step, chunk) in positives.chunks(config.batch_size).enumerate() {
            triples.clear();
            for &(user, positive) in chunk {
                let negative = sample_negative(exclude, user, rng)?;
                triples.push(TrainingTriple {
                    user,
                    positive,
                    negative,
                });
            }
            let (loss, grads) =
                loss_and_gradient(&params, &inputs, &triples, objective, config.gamma, rng)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence { epoch, step, loss });
            }
            total += loss - config.gamma * params.l2_squared().f64();
            params.add_scaled(lr, &grads);
        }
        let stats = EpochStats {
            epoch,
            mean_loss: total / dataset_size.max(1) as f64,
        };
        log::info!("epoch {} mean loss {:.6}", epoch, stats.mean_loss);
        history.push(stats);
    }
    Ok(TrainOutcome {
        params,
        noise,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(edges: &[(usize, usize)], nu: usize, ni: usize) -> BipartiteGraph {
        BipartiteGraph::from_edges(nu, ni, edges.iter().map(|&(u, v)| (u, v, 4))).unwrap()
    }

    #[test]
    fn forced_negative() {
        let g = graph(&[(0, 0)], 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert_eq!(sample_negative(&g, 0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn saturated_user_has_no_negative() {
        let g = graph(&[(0, 0), (0, 1)], 1, 2);
        assert!(matches!(
            sample_negative(&g, 0, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::NoNegative(0))
        ));
    }

    #[test]
    fn negatives_uniform_over_eligible() {
        let g = graph(&[(0, 0), (0, 2)], 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for t in sample_triples(&g, &g, n, &mut rng).unwrap() {
            counts[t.negative] += 1;
        }
        assert_eq!(counts[0] + counts[2], 0);
        for v in [1, 3, 4] {
            let share = counts[v] as f64 / n as f64;
            assert!((share - 1.0 / 3.0).abs() < 0.01, "item {v}: {share}");
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let g = graph(&[(0, 0), (1, 1)], 2, 3);
        let x = ndarray::Array2::<f64>::ones((2, 2));
        let cfg = TrainConfig {
            dim: 3,
            epochs: 0,
            ..TrainConfig::non_private()
        };
        let out = train(&g, &g, x.view(), &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let init: ModelParams<f64> =
            init_params(3, 2, 3, cfg.init_std, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(out.params, init);
        assert!(out.history.is_empty());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig {
            lr: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
