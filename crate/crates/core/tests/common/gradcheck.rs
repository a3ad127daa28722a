//! Central finite differences against the analytic gradient.

use ndarray::Array2;
use privrec::data::BipartiteGraph;
use privrec::fm::{draw_noise_polynomial, global_sensitivity};
use privrec::model::{
    init_params, loss_and_gradient, objective_value, AttentionActivation, ModelInputs, ModelParams,
    Objective, TrainingTriple,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub graph: BipartiteGraph,
    pub features: Array2<f64>,
    pub triples: Vec<TrainingTriple>,
}

pub fn instance(seed: u64, users: usize, items: usize, d0: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..users {
        edges.push((u, rng.random_range(0..items - 1), 3));
        for v in 0..items - 1 {
            if rng.random_bool(0.4) {
                edges.push((u, v, 4));
            }
        }
    }
    let graph = BipartiteGraph::from_edges(users, items, edges).unwrap();
    let features = Array2::from_shape_fn((users, d0), |_| rng.random_range(-1.0..1.0));
    let mut triples = Vec::new();
    for (u, v) in graph.edges() {
        let negative = (0..items).find(|&w| !graph.contains(u, w)).unwrap();
        triples.push(TrainingTriple {
            user: u,
            positive: v,
            negative,
        });
    }
    Instance {
        graph,
        features,
        triples,
    }
}

/// Largest per-tensor relative error between analytic and central-difference
/// gradients.
pub fn worst_relative_error(
    params: &ModelParams<f64>,
    inputs: &ModelInputs<'_, f64>,
    triples: &[TrainingTriple],
    objective: Objective<'_>,
) -> f64 {
    let gamma = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, grads) =
        loss_and_gradient(params, inputs, triples, objective, gamma, &mut rng).unwrap();
    let analytic: Vec<Vec<f64>> = grads
        .tensors()
        .iter()
        .map(|t| t.iter().copied().collect())
        .collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let n_tensors = analytic.len();
    for t in 0..n_tensors {
        let len = analytic[t].len();
        let mut numeric = vec![0.0; len];
        for i in 0..len {
            let mut plus = params.clone();
            *plus.tensors_mut()[t].iter_mut().nth(i).unwrap() += h;
            let mut minus = params.clone();
            *minus.tensors_mut()[t].iter_mut().nth(i).unwrap() -= h;
            let fp = objective_value(&plus, inputs, triples, objective, gamma, &mut rng).unwrap();
            let fm = objective_value(&minus, inputs, triples, objective, gamma, &mut rng).unwrap();
            numeric[i] = (fp - fm) / (2.0 * h);
        }
        let diff: f64 = analytic[t]
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = analytic[t]
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = if scale < 1e-12 { diff } else { diff / scale };
        worst = worst.max(rel);
    }
    worst
}

/// Worst error over plain and perturbed objectives and both attention
/// activations for one random instance of width `d`.
pub fn check_instance(seed: u64, d: usize) -> f64 {
    let inst = instance(seed, 4, 5, 3);
    let params: ModelParams<f64> =
        init_params(d, 3, 5, 0.7, &mut ChaCha8Rng::seed_from_u64(seed + 100));
    let noise = draw_noise_polynomial(
        d,
        global_sensitivity(d),
        0.4,
        50,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for activation in [AttentionActivation::Sigmoid, AttentionActivation::Tanh] {
        let inputs = ModelInputs {
            graph: &inst.graph,
            features: inst.features.view(),
            activation,
            neighbor_cap: None,
        };
        let perturbed = Objective::Perturbed {
            noise: &noise,
            dataset_size: 50,
        };
        for objective in [Objective::Bpr, perturbed] {
            worst = worst.max(worst_relative_error(
                &params,
                &inputs,
                &inst.triples,
                objective,
            ));
        }
    }
    worst
}
