//! End-to-end runs: features, perturbation, training, recommendation,
//! ranking metrics and attacks, repeated over seeds and sweep points.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_f1, build_attack_dataset, AttackerKind, Attribute, F1Average};
use crate::data::{
    engineer_features, normalize_numericals, split_per_user, DataSplit, Dataset, FeatureMatrix,
    FeatureSchema, NormalizationStats,
};
use crate::error::{Error, Result};
use crate::ldp::perturb_matrix;
use crate::metrics::{hit_at_k, ndcg_at_k, HitMode};
use crate::model::{train, Embeddings, ModelInputs, ModelParams, TrainConfig, TrainOutcome};

pub const DEFAULT_KS: [usize; 6] = [5, 10, 15, 20, 25, 30];
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;
pub const EPSILON_SWEEP: [f64; 6] = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2];
pub const EPSILON_LOCAL_SWEEP: [f64; 4] = [0.5, 5.0, 10.0, 20.0];
pub const DIM_SWEEP: [f64; 5] = [20.0, 40.0, 60.0, 80.0, 100.0];

/// Stream of the input-stage perturbation.
pub const STREAM_PERTURB: u64 = 1;
/// Stream of initialization, noise and minibatch sampling.
pub const STREAM_TRAIN: u64 = 2;

/// Independent rng stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Which privacy mechanisms a run enables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// No perturbation at all.
    #[serde(rename = "GCN")]
    Gcn,
    /// Feature and objective perturbation.
    #[serde(rename = "GERAI")]
    Gerai,
    /// Objective perturbation only.
    #[serde(rename = "GERAI-NL")]
    GeraiNl,
    /// Feature perturbation only.
    #[serde(rename = "GERAI-NF")]
    GeraiNf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Gcn,
        Variant::Gerai,
        Variant::GeraiNl,
        Variant::GeraiNf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "GCN",
            Variant::Gerai => "GERAI",
            Variant::GeraiNl => "GERAI-NL",
            Variant::GeraiNf => "GERAI-NF",
        }
    }

    /// `config` with this variant's privacy switches.
    pub fn apply(self, config: &TrainConfig) -> TrainConfig {
        let (features, loss) = match self {
            Variant::Gcn => (false, false),
            Variant::Gerai => (true, true),
            Variant::GeraiNl => (false, true),
            Variant::GeraiNf => (true, false),
        };
        TrainConfig {
            use_feature_perturbation: features,
            use_loss_perturbation: loss,
            ..config.clone()
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    EpsilonLocal,
    Dim,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::EpsilonLocal => "epsilon_local",
            SweepAxis::Dim => "dim",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Epsilon => EPSILON_SWEEP.to_vec(),
            SweepAxis::EpsilonLocal => EPSILON_LOCAL_SWEEP.to_vec(),
            SweepAxis::Dim => DIM_SWEEP.to_vec(),
        }
    }

    pub fn apply(self, config: &TrainConfig, value: f64) -> TrainConfig {
        let mut c = config.clone();
        match self {
            SweepAxis::Epsilon => c.epsilon = value,
            SweepAxis::EpsilonLocal => c.epsilon_local = value,
            SweepAxis::Dim => c.dim = value as usize,
        }
        c
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepAxis::Epsilon),
            "epsilon_local" | "epsilon-local" => Ok(SweepAxis::EpsilonLocal),
            "dim" => Ok(SweepAxis::Dim),
            _ => Err(Error::Validation(format!("unknown sweep axis `{s}`"))),
        }
    }
}

/// What to run and what to measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub variants: Vec<Variant>,
    /// `None` runs the base configuration only.
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub attributes: Vec<Attribute>,
    pub attackers: Vec<AttackerKind>,
    /// Ks at which attacks run; empty means every K.
    pub attack_ks: Vec<usize>,
    pub f1_average: F1Average,
    pub hit_mode: HitMode,
    pub split_ratio: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            variants: vec![Variant::Gerai],
            sweep: None,
            ks: DEFAULT_KS.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            attributes: Attribute::ALL.to_vec(),
            attackers: vec![AttackerKind::Nn],
            attack_ks: Vec::new(),
            f1_average: F1Average::Weighted,
            hit_mode: HitMode::User,
            split_ratio: DEFAULT_SPLIT_RATIO,
        }
    }
}

impl ExperimentPlan {
    fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.seeds.is_empty() || self.ks.is_empty() {
            return Err(Error::Validation(
                "a plan needs at least one variant, seed and K".into(),
            ));
        }
        if self.ks.contains(&0) {
            return Err(Error::Validation("K must be positive".into()));
        }
        Ok(())
    }

    fn sorted_ks(&self) -> Vec<usize> {
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    fn attacked_ks(&self) -> Vec<usize> {
        let ks = self.sorted_ks();
        if self.attack_ks.is_empty() {
            ks
        } else {
            ks.into_iter()
                .filter(|k| self.attack_ks.contains(k))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub k: usize,
    pub hit: Summary,
    pub ndcg: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attribute: Attribute,
    pub attacker: AttackerKind,
    pub k: usize,
    pub f1: Summary,
}

/// Metrics of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Aligned with the report's sorted K list.
    pub hit: Vec<f64>,
    pub ndcg: Vec<f64>,
    /// Aligned with the report's attack rows.
    pub f1: Vec<f64>,
    pub final_loss: Option<f64>,
}

/// Aggregated metrics of one variant at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: Variant,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: Option<f64>,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub ranking: Vec<RankingRow>,
    pub attack: Vec<AttackRow>,
    pub runs: Vec<RunMetrics>,
    pub wall_clock_seconds: f64,
}

impl MetricsReport {
    pub fn ranking_at(&self, k: usize) -> Option<&RankingRow> {
        self.ranking.iter().find(|r| r.k == k)
    }

    pub fn f1_at(&self, attribute: Attribute, attacker: AttackerKind, k: usize) -> Option<Summary> {
        self.attack
            .iter()
            .find(|r| r.attribute == attribute && r.attacker == attacker && r.k == k)
            .map(|r| r.f1)
    }

    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> MetricsReport {
        MetricsReport {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Train split and normalized (unperturbed) user features of one seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: DataSplit,
    pub features: FeatureMatrix,
    pub schema: FeatureSchema,
    pub stats: NormalizationStats,
}

/// Splits the interactions and builds normalized features from the training
/// part only.
pub fn prepare(data: &Dataset, split_ratio: f64, seed: u64) -> Result<Prepared> {
    let split = split_per_user(&data.graph, split_ratio, seed);
    let (raw, schema) = engineer_features(&split.train, &data.profiles)?;
    let (features, stats) = normalize_numericals(&raw, &schema)?;
    Ok(Prepared {
        split,
        features,
        schema,
        stats,
    })
}

/// Features the recommender sees under `config`: locally perturbed when the
/// input-stage mechanism is on.
pub fn model_features(
    prepared: &Prepared,
    config: &TrainConfig,
    seed: u64,
) -> Result<FeatureMatrix> {
    if config.use_feature_perturbation {
        perturb_matrix(
            &prepared.features,
            &prepared.schema,
            config.epsilon_local,
            &mut stream_rng(seed, STREAM_PERTURB),
        )
        .map_err(|e| e.in_stage("perturb"))
    } else {
        Ok(prepared.features.clone())
    }
}

pub fn to_f32(m: &FeatureMatrix) -> Array2<f32> {
    m.values.mapv(|v| v as f32)
}

/// Trains in single precision on the training graph, sampling negatives
/// against the full graph.
pub fn train_model(
    data: &Dataset,
    split: &DataSplit,
    features: &FeatureMatrix,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome<f32>> {
    let x = to_f32(features);
    train(
        &split.train,
        &data.graph,
        x.view(),
        config,
        &mut stream_rng(seed, STREAM_TRAIN),
    )
    .map_err(|e| e.in_stage("train"))
}

/// Top-`k` item lists of every user, excluding their training items.
pub fn recommend_lists(
    params: &ModelParams<f32>,
    train_graph: &crate::data::BipartiteGraph,
    features: &FeatureMatrix,
    config: &TrainConfig,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    let x = to_f32(features);
    let inputs = ModelInputs {
        graph: train_graph,
        features: x.view(),
        activation: config.activation,
        neighbor_cap: None,
    };
    let emb = Embeddings::compute(params, &inputs).map_err(|e| e.in_stage("recommend"))?;
    Ok((0..train_graph.num_users)
        .map(|u| emb.rank(u, train_graph.user_neighbors(u), k).items)
        .collect())
}

/// Attribute labels of every user.
pub fn labels(data: &Dataset, attribute: Attribute) -> Vec<Option<usize>> {
    data.profiles
        .iter()
        .map(|p| Some(attribute.label(p)))
        .collect()
}

/// F1 of an attacker that sees full histories plus the first `k` items of
/// each list.
pub fn attack_at_k(
    data: &Dataset,
    lists: &[Vec<usize>],
    k: usize,
    attribute: Attribute,
    attacker: AttackerKind,
    average: F1Average,
    seed: u64,
) -> Result<f64> {
    let recs: Vec<Vec<usize>> = lists.iter().map(|l| l[..k.min(l.len())].to_vec()).collect();
    let dataset = build_attack_dataset(
        &data.graph,
        &recs,
        &labels(data, attribute),
        attribute.num_classes(),
    )?;
    attack_f1(&dataset, attacker, average, seed).map_err(|e| e.in_stage("attack"))
}

fn attack_grid(plan: &ExperimentPlan) -> Vec<(Attribute, AttackerKind, usize)> {
    let mut rows = Vec::new();
    for &attribute in &plan.attributes {
        for &attacker in &plan.attackers {
            for k in plan.attacked_ks() {
                rows.push((attribute, attacker, k));
            }
        }
    }
    rows
}

/// One seed of one configuration.
pub fn run_single(
    data: &Dataset,
    plan: &ExperimentPlan,
    config: &TrainConfig,
    seed: u64,
) -> Result<RunMetrics> {
    let ks = plan.sorted_ks();
    let prepared = prepare(data, plan.split_ratio, seed).map_err(|e| e.in_stage("features"))?;
    let features = model_features(&prepared, config, seed)?;
    let config = TrainConfig {
        seed,
        ..config.clone()
    };
    let outcome = train_model(data, &prepared.split, &features, &config, seed)?;
    let k_max = *ks.last().expect("validated");
    let lists = recommend_lists(
        &outcome.params,
        &prepared.split.train,
        &features,
        &config,
        k_max,
    )?;

    let mut hit = Vec::with_capacity(ks.len());
    let mut ndcg = Vec::with_capacity(ks.len());
    for &k in &ks {
        hit.push(
            hit_at_k(&lists, &prepared.split.test, k, plan.hit_mode)
                .map_err(|e| e.in_stage("evaluate"))?,
        );
        ndcg.push(ndcg_at_k(&lists, &prepared.split.test, k).map_err(|e| e.in_stage("evaluate"))?);
    }
    let mut f1 = Vec::new();
    for (attribute, attacker, k) in attack_grid(plan) {
        f1.push(attack_at_k(
            data,
            &lists,
            k,
            attribute,
            attacker,
            plan.f1_average,
            seed,
        )?);
    }
    Ok(RunMetrics {
        seed,
        hit,
        ndcg,
        f1,
        final_loss: outcome.history.last().map(|s| s.mean_loss),
    })
}

/// Runs every seed of one configuration and aggregates.
pub fn run_point(
    data: &Dataset,
    plan: &ExperimentPlan,
    variant: Variant,
    base: &TrainConfig,
    sweep: Option<(SweepAxis, f64)>,
) -> Result<MetricsReport> {
    plan.validate()?;
    let start = Instant::now();
    let mut config = variant.apply(base);
    if let Some((axis, value)) = sweep {
        config = axis.apply(&config, value);
    }
    config.validate()?;
    let mut runs = Vec::with_capacity(plan.seeds.len());
    for &seed in &plan.seeds {
        log::info!("{variant} seed {seed}");
        runs.push(run_single(data, plan, &config, seed)?);
    }
    let ks = plan.sorted_ks();
    let column = |f: &dyn Fn(&RunMetrics) -> f64| -> Summary {
        Summary::of(&runs.iter().map(f).collect::<Vec<_>>())
    };
    let ranking = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| RankingRow {
            k,
            hit: column(&|r| r.hit[i]),
            ndcg: column(&|r| r.ndcg[i]),
        })
        .collect();
    let attack = attack_grid(plan)
        .into_iter()
        .enumerate()
        .map(|(i, (attribute, attacker, k))| AttackRow {
            attribute,
            attacker,
            k,
            f1: column(&|r| r.f1[i]),
        })
        .collect();
    Ok(MetricsReport {
        variant,
        sweep_axis: sweep.map(|s| s.0),
        sweep_value: sweep.map(|s| s.1),
        config,
        seeds: plan.seeds.clone(),
        ranking,
        attack,
        runs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Every variant at every sweep point; reports share the seed list.
pub fn run_experiment(
    data: &Dataset,
    plan: &ExperimentPlan,
    base: &TrainConfig,
) -> Result<Vec<MetricsReport>> {
    plan.validate()?;
    let points: Vec<Option<(SweepAxis, f64)>> = match &plan.sweep {
        None => vec![None],
        Some((axis, values)) => values.iter().map(|&v| Some((*axis, v))).collect(),
    };
    let mut reports = Vec::new();
    for point in points {
        for &variant in &plan.variants {
            reports.push(run_point(data, plan, variant, base, point)?);
        }
    }
    Ok(reports)
}

pub const CSV_HEADER: [&str; 10] = [
    "variant",
    "sweep_axis",
    "sweep_value",
    "k",
    "metric",
    "attribute",
    "attacker",
    "mean",
    "std",
    "seeds",
];

/// One CSV row per (report, K, metric).
pub fn write_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        let axis = r
            .sweep_axis
            .map(|a| a.name().to_string())
            .unwrap_or_default();
        let value = r.sweep_value.map(|v| v.to_string()).unwrap_or_default();
        let seeds = r.seeds.len().to_string();
        let mut row = |k: usize, metric: &str, attribute: &str, attacker: &str, s: Summary| {
            w.write_record([
                r.variant.name(),
                &axis,
                &value,
                &k.to_string(),
                metric,
                attribute,
                attacker,
                &s.mean.to_string(),
                &s.std.to_string(),
                &seeds,
            ])
        };
        for rank in &r.ranking {
            row(rank.k, "hit", "", "", rank.hit)?;
            row(rank.k, "ndcg", "", "", rank.ndcg)?;
        }
        for a in &r.attack {
            row(a.k, "f1", a.attribute.name(), a.attacker.name(), a.f1)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, reports)?;
    Ok(())
}

/// Attribute x method x K table of mean attacker F1.
pub fn write_f1_table<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["attribute", "method", "sweep_value", "attacker", "k", "f1"])?;
    let mut rows: Vec<(Attribute, &str, Option<f64>, AttackerKind, usize, f64)> = reports
        .iter()
        .flat_map(|r| {
            r.attack.iter().map(move |a| {
                (
                    a.attribute,
                    r.variant.name(),
                    r.sweep_value,
                    a.attacker,
                    a.k,
                    a.f1.mean,
                )
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.0, a.1, a.3.name(), a.4)
            .cmp(&(b.0, b.1, b.3.name(), b.4))
            .then(a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))
    });
    for (attribute, method, value, attacker, k, f1) in rows {
        w.write_record([
            attribute.name(),
            method,
            &value.map(|v| v.to_string()).unwrap_or_default(),
            attacker.name(),
            &k.to_string(),
            &f1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
