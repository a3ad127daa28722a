//! Attribute inference attacks on recommendation outputs.
//!
//! An attacker sees, per user, the multiset of items in the interaction
//! history plus the recommended items, and predicts a private attribute.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BipartiteGraph, UserProfile, NUM_AGE_BUCKETS, NUM_GENDERS, NUM_OCCUPATIONS};
use crate::error::{Error, Result};

pub const NN_HIDDEN: usize = 100;
pub const NN_LEARNING_RATE: f32 = 0.01;
pub const NN_EPOCHS: usize = 200;
pub const NN_BATCH: usize = 32;
pub const KNN_NEIGHBORS: usize = 5;

/// Private attribute an attacker targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Age,
    Gender,
    Occupation,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Age, Attribute::Gender, Attribute::Occupation];

    pub fn num_classes(self) -> usize {
        match self {
            Attribute::Age => NUM_AGE_BUCKETS,
            Attribute::Gender => NUM_GENDERS,
            Attribute::Occupation => NUM_OCCUPATIONS,
        }
    }

    pub fn label(self, profile: &UserProfile) -> usize {
        match self {
            Attribute::Age => profile.age_bucket(),
            Attribute::Gender => profile.gender as usize,
            Attribute::Occupation => profile.occupation as usize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Age => "age",
            Attribute::Gender => "gender",
            Attribute::Occupation => "occupation",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown attribute `{s}`")))
    }
}

/// Attacker model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerKind {
    /// Input, one ReLU hidden layer of width 100, softmax output.
    Nn,
    Knn,
    Nb,
    Logreg,
}

impl AttackerKind {
    pub const ALL: [AttackerKind; 4] = [
        AttackerKind::Nn,
        AttackerKind::Knn,
        AttackerKind::Nb,
        AttackerKind::Logreg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackerKind::Nn => "nn",
            AttackerKind::Knn => "knn",
            AttackerKind::Nb => "nb",
            AttackerKind::Logreg => "logreg",
        }
    }
}

impl fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AttackerKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown attacker `{s}`")))
    }
}

/// One user's attacker input, stored sparsely, and their label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackExample {
    pub user: usize,
    /// `(item, count)` with count 1 or 2, sorted by item.
    pub input: Vec<(usize, u8)>,
    pub label: usize,
}

impl AttackExample {
    pub fn dense(&self, width: usize) -> Vec<u8> {
        let mut v = vec![0; width];
        for &(i, c) in &self.input {
            v[i] = c;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackDataset {
    /// Input width (number of items).
    pub width: usize,
    pub num_classes: usize,
    pub examples: Vec<AttackExample>,
}

impl AttackDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> AttackDataset {
        AttackDataset {
            width: self.width,
            num_classes: self.num_classes,
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// One example per user with a label: history counts plus recommendation
/// counts. `labels[u] = None` skips user `u` with a warning.
pub fn build_attack_dataset(
    history: &BipartiteGraph,
    recs: &[Vec<usize>],
    labels: &[Option<usize>],
    num_classes: usize,
) -> Result<AttackDataset> {
    let n = history.num_users;
    if recs.len() != n || labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} users, {} recommendation lists, {} labels",
            n,
            recs.len(),
            labels.len()
        )));
    }
    let mut examples = Vec::with_capacity(n);
    let mut skipped = 0;
    for u in 0..n {
        let Some(label) = labels[u] else {
            skipped += 1;
            continue;
        };
        if label >= num_classes {
            return Err(Error::Validation(format!(
                "label {label} of user {u} out of range"
            )));
        }
        let mut counts: Vec<(usize, u8)> =
            history.user_neighbors(u).iter().map(|&v| (v, 1)).collect();
        for &v in &recs[u] {
            if v >= history.num_items {
                return Err(Error::Validation(format!(
                    "recommended item {v} out of range"
                )));
            }
            match counts.binary_search_by_key(&v, |e| e.0) {
                Ok(i) => counts[i].1 += 1,
                Err(i) => counts.insert(i, (v, 1)),
            }
        }
        examples.push(AttackExample {
            user: u,
            input: counts,
            label,
        });
    }
    if skipped > 0 {
        log::warn!("{skipped} users without a profile were skipped");
    }
    Ok(AttackDataset {
        width: history.num_items,
        num_classes,
        examples,
    })
}

/// Train and test index sets with `round(ratio * n)` training examples.
///
/// Stratified by label when every class present has at least two members;
/// each class then contributes `floor` or `ceil` of its share.
pub fn split_attack_dataset(labels: &[usize], ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = labels.len();
    let target = (ratio * n as f64).round() as usize;
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let stratify = by_class.iter().all(|c| c.is_empty() || c.len() >= 2);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if stratify {
        let shares: Vec<f64> = by_class.iter().map(|c| ratio * c.len() as f64).collect();
        let mut take: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
        let mut order: Vec<usize> = (0..num_classes).collect();
        order.sort_by(|&a, &b| {
            let fa = shares[a] - take[a] as f64;
            let fb = shares[b] - take[b] as f64;
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        let mut missing = target.saturating_sub(take.iter().sum());
        for c in order {
            if missing == 0 {
                break;
            }
            if take[c] < by_class[c].len() {
                take[c] += 1;
                missing -= 1;
            }
        }
        for (c, members) in by_class.iter_mut().enumerate() {
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..take[c]]);
            test.extend_from_slice(&members[take[c]..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..target]);
        test.extend_from_slice(&all[target..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Dense two-layer softmax network over sparse inputs. Without a hidden
/// layer it is multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseNet {
    width: usize,
    hidden: usize,
    classes: usize,
    /// `width x hidden` (or `width x classes` without a hidden layer), row-major.
    w_in: Vec<f32>,
    b_in: Vec<f32>,
    /// `classes x hidden`, row-major; empty without a hidden layer.
    w_out: Vec<f32>,
    b_out: Vec<f32>,
}

impl SparseNet {
    fn new<R: Rng>(width: usize, hidden: Option<usize>, classes: usize, rng: &mut R) -> Self {
        let uniform = |fan_in: usize, len: usize, rng: &mut R| -> Vec<f32> {
            let bound = 1.0 / (fan_in as f32).sqrt();
            (0..len).map(|_| rng.random_range(-bound..bound)).collect()
        };
        match hidden {
            Some(h) => SparseNet {
                width,
                hidden: h,
                classes,
                w_in: uniform(width, width * h, rng),
                b_in: uniform(width, h, rng),
                w_out: uniform(h, classes * h, rng),
                b_out: uniform(h, classes, rng),
            },
            None => SparseNet {
                width,
                hidden: 0,
                classes,
                w_in: vec![0.0; width * classes],
                b_in: vec![0.0; classes],
                w_out: Vec::new(),
                b_out: Vec::new(),
            },
        }
    }

    fn first_width(&self) -> usize {
        if self.hidden > 0 {
            self.hidden
        } else {
            self.classes
        }
    }

    /// First-layer pre-activations.
    fn first(&self, x: &[(usize, u8)], out: &mut [f32]) {
        let w = self.first_width();
        out.copy_from_slice(&self.b_in);
        for &(i, c) in x {
            let row = &self.w_in[i * w..(i + 1) * w];
            let c = c as f32;
            for (o, &r) in out.iter_mut().zip(row) {
                *o += c * r;
            }
        }
    }

    /// Class logits; `hidden` receives the post-ReLU hidden layer.
    fn logits(&self, x: &[(usize, u8)], hidden: &mut Vec<f32>, logits: &mut Vec<f32>) {
        if self.hidden == 0 {
            logits.resize(self.classes, 0.0);
            self.first(x, logits);
            return;
        }
        hidden.resize(self.hidden, 0.0);
        self.first(x, hidden);
        for h in hidden.iter_mut() {
            *h = h.max(0.0);
        }
        logits.clear();
        for k in 0..self.classes {
            let row = &self.w_out[k * self.hidden..(k + 1) * self.hidden];
            logits.push(
                self.b_out[k]
                    + row
                        .iter()
                        .zip(hidden.iter())
                        .map(|(a, b)| a * b)
                        .sum::<f32>(),
            );
        }
    }

    fn train(
        &mut self,
        data: &AttackDataset,
        epochs: usize,
        batch: usize,
        lr: f32,
        rng: &mut ChaCha8Rng,
    ) {
        let fw = self.first_width();
        let mut g_in = vec![0.0f32; self.w_in.len()];
        let mut touched = vec![false; self.width];
        let mut rows: Vec<usize> = Vec::new();
        let mut g_b_in = vec![0.0f32; fw];
        let mut g_out = vec![0.0f32; self.w_out.len()];
        let mut g_b_out = vec![0.0f32; self.b_out.len()];
        let (mut hidden, mut logits) = (Vec::new(), Vec::new());
        let mut d_first = vec![0.0f32; fw];
        let mut order: Vec<usize> = (0..data.examples.len()).collect();
        for _ in 0..epochs {
            order.shuffle(rng);
            for chunk in order.chunks(batch) {
                for &i in chunk {
                    let ex = &data.examples[i];
                    self.logits(&ex.input, &mut hidden, &mut logits);
                    let probs = softmax(&logits);
                    let d_logits: Vec<f32> = probs
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| if k == ex.label { p - 1.0 } else { p })
                        .collect();
                    if self.hidden == 0 {
                        d_first.copy_from_slice(&d_logits);
                    } else {
                        d_first.iter_mut().for_each(|x| *x = 0.0);
                        for (k, &dl) in d_logits.iter().enumerate() {
                            g_b_out[k] += dl;
                            let row = &self.w_out[k * self.hidden..(k + 1) * self.hidden];
                            let g_row = &mut g_out[k * self.hidden..(k + 1) * self.hidden];
                            for j in 0..self.hidden {
                                g_row[j] += dl * hidden[j];
                                d_first[j] += dl * row[j];
                            }
                        }
                        for (d, &h) in d_first.iter_mut().zip(&hidden) {
                            if h <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                    for (g, &d) in g_b_in.iter_mut().zip(&d_first) {
                        *g += d;
                    }
                    for &(item, c) in &ex.input {
                        if !touched[item] {
                            touched[item] = true;
                            rows.push(item);
                        }
                        let c = c as f32;
                        for (g, &d) in g_in[item * fw..(item + 1) * fw].iter_mut().zip(&d_first) {
                            *g += c * d;
                        }
                    }
                }
                let step = lr / chunk.len() as f32;
                for &item in &rows {
                    touched[item] = false;
                    let w = &mut self.w_in[item * fw..(item + 1) * fw];
                    let g = &mut g_in[item * fw..(item + 1) * fw];
                    for (a, b) in w.iter_mut().zip(g.iter_mut()) {
                        *a -= step * *b;
                        *b = 0.0;
                    }
                }
                rows.clear();
                for (a, b) in self.b_in.iter_mut().zip(g_b_in.iter_mut()) {
                    *a -= step * *b;
                    *b = 0.0;
                }
                for (a, b) in self.w_out.iter_mut().zip(g_out.iter_mut()) {
                    *a -= step * *b;
                    *b = 0.0;
                }
                for (a, b) in self.b_out.iter_mut().zip(g_b_out.iter_mut()) {
                    *a -= step * *b;
                    *b = 0.0;
                }
            }
        }
    }

    fn predict(&self, x: &[(usize, u8)]) -> usize {
        let (mut hidden, mut logits) = (Vec::new(), Vec::new());
        self.logits(x, &mut hidden, &mut logits);
        argmax(&logits)
    }
}

fn softmax(x: &[f32]) -> Vec<f32> {
    let m = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f32> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f32 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// First index of the maximum.
fn argmax<T: PartialOrd + Copy>(x: &[T]) -> usize {
    let mut best = 0;
    for i in 1..x.len() {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

/// A trained attacker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttackerModel {
    Net(SparseNet),
    Knn {
        k: usize,
        classes: usize,
        train: Vec<(Vec<(usize, u8)>, f64, usize)>,
    },
    NaiveBayes {
        log_prior: Vec<f64>,
        /// `classes x width`.
        log_likelihood: Vec<Vec<f64>>,
    },
}

fn sparse_dot(a: &[(usize, u8)], b: &[(usize, u8)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

impl AttackerModel {
    pub fn predict(&self, x: &[(usize, u8)]) -> usize {
        match self {
            AttackerModel::Net(net) => net.predict(x),
            AttackerModel::Knn { k, classes, train } => {
                let norm = sparse_dot(x, x).sqrt();
                let mut sims: Vec<(f64, usize)> = train
                    .iter()
                    .enumerate()
                    .map(|(i, (v, n, _))| {
                        let denom = norm * n;
                        (
                            if denom > 0.0 {
                                sparse_dot(x, v) / denom
                            } else {
                                0.0
                            },
                            i,
                        )
                    })
                    .collect();
                sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                let mut votes = vec![(0usize, 0.0f64); *classes];
                for &(s, i) in sims.iter().take(*k) {
                    let c = train[i].2;
                    votes[c].0 += 1;
                    votes[c].1 += s;
                }
                // most votes, then larger similarity mass, then smaller class
                let mut best = 0;
                for c in 1..votes.len() {
                    if votes[c].0 > votes[best].0
                        || (votes[c].0 == votes[best].0 && votes[c].1 > votes[best].1)
                    {
                        best = c;
                    }
                }
                best
            }
            AttackerModel::NaiveBayes {
                log_prior,
                log_likelihood,
            } => {
                let scores: Vec<f64> = log_prior
                    .iter()
                    .zip(log_likelihood)
                    .map(|(p, ll)| p + x.iter().map(|&(i, c)| c as f64 * ll[i]).sum::<f64>())
                    .collect();
                argmax(&scores)
            }
        }
    }

    pub fn predict_all(&self, data: &AttackDataset) -> Vec<usize> {
        data.examples
            .iter()
            .map(|e| self.predict(&e.input))
            .collect()
    }
}

/// Fits an attacker of the given kind; deterministic per `seed`.
pub fn train_attacker(
    kind: AttackerKind,
    data: &AttackDataset,
    seed: u64,
) -> Result<AttackerModel> {
    let mut present = vec![false; data.num_classes];
    for e in &data.examples {
        present[e.label] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Validation(
            "attacker training set needs at least two classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        AttackerKind::Nn | AttackerKind::Logreg => {
            let hidden = (kind == AttackerKind::Nn).then_some(NN_HIDDEN);
            let mut net = SparseNet::new(data.width, hidden, data.num_classes, &mut rng);
            net.train(data, NN_EPOCHS, NN_BATCH, NN_LEARNING_RATE, &mut rng);
            AttackerModel::Net(net)
        }
        AttackerKind::Knn => AttackerModel::Knn {
            k: KNN_NEIGHBORS,
            classes: data.num_classes,
            train: data
                .examples
                .iter()
                .map(|e| {
                    (
                        e.input.clone(),
                        sparse_dot(&e.input, &e.input).sqrt(),
                        e.label,
                    )
                })
                .collect(),
        },
        AttackerKind::Nb => {
            let n = data.examples.len() as f64;
            let mut class_count = vec![0.0; data.num_classes];
            let mut item_count = vec![vec![0.0; data.width]; data.num_classes];
            for e in &data.examples {
                class_count[e.label] += 1.0;
                for &(i, c) in &e.input {
                    item_count[e.label][i] += c as f64;
                }
            }
            let log_prior = class_count
                .iter()
                .map(|&c| {
                    if c > 0.0 {
                        (c / n).ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let log_likelihood = item_count
                .iter()
                .map(|counts| {
                    let total: f64 = counts.iter().sum::<f64>() + data.width as f64;
                    counts.iter().map(|&c| ((c + 1.0) / total).ln()).collect()
                })
                .collect();
            AttackerModel::NaiveBayes {
                log_prior,
                log_likelihood,
            }
        }
    })
}

/// How per-class F1 scores are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    /// Mean weighted by true-class support.
    #[default]
    Weighted,
    /// Unweighted mean over classes occurring in labels or predictions.
    Macro,
    /// Global counts; equals accuracy for single-label data.
    Micro,
}

impl FromStr for F1Average {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(F1Average::Weighted),
            "macro" => Ok(F1Average::Macro),
            "micro" => Ok(F1Average::Micro),
            _ => Err(Error::Validation(format!("unknown F1 average `{s}`"))),
        }
    }
}

pub fn f1_score(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
    average: F1Average,
) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Validation("no examples to score".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut pred_count = vec![0usize; num_classes];
    let mut true_count = vec![0usize; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(Error::Validation(format!(
                "class index out of range: {p}, {l}"
            )));
        }
        pred_count[p] += 1;
        true_count[l] += 1;
        if p == l {
            tp[p] += 1;
        }
    }
    let f1 = |c: usize| {
        let denom = pred_count[c] + true_count[c];
        if denom == 0 {
            0.0
        } else {
            2.0 * tp[c] as f64 / denom as f64
        }
    };
    Ok(match average {
        F1Average::Micro => tp.iter().sum::<usize>() as f64 / labels.len() as f64,
        F1Average::Weighted => {
            (0..num_classes)
                .map(|c| f1(c) * true_count[c] as f64)
                .sum::<f64>()
                / labels.len() as f64
        }
        F1Average::Macro => {
            let seen: Vec<usize> = (0..num_classes)
                .filter(|&c| pred_count[c] + true_count[c] > 0)
                .collect();
            seen.iter().map(|&c| f1(c)).sum::<f64>() / seen.len() as f64
        }
    })
}

/// Trains on the train split and scores F1 on the test split.
pub fn attack_f1(
    data: &AttackDataset,
    kind: AttackerKind,
    average: F1Average,
    seed: u64,
) -> Result<f64> {
    let (train_idx, test_idx) = split_attack_dataset(&data.labels(), 0.8, seed);
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let model = train_attacker(kind, &train, seed)?;
    f1_score(
        &model.predict_all(&test),
        &test.labels(),
        data.num_classes,
        average,
    )
}
