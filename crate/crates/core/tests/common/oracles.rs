//! Direct transcriptions of the ranking and classification metrics.

use std::collections::BTreeSet;

use privrec::attack::F1Average;
use rand::Rng;

pub fn hit_user(recs: &[Vec<usize>], tests: &[Vec<usize>], k: usize) -> f64 {
    let mut users = 0usize;
    let mut hits = 0usize;
    for u in 0..recs.len() {
        if tests[u].is_empty() {
            continue;
        }
        users += 1;
        let mut found = false;
        for pos in 0..k.min(recs[u].len()) {
            for &t in &tests[u] {
                if recs[u][pos] == t {
                    found = true;
                }
            }
        }
        if found {
            hits += 1;
        }
    }
    hits as f64 / users as f64
}

pub fn hit_pair(recs: &[Vec<usize>], tests: &[Vec<usize>], k: usize) -> f64 {
    let mut pairs = 0usize;
    let mut hits = 0usize;
    for u in 0..recs.len() {
        for &t in &tests[u] {
            pairs += 1;
            if recs[u].iter().take(k).any(|&v| v == t) {
                hits += 1;
            }
        }
    }
    hits as f64 / pairs as f64
}

pub fn ndcg(recs: &[Vec<usize>], tests: &[Vec<usize>], k: usize) -> f64 {
    let mut total = 0.0;
    let mut users = 0usize;
    for u in 0..recs.len() {
        if tests[u].is_empty() {
            continue;
        }
        users += 1;
        let relevant: BTreeSet<usize> = tests[u].iter().copied().collect();
        let mut dcg = 0.0;
        for (i, v) in recs[u].iter().take(k).enumerate() {
            if relevant.contains(v) {
                dcg += 1.0 / ((i + 2) as f64).log2();
            }
        }
        let mut idcg = 0.0;
        for i in 0..relevant.len().min(k) {
            idcg += 1.0 / ((i + 2) as f64).log2();
        }
        total += dcg / idcg;
    }
    total / users as f64
}

/// F1 = 2TP / (2TP + FP + FN) per class, counted pair by pair.
pub fn f1(preds: &[usize], labels: &[usize], classes: usize, average: F1Average) -> f64 {
    let n = labels.len();
    let mut per_class = Vec::new();
    let mut correct = 0usize;
    for c in 0..classes {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for i in 0..n {
            match (preds[i] == c, labels[i] == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        correct += tp;
        let score = if tp + fp + fn_ == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
        };
        per_class.push((score, tp + fn_));
    }
    match average {
        F1Average::Micro => correct as f64 / n as f64,
        F1Average::Weighted => {
            let mut s = 0.0;
            for &(score, support) in &per_class {
                s += score.unwrap_or(0.0) * support as f64;
            }
            s / n as f64
        }
        F1Average::Macro => {
            let present: Vec<f64> = per_class.iter().filter_map(|p| p.0).collect();
            let mut s = 0.0;
            for v in &present {
                s += v;
            }
            s / present.len() as f64
        }
    }
}

/// Random ranking instance; at least one user has a held-out item.
pub fn ranking_instance<R: Rng>(rng: &mut R) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, usize) {
    let users = rng.random_range(1..8);
    let items = rng.random_range(3..20);
    let mut recs = Vec::new();
    let mut tests = Vec::new();
    for _ in 0..users {
        let len = rng.random_range(0..=items);
        let mut pool: Vec<usize> = (0..items).collect();
        for i in 0..len {
            let j = rng.random_range(i..items);
            pool.swap(i, j);
        }
        recs.push(pool[..len].to_vec());
        let mut t: Vec<usize> = (0..items).filter(|_| rng.random_bool(0.2)).collect();
        t.sort_unstable();
        tests.push(t);
    }
    if tests.iter().all(Vec::is_empty) {
        tests[0].push(rng.random_range(0..items));
    }
    let k = rng.random_range(1..=items + 2);
    (recs, tests, k)
}

pub fn classification_instance<R: Rng>(rng: &mut R) -> (Vec<usize>, Vec<usize>, usize) {
    let classes = rng.random_range(2..7);
    let n = rng.random_range(1..60);
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let preds = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (preds, labels, classes)
}
