//! Top-K ranking metrics against held-out items.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit over which Hit@K is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitMode {
    /// Share of users with at least one held-out item in their top K.
    #[default]
    User,
    /// Share of held-out (user, item) pairs found in the user's top K.
    Pair,
}

impl FromStr for HitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(HitMode::User),
            "pair" => Ok(HitMode::Pair),
            _ => Err(Error::Validation(format!("unknown hit mode `{s}`"))),
        }
    }
}

fn check(rec_lists: &[Vec<usize>], test_sets: &[Vec<usize>]) -> Result<()> {
    if rec_lists.len() != test_sets.len() {
        return Err(Error::Dimension(format!(
            "{} recommendation lists for {} test sets",
            rec_lists.len(),
            test_sets.len()
        )));
    }
    if test_sets.iter().all(Vec::is_empty) {
        return Err(Error::Validation("no user has a held-out item".into()));
    }
    Ok(())
}

fn held_out(test: &[usize], item: usize) -> bool {
    test.contains(&item)
}

pub fn hit_at_k(
    rec_lists: &[Vec<usize>],
    test_sets: &[Vec<usize>],
    k: usize,
    mode: HitMode,
) -> Result<f64> {
    check(rec_lists, test_sets)?;
    let (mut num, mut den) = (0usize, 0usize);
    for (recs, test) in rec_lists.iter().zip(test_sets) {
        if test.is_empty() {
            continue;
        }
        let found = recs.iter().take(k).filter(|&&v| held_out(test, v)).count();
        match mode {
            HitMode::User => {
                den += 1;
                num += usize::from(found > 0);
            }
            HitMode::Pair => {
                den += test.len();
                num += found;
            }
        }
    }
    Ok(num as f64 / den as f64)
}

/// Binary-relevance NDCG@K averaged over users with held-out items.
pub fn ndcg_at_k(rec_lists: &[Vec<usize>], test_sets: &[Vec<usize>], k: usize) -> Result<f64> {
    check(rec_lists, test_sets)?;
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let (mut total, mut users) = (0.0, 0usize);
    for (recs, test) in rec_lists.iter().zip(test_sets) {
        if test.is_empty() {
            continue;
        }
        users += 1;
        let dcg: f64 = recs
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, &v)| held_out(test, v))
            .map(|(i, _)| discount(i))
            .sum();
        let idcg: f64 = (0..test.len().min(k)).map(discount).sum();
        if idcg > 0.0 {
            total += dcg / idcg;
        }
    }
    Ok(total / users as f64)
}
