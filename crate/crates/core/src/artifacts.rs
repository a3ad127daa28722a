//! Files passed between pipeline stages.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, IdMap};
use crate::error::{Error, Result};
use crate::fm::NoisePolynomial;
use crate::model::{EpochStats, ModelParams, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to recommend from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub split_ratio: f64,
    pub params: ModelParams<f64>,
    pub noise: Option<NoisePolynomial>,
    /// User vectors the model was trained on.
    pub features: FeatureMatrix,
    pub users: IdMap,
    pub items: IdMap,
    pub history: Vec<EpochStats>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let c: Checkpoint = serde_json::from_reader(input)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        c.params.check_shapes(c.features.d0(), c.items.len())?;
        if c.features.num_users() != c.users.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} users",
                c.features.num_users(),
                c.users.len()
            )));
        }
        Ok(c)
    }
}

/// Writes `raw_user<TAB>item,item,...` lines in rank order, one per user.
pub fn write_recommendations<W: Write>(
    lists: &[Vec<usize>],
    users: &IdMap,
    items: &IdMap,
    mut out: W,
) -> Result<()> {
    for (u, list) in lists.iter().enumerate() {
        let ids: Vec<String> = list.iter().map(|&v| items.raw(v).to_string()).collect();
        writeln!(out, "{}\t{}", users.raw(u), ids.join(","))?;
    }
    Ok(())
}

/// Reads a recommendation file into dense per-user lists. Users absent from
/// the file get an empty list.
pub fn read_recommendations<R: BufRead>(
    input: R,
    users: &IdMap,
    items: &IdMap,
) -> Result<Vec<Vec<usize>>> {
    let mut lists = vec![Vec::new(); users.len()];
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: n + 1, msg };
        let (user, rest) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `user<TAB>items`".into()))?;
        let raw: i64 = user
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad user id `{user}`")))?;
        let u = users
            .get(raw)
            .ok_or_else(|| parse_err(format!("unknown user {raw}")))?;
        let mut list = Vec::new();
        for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let raw: i64 = tok
                .parse()
                .map_err(|_| parse_err(format!("bad item id `{tok}`")))?;
            list.push(
                items
                    .get(raw)
                    .ok_or_else(|| parse_err(format!("unknown item {raw}")))?,
            );
        }
        lists[u] = list;
    }
    Ok(lists)
}
