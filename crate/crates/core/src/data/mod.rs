//! MovieLens-100K ingestion and the user/item interaction graph.
//!
//! Raw ids are remapped to dense 0-based indices in first-seen order. The
//! [`IdMap`]s returned by the parsers translate back to raw ids for any file
//! that leaves the process.

mod features;
mod split;

pub use features::{
    engineer_features, normalize_numericals, FeatureDescriptor, FeatureKind, FeatureMatrix,
    FeatureSchema, NormalizationStats, SchemaDocument, AGE_BUCKETS, NUM_AGE_BUCKETS,
};
pub use split::{split_per_user, DataSplit};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 21 ML-100K occupations in alphabetical order.
pub const OCCUPATIONS: [&str; 21] = [
    "administrator",
    "artist",
    "doctor",
    "educator",
    "engineer",
    "entertainment",
    "executive",
    "healthcare",
    "homemaker",
    "lawyer",
    "librarian",
    "marketing",
    "none",
    "other",
    "programmer",
    "retired",
    "salesman",
    "scientist",
    "student",
    "technician",
    "writer",
];

pub const NUM_GENDERS: usize = 2;
pub const NUM_OCCUPATIONS: usize = OCCUPATIONS.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: u8,
    pub timestamp: i64,
}

/// Dense index <-> raw id translation, filled in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<i64>", into = "Vec<i64>")]
pub struct IdMap {
    raw: Vec<i64>,
    index: HashMap<i64, usize>,
}

impl From<Vec<i64>> for IdMap {
    fn from(raw: Vec<i64>) -> Self {
        IdMap::from_raw(raw)
    }
}

impl From<IdMap> for Vec<i64> {
    fn from(map: IdMap) -> Self {
        map.raw
    }
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_raw(raw: Vec<i64>) -> Self {
        let index = raw.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        IdMap { raw, index }
    }

    /// Returns the dense index for `raw`, allocating the next one if unseen.
    pub fn intern(&mut self, raw: i64) -> usize {
        if let Some(&i) = self.index.get(&raw) {
            return i;
        }
        let i = self.raw.len();
        self.raw.push(raw);
        self.index.insert(raw, i);
        i
    }

    pub fn get(&self, raw: i64) -> Option<usize> {
        self.index.get(&raw).copied()
    }

    pub fn raw(&self, dense: usize) -> i64 {
        self.raw[dense]
    }

    pub fn raw_ids(&self) -> &[i64] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Parsed `u.data` content together with the id remap tables.
#[derive(Debug, Clone, Default)]
pub struct InteractionLog {
    pub interactions: Vec<Interaction>,
    pub users: IdMap,
    pub items: IdMap,
}

/// Parses tab-separated `user item rating timestamp` lines.
pub fn parse_interactions(text: &str) -> Result<InteractionLog> {
    let mut log = InteractionLog::default();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let mut nums = [0i64; 4];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("not an integer: {f:?}"),
            })?;
        }
        let [user, item, rating, timestamp] = nums;
        if user < 0 || item < 0 {
            return Err(Error::Validation(format!(
                "line {line_no}: negative id ({user}, {item})"
            )));
        }
        if !(1..=5).contains(&rating) {
            return Err(Error::Validation(format!(
                "line {line_no}: rating {rating} outside [1, 5]"
            )));
        }
        let user = log.users.intern(user);
        let item = log.items.intern(item);
        log.interactions.push(Interaction {
            user,
            item,
            rating: rating as u8,
            timestamp,
        });
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Raw id from `u.user`.
    pub user_id: i64,
    pub age: u32,
    /// 0 = M, 1 = F.
    pub gender: u8,
    /// Index into [`OCCUPATIONS`].
    pub occupation: u8,
}

impl UserProfile {
    /// Age bucket index: 0 = under 35, 1 = 35 to 45 inclusive, 2 = over 45.
    pub fn age_bucket(&self) -> usize {
        match self.age {
            0..=34 => 0,
            35..=45 => 1,
            _ => 2,
        }
    }
}

/// Parses pipe-separated `id|age|gender|occupation|zip` lines.
pub fn parse_user_profiles(text: &str) -> Result<Vec<UserProfile>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 5 pipe-separated fields, found {}", fields.len()),
            });
        }
        let user_id = fields[0].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad user id {:?}", fields[0]),
        })?;
        let age = fields[1].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad age {:?}", fields[1]),
        })?;
        let gender = match fields[2].trim() {
            "M" => 0,
            "F" => 1,
            other => {
                return Err(Error::Validation(format!(
                    "line {line_no}: unknown gender {other:?}"
                )))
            }
        };
        let occ = fields[3].trim();
        let occupation = OCCUPATIONS.iter().position(|&o| o == occ).ok_or_else(|| {
            Error::Validation(format!("line {line_no}: unknown occupation {occ:?}"))
        })? as u8;
        out.push(UserProfile {
            user_id,
            age,
            gender,
            occupation,
        });
    }
    Ok(out)
}

/// Orders profiles by dense user index. Users without a profile are an error.
pub fn align_profiles(profiles: &[UserProfile], users: &IdMap) -> Result<Vec<UserProfile>> {
    let mut slots: Vec<Option<UserProfile>> = vec![None; users.len()];
    for p in profiles {
        if let Some(i) = users.get(p.user_id) {
            slots[i] = Some(*p);
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| Error::Validation(format!("no profile for user {}", users.raw(i))))
        })
        .collect()
}

/// Users and items joined by unit-weight rating edges.
///
/// Adjacency lists are sorted ascending. `user_ratings[u][j]` is the rating
/// behind the edge `(u, user_adj[u][j])`; it feeds feature engineering only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub num_users: usize,
    pub num_items: usize,
    user_adj: Vec<Vec<usize>>,
    item_adj: Vec<Vec<usize>>,
    user_ratings: Vec<Vec<u8>>,
}

impl BipartiteGraph {
    /// Builds a graph from `(user, item, rating)` edges, keeping the first
    /// rating of any duplicated pair.
    pub fn from_edges(
        num_users: usize,
        num_items: usize,
        edges: impl IntoIterator<Item = (usize, usize, u8)>,
    ) -> Result<Self> {
        let mut per_user: Vec<Vec<(usize, u8)>> = vec![Vec::new(); num_users];
        for (u, v, r) in edges {
            if u >= num_users || v >= num_items {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) out of range {num_users}x{num_items}"
                )));
            }
            per_user[u].push((v, r));
        }
        let mut user_adj = Vec::with_capacity(num_users);
        let mut user_ratings = Vec::with_capacity(num_users);
        let mut item_adj = vec![Vec::new(); num_items];
        for (u, mut list) in per_user.into_iter().enumerate() {
            // stable sort keeps the first-seen rating at the head of each run
            list.sort_by_key(|&(v, _)| v);
            list.dedup_by_key(|&mut (v, _)| v);
            for &(v, _) in &list {
                item_adj[v].push(u);
            }
            user_adj.push(list.iter().map(|&(v, _)| v).collect());
            user_ratings.push(list.iter().map(|&(_, r)| r).collect());
        }
        Ok(BipartiteGraph {
            num_users,
            num_items,
            user_adj,
            item_adj,
            user_ratings,
        })
    }

    /// Items rated by `u`.
    pub fn user_neighbors(&self, u: usize) -> &[usize] {
        &self.user_adj[u]
    }

    /// Users who rated `v`.
    pub fn item_neighbors(&self, v: usize) -> &[usize] {
        &self.item_adj[v]
    }

    pub fn user_ratings(&self, u: usize) -> &[u8] {
        &self.user_ratings[u]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.user_adj[u].binary_search(&v).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.user_adj.iter().map(Vec::len).sum()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.user_adj[u].len()
    }

    /// All `(user, item)` edges, user-major.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_adj
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&v| (u, v)))
    }
}

/// One edge per distinct `(user, item)` pair.
pub fn build_graph(log: &InteractionLog) -> BipartiteGraph {
    BipartiteGraph::from_edges(
        log.users.len(),
        log.items.len(),
        log.interactions.iter().map(|i| (i.user, i.item, i.rating)),
    )
    .expect("interaction ids are dense by construction")
}

/// Everything read from an ML-100K directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub log: InteractionLog,
    pub graph: BipartiteGraph,
    /// Indexed by dense user id.
    pub profiles: Vec<UserProfile>,
}

impl Dataset {
    pub fn from_strs(ratings: &str, users: &str) -> Result<Self> {
        let log = parse_interactions(ratings)?;
        let graph = build_graph(&log);
        let profiles = align_profiles(&parse_user_profiles(users)?, &log.users)?;
        Ok(Dataset {
            log,
            graph,
            profiles,
        })
    }

    pub fn load(ratings: &Path, users: &Path) -> Result<Self> {
        let r = std::fs::read_to_string(ratings)?;
        let u = std::fs::read_to_string(users)?;
        Self::from_strs(&r, &u)
    }

    /// Loads `u.data` and `u.user` from an ML-100K directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load(&dir.join("u.data"), &dir.join("u.user"))
    }
}
