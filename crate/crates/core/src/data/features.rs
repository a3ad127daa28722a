//! Per-user feature engineering and [-1, 1] normalization.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{BipartiteGraph, IdMap, UserProfile, NUM_GENDERS, NUM_OCCUPATIONS};
use crate::error::{Error, Result};

pub const NUM_AGE_BUCKETS: usize = 3;
pub const AGE_BUCKETS: [&str; NUM_AGE_BUCKETS] = ["under_35", "35_to_45", "over_45"];

const NUMERICAL_NAMES: [&str; 18] = [
    "rated_count",
    "count_r1",
    "count_r2",
    "count_r3",
    "count_r4",
    "count_r5",
    "ratio_r1",
    "ratio_r2",
    "ratio_r3",
    "ratio_r4",
    "ratio_r5",
    "positive_ratio",
    "negative_ratio",
    "rating_entropy",
    "median_rating",
    "min_rating",
    "max_rating",
    "mean_rating",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numerical,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    pub width: usize,
    pub offset: usize,
}

/// Ordered feature layout of a user vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDescriptor>", into = "Vec<FeatureDescriptor>")]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    /// Validates that offsets are contiguous and widths are consistent.
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let mut next = 0;
        for f in &features {
            if f.offset != next {
                return Err(Error::Validation(format!(
                    "feature {} starts at {} but previous ended at {next}",
                    f.name, f.offset
                )));
            }
            match f.kind {
                FeatureKind::Numerical if f.width != 1 => {
                    return Err(Error::Validation(format!(
                        "numerical feature {} has width {}",
                        f.name, f.width
                    )))
                }
                FeatureKind::Categorical if f.width == 0 => {
                    return Err(Error::Validation(format!(
                        "categorical feature {} has width 0",
                        f.name
                    )))
                }
                _ => {}
            }
            next += f.width;
        }
        Ok(FeatureSchema { features })
    }

    /// The 18 rating statistics followed by gender, occupation and age-bucket one-hots.
    pub fn movielens() -> Self {
        let mut features = Vec::new();
        let mut offset = 0;
        let mut push = |name: &str, kind, width| {
            features.push(FeatureDescriptor {
                name: name.to_string(),
                kind,
                width,
                offset,
            });
            offset += width;
        };
        for name in NUMERICAL_NAMES {
            push(name, FeatureKind::Numerical, 1);
        }
        push("gender", FeatureKind::Categorical, NUM_GENDERS);
        push("occupation", FeatureKind::Categorical, NUM_OCCUPATIONS);
        push("age_bucket", FeatureKind::Categorical, NUM_AGE_BUCKETS);
        FeatureSchema::new(features).expect("static layout is contiguous")
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    /// Total vector width d0.
    pub fn d0(&self) -> usize {
        self.features.last().map_or(0, |f| f.offset + f.width)
    }

    /// Number of features d'.
    pub fn d_prime(&self) -> usize {
        self.features.len()
    }

    pub fn numerical_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.features
            .iter()
            .filter(|f| f.kind == FeatureKind::Numerical)
            .map(|f| f.offset)
    }

    pub fn find(&self, name: &str) -> Option<&FeatureDescriptor> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Column headers: the feature name for numericals, `name_j` for one-hot slots.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.d0());
        for f in &self.features {
            match f.kind {
                FeatureKind::Numerical => out.push(f.name.clone()),
                FeatureKind::Categorical => {
                    out.extend((0..f.width).map(|j| format!("{}_{j}", f.name)))
                }
            }
        }
        out
    }
}

impl TryFrom<Vec<FeatureDescriptor>> for FeatureSchema {
    type Error = Error;

    fn try_from(v: Vec<FeatureDescriptor>) -> Result<Self> {
        FeatureSchema::new(v)
    }
}

impl From<FeatureSchema> for Vec<FeatureDescriptor> {
    fn from(s: FeatureSchema) -> Self {
        s.features
    }
}

/// One row per user, `d0` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn zeros(users: usize, d0: usize) -> Self {
        FeatureMatrix {
            values: Array2::zeros((users, d0)),
        }
    }

    pub fn num_users(&self) -> usize {
        self.values.nrows()
    }

    pub fn d0(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, u: usize) -> ArrayView1<'_, f64> {
        self.values.row(u)
    }

    /// Writes a CSV with a `user_id` column (raw ids) followed by the schema columns.
    pub fn write_csv<W: Write>(&self, schema: &FeatureSchema, users: &IdMap, out: W) -> Result<()> {
        if schema.d0() != self.d0() {
            return Err(Error::Dimension(format!(
                "schema width {} vs matrix width {}",
                schema.d0(),
                self.d0()
            )));
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["user_id".to_string()];
        header.extend(schema.column_names());
        w.write_record(&header)?;
        for (u, row) in self.values.rows().into_iter().enumerate() {
            let mut rec = vec![users.raw(u).to_string()];
            rec.extend(row.iter().map(|x| format!("{x:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`FeatureMatrix::write_csv`].
    pub fn read_csv<R: Read>(schema: &FeatureSchema, input: R) -> Result<(Self, IdMap)> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() != schema.d0() + 1 {
            return Err(Error::Dimension(format!(
                "csv has {} value columns, schema expects {}",
                header.len().saturating_sub(1),
                schema.d0()
            )));
        }
        let mut users = IdMap::new();
        let mut flat = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse_err = |what: &str| Error::Parse {
                line: i + 2,
                msg: format!("bad {what}"),
            };
            let id: i64 = rec[0].parse().map_err(|_| parse_err("user id"))?;
            users.intern(id);
            for field in rec.iter().skip(1) {
                flat.push(field.parse::<f64>().map_err(|_| parse_err("value"))?);
            }
        }
        let values = Array2::from_shape_vec((users.len(), schema.d0()), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok((FeatureMatrix { values }, users))
    }
}

fn rating_statistics(ratings: &[u8]) -> [f64; 18] {
    let mut out = [0.0; 18];
    let n = ratings.len();
    if n == 0 {
        return out;
    }
    let mut counts = [0usize; 5];
    for &r in ratings {
        counts[(r - 1) as usize] += 1;
    }
    let nf = n as f64;
    out[0] = nf;
    for l in 0..5 {
        out[1 + l] = counts[l] as f64;
        out[6 + l] = counts[l] as f64 / nf;
    }
    out[11] = (counts[3] + counts[4]) as f64 / nf;
    out[12] = (counts[0] + counts[1]) as f64 / nf;
    out[13] = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            p * p.ln()
        })
        .sum::<f64>();
    let mut sorted = ratings.to_vec();
    sorted.sort_unstable();
    // lower median
    out[14] = sorted[(n - 1) / 2] as f64;
    out[15] = sorted[0] as f64;
    out[16] = sorted[n - 1] as f64;
    out[17] = ratings.iter().map(|&r| r as f64).sum::<f64>() / nf;
    out
}

/// Builds raw (unnormalized) user vectors in [`FeatureSchema::movielens`] layout.
///
/// `profiles` is indexed by dense user id.
pub fn engineer_features(
    graph: &BipartiteGraph,
    profiles: &[UserProfile],
) -> Result<(FeatureMatrix, FeatureSchema)> {
    if profiles.len() != graph.num_users {
        return Err(Error::Validation(format!(
            "{} profiles for {} users",
            profiles.len(),
            graph.num_users
        )));
    }
    let schema = FeatureSchema::movielens();
    let gender = schema.find("gender").unwrap().offset;
    let occupation = schema.find("occupation").unwrap().offset;
    let age = schema.find("age_bucket").unwrap().offset;
    let mut m = FeatureMatrix::zeros(graph.num_users, schema.d0());
    for (u, p) in profiles.iter().enumerate() {
        let mut row = m.values.row_mut(u);
        for (j, s) in rating_statistics(graph.user_ratings(u))
            .into_iter()
            .enumerate()
        {
            row[j] = s;
        }
        row[gender + p.gender as usize] = 1.0;
        row[occupation + p.occupation as usize] = 1.0;
        row[age + p.age_bucket()] = 1.0;
    }
    Ok((m, schema))
}

/// Per-numerical-column min/max, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub col_min: Vec<f64>,
    pub col_max: Vec<f64>,
}

impl NormalizationStats {
    /// Rescales numerical columns with these stats; values are clamped to [-1, 1].
    pub fn apply(&self, matrix: &FeatureMatrix, schema: &FeatureSchema) -> Result<FeatureMatrix> {
        let cols: Vec<usize> = schema.numerical_columns().collect();
        if cols.len() != self.col_min.len() || cols.len() != self.col_max.len() {
            return Err(Error::Dimension(format!(
                "{} numerical columns, stats for {}",
                cols.len(),
                self.col_min.len()
            )));
        }
        let mut out = matrix.clone();
        for (k, &c) in cols.iter().enumerate() {
            let (lo, hi) = (self.col_min[k], self.col_max[k]);
            let mut col = out.values.column_mut(c);
            if hi > lo {
                col.mapv_inplace(|x| (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0));
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

/// Min-max scales every numerical column onto [-1, 1]; constant columns become 0.
pub fn normalize_numericals(
    matrix: &FeatureMatrix,
    schema: &FeatureSchema,
) -> Result<(FeatureMatrix, NormalizationStats)> {
    if schema.d0() != matrix.d0() {
        return Err(Error::Dimension(format!(
            "schema width {} vs matrix width {}",
            schema.d0(),
            matrix.d0()
        )));
    }
    let mut stats = NormalizationStats {
        col_min: Vec::new(),
        col_max: Vec::new(),
    };
    for c in schema.numerical_columns() {
        let col = matrix.values.column(c);
        stats
            .col_min
            .push(col.iter().copied().fold(f64::INFINITY, f64::min));
        stats
            .col_max
            .push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let out = stats.apply(matrix, schema)?;
    Ok((out, stats))
}

/// JSON document carrying the schema and normalization stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub features: FeatureSchema,
    pub d0: usize,
    pub d_prime: usize,
    pub col_min: Vec<f64>,
    pub col_max: Vec<f64>,
}

impl SchemaDocument {
    pub fn new(schema: &FeatureSchema, stats: &NormalizationStats) -> Self {
        SchemaDocument {
            features: schema.clone(),
            d0: schema.d0(),
            d_prime: schema.d_prime(),
            col_min: stats.col_min.clone(),
            col_max: stats.col_max.clone(),
        }
    }

    pub fn stats(&self) -> NormalizationStats {
        NormalizationStats {
            col_min: self.col_min.clone(),
            col_max: self.col_max.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    fn row_vec(m: &FeatureMatrix, u: usize) -> Array1<f64> {
        m.values.row(u).to_owned()
    }

    fn profile(age: u32, gender: u8, occupation: u8) -> UserProfile {
        UserProfile {
            user_id: 0,
            age,
            gender,
            occupation,
        }
    }

    #[test]
    fn schema_dimensions() {
        let s = FeatureSchema::movielens();
        assert_eq!(s.d_prime(), 21);
        assert_eq!(s.d0(), 44);
        assert_eq!(s.numerical_columns().count(), 18);
        assert_eq!(s.column_names().len(), 44);
    }

    #[test]
    fn non_contiguous_schema_rejected() {
        let bad = vec![
            FeatureDescriptor {
                name: "a".into(),
                kind: FeatureKind::Numerical,
                width: 1,
                offset: 0,
            },
            FeatureDescriptor {
                name: "b".into(),
                kind: FeatureKind::Categorical,
                width: 2,
                offset: 2,
            },
        ];
        assert!(FeatureSchema::new(bad).is_err());
    }

    #[test]
    fn single_level_user() {
        let s = rating_statistics(&[5, 5, 5, 5]);
        assert_eq!(s[0], 4.0);
        assert_eq!(s[5], 4.0);
        assert_eq!(s[10], 1.0);
        assert_eq!(s[11], 1.0);
        assert_eq!(s[12], 0.0);
        assert_eq!(s[13], 0.0);
        assert_eq!(&s[14..], &[5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn uniform_user_has_max_entropy() {
        let s = rating_statistics(&[1, 2, 3, 4, 5]);
        for l in 0..5 {
            assert_abs_diff_eq!(s[6 + l], 0.2);
        }
        assert_abs_diff_eq!(s[13], 5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[13], 1.6094, epsilon = 1e-4);
        assert_eq!(s[14], 3.0);
    }

    #[test]
    fn even_count_uses_lower_median() {
        let s = rating_statistics(&[1, 2, 4, 5]);
        assert_eq!(s[14], 2.0);
    }

    #[test]
    fn cold_user_is_all_zero() {
        assert_eq!(rating_statistics(&[]), [0.0; 18]);
    }

    #[test]
    fn one_hot_segments_are_set() {
        let g = BipartiteGraph::from_edges(2, 1, [(0, 0, 4), (1, 0, 2)]).unwrap();
        let (m, schema) = engineer_features(&g, &[profile(35, 1, 19), profile(50, 0, 0)]).unwrap();
        for f in schema.features() {
            if f.kind == FeatureKind::Categorical {
                for u in 0..2 {
                    let seg = m.values.row(u);
                    let ones = (f.offset..f.offset + f.width)
                        .filter(|&j| seg[j] == 1.0)
                        .count();
                    assert_eq!(ones, 1, "{} for user {u}", f.name);
                }
            }
        }
        let age = schema.find("age_bucket").unwrap().offset;
        assert_eq!(m.values[[0, age + 1]], 1.0);
        assert_eq!(m.values[[1, age + 2]], 1.0);
    }

    fn one_column(values: &[f64]) -> (FeatureMatrix, FeatureSchema) {
        let schema = FeatureSchema::new(vec![FeatureDescriptor {
            name: "x".into(),
            kind: FeatureKind::Numerical,
            width: 1,
            offset: 0,
        }])
        .unwrap();
        let m = FeatureMatrix {
            values: Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap(),
        };
        (m, schema)
    }

    #[test]
    fn normalize_endpoints() {
        let (m, s) = one_column(&[0.0, 5.0, 10.0]);
        let (n, stats) = normalize_numericals(&m, &s).unwrap();
        assert_eq!(n.values.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(stats.col_min, vec![0.0]);
        assert_eq!(stats.col_max, vec![10.0]);
    }

    #[test]
    fn normalize_constant_column() {
        let (m, s) = one_column(&[3.0, 3.0, 3.0]);
        let (n, _) = normalize_numericals(&m, &s).unwrap();
        assert_eq!(n.values.column(0).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_by_hand() {
        let (m, s) = one_column(&[1.0, 2.0, 4.0]);
        let (n, _) = normalize_numericals(&m, &s).unwrap();
        assert_abs_diff_eq!(n.values[[0, 0]], -1.0);
        assert_abs_diff_eq!(n.values[[1, 0]], -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.values[[2, 0]], 1.0);
    }

    #[test]
    fn categorical_columns_untouched_by_normalization() {
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0, 4), (1, 0, 2), (1, 1, 1)]).unwrap();
        let (m, schema) = engineer_features(&g, &[profile(20, 1, 3), profile(60, 0, 7)]).unwrap();
        let (n, _) = normalize_numericals(&m, &schema).unwrap();
        let start = schema.find("gender").unwrap().offset;
        for u in 0..2 {
            assert_eq!(
                row_vec(&m, u).slice(ndarray::s![start..]),
                row_vec(&n, u).slice(ndarray::s![start..])
            );
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0, 4), (1, 1, 1)]).unwrap();
        let (m, schema) = engineer_features(&g, &[profile(20, 1, 3), profile(60, 0, 7)]).unwrap();
        let users = IdMap::from_raw(vec![11, 4]);
        let mut buf = Vec::new();
        m.write_csv(&schema, &users, &mut buf).unwrap();
        let (back, ids) = FeatureMatrix::read_csv(&schema, buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(ids.raw_ids(), &[11, 4]);
    }

    #[test]
    fn schema_document_json_keys() {
        let s = FeatureSchema::movielens();
        let stats = NormalizationStats {
            col_min: vec![0.0; 18],
            col_max: vec![1.0; 18],
        };
        let doc = SchemaDocument::new(&s, &stats);
        let v: serde_json::Value = serde_json::to_value(&doc).unwrap();
        for key in ["features", "d0", "d_prime", "col_min", "col_max"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["d0"], 44);
        assert_eq!(v["features"][18]["kind"], "categorical");
        let back: SchemaDocument = serde_json::from_value(v).unwrap();
        assert_eq!(back, doc);
    }
}
