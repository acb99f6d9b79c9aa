//! Dataset ingestion, encoding, scaling, splitting and synthetic fixtures.
//!
//! A [`Dataset`] holds standardized (or raw) feature rows, a binary
//! sensitive attribute per row and a `±1` label per row. Rows are stored
//! contiguously in row-major order.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Sensitive,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Frozen level set for categorical columns; fitted on first load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            levels: None,
        }
    }
}

/// Per-feature standardization parameters. Only numeric source columns are
/// listed; indicator features are left untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub features: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalingParams {
    /// Applies the stored transform to `d`, returning a new dataset.
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if let Some(&max) = self.features.iter().max() {
            if max >= d.n {
                return Err(Error::DimensionMismatch {
                    expected: max + 1,
                    found: d.n,
                });
            }
        }
        let mut out = d.clone();
        for row in out.features.chunks_exact_mut(d.n) {
            for ((&j, &mu), &sd) in self.features.iter().zip(&self.mean).zip(&self.std) {
                row[j] = (row[j] - mu) / sd;
            }
        }
        out.scaling = Some(self.clone());
        Ok(out)
    }
}

/// Column layout and token mappings for a CSV source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub positive_label: String,
    pub group1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingParams>,
}

impl FeatureSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let schema: FeatureSchema = serde_json::from_reader(File::open(path)?)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// All-numeric schema with columns `x1..xn`, `g` (sensitive, group 1 = "1")
    /// and `y` (label, positive = "1"). Used for synthetic data.
    pub fn numeric(n: usize) -> Self {
        let mut columns: Vec<ColumnSpec> = (1..=n)
            .map(|i| ColumnSpec::new(format!("x{i}"), ColumnKind::Numeric))
            .collect();
        columns.push(ColumnSpec::new("g", ColumnKind::Sensitive));
        columns.push(ColumnSpec::new("y", ColumnKind::Label));
        Self {
            columns,
            positive_label: "1".into(),
            group1: "1".into(),
            scaling: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count = |k: ColumnKind| self.columns.iter().filter(|c| c.kind == k).count();
        if count(ColumnKind::Sensitive) != 1 {
            return Err(Error::InvalidSchema(
                "exactly one sensitive column required".into(),
            ));
        }
        if count(ColumnKind::Label) != 1 {
            return Err(Error::InvalidSchema(
                "exactly one label column required".into(),
            ));
        }
        let names: BTreeSet<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.columns.len() {
            return Err(Error::InvalidSchema("duplicate column names".into()));
        }
        Ok(())
    }

    /// True when every categorical column carries a level set.
    pub fn is_frozen(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.kind != ColumnKind::Categorical || c.levels.is_some())
    }

    /// Names of encoded features in order: numeric columns keep their name,
    /// categorical columns expand to `name=level` indicators.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in &self.columns {
            match c.kind {
                ColumnKind::Numeric => names.push(c.name.clone()),
                ColumnKind::Categorical => {
                    for level in c.levels.iter().flatten() {
                        names.push(format!("{}={}", c.name, level));
                    }
                }
                ColumnKind::Sensitive | ColumnKind::Label => {}
            }
        }
        names
    }

    /// Indices of encoded features that come from numeric source columns.
    pub fn numeric_features(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut j = 0;
        for c in &self.columns {
            match c.kind {
                ColumnKind::Numeric => {
                    out.push(j);
                    j += 1;
                }
                ColumnKind::Categorical => j += c.levels.as_ref().map_or(0, Vec::len),
                ColumnKind::Sensitive | ColumnKind::Label => {}
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.feature_names().len()
    }

    /// Hex SHA-256 of the canonical JSON form of this (frozen) schema.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    pub features: &'a [f64],
    pub sensitive: u8,
    pub label: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    sensitive: Vec<u8>,
    labels: Vec<i8>,
    n: usize,
    schema: FeatureSchema,
    scaling: Option<ScalingParams>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        sensitive: Vec<u8>,
        labels: Vec<i8>,
        schema: FeatureSchema,
    ) -> Result<Self> {
        let n = schema.dim();
        let rows = labels.len();
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        if sensitive.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: sensitive.len(),
            });
        }
        if features.len() != rows * n {
            return Err(Error::DimensionMismatch {
                expected: rows * n,
                found: features.len(),
            });
        }
        if let Some(&a) = sensitive.iter().find(|&&a| a > 1) {
            return Err(Error::InvalidSpec(format!(
                "sensitive value {a} not in {{0,1}}"
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidSpec(format!("label {y} not in {{-1,+1}}")));
        }
        Ok(Self {
            features,
            sensitive,
            labels,
            n,
            schema,
            scaling: None,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn scaling(&self) -> Option<&ScalingParams> {
        self.scaling.as_ref()
    }

    /// Schema with the fitted scaling attached; this is what a model
    /// trained on `self` is bound to.
    pub fn frozen_schema(&self) -> FeatureSchema {
        let mut s = self.schema.clone();
        s.scaling = self.scaling.clone();
        s
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n..(i + 1) * self.n]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn sensitive(&self, i: usize) -> u8 {
        self.sensitive[i]
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample {
            features: self.row(i),
            sensitive: self.sensitive[i],
            label: self.labels[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    pub fn group_count(&self, group: u8) -> usize {
        self.sensitive.iter().filter(|&&a| a == group).count()
    }

    /// Empirical mean of the sensitive attribute.
    pub fn sensitive_mean(&self) -> f64 {
        let ones = self.sensitive.iter().map(|&a| a as f64).sum::<f64>();
        ones / self.len() as f64
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(indices.len() * self.n);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Ok(Dataset {
            features,
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n: self.n,
            schema: self.schema.clone(),
            scaling: self.scaling.clone(),
        })
    }

    /// Writes the dataset as CSV under its own schema. Only valid for
    /// all-numeric schemas; categorical indicators cannot be decoded back.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        if self
            .schema
            .columns
            .iter()
            .any(|c| c.kind == ColumnKind::Categorical)
        {
            return Err(Error::InvalidSchema(
                "cannot write categorical datasets".into(),
            ));
        }
        let negative = if self.schema.positive_label == "-1" {
            "0"
        } else {
            "-1"
        };
        let group0 = if self.schema.group1 == "0" { "1" } else { "0" };
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.len() {
            let row = self.row(i);
            let mut j = 0;
            let mut record = Vec::with_capacity(self.schema.columns.len());
            for c in &self.schema.columns {
                match c.kind {
                    ColumnKind::Numeric => {
                        record.push(format!("{:?}", row[j]));
                        j += 1;
                    }
                    ColumnKind::Sensitive => record.push(if self.sensitive[i] == 1 {
                        self.schema.group1.clone()
                    } else {
                        group0.to_string()
                    }),
                    ColumnKind::Label => record.push(if self.labels[i] == 1 {
                        self.schema.positive_label.clone()
                    } else {
                        negative.to_string()
                    }),
                    ColumnKind::Categorical => unreachable!(),
                }
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads and encodes a CSV file. See [`read_csv`].
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_csv(File::open(path)?, schema)
}

/// Encodes CSV records under `schema`.
///
/// Categorical columns without a level set are fitted on this input (sorted
/// distinct tokens); columns with a level set reject unseen tokens with
/// [`Error::UnknownCategory`]. Tokens are whitespace-trimmed. The returned
/// dataset carries the frozen schema. Columns in the file that the schema
/// does not mention are ignored.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| Error::MissingColumn(c.name.clone()))
        })
        .collect::<Result<_>>()?;

    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyFile);
    }

    let mut frozen = schema.clone();
    frozen.scaling = None;
    for (c, &pos) in frozen.columns.iter_mut().zip(&positions) {
        if c.kind == ColumnKind::Categorical && c.levels.is_none() {
            let levels: BTreeSet<&str> = records.iter().map(|r| &r[pos]).collect();
            c.levels = Some(levels.into_iter().map(str::to_string).collect());
        }
    }

    let n = frozen.dim();
    let mut features = Vec::with_capacity(records.len() * n);
    let mut sensitive = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        for (c, &pos) in frozen.columns.iter().zip(&positions) {
            let token = &rec[pos];
            match c.kind {
                ColumnKind::Numeric => {
                    let v: f64 = token.parse().map_err(|_| Error::UnparseableValue {
                        row,
                        col: c.name.clone(),
                        value: token.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::UnparseableValue {
                            row,
                            col: c.name.clone(),
                            value: token.to_string(),
                        });
                    }
                    features.push(v);
                }
                ColumnKind::Categorical => {
                    let levels = c.levels.as_ref().expect("levels frozen above");
                    let hit = levels.iter().position(|l| l == token).ok_or_else(|| {
                        Error::UnknownCategory {
                            column: c.name.clone(),
                            token: token.to_string(),
                        }
                    })?;
                    features.extend((0..levels.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
                ColumnKind::Sensitive => sensitive.push(u8::from(token == frozen.group1)),
                ColumnKind::Label => labels.push(if token == frozen.positive_label {
                    1
                } else {
                    -1
                }),
            }
        }
    }
    Dataset::new(features, sensitive, labels, frozen)
}

/// Standardizes numeric features to zero mean and unit population std.
/// Constant columns are centered and get a stored std of 1.
pub fn standardize(d: &Dataset) -> (Dataset, ScalingParams) {
    let features = d.schema.numeric_features();
    let count = d.len() as f64;
    let mut mean = Vec::with_capacity(features.len());
    let mut std = Vec::with_capacity(features.len());
    for &j in &features {
        let mu = (0..d.len()).map(|i| d.row(i)[j]).sum::<f64>() / count;
        let var = (0..d.len())
            .map(|i| (d.row(i)[j] - mu).powi(2))
            .sum::<f64>()
            / count;
        let sd = var.sqrt();
        mean.push(mu);
        std.push(if sd > 0.0 { sd } else { 1.0 });
    }
    let params = ScalingParams {
        features,
        mean,
        std,
    };
    let scaled = params
        .apply(d)
        .expect("feature indices come from the schema");
    (scaled, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Seeded shuffle of row indices, then prefix take. Both parts keep the
/// original row order.
pub fn split(d: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    if spec.n_train == 0 || spec.n_train >= n {
        return Err(Error::InvalidSplit {
            n_train: spec.n_train,
            n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let (train, test) = idx.split_at_mut(spec.n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.subset(train)?, d.subset(test)?))
}

/// Gaussian clusters per (group, label) cell.
///
/// `counts[g][k]` and `means[g][k]` index group `g` and label `k`, with
/// `k = 0` for label −1 and `k = 1` for label +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub counts: [[usize; 2]; 2],
    pub means: [[Vec<f64>; 2]; 2],
    pub noise_std: f64,
}

impl SynthSpec {
    /// Biased two-group fixture of dimension `dim` with `total` samples.
    ///
    /// Group 0 is 70% positive, group 1 is 30% positive. Feature 0 carries
    /// the label signal, feature 1 is a proxy for the group, and remaining
    /// features mix weak label and group signals. An accuracy-only
    /// classifier leans on the proxy and shows a large CV gap.
    pub fn biased(dim: usize, total: usize) -> Self {
        assert!(dim >= 2, "biased fixture needs at least two features");
        assert!(total >= 20, "biased fixture needs at least 20 samples");
        let t = total / 20;
        let counts = [[3 * t, 7 * t], [total - 13 * t, 3 * t]];
        let cell = |g: f64, y: f64| -> Vec<f64> {
            let mut m = vec![0.0; dim];
            m[0] = 0.6 * y;
            m[1] = 1.2 * g - 0.6;
            for (k, v) in m.iter_mut().enumerate().skip(2) {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                *v = sign * (0.2 * y + 0.3 * g);
            }
            m
        };
        Self {
            counts,
            means: [
                [cell(0.0, -1.0), cell(0.0, 1.0)],
                [cell(1.0, -1.0), cell(1.0, 1.0)],
            ],
            noise_std: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.means[0][0].len()
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidSpec("noise_std must be positive".into()));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::InvalidSpec("means must be non-empty".into()));
        }
        if self.means.iter().flatten().any(|m| m.len() != dim) {
            return Err(Error::InvalidSpec("means have differing dimensions".into()));
        }
        if self
            .means
            .iter()
            .flatten()
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidSpec("means must be finite".into()));
        }
        for (g, c) in self.counts.iter().enumerate() {
            if c[0] + c[1] == 0 {
                return Err(Error::InvalidSpec(format!("group {g} has zero samples")));
            }
        }
        Ok(())
    }
}

/// Draws a synthetic dataset; rows are shuffled so groups interleave.
pub fn synthesize(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(Vec<f64>, u8, i8)> = Vec::new();
    for g in 0..2u8 {
        for (k, label) in [-1i8, 1].into_iter().enumerate() {
            let mean = &spec.means[g as usize][k];
            for _ in 0..spec.counts[g as usize][k] {
                let x = mean
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + spec.noise_std * z
                    })
                    .collect();
                rows.push((x, g, label));
            }
        }
    }
    rows.shuffle(&mut rng);
    let mut features = Vec::with_capacity(rows.len() * dim);
    let mut sensitive = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (x, g, y) in rows {
        features.extend(x);
        sensitive.push(g);
        labels.push(y);
    }
    Dataset::new(features, sensitive, labels, FeatureSchema::numeric(dim))
}
