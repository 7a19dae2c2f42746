//! Datasets, the synthetic domain-shift generator, and CSV ingestion.
//!
//! A [`Dataset`] is an ordered collection: index `i` is the sample space
//! of every selection distribution computed over it, so row order is part
//! of a dataset's identity.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: usize,
    /// Categorical domain feature (the genre analog importance weighting keys on).
    pub domain: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
    classes: usize,
    domains: usize,
}

impl Dataset {
    /// Validates dimensions, labels, domain features and id uniqueness.
    pub fn new(dim: usize, classes: usize, domains: usize, examples: Vec<Example>) -> Result<Self> {
        if dim == 0 || classes == 0 || domains == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset sizes must be positive (d={dim}, C={classes}, F={domains})"
            )));
        }
        let mut ids = HashSet::with_capacity(examples.len());
        for (row, e) in examples.iter().enumerate() {
            check_example(e, dim, classes, domains).map_err(|err| match err {
                Error::UnknownLabel { label, classes, .. } => Error::UnknownLabel {
                    row,
                    label,
                    classes,
                },
                other => other,
            })?;
            if !ids.insert(e.id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate example id {} at index {row}",
                    e.id
                )));
            }
        }
        Ok(Self {
            examples,
            dim,
            classes,
            domains,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn get(&self, i: usize) -> Option<&Example> {
        self.examples.get(i)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn domains(&self) -> usize {
        self.domains
    }

    /// Number of examples per domain-feature value, length `domains()`.
    pub fn domain_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.domains];
        for e in &self.examples {
            counts[e.domain] += 1;
        }
        counts
    }

    /// Largest id in the dataset, if any.
    pub fn max_id(&self) -> Option<u64> {
        self.examples.iter().map(|e| e.id).max()
    }

    /// Returns the neighboring dataset that holds `example` at position `index`.
    pub fn replace_example(&self, index: usize, example: Example) -> Result<Dataset> {
        if index >= self.examples.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.examples.len(),
            });
        }
        check_example(&example, self.dim, self.classes, self.domains)?;
        if self
            .examples
            .iter()
            .enumerate()
            .any(|(i, e)| i != index && e.id == example.id)
        {
            return Err(Error::InvalidArgument(format!(
                "replacement id {} already present at another index",
                example.id
            )));
        }
        let mut examples = self.examples.clone();
        examples[index] = example;
        Ok(Dataset {
            examples,
            dim: self.dim,
            classes: self.classes,
            domains: self.domains,
        })
    }

    /// Shape-compatible check used when several datasets must share d, C, F.
    pub fn same_shape(&self, other: &Dataset) -> bool {
        self.dim == other.dim && self.classes == other.classes && self.domains == other.domains
    }
}

/// Free-function form of [`Dataset::replace_example`].
pub fn replace_example(ds: &Dataset, index: usize, example: Example) -> Result<Dataset> {
    ds.replace_example(index, example)
}

fn check_example(e: &Example, dim: usize, classes: usize, domains: usize) -> Result<()> {
    if e.features.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: e.features.len(),
        });
    }
    if e.label >= classes {
        return Err(Error::UnknownLabel {
            row: 0,
            label: e.label,
            classes,
        });
    }
    if e.domain >= domains {
        return Err(Error::InvalidArgument(format!(
            "domain feature {} outside declared count {domains}",
            e.domain
        )));
    }
    if e.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPair {
    pub source_train: Dataset,
    pub source_eval: Dataset,
    pub target_train: Dataset,
    pub target_eval: Dataset,
}

impl DomainPair {
    pub fn new(
        source_train: Dataset,
        source_eval: Dataset,
        target_train: Dataset,
        target_eval: Dataset,
    ) -> Result<Self> {
        for other in [&source_eval, &target_train, &target_eval] {
            if !source_train.same_shape(other) {
                return Err(Error::InvalidArgument(
                    "domain pair datasets disagree on d, C or F".into(),
                ));
            }
        }
        Ok(Self {
            source_train,
            source_eval,
            target_train,
            target_eval,
        })
    }
}

fn default_cluster_scale() -> f64 {
    2.0
}

fn default_cluster_spread() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub dim: usize,
    pub classes: usize,
    pub domains: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub n_eval: usize,
    /// Displacement of every target cluster along one seeded direction.
    /// Also skews the target domain-feature mixture away from uniform.
    pub shift_strength: f64,
    pub label_noise: f64,
    pub seed: u64,
    /// Standard deviation of the cluster centers around the origin.
    #[serde(default = "default_cluster_scale")]
    pub cluster_scale: f64,
    /// Within-cluster standard deviation.
    #[serde(default = "default_cluster_spread")]
    pub cluster_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            classes: 3,
            domains: 3,
            n_source: 2000,
            n_target: 2000,
            n_eval: 2000,
            shift_strength: 1.5,
            label_noise: 0.05,
            seed: 7,
            cluster_scale: default_cluster_scale(),
            cluster_spread: default_cluster_spread(),
        }
    }
}

impl SynthConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim < 1 {
            v.push("data.dim must be >= 1".to_string());
        }
        if self.classes < 2 {
            v.push("data.classes must be >= 2".to_string());
        }
        if self.domains < 1 {
            v.push("data.domains must be >= 1".to_string());
        }
        for (name, n) in [
            ("data.n_source", self.n_source),
            ("data.n_target", self.n_target),
            ("data.n_eval", self.n_eval),
        ] {
            if n == 0 {
                v.push(format!("{name} must be > 0"));
            }
        }
        if !(self.shift_strength >= 0.0 && self.shift_strength.is_finite()) {
            v.push("data.shift_strength must be finite and >= 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            v.push("data.label_noise must lie in [0, 1]".to_string());
        }
        if !(self.cluster_scale >= 0.0 && self.cluster_scale.is_finite()) {
            v.push("data.cluster_scale must be finite and >= 0".to_string());
        }
        if !(self.cluster_spread >= 0.0 && self.cluster_spread.is_finite()) {
            v.push("data.cluster_spread must be finite and >= 0".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

// Independent RNG streams so that resampling one split never perturbs another.
const STREAM_TASK: u64 = 0;
const STREAM_SOURCE_TRAIN: u64 = 1;
const STREAM_SOURCE_EVAL: u64 = 2;
const STREAM_TARGET_TRAIN: u64 = 3;
const STREAM_TARGET_EVAL: u64 = 4;
const STREAM_POOL: u64 = 5;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The fixed data-generating process behind a [`SynthConfig`]: cluster
/// centers, the shift, the domain mixtures and the labelling rule.
///
/// Source and target share the labelling rule, so only `P(X)` differs.
#[derive(Debug, Clone)]
pub struct SynthTask {
    cfg: SynthConfig,
    /// C×d row-major generating weights; label = argmax of `W x`.
    label_weights: Vec<f64>,
    source_means: Vec<Vec<f64>>,
    target_means: Vec<Vec<f64>>,
    source_mix: Vec<f64>,
    target_mix: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

impl SynthTask {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, STREAM_TASK);
        let d = cfg.dim;

        let label_weights: Vec<f64> = (0..cfg.classes * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();

        let source_means: Vec<Vec<f64>> = (0..cfg.domains)
            .map(|_| {
                (0..d)
                    .map(|_| cfg.cluster_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();

        let mut direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            direction.iter_mut().for_each(|v| *v /= norm);
        }
        let target_means = source_means
            .iter()
            .map(|m| {
                m.iter()
                    .zip(&direction)
                    .map(|(a, u)| a + cfg.shift_strength * u)
                    .collect()
            })
            .collect();

        let source_mix = vec![1.0 / cfg.domains as f64; cfg.domains];
        let tilt: Vec<f64> = (0..cfg.domains)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let raw: Vec<f64> = tilt
            .iter()
            .map(|z| (cfg.shift_strength * z).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let target_mix = raw.iter().map(|r| r / total).collect();

        Ok(Self {
            cfg: cfg.clone(),
            label_weights,
            source_means,
            target_means,
            source_mix,
            target_mix,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn label_weights(&self) -> &[f64] {
        &self.label_weights
    }

    pub fn domain_mixture(&self, domain: Domain) -> &[f64] {
        match domain {
            Domain::Source => &self.source_mix,
            Domain::Target => &self.target_mix,
        }
    }

    pub fn cluster_means(&self, domain: Domain) -> &[Vec<f64>] {
        match domain {
            Domain::Source => &self.source_means,
            Domain::Target => &self.target_means,
        }
    }

    /// Noise-free label of a feature vector under the generating rule.
    pub fn clean_label(&self, x: &[f64]) -> usize {
        let d = self.cfg.dim;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.cfg.classes {
            let row = &self.label_weights[c * d..(c + 1) * d];
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            if s > best_score {
                best_score = s;
                best = c;
            }
        }
        best
    }

    /// Draws `n` examples from one domain, ids starting at `first_id`.
    pub fn sample<R: Rng>(&self, domain: Domain, n: usize, first_id: u64, rng: &mut R) -> Dataset {
        let cfg = &self.cfg;
        let mix = WeightedIndex::new(self.domain_mixture(domain)).expect("mixture is positive");
        let means = self.cluster_means(domain);
        let examples = (0..n)
            .map(|i| {
                let f = mix.sample(rng);
                let features: Vec<f64> = means[f]
                    .iter()
                    .map(|m| m + cfg.cluster_spread * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mut label = self.clean_label(&features);
                if cfg.label_noise > 0.0 && rng.random::<f64>() < cfg.label_noise {
                    let shift = rng.random_range(1..cfg.classes);
                    label = (label + shift) % cfg.classes;
                }
                Example {
                    id: first_id + i as u64,
                    features,
                    label,
                    domain: f,
                }
            })
            .collect();
        Dataset {
            examples,
            dim: cfg.dim,
            classes: cfg.classes,
            domains: cfg.domains,
        }
    }

    /// The full pair drawn from the config's own seed.
    pub fn pair(&self) -> DomainPair {
        self.pair_with_training_seed(None)
    }

    /// Eval splits always come from the config seed. With `Some(run_seed)`
    /// the two training splits are drawn independently per run.
    pub fn pair_with_training_seed(&self, run_seed: Option<u64>) -> DomainPair {
        let cfg = &self.cfg;
        let train_seed = match run_seed {
            None => cfg.seed,
            Some(s) => cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ s.wrapping_add(1),
        };
        let ns = cfg.n_source as u64;
        let nt = cfg.n_target as u64;
        let ne = cfg.n_eval as u64;
        let source_train = self.sample(
            Domain::Source,
            cfg.n_source,
            0,
            &mut stream_rng(train_seed, STREAM_SOURCE_TRAIN),
        );
        let source_eval = self.sample(
            Domain::Source,
            cfg.n_eval,
            ns,
            &mut stream_rng(cfg.seed, STREAM_SOURCE_EVAL),
        );
        let target_train = self.sample(
            Domain::Target,
            cfg.n_target,
            ns + ne,
            &mut stream_rng(train_seed, STREAM_TARGET_TRAIN),
        );
        let target_eval = self.sample(
            Domain::Target,
            cfg.n_eval,
            ns + ne + nt,
            &mut stream_rng(cfg.seed, STREAM_TARGET_EVAL),
        );
        DomainPair {
            source_train,
            source_eval,
            target_train,
            target_eval,
        }
    }

    /// Held-out target-domain examples, with ids above every split's.
    pub fn replacement_pool(&self, n: usize) -> Dataset {
        let cfg = &self.cfg;
        let first = (cfg.n_source + cfg.n_target + 2 * cfg.n_eval) as u64;
        self.sample(
            Domain::Target,
            n,
            first,
            &mut stream_rng(cfg.seed, STREAM_POOL),
        )
    }
}

/// Builds the source/target pair described by `cfg`. Pure in `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<DomainPair> {
    Ok(SynthTask::new(cfg)?.pair())
}

/// Column naming for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    /// Feature columns are `<prefix>0 .. <prefix>{d-1}`.
    pub feature_prefix: String,
    pub label_column: String,
    pub domain_column: String,
    /// Optional; when the column is absent ids are row indices.
    pub id_column: String,
    /// Declared class count. Labels at or above it are rejected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    /// Declared domain-feature count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domains: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            feature_prefix: "f".into(),
            label_column: "label".into(),
            domain_column: "domain".into(),
            id_column: "id".into(),
            classes: None,
            domains: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_csv(file, schema)
}

/// Reads a dataset from any CSV source. Rows are numbered from 1 (the
/// first line after the header) in error messages.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyDataset);
    }

    let mut feature_cols: Vec<(usize, usize)> = Vec::new();
    let mut label_col = None;
    let mut domain_col = None;
    let mut id_col = None;
    for (col, name) in headers.iter().enumerate() {
        if name == schema.label_column {
            label_col = Some(col);
        } else if name == schema.domain_column {
            domain_col = Some(col);
        } else if name == schema.id_column {
            id_col = Some(col);
        } else if let Some(rest) = name.strip_prefix(schema.feature_prefix.as_str()) {
            if let Ok(k) = rest.parse::<usize>() {
                feature_cols.push((k, col));
            }
        }
    }
    let label_col = label_col.ok_or_else(|| Error::Parse {
        row: 0,
        message: format!("missing column `{}`", schema.label_column),
    })?;
    let domain_col = domain_col.ok_or_else(|| Error::Parse {
        row: 0,
        message: format!("missing column `{}`", schema.domain_column),
    })?;
    feature_cols.sort_unstable();
    if feature_cols.is_empty() {
        return Err(Error::Parse {
            row: 0,
            message: format!("no `{}<k>` feature columns", schema.feature_prefix),
        });
    }
    for (expected, (k, _)) in feature_cols.iter().enumerate() {
        if *k != expected {
            return Err(Error::Parse {
                row: 0,
                message: format!(
                    "feature columns must be {p}0..{p}{{d-1}}; missing {p}{expected}",
                    p = schema.feature_prefix
                ),
            });
        }
    }
    let dim = feature_cols.len();

    let mut examples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let field = |col: usize| -> Result<&str> {
            let v = &record[col];
            if v.is_empty() {
                Err(Error::Parse {
                    row,
                    message: format!("missing value for column `{}`", &headers[col]),
                })
            } else {
                Ok(v)
            }
        };
        let mut features = Vec::with_capacity(dim);
        for &(_, col) in &feature_cols {
            let raw = field(col)?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column `{}`: `{raw}` is not a number", &headers[col]),
            })?;
            features.push(v);
        }
        let parse_index = |col: usize| -> Result<usize> {
            let raw = field(col)?;
            raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!(
                    "column `{}`: `{raw}` is not a non-negative integer",
                    &headers[col]
                ),
            })
        };
        let label = parse_index(label_col)?;
        if let Some(classes) = schema.classes {
            if label >= classes {
                return Err(Error::UnknownLabel {
                    row,
                    label,
                    classes,
                });
            }
        }
        let domain = parse_index(domain_col)?;
        if let Some(domains) = schema.domains {
            if domain >= domains {
                return Err(Error::Parse {
                    row,
                    message: format!("domain {domain} outside declared count {domains}"),
                });
            }
        }
        let id = match id_col {
            Some(col) => {
                let raw = field(col)?;
                raw.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("column `{}`: `{raw}` is not an id", &headers[col]),
                })?
            }
            None => i as u64,
        };
        examples.push(Example {
            id,
            features,
            label,
            domain,
        });
    }
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = schema
        .classes
        .unwrap_or_else(|| examples.iter().map(|e| e.label).max().unwrap_or(0) + 1);
    let domains = schema
        .domains
        .unwrap_or_else(|| examples.iter().map(|e| e.domain).max().unwrap_or(0) + 1);
    Dataset::new(dim, classes, domains, examples).map_err(|e| match e {
        Error::UnknownLabel {
            row,
            label,
            classes,
        } => Error::UnknownLabel {
            row: row + 1,
            label,
            classes,
        },
        other => other,
    })
}

/// Writes `f0..f{d-1},label,domain,id`. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.dim).map(|k| format!("f{k}")).collect();
    header.extend(["label".into(), "domain".into(), "id".into()]);
    w.write_record(&header)?;
    for e in &ds.examples {
        let mut rec: Vec<String> = e.features.iter().map(|v| v.to_string()).collect();
        rec.push(e.label.to_string());
        rec.push(e.domain.to_string());
        rec.push(e.id.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            dim: 4,
            classes: 3,
            domains: 3,
            n_source: 200,
            n_target: 150,
            n_eval: 100,
            shift_strength: 1.0,
            label_noise: 0.1,
            seed: 11,
            ..SynthConfig::default()
        }
    }

    fn toy(n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| Example {
                id: i as u64,
                features: vec![i as f64, -(i as f64)],
                label: i % 2,
                domain: 0,
            })
            .collect();
        Dataset::new(2, 2, 1, examples).unwrap()
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_synthetic(&small_cfg()).unwrap();
        let b = generate_synthetic(&small_cfg()).unwrap();
        assert_eq!(a, b);
        let mut c = small_cfg();
        c.seed = 12;
        assert_ne!(a, generate_synthetic(&c).unwrap());
    }

    #[test]
    fn generator_rejects_zero_counts() {
        let mut cfg = small_cfg();
        cfg.n_target = 0;
        cfg.dim = 0;
        match generate_synthetic(&cfg) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_shift_gives_matching_domains() {
        let cfg = SynthConfig {
            dim: 3,
            n_source: 20_000,
            n_target: 20_000,
            n_eval: 10,
            shift_strength: 0.0,
            ..small_cfg()
        };
        let pair = generate_synthetic(&cfg).unwrap();
        let mean = |ds: &Dataset| -> Vec<f64> {
            let mut m = vec![0.0; ds.dim()];
            for e in ds.examples() {
                for (a, b) in m.iter_mut().zip(&e.features) {
                    *a += b;
                }
            }
            m.iter().map(|v| v / ds.len() as f64).collect()
        };
        let (ms, mt) = (mean(&pair.source_train), mean(&pair.target_train));
        for (a, b) in ms.iter().zip(&mt) {
            assert!((a - b).abs() < 0.1, "{ms:?} vs {mt:?}");
        }
        let task = SynthTask::new(&cfg).unwrap();
        assert_eq!(
            task.domain_mixture(Domain::Source),
            task.domain_mixture(Domain::Target)
        );
    }

    #[test]
    fn noiseless_labels_follow_generating_rule() {
        let cfg = SynthConfig {
            label_noise: 0.0,
            ..small_cfg()
        };
        let task = SynthTask::new(&cfg).unwrap();
        let pair = task.pair();
        for ds in [&pair.source_train, &pair.target_train] {
            assert!(ds
                .examples()
                .iter()
                .all(|e| task.clean_label(&e.features) == e.label));
        }
    }

    #[test]
    fn shift_displaces_target_clusters() {
        let task = SynthTask::new(&small_cfg()).unwrap();
        for (s, t) in task
            .cluster_means(Domain::Source)
            .iter()
            .zip(task.cluster_means(Domain::Target))
        {
            let dist: f64 = s.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            assert!((dist.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resampled_training_keeps_eval_fixed() {
        let task = SynthTask::new(&small_cfg()).unwrap();
        let a = task.pair_with_training_seed(Some(1));
        let b = task.pair_with_training_seed(Some(2));
        assert_eq!(a.target_eval, b.target_eval);
        assert_eq!(a.source_eval, b.source_eval);
        assert_ne!(a.target_train, b.target_train);
    }

    #[test]
    fn replace_changes_exactly_one_position() {
        let ds = toy(5);
        let e = Example {
            id: 99,
            features: vec![7.0, 7.0],
            label: 1,
            domain: 0,
        };
        let out = ds.replace_example(0, e.clone()).unwrap();
        assert_eq!(out.get(0), Some(&e));
        assert_eq!(&out.examples()[1..], &ds.examples()[1..]);
        assert_eq!(ds, toy(5));
    }

    #[test]
    fn replace_with_identical_example_is_identity() {
        let ds = toy(5);
        let same = ds.get(3).unwrap().clone();
        assert_eq!(ds.replace_example(3, same).unwrap(), ds);
    }

    #[test]
    fn replace_rejects_bad_input() {
        let ds = toy(5);
        let e = ds.get(0).unwrap().clone();
        assert!(matches!(
            ds.replace_example(5, e),
            Err(Error::IndexOutOfRange { index: 5, len: 5 })
        ));
        let wide = Example {
            id: 50,
            features: vec![0.0; 3],
            label: 0,
            domain: 0,
        };
        assert!(matches!(
            ds.replace_example(1, wide),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_three_rows() {
        let text = "f0,f1,label,domain\n0.5,1.5,0,0\n-1,2,1,1\n3,4,2,0\n";
        let ds = read_csv(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.classes(), 3);
        assert_eq!(ds.domains(), 2);
        assert_eq!(ds.get(1).unwrap().id, 1);
        assert_eq!(ds.get(1).unwrap().features, vec![-1.0, 2.0]);
    }

    #[test]
    fn csv_missing_feature_names_row() {
        let text = "f0,f1,label,domain\n0.5,1.5,0,0\n-1,,1,1\n";
        let err = read_csv(text.as_bytes(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { row, ref message } => {
                assert_eq!(row, 2);
                assert!(message.contains("f1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let short = "f0,f1,label,domain\n0.5,1.5,0,0\n-1,1,1\n";
        assert!(matches!(
            read_csv(short.as_bytes(), &CsvSchema::default()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn csv_empty_file() {
        assert!(matches!(
            read_csv("".as_bytes(), &CsvSchema::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            read_csv("f0,label,domain\n".as_bytes(), &CsvSchema::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn csv_unknown_label() {
        let schema = CsvSchema {
            classes: Some(2),
            ..CsvSchema::default()
        };
        let text = "f0,label,domain\n0.5,0,0\n1.0,2,0\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema),
            Err(Error::UnknownLabel { row: 2, label: 2, classes: 2 })
        ));
    }

    #[test]
    fn csv_explicit_ids() {
        let text = "id,f0,label,domain\n10,0.5,0,0\n20,1.0,1,0\n";
        let ds = read_csv(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.get(1).unwrap().id, 20);
    }

    #[test]
    fn csv_round_trip_synthetic() {
        let pair = generate_synthetic(&small_cfg()).unwrap();
        let mut buf = Vec::new();
        write_csv(&pair.target_train, &mut buf).unwrap();
        let schema = CsvSchema {
            classes: Some(3),
            domains: Some(3),
            ..CsvSchema::default()
        };
        let back = read_csv(buf.as_slice(), &schema).unwrap();
        assert_eq!(back, pair.target_train);
    }
}
