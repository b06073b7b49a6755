//! Offline training, online detection, evaluation metrics and model files.

mod hexfloat;
mod model_file;

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::classifier::{class_reweight, cross_validate, tree_fit, tree_predict, CvResult, TrainedTree};
use crate::error::{Error, Result};
use crate::observer::{run_observer, ObserverConfig, ObserverState};
use crate::sysid::{dmdc_fit, LtiModel, RankPolicy};
use crate::timeseries::{delay_embed, snapshot_matrices, DelayConfig, RecordedSeries};

pub use hexfloat::{format as format_hex_f64, parse as parse_hex_f64};
pub use model_file::{load_model, model_from_json, model_to_json, save_model, FORMAT_NAME, FORMAT_VERSION};

/// Feature name of the innovation covariance in every schema.
pub const VK_FEATURE: &str = "V_k";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub monitored: String,
    pub inputs: Vec<String>,
    pub delay: DelayConfig,
    pub rank: RankPolicy,
    pub observer: ObserverConfig,
    pub depth_grid: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    /// Draw this many labeled rows uniformly at random; all rows when absent.
    pub train_samples: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            monitored: String::new(),
            inputs: Vec::new(),
            delay: DelayConfig::default(),
            rank: RankPolicy::default(),
            observer: ObserverConfig::default(),
            depth_grid: (1..=7).collect(),
            folds: 5,
            seed: 0,
            train_samples: None,
        }
    }
}

impl TrainConfig {
    pub fn new(monitored: impl Into<String>, inputs: Vec<String>) -> Self {
        Self { monitored: monitored.into(), inputs, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.monitored.is_empty() {
            return Err(Error::Config("no monitored channel given".into()));
        }
        if self.monitored == VK_FEATURE || self.inputs.iter().any(|c| c == VK_FEATURE) {
            return Err(Error::Config(format!("`{VK_FEATURE}` is reserved for the innovation covariance feature")));
        }
        let mut names = vec![&self.monitored];
        for c in &self.inputs {
            if names.contains(&c) {
                return Err(Error::DuplicateChannel(c.clone()));
            }
            names.push(c);
        }
        DelayConfig::new(self.delay.stride, self.delay.delays)?;
        self.observer.validate()?;
        if self.depth_grid.is_empty() || self.depth_grid.contains(&0) {
            return Err(Error::Config("depth grid must be nonempty with entries of at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.train_samples == Some(0) {
            return Err(Error::Config("train_samples must be positive".into()));
        }
        Ok(())
    }

    /// `[monitored, inputs…, V_k]`.
    pub fn feature_schema(&self) -> Vec<String> {
        let mut s = vec![self.monitored.clone()];
        s.extend(self.inputs.iter().cloned());
        s.push(VK_FEATURE.to_string());
        s
    }
}

/// Plant model, observer settings and tree, as persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub lti: LtiModel,
    pub observer: ObserverConfig,
    pub tree: TrainedTree,
    pub feature_schema: Vec<String>,
    pub format_version: u32,
}

impl DetectorModel {
    pub fn new(lti: LtiModel, observer: ObserverConfig, tree: TrainedTree, feature_schema: Vec<String>) -> Result<Self> {
        let model = Self { lti, observer, tree, feature_schema, format_version: FORMAT_VERSION };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.observer.validate()?;
        if self.lti.state_dim() != self.lti.delay.dim() {
            return Err(Error::Shape(format!(
                "state dimension {} does not match the {}-sample embedding",
                self.lti.state_dim(),
                self.lti.delay.dim()
            )));
        }
        if self.feature_schema.iter().filter(|n| *n == VK_FEATURE).count() != 1 {
            return Err(Error::Shape(format!("feature schema must contain `{VK_FEATURE}` exactly once")));
        }
        if self.feature_schema.last().map(String::as_str) != Some(VK_FEATURE) {
            return Err(Error::Shape(format!("`{VK_FEATURE}` must be the last schema entry")));
        }
        let mut raw = vec![self.lti.state_channel.clone()];
        raw.extend(self.lti.input_channels.iter().cloned());
        if self.raw_channels() != raw.as_slice() {
            return Err(Error::Shape(format!(
                "schema channels {:?} differ from the plant channels {raw:?}",
                self.raw_channels()
            )));
        }
        if self.feature_schema.len() != self.tree.n_features() {
            return Err(Error::Shape(format!(
                "schema has {} features, tree expects {}",
                self.feature_schema.len(),
                self.tree.n_features()
            )));
        }
        Ok(())
    }

    /// Channel names a stream must provide, in sample order.
    pub fn raw_channels(&self) -> &[String] {
        &self.feature_schema[..self.feature_schema.len() - 1]
    }
}

/// Fits DMDc on the delay-embedded monitored channel of `clean`.
pub fn identify_plant(clean: &RecordedSeries, cfg: &TrainConfig) -> Result<LtiModel> {
    cfg.validate()?;
    let monitored = clean.channel(&cfg.monitored)?;
    let states = delay_embed(monitored, cfg.delay)?;
    let start = cfg.delay.warmup();
    let input_values: Vec<&[f64]> = cfg.inputs.iter().map(|n| clean.channel(n)).collect::<Result<_>>()?;
    let inputs = DMatrix::from_fn(input_values.len(), states.ncols(), |i, j| input_values[i][start + j]);
    let snaps = snapshot_matrices(&states, &inputs)?;
    dmdc_fit(&snaps, cfg.rank, cfg.delay, &cfg.monitored, &cfg.inputs)
}

/// Per-sample detector features with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    /// One row per sample, columns in `schema` order.
    pub features: DMatrix<f64>,
    pub labels: Vec<u8>,
    pub schema: Vec<String>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            features: DMatrix::from_fn(indices.len(), self.features.ncols(), |i, j| self.features[(indices[i], j)]),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            schema: self.schema.clone(),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    fn concat(parts: Vec<FeatureTable>, schema: Vec<String>) -> FeatureTable {
        let n: usize = parts.iter().map(FeatureTable::len).sum();
        let cols = schema.len();
        let mut features = DMatrix::zeros(n, cols);
        let mut labels = Vec::with_capacity(n);
        let mut at = 0;
        for p in parts {
            features.rows_mut(at, p.len()).copy_from(&p.features);
            at += p.len();
            labels.extend(p.labels);
        }
        FeatureTable { features, labels, schema }
    }
}

/// Runs the observer over one labeled series and keeps the samples whose
/// `V_k` window has filled.
pub fn series_features(
    lti: &LtiModel,
    observer: &ObserverConfig,
    series: &RecordedSeries,
    labels: &[u8],
    schema: &[String],
) -> Result<FeatureTable> {
    if labels.len() != series.len() {
        return Err(Error::Shape(format!("{} labels for a series of {} samples", labels.len(), series.len())));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Parameter(format!("label {} at sample {i} is not binary", labels[i])));
    }
    let trace = run_observer(lti, observer, series)?;
    let raw: Vec<&[f64]> = schema[..schema.len() - 1].iter().map(|n| series.channel(n)).collect::<Result<_>>()?;
    let first = trace.first_valid_sample();
    let rows: Vec<usize> = (first..series.len()).collect();
    let features = DMatrix::from_fn(rows.len(), schema.len(), |i, j| {
        let k = rows[i];
        if j < raw.len() {
            raw[j][k]
        } else {
            trace.vk_at(k).expect("window filled")
        }
    });
    Ok(FeatureTable { features, labels: labels[first..].to_vec(), schema: schema.to_vec() })
}

/// Pools the feature rows of several labeled series.
pub fn labeled_features(
    lti: &LtiModel,
    observer: &ObserverConfig,
    sets: &[(RecordedSeries, Vec<u8>)],
    schema: &[String],
) -> Result<FeatureTable> {
    let parts = sets
        .iter()
        .map(|(s, l)| series_features(lti, observer, s, l, schema))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable::concat(parts, schema.to_vec()))
}

/// Uniform random draw of `count` distinct row indices, sorted.
pub fn sample_rows(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::InsufficientData(format!("cannot draw {count} rows from {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Reweights classes, selects depth by cross-validation and fits the tree.
pub fn fit_detector_tree(table: &FeatureTable, cfg: &TrainConfig) -> Result<(TrainedTree, CvResult)> {
    let weights = class_reweight(&table.labels)?;
    let cv = cross_validate(&table.features, &table.labels, &weights, &cfg.depth_grid, cfg.folds, cfg.seed)?;
    let tree = tree_fit(&table.features, &table.labels, &weights, cv.best_depth, table.schema.clone())?;
    Ok((tree, cv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub cv: CvResult,
    pub labeled_rows: usize,
    pub train_rows: usize,
}

/// Offline phase: plant identification on clean data, observer features on
/// the labeled runs, then the tree.
pub fn offline_train(
    clean: &RecordedSeries,
    labeled: &[(RecordedSeries, Vec<u8>)],
    cfg: &TrainConfig,
) -> Result<DetectorModel> {
    offline_train_with_report(clean, labeled, cfg).map(|(m, _)| m)
}

pub fn offline_train_with_report(
    clean: &RecordedSeries,
    labeled: &[(RecordedSeries, Vec<u8>)],
    cfg: &TrainConfig,
) -> Result<(DetectorModel, TrainReport)> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::InsufficientData("no labeled series given".into()));
    }
    let lti = identify_plant(clean, cfg)?;
    let schema = cfg.feature_schema();
    let pool = labeled_features(&lti, &cfg.observer, labeled, &schema)?;
    let table = match cfg.train_samples {
        Some(count) => pool.subset(&sample_rows(pool.len(), count, cfg.seed)?),
        None => pool.clone(),
    };
    let (tree, cv) = fit_detector_tree(&table, cfg)?;
    let model = DetectorModel::new(lti, cfg.observer, tree, schema)?;
    Ok((model, TrainReport { cv, labeled_rows: pool.len(), train_rows: table.len() }))
}

/// Streaming detector: one sample in, one flag out.
#[derive(Debug, Clone)]
pub struct Detector<'m> {
    model: &'m DetectorModel,
    history: VecDeque<f64>,
    observer: Option<ObserverState>,
    position: usize,
    x: DVector<f64>,
    y: DVector<f64>,
    row: Vec<f64>,
}

impl<'m> Detector<'m> {
    pub fn new(model: &'m DetectorModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            history: VecDeque::with_capacity(model.lti.delay.warmup() + 1),
            observer: None,
            position: 0,
            x: DVector::zeros(model.lti.state_dim()),
            y: DVector::zeros(model.lti.input_dim()),
            row: vec![0.0; model.feature_schema.len()],
        })
    }

    /// Samples consumed so far.
    pub fn position(&self) -> usize {
        self.position
    }

    /// Current `V_k`, once the window has filled.
    pub fn vk(&self) -> Option<f64> {
        self.observer.as_ref().filter(|o| o.window_full()).map(ObserverState::vk)
    }

    /// Consumes one sample ordered as [`DetectorModel::raw_channels`].
    pub fn push(&mut self, sample: &[f64]) -> Result<u8> {
        let channels = self.model.raw_channels();
        if sample.len() != channels.len() {
            return Err(Error::Shape(format!(
                "stream position {}: sample has {} values, expected {} ({})",
                self.position,
                sample.len(),
                channels.len(),
                channels.join(", ")
            )));
        }
        if let Some(i) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                value: sample[i],
                context: format!("stream position {}, channel `{}`", self.position, channels[i]),
            });
        }
        let lti = &self.model.lti;
        let warmup = lti.delay.warmup();
        if self.history.len() == warmup + 1 {
            self.history.pop_back();
        }
        self.history.push_front(sample[0]);
        let k = self.position;
        self.position += 1;
        if k < warmup {
            return Ok(0);
        }
        let stride = lti.delay.stride;
        for i in 0..self.x.len() {
            self.x[i] = self.history[i * stride];
        }
        for i in 0..self.y.len() {
            self.y[i] = sample[1 + i];
        }
        let cfg = &self.model.observer;
        let observer = match &mut self.observer {
            Some(o) => o,
            slot => slot.insert(ObserverState::new(self.x.clone(), cfg)?),
        };
        observer.step(lti, cfg, &self.x, &self.y).map_err(|e| match e {
            Error::NonFinite { value, context } => {
                Error::NonFinite { value, context: format!("stream position {k}: {context}") }
            }
            other => other,
        })?;
        if !observer.window_full() {
            return Ok(0);
        }
        self.row[..sample.len()].copy_from_slice(sample);
        *self.row.last_mut().expect("schema has V_k") = observer.vk();
        tree_predict(&self.model.tree, &self.row)
    }
}

/// Batch form of [`Detector`].
pub fn online_detect(model: &DetectorModel, series: &RecordedSeries) -> Result<Vec<u8>> {
    let columns: Vec<&[f64]> = model.raw_channels().iter().map(|n| series.channel(n)).collect::<Result<_>>()?;
    let mut det = Detector::new(model)?;
    let mut sample = vec![0.0; columns.len()];
    (0..series.len())
        .map(|k| {
            for (s, c) in sample.iter_mut().zip(&columns) {
                *s = c[k];
            }
            det.push(&sample)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagTime {
    Seconds(f64),
    /// A fault exists but is never flagged after onset.
    Infinite,
    /// No fault in the labels.
    NotApplicable,
}

impl Serialize for LagTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LagTime::Seconds(v) => s.serialize_f64(*v),
            LagTime::Infinite => s.serialize_str("inf"),
            LagTime::NotApplicable => s.serialize_none(),
        }
    }
}

impl fmt::Display for LagTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LagTime::Seconds(v) => write!(f, "{v} s"),
            LagTime::Infinite => f.write_str("inf"),
            LagTime::NotApplicable => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub total: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub accuracy: f64,
    /// `None` when nothing was flagged.
    pub precision: Option<f64>,
    /// `None` when no sample is faulty.
    pub recall: Option<f64>,
    pub lag_time_s: LagTime,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ratio = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        writeln!(f, "total            {}", self.total)?;
        writeln!(f, "false positives  {}", self.false_positives)?;
        writeln!(f, "false negatives  {}", self.false_negatives)?;
        writeln!(f, "accuracy         {:.6}", self.accuracy)?;
        writeln!(f, "precision        {}", ratio(self.precision))?;
        writeln!(f, "recall           {}", ratio(self.recall))?;
        write!(f, "lag time         {}", self.lag_time_s)
    }
}

/// Confusion counts, ratios and lag to the first post-onset flag.
pub fn evaluate(flags: &[u8], labels: &[u8], sample_rate_hz: f64) -> Result<MetricsReport> {
    evaluate_debounced(flags, labels, sample_rate_hz, 0)
}

/// As [`evaluate`], but a detection needs `debounce + 1` consecutive flags;
/// the lag is measured to the first of them.
pub fn evaluate_debounced(flags: &[u8], labels: &[u8], sample_rate_hz: f64, debounce: usize) -> Result<MetricsReport> {
    if flags.len() != labels.len() {
        return Err(Error::Shape(format!("{} flags for {} labels", flags.len(), labels.len())));
    }
    if flags.is_empty() {
        return Err(Error::InsufficientData("nothing to evaluate".into()));
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::Parameter(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    for (what, v) in [("flag", flags), ("label", labels)] {
        if let Some(i) = v.iter().position(|&x| x > 1) {
            return Err(Error::Parameter(format!("{what} {} at index {i} is not binary", v[i])));
        }
    }
    let mut c = [[0usize; 2]; 2];
    for (&f, &l) in flags.iter().zip(labels) {
        c[l as usize][f as usize] += 1;
    }
    let (tn, fp, fn_, tp) = (c[0][0], c[0][1], c[1][0], c[1][1]);
    let total = flags.len();
    let lag_time_s = match labels.iter().position(|&l| l == 1) {
        None => LagTime::NotApplicable,
        Some(onset) => {
            let run = debounce + 1;
            let mut streak = 0;
            let mut found = None;
            for (k, &f) in flags.iter().enumerate().skip(onset) {
                streak = if f == 1 { streak + 1 } else { 0 };
                if streak == run {
                    found = Some(k + 1 - run);
                    break;
                }
            }
            found.map_or(LagTime::Infinite, |k| LagTime::Seconds((k - onset) as f64 / sample_rate_hz))
        }
    };
    Ok(MetricsReport {
        total,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        accuracy: 1.0 - (fp + fn_) as f64 / total as f64,
        precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
        recall: (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64),
        lag_time_s,
    })
}
