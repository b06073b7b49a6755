//! Sampled signals, CSV ingestion, delay embedding and snapshot assembly.
//!
//! A [`RecordedSeries`] is a set of equally long, uniformly sampled named
//! channels. The monitored sensor and its related measurements live side by
//! side as ordinary channels; which is which is decided by the caller.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the mandatory time column in CSV files.
pub const TIME_COLUMN: &str = "t";

/// Maximum tolerated deviation of a timestamp spacing from the median spacing.
pub const MAX_RELATIVE_JITTER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values }
    }
}

/// Uniformly sampled multichannel time series.
///
/// Sample `k` is taken at `t0 + k / sample_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedSeries {
    channels: Vec<Channel>,
    sample_rate_hz: f64,
    t0: f64,
}

impl RecordedSeries {
    pub fn new(channels: Vec<Channel>, sample_rate_hz: f64, t0: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::Parameter(format!("t0 must be finite, got {t0}")));
        }
        let Some(first) = channels.first() else {
            return Err(Error::InsufficientData("series has no channels".into()));
        };
        let len = first.values.len();
        if len < 2 {
            return Err(Error::InsufficientData(format!(
                "series needs at least 2 samples, got {len}"
            )));
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if !seen.insert(ch.name.as_str()) {
                return Err(Error::DuplicateChannel(ch.name.clone()));
            }
            if ch.values.len() != len {
                return Err(Error::Shape(format!(
                    "channel `{}` has {} samples, expected {len}",
                    ch.name,
                    ch.values.len()
                )));
            }
        }
        Ok(Self { channels, sample_rate_hz, t0 })
    }

    pub fn len(&self) -> usize {
        self.channels[0].values.len()
    }

    /// Always false; a valid series has at least two samples.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate_hz
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    /// Returns a copy with `name`'s samples replaced.
    pub fn with_channel(&self, name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Shape(format!(
                "replacement for `{name}` has {} samples, expected {}",
                values.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        let ch = out
            .channels
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))?;
        ch.values = values;
        Ok(out)
    }

    /// Reorders the series to `[monitored, inputs...]`, dropping other channels.
    pub fn select(&self, monitored: &str, inputs: &[String]) -> Result<Self> {
        let mut channels = Vec::with_capacity(inputs.len() + 1);
        channels.push(Channel::new(monitored, self.channel(monitored)?.to_vec()));
        for name in inputs {
            channels.push(Channel::new(name.clone(), self.channel(name)?.to_vec()));
        }
        Self::new(channels, self.sample_rate_hz, self.t0)
    }

    /// Samples `[start, end)` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Shape(format!(
                "invalid range {start}..{end} for series of length {}",
                self.len()
            )));
        }
        let channels = self
            .channels
            .iter()
            .map(|c| Channel::new(c.name.clone(), c.values[start..end].to_vec()))
            .collect();
        Self::new(channels, self.sample_rate_hz, self.time(start))
    }

    /// Channel values of the given names stacked as rows.
    pub fn matrix(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let rows: Vec<&[f64]> = names.iter().map(|n| self.channel(n)).collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), self.len(), |i, j| rows[i][j]))
    }
}

fn parse_field(field: &str, row: usize, column: &str, path: &Path) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse {
        location: format!("{}:{} column `{column}`", path.display(), row),
        message: format!("`{field}`: {e}"),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Reads every channel of a CSV file whose first column is `t`.
///
/// The sample rate is inferred from the median timestamp spacing; any spacing
/// further than 1% from the median is rejected.
pub fn read_csv(path: impl AsRef<Path>) -> Result<RecordedSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { location: path.display().to_string(), message: e.to_string() })?
        .clone();
    if headers.get(0).map(str::trim) != Some(TIME_COLUMN) {
        return Err(Error::Parse {
            location: format!("{}:1", path.display()),
            message: format!("first column must be `{TIME_COLUMN}`"),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            location: format!("{}:{line}", path.display()),
            message: e.to_string(),
        })?;
        if record.len() != names.len() + 1 {
            return Err(Error::Parse {
                location: format!("{}:{line}", path.display()),
                message: format!("expected {} fields, found {}", names.len() + 1, record.len()),
            });
        }
        times.push(parse_field(&record[0], line, TIME_COLUMN, path)?);
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse_field(&record[c + 1], line, &names[c], path)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} has {} data rows, need at least 2",
            path.display(),
            times.len()
        )));
    }
    let spacings: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&mut spacings.clone());
    if !(med > 0.0 && med.is_finite()) {
        return Err(Error::NonUniformSampling { row: 2, spacing: spacings[0], median: med });
    }
    for (i, &s) in spacings.iter().enumerate() {
        if (s - med).abs() > MAX_RELATIVE_JITTER * med {
            return Err(Error::NonUniformSampling { row: i + 3, spacing: s, median: med });
        }
    }
    let channels = names.into_iter().zip(columns).map(|(n, v)| Channel::new(n, v)).collect();
    RecordedSeries::new(channels, 1.0 / med, times[0])
}

/// Reads a CSV and keeps only `monitored` followed by `inputs`, in that order.
pub fn load_csv(path: impl AsRef<Path>, monitored: &str, inputs: &[String]) -> Result<RecordedSeries> {
    read_csv(path)?.select(monitored, inputs)
}

pub fn write_csv(series: &RecordedSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(w, "{TIME_COLUMN}").map_err(io)?;
    for ch in series.channels() {
        write!(w, ",{}", ch.name).map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for k in 0..series.len() {
        write!(w, "{}", series.time(k)).map_err(io)?;
        for ch in series.channels() {
            write!(w, ",{}", ch.values[k]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes a binary sequence as a two-column CSV (`t,<column>`).
pub fn write_binary_csv(
    path: impl AsRef<Path>,
    column: &str,
    values: &[u8],
    sample_rate_hz: f64,
    t0: f64,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{TIME_COLUMN},{column}").map_err(io)?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{},{v}", t0 + k as f64 / sample_rate_hz).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the second column of a two-column binary CSV written by [`write_binary_csv`].
pub fn read_binary_csv(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let series = read_csv(path.as_ref())?;
    let ch = series.channels().first().ok_or_else(|| Error::Parse {
        location: path.as_ref().display().to_string(),
        message: "no value column".into(),
    })?;
    ch.values
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            other => Err(Error::Parse {
                location: format!("{}:{}", path.as_ref().display(), i + 2),
                message: format!("expected 0 or 1, found {other}"),
            }),
        })
        .collect()
}

/// Delay-embedding configuration: `delays` lagged copies at `stride` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayConfig {
    pub stride: usize,
    pub delays: usize,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self { stride: 1, delays: 10 }
    }
}

impl DelayConfig {
    pub fn new(stride: usize, delays: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Parameter("delay stride must be positive".into()));
        }
        Ok(Self { stride, delays })
    }

    /// Length of the embedded vector.
    pub fn dim(&self) -> usize {
        self.delays + 1
    }

    /// First sample index with a complete embedding.
    pub fn warmup(&self) -> usize {
        self.delays * self.stride
    }
}

/// Embeds a scalar sequence newest-first.
///
/// Column `j` holds `[x_k, x_{k-d}, ..., x_{k-n_d d}]` with `k = j + n_d d`.
pub fn delay_embed(values: &[f64], cfg: DelayConfig) -> Result<DMatrix<f64>> {
    let warmup = cfg.warmup();
    if values.len() <= warmup {
        return Err(Error::InsufficientData(format!(
            "delay embedding with {} delays at stride {} needs more than {warmup} samples, got {}",
            cfg.delays,
            cfg.stride,
            values.len()
        )));
    }
    let cols = values.len() - warmup;
    Ok(DMatrix::from_fn(cfg.dim(), cols, |i, j| values[j + warmup - i * cfg.stride]))
}

/// Time-shifted snapshot pair plus the aligned input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrices {
    pub x: DMatrix<f64>,
    pub x_next: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
}

impl SnapshotMatrices {
    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

/// Splits `states` (n x (m+1)) into X, X' and aligns the first m input columns.
pub fn snapshot_matrices(states: &DMatrix<f64>, inputs: &DMatrix<f64>) -> Result<SnapshotMatrices> {
    let total = states.ncols();
    if total < 2 {
        return Err(Error::InsufficientData(format!(
            "snapshot assembly needs at least 2 state columns, got {total}"
        )));
    }
    if inputs.nrows() > 0 && inputs.ncols() != total {
        return Err(Error::Shape(format!(
            "inputs have {} columns, states have {total}",
            inputs.ncols()
        )));
    }
    let m = total - 1;
    let u = if inputs.nrows() == 0 {
        DMatrix::zeros(0, m)
    } else {
        inputs.columns(0, m).into_owned()
    };
    Ok(SnapshotMatrices {
        x: states.columns(0, m).into_owned(),
        x_next: states.columns(1, m).into_owned(),
        inputs: u,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic shuffled k-fold partition of `0..n`.
///
/// Test folds are disjoint, cover every index and differ in size by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Parameter(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Parameter(format!("fold count {k} exceeds sample count {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}
