//! Scalar-gain Kalman observer and the moving-average innovation covariance.
//!
//! The observer runs alongside the identified model:
//!
//! ```text
//! x̂_{k+1} = A x̂_k + B y_k + K (x_k − x̂_k)
//! ```
//!
//! `K` is a scalar applied to every component of the delay-embedded
//! innovation. Only the current-time component (row 0 of the embedding)
//! feeds `V_k`, the mean of the last `N` squared innovations.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysid::LtiModel;
use crate::timeseries::RecordedSeries;

pub const DEFAULT_GAIN: f64 = 0.01;
pub const DEFAULT_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub gain: f64,
    pub window: usize,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self { gain: DEFAULT_GAIN, window: DEFAULT_WINDOW }
    }
}

impl ObserverConfig {
    pub fn new(gain: f64, window: usize) -> Result<Self> {
        let cfg = Self { gain, window };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0 && self.gain < 1.0) {
            return Err(Error::Parameter(format!("observer gain must lie in [0, 1), got {}", self.gain)));
        }
        if self.window == 0 {
            return Err(Error::Parameter("observer window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean of squared innovations over the most recent `min(window, len)` entries.
pub fn innovation_covariance(buffer: &[f64], window: usize) -> Result<f64> {
    if buffer.is_empty() || window == 0 {
        return Err(Error::InsufficientData("innovation buffer is empty".into()));
    }
    let take = window.min(buffer.len());
    Ok(shifted_mean(buffer[buffer.len() - take..].iter().map(|e| e * e)))
}

// Mean computed around the first element: equal inputs give that value back exactly.
fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(shift) = it.next() else { return 0.0 };
    let mut n = 0usize;
    let mut acc = 0.0;
    for v in values {
        acc += v - shift;
        n += 1;
    }
    (shift + acc / n as f64).max(0.0)
}

/// Streaming observer state: estimate, recent innovations and current `V_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    xhat: DVector<f64>,
    window_buf: VecDeque<f64>,
    vk: f64,
    capacity: usize,
}

impl ObserverState {
    /// Starts from the first embedded measurement so the first innovation is zero.
    pub fn new(first_measurement: DVector<f64>, cfg: &ObserverConfig) -> Result<Self> {
        cfg.validate()?;
        check_finite(first_measurement.as_slice(), "initial measurement")?;
        Ok(Self {
            xhat: first_measurement,
            window_buf: VecDeque::with_capacity(cfg.window),
            vk: 0.0,
            capacity: cfg.window,
        })
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.xhat
    }

    pub fn vk(&self) -> f64 {
        self.vk
    }

    /// True once `window` innovations have been seen.
    pub fn window_full(&self) -> bool {
        self.window_buf.len() == self.capacity
    }

    pub fn buffered(&self) -> impl Iterator<Item = f64> + '_ {
        self.window_buf.iter().copied()
    }

    /// Advances one sample in place and returns the current-time innovation.
    pub fn step(
        &mut self,
        model: &LtiModel,
        cfg: &ObserverConfig,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<f64> {
        if x.len() != model.state_dim() || self.xhat.len() != model.state_dim() {
            return Err(Error::Shape(format!(
                "measurement has {} components, model state has {}",
                x.len(),
                model.state_dim()
            )));
        }
        if y.len() != model.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} components, model expects {}",
                y.len(),
                model.input_dim()
            )));
        }
        if cfg.window != self.capacity {
            return Err(Error::Parameter(format!(
                "observer state built for window {}, stepped with {}",
                self.capacity, cfg.window
            )));
        }
        check_finite(x.as_slice(), "measurement")?;
        check_finite(y.as_slice(), "input")?;

        let residual = x - &self.xhat;
        let innovation = residual[0];
        let mut next = model.predict(&self.xhat, y);
        if cfg.gain != 0.0 {
            next.axpy(cfg.gain, &residual, 1.0);
        }
        if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { value: *bad, context: "observer estimate".into() });
        }
        self.xhat = next;

        if self.window_buf.len() == self.capacity {
            self.window_buf.pop_front();
        }
        self.window_buf.push_back(innovation);
        self.vk = shifted_mean(self.window_buf.iter().map(|e| e * e));
        Ok(innovation)
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite { value: values[i], context: format!("{what} component {i}") }),
        None => Ok(()),
    }
}

/// Pure single step: returns the advanced state and the current-time innovation.
pub fn observer_step(
    state: &ObserverState,
    model: &LtiModel,
    cfg: &ObserverConfig,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(ObserverState, f64)> {
    let mut next = state.clone();
    let e = next.step(model, cfg, x, y)?;
    Ok((next, e))
}

/// Innovations and `V_k` for a whole series.
///
/// Entry `j` corresponds to sample `start + j`, where `start` is the
/// embedding warmup. `V_k` is a full-window average from entry `valid_from`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverTrace {
    pub start: usize,
    pub valid_from: usize,
    pub innovations: Vec<f64>,
    pub vk: Vec<f64>,
}

impl ObserverTrace {
    pub fn len(&self) -> usize {
        self.vk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vk.is_empty()
    }

    /// First sample index whose `V_k` covers a full window.
    pub fn first_valid_sample(&self) -> usize {
        self.start + self.valid_from
    }

    /// `V_k` at a series sample index, if the window has filled by then.
    pub fn vk_at(&self, sample: usize) -> Option<f64> {
        let j = sample.checked_sub(self.start)?;
        (j >= self.valid_from).then(|| self.vk.get(j).copied()).flatten()
    }
}

/// Embedded measurement `[v_k, v_{k-d}, ...]` at sample `k`.
pub(crate) fn embed_at(values: &[f64], k: usize, model: &LtiModel) -> DVector<f64> {
    let d = model.delay.stride;
    DVector::from_fn(model.delay.dim(), |i, _| values[k - i * d])
}

/// Runs the observer over every sample of `series`.
pub fn run_observer(model: &LtiModel, cfg: &ObserverConfig, series: &RecordedSeries) -> Result<ObserverTrace> {
    cfg.validate()?;
    let monitored = series.channel(&model.state_channel)?;
    let inputs: Vec<&[f64]> =
        model.input_channels.iter().map(|n| series.channel(n)).collect::<Result<_>>()?;
    let start = model.delay.warmup();
    if series.len() <= start {
        return Err(Error::InsufficientData(format!(
            "series of {} samples is shorter than the embedding warmup {start}",
            series.len()
        )));
    }
    let mut state = ObserverState::new(embed_at(monitored, start, model), cfg)
        .map_err(|e| at_sample(e, start))?;
    let n_out = series.len() - start;
    let mut innovations = Vec::with_capacity(n_out);
    let mut vk = Vec::with_capacity(n_out);
    let mut y = DVector::zeros(inputs.len());
    for k in start..series.len() {
        let x = embed_at(monitored, k, model);
        for (i, ch) in inputs.iter().enumerate() {
            y[i] = ch[k];
        }
        let e = state.step(model, cfg, &x, &y).map_err(|e| at_sample(e, k))?;
        innovations.push(e);
        vk.push(state.vk());
    }
    Ok(ObserverTrace { start, valid_from: cfg.window - 1, innovations, vk })
}

fn at_sample(err: Error, k: usize) -> Error {
    match err {
        Error::NonFinite { value, context } => Error::NonFinite { value, context: format!("sample {k}: {context}") },
        other => other,
    }
}
