//! End-to-end synthetic experiments: Goman–Khrabrov stall and the flight
//! surrogate, each with the four injected fault modes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::{accuracy, CvResult};
use crate::error::{Error, Result};
use crate::faults::{inject_fault, FaultKind, FaultMode, FaultSpec};
use crate::observer::{run_observer, ObserverConfig};
use crate::pipeline::{
    evaluate, fit_detector_tree, identify_plant, labeled_features, DetectorModel, FeatureTable, MetricsReport,
    TrainConfig,
};
use crate::simulators::{
    flight_simulate, gk_simulate, FlightSimConfig, GkConfig, FLIGHT_AOA, FLIGHT_INERTIAL_SPEED, FLIGHT_LIFT,
    FLIGHT_PITCH, FLIGHT_TAS, FLIGHT_THRUST, GK_ALPHA, GK_ALPHA_DOT, GK_LIFT,
};
use crate::sysid::{LtiModel, RankPolicy};
use crate::timeseries::{DelayConfig, RecordedSeries};

pub type LabeledRun = (RecordedSeries, Vec<u8>);

/// One faulted copy of `clean` per entry of `kinds`, seeded `seed + i`.
pub fn fault_runs(
    clean: &RecordedSeries,
    channel: &str,
    kinds: &[FaultKind],
    scale: f64,
    onset_s: f64,
    seed: u64,
) -> Result<Vec<LabeledRun>> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let spec = FaultSpec::new(FaultMode::with_defaults(kind, scale), onset_s);
            inject_fault(clean, channel, &spec, seed.wrapping_add(i as u64))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub model: DetectorModel,
    pub cv: CvResult,
    pub train_rows: usize,
    pub train_accuracy: f64,
    pub test: MetricsReport,
}

impl ExperimentOutcome {
    /// `(feature, importance)` sorted by decreasing importance.
    pub fn ranked_importances(&self) -> Vec<(String, f64)> {
        let mut r: Vec<(String, f64)> =
            self.model.feature_schema.iter().cloned().zip(self.model.tree.importances.iter().copied()).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1));
        r
    }

    pub fn top_feature(&self) -> &str {
        let imp = &self.model.tree.importances;
        let best = (0..imp.len()).fold(0, |b, i| if imp[i] > imp[b] { i } else { b });
        &self.model.feature_schema[best]
    }
}

fn predict_all(model: &DetectorModel, table: &FeatureTable) -> Result<Vec<u8>> {
    (0..table.len()).map(|i| crate::classifier::tree_predict(&model.tree, &table.row(i))).collect()
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn finish(
    lti: LtiModel,
    cfg: &TrainConfig,
    train: &FeatureTable,
    test: &FeatureTable,
    rate: f64,
) -> Result<ExperimentOutcome> {
    let (tree, cv) = fit_detector_tree(train, cfg)?;
    let model = DetectorModel::new(lti, cfg.observer, tree, cfg.feature_schema())?;
    let train_accuracy = accuracy(&model.tree, &train.features, &train.labels)?;
    let flags = predict_all(&model, test)?;
    let test = evaluate(&flags, &test.labels, rate)?;
    Ok(ExperimentOutcome { model, cv, train_rows: train.len(), train_accuracy, test })
}

/// Shared protocol settings for both datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub onset_s: f64,
    /// Multiplier on the additive fault parameters.
    pub fault_scale: f64,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GkExperiment {
    pub gk: GkConfig,
    pub protocol: Protocol,
    pub train_count: usize,
    pub test_count: usize,
}

impl Default for GkExperiment {
    fn default() -> Self {
        Self {
            gk: GkConfig::default(),
            protocol: Protocol {
                onset_s: 1000.0,
                fault_scale: 1.0,
                train: TrainConfig {
                    delay: DelayConfig { stride: 10, delays: 64 },
                    rank: RankPolicy::Full,
                    ..TrainConfig::new(GK_LIFT, vec![GK_ALPHA.into(), GK_ALPHA_DOT.into()])
                },
                seed: 0,
            },
            train_count: 30_000,
            test_count: 10_000,
        }
    }
}

impl GkExperiment {
    pub fn clean(&self) -> Result<RecordedSeries> {
        gk_simulate(&self.gk)
    }

    pub fn plant(&self, clean: &RecordedSeries) -> Result<LtiModel> {
        identify_plant(clean, &self.protocol.train)
    }

    fn runs(&self, clean: &RecordedSeries, kinds: &[FaultKind], seed: u64) -> Result<Vec<LabeledRun>> {
        fault_runs(clean, GK_LIFT, kinds, self.protocol.fault_scale, self.protocol.onset_s, seed)
    }

    fn features(&self, lti: &LtiModel, runs: &[LabeledRun]) -> Result<FeatureTable> {
        labeled_features(lti, &self.protocol.train.observer, runs, &self.protocol.train.feature_schema())
    }

    /// Training rows from one set of runs covering every fault mode, test
    /// rows from an independent set.
    pub fn all_faults(&self) -> Result<ExperimentOutcome> {
        let clean = self.clean()?;
        let lti = self.plant(&clean)?;
        let seed = self.protocol.seed;
        let train_pool = self.features(&lti, &self.runs(&clean, &FaultKind::FAULTS, seed.wrapping_mul(1000))?)?;
        let test_pool = self.features(&lti, &self.runs(&clean, &FaultKind::FAULTS, seed.wrapping_mul(1000) + 200)?)?;
        if train_pool.len() < self.train_count || test_pool.len() < self.test_count {
            return Err(Error::InsufficientData(format!(
                "runs of {} rows cannot supply {} training and {} test rows",
                train_pool.len(),
                self.train_count,
                self.test_count
            )));
        }
        let train = train_pool.subset(&shuffled(train_pool.len(), seed)[..self.train_count]);
        let test = test_pool.subset(&shuffled(test_pool.len(), seed.wrapping_add(1))[..self.test_count]);
        finish(lti, &self.protocol.train, &train, &test, clean.sample_rate_hz())
    }

    /// Trains on independent runs of `kind` only and tests on rows drawn from
    /// fresh runs of all four modes.
    pub fn single_fault(&self, kind: FaultKind) -> Result<ExperimentOutcome> {
        let clean = self.clean()?;
        let lti = self.plant(&clean)?;
        let seed = self.protocol.seed;
        let per_run = clean.len() - lti.delay.warmup() - (self.protocol.train.observer.window - 1);
        let runs_needed = self.train_count.div_ceil(per_run);
        let kinds = vec![kind; runs_needed];
        let train_pool = self.features(&lti, &self.runs(&clean, &kinds, seed.wrapping_mul(1000) + 100)?)?;
        let take = self.train_count.min(train_pool.len());
        let train = train_pool.subset(&shuffled(train_pool.len(), seed)[..take]);
        let test_pool = self.features(&lti, &self.runs(&clean, &FaultKind::FAULTS, seed.wrapping_mul(1000) + 200)?)?;
        let take = self.test_count.min(test_pool.len());
        let test = test_pool.subset(&shuffled(test_pool.len(), seed.wrapping_add(1))[..take]);
        finish(lti, &self.protocol.train, &train, &test, clean.sample_rate_hz())
    }
}

/// Fault scale for the flight surrogate, whose TAS sits near 200 m/s rather
/// than the order-one lift coefficient the default magnitudes are sized for.
pub const FLIGHT_FAULT_SCALE: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlightExperiment {
    pub sim: FlightSimConfig,
    pub protocol: Protocol,
    /// Fraction of pooled rows used for training.
    pub train_fraction: f64,
}

impl Default for FlightExperiment {
    fn default() -> Self {
        Self {
            sim: FlightSimConfig::default(),
            protocol: Protocol {
                onset_s: 300.0,
                fault_scale: FLIGHT_FAULT_SCALE,
                train: TrainConfig {
                    delay: DelayConfig { stride: 10, delays: 30 },
                    rank: RankPolicy::Full,
                    observer: ObserverConfig { gain: 0.1, ..ObserverConfig::default() },
                    ..TrainConfig::new(
                        FLIGHT_TAS,
                        [FLIGHT_AOA, FLIGHT_INERTIAL_SPEED, FLIGHT_PITCH, FLIGHT_LIFT, FLIGHT_THRUST]
                            .map(String::from)
                            .to_vec(),
                    )
                },
                seed: 0,
            },
            train_fraction: 0.75,
        }
    }
}

/// Flight outcome of a catastrophic-only model.
#[derive(Debug, Clone)]
pub struct CrossFaultOutcome {
    pub in_group: ExperimentOutcome,
    /// Accuracy on runs of the three other modes.
    pub cross_fault_accuracy: f64,
}

impl FlightExperiment {
    /// Turbulence realization `index`; index 0 is the clean training flight.
    pub fn flight(&self, index: u64) -> Result<RecordedSeries> {
        flight_simulate(&FlightSimConfig { seed: self.sim.seed.wrapping_add(index.wrapping_mul(7919)), ..self.sim })
    }

    fn runs(&self, kinds: &[FaultKind], first_flight: u64) -> Result<Vec<LabeledRun>> {
        kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let base = self.flight(first_flight + i as u64)?;
                let spec = FaultSpec::new(FaultMode::with_defaults(kind, self.protocol.fault_scale), self.protocol.onset_s);
                inject_fault(&base, FLIGHT_TAS, &spec, self.protocol.seed.wrapping_add(first_flight + i as u64))
            })
            .collect()
    }

    fn split(&self, pool: &FeatureTable, seed: u64) -> (FeatureTable, FeatureTable) {
        let order = shuffled(pool.len(), seed);
        let cut = ((pool.len() as f64) * self.train_fraction).round() as usize;
        (pool.subset(&order[..cut]), pool.subset(&order[cut..]))
    }

    fn setup(&self) -> Result<(LtiModel, f64)> {
        let clean = self.flight(0)?;
        Ok((identify_plant(&clean, &self.protocol.train)?, clean.sample_rate_hz()))
    }

    fn features(&self, lti: &LtiModel, runs: &[LabeledRun]) -> Result<FeatureTable> {
        labeled_features(lti, &self.protocol.train.observer, runs, &self.protocol.train.feature_schema())
    }

    pub fn all_faults(&self) -> Result<ExperimentOutcome> {
        let (lti, rate) = self.setup()?;
        let pool = self.features(&lti, &self.runs(&FaultKind::FAULTS, 1)?)?;
        let (train, test) = self.split(&pool, self.protocol.seed);
        finish(lti, &self.protocol.train, &train, &test, rate)
    }

    /// Catastrophic-only training, then evaluation on the other modes.
    pub fn catastrophic_only(&self) -> Result<CrossFaultOutcome> {
        let (lti, rate) = self.setup()?;
        let pool = self.features(&lti, &self.runs(&[FaultKind::Catastrophic; 4], 11)?)?;
        let (train, test) = self.split(&pool, self.protocol.seed);
        let in_group = finish(lti, &self.protocol.train, &train, &test, rate)?;
        let others = [FaultKind::Oscillation, FaultKind::Noise, FaultKind::Drift];
        let cross = self.features(&in_group.model.lti, &self.runs(&others, 21)?)?;
        let cross_fault_accuracy = accuracy(&in_group.model.tree, &cross.features, &cross.labels)?;
        Ok(CrossFaultOutcome { in_group, cross_fault_accuracy })
    }
}

/// Mean `V_k` after `onset + window` over mean `V_k` on the valid pre-onset span.
pub fn vk_response_ratio(lti: &LtiModel, observer: &ObserverConfig, run: &RecordedSeries, onset_s: f64) -> Result<f64> {
    let trace = run_observer(lti, observer, run)?;
    let onset = (0..run.len()).find(|&k| run.time(k) >= onset_s).ok_or_else(|| {
        Error::Parameter(format!("onset {onset_s} lies after the series end"))
    })?;
    let first = trace.first_valid_sample();
    if onset <= first || onset + observer.window >= run.len() {
        return Err(Error::InsufficientData("onset leaves no valid span on one side".into()));
    }
    let mean = |a: usize, b: usize| (a..b).map(|k| trace.vk_at(k).expect("valid")).sum::<f64>() / (b - a) as f64;
    Ok(mean(onset + observer.window, run.len()) / mean(first, onset))
}
