//! Shared fixtures for the criterion benchmarks under `benches/`.

use faultwatch::experiments::{fault_runs, GkExperiment, LabeledRun};
use faultwatch::pipeline::{identify_plant, labeled_features, FeatureTable};
use faultwatch::{DetectorModel, FaultKind, RecordedSeries};

pub struct GkFixture {
    pub experiment: GkExperiment,
    pub clean: RecordedSeries,
    pub runs: Vec<LabeledRun>,
    pub table: FeatureTable,
    pub model: DetectorModel,
}

/// Default GK protocol: clean run, identified plant, one run per fault mode
/// and the trained all-faults detector.
pub fn gk_fixture() -> GkFixture {
    let experiment = GkExperiment::default();
    let clean = experiment.clean().expect("GK simulation");
    let cfg = &experiment.protocol.train;
    let plant = identify_plant(&clean, cfg).expect("plant");
    let runs = fault_runs(&clean, &cfg.monitored, &FaultKind::FAULTS, 1.0, experiment.protocol.onset_s, 0)
        .expect("fault runs");
    let table = labeled_features(&plant, &cfg.observer, &runs, &cfg.feature_schema()).expect("features");
    let model = experiment.all_faults().expect("training").model;
    GkFixture { experiment, clean, runs, table, model }
}
