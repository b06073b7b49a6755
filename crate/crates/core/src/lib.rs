//! Fault detection for monitored sensor channels: a DMDc plant model, a
//! Luenberger-style innovation monitor and a shallow decision tree.

pub mod classifier;
pub mod error;
pub mod experiments;
pub mod faults;
pub mod observer;
pub mod pipeline;
pub mod simulators;
pub mod sysid;
pub mod timeseries;

pub use error::{Error, Result};
pub use classifier::{TrainedTree, TreeNode};
pub use faults::{FaultKind, FaultMode, FaultSpec};
pub use observer::{ObserverConfig, ObserverTrace};
pub use pipeline::{
    evaluate, load_model, offline_train, online_detect, save_model, DetectorModel, LagTime, MetricsReport, TrainConfig,
};
pub use simulators::{FlightSimConfig, GkConfig};
pub use sysid::{LtiModel, RankPolicy};
pub use timeseries::{Channel, DelayConfig, RecordedSeries};
