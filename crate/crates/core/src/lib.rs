//! Surveillance of communication outbreaks among small teams in dynamic
//! count-weighted networks.
//!
//! Pairwise counts are smoothed with a reflective EWMA ([`smoothing`]),
//! aggregated over known or estimated teams ([`statistics`], [`search`]),
//! and compared against thresholds calibrated by simulation to a target
//! in-control average time to signal ([`calibration`], [`surrogate`]).
//! [`sim`] generates synthetic networks with planted outbreaks and
//! [`io`] / [`chart`] handle files.

pub mod calibration;
pub mod chart;
pub mod error;
pub mod io;
pub mod monitor;
pub mod search;
pub mod sim;
pub mod smoothing;
pub mod statistics;
pub mod surrogate;
pub mod types;

pub use error::{Error, Result};
pub use monitor::Monitor;
pub use smoothing::{init_state, step, SmootherState};
pub use surrogate::{predict_threshold, SurrogateKind, SurrogateModel};
pub use types::{
    AtsReport, CountMatrix, FlagEvent, Matrix, MeanModel, NetworkSeries, NetworkSnapshot,
    SelfPairs, StatisticKind, SurveillancePlan, Team, Threshold,
};
