//! Energy validation of software against a hierarchical device power model.
//!
//! The pipeline: load a device [`model::PowerModel`] and an
//! [`trace::EventTrace`], replay the trace to get a modeled
//! [`simulate::PowerProfile`], align a measured
//! [`measurement::MeasurementSeries`] to the trace clock via the sync spike,
//! then [`validate::compare`] the two. Timed test cases live in
//! [`scenario`]; [`synth`] produces synthetic measurements for closed-loop
//! testing.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
mod lexer;
pub mod measurement;
pub mod model;
pub mod plot;
pub mod scenario;
pub mod simulate;
pub mod synth;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
pub mod trace;
pub mod validate;

pub use error::{Error, Result};
pub use measurement::{align, load_measurements, Alignment, MeasurementSeries, Sample, Unit};
pub use model::{Configuration, Params, PowerFunction, PowerModel, Region, StateNode, Transition};
pub use scenario::{check_timing, scenario_energy, ScenarioSpec, TimingStatus};
pub use simulate::{measured_energy, replay, replay_from, PowerProfile, ProfileStart, Segment};
pub use synth::{generate, SynthConfig};
pub use trace::{load_trace, Event, EventTrace};
pub use validate::{compare, residuals, ValidationConfig, ValidationReport, Verdict};
