//! One-class anomaly detection for industrial control system time series.
//!
//! The engine trains per-sensor, per-actuation-state safety bounds from a
//! normal-operations log and flags out-of-bound test readings in constant
//! time per record, with a full explanation for every warning. Three
//! detectors share one state encoding:
//!
//! - **giant**: inclusive [min, max] of raw readings per switchboard state;
//! - **baby**: the same envelope over one-step differences (rate of change);
//! - **extended**: empirical not-anomaly probabilities per reading,
//!   multiplied over sliding windows and bounded by the trained product
//!   range, to catch patterns that stay inside the raw envelopes.
//!
//! Datasets and graphs are immutable after load and safe for concurrent
//! reads; training different sensors shares no mutable state.

pub mod dataset;
pub mod detector;
pub mod error;
pub mod extended;
pub mod metrics;
pub mod schema;
pub mod store;
pub mod switchboard;

pub use dataset::{parse_dataset, write_csv, Dataset, Label, Record};
pub use detector::{
    baby_step_test, baby_step_train, bounds_check, determine_bounds, explanation,
    giant_step_test, giant_step_train, render_explanation, BoundEntry, BoundStore, Breach,
    CheckKind, Verdict,
};
pub use error::{Error, Result};
pub use extended::{
    anom_probability, build_frequency_table, extended_test_dataset, extended_train,
    find_min_max_product, lookup_test_probability, pr_left, pr_right, sw_product,
    ExtendedArtifacts, FrequencyTable, NotAnomProb, SlidingProduct, WindowBounds,
};
pub use metrics::{confusion, confusion_per_record, scores, ConfusionCounts, EvalReport, EvalUnit, Policy};
pub use schema::{validate_graph, ActuatorSpec, DeviceId, DeviceKind, RelationshipGraph, SchemaConfig};
pub use store::TrainedStore;
pub use switchboard::{
    dataset_diff, encode_state, linearize, DetectorKind, LinearizedStateGroup, SbKey,
    SwitchboardState,
};
