//! Closed-loop simulation: scenarios, disturbances, logs, and metrics.

mod disturbance;
mod log;
mod metrics;
mod run;
mod scenario;

pub use disturbance::{
    inject_disturbance, DisturbanceRng, DisturbanceSpec, DEFAULT_INPUT_MAGNITUDE,
    DEFAULT_OUTPUT_VARIANCE, INPUT_STREAM, OUTPUT_STREAM,
};
pub use log::{format_f64, LogHeader, LogRecord, TrajectoryLog, CSV_COLUMNS};
pub use metrics::{compute_metrics, saturation_intervals, Metrics, SATURATION_TOL, SETTLING_BAND};
pub use run::{initial_error, run_closed_loop, ControlSetup, ReferencePreview};
pub use scenario::{
    reference, reference_profile, ControllerKind, ReferenceProfile, Scenario, SCENARIO_IDS,
};
