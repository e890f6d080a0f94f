//! Quantifying how strongly particles clump in a binary picture.
//!
//! The central quantity is the cumulus of the absolute differential Euler
//! number (CADE): thicken the picture step by step, record the Euler number
//! after every step, and sum the absolute step-to-step changes. Dispersed
//! particles merge gradually and rack up a large cumulus; agglomerated ones
//! collapse into few clusters almost immediately and score low. Normalizing
//! against well-dispersed reference pictures of the same volume fraction
//! turns the raw cumulus into the agglomeration index `delta_agg` in [0, 1.2].
//!
//! The crate also generates the reference pictures themselves: random disk
//! configurations with a tunable agglomeration parameter, grown one particle
//! at a time until a target volume fraction is covered.
//!
//! ```
//! use agglo_core::{analyze_image, generate_configuration, rasterize};
//!
//! let config = generate_configuration(0.9, 0.2, 10.0, 600, 7).unwrap();
//! let image = rasterize(&config);
//! let report = analyze_image(&image, 10.0, None).unwrap();
//! assert!(report.index.delta > 0.5);
//! ```

pub mod cade;
pub mod experiment;
pub mod genesis;
pub mod morphology;
pub mod pointstats;
pub mod raster;
pub mod store;
pub mod topology;

mod error;
mod grid;

pub use cade::{
    analyze_image, analyze_image_with, cade, calibrate, calibrate_with, delta_agg, AggIndex,
    AnalysisWarning, CadeValue, CalibrationEntry, CalibrationSource, CalibrationTable,
    ImageAnalysis, DEFAULT_ALPHA,
};
pub use error::Error;
pub use experiment::{
    run_experiment, run_experiment_with_progress, ExperimentSpec, ReportBundle, RunRecord,
    SummaryCell,
};
pub use genesis::{
    coverage_fraction, disks_intersect, generate_configuration, Configuration, Placement, Point,
    RESAMPLE_CAP,
};
pub use morphology::{
    default_schedule, dilate, schedule_for_radius, thicken_trace, thicken_trace_with, EulerTrace,
    ScheduleKind, StructuringElement, ThickeningSchedule,
};
pub use pointstats::{
    clark_evans, clark_evans_points, configuration_minkowski, euler_radius_curve,
    measured_minkowski, minkowski_reference, EdgeCorrection, EulerRadiusCurve, MinkowskiTriple,
};
pub use raster::{rasterize, BinaryImage};
pub use topology::{
    euler_by_components, euler_by_components_with, euler_number, euler_number_with,
    foreground_components, hole_count, Connectivity,
};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
