//! Post-processing of transient traces.

pub mod compare;
pub mod eye;
pub mod fcm;

pub use compare::{compare_solvers, SolverComparison};
pub use eye::{align, eye_metrics, fold_eye, steady_levels, EyeDiagram, EyeMetrics, EyeSpec, LevelStats};
pub use fcm::{chirp_duration, DEFAULT_DWELL_TAU, MIN_DWELL_TAU, fcm_spectrum, sweep_fcm, Chirp, FcmSpectrum, FcmSweepSpec, FcmWarning};
