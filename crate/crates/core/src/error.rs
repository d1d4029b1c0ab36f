use thiserror::Error;

/// Errors raised by the model, solvers, generators and fitters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bias {v} V outside fitted range [{min}, {max}] V")]
    OutOfRangeBias { v: f64, min: f64, max: f64 },

    #[error("non-physical fit: {what} = {value:e} at {v} V")]
    NonPhysicalFit { what: &'static str, value: f64, v: f64 },

    #[error("junction voltage {v_m} V below depletion limit {limit} V")]
    ForwardBiasLimit { v_m: f64, limit: f64 },

    #[error("heater voltage {v_h} V exceeds the {max} V rating")]
    HeaterOverdrive { v_h: f64, max: f64 },

    #[error("PRBS seed has no set bits within the register")]
    BadSeed,

    #[error("unsupported PRBS order {0}")]
    BadPrbsOrder(u32),

    #[error("edge time {t_edge:e} s not shorter than unit interval {ui:e} s")]
    EdgeTooSlow { t_edge: f64, ui: f64 },

    #[error("laser offset {offset:e} Hz exceeds the baseband limit of {limit:e} Hz")]
    OffsetTooLarge { offset: f64, limit: f64 },

    #[error("step size {step:e} s fell below minimum {min_step:e} s at t = {t:e} s")]
    StepSizeUnderflow { t: f64, step: f64, min_step: f64 },

    #[error("no resonance dip found: {0}")]
    NoResonanceFound(String),

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("resonance extinction too shallow (T0 = {0})")]
    DegenerateT0(f64),

    #[error("insufficient points: need {need}, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("parameter left its domain: {0}")]
    BadDomain(String),

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("insufficient transitions: {0}")]
    InsufficientTransitions(String),

    #[error("traces are not aligned: {0}")]
    MisalignedTraces(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
