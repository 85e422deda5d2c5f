use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bias {bias} V outside legal range [{min}, {max}] V")]
    BiasOutOfRange { bias: f64, min: f64, max: f64 },
    #[error("non-physical geometry: {0}")]
    Geometry(String),
    #[error("magnetic admittance pole at {freq} Hz")]
    Pole { freq: f64 },
    #[error("numerical singularity: |denominator| = {0:e}")]
    Singular(f64),
    #[error("grid point f={freq} Hz, u_m={u_m} V, u_e={u_e} V: {source}")]
    GridPoint {
        freq: f64,
        u_m: f64,
        u_e: f64,
        source: Box<Error>,
    },
    #[error("empty pattern")]
    EmptyPattern,
    #[error("coverage failure: {flagged} of {bins} phase bins have no candidate")]
    Coverage { flagged: usize, bins: usize },
    #[error("frequency {0} Hz is not on the pattern grid")]
    FreqNotOnGrid(f64),
    #[error("phase step {0} deg does not divide 360")]
    PhaseStep(f64),
    #[error("arm angles coincide at {0} deg; use steering_command for a single beam")]
    CoincidentArms(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by bad configuration rather than the model.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
