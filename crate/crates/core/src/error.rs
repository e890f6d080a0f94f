use thiserror::Error;

/// All failure modes of the crate.
///
/// `InvalidParameter` marks caller mistakes (bad ranges, impossible
/// requests); everything else is a runtime condition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The generator gave up on one particle after `cap` rejected positions.
    #[error("placement of particle {particle} exceeded {cap} resampling attempts")]
    ResampleCapExceeded { particle: usize, cap: u64 },

    /// The input picture carries no usable signal (e.g. no foreground).
    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that indicate a caller mistake rather than a
    /// runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }
}
