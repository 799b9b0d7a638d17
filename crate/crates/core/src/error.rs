use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid dimensions, out-of-range flags, malformed config overrides.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("no visible keypoints")]
    NoVisibleKeypoints,

    #[error("degenerate keypoint bounding box (height {0:.3} px)")]
    DegenerateBBox(f64),

    #[error("zero-norm vector: {0}")]
    ZeroNorm(String),

    #[error("optimization diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("feature sets use different bin configurations ({0} vs {1} yaw bins)")]
    MixedBins(usize, usize),

    #[error("feature set has no occupied bin")]
    Unoccupied,

    #[error("match failed for probe {probe} against gallery {gallery}: {source}")]
    Match {
        probe: String,
        gallery: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's arguments rather than by the data
    /// or the environment. The command-line front end maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::MixedBins(..))
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
