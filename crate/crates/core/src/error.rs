use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small: window must span [{need_lo:.3}, {need_hi:.3}] along {axis}, but covers [{have_lo:.3}, {have_hi:.3}]")]
    GridTooSmall {
        axis: char,
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error(
        "aliasing risk: Nyquist wavevector {nyquist:.4} along {axis} does not exceed required bandwidth {required:.4}"
    )]
    AliasingRisk { axis: char, nyquist: f64, required: f64 },

    #[error("field has zero norm")]
    ZeroField,

    #[error("time step must be non-negative, got {0}")]
    NegativeDt(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("fields are at different times ({0} vs {1})")]
    TimeMismatch(f64, f64),

    #[error("branch path does not end at the splitter")]
    PathMismatch,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("evaluation time {t} precedes arrival time {arrival}")]
    BeforeArrival { t: f64, arrival: f64 },

    #[error("transition amplitude density vanishes everywhere on the grid")]
    ZeroDensity,

    #[error("time-symmetric runs need a final condition (final box)")]
    MissingFinalCondition,

    #[error("invalid config at `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("malformed field file: {0}")]
    MalformedFieldFile(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
