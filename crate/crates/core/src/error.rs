use alloc::string::String;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank deficient: {context}{}", unit_suffix(*.unit))]
    RankDeficient { context: String, unit: Option<usize> },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("singular GLS weight{}: min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e}", step_suffix(*.step))]
    SingularWeight {
        min_eig: f64,
        max_eig: f64,
        step: Option<usize>,
    },

    #[error("bandwidth {bandwidth} must be smaller than the sample length {len}")]
    Bandwidth { bandwidth: usize, len: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("{failed} of {total} replications failed (more than 1%)")]
    TooManyFailures { failed: usize, total: usize },
}

fn unit_suffix(unit: Option<usize>) -> String {
    match unit {
        Some(i) => alloc::format!(" (unit {i})"),
        None => String::new(),
    }
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(h) => alloc::format!(" at step {h}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn rank(context: impl Into<String>) -> Self {
        Error::RankDeficient {
            context: context.into(),
            unit: None,
        }
    }

    pub(crate) fn with_unit(self, unit: usize) -> Self {
        match self {
            Error::RankDeficient { context, .. } => Error::RankDeficient {
                context,
                unit: Some(unit),
            },
            other => other,
        }
    }

    pub(crate) fn with_step(self, h: usize) -> Self {
        match self {
            Error::SingularWeight { min_eig, max_eig, .. } => Error::SingularWeight {
                min_eig,
                max_eig,
                step: Some(h),
            },
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
