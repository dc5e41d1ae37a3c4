use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error)]
pub enum MigrateError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed instance document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("instance validation failed: {0}")]
    Validation(String),

    #[error("lp: iteration limit of {0} pivots exceeded")]
    IterationLimit(usize),

    #[error("lp: numerical failure ({0})")]
    Numerical(String),

    #[error("mip: node limit of {0} nodes exceeded")]
    NodeLimit(usize),

    #[error("region {region} has {sites} sites, above the exact enumeration bound of {limit}")]
    RegionTooLarge {
        region: usize,
        sites: usize,
        limit: usize,
    },

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("lbbd: feasibility cuts stopped separating master points (iteration {0})")]
    Stalled(usize),
}

impl MigrateError {
    /// True for the errors that stem from a configured size/iteration limit.
    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            MigrateError::IterationLimit(_)
                | MigrateError::NodeLimit(_)
                | MigrateError::RegionTooLarge { .. }
                | MigrateError::OracleLimit(_)
                | MigrateError::EnumerationBound(_)
                | MigrateError::Stalled(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, MigrateError>;
