use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: link distance {0} m must be positive")]
    InvalidGeometry(f64),

    #[error("CEU {ceu} still meets its rate requirement on the direct link after {draws} fading draws")]
    ConditioningFailure { ceu: usize, draws: usize },

    #[error("allocation coefficient {0} is outside (0, 0.5)")]
    InvalidAllocation(f64),

    #[error("pair is infeasible: relay rate {r_c} cannot support the requirement")]
    Infeasible { r_c: f64 },

    #[error("malformed preferences: {0}")]
    MalformedPreferences(String),

    #[error("instance {ceus}x{d2ds} is too large to enumerate (limit {limit}x{limit})")]
    TooLarge { ceus: usize, d2ds: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("drop {drop_index} with n={n}: {source}")]
    Drop {
        n: usize,
        drop_index: u64,
        #[source]
        source: Box<Error>,
    },
}
