use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("invalid scenario config: {0}")]
    InvalidScenario(String),

    #[error("no wet cells in the domain")]
    NoWetCells,

    #[error("NaN produced at step {step}, rank {rank}, kernel {kernel}: {detail}")]
    NanDetected {
        step: u64,
        rank: usize,
        kernel: String,
        detail: String,
    },

    #[error(
        "timestep reduction exceeded {max_reductions} halvings at step {step}; \
         worst cell ({i},{j}) h={h}"
    )]
    ReductionExceeded {
        step: u64,
        max_reductions: u32,
        i: usize,
        j: usize,
        h: f64,
    },

    #[error("decomposition error: {0}")]
    Decomposition(String),

    #[error("halo exchange timed out between ranks {from} and {to}")]
    ExchangeTimeout { from: usize, to: usize },

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("performance model error: {0}")]
    Perf(String),

    #[error("portability metric error: {0}")]
    Metric(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
