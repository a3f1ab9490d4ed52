use thiserror::Error;

/// Errors surfaced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trajectory for vehicle {vehicle_id}: {msg}")]
    Trajectory { vehicle_id: String, msg: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("cycle {cycle_index} movement {movement_id}: degenerate denominator ({msg})")]
    DegenerateCycle {
        movement_id: String,
        cycle_index: i64,
        msg: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model is unbounded")]
    Unbounded,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid signal plan: {0}")]
    Plan(String),

    #[error("optimization infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
