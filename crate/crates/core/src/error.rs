use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point lies outside the open hemisphere around the projection center (distance {distance} rad)")]
    OutOfHemisphere { distance: f64 },

    #[error("infeasible shrink: sin({shrink}) exceeds sin({colatitude})")]
    InfeasibleShrink { shrink: f64, colatitude: f64 },

    #[error("invalid cell (level {level}, band {band}, sector {sector})")]
    InvalidCell { level: u32, band: u32, sector: u32 },

    #[error("invalid level {0}")]
    InvalidLevel(i64),

    #[error("level {level} exceeds the configured maximum {max}")]
    ResourceCap { level: u32, max: u32 },

    #[error("epsilon {epsilon} outside the admissible range ({lo}, {hi})")]
    EpsilonOutOfRange { epsilon: f64, lo: f64, hi: f64 },

    #[error("constants infeasible for epsilon {epsilon}{}", match .largest_feasible {
        Some(e) => format!("; largest feasible epsilon found: {e}"),
        None => String::new(),
    })]
    InfeasibleConstants { epsilon: f64, largest_feasible: Option<f64> },

    #[error("component cannot be placed in an open hemisphere: {0}")]
    HullInfeasible(String),

    #[error("malformed polygon: {0}")]
    MalformedPolygon(String),

    #[error("selection is not conflict-free: {} violation(s)", .0.len())]
    InfeasibleSelection(Vec<(u32, u32)>),

    #[error("corrupt graph cache: {0}")]
    CorruptCache(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
