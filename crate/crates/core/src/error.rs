use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario infeasible: cannot place {target} vehicles ({placed} placed) with headway {headway_m} m")]
    ScenarioInfeasible {
        target: usize,
        placed: usize,
        headway_m: f64,
    },

    #[error("distance must be positive, got {0} m")]
    Domain(f64),

    #[error("beamwidth product {product:.6} rad^2 below alignment bound {bound:.6} rad^2")]
    AlignmentConstraint { product: f64, bound: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("slot {slot}: {source}")]
    AtSlot {
        slot: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_slot(self, slot: u64) -> Self {
        match self {
            e @ Error::AtSlot { .. } => e,
            e => Error::AtSlot {
                slot,
                source: Box::new(e),
            },
        }
    }
}
