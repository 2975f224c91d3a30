use crate::matrix::TileId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("tile {tile} does not fit a {n_rows}x{n_cols} matrix")]
    DimensionMismatch {
        tile: TileId,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("coordinate ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error(
        "tile {tile} covers {zeros} zero(s) of the data, but exact mode requires dominated tiles"
    )]
    NotDominated { tile: TileId, zeros: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot move {moves} ones into {free} free positions while perturbing a copy of base tile {base}")]
    InfeasiblePerturbation {
        base: usize,
        moves: usize,
        free: usize,
    },

    #[error("density calibration failed: {0}")]
    Calibration(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
