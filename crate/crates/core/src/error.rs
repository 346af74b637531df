use thiserror::Error;

/// Errors surfaced by the fitting and assembly pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error: {0}")]
    MeshParse(String),
    #[error("degenerate triangle {tri}: area {area:.3e} below threshold")]
    DegenerateTriangle { tri: usize, area: f64 },
    #[error("site {index} at ({x}, {y}) lies outside the mesh hull")]
    SiteOutsideHull { index: usize, x: f64, y: f64 },
    #[error("matrix not positive definite (pivot {pivot:.3e} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
