use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid skeleton model: {0}")]
    Model(String),
    #[error("invalid pose: {0}")]
    Pose(String),
    #[error("render error: {0}")]
    Render(String),
    #[error("bad image file: {0}")]
    Format(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Forest(#[from] discforest::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
