use thiserror::Error;

use crate::transport::wire::{Phase, Side};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("decomposition error: {0}")]
    Decomposition(String),

    #[error("placement error: {0}")]
    Placement(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Loss of pressure positivity or a non-finite value in the new time level.
    #[error("numerical blowup at step {step}, cell ({i}, {j}): {what}")]
    Blowup {
        step: usize,
        i: usize,
        j: usize,
        what: &'static str,
    },

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error("protocol error on link {src} -> {dst}: {detail}")]
    Protocol {
        src: usize,
        dst: usize,
        detail: String,
    },

    #[error("transport error on link {src} -> {dst}: {source}")]
    Transport {
        src: usize,
        dst: usize,
        #[source]
        source: std::io::Error,
    },

    #[error("link {src} -> {dst} closed while waiting for {phase:?}/{side:?} at step {step}")]
    Disconnected {
        src: usize,
        dst: usize,
        step: u32,
        phase: Phase,
        side: Side,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Blowups, transport and protocol failures are runtime failures; everything
    /// else is a usage problem detected before any rank starts.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::Blowup { .. }
                | Error::Malformed(_)
                | Error::Protocol { .. }
                | Error::Transport { .. }
                | Error::Disconnected { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
