//! Error types shared across the simulator.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown page id {0}")]
    UnknownPage(u64),

    #[error("page size must be nonzero")]
    ZeroPageSize,

    #[error("local allocation {alloc} B cannot hold a single {page_size} B page")]
    AllocTooSmall { alloc: u64, page_size: u64 },

    #[error("promotion of page {page} would exceed the local watermark ({used} + {page_size} > {limit}); demote first")]
    WatermarkViolation {
        page: u64,
        used: u64,
        page_size: u64,
        limit: u64,
    },

    #[error("page {0} cannot be both promoted and demoted in one swap")]
    SamePage(u64),

    #[error("page {page} is {found}, expected {expected}")]
    WrongLocation {
        page: u64,
        expected: &'static str,
        found: &'static str,
    },

    #[error("hint fault on unmarked page {0}")]
    FaultOnUnmarked(u64),

    #[error("access time {access_ns} ns must be after mark time {mark_ns} ns")]
    AccessBeforeMark { mark_ns: f64, access_ns: f64 },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("{0} must be finite")]
    NonFinite(&'static str),

    #[error("update batch is empty")]
    EmptyBatch,

    #[error("trace is empty")]
    EmptyTrace,

    #[error("{path}:{line}: {msg}")]
    TraceFormat {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("agent file: {0}")]
    AgentFormat(String),

    #[error("oracle: no future access count for page {0}")]
    MissingCount(u64),

    #[error("brute-force matcher limited to {limit} left vertices, got {got}")]
    InstanceTooLarge { limit: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
