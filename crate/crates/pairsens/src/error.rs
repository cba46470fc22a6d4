use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("study too large: {total} pairs exceeds the 2^31 limit")]
    StudyTooLarge { total: u64 },

    #[error("no discordant pairs (S = 0); the test statistic is degenerate")]
    NoDiscordantPairs,

    #[error("normal approximation undefined: reference variance is zero")]
    DegenerateVariance,

    #[error("cannot trim {requested} pairs: only {available} hazard-window discordant pairs")]
    CannotTrimMoreThanT { requested: u64, available: u64 },

    #[error("average treatment probability is 1; implied bias is unbounded")]
    UnboundedAverageBias,

    #[error("attribution a = {a} leaves no discordant pairs out of S = {s}")]
    DegenerateReference { a: u64, s: u64 },

    #[error("trimmed mean probability {p} is not below 1 at a = {a}")]
    DegenerateTrimmedMean { a: u64, p: f64 },

    #[error("pair {index} has treatment odds {odds} outside [1/{gamma}, {gamma}]")]
    OddsOutsideGamma { index: usize, odds: f64, gamma: f64 },
}
