use num_bigint::BigUint;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// `K * p_λ` is not an integer for some cache.
    #[error("expected load of cache {cache} is {load}, which is not an integer")]
    NonIntegerExpectedLoad { cache: usize, load: String },

    #[error("invalid population intensities: {0}")]
    BadIntensities(String),

    #[error("budget t = {budget} must lie in [1, {}] for {caches} caches", caches.saturating_sub(1))]
    BadBudget { budget: usize, caches: usize },

    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "worst-case demands need at least as many files as users ({files} files < {users} users)"
    )]
    WorstCaseNeedsEnoughFiles { users: u64, files: u64 },

    #[error("tuple size {size} is outside [1, {caches}]")]
    SizeExceedsCaches { size: usize, caches: usize },

    #[error("{what} would enumerate {count} items, above the cap of {cap}")]
    EnumerationTooLarge {
        what: &'static str,
        count: BigUint,
        cap: u64,
    },

    #[error("population vector {population:?} does not match the layout ({reason})")]
    PopulationMismatch {
        population: Vec<u64>,
        reason: String,
    },

    #[error("cache {cache} has {users} users in one round but only {seats} virtual seats")]
    TooManyUsersForRound {
        cache: usize,
        users: usize,
        seats: u64,
    },

    #[error("simulated delay {simulated} disagrees with the closed form {formula}")]
    DelayMismatch { simulated: String, formula: String },

    #[error("payload of {payload} bytes cannot be split into {subpackets} subpackets")]
    PayloadTooSmall { payload: usize, subpackets: usize },

    #[error("user {user} lacks side information: file {file}, subpacket {tuple}")]
    MissingSideInformation {
        user: usize,
        file: usize,
        tuple: usize,
    },

    #[error("user {user} is missing {missing} subpackets after delivery")]
    IncompleteDelivery { user: usize, missing: usize },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
