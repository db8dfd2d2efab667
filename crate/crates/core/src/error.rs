use crate::model::Address;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("instance has no addresses")]
    EmptyInstance,
    #[error("address {0} is already present")]
    DuplicateAddress(Address),
    #[error("address {0} not found")]
    NotFound(Address),
    #[error("address {0} appears in both the blacklist and the whitelist")]
    ConflictingLists(Address),
    #[error("filter budget {0} admits no feasible solution")]
    InfeasibleBudget(usize),
    #[error("invalid weight {weight} for {address}: {reason}")]
    InvalidWeight {
        address: Address,
        weight: u64,
        reason: &'static str,
    },
    #[error("total weight does not fit the exact cost range")]
    WeightOverflow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error("address {0} has no route to the victim")]
    UnroutableAddress(Address),
    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),
    #[error("no feasible primal solution")]
    NoFeasiblePrimal,
    #[error("oracle budget exceeded: {what} is {actual}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        actual: u64,
        limit: u64,
    },
}

/// Failure to read a prefix or address from its dotted-quad text form.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParsePrefixError {
    #[error("malformed IPv4 address")]
    BadAddress,
    #[error("prefix length must be in 0..=32")]
    BadLength,
    #[error("prefix has host bits set below its length (non-canonical)")]
    NonCanonical,
}
