//! Optimal source-prefix filter selection.
//!
//! Given a blacklist of malicious IPv4 sources (and a whitelist of legitimate
//! ones), pick a small set of non-overlapping CIDR prefixes to block. All
//! solvers work on the [`LcpTree`]: a path-compressed binary trie whose leaves
//! are the input addresses and whose internal nodes are the longest common
//! prefixes of their two children. Every optimal filter set is a pruning of
//! that tree, which turns each problem into a knapsack-style dynamic program
//! over tree nodes.
//!
//! Problems covered:
//!
//! * [`static_dp::block_all`]: block every bad address, minimize collateral damage.
//! * [`static_dp::block_some`]: trade unblocked bad weight against collateral damage.
//! * [`dynamic_dp::DynamicSolver`]: keep either of the above optimal under
//!   blacklist/whitelist deltas by recomputing only root paths.
//! * [`flooding::solve_flooding`]: fit the unblocked traffic within a link capacity.
//! * [`dist::solve_dist_flooding`]: the same across several routers, coordinated
//!   by shadow prices and a projected subgradient loop.
//!
//! [`oracle`] holds brute-force reference solvers and the comparison baselines.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dist;
pub mod dynamic_dp;
mod error;
pub mod flooding;
pub mod lcptree;
pub mod model;
pub mod oracle;
pub mod static_dp;

pub use error::{Error, ParsePrefixError, Result};
pub use lcptree::{LcpNode, LcpTree, NodeId};
pub use model::{longest_common_prefix, Address, FilterSolution, ListKind, Prefix, WeightedAddressSet, WhitelistMode};
