//! BLOCK-ALL and BLOCK-SOME kept optimal under blacklist and whitelist changes.
//!
//! Every node keeps its table. A change touches one leaf (and the internal
//! node created or removed with it), so only that node and its ancestors are
//! recomputed; siblings' tables are reused as they are.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lcptree::{LcpTree, NodeId};
use crate::model::{Address, FilterSolution, ListKind, WeightedAddressSet, WhitelistMode};
use crate::static_dp::{compute_tables, solution_from_tables, DpTables, Problem};

/// One change to the lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delta {
    /// A new blacklisted address.
    Add { ip: Address, weight: u64 },
    /// Drops a blacklisted address.
    Remove { ip: Address },
    /// New weight for a listed address. Good addresses may be new.
    Adjust { ip: Address, weight: u64, kind: ListKind },
}

/// Failure of a [`DynamicSolver::replay`] step.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("delta {step}: {error}")]
pub struct ReplayError {
    /// Zero-based position in the delta list.
    pub step: usize,
    pub error: Error,
}

#[derive(Clone, Debug)]
pub struct DynamicSolver {
    tree: LcpTree,
    tables: DpTables,
    current: FilterSolution,
    last_recomputed: usize,
}

impl DynamicSolver {
    pub fn new(bad: &WeightedAddressSet, white: &WhitelistMode, problem: Problem, fmax: usize) -> Result<Self> {
        Self::from_tree(LcpTree::build(bad, white)?, problem, fmax)
    }

    pub fn from_tree(tree: LcpTree, problem: Problem, fmax: usize) -> Result<Self> {
        if problem == Problem::BlockAll && fmax < 1 {
            return Err(Error::InfeasibleBudget(fmax));
        }
        let tables = compute_tables(&tree, problem, fmax);
        let current = solution_from_tables(&tree, &tables);
        Ok(DynamicSolver {
            last_recomputed: tree.node_count(),
            tree,
            tables,
            current,
        })
    }

    pub fn tree(&self) -> &LcpTree {
        &self.tree
    }

    pub fn tables(&self) -> &DpTables {
        &self.tables
    }

    pub fn current(&self) -> &FilterSolution {
        &self.current
    }

    /// Best objective for the current lists: collateral damage for BLOCK-ALL,
    /// damage minus benefit for BLOCK-SOME. `None` once the tree is empty.
    pub fn value(&self) -> Option<i64> {
        self.tables.root_value(&self.tree)
    }

    /// Tables recomputed by the last update.
    pub fn last_recomputed(&self) -> usize {
        self.last_recomputed
    }

    fn recompute_from(&mut self, start: Option<NodeId>) -> usize {
        let mut count = 0;
        let mut cur = start;
        while let Some(id) = cur {
            self.tables.compute_node(&self.tree, id);
            count += 1;
            cur = self.tree.node(id).parent();
        }
        count
    }

    /// Applies one change and returns the new optimal solution.
    pub fn apply_delta(&mut self, delta: Delta) -> Result<&FilterSolution> {
        let recomputed = match delta {
            Delta::Add { ip, weight } => {
                let ins = self.tree.insert_address(ip, weight, ListKind::Bad)?;
                self.tables.compute_node(&self.tree, ins.leaf);
                1 + self.recompute_from(ins.internal)
            }
            Delta::Remove { ip } => {
                if self
                    .tree
                    .leaf(ip)
                    .is_some_and(|id| matches!(self.tree.node(id).leaf_entry(), Some((ListKind::Good, _))))
                {
                    return Err(Error::NotFound(ip));
                }
                let start = self.tree.delete_address(ip)?;
                self.recompute_from(start)
            }
            Delta::Adjust { ip, weight, kind } => {
                let start = self.tree.adjust_weight(ip, weight, kind)?;
                self.recompute_from(start)
            }
        };
        self.last_recomputed = recomputed;
        self.current = solution_from_tables(&self.tree, &self.tables);
        Ok(&self.current)
    }

    /// Applies `deltas` in order, returning the initial solution followed by
    /// the solution after each step.
    pub fn replay(&mut self, deltas: &[Delta]) -> Result<Vec<FilterSolution>, ReplayError> {
        let mut out = Vec::with_capacity(deltas.len() + 1);
        out.push(self.current.clone());
        for (step, &delta) in deltas.iter().enumerate() {
            let s = self.apply_delta(delta).map_err(|error| ReplayError { step, error })?;
            out.push(s.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::static_dp::{block_all, block_some};
    use alloc::vec;
    use proptest::prelude::*;

    fn ip(s: &str) -> Address {
        s.parse().unwrap()
    }

    fn insert_sample() -> WeightedAddressSet {
        let last = [3u8, 10, 15, 17, 22, 31, 32, 33, 57, 58];
        WeightedAddressSet::unit(ListKind::Bad, last.iter().map(|&d| Address::new(10, 0, 0, d))).unwrap()
    }

    #[test]
    fn sample_insert_matches_static() {
        let mut bad = insert_sample();
        let mut solver = DynamicSolver::new(&bad, &WhitelistMode::ImplicitUnit, Problem::BlockAll, 4).unwrap();
        let s = solver
            .apply_delta(Delta::Add {
                ip: ip("10.0.0.37"),
                weight: 1,
            })
            .unwrap()
            .clone();
        bad.insert(ip("10.0.0.37"), 1).unwrap();
        let fresh = block_all(&LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap(), 4).unwrap();
        assert_eq!(s, fresh);
        assert_eq!(s.filters_used, 4);
        assert!(solver.last_recomputed() <= solver.tree().max_depth() + 2);
    }

    #[test]
    fn empty_replay() {
        let bad = insert_sample();
        let mut solver = DynamicSolver::new(&bad, &WhitelistMode::ImplicitUnit, Problem::BlockSome, 3).unwrap();
        let initial = solver.current().clone();
        assert_eq!(solver.replay(&[]).unwrap(), vec![initial]);
    }

    #[test]
    fn add_then_remove_restores() {
        let bad = insert_sample();
        let mut solver = DynamicSolver::new(&bad, &WhitelistMode::ImplicitUnit, Problem::BlockAll, 3).unwrap();
        let before = solver.current().clone();
        let steps = solver
            .replay(&[
                Delta::Add {
                    ip: ip("10.0.0.40"),
                    weight: 2,
                },
                Delta::Add {
                    ip: ip("192.168.0.1"),
                    weight: 1,
                },
                Delta::Remove { ip: ip("192.168.0.1") },
                Delta::Remove { ip: ip("10.0.0.40") },
            ])
            .unwrap();
        assert_eq!(steps.last().unwrap(), &before);
    }

    #[test]
    fn add_inside_chosen_filter_keeps_filters() {
        let bad = insert_sample();
        let mut solver = DynamicSolver::new(&bad, &WhitelistMode::ImplicitUnit, Problem::BlockAll, 1).unwrap();
        let before = solver.current().collateral_damage;
        let s = solver
            .apply_delta(Delta::Add {
                ip: ip("10.0.0.20"),
                weight: 1,
            })
            .unwrap();
        // the root filter already covered it: one good address turned bad
        assert_eq!(s.collateral_damage, before - 1);
        assert_eq!(s.filters, ["10.0.0.0/26".parse().unwrap()]);
    }

    #[test]
    fn replay_reports_failing_step() {
        let bad = insert_sample();
        let mut solver = DynamicSolver::new(&bad, &WhitelistMode::ImplicitUnit, Problem::BlockAll, 2).unwrap();
        let err = solver
            .replay(&[
                Delta::Add {
                    ip: ip("10.0.0.40"),
                    weight: 1,
                },
                Delta::Add {
                    ip: ip("10.0.0.3"),
                    weight: 1,
                },
            ])
            .unwrap_err();
        assert_eq!(err.step, 1);
        assert_eq!(err.error, Error::DuplicateAddress(ip("10.0.0.3")));
        let err = solver.replay(&[Delta::Remove { ip: ip("1.1.1.1") }]).unwrap_err();
        assert_eq!((err.step, err.error), (0, Error::NotFound(ip("1.1.1.1"))));
    }

    #[test]
    fn emptied_tree() {
        let bad = WeightedAddressSet::unit(ListKind::Bad, [ip("10.0.0.1")]).unwrap();
        let mut solver = DynamicSolver::new(&bad, &WhitelistMode::ImplicitUnit, Problem::BlockAll, 2).unwrap();
        let s = solver.apply_delta(Delta::Remove { ip: ip("10.0.0.1") }).unwrap();
        assert!(s.filters.is_empty());
        assert_eq!(solver.value(), None);
        let s = solver
            .apply_delta(Delta::Add {
                ip: ip("10.0.0.9"),
                weight: 1,
            })
            .unwrap();
        assert_eq!(s.filters, ["10.0.0.9/32".parse().unwrap()]);
    }

    proptest! {
        #[test]
        fn every_step_matches_static(
            init in proptest::collection::btree_map(0u32..512, 0u64..6, 1..30),
            goods in proptest::collection::btree_map(0u32..512, 1u64..4, 0..20),
            explicit in any::<bool>(),
            block_some_problem in any::<bool>(),
            fmax in 1usize..8,
            raw in proptest::collection::vec((0u8..3, 0u32..512, 0u64..6, any::<bool>()), 1..40),
        ) {
            let base = 0xc0a8_0000u32;
            let mut bad = WeightedAddressSet::from_entries(ListKind::Bad, init.into_iter().map(|(a, w)| (Address(base + a), w))).unwrap();
            let mut good = WeightedAddressSet::new(ListKind::Good);
            if explicit {
                for (a, w) in goods {
                    if !bad.contains(Address(base + a)) {
                        good.set(Address(base + a), w);
                    }
                }
            }
            let mut overrides = WeightedAddressSet::new(ListKind::Good);
            let white = |good: &WeightedAddressSet| if explicit { WhitelistMode::Explicit(good.clone()) } else { WhitelistMode::ImplicitUnit };
            let problem = if block_some_problem { Problem::BlockSome } else { Problem::BlockAll };
            let mut solver = DynamicSolver::new(&bad, &white(&good), problem, fmax).unwrap();
            for (op, a, w, kind_bad) in raw {
                let ip = Address(base + a);
                let d = match op {
                    0 if !bad.contains(ip) && !good.contains(ip) && !overrides.contains(ip) => Delta::Add { ip, weight: w },
                    1 if bad.len() > 1 => Delta::Remove { ip: bad.addresses().nth(a as usize % bad.len()).unwrap() },
                    2 if kind_bad => Delta::Adjust { ip: bad.addresses().nth(a as usize % bad.len()).unwrap(), weight: w, kind: ListKind::Bad },
                    2 if !bad.contains(ip) => Delta::Adjust { ip, weight: w, kind: ListKind::Good },
                    _ => continue,
                };
                let depth_before = solver.tree().max_depth();
                let s = solver.apply_delta(d).unwrap().clone();
                match d {
                    Delta::Add { ip, weight } => bad.insert(ip, weight).unwrap(),
                    Delta::Remove { ip } => { bad.remove(ip); }
                    Delta::Adjust { ip, weight, kind: ListKind::Bad } => { bad.set(ip, weight); }
                    Delta::Adjust { ip, weight, kind: ListKind::Good } => {
                        if explicit {
                            if weight == 0 { good.remove(ip); } else { good.set(ip, weight); }
                        } else if weight == 1 { overrides.remove(ip); } else { overrides.set(ip, weight); }
                    }
                }
                prop_assert!(solver.last_recomputed() <= depth_before.max(solver.tree().max_depth()) + 2);
                if !overrides.is_empty() {
                    continue;
                }
                let tree = LcpTree::build(&bad, &white(&good)).unwrap();
                let fresh = match problem {
                    Problem::BlockAll => block_all(&tree, fmax).unwrap(),
                    Problem::BlockSome => block_some(&tree, fmax),
                };
                prop_assert_eq!(&s, &fresh);
            }
        }
    }
}
