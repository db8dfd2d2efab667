//! Optimal pruning of the LCP tree for BLOCK-ALL and BLOCK-SOME.
//!
//! Each node `p` holds `z_p(F)`, the best objective using at most `F` filters
//! inside `p`, for `F` up to `min(F_max, leaves(p))`. Beyond that cap the value
//! is flat. A parent combines its children knapsack-style by splitting the
//! budget `F = (F - n) + n`, left and right; ties go to the smallest `n`.
//!
//! * BLOCK-ALL minimizes collateral damage while covering every bad leaf:
//!   `z(0) = ∞`, `z(1) = g`, and `z(F) = min_{1 ≤ n < F} z_l(F-n) + z_r(n)`.
//! * BLOCK-SOME minimizes `Σ (g - b)` and may leave leaves unblocked:
//!   `z(0) = 0`, a leaf has `z(F ≥ 1) = g - b`, an internal node has
//!   `z(1) = min(g - b, z_l(1), z_r(1))` and `z(F) = min_{0 ≤ n ≤ F} z_l(F-n) + z_r(n)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lcptree::{LcpTree, NodeId};
use crate::model::{FilterSolution, Prefix};

/// Value standing for an infeasible subproblem. Larger than any reachable
/// objective, since tree weights are capped well below it.
pub const INF: i64 = i64::MAX / 4;

/// Choice marker: filter the node's own prefix.
pub const TAKE: u32 = u32::MAX;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Problem {
    BlockAll,
    BlockSome,
}

/// One node's values `z(F)` for `F = 0..=cap` and the split achieving each.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DpTable {
    values: Vec<i64>,
    choices: Vec<u32>,
}

impl DpTable {
    /// Largest budget stored explicitly.
    #[inline]
    pub fn cap(&self) -> usize {
        self.values.len() - 1
    }

    /// `z(F)`, flat past the cap.
    #[inline]
    pub fn value(&self, f: usize) -> i64 {
        self.values[f.min(self.cap())]
    }

    /// Budget given to the right child at `F`, or [`TAKE`].
    #[inline]
    pub fn choice(&self, f: usize) -> u32 {
        self.choices[f.min(self.cap())]
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }
}

/// Per-node tables indexed by arena slot.
#[derive(Clone, Debug)]
pub struct DpTables {
    problem: Problem,
    fmax: usize,
    tables: Vec<DpTable>,
}

impl DpTables {
    pub fn new(problem: Problem, fmax: usize) -> Self {
        DpTables {
            problem,
            fmax,
            tables: Vec::new(),
        }
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn fmax(&self) -> usize {
        self.fmax
    }

    pub fn table(&self, id: NodeId) -> &DpTable {
        &self.tables[id.index()]
    }

    /// Best objective at the root with the full budget, `None` for an empty tree.
    pub fn root_value(&self, tree: &LcpTree) -> Option<i64> {
        tree.root().map(|r| self.table(r).value(self.fmax))
    }

    /// Recomputes one node from its children, which must be current.
    pub fn compute_node(&mut self, tree: &LcpTree, id: NodeId) {
        if self.tables.len() < tree.arena_len() {
            self.tables.resize_with(tree.arena_len(), DpTable::default);
        }
        let node = tree.node(id);
        let cap = self.fmax.min(node.leaf_count() as usize);
        let g = node.good() as i64;
        let b = node.bad() as i64;
        let mut values = vec![INF; cap + 1];
        let mut choices = vec![TAKE; cap + 1];

        match (self.problem, node.children()) {
            (Problem::BlockAll, None) => {
                if cap >= 1 {
                    values[1] = g;
                }
            }
            (Problem::BlockAll, Some((l, r))) => {
                let (tl, tr) = (&self.tables[l.index()], &self.tables[r.index()]);
                if cap >= 1 {
                    values[1] = g;
                }
                for f in 2..=cap {
                    let lo = 1.max(f.saturating_sub(tl.cap()));
                    let hi = (f - 1).min(tr.cap());
                    for n in lo..=hi {
                        let v = add(tl.values[f - n], tr.values[n]);
                        if v < values[f] {
                            values[f] = v;
                            choices[f] = n as u32;
                        }
                    }
                }
            }
            (Problem::BlockSome, None) => {
                values[0] = 0;
                if cap >= 1 {
                    values[1] = g - b;
                }
            }
            (Problem::BlockSome, Some((l, r))) => {
                let (tl, tr) = (&self.tables[l.index()], &self.tables[r.index()]);
                values[0] = 0;
                choices[0] = 0;
                if cap >= 1 {
                    values[1] = g - b;
                    for (n, v) in [(0u32, tl.values[1]), (1u32, tr.values[1])] {
                        if v < values[1] {
                            values[1] = v;
                            choices[1] = n;
                        }
                    }
                }
                for f in 2..=cap {
                    values[f] = INF;
                    let lo = f.saturating_sub(tl.cap());
                    let hi = f.min(tr.cap());
                    for n in lo..=hi {
                        let v = add(tl.values[f - n], tr.values[n]);
                        if v < values[f] {
                            values[f] = v;
                            choices[f] = n as u32;
                        }
                    }
                }
            }
        }
        self.tables[id.index()] = DpTable { values, choices };
    }
}

#[inline]
fn add(a: i64, b: i64) -> i64 {
    (a + b).min(INF)
}

/// Fills every table bottom-up.
pub fn compute_tables(tree: &LcpTree, problem: Problem, fmax: usize) -> DpTables {
    let mut tables = DpTables::new(problem, fmax);
    tables.tables.resize_with(tree.arena_len(), DpTable::default);
    for id in tree.postorder() {
        tables.compute_node(tree, id);
    }
    tables
}

/// Nodes chosen as filters for budget `f` at the root, in address order.
pub fn reconstruct_nodes(tree: &LcpTree, tables: &DpTables, f: usize) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack: Vec<(NodeId, usize)> = tree.root().into_iter().map(|r| (r, f)).collect();
    while let Some((id, f)) = stack.pop() {
        let t = tables.table(id);
        let f = f.min(t.cap());
        if t.values[f] >= INF {
            continue;
        }
        match t.choices[f] {
            TAKE => {
                if f >= 1 {
                    out.push(id);
                }
            }
            n => {
                let (l, r) = tree.node(id).children().expect("split at an internal node");
                let n = n as usize;
                stack.push((r, n));
                stack.push((l, f - n));
            }
        }
    }
    out
}

/// Filter prefixes for budget `f` at the root.
pub fn reconstruct_filters(tree: &LcpTree, tables: &DpTables, f: usize) -> Vec<Prefix> {
    reconstruct_nodes(tree, tables, f)
        .into_iter()
        .map(|id| tree.node(id).prefix())
        .collect()
}

/// Solution for the tables' full budget, with metrics read off the tree.
pub fn solution_from_tables(tree: &LcpTree, tables: &DpTables) -> FilterSolution {
    let nodes = reconstruct_nodes(tree, tables, tables.fmax);
    let collateral_damage = nodes.iter().map(|&id| tree.node(id).good()).sum();
    let benefit: u64 = nodes.iter().map(|&id| tree.node(id).bad()).sum();
    let total_bad = tree.root().map_or(0, |r| tree.node(r).bad());
    let mut filters: Vec<Prefix> = nodes.iter().map(|&id| tree.node(id).prefix()).collect();
    filters.sort_unstable();
    FilterSolution {
        filters_used: filters.len(),
        filters,
        collateral_damage,
        benefit,
        unblocked_bad: total_bad - benefit,
        residual_traffic: None,
    }
}

/// Either problem on a prebuilt tree.
pub fn solve(tree: &LcpTree, problem: Problem, fmax: usize) -> Result<FilterSolution> {
    if problem == Problem::BlockAll && fmax < 1 {
        return Err(Error::InfeasibleBudget(fmax));
    }
    Ok(solution_from_tables(tree, &compute_tables(tree, problem, fmax)))
}

/// Covers every bad address with at most `fmax` filters at minimum collateral damage.
pub fn block_all(tree: &LcpTree, fmax: usize) -> Result<FilterSolution> {
    solve(tree, Problem::BlockAll, fmax)
}

/// Minimizes collateral damage minus blocked bad weight with at most `fmax` filters.
pub fn block_some(tree: &LcpTree, fmax: usize) -> FilterSolution {
    solution_from_tables(tree, &compute_tables(tree, Problem::BlockSome, fmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Address, ListKind, WeightedAddressSet, WhitelistMode};
    use crate::oracle::{oracle_solve, OracleBudget, OracleInstance, OracleProblem};
    use proptest::prelude::*;

    fn sample() -> WeightedAddressSet {
        let last = [1u8, 3, 4, 5, 7, 8, 10, 11, 12];
        WeightedAddressSet::unit(ListKind::Bad, last.iter().map(|&d| Address::new(10, 0, 0, d))).unwrap()
    }

    fn implicit(bad: &WeightedAddressSet) -> LcpTree {
        LcpTree::build(bad, &WhitelistMode::ImplicitUnit).unwrap()
    }

    #[test]
    fn budget_of_n_blocks_leaves() {
        let bad = sample();
        let s = block_all(&implicit(&bad), 9).unwrap();
        assert_eq!(s.collateral_damage, 0);
        assert_eq!(s.filters_used, 9);
        assert!(s.filters.iter().all(|p| p.len() == 32));
    }

    #[test]
    fn budget_of_one_takes_root() {
        let bad = sample();
        let s = block_all(&implicit(&bad), 1).unwrap();
        assert_eq!(s.filters, ["10.0.0.0/28".parse().unwrap()]);
        assert_eq!(s.collateral_damage, 16 - 9);
    }

    #[test]
    fn zero_budget() {
        let bad = sample();
        let tree = implicit(&bad);
        assert_eq!(block_all(&tree, 0), Err(Error::InfeasibleBudget(0)));
        let s = block_some(&tree, 0);
        assert!(s.filters.is_empty());
        assert_eq!(s.net_cost(), 0);
        assert_eq!(s.unblocked_bad, 9);
    }

    #[test]
    fn sample_budget_three_matches_oracle() {
        let bad = sample();
        let s = block_all(&implicit(&bad), 3).unwrap();
        let inst = OracleInstance::blocking(bad.clone(), WhitelistMode::ImplicitUnit, 3);
        let o = oracle_solve(OracleProblem::BlockAll, &inst, &OracleBudget::default()).unwrap();
        assert_eq!(Some(s.collateral_damage as i128), o.value);
        assert_eq!(
            s,
            FilterSolution::evaluate(s.filters.clone(), &bad, &WhitelistMode::ImplicitUnit)
        );
    }

    #[test]
    fn heavy_bad_weights_force_full_coverage() {
        let addrs = [1u8, 3, 4, 5, 7, 8, 10, 11, 12];
        let bad = WeightedAddressSet::from_entries(
            ListKind::Bad,
            addrs.iter().map(|&d| (Address::new(10, 0, 0, d), 1u64 << 33)),
        )
        .unwrap();
        let tree = implicit(&bad);
        for f in 1..=9 {
            let some = block_some(&tree, f);
            let all = block_all(&tree, f).unwrap();
            assert_eq!(some.unblocked_bad, 0);
            assert_eq!(some.collateral_damage, all.collateral_damage);
        }
    }

    #[test]
    fn block_some_leaves_cheap_leaves_open() {
        // two isolated addresses far apart: only the heavy one is worth a filter
        let bad = WeightedAddressSet::from_entries(
            ListKind::Bad,
            [(Address::new(10, 0, 0, 1), 5), (Address::new(200, 0, 0, 1), 0)],
        )
        .unwrap();
        let tree = implicit(&bad);
        let s = block_some(&tree, 1);
        assert_eq!(s.filters, ["10.0.0.1/32".parse().unwrap()]);
        assert_eq!(s.net_cost(), -5);
        assert_eq!(s.unblocked_bad, 0);
    }

    #[test]
    fn tables_are_monotone() {
        let bad = sample();
        let tree = implicit(&bad);
        for problem in [Problem::BlockAll, Problem::BlockSome] {
            let t = compute_tables(&tree, problem, 9);
            for id in tree.postorder() {
                let v = t.table(id).values();
                assert!(
                    v.windows(2).all(|w| w[1] <= w[0]),
                    "{problem:?} at {}",
                    tree.node(id).prefix()
                );
            }
        }
    }

    fn instance() -> impl Strategy<Value = (WeightedAddressSet, WhitelistMode, usize)> {
        (
            proptest::collection::btree_map(0u32..64, 0u64..6, 1..11),
            proptest::collection::btree_map(0u32..64, 1u64..4, 0..12),
            any::<bool>(),
            1usize..11,
        )
            .prop_map(|(bad, good, explicit, f)| {
                let base = 0x0a00_0000;
                let bad = WeightedAddressSet::from_entries(
                    ListKind::Bad,
                    bad.into_iter().map(|(a, w)| (Address(base + a * 3), w)),
                )
                .unwrap();
                let white = if explicit {
                    let entries = good
                        .into_iter()
                        .map(|(a, w)| (Address(base + a * 3 + 1), w))
                        .filter(|(a, _)| !bad.contains(*a));
                    WhitelistMode::Explicit(WeightedAddressSet::from_entries(ListKind::Good, entries).unwrap())
                } else {
                    WhitelistMode::ImplicitUnit
                };
                let f = f.min(bad.len());
                (bad, white, f)
            })
    }

    proptest! {
        #[test]
        fn matches_oracle((bad, white, f) in instance()) {
            let tree = LcpTree::build(&bad, &white).unwrap();
            let budget = OracleBudget::default();
            let inst = OracleInstance::blocking(bad.clone(), white.clone(), f);

            let all = block_all(&tree, f).unwrap();
            let o = oracle_solve(OracleProblem::BlockAll, &inst, &budget).unwrap();
            prop_assert_eq!(Some(all.collateral_damage as i128), o.value);
            prop_assert_eq!(&all, &FilterSolution::evaluate(all.filters.clone(), &bad, &white));
            prop_assert!(all.is_non_overlapping() && all.filters_used <= f && all.unblocked_bad == 0);

            let some = block_some(&tree, f);
            let o = oracle_solve(OracleProblem::BlockSome, &inst, &budget).unwrap();
            prop_assert_eq!(Some(some.net_cost()), o.value);
            prop_assert_eq!(&some, &FilterSolution::evaluate(some.filters.clone(), &bad, &white));
            prop_assert!(some.is_non_overlapping() && some.filters_used <= f);
            prop_assert!(some.collateral_damage <= all.collateral_damage);
        }
    }
}
