//! Capacity-constrained filtering (FLOODING).
//!
//! The tree spans both lists, every address a leaf carrying its traffic. For
//! node `p`, `z_p(F, c)` is the least collateral damage such that at most `c`
//! units of `p`'s traffic stay unblocked using at most `F` filters inside `p`:
//!
//! ```text
//! z_p(F, c) = 0                                         if T_p <= c
//!           = min( g_p                                  if F >= 1,
//!                  min_{n, m} z_l(F - n, c - m) + z_r(n, m) )
//! ```
//!
//! Capacities live on a grid `{0, Δ, 2Δ, ...}`. Budgets round down to the grid,
//! so a coarse grid never returns a filter set that overloads the link; `Δ = 1`
//! is the exact solver.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lcptree::{LcpTree, NodeId, MAX_TOTAL_WEIGHT};
use crate::model::{FilterSolution, ListKind, Prefix, WeightedAddressSet};

/// Cost of an infeasible cell, or of a forbidden take.
pub const INF: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FloodingInstance {
    bad: WeightedAddressSet,
    good: WeightedAddressSet,
    fmax: usize,
    capacity: u64,
    total: u64,
}

impl FloodingInstance {
    /// Validates the lists: positive integer traffic, disjoint, not both empty.
    pub fn new(bad: WeightedAddressSet, good: WeightedAddressSet, fmax: usize, capacity: u64) -> Result<Self> {
        if bad.is_empty() && good.is_empty() {
            return Err(Error::EmptyInstance);
        }
        bad.check_disjoint(&good)?;
        if let Some((address, weight)) = bad.iter().chain(good.iter()).find(|&(_, w)| w == 0) {
            return Err(Error::InvalidWeight {
                address,
                weight,
                reason: "traffic must be positive",
            });
        }
        let total = bad
            .total()?
            .checked_add(good.total()?)
            .filter(|&t| t <= MAX_TOTAL_WEIGHT)
            .ok_or(Error::WeightOverflow)?;
        Ok(FloodingInstance {
            bad,
            good,
            fmax,
            capacity,
            total,
        })
    }

    pub fn bad(&self) -> &WeightedAddressSet {
        &self.bad
    }

    pub fn good(&self) -> &WeightedAddressSet {
        &self.good
    }

    pub fn fmax(&self) -> usize {
        self.fmax
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// `T0`, all traffic towards the victim.
    pub fn total_traffic(&self) -> u64 {
        self.total
    }

    pub fn with_fmax(&self, fmax: usize) -> Self {
        FloodingInstance { fmax, ..self.clone() }
    }

    pub fn with_capacity(&self, capacity: u64) -> Self {
        FloodingInstance {
            capacity,
            ..self.clone()
        }
    }
}

/// Boundary value at a single address of weight `w`: 0 if it fits in `c`,
/// otherwise the cost of blocking it (`w` if good, 0 if bad) when a filter is
/// available. `None` stands for infeasible.
pub fn leaf_boundary(kind: ListKind, w: u64, f: usize, c: u64) -> Option<u64> {
    if w <= c {
        Some(0)
    } else if f >= 1 {
        Some(match kind {
            ListKind::Good => w,
            ListKind::Bad => 0,
        })
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Choice {
    Nothing,
    Take,
    /// Filters and grid steps handed to the right child.
    Split(u32, u32),
}

#[derive(Default)]
struct Table {
    cap_f: usize,
    cap_k: usize,
    values: Vec<u64>,
    choices: Vec<Choice>,
}

impl Table {
    #[inline]
    fn at(&self, f: usize, k: usize) -> usize {
        f.min(self.cap_f) * (self.cap_k + 1) + k.min(self.cap_k)
    }
}

/// Optimal cost and chosen nodes of one grid DP run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct FloodingPlan {
    pub cost: u64,
    pub nodes: Vec<NodeId>,
}

fn fill_node(tree: &LcpTree, tables: &[Table], id: NodeId, fmax: usize, k_root: usize, delta: u64, take: u64) -> Table {
    let node = tree.node(id);
    let t_p = node.traffic();
    let cap_f = fmax.min(node.leaf_count() as usize);
    let cap_k = k_root.min(usize::try_from(t_p.div_ceil(delta)).unwrap_or(usize::MAX));
    let width = cap_k + 1;
    let mut values = vec![INF; (cap_f + 1) * width];
    let mut choices = vec![Choice::Nothing; (cap_f + 1) * width];
    let children = node.children().map(|(l, r)| (&tables[l.index()], &tables[r.index()]));

    for f in 0..=cap_f {
        for k in 0..=cap_k {
            let cell = f * width + k;
            if t_p <= k as u64 * delta {
                values[cell] = 0;
                continue;
            }
            if f >= 1 && take != INF {
                values[cell] = take;
                choices[cell] = Choice::Take;
            }
            let Some((tl, tr)) = children else { continue };
            let n_lo = f.saturating_sub(tl.cap_f);
            let n_hi = f.min(tr.cap_f);
            let j_lo = k.saturating_sub(tl.cap_k);
            let j_hi = k.min(tr.cap_k);
            let mut best = values[cell];
            let mut choice = choices[cell];
            for n in n_lo..=n_hi {
                let lrow = &tl.values[(f - n) * (tl.cap_k + 1)..][..tl.cap_k + 1];
                let rrow = &tr.values[n * (tr.cap_k + 1)..][..tr.cap_k + 1];
                for j in j_lo..=j_hi {
                    let (a, b) = (lrow[k - j], rrow[j]);
                    if a == INF || b == INF {
                        continue;
                    }
                    let v = a.checked_add(b).expect("flooding cost overflow");
                    if v < best {
                        best = v;
                        choice = Choice::Split(n as u32, j as u32);
                    }
                }
            }
            values[cell] = best;
            choices[cell] = choice;
        }
    }
    Table {
        cap_f,
        cap_k,
        values,
        choices,
    }
}

/// Runs the grid DP with an arbitrary take cost per node ([`INF`] forbids
/// taking it). `None` when no filter set meets the capacity.
pub(crate) fn flooding_dp<C>(
    tree: &LcpTree,
    fmax: usize,
    capacity: u64,
    delta: u64,
    mut take_cost: C,
) -> Option<FloodingPlan>
where
    C: FnMut(NodeId) -> u64,
{
    assert!(delta >= 1, "grid step must be positive");
    let root = tree.root()?;
    let k_root = usize::try_from(capacity / delta).unwrap_or(usize::MAX);
    let mut tables: Vec<Table> = Vec::new();
    tables.resize_with(tree.arena_len(), Table::default);
    for id in tree.postorder() {
        let table = fill_node(tree, &tables, id, fmax, k_root, delta, take_cost(id));
        tables[id.index()] = table;
    }

    let cost = tables[root.index()].values[tables[root.index()].at(fmax, k_root)];
    if cost == INF {
        return None;
    }
    let mut nodes = Vec::new();
    let mut stack = vec![(root, fmax, k_root)];
    while let Some((id, f, k)) = stack.pop() {
        let t = &tables[id.index()];
        match t.choices[t.at(f, k)] {
            Choice::Nothing => {}
            Choice::Take => nodes.push(id),
            Choice::Split(n, j) => {
                let (f, k) = (f.min(t.cap_f), k.min(t.cap_k));
                let (n, j) = (n as usize, j as usize);
                let (l, r) = tree.node(id).children().expect("split at an internal node");
                stack.push((r, n, j));
                stack.push((l, f - n, k - j));
            }
        }
    }
    Some(FloodingPlan { cost, nodes })
}

/// Metrics of a chosen node set, read off the tree's aggregates.
pub(crate) fn plan_solution(tree: &LcpTree, nodes: &[NodeId]) -> FilterSolution {
    let root = tree.root().map(|r| tree.node(r));
    let collateral_damage = nodes.iter().map(|&id| tree.node(id).good()).sum();
    let benefit: u64 = nodes.iter().map(|&id| tree.node(id).bad()).sum();
    let blocked: u64 = nodes.iter().map(|&id| tree.node(id).traffic()).sum();
    let mut filters: Vec<Prefix> = nodes.iter().map(|&id| tree.node(id).prefix()).collect();
    filters.sort_unstable();
    FilterSolution {
        filters_used: filters.len(),
        filters,
        collateral_damage,
        benefit,
        unblocked_bad: root.map_or(0, |r| r.bad()) - benefit,
        residual_traffic: Some(root.map_or(0, |r| r.traffic()) - blocked),
    }
}

/// Least collateral damage leaving at most `C` units of traffic.
pub fn solve_flooding(inst: &FloodingInstance) -> Result<FilterSolution> {
    solve_flooding_coarse(inst, 1)
}

/// The same on the capacity grid of step `delta_c`. Feasible, but possibly
/// more damaging than the exact optimum when `delta_c > 1`.
pub fn solve_flooding_coarse(inst: &FloodingInstance, delta_c: u64) -> Result<FilterSolution> {
    if delta_c < 1 {
        return Err(Error::InvalidParameter("capacity step must be at least 1"));
    }
    if inst.fmax < 1 {
        return Err(Error::InfeasibleBudget(inst.fmax));
    }
    let tree = LcpTree::build_traffic(&inst.bad, &inst.good)?;
    let plan = flooding_dp(&tree, inst.fmax, inst.capacity, delta_c, |id| tree.node(id).good())
        .expect("blocking the root is always feasible");
    let solution = plan_solution(&tree, &plan.nodes);
    debug_assert_eq!(solution.collateral_damage, plan.cost);
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Address;
    use crate::oracle::{oracle_solve, subset_oracle_flooding, OracleBudget, OracleInstance, OracleProblem};
    use proptest::prelude::*;

    fn set(kind: ListKind, entries: &[(u32, u64)]) -> WeightedAddressSet {
        WeightedAddressSet::from_entries(kind, entries.iter().map(|&(a, w)| (Address(0x0a00_0000 + a), w))).unwrap()
    }

    fn example() -> FloodingInstance {
        let bad = set(ListKind::Bad, &[(1, 10), (2, 10), (9, 10), (12, 10)]);
        let good = set(ListKind::Good, &[(3, 10), (40, 10)]);
        FloodingInstance::new(bad, good, 2, 20).unwrap()
    }

    #[test]
    fn boundary_cases() {
        assert_eq!(leaf_boundary(ListKind::Good, 5, 0, 10), Some(0));
        assert_eq!(leaf_boundary(ListKind::Good, 5, 1, 0), Some(5));
        assert_eq!(leaf_boundary(ListKind::Bad, 5, 0, 0), None);
        assert_eq!(leaf_boundary(ListKind::Bad, 5, 1, 0), Some(0));
    }

    #[test]
    fn capacity_already_sufficient() {
        let inst = example().with_capacity(60);
        let s = solve_flooding(&inst).unwrap();
        assert!(s.filters.is_empty());
        assert_eq!(s.collateral_damage, 0);
        assert_eq!(s.residual_traffic, Some(60));
    }

    #[test]
    fn zero_capacity_single_filter() {
        let inst = example().with_capacity(0).with_fmax(1);
        let s = solve_flooding(&inst).unwrap();
        assert_eq!(s.filters_used, 1);
        assert_eq!(s.collateral_damage, 20);
        assert_eq!(s.residual_traffic, Some(0));
    }

    #[test]
    fn six_address_example_matches_both_oracles() {
        let inst = example();
        let s = solve_flooding(&inst).unwrap();
        let o = oracle_solve(
            OracleProblem::Flooding,
            &OracleInstance::flooding(&inst),
            &OracleBudget::default(),
        )
        .unwrap();
        assert_eq!(o.value, Some(s.collateral_damage as i128));
        assert_eq!(subset_oracle_flooding(&inst).unwrap(), Some(s.collateral_damage));
        assert!(s.residual_traffic.unwrap() <= 20);
    }

    #[test]
    fn rejects_bad_parameters() {
        let inst = example();
        assert!(matches!(
            solve_flooding_coarse(&inst, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert_eq!(solve_flooding(&inst.with_fmax(0)), Err(Error::InfeasibleBudget(0)));
        let bad = set(ListKind::Bad, &[(1, 0)]);
        assert!(matches!(
            FloodingInstance::new(bad, WeightedAddressSet::new(ListKind::Good), 1, 0),
            Err(Error::InvalidWeight { .. })
        ));
    }

    #[test]
    fn whole_traffic_grid() {
        let inst = example();
        let s = solve_flooding_coarse(&inst, inst.total_traffic()).unwrap();
        assert!(s.residual_traffic.unwrap() <= inst.capacity());
        assert!(s.collateral_damage >= solve_flooding(&inst).unwrap().collateral_damage);
    }

    fn instance() -> impl Strategy<Value = FloodingInstance> {
        (
            proptest::collection::btree_map(0u32..128, 1u64..40, 1..11),
            proptest::collection::vec(any::<bool>(), 10),
            1usize..5,
            0u64..200,
        )
            .prop_map(|(addrs, kinds, f, c)| {
                let mut bad = WeightedAddressSet::new(ListKind::Bad);
                let mut good = WeightedAddressSet::new(ListKind::Good);
                for (i, (a, w)) in addrs.into_iter().enumerate() {
                    let ip = Address(0x0a00_0000 + a * 5);
                    if kinds[i] {
                        bad.set(ip, w)
                    } else {
                        good.set(ip, w)
                    };
                }
                FloodingInstance::new(bad, good, f, c).unwrap()
            })
    }

    proptest! {
        #[test]
        fn matches_oracle_and_is_feasible(inst in instance()) {
            let s = solve_flooding(&inst).unwrap();
            prop_assert!(s.residual_traffic.unwrap() <= inst.capacity());
            prop_assert!(s.filters_used <= inst.fmax() && s.is_non_overlapping());
            prop_assert_eq!(&s, &FilterSolution::evaluate_traffic(s.filters.clone(), inst.bad(), inst.good()));
            let o = oracle_solve(OracleProblem::Flooding, &OracleInstance::flooding(&inst), &OracleBudget::default()).unwrap();
            prop_assert_eq!(o.value, Some(s.collateral_damage as i128));
        }

        #[test]
        fn coarse_grid_is_feasible_and_dominated(inst in instance(), delta in 1u64..50) {
            let exact = solve_flooding(&inst).unwrap();
            let coarse = solve_flooding_coarse(&inst, delta).unwrap();
            prop_assert!(coarse.residual_traffic.unwrap() <= inst.capacity());
            prop_assert!(coarse.collateral_damage >= exact.collateral_damage);
        }

        #[test]
        fn monotone_in_resources(inst in instance()) {
            let base = solve_flooding(&inst).unwrap().collateral_damage;
            let more_f = solve_flooding(&inst.with_fmax(inst.fmax() + 1)).unwrap().collateral_damage;
            let more_c = solve_flooding(&inst.with_capacity(inst.capacity() + 1)).unwrap().collateral_damage;
            prop_assert!(more_f <= base && more_c <= base);
        }
    }
}
