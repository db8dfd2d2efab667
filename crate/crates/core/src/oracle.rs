//! Brute-force reference solvers and the comparison baselines.
//!
//! The oracles share no code with the dynamic programs: candidates are the
//! pairwise longest common prefixes of the input addresses, and every metric
//! is recomputed from the raw lists.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::flooding::FloodingInstance;
use crate::model::{longest_common_prefix, Address, FilterSolution, Prefix, WeightedAddressSet, WhitelistMode};

/// Limits keeping enumeration tractable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    /// Cap on candidate prefixes, i.e. LCP-tree nodes.
    pub max_nodes: usize,
    /// Cap on the flooding capacity.
    pub max_capacity: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_nodes: 21,
            max_capacity: 1 << 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleProblem {
    BlockAll,
    BlockSome,
    Flooding,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleInstance {
    pub bad: WeightedAddressSet,
    pub white: WhitelistMode,
    pub fmax: usize,
    /// Only read by [`OracleProblem::Flooding`].
    pub capacity: u64,
}

impl OracleInstance {
    pub fn blocking(bad: WeightedAddressSet, white: WhitelistMode, fmax: usize) -> Self {
        OracleInstance {
            bad,
            white,
            fmax,
            capacity: 0,
        }
    }

    pub fn flooding(inst: &FloodingInstance) -> Self {
        OracleInstance {
            bad: inst.bad().clone(),
            white: WhitelistMode::Explicit(inst.good().clone()),
            fmax: inst.fmax(),
            capacity: inst.capacity(),
        }
    }

    fn good_leaves(&self) -> impl Iterator<Item = (Address, u64)> + '_ {
        let good = match &self.white {
            WhitelistMode::Explicit(g) => Some(g),
            WhitelistMode::ImplicitUnit => None,
        };
        good.into_iter().flat_map(|g| g.iter())
    }
}

/// Exact optimum: `value` is `None` when nothing is feasible. The objective is
/// collateral damage for BLOCK-ALL and FLOODING, and damage minus benefit for
/// BLOCK-SOME.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleSolution {
    pub value: Option<i128>,
    pub filters: Vec<Prefix>,
}

/// Enumerates every non-overlapping set of at most `F_max` candidate prefixes.
pub fn oracle_solve(problem: OracleProblem, inst: &OracleInstance, budget: &OracleBudget) -> Result<OracleSolution> {
    let mut leaves: Vec<Address> = inst.bad.addresses().collect();
    if problem == OracleProblem::Flooding {
        if inst.capacity > budget.max_capacity {
            return Err(Error::BudgetExceeded {
                what: "capacity",
                actual: inst.capacity,
                limit: budget.max_capacity,
            });
        }
        leaves.extend(inst.good_leaves().map(|(a, _)| a));
    }
    let mut candidates = BTreeSet::new();
    for (i, &a) in leaves.iter().enumerate() {
        for &b in &leaves[i..] {
            candidates.insert(longest_common_prefix(a, b));
        }
    }
    if candidates.len() > budget.max_nodes {
        return Err(Error::BudgetExceeded {
            what: "candidate prefixes",
            actual: candidates.len() as u64,
            limit: budget.max_nodes as u64,
        });
    }
    let candidates: Vec<Prefix> = candidates.into_iter().collect();
    let total_traffic: u64 = inst.bad.iter().chain(inst.good_leaves()).map(|(_, w)| w).sum();

    let evaluate = |chosen: &[Prefix]| -> Option<i128> {
        let cd: u64 = chosen.iter().map(|&p| inst.white.good_weight_in(p, &inst.bad)).sum();
        let benefit: u64 = chosen.iter().map(|&p| inst.bad.weight_in(p)).sum();
        match problem {
            OracleProblem::BlockAll => {
                let covered = inst.bad.addresses().all(|a| chosen.iter().any(|p| p.covers(a)));
                covered.then_some(cd as i128)
            }
            OracleProblem::BlockSome => Some(cd as i128 - benefit as i128),
            OracleProblem::Flooding => {
                let residual = total_traffic - cd - benefit;
                (residual <= inst.capacity).then_some(cd as i128)
            }
        }
    };

    let mut best = OracleSolution {
        value: None,
        filters: Vec::new(),
    };
    let mut chosen = Vec::new();
    enumerate(&candidates, 0, inst.fmax, &mut chosen, &mut |set| {
        if let Some(v) = evaluate(set) {
            if best.value.is_none_or(|b| v < b) {
                best.value = Some(v);
                best.filters = set.to_vec();
            }
        }
    });
    Ok(best)
}

fn enumerate(
    candidates: &[Prefix],
    from: usize,
    left: usize,
    chosen: &mut Vec<Prefix>,
    visit: &mut dyn FnMut(&[Prefix]),
) {
    visit(chosen);
    if left == 0 {
        return;
    }
    for i in from..candidates.len() {
        let p = candidates[i];
        if chosen.iter().any(|q| q.overlaps(p)) {
            continue;
        }
        chosen.push(p);
        enumerate(candidates, i + 1, left - 1, chosen, visit);
        chosen.pop();
    }
}

/// Largest blacklist [`partition_oracle_block_all`] accepts.
pub const PARTITION_ORACLE_MAX: usize = 10;

/// BLOCK-ALL by enumerating partitions of the blacklist into at most `F_max`
/// groups, each blocked by its covering prefix. `None` when no partition has
/// pairwise non-overlapping covers.
pub fn partition_oracle_block_all(bad: &WeightedAddressSet, white: &WhitelistMode, fmax: usize) -> Result<Option<u64>> {
    let addrs: Vec<Address> = bad.addresses().collect();
    if addrs.len() > PARTITION_ORACLE_MAX {
        return Err(Error::BudgetExceeded {
            what: "addresses",
            actual: addrs.len() as u64,
            limit: PARTITION_ORACLE_MAX as u64,
        });
    }
    if addrs.is_empty() {
        return Ok(Some(0));
    }
    let mut best = None;
    let mut labels = vec![0usize; addrs.len()];
    partitions(&mut labels, 1, 1, fmax, &mut |labels, groups| {
        let covers: Vec<Prefix> = (0..groups)
            .map(|g| {
                addrs
                    .iter()
                    .zip(labels)
                    .filter(|&(_, &l)| l == g)
                    .map(|(&a, _)| Prefix::host(a))
                    .reduce(Prefix::common)
                    .expect("groups are non-empty")
            })
            .collect();
        let disjoint = (0..covers.len()).all(|i| (i + 1..covers.len()).all(|j| !covers[i].overlaps(covers[j])));
        if disjoint {
            let cd: u64 = covers.iter().map(|&p| white.good_weight_in(p, bad)).sum();
            if best.is_none_or(|b| cd < b) {
                best = Some(cd);
            }
        }
    });
    Ok(best)
}

/// Restricted-growth strings: `labels[i] <= max(labels[..i]) + 1`.
fn partitions(labels: &mut [usize], i: usize, groups: usize, limit: usize, visit: &mut dyn FnMut(&[usize], usize)) {
    if groups > limit {
        return;
    }
    if i == labels.len() {
        visit(labels, groups);
        return;
    }
    for l in 0..=groups {
        labels[i] = l;
        partitions(labels, i + 1, groups.max(l + 1), limit, visit);
    }
}

/// Largest address count [`subset_oracle_flooding`] accepts.
pub const SUBSET_ORACLE_MAX: usize = 14;

/// FLOODING by enumerating which addresses end up blocked. A blocked set is
/// realizable with as many filters as its minimal CIDR cover that avoids every
/// unblocked address. `None` when no blocked set is feasible.
pub fn subset_oracle_flooding(inst: &FloodingInstance) -> Result<Option<u64>> {
    let all: Vec<(Address, u64, bool)> = inst
        .bad()
        .iter()
        .map(|(a, w)| (a, w, false))
        .chain(inst.good().iter().map(|(a, w)| (a, w, true)))
        .collect();
    if all.len() > SUBSET_ORACLE_MAX {
        return Err(Error::BudgetExceeded {
            what: "addresses",
            actual: all.len() as u64,
            limit: SUBSET_ORACLE_MAX as u64,
        });
    }
    let mut best = None;
    for mask in 0u32..(1 << all.len()) {
        let blocked = |i: usize| mask & (1 << i) != 0;
        let residual: u64 = (0..all.len()).filter(|&i| !blocked(i)).map(|i| all[i].1).sum();
        if residual > inst.capacity() {
            continue;
        }
        let inside: Vec<Address> = (0..all.len()).filter(|&i| blocked(i)).map(|i| all[i].0).collect();
        let outside: Vec<Address> = (0..all.len()).filter(|&i| !blocked(i)).map(|i| all[i].0).collect();
        if min_cover(Prefix::ROOT, &inside, &outside) > inst.fmax() {
            continue;
        }
        let cd: u64 = (0..all.len())
            .filter(|&i| blocked(i) && all[i].2)
            .map(|i| all[i].1)
            .sum();
        if best.is_none_or(|b| cd < b) {
            best = Some(cd);
        }
    }
    Ok(best)
}

/// Fewest prefixes inside `p` covering all of `inside` and none of `outside`.
fn min_cover(p: Prefix, inside: &[Address], outside: &[Address]) -> usize {
    let inside: Vec<Address> = inside.iter().copied().filter(|&a| p.covers(a)).collect();
    if inside.is_empty() {
        return 0;
    }
    let outside: Vec<Address> = outside.iter().copied().filter(|&a| p.covers(a)).collect();
    if outside.is_empty() {
        return 1;
    }
    let half = 1u32 << (31 - p.len());
    let left = Prefix::truncating(p.value(), p.len() + 1);
    let right = Prefix::truncating(p.value() | half, p.len() + 1);
    min_cover(left, &inside, &outside) + min_cover(right, &inside, &outside)
}

/// Drop-everything-equally baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformRateLimit {
    /// Fraction of every flow dropped.
    pub drop_fraction: f64,
    pub collateral_damage: f64,
    pub residual_traffic: u64,
}

/// Drops the same fraction `max(0, (T0 - C) / T0)` of every source.
pub fn uniform_rate_limit(inst: &FloodingInstance) -> UniformRateLimit {
    let t0 = inst.total_traffic();
    let c = inst.capacity();
    let drop_fraction = if t0 == 0 || c >= t0 {
        0.0
    } else {
        (t0 - c) as f64 / t0 as f64
    };
    let good: u64 = inst.good().iter().map(|(_, w)| w).sum();
    UniformRateLimit {
        drop_fraction,
        collateral_damage: drop_fraction * good as f64,
        residual_traffic: t0.min(c),
    }
}

const LLOYD_MAX_ITERS: usize = 100;

/// Best of `runs` Lloyd's k-means runs over the blacklist as integers, with
/// `k = F_max`; each cluster becomes its covering prefix, and nested prefixes
/// collapse into the shorter one. Run `r` uses ChaCha8 seeded with `seed` on
/// stream `r`.
pub fn kmeans_prefix_baseline(
    bad: &WeightedAddressSet,
    white: &WhitelistMode,
    fmax: usize,
    runs: usize,
    seed: u64,
) -> Result<FilterSolution> {
    if fmax < 1 {
        return Err(Error::InfeasibleBudget(fmax));
    }
    if runs < 1 {
        return Err(Error::InvalidParameter("at least one k-means run is needed"));
    }
    let points: Vec<u32> = bad.addresses().map(|a| a.0).collect();
    if points.is_empty() {
        return Ok(FilterSolution::evaluate(Vec::new(), bad, white));
    }
    let k = fmax.min(points.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64);
        let (sse, assign) = lloyd(&points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, assign));
        }
    }
    let (_, assign) = best.expect("at least one run");

    let mut covers: Vec<Option<Prefix>> = vec![None; k];
    for (&x, &c) in points.iter().zip(&assign) {
        let host = Prefix::host(Address(x));
        covers[c] = Some(covers[c].map_or(host, |p| p.common(host)));
    }
    let mut covers: Vec<Prefix> = covers.into_iter().flatten().collect();
    covers.sort_unstable();
    let mut filters: Vec<Prefix> = Vec::with_capacity(covers.len());
    for p in covers {
        if filters.last().is_some_and(|q| q.contains(p)) {
            continue;
        }
        filters.push(p);
    }
    Ok(FilterSolution::evaluate(filters, bad, white))
}

/// One Lloyd's run on sorted points; returns the SSE and each point's cluster.
fn lloyd(points: &[u32], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let mut centroids: Vec<f64> = sample_distinct(points.len(), k, rng)
        .into_iter()
        .map(|i| points[i] as f64)
        .collect();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..LLOYD_MAX_ITERS {
        centroids.sort_by(f64::total_cmp);
        let mut changed = false;
        for (i, &x) in points.iter().enumerate() {
            let c = nearest(&centroids, x as f64);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0f64; k];
        let mut counts = vec![0usize; k];
        for (&x, &c) in points.iter().zip(&assign) {
            sums[c] += x as f64;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            }
        }
    }
    let sse = points
        .iter()
        .zip(&assign)
        .map(|(&x, &c)| {
            let d = x as f64 - centroids[c];
            d * d
        })
        .sum();
    (sse, assign)
}

/// Index of the nearest of the sorted centroids; ties go to the lower one.
fn nearest(sorted: &[f64], x: f64) -> usize {
    let i = sorted.partition_point(|&c| c < x);
    if i == 0 {
        0
    } else if i == sorted.len() || x - sorted[i - 1] <= sorted[i] - x {
        i - 1
    } else {
        i
    }
}

/// `k` distinct indices below `n` by partial Fisher-Yates.
fn sample_distinct(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let span = (n - i) as u64;
        let j = i + ((rng.next_u64() as u128 * span as u128) >> 64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}
