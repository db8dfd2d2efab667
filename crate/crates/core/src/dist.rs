//! FLOODING across several routers (DIST-FLOODING).
//!
//! Traffic from each source follows one shortest path to the victim, so every
//! router sees part of the lists. The coupling constraint, each bad address
//! blocked at most once along its path, is priced: router `u` solves its own
//! FLOODING problem with node cost `g_p + λ_p`, where `λ_p` sums the prices of
//! the bad addresses under `p` that `u` sees. Prices then move along the
//! subgradient,
//!
//! ```text
//! λ_ip ← max(0, λ_ip + α · (times ip is blocked − 1))
//! ```
//!
//! Prices are fixed-point integers with [`PRICE_SCALE`] units per unit of
//! weight, so subproblem optima and dual values are exact.
//!
//! A router's capacity bounds the traffic it sees before any filtering. Each
//! iteration's filters are repaired into a primal solution, routers nearest
//! the victim first: a router keeps its filters unless one of them covers a bad
//! address already blocked closer to the victim, in which case it re-solves
//! with such prefixes forbidden.

use alloc::collections::{btree_map, BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flooding::{flooding_dp, plan_solution, INF};
use crate::lcptree::{LcpTree, NodeId};
use crate::model::{Address, FilterSolution, ListKind, WeightedAddressSet};

/// Price units per unit of weight.
pub const PRICE_SCALE: u64 = 1_000_000;

/// Bound on any scaled cost, keeping DP sums exact.
const MAX_SCALED: u64 = 1 << 62;

pub type RouterId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouterSpec {
    pub fmax: usize,
    pub capacity: u64,
}

/// Graph, victim, filtering routers and where each source enters.
///
/// Nodes without a [`RouterSpec`] forward traffic but never filter.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Topology {
    adjacency: BTreeMap<RouterId, BTreeSet<RouterId>>,
    victim: Option<RouterId>,
    routers: BTreeMap<RouterId, RouterSpec>,
    ingress: BTreeMap<Address, RouterId>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, u: RouterId) {
        self.adjacency.entry(u).or_default();
    }

    pub fn add_edge(&mut self, a: RouterId, b: RouterId) {
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn set_router(&mut self, u: RouterId, spec: RouterSpec) {
        self.add_node(u);
        self.routers.insert(u, spec);
    }

    pub fn set_victim(&mut self, v: RouterId) {
        self.add_node(v);
        self.victim = Some(v);
    }

    pub fn set_ingress(&mut self, ip: Address, u: RouterId) {
        self.add_node(u);
        self.ingress.insert(ip, u);
    }

    pub fn victim(&self) -> Option<RouterId> {
        self.victim
    }

    pub fn routers(&self) -> &BTreeMap<RouterId, RouterSpec> {
        &self.routers
    }

    pub fn ingress(&self) -> &BTreeMap<Address, RouterId> {
        &self.ingress
    }

    pub fn nodes(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (RouterId, RouterId)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(&a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    /// Hop distance to the victim for every node that can reach it.
    pub fn distances(&self) -> Result<BTreeMap<RouterId, usize>> {
        let victim = self.victim.ok_or(Error::InvalidTopology("no victim"))?;
        let mut dist = BTreeMap::from([(victim, 0usize)]);
        let mut queue = VecDeque::from([victim]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for &v in &self.adjacency[&u] {
                if let btree_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Nodes from `start` to the victim; each hop goes to the lowest-numbered
    /// neighbour one step closer.
    fn path_from(&self, start: RouterId, dist: &BTreeMap<RouterId, usize>) -> Option<Vec<RouterId>> {
        let mut path = Vec::new();
        let mut cur = start;
        let mut d = *dist.get(&cur)?;
        path.push(cur);
        while d > 0 {
            cur = *self.adjacency[&cur].iter().find(|v| dist.get(v) == Some(&(d - 1)))?;
            d -= 1;
            path.push(cur);
        }
        Some(path)
    }
}

/// What one router sees: the addresses whose path crosses it.
#[derive(Clone, Debug)]
pub struct RouterView {
    pub router: RouterId,
    pub spec: RouterSpec,
    pub bad: WeightedAddressSet,
    pub good: WeightedAddressSet,
    /// Tree over both lists; `None` when nothing crosses the router.
    pub tree: Option<LcpTree>,
}

impl RouterView {
    /// `T0` at this router.
    pub fn total_traffic(&self) -> u64 {
        self.tree
            .as_ref()
            .and_then(|t| t.root().map(|r| t.node(r).traffic()))
            .unwrap_or(0)
    }
}

/// Every router's view plus each source's filtering routers along its path.
#[derive(Clone, Debug)]
pub struct RoutedViews {
    pub views: BTreeMap<RouterId, RouterView>,
    /// Filtering routers on each address's path, ingress first.
    pub paths: BTreeMap<Address, Vec<RouterId>>,
    /// Filtering routers, nearest the victim first.
    pub order: Vec<RouterId>,
}

/// Routes every listed address and builds each router's view.
pub fn route_and_view(topo: &Topology, bad: &WeightedAddressSet, good: &WeightedAddressSet) -> Result<RoutedViews> {
    bad.check_disjoint(good)?;
    let dist = topo.distances()?;
    let mut by_ingress: BTreeMap<RouterId, Vec<RouterId>> = BTreeMap::new();
    let mut paths = BTreeMap::new();
    let mut views: BTreeMap<RouterId, (WeightedAddressSet, WeightedAddressSet)> = topo
        .routers
        .keys()
        .map(|&u| {
            (
                u,
                (
                    WeightedAddressSet::new(ListKind::Bad),
                    WeightedAddressSet::new(ListKind::Good),
                ),
            )
        })
        .collect();

    for (ip, w, kind) in bad
        .iter()
        .map(|(a, w)| (a, w, ListKind::Bad))
        .chain(good.iter().map(|(a, w)| (a, w, ListKind::Good)))
    {
        let start = *topo.ingress.get(&ip).ok_or(Error::UnroutableAddress(ip))?;
        if let btree_map::Entry::Vacant(e) = by_ingress.entry(start) {
            let path = topo.path_from(start, &dist).ok_or(Error::UnroutableAddress(ip))?;
            e.insert(path.into_iter().filter(|u| topo.routers.contains_key(u)).collect());
        }
        let routers = &by_ingress[&start];
        for u in routers {
            let (b, g) = views.get_mut(u).expect("router view");
            match kind {
                ListKind::Bad => b.set(ip, w),
                ListKind::Good => g.set(ip, w),
            };
        }
        paths.insert(ip, routers.clone());
    }

    let mut order: Vec<RouterId> = topo.routers.keys().copied().collect();
    order.sort_by_key(|u| (dist.get(u).copied().unwrap_or(usize::MAX), *u));
    let views = views
        .into_iter()
        .map(|(u, (b, g))| {
            let tree = if b.is_empty() && g.is_empty() {
                None
            } else {
                Some(LcpTree::build_traffic(&b, &g)?)
            };
            Ok((
                u,
                RouterView {
                    router: u,
                    spec: topo.routers[&u],
                    bad: b,
                    good: g,
                    tree,
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(RoutedViews { views, paths, order })
}

/// Shadow prices, one per bad address, in units of `1 / PRICE_SCALE`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PriceVector {
    raw: BTreeMap<Address, u64>,
}

impl PriceVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raw(&self, ip: Address) -> u64 {
        self.raw.get(&ip).copied().unwrap_or(0)
    }

    pub fn set_raw(&mut self, ip: Address, price: u64) {
        if price == 0 {
            self.raw.remove(&ip);
        } else {
            self.raw.insert(ip, price);
        }
    }

    pub fn get(&self, ip: Address) -> f64 {
        self.raw(ip) as f64 / PRICE_SCALE as f64
    }

    pub fn total_raw(&self) -> u128 {
        self.raw.values().map(|&p| p as u128).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Address, u64)> + '_ {
        self.raw.iter().map(|(&a, &p)| (a, p))
    }
}

/// Optimal priced subproblem at one router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subproblem {
    pub router: RouterId,
    pub nodes: Vec<NodeId>,
    /// `h_u(λ)` in price units.
    pub value: u64,
    pub solution: FilterSolution,
}

/// `λ_p` for every node of the view's tree.
fn node_prices(tree: &LcpTree, prices: &PriceVector) -> Vec<u64> {
    let mut out = alloc::vec![0u64; tree.arena_len()];
    for id in tree.postorder() {
        let n = tree.node(id);
        out[id.index()] = match (n.children(), n.leaf_entry()) {
            (Some((l, r)), _) => out[l.index()] + out[r.index()],
            (None, Some((ListKind::Bad, _))) => prices.raw(Address(n.prefix().value())),
            (None, _) => 0,
        };
    }
    out
}

fn priced_solve(view: &RouterView, prices: &PriceVector, forbidden: &BTreeSet<Address>) -> Result<Option<Subproblem>> {
    let Some(tree) = &view.tree else {
        return Ok(Some(Subproblem {
            router: view.router,
            nodes: Vec::new(),
            value: 0,
            solution: FilterSolution {
                residual_traffic: Some(0),
                ..FilterSolution::default()
            },
        }));
    };
    if view.spec.fmax < 1 && view.total_traffic() > view.spec.capacity {
        return Err(Error::InfeasibleBudget(view.spec.fmax));
    }
    let lambda = node_prices(tree, prices);
    let blocked_here = if forbidden.is_empty() {
        Vec::new()
    } else {
        let mut hit = alloc::vec![false; tree.arena_len()];
        for id in tree.postorder() {
            let n = tree.node(id);
            hit[id.index()] = match n.children() {
                Some((l, r)) => hit[l.index()] || hit[r.index()],
                None => forbidden.contains(&Address(n.prefix().value())),
            };
        }
        hit
    };
    let mut overflow = false;
    let plan = flooding_dp(tree, view.spec.fmax, view.spec.capacity, 1, |id| {
        if blocked_here.get(id.index()).copied().unwrap_or(false) {
            return INF;
        }
        match tree
            .node(id)
            .good()
            .checked_mul(PRICE_SCALE)
            .and_then(|c| c.checked_add(lambda[id.index()]))
        {
            Some(c) if c <= MAX_SCALED => c,
            _ => {
                overflow = true;
                INF
            }
        }
    });
    if overflow {
        return Err(Error::WeightOverflow);
    }
    Ok(plan.map(|plan| Subproblem {
        router: view.router,
        solution: plan_solution(tree, &plan.nodes),
        nodes: plan.nodes,
        value: plan.cost,
    }))
}

/// Router `u`'s optimal filters under node cost `g_p + λ_p`, its own filter
/// budget and its own capacity.
pub fn solve_subproblem(view: &RouterView, prices: &PriceVector) -> Result<Subproblem> {
    priced_solve(view, prices, &BTreeSet::new())?.ok_or(Error::NoFeasiblePrimal)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistConfig {
    /// Subgradient step.
    pub alpha: f64,
    pub max_iter: usize,
    /// Stop after this many consecutive iterations without double blocking.
    pub stable_iters: usize,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig {
            alpha: 0.05,
            max_iter: 100,
            stable_iters: 3,
        }
    }
}

/// One master iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct DistIteration {
    /// One-based.
    pub iter: usize,
    /// `Σ_u h_u(λ) − Σ λ`, in price units.
    pub dual_raw: i128,
    pub dual: f64,
    /// Bad addresses blocked more than once by the unrepaired subproblem filters.
    pub violations: usize,
    /// Repaired solution's objective, good weight counted once per blocking router.
    pub primal_objective: Option<u64>,
    /// Repaired solution's good weight blocked anywhere, counted once.
    pub primal_cd: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct DistSolution {
    /// Best repaired filters per router.
    pub routers: BTreeMap<RouterId, FilterSolution>,
    pub objective: u64,
    pub collateral_damage: u64,
    pub best_iter: usize,
    pub trace: Vec<DistIteration>,
    /// First-iteration filters as solved, before any coordination or repair.
    pub uncoordinated: BTreeMap<RouterId, FilterSolution>,
    pub uncoordinated_objective: u64,
    pub uncoordinated_cd: u64,
    pub prices: PriceVector,
}

impl DistSolution {
    /// True if no iteration's dual exceeds the best primal objective.
    pub fn weak_duality_holds(&self) -> bool {
        let bound = self.objective as i128 * PRICE_SCALE as i128;
        self.trace.iter().all(|it| it.dual_raw <= bound)
    }
}

/// Bad addresses blocked by each router's chosen nodes, with multiplicity.
fn coverage(views: &RoutedViews, chosen: &BTreeMap<RouterId, Vec<NodeId>>) -> BTreeMap<Address, u32> {
    let mut cov = BTreeMap::new();
    for (u, nodes) in chosen {
        let tree = views.views[u].tree.as_ref();
        for &id in nodes {
            let tree = tree.expect("chosen nodes imply a tree");
            for ip in bad_leaves_under(tree, id) {
                *cov.entry(ip).or_insert(0) += 1;
            }
        }
    }
    cov
}

fn bad_leaves_under(tree: &LcpTree, id: NodeId) -> Vec<Address> {
    let mut out = Vec::new();
    let mut stack = alloc::vec![id];
    while let Some(id) = stack.pop() {
        let n = tree.node(id);
        match (n.children(), n.leaf_entry()) {
            (Some((l, r)), _) => {
                stack.push(l);
                stack.push(r);
            }
            (None, Some((ListKind::Bad, _))) => out.push(Address(n.prefix().value())),
            (None, _) => {}
        }
    }
    out
}

/// Good weight blocked at each router summed, and good weight blocked anywhere.
fn objectives(
    views: &RoutedViews,
    chosen: &BTreeMap<RouterId, FilterSolution>,
    good: &WeightedAddressSet,
) -> (u64, u64) {
    let per_occurrence = chosen.values().map(|s| s.collateral_damage).sum();
    let mut blocked = BTreeSet::new();
    for (u, s) in chosen {
        let view = &views.views[u];
        for &p in &s.filters {
            blocked.extend(view.good.iter().map(|(a, _)| a).filter(|&a| p.covers(a)));
        }
    }
    let dedup = blocked.iter().map(|&a| good.get(a).unwrap_or(0)).sum();
    (per_occurrence, dedup)
}

/// Nearest-to-victim-first repair of one iteration's subproblem solutions.
fn repair(
    views: &RoutedViews,
    prices: &PriceVector,
    subs: &BTreeMap<RouterId, Subproblem>,
) -> Result<Option<BTreeMap<RouterId, FilterSolution>>> {
    let mut claimed: BTreeSet<Address> = BTreeSet::new();
    let mut kept = BTreeMap::new();
    for &u in &views.order {
        let view = &views.views[&u];
        let sub = &subs[&u];
        let tree = view.tree.as_ref();
        let clash = sub.nodes.iter().any(|&id| {
            bad_leaves_under(tree.expect("tree"), id)
                .iter()
                .any(|a| claimed.contains(a))
        });
        let (nodes, solution) = if clash {
            let relevant: BTreeSet<Address> = view.bad.addresses().filter(|a| claimed.contains(a)).collect();
            match priced_solve(view, prices, &relevant)? {
                Some(s) => (s.nodes, s.solution),
                None => return Ok(None),
            }
        } else {
            (sub.nodes.clone(), sub.solution.clone())
        };
        for &id in &nodes {
            claimed.extend(bad_leaves_under(tree.expect("tree"), id));
        }
        kept.insert(u, solution);
    }
    Ok(Some(kept))
}

/// Projected subgradient over shadow prices with per-iteration primal repair.
pub fn solve_dist_flooding(
    topo: &Topology,
    bad: &WeightedAddressSet,
    good: &WeightedAddressSet,
    config: &DistConfig,
) -> Result<DistSolution> {
    if !(config.alpha.is_finite() && config.alpha > 0.0) {
        return Err(Error::InvalidParameter("step size must be positive"));
    }
    if config.max_iter < 1 {
        return Err(Error::InvalidParameter("at least one iteration is needed"));
    }
    let alpha = (config.alpha * PRICE_SCALE as f64 + 0.5) as u64;
    if alpha == 0 {
        return Err(Error::InvalidParameter("step size below price resolution"));
    }
    if let Some((address, weight)) = bad.iter().chain(good.iter()).find(|&(_, w)| w == 0) {
        return Err(Error::InvalidWeight {
            address,
            weight,
            reason: "traffic must be positive",
        });
    }
    let views = route_and_view(topo, bad, good)?;

    let mut prices = PriceVector::new();
    let mut trace = Vec::new();
    let mut best: Option<(u64, u64, usize, BTreeMap<RouterId, FilterSolution>)> = None;
    let mut uncoordinated = None;
    let mut calm = 0;

    for iter in 1..=config.max_iter {
        let mut subs = BTreeMap::new();
        for &u in &views.order {
            subs.insert(u, solve_subproblem(&views.views[&u], &prices)?);
        }
        let dual_raw = subs.values().map(|s| s.value as i128).sum::<i128>() - prices.total_raw() as i128;
        let chosen: BTreeMap<RouterId, Vec<NodeId>> = subs.iter().map(|(&u, s)| (u, s.nodes.clone())).collect();
        let cov = coverage(&views, &chosen);
        let violations = cov.values().filter(|&&c| c > 1).count();
        if uncoordinated.is_none() {
            let raw: BTreeMap<RouterId, FilterSolution> = subs.iter().map(|(&u, s)| (u, s.solution.clone())).collect();
            let (obj, cd) = objectives(&views, &raw, good);
            uncoordinated = Some((raw, obj, cd));
        }

        let repaired = repair(&views, &prices, &subs)?;
        let (primal_objective, primal_cd) = match &repaired {
            Some(kept) => {
                let (obj, cd) = objectives(&views, kept, good);
                (Some(obj), Some(cd))
            }
            None => (None, None),
        };
        if let (Some(kept), Some(obj), Some(cd)) = (repaired, primal_objective, primal_cd) {
            if best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, cd, iter, kept));
            }
        }
        trace.push(DistIteration {
            iter,
            dual_raw,
            dual: dual_raw as f64 / PRICE_SCALE as f64,
            violations,
            primal_objective,
            primal_cd,
        });

        calm = if violations == 0 { calm + 1 } else { 0 };
        if calm >= config.stable_iters.max(1) {
            break;
        }

        for ip in bad.addresses() {
            let c = cov.get(&ip).copied().unwrap_or(0) as i128;
            let next = prices.raw(ip) as i128 + alpha as i128 * (c - 1);
            prices.set_raw(ip, next.max(0) as u64);
        }
        if prices.total_raw() > (MAX_SCALED / 4) as u128 {
            return Err(Error::WeightOverflow);
        }
    }

    let (objective, collateral_damage, best_iter, routers) = best.ok_or(Error::NoFeasiblePrimal)?;
    let (uncoordinated, uncoordinated_objective, uncoordinated_cd) = uncoordinated.expect("one iteration ran");
    Ok(DistSolution {
        routers,
        objective,
        collateral_damage,
        best_iter,
        trace,
        uncoordinated,
        uncoordinated_objective,
        uncoordinated_cd,
        prices,
    })
}
