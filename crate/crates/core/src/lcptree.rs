//! The longest-common-prefix tree.
//!
//! Leaves are /32 prefixes of the input addresses; every internal node has
//! exactly two children and holds their longest common prefix. Nodes live in
//! an arena addressed by [`NodeId`], with parent links so that updates can walk
//! a single root path.
//!
//! Good weight reaches a node from one of three sources:
//!
//! * **leaves**: good addresses are leaves themselves (capacity problems,
//!   where the tree spans both lists);
//! * **explicit**: a whitelist whose addresses are not leaves; each entry is
//!   attributed to the deepest node covering it;
//! * **implicit**: every non-blacklisted address counts 1, so a node's good
//!   weight is its size minus its bad address count. Per-address overrides are
//!   attributed like explicit entries, as `weight - 1`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Address, ListKind, Prefix, WeightedAddressSet, WhitelistMode};

/// Cap on the summed weights held by one tree, so every aggregate and DP value
/// stays exact in 64-bit arithmetic.
pub const MAX_TOTAL_WEIGHT: u64 = 1 << 60;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Where good weight comes from; see the module docs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GoodSource {
    Leaves,
    Explicit,
    Implicit,
}

#[derive(Clone, Debug)]
pub struct LcpNode {
    prefix: Prefix,
    children: Option<[NodeId; 2]>,
    parent: Option<NodeId>,
    leaf: Option<(ListKind, u64)>,
    /// Off-leaf good weight attributed to this node and to no descendant.
    own_extra: i64,
    extra: i64,
    leaf_good: u64,
    bad: u64,
    bad_count: u64,
    leaf_count: u32,
    good: u64,
}

impl LcpNode {
    fn new(prefix: Prefix, parent: Option<NodeId>) -> Self {
        LcpNode {
            prefix,
            children: None,
            parent,
            leaf: None,
            own_extra: 0,
            extra: 0,
            leaf_good: 0,
            bad: 0,
            bad_count: 0,
            leaf_count: 0,
            good: 0,
        }
    }

    #[inline]
    pub fn prefix(&self) -> Prefix {
        self.prefix
    }

    /// Good weight covered by this prefix (collateral damage of filtering it).
    #[inline]
    pub fn good(&self) -> u64 {
        self.good
    }

    /// Bad weight covered by this prefix (benefit of filtering it).
    #[inline]
    pub fn bad(&self) -> u64 {
        self.bad
    }

    /// Total traffic `good + bad`.
    #[inline]
    pub fn traffic(&self) -> u64 {
        self.good + self.bad
    }

    #[inline]
    pub fn leaf_count(&self) -> u32 {
        self.leaf_count
    }

    /// Number of blacklisted leaves below.
    #[inline]
    pub fn bad_count(&self) -> u64 {
        self.bad_count
    }

    #[inline]
    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        self.children.map(|[l, r]| (l, r))
    }

    #[inline]
    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// List membership and weight of a leaf's address.
    #[inline]
    pub fn leaf_entry(&self) -> Option<(ListKind, u64)> {
        self.leaf
    }
}

/// Where a new leaf went.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Inserted {
    pub leaf: NodeId,
    /// The new internal node joining the leaf to the tree; `None` for the first leaf.
    pub internal: Option<NodeId>,
}

#[derive(Clone, Debug)]
pub struct LcpTree {
    nodes: Vec<LcpNode>,
    free: Vec<NodeId>,
    root: Option<NodeId>,
    leaf_index: BTreeMap<Address, NodeId>,
    source: GoodSource,
    extras: BTreeMap<Address, i64>,
    weight_total: u64,
}

impl LcpTree {
    fn empty(source: GoodSource) -> Self {
        LcpTree {
            nodes: Vec::new(),
            free: Vec::new(),
            root: None,
            leaf_index: BTreeMap::new(),
            source,
            extras: BTreeMap::new(),
            weight_total: 0,
        }
    }

    /// Tree over the blacklist, with good weight from `white`.
    pub fn build(bad: &WeightedAddressSet, white: &WhitelistMode) -> Result<Self> {
        if bad.is_empty() {
            return Err(Error::EmptyInstance);
        }
        white.validate(bad)?;
        let source = match white {
            WhitelistMode::Explicit(_) => GoodSource::Explicit,
            WhitelistMode::ImplicitUnit => GoodSource::Implicit,
        };
        let mut tree = LcpTree::empty(source);
        for (ip, w) in bad.iter() {
            tree.add_weight(w)?;
            tree.insert_structural(ip, ListKind::Bad, w)?;
        }
        if let WhitelistMode::Explicit(white) = white {
            for (ip, w) in white.iter().filter(|&(_, w)| w > 0) {
                tree.add_weight(w)?;
                tree.extras.insert(ip, w as i64);
            }
            tree.attribute_extras();
        }
        tree.refresh_all();
        Ok(tree)
    }

    /// Tree over both lists, every address a leaf.
    pub fn build_traffic(bad: &WeightedAddressSet, good: &WeightedAddressSet) -> Result<Self> {
        if bad.is_empty() && good.is_empty() {
            return Err(Error::EmptyInstance);
        }
        bad.check_disjoint(good)?;
        let mut tree = LcpTree::empty(GoodSource::Leaves);
        for (ip, w) in bad.iter() {
            tree.add_weight(w)?;
            tree.insert_structural(ip, ListKind::Bad, w)?;
        }
        for (ip, w) in good.iter() {
            tree.add_weight(w)?;
            tree.insert_structural(ip, ListKind::Good, w)?;
        }
        tree.refresh_all();
        Ok(tree)
    }

    /// Switches to the implicit unit whitelist and recomputes every aggregate:
    /// good weight of `p/l` becomes `2^(32-l)` minus the bad addresses inside.
    pub fn annotate_implicit_good(&mut self) -> Result<()> {
        if self.nodes_iter().any(|n| matches!(n.leaf, Some((ListKind::Good, _)))) {
            return Err(Error::Unsupported("implicit whitelist over a tree with good leaves"));
        }
        self.source = GoodSource::Implicit;
        self.extras.clear();
        for id in self.postorder() {
            self.nodes[id.index()].own_extra = 0;
        }
        self.refresh_all();
        Ok(())
    }

    fn add_weight(&mut self, w: u64) -> Result<()> {
        self.weight_total = self
            .weight_total
            .checked_add(w)
            .filter(|&t| t <= MAX_TOTAL_WEIGHT)
            .ok_or(Error::WeightOverflow)?;
        Ok(())
    }

    fn alloc(&mut self, node: LcpNode) -> NodeId {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id.index()] = node;
                id
            }
            None => {
                let id = NodeId(self.nodes.len() as u32);
                self.nodes.push(node);
                id
            }
        }
    }

    fn nodes_iter(&self) -> impl Iterator<Item = &LcpNode> {
        self.preorder().into_iter().map(move |id| &self.nodes[id.index()])
    }

    /// Patricia insertion without touching aggregates.
    fn insert_structural(&mut self, ip: Address, kind: ListKind, w: u64) -> Result<Inserted> {
        if self.leaf_index.contains_key(&ip) {
            return Err(Error::DuplicateAddress(ip));
        }
        let mut leaf_node = LcpNode::new(Prefix::host(ip), None);
        leaf_node.leaf = Some((kind, w));
        let leaf = self.alloc(leaf_node);
        self.leaf_index.insert(ip, leaf);

        let Some(mut cur) = self.root else {
            self.root = Some(leaf);
            return Ok(Inserted { leaf, internal: None });
        };
        loop {
            let node = &self.nodes[cur.index()];
            match node.children {
                Some(children) if node.prefix.covers(ip) => {
                    cur = children[node.prefix.branch_bit(ip.0) as usize];
                }
                _ => break,
            }
        }

        let sibling = cur;
        let parent = self.nodes[sibling.index()].parent;
        let joined = self.nodes[sibling.index()].prefix.common(Prefix::host(ip));
        let internal = self.alloc(LcpNode::new(joined, parent));
        let children = if ip.0 < self.nodes[sibling.index()].prefix.value() {
            [leaf, sibling]
        } else {
            [sibling, leaf]
        };
        self.nodes[internal.index()].children = Some(children);
        self.nodes[leaf.index()].parent = Some(internal);
        self.nodes[sibling.index()].parent = Some(internal);
        self.replace_child(parent, sibling, internal);
        Ok(Inserted {
            leaf,
            internal: Some(internal),
        })
    }

    fn replace_child(&mut self, parent: Option<NodeId>, old: NodeId, new: NodeId) {
        match parent {
            None => self.root = Some(new),
            Some(p) => {
                let slots = self.nodes[p.index()].children.as_mut().expect("parent is internal");
                let slot = slots.iter_mut().find(|c| **c == old).expect("child of its parent");
                *slot = new;
            }
        }
    }

    /// Attributes every extra entry to its deepest covering node.
    fn attribute_extras(&mut self) {
        let entries: Vec<(Address, i64)> = self.extras.iter().map(|(&a, &w)| (a, w)).collect();
        for (ip, w) in entries {
            if let Some(d) = self.deepest_covering(ip) {
                self.nodes[d.index()].own_extra += w;
            }
        }
    }

    /// Deepest node whose prefix covers `ip`.
    pub fn deepest_covering(&self, ip: Address) -> Option<NodeId> {
        let mut cur = self.root?;
        if !self.nodes[cur.index()].prefix.covers(ip) {
            return None;
        }
        while let Some(children) = self.nodes[cur.index()].children {
            let next = children[self.nodes[cur.index()].prefix.branch_bit(ip.0) as usize];
            if !self.nodes[next.index()].prefix.covers(ip) {
                break;
            }
            cur = next;
        }
        Some(cur)
    }

    fn extras_in(&self, p: Prefix) -> i64 {
        self.extras
            .range(Address(p.value())..=Address(p.last()))
            .map(|(_, &w)| w)
            .sum()
    }

    /// Recomputes one node's aggregates from its children (or leaf entry).
    fn refresh(&mut self, id: NodeId) {
        let node = &self.nodes[id.index()];
        let (leaf_good, bad, bad_count, leaf_count, extra) = match (node.children, node.leaf) {
            (Some([l, r]), _) => {
                let (l, r) = (&self.nodes[l.index()], &self.nodes[r.index()]);
                (
                    l.leaf_good + r.leaf_good,
                    l.bad + r.bad,
                    l.bad_count + r.bad_count,
                    l.leaf_count + r.leaf_count,
                    l.extra + r.extra + node.own_extra,
                )
            }
            (None, Some((ListKind::Bad, w))) => (0, w, 1, 1, node.own_extra),
            (None, Some((ListKind::Good, w))) => (w, 0, 0, 1, node.own_extra),
            (None, None) => unreachable!("leaf without an entry"),
        };
        let good = match self.source {
            GoodSource::Implicit => (node.prefix.size() - bad_count) as i128 + extra as i128,
            GoodSource::Leaves | GoodSource::Explicit => leaf_good as i128 + extra as i128,
        };
        debug_assert!(good >= 0, "negative good weight at {}", node.prefix);
        let node = &mut self.nodes[id.index()];
        node.leaf_good = leaf_good;
        node.bad = bad;
        node.bad_count = bad_count;
        node.leaf_count = leaf_count;
        node.extra = extra;
        node.good = good as u64;
    }

    fn refresh_all(&mut self) {
        for id in self.postorder() {
            self.refresh(id);
        }
    }

    /// Refreshes `start` and all of its ancestors, returning how many nodes were touched.
    fn refresh_path(&mut self, start: Option<NodeId>) -> usize {
        let mut touched = 0;
        let mut cur = start;
        while let Some(id) = cur {
            self.refresh(id);
            touched += 1;
            cur = self.nodes[id.index()].parent;
        }
        touched
    }

    /// Adds one address as a new leaf.
    ///
    /// Exactly one internal node is created, holding the common prefix of `ip`
    /// and the subtree it branches off from. Aggregates change only along the
    /// new leaf's root path.
    pub fn insert_address(&mut self, ip: Address, weight: u64, kind: ListKind) -> Result<Inserted> {
        if kind == ListKind::Good && self.source != GoodSource::Leaves {
            return Err(Error::Unsupported(
                "good addresses are not leaves here; adjust their weight instead",
            ));
        }
        if self.leaf_index.contains_key(&ip) {
            return Err(Error::DuplicateAddress(ip));
        }
        if self.extras.contains_key(&ip) {
            return Err(Error::ConflictingLists(ip));
        }
        self.add_weight(weight)?;
        let inserted = self.insert_structural(ip, kind, weight)?;
        if let Some(q) = inserted.internal {
            let (l, r) = self.nodes[q.index()].children().expect("internal");
            let sibling = if l == inserted.leaf { r } else { l };
            let own = self.extras_in(self.nodes[q.index()].prefix) - self.nodes[sibling.index()].extra;
            self.nodes[q.index()].own_extra = own;
            if let Some(p) = self.nodes[q.index()].parent {
                self.nodes[p.index()].own_extra -= own;
            }
        }
        self.refresh(inserted.leaf);
        self.refresh_path(inserted.internal);
        Ok(inserted)
    }

    /// Removes a leaf and its parent, splicing the sibling into the grandparent.
    ///
    /// Returns the lowest node whose aggregates changed (the grandparent), if any.
    pub fn delete_address(&mut self, ip: Address) -> Result<Option<NodeId>> {
        let leaf = self.leaf_index.remove(&ip).ok_or(Error::NotFound(ip))?;
        let (_, w) = self.nodes[leaf.index()].leaf.expect("leaf entry");
        self.weight_total -= w;
        let Some(parent) = self.nodes[leaf.index()].parent else {
            self.root = None;
            self.free.push(leaf);
            return Ok(None);
        };
        let (l, r) = self.nodes[parent.index()].children().expect("internal");
        let sibling = if l == leaf { r } else { l };
        let grand = self.nodes[parent.index()].parent;
        self.nodes[sibling.index()].parent = grand;
        self.replace_child(grand, parent, sibling);
        if let Some(g) = grand {
            self.nodes[g.index()].own_extra += self.nodes[parent.index()].own_extra;
        }
        self.free.push(leaf);
        self.free.push(parent);
        self.refresh_path(grand);
        Ok(grand)
    }

    /// Changes the weight of one address; the tree shape never changes.
    ///
    /// Bad addresses (and good leaves) must already be leaves. A good address
    /// in explicit or implicit mode may be new: its weight is attributed to
    /// the deepest covering node. Returns the lowest node whose aggregates
    /// changed, if any.
    pub fn adjust_weight(&mut self, ip: Address, weight: u64, kind: ListKind) -> Result<Option<NodeId>> {
        let leaf_mode = kind == ListKind::Bad || self.source == GoodSource::Leaves;
        if leaf_mode {
            let leaf = *self.leaf_index.get(&ip).ok_or(Error::NotFound(ip))?;
            let entry = self.nodes[leaf.index()].leaf.as_mut().expect("leaf entry");
            if entry.0 != kind {
                return Err(Error::ConflictingLists(ip));
            }
            let old = entry.1;
            if old == weight {
                return Ok(None);
            }
            self.weight_total -= old;
            if let Err(e) = self.add_weight(weight) {
                self.weight_total += old;
                return Err(e);
            }
            self.nodes[leaf.index()].leaf.as_mut().expect("leaf entry").1 = weight;
            self.refresh_path(Some(leaf));
            return Ok(Some(leaf));
        }

        if self.leaf_index.contains_key(&ip) {
            return Err(Error::ConflictingLists(ip));
        }
        let new = match self.source {
            GoodSource::Implicit => weight as i64 - 1,
            _ => weight as i64,
        };
        let old = self.extras.get(&ip).copied().unwrap_or(0);
        if new == old {
            return Ok(None);
        }
        self.weight_total -= old.max(0) as u64;
        if let Err(e) = self.add_weight(new.max(0) as u64) {
            self.weight_total += old.max(0) as u64;
            return Err(e);
        }
        if new == 0 {
            self.extras.remove(&ip);
        } else {
            self.extras.insert(ip, new);
        }
        let Some(d) = self.deepest_covering(ip) else {
            return Ok(None);
        };
        self.nodes[d.index()].own_extra += new - old;
        self.refresh_path(Some(d));
        Ok(Some(d))
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &LcpNode {
        &self.nodes[id.index()]
    }

    pub fn good_source(&self) -> GoodSource {
        self.source
    }

    /// Leaf holding `ip`, if present.
    pub fn leaf(&self, ip: Address) -> Option<NodeId> {
        self.leaf_index.get(&ip).copied()
    }

    /// Leaves in address order.
    pub fn leaves(&self) -> impl Iterator<Item = (Address, NodeId)> + '_ {
        self.leaf_index.iter().map(|(&a, &id)| (a, id))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn node_count(&self) -> usize {
        match self.leaf_index.len() {
            0 => 0,
            n => 2 * n - 1,
        }
    }

    /// Size of the node arena; every live [`NodeId::index`] is below it.
    pub fn arena_len(&self) -> usize {
        self.nodes.len()
    }

    /// Edges from `id` up to the root.
    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).count()
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        core::iter::successors(self.nodes[id.index()].parent, move |p| self.nodes[p.index()].parent)
    }

    pub fn max_depth(&self) -> usize {
        self.leaf_index.values().map(|&id| self.depth(id)).max().unwrap_or(0)
    }

    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack: Vec<NodeId> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Some([l, r]) = self.nodes[id.index()].children {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Children before parents.
    pub fn postorder(&self) -> Vec<NodeId> {
        // reversed (node, right, left) preorder
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack: Vec<NodeId> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Some([l, r]) = self.nodes[id.index()].children {
                stack.push(l);
                stack.push(r);
            }
        }
        out.reverse();
        out
    }

    /// Preorder lines `prefix,g,b,leaf_count`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for id in self.preorder() {
            let n = &self.nodes[id.index()];
            let _ = writeln!(s, "{},{},{},{}", n.prefix, n.good, n.bad, n.leaf_count);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ip(s: &str) -> Address {
        s.parse().unwrap()
    }

    fn pfx(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    pub(crate) fn sample_blacklist() -> WeightedAddressSet {
        let last = [1u8, 3, 4, 5, 7, 8, 10, 11, 12];
        WeightedAddressSet::unit(ListKind::Bad, last.iter().map(|&d| Address::new(10, 0, 0, d))).unwrap()
    }

    fn find(tree: &LcpTree, p: Prefix) -> Option<NodeId> {
        tree.preorder().into_iter().find(|&id| tree.node(id).prefix() == p)
    }

    /// Checks structure and recomputes every aggregate from scratch.
    fn check_invariants(tree: &LcpTree, bad: &WeightedAddressSet, white: &WhitelistMode) {
        assert_eq!(tree.preorder().len(), tree.node_count());
        assert!(tree.max_depth() <= 32);
        for id in tree.preorder() {
            let n = tree.node(id);
            match n.children() {
                Some((l, r)) => {
                    let (lp, rp) = (tree.node(l).prefix(), tree.node(r).prefix());
                    assert_eq!(lp.common(rp), n.prefix());
                    assert!(lp.value() < rp.value());
                    assert!(lp.len() > n.prefix().len() && rp.len() > n.prefix().len());
                    assert_eq!(tree.node(l).parent(), Some(id));
                    assert!(n.good() >= tree.node(l).good() + tree.node(r).good());
                }
                None => assert_eq!(n.prefix().len(), 32),
            }
            assert_eq!(n.good(), white.good_weight_in(n.prefix(), bad), "g at {}", n.prefix());
            assert_eq!(n.bad(), bad.weight_in(n.prefix()));
            assert_eq!(n.leaf_count() as u64, bad.count_in(n.prefix()));
        }
    }

    #[test]
    fn sample_tree_shape() {
        let bad = sample_blacklist();
        let tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        assert_eq!(tree.leaf_count(), 9);
        assert_eq!(tree.preorder().len(), 17);
        let root = tree.root().unwrap();
        assert_eq!(tree.node(root).prefix(), pfx("10.0.0.0/28"));
        let n = find(&tree, pfx("10.0.0.4/30")).unwrap();
        assert_eq!(tree.node(n).good(), 1);
        check_invariants(&tree, &bad, &WhitelistMode::ImplicitUnit);
    }

    #[test]
    fn single_address() {
        let bad = WeightedAddressSet::unit(ListKind::Bad, [ip("192.0.2.1")]).unwrap();
        let tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        let root = tree.root().unwrap();
        assert!(tree.node(root).is_leaf());
        assert_eq!(tree.node(root).prefix(), pfx("192.0.2.1/32"));
        assert_eq!(tree.node(root).good(), 0);
    }

    #[test]
    fn empty_rejected() {
        let bad = WeightedAddressSet::new(ListKind::Bad);
        assert_eq!(
            LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap_err(),
            Error::EmptyInstance
        );
    }

    #[test]
    fn implicit_root_complement() {
        let bad = WeightedAddressSet::unit(ListKind::Bad, [ip("1.0.0.1"), ip("200.0.0.1"), ip("9.9.9.9")]).unwrap();
        let tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        let root = tree.node(tree.root().unwrap());
        assert_eq!(root.prefix(), Prefix::ROOT);
        assert_eq!(root.good(), (1u64 << 32) - 3);
    }

    #[test]
    fn sample_insert_creates_one_node() {
        let last = [3u8, 10, 15, 17, 22, 31, 32, 33, 57, 58];
        let bad = WeightedAddressSet::unit(ListKind::Bad, last.iter().map(|&d| Address::new(10, 0, 0, d))).unwrap();
        let mut tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        let before: Vec<Prefix> = tree.preorder().iter().map(|&id| tree.node(id).prefix()).collect();
        let ins = tree.insert_address(ip("10.0.0.37"), 1, ListKind::Bad).unwrap();
        let q = ins.internal.unwrap();
        assert_eq!(tree.node(q).prefix(), pfx("10.0.0.32/29"));
        let after: Vec<Prefix> = tree.preorder().iter().map(|&id| tree.node(id).prefix()).collect();
        assert_eq!(after.len(), before.len() + 2);
        let added: Vec<_> = after.iter().filter(|p| !before.contains(p)).collect();
        assert_eq!(added, vec![&pfx("10.0.0.32/29"), &pfx("10.0.0.37/32")]);
    }

    #[test]
    fn insert_into_single_leaf() {
        let bad = WeightedAddressSet::unit(ListKind::Bad, [ip("10.0.0.1")]).unwrap();
        let mut tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        tree.insert_address(ip("10.0.0.2"), 1, ListKind::Bad).unwrap();
        let root = tree.node(tree.root().unwrap());
        assert_eq!(root.prefix(), longest_common(ip("10.0.0.1"), ip("10.0.0.2")));
        assert_eq!(root.good(), 2);
    }

    fn longest_common(a: Address, b: Address) -> Prefix {
        crate::model::longest_common_prefix(a, b)
    }

    #[test]
    fn duplicate_and_missing() {
        let bad = sample_blacklist();
        let mut tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        assert_eq!(
            tree.insert_address(ip("10.0.0.5"), 1, ListKind::Bad),
            Err(Error::DuplicateAddress(ip("10.0.0.5")))
        );
        assert_eq!(
            tree.delete_address(ip("10.0.0.6")),
            Err(Error::NotFound(ip("10.0.0.6")))
        );
        assert_eq!(
            tree.adjust_weight(ip("10.0.0.6"), 3, ListKind::Bad),
            Err(Error::NotFound(ip("10.0.0.6")))
        );
    }

    #[test]
    fn delete_from_two_leaves() {
        let bad = WeightedAddressSet::unit(ListKind::Bad, [ip("10.0.0.1"), ip("10.0.0.9")]).unwrap();
        let mut tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        tree.delete_address(ip("10.0.0.1")).unwrap();
        assert_eq!(tree.node_count(), 1);
        let root = tree.node(tree.root().unwrap());
        assert!(root.is_leaf());
        assert_eq!(root.prefix(), pfx("10.0.0.9/32"));
        assert_eq!(root.parent(), None);
    }

    #[test]
    fn delete_then_reinsert_restores_dump() {
        let bad = sample_blacklist();
        let mut tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        let dump = tree.dump();
        tree.delete_address(ip("10.0.0.7")).unwrap();
        assert_eq!(tree.node_count(), 15);
        tree.insert_address(ip("10.0.0.7"), 1, ListKind::Bad).unwrap();
        assert_eq!(tree.dump(), dump);
    }

    #[test]
    fn adjust_bad_weight_touches_root_path() {
        let bad = sample_blacklist();
        let mut tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
        let leaf = tree.leaf(ip("10.0.0.5")).unwrap();
        let depth = tree.depth(leaf);
        let before: Vec<u64> = tree.preorder().iter().map(|&id| tree.node(id).bad()).collect();
        tree.adjust_weight(ip("10.0.0.5"), 4, ListKind::Bad).unwrap();
        let after: Vec<u64> = tree.preorder().iter().map(|&id| tree.node(id).bad()).collect();
        let changed: Vec<i64> = before
            .iter()
            .zip(&after)
            .filter(|(a, b)| a != b)
            .map(|(a, b)| *b as i64 - *a as i64)
            .collect();
        assert_eq!(changed.len(), depth + 1);
        assert!(changed.iter().all(|&d| d == 3));
        // identical weight is a no-op
        let dump = tree.dump();
        assert_eq!(tree.adjust_weight(ip("10.0.0.5"), 4, ListKind::Bad), Ok(None));
        assert_eq!(tree.dump(), dump);
    }

    #[test]
    fn zeroing_a_good_weight() {
        let bad = sample_blacklist();
        let white = WhitelistMode::Explicit(
            WeightedAddressSet::from_entries(ListKind::Good, [(ip("10.0.0.6"), 5), (ip("10.0.0.2"), 2)]).unwrap(),
        );
        let mut tree = LcpTree::build(&bad, &white).unwrap();
        let covering: Vec<(NodeId, u64)> = tree
            .preorder()
            .into_iter()
            .filter(|&id| tree.node(id).prefix().covers(ip("10.0.0.6")))
            .map(|id| (id, tree.node(id).good()))
            .collect();
        tree.adjust_weight(ip("10.0.0.6"), 0, ListKind::Good).unwrap();
        for (id, g) in covering {
            assert_eq!(tree.node(id).good(), g - 5);
        }
    }

    #[test]
    fn good_leaves_tree() {
        let bad =
            WeightedAddressSet::from_entries(ListKind::Bad, [(ip("10.0.0.1"), 10), (ip("10.0.0.2"), 10)]).unwrap();
        let good = WeightedAddressSet::from_entries(ListKind::Good, [(ip("10.0.0.3"), 7)]).unwrap();
        let tree = LcpTree::build_traffic(&bad, &good).unwrap();
        let root = tree.node(tree.root().unwrap());
        assert_eq!((root.good(), root.bad(), root.traffic()), (7, 20, 27));
        assert_eq!(tree.leaf_count(), 3);
    }

    #[derive(Clone, Debug)]
    enum Op {
        Add(u32, u64),
        Del(usize),
        AdjBad(usize, u64),
        AdjGood(u32, u64),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u32..256, 0u64..5).prop_map(|(a, w)| Op::Add(a, w)),
            (0usize..64).prop_map(Op::Del),
            (0usize..64, 0u64..5).prop_map(|(i, w)| Op::AdjBad(i, w)),
            (0u32..256, 0u64..4).prop_map(|(a, w)| Op::AdjGood(a, w)),
        ]
    }

    fn run_ops(implicit: bool, init: Vec<(u32, u64)>, goods: Vec<(u32, u64)>, ops: Vec<Op>) {
        let base = 0x0a00_0000u32;
        let mut bad = WeightedAddressSet::new(ListKind::Bad);
        for (a, w) in init {
            let _ = bad.insert(Address(base + a), w);
        }
        let mut good = WeightedAddressSet::new(ListKind::Good);
        if !implicit {
            for (a, w) in goods {
                if !bad.contains(Address(base + a)) {
                    good.set(Address(base + a), w);
                }
            }
        }
        let white_of = |good: &WeightedAddressSet| {
            if implicit {
                WhitelistMode::ImplicitUnit
            } else {
                WhitelistMode::Explicit(good.clone())
            }
        };
        let mut tree = LcpTree::build(&bad, &white_of(&good)).unwrap();
        let mut overrides = WeightedAddressSet::new(ListKind::Good);
        for op in ops {
            match op {
                Op::Add(a, w) => {
                    let ip = Address(base + a);
                    let r = tree.insert_address(ip, w, ListKind::Bad);
                    if bad.contains(ip) {
                        assert_eq!(r, Err(Error::DuplicateAddress(ip)));
                    } else if good.contains(ip) || overrides.contains(ip) {
                        assert_eq!(r, Err(Error::ConflictingLists(ip)));
                    } else {
                        r.unwrap();
                        bad.insert(ip, w).unwrap();
                    }
                }
                Op::Del(i) => {
                    if bad.len() <= 1 {
                        continue;
                    }
                    let ip = bad.addresses().nth(i % bad.len()).unwrap();
                    tree.delete_address(ip).unwrap();
                    bad.remove(ip);
                }
                Op::AdjBad(i, w) => {
                    let ip = bad.addresses().nth(i % bad.len()).unwrap();
                    tree.adjust_weight(ip, w, ListKind::Bad).unwrap();
                    bad.set(ip, w);
                }
                Op::AdjGood(a, w) => {
                    let ip = Address(base + a);
                    let r = tree.adjust_weight(ip, w, ListKind::Good);
                    if bad.contains(ip) {
                        assert_eq!(r, Err(Error::ConflictingLists(ip)));
                        continue;
                    }
                    r.unwrap();
                    if implicit {
                        if w == 1 {
                            overrides.remove(ip);
                        } else {
                            overrides.set(ip, w);
                        }
                    } else if w == 0 {
                        good.remove(ip);
                    } else {
                        good.set(ip, w);
                    }
                }
            }
            if implicit {
                for id in tree.preorder() {
                    let n = tree.node(id);
                    let p = n.prefix();
                    let adj: i64 = overrides
                        .iter()
                        .filter(|(a, _)| p.covers(*a))
                        .map(|(_, w)| w as i64 - 1)
                        .sum();
                    assert_eq!(n.good() as i64, (p.size() - bad.count_in(p)) as i64 + adj);
                    assert_eq!(n.bad(), bad.weight_in(p));
                }
            } else {
                check_invariants(&tree, &bad, &white_of(&good));
                let rebuilt = LcpTree::build(&bad, &white_of(&good)).unwrap();
                assert_eq!(tree.dump(), rebuilt.dump());
            }
        }
        if implicit && overrides.is_empty() {
            let rebuilt = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
            assert_eq!(tree.dump(), rebuilt.dump());
        }
    }

    proptest! {
        #[test]
        fn updates_match_rebuild_explicit(
            init in proptest::collection::vec((0u32..256, 0u64..5), 1..20),
            goods in proptest::collection::vec((0u32..256, 1u64..4), 0..20),
            ops in proptest::collection::vec(op(), 0..40),
        ) {
            run_ops(false, init, goods, ops);
        }

        #[test]
        fn updates_match_rebuild_implicit(
            init in proptest::collection::vec((0u32..256, 0u64..5), 1..20),
            ops in proptest::collection::vec(op(), 0..40),
        ) {
            run_ops(true, init, vec![], ops);
        }

        #[test]
        fn random_trees_are_well_formed(addrs in proptest::collection::btree_set(any::<u32>(), 1..200)) {
            let bad = WeightedAddressSet::unit(ListKind::Bad, addrs.iter().map(|&a| Address(a))).unwrap();
            let tree = LcpTree::build(&bad, &WhitelistMode::ImplicitUnit).unwrap();
            prop_assert_eq!(tree.node_count(), 2 * addrs.len() - 1);
            prop_assert!(tree.max_depth() <= 32);
            let root = tree.node(tree.root().unwrap());
            let expected_root = addrs.iter().skip(1).fold(Prefix::host(Address(*addrs.iter().next().unwrap())), |p, &a| p.common(Prefix::host(Address(a))));
            prop_assert_eq!(root.prefix(), expected_root);
        }
    }
}
