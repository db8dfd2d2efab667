//! Addresses, prefixes, weighted address lists and filter solutions.
//!
//! Weights are non-negative magnitudes. Whether a weight is a benefit (bad
//! address) or a damage (good address) is carried by the list it belongs to.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, ParsePrefixError, Result};

/// An IPv4 address, ordered numerically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Address(pub u32);

impl Address {
    pub const fn new(a: u8, b: u8, c: u8, d: u8) -> Self {
        Address(u32::from_be_bytes([a, b, c, d]))
    }

    #[inline]
    pub const fn value(self) -> u32 {
        self.0
    }
}

impl From<u32> for Address {
    fn from(v: u32) -> Self {
        Address(v)
    }
}

impl From<[u8; 4]> for Address {
    fn from(o: [u8; 4]) -> Self {
        Address(u32::from_be_bytes(o))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0.to_be_bytes();
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl FromStr for Address {
    type Err = ParsePrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<core::net::Ipv4Addr>()
            .map(|ip| Address(u32::from(ip)))
            .map_err(|_| ParsePrefixError::BadAddress)
    }
}

#[inline]
const fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

/// A canonical CIDR prefix `value/len`: every bit below the prefix length is zero.
///
/// Ordering is by network address, then by length, so a prefix sorts before
/// every prefix it contains.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Prefix {
    value: u32,
    len: u8,
}

impl Prefix {
    /// The prefix covering the whole address space.
    pub const ROOT: Prefix = Prefix { value: 0, len: 0 };

    /// Builds a prefix, rejecting lengths above 32 and host bits below the length.
    pub fn new(value: u32, len: u8) -> Result<Self, ParsePrefixError> {
        if len > 32 {
            return Err(ParsePrefixError::BadLength);
        }
        if value & !mask(len) != 0 {
            return Err(ParsePrefixError::NonCanonical);
        }
        Ok(Prefix { value, len })
    }

    /// Builds a prefix by clearing the host bits of `value`.
    ///
    /// # Panics
    /// If `len > 32`.
    pub fn truncating(value: u32, len: u8) -> Self {
        assert!(len <= 32, "prefix length {len} out of range");
        Prefix {
            value: value & mask(len),
            len,
        }
    }

    /// The /32 prefix holding exactly `ip`.
    pub const fn host(ip: Address) -> Self {
        Prefix { value: ip.0, len: 32 }
    }

    /// Clears host bits; a no-op on an already canonical prefix.
    pub fn canonical(self) -> Self {
        Prefix::truncating(self.value, self.len)
    }

    #[inline]
    pub const fn value(self) -> u32 {
        self.value
    }

    #[inline]
    pub const fn network(self) -> Address {
        Address(self.value)
    }

    #[inline]
    #[allow(clippy::len_without_is_empty)]
    pub const fn len(self) -> u8 {
        self.len
    }

    /// Last address inside the prefix.
    #[inline]
    pub const fn last(self) -> u32 {
        self.value | !mask(self.len)
    }

    /// Number of addresses covered, `2^(32 - len)`.
    #[inline]
    pub const fn size(self) -> u64 {
        1u64 << (32 - self.len as u32)
    }

    #[inline]
    pub const fn covers(self, ip: Address) -> bool {
        ip.0 & mask(self.len) == self.value
    }

    /// True if `other` lies entirely inside `self` (including equality).
    #[inline]
    pub const fn contains(self, other: Prefix) -> bool {
        other.len >= self.len && other.value & mask(self.len) == self.value
    }

    /// True if the two address ranges intersect, i.e. one contains the other.
    #[inline]
    pub const fn overlaps(self, other: Prefix) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// The bit of `ip` right after this prefix: `false` selects the lower half.
    ///
    /// Only meaningful for `len < 32`.
    #[inline]
    pub(crate) const fn branch_bit(self, ip: u32) -> bool {
        (ip >> (31 - self.len as u32)) & 1 == 1
    }

    /// Longest prefix containing both `self` and `other`.
    pub fn common(self, other: Prefix) -> Prefix {
        let diff = self.value ^ other.value;
        let shared = if diff == 0 { 32 } else { diff.leading_zeros() as u8 };
        Prefix::truncating(self.value, shared.min(self.len).min(other.len))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Address(self.value), self.len)
    }
}

impl FromStr for Prefix {
    type Err = ParsePrefixError;

    /// Parses `a.b.c.d/len`; a bare address is read as a /32.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('/') {
            Some((addr, len)) => {
                let addr: Address = addr.parse()?;
                let len: u8 = len.trim().parse().map_err(|_| ParsePrefixError::BadLength)?;
                Prefix::new(addr.0, len)
            }
            None => Ok(Prefix::host(s.parse()?)),
        }
    }
}

/// Longest prefix covering both addresses; a /32 when they are equal.
pub fn longest_common_prefix(a: Address, b: Address) -> Prefix {
    Prefix::host(a).common(Prefix::host(b))
}

/// Which side of the filtering trade-off a list sits on.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ListKind {
    /// Blacklist: weight is the benefit of blocking the address.
    Bad,
    /// Whitelist: weight is the damage of blocking the address.
    Good,
}

impl fmt::Display for ListKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ListKind::Bad => "bad",
            ListKind::Good => "good",
        })
    }
}

/// A blacklist or whitelist: unique addresses with non-negative weights.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightedAddressSet {
    kind: ListKind,
    entries: BTreeMap<Address, u64>,
}

impl WeightedAddressSet {
    pub fn new(kind: ListKind) -> Self {
        WeightedAddressSet {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Collects `(address, weight)` pairs, failing on the first repeated address.
    pub fn from_entries<I>(kind: ListKind, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Address, u64)>,
    {
        let mut set = WeightedAddressSet::new(kind);
        for (ip, w) in entries {
            set.insert(ip, w)?;
        }
        Ok(set)
    }

    /// Every address with weight 1.
    pub fn unit<I>(kind: ListKind, addresses: I) -> Result<Self>
    where
        I: IntoIterator<Item = Address>,
    {
        Self::from_entries(kind, addresses.into_iter().map(|ip| (ip, 1)))
    }

    pub fn insert(&mut self, ip: Address, weight: u64) -> Result<()> {
        if self.entries.insert(ip, weight).is_some() {
            return Err(Error::DuplicateAddress(ip));
        }
        Ok(())
    }

    /// Sets a weight, returning the previous one.
    pub fn set(&mut self, ip: Address, weight: u64) -> Option<u64> {
        self.entries.insert(ip, weight)
    }

    pub fn remove(&mut self, ip: Address) -> Option<u64> {
        self.entries.remove(&ip)
    }

    pub fn kind(&self) -> ListKind {
        self.kind
    }

    pub fn get(&self, ip: Address) -> Option<u64> {
        self.entries.get(&ip).copied()
    }

    pub fn contains(&self, ip: Address) -> bool {
        self.entries.contains_key(&ip)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending address order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (Address, u64)> + '_ {
        self.entries.iter().map(|(&ip, &w)| (ip, w))
    }

    pub fn addresses(&self) -> impl Iterator<Item = Address> + '_ {
        self.entries.keys().copied()
    }

    /// Sum of all weights, or `WeightOverflow` if it does not fit in a `u64`.
    pub fn total(&self) -> Result<u64> {
        self.entries
            .values()
            .try_fold(0u64, |acc, &w| acc.checked_add(w))
            .ok_or(Error::WeightOverflow)
    }

    fn in_prefix(&self, p: Prefix) -> impl Iterator<Item = (&Address, &u64)> {
        self.entries.range(Address(p.value())..=Address(p.last()))
    }

    /// Total weight of the entries inside `p`.
    pub fn weight_in(&self, p: Prefix) -> u64 {
        self.in_prefix(p).map(|(_, &w)| w).sum()
    }

    /// Number of entries inside `p`.
    pub fn count_in(&self, p: Prefix) -> u64 {
        self.in_prefix(p).count() as u64
    }

    /// Errors with `ConflictingLists` on the first address present in both sets.
    pub fn check_disjoint(&self, other: &WeightedAddressSet) -> Result<()> {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        match small.addresses().find(|&ip| large.contains(ip)) {
            Some(ip) => Err(Error::ConflictingLists(ip)),
            None => Ok(()),
        }
    }
}

/// How good addresses are specified for BLOCK-ALL and BLOCK-SOME.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum WhitelistMode {
    Explicit(WeightedAddressSet),
    /// Every address outside the blacklist is good with weight 1.
    ImplicitUnit,
}

impl WhitelistMode {
    /// Good weight covered by `p`.
    pub fn good_weight_in(&self, p: Prefix, bad: &WeightedAddressSet) -> u64 {
        match self {
            WhitelistMode::Explicit(white) => white.weight_in(p),
            WhitelistMode::ImplicitUnit => p.size() - bad.count_in(p),
        }
    }

    /// Checks list exclusivity against `bad`.
    pub fn validate(&self, bad: &WeightedAddressSet) -> Result<()> {
        match self {
            WhitelistMode::Explicit(white) => white.check_disjoint(bad),
            WhitelistMode::ImplicitUnit => Ok(()),
        }
    }
}

/// A set of non-overlapping filters with its metrics.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FilterSolution {
    /// Sorted by network address.
    pub filters: Vec<Prefix>,
    /// Good weight blocked: sum over filters of the good weight each covers.
    pub collateral_damage: u64,
    /// Bad weight blocked: sum over filters of the bad weight each covers.
    pub benefit: u64,
    /// Bad weight no filter covers.
    pub unblocked_bad: u64,
    /// Traffic left after filtering (capacity problems only).
    pub residual_traffic: Option<u64>,
    pub filters_used: usize,
}

impl FilterSolution {
    /// Recomputes every metric from the raw lists.
    pub fn evaluate(filters: Vec<Prefix>, bad: &WeightedAddressSet, white: &WhitelistMode) -> Self {
        let mut filters = filters;
        filters.sort_unstable();
        let collateral_damage = filters.iter().map(|&p| white.good_weight_in(p, bad)).sum();
        let benefit = filters.iter().map(|&p| bad.weight_in(p)).sum();
        let unblocked_bad = bad
            .iter()
            .filter(|&(ip, _)| !covered_by_sorted(&filters, ip))
            .map(|(_, w)| w)
            .sum();
        FilterSolution {
            filters_used: filters.len(),
            filters,
            collateral_damage,
            benefit,
            unblocked_bad,
            residual_traffic: None,
        }
    }

    /// Like [`FilterSolution::evaluate`] with an explicit whitelist, also
    /// reporting the traffic that remains unblocked.
    pub fn evaluate_traffic(filters: Vec<Prefix>, bad: &WeightedAddressSet, good: &WeightedAddressSet) -> Self {
        let mut filters = filters;
        filters.sort_unstable();
        let collateral_damage = filters.iter().map(|&p| good.weight_in(p)).sum();
        let benefit = filters.iter().map(|&p| bad.weight_in(p)).sum();
        let mut unblocked_bad = 0;
        let mut residual = 0;
        for (ip, w) in bad.iter().chain(good.iter()) {
            if !covered_by_sorted(&filters, ip) {
                residual += w;
                if bad.contains(ip) {
                    unblocked_bad += w;
                }
            }
        }
        FilterSolution {
            filters_used: filters.len(),
            filters,
            collateral_damage,
            benefit,
            unblocked_bad,
            residual_traffic: Some(residual),
        }
    }

    /// True if no filter contains another.
    pub fn is_non_overlapping(&self) -> bool {
        prefixes_disjoint(&self.filters)
    }

    /// The BLOCK-SOME objective: collateral damage minus benefit.
    pub fn net_cost(&self) -> i128 {
        self.collateral_damage as i128 - self.benefit as i128
    }
}

/// True if no two prefixes overlap. Input order does not matter.
pub fn prefixes_disjoint(prefixes: &[Prefix]) -> bool {
    let mut sorted: Vec<Prefix> = prefixes.to_vec();
    sorted.sort_unstable();
    let mut reach: Option<u32> = None;
    for p in sorted {
        if reach.is_some_and(|end| p.value() <= end) {
            return false;
        }
        reach = Some(p.last());
    }
    true
}

/// Membership test against a sorted, non-overlapping prefix list.
pub(crate) fn covered_by_sorted(sorted: &[Prefix], ip: Address) -> bool {
    let idx = sorted.partition_point(|p| p.value() <= ip.0);
    idx > 0 && sorted[idx - 1].covers(ip)
}
