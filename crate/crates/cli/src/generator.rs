//! Seeded synthetic blacklists and whitelists.
//!
//! The RNG is ChaCha8 seeded from a `u64`, so output is identical across
//! platforms. Bad addresses land, with probability `clustering`, in one of
//! `ceil(n_bad / 64)` random /24 "hot" blocks and otherwise anywhere in the
//! address space. Good addresses come from a fixed set of /8 blocks and,
//! with probability `clustering`, avoid the hot blocks.

use std::collections::BTreeSet;

use lcpfilter_core::{Address, ListKind, WeightedAddressSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First octets good addresses are drawn from.
pub const ROUTABLE_BLOCKS: [u8; 16] = [12, 24, 38, 50, 61, 66, 72, 80, 98, 122, 150, 172, 190, 203, 212, 217];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_bad: usize,
    pub n_good: usize,
    /// In `[0, 1]`.
    pub clustering: f64,
    /// Weights are uniform in `1..=max_weight`.
    pub max_weight: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synthetic {
    pub bad: WeightedAddressSet,
    pub good: WeightedAddressSet,
    /// Network addresses of the hot /24 blocks.
    pub hot_blocks: Vec<u32>,
}

fn draw_weight(rng: &mut ChaCha8Rng, max: u64) -> u64 {
    if max <= 1 {
        1
    } else {
        rng.random_range(1..=max)
    }
}

fn routable_address(rng: &mut ChaCha8Rng) -> u32 {
    let block = ROUTABLE_BLOCKS[rng.random_range(0..ROUTABLE_BLOCKS.len())] as u32;
    (block << 24) | rng.random_range(0..1u32 << 24)
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Synthetic {
    assert!(
        (0.0..=1.0).contains(&config.clustering),
        "clustering must lie in [0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n_hot = config.n_bad.div_ceil(64);
    let mut hot = BTreeSet::new();
    while hot.len() < n_hot {
        hot.insert(routable_address(&mut rng) & 0xffff_ff00);
    }
    let hot_blocks: Vec<u32> = hot.iter().copied().collect();

    let mut bad = WeightedAddressSet::new(ListKind::Bad);
    while bad.len() < config.n_bad {
        let ip = if rng.random_bool(config.clustering) {
            hot_blocks[rng.random_range(0..hot_blocks.len())] | rng.random_range(0..256u32)
        } else {
            rng.random::<u32>()
        };
        if !bad.contains(Address(ip)) {
            let w = draw_weight(&mut rng, config.max_weight);
            bad.set(Address(ip), w);
        }
    }

    let mut good = WeightedAddressSet::new(ListKind::Good);
    while good.len() < config.n_good {
        let ip = routable_address(&mut rng);
        let avoid = rng.random_bool(config.clustering);
        if bad.contains(Address(ip)) || good.contains(Address(ip)) || (avoid && hot.contains(&(ip & 0xffff_ff00))) {
            continue;
        }
        let w = draw_weight(&mut rng, config.max_weight);
        good.set(Address(ip), w);
    }
    Synthetic { bad, good, hot_blocks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(seed: u64, n_bad: usize, n_good: usize, clustering: f64) -> SyntheticConfig {
        SyntheticConfig {
            seed,
            n_bad,
            n_good,
            clustering,
            max_weight: 1,
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&config(9, 300, 200, 0.7));
        let b = generate_synthetic(&config(9, 300, 200, 0.7));
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(&config(10, 300, 200, 0.7)));
    }

    #[test]
    fn sizes_and_exclusivity() {
        let s = generate_synthetic(&SyntheticConfig {
            max_weight: 9,
            ..config(1, 500, 400, 0.5)
        });
        assert_eq!((s.bad.len(), s.good.len()), (500, 400));
        assert!(s.bad.check_disjoint(&s.good).is_ok());
        assert!(s.bad.iter().chain(s.good.iter()).all(|(_, w)| (1..=9).contains(&w)));
    }

    #[test]
    fn full_clustering_fills_hot_blocks() {
        let s = generate_synthetic(&config(3, 640, 0, 1.0));
        assert_eq!(s.hot_blocks.len(), 10);
        let inside = s
            .bad
            .addresses()
            .filter(|a| s.hot_blocks.contains(&(a.0 & 0xffff_ff00)))
            .count();
        assert!(inside * 10 >= 640 * 9, "{inside}");
    }

    #[test]
    fn no_clustering_matches_uniform_pair_rate() {
        let s = generate_synthetic(&config(5, 2000, 0, 0.0));
        let mut per_octet = [0u64; 256];
        for a in s.bad.addresses() {
            per_octet[(a.0 >> 24) as usize] += 1;
        }
        let same: u64 = per_octet.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
        let pairs = 2000u64 * 1999 / 2;
        let rate = same as f64 / pairs as f64;
        assert!((rate - 1.0 / 256.0).abs() < 0.001, "{rate}");
    }
}
