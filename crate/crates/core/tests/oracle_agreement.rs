use lcpfilter_core::flooding::FloodingInstance;
use lcpfilter_core::oracle::{
    oracle_solve, partition_oracle_block_all, subset_oracle_flooding, OracleBudget, OracleInstance, OracleProblem,
};
use lcpfilter_core::{Address, ListKind, WeightedAddressSet, WhitelistMode};
use proptest::prelude::*;

fn blocking() -> impl Strategy<Value = (WeightedAddressSet, WhitelistMode, usize)> {
    (
        proptest::collection::btree_map(0u32..256, 0u64..5, 1..9),
        proptest::collection::btree_map(0u32..256, 1u64..5, 0..10),
        any::<bool>(),
        1usize..9,
    )
        .prop_map(|(bad, good, explicit, f)| {
            let bad = WeightedAddressSet::from_entries(
                ListKind::Bad,
                bad.into_iter().map(|(a, w)| (Address(0x0a00_0000 + a), w)),
            )
            .unwrap();
            let white = if explicit {
                let good = good
                    .into_iter()
                    .map(|(a, w)| (Address(0x0a00_0000 + a), w))
                    .filter(|(a, _)| !bad.contains(*a));
                WhitelistMode::Explicit(WeightedAddressSet::from_entries(ListKind::Good, good).unwrap())
            } else {
                WhitelistMode::ImplicitUnit
            };
            (bad, white, f)
        })
}

proptest! {
    #[test]
    fn node_subsets_and_partitions_agree((bad, white, f) in blocking()) {
        let inst = OracleInstance::blocking(bad.clone(), white.clone(), f);
        let nodes = oracle_solve(OracleProblem::BlockAll, &inst, &OracleBudget::default()).unwrap();
        let parts = partition_oracle_block_all(&bad, &white, f).unwrap();
        prop_assert_eq!(nodes.value, parts.map(i128::from));
    }

    #[test]
    fn flooding_oracles_agree(
        addrs in proptest::collection::btree_map(0u32..256, (1u64..30, any::<bool>()), 1..9),
        f in 1usize..4,
        c in 0u64..150,
    ) {
        let mut bad = WeightedAddressSet::new(ListKind::Bad);
        let mut good = WeightedAddressSet::new(ListKind::Good);
        for (a, (w, is_bad)) in addrs {
            let ip = Address(0x0a00_0000 + a);
            if is_bad { bad.set(ip, w) } else { good.set(ip, w) };
        }
        let inst = FloodingInstance::new(bad, good, f, c).unwrap();
        let nodes = oracle_solve(OracleProblem::Flooding, &OracleInstance::flooding(&inst), &OracleBudget::default()).unwrap();
        let subsets = subset_oracle_flooding(&inst).unwrap();
        prop_assert_eq!(nodes.value, subsets.map(i128::from));
    }
}
