use proptest::prelude::*;
use psvar::data::Dataset;

fn dataset() -> impl Strategy<Value = Dataset> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(-1e6f64..1e6, n),
            prop::collection::vec(0u8..4, n),
        )
            .prop_map(|(y, z, x, g)| {
                Dataset::new(
                    y.into_iter().map(f64::from).collect(),
                    z.into_iter().map(f64::from).collect(),
                    vec![x, g.into_iter().map(f64::from).collect()],
                    vec!["x".into(), "g".into()],
                )
                .unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bitwise(d in dataset()) {
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), "y", "z", &["x", "g"]).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn subgroup_split_is_a_partition(d in dataset()) {
        let parts = d.subgroup_split("g").unwrap();
        prop_assert_eq!(parts.iter().map(|(_, p)| p.n()).sum::<usize>(), d.n());
        let mut seen: Vec<(u64, u64)> = parts
            .iter()
            .flat_map(|(_, p)| (0..p.n()).map(move |i| (p.column(0)[i].to_bits(), p.y()[i].to_bits() ^ p.z()[i].to_bits() << 1)))
            .collect();
        let mut all: Vec<(u64, u64)> =
            (0..d.n()).map(|i| (d.column(0)[i].to_bits(), d.y()[i].to_bits() ^ d.z()[i].to_bits() << 1)).collect();
        seen.sort_unstable();
        all.sort_unstable();
        prop_assert_eq!(seen, all);
        prop_assert!(parts.iter().all(|(_, p)| p.p() == 1));
    }
}
