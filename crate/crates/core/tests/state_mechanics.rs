use proptest::prelude::*;
use searchrec_core::staterec::update_freq;
use searchrec_core::{FreqVector, RecAction, RecState, SimplexLattice};
use searchrec_testkit::simplex::{compositions, nearest};

#[test]
fn worked_sequence_from_cold_start() {
    // one-based: first click on cluster 3, recommendations {1,1,1}, search cluster 1
    let s1 = RecState::initial(3, 2).unwrap();
    let s2 = s1.transition(0, &RecAction::new([0, 0, 0]), 22).unwrap();
    assert_eq!(s2.views.to_f64(), vec![0.0, 0.0, 1.0]);
    assert_eq!(s2.recs.to_f64(), vec![1.0, 0.0, 0.0]);

    // recommendations {3,2,2} instead
    let s2 = s1.transition(0, &RecAction::new([2, 1, 1]), 22).unwrap();
    assert_eq!((s2.t, s2.last), (2, 0));
    assert_eq!(s2.views, FreqVector::from_items(3, &[2]).unwrap());
    assert_eq!(s2.recs, FreqVector::from_ratio(vec![0, 2, 1], 3));
    let r = s2.recs.to_f64();
    assert!((r[1] - 0.66).abs() < 0.01 && (r[2] - 0.33).abs() < 0.01);
}

#[test]
fn snap_is_exhaustively_nearest_and_bounded() {
    for g in [2u32, 4, 8] {
        let lattice = SimplexLattice::new(3, g);
        for i in 0..lattice.num_points() {
            assert_eq!(lattice.snap(&lattice.freq(i)), i, "idempotence at G={g}");
        }
        for den in 1..=24u64 {
            for c in compositions(3, den as u32) {
                let num: Vec<u64> = c.iter().map(|&x| u64::from(x)).collect();
                let v = FreqVector::from_ratio(num.clone(), den);
                let idx = lattice.snap(&v);
                let got = lattice.coords(idx).unwrap();
                assert_eq!(got, nearest(&num, den, g).as_slice(), "G={g} v={num:?}/{den}");
                let snapped = lattice.values(idx);
                for (a, b) in v.to_f64().iter().zip(&snapped) {
                    assert!((a - b).abs() <= 1.0 / f64::from(g) + 1e-15);
                }
                assert_eq!(lattice.snap(&lattice.freq(idx)), idx);
            }
        }
    }
}

#[test]
fn empty_survives_snapping() {
    let l = SimplexLattice::new(3, 4);
    assert_eq!(l.snap(&FreqVector::empty(3)), l.empty_index());
}

proptest! {
    #[test]
    fn update_keeps_unit_mass(
        k in 1usize..6,
        seed_items in proptest::collection::vec(0usize..64, 1..12),
        new_items in proptest::collection::vec(0usize..64, 1..4),
    ) {
        let first: Vec<usize> = seed_items.iter().map(|i| i % k).collect();
        let next: Vec<usize> = new_items.iter().map(|i| i % k).collect();
        let a = update_freq(&FreqVector::empty(k), 0, &first).unwrap();
        let b = update_freq(&a, first.len() as u64, &next).unwrap();
        prop_assert!((b.total() - 1.0).abs() < 1e-12);
        let mut all = first.clone();
        all.extend(&next);
        prop_assert_eq!(b, FreqVector::from_items(k, &all).unwrap());
    }

    #[test]
    fn snap_is_idempotent_and_close(k in 2usize..5, g in 1u32..7, counts in proptest::collection::vec(0u64..20, 4)) {
        let mut c = counts[..k].to_vec();
        if c.iter().sum::<u64>() == 0 {
            c[0] = 1;
        }
        let v = FreqVector::from_counts(&c);
        let l = SimplexLattice::new(k, g);
        let i = l.snap(&v);
        prop_assert_eq!(l.snap(&l.freq(i)), i);
        for (a, b) in v.to_f64().iter().zip(l.values(i)) {
            prop_assert!((a - b).abs() <= 1.0 / f64::from(g) + 1e-12);
        }
    }

    #[test]
    fn transitions_advance_one_step(k in 2usize..5, path in proptest::collection::vec((0usize..16, 0usize..16, 0usize..16, 0usize..16), 1..8)) {
        let mut s = RecState::initial(k, 0).unwrap();
        for (next, a, b, c) in path {
            let r = RecAction::new([a % k, b % k, c % k]);
            let t = s.t;
            s = s.transition(next % k, &r, 100).unwrap();
            prop_assert_eq!(s.t, t + 1);
            prop_assert_eq!(s.recs.denominator() > 0, true);
            prop_assert!((s.views.total() - 1.0).abs() < 1e-12);
            prop_assert!((s.recs.total() - 1.0).abs() < 1e-12);
        }
    }
}
