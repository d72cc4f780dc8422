use proptest::prelude::*;
use proptest::strategy::ValueTree;

use sandpile_ap::avalanche::{
    check_fired_fixed_point, check_lemmas, check_peak_locality, classify, compute_avalanche, status_at,
};
use sandpile_ap::instances::enumerate_gsm;
use sandpile_ap::ncdecider::{
    build_transfer, compose, final_status_linear, final_status_naive, final_status_parallel,
    reduce_range_with_grain, seed_status, sequential_fold, valid_targets, window_advance, window_of,
    StatusScan, TransferFunction,
};
use sandpile_ap::{decide_linear, decide_naive, decide_parallel, ApInstance, FiringStrategy, SlopeConfig, Status};

fn gsm(p: u32, max_len: usize) -> impl Strategy<Value = SlopeConfig> {
    (1..=max_len)
        .prop_flat_map(move |m| prop::collection::vec(0..=p as i32, m))
        .prop_map(move |v| SlopeConfig::new(p, v).unwrap())
}

/// Configs biased toward slopes equal to p, which keep avalanches alive.
fn lively_gsm(p: u32, max_len: usize) -> impl Strategy<Value = SlopeConfig> {
    let slope = prop_oneof![3 => Just(p as i32), 1 => Just(0), 2 => 1..=p as i32];
    (1..=max_len)
        .prop_flat_map(move |m| prop::collection::vec(slope.clone(), m))
        .prop_map(move |v| SlopeConfig::new(p, v).unwrap())
}

fn any_gsm() -> impl Strategy<Value = SlopeConfig> {
    (1u32..=5).prop_flat_map(|p| prop_oneof![lively_gsm(p, 80), gsm(p, 80)])
}

#[test]
fn exhaustive_small_configs_all_deciders_agree() {
    let corpus = [(1, 10), (2, 8), (3, 6), (4, 5), (5, 4)];
    for (p, max_len) in corpus {
        for m in 1..=max_len {
            for s in enumerate_gsm(p, m).unwrap() {
                let truth = final_status_naive(&s).unwrap();
                assert_eq!(final_status_linear(&s).unwrap(), truth, "linear on {s}");
                assert_eq!(final_status_parallel(&s, 2).unwrap(), truth, "parallel on {s}");
            }
        }
    }
}

#[test]
fn exhaustive_status_faithfulness() {
    for (p, max_len) in [(1, 10), (2, 8), (3, 6)] {
        for m in p as usize + 1..=max_len {
            for s in enumerate_gsm(p, m).unwrap() {
                let av = compute_avalanche(&s).unwrap();
                assert_eq!(seed_status(&s).unwrap(), status_at(&av, p as usize + 1));
                for st in StatusScan::new(&s).unwrap() {
                    assert_eq!(st, status_at(&av, st.position()), "{s}");
                }
            }
        }
    }
}

#[test]
fn every_table_keeps_dead_status_dead() {
    for s in enumerate_gsm(3, 7).unwrap() {
        for i in 4..=7 {
            assert_eq!(build_transfer(&s, i).unwrap().apply(0), 0);
        }
    }
}

#[test]
fn fixed_point_mutations_are_detected() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = any_gsm();
    for _ in 0..100 {
        let s = strategy.new_tree(&mut runner).unwrap().current();
        let av = compute_avalanche(&s).unwrap();
        assert!(check_fired_fixed_point(&s, &av.fired));
        for c in 1..=s.len() {
            let mut mutated = av.fired.clone();
            if mutated.contains(c as i64) {
                mutated.remove(c);
            } else {
                mutated.insert(c);
            }
            assert!(!check_fired_fixed_point(&s, &mutated), "{s} flipping {c}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn deciders_agree_on_random_configs(s in any_gsm()) {
        for k in valid_targets(&s) {
            let inst = ApInstance::new(s.clone(), k).unwrap();
            let naive = decide_naive(&inst).unwrap();
            prop_assert_eq!(decide_linear(&inst).unwrap(), naive);
            prop_assert_eq!(decide_parallel(&inst, 3).unwrap(), naive);
        }
    }

    #[test]
    fn structural_checks_hold(s in any_gsm()) {
        let av = compute_avalanche(&s).unwrap();
        prop_assert!(check_lemmas(&av, &s).is_empty());
        prop_assert!(classify(&av.firings).is_ok());
        prop_assert!(check_peak_locality(&av, &s).passed());
        prop_assert!(av.firings.iter().filter(|&&c| c == 1).count() <= 1);
        prop_assert!(av.final_config.overflow().iter().all(|&v| (0..=1).contains(&v)));
        prop_assert!(av.final_config.in_gsm());
        if !av.is_empty() {
            prop_assert_eq!(av.firings[0], 1);
        }
    }

    #[test]
    fn avalanche_is_lexicographically_minimal(s in (1u32..=3).prop_flat_map(|p| lively_gsm(p, 12)), seed in any::<u64>()) {
        let av = compute_avalanche(&s).unwrap();
        let plus = s.add_grain().unwrap();
        for offset in 0..20u64 {
            let (fin, seq) = plus.stabilize(&FiringStrategy::SeededRandom(seed.wrapping_add(offset))).unwrap();
            prop_assert!(av.firings <= seq);
            prop_assert_eq!(&fin, &av.final_config);
        }
    }

    #[test]
    fn window_advance_matches_scan(s in (1u32..=4).prop_flat_map(|p| lively_gsm(p, 60)), a in 0usize..60, w in 1usize..40) {
        let p = s.p() as usize;
        prop_assume!(s.len() > p);
        let av = compute_avalanche(&s).unwrap();
        let i = p + 1 + a % s.len();
        let j = i + p + w;
        let part = window_of(&s, i, j);
        let (flags, out) = window_advance(s.p(), i, &part, &status_at(&av, i)).unwrap();
        for (offset, &f) in flags.iter().enumerate() {
            prop_assert_eq!(f, av.fired.contains((i + offset) as i64));
        }
        prop_assert_eq!(out, status_at(&av, j - p + 1));
    }

    #[test]
    fn reduction_is_chunking_invariant(s in (1u32..=4).prop_flat_map(|p| lively_gsm(p, 120)), grain in 1usize..50, workers in 1usize..6) {
        prop_assume!(s.len() > s.p() as usize);
        let fold = sequential_fold(&s).unwrap();
        prop_assert_eq!(reduce_range_with_grain(&s, workers, grain).unwrap(), fold);
    }

    #[test]
    fn composition_is_associative(p in 1u32..=4, seed in prop::collection::vec(any::<u16>(), 48)) {
        let n = 1usize << p;
        let table = |k: usize| -> Vec<u16> {
            (0..n).map(|b| seed[(k * 16 + b) % seed.len()] % n as u16).collect()
        };
        let f = TransferFunction::from_table(p, 0, 1, table(0)).unwrap();
        let g = TransferFunction::from_table(p, 1, 2, table(1)).unwrap();
        let h = TransferFunction::from_table(p, 2, 3, table(2)).unwrap();
        prop_assert_eq!(
            compose(&h, &compose(&g, &f).unwrap()).unwrap(),
            compose(&compose(&h, &g).unwrap(), &f).unwrap()
        );
    }

    #[test]
    fn strategies_reach_one_fixed_point(
        p in 1u32..=3,
        slopes in prop::collection::vec(0i32..=7, 1..=12),
        seed in any::<u64>(),
    ) {
        let s = SlopeConfig::new(p, slopes).unwrap();
        let (left, lseq) = s.stabilize(&FiringStrategy::Leftmost).unwrap();
        let (right, rseq) = s.stabilize(&FiringStrategy::Rightmost).unwrap();
        prop_assert!(left.is_stable());
        prop_assert_eq!(&left, &right);
        let mut l = lseq.clone();
        let mut r = rseq;
        l.sort_unstable();
        r.sort_unstable();
        prop_assert_eq!(&l, &r);
        for offset in 0..20u64 {
            let (fin, mut seq) = s.stabilize(&FiringStrategy::SeededRandom(seed.wrapping_add(offset))).unwrap();
            prop_assert_eq!(&fin, &left);
            seq.sort_unstable();
            prop_assert_eq!(&seq, &l);
        }
    }

    #[test]
    fn heights_round_trip(p in 1u32..=6, slopes in prop::collection::vec(-5i32..=9, 0..40)) {
        let s = SlopeConfig::new(p, slopes).unwrap();
        let h = sandpile_ap::slopes_to_heights(&s);
        prop_assert_eq!(h.heights.last().copied(), Some(0));
        prop_assert_eq!(sandpile_ap::heights_to_slopes(&h, p).unwrap(), s);
    }

    #[test]
    fn firing_conserves_grains(p in 1u32..=4, slopes in prop::collection::vec(0i32..=9, 1..30)) {
        let s = SlopeConfig::new(p, slopes).unwrap();
        for i in s.unstable_columns() {
            let fired = s.fire(i).unwrap();
            prop_assert_eq!(fired.grain_count(), s.grain_count());
        }
    }

    #[test]
    fn seeded_scan_statuses_match_oracle(s in any_gsm()) {
        prop_assume!(s.len() > s.p() as usize);
        let av = compute_avalanche(&s).unwrap();
        let scan: Vec<Status> = StatusScan::new(&s).unwrap().collect();
        prop_assert_eq!(scan.len(), s.len() - s.p() as usize + 1);
        for st in scan {
            prop_assert_eq!(st, status_at(&av, st.position()));
        }
    }
}
