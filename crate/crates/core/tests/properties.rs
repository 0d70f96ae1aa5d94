mod common;

use proptest::prelude::*;
use wavelet_cf::eval::{ndcg_at_k, recall_at_k, topk, RankedList};
use wavelet_cf::graph::{build_adjacency, laplacian_of, IsolatedNodes};
use wavelet_cf::ingest::{split, SplitSpec};
use wavelet_cf::model::{forward, init_params, ModelConfig, SpectralContext};
use wavelet_cf::rng::rng_from_seed;
use wavelet_cf::spectral::{boxcox, eigensolve, transfer, BoxCoxResult, ExponentMode, LanczosOptions};
use wavelet_cf::train::{bpr_loss, sample_triples};
use wavelet_cf::InteractionSet;

fn graph(seed: u64) -> InteractionSet {
    let mut rng = rng_from_seed(seed);
    common::random_graph(80, seed.is_multiple_of(3), &mut rng)
}

fn sparse_set() -> impl Strategy<Value = InteractionSet> {
    (2usize..12, 2usize..12)
        .prop_flat_map(|(m, k)| {
            (
                Just(m),
                Just(k),
                proptest::collection::btree_set((0..m as u32, 0..k as u32), 1..=m * k),
            )
        })
        .prop_map(|(m, k, pairs)| InteractionSet::from_index_pairs(m, k, pairs.into_iter().collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_is_symmetric_with_spectrum_in_zero_two(seed in any::<u64>()) {
        let data = graph(seed);
        let lap = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let dense = lap.laplacian.to_dense();
        prop_assert_eq!(dense.clone(), dense.transpose());
        for r in 0..lap.n() {
            for (c, v) in lap.laplacian.row(r) {
                prop_assert_eq!(lap.laplacian.get(c, r), v);
            }
        }
        let d = eigensolve(&lap, lap.n(), &LanczosOptions::default()).unwrap();
        prop_assert!(d.lambdas.iter().all(|&l| (-1e-10..=2.0 + 1e-10).contains(&l)));
        let a = build_adjacency::<f64>(&data).unwrap();
        for r in 0..a.n() {
            for (c, v) in a.row(r) {
                prop_assert_eq!(a.get(c, r), v);
            }
        }
    }

    #[test]
    fn boxcox_is_increasing(a in 0.05f64..5.0, b in 0.05f64..5.0, kappa in -4.0f64..4.0) {
        prop_assume!(a < b);
        prop_assert!(boxcox(a, kappa) < boxcox(b, kappa));
    }

    #[test]
    fn attenuation_never_increases_with_frequency(
        mut shifted in proptest::collection::vec(1.0f64..3.0, 3..40),
        kappa in 0.0f64..3.0,
        t in 0.0f64..3.0,
    ) {
        shifted.sort_by(f64::total_cmp);
        let bc = BoxCoxResult::<f64>::with_kappa(&shifted, kappa, false);
        prop_assume!(bc.sum > 0.0);
        let g: Vec<f64> = shifted
            .iter()
            .zip(&bc.transformed)
            .map(|(&s, &x)| transfer(&bc, s, x, t, ExponentMode::Power))
            .collect();
        prop_assert!(g.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(g.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn metrics_are_bounded_and_monotone_in_k(
        scores in proptest::collection::vec(0.0f64..1.0, 5..50),
        test_mask in proptest::collection::vec(any::<bool>(), 50),
    ) {
        let test: Vec<u32> = (0..scores.len() as u32).filter(|&i| test_mask[i as usize]).collect();
        prop_assume!(!test.is_empty());
        let mut last = 0.0;
        for k in 1..=scores.len() {
            let list = topk(0, &scores, &[], k);
            let r = recall_at_k(&list, &test).unwrap();
            let g = ndcg_at_k(&list, &test).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
            prop_assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn ndcg_ignores_order_after_the_last_hit(
        items in proptest::collection::vec(0u32..100, 4..20),
        hits in 1usize..4,
        seed in any::<u64>(),
    ) {
        let mut items = items;
        items.sort_unstable();
        items.dedup();
        prop_assume!(items.len() > hits + 1);
        let test: Vec<u32> = { let mut t = items[..hits].to_vec(); t.sort_unstable(); t };
        let k = items.len();
        let original = ndcg_at_k(&RankedList { user: 0, items: items.clone(), k }, &test).unwrap();
        let mut tail = items[hits..].to_vec();
        use rand::seq::SliceRandom;
        tail.shuffle(&mut rng_from_seed(seed));
        let shuffled: Vec<u32> = items[..hits].iter().copied().chain(tail).collect();
        let after = ndcg_at_k(&RankedList { user: 0, items: shuffled, k }, &test).unwrap();
        prop_assert_eq!(original, after);
    }

    #[test]
    fn split_is_a_disjoint_partition(data in sparse_set(), seed in any::<u64>(), fraction in 0.1f64..0.9) {
        let (train, test) = split(&data, &SplitSpec { train_fraction: fraction, seed, per_user_cap: None }).unwrap();
        prop_assert_eq!(train.intersection_count(&test), 0);
        prop_assert_eq!(train.union(&test).unwrap(), data.clone());
        let degrees = data.user_degrees();
        for (u, &d) in train.user_degrees().iter().enumerate() {
            prop_assert!(d >= 1.min(degrees[u]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bpr_loss_is_non_negative(seed in any::<u64>(), scale in 0.01f64..20.0, eta in 0.0f64..0.5) {
        let data = graph(seed);
        let lap = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let decomp = eigensolve(&lap, 16, &LanczosOptions::default()).unwrap();
        let cfg = ModelConfig { layers: 2, width: 4, seed, ..ModelConfig::default() };
        let ctx = SpectralContext::new(decomp, "prop", &cfg).unwrap();
        let mut p = init_params::<f64>(&cfg, data.num_users(), data.num_items(), 16);
        p.x0 = p.x0.map(|v| v * scale * 100.0);
        p.y0 = p.y0.map(|v| v * scale * 100.0);
        let batch = sample_triples(&data, 64, &mut rng_from_seed(seed)).unwrap();
        let loss = bpr_loss(&forward(&p, &ctx).unwrap(), &batch, eta).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
    }
}
