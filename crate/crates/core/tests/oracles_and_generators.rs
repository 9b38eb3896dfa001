use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgnep::experiment::{gen_coupled_game, gen_cycles_instance, gen_cycles_instance_with, BOX_RANGE, CAPACITY};
use vgnep::model::consensus_upper_gradient;
use vgnep::oracles::{
    best_approximation_pair, box_distance, boxes_intersect, cycle_residual, finite_difference_gradient, pocs_cycle,
};
use vgnep::{BlockVector, BoxSet, ConvexSet, UpperSelector};

fn boxes(dim: usize, count: usize) -> impl Strategy<Value = Vec<BoxSet>> {
    prop::collection::vec(
        prop::collection::vec((0.0..20.0f64, 0.1..6.0f64), dim).prop_map(|c| {
            let lo: Vec<f64> = c.iter().map(|(a, _)| *a).collect();
            let hi: Vec<f64> = c.iter().map(|(a, w)| a + w).collect();
            BoxSet::new(lo, hi).unwrap()
        }),
        count,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pocs_tuples_are_cycles(bs in boxes(3, 3), start in prop::collection::vec(-10.0..30.0f64, 3)) {
        let sets: Vec<ConvexSet> = bs.into_iter().map(Into::into).collect();
        let tol = 1e-12;
        let t = pocs_cycle(&sets, &start, 10_000_000, tol).unwrap();
        prop_assert!(t.defect(&sets).unwrap() <= tol * 4.0);
        let sig = vgnep::SpaceSignature::uniform(3, 3, 1).unwrap();
        let x = BlockVector::from_blocks(&sig, &t.points).unwrap();
        prop_assert!(cycle_residual(&sets, &x).unwrap() <= tol * 4.0 * 3.0);
    }

    #[test]
    fn pair_distance_matches_closed_form(bs in boxes(3, 2)) {
        let (a, b) = (&bs[0], &bs[1]);
        let (x1, x2) = best_approximation_pair(&a.clone().into(), &b.clone().into(), 1e-14).unwrap();
        let d = x1.iter().zip(&x2).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!((d - box_distance(a, b).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn consensus_gradient_matches_differences(
        flat in prop::collection::vec(-10.0..10.0f64, 6),
        targets in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 3),
    ) {
        let sig = vgnep::SpaceSignature::uniform(3, 2, 1).unwrap();
        let x = BlockVector::from_flat(&sig, flat).unwrap();
        let sel = UpperSelector::Consensus { targets: targets.clone() };
        for i in 0..3 {
            let g = consensus_upper_gradient(&targets, i, &x).unwrap();
            let fd = finite_difference_gradient(|y| sel.costs(y).unwrap()[i], &x, i, 1e-5).unwrap();
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }
}

#[test]
fn generated_boxes_have_empty_intersection() {
    for seed in 0..50 {
        let inst = gen_cycles_instance(seed).unwrap();
        assert!(!boxes_intersect(&inst.boxes));
        // Intersection oracle: a common point would have to lie in the box
        // [max lower, min upper], which must be empty in some coordinate.
        let empty = (0..3).any(|k| {
            let lo = inst.boxes.iter().map(|b| b.lower()[k]).fold(f64::MIN, f64::max);
            let hi = inst.boxes.iter().map(|b| b.upper()[k]).fold(f64::MAX, f64::min);
            lo > hi
        });
        assert!(empty, "seed {seed}");
        for b in &inst.boxes {
            assert!(b.lower().iter().all(|v| (0.0..=BOX_RANGE).contains(v)));
            assert!(b.upper().iter().all(|v| (0.0..=BOX_RANGE).contains(v)));
        }
    }
    let pair = gen_cycles_instance_with(3, 2, 3).unwrap();
    assert!(box_distance(&pair.boxes[0], &pair.boxes[1]).unwrap() > 0.0);
}

#[test]
fn coupled_game_is_monotone_and_feasible() {
    for seed in 0..5 {
        let inst = gen_coupled_game(seed).unwrap();
        let game = &inst.game;
        let sig = game.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let mut draw = || {
                let v: Vec<f64> = (0..sig.primal_dim()).map(|_| rng.random_range(-50.0..50.0)).collect();
                BlockVector::from_flat(sig, v).unwrap()
            };
            let (x, y) = (draw(), draw());
            let dg = game.gradient(&x).unwrap().sub(&game.gradient(&y).unwrap()).unwrap();
            assert!(dg.inner(&x.sub(&y).unwrap()).unwrap() >= -1e-10);
        }
        let low = BlockVector::from_blocks(sig, &inst.lower_bounds).unwrap();
        for (i, set) in game.strategy_sets().iter().enumerate() {
            assert!(set.contains(low.block(i), 0.0).unwrap());
        }
        let load = game.coupling().forward(&low).unwrap();
        assert!(load.iter().all(|l| *l < CAPACITY));
        assert!(game.shared_set().contains(&load, 0.0).unwrap());
    }
}
