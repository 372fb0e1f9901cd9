//! Library results against the brute-force oracles in `support`.

mod support;

use condreach::bisection::{optimize, BisectionConfig, Estimate, Variant};
use condreach::conditional::{build_transform, solve_restart, Query};
use condreach::rational::{rat, to_f64};
use condreach::solver::{reach_prob, reach_prob_with, SolverConfig};
use condreach::{Direction, Mode, Rational};
use num_traits::Zero;

use support::{brute_conditional, brute_v, instance, opt_reach, sized_instance};

fn query(m: &condreach::Mdp, dir: Direction) -> Query {
    Query::from_labels(m, "goal", "evidence", dir).unwrap()
}

#[test]
fn reachability_matches_enumeration() {
    for seed in 0..60 {
        let (m, g, _) = sized_instance(seed, 7, 3);
        for dir in [Direction::Max, Direction::Min] {
            let want = opt_reach(&m, &g, dir);
            let got = reach_prob::<Rational>(&m, &g, dir).unwrap();
            assert_eq!(got.values, want, "seed {seed} {}", dir.name());
        }
    }
}

#[test]
fn quotient_path_matches_enumeration_on_acyclic_models() {
    let cfg = SolverConfig { use_acyclic: false, ..SolverConfig::default() };
    for seed in 0..30 {
        let (m, g, _) = instance(seed, 6, 3, true);
        for dir in [Direction::Max, Direction::Min] {
            let got = reach_prob_with::<Rational>(&m, &g, dir, &cfg).unwrap();
            assert_eq!(got.values, opt_reach(&m, &g, dir), "seed {seed}");
        }
    }
}

#[test]
fn witness_attains_reachability_value() {
    for seed in 0..40 {
        let (m, g, _) = sized_instance(100 + seed, 7, 3);
        for dir in [Direction::Max, Direction::Min] {
            let res = reach_prob::<Rational>(&m, &g, dir).unwrap();
            let choice: Vec<usize> = m.states().map(|s| res.witness.get(s).unwrap_or(0)).collect();
            let attained = support::chain_reach(&m, &choice, &g);
            assert_eq!(attained[m.initial()], res.values[m.initial()], "seed {seed} {}", dir.name());
        }
    }
}

#[test]
fn restart_and_reduction_match_enumeration() {
    for seed in 0..80 {
        let (m, g, e) = sized_instance(200 + seed, 6, 2);
        for dir in [Direction::Max, Direction::Min] {
            let q = query(&m, dir);
            let brute = brute_conditional(&m, &g, &e, dir).unwrap();
            let restart = solve_restart::<Rational>(&m, &q).unwrap().value;
            assert_eq!(restart, brute, "restart seed {seed} {}", dir.name());
            let opt = optimize(&m, &q, &BisectionConfig::exact(Variant::PtAdv)).unwrap();
            assert_eq!(opt.estimate, Estimate::Exact(brute), "reduction seed {seed} {}", dir.name());
        }
    }
}

#[test]
fn threshold_value_matches_enumeration() {
    for seed in 0..40 {
        let (m, g, e) = sized_instance(300 + seed, 6, 2);
        for dir in [Direction::Max, Direction::Min] {
            let t = build_transform::<Rational>(&m, &query(&m, dir)).unwrap();
            if condreach::conditional::min_edge_case(&t).is_some() {
                continue;
            }
            for lambda in [rat(0, 1), rat(1, 3), rat(1, 2), rat(5, 7), rat(1, 1)] {
                let got = t.threshold(&lambda).unwrap();
                let want = brute_v(&m, &g, &e, dir, &lambda).unwrap();
                // The reduced value is a positive multiple of the original one.
                assert_eq!(got.value.is_zero(), want.is_zero(), "seed {seed} λ={lambda}");
                assert_eq!(got.value > Rational::zero(), want > Rational::zero(), "seed {seed} λ={lambda}");
            }
        }
    }
}

#[test]
fn float_pipeline_tracks_exact() {
    for seed in 0..40 {
        let (m, _, _) = sized_instance(400 + seed, 8, 3);
        for dir in [Direction::Max, Direction::Min] {
            let exact = optimize(&m, &query(&m, dir), &BisectionConfig::exact(Variant::SternBrocot)).unwrap();
            let cfg = BisectionConfig::new(Variant::Adv, rat(1, 1_000_000), Mode::Float);
            let float = optimize(&m, &query(&m, dir).with_mode(Mode::Float), &cfg).unwrap();
            let d = (to_f64(exact.estimate.value()) - to_f64(float.estimate.value())).abs();
            assert!(d <= 2e-6, "seed {seed} {}: {} vs {}", dir.name(), exact.estimate, float.estimate);
        }
    }
}
