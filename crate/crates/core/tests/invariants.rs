//! Cross-module properties on random finite toys.

use mace_core::advantage::{advantage_discrete, advantage_from_individual};
use mace_core::density::{DensityPair, DensitySpec};
use mace_core::individual::{dp_bound, individual_risk_accuracy, individual_risk_generalized};
use mace_core::oracle::{exact_advantage, exact_generalized_conditional, exact_individual_risk, FiniteToyDistribution};
use mace_core::{named_metric, Error, QueryOutput};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy(seed: u64, outcomes: usize, prior: f64) -> FiniteToyDistribution {
    FiniteToyDistribution::random(&mut ChaCha8Rng::seed_from_u64(seed), outcomes, prior).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn advantage_is_mixture_mean_of_individual_risk(seed in any::<u64>(), k in 2usize..12, p in 0.05f64..0.95) {
        let t = toy(seed, k, p);
        let mean: f64 = (0..k)
            .map(|j| {
                let mass = p * t.member_pmf()[j] + (1.0 - p) * t.nonmember_pmf()[j];
                mass * exact_individual_risk(&t, j).unwrap()
            })
            .sum();
        prop_assert!((exact_advantage(&t) - mean).abs() < 1e-12);
    }

    #[test]
    fn conditional_accuracy_is_half_one_plus_risk(seed in any::<u64>(), k in 2usize..12, p in 0.05f64..0.95) {
        let t = toy(seed, k, p);
        let acc = named_metric("ACC", p).unwrap();
        for j in 0..k {
            let risk = exact_individual_risk(&t, j).unwrap();
            match exact_generalized_conditional(&t, &acc, j) {
                Ok(v) => prop_assert!((v - (1.0 + risk) / 2.0).abs() < 1e-12),
                Err(Error::ThresholdTie { .. }) => prop_assert!(risk < 1e-9),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }

    #[test]
    fn sample_estimates_agree(seed in any::<u64>(), k in 2usize..10, p in 0.1f64..0.9, n in 50usize..800) {
        let t = toy(seed, k, p);
        let set = t.sample_set(n, seed).unwrap();
        let pair = DensityPair::fit(&set, &DensitySpec::Discrete { bins: None }).unwrap();
        let w = advantage_discrete(&set, None, 0.05).unwrap().point;
        let f = advantage_from_individual(&set, &pair.members, &pair.nonmembers, p).unwrap().point;
        prop_assert!((w - f).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&w));

        let acc = named_metric("ACC", p).unwrap();
        for j in 0..k {
            let z = QueryOutput::scalar(j as f64).unwrap();
            let Ok(r) = individual_risk_accuracy(&z, &pair.members, &pair.nonmembers, p, 0.05) else { continue };
            prop_assert!(r.ci.lower <= r.point && r.point <= r.ci.upper);
            prop_assert!(0.0 <= r.ci.lower && r.ci.upper <= 1.0);
            if let Ok(g) = individual_risk_generalized(&z, &pair.members, &pair.nonmembers, p, &acc, 0.05) {
                prop_assert!((2.0 * g.point - 1.0 - r.point).abs() < 1e-12);
                prop_assert!(g.ci.lower <= g.point && g.point <= g.ci.upper);
            }
        }
    }

    #[test]
    fn dp_bound_shape(eps in 0.0f64..10.0, d in 0.0f64..2.0, p in 0.01f64..0.99) {
        let a = dp_bound(eps, p).unwrap().bound;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(dp_bound(eps + d, p).unwrap().bound >= a - 1e-15);
        prop_assert!((dp_bound(eps, 1.0 - p).unwrap().bound - a).abs() < 1e-12);
        // The cap never falls below the trivial advantage |2p − 1|.
        prop_assert!(a >= (2.0 * p - 1.0).abs() - 1e-12);
    }
}
