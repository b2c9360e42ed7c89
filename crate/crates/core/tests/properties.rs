use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use d2dshare::matching::{
    deferred_acceptance, deferred_acceptance_traced, enumerate_stable_matchings, find_blocking_pairs,
    random_matching,
};
use d2dshare::rates::{cooperative_rates, LinkBudget};
use d2dshare::stackelberg::{
    best_response_alpha, d2d_utility, fixed_price_outcome, solve_equilibrium, GameParams,
};
use d2dshare::verify::{run_verification, sample_instance, sample_preferences, VerifyOptions};
use d2dshare::ZERO_TOL;

fn params() -> impl Strategy<Value = GameParams> {
    (0.5f64..2.0, 1.0f64..30.0, 0.01f64..0.3, 0.5f64..3.0).prop_map(|(beta1, beta2, p_d, r_th)| GameParams {
        beta1,
        beta2,
        p_d,
        r_th,
        ..GameParams::default()
    })
}

fn preferences() -> impl Strategy<Value = (usize, usize, f64, u64)> {
    (1usize..=6, 1usize..=6, 0.1f64..1.0, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn equilibrium_respects_constraints(p in params(), r_c in 0.1f64..20.0, r_d in 0.1f64..30.0) {
        let budget = LinkBudget::from_rates(r_c, r_d);
        let o = solve_equilibrium(&budget, &p);
        if o.feasible {
            prop_assert!(o.c_star >= 0.0);
            prop_assert!(o.alpha_star >= p.r_th / r_c - 1e-12 && o.alpha_star < 0.5);
            prop_assert!(o.r_ceu >= p.r_th - 1e-9);
            prop_assert!(o.u_d2d >= -ZERO_TOL);
            let (rc, rd) = cooperative_rates(&budget, o.alpha_star).unwrap();
            prop_assert_eq!((rc, rd), (o.r_ceu, o.r_d2d));
            if p.relay_cost() < 2.0 * p.beta1 {
                prop_assert!(o.u_d2d.abs() <= ZERO_TOL);
            }
        } else {
            prop_assert_eq!((o.c_star, o.alpha_star, o.u_ceu, o.u_d2d, o.r_ceu, o.r_d2d), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn follower_response_beats_nearby_allocations(seed in any::<u64>(), c in 0.0f64..40.0, t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = sample_instance(&mut rng, &GameParams::default());
        let (b, p) = (&inst.budget, &inst.params);
        let alpha = best_response_alpha(c, b, p).unwrap();
        let lo = p.r_th / b.r_c;
        let other = lo + t * (0.5 - lo) * 0.999;
        prop_assert!(d2d_utility(alpha, c, b, p) >= d2d_utility(other, c, b, p) - 1e-12);
    }

    #[test]
    fn fixed_price_outcomes_are_individually_rational(seed in any::<u64>(), c in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = sample_instance(&mut rng, &GameParams::default());
        let o = fixed_price_outcome(c, &inst.budget, &inst.params);
        if o.feasible {
            prop_assert_eq!(o.c_star, c);
            prop_assert!(o.u_d2d >= -ZERO_TOL);
            prop_assert!(o.r_ceu >= inst.params.r_th - ZERO_TOL);
        }
    }

    #[test]
    fn deferred_acceptance_is_stable_and_ceu_optimal((m, n, p, seed) in preferences()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ceu, d2d) = sample_preferences(&mut rng, m, n, p);
        let (da, rounds) = deferred_acceptance_traced(&ceu, &d2d).unwrap();
        prop_assert!(find_blocking_pairs(&da, &ceu, &d2d).is_empty());

        let proposals: usize = rounds.iter().map(|r| r.proposals.len()).sum();
        prop_assert!(proposals <= m * n);

        let stable = enumerate_stable_matchings(&ceu, &d2d).unwrap();
        prop_assert!(stable.contains(&da));
        for s in &stable {
            for (i, j) in s.pairs() {
                prop_assert!(!ceu[i].prefers(j, da.partner_of_ceu(i)));
            }
        }
        prop_assert_eq!(deferred_acceptance(&ceu, &d2d).unwrap(), da);
    }

    #[test]
    fn random_matching_only_pairs_acceptable_partners((m, n, p, seed) in preferences()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ceu, d2d) = sample_preferences(&mut rng, m, n, p);
        let matching = random_matching(&ceu, &d2d, &mut rng);
        for (i, j) in matching.pairs() {
            prop_assert!(ceu[i].accepts(j) && d2d[j].accepts(i));
        }
        prop_assert!(matching.matched_count() <= m.min(n));
    }
}

#[test]
fn closed_forms_agree_with_two_dimensional_oracle() {
    let report = run_verification(&GameParams::default(), &VerifyOptions::default());
    assert_eq!(report.checks[0].checked, 1000);
    assert!(report.passed(), "{}", report.render());
}
