mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{feasible_instance, oracle_portfolio, random_cap, random_sites};
use sensorco::money::Money;
use sensorco::virtualizer::{
    brute_force_portfolio, compatibility_score, optimize_portfolio, CompanySite, InstanceFile, PortfolioProblem,
    SolveMethod, SolveOptions,
};
use sensorco::Error;

fn instance(seed: u64, max_m: usize, max_n: usize) -> (Vec<CompanySite>, usize, i64) {
    feasible_instance(&mut ChaCha8Rng::seed_from_u64(seed), 1..=max_m, max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exhaustive_matches_naive_enumeration(seed in any::<u64>()) {
        let (sites, n, cap) = instance(seed, 7, 3);
        let problem = PortfolioProblem::new(sites.clone(), n, Money::from_cents(cap)).unwrap();
        let got = optimize_portfolio(&problem, &SolveOptions::default()).unwrap();
        prop_assert_eq!(got.method, SolveMethod::Exhaustive);
        let (best, used) = oracle_portfolio(&sites, n, cap, None).expect("cap admits an even split");
        prop_assert!((got.objective - best).abs() <= 1e-6, "got {} oracle {}", got.objective, best);
        prop_assert_eq!(got.nonempty_entities(), used);
        problem.check_feasible(got.entity_of()).unwrap();
    }

    #[test]
    fn infeasibility_matches_naive_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (rng.gen_range(2..=7), rng.gen_range(1..=3));
        let sites = random_sites(&mut rng, m);
        let cap = random_cap(&mut rng, &sites);
        let problem = PortfolioProblem::new(sites.clone(), n, Money::from_cents(cap)).unwrap();
        match (optimize_portfolio(&problem, &SolveOptions::default()), oracle_portfolio(&sites, n, cap, None)) {
            (Ok(got), Some((best, _))) => prop_assert!((got.objective - best).abs() <= 1e-6),
            (Err(Error::Infeasible(_)), None) => {}
            (got, want) => prop_assert!(false, "solver {:?} vs oracle {:?}", got, want),
        }
    }

    #[test]
    fn objective_ignores_company_order(seed in any::<u64>(), rot in 0usize..8) {
        let (sites, n, cap) = instance(seed, 7, 3);
        let mut shuffled = sites.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let a = brute_force_portfolio(&PortfolioProblem::new(sites, n, Money::from_cents(cap)).unwrap()).unwrap();
        let b = brute_force_portfolio(&PortfolioProblem::new(shuffled, n, Money::from_cents(cap)).unwrap()).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-6);
    }

    #[test]
    fn heuristic_is_feasible_and_no_better_than_oracle(seed in any::<u64>()) {
        let (sites, n, cap) = instance(seed, 9, 3);
        let problem = PortfolioProblem::new(sites, n, Money::from_cents(cap)).unwrap();
        let options = SolveOptions { force_heuristic: true, seed, ..SolveOptions::default() };
        let h = optimize_portfolio(&problem, &options).unwrap();
        prop_assert_eq!(h.method, SolveMethod::Relaxation);
        problem.check_feasible(h.entity_of()).unwrap();
        let o = brute_force_portfolio(&problem).unwrap();
        prop_assert!(h.objective <= o.objective + 1e-9);
        prop_assert!((h.objective - h.entity_scores.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn scores_are_never_positive(seed in any::<u64>()) {
        let (sites, _, _) = instance(seed, 8, 1);
        let s = compatibility_score(&sites).unwrap();
        prop_assert!(s <= 0.0);
        prop_assert_eq!(compatibility_score(&sites[..1]).unwrap(), 0.0);
    }
}

#[test]
fn heuristic_is_deterministic_for_a_seed() {
    let (sites, n, cap) = instance(42, 12, 3);
    let problem = PortfolioProblem::new(sites, n, Money::from_cents(cap)).unwrap();
    let options = SolveOptions { force_heuristic: true, seed: 9, ..SolveOptions::default() };
    let a = optimize_portfolio(&problem, &options).unwrap();
    let b = optimize_portfolio(&problem, &options).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oversized_company_is_infeasible() {
    let sites = vec![
        CompanySite::new("big", Money::from_cents(500), 0.0, 0.0),
        CompanySite::new("s", Money::from_cents(10), 1.0, 1.0),
    ];
    match PortfolioProblem::new(sites, 2, Money::from_cents(100)) {
        Err(Error::Infeasible(msg)) => assert!(msg.contains("big")),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn single_company_is_trivial() {
    let problem = PortfolioProblem::new(
        vec![CompanySite::new("only", Money::from_cents(10), 3.0, 4.0)],
        3,
        Money::from_cents(10),
    )
    .unwrap();
    let a = optimize_portfolio(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(a.entity_of(), &[0]);
    assert_eq!(a.objective, 0.0);
}

#[test]
fn large_instance_needs_heuristic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sites = random_sites(&mut rng, 30);
    let problem = PortfolioProblem::new(sites, 4, Money::from_cents(10_000_000)).unwrap();
    assert!(!problem.is_exhaustive());
    assert!(matches!(brute_force_portfolio(&problem), Err(Error::InstanceTooLarge { .. })));
    let a = optimize_portfolio(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(a.method, SolveMethod::Relaxation);
    problem.check_feasible(a.entity_of()).unwrap();
}

#[test]
fn valuation_floor_is_respected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sites = random_sites(&mut rng, 7);
    let floor = 30_000;
    let instance = InstanceFile {
        companies: sites.clone(),
        entities: 3,
        threshold: Money::from_cents(1_000_000),
        min_valuation: Some(Money::from_cents(floor)),
        pairwise_distances: None,
    };
    let problem = PortfolioProblem::from_instance(instance).unwrap();
    let got = optimize_portfolio(&problem, &SolveOptions::default()).unwrap();
    let (best, _) = oracle_portfolio(&sites, 3, 1_000_000, Some(floor)).unwrap();
    assert!((got.objective - best).abs() <= 1e-6);
}
