mod common;

use common::{rng, small_instance, SmallInstance};
use mimo_ee::optimizer::{
    best_antenna_count, find_equilibrium, find_equilibrium_jacobi, find_equilibrium_ordered, verify_equilibrium,
    GameContext, GameState,
};

fn ctx(inst: &SmallInstance) -> GameContext<'_> {
    GameContext {
        coupling: &inst.coupling,
        radio: &inst.radio,
        m_max: inst.m_max,
        distributions: &inst.distributions,
        hour: 0,
    }
}

#[test]
fn both_initialisations_reach_the_same_verified_equilibrium() {
    let mut r = rng(2024);
    for i in 0..30 {
        let inst = small_instance(&mut r);
        let ctx = ctx(&inst);
        let hi = find_equilibrium(GameState::all_max(&ctx).unwrap(), &ctx, 100).unwrap();
        let lo = find_equilibrium(GameState::all_min(&ctx).unwrap(), &ctx, 100).unwrap();
        assert_eq!(hi.policies, lo.policies, "instance {i}");
        assert!(verify_equilibrium(&hi, &ctx).unwrap().is_empty(), "instance {i}");
    }
}

#[test]
fn sweep_order_and_update_scheme_do_not_change_the_fixed_point() {
    let mut r = rng(77);
    for _ in 0..10 {
        let inst = small_instance(&mut r);
        let ctx = ctx(&inst);
        let start = GameState::all_max(&ctx).unwrap();
        let forward = find_equilibrium(start.clone(), &ctx, 100).unwrap();
        let order: Vec<usize> = (0..ctx.num_cells()).rev().collect();
        let backward = find_equilibrium_ordered(start.clone(), &ctx, 100, &order).unwrap();
        let jacobi = find_equilibrium_jacobi(start, &ctx, 200).unwrap();
        assert_eq!(forward.policies, backward.policies);
        assert_eq!(forward.policies, jacobi.policies);
    }
}

/// Largest violation of monotonicity in the given direction.
fn reversal(seq: &[usize], increasing: bool) -> usize {
    let mut worst = 0;
    let mut extreme = seq[0];
    for &m in seq {
        if increasing {
            extreme = extreme.max(m);
            worst = worst.max(extreme - m);
        } else {
            extreme = extreme.min(m);
            worst = worst.max(m - extreme);
        }
    }
    worst
}

#[test]
fn best_response_is_monotone_in_scaled_interference() {
    let mut r = rng(5);
    let (mut up, mut down) = (0, 0);
    for _ in 0..10 {
        let inst = small_instance(&mut r);
        let ctx = ctx(&inst);
        let eq = find_equilibrium(GameState::all_max(&ctx).unwrap(), &ctx, 100).unwrap();
        for n in 1..=inst.radio.rate.k_max {
            let seq: Vec<usize> = (0..=40)
                .map(|i| {
                    let s = 0.1 * i as f64;
                    let others: Vec<f64> = eq.expected_antennas.iter().map(|m| s * m).collect();
                    best_antenna_count(n, 0, &inst.coupling, &others, &inst.radio, inst.m_max).unwrap()
                })
                .collect();
            let (inc, dec) = (reversal(&seq, true), reversal(&seq, false));
            assert!(inc.min(dec) <= 1, "n={n}: {seq:?}");
            if seq.first() < seq.last() {
                up += 1;
            } else if seq.first() > seq.last() {
                down += 1;
            }
        }
    }
    println!("best response vs interference: {up} increasing, {down} decreasing");
}

#[test]
fn exhausted_sweep_budget_reports_non_convergence() {
    let mut r = rng(9);
    let inst = small_instance(&mut r);
    let ctx = ctx(&inst);
    let start = GameState::all_min(&ctx).unwrap();
    let eq = find_equilibrium(start.clone(), &ctx, 100).unwrap();
    if eq.iteration > 1 {
        assert!(find_equilibrium(start, &ctx, 1).is_err());
    }
}
