mod common;

use common::{random_profile, rng, simulate_loss_system};
use mimo_ee::queue::{calibrate_peak_load, steady_state, ServiceProfile};
use rand::Rng;

#[test]
fn analytic_occupancy_matches_simulation() {
    let mut r = rng(11);
    for case in 0..4 {
        let profile = random_profile(&mut r);
        let a = r.random_range(0.2..2.0) * profile.servers() as f64;
        let lambda = a * profile.rates[0] / profile.traffic_per_user_bits;
        let exact = steady_state(&profile, lambda).unwrap();
        let sim = simulate_loss_system(&profile, lambda, 200_000, 100 + case);
        for (n, (&p, &q)) in exact.pi.iter().zip(&sim.pi).enumerate() {
            let tol = 4.0 * sim.sigma[n] + 1e-4;
            assert!((p - q).abs() < tol, "case {case} state {n}: {p} vs {q} (tol {tol})");
        }
    }
}

#[test]
fn blocked_fraction_matches_full_state_probability() {
    // Poisson arrivals see time averages
    let profile = ServiceProfile::new(vec![4e7, 3.1e7, 2.6e7, 2.2e7, 2.0e7], 5e7).unwrap();
    let a = calibrate_peak_load(&profile, 0.05).unwrap();
    let lambda = a * profile.rates[0] / profile.traffic_per_user_bits;
    let sim = simulate_loss_system(&profile, lambda, 400_000, 5);
    let frac = sim.blocked as f64 / sim.arrivals as f64;
    assert!((frac - 0.05).abs() < 0.004, "{frac}");
}
