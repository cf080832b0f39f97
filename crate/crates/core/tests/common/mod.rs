#![allow(dead_code)]

use mimo_ee::geometry::CouplingMatrix;
use mimo_ee::queue::{steady_state_at_load, ServiceProfile, StateDistribution};
use mimo_ee::radio::{BasebandCoeffs, PaParams, RadioModel, RateParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Time-average occupancy of a loss system simulated event by event.
/// Sessions arrive as a Poisson stream of rate `lambda`, carry an exponential
/// amount of data with mean `traffic_per_user_bits`, and each of the `n`
/// sessions in service drains at `rates[n - 1]` bit/s.
pub struct DesEstimate {
    pub pi: Vec<f64>,
    /// Standard error per state: regenerative cycles through the most visited
    /// state, floored by the Poisson error of the visit count.
    pub sigma: Vec<f64>,
    pub arrivals: u64,
    pub blocked: u64,
}

/// Per-cycle sums for one candidate regeneration state.
#[derive(Clone)]
struct Cycles {
    started: bool,
    y: Vec<f64>,
    tau: f64,
    sum_y2: Vec<f64>,
    sum_ytau: Vec<f64>,
    sum_tau2: f64,
    sum_tau: f64,
}

impl Cycles {
    fn new(states: usize) -> Self {
        Self {
            started: false,
            y: vec![0.0; states],
            tau: 0.0,
            sum_y2: vec![0.0; states],
            sum_ytau: vec![0.0; states],
            sum_tau2: 0.0,
            sum_tau: 0.0,
        }
    }

    fn close(&mut self) {
        if self.started {
            for (n, y) in self.y.iter_mut().enumerate() {
                self.sum_y2[n] += *y * *y;
                self.sum_ytau[n] += *y * self.tau;
                *y = 0.0;
            }
            self.sum_tau2 += self.tau * self.tau;
            self.sum_tau += self.tau;
            self.tau = 0.0;
        }
        self.started = true;
    }
}

pub fn simulate_loss_system(profile: &ServiceProfile, lambda: f64, arrivals: u64, seed: u64) -> DesEstimate {
    let m = profile.servers();
    let mut rng = rng(seed);
    let unit = Exp::new(1.0).unwrap();
    let departure =
        |n: usize| if n == 0 { 0.0 } else { n as f64 * profile.rates[n - 1] / profile.traffic_per_user_bits };
    let exit_rate = |n: usize| if n == m { departure(n) } else { lambda + departure(n) };

    let mut time = vec![0.0f64; m + 1];
    let mut visits = vec![0u64; m + 1];
    let mut cycles = vec![Cycles::new(m + 1); m + 1];
    let mut n = 0usize;
    let mut seen = 0u64;
    let mut blocked = 0u64;
    let warmup = arrivals / 100;
    let mut warm = 0u64;
    while seen < arrivals {
        let total = lambda + departure(n);
        let dt = unit.sample(&mut rng) / total;
        let counting = warm >= warmup;
        if counting {
            time[n] += dt;
            for c in cycles.iter_mut().filter(|c| c.started) {
                c.y[n] += dt;
                c.tau += dt;
            }
        }
        let before = n;
        if rng.random::<f64>() * total < lambda {
            if counting {
                seen += 1;
                if n == m {
                    blocked += 1;
                }
            } else {
                warm += 1;
            }
            if n < m {
                n += 1;
            }
        } else {
            n -= 1;
        }
        if counting && n != before {
            visits[n] += 1;
            cycles[n].close();
        }
    }

    let grand: f64 = time.iter().sum();
    let pi: Vec<f64> = time.iter().map(|t| t / grand).collect();
    let regen = &cycles[(0..=m).max_by(|&a, &b| time[a].total_cmp(&time[b])).unwrap()];
    let sigma = (0..=m)
        .map(|k| {
            let p = pi[k];
            let var = (regen.sum_y2[k] - 2.0 * p * regen.sum_ytau[k] + p * p * regen.sum_tau2).max(0.0);
            let regenerative = var.sqrt() / regen.sum_tau;
            let counting = (2.0 * (visits[k] + 1) as f64).sqrt() / (exit_rate(k) * grand);
            regenerative.max(counting)
        })
        .collect();
    DesEstimate { pi, sigma, arrivals: seen, blocked }
}

/// Random positive rate profile on `m <= 10` servers, loosely shaped like a
/// per-user rate that falls with the number of users.
pub fn random_profile(rng: &mut impl Rng) -> ServiceProfile {
    let m = rng.random_range(1..=10);
    let mut rates = Vec::with_capacity(m);
    let mut r = rng.random_range(5e6..5e7);
    for _ in 0..m {
        rates.push(r);
        r *= rng.random_range(0.6..1.05);
    }
    ServiceProfile::new(rates, rng.random_range(1e6..1e8)).unwrap()
}

pub struct SmallInstance {
    pub coupling: CouplingMatrix,
    pub radio: RadioModel,
    pub m_max: usize,
    pub distributions: Vec<StateDistribution>,
}

/// A 2- or 3-cell network with up to 10 users per cell and random coupling,
/// occupancy and antenna budget.
pub fn small_instance(rng: &mut impl Rng) -> SmallInstance {
    let cells = rng.random_range(2..=3);
    let k = rng.random_range(2..=10);
    let serving: Vec<f64> = (0..cells).map(|_| 1.2e13 * rng.random_range(0.3..3.0)).collect();
    let cross: Vec<Vec<f64>> = (0..cells)
        .map(|c| (0..cells).map(|d| if c == d { 0.0 } else { rng.random_range(0.005..0.4) }).collect())
        .collect();
    let coupling = CouplingMatrix::new(serving, cross).unwrap();
    let rate = RateParams { k_max: k, ..Default::default() };
    let radio = RadioModel::new(rate, PaParams::default(), BasebandCoeffs::default()).unwrap();
    let m_max = k + 1 + rng.random_range(0..150);
    let distributions = (0..cells)
        .map(|_| {
            let ratios: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 + 0.1 * i as f64 * rng.random_range(0.0..1.0))).collect();
            let profile = ServiceProfile::from_ratios(ratios).unwrap();
            steady_state_at_load(&profile, rng.random_range(0.05..2.0 * k as f64)).unwrap()
        })
        .collect();
    SmallInstance { coupling, radio, m_max, distributions }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
