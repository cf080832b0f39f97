//! State-dependent M/G/m/m loss queue per base station.
//!
//! With `m` servers and a per-user rate `R(n)` that depends on the occupancy,
//! the stationary law only depends on the offered load `a = lambda * s / R(1)`
//! and the rate profile `f(n) = R(n) / R(1)`:
//!
//! ```text
//! pi(n) = a^n / (n! f(1) ... f(n)) * pi(0)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QueueError {
    #[error("invalid service profile: {0}")]
    InvalidProfile(String),
    #[error("invalid load profile: {0}")]
    InvalidLoadProfile(String),
    #[error("target blocking must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
    #[error("offered load must be finite and non-negative, got {0}")]
    InvalidLoad(f64),
    #[error("could not bracket blocking target {target}: blocking {reached} at load {load}")]
    Unbracketed { target: f64, reached: f64, load: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    /// `rates[n - 1]` is the per-user rate in bit/s with `n` users in service.
    pub rates: Vec<f64>,
    /// Bits per user session. Only the ratio to `R(1)` matters.
    pub traffic_per_user_bits: f64,
}

impl ServiceProfile {
    pub fn new(rates: Vec<f64>, traffic_per_user_bits: f64) -> Result<Self, QueueError> {
        if rates.is_empty() {
            return Err(QueueError::InvalidProfile("need at least one server".into()));
        }
        if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
            return Err(QueueError::InvalidProfile(format!("rate for {} users is {r}", i + 1)));
        }
        if !(traffic_per_user_bits > 0.0) {
            return Err(QueueError::InvalidProfile(format!(
                "traffic per user must be positive, got {traffic_per_user_bits}"
            )));
        }
        Ok(Self { rates, traffic_per_user_bits })
    }

    /// Profile whose rate ratios are `f`, with `R(1) = 1` and unit traffic.
    pub fn from_ratios(f: Vec<f64>) -> Result<Self, QueueError> {
        let first = f.first().copied().unwrap_or(1.0);
        Self::new(f.into_iter().map(|x| x / first).collect(), 1.0)
    }

    /// Number of servers `m`.
    pub fn servers(&self) -> usize {
        self.rates.len()
    }

    /// `f(n) = R(n) / R(1)` for `n` in `1..=m`.
    pub fn ratio(&self, n: usize) -> f64 {
        self.rates[n - 1] / self.rates[0]
    }

    /// `a = lambda * s / R(1)`.
    pub fn offered_load(&self, lambda_arrival: f64) -> f64 {
        lambda_arrival * self.traffic_per_user_bits / self.rates[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    /// `pi[n]` for `n` in `0..=m`.
    pub pi: Vec<f64>,
    pub offered_load: f64,
}

impl StateDistribution {
    pub fn servers(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn blocking(&self) -> f64 {
        *self.pi.last().expect("non-empty distribution")
    }

    pub fn idle(&self) -> f64 {
        self.pi[0]
    }

    pub fn mean_occupancy(&self) -> f64 {
        self.pi.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,pi\n");
        for (n, p) in self.pi.iter().enumerate() {
            let _ = writeln!(out, "{n},{p:e}");
        }
        out
    }

    /// Writes `occupancy_h{h}.csv`-style output.
    pub fn write_csv(&self, path: &Path) -> Result<(), QueueError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Stationary distribution for arrival rate `lambda_arrival` (users per unit time).
pub fn steady_state(profile: &ServiceProfile, lambda_arrival: f64) -> Result<StateDistribution, QueueError> {
    if !(lambda_arrival >= 0.0 && lambda_arrival.is_finite()) {
        return Err(QueueError::InvalidLoad(lambda_arrival));
    }
    steady_state_at_load(profile, profile.offered_load(lambda_arrival))
}

/// Stationary distribution for offered load `a`, computed in the log domain.
pub fn steady_state_at_load(profile: &ServiceProfile, offered_load: f64) -> Result<StateDistribution, QueueError> {
    if !(offered_load >= 0.0 && offered_load.is_finite()) {
        return Err(QueueError::InvalidLoad(offered_load));
    }
    let m = profile.servers();
    if offered_load == 0.0 {
        let mut pi = vec![0.0; m + 1];
        pi[0] = 1.0;
        return Ok(StateDistribution { pi, offered_load });
    }
    let ln_a = offered_load.ln();
    let mut log_w = Vec::with_capacity(m + 1);
    log_w.push(0.0);
    for n in 1..=m {
        let prev = log_w[n - 1];
        log_w.push(prev + ln_a - (n as f64).ln() - profile.ratio(n).ln());
    }
    let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|w| (w - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(StateDistribution { pi: weights.iter().map(|w| w / total).collect(), offered_load })
}

/// Offered load at which the full-system probability equals `target_blocking`.
pub fn calibrate_peak_load(profile: &ServiceProfile, target_blocking: f64) -> Result<f64, QueueError> {
    if !(target_blocking > 0.0 && target_blocking < 1.0) {
        return Err(QueueError::InvalidTarget(target_blocking));
    }
    let blocking = |a: f64| steady_state_at_load(profile, a).map(|d| d.blocking());

    let mut lo = 0.0;
    let mut hi = 1.0;
    while blocking(hi)? < target_blocking {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(QueueError::Unbracketed { target: target_blocking, reached: blocking(hi)?, load: hi });
        }
    }
    // blocking is strictly increasing in a
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if blocking(mid)? < target_blocking {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (b_lo, b_hi) = (blocking(lo)?, blocking(hi)?);
    Ok(if (b_lo - target_blocking).abs() <= (b_hi - target_blocking).abs() { lo } else { hi })
}

/// Daily load profile: fraction of peak load per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub hourly_fraction: Vec<f64>,
}

impl LoadProfile {
    pub fn new(hourly_fraction: Vec<f64>) -> Result<Self, QueueError> {
        if hourly_fraction.is_empty() {
            return Err(QueueError::InvalidLoadProfile("no hours".into()));
        }
        if let Some((h, x)) = hourly_fraction.iter().enumerate().find(|(_, x)| !(**x > 0.0 && **x <= 1.0)) {
            return Err(QueueError::InvalidLoadProfile(format!("hour {h}: fraction {x} outside (0, 1]")));
        }
        let peak = hourly_fraction.iter().copied().fold(0.0, f64::max);
        if (peak - 1.0).abs() > 1e-12 {
            return Err(QueueError::InvalidLoadProfile(format!("peak fraction is {peak}, expected 1")));
        }
        Ok(Self { hourly_fraction })
    }

    /// Approximation of the European daily data-traffic curve used by the
    /// EARTH energy model (night trough near 4-5 h, evening peak at 21 h).
    /// The curve is digitised by eye and only approximate.
    pub fn earth_approx() -> Self {
        Self {
            hourly_fraction: vec![
                0.70, 0.52, 0.36, 0.24, 0.16, 0.13, 0.15, 0.22, 0.34, 0.47, 0.57, 0.63, //
                0.67, 0.69, 0.70, 0.71, 0.73, 0.76, 0.81, 0.87, 0.94, 1.00, 0.96, 0.84,
            ],
        }
    }

    /// Smooth synthetic profile between `floor` and 1, peaking at hour 21.
    pub fn sinusoid(hours: usize, floor: f64) -> Result<Self, QueueError> {
        let peak_hour = 21.0 * hours as f64 / 24.0;
        let fractions = (0..hours)
            .map(|h| {
                let phase = 2.0 * std::f64::consts::PI * (h as f64 - peak_hour) / hours as f64;
                floor + (1.0 - floor) * 0.5 * (1.0 + phase.cos())
            })
            .collect();
        Self::new(fractions)
    }

    pub fn hours(&self) -> usize {
        self.hourly_fraction.len()
    }

    /// Parses `hour,fraction` lines. A header line and `#` comments are skipped.
    pub fn parse_csv(text: &str) -> Result<Self, QueueError> {
        let mut fractions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(hour), Some(frac), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(QueueError::InvalidLoadProfile(format!("line {}: expected `hour,fraction`", lineno + 1)));
            };
            if hour.parse::<f64>().is_err() {
                if fractions.is_empty() {
                    continue; // header
                }
                return Err(QueueError::InvalidLoadProfile(format!("line {}: bad hour `{hour}`", lineno + 1)));
            }
            let value: f64 = frac
                .parse()
                .map_err(|_| QueueError::InvalidLoadProfile(format!("line {}: bad fraction `{frac}`", lineno + 1)))?;
            fractions.push(value);
        }
        Self::new(fractions)
    }

    pub fn read_csv(path: &Path) -> Result<Self, QueueError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("hour,fraction\n");
        for (h, x) in self.hourly_fraction.iter().enumerate() {
            let _ = writeln!(out, "{h},{x}");
        }
        out
    }
}

/// Offered load per hour: `a_h = fraction_h * a_max`.
pub fn hourly_arrival_rates(dlp: &LoadProfile, a_max: f64) -> Vec<f64> {
    dlp.hourly_fraction.iter().map(|x| x * a_max).collect()
}
