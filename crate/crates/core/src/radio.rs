//! Per-user downlink rate under zero-forcing, the power-amplifier law, and the
//! affine base-station power model `P = C0 + C1 * M`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CouplingMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("invalid radio parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("state must serve at least one user")]
    ZeroUsers,
    #[error("{antennas} antennas cannot serve {users} users")]
    TooFewAntennas { users: usize, antennas: usize },
    #[error("cell {index} out of range for {num_cells} cells")]
    CellOutOfRange { index: usize, num_cells: usize },
    #[error("expected antenna vector has {got} entries, network has {expected} cells")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mean power {power_w} W exceeds PA maximum {max_w} W")]
    AbovePaMaximum { power_w: f64, max_w: f64 },
    #[error("mean power {power_w} W violates the {backoff_db} dB PAPR backoff (limit {limit_w} W)")]
    BackoffViolated { power_w: f64, limit_w: f64, backoff_db: f64 },
}

/// Dedicated error constructor for parameter checks.
fn invalid(field: &'static str, reason: impl Into<String>) -> RadioError {
    RadioError::InvalidParam { field, reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub bandwidth_hz: f64,
    pub coherence_symbols: f64,
    /// Pilot overhead in symbols; the network-wide maximum user count.
    pub k_max: usize,
    /// Total noise power over the band, in W.
    pub noise_power_w: f64,
    pub tx_power_per_antenna_w: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            coherence_symbols: 1800.0,
            k_max: 93,
            noise_power_w: dbm_to_watt(-96.0),
            tx_power_per_antenna_w: 0.098,
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl RateParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(invalid("bandwidth_hz", format!("must be positive, got {}", self.bandwidth_hz)));
        }
        if !(self.k_max > 0 && (self.k_max as f64) < self.coherence_symbols) {
            return Err(invalid(
                "k_max",
                format!("need 0 < k_max < coherence_symbols, got {} vs {}", self.k_max, self.coherence_symbols),
            ));
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return Err(invalid("noise_power_w", format!("must be positive, got {}", self.noise_power_w)));
        }
        if !(self.tx_power_per_antenna_w > 0.0 && self.tx_power_per_antenna_w.is_finite()) {
            return Err(invalid(
                "tx_power_per_antenna_w",
                format!("must be positive, got {}", self.tx_power_per_antenna_w),
            ));
        }
        Ok(())
    }

    /// Fraction of the coherence block left for data after pilots.
    pub fn overhead_factor(&self) -> f64 {
        1.0 - self.k_max as f64 / self.coherence_symbols
    }

    /// `overhead * B / ln 2`, the prefactor of the natural-log rate form.
    pub fn beta(&self) -> f64 {
        self.overhead_factor() * self.bandwidth_hz / LN_2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaParams {
    pub max_efficiency: f64,
    pub max_output_power_w: f64,
    pub papr_backoff_db: f64,
    /// Reject mean powers above the backoff limit instead of accepting them.
    pub enforce_backoff: bool,
}

impl Default for PaParams {
    fn default() -> Self {
        Self {
            max_efficiency: 0.8,
            max_output_power_w: 0.098 * 10f64.powf(0.8),
            papr_backoff_db: 8.0,
            enforce_backoff: true,
        }
    }
}

impl PaParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !(self.max_efficiency > 0.0 && self.max_efficiency <= 1.0) {
            return Err(invalid("max_efficiency", format!("must be in (0, 1], got {}", self.max_efficiency)));
        }
        if !(self.max_output_power_w > 0.0 && self.max_output_power_w.is_finite()) {
            return Err(invalid("max_output_power_w", format!("must be positive, got {}", self.max_output_power_w)));
        }
        if !(self.papr_backoff_db >= 0.0) {
            return Err(invalid("papr_backoff_db", format!("must be non-negative, got {}", self.papr_backoff_db)));
        }
        Ok(())
    }

    /// Largest mean power compatible with the PAPR headroom.
    pub fn backoff_limit_w(&self) -> f64 {
        self.max_output_power_w / 10f64.powf(self.papr_backoff_db / 10.0)
    }
}

/// PA input power needed for mean output `mean_power_w`.
pub fn pa_power(mean_power_w: f64, pa: &PaParams) -> Result<f64, RadioError> {
    if !(mean_power_w >= 0.0) {
        return Err(invalid("mean_power_w", format!("must be non-negative, got {mean_power_w}")));
    }
    if mean_power_w > pa.max_output_power_w {
        return Err(RadioError::AbovePaMaximum { power_w: mean_power_w, max_w: pa.max_output_power_w });
    }
    let limit = pa.backoff_limit_w();
    // relative slack so that p == P_max / 10^(backoff/10) round-trips
    if pa.enforce_backoff && mean_power_w > limit * (1.0 + 1e-12) {
        return Err(RadioError::BackoffViolated {
            power_w: mean_power_w,
            limit_w: limit,
            backoff_db: pa.papr_backoff_db,
        });
    }
    Ok((mean_power_w * pa.max_output_power_w).sqrt() / pa.max_efficiency)
}

/// How the ZF Gram-matrix cost (`M K^2` flops) is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GramCost {
    /// Once per coherence block: `C_{1,2} = 3B / (T_c L_BS)`.
    #[default]
    PerCoherenceBlock,
    /// Every symbol: `C_{1,2} = 3B / L_BS`.
    PerSymbol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasebandCoeffs {
    pub p_syn_w: f64,
    pub p_bs_w: f64,
    pub p_oth_w: f64,
    /// Coding power in W per bit/s.
    pub p_cod_w_per_bps: f64,
    pub p_dec_w_per_bps: f64,
    pub l_bs_flops_per_w: f64,
    pub gram_cost: GramCost,
}

impl Default for BasebandCoeffs {
    fn default() -> Self {
        Self {
            p_syn_w: 2.0,
            p_bs_w: 1.0,
            p_oth_w: 18.0,
            p_cod_w_per_bps: 0.1e-9,
            p_dec_w_per_bps: 0.8e-9,
            l_bs_flops_per_w: 12.8e9,
            gram_cost: GramCost::PerCoherenceBlock,
        }
    }
}

impl BasebandCoeffs {
    pub fn validate(&self) -> Result<(), RadioError> {
        let fields = [
            ("p_syn_w", self.p_syn_w),
            ("p_bs_w", self.p_bs_w),
            ("p_oth_w", self.p_oth_w),
            ("p_cod_w_per_bps", self.p_cod_w_per_bps),
            ("p_dec_w_per_bps", self.p_dec_w_per_bps),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if !(self.l_bs_flops_per_w > 0.0) {
            return Err(invalid("l_bs_flops_per_w", format!("must be positive, got {}", self.l_bs_flops_per_w)));
        }
        Ok(())
    }

    /// `A = P_COD + P_DEC`, W per bit/s.
    pub fn coding_coeff(&self) -> f64 {
        self.p_cod_w_per_bps + self.p_dec_w_per_bps
    }

    /// `[C_{0,0}, C_{0,1}, C_{0,2}, C_{0,3}]`
    pub fn c0_coeffs(&self, rate: &RateParams) -> [f64; 4] {
        let b = rate.bandwidth_hz;
        let tc = rate.coherence_symbols;
        [self.p_syn_w, 0.0, 0.0, b / (3.0 * tc * self.l_bs_flops_per_w)]
    }

    /// `[C_{1,0}, C_{1,1}, C_{1,2}]`
    pub fn c1_coeffs(&self, rate: &RateParams) -> [f64; 3] {
        let b = rate.bandwidth_hz;
        let tc = rate.coherence_symbols;
        let l = self.l_bs_flops_per_w;
        let gram = match self.gram_cost {
            GramCost::PerCoherenceBlock => 3.0 * b / (tc * l),
            GramCost::PerSymbol => 3.0 * b / l,
        };
        [self.p_bs_w, b / l * (2.0 + 1.0 / tc), gram]
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Average per-user SINR when the cell uses a single antenna.
pub fn single_antenna_sinr(
    coupling: &CouplingMatrix,
    cell: usize,
    n_users: usize,
    rate: &RateParams,
    expected_antennas_others: &[f64],
) -> Result<f64, RadioError> {
    let num_cells = coupling.num_cells();
    if cell >= num_cells {
        return Err(RadioError::CellOutOfRange { index: cell, num_cells });
    }
    if expected_antennas_others.len() != num_cells {
        return Err(RadioError::DimensionMismatch { expected: num_cells, got: expected_antennas_others.len() });
    }
    if n_users == 0 {
        return Err(RadioError::ZeroUsers);
    }
    let p = rate.tx_power_per_antenna_w;
    let interference = interference_term(coupling, cell, p, expected_antennas_others);
    let noise = coupling.lambda_serving[cell] * rate.noise_power_w;
    Ok(p / n_users as f64 / (noise + interference))
}

/// `sum_{d != c} lambda_cd * p * M_d`, accumulated in cell-index order.
fn interference_term(coupling: &CouplingMatrix, cell: usize, p: f64, antennas: &[f64]) -> f64 {
    coupling.lambda_cross[cell]
        .iter()
        .zip(antennas)
        .enumerate()
        .filter(|&(d, _)| d != cell)
        .map(|(_, (&lambda, &m))| lambda * p * m)
        .sum()
}

/// Average rate per user with `m_antennas` serving `n_users`.
pub fn user_rate(n_users: usize, m_antennas: usize, gamma1: f64, rate: &RateParams) -> Result<f64, RadioError> {
    if n_users == 0 {
        return Err(RadioError::ZeroUsers);
    }
    if m_antennas < n_users {
        return Err(RadioError::TooFewAntennas { users: n_users, antennas: m_antennas });
    }
    let m = m_antennas as f64;
    let sinr = gamma1 * (m * m - n_users as f64 * m);
    Ok(rate.overhead_factor() * rate.bandwidth_hz * sinr.ln_1p() / LN_2)
}

/// Rate evaluated straight from the channel statistics, without going through
/// the single-antenna SINR.
pub fn average_user_rate(
    coupling: &CouplingMatrix,
    cell: usize,
    n_users: usize,
    m_antennas: usize,
    rate: &RateParams,
    expected_antennas_others: &[f64],
) -> Result<f64, RadioError> {
    if n_users == 0 {
        return Err(RadioError::ZeroUsers);
    }
    if m_antennas < n_users {
        return Err(RadioError::TooFewAntennas { users: n_users, antennas: m_antennas });
    }
    if cell >= coupling.num_cells() {
        return Err(RadioError::CellOutOfRange { index: cell, num_cells: coupling.num_cells() });
    }
    let p = rate.tx_power_per_antenna_w;
    let (k, m) = (n_users as f64, m_antennas as f64);
    let signal = p * (m / k) * (m - k);
    let denom = coupling.lambda_serving[cell] * rate.noise_power_w
        + interference_term(coupling, cell, p, expected_antennas_others);
    Ok(rate.bandwidth_hz * (1.0 - rate.k_max as f64 / rate.coherence_symbols) * (1.0 + signal / denom).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    /// Antenna-independent part, W.
    pub c0: f64,
    /// Per-antenna part, W.
    pub c1: f64,
    pub total: f64,
}

/// Total BS power `C0 + C1 * M` with the coding term evaluated at `rate_bps`.
pub fn total_power(
    n_users: usize,
    m_antennas: usize,
    rate_bps: f64,
    pa: &PaParams,
    bb: &BasebandCoeffs,
    rate: &RateParams,
) -> Result<PowerBreakdown, RadioError> {
    let pa_w = pa_power(rate.tx_power_per_antenna_w, pa)?;
    Ok(power_with_pa(n_users, m_antennas, rate_bps, pa_w, bb, rate))
}

fn power_with_pa(
    n_users: usize,
    m_antennas: usize,
    rate_bps: f64,
    pa_w: f64,
    bb: &BasebandCoeffs,
    rate: &RateParams,
) -> PowerBreakdown {
    let n = n_users as f64;
    let c0 = bb.coding_coeff() * n * rate_bps + poly(&bb.c0_coeffs(rate), n) + bb.p_oth_w;
    let c1 = poly(&bb.c1_coeffs(rate), n) + pa_w;
    PowerBreakdown { c0, c1, total: c0 + c1 * m_antennas as f64 }
}

/// Bits per Joule of a cell serving `n_users` with `m_antennas`.
pub fn energy_efficiency(
    n_users: usize,
    m_antennas: usize,
    gamma1: f64,
    rate: &RateParams,
    pa: &PaParams,
    bb: &BasebandCoeffs,
) -> Result<f64, RadioError> {
    RadioModel::new(rate.clone(), pa.clone(), bb.clone())?.energy_efficiency(n_users, m_antennas, gamma1)
}

/// Validated bundle of the rate and power parameters, with the PA input power
/// cached. The optimizer evaluates millions of candidate points through this.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioModel {
    pub rate: RateParams,
    pub pa: PaParams,
    pub baseband: BasebandCoeffs,
    pa_input_w: f64,
    c0_poly: [f64; 4],
    c1_poly: [f64; 3],
}

impl RadioModel {
    pub fn new(rate: RateParams, pa: PaParams, baseband: BasebandCoeffs) -> Result<Self, RadioError> {
        rate.validate()?;
        pa.validate()?;
        baseband.validate()?;
        let pa_input_w = pa_power(rate.tx_power_per_antenna_w, &pa)?;
        let c0_poly = baseband.c0_coeffs(&rate);
        let c1_poly = baseband.c1_coeffs(&rate);
        Ok(Self { rate, pa, baseband, pa_input_w, c0_poly, c1_poly })
    }

    /// Same model with a different per-antenna transmit power.
    pub fn with_tx_power(&self, p: f64) -> Result<Self, RadioError> {
        let rate = RateParams { tx_power_per_antenna_w: p, ..self.rate.clone() };
        Self::new(rate, self.pa.clone(), self.baseband.clone())
    }

    pub fn with_k_max(&self, k_max: usize) -> Result<Self, RadioError> {
        let rate = RateParams { k_max, ..self.rate.clone() };
        Self::new(rate, self.pa.clone(), self.baseband.clone())
    }

    pub fn pa_input_w(&self) -> f64 {
        self.pa_input_w
    }

    pub fn sinr(
        &self,
        coupling: &CouplingMatrix,
        cell: usize,
        n_users: usize,
        others: &[f64],
    ) -> Result<f64, RadioError> {
        single_antenna_sinr(coupling, cell, n_users, &self.rate, others)
    }

    pub fn user_rate(&self, n_users: usize, m_antennas: usize, gamma1: f64) -> Result<f64, RadioError> {
        user_rate(n_users, m_antennas, gamma1, &self.rate)
    }

    pub fn power(&self, n_users: usize, m_antennas: usize, rate_bps: f64) -> PowerBreakdown {
        let n = n_users as f64;
        let c0 = self.baseband.coding_coeff() * n * rate_bps + poly(&self.c0_poly, n) + self.baseband.p_oth_w;
        let c1 = poly(&self.c1_poly, n) + self.pa_input_w;
        PowerBreakdown { c0, c1, total: c0 + c1 * m_antennas as f64 }
    }

    pub fn energy_efficiency(&self, n_users: usize, m_antennas: usize, gamma1: f64) -> Result<f64, RadioError> {
        if n_users == 0 {
            return Err(RadioError::ZeroUsers);
        }
        if m_antennas < n_users + 1 {
            return Err(RadioError::TooFewAntennas { users: n_users, antennas: m_antennas });
        }
        Ok(self.ee_unchecked(n_users, m_antennas, gamma1))
    }

    /// EE without range checks; callers guarantee `m > n >= 1`.
    pub(crate) fn ee_unchecked(&self, n_users: usize, m_antennas: usize, gamma1: f64) -> f64 {
        let (n, m) = (n_users as f64, m_antennas as f64);
        let r = self.rate.overhead_factor() * self.rate.bandwidth_hz * (gamma1 * (m * m - n * m)).ln_1p() / LN_2;
        let p = self.power(n_users, m_antennas, r);
        n * r / p.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_cell(lambda: f64) -> CouplingMatrix {
        CouplingMatrix::new(vec![lambda], vec![vec![0.0]]).unwrap()
    }

    fn reference_model() -> RadioModel {
        RadioModel::new(RateParams::default(), PaParams::default(), BasebandCoeffs::default()).unwrap()
    }

    #[test]
    fn sinr_without_interference() {
        let rate = RateParams::default();
        let g = single_antenna_sinr(&one_cell(1e13), 0, 1, &rate, &[0.0]).unwrap();
        let expected = rate.tx_power_per_antenna_w / (1e13 * rate.noise_power_w);
        assert!((g / expected - 1.0).abs() < 1e-14);
        assert_eq!(single_antenna_sinr(&one_cell(1e13), 0, 0, &rate, &[0.0]), Err(RadioError::ZeroUsers));
    }

    #[test]
    fn sinr_decreases_with_interference() {
        let c = CouplingMatrix::new(vec![1e13, 1e13], vec![vec![0.0, 0.05], vec![0.05, 0.0]]).unwrap();
        let rate = RateParams::default();
        let a = single_antenna_sinr(&c, 0, 3, &rate, &[0.0, 50.0]).unwrap();
        let b = single_antenna_sinr(&c, 0, 3, &rate, &[0.0, 100.0]).unwrap();
        assert!(b < a);
        // own entry of the antenna vector is ignored
        let c2 = single_antenna_sinr(&c, 0, 3, &rate, &[999.0, 100.0]).unwrap();
        assert_eq!(b, c2);
    }

    #[test]
    fn rate_at_boundary_and_overhead() {
        let rate = RateParams::default();
        assert_eq!(user_rate(10, 10, 0.3, &rate).unwrap(), 0.0);
        assert!((rate.overhead_factor() - (1.0 - 93.0 / 1800.0)).abs() < 1e-15);
        assert!((rate.overhead_factor() - 0.948_333_333_333_333_3).abs() < 1e-15);
        assert!(user_rate(10, 22, 0.01, &rate).unwrap() > user_rate(10, 21, 0.01, &rate).unwrap());
        assert_eq!(user_rate(10, 9, 0.01, &rate), Err(RadioError::TooFewAntennas { users: 10, antennas: 9 }));
    }

    #[test]
    fn pa_law() {
        let pa = PaParams::default();
        assert_eq!(pa_power(0.0, &pa).unwrap(), 0.0);
        let lax = PaParams { enforce_backoff: false, ..pa.clone() };
        let full = pa_power(lax.max_output_power_w, &lax).unwrap();
        assert!((full - lax.max_output_power_w / 0.8).abs() < 1e-12);
        let custom = PaParams { max_output_power_w: 0.618, enforce_backoff: false, ..pa.clone() };
        let v = pa_power(0.098, &custom).unwrap();
        assert!((v - (0.098f64 * 0.618).sqrt() / 0.8).abs() < 1e-15);
        assert!((v - 0.3076).abs() < 5e-4);
        assert!(matches!(pa_power(0.099, &pa), Err(RadioError::BackoffViolated { .. })));
        assert!(matches!(pa_power(1.0, &lax), Err(RadioError::AbovePaMaximum { .. })));
        // the default maximum accommodates exactly 0.098 W
        assert!(pa_power(0.098, &pa).is_ok());
        assert!((pa.max_output_power_w - 0.618_4).abs() < 1e-3);
    }

    #[test]
    fn pa_law_is_concave() {
        let pa = PaParams { enforce_backoff: false, ..Default::default() };
        let h = 1e-4;
        for i in 1..50 {
            let p = i as f64 * 0.01;
            let second =
                pa_power(p + h, &pa).unwrap() - 2.0 * pa_power(p, &pa).unwrap() + pa_power(p - h, &pa).unwrap();
            assert!(second <= 0.0, "p={p}: {second}");
        }
    }

    #[test]
    fn coefficient_values() {
        let rate = RateParams::default();
        let bb = BasebandCoeffs::default();
        let c0 = bb.c0_coeffs(&rate);
        assert_eq!(c0[0], 2.0);
        assert_eq!(c0[1], 0.0);
        assert_eq!(c0[2], 0.0);
        assert!((c0[3] - 20e6 / (3.0 * 1800.0 * 12.8e9)).abs() < 1e-20);
        assert!((c0[3] - 2.894e-7).abs() < 1e-10);
        let c1 = bb.c1_coeffs(&rate);
        assert_eq!(c1[0], 1.0);
        assert!((c1[1] - 20e6 / 12.8e9 * (2.0 + 1.0 / 1800.0)).abs() < 1e-18);
        assert!((c1[2] - 3.0 * 20e6 / (1800.0 * 12.8e9)).abs() < 1e-18);
        let literal = BasebandCoeffs { gram_cost: GramCost::PerSymbol, ..bb.clone() };
        assert!((literal.c1_coeffs(&rate)[2] - 3.0 * 20e6 / 12.8e9).abs() < 1e-15);
        assert!((bb.coding_coeff() - 0.9e-9).abs() < 1e-24);
    }

    #[test]
    fn idle_floor_and_affinity() {
        let rate = RateParams::default();
        let pa = PaParams::default();
        let bb = BasebandCoeffs::default();
        let idle = total_power(0, 0, 0.0, &pa, &bb, &rate).unwrap();
        assert_eq!(idle.total, 2.0 + 18.0);
        let a = total_power(12, 40, 3e7, &pa, &bb, &rate).unwrap();
        let b = total_power(12, 41, 3e7, &pa, &bb, &rate).unwrap();
        assert!(((b.total - a.total) - a.c1).abs() < 1e-12);
        assert!(b.total > a.total && a.total > 0.0);
        assert!((a.total - (a.c0 + 40.0 * a.c1)).abs() < 1e-12);
    }

    #[test]
    fn ee_composes_rate_and_power() {
        let model = reference_model();
        let gamma = single_antenna_sinr(&one_cell(1.19e13), 0, 1, &model.rate, &[0.0]).unwrap();
        let ee = model.energy_efficiency(1, 2, gamma).unwrap();
        let r = user_rate(1, 2, gamma, &model.rate).unwrap();
        let p = total_power(1, 2, r, &model.pa, &model.baseband, &model.rate).unwrap();
        assert!((ee / (r / p.total) - 1.0).abs() < 1e-12);
        let free = energy_efficiency(1, 2, gamma, &model.rate, &model.pa, &model.baseband).unwrap();
        assert_eq!(ee, free);
        assert!(model.energy_efficiency(5, 5, gamma).is_err());
    }

    #[test]
    fn doubling_bandwidth_keeps_argmax_close() {
        let model = reference_model();
        let wide = RadioModel::new(
            RateParams { bandwidth_hz: 40e6, ..model.rate.clone() },
            model.pa.clone(),
            model.baseband.clone(),
        )
        .unwrap();
        let argmax = |m: &RadioModel, n: usize, g: f64| {
            (n + 1..=600).max_by(|&a, &b| m.ee_unchecked(n, a, g).total_cmp(&m.ee_unchecked(n, b, g))).unwrap()
        };
        for &(n, g) in &[(5usize, 0.01), (40, 0.0007), (93, 0.0001)] {
            let (a, b) = (argmax(&model, n, g), argmax(&wide, n, g));
            // B also scales the processing power, so the optimum may move
            println!("n={n} gamma={g}: argmax {a} at 20 MHz, {b} at 40 MHz");
            assert!(a > n && b > n);
        }
    }

    proptest! {
        #[test]
        fn rate_forms_agree(n in 1usize..150, extra in 0usize..400, gamma in 1e-6f64..1.0) {
            let rate = RateParams::default();
            let m = n + extra;
            let via_log2 = user_rate(n, m, gamma, &rate).unwrap();
            let (nf, mf) = (n as f64, m as f64);
            let via_beta = rate.beta() * (1.0 - nf * mf * gamma + gamma * mf * mf).ln();
            prop_assert!((via_log2 - via_beta).abs() <= 1e-12 * via_log2.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn direct_rate_matches_sinr_route(n in 1usize..100, extra in 0usize..300, m_other in 0.0f64..400.0) {
            let c = CouplingMatrix::new(vec![1.2e13, 1.1e13], vec![vec![0.0, 0.07], vec![0.06, 0.0]]).unwrap();
            let rate = RateParams::default();
            let others = [0.0, m_other];
            let g = single_antenna_sinr(&c, 0, n, &rate, &others).unwrap();
            let a = user_rate(n, n + extra, g, &rate).unwrap();
            let b = average_user_rate(&c, 0, n, n + extra, &rate, &others).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn ee_positive_at_minimum_antennas(n in 1usize..200, gamma in 1e-7f64..1.0) {
            let model = reference_model();
            let ee = model.energy_efficiency(n, n + 1, gamma).unwrap();
            prop_assert!(ee > 0.0 && ee.is_finite());
        }

        #[test]
        fn power_strictly_increasing_in_antennas(n in 0usize..200, m in 0usize..1000, r in 0.0f64..1e9) {
            let model = reference_model();
            prop_assert!(model.power(n, m + 1, r).total > model.power(n, m, r).total);
        }
    }
}
