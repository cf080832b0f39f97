//! Scenario orchestration: layout, coupling, dimensioning, queue calibration,
//! per-hour equilibria and the baseline comparison.

pub mod config;
pub mod report;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{build_layout, compute_coupling, CouplingMatrix, GeometryError, NetworkLayout};
use crate::optimizer::{
    dimension_network, expected_antennas, find_equilibrium, AntennaPolicy, DimensioningPoint, DimensioningResult,
    GameContext, GameState, OptimizerError,
};
use crate::queue::{
    calibrate_peak_load, steady_state_at_load, LoadProfile, QueueError, ServiceProfile, StateDistribution,
};
use crate::radio::{RadioError, RadioModel};

pub use config::ScenarioConfig;
pub use report::{
    aggregate, emit_outputs, read_dimensioning, read_states, write_dimensioning, DailyReport, HourRecord, HourSummary,
    Overall, StateRecord,
};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageError,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed state file: {0}")]
    Malformed(String),
}

impl RunError {
    /// Process exit code: 1 config, 2 convergence failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Stage { source: StageError::Optimizer(OptimizerError::NotConverged { .. }), .. } => 2,
            RunError::Stage { .. } => 1,
            RunError::Io(_) | RunError::Csv(_) | RunError::Malformed(_) => 3,
        }
    }
}

fn stage<E: Into<StageError>>(stage: &'static str) -> impl FnOnce(E) -> RunError {
    move |e| RunError::Stage { stage, source: e.into() }
}

/// All-on policy of the reference system: `M(n) = m_max` whenever a user is
/// present; the idle state switches the site off.
pub fn baseline_policy(m_max: usize, m: usize) -> Result<AntennaPolicy, OptimizerError> {
    if m_max < m + 1 {
        return Err(OptimizerError::InfeasibleRange { n_users: m, m_max });
    }
    Ok(AntennaPolicy::constant(m_max, m, 0))
}

/// Offered load per cell and the rate profile it was calibrated with.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub profiles: Vec<ServiceProfile>,
    pub a_max: Vec<f64>,
    pub rounds: usize,
}

/// Stages up to (and including) the peak-load calibration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub layout: NetworkLayout,
    pub coupling: CouplingMatrix,
    pub dimensioning: DimensioningResult,
    pub surface: Vec<DimensioningPoint>,
    pub radio: RadioModel,
    pub calibration: Calibration,
    pub dlp: LoadProfile,
    pub max_sweeps: usize,
}

pub fn dimension(
    cfg: &ScenarioConfig,
) -> Result<(CouplingMatrix, DimensioningResult, Vec<DimensioningPoint>), RunError> {
    cfg.validate()?;
    let layout = build_layout(&cfg.geometry).map_err(stage("build_layout"))?;
    let coupling = compute_coupling(&layout, &cfg.geometry).map_err(stage("compute_coupling"))?;
    let (dim, surface) = dimension_with(cfg, &coupling)?;
    Ok((coupling, dim, surface))
}

fn dimension_with(
    cfg: &ScenarioConfig,
    coupling: &CouplingMatrix,
) -> Result<(DimensioningResult, Vec<DimensioningPoint>), RunError> {
    let radio = cfg.base_radio(cfg.dimensioning.k_values[0], cfg.dimensioning.p_min_w)?;
    dimension_network(&cfg.dimensioning_grid(), coupling, &radio).map_err(stage("dimension_network"))
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared, RunError> {
    cfg.validate()?;
    let dlp = cfg.load_profile()?;
    let layout = build_layout(&cfg.geometry).map_err(stage("build_layout"))?;
    let coupling = compute_coupling(&layout, &cfg.geometry).map_err(stage("compute_coupling"))?;
    let (dimensioning, surface) = dimension_with(cfg, &coupling)?;
    let radio = cfg.base_radio(dimensioning.k_max, dimensioning.p_opt_w)?;
    let calibration = calibrate(cfg, &coupling, &radio, &dimensioning)?;
    Ok(Prepared { layout, coupling, dimensioning, surface, radio, calibration, dlp, max_sweeps: cfg.game.max_sweeps })
}

/// Per-state user rates of every cell under `policies` and the interference
/// implied by `others`.
fn rate_profiles(
    coupling: &CouplingMatrix,
    radio: &RadioModel,
    antennas: impl Fn(usize, usize) -> usize,
    others: &[f64],
    k: usize,
    traffic_bits: f64,
) -> Result<Vec<ServiceProfile>, RunError> {
    (0..coupling.num_cells())
        .map(|c| {
            let rates = (1..=k)
                .map(|n| {
                    let gamma = radio.sinr(coupling, c, n, others)?;
                    radio.user_rate(n, antennas(c, n), gamma)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(stage("calibrate_peak_load"))?;
            ServiceProfile::new(rates, traffic_bits).map_err(stage("calibrate_peak_load"))
        })
        .collect()
}

/// Calibrates the peak offered load. Rates start at the dimensioned
/// operating point (every state on `m_max`, full interference), then are
/// replaced by the rates of the peak-load equilibrium and recalibrated once,
/// or until the offered loads stop moving when `fixed_point_calibration` is set.
pub fn calibrate(
    cfg: &ScenarioConfig,
    coupling: &CouplingMatrix,
    radio: &RadioModel,
    dim: &DimensioningResult,
) -> Result<Calibration, RunError> {
    let k = dim.k_max;
    let target = cfg.queue.blocking_target;
    let traffic = cfg.queue.traffic_per_user_bits;
    let full = vec![dim.m_max as f64; coupling.num_cells()];
    let mut profiles = rate_profiles(coupling, radio, |_, _| dim.m_max, &full, k, traffic)?;
    let calibrate_all = |profiles: &[ServiceProfile]| -> Result<Vec<f64>, RunError> {
        profiles.iter().map(|p| calibrate_peak_load(p, target).map_err(stage("calibrate_peak_load"))).collect()
    };
    let mut a_max = calibrate_all(&profiles)?;

    let rounds = if cfg.queue.fixed_point_calibration { cfg.queue.max_calibration_rounds } else { 1 };
    let mut done = 0;
    for _ in 0..rounds {
        let dists = distributions(&profiles, &a_max, 1.0)?;
        let ctx = GameContext { coupling, radio, m_max: dim.m_max, distributions: &dists, hour: 0 };
        let start = GameState::all_max(&ctx).map_err(stage("calibrate_peak_load"))?;
        let eq = find_equilibrium(start, &ctx, cfg.game.max_sweeps).map_err(stage("calibrate_peak_load"))?;
        profiles = rate_profiles(coupling, radio, |c, n| eq.policies[c].at(n), &eq.expected_antennas, k, traffic)?;
        let next = calibrate_all(&profiles)?;
        let shift = next.iter().zip(&a_max).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        a_max = next;
        done += 1;
        if shift < 1e-12 {
            break;
        }
    }
    Ok(Calibration { profiles, a_max, rounds: done })
}

fn distributions(
    profiles: &[ServiceProfile],
    a_max: &[f64],
    fraction: f64,
) -> Result<Vec<StateDistribution>, RunError> {
    profiles
        .iter()
        .zip(a_max)
        .map(|(p, &a)| steady_state_at_load(p, fraction * a).map_err(stage("hourly_distribution")))
        .collect()
}

/// Per-cell occupancy distributions of `hour`.
pub fn occupancy(prep: &Prepared, hour: usize) -> Result<Vec<StateDistribution>, RunError> {
    let fraction = *prep
        .dlp
        .hourly_fraction
        .get(hour)
        .ok_or_else(|| RunError::Config(format!("hour {hour} outside the load profile")))?;
    distributions(&prep.calibration.profiles, &prep.calibration.a_max, fraction)
}

/// Cell-averaged occupancy distribution.
pub fn network_occupancy(dists: &[StateDistribution]) -> StateDistribution {
    let cells = dists.len().max(1) as f64;
    let states = dists.first().map_or(1, |d| d.pi.len());
    let pi = (0..states).map(|n| dists.iter().map(|d| d.pi[n]).sum::<f64>() / cells).collect();
    let offered_load = dists.iter().map(|d| d.offered_load).sum::<f64>() / cells;
    StateDistribution { pi, offered_load }
}

/// Writes `calibration.csv` (peak offered load and blocking per cell) and one
/// `occupancy_h{h}.csv` per hour (cell-averaged) into `dir`.
pub fn emit_calibration(prep: &Prepared, hours: usize, dir: &std::path::Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    let cal = &prep.calibration;
    let mut w = csv::Writer::from_path(dir.join("calibration.csv"))?;
    w.write_record(["cell", "a_max_erlang", "blocking", "mean_occupancy_users", "rounds"])?;
    let peak = distributions(&cal.profiles, &cal.a_max, 1.0)?;
    for (c, (a, d)) in cal.a_max.iter().zip(&peak).enumerate() {
        w.serialize((c, a, d.blocking(), d.mean_occupancy(), cal.rounds))?;
    }
    w.flush()?;
    for h in 0..hours.min(prep.dlp.hours()) {
        let dist = network_occupancy(&occupancy(prep, h)?);
        std::fs::write(dir.join(format!("occupancy_h{h}.csv")), dist.to_csv())?;
    }
    Ok(())
}

/// Solves one hour: occupancy, equilibrium and the per-state comparison with
/// the baseline.
pub fn run_hour(prep: &Prepared, hour: usize) -> Result<HourRecord, RunError> {
    let fraction = prep.dlp.hourly_fraction.get(hour).copied().unwrap_or(0.0);
    let dists = occupancy(prep, hour)?;
    let m_max = prep.dimensioning.m_max;
    let coupling = &prep.coupling;
    let radio = &prep.radio;
    let ctx = GameContext { coupling, radio, m_max, distributions: &dists, hour };
    let start = GameState::all_max(&ctx).map_err(stage("find_equilibrium"))?;
    let eq = find_equilibrium(start, &ctx, prep.max_sweeps).map_err(stage("find_equilibrium"))?;

    let k = ctx.states();
    let baseline = baseline_policy(m_max, k).map_err(stage("baseline_policy"))?;
    let baseline_others: Vec<f64> = dists
        .iter()
        .map(|d| expected_antennas(&baseline, d))
        .collect::<Result<_, _>>()
        .map_err(stage("baseline_policy"))?;

    let mut states = Vec::with_capacity(coupling.num_cells() * (k + 1));
    for (c, dist) in dists.iter().enumerate() {
        states.push(StateRecord::idle(hour, fraction, dist.offered_load, c, dist.pi[0]));
        for n in 1..=k {
            let eval = |m: usize, others: &[f64]| -> Result<(f64, f64), RunError> {
                let gamma = radio.sinr(coupling, c, n, others).map_err(stage("metrics"))?;
                let rate = radio.user_rate(n, m, gamma).map_err(stage("metrics"))?;
                Ok((rate, radio.power(n, m, rate).total))
            };
            let m = eq.policies[c].at(n);
            let (rate, power) = eval(m, &eq.expected_antennas)?;
            let mb = baseline.at(n);
            let (rate_b, power_b) = eval(mb, &baseline_others)?;
            states.push(StateRecord {
                hour,
                load_fraction: fraction,
                offered_load: dist.offered_load,
                cell: c,
                n,
                pi: dist.pi[n],
                antennas: m,
                rate_bps: rate,
                power_w: power,
                ee_bit_per_j: n as f64 * rate / power,
                baseline_antennas: mb,
                baseline_rate_bps: rate_b,
                baseline_power_w: power_b,
                baseline_ee_bit_per_j: n as f64 * rate_b / power_b,
            });
        }
    }
    Ok(HourRecord { hour, load_fraction: fraction, sweeps: eq.iteration, equilibrium: Some(eq), states })
}

/// Full pipeline for the first `cfg.queue.hours` hours of the load profile.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Prepared, DailyReport), RunError> {
    let prep = prepare(cfg)?;
    let report = run_prepared(&prep, cfg.queue.hours)?;
    Ok((prep, report))
}

pub fn run_prepared(prep: &Prepared, hours: usize) -> Result<DailyReport, RunError> {
    let records =
        (0..hours.min(prep.dlp.hours())).into_par_iter().map(|h| run_hour(prep, h)).collect::<Result<Vec<_>, _>>()?;
    let mut report = aggregate(records)?;
    report.dimensioning = Some(prep.dimensioning);
    report.surface = prep.surface.clone();
    Ok(report)
}
