//! Hourly aggregation, the 24-hour comparison against the baseline, and the
//! CSV files the figures are drawn from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::optimizer::{DimensioningPoint, DimensioningResult, GameState};

use super::RunError;

/// One user state of one cell in one hour, adaptive and baseline side by side.
/// The idle state (`n = 0`) has the site switched off in both systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub hour: usize,
    pub load_fraction: f64,
    pub offered_load: f64,
    pub cell: usize,
    pub n: usize,
    pub pi: f64,
    pub antennas: usize,
    pub rate_bps: f64,
    pub power_w: f64,
    pub ee_bit_per_j: f64,
    pub baseline_antennas: usize,
    pub baseline_rate_bps: f64,
    pub baseline_power_w: f64,
    pub baseline_ee_bit_per_j: f64,
}

impl StateRecord {
    pub fn idle(hour: usize, load_fraction: f64, offered_load: f64, cell: usize, pi: f64) -> Self {
        Self {
            hour,
            load_fraction,
            offered_load,
            cell,
            n: 0,
            pi,
            antennas: 0,
            rate_bps: 0.0,
            power_w: 0.0,
            ee_bit_per_j: 0.0,
            baseline_antennas: 0,
            baseline_rate_bps: 0.0,
            baseline_power_w: 0.0,
            baseline_ee_bit_per_j: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourRecord {
    pub hour: usize,
    pub load_fraction: f64,
    pub sweeps: usize,
    /// Present when the record was produced by a run rather than read back.
    pub equilibrium: Option<GameState>,
    pub states: Vec<StateRecord>,
}

/// Network-level metrics of one hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourSummary {
    pub hour: usize,
    pub load_fraction: f64,
    /// Mean occupancy over `K_max`, averaged across cells.
    pub occupancy_fraction: f64,
    pub sweeps: usize,
    /// Served-user-weighted rate `sum pi n R / sum pi n`.
    pub avg_rate_bps: f64,
    pub avg_rate_baseline_bps: f64,
    /// State-weighted rate `sum pi R` over busy states, cell-averaged.
    pub state_avg_rate_bps: f64,
    pub state_avg_rate_baseline_bps: f64,
    /// `sum_n pi(n) EE(n)`, cell-averaged.
    pub avg_ee_bit_per_j: f64,
    pub avg_ee_baseline_bit_per_j: f64,
    pub ee_gain: f64,
    pub rate_ratio: f64,
    /// Expected bit/s and W summed over cells.
    pub throughput_bps: f64,
    pub power_w: f64,
    pub throughput_baseline_bps: f64,
    pub power_baseline_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overall {
    pub hours: usize,
    /// Total bits over total Joules across the day.
    pub ee_bit_per_j: f64,
    pub ee_baseline_bit_per_j: f64,
    pub ee_gain: f64,
    /// Mean of the hourly gains, for comparison.
    pub mean_hourly_ee_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyReport {
    pub records: Vec<HourRecord>,
    pub summaries: Vec<HourSummary>,
    pub overall: Overall,
    pub dimensioning: Option<DimensioningResult>,
    pub surface: Vec<DimensioningPoint>,
}

fn summarize(record: &HourRecord) -> Result<HourSummary, RunError> {
    let mut cells: BTreeMap<usize, Vec<&StateRecord>> = BTreeMap::new();
    for s in &record.states {
        cells.entry(s.cell).or_default().push(s);
    }
    if cells.is_empty() {
        return Err(RunError::Malformed(format!("hour {} has no states", record.hour)));
    }
    let num_cells = cells.len() as f64;
    let k_max = record.states.iter().map(|s| s.n).max().unwrap_or(0).max(1) as f64;

    let mut acc = [0.0f64; 12];
    for states in cells.values() {
        let mut ee = 0.0;
        let mut ee_b = 0.0;
        let mut occupancy = 0.0;
        let mut state_rate = 0.0;
        let mut state_rate_b = 0.0;
        for s in states.iter().filter(|s| s.n > 0) {
            let n = s.n as f64;
            ee += s.pi * s.ee_bit_per_j;
            ee_b += s.pi * s.baseline_ee_bit_per_j;
            occupancy += s.pi * n;
            state_rate += s.pi * s.rate_bps;
            state_rate_b += s.pi * s.baseline_rate_bps;
            acc[0] += s.pi * n * s.rate_bps;
            acc[1] += s.pi * n * s.baseline_rate_bps;
            acc[2] += s.pi * n;
            acc[3] += s.pi * s.power_w;
            acc[4] += s.pi * s.baseline_power_w;
        }
        acc[5] += ee;
        acc[6] += ee_b;
        acc[7] += occupancy / k_max;
        acc[8] += state_rate;
        acc[9] += state_rate_b;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let avg_rate = ratio(acc[0], acc[2]);
    let avg_rate_b = ratio(acc[1], acc[2]);
    let avg_ee = acc[5] / num_cells;
    let avg_ee_b = acc[6] / num_cells;
    Ok(HourSummary {
        hour: record.hour,
        load_fraction: record.load_fraction,
        occupancy_fraction: acc[7] / num_cells,
        sweeps: record.sweeps,
        avg_rate_bps: avg_rate,
        avg_rate_baseline_bps: avg_rate_b,
        state_avg_rate_bps: acc[8] / num_cells,
        state_avg_rate_baseline_bps: acc[9] / num_cells,
        avg_ee_bit_per_j: avg_ee,
        avg_ee_baseline_bit_per_j: avg_ee_b,
        ee_gain: if avg_ee_b > 0.0 { avg_ee / avg_ee_b - 1.0 } else { 0.0 },
        rate_ratio: ratio(avg_rate, avg_rate_b),
        throughput_bps: acc[0],
        power_w: acc[3],
        throughput_baseline_bps: acc[1],
        power_baseline_w: acc[4],
    })
}

/// Builds hourly summaries and the whole-day comparison from per-state records.
pub fn aggregate(mut records: Vec<HourRecord>) -> Result<DailyReport, RunError> {
    records.sort_by_key(|r| r.hour);
    let summaries = records.iter().map(summarize).collect::<Result<Vec<_>, _>>()?;
    let bits: f64 = summaries.iter().map(|s| s.throughput_bps).sum();
    let joules: f64 = summaries.iter().map(|s| s.power_w).sum();
    let bits_b: f64 = summaries.iter().map(|s| s.throughput_baseline_bps).sum();
    let joules_b: f64 = summaries.iter().map(|s| s.power_baseline_w).sum();
    let div = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let ee = div(bits, joules);
    let ee_b = div(bits_b, joules_b);
    let overall = Overall {
        hours: summaries.len(),
        ee_bit_per_j: ee,
        ee_baseline_bit_per_j: ee_b,
        ee_gain: if ee_b > 0.0 { ee / ee_b - 1.0 } else { 0.0 },
        mean_hourly_ee_gain: div(summaries.iter().map(|s| s.ee_gain).sum(), summaries.len() as f64),
    };
    Ok(DailyReport { records, summaries, overall, dimensioning: None, surface: Vec::new() })
}

fn write_rows<S: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = S>) -> Result<(), RunError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

const STATE_HEADER: [&str; 14] = [
    "hour",
    "load_fraction",
    "offered_load",
    "cell",
    "n",
    "pi",
    "antennas",
    "rate_bps",
    "power_w",
    "ee_bit_per_j",
    "baseline_antennas",
    "baseline_rate_bps",
    "baseline_power_w",
    "baseline_ee_bit_per_j",
];

/// Writes every report file into `dir` and returns the paths written.
pub fn emit_outputs(report: &DailyReport, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut out = |name: String| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    write_rows(
        &out("report.csv".into()),
        &[
            "hour",
            "load_fraction",
            "occupancy_fraction",
            "sweeps",
            "avg_rate_bps",
            "avg_rate_baseline_bps",
            "state_avg_rate_bps",
            "state_avg_rate_baseline_bps",
            "avg_ee_bit_per_j",
            "avg_ee_baseline_bit_per_j",
            "ee_gain",
            "rate_ratio",
            "throughput_bps",
            "power_w",
            "throughput_baseline_bps",
            "power_baseline_w",
        ],
        &report.summaries,
    )?;

    let o = &report.overall;
    write_rows(
        &out("summary.csv".into()),
        &["metric", "value"],
        [
            ("hours", o.hours as f64),
            ("ee_bit_per_j", o.ee_bit_per_j),
            ("ee_baseline_bit_per_j", o.ee_baseline_bit_per_j),
            ("ee_gain", o.ee_gain),
            ("mean_hourly_ee_gain", o.mean_hourly_ee_gain),
        ]
        .into_iter()
        .chain(report.dimensioning.iter().flat_map(|d| {
            [
                ("k_max", d.k_max as f64),
                ("m_max", d.m_max as f64),
                ("p_opt_w", d.p_opt_w),
                ("peak_ee_bit_per_j", d.peak_ee),
            ]
        })),
    )?;

    for r in &report.records {
        write_rows(&out(format!("states_h{}.csv", r.hour)), &STATE_HEADER, &r.states)?;
        write_rows(
            &out(format!("policy_h{}.csv", r.hour)),
            &["cell", "n", "M"],
            r.states.iter().filter(|s| s.n > 0).map(|s| (s.cell, s.n, s.antennas)),
        )?;
    }

    write_rows(
        &out("fig2.csv".into()),
        &["hour", "load_fraction", "cell", "n", "antennas", "baseline_antennas"],
        report
            .records
            .iter()
            .flat_map(|r| r.states.iter())
            .filter(|s| s.cell == 0 && s.n > 0)
            .map(|s| (s.hour, s.load_fraction, s.cell, s.n, s.antennas, s.baseline_antennas)),
    )?;
    write_rows(
        &out("fig3.csv".into()),
        &[
            "hour",
            "load_fraction",
            "occupancy_fraction",
            "avg_rate_bps",
            "avg_rate_baseline_bps",
            "state_avg_rate_bps",
            "state_avg_rate_baseline_bps",
        ],
        report.summaries.iter().map(|s| {
            (
                s.hour,
                s.load_fraction,
                s.occupancy_fraction,
                s.avg_rate_bps,
                s.avg_rate_baseline_bps,
                s.state_avg_rate_bps,
                s.state_avg_rate_baseline_bps,
            )
        }),
    )?;
    write_rows(
        &out("fig4.csv".into()),
        &["hour", "load_fraction", "occupancy_fraction", "ee_gain"],
        report.summaries.iter().map(|s| (s.hour, s.load_fraction, s.occupancy_fraction, s.ee_gain)),
    )?;
    write_rows(
        &out("fig5.csv".into()),
        &["hour", "load_fraction", "ee_gain", "rate_ratio"],
        report.summaries.iter().map(|s| (s.hour, s.load_fraction, s.ee_gain, s.rate_ratio)),
    )?;
    if !report.surface.is_empty() {
        write_dimensioning(&report.surface, &out("dimensioning.csv".into()))?;
    }
    Ok(written)
}

pub fn write_dimensioning(surface: &[DimensioningPoint], path: &Path) -> Result<(), RunError> {
    write_rows(path, &["K", "M", "p_w", "EE_bit_per_j"], surface)
}

/// Per-hour sweep counts from an existing `report.csv`, if there is one.
fn read_sweeps(dir: &Path) -> Result<BTreeMap<usize, usize>, RunError> {
    let path = dir.join("report.csv");
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut sweeps = BTreeMap::new();
    for row in rdr.deserialize::<BTreeMap<String, String>>() {
        let row = row?;
        let field = |k: &str| row.get(k).and_then(|v| v.parse::<usize>().ok());
        if let (Some(h), Some(s)) = (field("hour"), field("sweeps")) {
            sweeps.insert(h, s);
        }
    }
    Ok(sweeps)
}

/// Dimensioning outcome recorded in an existing `summary.csv`, if any.
pub fn read_dimensioning(dir: &Path) -> Result<Option<DimensioningResult>, RunError> {
    let path = dir.join("summary.csv");
    if !path.exists() {
        return Ok(None);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut metrics = BTreeMap::new();
    for row in rdr.deserialize::<(String, f64)>() {
        let (k, v) = row?;
        metrics.insert(k, v);
    }
    let get = |k: &str| metrics.get(k).copied();
    Ok(match (get("k_max"), get("m_max"), get("p_opt_w"), get("peak_ee_bit_per_j")) {
        (Some(k), Some(m), Some(p), Some(ee)) => {
            Some(DimensioningResult { k_max: k as usize, m_max: m as usize, p_opt_w: p, peak_ee: ee })
        }
        _ => None,
    })
}

/// Reads back every `states_h*.csv` in `dir`, ordered by hour. Sweep counts
/// come from `report.csv` when present.
pub fn read_states(dir: &Path) -> Result<Vec<HourRecord>, RunError> {
    let sweeps = read_sweeps(dir)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("states_h") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    let mut records = Vec::with_capacity(files.len());
    for path in files {
        let mut rdr = csv::Reader::from_path(&path)?;
        let states: Vec<StateRecord> = rdr.deserialize().collect::<Result<_, _>>()?;
        let first = states.first().ok_or_else(|| RunError::Malformed(format!("{} has no rows", path.display())))?;
        let (hour, load_fraction) = (first.hour, first.load_fraction);
        if states.iter().any(|s| s.hour != hour) {
            return Err(RunError::Malformed(format!("{} mixes hours", path.display())));
        }
        let sweeps = sweeps.get(&hour).copied().unwrap_or(0);
        records.push(HourRecord { hour, load_fraction, sweeps, equilibrium: None, states });
    }
    Ok(records)
}
