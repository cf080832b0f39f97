use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mimo_ee::runner::{self, RunError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mimo-ee", version, about = "Load-adaptive massive-MIMO energy-efficiency simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling coefficients and the (K, M, p) dimensioning search.
    Dimension(Common),
    /// Peak-load calibration and hourly occupancy distributions.
    Calibrate(Common),
    /// Full pipeline: equilibria for every hour and the baseline comparison.
    Run(Common),
    /// Re-aggregate the state files of an earlier run found in --out.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; built-in reference values when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of hours to simulate from hour 0.
    #[arg(long)]
    hours: Option<usize>,
    /// Daily load profile CSV (`hour,fraction`).
    #[arg(long)]
    dlp: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, RunError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(h) = self.hours {
            cfg.queue.hours = h;
        }
        if let Some(dlp) = &self.dlp {
            cfg.queue.dlp_path = Some(dlp.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dimension(cfg: &ScenarioConfig) -> Result<(), RunError> {
    let (coupling, dim, surface) = runner::dimension(cfg)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    runner::write_dimensioning(&surface, &dir.join("dimensioning.csv"))?;
    std::fs::write(dir.join("coupling.csv"), coupling.to_csv())?;
    println!(
        "K_max = {}  M_max = {}  p_opt = {:.3} W  EE = {:.4e} bit/J",
        dim.k_max, dim.m_max, dim.p_opt_w, dim.peak_ee
    );
    Ok(())
}

fn calibrate(cfg: &ScenarioConfig) -> Result<(), RunError> {
    let prep = runner::prepare(cfg)?;
    runner::emit_calibration(&prep, cfg.queue.hours, &cfg.output.dir)?;
    let a = &prep.calibration.a_max;
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    println!("mean a_max = {mean:.4} Erlang over {} cells ({} refinement rounds)", a.len(), prep.calibration.rounds);
    Ok(())
}

fn print_summary(report: &runner::DailyReport) {
    println!("hour  load   EE gain   rate ratio");
    for s in &report.summaries {
        println!("{:>4}  {:.2}  {:>7.1}%  {:>9.3}", s.hour, s.load_fraction, 100.0 * s.ee_gain, s.rate_ratio);
    }
    let o = &report.overall;
    println!(
        "overall EE: adaptive {:.4e} bit/J, baseline {:.4e} bit/J, gain {:.1}%",
        o.ee_bit_per_j,
        o.ee_baseline_bit_per_j,
        100.0 * o.ee_gain
    );
}

fn run(cfg: &ScenarioConfig) -> Result<(), RunError> {
    let (prep, report) = runner::run_scenario(cfg)?;
    let dir = &cfg.output.dir;
    runner::emit_outputs(&report, dir)?;
    runner::emit_calibration(&prep, cfg.queue.hours, dir)?;
    std::fs::write(dir.join("coupling.csv"), prep.coupling.to_csv())?;
    print_summary(&report);
    Ok(())
}

fn report(dir: &Path) -> Result<(), RunError> {
    let records = runner::read_states(dir)?;
    let mut report = runner::aggregate(records)?;
    report.dimensioning = runner::read_dimensioning(dir)?;
    runner::emit_outputs(&report, dir)?;
    print_summary(&report);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dimension(c) => c.load().and_then(|cfg| dimension(&cfg)),
        Command::Calibrate(c) => c.load().and_then(|cfg| calibrate(&cfg)),
        Command::Run(c) => c.load().and_then(|cfg| run(&cfg)),
        Command::Report(c) => c.load().and_then(|cfg| report(&cfg.output.dir)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
