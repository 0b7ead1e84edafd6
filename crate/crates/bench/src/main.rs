use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hankel_id::hankel::nuclear_norm;
use hankel_id::model::impulse_response;
use hankel_id::{fit, numerical_rank, ModelStructure, SolverOptions};
use hankel_id_bench::suite::{draw_data, draw_system};
use hankel_id_bench::{
    report, run_suite, write_report, write_suite, BenchError, EstimatorKind, ExperimentConfig,
    Result, FIT_TAPS,
};

#[derive(Parser)]
#[command(
    name = "hankel-bench",
    version,
    about = "Monte Carlo benchmark for Hankel nuclear-norm system identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default experiment configuration as JSON.
    GenConfig {
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full suite and write records.csv and config.json.
    Run(RunArgs),
    /// Summarize a record file into fit, time and boxplot tables.
    Report {
        #[arg(long)]
        records: PathBuf,
        /// Output directory (defaults to the directory holding the records).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-system end-to-end run with per-estimator diagnostics.
    Demo(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated estimator list, e.g. `LS,SPe-FIR-N`.
    #[arg(long)]
    estimators: Option<String>,
}

impl RunArgs {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => base,
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output = out.clone();
        }
        if let Some(list) = &self.estimators {
            config.estimators = EstimatorKind::parse_list(list)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn demo_config() -> ExperimentConfig {
    ExperimentConfig {
        num_systems: 1,
        snr_levels_db: vec![20.0],
        realizations_per_level: 1,
        estimators: EstimatorKind::ALL.to_vec(),
        output: PathBuf::from("demo"),
        ..Default::default()
    }
}

fn demo(config: &ExperimentConfig) -> Result<()> {
    let fir = ModelStructure::fir(config.fir_n)?;
    let arx = ModelStructure::arx(config.arx_na, config.arx_nb)?;
    let opts = SolverOptions::default();
    let (system, noise) = draw_system(config, 0)?;
    let g_true = impulse_response(&system, FIT_TAPS);
    println!(
        "system 0: order {}, max pole radius {:.3}, seed {}",
        system.order(),
        system.max_pole_radius(),
        config.master_seed
    );
    for (level, snr) in config.snr_levels_db.iter().enumerate() {
        let data = draw_data(config, 0, level, 0, &system, &noise)?;
        println!(
            "snr {snr} dB, N = {}, sigma_e = {:.4e}",
            data.len(),
            data.noise_sigma
        );
        println!(
            "{:<11} {:>8} {:>9} {:>6} {:>6} {:>10} {:>5}",
            "estimator", "fit", "wall_s", "iters", "conv", "nuclear", "rank"
        );
        for kind in &config.estimators {
            match kind.estimate(&data, fir, arx, &opts) {
                Ok(est) => {
                    let w = fit(&g_true, &est.impulse_response(FIT_TAPS)).unwrap_or(f64::NAN);
                    let blocks = est.hankel_blocks();
                    let nuclear: f64 = blocks.iter().map(nuclear_norm).sum();
                    let rank = numerical_rank(&blocks[blocks.len() - 1], 1e-3)?;
                    let iters: usize = est.reports.iter().map(|r| r.iterations).sum();
                    println!(
                        "{:<11} {:>8.2} {:>9.4} {:>6} {:>6} {:>10.4} {:>5}",
                        kind.name(),
                        w,
                        est.wall_time_seconds,
                        iters,
                        est.converged(),
                        nuclear,
                        rank
                    );
                }
                Err(e) => println!("{:<11} failed: {e}", kind.name()),
            }
        }
    }
    Ok(())
}

fn run(config: &ExperimentConfig, jobs: usize) -> Result<()> {
    let records = run_suite(config, jobs)?;
    write_suite(&config.output, config, &records)?;
    eprintln!(
        "wrote {} records to {}",
        records.len(),
        config.output.join("records.csv").display()
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenConfig { out } => {
            let json = ExperimentConfig::default().to_json();
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        Command::Run(args) => {
            let config = args.resolve(ExperimentConfig::default())?;
            run(&config, args.jobs)?;
        }
        Command::Report { records, out } => {
            let summary = report(&records)?;
            let dir = out.unwrap_or_else(|| {
                records
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            write_report(&dir, &summary)?;
            print!("{}", summary.fit_table_csv());
        }
        Command::Demo(args) => {
            let config = args.resolve(demo_config())?;
            demo(&config)?;
            run(&config, args.jobs)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &BenchError) -> u8 {
    e.exit_code() as u8
}
