use std::path::Path;

use rayon::prelude::*;

use hankel_id::model::{
    calibrate_noise, generate_random_system, impulse_response, lowpass_input, simulate,
    NOISE_GAIN_TAPS,
};
use hankel_id::rng::derive_seed;
use hankel_id::{fit, DataRecord, LinearSystem, ModelStructure, NoiseModel, SolverOptions, Stream};

use crate::config::{ExperimentConfig, NoiseKind};
use crate::error::{BenchError, Result};
use crate::records::{write_records, TrialRecord};

/// Impulse-response length used for scoring every estimate.
pub const FIT_TAPS: usize = 35;

const DATA_STREAM_TAG: u64 = 1 << 63;

/// Everything one (system, level, realization) cell needs.
#[derive(Debug, Clone)]
pub struct Trial {
    pub system_id: usize,
    pub level: usize,
    pub snr_db: f64,
    pub realization: usize,
    pub system: LinearSystem,
    pub noise: NoiseModel,
    pub data: DataRecord,
}

/// Deterministic system draw for `system_id`: order, `G0`, and for coloured
/// noise an `H0` of the same order with unit 2-norm impulse response.
pub fn draw_system(
    config: &ExperimentConfig,
    system_id: usize,
) -> Result<(LinearSystem, NoiseModel)> {
    let mut rng = Stream::new(config.master_seed).split(system_id as u64);
    let span = config.orders.max - config.orders.min + 1;
    let order = config.orders.min + ((rng.uniform(0.0, span as f64) as usize).min(span - 1));
    let system = generate_random_system(order, config.pole_radius_max, &mut rng)?;
    let noise = match config.noise_kind {
        NoiseKind::White => NoiseModel::White,
        NoiseKind::Coloured => NoiseModel::Coloured(
            generate_random_system(order, config.pole_radius_max, &mut rng)?
                .normalized(NOISE_GAIN_TAPS)?,
        ),
    };
    Ok((system, noise))
}

/// Input and noisy output for one cell; depends only on the master seed and
/// the cell indices.
pub fn draw_data(
    config: &ExperimentConfig,
    system_id: usize,
    level: usize,
    realization: usize,
    system: &LinearSystem,
    noise: &NoiseModel,
) -> Result<DataRecord> {
    let system_seed = derive_seed(config.master_seed, system_id as u64);
    let cell = DATA_STREAM_TAG | ((level as u64) << 32) | realization as u64;
    let stream = Stream::new(derive_seed(system_seed, cell));
    let u = lowpass_input(config.n, &mut stream.split(0));
    let sigma = calibrate_noise(system, noise, &u, config.snr_levels_db[level])?;
    let mut noise_stream = stream.split(1);
    let mut data = simulate(system, noise, &u, sigma, &mut noise_stream)?;
    data.seed = stream.seed();
    Ok(data)
}

pub fn build_trials(config: &ExperimentConfig) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    for system_id in 0..config.num_systems {
        let (system, noise) = draw_system(config, system_id)?;
        for (level, &snr_db) in config.snr_levels_db.iter().enumerate() {
            for realization in 0..config.realizations_per_level {
                let data = draw_data(config, system_id, level, realization, &system, &noise)?;
                trials.push(Trial {
                    system_id,
                    level,
                    snr_db,
                    realization,
                    system: system.clone(),
                    noise: noise.clone(),
                    data,
                });
            }
        }
    }
    Ok(trials)
}

/// Run every configured estimator on one trial. Failures become rows with
/// `fit = NaN`.
pub fn run_trial(config: &ExperimentConfig, trial: &Trial) -> Result<Vec<TrialRecord>> {
    let fir = ModelStructure::fir(config.fir_n)?;
    let arx = ModelStructure::arx(config.arx_na, config.arx_nb)?;
    let opts = SolverOptions::default();
    let g_true = impulse_response(&trial.system, FIT_TAPS);
    Ok(config
        .estimators
        .iter()
        .map(|&kind| {
            let (fit_value, wall, converged) = match kind.estimate(&trial.data, fir, arx, &opts) {
                Ok(est) => match fit(&g_true, &est.impulse_response(FIT_TAPS)) {
                    Ok(w) if w.is_finite() => (w, est.wall_time_seconds, est.converged()),
                    _ => (f64::NAN, est.wall_time_seconds, false),
                },
                Err(_) => (f64::NAN, 0.0, false),
            };
            TrialRecord {
                system_id: trial.system_id,
                order: trial.system.order(),
                snr_db: trial.snr_db,
                realization: trial.realization,
                estimator: kind.name().to_string(),
                fit: fit_value,
                wall_s: if config.record_wall_time { wall } else { 0.0 },
                converged,
                seed: trial.data.seed,
            }
        })
        .collect())
}

fn sort_key(config: &ExperimentConfig, r: &TrialRecord) -> (usize, usize, usize, usize) {
    let level = config
        .snr_levels_db
        .iter()
        .position(|&s| s == r.snr_db)
        .unwrap_or(usize::MAX);
    let est = config
        .estimators
        .iter()
        .position(|k| k.name() == r.estimator)
        .unwrap_or(usize::MAX);
    (r.system_id, level, r.realization, est)
}

/// Run the full grid on `jobs` worker threads (0 = all cores). The output
/// order is fixed regardless of scheduling.
pub fn run_suite(config: &ExperimentConfig, jobs: usize) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let trials = build_trials(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Result<Vec<TrialRecord>>> =
        pool.install(|| trials.par_iter().map(|t| run_trial(config, t)).collect());
    let mut records = Vec::with_capacity(config.expected_records());
    for chunk in nested {
        records.extend(chunk?);
    }
    records.sort_by_key(|r| sort_key(config, r));
    Ok(records)
}

/// Write `records.csv` and the `config.json` sidecar into `dir`.
pub fn write_suite(dir: &Path, config: &ExperimentConfig, records: &[TrialRecord]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_records(&dir.join("records.csv"), records)?;
    let sidecar = serde_json::json!({
        "config": config,
        "code_version": env!("CARGO_PKG_VERSION"),
        "package": env!("CARGO_PKG_NAME"),
    });
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}
