use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::DetectorSpec;
use crate::error::{Error, Result};
use crate::model::{self, Modulation};
use crate::rng::{substream, Purpose};

pub const MIN_TIMING_TRIALS: usize = 10;
const WARMUP_SOLVES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub n_symbols: usize,
    pub n_dims: usize,
    pub modulation: Modulation,
    pub trials: usize,
    pub detectors: Vec<DetectorSpec>,
    pub seed: u64,
    /// SNR of the benchmark observations.
    pub snr_db: f64,
}

impl Default for TimingConfig {
    /// `N = 150`, `M = 100`, QPSK, 100 trials of SOAV and the ℓ∞ baseline.
    fn default() -> Self {
        Self {
            n_symbols: 150,
            n_dims: 100,
            modulation: Modulation::Qpsk,
            trials: 100,
            detectors: vec![DetectorSpec::soav(), DetectorSpec::linf()],
            seed: 0,
            snr_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub detector: String,
    pub modulation: Modulation,
    pub n_symbols: usize,
    pub n_dims: usize,
    pub trials: usize,
    pub mean_seconds: f64,
    pub p50_seconds: f64,
    pub p95_seconds: f64,
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Times single solves of each detector on `trials` random instances.
///
/// Only the detector call is timed; instance generation is not. Each
/// detector gets three untimed warm-up solves first. Solves run one at a
/// time on the calling thread.
pub fn run_timing_benchmark(cfg: &TimingConfig) -> Result<Vec<TimingRecord>> {
    if cfg.trials < MIN_TIMING_TRIALS {
        return Err(Error::Config(format!(
            "timing needs at least {MIN_TIMING_TRIALS} trials, got {}",
            cfg.trials
        )));
    }
    if cfg.detectors.is_empty() {
        return Err(Error::Config("at least one detector is required".into()));
    }
    if cfg.n_symbols == 0 || cfg.n_dims == 0 || !cfg.snr_db.is_finite() {
        return Err(Error::Config("dimensions must be positive and the SNR finite".into()));
    }
    let k = cfg.n_symbols * cfg.modulation.bits_per_symbol();
    for d in &cfg.detectors {
        d.validate_for(k)?;
    }
    let n0 = model::snr_to_n0(cfg.snr_db, cfg.n_symbols, cfg.n_dims);

    let instance = |trial: usize| -> Result<_> {
        let mut rng = substream(cfg.seed, Purpose::Benchmark, 0, trial as u64);
        let h = model::sample_real_matrix(cfg.modulation, cfg.n_symbols, cfg.n_dims, &mut rng)?;
        let x = model::sample_symbols(h.ncols(), &mut rng)?;
        let y = model::transmit(&h, &x, n0, &mut rng)?;
        Ok((h, y))
    };

    let mut samples = vec![Vec::with_capacity(cfg.trials); cfg.detectors.len()];
    let (h0, y0) = instance(0)?;
    for d in &cfg.detectors {
        for _ in 0..WARMUP_SOLVES {
            std::hint::black_box(d.detect_parts(&h0, &y0, n0)?);
        }
    }
    for trial in 0..cfg.trials {
        let (h, y) = instance(trial)?;
        for (d, detector) in cfg.detectors.iter().enumerate() {
            let start = Instant::now();
            let result = detector.detect_parts(&h, &y, n0)?;
            samples[d].push(start.elapsed().as_secs_f64());
            std::hint::black_box(result);
        }
    }

    Ok(cfg
        .detectors
        .iter()
        .zip(samples)
        .map(|(d, mut s)| {
            s.sort_by(f64::total_cmp);
            TimingRecord {
                detector: d.name.clone(),
                modulation: cfg.modulation,
                n_symbols: cfg.n_symbols,
                n_dims: cfg.n_dims,
                trials: cfg.trials,
                mean_seconds: s.iter().sum::<f64>() / s.len() as f64,
                p50_seconds: percentile(&s, 0.5),
                p95_seconds: percentile(&s, 0.95),
            }
        })
        .collect())
}
