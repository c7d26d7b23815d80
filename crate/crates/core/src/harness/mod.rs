//! Seeded Monte Carlo BER sweeps and solve-time benchmarks.
//!
//! One realization draws a modulation matrix, then sends a block of symbol
//! vectors through it. Every configured detector sees exactly the same
//! `(H, y)` pairs. Random numbers come from counter-derived substreams (see
//! [`crate::rng`]): the matrix and symbols depend only on the realization
//! index, the noise on `(snr index, realization)`. Results are therefore
//! identical for any thread count and independent of the detector list.

mod config;
mod detector;
mod io;
mod timing;

use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Modulation};
use crate::rng::{substream, Purpose};

pub use config::{parse_experiment_config, parse_snr_range, read_experiment_config};
pub use detector::{DetectorKind, DetectorSpec};
pub use io::{emit_plot_data, read_results, write_results, write_timing, RESULTS_HEADER};
pub use timing::{run_timing_benchmark, TimingConfig, TimingRecord, MIN_TIMING_TRIALS};

/// Symbol vectors sent per realization when nothing else is configured.
pub const DEFAULT_VECTORS_PER_REALIZATION: usize = 900;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_symbols: usize,
    pub n_dims: usize,
    pub modulation: Modulation,
    pub snr_grid_db: Vec<f64>,
    /// Matrix draws per SNR point.
    pub realizations: usize,
    /// Must be a multiple of the real unknown count `K`; one channel use
    /// carries `K` bits.
    pub bits_per_realization: usize,
    pub detectors: Vec<DetectorSpec>,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub plot_path: Option<PathBuf>,
    /// Measure per-solve wall time. Off by default because timings are the
    /// only non-reproducible column of the results file.
    pub record_timing: bool,
}

impl ExperimentConfig {
    /// QPSK, 0–16 dB in 2 dB steps, 1000 realizations of 900 vectors each,
    /// SOAV against the ℓ∞ baseline.
    pub fn new(n_symbols: usize, n_dims: usize) -> Self {
        let modulation = Modulation::Qpsk;
        Self {
            n_symbols,
            n_dims,
            modulation,
            snr_grid_db: (0..=8).map(|i| 2.0 * i as f64).collect(),
            realizations: 1000,
            bits_per_realization: DEFAULT_VECTORS_PER_REALIZATION * n_symbols * modulation.bits_per_symbol(),
            detectors: vec![DetectorSpec::soav(), DetectorSpec::linf()],
            master_seed: 0,
            output_path: None,
            plot_path: None,
            record_timing: false,
        }
    }

    /// Real unknowns per channel use.
    pub fn unknowns(&self) -> usize {
        self.n_symbols * self.modulation.bits_per_symbol()
    }

    pub fn vectors_per_realization(&self) -> usize {
        self.bits_per_realization / self.unknowns().max(1)
    }

    /// Sets `bits_per_realization` from a vector count.
    pub fn with_vectors_per_realization(mut self, vectors: usize) -> Self {
        self.bits_per_realization = vectors * self.unknowns();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 || self.n_dims == 0 {
            return Err(Error::Config(format!(
                "n_symbols and n_dims must be positive, got N={} M={}",
                self.n_symbols, self.n_dims
            )));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be non-empty and finite".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("SNR grid must be strictly increasing".into()));
        }
        let k = self.unknowns();
        if self.bits_per_realization == 0 || self.bits_per_realization % k != 0 {
            return Err(Error::Config(format!(
                "bits_per_realization ({}) must be a positive multiple of the {k} bits per channel use",
                self.bits_per_realization
            )));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("at least one detector is required".into()));
        }
        for (i, d) in self.detectors.iter().enumerate() {
            if self.detectors[..i].iter().any(|e| e.name == d.name) {
                return Err(Error::Config(format!("detector '{}' listed twice", d.name)));
            }
            d.validate_for(k)?;
        }
        Ok(())
    }
}

/// Aggregate for one `(SNR, detector)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub detector: String,
    pub modulation: Modulation,
    pub n_symbols: usize,
    pub n_dims: usize,
    pub snr_db: f64,
    /// Realizations that contributed to this cell.
    pub realizations: u64,
    pub bits_total: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_detect_time_s: f64,
}

impl BerRecord {
    /// Standard error of the BER estimate, `√(p(1-p)/bits)`.
    pub fn standard_error(&self) -> f64 {
        if self.bits_total == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits_total as f64).sqrt()
    }
}

/// Per-detector counts from one realization.
#[derive(Debug, Clone, Default)]
struct RealizationOutcome {
    bit_errors: Vec<u64>,
    seconds: Vec<f64>,
}

fn run_realization(cfg: &ExperimentConfig, snr_index: usize, realization: usize, n0: f64) -> Result<RealizationOutcome> {
    let r = realization as u64;
    let mut matrix_rng = substream(cfg.master_seed, Purpose::Matrix, 0, r);
    let mut symbol_rng = substream(cfg.master_seed, Purpose::Symbols, 0, r);
    let mut noise_rng = substream(cfg.master_seed, Purpose::Noise, snr_index as u64, r);

    let h = model::sample_real_matrix(cfg.modulation, cfg.n_symbols, cfg.n_dims, &mut matrix_rng)?;
    let mut out = RealizationOutcome {
        bit_errors: vec![0; cfg.detectors.len()],
        seconds: vec![0.0; cfg.detectors.len()],
    };
    let vectors = cfg.vectors_per_realization();
    let mut sent = Vec::with_capacity(vectors);
    let mut ys = DMatrix::zeros(h.nrows(), vectors);
    for v in 0..vectors {
        let x = model::sample_symbols(h.ncols(), &mut symbol_rng)?;
        let mut y = ys.column_mut(v);
        y.gemv(1.0, &h, &x.to_dvector(), 0.0);
        if n0 > 0.0 {
            y += model::sample_noise(h.nrows(), n0, &mut noise_rng);
        }
        sent.push(x);
    }
    for (d, detector) in cfg.detectors.iter().enumerate() {
        for (result, x) in detector.detect_batch(&h, &ys, n0)?.iter().zip(&sent) {
            out.bit_errors[d] += result.decisions.bit_errors(x) as u64;
            out.seconds[d] += result.wall_time.as_secs_f64();
        }
    }
    Ok(out)
}

/// Runs the full SNR × realization sweep and, if configured, writes the
/// results file and plot data.
///
/// Records are ordered detector-major in declaration order, then by SNR.
pub fn run_ber_experiment(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let n_det = cfg.detectors.len();
    let vectors = cfg.vectors_per_realization() as u64;
    let mut cells: Vec<Vec<(u64, f64)>> = vec![Vec::with_capacity(cfg.snr_grid_db.len()); n_det];

    for (snr_index, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let n0 = model::snr_to_n0(snr_db, cfg.n_symbols, cfg.n_dims);
        let outcomes = (0..cfg.realizations)
            .into_par_iter()
            .map(|r| run_realization(cfg, snr_index, r, n0))
            .collect::<Result<Vec<_>>>()?;
        for (d, cell) in cells.iter_mut().enumerate() {
            let errors = outcomes.iter().map(|o| o.bit_errors[d]).sum();
            let seconds = outcomes.iter().map(|o| o.seconds[d]).sum();
            cell.push((errors, seconds));
        }
    }

    let realizations = cfg.realizations as u64;
    let bits_total = realizations * cfg.bits_per_realization as u64;
    let solves = (realizations * vectors) as f64;
    let mut records = Vec::with_capacity(n_det * cfg.snr_grid_db.len());
    for (detector, cell) in cfg.detectors.iter().zip(&cells) {
        for (&snr_db, &(bit_errors, seconds)) in cfg.snr_grid_db.iter().zip(cell) {
            records.push(BerRecord {
                detector: detector.name.clone(),
                modulation: cfg.modulation,
                n_symbols: cfg.n_symbols,
                n_dims: cfg.n_dims,
                snr_db,
                realizations,
                bits_total,
                bit_errors,
                ber: bit_errors as f64 / bits_total as f64,
                mean_detect_time_s: if cfg.record_timing { seconds / solves } else { 0.0 },
            });
        }
    }

    if let Some(path) = &cfg.output_path {
        write_results(&records, path)?;
    }
    if let Some(path) = &cfg.plot_path {
        emit_plot_data(&records, path)?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(detectors: Vec<DetectorSpec>) -> ExperimentConfig {
        ExperimentConfig {
            snr_grid_db: vec![0.0, 10.0],
            realizations: 3,
            detectors,
            master_seed: 5,
            ..ExperimentConfig::new(4, 3)
        }
        .with_vectors_per_realization(4)
    }

    #[test]
    fn defaults_follow_protocol() {
        let cfg = ExperimentConfig::new(15, 10);
        assert_eq!(cfg.snr_grid_db.len(), 9);
        assert_eq!(cfg.vectors_per_realization(), 900);
        assert_eq!(cfg.bits_per_realization, 27_000);
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        let base = small(vec![DetectorSpec::soav()]);
        let cases = [
            ExperimentConfig { realizations: 0, ..base.clone() },
            ExperimentConfig { snr_grid_db: vec![2.0, 2.0], ..base.clone() },
            ExperimentConfig { snr_grid_db: vec![], ..base.clone() },
            ExperimentConfig { detectors: vec![], ..base.clone() },
            ExperimentConfig { bits_per_realization: 7, ..base.clone() },
            ExperimentConfig { detectors: vec![DetectorSpec::soav(), DetectorSpec::soav()], ..base.clone() },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn record_accounting() {
        let cfg = small(vec![DetectorSpec::soav(), DetectorSpec::linf()]);
        let records = run_ber_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[0].detector, "soav");
        assert_eq!(records[2].detector, "linf");
        for r in &records {
            assert_eq!(r.bits_total, 3 * 4 * 8);
            assert_eq!(r.ber, r.bit_errors as f64 / r.bits_total as f64);
            assert!((0.0..=1.0).contains(&r.ber));
            assert_eq!(r.mean_detect_time_s, 0.0);
        }
    }

    #[test]
    fn adding_a_detector_does_not_change_others() {
        let alone = run_ber_experiment(&small(vec![DetectorSpec::soav()])).unwrap();
        let both = run_ber_experiment(&small(vec![DetectorSpec::linf(), DetectorSpec::soav()])).unwrap();
        assert_eq!(alone[..], both[2..]);
    }

    #[test]
    fn timing_is_recorded_on_request() {
        let cfg = ExperimentConfig { record_timing: true, ..small(vec![DetectorSpec::soav()]) };
        let records = run_ber_experiment(&cfg).unwrap();
        assert!(records.iter().all(|r| r.mean_detect_time_s > 0.0));
    }
}
