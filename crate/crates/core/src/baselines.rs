//! Reference detectors: ℓ∞-norm minimization under a residual constraint and
//! exhaustive maximum-likelihood search.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fista::{self, FistaParams, FistaState, LeastSquares};
use crate::linalg;
use crate::model::{RealLinearSystem, SymbolVector};
use crate::soav::{decide, DetectionResult};

/// Radius of the residual constraint `‖y - Hz‖₂ ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Epsilon {
    /// `ε² = rows · N0 / 2`, the expected squared noise norm.
    #[default]
    Discrepancy,
    Fixed(f64),
}

impl Epsilon {
    pub fn resolve(&self, system: &RealLinearSystem) -> f64 {
        self.resolve_for(system.n_observations(), system.n0)
    }

    /// Radius for a system with `rows` real observations and noise level `n0`.
    pub fn resolve_for(&self, rows: usize, n0: f64) -> f64 {
        match *self {
            Epsilon::Discrepancy => (rows as f64 * n0 / 2.0).sqrt(),
            Epsilon::Fixed(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinfConfig {
    pub epsilon: Epsilon,
    /// Maximum number of penalty stages taken from `penalty_schedule`.
    pub max_outer: usize,
    /// Inner FISTA stops on `‖z⁽ᵏ⁾ - z⁽ᵏ⁻¹⁾‖₂ < inner_tol`.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Strictly increasing penalty weights `μ` on `‖y - Hz‖₂²`.
    pub penalty_schedule: Vec<f64>,
}

impl Default for LinfConfig {
    fn default() -> Self {
        Self {
            epsilon: Epsilon::Discrepancy,
            max_outer: 5,
            inner_tol: 1e-8,
            inner_max_iter: 500,
            penalty_schedule: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
        }
    }
}

impl LinfConfig {
    pub fn validate(&self) -> Result<()> {
        if let Epsilon::Fixed(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {e}")));
            }
        }
        if self.max_outer == 0 || self.inner_max_iter == 0 {
            return Err(Error::InvalidParameter("max_outer and inner_max_iter must be positive".into()));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("inner_tol must be positive, got {}", self.inner_tol)));
        }
        if self.penalty_schedule.is_empty() || self.penalty_schedule.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter("penalty schedule must be non-empty and positive".into()));
        }
        if self.penalty_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("penalty schedule must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Relative slack allowed on the residual constraint.
const RESIDUAL_SLACK: f64 = 1.01;
/// Power iteration underestimates `σ_max²`; the step uses this margin.
const LIPSCHITZ_MARGIN: f64 = 1.01;

/// Euclidean projection of `v` onto `{u : ‖u‖₁ ≤ radius}` by sorting.
pub fn project_l1_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    let mut out = v.clone();
    project_l1_ball_in_place(out.as_mut_slice(), radius, &mut Vec::with_capacity(v.len()));
    out
}

fn project_l1_ball_in_place(v: &mut [f64], radius: f64, scratch: &mut Vec<f64>) {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= 0.0 {
        v.fill(0.0);
        return;
    }
    let theta = l1_threshold(v, radius, scratch);
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

/// Soft-threshold level `θ` with `Σ max(|vᵢ| - θ, 0) = radius`.
fn l1_threshold(v: &[f64], radius: f64, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(v.iter().map(|x| x.abs()));
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    theta
}

/// Same threshold as [`l1_threshold`] without sorting: repeatedly average
/// the entries above the current level (Michelot's method). The level
/// increases monotonically and stops once the active set is stable.
fn l1_threshold_iterative(v: &[f64], radius: f64, active: &mut Vec<f64>) -> f64 {
    active.clear();
    active.extend(v.iter().map(|x| x.abs()));
    let mut theta = (active.iter().sum::<f64>() - radius) / active.len() as f64;
    loop {
        let before = active.len();
        active.retain(|&u| u > theta);
        if active.len() == before {
            return theta;
        }
        theta = (active.iter().sum::<f64>() - radius) / active.len() as f64;
    }
}

/// `prox_{t‖·‖∞}(v) = v - Π_{‖·‖₁ ≤ t}(v)` (Moreau decomposition).
pub fn prox_linf_in_place(v: &mut [f64], t: f64, scratch: &mut Vec<f64>) {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= t {
        v.fill(0.0);
        return;
    }
    let theta = l1_threshold_iterative(v, t, scratch);
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().min(theta);
    }
}

/// ℓ∞-minimization detector: `min ‖z‖∞ s.t. ‖y - Hz‖₂ ≤ ε`.
///
/// Solved through the penalty form `μ‖y - Hz‖₂² + ‖z‖∞` along the increasing
/// schedule, warm-starting each stage from the previous one. The first stage
/// whose residual is within 1% of `ε` is returned. If none is, the error
/// carries the last (lowest-residual) iterate.
pub fn linf_detect(system: &RealLinearSystem, cfg: &LinfConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    let epsilon = cfg.epsilon.resolve(system);
    linf_detect_parts(&system.h, &system.y, epsilon, cfg)
}

/// [`linf_detect`] on a bare `(H, y)` pair with an explicit radius.
pub fn linf_detect_parts(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    epsilon: f64,
    cfg: &LinfConfig,
) -> Result<DetectionResult> {
    cfg.validate()?;
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "observation length",
            expected: h.nrows(),
            found: y.len(),
        });
    }
    let start = Instant::now();
    let sigma_sq = LIPSCHITZ_MARGIN * linalg::spectral_norm_sq(h, 1e-6, 500);
    let mut z = DVector::zeros(h.ncols());
    let mut scratch = Vec::with_capacity(h.ncols());
    let mut residual_buf = DVector::zeros(h.nrows());
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    for &mu in cfg.penalty_schedule.iter().take(cfg.max_outer) {
        let ls = LeastSquares { h, y, weight: mu };
        let mut state = FistaState::new(z);
        iterations += fista::run(
            &ls,
            FistaParams {
                lipschitz: (2.0 * mu * sigma_sq).max(f64::MIN_POSITIVE),
                max_iter: cfg.inner_max_iter,
                tol: cfg.inner_tol,
            },
            &mut state,
            |v, gamma| prox_linf_in_place(v.as_mut_slice(), gamma, &mut scratch),
            |_, _| {},
        )?;
        z = state.z_cur;
        residual = linalg::residual_norm_sq(h, y, &z, &mut residual_buf).sqrt();
        if residual <= RESIDUAL_SLACK * epsilon {
            let decisions = decide(&z)?;
            return Ok(DetectionResult {
                z_star: z,
                decisions,
                iterations,
                objective_trace: None,
                wall_time: start.elapsed(),
            });
        }
    }

    let decisions = decide(&z)?;
    Err(Error::NotConverged {
        residual,
        epsilon,
        best: Box::new(DetectionResult {
            z_star: z,
            decisions,
            iterations,
            objective_trace: None,
            wall_time: start.elapsed(),
        }),
    })
}

/// [`linf_detect_parts`] for every column of `ys`, sharing `H`.
///
/// Each column goes through the same stage sequence as a single solve and
/// leaves the batch at the first stage meeting its residual target. Entries
/// are `Err(NotConverged)` for columns that never do. The reported wall time
/// is the batch time split evenly across columns.
pub fn linf_detect_batch(
    h: &DMatrix<f64>,
    ys: &DMatrix<f64>,
    epsilon: f64,
    cfg: &LinfConfig,
) -> Result<Vec<Result<DetectionResult>>> {
    cfg.validate()?;
    if ys.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "observation length",
            expected: h.nrows(),
            found: ys.nrows(),
        });
    }
    let start = Instant::now();
    let batch = ys.ncols();
    let h_t = h.transpose();
    let sigma_sq = LIPSCHITZ_MARGIN * linalg::spectral_norm_sq(h, 1e-6, 500);
    let mut z = DMatrix::zeros(h.ncols(), batch);
    let mut iterations = vec![0; batch];
    let mut residuals = vec![f64::INFINITY; batch];
    let mut converged = vec![false; batch];
    let mut active: Vec<usize> = (0..batch).collect();
    let mut scratch = Vec::with_capacity(h.ncols());

    for &mu in cfg.penalty_schedule.iter().take(cfg.max_outer) {
        if active.is_empty() {
            break;
        }
        let y_a = ys.select_columns(active.iter());
        let out = fista::run_batch(
            h,
            &h_t,
            &y_a,
            mu,
            FistaParams {
                lipschitz: (2.0 * mu * sigma_sq).max(f64::MIN_POSITIVE),
                max_iter: cfg.inner_max_iter,
                tol: cfg.inner_tol,
            },
            z.select_columns(active.iter()),
            |v, gamma| prox_linf_in_place(v, gamma, &mut scratch),
        )?;
        let mut r = y_a;
        r.gemm(-1.0, h, &out.z, 1.0);
        let mut still_active = Vec::with_capacity(active.len());
        for (j, &col) in active.iter().enumerate() {
            iterations[col] += out.iterations[j];
            residuals[col] = r.column(j).norm();
            z.set_column(col, &out.z.column(j));
            if residuals[col] <= RESIDUAL_SLACK * epsilon {
                converged[col] = true;
            } else {
                still_active.push(col);
            }
        }
        active = still_active;
    }

    let per_column = start.elapsed() / batch.max(1) as u32;
    (0..batch)
        .map(|col| {
            let z_star = z.column(col).into_owned();
            let result = DetectionResult {
                decisions: decide(&z_star)?,
                z_star,
                iterations: iterations[col],
                objective_trace: None,
                wall_time: per_column,
            };
            Ok(if converged[col] {
                Ok(result)
            } else {
                Err(Error::NotConverged {
                    residual: residuals[col],
                    epsilon,
                    best: Box::new(result),
                })
            })
        })
        .collect()
}

/// Like [`linf_detect`] but returns the best iterate when the schedule is
/// exhausted, for use inside experiments.
pub fn linf_detect_best_effort(system: &RealLinearSystem, cfg: &LinfConfig) -> Result<DetectionResult> {
    match linf_detect(system, cfg) {
        Err(Error::NotConverged { best, .. }) => Ok(*best),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlConfig {
    pub max_dimension: usize,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self { max_dimension: 24 }
    }
}

/// Hard cap on `max_dimension`.
pub const ML_DIMENSION_LIMIT: usize = 30;

/// Candidates between exact residual refreshes during enumeration.
const REFRESH_PERIOD: u64 = 4096;

/// Exhaustive search of `argmin ‖y - Hz‖₂` over `z ∈ {+1, -1}^K`.
///
/// Candidate `i` has `zⱼ = -1` exactly when bit `j` of `i` is set. The
/// candidates are visited in Gray-code order so each step flips a single
/// coordinate and updates the residual in `O(rows)`. Exact ties go to the
/// lowest candidate index. `iterations` in the result is the number of
/// candidates evaluated, `2^K`.
pub fn ml_oracle(system: &RealLinearSystem, cfg: &MlConfig) -> Result<DetectionResult> {
    ml_oracle_parts(&system.h, &system.y, cfg)
}

pub fn ml_oracle_parts(h: &DMatrix<f64>, y: &DVector<f64>, cfg: &MlConfig) -> Result<DetectionResult> {
    if cfg.max_dimension > ML_DIMENSION_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "max_dimension {} exceeds the limit {ML_DIMENSION_LIMIT}",
            cfg.max_dimension
        )));
    }
    let k = h.ncols();
    if k > cfg.max_dimension {
        return Err(Error::DimensionExceeded {
            dimension: k,
            limit: cfg.max_dimension,
        });
    }
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "observation length",
            expected: h.nrows(),
            found: y.len(),
        });
    }
    let start = Instant::now();
    let rows = h.nrows();
    let z_of = |index: u64| DVector::from_fn(k, |j, _| if index >> j & 1 == 1 { -1.0 } else { 1.0 });

    let mut residual = DVector::zeros(rows);
    let mut best_value = linalg::residual_norm_sq(h, y, &z_of(0), &mut residual);
    let mut best_index = 0u64;
    let total = 1u64 << k;

    for i in 1..total {
        let gray = i ^ (i >> 1);
        let value = if i % REFRESH_PERIOD == 0 {
            linalg::residual_norm_sq(h, y, &z_of(gray), &mut residual)
        } else {
            let j = i.trailing_zeros() as usize;
            // r = y - Hz; z_j moving from +1 to -1 adds 2h_j, the reverse subtracts it.
            let delta = if gray >> j & 1 == 1 { 2.0 } else { -2.0 };
            let col = h.column(j);
            let mut acc = 0.0;
            for (r, &c) in residual.iter_mut().zip(col.iter()) {
                *r += delta * c;
                acc += *r * *r;
            }
            acc
        };
        if value < best_value || (value == best_value && gray < best_index) {
            best_value = value;
            best_index = gray;
        }
    }

    let z_star = z_of(best_index);
    let decisions = SymbolVector::from_signs_unchecked(z_star.iter().map(|&v| v as i8).collect());
    Ok(DetectionResult {
        z_star,
        decisions,
        iterations: total as usize,
        objective_trace: None,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_symbols, Modulation};
    use crate::rng::seeded;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn projection_keeps_feasible_points() {
        let p = v(&[0.2, -0.3, 0.1]);
        assert_eq!(project_l1_ball(&p, 1.0), p);
    }

    #[test]
    fn projection_single_active_coordinate() {
        assert_eq!(project_l1_ball(&v(&[3.0, 0.0]), 1.0), v(&[1.0, 0.0]));
        let p = project_l1_ball(&v(&[2.0, -2.0, 0.5]), 1.0);
        assert!((p - v(&[0.5, -0.5, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn iterative_threshold_matches_sorting() {
        let mut rng = seeded(12);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..2000 {
            let n = rand::Rng::random_range(&mut rng, 1..40);
            let v: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
            let l1: f64 = v.iter().map(|x: &f64| x.abs()).sum();
            let r = rand::Rng::random_range(&mut rng, 0.01..1.0) * l1;
            let sorted = l1_threshold(&v, r, &mut a);
            let iterative = l1_threshold_iterative(&v, r, &mut b);
            assert!((sorted - iterative).abs() <= 1e-12 * (1.0 + sorted.abs()), "{sorted} vs {iterative}");
        }
    }

    #[test]
    fn linf_prox_clips_to_threshold() {
        let mut z = v(&[3.0, -1.0, 0.5]);
        prox_linf_in_place(z.as_mut_slice(), 1.0, &mut Vec::new());
        // Projection onto the radius-1 ℓ1 ball is [1, 0, 0], so the prox is [2, -1, 0.5].
        assert!((z - v(&[2.0, -1.0, 0.5])).amax() < 1e-15);
        let mut small = v(&[0.1, -0.2]);
        prox_linf_in_place(small.as_mut_slice(), 1.0, &mut Vec::new());
        assert_eq!(small, DVector::zeros(2));
    }

    #[test]
    fn linf_identity_channel() {
        let x = sample_symbols(10, &mut seeded(6)).unwrap();
        let sys = RealLinearSystem::new(DMatrix::identity(10, 10), x.to_dvector(), 0.0, Modulation::Bpsk).unwrap();
        let cfg = LinfConfig { epsilon: Epsilon::Fixed(0.0), ..LinfConfig::default() };
        let out = linf_detect_best_effort(&sys, &cfg).unwrap();
        assert_eq!(out.decisions, x);
        assert!((out.z_star - x.to_dvector()).amax() < 1e-3);
    }

    #[test]
    fn linf_two_variable_instance() {
        let sys = RealLinearSystem::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[1.0]), 0.0, Modulation::Bpsk)
            .unwrap();
        let cfg = LinfConfig { epsilon: Epsilon::Fixed(0.0), ..LinfConfig::default() };
        let err = linf_detect(&sys, &cfg).unwrap_err();
        let Error::NotConverged { best, residual, .. } = err else {
            panic!("expected NotConverged");
        };
        assert!(residual < 1e-2);
        assert!((best.z_star[0] - 1.0).abs() < 1e-2);
        assert_eq!(best.z_star[1], 0.0);
        assert_eq!(best.decisions.bits(), &[1, 1]);
    }

    #[test]
    fn linf_meets_residual_when_feasible() {
        let (sys, _) = crate::model::ChannelConfig {
            n_symbols: 15,
            n_dims: 10,
            modulation: Modulation::Qpsk,
            snr_db: 10.0,
            seed: 4,
        }
        .realize()
        .unwrap();
        let cfg = LinfConfig::default();
        let out = linf_detect(&sys, &cfg).unwrap();
        let eps = cfg.epsilon.resolve(&sys);
        let r = (&sys.y - &sys.h * &out.z_star).norm();
        assert!(r <= 1.01 * eps, "residual {r} vs eps {eps}");
    }

    #[test]
    fn linf_config_validation() {
        let bad = [
            LinfConfig { penalty_schedule: vec![1.0, 1.0], ..LinfConfig::default() },
            LinfConfig { penalty_schedule: vec![], ..LinfConfig::default() },
            LinfConfig { epsilon: Epsilon::Fixed(-1.0), ..LinfConfig::default() },
            LinfConfig { inner_tol: 0.0, ..LinfConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn ml_identity_channel() {
        let sys = RealLinearSystem::new(DMatrix::identity(2, 2), v(&[0.9, -1.1]), 0.0, Modulation::Bpsk).unwrap();
        let out = ml_oracle(&sys, &MlConfig::default()).unwrap();
        assert_eq!(out.decisions.bits(), &[1, -1]);
        assert_eq!(out.iterations, 4);
    }

    #[test]
    fn ml_counts_every_candidate() {
        let h = DMatrix::from_fn(3, 7, |i, j| ((i * 7 + j) as f64).sin());
        let sys = RealLinearSystem::new(h, v(&[0.1, 0.2, 0.3]), 0.0, Modulation::Bpsk).unwrap();
        assert_eq!(ml_oracle(&sys, &MlConfig::default()).unwrap().iterations, 128);
    }

    #[test]
    fn ml_ties_go_to_lowest_index() {
        // The second column is zero, so both signs of z₂ fit equally well.
        let sys = RealLinearSystem::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[-1.0]), 0.0, Modulation::Bpsk)
            .unwrap();
        assert_eq!(ml_oracle(&sys, &MlConfig::default()).unwrap().decisions.bits(), &[-1, 1]);
    }

    #[test]
    fn ml_dimension_guard() {
        let sys = RealLinearSystem::new(DMatrix::zeros(1, 5), v(&[0.0]), 0.0, Modulation::Bpsk).unwrap();
        assert!(matches!(
            ml_oracle(&sys, &MlConfig { max_dimension: 4 }),
            Err(Error::DimensionExceeded { dimension: 5, limit: 4 })
        ));
        assert!(ml_oracle(&sys, &MlConfig { max_dimension: 31 }).is_err());
    }
}
