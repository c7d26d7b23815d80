//! Runtime property checks behind `ftn-soav selfcheck`.
//!
//! Each suite samples random instances from a fixed seed and compares the
//! library against a slow, direct computation. Sample counts scale with
//! [`SelfCheckConfig::samples`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::{ml_oracle_parts, project_l1_ball, MlConfig};
use crate::error::{Error, Result};
use crate::model::{
    sample_modulation_matrix, sample_noise, sample_symbols, snr_to_n0, stack_complex_vector,
    stack_real, transmit,
};
use crate::rng::{substream, Purpose, SimRng};
use crate::soav::{fista_detect_parts, grad_f, objective, xi, SoavConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Prox,
    Grad,
    Stacking,
    Calibration,
    L1Proj,
    Ml,
    Fista,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Prox,
        Suite::Grad,
        Suite::Stacking,
        Suite::Calibration,
        Suite::L1Proj,
        Suite::Ml,
        Suite::Fista,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Prox => "prox",
            Suite::Grad => "grad",
            Suite::Stacking => "stacking",
            Suite::Calibration => "calibration",
            Suite::L1Proj => "l1proj",
            Suite::Ml => "ml",
            Suite::Fista => "fista",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.as_str()).collect();
                Error::Config(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone)]
pub struct SelfCheckConfig {
    /// Base sample count; expensive suites use a fraction of it.
    pub samples: usize,
    pub suites: Vec<Suite>,
    pub seed: u64,
}

impl Default for SelfCheckConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            suites: Suite::ALL.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_selfcheck(cfg: &SelfCheckConfig) -> Result<Vec<CheckOutcome>> {
    if cfg.samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (i, &suite) in cfg.suites.iter().enumerate() {
        let mut rng = substream(cfg.seed, Purpose::SelfCheck, 0, i as u64);
        let n = cfg.samples;
        match suite {
            Suite::Prox => {
                out.push(prox_grid(&mut rng, n));
                out.push(prox_unit_table());
                out.push(prox_nonexpansive(&mut rng, n));
            }
            Suite::Grad => out.push(grad_finite_difference(&mut rng, (n / 20).max(1))),
            Suite::Stacking => out.push(stacking(&mut rng, (n / 10).max(1))),
            Suite::Calibration => {
                let draws = (n * 100).max(1000);
                out.push(matrix_variance(&mut rng, draws));
                out.push(noise_variance(&mut rng, draws));
            }
            Suite::L1Proj => out.push(l1_kkt(&mut rng, n)),
            Suite::Ml => out.push(ml_optimal(&mut rng, (n / 20).max(1))),
            Suite::Fista => out.push(fista_descent(&mut rng, (n / 20).max(1))),
        }
    }
    Ok(out
        .into_iter()
        .map(|(suite, name, passed, detail)| CheckOutcome { suite, name, passed, detail })
        .collect())
}

type Raw = (Suite, &'static str, bool, String);

fn max_error_check(suite: Suite, name: &'static str, worst: f64, tol: f64, samples: usize) -> Raw {
    (suite, name, worst < tol, format!("max err {worst:.2e} < {tol:.0e} over {samples}"))
}

/// Argmin of the convex `φ(u) = ½(u - β)² + γ g(u)`: a grid scan of step
/// 1e-4 over `[β - γ, β + γ]` (the argmin lies there since `|g'| ≤ 1`),
/// then ternary search in the bracket around the best grid point.
fn prox_by_search(beta: f64, gamma: f64) -> f64 {
    let phi = |u: f64| 0.5 * (u - beta).powi(2) + gamma * 0.5 * ((u - 1.0).abs() + (u + 1.0).abs());
    let step = 1e-4;
    let lo = beta - gamma;
    let n = ((2.0 * gamma) / step).ceil() as usize;
    let mut best = lo;
    let mut best_val = phi(lo);
    for i in 1..=n {
        let u = lo + i as f64 * step;
        let v = phi(u);
        if v < best_val {
            best = u;
            best_val = v;
        }
    }
    let (mut a, mut b) = (best - step, best + step);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if phi(m1) <= phi(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

fn prox_grid(rng: &mut SimRng, samples: usize) -> Raw {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let beta = rng.random_range(-4.0..4.0);
        let gamma = rng.random_range(1e-3..2.0);
        worst = worst.max((xi(beta, gamma) - prox_by_search(beta, gamma)).abs());
    }
    max_error_check(Suite::Prox, "closed form vs grid search", worst, 1e-6, samples)
}

fn prox_unit_table() -> Raw {
    let table = [
        (-3.0, -2.0),
        (-2.0, -1.0),
        (-1.5, -1.0),
        (-1.0, -1.0),
        (0.3, 0.3),
        (1.0, 1.0),
        (1.5, 1.0),
        (2.0, 1.0),
        (3.0, 2.0),
    ];
    let bad: Vec<_> = table.iter().filter(|&&(b, e)| xi(b, 1.0) != e).map(|&(b, _)| b).collect();
    let detail = if bad.is_empty() {
        format!("{} breakpoint cases at gamma=1", table.len())
    } else {
        format!("mismatch at beta = {bad:?}")
    };
    (Suite::Prox, "gamma=1 table", bad.is_empty(), detail)
}

fn prox_nonexpansive(rng: &mut SimRng, samples: usize) -> Raw {
    let mut violations = 0;
    for _ in 0..samples {
        let gamma = rng.random_range(1e-3..3.0);
        let a = rng.random_range(-5.0..5.0);
        let b = rng.random_range(-5.0..5.0);
        let (pa, pb) = (xi(a, gamma), xi(b, gamma));
        // Firm nonexpansiveness implies plain nonexpansiveness.
        if (pa - pb).powi(2) > (pa - pb) * (a - b) + 1e-12 {
            violations += 1;
        }
    }
    (Suite::Prox, "firmly nonexpansive", violations == 0, format!("{violations} violations over {samples}"))
}

fn random_instance(rng: &mut SimRng, rows: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut g = || rng.sample::<f64, _>(StandardNormal);
    let h = DMatrix::from_fn(rows, cols, |_, _| g());
    let y = DVector::from_fn(rows, |_, _| g());
    let z = DVector::from_fn(cols, |_, _| g());
    (h, y, z)
}

fn grad_finite_difference(rng: &mut SimRng, samples: usize) -> Raw {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let k = rng.random_range(1..=40);
        let rows = rng.random_range(1..=40);
        let lambda = rng.random_range(0.01..2.0);
        let (h, y, z) = random_instance(rng, rows, k);
        let f = |z: &DVector<f64>| lambda * (&y - &h * z).norm_squared();
        let g = grad_f(&z, &h, &y, lambda).expect("shapes agree");
        let step = 1e-5;
        let fd = DVector::from_fn(k, |j, _| {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += step;
            zm[j] -= step;
            (f(&zp) - f(&zm)) / (2.0 * step)
        });
        worst = worst.max((&fd - &g).norm() / g.norm().max(1e-300));
    }
    max_error_check(Suite::Grad, "central differences", worst, 1e-6, samples)
}

fn stacking(rng: &mut SimRng, samples: usize) -> Raw {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let n = rng.random_range(1..=20);
        let m = rng.random_range(1..=20);
        let h = sample_modulation_matrix(n, m, rng).expect("positive dims");
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let hx = h.entries() * DVector::from_vec(x.clone());
        let lhs = stack_complex_vector(hx.as_slice());
        let rhs = stack_real(&h) * stack_complex_vector(&x);
        worst = worst.max((lhs - rhs).amax());
    }
    max_error_check(Suite::Stacking, "stack(Hx) = stack_real(H) stack(x)", worst, 1e-12, samples)
}

fn sample_variance(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn relative_check(suite: Suite, name: &'static str, got: f64, want: f64, draws: usize) -> Raw {
    let rel = (got / want - 1.0).abs();
    (suite, name, rel < 0.05, format!("{got:.5} vs {want:.5} (rel {rel:.3}) over {draws}"))
}

fn matrix_variance(rng: &mut SimRng, draws: usize) -> Raw {
    let m = 50;
    let n = draws.div_ceil(m);
    let h = sample_modulation_matrix(n, m, rng).expect("positive dims");
    let parts = h.entries().iter().flat_map(|c| [c.re, c.im]);
    // Each part carries half of the complex variance 1/M.
    let var = 2.0 * sample_variance(parts);
    relative_check(Suite::Calibration, "matrix entry variance", var, 1.0 / m as f64, n * m)
}

fn noise_variance(rng: &mut SimRng, draws: usize) -> Raw {
    let n0 = snr_to_n0(10.0, 150, 100);
    let w = sample_noise(draws, n0, rng);
    relative_check(Suite::Calibration, "noise variance", sample_variance(w.iter().copied()), n0 / 2.0, draws)
}

fn l1_kkt(rng: &mut SimRng, samples: usize) -> Raw {
    let mut failures = 0;
    for _ in 0..samples {
        let len = rng.random_range(1..=30);
        let v = DVector::from_fn(len, |_, _| rng.random_range(-3.0..3.0));
        let radius = rng.random_range(0.01..1.2) * v.lp_norm(1);
        let p = project_l1_ball(&v, radius);
        if !projection_kkt_holds(&v, &p, radius) {
            failures += 1;
        }
    }
    (Suite::L1Proj, "projection KKT", failures == 0, format!("{failures} failures over {samples}"))
}

/// Optimality of `p = Π(v)` onto `‖·‖₁ ≤ r`: feasibility, and `v - p = θ·s`
/// with `s ∈ ∂‖p‖₁`, `θ ≥ 0`, `θ(‖p‖₁ - r) = 0`.
fn projection_kkt_holds(v: &DVector<f64>, p: &DVector<f64>, radius: f64) -> bool {
    let tol = 1e-9 * (1.0 + v.amax());
    let l1 = p.lp_norm(1);
    if l1 > radius + tol {
        return false;
    }
    let w = v - p;
    let theta = w.amax();
    if theta <= tol {
        return true;
    }
    if (l1 - radius).abs() > tol {
        return false;
    }
    p.iter().zip(w.iter()).all(|(&pi, &wi)| {
        if pi.abs() > tol {
            (wi - theta * pi.signum()).abs() <= tol
        } else {
            wi.abs() <= theta + tol
        }
    })
}

fn ml_optimal(rng: &mut SimRng, samples: usize) -> Raw {
    let mut failures = 0;
    for _ in 0..samples {
        let k = rng.random_range(1..=10);
        let rows = rng.random_range(1..=10);
        let (h, y, _) = random_instance(rng, rows, k);
        let got = ml_oracle_parts(&h, &y, &MlConfig::default()).expect("small instance");
        let got_val = (&y - &h * &got.z_star).norm_squared();
        let brute = (0..1u32 << k)
            .map(|mask| {
                let z = DVector::from_fn(k, |j, _| if mask >> j & 1 == 1 { -1.0 } else { 1.0 });
                (&y - &h * z).norm_squared()
            })
            .fold(f64::INFINITY, f64::min);
        if got_val > brute + 1e-9 * (1.0 + brute) {
            failures += 1;
        }
    }
    (Suite::Ml, "matches exhaustive minimum", failures == 0, format!("{failures} failures over {samples}"))
}

fn fista_descent(rng: &mut SimRng, samples: usize) -> Raw {
    let cfg = SoavConfig::default();
    let mut failures = 0;
    for _ in 0..samples {
        let n = rng.random_range(2..=10);
        let m = rng.random_range(1..=n);
        let h = stack_real(&sample_modulation_matrix(n, m, rng).expect("positive dims"));
        let x = sample_symbols(2 * n, rng).expect("positive length");
        let y = transmit(&h, &x, snr_to_n0(10.0, n, m), rng).expect("shapes agree");
        let z0 = DVector::from_element(2 * n, 1.0);
        let out = fista_detect_parts(&h, &y, &cfg).expect("valid config");
        let start = objective(&z0, &h, &y, cfg.lambda).expect("shapes agree");
        let end = objective(&out.z_star, &h, &y, cfg.lambda).expect("shapes agree");
        if !(end <= start + 1e-12) {
            failures += 1;
        }
    }
    (Suite::Fista, "objective decreases from start", failures == 0, format!("{failures} failures over {samples}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_at_reduced_samples() {
        let out = run_selfcheck(&SelfCheckConfig { samples: 100, ..Default::default() }).unwrap();
        for c in &out {
            assert!(c.passed, "{} / {}: {}", c.suite, c.name, c.detail);
        }
        assert!(Suite::ALL.iter().all(|s| out.iter().any(|c| c.suite == *s)));
    }

    #[test]
    fn suite_filter_and_parsing() {
        let cfg = SelfCheckConfig { samples: 10, suites: vec!["prox".parse().unwrap()], seed: 1 };
        let out = run_selfcheck(&cfg).unwrap();
        assert!(out.iter().all(|c| c.suite == Suite::Prox));
        assert!("nope".parse::<Suite>().unwrap_err().is_config_error());
    }
}
