//! Random modulation matrices, binary symbols and the noisy observation model
//! `y = Hx + w`.
//!
//! QPSK symbols `a + ib` with `a, b ∈ {+1, -1}` are handled through the usual
//! real stacking: a complex `M×N` system becomes the real `2M×2N` system with
//! block matrix `[[Re H, -Im H], [Im H, Re H]]` acting on `[Re x; Im x]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    #[default]
    Qpsk,
}

impl Modulation {
    /// Real unknowns per transmitted symbol.
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            other => Err(Error::Config(format!("unknown modulation '{other}'"))),
        }
    }
}

/// Complex `M×N` modulation matrix with i.i.d. `CN(0, 1/M)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexModulationMatrix {
    entries: DMatrix<Complex64>,
}

impl ComplexModulationMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "modulation matrix must be non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `M`, the time-frequency dimension.
    pub fn n_rows(&self) -> usize {
        self.entries.nrows()
    }

    /// `N`, the number of symbols.
    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// A vector over the binary alphabet `{+1, -1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolVector(Vec<i8>);

impl SymbolVector {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(index) = bits.iter().position(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidSymbol {
                index,
                value: bits[index].to_string(),
            });
        }
        Ok(Self(bits))
    }

    pub(crate) fn from_signs_unchecked(bits: Vec<i8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b == 1 || b == -1));
        Self(bits)
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&b| f64::from(b)))
    }

    /// Number of positions where `self` and `other` differ.
    pub fn bit_errors(&self, other: &SymbolVector) -> usize {
        assert_eq!(self.len(), other.len(), "symbol vectors differ in length");
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn negated(&self) -> SymbolVector {
        SymbolVector(self.0.iter().map(|&b| -b).collect())
    }
}

impl fmt::Display for SymbolVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Real observation model `y = Hx + w`, `w ~ N(0, (N0/2) I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLinearSystem {
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
    pub n0: f64,
    pub modulation: Modulation,
}

impl RealLinearSystem {
    pub fn new(h: DMatrix<f64>, y: DVector<f64>, n0: f64, modulation: Modulation) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "system matrix must be non-empty, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if y.len() != h.nrows() {
            return Err(Error::DimensionMismatch {
                context: "observation length",
                expected: h.nrows(),
                found: y.len(),
            });
        }
        if !(n0 >= 0.0 && n0.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level must be finite and >= 0, got {n0}")));
        }
        Ok(Self { h, y, n0, modulation })
    }

    /// Number of real unknowns.
    pub fn n_unknowns(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_observations(&self) -> usize {
        self.h.nrows()
    }
}

/// Knobs for drawing one channel instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub n_symbols: usize,
    pub n_dims: usize,
    pub modulation: Modulation,
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 || self.n_dims == 0 {
            return Err(Error::InvalidDimension(format!(
                "n_symbols and n_dims must be positive, got N={} M={}",
                self.n_symbols, self.n_dims
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidParameter(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        Ok(())
    }

    /// Draws a matrix, a symbol vector and one noisy observation from `seed`.
    /// Returns the system together with the transmitted symbols.
    pub fn realize(&self) -> Result<(RealLinearSystem, SymbolVector)> {
        self.validate()?;
        let mut rng = crate::rng::seeded(self.seed);
        let h = sample_real_matrix(self.modulation, self.n_symbols, self.n_dims, &mut rng)?;
        let x = sample_symbols(h.ncols(), &mut rng)?;
        let n0 = snr_to_n0(self.snr_db, self.n_symbols, self.n_dims);
        let y = transmit(&h, &x, n0, &mut rng)?;
        let system = RealLinearSystem::new(h, y, n0, self.modulation)?;
        Ok((system, x))
    }
}

fn check_dims(n_symbols: usize, n_dims: usize) -> Result<()> {
    if n_symbols == 0 || n_dims == 0 {
        return Err(Error::InvalidDimension(format!(
            "n_symbols and n_dims must be positive, got N={n_symbols} M={n_dims}"
        )));
    }
    Ok(())
}

/// Draws an `M×N` complex matrix whose real and imaginary parts are
/// independent `N(0, 1/(2M))`.
pub fn sample_modulation_matrix<R: Rng + ?Sized>(
    n_symbols: usize,
    n_dims: usize,
    rng: &mut R,
) -> Result<ComplexModulationMatrix> {
    check_dims(n_symbols, n_dims)?;
    let sd = (0.5 / n_dims as f64).sqrt();
    let entries = DMatrix::from_fn(n_dims, n_symbols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(sd * re, sd * im)
    });
    ComplexModulationMatrix::new(entries)
}

/// Draws a real `M×N` matrix with i.i.d. `N(0, 1/M)` entries (BPSK model).
pub fn sample_real_modulation_matrix<R: Rng + ?Sized>(
    n_symbols: usize,
    n_dims: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_dims(n_symbols, n_dims)?;
    let sd = (1.0 / n_dims as f64).sqrt();
    Ok(DMatrix::from_fn(n_dims, n_symbols, |_, _| {
        sd * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// Draws the real system matrix for `modulation`: stacked `2M×2N` for QPSK,
/// plain `M×N` for BPSK.
pub fn sample_real_matrix<R: Rng + ?Sized>(
    modulation: Modulation,
    n_symbols: usize,
    n_dims: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    match modulation {
        Modulation::Qpsk => Ok(stack_real(&sample_modulation_matrix(n_symbols, n_dims, rng)?)),
        Modulation::Bpsk => sample_real_modulation_matrix(n_symbols, n_dims, rng),
    }
}

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn stack_real(h_complex: &ComplexModulationMatrix) -> DMatrix<f64> {
    let h = h_complex.entries();
    let (m, n) = h.shape();
    DMatrix::from_fn(2 * m, 2 * n, |i, j| {
        let c = h[(i % m, j % n)];
        match (i < m, j < n) {
            (true, true) | (false, false) => c.re,
            (true, false) => -c.im,
            (false, true) => c.im,
        }
    })
}

/// `[Re v; Im v]` for an arbitrary complex vector.
pub fn stack_complex_vector(v: &[Complex64]) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Stacks unnormalized QPSK symbols `(±1 ± i)` into a length-`2N` binary vector.
pub fn stack_symbols(x_complex: &[Complex64]) -> Result<SymbolVector> {
    let component = |index: usize, value: f64| -> Result<i8> {
        if value == 1.0 {
            Ok(1)
        } else if value == -1.0 {
            Ok(-1)
        } else {
            Err(Error::InvalidSymbol {
                index,
                value: format!("{}", x_complex[index % x_complex.len().max(1)]),
            })
        }
    };
    let n = x_complex.len();
    let mut bits = Vec::with_capacity(2 * n);
    for (i, c) in x_complex.iter().enumerate() {
        bits.push(component(i, c.re)?);
    }
    for (i, c) in x_complex.iter().enumerate() {
        bits.push(component(i, c.im)?);
    }
    Ok(SymbolVector::from_signs_unchecked(bits))
}

/// Inverse of [`stack_symbols`].
pub fn unstack_symbols(x: &SymbolVector) -> Result<Vec<Complex64>> {
    if x.len() % 2 != 0 {
        return Err(Error::InvalidDimension(format!(
            "stacked QPSK vector must have even length, got {}",
            x.len()
        )));
    }
    let n = x.len() / 2;
    let bits = x.bits();
    Ok((0..n)
        .map(|i| Complex64::new(f64::from(bits[i]), f64::from(bits[n + i])))
        .collect())
}

/// I.i.d. uniform draws over `{+1, -1}`.
pub fn sample_symbols<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<SymbolVector> {
    if k == 0 {
        return Err(Error::InvalidDimension("symbol count must be positive".into()));
    }
    let bits = (0..k).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    Ok(SymbolVector::from_signs_unchecked(bits))
}

/// Noise level for a given SNR.
///
/// SNR is the per-real-dimension received signal power over the per-real-
/// dimension noise power: each stacked row of `Hx` has power `N/M` and each
/// noise sample has variance `N0/2`, so `N0 = (2N/M) · 10^(-snr_db/10)`.
pub fn snr_to_n0(snr_db: f64, n_symbols: usize, n_dims: usize) -> f64 {
    2.0 * n_symbols as f64 / n_dims as f64 * 10f64.powf(-snr_db / 10.0)
}

/// Draws a `N(0, (n0/2) I)` noise vector of length `len`.
pub fn sample_noise<R: Rng + ?Sized>(len: usize, n0: f64, rng: &mut R) -> DVector<f64> {
    let sd = (n0 / 2.0).sqrt();
    DVector::from_fn(len, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// `y = Hx + w`. With `n0 == 0` no random numbers are consumed.
pub fn transmit<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    x: &SymbolVector,
    n0: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if h.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "transmit: matrix columns vs symbol length",
            expected: h.ncols(),
            found: x.len(),
        });
    }
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be finite and >= 0, got {n0}")));
    }
    let mut y = h * x.to_dvector();
    if n0 > 0.0 {
        y += sample_noise(h.nrows(), n0, rng);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matrix_dimensions() {
        let h = sample_modulation_matrix(15, 10, &mut seeded(1)).unwrap();
        assert_eq!(h.n_rows(), 10);
        assert_eq!(h.n_cols(), 15);
        assert_eq!(stack_real(&h).shape(), (20, 30));
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(matches!(
            sample_modulation_matrix(0, 3, &mut seeded(1)),
            Err(Error::InvalidDimension(_))
        ));
        assert!(sample_modulation_matrix(3, 0, &mut seeded(1)).is_err());
        assert!(sample_symbols(0, &mut seeded(1)).is_err());
    }

    #[test]
    fn matrix_is_deterministic() {
        let a = sample_modulation_matrix(1, 1, &mut seeded(42)).unwrap();
        let b = sample_modulation_matrix(1, 1, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_entry_variance() {
        let h = sample_modulation_matrix(150, 100, &mut seeded(3)).unwrap();
        let n = h.entries().len() as f64;
        let var = h.entries().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((0.0095..=0.0105).contains(&var), "variance {var}");
    }

    #[test]
    fn stack_of_imaginary_unit() {
        let h = ComplexModulationMatrix::new(DMatrix::from_element(1, 1, c(0.0, 1.0))).unwrap();
        assert_eq!(stack_real(&h), DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn stack_of_real_matrix_is_block_diagonal() {
        let re = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = ComplexModulationMatrix::new(re.map(|v| c(v, 0.0))).unwrap();
        let s = stack_real(&h);
        assert_eq!(s.view((0, 0), (2, 3)), re);
        assert_eq!(s.view((2, 3), (2, 3)), re);
        assert!(s.view((0, 3), (2, 3)).iter().all(|&v| v == 0.0));
        assert!(s.view((2, 0), (2, 3)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stacking_commutes_with_multiplication() {
        let mut rng = seeded(9);
        let h = sample_modulation_matrix(4, 3, &mut rng).unwrap();
        let x: Vec<Complex64> = (0..4)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let hx = h.entries() * DVector::from_column_slice(&x);
        let lhs = stack_complex_vector(hx.as_slice());
        let rhs = stack_real(&h) * stack_complex_vector(&x);
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn symbol_stacking_examples() {
        assert_eq!(stack_symbols(&[c(1.0, 1.0)]).unwrap().bits(), &[1, 1]);
        assert_eq!(
            stack_symbols(&[c(1.0, -1.0), c(-1.0, 1.0)]).unwrap().bits(),
            &[1, -1, -1, 1]
        );
        assert!(matches!(
            stack_symbols(&[c(1.0, 1.0), c(0.5, 1.0)]),
            Err(Error::InvalidSymbol { index: 1, .. })
        ));
    }

    #[test]
    fn symbol_round_trip() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let x: Vec<Complex64> = (0..n)
                .map(|_| {
                    let s = |b: bool| if b { 1.0 } else { -1.0 };
                    c(s(rng.random()), s(rng.random()))
                })
                .collect();
            assert_eq!(unstack_symbols(&stack_symbols(&x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn symbols_balanced_and_in_alphabet() {
        let x = sample_symbols(100_000, &mut seeded(11)).unwrap();
        assert!(x.bits().iter().all(|&b| b == 1 || b == -1));
        let frac = x.bits().iter().filter(|&&b| b == 1).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&frac), "fraction {frac}");
        assert_eq!(
            sample_symbols(1, &mut seeded(4)).unwrap(),
            sample_symbols(1, &mut seeded(4)).unwrap()
        );
    }

    #[test]
    fn snr_mapping() {
        assert_eq!(snr_to_n0(0.0, 7, 7), 2.0);
        assert!((snr_to_n0(10.0, 150, 100) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn noiseless_transmit_is_exact() {
        let mut rng = seeded(2);
        let h = sample_real_matrix(Modulation::Qpsk, 5, 4, &mut rng).unwrap();
        let x = sample_symbols(10, &mut rng).unwrap();
        let y = transmit(&h, &x, 0.0, &mut rng).unwrap();
        assert_eq!(y, &h * x.to_dvector());
    }

    #[test]
    fn transmit_is_deterministic_and_checks_dims() {
        let h = DMatrix::identity(3, 3);
        let x = SymbolVector::new(vec![1, -1, 1]).unwrap();
        let a = transmit(&h, &x, 1.0, &mut seeded(8)).unwrap();
        let b = transmit(&h, &x, 1.0, &mut seeded(8)).unwrap();
        assert_eq!(a, b);
        let short = SymbolVector::new(vec![1, -1]).unwrap();
        assert!(matches!(
            transmit(&h, &short, 1.0, &mut seeded(8)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symbol_vector_rejects_non_alphabet() {
        assert!(SymbolVector::new(vec![1, 0, -1]).is_err());
    }

    #[test]
    fn realize_uses_requested_shape() {
        let cfg = ChannelConfig {
            n_symbols: 6,
            n_dims: 4,
            modulation: Modulation::Qpsk,
            snr_db: 10.0,
            seed: 1,
        };
        let (sys, x) = cfg.realize().unwrap();
        assert_eq!(sys.h.shape(), (8, 12));
        assert_eq!(x.len(), 12);
        let bpsk = ChannelConfig { modulation: Modulation::Bpsk, ..cfg };
        assert_eq!(bpsk.realize().unwrap().0.h.shape(), (4, 6));
    }
}
