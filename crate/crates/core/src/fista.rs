//! Accelerated proximal gradient (FISTA) for `w·‖y - Hz‖₂² + g(z)`.
//!
//! The smooth term is fixed to a weighted least-squares fit; the nonsmooth
//! term enters only through its proximity operator, supplied by the caller.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `t_{k+1} = (1 + √(1 + 4 t_k²)) / 2`.
pub fn next_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// Iterates of one FISTA run.
///
/// `z_cur` holds `z⁽ᵏ⁾`, `z_prev` holds `z⁽ᵏ⁻¹⁾` and `z_tilde` the
/// extrapolated point where the next gradient is taken. Before the first
/// step all three equal the starting point and `t = 1`.
#[derive(Debug, Clone)]
pub struct FistaState {
    pub z_prev: DVector<f64>,
    pub z_cur: DVector<f64>,
    pub z_tilde: DVector<f64>,
    pub t: f64,
    pub k: usize,
}

impl FistaState {
    pub fn new(z0: DVector<f64>) -> Self {
        Self {
            z_prev: z0.clone(),
            z_cur: z0.clone(),
            z_tilde: z0,
            t: 1.0,
            k: 0,
        }
    }

    /// Moves `z_cur` to `z_prev` and writes the forward step at `z_tilde`
    /// into `z_cur`: `z̃ - step · 2w Hᵀ(Hz̃ - y)`.
    fn forward_step(&mut self, ls: &LeastSquares<'_>, step: f64, residual: &mut DVector<f64>) {
        std::mem::swap(&mut self.z_prev, &mut self.z_cur);
        residual.copy_from(ls.y);
        residual.gemv(1.0, ls.h, &self.z_tilde, -1.0);
        self.z_cur.copy_from(&self.z_tilde);
        self.z_cur.gemv_tr(-2.0 * ls.weight * step, ls.h, residual, 1.0);
    }

    /// Momentum update after `z_cur` has been through the prox.
    fn extrapolate(&mut self) {
        let t_next = next_momentum(self.t);
        let beta = (self.t - 1.0) / t_next;
        for ((zt, &zc), &zp) in self
            .z_tilde
            .iter_mut()
            .zip(self.z_cur.iter())
            .zip(self.z_prev.iter())
        {
            *zt = zc + beta * (zc - zp);
        }
        self.t = t_next;
        self.k += 1;
    }

    fn step_norm(&self) -> f64 {
        self.z_cur
            .iter()
            .zip(self.z_prev.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// `f(z) = weight · ‖y - Hz‖₂²`.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquares<'a> {
    pub h: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub weight: f64,
}

impl LeastSquares<'_> {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        let mut r = self.y.clone();
        r.gemv(-1.0, self.h, z, 1.0);
        self.weight * r.norm_squared()
    }

    /// `2w Hᵀ(Hz - y)`.
    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut r = self.y.clone();
        r.gemv(1.0, self.h, z, -1.0);
        let mut g = DVector::zeros(self.h.ncols());
        g.gemv_tr(2.0 * self.weight, self.h, &r, 0.0);
        g
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FistaParams {
    pub lipschitz: f64,
    pub max_iter: usize,
    /// Stop once `‖z⁽ᵏ⁾ - z⁽ᵏ⁻¹⁾‖₂ < tol`. Zero disables the test.
    pub tol: f64,
}

/// Runs FISTA from `state` until `max_iter` or the step tolerance is met.
///
/// `prox(v, γ)` must replace `v` by `prox_{γ g}(v)`. `observe` sees every
/// new `z⁽ᵏ⁾` with its 1-based iteration index. Returns the number of
/// iterations performed by this call.
pub fn run<P, O>(
    ls: &LeastSquares<'_>,
    params: FistaParams,
    state: &mut FistaState,
    mut prox: P,
    mut observe: O,
) -> Result<usize>
where
    P: FnMut(&mut DVector<f64>, f64),
    O: FnMut(usize, &DVector<f64>),
{
    let step = 1.0 / params.lipschitz;
    let mut residual = DVector::zeros(ls.h.nrows());
    let start = state.k;
    while state.k - start < params.max_iter {
        state.forward_step(ls, step, &mut residual);
        prox(&mut state.z_cur, step);
        if state.z_cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: state.k + 1,
            });
        }
        state.extrapolate();
        observe(state.k, &state.z_cur);
        if state.step_norm() < params.tol {
            break;
        }
    }
    Ok(state.k - start)
}

/// Final iterates of a batched run, one column per right-hand side.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub z: DMatrix<f64>,
    pub iterations: Vec<usize>,
}

/// FISTA on every column of `y` at once, sharing `H`.
///
/// Column `j` follows exactly the single-vector recursion of [`run`] started
/// from `z0[:, j]`; the products are formed with matrix-matrix kernels.
/// Columns that meet the step tolerance leave the batch at that iteration.
/// `prox(v, γ)` acts on one column.
pub fn run_batch<P>(
    h: &DMatrix<f64>,
    h_t: &DMatrix<f64>,
    y: &DMatrix<f64>,
    weight: f64,
    params: FistaParams,
    z0: DMatrix<f64>,
    mut prox: P,
) -> Result<BatchOutcome>
where
    P: FnMut(&mut [f64], f64),
{
    let (rows, k) = h.shape();
    debug_assert_eq!(h_t.shape(), (k, rows));
    debug_assert_eq!(y.nrows(), rows);
    debug_assert_eq!(z0.shape(), (k, y.ncols()));
    let step = 1.0 / params.lipschitz;
    let coef = -2.0 * weight * step;

    let mut z_out = z0.clone();
    let mut iterations = vec![0; y.ncols()];
    let mut active: Vec<usize> = (0..y.ncols()).collect();
    let mut y_a = y.clone();
    let mut z_prev = z0.clone();
    let mut z_cur = z0.clone();
    let mut z_tilde = z0;
    let mut residual = DMatrix::zeros(rows, active.len());
    let mut t = 1.0;

    for iter in 1..=params.max_iter {
        if active.is_empty() {
            break;
        }
        std::mem::swap(&mut z_prev, &mut z_cur);
        residual.copy_from(&y_a);
        residual.gemm(1.0, h, &z_tilde, -1.0);
        z_cur.copy_from(&z_tilde);
        z_cur.gemm(coef, h_t, &residual, 1.0);

        let t_next = next_momentum(t);
        let beta = (t - 1.0) / t_next;
        t = t_next;
        let mut done = Vec::new();
        for j in 0..active.len() {
            let mut col = z_cur.column_mut(j);
            let slice = col.as_mut_slice();
            prox(slice, step);
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { iteration: iter });
            }
            let mut step_sq = 0.0;
            for ((zt, &zc), &zp) in z_tilde
                .column_mut(j)
                .iter_mut()
                .zip(z_cur.column(j).iter())
                .zip(z_prev.column(j).iter())
            {
                let d = zc - zp;
                *zt = zc + beta * d;
                step_sq += d * d;
            }
            if step_sq.sqrt() < params.tol {
                done.push(j);
            }
        }

        if iter == params.max_iter {
            break;
        }
        if !done.is_empty() {
            for &j in &done {
                z_out.set_column(active[j], &z_cur.column(j));
                iterations[active[j]] = iter;
            }
            let keep: Vec<usize> = (0..active.len()).filter(|j| !done.contains(j)).collect();
            let select = |m: &DMatrix<f64>| m.select_columns(keep.iter());
            y_a = select(&y_a);
            z_prev = select(&z_prev);
            z_cur = select(&z_cur);
            z_tilde = select(&z_tilde);
            residual = DMatrix::zeros(rows, keep.len());
            active = keep.into_iter().map(|j| active[j]).collect();
        }
    }
    for (j, &col) in active.iter().enumerate() {
        z_out.set_column(col, &z_cur.column(j));
        iterations[col] = params.max_iter;
    }
    Ok(BatchOutcome { z: z_out, iterations })
}
