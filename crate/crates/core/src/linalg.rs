use nalgebra::{DMatrix, DVector};

/// Estimates `σ_max(H)²` by power iteration on `HᵀH`, starting from the
/// normalized all-ones vector. Stops when the Rayleigh quotient changes by
/// less than `rel_tol` relative, or after `max_iter` steps.
pub fn spectral_norm_sq(h: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    let n = h.ncols();
    if n == 0 || h.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut hv = DVector::zeros(h.nrows());
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        hv.gemv(1.0, h, &v, 0.0);
        let next = hv.norm_squared();
        v.gemv_tr(1.0, h, &hv, 0.0);
        let norm = v.norm();
        if norm == 0.0 {
            return next;
        }
        v /= norm;
        let converged = (next - estimate).abs() <= rel_tol * next;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// `‖y - Hz‖₂²` written into a scratch residual buffer.
pub(crate) fn residual_norm_sq(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    scratch: &mut DVector<f64>,
) -> f64 {
    scratch.copy_from(y);
    scratch.gemv(-1.0, h, z, 1.0);
    scratch.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_on_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -5.0, 1.0]));
        let s = spectral_norm_sq(&h, 1e-12, 1000);
        assert!((s - 25.0).abs() < 1e-8, "{s}");
    }

    #[test]
    fn power_iteration_on_rank_one() {
        let u = DVector::from_vec(vec![1.0, 2.0]);
        let v = DVector::from_vec(vec![2.0, 0.0, 1.0]);
        let h = &u * v.transpose();
        let s = spectral_norm_sq(&h, 1e-12, 100);
        assert!((s - 25.0).abs() < 1e-9, "{s}");
    }
}
