use crate::error::{Error, Result};

use super::{EigenSystem, SymMatrixState};

/// Sweep limit of the Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to `‖M‖_F`.
pub const EIGH_TOL: f64 = 1e-12;

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues come out ascending; each eigenvector is signed so that its
/// largest-magnitude component (first one on ties) is positive.
pub fn eigh(state: &SymMatrixState) -> Result<EigenSystem> {
    eigh_dense(state.n, &state.m)
}

pub fn eigh_dense(n: usize, m: &[f64]) -> Result<EigenSystem> {
    if m.len() != n * n {
        return Err(Error::Domain(format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, m.len())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut a = m.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = n < 2 || norm == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::Convergence { sweeps: MAX_SWEEPS });
        }
        sweep += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let g = a[k * n + p];
                    let h = a[k * n + q];
                    let kp = c * g - s * h;
                    let kq = s * g + c * h;
                    a[k * n + p] = kp;
                    a[p * n + k] = kp;
                    a[k * n + q] = kq;
                    a[q * n + k] = kq;
                }
                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let g = v[k * n + p];
                    let h = v[k * n + q];
                    v[k * n + p] = c * g - s * h;
                    v[k * n + q] = s * g + c * h;
                }
            }
        }
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        converged = off.sqrt() <= EIGH_TOL * norm;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        let mut big = 0;
        for k in 0..n {
            if v[k * n + src].abs() > v[big * n + src].abs() {
                big = k;
            }
        }
        let sign = if v[big * n + src] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[k * n + col] = sign * v[k * n + src];
        }
    }
    Ok(EigenSystem { n, values, vectors })
}
