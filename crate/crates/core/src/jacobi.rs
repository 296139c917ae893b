//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use nalgebra::DMatrix;

pub const MAX_SWEEPS: usize = 100;
pub const TOLERANCE: f64 = 1e-15;

/// Eigen-decomposition `A = U^T diag(values) U` with the rows of `U` holding
/// the eigenvectors and `values` sorted in descending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub rows: DMatrix<f64>,
}

/// Off-diagonal entries at or below `TOLERANCE * sqrt(|a_pp a_qq|)` are left
/// alone. The relative criterion keeps small eigenvalues of graded matrices
/// accurate, which the sign tests rely on.
fn needs_rotation(a: &DMatrix<f64>, p: usize, q: usize) -> bool {
    let apq = a[(p, q)].abs();
    apq > TOLERANCE * (a[(p, p)] * a[(q, q)]).abs().sqrt() && apq > f64::MIN_POSITIVE
}

/// Returns `None` when the sweep cap is hit before every off-diagonal entry is
/// negligible relative to its diagonal pair.
pub fn decompose(matrix: &DMatrix<f64>) -> Option<SymmetricEigen> {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    let mut converged = false;
    let mut sweep = 0;
    while !converged && sweep < MAX_SWEEPS {
        converged = true;
        for p in 0..n {
            for q in p + 1..n {
                if !needs_rotation(&a, p, q) {
                    continue;
                }
                converged = false;
                let apq = a[(p, q)];
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with J the rotation in the (p, q) plane.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
    }
    if !converged {
        return None;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    // Columns of v are eigenvectors; store them as rows.
    let rows = DMatrix::from_fn(n, n, |r, c| v[(c, order[r])]);
    Some(SymmetricEigen { values, rows })
}
