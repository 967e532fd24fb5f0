use crate::linalg::DenseMatrix;

use super::{LieGroupError, Result};

const MAX_TAYLOR_TERMS: usize = 64;
const MAX_LOG_TERMS: usize = 512;
const MAX_SQRT_STEPS: usize = 64;
const MAX_DB_ITERATIONS: usize = 100;

/// Matrix exponential by scaling and squaring around a Taylor series.
///
/// The input is scaled by `2^-s` so that its 1-norm is below 0.5, the
/// series is summed until the next term is below machine precision
/// relative to the partial sum, and the result is squared `s` times.
/// Upper-triangular inputs give upper-triangular outputs with exactly zero
/// lower entries.
pub fn matrix_exp(a: &DenseMatrix) -> DenseMatrix {
    assert!(a.is_square(), "matrix_exp: matrix is not square");
    let n = a.rows();
    let norm = a.norm1();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale((-squarings as f64).exp2());

    let mut result = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=MAX_TAYLOR_TERMS {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        result.add_scaled_inplace(1.0, &term);
        if term.max_abs() <= f64::EPSILON * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Square roots are taken until `||A - I||_1 < 0.25`; then
/// `log(I + H) = sum_{t>=1} (-1)^(t-1) H^t / t` is summed to machine
/// precision and multiplied back by `2^s`. Upper-triangular inputs use an
/// exact triangular square-root recurrence; anything else falls back to
/// the Denman-Beavers Newton iteration.
pub fn matrix_log(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(LieGroupError::DimensionMismatch {
            expected: a.rows(),
            actual: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(LieGroupError::NonFinite);
    }
    let n = a.rows();
    let identity = DenseMatrix::identity(n);
    let triangular = a.is_upper_triangular();
    if triangular && a.diag().iter().any(|&d| d <= 0.0) {
        return Err(LieGroupError::NonConvergent(
            "matrix_log (non-positive diagonal)",
        ));
    }

    let mut x = a.clone();
    let mut roots = 0;
    while x.sub(&identity).norm1() >= 0.25 {
        if roots == MAX_SQRT_STEPS {
            return Err(LieGroupError::NonConvergent("matrix_log inverse scaling"));
        }
        x = if triangular {
            sqrtm_upper_triangular(&x)?
        } else {
            sqrtm_denman_beavers(&x)?
        };
        roots += 1;
    }

    let h = x.sub(&identity);
    let mut result = DenseMatrix::zeros(n, n);
    let mut power = h.clone();
    let mut converged = false;
    for t in 1..=MAX_LOG_TERMS {
        let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
        let coeff = sign / t as f64;
        result.add_scaled_inplace(coeff, &power);
        if power.max_abs() / (t as f64) <= f64::EPSILON * result.max_abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        power = power.matmul(&h);
    }
    if !converged {
        return Err(LieGroupError::NonConvergent("matrix_log series"));
    }
    Ok(result.scale((roots as f64).exp2()))
}

/// Principal square root of an upper-triangular matrix with positive
/// diagonal, via the column recurrence
/// `R_ij = (T_ij - sum_{i<k<j} R_ik R_kj) / (R_ii + R_jj)`.
pub fn sqrtm_upper_triangular(t: &DenseMatrix) -> Result<DenseMatrix> {
    let n = t.rows();
    let mut r = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let d = t[(i, i)];
        if d <= 0.0 {
            return Err(LieGroupError::NonConvergent(
                "triangular sqrt (non-positive diagonal)",
            ));
        }
        r[(i, i)] = d.sqrt();
    }
    for gap in 1..n {
        for i in 0..n - gap {
            let j = i + gap;
            let mut acc = t[(i, j)];
            for k in i + 1..j {
                acc -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = acc / (r[(i, i)] + r[(j, j)]);
        }
    }
    Ok(r)
}

fn sqrtm_denman_beavers(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut y = a.clone();
    let mut z = DenseMatrix::identity(n);
    for _ in 0..MAX_DB_ITERATIONS {
        let y_inv = y.inverse().ok_or(LieGroupError::NonConvergent(
            "Denman-Beavers (singular iterate)",
        ))?;
        let z_inv = z.inverse().ok_or(LieGroupError::NonConvergent(
            "Denman-Beavers (singular iterate)",
        ))?;
        let y_next = y.add(&z_inv).scale(0.5);
        let z_next = z.add(&y_inv).scale(0.5);
        let step = y_next.sub(&y).norm1();
        y = y_next;
        z = z_next;
        if !y.is_finite() {
            break;
        }
        if step <= 4.0 * f64::EPSILON * y.norm1() {
            return Ok(y);
        }
    }
    Err(LieGroupError::NonConvergent("Denman-Beavers square root"))
}
