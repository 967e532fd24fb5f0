use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;

use super::kernels::{matrix_exp, matrix_log};
use super::{LieGroupError, Result};

/// A Gaussian `N(mu, U U^T)` stored as its upper-triangular affine transform.
///
/// Invariants: `u` is `n x n`, strictly-lower entries are exactly zero and
/// the diagonal is strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utdat {
    u: DenseMatrix,
    mu: Vec<f64>,
}

impl Utdat {
    pub fn new(u: DenseMatrix, mu: Vec<f64>) -> Result<Self> {
        if !u.is_square() {
            return Err(LieGroupError::InvalidUtdat(format!(
                "factor is {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        if mu.len() != u.rows() {
            return Err(LieGroupError::DimensionMismatch {
                expected: u.rows(),
                actual: mu.len(),
            });
        }
        if !u.is_finite() || mu.iter().any(|v| !v.is_finite()) {
            return Err(LieGroupError::NonFinite);
        }
        if !u.is_upper_triangular() {
            return Err(LieGroupError::InvalidUtdat(
                "factor has non-zero strictly-lower entries".into(),
            ));
        }
        if let Some(i) = u.diag().iter().position(|&d| d <= 0.0) {
            return Err(LieGroupError::InvalidUtdat(format!(
                "diagonal entry {i} is not positive"
            )));
        }
        Ok(Self { u, mu })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            u: DenseMatrix::identity(n),
            mu: vec![0.0; n],
        }
    }

    /// The UTDAT of a diagonal Gaussian with standard deviations `sigma`.
    pub fn from_diagonal(sigma: &[f64], mu: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::from_diag(sigma), mu.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// The `(n+1)x(n+1)` matrix `[[U, mu], [0, 1]]`.
    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = self.u[(i, j)];
            }
            m[(i, n)] = self.mu[i];
        }
        m[(n, n)] = 1.0;
        m
    }

    /// Reads back an embedded matrix. The bottom row must be `(0, ..., 0, 1)`.
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() < 2 {
            return Err(LieGroupError::InvalidUtdat(format!(
                "embedded matrix is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows() - 1;
        let bottom_ok = (0..n).all(|j| m[(n, j)] == 0.0) && m[(n, n)] == 1.0;
        if !bottom_ok {
            return Err(LieGroupError::InvalidUtdat(
                "bottom row is not (0, ..., 0, 1)".into(),
            ));
        }
        let u = DenseMatrix::from_fn(n, n, |i, j| if j >= i { m[(i, j)] } else { 0.0 });
        let mu = (0..n).map(|i| m[(i, n)]).collect();
        Self::new(u, mu)
    }

    /// Builds from an embedded product whose lower part is zero only up to
    /// rounding; strictly-lower entries and the bottom row are reset.
    fn from_matrix_projected(m: &DenseMatrix) -> Result<Self> {
        let n = m.rows() - 1;
        let u = DenseMatrix::from_fn(n, n, |i, j| if j >= i { m[(i, j)] } else { 0.0 });
        let mu = (0..n).map(|i| m[(i, n)]).collect();
        Self::new(u, mu)
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() != other {
            return Err(LieGroupError::DimensionMismatch {
                expected: self.dim(),
                actual: other,
            });
        }
        Ok(())
    }
}

/// An element of the Lie algebra: `[[M, t], [0, 0]]` with `M` upper
/// triangular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentMatrix {
    m: DenseMatrix,
    t: Vec<f64>,
}

impl TangentMatrix {
    pub fn new(m: DenseMatrix, t: Vec<f64>) -> Result<Self> {
        if !m.is_square() || m.rows() != t.len() {
            return Err(LieGroupError::DimensionMismatch {
                expected: m.rows(),
                actual: t.len(),
            });
        }
        if !m.is_finite() || t.iter().any(|v| !v.is_finite()) {
            return Err(LieGroupError::NonFinite);
        }
        if !m.is_upper_triangular() {
            return Err(LieGroupError::InvalidTangent(
                "linear part has non-zero strictly-lower entries".into(),
            ));
        }
        Ok(Self { m, t })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DenseMatrix::zeros(n, n),
            t: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn linear(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn translation(&self) -> &[f64] {
        &self.t
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.dim();
        let mut g = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in i..n {
                g[(i, j)] = self.m[(i, j)];
            }
            g[(i, n)] = self.t[i];
        }
        g
    }

    /// Reads an embedded algebra element. Entries that must vanish are
    /// accepted when they are rounding-sized and then set to zero.
    pub fn from_matrix(g: &DenseMatrix) -> Result<Self> {
        if !g.is_square() || g.rows() < 2 {
            return Err(LieGroupError::InvalidTangent(format!(
                "embedded matrix is {}x{}",
                g.rows(),
                g.cols()
            )));
        }
        let n = g.rows() - 1;
        let tol = 1e-12 * g.max_abs().max(1.0);
        let stray = (0..=n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .chain(std::iter::once((n, n)))
            .map(|(i, j)| g[(i, j)].abs())
            .fold(0.0, f64::max);
        if stray > tol {
            return Err(LieGroupError::InvalidTangent(format!(
                "entry of size {stray:e} outside the upper-triangular affine pattern"
            )));
        }
        let m = DenseMatrix::from_fn(n, n, |i, j| if j >= i { g[(i, j)] } else { 0.0 });
        let t = (0..n).map(|i| g[(i, n)]).collect();
        Self::new(m, t)
    }

    /// Frobenius norm of the embedded matrix.
    pub fn norm(&self) -> f64 {
        let m2: f64 = self.m.as_slice().iter().map(|v| v * v).sum();
        let t2: f64 = self.t.iter().map(|v| v * v).sum();
        (m2 + t2).sqrt()
    }
}

/// Upper Cholesky factor of `sigma` and the UTDAT of `N(mu, sigma)`.
///
/// With `J` the reversal permutation, `J sigma J = L L^T` gives
/// `sigma = (J L J)(J L J)^T` and `J L J` is upper triangular with the
/// same (positive) diagonal entries as `L`, reversed.
pub fn utdat_from_gaussian(mu: &[f64], sigma: &DenseMatrix) -> Result<Utdat> {
    let n = mu.len();
    if sigma.rows() != n || sigma.cols() != n {
        return Err(LieGroupError::DimensionMismatch {
            expected: n,
            actual: sigma.rows().max(sigma.cols()),
        });
    }
    let flipped = DenseMatrix::from_fn(n, n, |i, j| sigma[(n - 1 - i, n - 1 - j)]);
    let lower = cholesky_lower(&flipped).map_err(|err| match err {
        LieGroupError::NonPositiveDefinite { index, pivot } => LieGroupError::NonPositiveDefinite {
            index: n - 1 - index,
            pivot,
        },
        other => other,
    })?;
    let u = DenseMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            lower[(n - 1 - i, n - 1 - j)]
        } else {
            0.0
        }
    });
    Utdat::new(u, mu.to_vec())
}

fn cholesky_lower(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(LieGroupError::NonPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Mean and covariance `U U^T` of the Gaussian a UTDAT represents.
pub fn gaussian_from_utdat(g: &Utdat) -> (Vec<f64>, DenseMatrix) {
    let u = g.u();
    (g.mu().to_vec(), u.matmul(&u.transpose()))
}

/// `(U1, mu1) * (U2, mu2) = (U1 U2, U1 mu2 + mu1)`.
pub fn group_mul(a: &Utdat, b: &Utdat) -> Result<Utdat> {
    a.check_dim(b.dim())?;
    let n = a.dim();
    let prod = a.u.matmul(&b.u);
    let u = DenseMatrix::from_fn(n, n, |i, j| if j >= i { prod[(i, j)] } else { 0.0 });
    let mut mu = a.u.matvec(&b.mu);
    for (m, &c) in mu.iter_mut().zip(&a.mu) {
        *m += c;
    }
    Utdat::new(u, mu)
}

/// `(U, mu)^-1 = (U^-1, -U^-1 mu)`; `U^-1` by back substitution.
pub fn group_inv(g: &Utdat) -> Utdat {
    let n = g.dim();
    let u = &g.u;
    let mut inv = DenseMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / u[(j, j)];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += u[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / u[(i, i)];
        }
    }
    let mu = inv.matvec(&g.mu).into_iter().map(|v| -v).collect();
    // diagonal entries are reciprocals of positive numbers
    Utdat { u: inv, mu }
}

/// Projects `g` into the tangent space at `base`: `log(base^-1 g)`.
pub fn log_map(g: &Utdat, base: &Utdat) -> Result<TangentMatrix> {
    base.check_dim(g.dim())?;
    let rel = group_mul(&group_inv(base), g)?;
    TangentMatrix::from_matrix(&matrix_log(&rel.to_matrix())?)
}

/// Maps a tangent vector at `base` back to the group: `base exp(tangent)`.
pub fn exp_map(tangent: &TangentMatrix, base: &Utdat) -> Result<Utdat> {
    base.check_dim(tangent.dim())?;
    let step = Utdat::from_matrix_projected(&matrix_exp(&tangent.to_matrix()))?;
    group_mul(base, &step)
}

/// Left-invariant geodesic distance `|| log(a^-1 b) ||_F`.
pub fn geodesic_distance(a: &Utdat, b: &Utdat) -> Result<f64> {
    Ok(log_map(b, a)?.norm())
}

/// Affine image `U v + mu` of a standard-normal draw `v`.
pub fn sample_latent(g: &Utdat, v: &[f64]) -> Result<Vec<f64>> {
    g.check_dim(v.len())?;
    let mut z = g.u.matvec(v);
    for (z, &m) in z.iter_mut().zip(&g.mu) {
        *z += m;
    }
    Ok(z)
}

/// Outcome of the Karcher fixed-point iteration.
#[derive(Clone, Debug)]
pub struct KarcherMean {
    pub mean: Utdat,
    pub iterations: usize,
    /// Frobenius norm of the tangent mean at the returned point.
    pub residual: f64,
    pub converged: bool,
}

/// Intrinsic mean `argmin_G sum_i d(G, G_i)^2`.
///
/// Iterates `G <- G exp(mean_i log(G^-1 G_i))` from the first input until
/// the tangent mean is shorter than `tol`. When `max_iter` is exhausted the
/// last iterate comes back with `converged == false`.
pub fn intrinsic_mean(gs: &[Utdat], tol: f64, max_iter: usize) -> Result<KarcherMean> {
    let first = gs.first().ok_or(LieGroupError::EmptyBatch)?;
    let n = first.dim();
    for g in gs {
        first.check_dim(g.dim())?;
    }
    let mut mean = first.clone();
    let scale = 1.0 / gs.len() as f64;
    let mut iterations = 0;
    loop {
        let mut acc = DenseMatrix::zeros(n + 1, n + 1);
        for g in gs {
            acc.add_scaled_inplace(scale, &log_map(g, &mean)?.to_matrix());
        }
        let step = TangentMatrix::from_matrix(&acc)?;
        let residual = step.norm();
        if residual < tol || iterations == max_iter {
            return Ok(KarcherMean {
                mean,
                iterations,
                residual,
                converged: residual < tol,
            });
        }
        mean = exp_map(&step, &mean)?;
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn diag(sigma: &[f64], mu: &[f64]) -> Utdat {
        Utdat::from_diagonal(sigma, mu).unwrap()
    }

    #[test]
    fn from_gaussian_examples() {
        let g = utdat_from_gaussian(&[0.0, 0.0], &DenseMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(g.u(), &DenseMatrix::from_diag(&[2.0, 3.0]));

        let sigma = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 1.0]]);
        let g = utdat_from_gaussian(&[1.0, 2.0], &sigma).unwrap();
        let expect = DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]);
        assert!(g.u().max_abs_diff(&expect) < 1e-15);
        assert_eq!(g.mu(), &[1.0, 2.0]);
        let uut = g.u().matmul(&g.u().transpose());
        assert!(uut.max_abs_diff(&sigma) < 1e-10);

        let g = utdat_from_gaussian(&[0.0], &DenseMatrix::from_rows(&[[1.0]])).unwrap();
        assert_eq!(g, Utdat::identity(1));
    }

    #[test]
    fn from_gaussian_rejects_indefinite() {
        let sigma = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            utdat_from_gaussian(&[0.0, 0.0], &sigma),
            Err(LieGroupError::NonPositiveDefinite { .. })
        ));
        assert!(matches!(
            utdat_from_gaussian(&[0.0], &DenseMatrix::identity(2)),
            Err(LieGroupError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn to_gaussian_examples() {
        let (_, s) = gaussian_from_utdat(&diag(&[2.0, 3.0], &[0.0, 0.0]));
        assert_eq!(s, DenseMatrix::from_diag(&[4.0, 9.0]));
        let g = Utdat::new(
            DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            vec![1.0, 2.0],
        )
        .unwrap();
        let (mu, s) = gaussian_from_utdat(&g);
        assert_eq!(mu, vec![1.0, 2.0]);
        assert_eq!(s, DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 1.0]]));
        let (_, s) = gaussian_from_utdat(&Utdat::identity(3));
        assert_eq!(s, DenseMatrix::identity(3));
    }

    #[test]
    fn invariants_are_enforced() {
        let lower = DenseMatrix::from_rows(&[[1.0, 0.0], [0.5, 1.0]]);
        assert!(Utdat::new(lower, vec![0.0, 0.0]).is_err());
        let neg = DenseMatrix::from_diag(&[1.0, -1.0]);
        assert!(Utdat::new(neg, vec![0.0, 0.0]).is_err());
        let m = Utdat::identity(2).to_matrix();
        assert_eq!(m.row(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn group_mul_examples() {
        let g = Utdat::new(
            DenseMatrix::from_rows(&[[1.5, -0.3], [0.0, 0.4]]),
            vec![2.0, -1.0],
        )
        .unwrap();
        assert_eq!(group_mul(&g, &Utdat::identity(2)).unwrap(), g);
        let p = group_mul(&diag(&[2.0], &[1.0]), &diag(&[3.0], &[1.0])).unwrap();
        assert_eq!(p, diag(&[6.0], &[3.0]));
        // block product agrees with embedded matrix product
        let h = Utdat::new(
            DenseMatrix::from_rows(&[[0.7, 0.2], [0.0, 1.1]]),
            vec![0.5, 0.25],
        )
        .unwrap();
        let prod = group_mul(&g, &h).unwrap().to_matrix();
        assert!(prod.max_abs_diff(&g.to_matrix().matmul(&h.to_matrix())) < 1e-15);
        assert!(matches!(
            group_mul(&g, &Utdat::identity(3)),
            Err(LieGroupError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn group_inv_examples() {
        assert_eq!(group_inv(&Utdat::identity(3)), Utdat::identity(3));
        assert_eq!(group_inv(&diag(&[2.0], &[4.0])), diag(&[0.5], &[-2.0]));
    }

    #[test]
    fn log_and_exp_map_examples() {
        let g0 = Utdat::new(
            DenseMatrix::from_rows(&[[1.5, -0.3], [0.0, 0.4]]),
            vec![2.0, -1.0],
        )
        .unwrap();
        assert!(log_map(&g0, &g0).unwrap().norm() < 1e-15);
        assert_eq!(exp_map(&TangentMatrix::zeros(2), &g0).unwrap(), g0);

        let g = diag(&[E], &[E - 1.0]);
        let t = log_map(&g, &Utdat::identity(1)).unwrap();
        assert!((t.linear()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((t.translation()[0] - 1.0).abs() < 1e-14);

        let identity = Utdat::identity(2);
        let direct = matrix_log(&g0.to_matrix()).unwrap();
        assert!(
            log_map(&g0, &identity)
                .unwrap()
                .to_matrix()
                .max_abs_diff(&direct)
                < 1e-15
        );
    }

    #[test]
    fn geodesic_examples() {
        let g = diag(&[2.0, 0.5], &[1.0, -3.0]);
        assert_eq!(geodesic_distance(&g, &g).unwrap(), 0.0);
        let d = geodesic_distance(&Utdat::identity(1), &diag(&[E], &[0.0])).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sample_latent_examples() {
        let v = [0.3, -1.2];
        assert_eq!(sample_latent(&Utdat::identity(2), &v).unwrap(), v.to_vec());
        assert_eq!(
            sample_latent(&diag(&[2.0], &[3.0]), &[1.0]).unwrap(),
            vec![5.0]
        );
        let full = Utdat::new(
            DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(sample_latent(&full, &[1.0, 1.0]).unwrap(), vec![2.0, 1.0]);
        assert!(sample_latent(&full, &[1.0]).is_err());
    }

    #[test]
    fn intrinsic_mean_trivial_cases() {
        let g = Utdat::new(
            DenseMatrix::from_rows(&[[1.5, -0.3], [0.0, 0.4]]),
            vec![2.0, -1.0],
        )
        .unwrap();
        let single = intrinsic_mean(std::slice::from_ref(&g), 1e-12, 50).unwrap();
        assert!(single.converged);
        assert_eq!(single.mean, g);
        let double = intrinsic_mean(&[g.clone(), g.clone()], 1e-12, 50).unwrap();
        assert!(double.mean.to_matrix().max_abs_diff(&g.to_matrix()) < 1e-12);
        assert!(matches!(
            intrinsic_mean(&[], 1e-12, 50),
            Err(LieGroupError::EmptyBatch)
        ));
    }

    #[test]
    fn intrinsic_mean_of_scales_is_geometric_mean() {
        let sigmas = [0.5, 2.0, 3.0, 1.2];
        let gs: Vec<_> = sigmas.iter().map(|&s| diag(&[s], &[0.0])).collect();
        let result = intrinsic_mean(&gs, 1e-13, 100).unwrap();
        assert!(result.converged);
        let geometric = sigmas.iter().map(|s: &f64| s.ln()).sum::<f64>() / 4.0;
        let geometric = geometric.exp();
        assert!((result.mean.u()[(0, 0)] - geometric).abs() < 1e-12);

        // brute-force minimisation of sum d^2 over a 1-D grid of scales
        let cost = |s: f64| -> f64 {
            let c = diag(&[s], &[0.0]);
            gs.iter()
                .map(|g| geodesic_distance(&c, g).unwrap().powi(2))
                .sum()
        };
        let best = (0..=20_000)
            .map(|i| 0.5 + 2.5 * i as f64 / 20_000.0)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap();
        assert!((best - geometric).abs() < 2.5 / 20_000.0 + 1e-12);
    }

    #[test]
    fn intrinsic_mean_reports_non_convergence() {
        let gs = vec![diag(&[0.5], &[1.0]), diag(&[4.0], &[-2.0])];
        let r = intrinsic_mean(&gs, 0.0, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
