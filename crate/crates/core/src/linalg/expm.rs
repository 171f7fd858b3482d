use num_complex::Complex64;

use super::eig::{eig_hermitian, eigvals_hermitian, Eigh};
use super::matrix::{mat2, mat2_opnorm, CMatrix, HermitianMatrix, Mat2};
use crate::error::{Error, Result};

/// Below this `|omega t|` the closed form switches to its Taylor series.
const SERIES_THRESHOLD: f64 = 1e-6;

/// `exp(-i A t)` via the eigendecomposition of `A`.
pub fn expm_unitary(a: &HermitianMatrix, t: f64) -> Result<CMatrix> {
    Ok(eig_hermitian(a)?.unitary(t))
}

/// Operator (spectral) norm of an arbitrary complex matrix.
pub fn opnorm(m: &CMatrix) -> Result<f64> {
    let gram = HermitianMatrix::new(&m.adjoint() * m)?;
    let top = eigvals_hermitian(&gram)?.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// Closed-form `exp(-i t [[a, beta], [beta, b]])`.
///
/// With `mu = (a+b)/2`, `nu = (a-b)/2`, `omega = sqrt(nu^2 + beta^2)` this is
/// `e^{-i mu t} (cos(omega t) I - i sin(omega t)/omega [[nu, beta], [beta, -nu]])`.
pub fn block2_exp(a: f64, b: f64, beta: f64, t: f64) -> Mat2 {
    let mu = 0.5 * (a + b);
    let nu = 0.5 * (a - b);
    let omega = nu.hypot(beta);
    let wt = omega * t;
    let (cos, sinc_t) = if wt.abs() < SERIES_THRESHOLD {
        let w2 = wt * wt;
        (1.0 - 0.5 * w2, t * (1.0 - w2 / 6.0))
    } else {
        (wt.cos(), wt.sin() / omega)
    };
    let global = Complex64::new(0.0, -mu * t).exp();
    let mi = Complex64::new(0.0, -sinc_t);
    let c = Complex64::new(cos, 0.0);
    mat2(
        global * (c + mi * nu),
        global * mi * beta,
        global * mi * beta,
        global * (c - mi * nu),
    )
}

/// `|| diag(e^{-iat}, e^{-ibt}) - exp(-i t [[a, beta], [beta, b]]) ||_inf`.
pub fn block2_distance(a: f64, b: f64, beta: f64, t: f64) -> f64 {
    if beta == 0.0 || t == 0.0 {
        return 0.0;
    }
    let u = block2_exp(a, b, beta, t);
    let ea = Complex64::new(0.0, -a * t).exp();
    let eb = Complex64::new(0.0, -b * t).exp();
    let d = mat2(ea - u[0][0], -u[0][1], -u[1][0], eb - u[1][1]);
    mat2_opnorm(&d)
}

/// Precomputed `M` and the eigendecomposition of `M + Delta`, so the distance
/// `||e^{-iMt} - e^{-i(M+Delta)t}||_inf` can be evaluated at many `t`.
#[derive(Clone, Debug)]
pub struct DiffExp {
    diag: Vec<f64>,
    perturbed: Eigh,
}

impl DiffExp {
    pub fn new(diag: &[f64], delta: &HermitianMatrix) -> Result<Self> {
        if delta.dim() != diag.len() {
            return Err(Error::SizeMismatch {
                expected: diag.len(),
                got: delta.dim(),
            });
        }
        let scale = delta.matrix().max_abs().max(1.0);
        if let Some(j) = (0..delta.dim()).find(|&j| delta[(j, j)].norm() > 1e-12 * scale) {
            return Err(Error::InvalidParameter(format!(
                "perturbation must vanish on the diagonal (entry {j} is {})",
                delta[(j, j)]
            )));
        }
        let h = HermitianMatrix::from_real_diagonal(diag).add(delta);
        Ok(Self {
            diag: diag.to_vec(),
            perturbed: eig_hermitian(&h)?,
        })
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut w = self.perturbed.unitary(t).scale(Complex64::new(-1.0, 0.0));
        for (j, &m) in self.diag.iter().enumerate() {
            w[(j, j)] += Complex64::new(0.0, -m * t).exp();
        }
        opnorm(&w)
    }
}

/// Largest singular value of `e^{-iMt} - e^{-i(M+Delta)t}` for diagonal `M`.
pub fn opnorm_diff_exp(diag: &[f64], delta: &HermitianMatrix, t: f64) -> Result<f64> {
    DiffExp::new(diag, delta)?.at(t)
}
