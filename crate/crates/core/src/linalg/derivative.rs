use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eig::eig_hermitian;
use super::matrix::{CMatrix, HermitianMatrix};
use crate::error::{Error, Result};

const MAX_DIM: usize = 64;

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and P_{n-1}(x).
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Gauss–Legendre points per panel.
    pub nodes: usize,
    pub panels: usize,
    /// Combine central differences at `h` and `h/2` into a fourth-order estimate.
    pub richardson: bool,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            nodes: 32,
            panels: 1,
            richardson: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeCheck {
    /// Max-entry difference between the finite-difference derivative and the
    /// quadrature of the integral representation.
    pub residual: f64,
    /// Max-entry magnitude of the derivative, for scale.
    pub derivative_scale: f64,
}

/// Checks `d/dt e^{A + tV} = int_0^1 e^{(1-s)(A+tV)} V e^{s(A+tV)} ds` at `t`.
pub fn verify_derivative_identity(
    a: &HermitianMatrix,
    v: &HermitianMatrix,
    t: f64,
) -> Result<DerivativeCheck> {
    verify_derivative_identity_with(a, v, t, Complex64::new(1.0, 0.0), &DerivativeConfig::default())
}

/// Same identity for the generator `z (A + tV)` with a complex scalar `z`;
/// `z = -i` is the unitary evolution case.
pub fn verify_derivative_identity_with(
    a: &HermitianMatrix,
    v: &HermitianMatrix,
    t: f64,
    z: Complex64,
    cfg: &DerivativeConfig,
) -> Result<DerivativeCheck> {
    let dim = a.dim();
    if v.dim() != dim {
        return Err(Error::SizeMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    if dim > MAX_DIM {
        return Err(Error::DimensionGuard {
            what: "derivative check dimension",
            got: dim,
            limit: MAX_DIM,
        });
    }
    if !(cfg.step > 0.0) || cfg.nodes == 0 || cfg.panels == 0 {
        return Err(Error::InvalidParameter("derivative config".into()));
    }

    let exp_at = |s: f64| -> Result<CMatrix> { Ok(eig_hermitian(&a.add_scaled(v, s))?.exp_scaled(z)) };
    let central = |h: f64| -> Result<CMatrix> {
        let d = &exp_at(t + h)? - &exp_at(t - h)?;
        Ok(d.scale(Complex64::new(0.5 / h, 0.0)))
    };
    let fd = if cfg.richardson {
        let coarse = central(cfg.step)?;
        let fine = central(0.5 * cfg.step)?;
        (&fine.scale(Complex64::new(4.0, 0.0)) - &coarse).scale(Complex64::new(1.0 / 3.0, 0.0))
    } else {
        central(cfg.step)?
    };

    // The integrand only needs the spectral decomposition at t.
    let eig = eig_hermitian(&a.add_scaled(v, t))?;
    let zv = v.matrix().scale(z);
    let (x, w) = gauss_legendre(cfg.nodes);
    let mut integral = CMatrix::zeros(dim, dim);
    let width = 1.0 / cfg.panels as f64;
    for p in 0..cfg.panels {
        let lo = p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let s = lo + 0.5 * width * (xi + 1.0);
            let left = eig.exp_scaled(z * (1.0 - s));
            let right = eig.exp_scaled(z * s);
            let term = &(&left * &zv) * &right;
            integral = &integral + &term.scale(Complex64::new(0.5 * width * wi, 0.0));
        }
    }
    Ok(DerivativeCheck {
        residual: (&fd - &integral).max_abs(),
        derivative_scale: integral.max_abs(),
    })
}
