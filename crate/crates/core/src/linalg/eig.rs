use num_complex::Complex64;

use super::matrix::{CMatrix, HermitianMatrix};
use crate::error::{Error, Result};

pub const MAX_EIG_DIM: usize = 2048;

/// Sweeps stop once the off-diagonal Frobenius mass drops below this
/// fraction of the full Frobenius norm.
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `A = V diag(values) V^dagger` with ascending values and
/// the eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(lambda_j)) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let d: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += v[(r, j)] * d[j] * v[(c, j)].conj();
                }
                out[(r, c)] = acc;
            }
        }
        out
    }

    /// `exp(z A)` for a complex scalar `z`.
    pub fn exp_scaled(&self, z: Complex64) -> CMatrix {
        self.map(|l| (z * l).exp())
    }

    /// `exp(-i A t)`.
    pub fn unitary(&self, t: f64) -> CMatrix {
        self.exp_scaled(Complex64::new(0.0, -t))
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|l| Complex64::new(l, 0.0))
    }

    /// Largest `||A v_j - lambda_j v_j||_2` over all eigenpairs.
    pub fn max_residual(&self, a: &HermitianMatrix) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let col: Vec<Complex64> = (0..n).map(|r| self.vectors[(r, j)]).collect();
                let av = a.matrix().matvec(&col);
                av.iter()
                    .zip(&col)
                    .map(|(x, v)| (x - v * self.values[j]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn guard(dim: usize) -> Result<()> {
    if dim > MAX_EIG_DIM {
        return Err(Error::DimensionGuard {
            what: "matrix dimension",
            got: dim,
            limit: MAX_EIG_DIM,
        });
    }
    Ok(())
}

/// Full Hermitian eigendecomposition by cyclic Jacobi rotations.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<Eigh> {
    guard(a.dim())?;
    let (values, vectors) = jacobi(a.matrix().clone(), true);
    let vectors = vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let n = values.len();
    let sorted_vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(Eigh {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: sorted_vectors,
    })
}

/// Eigenvalues only (ascending), by Householder reduction to a real
/// tridiagonal matrix and implicit QL.
pub fn eigvals_hermitian(a: &HermitianMatrix) -> Result<Vec<f64>> {
    guard(a.dim())?;
    let (mut d, mut e) = tridiagonalize(a.matrix().clone());
    if !tql(&mut d, &mut e) {
        // QL stalled; Jacobi always converges, if slowly.
        let (values, _) = jacobi(a.matrix().clone(), false);
        d = values;
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Reduces `a` to Hermitian tridiagonal form and returns the diagonal and the
/// moduli of the off-diagonal (`e[i]` couples `i` and `i + 1`, `e[n-1] = 0`).
/// A diagonal phase change makes the off-diagonal real, so the moduli give a
/// unitarily similar real symmetric matrix.
fn tridiagonalize(mut a: CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut w = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let alpha = (k + 1..n).map(|r| a[(r, k)].norm_sqr()).sum::<f64>().sqrt();
        d[k] = a[(k, k)].re;
        e[k] = alpha;
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        // v = (x + phase * alpha * e_1) / ||.||, so (I - 2 v v^dagger) x = -phase * alpha * e_1.
        let vnorm = (2.0 * alpha * (alpha + x0.norm())).sqrt();
        for r in k + 1..n {
            v[r] = a[(r, k)] / vnorm;
        }
        v[k + 1] += phase * alpha / vnorm;
        // p = A v on the trailing block, K = v^dagger p, w = p - K v.
        let mut kk = zero;
        for r in k + 1..n {
            let mut acc = zero;
            for c in k + 1..n {
                acc += a[(r, c)] * v[c];
            }
            w[r] = acc;
            kk += v[r].conj() * acc;
        }
        for r in k + 1..n {
            w[r] -= v[r] * kk.re;
        }
        for r in k + 1..n {
            for c in k + 1..n {
                let upd = v[r] * w[c].conj() + w[r] * v[c].conj();
                a[(r, c)] -= upd * 2.0;
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)].re;
        e[n - 2] = a[(n - 1, n - 2)].norm();
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1, n - 1)].re;
    }
    (d, e)
}

/// Implicit QL with Wilkinson-type shifts on a real symmetric tridiagonal
/// matrix; eigenvalues are left in `d`. Returns false if some eigenvalue did
/// not converge.
fn tql(d: &mut [f64], e: &mut [f64]) -> bool {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return false;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    true
}

fn off_diagonal_sq(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[(r, c)].norm_sqr();
            }
        }
    }
    s
}

fn jacobi(mut a: CMatrix, want_vectors: bool) -> (Vec<f64>, Option<CMatrix>) {
    let n = a.rows();
    let mut v = want_vectors.then(|| CMatrix::identity(n));
    let total = a.frobenius();
    let target = OFF_DIAGONAL_TOL * total;
    let zero = Complex64::new(0.0, 0.0);

    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_sq(&a).sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 || r < 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Skip rotations that cannot change the diagonal in floating point.
                if r < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = zero;
                    a[(q, p)] = zero;
                    continue;
                }
                let phase = apq / r;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // U = D R restricted to (p, q), with D = diag(1, conj(phase)).
                let upp = Complex64::new(cs, 0.0);
                let upq = Complex64::new(sn, 0.0);
                let uqp = -phase.conj() * sn;
                let uqq = phase.conj() * cs;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = zero;
                a[(q, p)] = zero;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * upp + vkq * uqp;
                        v[(k, q)] = vkp * upq + vkq * uqq;
                    }
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)].re).collect();
    (values, v)
}
