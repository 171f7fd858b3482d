//! State evolution under a diagonal `M = diag(g)` and under `M + beta X_T`.
//!
//! `X_T` pairs basis states `x` and `x ^ T`, so `M + beta X_T` is a direct sum
//! of 2×2 blocks `[[g_x, beta], [beta, g_{x^T}]]` and every evolution here
//! costs `O(2^n)`. Negative `t` is time reversal.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{block2_exp, Mat2};

fn check_len(g: &[f64], psi: &[Complex64]) -> Result<()> {
    if g.len() != psi.len() {
        return Err(Error::SizeMismatch {
            expected: g.len(),
            got: psi.len(),
        });
    }
    Ok(())
}

fn phase(e: f64, t: f64) -> Complex64 {
    Complex64::new(0.0, -e * t).exp()
}

/// `psi <- e^{-i t diag(g)} psi`.
pub fn apply_diagonal(g: &[f64], t: f64, psi: &mut [Complex64]) -> Result<()> {
    check_len(g, psi)?;
    for (a, &e) in psi.iter_mut().zip(g) {
        *a *= phase(e, t);
    }
    Ok(())
}

/// Calls `f(x, y, block)` once per pair `x < y = x ^ mask`.
fn for_each_block(g: &[f64], mask: usize, beta: f64, t: f64, mut f: impl FnMut(usize, usize, &Mat2)) {
    let low = mask & mask.wrapping_neg();
    for x in 0..g.len() {
        if x & low != 0 {
            continue;
        }
        let y = x ^ mask;
        f(x, y, &block2_exp(g[x], g[y], beta, t));
    }
}

/// `psi <- e^{-i t (diag(g) + beta X_mask)} psi`. An empty mask is `X_∅ = I`.
pub fn apply_spiked(g: &[f64], mask: usize, beta: f64, t: f64, psi: &mut [Complex64]) -> Result<()> {
    check_len(g, psi)?;
    if mask >= g.len() {
        return Err(Error::InvalidParameter(format!("spike mask {mask:#b} outside the register")));
    }
    if mask == 0 {
        for (a, &e) in psi.iter_mut().zip(g) {
            *a *= phase(e + beta, t);
        }
        return Ok(());
    }
    let mut out = psi.to_vec();
    for_each_block(g, mask, beta, t, |x, y, u| {
        out[x] = u[0][0] * psi[x] + u[0][1] * psi[y];
        out[y] = u[1][0] * psi[x] + u[1][1] * psi[y];
    });
    psi.copy_from_slice(&out);
    Ok(())
}

/// `|| (e^{-iMt} - e^{-i(M + beta X_mask)t}) psi ||_2`, block by block.
pub fn spiked_difference_norm(g: &[f64], mask: usize, beta: f64, t: f64, psi: &[Complex64]) -> Result<f64> {
    let mut a = psi.to_vec();
    let mut b = psi.to_vec();
    apply_diagonal(g, t, &mut a)?;
    apply_spiked(g, mask, beta, t, &mut b)?;
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt())
}

pub fn norm(psi: &[Complex64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(p, q)| p.conj() * q).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_unitary, CMatrix, HermitianMatrix};
    use crate::seeding;
    use rand::Rng;

    fn random_state(dim: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = seeding::rng(seed);
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let s = norm(&v);
        v.into_iter().map(|a| a / s).collect()
    }

    #[test]
    fn blocks_match_dense_exponential() {
        let n = 5;
        let dim = 1 << n;
        let mut rng = seeding::rng(3);
        let g: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        for (mask, beta, t) in [(0b00001, 0.7, 1.3), (0b10110, 0.2, -2.5), (0b11111, 1.5, 0.4), (0, 0.3, 2.0)] {
            let h = CMatrix::from_fn(dim, dim, |r, c| {
                let mut v = if r == c { g[r] } else { 0.0 };
                if r == c ^ mask {
                    v += beta;
                }
                Complex64::new(v, 0.0)
            });
            let u = expm_unitary(&HermitianMatrix::new(h).unwrap(), t).unwrap();
            let psi = random_state(dim, 11);
            let want = u.matvec(&psi);
            let mut got = psi.clone();
            apply_spiked(&g, mask, beta, t, &mut got).unwrap();
            assert!(distance(&want, &got) < 1e-10, "mask {mask:#b}");
        }
    }

    #[test]
    fn evolution_preserves_norm_and_reverses() {
        let g: Vec<f64> = (0..64).map(|x| (x as f64).sin() * 3.0).collect();
        let psi = random_state(64, 5);
        let mut phi = psi.clone();
        apply_spiked(&g, 0b100101, 0.9, 7.0, &mut phi).unwrap();
        assert!((norm(&phi) - 1.0).abs() < 1e-12);
        apply_spiked(&g, 0b100101, 0.9, -7.0, &mut phi).unwrap();
        assert!(distance(&phi, &psi) < 1e-12);
    }

    #[test]
    fn zero_beta_or_time_gives_zero_difference() {
        let g: Vec<f64> = (0..16).map(|x| x as f64 * 0.3).collect();
        let psi = random_state(16, 1);
        assert!(spiked_difference_norm(&g, 0b0110, 0.0, 3.0, &psi).unwrap() < 1e-14);
        assert!(spiked_difference_norm(&g, 0b0110, 2.0, 0.0, &psi).unwrap() < 1e-15);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let mut psi = vec![Complex64::new(1.0, 0.0); 4];
        assert!(apply_diagonal(&[0.0; 8], 1.0, &mut psi).is_err());
        assert!(apply_spiked(&[0.0; 4], 0b100, 1.0, 1.0, &mut psi).is_err());
    }
}
