use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eig::eigvals_hermitian;
use super::expm::DiffExp;
use super::matrix::HermitianMatrix;
use crate::error::{invalid, Result};
use crate::seeding;

/// Parameters of a random sweep over the diagonal-dominance perturbation
/// bound `||e^{-iMt} - e^{-i(M+Delta)t}|| <~ min(C dim / D, C t, 1)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dim: usize,
    /// Minimum gap between diagonal entries of `M`.
    pub gap: f64,
    /// Operator norm of the zero-diagonal perturbation.
    pub strength: f64,
    pub trials: usize,
    pub t_grid: Vec<f64>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(invalid("sweep dimension must be at least 2"));
        }
        if !(self.gap > 0.0) || !self.gap.is_finite() {
            return Err(invalid("gap D must be positive"));
        }
        // C = 0 is allowed: every ratio is then 0/0, reported as 0.
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(invalid("strength C must be non-negative"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be positive"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(invalid("t grid must be non-empty with finite entries >= 0"));
        }
        Ok(())
    }

    /// `min(C dim / D, C t, 1)`.
    pub fn bound(&self, t: f64) -> f64 {
        let c = self.strength;
        (c * self.dim as f64 / self.gap).min(c * t).min(1.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub trial: usize,
    pub t: f64,
    #[serde(rename = "D")]
    pub gap: f64,
    #[serde(rename = "C")]
    pub strength: f64,
    pub dim: usize,
    pub lhs: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    /// Empirical constant: largest `lhs / bound` seen.
    pub max_ratio: f64,
    /// Smallest realized diagonal gap over all trials.
    pub min_realized_gap: f64,
    /// Rows where `lhs > min(C t, 2) + 1e-9`; must be zero.
    pub trivial_bound_violations: usize,
}

/// Diagonal entries `j * 1.25 D + U(0, D/4)`: consecutive gaps lie in
/// `[D, 1.5 D]`.
pub fn sample_gapped_diagonal<R: Rng + ?Sized>(dim: usize, gap: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|j| j as f64 * 1.25 * gap + rng.random_range(0.0..0.25 * gap))
        .collect()
}

/// Hermitian, zero on the diagonal, complex Gaussian off-diagonal, rescaled to
/// operator norm `strength`.
pub fn random_zero_diagonal_hermitian<R: Rng + ?Sized>(
    dim: usize,
    strength: f64,
    rng: &mut R,
) -> Result<HermitianMatrix> {
    let mut m = HermitianMatrix::random(dim, rng).into_matrix();
    for j in 0..dim {
        m[(j, j)] = Complex64::new(0.0, 0.0);
    }
    let h = HermitianMatrix::new(m)?;
    let vals = eigvals_hermitian(&h)?;
    let norm = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if strength == 0.0 || norm == 0.0 {
        return Ok(HermitianMatrix::zeros(dim));
    }
    Ok(h.scale(strength / norm))
}

fn ratio(lhs: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        // 0/0 convention; a nonzero lhs over a zero bound would be a genuine violation.
        if lhs <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / bound
    }
}

pub fn perturbation_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let per_trial: Vec<Result<(Vec<SweepRow>, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeding::stream(cfg.seed, trial as u64);
            let diag = sample_gapped_diagonal(cfg.dim, cfg.gap, &mut rng);
            let min_gap = diag
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let delta = random_zero_diagonal_hermitian(cfg.dim, cfg.strength, &mut rng)?;
            let diff = DiffExp::new(&diag, &delta)?;
            let rows = cfg
                .t_grid
                .iter()
                .map(|&t| {
                    let lhs = diff.at(t)?;
                    let bound = cfg.bound(t);
                    Ok(SweepRow {
                        trial,
                        t,
                        gap: cfg.gap,
                        strength: cfg.strength,
                        dim: cfg.dim,
                        lhs,
                        bound,
                        ratio: ratio(lhs, bound),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, min_gap))
        })
        .collect();

    let mut rows = Vec::with_capacity(cfg.trials * cfg.t_grid.len());
    let mut min_realized_gap = f64::INFINITY;
    for r in per_trial {
        let (trial_rows, g) = r?;
        rows.extend(trial_rows);
        min_realized_gap = min_realized_gap.min(g);
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let trivial_bound_violations = rows
        .iter()
        .filter(|r| r.lhs > (cfg.strength * r.t).min(2.0) + 1e-9)
        .count();
    Ok(SweepReport {
        config: cfg.clone(),
        rows,
        max_ratio,
        min_realized_gap,
        trivial_bound_violations,
    })
}
