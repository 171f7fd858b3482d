//! The Z-supported worst-case instance: `M = sum_S g^(S) Z_S` with
//! `g(x) = f(x_{-top}) (1 + x_top)` for a flat random `f`, and the spike `X` on
//! the top qubit. Both Hamiltonians are block diagonal over the pairs
//! `(x, x | top)`, so every distance here is computed from 2×2 blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{lift_to_g, sample_hard_function, wht_forward, BooleanTable, FourierTable, HardFunctionCertificate};
use crate::linalg::{block2_distance, opnorm_diff_exp};
use crate::pauli::{build_diagonal, pauli_matrix, CoeffVector, DiagonalHamiltonian, PauliString, MAX_QUBITS};
use crate::GUARD;

/// Grid exponents `j` in `t_j = 2^j pi / (4 max|g|)`.
pub const GRID_STEPS: usize = 41;
const REFINE_SCAN: usize = 256;
const GOLDEN_ITERS: usize = 80;

#[derive(Clone, Debug)]
pub struct WorstCaseInstance {
    n: usize,
    delta: f64,
    beta: f64,
    seed: u64,
    f: BooleanTable,
    ghat: FourierTable,
    diagonal: DiagonalHamiltonian,
    certificate: HardFunctionCertificate,
    spike: PauliString,
    /// Distinct values of `2 f(x)`; the block distance depends only on these.
    block_gaps: Vec<f64>,
}

/// Largest spike magnitude exposed: `2^{(1/2 - 3 delta) n}`.
pub fn max_beta(n: usize, delta: f64) -> f64 {
    ((0.5 - 3.0 * delta) * n as f64).exp2()
}

pub fn build_worst_instance(n: usize, delta: f64, beta: f64, seed: u64) -> Result<WorstCaseInstance> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(invalid(format!("worst-case instance needs 2 <= n <= {MAX_QUBITS}, got {n}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid("beta must be finite and non-negative"));
    }
    let cap = max_beta(n, delta);
    if beta > cap * (1.0 + 1e-12) {
        return Err(invalid(format!("beta = {beta} exceeds 2^((1/2 - 3 delta) n) = {cap}")));
    }
    let (f, certificate) = sample_hard_function(n - 1, delta, seed)?;
    let g_table = lift_to_g(&f)?;
    let ghat = wht_forward(&g_table);
    let fhat = wht_forward(&f);

    let top = 1usize << (n - 1);
    for (s, &c) in ghat.coeffs().iter().enumerate() {
        if c != fhat.coeffs()[s & (top - 1)] {
            return Err(Error::InvariantViolation(format!("g^({s:#b}) differs from f^")));
        }
    }
    if ghat.max_abs() > 1.0 {
        return Err(Error::InvariantViolation(format!("||alpha||_inf = {} > 1", ghat.max_abs())));
    }

    let mut diag = ghat.coeffs().to_vec();
    crate::fourier::fwht_in_place(&mut diag);
    let scale = g_table.max_abs().max(1.0);
    for (x, (&got, &want)) in diag.iter().zip(g_table.values()).enumerate() {
        if (got - want).abs() > 1e-9 * scale {
            return Err(Error::InvariantViolation(format!("g_{x} = {got}, expected {want}")));
        }
    }
    let min_gap = 2.0 * ((0.5 - delta) * (n - 1) as f64).exp2();
    let mut block_gaps: Vec<f64> = f.values().iter().map(|v| 2.0 * v).collect();
    if block_gaps.iter().any(|a| a.abs() < min_gap * (1.0 - 1e-12)) {
        return Err(Error::InvariantViolation("block gap below 2 * 2^((1/2 - delta)(n - 1))".into()));
    }
    block_gaps.sort_by(f64::total_cmp);
    block_gaps.dedup();

    Ok(WorstCaseInstance {
        n,
        delta,
        beta,
        seed,
        f,
        ghat,
        diagonal: DiagonalHamiltonian { n, g: g_table.into_vec() },
        certificate,
        spike: PauliString::x_s(n, 1 << (n - 1))?,
        block_gaps,
    })
}

impl WorstCaseInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn f(&self) -> &BooleanTable {
        &self.f
    }

    /// `alpha_{Z_S} = g^(S)`.
    pub fn alpha_table(&self) -> &FourierTable {
        &self.ghat
    }

    /// Sparse form of [`Self::alpha_table`]; `2^n` entries.
    pub fn alpha(&self) -> Result<CoeffVector> {
        CoeffVector::from_z_table(self.n, self.ghat.coeffs())
    }

    /// Coefficients of the spiked Hamiltonian `M + beta X_top`.
    pub fn spiked_alpha(&self) -> Result<CoeffVector> {
        let mut a = self.alpha()?;
        a.set(self.spike, self.beta)?;
        Ok(a)
    }

    pub fn diagonal(&self) -> &DiagonalHamiltonian {
        &self.diagonal
    }

    pub fn spike(&self) -> PauliString {
        self.spike
    }

    pub fn certificate(&self) -> &HardFunctionCertificate {
        &self.certificate
    }

    pub fn max_abs_g(&self) -> f64 {
        self.diagonal.max_abs()
    }

    /// `max_x || e^{-i t M_x} - e^{-i t (M_x + beta X)} ||` over the 2×2 blocks.
    pub fn exact_block_distance(&self, t: f64) -> f64 {
        self.block_gaps
            .iter()
            .map(|&a| block2_distance(a, 0.0, self.beta, t))
            .fold(0.0, f64::max)
    }

    /// Same maximum taken over every block `x` explicitly.
    pub fn exact_block_distance_all(&self, t: f64) -> f64 {
        self.f
            .values()
            .par_iter()
            .map(|&v| block2_distance(2.0 * v, 0.0, self.beta, t))
            .reduce(|| 0.0, f64::max)
    }

    /// `beta 2^{-(1/2 - delta) n}`.
    pub fn distance_bound(&self) -> f64 {
        self.beta * (-(0.5 - self.delta) * self.n as f64).exp2()
    }

    /// Operator-norm distance from the full `2^n` matrices; `n <= 8`.
    pub fn dense_distance(&self, t: f64) -> Result<f64> {
        if self.n > 8 {
            return Err(Error::DimensionGuard {
                what: "qubits for the dense cross-check",
                got: self.n,
                limit: 8,
            });
        }
        let delta = pauli_matrix(&self.spike)?.scale(self.beta);
        let g = build_diagonal(&self.alpha()?)?;
        opnorm_diff_exp(&g.g, &delta, t)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let base = std::f64::consts::PI / (4.0 * self.max_abs_g());
        (0..GRID_STEPS).map(|j| base * (j as f64).exp2()).collect()
    }

    /// Geometric grid followed by a scan and golden-section refinement between
    /// the neighbours of the grid maximum. A finite search, not a proof of the
    /// supremum over all `t >= 0`.
    pub fn sup_search(&self) -> SupSearch {
        let t_grid = self.t_grid();
        let distances: Vec<f64> = t_grid.iter().map(|&t| self.exact_block_distance(t)).collect();
        let (jmax, _) = distances
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bj, bd), (j, &d)| if d > bd { (j, d) } else { (bj, bd) });
        let lo = if jmax == 0 { 0.0 } else { t_grid[jmax - 1] };
        let hi = t_grid[(jmax + 1).min(t_grid.len() - 1)];
        let (t_star, d_star) = self.refine(lo, hi);
        let (t_star, d_star) = if d_star >= distances[jmax] {
            (t_star, d_star)
        } else {
            (t_grid[jmax], distances[jmax])
        };
        let bound = self.distance_bound();
        let ratio = |d: f64| {
            if bound > 0.0 {
                d / bound
            } else if d <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let max_ratio = ratio(d_star);
        let trivial_violations = t_grid
            .iter()
            .zip(&distances)
            .filter(|(&t, &d)| d > (self.beta * t).min(2.0) + 1e-9)
            .count();
        let first_guard_violation_t = t_grid
            .iter()
            .zip(&distances)
            .find(|(_, &d)| ratio(d) > GUARD)
            .map(|(&t, _)| t);
        SupSearch {
            n: self.n,
            delta: self.delta,
            beta: self.beta,
            seed: self.seed,
            ratios: distances.iter().map(|&d| ratio(d)).collect(),
            t_grid,
            distances,
            bound,
            sup_t: t_star,
            sup_distance: d_star,
            max_ratio,
            guard: GUARD,
            within_guard: max_ratio <= GUARD,
            first_guard_violation_t,
            trivial_violations,
        }
    }

    fn refine(&self, lo: f64, hi: f64) -> (f64, f64) {
        let step = (hi - lo) / REFINE_SCAN as f64;
        let (mut best_t, mut best_d) = (lo, self.exact_block_distance(lo));
        for i in 1..=REFINE_SCAN {
            let t = lo + step * i as f64;
            let d = self.exact_block_distance(t);
            if d > best_d {
                best_t = t;
                best_d = d;
            }
        }
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (self.exact_block_distance(c), self.exact_block_distance(d));
        for _ in 0..GOLDEN_ITERS {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.exact_block_distance(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.exact_block_distance(d);
            }
        }
        let (t, v) = if fc > fd { (c, fc) } else { (d, fd) };
        if v > best_d {
            (t, v)
        } else {
            (best_t, best_d)
        }
    }
}

/// Grid-and-refine surrogate for `sup_t` of the block distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupSearch {
    pub n: usize,
    pub delta: f64,
    pub beta: f64,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub bound: f64,
    pub sup_t: f64,
    pub sup_distance: f64,
    pub max_ratio: f64,
    pub guard: f64,
    pub within_guard: bool,
    /// Smallest grid time whose ratio exceeds the guard, if any.
    pub first_guard_violation_t: Option<f64>,
    /// Grid points where the distance exceeds `min(beta t, 2)`.
    pub trivial_violations: usize,
}
