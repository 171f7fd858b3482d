//! The average-case `k`-local instance: Gaussian coefficients on `Z_S`, random
//! `X_T` spikes, the goodness count, and the intersection-count matrix `Q`
//! whose smallest eigenvalue controls the variance of the gaps.
//!
//! For a spike `X_T` the basis splits into pairs `(x, x ^ T)`; the gap of a pair
//! is `|g_x - g_{x^T}|`, and `V` is the set of `x` whose gap is at most the
//! threshold `n^{e (k - c)}`.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::norm;
use crate::linalg::{block2_distance, eigvals_hermitian, CMatrix, HermitianMatrix};
use crate::pauli::{build_diagonal, CoeffVector, PauliString, SupportDescriptor, MAX_QUBITS};
use crate::seeding::{self, Rng};
use crate::subsets::{k_subsets, subsets_up_to};
use crate::GUARD;

/// Largest `n` for the `2^n · C(n, c)` goodness loops.
pub const MAX_GOODNESS_QUBITS: usize = 20;
/// Largest `n` for per-step state computations.
pub const MAX_STATE_QUBITS: usize = 14;
pub const MAX_COVARIANCE_DIM: usize = 512;
/// Default size of a random `T` family.
pub const DEFAULT_FAMILY: usize = 128;
/// Exponent in the goodness definition.
pub const GOODNESS_EXPONENT: f64 = 0.1;
/// Exponent defining `V` in the per-step split.
pub const SPLIT_EXPONENT: f64 = -0.1;

const ALPHA_STREAM: u32 = 0x4c41;
const FAMILY_STREAM: u32 = 0x4c46;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportDegree {
    ExactlyK,
    UpToK,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpikeEnsemble {
    UniformExactlyC,
    /// Nonempty `T` with `|T| <= c`.
    UniformUpToC,
}

/// `sigma^2 = 1 / (10 k ln n)`.
pub fn sigma2(n: usize, k: usize) -> f64 {
    1.0 / (10.0 * k as f64 * (n as f64).ln())
}

/// `n^{e (k - c)}`.
pub fn threshold(n: usize, k: usize, c: usize, exponent: f64) -> f64 {
    (n as f64).powf(exponent * (k - c) as f64)
}

pub fn check_parameters(n: usize, k: usize, c: usize) -> Result<()> {
    if c < 2 {
        return Err(invalid(format!("spike locality c must be at least 2, got {c}")));
    }
    if 2 * k < 3 * c || k > 3 * c {
        return Err(invalid(format!("need ceil(3c/2) <= k <= 3c, got k = {k}, c = {c}")));
    }
    if k < 3 || k > n {
        return Err(invalid(format!("need 3 <= k <= n, got k = {k}, n = {n}")));
    }
    if n > MAX_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubits",
            got: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LocalInstance {
    n: usize,
    k: usize,
    c: usize,
    sigma2: f64,
    alpha: CoeffVector,
    support_degree: SupportDegree,
    beta: f64,
    seed: u64,
    g: Vec<f64>,
}

pub fn sample_local_instance(
    n: usize,
    k: usize,
    c: usize,
    beta: f64,
    support_degree: SupportDegree,
    seed: u64,
) -> Result<LocalInstance> {
    check_parameters(n, k, c)?;
    let s2 = sigma2(n, k);
    let sigma = s2.sqrt();
    let family = match support_degree {
        SupportDegree::ExactlyK => k_subsets(n, k),
        SupportDegree::UpToK => subsets_up_to(n, k),
    };
    let mut rng = seeding::substream(seed, ALPHA_STREAM, 0);
    let mut alpha = CoeffVector::new(n)?;
    for s in family {
        let z: f64 = StandardNormal.sample(&mut rng);
        alpha.set(PauliString::z_s(n, s as u32)?, sigma * z)?;
    }
    LocalInstance::assemble(n, k, c, s2, alpha, support_degree, beta, seed)
}

impl LocalInstance {
    /// Instance with caller-chosen Z-supported coefficients of locality at most
    /// `k`. Recorded as `up-to-k` with seed 0.
    pub fn with_alpha(n: usize, k: usize, c: usize, beta: f64, alpha: CoeffVector) -> Result<Self> {
        check_parameters(n, k, c)?;
        if alpha.n() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: alpha.n(),
            });
        }
        if let Some((p, _)) = alpha.iter().find(|(p, _)| p.locality() > k) {
            return Err(Error::Support(format!("term on {:#b} is more than {k}-local", p.support())));
        }
        Self::assemble(n, k, c, sigma2(n, k), alpha, SupportDegree::UpToK, beta, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        n: usize,
        k: usize,
        c: usize,
        sigma2: f64,
        alpha: CoeffVector,
        support_degree: SupportDegree,
        beta: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid("beta must be finite and non-negative"));
        }
        if !alpha.is_empty() && alpha.support_descriptor() != SupportDescriptor::ZOnly {
            return Err(Error::Support("local instance needs Z-only coefficients".into()));
        }
        let g = build_diagonal(&alpha)?.g;
        Ok(Self {
            n,
            k,
            c,
            sigma2,
            alpha,
            support_degree,
            beta,
            seed,
            g,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn alpha(&self) -> &CoeffVector {
        &self.alpha
    }

    pub fn support_degree(&self) -> SupportDegree {
        self.support_degree
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Diagonal `g_x` of `M(alpha)`.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// `||alpha||_inf`; reported, not enforced.
    pub fn alpha_linf(&self) -> f64 {
        self.alpha.linf()
    }

    pub fn threshold(&self, exponent: f64) -> f64 {
        threshold(self.n, self.k, self.c, exponent)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid("beta must be finite and non-negative"));
        }
        Ok(Self { beta, ..self.clone() })
    }

    /// `alpha + beta X_T` as a coefficient vector.
    pub fn spiked_alpha(&self, spike: &PauliString) -> Result<CoeffVector> {
        let mut a = self.alpha.clone();
        a.set(*spike, self.beta)?;
        Ok(a)
    }

    fn in_v(&self, x: usize, mask: usize, thr: f64) -> bool {
        (self.g[x] - self.g[x ^ mask]).abs() <= thr
    }
}

/// Every spike mask of the ensemble, in a fixed order.
pub fn spike_family(n: usize, c: usize, ensemble: SpikeEnsemble) -> Vec<u64> {
    match ensemble {
        SpikeEnsemble::UniformExactlyC => k_subsets(n, c),
        SpikeEnsemble::UniformUpToC => subsets_up_to(n, c).into_iter().filter(|&t| t != 0).collect(),
    }
}

pub fn sample_spike(n: usize, c: usize, ensemble: SpikeEnsemble, seed: u64) -> Result<PauliString> {
    sample_spike_with(n, c, ensemble, &mut seeding::rng(seed))
}

pub fn sample_spike_with(n: usize, c: usize, ensemble: SpikeEnsemble, rng: &mut Rng) -> Result<PauliString> {
    if c > n || n > MAX_QUBITS {
        return Err(invalid(format!("spike needs c <= n <= {MAX_QUBITS}, got c = {c}, n = {n}")));
    }
    let size = match ensemble {
        SpikeEnsemble::UniformExactlyC => c,
        SpikeEnsemble::UniformUpToC => {
            if c == 0 {
                return Err(invalid("up-to-c ensemble with c = 0 has no nonempty spike"));
            }
            let weights: Vec<f64> = (1..=c).map(|j| binom_f64(n, j)).collect();
            let w = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;
            1 + w.sample(rng)
        }
    };
    let mask = index::sample(rng, n, size).iter().fold(0u32, |m, i| m | 1 << i);
    PauliString::x_s(n, mask)
}

fn binom_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub threshold_exponent: f64,
    pub threshold: f64,
    /// `#{|T| = c : |g_x - g_{x·y_T}| <= threshold} / C(n, c)` for each `x`.
    pub per_x_fraction: Vec<f64>,
    pub max_fraction: f64,
    pub mean_fraction: f64,
}

fn check_goodness_size(n: usize) -> Result<()> {
    if n > MAX_GOODNESS_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubits for the goodness count",
            got: n,
            limit: MAX_GOODNESS_QUBITS,
        });
    }
    Ok(())
}

pub fn goodness_check(inst: &LocalInstance, threshold_exponent: f64) -> Result<GoodnessReport> {
    check_goodness_size(inst.n)?;
    let thr = inst.threshold(threshold_exponent);
    let ts: Vec<usize> = k_subsets(inst.n, inst.c).into_iter().map(|t| t as usize).collect();
    let total = ts.len() as f64;
    let per_x_fraction: Vec<f64> = (0..inst.g.len())
        .into_par_iter()
        .map(|x| ts.iter().filter(|&&t| inst.in_v(x, t, thr)).count() as f64 / total)
        .collect();
    let max_fraction = per_x_fraction.iter().copied().fold(0.0, f64::max);
    let mean_fraction = per_x_fraction.iter().sum::<f64>() / per_x_fraction.len() as f64;
    Ok(GoodnessReport {
        n: inst.n,
        k: inst.k,
        c: inst.c,
        threshold_exponent,
        threshold: thr,
        per_x_fraction,
        max_fraction,
        mean_fraction,
    })
}

/// Diagonal of `E_Delta[Pi_V]`, built spike by spike: for each `T` of the
/// ensemble the projector onto `V_T` is accumulated, then divided by the
/// number of spikes.
pub fn spike_averaged_projector(inst: &LocalInstance, ensemble: SpikeEnsemble, threshold_exponent: f64) -> Result<Vec<f64>> {
    check_goodness_size(inst.n)?;
    let thr = inst.threshold(threshold_exponent);
    let family = spike_family(inst.n, inst.c, ensemble);
    let mut counts = vec![0u32; inst.g.len()];
    for &t in &family {
        for (x, count) in counts.iter_mut().enumerate() {
            if inst.in_v(x, t as usize, thr) {
                *count += 1;
            }
        }
    }
    let total = family.len() as f64;
    Ok(counts.into_iter().map(|m| m as f64 / total).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceInstance {
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub t_list: Vec<u64>,
    /// `Q_ij = #{|S| = k : |S ∩ T_i|, |S ∩ T_j| both odd}`; the covariance is `4 sigma^2 Q`.
    pub q: Vec<Vec<u64>>,
    pub sigma2: f64,
}

impl CovarianceInstance {
    pub fn dim(&self) -> usize {
        self.t_list.len()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|i| (0..i).all(|j| self.q[i][j] == self.q[j][i]))
    }

    /// True if equal intersection sizes always give equal entries.
    pub fn depends_only_on_intersection(&self) -> bool {
        let mut by_size: Vec<Option<u64>> = vec![None; self.c + 1];
        for (i, &a) in self.t_list.iter().enumerate() {
            for (j, &b) in self.t_list.iter().enumerate() {
                let s = (a & b).count_ones() as usize;
                match by_size[s] {
                    None => by_size[s] = Some(self.q[i][j]),
                    Some(v) if v != self.q[i][j] => return false,
                    _ => {}
                }
            }
        }
        true
    }
}

/// Random distinct family of `c`-subsets of size `min(C(n, c), d)`; the whole
/// family, in order, when it has at most `d` members.
pub fn random_t_family(n: usize, c: usize, d: usize, seed: u64) -> Result<Vec<u64>> {
    if n > MAX_GOODNESS_QUBITS || c > n {
        return Err(invalid(format!("T family needs c <= n <= {MAX_GOODNESS_QUBITS}")));
    }
    let all = k_subsets(n, c);
    if all.len() <= d {
        return Ok(all);
    }
    let mut rng = seeding::substream(seed, FAMILY_STREAM, 0);
    let mut picked: Vec<usize> = index::sample(&mut rng, all.len(), d).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| all[i]).collect())
}

pub fn covariance_bruteforce(n: usize, k: usize, c: usize, t_list: &[u64]) -> Result<CovarianceInstance> {
    if n > MAX_GOODNESS_QUBITS || k > 6 || k > n {
        return Err(invalid(format!("covariance enumeration needs k <= min(n, 6), n <= {MAX_GOODNESS_QUBITS}")));
    }
    if t_list.len() > MAX_COVARIANCE_DIM {
        return Err(Error::DimensionGuard {
            what: "subsets in the T family",
            got: t_list.len(),
            limit: MAX_COVARIANCE_DIM,
        });
    }
    if let Some(t) = t_list.iter().find(|t| t.count_ones() as usize != c || **t >> n != 0) {
        return Err(invalid(format!("{t:#b} is not a {c}-subset of [{n}]")));
    }
    let d = t_list.len();
    let q = k_subsets(n, k)
        .par_iter()
        .fold(
            || vec![0u64; d * d],
            |mut acc, &s| {
                let odd: Vec<usize> = (0..d).filter(|&i| (s & t_list[i]).count_ones() % 2 == 1).collect();
                for &i in &odd {
                    for &j in &odd {
                        acc[i * d + j] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; d * d],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(CovarianceInstance {
        n,
        k,
        c,
        t_list: t_list.to_vec(),
        q: q.chunks(d.max(1)).take(d).map(|r| r.to_vec()).collect(),
        sigma2: sigma2(n, k),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsdCheck {
    pub dim: usize,
    pub min_eigenvalue: f64,
    /// `4^{c-1} C(n - 2c, k - c)`.
    pub claimed_floor: f64,
    pub holds: bool,
}

pub fn psd_floor(n: usize, k: usize, c: usize) -> f64 {
    if n < 2 * c || k < c {
        return 0.0;
    }
    4f64.powi(c as i32 - 1) * binom_f64(n - 2 * c, k - c)
}

pub fn covariance_psd_check(inst: &CovarianceInstance) -> Result<PsdCheck> {
    let d = inst.dim();
    if d == 0 || d > MAX_COVARIANCE_DIM {
        return Err(invalid(format!("PSD check needs 1 <= d <= {MAX_COVARIANCE_DIM}, got {d}")));
    }
    let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(inst.q[i][j] as f64, 0.0));
    let eig = eigvals_hermitian(&HermitianMatrix::new(m)?)?;
    let min_eigenvalue = eig.into_iter().fold(f64::INFINITY, f64::min);
    let claimed_floor = psd_floor(inst.n, inst.k, inst.c);
    Ok(PsdCheck {
        dim: d,
        min_eigenvalue,
        claimed_floor,
        holds: min_eigenvalue >= claimed_floor - 1e-6,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitBound {
    pub t: f64,
    pub threshold: f64,
    /// `||(e^{-iMt} - e^{-i(M + beta X_T)t}) psi||_2`.
    pub exact_dist: f64,
    /// `||Pi_V psi||_2`.
    pub projected_norm: f64,
    /// Smallest gap among blocks outside `V`; infinite if there are none.
    pub min_outside_gap: f64,
    /// `min(2 beta / G, beta t, 1)`.
    pub block_term: f64,
    /// `2 ||Pi_V psi|| + K block_term`.
    pub split_bound: f64,
    /// Largest exact 2×2 distance among blocks outside `V`.
    pub measured_block_term: f64,
    pub holds: bool,
}

pub fn per_step_split_bound(inst: &LocalInstance, spike: &PauliString, state: &[Complex64], t: f64) -> Result<SplitBound> {
    per_step_split_bound_with(inst, spike, state, t, SPLIT_EXPONENT)
}

pub fn per_step_split_bound_with(
    inst: &LocalInstance,
    spike: &PauliString,
    state: &[Complex64],
    t: f64,
    threshold_exponent: f64,
) -> Result<SplitBound> {
    if inst.n > MAX_STATE_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubits for the per-step split",
            got: inst.n,
            limit: MAX_STATE_QUBITS,
        });
    }
    if spike.n() != inst.n || spike.z_mask() != 0 || spike.x_mask() == 0 {
        return Err(Error::Support("spike must be a nonempty X_T on the same register".into()));
    }
    if state.len() != inst.g.len() {
        return Err(Error::SizeMismatch {
            expected: inst.g.len(),
            got: state.len(),
        });
    }
    let nrm = norm(state);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(nrm));
    }
    let mask = spike.x_mask() as usize;
    let low = mask & mask.wrapping_neg();
    let thr = inst.threshold(threshold_exponent);
    let beta = inst.beta;
    let (mut diff_sq, mut proj_sq) = (0.0, 0.0);
    let (mut min_gap, mut block_max) = (f64::INFINITY, 0.0f64);
    for x in (0..inst.g.len()).filter(|x| x & low == 0) {
        let y = x ^ mask;
        let (a, b) = (inst.g[x], inst.g[y]);
        let u = crate::linalg::block2_exp(a, b, beta, t);
        let ea = Complex64::new(0.0, -a * t).exp();
        let eb = Complex64::new(0.0, -b * t).exp();
        let dx = ea * state[x] - (u[0][0] * state[x] + u[0][1] * state[y]);
        let dy = eb * state[y] - (u[1][0] * state[x] + u[1][1] * state[y]);
        diff_sq += dx.norm_sqr() + dy.norm_sqr();
        if inst.in_v(x, mask, thr) {
            proj_sq += state[x].norm_sqr() + state[y].norm_sqr();
        } else {
            let gap = (a - b).abs();
            min_gap = min_gap.min(gap);
            block_max = block_max.max(block2_distance(a, b, beta, t));
        }
    }
    let exact_dist = diff_sq.sqrt();
    let projected_norm = proj_sq.sqrt();
    let block_term = if min_gap.is_infinite() {
        0.0
    } else {
        (2.0 * beta / min_gap).min(beta * t.abs()).min(1.0)
    };
    let split_bound = 2.0 * projected_norm + GUARD * block_term;
    Ok(SplitBound {
        t,
        threshold: thr,
        exact_dist,
        projected_norm,
        min_outside_gap: min_gap,
        block_term,
        split_bound,
        measured_block_term: block_max,
        holds: exact_dist <= split_bound + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::{z_count, BinomTable, ZMethod, ZtQuery};
    use crate::evolution::{apply_spiked, distance};
    use crate::linalg::expm_unitary;
    use num_traits::ToPrimitive;
    use rand::Rng as _;

    fn random_state(dim: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = seeding::rng(seed);
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let s = norm(&v);
        v.into_iter().map(|a| a / s).collect()
    }

    #[test]
    fn sigma_and_support_counts() {
        assert_eq!(sigma2(16, 3), 1.0 / (30.0 * 16f64.ln()));
        let inst = sample_local_instance(8, 3, 2, 1.0, SupportDegree::ExactlyK, 4).unwrap();
        assert_eq!(inst.alpha().len(), 56);
        assert!(inst.alpha().iter().all(|(p, _)| p.locality() == 3 && p.is_diagonal()));
        let up = sample_local_instance(8, 3, 2, 1.0, SupportDegree::UpToK, 4).unwrap();
        assert_eq!(up.alpha().len(), 1 + 8 + 28 + 56);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_local_instance(10, 3, 2, 0.5, SupportDegree::ExactlyK, 9).unwrap();
        let b = sample_local_instance(10, 3, 2, 0.5, SupportDegree::ExactlyK, 9).unwrap();
        assert_eq!(a.alpha(), b.alpha());
        let c = sample_local_instance(10, 3, 2, 0.5, SupportDegree::ExactlyK, 10).unwrap();
        assert_ne!(a.alpha(), c.alpha());
    }

    #[test]
    fn sample_variance_is_close_to_sigma2() {
        let inst = sample_local_instance(20, 3, 2, 1.0, SupportDegree::ExactlyK, 1).unwrap();
        let vals: Vec<f64> = inst.alpha().iter().map(|(_, &v)| v).collect();
        let m = vals.len() as f64;
        let var = vals.iter().map(|v| v * v).sum::<f64>() / m;
        // 1140 draws: relative standard error of the variance is about 4%.
        assert!((var / inst.sigma2() - 1.0).abs() < 0.15, "{var} vs {}", inst.sigma2());
    }

    #[test]
    fn parameter_constraints() {
        assert!(sample_local_instance(10, 3, 1, 1.0, SupportDegree::ExactlyK, 0).is_err());
        assert!(sample_local_instance(10, 2, 2, 1.0, SupportDegree::ExactlyK, 0).is_err());
        assert!(sample_local_instance(10, 7, 2, 1.0, SupportDegree::ExactlyK, 0).is_err());
        assert!(sample_local_instance(10, 5, 3, 1.0, SupportDegree::ExactlyK, 0).is_ok());
        assert!(sample_local_instance(5, 6, 2, 1.0, SupportDegree::ExactlyK, 0).is_err());
        assert!(sample_local_instance(10, 3, 2, -1.0, SupportDegree::ExactlyK, 0).is_err());
    }

    #[test]
    fn spike_uniformity_chi_square() {
        let (n, c) = (6, 2);
        let fam = spike_family(n, c, SpikeEnsemble::UniformExactlyC);
        assert_eq!(fam.len(), 15);
        let mut rng = seeding::rng(77);
        let draws = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let p = sample_spike_with(n, c, SpikeEnsemble::UniformExactlyC, &mut rng).unwrap();
            assert_eq!(p.locality(), 2);
            *counts.entry(p.x_mask()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 15);
        let e = draws as f64 / 15.0;
        let chi2: f64 = counts.values().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // 14 degrees of freedom, 0.999 quantile about 36.1.
        assert!(chi2 < 36.1, "chi2 = {chi2}");
    }

    #[test]
    fn up_to_c_spikes_are_uniform_over_nonempty_sets() {
        let (n, c) = (5, 2);
        let fam = spike_family(n, c, SpikeEnsemble::UniformUpToC);
        assert_eq!(fam.len(), 15);
        let mut rng = seeding::rng(5);
        let draws = 60_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let p = sample_spike_with(n, c, SpikeEnsemble::UniformUpToC, &mut rng).unwrap();
            assert!((1..=c).contains(&p.locality()));
            *counts.entry(p.x_mask()).or_insert(0usize) += 1;
        }
        let e = draws as f64 / 15.0;
        let chi2: f64 = counts.values().map(|&o| (o as f64 - e).powi(2) / e).sum();
        assert!(counts.len() == 15 && chi2 < 36.1, "chi2 = {chi2}");
    }

    #[test]
    fn full_spike_covers_every_qubit() {
        let p = sample_spike(7, 7, SpikeEnsemble::UniformExactlyC, 3).unwrap();
        assert_eq!(p.x_mask(), 0x7f);
        assert!(sample_spike(3, 4, SpikeEnsemble::UniformExactlyC, 0).is_err());
    }

    #[test]
    fn zero_and_identity_alpha_are_maximally_bad() {
        let zero = LocalInstance::with_alpha(8, 3, 2, 1.0, CoeffVector::new(8).unwrap()).unwrap();
        let rep = goodness_check(&zero, GOODNESS_EXPONENT).unwrap();
        assert!(rep.per_x_fraction.iter().all(|&f| f == 1.0));
        let mut id = CoeffVector::new(8).unwrap();
        id.set(PauliString::identity(8).unwrap(), 0.7).unwrap();
        let inst = LocalInstance::with_alpha(8, 3, 2, 1.0, id).unwrap();
        let rep = goodness_check(&inst, GOODNESS_EXPONENT).unwrap();
        assert_eq!(rep.max_fraction, 1.0);
        assert!(rep.per_x_fraction.iter().all(|&f| f == 1.0));
    }

    fn brute_fraction(inst: &LocalInstance, x: usize, exponent: f64) -> f64 {
        let thr = inst.threshold(exponent);
        let mut hit = 0;
        let mut total = 0;
        for t in 0usize..1 << inst.n() {
            if t.count_ones() as usize != inst.c() {
                continue;
            }
            total += 1;
            // y_T flips the signs on T: evaluate g from alpha directly.
            let gx: f64 = inst
                .alpha()
                .iter()
                .map(|(p, &a)| if (p.z_mask() as usize & x).count_ones().is_multiple_of(2) { a } else { -a })
                .sum();
            let gy: f64 = inst
                .alpha()
                .iter()
                .map(|(p, &a)| if (p.z_mask() as usize & (x ^ t)).count_ones().is_multiple_of(2) { a } else { -a })
                .sum();
            if (gx - gy).abs() <= thr {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn goodness_matches_direct_evaluation() {
        let inst = sample_local_instance(8, 3, 2, 1.0, SupportDegree::ExactlyK, 21).unwrap();
        for e in [GOODNESS_EXPONENT, SPLIT_EXPONENT] {
            let rep = goodness_check(&inst, e).unwrap();
            for x in [0usize, 1, 77, 200, 255] {
                // direct sums differ from the WHT only in rounding
                let want = brute_fraction(&inst, x, e);
                assert!((rep.per_x_fraction[x] - want).abs() <= 1.0 / 28.0 + 1e-12);
            }
            assert!(rep.per_x_fraction.iter().all(|f| (0.0..=1.0).contains(f)));
        }
    }

    #[test]
    fn spike_averaged_projector_equals_goodness() {
        for seed in 0..3 {
            let inst = sample_local_instance(10, 3, 2, 1.0, SupportDegree::ExactlyK, seed).unwrap();
            for e in [GOODNESS_EXPONENT, SPLIT_EXPONENT] {
                let rep = goodness_check(&inst, e).unwrap();
                let proj = spike_averaged_projector(&inst, SpikeEnsemble::UniformExactlyC, e).unwrap();
                assert_eq!(proj, rep.per_x_fraction);
            }
        }
    }

    #[test]
    fn covariance_examples() {
        let q = covariance_bruteforce(6, 3, 2, &[0b0110, 0b1100]).unwrap();
        assert_eq!(q.q[0][1], 6);
        assert!(q.is_symmetric());
        // diagonal: |S ∩ T| odd means exactly one of the two, times C(4, 2)
        assert_eq!(q.q[0][0], 2 * 6);
        let single = covariance_bruteforce(10, 3, 2, &[0b11]).unwrap();
        let chk = covariance_psd_check(&single).unwrap();
        assert_eq!(chk.min_eigenvalue, single.q[0][0] as f64);
        assert!(chk.holds);
    }

    #[test]
    fn covariance_matches_z_counts() {
        let table = BinomTable::new(20);
        for (n, k, c) in [(10, 3, 2), (12, 4, 3), (9, 6, 2)] {
            let fam = random_t_family(n, c, 40, 8).unwrap();
            let inst = covariance_bruteforce(n, k, c, &fam).unwrap();
            assert!(inst.is_symmetric() && inst.depends_only_on_intersection());
            for (i, &a) in fam.iter().enumerate() {
                for (j, &b) in fam.iter().enumerate() {
                    let t = (a & b).count_ones() as usize;
                    let z = z_count(&ZtQuery::new(n, k, c, t).unwrap(), ZMethod::PartitionSum, &table).unwrap();
                    assert_eq!(inst.q[i][j], z.to_u64().unwrap());
                }
            }
        }
    }

    #[test]
    fn psd_floor_examples() {
        let fam = random_t_family(12, 2, 20, 3).unwrap();
        let chk = covariance_psd_check(&covariance_bruteforce(12, 3, 2, &fam).unwrap()).unwrap();
        assert_eq!(chk.claimed_floor, 32.0);
        assert!(chk.holds, "{chk:?}");
        let all = random_t_family(10, 2, DEFAULT_FAMILY, 0).unwrap();
        assert_eq!(all.len(), 45);
        let chk = covariance_psd_check(&covariance_bruteforce(10, 3, 2, &all).unwrap()).unwrap();
        assert!(chk.holds, "{chk:?}");
    }

    #[test]
    fn random_family_is_distinct_and_sized() {
        let fam = random_t_family(14, 2, 50, 1).unwrap();
        assert_eq!(fam.len(), 50);
        assert!(fam.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(fam, random_t_family(14, 2, 50, 1).unwrap());
    }

    #[test]
    fn block_evolution_matches_dense() {
        let inst = sample_local_instance(7, 3, 2, 0.8, SupportDegree::UpToK, 2).unwrap();
        let spike = sample_spike(7, 2, SpikeEnsemble::UniformExactlyC, 6).unwrap();
        let h = inst.spiked_alpha(&spike).unwrap().dense_matrix().unwrap();
        let psi = random_state(128, 4);
        for t in [0.3, 2.0, 11.0] {
            let want = expm_unitary(&h, t).unwrap().matvec(&psi);
            let mut got = psi.clone();
            apply_spiked(inst.g(), spike.x_mask() as usize, inst.beta(), t, &mut got).unwrap();
            assert!(distance(&want, &got) < 1e-9);
        }
    }

    #[test]
    fn split_bound_trivial_cases() {
        let inst = sample_local_instance(8, 3, 2, 1.0, SupportDegree::ExactlyK, 5).unwrap();
        let spike = PauliString::x_s(8, 0b101).unwrap();
        let psi = random_state(256, 1);
        assert_eq!(per_step_split_bound(&inst, &spike, &psi, 0.0).unwrap().exact_dist, 0.0);
        let zero = inst.with_beta(0.0).unwrap();
        assert!(per_step_split_bound(&zero, &spike, &psi, 3.0).unwrap().exact_dist < 1e-14);
        let bad: Vec<Complex64> = psi.iter().map(|a| a * 2.0).collect();
        assert!(matches!(
            per_step_split_bound(&inst, &spike, &bad, 1.0),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn split_bound_holds_before_second_order_drift() {
        for seed in 0..4 {
            let inst = sample_local_instance(10, 3, 2, 0.05, SupportDegree::ExactlyK, seed).unwrap();
            for s in 0..4 {
                let spike = sample_spike(10, 2, SpikeEnsemble::UniformExactlyC, 100 + s).unwrap();
                let psi = random_state(1024, seed * 10 + s);
                for t in [0.1, 1.0, 4.0, 20.0] {
                    let r = per_step_split_bound(&inst, &spike, &psi, t).unwrap();
                    assert!(r.holds, "{r:?}");
                    assert!(r.exact_dist <= 2.0 * r.projected_norm + r.measured_block_term + 1e-12);
                }
            }
        }
    }

    #[test]
    fn outside_v_state_obeys_block_closed_form() {
        let inst = sample_local_instance(8, 3, 2, 0.02, SupportDegree::ExactlyK, 13).unwrap();
        let spike = PauliString::x_s(8, 0b11000).unwrap();
        let mask = 0b11000usize;
        let thr = inst.threshold(SPLIT_EXPONENT);
        let outside: Vec<usize> = (0..256).filter(|&x| (inst.g()[x] - inst.g()[x ^ mask]).abs() > thr).collect();
        let mut psi = vec![Complex64::new(0.0, 0.0); 256];
        for &x in &outside {
            psi[x] = Complex64::new(1.0, 0.5);
        }
        let s = norm(&psi);
        psi.iter_mut().for_each(|a| *a /= s);
        let g_min = outside.iter().map(|&x| (inst.g()[x] - inst.g()[x ^ mask]).abs()).fold(f64::INFINITY, f64::min);
        for t in [0.5, 3.0, 10.0] {
            let r = per_step_split_bound(&inst, &spike, &psi, t).unwrap();
            assert!(r.projected_norm < 1e-15);
            assert_eq!(r.min_outside_gap, g_min);
            let beta = inst.beta();
            assert!(r.exact_dist <= GUARD * (2.0 * beta / g_min).min(beta * t).min(1.0));
            assert!(r.exact_dist <= r.measured_block_term + 1e-12);
        }
    }
}
