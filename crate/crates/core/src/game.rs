//! The interleaved-evolution game: a distinguisher prepares `|0>`, then
//! alternates controls `U_j` with evolution `e^{-iHt_j}` under an unknown
//! `H ∈ {H0, H1}`, and must tell the two final states apart.
//!
//! `run_game` evolves both branches, builds the hybrid states
//! `phi_k` (first `k` rounds under `H0`, the rest under `H1`) and records
//! `delta_k = ||phi_k - phi_{k-1}||`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::{apply_diagonal, apply_spiked, distance, inner, norm};
use crate::linalg::{block2_distance, eig_hermitian, opnorm, CMatrix, Eigh, HermitianMatrix};
use crate::local_case::{
    goodness_check, per_step_split_bound_with, sample_spike_with, spike_averaged_projector, spike_family, LocalInstance,
    SpikeEnsemble, SPLIT_EXPONENT,
};
use crate::seeding::{self, Rng};
use crate::worst_case::WorstCaseInstance;

pub const MAX_BLOCK_GAME_QUBITS: usize = 22;
pub const MAX_DENSE_GAME_QUBITS: usize = 14;
/// Dense operator norms of `e^{-iH0 t} - e^{-iH1 t}` up to this many qubits.
pub const MAX_DENSE_BOUND_QUBITS: usize = 8;
pub const MAX_SEARCH_QUBITS: usize = 10;
pub const NORM_TOL: f64 = 1e-10;
pub const CHAIN_TOL: f64 = 1e-9;

const HAAR_STREAM: u32 = 0x4841;
const SEARCH_STREAM: u32 = 0x5345;
const SPIKE_STREAM: u32 = 0x5350;

fn complex_gaussian(rng: &mut Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unitary `U = H_0 H_1 ... H_{d-2} Λ` stored as Householder
/// reflectors. `H_j` acts on coordinates `j..d`, and `Λ` holds the phases of
/// the diagonal of `R`, so `U` is the phase-normalized `Q` of a complex
/// Gaussian matrix. Reflector `j` is built from a fresh Gaussian vector in
/// `C^{d-j}`, which has the same law as column `j` of the partially reduced
/// Gaussian matrix.
#[derive(Clone, Debug)]
pub struct HaarUnitary {
    dim: usize,
    reflectors: Vec<Vec<Complex64>>,
    phases: Vec<Complex64>,
}

impl HaarUnitary {
    pub fn sample(dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim == 0 || dim > 1 << MAX_BLOCK_GAME_QUBITS {
            return Err(invalid(format!("Haar unitary of dimension {dim}")));
        }
        let mut reflectors = Vec::with_capacity(dim.saturating_sub(1));
        let mut phases = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut x: Vec<Complex64> = (0..dim - j).map(|_| complex_gaussian(rng)).collect();
            let nx = norm(&x);
            let unit = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
            if j == dim - 1 {
                phases.push(unit);
                break;
            }
            // H x = alpha e_0 with alpha = -unit |x|; R_jj = alpha.
            let alpha = -unit * nx;
            x[0] -= alpha;
            let nv = norm(&x);
            x.iter_mut().for_each(|a| *a /= nv);
            reflectors.push(x);
            phases.push(-unit);
        }
        Ok(Self {
            dim,
            reflectors,
            phases,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, psi: &mut [Complex64]) {
        for (a, p) in psi.iter_mut().zip(&self.phases) {
            *a *= p;
        }
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            let tail = &mut psi[j..];
            let s = inner(v, tail) * 2.0;
            for (a, b) in tail.iter_mut().zip(v) {
                *a -= b * s;
            }
        }
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            reflectors: self.reflectors.iter().map(|v| v.iter().map(|a| a.conj()).collect()).collect(),
            phases: self.phases.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for c in 0..self.dim {
            let mut e = vec![Complex64::new(0.0, 0.0); self.dim];
            e[c] = Complex64::new(1.0, 0.0);
            self.apply(&mut e);
            for (r, v) in e.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub enum Gate {
    Haar(Arc<HaarUnitary>),
    /// `I + (e^{i theta} - 1) |u><u|` for a unit vector `u`.
    Kick { u: Arc<Vec<Complex64>>, theta: f64 },
    Matrix(Arc<CMatrix>),
}

impl Gate {
    fn apply(&self, psi: &mut [Complex64]) {
        match self {
            Gate::Haar(h) => h.apply(psi),
            Gate::Kick { u, theta } => {
                let s = inner(u, psi) * (Complex64::new(0.0, *theta).exp() - 1.0);
                for (a, b) in psi.iter_mut().zip(u.iter()) {
                    *a += b * s;
                }
            }
            Gate::Matrix(m) => {
                let out = m.matvec(psi);
                psi.copy_from_slice(&out);
            }
        }
    }

    fn conj(&self) -> Gate {
        match self {
            Gate::Haar(h) => Gate::Haar(Arc::new(h.conj())),
            Gate::Kick { u, theta } => Gate::Kick {
                u: Arc::new(u.iter().map(|a| a.conj()).collect()),
                theta: -theta,
            },
            Gate::Matrix(m) => Gate::Matrix(Arc::new(m.conj())),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Gate::Haar(h) => h.dim(),
            Gate::Kick { u, .. } => u.len(),
            Gate::Matrix(m) => m.rows(),
        }
    }
}

/// A control unitary as a product of gates, applied first to last.
#[derive(Clone, Debug, Default)]
pub struct Control {
    gates: Vec<Gate>,
    label: String,
}

impl Control {
    pub fn identity() -> Self {
        Self {
            gates: Vec::new(),
            label: "identity".into(),
        }
    }

    pub fn haar(dim: usize, seed: u64) -> Result<Self> {
        let h = HaarUnitary::sample(dim, &mut seeding::rng(seed))?;
        Ok(Self {
            gates: vec![Gate::Haar(Arc::new(h))],
            label: format!("haar({seed})"),
        })
    }

    pub fn explicit(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(invalid("control matrix must be square"));
        }
        let defect = m.unitarity_defect();
        if defect > NORM_TOL {
            return Err(invalid(format!("control matrix is not unitary (defect {defect:e})")));
        }
        Ok(Self {
            gates: vec![Gate::Matrix(Arc::new(m))],
            label: "explicit".into(),
        })
    }

    /// `self` followed by a rank-one phase kick along `u`.
    pub fn then_kick(&self, u: Vec<Complex64>, theta: f64) -> Result<Self> {
        let nu = norm(&u);
        if (nu - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(nu));
        }
        let mut gates = self.gates.clone();
        gates.push(Gate::Kick { u: Arc::new(u), theta });
        let label = if self.label.ends_with("+search") {
            self.label.clone()
        } else {
            format!("{}+search", self.label)
        };
        Ok(Self { gates, label })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn conj(&self) -> Self {
        Self {
            gates: self.gates.iter().map(Gate::conj).collect(),
            label: format!("conj({})", self.label),
        }
    }

    pub fn apply(&self, psi: &mut [Complex64]) {
        for g in &self.gates {
            g.apply(psi);
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.gates.iter().find(|g| g.dim() != dim) {
            Some(g) => Err(Error::SizeMismatch {
                expected: dim,
                got: g.dim(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Round {
    pub control: Control,
    pub t: f64,
}

#[derive(Clone, Debug)]
pub struct RoundSchedule {
    rounds: Vec<Round>,
    time_reversal: bool,
}

impl RoundSchedule {
    pub fn new(rounds: Vec<Round>, time_reversal: bool) -> Result<Self> {
        if rounds.is_empty() {
            return Err(invalid("a schedule needs at least one round"));
        }
        if let Some(r) = rounds.iter().find(|r| !r.t.is_finite() || (r.t < 0.0 && !time_reversal)) {
            return Err(invalid(format!("time {} needs the time-reversal flag or is not finite", r.t)));
        }
        Ok(Self { rounds, time_reversal })
    }

    /// Haar controls seeded per round from `seed`.
    pub fn haar(dim: usize, times: &[f64], seed: u64) -> Result<Self> {
        let rounds = times
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let h = HaarUnitary::sample(dim, &mut seeding::substream(seed, HAAR_STREAM, j as u32))?;
                Ok(Round {
                    control: Control {
                        gates: vec![Gate::Haar(Arc::new(h))],
                        label: format!("haar({seed}/{j})"),
                    },
                    t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rounds, false)
    }

    pub fn identity(times: &[f64]) -> Result<Self> {
        Self::new(
            times.iter().map(|&t| Round { control: Control::identity(), t }).collect(),
            false,
        )
    }

    pub fn m(&self) -> usize {
        self.rounds.len()
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn times(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.t).collect()
    }

    pub fn time_reversal(&self) -> bool {
        self.time_reversal
    }

    /// Conjugated controls and negated times. For real Hamiltonians this
    /// conjugates every state of the game.
    pub fn reversed_conjugate(&self) -> Self {
        Self {
            rounds: self
                .rounds
                .iter()
                .map(|r| Round {
                    control: r.control.conj(),
                    t: -r.t,
                })
                .collect(),
            time_reversal: true,
        }
    }

    /// Pads with `(identity, 0)` rounds up to `m`.
    pub fn padded(&self, m: usize) -> Self {
        let mut rounds = self.rounds.clone();
        while rounds.len() < m {
            rounds.push(Round { control: Control::identity(), t: 0.0 });
        }
        Self {
            rounds,
            time_reversal: self.time_reversal,
        }
    }
}

#[derive(Debug)]
pub struct DenseHamiltonian {
    matrix: HermitianMatrix,
    eig: Eigh,
}

#[derive(Clone, Debug)]
pub enum Hamiltonian {
    Diagonal(Arc<Vec<f64>>),
    /// `diag(g) + beta X_mask`.
    Spiked { g: Arc<Vec<f64>>, mask: usize, beta: f64 },
    Dense(Arc<DenseHamiltonian>),
}

impl Hamiltonian {
    pub fn dense(h: HermitianMatrix) -> Result<Self> {
        let eig = eig_hermitian(&h)?;
        Ok(Hamiltonian::Dense(Arc::new(DenseHamiltonian { matrix: h, eig })))
    }

    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Diagonal(g) | Hamiltonian::Spiked { g, .. } => g.len(),
            Hamiltonian::Dense(d) => d.matrix.dim(),
        }
    }

    pub fn evolve(&self, t: f64, psi: &mut [Complex64]) -> Result<()> {
        match self {
            Hamiltonian::Diagonal(g) => apply_diagonal(g, t, psi),
            Hamiltonian::Spiked { g, mask, beta } => apply_spiked(g, *mask, *beta, t, psi),
            Hamiltonian::Dense(d) => {
                let v = &d.eig.vectors;
                let dim = d.eig.dim();
                let coeffs: Vec<Complex64> = (0..dim)
                    .map(|j| {
                        let c: Complex64 = (0..dim).map(|r| v[(r, j)].conj() * psi[r]).sum();
                        c * Complex64::new(0.0, -d.eig.values[j] * t).exp()
                    })
                    .collect();
                for (r, a) in psi.iter_mut().enumerate() {
                    *a = (0..dim).map(|j| v[(r, j)] * coeffs[j]).sum();
                }
                Ok(())
            }
        }
    }

    fn to_dense(&self) -> Result<HermitianMatrix> {
        match self {
            Hamiltonian::Diagonal(g) => Ok(HermitianMatrix::from_real_diagonal(g)),
            Hamiltonian::Spiked { g, mask, beta } => HermitianMatrix::new(CMatrix::from_fn(g.len(), g.len(), |r, c| {
                let mut v = if r == c { g[r] } else { 0.0 };
                if r == c ^ mask {
                    v += beta;
                }
                Complex64::new(v, 0.0)
            })),
            Hamiltonian::Dense(d) => Ok(d.matrix.clone()),
        }
    }
}

/// `(diag(g), diag(g) + beta X_top)` for the worst-case instance.
pub fn worst_case_pair(inst: &WorstCaseInstance) -> (Hamiltonian, Hamiltonian) {
    let g = Arc::new(inst.diagonal().g.clone());
    let mask = inst.spike().x_mask() as usize;
    (
        Hamiltonian::Diagonal(g.clone()),
        Hamiltonian::Spiked {
            g,
            mask,
            beta: inst.beta(),
        },
    )
}

/// `(diag(g), diag(g) + beta X_T)` for a local instance and spike mask `T`.
pub fn local_pair(inst: &LocalInstance, mask: usize) -> (Hamiltonian, Hamiltonian) {
    let g = Arc::new(inst.g().to_vec());
    (
        Hamiltonian::Diagonal(g.clone()),
        Hamiltonian::Spiked {
            g,
            mask,
            beta: inst.beta(),
        },
    )
}

/// `||e^{-i H0 t} - e^{-i H1 t}||_inf`. Exact per 2×2 block when the two
/// Hamiltonians differ by a spike on a shared diagonal; dense otherwise.
pub fn step_operator_bound(h0: &Hamiltonian, h1: &Hamiltonian, t: f64) -> Result<f64> {
    use Hamiltonian::*;
    match (h0, h1) {
        (Diagonal(a), Spiked { g, mask, beta }) | (Spiked { g, mask, beta }, Diagonal(a)) if a == g => {
            if *mask == 0 {
                return Ok((Complex64::new(1.0, 0.0) - Complex64::new(0.0, -beta * t).exp()).norm());
            }
            let low = mask & mask.wrapping_neg();
            Ok((0..g.len())
                .filter(|x| x & low == 0)
                .map(|x| block2_distance(g[x], g[x ^ mask], *beta, t))
                .fold(0.0, f64::max))
        }
        (Diagonal(a), Diagonal(b)) => Ok(a
            .iter()
            .zip(b.iter())
            .map(|(p, q)| (Complex64::new(0.0, -p * t).exp() - Complex64::new(0.0, -q * t).exp()).norm())
            .fold(0.0, f64::max)),
        _ => {
            let dim = h0.dim();
            if dim > 1 << MAX_DENSE_BOUND_QUBITS {
                return Err(Error::DimensionGuard {
                    what: "dimension for a dense step bound",
                    got: dim,
                    limit: 1 << MAX_DENSE_BOUND_QUBITS,
                });
            }
            let u0 = eig_hermitian(&h0.to_dense()?)?.unitary(t);
            let u1 = eig_hermitian(&h1.to_dense()?)?.unitary(t);
            opnorm(&(&u0 - &u1))
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Advantage {
    /// `(1/2) sqrt(1 - |<phi|psi>|^2)`.
    pub helstrom: f64,
    /// `(1/2) ||phi - psi||_2`.
    pub euclidean: f64,
}

pub fn optimal_advantage(a: &[Complex64], b: &[Complex64]) -> Result<Advantage> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    for v in [a, b] {
        let nv = norm(v);
        if (nv - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(nv));
        }
    }
    let overlap = inner(a, b).norm_sqr().min(1.0);
    Ok(Advantage {
        helstrom: 0.5 * (1.0 - overlap).sqrt(),
        euclidean: 0.5 * distance(a, b),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameTranscript {
    pub n: usize,
    pub m: usize,
    pub times: Vec<f64>,
    pub controls: Vec<String>,
    pub time_reversal: bool,
    pub final_state_unspiked: Vec<Complex64>,
    pub final_state_spiked: Vec<Complex64>,
    /// `delta_k = ||phi_k - phi_{k-1}||_2`.
    pub per_step_dist: Vec<f64>,
    /// `||e^{-i H0 t_k} - e^{-i H1 t_k}||_inf`.
    pub per_step_bound: Vec<f64>,
    pub total_dist: f64,
    pub sum_step_dist: f64,
    pub advantage: Advantage,
    pub max_norm_defect: f64,
    pub hybrid_chain_ok: bool,
    pub step_domination_ok: bool,
}

impl GameTranscript {
    pub fn bound_sum(&self) -> f64 {
        self.per_step_bound.iter().sum()
    }
}

fn check_game(h0: &Hamiltonian, h1: &Hamiltonian, schedule: &RoundSchedule) -> Result<usize> {
    let dim = h0.dim();
    if h1.dim() != dim {
        return Err(Error::SizeMismatch {
            expected: dim,
            got: h1.dim(),
        });
    }
    if !dim.is_power_of_two() {
        return Err(invalid(format!("dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    let dense = matches!(h0, Hamiltonian::Dense(_)) || matches!(h1, Hamiltonian::Dense(_));
    let limit = if dense { MAX_DENSE_GAME_QUBITS } else { MAX_BLOCK_GAME_QUBITS };
    if n > limit {
        return Err(Error::DimensionGuard {
            what: "qubits in the game",
            got: n,
            limit,
        });
    }
    for r in schedule.rounds() {
        r.control.check_dim(dim)?;
    }
    Ok(n)
}

fn ket0(dim: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    v[0] = Complex64::new(1.0, 0.0);
    v
}

fn run_rounds(h: &Hamiltonian, rounds: &[Round], psi: &mut [Complex64], defect: &mut f64) -> Result<()> {
    for r in rounds {
        r.control.apply(psi);
        h.evolve(r.t, psi)?;
        *defect = defect.max((norm(psi) - 1.0).abs());
    }
    Ok(())
}

/// Unspiked prefix states `psi_k = U_k e^{-iH0 t_{k-1}} ... U_1 |0>`.
fn prefix_states(h0: &Hamiltonian, schedule: &RoundSchedule, defect: &mut f64) -> Result<Vec<Vec<Complex64>>> {
    let mut s = ket0(h0.dim());
    let mut out = Vec::with_capacity(schedule.m());
    for r in schedule.rounds() {
        r.control.apply(&mut s);
        *defect = defect.max((norm(&s) - 1.0).abs());
        out.push(s.clone());
        h0.evolve(r.t, &mut s)?;
    }
    Ok(out)
}

/// Plays both branches and the full hybrid chain; `O(m^2)` rounds.
pub fn run_game(h0: &Hamiltonian, h1: &Hamiltonian, schedule: &RoundSchedule) -> Result<GameTranscript> {
    let n = check_game(h0, h1, schedule)?;
    let rounds = schedule.rounds();
    let m = rounds.len();
    let mut defect = 0.0f64;
    // phi_k: first k rounds under H0, the rest under H1.
    let mut prefix = ket0(h0.dim());
    let mut phis = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut phi = prefix.clone();
        run_rounds(h1, &rounds[k..], &mut phi, &mut defect)?;
        phis.push(phi);
        if k < m {
            run_rounds(h0, &rounds[k..=k], &mut prefix, &mut defect)?;
        }
    }
    let per_step_dist: Vec<f64> = (1..=m).map(|k| distance(&phis[k], &phis[k - 1])).collect();
    let per_step_bound = rounds
        .iter()
        .map(|r| step_operator_bound(h0, h1, r.t))
        .collect::<Result<Vec<_>>>()?;
    let unspiked = phis.pop().unwrap_or_default();
    let spiked = phis.swap_remove(0);
    finish(n, schedule, unspiked, spiked, per_step_dist, per_step_bound, defect)
}

/// Same transcript with `delta_k = ||(e^{-iH0 t_k} - e^{-iH1 t_k}) psi_k||`,
/// which equals the hybrid difference because the remaining rounds are
/// unitary; `O(m)` rounds.
pub fn run_game_fast(h0: &Hamiltonian, h1: &Hamiltonian, schedule: &RoundSchedule) -> Result<GameTranscript> {
    let n = check_game(h0, h1, schedule)?;
    let mut defect = 0.0f64;
    let psis = prefix_states(h0, schedule, &mut defect)?;
    let mut per_step_dist = Vec::with_capacity(schedule.m());
    for (r, psi) in schedule.rounds().iter().zip(&psis) {
        let (mut a, mut b) = (psi.clone(), psi.clone());
        h0.evolve(r.t, &mut a)?;
        h1.evolve(r.t, &mut b)?;
        per_step_dist.push(distance(&a, &b));
    }
    let mut unspiked = psis.last().cloned().unwrap_or_default();
    h0.evolve(schedule.rounds().last().map_or(0.0, |r| r.t), &mut unspiked)?;
    let mut spiked = ket0(h0.dim());
    run_rounds(h1, schedule.rounds(), &mut spiked, &mut defect)?;
    let per_step_bound = schedule
        .rounds()
        .iter()
        .map(|r| step_operator_bound(h0, h1, r.t))
        .collect::<Result<Vec<_>>>()?;
    finish(n, schedule, unspiked, spiked, per_step_dist, per_step_bound, defect)
}

fn finish(
    n: usize,
    schedule: &RoundSchedule,
    unspiked: Vec<Complex64>,
    spiked: Vec<Complex64>,
    per_step_dist: Vec<f64>,
    per_step_bound: Vec<f64>,
    defect: f64,
) -> Result<GameTranscript> {
    let total_dist = distance(&unspiked, &spiked);
    let sum_step_dist: f64 = per_step_dist.iter().sum();
    let advantage = optimal_advantage(&unspiked, &spiked)?;
    let step_domination_ok = per_step_dist.iter().zip(&per_step_bound).all(|(d, b)| *d <= b + CHAIN_TOL);
    Ok(GameTranscript {
        n,
        m: schedule.m(),
        times: schedule.times(),
        controls: schedule.rounds().iter().map(|r| r.control.label().to_string()).collect(),
        time_reversal: schedule.time_reversal(),
        hybrid_chain_ok: total_dist <= sum_step_dist + CHAIN_TOL,
        step_domination_ok,
        final_state_unspiked: unspiked,
        final_state_spiked: spiked,
        per_step_dist,
        per_step_bound,
        total_dist,
        sum_step_dist,
        advantage,
        max_norm_defect: defect,
    })
}

/// `||phi_m - phi_0||` only.
fn final_distance(h0: &Hamiltonian, h1: &Hamiltonian, schedule: &RoundSchedule) -> Result<f64> {
    let mut defect = 0.0;
    let (mut a, mut b) = (ket0(h0.dim()), ket0(h0.dim()));
    run_rounds(h0, schedule.rounds(), &mut a, &mut defect)?;
    run_rounds(h1, schedule.rounds(), &mut b, &mut defect)?;
    Ok(distance(&a, &b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Standard deviation of the `ln t` step.
    pub log_step: f64,
    /// Standard deviation of the kick angle.
    pub kick: f64,
    /// Also perturb the controls; otherwise only the times move.
    pub search_controls: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            iterations: 40,
            t_min: 1e-3,
            t_max: 1e5,
            log_step: 1.0,
            kick: 0.3,
            search_controls: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub m: usize,
    pub seed: u64,
    pub restart_best: Vec<f64>,
    pub best_restart: usize,
    pub best: GameTranscript,
    /// `total_dist <= sum_k bound_k`.
    pub dominated: bool,
}

fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn climb(
    h0: &Hamiltonian,
    h1: &Hamiltonian,
    start: RoundSchedule,
    cfg: &SearchConfig,
    rng: &mut Rng,
) -> Result<(RoundSchedule, f64)> {
    let dim = h0.dim();
    let mut best = start;
    let mut best_d = final_distance(h0, h1, &best)?;
    for _ in 0..cfg.iterations {
        let j = rng.random_range(0..best.m());
        let mut cand = best.clone();
        let round = &mut cand.rounds[j];
        if !cfg.search_controls || rng.random::<f64>() < 0.5 {
            let z: f64 = StandardNormal.sample(rng);
            round.t = if round.t <= 0.0 {
                log_uniform(rng, cfg.t_min, cfg.t_max)
            } else {
                (round.t * (cfg.log_step * z).exp()).clamp(cfg.t_min, cfg.t_max)
            };
        } else {
            let mut u: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
            let nu = norm(&u);
            u.iter_mut().for_each(|a| *a /= nu);
            let z: f64 = StandardNormal.sample(rng);
            round.control = round.control.then_kick(u, cfg.kick * z)?;
        }
        let d = final_distance(h0, h1, &cand)?;
        if d > best_d {
            best = cand;
            best_d = d;
        }
    }
    Ok((best, best_d))
}

/// Hill climbing over `ln t_j` and rank-one phase kicks on `U_j`, from
/// `cfg.restarts` random starts. `warm` (padded to `m`) replaces the first
/// start, so the result never falls below it.
pub fn adversarial_schedule_search(
    h0: &Hamiltonian,
    h1: &Hamiltonian,
    m: usize,
    cfg: &SearchConfig,
    seed: u64,
    warm: Option<&RoundSchedule>,
) -> Result<(RoundSchedule, SearchResult)> {
    let n = check_game(h0, h1, &RoundSchedule::identity(&vec![0.0; m.max(1)])?)?;
    if n > MAX_SEARCH_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubits in the schedule search",
            got: n,
            limit: MAX_SEARCH_QUBITS,
        });
    }
    if m == 0 || cfg.restarts == 0 || !(cfg.t_min > 0.0 && cfg.t_max >= cfg.t_min) {
        return Err(invalid("search needs m >= 1, restarts >= 1 and 0 < t_min <= t_max"));
    }
    let dim = h0.dim();
    let results = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeding::substream(seed, SEARCH_STREAM, r as u32);
            let start = match (r, warm) {
                (0, Some(w)) => w.padded(m),
                _ => {
                    let times: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, cfg.t_min, cfg.t_max)).collect();
                    let hseed = rng.random::<u64>();
                    RoundSchedule::haar(dim, &times, hseed)?
                }
            };
            climb(h0, h1, start, cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let restart_best: Vec<f64> = results.iter().map(|(_, d)| *d).collect();
    let best_restart = restart_best
        .iter()
        .enumerate()
        .fold(0, |b, (i, &d)| if d > restart_best[b] { i } else { b });
    let schedule = results[best_restart].0.clone();
    let best = run_game(h0, h1, &schedule)?;
    let dominated = best.total_dist <= best.bound_sum() + CHAIN_TOL;
    Ok((
        schedule,
        SearchResult {
            m,
            seed,
            restart_best,
            best_restart,
            best,
            dominated,
        },
    ))
}

/// Searches each `m` in turn, warm-starting from the previous best.
pub fn nested_search(
    h0: &Hamiltonian,
    h1: &Hamiltonian,
    ms: &[usize],
    cfg: &SearchConfig,
    seed: u64,
) -> Result<Vec<SearchResult>> {
    let mut out: Vec<SearchResult> = Vec::with_capacity(ms.len());
    let mut warm: Option<RoundSchedule> = None;
    for &m in ms {
        let (s, r) = adversarial_schedule_search(h0, h1, m, cfg, seed, warm.as_ref())?;
        warm = Some(s);
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AverageCaseReport {
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub beta: f64,
    pub m: usize,
    pub ensemble: SpikeEnsemble,
    pub n_spike_samples: usize,
    pub threshold_exponent: f64,
    pub threshold: f64,
    /// Diagonal of `E_Delta[Pi_V]` equals the goodness fractions bit for bit
    /// (exactly-`c` ensemble only).
    pub projector_matches_goodness: Option<bool>,
    /// `<psi_k| E_Delta[Pi_V] |psi_k>`.
    pub projected_mass: Vec<f64>,
    /// Largest gap between `projected_mass` and the average of `||Pi_{V_T} psi_k||^2` over every spike.
    pub projected_mass_defect: f64,
    pub mean_step_dist: Vec<f64>,
    pub mean_total_dist: f64,
    pub std_error: f64,
    /// `2 sqrt(projected_mass_k) + E[largest 2×2 distance outside V]`.
    pub per_step_envelope: Vec<f64>,
    /// `2 sqrt(projected_mass_k) + K E[min(2 beta / G, beta t, 1)]`.
    pub guarded_step_envelope: Vec<f64>,
    pub envelope: f64,
    /// `mean_total_dist <= m envelope + 3 std_error`.
    pub within_envelope: bool,
    pub max_norm_defect: f64,
}

pub fn average_case_game(
    inst: &LocalInstance,
    ensemble: SpikeEnsemble,
    schedule: &RoundSchedule,
    n_spike_samples: usize,
    seed: u64,
) -> Result<AverageCaseReport> {
    let n = inst.n();
    if n > MAX_DENSE_GAME_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubits in the average-case game",
            got: n,
            limit: MAX_DENSE_GAME_QUBITS,
        });
    }
    if n_spike_samples < 2 {
        return Err(invalid("need at least two spike samples for a standard error"));
    }
    let exponent = SPLIT_EXPONENT;
    let h0 = Hamiltonian::Diagonal(Arc::new(inst.g().to_vec()));
    check_game(&h0, &h0, schedule)?;
    let mut defect = 0.0f64;
    let psis = prefix_states(&h0, schedule, &mut defect)?;

    let proj = spike_averaged_projector(inst, ensemble, exponent)?;
    let projector_matches_goodness = match ensemble {
        SpikeEnsemble::UniformExactlyC => Some(goodness_check(inst, exponent)?.per_x_fraction == proj),
        SpikeEnsemble::UniformUpToC => None,
    };
    let projected_mass: Vec<f64> = psis
        .iter()
        .map(|psi| psi.iter().zip(&proj).map(|(a, p)| a.norm_sqr() * p).sum())
        .collect();
    let thr = inst.threshold(exponent);
    let family = spike_family(n, inst.c(), ensemble);
    let projected_mass_defect = psis
        .iter()
        .zip(&projected_mass)
        .map(|(psi, &q)| {
            let total: f64 = family
                .iter()
                .map(|&t| {
                    let t = t as usize;
                    psi.iter()
                        .enumerate()
                        .filter(|&(x, _)| (inst.g()[x] - inst.g()[x ^ t]).abs() <= thr)
                        .map(|(_, a)| a.norm_sqr())
                        .sum::<f64>()
                })
                .sum();
            (total / family.len() as f64 - q).abs()
        })
        .fold(0.0, f64::max);

    let samples = (0..n_spike_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = seeding::substream(seed, SPIKE_STREAM, s as u32);
            let spike = sample_spike_with(n, inst.c(), ensemble, &mut rng)?;
            let h1 = Hamiltonian::Spiked {
                g: Arc::new(inst.g().to_vec()),
                mask: spike.x_mask() as usize,
                beta: inst.beta(),
            };
            let mut d = 0.0f64;
            let mut spiked = ket0(h0.dim());
            run_rounds(&h1, schedule.rounds(), &mut spiked, &mut d)?;
            let splits = schedule
                .rounds()
                .iter()
                .zip(&psis)
                .map(|(r, psi)| per_step_split_bound_with(inst, &spike, psi, r.t, exponent))
                .collect::<Result<Vec<_>>>()?;
            Ok((spiked, splits, d))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut unspiked = psis.last().cloned().unwrap_or_default();
    h0.evolve(schedule.rounds().last().map_or(0.0, |r| r.t), &mut unspiked)?;
    let m = schedule.m();
    let ns = n_spike_samples as f64;
    let totals: Vec<f64> = samples.iter().map(|(s, _, _)| distance(&unspiked, s)).collect();
    let mean_total_dist = totals.iter().sum::<f64>() / ns;
    let var = totals.iter().map(|d| (d - mean_total_dist).powi(2)).sum::<f64>() / (ns - 1.0);
    let std_error = (var / ns).sqrt();
    let mean_over = |f: &dyn Fn(&crate::local_case::SplitBound) -> f64, k: usize| -> f64 {
        samples.iter().map(|(_, sp, _)| f(&sp[k])).sum::<f64>() / ns
    };
    let mean_step_dist: Vec<f64> = (0..m).map(|k| mean_over(&|s| s.exact_dist, k)).collect();
    let per_step_envelope: Vec<f64> = (0..m)
        .map(|k| 2.0 * projected_mass[k].sqrt() + mean_over(&|s| s.measured_block_term, k))
        .collect();
    let guarded_step_envelope: Vec<f64> = (0..m)
        .map(|k| 2.0 * projected_mass[k].sqrt() + crate::GUARD * mean_over(&|s| s.block_term, k))
        .collect();
    let envelope = per_step_envelope.iter().copied().fold(0.0, f64::max);
    let max_norm_defect = samples.iter().map(|(_, _, d)| *d).fold(defect, f64::max);
    Ok(AverageCaseReport {
        n,
        k: inst.k(),
        c: inst.c(),
        beta: inst.beta(),
        m,
        ensemble,
        n_spike_samples,
        threshold_exponent: exponent,
        threshold: thr,
        projector_matches_goodness,
        projected_mass,
        projected_mass_defect,
        mean_step_dist,
        mean_total_dist,
        std_error,
        per_step_envelope,
        guarded_step_envelope,
        envelope,
        within_envelope: mean_total_dist <= m as f64 * envelope + 3.0 * std_error,
        max_norm_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block2_exp, opnorm_diff_exp};
    use crate::local_case::{sample_local_instance, SupportDegree};
    use crate::pauli::{pauli_matrix, PauliString};
    use crate::worst_case::build_worst_instance;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense QR of a Gaussian matrix by modified Gram–Schmidt; `R` has a
    /// positive diagonal, so `Q` is the phase-normalized factor.
    fn qr_haar(dim: usize, rng: &mut Rng) -> CMatrix {
        let mut cols: Vec<Vec<Complex64>> = (0..dim).map(|_| (0..dim).map(|_| complex_gaussian(rng)).collect()).collect();
        for j in 0..dim {
            for i in 0..j {
                let p = inner(&cols[i], &cols[j]);
                let ci = cols[i].clone();
                cols[j].iter_mut().zip(&ci).for_each(|(a, b)| *a -= b * p);
            }
            let nj = norm(&cols[j]);
            cols[j].iter_mut().for_each(|a| *a /= nj);
        }
        CMatrix::from_fn(dim, dim, |r, col| cols[col][r])
    }

    #[test]
    fn haar_is_unitary() {
        for dim in [1, 2, 7, 64] {
            let u = HaarUnitary::sample(dim, &mut seeding::rng(dim as u64)).unwrap().to_matrix();
            assert!(u.unitarity_defect() < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn haar_moments_match_qr_sampler() {
        let dim = 4;
        let trials = 20_000;
        let mut rng = seeding::rng(31);
        let (mut m2, mut m4, mut q2, mut q4, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..trials {
            let u = HaarUnitary::sample(dim, &mut rng).unwrap().to_matrix();
            let q = qr_haar(dim, &mut rng);
            let a = u[(1, 2)].norm_sqr();
            let b = q[(1, 2)].norm_sqr();
            m2 += a;
            m4 += a * a;
            q2 += b;
            q4 += b * b;
            cross += (u[(0, 0)] * u[(1, 1)] * u[(0, 1)].conj() * u[(1, 0)].conj()).re;
        }
        let t = trials as f64;
        let d = dim as f64;
        // E|U_ij|^2 = 1/d, E|U_ij|^4 = 2/(d(d+1)), E[U00 U11 conj(U01 U10)] = -1/(d(d^2-1)).
        for (got, want, tol) in [
            (m2 / t, 1.0 / d, 0.01),
            (q2 / t, 1.0 / d, 0.01),
            (m4 / t, 2.0 / (d * (d + 1.0)), 0.01),
            (q4 / t, 2.0 / (d * (d + 1.0)), 0.01),
            (cross / t, -1.0 / (d * (d * d - 1.0)), 0.005),
        ] {
            assert!((got - want).abs() < tol, "{got} vs {want}");
        }
    }

    #[test]
    fn conjugate_haar_matches_conjugate_matrix() {
        let h = HaarUnitary::sample(8, &mut seeding::rng(2)).unwrap();
        let a = h.conj().to_matrix();
        let b = h.to_matrix().conj();
        assert!((&a - &b).max_abs() < 1e-14);
    }

    #[test]
    fn kick_is_unitary_and_geodesic() {
        let dim = 16;
        let mut rng = seeding::rng(1);
        let mut u: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(&mut rng)).collect();
        let nu = norm(&u);
        u.iter_mut().for_each(|a| *a /= nu);
        let a = Control::identity().then_kick(u.clone(), 0.4).unwrap();
        let b = a.then_kick(u.clone(), 0.6).unwrap();
        let one = Control::identity().then_kick(u, 1.0).unwrap();
        let mut p = ket0(dim);
        p[3] = c(0.0, 1.0);
        let s = norm(&p);
        p.iter_mut().for_each(|x| *x /= s);
        let (mut x, mut y) = (p.clone(), p.clone());
        b.apply(&mut x);
        one.apply(&mut y);
        assert!(distance(&x, &y) < 1e-14);
        assert!((norm(&x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn explicit_controls_are_checked() {
        assert!(Control::explicit(CMatrix::identity(4).scale(c(2.0, 0.0))).is_err());
        let h = HaarUnitary::sample(4, &mut seeding::rng(0)).unwrap().to_matrix();
        assert!(Control::explicit(h).is_ok());
    }

    #[test]
    fn optimal_advantage_examples() {
        let a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let b = vec![c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(optimal_advantage(&a, &a).unwrap().helstrom, 0.0);
        assert!((optimal_advantage(&a, &b).unwrap().helstrom - 0.5).abs() < 1e-15);
        let v = vec![c(0.8, 0.0), c(0.6, 0.0)];
        let adv = optimal_advantage(&a, &v).unwrap();
        assert!((adv.helstrom - 0.3).abs() < 1e-15);
        assert!(adv.helstrom <= adv.euclidean + 1e-12);
        assert!(optimal_advantage(&a, &[c(1.0, 1.0), c(0.0, 0.0)]).is_err());
    }

    fn worst(n: usize, beta: f64) -> WorstCaseInstance {
        build_worst_instance(n, 0.1, beta, 5).unwrap()
    }

    #[test]
    fn equal_hamiltonians_or_zero_times_give_zero() {
        let inst = worst(6, 1.0);
        let (h0, h1) = worst_case_pair(&inst);
        let s = RoundSchedule::haar(64, &[0.3, 1.0, 2.0], 4).unwrap();
        let same = run_game(&h0, &h0, &s).unwrap();
        assert_eq!(same.total_dist, 0.0);
        let zero = RoundSchedule::haar(64, &[0.0; 3], 4).unwrap();
        let tr = run_game(&h0, &h1, &zero).unwrap();
        assert!(tr.total_dist < 1e-15 && tr.per_step_dist.iter().all(|&d| d < 1e-15));
    }

    #[test]
    fn single_round_matches_block_closed_form() {
        let inst = worst(5, 1.5);
        let (h0, h1) = worst_case_pair(&inst);
        let t = 0.37;
        let tr = run_game(&h0, &h1, &RoundSchedule::identity(&[t]).unwrap()).unwrap();
        let g = &inst.diagonal().g;
        let top = 1 << 4;
        let u = block2_exp(g[0], g[top], 1.5, t);
        let e0 = Complex64::new(0.0, -g[0] * t).exp();
        let want = ((e0 - u[0][0]).norm_sqr() + u[1][0].norm_sqr()).sqrt();
        assert!((tr.total_dist - want).abs() < 1e-13);
    }

    #[test]
    fn hybrid_chain_and_domination_hold() {
        let inst = worst(6, 2.0);
        let (h0, h1) = worst_case_pair(&inst);
        let local = sample_local_instance(6, 3, 2, 0.7, SupportDegree::ExactlyK, 3).unwrap();
        let (l0, l1) = local_pair(&local, 0b010010);
        let mut rng = seeding::rng(8);
        for trial in 0..10 {
            let m = rng.random_range(1..=8);
            let times: Vec<f64> = (0..m).map(|_| 4.0 * rng.random::<f64>()).collect();
            let s = RoundSchedule::haar(64, &times, trial).unwrap();
            for (a, b) in [(&h0, &h1), (&l0, &l1)] {
                let tr = run_game(a, b, &s).unwrap();
                assert!(tr.hybrid_chain_ok && tr.step_domination_ok);
                assert!(tr.max_norm_defect < NORM_TOL);
                let fast = run_game_fast(a, b, &s).unwrap();
                assert!((fast.total_dist - tr.total_dist).abs() < 1e-12);
                for (x, y) in fast.per_step_dist.iter().zip(&tr.per_step_dist) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn block_step_bound_matches_dense_norm() {
        let inst = worst(5, 1.0);
        let (h0, h1) = worst_case_pair(&inst);
        let delta = pauli_matrix(&inst.spike()).unwrap().scale(1.0);
        let dense0 = Hamiltonian::dense(HermitianMatrix::from_real_diagonal(&inst.diagonal().g)).unwrap();
        for t in [0.1, 1.0, 5.0] {
            let block = step_operator_bound(&h0, &h1, t).unwrap();
            let dense = opnorm_diff_exp(&inst.diagonal().g, &delta, t).unwrap();
            let generic = step_operator_bound(&dense0, &h1, t).unwrap();
            assert!((block - dense).abs() < 1e-9 && (block - generic).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_hamiltonian_matches_block_evolution() {
        let local = sample_local_instance(5, 3, 2, 0.9, SupportDegree::UpToK, 1).unwrap();
        let spike = PauliString::x_s(5, 0b00110).unwrap();
        let (l0, l1) = local_pair(&local, 0b00110);
        let dense1 = Hamiltonian::dense(local.spiked_alpha(&spike).unwrap().dense_matrix().unwrap()).unwrap();
        let s = RoundSchedule::haar(32, &[0.5, 2.5, 1.0], 9).unwrap();
        let a = run_game(&l0, &l1, &s).unwrap();
        let b = run_game(&l0, &dense1, &s).unwrap();
        assert!(distance(&a.final_state_spiked, &b.final_state_spiked) < 1e-10);
    }

    #[test]
    fn time_reversal_conjugates_the_transcript() {
        let inst = worst(6, 1.0);
        let (h0, h1) = worst_case_pair(&inst);
        let s = RoundSchedule::haar(64, &[0.5, 3.0, 1.2, 0.1], 12).unwrap();
        assert!(RoundSchedule::new(vec![Round { control: Control::identity(), t: -1.0 }], false).is_err());
        let fwd = run_game(&h0, &h1, &s).unwrap();
        let rev = run_game(&h0, &h1, &s.reversed_conjugate()).unwrap();
        assert!(rev.time_reversal);
        assert!((fwd.total_dist - rev.total_dist).abs() < 1e-12);
        for (x, y) in fwd.per_step_dist.iter().zip(&rev.per_step_dist) {
            assert!((x - y).abs() < 1e-12);
        }
        for (a, b) in fwd.final_state_spiked.iter().zip(&rev.final_state_spiked) {
            assert!((a.conj() - b).norm() < 1e-12);
        }
    }

    #[test]
    fn search_with_zero_beta_returns_zero() {
        let inst = worst(6, 0.0);
        let (h0, h1) = worst_case_pair(&inst);
        let cfg = SearchConfig {
            restarts: 3,
            iterations: 5,
            ..SearchConfig::default()
        };
        let (_, r) = adversarial_schedule_search(&h0, &h1, 2, &cfg, 1, None).unwrap();
        assert!(r.best.total_dist < 1e-14);
    }

    #[test]
    fn nested_search_is_monotone_and_dominated() {
        let inst = worst(6, 1.0);
        let (h0, h1) = worst_case_pair(&inst);
        let cfg = SearchConfig {
            restarts: 4,
            iterations: 15,
            t_min: 1e-2,
            t_max: 1e2,
            ..SearchConfig::default()
        };
        let res = nested_search(&h0, &h1, &[1, 2, 3], &cfg, 7).unwrap();
        for w in res.windows(2) {
            assert!(w[1].best.total_dist >= w[0].best.total_dist - 1e-12);
        }
        assert!(res.iter().all(|r| r.dominated && r.best.hybrid_chain_ok));
    }

    #[test]
    fn average_case_projector_and_envelope() {
        let inst = sample_local_instance(8, 3, 2, 0.5, SupportDegree::ExactlyK, 2).unwrap();
        let s = RoundSchedule::haar(256, &[0.5, 1.0, 2.0, 0.25], 3).unwrap();
        let rep = average_case_game(&inst, SpikeEnsemble::UniformExactlyC, &s, 40, 6).unwrap();
        assert_eq!(rep.projector_matches_goodness, Some(true));
        assert!(rep.projected_mass_defect < 1e-12);
        assert!(rep.within_envelope);
        assert!(rep.max_norm_defect < NORM_TOL);
        let zero = LocalInstance::with_alpha(8, 3, 2, 0.5, crate::pauli::CoeffVector::new(8).unwrap()).unwrap();
        let rep = average_case_game(&zero, SpikeEnsemble::UniformExactlyC, &s, 10, 6).unwrap();
        // all gaps vanish: every state is inside V
        assert!(rep.projected_mass.iter().all(|&q| (q - 1.0).abs() < 1e-12));
    }
}
