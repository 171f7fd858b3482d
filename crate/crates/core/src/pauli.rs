//! Pauli strings as `(x_mask, z_mask)` pairs, sparse coefficient vectors, and
//! the diagonal Hamiltonian of a Z-supported coefficient vector.
//!
//! A string with masks `(x, z)` is the operator `i^{|x & z|} X^x Z^z`, which
//! puts `Y = i X Z` on every qubit where both bits are set. On basis states
//! `P|b> = i^{|x & z|} (-1)^{|z & b|} |b ^ x>`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::fwht_in_place;
use crate::linalg::{CMatrix, HermitianMatrix};

pub const MAX_QUBITS: usize = 24;
/// Largest `n` for which a dense `2^n x 2^n` matrix is built.
pub const MAX_DENSE_QUBITS: usize = 10;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubit count",
            got: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x_mask: u32,
    z_mask: u32,
}

impl PauliString {
    pub fn new(n: usize, x_mask: u32, z_mask: u32) -> Result<Self> {
        check_qubits(n)?;
        if (x_mask | z_mask) & !full_mask(n) != 0 {
            return Err(invalid(format!(
                "masks x={x_mask:#b} z={z_mask:#b} do not fit in {n} qubits"
            )));
        }
        Ok(Self { n, x_mask, z_mask })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, 0, 0)
    }

    /// `Z_S` for the subset with bitmask `s`.
    pub fn z_s(n: usize, s: u32) -> Result<Self> {
        Self::new(n, 0, s)
    }

    /// `X_S` for the subset with bitmask `s`.
    pub fn x_s(n: usize, s: u32) -> Result<Self> {
        Self::new(n, s, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u32 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u32 {
        self.z_mask
    }

    pub fn support(&self) -> u32 {
        self.x_mask | self.z_mask
    }

    pub fn locality(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_diagonal(&self) -> bool {
        self.x_mask == 0
    }

    /// Number of `Y` factors; the string carries the phase `i^y_count`.
    fn y_count(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    /// `self * other = i^phase * product`, with `phase` in `0..4`.
    pub fn multiply(&self, other: &PauliString) -> Result<(u8, PauliString)> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let product = PauliString {
            n: self.n,
            x_mask: self.x_mask ^ other.x_mask,
            z_mask: self.z_mask ^ other.z_mask,
        };
        // Z^{z1} X^{x2} = (-1)^{|z1 & x2|} X^{x2} Z^{z1}
        let swaps = (self.z_mask & other.x_mask).count_ones();
        let phase = self.y_count() as i64 + other.y_count() as i64 - product.y_count() as i64
            + 2 * swaps as i64;
        Ok((phase.rem_euclid(4) as u8, product))
    }

    pub fn commutes(&self, other: &PauliString) -> bool {
        let form = (self.x_mask & other.z_mask).count_ones() + (self.z_mask & other.x_mask).count_ones();
        form.is_multiple_of(2)
    }

    /// Column `b` of the matrix: the image basis index and its amplitude.
    pub fn apply_basis(&self, b: usize) -> (usize, Complex64) {
        let sign = if (self.z_mask & b as u32).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let amp = i_pow(self.y_count() as u8) * sign;
        (b ^ self.x_mask as usize, amp)
    }
}

pub(crate) fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Dense `2^n x 2^n` matrix of a Pauli string.
pub fn pauli_matrix(p: &PauliString) -> Result<HermitianMatrix> {
    if p.n > MAX_DENSE_QUBITS {
        return Err(Error::DimensionGuard {
            what: "qubits for a dense Pauli matrix",
            got: p.n,
            limit: MAX_DENSE_QUBITS,
        });
    }
    let dim = 1usize << p.n;
    let mut m = CMatrix::zeros(dim, dim);
    for b in 0..dim {
        let (r, amp) = p.apply_basis(b);
        m[(r, b)] = amp;
    }
    HermitianMatrix::new(m)
}

/// Index of `x . y_T`: flips the signs of the coordinates in `T`.
pub fn apply_y_flip(x: usize, t: u32) -> usize {
    x ^ t as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportDescriptor {
    ZOnly,
    /// Every term acts on at most this many qubits, and some term on fewer than all.
    KLocal(usize),
    General,
}

/// Sparse real coefficients `alpha_P`; exact zeros are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVector {
    n: usize,
    entries: BTreeMap<PauliString, f64>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    x_mask: u32,
    z_mask: u32,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct CoeffRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

impl CoeffVector {
    pub fn new(n: usize) -> Result<Self> {
        check_qubits(n)?;
        Ok(Self {
            n,
            entries: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, p: PauliString, coeff: f64) -> Result<()> {
        if p.n != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: p.n,
            });
        }
        if !coeff.is_finite() {
            return Err(invalid("coefficients must be finite"));
        }
        if coeff == 0.0 {
            self.entries.remove(&p);
        } else {
            self.entries.insert(p, coeff);
        }
        Ok(())
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.entries.get(p).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &f64)> {
        self.entries.iter()
    }

    /// Coefficients `alpha_{Z_S} = table[S]` for every subset mask `S`.
    pub fn from_z_table(n: usize, table: &[f64]) -> Result<Self> {
        check_qubits(n)?;
        if table.len() != 1 << n {
            return Err(Error::SizeMismatch {
                expected: 1 << n,
                got: table.len(),
            });
        }
        let mut v = Self::new(n)?;
        for (s, &c) in table.iter().enumerate() {
            v.set(PauliString::z_s(n, s as u32)?, c)?;
        }
        Ok(v)
    }

    pub fn support_descriptor(&self) -> SupportDescriptor {
        if self.entries.keys().all(PauliString::is_diagonal) {
            return SupportDescriptor::ZOnly;
        }
        let k = self.entries.keys().map(PauliString::locality).max().unwrap_or(0);
        if k < self.n {
            SupportDescriptor::KLocal(k)
        } else {
            SupportDescriptor::General
        }
    }

    pub fn linf(&self) -> f64 {
        self.entries.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn l1(&self) -> f64 {
        self.entries.values().map(|c| c.abs()).sum()
    }

    /// `|alpha_P| <= 1` for every `P` other than `spike`.
    pub fn is_bounded_except(&self, spike: Option<&PauliString>) -> bool {
        self.entries
            .iter()
            .filter(|(p, _)| Some(*p) != spike)
            .all(|(_, c)| c.abs() <= 1.0)
    }

    pub fn add_scaled(&self, other: &CoeffVector, s: f64) -> Result<CoeffVector> {
        if other.n != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut out = self.clone();
        for (p, c) in &other.entries {
            out.set(*p, out.get(p) + s * c)?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = CoeffRepr {
            n: self.n,
            terms: self
                .entries
                .iter()
                .map(|(p, &coeff)| TermRepr {
                    x_mask: p.x_mask,
                    z_mask: p.z_mask,
                    coeff,
                })
                .collect(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: CoeffRepr = serde_json::from_str(s)?;
        let mut v = Self::new(repr.n)?;
        for t in repr.terms {
            let p = PauliString::new(repr.n, t.x_mask, t.z_mask)?;
            if v.entries.contains_key(&p) {
                return Err(Error::Format(format!(
                    "duplicate term x_mask={} z_mask={}",
                    t.x_mask, t.z_mask
                )));
            }
            v.set(p, t.coeff)?;
        }
        Ok(v)
    }

    /// Dense `M(alpha) = sum_P alpha_P P`.
    pub fn dense_matrix(&self) -> Result<HermitianMatrix> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::DimensionGuard {
                what: "qubits for a dense Hamiltonian",
                got: self.n,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let mut m = CMatrix::zeros(dim, dim);
        for (p, &c) in &self.entries {
            for b in 0..dim {
                let (r, amp) = p.apply_basis(b);
                m[(r, b)] += amp * c;
            }
        }
        HermitianMatrix::new(m)
    }
}

/// Diagonal `g_x = <x| M(alpha) |x>` of a Z-supported Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalHamiltonian {
    pub n: usize,
    pub g: Vec<f64>,
}

impl DiagonalHamiltonian {
    pub fn max_abs(&self) -> f64 {
        self.g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `g_x = sum_S alpha_{Z_S} chi_S(x)` by one unnormalized Walsh–Hadamard pass.
pub fn build_diagonal(alpha: &CoeffVector) -> Result<DiagonalHamiltonian> {
    if alpha.support_descriptor() != SupportDescriptor::ZOnly {
        return Err(Error::Support("build_diagonal needs Z-only coefficients".into()));
    }
    let mut g = vec![0.0; 1usize << alpha.n];
    for (p, &c) in &alpha.entries {
        g[p.z_mask as usize] = c;
    }
    fwht_in_place(&mut g);
    Ok(DiagonalHamiltonian { n: alpha.n, g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(x: u32, z: u32) -> CMatrix {
        pauli_matrix(&PauliString::new(1, x, z).unwrap()).unwrap().into_matrix()
    }

    #[test]
    fn single_qubit_matrices() {
        let z = single(0, 1);
        assert_eq!(z, CMatrix::from_real_diagonal(&[1.0, -1.0]));
        let x = single(1, 0);
        assert_eq!(x[(0, 1)], c(1.0, 0.0));
        assert_eq!(x[(1, 0)], c(1.0, 0.0));
        assert_eq!(x[(0, 0)], c(0.0, 0.0));
        let y = single(1, 1);
        assert_eq!(y[(0, 1)], c(0.0, -1.0));
        assert_eq!(y[(1, 0)], c(0.0, 1.0));
        // Y = i X Z
        assert_eq!(y, (&x * &z).scale(c(0.0, 1.0)));
    }

    #[test]
    fn two_qubit_kronecker_order() {
        // Z on qubit 1 and X on qubit 0; the higher qubit is the left factor.
        let p = PauliString::new(2, 0b01, 0b10).unwrap();
        let want = single(0, 1).kron(&single(1, 0));
        assert_eq!(pauli_matrix(&p).unwrap().into_matrix(), want);
    }

    #[test]
    fn squares_to_identity() {
        for x in 0..8 {
            for z in 0..8 {
                let m = pauli_matrix(&PauliString::new(3, x, z).unwrap()).unwrap().into_matrix();
                assert_eq!(&m * &m, CMatrix::identity(8));
            }
        }
    }

    #[test]
    fn products_match_dense_for_three_qubits() {
        for x1 in 0..8 {
            for z1 in 0..8 {
                let p = PauliString::new(3, x1, z1).unwrap();
                let mp = pauli_matrix(&p).unwrap().into_matrix();
                for x2 in 0..8 {
                    for z2 in 0..8 {
                        let q = PauliString::new(3, x2, z2).unwrap();
                        let mq = pauli_matrix(&q).unwrap().into_matrix();
                        let (phase, r) = p.multiply(&q).unwrap();
                        let want = pauli_matrix(&r).unwrap().into_matrix().scale(i_pow(phase));
                        assert_eq!(&mp * &mq, want);
                        let commute = &mp * &mq == &mq * &mp;
                        assert_eq!(p.commutes(&q), commute);
                    }
                }
            }
        }
    }

    #[test]
    fn mask_and_dimension_guards() {
        assert!(PauliString::new(2, 0b100, 0).is_err());
        assert!(PauliString::new(0, 0, 0).is_err());
        assert!(PauliString::new(25, 0, 0).is_err());
        let big = PauliString::z_s(11, 1).unwrap();
        assert!(matches!(pauli_matrix(&big), Err(Error::DimensionGuard { .. })));
    }

    #[test]
    fn locality_and_descriptor() {
        let p = PauliString::new(4, 0b0011, 0b0110).unwrap();
        assert_eq!(p.locality(), 3);
        let mut v = CoeffVector::new(4).unwrap();
        v.set(PauliString::z_s(4, 0b0011).unwrap(), 0.5).unwrap();
        assert_eq!(v.support_descriptor(), SupportDescriptor::ZOnly);
        v.set(p, -2.0).unwrap();
        assert_eq!(v.support_descriptor(), SupportDescriptor::KLocal(3));
        assert_eq!(v.linf(), 2.0);
        assert!(!v.is_bounded_except(None));
        assert!(v.is_bounded_except(Some(&p)));
        v.set(PauliString::x_s(4, 0b1111).unwrap(), 0.1).unwrap();
        assert_eq!(v.support_descriptor(), SupportDescriptor::General);
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let mut rng = seeding::rng(3);
        let mut v = CoeffVector::new(5).unwrap();
        for _ in 0..20 {
            let p = PauliString::new(5, rng.random_range(0..32), rng.random_range(0..32)).unwrap();
            v.set(p, rng.random_range(-1.0..1.0)).unwrap();
        }
        v.set(PauliString::z_s(5, 3).unwrap(), 1e-300).unwrap();
        v.set(PauliString::z_s(5, 4).unwrap(), -0.1).unwrap();
        let s = v.to_json().unwrap();
        let back = CoeffVector::from_json(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn json_rejects_bad_masks_and_duplicates() {
        assert!(CoeffVector::from_json(r#"{"n":2,"terms":[{"x_mask":4,"z_mask":0,"coeff":1.0}]}"#).is_err());
        let dup = r#"{"n":2,"terms":[{"x_mask":1,"z_mask":0,"coeff":1.0},{"x_mask":1,"z_mask":0,"coeff":2.0}]}"#;
        assert!(matches!(CoeffVector::from_json(dup), Err(Error::Format(_))));
    }

    #[test]
    fn diagonal_examples() {
        let mut v = CoeffVector::new(3).unwrap();
        v.set(PauliString::identity(3).unwrap(), 3.0).unwrap();
        assert!(build_diagonal(&v).unwrap().g.iter().all(|&g| g == 3.0));

        let mut v = CoeffVector::new(1).unwrap();
        v.set(PauliString::z_s(1, 1).unwrap(), 1.0).unwrap();
        assert_eq!(build_diagonal(&v).unwrap().g, vec![1.0, -1.0]);

        let mut v = CoeffVector::new(2).unwrap();
        v.set(PauliString::x_s(2, 1).unwrap(), 1.0).unwrap();
        assert!(matches!(build_diagonal(&v), Err(Error::Support(_))));
    }

    #[test]
    fn diagonal_matches_term_by_term_and_dense() {
        let mut rng = seeding::rng(17);
        let table: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = CoeffVector::from_z_table(3, &table).unwrap();
        let g = build_diagonal(&v).unwrap().g;
        for b in 0..8usize {
            let direct: f64 = (0..8usize)
                .map(|s| {
                    let chi = if (s & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    table[s] * chi
                })
                .sum();
            assert!((g[b] - direct).abs() < 1e-14);
        }
        let dense = v.dense_matrix().unwrap();
        for b in 0..8 {
            assert!((dense[(b, b)].re - g[b]).abs() < 1e-14);
        }
    }

    #[test]
    fn y_flip_examples() {
        assert_eq!(apply_y_flip(0, 0b1), 0b1);
        assert_eq!(apply_y_flip(0b1011, 0), 0b1011);
        let mut rng = seeding::rng(1);
        for _ in 0..1000 {
            let x: usize = rng.random_range(0..1 << 20);
            let t: u32 = rng.random_range(0..1 << 20);
            assert_eq!(apply_y_flip(apply_y_flip(x, t), t), x);
        }
    }

    fn z_table(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 1 << n)
    }

    proptest! {
        #[test]
        fn build_diagonal_is_linear(a in z_table(6), b in z_table(6), s in -3.0f64..3.0) {
            let va = CoeffVector::from_z_table(6, &a).unwrap();
            let vb = CoeffVector::from_z_table(6, &b).unwrap();
            let ga = build_diagonal(&va).unwrap().g;
            let gb = build_diagonal(&vb).unwrap().g;
            let gs = build_diagonal(&va.add_scaled(&vb, s).unwrap()).unwrap().g;
            for j in 0..ga.len() {
                prop_assert!((gs[j] - (ga[j] + s * gb[j])).abs() <= 1e-12);
            }
        }

        #[test]
        fn diagonal_obeys_triangle_inequality(a in z_table(7)) {
            let v = CoeffVector::from_z_table(7, &a).unwrap();
            let g = build_diagonal(&v).unwrap();
            prop_assert!(g.max_abs() <= v.l1());
        }

        #[test]
        fn product_phase_squares_consistently(x1 in 0u32..64, z1 in 0u32..64, x2 in 0u32..64, z2 in 0u32..64) {
            let p = PauliString::new(6, x1, z1).unwrap();
            let q = PauliString::new(6, x2, z2).unwrap();
            let (a, pq) = p.multiply(&q).unwrap();
            let (b, qp) = q.multiply(&p).unwrap();
            prop_assert_eq!(pq, qp);
            // PQ = +-QP, with + exactly when they commute.
            let diff = (a as i32 - b as i32).rem_euclid(4);
            prop_assert_eq!(diff == 0, p.commutes(&q));
            prop_assert!(diff == 0 || diff == 2);
        }
    }
}
