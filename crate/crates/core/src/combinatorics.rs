//! Exact counting behind the covariance bound: `z_t`, the alternating sums
//! `sum_t (-1)^{r-t} C(r,t) z_t`, and their closed forms.
//!
//! `z_t = #{S : |S| = k, |S ∩ A| and |S ∩ B| both odd}` for `|A| = |B| = c`,
//! `|A ∩ B| = t`. Everything here is integer or rational arithmetic.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::subsets::k_subsets;

/// Largest `C(n, k)` the enumeration method will walk.
pub const MAX_ENUMERATION: u64 = 10_000_000;
pub const MAX_PARTITION_N: usize = 1000;

/// Pascal's triangle up to row `max_n`.
#[derive(Clone, Debug)]
pub struct BinomTable {
    rows: Vec<Vec<BigUint>>,
}

impl BinomTable {
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        rows.push(vec![BigUint::one()]);
        for a in 1..=max_n {
            let prev = &rows[a - 1];
            let mut row = Vec::with_capacity(a + 1);
            row.push(BigUint::one());
            for b in 1..a {
                row.push(&prev[b - 1] + &prev[b]);
            }
            row.push(BigUint::one());
            rows.push(row);
        }
        Self { rows }
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// `C(a, b)`, zero when `b > a`. Panics if `a` exceeds the table.
    pub fn get(&self, a: usize, b: usize) -> BigUint {
        if b > a {
            BigUint::zero()
        } else {
            self.rows[a][b].clone()
        }
    }

    pub fn signed(&self, a: usize, b: usize) -> BigInt {
        BigInt::from(self.get(a, b))
    }

    /// `[(1 - x)^minus (1 + x)^plus]_{x^k}`.
    pub fn poly_coeff(&self, minus: usize, plus: usize, k: usize) -> BigInt {
        (0..=k.min(minus))
            .map(|s| {
                let term = self.signed(minus, s) * self.signed(plus, k - s);
                if s % 2 == 0 {
                    term
                } else {
                    -term
                }
            })
            .sum()
    }

    fn ensure(&self, n: usize) -> Result<()> {
        if n > self.max_n() {
            return Err(Error::DimensionGuard {
                what: "binomial table row",
                got: n,
                limit: self.max_n(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZtQuery {
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub t: usize,
}

impl ZtQuery {
    pub fn new(n: usize, k: usize, c: usize, t: usize) -> Result<Self> {
        if t > c || c > n || k > n || 2 * c - t > n {
            return Err(invalid(format!(
                "z_t query needs t <= c, k <= n and 2c - t <= n (n={n}, k={k}, c={c}, t={t})"
            )));
        }
        Ok(Self { n, k, c, t })
    }

    /// `A = {0..c}` and `B = {c-t..2c-t}`, so `|A ∩ B| = t`.
    pub fn sets(&self) -> (u64, u64) {
        let a = (1u64 << self.c) - 1;
        let b = ((1u64 << self.c) - 1) << (self.c - self.t);
        (a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZMethod {
    Enumerate,
    PartitionSum,
}

pub fn z_count(q: &ZtQuery, method: ZMethod, table: &BinomTable) -> Result<BigUint> {
    match method {
        ZMethod::Enumerate => z_enumerate(q, table),
        ZMethod::PartitionSum => z_partition_sum(q, table),
    }
}

fn z_enumerate(q: &ZtQuery, table: &BinomTable) -> Result<BigUint> {
    table.ensure(q.n)?;
    let total = table.get(q.n, q.k).to_u64().unwrap_or(u64::MAX);
    if q.n > 63 || total > MAX_ENUMERATION {
        return Err(Error::DimensionGuard {
            what: "subsets to enumerate",
            got: total.min(usize::MAX as u64) as usize,
            limit: MAX_ENUMERATION as usize,
        });
    }
    let (a, b) = q.sets();
    let count = k_subsets(q.n, q.k)
        .into_iter()
        .filter(|s| (s & a).count_ones() % 2 == 1 && (s & b).count_ones() % 2 == 1)
        .count();
    Ok(BigUint::from(count))
}

fn z_partition_sum(q: &ZtQuery, table: &BinomTable) -> Result<BigUint> {
    if q.n > MAX_PARTITION_N {
        return Err(Error::DimensionGuard {
            what: "n for the partition sum",
            got: q.n,
            limit: MAX_PARTITION_N,
        });
    }
    table.ensure(q.n)?;
    let (t, ct, rest) = (q.t, q.c - q.t, q.n + q.t - 2 * q.c);
    let mut sum = BigUint::zero();
    for i in 0..=t.min(q.k) {
        for p in 0..=ct.min(q.k - i) {
            if (i + p) % 2 == 0 {
                continue;
            }
            for qq in 0..=ct.min(q.k - i - p) {
                if (i + qq) % 2 == 0 {
                    continue;
                }
                let r = q.k - i - p - qq;
                sum += table.get(t, i) * table.get(ct, p) * table.get(ct, qq) * table.get(rest, r);
            }
        }
    }
    Ok(sum)
}

/// `sum_{r=t}^{l} (-1)^{r-t} C(r,t) C(l,r)`.
pub fn simple_sum(l: usize, t: usize, table: &BinomTable) -> BigInt {
    (t..=l)
        .map(|r| {
            let term = table.signed(r, t) * table.signed(l, r);
            if (r - t).is_multiple_of(2) {
                term
            } else {
                -term
            }
        })
        .sum()
}

/// The sum equals `1{l = t}`.
pub fn verify_simple_identity(l: usize, t: usize, table: &BinomTable) -> Result<bool> {
    if t > l {
        return Err(invalid(format!("need t <= l, got t={t}, l={l}")));
    }
    table.ensure(l)?;
    let want = if l == t { BigInt::one() } else { BigInt::zero() };
    Ok(simple_sum(l, t, table) == want)
}

fn check_identity_ranges(n: usize, k: usize, c: usize, r: usize) -> Result<()> {
    if r > c || 2 * c > n || k > n || k < r {
        return Err(invalid(format!(
            "identity needs r <= c, 2c <= n and r <= k <= n (n={n}, k={k}, c={c}, r={r})"
        )));
    }
    Ok(())
}

/// `sum_{t=0}^{r} (-1)^{r-t} C(r,t) z_t`.
pub fn alternating_z_sum(
    n: usize,
    k: usize,
    c: usize,
    r: usize,
    method: ZMethod,
    table: &BinomTable,
) -> Result<BigInt> {
    check_identity_ranges(n, k, c, r)?;
    let mut acc = BigInt::zero();
    for t in 0..=r {
        let z = BigInt::from(z_count(&ZtQuery::new(n, k, c, t)?, method, table)?);
        let term = table.signed(r, t) * z;
        if (r - t).is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(acc)
}

/// `4^{r-1} sum_s (-1)^s C(2c-2r, s) C(n-2c, k-r-s)`, a quarter-integer at `r = 0`.
pub fn complex_rhs(n: usize, k: usize, c: usize, r: usize, table: &BinomTable) -> Result<BigRational> {
    check_identity_ranges(n, k, c, r)?;
    table.ensure(n)?;
    let inner = table.poly_coeff(2 * c - 2 * r, n - 2 * c, k - r);
    Ok(pow4(r as i64 - 1) * BigRational::from_integer(inner))
}

fn pow4(e: i64) -> BigRational {
    let base = BigRational::from_integer(BigInt::from(4));
    if e >= 0 {
        num_traits::pow(base, e as usize)
    } else {
        num_traits::pow(base.recip(), (-e) as usize)
    }
}

/// The closed form with the terms that only cancel for `r >= 1` restored:
/// adds `(1/4)([(1+x)^n]_k - 2[(1-x)^c (1+x)^{n-c}]_k)` at `r = 0`.
pub fn corrected_rhs(n: usize, k: usize, c: usize, r: usize, table: &BinomTable) -> Result<BigRational> {
    let mut rhs = complex_rhs(n, k, c, r, table)?;
    if r == 0 {
        let extra = table.poly_coeff(0, n, k) - BigInt::from(2) * table.poly_coeff(c, n - c, k);
        rhs += BigRational::new(extra, BigInt::from(4));
    }
    Ok(rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub r: usize,
    pub method: ZMethod,
    /// Exact values rendered as `p/q` strings.
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

/// Exact comparison of the alternating sum against the closed form.
pub fn verify_complex_identity(
    n: usize,
    k: usize,
    c: usize,
    r: usize,
    method: ZMethod,
    table: &BinomTable,
) -> Result<IdentityCheck> {
    let lhs = BigRational::from_integer(alternating_z_sum(n, k, c, r, method, table)?);
    let rhs = complex_rhs(n, k, c, r, table)?;
    Ok(IdentityCheck {
        n,
        k,
        c,
        r,
        method,
        pass: lhs == rhs,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    })
}

/// `z_l = sum_r (alternating sum at r) C(l, r)` for every `l <= c`.
pub fn verify_reconstruction(n: usize, k: usize, c: usize, table: &BinomTable) -> Result<bool> {
    let coeffs = (0..=c)
        .map(|r| alternating_z_sum(n, k, c, r, ZMethod::PartitionSum, table))
        .collect::<Result<Vec<_>>>()?;
    for l in 0..=c {
        let z = BigInt::from(z_count(&ZtQuery::new(n, k, c, l)?, ZMethod::PartitionSum, table)?);
        let rebuilt: BigInt = (0..=l).map(|r| &coeffs[r] * table.signed(l, r)).sum();
        if rebuilt != z {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonnegativityRow {
    pub r: usize,
    /// The alternating sum itself, from `z_t`.
    pub alternating: String,
    /// The closed form as stated.
    pub closed_form: String,
    pub alternating_nonnegative: bool,
    pub closed_form_nonnegative: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonnegativityReport {
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub rows: Vec<NonnegativityRow>,
    pub alternating_nonnegative: bool,
    pub closed_form_nonnegative: bool,
}

/// Sign of both the alternating sums and their stated closed form for every
/// `r <= c`. Negative values are reported, not raised.
pub fn verify_alternating_nonnegativity(
    n: usize,
    k: usize,
    c: usize,
    table: &BinomTable,
) -> Result<NonnegativityReport> {
    let mut rows = Vec::with_capacity(c + 1);
    for r in 0..=c.min(k) {
        let alt = alternating_z_sum(n, k, c, r, ZMethod::PartitionSum, table)?;
        let rhs = complex_rhs(n, k, c, r, table)?;
        rows.push(NonnegativityRow {
            r,
            alternating_nonnegative: !alt.is_negative(),
            closed_form_nonnegative: !rhs.is_negative(),
            alternating: alt.to_string(),
            closed_form: rhs.to_string(),
        });
    }
    Ok(NonnegativityReport {
        n,
        k,
        c,
        alternating_nonnegative: rows.iter().all(|r| r.alternating_nonnegative),
        closed_form_nonnegative: rows.iter().all(|r| r.closed_form_nonnegative),
        rows,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimalN {
    pub k: usize,
    pub c: usize,
    /// Smallest `n0` such that every `n` in `[n0, n_max]` is nonnegative.
    pub alternating: Option<usize>,
    pub closed_form: Option<usize>,
    pub n_max: usize,
}

pub fn minimal_nonnegative_n(k: usize, c: usize, n_max: usize, table: &BinomTable) -> Result<MinimalN> {
    let lo = (2 * c).max(k);
    let (mut alt_from, mut rhs_from) = (None, None);
    let (mut alt_run, mut rhs_run) = (true, true);
    for n in (lo..=n_max).rev() {
        let rep = verify_alternating_nonnegativity(n, k, c, table)?;
        alt_run &= rep.alternating_nonnegative;
        rhs_run &= rep.closed_form_nonnegative;
        if alt_run {
            alt_from = Some(n);
        }
        if rhs_run {
            rhs_from = Some(n);
        }
        if !alt_run && !rhs_run {
            break;
        }
    }
    Ok(MinimalN {
        k,
        c,
        alternating: alt_from,
        closed_form: rhs_from,
        n_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> BinomTable {
        BinomTable::new(64)
    }

    #[test]
    fn pascal_table() {
        let t = table();
        for a in 0..=64 {
            assert_eq!(t.get(a, 0), BigUint::one());
            assert_eq!(t.get(a, a), BigUint::one());
            for b in 1..a {
                assert_eq!(t.get(a, b), t.get(a - 1, b - 1) + t.get(a - 1, b));
            }
        }
        assert_eq!(t.get(64, 32).to_string(), "1832624140942590534");
        assert_eq!(t.get(3, 5), BigUint::zero());
    }

    #[test]
    fn z_examples() {
        let t = table();
        let q = ZtQuery::new(6, 3, 2, 1).unwrap();
        assert_eq!(z_count(&q, ZMethod::Enumerate, &t).unwrap(), BigUint::from(6u32));
        assert_eq!(z_count(&q, ZMethod::PartitionSum, &t).unwrap(), BigUint::from(6u32));
        let same = ZtQuery::new(6, 0, 2, 2).unwrap();
        assert!(z_count(&same, ZMethod::Enumerate, &t).unwrap().is_zero());
        for k in 1..=5 {
            let empty = ZtQuery::new(5, k, 0, 0).unwrap();
            assert!(z_count(&empty, ZMethod::PartitionSum, &t).unwrap().is_zero());
            assert!(z_count(&empty, ZMethod::Enumerate, &t).unwrap().is_zero());
        }
    }

    #[test]
    fn z_by_hand_listing() {
        // A = {0,1}, B = {1,2} in six points; list the 3-subsets by hand.
        let (a, b) = ZtQuery::new(6, 3, 2, 1).unwrap().sets();
        assert_eq!((a, b), (0b011, 0b110));
        let hits: Vec<u64> = k_subsets(6, 3)
            .into_iter()
            .filter(|s| (s & a).count_ones() % 2 == 1 && (s & b).count_ones() % 2 == 1)
            .collect();
        // {1} plus two of {3,4,5}, or {0,2} plus one of {3,4,5}.
        assert_eq!(hits.len(), 3 + 3);
        assert!(hits.iter().all(|s| s & 0b010 != 0 || s & 0b101 == 0b101));
    }

    #[test]
    fn enumeration_matches_partition_sum() {
        let t = table();
        for n in 1..=14 {
            for k in 0..=6.min(n) {
                for c in 0..=4.min(n) {
                    for tt in 0..=c {
                        let Ok(q) = ZtQuery::new(n, k, c, tt) else { continue };
                        assert_eq!(
                            z_count(&q, ZMethod::Enumerate, &t).unwrap(),
                            z_count(&q, ZMethod::PartitionSum, &t).unwrap(),
                            "{q:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn simple_identity() {
        let t = table();
        assert_eq!(simple_sum(2, 2, &t), BigInt::one());
        assert_eq!(simple_sum(2, 1, &t), BigInt::zero());
        for l in 0..=64 {
            for tt in 0..=l {
                assert!(verify_simple_identity(l, tt, &t).unwrap(), "l={l} t={tt}");
            }
        }
        assert!(verify_simple_identity(1, 2, &t).is_err());
    }

    #[test]
    fn top_coefficient_is_the_floor() {
        let t = table();
        for (n, k, c) in [(10, 3, 2), (12, 6, 2), (14, 4, 2), (16, 9, 3)] {
            let rhs = complex_rhs(n, k, c, c, &t).unwrap();
            let floor = pow4(c as i64 - 1) * BigRational::from_integer(t.signed(n - 2 * c, k - c));
            assert_eq!(rhs, floor);
            assert!(verify_complex_identity(n, k, c, c, ZMethod::PartitionSum, &t).unwrap().pass);
        }
    }

    #[test]
    fn identity_holds_for_positive_r() {
        let t = table();
        for n in 2..=16 {
            for c in 1usize..=4 {
                for k in (3 * c).div_ceil(2)..=3 * c {
                    for r in 1..=c {
                        if 2 * c > n || k > n {
                            continue;
                        }
                        for m in [ZMethod::Enumerate, ZMethod::PartitionSum] {
                            let chk = verify_complex_identity(n, k, c, r, m, &t).unwrap();
                            assert!(chk.pass, "{chk:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn r_zero_needs_the_dropped_terms() {
        let t = table();
        let chk = verify_complex_identity(6, 3, 2, 0, ZMethod::Enumerate, &t).unwrap();
        assert_eq!((chk.lhs.as_str(), chk.rhs.as_str()), ("8", "1"));
        assert!(!chk.pass);
        // With the t-independent terms kept, the closed form matches at r = 0.
        for n in 4..=16 {
            for c in 1usize..=4 {
                for k in (3 * c).div_ceil(2)..=(3 * c).min(n) {
                    if 2 * c > n {
                        continue;
                    }
                    for r in 0..=c {
                        let lhs = alternating_z_sum(n, k, c, r, ZMethod::PartitionSum, &t).unwrap();
                        let rhs = corrected_rhs(n, k, c, r, &t).unwrap();
                        assert_eq!(BigRational::from_integer(lhs), rhs, "n={n} k={k} c={c} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn reconstruction() {
        let t = table();
        for (n, k, c) in [(10, 3, 2), (12, 6, 2), (14, 4, 2), (16, 6, 4), (9, 2, 1)] {
            assert!(verify_reconstruction(n, k, c, &t).unwrap());
        }
    }

    #[test]
    fn nonnegativity_examples() {
        let t = table();
        let rep = verify_alternating_nonnegativity(12, 3, 2, &t).unwrap();
        assert!(rep.alternating_nonnegative);
        let alt: Vec<&str> = rep.rows.iter().map(|r| r.alternating.as_str()).collect();
        assert_eq!(alt, ["32", "13", "32"]);
        // stated r = 0 closed form goes negative here; r >= 1 agree
        assert_eq!(rep.rows[0].closed_form, "-3");
        assert!(rep.rows[1..].iter().all(|r| r.closed_form == r.alternating));
        let rep = verify_alternating_nonnegativity(12, 6, 2, &t).unwrap();
        assert!(!rep.alternating_nonnegative);
        assert_eq!(rep.rows[1].alternating, "-28");
        assert!(rep.rows[2].closed_form_nonnegative);
    }

    #[test]
    fn minimal_n_is_a_suffix() {
        let t = table();
        let m = minimal_nonnegative_n(6, 2, 40, &t).unwrap();
        let n0 = m.alternating.unwrap();
        assert!(n0 > 12);
        for n in n0..=40 {
            assert!(verify_alternating_nonnegativity(n, 6, 2, &t).unwrap().alternating_nonnegative);
        }
        assert!(!verify_alternating_nonnegativity(n0 - 1, 6, 2, &t).unwrap().alternating_nonnegative);
    }

    #[test]
    fn range_guards() {
        let t = table();
        assert!(ZtQuery::new(3, 2, 2, 0).is_err());
        assert!(complex_rhs(4, 2, 3, 1, &t).is_err());
        let big = BinomTable::new(40);
        let q = ZtQuery::new(40, 20, 2, 1).unwrap();
        assert!(matches!(z_count(&q, ZMethod::Enumerate, &big), Err(Error::DimensionGuard { .. })));
        assert!(z_count(&q, ZMethod::PartitionSum, &big).is_ok());
    }
}
