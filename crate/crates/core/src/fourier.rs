//! Real Boolean functions on `{+-1}^n`, their Fourier tables, and the random
//! flat-magnitude functions with small Fourier coefficients used to build the
//! worst-case instance.

use std::io::{Read, Write};

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seeding;

pub const MAX_BITS: usize = 24;
pub const RETRY_CAP: usize = 8;

const BOOLEAN_MAGIC: &[u8; 4] = b"HLBT";
const FOURIER_MAGIC: &[u8; 4] = b"HLFT";
const HARD_FUNCTION_STREAM: u32 = 0x4846;

/// Unnormalized Walsh–Hadamard butterfly: `a[S] <- sum_b a[b] (-1)^{|S & b|}`.
/// Its own inverse up to a factor `2^n`.
pub fn fwht_in_place(a: &mut [f64]) {
    let len = a.len();
    assert!(len.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < len {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (u, v) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*u, *v);
                *u = x + y;
                *v = x - y;
            }
        }
        h *= 2;
    }
}

fn check_len(n: usize, len: usize) -> Result<()> {
    if n > MAX_BITS {
        return Err(Error::DimensionGuard {
            what: "Boolean dimension",
            got: n,
            limit: MAX_BITS,
        });
    }
    if len != 1 << n {
        return Err(Error::SizeMismatch {
            expected: 1 << n,
            got: len,
        });
    }
    Ok(())
}

/// `f(x)` for every `x`, indexed by basis index (`x_q = (-1)^{b_q}`).
#[derive(Clone, Debug, PartialEq)]
pub struct BooleanTable {
    n: usize,
    values: Vec<f64>,
}

/// `f^(S)` for every subset mask `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTable {
    n: usize,
    coeffs: Vec<f64>,
}

macro_rules! table_common {
    ($ty:ident, $field:ident, $magic:expr) => {
        impl $ty {
            pub fn new(n: usize, $field: Vec<f64>) -> Result<Self> {
                check_len(n, $field.len())?;
                Ok(Self { n, $field })
            }

            pub fn n(&self) -> usize {
                self.n
            }

            pub fn $field(&self) -> &[f64] {
                &self.$field
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.$field
            }

            pub fn max_abs(&self) -> f64 {
                self.$field.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            /// Magic, `n` as little-endian `u32`, then `2^n` little-endian `f64`s.
            pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
                w.write_all($magic)?;
                w.write_all(&(self.n as u32).to_le_bytes())?;
                for v in &self.$field {
                    w.write_all(&v.to_le_bytes())?;
                }
                Ok(())
            }

            pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
                let mut magic = [0u8; 4];
                r.read_exact(&mut magic)?;
                if &magic != $magic {
                    return Err(Error::Format(format!("bad magic {magic:?}")));
                }
                let mut word = [0u8; 4];
                r.read_exact(&mut word)?;
                let n = u32::from_le_bytes(word) as usize;
                check_len(n, 1 << n.min(MAX_BITS))?;
                let mut values = Vec::with_capacity(1 << n);
                let mut buf = [0u8; 8];
                for _ in 0..1usize << n {
                    r.read_exact(&mut buf)?;
                    values.push(f64::from_le_bytes(buf));
                }
                if r.read(&mut buf)? != 0 {
                    return Err(Error::Format("trailing bytes after table".into()));
                }
                Self::new(n, values)
            }
        }
    };
}

table_common!(BooleanTable, values, BOOLEAN_MAGIC);
table_common!(FourierTable, coeffs, FOURIER_MAGIC);

/// `f^(S) = 2^{-n} sum_x f(x) chi_S(x)`.
pub fn wht_forward(f: &BooleanTable) -> FourierTable {
    let mut c = f.values.clone();
    fwht_in_place(&mut c);
    let scale = (-(f.n as f64)).exp2();
    c.iter_mut().for_each(|v| *v *= scale);
    FourierTable { n: f.n, coeffs: c }
}

/// `f(x) = sum_S f^(S) chi_S(x)`.
pub fn wht_inverse(fhat: &FourierTable) -> BooleanTable {
    let mut v = fhat.coeffs.clone();
    fwht_in_place(&mut v);
    BooleanTable { n: fhat.n, values: v }
}

/// Relative Parseval defect `|sum_S f^(S)^2 - E_x f(x)^2| / max(E_x f(x)^2, tiny)`.
pub fn parseval_defect(f: &BooleanTable, fhat: &FourierTable) -> f64 {
    let energy = f.values.iter().map(|v| v * v).sum::<f64>() / f.values.len() as f64;
    let spectral: f64 = fhat.coeffs.iter().map(|v| v * v).sum();
    (spectral - energy).abs() / energy.max(f64::MIN_POSITIVE)
}

/// `g(x) = f(x_{-top}) (1 + x_top)` with the new top bit `n`: `2 f` where that
/// bit is 0 and `0` where it is 1.
pub fn lift_to_g(f: &BooleanTable) -> Result<BooleanTable> {
    let n = f.n + 1;
    check_len(n, 2 * f.values.len())?;
    let mut values = Vec::with_capacity(1 << n);
    values.extend(f.values.iter().map(|v| 2.0 * v));
    values.extend(std::iter::repeat_n(0.0, f.values.len()));
    Ok(BooleanTable { n, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardFunctionStrategy {
    /// Independent uniform signs; resample until every coefficient is at most 1.
    Iid,
    /// Random Maiorana–McFarland function: bent for even `n`, semi-bent for odd.
    Bent,
    /// `Iid` when the union bound gives success probability at least 1/2,
    /// else `Bent` when it certifies, else `Iid`.
    Auto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardFunctionCertificate {
    pub n: usize,
    pub delta: f64,
    /// `2^{(1/2 - delta) n}`, the common magnitude of every value.
    pub amplitude: f64,
    pub strategy: HardFunctionStrategy,
    pub attempts: usize,
    /// `max_S |f^(S)|` of each attempt, in order.
    pub attempt_max_coeffs: Vec<f64>,
    pub max_coeff: f64,
}

/// Union bound `2^{n+1} exp(-2^{2 delta n - 1})` on the failure probability of
/// one i.i.d. draw (Hoeffding per coefficient).
pub fn iid_failure_bound(n: usize, delta: f64) -> f64 {
    let e = 2.0 * delta * n as f64 - 1.0;
    ((n as f64 + 1.0) * std::f64::consts::LN_2 - e.exp2()).exp().min(1.0)
}

/// Whether the Maiorana–McFarland construction meets `max |f^| <= 1`:
/// `|f^| = 2^{-delta n}` for even `n` and `2^{1/2 - delta n}` (or 0) for odd.
pub fn bent_certifies(n: usize, delta: f64) -> bool {
    n >= 2 && (n.is_multiple_of(2) || delta * n as f64 >= 0.5)
}

fn sample_iid<R: Rng + ?Sized>(n: usize, amp: f64, rng: &mut R) -> Vec<f64> {
    (0..1usize << n)
        .map(|_| if rng.random::<bool>() { amp } else { -amp })
        .collect()
}

/// `F(u, v) = <u, phi(v)> + h(v)` over GF(2), with `u` the low `k` bits.
fn sample_maiorana_mcfarland<R: Rng + ?Sized>(n: usize, amp: f64, rng: &mut R) -> Vec<f64> {
    let k = n / 2;
    let vbits = n - k;
    let mut perm: Vec<usize> = (0..1usize << vbits).collect();
    perm.shuffle(rng);
    // Odd n: v has one more bit than u and phi is two-to-one onto u's range.
    let phi: Vec<usize> = perm.iter().map(|&p| p >> (vbits - k)).collect();
    let h: Vec<bool> = (0..1usize << vbits).map(|_| rng.random()).collect();
    let umask = (1usize << k) - 1;
    (0..1usize << n)
        .map(|b| {
            let (u, v) = (b & umask, b >> k);
            let parity = ((u & phi[v]).count_ones() % 2 == 1) ^ h[v];
            if parity {
                -amp
            } else {
                amp
            }
        })
        .collect()
}

/// Random `f` with `|f(x)| = 2^{(1/2 - delta) n}` everywhere and every Fourier
/// coefficient at most 1 in magnitude, using [`HardFunctionStrategy::Auto`].
pub fn sample_hard_function(
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<(BooleanTable, HardFunctionCertificate)> {
    sample_hard_function_with(n, delta, seed, HardFunctionStrategy::Auto)
}

pub fn sample_hard_function_with(
    n: usize,
    delta: f64,
    seed: u64,
    strategy: HardFunctionStrategy,
) -> Result<(BooleanTable, HardFunctionCertificate)> {
    if n == 0 {
        return Err(invalid("hard function needs n >= 1"));
    }
    check_len(n, 1 << n.min(MAX_BITS))?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let resolved = match strategy {
        HardFunctionStrategy::Auto if iid_failure_bound(n, delta) <= 0.5 => HardFunctionStrategy::Iid,
        HardFunctionStrategy::Auto if bent_certifies(n, delta) => HardFunctionStrategy::Bent,
        HardFunctionStrategy::Auto => HardFunctionStrategy::Iid,
        s => s,
    };
    if resolved == HardFunctionStrategy::Bent && n < 2 {
        return Err(invalid("the bent construction needs n >= 2"));
    }
    let amp = ((0.5 - delta) * n as f64).exp2();
    let mut log = Vec::new();
    for attempt in 0..RETRY_CAP {
        let mut rng = seeding::substream(seed, HARD_FUNCTION_STREAM, attempt as u32);
        let values = match resolved {
            HardFunctionStrategy::Bent => sample_maiorana_mcfarland(n, amp, &mut rng),
            _ => sample_iid(n, amp, &mut rng),
        };
        let f = BooleanTable { n, values };
        let max_coeff = wht_forward(&f).max_abs();
        log.push(max_coeff);
        debug!("hard function n={n} delta={delta} attempt {attempt}: max |f^| = {max_coeff}");
        if max_coeff <= 1.0 {
            let cert = HardFunctionCertificate {
                n,
                delta,
                amplitude: amp,
                strategy: resolved,
                attempts: attempt + 1,
                max_coeff,
                attempt_max_coeffs: log,
            };
            return Ok((f, cert));
        }
        warn!("hard function n={n} delta={delta}: attempt {attempt} rejected (max |f^| = {max_coeff})");
    }
    Err(Error::RetryCapExceeded {
        attempts: RETRY_CAP,
        best_max_coeff: log.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Smallest `n` at which `Auto` sampling certifies with probability at least
/// 1/2 for this `delta`.
pub fn min_certifiable_n(delta: f64) -> usize {
    (1..=MAX_BITS)
        .find(|&n| iid_failure_bound(n, delta) <= 0.5 || bent_certifies(n, delta))
        .unwrap_or(usize::MAX)
}
