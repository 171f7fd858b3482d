//! Subsets of `[n]` as bitmasks.

/// All `k`-subsets of `{0, .., n-1}` in increasing numeric order.
pub fn k_subsets(n: usize, k: usize) -> Vec<u64> {
    assert!(n < 64, "k_subsets supports n < 64");
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let limit = 1u64 << n;
    let mut s: u64 = (1u64 << k) - 1;
    while s < limit {
        out.push(s);
        // Gosper's hack: next larger integer with the same popcount.
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
    out
}

/// All subsets of size at most `k`, grouped by size.
pub fn subsets_up_to(n: usize, k: usize) -> Vec<u64> {
    (0..=k.min(n)).flat_map(|j| k_subsets(n, j)).collect()
}

pub fn mask_of(indices: &[usize]) -> u64 {
    indices.iter().fold(0, |m, &i| m | (1u64 << i))
}

pub fn elements(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}
