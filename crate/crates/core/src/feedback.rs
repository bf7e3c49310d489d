//! Resource-distribution phase: enumerative coding of the constant-weight
//! occupancy pattern and the user-side slot lookup.
//!
//! Sequences are ordered lexicographically with position 0 (the smallest
//! flattened identity `s`) as the most significant symbol.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c *= n - i;
        c /= i + 1;
    }
    c
}

/// Lexicographic rank of a weight-`w` sequence among all `C(n, w)` of them.
pub fn rank(bits: &[bool], w: usize) -> Result<BigUint> {
    let got = bits.iter().filter(|&&b| b).count();
    if got != w {
        return Err(Error::WeightMismatch { expected: w, got });
    }
    let n = bits.len();
    // c tracks C(m, r): m positions left, r ones left
    let mut c = binomial(n, w);
    let mut r = w;
    let mut out = BigUint::zero();
    for (i, &b) in bits.iter().enumerate() {
        if r == 0 {
            break;
        }
        let m = n - i;
        let skip = &c * (m - r) / m;
        if b {
            out += &skip;
            c = c * r / m;
            r -= 1;
        } else {
            c = skip;
        }
    }
    Ok(out)
}

/// Inverse of [`rank`].
pub fn unrank(n: usize, w: usize, rank: &BigUint) -> Result<Vec<bool>> {
    if w > n {
        return Err(Error::RankOutOfRange { n, w });
    }
    let mut c = binomial(n, w);
    if *rank >= c {
        return Err(Error::RankOutOfRange { n, w });
    }
    let mut rest = rank.clone();
    let mut r = w;
    let mut bits = vec![false; n];
    for (i, bit) in bits.iter_mut().enumerate() {
        if r == 0 {
            break;
        }
        let m = n - i;
        let skip = &c * (m - r) / m;
        if rest >= skip {
            *bit = true;
            rest -= &skip;
            c = c * r / m;
            r -= 1;
        } else {
            c = skip;
        }
    }
    Ok(bits)
}

/// `ceil(log2 C(V·n_p, Ka))`, exact.
pub fn feedback_bits(v: usize, n_p: usize, ka: usize) -> Result<u64> {
    let n = v * n_p;
    if ka > n {
        return Err(Error::Domain(format!("Ka={ka} exceeds V*n_p={n}")));
    }
    let c = binomial(n, ka);
    Ok(if c.is_one() { 0 } else { (c - 1u32).bits() })
}

/// `log2 C(n, ka)` for real `n`, without the ceiling.
pub fn feedback_bits_relaxed(n: f64, ka: f64) -> f64 {
    if ka <= 0.0 || n <= ka {
        return 0.0;
    }
    (ln_gamma(n + 1.0) - ln_gamma(ka + 1.0) - ln_gamma(n - ka + 1.0)) / std::f64::consts::LN_2
}

/// Zero-based data slot of flattened position `s`, `None` when `s` is not
/// listed.
pub fn user_find_slot(s_hat: &[bool], s: usize) -> Option<usize> {
    match s_hat.get(s) {
        Some(true) => Some(s_hat[..s].iter().filter(|&&b| b).count()),
        _ => None,
    }
}

/// `k_f`-bit big-endian payload, zero-padded on the left to whole bytes.
pub fn encode_payload(rank: &BigUint, k_f: u64) -> Result<Vec<u8>> {
    if rank.bits() > k_f {
        return Err(Error::Domain(format!("rank needs {} bits, payload has {k_f}", rank.bits())));
    }
    let len = k_f.div_ceil(8) as usize;
    let raw = if rank.is_zero() { Vec::new() } else { rank.to_bytes_be() };
    let mut out = vec![0u8; len - raw.len()];
    out.extend(raw);
    Ok(out)
}

pub fn decode_payload(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}
