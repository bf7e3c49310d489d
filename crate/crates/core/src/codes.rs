//! Binary linear codes used by the scheduling-request phase.
//!
//! Vectors over GF(2) are packed into `u64` words, bit `i` holding
//! coordinate `i`, so lengths are limited to 64.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl::wrapped_gauss_log_pdf;

pub const MAX_LEN: usize = 64;

pub(crate) fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Rank over GF(2) of a set of packed row vectors.
pub fn gf2_rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::with_capacity(rows.len());
    for &r in rows {
        let mut x = r;
        for &b in &basis {
            x = x.min(x ^ b);
        }
        if x != 0 {
            basis.push(x);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// Basis of the orthogonal complement of the row space of `rows`, vectors of
/// length `n`.
pub fn gf2_null_space(rows: &[u64], n: usize) -> Vec<u64> {
    // Reduced row echelon form.
    let mut m: Vec<u64> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let bit = 1u64 << col;
        let Some(p) = (r..m.len()).find(|&i| m[i] & bit != 0) else {
            continue;
        };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r && m[i] & bit != 0 {
                m[i] ^= m[r];
            }
        }
        pivots.push(col);
        r += 1;
    }
    m.truncate(r);
    let mut out = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = 1u64 << free;
        for (row, &pc) in m.iter().zip(&pivots) {
            if row >> free & 1 == 1 {
                v |= 1u64 << pc;
            }
        }
        out.push(v);
    }
    out
}

/// Inner code `C`: generator rows of length `n_c1` spanning an
/// `m_p`-dimensional space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerCode {
    rows: Vec<u64>,
    n_c1: usize,
}

impl InnerCode {
    pub fn from_rows(rows: Vec<u64>, n_c1: usize) -> Result<Self> {
        if n_c1 == 0 || n_c1 > MAX_LEN {
            return Err(Error::InvalidCode(format!("inner length {n_c1} not in 1..=64")));
        }
        if rows.len() > n_c1 {
            return Err(Error::InvalidCode("more generator rows than coordinates".into()));
        }
        if rows.iter().any(|r| r & !low_mask(n_c1) != 0) {
            return Err(Error::InvalidCode("generator row wider than n_c1".into()));
        }
        if gf2_rank(&rows) != rows.len() {
            return Err(Error::InvalidCode("generator is not full rank".into()));
        }
        Ok(Self { rows, n_c1 })
    }

    /// Uniformly random full-rank generator (rejection sampling).
    pub fn random<R: Rng + ?Sized>(m_p: usize, n_c1: usize, rng: &mut R) -> Result<Self> {
        if m_p > n_c1 {
            return Err(Error::InvalidCode(format!("dimension {m_p} exceeds length {n_c1}")));
        }
        if n_c1 == 0 || n_c1 > MAX_LEN {
            return Err(Error::InvalidCode(format!("inner length {n_c1} not in 1..=64")));
        }
        loop {
            let rows: Vec<u64> = (0..m_p).map(|_| rng.random::<u64>() & low_mask(n_c1)).collect();
            if gf2_rank(&rows) == m_p {
                return Ok(Self { rows, n_c1 });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.n_c1
    }

    pub fn is_empty(&self) -> bool {
        self.n_c1 == 0
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// `msg · G` over GF(2); bit `i` of `msg` selects row `i`.
    pub fn encode(&self, msg: u64) -> Result<u64> {
        if msg & !low_mask(self.dim()) != 0 {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: 64 - msg.leading_zeros() as usize,
            });
        }
        Ok(self.encode_unchecked(msg))
    }

    pub(crate) fn encode_unchecked(&self, msg: u64) -> u64 {
        let mut c = 0;
        let mut m = msg;
        while m != 0 {
            c ^= self.rows[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        c
    }
}

const CHUNK: usize = 8;

/// Exhaustive maximum-likelihood decoder for an [`InnerCode`] over the
/// wrapped-Gaussian mod-2 channel.
///
/// All `2^m_p` codewords are stored chunked by byte; decoding builds a
/// 256-entry partial-score table per byte and scores every codeword with
/// one lookup per chunk.
#[derive(Debug, Clone)]
pub struct MlDecoder {
    n_c1: usize,
    chunks: usize,
    codebook: Vec<u8>,
}

impl MlDecoder {
    pub const MAX_DIM: usize = 24;

    pub fn new(code: &InnerCode) -> Result<Self> {
        let m = code.dim();
        if m > Self::MAX_DIM {
            return Err(Error::InvalidCode(format!(
                "exhaustive ML decoding over 2^{m} codewords is not supported"
            )));
        }
        let chunks = code.len().div_ceil(CHUNK);
        let count = 1usize << m;
        let mut codebook = vec![0u8; count * chunks];
        let mut words = vec![0u64; count];
        for msg in 1..count {
            let low = msg.trailing_zeros() as usize;
            words[msg] = words[msg & (msg - 1)] ^ code.rows[low];
        }
        for (msg, w) in words.iter().enumerate() {
            for c in 0..chunks {
                codebook[msg * chunks + c] = (w >> (c * CHUNK)) as u8;
            }
        }
        Ok(Self {
            n_c1: code.len(),
            chunks,
            codebook,
        })
    }

    /// Most likely message for observation `y` (components in `[0, 2)`)
    /// at noise variance `sigma2`. Ties go to the smallest message.
    pub fn decode(&self, y: &[f64], sigma2: f64) -> Result<u64> {
        if y.len() != self.n_c1 {
            return Err(Error::LengthMismatch {
                expected: self.n_c1,
                got: y.len(),
            });
        }
        // Log-likelihood gain of coordinate t being 1 rather than 0.
        let gains: Vec<f64> = y
            .iter()
            .map(|&v| {
                let shifted = if v >= 1.0 { v - 1.0 } else { v + 1.0 };
                wrapped_gauss_log_pdf(shifted, sigma2) - wrapped_gauss_log_pdf(v, sigma2)
            })
            .collect();
        let mut tables = vec![0.0f64; self.chunks * 256];
        for c in 0..self.chunks {
            let base = c * CHUNK;
            let width = CHUNK.min(self.n_c1 - base);
            let table = &mut tables[c * 256..(c + 1) * 256];
            for pattern in 1usize..(1 << width) {
                let low = pattern.trailing_zeros() as usize;
                table[pattern] = table[pattern & (pattern - 1)] + gains[base + low];
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_msg = 0u64;
        for (msg, word) in self.codebook.chunks_exact(self.chunks).enumerate() {
            let score: f64 = word
                .iter()
                .enumerate()
                .map(|(c, &b)| tables[c * 256 + b as usize])
                .sum();
            if score > best {
                best = score;
                best_msg = msg as u64;
            }
        }
        Ok(best_msg)
    }
}

/// Auxiliary code `C_aux` given by its parity-check matrix; column `u` is the
/// signature transmitted for index `u`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxCode {
    n_p: usize,
    m_p: usize,
    d: usize,
    columns: Vec<u64>,
}

impl AuxCode {
    /// Builds the code from `m_p` parity-check rows of length `n_p`.
    pub fn from_parity_rows(rows: &[u64], n_p: usize, d: usize) -> Result<Self> {
        if n_p == 0 || n_p > MAX_LEN {
            return Err(Error::InvalidCode(format!("aux length {n_p} not in 1..=64")));
        }
        let m_p = rows.len();
        if m_p == 0 || m_p >= n_p || m_p > MAX_LEN {
            return Err(Error::InvalidCode(format!("aux redundancy {m_p} invalid for length {n_p}")));
        }
        if gf2_rank(rows) != m_p {
            return Err(Error::InvalidCode("parity-check matrix is not full rank".into()));
        }
        let columns: Vec<u64> = (0..n_p)
            .map(|u| {
                rows.iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, r)| acc | ((r >> u & 1) << i))
            })
            .collect();
        let mut seen = columns.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != n_p || seen[0] == 0 {
            return Err(Error::InvalidCode("parity-check columns must be distinct and nonzero".into()));
        }
        if d < 3 {
            return Err(Error::InvalidCode(format!("minimum distance {d} corrects nothing")));
        }
        Ok(Self { n_p, m_p, d, columns })
    }

    pub fn n(&self) -> usize {
        self.n_p
    }

    pub fn k(&self) -> usize {
        self.n_p - self.m_p
    }

    pub fn m(&self) -> usize {
        self.m_p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Correction radius `floor((d - 1) / 2)`.
    pub fn t(&self) -> usize {
        (self.d - 1) / 2
    }

    pub fn column(&self, u: usize) -> u64 {
        self.columns[u]
    }

    pub fn parity_rows(&self) -> Vec<u64> {
        (0..self.m_p)
            .map(|i| {
                self.columns
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (u, c)| acc | ((c >> i & 1) << u))
            })
            .collect()
    }

    /// `H · indicator` over GF(2).
    pub fn syndrome_of(&self, indicator: u64) -> Result<u64> {
        if indicator & !low_mask(self.n_p) != 0 {
            return Err(Error::LengthMismatch {
                expected: self.n_p,
                got: 64 - indicator.leading_zeros() as usize,
            });
        }
        let mut s = 0;
        let mut x = indicator;
        while x != 0 {
            s ^= self.columns[x.trailing_zeros() as usize];
            x &= x - 1;
        }
        Ok(s)
    }
}

/// Raised by bounded-distance decoding when no support of weight `<= T`
/// matches the syndrome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectedFailure;

/// Syndrome → unique support of weight at most `T`.
#[derive(Debug, Clone)]
pub struct SyndromeTable {
    radius: usize,
    map: HashMap<u64, u64>,
}

impl SyndromeTable {
    pub const MAX_ENTRIES: usize = 1 << 24;

    pub fn new(aux: &AuxCode) -> Result<Self> {
        let radius = aux.t();
        let entries: f64 = (0..=radius).map(|w| binomial_f64(aux.n(), w)).sum();
        if entries > Self::MAX_ENTRIES as f64 {
            return Err(Error::InvalidCode(format!(
                "syndrome table with {entries} entries is too large"
            )));
        }
        let mut map = HashMap::with_capacity(entries as usize);
        map.insert(0u64, 0u64);
        let mut collision = None;
        for_each_support(aux.n(), radius, |support, syndrome| {
            if map.insert(syndrome, support).is_some() && collision.is_none() {
                collision = Some(support);
            }
        }, aux);
        if let Some(s) = collision {
            return Err(Error::InvalidCode(format!(
                "weight <= {radius} supports share a syndrome (support {s:#x}); distance {} is wrong",
                aux.d()
            )));
        }
        Ok(Self { radius, map })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Support (as a bit mask over the `n_p` indices) of the unique error
    /// pattern of weight `<= T` with this syndrome.
    pub fn lookup(&self, syndrome: u64) -> Result<u64, DetectedFailure> {
        self.map.get(&syndrome).copied().ok_or(DetectedFailure)
    }

    /// Same as [`lookup`](Self::lookup) with the support unpacked into sorted
    /// indices.
    pub fn bounded_distance_decode(&self, syndrome: u64) -> Result<Vec<usize>, DetectedFailure> {
        self.lookup(syndrome).map(unpack)
    }
}

pub(crate) fn unpack(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Visits every nonzero support of weight `<= radius` with its syndrome.
fn for_each_support(n: usize, radius: usize, mut f: impl FnMut(u64, u64), aux: &AuxCode) {
    fn rec(
        start: usize,
        left: usize,
        support: u64,
        syndrome: u64,
        n: usize,
        aux: &AuxCode,
        f: &mut dyn FnMut(u64, u64),
    ) {
        for u in start..n {
            let s = support | 1 << u;
            let syn = syndrome ^ aux.column(u);
            f(s, syn);
            if left > 1 {
                rec(u + 1, left - 1, s, syn, n, aux, f);
            }
        }
    }
    if radius > 0 {
        rec(0, radius, 0, 0, n, aux, &mut f);
    }
}

/// Number of codewords of each weight `0..=n`, by a Gray-code walk.
pub fn weight_distribution(rows: &[u64], n: usize) -> Vec<u64> {
    let mut dist = vec![0u64; n + 1];
    dist[0] = 1;
    let mut word = 0u64;
    for i in 1u64..(1u64 << rows.len()) {
        word ^= rows[i.trailing_zeros() as usize];
        dist[word.count_ones() as usize] += 1;
    }
    dist
}

/// Minimum Hamming weight of the nonzero codewords spanned by `rows`
/// (exhaustive over `2^k` combinations).
pub fn min_distance_by_enumeration(rows: &[u64]) -> usize {
    let k = rows.len();
    let mut best = u32::MAX;
    let mut word = 0u64;
    // Gray-code walk
    for i in 1u64..(1u64 << k) {
        word ^= rows[i.trailing_zeros() as usize];
        best = best.min(word.count_ones());
    }
    best as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bch_15_5() -> AuxCode {
        crate::catalog::best_min_distance(15, 5).unwrap().aux_code().unwrap()
    }

    #[test]
    fn weight_distribution_of_hamming_code() {
        // [7,4,3]: 1 + 7x^3 + 7x^4 + x^7
        let rows = [0b0001011, 0b0010110, 0b0101100, 0b1011000];
        assert_eq!(weight_distribution(&rows, 7), vec![1, 0, 0, 7, 7, 0, 0, 1]);
    }

    #[test]
    fn encode_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let code = InnerCode::random(10, 18, &mut rng).unwrap();
        assert_eq!(code.encode(0).unwrap(), 0);
        for r in 0..10 {
            assert_eq!(code.encode(1 << r).unwrap(), code.rows()[r]);
        }
        for _ in 0..200 {
            let a = rng.random::<u64>() & 0x3ff;
            let b = rng.random::<u64>() & 0x3ff;
            assert_eq!(
                code.encode(a ^ b).unwrap(),
                code.encode(a).unwrap() ^ code.encode(b).unwrap()
            );
        }
        assert!(code.encode(1 << 10).is_err());
    }

    #[test]
    fn rejects_rank_deficient_generator() {
        assert!(InnerCode::from_rows(vec![0b011, 0b110, 0b101], 3).is_err());
        assert!(InnerCode::from_rows(vec![0b011, 0b110], 3).is_ok());
    }

    #[test]
    fn null_space_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let code = InnerCode::random(7, 20, &mut rng).unwrap();
        let dual = gf2_null_space(code.rows(), 20);
        assert_eq!(dual.len(), 13);
        assert_eq!(gf2_rank(&dual), 13);
        for g in code.rows() {
            for h in &dual {
                assert_eq!((g & h).count_ones() % 2, 0);
            }
        }
    }

    fn ideal_observation(code: &InnerCode, msg: u64) -> Vec<f64> {
        let c = code.encode(msg).unwrap();
        (0..code.len()).map(|t| (c >> t & 1) as f64).collect()
    }

    #[test]
    fn ml_recovers_clean_codewords() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let code = InnerCode::random(10, 18, &mut rng).unwrap();
        let dec = MlDecoder::new(&code).unwrap();
        for msg in [0u64, 1, 517, 1023] {
            assert_eq!(dec.decode(&ideal_observation(&code, msg), 1e-3).unwrap(), msg);
        }
    }

    /// Brute-force likelihood over every message using the plain density.
    fn ml_oracle(code: &InnerCode, y: &[f64], sigma2: f64) -> u64 {
        let mut best = (f64::NEG_INFINITY, 0);
        for msg in 0..(1u64 << code.dim()) {
            let c = code.encode(msg).unwrap();
            let ll: f64 = y
                .iter()
                .enumerate()
                .map(|(t, &v)| {
                    let z = (v - (c >> t & 1) as f64).rem_euclid(2.0);
                    crate::fbl::wrapped_gauss_pdf(z, sigma2).ln()
                })
                .sum();
            if ll > best.0 {
                best = (ll, msg);
            }
        }
        best.1
    }

    #[test]
    fn ml_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let code = InnerCode::random(6, 12, &mut rng).unwrap();
        let dec = MlDecoder::new(&code).unwrap();
        let msg = 0b101101;
        let mut y = ideal_observation(&code, msg);
        y[3] = (y[3] + 0.1).rem_euclid(2.0);
        assert_eq!(ml_oracle(&code, &y, 0.01), msg);
        assert_eq!(dec.decode(&y, 0.01).unwrap(), msg);
        for _ in 0..300 {
            let y: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 2.0).collect();
            assert_eq!(dec.decode(&y, 0.15).unwrap(), ml_oracle(&code, &y, 0.15));
        }
    }

    #[test]
    fn ml_coset_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let code = InnerCode::random(8, 16, &mut rng).unwrap();
        let dec = MlDecoder::new(&code).unwrap();
        for _ in 0..100 {
            let y: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 2.0).collect();
            let shift = rng.random::<u64>() & 0xff;
            let c = code.encode(shift).unwrap();
            let shifted: Vec<f64> = y
                .iter()
                .enumerate()
                .map(|(t, v)| (v + (c >> t & 1) as f64).rem_euclid(2.0))
                .collect();
            assert_eq!(dec.decode(&shifted, 0.05).unwrap(), dec.decode(&y, 0.05).unwrap() ^ shift);
        }
    }

    #[test]
    fn syndromes_are_linear() {
        let aux = bch_15_5();
        assert_eq!(aux.syndrome_of(0).unwrap(), 0);
        for u in 0..15 {
            assert_eq!(aux.syndrome_of(1 << u).unwrap(), aux.column(u));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = rng.random::<u64>() & 0x7fff;
            let b = rng.random::<u64>() & 0x7fff;
            assert_eq!(
                aux.syndrome_of(a ^ b).unwrap(),
                aux.syndrome_of(a).unwrap() ^ aux.syndrome_of(b).unwrap()
            );
        }
        assert!(aux.syndrome_of(1 << 15).is_err());
    }

    #[test]
    fn syndrome_table_size_and_decoding() {
        let aux = bch_15_5();
        let table = SyndromeTable::new(&aux).unwrap();
        assert_eq!(aux.t(), 3);
        assert_eq!(table.len(), 1 + 15 + 105 + 455);
        assert_eq!(table.bounded_distance_decode(0).unwrap(), Vec::<usize>::new());
        let s = aux.column(2) ^ aux.column(9);
        assert_eq!(table.bounded_distance_decode(s).unwrap(), vec![2, 9]);
    }

    #[test]
    fn beyond_radius_never_returns_true_support() {
        let aux = bch_15_5();
        let table = SyndromeTable::new(&aux).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let mut support = 0u64;
            while support.count_ones() < 4 {
                support |= 1 << rng.random_range(0..15);
            }
            let syn = aux.syndrome_of(support).unwrap();
            match table.lookup(syn) {
                Err(DetectedFailure) => {}
                Ok(found) => {
                    assert_ne!(found, support);
                    assert!(found.count_ones() <= 3);
                }
            }
        }
    }

    #[test]
    fn aux_rejects_repeated_columns() {
        // columns 0 and 1 identical
        assert!(AuxCode::from_parity_rows(&[0b0011, 0b0111], 4, 3).is_err());
    }
}
