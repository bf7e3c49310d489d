//! Catalog of binary linear codes with the largest known minimum distance
//! for each `(n, k)`, `n <= 63`.
//!
//! Each row of `data/codes.txt` reads `n k d [construction]`. A construction
//! id is a base code followed by `/`-separated modifiers:
//!
//! * `cyc:<n>:<mask>`: cyclic code of odd length `n` whose zeros are the
//!   cyclotomic cosets selected by the hex `mask` (cosets ordered by their
//!   smallest element),
//! * `rep:<n>`, `spc:<n>`: repetition and single-parity-check codes,
//! * `gen:<n>:<row>.<row>...`: explicit generator, hex rows,
//!
//! and modifiers `x` (add overall parity), `p<i>` (puncture the last
//! coordinate `i` times), `s<i>` (shorten on the last coordinate `i` times).

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::codes::{gf2_null_space, gf2_rank, low_mask, min_distance_by_enumeration, AuxCode};
use crate::error::{Error, Result};

pub const MAX_N: usize = 63;

const DATA: &str = include_str!("../data/codes.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub construction: Option<String>,
}

impl CatalogEntry {
    pub fn t(&self) -> usize {
        self.d.saturating_sub(1) / 2
    }

    /// Generator rows of the constructed code.
    pub fn generator(&self) -> Result<Vec<u64>> {
        let id = self.construction.as_deref().ok_or(Error::NotInCatalog {
            n: self.n,
            k: self.k,
        })?;
        let (n, rows) = parse_construction(id)?;
        if n != self.n || rows.len() != self.k {
            return Err(Error::InvalidCode(format!(
                "construction {id} yields [{n},{}] instead of [{},{}]",
                rows.len(),
                self.n,
                self.k
            )));
        }
        Ok(rows)
    }

    /// Auxiliary code whose parity-check matrix is a basis of the dual.
    pub fn aux_code(&self) -> Result<AuxCode> {
        let rows = self.generator()?;
        let h = gf2_null_space(&rows, self.n);
        AuxCode::from_parity_rows(&h, self.n, self.d)
    }
}

fn parse_line(line: &str) -> Result<CatalogEntry> {
    let f: Vec<&str> = line.split_whitespace().collect();
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::InvalidCode(format!("catalog line {line:?}: {e}")))
    };
    if f.len() < 3 || f.len() > 4 {
        return Err(Error::InvalidCode(format!("catalog line {line:?} malformed")));
    }
    Ok(CatalogEntry {
        n: num(f[0])?,
        k: num(f[1])?,
        d: num(f[2])?,
        construction: f.get(3).map(|s| s.to_string()),
    })
}

pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_line)
        .collect()
}

struct Catalog {
    entries: Vec<CatalogEntry>,
    index: HashMap<(usize, usize), usize>,
}

fn catalog() -> &'static Catalog {
    static CAT: OnceLock<Catalog> = OnceLock::new();
    CAT.get_or_init(|| {
        let entries = parse_catalog(DATA).expect("bundled code catalog is well formed");
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.n, e.k), i))
            .collect();
        Catalog { entries, index }
    })
}

pub fn entries() -> &'static [CatalogEntry] {
    &catalog().entries
}

/// Largest cataloged minimum distance of an `[n, k]` binary linear code.
pub fn best_min_distance(n: usize, k: usize) -> Result<CatalogEntry> {
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("need 1 <= k < n, got n={n} k={k}")));
    }
    let cat = catalog();
    cat.index
        .get(&(n, k))
        .map(|&i| cat.entries[i].clone())
        .ok_or(Error::NotInCatalog { n, k })
}

/// Rebuilds `(n, generator rows)` from a construction id.
pub fn parse_construction(id: &str) -> Result<(usize, Vec<u64>)> {
    let bad = |why: &str| Error::InvalidCode(format!("construction {id:?}: {why}"));
    let mut parts = id.split('/');
    let base = parts.next().ok_or_else(|| bad("empty"))?;
    let fields: Vec<&str> = base.split(':').collect();
    let n: usize = fields
        .get(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing length"))?;
    if n == 0 || n > 64 {
        return Err(bad("length out of range"));
    }
    let mut code = match (fields[0], fields.len()) {
        ("rep", 2) => Gen::new(n, vec![low_mask(n)]),
        ("spc", 2) if n >= 2 => Gen::new(n, (1..n).map(|i| 1u64 | 1 << i).collect()),
        ("cyc", 3) => {
            let mask = u64::from_str_radix(fields[2], 16).map_err(|_| bad("bad coset mask"))?;
            let cosets = cyclotomic_cosets(n);
            if mask >> cosets.len() != 0 {
                return Err(bad("coset mask too wide"));
            }
            let field = Gf2m::for_length(n).ok_or_else(|| bad("no supported extension field"))?;
            let g = generator_poly(&field, &cosets, mask);
            cyclic_rows(g, n)
        }
        ("gen", 3) => {
            let rows = fields[2]
                .split('.')
                .map(|r| u64::from_str_radix(r, 16))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad hex row"))?;
            if rows.iter().any(|r| r & !low_mask(n) != 0) || gf2_rank(&rows) != rows.len() {
                return Err(bad("explicit generator is not a full-rank [n, k] matrix"));
            }
            Gen::new(n, rows)
        }
        _ => return Err(bad("unknown base code")),
    };
    for op in parts {
        let (kind, count) = op.split_at(1);
        let count: usize = if count.is_empty() {
            1
        } else {
            count.parse().map_err(|_| bad("bad modifier count"))?
        };
        for _ in 0..count {
            code = match kind {
                "x" => code.extend().ok_or_else(|| bad("extension beyond 64"))?,
                "p" => code.puncture().ok_or_else(|| bad("puncturing collapses the code"))?,
                "s" => code.shorten().ok_or_else(|| bad("shortening an empty code"))?,
                _ => return Err(bad("unknown modifier")),
            };
        }
    }
    Ok((code.n, code.rows))
}

#[derive(Debug, Clone)]
struct Gen {
    n: usize,
    rows: Vec<u64>,
}

impl Gen {
    fn new(n: usize, rows: Vec<u64>) -> Self {
        Self { n, rows }
    }

    fn extend(&self) -> Option<Self> {
        (self.n < 64).then(|| Self {
            n: self.n + 1,
            rows: self
                .rows
                .iter()
                .map(|&r| r | ((r.count_ones() as u64 & 1) << self.n))
                .collect(),
        })
    }

    fn puncture(&self) -> Option<Self> {
        let m = low_mask(self.n - 1);
        let rows: Vec<u64> = self.rows.iter().map(|r| r & m).collect();
        (self.n > 1 && gf2_rank(&rows) == rows.len()).then_some(Self { n: self.n - 1, rows })
    }

    fn shorten(&self) -> Option<Self> {
        let top = 1u64 << (self.n - 1);
        let mut rows = self.rows.clone();
        if let Some(p) = rows.iter().position(|r| r & top != 0) {
            let pivot = rows.remove(p);
            for r in rows.iter_mut() {
                if *r & top != 0 {
                    *r ^= pivot;
                }
            }
        } else {
            rows.pop()?;
        }
        if rows.is_empty() {
            return None;
        }
        let m = low_mask(self.n - 1);
        Some(Self {
            n: self.n - 1,
            rows: rows.iter().map(|r| r & m).collect(),
        })
    }
}

fn cyclic_rows(g: u128, len: usize) -> Gen {
    let deg = 127 - g.leading_zeros() as usize;
    let k = len - deg;
    Gen::new(len, (0..k).map(|i| (g << i) as u64).collect())
}

/// Cyclotomic cosets of 2 modulo odd `n`, ordered by smallest element.
pub fn cyclotomic_cosets(n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut c = Vec::new();
        let mut x = s;
        while !seen[x] {
            seen[x] = true;
            c.push(x);
            x = 2 * x % n;
        }
        out.push(c);
    }
    out
}

/// Irreducible polynomials `x^m + ...` (leading term omitted) for every
/// extension degree needed by odd lengths up to 63.
const IRREDUCIBLE: [(usize, u64); 19] = [
    (2, 0x3),
    (3, 0x3),
    (4, 0x3),
    (5, 0x5),
    (6, 0x3),
    (8, 0x1d),
    (10, 0x9),
    (11, 0x5),
    (12, 0x53),
    (14, 0x443),
    (18, 1 << 7 | 1),
    (20, 1 << 3 | 1),
    (21, 1 << 2 | 1),
    (23, 1 << 5 | 1),
    (28, 1 << 3 | 1),
    (36, 1 << 11 | 1),
    (52, 1 << 3 | 1),
    (58, 1 << 19 | 1),
    (60, 1 << 1 | 1),
];

/// GF(2^m) in polynomial basis, `m <= 63`.
pub(crate) struct Gf2m {
    m: usize,
    low: u64,
    /// element of multiplicative order `n`
    alpha: u64,
}

fn clmul(a: u64, b: u64) -> u128 {
    let mut r = 0u128;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            r ^= (a as u128) << shift;
        }
        b >>= 1;
        shift += 1;
    }
    r
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl Gf2m {
    fn with_poly(m: usize, low: u64) -> Self {
        Self { m, low, alpha: 2 }
    }

    /// Field holding the `n`-th roots of unity, `n` odd, with `alpha` of
    /// order exactly `n`.
    pub(crate) fn for_length(n: usize) -> Option<Self> {
        if n.is_multiple_of(2) || n < 3 {
            return None;
        }
        let m = (1..64).find(|&m| ((1u64 << m) - 1).is_multiple_of(n as u64))?;
        let &(_, low) = IRREDUCIBLE.iter().find(|(d, _)| *d == m)?;
        let mut f = Self::with_poly(m, low);
        let cofactor = ((1u64 << m) - 1) / n as u64;
        let factors = prime_factors(n);
        for base in 2u64..1 << m.min(16) {
            let a = f.pow(base, cofactor);
            if factors.iter().all(|&p| f.pow(a, (n / p) as u64) != 1) {
                f.alpha = a;
                return Some(f);
            }
        }
        None
    }

    pub(crate) fn mul(&self, a: u64, b: u64) -> u64 {
        let mut r = clmul(a, b);
        // reduce from the top down
        for bit in (self.m..2 * self.m).rev() {
            if r >> bit & 1 == 1 {
                r ^= 1u128 << bit;
                r ^= (self.low as u128) << (bit - self.m);
            }
        }
        r as u64
    }

    pub(crate) fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub(crate) fn root(&self, i: usize) -> u64 {
        self.pow(self.alpha, i as u64)
    }
}

/// Product of the minimal polynomials of the selected cosets, bit `i` holding
/// the coefficient of `x^i`.
fn generator_poly(field: &Gf2m, cosets: &[Vec<usize>], mask: u64) -> u128 {
    // Coefficients in GF(2^m), lowest degree first.
    let mut poly: Vec<u64> = vec![1];
    for (ci, coset) in cosets.iter().enumerate() {
        if mask >> ci & 1 == 0 {
            continue;
        }
        for &i in coset {
            let root = field.root(i);
            let mut next = vec![0u64; poly.len() + 1];
            for (j, &c) in poly.iter().enumerate() {
                next[j + 1] ^= c;
                next[j] ^= field.mul(c, root);
            }
            poly = next;
        }
    }
    poly.iter().enumerate().fold(0u128, |acc, (j, &c)| {
        debug_assert!(c <= 1, "minimal polynomial product left the prime field");
        acc | ((c as u128 & 1) << j)
    })
}

const ENUM_LIMIT: usize = 16;

fn binomial_i128(n: usize, k: usize) -> i128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// Exact minimum distance when either the code or its dual is small enough
/// to enumerate; the dual route goes through the MacWilliams identity.
pub fn exact_min_distance(rows: &[u64], n: usize) -> Option<usize> {
    exact_min_distance_within(rows, n, ENUM_LIMIT)
}

fn exact_min_distance_within(rows: &[u64], n: usize, limit: usize) -> Option<usize> {
    let k = rows.len();
    if k == 0 {
        return None;
    }
    if k <= limit && k <= n - k {
        return Some(min_distance_by_enumeration(rows));
    }
    if n - k > limit {
        return k.le(&limit).then(|| min_distance_by_enumeration(rows));
    }
    macwilliams_min_distance(rows, n)
}

/// Minimum distance from the weight distribution of the dual code.
pub(crate) fn macwilliams_min_distance(rows: &[u64], n: usize) -> Option<usize> {
    let dual = gf2_null_space(rows, n);
    let mut b = vec![0i128; n + 1];
    b[0] = 1;
    let mut word = 0u64;
    for i in 1u64..(1u64 << dual.len()) {
        word ^= dual[i.trailing_zeros() as usize];
        b[word.count_ones() as usize] += 1;
    }
    for w in 1..=n {
        let a: i128 = (0..=n)
            .filter(|&j| b[j] != 0)
            .map(|j| {
                let kw: i128 = (0..=w.min(j))
                    .map(|i| {
                        let t = binomial_i128(j, i) * binomial_i128(n - j, w - i);
                        if i % 2 == 0 {
                            t
                        } else {
                            -t
                        }
                    })
                    .sum();
                b[j] * kw
            })
            .sum();
        if a != 0 {
            return Some(w);
        }
    }
    None
}

/// Catalog generation from the constructions above.
pub mod build {
    use super::*;

    #[derive(Clone)]
    struct Slot {
        d: usize,
        id: String,
        code: Gen,
    }

    fn offer(table: &mut HashMap<(usize, usize), Slot>, code: Gen, d: usize, id: String) -> bool {
        let key = (code.n, code.rows.len());
        match table.get(&key) {
            Some(s) if s.d >= d => false,
            _ => {
                table.insert(key, Slot { d, id, code });
                true
            }
        }
    }

    fn bch_bound(n: usize, cosets: &[Vec<usize>], mask: u64) -> usize {
        let mut zero = vec![false; n];
        for (ci, c) in cosets.iter().enumerate() {
            if mask >> ci & 1 == 1 {
                for &i in c {
                    zero[i] = true;
                }
            }
        }
        // longest run of consecutive zeros (cyclically), over every step
        // coprime to n
        let mut best = 0;
        for step in (1..n).filter(|&s| gcd(s, n) == 1) {
            for start in 0..n {
                let mut run = 0;
                while run < n && zero[(start + run * step) % n] {
                    run += 1;
                }
                best = best.max(run);
            }
        }
        best + 1
    }

    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    fn append(id: &str, op: char) -> String {
        // merge repeated modifiers into a count
        if let Some((head, last)) = id.rsplit_once('/') {
            if last.starts_with(op) && !head.is_empty() {
                let count: usize = if last.len() == 1 { 1 } else { last[1..].parse().unwrap_or(1) };
                return format!("{head}/{op}{}", count + 1);
            }
        }
        format!("{id}/{op}")
    }

    fn seed_cyclic(table: &mut HashMap<(usize, usize), Slot>, n: usize, max_n: usize) {
        let Some(field) = Gf2m::for_length(n) else {
            return;
        };
        let cosets = cyclotomic_cosets(n);
        // spend about 2^28 word visits per length on the base codes
        let limit = 28 - cosets.len().min(12);
        for mask in 1u64..(1u64 << cosets.len()) - 1 {
            let g = generator_poly(&field, &cosets, mask);
            let deg = 127 - g.leading_zeros() as usize;
            let k = n - deg;
            let base_rows = cyclic_rows(g, n);
            let base_d = exact_min_distance_within(&base_rows.rows, n, limit.max(ENUM_LIMIT))
                .unwrap_or_else(|| bch_bound(n, &cosets, mask));
            for s in 0..k {
                let len = n - s;
                if len > max_n {
                    continue;
                }
                let code = cyclic_rows(g, len);
                let d = if k - s <= ENUM_LIMIT {
                    min_distance_by_enumeration(&code.rows)
                } else {
                    base_d
                };
                let id = if s == 0 {
                    format!("cyc:{n}:{mask:x}")
                } else {
                    format!("cyc:{n}:{mask:x}/s{s}")
                };
                offer(table, code, d, id);
            }
        }
    }

    fn distance_or(code: &Gen, bound: usize) -> usize {
        exact_min_distance(&code.rows, code.n).unwrap_or(bound)
    }

    /// Distances of codes in use for which no construction is bundled.
    pub const KNOWN_WITHOUT_CONSTRUCTION: &[(usize, usize, usize)] = &[(31, 13, 9)];

    /// Builds catalog rows for `2 <= n <= max_n`, `1 <= k < n`. Rows of
    /// `known` replace constructed rows of smaller distance and carry no
    /// construction.
    pub fn build_catalog(
        max_n: usize,
        explicit: &[&str],
        known: &[(usize, usize, usize)],
    ) -> Result<Vec<CatalogEntry>> {
        let mut table: HashMap<(usize, usize), Slot> = HashMap::new();
        for n in 2..=max_n {
            offer(&mut table, Gen::new(n, vec![low_mask(n)]), n, format!("rep:{n}"));
            let spc = parse_construction(&format!("spc:{n}"))?.1;
            offer(&mut table, Gen::new(n, spc), 2, format!("spc:{n}"));
        }
        for n in (3..=max_n).step_by(2) {
            seed_cyclic(&mut table, n, max_n);
        }
        for id in explicit {
            let (n, rows) = parse_construction(id)?;
            let code = Gen::new(n, rows);
            let d = exact_min_distance(&code.rows, n)
                .ok_or_else(|| Error::InvalidCode(format!("cannot verify distance of {id}")))?;
            offer(&mut table, code, d, id.to_string());
        }
        loop {
            let mut changed = false;
            let mut keys: Vec<(usize, usize)> = table.keys().copied().collect();
            keys.sort_unstable();
            for key in keys {
                let slot = table[&key].clone();
                let (n, k) = key;
                if n < max_n {
                    if let Some(c) = slot.code.extend() {
                        let d = distance_or(&c, slot.d + slot.d % 2);
                        changed |= offer(&mut table, c, d, append(&slot.id, 'x'));
                    }
                }
                if k < n - 1 {
                    if let Some(c) = slot.code.puncture() {
                        let d = distance_or(&c, slot.d - 1);
                        changed |= offer(&mut table, c, d, append(&slot.id, 'p'));
                    }
                }
                if k > 1 {
                    if let Some(c) = slot.code.shorten() {
                        let d = distance_or(&c, slot.d);
                        changed |= offer(&mut table, c, d, append(&slot.id, 's'));
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut out: Vec<CatalogEntry> = table
            .into_iter()
            .filter(|((n, k), _)| *k >= 1 && k < n && *n >= 2)
            .map(|((n, k), s)| CatalogEntry {
                n,
                k,
                d: s.d,
                construction: Some(s.id),
            })
            .collect();
        for &(n, k, d) in known {
            if n > max_n || k == 0 || k >= n {
                continue;
            }
            match out.iter_mut().find(|e| (e.n, e.k) == (n, k)) {
                Some(e) if e.d >= d => {}
                Some(e) => {
                    e.d = d;
                    e.construction = None;
                }
                None => out.push(CatalogEntry {
                    n,
                    k,
                    d,
                    construction: None,
                }),
            }
        }
        out.sort_by_key(|e| (e.n, e.k));
        Ok(out)
    }

    pub fn render(entries: &[CatalogEntry]) -> String {
        let mut s = String::from("# n k d construction\n");
        for e in entries {
            s.push_str(&format!("{} {} {}", e.n, e.k, e.d));
            if let Some(c) = &e.construction {
                s.push(' ');
                s.push_str(c);
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_design_codes() {
        let e = best_min_distance(15, 5).unwrap();
        assert_eq!((e.d, e.t()), (7, 3));
        let e = best_min_distance(31, 13).unwrap();
        assert_eq!((e.d, e.t()), (9, 4));
    }

    #[test]
    fn single_parity_check() {
        for n in 2..=MAX_N {
            assert_eq!(best_min_distance(n, n - 1).unwrap().d, 2, "n={n}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(best_min_distance(10, 0), Err(Error::Domain(_))));
        assert!(matches!(best_min_distance(10, 10), Err(Error::Domain(_))));
        assert!(matches!(best_min_distance(64, 10), Err(Error::NotInCatalog { .. })));
    }

    #[test]
    fn known_codes_from_cosets() {
        // Hamming [7,4,3], Golay [23,12,7], BCH [31,16,7] and [63,45,7]
        let find = |n: usize, k: usize| {
            let field = Gf2m::for_length(n).unwrap();
            let cosets = cyclotomic_cosets(n);
            (1u64..(1 << cosets.len()) - 1)
                .map(|m| cyclic_rows(generator_poly(&field, &cosets, m), n))
                .filter(|c| c.rows.len() == k)
                .filter_map(|c| exact_min_distance(&c.rows, n))
                .max()
                .unwrap()
        };
        assert_eq!(find(7, 4), 3);
        assert_eq!(find(23, 12), 7);
        assert_eq!(find(31, 16), 7);
        assert_eq!(find(63, 57), 3);
    }

    #[test]
    fn macwilliams_agrees_with_enumeration() {
        for id in ["cyc:31:2", "cyc:31:6", "cyc:15:6/s2", "spc:20/x", "cyc:23:2", "rep:9"] {
            let (n, rows) = parse_construction(id).unwrap();
            assert_eq!(
                macwilliams_min_distance(&rows, n),
                Some(min_distance_by_enumeration(&rows)),
                "{id}"
            );
        }
        let (n, rows) = parse_construction("cyc:31:2").unwrap();
        assert_eq!(rows.len(), 26);
        assert_eq!(exact_min_distance(&rows, n), Some(3));
    }

    #[test]
    fn modifiers_change_shape() {
        let (n, rows) = parse_construction("cyc:15:1a/x").unwrap();
        assert_eq!(n, 16);
        let base = parse_construction("cyc:15:1a").unwrap().1;
        assert_eq!(rows.len(), base.len());
        let (n, rows) = parse_construction("cyc:15:1a/s2/p").unwrap();
        assert_eq!((n, rows.len()), (12, base.len() - 2));
        assert!(parse_construction("cyc:15:1a/q").is_err());
        assert!(parse_construction("zzz:15").is_err());
    }

    fn poly_mod(mut a: u128, f: u128) -> u128 {
        let df = 127 - f.leading_zeros();
        while a != 0 && 127 - a.leading_zeros() >= df {
            a ^= f << (127 - a.leading_zeros() - df);
        }
        a
    }

    fn poly_gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            poly_gcd(b, poly_mod(a, b))
        }
    }

    /// Rabin irreducibility test: x^(2^m) = x mod f and
    /// gcd(x^(2^(m/q)) - x, f) = 1 for each prime q dividing m.
    #[test]
    fn field_polynomials_are_irreducible() {
        for &(m, low) in IRREDUCIBLE.iter() {
            let f = Gf2m::with_poly(m, low);
            let full = (1u128 << m) | low as u128;
            let frob = |times: usize| {
                let mut x = 2u64;
                for _ in 0..times {
                    x = f.mul(x, x);
                }
                x
            };
            assert_eq!(frob(m), 2, "m={m}");
            for q in prime_factors(m) {
                let h = (frob(m / q) ^ 2) as u128;
                assert_eq!(poly_gcd(full, h), 1, "m={m} q={q}");
            }
        }
    }

    #[test]
    fn every_odd_length_factors_x_n_minus_one() {
        for n in (3..=MAX_N).step_by(2) {
            let field = Gf2m::for_length(n).unwrap_or_else(|| panic!("n={n}"));
            let cosets = cyclotomic_cosets(n);
            let all = (1u64 << cosets.len()) - 1;
            let g = generator_poly(&field, &cosets, all);
            assert_eq!(g, (1u128 << n) | 1, "n={n}");
            for ci in 0..cosets.len() {
                let g = generator_poly(&field, &cosets, 1 << ci);
                assert_eq!(127 - g.leading_zeros() as usize, cosets[ci].len());
                assert_eq!(poly_mod((1u128 << n) | 1, g), 0, "n={n} coset {ci}");
            }
        }
    }
}
