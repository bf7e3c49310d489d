//! Scheduling-request phase: identity selection, modulation, the sub-block
//! channel, OP decoding with index collision resolution, and the occupancy
//! estimate broadcast as feedback.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codes::{weight_distribution, AuxCode, InnerCode, MlDecoder, SyndromeTable};
use crate::error::{Error, Result};
use crate::fbl::mod2_bhattacharyya;
use crate::params::{omt_k1, Identity};

pub fn select_identity_uniform<R: Rng + ?Sized>(v: usize, n_p: usize, rng: &mut R) -> Identity {
    Identity::from_s(rng.random_range(0..v * n_p), v)
}

/// Maps a `k1`-bit prefix to an identity. Prefixes below `V·n_p − 2^k1` have
/// two admissible positions, picked uniformly.
pub fn select_identity_omt<R: Rng + ?Sized>(
    prefix: u64,
    v: usize,
    n_p: usize,
    rng: &mut R,
) -> Result<Identity> {
    let k1 = omt_k1(v, n_p);
    let span = 1usize << k1;
    if prefix >= span as u64 {
        return Err(Error::Domain(format!("prefix {prefix} does not fit in {k1} bits")));
    }
    let mut s = prefix as usize;
    if s < v * n_p - span && rng.random::<bool>() {
        s += span;
    }
    Ok(Identity::from_s(s, v))
}

/// Recovers the OMT prefix from an identity.
pub fn omt_prefix(id: Identity, v: usize, n_p: usize) -> u64 {
    let span = 1usize << omt_k1(v, n_p);
    let s = id.s(v);
    (if s >= span { s - span } else { s }) as u64
}

/// Probability of each identity under OMT with uniform prefixes, indexed
/// `[v][u]`.
pub fn omt_mass(v: usize, n_p: usize) -> Vec<Vec<f64>> {
    let k1 = omt_k1(v, n_p);
    let span = 1usize << k1;
    let unit = 1.0 / span as f64;
    let mut mass = vec![vec![0.0; n_p]; v];
    for prefix in 0..span {
        let targets: &[usize] = if prefix < v * n_p - span {
            &[prefix, prefix + span]
        } else {
            &[prefix]
        };
        for &s in targets {
            let id = Identity::from_s(s, v);
            mass[id.v][id.u] += unit / targets.len() as f64;
        }
    }
    mass
}

/// Largest sub-block probability under OMT, by enumeration.
pub fn p_vstar_enumerated(v: usize, n_p: usize) -> f64 {
    omt_mass(v, n_p)
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(0.0, f64::max)
}

/// Adds unit-variance Gaussian noise to the superposition of `signals`.
pub fn subblock_channel<R: Rng + ?Sized>(signals: &[&[f64]], n_c1: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut y = vec![0.0; n_c1];
    for s in signals {
        if s.len() != n_c1 {
            return Err(Error::LengthMismatch {
                expected: n_c1,
                got: s.len(),
            });
        }
        for (a, b) in y.iter_mut().zip(s.iter()) {
            *a += b;
        }
    }
    for a in y.iter_mut() {
        *a += rng.sample::<f64, _>(StandardNormal);
    }
    Ok(y)
}

/// Union-bound score of an inner code at amplitude `a`: low-weight words
/// cause mod-2 decoding errors, and words close to all-ones let two users
/// nearly cancel in the superposition (their sum has energy
/// `4a²(n − weight)`). Smaller is better.
pub fn inner_code_score(code: &InnerCode, amplitude: f64) -> Result<f64> {
    let snr = amplitude * amplitude;
    let z = mod2_bhattacharyya(snr)?;
    let y = (-snr / 2.0).exp();
    let n = code.len();
    Ok(weight_distribution(code.rows(), n)
        .iter()
        .enumerate()
        .skip(1)
        .map(|(w, &count)| count as f64 * (z.powi(w as i32) + y.powi((n - w) as i32)))
        .sum())
}

/// Random draws compared by [`inner_code_score`] when picking an inner code.
pub const INNER_DRAWS: usize = 64;

/// Best of `draws` random full-rank codes by [`inner_code_score`]; the
/// first one wins ties.
pub fn select_inner_code<R: Rng + ?Sized>(
    m_p: usize,
    n_c1: usize,
    amplitude: f64,
    draws: usize,
    rng: &mut R,
) -> Result<InnerCode> {
    let mut best: Option<(f64, InnerCode)> = None;
    for _ in 0..draws.max(1) {
        let code = InnerCode::random(m_p, n_c1, rng)?;
        let score = inner_code_score(&code, amplitude)?;
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, code));
        }
    }
    Ok(best.expect("at least one draw").1)
}

/// Decoding failures that the receiver notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectedError {
    /// no support of weight `<= T` matches the decoded syndrome
    Syndrome,
    /// more indices than the assumed user count
    ListTooLong,
    /// the user count left for the next level is not an integer
    OddRemainder,
}

/// Maps a noisy mod-2 observation to an inner-code message.
#[derive(Debug, Clone)]
pub enum InnerDecoder {
    Ml(MlDecoder),
    /// Per-coordinate hard decisions solved on an information set. Only
    /// meaningful without noise; used for algebraic checks on codes whose
    /// dimension is out of reach for exhaustive ML.
    HardDecision(HardDecoder),
}

impl InnerDecoder {
    fn decode(&self, y: &[f64], sigma2: f64) -> u64 {
        match self {
            InnerDecoder::Ml(d) => d.decode(y, sigma2).expect("observation length checked by caller"),
            InnerDecoder::HardDecision(d) => d.decode(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HardDecoder {
    columns: Vec<usize>,
    /// row `r` selects the information-set bits whose parity is message bit `r`
    inverse: Vec<u64>,
}

impl HardDecoder {
    pub fn new(code: &InnerCode) -> Result<Self> {
        let m = code.dim();
        let col = |t: usize| -> u64 {
            code.rows()
                .iter()
                .enumerate()
                .fold(0, |acc, (r, row)| acc | ((row >> t & 1) << r))
        };
        // greedy independent columns
        let mut basis: Vec<(u64, usize)> = Vec::new();
        let mut columns = Vec::new();
        let mut reduced_cols = Vec::new();
        for t in 0..code.len() {
            let mut x = col(t);
            for &(b, lead) in &basis {
                if x >> lead & 1 == 1 {
                    x ^= b;
                }
            }
            if x != 0 {
                let lead = 63 - x.leading_zeros() as usize;
                basis.push((x, lead));
                columns.push(t);
                reduced_cols.push(col(t));
            }
            if columns.len() == m {
                break;
            }
        }
        if columns.len() != m {
            return Err(Error::InvalidCode("inner code has no information set".into()));
        }
        // A[i] = column j_i as a mask over message bits; msg = A^{-1} b
        let mut a: Vec<u64> = reduced_cols;
        let mut inv: Vec<u64> = (0..m).map(|i| 1u64 << i).collect();
        for c in 0..m {
            let p = (c..m)
                .find(|&i| a[i] >> c & 1 == 1)
                .ok_or_else(|| Error::InvalidCode("singular information set".into()))?;
            a.swap(c, p);
            inv.swap(c, p);
            for i in 0..m {
                if i != c && a[i] >> c & 1 == 1 {
                    a[i] ^= a[c];
                    inv[i] ^= inv[c];
                }
            }
        }
        Ok(Self {
            columns,
            inverse: inv,
        })
    }

    fn decode(&self, y: &[f64]) -> u64 {
        let b = self.columns.iter().enumerate().fold(0u64, |acc, (i, &t)| {
            let v = y[t];
            acc | (((0.5..1.5).contains(&v) as u64) << i)
        });
        self.inverse
            .iter()
            .enumerate()
            .fold(0u64, |acc, (r, row)| acc | (((row & b).count_ones() as u64 & 1) << r))
    }
}

/// The inner code `C`, the auxiliary code `C_aux` and everything derived
/// from them that the sub-block decoder needs.
#[derive(Debug, Clone)]
pub struct CodePair {
    inner: InnerCode,
    aux: AuxCode,
    decoder: InnerDecoder,
    table: SyndromeTable,
    codewords: Vec<u64>,
    amplitude: f64,
}

impl CodePair {
    /// `amplitude` is `sqrt(P1·V)`.
    pub fn new(inner: InnerCode, aux: AuxCode, amplitude: f64) -> Result<Self> {
        let decoder = InnerDecoder::Ml(MlDecoder::new(&inner)?);
        Self::with_decoder(inner, aux, amplitude, decoder)
    }

    pub fn with_decoder(inner: InnerCode, aux: AuxCode, amplitude: f64, decoder: InnerDecoder) -> Result<Self> {
        if inner.dim() != aux.m() {
            return Err(Error::InvalidCode(format!(
                "inner dimension {} differs from aux redundancy {}",
                inner.dim(),
                aux.m()
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Domain(format!("amplitude {amplitude} must be positive")));
        }
        let table = SyndromeTable::new(&aux)?;
        let codewords = (0..aux.n()).map(|u| inner.encode_unchecked(aux.column(u))).collect();
        Ok(Self {
            inner,
            aux,
            decoder,
            table,
            codewords,
            amplitude,
        })
    }

    pub fn inner(&self) -> &InnerCode {
        &self.inner
    }

    pub fn aux(&self) -> &AuxCode {
        &self.aux
    }

    pub fn n_c1(&self) -> usize {
        self.inner.len()
    }

    pub fn n_p(&self) -> usize {
        self.aux.n()
    }

    pub fn t(&self) -> usize {
        self.aux.t()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn codeword(&self, u: usize) -> u64 {
        self.codewords[u]
    }

    /// `x(u) = 2a(c(u) − 1/2)`, antipodal with magnitude `a`.
    pub fn modulate(&self, u: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n_c1()];
        self.add_signal(u, 1.0, &mut x);
        x
    }

    /// `acc += scale · x(u)`
    pub fn add_signal(&self, u: usize, scale: f64, acc: &mut [f64]) {
        let c = self.codewords[u];
        let a = self.amplitude * scale;
        for (t, v) in acc.iter_mut().enumerate() {
            *v += if c >> t & 1 == 1 { a } else { -a };
        }
    }

    /// Noise variance seen by the inner decoder at ICR level `level` (1-based).
    pub fn level_variance(&self, level: u32) -> f64 {
        1.0 / (4.0 * self.amplitude * self.amplitude * 4f64.powi(level as i32 - 1))
    }

    /// One pass of the original OP decoder for an assumed count `t_hat`.
    pub fn op_decode_single(&self, y: &[f64], t_hat: usize, level: u32) -> Result<Vec<usize>, DetectedError> {
        assert_eq!(y.len(), self.n_c1(), "observation length");
        let scale = 0.5 / self.amplitude;
        let dither = t_hat as f64 * 0.5;
        let yt: Vec<f64> = y
            .iter()
            .map(|&v| {
                let w = (v * scale + dither).rem_euclid(2.0);
                // rem_euclid can round up to exactly 2.0
                if w >= 2.0 {
                    0.0
                } else {
                    w
                }
            })
            .collect();
        let syndrome = self.decoder.decode(&yt, self.level_variance(level));
        self.table
            .bounded_distance_decode(syndrome)
            .map_err(|_| DetectedError::Syndrome)
    }

    /// Index collision resolution: repeated OP passes on halved residuals.
    pub fn icr_decode(&self, y: &[f64], t_hat: usize) -> Result<Vec<Vec<usize>>, DetectedError> {
        let mut lists = Vec::new();
        let mut y_l = y.to_vec();
        let mut t_l = t_hat;
        let mut level = 1;
        loop {
            let list = self.op_decode_single(&y_l, t_l, level)?;
            let len = list.len();
            if len > t_l {
                return Err(DetectedError::ListTooLong);
            }
            if len == t_l {
                lists.push(list);
                return Ok(lists);
            }
            if (t_l - len) % 2 == 1 {
                return Err(DetectedError::OddRemainder);
            }
            for &u in &list {
                self.add_signal(u, -1.0, &mut y_l);
            }
            y_l.iter_mut().for_each(|v| *v *= 0.5);
            t_l = (t_l - len) / 2;
            level += 1;
            lists.push(list);
        }
    }

    /// Indices of level 1 not seen at deeper levels, and the noise estimate
    /// `y − Σ_ℓ 2^(ℓ−1) Σ x(u)`.
    pub fn finalize_lists(&self, lists: &[Vec<usize>], y: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let mut residual = y.to_vec();
        let mut weight = 1.0;
        for list in lists {
            for &u in list {
                self.add_signal(u, -weight, &mut residual);
            }
            weight *= 2.0;
        }
        let singles = match lists.split_first() {
            Some((first, rest)) => first
                .iter()
                .copied()
                .filter(|u| !rest.iter().any(|l| l.contains(u)))
                .collect(),
            None => Vec::new(),
        };
        (singles, residual)
    }

    /// Decodes one candidate count and returns `(singles, collided, residual)`.
    pub fn decode_candidate(
        &self,
        y: &[f64],
        t_hat: usize,
        icr: bool,
    ) -> Result<CandidateLists, DetectedError> {
        if icr {
            let lists = self.icr_decode(y, t_hat)?;
            let (singles, residual) = self.finalize_lists(&lists, y);
            let mut collided: Vec<usize> = lists.iter().skip(1).flatten().copied().collect();
            collided.sort_unstable();
            collided.dedup();
            Ok((singles, collided, residual))
        } else {
            let list = self.op_decode_single(y, t_hat, 1)?;
            let (singles, residual) = self.finalize_lists(std::slice::from_ref(&list), y);
            Ok((singles, Vec::new(), residual))
        }
    }

    /// Decodes every candidate count `t̂ = 0..=T`. A candidate with a
    /// detected error keeps an empty list, so its residual is `y` itself.
    pub fn candidates(&self, y: &[f64], icr: bool) -> Vec<Candidate> {
        let y_energy: f64 = y.iter().map(|v| v * v).sum();
        (0..=self.t())
            .map(|t_hat| match self.decode_candidate(y, t_hat, icr) {
                Ok((singles, collided, residual)) => Candidate {
                    t_hat,
                    singles,
                    collided,
                    energy: residual.iter().map(|v| v * v).sum(),
                    error: None,
                },
                Err(e) => Candidate {
                    t_hat,
                    singles: Vec::new(),
                    collided: Vec::new(),
                    energy: y_energy,
                    error: Some(e),
                },
            })
            .collect()
    }

    /// Runs every candidate count and keeps the one with the smallest
    /// residual energy (ties to the smaller `t̂`).
    pub fn decode_subblock(&self, y: &[f64], icr: bool) -> SubblockDecode {
        select_candidate(&self.candidates(y, icr))
    }
}

/// `(singles, collided, residual)` of one candidate count.
pub type CandidateLists = (Vec<usize>, Vec<usize>, Vec<f64>);

/// Outcome of decoding one sub-block under an assumed user count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub t_hat: usize,
    pub singles: Vec<usize>,
    pub collided: Vec<usize>,
    /// squared norm of the noise estimate
    pub energy: f64,
    pub error: Option<DetectedError>,
}

/// Gaussianity test: smallest residual energy wins, ties to the smaller
/// count. A winning candidate with a detected error yields an empty result.
pub fn select_candidate(cands: &[Candidate]) -> SubblockDecode {
    let mut best: Option<&Candidate> = None;
    for c in cands {
        if best.is_none_or(|b| c.energy < b.energy) {
            best = Some(c);
        }
    }
    match best {
        Some(c) if c.error.is_none() => SubblockDecode {
            singles: c.singles.clone(),
            collided: c.collided.clone(),
            t_star: Some(c.t_hat),
        },
        _ => SubblockDecode::default(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubblockDecode {
    pub singles: Vec<usize>,
    pub collided: Vec<usize>,
    /// selected user count, `None` when the selected candidate had a
    /// detected error
    pub t_star: Option<usize>,
}

/// Binary estimate `Ŝ` flattened by `s = v + V·u`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    pub v: usize,
    pub n_p: usize,
    pub s_hat: Vec<bool>,
    pub collided: Vec<bool>,
    /// positions with `Ŝ = 1`, increasing
    pub assignment: Vec<usize>,
    pub padded: usize,
    pub erased: usize,
}

/// Builds `Ŝ` from per-sub-block decodes (indexed by `v`), then pads with
/// uniformly chosen non-collided zeros or erases uniformly chosen ones until
/// exactly `ka` positions remain.
pub fn build_occupancy_estimate<R: Rng + ?Sized>(
    results: &[SubblockDecode],
    n_p: usize,
    ka: usize,
    rng: &mut R,
) -> Result<OccupancyEstimate> {
    let v = results.len();
    let total = v * n_p;
    if ka > total {
        return Err(Error::InvalidConfig(format!("Ka = {ka} exceeds V*n_p = {total}")));
    }
    let mut s_hat = vec![false; total];
    let mut collided = vec![false; total];
    for (b, r) in results.iter().enumerate() {
        for &u in &r.singles {
            s_hat[Identity { v: b, u }.s(v)] = true;
        }
        for &u in &r.collided {
            collided[Identity { v: b, u }.s(v)] = true;
        }
    }
    let ones = s_hat.iter().filter(|&&b| b).count();
    let (mut padded, mut erased) = (0, 0);
    if ones < ka {
        let need = ka - ones;
        let free: Vec<usize> = (0..total).filter(|&s| !s_hat[s] && !collided[s]).collect();
        if free.len() >= need {
            for i in sample(rng, free.len(), need) {
                s_hat[free[i]] = true;
            }
        } else {
            for &s in &free {
                s_hat[s] = true;
            }
            let rest: Vec<usize> = (0..total).filter(|&s| !s_hat[s]).collect();
            for i in sample(rng, rest.len(), need - free.len()) {
                s_hat[rest[i]] = true;
            }
        }
        padded = need;
    } else if ones > ka {
        let set: Vec<usize> = (0..total).filter(|&s| s_hat[s]).collect();
        for i in sample(rng, set.len(), ones - ka) {
            s_hat[set[i]] = false;
        }
        erased = ones - ka;
    }
    let assignment = (0..total).filter(|&s| s_hat[s]).collect();
    Ok(OccupancyEstimate {
        v,
        n_p,
        s_hat,
        collided,
        assignment,
        padded,
        erased,
    })
}
