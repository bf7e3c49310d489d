//! Session and scheme parameters shared by analysis, design and simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// active users
    pub ka: usize,
    /// payload bits per user
    pub k: usize,
    /// total channel uses
    pub n: usize,
    /// per-user error target
    pub eps_target: f64,
}

impl SessionConfig {
    pub fn new(ka: usize, k: usize, n: usize, eps_target: f64) -> Result<Self> {
        let c = Self { ka, k, n, eps_target };
        c.validate()?;
        Ok(c)
    }

    /// The operating point used throughout: k = 100 bits, N = 30000, ε = 0.05.
    pub fn reference(ka: usize) -> Self {
        Self {
            ka,
            k: 100,
            n: 30000,
            eps_target: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ka == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("Ka, k and N must be positive".into()));
        }
        if !(self.eps_target > 0.0 && self.eps_target < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_target {} not in (0, 1)",
                self.eps_target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub k_p: usize,
    pub n_p: usize,
    pub d: usize,
    pub n_c1: usize,
    pub n_c2: usize,
    /// number of sub-blocks
    pub v: usize,
    pub n_f: usize,
    pub p1: f64,
    pub p2: f64,
    pub p_f: f64,
    pub icr: bool,
    pub omt: bool,
}

impl SchemeParams {
    /// Correction radius of the auxiliary code.
    pub fn t(&self) -> usize {
        self.d.saturating_sub(1) / 2
    }

    /// Redundancy of the auxiliary code, i.e. the inner-code dimension.
    pub fn m_p(&self) -> usize {
        self.n_p - self.k_p
    }

    pub fn positions(&self) -> usize {
        self.v * self.n_p
    }

    /// Bits carried by the identity choice under OMT.
    pub fn k1(&self) -> usize {
        omt_k1(self.v, self.n_p)
    }

    /// Payload bits left for the data phase.
    pub fn k2(&self, cfg: &SessionConfig) -> usize {
        if self.omt {
            cfg.k.saturating_sub(self.k1())
        } else {
            cfg.k
        }
    }

    /// Channel uses of the scheduling-request phase.
    pub fn n1(&self) -> usize {
        self.v * self.n_c1
    }

    pub fn validate(&self, cfg: &SessionConfig) -> Result<()> {
        cfg.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k_p == 0 || self.k_p >= self.n_p {
            return bad(format!("need 1 <= k_p < n_p, got k_p={} n_p={}", self.k_p, self.n_p));
        }
        if self.n_c1 == 0 || self.n_c2 == 0 || self.v == 0 {
            return bad("n_c1, n_c2 and V must be positive".into());
        }
        let used = self.n1() + self.n_f + cfg.ka * self.n_c2;
        if used != cfg.n {
            return bad(format!("V*n_c1 + N_f + Ka*n_c2 = {used}, expected N = {}", cfg.n));
        }
        if !(self.p1 > 0.0 && self.p2 > 0.0 && self.p_f > 0.0) {
            return bad("all powers must be positive".into());
        }
        if self.positions() < cfg.ka {
            return bad(format!("V*n_p = {} < Ka = {}", self.positions(), cfg.ka));
        }
        if self.omt && self.k1() > cfg.k {
            return bad(format!("OMT prefix of {} bits exceeds k = {}", self.k1(), cfg.k));
        }
        Ok(())
    }

    /// Sets P1 = P2 = P_f/Ka = p.
    pub fn with_power(mut self, p: f64, ka: usize) -> Self {
        self.p1 = p;
        self.p2 = p;
        self.p_f = p * ka as f64;
        self
    }
}

/// `floor(log2(V·n_p))`.
pub fn omt_k1(v: usize, n_p: usize) -> usize {
    let x = v * n_p;
    if x == 0 {
        0
    } else {
        (usize::BITS - 1 - x.leading_zeros()) as usize
    }
}

/// Published optimized designs (k = 100, N = 30000, ε = 0.05, ICR and OMT).
pub fn reference_design(ka: usize) -> Option<SchemeParams> {
    let row = match ka {
        50 => (5, 15, 7, 18, 402, 448, 1836, 0.009936),
        100 => (5, 15, 7, 17, 210, 420, 1860, 0.01137),
        150 => (5, 15, 7, 14, 142, 488, 1868, 0.01320),
        200 => (5, 15, 7, 13, 109, 518, 1466, 0.01532),
        250 => (5, 15, 7, 12, 88, 548, 1424, 0.01837),
        300 => (13, 31, 9, 21, 70, 362, 1398, 0.02434),
        _ => return None,
    };
    let (k_p, n_p, d, n_c1, n_c2, v, n_f, p) = row;
    Some(
        SchemeParams {
            k_p,
            n_p,
            d,
            n_c1,
            n_c2,
            v,
            n_f,
            p1: p,
            p2: p,
            p_f: p,
            icr: true,
            omt: true,
        }
        .with_power(p, ka),
    )
}

pub const REFERENCE_KA: [usize; 6] = [50, 100, 150, 200, 250, 300];

/// Zero-based identity: sub-block `v` in `0..V`, column `u` in `0..n_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Identity {
    pub v: usize,
    pub u: usize,
}

impl Identity {
    /// Flattened position `s = v + V·u`.
    pub fn s(&self, v_count: usize) -> usize {
        self.v + v_count * self.u
    }

    pub fn from_s(s: usize, v_count: usize) -> Self {
        Self {
            v: s % v_count,
            u: s / v_count,
        }
    }
}
