//! Closed-form per-user error terms and their union-bound total.
//!
//! Every term accepts real-valued lengths so the design search can treat
//! `n_c1`, `n_c2`, `V` and `N_f` as continuous.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fbl::{awgn_stats, normal_approx_error, Mod2Source};
use crate::feedback::{feedback_bits, feedback_bits_relaxed};
use crate::params::{SchemeParams, SessionConfig};

/// A (possibly relaxed) design: code parameters are integers, lengths and
/// powers real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub n_p: usize,
    pub k_p: usize,
    pub d: usize,
    pub n_c1: f64,
    pub n_c2: f64,
    pub v: f64,
    pub n_f: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_f: f64,
    /// feedback payload bits
    pub k_f: f64,
    pub icr: bool,
    pub omt: bool,
}

impl DesignPoint {
    /// Integer design with the exact feedback size.
    pub fn from_params(p: &SchemeParams, cfg: &SessionConfig) -> Result<Self> {
        Ok(Self {
            n_p: p.n_p,
            k_p: p.k_p,
            d: p.d,
            n_c1: p.n_c1 as f64,
            n_c2: p.n_c2 as f64,
            v: p.v as f64,
            n_f: p.n_f as f64,
            p1: p.p1,
            p2: p.p2,
            p_f: p.p_f,
            k_f: feedback_bits(p.v, p.n_p, cfg.ka)? as f64,
            icr: p.icr,
            omt: p.omt,
        })
    }

    /// Relaxed design with `P1 = P2 = P_f/Ka = p` and the log-gamma
    /// feedback size.
    #[allow(clippy::too_many_arguments)]
    pub fn relaxed(
        n_p: usize,
        k_p: usize,
        d: usize,
        n_c1: f64,
        n_c2: f64,
        v: f64,
        n_f: f64,
        p: f64,
        ka: usize,
        icr: bool,
        omt: bool,
    ) -> Self {
        Self {
            n_p,
            k_p,
            d,
            n_c1,
            n_c2,
            v,
            n_f,
            p1: p,
            p2: p,
            p_f: p * ka as f64,
            k_f: feedback_bits_relaxed(v * n_p as f64, ka as f64),
            icr,
            omt,
        }
        .with_power(p, ka)
    }

    pub fn with_power(mut self, p: f64, ka: usize) -> Self {
        self.p1 = p;
        self.p2 = p;
        self.p_f = p * ka as f64;
        self
    }

    pub fn t(&self) -> usize {
        self.d.saturating_sub(1) / 2
    }

    pub fn m_p(&self) -> usize {
        self.n_p - self.k_p
    }

    pub fn positions(&self) -> f64 {
        self.v * self.n_p as f64
    }

    /// `floor(log2(V·n_p))`
    pub fn k1(&self) -> u32 {
        let x = self.positions();
        if x < 1.0 {
            0
        } else {
            x.log2().floor() as u32
        }
    }
}

/// Probability that at least `t` of `ka − 1` other users pick a given
/// sub-block, each independently with probability `p`.
pub fn eps1_with(t: usize, ka: usize, p: f64) -> f64 {
    if ka <= 1 || t >= ka {
        return 0.0;
    }
    if t == 0 {
        return 1.0;
    }
    let others = (ka - 1) as f64;
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let t_f = t as f64;
    let mut term = (ln_gamma(others + 1.0) - ln_gamma(t_f + 1.0) - ln_gamma(others - t_f + 1.0)
        + t_f * lp
        + (others - t_f) * lq)
        .exp();
    let ratio = p / (1.0 - p);
    let mode = others * p;
    let mut tail = 0.0;
    for j in t..ka {
        tail += term;
        let jf = j as f64;
        if jf > mode && term < tail * 1e-18 {
            break;
        }
        term *= (others - jf) / (jf + 1.0) * ratio;
    }
    tail.clamp(0.0, 1.0)
}

/// Largest per-sub-block probability under OMT (closed form).
pub fn p_vstar(v: f64, n_p: usize) -> f64 {
    let x = v * n_p as f64;
    if x < 1.0 {
        return 1.0;
    }
    let span = 2f64.powi(x.log2().floor() as i32);
    let f = (2.0 * (x - span) / v).floor();
    (n_p as f64 - f) / span + f / (2.0 * span)
}

pub fn eps1(pt: &DesignPoint, ka: usize) -> f64 {
    let p = if pt.omt { p_vstar(pt.v, pt.n_p) } else { 1.0 / pt.v };
    eps1_with(pt.t(), ka, p)
}

fn mod2_term(src: &dyn Mod2Source, snr: f64, n: f64, rate: f64) -> Result<f64> {
    if n <= 0.0 {
        return Ok(1.0);
    }
    Ok(normal_approx_error(src.mod2(snr)?, n, rate))
}

/// Failure to decode the inner code; with ICR a union over the
/// `floor(log2 T) + 1` levels at effective power `2^(ℓ−1)·P1·V`.
pub fn eps2(pt: &DesignPoint, src: &dyn Mod2Source) -> Result<f64> {
    let base = pt.p1 * pt.v;
    let rate = pt.m_p() as f64 / pt.n_c1;
    let levels = if pt.icr && pt.t() >= 1 {
        pt.t().ilog2() + 1
    } else {
        1
    };
    let mut sum = 0.0;
    for l in 0..levels {
        sum += mod2_term(src, base * 2f64.powi(l as i32), pt.n_c1, rate)?;
    }
    Ok(sum.min(1.0))
}

/// Index collisions. Without ICR the OP bound `T(T−1)/(2n_p)`; with ICR the
/// probability that another user shares the position, under uniform or OMT
/// identity choice.
pub fn eps3(pt: &DesignPoint, ka: usize) -> f64 {
    let others = ka.saturating_sub(1) as i32;
    if !pt.icr {
        let t = pt.t() as f64;
        return (t * (t - 1.0) / (2.0 * pt.n_p as f64)).clamp(0.0, 1.0);
    }
    if pt.omt {
        let x = pt.positions();
        let span = 2f64.powi(pt.k1() as i32);
        let dup = (x - span) / span;
        let single = (2.0 * span - x) / span;
        let hit = |q: f64| 1.0 - (1.0 - q).powi(others);
        (dup * hit(1.0 / (2.0 * span)) + single * hit(1.0 / span)).clamp(0.0, 1.0)
    } else {
        1.0 - (1.0 - 1.0 / pt.positions()).powi(others)
    }
}

fn awgn_term(snr: f64, n: f64, bits: f64) -> Result<f64> {
    if bits <= 0.0 {
        return Ok(0.0);
    }
    if n <= 0.0 {
        return Ok(1.0);
    }
    Ok(normal_approx_error(awgn_stats(snr)?, n, bits / n))
}

pub fn eps_f(pt: &DesignPoint) -> Result<f64> {
    awgn_term(pt.p_f, pt.n_f, pt.k_f)
}

pub fn eps4(pt: &DesignPoint, cfg: &SessionConfig) -> Result<f64> {
    let bits = if pt.omt {
        cfg.k as f64 - pt.k1() as f64
    } else {
        cfg.k as f64
    };
    awgn_term(pt.p2 * cfg.ka as f64, pt.n_c2, bits.max(0.0))
}

pub const EXCLUDED_NOTE: &str =
    "user-count misselection and erasure by the padding step have no closed form and are not included";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub eps_f: f64,
    pub eps_f2: f64,
    pub total: f64,
    pub excluded: String,
}

impl ErrorBudget {
    pub fn terms(&self) -> [(&'static str, f64); 6] {
        [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("eps4", self.eps4),
            ("eps_f", self.eps_f),
            ("eps_f2", self.eps_f2),
        ]
    }
}

fn terms(pt: &DesignPoint, cfg: &SessionConfig, src: &dyn Mod2Source) -> Result<[f64; 5]> {
    if !(pt.p1 > 0.0 && pt.p2 > 0.0 && pt.p_f > 0.0) {
        return Err(Error::Domain("powers must be positive".into()));
    }
    if !(pt.v > 0.0 && pt.n_c1 > 0.0) {
        return Err(Error::Domain("V and n_c1 must be positive".into()));
    }
    Ok([eps1(pt, cfg.ka), eps2(pt, src)?, eps3(pt, cfg.ka), eps4(pt, cfg)?, eps_f(pt)?])
}

/// `budget(..).total` without building the report.
pub fn budget_total(pt: &DesignPoint, cfg: &SessionConfig, src: &dyn Mod2Source) -> Result<f64> {
    let [e1, e2, e3, e4, ef] = terms(pt, cfg, src)?;
    Ok((e1 + e2 + e3 + e4 + 2.0 * ef).min(1.0))
}

pub fn budget(pt: &DesignPoint, cfg: &SessionConfig, src: &dyn Mod2Source) -> Result<ErrorBudget> {
    let [e1, e2, e3, e4, ef] = terms(pt, cfg, src)?;
    let total = (e1 + e2 + e3 + e4 + 2.0 * ef).min(1.0);
    Ok(ErrorBudget {
        eps1: e1,
        eps2: e2,
        eps3: e3,
        eps4: e4,
        eps_f: ef,
        eps_f2: ef,
        total,
        excluded: EXCLUDED_NOTE.to_string(),
    })
}

/// Budget of an integer design, exact channel statistics.
pub fn budget_for(params: &SchemeParams, cfg: &SessionConfig, src: &dyn Mod2Source) -> Result<ErrorBudget> {
    budget(&DesignPoint::from_params(params, cfg)?, cfg, src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::{awgn_error_prob, mod2_error_prob, ExactMod2, Mod2Table};
    use crate::op_phase::p_vstar_enumerated;
    use crate::params::reference_design;

    fn binom_f(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn eps1_limits_and_direct_sum() {
        assert_eq!(eps1_with(3, 1, 0.1), 0.0);
        assert_eq!(eps1_with(5, 5, 0.3), 0.0);
        let (t, ka, p) = (3usize, 100usize, 1.0f64 / 420.0);
        let direct = 1.0
            - (0..t)
                .map(|j| binom_f(ka - 1, j) * p.powi(j as i32) * (1.0 - p).powi((ka - 1 - j) as i32))
                .sum::<f64>();
        assert!((eps1_with(t, ka, p) - direct).abs() < 1e-12);
    }

    #[test]
    fn p_vstar_closed_form_matches_enumeration() {
        assert_eq!(p_vstar(3.0, 4), 3.0 / 8.0);
        assert_eq!(p_vstar(4.0, 8), 1.0 / 4.0);
        for v in 1..60usize {
            for n_p in [3usize, 4, 5, 7, 15, 31] {
                let a = p_vstar(v as f64, n_p);
                let b = p_vstar_enumerated(v, n_p);
                assert!((a - b).abs() < 1e-12, "V={v} n_p={n_p}: {a} vs {b}");
            }
        }
    }

    fn point(icr: bool, omt: bool) -> DesignPoint {
        let cfg = SessionConfig::reference(100);
        let mut p = reference_design(100).unwrap();
        p.icr = icr;
        p.omt = omt;
        DesignPoint::from_params(&p, &cfg).unwrap()
    }

    #[test]
    fn eps2_matches_direct_composition() {
        let pt = point(false, true);
        let want = mod2_error_prob(0.01137 * 420.0, 17.0, 10.0 / 17.0).unwrap();
        assert!((eps2(&pt, &ExactMod2).unwrap() - want).abs() < 1e-12);
        let icr = point(true, true);
        let want2 = want + mod2_error_prob(2.0 * 0.01137 * 420.0, 17.0, 10.0 / 17.0).unwrap();
        assert!((eps2(&icr, &ExactMod2).unwrap() - want2).abs() < 1e-12);
        let mut one = icr;
        one.d = 3;
        let mut one_op = one;
        one_op.icr = false;
        assert_eq!(eps2(&one, &ExactMod2).unwrap(), eps2(&one_op, &ExactMod2).unwrap());
    }

    #[test]
    fn eps3_variants() {
        let mut pt = point(false, false);
        pt.d = 3;
        assert_eq!(eps3(&pt, 100), 0.0);
        pt.d = 7;
        assert!((eps3(&pt, 100) - 3.0 * 2.0 / 30.0).abs() < 1e-15);
        let icr = point(true, false);
        assert_eq!(eps3(&icr, 1), 0.0);
        let mut small = point(true, true);
        small.v = 3.0;
        small.n_p = 4;
        assert!((eps3(&small, 2) - 3.0 / 32.0).abs() < 1e-15);
    }

    /// Two users picking positions independently under OMT: chance they
    /// coincide, by enumeration.
    #[test]
    fn eps3_omt_two_user_enumeration() {
        for (v, n_p) in [(3usize, 4usize), (5, 3), (7, 5), (420, 15)] {
            let mass: Vec<f64> = crate::op_phase::omt_mass(v, n_p).concat();
            let direct: f64 = mass.iter().map(|m| m * m).sum();
            let mut pt = point(true, true);
            pt.v = v as f64;
            pt.n_p = n_p;
            assert!((eps3(&pt, 2) - direct).abs() < 1e-12, "V={v} n_p={n_p}");
        }
    }

    #[test]
    fn feedback_and_data_terms() {
        let pt = point(true, true);
        let kf = feedback_bits(420, 15, 100).unwrap() as f64;
        let want = awgn_error_prob(0.01137 * 100.0, 1860.0, kf / 1860.0).unwrap();
        assert!((eps_f(&pt).unwrap() - want).abs() < 1e-15);
        let cfg = SessionConfig::reference(100);
        let e4 = eps4(&pt, &cfg).unwrap();
        let want4 = awgn_error_prob(1.137, 210.0, 88.0 / 210.0).unwrap();
        assert!((e4 - want4).abs() < 1e-15);
        assert!(e4 < eps4(&point(true, false), &cfg).unwrap());
        let mut zero = pt;
        zero.k_f = 0.0;
        assert_eq!(eps_f(&zero).unwrap(), 0.0);
    }

    #[test]
    fn budget_is_a_capped_sum_and_monotone_in_power() {
        let cfg = SessionConfig::reference(100);
        let pt = point(true, true);
        let b = budget(&pt, &cfg, &ExactMod2).unwrap();
        let sum: f64 = b.terms().iter().map(|t| t.1).sum();
        assert!((b.total - sum.min(1.0)).abs() < 1e-15);
        assert!(b.terms().iter().all(|t| t.1 <= b.total));
        let mut prev = b.clone();
        for k in 1..6 {
            let q = pt.with_power(0.01137 * 2f64.powi(k), 100);
            let next = budget(&q, &cfg, Mod2Table::shared()).unwrap();
            for (a, c) in prev.terms().iter().zip(next.terms().iter()) {
                assert!(c.1 <= a.1 + 1e-12, "{} grew", a.0);
            }
            prev = next;
        }
        assert!(budget(&pt.with_power(0.0, 100), &cfg, &ExactMod2).is_err());
    }

    #[test]
    fn omt_off_equals_on_for_power_of_two_positions() {
        let mut a = point(true, false);
        a.v = 64.0;
        a.n_p = 16;
        let mut b = a;
        b.omt = true;
        assert!((eps1(&a, 100) - eps1(&b, 100)).abs() < 1e-15);
    }

    #[test]
    fn terms_monotone_in_blocklength() {
        let cfg = SessionConfig::reference(100);
        let pt = point(true, true);
        for scale in [1.0, 1.2, 1.5, 2.0] {
            let mut a = pt;
            a.n_c1 *= scale;
            a.n_c2 *= scale;
            a.n_f *= scale;
            let mut b = a;
            b.n_c1 *= 1.1;
            b.n_c2 *= 1.1;
            b.n_f *= 1.1;
            assert!(eps2(&b, &ExactMod2).unwrap() <= eps2(&a, &ExactMod2).unwrap());
            assert!(eps4(&b, &cfg).unwrap() <= eps4(&a, &cfg).unwrap());
            assert!(eps_f(&b).unwrap() <= eps_f(&a).unwrap());
        }
    }
}
