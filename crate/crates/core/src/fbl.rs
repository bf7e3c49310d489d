//! Normal approximations for finite-blocklength coding over the real AWGN
//! channel and the binary-input AWGN channel observed modulo 2.
//!
//! Rates and blocklengths are real-valued here; callers that need integer
//! designs round before calling.

use std::f64::consts::{LN_2, LOG2_E, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};

/// Capacity and dispersion of a channel, in bits and squared bits per use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub capacity: f64,
    pub dispersion: f64,
}

/// Gaussian tail probability `Pr[N(0,1) > x]`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_func`] on the open unit interval.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("q_inv requires 0 < p < 1, got {p}")));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_func(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..20 {
        let slope = std_normal_pdf(x);
        if slope == 0.0 {
            break;
        }
        let step = (q_func(x) - p) / slope;
        let next = (x + step).clamp(lo, hi);
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Capacity and dispersion of the real AWGN channel at linear SNR `snr`.
pub fn awgn_stats(snr: f64) -> Result<ChannelStats> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(domain(format!("AWGN SNR must be positive, got {snr}")));
    }
    let capacity = 0.5 * (1.0 + snr).log2();
    let dispersion = snr / 2.0 * (snr + 2.0) / ((snr + 1.0) * (snr + 1.0)) * LOG2_E * LOG2_E;
    Ok(ChannelStats {
        capacity,
        dispersion,
    })
}

/// `Q((C - rate) sqrt(n / V))` with the degenerate zero-dispersion case
/// resolved to a step function.
pub fn normal_approx_error(stats: ChannelStats, n: f64, rate: f64) -> f64 {
    let gap = stats.capacity - rate;
    if stats.dispersion <= 0.0 {
        return if gap > 0.0 {
            0.0
        } else if gap < 0.0 {
            1.0
        } else {
            0.5
        };
    }
    q_func(gap * (n / stats.dispersion).sqrt())
}

fn check_len_rate(n: f64, rate: f64) -> Result<()> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(domain(format!("blocklength must be positive, got {n}")));
    }
    if !rate.is_finite() || rate < 0.0 {
        return Err(domain(format!("rate must be finite and nonnegative, got {rate}")));
    }
    Ok(())
}

/// Block error probability of an AWGN code of length `n` and rate `rate`
/// under the normal approximation.
pub fn awgn_error_prob(snr: f64, n: f64, rate: f64) -> Result<f64> {
    check_len_rate(n, rate)?;
    Ok(normal_approx_error(awgn_stats(snr)?, n, rate))
}

fn wrap_terms(sigma2: f64) -> i32 {
    // 8.5 standard deviations on each side leaves a relative tail below 1e-16.
    let reach = (8.5 * sigma2.sqrt() / 2.0).ceil() as i32 + 1;
    reach.max(3)
}

/// Natural log of the wrapped Gaussian density on `[0, 2)`. Narrow
/// densities sum images with a log-sum-exp so that tiny variances do not
/// underflow; wide ones use the Fourier series, whose terms decay as
/// `exp(-pi^2 k^2 sigma2 / 2)`.
pub fn wrapped_gauss_log_pdf(z: f64, sigma2: f64) -> f64 {
    if sigma2 > 1.0 {
        let mut acc = 1.0;
        for k in 1.. {
            let w = (-PI * PI * (k * k) as f64 * sigma2 / 2.0).exp();
            if w < 1e-18 {
                break;
            }
            acc += 2.0 * w * (PI * k as f64 * z).cos();
        }
        return (0.5 * acc).ln();
    }
    let m_max = wrap_terms(sigma2);
    let inv = 1.0 / (2.0 * sigma2);
    // The nearest image dominates; start from it.
    let base = z - 2.0 * (z / 2.0).round();
    let lead = -base * base * inv;
    let mut acc = 0.0;
    for m in -m_max..=m_max {
        let t = base + 2.0 * m as f64;
        acc += (-t * t * inv - lead).exp();
    }
    lead + acc.ln() - 0.5 * (2.0 * PI * sigma2).ln()
}

/// Density of `(N(0, sigma2)) mod 2` at `z`.
pub fn wrapped_gauss_pdf(z: f64, sigma2: f64) -> f64 {
    wrapped_gauss_log_pdf(z, sigma2).exp()
}

const MOD2_MIN_PANELS: usize = 1 << 14;
const MOD2_MAX_PANELS: usize = 1 << 20;
const MOD2_TOL: f64 = 1e-8;

/// Capacity and dispersion of the information density of the binary-input
/// mod-2 channel with noise variance `1 / (4 snr)`.
///
/// The integrand is smooth and 2-periodic, so the periodic trapezoidal rule
/// converges geometrically; the estimate is accepted once halving the grid
/// moves both moments by less than `1e-8`.
pub fn mod2_stats(snr: f64) -> Result<ChannelStats> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(domain(format!("mod-2 SNR must be positive, got {snr}")));
    }
    let sigma2 = 1.0 / (4.0 * snr);
    let mut panels = MOD2_MIN_PANELS;
    loop {
        let fine = mod2_moments(sigma2, panels, 1);
        let coarse = mod2_moments(sigma2, panels, 2);
        if (fine.capacity - coarse.capacity).abs() <= MOD2_TOL
            && (fine.dispersion - coarse.dispersion).abs() <= MOD2_TOL
        {
            return Ok(ChannelStats {
                capacity: fine.capacity.clamp(0.0, 1.0),
                dispersion: fine.dispersion.max(0.0),
            });
        }
        if panels >= MOD2_MAX_PANELS {
            return Err(Error::Numeric(format!(
                "mod-2 moments did not converge at snr {snr}"
            )));
        }
        panels *= 2;
    }
}

/// Trapezoidal moments on every `stride`-th node of a `panels`-point grid.
fn mod2_moments(sigma2: f64, panels: usize, stride: usize) -> ChannelStats {
    let h = 2.0 / panels as f64 * stride as f64;
    let nodes = panels / stride;
    let mut weights = Vec::with_capacity(nodes);
    let mut dens = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let z = j as f64 * h;
        let lp = wrapped_gauss_log_pdf(z, sigma2);
        let shifted = z - 1.0;
        let lq = wrapped_gauss_log_pdf(if shifted < 0.0 { shifted + 2.0 } else { shifted }, sigma2);
        // i(z) = 1 - log2(1 + q/p)
        let d = lq - lp;
        let softplus = if d > 30.0 { d + (-d).exp().ln_1p() } else { d.exp().ln_1p() };
        weights.push(lp.exp() * h);
        dens.push(1.0 - softplus / LN_2);
    }
    let mean: f64 = weights.iter().zip(&dens).map(|(w, i)| w * i).sum();
    let var: f64 = weights
        .iter()
        .zip(&dens)
        .map(|(w, i)| if *w > 0.0 { w * (i - mean) * (i - mean) } else { 0.0 })
        .sum();
    ChannelStats {
        capacity: mean,
        dispersion: var,
    }
}

/// Block error probability of a binary linear code over the mod-2 channel
/// under the normal approximation.
pub fn mod2_error_prob(snr: f64, n: f64, rate: f64) -> Result<f64> {
    check_len_rate(n, rate)?;
    Ok(normal_approx_error(mod2_stats(snr)?, n, rate))
}

/// Bhattacharyya parameter `∫ sqrt(p(z) p(z − 1)) dz` of the mod-2 channel.
pub fn mod2_bhattacharyya(snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(domain(format!("mod-2 SNR must be positive, got {snr}")));
    }
    let sigma2 = 1.0 / (4.0 * snr);
    let nodes = 1 << 14;
    let h = 2.0 / nodes as f64;
    let sum: f64 = (0..nodes)
        .map(|j| {
            let z = j as f64 * h;
            let w = if z >= 1.0 { z - 1.0 } else { z + 1.0 };
            (0.5 * (wrapped_gauss_log_pdf(z, sigma2) + wrapped_gauss_log_pdf(w, sigma2))).exp()
        })
        .sum();
    Ok((sum * h).min(1.0))
}

/// Something that can produce mod-2 channel statistics for a given SNR.
pub trait Mod2Source: Sync {
    fn mod2(&self, snr: f64) -> Result<ChannelStats>;
}

/// Direct numerical integration on every call.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMod2;

impl Mod2Source for ExactMod2 {
    fn mod2(&self, snr: f64) -> Result<ChannelStats> {
        mod2_stats(snr)
    }
}

/// Cubic Hermite interpolation of [`mod2_stats`] on a uniform grid in
/// `ln snr`. Used by the optimizer, which evaluates the budget millions of
/// times.
#[derive(Debug, Clone)]
pub struct Mod2Table {
    ln_lo: f64,
    step: f64,
    capacity: Vec<f64>,
    dispersion: Vec<f64>,
}

impl Mod2Table {
    pub const DEFAULT_LO: f64 = 1e-4;
    pub const DEFAULT_HI: f64 = 1e4;
    pub const DEFAULT_POINTS: usize = 1201;

    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && points >= 4) {
            return Err(domain("bad Mod2Table range"));
        }
        let ln_lo = lo.ln();
        let step = (hi.ln() - ln_lo) / (points - 1) as f64;
        let mut capacity = Vec::with_capacity(points);
        let mut dispersion = Vec::with_capacity(points);
        for j in 0..points {
            let s = mod2_stats((ln_lo + step * j as f64).exp())?;
            capacity.push(s.capacity);
            dispersion.push(s.dispersion);
        }
        Ok(Self {
            ln_lo,
            step,
            capacity,
            dispersion,
        })
    }

    /// The process-wide default table, built on first use.
    pub fn shared() -> &'static Mod2Table {
        static TABLE: std::sync::OnceLock<Mod2Table> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| {
            Mod2Table::new(Self::DEFAULT_LO, Self::DEFAULT_HI, Self::DEFAULT_POINTS)
                .expect("default mod-2 table")
        })
    }

    fn interp(values: &[f64], idx: usize, t: f64) -> f64 {
        let last = values.len() - 1;
        let at = |i: isize| values[i.clamp(0, last as isize) as usize];
        let i = idx as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // Catmull-Rom
        let t2 = t * t;
        let t3 = t2 * t;
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
    }
}

impl Mod2Source for Mod2Table {
    fn mod2(&self, snr: f64) -> Result<ChannelStats> {
        if snr.is_nan() || snr <= 0.0 {
            return Err(domain(format!("mod-2 SNR must be positive, got {snr}")));
        }
        let pos = (snr.ln() - self.ln_lo) / self.step;
        if pos < 0.0 {
            // the channel is already useless at the bottom of the grid
            return Ok(ChannelStats {
                capacity: self.capacity[0],
                dispersion: self.dispersion[0],
            });
        }
        let last = self.capacity.len() - 1;
        if pos >= last as f64 {
            return Ok(ChannelStats {
                capacity: self.capacity[last],
                dispersion: self.dispersion[last],
            });
        }
        let idx = pos.floor() as usize;
        let t = pos - idx as f64;
        Ok(ChannelStats {
            capacity: Self::interp(&self.capacity, idx, t).clamp(0.0, 1.0),
            dispersion: Self::interp(&self.dispersion, idx, t).max(0.0),
        })
    }
}
