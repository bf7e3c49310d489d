//! Parameter design: for each auxiliary code, minimize the common power `P`
//! over the relaxed lengths subject to the error budget, then fix the
//! integers one at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::best_min_distance;
use crate::error::{Error, Result};
use crate::error_model::{budget_total, DesignPoint, ErrorBudget};
use crate::fbl::{ExactMod2, Mod2Source, Mod2Table};
use crate::feedback::feedback_bits;
use crate::params::{SchemeParams, SessionConfig};

/// Largest power considered when searching for the required `P`.
pub const P_MAX: f64 = 1e3;
const P_MIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub config: SessionConfig,
    pub icr: bool,
    pub omt: bool,
    pub k_p_max: usize,
    pub n_p_max: usize,
    pub n_c1_min: usize,
    /// aux codes carried from the quick screen into the full pipeline
    pub shortlist: usize,
}

impl DesignProblem {
    pub fn new(config: SessionConfig) -> Self {
        Self {
            config,
            icr: true,
            omt: true,
            k_p_max: 16,
            n_p_max: 63,
            n_c1_min: 10,
            shortlist: 6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.n_c1_min == 0 {
            return Err(Error::InvalidConfig("n_c1_min must be at least 1".into()));
        }
        if self.k_p_max == 0 || self.n_p_max < 2 {
            return Err(Error::InvalidConfig("empty (k_p, n_p) grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub config: SessionConfig,
    pub params: SchemeParams,
    pub p: f64,
    pub eb_n0_db: f64,
    /// power of the fully relaxed solve for the chosen code
    pub relaxed_p: f64,
    pub k_f: u64,
    pub budget: ErrorBudget,
}

pub fn eb_n0(p: f64, n: usize, k: usize) -> f64 {
    10.0 * (p * n as f64 / (2.0 * k as f64)).log10()
}

/// Smallest `P` with `budget(P) <= eps`, `None` if even `P_MAX` fails.
/// `total` must be nondecreasing as `P` decreases.
pub fn required_power(total: impl Fn(f64) -> Result<f64>, eps: f64, tol: f64) -> Result<Option<f64>> {
    if total(P_MAX)? > eps {
        return Ok(None);
    }
    let (mut lo, mut hi) = (P_MIN.ln(), P_MAX.ln());
    if total(P_MIN)? <= eps {
        return Ok(Some(P_MIN));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = total(mid.exp())?;
        if t <= eps {
            hi = mid;
            if eps - t <= tol {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(Some(hi.exp()))
}

/// Code parameters under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxChoice {
    pub k_p: usize,
    pub n_p: usize,
    pub d: usize,
}

/// Lengths held fixed during a relaxed solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fixed {
    pub n_c1: Option<f64>,
    pub n_c2: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxed {
    pub p: f64,
    pub n_c1: f64,
    pub n_c2: f64,
    pub v: f64,
    pub n_f: f64,
}

struct Objective<'a> {
    problem: &'a DesignProblem,
    aux: AuxChoice,
    fixed: Fixed,
    src: &'a dyn Mod2Source,
}

impl Objective<'_> {
    /// Free coordinates live in log space.
    fn unpack(&self, x: &[f64]) -> (f64, f64, f64) {
        let mut it = x.iter().map(|v| v.exp());
        let n_c1 = self.fixed.n_c1.unwrap_or_else(|| it.next().unwrap());
        let n_c2 = self.fixed.n_c2.unwrap_or_else(|| it.next().unwrap());
        let v = self.fixed.v.unwrap_or_else(|| it.next().unwrap());
        (n_c1, n_c2, v)
    }

    fn pack(&self, n_c1: f64, n_c2: f64, v: f64) -> Vec<f64> {
        let mut x = Vec::new();
        if self.fixed.n_c1.is_none() {
            x.push(n_c1.ln());
        }
        if self.fixed.n_c2.is_none() {
            x.push(n_c2.ln());
        }
        if self.fixed.v.is_none() {
            x.push(v.ln());
        }
        x
    }

    fn point(&self, n_c1: f64, n_c2: f64, v: f64) -> DesignPoint {
        let cfg = &self.problem.config;
        let n_f = cfg.n as f64 - v * n_c1 - cfg.ka as f64 * n_c2;
        DesignPoint::relaxed(
            self.aux.n_p,
            self.aux.k_p,
            self.aux.d,
            n_c1,
            n_c2,
            v,
            n_f,
            1.0,
            cfg.ka,
            self.problem.icr,
            self.problem.omt,
        )
    }

    /// Amount by which the box constraints are violated (0 when feasible).
    fn violation(&self, n_c1: f64, n_c2: f64, v: f64) -> f64 {
        let cfg = &self.problem.config;
        let n_f = cfg.n as f64 - v * n_c1 - cfg.ka as f64 * n_c2;
        let min1 = self.problem.n_c1_min as f64;
        let mut viol = 0.0;
        viol += (min1 - n_c1).max(0.0) / min1;
        viol += (1.0 - n_f).max(0.0) / cfg.n as f64;
        viol += (cfg.ka as f64 - v * self.aux.n_p as f64).max(0.0) / cfg.ka as f64;
        viol += (1.0 - v).max(0.0);
        viol
    }

    fn power(&self, n_c1: f64, n_c2: f64, v: f64, tol: f64) -> Result<Option<f64>> {
        let pt = self.point(n_c1, n_c2, v);
        let cfg = &self.problem.config;
        required_power(
            |p| budget_total(&pt.with_power(p, cfg.ka), cfg, self.src),
            cfg.eps_target,
            tol,
        )
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (n_c1, n_c2, v) = self.unpack(x);
        let viol = self.violation(n_c1, n_c2, v);
        if viol > 0.0 {
            return P_MAX * (2.0 + viol);
        }
        match self.power(n_c1, n_c2, v, 1e-12) {
            Ok(Some(p)) => p,
            Ok(None) => {
                let pt = self.point(n_c1, n_c2, v).with_power(P_MAX, self.problem.config.ka);
                let excess = budget_total(&pt, &self.problem.config, self.src)
                    .map(|t| t - self.problem.config.eps_target)
                    .unwrap_or(1.0);
                P_MAX * (1.0 + excess.max(0.0))
            }
            Err(_) => P_MAX * 3.0,
        }
    }
}

/// Derivative-free simplex search. Returns the best vertex and its value.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize, ftol: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n == 0 {
        return (Vec::new(), f(x0));
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    for _ in 0..max_iter {
        simplex.sort_by(by_value);
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= ftol * best.abs().max(1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v.0[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = x_best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(by_value);
    simplex.swap_remove(0)
}

/// Deterministic starting points spread over the frame split.
fn starting_points(problem: &DesignProblem, aux: AuxChoice, extra: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let cfg = &problem.config;
    let n = cfg.n as f64;
    let ka = cfg.ka as f64;
    let m_p = (aux.n_p - aux.k_p) as f64;
    let min1 = problem.n_c1_min as f64;
    let mut out = Vec::new();
    for &f1 in &[0.15, 0.3] {
        for &ff in &[0.04, 0.08] {
            for &r in &[1.3, 2.2] {
                let n_c1 = (m_p * r).max(min1 * 1.05);
                let v = (n * f1 / n_c1).max(ka / aux.n_p as f64 * 1.5);
                let n2 = n - v * n_c1 - n * ff;
                out.push((n_c1, (n2 / ka).max(1.0), v));
            }
        }
    }
    out.extend_from_slice(extra);
    out
}

fn solve(
    problem: &DesignProblem,
    aux: AuxChoice,
    fixed: Fixed,
    src: &dyn Mod2Source,
    starts: &[(f64, f64, f64)],
    max_iter: usize,
) -> Result<Relaxed> {
    let obj = Objective {
        problem,
        aux,
        fixed,
        src,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for &(a, b, c) in starts {
        let x0 = obj.pack(
            fixed.n_c1.unwrap_or(a),
            fixed.n_c2.unwrap_or(b),
            fixed.v.unwrap_or(c),
        );
        let (x, fx) = nelder_mead(|x| obj.value(x), &x0, 0.15, max_iter, 1e-10);
        // a restart from the optimum escapes most collapsed simplices
        let (x, fx) = {
            let (x2, f2) = nelder_mead(|x| obj.value(x), &x, 0.05, max_iter, 1e-12);
            if f2 <= fx {
                (x2, f2)
            } else {
                (x, fx)
            }
        };
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (x, fx) = best.ok_or_else(|| Error::Infeasible("no starting point".into()))?;
    if fx >= P_MAX {
        return Err(Error::Infeasible(format!(
            "k_p={} n_p={}: budget not met at any start",
            aux.k_p, aux.n_p
        )));
    }
    let (n_c1, n_c2, v) = obj.unpack(&x);
    let cfg = &problem.config;
    Ok(Relaxed {
        p: fx,
        n_c1,
        n_c2,
        v,
        n_f: cfg.n as f64 - v * n_c1 - cfg.ka as f64 * n_c2,
    })
}

/// Locally optimal relaxed design for one auxiliary code with some lengths
/// held fixed.
pub fn relaxed_solve(problem: &DesignProblem, aux: AuxChoice, fixed: Fixed) -> Result<Relaxed> {
    problem.validate()?;
    let starts = starting_points(problem, aux, &[]);
    solve(problem, aux, fixed, Mod2Table::shared(), &starts, 400)
}

/// Required power of an integer design, exact channel statistics. The
/// interpolated table locates the answer, the exact statistics refine it.
pub fn final_power(params: &SchemeParams, cfg: &SessionConfig, src: &dyn Mod2Source) -> Result<Option<f64>> {
    let pt = DesignPoint::from_params(params, cfg)?;
    let total = |p: f64, s: &dyn Mod2Source| budget_total(&pt.with_power(p, cfg.ka), cfg, s);
    let Some(guess) = required_power(|p| total(p, Mod2Table::shared()), cfg.eps_target, 1e-12)? else {
        return required_power(|p| total(p, src), cfg.eps_target, 1e-10);
    };
    let (mut lo, mut hi) = (guess * 0.98, guess * 1.02);
    while total(hi, src)? > cfg.eps_target {
        if hi > P_MAX {
            return Ok(None);
        }
        lo = hi;
        hi *= 2.0;
    }
    while lo > P_MIN && total(lo, src)? <= cfg.eps_target {
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        let t = total(mid, src)?;
        if t <= cfg.eps_target {
            hi = mid;
            if cfg.eps_target - t <= 1e-10 {
                break;
            }
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    Ok(Some(hi))
}

struct Candidate {
    aux: AuxChoice,
    result: DesignResult,
}

fn integer_design(problem: &DesignProblem, aux: AuxChoice) -> Result<Candidate> {
    let cfg = &problem.config;
    let src = Mod2Table::shared();
    let starts = starting_points(problem, aux, &[]);
    let relaxed = solve(problem, aux, Fixed::default(), src, &starts, 400)?;
    let warm = |r: &Relaxed| vec![(r.n_c1, r.n_c2, r.v)];

    let n_c1 = relaxed.n_c1.round().max(problem.n_c1_min as f64);
    let fixed = Fixed {
        n_c1: Some(n_c1),
        ..Fixed::default()
    };
    let step1 = solve(problem, aux, fixed, src, &warm(&relaxed), 400)?;
    let fixed = Fixed {
        n_c2: Some(step1.n_c2.round().max(1.0)),
        ..fixed
    };
    let step2 = solve(problem, aux, fixed, src, &warm(&step1), 400)?;
    let v = step2.v.round().max(1.0);
    let n_c1 = n_c1 as usize;
    let n_c2 = fixed.n_c2.unwrap() as usize;
    let v = v as usize;
    let used = v * n_c1 + cfg.ka * n_c2;
    if used >= cfg.n {
        return Err(Error::Infeasible("rounded design leaves no feedback channel uses".into()));
    }
    let mut params = SchemeParams {
        k_p: aux.k_p,
        n_p: aux.n_p,
        d: aux.d,
        n_c1,
        n_c2,
        v,
        n_f: cfg.n - used,
        p1: 1.0,
        p2: 1.0,
        p_f: 1.0,
        icr: problem.icr,
        omt: problem.omt,
    };
    if v * aux.n_p < cfg.ka {
        return Err(Error::Infeasible("fewer positions than users".into()));
    }
    let p = final_power(&params, cfg, &ExactMod2)?
        .ok_or_else(|| Error::Infeasible("rounded design misses the target at every power".into()))?;
    params = params.with_power(p, cfg.ka);
    let budget = crate::error_model::budget_for(&params, cfg, &ExactMod2)?;
    // relaxed bound: the integer point itself is a valid start
    let bound = solve(
        problem,
        aux,
        Fixed::default(),
        src,
        &[(relaxed.n_c1, relaxed.n_c2, relaxed.v), (n_c1 as f64, n_c2 as f64, v as f64)],
        400,
    )
    .map(|r| r.p.min(relaxed.p))
    .unwrap_or(relaxed.p);
    Ok(Candidate {
        aux,
        result: DesignResult {
            config: *cfg,
            k_f: feedback_bits(v, aux.n_p, cfg.ka)?,
            eb_n0_db: eb_n0(p, cfg.n, cfg.k),
            relaxed_p: bound,
            params,
            p,
            budget,
        },
    })
}

/// Auxiliary codes worth evaluating: for each `n_p` and correction radius,
/// the largest `k_p` achieving it (a larger `k_p` at the same `T` shortens
/// the inner code and changes nothing else).
pub fn candidate_codes(problem: &DesignProblem) -> Vec<AuxChoice> {
    let ka = problem.config.ka;
    let mut out = Vec::new();
    for n_p in 3..=problem.n_p_max {
        let mut seen_t = Vec::new();
        for k_p in (1..n_p.min(problem.k_p_max + 1)).rev() {
            let Ok(e) = best_min_distance(n_p, k_p) else {
                continue;
            };
            let t = e.t();
            if t == 0 || seen_t.contains(&t) {
                continue;
            }
            // with more than Ka users' worth of radius nothing improves
            if t > ka && seen_t.iter().any(|&s| s >= ka) {
                continue;
            }
            seen_t.push(t);
            out.push(AuxChoice { k_p, n_p, d: e.d });
        }
    }
    out
}

/// Full design: screen every candidate code with a short relaxed solve,
/// run the complete pipeline on the best few and keep the lowest final
/// power (ties to smaller `n_p`, then smaller `k_p`).
pub fn design(problem: &DesignProblem) -> Result<DesignResult> {
    problem.validate()?;
    let codes = candidate_codes(problem);
    if codes.is_empty() {
        return Err(Error::Infeasible("no auxiliary code with T >= 1 in the grid".into()));
    }
    let src = Mod2Table::shared();
    let mut screened: Vec<(f64, AuxChoice)> = codes
        .par_iter()
        .filter_map(|&aux| {
            let starts = starting_points(problem, aux, &[]);
            let quick = [starts[0], starts[3], starts[5]];
            solve(problem, aux, Fixed::default(), src, &quick, 120)
                .ok()
                .map(|r| (r.p, aux))
        })
        .collect();
    if screened.is_empty() {
        return Err(Error::Infeasible("every auxiliary code misses the target".into()));
    }
    screened.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.n_p.cmp(&b.1.n_p)).then(a.1.k_p.cmp(&b.1.k_p)));
    screened.truncate(problem.shortlist.max(1));
    let finals: Vec<Candidate> = screened
        .par_iter()
        .filter_map(|&(_, aux)| integer_design(problem, aux).ok())
        .collect();
    finals
        .into_iter()
        .min_by(|a, b| {
            a.result
                .p
                .total_cmp(&b.result.p)
                .then(a.aux.n_p.cmp(&b.aux.n_p))
                .then(a.aux.k_p.cmp(&b.aux.k_p))
        })
        .map(|c| c.result)
        .ok_or_else(|| Error::Infeasible("no shortlisted code survived rounding".into()))
}

/// Full pipeline for one given auxiliary code.
pub fn design_for_code(problem: &DesignProblem, aux: AuxChoice) -> Result<DesignResult> {
    problem.validate()?;
    integer_design(problem, aux).map(|c| c.result)
}
