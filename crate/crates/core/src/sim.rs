//! Seeded Monte Carlo evaluation of whole sessions: the scheduling-request
//! phase is simulated exactly, the feedback and data phases draw their
//! failures from the analytic error probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::best_min_distance;
use crate::codes::{AuxCode, InnerCode};
use crate::error::{Error, Result};
use crate::error_model::{budget_for, DesignPoint};
use crate::fbl::ExactMod2;
use crate::op_phase::{
    build_occupancy_estimate, select_candidate, select_identity_omt, select_identity_uniform, select_inner_code,
    CodePair, INNER_DRAWS,
};
use crate::params::{Identity, SchemeParams, SessionConfig};

/// What a user does after failing to decode the feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackModel {
    /// transmits in a uniformly random slot, undetected
    #[default]
    Pessimistic,
    /// stays silent
    Silent,
}

/// Serialized scheme: parameters plus the concrete code matrices. Rows are
/// hex strings whose bit `t` (least significant first) is coordinate `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub session: SessionConfig,
    pub params: SchemeParams,
    pub inner_seed: u64,
    pub inner_generator: Vec<String>,
    pub aux_parity: Vec<String>,
}

pub fn rows_to_hex(rows: &[u64]) -> Vec<String> {
    rows.iter().map(|r| format!("{r:x}")).collect()
}

pub fn rows_from_hex(rows: &[String]) -> Result<Vec<u64>> {
    rows.iter()
        .map(|r| u64::from_str_radix(r, 16).map_err(|e| Error::InvalidCode(format!("bad hex row {r:?}: {e}"))))
        .collect()
}

impl Scheme {
    /// Picks the inner code from seeded random draws and takes the
    /// auxiliary code from the catalog.
    pub fn build(session: SessionConfig, params: SchemeParams, inner_seed: u64) -> Result<Self> {
        params.validate(&session)?;
        let entry = best_min_distance(params.n_p, params.k_p)?;
        if entry.d != params.d {
            return Err(Error::InvalidCode(format!(
                "catalog gives d={} for ({}, {}), parameters say {}",
                entry.d, params.n_p, params.k_p, params.d
            )));
        }
        let aux = entry.aux_code()?;
        let mut rng = ChaCha8Rng::seed_from_u64(inner_seed);
        let amplitude = (params.p1 * params.v as f64).sqrt();
        let inner = select_inner_code(params.m_p(), params.n_c1, amplitude, INNER_DRAWS, &mut rng)?;
        Ok(Self {
            session,
            params,
            inner_seed,
            inner_generator: rows_to_hex(inner.rows()),
            aux_parity: rows_to_hex(&aux.parity_rows()),
        })
    }

    pub fn codes(&self) -> Result<CodePair> {
        let p = &self.params;
        let inner = InnerCode::from_rows(rows_from_hex(&self.inner_generator)?, p.n_c1)?;
        let aux = AuxCode::from_parity_rows(&rows_from_hex(&self.aux_parity)?, p.n_p, p.d)?;
        CodePair::new(inner, aux, (p.p1 * p.v as f64).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub feedback_model: FeedbackModel,
    /// feedback failure probability; `None` takes the analytic value
    pub eps_f: Option<f64>,
    /// data failure probability; `None` takes the analytic value
    pub eps4: Option<f64>,
    pub phase1_noise: bool,
    /// draw a fresh random inner code for every session instead of using
    /// the scheme's fixed one
    #[serde(default)]
    pub inner_ensemble: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            feedback_model: FeedbackModel::Pessimistic,
            eps_f: None,
            eps4: None,
            phase1_noise: true,
            inner_ensemble: false,
        }
    }
}

impl SimOptions {
    /// Only the scheduling-request phase can fail.
    pub fn phase1_only() -> Self {
        Self {
            eps_f: Some(0.0),
            eps4: Some(0.0),
            ..Self::default()
        }
    }
}

/// Why a user's message was lost, first applicable reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cause {
    /// more than `T` users in its sub-block
    SubblockLoss,
    /// another user picked the same position
    Collision,
    /// the decode under the true user count missed the user
    Decode,
    /// the true-count decode had the user but another count was selected
    Misselection,
    /// detected, then removed to bring the estimate down to `Ka`
    Erasure,
    /// own feedback failure, or a slot hit by a user whose feedback failed
    Feedback,
    /// data-phase decoding failure
    Data,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseTally {
    pub subblock_loss: u64,
    pub collision: u64,
    pub decode: u64,
    pub misselection: u64,
    pub erasure: u64,
    pub feedback: u64,
    pub data: u64,
}

impl CauseTally {
    fn add(&mut self, c: Cause) {
        match c {
            Cause::SubblockLoss => self.subblock_loss += 1,
            Cause::Collision => self.collision += 1,
            Cause::Decode => self.decode += 1,
            Cause::Misselection => self.misselection += 1,
            Cause::Erasure => self.erasure += 1,
            Cause::Feedback => self.feedback += 1,
            Cause::Data => self.data += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.subblock_loss + self.collision + self.decode + self.misselection + self.erasure + self.feedback + self.data
    }
}

/// Per-user state after the feedback phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome {
    /// `None` if the user reached the data phase alone in its slot
    pub lost: Option<Cause>,
    /// uniform draw compared against the data failure probability
    pub data_draw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub users: Vec<UserOutcome>,
    /// sub-blocks where a wrong user count was accepted
    pub misselected_blocks: usize,
}

fn split_rng(seed: u64, session: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&session.to_le_bytes());
    key[16..24].copy_from_slice(&lane.to_le_bytes());
    key[24..].copy_from_slice(b"mra-sim\0");
    ChaCha8Rng::from_seed(key)
}

const LANE_USERS: u64 = u64::MAX;
const LANE_LATER: u64 = u64::MAX - 1;
const LANE_CODE: u64 = u64::MAX - 2;

/// Draws identities for one session.
pub fn draw_identities<R: Rng + ?Sized>(params: &SchemeParams, ka: usize, rng: &mut R) -> Result<Vec<Identity>> {
    (0..ka)
        .map(|_| {
            if params.omt {
                let prefix = rng.next_u64() & ((1u64 << params.k1()) - 1);
                select_identity_omt(prefix, params.v, params.n_p, rng)
            } else {
                Ok(select_identity_uniform(params.v, params.n_p, rng))
            }
        })
        .collect()
}

/// One session with given identities. `rng_for(lane)` supplies independent
/// generators for each sub-block (`lane = v`) and for the later phases.
pub fn run_session_with(
    params: &SchemeParams,
    codes: &CodePair,
    ids: &[Identity],
    opts: &SimOptions,
    eps_f: f64,
    mut rng_for: impl FnMut(u64) -> ChaCha8Rng,
) -> Result<SessionOutcome> {
    let (v_count, n_p, t) = (params.v, params.n_p, codes.t());
    let ka = ids.len();
    let n_c1 = codes.n_c1();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); v_count];
    for (i, id) in ids.iter().enumerate() {
        if id.v >= v_count || id.u >= n_p {
            return Err(Error::Domain(format!("identity {id:?} outside {v_count} x {n_p}")));
        }
        members[id.v].push(i);
    }
    let mut results = Vec::with_capacity(v_count);
    // per user: did the decode under the true count recover it
    let mut true_count_ok = vec![false; ka];
    let mut misselected_blocks = 0;
    for (v, users) in members.iter().enumerate() {
        let mut rng = rng_for(v as u64);
        let mut y = vec![0.0; n_c1];
        for &i in users {
            codes.add_signal(ids[i].u, 1.0, &mut y);
        }
        if opts.phase1_noise {
            for s in y.iter_mut() {
                *s += rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        let cands = codes.candidates(&y, params.icr);
        let decoded = select_candidate(&cands);
        if users.len() <= t {
            let c = &cands[users.len()];
            if c.error.is_none() {
                for &i in users {
                    true_count_ok[i] = c.singles.contains(&ids[i].u);
                }
            }
        }
        if decoded.t_star.is_some_and(|t| t != users.len()) {
            misselected_blocks += 1;
        }
        results.push(decoded);
    }
    let mut rng = rng_for(LANE_LATER);
    let est = build_occupancy_estimate(&results, n_p, ka, &mut rng)?;
    let position = |i: usize| ids[i].s(v_count);
    let mut shared = vec![0usize; v_count * n_p];
    for i in 0..ka {
        shared[position(i)] += 1;
    }

    // slot owned by position, users transmitting in each slot
    let mut slot_users: Vec<Vec<usize>> = vec![Vec::new(); ka];
    let mut lost: Vec<Option<Cause>> = vec![None; ka];
    let mut feedback_failed = vec![false; ka];
    for (i, failed) in feedback_failed.iter_mut().enumerate() {
        let fb_fail = rng.random::<f64>() < eps_f;
        *failed = fb_fail;
        let own_slot = crate::feedback::user_find_slot(&est.s_hat, position(i));
        if fb_fail {
            if opts.feedback_model == FeedbackModel::Pessimistic {
                slot_users[rng.random_range(0..ka)].push(i);
            }
        } else if let Some(slot) = own_slot {
            slot_users[slot].push(i);
        }
    }
    let data_draws: Vec<f64> = (0..ka).map(|_| rng.random::<f64>()).collect();
    for i in 0..ka {
        let s = position(i);
        let id = ids[i];
        let cause = if members[id.v].len() > t {
            Some(Cause::SubblockLoss)
        } else if shared[s] > 1 {
            Some(Cause::Collision)
        } else if !est.s_hat[s] {
            let in_singles = results[id.v].singles.contains(&id.u);
            Some(if in_singles {
                Cause::Erasure
            } else if true_count_ok[i] {
                Cause::Misselection
            } else {
                Cause::Decode
            })
        } else if feedback_failed[i] {
            Some(Cause::Feedback)
        } else {
            let slot = crate::feedback::user_find_slot(&est.s_hat, s).expect("position is occupied");
            (slot_users[slot].len() > 1).then_some(Cause::Feedback)
        };
        lost[i] = cause;
    }
    Ok(SessionOutcome {
        users: lost
            .into_iter()
            .zip(data_draws)
            .map(|(lost, data_draw)| UserOutcome { lost, data_draw })
            .collect(),
        misselected_blocks,
    })
}

/// Everything a batch of sessions needs, built once.
pub struct Simulator {
    pub scheme: Scheme,
    pub codes: CodePair,
    pub opts: SimOptions,
    pub eps_f: f64,
    pub eps4: f64,
}

impl Simulator {
    pub fn new(scheme: Scheme, opts: SimOptions) -> Result<Self> {
        scheme.params.validate(&scheme.session)?;
        let codes = scheme.codes()?;
        let b = budget_for(&scheme.params, &scheme.session, &ExactMod2)?;
        let check = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(Error::Domain(format!("{name} = {p} is not a probability")))
            }
        };
        let eps_f = check("eps_f", opts.eps_f.unwrap_or(b.eps_f))?;
        let eps4 = check("eps4", opts.eps4.unwrap_or(b.eps4))?;
        Ok(Self {
            scheme,
            codes,
            opts,
            eps_f,
            eps4,
        })
    }

    pub fn run_session(&self, seed: u64, index: u64) -> Result<SessionOutcome> {
        let params = &self.scheme.params;
        let mut rng = split_rng(seed, index, LANE_USERS);
        let ids = draw_identities(params, self.scheme.session.ka, &mut rng)?;
        let drawn;
        let codes = if self.opts.inner_ensemble {
            let inner = InnerCode::random(params.m_p(), params.n_c1, &mut split_rng(seed, index, LANE_CODE))?;
            drawn = CodePair::new(inner, self.codes.aux().clone(), self.codes.amplitude())?;
            &drawn
        } else {
            &self.codes
        };
        run_session_with(params, codes, &ids, &self.opts, self.eps_f, |lane| {
            split_rng(seed, index, lane)
        })
    }

    /// Sessions `0..trials`, in order; parallel execution does not change
    /// the result.
    pub fn run(&self, trials: u64, seed: u64) -> Result<Vec<SessionOutcome>> {
        if trials == 0 {
            return Err(Error::Domain("trials must be positive".into()));
        }
        (0..trials).into_par_iter().map(|i| self.run_session(seed, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub trials: u64,
    pub ka: usize,
    pub seed: u64,
    pub user_errors: u64,
    pub pupe: f64,
    pub ci95: f64,
    pub causes: CauseTally,
    /// users lost to misselection or erasure, the terms without a closed form
    pub unmodeled_rate: f64,
    pub misselected_block_rate: f64,
    pub eps_f: f64,
    pub eps4: f64,
    pub options: SimOptions,
    pub scheme: Scheme,
}

/// Aggregates outcomes against a data failure probability `eps4`.
pub fn summarize(sim: &Simulator, outcomes: &[SessionOutcome], eps4: f64, seed: u64) -> SessionReport {
    let mut causes = CauseTally::default();
    let mut blocks = 0usize;
    for o in outcomes {
        blocks += o.misselected_blocks;
        for u in &o.users {
            match u.lost {
                Some(c) => causes.add(c),
                None if u.data_draw < eps4 => causes.add(Cause::Data),
                None => {}
            }
        }
    }
    let ka = sim.scheme.session.ka;
    let trials = outcomes.len() as u64;
    let users = (trials * ka as u64) as f64;
    let errors = causes.total();
    let pupe = errors as f64 / users;
    SessionReport {
        trials,
        ka,
        seed,
        user_errors: errors,
        pupe,
        ci95: ci95(pupe, users),
        causes,
        unmodeled_rate: (causes.misselection + causes.erasure) as f64 / users,
        misselected_block_rate: blocks as f64 / (trials as f64 * sim.scheme.params.v as f64),
        eps_f: sim.eps_f,
        eps4,
        options: sim.opts,
        scheme: sim.scheme.clone(),
    }
}

/// Normal-approximation 95% half-width of a mean of `n` indicators.
pub fn ci95(p: f64, n: f64) -> f64 {
    1.96 * (p * (1.0 - p) / n).sqrt()
}

pub fn estimate_pupe(scheme: &Scheme, opts: SimOptions, trials: u64, seed: u64) -> Result<SessionReport> {
    let sim = Simulator::new(scheme.clone(), opts)?;
    let outcomes = sim.run(trials, seed)?;
    Ok(summarize(&sim, &outcomes, sim.eps4, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p2: f64,
    pub steps: usize,
    pub report: SessionReport,
}

/// Adjusts `P2` until the simulated error rate is within its confidence
/// half-width of `target`. The same sessions are reused at every `P2`, so
/// the error count is monotone in `P2`.
pub fn calibrate_p2(scheme: &Scheme, opts: SimOptions, target: f64, trials: u64, seed: u64) -> Result<Calibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target {target} not in (0, 1)")));
    }
    let sim = Simulator::new(scheme.clone(), SimOptions { eps4: None, ..opts })?;
    let outcomes = sim.run(trials, seed)?;
    let cfg = sim.scheme.session;
    let base = DesignPoint::from_params(&sim.scheme.params, &cfg)?;
    let eval = |p2: f64| -> Result<SessionReport> {
        let eps4 = crate::error_model::eps4(&DesignPoint { p2, ..base }, &cfg)?;
        Ok(summarize(&sim, &outcomes, eps4, seed))
    };
    let close = |r: &SessionReport| (r.pupe - target).abs() <= r.ci95;
    let p2 = sim.scheme.params.p2;
    let start = eval(p2)?;
    if close(&start) {
        return Ok(Calibration {
            p2,
            steps: 0,
            report: start,
        });
    }
    // bracket in log power: pupe falls as P2 grows
    let (mut lo, mut hi) = if start.pupe > target {
        let mut hi = p2;
        let mut k = 0;
        loop {
            hi *= 2.0;
            k += 1;
            if eval(hi)?.pupe <= target {
                break (hi / 2.0, hi);
            }
            if k > 40 {
                return Err(Error::Infeasible(format!(
                    "error rate {} stays above {target} for any P2",
                    eval(hi)?.pupe
                )));
            }
        }
    } else {
        let mut lo = p2;
        let mut k = 0;
        loop {
            lo /= 2.0;
            k += 1;
            if eval(lo)?.pupe >= target || k > 60 {
                break (lo, lo * 2.0);
            }
        }
    };
    let mut steps = 0;
    let mut best = (hi, eval(hi)?);
    while steps < 100 {
        steps += 1;
        let mid = (lo * hi).sqrt();
        let r = eval(mid)?;
        if close(&r) {
            best = (mid, r);
            break;
        }
        if r.pupe > target {
            lo = mid;
        } else {
            best = (mid, r);
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-9 {
            break;
        }
    }
    Ok(Calibration {
        p2: best.0,
        steps,
        report: best.1,
    })
}
