//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mra_core::catalog::{best_min_distance, entries};
use mra_core::codes::InnerCode;
use mra_core::error_model::{budget_for, p_vstar};
use mra_core::fbl::{mod2_stats, q_func, q_inv, wrapped_gauss_pdf, ExactMod2};
use mra_core::feedback::{rank, unrank};
use mra_core::op_phase::{omt_mass, p_vstar_enumerated, CodePair, HardDecoder, InnerDecoder};
use mra_core::optimizer::{design, design_for_code, eb_n0, AuxChoice, DesignProblem};
use mra_core::params::{reference_design, SessionConfig, REFERENCE_KA};
use mra_core::sim::{summarize, Scheme, SimOptions, Simulator};

type Check = fn() -> (bool, String);

const SEED: u64 = 20200101;
const SESSIONS: u64 = 10_000;

fn main() {
    let checks: [(&str, Check); 10] = [
        ("table reproduction by the optimizer", table_reproduction),
        ("Eb/N0 arithmetic", eb_n0_values),
        ("analytic budget of the reference designs", budget_consistency),
        ("collision resolution property suite", collision_resolution_suite),
        ("worked collision-resolution example", worked_example),
        ("OMT identity distribution", omt_distribution),
        ("formula vs simulation, first phase", formula_vs_simulation),
        ("end-to-end per-user error", end_to_end),
        ("enumerative codec", enumerative_codec),
        ("finite-blocklength oracles", fbl_oracles),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name} ({:.1}s): {detail}", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn reference_power(ka: usize) -> f64 {
    reference_design(ka).unwrap().p1
}

fn table_reproduction() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for ka in [50, 100, 300] {
        let problem = DesignProblem::new(SessionConfig::reference(ka));
        let reference = reference_design(ka).unwrap();
        let table_p = reference.p1;
        let start = Instant::now();
        let r = design(&problem).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let p = &r.params;
        let same_code = (p.k_p, p.n_p, p.d) == (reference.k_p, reference.n_p, reference.d);
        let rel = r.p / table_p - 1.0;
        let pass_global = ((same_code && rel.abs() <= 0.10) || r.p < table_p) && secs < 600.0 && r.budget.total <= 0.05 + 1e-9;
        // the pipeline restricted to the published code must land on the published power
        let fixed = design_for_code(
            &problem,
            AuxChoice {
                k_p: reference.k_p,
                n_p: reference.n_p,
                d: reference.d,
            },
        )
        .unwrap();
        let rel_fixed = fixed.p / table_p - 1.0;
        let pass_fixed = rel_fixed.abs() <= 0.10;
        ok &= pass_global && pass_fixed;
        parts.push(format!(
            "Ka={ka} code ({},{},{}) P={:.5} ({:+.1}%, {secs:.0}s); published code P={:.5} ({:+.1}%)",
            p.k_p,
            p.n_p,
            p.d,
            r.p,
            100.0 * rel,
            fixed.p,
            100.0 * rel_fixed
        ));
    }
    (ok, parts.join("; "))
}

fn eb_n0_values() -> (bool, String) {
    let expect = [(50, 1.74), (100, 2.32), (300, 5.63)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (ka, db) in expect {
        let got = eb_n0(reference_power(ka), 30000, 100);
        ok &= (got - db).abs() <= 0.02;
        parts.push(format!("Ka={ka} {got:.3} dB (expected {db})"));
    }
    (ok, parts.join(", "))
}

fn budget_consistency() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for ka in REFERENCE_KA {
        let b = budget_for(&reference_design(ka).unwrap(), &SessionConfig::reference(ka), &ExactMod2).unwrap();
        ok &= (0.03..=0.06).contains(&b.total);
        parts.push(format!("Ka={ka} {:.4}", b.total));
    }
    (ok, parts.join(", "))
}

fn table_size(n: usize, t: usize) -> u128 {
    let mut c: u128 = 1;
    let mut sum = 1;
    for i in 1..=t {
        c = c * (n - i + 1) as u128 / i as u128;
        sum += c;
    }
    sum
}

const TABLE_LIMIT: u128 = 1 << 20;
const INSTANCES: usize = 10_000;

/// Multiplicities `t` draws: either uniform with replacement over all
/// indices, or concentrated on a pool of at most three indices.
fn draw_multiset(rng: &mut ChaCha8Rng, n_p: usize, t: usize, concentrated: bool) -> Vec<usize> {
    if concentrated && t > 0 {
        let pool: Vec<usize> = (0..rng.random_range(1..=t.min(3))).map(|_| rng.random_range(0..n_p)).collect();
        (0..t).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    } else {
        (0..t).map(|_| rng.random_range(0..n_p)).collect()
    }
}

fn collision_resolution_suite() -> (bool, String) {
    let mut tested = 0;
    let mut instances = 0usize;
    let mut failures = Vec::new();
    let (mut no_construction, mut too_large) = (0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for e in entries() {
        if e.t() == 0 {
            continue;
        }
        if e.construction.is_none() {
            no_construction += 1;
            continue;
        }
        if table_size(e.n, e.t()) > TABLE_LIMIT {
            too_large += 1;
            continue;
        }
        let aux = e.aux_code().unwrap();
        let m = aux.m();
        let n_c1 = (m + 4).min(64);
        let inner = InnerCode::random(m, n_c1, &mut rng).unwrap();
        let dec = InnerDecoder::HardDecision(HardDecoder::new(&inner).unwrap());
        let amplitude = 1.0 + rng.random::<f64>();
        let codes = CodePair::with_decoder(inner, aux, amplitude, dec).unwrap();
        tested += 1;
        for i in 0..INSTANCES {
            let t = rng.random_range(0..=e.t());
            let us = draw_multiset(&mut rng, e.n, t, i % 2 == 1);
            let mut y = vec![0.0; n_c1];
            for &u in &us {
                codes.add_signal(u, 1.0, &mut y);
            }
            let mut once: Vec<usize> = (0..e.n).filter(|u| us.iter().filter(|&&x| x == *u).count() == 1).collect();
            once.sort_unstable();
            let ok = match codes.icr_decode(&y, t) {
                Ok(lists) => {
                    let (mut singles, residual) = codes.finalize_lists(&lists, &y);
                    singles.sort_unstable();
                    let tol = 1e-9 * amplitude * (1 + t) as f64;
                    singles == once && residual.iter().all(|r| r.abs() <= tol)
                }
                Err(_) => false,
            };
            instances += 1;
            if !ok && failures.len() < 5 {
                failures.push(format!("({},{},{}) users {us:?}", e.n, e.k, e.d));
            }
        }
    }
    let reference_code = best_min_distance(15, 5).map(|e| e.construction.is_some()).unwrap_or(false);
    let pass = failures.is_empty() && tested > 0 && reference_code;
    (
        pass,
        format!(
            "{tested} codes x {INSTANCES} instances = {instances}, {} failures; skipped {no_construction} without \
             construction and {too_large} with syndrome tables above 2^20 entries{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!("; first: {}", failures.join(" | ")) }
        ),
    )
}

fn worked_example() -> (bool, String) {
    let aux = best_min_distance(15, 5).unwrap().aux_code().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let inner = InnerCode::random(10, 17, &mut rng).unwrap();
    let codes = CodePair::new(inner, aux, (0.01137f64 * 420.0).sqrt()).unwrap();
    let (u1, u2, u3) = (1, 4, 11);
    let z: Vec<f64> = (0..17).map(|_| 0.02 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut y = z.clone();
    for (u, mult) in [(u1, 3), (u2, 4), (u3, 1)] {
        for _ in 0..mult {
            codes.add_signal(u, 1.0, &mut y);
        }
    }
    let lists = codes.icr_decode(&y, 8).unwrap();
    let (singles, residual) = codes.finalize_lists(&lists, &y);
    let err = residual.iter().zip(&z).map(|(r, z)| (r - z).abs()).fold(0.0, f64::max);
    let pass = lists == vec![vec![u1, u3], vec![u1], vec![u2]] && singles == vec![u3] && err < 1e-12;
    (pass, format!("lists {lists:?}, singles {singles:?}, max |residual - z| = {err:.1e}"))
}

fn omt_distribution() -> (bool, String) {
    let (a, b) = (1.0 / 16.0, 1.0 / 8.0);
    let expect = vec![vec![a, a, b, a], vec![a, b, b, a], vec![a, b, a, a]];
    let got = omt_mass(3, 4);
    let closed = p_vstar(3.0, 4);
    let enumerated = p_vstar_enumerated(3, 4);
    let pass = got == expect && closed == 0.375 && enumerated == 0.375;
    (pass, format!("mass {got:?}, p_vstar {closed} (enumerated {enumerated})"))
}

/// Mean per-user error and its Monte Carlo standard deviation across sessions.
fn session_mean_sd(sim: &Simulator, trials: u64, seed: u64) -> (f64, f64, f64) {
    let outcomes = sim.run(trials, seed).unwrap();
    let ka = sim.scheme.session.ka as f64;
    let rates: Vec<f64> = outcomes
        .iter()
        .map(|o| o.users.iter().filter(|u| u.lost.is_some()).count() as f64 / ka)
        .collect();
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let report = summarize(sim, &outcomes, 0.0, seed);
    (mean, (var / n).sqrt(), report.unmodeled_rate)
}

fn formula_vs_simulation() -> (bool, String) {
    let cfg = SessionConfig::reference(50);
    let params = reference_design(50).unwrap();
    let b = budget_for(&params, &cfg, &ExactMod2).unwrap();
    let formula = b.eps1 + b.eps2 + b.eps3;
    let scheme = Scheme::build(cfg, params, SEED).unwrap();
    let start = Instant::now();
    // the inner-code term is an average over random codes, so the
    // simulation draws a fresh random inner code in every session
    let opts = SimOptions {
        inner_ensemble: true,
        ..SimOptions::phase1_only()
    };
    let sim = Simulator::new(scheme.clone(), opts).unwrap();
    let (mean, sd, slack) = session_mean_sd(&sim, SESSIONS, SEED);
    let secs = start.elapsed().as_secs_f64();
    let gap = (mean - formula).abs();
    let pass = slack < 0.01 && gap <= 3.0 * sd + slack && secs < 1800.0;
    let fixed = Simulator::new(scheme, SimOptions::phase1_only()).unwrap();
    let (fixed_mean, fixed_sd, _) = session_mean_sd(&fixed, 2000, SEED);
    (
        pass,
        format!(
            "formula {formula:.5}, simulated {mean:.5} (sd {sd:.5}), gap {gap:.5} <= {:.5} = 3 sd + slack {slack:.5}, \
             {secs:.0}s; selected fixed inner code: {fixed_mean:.5} (sd {fixed_sd:.5}, 2000 sessions)",
            3.0 * sd + slack
        ),
    )
}

fn end_to_end() -> (bool, String) {
    let cfg = SessionConfig::reference(50);
    let scheme = Scheme::build(cfg, reference_design(50).unwrap(), SEED).unwrap();
    let sim = Simulator::new(scheme, SimOptions::default()).unwrap();
    let outcomes = sim.run(SESSIONS, SEED).unwrap();
    let r = summarize(&sim, &outcomes, sim.eps4, SEED);
    (
        r.pupe <= 0.06,
        format!(
            "pupe {:.5} +/- {:.5} over {SESSIONS} sessions (eps_f {:.4}, eps4 {:.4})",
            r.pupe, r.ci95, r.eps_f, r.eps4
        ),
    )
}

fn enumerative_codec() -> (bool, String) {
    let mut all: Vec<Vec<bool>> = (0u32..1 << 12)
        .filter(|m| m.count_ones() == 4)
        .map(|m| (0..12).map(|i| m >> (11 - i) & 1 == 1).collect())
        .collect();
    all.sort();
    let mut mismatches = 0;
    for (i, bits) in all.iter().enumerate() {
        let r = rank(bits, 4).unwrap();
        if r != BigUint::from(i) || unrank(12, 4, &r).unwrap() != *bits {
            mismatches += 1;
        }
    }
    let exhaustive = all.len();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (n, w) = (6300, 100);
    for _ in 0..10_000 {
        let mut bits = vec![false; n];
        for i in rand::seq::index::sample(&mut rng, n, w) {
            bits[i] = true;
        }
        let r = rank(&bits, w).unwrap();
        if unrank(n, w, &r).unwrap() != bits {
            mismatches += 1;
        }
    }
    (
        mismatches == 0 && exhaustive == 495,
        format!("{exhaustive} exhaustive sequences in lexicographic order plus 10000 at (6300, 100), {mismatches} mismatches"),
    )
}

/// Wrapped Gaussian density summed directly over images.
fn wrapped_density(z: f64, sigma: f64) -> f64 {
    (-6..=6)
        .map(|k| {
            let t = (z + 2.0 * k as f64) / sigma;
            (-0.5 * t * t).exp()
        })
        .sum::<f64>()
        / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn fbl_oracles() -> (bool, String) {
    let mut worst_q = 0.0f64;
    for i in 0..=400 {
        let p = 10f64.powf(-12.0 + 12.0 * i as f64 / 400.0).min(0.999_999);
        for p in [p, 1.0 - p] {
            worst_q = worst_q.max((q_func(q_inv(p).unwrap()) - p).abs());
        }
    }
    let mut worst_norm = 0.0f64;
    for sigma2 in [1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0] {
        let nodes = 1 << 16;
        let h = 2.0 / nodes as f64;
        let integral: f64 = (0..nodes).map(|j| wrapped_gauss_pdf(j as f64 * h, sigma2) * h).sum();
        worst_norm = worst_norm.max((integral - 1.0).abs());
    }
    // the mandated point, plus a low-SNR point where capacity is well below one bit
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut pass = worst_q <= 1e-9 && worst_norm <= 1e-9;
    let mut caps = Vec::new();
    for snr in [100.0f64, 1.0] {
        let sigma = (1.0 / (4.0 * snr)).sqrt();
        let samples = 10_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let x = rng.random_range(0..2) as f64;
            let z: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
            let y = (x + z).rem_euclid(2.0);
            let own = wrapped_density(y - x, sigma);
            let mix = 0.5 * (wrapped_density(y, sigma) + wrapped_density(y - 1.0, sigma));
            acc += (own / mix).log2();
        }
        let mc = acc / samples as f64;
        let cap = mod2_stats(snr).unwrap().capacity;
        pass &= (cap - mc).abs() <= 1e-2;
        caps.push(format!("capacity at P={snr} {cap:.6} vs Monte Carlo {mc:.6}"));
    }
    (
        pass,
        format!(
            "max q roundtrip error {worst_q:.1e}, max normalization error {worst_norm:.1e}, \
             {}",
            caps.join(", ")
        ),
    )
}
