use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mra_core::catalog::build::{build_catalog, render, KNOWN_WITHOUT_CONSTRUCTION};
use mra_core::error_model::{budget_for, ErrorBudget};
use mra_core::fbl::ExactMod2;
use mra_core::optimizer::{design, eb_n0, final_power, DesignProblem, DesignResult};
use mra_core::params::{reference_design, SchemeParams, SessionConfig, REFERENCE_KA};
use mra_core::sim::{calibrate_p2, estimate_pupe, FeedbackModel, Scheme, SessionReport, SimOptions};

const CSV_HEADER: &str = "# mra-grant-sim v1";
const DEFAULT_SEED: u64 = 20200101;

#[derive(Parser)]
#[command(name = "mra-grant-sim", version, about = "Design, analyze and simulate the grant-based random access scheme")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize scheme parameters for a session configuration
    Optimize(OptimizeArgs),
    /// Evaluate the analytic error budget of a scheme
    Analyze(SchemeArgs),
    /// Monte Carlo simulation of a scheme
    Simulate(SimulateArgs),
    /// Optimize (and optionally simulate) over a range of user counts
    Sweep(SweepArgs),
    /// Budgets of the published reference designs
    Table(OutArgs),
    /// Regenerate the bundled code catalog
    #[command(hide = true)]
    CatalogBuild(OutArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Output file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeedbackArg {
    Pessimistic,
    Silent,
}

#[derive(Args)]
struct SessionArgs {
    /// Session configuration JSON: {"ka", "k", "n", "eps_target"}
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of active users (reference configuration otherwise)
    #[arg(long, default_value_t = 100)]
    ka: usize,
    /// Override the per-user error target
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    no_icr: bool,
    #[arg(long)]
    no_omt: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Args)]
struct SchemeArgs {
    /// Scheme JSON (as written by `simulate`) or design JSON (as written by
    /// `optimize`); the published design for `--ka` otherwise
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    ka: usize,
    #[arg(long)]
    no_icr: bool,
    #[arg(long)]
    no_omt: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the inner code and the simulation
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, value_enum, default_value_t = FeedbackArg::Pessimistic)]
    feedback_model: FeedbackArg,
    /// Only the scheduling-request phase may fail
    #[arg(long)]
    phase1_only: bool,
    /// Adjust P2 until the simulated error rate meets the target
    #[arg(long)]
    calibrate: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Single user count; all reference counts otherwise
    #[arg(long)]
    ka: Option<usize>,
    #[arg(long)]
    no_icr: bool,
    #[arg(long)]
    no_omt: bool,
    /// Skip the simulation columns
    #[arg(long)]
    analytic_only: bool,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FeedbackArg::Pessimistic)]
    feedback_model: FeedbackArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad input: exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<mra_core::Error>() {
        Some(
            mra_core::Error::Infeasible(_) | mra_core::Error::Numeric(_) | mra_core::Error::NotInCatalog { .. },
        ) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("cannot parse {}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    if let Some(p) = path {
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn session_config(args: &SessionArgs) -> anyhow::Result<SessionConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<SessionConfig>(p)?,
        None => SessionConfig::reference(args.ka),
    };
    if let Some(eps) = args.eps {
        cfg.eps_target = eps;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn print_budget(b: &ErrorBudget) {
    for (name, v) in b.terms() {
        println!("  {name:<7} {v:.4e}");
    }
    println!("  total   {:.6}", b.total);
    println!("  ({})", b.excluded);
}

fn print_params(p: &SchemeParams) {
    println!(
        "k_p={} n_p={} d={} T={} n_c1={} n_c2={} V={} N_f={} icr={} omt={}",
        p.k_p,
        p.n_p,
        p.d,
        p.t(),
        p.n_c1,
        p.n_c2,
        p.v,
        p.n_f,
        p.icr,
        p.omt
    );
}

fn cmd_optimize(args: &OptimizeArgs) -> anyhow::Result<()> {
    let cfg = session_config(&args.session)?;
    let mut problem = DesignProblem::new(cfg);
    problem.icr = !args.session.no_icr;
    problem.omt = !args.session.no_omt;
    eprintln!("optimizing Ka={} k={} N={} eps={}", cfg.ka, cfg.k, cfg.n, cfg.eps_target);
    let r = design(&problem)?;
    print_params(&r.params);
    println!(
        "P={:.6} Eb/N0={:.3} dB (relaxed bound {:.6}) k_f={}",
        r.p, r.eb_n0_db, r.relaxed_p, r.k_f
    );
    print_budget(&r.budget);
    write_out(args.session.out.as_deref(), &to_json(&r)?)
}

/// Parameters from a scheme file, a design file or the published table.
fn load_params(args: &SchemeArgs) -> anyhow::Result<(SessionConfig, SchemeParams, Option<Scheme>)> {
    let (cfg, mut params, scheme) = match &args.config {
        Some(path) => {
            let mut value: serde_json::Value = read_json(path)?;
            // simulation reports carry the scheme under "scheme" or "report.scheme"
            for ptr in ["/scheme", "/report/scheme"] {
                if let Some(s) = value.pointer(ptr).filter(|s| s.get("inner_generator").is_some()) {
                    value = s.clone();
                    break;
                }
            }
            if value.get("inner_generator").is_some() {
                let s: Scheme = serde_json::from_value(value).map_err(|e| usage(format!("scheme file: {e}")))?;
                (s.session, s.params.clone(), Some(s))
            } else {
                let d: DesignResult =
                    serde_json::from_value(value).map_err(|e| usage(format!("design file: {e}")))?;
                (d.config, d.params, None)
            }
        }
        None => {
            let p = reference_design(args.ka)
                .ok_or_else(|| usage(format!("no published design for Ka={}; pass --config", args.ka)))?;
            (SessionConfig::reference(args.ka), p, None)
        }
    };
    params.icr &= !args.no_icr;
    params.omt &= !args.no_omt;
    params.validate(&cfg).map_err(|e| usage(e.to_string()))?;
    let scheme = scheme.map(|mut s| {
        s.params = params.clone();
        s
    });
    Ok((cfg, params, scheme))
}

#[derive(Serialize)]
struct Analysis {
    config: SessionConfig,
    params: SchemeParams,
    eb_n0_db: f64,
    budget: ErrorBudget,
    /// power meeting the target exactly with these integers
    required_p: Option<f64>,
}

fn cmd_analyze(args: &SchemeArgs) -> anyhow::Result<()> {
    let (cfg, params, _) = load_params(args)?;
    let b = budget_for(&params, &cfg, &ExactMod2)?;
    let required_p = final_power(&params, &cfg, &ExactMod2)?;
    print_params(&params);
    println!("P1={} P2={} P_f={}", params.p1, params.p2, params.p_f);
    print_budget(&b);
    match required_p {
        Some(p) => println!("required P for eps={}: {p:.6} ({:.3} dB)", cfg.eps_target, eb_n0(p, cfg.n, cfg.k)),
        None => println!("target eps={} unreachable", cfg.eps_target),
    }
    let a = Analysis {
        config: cfg,
        eb_n0_db: eb_n0(params.p1, cfg.n, cfg.k),
        params,
        budget: b,
        required_p,
    };
    write_out(args.out.as_deref(), &to_json(&a)?)
}

fn feedback_model(f: FeedbackArg) -> FeedbackModel {
    match f {
        FeedbackArg::Pessimistic => FeedbackModel::Pessimistic,
        FeedbackArg::Silent => FeedbackModel::Silent,
    }
}

fn print_report(r: &SessionReport) {
    println!(
        "trials={} Ka={} errors={} pupe={:.5} +- {:.5}",
        r.trials, r.ka, r.user_errors, r.pupe, r.ci95
    );
    let c = &r.causes;
    println!(
        "  causes: subblock_loss={} collision={} decode={} misselection={} erasure={} feedback={} data={}",
        c.subblock_loss, c.collision, c.decode, c.misselection, c.erasure, c.feedback, c.data
    );
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let (cfg, params, scheme) = load_params(&args.scheme)?;
    let scheme = match scheme {
        Some(s) => s,
        None => Scheme::build(cfg, params, args.scheme.seed)?,
    };
    let mut opts = if args.phase1_only {
        SimOptions::phase1_only()
    } else {
        SimOptions::default()
    };
    opts.feedback_model = feedback_model(args.feedback_model);
    eprintln!("simulating {} sessions at Ka={}", args.trials, cfg.ka);
    if args.calibrate {
        let c = calibrate_p2(&scheme, opts, cfg.eps_target, args.trials, args.scheme.seed)?;
        println!("calibrated P2={:.6} after {} steps", c.p2, c.steps);
        print_report(&c.report);
        write_out(args.scheme.out.as_deref(), &to_json(&c)?)
    } else {
        let r = estimate_pupe(&scheme, opts, args.trials, args.scheme.seed)?;
        print_report(&r);
        write_out(args.scheme.out.as_deref(), &to_json(&r)?)
    }
}

fn csv_text(meta: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
    Ok(format!("{CSV_HEADER}\n# {meta}\n{body}"))
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let kas: Vec<usize> = match args.ka {
        Some(k) => vec![k],
        None => REFERENCE_KA.to_vec(),
    };
    let mut header = vec![
        "ka", "p", "eb_n0_db", "k_p", "n_p", "d", "n_c1", "n_c2", "v", "n_f", "eps1", "eps2", "eps3", "eps4", "eps_f",
        "eps_f2", "total",
    ];
    if !args.analytic_only {
        header.extend(["sim_pupe", "sim_ci95"]);
    }
    let mut rows = Vec::new();
    for &ka in &kas {
        let cfg = SessionConfig::reference(ka);
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        let mut problem = DesignProblem::new(cfg);
        problem.icr = !args.no_icr;
        problem.omt = !args.no_omt;
        eprintln!("optimizing Ka={ka}");
        let r = design(&problem)?;
        let p = &r.params;
        let mut row: Vec<String> = vec![
            ka.to_string(),
            format!("{:.6e}", r.p),
            format!("{:.4}", r.eb_n0_db),
        ];
        row.extend([p.k_p, p.n_p, p.d, p.n_c1, p.n_c2, p.v, p.n_f].map(|x| x.to_string()));
        row.extend(r.budget.terms().iter().map(|(_, v)| format!("{v:.6e}")));
        row.push(format!("{:.6e}", r.budget.total));
        if !args.analytic_only {
            let sim = Scheme::build(cfg, r.params.clone(), args.seed).and_then(|s| {
                let opts = SimOptions {
                    feedback_model: feedback_model(args.feedback_model),
                    ..SimOptions::default()
                };
                eprintln!("simulating {} sessions at Ka={ka}", args.trials);
                estimate_pupe(&s, opts, args.trials, args.seed)
            });
            match sim {
                Ok(s) => row.extend([format!("{:.6e}", s.pupe), format!("{:.6e}", s.ci95)]),
                Err(mra_core::Error::NotInCatalog { .. }) => row.extend(["nan".into(), "nan".into()]),
                Err(e) => return Err(e.into()),
            }
        }
        println!("{}", row.join(","));
        rows.push(row);
    }
    let meta = format!(
        "k=100 N=30000 eps=0.05 icr={} omt={} seed={} trials={} feedback={}",
        !args.no_icr,
        !args.no_omt,
        args.seed,
        if args.analytic_only { 0 } else { args.trials },
        match args.feedback_model {
            FeedbackArg::Pessimistic => "pessimistic",
            FeedbackArg::Silent => "silent",
        }
    );
    write_out(args.out.as_deref(), &csv_text(&meta, &header, &rows)?)
}

fn cmd_table(args: &OutArgs) -> anyhow::Result<()> {
    let header = [
        "ka", "k_p", "n_p", "d", "n_c1", "n_c2", "v", "n_f", "p", "eb_n0_db", "total", "required_p",
    ];
    let mut rows = Vec::new();
    println!("{}", header.join(","));
    for ka in REFERENCE_KA {
        let cfg = SessionConfig::reference(ka);
        let p = reference_design(ka).expect("published design");
        let b = budget_for(&p, &cfg, &ExactMod2)?;
        let req = final_power(&p, &cfg, &ExactMod2)?.map_or("nan".to_string(), |x| format!("{x:.6e}"));
        let mut row: Vec<String> = vec![ka.to_string()];
        row.extend([p.k_p, p.n_p, p.d, p.n_c1, p.n_c2, p.v, p.n_f].map(|x| x.to_string()));
        row.extend([
            format!("{:.6e}", p.p1),
            format!("{:.4}", eb_n0(p.p1, cfg.n, cfg.k)),
            format!("{:.6e}", b.total),
            req,
        ]);
        println!("{}", row.join(","));
        rows.push(row);
    }
    write_out(
        args.out.as_deref(),
        &csv_text("published designs, k=100 N=30000 eps=0.05 icr=true omt=true", &header, &rows)?,
    )
}

fn cmd_catalog_build(args: &OutArgs) -> anyhow::Result<()> {
    let rows = build_catalog(mra_core::catalog::MAX_N, &[], KNOWN_WITHOUT_CONSTRUCTION)?;
    let text = render(&rows);
    match &args.out {
        Some(_) => write_out(args.out.as_deref(), &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Table(a) => cmd_table(a),
        Command::CatalogBuild(a) => cmd_catalog_build(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
