//! `relief`: solve, analyse and verify robust relief-logistics plans.
//!
//! Exit codes: 0 success, 1 input error, 2 solver or check failure,
//! 3 size guard.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use relief_core::analysis::{self, SweepOptions};
use relief_core::branch_bound::{self, MipStatus};
use relief_core::checker::{self, CheckError, CheckOptions, OracleStatus};
use relief_core::fgp::{self, FgpError, FgpOptions};
use relief_core::instance::{self, Instance};
use relief_core::model::{self, AssemblyOptions, ModelError, ObjectiveId};
use relief_core::random::{self, InstanceShape};
use relief_core::{par, Solution};

#[derive(Parser, Debug)]
#[command(name = "relief", version, about = "Robust multi-objective relief logistics planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the compromise problem for one weight vector.
    Solve(SolveArgs),
    /// Print the positive and negative ideal values of every objective.
    PisNis(CommonArgs),
    /// Solve the compromise problem over a grid of weights.
    Sweep(SweepArgs),
    /// Verify a solution file against an instance.
    Check(CheckArgs),
    /// Compare branch-and-bound with exhaustive enumeration on a tiny instance.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct CommonArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Multiply every uncertainty budget by this factor in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    gamma_scale: f64,
    /// Participating objectives, 1-based and comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    objectives: Vec<usize>,
    /// Count injuries still travelling toward a hospital as unserved.
    #[arg(long = "strict-eq5", visible_alias = "literal-injury-balance")]
    literal_injury_balance: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the assembled program in LP format.
    #[arg(long)]
    dump_lp: bool,
    /// Branch-and-bound node limit per problem.
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// One weight per objective, summing to 1.
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid steps per weight axis.
    #[arg(long, default_value_t = 5)]
    grid: usize,
    /// Walk the whole weight simplex instead of the (w1, w2) plane.
    #[arg(long)]
    full_simplex: bool,
    /// Worker threads for the grid points.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Solution JSON file to verify.
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Seed of the random tiny instance used when no instance is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type Outcome<T> = Result<T, Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}
fn solver(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}
fn guard(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, error: e.into() }
}

fn from_model(e: ModelError) -> Failure {
    match e {
        ModelError::TooLarge { .. } => guard(e),
        ModelError::UnknownObjective(_) => input(e),
    }
}

fn from_fgp(e: FgpError) -> Failure {
    match e {
        FgpError::Model(m) => from_model(m),
        FgpError::Weights(_) | FgpError::NisUndefined | FgpError::DuplicateObjective(_) => input(e),
        _ => solver(e),
    }
}

fn from_check(e: CheckError) -> Failure {
    match e {
        CheckError::SizeGuard { .. } | CheckError::UnboundedInteger(_) => guard(e),
        CheckError::Dimension(_) => input(e),
        CheckError::Model(m) => from_model(m),
        CheckError::Simplex(_) => solver(e),
    }
}

#[derive(Serialize)]
struct Manifest<'a, F: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    flags: &'a F,
    instance_sha256: Option<String>,
    /// Only place a timing appears; data files never carry one.
    wall_seconds: f64,
    outcome: String,
    exit_code: u8,
    files: Vec<String>,
}

struct Loaded {
    instance: Instance,
    digest: Option<String>,
    /// Drawn from `--seed` rather than read from a file.
    generated: bool,
}

fn load_instance(common: &CommonArgs) -> Outcome<Loaded> {
    let path = common.instance.as_ref().ok_or_else(|| input(anyhow!("--instance is required")))?;
    let bytes = fs::read(path).with_context(|| format!("cannot read instance {}", path.display())).map_err(input)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).context("instance is not UTF-8").map_err(input)?;
    let inst = instance::parse_instance(&text).with_context(|| format!("invalid instance {}", path.display())).map_err(input)?;
    let report = instance::validate(&inst);
    if !report.is_ok() {
        let lines: Vec<String> = report.violations.iter().map(|v| v.message.clone()).collect();
        return Err(input(anyhow!("instance fails validation:\n  {}", lines.join("\n  "))));
    }
    if !(0.0..=1.0).contains(&common.gamma_scale) {
        return Err(input(anyhow!("--gamma-scale must lie in [0, 1], got {}", common.gamma_scale)));
    }
    let instance = if common.gamma_scale == 1.0 { inst } else { inst.with_gamma_scale(common.gamma_scale) };
    Ok(Loaded { instance, digest: Some(digest), generated: false })
}

fn objectives(common: &CommonArgs) -> Outcome<Vec<ObjectiveId>> {
    common.objectives.iter().map(|&n| ObjectiveId::from_number(n).map_err(input)).collect()
}

fn fgp_options(common: &CommonArgs) -> Outcome<FgpOptions> {
    let mut opts = FgpOptions { objectives: objectives(common)?, ..FgpOptions::default() };
    opts.assembly.literal_injury_balance = common.literal_injury_balance;
    opts.mip.node_limit = common.node_limit;
    Ok(opts)
}

fn check_options(common: &CommonArgs) -> CheckOptions {
    CheckOptions { literal_injury_balance: common.literal_injury_balance, ..CheckOptions::default() }
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Outcome<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(input)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Outcome<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display())).map_err(input)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(input)?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// What a command reports back for the manifest.
struct Report {
    outcome: String,
    code: u8,
}

fn dump_lp(common: &CommonArgs, inst: &Instance, w: &mut Writer) -> Outcome<()> {
    if common.dump_lp {
        let opts = AssemblyOptions { literal_injury_balance: common.literal_injury_balance, ..AssemblyOptions::default() };
        let model = model::assemble(inst, &opts).map_err(from_model)?;
        w.write("model.lp", &model.to_lp_text(inst))?;
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs, loaded: &Loaded, w: &mut Writer) -> Outcome<Report> {
    let inst = &loaded.instance;
    let opts = fgp_options(&args.common)?;
    fgp::validate_weights(&args.weights, opts.objectives.len()).map_err(from_fgp)?;
    dump_lp(&args.common, inst, w)?;
    let res = fgp::run(inst, &args.weights, &opts).map_err(from_fgp)?;
    w.json("solution.json", &res.solution)?;
    w.json("fgp.json", &res)?;
    let report = checker::check_with(inst, &res.solution, &check_options(&args.common)).map_err(from_check)?;
    println!("objective   value        pis          nis          lambda");
    for (i, id) in res.objectives.iter().enumerate() {
        println!(
            "{:<10}  {:<11.6}  {:<11.6}  {:<11.6}  {:.6}",
            id.to_string(),
            res.values[i],
            res.pis[i],
            res.nis[i],
            res.lambda[i]
        );
    }
    if report.pass {
        println!("checker: PASS");
        Ok(Report { outcome: "solved; checker pass".into(), code: 0 })
    } else {
        w.json("check.json", &report)?;
        eprintln!("checker: FAIL ({} violations, see check.json)", report.violations.len());
        Ok(Report { outcome: format!("solved; checker rejected {} rows", report.violations.len()), code: 2 })
    }
}

#[derive(Serialize)]
struct IdealTable {
    objectives: Vec<ObjectiveId>,
    pis: Vec<f64>,
    nis: Vec<f64>,
    payoff: Vec<Vec<f64>>,
}

fn cmd_pis_nis(args: &CommonArgs, loaded: &Loaded, w: &mut Writer) -> Outcome<Report> {
    let opts = fgp_options(args)?;
    if opts.objectives.len() < 2 {
        return Err(from_fgp(FgpError::NisUndefined));
    }
    dump_lp(args, &loaded.instance, w)?;
    let (_, ideals) = fgp::compute_pis(&loaded.instance, &opts).map_err(from_fgp)?;
    println!("objective   pis          nis");
    for (i, id) in ideals.objectives.iter().enumerate() {
        println!("{:<10}  {:<11.6}  {:.6}", id.to_string(), ideals.pis[i], ideals.nis[i]);
    }
    w.json(
        "pis_nis.json",
        &IdealTable { objectives: ideals.objectives.clone(), pis: ideals.pis, nis: ideals.nis, payoff: ideals.payoff },
    )?;
    Ok(Report { outcome: "ideal points computed".into(), code: 0 })
}

fn cmd_sweep(args: &SweepArgs, loaded: &Loaded, w: &mut Writer) -> Outcome<Report> {
    let opts = SweepOptions {
        grid: args.grid,
        full_simplex: args.full_simplex,
        parallel: par::available() && args.jobs != Some(1),
        fgp: fgp_options(&args.common)?,
    };
    if args.grid < 2 {
        return Err(input(anyhow!("--grid must be at least 2")));
    }
    dump_lp(&args.common, &loaded.instance, w)?;
    let table = par::with_threads(args.jobs, || analysis::weight_sweep(&loaded.instance, &opts)).map_err(|e| match e {
        analysis::AnalysisError::Fgp(f) => from_fgp(f),
        other => input(other),
    })?;
    w.write("sweep.csv", &table.to_csv())?;
    w.json("sweep.json", &table)?;
    let curve = analysis::effectiveness_curve(&table);
    w.write("effectiveness.csv", &analysis::curve_to_csv(&curve))?;
    let failed = table.rows.iter().filter(|r| !r.is_solved()).count();
    println!("{} grid points, {} failed; written to {}", table.rows.len(), failed, w.dir.display());
    if failed == 0 {
        Ok(Report { outcome: format!("{} rows solved and checked", table.rows.len()), code: 0 })
    } else {
        Ok(Report { outcome: format!("{failed} of {} rows failed", table.rows.len()), code: 2 })
    }
}

fn cmd_check(args: &CheckArgs, loaded: &Loaded, w: &mut Writer) -> Outcome<Report> {
    let text = fs::read_to_string(&args.solution)
        .with_context(|| format!("cannot read solution {}", args.solution.display()))
        .map_err(input)?;
    let sol = Solution::from_json(&text).context("invalid solution JSON").map_err(input)?;
    let report = checker::check_with(&loaded.instance, &sol, &check_options(&args.common)).map_err(from_check)?;
    w.json("check.json", &report)?;
    if report.pass {
        println!("PASS");
        Ok(Report { outcome: "checker pass".into(), code: 0 })
    } else {
        println!("FAIL: {} violations", report.violations.len());
        for v in report.violations.iter().take(20) {
            println!("  {:?} [{}] excess {:.3e}", v.rule, v.index.join(","), v.excess);
        }
        Ok(Report { outcome: format!("checker rejected {} rows", report.violations.len()), code: 2 })
    }
}

#[derive(Serialize)]
struct OracleRow {
    objective: ObjectiveId,
    branch_bound: f64,
    oracle: f64,
    lattice_points_solved: usize,
    agree: bool,
}

fn cmd_oracle(args: &OracleArgs, loaded: &Loaded, w: &mut Writer) -> Outcome<Report> {
    let inst = &loaded.instance;
    if loaded.generated {
        w.write("instance.json", &instance::to_json(inst))?;
    }
    let mut rows = Vec::new();
    for id in objectives(&args.common)? {
        let opts = AssemblyOptions {
            objective: id,
            literal_injury_balance: args.common.literal_injury_balance,
            ..AssemblyOptions::default()
        };
        let m = model::assemble(inst, &opts).map_err(from_model)?;
        let lp = m.lp_for(id);
        let oracle = checker::enumerate_mip(&lp, checker::DEFAULT_GUARD).map_err(from_check)?;
        let mip = branch_bound::solve_mip(&lp).map_err(solver)?;
        let agree = match (mip.status, oracle.status) {
            (MipStatus::Optimal, OracleStatus::Optimal) => {
                (mip.objective - oracle.objective).abs() <= 1e-6 * (1.0 + oracle.objective.abs())
            }
            (MipStatus::Infeasible, OracleStatus::Infeasible) | (MipStatus::Unbounded, OracleStatus::Unbounded) => true,
            _ => false,
        };
        println!("{id}: branch-and-bound {} oracle {} {}", mip.objective, oracle.objective, if agree { "ok" } else { "MISMATCH" });
        rows.push(OracleRow {
            objective: id,
            branch_bound: mip.objective,
            oracle: oracle.objective,
            lattice_points_solved: oracle.points_solved,
            agree,
        });
    }
    w.json("oracle.json", &rows)?;
    if rows.iter().all(|r| r.agree) {
        Ok(Report { outcome: "oracle agrees".into(), code: 0 })
    } else {
        Ok(Report { outcome: "oracle disagrees".into(), code: 2 })
    }
}

fn execute<F: Serialize>(
    name: &'static str,
    flags: &F,
    common: &CommonArgs,
    load: impl FnOnce() -> Outcome<Loaded>,
    body: impl FnOnce(&Loaded, &mut Writer) -> Outcome<Report>,
) -> ExitCode {
    let start = Instant::now();
    let mut digest = None;
    let result = (|| {
        let mut w = Writer::new(&common.out)?;
        let loaded = load()?;
        digest = loaded.digest.clone();
        let report = body(&loaded, &mut w)?;
        Ok::<_, Failure>((report, w))
    })();
    let (code, outcome, files) = match result {
        Ok((r, w)) => (r.code, r.outcome, w.files),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            (f.code, format!("error: {:#}", f.error), Vec::new())
        }
    };
    let manifest = Manifest {
        tool: "relief",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        flags,
        instance_sha256: digest,
        wall_seconds: start.elapsed().as_secs_f64(),
        outcome,
        exit_code: code,
        files,
    };
    if fs::create_dir_all(&common.out).is_ok() {
        if let Ok(text) = serde_json::to_string_pretty(&manifest) {
            let _ = fs::write(common.out.join("manifest.json"), text + "\n");
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(a) => execute("solve", a, &a.common, || load_instance(&a.common), |l, w| cmd_solve(a, l, w)),
        Command::PisNis(a) => execute("pis-nis", a, a, || load_instance(a), |l, w| cmd_pis_nis(a, l, w)),
        Command::Sweep(a) => execute("sweep", a, &a.common, || load_instance(&a.common), |l, w| cmd_sweep(a, l, w)),
        Command::Check(a) => execute("check", a, &a.common, || load_instance(&a.common), |l, w| cmd_check(a, l, w)),
        Command::Oracle(a) => execute(
            "oracle",
            a,
            &a.common,
            || match a.common.instance {
                Some(_) => load_instance(&a.common),
                None => {
                    let inst = random::random_instance(a.seed, &InstanceShape::tiny());
                    let inst = if a.common.gamma_scale == 1.0 { inst } else { inst.with_gamma_scale(a.common.gamma_scale) };
                    let digest = hex::encode(Sha256::digest(instance::to_json(&inst).as_bytes()));
                    Ok(Loaded { instance: inst, digest: Some(digest), generated: true })
                }
            },
            |l, w| cmd_oracle(a, l, w),
        ),
    }
}
