use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use clsc_core::analysis::{self, Suite, SweepSpec, VerifyOptions};
use clsc_core::oracle::{self, MrAdjudication, OracleConfig};
use clsc_core::{decision_fields, equilibrium, market, DecisionSet, Equilibrium, Error, Field, ModelId, Params};

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_SINGULAR: u8 = 3;

#[derive(Parser)]
#[command(name = "clsc", version, about = "Stackelberg pricing equilibria for dual-channel closed-loop supply chains")]
struct Cli {
    /// Flat `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form equilibrium of one model.
    Solve(SolveArgs),
    /// Closed-form equilibria over an alpha grid, as CSV.
    Sweep(SweepArgs),
    /// Recompute the published numerical table and report the gaps.
    Table4(Table4Args),
    /// Seeded verification suites.
    Verify(VerifyArgs),
    /// Monte Carlo segment shares for one decision set.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long)]
    model: ModelId,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    cm: f64,
    #[arg(long, default_value_t = 0.5)]
    cr: f64,
    #[arg(long, default_value_t = 0.2)]
    s: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<Params, Error> {
        Params::new(self.alpha, self.cm, self.cr, self.s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Also solve numerically and report the deviations.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// fig3, fig4 or fig5; explicit flags override the preset's values.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    model: Option<ModelId>,
    #[arg(long)]
    alpha_from: Option<f64>,
    #[arg(long)]
    alpha_to: Option<f64>,
    #[arg(long)]
    alpha_step: Option<f64>,
    #[arg(long)]
    cm: Option<f64>,
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for one SVG line chart per decision variable.
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args)]
struct Table4Args {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// oracle, props, mc, endpoints or all.
    suite: Suite,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Customers per Monte Carlo draw.
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    /// JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Decision overrides such as `p_m=0.3`; other fields come from the
    /// closed-form equilibrium.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Verification(String),
    Singular(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Singularity { .. } => Failure::Singular(e.to_string()),
            Error::NonConcave { .. } | Error::BoxBoundary { .. } | Error::NotConverged { .. } => {
                Failure::Verification(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Reads `key = value` lines; `#` starts a comment.
fn read_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), n + 1))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Inserts config entries as flags right after the subcommand, skipping
/// keys already given on the command line.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    let path = argv.get(pos + 1).ok_or("--config needs a path")?;
    let entries = read_config(Path::new(path))?;
    let sub = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(i, a)| !a.starts_with('-') && *i != pos + 1)
        .map(|(i, _)| i)
        .ok_or("missing subcommand")?;
    let given = |k: &str| argv.iter().any(|a| a == &format!("--{k}") || a.starts_with(&format!("--{k}=")));
    let mut extra = Vec::new();
    for (k, v) in entries {
        if given(&k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            _ => extra.push(format!("--{k}={v}")),
        }
    }
    let mut merged = argv[..=sub].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[sub + 1..]);
    Ok(merged)
}

fn write_or_print(out: &Option<PathBuf>, body: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct OracleComparison {
    decisions: DecisionSet,
    deviations: BTreeMap<String, f64>,
    max_relative_deviation: f64,
    worst_field: Field,
}

#[derive(Serialize)]
struct SolveReport {
    command: Vec<String>,
    equilibrium: Equilibrium,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mr_adjudication: Option<MrAdjudication>,
}

fn solve(args: &SolveArgs, argv: &[String]) -> CmdResult {
    let params = args.params.params()?;
    let model = args.params.model;
    let eq = equilibrium(model, &params)?;
    let mut report = SolveReport { command: argv.to_vec(), equilibrium: eq, oracle: None, mr_adjudication: None };
    if args.verify {
        let cfg = OracleConfig::default();
        if model == ModelId::MR {
            report.mr_adjudication = Some(oracle::adjudicate_mr(&params, &cfg, 1e-3)?);
        } else {
            let num = oracle::solve_stackelberg_numeric(model, &params, &cfg)?;
            let deviations = decision_fields(model)
                .iter()
                .map(|f| {
                    let (a, b) = (num.decisions.get(*f).unwrap(), report.equilibrium.decisions.get(*f).unwrap());
                    (f.name().to_string(), oracle::relative_deviation(a, b, oracle::RELATIVE_FLOOR))
                })
                .collect();
            let (worst_field, max_relative_deviation) =
                oracle::max_relative_deviation(&num.decisions, &report.equilibrium.decisions)?;
            report.oracle = Some(OracleComparison { decisions: num.decisions, deviations, max_relative_deviation, worst_field });
        }
    }
    let body = match args.format {
        Format::Json => to_json(&report),
        Format::Text => solve_text(&report),
    };
    write_or_print(&args.out, &body)
}

fn solve_text(r: &SolveReport) -> String {
    let eq = &r.equilibrium;
    let mut out = format!("model {} alpha {} c_m {} c_r {} s {}\n", eq.model, eq.params.alpha(), eq.params.c_m(), eq.params.c_r(), eq.params.s());
    for (f, v) in eq.decisions.iter() {
        out.push_str(&format!("  {:<4} {v}\n", f.name()));
    }
    let q = &eq.demand;
    out.push_str(&format!("  demand q1 {} q2 {} q3 {}", q.q1, q.q2, q.q3));
    if let Some(q4) = q.q4 {
        out.push_str(&format!(" q4 {q4}"));
    }
    out.push_str(&format!("\n  profit pi_m {} pi_r {} pi_s {}\n", eq.profit.pi_m, eq.profit.pi_r, eq.profit.pi_s));
    out.push_str(&format!("  interior_valid {}\n", eq.validity.interior));
    for v in eq.validity.violations() {
        out.push_str(&format!("    violated {} (slack {})\n", v.name, v.slack));
    }
    if let Some(o) = &r.oracle {
        out.push_str(&format!("  oracle max relative deviation {:e} at {}\n", o.max_relative_deviation, o.worst_field.name()));
    }
    if let Some(a) = &r.mr_adjudication {
        out.push_str(&format!("  MR verdict {}\n", serde_json::to_string(&a.verdict).unwrap()));
    }
    out
}

fn sweep(args: &SweepArgs) -> CmdResult {
    let base = match &args.preset {
        Some(p) => Some(SweepSpec::preset(p)?),
        None => None,
    };
    let need = |v: Option<f64>, from: Option<f64>, name: &str| {
        v.or(from).ok_or_else(|| Failure::Usage(format!("sweep needs --{name} or --preset")))
    };
    let spec = SweepSpec {
        model: args
            .model
            .or(base.map(|b| b.model))
            .ok_or_else(|| Failure::Usage("sweep needs --model or --preset".into()))?,
        alpha_from: need(args.alpha_from, base.map(|b| b.alpha_from), "alpha-from")?,
        alpha_to: need(args.alpha_to, base.map(|b| b.alpha_to), "alpha-to")?,
        alpha_step: need(args.alpha_step, base.map(|b| b.alpha_step), "alpha-step")?,
        c_m: need(args.cm, base.map(|b| b.c_m), "cm")?,
        c_r: need(args.cr, base.map(|b| b.c_r), "cr")?,
        s: need(args.s, base.map(|b| b.s), "s")?,
    };
    let rows = analysis::sweep(&spec)?;
    let csv = analysis::to_csv(&rows);
    if let Some(dir) = &args.plots {
        fs::create_dir_all(dir)?;
        for f in decision_fields(spec.model) {
            if let Some(svg) = analysis::plot_svg(&rows, *f) {
                fs::write(dir.join(format!("{}.svg", f.name())), svg)?;
            }
        }
    }
    write_or_print(&args.out, &csv)?;
    if args.out.is_some() {
        let singular = rows.iter().filter(|r| r.singular()).count();
        println!("{} rows ({} singular)", rows.len(), singular);
        if rows.len() > 1 {
            for v in analysis::sweep_audit(&spec)?.iter().filter(|v| !v.agree) {
                let sub = v.sub_id.as_deref().map(|s| format!("-{s}")).unwrap_or_default();
                println!(
                    "note: {}{} {}: {:?} claimed, {:?} observed{}",
                    v.prop_id,
                    sub,
                    v.subject,
                    v.claimed,
                    v.observed,
                    v.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
                );
            }
        }
    }
    Ok(())
}

fn table4(args: &Table4Args) -> CmdResult {
    let rows = analysis::table4()?;
    let body = match args.format {
        Format::Json => to_json(&rows),
        Format::Text => analysis::table4_text(&rows),
    };
    write_or_print(&args.out, &body)
}

fn verify(args: &VerifyArgs, argv: &[String]) -> CmdResult {
    let opts = VerifyOptions {
        suite: args.suite,
        samples: args.samples,
        seed: args.seed,
        tol: args.tol,
        oracle: OracleConfig { seed: args.seed, mc_samples: args.n, ..OracleConfig::default() },
    };
    let start = Instant::now();
    let report = analysis::verify(&opts, argv.to_vec())?;
    print!("{}", analysis::report_summary(&report));
    println!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    if let Some(p) = &args.out {
        fs::write(p, to_json(&report))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{} unexpected findings", report.counts.unexpected)))
    }
}

#[derive(Serialize)]
struct SimulateReport {
    command: Vec<String>,
    params: Params,
    decisions: DecisionSet,
    analytic: clsc_core::DemandProfile,
    monte_carlo: oracle::MonteCarloDemand,
    max_z: f64,
}

fn simulate(args: &SimulateArgs, argv: &[String]) -> CmdResult {
    let params = args.params.params()?;
    let mut d = equilibrium(args.params.model, &params)?.decisions;
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects FIELD=VALUE, got `{kv}`")))?;
        let field: Field = k.trim().parse().map_err(Failure::Usage)?;
        let value: f64 = v.trim().parse().map_err(|_| Failure::Usage(format!("bad number in `{kv}`")))?;
        d.set(field, value)?;
    }
    let analytic = market::demand(&d, &params)?;
    let mc = oracle::monte_carlo_demand(&d, &params, args.n, args.seed)?;
    let report = SimulateReport { command: argv.to_vec(), params, decisions: d, analytic, max_z: mc.max_z(&analytic), monte_carlo: mc };
    write_or_print(&args.out, &to_json(&report))
}

fn run(argv: Vec<String>) -> CmdResult {
    let merged = merge_config(argv.clone()).map_err(Failure::Usage)?;
    let cli = match Cli::try_parse_from(&merged) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Failure::Usage(e.render().to_string())),
    };
    // The destination path is left out so that identical runs written to
    // different files stay byte-identical.
    let mut echo = Vec::new();
    let mut rest = argv[1..].iter();
    while let Some(a) = rest.next() {
        if a == "--out" {
            rest.next();
        } else if !a.starts_with("--out=") {
            echo.push(a.clone());
        }
    }
    let echo = &echo[..];
    match &cli.command {
        Command::Solve(a) => solve(a, echo),
        Command::Sweep(a) => sweep(a),
        Command::Table4(a) => table4(a),
        Command::Verify(a) => verify(a, echo),
        Command::Simulate(a) => simulate(a, echo),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            let m = m.trim_end();
            eprintln!("error: {}", m.strip_prefix("error: ").unwrap_or(m));
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Singular(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_SINGULAR)
        }
    }
}
