use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use regime_dividends::fixedpoint::{DEFAULT_STEP, DEFAULT_TOL};
use regime_dividends::format::{fmt_sig, round_sig};
use regime_dividends::model::RawModel;
use regime_dividends::montecarlo::{dump_paths, write_paths_csv, SimConfig};
use regime_dividends::policy::parse_probe_points;
use regime_dividends::{BarrierPolicy, RegimeModel};
use regime_dividends_cli::error::{CliError, CliResult, EXIT_INPUT, EXIT_NO_CONVERGENCE, EXIT_OK};
use regime_dividends_cli::simulate::{estimate_points, PointEstimate};
use regime_dividends_cli::solve::{solve_model, SolveOutcome};
use regime_dividends_cli::tables::{compare_with_reference, compute_tables, write_tables};
use regime_dividends_cli::verify::{verify, VerifyOptions, VerifyReport};

#[derive(Parser, Debug)]
#[command(name = "regdiv", version, about = "Optimal dividend barriers under Markov-modulated drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the optimal barriers; writes solution.json and value.csv.
    Solve(SolveArgs),
    /// Regenerate the comparative-statics table; writes tables.csv.
    Tables(TablesArgs),
    /// Run the consistency checks; writes verify.json, exits 3 on failure.
    Verify(VerifyArgs),
    /// Monte Carlo estimate of a policy's value; writes estimate.json.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Grid step of the fixed-point solver.
    #[arg(long, default_value_t = DEFAULT_STEP, value_parser = parse_h)]
    h: f64,
    /// Convergence tolerance of the fixed-point solver.
    #[arg(long, default_value_t = DEFAULT_TOL, value_parser = parse_positive)]
    tol: f64,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Smallest simulation time step.
    #[arg(long, default_value_t = regime_dividends::montecarlo::DEFAULT_DT, value_parser = parse_positive)]
    dt: f64,
    /// Number of simulated paths; scientific notation accepted.
    #[arg(long, default_value = "1e5", value_parser = parse_paths)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TablesArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Newton tolerance of the closed-form solver.
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    tol: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Policy JSON to check instead of the solver's optimum.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Reserve levels for the simulation check, comma separated.
    #[arg(long, value_parser = parse_probes)]
    probe_points: Option<Probes>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Policy JSON; defaults to the solver's optimum.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Starting reserve levels, comma separated.
    #[arg(long, value_parser = parse_probes)]
    probe_points: Probes,
    /// Starting regime for every probe point.
    #[arg(long, default_value_t = 0)]
    regime: usize,
    /// Also write the first K trajectories of the first probe point to paths.csv.
    #[arg(long, value_name = "K")]
    dump_paths: Option<usize>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn parse_h(s: &str) -> Result<f64, String> {
    let h = parse_positive(s)?;
    if (1e-5..=1e-2).contains(&h) {
        Ok(h)
    } else {
        Err(format!("grid step {h} outside [1e-5, 1e-2]"))
    }
}

fn parse_paths(s: &str) -> Result<usize, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid path count `{s}`"))?;
    if !(1.0..=1e8).contains(&v) || v.fract() != 0.0 {
        return Err(format!("path count must be an integer in [1, 1e8], got `{s}`"));
    }
    Ok(v as usize)
}

/// Comma-separated reserve levels, parsed as one argument.
#[derive(Debug, Clone)]
struct Probes(Vec<f64>);

fn parse_probes(s: &str) -> Result<Probes, String> {
    parse_probe_points(s).map(Probes).map_err(|e| e.to_string())
}

/// Resolved configuration echoed into every artifact.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<RawModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_points: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regime: Option<usize>,
}

impl RunConfig {
    fn new(command: &'static str, tol: f64) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            model_path: None,
            model: None,
            h: None,
            tol,
            policy_path: None,
            simulation: None,
            probe_points: None,
            regime: None,
        }
    }

    fn with_model(mut self, path: &Path, model: &RegimeModel) -> Self {
        self.model_path = Some(path.to_path_buf());
        self.model = Some(model.to_raw());
        self
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_model(path: &Path) -> CliResult<RegimeModel> {
    Ok(RegimeModel::from_json(&read(path)?)?)
}

fn load_policy(path: &Option<PathBuf>) -> CliResult<Option<BarrierPolicy>> {
    path.as_deref()
        .map(|p| Ok(BarrierPolicy::from_json(&read(p)?)?))
        .transpose()
}

fn create(out: &Path, name: &str) -> CliResult<(PathBuf, fs::File)> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let path = out.join(name);
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((path, file))
}

fn write_json<T: Serialize>(out: &Path, name: &str, config: &RunConfig, body: &T) -> CliResult<PathBuf> {
    let (path, mut file) = create(out, name)?;
    let mut value = serde_json::to_value(Artifact { config, body }).expect("artifact serialises");
    round_floats(&mut value);
    let text = serde_json::to_string_pretty(&value).expect("artifact serialises");
    writeln!(file, "{text}").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Rounds every float in an artifact to 9 significant digits.
fn round_floats(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn sim_config(args: &SimArgs) -> SimConfig {
    SimConfig {
        dt: args.dt,
        ..SimConfig::with_paths(args.paths, args.seed)
    }
}

fn cmd_solve(args: &SolveArgs) -> CliResult<u8> {
    let model = load_model(&args.model)?;
    let mut config = RunConfig::new("solve", args.common.tol).with_model(&args.model, &model);
    config.h = Some(args.common.h);
    let outcome: SolveOutcome = solve_model(&model, args.common.h, args.common.tol)?;
    write_json(&args.common.out, "solution.json", &config, &outcome)?;
    let (path, file) = create(&args.common.out, "value.csv")?;
    outcome
        .value
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| CliError::io(&path, e))?;
    let barriers: Vec<String> = outcome.policy.barriers.iter().map(|&b| fmt_sig(b)).collect();
    println!("{:?} via {:?}: barriers [{}]", outcome.case, outcome.method, barriers.join(", "));
    if outcome.policy.has_liquidation() {
        let d: Vec<String> = outcome.policy.liquidation.iter().map(|&d| fmt_sig(d)).collect();
        println!("liquidation levels [{}]", d.join(", "));
    }
    for n in &outcome.notes {
        eprintln!("note: {n}");
    }
    Ok(EXIT_OK)
}

fn cmd_tables(args: &TablesArgs) -> CliResult<u8> {
    let rows = compute_tables(args.tol);
    let (path, file) = create(&args.out, "tables.csv")?;
    write_tables(&rows, std::io::BufWriter::new(file)).map_err(|e| CliError::io(&path, e))?;
    let mut failed = false;
    for r in &rows {
        if let Err(e) = &r.barriers {
            failed = true;
            eprintln!("{} = {}: {e}", r.varied, fmt_sig(r.value));
        }
    }
    let deviations = compare_with_reference(&rows);
    let off: Vec<_> = deviations.iter().filter(|d| !d.within_tolerance()).collect();
    eprintln!(
        "{} of {} cells within tolerance of the reference table",
        deviations.len() - off.len(),
        deviations.len()
    );
    for d in off {
        eprintln!(
            "  {} = {} {}: computed {} reference {}",
            d.varied,
            fmt_sig(d.value),
            d.column,
            d.computed.map_or("failed".into(), fmt_sig),
            fmt_sig(d.reference)
        );
    }
    Ok(if failed { EXIT_NO_CONVERGENCE } else { EXIT_OK })
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<u8> {
    let model = load_model(&args.model)?;
    let policy = load_policy(&args.policy)?;
    let sim = sim_config(&args.sim);
    let mut config = RunConfig::new("verify", args.common.tol).with_model(&args.model, &model);
    config.h = Some(args.common.h);
    config.policy_path = args.policy.clone();
    config.simulation = Some(sim.clone());
    let probe_points = args.probe_points.clone().map(|p| p.0);
    config.probe_points = probe_points.clone();
    let opts = VerifyOptions {
        h: args.common.h,
        tol: args.common.tol,
        sim,
        probe_points,
        policy,
    };
    let report: VerifyReport = verify(&model, &opts)?;
    write_json(&args.common.out, "verify.json", &config, &report)?;
    for c in &report.checks {
        println!(
            "{} {}: {} (bound {}) {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            fmt_sig(c.value),
            fmt_sig(c.bound),
            c.detail
        );
    }
    if report.pass {
        Ok(EXIT_OK)
    } else {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        Err(CliError::VerificationFailed(names.join(", ")))
    }
}

#[derive(Serialize)]
struct EstimateBody {
    policy: BarrierPolicy,
    estimates: Vec<PointEstimate>,
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<u8> {
    let model = load_model(&args.model)?;
    let policy = match load_policy(&args.policy)? {
        Some(p) => p,
        None => solve_model(&model, args.common.h, args.common.tol)?.policy,
    };
    if args.regime >= model.len() {
        return Err(CliError::Usage(format!(
            "regime {} out of range for a {}-regime model",
            args.regime,
            model.len()
        )));
    }
    let sim = sim_config(&args.sim);
    let mut config = RunConfig::new("simulate", args.common.tol).with_model(&args.model, &model);
    if args.policy.is_none() {
        config.h = Some(args.common.h);
    }
    config.policy_path = args.policy.clone();
    config.simulation = Some(sim.clone());
    config.probe_points = Some(args.probe_points.0.clone());
    config.regime = Some(args.regime);
    let points: Vec<(f64, usize)> = args.probe_points.0.iter().map(|&x| (x, args.regime)).collect();
    let estimates = estimate_points(&model, &policy, &points, &sim)?;
    for e in &estimates {
        println!(
            "x0 = {} regime {}: {} ± {}",
            fmt_sig(e.x0),
            e.regime,
            fmt_sig(e.estimate.mean),
            fmt_sig(e.estimate.stderr)
        );
    }
    write_json(&args.common.out, "estimate.json", &config, &EstimateBody { policy: policy.clone(), estimates })?;
    if let Some(k) = args.dump_paths {
        let x0 = args.probe_points.0[0];
        let points = dump_paths(&model, &policy, x0, args.regime, &sim, k)?;
        let (path, file) = create(&args.common.out, "paths.csv")?;
        write_paths_csv(&points, std::io::BufWriter::new(file)).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Tables(a) => cmd_tables(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
