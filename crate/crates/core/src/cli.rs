//! `d2dshare` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration or runtime error,
//! 3 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::matching::{PreferenceList, ProposalRound};
use crate::report::{write_csv, RunManifest};
use crate::simulation::{run_sweep, trace_drop, DropTrace, Execution, Scheme};
use crate::stackelberg::OracleGrid;
use crate::verify::{run_verification, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable supplying the default `--out-dir`.
pub const OUT_DIR_ENV: &str = "D2DSHARE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "d2dshare", version, about = "Stackelberg pricing and stable matching for D2D / cell-edge spectrum sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte Carlo sweeps and write results.csv plus manifest.toml.
    Sweep(SweepArgs),
    /// Cross-check closed forms against brute-force oracles.
    Verify(VerifyArgs),
    /// Trace a single drop: pair equilibria, preferences, proposal rounds.
    Pair(PairArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Scenario config (TOML, dotted keys). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Restrict the sweep to one scheme.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Comma-separated D2D pair counts.
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    c_fixed: Option<f64>,
    /// Do not force CEU direct links into outage.
    #[arg(long)]
    no_condition_outage: bool,
    /// Run drops on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Price grid step of the equilibrium oracle.
    #[arg(long, default_value_t = 1e-2)]
    grid_c: f64,
    /// Allocation grid step of the oracles.
    #[arg(long, default_value_t = 1e-3)]
    grid_alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Shift every closed-form allocation by this amount (negative control).
    #[arg(long, default_value_t = 0.0, hide = true, allow_negative_numbers = true)]
    perturb_alpha: f64,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "proposed")]
    scheme: Scheme,
    /// Number of CEUs (defaults to the config's).
    #[arg(long)]
    m: Option<usize>,
    /// Number of D2D pairs (defaults to the first configured value).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    drop_index: u64,
    /// Include both preference tables.
    #[arg(long)]
    dump_preferences: bool,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_condition_outage: bool,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<ConfigFile, Failure> {
    match &arg.config {
        None => Ok(ConfigFile::default()),
        Some(path) => read_config(path),
    }
}

fn read_config(path: &Path) -> Result<ConfigFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    ConfigFile::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Parses `args` (including the program name) and runs the command,
/// writing normal output to `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Pair(a) => cmd_pair(a, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut file = match &args.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            RunManifest::parse(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
                .config
        }
        None => load_config(&args.config)?,
    };
    let s = &mut file.scenario;
    if let Some(scheme) = args.scheme {
        s.schemes = vec![scheme];
    }
    if let Some(n_values) = args.n_values {
        s.n_values = n_values;
    }
    if let Some(drops) = args.drops {
        s.drops = drops;
    }
    if let Some(seed) = args.seed {
        s.master_seed = seed;
    }
    if let Some(c) = args.c_fixed {
        s.c_fixed = Some(c);
    }
    if args.no_condition_outage {
        s.condition_outage = false;
    }
    let config = file.scenario().map_err(|e| Failure::config(e.to_string()))?;

    let execution = if args.serial { Execution::Serial } else { Execution::Parallel };
    let result = run_sweep(&config, execution).map_err(|e| Failure::config(e.to_string()))?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::config(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let csv_path = args.out_dir.join("results.csv");
    let manifest_path = args.out_dir.join("manifest.toml");

    let mut csv = Vec::new();
    write_csv(&result, config.master_seed, &mut csv).expect("writing to memory");
    std::fs::write(&csv_path, csv)
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", csv_path.display())))?;

    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = RunManifest::new(file, &result, timestamp);
    std::fs::write(&manifest_path, manifest.to_toml())
        .map_err(|e| Failure::config(format!("cannot write {}: {e}", manifest_path.display())))?;

    let _ = writeln!(
        stdout,
        "wrote {} ({} cells x {} drops) and {}",
        csv_path.display(),
        result.cells.len(),
        config.drops,
        manifest_path.display()
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    if args.instances == 0 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "--instances must be at least 1".into(),
        });
    }
    if !(args.grid_c > 0.0 && args.grid_alpha > 0.0) {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "grid steps must be positive".into(),
        });
    }
    let config = load_config(&args.config)?
        .scenario()
        .map_err(|e| Failure::config(e.to_string()))?;
    let opts = VerifyOptions {
        instances: args.instances,
        grid: OracleGrid::new(args.grid_c, args.grid_alpha),
        seed: args.seed,
        perturb_alpha: args.perturb_alpha,
    };
    let report = run_verification(&config.game, &opts);
    let _ = stdout.write_all(report.render().as_bytes());
    if report.passed() {
        let _ = writeln!(stdout, "all checks passed");
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: "verification failed".into(),
        })
    }
}

fn cmd_pair(args: PairArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut file = load_config(&args.config)?;
    if let Some(m) = args.m {
        file.scenario.m = m;
    }
    if let Some(seed) = args.seed {
        file.scenario.master_seed = seed;
    }
    if args.no_condition_outage {
        file.scenario.condition_outage = false;
    }
    let config = file.scenario().map_err(|e| Failure::config(e.to_string()))?;
    let n = args.n.or(config.n_values.first().copied()).unwrap_or(0);
    let trace = trace_drop(&config, args.scheme, n, args.drop_index)
        .map_err(|e| Failure::config(e.to_string()))?;

    let mut text = format!(
        "scheme = {}\nm = {}\nn = {}\nmaster_seed = {}\ndrop_index = {}\n\n",
        args.scheme, config.m, n, config.master_seed, args.drop_index
    );
    text.push_str(&format_trace(&trace, args.dump_preferences));

    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    Ok(())
}

/// Renders a traced drop: per-pair equilibria, optional preference tables,
/// the proposal rounds and the final matching.
pub fn format_trace(trace: &DropTrace, dump_preferences: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[pairs]");
    let _ = writeln!(out, "ceu d2d feasible c_star alpha_star u_ceu u_d2d r_ceu r_d2d");
    for (i, row) in trace.outcomes.iter().enumerate() {
        for (j, o) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i} {j} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                o.feasible, o.c_star, o.alpha_star, o.u_ceu, o.u_d2d, o.r_ceu, o.r_d2d
            );
        }
    }
    if dump_preferences {
        out.push('\n');
        out.push_str(&format_preferences("ceu_preferences", &trace.ceu_prefs));
        out.push('\n');
        out.push_str(&format_preferences("d2d_preferences", &trace.d2d_prefs));
    }
    out.push('\n');
    out.push_str(&format_rounds(&trace.rounds));
    out.push('\n');
    let _ = writeln!(out, "[matching]");
    for i in 0..trace.matching.ceu_count() {
        match trace.matching.partner_of_ceu(i) {
            Some(j) => writeln!(out, "ceu {i} = d2d {j}"),
            None => writeln!(out, "ceu {i} = unmatched"),
        }
        .expect("writing to String");
    }
    let m = &trace.metrics;
    let _ = writeln!(
        out,
        "\n[metrics]\nceu_total_utility = {}\nd2d_total_utility = {}\nceu_sum_rate = {}\nd2d_sum_rate = {}\noutage_fraction = {}\nmatched_count = {}",
        m.ceu_total_utility, m.d2d_total_utility, m.ceu_sum_rate, m.d2d_sum_rate, m.outage_fraction, m.matched_count
    );
    out
}

pub fn format_preferences(title: &str, prefs: &[PreferenceList]) -> String {
    let mut out = format!("[{title}]\n");
    for list in prefs {
        let ranked: String = list.ranked.iter().map(|p| format!(" {p}")).collect();
        let _ = writeln!(out, "{}:{ranked}", list.owner);
    }
    out
}

/// Proposal log, one block per round; arrows read `ceu->d2d`.
pub fn format_rounds(rounds: &[ProposalRound]) -> String {
    fn arrows(pairs: &[(usize, usize)]) -> String {
        pairs.iter().map(|(i, j)| format!(" {i}->{j}")).collect()
    }
    let mut out = String::new();
    for (k, r) in rounds.iter().enumerate() {
        let _ = writeln!(out, "[round {}]", k + 1);
        let _ = writeln!(out, "proposals ={}", arrows(&r.proposals));
        let _ = writeln!(out, "rejections ={}", arrows(&r.rejections));
        let _ = writeln!(out, "held ={}", arrows(&r.held));
    }
    out
}
