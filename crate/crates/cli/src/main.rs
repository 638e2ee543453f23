//! `cachevet`: verify, patch, quantify and simulate cache side channels.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cachevet_core::cache::{bits_to_string, observe, oracle_classes, patched_observation, run_program};
use cachevet_core::metrics::{Metrics, Prior};
use cachevet_core::patch::{read_patch_file, run_monitoring, write_patch_file, Patch};
use cachevet_core::program::{enumerate_secrets, unroll_with_limit, Assignment, DEFAULT_UNROLL_LIMIT};
use cachevet_core::smt::{SmtProcess, SOLVER_ENV};
use cachevet_core::{parse_program, run_cegar, AttackModel, CacheConfig, Program, Verdict};
use clap::builder::RangedU64ValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Exit status for errors and inconclusive verification.
const EXIT_ERROR: u8 = 2;
/// Exit status of `patch` when exploration stopped early.
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "cachevet", version, about = "Cache side-channel verification and runtime patching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether every secret yields the same observation.
    /// Exit 0 verified, 1 violation, 2 inconclusive or error.
    Verify(Common),
    /// Enumerate observation classes and synthesize patches merging them.
    /// Exit 0 when complete and patched to one class, 3 on partial exploration.
    Patch(Common),
    /// Observation classes and leakage metrics, with patches if given.
    Quantify(Common),
    /// Per-access dump of one concrete run.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Secret assignment such as `key=255`; all zeros by default.
        #[arg(long)]
        secret: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Program source file.
    #[arg(long)]
    program: PathBuf,
    /// Cache configuration (TOML with sets, line_size, assoc, policy).
    #[arg(long)]
    cache: PathBuf,
    /// Attack model.
    #[arg(long, value_enum, default_value = "time")]
    model: ModelArg,
    /// Patch file to apply (quantify, simulate) or to write (patch).
    #[arg(long)]
    patches: Option<PathBuf>,
    /// Solver command speaking SMT-LIB 2 on stdin.
    #[arg(long, env = SOLVER_ENV, default_value = "z3")]
    solver: String,
    /// Per-check solver timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Directory for reports and solver transcripts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest number of unrolled accesses accepted.
    #[arg(long, default_value_t = DEFAULT_UNROLL_LIMIT,
          value_parser = RangedU64ValueParser::<usize>::new().range(1..=DEFAULT_UNROLL_LIMIT as u64))]
    unroll_limit: usize,
    /// Report format on stdout; the output directory receives both.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Prior weights (JSON) for the entropy metrics; uniform by default.
    #[arg(long)]
    prior: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Time,
    Trace,
}

impl From<ModelArg> for AttackModel {
    fn from(m: ModelArg) -> AttackModel {
        match m {
            ModelArg::Time => AttackModel::Time,
            ModelArg::Trace => AttackModel::Trace,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Inputs shared by every command, loaded and checked.
struct Run {
    program: Program,
    cache: CacheConfig,
    model: AttackModel,
    out: Option<PathBuf>,
    format: Format,
}

impl Run {
    fn load(c: &Common) -> Result<Run> {
        let text = std::fs::read_to_string(&c.program).with_context(|| format!("reading {}", c.program.display()))?;
        let program = parse_program(&text).with_context(|| format!("parsing {}", c.program.display()))?;
        unroll_with_limit(&program, c.unroll_limit)?;
        let cache_text = std::fs::read_to_string(&c.cache).with_context(|| format!("reading {}", c.cache.display()))?;
        let cache = CacheConfig::from_toml(&cache_text).with_context(|| format!("parsing {}", c.cache.display()))?;
        if let Some(dir) = &c.out {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Run { program, cache, model: c.model.into(), out: c.out.clone(), format: c.format })
    }

    fn solver(&self, c: &Common) -> SmtProcess {
        let s = SmtProcess::new(&c.solver).with_timeout(Duration::from_secs(c.timeout.max(1)));
        match &self.out {
            Some(dir) => s.with_log_dir(dir.join("solver")),
            None => s,
        }
    }

    /// Prints the report in the chosen format and stores both forms.
    fn emit(&self, name: &str, text: &str, json: &serde_json::Value) -> Result<()> {
        let structured = serde_json::to_string_pretty(json)? + "\n";
        match self.format {
            Format::Text => print!("{text}"),
            Format::Json => print!("{structured}"),
        }
        if let Some(dir) = &self.out {
            write(&dir.join(format!("{name}.txt")), text)?;
            write(&dir.join(format!("{name}.json")), &structured)?;
        }
        Ok(())
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_patches(path: &Path) -> Result<Vec<Patch>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_patch_file(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_prior(c: &Common, p: &Program) -> Result<Prior> {
    match &c.prior {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Prior::from_json(p, &text).with_context(|| format!("parsing {}", path.display()))
        }
        None => Ok(Prior::uniform(p)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(cmd: &Command) -> Result<u8> {
    match cmd {
        Command::Verify(c) => verify(c),
        Command::Patch(c) => patch(c),
        Command::Quantify(c) => quantify(c),
        Command::Simulate { common, secret } => simulate(common, secret.as_deref()),
    }
}

fn verify(c: &Common) -> Result<u8> {
    let run = Run::load(c)?;
    let solver = run.solver(c);
    let out = run_cegar(&run.program, &run.cache, run.model, &solver)?;
    run.emit("verify", &out.to_text(), &out.to_json())?;
    Ok(match out.verdict {
        Verdict::Verified => 0,
        Verdict::Violation { .. } => 1,
        Verdict::Inconclusive { .. } => EXIT_ERROR,
    })
}

fn patch(c: &Common) -> Result<u8> {
    let run = Run::load(c)?;
    let target = match (&c.patches, &run.out) {
        (Some(path), _) => path.clone(),
        (None, Some(dir)) => dir.join("patches.json"),
        (None, None) => bail!("patch needs --patches or --out to know where to write the patch file"),
    };
    let solver = run.solver(c);
    let outcome = run_monitoring(&run.program, &run.cache, run.model, &solver)?;
    write(&target, &write_patch_file(&outcome.patches))?;

    let mut text = outcome.to_text();
    let _ = writeln!(text, "patch_file {}", target.display());
    let mut doc = outcome.to_json();
    doc["patch_file"] = json!(target.display().to_string());

    // metrics need the secret domain to be enumerable
    let mut single_class = None;
    if enumerate_secrets(&run.program).is_ok() {
        let prior = load_prior(c, &run.program)?;
        let before = oracle_classes(&run.program, &run.cache, run.model, None)?;
        let after = oracle_classes(&run.program, &run.cache, run.model, Some(&outcome.patches))?;
        let mb = Metrics::compute(&before, &prior)?;
        let ma = Metrics::compute(&after, &prior)?;
        text.push_str(&mb.to_text("before."));
        text.push_str(&ma.to_text("after."));
        doc["metrics"] = json!({ "before": mb.to_json(), "after": ma.to_json() });
        single_class = Some(after.class_count() == 1);
    } else {
        let _ = writeln!(text, "note secret domain too large for metrics");
    }
    run.emit("patch", &text, &doc)?;

    if !outcome.is_complete() {
        return Ok(EXIT_PARTIAL);
    }
    Ok(if single_class == Some(false) { EXIT_ERROR } else { 0 })
}

fn quantify(c: &Common) -> Result<u8> {
    let run = Run::load(c)?;
    let patches = c.patches.as_deref().map(load_patches).transpose()?;
    let report = oracle_classes(&run.program, &run.cache, run.model, patches.as_deref())?;
    let prior = load_prior(c, &run.program)?;
    let metrics = Metrics::compute(&report, &prior)?;
    let mut text = String::new();
    let mut summary = String::new();
    for line in report.to_text().lines().filter(|l| !l.starts_with("input ")) {
        let _ = writeln!(summary, "{line}");
    }
    text.push_str(&summary);
    text.push_str(&metrics.to_text(""));
    let mut doc = report.to_json();
    doc["metrics"] = metrics.to_json();
    run.emit("quantify", &text, &doc)?;
    Ok(0)
}

fn simulate(c: &Common, secret: Option<&str>) -> Result<u8> {
    let run = Run::load(c)?;
    let p = &run.program;
    let input = match secret {
        Some(s) => Assignment::parse(&p.secrets, s)?,
        None => Assignment(vec![0; p.secrets.len()]),
    };
    let patches = c.patches.as_deref().map(load_patches).transpose()?;
    let accesses = run_program(p, &run.cache, &input);
    let sites = p.site_count() as usize;

    let mut text = String::new();
    let _ = writeln!(text, "program {}", p.name);
    let _ = writeln!(text, "cache {}", run.cache);
    let _ = writeln!(text, "input {}", input.describe(&p.secrets));
    let mut rows = Vec::new();
    for i in 1..=sites {
        match accesses.iter().find(|a| a.site == i) {
            Some(a) => {
                let result = if a.miss { "miss" } else { "hit" };
                let _ = writeln!(
                    text,
                    "access {i} guard=1 address={:#x} block={} set={} tag={} {result}",
                    a.address, a.mapped.block, a.mapped.set, a.mapped.tag
                );
                rows.push(json!({
                    "index": i, "guard": true, "address": a.address, "block": a.mapped.block,
                    "set": a.mapped.set, "tag": a.mapped.tag, "result": result,
                }));
            }
            None => {
                let _ = writeln!(text, "access {i} guard=0");
                rows.push(json!({ "index": i, "guard": false }));
            }
        }
    }
    let misses: Vec<bool> = accesses.iter().map(|a| a.miss).collect();
    let time = observe(AttackModel::Time, &misses);
    let trace = observe(AttackModel::Trace, &misses);
    let _ = writeln!(text, "misses {}", if misses.is_empty() { "-".to_string() } else { bits_to_string(&misses) });
    let _ = writeln!(text, "observation time {time}");
    let _ = writeln!(text, "observation trace {trace}");
    let mut doc = json!({
        "program": p.name,
        "cache": run.cache,
        "input": input.describe(&p.secrets),
        "accesses": rows,
        "observation": { "time": time.to_string(), "trace": trace.to_string() },
    });
    if let Some(patches) = &patches {
        let patched = patched_observation(&p.secrets, &input, &accesses, run.model, patches)?;
        let _ = writeln!(text, "patched {} {patched}", run.model);
        doc["patched"] = json!({ "model": run.model, "observation": patched.to_string() });
    }
    run.emit("simulate", &text, &doc)?;
    Ok(0)
}
