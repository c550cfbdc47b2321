use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commitguard::engine::EngineError;
use commitguard::oracle::{check_log, OracleError};
use commitguard::report::{emit, Format};
use commitguard::workload::{parse_scenario, parse_wall_trace, write_scenario, SyntheticSpec, WallMapping};
use commitguard::{golden, render_narrative, run, AccessClass, ExecutionLog, Policy, ResponsibilityId, SimConfig, Tick};

const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_WATCHDOG: u8 = 3;

#[derive(Parser)]
#[command(name = "commitguard", version, about = "Reader/writer coordination of commitments on shared accounts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario or wall trace and write log, metrics and narrative.
    Run(RunArgs),
    /// Check an execution log for overlapping writers.
    Check {
        log: PathBuf,
    },
    /// Write a synthetic scenario.
    Gen(GenArgs),
    /// Replay the built-in worked scenarios against their golden narratives.
    ReplayPaper {
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        sched: SchedArgs,
    },
}

#[derive(Args)]
struct SchedArgs {
    #[arg(long, default_value = "fcfs")]
    policy: Policy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Default commitment duration in ticks.
    #[arg(long)]
    duration: Option<Tick>,
    #[arg(long)]
    max_wait: Option<Tick>,
    /// Reclassify a responsibility, e.g. `Resp1=writer`. Repeatable.
    #[arg(long = "override", value_parser = parse_override)]
    overrides: Vec<(ResponsibilityId, AccessClass)>,
}

impl SchedArgs {
    fn config(&self) -> SimConfig {
        let mut cfg = SimConfig { seed: self.seed, policy: self.policy, ..SimConfig::default() };
        if let Some(d) = self.duration {
            cfg.default_duration = d;
        }
        if let Some(w) = self.max_wait {
            cfg.max_wait = w;
        }
        cfg.classification_overrides = self.overrides.iter().copied().collect::<BTreeMap<_, _>>();
        cfg
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON Lines).
    #[arg(required_unless_present = "wall_trace", conflicts_with = "wall_trace")]
    scenario: Option<PathBuf>,
    /// Wall-post trace (`poster owner timestamp` per line) instead of a scenario.
    #[arg(long)]
    wall_trace: Option<PathBuf>,
    /// Fraction of wall-trace lines turned into reader commitments.
    #[arg(long, default_value_t = 0.3)]
    reader_fraction: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    sched: SchedArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    events: usize,
    #[arg(long, default_value_t = 10)]
    accounts: usize,
    #[arg(long, default_value_t = 0.3)]
    reader_fraction: f64,
    #[arg(long, default_value_t = 4)]
    priority_levels: u32,
    #[arg(long, default_value = "facebook")]
    network: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_override(s: &str) -> Result<(ResponsibilityId, AccessClass), String> {
    let (r, c) = s.split_once('=').ok_or_else(|| format!("expected RespN=reader|writer, got `{s}`"))?;
    let r = r.parse().map_err(|e| format!("{e}"))?;
    let c = c.parse().map_err(|e| format!("{e}"))?;
    Ok((r, c))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMMITGUARD_LOG_LEVEL", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Check { log } => cmd_check(&log),
        Command::Gen(args) => cmd_gen(&args),
        Command::ReplayPaper { list, sched } => cmd_replay(list, &sched),
    };
    ExitCode::from(code)
}

fn cmd_run(args: &RunArgs) -> u8 {
    if !(0.0..=1.0).contains(&args.reader_fraction) {
        log::error!("--reader-fraction must lie in [0, 1]");
        return EXIT_PARSE;
    }
    let events = match load_events(args) {
        Ok(ev) => ev,
        Err(e) => {
            log::error!("{e:#}");
            return EXIT_PARSE;
        }
    };
    log::info!("loaded {} events", events.len());
    let out = match run(&events, &args.sched.config()) {
        Ok(out) => out,
        Err(e @ EngineError::WatchdogExpired { .. }) => {
            log::error!("{e}");
            return EXIT_WATCHDOG;
        }
        Err(e @ EngineError::InvalidConfig(_)) => {
            log::error!("{e}");
            return EXIT_FAIL;
        }
        Err(e) => {
            log::error!("{e}");
            return EXIT_PARSE;
        }
    };
    if let Err(e) = emit(&out.metrics, &out.log, args.format, &args.out) {
        log::error!("writing {}: {e}", args.out.display());
        return EXIT_FAIL;
    }
    log::info!(
        "{} commitments, {} waited, written to {}",
        out.metrics.commitments,
        out.metrics.waited_total,
        args.out.display()
    );
    0
}

fn load_events(args: &RunArgs) -> anyhow::Result<Vec<commitguard::SimEvent>> {
    use anyhow::Context;
    if let Some(path) = &args.wall_trace {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let mapping = WallMapping {
            reader_fraction: args.reader_fraction,
            duration: args.sched.duration,
            ..WallMapping::default()
        };
        return parse_wall_trace(&bytes, &mapping).with_context(|| path.display().to_string());
    }
    let path = args.scenario.as_deref().expect("clap enforces an input");
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&bytes).with_context(|| path.display().to_string())
}

fn cmd_check(path: &Path) -> u8 {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            log::error!("{}: {e}", path.display());
            return EXIT_PARSE;
        }
    };
    let verdict = ExecutionLog::parse_any(&bytes)
        .map_err(|e| e.to_string())
        .and_then(|log| check_log(&log).map_err(|OracleError::MalformedLog { index, reason }| {
            format!("record {index}: {reason}")
        }));
    let verdict = match verdict {
        Ok(v) => v,
        Err(e) => {
            log::error!("{}: {e}", path.display());
            return EXIT_PARSE;
        }
    };
    let mut stdout = io::stdout().lock();
    if verdict.is_consistent() {
        let _ = writeln!(stdout, "Consistent");
        return 0;
    }
    let _ = writeln!(stdout, "Inconsistent: {} violation(s)", verdict.violations.len());
    for v in &verdict.violations {
        let until = v.until.map_or_else(|| "end".to_string(), |t| t.to_string());
        let _ = writeln!(stdout, "  {} {} overlaps {} during [{}, {})", v.account, v.first, v.second, v.from, until);
    }
    EXIT_FAIL
}

fn cmd_gen(args: &GenArgs) -> u8 {
    if !(0.0..=1.0).contains(&args.reader_fraction) || args.accounts == 0 {
        log::error!("--reader-fraction must lie in [0, 1] and --accounts must be positive");
        return EXIT_PARSE;
    }
    let spec = SyntheticSpec {
        seed: args.seed,
        n_events: args.events,
        n_accounts: args.accounts,
        reader_fraction: args.reader_fraction,
        priority_levels: args.priority_levels,
        network: args.network.clone(),
        ..SyntheticSpec::default()
    };
    let text = write_scenario(&spec.generate());
    let res = match &args.out {
        Some(path) => commitguard::report::write_atomic(path, text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            EXIT_FAIL
        }
    }
}

fn cmd_replay(list: bool, sched: &SchedArgs) -> u8 {
    let scenarios = golden::all();
    let mut stdout = io::stdout().lock();
    if list {
        for g in &scenarios {
            let _ = writeln!(stdout, "{:<20} {}", g.name, g.description);
        }
        return 0;
    }
    let cfg = sched.config();
    let mut all_match = true;
    for g in &scenarios {
        let got = match run(&g.events, &cfg) {
            Ok(out) => render_narrative(&out.log),
            Err(e) => {
                log::error!("{}: {e}", g.name);
                all_match = false;
                let _ = writeln!(stdout, "FAIL {}", g.name);
                continue;
            }
        };
        if got == g.narrative {
            let _ = writeln!(stdout, "ok   {}", g.name);
        } else {
            all_match = false;
            let _ = writeln!(stdout, "FAIL {}", g.name);
            log::warn!("{}: expected\n{}got\n{}", g.name, g.narrative, got);
        }
    }
    if all_match {
        0
    } else {
        EXIT_FAIL
    }
}
