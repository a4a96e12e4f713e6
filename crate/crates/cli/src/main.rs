use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use ddr_core::dictionary::Dictionary;
use ddr_core::lang::{parse_expr, Value, Workspace};
use ddr_core::monitor::{Executed, Monitor, MonitorError, RunReport};
use ddr_core::store::{file_name, read_table, Store};
use ddr_core::table::{delta_check, missing_tables, validate, write_table, Finding, DEFAULT_DELTA_THRESHOLD};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ddr", version, about = "Dictionary driven reports")]
struct Cli {
    /// Workspace directory.
    #[arg(short = 'w', long = "workspace", env = "DDR_WORKSPACE", global = true)]
    workspace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a dictionary expression and print its elements with genesis.
    Eval { expr: String },
    /// Validate table files and store them, queueing the rules that read them.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Validate table files against the workspace.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// List expected tables of a series that are not stored.
    Missing {
        #[arg(long)]
        series: String,
    },
    /// Compare two reports cell by cell.
    Delta {
        current: PathBuf,
        previous: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA_THRESHOLD)]
        threshold: f64,
    },
    /// Drain the rule queue.
    Run {
        /// Run at most one rule.
        #[arg(long)]
        once: bool,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        /// Deliver an event before running.
        #[arg(long)]
        event: Vec<String>,
        /// Keep ingesting table files dropped into DIR.
        #[arg(long, value_name = "DIR")]
        watch: Option<PathBuf>,
        #[arg(long, hide = true)]
        watch_cycles: Option<usize>,
        #[arg(long, hide = true, default_value_t = 500)]
        poll_ms: u64,
    },
    /// Print stored tables or the rule queue.
    Show {
        #[arg(long)]
        series: Option<String>,
        #[arg(long)]
        queue: bool,
    },
    /// Create a workspace layout, optionally copying definitions from DIR.
    Init {
        #[arg(long, value_name = "DIR")]
        from: Option<PathBuf>,
    },
}

type Fallible<T> = Result<T, String>;

struct Out {
    format: Format,
    text: String,
}

impl Out {
    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn json(&mut self, v: &impl Serialize) {
        self.text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Out {
        format: cli.format,
        text: String::new(),
    };
    let result = run(&cli, &mut out);
    print!("{}", out.text);
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("ddr: {e}");
            ExitCode::from(1)
        }
    }
}

fn root(cli: &Cli) -> Fallible<&Path> {
    match cli.workspace.as_deref() {
        Some(p) => Ok(p),
        None => Cli::command()
            .error(ErrorKind::MissingRequiredArgument, "no workspace: pass -w DIR or set DDR_WORKSPACE")
            .exit(),
    }
}

fn open(cli: &Cli) -> Fallible<(Store, Workspace)> {
    let store = Store::open(root(cli)?).map_err(|e| e.to_string())?;
    let loaded = store.load_workspace().map_err(|e| e.to_string())?;
    // warnings are shown once, by `init`
    if matches!(cli.command, Command::Init { .. }) {
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok((store, loaded.workspace))
}

fn monitor(cli: &Cli) -> Fallible<Monitor> {
    let (store, ws) = open(cli)?;
    Monitor::open(ws, store).map_err(|e| e.to_string())
}

/// Returns Ok(false) when diagnostics were reported.
fn run(cli: &Cli, out: &mut Out) -> Fallible<bool> {
    match &cli.command {
        Command::Init { from } => init(cli, out, from.as_deref()),
        Command::Eval { expr } => eval(cli, out, expr),
        Command::Check { files } => check(cli, out, files),
        Command::Ingest { files } => ingest(cli, out, files),
        Command::Missing { series } => missing(cli, out, series),
        Command::Delta {
            current,
            previous,
            threshold,
        } => delta(cli, out, current, previous, *threshold),
        Command::Run {
            once,
            max_steps,
            event,
            watch,
            watch_cycles,
            poll_ms,
        } => run_monitor(cli, out, *once, *max_steps, event, watch.as_deref(), *watch_cycles, *poll_ms),
        Command::Show { series, queue } => show(cli, out, series.as_deref(), *queue),
    }
}

fn init(cli: &Cli, out: &mut Out, from: Option<&Path>) -> Fallible<bool> {
    let root = root(cli)?;
    Store::open(root).map_err(|e| e.to_string())?;
    if let Some(src) = from {
        let entries = std::fs::read_dir(src).map_err(|e| format!("{}: {e}", src.display()))?;
        for entry in entries {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.extension().is_some_and(|e| e == "ddr") {
                let dest = root.join("defs").join(p.file_name().unwrap_or_default());
                std::fs::copy(&p, &dest).map_err(|e| format!("{}: {e}", dest.display()))?;
            }
        }
    }
    let mut m = monitor(cli)?;
    m.initialize().map_err(|e| e.to_string())?;
    let ws = m.workspace();
    #[derive(Serialize)]
    struct Summary {
        universes: usize,
        dictionaries: usize,
        families: usize,
        series: usize,
        rules: usize,
    }
    let s = Summary {
        universes: ws.universes.len(),
        dictionaries: ws.dictionaries.len(),
        families: ws.families.len(),
        series: ws.series.len(),
        rules: ws.rules.len(),
    };
    match out.format {
        Format::Json => out.json(&s),
        Format::Text => out.line(format!(
            "workspace {}: {} universes, {} dictionaries, {} families, {} series, {} rules",
            root.display(),
            s.universes,
            s.dictionaries,
            s.families,
            s.series,
            s.rules
        )),
    }
    Ok(true)
}

fn dict_lines(d: &Dictionary, out: &mut Out, indent: usize) {
    let width = d.entries.iter().map(|e| e.label.chars().count() + 2 * e.depth).max().unwrap_or(0);
    for e in &d.entries {
        let label = format!("{}{}{}", "  ".repeat(e.depth), e.label, if e.header { ":" } else { "" });
        out.line(format!("{}{label:<w$}  {{{}}}", " ".repeat(indent), e.genesis.cell_form(), w = width + 1));
    }
}

fn eval(cli: &Cli, out: &mut Out, expr: &str) -> Fallible<bool> {
    let (_, ws) = open(cli)?;
    let e = parse_expr(expr).map_err(|e| format!("{}:{}: {}", e.line, e.col, e.message))?;
    let v = ws.env().eval(&e).map_err(|e| e.to_string())?;
    let family = matches!(v, Value::Family(_));
    let dicts: Vec<Dictionary> = match v {
        Value::Dict(d) => vec![d],
        Value::Family(f) => f.members.into_values().map(|m| m.dictionary).collect(),
    };
    match out.format {
        Format::Json => out.json(&dicts),
        Format::Text => {
            for d in &dicts {
                if family {
                    out.line(format!("{} = {{ {} }}", d.name, d.labels().join(", ")));
                    dict_lines(d, out, 2);
                } else {
                    dict_lines(d, out, 0);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct FileFindings {
    file: String,
    findings: Vec<Finding>,
}

fn check_file(ws: &Workspace, path: &Path) -> Fallible<(ddr_core::table::Table, Vec<Finding>)> {
    let t = read_table(ws, path).map_err(|e| e.to_string())?;
    let f = validate(ws, &t);
    Ok((t, f))
}

fn report_findings(out: &mut Out, all: &[FileFindings]) {
    match out.format {
        Format::Json => out.json(&all),
        Format::Text => {
            for ff in all {
                if ff.findings.is_empty() {
                    out.line(format!("{}: ok", ff.file));
                }
                for f in &ff.findings {
                    out.line(format!("{}: {f}", ff.file));
                }
            }
        }
    }
}

fn check(cli: &Cli, out: &mut Out, files: &[PathBuf]) -> Fallible<bool> {
    let (_, ws) = open(cli)?;
    let mut all = Vec::new();
    for p in files {
        let (_, findings) = check_file(&ws, p)?;
        all.push(FileFindings {
            file: p.display().to_string(),
            findings,
        });
    }
    report_findings(out, &all);
    Ok(all.iter().all(|f| f.findings.is_empty()))
}

fn ingest(cli: &Cli, out: &mut Out, files: &[PathBuf]) -> Fallible<bool> {
    let mut m = monitor(cli)?;
    let mut rejected = Vec::new();
    #[derive(Serialize)]
    struct Ingested {
        file: String,
        table: String,
        changed: bool,
    }
    let mut done = Vec::new();
    for p in files {
        let (t, findings) = check_file(m.workspace(), p)?;
        if !findings.is_empty() {
            rejected.push(FileFindings {
                file: p.display().to_string(),
                findings,
            });
            continue;
        }
        let changed = m.ingest(&t).map_err(|e| e.to_string())?;
        done.push(Ingested {
            file: p.display().to_string(),
            table: file_name(&t.key()),
            changed,
        });
    }
    match out.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Both<'a> {
                ingested: &'a [Ingested],
                rejected: &'a [FileFindings],
            }
            out.json(&Both {
                ingested: &done,
                rejected: &rejected,
            })
        }
        Format::Text => {
            for d in &done {
                out.line(format!("{}: stored as tables/{} ({})", d.file, d.table, if d.changed { "changed" } else { "unchanged" }));
            }
            for r in &rejected {
                for f in &r.findings {
                    out.line(format!("{}: rejected: {f}", r.file));
                }
            }
        }
    }
    Ok(rejected.is_empty())
}

fn missing(cli: &Cli, out: &mut Out, series: &str) -> Fallible<bool> {
    let (store, ws) = open(cli)?;
    let have: Vec<_> = store.tables_of(&ws, series).map_err(|e| e.to_string())?.iter().map(|t| t.key()).collect();
    let slots = missing_tables(&ws, series, &have).map_err(|e| e.to_string())?;
    match out.format {
        Format::Json => out.json(&slots),
        Format::Text => {
            for s in &slots {
                out.line(if s.name.is_none() && s.attrs.is_empty() { "(single table)".to_string() } else { s.to_string() });
            }
            out.line(format!("{} missing", slots.len()));
        }
    }
    Ok(true)
}

fn delta(cli: &Cli, out: &mut Out, current: &Path, previous: &Path, threshold: f64) -> Fallible<bool> {
    let (_, ws) = open(cli)?;
    let cur = read_table(&ws, current).map_err(|e| e.to_string())?;
    let prev = read_table(&ws, previous).map_err(|e| e.to_string())?;
    let findings = delta_check(&ws, &cur, &prev, threshold).map_err(|e| e.to_string())?;
    match out.format {
        Format::Json => out.json(&findings),
        Format::Text => {
            for f in &findings {
                out.line(f.to_string());
            }
            if findings.is_empty() {
                out.line(format!("no change above {:.1}%", threshold * 100.0));
            }
        }
    }
    Ok(findings.is_empty())
}

fn executed_line(e: &Executed) -> String {
    let mut s = e.rule.clone();
    match &e.failure {
        Some(f) => s.push_str(&format!(": failed: {f}")),
        None if e.changed.is_empty() => s.push_str(": no change"),
        None => s.push_str(&format!(": wrote {}", e.changed.join(", "))),
    }
    for r in &e.reports {
        s.push_str(&format!("\n  {r}"));
    }
    s
}

/// Ingest every valid table file in `dir` not yet seen with this content.
fn ingest_dir(m: &mut Monitor, dir: &Path, seen: &mut BTreeMap<PathBuf, String>, out: &mut Out) -> Fallible<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ddr"))
        .collect();
    files.sort();
    for p in files {
        let Ok(text) = std::fs::read_to_string(&p) else { continue };
        if seen.get(&p) == Some(&text) {
            continue;
        }
        seen.insert(p.clone(), text);
        match check_file(m.workspace(), &p) {
            Ok((t, f)) if f.is_empty() => {
                m.ingest(&t).map_err(|e| e.to_string())?;
                out.line(format!("ingested {}", p.display()));
            }
            Ok((_, f)) => {
                for f in f {
                    out.line(format!("{}: rejected: {f}", p.display()));
                }
            }
            Err(e) => out.line(format!("{}: rejected: {e}", p.display())),
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_monitor(
    cli: &Cli,
    out: &mut Out,
    once: bool,
    max_steps: usize,
    events: &[String],
    watch: Option<&Path>,
    cycles: Option<usize>,
    poll_ms: u64,
) -> Fallible<bool> {
    let mut m = monitor(cli)?;
    m.initialize().map_err(|e| e.to_string())?;
    for e in events {
        m.deliver_event(e).map_err(|e| e.to_string())?;
    }
    let mut report = RunReport::default();
    let mut ok = true;
    let mut seen = BTreeMap::new();
    let mut cycle = 0;
    loop {
        if let Some(dir) = watch {
            ingest_dir(&mut m, dir, &mut seen, out)?;
        }
        if once {
            if let Some(e) = m.step().map_err(|e| e.to_string())? {
                report.executed.push(e);
            }
            report.quiescent = m.pending().next().is_none();
        } else {
            match m.run_to_quiescence(max_steps) {
                Ok(r) => {
                    report.executed.extend(r.executed);
                    report.quiescent = true;
                }
                Err(MonitorError::NonQuiescent(r)) => {
                    report.executed.extend(r.executed);
                    report.quiescent = false;
                    ok = false;
                }
                Err(e) => return Err(e.to_string()),
            }
        }
        cycle += 1;
        if watch.is_none() || once || cycles.is_some_and(|c| cycle >= c) {
            break;
        }
        std::thread::sleep(Duration::from_millis(poll_ms));
    }
    ok &= report.executed.iter().all(|e| e.failure.is_none());
    match out.format {
        Format::Json => out.json(&report),
        Format::Text => {
            for e in &report.executed {
                out.line(executed_line(e));
            }
            out.line(if report.quiescent {
                format!("quiescent after {} steps", report.executed.len())
            } else {
                format!("not quiescent after {} steps", report.executed.len())
            });
        }
    }
    Ok(ok)
}

fn show(cli: &Cli, out: &mut Out, series: Option<&str>, queue: bool) -> Fallible<bool> {
    if queue {
        let m = monitor(cli)?;
        match out.format {
            Format::Json => out.json(&m.queue()),
            Format::Text => {
                for e in m.queue() {
                    out.line(format!(
                        "{} {} ({}){}",
                        e.seq,
                        e.rule,
                        e.reason,
                        if e.parked { " parked" } else { "" }
                    ));
                }
                if m.queue().is_empty() {
                    out.line("queue empty");
                }
            }
        }
        return Ok(true);
    }
    let (store, ws) = open(cli)?;
    let tables = match series {
        Some(s) => store.tables_of(&ws, s),
        None => store.load_tables(&ws),
    }
    .map_err(|e| e.to_string())?;
    match out.format {
        Format::Json => out.json(&tables),
        Format::Text => {
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    out.line("");
                }
                out.text.push_str(&write_table(t));
            }
        }
    }
    Ok(true)
}
