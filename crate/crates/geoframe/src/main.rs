//! `geoframe` command-line tool.
//!
//! Exit codes: 0 success, 2 interpretation failure, 3 repair rejection or
//! invalid frame, 4 compile or execution error, 5 ambiguous place (re-run
//! with `--pick-anchor N`), 64 usage or configuration error, 65 unreadable
//! registry, table or data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geoframe::audit::{AuditLog, AuditRecord};
use geoframe::harness::{parse_cases, render_json, render_markdown, run_suite, InputMode, DEFAULT_CASES};
use geoframe::ingest::{load_data_dir, write_data_dir, LoadedData};
use geoframe::interpret::{build_system_prompt, Interpreter, RemoteBackend, RemoteConfig};
use geoframe::outputs::{render_html, render_map, render_table, repair_sentence, TableFormat};
use geoframe::pipeline::{Engine, ErrorCode, QueryResponse};
use geoframe::registry::{default_registry, load_registry_file};
use geoframe::service::{serve, AppState};
use geoframe::table::{default_table, load_table_file};
use geoframe_core::fixture::{generate_fixture, FixtureSpec};
use geoframe_core::schema::SchemaRegistry;

const EXIT_INTERPRET: u8 = 2;
const EXIT_REPAIR: u8 = 3;
const EXIT_EXECUTE: u8 = 4;
const EXIT_AMBIGUOUS: u8 = 5;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(
    name = "geoframe",
    version,
    about = "Ask spatial questions of crash data in plain language",
    args_conflicts_with_subcommands = true,
    subcommand_negates_reqs = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Option<Cmd>,
    #[command(flatten)]
    query: QueryArgs,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic dataset directory.
    Fixture(FixtureArgs),
    /// Run the evaluation suite.
    Eval(EvalArgs),
    /// Print the interpreter's system prompt.
    Prompt(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Rules,
    Remote,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Geojson,
    Csv,
    Json,
    Html,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Interpret,
    Seeded,
}

#[derive(Args)]
struct ConfigArgs {
    /// Registry TOML file; the shipped registry when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Normalization table CSV; the shipped table when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Interpreter backend. `remote` reads GEOFRAME_LLM_* variables.
    #[arg(long, value_enum, default_value = "rules")]
    backend: Backend,
}

#[derive(Args)]
struct QueryArgs {
    /// Question to answer.
    #[arg(long, required = true)]
    query: Option<String>,
    /// Dataset directory (`<Entity>.geojson`, `<Entity>.csv`, `places.json`).
    #[arg(long, required = true)]
    data: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Output directory.
    #[arg(long, default_value = "geoframe-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "geojson")]
    format: Format,
    /// Candidate number (from 1) for an ambiguous place.
    #[arg(long)]
    pick_anchor: Option<usize>,
}

#[derive(Args)]
struct DataSource {
    /// Dataset directory.
    #[arg(long, conflicts_with = "fixture")]
    data: Option<PathBuf>,
    /// Use a generated fixture with this seed instead of a directory.
    #[arg(long)]
    fixture: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    source: DataSource,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Append one JSON line per request to this file.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// At most 1,500 crashes.
    #[arg(long)]
    small: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    source: DataSource,
    #[command(flatten)]
    engine: EngineArgs,
    /// Case file (JSON lines); the shipped suite when omitted.
    #[arg(long)]
    cases: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "interpret")]
    mode: Mode,
    /// Write report.md and report.json here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave latency out of the reports.
    #[arg(long)]
    no_latency: bool,
}

/// A failure carrying its exit code.
struct Fail(u8, String);

type CmdResult = Result<(), Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_USAGE, msg.into())
}

fn data_err(msg: impl ToString) -> Fail {
    Fail(EXIT_DATA, msg.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Fail + '_ {
    move |e| data_err(format!("{}: {e}", path.display()))
}

fn load_registry(c: &ConfigArgs) -> Result<SchemaRegistry, Fail> {
    match &c.registry {
        Some(p) => load_registry_file(p).map_err(data_err),
        None => Ok(default_registry()),
    }
}

fn build_engine(args: &EngineArgs, data: impl FnOnce(&SchemaRegistry) -> Result<LoadedData, Fail>) -> Result<Engine, Fail> {
    let reg = load_registry(&args.config)?;
    let table = match &args.config.table {
        Some(p) => load_table_file(p).map_err(data_err)?,
        None => default_table(),
    };
    let interpreter = match args.backend {
        Backend::Rules => Interpreter::Rules,
        Backend::Remote => Interpreter::Remote(RemoteBackend::new(RemoteConfig::from_env().map_err(usage)?)),
    };
    let data = data(&reg)?;
    Ok(Engine::new(reg, table, data, interpreter))
}

fn load_source(src: &DataSource, reg: &SchemaRegistry) -> Result<LoadedData, Fail> {
    match (&src.data, src.fixture) {
        (Some(dir), _) => load_data_dir(dir, reg).map_err(data_err),
        (None, seed) => {
            let f = generate_fixture(seed.unwrap_or(1), FixtureSpec::default(), reg).map_err(data_err)?;
            Ok(LoadedData::from(f))
        }
    }
}

fn exit_for(code: ErrorCode) -> u8 {
    match code {
        ErrorCode::EmptyQuery | ErrorCode::InterpreterUnavailable | ErrorCode::InterpretationFailed => EXIT_INTERPRET,
        ErrorCode::RepairRejected | ErrorCode::InvalidFrame => EXIT_REPAIR,
        ErrorCode::CompileFailed | ErrorCode::ExecutionFailed => EXIT_EXECUTE,
        ErrorCode::AmbiguousAnchor | ErrorCode::BadPick => EXIT_AMBIGUOUS,
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Fail> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn run_query(a: QueryArgs) -> CmdResult {
    let (Some(query), Some(data)) = (a.query, a.data) else {
        return Err(usage("--query and --data are required"));
    };
    let engine = build_engine(&a.engine, |reg| load_data_dir(&data, reg).map_err(data_err))?;
    let resp = engine.run_query(&query, a.pick_anchor);
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let audit = AuditLog::open(&a.out.join("audit.jsonl")).map_err(io_err(&a.out))?;
    audit.record(&AuditRecord::from_response("query", &resp));

    let Some(result) = &resp.result else {
        for act in &resp.repair_report.actions {
            println!("{}", repair_sentence(act));
        }
        write_file(&a.out, "response.json", &response_json(&resp))?;
        return Err(report_failure(&resp, &query));
    };
    let summary = resp.nl_summary.clone().unwrap_or_default();
    println!("{summary}");
    for act in &resp.repair_report.actions {
        println!("  {}: '{}' -> '{}' [{}]", act.path, act.before, act.after, act.rule_id);
    }
    let mut written = vec![write_file(&a.out, "summary.txt", &format!("{summary}\n"))?];
    if let Some(text) = &resp.graph_audit_text {
        written.push(write_file(&a.out, "graph.txt", text)?);
    }
    match a.format {
        Format::Geojson => written.push(write_file(&a.out, "map.geojson", &render_map(result))?),
        Format::Html => {
            written.push(write_file(&a.out, "map.geojson", &render_map(result))?);
            written.push(write_file(&a.out, "map.html", &render_html(result, &summary))?);
        }
        Format::Csv => {
            written.push(write_file(&a.out, "table.csv", &render_table(result, &engine.registry, TableFormat::Csv))?)
        }
        Format::Json => {
            written.push(write_file(&a.out, "response.json", &response_json(&resp))?);
            written.push(write_file(&a.out, "table.json", &render_table(result, &engine.registry, TableFormat::Json))?);
        }
    }
    if a.format != Format::Csv && result.ranking.is_some() {
        written.push(write_file(&a.out, "table.csv", &render_table(result, &engine.registry, TableFormat::Csv))?);
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn response_json(r: &QueryResponse) -> String {
    serde_json::to_string_pretty(r).expect("serializes") + "\n"
}

fn report_failure(resp: &QueryResponse, query: &str) -> Fail {
    let err = resp.error.as_ref().expect("failed response has an error");
    let stage = serde_json::to_value(err.stage).expect("serializes");
    let mut msg = format!("{} stage failed: {}", stage.as_str().unwrap_or("?"), err.message);
    if !err.candidates.is_empty() {
        for (i, c) in err.candidates.iter().enumerate() {
            let id = c.record_id.as_deref().map(|id| format!(" [{id}]")).unwrap_or_default();
            msg.push_str(&format!("\n  {}. {} ({:.5}, {:.5}){id}", i + 1, c.name, c.location.lon, c.location.lat));
        }
        msg.push_str(&format!("\nRe-run with --pick-anchor N to choose, e.g. --query {query:?} --pick-anchor 1"));
    }
    Fail(exit_for(err.code), msg)
}

fn run_fixture(a: FixtureArgs) -> CmdResult {
    let reg = default_registry();
    let spec = if a.small { FixtureSpec::small() } else { FixtureSpec::default() };
    let f = generate_fixture(a.seed, spec, &reg).map_err(data_err)?;
    write_data_dir(&a.out, &f.dataset, &f.places).map_err(data_err)?;
    println!("{} records, version {}", f.dataset.len(), f.dataset.version());
    Ok(())
}

fn run_eval(a: EvalArgs) -> CmdResult {
    let engine = build_engine(&a.engine, |reg| load_source(&a.source, reg))?;
    let text = match &a.cases {
        Some(p) => std::fs::read_to_string(p).map_err(io_err(p))?,
        None => DEFAULT_CASES.to_string(),
    };
    let cases = parse_cases(&text).map_err(data_err)?;
    let mode = match a.mode {
        Mode::Interpret => InputMode::Interpret,
        Mode::Seeded => InputMode::Seeded,
    };
    let report = run_suite(&engine, &cases, mode);
    let md = render_markdown(&report, !a.no_latency);
    print!("{md}");
    for c in report.failures() {
        eprintln!("{}: intent_complete={} exec_success={} {:?} {}", c.id, c.intent_complete, c.exec_success, c.diff, c.error.as_deref().unwrap_or(""));
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_file(dir, "report.md", &md)?;
        write_file(dir, "report.json", &render_json(&report, !a.no_latency))?;
    }
    Ok(())
}

fn run_serve(a: ServeArgs) -> CmdResult {
    let engine = build_engine(&a.engine, |reg| load_source(&a.source, reg))?;
    let audit = match &a.audit {
        Some(p) => AuditLog::open(p).map_err(io_err(p))?,
        None => AuditLog::Off,
    };
    let version = engine.dataset_version().to_string();
    let state = Arc::new(AppState { engine, audit });
    let rt = tokio::runtime::Runtime::new().map_err(|e| Fail(1, e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| usage(format!("cannot bind {}: {e}", a.addr)))?;
        eprintln!("listening on http://{} (dataset {version})", listener.local_addr().map_err(|e| Fail(1, e.to_string()))?);
        serve(listener, state).await.map_err(|e| Fail(1, e.to_string()))
    })
}

fn run_prompt(a: ConfigArgs) -> CmdResult {
    print!("{}", build_system_prompt(&load_registry(&a)?).text);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.cmd {
        Some(Cmd::Serve(a)) => run_serve(a),
        Some(Cmd::Fixture(a)) => run_fixture(a),
        Some(Cmd::Eval(a)) => run_eval(a),
        Some(Cmd::Prompt(a)) => run_prompt(a),
        None => run_query(cli.query),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
