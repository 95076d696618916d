//! Command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use loomweaver::diag::Diagnostic;
use loomweaver::emit::{emit_hls_c, emit_report};
use loomweaver::frontend::{parse_program, validate, Function};
use loomweaver::interp::{compare_outputs, random_inputs, run_loopir, run_reference};
use loomweaver::loopir::print_loopir;
use loomweaver::perfmodel::{CostTable, ResourceBudget};
use loomweaver::pipeline::{compile, CompileOptions, CompileOutput};
use loomweaver::polyhedral::print_ast;
use loomweaver::report::{deps_json, ReportJson};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmitKind {
    Hlsc,
    Loopir,
    Ast,
    Deps,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "loomweaver",
    version,
    about = "Compile a decoupled algorithm/schedule DSL to synthesizable HLS C"
)]
struct Cli {
    /// Input program (.pom)
    input: PathBuf,

    /// Output file (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// What to emit
    #[arg(long, value_enum, default_value_t = EmitKind::Hlsc)]
    emit: EmitKind,

    /// Run the two-stage design space exploration
    #[arg(long)]
    dse: bool,

    /// Resource budget, e.g. dsp=220,lut=53200,ff=106400,bram=280
    #[arg(long)]
    budget: Option<String>,

    /// Permit reassociation of float reductions when unrolling
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    allow_reassoc: bool,

    /// Model DSP reuse across sequential nodes
    #[arg(long)]
    reuse: bool,

    /// Seed for the equivalence check inputs
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Check compiled output against the reference interpreter
    #[arg(long)]
    check: bool,

    /// Cost table file (overridden by LOOMWEAVER_COST_TABLE)
    #[arg(long)]
    cost_table: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

/// Exit 0 on success, 1 on diagnostics; `Err` is reserved for internal
/// failures (exit 2).
fn run(cli: &Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let src = match std::fs::read_to_string(&cli.input) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: error: {e}", cli.input.display());
            return Ok(ExitCode::from(1));
        }
    };
    let file = cli.input.display();

    let func = match parse_program(&src) {
        Ok(f) => f,
        Err(diags) => {
            print_diags(&cli.input, &diags);
            emit_failure_report(cli, &diags);
            return Ok(ExitCode::from(1));
        }
    };
    let diags = validate(&func);
    if diags.iter().any(|d| d.is_error()) {
        print_diags(&cli.input, &diags);
        emit_failure_report(cli, &diags);
        return Ok(ExitCode::from(1));
    }

    let mut opts = CompileOptions {
        dse: cli.dse,
        ..Default::default()
    };
    opts.dse_config.allow_reassoc = cli.allow_reassoc;
    opts.dse_config.reuse = cli.reuse;
    if let Some(budget) = &cli.budget {
        match parse_budget(budget) {
            Ok(b) => opts.dse_config.budget = b,
            Err(msg) => {
                eprintln!("{file}: error: {msg}");
                return Ok(ExitCode::from(1));
            }
        }
    }
    let cost_path = std::env::var_os("LOOMWEAVER_COST_TABLE")
        .map(PathBuf::from)
        .or_else(|| cli.cost_table.clone());
    if let Some(path) = cost_path {
        let text = std::fs::read_to_string(&path)?;
        let mut table = CostTable::default();
        if let Err(e) = table.apply_config(&text) {
            eprintln!("{}: error: {e}", path.display());
            return Ok(ExitCode::from(1));
        }
        opts.cost_table = table;
    }

    let out = match compile(&func, &opts) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("{file}: error: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    for w in &out.warnings {
        eprintln!("{file}: {w}");
    }

    if cli.check {
        if let Some(msg) = run_check(&func, &out, cli.seed, &opts) {
            eprintln!("{file}: error: equivalence check failed: {msg}");
            return Ok(ExitCode::from(1));
        }
        eprintln!("equivalence check passed (seed {})", cli.seed);
    }

    let text = match cli.emit {
        EmitKind::Hlsc => match emit_hls_c(&out.ir) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("{file}: error: {e}");
                return Ok(ExitCode::from(1));
            }
        },
        EmitKind::Loopir => print_loopir(&out.ir),
        EmitKind::Ast => print_ast(&out.ast, &out.stmts),
        EmitKind::Deps => {
            serde_json::to_string_pretty(&deps_json(&out.graph, &out.paths))? + "\n"
        }
        EmitKind::Json => {
            let report = ReportJson {
                function: func.name.clone(),
                seed: cli.seed,
                deps: Some(deps_json(&out.graph, &out.paths)),
                estimates: Some(out.estimates_json()),
                dse: out.dse_report.clone(),
                hints: out.hints.clone(),
                diagnostics: out.warnings.iter().map(|w| w.to_string()).collect(),
                output: cli.output.as_ref().map(|p| p.display().to_string()),
            };
            emit_report(&report) + "\n"
        }
    };

    match &cli.output {
        Some(path) => write_atomically(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_diags(input: &Path, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}:{d}", input.display());
    }
}

/// Under `--emit json`, failures still produce a machine-readable body
/// with the diagnostics array.
fn emit_failure_report(cli: &Cli, diags: &[Diagnostic]) {
    if cli.emit == EmitKind::Json {
        let body = serde_json::json!({
            "diagnostics": diags.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&body).unwrap_or_default());
    }
}

fn parse_budget(spec: &str) -> Result<ResourceBudget, String> {
    let mut budget = ResourceBudget::default();
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("bad budget entry `{part}`, expected key=value"))?;
        let value: i64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad budget value `{value}`"))?;
        match key.trim() {
            "dsp" => budget.dsp = value,
            "lut" => budget.lut = value,
            "ff" => budget.ff = value,
            "bram" => budget.bram = value,
            other => return Err(format!("unknown budget key `{other}`")),
        }
    }
    Ok(budget)
}

/// Reference vs. compiled equivalence over seeded random inputs.
fn run_check(
    func: &Function,
    out: &CompileOutput,
    seed: u64,
    opts: &CompileOptions,
) -> Option<String> {
    let inputs = random_inputs(func, seed);
    let want = match run_reference(func, &inputs) {
        Ok(w) => w,
        Err(e) => return Some(e.to_string()),
    };
    let got = match run_loopir(&out.ir, func, &inputs) {
        Ok(g) => g,
        Err(e) => return Some(e.to_string()),
    };
    let _ = opts;
    let reassociated = out.dse_report.is_some()
        || func
            .computes
            .iter()
            .any(|c| c.op == loomweaver::frontend::AssignOp::Accumulate);
    compare_outputs(func, &got, &want, reassociated)
}

/// Write via a temp file in the same directory, renaming on success, so
/// failures leave no partial output behind.
fn write_atomically(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_default(),
        std::process::id()
    ));
    std::fs::write(&tmp, text)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}
