//! Command-line front end.
//!
//! Inputs ending in `.mir` are mini-IR kernels; anything else is read as
//! model text. Exit codes: 0 race free, 1 race found, 2 inconclusive,
//! 3 bad input, 4 analysis failure.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::depcheck::{full_report, races, CheckOptions};
use crate::isccemit::{emit, emit_report_structured, emit_report_text};
use crate::iset::SolveOptions;
use crate::kmodel::KernelModel;
use crate::miniir::{self, ExtractOptions, Extraction, GridShape, MiniIrError};
use crate::modeltext::{parse_model, render_model, ModelTextError};
use crate::oracle::{detect_races, parse_grid, run_ir, run_model, ConcreteInstance, OracleError, RunOptions};

pub const EXIT_INPUT: i32 = 3;
pub const EXIT_ANALYSIS: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Race verdict only.
    Race,
    /// Race verdict plus every dependence.
    Dep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "raceset", about = "Static race and dependence checking for SIMT kernels")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Kernel: `.mir` mini-IR or model text.
    input: PathBuf,
    /// Fix the grid, `bx[,by,bz]/tx[,ty,tz]`.
    #[arg(long)]
    grid: Option<String>,
    /// Rename extracted sections, `block_k=Label,...`.
    #[arg(long)]
    sections: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether the kernel can race.
    Check {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "race")]
        mode: Mode,
        /// Fix parameters, `k=v,...`.
        #[arg(long)]
        params: Option<String>,
        /// Witness search radius.
        #[arg(long = "box")]
        box_radius: Option<i64>,
        /// Narrow the check to a concrete instance file.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Write the ISCC script for the kernel.
    EmitIscc {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the kernel on a concrete instance and race-check the access log.
    Oracle {
        #[command(flatten)]
        input: InputArgs,
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print the (extracted) model as model text.
    DumpModel {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Validated settings of a `check` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: BTreeMap<String, i64>,
    pub box_radius: Option<i64>,
    pub format: Format,
}

impl RunConfig {
    pub fn check_options(&self) -> CheckOptions {
        let mut solve = SolveOptions::default();
        for (k, v) in &self.params {
            solve = solve.with_param(k, *v);
        }
        if let Some(r) = self.box_radius {
            solve.limits.box_radius = r;
        }
        CheckOptions { solve, specialize: None }
    }
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    msg: String,
}

fn input_err(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        msg: msg.into(),
    }
}

fn analysis_err(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ANALYSIS,
        msg: msg.into(),
    }
}

fn mir_failure(path: &Path, e: MiniIrError) -> Failure {
    let p = path.display();
    match &e {
        MiniIrError::SyntaxError { line, .. } | MiniIrError::UnknownOpcode { line, .. } => input_err(format!("{p}:{line}: {e}")),
        MiniIrError::SsaViolation(_) | MiniIrError::MalformedCfg(_) => input_err(format!("{p}: {e}")),
        _ => analysis_err(format!("{p}: {e}")),
    }
}

fn text_failure(path: &Path, e: ModelTextError) -> Failure {
    let p = path.display();
    match &e {
        ModelTextError::Syntax { line, msg } => input_err(format!("{p}:{line}: {msg}")),
        ModelTextError::Model(_) => input_err(format!("{p}: {e}")),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input_err(format!("{}: cannot read file: {e}", path.display())))
}

fn parse_kv(s: &str) -> Result<BTreeMap<String, i64>, Failure> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| input_err(format!("--params: expected k=v, got '{part}'")))?;
        let v: i64 = v
            .trim()
            .parse()
            .map_err(|_| input_err(format!("--params: '{v}' is not an integer")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// `fallback` is the grid of an instance file, used when `--grid` is absent.
fn extract_options(a: &InputArgs, fallback: Option<GridShape>) -> Result<ExtractOptions, Failure> {
    let mut opts = ExtractOptions {
        grid: fallback,
        ..Default::default()
    };
    if let Some(g) = &a.grid {
        opts.grid = Some(parse_grid(g).ok_or_else(|| input_err(format!("--grid: expected bx[,by,bz]/tx[,ty,tz], got '{g}'")))?);
    }
    if let Some(s) = &a.sections {
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| input_err(format!("--sections: expected name=Label, got '{part}'")))?;
            opts.section_hints.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(opts)
}

enum Loaded {
    Model(KernelModel),
    Ir(Extraction),
}

impl Loaded {
    fn model(&self) -> &KernelModel {
        match self {
            Loaded::Model(m) => m,
            Loaded::Ir(x) => &x.model,
        }
    }
}

fn is_mir(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "mir")
}

fn load(a: &InputArgs, fallback: Option<GridShape>) -> Result<Loaded, Failure> {
    let src = read(&a.input)?;
    if is_mir(&a.input) {
        let f = miniir::parse(&src).map_err(|e| mir_failure(&a.input, e))?;
        let x = miniir::extract_with_layout(&f, &extract_options(a, fallback)?).map_err(|e| mir_failure(&a.input, e))?;
        Ok(Loaded::Ir(x))
    } else {
        Ok(Loaded::Model(parse_model(&src).map_err(|e| text_failure(&a.input, e))?))
    }
}

fn deliver(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| input_err(format!("{}: cannot write: {e}", p.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| input_err(format!("cannot write output: {e}"))),
    }
}

fn oracle_failure(path: &Path, e: OracleError) -> Failure {
    match e {
        OracleError::Instance { .. } | OracleError::InvalidInstance(_) | OracleError::MissingValue(_) => {
            input_err(format!("{}: {e}", path.display()))
        }
        e => analysis_err(e.to_string()),
    }
}

fn cmd(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match cli.cmd {
        Command::Check {
            input,
            mode,
            params,
            box_radius,
            instance,
            out: out_path,
            format,
        } => {
            if box_radius.is_some_and(|b| b < 1) {
                return Err(input_err("--box must be at least 1"));
            }
            let cfg = RunConfig {
                mode,
                params: params.as_deref().map(parse_kv).transpose()?.unwrap_or_default(),
                box_radius,
                format,
            };
            let inst = match &instance {
                Some(ip) => Some(ConcreteInstance::parse(&read(ip)?).map_err(|e| oracle_failure(ip, e))?),
                None => None,
            };
            let loaded = load(&input, inst.as_ref().and_then(|i| i.grid))?;
            let model = loaded.model();
            let mut opts = cfg.check_options();
            if let Some(inst) = &inst {
                opts.specialize = Some(inst.specialization(model));
            }
            let report = match cfg.mode {
                Mode::Race => races(model, &opts),
                Mode::Dep => full_report(model, &opts),
            }
            .map_err(|e| analysis_err(format!("{}: {e}", input.input.display())))?;
            let text = match cfg.format {
                Format::Text => emit_report_text(&report),
                Format::Structured => format!("{:#}\n", emit_report_structured(&report)),
            };
            deliver(&text, out_path.as_deref(), out)?;
            Ok(report.verdict.exit_code())
        }
        Command::EmitIscc { input, out: out_path } => {
            let loaded = load(&input, None)?;
            let script = emit(loaded.model()).map_err(|e| analysis_err(format!("{}: {e}", input.input.display())))?;
            deliver(&script.text(), out_path.as_deref(), out)?;
            Ok(0)
        }
        Command::DumpModel { input, out: out_path } => {
            let loaded = load(&input, None)?;
            deliver(&render_model(loaded.model()), out_path.as_deref(), out)?;
            Ok(0)
        }
        Command::Oracle {
            input,
            instance,
            out: out_path,
            format,
        } => {
            let mut inst = ConcreteInstance::parse(&read(&instance)?).map_err(|e| oracle_failure(&instance, e))?;
            if let Some(g) = &input.grid {
                let g: GridShape = parse_grid(g).ok_or_else(|| input_err(format!("--grid: bad grid '{g}'")))?;
                inst = inst.with_grid(g);
            }
            let src = read(&input.input)?;
            let (kernel, log) = if is_mir(&input.input) {
                let f = miniir::parse(&src).map_err(|e| mir_failure(&input.input, e))?;
                // statement labels are a convenience; interpret regardless
                let x = miniir::extract_with_layout(&f, &extract_options(&input, inst.grid)?).ok();
                let log = run_ir(&inst, &f, x.as_ref()).map_err(|e| oracle_failure(&instance, e))?;
                (f.name.clone(), log)
            } else {
                let m = parse_model(&src).map_err(|e| text_failure(&input.input, e))?;
                let log = run_model(&inst, &m, &RunOptions::default()).map_err(|e| oracle_failure(&instance, e))?;
                (m.name.clone(), log)
            };
            let verdict = detect_races(&log);
            let text = match format {
                Format::Text => {
                    let mut s = format!(
                        "kernel {kernel}\nverdict: {}\naccesses: {}\nconflicting pairs: {}\n",
                        verdict.token(),
                        log.len(),
                        verdict.pairs.len()
                    );
                    for p in &verdict.pairs {
                        let side = |e: &crate::oracle::AccessLogEntry| {
                            format!(
                                "{:?} by block {:?} thread {:?} phase {}{}",
                                e.kind,
                                e.block,
                                e.thread,
                                e.phase,
                                e.site.as_ref().map(|l| format!(" in {l}{:?}", e.point.clone().unwrap_or_default())).unwrap_or_default()
                            )
                        };
                        s.push_str(&format!(
                            "race: {}{:?}: {} / {}\n",
                            p.first.array,
                            p.first.cell,
                            side(&p.first),
                            side(&p.second)
                        ));
                    }
                    s
                }
                Format::Structured => {
                    let v = json!({
                        "kernel": kernel,
                        "verdict": verdict.token(),
                        "accesses": log.len(),
                        "pairs": verdict.pairs,
                    });
                    format!("{v:#}\n")
                }
            };
            deliver(&text, out_path.as_deref(), out)?;
            Ok(verdict.exit_code())
        }
    }
}

/// Run the command line `args` (program name first). Reports go to `out`,
/// diagnostics to `err`; the exit code is returned.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(shown.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(shown.as_bytes());
                    EXIT_INPUT
                }
            };
        }
    };
    match cmd(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}
