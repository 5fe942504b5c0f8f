use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use slua_guard::decode::{
    generate, GenerationConfig, RandomProposer, RemoteProposer, ReplayProposer, StopReason,
    TokenProposer, TokenVocabulary,
};
use slua_guard::env::{load_api_spec, parse_api_spec, Environment};
use slua_guard::top::{parse_program, Diag, ParseOutcome, RootKind, TopRoot};
use slua_guard::translate::{translate_to_lua, verify_safety_shape};

/// Exit codes: 0 complete, 1 invalid or dead end, 2 valid-but-incomplete,
/// 3 token budget exhausted, 4 IO or configuration error.
const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "slua-guard", version, about = "Semantic guard for sLua scripts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// API specification document (default: $SLUA_GUARD_API)
    #[arg(long)]
    api: Option<PathBuf>,
    /// Root grammar: program, talent or effect
    #[arg(long, default_value = "program")]
    kind: String,
    /// Effect scripts to parse and register before the main input (repeatable)
    #[arg(long = "preload-effect")]
    preload_effects: Vec<PathBuf>,
    /// Fix the effect id instead of deriving it from the name field
    #[arg(long)]
    effect_id: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a program against the context-sensitive parser
    Validate {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Machine-readable JSON on stdout
        #[arg(long)]
        json: bool,
    },
    /// Emit the per-segment regex trace (offset TAB segment TAB regex)
    Trace {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lower a validated program to executable Lua
    Translate {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Drive a logit oracle through constrained decoding
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// mock:replay=PATH | mock:random | http:URL (default: $SLUA_GUARD_PROPOSER)
        #[arg(long)]
        proposer: Option<String>,
        #[arg(long, default_value_t = 1500)]
        max_tokens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Independent parallel sessions with consecutive seeds
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { file, common, json } => cmd_validate(&file, &common, json),
        Command::Trace { file, common } => cmd_trace(&file, &common),
        Command::Translate {
            file,
            common,
            output,
        } => cmd_translate(&file, &common, output.as_deref()),
        Command::Generate {
            common,
            proposer,
            max_tokens,
            seed,
            temperature,
            prompt_file,
            output,
            jobs,
        } => cmd_generate(
            &common,
            proposer.as_deref(),
            max_tokens,
            seed,
            temperature,
            prompt_file.as_deref(),
            output.as_deref(),
            jobs,
        ),
    }
}

fn load_environment(common: &CommonArgs) -> Result<Environment> {
    let mut env = Environment::new();
    let api_path = common.api.clone().or_else(|| {
        std::env::var_os("SLUA_GUARD_API").map(PathBuf::from)
    });
    if let Some(path) = api_path {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read api spec {}", path.display()))?;
        let spec = parse_api_spec(&text).context("api spec does not parse")?;
        load_api_spec(&mut env, &spec).context("api spec does not load")?;
    }
    for effect in &common.preload_effects {
        let text = std::fs::read_to_string(effect)
            .with_context(|| format!("cannot read effect {}", effect.display()))?;
        let mut root = TopRoot::new(RootKind::Effect, env)
            .map_err(|e| anyhow!("parser setup failed: {e}"))?;
        let out = parse_program(&mut root, &text).map_err(|e| anyhow!("preload failed: {e}"))?;
        if !out.finished {
            return Err(anyhow!(
                "preload effect {} did not validate as a complete script",
                effect.display()
            ));
        }
        env = root.into_env();
    }
    Ok(env)
}

fn root_kind(common: &CommonArgs) -> Result<RootKind> {
    common.kind.parse::<RootKind>().map_err(|e| anyhow!(e))
}

fn build_root(common: &CommonArgs) -> Result<TopRoot> {
    let env = load_environment(common)?;
    TopRoot::with_effect_id(root_kind(common)?, env, common.effect_id.clone())
        .map_err(|e| anyhow!("parser setup failed: {e}"))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in text.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn diag_json(text: &str, diag: &Diag) -> serde_json::Value {
    let (line, col) = line_col(text, diag.offset);
    serde_json::json!({
        "offset": diag.offset,
        "line": line,
        "col": col,
        "expected_regex": diag.expected.text(),
        "message": diag.message,
    })
}

fn outcome_exit(out: &ParseOutcome) -> u8 {
    match (out.success, out.finished) {
        (true, true) => EXIT_OK,
        (true, false) => EXIT_INCOMPLETE,
        (false, _) => EXIT_INVALID,
    }
}

fn cmd_validate(file: &PathBuf, common: &CommonArgs, json: bool) -> Result<u8> {
    let text = std::fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let mut root = build_root(common)?;
    let out = parse_program(&mut root, &text).map_err(|e| anyhow!("parser failed: {e}"))?;
    if json {
        let payload = serde_json::json!({
            "version": 1,
            "success": out.success,
            "finished": out.finished,
            "diagnostics": out.diag.as_ref().map(|d| diag_json(&text, d)),
        });
        println!("{}", serde_json::to_string_pretty(&payload)?);
    } else {
        println!(
            "success={} finished={}",
            out.success, out.finished
        );
        if let Some(d) = &out.diag {
            let (line, col) = line_col(&text, d.offset);
            eprintln!(
                "at byte {} (line {line}, col {col}): {}\nexpected: {}",
                d.offset, d.message, d.expected
            );
        }
    }
    Ok(outcome_exit(&out))
}

fn cmd_trace(file: &PathBuf, common: &CommonArgs) -> Result<u8> {
    let text = std::fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let mut root = build_root(common)?;
    let out = parse_program(&mut root, &text).map_err(|e| anyhow!("parser failed: {e}"))?;
    for record in &out.trace {
        println!("{}", record.to_line());
    }
    if let Some(d) = &out.diag {
        eprintln!("at byte {}: {}\nexpected: {}", d.offset, d.message, d.expected);
    }
    Ok(outcome_exit(&out))
}

fn cmd_translate(file: &PathBuf, common: &CommonArgs, output: Option<&std::path::Path>) -> Result<u8> {
    let text = std::fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let mut root = build_root(common)?;
    let out = parse_program(&mut root, &text).map_err(|e| anyhow!("parser failed: {e}"))?;
    if !out.success {
        if let Some(d) = &out.diag {
            eprintln!("validation failed at byte {}: {}", d.offset, d.message);
        }
        return Ok(EXIT_INVALID);
    }
    let kind = root_kind(common)?;
    if kind != RootKind::Program && !out.finished {
        eprintln!("script is incomplete; translation needs a finished {kind:?}");
        return Ok(EXIT_INVALID);
    }
    let ast = root
        .ast_snapshot()
        .map_err(|e| anyhow!("ast assembly failed: {e}"))?;
    let report = verify_safety_shape(&ast);
    if !report.is_clean() {
        eprintln!("safety shape violations: {:?}", report.violations);
    }
    let lua = translate_to_lua(&ast);
    match output {
        Some(path) => std::fs::write(path, lua)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{lua}"),
    }
    Ok(EXIT_OK)
}

/// Default mock vocabulary: every alphabet character plus common sLua
/// fragments, so replay scripts tokenize compactly.
fn mock_vocab() -> TokenVocabulary {
    TokenVocabulary::chars_plus(&[
        "interface ParamData",
        "NewEffect",
        "NewTalent",
        "function",
        "return",
        "local",
        "end",
        "number",
        "boolean",
        "string",
        "({",
        "); ",
        " = ",
    ])
}

fn make_proposer(spec: &str) -> Result<Box<dyn TokenProposer>> {
    if let Some(path) = spec.strip_prefix("mock:replay=") {
        let script = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read replay script {path}"))?;
        Ok(Box::new(
            ReplayProposer::new(mock_vocab(), &script)
                .map_err(|e| anyhow!("replay setup failed: {e}"))?,
        ))
    } else if spec == "mock:random" {
        Ok(Box::new(RandomProposer::new(mock_vocab(), 0)))
    } else if let Some(url) = spec.strip_prefix("http:") {
        let url = if url.starts_with("//") {
            format!("http:{url}")
        } else {
            url.to_string()
        };
        Ok(Box::new(
            RemoteProposer::connect(&url).map_err(|e| anyhow!("proposer unreachable: {e}"))?,
        ))
    } else {
        Err(anyhow!(
            "unknown proposer '{spec}' (mock:replay=PATH | mock:random | http:URL)"
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    common: &CommonArgs,
    proposer: Option<&str>,
    max_tokens: usize,
    seed: u64,
    temperature: f64,
    prompt_file: Option<&std::path::Path>,
    output: Option<&std::path::Path>,
    jobs: usize,
) -> Result<u8> {
    let proposer_spec = match proposer {
        Some(p) => p.to_string(),
        None => std::env::var("SLUA_GUARD_PROPOSER")
            .map_err(|_| anyhow!("no proposer: pass --proposer or set SLUA_GUARD_PROPOSER"))?,
    };
    let prompt = match prompt_file {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read prompt {}", path.display()))?,
        None => String::new(),
    };

    if jobs > 1 {
        // independent sessions with consecutive seeds; outputs are suffixed
        let mut handles = Vec::new();
        for job in 0..jobs {
            let common = common.clone();
            let spec = proposer_spec.clone();
            let prompt = prompt.clone();
            let output = output.map(|p| p.to_path_buf());
            handles.push(std::thread::spawn(move || -> Result<u8> {
                let root = build_root(&common)?;
                let mut proposer = make_proposer(&spec)?;
                let cfg = GenerationConfig {
                    max_tokens,
                    temperature,
                    seed: seed + job as u64,
                };
                let (session, _) = generate(root, proposer.as_mut(), &prompt, &cfg)
                    .map_err(|e| anyhow!("generation failed: {e}"))?;
                let out_path = output.map(|p| suffixed(&p, job));
                write_program(&session.prog, out_path.as_deref())?;
                Ok(stop_exit(&session.stop_reason))
            }));
        }
        let mut worst = EXIT_OK;
        for handle in handles {
            let code = handle
                .join()
                .map_err(|_| anyhow!("generation thread panicked"))??;
            worst = worst.max(code);
        }
        return Ok(worst);
    }

    let root = build_root(common)?;
    let mut proposer = make_proposer(&proposer_spec)?;
    let cfg = GenerationConfig {
        max_tokens,
        temperature,
        seed,
    };
    let (session, _) = generate(root, proposer.as_mut(), &prompt, &cfg)
        .map_err(|e| anyhow!("generation failed: {e}"))?;
    write_program(&session.prog, output)?;
    match &session.stop_reason {
        StopReason::Finished => {}
        StopReason::Budget => eprintln!(
            "stopped: token budget of {max_tokens} exhausted after {} tokens",
            session.accepted_tokens
        ),
        StopReason::DeadEnd(detail) => eprintln!("stopped: dead end: {detail}"),
    }
    Ok(stop_exit(&session.stop_reason))
}

fn suffixed(path: &std::path::Path, job: usize) -> PathBuf {
    if job == 0 {
        return path.to_path_buf();
    }
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(format!("-{job}"));
    if let Some(ext) = path.extension() {
        name.push(".");
        name.push(ext);
    }
    path.with_file_name(name)
}

fn write_program(prog: &str, output: Option<&std::path::Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, prog)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => println!("{prog}"),
    }
    Ok(())
}

fn stop_exit(reason: &StopReason) -> u8 {
    match reason {
        StopReason::Finished => EXIT_OK,
        StopReason::Budget => EXIT_BUDGET,
        StopReason::DeadEnd(_) => EXIT_INVALID,
    }
}
