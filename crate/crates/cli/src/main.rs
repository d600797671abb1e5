use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use jarsig::classfile::parse_jar;
use jarsig::corpus::write_corpus;
use jarsig::kb::{self, KnowledgeBase};
use jarsig::modharness::{modify, ModKind, ModifyParams};
use jarsig::scanner::{retrieve_dependencies, scan, DependencySource, Mode, ScanConfig};

/// Finds known-vulnerable JVM dependencies by matching fix signatures
/// against bytecode.
#[derive(Parser)]
#[command(name = "jarsig", version)]
struct Cli {
    /// Worker threads for KB building and scanning (default: all cores).
    #[arg(long, global = true, env = "JARSIG_JOBS")]
    jobs: Option<usize>,
    /// Log level for diagnostics on standard error.
    #[arg(long, global = true, env = "JARSIG_LOG", default_value = "warn")]
    log: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge-base maintenance.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Scan JARs against a knowledge base.
    Scan(ScanArgs),
    /// Write a modified variant of one or more JARs.
    Modify(ModifyArgs),
    /// Write the built-in synthetic corpus (classes, JARs, KB manifest).
    DemoCorpus {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum KbCommand {
    /// Build a knowledge base from a manifest of pre-fix/post-fix class directories.
    Build {
        #[arg(long, env = "JARSIG_MANIFEST")]
        manifest: PathBuf,
        #[arg(long, env = "JARSIG_KB")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, env = "JARSIG_KB")]
    kb: PathBuf,
    /// Scan every JAR below this directory.
    #[arg(long, conflicts_with_all = ["list", "cmd"])]
    dir: Option<PathBuf>,
    /// File listing one JAR path per line.
    #[arg(long, conflicts_with = "cmd")]
    list: Option<PathBuf>,
    /// Shell command whose output lists JAR paths.
    #[arg(long)]
    cmd: Option<String>,
    /// Individual JAR files.
    jars: Vec<PathBuf>,
    /// Comma-separated matching modes.
    #[arg(long, env = "JARSIG_MODE", value_delimiter = ',', default_value = "default")]
    mode: Vec<Mode>,
    #[arg(long, env = "JARSIG_THETA_PT")]
    theta_pt: Option<f64>,
    #[arg(long, env = "JARSIG_THETA_CC")]
    theta_cc: Option<f64>,
    #[arg(long, env = "JARSIG_THETA_CT")]
    theta_ct: Option<f64>,
    #[arg(long, env = "JARSIG_FORMAT", value_enum, default_value = "table")]
    format: Format,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModifyArgs {
    /// Modification type: 1 recompile, 2 re-bundle, 3 strip metadata, 4 relocate.
    #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=4))]
    kind: u8,
    /// Package prefix for type 4.
    #[arg(long, default_value = "r.")]
    prefix: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

/// Marks failures caused by unusable input (exit code 2).
#[derive(Debug)]
struct BadInput;

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("unusable input")
    }
}

impl std::error::Error for BadInput {}

fn bad_input<T, E: Into<anyhow::Error>>(r: std::result::Result<T, E>, what: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| e.into().context(what()).context(BadInput))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log).format_timestamp(None).init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let usage = e.downcast_ref::<BadInput>().is_some();
            let chain: Vec<String> = e.chain().skip(usize::from(usage)).map(ToString::to_string).collect();
            let code = if usage { 2 } else { 1 };
            eprintln!("error: {}", chain.join(": "));
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Kb {
            command: KbCommand::Build { manifest, out },
        } => kb_build(&manifest, &out),
        Command::Scan(args) => cmd_scan(args),
        Command::Modify(args) => cmd_modify(args),
        Command::DemoCorpus { out } => {
            let layout = write_corpus(&out)?;
            eprintln!(
                "wrote {} pre-fix and {} post-fix JARs; manifest at {}",
                layout.pre_jars.len(),
                layout.post_jars.len(),
                layout.manifest.display()
            );
            Ok(0)
        }
    }
}

fn kb_build(manifest: &Path, out: &Path) -> Result<u8> {
    let entries = bad_input(kb::read_manifest(manifest), || format!("cannot read manifest {}", manifest.display()))?;
    let (kb, summary) = kb::build(&entries);
    for (cve, e) in &summary.failed {
        eprintln!("{cve}: {e}");
    }
    for cve in &summary.empty_diff {
        eprintln!("{cve}: rejected, pre-fix and post-fix classes are identical");
    }
    eprintln!(
        "built {} of {} entries ({} empty diffs, {} failures, {} methods not lifted)",
        summary.built.len(),
        entries.len(),
        summary.empty_diff.len(),
        summary.failed.len(),
        summary.lift_failures
    );
    if summary.built.is_empty() {
        bail!("no buildable entries in {}", manifest.display());
    }
    kb.save(out)?;
    Ok(0)
}

fn cmd_scan(args: ScanArgs) -> Result<u8> {
    let kb = bad_input(KnowledgeBase::load(&args.kb), || format!("cannot load knowledge base {}", args.kb.display()))?;
    let defaults = ScanConfig::default();
    let cfg = ScanConfig {
        theta_pt: args.theta_pt.unwrap_or(defaults.theta_pt),
        theta_cc: args.theta_cc.unwrap_or(defaults.theta_cc),
        theta_ct: args.theta_ct.unwrap_or(defaults.theta_ct),
        modes: args.mode.iter().copied().collect(),
    };
    bad_input(cfg.validate(), || "bad scan settings".into())?;

    let mut jars = Vec::new();
    let source = match (args.dir, args.list, args.cmd) {
        (Some(d), _, _) => Some(DependencySource::Dir(d)),
        (_, Some(l), _) => Some(DependencySource::ListFile(l)),
        (_, _, Some(c)) => Some(DependencySource::Command(c)),
        _ => None,
    };
    if let Some(source) = source {
        jars.extend(bad_input(retrieve_dependencies(&source), || "cannot list dependencies".into())?);
    }
    jars.extend(args.jars.iter().map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone())));
    if jars.is_empty() {
        eprintln!("warning: no JARs to scan");
    }

    let report = scan(&jars, &kb, &cfg)?;
    if let Some(out) = &args.out {
        fs::write(out, report.to_json()).with_context(|| format!("cannot write {}", out.display()))?;
    }
    let text = match args.format {
        Format::Table => report.to_table(),
        Format::Json => report.to_json() + "\n",
    };
    std::io::stdout().write_all(text.as_bytes())?;

    Ok(if report.finding_count() > 0 {
        3
    } else if report.has_errors() {
        1
    } else {
        0
    })
}

fn cmd_modify(args: ModifyArgs) -> Result<u8> {
    let kind = ModKind::try_from(args.kind).map_err(anyhow::Error::msg)?;
    let inputs = args
        .inputs
        .iter()
        .map(|p| {
            let bytes = bad_input(fs::read(p), || format!("cannot read {}", p.display()))?;
            bad_input(parse_jar(&bytes), || format!("cannot open {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModifyParams {
        seed: args.seed,
        prefix: args.prefix,
    };
    let jar = modify(&inputs, kind, &params)?;
    fs::write(&args.out, jar.to_bytes()?).with_context(|| format!("cannot write {}", args.out.display()))?;
    eprintln!("wrote {} ({} classes)", args.out.display(), jar.classes.len());
    Ok(0)
}
