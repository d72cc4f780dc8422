//! The `sandpile-ap` command line: `decide`, `trace`, `verify`, `bench`, `gen`.
//!
//! Exit codes: 0 decision made or verification clean, 1 verification found
//! violations, 2 usage error, 3 I/O or parse/domain error.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::avalanche::{compute_avalanche, status_at};
use crate::bench::{run_bench, BenchError, BenchPlan};
use crate::config::SlopeConfig;
use crate::error::SandpileError;
use crate::instances::{generate, parse_config, serialize_config, GeneratorSpec};
use crate::ncdecider::{decide, ApInstance, Method, P_WARN};
use crate::verify::{default_candidates, run_verification, VerifyPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sandpile-ap", version, about = "Avalanche problem for the 1D Kadanoff sandpile")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Text,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether a grain on column 1 raises the slope at column k.
    Decide {
        /// Config file, or '-' for standard input.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Method::Linear)]
        method: Method,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        json: bool,
    },
    /// Print the avalanche firing by firing.
    Trace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceFormat::Text)]
        format: TraceFormat,
        /// Also print the status at every position p+1..=m+1.
        #[arg(long)]
        show_status: bool,
        /// Include the slopes after each firing (jsonl only).
        #[arg(long)]
        slopes: bool,
    },
    /// Compare the fast deciders with the brute-force avalanche.
    Verify {
        #[arg(long)]
        p: u32,
        /// Every config of exactly this length is checked.
        #[arg(long)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        sample_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Where the smallest failing config is written.
        #[arg(long, default_value = "verify-witness.cfg")]
        repro: PathBuf,
    },
    /// Time the deciders on generated instances.
    Bench {
        /// Comma-separated sizes; scientific notation like 1e6 is accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_size, required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_enum, default_value = "linear,parallel")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 3)]
        p: u32,
        #[arg(long, default_value_t = 0.1)]
        zero_density: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generate a random stable monotone config.
    Gen {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        len: usize,
        #[arg(long, default_value_t = 0.0)]
        zero_density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file, or '-' for standard output.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

/// Parses `1000000`, `1e6` or `2.5e3`.
pub fn parse_size(text: &str) -> Result<usize, String> {
    if let Ok(v) = text.parse::<usize>() {
        return Ok(v);
    }
    let f: f64 = text.parse().map_err(|_| format!("not a size: {text:?}"))?;
    if f < 0.0 || f.fract() != 0.0 || f > usize::MAX as f64 {
        return Err(format!("not a whole non-negative size: {text:?}"));
    }
    Ok(f as usize)
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<SandpileError> for Failure {
    fn from(e: SandpileError) -> Self {
        let code = match e {
            SandpileError::KOutOfRange { .. } | SandpileError::EnumerationTooLarge { .. } => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_IO, e.to_string())
    }
}

fn load(input: &Path, stdin: &mut dyn Read) -> Result<SlopeConfig, Failure> {
    let text = if input == Path::new("-") {
        let mut buf = String::new();
        stdin.read_to_string(&mut buf)?;
        buf
    } else {
        fs::read_to_string(input)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", input.display())))?
    };
    Ok(parse_config(&text)?)
}

fn warn_large_p(p: u32, err: &mut dyn Write) {
    if p > P_WARN {
        let _ = writeln!(err, "warning: p = {p} builds transfer tables of {} entries", 1u64 << p);
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, stdin, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Decide {
            input,
            k,
            method,
            workers,
            json,
        } => {
            if workers == 0 {
                return Err(Failure::new(EXIT_USAGE, "--workers must be at least 1"));
            }
            let config = load(&input, stdin)?;
            warn_large_p(config.p(), err);
            let inst = ApInstance::new(config, k)?;
            let d = decide(&inst, method, workers)?;
            if json {
                writeln!(out, "{}", serde_json::to_string(&d).expect("decision serializes"))?;
            } else {
                writeln!(out, "{}", if d.answer { "YES" } else { "NO" })?;
            }
            Ok(EXIT_OK)
        }
        Command::Trace {
            input,
            format,
            show_status,
            slopes,
        } => {
            let config = load(&input, stdin)?;
            let av = compute_avalanche(&config)?;
            let p = config.p() as usize;
            let statuses: Vec<_> = if show_status {
                (p + 1..=config.len() + 1).map(|i| status_at(&av, i)).collect()
            } else {
                Vec::new()
            };
            match format {
                TraceFormat::Text => {
                    if av.is_empty() {
                        writeln!(out, "avalanche empty")?;
                    }
                    for rec in av.trace(false) {
                        writeln!(out, "{:>4}  fire {:>4}  {}", rec.step, rec.column, rec.kind)?;
                    }
                    for st in &statuses {
                        writeln!(out, "status at {}: {st}", st.position())?;
                    }
                }
                TraceFormat::Jsonl => {
                    for rec in av.trace(slopes) {
                        writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
                    }
                    for st in &statuses {
                        writeln!(out, "{}", json!({"position": st.position(), "status": st.tuple()}))?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Verify {
            p,
            max_len,
            samples,
            sample_len,
            seed,
            workers,
            repro,
        } => {
            if p == 0 || workers == 0 {
                return Err(Failure::new(EXIT_USAGE, "--p and --workers must be at least 1"));
            }
            let plan = VerifyPlan {
                p,
                max_len,
                samples,
                sample_len,
                zero_density: 0.25,
                seed,
                workers,
            };
            let report = run_verification(&plan, &default_candidates(workers))?;
            writeln!(out, "{report}")?;
            if report.clean() {
                return Ok(EXIT_OK);
            }
            if let Some(w) = &report.witness {
                let body = format!("# {}\n{}", w.description, serialize_config(&w.config));
                fs::write(&repro, body)
                    .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", repro.display())))?;
                writeln!(err, "witness written to {}", repro.display())?;
            }
            Ok(EXIT_VIOLATION)
        }
        Command::Bench {
            sizes,
            workers,
            repeats,
            csv,
            methods,
            p,
            zero_density,
            seed,
        } => {
            if workers.contains(&0) {
                return Err(Failure::new(EXIT_USAGE, "--workers entries must be at least 1"));
            }
            let plan = BenchPlan {
                methods,
                sizes,
                workers,
                repeats,
                p,
                zero_density,
                seed,
            };
            let report = match run_bench(&plan) {
                Ok(r) => r,
                Err(BenchError::Sandpile(e)) => return Err(e.into()),
                Err(e @ BenchError::Disagreement { .. }) => {
                    return Err(Failure::new(EXIT_VIOLATION, e.to_string()))
                }
            };
            if let Some(path) = csv {
                fs::write(&path, report.to_csv())
                    .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            } else {
                write!(out, "{}", report.to_csv())?;
            }
            write!(err, "{}", report.to_markdown())?;
            Ok(EXIT_OK)
        }
        Command::Gen {
            p,
            len,
            zero_density,
            seed,
            out: path,
        } => {
            let spec = GeneratorSpec::new(p, len, zero_density, seed);
            let config = generate(&spec)?;
            let body = format!("{}\n{}", spec.header(), serialize_config(&config));
            if path == Path::new("-") {
                write!(out, "{body}")?;
            } else {
                fs::write(&path, body)
                    .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            }
            Ok(EXIT_OK)
        }
    }
}
