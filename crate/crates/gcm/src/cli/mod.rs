//! Command-line front end. Each command produces an [`Outcome`]: a JSON document,
//! an optional CSV table and a pass flag. [`run`] writes them out and maps the
//! result to the exit code contract (0 pass, 2 tolerance breach, 3 configuration).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

mod commands;
mod config;

pub use commands::{compile, energy_verify, fdb_verify, forest, gcm_check, tree_values};
pub use config::{EnergyConfig, FdbConfig, FunctionalSpec, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_BREACH: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gcm", version, about = "Verification suites for entropy derivatives along heat and transport flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Write the JSON document here; the CSV table and run metadata go next to it
    /// with extensions `.csv` and `.meta.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for commands that draw random densities.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override for the command's main assertion.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory of golden files: compare against an existing golden, or write it if missing.
    #[arg(long, global = true)]
    pub golden: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the forest F^n.
    Forest {
        #[arg(long)]
        n: usize,
    },
    /// Compile a tree or a whole forest into a diagram expression.
    Compile {
        /// `S1..S3`, `T1..T6`, `F<n>`, `path:<nodes>`, `star:<nodes>` or `edges:0-1,1-2,...`.
        #[arg(long)]
        tree: String,
        /// Compile with a dangling gradient at this node instead of integrating.
        #[arg(long)]
        dangling: Option<usize>,
    },
    /// Evaluate val(F^m) along the heat flow and check its sign.
    GcmCheck(GcmCheckArgs),
    /// Evaluate individual trees on one or more densities.
    TreeValues(TreeValuesArgs),
    /// Compare both sides of the transport chain rule.
    FdbVerify(VerifyArgs),
    /// Compare internal-energy derivatives with finite differences.
    EnergyVerify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GcmCheckArgs {
    /// Density specification (JSON).
    #[arg(long)]
    pub density: PathBuf,
    /// Heat-flow times; defaults to the density's own `t`.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
    /// Orders m, at most 5; defaults to 1..=5.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Skip the log-concavity certificate.
    #[arg(long)]
    pub allow_nonlogconcave: bool,
    /// Also differentiate the entropy numerically and require agreement within `--fd-tol`.
    #[arg(long)]
    pub fd: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_tol: f64,
    /// Mass tolerance of the quadrature grid.
    #[arg(long)]
    pub grid_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TreeValuesArgs {
    /// Density specification: one object or an array.
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// Node counts of the trees to enumerate: `5`, `4..6` or `4-6`.
    #[arg(long, value_parser = parse_range)]
    pub nodes: Option<(usize, usize)>,
    /// Include the named trees S1..S3 and T1..T6.
    #[arg(long)]
    pub named: bool,
    /// Heat-flow times; defaults to each density's own `t`.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
    /// Add this many random quartic densities drawn with `--seed`.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long)]
    pub grid_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Configuration file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Orders, overriding the configuration.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Times, overriding the configuration.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = if let Some((a, b)) = s.split_once("..") {
        vec![a, b.trim_start_matches('=')]
    } else if let Some((a, b)) = s.split_once('-') {
        vec![a, b]
    } else {
        vec![s, s]
    };
    let lo: usize = parts[0].trim().parse().map_err(|e| format!("{s}: {e}"))?;
    let hi: usize = parts[1].trim().parse().map_err(|e| format!("{s}: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {s}"));
    }
    Ok((lo, hi))
}

/// The product of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Versioned schema name, e.g. `gcm.forest/1`.
    pub schema: String,
    pub json: Value,
    pub csv: Option<String>,
    /// Whether every numerical assertion held.
    pub pass: bool,
    /// File stem for `--golden`, for commands that support it.
    pub golden: Option<String>,
}

impl Outcome {
    pub(crate) fn new(command: &str, body: impl Serialize, pass: bool) -> Result<Self> {
        let schema = format!("gcm.{command}/1");
        let mut json = json!({ "schema": schema, "pass": pass });
        let Value::Object(fields) = serde_json::to_value(body)? else {
            bail!("command output must be an object");
        };
        json.as_object_mut().expect("object").extend(fields);
        Ok(Self {
            schema,
            json,
            csv: None,
            pass,
            golden: None,
        })
    }

    /// The JSON document as written to disk.
    pub fn document(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("values serialize");
        s.push('\n');
        s
    }
}

/// Runs one command without touching the file system.
pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    if let Some(tol) = g.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("--tol must be positive, got {tol}");
        }
    }
    match &cli.command {
        Command::Forest { n } => forest(*n),
        Command::Compile { tree, dangling } => compile(tree, *dangling),
        Command::GcmCheck(a) => gcm_check(a, g),
        Command::TreeValues(a) => tree_values(a, g),
        Command::FdbVerify(a) => fdb_verify(a, g),
        Command::EnergyVerify(a) => energy_verify(a, g),
    }
}

fn compare_golden(dir: &Path, stem: &str, document: &str) -> Result<bool> {
    let path = dir.join(format!("{stem}.json"));
    if path.exists() {
        let expected = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        if expected == document {
            return Ok(true);
        }
        eprintln!("golden mismatch: {}", path.display());
        Ok(false)
    } else {
        fs::create_dir_all(dir)?;
        fs::write(&path, document)?;
        eprintln!("wrote golden {}", path.display());
        Ok(true)
    }
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(ext);
    out.with_file_name(name)
}

fn emit(cli: &Cli, outcome: &Outcome, started: Instant) -> Result<bool> {
    let document = outcome.document();
    let mut pass = outcome.pass;
    if let Some(dir) = &cli.global.golden {
        let Some(stem) = &outcome.golden else {
            bail!("--golden applies to forest and compile only");
        };
        pass &= compare_golden(dir, stem, &document)?;
    }
    match &cli.global.out {
        Some(out) => {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(out, &document).with_context(|| format!("writing {}", out.display()))?;
            if let Some(csv) = &outcome.csv {
                fs::write(sidecar(out, ".csv"), csv)?;
            }
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            let meta = json!({
                "schema": outcome.schema,
                "version": env!("CARGO_PKG_VERSION"),
                "args": std::env::args().collect::<Vec<_>>(),
                "seed": cli.global.seed,
                "unix_time": stamp,
                "elapsed_seconds": started.elapsed().as_secs_f64(),
                "pass": pass,
            });
            fs::write(sidecar(out, ".meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        }
        None => print!("{document}"),
    }
    Ok(pass)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let started = Instant::now();
    match dispatch(&cli).and_then(|o| emit(&cli, &o, started)) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("tolerance breach; see the `pass` fields of the output");
            EXIT_BREACH
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("5"), Ok((5, 5)));
        assert_eq!(parse_range("4..6"), Ok((4, 6)));
        assert_eq!(parse_range("4..=6"), Ok((4, 6)));
        assert_eq!(parse_range("4-6"), Ok((4, 6)));
        assert!(parse_range("6-4").is_err());
    }

    #[test]
    fn sidecars() {
        assert_eq!(sidecar(Path::new("a/run.json"), ".csv"), PathBuf::from("a/run.csv"));
        assert_eq!(sidecar(Path::new("run"), ".meta.json"), PathBuf::from("run.meta.json"));
    }
}
