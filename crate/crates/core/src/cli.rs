//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::csl::{results_csv, Checker};
use crate::ctmc::{build_state_space_with, BuildOptions, BuiltModel};
use crate::error::{Error, Result};
use crate::fmt::format_sig;
use crate::lang::ast::{ConstDecl, ModelAst};
use crate::lang::bind::Bindings;
use crate::lang::{parse_model, parse_properties, parse_property, Property, Value};
use crate::numerics::NumericOptions;
use crate::ram::{bundled_model, parse_sweep, run_experiment_sweep, Manifest, MANIFEST_NAMES};
use crate::sim::{estimate_property, estimates_csv, SimConfig};

/// Environment variable holding the default Poisson truncation error.
pub const EPS_ENV: &str = "RAMCHECK_EPS";

#[derive(Debug, Parser)]
#[command(name = "ramcheck", version, about = "CSL model checking for continuous-time Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate queries on a model.
    Check(CheckArgs),
    /// Evaluate queries over a parameter grid and write CSV.
    Sweep(SweepArgs),
    /// Estimate queries by simulation and write CSV.
    Simulate(SimulateArgs),
    /// Write the state space as DOT or CSV.
    Export(ExportArgs),
    /// Run a bundled experiment manifest.
    Ram(RamArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file, or the name of a bundled model (`satellite`, `constellation`).
    pub model: PathBuf,
    /// Constant override, `name=value`; repeatable.
    #[arg(short = 'c', long = "const", value_name = "NAME=VALUE")]
    pub consts: Vec<String>,
    /// Maximum number of states to explore.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_states: usize,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Properties file.
    pub properties: Option<PathBuf>,
    /// Inline query; repeatable.
    #[arg(short = 'q', long = "query")]
    pub queries: Vec<String>,
}

#[derive(Debug, Args)]
pub struct NumArgs {
    /// Poisson truncation error (default from RAMCHECK_EPS, else 1e-10).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Convergence tolerance of iterative solvers.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    /// Print 17 significant digits instead of 6.
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[command(flatten)]
    pub num: NumArgs,
    /// Also write results as CSV.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[command(flatten)]
    pub num: NumArgs,
    /// Sweep `name=lo:hi:step`; give once or twice.
    #[arg(long = "sweep", required = true)]
    pub sweeps: Vec<String>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output CSV; standard output if omitted.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[arg(long, default_value_t = 100_000)]
    pub replications: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Output CSV; standard output if omitted.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Dot,
    Csv,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ExportFormat::Dot)]
    pub format: ExportFormat,
    /// Output file; standard output if omitted.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RamArgs {
    /// Experiment name or manifest path.
    #[arg(required_unless_present = "list")]
    pub name: Option<String>,
    /// List bundled experiments.
    #[arg(long)]
    pub list: bool,
    /// Directory for the CSV files.
    #[arg(short = 'o', long, default_value = ".")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub num: NumArgs,
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match &cli.command {
        Command::Check(a) => check(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Export(a) => export(a, out),
        Command::Ram(a) => ram(a, out),
    }
}

impl NumArgs {
    fn options(&self) -> Result<NumericOptions> {
        let eps = match self.eps {
            Some(e) => e,
            None => match std::env::var(EPS_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Domain(format!("{EPS_ENV}={s} is not a number")))?,
                Err(_) => NumericOptions::default().eps,
            },
        };
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("eps {eps} must lie in (0, 1)")));
        }
        Ok(NumericOptions {
            tolerance: self.tolerance,
            ..NumericOptions::with_eps(eps)
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn with_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Syntax { loc, msg } => Error::Syntax {
            loc,
            msg: format!("{msg} in {}", path.display()),
        },
        Error::Semantic { loc, msg } => Error::Semantic {
            loc,
            msg: format!("{msg} in {}", path.display()),
        },
        other => other,
    })
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn std::io::Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => out.write_all(text.as_bytes()).map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

impl ModelArgs {
    fn load(&self) -> Result<ModelAst> {
        if !self.model.exists() {
            if let Some(src) = self.model.to_str().and_then(bundled_model) {
                return parse_model(src);
            }
        }
        with_file(&self.model, parse_model(&read(&self.model)?))
    }

    fn overrides(&self) -> Result<Bindings> {
        self.consts.iter().map(|s| parse_override(s)).collect()
    }
}

pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Domain(format!("override `{s}` must have the form name=value")))?;
    let value = Value::parse(v.trim()).ok_or_else(|| Error::Domain(format!("bad value in override `{s}`")))?;
    Ok((k.trim().to_string(), value))
}

impl QueryArgs {
    fn load(&self) -> Result<(Vec<ConstDecl>, Vec<Property>)> {
        let mut consts = Vec::new();
        let mut props = Vec::new();
        if let Some(p) = &self.properties {
            let file = with_file(p, parse_properties(&read(p)?))?;
            consts = file.constants;
            props = file.properties;
        }
        for q in &self.queries {
            props.push(parse_property(q)?);
        }
        if props.is_empty() {
            return Err(Error::Domain("no queries given; pass a properties file or -q".into()));
        }
        Ok((consts, props))
    }
}

/// Splits overrides into model and property constants.
fn split_overrides(ast: &ModelAst, consts: &[ConstDecl], b: &Bindings) -> Result<(Bindings, Bindings)> {
    let (mut model, mut prop) = (Bindings::new(), Bindings::new());
    for (k, v) in b {
        if ast.constant(k).is_some() {
            model.insert(k.clone(), *v);
        } else if consts.iter().any(|c| &c.name == k) {
            prop.insert(k.clone(), *v);
        } else {
            return Err(Error::UnknownConstant(k.clone()));
        }
    }
    Ok((model, prop))
}

fn build(m: &ModelArgs, consts: &[ConstDecl]) -> Result<(BuiltModel, Bindings)> {
    let ast = m.load()?;
    let (model_b, prop_b) = split_overrides(&ast, consts, &m.overrides()?)?;
    let built = build_state_space_with(
        &ast,
        &model_b,
        BuildOptions {
            max_states: m.max_states,
        },
    )?;
    Ok((built, prop_b))
}

fn check(a: &CheckArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let (consts, props) = a.queries.load()?;
    let (built, prop_b) = build(&a.model, &consts)?;
    let checker = Checker::new(&built, a.num.options()?).with_constants(&consts, &prop_b)?;
    let mut results = Vec::new();
    for p in &props {
        let r = checker.check(p)?;
        let line = format!(
            "{}  (tolerance {})\n",
            r.render(a.num.full_precision),
            format_sig(r.tolerance, 3)
        );
        write_output(None, &line, out)?;
        results.push(r);
    }
    if let Some(path) = &a.output {
        write_output(Some(path), &results_csv(&results)?, out)?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let (consts, props) = a.queries.load()?;
    let ast = a.model.load()?;
    let specs = a.sweeps.iter().map(|s| parse_sweep(s)).collect::<Result<Vec<_>>>()?;
    let base = a.model.overrides()?;
    split_overrides(&ast, &consts, &base)?;
    let table = run_experiment_sweep(&ast, &consts, &props, &specs, &base, &a.num.options()?, a.jobs.max(1))?;
    write_output(a.output.as_deref(), &table.to_csv(a.num.full_precision)?, out)
}

fn simulate(a: &SimulateArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let (consts, props) = a.queries.load()?;
    let (built, prop_b) = build(&a.model, &consts)?;
    let checker = Checker::new(&built, NumericOptions::default()).with_constants(&consts, &prop_b)?;
    let cfg = SimConfig {
        replications: a.replications,
        seed: a.seed,
        confidence: a.confidence,
    };
    let rows = props
        .iter()
        .map(|p| Ok((p.text.clone(), estimate_property(&checker, &built, p, &cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    write_output(a.output.as_deref(), &estimates_csv(&rows)?, out)
}

fn export(a: &ExportArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let (built, _) = build(&a.model, &[])?;
    let text = match a.format {
        ExportFormat::Dot => built.ctmc.to_dot(),
        ExportFormat::Csv => built.ctmc.to_csv(),
    };
    write_output(a.output.as_deref(), &text, out)
}

fn ram(a: &RamArgs, out: &mut dyn std::io::Write) -> Result<()> {
    if a.list {
        return write_output(None, &(MANIFEST_NAMES.join("\n") + "\n"), out);
    }
    let name = a.name.as_deref().expect("clap requires a name");
    let path = Path::new(name);
    let (manifest, dir) = if MANIFEST_NAMES.contains(&name) {
        (Manifest::bundled(name)?, None)
    } else if path.exists() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
        (with_file(path, Manifest::parse(stem, &read(path)?))?, path.parent())
    } else {
        return Err(Error::Domain(format!(
            "unknown experiment `{name}`; available: {}",
            MANIFEST_NAMES.join(", ")
        )));
    };
    std::fs::create_dir_all(&a.output).map_err(|source| Error::Io {
        path: a.output.display().to_string(),
        source,
    })?;
    for o in manifest.run(dir, &a.num.options()?, a.jobs.max(1), a.num.full_precision)? {
        let target = a.output.join(&o.file);
        write_output(Some(&target), &o.csv, out)?;
        write_output(None, &format!("wrote {}\n", target.display()), out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with(std::iter::once("ramcheck").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn check_bundled_model() {
        let (code, out, _) = run_args(&["check", "satellite", "-q", "P=?[F<=129600 s=5]"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("P=?[F<=129600 s=5]: 0.077"), "{out}");
        assert!(out.contains("tolerance"));
    }

    #[test]
    fn exit_codes() {
        let (code, _, err) = run_args(&["check", "missing.ctmc", "-q", "S=?[true]"]);
        assert_eq!(code, 2);
        assert!(err.contains("missing.ctmc"), "{err}");
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["check", "satellite", "-q", "P=?[F<=1"]).0, 2);
        assert_eq!(run_args(&["check", "satellite", "-c", "zz=1", "-q", "S=?[s=0]"]).0, 2);
        assert_eq!(run_args(&["check", "satellite", "-c", "nonsense", "-q", "S=?[s=0]"]).0, 2);
        assert_eq!(run_args(&["sweep", "satellite", "-q", "S=?[s=0]", "--sweep", "r=0.9:0.1:0.1"]).0, 1);
        assert_eq!(run_args(&["check", "satellite", "--eps", "1e-300", "-q", "P=?[F<=1e12 s=5]"]).0, 3);
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn override_parsing() {
        assert_eq!(parse_override("r=0.5").unwrap(), ("r".to_string(), Value::Real(0.5)));
        assert_eq!(parse_override(" n = 3 ").unwrap(), ("n".to_string(), Value::Int(3)));
        assert!(parse_override("r").is_err());
    }

    #[test]
    fn export_formats() {
        let (code, out, _) = run_args(&["export", "constellation", "--format", "csv"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 55);
        let (_, dot, _) = run_args(&["export", "satellite"]);
        assert!(dot.starts_with("digraph ctmc {"));
    }
}
