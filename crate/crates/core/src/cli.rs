//! Command-line front end.
//!
//! Results are printed as `key=value` lines (CSV for `bench`). Exit codes:
//! 0 holds / done, 1 violated / infeasible, 2 undefined, 3 error.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bisection::{optimize, BisectionConfig, Estimate, Variant};
use crate::colored::{synthesize, ColoredMdp, Outcome};
use crate::conditional::{check_defined, solve_restart, threshold_value, Comparison, Query};
use crate::generate::{random_mdp, GenConfig};
use crate::parse::{parse_model, to_text};
use crate::rational::{format_rational, parse_rational, to_f64, Rational};
use crate::scalar::Scalar;
use crate::{Direction, Error, Mdp, Mode};

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_UNDEFINED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "condreach", version, about = "Conditional reachability for MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide Pr(◇G | ◇E) ∼ λ.
    Check(CheckArgs),
    /// Compute the optimal conditional probability.
    Optimize(OptimizeArgs),
    /// Search for a color-consistent policy meeting a threshold.
    Synthesize(SynthArgs),
    /// Run methods on seeded random models and print CSV.
    Bench(BenchArgs),
    /// Print a seeded random model.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    /// Model file.
    pub model: PathBuf,
    #[arg(long, default_value = "goal")]
    pub goal: String,
    #[arg(long, default_value = "evidence")]
    pub evidence: String,
    #[arg(long, default_value = "max")]
    pub direction: String,
    #[arg(long, env = "CONDREACH_MODE", default_value = "exact")]
    pub mode: String,
    /// treat (reward reduction) or restart.
    #[arg(long, default_value = "treat")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long)]
    pub threshold: String,
    #[arg(long, default_value = "le")]
    pub cmp: String,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, default_value = "pt-std")]
    pub variant: String,
    /// Precision; defaults to 0 in exact mode and 1e-6 otherwise.
    #[arg(long)]
    pub eps: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub model: PathBuf,
    #[arg(long, default_value = "goal")]
    pub goal: String,
    #[arg(long, default_value = "evidence")]
    pub evidence: String,
    #[arg(long)]
    pub threshold: String,
    #[arg(long, default_value = "ge")]
    pub cmp: String,
    #[arg(long, env = "CONDREACH_MODE", default_value = "exact")]
    pub mode: String,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub states: usize,
    #[arg(long, default_value_t = 2)]
    pub max_actions: usize,
    #[arg(long)]
    pub acyclic: bool,
    /// Comma-separated: treat, restart, or treat-<variant>.
    #[arg(long, default_value = "treat,restart")]
    pub methods: String,
    #[arg(long, default_value = "pt-std")]
    pub variant: String,
    #[arg(long, default_value = "max")]
    pub direction: String,
    #[arg(long, env = "CONDREACH_MODE", default_value = "exact")]
    pub mode: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub states: usize,
    #[arg(long, default_value_t = 2)]
    pub max_actions: usize,
    #[arg(long)]
    pub acyclic: bool,
    #[arg(long)]
    pub colors: Option<usize>,
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_ERROR;
            }
            let _ = write!(out, "{e}");
            return EXIT_HOLDS;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(Error::Undefined) => {
            let _ = writeln!(out, "result=undefined");
            EXIT_UNDEFINED
        }
        Err(e) => {
            let _ = writeln!(err, "error={e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32, Error> {
    match cmd {
        Command::Check(a) => cmd_check(a, out),
        Command::Optimize(a) => cmd_optimize(a, out),
        Command::Synthesize(a) => cmd_synthesize(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Generate(a) => {
            let mut cfg = GenConfig::new(a.states, a.max_actions, a.acyclic);
            cfg.colors = a.colors;
            emit(out, &to_text(&random_mdp(a.seed, &cfg)?))?;
            Ok(EXIT_HOLDS)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Error> {
    out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))
}

macro_rules! kv {
    ($out:expr, $($k:literal = $v:expr),+ $(,)?) => {{
        $( writeln!($out, concat!($k, "={}"), $v).map_err(|e| Error::Io(e.to_string()))?; )+
    }};
}

pub fn load_model(path: &PathBuf) -> Result<Mdp, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_model(&text)?)
}

fn rational_arg(text: &str) -> Result<Rational, Error> {
    parse_rational(text).map_err(Error::InvalidArgument)
}

fn build_query(m: &Mdp, a: &QueryArgs) -> Result<Query, Error> {
    let dir: Direction = a.direction.parse()?;
    let mode: Mode = a.mode.parse()?;
    Ok(Query::from_labels(m, &a.goal, &a.evidence, dir)?.with_mode(mode))
}

fn check_method(method: &str) -> Result<(), Error> {
    match method {
        "treat" | "restart" => Ok(()),
        _ => Err(Error::InvalidArgument(format!("unknown method '{method}'"))),
    }
}

/// Exact rational string for exact values, decimal rendering for floats.
fn render<T: Scalar>(v: &T) -> String {
    if T::EXACT {
        format_rational(&v.to_rational())
    } else {
        format!("{}", v.to_f64())
    }
}

pub fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32, Error> {
    check_method(&a.query.method)?;
    let m = load_model(&a.query.model)?;
    let cmp: Comparison = a.cmp.parse()?;
    let lambda = rational_arg(&a.threshold)?;
    let q = build_query(&m, &a.query)?.with_threshold(cmp, lambda.clone());
    if !check_defined(&m, &q.evidence) {
        return Err(Error::Undefined);
    }
    let start = Instant::now();
    let (sign, value, iterations) = match (a.query.method.as_str(), q.mode.is_exact()) {
        ("treat", true) => {
            let o = threshold_value::<Rational>(&m, &q, &lambda)?;
            (o.sign, render(&o.value), o.iterations)
        }
        ("treat", false) => {
            let o = threshold_value::<f64>(&m, &q, &lambda)?;
            (o.sign, render(&o.value), o.iterations)
        }
        (_, true) => {
            let r = solve_restart::<Rational>(&m, &q)?;
            let diff = &r.value - &lambda;
            (diff.sign(0.0), render(&r.value), r.iterations)
        }
        (_, false) => {
            let r = solve_restart::<f64>(&m, &q)?;
            let diff = r.value - to_f64(&lambda);
            (diff.sign(q.sign_tolerance), render(&r.value), r.iterations)
        }
    };
    let holds = cmp.holds(sign);
    kv!(
        out,
        "result" = if holds { "holds" } else { "violated" },
        "method" = a.query.method,
        "sign" = sign.name(),
        "value" = value,
        "threshold" = format_rational(&lambda),
        "direction" = q.direction.name(),
        "mode" = q.mode.name(),
        "iterations" = iterations,
        "time_ms" = format!("{:.3}", start.elapsed().as_secs_f64() * 1e3),
    );
    Ok(if holds { EXIT_HOLDS } else { EXIT_VIOLATED })
}

fn default_eps(mode: Mode) -> Rational {
    match mode {
        Mode::Exact => Rational::from_integer(0.into()),
        _ => parse_rational("1e-6").expect("literal"),
    }
}

pub fn cmd_optimize(a: &OptimizeArgs, out: &mut dyn Write) -> Result<i32, Error> {
    check_method(&a.query.method)?;
    let m = load_model(&a.query.model)?;
    let q = build_query(&m, &a.query)?;
    let variant: Variant = a.variant.parse()?;
    let eps = match &a.eps {
        Some(e) => rational_arg(e)?,
        None => default_eps(q.mode),
    };
    if !check_defined(&m, &q.evidence) {
        return Err(Error::Undefined);
    }
    let start = Instant::now();
    if a.query.method == "restart" {
        let (value, iterations, method) = if q.mode.is_exact() {
            let r = solve_restart::<Rational>(&m, &q)?;
            (render(&r.value), r.iterations, r.method)
        } else {
            let r = solve_restart::<f64>(&m, &q)?;
            (render(&r.value), r.iterations, r.method)
        };
        kv!(
            out,
            "result" = "value",
            "value" = value,
            "method" = "restart",
            "solver" = method.name(),
            "direction" = q.direction.name(),
            "mode" = q.mode.name(),
            "iterations" = iterations,
            "time_ms" = format!("{:.3}", start.elapsed().as_secs_f64() * 1e3),
        );
        return Ok(EXIT_HOLDS);
    }
    let cfg = BisectionConfig::new(variant, eps.clone(), q.mode);
    let opt = optimize(&m, &q, &cfg)?;
    match &opt.estimate {
        Estimate::Exact(v) => kv!(out, "result" = "value", "value" = format_rational(v), "value_float" = to_f64(v),),
        Estimate::Approx { value, lower, upper } => kv!(
            out,
            "result" = "interval",
            "value" = format_rational(value),
            "value_float" = to_f64(value),
            "lower" = format_rational(lower),
            "upper" = format_rational(upper),
        ),
    }
    kv!(
        out,
        "method" = "treat",
        "variant" = variant.name(),
        "epsilon" = format_rational(&eps),
        "direction" = q.direction.name(),
        "mode" = q.mode.name(),
        "iterations" = opt.iterations,
        "time_ms" = format!("{:.3}", start.elapsed().as_secs_f64() * 1e3),
    );
    if let Some(w) = &opt.witness {
        kv!(out, "witness" = w.before_any.render(&m));
    }
    Ok(EXIT_HOLDS)
}

pub fn cmd_synthesize(a: &SynthArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let m = load_model(&a.model)?;
    let mode: Mode = a.mode.parse()?;
    let cmp: Comparison = a.cmp.parse()?;
    let lambda = rational_arg(&a.threshold)?;
    let q = Query::from_labels(&m, &a.goal, &a.evidence, Direction::Max)?.with_mode(mode).with_threshold(cmp, lambda);
    let cm = ColoredMdp::from_mdp(&m)?;
    let res = synthesize(&cm, &q)?;
    let code = match &res.outcome {
        Outcome::Feasible { witness, value } => {
            kv!(
                out,
                "feasible" = "true",
                "witness" = witness.render(&m),
                "value" = format_rational(value),
                "value_float" = to_f64(value),
            );
            EXIT_HOLDS
        }
        Outcome::Infeasible => {
            kv!(out, "feasible" = "false");
            EXIT_VIOLATED
        }
    };
    kv!(out, "nodes" = res.nodes_explored, "it_per_s" = format!("{:.1}", res.it_per_s), "mode" = mode.name(),);
    Ok(code)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub instance: usize,
    pub states: usize,
    pub method: String,
    pub value: String,
    pub iterations: usize,
    pub time_ms: f64,
}

pub const BENCH_HEADER: &str = "instance,states,method,value,iterations,time_ms";

fn bench_methods(list: &str, default_variant: Variant) -> Result<Vec<(String, Option<Variant>)>, Error> {
    list.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "restart" => Ok((s.to_string(), None)),
            "treat" => Ok((format!("treat-{}", default_variant.name()), Some(default_variant))),
            _ => match s.strip_prefix("treat-") {
                Some(v) => Ok((s.to_string(), Some(v.parse()?))),
                None => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
            },
        })
        .collect()
}

fn bench_one(
    instance: usize,
    a: &BenchArgs,
    methods: &[(String, Option<Variant>)],
    mode: Mode,
    dir: Direction,
) -> Result<Vec<BenchRow>, Error> {
    let cfg = GenConfig::new(a.states, a.max_actions, a.acyclic);
    let m = random_mdp(a.seed.wrapping_add(instance as u64), &cfg)?;
    let q = Query::from_labels(&m, "goal", "evidence", dir)?.with_mode(mode);
    let mut rows = Vec::new();
    for (name, variant) in methods {
        let start = Instant::now();
        let (value, iterations) = match variant {
            None if mode.is_exact() => {
                let r = solve_restart::<Rational>(&m, &q)?;
                (render(&r.value), r.iterations)
            }
            None => {
                let r = solve_restart::<f64>(&m, &q)?;
                (render(&r.value), r.iterations)
            }
            Some(v) => {
                let opt = optimize(&m, &q, &BisectionConfig::new(*v, default_eps(mode), mode))?;
                let value = match &opt.estimate {
                    Estimate::Exact(x) if mode.is_exact() => format_rational(x),
                    e => format!("{}", to_f64(e.value())),
                };
                (value, opt.iterations)
            }
        };
        rows.push(BenchRow {
            instance,
            states: m.num_states(),
            method: name.clone(),
            value,
            iterations,
            time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(rows)
}

/// Runs the benchmark and returns its rows ordered by instance.
pub fn bench_rows(a: &BenchArgs) -> Result<Vec<BenchRow>, Error> {
    let mode: Mode = a.mode.parse()?;
    let dir: Direction = a.direction.parse()?;
    let methods = bench_methods(&a.methods, a.variant.parse()?)?;
    if a.count > 0 && (a.states < 2 || a.max_actions == 0) {
        return Err(Error::InvalidArgument("need at least 2 states and 1 action".into()));
    }
    let jobs = a.jobs.max(1).min(a.count.max(1));
    let mut per_instance: Vec<Option<Result<Vec<BenchRow>, Error>>> = (0..a.count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = per_instance.chunks_mut(a.count.div_ceil(jobs).max(1)).enumerate().collect();
        let size = a.count.div_ceil(jobs).max(1);
        for (k, chunk) in chunks {
            let methods = &methods;
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(bench_one(k * size + j, a, methods, mode, dir));
                }
            });
        }
    });
    let mut rows = Vec::new();
    for r in per_instance {
        rows.extend(r.expect("every instance ran")?);
    }
    Ok(rows)
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let rows = bench_rows(a)?;
    let mut text = String::from(BENCH_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            r.instance, r.states, r.method, r.value, r.iterations, r.time_ms
        ));
    }
    emit(out, &text)?;
    Ok(EXIT_HOLDS)
}
