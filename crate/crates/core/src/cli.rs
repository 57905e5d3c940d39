//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::domain::{Order, Sample, Shape, SmoothnessSpec};
use crate::error::{Error, Result};
use crate::estimate::{self, EstimateOptions};
use crate::fuzzy::{self, FuzzyOptions};
use crate::localpoly::Baseline;
use crate::optimizer::{Criterion, OptimizeOptions};
use crate::simbench::{self, Design, DgpSpec, LChoice, McMethod, McOptions, Mu};
use crate::smoothness;
use crate::variance::{VarianceMethod, DEFAULT_MATCHES};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "optkink", version, about = "Optimized honest confidence intervals for kink and discontinuity designs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Honest interval for a sharp design.
    Estimate(EstimateArgs),
    /// Anderson-Rubin confidence set for a fuzzy design.
    Fuzzy(FuzzyArgs),
    /// Monte Carlo study on the built-in designs.
    Simulate(SimulateArgs),
    /// Rules of thumb and a lower bound for the curvature constant.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rot {
    Quartic,
    Quadratic,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Umse,
    Hl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    None,
    Concave,
    Convex,
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Kink,
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Nn,
    NnAdjusted,
    Homoskedastic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Umse => Criterion::Umse,
            CriterionArg::Hl => Criterion::Hl,
        }
    }
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::None => Shape::None,
            ShapeArg::Concave => Shape::Concave,
            ShapeArg::Convex => Shape::Convex,
            ShapeArg::Increasing => Shape::Increasing,
            ShapeArg::Decreasing => Shape::Decreasing,
        }
    }
}

impl From<VarianceArg> for VarianceMethod {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Nn => VarianceMethod::Nn,
            VarianceArg::NnAdjusted => VarianceMethod::NnAdjusted,
            VarianceArg::Homoskedastic => VarianceMethod::Homoskedastic,
        }
    }
}

/// Options shared by `estimate` and `fuzzy`.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// CSV file with a header row and columns x, y (and t for fuzzy designs).
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub cutoff: f64,
    /// Bound on the second derivative.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Take L from a rule of thumb instead.
    #[arg(long, value_enum, conflicts_with = "l")]
    pub rot: Option<Rot>,
    #[arg(long, value_enum, default_value = "hl")]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "none")]
    pub shape: ShapeArg,
    #[arg(long, value_enum, default_value = "kink")]
    pub order: OrderArg,
    #[arg(long, value_enum)]
    pub variance: Option<VarianceArg>,
    #[arg(long, default_value_t = DEFAULT_MATCHES)]
    pub nn_matches: usize,
    /// Number of grid centers (chosen from the data when absent).
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Accepted for uniformity; these commands draw no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Divide the estimate and interval by a known first-stage kink.
    #[arg(long, allow_hyphen_values = true)]
    pub kink_denominator: Option<f64>,
    /// Write x and the estimator weights to this CSV file.
    #[arg(long)]
    pub dump_weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Bound on the second derivative of the treatment equation.
    #[arg(long = "LT", default_value_t = 0.0)]
    pub l_t: f64,
    /// Scanned range as `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub tau_range: Option<String>,
    #[arg(long, default_value_t = 81)]
    pub tau_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuArg {
    Mu1,
    Mu2,
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignArg {
    Continuous,
    Discrete,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file with the same keys as the flags (mu, L, n, reps, seed, design, K, methods).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mu: Option<MuArg>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    /// Support points of the discrete design.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Comma-separated methods such as `opt_hl:2,opt_umse:rot,fl_hl:2,conventional,us,rbc,rbc_pilot`.
    #[arg(long)]
    pub methods: Option<String>,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.txt`.
    #[arg(long, default_value = "simulate")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub cutoff: f64,
    /// Bin width for the lower bound (range / 10 when absent).
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(long, default_value_t = smoothness::DEFAULT_QUANTILE)]
    pub quantile: f64,
    #[arg(long, default_value_t = smoothness::DEFAULT_KNOTS)]
    pub knots: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

/// Parses `args` (program name first), runs the command, writes to `out` and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_NUMERICAL
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<()> {
    let text = match cmd {
        Command::Estimate(a) => cmd_estimate(a)?,
        Command::Fuzzy(a) => cmd_fuzzy(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Bound(a) => cmd_bound(a)?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Columns of a data file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Option<Vec<f64>>,
}

/// Reads a comma-separated file with a header naming columns `x`, `y` and optionally `t`.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (ix, iy) = match (find("x"), find("y")) {
        (Some(ix), Some(iy)) => (ix, iy),
        _ => {
            return Err(Error::InvalidData(format!(
                "{}: header must name columns x and y",
                path.display()
            )))
        }
    };
    let it = find("t");
    let mut table = Table {
        x: vec![],
        y: vec![],
        t: it.map(|_| vec![]),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let get = |i: usize, name: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::InvalidData(format!(
                    "{}: row {}: cannot parse {name} value {raw:?}",
                    path.display(),
                    row + 2
                ))
            })
        };
        table.x.push(get(ix, "x")?);
        table.y.push(get(iy, "y")?);
        if let (Some(i), Some(t)) = (it, table.t.as_mut()) {
            t.push(get(i, "t")?);
        }
    }
    if table.x.is_empty() {
        return Err(Error::InvalidData(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidData(format!("{}: {other:?}", path.display())),
    }
}

fn rot_value(sample: &Sample, rot: Rot) -> Result<f64> {
    match rot {
        Rot::Quartic => smoothness::rot_quartic(sample),
        Rot::Quadratic => smoothness::rot_quadratic(sample, 2.0),
        Rot::Spline => smoothness::rot_spline(sample, smoothness::DEFAULT_KNOTS),
    }
}

fn resolve_l(c: &CommonArgs, sample: &Sample) -> Result<(f64, String)> {
    match (c.l, c.rot) {
        (Some(l), _) => Ok((l, "fixed".into())),
        (None, Some(r)) => {
            let l = rot_value(sample, r)?;
            let name = format!("{r:?}").to_lowercase();
            Ok((l, format!("rot_{name}")))
        }
        (None, None) => Err(Error::invalid("set --L or choose a rule of thumb with --rot")),
    }
}

fn order(o: OrderArg) -> Order {
    match o {
        OrderArg::Kink => Order::Kink,
        OrderArg::Level => Order::Level,
    }
}

fn optimize_options(c: &CommonArgs) -> OptimizeOptions {
    OptimizeOptions {
        num_centers: c.grid_points,
        ..OptimizeOptions::default()
    }
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<String> {
    let c = &a.common;
    let table = read_table(&c.csv)?;
    let mut sample = Sample::new(table.x, table.y, c.cutoff)?;
    if let Some(k) = a.kink_denominator {
        if !(k.is_finite() && k != 0.0) {
            return Err(Error::invalid("--kink-denominator must be finite and nonzero"));
        }
        sample.kink_denominator = Some(k);
    }
    let (l, l_source) = resolve_l(c, &sample)?;
    let spec = SmoothnessSpec {
        l,
        l_t: 0.0,
        order: order(c.order),
        shape: c.shape.into(),
    };
    if !(l > 0.0) {
        return Err(Error::invalid(format!("L must be positive, got {l}")));
    }
    let opts = EstimateOptions {
        variance: c.variance.map_or(VarianceMethod::Nn, Into::into),
        matches: c.nn_matches,
        optimize: optimize_options(c),
    };
    let est = estimate::optimized_interval(&sample, &spec, c.alpha, c.criterion.into(), &opts)?;
    if let Some(path) = &a.dump_weights {
        write_weights(path, &sample, &est.solution.weights, c.cutoff)?;
    }
    let (wratio_sq, be_ratio) = (est.solution.wratio_sq, est.solution.be_ratio);
    let iv = &est.interval;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "estimate": iv.estimate,
        "lower": iv.lower,
        "upper": iv.upper,
        "alpha": iv.alpha,
        "se": iv.se,
        "max_bias": iv.max_bias,
        "t_bar": iv.t_bar,
        "cv": iv.cv,
        "kappa": est.solution.kappa,
        "L": l,
        "L_source": l_source,
        "diagnostics": { "wratio_sq": wratio_sq, "be_ratio": be_ratio },
        "method": iv.method,
        "n_used": est.n_used,
    });
    if let Some((a, b)) = iv.tau_interval {
        report["ratio"] = json!({ "lower": a, "upper": b });
    }
    Ok(match c.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report).map_err(json_err)?),
        Format::Csv => flat_csv(&report)?,
        Format::Text => {
            let mut s = String::new();
            s.push_str(&format!("method      {}\n", iv.method));
            s.push_str(&format!("estimate    {:.6}\n", iv.estimate));
            s.push_str(&format!("interval    [{:.6}, {:.6}]\n", iv.lower, iv.upper));
            if let Some((a, b)) = iv.tau_interval {
                s.push_str(&format!("ratio       [{a:.6}, {b:.6}]\n"));
            }
            s.push_str(&format!("alpha       {}\n", iv.alpha));
            s.push_str(&format!("se          {:.6}\n", iv.se));
            s.push_str(&format!("max_bias    {:.6}\n", iv.max_bias));
            s.push_str(&format!("t_bar       {:.4}\n", iv.t_bar));
            s.push_str(&format!("cv          {:.4}\n", iv.cv));
            s.push_str(&format!("kappa       {:.4}\n", est.solution.kappa));
            s.push_str(&format!("L           {l} ({l_source})\n"));
            s.push_str(&format!("wratio_sq   {wratio_sq:.4e}\n"));
            s.push_str(&format!("be_ratio    {be_ratio:.4e}\n"));
            s.push_str(&format!("n_used      {}\n", est.n_used));
            s
        }
    })
}

fn write_weights(path: &Path, sample: &Sample, w: &[f64], cutoff: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    wtr.write_record(["x", "weight"]).map_err(|e| csv_error(path, e))?;
    for (x, w) in sample.x.iter().zip(w) {
        wtr.write_record([format!("{}", x + cutoff), format!("{w:.17e}")])
            .map_err(|e| csv_error(path, e))?;
    }
    wtr.flush()?;
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Numerical(format!("json output: {e}"))
}

/// One header row and one value row, nested objects flattened with `.`.
fn flat_csv(v: &Value) -> Result<String> {
    fn walk(prefix: &str, v: &Value, keys: &mut Vec<String>, vals: &mut Vec<String>) {
        match v {
            Value::Object(m) => {
                for (k, v) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, keys, vals);
                }
            }
            Value::String(s) => {
                keys.push(prefix.to_string());
                vals.push(s.clone());
            }
            other => {
                keys.push(prefix.to_string());
                vals.push(other.to_string());
            }
        }
    }
    let (mut keys, mut vals) = (vec![], vec![]);
    walk("", v, &mut keys, &mut vals);
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(&keys).map_err(|e| Error::Numerical(e.to_string()))?;
    w.write_record(&vals).map_err(|e| Error::Numerical(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::invalid(format!("--tau-range must look like lo,hi; got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(Error::invalid("--tau-range needs lo < hi"));
    }
    Ok((lo, hi))
}

pub fn cmd_fuzzy(a: &FuzzyArgs) -> Result<String> {
    let c = &a.common;
    let table = read_table(&c.csv)?;
    let t = table
        .t
        .ok_or_else(|| Error::InvalidData(format!("{}: the fuzzy design needs a t column", c.csv.display())))?;
    let sample = Sample::with_treatment(table.x, table.y, Some(t), c.cutoff)?;
    let (l, l_source) = resolve_l(c, &sample)?;
    let spec = SmoothnessSpec {
        l,
        l_t: a.l_t,
        order: order(c.order),
        shape: c.shape.into(),
    };
    let mut opts = FuzzyOptions {
        tau_range: a.tau_range.as_deref().map(parse_range).transpose()?,
        tau_steps: a.tau_steps,
        criterion: c.criterion.into(),
        ..FuzzyOptions::default()
    };
    if let Some(v) = c.variance {
        opts.estimate.variance = v.into();
    }
    opts.estimate.matches = c.nn_matches;
    opts.estimate.optimize = optimize_options(c);
    let set = fuzzy::ar_confidence_set(&sample, &spec, c.alpha, &opts)?;
    let fs = &set.first_stage;
    let trace: Vec<Value> = set
        .tau_grid
        .iter()
        .map(|p| json!({"tau": p.tau, "accepted": p.accepted, "lower": p.lower, "upper": p.upper}))
        .collect();
    let shape = format!("{:?}", set.shape).to_lowercase();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "shape": shape,
        "label": set.label(),
        "a": set.a,
        "b": set.b,
        "alpha": c.alpha,
        "L": l,
        "L_source": l_source,
        "L_T": a.l_t,
        "boundary": set.boundary,
        "refined": set.refined,
        "first_stage": {"estimate": fs.estimate, "lower": fs.lower, "upper": fs.upper, "se": fs.se, "max_bias": fs.max_bias},
        "notes": set.notes,
        "trace": trace,
    });
    Ok(match c.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report).map_err(json_err)?),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            let e = |e: csv::Error| Error::Numerical(e.to_string());
            w.write_record(["tau", "accepted", "lower", "upper"]).map_err(e)?;
            for p in &set.tau_grid {
                w.write_record([p.tau.to_string(), p.accepted.to_string(), p.lower.to_string(), p.upper.to_string()])
                    .map_err(e)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?)
                .map_err(|e| Error::Numerical(e.to_string()))?
        }
        Format::Text => {
            let mut s = format!("confidence set  {}\nshape           {shape}\n", set.label());
            if set.boundary {
                s.push_str("boundary        the set reaches the edge of the scanned range\n");
            }
            s.push_str(&format!(
                "first stage     {:.6} [{:.6}, {:.6}]\n",
                fs.estimate, fs.lower, fs.upper
            ));
            for n in &set.notes {
                s.push_str(&format!("note            {n}\n"));
            }
            s.push_str(&format!("{:>14}  {:>8}  {:>14}  {:>14}\n", "tau", "accepted", "lower", "upper"));
            for p in &set.tau_grid {
                s.push_str(&format!(
                    "{:>14.6}  {:>8}  {:>14.6}  {:>14.6}\n",
                    p.tau,
                    if p.accepted { "yes" } else { "no" },
                    p.lower,
                    p.upper
                ));
            }
            s
        }
    })
}

/// Simulation settings as read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mu: Option<MuArg>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub design: Option<DesignArg>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub methods: Option<Vec<String>>,
}

/// Parses `name[:L][:shape]`, e.g. `opt_hl:2`, `fl_umse:rot`, `opt_umse:2:concave`.
pub fn parse_method(s: &str, default_l: f64) -> Result<McMethod> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let bad = |m: &str| Error::invalid(format!("method {s:?}: {m}"));
    let l = match parts.get(1) {
        None => LChoice::Fixed(default_l),
        Some(&"rot") => LChoice::RotSpline,
        Some(v) => LChoice::Fixed(v.parse().map_err(|_| bad("L must be a number or rot"))?),
    };
    let shape = match parts.get(2) {
        None => Shape::None,
        Some(v) => match ShapeArg::from_str(v, true) {
            Ok(s) => s.into(),
            Err(_) => return Err(bad("unknown shape")),
        },
    };
    if parts.len() > 3 {
        return Err(bad("too many fields"));
    }
    let pointwise = |b: Baseline| -> Result<McMethod> {
        if parts.len() > 1 {
            return Err(bad("pointwise methods take no L"));
        }
        Ok(McMethod::baseline(b))
    };
    let no_shape = || if parts.len() > 2 { Err(bad("only optimized methods take a shape")) } else { Ok(()) };
    match parts[0] {
        "opt_umse" => Ok(McMethod::Opt { criterion: Criterion::Umse, l, shape }),
        "opt_hl" => Ok(McMethod::Opt { criterion: Criterion::Hl, l, shape }),
        "fl_umse" => no_shape().map(|_| McMethod::Baseline { method: Baseline::FixedLength(Criterion::Umse), l }),
        "fl_hl" => no_shape().map(|_| McMethod::Baseline { method: Baseline::FixedLength(Criterion::Hl), l }),
        "conventional" => pointwise(Baseline::Conventional),
        "us" => pointwise(Baseline::Undersmoothed),
        "rbc" => pointwise(Baseline::RbcSameH),
        "rbc_pilot" => pointwise(Baseline::RbcSeparatePilot),
        other => Err(Error::invalid(format!("unknown method {other:?}"))),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let cfg: SimConfig = match &a.config {
        Some(p) => {
            let raw = fs::read_to_string(p)?;
            serde_json::from_str(&raw).map_err(|e| Error::InvalidData(format!("{}: {e}", p.display())))?
        }
        None => SimConfig::default(),
    };
    let mu = match a.mu.or(cfg.mu).unwrap_or(MuArg::Mu1) {
        MuArg::Mu1 => Mu::Mu1,
        MuArg::Mu2 => Mu::Mu2,
        MuArg::Concave => Mu::Concave,
    };
    let l = a.l.or(cfg.l).unwrap_or(2.0);
    let n = a.n.or(cfg.n).unwrap_or(2000);
    let reps = a.reps.or(cfg.reps).unwrap_or(1000);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let design = match (a.design.or(cfg.design).unwrap_or(DesignArg::Continuous), a.k.or(cfg.k)) {
        (DesignArg::Continuous, None) => Design::ContinuousUniform,
        (DesignArg::Continuous, Some(_)) => return Err(Error::invalid("--K applies to the discrete design only")),
        (DesignArg::Discrete, Some(k)) => Design::DiscreteUniform(k),
        (DesignArg::Discrete, None) => Design::DiscreteUniform(80),
    };
    if !(l > 0.0) {
        return Err(Error::invalid(format!("L must be positive, got {l}")));
    }
    let names: Vec<String> = match (&a.methods, cfg.methods) {
        (Some(m), _) => m.split(',').map(str::to_string).collect(),
        (None, Some(m)) => m,
        (None, None) => ["opt_umse", "opt_hl", "fl_umse", "fl_hl", "conventional", "us", "rbc", "rbc_pilot"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let methods = names.iter().map(|s| parse_method(s, l)).collect::<Result<Vec<_>>>()?;
    let dgp = DgpSpec::new(mu, l, n).with_design(design);
    let res = simbench::run_monte_carlo(&dgp, &methods, reps, seed, &McOptions::default())?;
    let text = res.to_text();
    let csv_path = a.out.with_extension("csv");
    let txt_path = a.out.with_extension("txt");
    fs::write(&csv_path, res.to_csv()?)?;
    fs::write(&txt_path, &text)?;
    Ok(format!(
        "{text}wrote {} and {}\n",
        csv_path.display(),
        txt_path.display()
    ))
}

pub fn cmd_bound(a: &BoundArgs) -> Result<String> {
    let table = read_table(&a.csv)?;
    let sample = Sample::new(table.x, table.y, a.cutoff)?;
    let quartic = smoothness::rot_quartic(&sample)?;
    let quad2 = smoothness::rot_quadratic(&sample, 2.0)?;
    let quad4 = smoothness::rot_quadratic(&sample, 4.0)?;
    let spline = smoothness::rot_spline(&sample, a.knots)?;
    let lo = sample.x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bin = a.bin_width.unwrap_or((hi - lo) / 10.0);
    let lower = smoothness::lower_bound_l(&sample, bin, a.quantile)?;
    let top = quartic.max(quad4).max(spline);
    let recommendation = format!(
        "report intervals for L from {:.4} (data lower bound) up to {:.4} (largest rule of thumb)",
        lower,
        top.max(lower)
    );
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "rot_quartic": quartic,
        "rot_quadratic_2": quad2,
        "rot_quadratic_4": quad4,
        "rot_spline": spline,
        "lower_bound": lower,
        "bin_width": bin,
        "quantile": a.quantile,
        "recommendation": recommendation,
    });
    Ok(match a.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report).map_err(json_err)?),
        Format::Csv => flat_csv(&report)?,
        Format::Text => format!(
            "rot_quartic        {quartic:.6}\nrot_quadratic x2   {quad2:.6}\nrot_quadratic x4   {quad4:.6}\n\
             rot_spline         {spline:.6}\nlower bound        {lower:.6} (bin width {bin:.4}, quantile {})\n\
             sensitivity        {recommendation}\n",
            a.quantile
        ),
    })
}

