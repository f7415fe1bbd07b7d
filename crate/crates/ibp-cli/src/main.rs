//! `ibp` — command-line front end for the immortal branching process
//! engines: closed forms, master-equation integration, Monte Carlo,
//! Laplace inversion, generating-function extraction, cross-engine
//! comparison, and scaling reports.
//!
//! Exit codes: 0 success (and within tolerance for `compare`), 1 tolerance
//! failure, 2 usage error, 3 engine error.

mod manifest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ibp_core::characteristics::{self, ExtractOptions, GfOptions};
use ibp_core::lapinv::{self, InvertOptions};
use ibp_core::mastereq::{self, IntegrateOptions, OdeMethod, TruncationPolicy, TruncationStrategy};
use ibp_core::mc::{self, EnsembleOptions};
use ibp_core::snapshot::{self, CsvRow, DistributionSnapshot, Engine};
use ibp_core::{exact, ProcessKind, ProcessSpec};

use manifest::ManifestBuilder;

#[derive(Parser)]
#[command(name = "ibp", version, about = "Immortal branching process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate closed-form distributions (and asymptotic laws).
    Exact(ExactArgs),
    /// Integrate the truncated master equation.
    Ode(OdeArgs),
    /// Run a Monte Carlo ensemble.
    Mc(McArgs),
    /// Recover no-extinction probabilities by Laplace inversion.
    Laplace(LaplaceArgs),
    /// Evaluate the two-type generating function on a grid and extract
    /// probabilities.
    Gf(GfArgs),
    /// Compare two snapshot files index by index.
    Compare(CompareArgs),
    /// Produce a scaling-collapse report for the no-extinction process.
    Scaling(ScalingArgs),
}

#[derive(Args, Clone)]
struct ProcessArgs {
    /// Process kind: critical | noext | immigration | twotype.
    #[arg(long)]
    process: String,
    /// Stem-cell injection rate (immigration, twotype).
    #[arg(long)]
    beta: Option<f64>,
    /// Proliferation/differentiation rate, 0 < r <= 1/2 (twotype).
    #[arg(long)]
    r: Option<f64>,
    /// Post-mitotic removal rate (twotype).
    #[arg(long)]
    gamma: Option<f64>,
}

impl ProcessArgs {
    fn to_spec(&self) -> Result<ProcessSpec> {
        let kind: ProcessKind = self.process.parse().map_err(anyhow::Error::from)?;
        let spec = ProcessSpec { kind, beta: self.beta, r: self.r, gamma: self.gamma };
        spec.validate()?;
        Ok(spec)
    }

    fn as_json(&self) -> serde_json::Value {
        json!({
            "process": self.process,
            "beta": self.beta,
            "r": self.r,
            "gamma": self.gamma,
        })
    }
}

#[derive(Args, Clone)]
struct TimeArgs {
    /// Comma-separated list of sample times.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Shorthand for a single sample time.
    #[arg(long, conflicts_with = "times")]
    tmax: Option<f64>,
}

impl TimeArgs {
    fn resolve(&self) -> Result<Vec<f64>> {
        let times = if let Some(t) = self.tmax {
            vec![t]
        } else {
            self.times.clone()
        };
        if times.is_empty() {
            bail!(ibp_core::Error::Domain("provide --times or --tmax".into()));
        }
        Ok(times)
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file; stdout when omitted (no manifest is written then).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    times: TimeArgs,
    /// Largest population index to emit.
    #[arg(long, default_value_t = 64)]
    mmax: u64,
    /// Which family to evaluate for processes with several closed forms:
    /// noext: scaling | smallm; twotype: pm | pin | pm0.
    #[arg(long)]
    variant: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OdeArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    times: TimeArgs,
    /// Truncation cap (states along m; two-type: rows).
    #[arg(long, default_value_t = 512)]
    truncation: usize,
    /// Two-type column cap; defaults to --truncation.
    #[arg(long)]
    nmax: Option<usize>,
    /// Tail tolerance that triggers adaptive regrowth.
    #[arg(long, default_value_t = 1e-8)]
    tail_tol: f64,
    /// Grow the cap adaptively instead of failing on tail overflow.
    #[arg(long)]
    adaptive: bool,
    /// Integrator: rk (adaptive 4/5 pair) or implicit (trapezoidal,
    /// one-type only, for long horizons).
    #[arg(long, default_value = "rk")]
    method: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    times: TimeArgs,
    #[arg(long, default_value_t = 100_000)]
    trajectories: u64,
    /// Base seed; falls back to IBP_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the ensemble (default: rayon's choice).
    #[arg(long)]
    jobs: Option<usize>,
    /// Histogram cap along m.
    #[arg(long, default_value_t = 512)]
    mmax: usize,
    /// Histogram cap along n (two-type).
    #[arg(long, default_value_t = 64)]
    nmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// json emits the full ensemble statistics; csv emits probability
    /// snapshots with a stderr column.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct LaplaceArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    times: TimeArgs,
    /// Largest population index to invert.
    #[arg(long, default_value_t = 10)]
    mmax: u64,
    /// Contour discretization parameter A (aliasing error ~ e^{-A}).
    #[arg(long, default_value_t = 18.4)]
    a: f64,
    /// Fourier-series terms before Euler averaging.
    #[arg(long, default_value_t = 50)]
    terms: usize,
    /// Euler averaging depth.
    #[arg(long, default_value_t = 12)]
    euler_depth: usize,
    /// Accuracy target; the run fails if the Euler tail exceeds it.
    #[arg(long, default_value_t = 1e-6)]
    target_abs: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GfArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    times: TimeArgs,
    /// Grid size along m (power of two).
    #[arg(long, default_value_t = 32)]
    mmax: usize,
    /// Grid size along n (power of two).
    #[arg(long, default_value_t = 32)]
    nmax: usize,
    /// Sampling radius in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Evaluate every grid node instead of mirroring by conjugation.
    #[arg(long)]
    no_symmetry: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    file_a: PathBuf,
    file_b: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::Maxabs)]
    metric: Metric,
    #[arg(long)]
    tol: f64,
    /// Ignore rows whose larger probability is below this cutoff.
    #[arg(long, default_value_t = 0.0)]
    min_prob: f64,
    /// Write the full per-row deviation report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Maxabs,
    Relmax,
    Zscore,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[command(flatten)]
    times: TimeArgs,
    #[arg(long, value_enum, default_value_t = ScalingEngine::Ode)]
    engine: ScalingEngine,
    #[arg(long, default_value_t = 0.05)]
    mu_min: f64,
    #[arg(long, default_value_t = 5.0)]
    mu_max: f64,
    #[arg(long, default_value_t = 25)]
    mu_points: usize,
    /// Truncation cap for the ODE engine; default scales with the largest
    /// requested time.
    #[arg(long)]
    truncation: Option<usize>,
    /// Collapse table output; the moment table lands next to it with a
    /// .moments.csv suffix. Stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScalingEngine {
    Ode,
    Laplace,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<ibp_core::Error>()
                .map(|e| if e.is_usage() { 2u8 } else { 3u8 })
                .unwrap_or(3);
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Exact(args) => cmd_exact(args),
        Command::Ode(args) => cmd_ode(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Laplace(args) => cmd_laplace(args),
        Command::Gf(args) => cmd_gf(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Scaling(args) => cmd_scaling(args),
    }
}

fn install_pool<T>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building worker pool")?;
            pool.install(f)
        }
        None => f(),
    }
}

/// Serializes snapshots per the requested format.
fn render_snapshots(snaps: &[DistributionSnapshot], format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(snapshot::write_csv(snaps)?),
        Format::Json => {
            let rows: Vec<serde_json::Value> = snaps
                .iter()
                .flat_map(|s| {
                    let engine = s.engine.as_str();
                    let tail = s.tail_mass;
                    let time = s.time;
                    let se = s.stderr.clone();
                    match &s.data {
                        snapshot::SnapshotData::OneType { origin, probs } => probs
                            .iter()
                            .enumerate()
                            .map(|(i, &p)| {
                                let mut v = json!({
                                    "time": time,
                                    "m": origin + i as u64,
                                    "probability": p,
                                    "tail_mass": tail,
                                    "engine": engine,
                                });
                                if let Some(se) = &se {
                                    v["stderr"] = json!(se[i]);
                                }
                                v
                            })
                            .collect::<Vec<_>>(),
                        snapshot::SnapshotData::TwoType { rows, cols, probs } => (0..*rows)
                            .flat_map(|m| (0..*cols).map(move |n| (m, n)))
                            .map(|(m, n)| {
                                let i = m * cols + n;
                                let mut v = json!({
                                    "time": time,
                                    "m": m,
                                    "n": n,
                                    "probability": probs[i],
                                    "tail_mass": tail,
                                    "engine": engine,
                                });
                                if let Some(se) = &se {
                                    v["stderr"] = json!(se[i]);
                                }
                                v
                            })
                            .collect::<Vec<_>>(),
                    }
                })
                .collect();
            Ok(serde_json::to_string_pretty(&json!({
                "schema": "ibp-snapshot",
                "version": 1,
                "rows": rows,
            }))? + "\n")
        }
    }
}

fn emit(
    content: &str,
    out: &Option<PathBuf>,
    resolved: serde_json::Value,
    seed: Option<u64>,
) -> Result<()> {
    match out {
        Some(path) => {
            let mut mb = ManifestBuilder::new(resolved, seed);
            mb.write_output(path, content)?;
            mb.finish(path)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

// ------------------------------------------------------------------ exact

fn cmd_exact(args: ExactArgs) -> Result<ExitCode> {
    let spec = args.process.to_spec()?;
    let times = args.times.resolve()?;
    let variant = args.variant.as_deref();
    let mut snaps = Vec::new();
    for &t in &times {
        snaps.push(exact_snapshot(&spec, t, args.mmax, variant)?);
    }
    let content = render_snapshots(&snaps, args.output.format)?;
    let resolved = json!({
        "command": "exact",
        "process": args.process.as_json(),
        "times": times,
        "mmax": args.mmax,
        "variant": variant,
    });
    emit(&content, &args.output.out, resolved, None)?;
    Ok(ExitCode::SUCCESS)
}

fn exact_snapshot(
    spec: &ProcessSpec,
    t: f64,
    mmax: u64,
    variant: Option<&str>,
) -> Result<DistributionSnapshot> {
    let err_variant = |v: &str| {
        anyhow!(ibp_core::Error::Domain(format!(
            "variant {v:?} is not defined for process {}",
            spec.kind
        )))
    };
    match spec.kind {
        ProcessKind::Critical => {
            if let Some(v) = variant {
                if v != "pm" {
                    return Err(err_variant(v));
                }
            }
            let probs: Vec<f64> =
                (1..=mmax).map(|m| exact::critical_pm(m, t)).collect::<ibp_core::Result<_>>()?;
            let tail = (exact::critical_survival(t) - probs.iter().sum::<f64>()).max(0.0);
            Ok(DistributionSnapshot::one_type(t, Engine::ClosedForm, 1, probs, tail))
        }
        ProcessKind::Immigration => {
            if let Some(v) = variant {
                if v != "pm" {
                    return Err(err_variant(v));
                }
            }
            let beta = spec.beta.expect("validated");
            let probs: Vec<f64> = (1..=mmax)
                .map(|m| exact::immigration_pm(m, t, beta))
                .collect::<ibp_core::Result<_>>()?;
            let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
            Ok(DistributionSnapshot::one_type(t, Engine::ClosedForm, 1, probs, tail))
        }
        ProcessKind::NoExtinction => {
            let v = variant.unwrap_or("scaling");
            let law: fn(f64, f64) -> ibp_core::Result<f64> = match v {
                "scaling" => exact::noext_scaling_pm,
                "smallm" => exact::noext_small_m_asymptote,
                other => return Err(err_variant(other)),
            };
            let probs: Vec<f64> =
                (1..=mmax).map(|m| law(m as f64, t)).collect::<ibp_core::Result<_>>()?;
            // Asymptotic laws are not normalized distributions; no tail bound.
            Ok(DistributionSnapshot::one_type(t, Engine::ClosedForm, 1, probs, 0.0))
        }
        ProcessKind::TwoTypeSource => {
            if spec.r != Some(0.25) || spec.gamma != Some(1.0) {
                bail!(ibp_core::Error::Domain(
                    "closed forms for the two-type process exist at r = 1/4, gamma = 1 only; \
                     use the ode or gf engines elsewhere"
                        .into()
                ));
            }
            let beta = spec.beta.expect("validated");
            let v = variant.unwrap_or("pm");
            let law: Box<dyn Fn(u64) -> ibp_core::Result<f64>> = match v {
                "pm" => Box::new(move |m| exact::twotype_special_pm(m, t, beta)),
                "pin" => Box::new(move |n| exact::twotype_special_pin(n, t, beta)),
                "pm0" => Box::new(move |m| exact::twotype_special_pm0(m, t, beta)),
                other => return Err(err_variant(other)),
            };
            let probs: Vec<f64> = (0..=mmax).map(&*law).collect::<ibp_core::Result<_>>()?;
            let total: f64 = probs.iter().sum();
            // pm and pin are marginals of a normalized distribution; pm0
            // sums to the probability of having no post-mitotic cells.
            let tail = if v == "pm0" { 0.0 } else { (1.0 - total).max(0.0) };
            Ok(DistributionSnapshot::one_type(t, Engine::ClosedForm, 0, probs, tail))
        }
    }
}

// -------------------------------------------------------------------- ode

fn cmd_ode(args: OdeArgs) -> Result<ExitCode> {
    let spec = args.process.to_spec()?;
    let times = args.times.resolve()?;
    let method = match args.method.as_str() {
        "rk" => OdeMethod::Dopri5,
        "implicit" => OdeMethod::ImplicitTrapezoid,
        other => bail!(ibp_core::Error::Domain(format!(
            "unknown method {other:?} (expected rk|implicit)"
        ))),
    };
    let policy = TruncationPolicy {
        cap: args.truncation,
        cap_n: args.nmax,
        tail_tolerance: args.tail_tol,
        strategy: if args.adaptive {
            TruncationStrategy::AdaptiveGrow
        } else {
            TruncationStrategy::Fixed
        },
    };
    let opts = IntegrateOptions { method, ..IntegrateOptions::default() };
    let snaps = mastereq::integrate(&spec, &times, &policy, &opts)?;
    let content = render_snapshots(&snaps, args.output.format)?;
    let resolved = json!({
        "command": "ode",
        "process": args.process.as_json(),
        "times": times,
        "truncation": args.truncation,
        "nmax": args.nmax,
        "tail_tol": args.tail_tol,
        "adaptive": args.adaptive,
        "method": args.method,
    });
    emit(&content, &args.output.out, resolved, None)?;
    Ok(ExitCode::SUCCESS)
}

// --------------------------------------------------------------------- mc

fn cmd_mc(args: McArgs) -> Result<ExitCode> {
    let spec = args.process.to_spec()?;
    let times = args.times.resolve()?;
    let seed = args
        .seed
        .or_else(|| std::env::var("IBP_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0);
    let opts = EnsembleOptions {
        trajectories: args.trajectories,
        base_seed: seed,
        cap_m: args.mmax,
        cap_n: args.nmax,
    };
    let stats = install_pool(args.jobs, || Ok(mc::run_ensemble(&spec, &times, &opts)?))?;
    let content = match args.format {
        Format::Json => stats.to_json() + "\n",
        Format::Csv => snapshot::write_csv(&stats.to_snapshots())?,
    };
    let resolved = json!({
        "command": "mc",
        "process": args.process.as_json(),
        "times": times,
        "trajectories": args.trajectories,
        "seed": seed,
        "jobs": args.jobs,
        "mmax": args.mmax,
        "nmax": args.nmax,
    });
    emit(&content, &args.out, resolved, Some(seed))?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- laplace

fn cmd_laplace(args: LaplaceArgs) -> Result<ExitCode> {
    let spec = args.process.to_spec()?;
    if spec.kind != ProcessKind::NoExtinction {
        bail!(ibp_core::Error::Domain(
            "the Laplace engine covers the noext process; the others have closed forms".into()
        ));
    }
    let times = args.times.resolve()?;
    let opts = InvertOptions {
        discretization: args.a,
        terms: args.terms,
        euler_depth: args.euler_depth,
        target_abs: args.target_abs,
    };
    let mut snaps = Vec::new();
    for &t in &times {
        let probs: Vec<f64> = (1..=args.mmax)
            .map(|m| lapinv::invert(m, t, &opts))
            .collect::<ibp_core::Result<_>>()?;
        let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        snaps.push(DistributionSnapshot::one_type(t, Engine::LaplaceInv, 1, probs, tail));
    }
    let content = render_snapshots(&snaps, args.output.format)?;
    let resolved = json!({
        "command": "laplace",
        "process": args.process.as_json(),
        "times": times,
        "mmax": args.mmax,
        "a": args.a,
        "terms": args.terms,
        "euler_depth": args.euler_depth,
        "target_abs": args.target_abs,
    });
    emit(&content, &args.output.out, resolved, None)?;
    Ok(ExitCode::SUCCESS)
}

// --------------------------------------------------------------------- gf

fn cmd_gf(args: GfArgs) -> Result<ExitCode> {
    let spec = args.process.to_spec()?;
    let times = args.times.resolve()?;
    let opts = ExtractOptions {
        radius_m: args.radius,
        radius_n: args.radius,
        conjugate_symmetry: !args.no_symmetry,
        gf: GfOptions::default(),
    };
    let snaps = install_pool(args.jobs, || {
        times
            .iter()
            .map(|&t| {
                let snap = characteristics::extract_pmn(&spec, t, args.mmax, args.nmax, &opts)?;
                if snap.tail_mass > 1e-6 {
                    eprintln!(
                        "warning: aliased mass {:.3e} at t = {t} exceeds 1e-6; \
                         enlarge --mmax/--nmax",
                        snap.tail_mass
                    );
                }
                Ok(snap)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let content = render_snapshots(&snaps, args.output.format)?;
    let resolved = json!({
        "command": "gf",
        "process": args.process.as_json(),
        "times": times,
        "mmax": args.mmax,
        "nmax": args.nmax,
        "radius": args.radius,
        "symmetry": !args.no_symmetry,
    });
    emit(&content, &args.output.out, resolved, None)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- compare

type RowKey = (u64, u64, Option<u64>);

fn row_map(rows: Vec<CsvRow>, path: &Path) -> Result<BTreeMap<RowKey, CsvRow>> {
    let mut map = BTreeMap::new();
    for row in rows {
        let key = (row.time.to_bits(), row.m, row.n);
        if map.insert(key, row).is_some() {
            bail!(ibp_core::Error::SchemaMismatch(format!(
                "duplicate index in {}",
                path.display()
            )));
        }
    }
    Ok(map)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let text_a = std::fs::read_to_string(&args.file_a)
        .with_context(|| format!("reading {}", args.file_a.display()))?;
    let text_b = std::fs::read_to_string(&args.file_b)
        .with_context(|| format!("reading {}", args.file_b.display()))?;
    let a = row_map(snapshot::read_csv(&text_a)?, &args.file_a)?;
    let b = row_map(snapshot::read_csv(&text_b)?, &args.file_b)?;
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        bail!(ibp_core::Error::SchemaMismatch(format!(
            "index sets differ: {} has {} rows, {} has {} rows (times and indices must match)",
            args.file_a.display(),
            a.len(),
            args.file_b.display(),
            b.len()
        )));
    }

    struct Deviation {
        key: RowKey,
        a: f64,
        b: f64,
        value: f64,
    }
    let mut devs: Vec<Deviation> = Vec::with_capacity(a.len());
    let mut skipped = 0usize;
    for (key, ra) in &a {
        let rb = &b[key];
        let (pa, pb) = (ra.probability, rb.probability);
        if pa.abs().max(pb.abs()) < args.min_prob {
            skipped += 1;
            continue;
        }
        let value = match args.metric {
            Metric::Maxabs => (pa - pb).abs(),
            Metric::Relmax => (pa - pb).abs() / pa.abs().max(pb.abs()).max(1e-30),
            Metric::Zscore => {
                let sigma = ra.stderr.unwrap_or(0.0).max(rb.stderr.unwrap_or(0.0));
                if sigma == 0.0 {
                    if pa == pb {
                        skipped += 1;
                        continue;
                    }
                    bail!(ibp_core::Error::SchemaMismatch(format!(
                        "zscore metric needs a stderr column; row m={} has none",
                        ra.m
                    )));
                }
                (pa - pb).abs() / sigma
            }
        };
        devs.push(Deviation { key: *key, a: pa, b: pb, value });
    }

    devs.sort_by(|x, y| y.value.partial_cmp(&x.value).unwrap());
    let worst = devs.first().map(|d| d.value).unwrap_or(0.0);
    let pass = worst <= args.tol;
    let metric_name = match args.metric {
        Metric::Maxabs => "maxabs",
        Metric::Relmax => "relmax",
        Metric::Zscore => "zscore",
    };
    println!(
        "compare {} vs {}: metric={metric_name} rows={} skipped={skipped} worst={worst:.6e} \
         tol={:.6e} -> {}",
        args.file_a.display(),
        args.file_b.display(),
        devs.len(),
        args.tol,
        if pass { "PASS" } else { "FAIL" }
    );
    for d in devs.iter().take(5) {
        let (t_bits, m, n) = d.key;
        let t = f64::from_bits(t_bits);
        match n {
            Some(n) => println!(
                "  t={t} m={m} n={n}: a={:.9e} b={:.9e} dev={:.3e}",
                d.a, d.b, d.value
            ),
            None => println!("  t={t} m={m}: a={:.9e} b={:.9e} dev={:.3e}", d.a, d.b, d.value),
        }
    }
    if let Some(out) = &args.out {
        let mut report = String::from("# ibp-compare v1\ntime,m,n,a,b,deviation\n");
        for d in &devs {
            let (t_bits, m, n) = d.key;
            let t = f64::from_bits(t_bits);
            let n_str = n.map(|v| v.to_string()).unwrap_or_default();
            writeln!(report, "{t},{m},{n_str},{},{},{}", d.a, d.b, d.value).unwrap();
        }
        let resolved = json!({
            "command": "compare",
            "file_a": args.file_a.display().to_string(),
            "file_b": args.file_b.display().to_string(),
            "metric": metric_name,
            "tol": args.tol,
            "worst": worst,
            "pass": pass,
        });
        emit(&report, &Some(out.clone()), resolved, None)?;
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

// ---------------------------------------------------------------- scaling

fn cmd_scaling(args: ScalingArgs) -> Result<ExitCode> {
    let spec = args.process.to_spec()?;
    if spec.kind != ProcessKind::NoExtinction {
        bail!(ibp_core::Error::Domain("the scaling report covers the noext process".into()));
    }
    let times = args.times.resolve()?;
    if times.iter().any(|&t| t <= 1.0) {
        bail!(ibp_core::Error::Domain("scaling times must exceed 1".into()));
    }
    if args.mu_points < 2 || !(args.mu_max > args.mu_min) || !(args.mu_min > 0.0) {
        bail!(ibp_core::Error::Domain("bad mu grid".into()));
    }

    // Log-spaced mu grid.
    let mu_grid: Vec<f64> = (0..args.mu_points)
        .map(|i| {
            let f = i as f64 / (args.mu_points - 1) as f64;
            args.mu_min * (args.mu_max / args.mu_min).powf(f)
        })
        .collect();

    let mut collapse = String::from("# ibp-scaling v1\ntime,mu,m,scaled_prob\n");
    let mut moments = String::from("# ibp-scaling-moments v1\ntime,k,ratio\n");

    match args.engine {
        ScalingEngine::Ode => {
            let t_max = times.last().copied().unwrap();
            let cap = args.truncation.unwrap_or(((8.0 * t_max) as usize).max(512));
            let policy = TruncationPolicy {
                cap,
                cap_n: None,
                tail_tolerance: 1e-7,
                strategy: TruncationStrategy::Fixed,
            };
            // Long horizons sit beyond the explicit stability budget; the
            // trapezoidal path has no step-size floor.
            let opts = IntegrateOptions {
                method: OdeMethod::ImplicitTrapezoid,
                abs_tol: 1e-13,
                rel_tol: 1e-10,
                ..IntegrateOptions::default()
            };
            let snaps = mastereq::integrate(&spec, &times, &policy, &opts)?;
            for snap in &snaps {
                let t = snap.time;
                for &mu in &mu_grid {
                    let m = (mu * t).round().max(1.0) as u64;
                    let scaled = m as f64 * snap.prob(m) * t.ln();
                    writeln!(collapse, "{t},{},{m},{scaled}", m as f64 / t).unwrap();
                }
                for k in 1..=4u32 {
                    let mom = snap.moment(k);
                    let ratio = mom * t.ln() / (factorial(k - 1) * t.powi(k as i32));
                    writeln!(moments, "{t},{k},{ratio}").unwrap();
                }
            }
        }
        ScalingEngine::Laplace => {
            let opts = InvertOptions::default();
            for &t in &times {
                for &mu in &mu_grid {
                    let m = (mu * t).round().max(1.0) as u64;
                    let p = lapinv::invert(m, t, &opts)?;
                    let scaled = m as f64 * p * t.ln();
                    writeln!(collapse, "{t},{},{m},{scaled}", m as f64 / t).unwrap();
                }
                // First moment from d<m>/dt = P_1: <m>(t) = 1 + ∫_0^t P_1.
                let (integral, _) = ibp_core::quad::integrate_real(
                    &|tau| {
                        if tau <= 0.0 {
                            1.0
                        } else {
                            lapinv::invert(1, tau, &opts).unwrap_or(f64::NAN)
                        }
                    },
                    0.0,
                    t,
                    1e-9,
                    1e-8,
                )?;
                let mean = 1.0 + integral;
                let ratio = mean * t.ln() / t;
                writeln!(moments, "{t},1,{ratio}").unwrap();
            }
        }
    }

    let resolved = json!({
        "command": "scaling",
        "process": args.process.as_json(),
        "times": times,
        "engine": match args.engine { ScalingEngine::Ode => "ode", ScalingEngine::Laplace => "laplace" },
        "mu_min": args.mu_min,
        "mu_max": args.mu_max,
        "mu_points": args.mu_points,
        "truncation": args.truncation,
    });
    match &args.out {
        Some(path) => {
            let moments_path = path.with_extension("moments.csv");
            let mut mb = ManifestBuilder::new(resolved, None);
            mb.write_output(path, &collapse)?;
            mb.write_output(&moments_path, &moments)?;
            mb.finish(path)?;
        }
        None => {
            print!("{collapse}");
            println!();
            print!("{moments}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
