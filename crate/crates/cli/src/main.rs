use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use w1mix::cvar::{cvar_rate_annotation, CVaRReport};
use w1mix::experiment::{
    limit_kernel, run_experiment, ExperimentConfig, ExperimentKind, ModelRef, SampleSizes,
};
use w1mix::functionals::{
    check_mixing_condition, compute_v, gine_integral, rq_integral, truncation_schedule,
    ConditionReport, TruncationSchedule,
};
use w1mix::gaussian::{kappa_bounds, l1_norm_distribution, KappaBounds, SUMMARY_LEVELS};
use w1mix::kernel::PsdRepair;
use w1mix::rng::derive_seed;
use w1mix::{Error, QuadratureConfig, SampleBatch};

#[derive(Parser)]
#[command(
    name = "w1mix",
    version,
    about = "W1 distance tools for stationary mixing sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// ExperimentConfig JSON document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model name, used when no config is given or to override it.
    #[arg(long)]
    model: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// V, the mixing and tail-integrability verdicts and ∫R·Q as JSON.
    Functionals(Common),
    /// Covariance kernel of the indicator process as CSV.
    Kernel(Common),
    /// Draws of ∫|Z| dt as CSV and a quantile summary as JSON.
    Simulate(Common),
    /// Plug-in CVaR with exact value and W1 bound when the law is known.
    Cvar(CvarArgs),
    /// Monte Carlo experiment writing results.csv and summary.json.
    Experiment {
        kind: Kind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct CvarArgs {
    #[arg(long)]
    u: f64,
    /// Built-in model to sample from.
    #[arg(long, conflicts_with = "input_csv")]
    model: Option<String>,
    /// Observations, one per line in the first column.
    #[arg(long)]
    input_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo draws for the κ envelope; 0 skips it.
    #[arg(long, default_value_t = 2_000)]
    kappa_draws: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Clt,
    Lil,
    Prop1,
    Cvar,
    Bivariate,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Clt => ExperimentKind::Clt,
            Kind::Lil => ExperimentKind::Lil,
            Kind::Prop1 => ExperimentKind::Prop1,
            Kind::Cvar => ExperimentKind::Cvar,
            Kind::Bivariate => ExperimentKind::Bivariate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Refused(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Functionals(c) => functionals(&c),
        Command::Kernel(c) => kernel(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Cvar(a) => cvar(&a),
        Command::Experiment { kind, common } => experiment(kind.into(), &common),
    }
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

/// Config from `--config`, or a minimal one for `--model`; flags override.
fn load_config(c: &Common, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    init_threads(c.threads)?;
    let mut cfg = match &c.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let model = c
                .model
                .as_deref()
                .ok_or_else(|| anyhow!("either --config or --model is required"))?;
            ExperimentConfig::new(kind, model, SampleSizes::One(1000))
        }
    };
    if let Some(m) = &c.model {
        cfg.model = ModelRef::Builtin(m.clone());
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.experiment = kind;
    cfg.validate()?;
    Ok(cfg)
}

fn output_path(
    out: Option<&Path>,
    configured: Option<&str>,
    file: &str,
) -> anyhow::Result<PathBuf> {
    let path = match (out, configured) {
        (Some(dir), _) => dir.join(file),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => PathBuf::from(file),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct FunctionalsReport {
    model: String,
    config_hash: String,
    mixing_condition: ConditionReport,
    #[serde(rename = "V")]
    v: Option<f64>,
    tail_root_integral: Option<f64>,
    tail_root_verdict: String,
    rq_integral: Option<f64>,
    schedules: Vec<TruncationSchedule>,
}

fn finite_or_message(r: w1mix::Result<f64>) -> (Option<f64>, String) {
    match r {
        Ok(v) => (Some(v), "holds".into()),
        Err(Error::Divergent(d)) => (None, format!("diverges: {d}")),
        Err(Error::Undecided(d)) => (None, format!("undecided: {d}")),
        Err(e) => (None, format!("error: {e}")),
    }
}

fn functionals(c: &Common) -> anyhow::Result<()> {
    let cfg = load_config(c, ExperimentKind::Clt)?;
    let model = cfg.model.descriptor()?.build()?;
    let quad = QuadratureConfig::default();
    let condition = check_mixing_condition(model.mixing(), &quad)?;
    let (v, _) = finite_or_message(compute_v(model.mixing(), &quad));
    let (tail_root_integral, tail_root_verdict) =
        finite_or_message(gine_integral(model.marginal(), &quad));
    let (rq, _) = finite_or_message(rq_integral(model.mixing(), &quad));
    let schedules = cfg
        .n
        .values()
        .into_iter()
        .map(|n| truncation_schedule(n, 1.0, model.mixing()))
        .collect::<w1mix::Result<Vec<_>>>()?;
    let report = FunctionalsReport {
        model: model.name().to_string(),
        config_hash: cfg.config_hash()?,
        mixing_condition: condition,
        v,
        tail_root_integral,
        tail_root_verdict,
        rq_integral: rq,
        schedules,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = &c.out {
        write_json(&output_path(Some(dir), None, "functionals.json")?, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelSummary {
    model: String,
    config_hash: String,
    grid_points: usize,
    trace: f64,
    l1_mean_closed_form: f64,
    psd_repair: Option<PsdRepair>,
}

fn kernel(c: &Common) -> anyhow::Result<()> {
    let cfg = load_config(c, ExperimentKind::Clt)?;
    let descriptor = cfg.model.descriptor()?;
    let model = descriptor.build()?;
    let seed = descriptor.seed_policy.resolve(cfg.seed);
    let k = limit_kernel(&model, &cfg, seed)?;
    let path = output_path(c.out.as_deref(), None, "kernel.csv")?;
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let points = k.grid.points();
    let mut header = vec!["t".to_string()];
    header.extend(points.iter().map(|p| p.to_string()));
    w.write_record(&header)?;
    for (i, t) in points.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend((0..k.size()).map(|j| k.get(i, j).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    let summary = KernelSummary {
        model: model.name().to_string(),
        config_hash: cfg.config_hash()?,
        grid_points: k.size(),
        trace: k.trace(),
        l1_mean_closed_form: k.l1_mean_closed_form(),
        psd_repair: k.psd_repair.clone(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    model: String,
    config_hash: String,
    draws: usize,
    mean: f64,
    quantiles: Vec<(f64, f64)>,
    kappa: KappaBounds,
    psd_repair: PsdRepair,
}

fn simulate(c: &Common) -> anyhow::Result<()> {
    let cfg = load_config(c, ExperimentKind::Clt)?;
    let descriptor = cfg.model.descriptor()?;
    let model = descriptor.build()?;
    let seed = descriptor.seed_policy.resolve(cfg.seed);
    let k = limit_kernel(&model, &cfg, seed)?;
    let sample = l1_norm_distribution(&k, cfg.limit_draws, derive_seed(seed, "simulate"))?;
    let kappa = kappa_bounds(&k, cfg.kappa_draws, derive_seed(seed, "kappa"))?;
    let csv_path = output_path(
        c.out.as_deref(),
        cfg.output.results.as_deref(),
        "results.csv",
    )?;
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["draw", "l1_norm"])?;
    for (i, v) in sample.values.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    let summary = SimulateSummary {
        model: model.name().to_string(),
        config_hash: cfg.config_hash()?,
        draws: sample.values.len(),
        mean: sample.mean,
        quantiles: sample.quantiles.clone(),
        kappa,
        psd_repair: sample.psd_repair.clone(),
    };
    debug_assert_eq!(summary.quantiles.len(), SUMMARY_LEVELS.len());
    let json_path = output_path(
        c.out.as_deref(),
        cfg.output.summary.as_deref(),
        "summary.json",
    )?;
    write_json(&json_path, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn read_column(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            // a header line
            Err(_) if line == 0 => {}
            Err(_) => bail!("line {}: '{field}' is not a number", line + 1),
        }
    }
    Ok(values)
}

fn cvar(a: &CvarArgs) -> anyhow::Result<()> {
    init_threads(a.threads)?;
    let quad = QuadratureConfig::default();
    let report = match (&a.model, &a.input_csv) {
        (Some(name), None) => {
            let cfg =
                ExperimentConfig::new(ExperimentKind::Cvar, name, SampleSizes::One(a.n as u64));
            let descriptor = cfg.model.descriptor()?;
            let model = descriptor.build()?;
            let seed = descriptor.seed_policy.resolve(a.seed);
            let batch = model.sample_batch(seed, 0, a.n)?;
            let mut report = CVaRReport::build(&batch, Some(model.marginal()), a.u, &quad)?;
            if a.kappa_draws > 0 {
                let k = limit_kernel(&model, &cfg, seed)?;
                report.rate_annotation = Some(cvar_rate_annotation(
                    &k,
                    a.u,
                    a.n as u64,
                    a.kappa_draws,
                    derive_seed(seed, "kappa"),
                )?);
            }
            report
        }
        (None, Some(path)) => {
            let batch = SampleBatch::new(read_column(path)?)?;
            CVaRReport::build(&batch, None, a.u, &quad)?
        }
        _ => bail!("exactly one of --model or --input-csv is required"),
    };
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_json(&output_path(Some(dir), None, "cvar.json")?, &report)?;
    }
    Ok(())
}

fn experiment(kind: ExperimentKind, c: &Common) -> anyhow::Result<()> {
    let cfg = load_config(c, kind)?;
    let out = run_experiment(&cfg)?;
    let csv_path = output_path(
        c.out.as_deref(),
        cfg.output.results.as_deref(),
        "results.csv",
    )?;
    let mut f =
        fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    out.write_csv(&mut f)?;
    f.flush()?;
    let json_path = output_path(
        c.out.as_deref(),
        cfg.output.summary.as_deref(),
        "summary.json",
    )?;
    write_json(&json_path, &out.summary)?;
    let verdict = match out.summary.passed {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "n/a",
    };
    println!(
        "{} {}: {} records, verdict {verdict}; wrote {} and {}",
        kind.as_str(),
        out.summary.model,
        out.records.len(),
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}
