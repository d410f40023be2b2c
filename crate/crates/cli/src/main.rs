use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use warpshrink::config::parse_config;
use warpshrink::harness::{self, ExperimentConfig};
use warpshrink::report::{self, ReportLine, RunManifest};

/// Warped-wavelet Bayesian shrinkage experiments.
///
/// The worker count is read from WARPSHRINK_THREADS.
#[derive(Parser, Debug)]
#[command(name = "warpshrink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every experiment in a config and write a report CSV.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Override the base seed of every experiment.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of runs of every experiment.
        #[arg(long)]
        runs: Option<usize>,
        /// Also write a reconstruction trace for the first run of each experiment.
        #[arg(long)]
        traces: bool,
    },
    /// Merge the report CSVs of a directory into one summary table.
    Table { dir: PathBuf },
    /// Shrinkage-weight and noise-level diagnostics on one realization.
    Audit {
        config: PathBuf,
        /// Tolerance of the noise-level event, in units of 1/n.
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
    /// Error decay against sample size over each experiment's `rate_n`.
    Rate { config: PathBuf },
}

fn load(path: &Path) -> Result<(String, Vec<ExperimentConfig>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfgs = parse_config(&text).with_context(|| format!("invalid config {}", path.display()))?;
    for cfg in &cfgs {
        cfg.validate()
            .with_context(|| format!("invalid experiment {}/{}/{}", cfg.signal, cfg.design, cfg.rule))?;
    }
    Ok((text, cfgs))
}

fn in_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    Ok(harness::with_threads(harness::threads_from_env(), f)?)
}

/// Writes every file into a staging directory first so that a failure leaves
/// no partial output behind.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let staging = tempfile::Builder::new()
        .prefix(".warpshrink-")
        .tempdir_in(dir)
        .with_context(|| format!("staging in {}", dir.display()))?;
    for (name, body) in files {
        let path = staging.path().join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut moved = Vec::new();
    for (name, _) in files {
        let target = dir.join(name);
        if let Err(e) = fs::rename(staging.path().join(name), &target) {
            for p in &moved {
                let _ = fs::remove_file(p);
            }
            return Err(e).with_context(|| format!("moving {}", target.display()));
        }
        moved.push(target);
    }
    Ok(())
}

fn run(
    config: &Path,
    output: &Path,
    seed: Option<u64>,
    runs: Option<usize>,
    traces: bool,
) -> Result<()> {
    let (text, mut cfgs) = load(config)?;
    let mut overrides = Vec::new();
    if let Some(s) = seed {
        overrides.push(("seed".to_string(), s.to_string()));
    }
    if let Some(r) = runs {
        if r == 0 {
            bail!("--runs must be at least 1");
        }
        overrides.push(("runs".to_string(), r.to_string()));
    }
    if traces {
        overrides.push(("traces".to_string(), "true".to_string()));
    }
    for cfg in &mut cfgs {
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(r) = runs {
            cfg.runs = r;
        }
    }
    let manifest = RunManifest {
        config_path: config.display().to_string(),
        config_text: text,
        output_dir: output.display().to_string(),
        overrides,
        tool_version: format!("warpshrink {}", env!("CARGO_PKG_VERSION")),
    };
    let hash = manifest.hash();

    let rows = in_pool(|| harness::run_grid(&cfgs))??;
    let lines: Vec<ReportLine> = rows.iter().map(ReportLine::from).collect();
    let mut files = vec![
        (format!("report-{hash}.csv"), report::format_csv(&lines)?),
        (format!("manifest-{hash}.txt"), manifest.render()),
    ];
    if traces {
        for (i, cfg) in cfgs.iter().enumerate() {
            let t = in_pool(|| harness::trace(cfg, cfg.seed.wrapping_add(1)))??;
            let name = format!(
                "trace-{i:03}-{}-{}-{}-rsnr{}-n{}-{hash}.csv",
                cfg.signal,
                cfg.design.label(),
                cfg.rule.label(),
                cfg.rsnr,
                cfg.n
            );
            files.push((name, report::format_trace(&t)));
        }
    }
    write_all(output, &files)?;
    print!("{}", report::format_table(&lines));
    println!("wrote {} files to {} (manifest {hash})", files.len(), output.display());
    Ok(())
}

fn table(dir: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report-") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no report-*.csv files in {}", dir.display());
    }
    let mut lines = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        lines.extend(report::parse_csv(&text).with_context(|| format!("parsing {}", p.display()))?);
    }
    print!("{}", report::format_table(&lines));
    Ok(())
}

fn audit(config: &Path, delta: f64) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 {
        bail!("--delta must be positive");
    }
    let (_, cfgs) = load(config)?;
    println!("signal,design,rule,rsnr,n,t_n,max_weight_excursion,c_min,k_min,high_level_violations,omega_fraction,degenerate");
    for cfg in &cfgs {
        let r = in_pool(|| harness::audit(cfg, delta / cfg.n as f64))??;
        println!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{}",
            cfg.signal,
            cfg.design.label(),
            cfg.rule.label(),
            cfg.rsnr,
            cfg.n,
            r.weights.t_n,
            r.weights.max_weight_excursion,
            r.weights.c_min,
            r.weights.k_min,
            r.weights.high_level_violations,
            r.omega_fraction,
            r.degenerate
        );
    }
    Ok(())
}

fn rate(config: &Path) -> Result<()> {
    let (_, cfgs) = load(config)?;
    println!("signal,design,rule,rsnr,n,mean_mse");
    let mut slopes = Vec::new();
    for cfg in &cfgs {
        let study = in_pool(|| harness::rate_study(cfg, &cfg.rate_n))??;
        for (n, m) in study.n.iter().zip(&study.mean_mse) {
            println!("{},{},{},{},{n},{m:.6e}", cfg.signal, cfg.design.label(), cfg.rule.label(), cfg.rsnr);
        }
        slopes.push((cfg, study.slope, study.inversions));
    }
    for (cfg, slope, inversions) in slopes {
        let s = slope.map_or("undefined".to_string(), |s| format!("{s:.4}"));
        println!(
            "# {}/{}/{} rsnr={}: slope {s}, {inversions} inversions",
            cfg.signal,
            cfg.design.label(),
            cfg.rule.label(),
            cfg.rsnr
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output,
            seed,
            runs,
            traces,
        } => run(&config, &output, seed, runs, traces),
        Command::Table { dir } => table(&dir),
        Command::Audit { config, delta } => audit(&config, delta),
        Command::Rate { config } => rate(&config),
    }
}
