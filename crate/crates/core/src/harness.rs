//! Monte-Carlo driver for the simulation study.
//!
//! Run `r` of an experiment with base seed `s` draws its design points and
//! standard normal noise from one ChaCha8 stream seeded with `s + r`, so every
//! rule and noise level applied to the same (signal, design, n) sees the same
//! realization. Results are independent of the worker count.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coefficients::{empirical_coeffs_warped, omega_event_fraction, CoefficientSet, Sample};
use crate::design::{DesignModel, DesignSpec};
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_sd, CompensatedSum};
use crate::shrinkage::{weight_audit, shrink_unchecked, WeightAudit, RuleSpec};
use crate::signals::{calibrate_sigma, TestSignal};
use crate::wavelet::{DyadicTable, WaveletFamily, DEFAULT_RESOLUTION};

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "WARPSHRINK_THREADS";
/// Points in a reconstruction trace, endpoints included.
pub const TRACE_POINTS: usize = 1024;

pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_RSNR: f64 = 4.0;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_WAVELET: &str = "symmlet8";

/// One cell of the simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub signal: TestSignal,
    pub design: DesignSpec,
    pub rule: RuleSpec,
    pub n: usize,
    pub rsnr: f64,
    pub runs: usize,
    pub seed: u64,
    pub wavelet: String,
    pub resolution: u32,
    /// Overrides the calibrated noise level; zero gives noiseless data.
    pub sigma: Option<f64>,
    /// Sample sizes for [`rate_study`].
    pub rate_n: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(signal: TestSignal, design: DesignSpec, rule: RuleSpec) -> Self {
        ExperimentConfig {
            signal,
            design,
            rule,
            n: DEFAULT_N,
            rsnr: DEFAULT_RSNR,
            runs: DEFAULT_RUNS,
            seed: 0,
            wavelet: DEFAULT_WAVELET.into(),
            resolution: DEFAULT_RESOLUTION,
            sigma: None,
            rate_n: vec![256, 1024, 4096],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs", "must be at least 1"));
        }
        if !(self.rsnr > 0.0) || !self.rsnr.is_finite() {
            return Err(Error::param("rsnr", format!("{} must be positive", self.rsnr)));
        }
        if self.n < 3 {
            return Err(Error::param("n", format!("{} < 3", self.n)));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::param("sigma", format!("{s} must be finite and >= 0")));
            }
        }
        self.family()?;
        self.rule.cutoff(self.n)?;
        Ok(())
    }

    pub fn family(&self) -> Result<WaveletFamily> {
        WaveletFamily::by_name(&self.wavelet)
            .ok_or_else(|| Error::param("wavelet", format!("unknown wavelet `{}`", self.wavelet)))
    }

    /// Noise level actually used.
    pub fn noise_level(&self) -> Result<f64> {
        match self.sigma {
            Some(s) => Ok(s),
            None => calibrate_sigma(self.signal, self.rsnr),
        }
    }

    /// Configs that share draws: same target, design, size, seeds and basis.
    fn draw_key(&self) -> String {
        format!(
            "{}|{:?}|{}|{}|{}|{}|{}",
            self.signal, self.design, self.n, self.seed, self.runs, self.wavelet, self.resolution
        )
    }
}

/// Regression function evaluated on the original scale.
#[derive(Clone)]
pub enum Target {
    Signal(TestSignal),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Target {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Target::Signal(s) => s.value(x),
            Target::Custom(f) => f(x),
        }
    }
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Signal(s) => write!(f, "Signal({s})"),
            Target::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Design, basis and target for one sample size.
#[derive(Debug, Clone)]
pub struct Pipeline {
    model: DesignModel,
    table: DyadicTable,
    target: Target,
    n: usize,
}

/// One realization: design points, their warped images and noise draws.
#[derive(Debug, Clone)]
pub struct Draw {
    pub x: Vec<f64>,
    pub warped: Vec<f64>,
    pub truth: Vec<f64>,
    pub noise: Vec<f64>,
}

impl Pipeline {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Self::with_target(cfg, Target::Signal(cfg.signal))
    }

    pub fn with_target(cfg: &ExperimentConfig, target: Target) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.design.build()?;
        let table = DyadicTable::build(&cfg.family()?, cfg.resolution)?;
        Ok(Pipeline {
            model,
            table,
            target,
            n: cfg.n,
        })
    }

    pub fn model(&self) -> &DesignModel {
        &self.model
    }

    pub fn table(&self) -> &DyadicTable {
        &self.table
    }

    pub fn draw(&self, run_seed: u64) -> Result<Draw> {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
        let x = self.model.sample_with(&mut rng, self.n)?;
        let noise: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let warped = x.iter().map(|&v| self.model.cdf_unchecked(v)).collect();
        let truth = x.iter().map(|&v| self.target.eval(v)).collect();
        Ok(Draw {
            x,
            warped,
            truth,
            noise,
        })
    }

    /// Empirical coefficients of `truth + sigma * noise` up to `max_level`.
    pub fn coefficients(&self, draw: &Draw, sigma: f64, max_level: u32) -> Result<CoefficientSet> {
        let y = draw
            .truth
            .iter()
            .zip(&draw.noise)
            .map(|(f, z)| f + sigma * z)
            .collect();
        let sample = Sample::new(draw.x.clone(), y, sigma)?;
        Ok(empirical_coeffs_warped(&sample, &draw.warped, &self.table, max_level))
    }

    /// Shrinks `coeffs` (truncated to the rule's cutoff) and returns the RMSE
    /// at the design points.
    pub fn rmse(&self, draw: &Draw, coeffs: &CoefficientSet, rule: &RuleSpec) -> Result<f64> {
        let level = rule.cutoff(self.n)?;
        let kept = coeffs.truncate(level)?;
        let shrunk = shrink_unchecked(&kept, rule)?.coeffs;
        let mut acc = CompensatedSum::new();
        for (&u, &f) in draw.warped.iter().zip(&draw.truth) {
            let e = shrunk.reconstruct_at(&self.table, u) - f;
            acc.add(e * e);
        }
        Ok((acc.value() / self.n as f64).sqrt())
    }
}

/// RMSE of a single run seeded with `run_seed`.
pub fn run_once(cfg: &ExperimentConfig, run_seed: u64) -> Result<f64> {
    let p = Pipeline::new(cfg)?;
    run_once_with(&p, cfg, run_seed)
}

/// [`run_once`] on a prepared pipeline, e.g. one with a custom target.
pub fn run_once_with(p: &Pipeline, cfg: &ExperimentConfig, run_seed: u64) -> Result<f64> {
    let draw = p.draw(run_seed)?;
    let sigma = cfg.noise_level()?;
    let coeffs = p.coefficients(&draw, sigma, cfg.rule.cutoff(cfg.n)?)?;
    p.rmse(&draw, &coeffs, &cfg.rule)
}

/// Aggregated result for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub signal: String,
    pub design: String,
    pub rule: String,
    pub rsnr: f64,
    pub n: usize,
    pub runs: usize,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
    pub values: Vec<f64>,
}

impl ReportRow {
    fn from_values(cfg: &ExperimentConfig, values: Vec<f64>) -> Self {
        ReportRow {
            signal: cfg.signal.name().into(),
            design: cfg.design.label().into(),
            rule: cfg.rule.label().into(),
            rsnr: cfg.rsnr,
            n: cfg.n,
            runs: cfg.runs,
            mean_rmse: mean(&values),
            sd_rmse: sample_sd(&values),
            values,
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportRow> {
    Ok(run_grid(std::slice::from_ref(cfg))?.remove(0))
}

/// Runs every config, sharing draws and coefficients where possible.
/// Rows come back in input order.
pub fn run_grid(cfgs: &[ExperimentConfig]) -> Result<Vec<ReportRow>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        cfg.validate()?;
        groups.entry(cfg.draw_key()).or_default().push(i);
    }
    let mut rows: Vec<Option<ReportRow>> = vec![None; cfgs.len()];
    for members in groups.values() {
        let lead = &cfgs[members[0]];
        log::info!(
            "{} / {} / n={}: {} configs x {} runs",
            lead.signal,
            lead.design,
            lead.n,
            members.len(),
            lead.runs
        );
        let pipeline = Pipeline::new(lead)?;
        let sigmas = members
            .iter()
            .map(|&i| cfgs[i].noise_level())
            .collect::<Result<Vec<_>>>()?;
        let cutoffs = members
            .iter()
            .map(|&i| cfgs[i].rule.cutoff(cfgs[i].n))
            .collect::<Result<Vec<_>>>()?;
        let per_run: Vec<Vec<f64>> = (1..=lead.runs as u64)
            .into_par_iter()
            .map(|r| {
                let draw = pipeline.draw(lead.seed.wrapping_add(r))?;
                let mut out = vec![0.0; members.len()];
                let mut done = vec![false; members.len()];
                for a in 0..members.len() {
                    if done[a] {
                        continue;
                    }
                    // One coefficient pass per noise level, at the deepest cutoff needed.
                    let same: Vec<usize> = (a..members.len())
                        .filter(|&b| !done[b] && sigmas[b].to_bits() == sigmas[a].to_bits())
                        .collect();
                    let depth = same.iter().map(|&b| cutoffs[b]).max().unwrap_or(0);
                    let coeffs = pipeline.coefficients(&draw, sigmas[a], depth)?;
                    for b in same {
                        out[b] = pipeline.rmse(&draw, &coeffs, &cfgs[members[b]].rule)?;
                        done[b] = true;
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (slot, &i) in members.iter().enumerate() {
            let values = per_run.iter().map(|v| v[slot]).collect();
            rows[i] = Some(ReportRow::from_values(&cfgs[i], values));
        }
    }
    Ok(rows.into_iter().map(|r| r.expect("every config grouped")).collect())
}

/// Truth and estimate on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
}

/// Reconstruction for run `run_seed` on [`TRACE_POINTS`] points spanning `[0, 1]`.
pub fn trace(cfg: &ExperimentConfig, run_seed: u64) -> Result<Trace> {
    let p = Pipeline::new(cfg)?;
    trace_with(&p, cfg, run_seed)
}

pub fn trace_with(p: &Pipeline, cfg: &ExperimentConfig, run_seed: u64) -> Result<Trace> {
    let draw = p.draw(run_seed)?;
    let sigma = cfg.noise_level()?;
    let coeffs = p.coefficients(&draw, sigma, cfg.rule.cutoff(cfg.n)?)?;
    let shrunk = shrink_unchecked(&coeffs, &cfg.rule)?.coeffs;
    let x: Vec<f64> = (0..TRACE_POINTS)
        .map(|i| i as f64 / (TRACE_POINTS - 1) as f64)
        .collect();
    let truth = x.iter().map(|&v| p.target.eval(v)).collect();
    let estimate = shrunk.reconstruct(&p.model, &p.table, &x);
    Ok(Trace { x, truth, estimate })
}

/// Mean squared error against sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub n: Vec<usize>,
    pub mean_mse: Vec<f64>,
    /// Least-squares slope of `ln(mean MSE)` on `ln(n / ln n)`; `None` when
    /// the errors vanish and the logarithm is undefined.
    pub slope: Option<f64>,
    /// Adjacent pairs where the error grew with `n`.
    pub inversions: usize,
}

/// Runs `cfg` at every size in `n_list` (`cfg.n` is ignored).
pub fn rate_study(cfg: &ExperimentConfig, n_list: &[usize]) -> Result<RateStudy> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("rate_n", "need at least 3 increasing sample sizes"));
    }
    let mut mean_mse = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let at_n = ExperimentConfig { n, ..cfg.clone() };
        let row = run_experiment(&at_n)?;
        let squares: Vec<f64> = row.values.iter().map(|v| v * v).collect();
        mean_mse.push(mean(&squares));
    }
    let inversions = mean_mse.windows(2).filter(|w| w[1] > w[0]).count();
    let slope = if mean_mse.iter().all(|&m| m > 1e-24 && m.is_finite()) {
        let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64 / (n as f64).ln()).ln()).collect();
        let ys: Vec<f64> = mean_mse.iter().map(|m| m.ln()).collect();
        let (mx, my) = (mean(&xs), mean(&ys));
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(RateStudy {
        n: n_list.to_vec(),
        mean_mse,
        slope,
        inversions,
    })
}

/// Shrinkage-weight and noise-level diagnostics for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub weights: WeightAudit,
    pub delta: f64,
    pub omega_fraction: f64,
    pub degenerate: usize,
}

/// Audits run `cfg.seed + 1`; `delta` is the tolerance of the noise-level event.
pub fn audit(cfg: &ExperimentConfig, delta: f64) -> Result<AuditReport> {
    let p = Pipeline::new(cfg)?;
    let draw = p.draw(cfg.seed.wrapping_add(1))?;
    let sigma = cfg.noise_level()?;
    let coeffs = p.coefficients(&draw, sigma, cfg.rule.cutoff(cfg.n)?)?;
    let shrunk = shrink_unchecked(&coeffs, &cfg.rule)?;
    Ok(AuditReport {
        weights: weight_audit(&coeffs, &shrunk.coeffs, cfg.n)?,
        delta,
        omega_fraction: omega_event_fraction(&coeffs, delta)?,
        degenerate: shrunk.degenerate.len(),
    })
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Runs `f` on a dedicated pool; `None` uses the rayon default.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    Ok(pool.install(f))
}
