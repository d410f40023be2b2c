//! Coefficient-wise estimation rules.
//!
//! The Bayesian rules use the prior `beta ~ pi N(0, tau^2) + (1 - pi) delta_0`
//! with the stochastic noise level `gamma^2` of each coefficient, and return
//! the posterior median
//!
//! ```text
//! eta  = (1 - pi)/pi * sqrt(tau^2 + gamma^2)/gamma * exp(-tau^2 b^2 / (2 gamma^2 (tau^2 + gamma^2)))
//! zeta = tau^2/(gamma^2 + tau^2) |b| - tau gamma / sqrt(gamma^2 + tau^2) * Phi^-1((1 + min(eta, 1)) / 2)
//! med  = sign(b) max(0, zeta)
//! ```
//!
//! which is a thresholding rule: it vanishes for `|b|` up to a threshold
//! located by [`locate_threshold`].

use std::fmt;

use crate::coefficients::{cutoff_large, cutoff_small, CoefficientSet};
use crate::error::{Error, Result};
use crate::numeric::normal_quantile;
use crate::wavelet::AtomIndex;

/// Level-dependent hyperparameters `tau_j^2 = c1 2^(-j alpha)`,
/// `pi_j = min(1, c2 2^(-j beta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallVarHyper {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SmallVarHyper {
    fn default() -> Self {
        SmallVarHyper {
            c1: 1.0,
            c2: 2.0,
            alpha: 0.5,
            beta: 1.0,
        }
    }
}

/// How the large-variance prior scale is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauMode {
    /// `tau^2 = tau_scale / sqrt(n ln n)`.
    #[default]
    Theory,
    /// `tau^2 = tau_scale * sigma^2 / (n ln n)`.
    SimVariance,
    /// `tau = tau_scale * sigma^2 / (n ln n)`, squared.
    SimDeviation,
}

impl TauMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TauMode::Theory => "theory",
            TauMode::SimVariance => "sim-variance",
            TauMode::SimDeviation => "sim-sd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "theory" => Some(TauMode::Theory),
            "sim-variance" => Some(TauMode::SimVariance),
            "sim-sd" => Some(TauMode::SimDeviation),
            _ => None,
        }
    }
}

/// Level-free hyperparameters: prior odds `w(n) = w_scale n^(-q/2)` and a
/// prior variance set by [`TauMode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeVarHyper {
    pub q: f64,
    pub w_scale: f64,
    pub tau_scale: f64,
    pub tau_mode: TauMode,
}

impl Default for LargeVarHyper {
    fn default() -> Self {
        LargeVarHyper {
            q: 1.0,
            w_scale: 20.0,
            tau_scale: 20.0,
            tau_mode: TauMode::Theory,
        }
    }
}

/// Scale on which the universal threshold is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HardScale {
    /// `sigma sqrt(2 ln n / n)`: matches the coefficient noise `sd ~ sigma / sqrt n`.
    #[default]
    Coefficient,
    /// `sigma sqrt(2 ln n)` as written for sequence-space data.
    Literal,
}

impl HardScale {
    pub fn as_str(&self) -> &'static str {
        match self {
            HardScale::Coefficient => "coefficient",
            HardScale::Literal => "literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coefficient" => Some(HardScale::Coefficient),
            "literal" => Some(HardScale::Literal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HardHyper {
    pub scale: HardScale,
}

/// One of the three estimators compared in the simulation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleSpec {
    /// E2.
    SmallVarBayes(SmallVarHyper),
    /// E1.
    LargeVarBayes(LargeVarHyper),
    /// E3.
    HardUniversal(HardHyper),
}

impl RuleSpec {
    pub fn small() -> Self {
        RuleSpec::SmallVarBayes(SmallVarHyper::default())
    }

    pub fn large() -> Self {
        RuleSpec::LargeVarBayes(LargeVarHyper::default())
    }

    pub fn hard() -> Self {
        RuleSpec::HardUniversal(HardHyper::default())
    }

    /// `E1`, `E2` or `E3`.
    pub fn label(&self) -> &'static str {
        match self {
            RuleSpec::LargeVarBayes(_) => "E1",
            RuleSpec::SmallVarBayes(_) => "E2",
            RuleSpec::HardUniversal(_) => "E3",
        }
    }

    /// Config keyword.
    pub fn keyword(&self) -> &'static str {
        match self {
            RuleSpec::LargeVarBayes(_) => "large",
            RuleSpec::SmallVarBayes(_) => "small",
            RuleSpec::HardUniversal(_) => "hard",
        }
    }

    /// Highest level kept by the rule for a sample of size `n`.
    ///
    /// The small-variance cutoff is only defined for `alpha >= 1`; smaller
    /// `alpha` (the simulation default is 0.5) falls back to the
    /// large-variance cutoff.
    pub fn cutoff(&self, n: usize) -> Result<u32> {
        match self {
            RuleSpec::SmallVarBayes(h) if h.alpha >= 1.0 => Ok(cutoff_small(n, h.alpha)?.level),
            _ => cutoff_large(n),
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Posterior median of `beta` given `beta_hat` under the spike-and-slab prior.
pub fn posterior_median(beta_hat: f64, gamma_sq: f64, tau_sq: f64, pi: f64) -> Result<f64> {
    if !(gamma_sq > 0.0) {
        return Err(Error::param("gamma_sq", format!("{gamma_sq} must be positive")));
    }
    if !(tau_sq > 0.0) {
        return Err(Error::param("tau_sq", format!("{tau_sq} must be positive")));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::param("pi", format!("{pi} must lie in [0, 1]")));
    }
    Ok(median_unchecked(beta_hat, gamma_sq, tau_sq, pi))
}

#[inline]
fn median_unchecked(beta_hat: f64, gamma_sq: f64, tau_sq: f64, pi: f64) -> f64 {
    let b = beta_hat.abs();
    if pi == 0.0 || b == 0.0 {
        return 0.0;
    }
    let total = tau_sq + gamma_sq;
    let mean = tau_sq / total * b;
    let sd = (tau_sq * gamma_sq / total).sqrt();
    let quantile = if pi == 1.0 {
        0.0
    } else {
        let log_eta = (-pi).ln_1p() - pi.ln() + 0.5 * (total / gamma_sq).ln()
            - tau_sq * b * b / (2.0 * gamma_sq * total);
        if log_eta >= 0.0 {
            // min(eta, 1) = 1 and Phi^-1(1) is infinite.
            return 0.0;
        }
        // Phi^-1((1 + eta)/2) = -Phi^-1((1 - eta)/2), evaluated without cancellation.
        -normal_quantile(-0.5 * log_eta.exp_m1())
    };
    let zeta = mean - sd * quantile;
    if zeta > 0.0 {
        zeta.copysign(beta_hat)
    } else {
        0.0
    }
}

/// `(tau_j^2, pi_j)` for the small-variance regime. Level -1 uses `j = 0`.
pub fn hyper_small(level: i32, h: &SmallVarHyper) -> (f64, f64) {
    let j = level.max(0) as f64;
    let tau_sq = h.c1 * (-j * h.alpha).exp2();
    let pi = (h.c2 * (-j * h.beta).exp2()).min(1.0);
    (tau_sq, pi)
}

/// `(tau^2, pi)` for the large-variance regime with `pi = w / (1 + w)`.
pub fn hyper_large(n: usize, h: &LargeVarHyper, sigma: f64) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::param("n", format!("{n} < 3")));
    }
    let nf = n as f64;
    let log_n = nf.ln();
    let tau_sq = match h.tau_mode {
        TauMode::Theory => h.tau_scale / (nf * log_n).sqrt(),
        TauMode::SimVariance => h.tau_scale * sigma * sigma / (nf * log_n),
        TauMode::SimDeviation => {
            let tau = h.tau_scale * sigma * sigma / (nf * log_n);
            tau * tau
        }
    };
    let w = h.w_scale * nf.powf(-h.q / 2.0);
    let pi = if w.is_infinite() { 1.0 } else { w / (1.0 + w) };
    Ok((tau_sq, pi))
}

/// Universal threshold for a sample of size `n`.
pub fn universal_threshold(sigma: f64, n: usize, scale: HardScale) -> f64 {
    let nf = n as f64;
    let lambda = sigma * (2.0 * nf.ln()).sqrt();
    match scale {
        HardScale::Coefficient => lambda / nf.sqrt(),
        HardScale::Literal => lambda,
    }
}

/// Keeps `beta_hat` when `|beta_hat| > sigma sqrt(2 ln n / n)`.
pub fn hard_threshold(beta_hat: f64, sigma: f64, n: usize) -> f64 {
    keep_above(beta_hat, universal_threshold(sigma, n, HardScale::Coefficient))
}

#[inline]
fn keep_above(beta_hat: f64, lambda: f64) -> f64 {
    if beta_hat.abs() > lambda {
        beta_hat
    } else {
        0.0
    }
}

/// Largest `|beta_hat|` mapped to zero by [`posterior_median`].
///
/// Bisection runs until the bracket collapses to adjacent floats, so
/// `posterior_median(b) == 0` exactly when `|b| <= lambda`.
pub fn locate_threshold(tau_sq: f64, pi: f64, gamma_sq: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::param(
            "pi",
            format!("{pi}: a finite nontrivial threshold needs 0 < pi < 1"),
        ));
    }
    posterior_median(0.0, gamma_sq, tau_sq, pi)?;
    let positive = |b: f64| median_unchecked(b, gamma_sq, tau_sq, pi) > 0.0;
    let mut lo = 0.0_f64;
    let mut hi = (tau_sq + gamma_sq).sqrt();
    while !positive(hi) {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::param("tau_sq", "threshold search diverged"));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Result of [`apply_rule`].
#[derive(Debug, Clone, PartialEq)]
pub struct Shrunk {
    pub coeffs: CoefficientSet,
    /// Atoms with `gamma_sq == 0` (no sample point in their support) that a
    /// Bayesian rule could not weigh; their estimate is set to zero.
    pub degenerate: Vec<AtomIndex>,
}

/// Applies `rule` to every detail coefficient; the scaling atom passes through.
pub fn apply_rule(coeffs: &CoefficientSet, rule: &RuleSpec) -> Result<Shrunk> {
    let n = coeffs.n();
    let expected = rule.cutoff(n)?;
    if coeffs.max_level() != expected {
        return Err(Error::CutoffMismatch {
            expected,
            found: coeffs.max_level(),
        });
    }
    shrink_unchecked(coeffs, rule)
}

/// [`apply_rule`] without the cutoff check.
pub fn shrink_unchecked(coeffs: &CoefficientSet, rule: &RuleSpec) -> Result<Shrunk> {
    let n = coeffs.n();
    let sigma = coeffs.sigma();
    let large = match rule {
        RuleSpec::LargeVarBayes(h) => Some(hyper_large(n, h, sigma)?),
        _ => None,
    };
    let mut degenerate = Vec::new();
    let mut out = Vec::with_capacity(coeffs.len());
    for (atom, b, g) in coeffs.iter() {
        if atom.level < 0 {
            out.push(b);
            continue;
        }
        let value = match rule {
            RuleSpec::HardUniversal(h) => keep_above(b, universal_threshold(sigma, n, h.scale)),
            RuleSpec::SmallVarBayes(h) => {
                let (tau_sq, pi) = hyper_small(atom.level, h);
                bayes_or_flag(b, g, tau_sq, pi, atom, &mut degenerate)
            }
            RuleSpec::LargeVarBayes(_) => {
                let (tau_sq, pi) = large.expect("computed above");
                bayes_or_flag(b, g, tau_sq, pi, atom, &mut degenerate)
            }
        };
        out.push(value);
    }
    Ok(Shrunk {
        coeffs: coeffs.with_beta(out)?,
        degenerate,
    })
}

fn bayes_or_flag(
    b: f64,
    gamma_sq: f64,
    tau_sq: f64,
    pi: f64,
    atom: AtomIndex,
    degenerate: &mut Vec<AtomIndex>,
) -> f64 {
    if gamma_sq > 0.0 {
        median_unchecked(b, gamma_sq, tau_sq, pi)
    } else {
        degenerate.push(atom);
        0.0
    }
}

/// Empirical check of the shrinkage-weight conditions used for the adaptive
/// rate, with weights `w = shrunk / original` and `t_n = sqrt(ln n / n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAudit {
    pub t_n: f64,
    pub margin: f64,
    /// Largest distance of any weight from `[0, 1]`.
    pub max_weight_excursion: f64,
    /// Smallest `c` with `|b| <= m t_n  =>  w <= c t_n`.
    pub c_min: f64,
    /// Smallest `K` with `1 - w <= K (t_n / |b| + t_n)`.
    pub k_min: f64,
    /// Cutoff `J_n`.
    pub high_level: u32,
    /// Nonzero weights on levels `>= J_n`.
    pub high_level_violations: usize,
    /// Detail coefficients examined.
    pub examined: usize,
}

/// [`weight_audit_with_margin`] with `m = 1`.
pub fn weight_audit(original: &CoefficientSet, shrunk: &CoefficientSet, n: usize) -> Result<WeightAudit> {
    weight_audit_with_margin(original, shrunk, n, 1.0)
}

pub fn weight_audit_with_margin(
    original: &CoefficientSet,
    shrunk: &CoefficientSet,
    n: usize,
    margin: f64,
) -> Result<WeightAudit> {
    if original.max_level() != shrunk.max_level() {
        return Err(Error::CutoffMismatch {
            expected: original.max_level(),
            found: shrunk.max_level(),
        });
    }
    let high_level = cutoff_large(n)?;
    let nf = n as f64;
    let t_n = (nf.ln() / nf).sqrt();
    let mut report = WeightAudit {
        t_n,
        margin,
        max_weight_excursion: 0.0,
        c_min: 0.0,
        k_min: 0.0,
        high_level,
        high_level_violations: 0,
        examined: 0,
    };
    for ((atom, b, _), shrunk_b) in original.iter().zip(shrunk.beta()) {
        if atom.level < 0 {
            continue;
        }
        report.examined += 1;
        let w = if b == 0.0 { 0.0 } else { shrunk_b / b };
        let excursion = if w < 0.0 {
            -w
        } else if w > 1.0 {
            w - 1.0
        } else {
            0.0
        };
        report.max_weight_excursion = report.max_weight_excursion.max(excursion);
        if b.abs() <= margin * t_n {
            report.c_min = report.c_min.max(w / t_n);
        }
        if b != 0.0 {
            report.k_min = report.k_min.max((1.0 - w) / (t_n / b.abs() + t_n));
        }
        if atom.level >= high_level as i32 && w != 0.0 {
            report.high_level_violations += 1;
        }
    }
    Ok(report)
}
