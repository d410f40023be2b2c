//! Besov and weak-Besov functionals on wavelet coefficient arrays.

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::wavelet::level_width;

/// Coefficients stored per level, `j = -1` first.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientArray {
    levels: Vec<Vec<f64>>,
}

impl CoefficientArray {
    /// `levels[i]` holds level `i - 1` and must have `2^max(i - 1, 0)` entries.
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in levels.iter().enumerate() {
            let level = i as i32 - 1;
            if row.len() != level_width(level) {
                return Err(Error::param(
                    "levels",
                    format!("level {level} has {} entries, expected {}", row.len(), level_width(level)),
                ));
            }
        }
        Ok(CoefficientArray { levels })
    }

    pub fn zeros(max_level: u32) -> Self {
        let levels = (-1..=max_level as i32).map(|j| vec![0.0; level_width(j)]).collect();
        CoefficientArray { levels }
    }

    pub fn from_set(set: &CoefficientSet) -> Self {
        let levels = (-1..=set.max_level() as i32).map(|j| set.level(j).to_vec()).collect();
        CoefficientArray { levels }
    }

    pub fn empty() -> Self {
        CoefficientArray { levels: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Finest level, `None` when empty.
    pub fn max_level(&self) -> Option<i32> {
        (!self.levels.is_empty()).then(|| self.levels.len() as i32 - 2)
    }

    pub fn level(&self, level: i32) -> &[f64] {
        &self.levels[(level + 1) as usize]
    }

    pub fn level_mut(&mut self, level: i32) -> &mut [f64] {
        &mut self.levels[(level + 1) as usize]
    }

    /// `(level, row)` pairs from coarse to fine.
    pub fn rows(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.levels.iter().enumerate().map(|(i, r)| (i as i32 - 1, r.as_slice()))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().flatten().copied()
    }

    pub fn scaled(&self, t: f64) -> Self {
        CoefficientArray {
            levels: self.levels.iter().map(|r| r.iter().map(|v| v * t).collect()).collect(),
        }
    }
}

/// Smoothness `s`, integrability `p` and summability `q` (possibly infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || p.is_nan() {
            return Err(Error::param("p", format!("{p} < 1")));
        }
        if !(q >= 1.0) || q.is_nan() {
            return Err(Error::param("q", format!("{q} < 1")));
        }
        let floor = (1.0 / p - 0.5).max(0.0);
        if !(s > floor) || !s.is_finite() {
            return Err(Error::param("s", format!("{s} must exceed {floor}")));
        }
        Ok(BesovIndex { s, p, q })
    }
}

fn lp_norm(row: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return row.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    row.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Sequence-space Besov norm with level weights `2^(j(s + 1/2 - 1/p))`,
/// including `j = -1`.
pub fn besov_norm(arr: &CoefficientArray, idx: &BesovIndex) -> f64 {
    let exponent = idx.s + 0.5 - 1.0 / idx.p;
    let terms = arr
        .rows()
        .map(|(j, row)| (j as f64 * exponent).exp2() * lp_norm(row, idx.p));
    if idx.q.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(idx.q)).sum::<f64>().powf(1.0 / idx.q)
    }
}

/// `sup_J 2^(2Js) sum_{j >= J} sum_k beta_jk^2`.
pub fn besov_s2inf_seminorm(arr: &CoefficientArray, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::param("s", format!("{s} must be positive")));
    }
    let mut tail = 0.0;
    let mut best: f64 = 0.0;
    for (j, row) in arr.rows().collect::<Vec<_>>().into_iter().rev() {
        tail += row.iter().map(|v| v * v).sum::<f64>();
        best = best.max((2.0 * j as f64 * s).exp2() * tail);
    }
    Ok(best)
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 2.0 {
        Ok(())
    } else {
        Err(Error::param("r", format!("{r} must lie in (0, 2)")))
    }
}

/// Sorted nonzero magnitudes.
fn magnitudes(arr: &CoefficientArray) -> Vec<f64> {
    let mut m: Vec<f64> = arr.values().map(f64::abs).filter(|&v| v > 0.0).collect();
    m.sort_by(|a, b| a.total_cmp(b));
    m
}

/// `[sup_lambda lambda^(r-2) sum beta^2 1{|beta| <= lambda}]^(1/2)`.
///
/// Between consecutive magnitudes the sum is constant and `lambda^(r-2)`
/// decreases, so only the magnitudes themselves are candidates.
pub fn weak_besov_norm(arr: &CoefficientArray, r: f64) -> Result<f64> {
    check_r(r)?;
    let mags = magnitudes(arr);
    let mut acc = 0.0;
    let mut best: f64 = 0.0;
    for (i, &a) in mags.iter().enumerate() {
        acc += a * a;
        if mags.get(i + 1) == Some(&a) {
            continue;
        }
        best = best.max(a.powf(r - 2.0) * acc);
    }
    Ok(best.sqrt())
}

/// Outcome of [`tail_count_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCountOutcome {
    pub holds: bool,
    /// `sup_lambda lambda^r #{|beta| > lambda}`.
    pub lhs: f64,
    /// `2^(2-r) W^2 / (1 - 2^(-r))`.
    pub rhs: f64,
    /// `lhs / rhs`, zero when both vanish.
    pub ratio: f64,
}

/// Checks the exceedance-count bound implied by weak-Besov membership.
pub fn tail_count_check(arr: &CoefficientArray, r: f64) -> Result<TailCountOutcome> {
    let weak = weak_besov_norm(arr, r)?;
    let mags = magnitudes(arr);
    // The count is right-continuous decreasing; its supremum against
    // lambda^r is approached as lambda rises to each magnitude.
    let mut lhs: f64 = 0.0;
    for (i, &a) in mags.iter().enumerate() {
        if i > 0 && mags[i - 1] == a {
            continue;
        }
        lhs = lhs.max(a.powf(r) * (mags.len() - i) as f64);
    }
    let rhs = (2.0 - r).exp2() * weak * weak / (1.0 - (-r).exp2());
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(TailCountOutcome {
        holds: lhs <= rhs * (1.0 + 1e-12),
        lhs,
        rhs,
        ratio,
    })
}
