//! Empirical warped coefficients and their stochastic noise levels.
//!
//! For a sample `(X_i, Y_i)` and design CDF `G`:
//!
//! ```text
//! beta_hat[j,k] = (1/n)      sum_i psi_jk(G(X_i)) Y_i
//! gamma_sq[j,k] = (s^2/n^2)  sum_i psi_jk(G(X_i))^2
//! ```
//!
//! Both are accumulated by direct summation over the sample, visiting only
//! the atoms whose support contains `G(X_i)`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::design::DesignModel;
use crate::error::{Error, Result};
use crate::numeric::{floor_log2, CompensatedSum};
use crate::wavelet::{atom_count, level_offset, level_width, AtomIndex, DyadicTable};

/// Observed regression sample with known noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: f64,
}

impl Sample {
    /// `sigma` may be zero for noiseless experiments; noise-level dependent
    /// rules then see `gamma_sq == 0` everywhere.
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::param("n", "sample must hold at least one point"));
        }
        if x.len() != y.len() {
            return Err(Error::param(
                "y",
                format!("{} responses for {} design points", y.len(), x.len()),
            ));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfDomain {
                what: "design point",
                value: *bad,
                domain: "[0, 1]",
            });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("{sigma} is not a valid noise level")));
        }
        Ok(Sample { x, y, sigma })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Coefficients for levels `-1..=max_level`, stored level-major: the scaling
/// atom first, then `2^j` entries per level `j >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    max_level: u32,
    n: usize,
    sigma: f64,
    beta: Vec<f64>,
    gamma_sq: Vec<f64>,
}

impl CoefficientSet {
    pub fn from_parts(
        max_level: u32,
        n: usize,
        sigma: f64,
        beta: Vec<f64>,
        gamma_sq: Vec<f64>,
    ) -> Result<Self> {
        let expected = atom_count(max_level);
        if beta.len() != expected || gamma_sq.len() != expected {
            return Err(Error::param(
                "coefficients",
                format!(
                    "levels -1..={max_level} need {expected} entries, got {} and {}",
                    beta.len(),
                    gamma_sq.len()
                ),
            ));
        }
        if gamma_sq.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::param("gamma_sq", "noise levels must be nonnegative"));
        }
        Ok(CoefficientSet {
            max_level,
            n,
            sigma,
            beta,
            gamma_sq,
        })
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma_sq(&self) -> &[f64] {
        &self.gamma_sq
    }

    pub fn index(&self, atom: AtomIndex) -> Option<usize> {
        if atom.level > self.max_level as i32 || atom.shift >= level_width(atom.level) {
            return None;
        }
        Some(level_offset(atom.level) + atom.shift)
    }

    pub fn beta_at(&self, atom: AtomIndex) -> Option<f64> {
        self.index(atom).map(|i| self.beta[i])
    }

    pub fn gamma_sq_at(&self, atom: AtomIndex) -> Option<f64> {
        self.index(atom).map(|i| self.gamma_sq[i])
    }

    /// Coefficients of one level.
    pub fn level(&self, level: i32) -> &[f64] {
        let start = level_offset(level);
        &self.beta[start..start + level_width(level)]
    }

    /// `(atom, beta_hat, gamma_sq)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (AtomIndex, f64, f64)> + '_ {
        (-1..=self.max_level as i32)
            .flat_map(|level| (0..level_width(level)).map(move |shift| AtomIndex { level, shift }))
            .zip(self.beta.iter().zip(&self.gamma_sq))
            .map(|(atom, (b, g))| (atom, *b, *g))
    }

    /// Same noise levels, new coefficient values.
    pub fn with_beta(&self, beta: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.max_level, self.n, self.sigma, beta, self.gamma_sq.clone())
    }

    /// Prefix holding levels `-1..=max_level`.
    pub fn truncate(&self, max_level: u32) -> Result<Self> {
        if max_level > self.max_level {
            return Err(Error::CutoffMismatch {
                expected: max_level,
                found: self.max_level,
            });
        }
        let len = atom_count(max_level);
        Ok(CoefficientSet {
            max_level,
            n: self.n,
            sigma: self.sigma,
            beta: self.beta[..len].to_vec(),
            gamma_sq: self.gamma_sq[..len].to_vec(),
        })
    }

    /// Flat CSV with header `j,k,beta_hat,gamma_sq`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "j,k,beta_hat,gamma_sq")?;
        for (atom, b, g) in self.iter() {
            writeln!(out, "{},{},{:e},{:e}", atom.level, atom.shift, b, g)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Evaluates `sum beta[j,k] psi_jk(G(x))` at every `x`.
    pub fn reconstruct(&self, model: &DesignModel, table: &DyadicTable, xs: &[f64]) -> Vec<f64> {
        xs.par_iter()
            .map(|&x| self.reconstruct_at(table, model.cdf_unchecked(x.clamp(0.0, 1.0))))
            .collect()
    }

    /// Evaluates the expansion at an already-warped point `u = G(x)`.
    pub fn reconstruct_at(&self, table: &DyadicTable, u: f64) -> f64 {
        let mut total = 0.0;
        for level in -1..=self.max_level as i32 {
            let row = self.level(level);
            let mut acc = 0.0;
            table.for_each_atom(level, u, |k, v| acc += row[k] * v);
            total += acc;
        }
        total
    }
}

/// Computes `beta_hat` and `gamma_sq` for levels `-1..=max_level`.
pub fn empirical_coeffs(
    sample: &Sample,
    model: &DesignModel,
    table: &DyadicTable,
    max_level: u32,
) -> Result<CoefficientSet> {
    let warped: Vec<f64> = sample.x.iter().map(|&x| model.cdf_unchecked(x)).collect();
    Ok(empirical_coeffs_warped(sample, &warped, table, max_level))
}

/// Same as [`empirical_coeffs`] with `G(X_i)` precomputed by the caller.
pub(crate) fn empirical_coeffs_warped(
    sample: &Sample,
    warped: &[f64],
    table: &DyadicTable,
    max_level: u32,
) -> CoefficientSet {
    let n = sample.len();
    let levels: Vec<(Vec<f64>, Vec<f64>)> = (-1..=max_level as i32)
        .into_par_iter()
        .map(|level| {
            let width = level_width(level);
            let mut weighted = vec![CompensatedSum::new(); width];
            let mut energy = vec![CompensatedSum::new(); width];
            // Per-point scratch so that periodized wrap-arounds are summed
            // into one atom value before squaring.
            let mut touched: Vec<(usize, f64)> = Vec::with_capacity(32);
            let wraps = (width as f64) <= table.support_interval().1 + 1.0;
            for (&u, &y) in warped.iter().zip(&sample.y) {
                if !wraps {
                    table.for_each_atom(level, u, |k, v| {
                        weighted[k].add(v * y);
                        energy[k].add(v * v);
                    });
                    continue;
                }
                touched.clear();
                table.for_each_atom(level, u, |k, v| {
                    match touched.iter_mut().find(|(kk, _)| *kk == k) {
                        Some(entry) => entry.1 += v,
                        None => touched.push((k, v)),
                    }
                });
                for &(k, v) in &touched {
                    weighted[k].add(v * y);
                    energy[k].add(v * v);
                }
            }
            let scale = sample.sigma * sample.sigma / (n as f64 * n as f64);
            (
                weighted.iter().map(|s| s.value() / n as f64).collect(),
                energy.iter().map(|s| s.value() * scale).collect(),
            )
        })
        .collect();

    let mut beta = Vec::with_capacity(atom_count(max_level));
    let mut gamma_sq = Vec::with_capacity(atom_count(max_level));
    for (b, g) in levels {
        beta.extend(b);
        gamma_sq.extend(g);
    }
    CoefficientSet {
        max_level,
        n,
        sigma: sample.sigma,
        beta,
        gamma_sq,
    }
}

/// Level cutoff of the small-variance regime, `2^J = (3 / (2n))^(-1/alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmallCutoff {
    pub level: u32,
    /// Set when `alpha == 1`, the boundary excluded by the theory (`alpha > 1`).
    pub at_boundary: bool,
}

/// `floor(log2((2n/3)^(1/alpha)))`, at least 0.
pub fn cutoff_small(n: usize, alpha: f64) -> Result<SmallCutoff> {
    if n < 2 {
        return Err(Error::param("n", format!("{n} < 2")));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::param(
            "alpha",
            format!("{alpha} < 1: the small-variance cutoff needs alpha >= 1"),
        ));
    }
    let exponent = (2.0 * n as f64 / 3.0).log2() / alpha;
    let level = floor_log2(exponent.exp2()).max(0) as u32;
    let at_boundary = alpha == 1.0;
    if at_boundary {
        log::warn!("small-variance cutoff evaluated at the boundary alpha = 1");
    }
    Ok(SmallCutoff { level, at_boundary })
}

/// `floor(log2(n / ln n))`.
pub fn cutoff_large(n: usize) -> Result<u32> {
    if n < 3 {
        return Err(Error::param("n", format!("{n} < 3")));
    }
    let n = n as f64;
    Ok(floor_log2(n / n.ln()).max(0) as u32)
}

/// Fraction of atoms with `|gamma_sq / sigma^2 - 1/n| <= delta`.
pub fn omega_event_fraction(coeffs: &CoefficientSet, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", format!("{delta} must be positive")));
    }
    let sigma_sq = coeffs.sigma * coeffs.sigma;
    if !(sigma_sq > 0.0) {
        return Err(Error::param("sigma", "event is defined for a positive noise level"));
    }
    let target = 1.0 / coeffs.n as f64;
    let hits = coeffs
        .gamma_sq
        .iter()
        .filter(|g| (*g / sigma_sq - target).abs() <= delta)
        .count();
    Ok(hits as f64 / coeffs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::WaveletFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn haar() -> DyadicTable {
        DyadicTable::build(&WaveletFamily::haar(), 10).unwrap()
    }

    #[test]
    fn cutoffs() {
        assert_eq!(cutoff_small(1024, 1.0).unwrap().level, 9);
        assert!(cutoff_small(1024, 1.0).unwrap().at_boundary);
        assert_eq!(cutoff_small(1024, 2.0).unwrap().level, 4);
        assert!(!cutoff_small(1024, 2.0).unwrap().at_boundary);
        assert_eq!(cutoff_small(2, 1.0).unwrap().level, 0);
        assert!(cutoff_small(1024, 0.5).is_err());
        assert!(cutoff_small(1, 2.0).is_err());

        assert_eq!(cutoff_large(1024).unwrap(), 7);
        assert_eq!(cutoff_large(256).unwrap(), 5);
        assert_eq!(cutoff_large(3).unwrap(), 1);
        assert!(cutoff_large(2).is_err());
    }

    #[test]
    fn zero_responses_give_zero_coefficients() {
        let model = DesignModel::uniform();
        let x = model.sample(3, 200).unwrap();
        let sample = Sample::new(x, vec![0.0; 200], 0.5).unwrap();
        let set = empirical_coeffs(&sample, &model, &haar(), 4).unwrap();
        assert_eq!(set.len(), 32);
        assert!(set.beta().iter().all(|&b| b == 0.0));
        assert!(set.gamma_sq().iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn constant_function_has_only_scaling_coefficient() {
        let model = DesignModel::uniform();
        let n = 4096;
        let x = model.sample(11, n).unwrap();
        let sample = Sample::new(x, vec![1.0; n], 1.0).unwrap();
        let set = empirical_coeffs(&sample, &model, &haar(), 3).unwrap();
        assert!((set.beta_at(AtomIndex::SCALING).unwrap() - 1.0).abs() < 1e-12);
        for (atom, b, g) in set.iter().filter(|(a, _, _)| a.level >= 0) {
            assert!(b.abs() <= 3.0 * g.sqrt(), "{atom:?}: {b} vs {g}");
        }
    }

    #[test]
    fn scaling_noise_level_is_exact() {
        let model = DesignModel::sine(0.5).unwrap();
        let n = 300;
        let x = model.sample(5, n).unwrap();
        let sample = Sample::new(x, vec![0.3; n], 2.0).unwrap();
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 10).unwrap();
        let set = empirical_coeffs(&sample, &model, &table, 2).unwrap();
        let g = set.gamma_sq_at(AtomIndex::SCALING).unwrap();
        assert!((g - 4.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn sigma_scales_noise_level_only() {
        let model = DesignModel::hole2(0.15, 0.1).unwrap();
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 10).unwrap();
        let x = model.sample(9, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = (0..128).map(|_| rng.gen::<f64>()).collect();
        let a = empirical_coeffs(&Sample::new(x.clone(), y.clone(), 0.7).unwrap(), &model, &table, 4).unwrap();
        let b = empirical_coeffs(&Sample::new(x, y, 1.4).unwrap(), &model, &table, 4).unwrap();
        assert_eq!(a.beta(), b.beta());
        for (ga, gb) in a.gamma_sq().iter().zip(b.gamma_sq()) {
            assert!((gb - 4.0 * ga).abs() <= 1e-14 * gb.abs().max(1e-300));
        }
    }

    #[test]
    fn permutation_invariance() {
        let model = DesignModel::sine(0.5).unwrap();
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 10).unwrap();
        let x = model.sample(2, 64).unwrap();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v).sin()).collect();
        let forward = empirical_coeffs(&Sample::new(x.clone(), y.clone(), 1.0).unwrap(), &model, &table, 3).unwrap();
        let mut xr = x;
        let mut yr = y;
        xr.reverse();
        yr.reverse();
        let backward = empirical_coeffs(&Sample::new(xr, yr, 1.0).unwrap(), &model, &table, 3).unwrap();
        for (a, b) in forward.beta().iter().zip(backward.beta()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_match_pointwise_evaluation() {
        let model = DesignModel::sine(0.5).unwrap();
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 10).unwrap();
        let x = model.sample(4, 50).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let set = empirical_coeffs(&Sample::new(x.clone(), y.clone(), 1.0).unwrap(), &model, &table, 2).unwrap();
        for (atom, b, g) in set.iter() {
            let vals: Vec<f64> = x
                .iter()
                .map(|&xi| table.eval_periodized(atom, model.cdf(xi).unwrap()).unwrap())
                .collect();
            let direct: f64 = vals.iter().zip(&y).map(|(v, y)| v * y).sum::<f64>() / 50.0;
            let energy: f64 = vals.iter().map(|v| v * v).sum::<f64>() / 2500.0;
            assert!((b - direct).abs() < 1e-12, "{atom:?}");
            assert!((g - energy).abs() < 1e-12, "{atom:?}");
        }
    }

    #[test]
    fn omega_fraction() {
        let model = DesignModel::uniform();
        let table = haar();
        let n = 4096;
        let x = model.sample(8, n).unwrap();
        let set = empirical_coeffs(&Sample::new(x, vec![0.0; n], 1.0).unwrap(), &model, &table, 3).unwrap();
        assert_eq!(omega_event_fraction(&set, 1.0).unwrap(), 1.0);
        assert!(omega_event_fraction(&set, 0.5 / n as f64).unwrap() >= 0.99);
        assert!(omega_event_fraction(&set, 0.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let set = CoefficientSet::from_parts(0, 10, 1.0, vec![0.5, -0.25], vec![0.1, 0.2]).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "j,k,beta_hat,gamma_sq");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("-1,0,5e-1,"));
        assert!(CoefficientSet::from_parts(1, 10, 1.0, vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(CoefficientSet::from_parts(0, 10, 1.0, vec![0.0; 2], vec![-1.0, 0.0]).is_err());
    }

    #[test]
    fn truncation_is_a_prefix() {
        let set = CoefficientSet::from_parts(2, 10, 1.0, (0..8).map(f64::from).collect(), vec![0.0; 8]).unwrap();
        let t = set.truncate(1).unwrap();
        assert_eq!(t.beta(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.level(1), &[2.0, 3.0]);
        assert!(set.truncate(3).is_err());
    }
}
