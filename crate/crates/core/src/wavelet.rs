//! Compactly supported orthonormal wavelets sampled on a dyadic grid.
//!
//! A [`DyadicTable`] holds the father and mother wavelet at every point
//! `i / 2^L` of their common support `[0, N - 1]`, where `N` is the number of
//! filter taps. Values at dyadic rationals are exact solutions of the two-scale
//! relation (integer values from the refinement eigenproblem, then successive
//! halving), so the table is the fixed point of the cascade iteration.
//! Off-grid points are linearly interpolated, except for piecewise-constant
//! families (Haar), which hold the left sample and are therefore exact.
//!
//! Atoms on `[0, 1]` are periodized: `psi_jk(x) = sum_l 2^{j/2} psi(2^j (x + l) - k)`.

#![allow(clippy::excessive_precision)]

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default table resolution: samples at spacing `2^-12`.
pub const DEFAULT_RESOLUTION: u32 = 12;
/// Coarsest resolution accepted by [`DyadicTable::build`].
pub const MIN_RESOLUTION: u32 = 6;
/// Finest resolution accepted by [`DyadicTable::build`].
pub const MAX_RESOLUTION: u32 = 20;

const FILTER_TOLERANCE: f64 = 1e-12;

/// Symmlet with 8 vanishing moments (16 taps), reconstruction low-pass filter.
pub const SYMMLET8_LOWPASS: [f64; 16] = [
    0.0018899503327594609,
    -0.0003029205147213668,
    -0.01495225833704823,
    0.003808752013890615,
    0.049137179673607506,
    -0.027219029917056003,
    -0.05194583810770904,
    0.3644418948353314,
    0.7771857517005235,
    0.4813596512583722,
    -0.061273359067658524,
    -0.1432942383508097,
    0.007607487324917605,
    0.03169508781149298,
    -0.0005421323317911481,
    -0.0033824159510061256,
];

/// A wavelet family described by its orthonormal low-pass filter.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFamily {
    name: String,
    lowpass: Vec<f64>,
    vanishing_moments: u32,
    piecewise_constant: bool,
}

impl WaveletFamily {
    pub fn haar() -> Self {
        let tap = std::f64::consts::FRAC_1_SQRT_2;
        WaveletFamily {
            name: "haar".into(),
            lowpass: vec![tap, tap],
            vanishing_moments: 1,
            piecewise_constant: true,
        }
    }

    pub fn symmlet8() -> Self {
        WaveletFamily {
            name: "symmlet8".into(),
            lowpass: SYMMLET8_LOWPASS.to_vec(),
            vanishing_moments: 8,
            piecewise_constant: false,
        }
    }

    /// Looks up a built-in family by name (`haar`, `symmlet8` / `sym8`).
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Some(Self::haar()),
            "symmlet8" | "sym8" => Some(Self::symmlet8()),
            _ => None,
        }
    }

    /// An arbitrary filter. Nothing is checked until [`WaveletFamily::validate`]
    /// (called by [`DyadicTable::build`]).
    pub fn custom(name: impl Into<String>, lowpass: Vec<f64>, vanishing_moments: u32) -> Self {
        WaveletFamily {
            name: name.into(),
            lowpass,
            vanishing_moments,
            piecewise_constant: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn support_len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn vanishing_moments(&self) -> u32 {
        self.vanishing_moments
    }

    /// Quadrature-mirror high-pass filter `g_k = (-1)^k h_{N-1-k}`.
    pub fn highpass(&self) -> Vec<f64> {
        let n = self.lowpass.len();
        (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.lowpass[n - 1 - k]
            })
            .collect()
    }

    /// Checks `sum h = sqrt 2` and `sum_k h_k h_{k+2m} = delta_m` to 1e-12.
    pub fn validate(&self) -> Result<()> {
        let reject = |reason: String| Error::InvalidFilter {
            name: self.name.clone(),
            reason,
        };
        let h = &self.lowpass;
        if h.len() < 2 || !h.len().is_multiple_of(2) {
            return Err(reject(format!("need an even number of taps, got {}", h.len())));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(reject("non-finite tap".into()));
        }
        let total: f64 = h.iter().sum();
        if (total - std::f64::consts::SQRT_2).abs() > FILTER_TOLERANCE {
            return Err(reject(format!("taps sum to {total}, expected sqrt(2)")));
        }
        for m in 0..h.len() / 2 {
            let dot: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            if (dot - target).abs() > FILTER_TOLERANCE {
                return Err(reject(format!(
                    "shift-{m} autocorrelation is {dot:e}, expected {target}"
                )));
            }
        }
        Ok(())
    }
}

/// Index of a periodized atom. `level == -1` is the scaling atom `phi_{0,0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomIndex {
    pub level: i32,
    pub shift: usize,
}

impl AtomIndex {
    pub const SCALING: AtomIndex = AtomIndex { level: -1, shift: 0 };

    pub fn new(level: i32, shift: usize) -> Result<Self> {
        if level < -1 {
            return Err(Error::param("level", format!("{level} is below -1")));
        }
        if shift >= level_width(level) {
            return Err(Error::param(
                "shift",
                format!("{shift} out of range for level {level}"),
            ));
        }
        Ok(AtomIndex { level, shift })
    }
}

/// Number of atoms on a level: `2^max(j, 0)`.
#[inline]
pub fn level_width(level: i32) -> usize {
    1usize << level.max(0)
}

/// Sampled father and mother wavelets of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicTable {
    family: WaveletFamily,
    resolution: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
    support: (f64, f64),
    cascade_residual: f64,
}

impl DyadicTable {
    /// Builds the table at spacing `2^-resolution`.
    pub fn build(family: &WaveletFamily, resolution: u32) -> Result<Self> {
        family.validate()?;
        if resolution < MIN_RESOLUTION {
            return Err(Error::ResolutionTooLow {
                level: resolution,
                min: MIN_RESOLUTION,
            });
        }
        if resolution > MAX_RESOLUTION {
            return Err(Error::param(
                "resolution",
                format!("{resolution} exceeds the maximum of {MAX_RESOLUTION}"),
            ));
        }

        let h = family.lowpass();
        let width = h.len() - 1;
        let per_unit = 1usize << resolution;
        let len = width * per_unit + 1;

        let mut phi = vec![0.0; len];
        if family.piecewise_constant {
            // Box function; the recursion below would reproduce it up to the
            // rounding of sqrt(2) / sqrt(2).
            phi[..per_unit].fill(1.0);
        } else {
            for (n, v) in integer_samples(family)?.iter().enumerate() {
                phi[n * per_unit] = *v;
            }
            // Halve the spacing one octave at a time: the new points are odd
            // multiples of 2^-m, and 2x - k lands on the previous octave's grid.
            for m in 1..=resolution {
                let stride = 1usize << (resolution - m);
                let mut i = stride;
                while i < len {
                    phi[i] = two_scale(h, &phi, i, per_unit);
                    i += 2 * stride;
                }
            }
        }

        let cascade_residual = (0..len)
            .map(|i| (two_scale(h, &phi, i, per_unit) - phi[i]).abs())
            .fold(0.0, f64::max);
        if !(cascade_residual < (-(resolution as f64)).exp2()) {
            return Err(Error::CascadeNotConverged {
                residual: cascade_residual,
            });
        }

        let psi = if family.piecewise_constant {
            (0..len)
                .map(|i| match i {
                    i if i < per_unit / 2 => 1.0,
                    i if i < per_unit => -1.0,
                    _ => 0.0,
                })
                .collect()
        } else {
            let g = family.highpass();
            (0..len).map(|i| two_scale(&g, &phi, i, per_unit)).collect()
        };

        Ok(DyadicTable {
            family: family.clone(),
            resolution,
            phi,
            psi,
            support: (0.0, width as f64),
            cascade_residual,
        })
    }

    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn phi_samples(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi_samples(&self) -> &[f64] {
        &self.psi
    }

    pub fn support_interval(&self) -> (f64, f64) {
        self.support
    }

    /// Sup-norm change produced by one more cascade step on the finished table.
    pub fn cascade_residual(&self) -> f64 {
        self.cascade_residual
    }

    fn width(&self) -> usize {
        self.family.support_len() - 1
    }

    #[inline]
    fn sample(&self, samples: &[f64], t: f64) -> f64 {
        let width = self.width() as f64;
        if !(t >= 0.0 && t <= width) {
            return 0.0;
        }
        let pos = t * (1u64 << self.resolution) as f64;
        let i = pos.floor() as usize;
        if self.family.piecewise_constant {
            return samples.get(i).copied().unwrap_or(0.0);
        }
        if i + 1 >= samples.len() {
            return samples[samples.len() - 1];
        }
        let frac = pos - i as f64;
        samples[i] + frac * (samples[i + 1] - samples[i])
    }

    /// Unperiodized father wavelet at `t`.
    pub fn phi(&self, t: f64) -> f64 {
        self.sample(&self.phi, t)
    }

    /// Unperiodized mother wavelet at `t`.
    pub fn psi(&self, t: f64) -> f64 {
        self.sample(&self.psi, t)
    }

    /// Periodized atom value at `x` in `[0, 1]`.
    pub fn eval_periodized(&self, atom: AtomIndex, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain {
                what: "x",
                value: x,
                domain: "[0, 1]",
            });
        }
        if atom.level < -1 || atom.shift >= level_width(atom.level) {
            return Err(Error::param(
                "atom",
                format!("({}, {}) is not a valid atom", atom.level, atom.shift),
            ));
        }
        let mut value = 0.0;
        self.for_each_atom(atom.level, x, |k, v| {
            if k == atom.shift {
                value += v;
            }
        });
        Ok(value)
    }

    /// Calls `visit(k, value)` for every translate on `level` whose periodized
    /// atom may be nonzero at `u`. A translate can be reported more than once
    /// on coarse levels (one call per overlapping period); callers accumulate.
    #[inline]
    pub fn for_each_atom(&self, level: i32, u: f64, mut visit: impl FnMut(usize, f64)) {
        let (samples, scale_level) = if level < 0 {
            (&self.phi, 0)
        } else {
            (&self.psi, level)
        };
        let scale = (scale_level as f64).exp2();
        let amplitude = (scale_level as f64 * 0.5).exp2();
        let modulus = 1i64 << scale_level;
        let width = self.width() as i64;
        let m = scale * u;
        let top = m.floor() as i64;
        for raw in (top - width)..=top {
            let t = m - raw as f64;
            let v = self.sample(samples, t);
            if v != 0.0 {
                visit(raw.rem_euclid(modulus) as usize, amplitude * v);
            }
        }
    }

    /// Largest `|<psi_jk, psi_j'k'> - delta|` over all atoms with level at most
    /// `max_level`, using the composite midpoint rule on `quad_points` nodes.
    pub fn gram_deviation(&self, max_level: u32, quad_points: usize) -> Result<f64> {
        let required = 1usize << (max_level + 6);
        if quad_points < required {
            return Err(Error::param(
                "quad_points",
                format!("{quad_points} < 2^(J+6) = {required}"),
            ));
        }
        let atoms = atom_count(max_level);
        let mut values = vec![0.0; atoms * quad_points];
        for q in 0..quad_points {
            let x = (q as f64 + 0.5) / quad_points as f64;
            for level in -1..=max_level as i32 {
                let offset = level_offset(level);
                self.for_each_atom(level, x, |k, v| {
                    values[(offset + k) * quad_points + q] += v;
                });
            }
        }
        let weight = 1.0 / quad_points as f64;
        let mut worst: f64 = 0.0;
        for a in 0..atoms {
            let row_a = &values[a * quad_points..(a + 1) * quad_points];
            for b in a..atoms {
                let row_b = &values[b * quad_points..(b + 1) * quad_points];
                let dot: f64 = row_a.iter().zip(row_b).map(|(x, y)| x * y).sum::<f64>() * weight;
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Total atom count for levels `-1..=max_level`: `2^(max_level + 1)`.
#[inline]
pub fn atom_count(max_level: u32) -> usize {
    1usize << (max_level + 1)
}

/// Flat offset of the first atom of `level` in level-major storage.
#[inline]
pub fn level_offset(level: i32) -> usize {
    if level < 0 {
        0
    } else {
        1usize << level
    }
}

/// Applies `sum_k c_k phi(2x - k)` scaled by sqrt 2 at grid index `i`.
#[inline]
fn two_scale(filter: &[f64], phi: &[f64], i: usize, per_unit: usize) -> f64 {
    let mut acc = 0.0;
    for (k, c) in filter.iter().enumerate() {
        let idx = 2 * i as i64 - (k * per_unit) as i64;
        if idx >= 0 && (idx as usize) < phi.len() {
            acc += c * phi[idx as usize];
        }
    }
    std::f64::consts::SQRT_2 * acc
}

/// Father wavelet at the integers `0..=N-1`, normalized to sum to one.
fn integer_samples(family: &WaveletFamily) -> Result<Vec<f64>> {
    let h = family.lowpass();
    let width = h.len() - 1;
    if width == 1 {
        // Box function, right-continuous.
        return Ok(vec![1.0, 0.0]);
    }
    // Interior unknowns phi(1..width-1); phi vanishes at both support ends.
    let dim = width - 1;
    let mut system = DMatrix::<f64>::zeros(dim, dim);
    for row in 0..dim {
        let i = row + 1;
        for col in 0..dim {
            let n = col + 1;
            let k = 2 * i as i64 - n as i64;
            if k >= 0 && (k as usize) < h.len() {
                system[(row, col)] = std::f64::consts::SQRT_2 * h[k as usize];
            }
        }
        system[(row, row)] -= 1.0;
    }
    for col in 0..dim {
        system[(dim - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(dim);
    rhs[dim - 1] = 1.0;
    let lu = system.clone().lu();
    let singular = || Error::InvalidFilter {
        name: family.name().to_string(),
        reason: "refinement eigenproblem is singular".into(),
    };
    let mut solution = lu.solve(&rhs).ok_or_else(singular)?;
    // The system is poorly conditioned for long filters; two rounds of
    // iterative refinement bring the residual down to rounding level.
    for _ in 0..2 {
        let residual = &rhs - &system * &solution;
        solution += lu.solve(&residual).ok_or_else(singular)?;
    }
    let mut values = Vec::with_capacity(width + 1);
    values.push(0.0);
    values.extend(solution.iter().copied());
    values.push(0.0);
    Ok(values)
}

/// Composite trapezoid rule over the table's samples.
pub fn trapezoid(samples: &[f64], spacing: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let interior: f64 = samples[1..samples.len() - 1].iter().sum();
    spacing * (interior + 0.5 * (samples[0] + samples[samples.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_filters_are_orthonormal() {
        WaveletFamily::haar().validate().unwrap();
        WaveletFamily::symmlet8().validate().unwrap();
        let haar = WaveletFamily::haar();
        let tap = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(haar.lowpass(), &[tap, tap]);
    }

    #[test]
    fn rejects_bad_filters() {
        let scaled = WaveletFamily::custom("bad", vec![0.8, 0.8], 1);
        assert!(matches!(
            DyadicTable::build(&scaled, 10),
            Err(Error::InvalidFilter { .. })
        ));
        // Sums to sqrt 2 but is not orthogonal to its even shifts.
        let skew = WaveletFamily::custom(
            "skew",
            vec![0.5, 0.5, 0.2142135623730951, 0.2],
            2,
        );
        assert!(skew.validate().is_err());
        assert!(matches!(
            DyadicTable::build(&WaveletFamily::haar(), 5),
            Err(Error::ResolutionTooLow { .. })
        ));
    }

    #[test]
    fn haar_table_is_box_function() {
        let table = DyadicTable::build(&WaveletFamily::haar(), 10).unwrap();
        let phi = table.phi_samples();
        assert_eq!(phi.len(), 1024 + 1);
        assert!(phi[..1024].iter().all(|&v| v == 1.0));
        assert_eq!(phi[1024], 0.0);
        assert!(table.cascade_residual() < 1e-15);
    }

    #[test]
    fn haar_mother_values() {
        let table = DyadicTable::build(&WaveletFamily::haar(), 10).unwrap();
        let atom = AtomIndex::new(0, 0).unwrap();
        assert_eq!(table.eval_periodized(atom, 0.25).unwrap(), 1.0);
        assert_eq!(table.eval_periodized(atom, 0.75).unwrap(), -1.0);
        let fine = AtomIndex::new(2, 1).unwrap();
        assert_eq!(table.eval_periodized(fine, 0.3).unwrap(), 2.0);
        assert_eq!(table.eval_periodized(fine, 0.4).unwrap(), -2.0);
        assert_eq!(table.eval_periodized(fine, 0.6).unwrap(), 0.0);
    }

    #[test]
    fn symmlet_table_integrates_correctly() {
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 12).unwrap();
        let spacing = (-12f64).exp2();
        assert_eq!(table.phi_samples().len(), 15 * 4096 + 1);
        let phi_mass = trapezoid(table.phi_samples(), spacing);
        let psi_mass = trapezoid(table.psi_samples(), spacing);
        assert!((phi_mass - 1.0).abs() < 1e-3, "phi mass {phi_mass}");
        assert!(psi_mass.abs() < (-12f64 + 3.0).exp2(), "psi mass {psi_mass}");
        let phi_sq = trapezoid(
            &table.phi_samples().iter().map(|v| v * v).collect::<Vec<_>>(),
            spacing,
        );
        assert!((phi_sq - 1.0).abs() < 1e-4);
        assert!(table.cascade_residual() < 1e-10);
    }

    #[test]
    fn periodized_value_matches_shift_sum() {
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 12).unwrap();
        let atom = AtomIndex::new(3, 5).unwrap();
        let x: f64 = 0.4;
        let got = table.eval_periodized(atom, x).unwrap();
        // Brute force: every shift l with |l| <= support width.
        let width = 15i32;
        let mut expected = 0.0;
        for l in -width..=width {
            expected += 8f64.sqrt() * table.psi(8.0 * (x + l as f64) - 5.0);
        }
        assert!((got - expected).abs() < 1e-9);
        assert!(got != 0.0);
    }

    #[test]
    fn scaling_atom_is_partition_of_unity() {
        let table = DyadicTable::build(&WaveletFamily::symmlet8(), 12).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let v = table.eval_periodized(AtomIndex::SCALING, x).unwrap();
            assert!((v - 1.0).abs() < 1e-10, "x={x} v={v}");
        }
    }

    #[test]
    fn eval_rejects_outside_unit_interval() {
        let table = DyadicTable::build(&WaveletFamily::haar(), 8).unwrap();
        assert!(table.eval_periodized(AtomIndex::SCALING, 1.5).is_err());
        assert!(table.eval_periodized(AtomIndex::SCALING, -0.1).is_err());
        assert!(AtomIndex::new(2, 4).is_err());
    }

    #[test]
    fn gram_deviation_haar_and_symmlet() {
        let haar = DyadicTable::build(&WaveletFamily::haar(), 10).unwrap();
        assert!(haar.gram_deviation(2, 4096).unwrap() <= 1e-10);
        let sym = DyadicTable::build(&WaveletFamily::symmlet8(), 12).unwrap();
        assert!(sym.gram_deviation(0, 1 << 14).unwrap() <= 1e-3);
        assert!(sym.gram_deviation(3, 1 << 14).unwrap() <= 5e-3);
        assert!(sym.gram_deviation(3, 100).is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let a = DyadicTable::build(&WaveletFamily::symmlet8(), 10).unwrap();
        let b = DyadicTable::build(&WaveletFamily::symmlet8(), 10).unwrap();
        assert!(a
            .psi_samples()
            .iter()
            .zip(b.psi_samples())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
