//! Known design densities on `[0, 1]` and the warping map `G` they induce.
//!
//! Every non-uniform model stores `G` as a monotone cubic Hermite table at
//! spacing `2^-12`; `G^-1` is obtained by solving on the same interpolant, so
//! `inverse_cdf(cdf_eval(x)) == x` up to rounding.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// log2 of the number of CDF table cells.
pub const CDF_TABLE_LEVEL: u32 = 12;

pub const DEFAULT_SINE_AMPLITUDE: f64 = 0.5;
pub const DEFAULT_HOLE_WIDTH: f64 = 0.15;
pub const DEFAULT_HOLE_FLOOR: f64 = 0.1;

/// Parameterized description of a design, as written in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    Uniform,
    /// `g(x) = 1 + a sin(2 pi x)`.
    Sine { amplitude: f64 },
    /// Gaussian-shaped hole at 1/2: `g(x) = c (m0 + 1 - exp(-((x - 1/2) / w)^2))`
    /// with `c`, `m0` fixed by unit mass and `min g = floor`.
    Hole2 { width: f64, floor: f64 },
    /// Two-column `(x, g(x))` text table, linearly interpolated and renormalized.
    Custom { path: String },
}

impl DesignSpec {
    pub fn sine() -> Self {
        DesignSpec::Sine {
            amplitude: DEFAULT_SINE_AMPLITUDE,
        }
    }

    pub fn hole2() -> Self {
        DesignSpec::Hole2 {
            width: DEFAULT_HOLE_WIDTH,
            floor: DEFAULT_HOLE_FLOOR,
        }
    }

    /// Short name used in reports.
    pub fn label(&self) -> &str {
        match self {
            DesignSpec::Uniform => "uniform",
            DesignSpec::Sine { .. } => "sine",
            DesignSpec::Hole2 { .. } => "hole2",
            DesignSpec::Custom { .. } => "custom",
        }
    }

    pub fn build(&self) -> Result<DesignModel> {
        match self {
            DesignSpec::Uniform => Ok(DesignModel::uniform()),
            DesignSpec::Sine { amplitude } => DesignModel::sine(*amplitude),
            DesignSpec::Hole2 { width, floor } => DesignModel::hole2(*width, *floor),
            DesignSpec::Custom { path } => DesignModel::from_table_file(path),
        }
    }
}

impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
enum Density {
    Uniform,
    Sine {
        amplitude: f64,
    },
    Hole2 {
        width: f64,
        scale: f64,
        offset: f64,
    },
    Linear {
        xs: Vec<f64>,
        gs: Vec<f64>,
        // CDF at each knot.
        cumulative: Vec<f64>,
    },
}

impl Density {
    fn value(&self, x: f64) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Sine { amplitude } => 1.0 + amplitude * (2.0 * PI * x).sin(),
            Density::Hole2 {
                width,
                scale,
                offset,
            } => {
                let z = (x - 0.5) / width;
                scale * (offset + 1.0 - (-z * z).exp())
            }
            Density::Linear { xs, gs, .. } => {
                let i = segment(xs, x);
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                gs[i] + t * (gs[i + 1] - gs[i])
            }
        }
    }

    /// Closed-form antiderivative from 0.
    fn integral(&self, x: f64) -> f64 {
        match self {
            Density::Uniform => x,
            Density::Sine { amplitude } => x + amplitude / (2.0 * PI) * (1.0 - (2.0 * PI * x).cos()),
            Density::Hole2 {
                width,
                scale,
                offset,
            } => {
                let half = 0.5 * PI.sqrt() * width;
                let bump = half * (erf((x - 0.5) / width) + erf(0.5 / width));
                scale * ((offset + 1.0) * x - bump)
            }
            Density::Linear { xs, gs, cumulative } => {
                let i = segment(xs, x);
                let dx = x - xs[i];
                let slope = (gs[i + 1] - gs[i]) / (xs[i + 1] - xs[i]);
                cumulative[i] + gs[i] * dx + 0.5 * slope * dx * dx
            }
        }
    }
}

/// Index `i` with `xs[i] <= x <= xs[i + 1]`, clamped to the table.
fn segment(xs: &[f64], x: f64) -> usize {
    let p = xs.partition_point(|&v| v <= x);
    p.saturating_sub(1).min(xs.len() - 2)
}

/// Monotone cubic Hermite interpolant of `G` on a uniform grid.
#[derive(Debug, Clone)]
struct CdfTable {
    values: Vec<f64>,
    slopes: Vec<f64>,
    spacing: f64,
}

impl CdfTable {
    fn build(density: &Density) -> Self {
        let cells = 1usize << CDF_TABLE_LEVEL;
        let spacing = 1.0 / cells as f64;
        let total = density.integral(1.0);
        let mut values: Vec<f64> = (0..=cells)
            .map(|i| density.integral(i as f64 * spacing) / total)
            .collect();
        values[0] = 0.0;
        values[cells] = 1.0;
        let mut slopes: Vec<f64> = (0..=cells)
            .map(|i| density.value(i as f64 * spacing) / total)
            .collect();

        // Fritsch-Carlson limiter.
        for i in 0..cells {
            let secant = (values[i + 1] - values[i]) / spacing;
            if secant <= 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
                continue;
            }
            let a = slopes[i] / secant;
            let b = slopes[i + 1] / secant;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[i] = tau * a * secant;
                slopes[i + 1] = tau * b * secant;
            }
        }
        CdfTable {
            values,
            slopes,
            spacing,
        }
    }

    #[inline]
    fn hermite(&self, i: usize, t: f64) -> f64 {
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * self.spacing * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * self.spacing * self.slopes[i + 1]
    }

    #[inline]
    fn hermite_slope(&self, i: usize, t: f64) -> f64 {
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.values[i] + d01 * self.values[i + 1]) / self.spacing
            + d10 * self.slopes[i]
            + d11 * self.slopes[i + 1]
    }

    fn eval(&self, x: f64) -> f64 {
        let cells = self.values.len() - 1;
        let pos = x / self.spacing;
        let i = (pos.floor() as usize).min(cells - 1);
        self.hermite(i, pos - i as f64)
    }

    fn invert(&self, u: f64) -> f64 {
        let cells = self.values.len() - 1;
        let p = self.values.partition_point(|&v| v <= u);
        let i = p.saturating_sub(1).min(cells - 1);
        let (lo_v, hi_v) = (self.values[i], self.values[i + 1]);
        if u <= lo_v {
            return i as f64 * self.spacing;
        }
        if u >= hi_v {
            return (i + 1) as f64 * self.spacing;
        }
        // Safeguarded Newton on t in [0, 1].
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut t = (u - lo_v) / (hi_v - lo_v);
        for _ in 0..60 {
            let f = self.hermite(i, t) - u;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = self.hermite_slope(i, t) * self.spacing;
            let mut next = if d > 0.0 { t - f / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        ((i as f64 + t) * self.spacing).clamp(0.0, 1.0)
    }
}

/// A design density together with its CDF and inverse.
#[derive(Debug, Clone)]
pub struct DesignModel {
    label: String,
    density: Density,
    normalizer: f64,
    lower_bound: f64,
    cdf: Option<CdfTable>,
}

impl DesignModel {
    pub fn uniform() -> Self {
        DesignModel {
            label: "uniform".into(),
            density: Density::Uniform,
            normalizer: 1.0,
            lower_bound: 1.0,
            cdf: None,
        }
    }

    pub fn sine(amplitude: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::param(
                "amplitude",
                format!("{amplitude} must lie in [0, 1) to keep the density positive"),
            ));
        }
        Ok(Self::from_density(
            "sine",
            Density::Sine { amplitude },
            1.0 - amplitude,
        ))
    }

    pub fn hole2(width: f64, floor: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::param("hole_width", format!("{width} must be positive")));
        }
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::param(
                "hole_floor",
                format!("{floor} must lie in (0, 1)"),
            ));
        }
        let dip = PI.sqrt() * width * erf(0.5 / width);
        if dip >= 1.0 {
            return Err(Error::param(
                "hole_width",
                format!("{width} is too wide for a unit-mass density"),
            ));
        }
        // c * m0 = floor and c * (m0 + 1 - dip) = 1.
        let scale = (1.0 - floor) / (1.0 - dip);
        let offset = floor / scale;
        Ok(Self::from_density(
            "hole2",
            Density::Hole2 {
                width,
                scale,
                offset,
            },
            floor,
        ))
    }

    /// Piecewise-linear density through `(x, g)` knots covering `[0, 1]`;
    /// values are rescaled to unit mass.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidDensity("need at least two knots".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let raw: Vec<f64> = points.iter().map(|p| p.1).collect();
        if xs.iter().chain(&raw).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity("non-finite entry".into()));
        }
        if (xs[0]).abs() > 1e-12 || (xs[xs.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!(
                "knots must span [0, 1], got [{}, {}]",
                xs[0],
                xs[xs.len() - 1]
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDensity("knots must be strictly increasing".into()));
        }
        let mut xs = xs;
        xs[0] = 0.0;
        let last = xs.len() - 1;
        xs[last] = 1.0;
        let mass: f64 = xs
            .windows(2)
            .zip(raw.windows(2))
            .map(|(x, g)| 0.5 * (g[0] + g[1]) * (x[1] - x[0]))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity("density has no mass".into()));
        }
        let gs: Vec<f64> = raw.iter().map(|g| g / mass).collect();
        let lower = gs.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lower > 0.0) {
            return Err(Error::InvalidDensity(format!(
                "density must be bounded below by a positive constant, minimum is {lower}"
            )));
        }
        let mut cumulative = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (x, g) in xs.windows(2).zip(gs.windows(2)) {
            acc += 0.5 * (g[0] + g[1]) * (x[1] - x[0]);
            cumulative.push(acc);
        }
        Ok(Self::from_density(
            "custom",
            Density::Linear { xs, gs, cumulative },
            lower,
        ))
    }

    /// Parses a two-column table: whitespace or comma separated, `#` comments.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::InvalidDensity(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidDensity(format!("line {}: `{s}` is not a number", lineno + 1))
                })
            };
            points.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::from_points(&points)
    }

    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_table(&text)
    }

    fn from_density(label: &str, density: Density, lower_bound: f64) -> Self {
        let normalizer = density.integral(1.0);
        let cdf = CdfTable::build(&density);
        DesignModel {
            label: label.into(),
            lower_bound: lower_bound / normalizer,
            normalizer,
            density,
            cdf: Some(cdf),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The constant `m` with `0 < m <= g` on `[0, 1]`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn is_uniform(&self) -> bool {
        self.cdf.is_none()
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.density_unchecked(x))
    }

    #[inline]
    pub(crate) fn density_unchecked(&self, x: f64) -> f64 {
        self.density.value(x) / self.normalizer
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.cdf_unchecked(x))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        match &self.cdf {
            None => x,
            Some(table) => table.eval(x),
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        check_unit("u", u)?;
        Ok(self.inverse_unchecked(u))
    }

    #[inline]
    pub(crate) fn inverse_unchecked(&self, u: f64) -> f64 {
        match &self.cdf {
            None => u,
            Some(table) => table.invert(u),
        }
    }

    /// `n` i.i.d. design points drawn by inverse-CDF from a seeded stream.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::param("n", "sample size must be at least 1"));
        }
        Ok((0..n)
            .map(|_| self.inverse_unchecked(rng.gen::<f64>()))
            .collect())
    }
}

fn check_unit(what: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            what,
            value: v,
            domain: "[0, 1]",
        })
    }
}
