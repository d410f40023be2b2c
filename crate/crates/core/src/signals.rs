//! The Donoho-Johnstone test functions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numeric::sample_sd;

/// Uniform grid size used for rescaling and noise calibration.
pub const CALIBRATION_GRID: usize = 1 << 14;

const KNOTS: [f64; 11] = [
    0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
];
const BLOCK_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMP_HEIGHTS: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMP_WIDTHS: [f64; 11] = [
    0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestSignal {
    Blocks,
    Bumps,
    HeaviSine,
    Doppler,
    /// Identically zero; only useful for degenerate checks.
    Zero,
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl TestSignal {
    /// The four signals of the simulation study.
    pub const STUDY: [TestSignal; 4] = [
        TestSignal::Blocks,
        TestSignal::Bumps,
        TestSignal::HeaviSine,
        TestSignal::Doppler,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestSignal::Blocks => "blocks",
            TestSignal::Bumps => "bumps",
            TestSignal::HeaviSine => "heavisine",
            TestSignal::Doppler => "doppler",
            TestSignal::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blocks" => Some(TestSignal::Blocks),
            "bumps" => Some(TestSignal::Bumps),
            "heavisine" => Some(TestSignal::HeaviSine),
            "doppler" => Some(TestSignal::Doppler),
            "zero" => Some(TestSignal::Zero),
            _ => None,
        }
    }

    /// Standard closed form, before rescaling.
    pub fn raw(&self, x: f64) -> f64 {
        match self {
            TestSignal::Blocks => KNOTS
                .iter()
                .zip(BLOCK_HEIGHTS)
                .map(|(&t, h)| h * 0.5 * (1.0 + sgn(x - t)))
                .sum(),
            TestSignal::Bumps => KNOTS
                .iter()
                .zip(BUMP_HEIGHTS)
                .zip(BUMP_WIDTHS)
                .map(|((&t, h), w)| h * (1.0 + ((x - t) / w).abs()).powi(-4))
                .sum(),
            TestSignal::HeaviSine => 4.0 * (4.0 * PI * x).sin() - sgn(x - 0.3) - sgn(0.72 - x),
            TestSignal::Doppler => (x * (1.0 - x)).sqrt() * (2.0 * PI * 1.05 / (x + 0.05)).sin(),
            TestSignal::Zero => 0.0,
        }
    }

    /// Grid standard deviation of [`TestSignal::raw`].
    pub fn raw_sd(&self) -> f64 {
        static CACHE: OnceLock<[f64; 5]> = OnceLock::new();
        let table = CACHE.get_or_init(|| {
            let all = [
                TestSignal::Blocks,
                TestSignal::Bumps,
                TestSignal::HeaviSine,
                TestSignal::Doppler,
                TestSignal::Zero,
            ];
            all.map(|s| grid_sd(|x| s.raw(x)))
        });
        table[*self as usize]
    }

    /// Rescaled to unit grid standard deviation (not centered).
    pub fn value(&self, x: f64) -> f64 {
        let sd = self.raw_sd();
        if sd == 0.0 {
            0.0
        } else {
            self.raw(x) / sd
        }
    }
}

impl fmt::Display for TestSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw signal value at `x` in `[0, 1]`.
pub fn signal_eval(sig: TestSignal, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain {
            what: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(sig.raw(x))
}

/// Standard deviation of `f` over `i / CALIBRATION_GRID`.
pub fn grid_sd(f: impl Fn(f64) -> f64) -> f64 {
    let values: Vec<f64> = (0..CALIBRATION_GRID)
        .map(|i| f(i as f64 / CALIBRATION_GRID as f64))
        .collect();
    sample_sd(&values)
}

/// `sigma = sd(f) / rsnr` for an arbitrary target.
pub fn calibrate_sigma_fn(f: impl Fn(f64) -> f64, rsnr: f64) -> Result<f64> {
    if !(rsnr > 0.0) || !rsnr.is_finite() {
        return Err(Error::param("rsnr", format!("{rsnr} must be positive")));
    }
    let sd = grid_sd(f);
    if sd == 0.0 {
        return Err(Error::param("signal", "constant signal has no noise scale"));
    }
    Ok(sd / rsnr)
}

/// Noise level for the rescaled signal at the given root signal-to-noise ratio.
pub fn calibrate_sigma(sig: TestSignal, rsnr: f64) -> Result<f64> {
    calibrate_sigma_fn(|x| sig.value(x), rsnr)
}
