//! Experiment configuration files.
//!
//! ```text
//! # comment
//! [experiment]
//! signal = blocks, bumps      # lists expand to every combination
//! design = sine, hole2
//! rule = large, small, hard
//! rsnr = 4, 7
//! n = 1024
//! runs = 100
//! seed = 0
//! ```
//!
//! Optional keys: `wavelet`, `resolution`, `sigma`, `rate_n`, design
//! parameters (`design.amplitude`, `design.width`, `design.floor`,
//! `design.path`) and rule parameters (`small.c1`, `small.c2`, `small.alpha`,
//! `small.beta`, `large.q`, `large.w_scale`, `large.tau_scale`,
//! `large.tau_mode`, `hard.scale`).

use std::fmt::{self, Write as _};

use crate::design::{DesignSpec, DEFAULT_HOLE_FLOOR, DEFAULT_HOLE_WIDTH, DEFAULT_SINE_AMPLITUDE};
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::shrinkage::{HardHyper, HardScale, LargeVarHyper, RuleSpec, SmallVarHyper, TauMode};
use crate::signals::TestSignal;
use crate::wavelet::{WaveletFamily, MAX_RESOLUTION, MIN_RESOLUTION};

/// A located problem in an experiment configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(key) => write!(f, "line {}: `{}`: {}", self.line, key, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

const SECTION: &str = "[experiment]";

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: Vec<(usize, String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DesignKind {
    Uniform,
    Sine,
    Hole2,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RuleKind {
    Small,
    Large,
    Hard,
}

struct Collector {
    errors: Vec<ConfigError>,
}

impl Collector {
    fn push(&mut self, line: usize, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            key: Some(key.to_string()),
            message: message.into(),
        });
    }

    fn list<T>(
        &mut self,
        line: usize,
        key: &str,
        value: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Option<Vec<T>> {
        let mut out = Vec::new();
        for item in value.split(',').map(str::trim) {
            if item.is_empty() {
                self.push(line, key, "empty list item");
                return None;
            }
            match parse(item) {
                Ok(v) => out.push(v),
                Err(m) => {
                    self.push(line, key, m);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn single<T>(
        &mut self,
        line: usize,
        key: &str,
        value: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Option<T> {
        match parse(value) {
            Ok(v) => Some(v),
            Err(m) => {
                self.push(line, key, m);
                None
            }
        }
    }
}

fn real(pred: fn(f64) -> bool, what: &'static str) -> impl Fn(&str) -> std::result::Result<f64, String> {
    move |s| {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() && pred(v) {
            Ok(v)
        } else {
            Err(format!("{v} is out of range: must be {what}"))
        }
    }
}

fn integer(min: u64, max: u64) -> impl Fn(&str) -> std::result::Result<u64, String> {
    move |s| {
        let v: u64 = s.parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))?;
        if (min..=max).contains(&v) {
            Ok(v)
        } else {
            Err(format!("{v} is out of range [{min}, {max}]"))
        }
    }
}

fn parse_design_kind(s: &str) -> std::result::Result<DesignKind, String> {
    match s {
        "uniform" => Ok(DesignKind::Uniform),
        "sine" => Ok(DesignKind::Sine),
        "hole2" => Ok(DesignKind::Hole2),
        "custom" => Ok(DesignKind::Custom),
        _ => Err(format!("unknown design `{s}` (uniform, sine, hole2, custom)")),
    }
}

fn parse_rule_kind(s: &str) -> std::result::Result<RuleKind, String> {
    match s {
        "small" | "E2" => Ok(RuleKind::Small),
        "large" | "E1" => Ok(RuleKind::Large),
        "hard" | "E3" => Ok(RuleKind::Hard),
        _ => Err(format!("unknown rule `{s}` (large, small, hard)")),
    }
}

fn split_sections(text: &str) -> (Vec<Section>, Vec<ConfigError>) {
    let mut sections: Vec<Section> = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if content == SECTION {
                sections.push(Section {
                    line,
                    entries: Vec::new(),
                });
            } else {
                errors.push(ConfigError {
                    line,
                    key: None,
                    message: format!("unknown section `{content}`"),
                });
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError {
                line,
                key: None,
                message: format!("expected `key = value`, found `{content}`"),
            });
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        match sections.last_mut() {
            Some(s) => s.entries.push((line, key, value)),
            None => errors.push(ConfigError {
                line,
                key: Some(key),
                message: format!("key outside of an {SECTION} section"),
            }),
        }
    }
    (sections, errors)
}

/// Parses every `[experiment]` section, expanding lists, or reports all
/// located errors at once.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let (sections, mut errors) = split_sections(text);
    if sections.is_empty() && errors.is_empty() {
        errors.push(ConfigError {
            line: 1,
            key: None,
            message: format!("no {SECTION} section"),
        });
    }
    let mut out = Vec::new();
    for section in &sections {
        let mut c = Collector { errors: Vec::new() };
        if let Some(cfgs) = parse_section(section, &mut c) {
            if c.errors.is_empty() {
                out.extend(cfgs);
            }
        }
        errors.extend(c.errors);
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(Error::Config(errors))
    }
}

fn parse_section(section: &Section, c: &mut Collector) -> Option<Vec<ExperimentConfig>> {
    let mut signals = None;
    let mut designs = None;
    let mut rules = None;
    let mut rsnrs = None;
    let mut base = ExperimentConfig::new(TestSignal::Blocks, DesignSpec::Uniform, RuleSpec::hard());
    let mut small = SmallVarHyper::default();
    let mut large = LargeVarHyper::default();
    let mut hard = HardHyper::default();
    let mut amplitude = DEFAULT_SINE_AMPLITUDE;
    let mut width = DEFAULT_HOLE_WIDTH;
    let mut floor = DEFAULT_HOLE_FLOOR;
    let mut path: Option<String> = None;
    let mut seen: Vec<(&str, usize)> = Vec::new();
    let mut design_keys: Vec<(usize, &str, DesignKind)> = Vec::new();
    let mut rule_keys: Vec<(usize, &str, RuleKind)> = Vec::new();

    let pos = |x: f64| x > 0.0;
    let nonneg = |x: f64| x >= 0.0;
    for (line, key, value) in &section.entries {
        let (line, key, value) = (*line, key.as_str(), value.as_str());
        if let Some(&(_, first)) = seen.iter().find(|(k, _)| *k == key) {
            c.push(line, key, format!("duplicate key (first set on line {first})"));
            continue;
        }
        seen.push((key, line));
        match key {
            "signal" => {
                signals = c.list(line, key, value, |s| {
                    TestSignal::parse(s).ok_or_else(|| {
                        format!("unknown signal `{s}` (blocks, bumps, heavisine, doppler, zero)")
                    })
                })
            }
            "design" => designs = c.list(line, key, value, parse_design_kind),
            "rule" => rules = c.list(line, key, value, parse_rule_kind),
            "rsnr" => rsnrs = c.list(line, key, value, real(pos, "positive")),
            "n" => {
                if let Some(v) = c.single(line, key, value, integer(3, 1 << 24)) {
                    base.n = v as usize;
                }
            }
            "runs" => {
                if let Some(v) = c.single(line, key, value, integer(1, 1_000_000)) {
                    base.runs = v as usize;
                }
            }
            "seed" => {
                if let Some(v) = c.single(line, key, value, integer(0, u64::MAX)) {
                    base.seed = v;
                }
            }
            "wavelet" => {
                match WaveletFamily::by_name(value) {
                    Some(_) => base.wavelet = value.to_string(),
                    None => c.push(line, key, format!("unknown wavelet `{value}` (symmlet8, haar)")),
                }
            }
            "resolution" => {
                let range = integer(MIN_RESOLUTION as u64, MAX_RESOLUTION as u64);
                if let Some(v) = c.single(line, key, value, range) {
                    base.resolution = v as u32;
                }
            }
            "sigma" => base.sigma = c.single(line, key, value, real(nonneg, ">= 0")),
            "rate_n" => {
                if let Some(v) = c.list(line, key, value, integer(3, 1 << 24)) {
                    if v.len() < 3 || v.windows(2).any(|w| w[0] >= w[1]) {
                        c.push(line, key, "need at least 3 increasing sample sizes");
                    } else {
                        base.rate_n = v.into_iter().map(|n| n as usize).collect();
                    }
                }
            }
            "design.amplitude" => {
                design_keys.push((line, "design.amplitude", DesignKind::Sine));
                if let Some(v) = c.single(line, key, value, real(|x| (0.0..1.0).contains(&x), "in [0, 1)")) {
                    amplitude = v;
                }
            }
            "design.width" => {
                design_keys.push((line, "design.width", DesignKind::Hole2));
                if let Some(v) = c.single(line, key, value, real(pos, "positive")) {
                    width = v;
                }
            }
            "design.floor" => {
                design_keys.push((line, "design.floor", DesignKind::Hole2));
                if let Some(v) = c.single(line, key, value, real(|x| x > 0.0 && x < 1.0, "in (0, 1)")) {
                    floor = v;
                }
            }
            "design.path" => {
                design_keys.push((line, "design.path", DesignKind::Custom));
                path = Some(value.to_string());
            }
            "small.c1" | "small.c2" | "small.alpha" | "small.beta" => {
                rule_keys.push((line, "small", RuleKind::Small));
                let check = if key == "small.beta" { real(nonneg, ">= 0") } else { real(pos, "positive") };
                if let Some(v) = c.single(line, key, value, check) {
                    match key {
                        "small.c1" => small.c1 = v,
                        "small.c2" => small.c2 = v,
                        "small.alpha" => small.alpha = v,
                        _ => small.beta = v,
                    }
                }
            }
            "large.q" | "large.w_scale" | "large.tau_scale" => {
                rule_keys.push((line, "large", RuleKind::Large));
                if let Some(v) = c.single(line, key, value, real(pos, "positive")) {
                    match key {
                        "large.q" => large.q = v,
                        "large.w_scale" => large.w_scale = v,
                        _ => large.tau_scale = v,
                    }
                }
            }
            "large.tau_mode" => {
                rule_keys.push((line, "large", RuleKind::Large));
                match TauMode::parse(value) {
                    Some(m) => large.tau_mode = m,
                    None => c.push(line, key, format!("unknown mode `{value}` (theory, sim-variance, sim-sd)")),
                }
            }
            "hard.scale" => {
                rule_keys.push((line, "hard", RuleKind::Hard));
                match HardScale::parse(value) {
                    Some(s) => hard.scale = s,
                    None => c.push(line, key, format!("unknown scale `{value}` (coefficient, literal)")),
                }
            }
            _ => c.push(line, key, "unknown key"),
        }
    }

    for (value, key) in [(signals.is_none(), "signal"), (designs.is_none(), "design"), (rules.is_none(), "rule")] {
        if value && !seen.iter().any(|(k, _)| *k == key) {
            c.push(section.line, key, "missing required key");
        }
    }
    let (signals, designs, rules) = (signals?, designs?, rules?);
    for &(line, key, kind) in &design_keys {
        if !designs.contains(&kind) {
            c.push(line, key, "does not apply to any listed design");
        }
    }
    for &(line, key, kind) in &rule_keys {
        if !rules.contains(&kind) {
            c.push(line, key, format!("`{key}` parameters given but no `{key}` rule is listed"));
        }
    }
    if designs.contains(&DesignKind::Custom) && path.is_none() {
        c.push(section.line, "design.path", "custom design requires a table path");
    }
    let rsnrs = rsnrs.unwrap_or_else(|| vec![base.rsnr]);

    let mut out = Vec::new();
    for &signal in &signals {
        for &d in &designs {
            let design = match d {
                DesignKind::Uniform => DesignSpec::Uniform,
                DesignKind::Sine => DesignSpec::Sine { amplitude },
                DesignKind::Hole2 => DesignSpec::Hole2 { width, floor },
                DesignKind::Custom => DesignSpec::Custom {
                    path: path.clone().unwrap_or_default(),
                },
            };
            for &r in &rules {
                let rule = match r {
                    RuleKind::Small => RuleSpec::SmallVarBayes(small),
                    RuleKind::Large => RuleSpec::LargeVarBayes(large),
                    RuleKind::Hard => RuleSpec::HardUniversal(hard),
                };
                for &rsnr in &rsnrs {
                    out.push(ExperimentConfig {
                        signal,
                        design: design.clone(),
                        rule,
                        rsnr,
                        ..base.clone()
                    });
                }
            }
        }
    }
    Some(out)
}

/// One `[experiment]` section per config; [`parse_config`] reads it back unchanged.
pub fn emit_config(cfgs: &[ExperimentConfig]) -> String {
    let mut s = String::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "{SECTION}");
        let _ = writeln!(s, "signal = {}", cfg.signal);
        let _ = writeln!(s, "design = {}", cfg.design.label());
        match &cfg.design {
            DesignSpec::Uniform => {}
            DesignSpec::Sine { amplitude } => {
                let _ = writeln!(s, "design.amplitude = {amplitude}");
            }
            DesignSpec::Hole2 { width, floor } => {
                let _ = writeln!(s, "design.width = {width}");
                let _ = writeln!(s, "design.floor = {floor}");
            }
            DesignSpec::Custom { path } => {
                let _ = writeln!(s, "design.path = {path}");
            }
        }
        let _ = writeln!(s, "rule = {}", cfg.rule.keyword());
        match &cfg.rule {
            RuleSpec::SmallVarBayes(h) => {
                let _ = writeln!(s, "small.c1 = {}", h.c1);
                let _ = writeln!(s, "small.c2 = {}", h.c2);
                let _ = writeln!(s, "small.alpha = {}", h.alpha);
                let _ = writeln!(s, "small.beta = {}", h.beta);
            }
            RuleSpec::LargeVarBayes(h) => {
                let _ = writeln!(s, "large.q = {}", h.q);
                let _ = writeln!(s, "large.w_scale = {}", h.w_scale);
                let _ = writeln!(s, "large.tau_scale = {}", h.tau_scale);
                let _ = writeln!(s, "large.tau_mode = {}", h.tau_mode.as_str());
            }
            RuleSpec::HardUniversal(h) => {
                let _ = writeln!(s, "hard.scale = {}", h.scale.as_str());
            }
        }
        let _ = writeln!(s, "rsnr = {}", cfg.rsnr);
        let _ = writeln!(s, "n = {}", cfg.n);
        let _ = writeln!(s, "runs = {}", cfg.runs);
        let _ = writeln!(s, "seed = {}", cfg.seed);
        let _ = writeln!(s, "wavelet = {}", cfg.wavelet);
        let _ = writeln!(s, "resolution = {}", cfg.resolution);
        if let Some(sigma) = cfg.sigma {
            let _ = writeln!(s, "sigma = {sigma}");
        }
        let rate: Vec<String> = cfg.rate_n.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "rate_n = {}", rate.join(", "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<ConfigError> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfgs = parse_config("[experiment]\nsignal = blocks\ndesign = uniform\nrule = hard\n").unwrap();
        assert_eq!(cfgs.len(), 1);
        let c = &cfgs[0];
        assert_eq!((c.n, c.rsnr, c.runs), (1024, 4.0, 100));
        assert_eq!(c.wavelet, "symmlet8");
        assert_eq!(c.rule, RuleSpec::hard());
    }

    #[test]
    fn negative_rsnr_names_the_key() {
        let e = errors("[experiment]\nsignal = blocks\ndesign = uniform\nrule = hard\nrsnr = -1\n");
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].line, 5);
        assert_eq!(e[0].key.as_deref(), Some("rsnr"));
        assert!(e.to_vec()[0].to_string().contains("rsnr"));
    }

    #[test]
    fn two_sections() {
        let text = "[experiment]\nsignal=blocks\ndesign=sine\nrule=large\n\n[experiment]\nsignal=bumps\ndesign=hole2\nrule=small\nrsnr=7\n";
        let cfgs = parse_config(text).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[1].signal, TestSignal::Bumps);
        assert_eq!(cfgs[1].rsnr, 7.0);
    }

    #[test]
    fn full_grid_expands() {
        let text = "[experiment]\nsignal = blocks, bumps, heavisine, doppler\ndesign = sine, hole2\nrule = large, small, hard\nrsnr = 4, 7\n";
        assert_eq!(parse_config(text).unwrap().len(), 48);
    }

    #[test]
    fn located_errors() {
        let text = "signal = blocks\n[experiment]\nsignal = wiggle\nfoo = 1\nrule = hard\nrule = large\nn = 2\nsmall.c1 = 3\n[other]\n";
        let e = errors(text);
        let lines: Vec<usize> = e.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![1, 2, 3, 4, 6, 7, 9]);
        assert!(e.iter().any(|e| e.key.as_deref() == Some("design") && e.message.contains("missing")));
    }

    #[test]
    fn hyperparameters_must_match_a_rule() {
        let e = errors("[experiment]\nsignal = blocks\ndesign = uniform\nrule = hard\nlarge.q = 2\n");
        assert_eq!(e[0].line, 5);
        let ok = parse_config("[experiment]\nsignal = blocks\ndesign = sine\ndesign.amplitude = 0.3\nrule = hard, large\nlarge.q = 2\nlarge.tau_mode = sim-sd\n").unwrap();
        assert_eq!(ok[1].rule, RuleSpec::LargeVarBayes(LargeVarHyper { q: 2.0, tau_mode: TauMode::SimDeviation, ..LargeVarHyper::default() }));
        assert_eq!(ok[0].design, DesignSpec::Sine { amplitude: 0.3 });
    }

    #[test]
    fn comments_and_whitespace() {
        let cfgs = parse_config("# grid\n\n[experiment]   # first\n  signal = doppler # trailing\ndesign=uniform\nrule = E1\nsigma = 0\n").unwrap();
        assert_eq!(cfgs[0].rule, RuleSpec::large());
        assert_eq!(cfgs[0].sigma, Some(0.0));
    }

    #[test]
    fn empty_text_is_an_error() {
        assert_eq!(errors("# nothing\n").len(), 1);
    }

    #[test]
    fn emit_round_trip() {
        let text = "[experiment]\nsignal = blocks, heavisine\ndesign = sine, hole2\nrule = large, small, hard\nrsnr = 4, 7.5\nseed = 12\nrate_n = 128, 512, 2048\nsigma = 0.125\n";
        let cfgs = parse_config(text).unwrap();
        assert_eq!(parse_config(&emit_config(&cfgs)).unwrap(), cfgs);
    }
}
