//! Run configuration: defaults, TOML config files, and flag overrides.
//!
//! Precedence is fixed: built-in defaults, then the `--config` file, then
//! command-line flags. The merged result is rendered into every output
//! artifact's header as `#` comments whose bodies are valid TOML dotted-key
//! assignments, so an artifact header can be pasted back into a config file
//! to reproduce the run.

use serde::Deserialize;
use stategrid::{DecoderConfig, HardConstraintConfig, TrainConfig};
use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// Default logistic midpoint for prior calibration.
pub const DEFAULT_X0: f64 = 3.0;
/// Default flat prior for the no-change kind.
pub const DEFAULT_NONE_PRIOR: f64 = 0.5;

/// The effective configuration of one command after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hard: HardConstraintConfig,
    pub decoder: DecoderConfig,
    pub train: TrainConfig,
    /// Logistic midpoint used when building or re-calibrating prior tables.
    pub x0: f64,
    /// Flat no-change prior used when building prior tables.
    pub none_prior: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hard: HardConstraintConfig::default(),
            decoder: DecoderConfig::default(),
            train: TrainConfig::default(),
            x0: DEFAULT_X0,
            none_prior: DEFAULT_NONE_PRIOR,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Check every merged section; any breach is a configuration error.
    pub fn validate(&self) -> Result<(), CliError> {
        self.decoder.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.hard.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !self.x0.is_finite() {
            return Err(CliError::Config(format!("priors.x0 must be finite, got {}", self.x0)));
        }
        if !(self.none_prior > 0.0 && self.none_prior < 1.0) {
            return Err(CliError::Config(format!(
                "priors.none_prior must lie strictly inside (0, 1), got {}",
                self.none_prior
            )));
        }
        Ok(())
    }
}

/// A config file: every field optional, unknown keys rejected so typos
/// surface as errors instead of silently keeping a default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub constraints: Option<ConstraintsSection>,
    pub decoder: Option<DecoderSection>,
    pub train: Option<TrainSection>,
    pub priors: Option<PriorsSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    pub cs1: Option<bool>,
    pub cs2: Option<bool>,
    pub cs3: Option<bool>,
    pub d1: Option<bool>,
    pub d2: Option<bool>,
    pub d3: Option<bool>,
    pub max_toggles: Option<u32>,
    pub max_entities_frac: Option<f64>,
    pub max_sentences_frac: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub beam_width: Option<usize>,
    pub lambda: Option<f64>,
    pub use_hard: Option<bool>,
    pub use_soft: Option<bool>,
    pub max_entities_for_exact: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsSection {
    pub x0: Option<f64>,
    pub none_prior: Option<f64>,
}

/// Read and parse a config file. Parse failures are configuration errors.
pub fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Merge a config file onto the defaults. Flag overrides are applied by the
/// individual commands after this.
pub fn merge(file: &FileConfig) -> RunConfig {
    let mut cfg = RunConfig::default();
    if let Some(seed) = file.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(c) = &file.constraints {
        set(&mut cfg.hard.cs1, c.cs1);
        set(&mut cfg.hard.cs2, c.cs2);
        set(&mut cfg.hard.cs3, c.cs3);
        set(&mut cfg.hard.d1, c.d1);
        set(&mut cfg.hard.d2, c.d2);
        set(&mut cfg.hard.d3, c.d3);
        set(&mut cfg.hard.max_toggles, c.max_toggles);
        set(&mut cfg.hard.max_entities_frac, c.max_entities_frac);
        set(&mut cfg.hard.max_sentences_frac, c.max_sentences_frac);
    }
    if let Some(d) = &file.decoder {
        set(&mut cfg.decoder.beam_width, d.beam_width);
        set(&mut cfg.decoder.lambda, d.lambda);
        set(&mut cfg.decoder.use_hard, d.use_hard);
        set(&mut cfg.decoder.use_soft, d.use_soft);
        set(&mut cfg.decoder.max_entities_for_exact, d.max_entities_for_exact);
    }
    if let Some(t) = &file.train {
        set(&mut cfg.train.epochs, t.epochs);
        set(&mut cfg.train.learning_rate, t.learning_rate);
        set(&mut cfg.train.seed, t.seed);
    }
    if let Some(p) = &file.priors {
        set(&mut cfg.x0, p.x0);
        set(&mut cfg.none_prior, p.none_prior);
    }
    cfg
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// The effective config as TOML dotted-key assignments, one per line, in a
/// fixed order. Floats use their shortest exact decimal rendering, so equal
/// configs always produce identical bytes.
pub fn render_toml(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "constraints.cs1 = {}", cfg.hard.cs1);
    let _ = writeln!(out, "constraints.cs2 = {}", cfg.hard.cs2);
    let _ = writeln!(out, "constraints.cs3 = {}", cfg.hard.cs3);
    let _ = writeln!(out, "constraints.d1 = {}", cfg.hard.d1);
    let _ = writeln!(out, "constraints.d2 = {}", cfg.hard.d2);
    let _ = writeln!(out, "constraints.d3 = {}", cfg.hard.d3);
    let _ = writeln!(out, "constraints.max_toggles = {}", cfg.hard.max_toggles);
    let _ = writeln!(out, "constraints.max_entities_frac = {:?}", cfg.hard.max_entities_frac);
    let _ = writeln!(out, "constraints.max_sentences_frac = {:?}", cfg.hard.max_sentences_frac);
    let _ = writeln!(out, "decoder.beam_width = {}", cfg.decoder.beam_width);
    let _ = writeln!(out, "decoder.lambda = {:?}", cfg.decoder.lambda);
    let _ = writeln!(out, "decoder.use_hard = {}", cfg.decoder.use_hard);
    let _ = writeln!(out, "decoder.use_soft = {}", cfg.decoder.use_soft);
    let _ = writeln!(out, "decoder.max_entities_for_exact = {}", cfg.decoder.max_entities_for_exact);
    let _ = writeln!(out, "train.epochs = {}", cfg.train.epochs);
    let _ = writeln!(out, "train.learning_rate = {:?}", cfg.train.learning_rate);
    let _ = writeln!(out, "train.seed = {}", cfg.train.seed);
    let _ = writeln!(out, "priors.x0 = {:?}", cfg.x0);
    let _ = writeln!(out, "priors.none_prior = {:?}", cfg.none_prior);
    out
}

/// The artifact header: the command name plus the effective config, every
/// line a `#` comment so any versioned reader skips it.
pub fn render_header(command: &str, cfg: &RunConfig) -> String {
    let mut out = format!("# stategrid {command}\n");
    for line in render_toml(cfg).lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults_and_flags_stay_on_top() {
        let file: FileConfig = toml::from_str(
            "seed = 7\n[decoder]\nlambda = 0.25\n[constraints]\ncs2 = false\nmax_toggles = 3\n",
        )
        .unwrap();
        let cfg = merge(&file);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.decoder.lambda, 0.25);
        assert_eq!(cfg.decoder.beam_width, 10);
        assert!(!cfg.hard.cs2);
        assert_eq!(cfg.hard.max_toggles, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[decoder]\nbeamwidth = 3\n").is_err());
        assert!(toml::from_str::<FileConfig>("[decoders]\nbeam_width = 3\n").is_err());
    }

    #[test]
    fn rendered_toml_parses_back_to_the_same_config() {
        let mut cfg = RunConfig::default();
        cfg.decoder.lambda = 0.3;
        cfg.hard.max_entities_frac = 0.75;
        cfg.seed = 11;
        cfg.train.seed = 11;
        let file: FileConfig = toml::from_str(&render_toml(&cfg)).unwrap();
        assert_eq!(merge(&file), cfg);
    }

    #[test]
    fn header_lines_are_all_comments() {
        let header = render_header("decode", &RunConfig::default());
        assert!(header.lines().all(|l| l.starts_with("# ")));
        assert!(header.contains("# decoder.beam_width = 10"));
    }
}
