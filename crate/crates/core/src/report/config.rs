//! JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ba::{uniform_grid, BaConfig};
use crate::dal::{DalConfig, Divergence};
use crate::entropic::{log_spaced, EntropicConfig};
use crate::error::{Error, Result};
use crate::source::{
    make_source, product_source, quantized_gaussian_source, DistortionKind, Source, SourceFile,
};
use crate::two_stage::{FrontierConfig, LloydConfig, DEFAULT_ENUMERATION_CAP};

/// Where the source comes from. Exactly one variant per config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Inline(SourceFile),
    /// Path to a source JSON file, relative to the config file.
    File(PathBuf),
    QuantizedGaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
        points: usize,
        #[serde(default = "three")]
        half_width_stds: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

/// A multiplier schedule, listed or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Values(Vec<f64>),
    LogSpaced {
        lo: f64,
        hi: f64,
        count: usize,
        #[serde(default = "yes")]
        include_zero: bool,
    },
}

fn yes() -> bool {
    true
}

impl Schedule {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Schedule::Values(ref v) => v.clone(),
            Schedule::LogSpaced {
                lo,
                hi,
                count,
                include_zero,
            } => log_spaced(lo, hi, count, include_zero),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Schedule::LogSpaced { lo, hi, count, .. } = *self {
            if count == 0 || !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                return Err(Error::Config(format!(
                    "{name}: log_spaced needs 0 < lo <= hi and count >= 1"
                )));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(Error::Config(format!("{name}: schedule is empty")));
        }
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "{name}: schedule must be non-negative and strictly increasing"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Reconstruction {
    /// Reconstruct on the source alphabet itself.
    #[default]
    Source,
    /// Uniform grid over the source range (scalar sources only).
    Grid { points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaSection {
    pub beta: Schedule,
    pub tol: f64,
    pub max_iters: usize,
    pub reconstruction: Reconstruction,
    /// Centroid refinement passes per point (squared error only).
    pub refine_rounds: usize,
}

impl Default for BaSection {
    fn default() -> Self {
        let d = BaConfig::default();
        Self {
            beta: Schedule::LogSpaced {
                lo: 1e-2,
                hi: 1e3,
                count: 60,
                include_zero: true,
            },
            tol: d.tol,
            max_iters: d.max_iters,
            reconstruction: Reconstruction::Source,
            refine_rounds: 0,
        }
    }
}

impl BaSection {
    pub fn solver(&self) -> BaConfig {
        BaConfig {
            tol: self.tol,
            max_iters: self.max_iters,
            trace: false,
        }
    }

    pub fn alphabet(&self, src: &Source) -> Result<Vec<Vec<f64>>> {
        match self.reconstruction {
            Reconstruction::Source => Ok(src.symbols().to_vec()),
            Reconstruction::Grid { points } => uniform_grid(src, points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropicSection {
    pub lambda: Schedule,
    pub marginal_tol: f64,
    pub max_iters: usize,
    /// Also write every coupling of the sweep under `couplings/`.
    pub dump_couplings: bool,
}

impl Default for EntropicSection {
    fn default() -> Self {
        let d = EntropicConfig::default();
        Self {
            lambda: Schedule::LogSpaced {
                lo: 1e-3,
                hi: 1e3,
                count: 60,
                include_zero: true,
            },
            marginal_tol: d.marginal_tol,
            max_iters: d.max_iters,
            dump_couplings: false,
        }
    }
}

impl EntropicSection {
    pub fn solver(&self) -> EntropicConfig {
        EntropicConfig {
            marginal_tol: self.marginal_tol,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStageSection {
    pub enabled: bool,
    pub max_codewords: usize,
    pub enumeration_cap: u128,
    pub lloyd_fallback: bool,
    pub lloyd_restarts: usize,
    pub lloyd_max_iters: usize,
}

impl Default for TwoStageSection {
    fn default() -> Self {
        let l = LloydConfig::default();
        Self {
            enabled: true,
            max_codewords: 16,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            lloyd_fallback: true,
            lloyd_restarts: l.restarts,
            lloyd_max_iters: l.max_iters,
        }
    }
}

impl TwoStageSection {
    pub fn lloyd(&self, seed: u64) -> LloydConfig {
        LloydConfig {
            restarts: self.lloyd_restarts,
            max_iters: self.lloyd_max_iters,
            seed,
        }
    }

    pub fn frontier(&self, seed: u64) -> FrontierConfig {
        FrontierConfig {
            enumeration_cap: self.enumeration_cap,
            lloyd_fallback: self.lloyd_fallback,
            lloyd: self.lloyd(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DalSection {
    pub lambda: Schedule,
    pub divergence: Divergence,
    /// Code count of the Lloyd encoder the decoder is optimized for.
    pub codewords: usize,
    pub step0: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for DalSection {
    fn default() -> Self {
        let d = DalConfig::default();
        Self {
            lambda: Schedule::Values(vec![0.0, 0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1e3, 1e4]),
            divergence: d.divergence,
            codewords: 2,
            step0: d.step0,
            max_iters: d.max_iters,
            tolerance: d.tolerance,
        }
    }
}

impl DalSection {
    pub fn solver(&self) -> DalConfig {
        DalConfig {
            lambda: 0.0,
            divergence: self.divergence,
            step0: self.step0,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
        }
    }
}

/// Thresholds applied by the verification battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub symmetry_tol: f64,
    pub doubling_tol: f64,
    pub payoff_tol: f64,
    pub payoff_trials: usize,
    pub exactness_tol: f64,
    /// Allowed rate gap between the operational frontiers after halving.
    pub frontier_gap_tol: f64,
    pub shape_tol: f64,
    /// Number of seeded random 8-symbol sources in the internal battery.
    pub random_sources: usize,
    /// Run the internal battery in addition to the configured source.
    pub battery: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-8,
            doubling_tol: 1e-12,
            payoff_tol: 1e-12,
            payoff_trials: 200,
            exactness_tol: 1e-15,
            frontier_gap_tol: 0.0,
            shape_tol: 1e-9,
            random_sources: 3,
            battery: true,
        }
    }
}

/// What to do when a solver hits its iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NonConvergencePolicy {
    /// Treat it as a failure (exit code 3).
    Fail,
    /// Record it and carry on; `--strict` upgrades this to `Fail`.
    #[default]
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceSpec,
    /// Replace the source by its `t`-fold product.
    #[serde(default)]
    pub product_order: Option<usize>,
    #[serde(default = "squared_error")]
    pub distortion: DistortionKind,
    #[serde(default)]
    pub ba: BaSection,
    #[serde(default)]
    pub entropic: EntropicSection,
    #[serde(default)]
    pub two_stage: TwoStageSection,
    #[serde(default)]
    pub dal: DalSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub nonconvergence: NonConvergencePolicy,
    /// Directory relative paths are resolved against; set by [`RunConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn squared_error() -> DistortionKind {
    DistortionKind::SquaredError
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Config for `source` with every section at its default.
    pub fn for_source(source: SourceSpec) -> Self {
        Self {
            source,
            product_order: None,
            distortion: DistortionKind::SquaredError,
            ba: BaSection::default(),
            entropic: EntropicSection::default(),
            two_stage: TwoStageSection::default(),
            dal: DalSection::default(),
            verify: VerifySection::default(),
            output_dir: default_output_dir(),
            seed: 0,
            nonconvergence: NonConvergencePolicy::Warn,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ba.beta.validate("ba.beta")?;
        self.entropic.lambda.validate("entropic.lambda")?;
        self.dal.lambda.validate("dal.lambda")?;
        if self.ba.refine_rounds > 0 && self.distortion != DistortionKind::SquaredError {
            return Err(Error::Config(
                "ba.refine_rounds needs squared_error distortion".into(),
            ));
        }
        if self.two_stage.max_codewords == 0 || self.dal.codewords == 0 {
            return Err(Error::Config("codeword counts must be >= 1".into()));
        }
        let v = &self.verify;
        let thresholds = [
            ("symmetry_tol", v.symmetry_tol),
            ("doubling_tol", v.doubling_tol),
            ("payoff_tol", v.payoff_tol),
            ("exactness_tol", v.exactness_tol),
            ("frontier_gap_tol", v.frontier_gap_tol),
            ("shape_tol", v.shape_tol),
        ];
        if let Some((name, _)) = thresholds
            .iter()
            .find(|(_, t)| !(t.is_finite() && *t >= 0.0))
        {
            return Err(Error::Config(format!(
                "verify.{name} must be finite and >= 0"
            )));
        }
        if self.product_order == Some(0) {
            return Err(Error::Config("product_order must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn build_source(&self) -> Result<Source> {
        let base = match &self.source {
            SourceSpec::Inline(file) => Source::try_from(file.clone())?,
            SourceSpec::File(path) => {
                let path = self.resolve(path);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let file: SourceFile = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                make_source(file.symbols, file.pmf)?
            }
            SourceSpec::QuantizedGaussian {
                mean,
                std,
                points,
                half_width_stds,
            } => quantized_gaussian_source(*mean, *std, *points, *half_width_stds)?,
        };
        match self.product_order {
            Some(t) if t > 1 => product_source(&base, t),
            _ => Ok(base),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"source": {"inline": {"symbols": [[0],[1]], "pmf": [0.5,0.5]}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.distortion, DistortionKind::SquaredError);
        assert_eq!(cfg.entropic.lambda.values().len(), 61);
        assert_eq!(cfg.build_source().unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"source": {"inline": {"symbols": [[0]], "pmf": [1]}}, "sed": 1}"#,
            r#"{"source": {"inline": {"symbols": [[0]], "pmf": [1]}}, "ba": {"tolerance": 1}}"#,
            r#"{"source": {"inline": {"symbols": [[0]], "pmf": [1], "x": 2}}}"#,
        ] {
            assert!(
                matches!(RunConfig::from_json(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn exactly_one_source() {
        assert!(RunConfig::from_json("{}").is_err());
        let two = r#"{"source": {"inline": {"symbols": [[0]], "pmf": [1]}, "file": "a.json"}}"#;
        assert!(RunConfig::from_json(two).is_err());
    }

    #[test]
    fn schedules_are_validated() {
        let bad =
            r#"{"source": {"quantized_gaussian": {"points": 5}}, "ba": {"beta": {"values": []}}}"#;
        assert!(RunConfig::from_json(bad).is_err());
        let bad = r#"{"source": {"quantized_gaussian": {"points": 5}}, "dal": {"lambda": {"values": [2, 1]}}}"#;
        assert!(RunConfig::from_json(bad).is_err());
        let ok = r#"{"source": {"quantized_gaussian": {"points": 5}},
                     "ba": {"beta": {"log_spaced": {"lo": 0.1, "hi": 10, "count": 3, "include_zero": false}},
                            "reconstruction": {"grid": {"points": 9}}, "refine_rounds": 2}}"#;
        let cfg = RunConfig::from_json(ok).unwrap();
        assert_eq!(cfg.ba.beta.values().len(), 3);
        assert_eq!(
            cfg.ba.alphabet(&cfg.build_source().unwrap()).unwrap().len(),
            9
        );
    }

    #[test]
    fn refinement_needs_squared_error() {
        let bad = r#"{"source": {"quantized_gaussian": {"points": 5}}, "distortion": "hamming", "ba": {"refine_rounds": 1}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }

    #[test]
    fn file_source_resolves_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("src.json"),
            r#"{"symbols": [[0],[2]], "pmf": [0.25, 0.75]}"#,
        )
        .unwrap();
        let cfg_path = dir.path().join("run.json");
        fs::write(
            &cfg_path,
            r#"{"source": {"file": "src.json"}, "product_order": 2}"#,
        )
        .unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        let src = cfg.build_source().unwrap();
        assert_eq!(src.len(), 4);
        assert_eq!(src.block_len(), 2);
        assert_eq!(cfg.output_dir(), dir.path().join("out"));
    }
}
