//! Run configuration: one TOML file per reproducible run, overridable by flags.

use std::path::{Path, PathBuf};

use mvts_core::pipeline::{CsvSchema, SplitRatios, WindowSpec};
use mvts_core::sme::{solve_optimal_ms, DEFAULT_MS_TOLERANCE};
use mvts_core::{CodecParams, DecodeMode, ReferenceNetConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Excluded from the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub codec: CodecConfig,
    pub window: WindowConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub predictor: PredictorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Z-score every channel with training-split statistics before windowing.
    #[serde(default = "yes")]
    pub global_zscore: bool,
    #[serde(default = "yes")]
    pub channel_independent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    pub h: usize,
    pub ms: MsSetting,
}

/// A fixed maximum scale, or `"auto"` for the bound-minimizing one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MsSetting {
    Fixed(f64),
    Named(AutoMs),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoMs {
    Auto,
}

impl MsSetting {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(MsSetting::Named(AutoMs::Auto));
        }
        s.parse::<f64>()
            .map(MsSetting::Fixed)
            .map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }

    pub fn resolve(self, h: usize) -> Result<f64, CliError> {
        match self {
            MsSetting::Fixed(ms) => Ok(ms),
            MsSetting::Named(AutoMs::Auto) => Ok(solve_optimal_ms(h, DEFAULT_MS_TOLERANCE)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub lookback: usize,
    pub horizon: usize,
    #[serde(default = "one")]
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        SplitConfig {
            train: r.train,
            val: r.val,
            test: r.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Reference,
    Persistence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DecodeChoice {
    Argmax,
    Expectation,
}

impl From<DecodeChoice> for DecodeMode {
    fn from(d: DecodeChoice) -> Self {
        match d {
            DecodeChoice::Argmax => DecodeMode::Argmax,
            DecodeChoice::Expectation => DecodeMode::Expectation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_scale: f64,
    pub decode: DecodeChoice,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        let d = ReferenceNetConfig::new(1);
        PredictorConfig {
            kind: PredictorKind::Reference,
            hidden: d.hidden,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            init_scale: d.init_scale,
            decode: DecodeChoice::Argmax,
        }
    }
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

/// Flag overrides shared by the config-driven commands. Flags win over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub h: Option<usize>,
    /// Maximum scale, or "auto".
    #[arg(long, value_parser = MsSetting::parse)]
    pub ms: Option<MsSetting>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub decode: Option<DecodeChoice>,
}

/// Parsed config plus the values derived from it.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub data_path: PathBuf,
    pub params: CodecParams,
    pub spec: WindowSpec,
    pub ratios: SplitRatios,
    pub net: ReferenceNetConfig,
    pub digest: [u8; 32],
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::validation(format!("{}: {}", path.display(), e.message())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(self.seed, o.seed);
        if o.output_dir.is_some() {
            self.output_dir = o.output_dir.clone();
        }
        set!(self.data.path, o.data);
        set!(self.codec.h, o.h);
        set!(self.codec.ms, o.ms);
        set!(self.window.lookback, o.lookback);
        set!(self.window.horizon, o.horizon);
        set!(self.window.stride, o.stride);
        set!(self.predictor.kind, o.predictor);
        set!(self.predictor.hidden, o.hidden);
        set!(self.predictor.learning_rate, o.learning_rate);
        set!(self.predictor.epochs, o.epochs);
        set!(self.predictor.batch_size, o.batch_size);
        set!(self.predictor.decode, o.decode);
    }

    /// Canonical TOML of everything that affects results.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// Checks every field and derives codec, window and training settings.
    /// All problems are reported together, before any work starts.
    pub fn resolve(self, base: &Path) -> Result<Resolved, CliError> {
        let mut problems = Vec::new();
        if self.codec.h < 2 {
            problems.push(format!("codec.h must be >= 2, got {}", self.codec.h));
        }
        if let MsSetting::Fixed(ms) = self.codec.ms {
            if !(ms.is_finite() && ms > 0.0) {
                problems.push(format!("codec.ms must be positive, got {ms}"));
            }
        }
        let w = &self.window;
        if w.lookback == 0 || w.horizon == 0 || w.stride == 0 {
            problems.push("window.lookback, window.horizon and window.stride must be >= 1".into());
        }
        let s = &self.split;
        if [s.train, s.val, s.test].iter().any(|r| !(r.is_finite() && *r > 0.0)) || s.train + s.val + s.test > 1.0 + 1e-9 {
            problems.push(format!(
                "split ratios must be positive and sum to at most 1, got ({}, {}, {})",
                s.train, s.val, s.test
            ));
        }
        let p = &self.predictor;
        let net = ReferenceNetConfig {
            hidden: p.hidden,
            horizon: w.horizon,
            learning_rate: p.learning_rate,
            epochs: p.epochs,
            batch_size: p.batch_size,
            seed: self.seed,
            init_scale: p.init_scale,
        };
        if let Err(e) = net.validate() {
            problems.push(format!("predictor: {e}"));
        }
        if !problems.is_empty() {
            return Err(CliError::validation(problems.join("; ")));
        }

        let ms = self.codec.ms.resolve(self.codec.h)?;
        let params = CodecParams::new(self.codec.h, ms)?;
        let spec = WindowSpec::new(w.lookback, w.horizon, w.stride)?;
        let data_path = if self.data.path.is_absolute() {
            self.data.path.clone()
        } else {
            base.join(&self.data.path)
        };
        let digest = crate::output::digest(&self.canonical());
        Ok(Resolved {
            ratios: SplitRatios {
                train: s.train,
                val: s.val,
                test: s.test,
            },
            config: self,
            data_path,
            params,
            spec,
            net,
            digest,
        })
    }
}

impl Resolved {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            timestamp: self.config.data.timestamp,
            value_columns: self.config.data.columns.clone(),
        }
    }

    pub fn decode(&self) -> DecodeMode {
        self.config.predictor.decode.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [data]
        path = "x.csv"
        [codec]
        h = 50
        ms = "auto"
        [window]
        lookback = 8
        horizon = 4
    "#;

    #[test]
    fn defaults_and_auto_ms() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.predictor, PredictorConfig::default());
        assert!(cfg.data.global_zscore && cfg.data.channel_independent);
        let r = cfg.resolve(Path::new("/base")).unwrap();
        assert!((r.params.ms() - 2.29).abs() < 0.01);
        assert_eq!(r.data_path, Path::new("/base/x.csv"));
    }

    #[test]
    fn flags_win_and_output_dir_is_not_digested() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        let before = cfg.canonical();
        cfg.apply(&Overrides {
            output_dir: Some("elsewhere".into()),
            ..Default::default()
        });
        assert_eq!(cfg.canonical(), before);
        cfg.apply(&Overrides {
            ms: Some(MsSetting::Fixed(3.0)),
            epochs: Some(2),
            ..Default::default()
        });
        assert_eq!(cfg.codec.ms, MsSetting::Fixed(3.0));
        assert_eq!(cfg.predictor.epochs, 2);
        assert_ne!(cfg.canonical(), before);
        let back: RunConfig = toml::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back.canonical(), cfg.canonical());
    }

    #[test]
    fn all_problems_reported_together() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.codec.h = 1;
        cfg.window.horizon = 0;
        cfg.predictor.learning_rate = -1.0;
        let msg = cfg.resolve(Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("codec.h") && msg.contains("window") && msg.contains("predictor"), "{msg}");
    }

    #[test]
    fn partial_predictor_table_takes_defaults() {
        let cfg: RunConfig = toml::from_str(&format!("{MINIMAL}\n[predictor]\nkind = \"persistence\"")).unwrap();
        assert_eq!(cfg.predictor.kind, PredictorKind::Persistence);
        assert_eq!(cfg.predictor.hidden, PredictorConfig::default().hidden);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>(&format!("{MINIMAL}\n[extra]\nx = 1")).is_err());
    }
}
