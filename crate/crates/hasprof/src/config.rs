//! TOML run configuration and session script files.
//!
//! Run configuration (every key optional, defaults shown):
//!
//! ```toml
//! [features]
//! sampling_period_s = 1.0
//! windows_s = [1, 5, 10, 20]
//! iat_threshold_s = 0.1
//! ul_size_threshold_bytes = 100
//!
//! [model]
//! kind = "forest"        # forest | tree | knn
//! n_trees = 30
//! # mtry = 5             # features tried per node; default ceil(sqrt(M))
//! # max_depth = 12
//! min_leaf = 1
//! knn_k = 1
//! seed = 24301
//!
//! [eval]
//! k = 10
//! seed = 24301
//! repetitions = 100      # benchmark repetitions
//!
//! [corpus]
//! scenarios = ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"]
//! presets = ["low", "medium", "high"]
//! reps = 10
//! downloads = 0
//! webs = 0
//! seed = 24301
//! ```
//!
//! Session script (see [`ScriptFile`]):
//!
//! ```toml
//! name = "custom"
//! video_duration_s = 300
//! segment_duration_s = 5
//! buffer_target_s = 120
//! vbr_sigma = 0.2
//! seed = 7
//! quality = "auto"       # or "fixed"
//! initial = "480p"
//! switches = []          # fixed mode only: [{ at_s = 150, quality = "360p" }]
//!
//! [[rate]]
//! at_s = 0               # no `kbps` key means unlimited
//! [[rate]]
//! at_s = 150
//! kbps = 500
//! ```

use std::path::Path;

use hasprof_core::learn::{ForestParams, KnnParams, TreeParams};
use hasprof_core::sim::{
    CorpusConfig, HasParams, NetworkProfile, QualityLadder, QualityMode, Rate, Representation, ScenarioId,
    SessionScript, VbrPreset, DEFAULT_LINK_RATE,
};
use hasprof_core::{ModelSpec, Nanos, WindowConfig};
use serde::Deserialize;

use crate::error::{io_err, Error, Result};

/// Seed used wherever none is given.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub features: FeatureSection,
    pub model: ModelSection,
    pub eval: EvalSection,
    pub corpus: CorpusSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub sampling_period_s: f64,
    pub windows_s: Vec<f64>,
    pub iat_threshold_s: f64,
    pub ul_size_threshold_bytes: u32,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            sampling_period_s: 1.0,
            windows_s: vec![1.0, 5.0, 10.0, 20.0],
            iat_threshold_s: 0.1,
            ul_size_threshold_bytes: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "forest".into(),
            n_trees: 30,
            mtry: None,
            max_depth: None,
            min_leaf: 1,
            knn_k: 1,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { k: 10, seed: DEFAULT_SEED, repetitions: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub scenarios: Vec<String>,
    pub presets: Vec<String>,
    pub reps: u32,
    pub downloads: u32,
    pub webs: u32,
    pub seed: u64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            scenarios: ScenarioId::ALL.iter().map(|s| s.name().to_string()).collect(),
            presets: VbrPreset::ALL.iter().map(|p| p.name().to_string()).collect(),
            reps: 10,
            downloads: 0,
            webs: 0,
            seed: DEFAULT_SEED,
        }
    }
}

fn secs(v: f64, what: &str) -> Result<Nanos> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Invalid(format!("{what} must be a non-negative number of seconds")));
    }
    Ok(Nanos::from_secs_f64(v))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| Error::Config { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn window(&self) -> Result<WindowConfig> {
        let f = &self.features;
        let cfg = WindowConfig {
            sampling_period: secs(f.sampling_period_s, "sampling_period_s")?,
            windows: f.windows_s.iter().map(|&w| secs(w, "windows_s")).collect::<Result<_>>()?,
            iat_threshold: secs(f.iat_threshold_s, "iat_threshold_s")?,
            ul_size_threshold: f.ul_size_threshold_bytes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        model_spec(&self.model.kind, &self.model)
    }

    pub fn corpus(&self) -> Result<CorpusConfig> {
        let c = &self.corpus;
        Ok(CorpusConfig {
            scenarios: c.scenarios.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
            presets: c.presets.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
            reps: c.reps,
            downloads: c.downloads,
            webs: c.webs,
            seed: c.seed,
        })
    }
}

/// Builds the learner named `kind` with hyper-parameters from `m`.
pub fn model_spec(kind: &str, m: &ModelSection) -> Result<ModelSpec> {
    Ok(match kind {
        "forest" => ModelSpec::Forest(ForestParams {
            n_trees: m.n_trees,
            feature_subsample: m.mtry,
            max_depth: m.max_depth,
            min_leaf: m.min_leaf,
            seed: m.seed,
            ..ForestParams::default()
        }),
        "tree" => ModelSpec::Tree(TreeParams {
            max_depth: m.max_depth,
            min_leaf: m.min_leaf,
            feature_subsample: m.mtry,
            seed: m.seed,
        }),
        "knn" => ModelSpec::Knn(KnnParams { k: m.knn_k }),
        other => return Err(Error::Invalid(format!("unknown model kind `{other}` (forest, tree or knn)"))),
    })
}

/// A session script as written in a TOML file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub video_duration_s: f64,
    #[serde(default = "default_segment")]
    pub segment_duration_s: f64,
    #[serde(default = "default_target")]
    pub buffer_target_s: f64,
    #[serde(default = "default_sigma")]
    pub vbr_sigma: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// `auto` or `fixed`.
    pub quality: String,
    pub initial: String,
    #[serde(default)]
    pub switches: Vec<SwitchLine>,
    #[serde(default)]
    pub link_rate_kbps: Option<f64>,
    pub rate: Vec<RateLine>,
    /// Defaults to the standard 144p..1080p ladder.
    #[serde(default)]
    pub ladder: Vec<LadderLine>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchLine {
    pub at_s: f64,
    pub quality: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLine {
    pub at_s: f64,
    pub kbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderLine {
    pub name: String,
    pub kbps: f64,
}

fn default_name() -> String {
    "custom".into()
}
fn default_segment() -> f64 {
    5.0
}
fn default_target() -> f64 {
    120.0
}
fn default_sigma() -> f64 {
    0.2
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| Error::Config { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn to_script(&self) -> Result<SessionScript> {
        let ladder = if self.ladder.is_empty() {
            QualityLadder::standard()
        } else {
            QualityLadder::new(
                self.ladder.iter().map(|l| Representation { name: l.name.clone(), bitrate: l.kbps * 1e3 }).collect(),
            )?
        };
        let rep = |name: &str| {
            ladder.index_of(name).ok_or_else(|| Error::Invalid(format!("quality `{name}` is not in the ladder")))
        };
        let initial = rep(&self.initial)?;
        let quality = match self.quality.as_str() {
            "auto" if self.switches.is_empty() => QualityMode::Auto { initial },
            "auto" => return Err(Error::Invalid("quality switches need quality = \"fixed\"".into())),
            "fixed" => QualityMode::Fixed {
                initial,
                switches: self.switches.iter().map(|s| Ok((s.at_s, rep(&s.quality)?))).collect::<Result<_>>()?,
            },
            other => return Err(Error::Invalid(format!("quality must be `auto` or `fixed`, not `{other}`"))),
        };
        let steps =
            self.rate.iter().map(|r| (r.at_s, r.kbps.map_or(Rate::Unlimited, |k| Rate::Limited(k * 1e3)))).collect();
        let link = self.link_rate_kbps.map_or(DEFAULT_LINK_RATE, |k| k * 1e3);
        let script = SessionScript {
            scenario: self.name.clone(),
            ladder,
            profile: NetworkProfile::new(steps, link)?,
            quality,
            video_duration_s: self.video_duration_s,
            segment_duration_s: self.segment_duration_s,
            buffer_target_s: self.buffer_target_s,
            vbr_sigma: self.vbr_sigma,
            seed: self.seed,
            params: HasParams::default(),
        };
        script.validate()?;
        Ok(script)
    }
}
