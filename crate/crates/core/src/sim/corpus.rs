//! Scenario grids: which traces to generate, their seeds, and the merged
//! feature dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::has::simulate_has;
use super::nonhas::{simulate_download, simulate_web};
use super::profile::{NetworkProfile, Rate};
use super::scenarios::{has_script, ScenarioId, VbrPreset};
use super::SimError;
use crate::dataset::Dataset;
use crate::features::{extract_samples, FeatureError, WindowConfig};
use crate::labels::{LabelError, LabelIndex, Task};
use crate::trace::LabeledTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceSpec {
    Has { scenario: ScenarioId, preset: VbrPreset, rep: u32 },
    Download { rep: u32 },
    Web { rep: u32 },
}

impl TraceSpec {
    /// Scenario tag carried into dataset rows.
    pub fn scenario(&self) -> &'static str {
        match self {
            TraceSpec::Has { scenario, .. } => scenario.name(),
            TraceSpec::Download { .. } => "download",
            TraceSpec::Web { .. } => "web",
        }
    }

    pub fn trace_id(&self) -> String {
        match self {
            TraceSpec::Has { scenario, preset, rep } => format!("{scenario}-{preset}-r{rep:02}"),
            TraceSpec::Download { rep } => format!("download-r{rep:02}"),
            TraceSpec::Web { rep } => format!("web-r{rep:02}"),
        }
    }

    pub fn is_has(&self) -> bool {
        matches!(self, TraceSpec::Has { .. })
    }

    /// Seed of this run under corpus seed `base`; distinct specs get
    /// unrelated seeds.
    pub fn seed(&self, base: u64) -> u64 {
        let (kind, a, b, rep) = match *self {
            TraceSpec::Has { scenario, preset, rep } => (0u64, scenario as u64, preset as u64, rep),
            TraceSpec::Download { rep } => (1, 0, 0, rep),
            TraceSpec::Web { rep } => (2, 0, 0, rep),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        rng.set_stream(kind << 48 | a << 40 | b << 32 | u64::from(rep));
        rng.random()
    }
}

/// Runs one trace of the grid.
pub fn simulate_spec(spec: &TraceSpec, base_seed: u64) -> Result<LabeledTrace, SimError> {
    let seed = spec.seed(base_seed);
    let mut trace = match *spec {
        TraceSpec::Has { scenario, preset, .. } => simulate_has(&has_script(scenario, preset, seed))?.trace,
        TraceSpec::Download { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let rate =
                if rng.random_bool(0.3) { Rate::Unlimited } else { Rate::Limited(rng.random_range(0.5e6..10e6)) };
            simulate_download(rng.random_range(60.0..240.0), &NetworkProfile::constant(rate), seed)?
        }
        TraceSpec::Web { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            simulate_web(rng.random_range(120.0..400.0), &NetworkProfile::constant(Rate::Unlimited), seed)?
        }
    };
    trace.meta.trace_id = spec.trace_id();
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub scenarios: Vec<ScenarioId>,
    pub presets: Vec<VbrPreset>,
    pub reps: u32,
    pub downloads: u32,
    pub webs: u32,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            scenarios: ScenarioId::ALL.to_vec(),
            presets: VbrPreset::ALL.to_vec(),
            reps: 10,
            downloads: 0,
            webs: 0,
            seed: 0x5eed,
        }
    }
}

impl CorpusConfig {
    /// Every trace of the grid in a fixed order: scenario, preset, repetition,
    /// then downloads and browsing sessions.
    pub fn specs(&self) -> Vec<TraceSpec> {
        let mut out = Vec::new();
        for &scenario in &self.scenarios {
            for &preset in &self.presets {
                for rep in 0..self.reps {
                    out.push(TraceSpec::Has { scenario, preset, rep });
                }
            }
        }
        out.extend((0..self.downloads).map(|rep| TraceSpec::Download { rep }));
        out.extend((0..self.webs).map(|rep| TraceSpec::Web { rep }));
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Feature rows of one trace for `task`, tagged with the trace's scenario.
pub fn trace_samples(trace: &LabeledTrace, task: Task, window: &WindowConfig) -> Result<Dataset, CorpusError> {
    let index = LabelIndex::new(&trace.labels)?;
    let tag = trace.meta.scenario.as_deref();
    Ok(extract_samples(&trace.packets, trace.meta.client_ip, &index, task, window, tag)?)
}

/// Simulates the grid one trace at a time and merges the rows. The buffer
/// task skips non-streaming traces, which carry no buffer labels.
pub fn build_dataset(cfg: &CorpusConfig, task: Task, window: &WindowConfig) -> Result<Dataset, CorpusError> {
    let mut ds = Dataset::new(window.feature_names(), task.class_names().iter().copied());
    for spec in cfg.specs() {
        if task == Task::Buffer && !spec.is_has() {
            continue;
        }
        let trace = simulate_spec(&spec, cfg.seed)?;
        ds.append(&trace_samples(&trace, task, window)?)?;
    }
    Ok(ds)
}
