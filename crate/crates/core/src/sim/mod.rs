//! Labeled traffic generator: a streaming client under scripted network
//! profiles, plus bulk downloads and web browsing.

mod corpus;
mod has;
mod ladder;
mod nonhas;
mod profile;
mod scenarios;
mod wire;

use alloc::string::String;
use core::net::Ipv4Addr;

use thiserror::Error;

pub use corpus::{build_dataset, simulate_spec, trace_samples, CorpusConfig, CorpusError, TraceSpec};
pub use has::{simulate_has, Activity, HasParams, HasRun, QualityMode, SegmentRecord, SessionScript, Span, HAS_SERVER};
pub use ladder::{QualityLadder, Representation};
pub use nonhas::{simulate_download, simulate_web, DOWNLOAD_SERVER, WEB_SERVER};
pub use profile::{NetworkProfile, Rate, DEFAULT_LINK_RATE};
pub use scenarios::{has_script, ScenarioId, VbrPreset, S6_STEPS_BPS};

/// Address of the simulated client in every generated trace.
pub const CLIENT_IP: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 2);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("unknown scenario or preset {0:?}")]
    UnknownScenario(String),
}
