//! The eight streaming scenarios and three content presets.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::has::{HasParams, QualityMode, SessionScript};
use super::ladder::QualityLadder;
use super::profile::{NetworkProfile, Rate, DEFAULT_LINK_RATE};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::S1,
        ScenarioId::S2,
        ScenarioId::S3,
        ScenarioId::S4,
        ScenarioId::S5,
        ScenarioId::S6,
        ScenarioId::S7,
        ScenarioId::S8,
    ];

    pub fn name(self) -> &'static str {
        ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"][self as usize]
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        ScenarioId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| SimError::UnknownScenario(s.to_string()))
    }
}

/// Content stand-ins: per-segment size variability and clip length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VbrPreset {
    /// Talk-show-like, little motion.
    Low,
    /// Documentary-like.
    Medium,
    /// Action-movie-like.
    High,
}

impl VbrPreset {
    pub const ALL: [VbrPreset; 3] = [VbrPreset::Low, VbrPreset::Medium, VbrPreset::High];

    pub fn name(self) -> &'static str {
        ["low", "medium", "high"][self as usize]
    }

    pub fn sigma(self) -> f64 {
        [0.1, 0.2, 0.3][self as usize]
    }

    pub fn video_duration_s(self) -> f64 {
        [559.0, 561.0, 734.0][self as usize]
    }
}

impl fmt::Display for VbrPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VbrPreset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        VbrPreset::ALL.iter().copied().find(|p| p.name() == s).ok_or_else(|| SimError::UnknownScenario(s.to_string()))
    }
}

/// Rates of the staircase in `s6`, applied every 40 s from t = 120 s.
pub const S6_STEPS_BPS: [f64; 9] = [4000e3, 3000e3, 2100e3, 1000e3, 750e3, 1000e3, 2100e3, 3000e3, 5000e3];

/// Builds the session script of one scenario run. `seed` drives both the
/// scenario's random times and rate jitter and the session itself.
pub fn has_script(id: ScenarioId, preset: VbrPreset, seed: u64) -> SessionScript {
    let ladder = QualityLadder::standard();
    let idx = |name: &str| ladder.index_of(name).expect("standard ladder");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let t0 = f64::from(rng.random_range(120_000..=240_000u32)) / 1000.0;
    // every throttled rate is perturbed by up to 5 % per run
    let mut lim = |bps: f64| Rate::Limited(bps * rng.random_range(0.95..1.05));
    let video = preset.video_duration_s();
    let auto = QualityMode::Auto { initial: idx("480p") };
    let (quality, steps) = match id {
        ScenarioId::S1 => {
            (QualityMode::Fixed { initial: idx("480p"), switches: Vec::new() }, vec![(0.0, Rate::Unlimited)])
        }
        ScenarioId::S2 => {
            (QualityMode::Fixed { initial: idx("720p"), switches: Vec::new() }, vec![(0.0, Rate::Unlimited)])
        }
        ScenarioId::S3 => (
            QualityMode::Fixed { initial: idx("720p"), switches: vec![(t0, idx("480p"))] },
            vec![(0.0, Rate::Unlimited)],
        ),
        ScenarioId::S4 => {
            let r = lim(500e3);
            (auto, vec![(0.0, Rate::Unlimited), (t0, r), (t0 + 150.0, Rate::Unlimited)])
        }
        ScenarioId::S5 => (auto, vec![(0.0, lim(1024e3))]),
        ScenarioId::S6 => {
            let mut steps = vec![(0.0, Rate::Unlimited)];
            for (i, &r) in S6_STEPS_BPS.iter().enumerate() {
                steps.push((120.0 + 40.0 * i as f64, lim(r)));
            }
            (auto, steps)
        }
        ScenarioId::S7 => {
            let mut steps = vec![(0.0, Rate::Unlimited), (120.0, lim(3000e3))];
            let mut n = 0.0;
            while 160.0 + 85.0 * n < video + 240.0 {
                steps.push((160.0 + 85.0 * n, lim(100e3)));
                steps.push((205.0 + 85.0 * n, lim(3000e3)));
                n += 1.0;
            }
            (auto, steps)
        }
        ScenarioId::S8 => (
            auto,
            vec![
                (0.0, Rate::Unlimited),
                (120.0, lim(100e3)),
                (180.0, Rate::Unlimited),
                (300.0, lim(100e3)),
                (380.0, Rate::Unlimited),
            ],
        ),
    };
    SessionScript {
        scenario: id.name().into(),
        ladder,
        profile: NetworkProfile::new(steps, DEFAULT_LINK_RATE).expect("scenario profiles are well formed"),
        quality,
        video_duration_s: video,
        segment_duration_s: 5.0,
        buffer_target_s: 120.0,
        vbr_sigma: preset.sigma(),
        seed,
        params: HasParams::default(),
    }
}
