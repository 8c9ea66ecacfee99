use alloc::string::String;
use alloc::vec::Vec;

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub name: String,
    /// Average encoding rate in bit/s.
    pub bitrate: f64,
}

/// Quality representations ordered by strictly increasing bitrate.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityLadder {
    reps: Vec<Representation>,
}

impl QualityLadder {
    pub fn new(reps: Vec<Representation>) -> Result<Self, SimError> {
        if reps.len() < 2 {
            return Err(SimError::InvalidScript("ladder needs at least two representations".into()));
        }
        if reps.iter().any(|r| !(r.bitrate > 0.0) || !r.bitrate.is_finite()) {
            return Err(SimError::InvalidScript("bitrates must be positive".into()));
        }
        if reps.windows(2).any(|w| w[1].bitrate <= w[0].bitrate) {
            return Err(SimError::InvalidScript("bitrates must be strictly increasing".into()));
        }
        Ok(QualityLadder { reps })
    }

    /// 144p to 1080p with average rates close to typical H.264 streaming encodes.
    pub fn standard() -> Self {
        let reps =
            [("144p", 150e3), ("240p", 300e3), ("360p", 550e3), ("480p", 1000e3), ("720p", 2300e3), ("1080p", 4300e3)]
                .iter()
                .map(|&(name, bitrate)| Representation { name: name.into(), bitrate })
                .collect();
        QualityLadder { reps }
    }

    pub fn reps(&self) -> &[Representation] {
        &self.reps
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn bitrate(&self, idx: usize) -> f64 {
        self.reps[idx].bitrate
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.reps.iter().position(|r| r.name == name)
    }

    /// Highest representation with bitrate at most `limit`, else the lowest.
    pub fn highest_within(&self, limit: f64) -> usize {
        self.reps.iter().rposition(|r| r.bitrate <= limit).unwrap_or(0)
    }
}
