//! Sliding-window features.
//!
//! For every sampling instant `t_w = k * T_s` and every window duration `T_w`
//! the five per-window features are computed over the half-open interval
//! `[t_w - T_w, t_w)`:
//!
//! | name        | value                                                        |
//! |-------------|--------------------------------------------------------------|
//! | `DLrate`    | `8 * sum(downlink payload) / T_w` in bit/s                   |
//! | `DLload`    | `sum(downlink IAT <= h_t) / T_w`, capped at 1                |
//! | `ULnPckts`  | number of uplink packets with payload `> h_s`                |
//! | `ULavgSize` | mean payload of those uplink packets                         |
//! | `ULstdSize` | population standard deviation of those payloads              |
//!
//! Windows reaching before the trace start are zero-padded: the denominator
//! stays `T_w`. A downlink packet's IAT is measured to the previous downlink
//! packet of the flow even when that one lies before the window.
//!
//! Two routes compute the same numbers: [`feature_vector`] scans a
//! [`FlowState`] history, [`StreamingExtractor`] keeps per-period buckets and
//! emits vectors as time advances.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;
use core::ops::AddAssign;

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::labels::{LabelIndex, Task};
use crate::packet::{direction_of, Direction, FlowKey, FlowState, PacketError, PacketRecord};
use crate::time::Nanos;

pub const FEATURES_PER_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("invalid window configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    DlRate,
    DlLoad,
    UlNPckts,
    UlAvgSize,
    UlStdSize,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; FEATURES_PER_WINDOW] = [
        FeatureKind::DlRate,
        FeatureKind::DlLoad,
        FeatureKind::UlNPckts,
        FeatureKind::UlAvgSize,
        FeatureKind::UlStdSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::DlRate => "DLrate",
            FeatureKind::DlLoad => "DLload",
            FeatureKind::UlNPckts => "ULnPckts",
            FeatureKind::UlAvgSize => "ULavgSize",
            FeatureKind::UlStdSize => "ULstdSize",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Sampling period, window durations and the two thresholds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowConfig {
    pub sampling_period: Nanos,
    /// Strictly increasing, each a positive multiple of the sampling period.
    pub windows: Vec<Nanos>,
    /// IATs above this do not count towards `DLload`.
    pub iat_threshold: Nanos,
    /// Uplink packets at or below this many bytes are ignored (ACKs).
    pub ul_size_threshold: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            sampling_period: Nanos::from_secs(1),
            windows: [1, 5, 10, 20].into_iter().map(Nanos::from_secs).collect(),
            iat_threshold: Nanos::from_millis(100),
            ul_size_threshold: 100,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        let ts = self.sampling_period;
        if ts == Nanos::ZERO {
            return bad("sampling period must be positive".into());
        }
        if self.windows.is_empty() {
            return bad("at least one window duration is required".into());
        }
        for w in &self.windows {
            if *w == Nanos::ZERO || w.0 % ts.0 != 0 {
                return bad(format!("window {w}s is not a positive multiple of the sampling period {ts}s"));
            }
        }
        if self.windows.windows(2).any(|p| p[0] >= p[1]) {
            return bad("window durations must be strictly increasing".into());
        }
        if self.iat_threshold >= ts {
            return bad(format!("IAT threshold {}s must be below the sampling period", self.iat_threshold));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        FEATURES_PER_WINDOW * self.windows.len()
    }

    pub fn max_window(&self) -> Nanos {
        self.windows.last().copied().unwrap_or(Nanos::ZERO)
    }

    /// Column names `<feature>_<T_w>s`, window-major.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_features());
        for w in &self.windows {
            for k in FeatureKind::ALL {
                names.push(format!("{}_{}s", k.name(), w));
            }
        }
        names
    }

    fn window_periods(&self) -> impl Iterator<Item = u64> + '_ {
        self.windows.iter().map(|w| w.0 / self.sampling_period.0)
    }
}

/// Integer aggregates of one window; all feature values derive from these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowSums {
    pub dl_bytes: u64,
    /// Sum of downlink IATs at or below the threshold, in nanoseconds.
    pub dl_busy: u64,
    pub ul_count: u64,
    pub ul_bytes: u64,
    pub ul_bytes_sq: u128,
}

impl AddAssign for WindowSums {
    fn add_assign(&mut self, o: WindowSums) {
        self.dl_bytes += o.dl_bytes;
        self.dl_busy += o.dl_busy;
        self.ul_count += o.ul_count;
        self.ul_bytes += o.ul_bytes;
        self.ul_bytes_sq += o.ul_bytes_sq;
    }
}

impl WindowSums {
    fn add_downlink(&mut self, size: u32, iat: Option<Nanos>, iat_threshold: Nanos) {
        self.dl_bytes += u64::from(size);
        if let Some(iat) = iat.filter(|d| *d <= iat_threshold) {
            self.dl_busy += iat.0;
        }
    }

    fn add_uplink(&mut self, size: u32, size_threshold: u32) {
        if size > size_threshold {
            self.ul_count += 1;
            self.ul_bytes += u64::from(size);
            self.ul_bytes_sq += u128::from(size) * u128::from(size);
        }
    }

    pub fn dl_rate(&self, window: Nanos) -> f64 {
        8.0 * self.dl_bytes as f64 / window.as_secs_f64()
    }

    /// Uncapped busy fraction; can exceed 1 by at most one IAT over the window
    /// because the first packet's IAT may reach back past the window start.
    pub fn dl_load_raw(&self, window: Nanos) -> f64 {
        self.dl_busy as f64 / window.0 as f64
    }

    pub fn dl_load(&self, window: Nanos) -> f64 {
        self.dl_load_raw(window).min(1.0)
    }

    pub fn ul_stats(&self) -> (f64, f64) {
        if self.ul_count == 0 {
            return (0.0, 0.0);
        }
        let n = u128::from(self.ul_count);
        let s = u128::from(self.ul_bytes);
        let mean = self.ul_bytes as f64 / self.ul_count as f64;
        // n * sum(x^2) - (sum x)^2 >= 0 exactly in integers
        let num = n * self.ul_bytes_sq - s * s;
        let std = libm::sqrt(num as f64) / self.ul_count as f64;
        (mean, std)
    }

    pub fn write_features(&self, window: Nanos, out: &mut [f64]) {
        let (avg, std) = self.ul_stats();
        out[0] = self.dl_rate(window);
        out[1] = self.dl_load(window);
        out[2] = self.ul_count as f64;
        out[3] = avg;
        out[4] = std;
    }
}

/// Window sums over the stored history of `flow` for `[t_w - T_w, t_w)`,
/// clipped at time zero.
pub fn window_sums(flow: &FlowState, t_w: Nanos, window: Nanos, cfg_iat: Nanos, cfg_size: u32) -> WindowSums {
    let range = flow.window_range(t_w.saturating_sub(window), t_w);
    let mut sums = WindowSums::default();
    let mut prev_dl = flow.previous_dl_time(range.start);
    for p in flow.packets().range(range) {
        match p.direction {
            Direction::Downlink => {
                sums.add_downlink(p.payload_size, prev_dl.map(|q| p.time - q), cfg_iat);
                prev_dl = Some(p.time);
            }
            Direction::Uplink => sums.add_uplink(p.payload_size, cfg_size),
        }
    }
    sums
}

/// Downlink rate in bit/s over `[t_w - T_w, t_w)`.
pub fn dl_rate(flow: &FlowState, t_w: Nanos, window: Nanos) -> f64 {
    window_sums(flow, t_w, window, Nanos::ZERO, u32::MAX).dl_rate(window)
}

/// Fraction of the window spent in downlink transmission.
pub fn dl_load(flow: &FlowState, t_w: Nanos, window: Nanos, iat_threshold: Nanos) -> f64 {
    window_sums(flow, t_w, window, iat_threshold, u32::MAX).dl_load(window)
}

/// Number of uplink packets larger than `size_threshold` bytes.
pub fn ul_n_pckts(flow: &FlowState, t_w: Nanos, window: Nanos, size_threshold: u32) -> u64 {
    window_sums(flow, t_w, window, Nanos::ZERO, size_threshold).ul_count
}

/// Mean and population standard deviation of the counted uplink payloads.
pub fn ul_size_stats(flow: &FlowState, t_w: Nanos, window: Nanos, size_threshold: u32) -> (f64, f64) {
    window_sums(flow, t_w, window, Nanos::ZERO, size_threshold).ul_stats()
}

/// M = 5L features at instant `t_w`, window-major in ascending duration.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub t_w: Nanos,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, window_idx: usize, kind: FeatureKind) -> f64 {
        self.values[window_idx * FEATURES_PER_WINDOW + kind as usize]
    }
}

pub fn feature_vector(flow: &FlowState, t_w: Nanos, cfg: &WindowConfig) -> FeatureVector {
    let mut values = alloc::vec![0.0; cfg.n_features()];
    for (i, w) in cfg.windows.iter().enumerate() {
        let sums = window_sums(flow, t_w, *w, cfg.iat_threshold, cfg.ul_size_threshold);
        sums.write_features(*w, &mut values[i * FEATURES_PER_WINDOW..(i + 1) * FEATURES_PER_WINDOW]);
    }
    FeatureVector { t_w, values }
}

#[derive(Debug, Clone, Copy, Default)]
struct Bucket {
    index: u64,
    sums: WindowSums,
}

#[derive(Debug, Clone)]
struct FlowWindows {
    // Non-empty periods only, ascending; at most `max_periods` old.
    buckets: VecDeque<Bucket>,
    last_dl_time: Option<Nanos>,
}

/// One emitted sample: features of `flow` for the period ending at `features.t_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub flow: FlowKey,
    pub features: FeatureVector,
}

/// Incremental extractor over a time-ordered packet stream.
///
/// Emits a feature vector for a flow at instant `t_w` once the stream has
/// moved past `t_w` and only if the flow saw at least one packet in
/// `[t_w - T_s, t_w)`. Emissions come out ordered by `(t_w, flow)`.
#[derive(Debug, Clone)]
pub struct StreamingExtractor {
    cfg: WindowConfig,
    client_ip: Ipv4Addr,
    max_periods: u64,
    flows: BTreeMap<FlowKey, FlowWindows>,
    // (instant index k, flow) whose period k-1 is non-empty and not yet emitted
    pending: BTreeSet<(u64, FlowKey)>,
    last_time: Option<Nanos>,
}

impl StreamingExtractor {
    pub fn new(cfg: WindowConfig, client_ip: Ipv4Addr) -> Result<Self, FeatureError> {
        cfg.validate()?;
        let max_periods = cfg.max_window().0 / cfg.sampling_period.0;
        Ok(StreamingExtractor {
            cfg,
            client_ip,
            max_periods,
            flows: BTreeMap::new(),
            pending: BTreeSet::new(),
            last_time: None,
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.cfg
    }

    fn period_of(&self, t: Nanos) -> u64 {
        t.0 / self.cfg.sampling_period.0
    }

    /// Feeds one packet; returns samples completed strictly before it.
    pub fn push(&mut self, p: &PacketRecord) -> Result<Vec<Emission>, FeatureError> {
        p.validate()?;
        if let Some(last) = self.last_time {
            if p.time < last {
                return Err(PacketError::OutOfOrderPacket { time: p.time, last }.into());
            }
        }
        let direction = direction_of(p, self.client_ip)?;
        let out = self.advance_to(p.time);
        self.last_time = Some(p.time);

        let period = self.period_of(p.time);
        let key = p.flow_key();
        let iat_threshold = self.cfg.iat_threshold;
        let size_threshold = self.cfg.ul_size_threshold;
        let max_periods = self.max_periods;
        let flow =
            self.flows.entry(key).or_insert_with(|| FlowWindows { buckets: VecDeque::new(), last_dl_time: None });
        if flow.buckets.back().is_none_or(|b| b.index != period) {
            flow.buckets.push_back(Bucket { index: period, sums: WindowSums::default() });
            self.pending.insert((period + 1, key));
            while flow.buckets.front().is_some_and(|b| b.index + max_periods <= period) {
                flow.buckets.pop_front();
            }
        }
        let bucket = &mut flow.buckets.back_mut().expect("bucket just ensured").sums;
        match direction {
            Direction::Downlink => {
                bucket.add_downlink(p.payload_size, flow.last_dl_time.map(|q| p.time - q), iat_threshold);
                flow.last_dl_time = Some(p.time);
            }
            Direction::Uplink => bucket.add_uplink(p.payload_size, size_threshold),
        }
        Ok(out)
    }

    /// Emits every pending sample whose instant is at or before `t`.
    pub fn advance_to(&mut self, t: Nanos) -> Vec<Emission> {
        let mut out = Vec::new();
        while let Some(&(k, key)) = self.pending.first() {
            if k * self.cfg.sampling_period.0 > t.0 {
                break;
            }
            self.pending.pop_first();
            out.push(self.emit(k, key));
        }
        out
    }

    /// Emits everything still pending.
    pub fn finish(&mut self) -> Vec<Emission> {
        let mut out = Vec::with_capacity(self.pending.len());
        while let Some((k, key)) = self.pending.pop_first() {
            out.push(self.emit(k, key));
        }
        out
    }

    fn emit(&self, k: u64, key: FlowKey) -> Emission {
        let flow = &self.flows[&key];
        let mut values = alloc::vec![0.0; self.cfg.n_features()];
        for (i, (n, w)) in self.cfg.window_periods().zip(&self.cfg.windows).enumerate() {
            let first = k.saturating_sub(n);
            let mut sums = WindowSums::default();
            for b in flow.buckets.iter().filter(|b| b.index >= first && b.index < k) {
                sums += b.sums;
            }
            sums.write_features(*w, &mut values[i * FEATURES_PER_WINDOW..(i + 1) * FEATURES_PER_WINDOW]);
        }
        Emission { flow: key, features: FeatureVector { t_w: Nanos(k * self.cfg.sampling_period.0), values } }
    }
}

/// Builds a labeled dataset from one trace.
///
/// One row per flow and non-empty sampling period; the label is the one
/// covering the middle of the period. Unlabeled periods are dropped.
pub fn extract_samples(
    packets: &[PacketRecord],
    client_ip: Ipv4Addr,
    labels: &LabelIndex,
    task: Task,
    cfg: &WindowConfig,
    scenario: Option<&str>,
) -> Result<Dataset, FeatureError> {
    let mut ds = Dataset::new(cfg.feature_names(), task.class_names().iter().copied());
    let mut ex = StreamingExtractor::new(cfg.clone(), client_ip)?;
    let half = Nanos(cfg.sampling_period.0 / 2);
    let add = |ds: &mut Dataset, emissions: Vec<Emission>| -> Result<(), FeatureError> {
        for e in emissions {
            let mid = e.features.t_w - cfg.sampling_period + half;
            if let Some(label) = labels.lookup(e.flow, task, mid) {
                ds.push(&e.features.values, label.code(), scenario)?;
            }
        }
        Ok(())
    };
    for p in packets {
        let done = ex.push(p)?;
        add(&mut ds, done)?;
    }
    let rest = ex.finish();
    add(&mut ds, rest)?;
    Ok(ds)
}
