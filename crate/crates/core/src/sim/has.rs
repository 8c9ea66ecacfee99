//! Event-driven HAS client: progressive play-back buffer, on-off request
//! regulation at the buffer target, throughput-driven ABR and exact state labels.

use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ladder::QualityLadder;
use super::profile::NetworkProfile;
use super::wire::Wire;
use super::{SimError, CLIENT_IP};
use crate::labels::{BufferState, Label, LabelInterval, ServiceClass};
use crate::packet::{Endpoint, FlowKey, Protocol};
use crate::time::Nanos;
use crate::trace::{LabeledTrace, TraceMeta};

pub const HAS_SERVER: Ipv4Addr = Ipv4Addr::new(172, 217, 0, 1);

#[derive(Debug, Clone, PartialEq)]
pub enum QualityMode {
    /// Pinned representation, optionally switched at scripted times.
    Fixed { initial: usize, switches: Vec<(f64, usize)> },
    /// Throughput-based adaptation starting from `initial`.
    Auto { initial: usize },
}

/// Client and packetization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct HasParams {
    /// Playback starts (and resumes after a stall) once this many segments
    /// are buffered.
    pub startup_segments: u32,
    /// Weight of the newest throughput sample in the EWMA.
    pub ewma_weight: f64,
    /// Upswitch to the highest representation within `safety * estimate`.
    pub safety: f64,
    /// Downswitch only when the estimate drops below this fraction of the
    /// current bitrate.
    pub downswitch_ratio: f64,
    /// Rate-to-bitrate band around 1 that separates filling and depleting.
    pub band: f64,
    /// Residual stretches shorter than this stay unlabeled.
    pub unclear_min_s: f64,
    pub request_bytes: (u32, u32),
    pub mss: u32,
    pub ack_bytes: u32,
    pub ack_every: u32,
}

impl Default for HasParams {
    fn default() -> Self {
        HasParams {
            startup_segments: 2,
            ewma_weight: 0.7,
            safety: 0.8,
            downswitch_ratio: 0.8,
            band: 0.2,
            unclear_min_s: 3.0,
            request_bytes: (600, 800),
            mss: 1400,
            ack_bytes: 52,
            ack_every: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScript {
    pub scenario: String,
    pub ladder: QualityLadder,
    pub profile: NetworkProfile,
    pub quality: QualityMode,
    pub video_duration_s: f64,
    pub segment_duration_s: f64,
    pub buffer_target_s: f64,
    /// Log-space standard deviation of the per-segment size factor.
    pub vbr_sigma: f64,
    pub seed: u64,
    pub params: HasParams,
}

impl SessionScript {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScript(m.into()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.video_duration_s) || !pos(self.segment_duration_s) || !pos(self.buffer_target_s) {
            return bad("durations must be positive");
        }
        if self.buffer_target_s < 2.0 * self.segment_duration_s {
            return bad("buffer target must be at least two segments");
        }
        if !(self.vbr_sigma >= 0.0) || !self.vbr_sigma.is_finite() {
            return bad("VBR sigma must be non-negative");
        }
        let n = self.ladder.len();
        match &self.quality {
            QualityMode::Fixed { initial, switches } => {
                if *initial >= n || switches.iter().any(|s| s.1 >= n || !(s.0 >= 0.0)) {
                    return bad("fixed quality refers to an unknown representation");
                }
            }
            QualityMode::Auto { initial } if *initial >= n => return bad("unknown initial representation"),
            QualityMode::Auto { .. } => {}
        }
        let p = &self.params;
        if p.startup_segments == 0 || p.mss == 0 || p.ack_every == 0 || p.request_bytes.0 > p.request_bytes.1 {
            return bad("invalid client parameters");
        }
        if !(p.ewma_weight > 0.0 && p.ewma_weight <= 1.0) || !(p.band > 0.0 && p.band < 1.0) || !pos(p.safety) {
            return bad("invalid adaptation parameters");
        }
        Ok(())
    }

    pub fn n_segments(&self) -> usize {
        libm::ceil(self.video_duration_s / self.segment_duration_s - 1e-9) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activity {
    Download {
        segment: usize,
        rep: usize,
        rate: f64,
        from_wake: bool,
    },
    /// Request regulation: buffer above `target - segment`, waiting.
    Idle,
    /// Everything downloaded, draining the buffer.
    Playout,
}

/// A stretch of simulated time over which rate, activity and playback do not
/// change, so the buffer moves linearly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub end: f64,
    pub buffer_start: f64,
    pub buffer_end: f64,
    pub playing: bool,
    pub activity: Activity,
    pub label: Option<BufferState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRecord {
    pub index: usize,
    pub rep: usize,
    pub bytes: u64,
    pub content_s: f64,
    pub request_time: f64,
    pub complete_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HasRun {
    pub trace: LabeledTrace,
    pub flow: FlowKey,
    pub spans: Vec<Span>,
    pub segments: Vec<SegmentRecord>,
}

const EPS: f64 = 1e-9;

struct Client<'s> {
    s: &'s SessionScript,
    t: f64,
    buffer: f64,
    playing: bool,
    rep: usize,
    ewma: Option<f64>,
    spans: Vec<Span>,
}

impl Client<'_> {
    fn choose_rep(&self) -> usize {
        let ladder = &self.s.ladder;
        match &self.s.quality {
            QualityMode::Fixed { initial, switches } => {
                switches.iter().rfind(|sw| sw.0 <= self.t).map_or(*initial, |sw| sw.1)
            }
            QualityMode::Auto { initial } => {
                let Some(est) = self.ewma else { return *initial };
                let p = &self.s.params;
                let up = ladder.highest_within(p.safety * est);
                if up > self.rep || est < p.downswitch_ratio * ladder.bitrate(self.rep) {
                    up
                } else {
                    self.rep
                }
            }
        }
    }

    fn span(&mut self, end: f64, slope: f64, activity: Activity) {
        let buffer_end = (self.buffer + slope * (end - self.t)).max(0.0);
        self.spans.push(Span {
            start: self.t,
            end,
            buffer_start: self.buffer,
            buffer_end,
            playing: self.playing,
            activity,
            label: None,
        });
        self.buffer = buffer_end;
        self.t = end;
    }

    /// Downloads one segment, splitting time at rate changes, playback start
    /// and stalls. Returns the completion time.
    fn download(&mut self, segment: usize, bits: f64, content: f64, from_wake: bool, start_threshold: f64) -> f64 {
        let profile = &self.s.profile;
        let mut left = bits;
        loop {
            if !self.playing && self.buffer >= start_threshold - EPS {
                self.playing = true;
            }
            let rate = profile.rate_at(self.t);
            let gain = rate * content / bits;
            let slope = gain - if self.playing { 1.0 } else { 0.0 };
            let done_at = self.t + left / rate;
            let mut next = done_at;
            if let Some(c) = profile.next_change(self.t) {
                next = next.min(c);
            }
            if !self.playing {
                next = next.min(self.t + (start_threshold - self.buffer) / gain);
            } else if slope < 0.0 {
                next = next.min(self.t + self.buffer / -slope);
            }
            let finished = next >= done_at;
            left -= rate * (next - self.t);
            self.span(next, slope, Activity::Download { segment, rep: self.rep, rate, from_wake });
            if self.playing && self.buffer <= EPS && !finished {
                self.playing = false;
                self.buffer = 0.0;
            }
            if finished {
                return self.t;
            }
        }
    }
}

/// Runs one streaming session.
pub fn simulate_has(script: &SessionScript) -> Result<HasRun, SimError> {
    script.validate()?;
    let p = &script.params;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let client_ep = Endpoint::new(CLIENT_IP, rng.random_range(49152..=65535));
    let server_ep = Endpoint::new(HAS_SERVER, 443);
    let mut wire = Wire::new(&script.profile, client_ep, server_ep, Protocol::Udp);
    wire.mss = p.mss;
    wire.ack_bytes = p.ack_bytes;
    wire.ack_every = p.ack_every;

    let seg_dur = script.segment_duration_s;
    let target = script.buffer_target_s;
    let start_threshold = (f64::from(p.startup_segments) * seg_dur).min(script.video_duration_s);
    let initial = match &script.quality {
        QualityMode::Fixed { initial, .. } | QualityMode::Auto { initial } => *initial,
    };
    let mut c = Client { s: script, t: 0.0, buffer: 0.0, playing: false, rep: initial, ewma: None, spans: Vec::new() };
    let mut segments = Vec::new();
    let mut from_wake = false;
    let sigma = script.vbr_sigma;

    for segment in 0..script.n_segments() {
        if c.playing && c.buffer > target - seg_dur + EPS {
            let wake = c.t + (c.buffer - (target - seg_dur));
            c.span(wake, -1.0, Activity::Idle);
            c.buffer = target - seg_dur;
            from_wake = true;
        }
        c.rep = c.choose_rep();
        let content = seg_dur.min(script.video_duration_s - segment as f64 * seg_dur);
        let z: f64 = rng.sample(StandardNormal);
        let factor = libm::exp(sigma * z - sigma * sigma / 2.0);
        let bytes = (libm::round(script.ladder.bitrate(c.rep) * content * factor / 8.0) as u64).max(1);
        let request_time = c.t;
        wire.uplink(request_time, rng.random_range(p.request_bytes.0..=p.request_bytes.1));
        let wire_done = wire.transfer(request_time, bytes);
        let done = c.download(segment, bytes as f64 * 8.0, content, from_wake, start_threshold);
        debug_assert!((wire_done - done).abs() < 1e-6, "{wire_done} vs {done}");
        let sample = bytes as f64 * 8.0 / (done - request_time);
        c.ewma = Some(match c.ewma {
            None => sample,
            Some(e) => p.ewma_weight * sample + (1.0 - p.ewma_weight) * e,
        });
        segments.push(SegmentRecord {
            index: segment,
            rep: c.rep,
            bytes,
            content_s: content,
            request_time,
            complete_time: done,
        });
        from_wake = false;
    }
    if c.buffer > 0.0 {
        c.playing = true;
        let end = c.t + c.buffer;
        c.span(end, -1.0, Activity::Playout);
    }

    let mut spans = c.spans;
    label_spans(&mut spans, script);
    let flow = FlowKey::new(client_ep, server_ep, Protocol::Udp);
    let packets = wire.finish();
    let last = packets.last().map_or(Nanos::ZERO, |p| p.time);
    let mut labels = vec_labels(&spans, flow);
    labels.push(LabelInterval {
        flow,
        start: Nanos::ZERO,
        end: last + Nanos::from_secs(1),
        label: Label::Service(ServiceClass::Has),
    });
    let mut meta = TraceMeta::new(CLIENT_IP, script.scenario.clone());
    meta.scenario = Some(script.scenario.clone());
    Ok(HasRun { trace: LabeledTrace { meta, packets, labels }, flow, spans, segments })
}

#[derive(Clone, Copy, PartialEq)]
enum Candidate {
    State(BufferState),
    Residual,
    Skip,
}

fn label_spans(spans: &mut [Span], script: &SessionScript) {
    let p = &script.params;
    let floor = script.buffer_target_s - script.segment_duration_s;
    // a download that starts at a regulator wake and ends at or above the wake
    // level keeps the on-off cycle going
    let mut completion = alloc::collections::BTreeMap::new();
    for s in spans.iter() {
        if let Activity::Download { segment, .. } = s.activity {
            completion.insert(segment, s.buffer_end);
        }
    }
    let mut started = false;
    let cands: Vec<Candidate> = spans
        .iter()
        .map(|s| {
            started |= s.playing;
            match s.activity {
                Activity::Idle => Candidate::State(BufferState::Steady),
                Activity::Playout => Candidate::Skip,
                Activity::Download { segment, rep, rate, from_wake } => {
                    if started && !s.playing {
                        return Candidate::Skip;
                    }
                    if from_wake && completion[&segment] >= floor - EPS {
                        return Candidate::State(BufferState::Steady);
                    }
                    let ratio = rate / script.ladder.bitrate(rep);
                    let rising = s.buffer_end >= s.buffer_start;
                    let falling = s.buffer_end <= s.buffer_start;
                    if ratio >= 1.0 + p.band && rising {
                        Candidate::State(BufferState::Filling)
                    } else if ratio <= 1.0 - p.band && falling && s.playing {
                        Candidate::State(BufferState::Depleting)
                    } else {
                        Candidate::Residual
                    }
                }
            }
        })
        .collect();
    let mut i = 0;
    while i < spans.len() {
        match cands[i] {
            Candidate::State(st) => spans[i].label = Some(st),
            Candidate::Skip => spans[i].label = None,
            Candidate::Residual => {
                let mut j = i;
                while j < spans.len() && cands[j] == Candidate::Residual {
                    j += 1;
                }
                let long = spans[j - 1].end - spans[i].start >= p.unclear_min_s;
                for s in &mut spans[i..j] {
                    s.label = long.then_some(BufferState::Unclear);
                }
                i = j;
                continue;
            }
        }
        i += 1;
    }
}

fn vec_labels(spans: &[Span], flow: FlowKey) -> Vec<LabelInterval> {
    fn close(open: Option<(f64, f64, BufferState)>, flow: FlowKey, out: &mut Vec<LabelInterval>) {
        if let Some((a, b, st)) = open {
            let (start, end) = (Nanos::from_secs_f64(a), Nanos::from_secs_f64(b));
            if start < end {
                out.push(LabelInterval { flow, start, end, label: Label::Buffer(st) });
            }
        }
    }
    let mut out = Vec::new();
    let mut open: Option<(f64, f64, BufferState)> = None;
    for s in spans {
        match (open, s.label) {
            (Some((a, _, st)), Some(l)) if st == l => open = Some((a, s.end, st)),
            (o, l) => {
                close(o, flow, &mut out);
                open = l.map(|l| (s.start, s.end, l));
            }
        }
    }
    close(open, flow, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::profile::Rate;

    fn script(quality: QualityMode, profile: NetworkProfile) -> SessionScript {
        SessionScript {
            scenario: "t".into(),
            ladder: QualityLadder::standard(),
            profile,
            quality,
            video_duration_s: 300.0,
            segment_duration_s: 5.0,
            buffer_target_s: 120.0,
            vbr_sigma: 0.2,
            seed: 7,
            params: HasParams::default(),
        }
    }

    fn buffer_states(run: &HasRun) -> Vec<BufferState> {
        run.trace
            .labels
            .iter()
            .filter_map(|l| match l.label {
                Label::Buffer(b) => Some(b),
                Label::Service(_) => None,
            })
            .collect()
    }

    #[test]
    fn fixed_quality_unlimited_fills_then_steadies() {
        let s =
            script(QualityMode::Fixed { initial: 3, switches: Vec::new() }, NetworkProfile::constant(Rate::Unlimited));
        let run = simulate_has(&s).unwrap();
        assert_eq!(buffer_states(&run), [BufferState::Filling, BufferState::Steady]);
        assert_eq!(run.segments.len(), 60);
        assert!(run.segments.iter().all(|g| g.rep == 3));
    }

    #[test]
    fn packets_are_ordered_and_sized() {
        let s = script(QualityMode::Auto { initial: 3 }, NetworkProfile::constant(Rate::Limited(2e6)));
        let run = simulate_has(&s).unwrap();
        let pk = &run.trace.packets;
        assert!(pk.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(pk.iter().all(|p| p.flow_key() == run.flow));
        let dl: u64 = pk.iter().filter(|p| p.dst.ip == CLIENT_IP).map(|p| u64::from(p.payload_size)).sum();
        assert_eq!(dl, run.segments.iter().map(|g| g.bytes).sum::<u64>());
    }

    #[test]
    fn invalid_scripts_are_rejected() {
        let mut s = script(QualityMode::Auto { initial: 9 }, NetworkProfile::constant(Rate::Unlimited));
        assert!(simulate_has(&s).is_err());
        s.quality = QualityMode::Auto { initial: 0 };
        s.buffer_target_s = 6.0;
        assert!(simulate_has(&s).is_err());
    }
}
