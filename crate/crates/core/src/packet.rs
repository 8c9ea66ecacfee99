//! Packet records, bidirectional flow identity and per-flow packet history.

use alloc::collections::VecDeque;
use alloc::string::String;
use core::fmt;
use core::net::Ipv4Addr;
use core::str::FromStr;

use thiserror::Error;

use crate::time::Nanos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("packet source and destination are the same endpoint {0}")]
    IdenticalEndpoints(Endpoint),
    #[error("client {client} matches {matches} endpoints of packet {src} -> {dst}")]
    AmbiguousDirection { client: Ipv4Addr, src: Endpoint, dst: Endpoint, matches: u8 },
    #[error("packet at {time}s precedes last stored packet at {last}s")]
    OutOfOrderPacket { time: Nanos, last: Nanos },
    #[error("packet of flow {got} ingested into flow {expected}")]
    KeyMismatch { expected: FlowKey, got: FlowKey },
    #[error("invalid flow id `{0}`")]
    BadFlowId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Tcp,
    Udp,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "TCP",
            Protocol::Udp => "UDP",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "TCP" | "tcp" => Ok(Protocol::Tcp),
            "UDP" | "udp" => Ok(Protocol::Udp),
            _ => Err(()),
        }
    }
}

/// An (address, port) pair. Ordered lexicographically by address then port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: Ipv4Addr,
    pub port: u16,
}

impl Endpoint {
    pub const fn new(ip: Ipv4Addr, port: u16) -> Self {
        Endpoint { ip, port }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ip, self.port)
    }
}

/// Layer-3 metadata of one observed packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub time: Nanos,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub protocol: Protocol,
    /// Transport payload in bytes.
    pub payload_size: u32,
}

impl PacketRecord {
    pub fn new(
        time: Nanos,
        src: Endpoint,
        dst: Endpoint,
        protocol: Protocol,
        payload_size: u32,
    ) -> Result<Self, PacketError> {
        let p = PacketRecord { time, src, dst, protocol, payload_size };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PacketError> {
        if self.src == self.dst {
            return Err(PacketError::IdenticalEndpoints(self.src));
        }
        Ok(())
    }

    /// The same packet as seen travelling the other way.
    pub fn mirrored(&self) -> Self {
        PacketRecord { src: self.dst, dst: self.src, ..*self }
    }

    pub fn flow_key(&self) -> FlowKey {
        FlowKey::new(self.src, self.dst, self.protocol)
    }
}

/// Direction-agnostic five-tuple: the two endpoints are stored in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub endpoint_a: Endpoint,
    pub endpoint_b: Endpoint,
    pub protocol: Protocol,
}

impl FlowKey {
    pub fn new(x: Endpoint, y: Endpoint, protocol: Protocol) -> Self {
        let (endpoint_a, endpoint_b) = if x <= y { (x, y) } else { (y, x) };
        FlowKey { endpoint_a, endpoint_b, protocol }
    }
}

/// Canonical flow id, e.g. `10.0.0.2:51000-172.217.0.1:443/UDP`.
impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}/{}", self.endpoint_a, self.endpoint_b, self.protocol)
    }
}

impl FromStr for FlowKey {
    type Err = PacketError;

    fn from_str(s: &str) -> Result<Self, PacketError> {
        let bad = || PacketError::BadFlowId(s.into());
        let (pair, proto) = s.rsplit_once('/').ok_or_else(bad)?;
        let protocol: Protocol = proto.parse().map_err(|_| bad())?;
        let (a, b) = pair.split_once('-').ok_or_else(bad)?;
        let parse_ep = |e: &str| -> Result<Endpoint, PacketError> {
            let (ip, port) = e.rsplit_once(':').ok_or_else(bad)?;
            Ok(Endpoint::new(ip.parse().map_err(|_| bad())?, port.parse().map_err(|_| bad())?))
        };
        let (a, b) = (parse_ep(a)?, parse_ep(b)?);
        if a == b {
            return Err(bad());
        }
        let key = FlowKey::new(a, b, protocol);
        // Only the canonical spelling is accepted so ids stay unique.
        if key.endpoint_a != a {
            return Err(bad());
        }
        Ok(key)
    }
}

pub fn flow_key(p: &PacketRecord) -> FlowKey {
    p.flow_key()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// Towards the client.
    Downlink,
    /// From the client.
    Uplink,
}

pub fn direction_of(p: &PacketRecord, client_ip: Ipv4Addr) -> Result<Direction, PacketError> {
    match (p.src.ip == client_ip, p.dst.ip == client_ip) {
        (false, true) => Ok(Direction::Downlink),
        (true, false) => Ok(Direction::Uplink),
        (s, d) => Err(PacketError::AmbiguousDirection {
            client: client_ip,
            src: p.src,
            dst: p.dst,
            matches: s as u8 + d as u8,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoredPacket {
    pub time: Nanos,
    pub direction: Direction,
    pub payload_size: u32,
}

/// Packet history of one bidirectional flow.
///
/// With an eviction horizon set, packets older than `newest - horizon` are
/// dropped; the time of the newest dropped downlink packet is kept so that
/// inter-arrival attribution at the window edge is unaffected. Queries at
/// instants at or after the newest packet with windows no longer than the
/// horizon see exactly what an unbounded history would.
#[derive(Debug, Clone)]
pub struct FlowState {
    key: FlowKey,
    client_ip: Ipv4Addr,
    packets: VecDeque<StoredPacket>,
    last_dl_time: Option<Nanos>,
    evicted_dl_time: Option<Nanos>,
    horizon: Option<Nanos>,
    reorder_tolerance: Nanos,
}

impl FlowState {
    pub fn new(key: FlowKey, client_ip: Ipv4Addr) -> Self {
        FlowState {
            key,
            client_ip,
            packets: VecDeque::new(),
            last_dl_time: None,
            evicted_dl_time: None,
            horizon: None,
            reorder_tolerance: Nanos::ZERO,
        }
    }

    /// Evict packets more than `horizon` behind the newest packet.
    pub fn with_eviction(mut self, horizon: Nanos) -> Self {
        self.horizon = Some(horizon);
        self
    }

    /// Accept packets up to `tolerance` earlier than the newest stored one.
    pub fn with_reorder_tolerance(mut self, tolerance: Nanos) -> Self {
        self.reorder_tolerance = tolerance;
        self
    }

    pub fn key(&self) -> FlowKey {
        self.key
    }

    pub fn client_ip(&self) -> Ipv4Addr {
        self.client_ip
    }

    pub fn packets(&self) -> &VecDeque<StoredPacket> {
        &self.packets
    }

    pub fn last_dl_time(&self) -> Option<Nanos> {
        self.last_dl_time
    }

    pub fn last_time(&self) -> Option<Nanos> {
        self.packets.back().map(|p| p.time)
    }

    pub fn ingest(&mut self, p: &PacketRecord) -> Result<(), PacketError> {
        p.validate()?;
        let got = p.flow_key();
        if got != self.key {
            return Err(PacketError::KeyMismatch { expected: self.key, got });
        }
        let direction = direction_of(p, self.client_ip)?;
        let stored = StoredPacket { time: p.time, direction, payload_size: p.payload_size };
        match self.packets.back() {
            Some(last) if p.time < last.time => {
                if p.time + self.reorder_tolerance < last.time {
                    return Err(PacketError::OutOfOrderPacket { time: p.time, last: last.time });
                }
                let at = self.packets.partition_point(|q| q.time <= p.time);
                self.packets.insert(at, stored);
            }
            _ => self.packets.push_back(stored),
        }
        if direction == Direction::Downlink {
            self.last_dl_time = Some(self.last_dl_time.map_or(p.time, |t| t.max(p.time)));
        }
        self.evict();
        Ok(())
    }

    fn evict(&mut self) {
        let (Some(horizon), Some(newest)) = (self.horizon, self.last_time()) else {
            return;
        };
        let cutoff = newest.saturating_sub(horizon + self.reorder_tolerance);
        while let Some(front) = self.packets.front() {
            if front.time >= cutoff {
                break;
            }
            if front.direction == Direction::Downlink {
                self.evicted_dl_time = Some(front.time);
            }
            self.packets.pop_front();
        }
    }

    /// Index range of stored packets with time in `[start, end)`.
    pub fn window_range(&self, start: Nanos, end: Nanos) -> core::ops::Range<usize> {
        let lo = self.packets.partition_point(|p| p.time < start);
        let hi = self.packets.partition_point(|p| p.time < end);
        lo..hi.max(lo)
    }

    /// Time of the latest downlink packet stored before index `idx`,
    /// falling back to the newest evicted one.
    pub fn previous_dl_time(&self, idx: usize) -> Option<Nanos> {
        self.packets
            .range(..idx)
            .rev()
            .find(|p| p.direction == Direction::Downlink)
            .map(|p| p.time)
            .or(self.evicted_dl_time)
    }
}
