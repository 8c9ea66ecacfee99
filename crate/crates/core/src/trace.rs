//! A packet trace with its ground-truth label intervals.

use alloc::string::String;
use alloc::vec::Vec;
use core::net::Ipv4Addr;

use crate::labels::LabelInterval;
use crate::packet::PacketRecord;
use crate::time::Nanos;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub client_ip: Ipv4Addr,
    pub trace_id: String,
    pub sampling_period: Nanos,
    pub scenario: Option<String>,
}

impl TraceMeta {
    pub fn new(client_ip: Ipv4Addr, trace_id: impl Into<String>) -> Self {
        TraceMeta { client_ip, trace_id: trace_id.into(), sampling_period: Nanos::from_secs(1), scenario: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub meta: TraceMeta,
    pub packets: Vec<PacketRecord>,
    pub labels: Vec<LabelInterval>,
}

impl LabeledTrace {
    /// Time of the last packet, or zero for an empty trace.
    pub fn end(&self) -> Nanos {
        self.packets.last().map_or(Nanos::ZERO, |p| p.time)
    }
}
