//! Turns transfers into timed packet records.

use alloc::vec::Vec;

use super::profile::NetworkProfile;
use crate::packet::{Endpoint, PacketRecord, Protocol};
use crate::time::Nanos;

pub(crate) struct Wire<'a> {
    profile: &'a NetworkProfile,
    client: Endpoint,
    server: Endpoint,
    protocol: Protocol,
    pub(crate) mss: u32,
    pub(crate) ack_bytes: u32,
    pub(crate) ack_every: u32,
    packets: Vec<PacketRecord>,
    last: Nanos,
}

impl<'a> Wire<'a> {
    pub(crate) fn new(profile: &'a NetworkProfile, client: Endpoint, server: Endpoint, protocol: Protocol) -> Self {
        Wire {
            profile,
            client,
            server,
            protocol,
            mss: 1400,
            ack_bytes: 52,
            ack_every: 2,
            packets: Vec::new(),
            last: Nanos::ZERO,
        }
    }

    fn push(&mut self, t: f64, downlink: bool, size: u32) {
        // float jitter between the event loop and the transfer walk must not
        // reorder packets
        let time = Nanos::from_secs_f64(t).max(self.last);
        self.last = time;
        let (src, dst) = if downlink { (self.server, self.client) } else { (self.client, self.server) };
        self.packets.push(PacketRecord { time, src, dst, protocol: self.protocol, payload_size: size });
    }

    pub(crate) fn uplink(&mut self, t: f64, size: u32) {
        self.push(t, false, size);
    }

    /// Sends `bytes` downlink starting at `start`, full-size packets first and
    /// the remainder last, each stamped when its last bit arrives. Returns the
    /// arrival time of the final packet.
    pub(crate) fn transfer(&mut self, start: f64, bytes: u64) -> f64 {
        let mut t = start;
        let mut left = bytes;
        let mut n = 0u32;
        while left > 0 {
            let size = left.min(u64::from(self.mss)) as u32;
            t = self.profile.finish_time(t, f64::from(size) * 8.0);
            self.push(t, true, size);
            left -= u64::from(size);
            n += 1;
            if n.is_multiple_of(self.ack_every) {
                self.push(t, false, self.ack_bytes);
            }
        }
        t
    }

    /// Streams full-size packets from `start` until the next one would arrive
    /// after `until`. Returns the number of payload bytes sent.
    pub(crate) fn stream_until(&mut self, start: f64, until: f64) -> u64 {
        let mut t = start;
        let mut sent = 0u64;
        let mut n = 0u32;
        loop {
            let next = self.profile.finish_time(t, f64::from(self.mss) * 8.0);
            if next > until {
                return sent;
            }
            t = next;
            self.push(t, true, self.mss);
            sent += u64::from(self.mss);
            n += 1;
            if n.is_multiple_of(self.ack_every) {
                self.push(t, false, self.ack_bytes);
            }
        }
    }

    pub(crate) fn last_time(&self) -> Nanos {
        self.last
    }

    pub(crate) fn finish(self) -> Vec<PacketRecord> {
        self.packets
    }
}
