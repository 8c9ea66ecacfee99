//! Classic pcap ingest (Ethernet, IPv4, TCP/UDP).

use std::net::Ipv4Addr;
use std::path::Path;

use hasprof_core::{Endpoint, Nanos, PacketRecord, Protocol};
use pcap_parser::nom;
use pcap_parser::{parse_pcap_frame, parse_pcap_frame_be, parse_pcap_header, LegacyPcapBlock, Linktype};

use crate::error::{io_err, Error, Result};

const PCAPNG_MAGIC: u32 = 0x0a0d_0d0a;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;

/// Frames that did not become packet records, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipCounts {
    /// Non-IP frames (ARP, LLDP, VLAN-tagged, ...).
    pub non_ip: u64,
    pub ipv6: u64,
    /// IPv4 packets that are neither TCP nor UDP.
    pub other_transport: u64,
    /// Non-first IPv4 fragments.
    pub fragments: u64,
    /// Captured length too short for the headers needed.
    pub truncated: u64,
    /// Header fields that contradict each other.
    pub malformed: u64,
    /// Packets with neither endpoint at the client address.
    pub foreign: u64,
}

impl SkipCounts {
    pub fn total(&self) -> u64 {
        self.non_ip + self.ipv6 + self.other_transport + self.fragments + self.truncated + self.malformed + self.foreign
    }
}

impl std::fmt::Display for SkipCounts {
    /// `3 frames skipped (2 IPv6, 1 non-IP)`, listing non-zero reasons only.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let reasons = [
            (self.ipv6, "IPv6"),
            (self.non_ip, "non-IP"),
            (self.other_transport, "not TCP/UDP"),
            (self.fragments, "fragment"),
            (self.truncated, "truncated"),
            (self.malformed, "malformed"),
            (self.foreign, "not involving the client"),
        ];
        let parts: Vec<String> = reasons.iter().filter(|r| r.0 > 0).map(|(n, what)| format!("{n} {what}")).collect();
        let n = self.total();
        write!(f, "{n} frame{} skipped", if n == 1 { "" } else { "s" })?;
        if !parts.is_empty() {
            write!(f, " ({})", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcapTrace {
    /// Time-ordered, relative to `epoch_s`.
    pub packets: Vec<PacketRecord>,
    /// Capture time of the earliest record, rounded down to a whole second.
    pub epoch_s: u64,
    pub skipped: SkipCounts,
}

pub fn read_pcap(path: &Path, client_ip: Ipv4Addr) -> Result<PcapTrace> {
    let data = std::fs::read(path).map_err(io_err(path))?;
    parse_pcap(&data, client_ip, path)
}

/// Parses an in-memory capture; `origin` only labels error messages.
pub fn parse_pcap(data: &[u8], client_ip: Ipv4Addr, origin: &Path) -> Result<PcapTrace> {
    let unsupported = |what: String| Error::UnsupportedFormat { path: origin.to_path_buf(), what };
    if data.len() >= 4 && u32::from_le_bytes([data[0], data[1], data[2], data[3]]) == PCAPNG_MAGIC {
        return Err(unsupported("pcapng".into()));
    }
    let (mut rest, header) = parse_pcap_header(data).map_err(|_| unsupported("not a classic pcap file".into()))?;
    if header.is_modified_format() {
        return Err(unsupported("modified pcap".into()));
    }
    if header.network != Linktype::ETHERNET {
        return Err(unsupported(format!("link type {}", header.network.0)));
    }
    let frac_per_ns = if header.is_nanosecond_precision() { 1 } else { 1000 };
    let parse = if header.is_bigendian() { parse_pcap_frame_be } else { parse_pcap_frame };

    let mut raw: Vec<(u64, PacketRecord)> = Vec::new();
    let mut skipped = SkipCounts::default();
    while !rest.is_empty() {
        let (next, block) = match parse(rest) {
            Ok(v) => v,
            Err(nom::Err::Incomplete(_)) => {
                return Err(Error::Format { path: origin.to_path_buf(), msg: "capture ends inside a record".into() })
            }
            Err(_) => return Err(Error::Format { path: origin.to_path_buf(), msg: "unreadable record header".into() }),
        };
        rest = next;
        let ts = u64::from(block.ts_sec) * 1_000_000_000 + u64::from(block.ts_usec) * frac_per_ns;
        match decode_frame(&block) {
            Ok(p) => {
                let p = PacketRecord { time: Nanos(ts), ..p };
                if p.src.ip == client_ip || p.dst.ip == client_ip {
                    raw.push((ts, p));
                } else {
                    skipped.foreign += 1;
                }
            }
            Err(reason) => reason.count(&mut skipped),
        }
    }
    // captures can be slightly out of order across interfaces; a stable
    // sort keeps file order among equal timestamps
    raw.sort_by_key(|(ts, _)| *ts);
    let epoch_s = raw.first().map_or(0, |(ts, _)| ts / 1_000_000_000);
    let base = epoch_s * 1_000_000_000;
    let packets = raw.into_iter().map(|(ts, p)| PacketRecord { time: Nanos(ts.saturating_sub(base)), ..p }).collect();
    Ok(PcapTrace { packets, epoch_s, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Skip {
    NonIp,
    Ipv6,
    OtherTransport,
    Fragment,
    Truncated,
    Malformed,
}

impl Skip {
    fn count(self, c: &mut SkipCounts) {
        *match self {
            Skip::NonIp => &mut c.non_ip,
            Skip::Ipv6 => &mut c.ipv6,
            Skip::OtherTransport => &mut c.other_transport,
            Skip::Fragment => &mut c.fragments,
            Skip::Truncated => &mut c.truncated,
            Skip::Malformed => &mut c.malformed,
        } += 1;
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Decodes one Ethernet frame. The payload size comes from the IP total
/// length, so short snap lengths still give the true size.
fn decode_frame(block: &LegacyPcapBlock<'_>) -> std::result::Result<PacketRecord, Skip> {
    let d = block.data;
    if d.len() < 14 {
        return Err(Skip::Truncated);
    }
    match be16(d, 12) {
        ETHERTYPE_IPV4 => {}
        ETHERTYPE_IPV6 => return Err(Skip::Ipv6),
        _ => return Err(Skip::NonIp),
    }
    let ip = &d[14..];
    if ip.len() < 20 {
        return Err(Skip::Truncated);
    }
    if ip[0] >> 4 != 4 {
        return Err(Skip::Malformed);
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    let total = usize::from(be16(ip, 2));
    if ihl < 20 || total < ihl {
        return Err(Skip::Malformed);
    }
    if be16(ip, 6) & 0x1fff != 0 {
        return Err(Skip::Fragment);
    }
    let protocol = match ip[9] {
        6 => Protocol::Tcp,
        17 => Protocol::Udp,
        _ => return Err(Skip::OtherTransport),
    };
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let l4 = &ip[ihl.min(ip.len())..];
    let need = match protocol {
        Protocol::Tcp => 13,
        Protocol::Udp => 8,
    };
    if ip.len() < ihl || l4.len() < need {
        return Err(Skip::Truncated);
    }
    let l4_header = match protocol {
        Protocol::Tcp => usize::from(l4[12] >> 4) * 4,
        Protocol::Udp => 8,
    };
    let min_header = match protocol {
        Protocol::Tcp => 20,
        Protocol::Udp => 8,
    };
    if l4_header < min_header || total < ihl + l4_header {
        return Err(Skip::Malformed);
    }
    let payload = (total - ihl - l4_header) as u32;
    let src = Endpoint::new(src_ip, be16(l4, 0));
    let dst = Endpoint::new(dst_ip, be16(l4, 2));
    PacketRecord::new(Nanos::ZERO, src, dst, protocol, payload).map_err(|_| Skip::Malformed)
}
