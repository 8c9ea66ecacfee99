//! Text formats for packet traces, label intervals and feature datasets.
//!
//! Packet CSV:
//!
//! ```text
//! # client_ip=10.0.0.2
//! # trace_id=s1-medium-r00
//! # sampling_period_s=1
//! # scenario=s1
//! time_s,src_ip,src_port,dst_ip,dst_port,protocol,payload_bytes
//! 0.012,10.0.0.2,51000,172.217.0.1,443,UDP,712
//! ```
//!
//! `client_ip` is required; `trace_id`, `sampling_period_s` and `scenario` are
//! optional. Other `#` lines without `=` are comments. Times are decimal
//! seconds with at most nine fractional digits.
//!
//! Labels: one `flow_id,start_s,end_s,label` line per interval, `#` comments.
//!
//! Dataset CSV: a `# classes=a,b,...` line, a header row of feature names
//! followed by `label` and optionally `scenario`, then one row per sample with
//! the label written as its class name.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use hasprof_core::labels::validate_intervals;
use hasprof_core::trace::{LabeledTrace, TraceMeta};
use hasprof_core::{Dataset, Endpoint, FlowKey, Label, LabelInterval, Nanos, PacketRecord, Protocol};

use crate::error::{io_err, parse_err, Error, Result};

pub const PACKET_HEADER: &str = "time_s,src_ip,src_port,dst_ip,dst_port,protocol,payload_bytes";

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn read_packet_csv(path: &Path) -> Result<(TraceMeta, Vec<PacketRecord>)> {
    parse_packet_csv(open(path)?, path)
}

/// Parses packet CSV text; `origin` only labels error messages.
pub fn parse_packet_csv(input: impl BufRead, origin: &Path) -> Result<(TraceMeta, Vec<PacketRecord>)> {
    let mut client_ip: Option<Ipv4Addr> = None;
    let mut trace_id = String::new();
    let mut sampling_period = Nanos::from_secs(1);
    let mut scenario = None;
    let mut seen_header = false;
    let mut packets = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(io_err(origin))?;
        let line = line.trim_end_matches('\r');
        let err = |msg: String| parse_err(origin, n, msg);
        if let Some(rest) = line.strip_prefix('#') {
            if seen_header {
                return Err(err("metadata after the header row".into()));
            }
            let Some((key, value)) = rest.split_once('=') else { continue };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "client_ip" => client_ip = Some(value.parse().map_err(|_| err(format!("bad client_ip `{value}`")))?),
                "trace_id" => trace_id = value.to_string(),
                "sampling_period_s" => {
                    sampling_period = value.parse().map_err(|e| err(format!("bad sampling_period_s: {e}")))?;
                    if sampling_period == Nanos::ZERO {
                        return Err(err("sampling_period_s must be positive".into()));
                    }
                }
                "scenario" => scenario = Some(value.to_string()),
                _ => return Err(err(format!("unknown metadata key `{key}`"))),
            }
            continue;
        }
        if !seen_header {
            if line != PACKET_HEADER {
                return Err(err(format!("expected header `{PACKET_HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        packets.push(parse_packet_row(line).map_err(err)?);
    }
    if !seen_header {
        return Err(parse_err(origin, 0, "missing header row"));
    }
    let client_ip = client_ip.ok_or_else(|| Error::MissingClientIp(origin.to_path_buf()))?;
    Ok((TraceMeta { client_ip, trace_id, sampling_period, scenario }, packets))
}

fn parse_packet_row(line: &str) -> std::result::Result<PacketRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 7 {
        return Err(format!("expected 7 fields, found {}", f.len()));
    }
    let time: Nanos = f[0].parse().map_err(|e| format!("bad time `{}`: {e}", f[0]))?;
    let ip = |s: &str| s.parse::<Ipv4Addr>().map_err(|_| format!("bad IPv4 address `{s}`"));
    let port = |s: &str| s.parse::<u16>().map_err(|_| format!("bad port `{s}` (0..=65535)"));
    let src = Endpoint::new(ip(f[1])?, port(f[2])?);
    let dst = Endpoint::new(ip(f[3])?, port(f[4])?);
    let protocol: Protocol = f[5].parse().map_err(|_| format!("bad protocol `{}`", f[5]))?;
    let size: u32 = f[6].parse().map_err(|_| format!("bad payload size `{}`", f[6]))?;
    PacketRecord::new(time, src, dst, protocol, size).map_err(|e| e.to_string())
}

pub fn write_packet_csv(path: &Path, meta: &TraceMeta, packets: &[PacketRecord]) -> Result<()> {
    let mut w = create(path)?;
    format_packet_csv(&mut w, meta, packets).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn format_packet_csv(w: &mut impl Write, meta: &TraceMeta, packets: &[PacketRecord]) -> std::io::Result<()> {
    writeln!(w, "# client_ip={}", meta.client_ip)?;
    if !meta.trace_id.is_empty() {
        writeln!(w, "# trace_id={}", meta.trace_id)?;
    }
    writeln!(w, "# sampling_period_s={}", meta.sampling_period)?;
    if let Some(s) = &meta.scenario {
        writeln!(w, "# scenario={s}")?;
    }
    writeln!(w, "{PACKET_HEADER}")?;
    for p in packets {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p.time, p.src.ip, p.src.port, p.dst.ip, p.dst.port, p.protocol, p.payload_size
        )?;
    }
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelInterval>> {
    parse_labels(open(path)?, path)
}

pub fn parse_labels(input: impl BufRead, origin: &Path) -> Result<Vec<LabelInterval>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_err(origin))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| parse_err(origin, i + 1, msg);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let flow: FlowKey = f[0].parse().map_err(|e| err(format!("{e}")))?;
        let start: Nanos = f[1].parse().map_err(|e| err(format!("bad start `{}`: {e}", f[1])))?;
        let end: Nanos = f[2].parse().map_err(|e| err(format!("bad end `{}`: {e}", f[2])))?;
        let label: Label = f[3].parse().map_err(|_| err(format!("unknown label `{}`", f[3])))?;
        out.push(LabelInterval { flow, start, end, label });
    }
    validate_intervals(&out).map_err(|source| Error::Labels { path: origin.to_path_buf(), source })?;
    Ok(out)
}

pub fn write_labels(path: &Path, intervals: &[LabelInterval]) -> Result<()> {
    validate_intervals(intervals).map_err(|source| Error::Labels { path: path.to_path_buf(), source })?;
    let mut w = create(path)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# flow_id,start_s,end_s,label")?;
        for iv in intervals {
            writeln!(w, "{iv}")?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

/// Writes `<dir>/<trace_id>.csv` and `<dir>/<trace_id>.labels`.
pub fn write_trace(dir: &Path, trace: &LabeledTrace) -> Result<()> {
    let id = &trace.meta.trace_id;
    write_packet_csv(&dir.join(format!("{id}.csv")), &trace.meta, &trace.packets)?;
    write_labels(&dir.join(format!("{id}.labels")), &trace.labels)
}

/// Reads a packet CSV and the `.labels` file next to it.
pub fn read_trace(packets: &Path) -> Result<LabeledTrace> {
    let (meta, pkts) = read_packet_csv(packets)?;
    let labels = read_labels(&packets.with_extension("labels"))?;
    Ok(LabeledTrace { meta, packets: pkts, labels })
}

pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    format_dataset_csv(&mut w, ds).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Values use Rust's shortest round-trip formatting, so reading gives back
/// the exact same bits.
pub fn format_dataset_csv(w: &mut impl Write, ds: &Dataset) -> std::io::Result<()> {
    writeln!(w, "# classes={}", ds.class_names().join(","))?;
    let mut header = ds.feature_names().join(",");
    header.push_str(",label");
    if ds.has_scenarios() {
        header.push_str(",scenario");
    }
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for i in 0..ds.n_rows() {
        line.clear();
        for v in ds.row(i) {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(&ds.class_names()[ds.label(i)]);
        if let Some(s) = ds.scenario(i) {
            line.push(',');
            line.push_str(s);
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    parse_dataset_csv(open(path)?, path)
}

pub fn parse_dataset_csv(input: impl BufRead, origin: &Path) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l.map_err(io_err(origin))?)),
            None => Err(parse_err(origin, 0, format!("missing {what}"))),
        }
    };
    let (n, first) = next("class line")?;
    let classes: Vec<String> = first
        .strip_prefix("# classes=")
        .ok_or_else(|| parse_err(origin, n, "expected `# classes=...`"))?
        .split(',')
        .map(str::to_string)
        .collect();
    if classes.iter().any(String::is_empty) {
        return Err(parse_err(origin, n, "empty class name"));
    }
    let (n, header) = next("header row")?;
    let mut cols: Vec<&str> = header.split(',').collect();
    let has_scenario = cols.last() == Some(&"scenario");
    if has_scenario {
        cols.pop();
    }
    if cols.pop() != Some("label") || cols.is_empty() {
        return Err(parse_err(origin, n, "header must end with `label` or `label,scenario`"));
    }
    let m = cols.len();
    let width = m + 1 + usize::from(has_scenario);
    let mut ds = Dataset::new(cols.iter().copied(), classes.iter());
    let mut x = vec![0.0; m];
    for (i, line) in lines {
        let n = i + 1;
        let line = line.map_err(io_err(origin))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != width {
            return Err(parse_err(origin, n, format!("expected {width} fields, found {}", f.len())));
        }
        for (slot, s) in x.iter_mut().zip(&f[..m]) {
            *slot = s.parse().map_err(|_| parse_err(origin, n, format!("bad number `{s}`")))?;
        }
        let label = classes
            .iter()
            .position(|c| c == f[m])
            .ok_or_else(|| parse_err(origin, n, format!("unknown class `{}`", f[m])))?;
        let scenario = has_scenario.then(|| f[m + 1]);
        ds.push(&x, label, scenario).map_err(|e| parse_err(origin, n, e.to_string()))?;
    }
    Ok(ds)
}
