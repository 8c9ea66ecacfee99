use std::io::Cursor;
use std::path::Path;

use hasprof::trace_io::*;
use hasprof::Error;
use hasprof_core::labels::LabelError;
use hasprof_core::sim::{simulate_spec, TraceSpec};
use hasprof_core::sim::{ScenarioId, VbrPreset};
use hasprof_core::{BufferState, Dataset, FlowKey, Label, LabelInterval, Nanos};

fn parse(text: &str) -> hasprof::Result<(hasprof_core::trace::TraceMeta, Vec<hasprof_core::PacketRecord>)> {
    parse_packet_csv(Cursor::new(text), Path::new("t.csv"))
}

const HEAD: &str =
    "# client_ip=10.0.0.2\n# trace_id=demo\ntime_s,src_ip,src_port,dst_ip,dst_port,protocol,payload_bytes\n";

#[test]
fn three_rows_in_file_order() {
    let text = format!(
        "{HEAD}0.5,10.0.0.2,5000,1.2.3.4,443,UDP,700\n0.25,1.2.3.4,443,10.0.0.2,5000,UDP,1400\n1,1.2.3.4,443,10.0.0.2,5000,TCP,0\n"
    );
    let (meta, p) = parse(&text).unwrap();
    assert_eq!(meta.trace_id, "demo");
    assert_eq!(meta.sampling_period, Nanos::from_secs(1));
    assert_eq!(p.len(), 3);
    assert_eq!(p[0].time, Nanos::from_millis(500));
    assert_eq!(p[1].time, Nanos::from_millis(250));
    assert_eq!(p[1].payload_size, 1400);
    assert_eq!(p[2].protocol, hasprof_core::Protocol::Tcp);
}

#[test]
fn out_of_range_port_names_the_line() {
    let text = format!("{HEAD}0.5,10.0.0.2,5000,1.2.3.4,443,UDP,700\n0.6,10.0.0.2,70000,1.2.3.4,443,UDP,700\n");
    match parse(&text) {
        Err(Error::Parse { line, msg, .. }) => {
            assert_eq!(line, 5);
            assert!(msg.contains("70000"), "{msg}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn malformed_fields_are_rejected() {
    for row in [
        "0.5,10.0.0.2,5000,1.2.3.4,443,ICMP,700",
        "0.5,10.0.0.2,5000,1.2.3.4,443,UDP,-1",
        "-0.5,10.0.0.2,5000,1.2.3.4,443,UDP,7",
        "0.5,10.0.0.2,5000,1.2.3.4,443,UDP",
        "0.5,10.0.0.2,5000,10.0.0.2,5000,UDP,7",
        "0.1234567891,10.0.0.2,5000,1.2.3.4,443,UDP,7",
        "0.5,10.0.0.256,5000,1.2.3.4,443,UDP,7",
    ] {
        assert!(matches!(parse(&format!("{HEAD}{row}\n")), Err(Error::Parse { line: 4, .. })), "{row}");
    }
}

#[test]
fn empty_data_section() {
    let (meta, p) = parse(HEAD).unwrap();
    assert!(p.is_empty());
    assert_eq!(meta.client_ip.to_string(), "10.0.0.2");
}

#[test]
fn metadata_is_required_and_checked() {
    let no_ip = "time_s,src_ip,src_port,dst_ip,dst_port,protocol,payload_bytes\n";
    assert!(matches!(parse(no_ip), Err(Error::MissingClientIp(_))));
    let bad_header = "# client_ip=10.0.0.2\ntime,src,dst\n";
    assert!(matches!(parse(bad_header), Err(Error::Parse { line: 2, .. })));
    let zero_ts = format!("# sampling_period_s=0\n{HEAD}");
    assert!(matches!(parse(&zero_ts), Err(Error::Parse { line: 1, .. })));
    let unknown = format!("# colour=blue\n{HEAD}");
    assert!(matches!(parse(&unknown), Err(Error::Parse { .. })));
    let period = format!("# sampling_period_s=0.5\n{HEAD}");
    assert_eq!(parse(&period).unwrap().0.sampling_period, Nanos::from_millis(500));
}

#[test]
fn simulated_trace_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = TraceSpec::Has { scenario: ScenarioId::S4, preset: VbrPreset::Low, rep: 0 };
    let trace = simulate_spec(&spec, 3).unwrap();
    write_trace(dir.path(), &trace).unwrap();
    let back = read_trace(&dir.path().join("s4-low-r00.csv")).unwrap();
    assert_eq!(back, trace);
}

fn flow() -> FlowKey {
    "10.0.0.2:51000-172.217.0.1:443/UDP".parse().unwrap()
}

fn iv(start: u64, end: u64, s: BufferState) -> LabelInterval {
    LabelInterval { flow: flow(), start: Nanos::from_secs(start), end: Nanos::from_secs(end), label: Label::Buffer(s) }
}

#[test]
fn labels_filling_then_steady_are_valid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.labels");
    let ivs = vec![iv(0, 120, BufferState::Filling), iv(120, 300, BufferState::Steady)];
    write_labels(&path, &ivs).unwrap();
    assert_eq!(read_labels(&path).unwrap(), ivs);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("10.0.0.2:51000-172.217.0.1:443/UDP,0,120,Filling\n"), "{text}");
}

#[test]
fn overlapping_labels_name_both_intervals() {
    let text = "10.0.0.2:51000-172.217.0.1:443/UDP,0,10,Steady\n10.0.0.2:51000-172.217.0.1:443/UDP,5,15,Filling\n";
    match parse_labels(Cursor::new(text), Path::new("x.labels")) {
        Err(Error::Labels { source: LabelError::Overlap { first, second }, .. }) => {
            assert_eq!(first.start, Nanos::ZERO);
            assert_eq!(second.start, Nanos::from_secs(5));
        }
        other => panic!("expected overlap, got {other:?}"),
    }
}

#[test]
fn label_edge_cases() {
    let p = Path::new("x.labels");
    assert!(parse_labels(Cursor::new(""), p).unwrap().is_empty());
    assert!(parse_labels(Cursor::new("# only a comment\n"), p).unwrap().is_empty());
    // the two families may overlap each other
    let text = "10.0.0.2:51000-172.217.0.1:443/UDP,0,10,Steady\n10.0.0.2:51000-172.217.0.1:443/UDP,0,20,HAS\n";
    assert_eq!(parse_labels(Cursor::new(text), p).unwrap().len(), 2);
    for bad in [
        "10.0.0.2:51000-172.217.0.1:443/UDP,10,10,Steady\n",
        "10.0.0.2:51000-172.217.0.1:443/UDP,0,10,Buffering\n",
        "172.217.0.1:443-10.0.0.2:51000/UDP,0,10,Steady\n",
        "10.0.0.2:51000-172.217.0.1:443/UDP,0,10\n",
    ] {
        assert!(parse_labels(Cursor::new(bad), p).is_err(), "{bad}");
    }
}

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }
    fn value(&mut self) -> f64 {
        let mantissa = (self.next() >> 11) as f64 / (1u64 << 53) as f64;
        let exp = (self.next() % 40) as i32 - 20;
        let sign = if self.next().is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * mantissa * 10f64.powi(exp)
    }
}

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("f{i}")).collect()
}

#[test]
fn two_rows_twenty_features() {
    let mut ds = Dataset::new(names(20), ["NonHAS", "HAS"]);
    ds.push(&[1.5; 20], 1, None).unwrap();
    ds.push(&[0.0; 20], 0, None).unwrap();
    let mut buf = Vec::new();
    format_dataset_csv(&mut buf, &ds).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let data: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(data.len(), 2);
    assert!(data.iter().all(|l| l.split(',').count() == 21));
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 21);
}

#[test]
fn random_dataset_round_trip() {
    let mut rng = XorShift(0x9e37_79b9_7f4a_7c15);
    for with_tags in [false, true] {
        let mut ds = Dataset::new(names(7), ["Filling", "Steady", "Depleting", "Unclear"]);
        for i in 0..200 {
            let x: Vec<f64> = (0..7).map(|_| rng.value()).collect();
            let tag = format!("s{}", i % 3);
            ds.push(&x, (rng.next() % 4) as usize, with_tags.then_some(tag.as_str())).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &ds).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back.n_rows(), ds.n_rows());
        for i in 0..ds.n_rows() {
            for (a, b) in ds.row(i).iter().zip(back.row(i)) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300), "{a} vs {b}");
            }
        }
        // shortest round-trip formatting makes the copy exact
        assert_eq!(back, ds);
    }
}

#[test]
fn short_dataset_row_is_a_parse_error() {
    let header = names(20).join(",") + ",label";
    let row20 = vec!["1"; 20].join(",") + ",HAS";
    let row19 = vec!["1"; 19].join(",") + ",HAS";
    let text = format!("# classes=NonHAS,HAS\n{header}\n{row20}\n{row19}\n");
    match parse_dataset_csv(Cursor::new(text), Path::new("d.csv")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected parse error, got {other:?}"),
    }
    let text = format!("# classes=NonHAS,HAS\n{header}\n{}\n", vec!["1"; 20].join(",") + ",Maybe");
    assert!(parse_dataset_csv(Cursor::new(text), Path::new("d.csv")).is_err());
    let text = format!("# classes=NonHAS,HAS\n{header}\n{}\n", vec!["NaN"; 20].join(",") + ",HAS");
    assert!(parse_dataset_csv(Cursor::new(text), Path::new("d.csv")).is_err());
}
