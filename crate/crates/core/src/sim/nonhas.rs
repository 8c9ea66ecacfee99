//! Non-streaming traffic: bulk file download and web browsing.

use core::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::profile::NetworkProfile;
use super::wire::Wire;
use super::{SimError, CLIENT_IP};
use crate::labels::{Label, LabelInterval, ServiceClass};
use crate::packet::{Endpoint, Protocol};
use crate::time::Nanos;
use crate::trace::{LabeledTrace, TraceMeta};

pub const DOWNLOAD_SERVER: Ipv4Addr = Ipv4Addr::new(93, 184, 216, 34);
pub const WEB_SERVER: Ipv4Addr = Ipv4Addr::new(151, 101, 1, 69);

fn endpoints(rng: &mut ChaCha8Rng, server: Ipv4Addr) -> (Endpoint, Endpoint) {
    (Endpoint::new(CLIENT_IP, rng.random_range(49152..=65535)), Endpoint::new(server, 443))
}

fn finish(wire: Wire<'_>, client: Endpoint, server: Endpoint, scenario: &str, seed: u64) -> LabeledTrace {
    let flow = crate::packet::FlowKey::new(client, server, Protocol::Tcp);
    let end = wire.last_time() + Nanos::from_secs(1);
    let packets = wire.finish();
    let mut meta = TraceMeta::new(CLIENT_IP, alloc::format!("{scenario}-{seed:016x}"));
    meta.scenario = Some(scenario.into());
    let labels =
        alloc::vec![LabelInterval { flow, start: Nanos::ZERO, end, label: Label::Service(ServiceClass::NonHas) }];
    LabeledTrace { meta, packets, labels }
}

/// One bulk transfer saturating the profile rate for `duration_s`, after one
/// to three small requests at t = 0.
pub fn simulate_download(duration_s: f64, profile: &NetworkProfile, seed: u64) -> Result<LabeledTrace, SimError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(SimError::InvalidScript("download duration must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (client, server) = endpoints(&mut rng, DOWNLOAD_SERVER);
    let mut wire = Wire::new(profile, client, server, Protocol::Tcp);
    for _ in 0..rng.random_range(1..=3) {
        wire.uplink(0.0, rng.random_range(300..=800));
    }
    wire.stream_until(0.0, duration_s);
    Ok(finish(wire, client, server, "download", seed))
}

/// Page loads separated by think times: a few GETs 20 ms apart, a downlink
/// burst of 0.5 to 5 MB, then 5 to 15 s of silence.
pub fn simulate_web(duration_s: f64, profile: &NetworkProfile, seed: u64) -> Result<LabeledTrace, SimError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(SimError::InvalidScript("browsing duration must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (client, server) = endpoints(&mut rng, WEB_SERVER);
    let mut wire = Wire::new(profile, client, server, Protocol::Tcp);
    let mut t = 0.0;
    while t < duration_s {
        let gets = rng.random_range(3..=10);
        for g in 0..gets {
            wire.uplink(t + 0.02 * f64::from(g), rng.random_range(300..=1200));
        }
        t += 0.02 * f64::from(gets - 1);
        let bytes = rng.random_range(500_000..=5_000_000u64);
        t = wire.transfer(t, bytes);
        t += rng.random_range(5.0..=15.0);
    }
    Ok(finish(wire, client, server, "web", seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::profile::Rate;

    #[test]
    fn download_accounting() {
        let p = NetworkProfile::constant(Rate::Limited(2e6));
        let tr = simulate_download(30.0, &p, 1).unwrap();
        let dl: u64 = tr.packets.iter().filter(|p| p.dst.ip == CLIENT_IP).map(|p| u64::from(p.payload_size)).sum();
        let expected = 2e6 * 30.0 / 8.0;
        assert!((dl as f64 - expected).abs() <= 1400.0, "{dl} vs {expected}");
        let late_requests = tr
            .packets
            .iter()
            .filter(|p| p.src.ip == CLIENT_IP && p.payload_size > 100 && p.time > Nanos::from_secs(2))
            .count();
        assert_eq!(late_requests, 0);
        assert!(tr.packets.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn web_bursts_and_gaps() {
        let p = NetworkProfile::constant(Rate::Unlimited);
        let tr = simulate_web(200.0, &p, 5).unwrap();
        // bursts start with a GET after at least 5 s of silence
        let mut starts = alloc::vec![Nanos::ZERO];
        for w in tr.packets.windows(2) {
            let gap = w[1].time - w[0].time;
            if gap >= Nanos::from_secs(1) {
                assert!(gap >= Nanos::from_secs(5) && gap <= Nanos::from_secs(15), "gap {gap}");
                starts.push(w[1].time);
            }
        }
        assert!(starts.len() >= 10, "{} bursts", starts.len());
    }
}
