use hasprof_core::sim::{
    has_script, simulate_has, simulate_spec, trace_samples, Activity, HasParams, HasRun, NetworkProfile, QualityLadder,
    QualityMode, Rate, ScenarioId, SessionScript, TraceSpec, VbrPreset, CLIENT_IP,
};
use hasprof_core::{BufferState, FeatureKind, Label, LabelInterval, Nanos, StreamingExtractor, Task, WindowConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn buffer_labels(run: &HasRun) -> Vec<&LabelInterval> {
    run.trace.labels.iter().filter(|l| matches!(l.label, Label::Buffer(_))).collect()
}

fn states(run: &HasRun) -> Vec<BufferState> {
    buffer_labels(run)
        .iter()
        .map(|l| match l.label {
            Label::Buffer(b) => b,
            Label::Service(_) => unreachable!(),
        })
        .collect()
}

fn run(id: ScenarioId, preset: VbrPreset, seed: u64) -> HasRun {
    simulate_has(&has_script(id, preset, seed)).unwrap()
}

fn downlink_bytes(run: &HasRun) -> u64 {
    run.trace.packets.iter().filter(|p| p.dst.ip == CLIENT_IP).map(|p| u64::from(p.payload_size)).sum()
}

#[test]
fn unthrottled_fixed_quality_fills_then_stays_steady() {
    for preset in VbrPreset::ALL {
        for seed in [1, 2, 3, 99, 12345] {
            let r = run(ScenarioId::S1, preset, seed);
            assert_eq!(states(&r), [BufferState::Filling, BufferState::Steady], "{preset} seed {seed}");
        }
    }
}

#[test]
fn throttle_depletes_then_lower_quality_refills_and_steadies() {
    for seed in [4, 5, 6] {
        let r = run(ScenarioId::S4, VbrPreset::Medium, seed);
        let first_depleting = r.spans.iter().position(|s| s.label == Some(BufferState::Depleting)).expect("depletes");
        let rep_before = r.spans[..first_depleting]
            .iter()
            .rev()
            .find_map(|s| match s.activity {
                Activity::Download { rep, .. } => Some(rep),
                _ => None,
            })
            .unwrap();
        let refill = r.spans[first_depleting..]
            .iter()
            .position(|s| {
                s.label == Some(BufferState::Filling)
                    && matches!(s.activity, Activity::Download { rep, .. } if rep < rep_before)
            })
            .map(|i| i + first_depleting)
            .expect("refills at a lower representation");
        assert!(r.spans[refill..].iter().any(|s| s.label == Some(BufferState::Steady)), "seed {seed}");
    }
}

fn random_script(rng: &mut ChaCha8Rng) -> SessionScript {
    let ladder = QualityLadder::standard();
    let mut steps = vec![(0.0, Rate::Unlimited)];
    let mut t = 0.0;
    for _ in 0..rng.random_range(0..8) {
        t += rng.random_range(5.0..120.0);
        let rate = if rng.random_bool(0.2) { Rate::Unlimited } else { Rate::Limited(rng.random_range(50e3..6e6)) };
        steps.push((t, rate));
    }
    let initial = rng.random_range(0..ladder.len());
    let quality = if rng.random_bool(0.5) {
        QualityMode::Auto { initial }
    } else {
        let switches = (0..rng.random_range(0..3))
            .map(|_| (rng.random_range(0.0..300.0), rng.random_range(0..ladder.len())))
            .collect();
        QualityMode::Fixed { initial, switches }
    };
    let segment = rng.random_range(1.0..8.0);
    SessionScript {
        scenario: "random".into(),
        ladder,
        profile: NetworkProfile::new(steps, 20e6).unwrap(),
        quality,
        video_duration_s: rng.random_range(20.0..400.0),
        segment_duration_s: segment,
        buffer_target_s: rng.random_range(2.0 * segment..150.0),
        vbr_sigma: rng.random_range(0.0..0.4),
        seed: rng.random(),
        params: HasParams::default(),
    }
}

#[test]
fn buffer_never_goes_negative_and_labels_match_the_trajectory() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let script = random_script(&mut rng);
        let r = simulate_has(&script).unwrap();
        let mut prev_end = 0.0;
        for s in &r.spans {
            assert!(s.buffer_start >= 0.0 && s.buffer_end >= 0.0, "{s:?}");
            assert!(s.end >= s.start && (s.start - prev_end).abs() < 1e-6, "{s:?}");
            prev_end = s.end;
            match s.label {
                Some(BufferState::Filling) => assert!(s.buffer_end >= s.buffer_start, "{s:?}"),
                Some(BufferState::Depleting) => assert!(s.buffer_end <= s.buffer_start, "{s:?}"),
                _ => {}
            }
        }
        let labels = buffer_labels(&r);
        assert!(labels.windows(2).all(|w| w[0].end <= w[1].start));
    }
}

#[test]
fn downlink_bytes_equal_segment_bytes() {
    for id in ScenarioId::ALL {
        let r = run(id, VbrPreset::Medium, 11);
        let segments: u64 = r.segments.iter().map(|s| s.bytes).sum();
        assert_eq!(downlink_bytes(&r), segments, "{id}");
        assert_eq!(r.segments.len(), has_script(id, VbrPreset::Medium, 11).n_segments());
    }
}

/// Mean `DLrate_20s` over instants whose whole window lies inside `[a, b)`.
fn mean_rate_20(r: &HasRun, a: Nanos, b: Nanos) -> Option<f64> {
    let cfg = WindowConfig::default();
    let mut ex = StreamingExtractor::new(cfg.clone(), CLIENT_IP).unwrap();
    let mut rates = Vec::new();
    let mut take = |es: Vec<hasprof_core::features::Emission>| {
        for e in es {
            let t = e.features.t_w;
            if e.flow == r.flow && t.saturating_sub(Nanos::from_secs(20)) >= a && t <= b {
                rates.push(e.features.get(3, FeatureKind::DlRate));
            }
        }
    };
    for p in &r.trace.packets {
        take(ex.push(p).unwrap());
    }
    take(ex.finish());
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

#[test]
fn steady_download_rate_matches_the_bitrate() {
    let ladder = QualityLadder::standard();
    let mut checked = 0;
    for id in ScenarioId::ALL {
        let r = run(id, VbrPreset::Medium, 21);
        for l in buffer_labels(&r) {
            if l.label != Label::Buffer(BufferState::Steady) || (l.end - l.start) < Nanos::from_secs(30) {
                continue;
            }
            let (a, b) = (l.start.as_secs_f64(), l.end.as_secs_f64());
            let reps: std::collections::BTreeSet<usize> =
                r.segments.iter().filter(|s| s.request_time >= a && s.complete_time <= b).map(|s| s.rep).collect();
            if reps.len() != 1 {
                continue;
            }
            let bitrate = ladder.bitrate(*reps.first().unwrap());
            let Some(rate) = mean_rate_20(&r, l.start, l.end) else { continue };
            assert!((rate / bitrate - 1.0).abs() <= 0.15, "{id} [{a:.1}, {b:.1}): {rate} vs {bitrate}");
            checked += 1;
        }
    }
    assert!(checked >= 5, "only {checked} steady intervals checked");
}

#[test]
fn filling_downloads_faster_than_playback() {
    let ladder = QualityLadder::standard();
    for id in [ScenarioId::S1, ScenarioId::S2, ScenarioId::S4] {
        let r = run(id, VbrPreset::Medium, 8);
        for l in buffer_labels(&r) {
            if l.label != Label::Buffer(BufferState::Filling) {
                continue;
            }
            let (a, b) = (l.start.as_secs_f64(), l.end.as_secs_f64());
            let inside: Vec<_> = r.segments.iter().filter(|s| s.request_time >= a && s.complete_time <= b).collect();
            if inside.len() < 3 {
                continue;
            }
            let span = inside.last().unwrap().complete_time - inside[0].request_time;
            let content: f64 = inside.iter().map(|s| s.content_s).sum();
            let nominal = inside.iter().map(|s| ladder.bitrate(s.rep) * s.content_s).sum::<f64>() / content;
            let bits: f64 = inside.iter().map(|s| s.bytes as f64 * 8.0).sum();
            assert!(content / span > 1.2, "{id}: buffer gains {content} s in {span} s");
            assert!(bits / span > nominal, "{id}: {} vs {nominal}", bits / span);
        }
    }
}

#[test]
fn reruns_are_identical_and_seeds_matter() {
    for spec in [
        TraceSpec::Has { scenario: ScenarioId::S6, preset: VbrPreset::High, rep: 2 },
        TraceSpec::Download { rep: 1 },
        TraceSpec::Web { rep: 3 },
    ] {
        let a = simulate_spec(&spec, 77).unwrap();
        assert_eq!(a, simulate_spec(&spec, 77).unwrap());
        assert_ne!(a.packets, simulate_spec(&spec, 78).unwrap().packets);
    }
}

fn rows(spec: TraceSpec) -> hasprof_core::Dataset {
    let trace = simulate_spec(&spec, 5).unwrap();
    trace_samples(&trace, Task::Service, &WindowConfig::default()).unwrap()
}

#[test]
fn bulk_download_keeps_the_link_busy_without_uplink_data() {
    for rep in 0..4 {
        let ds = rows(TraceSpec::Download { rep });
        let n = ds.n_rows();
        assert!(n > 30);
        let load = FeatureKind::DlLoad as usize;
        let ul = FeatureKind::UlNPckts as usize;
        for i in 3..n - 2 {
            assert!((ds.value(i, load) - 1.0).abs() <= 0.05, "rep {rep} row {i}: {}", ds.value(i, load));
            assert_eq!(ds.value(i, ul), 0.0);
        }
    }
}

#[test]
fn web_uplink_sizes_vary_more_than_streaming_requests() {
    let std_col = 3 * 5 + FeatureKind::UlStdSize as usize;
    let count_col = 3 * 5 + FeatureKind::UlNPckts as usize;
    let mean_std = |ds: &hasprof_core::Dataset| {
        let v: Vec<f64> =
            (0..ds.n_rows()).filter(|&i| ds.value(i, count_col) >= 2.0).map(|i| ds.value(i, std_col)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let web = mean_std(&rows(TraceSpec::Web { rep: 0 }));
    let has = mean_std(&rows(TraceSpec::Has { scenario: ScenarioId::S1, preset: VbrPreset::Medium, rep: 0 }));
    assert!(web > has, "{web} vs {has}");
}

#[test]
fn scenario_grid_covers_all_buffer_states() {
    let mut seen = std::collections::BTreeSet::new();
    for id in ScenarioId::ALL {
        let trace = simulate_spec(&TraceSpec::Has { scenario: id, preset: VbrPreset::Medium, rep: 0 }, 1).unwrap();
        let ds = trace_samples(&trace, Task::Buffer, &WindowConfig::default()).unwrap();
        seen.extend(ds.labels().iter().copied());
    }
    assert_eq!(seen.into_iter().collect::<Vec<_>>(), [0, 1, 2, 3]);
}
