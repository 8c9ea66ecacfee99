use hasprof::config::{RunConfig, ScriptFile};
use hasprof::Error;
use hasprof_core::learn::{ForestParams, KnnParams};
use hasprof_core::sim::{simulate_has, CorpusConfig, QualityMode, Rate};
use hasprof_core::{BufferState, Label, ModelSpec, Nanos, WindowConfig};

fn write(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    (dir, path)
}

#[test]
fn defaults_match_the_library_defaults() {
    let cfg = RunConfig::default();
    assert_eq!(cfg.window().unwrap(), WindowConfig::default());
    assert_eq!(cfg.model_spec().unwrap(), ModelSpec::Forest(ForestParams::default()));
    assert_eq!(cfg.corpus().unwrap(), CorpusConfig::default());
    assert_eq!(cfg.eval.k, 10);
    let (_d, empty) = write("");
    assert_eq!(RunConfig::load(&empty).unwrap(), cfg);
}

#[test]
fn every_parameter_is_overridable() {
    let (_d, p) = write(
        r#"
[features]
sampling_period_s = 0.5
windows_s = [0.5, 2, 4]
iat_threshold_s = 0.05
ul_size_threshold_bytes = 60

[model]
kind = "knn"
knn_k = 5

[eval]
k = 5
seed = 7

[corpus]
scenarios = ["s1", "s4"]
presets = ["high"]
reps = 2
downloads = 3
seed = 9
"#,
    );
    let cfg = RunConfig::load(&p).unwrap();
    let w = cfg.window().unwrap();
    assert_eq!(w.sampling_period, Nanos::from_millis(500));
    assert_eq!(w.windows, [Nanos::from_millis(500), Nanos::from_secs(2), Nanos::from_secs(4)]);
    assert_eq!(w.iat_threshold, Nanos::from_millis(50));
    assert_eq!(w.ul_size_threshold, 60);
    assert_eq!(w.n_features(), 15);
    assert_eq!(cfg.model_spec().unwrap(), ModelSpec::Knn(KnnParams { k: 5 }));
    assert_eq!((cfg.eval.k, cfg.eval.seed), (5, 7));
    let c = cfg.corpus().unwrap();
    assert_eq!(c.specs().len(), 2 * 2 + 3);
    assert_eq!(c.seed, 9);
}

#[test]
fn bad_configs_are_rejected() {
    let (_d, p) = write("[features]\nwindow_s = [1]\n");
    assert!(matches!(RunConfig::load(&p), Err(Error::Config { .. })));
    let (_d, p) = write("[features]\nwindows_s = [1, 1.5]\n");
    assert!(RunConfig::load(&p).unwrap().window().is_err());
    let (_d, p) = write("[model]\nkind = \"svm\"\n");
    assert!(RunConfig::load(&p).unwrap().model_spec().is_err());
    let (_d, p) = write("[corpus]\nscenarios = [\"s9\"]\n");
    assert!(RunConfig::load(&p).unwrap().corpus().is_err());
}

#[test]
fn script_file_drives_a_session() {
    let (_d, p) = write(
        r#"
name = "dip"
video_duration_s = 200
seed = 3
quality = "auto"
initial = "480p"

[[rate]]
at_s = 0

[[rate]]
at_s = 80
kbps = 400

[[rate]]
at_s = 160
"#,
    );
    let script = ScriptFile::load(&p).unwrap().to_script().unwrap();
    assert_eq!(script.scenario, "dip");
    assert!(matches!(script.quality, QualityMode::Auto { .. }));
    assert_eq!(script.profile.steps()[1].1, Rate::Limited(400e3));
    let run = simulate_has(&script).unwrap();
    assert!(run.trace.labels.iter().any(|l| l.label == Label::Buffer(BufferState::Filling)));
    assert!(run.trace.labels.iter().any(|l| l.label == Label::Buffer(BufferState::Depleting)));
}

#[test]
fn script_file_errors() {
    let base = "video_duration_s = 100\nquality = \"fixed\"\ninitial = \"480p\"\n";
    let (_d, p) = write(&format!("{base}switches = [{{ at_s = 50, quality = \"4K\" }}]\n[[rate]]\nat_s = 0\n"));
    assert!(ScriptFile::load(&p).unwrap().to_script().is_err());
    let (_d, p) = write(&format!("{base}[[rate]]\nat_s = 5\n"));
    assert!(ScriptFile::load(&p).unwrap().to_script().is_err());
    let (_d, p) = write(base);
    assert!(ScriptFile::load(&p).is_err());
}
