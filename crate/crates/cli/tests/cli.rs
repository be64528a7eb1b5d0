use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hodmd::io::{load_modes, load_spectrum, load_time_series, read_track_rows};
use hodmd::kds::find_peaks;
use tempfile::TempDir;

fn hodmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hodmd")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = hodmd(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(args: &[&str]) -> i32 {
    hodmd(args).status.code().expect("exit code")
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Dir {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.path(name), text).unwrap();
        self.s(name)
    }

    fn preset(&self, name: &str) -> String {
        let file = format!("{name}.csv");
        ok(&["synth", "--preset", name, "-o", &self.s(&file)]);
        self.s(&file)
    }
}

fn peak_of(path: &Path) -> f64 {
    let s = load_spectrum(path).unwrap();
    let j = s.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    s.frequencies[j]
}

const TWO_MODES: &str = "# dt=4e-5 d=10 ranks=1,4,2
frequency_hz,growth_rate,amplitude,phase_rad,shape0_re,shape0_im
2014,-10,1,0,1,0
2028,-10,1,0,1,0
";

#[test]
fn synth_presets_and_determinism() {
    let dir = Dir::new();
    let case1 = dir.preset("paper-case-1");
    let ts = load_time_series(Path::new(&case1)).unwrap();
    assert_eq!(ts.len(), 65536);
    assert!((ts.fs() - 25000.0).abs() < 1e-6);

    let a = dir.s("a.csv");
    let b = dir.s("b.csv");
    ok(&["synth", "--preset", "paper-case-2", "--noise-sigma", "0.01", "--seed", "7", "-o", &a]);
    ok(&["synth", "--preset", "paper-case-2", "--noise-sigma", "0.01", "--seed", "7", "-o", &b]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    ok(&["synth", "--preset", "paper-case-2", "--noise-sigma", "0.01", "--seed", "8", "-o", &b]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let cfg = dir.write("empty.toml", "[synth]\ncomponents = []\nsamples = 100\n");
    let zero = dir.s("zero.csv");
    ok(&["synth", "--config", &cfg, "-o", &zero]);
    let ts = load_time_series(Path::new(&zero)).unwrap();
    assert_eq!(ts.len(), 100);
    assert!(ts.real_parts().iter().all(|&x| x == 0.0));

    assert_eq!(code(&["synth", "--preset", "paper-case-9", "-o", &zero]), 2);
    assert_eq!(code(&["synth", "--preset", "paper-case-1", "--noise-sigma", "-1", "-o", &zero]), 2);
}

#[test]
fn decompose_outputs_modes_and_summary() {
    let dir = Dir::new();
    let case1 = dir.preset("paper-case-1");
    let (modes, summary) = (dir.s("modes.csv"), dir.s("summary.json"));
    ok(&["decompose", &case1, "--length", "4096", "-o", &modes, "--summary", &summary]);
    let file = load_modes(Path::new(&modes)).unwrap();
    assert_eq!(file.modes.len(), 1);
    assert!((file.modes[0].frequency_hz - 2000.0).abs() < 1e-6);
    assert_eq!(file.d, 32);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["ranks"]["modes"], 1);
    assert!(json["relative_rms"].as_f64().unwrap() < 1e-9);
    assert!(json["relative_max"].is_number() && json["wall_time_s"].is_number());

    let case2 = dir.preset("paper-case-2");
    ok(&["decompose", &case2, "-d", "6", "-o", &modes]);
    assert_eq!(load_modes(Path::new(&modes)).unwrap().modes.len(), 3);
}

#[test]
fn decompose_exit_codes() {
    let dir = Dir::new();
    let zero = dir.write("zero.csv", &format!("# dt=1e-3\n{}", "0\n".repeat(200)));
    let out = dir.s("modes.csv");
    assert_eq!(code(&["decompose", &zero, "-d", "10", "-o", &out]), 4);
    assert_eq!(code(&["decompose", &zero, "-d", "100", "-o", &out]), 3);
    assert_eq!(code(&["decompose", &zero, "-d", "0", "-o", &out]), 2);
    assert_eq!(code(&["decompose", &zero, "--temporal", "svd", "-o", &out]), 2);
    assert_eq!(code(&["decompose", &zero, "--start", "500", "-o", &out]), 2);
    assert_eq!(code(&["decompose", &zero, "-o", &zero]), 2);
    assert_eq!(code(&["decompose", &dir.s("missing.csv"), "-o", &out]), 1);
    let bad = dir.write("bad.toml", "[hodmd]\ndelay = 3\n");
    assert_eq!(code(&["decompose", &zero, "--config", &bad, "-o", &out]), 2);
    assert!(!dir.path("modes.csv").exists());
}

#[test]
fn config_file_supplies_paths_and_settings() {
    let dir = Dir::new();
    let case2 = dir.preset("paper-case-2");
    let cfg = dir.write(
        "run.toml",
        &format!(
            "input = '{}'\noutput = '{}'\n[hodmd]\nd = 6\nlength = 2048\ntemporal_policy = 'count:6'\n",
            case2,
            dir.s("modes.csv")
        ),
    );
    ok(&["decompose", "--config", &cfg]);
    assert_eq!(load_modes(&dir.path("modes.csv")).unwrap().modes.len(), 3);
    // flags win over the file
    ok(&["decompose", "--config", &cfg, "--temporal", "count:2"]);
    assert_eq!(load_modes(&dir.path("modes.csv")).unwrap().modes.len(), 1);
}

#[test]
fn spectrum_command() {
    let dir = Dir::new();
    let two = dir.write("two.csv", TWO_MODES);
    let out = dir.s("kds.csv");
    ok(&["spectrum", &two, "--h", "0.05", "--step", "0.01", "-o", &out]);
    let s = load_spectrum(Path::new(&out)).unwrap();
    assert_eq!(find_peaks(&s, 0.01).len(), 2);
    assert_eq!(s.meta_value("kernel"), Some("gaussian"));

    let one = dir.write("one.csv", &TWO_MODES.lines().take(3).map(|l| format!("{l}\n")).collect::<String>());
    ok(&["spectrum", &one, "--h", "0.5", "--weighting", "density", "-o", &out]);
    let s = load_spectrum(Path::new(&out)).unwrap();
    let max = s.values.iter().fold(0.0f64, |a, &b| a.max(b));
    assert!((max - 1.0).abs() < 1e-12);
    assert!((peak_of(Path::new(&out)) - 2014.0).abs() < 1e-9);

    let (soft, sharp) = (dir.s("soft.csv"), dir.s("sharp.csv"));
    let grid = ["--f-min", "1990", "--f-max", "2050", "--step", "0.05"];
    ok(&[&["spectrum", &two, "--kernel", "lorentz", "--h", "1", "-o", &soft][..], &grid].concat());
    ok(&[&["spectrum", &two, "--kernel", "lorentz", "--h", "1000", "-o", &sharp][..], &grid].concat());
    let (a, b) = (load_spectrum(Path::new(&soft)).unwrap(), load_spectrum(Path::new(&sharp)).unwrap());
    for ((f, x), y) in a.frequencies.iter().zip(&a.values).zip(&b.values) {
        if (f - 2014.0).abs() > 0.5 && (f - 2028.0).abs() > 0.5 {
            assert!(y <= x);
        }
    }

    assert_eq!(code(&["spectrum", &two, "--h", "0.05", "--step", "0.1", "-o", &out]), 2);
    assert_eq!(code(&["spectrum", &two, "--kernel", "box", "-o", &out]), 2);
}

#[test]
fn fft_command() {
    let dir = Dir::new();
    let case1 = dir.preset("paper-case-1");
    let out = dir.s("fft.csv");
    ok(&["fft", &case1, "-o", &out]);
    assert!((peak_of(Path::new(&out)) - 2000.0).abs() <= 25000.0 / 65536.0);

    let constant = dir.write("const.csv", &format!("# dt=0.01\n{}", "2.5\n".repeat(64)));
    ok(&["fft", &constant, "-o", &out]);
    let s = load_spectrum(Path::new(&out)).unwrap();
    assert!(s.values[0] > 0.0);
    assert!(s.values[1..].iter().all(|&v| v < 1e-20 * s.values[0]));

    let noise = dir.s("noise.csv");
    let cfg = dir.write("noise.toml", "[synth]\ncomponents = []\nsamples = 8192\nsample_rate_hz = 1000.0\nnoise_sigma = 1.0\n");
    ok(&["synth", "--config", &cfg, "--seed", "5", "-o", &noise]);
    let (raw, smooth) = (dir.s("raw.csv"), dir.s("welch.csv"));
    ok(&["fft", &noise, "-o", &raw]);
    ok(&["fft", &noise, "--method", "welch", "--segment-length", "1024", "--overlap", "0", "-o", &smooth]);
    let spread = |p: &str| {
        let v = load_spectrum(Path::new(p)).unwrap().values;
        let inner = &v[1..v.len() - 1];
        let m = inner.iter().sum::<f64>() / inner.len() as f64;
        inner.iter().map(|x| (x - m).powi(2)).sum::<f64>() / inner.len() as f64 / (m * m)
    };
    assert!(spread(&smooth) < spread(&raw));
    assert_eq!(code(&["fft", &noise, "--segment-length", "64", "-o", &out]), 2);
    assert_eq!(code(&["fft", &noise, "--method", "welch", "--segment-length", "100", "-o", &out]), 2);
}

#[test]
fn glide_command() {
    let dir = Dir::new();
    let cfg = dir.write(
        "tones.toml",
        "[synth]\nsamples = 1200\nsample_rate_hz = 5000.0\ncomponents = [\n  { amplitude = 1.0, frequency_hz = 310.0, damping = 0.0 },\n  { amplitude = 0.5, frequency_hz = 745.0, damping = 0.0 },\n]\n",
    );
    let input = dir.s("tones.csv");
    ok(&["synth", "--config", &cfg, "-o", &input]);
    let (track, pool) = (dir.s("track.csv"), dir.s("pool.csv"));
    ok(&["glide", &input, "--window-len", "256", "--hop", "100", "-d", "20", "-o", &track, "--pool", &pool, "--floor", "0"]);
    let rows = read_track_rows(std::fs::File::open(&track).unwrap()).unwrap();
    let windows = (1200 - 256) / 100 + 1;
    assert_eq!(rows.len(), 2 * windows);
    for r in &rows {
        assert!((r.frequency_hz - 310.0).abs() < 1e-3 || (r.frequency_hz - 745.0).abs() < 1e-3);
    }
    assert_eq!(load_modes(Path::new(&pool)).unwrap().modes.len(), rows.len());

    // one window covering the record equals a plain decomposition
    let modes = dir.s("modes.csv");
    ok(&["glide", &input, "--window-len", "1200", "--hop", "1200", "-d", "20", "-o", &track, "--pool", &pool]);
    ok(&["decompose", &input, "-d", "20", "-o", &modes]);
    assert_eq!(load_modes(Path::new(&pool)).unwrap().modes, load_modes(Path::new(&modes)).unwrap().modes);

    assert_eq!(code(&["glide", &input, "--window-len", "40", "-d", "20", "-o", &track]), 3);
    assert_eq!(code(&["glide", &input, "--window-len", "256", "--hop", "0", "-d", "20", "-o", &track]), 2);
    assert_eq!(code(&["glide", &input, "--window-len", "256", "-d", "20", "-o", &track, "--pool", &track]), 2);
}

#[test]
fn compare_command() {
    let dir = Dir::new();
    let case2 = dir.preset("paper-case-2");
    let out = dir.s("cmp2");
    ok(&["compare", &case2, "-d", "100", "--length", "4096", "--truth-preset", "paper-case-2", "--out-dir", &out]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path("cmp2/report.json")).unwrap()).unwrap();
    let errors = report["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 3);
    for e in errors {
        assert!(e["hodmd_error_hz"].as_f64().unwrap() < 0.1);
    }
    assert!(dir.path("cmp2/modes.csv").exists() && dir.path("cmp2/kds.csv").exists());

    // the Fourier path needs the whole record for its finest bins
    ok(&["compare", &case2, "-d", "6", "--truth", "2008,1992,1800", "--out-dir", &out]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path("cmp2/report.json")).unwrap()).unwrap();
    let low = report["errors"].as_array().unwrap().iter().find(|e| e["truth_hz"] == 1800.0).unwrap().clone();
    assert!(low["hodmd_error_hz"].as_f64().unwrap() < 0.1);
    assert!(low["fft_error_hz"].as_f64().unwrap() >= 1.0);

    let case1 = dir.preset("paper-case-1");
    let out1 = dir.s("cmp1");
    ok(&["compare", &case1, "-d", "16", "--truth", "2000", "--out-dir", &out1]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path("cmp1/report.json")).unwrap()).unwrap();
    let e = &report["errors"][0];
    let bin = report["fft_bin_hz"].as_f64().unwrap();
    assert!((e["hodmd_hz"].as_f64().unwrap() - e["fft_hz"].as_f64().unwrap()).abs() <= bin);

    ok(&["compare", &case1, "-d", "16", "--length", "4096", "--out-dir", &out1]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path("cmp1/report.json")).unwrap()).unwrap();
    assert!(report.get("errors").is_none());
    assert!(report["fft_spectrum"].is_string() && report["kds_spectrum"].is_string());
}
