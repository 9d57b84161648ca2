use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn muscat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muscat")).args(args).output().unwrap()
}

const TINY: &str = r#"
[run]
samples = 2
days = 1

[geometry.slab]
size = [100.0, 100.0, 40.0]

[geometry.grids]
count = [1, 1]
rod_diameters = [10.0]
spacings = [40.0]
rods_per_direction = [2, 2]

[geometry.ducts]
count = [0, 0]

[geometry.voids]
count = [0, 0]

[geometry.unknowns]
count = [0, 0]
"#;

fn generate_tiny(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.join("run");
    let o = muscat(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_writes_slices_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_tiny(dir.path());
    assert!(out.join("manifest.toml").is_file());
    assert!(out.join("config.toml").is_file());
    let day = out.join("sample_0001/day_001");
    let slices: Vec<_> =
        fs::read_dir(&day).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "raw")).collect();
    assert_eq!(slices.len(), 20);
    assert_eq!(fs::metadata(day.join("slice_000.raw")).unwrap().len(), 50 * 50 * 4);

    let o = muscat(&["inspect", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("2 samples, 0 failed"), "{text}");

    let png = dir.path().join("slice.png");
    let o = muscat(&["export-png", day.join("slice_010.raw").to_str().unwrap(), "-o", png.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(&fs::read(&png).unwrap()[1..4], b"PNG");

    let labels_png = dir.path().join("labels.png");
    let o = muscat(&["export-png", out.join("sample_0000/labels.raw").to_str().unwrap(), "--z", "10", "-o", labels_png.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_against_itself_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_tiny(dir.path());
    let run = out.to_str().unwrap();
    let report = dir.path().join("report.csv");
    let o = muscat(&["evaluate", "--run", run, "--predictions", run, "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("sampling_rate,metric,class,mean,n"), "{csv}");
    assert!(csv.contains("1,psnr,"), "{csv}");

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = muscat(&["evaluate", "--run", run, "--predictions", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
}

#[test]
fn print_config_round_trips() {
    let o = muscat(&["generate", "--print-config", "--seed", "0xff", "--days", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("seed = \"0x00000000000000ff\""), "{text}");
    assert!(text.contains("days = 3"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("printed.toml");
    fs::write(&cfg, &text).unwrap();
    let again = muscat(&["generate", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\nsamples = 0\n").unwrap();
    let o = muscat(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&cfg, "[geometry.grids]\nmaterial = \"unobtainium\"\n").unwrap();
    let o = muscat(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("y").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(&cfg, "not toml [").unwrap();
    assert_eq!(muscat(&["generate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}
