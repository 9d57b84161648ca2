use std::fs;
use std::path::Path;

use muscat::config::RunConfig;
use muscat::evaluate::{cmd_evaluate, label_file_name, Mode};
use muscat::geometry::{LabelVolume, Slab};
use muscat::materials::ClassLabel;
use muscat::metrics::{Metric, MetricReport};
use muscat::pipeline::cmd_generate;
use muscat::raw;

fn small_run(out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.run.samples = 2;
    c.run.days = 2;
    c.run.out = out.to_path_buf();
    c.geometry.slab = Slab { size: [60.0, 60.0, 30.0] };
    c.geometry.grids.count = [0, 0];
    c.geometry.ducts.count = [0, 0];
    c.geometry.voids.count = [1, 1];
    c.geometry.unknowns.count = [0, 0];
    c
}

#[test]
fn run_scored_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run(dir.path());
    let m = cmd_generate(&cfg).unwrap();
    let eval = cmd_evaluate(&m, dir.path(), dir.path(), Mode::ImageQuality).unwrap();
    assert!(eval.missing.is_empty());
    // final day against itself is exact
    assert_eq!(eval.report.mean(2, Metric::Psnr, None), Some(f64::INFINITY));
    assert!((eval.report.mean(2, Metric::Ssim, None).unwrap() - 1.0).abs() < 1e-12);
    let early = eval.report.mean(1, Metric::Ssim, None).unwrap();
    assert!(early < 1.0, "{early}");

    let csv = dir.path().join("metrics.csv");
    eval.report.write_csv(&csv).unwrap();
    let rows = MetricReport::read_csv(&csv).unwrap();
    assert_eq!(rows.len(), eval.report.rows().len());
}

#[test]
fn true_labels_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let preds = dir.path().join("preds");
    let m = cmd_generate(&small_run(&run)).unwrap();
    for s in &m.samples {
        let labels = LabelVolume::load(&run.join(s.labels.as_ref().unwrap())).unwrap();
        for d in &s.days {
            fs::create_dir_all(preds.join(&d.dir)).unwrap();
            for z in 0..m.dims[2] {
                raw::write_u8(&preds.join(&d.dir).join(label_file_name(z)), labels.slice(z)).unwrap();
            }
        }
    }
    let eval = cmd_evaluate(&m, &run, &preds, Mode::Segmentation).unwrap();
    assert!(eval.missing.is_empty());
    for day in [1, 2] {
        for c in ClassLabel::FOREGROUND {
            assert_eq!(eval.report.mean(day, Metric::Dice, Some(c)), Some(1.0), "{c:?}");
        }
    }
}

#[test]
fn empty_predictions_reported_missing() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let m = cmd_generate(&small_run(&run)).unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let eval = cmd_evaluate(&m, &run, &empty, Mode::ImageQuality).unwrap();
    assert_eq!(eval.missing.len(), 2 * 2 * m.dims[2]);
    assert!(eval.report.rows().is_empty());
    assert!(cmd_evaluate(&m, &run, &dir.path().join("absent"), Mode::ImageQuality).is_err());
}
