//! Scoring predicted images and label maps against a generated run.
//!
//! Predictions mirror the run layout: `sample_XXXX/day_DDD/slice_ZZZ.raw`
//! (f32 mrad) for image quality, `sample_XXXX/day_DDD/labels_ZZZ.raw` (u8
//! class indices) for segmentation. Image scores are taken against the
//! final-day slice; label scores against the sample's label volume.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LabelVolume;
use crate::manifest::Manifest;
use crate::materials::ClassLabel;
use crate::metrics::{per_class_dice, psnr, ssim, Image, Metric, MetricReport};
use crate::pipeline::read_slice;
use crate::raw;
use crate::reconstruction::ImageSlice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ImageQuality,
    Segmentation,
}

pub fn label_file_name(z_index: usize) -> String {
    format!("labels_{z_index:03}.raw")
}

#[derive(Debug, Default)]
pub struct Evaluation {
    pub report: MetricReport,
    /// Prediction files that were expected but absent.
    pub missing: Vec<PathBuf>,
    /// Image pairs skipped because the ground-truth slice is empty.
    pub skipped_empty: usize,
}

struct Job {
    day: u32,
    sample_dir: PathBuf,
    truth_dir: PathBuf,
    z: usize,
    pred: PathBuf,
}

enum Scored {
    Image { ssim: f64, psnr: f64 },
    Labels(Vec<(ClassLabel, f64)>),
    EmptyTruth,
}

fn score(job: &Job, mode: Mode, dims: [usize; 3], labels: Option<&LabelVolume>) -> Result<Scored> {
    let (w, h) = (dims[0], dims[1]);
    match mode {
        Mode::ImageQuality => {
            let truth = read_slice(&job.truth_dir, job.z)?;
            let pred = raw::read_f32(&job.pred, w * h)?;
            let t = Image::from_f32(w, h, &truth.data)?;
            let p = Image::from_f32(w, h, &pred)?;
            let max = t.max();
            if !(max > 0.0) {
                return Ok(Scored::EmptyTruth);
            }
            Ok(Scored::Image { ssim: ssim(&p, &t, max)?, psnr: psnr(&p, &t, max)? })
        }
        Mode::Segmentation => {
            let labels = labels.ok_or_else(|| Error::Precondition("label volume not loaded".into()))?;
            let pred = raw::read_u8(&job.pred, w * h)?;
            let d = per_class_dice(&pred, labels.slice(job.z), &ClassLabel::FOREGROUND)?;
            Ok(Scored::Labels(d.into_iter().collect()))
        }
    }
}

/// Score every prediction named by the manifest.
pub fn cmd_evaluate(manifest: &Manifest, root: &Path, predictions: &Path, mode: Mode) -> Result<Evaluation> {
    if !predictions.is_dir() {
        return Err(Error::Precondition(format!("predictions directory {} does not exist", predictions.display())));
    }
    let mut out = Evaluation::default();
    for sample in manifest.samples.iter().filter(|s| s.is_ok()) {
        let Some(last) = sample.days.last() else { continue };
        let labels = match (mode, &sample.labels) {
            (Mode::Segmentation, Some(p)) => Some(LabelVolume::load(&root.join(p))?),
            _ => None,
        };
        let mut jobs = Vec::new();
        for day in &sample.days {
            for z in 0..manifest.dims[2] {
                let name = match mode {
                    Mode::ImageQuality => ImageSlice::file_name(z),
                    Mode::Segmentation => label_file_name(z),
                };
                let pred = predictions.join(&day.dir).join(name);
                if pred.is_file() {
                    jobs.push(Job { day: day.day, sample_dir: day.dir.clone(), truth_dir: root.join(&last.dir), z, pred });
                } else {
                    out.missing.push(pred);
                }
            }
        }
        let scored: Vec<Result<Scored>> = jobs.par_iter().map(|j| score(j, mode, manifest.dims, labels.as_ref())).collect();
        for (job, s) in jobs.iter().zip(scored) {
            match s.map_err(|e| Error::Validation(format!("{}: {e}", job.sample_dir.display())))? {
                Scored::Image { ssim, psnr } => {
                    out.report.add(job.day, Metric::Ssim, None, ssim);
                    out.report.add(job.day, Metric::Psnr, None, psnr);
                }
                Scored::Labels(d) => {
                    for (c, v) in d {
                        out.report.add(job.day, Metric::Dice, Some(c), v);
                    }
                }
                Scored::EmptyTruth => out.skipped_empty += 1,
            }
        }
    }
    Ok(out)
}
