//! Image-quality and segmentation scores.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::ClassLabel;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Row-major (x-fastest) single-channel image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Validation(format!("{} values do not fill a {width}x{height} image", data.len())));
        }
        Ok(Image { width, height, data })
    }

    pub fn from_f32(width: usize, height: usize, data: &[f32]) -> Result<Self> {
        Image::new(width, height, data.iter().map(|&v| v as f64).collect())
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Image { width, height, data: vec![v; width * height] }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Validation(format!(
            "image dims differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Weighted window sums over every position where the window fits.
fn filter_valid(data: &[f64], width: usize, height: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width + 1 - SSIM_WINDOW;
    let oh = height + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let line = &data[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(w, v)| w * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|j| k[j] * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean single-scale SSIM over all fully contained 11×11 Gaussian windows.
pub fn ssim(a: &Image, b: &Image, dynamic_range: f64) -> Result<f64> {
    ssim_terms(a, b, dynamic_range).map(|t| t.0)
}

/// Mean of the contrast-structure factor of SSIM alone, i.e. SSIM with the
/// luminance comparison dropped.
pub fn contrast_structure(a: &Image, b: &Image, dynamic_range: f64) -> Result<f64> {
    ssim_terms(a, b, dynamic_range).map(|t| t.1)
}

fn ssim_terms(a: &Image, b: &Image, dynamic_range: f64) -> Result<(f64, f64)> {
    same_dims(a, b)?;
    if !(dynamic_range > 0.0) {
        return Err(Error::Validation(format!("SSIM dynamic range must be positive, got {dynamic_range}")));
    }
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::Validation(format!("SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")));
    }
    let k = gaussian_kernel();
    let (w, h) = (a.width, a.height);
    let f = |d: &[f64]| filter_valid(d, w, h, &k);
    let prod = |x: &Image, y: &Image| x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let (mu_a, mu_b) = (f(&a.data), f(&b.data));
    let (aa, bb, ab) = (f(&prod(a, a)), f(&prod(b, b)), f(&prod(a, b)));
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let (mut total, mut cs_total) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        cs_total += cs;
        total += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1) * cs;
    }
    let n = mu_a.len() as f64;
    Ok((total / n, cs_total / n))
}

/// Peak signal-to-noise ratio in dB; identical images give `+∞`.
pub fn psnr(a: &Image, b: &Image, max_value: f64) -> Result<f64> {
    same_dims(a, b)?;
    if !(max_value > 0.0) {
        return Err(Error::Validation(format!("PSNR max value must be positive, got {max_value}")));
    }
    if a.data.is_empty() {
        return Err(Error::Validation("PSNR of an empty image".into()));
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

/// `2TP / (2TP + FP + FN)`; two empty masks score 1.
pub fn dice(pred: &[bool], truth: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Validation(format!("mask sizes differ: {} vs {}", pred.len(), truth.len())));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let den = 2 * tp + fp + fn_;
    Ok(if den == 0 { 1.0 } else { (2 * tp) as f64 / den as f64 })
}

/// Dice per class after one-hot splitting the label maps.
pub fn per_class_dice(pred: &[u8], truth: &[u8], classes: &[ClassLabel]) -> Result<BTreeMap<ClassLabel, f64>> {
    if pred.len() != truth.len() {
        return Err(Error::Validation(format!("label map sizes differ: {} vs {}", pred.len(), truth.len())));
    }
    if let Some(&v) = pred.iter().chain(truth).find(|&&v| ClassLabel::from_index(v).is_none()) {
        return Err(Error::Validation(format!("unknown label value {v}")));
    }
    classes
        .iter()
        .map(|&c| {
            let i = c.index();
            let p: Vec<bool> = pred.iter().map(|&v| v == i).collect();
            let t: Vec<bool> = truth.iter().map(|&v| v == i).collect();
            Ok((c, dice(&p, &t)?))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ssim,
    Psnr,
    Dice,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ssim => "ssim",
            Metric::Psnr => "psnr",
            Metric::Dice => "dice",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sampling_rate: u32,
    pub metric: Metric,
    /// Empty for image-quality metrics.
    pub class: String,
    pub mean: f64,
    pub n: usize,
}

/// Collects scores and averages them per sampling rate, metric and class.
///
/// PSNR means are taken over finite scores only; a group whose scores are
/// all `+∞` reports `+∞`.
#[derive(Clone, Debug, Default)]
pub struct MetricReport {
    groups: BTreeMap<(u32, Metric, String), Vec<f64>>,
}

impl MetricReport {
    pub fn add(&mut self, sampling_rate: u32, metric: Metric, class: Option<ClassLabel>, value: f64) {
        let class = class.map(|c| c.name().to_string()).unwrap_or_default();
        self.groups.entry((sampling_rate, metric, class)).or_default().push(value);
    }

    pub fn extend(&mut self, other: MetricReport) {
        for (k, v) in other.groups {
            self.groups.entry(k).or_default().extend(v);
        }
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        self.groups
            .iter()
            .map(|((rate, metric, class), values)| {
                let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
                let (mean, n) = if *metric == Metric::Psnr && finite.len() < values.len() {
                    if finite.is_empty() {
                        (f64::INFINITY, values.len())
                    } else {
                        (finite.iter().sum::<f64>() / finite.len() as f64, finite.len())
                    }
                } else {
                    (values.iter().sum::<f64>() / values.len() as f64, values.len())
                };
                MetricRow { sampling_rate: *rate, metric: *metric, class: class.clone(), mean, n }
            })
            .collect()
    }

    pub fn mean(&self, sampling_rate: u32, metric: Metric, class: Option<ClassLabel>) -> Option<f64> {
        let class = class.map(|c| c.name()).unwrap_or("");
        self.rows().into_iter().find(|r| r.sampling_rate == sampling_rate && r.metric == metric && r.class == class).map(|r| r.mean)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        for row in self.rows() {
            w.serialize(&row).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Vec<MetricRow>> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
        r.deserialize().map(|row| row.map_err(|e| Error::parse(path, e))).collect()
    }
}
