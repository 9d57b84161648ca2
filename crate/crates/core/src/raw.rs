//! Raw little-endian voxel files and their text sidecars.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    U8,
    F32le,
}

impl SampleFormat {
    pub fn bytes(self) -> usize {
        match self {
            SampleFormat::U8 => 1,
            SampleFormat::F32le => 4,
        }
    }
}

/// Describes the layout of one or more raw files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: SampleFormat,
    /// Extents, x first. Data is stored x-fastest.
    pub dims: Vec<usize>,
    pub spacing_mm: f64,
    /// Position of the first voxel's lower corner.
    pub origin_mm: Vec<f64>,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative_days: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_map: BTreeMap<String, String>,
}

impl Sidecar {
    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Validation(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// `foo/bar.raw` -> `foo/bar.toml`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("toml")
}

pub fn write_f32(path: &Path, data: &[f32]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for v in data {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_u8(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

pub fn read_f32(path: &Path, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::parse(path, format!("expected {} f32 values, found {} bytes", expected_len, bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn read_u8(path: &Path, expected_len: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len {
        return Err(Error::parse(path, format!("expected {} bytes, found {}", expected_len, bytes.len())));
    }
    Ok(bytes)
}

/// Writes a 16-bit grayscale PNG, windowed to the 1st–99th percentile of the
/// data so a few hot voxels do not wash out the image.
pub fn write_png_windowed(path: &Path, width: usize, height: usize, data: &[f32]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::Validation(format!("image is {} values, expected {width}x{height}", data.len())));
    }
    let (lo, hi) = percentile_window(data, 0.01, 0.99);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut pixels = Vec::with_capacity(data.len() * 2);
    // PNG rows run top to bottom; put +y at the top
    for row in (0..height).rev() {
        for &v in &data[row * width..(row + 1) * width] {
            let t = ((v as f64 - lo) / span).clamp(0.0, 1.0);
            pixels.extend_from_slice(&((t * 65535.0).round() as u16).to_be_bytes());
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header().map_err(|e| Error::Validation(format!("png: {e}")))?;
    writer.write_image_data(&pixels).map_err(|e| Error::Validation(format!("png: {e}")))?;
    writer.finish().map_err(|e| Error::Validation(format!("png: {e}")))
}

/// Nearest-rank percentiles of the finite values.
pub fn percentile_window(data: &[f32], lo_q: f64, hi_q: f64) -> (f64, f64) {
    let mut v: Vec<f64> = data.iter().filter(|x| x.is_finite()).map(|&x| x as f64).collect();
    if v.is_empty() {
        return (0.0, 1.0);
    }
    v.sort_by(f64::total_cmp);
    let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    (at(lo_q), at(hi_q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_round_trip_and_length_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.raw");
        let data = [0.0f32, 1.5, -2.25, f32::MAX];
        write_f32(&p, &data).unwrap();
        assert_eq!(fs::read(&p).unwrap()[4..8], 1.5f32.to_le_bytes());
        assert_eq!(read_f32(&p, 4).unwrap(), data);
        assert!(read_f32(&p, 5).is_err());
    }

    #[test]
    fn percentiles() {
        let data: Vec<f32> = (0..=100).map(|v| v as f32).collect();
        assert_eq!(percentile_window(&data, 0.01, 0.99), (1.0, 99.0));
    }

    #[test]
    fn png_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let data: Vec<f32> = (0..12).map(|v| v as f32).collect();
        write_png_windowed(&p, 4, 3, &data).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }
}
