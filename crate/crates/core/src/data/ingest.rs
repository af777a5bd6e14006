//! Loading labeled PNG folders.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

use super::{Image, Label, LabeledDataset, LabeledSample, ValueRange};

pub const MANIFEST: &str = "manifest.csv";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestReport {
    pub loaded: usize,
    /// Files listed in the manifest that could not be decoded.
    pub skipped: Vec<String>,
}

/// Maps an 8-bit intensity linearly onto `[−1, 1]`.
pub fn map_u8(v: f32) -> f32 {
    (2.0 * v / 255.0 - 1.0).clamp(-1.0, 1.0)
}

fn read_manifest(dir: &Path) -> Result<Vec<(String, Label)>> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(Error::MissingManifest(path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(&path)
        .map_err(|e| Error::format(&path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::format(&path, format!("line {}: expected `filename,label`", i + 1)));
        }
        let (file, label) = (&rec[0], &rec[1]);
        if i == 0 && file.eq_ignore_ascii_case("filename") {
            continue;
        }
        let label = Label::parse(label)
            .ok_or_else(|| Error::format(&path, format!("line {}: unknown label `{label}`", i + 1)))?;
        rows.push((file.to_string(), label));
    }
    Ok(rows)
}

fn load_one(path: &PathBuf, resolution: usize, channels: usize) -> std::result::Result<Vec<f32>, String> {
    let img = image::open(path).map_err(|e| e.to_string())?;
    let r = resolution as u32;
    let values: Vec<f32> = if channels == 1 {
        let g = img.to_luma8();
        let f: ImageBuffer<Luma<f32>, Vec<f32>> =
            ImageBuffer::from_fn(g.width(), g.height(), |x, y| Luma([g.get_pixel(x, y)[0] as f32 / 255.0]));
        let f = if f.dimensions() == (r, r) { f } else { imageops::resize(&f, r, r, FilterType::Triangle) };
        f.into_raw()
    } else if channels == 3 {
        let c = img.to_rgb8();
        let f: ImageBuffer<Rgb<f32>, Vec<f32>> = ImageBuffer::from_fn(c.width(), c.height(), |x, y| {
            let p = c.get_pixel(x, y);
            Rgb([p[0] as f32 / 255.0, p[1] as f32 / 255.0, p[2] as f32 / 255.0])
        });
        let f = if f.dimensions() == (r, r) { f } else { imageops::resize(&f, r, r, FilterType::Triangle) };
        // interleaved RGB to channel-major
        let raw = f.into_raw();
        (0..3).flat_map(|c| raw.iter().skip(c).step_by(3).copied().collect::<Vec<_>>()).collect()
    } else {
        return Err(format!("unsupported channel count {channels}"));
    };
    // float buffers are resampled in unit range
    Ok(values.into_iter().map(|v| (2.0 * v - 1.0).clamp(-1.0, 1.0)).collect())
}

/// Reads every file listed in `manifest.csv` under `dir`, resized to
/// `resolution`² with `channels` ∈ {1, 3}. Undecodable files are skipped.
pub fn ingest_folder(dir: &Path, resolution: usize, channels: usize) -> Result<(LabeledDataset, IngestReport)> {
    if resolution == 0 {
        return Err(Error::UnsupportedResolution(resolution));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidConfig(format!("channels must be 1 or 3, got {channels}")));
    }
    let rows = read_manifest(dir)?;
    let mut seen = BTreeSet::new();
    let mut report = IngestReport::default();
    let mut samples = Vec::new();
    for (file, label) in rows {
        if !seen.insert(file.clone()) {
            return Err(Error::format(dir.join(MANIFEST), format!("duplicate entry `{file}`")));
        }
        match load_one(&dir.join(&file), resolution, channels) {
            Ok(values) => {
                let image = Image::new(resolution, resolution, channels, values, ValueRange::SYMMETRIC)?;
                samples.push(LabeledSample { image, label, source_id: file });
            }
            Err(e) => {
                log::warn!("skipping {file}: {e}");
                report.skipped.push(file);
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyFolder(dir.to_path_buf()));
    }
    report.loaded = samples.len();
    Ok((LabeledDataset { resolution, channels, samples }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
        ImageBuffer::from_fn(w, h, |x, y| Luma([f(x, y)])).save(path).unwrap();
    }

    #[test]
    fn endpoints_and_midpoint_of_linear_map() {
        assert_eq!(map_u8(0.0), -1.0);
        assert_eq!(map_u8(255.0), 1.0);
        assert!((map_u8(128.0) as f64 - 0.003_921_568_627_451).abs() < 1e-6);
    }

    #[test]
    fn ten_pngs_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = String::from("filename,label\n");
        for i in 0..10u32 {
            let name = format!("img{i}.png");
            write_png(&dir.path().join(&name), 8, 8, |x, _| if x == 0 { 0 } else { 128 + i as u8 });
            manifest += &format!("{name},{}\n", if i < 7 { "normal" } else { "anomaly" });
        }
        std::fs::write(dir.path().join(MANIFEST), manifest).unwrap();
        let (d, report) = ingest_folder(dir.path(), 8, 1).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(report.skipped.len(), 0);
        assert_eq!(d.count(Label::Anomaly), 3);
        assert_eq!(d.samples[0].image.values()[0], -1.0);
        assert!((d.samples[0].image.values()[1] - map_u8(128.0)).abs() < 1e-7);
    }

    #[test]
    fn resizes_rgb_and_skips_garbage() {
        let dir = tempfile::tempdir().unwrap();
        ImageBuffer::from_fn(32, 32, |_, _| Rgb([255u8, 0, 255])).save(dir.path().join("a.png")).unwrap();
        std::fs::write(dir.path().join("b.png"), b"not an image").unwrap();
        std::fs::write(dir.path().join(MANIFEST), "a.png,normal\nb.png,anomaly\n").unwrap();
        let (d, report) = ingest_folder(dir.path(), 16, 3).unwrap();
        assert_eq!(report.skipped, vec!["b.png".to_string()]);
        let v = d.samples[0].image.values();
        assert_eq!(v.len(), 768);
        assert!(v[..256].iter().all(|&x| (x - 1.0).abs() < 1e-6));
        assert!(v[256..512].iter().all(|&x| (x + 1.0).abs() < 1e-6));
    }

    #[test]
    fn missing_manifest_and_empty_folder() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_folder(dir.path(), 8, 1), Err(Error::MissingManifest(_))));
        std::fs::write(dir.path().join(MANIFEST), "").unwrap();
        assert!(matches!(ingest_folder(dir.path(), 8, 1), Err(Error::EmptyFolder(_))));
    }
}
