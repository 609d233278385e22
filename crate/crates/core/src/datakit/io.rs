//! Reading and writing datasets laid out as `rgb/`, `depth/`, `gt/` directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::{depth_contour_gt, Plane, RgbImage, RgbdSample, SynthSpec};
use crate::error::{Error, Result};

pub const RGB_DIR: &str = "rgb";
pub const DEPTH_DIR: &str = "depth";
pub const GT_DIR: &str = "gt";
pub const CONTOUR_DIR: &str = "contour";
pub const MANIFEST_FILE: &str = "manifest.json";

/// How raw depth values are mapped into `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthNorm {
    /// Divide by the maximum value of the file's bit depth.
    #[default]
    BitDepth,
    /// Stretch each map to span `[0, 1]` (constant maps become 0).
    PerImageMinMax,
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub depth_norm: DepthNorm,
    /// Flip depth polarity so larger values mean nearer.
    pub invert_depth: bool,
    /// Without a `gt/` directory, samples get an all-zero mask unless this is set.
    pub require_gt: bool,
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image { path: path.to_path_buf(), source }
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| image_err(path, e))
}

fn is_wide(img: &DynamicImage) -> bool {
    let c = img.color();
    c.bytes_per_pixel() / c.channel_count() >= 2
}

/// Reads a grayscale image normalised by its format's maximum value.
pub fn read_gray(path: &Path) -> Result<Plane> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if is_wide(&img) {
        img.into_luma16().into_raw().into_iter().map(|v| v as f64 / u16::MAX as f64).collect()
    } else {
        img.into_luma8().into_raw().into_iter().map(|v| v as f64 / u8::MAX as f64).collect()
    };
    Plane::new(h, w, data)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let interleaved: Vec<f64> = if is_wide(&img) {
        img.into_rgb16().into_raw().into_iter().map(|v| v as f64 / u16::MAX as f64).collect()
    } else {
        img.into_rgb8().into_raw().into_iter().map(|v| v as f64 / u8::MAX as f64).collect()
    };
    let channel = |c: usize| Plane::new(h, w, interleaved.iter().skip(c).step_by(3).copied().collect());
    RgbImage::new(channel(0)?, channel(1)?, channel(2)?)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn dims(p: &Plane) -> (u32, u32) {
    (p.width() as u32, p.height() as u32)
}

pub fn write_gray8(path: &Path, plane: &Plane) -> Result<()> {
    let (w, h) = dims(plane);
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(w, h, plane.data().iter().map(|&v| to_u8(v)).collect::<Vec<_>>()).expect("buffer size");
    buf.save(path).map_err(|e| image_err(path, e))
}

pub fn write_gray16(path: &Path, plane: &Plane) -> Result<()> {
    let (w, h) = dims(plane);
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(w, h, plane.data().iter().map(|&v| to_u16(v)).collect::<Vec<_>>()).expect("buffer size");
    buf.save(path).map_err(|e| image_err(path, e))
}

pub fn write_rgb8(path: &Path, rgb: &RgbImage) -> Result<()> {
    let (w, h) = dims(&rgb.channels[0]);
    let [r, g, b] = &rgb.channels;
    let mut raw = Vec::with_capacity(r.len() * 3);
    for i in 0..r.len() {
        raw.extend([to_u8(r.data()[i]), to_u8(g.data()[i]), to_u8(b.data()[i])]);
    }
    let buf = image::RgbImage::from_raw(w, h, raw).expect("buffer size");
    buf.save(path).map_err(|e| image_err(path, e))
}

/// Files in `dir` with one of `exts`, keyed by stem.
pub fn list_stems(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if let (Some(ext), Some(stem)) = (ext, path.file_stem().and_then(|s| s.to_str())) {
            if exts.contains(&ext.as_str()) {
                if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
                    return Err(Error::Dataset(format!(
                        "stem `{stem}` appears twice: {} and {}",
                        prev.display(),
                        path.display()
                    )));
                }
            }
        }
    }
    Ok(out)
}

fn normalize_depth(depth: Plane, opts: &LoadOptions) -> Plane {
    let depth = match opts.depth_norm {
        DepthNorm::BitDepth => depth,
        DepthNorm::PerImageMinMax => {
            let (lo, hi) = (depth.min(), depth.max());
            if hi > lo {
                depth.map(|v| (v - lo) / (hi - lo))
            } else {
                depth.map(|_| 0.0)
            }
        }
    };
    if opts.invert_depth {
        depth.map(|v| 1.0 - v)
    } else {
        depth
    }
}

/// Loads every sample of one split directory, sorted by stem.
pub fn load_split(dir: &Path, opts: &LoadOptions) -> Result<Vec<RgbdSample>> {
    let rgb_files = list_stems(&dir.join(RGB_DIR), &["png", "jpg", "jpeg"])?;
    let depth_files = list_stems(&dir.join(DEPTH_DIR), &["png"])?;
    let gt_dir = dir.join(GT_DIR);
    let gt_files = if gt_dir.is_dir() {
        Some(list_stems(&gt_dir, &["png"])?)
    } else if opts.require_gt {
        return Err(Error::Dataset(format!("{} has no `{GT_DIR}` directory", dir.display())));
    } else {
        None
    };

    if let Some(stem) = depth_files.keys().find(|s| !rgb_files.contains_key(*s)) {
        return Err(Error::MissingPair { stem: stem.clone(), modality: "rgb" });
    }
    if rgb_files.is_empty() {
        return Err(Error::Dataset(format!("split {} is empty", dir.display())));
    }

    let mut samples = Vec::with_capacity(rgb_files.len());
    for (stem, rgb_path) in &rgb_files {
        let depth_path =
            depth_files.get(stem).ok_or_else(|| Error::MissingPair { stem: stem.clone(), modality: "depth" })?;
        let rgb = read_rgb(rgb_path)?;
        let depth = normalize_depth(read_gray(depth_path)?, opts);
        let gt = match &gt_files {
            Some(files) => {
                let p = files.get(stem).ok_or_else(|| Error::MissingPair { stem: stem.clone(), modality: "gt" })?;
                read_gray(p)?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 })
            }
            None => Plane::zeros(rgb.height(), rgb.width()),
        };
        samples.push(RgbdSample::new(stem.clone(), rgb, depth, gt)?);
    }
    Ok(samples)
}

pub fn load_dataset(root: &Path, split: &str, opts: &LoadOptions) -> Result<Vec<RgbdSample>> {
    load_split(&root.join(split), opts)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes rgb as 8-bit, depth as 16-bit and the mask as 0/255 PNGs.
pub fn write_split(dir: &Path, samples: &[RgbdSample]) -> Result<()> {
    for sub in [RGB_DIR, DEPTH_DIR, GT_DIR] {
        create_dir(&dir.join(sub))?;
    }
    for s in samples {
        let file = format!("{}.png", s.id);
        write_rgb8(&dir.join(RGB_DIR).join(&file), &s.rgb)?;
        write_gray16(&dir.join(DEPTH_DIR).join(&file), &s.depth)?;
        write_gray8(&dir.join(GT_DIR).join(&file), &s.gt)?;
    }
    Ok(())
}

/// Metadata stored next to a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub generator: String,
    pub count: usize,
    pub seed: u64,
    pub spec: SynthSpec,
    pub ids: Vec<String>,
}

impl SynthManifest {
    pub fn new(spec: &SynthSpec, samples: &[RgbdSample]) -> Self {
        Self {
            generator: "sslsod-synth/1".into(),
            count: samples.len(),
            seed: spec.seed,
            spec: spec.clone(),
            ids: samples.iter().map(|s| s.id.clone()).collect(),
        }
    }
}

pub fn write_manifest(dir: &Path, manifest: &SynthManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<SynthManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

/// Writes `contour/<stem>.png` for every depth map in the split. Returns the count.
pub fn write_contours(dir: &Path, m: usize, opts: &LoadOptions) -> Result<usize> {
    let depth_dir = dir.join(DEPTH_DIR);
    if !depth_dir.is_dir() {
        return Err(Error::Dataset(format!("{} has no `{DEPTH_DIR}` directory", dir.display())));
    }
    let files = list_stems(&depth_dir, &["png"])?;
    let out = dir.join(CONTOUR_DIR);
    create_dir(&out)?;
    for (stem, path) in &files {
        let depth = normalize_depth(read_gray(path)?, opts);
        write_gray8(&out.join(format!("{stem}.png")), &depth_contour_gt(&depth, m)?)?;
    }
    Ok(files.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::gen_synth;

    #[test]
    fn synthetic_split_roundtrips_through_disk() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = SynthSpec { size: 16, count: 3, seed: 2, ..SynthSpec::default() };
        let samples = gen_synth(&spec).unwrap();
        write_split(tmp.path(), &samples).unwrap();
        let loaded = load_split(tmp.path(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in samples.iter().zip(&loaded) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.gt, b.gt);
            for (x, y) in a.depth.data().iter().zip(b.depth.data()) {
                assert!((x - y).abs() <= 0.5 / 65535.0 + 1e-12);
            }
            for c in 0..3 {
                for (x, y) in a.rgb.channels[c].data().iter().zip(b.rgb.channels[c].data()) {
                    assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn missing_depth_names_the_stem() {
        let tmp = tempfile::tempdir().unwrap();
        for d in [RGB_DIR, DEPTH_DIR, GT_DIR] {
            fs::create_dir_all(tmp.path().join(d)).unwrap();
        }
        write_rgb8(&tmp.path().join(RGB_DIR).join("x.png"), &RgbImage::filled(4, 4, [0.2; 3])).unwrap();
        write_gray8(&tmp.path().join(GT_DIR).join("x.png"), &Plane::zeros(4, 4)).unwrap();
        let err = load_split(tmp.path(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(&err, Error::MissingPair { stem, modality: "depth" } if stem == "x"), "{err}");
    }

    #[test]
    fn empty_split_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        for d in [RGB_DIR, DEPTH_DIR] {
            fs::create_dir_all(tmp.path().join(d)).unwrap();
        }
        assert!(load_split(tmp.path(), &LoadOptions::default()).is_err());
    }

    #[test]
    fn sixteen_bit_depth_is_scaled_by_full_range() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("d.png");
        let buf: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(2, 1, vec![0u16, 65535]).unwrap();
        buf.save(&p).unwrap();
        assert_eq!(read_gray(&p).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn per_image_min_max_stretches_depth() {
        let d = Plane::new(1, 3, vec![0.2, 0.4, 0.6]).unwrap();
        let opts = LoadOptions { depth_norm: DepthNorm::PerImageMinMax, ..LoadOptions::default() };
        let n = normalize_depth(d, &opts);
        assert!((n.data()[1] - 0.5).abs() < 1e-12);
        assert_eq!(n.data()[2], 1.0);
    }
}
