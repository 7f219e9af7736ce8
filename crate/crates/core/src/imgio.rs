//! Image loading, PGM output, intensity normalization and dataset manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Smallest image side accepted by the pipeline.
pub const MIN_PIPELINE_SIDE: usize = 32;

pub const MANIFEST_HEADER: &str = "#ridgekit-manifest v1";

/// Row-major grayscale raster. Loaded images hold intensities in `[0, 1]`;
/// normalized or filtered intermediates may step outside that range.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format("zero-sized image".into()));
        }
        if data.len() != width * height {
            return Err(Error::Format(format!(
                "pixel count {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel at signed coordinates with replicated borders.
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample with replicated borders.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(xi, yi);
        let p10 = self.get_clamped(xi + 1, yi);
        let p01 = self.get_clamped(xi, yi + 1);
        let p11 = self.get_clamped(xi + 1, yi + 1);
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        let var = self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }

    /// Rejects images too small for block-wise processing.
    pub fn check_pipeline_size(&self) -> Result<()> {
        if self.width < MIN_PIPELINE_SIDE || self.height < MIN_PIPELINE_SIDE {
            return Err(Error::InvalidParameter(format!(
                "image {}x{} is smaller than {MIN_PIPELINE_SIDE}x{MIN_PIPELINE_SIDE}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// 8-bit quantization used for PGM output.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// Loads a binary (P5) or ASCII (P2) PGM, or an 8-bit grayscale PNG.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "expected PGM (P5/P2) or PNG signature".into(),
        ))
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let luma = match img {
        image::DynamicImage::ImageLuma8(l) => l,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "png color type {:?}, expected 8-bit grayscale",
                other.color()
            )))
        }
    };
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let data = luma.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    GrayImage::new(w, h, data)
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("pgm: missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("pgm: bad {what}")))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = bytes.starts_with(b"P5");
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format("pgm: zero-sized image".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "pgm maxval {maxval}; only 8-bit PGM is supported"
        )));
    }
    let count = width * height;
    let scale = maxval as f64;
    let data: Vec<f64> = if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = cur.pos + 1;
        if bytes.len() < start + count {
            return Err(Error::Format(format!(
                "pgm: truncated raster, expected {count} bytes"
            )));
        }
        bytes[start..start + count]
            .iter()
            .map(|&v| (v as f64 / scale).min(1.0))
            .collect()
    } else {
        let mut vals = Vec::with_capacity(count);
        for _ in 0..count {
            let v = cur.number("pixel")?;
            vals.push((v as f64 / scale).min(1.0));
        }
        vals
    };
    GrayImage::new(width, height, data)
}

/// Writes a binary PGM. `comments` become `#` lines in the header.
pub fn write_pgm(img: &GrayImage, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = format!("P5\n");
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&format!("{} {}\n255\n", img.width(), img.height()));
    let mut bytes = out.into_bytes();
    bytes.extend(img.to_u8());
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Rescales intensities to a target mean and (population) variance.
/// A constant image maps to the constant `target_mean`.
pub fn normalize(img: &GrayImage, target_mean: f64, target_var: f64) -> GrayImage {
    let (mean, var) = img.mean_and_variance();
    // rounding leaves a residue of order 1e-32 on constant images
    if var <= 1e-20 {
        return img.map(|_| target_mean);
    }
    let gain = (target_var / var).sqrt();
    img.map(|v| target_mean + (v - mean) * gain)
}

/// One `(subject, sample)` key of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleKey {
    pub subject: String,
    pub sample: u32,
}

impl SampleKey {
    pub fn new(subject: impl Into<String>, sample: u32) -> Self {
        Self {
            subject: subject.into(),
            sample,
        }
    }
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.subject, self.sample)
    }
}

/// Subjects and their samples, enumerated in lexicographic subject order
/// then ascending sample number.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    subjects: Vec<String>,
    samples_per_subject: usize,
    entries: BTreeMap<SampleKey, PathBuf>,
}

impl DatasetIndex {
    /// Builds an index from `(subject, sample, path)` records without
    /// touching the filesystem.
    pub fn from_records(records: impl IntoIterator<Item = (String, u32, PathBuf)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (subject, sample, path) in records {
            if subject.is_empty() || subject.chars().any(char::is_whitespace) {
                return Err(Error::Dataset(format!("invalid subject id {subject:?}")));
            }
            let key = SampleKey::new(subject, sample);
            if entries.contains_key(&key) {
                return Err(Error::Dataset(format!(
                    "duplicate entry: subject {} sample {}",
                    key.subject, key.sample
                )));
            }
            entries.insert(key, path);
        }
        if entries.is_empty() {
            return Err(Error::Dataset("manifest declares no samples".into()));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for key in entries.keys() {
            *counts.entry(key.subject.as_str()).or_default() += 1;
        }
        let samples_per_subject = *counts.values().next().expect("nonempty");
        if let Some((s, c)) = counts.iter().find(|(_, &c)| c != samples_per_subject) {
            return Err(Error::Dataset(format!(
                "inconsistent sample counts: subject {s} has {c}, expected {samples_per_subject}"
            )));
        }
        let subjects = counts.keys().map(|s| s.to_string()).collect();
        Ok(Self {
            subjects,
            samples_per_subject,
            entries,
        })
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn samples_per_subject(&self) -> usize {
        self.samples_per_subject
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path(&self, key: &SampleKey) -> Option<&Path> {
        self.entries.get(key).map(PathBuf::as_path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SampleKey, &Path)> {
        self.entries.iter().map(|(k, p)| (k, p.as_path()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &SampleKey> {
        self.entries.keys()
    }

    /// Ascending sample numbers of one subject.
    pub fn samples_of(&self, subject: &str) -> Vec<u32> {
        self.entries
            .keys()
            .filter(|k| k.subject == subject)
            .map(|k| k.sample)
            .collect()
    }
}

/// Reads a `#ridgekit-manifest v1` file. Paths are resolved relative to the
/// manifest's directory and must exist.
pub fn load_dataset(manifest_path: &Path) -> Result<DatasetIndex> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == MANIFEST_HEADER => {}
        _ => {
            return Err(Error::Format(format!(
                "manifest must start with `{MANIFEST_HEADER}`"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "manifest line {}: expected 3 tab-separated fields",
                lineno + 2
            )));
        }
        let sample: u32 = fields[1].parse().map_err(|_| {
            Error::Format(format!("manifest line {}: bad sample number", lineno + 2))
        })?;
        let path = base.join(fields[2]);
        if !path.is_file() {
            return Err(Error::Dataset(format!(
                "missing referenced file {}",
                path.display()
            )));
        }
        records.push((fields[0].to_string(), sample, path));
    }
    DatasetIndex::from_records(records)
}

/// Writes a manifest; `entries` hold paths relative to the manifest's directory.
pub fn write_manifest(path: &Path, entries: &[(SampleKey, String)]) -> Result<()> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for (key, rel) in entries {
        out.push_str(&format!("{}\t{}\t{}\n", key.subject, key.sample, rel));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
