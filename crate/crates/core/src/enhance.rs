//! Gabor filter-bank enhancement, binarization and thinning.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::angle::{axial_dist, wrap_half};
use crate::error::{Error, Result};
use crate::imgio::GrayImage;
use crate::ridgefield::{FrequencyField, OrientationField, RoiMask};

/// Square grid of real filter taps with half-width `half`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    half: usize,
    taps: Vec<f64>,
}

impl GaborKernel {
    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn side(&self) -> usize {
        2 * self.half + 1
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap at offset `(x, y)`, both in `[-half, half]`.
    pub fn tap(&self, x: isize, y: isize) -> f64 {
        let h = self.half as isize;
        self.taps[((y + h) * (2 * h + 1) + (x + h)) as usize]
    }

    pub fn mean(&self) -> f64 {
        self.taps.iter().sum::<f64>() / self.taps.len() as f64
    }

    fn remove_dc(mut self) -> Self {
        let m = self.mean();
        self.taps.iter_mut().for_each(|t| *t -= m);
        self
    }
}

/// Even-symmetric Gabor response at `(x, y)`: a Gaussian envelope with
/// deviations `sigma_x`, `sigma_y` in the frame rotated by `theta`, times a
/// cosine of frequency `freq` along the rotated x axis.
pub fn gabor_tap(x: f64, y: f64, theta: f64, freq: f64, sigma_x: f64, sigma_y: f64) -> f64 {
    let xt = x * theta.cos() + y * theta.sin();
    let yt = -x * theta.sin() + y * theta.cos();
    (-0.5 * (xt * xt / (sigma_x * sigma_x) + yt * yt / (sigma_y * sigma_y))).exp()
        * (2.0 * PI * freq * xt).cos()
}

/// Kernel taps before DC removal.
pub fn gabor_kernel_raw(theta: f64, freq: f64, sigma_x: f64, sigma_y: f64, half: usize) -> Result<GaborKernel> {
    if !(freq > 0.0 && freq < 0.5) {
        return Err(Error::InvalidParameter(format!("gabor frequency {freq} outside (0, 0.5)")));
    }
    if !(sigma_x > 0.0 && sigma_y > 0.0) {
        return Err(Error::InvalidParameter("gabor sigmas must be positive".into()));
    }
    if half < 1 {
        return Err(Error::InvalidParameter("gabor half-width must be >= 1".into()));
    }
    let h = half as isize;
    let mut taps = Vec::with_capacity((2 * half + 1).pow(2));
    for y in -h..=h {
        for x in -h..=h {
            taps.push(gabor_tap(x as f64, y as f64, theta, freq, sigma_x, sigma_y));
        }
    }
    Ok(GaborKernel { half, taps })
}

/// Zero-mean Gabor kernel (the raw taps minus their mean).
pub fn gabor_kernel(theta: f64, freq: f64, sigma_x: f64, sigma_y: f64, half: usize) -> Result<GaborKernel> {
    Ok(gabor_kernel_raw(theta, freq, sigma_x, sigma_y, half)?.remove_dc())
}

/// Filters for every pair of discretised ridge orientation and ridge
/// frequency. Orientations are ridge directions; each kernel's wave runs
/// across the ridge, at `orientation + π/2`.
#[derive(Debug, Clone)]
pub struct GaborBank {
    orientations: Vec<f64>,
    frequencies: Vec<f64>,
    sigma_x: f64,
    sigma_y: f64,
    kernels: Vec<GaborKernel>,
}

/// Frequency bins: values rounded to 0.01 cycles/px, clamped to
/// `[f_min, f_max]`, deduplicated and sorted.
pub fn frequency_bins(freqs: &[f64], f_min: f64, f_max: f64) -> Vec<f64> {
    let mut keys = BTreeSet::new();
    for &f in freqs {
        let rounded = (f * 100.0).round() / 100.0;
        let clamped = rounded.clamp(f_min, f_max);
        keys.insert(clamped.to_bits());
    }
    let mut out: Vec<f64> = keys.into_iter().map(f64::from_bits).collect();
    out.sort_by(f64::total_cmp);
    out
}

pub fn build_gabor_bank(
    k_theta: usize,
    freqs: &[f64],
    sigma_x: f64,
    sigma_y: f64,
    half: usize,
    f_min: f64,
    f_max: f64,
) -> Result<GaborBank> {
    if k_theta < 4 {
        return Err(Error::InvalidParameter(format!("K_theta {k_theta} < 4")));
    }
    if freqs.is_empty() {
        return Err(Error::InvalidParameter("empty frequency list".into()));
    }
    let orientations: Vec<f64> = (0..k_theta).map(|k| k as f64 * PI / k_theta as f64).collect();
    let frequencies = frequency_bins(freqs, f_min, f_max);
    let mut kernels = Vec::with_capacity(orientations.len() * frequencies.len());
    for &f in &frequencies {
        for &o in &orientations {
            kernels.push(gabor_kernel(wrap_half(o + PI / 2.0), f, sigma_x, sigma_y, half)?);
        }
    }
    Ok(GaborBank {
        orientations,
        frequencies,
        sigma_x,
        sigma_y,
        kernels,
    })
}

impl GaborBank {
    pub fn orientations(&self) -> &[f64] {
        &self.orientations
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn sigmas(&self) -> (f64, f64) {
        (self.sigma_x, self.sigma_y)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernel(&self, index: usize) -> &GaborKernel {
        &self.kernels[index]
    }

    pub fn kernel_at(&self, orientation_index: usize, frequency_index: usize) -> &GaborKernel {
        &self.kernels[frequency_index * self.orientations.len() + orientation_index]
    }

    /// Nearest orientation (axial distance) and then nearest frequency; ties
    /// go to the lower index. Returns `(orientation_index, frequency_index)`.
    pub fn select(&self, ridge_angle: f64, freq: f64) -> (usize, usize) {
        let nearest = |vals: &[f64], dist: &dyn Fn(f64) -> f64| {
            let mut best = 0;
            for (i, &v) in vals.iter().enumerate() {
                if dist(v) < dist(vals[best]) {
                    best = i;
                }
            }
            best
        };
        let oi = nearest(&self.orientations, &|o| axial_dist(o, ridge_angle));
        let fi = nearest(&self.frequencies, &|f| (f - freq).abs());
        (oi, fi)
    }
}

fn convolve_at(img: &GrayImage, k: &GaborKernel, x: usize, y: usize) -> f64 {
    let h = k.half as isize;
    let side = k.side();
    let (w, ht) = (img.width() as isize, img.height() as isize);
    let (x, y) = (x as isize, y as isize);
    let interior = x - h >= 0 && y - h >= 0 && x + h < w && y + h < ht;
    let mut acc = 0.0;
    if interior {
        let px = img.pixels();
        for ky in 0..side {
            let row = ((y - h + ky as isize) * w + (x - h)) as usize;
            let taps = &k.taps[ky * side..(ky + 1) * side];
            acc += taps.iter().zip(&px[row..row + side]).map(|(t, p)| t * p).sum::<f64>();
        }
    } else {
        for dy in -h..=h {
            for dx in -h..=h {
                acc += k.tap(dx, dy) * img.get_clamped(x + dx, y + dy);
            }
        }
    }
    acc
}

/// Filters every foreground pixel with the bank kernel closest to its block's
/// orientation and frequency. Responses are rescaled linearly so that zero maps
/// to 0.5 and the largest magnitude to 0 or 1; background pixels are 0.5.
pub fn gabor_enhance(
    img: &GrayImage,
    field: &OrientationField,
    freq: &FrequencyField,
    roi: &RoiMask,
    bank: &GaborBank,
) -> Result<GrayImage> {
    if !field.same_shape(freq) || !field.same_shape(roi) {
        return Err(Error::InvalidParameter("orientation/frequency/ROI grids differ".into()));
    }
    let b = field.block_size();
    if field.rows() != img.height().div_ceil(b) || field.cols() != img.width().div_ceil(b) {
        return Err(Error::InvalidParameter("block grid does not cover the image".into()));
    }
    let choice = field.map(|_| None::<usize>);
    let mut choice = choice;
    for ((r, c), &fg) in roi.iter() {
        if let (true, Some(f)) = (fg, *freq.get(r, c)) {
            let (oi, fi) = bank.select(*field.get(r, c), f);
            choice.set(r, c, Some(fi * bank.orientations.len() + oi));
        }
    }
    let (w, h) = (img.width(), img.height());
    let responses: Vec<Option<f64>> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let choice = &choice;
            (0..w).map(move |x| {
                choice
                    .at_pixel(x, y)
                    .map(|k| convolve_at(img, &bank.kernels[k], x, y))
            })
        })
        .collect();
    let peak = responses.iter().flatten().fold(0.0f64, |m, r| m.max(r.abs()));
    let data = responses
        .into_iter()
        .map(|r| match r {
            Some(v) if peak > 0.0 => 0.5 + v / (2.0 * peak),
            _ => 0.5,
        })
        .collect();
    GrayImage::new(w, h, data)
}

/// Runs `passes` rounds of [`gabor_enhance`], each on the previous output.
pub fn gabor_enhance_passes(
    img: &GrayImage,
    field: &OrientationField,
    freq: &FrequencyField,
    roi: &RoiMask,
    bank: &GaborBank,
    passes: usize,
) -> Result<GrayImage> {
    let mut cur = gabor_enhance(img, field, freq, roi, bank)?;
    for _ in 1..passes {
        cur = gabor_enhance(&cur, field, freq, roi, bank)?;
    }
    Ok(cur)
}

/// Boolean raster, `true` = ridge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    /// Parses rows of `#`/`1` (true) and `.`/`0` (false); handy for tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        Self::from_fn(width, height, |x, y| matches!(rows[y].as_bytes()[x], b'#' | b'1'))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// `false` outside the raster.
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Clockwise 8-neighbourhood starting at the top-left pixel.
    pub fn neighbors_clockwise(&self, x: usize, y: usize) -> [bool; 8] {
        let (x, y) = (x as isize, y as isize);
        CLOCKWISE.map(|(dx, dy)| self.get_signed(x + dx, y + dy))
    }

    /// True when some 2×2 window is entirely set.
    pub fn has_full_square(&self) -> bool {
        (0..self.height.saturating_sub(1)).any(|y| {
            (0..self.width.saturating_sub(1)).any(|x| {
                self.get(x, y) && self.get(x + 1, y) && self.get(x, y + 1) && self.get(x + 1, y + 1)
            })
        })
    }

    /// 0 / 255 grayscale rendering for PGM dumps.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| if self.get(x, y) { 1.0 } else { 0.0 })
    }

    pub fn translated(&self, dx: isize, dy: isize) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get_signed(x as isize - dx, y as isize - dy))
    }
}

/// Offsets of the 8-neighbourhood, clockwise from the top-left.
pub const CLOCKWISE: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// One-pixel-wide ridge skeleton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton(BinaryImage);

impl Skeleton {
    /// Wraps a raster that is already thin, e.g. a hand-drawn test pattern.
    pub fn from_binary(b: BinaryImage) -> Self {
        Skeleton(b)
    }

    pub fn as_binary(&self) -> &BinaryImage {
        &self.0
    }

    pub fn into_binary(self) -> BinaryImage {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y)
    }

    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        self.0.get_signed(x, y)
    }
}

/// Foreground pixel is a ridge iff its enhanced value is at least 0.5; all
/// background pixels are false.
pub fn binarize(img: &GrayImage, roi: &RoiMask) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        *roi.at_pixel(x, y) && img.get(x, y) >= 0.5
    })
}

/// `[P2..P9]` in Zhang–Suen order: N, NE, E, SE, S, SW, W, NW.
fn zs_neighbors(img: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let n = img.neighbors_clockwise(x, y);
    [n[1], n[2], n[3], n[4], n[5], n[6], n[7], n[0]]
}

fn zs_transitions(p: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count()
}

/// 8-connectivity number (Yokoi); a set pixel is simple iff this is 1.
fn connectivity_number(p: &[bool; 8]) -> usize {
    // counter-clockwise from east: E, NE, N, NW, W, SW, S, SE
    let ring = [p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]];
    let c = |i: usize| !ring[i % 8];
    [0usize, 2, 4, 6]
        .iter()
        .filter(|&&k| c(k) && !(c(k + 1) && c(k + 2)))
        .count()
}

fn is_simple_non_end(img: &BinaryImage, x: usize, y: usize) -> bool {
    let p = zs_neighbors(img, x, y);
    let b = p.iter().filter(|&&v| v).count();
    b >= 2 && connectivity_number(&p) == 1
}

fn zs_subpass(img: &mut BinaryImage, first: bool) -> bool {
    let (w, h) = (img.width, img.height);
    let snapshot = &*img;
    let candidates: Vec<(usize, usize)> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).filter_map(move |x| {
                if !snapshot.get(x, y) {
                    return None;
                }
                let p = zs_neighbors(snapshot, x, y);
                let b = p.iter().filter(|&&v| v).count();
                let [p2, _, p4, _, p6, _, p8, _] = p;
                let directional = if first {
                    !(p2 && p4 && p6) && !(p4 && p6 && p8)
                } else {
                    !(p2 && p4 && p8) && !(p2 && p6 && p8)
                };
                ((2..=6).contains(&b) && zs_transitions(&p) == 1 && directional).then_some((x, y))
            })
        })
        .collect();
    // Parallel deletion can disconnect two-pixel-thick diagonals; commit in
    // raster order and keep only deletions that are still simple.
    let mut changed = false;
    for (x, y) in candidates {
        if is_simple_non_end(img, x, y) {
            img.set(x, y, false);
            changed = true;
        }
    }
    changed
}

/// Removes corner pixels of staircases (two perpendicular 4-neighbours set)
/// when that keeps the local topology.
fn remove_staircases(img: &mut BinaryImage) -> bool {
    let mut changed = false;
    for y in 0..img.height {
        for x in 0..img.width {
            if !img.get(x, y) {
                continue;
            }
            let p = zs_neighbors(img, x, y);
            let [n, _, e, _, s, _, w, _] = p;
            let corner = (n && e) || (e && s) || (s && w) || (w && n);
            if corner && is_simple_non_end(img, x, y) {
                img.set(x, y, false);
                changed = true;
            }
        }
    }
    changed
}

/// Two-subpass Zhang–Suen thinning with a simple-point guard. Staircase
/// corners are removed only once the subpasses have converged; removing them
/// from still-thick ridges erodes in raster order and leaves spurs.
pub fn thin(binary: &BinaryImage) -> Skeleton {
    let mut img = binary.clone();
    loop {
        loop {
            let a = zs_subpass(&mut img, true);
            let b = zs_subpass(&mut img, false);
            if !(a || b) {
                break;
            }
        }
        if !remove_staircases(&mut img) {
            break;
        }
    }
    Skeleton(img)
}
