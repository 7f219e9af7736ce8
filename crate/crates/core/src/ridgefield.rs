//! Block-wise ridge geometry: foreground segmentation, ridge orientation and
//! ridge frequency.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::angle::wrap_half;
use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::imgio::GrayImage;

/// Foreground (`true`) / background flag per block.
pub type RoiMask = BlockGrid<bool>;

/// Ridge direction per block, radians in `[0, π)`.
pub type OrientationField = BlockGrid<f64>;

/// Ridge frequency per block in cycles/pixel; `None` marks an invalid block.
pub type FrequencyField = BlockGrid<Option<f64>>;

pub const DEFAULT_F_MIN: f64 = 1.0 / 25.0;
pub const DEFAULT_F_MAX: f64 = 1.0 / 3.0;

/// Horizontal and vertical 3×3 Sobel responses, replicated borders.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

pub fn sobel(img: &GrayImage) -> Gradients {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
        }
    }
    Gradients {
        width: w,
        height: h,
        gx,
        gy,
    }
}

fn block_range(index: usize, block: usize, limit: usize) -> std::ops::Range<usize> {
    (index * block)..((index + 1) * block).min(limit)
}

/// Mean Sobel gradient magnitude of every block.
pub fn block_gradient_magnitude(img: &GrayImage, b: usize) -> BlockGrid<f64> {
    let g = sobel(img);
    let rows = img.height().div_ceil(b);
    let cols = img.width().div_ceil(b);
    BlockGrid::from_fn(rows, cols, b, |r, c| {
        let (ys, xs) = (block_range(r, b, g.height), block_range(c, b, g.width));
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in ys {
            for x in xs.clone() {
                let i = y * g.width + x;
                sum += g.gx[i].hypot(g.gy[i]);
                n += 1;
            }
        }
        sum / n as f64
    })
}

/// Foreground where the block's mean gradient magnitude reaches `g_thresh`;
/// foreground blocks without a foreground 4-neighbour are demoted.
pub fn segment_roi(img: &GrayImage, b: usize, g_thresh: f64) -> Result<RoiMask> {
    if b < 4 {
        return Err(Error::InvalidParameter(format!("block size {b} < 4")));
    }
    let mags = block_gradient_magnitude(img, b);
    let raw = mags.map(|&m| m >= g_thresh);
    let mut roi = raw.clone();
    for ((r, c), &fg) in raw.iter() {
        if fg && !raw.neighbors4(r, c).any(|(nr, nc)| *raw.get(nr, nc)) {
            roi.set(r, c, false);
        }
    }
    Ok(roi)
}

/// Least-squares ridge orientation per block from Sobel gradients. Blocks with
/// no gradient energy get angle 0.
pub fn estimate_orientation(img: &GrayImage, b: usize) -> Result<OrientationField> {
    if b < 4 {
        return Err(Error::InvalidParameter(format!("block size {b} < 4")));
    }
    let g = sobel(img);
    let rows = img.height().div_ceil(b);
    let cols = img.width().div_ceil(b);
    Ok(BlockGrid::from_fn(rows, cols, b, |r, c| {
        let (mut vx, mut vy) = (0.0, 0.0);
        for y in block_range(r, b, g.height) {
            for x in block_range(c, b, g.width) {
                let i = y * g.width + x;
                vx += 2.0 * g.gx[i] * g.gy[i];
                vy += g.gx[i] * g.gx[i] - g.gy[i] * g.gy[i];
            }
        }
        if vx == 0.0 && vy == 0.0 {
            0.0
        } else {
            // gradient direction, turned a quarter to follow the ridge
            wrap_half(0.5 * vx.atan2(vy) + PI / 2.0)
        }
    }))
}

fn check_window(window: usize) -> Result<isize> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing window {window} must be odd and >= 1"
        )));
    }
    Ok((window / 2) as isize)
}

fn smooth_with(
    field: &OrientationField,
    window: usize,
    include: impl Fn(usize, usize) -> bool,
) -> Result<OrientationField> {
    let half = check_window(window)?;
    if half == 0 {
        return Ok(field.clone());
    }
    let (rows, cols) = (field.rows() as isize, field.cols() as isize);
    Ok(BlockGrid::from_fn(field.rows(), field.cols(), field.block_size(), |r, c| {
        if !include(r, c) {
            return *field.get(r, c);
        }
        let (mut s, mut co) = (0.0, 0.0);
        for dr in -half..=half {
            for dc in -half..=half {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr >= rows || cc >= cols {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                if !include(rr, cc) {
                    continue;
                }
                let t = *field.get(rr, cc);
                s += (2.0 * t).sin();
                co += (2.0 * t).cos();
            }
        }
        wrap_half(0.5 * s.atan2(co))
    }))
}

/// Doubled-angle vector averaging over a `window × window` block neighbourhood
/// (clipped at the grid edge). `window = 1` is the identity.
pub fn smooth_orientation(field: &OrientationField, window: usize) -> Result<OrientationField> {
    smooth_with(field, window, |_, _| true)
}

/// Like [`smooth_orientation`], but only foreground blocks contribute and only
/// foreground blocks are updated.
pub fn smooth_orientation_masked(
    field: &OrientationField,
    roi: &RoiMask,
    window: usize,
) -> Result<OrientationField> {
    smooth_with(field, window, |r, c| *roi.get(r, c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyParams {
    pub block: usize,
    pub segments: usize,
    pub trim: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for FrequencyParams {
    fn default() -> Self {
        Self {
            block: 16,
            segments: 4,
            trim: 1,
            f_min: DEFAULT_F_MIN,
            f_max: DEFAULT_F_MAX,
        }
    }
}

/// Peak positions of a 1-D signature after 3-tap moving-average smoothing.
/// A peak is strictly greater than both neighbours; positions are refined
/// with a parabolic fit. A flat run of equal samples bounded by strictly
/// smaller ones is a single peak at the run's centre.
pub fn signature_peaks(signature: &[f64]) -> Vec<f64> {
    let n = signature.len();
    if n < 3 {
        return Vec::new();
    }
    let smooth: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            signature[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut peaks = Vec::new();
    let mut k = 1;
    while k < n - 1 {
        let (a, b) = (smooth[k - 1], smooth[k]);
        let mut end = k;
        while end + 1 < n && smooth[end + 1] == b {
            end += 1;
        }
        if b > a && end + 1 < n && smooth[end + 1] < b {
            if end == k {
                let c = smooth[k + 1];
                let denom = a - 2.0 * b + c;
                let offset = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                peaks.push(k as f64 + offset.clamp(-0.5, 0.5));
            } else {
                peaks.push((k + end) as f64 / 2.0);
            }
        }
        k = end + 1;
    }
    peaks
}

/// Frequency of one x-signature: `(P - 1) / D` for `P >= 2` peaks spanning
/// `D` pixels.
pub fn signature_frequency(signature: &[f64]) -> Option<f64> {
    let peaks = signature_peaks(signature);
    if peaks.len() < 2 {
        return None;
    }
    let span = peaks[peaks.len() - 1] - peaks[0];
    (span > 0.0).then(|| (peaks.len() - 1) as f64 / span)
}

/// Mean after dropping `trim` smallest and `trim` largest values. The trim is
/// reduced when it would leave nothing to average.
pub fn alpha_trimmed_mean(values: &[f64], trim: usize) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let trim = trim.min((v.len() - 1) / 2);
    let kept = &v[trim..v.len() - trim];
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Per-segment x-signatures of the oriented `2b × b` window centred on a block.
/// Rows of the window follow the ridge, columns cross it.
fn block_signatures(
    img: &GrayImage,
    cx: f64,
    cy: f64,
    ridge_angle: f64,
    b: usize,
    segments: usize,
) -> Vec<Vec<f64>> {
    let (tx, ty) = (ridge_angle.cos(), ridge_angle.sin());
    let (nx, ny) = (ty, -tx);
    let across = 2 * b;
    let along = b;
    // keep the whole window inside the image when it fits, so that border
    // blocks do not see a clamped plateau
    let half_u = across as f64 / 2.0 - 0.5;
    let half_v = along as f64 / 2.0 - 0.5;
    let ex = nx.abs() * half_u + tx.abs() * half_v;
    let ey = ny.abs() * half_u + ty.abs() * half_v;
    let fit = |c: f64, e: f64, len: usize| {
        let hi = len as f64 - 1.0 - e;
        if e <= hi { c.clamp(e, hi) } else { c }
    };
    let (cx, cy) = (fit(cx, ex, img.width()), fit(cy, ey, img.height()));
    let mut out = Vec::with_capacity(segments);
    for s in 0..segments {
        let (j0, j1) = (s * along / segments, (s + 1) * along / segments);
        let mut sig = vec![0.0; across];
        for j in j0..j1 {
            let v = j as f64 - along as f64 / 2.0 + 0.5;
            for (k, acc) in sig.iter_mut().enumerate() {
                let u = k as f64 - across as f64 / 2.0 + 0.5;
                *acc += img.sample(cx + u * nx + v * tx, cy + u * ny + v * ty);
            }
        }
        let count = (j1 - j0).max(1) as f64;
        sig.iter_mut().for_each(|v| *v /= count);
        out.push(sig);
    }
    out
}

/// Modified x-signature frequency estimate per foreground block: the oriented
/// window is split into `segments` strips along the ridge, each strip yields a
/// frequency from its peak count, and the block takes the alpha-trimmed mean.
pub fn estimate_frequency(
    img: &GrayImage,
    field: &OrientationField,
    roi: &RoiMask,
    params: &FrequencyParams,
) -> Result<FrequencyField> {
    let FrequencyParams {
        block: b,
        segments,
        trim,
        f_min,
        f_max,
    } = *params;
    if segments < 3 || 2 * trim >= segments {
        return Err(Error::InvalidParameter(format!(
            "segments={segments}, trim={trim}: need segments >= 3 and 2*trim < segments"
        )));
    }
    if !field.same_shape(roi) || field.block_size() != b {
        return Err(Error::InvalidParameter(
            "orientation field and ROI grids differ".into(),
        ));
    }
    let min_valid = segments - 2 * trim;
    let cols = field.cols();
    let values: Vec<Option<f64>> = (0..field.rows() * cols)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            if !*roi.get(r, c) {
                return None;
            }
            let xs = block_range(c, b, img.width());
            let ys = block_range(r, b, img.height());
            let cx = (xs.start + xs.end - 1) as f64 / 2.0;
            let cy = (ys.start + ys.end - 1) as f64 / 2.0;
            let freqs: Vec<f64> = block_signatures(img, cx, cy, *field.get(r, c), b, segments)
                .iter()
                .filter_map(|s| signature_frequency(s))
                .collect();
            if freqs.len() < min_valid {
                return None;
            }
            alpha_trimmed_mean(&freqs, trim).filter(|f| (f_min..=f_max).contains(f))
        })
        .collect();
    Ok(BlockGrid::from_vec(field.rows(), cols, b, values))
}

/// Fills invalid foreground blocks with the mean of valid foreground blocks in
/// the smallest square neighbourhood that contains any.
pub fn interpolate_frequency(field: &FrequencyField, roi: &RoiMask) -> Result<FrequencyField> {
    let valid = |r: usize, c: usize| -> Option<f64> {
        if *roi.get(r, c) {
            *field.get(r, c)
        } else {
            None
        }
    };
    let (rows, cols) = (field.rows(), field.cols());
    let any_valid = (0..rows).any(|r| (0..cols).any(|c| valid(r, c).is_some()));
    if !any_valid {
        return Err(Error::FrequencyEstimationFailed);
    }
    let max_radius = rows.max(cols);
    Ok(BlockGrid::from_fn(rows, cols, field.block_size(), |r, c| {
        if !*roi.get(r, c) {
            return *field.get(r, c);
        }
        if let Some(f) = valid(r, c) {
            return Some(f);
        }
        for radius in 1..=max_radius {
            let (mut sum, mut n) = (0.0, 0usize);
            let r0 = r.saturating_sub(radius);
            let c0 = c.saturating_sub(radius);
            for rr in r0..=(r + radius).min(rows - 1) {
                for cc in c0..=(c + radius).min(cols - 1) {
                    if let Some(f) = valid(rr, cc) {
                        sum += f;
                        n += 1;
                    }
                }
            }
            if n > 0 {
                return Some(sum / n as f64);
            }
        }
        unreachable!("a valid block exists within the grid")
    }))
}

/// Frequencies with invalid blocks written as 0, for dumps.
pub fn frequency_or_zero(field: &FrequencyField) -> BlockGrid<f64> {
    field.map(|f| f.unwrap_or(0.0))
}
