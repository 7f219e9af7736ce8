//! Image → finger-code chain driven by a [`Config`].

use std::f64::consts::PI;

use crate::config::Config;
use crate::encode::{encode_fingerprint, FingerCode};
use crate::enhance::{binarize, build_gabor_bank, gabor_enhance_passes, thin, BinaryImage, Skeleton};
use crate::error::{Error, Result};
use crate::imgio::{normalize, GrayImage};
use crate::minutiae::{compute_quality_mask, extract_minutiae, remove_false_minutiae, MinutiaList, QualityMask};
use crate::ridgefield::{
    estimate_frequency, estimate_orientation, interpolate_frequency, segment_roi, smooth_orientation_masked,
    FrequencyField, OrientationField, RoiMask,
};

/// Every intermediate product of [`run_stages`].
#[derive(Debug, Clone)]
pub struct Stages {
    pub normalized: GrayImage,
    pub roi: RoiMask,
    pub orientation: OrientationField,
    /// Raw per-block estimates, `None` where estimation failed.
    pub frequency_raw: FrequencyField,
    /// Foreground blocks filled by neighbourhood interpolation.
    pub frequency: FrequencyField,
    pub enhanced: GrayImage,
    pub binary: BinaryImage,
    pub skeleton: Skeleton,
    pub quality: QualityMask,
    pub minutiae: MinutiaList,
}

/// Normalize, segment, estimate orientation and frequency, enhance, binarize,
/// thin, detect and filter minutiae.
pub fn run_stages(img: &GrayImage, cfg: &Config, image_id: &str) -> Result<Stages> {
    cfg.validate()?;
    img.check_pipeline_size()?;
    let b = cfg.block_size;
    let normalized = normalize(img, cfg.norm_mean, cfg.norm_var);
    let roi = segment_roi(&normalized, b, cfg.g_thresh)?;
    if !roi.values().iter().any(|&v| v) {
        return Err(Error::EmptyRoi);
    }
    let orientation = estimate_orientation(&normalized, b)?;
    let orientation = smooth_orientation_masked(&orientation, &roi, cfg.orient_smooth)?;
    let frequency_raw = estimate_frequency(&normalized, &orientation, &roi, &cfg.frequency_params())?;
    let frequency = interpolate_frequency(&frequency_raw, &roi)?;
    let observed: Vec<f64> = frequency.values().iter().flatten().copied().collect();
    let bank = build_gabor_bank(
        cfg.k_theta,
        &observed,
        cfg.sigma_x,
        cfg.sigma_y,
        cfg.half_width,
        cfg.f_min,
        cfg.f_max,
    )?;
    let enhanced = gabor_enhance_passes(&normalized, &orientation, &frequency, &roi, &bank, cfg.passes)?;
    let binary = binarize(&enhanced, &roi);
    let skeleton = thin(&binary);
    let quality = compute_quality_mask(&orientation, &frequency_raw, &roi, cfg.kappa_max)?;
    let raw = extract_minutiae(&skeleton, &quality, cfg.trace_len, image_id);
    let minutiae = remove_false_minutiae(&raw, &skeleton, &quality, &cfg.minutiae_params())?;
    Ok(Stages {
        normalized,
        roi,
        orientation,
        frequency_raw,
        frequency,
        enhanced,
        binary,
        skeleton,
        quality,
        minutiae,
    })
}

pub fn extract(img: &GrayImage, cfg: &Config, image_id: &str) -> Result<MinutiaList> {
    Ok(run_stages(img, cfg, image_id)?.minutiae)
}

pub fn fingercode(img: &GrayImage, cfg: &Config, subject: &str, sample: &str) -> Result<FingerCode> {
    let list = extract(img, cfg, &format!("{subject}_{sample}"))?;
    encode_fingerprint(&list, cfg.neighbors, cfg.mode, subject, sample)
}

/// Orientation grid in degrees, for debug dumps.
pub fn orientation_degrees(field: &OrientationField) -> crate::grid::BlockGrid<f64> {
    field.map(|a| a * 180.0 / PI)
}
