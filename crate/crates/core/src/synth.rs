//! Synthetic fingerprint-like patterns with known minutiae.
//!
//! Ridges are `cos ψ` of a phase field `ψ = base + Σ sᵢ·atan2(p − qᵢ)`. The
//! base phase is a plane wave across the ridge normal, optionally warped by a
//! few low-frequency sinusoids; each planned minutia is a ±1 phase spiral.
//! A spiral inserts one ridge on one side of its centre. It reads as an
//! ending when the ridge crest (`ψ ≡ 0`) enters the centre from that side and
//! as a bifurcation when the crest enters from the other side, so every
//! spiral is nudged along the ridge normal until the rest of the field has the
//! phase that puts the crest where its kind needs it.
//!
//! Ridges are rendered bright on a mid-gray background inside an elliptical
//! finger mask. Impressions resample the same field under a rigid transform
//! about the image centre with fresh Gaussian noise.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::angle::{wrap_pi, wrap_two_pi};
use crate::error::{Error, Result};
use crate::imgio::{write_manifest, write_pgm, GrayImage, SampleKey};
use crate::minutiae::{Minutia, MinutiaKind, MinutiaList};

/// Minimum spacing between planned minutiae, twice the default `d_min`.
pub const MIN_PLAN_SPACING: f64 = 16.0;


#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrientationGen {
    /// Straight parallel ridges running at this angle.
    Uniform(f64),
    /// Gently curving ridges drawn from the spec seed.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedMinutia {
    pub x: f64,
    pub y: f64,
    pub kind: MinutiaKind,
    /// Spiral sense, +1 or −1; picks which side of the point gains a ridge.
    pub polarity: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub dx: f64,
    pub dy: f64,
    /// Rotation about the image centre, radians.
    pub alpha: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        dx: 0.0,
        dy: 0.0,
        alpha: 0.0,
    };

    fn forward(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.alpha.sin_cos();
        let (u, v) = (x - cx, y - cy);
        (c * u - s * v + cx + self.dx, s * u + c * v + cy + self.dy)
    }

    fn inverse(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.alpha.sin_cos();
        let (u, v) = (x - cx - self.dx, y - cy - self.dy);
        (c * u + s * v + cx, -s * u + c * v + cy)
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Ridge period in pixels.
    pub period: f64,
    pub orientation: OrientationGen,
    pub minutiae: Vec<PlannedMinutia>,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub transform: Transform,
    /// Ridge contrast: intensity swings `0.5 ± amplitude`.
    pub amplitude: f64,
    /// Render inside an elliptical finger mask instead of the full frame.
    pub ellipse: bool,
    /// Strength of a per-impression low-frequency contrast fade in [0, 1).
    pub contrast_var: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            width: 256,
            height: 256,
            period: 9.0,
            orientation: OrientationGen::Smooth,
            minutiae: Vec::new(),
            noise: 0.02,
            transform: Transform::IDENTITY,
            amplitude: 0.35,
            ellipse: true,
            contrast_var: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 32 || self.height < 32 {
            return Err(Error::Synth(format!("image {}x{} too small", self.width, self.height)));
        }
        if !(3.0..=25.0).contains(&self.period) {
            return Err(Error::Synth(format!("period {} outside [3, 25]", self.period)));
        }
        if !(self.noise >= 0.0) || !(self.amplitude > 0.0 && self.amplitude <= 0.5) {
            return Err(Error::Synth("noise must be >= 0 and amplitude in (0, 0.5]".into()));
        }
        if !(0.0..1.0).contains(&self.contrast_var) {
            return Err(Error::Synth("contrast_var must be in [0, 1)".into()));
        }
        for (i, a) in self.minutiae.iter().enumerate() {
            if a.polarity != 1 && a.polarity != -1 {
                return Err(Error::Synth(format!("minutia {i}: polarity must be +1 or -1")));
            }
            if !(0.0..self.width as f64).contains(&a.x) || !(0.0..self.height as f64).contains(&a.y) {
                return Err(Error::Synth(format!("minutia {i} at ({}, {}) outside the image", a.x, a.y)));
            }
            for (j, b) in self.minutiae.iter().enumerate().skip(i + 1) {
                if (a.x - b.x).hypot(a.y - b.y) < MIN_PLAN_SPACING {
                    return Err(Error::Synth(format!(
                        "minutiae {i} and {j} closer than {MIN_PLAN_SPACING} px"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `key=value` text; minutiae as repeated `minutia=x,y,kind,polarity`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "width={}", self.width);
        let _ = writeln!(out, "height={}", self.height);
        let _ = writeln!(out, "period={}", self.period);
        match self.orientation {
            OrientationGen::Uniform(t) => {
                let _ = writeln!(out, "orientation=uniform:{t}");
            }
            OrientationGen::Smooth => out.push_str("orientation=smooth\n"),
        }
        let _ = writeln!(out, "noise={}", self.noise);
        let _ = writeln!(out, "amplitude={}", self.amplitude);
        let _ = writeln!(out, "ellipse={}", self.ellipse);
        let _ = writeln!(out, "contrast_var={}", self.contrast_var);
        let _ = writeln!(out, "dx={}", self.transform.dx);
        let _ = writeln!(out, "dy={}", self.transform.dy);
        let _ = writeln!(out, "alpha={}", self.transform.alpha);
        for m in &self.minutiae {
            let _ = writeln!(out, "minutia={},{},{},{}", m.x, m.y, m.kind, m.polarity);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SynthSpec::default();
        let num = |k: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Synth(format!("{k}: bad number {v:?}")))
        };
        let int = |k: &str, v: &str| -> Result<u64> {
            v.parse::<u64>().map_err(|_| Error::Synth(format!("{k}: bad integer {v:?}")))
        };
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Synth(format!("line {}: expected key=value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "seed" => spec.seed = int(k, v)?,
                "width" => spec.width = int(k, v)? as usize,
                "height" => spec.height = int(k, v)? as usize,
                "period" => spec.period = num(k, v)?,
                "orientation" => {
                    spec.orientation = match v.split_once(':') {
                        Some(("uniform", t)) => OrientationGen::Uniform(num(k, t)?),
                        None if v == "smooth" => OrientationGen::Smooth,
                        _ => return Err(Error::Synth(format!("orientation: expected smooth or uniform:<rad>, got {v:?}"))),
                    }
                }
                "noise" => spec.noise = num(k, v)?,
                "amplitude" => spec.amplitude = num(k, v)?,
                "ellipse" => {
                    spec.ellipse = v
                        .parse()
                        .map_err(|_| Error::Synth(format!("ellipse: expected true or false, got {v:?}")))?
                }
                "contrast_var" => spec.contrast_var = num(k, v)?,
                "dx" => spec.transform.dx = num(k, v)?,
                "dy" => spec.transform.dy = num(k, v)?,
                "alpha" => spec.transform.alpha = num(k, v)?,
                "minutia" => {
                    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                    if parts.len() != 3 && parts.len() != 4 {
                        return Err(Error::Synth(format!("minutia: expected x,y,kind[,polarity], got {v:?}")));
                    }
                    let polarity = match parts.get(3) {
                        Some(p) => p
                            .parse::<i8>()
                            .map_err(|_| Error::Synth(format!("minutia: bad polarity {p:?}")))?,
                        None => 1,
                    };
                    spec.minutiae.push(PlannedMinutia {
                        x: num(k, parts[0])?,
                        y: num(k, parts[1])?,
                        kind: parts[2].parse().map_err(|_| Error::Synth(format!("minutia: bad kind {:?}", parts[2])))?,
                        polarity,
                    });
                }
                _ => return Err(Error::Synth(format!("unknown key {k:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// One low-frequency warp term `amp · sin(w·p + phase)`.
#[derive(Debug, Clone, Copy)]
struct Warp {
    amp: f64,
    wx: f64,
    wy: f64,
    phase: f64,
}

#[derive(Debug, Clone, Copy)]
struct Spiral {
    x: f64,
    y: f64,
    s: f64,
    kind: MinutiaKind,
}

/// The master-frame pattern shared by every impression of one spec.
#[derive(Debug, Clone)]
struct Field {
    k: f64,
    nx: f64,
    ny: f64,
    cx: f64,
    cy: f64,
    warps: Vec<Warp>,
    spirals: Vec<Spiral>,
    ellipse: Option<(f64, f64)>,
    amplitude: f64,
}

impl Field {
    fn build(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let k = TAU / spec.period;
        let (ridge_angle, warps) = match spec.orientation {
            OrientationGen::Uniform(t) => (t, Vec::new()),
            OrientationGen::Smooth => {
                let t = rng.gen_range(0.0..PI);
                let warps = (0..3)
                    .map(|_| {
                        let wavelength = rng.gen_range(90.0..180.0);
                        let dir = rng.gen_range(0.0..TAU);
                        let w = TAU / wavelength;
                        // each term tilts the local normal by at most ~8°
                        Warp {
                            amp: 0.14 * k / w,
                            wx: w * dir.cos(),
                            wy: w * dir.sin(),
                            phase: rng.gen_range(0.0..TAU),
                        }
                    })
                    .collect();
                (t, warps)
            }
        };
        let normal = ridge_angle + PI / 2.0;
        let (cx, cy) = ((spec.width as f64 - 1.0) / 2.0, (spec.height as f64 - 1.0) / 2.0);
        let mut field = Field {
            k,
            nx: normal.cos(),
            ny: normal.sin(),
            cx,
            cy,
            warps,
            spirals: spec
                .minutiae
                .iter()
                .map(|m| Spiral {
                    x: m.x,
                    y: m.y,
                    s: m.polarity as f64,
                    kind: m.kind,
                })
                .collect(),
            ellipse: spec.ellipse.then(|| (0.40 * spec.width as f64, 0.46 * spec.height as f64)),
            amplitude: spec.amplitude,
        };
        field.snap_spirals();
        Ok(field)
    }

    fn base_phase(&self, x: f64, y: f64) -> f64 {
        let mut p = self.k * ((x - self.cx) * self.nx + (y - self.cy) * self.ny);
        for w in &self.warps {
            p += w.amp * (w.wx * x + w.wy * y + w.phase).sin();
        }
        p
    }

    fn base_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let (mut gx, mut gy) = (self.k * self.nx, self.k * self.ny);
        for w in &self.warps {
            let c = w.amp * (w.wx * x + w.wy * y + w.phase).cos();
            gx += c * w.wx;
            gy += c * w.wy;
        }
        (gx, gy)
    }

    fn phase_excluding(&self, x: f64, y: f64, skip: Option<usize>) -> f64 {
        let mut p = self.base_phase(x, y);
        for (j, s) in self.spirals.iter().enumerate() {
            if Some(j) != skip {
                p += s.s * (y - s.y).atan2(x - s.x);
            }
        }
        p
    }

    fn phase(&self, x: f64, y: f64) -> f64 {
        self.phase_excluding(x, y, None)
    }

    /// Moves each spiral along the local normal, by less than half a period,
    /// until the rest of the field has the target phase at its centre.
    fn snap_spirals(&mut self) {
        for _ in 0..4 {
            for i in 0..self.spirals.len() {
                let sp = self.spirals[i];
                // near the centre ψ ≈ c + s·(direction angle), so the crest
                // leaves along angle a when c = −s·a
                let toward_extra = self.extra_ridge_angle(&sp);
                let target = match sp.kind {
                    MinutiaKind::Ending => -sp.s * toward_extra,
                    MinutiaKind::Bifurcation => -sp.s * (toward_extra + PI),
                };
                let (gx, gy) = self.base_gradient(sp.x, sp.y);
                let g2 = gx * gx + gy * gy;
                let step = wrap_pi(target - self.phase_excluding(sp.x, sp.y, Some(i)));
                self.spirals[i].x += step * gx / g2;
                self.spirals[i].y += step * gy / g2;
            }
        }
    }

    /// Angle of the ridge direction pointing to the side where the spiral
    /// adds a ridge. Crossing the ridges along the normal `n`, the spiral
    /// term changes by `−s·π` on the side of `rot90(n)`.
    fn extra_ridge_angle(&self, sp: &Spiral) -> f64 {
        let (gx, gy) = self.base_gradient(sp.x, sp.y);
        let (dx, dy) = (-gy, gx);
        (-sp.s * dy).atan2(-sp.s * dx)
    }

    /// Ground-truth direction: endings point along the ridge toward the side
    /// with one more ridge, bifurcations toward their stem.
    fn direction(&self, sp: &Spiral) -> f64 {
        let theta = self.extra_ridge_angle(sp);
        match sp.kind {
            MinutiaKind::Ending => wrap_two_pi(theta),
            MinutiaKind::Bifurcation => wrap_two_pi(theta + PI),
        }
    }

    fn mask(&self, x: f64, y: f64) -> f64 {
        match self.ellipse {
            None => 1.0,
            Some((a, b)) => {
                let r = ((x - self.cx) / a).hypot((y - self.cy) / b);
                // soft edge about 8 px wide
                let edge = 8.0 / a.min(b);
                ((1.0 - r) / edge).clamp(0.0, 1.0)
            }
        }
    }

    fn intensity(&self, x: f64, y: f64, gain: f64) -> f64 {
        let m = self.mask(x, y);
        if m == 0.0 {
            return 0.5;
        }
        0.5 + self.amplitude * gain * m * self.phase(x, y).cos()
    }
}

/// Renders `spec` under its own transform with noise drawn from `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<(GrayImage, MinutiaList)> {
    impression(spec, spec.transform, spec.seed)
}

/// Renders the pattern of `spec` under `transform` with noise (and contrast
/// fade) drawn from `noise_seed`. Ground truth is transformed identically.
pub fn impression(spec: &SynthSpec, transform: Transform, noise_seed: u64) -> Result<(GrayImage, MinutiaList)> {
    if transform.alpha.abs() > PI / 6.0 + 1e-12 {
        return Err(Error::Synth(format!("rotation {} exceeds 30 degrees", transform.alpha.to_degrees())));
    }
    let field = Field::build(spec)?;
    let (w, h) = (spec.width, spec.height);
    let (cx, cy) = (field.cx, field.cy);
    let (fcx, fcy) = transform.forward(cx, cy, cx, cy);
    let margin = 0.25;
    if fcx < w as f64 * margin || fcx > w as f64 * (1.0 - margin) || fcy < h as f64 * margin || fcy > h as f64 * (1.0 - margin) {
        return Err(Error::Synth(format!(
            "shift ({}, {}) moves the finger centre out of frame",
            transform.dx, transform.dy
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    rng.set_stream(1);
    let fade = if spec.contrast_var > 0.0 {
        let (fx, fy) = (rng.gen_range(-1.0..1.0) * w as f64 * 0.4, rng.gen_range(-1.0..1.0) * h as f64 * 0.4);
        let radius = rng.gen_range(0.2..0.35) * w.min(h) as f64;
        Some((fx + cx, fy + cy, radius, spec.contrast_var))
    } else {
        None
    };
    let gain = |x: f64, y: f64| match fade {
        None => 1.0,
        Some((fx, fy, r, depth)) => 1.0 - depth * (-((x - fx).powi(2) + (y - fy).powi(2)) / (2.0 * r * r)).exp(),
    };

    let mut data: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let field = &field;
            (0..w).map(move |x| {
                let (mx, my) = transform.inverse(x as f64, y as f64, cx, cy);
                field.intensity(mx, my, gain(mx, my))
            })
        })
        .collect();
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Synth(e.to_string()))?;
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    let img = GrayImage::new(w, h, data)?;

    let truth = field
        .spirals
        .iter()
        .map(|sp| {
            let (x, y) = transform.forward(sp.x, sp.y, cx, cy);
            Minutia::new(x, y, wrap_two_pi(field.direction(sp) + transform.alpha), sp.kind)
        })
        .collect();
    Ok((img, MinutiaList::new(format!("synth_{}", spec.seed), truth)))
}

/// Random minutiae plan inside the central part of the frame, pairwise at
/// least `spacing` apart. Kinds and polarities are drawn uniformly.
pub fn random_plan(seed: u64, count: usize, width: usize, height: usize, spacing: f64) -> Result<Vec<PlannedMinutia>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let (a, b) = (0.32 * width as f64, 0.38 * height as f64);
    let mut plan: Vec<PlannedMinutia> = Vec::with_capacity(count);
    let mut attempts = 0;
    while plan.len() < count {
        attempts += 1;
        if attempts > 200 * (count + 1) {
            return Err(Error::Synth(format!("cannot place {count} minutiae {spacing} px apart")));
        }
        let (u, v) = (rng.gen_range(-1.0..1.0f64), rng.gen_range(-1.0..1.0f64));
        if u.hypot(v) > 1.0 {
            continue;
        }
        let (x, y) = (cx + u * a, cy + v * b);
        if plan.iter().any(|m| (m.x - x).hypot(m.y - y) < spacing) {
            continue;
        }
        plan.push(PlannedMinutia {
            x,
            y,
            kind: if rng.gen_bool(0.5) { MinutiaKind::Ending } else { MinutiaKind::Bifurcation },
            polarity: if rng.gen_bool(0.5) { 1 } else { -1 },
        });
    }
    Ok(plan)
}

/// Multi-finger, multi-impression dataset layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetParams {
    pub seed: u64,
    pub fingers: usize,
    pub impressions: usize,
    pub width: usize,
    pub height: usize,
    pub period_range: (f64, f64),
    pub minutiae_range: (usize, usize),
    /// Planned minutiae spacing, px.
    pub spacing: f64,
    pub noise: f64,
    pub amplitude: f64,
    pub contrast_var: f64,
    pub max_rotation: f64,
    pub max_shift: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            seed: 2024,
            fingers: 20,
            impressions: 4,
            width: 256,
            height: 256,
            period_range: (8.0, 11.0),
            minutiae_range: (24, 34),
            spacing: 20.0,
            noise: 0.12,
            amplitude: 0.3,
            contrast_var: 0.6,
            max_rotation: 20f64.to_radians(),
            max_shift: 24.0,
        }
    }
}

/// One rendered sample of a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub key: SampleKey,
    pub image: GrayImage,
    pub truth: MinutiaList,
}

/// Spec of finger `f` (0-based) of a dataset.
pub fn finger_spec(params: &DatasetParams, f: usize) -> Result<SynthSpec> {
    let seed = params.seed.wrapping_mul(1_000_003).wrapping_add(f as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let period = rng.gen_range(params.period_range.0..=params.period_range.1);
    let count = rng.gen_range(params.minutiae_range.0..=params.minutiae_range.1);
    Ok(SynthSpec {
        seed,
        width: params.width,
        height: params.height,
        period,
        orientation: OrientationGen::Smooth,
        minutiae: random_plan(seed, count, params.width, params.height, params.spacing)?,
        noise: params.noise,
        transform: Transform::IDENTITY,
        amplitude: params.amplitude,
        ellipse: true,
        contrast_var: params.contrast_var,
    })
}

/// Impression `k` (1-based) transform of finger `f`; the first impression is
/// untransformed.
pub fn impression_transform(params: &DatasetParams, f: usize, k: u32) -> Transform {
    if k == 1 {
        return Transform::IDENTITY;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ ((f as u64) << 20) ^ k as u64);
    rng.set_stream(4);
    Transform {
        dx: rng.gen_range(-params.max_shift..=params.max_shift),
        dy: rng.gen_range(-params.max_shift..=params.max_shift),
        alpha: rng.gen_range(-params.max_rotation..=params.max_rotation),
    }
}

/// Renders every sample in memory, subjects named `f001`, `f002`, …
pub fn dataset_samples(params: &DatasetParams) -> Result<Vec<SynthSample>> {
    if params.fingers == 0 || params.impressions == 0 {
        return Err(Error::Synth("dataset needs at least one finger and one impression".into()));
    }
    let jobs: Vec<(usize, u32)> = (0..params.fingers)
        .flat_map(|f| (1..=params.impressions as u32).map(move |k| (f, k)))
        .collect();
    jobs.into_par_iter()
        .map(|(f, k)| {
            let spec = finger_spec(params, f)?;
            let t = impression_transform(params, f, k);
            let noise_seed = spec.seed.wrapping_mul(31).wrapping_add(k as u64);
            let (image, mut truth) = impression(&spec, t, noise_seed)?;
            let key = SampleKey::new(format!("f{:03}", f + 1), k);
            truth.image_id = key.to_string();
            Ok(SynthSample { key, image, truth })
        })
        .collect()
}

/// Writes images, ground-truth minutiae and a manifest into `dir`. Returns
/// the manifest path.
pub fn write_dataset(dir: &Path, params: &DatasetParams, comments: &[String]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let samples = dataset_samples(params)?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in &samples {
        let name = format!("{}.pgm", s.key);
        write_pgm(&s.image, &dir.join(&name), comments)?;
        s.truth.write(&dir.join(format!("{}.truth.min", s.key)), comments)?;
        entries.push((s.key.clone(), name));
    }
    let manifest = dir.join("manifest.tsv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(orientation: OrientationGen, period: f64) -> SynthSpec {
        SynthSpec {
            period,
            orientation,
            noise: 0.0,
            ellipse: false,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let mut spec = SynthSpec::default();
        spec.minutiae = random_plan(5, 10, 256, 256, 20.0).unwrap();
        let (a, ta) = generate(&spec).unwrap();
        let (b, tb) = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.len(), 10);
        let (c, _) = impression(&spec, Transform::IDENTITY, spec.seed).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn uniform_stripes_follow_cosine() {
        let spec = plain(OrientationGen::Uniform(PI / 2.0), 8.0);
        let (img, _) = generate(&spec).unwrap();
        // vertical ridges: intensity depends on x only, period 8
        for y in [0, 100, 200] {
            for x in 0..240 {
                assert!((img.get(x, y) - img.get(x + 8, y)).abs() < 1e-9);
                assert!((img.get(x, y) - img.get(x, 0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_moves_truth_rigidly() {
        let mut spec = SynthSpec::default();
        spec.minutiae = random_plan(9, 6, 256, 256, 20.0).unwrap();
        let (_, t0) = impression(&spec, Transform::IDENTITY, 1).unwrap();
        let alpha = 15f64.to_radians();
        let (_, t1) = impression(&spec, Transform { dx: 0.0, dy: 0.0, alpha }, 2).unwrap();
        let (cx, cy) = (127.5, 127.5);
        for (a, b) in t0.minutiae.iter().zip(&t1.minutiae) {
            let ang0 = (a.y - cy).atan2(a.x - cx);
            let ang1 = (b.y - cy).atan2(b.x - cx);
            assert!(wrap_pi(ang1 - ang0 - alpha).abs() < 1e-9);
            assert!(((a.x - cx).hypot(a.y - cy) - (b.x - cx).hypot(b.y - cy)).abs() < 1e-9);
            assert!(wrap_pi(b.theta - a.theta - alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SynthSpec::default();
        spec.minutiae = vec![
            PlannedMinutia { x: 100.0, y: 100.0, kind: MinutiaKind::Ending, polarity: 1 },
            PlannedMinutia { x: 105.0, y: 100.0, kind: MinutiaKind::Ending, polarity: 1 },
        ];
        assert!(generate(&spec).is_err());
        assert!(generate(&SynthSpec { period: 2.0, ..Default::default() }).is_err());
        let big = Transform { dx: 0.0, dy: 0.0, alpha: 0.7 };
        assert!(impression(&SynthSpec::default(), big, 1).is_err());
        let far = Transform { dx: 120.0, dy: 0.0, alpha: 0.0 };
        assert!(impression(&SynthSpec::default(), far, 1).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        let mut spec = SynthSpec::default();
        spec.orientation = OrientationGen::Uniform(0.25);
        spec.minutiae = random_plan(3, 4, 256, 256, 20.0).unwrap();
        spec.transform = Transform { dx: 3.0, dy: -2.5, alpha: 0.1 };
        assert_eq!(SynthSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(SynthSpec::parse("colour=red").is_err());
    }
}
