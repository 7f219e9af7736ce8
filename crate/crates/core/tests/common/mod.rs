//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use ridgekit::enhance::BinaryImage;
use ridgekit::minutiae::{Minutia, MinutiaKind, MinutiaList};
use ridgekit::GrayImage;

/// Sinusoidal ridges with the given period whose ridge lines run at
/// `ridge_angle` (radians, image coordinates with y down).
pub fn stripes(w: usize, h: usize, period: f64, ridge_angle: f64) -> GrayImage {
    let (s, c) = ridge_angle.sin_cos();
    GrayImage::from_fn(w, h, |x, y| {
        let d = -(x as f64) * s + y as f64 * c;
        0.5 + 0.4 * (2.0 * PI * d / period).cos()
    })
}

/// `count` minutiae in `[margin, side - margin)²`, pairwise at least
/// `spacing` apart. Integer coordinates when `integer` is set.
pub fn constellation(rng: &mut impl Rng, count: usize, side: f64, spacing: f64, integer: bool) -> Vec<Minutia> {
    let margin = 16.0;
    let mut out: Vec<Minutia> = Vec::with_capacity(count);
    while out.len() < count {
        let mut x = rng.gen_range(margin..side - margin);
        let mut y = rng.gen_range(margin..side - margin);
        if integer {
            x = x.floor();
            y = y.floor();
        }
        let kind = if rng.gen_bool(0.5) {
            MinutiaKind::Ending
        } else {
            MinutiaKind::Bifurcation
        };
        let m = Minutia::new(x, y, rng.gen_range(0.0..TAU), kind);
        if out.iter().all(|o| o.distance(&m) >= spacing) {
            out.push(m);
        }
    }
    out
}

/// Rigid motion of every minutia: rotation by `alpha` about `(cx, cy)`
/// followed by a shift.
pub fn rigid(list: &[Minutia], alpha: f64, cx: f64, cy: f64, dx: f64, dy: f64) -> Vec<Minutia> {
    let (s, c) = alpha.sin_cos();
    list.iter()
        .map(|m| {
            let (u, v) = (m.x - cx, m.y - cy);
            Minutia::new(c * u - s * v + cx + dx, s * u + c * v + cy + dy, (m.theta + alpha).rem_euclid(TAU), m.kind)
        })
        .collect()
}

pub fn list(id: &str, minutiae: Vec<Minutia>) -> MinutiaList {
    MinutiaList::new(id, minutiae)
}

/// Union of random filled ellipses and rectangles.
pub fn random_blobs(rng: &mut impl Rng, w: usize, h: usize) -> BinaryImage {
    let mut img = BinaryImage::new(w, h);
    for _ in 0..rng.gen_range(1..6) {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let a = rng.gen_range(2.0..w as f64 / 3.0);
        let b = rng.gen_range(2.0..h as f64 / 3.0);
        let rect = rng.gen_bool(0.3);
        let (s, c) = rng.gen_range(0.0..PI).sin_cos();
        for y in 0..h {
            for x in 0..w {
                let (u, v) = (x as f64 - cx, y as f64 - cy);
                let (p, q) = ((c * u + s * v) / a, (-s * u + c * v) / b);
                let inside = if rect { p.abs() <= 1.0 && q.abs() <= 1.0 } else { p * p + q * q <= 1.0 };
                if inside {
                    img.set(x, y, true);
                }
            }
        }
    }
    img
}

/// 8-connected foreground components as pixel lists.
pub fn components(img: &BinaryImage) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !img.get(x, y) || seen[y * w + x] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([(x, y)]);
            seen[y * w + x] = true;
            while let Some((px, py)) = queue.pop_front() {
                comp.push((px, py));
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (nx, ny) = (px as isize + dx, py as isize + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if img.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Transitions from background to ridge walking the clockwise ring once.
pub fn brute_transitions(ring: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !ring[i] && ring[(i + 1) % 8]).count()
}

/// Rates at an arbitrary threshold: impostors accepted at `score >= tau`,
/// genuines rejected at `score < tau`.
pub fn rates_at(genuine: &[f64], impostor: &[f64], tau: f64) -> (f64, f64) {
    let fmr = impostor.iter().filter(|&&s| s >= tau).count() as f64 / impostor.len() as f64;
    let fnmr = genuine.iter().filter(|&&s| s < tau).count() as f64 / genuine.len() as f64;
    (fmr, fnmr)
}

/// Equal error rate read off a uniform threshold grid on [0, 1]: the grid
/// point where the two curves are closest, averaged.
pub fn eer_dense_grid(genuine: &[f64], impostor: &[f64], steps: usize) -> f64 {
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        let tau = k as f64 / steps as f64;
        let fmr = (i.len() - i.partition_point(|&s| s < tau)) as f64 / i.len() as f64;
        let fnmr = g.partition_point(|&s| s < tau) as f64 / g.len() as f64;
        let gap = (fmr - fnmr).abs();
        if gap < best.0 {
            best = (gap, 0.5 * (fmr + fnmr));
        }
    }
    best.1
}

/// Circular distance of two angles.
pub fn ang_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
