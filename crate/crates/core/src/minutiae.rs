//! Quality-gated crossing-number minutiae detection and false-minutiae removal.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::angle::{axial_dist, circ_dist, wrap_two_pi};
use crate::enhance::{Skeleton, CLOCKWISE};
use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::ridgefield::{FrequencyField, OrientationField, RoiMask};

pub type QualityMask = BlockGrid<bool>;

pub const MINUTIAE_HEADER: &str = "#ridgekit-minutiae v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
}

impl fmt::Display for MinutiaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MinutiaKind::Ending => "ending",
            MinutiaKind::Bifurcation => "bifurcation",
        })
    }
}

impl FromStr for MinutiaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ending" => Ok(MinutiaKind::Ending),
            "bifurcation" => Ok(MinutiaKind::Bifurcation),
            other => Err(Error::Format(format!("unknown minutia kind {other:?}"))),
        }
    }
}

/// Ridge event at pixel coordinates `(x, y)` (y grows downwards) with its
/// direction `theta` in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: f64, y: f64, theta: f64, kind: MinutiaKind) -> Self {
        Self { x, y, theta, kind }
    }

    pub fn distance(&self, other: &Minutia) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MinutiaList {
    pub image_id: String,
    pub minutiae: Vec<Minutia>,
}

impl MinutiaList {
    pub fn new(image_id: impl Into<String>, minutiae: Vec<Minutia>) -> Self {
        Self {
            image_id: image_id.into(),
            minutiae,
        }
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    /// `x<TAB>y<TAB>theta<TAB>kind` lines under a versioned header.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = format!("{MINUTIAE_HEADER} {}\n", self.image_id);
        for c in comments {
            out.push_str(&format!("# {c}\n"));
        }
        for m in &self.minutiae {
            out.push_str(&format!("{}\t{}\t{:.9}\t{}\n", m.x, m.y, m.theta, m.kind));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let image_id = header
            .strip_prefix(MINUTIAE_HEADER)
            .ok_or_else(|| Error::Format(format!("minutiae file must start with `{MINUTIAE_HEADER}`")))?
            .trim()
            .to_string();
        let mut minutiae = Vec::new();
        for line in lines.filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("bad minutia record {line:?}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number {s:?}")))
            };
            minutiae.push(Minutia::new(num(f[0])?, num(f[1])?, num(f[2])?, f[3].parse()?));
        }
        Ok(Self { image_id, minutiae })
    }

    pub fn write(&self, path: &Path, comments: &[String]) -> Result<()> {
        std::fs::write(path, self.to_text(comments)).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinutiaeParams {
    /// Curvature limit of the quality mask, radians.
    pub kappa_max: f64,
    /// Analysis window side for spur detection, pixels (odd).
    pub window: usize,
    pub d_min: f64,
    pub border: usize,
    pub trace_len: usize,
}

impl Default for MinutiaeParams {
    fn default() -> Self {
        Self {
            kappa_max: PI / 6.0,
            window: 17,
            d_min: 8.0,
            border: 8,
            trace_len: 10,
        }
    }
}

/// A block is usable when it is foreground, has a valid frequency estimate and
/// its orientation differs from every 4-neighbour by at most `kappa_max`.
pub fn compute_quality_mask(
    field: &OrientationField,
    freq: &FrequencyField,
    roi: &RoiMask,
    kappa_max: f64,
) -> Result<QualityMask> {
    if !field.same_shape(freq) || !field.same_shape(roi) {
        return Err(Error::InvalidParameter("quality mask inputs have different grids".into()));
    }
    Ok(BlockGrid::from_fn(field.rows(), field.cols(), field.block_size(), |r, c| {
        if !*roi.get(r, c) || freq.get(r, c).is_none() {
            return false;
        }
        let here = *field.get(r, c);
        let curvature = field
            .neighbors4(r, c)
            .map(|(nr, nc)| axial_dist(here, *field.get(nr, nc)))
            .fold(0.0, f64::max);
        curvature <= kappa_max
    }))
}

/// Number of 0→1 transitions around a clockwise 8-neighbourhood, wrapping.
pub fn crossing_transitions(neighborhood: &[bool; 8]) -> usize {
    (0..8)
        .filter(|&i| !neighborhood[i] && neighborhood[(i + 1) % 8])
        .count()
}

fn is_four_neighbor(i: usize) -> bool {
    i % 2 == 1
}

/// Runs of consecutive set neighbours; each run is a list of clockwise
/// positions.
fn neighbor_runs(n: &[bool; 8]) -> Vec<Vec<usize>> {
    let Some(start) = (0..8).find(|&i| !n[i]) else {
        return vec![(0..8).collect()];
    };
    let mut runs = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for k in 1..=8 {
        let i = (start + k) % 8;
        if n[i] {
            cur.push(i);
        } else if !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

/// Entry pixel of a branch: the first edge-adjacent pixel of the run, else its
/// first pixel.
fn run_entry(run: &[usize]) -> usize {
    run.iter().copied().find(|&i| is_four_neighbor(i)).unwrap_or(run[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Trace {
    end: (isize, isize),
    steps: usize,
    /// The walk stopped early: dead end or junction.
    terminated: bool,
}

fn transitions_at(skel: &Skeleton, x: isize, y: isize) -> usize {
    let n = CLOCKWISE.map(|(dx, dy)| skel.get_signed(x + dx, y + dy));
    crossing_transitions(&n)
}

/// Walks along the skeleton from `first` (one step away from a start pixel
/// contained in `visited`) for at most `max_steps` pixels.
fn trace(skel: &Skeleton, first: (isize, isize), max_steps: usize, visited: &mut HashSet<(isize, isize)>) -> Trace {
    let mut cur = first;
    visited.insert(cur);
    let mut steps = 1;
    // edge-adjacent moves first, then diagonal ones
    const ORDER: [usize; 8] = [1, 3, 5, 7, 0, 2, 4, 6];
    while steps < max_steps {
        if transitions_at(skel, cur.0, cur.1) >= 3 {
            return Trace { end: cur, steps, terminated: true };
        }
        let next = ORDER.iter().map(|&i| CLOCKWISE[i]).find_map(|(dx, dy)| {
            let p = (cur.0 + dx, cur.1 + dy);
            (skel.get_signed(p.0, p.1) && !visited.contains(&p)).then_some(p)
        });
        match next {
            Some(p) => {
                visited.insert(p);
                cur = p;
                steps += 1;
            }
            None => return Trace { end: cur, steps, terminated: true },
        }
    }
    Trace { end: cur, steps, terminated: false }
}

fn branch_traces(skel: &Skeleton, x: usize, y: usize, max_steps: usize) -> Vec<Trace> {
    let (xi, yi) = (x as isize, y as isize);
    let n = CLOCKWISE.map(|(dx, dy)| skel.get_signed(xi + dx, yi + dy));
    let runs = neighbor_runs(&n);
    let ring: Vec<(isize, isize)> = CLOCKWISE.iter().map(|&(dx, dy)| (xi + dx, yi + dy)).collect();
    runs.iter()
        .map(|run| {
            let mut visited: HashSet<(isize, isize)> = HashSet::new();
            visited.insert((xi, yi));
            // other branches' pixels next to the start are off limits
            for (i, &p) in ring.iter().enumerate() {
                if n[i] && !run.contains(&i) {
                    visited.insert(p);
                }
            }
            let entry = ring[run_entry(run)];
            trace(skel, entry, max_steps, &mut visited)
        })
        .collect()
}

/// Direction of a minutia. An ending points along its ridge, from the ending
/// towards the pixel reached after `trace_len` steps; a bifurcation points
/// opposite the sum of its three branch displacements. Result in `[0, 2π)`.
pub fn minutia_direction(skel: &Skeleton, x: usize, y: usize, kind: MinutiaKind, trace_len: usize) -> f64 {
    let traces = branch_traces(skel, x, y, trace_len);
    let (xf, yf) = (x as f64, y as f64);
    let (mut sx, mut sy) = (0.0, 0.0);
    match kind {
        MinutiaKind::Ending => {
            if let Some(t) = traces.first() {
                sx = t.end.0 as f64 - xf;
                sy = t.end.1 as f64 - yf;
            }
        }
        MinutiaKind::Bifurcation => {
            for t in &traces {
                sx -= t.end.0 as f64 - xf;
                sy -= t.end.1 as f64 - yf;
            }
        }
    }
    if sx == 0.0 && sy == 0.0 {
        return 0.0;
    }
    wrap_two_pi(sy.atan2(sx))
}

/// Crossing-number minutiae on skeleton pixels inside quality-ok blocks,
/// skipping the outermost image row/column. Ordered by `(y, x)`.
pub fn extract_minutiae(skel: &Skeleton, qmask: &QualityMask, trace_len: usize, image_id: &str) -> MinutiaList {
    let (w, h) = (skel.width(), skel.height());
    let mut out = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if !skel.get(x, y) || !matches!(qmask.block_of(x, y), Some((r, c)) if *qmask.get(r, c)) {
                continue;
            }
            let kind = match transitions_at(skel, x as isize, y as isize) {
                1 => MinutiaKind::Ending,
                3 => MinutiaKind::Bifurcation,
                _ => continue,
            };
            let theta = minutia_direction(skel, x, y, kind, trace_len);
            out.push(Minutia::new(x as f64, y as f64, theta, kind));
        }
    }
    MinutiaList::new(image_id, out)
}

fn near_bad_region(m: &Minutia, qmask: &QualityMask, width: usize, height: usize, border: usize) -> bool {
    let (x, y) = (m.x.round() as isize, m.y.round() as isize);
    let b = border as isize;
    let (x0, x1, y0, y1) = (x - b, x + b, y - b, y + b);
    if x0 < 0 || y0 < 0 || x1 >= width as isize || y1 >= height as isize {
        return true;
    }
    let bs = qmask.block_size();
    let (r0, r1) = (y0 as usize / bs, y1 as usize / bs);
    let (c0, c1) = (x0 as usize / bs, x1 as usize / bs);
    (r0..=r1).any(|r| (c0..=c1).any(|c| !*qmask.get(r, c)))
}

fn drop_flagged(list: Vec<Minutia>, flagged: &[bool]) -> Vec<Minutia> {
    list.into_iter()
        .zip(flagged)
        .filter_map(|(m, &f)| (!f).then_some(m))
        .collect()
}

fn flag_pairs(list: &[Minutia], close: f64, rule: impl Fn(&Minutia, &Minutia) -> bool) -> Vec<bool> {
    let mut flagged = vec![false; list.len()];
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            if list[i].distance(&list[j]) <= close && rule(&list[i], &list[j]) {
                flagged[i] = true;
                flagged[j] = true;
            }
        }
    }
    flagged
}

/// Applies the removal rules in order:
/// (a) minutiae within `border` px of a non-ok block or the image edge;
/// (b) pairs of endings within `d_min` with anti-parallel directions (±30°);
/// (c) ending–bifurcation and bifurcation–bifurcation pairs within `d_min`;
/// (d) endings whose ridge stops within `window / 2` px (spurs, short segments);
/// finally any pair still closer than `d_min` is dropped.
pub fn remove_false_minutiae(
    list: &MinutiaList,
    skel: &Skeleton,
    qmask: &QualityMask,
    params: &MinutiaeParams,
) -> Result<MinutiaList> {
    if params.window % 2 == 0 {
        return Err(Error::InvalidParameter(format!("window {} must be odd", params.window)));
    }
    let (w, h) = (skel.width(), skel.height());
    let d_min = params.d_min;

    let kept: Vec<Minutia> = list
        .minutiae
        .iter()
        .copied()
        .filter(|m| !near_bad_region(m, qmask, w, h, params.border))
        .collect();

    let anti_parallel_limit = PI / 6.0;
    let flags = flag_pairs(&kept, d_min, |a, b| {
        a.kind == MinutiaKind::Ending
            && b.kind == MinutiaKind::Ending
            && circ_dist(a.theta, b.theta + PI) <= anti_parallel_limit
    });
    let kept = drop_flagged(kept, &flags);

    let flags = flag_pairs(&kept, d_min, |a, b| {
        a.kind == MinutiaKind::Bifurcation || b.kind == MinutiaKind::Bifurcation
    });
    let kept = drop_flagged(kept, &flags);

    let half = params.window / 2;
    let flags: Vec<bool> = kept
        .iter()
        .map(|m| {
            if m.kind != MinutiaKind::Ending {
                return false;
            }
            let traces = branch_traces(skel, m.x as usize, m.y as usize, half);
            traces.first().is_none_or(|t| t.terminated && t.steps < half)
        })
        .collect();
    let kept = drop_flagged(kept, &flags);

    let flags: Vec<bool> = (0..kept.len())
        .map(|i| (0..kept.len()).any(|j| j != i && kept[i].distance(&kept[j]) < d_min))
        .collect();
    let kept = drop_flagged(kept, &flags);

    Ok(MinutiaList::new(list.image_id.clone(), kept))
}
