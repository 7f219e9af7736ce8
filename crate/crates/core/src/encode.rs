//! n-nearest-neighbour minutia codes and the finger-code file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::angle::wrap_pi;
use crate::error::{Error, Result};
use crate::minutiae::{Minutia, MinutiaKind, MinutiaList};

pub const FINGERCODE_HEADER: &str = "#ridgekit-fingercode v1";

/// Frame of the stored neighbour angle θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AngleMode {
    /// Absolute image-frame angle of the displacement.
    Literal,
    /// Displacement angle relative to the reference minutia's direction.
    #[default]
    Normalized,
}

impl fmt::Display for AngleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleMode::Literal => "literal",
            AngleMode::Normalized => "normalized",
        })
    }
}

impl FromStr for AngleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(AngleMode::Literal),
            "normalized" => Ok(AngleMode::Normalized),
            other => Err(Error::Format(format!("unknown angle mode {other:?}"))),
        }
    }
}

/// Relation of a reference minutia to one neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborFeature {
    /// Euclidean distance, px.
    pub rho: f64,
    /// Angle of the reference-minus-neighbour displacement, `(-π, π]`.
    pub theta: f64,
    /// Reference direction minus neighbour direction, `(-π, π]`.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinutiaCode {
    pub ref_index: usize,
    /// Ascending `rho`, ties by neighbour index.
    pub features: Vec<NeighborFeature>,
}

/// Encoded minutiae list of one impression.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerCode {
    pub codes: Vec<MinutiaCode>,
    pub n: usize,
    pub mode: AngleMode,
    pub subject_id: String,
    pub sample_id: String,
    pub minutiae: MinutiaList,
}

impl FingerCode {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Feature count each code carries for this finger-code's size.
    pub fn expected_features(&self) -> usize {
        self.n.min(self.codes.len().saturating_sub(1))
    }
}

/// Indices of the `n` nearest other minutiae by Euclidean distance, ties by
/// index. Minutiae coincident with the reference are skipped.
pub fn nearest_neighbors(list: &MinutiaList, i: usize, n: usize) -> Result<Vec<usize>> {
    let ms = &list.minutiae;
    if ms.len() < 2 {
        return Err(Error::InsufficientMinutiae(ms.len()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("neighbour count must be >= 1".into()));
    }
    let reference = &ms[i];
    let mut cands: Vec<(f64, usize)> = ms
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, m)| (reference.distance(m), j))
        .filter(|&(d, _)| d > 0.0)
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(cands.into_iter().take(n).map(|(_, j)| j).collect())
}

pub fn neighbor_feature(reference: &Minutia, neighbor: &Minutia, mode: AngleMode) -> NeighborFeature {
    let dx = reference.x - neighbor.x;
    let dy = reference.y - neighbor.y;
    let rho = dx.hypot(dy);
    let absolute = wrap_pi(dy.atan2(dx));
    let theta = match mode {
        AngleMode::Literal => absolute,
        AngleMode::Normalized => wrap_pi(absolute - reference.theta),
    };
    NeighborFeature {
        rho,
        theta,
        phi: wrap_pi(reference.theta - neighbor.theta),
    }
}

/// Features of minutia `i` against the given neighbours, in their order.
/// Coincident neighbours are skipped.
pub fn encode_minutia(list: &MinutiaList, i: usize, neighbors: &[usize], mode: AngleMode) -> Result<MinutiaCode> {
    if neighbors.is_empty() || neighbors.contains(&i) {
        return Err(Error::InvalidParameter(
            "neighbour list must be nonempty and exclude the reference".into(),
        ));
    }
    let reference = &list.minutiae[i];
    let features = neighbors
        .iter()
        .map(|&j| neighbor_feature(reference, &list.minutiae[j], mode))
        .filter(|f| f.rho > 0.0)
        .collect();
    Ok(MinutiaCode { ref_index: i, features })
}

pub fn encode_fingerprint(
    list: &MinutiaList,
    n: usize,
    mode: AngleMode,
    subject_id: &str,
    sample_id: &str,
) -> Result<FingerCode> {
    if list.len() < 2 {
        return Err(Error::InsufficientMinutiae(list.len()));
    }
    let codes = (0..list.len())
        .map(|i| {
            let nb = nearest_neighbors(list, i, n)?;
            if nb.is_empty() {
                // every other minutia coincides with this one
                return Ok(MinutiaCode { ref_index: i, features: Vec::new() });
            }
            encode_minutia(list, i, &nb, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FingerCode {
        codes,
        n,
        mode,
        subject_id: subject_id.to_string(),
        sample_id: sample_id.to_string(),
        minutiae: list.clone(),
    })
}

/// Decimal text with 9 significant digits.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with("-0") && s.bytes().skip(1).all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn check_id(id: &str, what: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == '=') {
        return Err(Error::Format(format!("{what} id {id:?} must be nonempty without spaces or '='")));
    }
    Ok(())
}

impl FingerCode {
    pub fn to_text(&self, comments: &[String]) -> Result<String> {
        check_id(&self.subject_id, "subject")?;
        check_id(&self.sample_id, "sample")?;
        let mut out = format!(
            "{FINGERCODE_HEADER} subject={} sample={} n={} N={} mode={}\n",
            self.subject_id,
            self.sample_id,
            self.n,
            self.codes.len(),
            self.mode
        );
        for c in comments {
            out.push_str(&format!("# {c}\n"));
        }
        for code in &self.codes {
            let m = &self.minutiae.minutiae[code.ref_index];
            out.push_str(&format!("{} {} {} {}\n", fmt_sig9(m.x), fmt_sig9(m.y), fmt_sig9(m.theta), m.kind));
            for f in &code.features {
                out.push_str(&format!("{} {} {}\n", fmt_sig9(f.rho), fmt_sig9(f.theta), fmt_sig9(f.phi)));
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().unwrap_or_default();
        let rest = header
            .strip_prefix("#ridgekit-fingercode ")
            .ok_or_else(|| Error::Format("missing finger-code header".into()))?;
        let mut fields = rest.split_whitespace();
        match fields.next() {
            Some("v1") => {}
            other => return Err(Error::Format(format!("unsupported finger-code version {other:?}"))),
        }
        let (mut subject, mut sample, mut n, mut count, mut mode) = (None, None, None, None, None);
        for kv in fields {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field {kv:?}")))?;
            let bad = || Error::Format(format!("bad header value {kv:?}"));
            match k {
                "subject" => subject = Some(v.to_string()),
                "sample" => sample = Some(v.to_string()),
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "N" => count = Some(v.parse::<usize>().map_err(|_| bad())?),
                "mode" => mode = Some(v.parse::<AngleMode>()?),
                _ => return Err(Error::Format(format!("unknown header field {k:?}"))),
            }
        }
        let missing = |f: &str| Error::Format(format!("header lacks {f}"));
        let subject = subject.ok_or_else(|| missing("subject"))?;
        let sample = sample.ok_or_else(|| missing("sample"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let count = count.ok_or_else(|| missing("N"))?;
        let mode = mode.ok_or_else(|| missing("mode"))?;
        let expected = n.min(count.saturating_sub(1));

        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?}")));
        let mut minutiae = Vec::with_capacity(count);
        let mut codes: Vec<MinutiaCode> = Vec::with_capacity(count);
        for line in lines.filter(|l| !l.starts_with('#')) {
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok.len() {
                4 => {
                    if let Some(prev) = codes.last() {
                        if prev.features.len() != expected {
                            return Err(Error::Format(format!(
                                "minutia {} has {} features, expected {expected}",
                                prev.ref_index,
                                prev.features.len()
                            )));
                        }
                    }
                    let kind: MinutiaKind = tok[3].parse()?;
                    minutiae.push(Minutia::new(num(tok[0])?, num(tok[1])?, num(tok[2])?, kind));
                    codes.push(MinutiaCode { ref_index: codes.len(), features: Vec::new() });
                }
                3 => {
                    let code = codes
                        .last_mut()
                        .ok_or_else(|| Error::Format("feature record before any minutia".into()))?;
                    code.features.push(NeighborFeature {
                        rho: num(tok[0])?,
                        theta: num(tok[1])?,
                        phi: num(tok[2])?,
                    });
                }
                _ => return Err(Error::Format(format!("malformed record {line:?}"))),
            }
        }
        if let Some(last) = codes.last() {
            if last.features.len() != expected {
                return Err(Error::Format(format!(
                    "minutia {} has {} features, expected {expected}",
                    last.ref_index,
                    last.features.len()
                )));
            }
        }
        if codes.len() != count {
            return Err(Error::Format(format!("header declares N={count}, found {}", codes.len())));
        }
        let image_id = format!("{subject}_{sample}");
        Ok(FingerCode {
            codes,
            n,
            mode,
            subject_id: subject,
            sample_id: sample,
            minutiae: MinutiaList::new(image_id, minutiae),
        })
    }
}

pub fn write_fingercode(code: &FingerCode, path: &Path, comments: &[String]) -> Result<()> {
    std::fs::write(path, code.to_text(comments)?).map_err(|e| Error::io(path, e))
}

pub fn read_fingercode(path: &Path) -> Result<FingerCode> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FingerCode::from_text(&text)
}
