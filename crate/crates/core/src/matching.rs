//! Exhaustive neighbour-code matching.
//!
//! Every minutia code of the candidate is compared with every minutia code of
//! the template; each comparison pairs all `n_c × n_t` neighbour features, so
//! one finger-code comparison costs `M · N · n²` feature tests.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::angle::circ_dist;
use crate::encode::{AngleMode, FingerCode, MinutiaCode, NeighborFeature};
use crate::error::{Error, Result};

/// How the matched-neighbour count is compared with the threshold `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// Eligible when `count >= t`.
    #[default]
    AtLeast,
    /// Eligible when `count == t`.
    Exactly,
}

impl ThresholdRule {
    pub fn accepts(self, count: usize, t: usize) -> bool {
        match self {
            ThresholdRule::AtLeast => count >= t,
            ThresholdRule::Exactly => count == t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub rho_tol: f64,
    pub theta_tol: f64,
    pub phi_tol: f64,
    /// Matched-neighbour threshold.
    pub t: usize,
    pub mode: AngleMode,
    pub rule: ThresholdRule,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            rho_tol: 8.0,
            theta_tol: 0.2618,
            phi_tol: 0.2618,
            t: 5,
            mode: AngleMode::Normalized,
            rule: ThresholdRule::AtLeast,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let angle_ok = |a: f64| a > 0.0 && a < std::f64::consts::PI;
        if !(self.rho_tol > 0.0) || !angle_ok(self.theta_tol) || !angle_ok(self.phi_tol) || self.t < 1 {
            return Err(Error::InvalidParameter(format!("invalid match parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub score: f64,
    pub matched_pairs: usize,
    /// Candidate minutiae count.
    pub m: usize,
    /// Template minutiae count.
    pub n: usize,
    /// Number of neighbour-feature tests performed.
    pub feature_comparisons: u64,
}

/// Report line `candidate<TAB>template<TAB>score<TAB>pairs<TAB>M<TAB>N`.
pub fn report_line(candidate_id: &str, template_id: &str, r: &MatchResult) -> String {
    format!(
        "{candidate_id}\t{template_id}\t{:.6}\t{}\t{}\t{}",
        r.score, r.matched_pairs, r.m, r.n
    )
}

pub fn neighbor_feature_match(a: &NeighborFeature, b: &NeighborFeature, p: &MatchParams) -> bool {
    (a.rho - b.rho).abs() <= p.rho_tol
        && circ_dist(a.theta, b.theta) <= p.theta_tol
        && circ_dist(a.phi, b.phi) <= p.phi_tol
}

/// Greedy one-to-one pairing of matching features, smallest `|Δρ|` first
/// (ties: candidate index, then template index). Returns the number of
/// assigned pairs.
pub fn minutia_code_match(c: &MinutiaCode, t_code: &MinutiaCode, p: &MatchParams) -> usize {
    let mut scratch = Vec::new();
    code_match_with(&c.features, &t_code.features, p, &mut scratch)
}

fn code_match_with(
    cand: &[NeighborFeature],
    tmpl: &[NeighborFeature],
    p: &MatchParams,
    pairs: &mut Vec<(f64, usize, usize)>,
) -> usize {
    pairs.clear();
    for (i, a) in cand.iter().enumerate() {
        for (j, b) in tmpl.iter().enumerate() {
            if neighbor_feature_match(a, b, p) {
                pairs.push(((a.rho - b.rho).abs(), i, j));
            }
        }
    }
    if pairs.is_empty() {
        return 0;
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_c = vec![false; cand.len()];
    let mut used_t = vec![false; tmpl.len()];
    let mut count = 0;
    for &(_, i, j) in pairs.iter() {
        if !used_c[i] && !used_t[j] {
            used_c[i] = true;
            used_t[j] = true;
            count += 1;
        }
    }
    count
}

/// Matched-neighbour counts for every (candidate minutia, template minutia).
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    pub rows: usize,
    pub cols: usize,
    pub counts: Vec<usize>,
    pub feature_comparisons: u64,
}

impl CountMatrix {
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.counts[i * self.cols + j]
    }
}

fn check_compatible(cand: &FingerCode, tmpl: &FingerCode, p: &MatchParams) -> Result<()> {
    if cand.n != tmpl.n {
        return Err(Error::IncompatibleCodes(format!("n {} vs {}", cand.n, tmpl.n)));
    }
    if cand.mode != tmpl.mode || cand.mode != p.mode {
        return Err(Error::IncompatibleCodes(format!(
            "modes {} / {} / params {}",
            cand.mode, tmpl.mode, p.mode
        )));
    }
    Ok(())
}

pub fn count_matrix(cand: &FingerCode, tmpl: &FingerCode, p: &MatchParams) -> Result<CountMatrix> {
    check_compatible(cand, tmpl, p)?;
    let (rows, cols) = (cand.codes.len(), tmpl.codes.len());
    let mut counts = Vec::with_capacity(rows * cols);
    let mut comparisons = 0u64;
    let mut scratch = Vec::new();
    for c in &cand.codes {
        for t in &tmpl.codes {
            comparisons += (c.features.len() * t.features.len()) as u64;
            counts.push(code_match_with(&c.features, &t.features, p, &mut scratch));
        }
    }
    Ok(CountMatrix {
        rows,
        cols,
        counts,
        feature_comparisons: comparisons,
    })
}

/// Greedy one-to-one acceptance of eligible minutia pairs in descending count
/// (ties: smaller candidate index, then template index).
pub fn assign_pairs(matrix: &CountMatrix, t: usize, rule: ThresholdRule) -> usize {
    let mut eligible: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..matrix.rows {
        for j in 0..matrix.cols {
            let c = matrix.get(i, j);
            if c > 0 && rule.accepts(c, t) {
                eligible.push((c, i, j));
            }
        }
    }
    eligible.sort_by(|a, b| match b.0.cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1).then(a.2.cmp(&b.2)),
        o => o,
    });
    let mut used_c = vec![false; matrix.rows];
    let mut used_t = vec![false; matrix.cols];
    let mut accepted = 0;
    for (_, i, j) in eligible {
        if !used_c[i] && !used_t[j] {
            used_c[i] = true;
            used_t[j] = true;
            accepted += 1;
        }
    }
    accepted
}

/// `matched_pairs / max(M, N)`, 0 for empty codes.
pub fn score_from_pairs(matched_pairs: usize, m: usize, n: usize) -> f64 {
    let denom = m.max(n);
    if denom == 0 {
        0.0
    } else {
        matched_pairs as f64 / denom as f64
    }
}

pub fn result_from_matrix(matrix: &CountMatrix, p: &MatchParams) -> MatchResult {
    let matched_pairs = assign_pairs(matrix, p.t, p.rule);
    MatchResult {
        score: score_from_pairs(matched_pairs, matrix.rows, matrix.cols),
        matched_pairs,
        m: matrix.rows,
        n: matrix.cols,
        feature_comparisons: matrix.feature_comparisons,
    }
}

pub fn match_fingercodes(cand: &FingerCode, tmpl: &FingerCode, p: &MatchParams) -> Result<MatchResult> {
    let matrix = count_matrix(cand, tmpl, p)?;
    Ok(result_from_matrix(&matrix, p))
}

/// One candidate against a gallery, in gallery order. Parallel over templates.
pub fn match_gallery(cand: &FingerCode, gallery: &[&FingerCode], p: &MatchParams) -> Vec<Result<MatchResult>> {
    gallery
        .par_iter()
        .map(|t| match_fingercodes(cand, t, p))
        .collect()
}
