//! FVC-style verification protocol: pair generation, FMR/FNMR, EER, sweeps and
//! matcher throughput.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::encode::{encode_fingerprint, AngleMode, FingerCode};
use crate::error::{Error, Result};
use crate::imgio::{DatasetIndex, SampleKey};
use crate::matching::{count_matrix, match_fingercodes, result_from_matrix, MatchParams};
use crate::minutiae::MinutiaList;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Genuine,
    Impostor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    pub kind: PairKind,
    pub pairs: Vec<(SampleKey, SampleKey)>,
}

impl PairList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Every unordered pair of samples within each subject.
pub fn genuine_pairs(idx: &DatasetIndex) -> Result<PairList> {
    if idx.samples_per_subject() < 2 {
        return Err(Error::Dataset(format!(
            "genuine pairs need >= 2 samples per subject, have {}",
            idx.samples_per_subject()
        )));
    }
    let mut pairs = Vec::new();
    for subject in idx.subjects() {
        let samples = idx.samples_of(subject);
        for (a, &sa) in samples.iter().enumerate() {
            for &sb in &samples[a + 1..] {
                pairs.push((SampleKey::new(subject.clone(), sa), SampleKey::new(subject.clone(), sb)));
            }
        }
    }
    Ok(PairList {
        kind: PairKind::Genuine,
        pairs,
    })
}

/// First sample of every subject against the first sample of every later
/// subject.
pub fn impostor_pairs(idx: &DatasetIndex) -> Result<PairList> {
    let subjects = idx.subjects();
    if subjects.len() < 2 {
        return Err(Error::Dataset(format!(
            "impostor pairs need >= 2 subjects, have {}",
            subjects.len()
        )));
    }
    let firsts: Vec<SampleKey> = subjects
        .iter()
        .map(|s| SampleKey::new(s.clone(), idx.samples_of(s)[0]))
        .collect();
    let mut pairs = Vec::with_capacity(firsts.len() * (firsts.len() - 1) / 2);
    for (a, ka) in firsts.iter().enumerate() {
        for kb in &firsts[a + 1..] {
            pairs.push((ka.clone(), kb.clone()));
        }
    }
    Ok(PairList {
        kind: PairKind::Impostor,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub genuine_scores: Vec<f64>,
    pub impostor_scores: Vec<f64>,
    /// Ascending distinct thresholds.
    pub thresholds: Vec<f64>,
    pub fmr: Vec<f64>,
    pub fnmr: Vec<f64>,
    pub eer: f64,
    pub eer_threshold: f64,
}

fn count_below(sorted: &[f64], tau: f64) -> usize {
    sorted.partition_point(|&s| s < tau)
}

/// Rates at every distinct score plus 0 and 1, accepting a comparison when its
/// score is `>= τ`. The EER fields are filled by [`compute_eer`].
pub fn compute_rates(genuine: &[f64], impostor: &[f64]) -> Result<EvalReport> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::InvalidParameter("genuine and impostor score lists must be nonempty".into()));
    }
    if genuine.iter().chain(impostor).any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().chain([0.0, 1.0]).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let (ng, ni) = (g.len() as f64, i.len() as f64);
    let fmr = thresholds
        .iter()
        .map(|&t| (i.len() - count_below(&i, t)) as f64 / ni)
        .collect();
    let fnmr = thresholds.iter().map(|&t| count_below(&g, t) as f64 / ng).collect();
    let mut report = EvalReport {
        genuine_scores: genuine.to_vec(),
        impostor_scores: impostor.to_vec(),
        thresholds,
        fmr,
        fnmr,
        eer: 0.0,
        eer_threshold: 0.0,
    };
    let (eer, tau) = compute_eer(&report);
    report.eer = eer;
    report.eer_threshold = tau;
    Ok(report)
}

/// Crossing of FMR and FNMR: an exact tie at a threshold is returned as is,
/// otherwise both curves are interpolated linearly between the two thresholds
/// bracketing the sign change of `FMR − FNMR`.
pub fn compute_eer(report: &EvalReport) -> (f64, f64) {
    let t = &report.thresholds;
    let diff = |k: usize| report.fmr[k] - report.fnmr[k];
    for k in 0..t.len() {
        let d = diff(k);
        if d == 0.0 {
            return (report.fmr[k], t[k]);
        }
        if d < 0.0 {
            if k == 0 {
                return (0.5 * (report.fmr[0] + report.fnmr[0]), t[0]);
            }
            let d0 = diff(k - 1);
            let lambda = d0 / (d0 - d);
            let eer = report.fmr[k - 1] + lambda * (report.fmr[k] - report.fmr[k - 1]);
            let tau = t[k - 1] + lambda * (t[k] - t[k - 1]);
            return (eer, tau);
        }
    }
    // FMR stays above FNMR everywhere (impostors at the top score)
    let last = t.len() - 1;
    (0.5 * (report.fmr[last] + report.fnmr[last]), t[last])
}

impl EvalReport {
    /// `threshold,fmr,fnmr` rows and a closing `eer,<v>,threshold,<v>` line.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("threshold,fmr,fnmr\n");
        for k in 0..self.thresholds.len() {
            let _ = writeln!(out, "{:.6},{:.6},{:.6}", self.thresholds[k], self.fmr[k], self.fnmr[k]);
        }
        let _ = writeln!(out, "eer,{:.6},threshold,{:.6}", self.eer, self.eer_threshold);
        out
    }
}

/// Scores for a list of pairs given a per-sample finger-code lookup. A pair
/// with a missing code scores 0. Parallel, with results in pair order.
pub fn score_pairs(
    pairs: &[(SampleKey, SampleKey)],
    codes: &BTreeMap<SampleKey, FingerCode>,
    p: &MatchParams,
) -> Result<Vec<f64>> {
    pairs
        .par_iter()
        .map(|(a, b)| match (codes.get(a), codes.get(b)) {
            (Some(ca), Some(cb)) => match_fingercodes(ca, cb, p).map(|r| r.score),
            _ => Ok(0.0),
        })
        .collect()
}

/// Matched-neighbour threshold sweep results. `cells[t_idx][n_idx]` is `None`
/// where `t > n`.
#[derive(Debug, Clone)]
pub struct SweepMatrix {
    pub n_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub cells: Vec<Vec<Option<std::result::Result<f64, String>>>>,
}

impl SweepMatrix {
    pub fn eer(&self, n: usize, t: usize) -> Option<f64> {
        let ni = self.n_values.iter().position(|&v| v == n)?;
        let ti = self.t_values.iter().position(|&v| v == t)?;
        self.cells[ti][ni].as_ref().and_then(|r| r.as_ref().ok().copied())
    }

    /// Rows `t`, columns `n`, EER in percent; `-` where `t > n`.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("t\\n");
        for n in &self.n_values {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (ti, t) in self.t_values.iter().enumerate() {
            let _ = write!(out, "{t}");
            for cell in &self.cells[ti] {
                match cell {
                    None => out.push_str(",-"),
                    Some(Ok(eer)) => {
                        let _ = write!(out, ",{:.4}", eer * 100.0);
                    }
                    Some(Err(_)) => out.push_str(",error"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// EER for every `(n, t)` with `t <= n`. Minutiae lists are re-encoded once
/// per `n`; each pair's count matrix is computed once per `n` and reused for
/// every `t`. A cell that fails records its error and the grid continues.
pub fn sweep_grid(
    genuine: &PairList,
    impostor: &PairList,
    minutiae: &BTreeMap<SampleKey, MinutiaList>,
    n_values: &[usize],
    t_values: &[usize],
    base: &MatchParams,
) -> SweepMatrix {
    let mut cells = vec![vec![None; n_values.len()]; t_values.len()];
    for (ni, &n) in n_values.iter().enumerate() {
        let codes: BTreeMap<SampleKey, FingerCode> = minutiae
            .iter()
            .filter_map(|(k, list)| {
                encode_fingerprint(list, n, base.mode, &k.subject, &k.sample.to_string())
                    .ok()
                    .map(|c| (k.clone(), c))
            })
            .collect();
        let matrices = |pairs: &PairList| -> Vec<Option<crate::matching::CountMatrix>> {
            pairs
                .pairs
                .par_iter()
                .map(|(a, b)| match (codes.get(a), codes.get(b)) {
                    (Some(ca), Some(cb)) => count_matrix(ca, cb, base).ok(),
                    _ => None,
                })
                .collect()
        };
        let gm = matrices(genuine);
        let im = matrices(impostor);
        for (ti, &t) in t_values.iter().enumerate() {
            if t > n {
                continue;
            }
            let p = MatchParams { t, ..*base };
            let scores = |ms: &[Option<crate::matching::CountMatrix>]| -> Vec<f64> {
                ms.iter()
                    .map(|m| m.as_ref().map_or(0.0, |m| result_from_matrix(m, &p).score))
                    .collect()
            };
            let cell = compute_rates(&scores(&gm), &scores(&im))
                .map(|r| r.eer)
                .map_err(|e| e.to_string());
            cells[ti][ni] = Some(cell);
        }
    }
    SweepMatrix {
        n_values: n_values.to_vec(),
        t_values: t_values.to_vec(),
        cells,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub pairs: usize,
    pub seconds: f64,
    pub matches_per_sec: f64,
}

/// Single-threaded wall-clock matching rate over a batch of code pairs.
pub fn measure_throughput(pairs: &[(FingerCode, FingerCode)], p: &MatchParams) -> Result<Throughput> {
    let start = Instant::now();
    let mut checksum = 0usize;
    for (a, b) in pairs {
        checksum += match_fingercodes(a, b, p)?.matched_pairs;
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(checksum);
    Ok(Throughput {
        pairs: pairs.len(),
        seconds,
        matches_per_sec: pairs.len() as f64 / seconds,
    })
}

/// Full-protocol pair count: genuine plus impostor comparisons.
pub fn protocol_match_count(idx: &DatasetIndex) -> Result<usize> {
    Ok(genuine_pairs(idx)?.len() + impostor_pairs(idx)?.len())
}

/// Encodes every sample that has a minutiae list; failures are skipped.
pub fn encode_all(
    minutiae: &BTreeMap<SampleKey, MinutiaList>,
    n: usize,
    mode: AngleMode,
) -> BTreeMap<SampleKey, FingerCode> {
    minutiae
        .iter()
        .filter_map(|(k, l)| {
            encode_fingerprint(l, n, mode, &k.subject, &k.sample.to_string())
                .ok()
                .map(|c| (k.clone(), c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;

    fn index(subjects: usize, samples: u32) -> DatasetIndex {
        let recs = (0..subjects).flat_map(|s| {
            (1..=samples).map(move |k| (format!("s{s:03}"), k, PathBuf::from(format!("{s}_{k}"))))
        });
        DatasetIndex::from_records(recs).unwrap()
    }

    #[test]
    fn pair_counts() {
        assert_eq!(genuine_pairs(&index(3, 2)).unwrap().len(), 3);
        assert_eq!(genuine_pairs(&index(1, 6)).unwrap().len(), 15);
        assert_eq!(impostor_pairs(&index(2, 1)).unwrap().len(), 1);
        assert_eq!(impostor_pairs(&index(3, 1)).unwrap().len(), 3);
        assert!(genuine_pairs(&index(3, 1)).is_err());
        assert!(impostor_pairs(&index(1, 3)).is_err());
    }

    #[test]
    fn pair_invariants() {
        let idx = index(4, 3);
        for (a, b) in genuine_pairs(&idx).unwrap().pairs {
            assert!(a.subject == b.subject && a.sample < b.sample);
        }
        for (a, b) in impostor_pairs(&idx).unwrap().pairs {
            assert!(a.subject < b.subject && a.sample == 1 && b.sample == 1);
        }
    }

    fn at(r: &EvalReport, tau: f64) -> (f64, f64) {
        let k = r.thresholds.iter().position(|&t| t == tau).unwrap();
        (r.fmr[k], r.fnmr[k])
    }

    #[test]
    fn rates_separable() {
        let r = compute_rates(&[0.9, 0.8], &[0.1, 0.2]).unwrap();
        let k = r.thresholds.partition_point(|&t| t < 0.5);
        assert_eq!((r.fmr[k], r.fnmr[k]), (0.0, 0.0));
        assert_eq!(r.eer, 0.0);
    }

    #[test]
    fn rates_degenerate_overlap() {
        let r = compute_rates(&[0.5], &[0.5]).unwrap();
        assert_eq!(at(&r, 0.5), (1.0, 0.0));
        assert_eq!(at(&r, 1.0), (0.0, 1.0));
        assert!((r.eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rates_three_by_three() {
        let r = compute_rates(&[0.2, 0.6, 0.9], &[0.1, 0.3, 0.7]).unwrap();
        let (fmr, fnmr) = at(&r, 0.6);
        assert!((fmr - 1.0 / 3.0).abs() < 1e-12 && (fnmr - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.eer - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.eer_threshold, 0.6);
    }

    #[test]
    fn empty_scores_rejected() {
        assert!(compute_rates(&[], &[0.1]).is_err());
        assert!(compute_rates(&[0.1], &[]).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let m = SweepMatrix {
            n_values: vec![1, 2],
            t_values: vec![1, 2],
            cells: vec![vec![Some(Ok(0.1822)), Some(Ok(0.1827))], vec![None, Some(Ok(0.0922))]],
        };
        let csv = m.to_csv(&[]);
        assert_eq!(csv, "t\\n,1,2\n1,18.2200,18.2700\n2,-,9.2200\n");
    }
}
