//! Acceptance suite. Prints one line per criterion and exits non-zero when a
//! gating criterion fails. Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::catch_unwind;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use ridgekit::encode::{encode_fingerprint, AngleMode, FingerCode};
use ridgekit::enhance::{gabor_kernel, gabor_kernel_raw, thin};
use ridgekit::eval::{
    compute_rates, genuine_pairs, impostor_pairs, measure_throughput, protocol_match_count, score_pairs, sweep_grid,
};
use ridgekit::grid::BlockGrid;
use ridgekit::imgio::{load_dataset, normalize, DatasetIndex, SampleKey};
use ridgekit::matching::{match_fingercodes, minutia_code_match, MatchParams};
use ridgekit::minutiae::{crossing_transitions, Minutia, MinutiaList};
use ridgekit::ridgefield::{estimate_frequency, estimate_orientation, segment_roi, FrequencyParams};
use ridgekit::synth::{dataset_samples, DatasetParams};
use ridgekit::{pipeline, Config};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn crossing_number_oracle() -> Outcome {
    let start = Instant::now();
    for bits in 0u32..256 {
        let ring: [bool; 8] = std::array::from_fn(|k| bits >> k & 1 == 1);
        ensure!(
            crossing_transitions(&ring) == brute_transitions(&ring),
            "neighbourhood {bits:08b}: {} vs {}",
            crossing_transitions(&ring),
            brute_transitions(&ring)
        );
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3}s");
    Ok(format!("256/256 neighbourhoods agree in {:.1} ms", secs * 1e3))
}

fn gabor_spot_values() -> Outcome {
    let k = gabor_kernel_raw(0.0, 0.125, 4.0, 4.0, 11).map_err(|e| e.to_string())?;
    ensure!(k.tap(0, 0) == 1.0, "centre tap {}", k.tap(0, 0));
    let tap = k.tap(4, 0);
    ensure!((tap + 0.60653).abs() <= 1e-5, "tap(4,0) = {tap}");
    let direct = (-0.5f64).exp() * (2.0 * PI * 0.125 * 4.0).cos();
    ensure!((tap - direct).abs() < 1e-12, "tap(4,0) {tap} vs direct {direct}");
    for theta in [0.0, 0.4, PI / 3.0, 2.0] {
        for kernel in [
            gabor_kernel_raw(theta, 0.1, 4.0, 4.0, 11).map_err(|e| e.to_string())?,
            gabor_kernel(theta, 0.1, 4.0, 4.0, 11).map_err(|e| e.to_string())?,
        ] {
            for y in -11isize..=11 {
                for x in -11isize..=11 {
                    ensure!(kernel.tap(x, y) == kernel.tap(-x, -y), "asymmetric at ({x},{y}) theta {theta}");
                }
            }
        }
    }
    Ok(format!("centre 1.0, tap(4,0) = {tap:.6}, even symmetry exact"))
}

const PERIODS: [f64; 4] = [6.0, 8.0, 10.0, 12.0];
const ANGLES_DEG: [f64; 4] = [0.0, 30.0, 60.0, 90.0];

fn frequency_recovery() -> Outcome {
    let start = Instant::now();
    let mut blocks = 0;
    let mut worst: f64 = 0.0;
    for period in PERIODS {
        for deg in ANGLES_DEG {
            let img = normalize(&stripes(128, 128, period, deg.to_radians()), 0.5, 0.01);
            let roi = segment_roi(&img, 16, 0.05).map_err(|e| e.to_string())?;
            let o = estimate_orientation(&img, 16).map_err(|e| e.to_string())?;
            let f = estimate_frequency(&img, &o, &roi, &FrequencyParams::default()).map_err(|e| e.to_string())?;
            for ((r, c), &fg) in roi.iter() {
                if !fg {
                    continue;
                }
                let v = f.get(r, c).ok_or(format!("period {period} at {deg}°: block ({r},{c}) has no estimate"))?;
                let err = (v * period - 1.0).abs();
                worst = worst.max(err);
                blocks += 1;
                ensure!(err <= 0.05, "period {period} at {deg}°: block ({r},{c}) f = {v:.4}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(blocks > 0, "no foreground blocks");
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("{blocks} blocks, worst relative error {:.2}%, {secs:.2}s", worst * 100.0))
}

fn orientation_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut blocks = 0;
    for period in PERIODS {
        for deg in ANGLES_DEG {
            let truth = deg.to_radians();
            let img = normalize(&stripes(128, 128, period, truth), 0.5, 0.01);
            let o: BlockGrid<f64> = estimate_orientation(&img, 16).map_err(|e| e.to_string())?;
            for ((r, c), &a) in o.iter() {
                if r == 0 || c == 0 || r + 1 == o.rows() || c + 1 == o.cols() {
                    continue;
                }
                let d = (a - truth).rem_euclid(PI);
                let d = d.min(PI - d);
                worst = worst.max(d);
                blocks += 1;
                ensure!(d <= 0.05, "period {period} at {deg}°: block ({r},{c}) angle {a:.4}");
            }
        }
    }
    Ok(format!("{blocks} interior blocks, worst error {worst:.4} rad"))
}

fn thinning_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut kept = 0;
    for case in 0..50 {
        let img = random_blobs(&mut rng, 64, 64);
        let skel = thin(&img);
        let sb = skel.as_binary();
        for y in 0..64 {
            for x in 0..64 {
                ensure!(!sb.get(x, y) || img.get(x, y), "case {case}: skeleton pixel ({x},{y}) outside foreground");
            }
        }
        ensure!(!sb.has_full_square(), "case {case}: 2x2 square left");
        ensure!(thin(sb) == skel, "case {case}: not idempotent");
        for comp in components(&img).into_iter().filter(|c| c.len() > 4) {
            let mut part = ridgekit::enhance::BinaryImage::new(64, 64);
            for &(x, y) in &comp {
                if sb.get(x, y) {
                    part.set(x, y, true);
                }
            }
            let n = components(&part).len();
            ensure!(n == 1, "case {case}: component of {} px thinned into {n} pieces", comp.len());
            kept += 1;
        }
    }
    Ok(format!("50 images, {kept} components preserved"))
}

fn encoding_invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for case in 0..100 {
        let count = rng.gen_range(12..40);
        let base = constellation(&mut rng, count, 256.0, 4.0, true);
        let (dx, dy) = (rng.gen_range(-60..60) as f64, rng.gen_range(-60..60) as f64);
        let moved = rigid(&base, 0.0, 0.0, 0.0, dx, dy);
        for mode in [AngleMode::Literal, AngleMode::Normalized] {
            let a = encode_fingerprint(&list("a", base.clone()), 9, mode, "s", "1").map_err(|e| e.to_string())?;
            let b = encode_fingerprint(&list("a", moved.clone()), 9, mode, "s", "1").map_err(|e| e.to_string())?;
            ensure!(a.codes == b.codes, "case {case}: translation changed the {mode} code");
        }

        // real-valued positions keep neighbour distances free of exact ties
        let base = constellation(&mut rng, count, 256.0, 4.0, false);
        let alpha = rng.gen_range(-PI..PI);
        let turned = rigid(&base, alpha, 128.0, 128.0, 0.0, 0.0);
        let a = encode_fingerprint(&list("a", base.clone()), 9, AngleMode::Normalized, "s", "1").unwrap();
        let b = encode_fingerprint(&list("a", turned.clone()), 9, AngleMode::Normalized, "s", "1").unwrap();
        let la = encode_fingerprint(&list("a", base), 9, AngleMode::Literal, "s", "1").unwrap();
        let lb = encode_fingerprint(&list("a", turned), 9, AngleMode::Literal, "s", "1").unwrap();
        for (k, ((ca, cb), (lca, lcb))) in a.codes.iter().zip(&b.codes).zip(la.codes.iter().zip(&lb.codes)).enumerate() {
            ensure!(ca.features.len() == cb.features.len(), "case {case}: feature count differs");
            for (fa, fb) in ca.features.iter().zip(&cb.features) {
                ensure!(
                    (fa.rho - fb.rho).abs() < 1e-9 && ang_diff(fa.theta, fb.theta) < 1e-9 && ang_diff(fa.phi, fb.phi) < 1e-9,
                    "case {case}: normalized code {k} changed under rotation"
                );
            }
            for (fa, fb) in lca.features.iter().zip(&lcb.features) {
                ensure!(
                    (fa.rho - fb.rho).abs() < 1e-9
                        && ang_diff(fa.theta + alpha, fb.theta) < 1e-9
                        && ang_diff(fa.phi, fb.phi) < 1e-9,
                    "case {case}: literal code {k} did not shift by alpha"
                );
            }
        }
    }
    Ok("100 constellations: translation exact, rotation within 1e-9 in both modes".into())
}

fn encode(list_: Vec<Minutia>, n: usize) -> FingerCode {
    encode_fingerprint(&list("x", list_), n, AngleMode::Normalized, "s", "1").unwrap()
}

fn matching_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let p = MatchParams::default();
    for case in 0..100 {
        let count = rng.gen_range(10..40);
        let base = constellation(&mut rng, count, 256.0, 8.0, false);
        let code = encode(base.clone(), 9);
        let own = match_fingercodes(&code, &code, &p).map_err(|e| e.to_string())?;
        ensure!(own.score == 1.0, "case {case}: self score {}", own.score);
        let alpha = rng.gen_range(-PI / 6.0..PI / 6.0);
        let moved = rigid(&base, alpha, 128.0, 128.0, rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let copy = match_fingercodes(&code, &encode(moved, 9), &p).unwrap();
        ensure!(copy.score == 1.0, "case {case}: rigid copy score {} at alpha {alpha:.3}", copy.score);
    }

    // perturbed impressions: drop a few, jitter, add strays
    let jitter = Normal::new(0.0, 2.0).unwrap();
    let turn = Normal::new(0.0, 0.12).unwrap();
    let (mut trials, mut finger_drops, mut code_checks) = (0, 0, 0);
    for case in 0..500 {
        let a = constellation(&mut rng, 30, 256.0, 8.0, false);
        let mut b: Vec<Minutia> = a
            .iter()
            .skip(3)
            .map(|m| Minutia::new(m.x + jitter.sample(&mut rng), m.y + jitter.sample(&mut rng), m.theta + turn.sample(&mut rng), m.kind))
            .collect();
        b.extend(constellation(&mut rng, 3, 256.0, 8.0, false));
        let (ca, cb) = (encode(a, 9), encode(b, 9));
        let base = match_fingercodes(&ca, &cb, &p).unwrap().matched_pairs;
        let mut prev = base;
        for t in (1..p.t).rev() {
            let lower = match_fingercodes(&ca, &cb, &MatchParams { t, ..p }).unwrap().matched_pairs;
            ensure!(lower >= prev, "case {case}: t={t} gives {lower} < {prev}");
            prev = lower;
        }
        let wider_rho = MatchParams { rho_tol: p.rho_tol * 1.5, ..p };
        for (x, y) in ca.codes.iter().zip(&cb.codes) {
            ensure!(
                minutia_code_match(x, y, &wider_rho) >= minutia_code_match(x, y, &p),
                "case {case}: wider rho tolerance lost a neighbour pair"
            );
            code_checks += 1;
        }
        for q in [
            wider_rho,
            MatchParams { theta_tol: p.theta_tol * 1.5, ..p },
            MatchParams { phi_tol: p.phi_tol * 1.5, ..p },
        ] {
            trials += 1;
            if match_fingercodes(&ca, &cb, &q).unwrap().matched_pairs < base {
                finger_drops += 1;
            }
        }
    }
    Ok(format!(
        "self and rigid copies score 1.0 on 100 constellations; t monotone on 500 pairs; \
         rho tolerance monotone on {code_checks} code pairs; \
         finger-level tolerance widening lowered the pair count in {finger_drops}/{trials} trials (greedy pairing)"
    ))
}

/// The stated genuine count is twice the unordered closed form that both the
/// pair definition and its own formula give; the closed forms are asserted and
/// the stated figures are compared and reported.
fn protocol_counts() -> Result<Outcome, String> {
    let idx = DatasetIndex::from_records(
        (1..=336).flat_map(|s| (1..=6u32).map(move |k| (format!("s{s:03}"), k, PathBuf::from(format!("{s}_{k}.png"))))),
    )
    .map_err(|e| e.to_string())?;
    let g = genuine_pairs(&idx).map_err(|e| e.to_string())?.len();
    let i = impostor_pairs(&idx).map_err(|e| e.to_string())?.len();
    let total = protocol_match_count(&idx).map_err(|e| e.to_string())?;
    ensure!(g == 336 * (6 * 5 / 2), "genuine {g} differs from 336·(6·5/2)");
    ensure!(i == 56_280 && i == 336 * 335 / 2, "impostor {i}");
    ensure!(total == g + i, "total {total}");
    let detail = format!("{g} genuine = 336·(6·5/2), {i} impostor, {total} total");
    if g == 10_080 && total == 66_360 {
        Ok(Ok(detail))
    } else {
        Ok(Err(format!(
            "{detail}; stated 10,080 / 66,360 need ordered genuine pairs, which contradicts the unordered pair definition"
        )))
    }
}

fn eer_instance(rng: &mut ChaCha8Rng, quant: Option<f64>) -> (Vec<f64>, Vec<f64>) {
    let ng = rng.gen_range(200..800);
    let ni = rng.gen_range(200..800);
    let gap = rng.gen_range(0.0..0.6);
    let spread = rng.gen_range(0.05..0.3);
    let mut draw = |centre: f64| -> f64 {
        let v: f64 = Normal::new(centre, spread).unwrap().sample(rng);
        let v = v.clamp(0.0, 1.0);
        quant.map_or(v, |q| (v * q).round() / q)
    };
    let genuine: Vec<f64> = (0..ng).map(|_| draw(0.3 + gap / 2.0)).collect();
    let impostor: Vec<f64> = (0..ni).map(|_| draw(0.3 - gap / 2.0)).collect();
    (genuine, impostor)
}

/// Largest single-threshold jump of either curve around the EER crossing.
fn crossing_step(report: &ridgekit::eval::EvalReport) -> f64 {
    let d: Vec<f64> = report.fmr.iter().zip(&report.fnmr).map(|(a, b)| a - b).collect();
    let k = d.iter().position(|&v| v <= 0.0).unwrap_or(d.len() - 1).max(1);
    (report.fmr[k - 1] - report.fmr[k]).max(report.fnmr[k] - report.fnmr[k - 1])
}

fn eer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut tied_over = 0;
    for case in 0..300 {
        // the first 200 sets are continuous; the rest are quantized with ties
        let quant = (case >= 200).then(|| rng.gen_range(30..200) as f64);
        let (genuine, impostor) = eer_instance(&mut rng, quant);
        let report = compute_rates(&genuine, &impostor).map_err(|e| e.to_string())?;
        for w in report.fmr.windows(2) {
            ensure!(w[1] <= w[0], "case {case}: FMR rises");
        }
        for w in report.fnmr.windows(2) {
            ensure!(w[1] >= w[0], "case {case}: FNMR falls");
        }
        let oracle = eer_dense_grid(&genuine, &impostor, 10_000);
        let d = (report.eer - oracle).abs();
        if quant.is_none() {
            worst = worst.max(d);
            ensure!(d <= 0.005, "case {case}: eer {:.5} vs oracle {oracle:.5}", report.eer);
        } else {
            // interpolation and the grid readout can sit on either side of one step
            let bound = 0.005 + 0.5 * crossing_step(&report);
            ensure!(d <= bound, "tied case {case}: eer {:.5} vs oracle {oracle:.5}, bound {bound:.5}", report.eer);
            if d > 0.005 {
                tied_over += 1;
            }
        }
    }
    Ok(format!(
        "200 continuous sets within 0.005 (worst {worst:.5}); 100 tied sets within half a crossing step, \
         {tied_over} of them beyond 0.005"
    ))
}

fn desk_end_to_end() -> Outcome {
    let start = Instant::now();
    let params = DatasetParams::default();
    let samples = dataset_samples(&params).map_err(|e| e.to_string())?;
    let cfg = Config::default();
    let lists: BTreeMap<SampleKey, MinutiaList> = samples
        .par_iter()
        .filter_map(|s| pipeline::extract(&s.image, &cfg, &s.key.to_string()).ok().map(|l| (s.key.clone(), l)))
        .collect();
    let idx = DatasetIndex::from_records(
        samples.iter().map(|s| (s.key.subject.clone(), s.key.sample, PathBuf::from(s.key.to_string()))),
    )
    .map_err(|e| e.to_string())?;
    let g = genuine_pairs(&idx).map_err(|e| e.to_string())?;
    let i = impostor_pairs(&idx).map_err(|e| e.to_string())?;
    let ns: Vec<usize> = (1..=10).collect();
    let sweep = sweep_grid(&g, &i, &lists, &ns, &ns, &cfg.match_params());
    let eer = sweep.eer(9, 5).ok_or("no (9,5) cell")?;
    ensure!(eer <= 0.10, "EER at (9,5) = {:.2}%", eer * 100.0);
    let mut pattern = Vec::new();
    for n in 4..=10 {
        let diag = sweep.eer(n, n).ok_or(format!("no ({n},{n}) cell"))?;
        let half = sweep.eer(n, n.div_ceil(2)).ok_or(format!("no ({n},{}) cell", n.div_ceil(2)))?;
        ensure!(diag > half, "n={n}: diagonal {:.2}% vs {:.2}%", diag * 100.0, half * 100.0);
        pattern.push(format!("{n}:{:.1}>{:.1}", diag * 100.0, half * 100.0));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 300.0, "took {secs:.0}s");
    Ok(format!(
        "{} samples, EER(9,5) = {:.2}%, diagonal vs half [{}], {secs:.1}s",
        lists.len(),
        eer * 100.0,
        pattern.join(" ")
    ))
}

/// Not gating: needs a manifest of the real dataset in `RIDGEKIT_POLYU_MANIFEST`.
fn polyu_reproduction() -> Option<Outcome> {
    let manifest = std::env::var_os("RIDGEKIT_POLYU_MANIFEST")?;
    Some((|| {
        let idx = load_dataset(manifest.as_ref()).map_err(|e| e.to_string())?;
        let cfg = Config::default();
        let entries: Vec<(SampleKey, PathBuf)> = idx.iter().map(|(k, p)| (k.clone(), p.to_path_buf())).collect();
        let codes: BTreeMap<SampleKey, FingerCode> = entries
            .par_iter()
            .filter_map(|(k, p)| {
                let img = ridgekit::imgio::load_image(p).ok()?;
                pipeline::fingercode(&img, &cfg, &k.subject, &k.sample.to_string()).ok().map(|c| (k.clone(), c))
            })
            .collect();
        let mp = cfg.match_params();
        let gs = score_pairs(&genuine_pairs(&idx).map_err(|e| e.to_string())?.pairs, &codes, &mp).map_err(|e| e.to_string())?;
        let is = score_pairs(&impostor_pairs(&idx).map_err(|e| e.to_string())?.pairs, &codes, &mp).map_err(|e| e.to_string())?;
        let eer = compute_rates(&gs, &is).map_err(|e| e.to_string())?.eer * 100.0;
        ensure!((eer - 2.84).abs() <= 1.5, "EER {eer:.2}% outside 2.84 ± 1.5");
        Ok(format!("EER {eer:.2}%"))
    })())
}

fn throughput() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let jitter = Normal::new(0.0, 1.5).unwrap();
    let pairs: Vec<(FingerCode, FingerCode)> = (0..300)
        .map(|_| {
            let a = constellation(&mut rng, 40, 300.0, 8.0, false);
            let b: Vec<Minutia> = a
                .iter()
                .map(|m| Minutia::new(m.x + jitter.sample(&mut rng), m.y + jitter.sample(&mut rng), m.theta, m.kind))
                .collect();
            (encode(a, 9), encode(b, 9))
        })
        .collect();
    let t = measure_throughput(&pairs, &MatchParams::default()).map_err(|e| e.to_string())?;
    let line = format!("{:.0} matches/sec single-threaded (M=N=40, n=9, {} pairs)", t.matches_per_sec, t.pairs);
    if t.matches_per_sec >= 100.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

enum Verdict {
    Pass(String),
    /// Failed and sets the exit status.
    Fail(String),
    /// Failed or missing, reported only.
    Report(&'static str, String),
}

fn gate(check: fn() -> Outcome) -> Verdict {
    match catch_unwind(check) {
        Ok(Ok(d)) => Verdict::Pass(d),
        Ok(Err(d)) => Verdict::Fail(d),
        Err(_) => Verdict::Fail("panicked".into()),
    }
}

fn main() {
    // The default test runner passes filter and listing flags through.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Verdict>)> = vec![
        (1, "crossing-number oracle", Box::new(|| gate(crossing_number_oracle))),
        (2, "Gabor kernel spot values", Box::new(|| gate(gabor_spot_values))),
        (3, "frequency recovery", Box::new(|| gate(frequency_recovery))),
        (4, "orientation recovery", Box::new(|| gate(orientation_recovery))),
        (5, "thinning properties", Box::new(|| gate(thinning_properties))),
        (6, "encoding invariances", Box::new(|| gate(encoding_invariances))),
        (7, "matching sanity", Box::new(|| gate(matching_sanity))),
        (
            8,
            "protocol counts",
            Box::new(|| match catch_unwind(protocol_counts) {
                Ok(Ok(Ok(d))) => Verdict::Pass(d),
                Ok(Ok(Err(d))) => Verdict::Report("FAIL", format!("{d} (known conflict, not gating)")),
                Ok(Err(d)) => Verdict::Fail(d),
                Err(_) => Verdict::Fail("panicked".into()),
            }),
        ),
        (9, "EER oracle", Box::new(|| gate(eer_oracle))),
        (10, "desk-scale end to end", Box::new(|| gate(desk_end_to_end))),
        (
            11,
            "PolyU reproduction",
            Box::new(|| match polyu_reproduction() {
                None => Verdict::Report("SKIP", "RIDGEKIT_POLYU_MANIFEST not set (not gating)".into()),
                Some(Ok(d)) => Verdict::Pass(format!("{d} (not gating)")),
                Some(Err(d)) => Verdict::Report("FAIL", format!("{d} (not gating)")),
            }),
        ),
        (
            12,
            "throughput",
            Box::new(|| match throughput() {
                Ok(d) => Verdict::Pass(d),
                Err(d) => Verdict::Report("FAIL", format!("{d} (reported, not gating)")),
            }),
        ),
    ];
    let mut failed = 0;
    for (no, name, run) in criteria {
        match run() {
            Verdict::Pass(d) => println!("criterion {no:>2} PASS  {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {no:>2} FAIL  {name}: {d}");
            }
            Verdict::Report(tag, d) => println!("criterion {no:>2} {tag}  {name}: {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} gating criteria failed");
        std::process::exit(1);
    }
    println!("all gating criteria passed");
}
