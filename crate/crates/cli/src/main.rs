use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use ridgekit::encode::{encode_fingerprint, read_fingercode, write_fingercode, AngleMode, FingerCode};
use ridgekit::eval::{compute_rates, genuine_pairs, impostor_pairs, score_pairs, sweep_grid};
use ridgekit::imgio::{load_dataset, load_image, write_pgm, SampleKey};
use ridgekit::matching::{match_gallery, report_line};
use ridgekit::minutiae::{MinutiaList, MINUTIAE_HEADER};
use ridgekit::pipeline::{fingercode, run_stages};
use ridgekit::ridgefield::frequency_or_zero;
use ridgekit::synth::{generate, write_dataset, DatasetParams, SynthSpec};
use ridgekit::{Config, Error};

mod gallery;

use gallery::{Gallery, GalleryEntry};

#[derive(Parser, Debug)]
#[command(name = "ridgekit", version, about = "Contactless fingerprint enhancement, encoding and matching")]
struct Cli {
    #[command(flatten)]
    knobs: Knobs,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Knobs {
    /// Flat key=value config file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    block_size: Option<usize>,
    #[arg(long, global = true)]
    neighbors: Option<usize>,
    #[arg(long, global = true)]
    matched_threshold: Option<usize>,
    #[arg(long, global = true)]
    rho_tol: Option<f64>,
    #[arg(long, global = true)]
    theta_tol: Option<f64>,
    #[arg(long, global = true)]
    phi_tol: Option<f64>,
    #[arg(long, global = true)]
    mode: Option<AngleMode>,
    #[arg(long, global = true)]
    passes: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write enhanced, binary and skeleton images plus orientation and frequency grids.
    Enhance {
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect minutiae and write them as text.
    Extract {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode an image or a minutiae file into a finger-code.
    Encode {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "probe")]
        subject: String,
        #[arg(long, default_value = "1")]
        sample: String,
    },
    /// Encode every image of a manifest into a gallery directory.
    Enroll {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank gallery entries against a probe image.
    Identify {
        probe: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Genuine/impostor protocol over a manifest; writes the FMR/FNMR report.
    Evaluate {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// EER over a grid of neighbour counts n and matched thresholds t.
    Sweep {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inclusive range LO..HI.
        #[arg(long, default_value = "1..10")]
        n_range: String,
        #[arg(long, default_value = "1..10")]
        t_range: String,
    },
    /// Render synthetic fingerprints: one spec file, or a whole dataset.
    Synth {
        /// key=value spec; omit to generate a dataset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        fingers: usize,
        #[arg(long, default_value_t = 4)]
        impressions: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_pipeline_failure() => 3,
            Failure::Core(Error::Config(_) | Error::InvalidParameter(_)) => 1,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            warn!("could not size thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ridgekit: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn build_config(k: &Knobs) -> CliResult<Config> {
    let mut cfg = match &k.config {
        Some(p) => {
            require_file(p)?;
            Config::load(p)?
        }
        None => Config::default(),
    };
    let set = |cfg: &mut Config, key: &str, v: Option<String>| -> CliResult<()> {
        if let Some(v) = v {
            cfg.set(key, &v)?;
        }
        Ok(())
    };
    set(&mut cfg, "block_size", k.block_size.map(|v| v.to_string()))?;
    set(&mut cfg, "neighbors", k.neighbors.map(|v| v.to_string()))?;
    set(&mut cfg, "matched_threshold", k.matched_threshold.map(|v| v.to_string()))?;
    set(&mut cfg, "rho_tol", k.rho_tol.map(|v| v.to_string()))?;
    set(&mut cfg, "theta_tol", k.theta_tol.map(|v| v.to_string()))?;
    set(&mut cfg, "phi_tol", k.phi_tol.map(|v| v.to_string()))?;
    set(&mut cfg, "mode", k.mode.map(|v| v.to_string()))?;
    set(&mut cfg, "passes", k.passes.map(|v| v.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("no such file: {}", p.display())))
    }
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Failure::Core(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| {
        Failure::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn parse_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || Failure::Usage(format!("bad range {s:?}, expected LO..HI"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = build_config(&cli.knobs)?;
    let header = cfg.header_comments();
    match cli.command {
        Command::Enhance { input, out } => {
            require_file(&input)?;
            let img = load_image(&input)?;
            let id = stem(&input);
            let st = run_stages(&img, &cfg, &id)?;
            create_dir(&out)?;
            let fp = format!("config={}", cfg.fingerprint());
            write_pgm(&st.enhanced, &out.join(format!("{id}.enhanced.pgm")), &header)?;
            write_pgm(&st.binary.to_gray(), &out.join(format!("{id}.binary.pgm")), &header)?;
            write_pgm(&st.skeleton.as_binary().to_gray(), &out.join(format!("{id}.skeleton.pgm")), &header)?;
            st.orientation
                .write_text(&out.join(format!("{id}.orientation.txt")), "orientation", Some(&fp))?;
            frequency_or_zero(&st.frequency).write_text(&out.join(format!("{id}.frequency.txt")), "frequency", Some(&fp))?;
            println!("{}: {} minutiae, artifacts in {}", id, st.minutiae.len(), out.display());
        }
        Command::Extract { input, out } => {
            require_file(&input)?;
            let img = load_image(&input)?;
            let list = run_stages(&img, &cfg, &stem(&input))?.minutiae;
            list.write(&out, &header)?;
            println!("{} minutiae -> {}", list.len(), out.display());
        }
        Command::Encode {
            input,
            out,
            subject,
            sample,
        } => {
            require_file(&input)?;
            let code = encode_input(&input, &cfg, &subject, &sample)?;
            write_fingercode(&code, &out, &header)?;
            println!("{} minutia codes -> {}", code.len(), out.display());
        }
        Command::Enroll { manifest, out } => enroll(&manifest, &out, &cfg)?,
        Command::Identify { probe, gallery, top_k } => identify(&probe, &gallery, top_k, &cfg)?,
        Command::Evaluate { manifest, out } => evaluate(&manifest, &out, &cfg)?,
        Command::Sweep {
            manifest,
            out,
            n_range,
            t_range,
        } => {
            let ns = parse_range(&n_range)?;
            let ts = parse_range(&t_range)?;
            require_file(&manifest)?;
            let idx = load_dataset(&manifest)?;
            let lists = extract_all(&idx, &cfg);
            let g = genuine_pairs(&idx)?;
            let i = impostor_pairs(&idx)?;
            let grid = sweep_grid(&g, &i, &lists, &ns, &ts, &cfg.match_params());
            for (ti, row) in grid.cells.iter().enumerate() {
                for (ni, cell) in row.iter().enumerate() {
                    if let Some(Err(e)) = cell {
                        warn!("cell n={} t={}: {e}", grid.n_values[ni], grid.t_values[ti]);
                    }
                }
            }
            write_text(&out, &grid.to_csv(&header))?;
            println!(
                "{}x{} sweep over {} matches per cell -> {}",
                ts.len(),
                ns.len(),
                g.len() + i.len(),
                out.display()
            );
        }
        Command::Synth {
            spec,
            out,
            fingers,
            impressions,
            seed,
            noise,
        } => {
            create_dir(&out)?;
            match spec {
                Some(spec_path) => {
                    require_file(&spec_path)?;
                    let mut spec = SynthSpec::load(&spec_path)?;
                    if let Some(s) = seed {
                        spec.seed = s;
                    }
                    if let Some(n) = noise {
                        spec.noise = n;
                    }
                    let (img, truth) = generate(&spec)?;
                    let id = stem(&spec_path);
                    let name = format!("{id}.pgm");
                    let comments = vec![format!("synth seed={}", spec.seed)];
                    write_pgm(&img, &out.join(&name), &comments)?;
                    truth.write(&out.join(format!("{id}.truth.min")), &comments)?;
                    ridgekit::imgio::write_manifest(&out.join("manifest.tsv"), &[(SampleKey::new(id.clone(), 1), name)])?;
                    println!("{id}: {} planned minutiae -> {}", truth.len(), out.display());
                }
                None => {
                    let mut p = DatasetParams {
                        fingers,
                        impressions,
                        ..Default::default()
                    };
                    if let Some(s) = seed {
                        p.seed = s;
                    }
                    if let Some(n) = noise {
                        p.noise = n;
                    }
                    let comments = vec![format!("synth dataset seed={}", p.seed)];
                    let manifest = write_dataset(&out, &p, &comments)?;
                    println!("{} images -> {}", fingers * impressions, manifest.display());
                }
            }
        }
    }
    Ok(())
}

fn encode_input(input: &Path, cfg: &Config, subject: &str, sample: &str) -> CliResult<FingerCode> {
    let bytes = std::fs::read(input).map_err(|e| {
        Failure::Core(Error::Io {
            path: input.to_path_buf(),
            source: e,
        })
    })?;
    if bytes.starts_with(MINUTIAE_HEADER.as_bytes()) {
        let list = MinutiaList::read(input)?;
        return Ok(encode_fingerprint(&list, cfg.neighbors, cfg.mode, subject, sample)?);
    }
    let img = ridgekit::imgio::decode_image(&bytes)?;
    Ok(fingercode(&img, cfg, subject, sample)?)
}

/// Minutiae for every manifest image; failures are logged and left out.
fn extract_all(idx: &ridgekit::imgio::DatasetIndex, cfg: &Config) -> BTreeMap<SampleKey, MinutiaList> {
    let entries: Vec<(SampleKey, PathBuf)> = idx.iter().map(|(k, p)| (k.clone(), p.to_path_buf())).collect();
    entries
        .par_iter()
        .filter_map(|(key, path)| {
            let res = load_image(path).and_then(|img| run_stages(&img, cfg, &key.to_string()));
            match res {
                Ok(st) => Some((key.clone(), st.minutiae)),
                Err(e) => {
                    warn!("{key}: {e}");
                    None
                }
            }
        })
        .collect()
}

fn enroll(manifest: &Path, out: &Path, cfg: &Config) -> CliResult<()> {
    require_file(manifest)?;
    let idx = load_dataset(manifest)?;
    create_dir(out)?;
    let entries: Vec<(SampleKey, PathBuf)> = idx.iter().map(|(k, p)| (k.clone(), p.to_path_buf())).collect();
    let results: Vec<(SampleKey, ridgekit::Result<FingerCode>)> = entries
        .par_iter()
        .map(|(key, path)| {
            let code = load_image(path).and_then(|img| fingercode(&img, cfg, &key.subject, &key.sample.to_string()));
            (key.clone(), code)
        })
        .collect();
    let header = cfg.header_comments();
    let mut gallery = Gallery::new(cfg.fingerprint());
    for (key, res) in results {
        match res {
            Ok(code) => {
                let file = format!("{key}.code");
                write_fingercode(&code, &out.join(&file), &header)?;
                gallery.entries.push(GalleryEntry::present(key, file));
            }
            Err(e) => {
                warn!("{key}: {e}");
                gallery.entries.push(GalleryEntry::absent(key, e.to_string()));
            }
        }
    }
    gallery.write(out)?;
    let present = gallery.present().count();
    println!("enrolled {present} of {} images -> {}", gallery.entries.len(), out.display());
    if present == 0 {
        return Err(Failure::Core(Error::Dataset("every image failed to enroll".into())));
    }
    Ok(())
}

fn identify(probe: &Path, dir: &Path, top_k: usize, cfg: &Config) -> CliResult<()> {
    require_file(probe)?;
    let gallery = Gallery::read(dir)?;
    if gallery.config_fingerprint != cfg.fingerprint() {
        return Err(Failure::Core(Error::Dataset(format!(
            "gallery was enrolled with config {} but the current config is {}",
            gallery.config_fingerprint,
            cfg.fingerprint()
        ))));
    }
    let codes: Vec<(SampleKey, FingerCode)> = gallery
        .present()
        .map(|(k, f)| read_fingercode(&dir.join(f)).map(|c| (k.clone(), c)))
        .collect::<ridgekit::Result<_>>()?;
    if codes.is_empty() {
        return Err(Failure::Core(Error::Dataset("gallery has no enrolled codes".into())));
    }
    let probe_code = encode_input(probe, cfg, "probe", "1")?;
    let refs: Vec<&FingerCode> = codes.iter().map(|(_, c)| c).collect();
    let results = match_gallery(&probe_code, &refs, &cfg.match_params());
    let mut ranked = Vec::with_capacity(codes.len());
    for ((key, _), r) in codes.iter().zip(results) {
        ranked.push((key, r?));
    }
    ranked.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then_with(|| a.0.cmp(b.0)));
    println!("# config={}", cfg.fingerprint());
    for (rank, (key, r)) in ranked.iter().take(top_k).enumerate() {
        println!("{}\t{}", rank + 1, report_line(&stem(probe), &key.to_string(), r));
    }
    Ok(())
}

fn evaluate(manifest: &Path, out: &Path, cfg: &Config) -> CliResult<()> {
    require_file(manifest)?;
    let idx = load_dataset(manifest)?;
    let lists = extract_all(&idx, cfg);
    let codes: BTreeMap<SampleKey, FingerCode> = lists
        .iter()
        .filter_map(|(k, l)| match encode_fingerprint(l, cfg.neighbors, cfg.mode, &k.subject, &k.sample.to_string()) {
            Ok(c) => Some((k.clone(), c)),
            Err(e) => {
                warn!("{k}: {e}");
                None
            }
        })
        .collect();
    let g = genuine_pairs(&idx)?;
    let i = impostor_pairs(&idx)?;
    let p = cfg.match_params();
    let gs = score_pairs(&g.pairs, &codes, &p)?;
    let is = score_pairs(&i.pairs, &codes, &p)?;
    info!("{} genuine + {} impostor = {} matches", g.len(), i.len(), g.len() + i.len());
    let report = compute_rates(&gs, &is)?;
    let mut comments = cfg.header_comments();
    comments.push(format!("genuine={} impostor={} matches={}", g.len(), i.len(), g.len() + i.len()));
    comments.push(format!("failed_samples={}", idx.len() - codes.len()));
    write_text(out, &report.to_csv(&comments))?;
    println!(
        "genuine={} impostor={} matches={} eer={:.4}% threshold={:.6}",
        g.len(),
        i.len(),
        g.len() + i.len(),
        report.eer * 100.0,
        report.eer_threshold
    );
    Ok(())
}
