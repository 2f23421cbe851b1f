//! Command-line driver: detect / train / eval / compare / synth.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use roadseg::config::PipelineConfig;
use roadseg::eval::{batch_eval, compare_runs, EvalReport};
use roadseg::netpbm::{load_ppm, save_mask_pgm, save_ppm};
use roadseg::pipeline::{run_pipeline_with_model, train_model};
use roadseg::rainsnow::{synthesize_rain, RainSynthParams};
use roadseg::svm::SvmModel;
use roadseg::synth::{base_scene, synth_frame, DegradationKind};

#[derive(Parser)]
#[command(
    name = "roadseg",
    about = "Road/non-road pixel classification with shadow, rain/snow and highlight filters",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every pixel of a road scene and write a P5 road mask.
    Detect {
        /// Input image (binary PPM, P6).
        image: PathBuf,
        /// Pipeline configuration file (`section.key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pre-trained model file; skips per-image seed training.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Disable all three filters (same as toggling them off in the config).
        #[arg(long)]
        no_filters: bool,
        /// Directory for intermediate stage dumps.
        #[arg(long, value_name = "DIR")]
        dump_masks: Option<PathBuf>,
        /// Output mask path (P5; 255 = road).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a model on the seed regions of one image and write it out.
    Train {
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output model path.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score predicted masks against ground truth and write report files.
    Eval {
        /// Directory of predicted masks (P5).
        #[arg(long)]
        pred_dir: PathBuf,
        /// Directory of ground-truth masks (P5, 255 = road), matched by file name.
        #[arg(long)]
        gt_dir: PathBuf,
        /// Frames per averaging group.
        #[arg(long, default_value_t = 3)]
        group_size: usize,
        /// Label recorded in the report.
        #[arg(long, default_value = "run")]
        label: String,
        /// Config whose digest is recorded in the report.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base path for `<base>.report.txt` and `<base>.report.csv`.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare two CSV reports and print per-group deltas and verdicts.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long, default_value_t = 3)]
        group_size: usize,
    },
    /// Generate synthetic degraded road scenes with exact ground truth.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        /// Corpus seed; the same seed reproduces identical files.
        #[arg(long)]
        seed: u64,
        /// Frames per degradation kind.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 384)]
        height: usize,
        /// Fixed exposure fraction for rain frames (default: per-frame cycle).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        streak_count: Option<usize>,
        #[arg(long)]
        streak_length: Option<usize>,
        #[arg(long)]
        streak_width: Option<usize>,
        #[arg(long)]
        streak_angle: Option<f64>,
        #[arg(long)]
        streak_intensity: Option<u8>,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    Shadow,
    Rain,
    Specular,
    All,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            PipelineConfig::parse(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn load_image(path: &Path) -> Result<roadseg::RgbRaster> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_ppm(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect {
            image,
            config,
            model,
            no_filters,
            dump_masks,
            output,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if no_filters {
                cfg = cfg.without_filters();
            }
            let img = load_image(&image)?;
            let model = match model {
                None => None,
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading model {}", p.display()))?;
                    Some(SvmModel::from_text(&text)
                        .with_context(|| format!("parsing model {}", p.display()))?)
                }
            };
            let run = run_pipeline_with_model(&img, &cfg, model).context("pipeline")?;
            write_file(&output, &save_mask_pgm(&run.road_mask))?;
            if let Some(dir) = dump_masks {
                let stem = image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "image".to_string());
                let inter = &run.intermediates;
                let mut dumps: Vec<(String, Vec<u8>)> = vec![
                    (format!("{stem}.svm.pgm"), save_mask_pgm(&inter.svm_mask)),
                    (format!("{stem}.filtered.ppm"), save_ppm(&inter.filtered)),
                    (format!("{stem}.road.pgm"), save_mask_pgm(&run.road_mask)),
                ];
                if let Some(m) = &inter.shadow_mask {
                    dumps.push((format!("{stem}.shadow.pgm"), save_mask_pgm(m)));
                }
                if let Some(i) = &inter.post_shadow {
                    dumps.push((format!("{stem}.post-shadow.ppm"), save_ppm(i)));
                }
                if let Some(i) = &inter.post_rainsnow {
                    dumps.push((format!("{stem}.post-rainsnow.ppm"), save_ppm(i)));
                }
                if let Some(m) = &inter.highlight_mask {
                    dumps.push((format!("{stem}.highlight.pgm"), save_mask_pgm(m)));
                }
                if let Some(i) = &inter.post_specular {
                    dumps.push((format!("{stem}.post-specular.ppm"), save_ppm(i)));
                }
                for (name, bytes) in dumps {
                    write_file(&dir.join(name), &bytes)?;
                }
            }
            Ok(())
        }
        Command::Train {
            image,
            config,
            output,
        } => {
            let cfg = load_config(config.as_deref())?;
            let img = load_image(&image)?;
            let model = train_model(&img, &cfg).context("training")?;
            if !model.converged {
                eprintln!("warning: optimizer hit the sweep cap; model is the best iterate");
            }
            write_file(&output, model.to_text().as_bytes())
        }
        Command::Eval {
            pred_dir,
            gt_dir,
            group_size,
            label,
            config,
            output,
        } => {
            if group_size < 1 {
                bail!("--group-size must be at least 1");
            }
            let cfg = load_config(config.as_deref())?;
            let pairs = pair_directories(&pred_dir, &gt_dir)?;
            let report = batch_eval(&pairs, group_size, &label, &cfg.digest())?;
            let txt = output.with_file_name(format!(
                "{}.report.txt",
                output.file_name().unwrap_or_default().to_string_lossy()
            ));
            let csv = output.with_file_name(format!(
                "{}.report.csv",
                output.file_name().unwrap_or_default().to_string_lossy()
            ));
            write_file(&txt, report.to_text().as_bytes())?;
            write_file(&csv, report.to_csv().as_bytes())?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Compare {
            report_a,
            report_b,
            group_size,
        } => {
            let load = |p: &Path| -> Result<EvalReport> {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading report {}", p.display()))?;
                let label = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                Ok(EvalReport::from_csv(&text, group_size, &label, "")?)
            };
            let a = load(&report_a)?;
            let b = load(&report_b)?;
            let summary = compare_runs(&a, &b)?;
            print!("{}", summary.to_text());
            Ok(())
        }
        Command::Synth {
            kind,
            seed,
            count,
            width,
            height,
            alpha,
            streak_count,
            streak_length,
            streak_width,
            streak_angle,
            streak_intensity,
            output,
        } => {
            let kinds: &[DegradationKind] = match kind {
                SynthKind::Shadow => &[DegradationKind::Shadow],
                SynthKind::Rain => &[DegradationKind::Rain],
                SynthKind::Specular => &[DegradationKind::Specular],
                SynthKind::All => &[
                    DegradationKind::Shadow,
                    DegradationKind::Rain,
                    DegradationKind::Specular,
                ],
            };
            let rain_overridden = alpha.is_some()
                || streak_count.is_some()
                || streak_length.is_some()
                || streak_width.is_some()
                || streak_angle.is_some()
                || streak_intensity.is_some();
            for &k in kinds {
                for index in 0..count {
                    let frame = if k == DegradationKind::Rain && rain_overridden {
                        custom_rain_frame(
                            index,
                            seed,
                            width,
                            height,
                            alpha,
                            streak_count,
                            streak_length,
                            streak_width,
                            streak_angle,
                            streak_intensity,
                        )?
                    } else {
                        let f = synth_frame(k, index, seed, width, height);
                        (f.name, f.degraded, f.clean, f.degradation_mask, f.gt_road)
                    };
                    let (name, degraded, clean, mask, gt) = frame;
                    let degraded_suffix = match k {
                        DegradationKind::Shadow => "shadowed",
                        DegradationKind::Rain => "rained",
                        DegradationKind::Specular => "highlighted",
                    };
                    let mask_suffix = match k {
                        DegradationKind::Shadow => "shadow",
                        DegradationKind::Rain => "streaks",
                        DegradationKind::Specular => "highlight",
                    };
                    write_file(
                        &output.join(format!("{name}.{degraded_suffix}.ppm")),
                        &save_ppm(&degraded),
                    )?;
                    write_file(&output.join(format!("{name}.clean.ppm")), &save_ppm(&clean))?;
                    write_file(
                        &output.join(format!("{name}.{mask_suffix}.pgm")),
                        &save_mask_pgm(&mask),
                    )?;
                    write_file(&output.join(format!("{name}.gt.pgm")), &save_mask_pgm(&gt))?;
                }
            }
            Ok(())
        }
    }
}

type FrameParts = (
    String,
    roadseg::RgbRaster,
    roadseg::RgbRaster,
    roadseg::BinaryMask,
    roadseg::BinaryMask,
);

#[allow(clippy::too_many_arguments)]
fn custom_rain_frame(
    index: usize,
    seed: u64,
    width: usize,
    height: usize,
    alpha: Option<f64>,
    streak_count: Option<usize>,
    streak_length: Option<usize>,
    streak_width: Option<usize>,
    streak_angle: Option<f64>,
    streak_intensity: Option<u8>,
) -> Result<FrameParts> {
    let alpha = alpha.unwrap_or(0.7);
    if !(0.0..=1.0).contains(&alpha) {
        bail!("--alpha must lie in [0,1]");
    }
    let frame_seed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(2 * 1024 + index as u64);
    let (clean, gt) = base_scene(width, height, frame_seed);
    let params = RainSynthParams {
        alpha,
        streak_intensity: streak_intensity.unwrap_or(255),
        count: streak_count.unwrap_or(1100),
        length: streak_length.unwrap_or(44),
        angle_deg: streak_angle.unwrap_or(8.0),
        width: streak_width.unwrap_or(2),
        rng_seed: frame_seed,
    };
    let (degraded, mask) = synthesize_rain(&clean, &params);
    Ok((format!("rain_{index:02}"), degraded, clean, mask, gt))
}

fn pair_directories(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let list = |dir: &Path| -> Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".pgm") {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    };
    let preds = list(pred_dir)?;
    let gts = list(gt_dir)?;
    if preds.is_empty() {
        bail!("no .pgm masks in {}", pred_dir.display());
    }
    for name in &preds {
        if !gts.contains(name) {
            bail!("no ground truth for `{name}` in {}", gt_dir.display());
        }
    }
    for name in &gts {
        if !preds.contains(name) {
            bail!("no prediction for `{name}` in {}", pred_dir.display());
        }
    }
    Ok(preds
        .into_iter()
        .map(|n| (pred_dir.join(&n), gt_dir.join(&n)))
        .collect())
}
