//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit status.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classmap::{kmeans_segment, method_c, ClassMapOptions};
use crate::degrade::{
    apply_gap, make_gap_mask, synth_older, GapSpec, OlderSpec, Orientation, RrmKind,
};
use crate::error::{Error, Result};
use crate::fourier::{calibrate_columns, method_a, CutoffSpec};
use crate::harness::{self, ExperimentConfig};
use crate::io::{read_classmap, read_mask, read_raster, write_classmap, write_mask, write_raster};
use crate::metrics::{align_labels, confusion, kappa, overall_accuracy, q_index, rmse, EvalRegion};
use crate::raster::{expand_lowres, GapMask};
use crate::regression::{apply_field, fit_field};

#[derive(Debug, Parser)]
#[command(
    name = "gapfill",
    version,
    about = "Fill strip gaps in multi-band rasters using lower-resolution companions"
)]
struct Cli {
    /// Print progress and warnings to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a damaged image, older image and low-resolution companions from a ground truth.
    Degrade(DegradeArgs),
    /// Fill the gap of a damaged image.
    Impute(ImputeArgs),
    /// K-means class map of an image.
    Segment(SegmentArgs),
    /// Score an imputed image against the ground truth.
    Evaluate(EvaluateArgs),
    /// Build the synthetic dataset and run the full factorial experiment.
    Experiment(ExperimentArgs),
    /// Recompute summary tables from a results CSV.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
struct DegradeArgs {
    /// Ground-truth BRAW raster.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving damaged.braw, mask.braw, older.braw and z{0,1,2}.braw.
    #[arg(long)]
    output_dir: PathBuf,
    /// Target fraction of missing pixels.
    #[arg(long, default_value_t = 0.26)]
    gap_fraction: f64,
    /// Maximum strip width in pixels.
    #[arg(long, default_value_t = 14)]
    strip_width: usize,
    /// Distance between strip starts in pixels.
    #[arg(long, default_value_t = 54)]
    period: usize,
    /// Strip orientation: horizontal or vertical.
    #[arg(long, default_value = "horizontal")]
    orientation: Orientation,
    /// Resolution ratio of the low-resolution companions.
    #[arg(long, default_value_t = 5)]
    nz: usize,
    /// Row shift of the misregistered companion (RRM2).
    #[arg(long, default_value_t = 3)]
    shift_rows: usize,
    /// Column shift of the misregistered companion (RRM2).
    #[arg(long, default_value_t = 2)]
    shift_cols: usize,
    /// Seed of the older-image noise and patches.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Older image gain.
    #[arg(long, default_value_t = 0.9)]
    older_gain: f64,
    /// Older image bias in gray levels.
    #[arg(long, default_value_t = 12.0)]
    older_bias: f64,
    /// Older image noise standard deviation in gray levels.
    #[arg(long, default_value_t = 4.0)]
    older_noise: f64,
    /// Fraction of the older image re-shaded by random patches.
    #[arg(long, default_value_t = 0.25)]
    older_patch_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Fourier fusion with the cutoff given by --cutoff.
    A,
    /// Fourier fusion, cutoff 0.2.
    A1,
    /// Fourier fusion, cutoff 0.5.
    A2,
    /// Fourier fusion, cutoff 0.8.
    A3,
    /// Per-offset regression on the low-resolution image.
    B,
    /// Class map with enhancement.
    C,
    /// Class map without enhancement.
    C1,
}

#[derive(Debug, Args)]
struct ImputeArgs {
    /// Imputation method.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Damaged BRAW raster.
    #[arg(long)]
    damaged: PathBuf,
    /// Gap mask (1-band BRAW, nonzero = missing).
    #[arg(long)]
    mask: PathBuf,
    /// Low-resolution BRAW companion, one pixel per nz x nz block.
    #[arg(long)]
    lowres: PathBuf,
    /// Older full-resolution BRAW image (methods a, a1, a2, a3).
    #[arg(long)]
    older: Option<PathBuf>,
    /// Output BRAW raster.
    #[arg(long)]
    output: PathBuf,
    /// Cutoff fraction in (0, 1] for method a.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Resolution ratio between the damaged and low-resolution images.
    #[arg(long, default_value_t = 5)]
    nz: usize,
    /// Number of classes (methods c, c1).
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Random seed (methods c, c1).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial donor window radius (methods c, c1).
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Write the fitted regression field as CSV (method b).
    #[arg(long)]
    field_csv: Option<PathBuf>,
    /// Write the filled class map as BRAW (methods c, c1).
    #[arg(long)]
    classes_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Input BRAW raster.
    #[arg(long)]
    input: PathBuf,
    /// Optional gap mask; masked pixels get label 0.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output class map (1-band BRAW).
    #[arg(long)]
    output: PathBuf,
    /// Number of classes.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Ground-truth BRAW raster.
    #[arg(long)]
    truth: PathBuf,
    /// Imputed BRAW raster.
    #[arg(long)]
    imputed: PathBuf,
    /// Gap mask; required for --region gap.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Pixels scored: gap or full.
    #[arg(long, default_value = "gap")]
    region: EvalRegion,
    /// Side of the Q index windows.
    #[arg(long, default_value_t = 8)]
    q_window: usize,
    /// Number of classes for the class maps compared by OA and kappa.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed of the ground-truth segmentation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Predicted class map; when given with --truth-classes, replaces segmentation.
    #[arg(long, requires = "truth_classes")]
    pred_classes: Option<PathBuf>,
    /// Ground-truth class map used with --pred-classes.
    #[arg(long, requires = "pred_classes")]
    truth_classes: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the dataset, results and summaries.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Number of synthetic scenes.
    #[arg(long)]
    images: Option<usize>,
    /// Sub-images per scene (a perfect square).
    #[arg(long)]
    subimages: Option<usize>,
    /// Sub-image side in pixels.
    #[arg(long)]
    subimage_size: Option<usize>,
    /// Resolution ratio.
    #[arg(long)]
    nz: Option<usize>,
    /// Comma-separated methods among A1, A2, A3, B, C, C1.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated RRMs among 0, 1, 2.
    #[arg(long, value_delimiter = ',')]
    rrms: Option<Vec<u8>>,
    /// Number of classes.
    #[arg(long)]
    k: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation region: gap or full.
    #[arg(long)]
    region: Option<String>,
    /// Q index window side.
    #[arg(long)]
    q_window: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// Results CSV written by `experiment`.
    #[arg(long)]
    results: PathBuf,
    /// Directory receiving the summary CSVs.
    #[arg(long)]
    output_dir: PathBuf,
}

/// Parses `args` (program name first) and runs the subcommand.
/// Returns 0 on success, 1 on failure and 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Degrade(a) => degrade(a),
        Command::Impute(a) => impute(a),
        Command::Segment(a) => segment(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
        Command::Summarize(a) => {
            for path in harness::summarize_file(&a.results, &a.output_dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn degrade(a: DegradeArgs) -> Result<()> {
    let truth = read_raster(&a.input)?;
    let spec = GapSpec {
        strip_width: a.strip_width,
        period: a.period,
        orientation: a.orientation,
        target_fraction: a.gap_fraction,
    };
    let mask = make_gap_mask(&spec, truth.width(), truth.height())?;
    let older_spec = OlderSpec {
        gain: a.older_gain,
        bias: a.older_bias,
        noise_sigma: a.older_noise,
        patch_rate: a.older_patch_rate,
    };
    std::fs::create_dir_all(&a.output_dir)?;
    let out = |name: &str| a.output_dir.join(name);
    write_raster(&apply_gap(&truth, &mask, 0)?, out("damaged.braw"))?;
    write_mask(&mask, out("mask.braw"))?;
    write_raster(
        &synth_older(&truth, a.seed, &older_spec)?,
        out("older.braw"),
    )?;
    let rrms = [
        RrmKind::BlockAverage,
        RrmKind::SmoothResample,
        RrmKind::ShiftedAverage {
            rows: a.shift_rows,
            cols: a.shift_cols,
        },
    ];
    for rrm in rrms {
        write_raster(
            &rrm.reduce(&truth, a.nz)?.to_u8(),
            out(&format!("z{}.braw", rrm.id())),
        )?;
    }
    println!(
        "gap fraction {:.4}, files in {}",
        mask.gap_fraction(),
        a.output_dir.display()
    );
    Ok(())
}

fn impute(a: ImputeArgs) -> Result<()> {
    let x_d = read_raster(&a.damaged)?;
    let mask = read_mask(&a.mask)?;
    let z = read_raster(&a.lowres)?;
    let cutoff = match a.method {
        MethodArg::A => {
            Some(CutoffSpec::new(a.cutoff.ok_or_else(|| {
                Error::InvalidArgument("method a needs --cutoff".into())
            })?)?)
        }
        MethodArg::A1 => Some(CutoffSpec::A1),
        MethodArg::A2 => Some(CutoffSpec::A2),
        MethodArg::A3 => Some(CutoffSpec::A3),
        _ => None,
    };
    let filled = match a.method {
        MethodArg::B => {
            let field = fit_field(&x_d, &mask, &z, a.nz)?;
            if let Some(path) = &a.field_csv {
                field.write_csv(BufWriter::new(File::create(path)?))?;
            }
            if mask.is_empty() {
                x_d.clone()
            } else {
                apply_field(&x_d, &mask, &z, &field)?
            }
        }
        MethodArg::C | MethodArg::C1 => {
            let opts = ClassMapOptions {
                k: a.k,
                seed: a.seed,
                enhance: a.method == MethodArg::C,
                window: a.window,
            };
            let result = method_c(&x_d, &mask, &expand_lowres(&z, a.nz)?, &opts)?;
            if let Some(path) = &a.classes_out {
                write_classmap(&result.classes, path)?;
            }
            result.raster
        }
        _ => {
            let older_path = a
                .older
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("Fourier methods need --older".into()))?;
            let older = calibrate_columns(&read_raster(older_path)?, &x_d, &mask)?;
            let cutoff = cutoff.expect("Fourier method has a cutoff");
            method_a(&x_d, &mask, &expand_lowres(&z, a.nz)?, &older, cutoff)?
        }
    };
    write_raster(&filled, &a.output)?;
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let x = read_raster(&a.input)?;
    let mask = match &a.mask {
        Some(p) => read_mask(p)?,
        None => GapMask::empty(x.width(), x.height()),
    };
    let model = kmeans_segment(&x, &mask, a.k, a.seed)?;
    write_classmap(&model.assignments, &a.output)?;
    println!("{} iterations", model.iterations_run);
    for (i, c) in model.centroids.iter().enumerate() {
        let coords: Vec<String> = c.iter().map(|v| format!("{v:.3}")).collect();
        println!("class {}: {}", i + 1, coords.join(" "));
    }
    Ok(())
}

fn fmt_opt(r: Result<f64>) -> String {
    r.map_or_else(|_| "NA".to_string(), |v| v.to_string())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = read_raster(&a.truth)?;
    let imputed = read_raster(&a.imputed)?;
    let mask = match (&a.mask, a.region) {
        (Some(p), _) => read_mask(p)?,
        (None, EvalRegion::Full) => GapMask::empty(truth.width(), truth.height()),
        (None, EvalRegion::Gap) => {
            return Err(Error::InvalidArgument("--region gap needs --mask".into()))
        }
    };
    let region = a.region.region(&mask);
    let (truth_classes, pred_classes) = match (&a.truth_classes, &a.pred_classes) {
        (Some(t), Some(p)) => (read_classmap(t)?, read_classmap(p)?),
        _ => {
            let full = GapMask::empty(truth.width(), truth.height());
            let model = kmeans_segment(&truth, &full, a.k, a.seed)?;
            let pred = align_labels(&model, &imputed)?;
            (model.assignments, pred)
        }
    };
    let (k, oa) = match confusion(&truth_classes, &pred_classes, region) {
        Ok(m) => (fmt_opt(kappa(&m)), fmt_opt(overall_accuracy(&m))),
        Err(_) => ("NA".to_string(), "NA".to_string()),
    };
    println!("region,rmse,q,kappa,oa");
    println!(
        "{},{},{},{k},{oa}",
        a.region,
        fmt_opt(rmse(&truth, &imputed, region)),
        fmt_opt(q_index(&truth, &imputed, a.q_window, region)),
    );
    Ok(())
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &a.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = a.images {
        cfg.images = v;
    }
    if let Some(v) = a.subimages {
        cfg.subimages_per_image = v;
    }
    if let Some(v) = a.subimage_size {
        cfg.subimage_size = v;
    }
    if let Some(v) = a.nz {
        cfg.n_z = v;
    }
    if let Some(v) = &a.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = &a.rrms {
        cfg.rrms = v.clone();
    }
    if let Some(v) = a.k {
        cfg.k_classes = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = &a.region {
        cfg.region = v.clone();
    }
    if let Some(v) = a.q_window {
        cfg.q_window = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    Ok(cfg)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(&a)?;
    cfg.validate()?;
    let out = harness::run_all(&cfg)?;
    let failed = out
        .table
        .records
        .iter()
        .filter(|r| r.rmse.is_none() || r.q.is_none() || r.kappa.is_none() || r.oa.is_none())
        .count();
    println!(
        "{} records ({failed} with missing measures)",
        out.table.records.len()
    );
    println!("{}", out.results_path.display());
    for path in &out.summary_paths {
        println!("{}", path.display());
    }
    print!("{}", out.summary.by_method.to_csv_string());
    Ok(())
}
