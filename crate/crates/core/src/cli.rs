//! The `hsi-bench` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, missing seed), 2
//! when the inputs are rejected (parse failures, validation, unreachable
//! budgets).

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::eval::{
    evaluate_split, gap_analysis, render_table, wilcoxon_signed_rank_two_tailed, Classifier, EvalReport, FeatureSet,
    GapReport, Masking, ProxySetup, ValidationSpec, WilcoxonResult,
};
use crate::io::manifest::{read_manifest, write_manifest, Manifest};
use crate::io::npy::{read_cube, read_labels, write_npy, NpyArray};
use crate::io::ppm::{render_fold_map, render_leak_map, RenderStyle};
use crate::eval::WindowExtractor;
use crate::leakage::{geometric_leakage, masked_leakage, perturbation_independence_check, LeakageReport};
use crate::patch::{generate_patch_folds, DatasetPreset, PatchSplitConfig, DEFAULT_MAX_DRAW_ATTEMPTS};
use crate::random::{monte_carlo_splits, RandomSplitConfig};
use crate::raster::{patch_dims_from_fractions, NeighborhoodSpec};
use crate::synth::{generate_scene, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hsi-bench", version, about = "Leak-free train/test splits for hyperspectral scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene as a cube/labels NPY pair.
    Synth(SynthArgs),
    /// Draw patch-based folds and write a manifest.
    SplitPatch(SplitPatchArgs),
    /// Draw balanced or imbalanced random splits and write a manifest.
    SplitRandom(SplitRandomArgs),
    /// Report train/test feature-window leakage for every split in a manifest.
    Audit(AuditArgs),
    /// Train and score a proxy classifier on every split in a manifest.
    Eval(EvalArgs),
    /// Compare two evaluation outputs: accuracy gaps and a paired Wilcoxon test.
    Compare(CompareArgs),
    /// Render one split of a manifest as a PPM image.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    bands: usize,
    #[arg(long, default_value_t = 4)]
    classes: u16,
    /// Voronoi sites per class.
    #[arg(long, default_value_t = SynthConfig::default().region_seeds_per_class)]
    region_seeds: usize,
    #[arg(long, default_value_t = SynthConfig::default().signature_separation)]
    separation: f64,
    #[arg(long, default_value_t = SynthConfig::default().iid_noise_sigma)]
    iid_noise: f64,
    #[arg(long, default_value_t = SynthConfig::default().correlated_noise_sigma)]
    correlated_noise: f64,
    /// Box-blur passes applied to the correlated noise.
    #[arg(long, default_value_t = SynthConfig::default().correlation_radius)]
    correlation_radius: usize,
    #[arg(long, default_value_t = 0.0)]
    unlabeled_fraction: f64,
    /// Output cube (NPY, float64).
    #[arg(long)]
    cube: PathBuf,
    /// Output labels (NPY, uint16).
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Debug, Args)]
struct SplitPatchArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Minimum labeled training pixels per fold.
    #[arg(long)]
    train_pixels: usize,
    /// Patch geometry and fold count of a known scene.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, requires = "patch_height", conflicts_with_all = ["preset", "width_fraction"])]
    patch_width: Option<usize>,
    #[arg(long, requires = "patch_width")]
    patch_height: Option<usize>,
    /// Patch width as a fraction of the scene width, in (0, 1].
    #[arg(long, requires = "height_fraction", conflicts_with = "preset")]
    width_fraction: Option<f64>,
    #[arg(long, requires = "width_fraction")]
    height_fraction: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Redraw folds until every class has training pixels.
    #[arg(long)]
    require_all_classes: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_DRAW_ATTEMPTS)]
    max_draw_attempts: usize,
    /// Dataset name recorded in the manifest; defaults to the preset or the
    /// label file stem.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    IndianPines,
    SalinasValley,
    PaviaUniversity,
}

impl From<PresetArg> for DatasetPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::IndianPines => DatasetPreset::IndianPines,
            PresetArg::SalinasValley => DatasetPreset::SalinasValley,
            PresetArg::PaviaUniversity => DatasetPreset::PaviaUniversity,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplingArg {
    Balanced,
    Imbalanced,
}

#[derive(Debug, Args)]
struct SplitRandomArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    sampling: SamplingArg,
    /// Training pixels per class (balanced) or in total (imbalanced).
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AuditMode {
    Geometric,
    Masked,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Feature window, `N` or `WxH` (odd sizes).
    #[arg(long, value_parser = parse_window, default_value = "5")]
    window: NeighborhoodSpec,
    #[arg(long, value_enum, default_value = "geometric")]
    mode: AuditMode,
    /// With a cube, masked audits also run the perturbation independence check.
    #[arg(long)]
    cube: Option<PathBuf>,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassifierArg {
    /// Nearest class centroid.
    Nc,
    /// k nearest neighbours.
    Knn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskingArg {
    /// Removal for patch manifests, none for random ones.
    Auto,
    Removal,
    None,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "knn")]
    classifier: ClassifierArg,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Feature window; 1 means spectral features only.
    #[arg(long, value_parser = parse_window, default_value = "5")]
    window: NeighborhoodSpec,
    #[arg(long, value_enum, default_value = "auto")]
    masking: MaskingArg,
    /// Carve this share of the training pixels out as a validation set.
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Seed for validation carving.
    #[arg(long)]
    seed: Option<u64>,
    /// Also print the per-class table to stderr.
    #[arg(long)]
    table: bool,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Oa,
    Aa,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Evaluation output of the first strategy.
    #[arg(long)]
    a: PathBuf,
    /// Evaluation output of the second strategy.
    #[arg(long)]
    b: PathBuf,
    /// Paired metric for the Wilcoxon test.
    #[arg(long, value_enum, default_value = "aa")]
    metric: MetricArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StyleArg {
    Black,
    White,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Fold or run index.
    #[arg(long, default_value_t = 0)]
    split: usize,
    #[arg(long, value_enum, default_value = "black")]
    style: StyleArg,
    /// Paint test pixels leaking through this window in red.
    #[arg(long, value_parser = parse_window)]
    leak_window: Option<NeighborhoodSpec>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_window(s: &str) -> Result<NeighborhoodSpec, String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    let (w, h) = match s.split_once(['x', 'X']) {
        Some((w, h)) => (parse(w)?, parse(h)?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    NeighborhoodSpec::new(w, h).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// One split's scores, as written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub index: usize,
    pub test: EvalReport,
    pub validation: Option<EvalReport>,
}

/// Output of `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub dataset: String,
    pub mode: String,
    pub setup: ProxySetup,
    pub splits: Vec<SplitScore>,
}

/// Output of `audit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub index: usize,
    pub report: LeakageReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perturbation_independent: Option<bool>,
}

/// Output of `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    pub a: String,
    pub b: String,
    pub gap: GapReport,
    pub metric: String,
    /// Absent when every paired difference is zero.
    pub wilcoxon: Option<WilcoxonResult>,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::SplitPatch(a) => split_patch(a),
        Command::SplitRandom(a) => split_random(a),
        Command::Audit(a) => audit(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Render(a) => render(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from)?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Error::from)?,
    }
    Ok(())
}

fn dataset_name(explicit: Option<String>, labels: &Path) -> String {
    explicit.unwrap_or_else(|| {
        labels
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into())
    })
}

fn synth(a: SynthArgs) -> CliResult {
    let config = SynthConfig {
        height: a.height,
        width: a.width,
        bands: a.bands,
        class_count: a.classes,
        region_seeds_per_class: a.region_seeds,
        signature_separation: a.separation,
        iid_noise_sigma: a.iid_noise,
        correlated_noise_sigma: a.correlated_noise,
        correlation_radius: a.correlation_radius,
        unlabeled_fraction: a.unlabeled_fraction,
        seed: a.seed,
    };
    let (cube, labels) = generate_scene(&config)?;
    write_npy(&NpyArray::Cube(cube), &a.cube)?;
    write_npy(&NpyArray::Labels(labels), &a.labels)?;
    Ok(())
}

fn split_patch(a: SplitPatchArgs) -> CliResult {
    let labels = read_labels(&a.labels)?;
    let dims = labels.dims();
    let preset = a.preset.map(DatasetPreset::from);
    let (w, h) = match (a.patch_width.zip(a.patch_height), a.width_fraction.zip(a.height_fraction), preset) {
        (Some(d), _, _) => d,
        (None, Some((tw, th)), _) => patch_dims_from_fractions(tw, th, dims.width, dims.height)?,
        (None, None, Some(p)) => p.patch_size(),
        (None, None, None) => {
            return Err(Failure::Usage(
                "give --preset, --patch-width/--patch-height or --width-fraction/--height-fraction".into(),
            ))
        }
    };
    let folds = match (a.folds, preset) {
        (Some(n), _) => n,
        (None, Some(p)) => p.fold_count(),
        (None, None) => return Err(Failure::Usage("--folds is required without --preset".into())),
    };
    let mut config = PatchSplitConfig::new(w, h, a.train_pixels, folds, a.seed);
    config.allow_class_absence = !a.require_all_classes;
    config.max_draw_attempts = a.max_draw_attempts;
    let set = generate_patch_folds(&labels, &config)?;
    let name = dataset_name(a.dataset.or(preset.map(|p| p.name().to_string())), &a.labels);
    write_manifest(&Manifest::from_fold_set(name, &set, &labels), &a.out)?;
    Ok(())
}

fn split_random(a: SplitRandomArgs) -> CliResult {
    let labels = read_labels(&a.labels)?;
    let config = match a.sampling {
        SamplingArg::Balanced => RandomSplitConfig::balanced(a.count, a.runs, a.seed),
        SamplingArg::Imbalanced => RandomSplitConfig::imbalanced(a.count, a.runs, a.seed),
    };
    let runs = monte_carlo_splits(&labels, &config)?;
    let name = dataset_name(a.dataset, &a.labels);
    write_manifest(&Manifest::from_random(name, &config, &runs, &labels), &a.out)?;
    Ok(())
}

fn audit(a: AuditArgs) -> CliResult {
    let labels = read_labels(&a.labels)?;
    let (_, resolved) = read_manifest(&a.manifest, &labels)?;
    let cube = a.cube.as_ref().map(read_cube).transpose()?;
    if let Some(c) = &cube {
        labels.check_matches(c)?;
    }
    let mut entries = Vec::new();
    for (index, split) in resolved.splits().into_iter().enumerate() {
        let (report, perturbation_independent) = match a.mode {
            AuditMode::Geometric => (geometric_leakage(split, &labels, a.window)?, None),
            AuditMode::Masked => {
                let mask = split.visibility(labels.dims());
                let report = masked_leakage(split, &labels, a.window, &mask)?;
                let check = cube
                    .as_ref()
                    .map(|c| perturbation_independence_check(c, split, &mask, &WindowExtractor::masked(a.window)))
                    .transpose()?;
                (report, check)
            }
        };
        entries.push(AuditEntry {
            index,
            report,
            perturbation_independent,
        });
    }
    emit_json(&entries, a.out.as_deref())
}

fn eval(a: EvalArgs) -> CliResult {
    let validation = match (a.validation_fraction, a.seed) {
        (Some(fraction), Some(seed)) => Some(ValidationSpec { fraction, seed }),
        (Some(_), None) => {
            return Err(Failure::Usage("--validation-fraction needs an explicit --seed".into()))
        }
        (None, _) => None,
    };
    let cube = read_cube(&a.cube)?;
    let labels = read_labels(&a.labels)?;
    let (manifest, resolved) = read_manifest(&a.manifest, &labels)?;

    let masking = match a.masking {
        MaskingArg::Auto if resolved.is_patch() => Masking::Removal,
        MaskingArg::Auto | MaskingArg::None => Masking::None,
        MaskingArg::Removal => Masking::Removal,
    };
    let features = if a.window.is_single_pixel() {
        FeatureSet::Spectral
    } else {
        FeatureSet::SpatialSpectral { window: a.window }
    };
    let classifier = match a.classifier {
        ClassifierArg::Nc => Classifier::NearestCentroid,
        ClassifierArg::Knn => Classifier::Knn { k: a.k },
    };
    let setup = ProxySetup {
        classifier,
        features,
        masking,
    };

    let mut splits = Vec::new();
    for (index, split) in resolved.splits().into_iter().enumerate() {
        let r = evaluate_split(&cube, &labels, split, &setup, validation)?;
        splits.push(SplitScore {
            index,
            test: r.test,
            validation: r.validation,
        });
    }
    let output = EvalOutput {
        dataset: manifest.dataset.clone(),
        mode: if resolved.is_patch() { "patch" } else { "random" }.into(),
        setup,
        splits,
    };
    if a.table {
        let names: Vec<String> = output.splits.iter().map(|s| s.index.to_string()).collect();
        let rows: Vec<(&str, &str, &EvalReport)> = output
            .splits
            .iter()
            .zip(&names)
            .map(|(s, n)| (output.mode.as_str(), n.as_str(), &s.test))
            .collect();
        eprint!("{}", render_table(&rows));
    }
    emit_json(&output, a.out.as_deref())
}

fn load_eval(path: &Path) -> CliResult<EvalOutput> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn compare(a: CompareArgs) -> CliResult {
    let ea = load_eval(&a.a)?;
    let eb = load_eval(&a.b)?;
    let ra: Vec<EvalReport> = ea.splits.iter().map(|s| s.test.clone()).collect();
    let rb: Vec<EvalReport> = eb.splits.iter().map(|s| s.test.clone()).collect();
    let gap = gap_analysis(&ra, &rb)?;
    if ra.len() != rb.len() {
        return Err(Failure::Data(Error::DimensionMismatch(format!(
            "paired comparison needs equal run counts, got {} and {}",
            ra.len(),
            rb.len()
        ))));
    }
    let metric = |r: &EvalReport| match a.metric {
        MetricArg::Oa => r.overall_accuracy,
        MetricArg::Aa => r.average_accuracy,
    };
    let xa: Vec<f64> = ra.iter().map(metric).collect();
    let xb: Vec<f64> = rb.iter().map(metric).collect();
    let wilcoxon = match wilcoxon_signed_rank_two_tailed(&xa, &xb) {
        Ok(w) => Some(w),
        Err(Error::DegenerateComparison) => None,
        Err(e) => return Err(e.into()),
    };
    let output = CompareOutput {
        a: format!("{}/{}", ea.dataset, ea.mode),
        b: format!("{}/{}", eb.dataset, eb.mode),
        gap,
        metric: match a.metric {
            MetricArg::Oa => "oa",
            MetricArg::Aa => "aa",
        }
        .into(),
        wilcoxon,
    };
    emit_json(&output, a.out.as_deref())
}

fn render(a: RenderArgs) -> CliResult {
    let labels = read_labels(&a.labels)?;
    let (_, resolved) = read_manifest(&a.manifest, &labels)?;
    let splits = resolved.splits();
    let split = *splits.get(a.split).ok_or_else(|| {
        Failure::Usage(format!(
            "--split {} out of range, manifest has {} splits",
            a.split,
            splits.len()
        ))
    })?;
    let style = match a.style {
        StyleArg::Black => RenderStyle::BLACK,
        StyleArg::White => RenderStyle::WHITE,
    };
    let image = match a.leak_window {
        Some(window) => {
            let report = geometric_leakage(split, &labels, window)?;
            render_leak_map(&labels, split, &report, style)?
        }
        None => render_fold_map(&labels, split, style)?,
    };
    image.write(&a.out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("5").unwrap(), NeighborhoodSpec::square(5).unwrap());
        assert_eq!(parse_window("3x5").unwrap(), NeighborhoodSpec::new(3, 5).unwrap());
        assert!(parse_window("4").is_err());
        assert!(parse_window("x").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["hsi-bench", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["hsi-bench", "synth", "--cube", "a", "--labels", "b"]), EXIT_USAGE);
        assert_eq!(run(["hsi-bench", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_input_is_data_error() {
        let code = run([
            "hsi-bench",
            "split-random",
            "--labels",
            "/nonexistent/labels.npy",
            "--seed",
            "1",
            "--sampling",
            "balanced",
            "--count",
            "3",
            "--out",
            "/nonexistent/m.json",
        ]);
        assert_eq!(code, EXIT_DATA);
    }
}
