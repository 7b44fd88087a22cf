//! Pipeline front end: generate synthetic bundles, prune them, refine the
//! masks, and evaluate reconstruction error. Stages communicate only
//! through bundle directories, so each one is independently checkable.
//!
//! Exit codes: 0 success, 2 flag/usage errors (from the parser or value
//! validation), 1 data errors (unreadable bundles, missing masks, shape
//! problems).

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use remask::bundle::{
    format_pattern, load_bundle, parse_pattern, save_bundle, save_summary, LayerData,
    LayerReports, LayerSummary, RowReportRecord, RunReports, RunSummary,
};
use remask::oracle::oracle_layer_error;
use remask::prune::{prune_to_nm, prune_to_ratio, Granularity, PruneMethod, PruneSpec, PruneTarget};
use remask::refine::{
    refine_layer, GrowCriterion, PruneCriterion, RefineConfig, TerminationMetric,
};
use remask::synth::{generate_synthetic, splitmix64_output, SyntheticSpec};
use remask::types::{compute_channel_stats, MaskPattern, SparsityMask};
use remask::Error;

#[derive(Parser)]
#[command(name = "remask", version, about = "Sparse mask pruning and refinement over layer bundles")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic calibration bundle
    Gen(GenArgs),
    /// Apply one-shot pruning and write masks plus a run summary
    Prune(PruneArgs),
    /// Iteratively refine existing masks against calibration data
    Refine(RefineArgs),
    /// Recompute and print per-layer reconstruction errors
    Eval(EvalArgs),
}

fn parse_unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn parse_scale(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and >= 1"))
    }
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and >= 0"))
    }
}

fn parse_pattern_flag(s: &str) -> Result<MaskPattern, String> {
    parse_pattern(s).ok_or_else(|| format!("{s:?} is not a valid N:M pattern (need n <= m, m >= 1)"))
}

#[derive(Args)]
struct GenArgs {
    /// Output bundle directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    layers: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    cout: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    cin: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    tokens: u32,
    /// Fraction of channels scaled up as outliers
    #[arg(long = "outlier-frac", default_value_t = 0.0, value_parser = parse_unit_interval)]
    outlier_frac: f64,
    #[arg(long = "outlier-scale", default_value_t = 1.0, value_parser = parse_scale)]
    outlier_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodFlag {
    Magnitude,
    Wanda,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GranularityFlag {
    PerRow,
    PerLayer,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("target").required(true).args(["sparsity", "pattern"])))]
struct PruneArgs {
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodFlag::Wanda)]
    method: MethodFlag,
    /// Fraction of weights to remove
    #[arg(long, value_parser = parse_unit_interval)]
    sparsity: Option<f64>,
    /// Block pattern N:M keeping N weights per M consecutive columns
    #[arg(long, value_parser = parse_pattern_flag)]
    pattern: Option<MaskPattern>,
    #[arg(long, value_enum, default_value_t = GranularityFlag::PerRow)]
    granularity: GranularityFlag,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MetricFlag {
    AbsMean,
    L2,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GrowFlag {
    Dsnot,
    WandaLike,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PruneFlag {
    Dsnot,
    WandaUnsigned,
    ExpectedChange,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Swap budget per row
    #[arg(long = "max-cycles", default_value_t = 50)]
    max_cycles: u32,
    /// Stop a row once its error metric falls below this
    #[arg(long, default_value_t = 0.1, value_parser = parse_threshold)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = MetricFlag::AbsMean)]
    metric: MetricFlag,
    #[arg(long, value_enum, default_value_t = GrowFlag::Dsnot)]
    grow: GrowFlag,
    #[arg(long, value_enum, default_value_t = PruneFlag::Dsnot)]
    prune: PruneFlag,
    /// Worker threads (0 = automatic); results are identical at any count
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    /// Print machine-readable JSON instead of the text table
    #[arg(long)]
    json: bool,
}

fn layer_error(layer: &LayerData) -> Result<f64, Error> {
    match &layer.mask {
        None => Ok(0.0),
        Some(mask) => oracle_layer_error(&layer.weights, mask, &layer.activations),
    }
}

fn sparsity_of(mask: &SparsityMask) -> f64 {
    let total = mask.rows() * mask.cols();
    (total - mask.nnz()) as f64 / total as f64
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let mut layers = Vec::with_capacity(args.layers as usize);
    for i in 0..args.layers as u64 {
        let spec = SyntheticSpec {
            c_out: args.cout as usize,
            c_in: args.cin as usize,
            tokens: args.tokens as usize,
            outlier_fraction: args.outlier_frac,
            outlier_scale: args.outlier_scale,
            seed: splitmix64_output(args.seed, i),
        };
        let (weights, activations) = generate_synthetic(&spec)?;
        layers.push(LayerData {
            name: format!("layer{i:03}"),
            weights,
            activations,
            mask: None,
        });
    }
    save_bundle(&args.out, &layers, None)?;
    println!("wrote {} layer(s) to {}", layers.len(), args.out.display());
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<(), Error> {
    let mut layers = load_bundle(&args.bundle)?;
    let method = match args.method {
        MethodFlag::Magnitude => PruneMethod::Magnitude,
        MethodFlag::Wanda => PruneMethod::Wanda,
    };
    let mut summary = RunSummary { layers: Vec::with_capacity(layers.len()) };
    for layer in &mut layers {
        let initial_error_l2 = layer_error(layer)?;
        let stats = compute_channel_stats(&layer.activations);
        let started = Instant::now();
        let mask = match (args.sparsity, args.pattern) {
            (Some(p), None) => prune_to_ratio(
                &layer.weights,
                &stats,
                &PruneSpec {
                    method,
                    target: PruneTarget::Ratio(p),
                    granularity: match args.granularity {
                        GranularityFlag::PerRow => Granularity::PerRow,
                        GranularityFlag::PerLayer => Granularity::PerLayer,
                    },
                },
            )?,
            (None, Some(MaskPattern::NOfM { n, m })) => prune_to_nm(
                &layer.weights,
                &stats,
                &PruneSpec {
                    method,
                    target: PruneTarget::NOfM { n, m },
                    granularity: Granularity::PerRow,
                },
            )?,
            _ => unreachable!("flag group enforces exactly one target"),
        };
        let wall_time_ms = started.elapsed().as_millis() as u64;
        layer.mask = Some(mask);
        let mask = layer.mask.as_ref().unwrap();
        summary.layers.push(LayerSummary {
            name: layer.name.clone(),
            initial_error_l2,
            pruned_error_l2: layer_error(layer)?,
            refined_error_l2: None,
            sparsity_achieved: sparsity_of(mask),
            total_swaps: 0,
            wall_time_ms,
        });
    }
    save_bundle(&args.out, &layers, None)?;
    save_summary(&args.out, &summary)?;
    println!("pruned {} layer(s) into {}", layers.len(), args.out.display());
    Ok(())
}

fn cmd_refine(args: RefineArgs) -> Result<(), Error> {
    let mut layers = load_bundle(&args.bundle)?;
    for layer in &layers {
        if layer.mask.is_none() {
            return Err(Error::MissingMask { layer: layer.name.clone() });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Error::InvalidSpec { what: "thread pool", why: e.to_string() })?;
    let mut summary = RunSummary { layers: Vec::with_capacity(layers.len()) };
    let mut reports = RunReports { layers: Vec::with_capacity(layers.len()) };
    for layer in &mut layers {
        let mask = layer.mask.as_mut().expect("checked above");
        let config = RefineConfig {
            max_cycles: args.max_cycles,
            threshold: args.threshold,
            termination_metric: match args.metric {
                MetricFlag::AbsMean => TerminationMetric::AbsMean,
                MetricFlag::L2 => TerminationMetric::L2,
            },
            grow_criterion: match args.grow {
                GrowFlag::Dsnot => GrowCriterion::Dsnot,
                GrowFlag::WandaLike => GrowCriterion::WandaLike,
            },
            prune_criterion: match args.prune {
                PruneFlag::Dsnot => PruneCriterion::Dsnot,
                PruneFlag::WandaUnsigned => PruneCriterion::WandaUnsigned,
                PruneFlag::ExpectedChange => PruneCriterion::ExpectedChange,
            },
            variance_floor: 1e-8,
            pattern_constraint: mask.pattern(),
        };
        let pruned_error_l2 =
            oracle_layer_error(&layer.weights, mask, &layer.activations)?;
        let started = Instant::now();
        let outcome =
            pool.install(|| refine_layer(&layer.weights, mask, &layer.activations, &config))?;
        let wall_time_ms = started.elapsed().as_millis() as u64;
        let refined_error_l2 =
            oracle_layer_error(&layer.weights, mask, &layer.activations)?;
        reports.layers.push(LayerReports {
            name: layer.name.clone(),
            rows: outcome.reports.iter().map(RowReportRecord::from).collect(),
        });
        summary.layers.push(LayerSummary {
            name: layer.name.clone(),
            initial_error_l2: pruned_error_l2,
            pruned_error_l2,
            refined_error_l2: Some(refined_error_l2),
            sparsity_achieved: sparsity_of(mask),
            total_swaps: outcome.total_swaps(),
            wall_time_ms,
        });
    }
    save_bundle(&args.out, &layers, Some(&reports))?;
    save_summary(&args.out, &summary)?;
    println!("refined {} layer(s) into {}", layers.len(), args.out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct EvalRow {
    name: String,
    error_l2: f64,
    sparsity_achieved: f64,
    nnz: usize,
    rows: usize,
    cols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let layers = load_bundle(&args.bundle)?;
    let mut rows = Vec::with_capacity(layers.len());
    for layer in &layers {
        let mask = layer.mask.as_ref().ok_or_else(|| Error::MissingMask {
            layer: layer.name.clone(),
        })?;
        rows.push(EvalRow {
            name: layer.name.clone(),
            error_l2: oracle_layer_error(&layer.weights, mask, &layer.activations)?,
            sparsity_achieved: sparsity_of(mask),
            nnz: mask.nnz(),
            rows: mask.rows(),
            cols: mask.cols(),
            pattern: format_pattern(mask.pattern()),
        });
    }
    if args.json {
        let doc = serde_json::json!({ "layers": rows });
        println!("{}", serde_json::to_string_pretty(&doc).expect("eval rows serialize"));
    } else {
        println!("{:<16} {:>18} {:>10} {:>10} {:>8}", "layer", "error_l2", "sparsity", "nnz", "pattern");
        for r in &rows {
            println!(
                "{:<16} {:>18.9} {:>10.6} {:>10} {:>8}",
                r.name,
                r.error_l2,
                r.sparsity_achieved,
                r.nnz,
                r.pattern.as_deref().unwrap_or("-"),
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Prune(args) => cmd_prune(args),
        Cmd::Refine(args) => cmd_refine(args),
        Cmd::Eval(args) => cmd_eval(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
