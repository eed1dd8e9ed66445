use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kernelspect_core::infer::{evaluate, CompiledNetwork, EvalDataset};
use kernelspect_core::modes::{CompressionMode, ThresholdTable};
use kernelspect_core::pruner::{
    complex_stats, complex_stats_by_layer, compression_score, conformance, epoch_history, kernel_prune_ratio,
    layer_activity, set_partition, vanilla_projection, weight_prune_ratio, ComplexStats, KernelAnalysis,
    PrunerError, SetSignature, EIGENVALUE_MODES,
};
use kernelspect_core::tensor_io::{load_checkpoint_series, load_snapshot, save_npy, ModelSnapshot};

use crate::report::{Cell, Meta, ReportDocument, ReportKind};
use crate::svg;
use crate::sweep::{log_grid, threshold_sweep};

/// Spectral significance reports for convolution kernels.
#[derive(Debug, Parser)]
#[command(name = "kernelspect", version)]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON threshold overrides.
    #[arg(long, global = true, value_name = "FILE")]
    thresholds: Option<PathBuf>,
    /// Single override, repeatable; applied after --thresholds.
    #[arg(long = "threshold", global = true, value_name = "MODE=VALUE[:KSIZE]")]
    threshold: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also render the report as an SVG chart.
    #[arg(long, global = true, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Write the report here instead of stdout. For `mask`, the directory receiving the NPY files.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "KERNELSPECT_THREADS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel census and complex-eigenvalue statistics per layer.
    Inspect { manifest: PathBuf },
    /// Pruning ratios per mode, with accuracies and compression scores when --data is given.
    Score {
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Kernels grouped by the exact set of modes that prune them.
    Sets { manifest: PathBuf },
    /// Active parameter ratio per conv layer.
    Layers {
        manifest: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<CompressionMode>,
    },
    /// Pruning ratios at every checkpoint of an epoch_<N> series.
    History {
        series: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Export one uint8 [out, in] NPY mask per conv layer into --out.
    Mask {
        manifest: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: CompressionMode,
    },
    /// Top-1 accuracy, optionally with one mode's pruned kernels zeroed.
    Eval {
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<CompressionMode>,
    },
    /// Pruning ratio over a log-spaced grid of base thresholds.
    Sweep {
        manifest: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<CompressionMode>,
        #[arg(long, default_value_t = 1e-6)]
        min: f64,
        #[arg(long, default_value_t = 1e-1)]
        max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
}

fn parse_mode(s: &str) -> Result<CompressionMode, String> {
    s.parse().map_err(|e: kernelspect_core::modes::ModesError| e.to_string())
}

/// Spectral identity broken on real input: a bug, reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("internal invariant violated: {0}")]
pub struct InvariantFailure(String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

/// Parses `args` (program name first), runs the command, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            report_error("usage", EXIT_INPUT, &e.to_string(), &[]);
            return EXIT_INPUT;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let code = exit_code(&err);
            let kind = if code == EXIT_INVARIANT { "invariant" } else { "input" };
            let causes: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
            report_error(kind, code, &err.to_string(), &causes);
            code
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    let invariant = err.chain().any(|c| {
        c.downcast_ref::<InvariantFailure>().is_some()
            || c.downcast_ref::<PrunerError>().is_some_and(PrunerError::is_invariant_violation)
            || c.downcast_ref::<kernelspect_core::Error>()
                .is_some_and(kernelspect_core::Error::is_invariant_violation)
    });
    if invariant {
        EXIT_INVARIANT
    } else {
        EXIT_INPUT
    }
}

/// One JSON object on stderr: `{"error": {"kind", "code", "message", "causes"}}`.
fn report_error(kind: &str, code: i32, message: &str, causes: &[String]) {
    let doc = serde_json::json!({
        "error": {"kind": kind, "code": code, "message": message.trim_end(), "causes": causes}
    });
    let _ = writeln!(std::io::stderr(), "{doc}");
}

struct Session {
    thresholds: ThresholdTable,
    jobs: usize,
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let mut thresholds = ThresholdTable::default();
    if let Some(path) = &g.thresholds {
        thresholds.load_json(path)?;
    }
    for spec in &g.threshold {
        thresholds.apply_override(spec)?;
    }
    let ctx = Session {
        thresholds,
        jobs: g.jobs,
    };

    let doc = match &cli.command {
        Command::Inspect { manifest } => inspect(&ctx, manifest)?,
        Command::Score { manifest, data } => score(&ctx, manifest, data.as_deref())?,
        Command::Sets { manifest } => sets(&ctx, manifest)?,
        Command::Layers { manifest, mode } => layers(&ctx, manifest, *mode)?,
        Command::History { series, data } => history(&ctx, series, data.as_deref())?,
        Command::Mask { manifest, mode } => {
            let dir = g.out.as_deref().context("mask needs --out DIR for the NPY files")?;
            let doc = mask(&ctx, manifest, *mode, dir)?;
            return emit(&doc, g.format, None, g.svg.as_deref());
        }
        Command::Eval { manifest, data, mode } => eval(&ctx, manifest, data, *mode)?,
        Command::Sweep {
            manifest,
            mode,
            min,
            max,
            points,
        } => sweep(&ctx, manifest, *mode, *min, *max, *points)?,
    };
    emit(&doc, g.format, g.out.as_deref(), g.svg.as_deref())
}

fn emit(doc: &ReportDocument, format: Format, out: Option<&Path>, svg_path: Option<&Path>) -> Result<()> {
    if let Some(path) = svg_path {
        let text = svg::render(doc)?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let text = match format {
        Format::Json => doc.to_json(),
        Format::Csv => doc.to_csv(),
    };
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<ModelSnapshot> {
    load_snapshot(path).with_context(|| format!("loading model {}", path.display()))
}

fn analyze(ctx: &Session, snapshot: &ModelSnapshot) -> Result<KernelAnalysis> {
    let a = KernelAnalysis::analyze(snapshot, ctx.jobs)?;
    a.check_invariants()
        .map_err(|e| InvariantFailure(e.to_string()))?;
    if a.is_empty() {
        bail!("model `{}` has no conv2d kernels", snapshot.label());
    }
    Ok(a)
}

fn load_data(dir: &Path) -> Result<EvalDataset> {
    EvalDataset::load(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

fn modes_or_all(mode: Option<CompressionMode>) -> Vec<CompressionMode> {
    mode.map_or_else(|| CompressionMode::ALL.to_vec(), |m| vec![m])
}

fn sig_text(sig: SetSignature) -> String {
    sig.modes().iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
}

fn inspect(ctx: &Session, manifest: &Path) -> Result<ReportDocument> {
    let snap = load(manifest)?;
    let a = analyze(ctx, &snap)?;
    let masks = a.masks(&ctx.thresholds);
    let mut columns: Vec<String> = [
        "layer",
        "kernel_size",
        "kernels",
        "weights",
        "eigenvalues",
        "complex_eigenvalues",
        "total_complex_ratio",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in EIGENVALUE_MODES {
        columns.push(format!("{m}_targeted_complex_ratio"));
        columns.push(format!("{m}_pruned_via_complex_ratio"));
    }
    let mut doc = ReportDocument::with_columns(ReportKind::ComplexStats, Meta::new(snap.label(), &ctx.thresholds), columns);
    let row = |name: &str, size: Cell, kernels: usize, weights: usize, s: &ComplexStats| {
        let mut r: Vec<Cell> = vec![
            name.into(),
            size,
            kernels.into(),
            weights.into(),
            s.eigenvalues.into(),
            s.complex_eigenvalues.into(),
            s.total_complex_ratio.into(),
        ];
        for m in &s.modes {
            r.push(m.targeted_complex_ratio.into());
            r.push(m.pruned_via_complex_ratio.into());
        }
        r
    };
    let per_layer = complex_stats_by_layer(&a, &masks)?;
    for (slot, (_, stats)) in a.universe().layers().iter().zip(&per_layer) {
        doc.push(row(&slot.name, slot.size.into(), slot.kernel_count(), slot.weight_count(), stats));
    }
    let total = complex_stats(&a, &masks)?;
    doc.push(row("all", Cell::Null, a.len(), a.universe().weight_count(), &total));
    Ok(doc)
}

fn score(ctx: &Session, manifest: &Path, data: Option<&Path>) -> Result<ReportDocument> {
    let snap = load(manifest)?;
    let a = analyze(ctx, &snap)?;
    let dataset = data.map(load_data).transpose()?;
    let vanilla = dataset
        .as_ref()
        .map(|d| evaluate(&snap, d, None, ctx.jobs))
        .transpose()?;
    let mut doc = ReportDocument::new(
        ReportKind::Scores,
        Meta::new(snap.label(), &ctx.thresholds),
        &[
            "mode",
            "pruned_kernels",
            "total_kernels",
            "kernel_prune_ratio",
            "pruned_weights",
            "total_weights",
            "weight_prune_ratio",
            "acc_vanilla",
            "acc_pruned",
            "compression_score",
        ],
    );
    let total_weights = a.universe().weight_count();
    for mask in a.masks(&ctx.thresholds) {
        let wpr = weight_prune_ratio(&mask)?;
        let pruned_weights: usize = mask.pruned_indices().map(|i| a.universe().kernel_weights(i)).sum();
        let (acc_v, acc_p, c) = match (&dataset, &vanilla) {
            (Some(d), Some(v)) => {
                let p = evaluate(&snap, d, Some(&mask), ctx.jobs)?.top1_accuracy;
                let c = compression_score(p, v.top1_accuracy, wpr)?;
                (Some(v.top1_accuracy), Some(p), Some(c))
            }
            _ => (None, None, None),
        };
        doc.push(vec![
            mask.mode.as_str().into(),
            mask.pruned_count().into(),
            mask.universe_size().into(),
            kernel_prune_ratio(&mask)?.into(),
            pruned_weights.into(),
            total_weights.into(),
            wpr.into(),
            acc_v.into(),
            acc_p.into(),
            c.into(),
        ]);
    }
    Ok(doc)
}

fn sets(ctx: &Session, manifest: &Path) -> Result<ReportDocument> {
    let snap = load(manifest)?;
    let a = analyze(ctx, &snap)?;
    let part = set_partition(&a.masks(&ctx.thresholds))?;
    let rows = conformance(&part);
    let mut doc = ReportDocument::new(
        ReportKind::Sets,
        Meta::new(snap.label(), &ctx.thresholds),
        &["signature", "modes", "kernels", "projected", "conformance", "listed_rank"],
    );
    for (sig, count) in &part {
        let projected = vanilla_projection(*sig);
        let status = rows
            .iter()
            .find(|r| r.projected == projected)
            .expect("every projection classified");
        doc.push(vec![
            sig_text(*sig).into(),
            sig.len().into(),
            (*count).into(),
            sig_text(projected).into(),
            status.status.as_str().into(),
            status.listed_rank.into(),
        ]);
    }
    Ok(doc)
}

fn layers(ctx: &Session, manifest: &Path, mode: Option<CompressionMode>) -> Result<ReportDocument> {
    let snap = load(manifest)?;
    let a = analyze(ctx, &snap)?;
    let mut doc = ReportDocument::new(
        ReportKind::Layers,
        Meta::new(snap.label(), &ctx.thresholds),
        &["mode", "layer_index", "layer", "kernel_size", "active_params", "total_params", "activity"],
    );
    for m in modes_or_all(mode) {
        let act = layer_activity(&a.mask(m, &ctx.thresholds));
        for (i, (l, slot)) in act.layers.iter().zip(a.universe().layers()).enumerate() {
            doc.push(vec![
                m.as_str().into(),
                i.into(),
                l.layer.as_str().into(),
                slot.size.into(),
                l.active_params.into(),
                l.total_params.into(),
                l.activity.into(),
            ]);
        }
    }
    Ok(doc)
}

fn history(ctx: &Session, dir: &Path, data: Option<&Path>) -> Result<ReportDocument> {
    let series = load_checkpoint_series(dir).with_context(|| format!("loading series {}", dir.display()))?;
    let dataset = data.map(load_data).transpose()?;
    let records = epoch_history(&series, &ctx.thresholds, dataset.as_ref(), ctx.jobs)?;
    let label = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| dir.display().to_string());
    let mut doc = ReportDocument::new(
        ReportKind::History,
        Meta::new(label, &ctx.thresholds),
        &[
            "epoch",
            "mode",
            "pruned_kernels",
            "kernel_prune_ratio",
            "weight_prune_ratio",
            "vanilla_accuracy",
            "accuracy",
            "compression_score",
        ],
    );
    for rec in records {
        for m in rec.modes {
            doc.push(vec![
                rec.epoch.into(),
                m.mode.as_str().into(),
                m.pruned_kernels.into(),
                m.kernel_prune_ratio.into(),
                m.weight_prune_ratio.into(),
                rec.vanilla_accuracy.into(),
                m.accuracy.into(),
                m.compression_score.into(),
            ]);
        }
    }
    Ok(doc)
}

fn mask(ctx: &Session, manifest: &Path, mode: CompressionMode, dir: &Path) -> Result<ReportDocument> {
    let snap = load(manifest)?;
    let a = analyze(ctx, &snap)?;
    let m = a.mask(mode, &ctx.thresholds);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut doc = ReportDocument::new(
        ReportKind::MasksSummary,
        Meta::new(snap.label(), &ctx.thresholds),
        &["mode", "layer", "file", "pruned_kernels", "kernels"],
    );
    for (name, tensor) in m.layer_tensors() {
        let file = format!("{name}.npy");
        save_npy(&tensor, dir.join(&file))?;
        let pruned = tensor.to_f64_vec().iter().filter(|&&v| v != 0.0).count();
        doc.push(vec![
            mode.as_str().into(),
            name.into(),
            file.into(),
            pruned.into(),
            tensor.len().into(),
        ]);
    }
    Ok(doc)
}

fn eval(ctx: &Session, manifest: &Path, data: &Path, mode: Option<CompressionMode>) -> Result<ReportDocument> {
    let snap = load(manifest)?;
    let dataset = load_data(data)?;
    let mut doc = ReportDocument::new(
        ReportKind::Eval,
        Meta::new(snap.label(), &ctx.thresholds),
        &[
            "mode",
            "num_samples",
            "correct",
            "top1_accuracy",
            "logits_checksum",
            "kernel_prune_ratio",
            "weight_prune_ratio",
            "compression_score",
        ],
    );
    let net = CompiledNetwork::compile(&snap, None)?;
    let vanilla = kernelspect_core::infer::evaluate_compiled(&net, &dataset, ctx.jobs)?;
    doc.push(vec![
        "vanilla".into(),
        vanilla.num_samples.into(),
        vanilla.correct.into(),
        vanilla.top1_accuracy.into(),
        vanilla.logits_checksum.into(),
        Cell::Null,
        Cell::Null,
        Cell::Null,
    ]);
    if let Some(m) = mode {
        let a = analyze(ctx, &snap)?;
        let mask = a.mask(m, &ctx.thresholds);
        let r = evaluate(&snap, &dataset, Some(&mask), ctx.jobs)?;
        let wpr = weight_prune_ratio(&mask)?;
        let c = compression_score(r.top1_accuracy, vanilla.top1_accuracy, wpr).ok();
        doc.push(vec![
            m.as_str().into(),
            r.num_samples.into(),
            r.correct.into(),
            r.top1_accuracy.into(),
            r.logits_checksum.into(),
            kernel_prune_ratio(&mask)?.into(),
            wpr.into(),
            c.into(),
        ]);
    }
    Ok(doc)
}

fn sweep(
    ctx: &Session,
    manifest: &Path,
    mode: Option<CompressionMode>,
    min: f64,
    max: f64,
    points: usize,
) -> Result<ReportDocument> {
    if !(min > 0.0 && max > min) {
        bail!("sweep range must satisfy 0 < --min < --max");
    }
    let snap = load(manifest)?;
    let a = analyze(ctx, &snap)?;
    let grid = log_grid(min, max, points);
    let mut doc = ReportDocument::new(
        ReportKind::Sweep,
        Meta::new(snap.label(), &ctx.thresholds),
        &["mode", "threshold", "pruned_kernels", "kernel_prune_ratio", "weight_prune_ratio"],
    );
    for m in modes_or_all(mode) {
        for p in threshold_sweep(&a, m, &grid)? {
            doc.push(vec![
                m.as_str().into(),
                p.threshold.into(),
                p.pruned_kernels.into(),
                p.kernel_prune_ratio.into(),
                p.weight_prune_ratio.into(),
            ]);
        }
    }
    Ok(doc)
}
