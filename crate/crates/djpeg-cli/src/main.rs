//! `djpeg`: double JPEG compression detection toolkit.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/codec error, 4 training
//! error.

mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use djpeg_core::dataset::{
    self, load_pairs, materialize_pair_dataset, read_manifest, split_and_tile, train_val_split,
    write_manifest, Label, ManifestRecord, Split,
};
use djpeg_core::dctinput::{assemble_subbands, write_tensor_dump, SUBBANDS};
use djpeg_core::jpeg::decode_to_coeffs;
use djpeg_core::mbfdf::{extract_mbfdf, fld_classify, fld_train, write_features_csv, FldModel};
use djpeg_core::model::{
    evaluate, load_checkpoint, pairs_to_samples, save_checkpoint, train as train_model, Activation,
    CheckpointMeta, NetworkConfig, Pooling, TrainConfig, CLASS_DOUBLE,
};

use report::{AccuracyMatrix, RunReport};

const EXIT_USAGE: i32 = 2;
const EXIT_DATA: i32 = 3;
const EXIT_TRAINING: i32 = 4;

/// Error carrying its process exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.msg)
    }
}

impl std::error::Error for Failure {}

fn usage_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    })
}

fn data_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Failure {
        code: EXIT_DATA,
        msg: msg.into(),
    })
}

fn training_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Failure {
        code: EXIT_TRAINING,
        msg: msg.into(),
    })
}

#[derive(Parser)]
#[command(name = "djpeg", version, about = "Double JPEG compression detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoolArg {
    Avg,
    Max,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split, tile, and doubly compress a directory of 512x512 PGM images.
    DatasetBuild(DatasetBuildArgs),
    /// Train the multi-branch CNN on a built dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split, or aggregate an accuracy matrix.
    Eval(EvalArgs),
    /// First-digit-histogram baseline: train or evaluate the linear model.
    Mbfdf(MbfdfArgs),
    /// Dump the DCT sub-band tensor of a JPEG file.
    ExtractDct(ExtractDctArgs),
    /// Classify one JPEG file as single- or double-compressed.
    Predict(PredictArgs),
}

#[derive(Args)]
struct DatasetBuildArgs {
    #[arg(long)]
    pgm_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    qf1: u32,
    #[arg(long)]
    qf2: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_ckpt: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 80)]
    epochs: usize,
    #[arg(long, default_value_t = 512)]
    fc1: usize,
    /// Drop the ABS layer in front of every branch.
    #[arg(long)]
    no_abs: bool,
    /// Drop all batch normalization layers.
    #[arg(long)]
    no_bn: bool,
    /// Keep only the joint branch (#21).
    #[arg(long)]
    no_intra: bool,
    #[arg(long, value_enum, default_value_t = ActivationArg::Tanh)]
    activation: ActivationArg,
    #[arg(long, value_enum, default_value_t = PoolArg::Avg)]
    pool: PoolArg,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 50)]
    batch: usize,
    /// First epoch at which the validation split is scored.
    #[arg(long, default_value_t = 41)]
    validate_from: usize,
    /// Also score the test split after training.
    #[arg(long)]
    with_test: bool,
    /// Report path (default: <out-ckpt>.report.json).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Write the RunReport fragment here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Aggregate report fragments from a directory into an accuracy matrix.
    #[arg(long)]
    matrix: bool,
    /// Directory of RunReport fragments (matrix mode).
    #[arg(long)]
    fragments: Option<PathBuf>,
    /// Output path for the matrix JSON (matrix mode).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MbfdfArgs {
    #[command(subcommand)]
    action: MbfdfAction,
}

#[derive(Subcommand)]
enum MbfdfAction {
    /// Fit the linear discriminant on the train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        /// Also export the extracted features as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Score a fitted model on a split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExtractDctArgs {
    #[arg(long, value_name = "FILE")]
    r#in: PathBuf,
    /// Binary tensor dump output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV output path (one row per block position, one column per mode).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_name = "FILE")]
    r#in: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct FldModelFile {
    schema: String,
    w: Vec<f64>,
    threshold: f64,
}

const FLD_SCHEMA: &str = "djpeg-fld/1";

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DatasetBuild(a) => cmd_dataset_build(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Mbfdf(a) => match a.action {
            MbfdfAction::Train {
                manifest,
                out_model,
                csv,
            } => cmd_mbfdf_train(manifest, out_model, csv),
            MbfdfAction::Eval {
                manifest,
                model,
                split,
                report,
            } => cmd_mbfdf_eval(manifest, model, split, report),
        },
        Command::ExtractDct(a) => cmd_extract_dct(a),
        Command::Predict(a) => cmd_predict(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        let code = e
            .downcast_ref::<Failure>()
            .map(|f| f.code)
            .unwrap_or(EXIT_DATA);
        std::process::exit(code);
    }
}

fn manifest_qfs(records: &[ManifestRecord]) -> anyhow::Result<(u32, u32)> {
    let qf2 = records
        .first()
        .map(|r| r.qf2)
        .ok_or_else(|| data_err("empty manifest"))?;
    let qf1 = records
        .iter()
        .find_map(|r| r.qf1)
        .ok_or_else(|| data_err("manifest has no double-compressed records"))?;
    Ok((qf1, qf2))
}

fn read_manifest_checked(path: &Path) -> anyhow::Result<Vec<ManifestRecord>> {
    if !path.exists() {
        return Err(data_err(format!("manifest not found: {}", path.display())));
    }
    read_manifest(path).map_err(|e| data_err(format!("{e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut f = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn cmd_dataset_build(a: DatasetBuildArgs) -> anyhow::Result<()> {
    if !a.pgm_dir.is_dir() {
        return Err(usage_err(format!(
            "--pgm-dir {} is not a directory",
            a.pgm_dir.display()
        )));
    }
    let mut tiles =
        split_and_tile(&a.pgm_dir, a.seed).map_err(|e| data_err(format!("{e}")))?;
    train_val_split(&mut tiles, a.seed);
    let records = materialize_pair_dataset(&tiles, a.qf1, a.qf2, &a.out).map_err(|e| {
        if matches!(e, dataset::DatasetError::Invalid(_)) {
            usage_err(format!("{e}"))
        } else {
            data_err(format!("{e}"))
        }
    })?;
    let manifest_path = a.out.join(format!("{}_{}", a.qf1, a.qf2)).join("manifest.jsonl");
    write_manifest(&records, &manifest_path).map_err(|e| data_err(format!("{e}")))?;
    println!(
        "{} tiles -> {} files, manifest {}",
        tiles.len(),
        records.len(),
        manifest_path.display()
    );
    Ok(())
}

fn network_config(a: &TrainArgs) -> NetworkConfig {
    NetworkConfig {
        use_intra_branches: !a.no_intra,
        use_abs: !a.no_abs,
        use_bn: !a.no_bn,
        activation: match a.activation {
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Relu => Activation::Relu,
        },
        pooling: match a.pool {
            PoolArg::Avg => Pooling::Avg,
            PoolArg::Max => Pooling::Max,
        },
        fc1_units: a.fc1,
        ..NetworkConfig::default()
    }
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    if a.batch < 2 || a.batch % 2 != 0 {
        return Err(usage_err("--batch must be an even number >= 2"));
    }
    if a.epochs == 0 || a.fc1 == 0 {
        return Err(usage_err("--epochs and --fc1 must be positive"));
    }
    let started = Instant::now();
    let records = read_manifest_checked(&a.manifest)?;
    let (qf1, qf2) = manifest_qfs(&records)?;
    let train_pairs =
        load_pairs::<f32>(&records, Split::Train).map_err(|e| data_err(format!("{e}")))?;
    let val_pairs =
        load_pairs::<f32>(&records, Split::Val).map_err(|e| data_err(format!("{e}")))?;

    let cfg = network_config(&a);
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        lr0: a.lr,
        validate_from_epoch: a.validate_from,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let outcome =
        train_model(&train_pairs, &val_pairs, &cfg, &tc).map_err(|e| training_err(format!("{e}")))?;

    let meta = CheckpointMeta {
        epoch: outcome.best_epoch as u32,
        val_acc: outcome.best_val_acc,
        seed: a.seed,
        qf1: Some(qf1),
        qf2: Some(qf2),
    };
    let mut f = fs::File::create(&a.out_ckpt)
        .with_context(|| format!("creating {}", a.out_ckpt.display()))?;
    save_checkpoint(&mut f, &outcome.best, &meta).map_err(|e| data_err(format!("{e}")))?;

    let mut report = RunReport::new(command_echo(), a.seed);
    report.network = Some(cfg);
    report.training = Some(tc);
    report.qf1 = Some(qf1);
    report.qf2 = Some(qf2);
    report.curves = outcome.history.iter().map(Into::into).collect();
    report.best_epoch = Some(outcome.best_epoch);
    report.best_val_acc = outcome.best_val_acc;
    if a.with_test {
        let test_pairs =
            load_pairs::<f32>(&records, Split::Test).map_err(|e| data_err(format!("{e}")))?;
        let m = evaluate(&outcome.best, &pairs_to_samples(&test_pairs))
            .map_err(|e| training_err(format!("{e}")))?;
        report.test_accuracy = Some(m.accuracy);
    }
    eprintln!("wall time {:.1}s", started.elapsed().as_secs_f64());
    report.validate()?;
    let report_path = a
        .report
        .unwrap_or_else(|| a.out_ckpt.with_extension("report.json"));
    write_json(&report_path, &report)?;
    println!(
        "trained {} epochs, best epoch {} (val {:?}), checkpoint {}",
        a.epochs,
        outcome.best_epoch,
        outcome.best_val_acc,
        a.out_ckpt.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    if a.matrix {
        let dir = a
            .fragments
            .ok_or_else(|| usage_err("--matrix requires --fragments"))?;
        if a.ckpt.is_some() || a.manifest.is_some() {
            return Err(usage_err("--matrix conflicts with --ckpt/--manifest"));
        }
        let mut cells = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
            .collect();
        paths.sort();
        for p in paths {
            let r: RunReport = serde_json::from_str(&fs::read_to_string(&p)?)
                .map_err(|e| data_err(format!("{}: {e}", p.display())))?;
            match (r.qf1, r.qf2, r.test_accuracy) {
                (Some(qf1), Some(qf2), Some(acc)) => cells.push((qf1, qf2, acc)),
                _ => {
                    return Err(data_err(format!(
                        "{}: fragment lacks qf1/qf2/test_accuracy",
                        p.display()
                    )))
                }
            }
        }
        let matrix = AccuracyMatrix::from_cells(&cells).map_err(|e| data_err(format!("{e}")))?;
        print!("{}", matrix.render());
        if let Some(out) = a.out {
            write_json(&out, &matrix)?;
        }
        return Ok(());
    }

    let ckpt_path = a.ckpt.ok_or_else(|| usage_err("--ckpt is required"))?;
    let manifest_path = a.manifest.ok_or_else(|| usage_err("--manifest is required"))?;
    let started = Instant::now();
    let f = fs::File::open(&ckpt_path)
        .map_err(|e| data_err(format!("{}: {e}", ckpt_path.display())))?;
    let (params, meta) = load_checkpoint(f).map_err(|e| data_err(format!("{e}")))?;
    let records = read_manifest_checked(&manifest_path)?;
    let split: Split = a.split.into();
    let pairs = load_pairs::<f32>(&records, split).map_err(|e| data_err(format!("{e}")))?;
    if pairs.is_empty() {
        return Err(data_err(format!("split {split:?} is empty")));
    }
    let m = evaluate(&params, &pairs_to_samples(&pairs))
        .map_err(|e| training_err(format!("{e}")))?;
    println!("accuracy {:.4} on {} samples", m.accuracy, m.n);

    let mut report = RunReport::new(command_echo(), meta.seed);
    report.qf1 = meta.qf1;
    report.qf2 = meta.qf2;
    report.test_accuracy = Some(m.accuracy);
    eprintln!("wall time {:.1}s", started.elapsed().as_secs_f64());
    report.validate()?;
    if let Some(path) = a.report {
        write_json(&path, &report)?;
    }
    Ok(())
}

fn split_features(
    records: &[ManifestRecord],
    split: Split,
) -> anyhow::Result<Vec<(Vec<f64>, usize)>> {
    let mut rows = Vec::new();
    let mut selected: Vec<&ManifestRecord> =
        records.iter().filter(|r| r.split == split).collect();
    selected.sort_by(|a, b| (&a.tile_id, a.label == Label::Double).cmp(&(&b.tile_id, b.label == Label::Double)));
    for r in selected {
        let bytes = fs::read(&r.file_path)
            .map_err(|e| data_err(format!("{}: {e}", r.file_path)))?;
        let c = decode_to_coeffs(&bytes).map_err(|e| data_err(format!("{}: {e}", r.file_path)))?;
        let label = usize::from(r.label == Label::Double);
        rows.push((extract_mbfdf(&c), label));
    }
    if rows.is_empty() {
        return Err(data_err(format!("split {split:?} is empty")));
    }
    Ok(rows)
}

fn cmd_mbfdf_train(
    manifest: PathBuf,
    out_model: PathBuf,
    csv: Option<PathBuf>,
) -> anyhow::Result<()> {
    let records = read_manifest_checked(&manifest)?;
    let rows = split_features(&records, Split::Train)?;
    if let Some(csv_path) = &csv {
        let mut f = fs::File::create(csv_path)
            .with_context(|| format!("creating {}", csv_path.display()))?;
        write_features_csv(&rows, &mut f)?;
    }
    let class0: Vec<Vec<f64>> = rows
        .iter()
        .filter(|(_, l)| *l == 0)
        .map(|(f, _)| f.clone())
        .collect();
    let class1: Vec<Vec<f64>> = rows
        .iter()
        .filter(|(_, l)| *l == 1)
        .map(|(f, _)| f.clone())
        .collect();
    let model = fld_train(&class0, &class1).map_err(|e| training_err(format!("{e}")))?;
    write_json(
        &out_model,
        &FldModelFile {
            schema: FLD_SCHEMA.to_string(),
            w: model.w.clone(),
            threshold: model.threshold,
        },
    )?;
    let correct = rows
        .iter()
        .filter(|(f, l)| fld_classify(&model, f) == *l)
        .count();
    println!(
        "fitted on {} samples, train accuracy {:.4}, model {}",
        rows.len(),
        correct as f64 / rows.len() as f64,
        out_model.display()
    );
    Ok(())
}

fn cmd_mbfdf_eval(
    manifest: PathBuf,
    model_path: PathBuf,
    split: SplitArg,
    report_path: Option<PathBuf>,
) -> anyhow::Result<()> {
    let started = Instant::now();
    let file: FldModelFile = serde_json::from_str(
        &fs::read_to_string(&model_path)
            .map_err(|e| data_err(format!("{}: {e}", model_path.display())))?,
    )
    .map_err(|e| data_err(format!("{}: {e}", model_path.display())))?;
    if file.schema != FLD_SCHEMA {
        return Err(data_err(format!("unexpected model schema {}", file.schema)));
    }
    let model = FldModel {
        w: file.w,
        threshold: file.threshold,
    };
    let records = read_manifest_checked(&manifest)?;
    let rows = split_features(&records, split.into())?;
    let correct = rows
        .iter()
        .filter(|(f, l)| fld_classify(&model, f) == *l)
        .count();
    let accuracy = correct as f64 / rows.len() as f64;
    println!("accuracy {:.4} on {} samples", accuracy, rows.len());
    if let Some(path) = report_path {
        let (qf1, qf2) = manifest_qfs(&records)?;
        let mut report = RunReport::new(command_echo(), 0);
        report.qf1 = Some(qf1);
        report.qf2 = Some(qf2);
        report.test_accuracy = Some(accuracy);
        eprintln!("wall time {:.1}s", started.elapsed().as_secs_f64());
        report.validate()?;
        write_json(&path, &report)?;
    }
    Ok(())
}

fn cmd_extract_dct(a: ExtractDctArgs) -> anyhow::Result<()> {
    if a.out.is_none() && a.csv.is_none() {
        return Err(usage_err("one of --out or --csv is required"));
    }
    let bytes = fs::read(&a.r#in).map_err(|e| data_err(format!("{}: {e}", a.r#in.display())))?;
    let c = decode_to_coeffs(&bytes).map_err(|e| data_err(format!("{e}")))?;
    let t = assemble_subbands::<f32>(&c);
    if let Some(out) = &a.out {
        let mut f = fs::File::create(out)
            .with_context(|| format!("creating {}", out.display()))?;
        write_tensor_dump(&t, &mut f)?;
        println!(
            "dump {}x{}x{} -> {}",
            t.shape()[0],
            t.shape()[1],
            t.shape()[2],
            out.display()
        );
    }
    if let Some(csv) = &a.csv {
        let mut f = fs::File::create(csv)
            .with_context(|| format!("creating {}", csv.display()))?;
        let header: Vec<String> = (1..=SUBBANDS).map(|m| format!("m{m}")).collect();
        writeln!(f, "row,col,{}", header.join(","))?;
        for i in 0..t.shape()[0] {
            for j in 0..t.shape()[1] {
                let vals: Vec<String> = (0..SUBBANDS)
                    .map(|k| format!("{}", t.get3(i, j, k) as i64))
                    .collect();
                writeln!(f, "{i},{j},{}", vals.join(","))?;
            }
        }
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> anyhow::Result<()> {
    let f = fs::File::open(&a.ckpt)
        .map_err(|e| data_err(format!("{}: {e}", a.ckpt.display())))?;
    let (params, _) = load_checkpoint(f).map_err(|e| data_err(format!("{e}")))?;
    let bytes = fs::read(&a.r#in).map_err(|e| data_err(format!("{}: {e}", a.r#in.display())))?;
    let c = decode_to_coeffs(&bytes).map_err(|e| data_err(format!("{e}")))?;
    let t = assemble_subbands::<f32>(&c);
    let probs = djpeg_core::model::forward_infer(&params, &t)
        .map_err(|e| data_err(format!("{e}")))?;
    let (label, p) = if probs[CLASS_DOUBLE] > probs[1 - CLASS_DOUBLE] {
        ("double", probs[CLASS_DOUBLE])
    } else {
        ("single", probs[1 - CLASS_DOUBLE])
    };
    // the output grammar is `<label> p=0.xxxx`; clamp below 1 so a saturated
    // softmax still matches it
    println!("{label} p={:.4}", f64::from(p).min(0.9999));
    Ok(())
}

fn command_echo() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}
