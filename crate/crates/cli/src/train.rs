use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use evt_core::backbone::Checkpoint;
use evt_core::training::train_with;

use crate::{data, usage, ConfigArgs};

#[derive(clap::Args)]
pub struct Args {
    /// Directory (or files) of labeled training streams.
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    /// Directory (or files) of labeled test streams, evaluated every epoch.
    #[arg(long, num_args = 1..)]
    test: Vec<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the checkpoint, metrics and effective config.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    let train: Vec<_> = data::load_all(&args.train)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let test: Vec<_> = data::load_all(&args.test)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let first = train
        .first()
        .ok_or_else(|| anyhow::anyhow!("no training streams found"))?;
    let max_label = train
        .iter()
        .chain(&test)
        .filter_map(|s| s.label())
        .max()
        .unwrap_or(0) as usize;
    if max_label + 1 > cfg.model.num_classes {
        outln!(
            "note num_classes raised from {} to {}",
            cfg.model.num_classes,
            max_label + 1
        );
        cfg.model.num_classes = max_label + 1;
    }
    cfg.model = cfg
        .model
        .clone()
        .with_sensor(first.width(), first.height(), &cfg.repr);
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    cfg.save(args.out.join("config.json"))?;
    outln!(
        "train streams={} test_streams={} classes={} grid={}x{} seed={}",
        train.len(),
        test.len(),
        cfg.model.num_classes,
        cfg.model.grid_h,
        cfg.model.grid_w,
        cfg.train.seed
    );

    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v}"));
    let mut csv = String::from("epoch,lr,train_loss,train_accuracy,test_loss,test_accuracy\n");
    let report = train_with(&train, &test, &cfg.model, &cfg.repr, &cfg.train, |m| {
        outln!(
            "epoch epoch={} lr={} train_loss={} train_accuracy={} test_loss={} test_accuracy={}",
            m.epoch,
            m.lr,
            m.train_loss,
            m.train_accuracy,
            fmt(m.test_loss),
            fmt(m.test_accuracy)
        );
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            m.epoch,
            m.lr,
            m.train_loss,
            m.train_accuracy,
            fmt(m.test_loss),
            fmt(m.test_accuracy)
        )
        .unwrap();
    })?;
    std::fs::write(args.out.join("metrics.csv"), csv)?;
    let ckpt = args.out.join("checkpoint.evtc");
    Checkpoint::new(report.params, cfg.repr.clone()).save(&ckpt)?;
    let last = report.history.last();
    outln!(
        "final checkpoint={} epochs={} skipped_streams={} train_loss={} test_accuracy={}",
        ckpt.display(),
        report.history.len(),
        report.skipped,
        last.map_or_else(String::new, |m| m.train_loss.to_string()),
        fmt(last.and_then(|m| m.test_accuracy))
    );
    Ok(())
}
