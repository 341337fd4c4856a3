use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use evt_core::backbone::{
    argmax, classify, memory_update, process_window, Checkpoint, LatentMemory,
};
use evt_core::representation::window_iterator;
use evt_core::Error;

use crate::data;

#[derive(clap::Args)]
pub struct Args {
    /// Stream files or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Write cross-attention weights (one CSV per stream, window and head)
    /// into this directory.
    #[arg(long)]
    dump_attention: Option<PathBuf>,
    /// Print one timing line per window.
    #[arg(long)]
    per_window: bool,
}

fn dump(
    dir: &Path,
    stem: &str,
    window: usize,
    grid: &[(usize, usize)],
    heads: &[evt_core::numeric::Matrix],
) -> Result<()> {
    for (h, a) in heads.iter().enumerate() {
        let mut csv = String::from("latent");
        for (r, c) in grid {
            write!(csv, ",r{r}c{c}").unwrap();
        }
        csv.push('\n');
        for i in 0..a.rows() {
            write!(csv, "{i}").unwrap();
            for v in a.row(i) {
                write!(csv, ",{v}").unwrap();
            }
            csv.push('\n');
        }
        let p = dir.join(format!("{stem}_w{window:04}_h{h}.csv"));
        std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let (params, repr) = (&ckpt.params, &ckpt.repr);
    if let Some(d) = &args.dump_attention {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let paths = data::stream_paths(&args.inputs)?;
    let (mut labeled, mut correct) = (0usize, 0usize);
    for path in &paths {
        let stream = data::load(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("stream");
        let mut memory = LatentMemory::new(params);
        let mut times = Vec::new();
        for (k, w) in window_iterator(&stream, repr).enumerate() {
            let start = Instant::now();
            let out = process_window(&w.tokens, &memory, params, args.dump_attention.is_some())
                .with_context(|| format!("{} window {k}", path.display()))?;
            memory = memory_update(&memory, &out.update)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            times.push(ms);
            if args.per_window {
                outln!(
                    "window stream={} index={} tokens={} ms={:.4}",
                    path.display(),
                    k,
                    w.token_count(),
                    ms
                );
            }
            if let (Some(dir), Some(att)) = (&args.dump_attention, &out.attention) {
                let grid: Vec<_> = w.tokens.iter().map(|t| (t.grid_row, t.grid_col)).collect();
                dump(dir, stem, k, &grid, att)?;
            }
        }
        if memory.windows_seen() == 0 {
            return Err(Error::NoInformation).with_context(|| path.display().to_string());
        }
        let lp = classify(&memory, params)?;
        let predicted = argmax(&lp);
        let probs: Vec<String> = lp.iter().map(|v| format!("{:.6}", v.exp())).collect();
        let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
        let label = stream
            .label()
            .map_or_else(|| "none".to_owned(), |l| l.to_string());
        outln!(
            "stream path={} predicted={} label={} windows={} mean_window_ms={:.4} probs={}",
            path.display(),
            predicted,
            label,
            times.len(),
            mean_ms,
            probs.join(";")
        );
        if let Some(l) = stream.label() {
            labeled += 1;
            correct += usize::from(l as usize == predicted);
        }
    }
    if labeled > 0 {
        outln!(
            "accuracy accuracy={} correct={} labeled={}",
            correct as f64 / labeled as f64,
            correct,
            labeled
        );
    }
    Ok(())
}
