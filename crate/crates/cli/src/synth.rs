use std::path::PathBuf;

use anyhow::{Context, Result};
use evt_core::event_io::{generate_synthetic, write_stream, Format, Motion, SynthSpec};

use crate::usage;

#[derive(clap::Args)]
pub struct Args {
    /// Motion class: 0 bar right, 1 bar left, 2 bar down, 3 bar up,
    /// 4 dot clockwise, 5 dot counter-clockwise.
    #[arg(long = "class", default_value_t = 0)]
    class_id: u32,
    #[arg(long, default_value_t = 240_000)]
    duration_us: u64,
    #[arg(long, default_value_t = 128)]
    width: u16,
    #[arg(long, default_value_t = 128)]
    height: u16,
    /// Expected signal events per pixel crossed by an edge.
    #[arg(long, default_value_t = 1.0)]
    signal_rate: f64,
    /// Expected noise events per pixel per second.
    #[arg(long, default_value_t = 0.5)]
    noise_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (single-stream mode).
    #[arg(long, conflicts_with = "dataset")]
    out: Option<PathBuf>,
    /// Output directory for a labeled dataset of `--count` streams.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 100, requires = "dataset")]
    count: usize,
    /// Number of motion classes cycled through in dataset mode.
    #[arg(long, default_value_t = 4, requires = "dataset")]
    classes: u32,
    /// `binary` (EVT1) or `csv`; defaults to the output extension.
    #[arg(long)]
    format: Option<String>,
}

fn format_for(args: &Args, path: &std::path::Path) -> Result<Format> {
    match &args.format {
        Some(f) => f.parse().map_err(|e: evt_core::Error| usage(e.to_string())),
        None => Ok(Format::from_path(path)),
    }
}

pub fn run(args: Args) -> Result<()> {
    let spec = |class_id, seed| SynthSpec {
        class_id,
        duration_us: args.duration_us,
        width: args.width,
        height: args.height,
        signal_rate: args.signal_rate,
        noise_rate: args.noise_rate,
        seed,
    };
    if let Some(out) = &args.out {
        let stream = generate_synthetic(&spec(args.class_id, args.seed))
            .map_err(|e| usage(e.to_string()))?;
        write_stream(&stream, out, format_for(&args, out)?)
            .with_context(|| format!("writing {}", out.display()))?;
        outln!(
            "synth file={} class={} events={} seed={}",
            out.display(),
            args.class_id,
            stream.len(),
            args.seed
        );
        return Ok(());
    }
    let Some(dir) = &args.dataset else {
        return Err(usage("synth needs --out or --dataset"));
    };
    if args.classes == 0 || args.classes as usize > Motion::ALL.len() {
        return Err(usage(format!(
            "--classes must lie in 1..={}",
            Motion::ALL.len()
        )));
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ext = match &args.format {
        Some(f) if f.eq_ignore_ascii_case("csv") => "csv",
        _ => "evt",
    };
    for i in 0..args.count {
        let class = i as u32 % args.classes;
        let seed = args.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let stream = generate_synthetic(&spec(class, seed)).map_err(|e| usage(e.to_string()))?;
        let path = dir.join(format!("s{i:05}_c{class}.{ext}"));
        write_stream(&stream, &path, format_for(&args, &path)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    outln!(
        "synth dataset={} streams={} classes={} seed={}",
        dir.display(),
        args.count,
        args.classes,
        args.seed
    );
    Ok(())
}
