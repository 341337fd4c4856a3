use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use evt_core::representation::{render_activation_grid, window_iterator};

use crate::{data, ConfigArgs};

#[derive(clap::Args)]
pub struct Args {
    /// Stream file (EVT1, or CSV by extension).
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Print each window's activation grid (`#` activated, `.` not).
    #[arg(long)]
    grid: bool,
    /// Write every token as a CSV row to this file.
    #[arg(long)]
    tokens_csv: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let cfg = args.config.resolve()?.repr;
    let stream = data::load(&args.input)?;
    let (gh, gw) = cfg.grid_dims(stream.width(), stream.height());
    let (dx, dy) = (
        usize::from(stream.width()) - gw * cfg.patch_size,
        usize::from(stream.height()) - gh * cfg.patch_size,
    );
    outln!(
        "stream events={} width={} height={} grid={}x{} discarded_cols={} discarded_rows={} threshold_pixels={}",
        stream.len(),
        stream.width(),
        stream.height(),
        gh,
        gw,
        dx,
        dy,
        cfg.activation_threshold()
    );
    let mut csv = String::new();
    if args.tokens_csv.is_some() {
        let n = cfg.token_len();
        csv.push_str("window,grid_row,grid_col");
        for i in 0..n {
            write!(csv, ",v{i}").unwrap();
        }
        csv.push('\n');
    }
    for (k, w) in window_iterator(&stream, &cfg).enumerate() {
        outln!(
            "window index={} start_us={} end_us={} tokens={} exhausted={}",
            k,
            w.window_start,
            w.window_end,
            w.token_count(),
            w.exhausted
        );
        if args.grid {
            out!("{}", render_activation_grid(&w.tokens, gh, gw));
        }
        if args.tokens_csv.is_some() {
            for t in &w.tokens {
                write!(csv, "{k},{},{}", t.grid_row, t.grid_col).unwrap();
                for v in &t.values {
                    write!(csv, ",{v}").unwrap();
                }
                csv.push('\n');
            }
        }
    }
    if let Some(p) = &args.tokens_csv {
        std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
