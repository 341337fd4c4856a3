use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use evt_core::perf::patch_stats;

use crate::{data, ConfigArgs};

#[derive(clap::Args)]
pub struct Args {
    /// Stream files or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the histogram here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let repr = args.config.resolve()?.repr;
    let streams: Vec<_> = data::load_all(&args.inputs)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let st = patch_stats(&streams, &repr)?;
    outln!(
        "summary streams={} windows={} mean_tokens={:.4} median_tokens={} mean_fraction={:.6}",
        streams.len(),
        st.windows,
        st.mean_tokens,
        st.median_tokens,
        st.mean_fraction
    );
    let mut csv = String::from("tokens,windows\n");
    for (t, n) in &st.histogram {
        writeln!(csv, "{t},{n}").unwrap();
    }
    match &args.csv {
        Some(p) => std::fs::write(p, csv)?,
        None => out!("{csv}"),
    }
    Ok(())
}
