use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use evt_core::backbone::{Checkpoint, ModelParams};
use evt_core::numeric::Section;
use evt_core::perf::{
    count_flops, measure_latency, measure_token_latency, FlopReport, LatencyOptions, LatencyReport,
};

use crate::{data, usage, ConfigArgs};

#[derive(clap::Args)]
pub struct Args {
    /// Activated patches per window for the FLOP count and the synthetic
    /// latency run.
    #[arg(long, default_value_t = 45)]
    tokens: usize,
    /// Sensor size `WxH` that fixes the patch grid.
    #[arg(long, default_value = "128x128")]
    sensor: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Benchmark a trained checkpoint instead of fresh parameters.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Time the windows of this stream instead of random tokens.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Synthetic windows to time.
    #[arg(long, default_value_t = 10)]
    windows: usize,
    /// Include token building in the timed span (with --input).
    #[arg(long)]
    include_repr: bool,
    /// Skip the latency measurement.
    #[arg(long)]
    no_latency: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write flops.csv and latency.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_sensor(s: &str) -> Result<(u16, u16)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| usage(format!("--sensor {s:?} is not WxH")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<u16>()
            .map_err(|_| usage(format!("bad sensor size {s:?}")))
    };
    Ok((p(w)?, p(h)?))
}

fn flops_csv(r: &FlopReport) -> String {
    let mut csv = String::from("component,flops\n");
    for (name, s) in [
        ("ff1", Section::Ff1),
        ("ff2", Section::Ff2),
        ("cross_attention", Section::CrossAttention),
        ("self_attention", Section::SelfAttention),
        ("memory", Section::Memory),
        ("classifier", Section::Classifier),
    ] {
        writeln!(csv, "{name},{}", r.get(s)).unwrap();
    }
    writeln!(csv, "total,{}", r.total).unwrap();
    csv
}

fn latency_csv(r: &LatencyReport) -> String {
    let mut csv = String::from("window,tokens,rep,ms\n");
    for (k, (reps, t)) in r.samples_ms.iter().zip(&r.tokens).enumerate() {
        for (i, ms) in reps.iter().enumerate() {
            writeln!(csv, "{k},{t},{i},{ms}").unwrap();
        }
    }
    csv
}

pub fn run(args: Args) -> Result<()> {
    if args.tokens == 0 {
        return Err(usage("--tokens must be at least 1"));
    }
    let (params, repr) = match &args.checkpoint {
        Some(p) => {
            let c = Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?;
            (c.params, c.repr)
        }
        None => {
            let cfg = args.config.resolve()?;
            let (w, h) = parse_sensor(&args.sensor)?;
            let model = cfg.model.clone().with_sensor(w, h, &cfg.repr);
            let params = ModelParams::init(&model, args.seed).map_err(|e| usage(e.to_string()))?;
            (params, cfg.repr)
        }
    };
    let model = params.config();
    let flops = count_flops(model, args.tokens);
    out!("{}", flops_csv(&flops));
    outln!(
        "flops tokens={} total={} gflops={:.4} params={} mparams={:.4} grid={}x{}",
        flops.tokens,
        flops.total,
        flops.total as f64 / 1e9,
        flops.params,
        flops.params as f64 / 1e6,
        model.grid_h,
        model.grid_w
    );
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("flops.csv"), flops_csv(&flops))?;
    }
    if args.no_latency {
        return Ok(());
    }
    let opts = LatencyOptions {
        warmup: args.warmup,
        reps: args.reps,
        include_repr: args.include_repr,
    };
    let budget_ms = repr.delta_t_us as f64 / 1e3;
    let lat = match &args.input {
        Some(p) => measure_latency(&data::load(p)?, &params, &repr, opts)?,
        None => measure_token_latency(
            &params,
            args.tokens,
            args.windows,
            budget_ms,
            opts,
            args.seed,
        )
        .map_err(|e| usage(e.to_string()))?,
    };
    outln!(
        "latency samples={} mean_ms={:.4} median_ms={:.4} p95_ms={:.4} budget_ms={} budget_met={}",
        lat.samples_ms.iter().map(Vec::len).sum::<usize>(),
        lat.mean_ms,
        lat.median_ms,
        lat.p95_ms,
        lat.budget_ms,
        lat.budget_met
    );
    if let Some(dir) = &args.out {
        std::fs::write(dir.join("latency.csv"), latency_csv(&lat))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensor_sizes() {
        assert_eq!(parse_sensor("240x180").unwrap(), (240, 180));
        assert_eq!(parse_sensor("64X32").unwrap(), (64, 32));
        for bad in ["240", "x", "0x-1", "70000x1"] {
            assert!(parse_sensor(bad)
                .unwrap_err()
                .downcast_ref::<crate::Usage>()
                .is_some());
        }
    }

    #[test]
    fn flops_csv_lists_every_component() {
        let r = count_flops(&evt_core::backbone::ModelConfig::default(), 45);
        let csv = flops_csv(&r);
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.ends_with(&format!("total,{}\n", r.total)));
    }
}
