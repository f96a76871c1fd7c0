//! Command-line front end for the tilestream simulator.
//!
//! Subcommands:
//! * `simulate`      — replay one session, write results.csv + summary.json
//! * `train`         — train the bitrate allocator, write checkpoint + log
//! * `evaluate`      — mean-QoE table over policies/ablations/scales/weights
//! * `predict`       — run the viewport pipeline only, write predictions.csv
//! * `classify`      — per-chunk priority counts and map dumps
//! * `convert-trace` — normalize external bandwidth / head logs
//!
//! Exit codes: 0 success, 2 configuration or validation error, 1 runtime
//! failure.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tilestream::experiment::{
    cmd_classify, cmd_evaluate, cmd_predict, cmd_simulate, cmd_train, PolicyConfig, RunConfig,
};
use tilestream::trace_io::{convert_hsdpa_log, BandwidthTrace, HeadTrace, QuatOrder, TimeUnit};

#[derive(Parser)]
#[command(name = "tilestream", version, about = "Tile-based 360° streaming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Replay one session under the configured policy.
    Simulate(ConfigArgs),
    /// Train the bitrate allocator over the configured traces.
    Train(ConfigArgs),
    /// Compare policies across ablations, bandwidth scales, and weights.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Policies to compare: `fixed-level-K`, `greedy-buffer`, or
        /// `checkpoint:<path>`. Defaults to every fixed level plus
        /// greedy-buffer.
        #[arg(long = "policy")]
        policies: Vec<String>,
    },
    /// Run the viewport prediction pipeline and report accuracy.
    Predict(ConfigArgs),
    /// Report per-chunk tile priority counts and maps.
    Classify(ConfigArgs),
    /// Normalize an external trace into the native CSV formats.
    ConvertTrace(ConvertArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Trace kind to convert.
    #[arg(long, value_enum)]
    kind: TraceKind,
    /// Source file.
    #[arg(long)]
    input: PathBuf,
    /// Destination file.
    #[arg(long)]
    output: PathBuf,
    /// Bandwidth source format.
    #[arg(long, value_enum, default_value_t = BandwidthFormat::Hsdpa)]
    format: BandwidthFormat,
    /// Unit of the source timestamp column.
    #[arg(long, value_enum, default_value_t = TimeUnitArg::Ms)]
    time_unit: TimeUnitArg,
    /// Throughput multiplier (4.0 extends a 3G log to 4G conditions).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Quaternion component order of a head log.
    #[arg(long, value_enum, default_value_t = QuatOrderArg::Wxyz)]
    quat_order: QuatOrderArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceKind {
    Bandwidth,
    Head,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandwidthFormat {
    /// Whitespace-separated `timestamp bytes` measurement lines.
    Hsdpa,
    /// Already in the native `time_s,throughput_mbps` CSV format.
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeUnitArg {
    S,
    Ms,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuatOrderArg {
    Wxyz,
    Xyzw,
}

fn parse_policy(raw: &str) -> anyhow::Result<PolicyConfig> {
    if let Some(level) = raw.strip_prefix("fixed-level-") {
        let level: usize = level
            .parse()
            .with_context(|| format!("bad policy `{raw}`"))?;
        return Ok(PolicyConfig::FixedLevel { level });
    }
    if raw == "greedy-buffer" {
        return Ok(PolicyConfig::GreedyBuffer);
    }
    if let Some(path) = raw.strip_prefix("checkpoint:") {
        return Ok(PolicyConfig::Checkpoint {
            path: PathBuf::from(path),
        });
    }
    anyhow::bail!("unknown policy `{raw}` (want fixed-level-K, greedy-buffer, checkpoint:<path>)")
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let cfg = args.load()?;
            let summary = cmd_simulate(&cfg)?;
            println!("policy            {}", summary.policy);
            println!("chunks            {}", summary.chunks);
            println!("session QoE       {:.6}", summary.session_qoe);
            println!("mean chunk QoE    {:.6}", summary.mean_chunk_qoe);
            println!("rebuffer total    {:.3} s", summary.rebuffer_total_s);
            println!("utilization E     {:.6}", summary.utilization);
            println!("pred. accuracy    {:.4}", summary.prediction_accuracy);
            println!("results           {}", cfg.out_dir.join("results.csv").display());
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            let ckpt = cmd_train(&cfg)?;
            println!("checkpoint        {}", ckpt.display());
            println!(
                "training log      {}",
                cfg.out_dir.join("training_log.csv").display()
            );
        }
        Command::Evaluate { config, policies } => {
            let cfg = config.load()?;
            let policies = if policies.is_empty() {
                let mut ps: Vec<PolicyConfig> = (0..cfg.ladder_mbps.len())
                    .map(|level| PolicyConfig::FixedLevel { level })
                    .collect();
                ps.push(PolicyConfig::GreedyBuffer);
                ps
            } else {
                policies
                    .iter()
                    .map(|p| parse_policy(p))
                    .collect::<anyhow::Result<Vec<_>>>()?
            };
            let rows = cmd_evaluate(&cfg, &policies)?;
            println!(
                "{:<16} {:<24} {:>6} {:>13} {:>12} {:>10} {:>9}",
                "policy", "ablation", "scale", "weights", "session QoE", "util E", "accuracy"
            );
            for r in &rows {
                println!(
                    "{:<16} {:<24} {:>6} {:>13} {:>12.4} {:>10.4} {:>9.4}",
                    r.policy,
                    r.ablation,
                    r.scale,
                    format!("{}|{}|{}|{}", r.weights[0], r.weights[1], r.weights[2], r.weights[3]),
                    r.session_qoe,
                    r.utilization,
                    r.accuracy
                );
            }
            println!("table             {}", cfg.out_dir.join("evaluation.csv").display());
        }
        Command::Predict(args) => {
            let cfg = args.load()?;
            let accuracy = cmd_predict(&cfg)?;
            println!("mean accuracy     {accuracy:.4}");
            println!(
                "predictions       {}",
                cfg.out_dir.join("predictions.csv").display()
            );
        }
        Command::Classify(args) => {
            let cfg = args.load()?;
            cmd_classify(&cfg)?;
            println!(
                "counts            {}",
                cfg.out_dir.join("classification.csv").display()
            );
            println!(
                "maps              {}",
                cfg.out_dir.join("priority_maps.txt").display()
            );
        }
        Command::ConvertTrace(args) => {
            match args.kind {
                TraceKind::Bandwidth => {
                    let unit = match args.time_unit {
                        TimeUnitArg::S => TimeUnit::Seconds,
                        TimeUnitArg::Ms => TimeUnit::Milliseconds,
                    };
                    let trace = match args.format {
                        BandwidthFormat::Hsdpa => {
                            convert_hsdpa_log(&args.input, unit, args.scale)?
                        }
                        BandwidthFormat::Csv => {
                            BandwidthTrace::load(&args.input)?.scaled(args.scale)?
                        }
                    };
                    trace.save(&args.output)?;
                    println!(
                        "wrote {} samples to {}",
                        trace.len(),
                        args.output.display()
                    );
                }
                TraceKind::Head => {
                    let order = match args.quat_order {
                        QuatOrderArg::Wxyz => QuatOrder::Wxyz,
                        QuatOrderArg::Xyzw => QuatOrder::Xyzw,
                    };
                    let trace = HeadTrace::load_with_order(&args.input, order)?;
                    trace.save(&args.output)?;
                    println!(
                        "wrote {} samples to {}",
                        trace.samples().len(),
                        args.output.display()
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::init();
    match run() {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err
                .chain()
                .filter_map(|c| c.downcast_ref::<tilestream::Error>())
                .any(|e| e.is_usage());
            std::process::exit(if usage { 2 } else { 1 });
        }
    }
}
