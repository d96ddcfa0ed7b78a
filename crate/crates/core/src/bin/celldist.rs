use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use celldist::config::PipelineConfig;
use celldist::pipeline::{
    exit_code, init_threads_from_env, run_labelgen, run_pipeline, run_score, run_segment,
    run_synth, run_track, EXIT_EMPTY_RESULT,
};
use celldist::Result;

/// Cell/neighbor distance labels, watershed segmentation and lineage tracking.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    rho_mask: Option<f64>,
    #[arg(long, global = true)]
    rho_seed: Option<f64>,
    /// Smoothing per axis, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long, global = true)]
    delta_t: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// ROI extents per axis, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    roi: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Cell and neighbor distance maps from maskTTT.tif label frames.
    Labelgen {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        closing_radius: Option<usize>,
        #[arg(long)]
        exponent: Option<u32>,
    },
    /// Label frames from cellTTT.tif / neighborTTT.tif predictions.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Re-seed objects larger than 4/3 of the mean size.
        #[arg(long)]
        split: bool,
    },
    /// Lineage from maskTTT.tif (and optional tTTT.tif) frames.
    Track {
        #[arg(long)]
        input: PathBuf,
        /// Raw frames; defaults to the input directory.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Only track these objects of the first frame.
        #[arg(long, value_delimiter = ',')]
        marked: Option<Vec<u32>>,
    },
    /// Scores a tracking result against a reference.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        result: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Writes a synthetic sequence.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Runs the configured stages end to end.
    Pipeline {
        /// Output directory; overrides the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let seg = &mut cfg.segmentation;
    seg.rho_mask = common.rho_mask.unwrap_or(seg.rho_mask);
    seg.rho_seed = common.rho_seed.unwrap_or(seg.rho_seed);
    if common.sigma.is_some() {
        seg.sigma = common.sigma.clone();
    }
    let tr = &mut cfg.tracking;
    tr.delta_t = common.delta_t.unwrap_or(tr.delta_t);
    tr.alpha = common.alpha.unwrap_or(tr.alpha);
    tr.beta = common.beta.unwrap_or(tr.beta);
    if common.roi.is_some() {
        tr.roi_extent = common.roi.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = load(&cli.common)?;
    match cli.command {
        Command::Labelgen {
            input,
            output,
            closing_radius,
            exponent,
        } => {
            cfg.labelgen.closing_radius = closing_radius.unwrap_or(cfg.labelgen.closing_radius);
            cfg.labelgen.exponent = exponent.unwrap_or(cfg.labelgen.exponent);
            let n = run_labelgen(&input, &output, &cfg.labelgen)?;
            println!("labelgen: {n} objects");
        }
        Command::Segment {
            input,
            output,
            split,
        } => {
            cfg.segmentation.split_enabled |= split;
            let (n, empty) = run_segment(&input, &output, &cfg.segmentation)?;
            println!("segment: {n} objects");
            if !empty.is_empty() {
                eprintln!("warning: empty frames {empty:?}");
                return Ok(EXIT_EMPTY_RESULT);
            }
        }
        Command::Track {
            input,
            raw,
            output,
            marked,
        } => {
            cfg.tracking.track_all = marked.is_none();
            let raw = raw.unwrap_or_else(|| input.clone());
            let (n, moved) = run_track(
                &input,
                Some(&raw),
                &output,
                &cfg.tracking,
                marked.as_deref(),
            )?;
            println!("track: {n} tracks, motion_estimated={moved}");
            if n == 0 {
                return Ok(EXIT_EMPTY_RESULT);
            }
        }
        Command::Score {
            reference,
            result,
            output,
        } => {
            let report = run_score(&reference, &result)?;
            print!("{report}");
            if let Some(path) = output {
                celldist::io::write_atomic(&path, report.to_string().as_bytes())?;
            }
        }
        Command::Synth {
            output,
            seed,
            frames,
            cells,
        } => {
            cfg.synth.seed = seed.unwrap_or(cfg.synth.seed);
            cfg.synth.frames = frames.unwrap_or(cfg.synth.frames);
            cfg.synth.n_cells = cells.unwrap_or(cfg.synth.n_cells);
            let n = run_synth(&output, &cfg.synth)?;
            println!("synth: {n} objects");
        }
        Command::Pipeline { output } => {
            if let Some(o) = output {
                cfg.output = o;
            }
            let report = run_pipeline(&cfg)?;
            if let Some(score) = report.score {
                print!("{score}");
            }
            if !report.warnings.is_empty() {
                return Ok(EXIT_EMPTY_RESULT);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::init();
    init_threads_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
