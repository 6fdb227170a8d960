use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ptrack::emloop::history_csv;
use ptrack::io::{read_config, read_homography, read_patterns, read_tracks, write_patterns, write_plot, write_tracks, TrackFormat};
use ptrack::metrics::{MatchConfig, Report, CSV_HEADER};
use ptrack::pipeline::{learn_patterns, track, unsupervised};
use ptrack::synth::{corrupt, generate_scene, CorruptOp, SceneSpec};
use ptrack::{Config, Error, PatternSet, Track};

#[derive(Parser)]
#[command(name = "ptrack", version, about = "Refine pedestrian tracks with learned motion patterns")]
struct Cli {
    /// Flat key=value configuration file, applied before per-key flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: ConfigFlags,

    #[command(subcommand)]
    command: Command,
}

/// One flag per configuration key.
#[derive(Args, Default)]
struct ConfigFlags {
    #[arg(long, global = true, value_name = "M")]
    d1: Option<String>,
    #[arg(long, global = true, value_name = "M")]
    d2: Option<String>,
    #[arg(long, global = true, value_name = "S")]
    dt: Option<String>,
    #[arg(long, global = true)]
    fps: Option<String>,
    #[arg(long, global = true, value_name = "BOOL")]
    remove_empty: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    alpha_p: Option<String>,
    #[arg(long, global = true, value_name = "COST|auto")]
    alpha_c: Option<String>,
    #[arg(long, global = true)]
    eps: Option<String>,
    #[arg(long, global = true)]
    eps_empty: Option<String>,
    /// Comma-separated candidate widths.
    #[arg(long, global = true, value_name = "W,...")]
    widths: Option<String>,
    #[arg(long, global = true, value_name = "absolute|relative")]
    width_mode: Option<String>,
    #[arg(long, global = true, value_name = "M2|auto")]
    tracking_area: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    link_iters: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    mine_iters: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 14] {
        [
            ("d1", &self.d1),
            ("d2", &self.d2),
            ("dt", &self.dt),
            ("fps", &self.fps),
            ("remove_empty", &self.remove_empty),
            ("alpha_p", &self.alpha_p),
            ("alpha_c", &self.alpha_c),
            ("eps", &self.eps),
            ("eps_empty", &self.eps_empty),
            ("width_mode", &self.width_mode),
            ("widths", &self.widths),
            ("tracking_area", &self.tracking_area),
            ("link_iters", &self.link_iters),
            ("mine_iters", &self.mine_iters),
        ]
    }
}

#[derive(Args)]
struct TrackInput {
    #[arg(long, default_value = "plain", value_name = "plain|mot")]
    format: TrackFormat,
    /// 3x3 image-to-ground homography, used for MOT rows without x, y.
    #[arg(long, value_name = "FILE")]
    homography: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Re-link input tracks under fixed patterns.
    Track {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        read: TrackInput,
    },
    /// Mine patterns from ground-truth tracks.
    LearnPatterns {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        read: TrackInput,
    },
    /// Learn patterns and refined tracks from tracker output alone.
    Unsupervised {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_name = "FILE")]
        patterns_out: PathBuf,
        /// Stop raising the cost budget once this many patterns are found.
        /// Defaults to alpha_p.
        #[arg(long)]
        max_patterns: Option<usize>,
        /// Per-iteration scores as CSV.
        #[arg(long, value_name = "FILE")]
        history: Option<PathBuf>,
        #[command(flatten)]
        read: TrackInput,
    },
    /// Compare predicted tracks with ground truth and print a metrics row.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Match radius in meters.
        #[arg(long, default_value_t = 3.0)]
        match_radius: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        read: TrackInput,
    },
    /// Generate ground truth along patterns plus a corrupted copy.
    Synth {
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long, value_name = "FILE")]
        gt_out: PathBuf,
        #[arg(long, value_name = "FILE")]
        corrupted_out: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        /// Walking speed in m/s.
        #[arg(long, default_value_t = 1.5)]
        speed: f64,
        #[arg(long, default_value_t = 0.0)]
        speed_jitter: f64,
        /// Lateral offset deviation as a fraction of the pattern width.
        #[arg(long, default_value_t = 1.0 / 3.0)]
        lateral_sigma: f64,
        #[arg(long, default_value_t = 4)]
        start_gap: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exchange two tracks from a frame on.
        #[arg(long, value_name = "FRAME:A:B", value_parser = parse_swap)]
        swap: Vec<CorruptOp>,
        /// Split a track at a frame.
        #[arg(long, value_name = "ID:FRAME", value_parser = parse_fragment)]
        fragment: Vec<CorruptOp>,
        /// Append track B to track A.
        #[arg(long, value_name = "A:B", value_parser = parse_merge)]
        merge: Vec<CorruptOp>,
    },
    /// Draw patterns and tracks as SVG.
    Plot {
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        read: TrackInput,
    },
}

fn fields<const N: usize>(s: &str) -> Result<[u64; N], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != N {
        return Err(format!("expected {N} colon-separated integers, got {s:?}"));
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(out)
}

fn frame(v: u64) -> Result<u32, String> {
    u32::try_from(v).map_err(|_| format!("frame {v} out of range"))
}

fn parse_swap(s: &str) -> Result<CorruptOp, String> {
    let [f, a, b] = fields::<3>(s)?;
    Ok(CorruptOp::Swap { frame: frame(f)?, a, b })
}

fn parse_fragment(s: &str) -> Result<CorruptOp, String> {
    let [id, f] = fields::<2>(s)?;
    Ok(CorruptOp::Fragment { id, frame: frame(f)? })
}

fn parse_merge(s: &str) -> Result<CorruptOp, String> {
    let [a, b] = fields::<2>(s)?;
    Ok(CorruptOp::Merge { a, b })
}

fn load_config(cli: &Cli, base: Config) -> Result<Config, Error> {
    let mut cfg = match &cli.config {
        Some(path) => read_config(path, base)?,
        None => base,
    };
    for (key, value) in cli.overrides.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_tracks(path: &Path, read: &TrackInput) -> Result<Vec<Track>, Error> {
    let h = read.homography.as_deref().map(read_homography).transpose()?;
    read_tracks(path, read.format, h.as_ref())
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Track {
            input,
            patterns,
            output,
            read,
        } => {
            let cfg = load_config(cli, Config::supervised())?;
            let tracks = load_tracks(input, read)?;
            let patterns = read_patterns(patterns)?;
            let out = track(&tracks, &patterns, &cfg)?;
            if out.link.timed_out {
                eprintln!("warning: solver time budget exhausted; result may be suboptimal");
            }
            write_tracks(output, &out.tracks, read.format)?;
            eprintln!(
                "{} tracks, objective {:.6}, {} removed",
                out.tracks.len(),
                out.link.objective,
                out.link.removed.len()
            );
        }
        Command::LearnPatterns { gt, output, read } => {
            let cfg = load_config(cli, Config::supervised())?;
            let out = learn_patterns(&load_tracks(gt, read)?, &cfg)?;
            if out.timed_out {
                eprintln!("warning: solver time budget exhausted; result may be suboptimal");
            }
            write_patterns(output, &out.patterns)?;
            eprintln!("{} patterns, alpha* {:.6}", out.patterns.num_real(), out.alpha_star);
        }
        Command::Unsupervised {
            input,
            output,
            patterns_out,
            max_patterns,
            history,
            read,
        } => {
            let cfg = load_config(cli, Config::unsupervised())?;
            let tracks = load_tracks(input, read)?;
            let out = unsupervised(&tracks, &cfg, None, max_patterns.unwrap_or(cfg.alpha_p))?;
            write_tracks(output, &out.tracks, read.format)?;
            write_patterns(patterns_out, &out.outcome.patterns)?;
            if let Some(path) = history {
                write_file(path, &history_csv(&out.outcome.history))?;
            }
            let best = &out.outcome.history[out.outcome.best];
            eprintln!(
                "iterate {} selected: {} patterns, score {:.6}",
                best.iteration, best.num_patterns, best.idf_tilde
            );
        }
        Command::Eval {
            gt,
            pred,
            match_radius,
            output,
            read,
        } => {
            let gt = load_tracks(gt, read)?;
            let pred = load_tracks(pred, read)?;
            let report = Report::compute(
                &gt,
                &pred,
                &MatchConfig {
                    dist_threshold: *match_radius,
                },
            );
            let text = format!("{CSV_HEADER}\n{}\n", report.csv_row());
            print!("{text}");
            if let Some(path) = output {
                write_file(path, &text)?;
            }
        }
        Command::Synth {
            patterns,
            gt_out,
            corrupted_out,
            agents,
            speed,
            speed_jitter,
            lateral_sigma,
            start_gap,
            seed,
            swap,
            fragment,
            merge,
        } => {
            let cfg = load_config(cli, Config::supervised())?;
            let spec = SceneSpec {
                agents: *agents,
                fps: cfg.fps,
                speed: *speed,
                speed_jitter: *speed_jitter,
                lateral_sigma: *lateral_sigma,
                start_gap: *start_gap,
                seed: *seed,
            };
            let scene = generate_scene(&read_patterns(patterns)?, &spec)?;
            write_tracks(gt_out, &scene.gt, TrackFormat::Plain)?;
            let ops: Vec<CorruptOp> = swap.iter().chain(fragment).chain(merge).copied().collect();
            if let Some(path) = corrupted_out {
                write_tracks(path, &corrupt(&scene.gt, &ops)?, TrackFormat::Plain)?;
            } else if !ops.is_empty() {
                return Err(Error::InvalidInput("corruption ops given without --corrupted-out".into()));
            }
        }
        Command::Plot {
            patterns,
            tracks,
            output,
            read,
        } => {
            let patterns = match patterns {
                Some(p) => read_patterns(p)?,
                None => PatternSet::default(),
            };
            let tracks = match tracks {
                Some(t) => load_tracks(t, read)?,
                None => Vec::new(),
            };
            write_plot(output, &patterns, &tracks)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
