//! Command-line front end.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use textrbl_core::degradation::{average_frames, blur_window, lr_frame, remap_annotations, BlurConfig, LrConfig};
use textrbl_core::evaluation::{prf, DEFAULT_IOU_THRESHOLD};
use textrbl_core::pipeline::{retrack_from, run_pipeline_with_progress, FirstFrameBoxes, PipelineConfig, VideoSource};
use textrbl_core::synth::{render, Motion, SynthConfig, DEFAULT_SEED};
use textrbl_core::{
    AnnotationDocument, Degradation, FailureParams, Frame, PARAMS_DEFAULTS_VERSION, SCHEMA_VERSION,
};

use crate::config::{ConfigFile, TrackerPreset, CONFIG_ENV};
use crate::document;
use crate::error::{Error, Result};
use crate::frames::{frame_file_name, parse_trim, write_frames, write_png, FrameDir};

static VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (schema {SCHEMA_VERSION}, params defaults {PARAMS_DEFAULTS_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
});

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Parser)]
#[command(name = "textrbl", version = VERSION.as_str(), about = "Semi-automatic scene-text video annotation")]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Config file (JSON); defaults to the file named by TEXTRBL_CONFIG.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate first-frame boxes through a video (failure detection off by default).
    Annotate(TrackArgs),
    /// Run the tracking baseline (failure detection on by default).
    Track(TrackArgs),
    /// Replace one instance's track from a corrected box onward.
    Retrack(RetrackArgs),
    /// Generate degraded videos or carry annotations over to them.
    #[command(subcommand)]
    Degrade(DegradeCommand),
    /// Score a predicted document against ground truth.
    Eval(EvalArgs),
    /// Render a synthetic fixture with exact ground truth.
    Synth(SynthArgs),
    /// Check a document against every invariant.
    Validate(ValidateArgs),
    /// Run the HTTP annotation service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrackerArg {
    Kcf,
    Samf,
}

impl From<TrackerArg> for TrackerPreset {
    fn from(t: TrackerArg) -> Self {
        match t {
            TrackerArg::Kcf => TrackerPreset::Kcf,
            TrackerArg::Samf => TrackerPreset::Samf,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrackerOptions {
    /// Tracker parameter file (same format as --config).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "kcf")]
    pub tracker: TrackerArg,
    #[arg(long, value_enum)]
    pub failure_detection: Option<OnOff>,
    #[arg(long, allow_negative_numbers = true)]
    pub fd_alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub fd_beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub frames: PathBuf,
    /// Document whose frame-1 entries seed the trackers.
    #[arg(long, required_unless_present = "detections", conflicts_with = "detections")]
    pub first_boxes: Option<PathBuf>,
    /// Detector polygons for frame 1.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// 1-based inclusive frame range A:B.
    #[arg(long, value_parser = parse_trim)]
    pub trim: Option<[u32; 2]>,
    /// Video name recorded in the document (default: directory name).
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub tracker: TrackerOptions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrackArgs {
    #[arg(long)]
    pub doc: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub instance: String,
    /// 1-based frame of the corrected box.
    #[arg(long)]
    pub frame: u32,
    /// Corrected box as x,y,w,h.
    #[arg(long = "box", allow_negative_numbers = true)]
    pub bbox: String,
    /// Overrides the trim recorded in the document.
    #[arg(long, value_parser = parse_trim)]
    pub trim: Option<[u32; 2]>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RemapMode {
    Blur,
    Lr,
}

#[derive(Debug, Subcommand)]
pub enum DegradeCommand {
    /// Sliding-window temporal average.
    Blur {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bicubic downsampling by an integer multiple.
    Lr {
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Carry a raw-video document over to a degraded variant.
    Remap {
        #[arg(long)]
        doc: PathBuf,
        #[arg(long, value_enum)]
        mode: RemapMode,
        #[arg(long, default_value_t = 5)]
        n: u32,
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thresh: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MotionArg {
    Translation,
    Zoom,
    Occlusion,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub motion: MotionArg,
    #[arg(long, default_value_t = 100)]
    pub length: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory: frames/, truth.json and first_boxes.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub doc: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors are printed to stderr as a JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::to_string(&e.body()).expect("error bodies serialize");
            eprintln!("{body}");
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Annotate(args) => cmd_track(&args, config, false),
        Command::Track(args) => cmd_track(&args, config, true),
        Command::Retrack(args) => cmd_retrack(&args),
        Command::Degrade(cmd) => cmd_degrade(cmd),
        Command::Eval(args) => cmd_eval(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::Serve(args) => cmd_serve(&args, config),
    }
}

fn pipeline_config(opts: &TrackerOptions, config: Option<&Path>, failure_default: bool) -> Result<PipelineConfig> {
    let file = match &opts.params {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::resolve(config)?,
    };
    let tracker = file.tracker_params(opts.tracker.into())?;
    let enabled = match opts.failure_detection {
        Some(v) => v == OnOff::On,
        None => failure_default,
    };
    let failure = if enabled {
        let base = file.failure_detection.unwrap_or_default();
        let fd = FailureParams {
            alpha: opts.fd_alpha.unwrap_or(base.alpha),
            beta: opts.fd_beta.unwrap_or(base.beta),
        };
        fd.validate()?;
        Some(fd)
    } else {
        if opts.fd_alpha.is_some() || opts.fd_beta.is_some() {
            return Err(Error::Usage("--fd-alpha/--fd-beta need failure detection on".into()));
        }
        None
    };
    Ok(PipelineConfig { tracker, failure })
}

fn open_video(frames: &Path, trim: Option<[u32; 2]>, name: Option<&str>) -> Result<FrameDir> {
    let video = FrameDir::open(frames, trim)?;
    Ok(match name {
        Some(n) => video.with_name(n),
        None => video,
    })
}

fn cmd_track(args: &TrackArgs, config: Option<&Path>, failure_default: bool) -> Result<()> {
    let pipeline = pipeline_config(&args.tracker, config, failure_default)?;
    let first: FirstFrameBoxes = match (&args.first_boxes, &args.detections) {
        (Some(p), _) => document::load_first_boxes(p)?,
        (None, Some(p)) => document::load_detections(p)?,
        (None, None) => return Err(Error::Usage("--first-boxes or --detections is required".into())),
    };
    let video = open_video(&args.frames, args.trim, args.name.as_deref())?;
    log::info!(
        "tracking {} instances over {} frames of {}",
        first.boxes.len(),
        video.frame_count(),
        video.name()
    );
    let doc = run_pipeline_with_progress(&video, &first, &pipeline, &mut |p| {
        log::debug!("frame {}/{}", p.frames_done, p.n_frame);
    })?;
    document::save(&args.out, &doc)?;
    println!("{}", summary(&doc, &args.out));
    Ok(())
}

fn summary(doc: &AnnotationDocument, path: &Path) -> String {
    let stopped: Vec<String> = doc
        .instances
        .iter()
        .filter_map(|i| i.stopped_at.map(|t| format!("{} at frame {t}", i.id)))
        .collect();
    let mut s = format!(
        "wrote {}: {} instances over {} frames",
        path.display(),
        doc.instances.len(),
        doc.video.n_frame
    );
    if !stopped.is_empty() {
        s.push_str(&format!("; stopped: {}", stopped.join(", ")));
    }
    s
}

fn cmd_retrack(args: &RetrackArgs) -> Result<()> {
    let doc = document::load(&args.doc)?;
    let bbox = document::parse_box(&args.bbox)?;
    let video = open_video(&args.frames, args.trim.or(doc.video.trim), Some(&doc.video.name))?;
    let out = retrack_from(&doc, &video, &args.instance, args.frame, bbox)?;
    document::save(&args.out, &out)?;
    println!("{}", summary(&out, &args.out));
    Ok(())
}

/// Streams the blur so at most one window of frames is held in memory.
fn blur_dir(frames: &Path, out: &Path, cfg: BlurConfig) -> Result<usize> {
    let video = FrameDir::open(frames, None)?;
    let len = video.frame_count();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut cache: BTreeMap<usize, Frame> = BTreeMap::new();
    for t in 0..len {
        let window: Vec<usize> = blur_window(t, len, cfg).collect();
        let oldest = window.iter().copied().min().unwrap_or(0);
        cache.retain(|&i, _| i >= oldest);
        for &i in &window {
            if let Entry::Vacant(slot) = cache.entry(i) {
                slot.insert(video.load(i)?);
            }
        }
        let refs: Vec<&Frame> = window.iter().map(|i| &cache[i]).collect();
        let blurred = average_frames(&refs, t)?;
        write_png(&out.join(frame_file_name(t)), &blurred)?;
    }
    Ok(len)
}

fn lr_dir(frames: &Path, out: &Path, cfg: LrConfig) -> Result<usize> {
    let video = FrameDir::open(frames, None)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for t in 0..video.frame_count() {
        let small = lr_frame(&video.load(t)?, cfg)?;
        write_png(&out.join(frame_file_name(t)), &small)?;
    }
    Ok(video.frame_count())
}

fn cmd_degrade(cmd: DegradeCommand) -> Result<()> {
    match cmd {
        DegradeCommand::Blur { n, frames, out } => {
            let count = blur_dir(&frames, &out, BlurConfig::new(n)?)?;
            println!("wrote {count} blurred frames to {}", out.display());
        }
        DegradeCommand::Lr { m, frames, out } => {
            let count = lr_dir(&frames, &out, LrConfig::new(m)?)?;
            println!("wrote {count} low-resolution frames to {}", out.display());
        }
        DegradeCommand::Remap { doc, mode, n, m, out } => {
            let raw = document::load(&doc)?;
            let degradation = match mode {
                RemapMode::Blur => Degradation::Blur { n },
                RemapMode::Lr => Degradation::Lr { m },
            };
            let remapped = remap_annotations(&raw, degradation)?;
            document::save(&out, &remapped)?;
            println!("{}", summary(&remapped, &out));
        }
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let pred = document::load(&args.pred)?;
    let gt = document::load(&args.gt)?;
    let report = prf(&pred, &gt, args.iou_thresh)?;
    print!("{report}");
    if let Some(path) = &args.report {
        let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
        text.push('\n');
        document::write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let motion = match args.motion {
        MotionArg::Translation => Motion::Translation,
        MotionArg::Zoom => Motion::Zoom,
        MotionArg::Occlusion => Motion::Occlusion,
    };
    let fixture = render(&SynthConfig {
        motion,
        length: args.length,
        seed: args.seed,
    })?;
    write_frames(&args.out.join("frames"), &fixture.frames)?;
    document::save(&args.out.join("truth.json"), &fixture.truth)?;
    let mut first = fixture.truth.clone();
    first.video.n_frame = 1;
    for inst in &mut first.instances {
        inst.entries.truncate(1);
    }
    document::save(&args.out.join("first_boxes.json"), &first)?;
    println!(
        "wrote {} {} frames to {}",
        fixture.frames.len(),
        motion.name(),
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let doc = document::load(&args.doc)?;
    println!(
        "{}: valid ({} instances, {} frames)",
        args.doc.display(),
        doc.instances.len(),
        doc.video.n_frame
    );
    Ok(())
}

fn cmd_serve(args: &ServeArgs, config: Option<&Path>) -> Result<()> {
    let file = ConfigFile::resolve(config)?;
    let port = args.port.or(file.port).unwrap_or(DEFAULT_PORT);
    let data_dir = args
        .data_dir
        .clone()
        .or(file.data_dir)
        .unwrap_or_else(|| PathBuf::from("textrbl-data"));
    let addr = format!("{}:{port}", args.host);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(&data_dir, e))?;
    runtime.block_on(crate::service::serve(&addr, &data_dir))
}
