//! Command line front end. Each subcommand wraps one pipeline stage and
//! speaks the shared file formats, so stages chain through the shell:
//! depth rasters (DPTH), masks (PGM), camera intrinsics (JSON), tracks
//! (JSON), trajectories (JSONL), execution logs (JSONL), verdict logs
//! (JSONL), and suite reports (JSON/CSV).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use trajkit::depth::{apply_affine, fit_scale_shift, fit_scale_shift_trimmed};
use trajkit::eval::{
    read_suite_config, rms_jitter, run_suite, write_report_csv, write_report_json, SuiteReport,
    DEFAULT_JITTER_SIGMA,
};
use trajkit::exec::{
    execute, read_perturbation_script, write_execution_log, DeviationPolicy, SimState,
};
use trajkit::filter::{pass_rate, pearson, read_verdicts, Verdict};
use trajkit::retarget::retarget_trajectory;
use trajkit::track::{
    read_tracks_json, smooth_trajectory, track_trajectory, PnPConfig, TrackPnPConfig,
    DEFAULT_SMOOTH_WINDOW,
};
use trajkit::{traj, CameraIntrinsics, GraspTransform};

#[derive(Parser)]
#[command(name = "trajkit", version, about = "Depth-grounded object trajectory tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit scale and shift of a predicted depth raster against a metric
    /// reference inside a dilated object mask.
    AlignDepth(AlignDepthArgs),
    /// Lift frame-0 tracks through the depth raster and solve a pose per
    /// frame.
    PnpTrack(PnpTrackArgs),
    /// Moving-average smoothing of a pose trajectory.
    Smooth(SmoothArgs),
    /// Turn an object trajectory into an end-effector plan via a fixed
    /// grasp offset.
    Retarget(RetargetArgs),
    /// Execute a plan against the kinematic simulator, with optional
    /// scripted perturbations.
    Simulate(SimulateArgs),
    /// RMS residual of a trajectory against its Gaussian-smoothed self.
    Jitter(JitterArgs),
    /// Pass rates and judge-vs-human correlation from a verdict log.
    FilterStats(FilterStatsArgs),
    /// Run the batch evaluation suite from a config file.
    Suite(SuiteArgs),
    /// Re-render an existing suite report as plot data.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Jsonl,
    Csv,
}

/// `--out` file, or stdout when absent.
fn out_writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

#[derive(Args)]
struct AlignDepthArgs {
    /// Predicted depth raster (DPTH).
    #[arg(long)]
    pred: PathBuf,
    /// Metric reference raster (DPTH).
    #[arg(long)]
    real: PathBuf,
    /// Object mask (binary PGM, 255 = object).
    #[arg(long)]
    mask: PathBuf,
    /// Mask dilation radius, pixels.
    #[arg(long, default_value_t = 2)]
    dilation: u32,
    /// Refit after dropping the worst-residual quartile.
    #[arg(long)]
    trimmed: bool,
    /// Write the aligned prediction here (DPTH).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn align_depth(args: &AlignDepthArgs) -> Result<()> {
    let pred = trajkit::depth::read_dpth::<f64>(&args.pred)?;
    let real = trajkit::depth::read_dpth::<f64>(&args.real)?;
    let mask = trajkit::depth::read_pgm(&args.mask)?;
    let fit = if args.trimmed {
        fit_scale_shift_trimmed(&pred, &real, &mask, args.dilation)?
    } else {
        fit_scale_shift(&pred, &real, &mask, args.dilation)?
    };
    let (aligned, clipped) = apply_affine(&pred, &fit);
    println!(
        "{}",
        json!({
            "scale": fit.scale,
            "shift": fit.shift,
            "rmse": fit.rmse,
            "pixel_count": fit.pixel_count,
            "clipped": clipped,
        })
    );
    if let Some(path) = &args.out {
        trajkit::depth::write_dpth(&aligned, path)?;
    }
    Ok(())
}

#[derive(Args)]
struct PnpTrackArgs {
    /// Point tracks (JSON).
    #[arg(long)]
    tracks: PathBuf,
    /// Depth raster for the first frame (DPTH).
    #[arg(long)]
    depth: PathBuf,
    /// Camera intrinsics (JSON).
    #[arg(long)]
    camera: PathBuf,
    /// Seconds between consecutive frames.
    #[arg(long, default_value_t = 1.0 / 15.0)]
    frame_dt: f64,
    /// Refine over all visible points instead of robust RANSAC.
    #[arg(long)]
    no_ransac: bool,
    /// RANSAC sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimated trajectory (JSONL).
    #[arg(long)]
    out: PathBuf,
}

fn pnp_track(args: &PnpTrackArgs) -> Result<()> {
    let tracks = read_tracks_json::<f64>(&args.tracks)?;
    let depth0 = trajkit::depth::read_dpth(&args.depth)?;
    let camera = CameraIntrinsics::read_json(&args.camera)?;
    let cfg = TrackPnPConfig {
        pnp: PnPConfig {
            seed: args.seed,
            ..PnPConfig::default()
        },
        frame_dt: args.frame_dt,
        use_ransac: !args.no_ransac,
    };
    let tracked = track_trajectory(&tracks, &depth0, &camera, &cfg)?;
    traj::write_jsonl(&tracked.trajectory, &args.out)?;
    println!(
        "{}",
        json!({
            "frames": tracked.frames.len(),
            "carried_forward": tracked.carried_forward_count(),
        })
    );
    Ok(())
}

#[derive(Args)]
struct SmoothArgs {
    /// Input trajectory (JSONL).
    #[arg(long)]
    traj: PathBuf,
    /// Odd window size, frames.
    #[arg(long, default_value_t = DEFAULT_SMOOTH_WINDOW)]
    window: usize,
    /// Smoothed trajectory (JSONL).
    #[arg(long)]
    out: PathBuf,
}

fn smooth(args: &SmoothArgs) -> Result<()> {
    let input = traj::read_jsonl(&args.traj)?;
    let smoothed = smooth_trajectory(&input, args.window)?;
    traj::write_jsonl(&smoothed, &args.out)?;
    Ok(())
}

#[derive(Args)]
struct RetargetArgs {
    /// Object trajectory (JSONL).
    #[arg(long)]
    traj: PathBuf,
    /// Grasp offset: one trajectory-format line, t = grasp time.
    #[arg(long)]
    grasp: PathBuf,
    /// End-effector plan (JSONL).
    #[arg(long)]
    out: PathBuf,
}

fn retarget(args: &RetargetArgs) -> Result<()> {
    let object = traj::read_jsonl(&args.traj)?;
    let grasp = GraspTransform::new(traj::read_single_pose(&args.grasp)?.pose);
    let plan = retarget_trajectory(&object, &grasp);
    traj::write_jsonl(&plan, &args.out)?;
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// End-effector plan (JSONL).
    #[arg(long)]
    plan: PathBuf,
    /// Grasp offset: one trajectory-format line.
    #[arg(long)]
    grasp: PathBuf,
    /// Perturbation script (JSONL), applied in order.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Simulator noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Arm translation per tick, meters.
    #[arg(long, default_value_t = 0.02)]
    step_m: f64,
    /// Arm rotation per tick, degrees.
    #[arg(long, default_value_t = 10.0)]
    step_deg: f64,
    /// Execution log (JSONL); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let plan = traj::read_jsonl(&args.plan)?;
    let grasp = GraspTransform::new(traj::read_single_pose(&args.grasp)?.pose);
    let script = match &args.script {
        Some(path) => read_perturbation_script(open(path)?)?,
        None => Vec::new(),
    };
    let start = plan
        .samples()
        .first()
        .context("plan has no waypoints")?
        .pose;
    let sim = SimState::new(start, *grasp.offset(), args.step_m, args.step_deg, args.seed)?;
    let log = execute(&plan, &grasp, &DeviationPolicy::default(), sim, &script)?;

    let mut out = out_writer(args.out.as_deref())?;
    write_execution_log(&mut out, &log)?;
    out.flush()?;
    if args.out.is_some() {
        // Log went to a file; echo the summary for quick inspection.
        println!("{}", serde_json::to_string(&log.summary)?);
    }
    Ok(())
}

#[derive(Args)]
struct JitterArgs {
    /// Input trajectory (JSONL).
    #[arg(long)]
    traj: PathBuf,
    /// Gaussian smoothing scale, frames.
    #[arg(long, default_value_t = DEFAULT_JITTER_SIGMA)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = OutFormat::Jsonl)]
    format: OutFormat,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn jitter(args: &JitterArgs) -> Result<()> {
    let input = traj::read_jsonl(&args.traj)?;
    let report = rms_jitter(&input, args.sigma)?;
    let mut out = out_writer(args.out.as_deref())?;
    match args.format {
        OutFormat::Jsonl => writeln!(
            out,
            "{}",
            json!({
                "translational_m": report.translational_m,
                "rotational_deg": report.rotational_deg,
                "sigma": report.sigma,
                "samples": report.samples,
            })
        )?,
        OutFormat::Csv => {
            writeln!(out, "metric,value")?;
            writeln!(out, "translational_m,{}", report.translational_m)?;
            writeln!(out, "rotational_deg,{}", report.rotational_deg)?;
            writeln!(out, "sigma,{}", report.sigma)?;
            writeln!(out, "samples,{}", report.samples)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
struct FilterStatsArgs {
    /// Verdict log (JSONL).
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Jsonl)]
    format: OutFormat,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Videos group by id up to the last `-` (the take-numbering convention
/// `<group>-<n>`); ids without a `-` form their own group.
fn group_of(v: &Verdict) -> String {
    v.video
        .rsplit_once('-')
        .map(|(head, _)| head.to_string())
        .unwrap_or_else(|| v.video.clone())
}

/// First-attempt human pass fraction per group, for groups that carry
/// any human labels at all.
fn human_rates(verdicts: &[Verdict]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for v in verdicts.iter().filter(|v| v.attempt == 1) {
        if let Some(label) = v.human {
            let entry = counts.entry(group_of(v)).or_insert((0, 0));
            entry.1 += 1;
            entry.0 += label as usize;
        }
    }
    counts
        .into_iter()
        .map(|(group, (yes, total))| (group, yes as f64 / total as f64))
        .collect()
}

fn filter_stats(args: &FilterStatsArgs) -> Result<()> {
    let verdicts = read_verdicts(open(&args.log)?)?;
    let rates = pass_rate(&verdicts, group_of)?;
    let human = human_rates(&verdicts);

    // Correlate judge and human rates when every group is human-labeled.
    let correlation = if human.len() == rates.len() && rates.len() >= 2 {
        let judge: Vec<f64> = rates.values().map(|r| r.fraction()).collect();
        let label: Vec<f64> = human.values().copied().collect();
        pearson(&judge, &label).ok()
    } else {
        None
    };

    let mut out = out_writer(args.out.as_deref())?;
    match args.format {
        OutFormat::Jsonl => {
            let groups: Vec<_> = rates
                .iter()
                .map(|(group, rate)| {
                    json!({
                        "group": group,
                        "passes": rate.passes,
                        "total": rate.total,
                        "rate": rate.fraction(),
                        "human_rate": human.get(group),
                    })
                })
                .collect();
            writeln!(
                out,
                "{}",
                json!({ "groups": groups, "pearson_judge_vs_human": correlation })
            )?;
        }
        OutFormat::Csv => {
            writeln!(out, "group,passes,total,rate,human_rate")?;
            for (group, rate) in &rates {
                let human_cell = human
                    .get(group)
                    .map(|r| r.to_string())
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    group,
                    rate.passes,
                    rate.total,
                    rate.fraction(),
                    human_cell
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
struct SuiteArgs {
    /// Suite configuration (JSON, versioned schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Jsonl)]
    format: OutFormat,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn suite(args: &SuiteArgs) -> Result<()> {
    let cfg = read_suite_config(open(&args.config)?)?;
    let report = run_suite(&cfg)?;
    let mut out = out_writer(args.out.as_deref())?;
    match args.format {
        OutFormat::Jsonl => write_report_json(&mut out, &report)?,
        OutFormat::Csv => write_report_csv(&mut out, &report)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
struct ReportArgs {
    /// Suite report as written by `suite` in jsonl format.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn report(args: &ReportArgs) -> Result<()> {
    let parsed: SuiteReport = serde_json::from_reader(open(&args.report)?)
        .with_context(|| format!("parsing {}", args.report.display()))?;
    let mut out = out_writer(args.out.as_deref())?;
    match args.format {
        OutFormat::Jsonl => write_report_json(&mut out, &parsed)?,
        OutFormat::Csv => write_report_csv(&mut out, &parsed)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::AlignDepth(args) => align_depth(&args),
        Command::PnpTrack(args) => pnp_track(&args),
        Command::Smooth(args) => smooth(&args),
        Command::Retarget(args) => retarget(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Jitter(args) => jitter(&args),
        Command::FilterStats(args) => filter_stats(&args),
        Command::Suite(args) => suite(&args),
        Command::Report(args) => report(&args),
    }
}
