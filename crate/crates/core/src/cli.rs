//! The `gapweld` command-line surface.
//!
//! Every subcommand is a thin binding over the library: it parses flags,
//! reads the declared file formats, calls one pipeline entry point, and
//! writes the declared outputs. Runs with identical inputs and seeds produce
//! byte-identical files. Exit codes: 0 success, 1 validation error (bad
//! flags, malformed files, invalid ranges), 2 I/O error.
//!
//! `GAPWELD_LOG` controls log verbosity only; it never changes behavior.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::candidates::{self, DEFAULT_GROUP_SIZE};
use crate::error::{GapweldError, Result};
use crate::eval::{
    self, BaselineDistanceScorer, EvalOptions, NativeScorer, Scorer,
};
use crate::gap::{self, GapSpec};
use crate::pointcloud::{
    self, ExampleRequest, RepConfig, DEFAULT_CS, DEFAULT_NP,
};
use crate::scoring::{self, TrainConfig};
use crate::synth::{self, SynthConfig};
use crate::volume;

const DEFAULT_THRESHOLD: f64 = 0.7;
const DEFAULT_GRID: &str = "0.1:0.9:0.1";

#[derive(Parser)]
#[command(
    name = "gapweld",
    version,
    about = "Repair neuron segmentations split by missing sections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tubular volume
    GenSynth(GenSynthArgs),
    /// Drop slices from a volume and record fragment ground truth
    SimulateGap(SimulateGapArgs),
    /// Build labeled point-cloud examples from a gap instance
    ExtractExamples(ExtractArgs),
    /// Train the native point scorer on a dataset
    Train(TrainArgs),
    /// Produce a merge-probability table
    Score(ScoreArgs),
    /// Apply thresholded merge decisions to a gap instance
    Stitch(StitchArgs),
    /// Evaluate stitching quality (single gap or sliding protocol)
    Evaluate(EvaluateArgs),
    /// Threshold sweep over the sliding protocol, emitting a merge-curve CSV
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    /// Output volume header path (payload written next to it)
    #[arg(long)]
    out: PathBuf,
    /// Voxel counts as x,y,z
    #[arg(long, default_value = "64,64,32")]
    dims: String,
    /// Physical voxel size in nm as rx,ry,rz
    #[arg(long, default_value = "4,4,40")]
    resolution: String,
    #[arg(long, default_value_t = 20)]
    tubes: usize,
    /// Tube radius range in voxels as min:max
    #[arg(long, default_value = "1.5:3.0")]
    radius: String,
    /// Maximum inclination from the z-axis in degrees (voxel index space)
    #[arg(long, default_value_t = 10.0)]
    max_angle: f64,
    /// Per-slice center jitter amplitude in voxels
    #[arg(long, default_value_t = 0.0)]
    wobble: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateGapArgs {
    /// Ground-truth volume header
    #[arg(long)]
    volume: PathBuf,
    /// First dropped slice index
    #[arg(long)]
    z0: usize,
    /// Number of consecutive dropped slices
    #[arg(long)]
    ns: usize,
    /// Output directory for the gap instance
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Gap instance directory (from simulate-gap)
    #[arg(long)]
    gap: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CS)]
    cs: usize,
    #[arg(long, default_value_t = DEFAULT_NP)]
    np: usize,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Normalization scale in nm; computed from the dataset when omitted
    #[arg(long)]
    norm_scale: Option<f64>,
    /// Output dataset path (JSON lines)
    #[arg(long)]
    out: PathBuf,
    /// Also write the candidate manifest here (JSON lines)
    #[arg(long)]
    candidates_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled dataset (from extract-examples)
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output parameter file (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// baseline | native | external
    #[arg(long)]
    scorer: String,
    /// Gap instance directory (baseline scorer)
    #[arg(long)]
    gap: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    /// Dataset to score (native) or to validate ids against (external)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Trained parameters (native scorer)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Externally produced score TSV (external scorer)
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Output score TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StitchArgs {
    /// Gap instance directory
    #[arg(long)]
    gap: PathBuf,
    /// Score TSV
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Output volume header path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Single-gap mode: gap instance directory (requires --gt and --scores)
    #[arg(long)]
    gap: Option<PathBuf>,
    /// Ground-truth volume for single-gap mode
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Score TSV for single-gap mode
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Sliding mode: ground-truth volume (requires --ns and --scorer)
    #[arg(long)]
    volume: Option<PathBuf>,
    #[arg(long)]
    ns: Option<usize>,
    /// baseline | native (sliding mode)
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CS)]
    cs: usize,
    #[arg(long, default_value_t = DEFAULT_NP)]
    np: usize,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    /// Normalization scale in nm for the native scorer (training scale)
    #[arg(long)]
    norm_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include dropped slices in the VI mask
    #[arg(long, default_value_t = false)]
    include_gap: bool,
    /// Include background voxels in the VI mask
    #[arg(long, default_value_t = false)]
    include_background: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output report JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Ground-truth volume
    #[arg(long)]
    volume: PathBuf,
    #[arg(long)]
    ns: usize,
    /// baseline | native
    #[arg(long)]
    scorer: String,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Threshold grid as start:stop:step
    #[arg(long, default_value = DEFAULT_GRID)]
    thresholds: String,
    #[arg(long, default_value_t = DEFAULT_CS)]
    cs: usize,
    #[arg(long, default_value_t = DEFAULT_NP)]
    np: usize,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    /// Normalization scale in nm for the native scorer (training scale)
    #[arg(long)]
    norm_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    include_gap: bool,
    #[arg(long, default_value_t = false)]
    include_background: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output merge-curve CSV
    #[arg(long)]
    out: PathBuf,
}

/// Parse and dispatch. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenSynth(a) => gen_synth(a),
        Command::SimulateGap(a) => simulate_gap(a),
        Command::ExtractExamples(a) => extract_examples(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Stitch(a) => stitch(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn parse_triple<T: std::str::FromStr>(s: &str, flag: &str) -> Result<(T, T, T)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(GapweldError::invalid(format!(
            "--{flag} expects three comma-separated values, got {s:?}"
        )));
    }
    let mut vals = Vec::with_capacity(3);
    for p in parts {
        vals.push(p.trim().parse::<T>().map_err(|_| {
            GapweldError::invalid(format!("--{flag}: cannot parse {p:?}"))
        })?);
    }
    let mut it = vals.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
}

fn parse_pair_f64(s: &str, flag: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(GapweldError::invalid(format!(
            "--{flag} expects min:max, got {s:?}"
        )));
    }
    let lo = parts[0].trim().parse().map_err(|_| {
        GapweldError::invalid(format!("--{flag}: cannot parse {:?}", parts[0]))
    })?;
    let hi = parts[1].trim().parse().map_err(|_| {
        GapweldError::invalid(format!("--{flag}: cannot parse {:?}", parts[1]))
    })?;
    Ok((lo, hi))
}

/// A start:stop:step grid, endpoints rounded at 1e-9 so accumulated float
/// error cannot add or drop a grid point.
pub fn parse_threshold_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(GapweldError::invalid(format!(
            "--thresholds expects start:stop:step, got {s:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| GapweldError::invalid(format!("--thresholds: cannot parse {p:?}")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) {
        return Err(GapweldError::invalid("--thresholds: step must be > 0"));
    }
    if stop < start {
        return Err(GapweldError::invalid("--thresholds: stop must be >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect();
    for &t in &grid {
        if !(0.0..=1.0).contains(&t) {
            return Err(GapweldError::invalid(format!(
                "--thresholds: grid value {t} outside [0, 1]"
            )));
        }
    }
    Ok(grid)
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let dims = parse_triple::<usize>(&a.dims, "dims")?;
    let resolution = parse_triple::<f64>(&a.resolution, "resolution")?;
    let radius = parse_pair_f64(&a.radius, "radius")?;
    let cfg = SynthConfig {
        dims,
        resolution_nm: resolution,
        n_tubes: a.tubes,
        radius_vox: radius,
        max_angle_deg: a.max_angle,
        wobble: a.wobble,
        seed: a.seed,
    };
    let (vol, records) = synth::generate_volume_with_records(&cfg)?;
    volume::save_volume(&vol, &a.out)?;
    let sidecar = sidecar_path(&a.out);
    synth::write_sidecar(&cfg, &records, &sidecar)?;
    log::info!(
        "generated {} tubes into {} (+ {})",
        records.len(),
        a.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn sidecar_path(volume_out: &Path) -> PathBuf {
    volume_out.with_extension("tubes.json")
}

fn simulate_gap(a: SimulateGapArgs) -> Result<()> {
    let gt = volume::load_volume(&a.volume)?;
    let inst = gap::make_gap_instance(&gt, GapSpec::new(a.z0, a.ns))?;
    gap::save_gap_instance(&inst, &a.out)?;
    log::info!(
        "gap z0={} ns={}: {} fragments, {} truth pairs",
        a.z0,
        a.ns,
        inst.origin_of.len(),
        inst.truth_pairs.len()
    );
    Ok(())
}

fn extract_examples(a: ExtractArgs) -> Result<()> {
    let inst = gap::load_gap_instance(&a.gap)?;
    let groups = candidates::candidate_groups(&inst, a.group_size)?;
    if let Some(path) = &a.candidates_out {
        candidates::write_candidates(&groups, path)?;
    }
    let requests: Vec<ExampleRequest<'_>> = groups
        .iter()
        .flat_map(|g| {
            g.candidates.iter().map(|c| ExampleRequest {
                inst: &inst,
                top: g.top,
                bottom: c.bottom,
                label: Some(u8::from(inst.truth_pairs.contains(&crate::gap::TruthPair {
                    top_fragment: g.top,
                    bottom_fragment: c.bottom,
                }))),
            })
        })
        .collect();
    let dataset = match a.norm_scale {
        Some(scale) => {
            let cfg = RepConfig {
                cs: a.cs,
                np: a.np,
                norm_scale_nm: scale,
                seed: a.seed,
            };
            pointcloud::build_dataset(&requests, &cfg)?
        }
        None => pointcloud::build_dataset_auto_scale(&requests, a.cs, a.np, a.seed)?,
    };
    pointcloud::write_dataset(&dataset, &a.out)?;
    log::info!(
        "wrote {} examples (np={}, cs={}, scale={} nm)",
        dataset.examples.len(),
        dataset.np,
        dataset.cs,
        dataset.norm_scale_nm
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let dataset = pointcloud::read_dataset(&a.dataset)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let initial = scoring::init_scorer(a.seed);
    let (params, history) = scoring::train(&initial, &dataset, &cfg)?;
    scoring::save_params(&params, &a.out)?;
    for (epoch, loss) in history.iter().enumerate() {
        log::info!("epoch {epoch}: mean loss {loss}");
    }
    println!(
        "trained {} epochs on {} examples; loss {} -> {}; norm_scale_nm {}",
        a.epochs,
        dataset.examples.len(),
        history.first().unwrap_or(&f64::NAN),
        history.last().unwrap_or(&f64::NAN),
        dataset.norm_scale_nm
    );
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let table = match a.scorer.as_str() {
        "baseline" => {
            let dir = a.gap.as_ref().ok_or_else(|| {
                GapweldError::invalid("--scorer baseline requires --gap")
            })?;
            let inst = gap::load_gap_instance(dir)?;
            let groups = candidates::candidate_groups(&inst, a.group_size)?;
            scoring::score_baseline(&groups)
        }
        "native" => {
            let ds_path = a.dataset.as_ref().ok_or_else(|| {
                GapweldError::invalid("--scorer native requires --dataset")
            })?;
            let params_path = a.params.as_ref().ok_or_else(|| {
                GapweldError::invalid("--scorer native requires --params")
            })?;
            let dataset = pointcloud::read_dataset(ds_path)?;
            let params = scoring::load_params(params_path)?;
            scoring::score_native(&params, &dataset)?
        }
        "external" => {
            let scores_path = a.scores.as_ref().ok_or_else(|| {
                GapweldError::invalid("--scorer external requires --scores")
            })?;
            let table = scoring::load_external_scores(scores_path)?;
            if let Some(ds_path) = &a.dataset {
                let dataset = pointcloud::read_dataset(ds_path)?;
                let known: BTreeSet<u64> = (0..dataset.examples.len() as u64).collect();
                table.check_ids(&known)?;
            }
            table
        }
        other => {
            return Err(GapweldError::invalid(format!(
                "--scorer must be baseline, native, or external; got {other:?}"
            )))
        }
    };
    scoring::write_scores(&table, &a.out)?;
    log::info!("wrote {} score rows", table.rows.len());
    Ok(())
}

fn stitch(a: StitchArgs) -> Result<()> {
    let inst = gap::load_gap_instance(&a.gap)?;
    let scores = scoring::load_external_scores(&a.scores)?;
    let decisions = eval::apply_threshold(&scores, a.threshold)?;
    let stitched = eval::stitch(&inst, &decisions)?;
    volume::save_volume(&stitched, &a.out)?;
    log::info!("applied {} merges", decisions.pairs.len());
    Ok(())
}

fn build_scorer(
    name: &str,
    params_path: Option<&Path>,
) -> Result<Box<dyn Scorer>> {
    match name {
        "baseline" => Ok(Box::new(BaselineDistanceScorer)),
        "native" => {
            let path = params_path.ok_or_else(|| {
                GapweldError::invalid("--scorer native requires --params")
            })?;
            let params = scoring::load_params(path)?;
            Ok(Box::new(NativeScorer { params }))
        }
        other => Err(GapweldError::invalid(format!(
            "--scorer must be baseline or native here; got {other:?}"
        ))),
    }
}

fn eval_options(
    cs: usize,
    np: usize,
    group_size: usize,
    seed: u64,
    norm_scale: Option<f64>,
    scorer_name: &str,
    include_background: bool,
    include_gap: bool,
    jobs: usize,
) -> Result<EvalOptions> {
    let norm_scale_nm = match (norm_scale, scorer_name) {
        (Some(s), _) => s,
        (None, "native") => {
            return Err(GapweldError::invalid(
                "--scorer native requires --norm-scale (the training scale)",
            ))
        }
        (None, _) => 1.0, // unused by the baseline scorer
    };
    let mut opts = EvalOptions::new(RepConfig {
        cs,
        np,
        norm_scale_nm,
        seed,
    });
    opts.group_size = group_size;
    opts.include_background = include_background;
    opts.include_gap = include_gap;
    opts.jobs = jobs;
    Ok(opts)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let report = match (&a.gap, &a.volume) {
        (Some(gap_dir), None) => {
            let gt_path = a.gt.as_ref().ok_or_else(|| {
                GapweldError::invalid("single-gap evaluate requires --gt")
            })?;
            let scores_path = a.scores.as_ref().ok_or_else(|| {
                GapweldError::invalid("single-gap evaluate requires --scores")
            })?;
            let inst = gap::load_gap_instance(gap_dir)?;
            let gt = volume::load_volume(gt_path)?;
            let scores = scoring::load_external_scores(scores_path)?;
            let opts = eval_options(
                a.cs,
                a.np,
                a.group_size,
                a.seed,
                a.norm_scale,
                "external",
                a.include_background,
                a.include_gap,
                a.jobs,
            )?;
            eval::evaluate_with_scores(&gt, &inst, &scores, a.threshold, &opts)?
        }
        (None, Some(volume_path)) => {
            let ns = a.ns.ok_or_else(|| {
                GapweldError::invalid("sliding evaluate requires --ns")
            })?;
            let scorer_name = a.scorer.as_deref().ok_or_else(|| {
                GapweldError::invalid("sliding evaluate requires --scorer")
            })?;
            let opts = eval_options(
                a.cs,
                a.np,
                a.group_size,
                a.seed,
                a.norm_scale,
                scorer_name,
                a.include_background,
                a.include_gap,
                a.jobs,
            )?;
            let gt = volume::load_volume(volume_path)?;
            let scorer = build_scorer(scorer_name, a.params.as_deref())?;
            eval::sliding_eval(&gt, ns, scorer.as_ref(), a.threshold, &opts)?
        }
        _ => {
            return Err(GapweldError::invalid(
                "evaluate needs exactly one of --gap (single) or --volume (sliding)",
            ))
        }
    };
    eval::write_report(&report, &a.out)?;
    println!(
        "ns={} t={}: VI {} -> {} ({}% reduction), success {}, error {}",
        report.ns,
        report.threshold,
        report.vi_pre,
        report.vi_post,
        report.percent_reduction,
        report.merge_success_rate,
        report.merge_error_rate
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let grid = parse_threshold_grid(&a.thresholds)?;
    let opts = eval_options(
        a.cs,
        a.np,
        a.group_size,
        a.seed,
        a.norm_scale,
        &a.scorer,
        a.include_background,
        a.include_gap,
        a.jobs,
    )?;
    let gt = volume::load_volume(&a.volume)?;
    let scorer = build_scorer(&a.scorer, a.params.as_deref())?;
    let table = eval::sweep(&gt, a.ns, scorer.as_ref(), &grid, &opts)?;
    eval::write_sweep_csv(&table, &a.out)?;
    let best = table.rows.iter().find(|r| r.optimal).unwrap();
    println!(
        "swept {} thresholds; optimal t={} with {}% reduction",
        table.rows.len(),
        best.threshold,
        best.percent_reduction
    );
    Ok(())
}
