//! C ABI for the gapweld pipeline.
//!
//! Conventions:
//!
//! * Handles (`GwVolume`, `GwGapInstance`, `GwScorerParams`) are opaque;
//!   create them with the `gw_*_load`/`gw_*_new` functions and release them
//!   with the matching `gw_*_free`. Passing a handle to any other `free` is
//!   undefined behavior.
//! * Every fallible function returns a [`GwStatus`]; on failure
//!   [`gw_last_error_message`] returns a UTF-8 description valid until the
//!   next failing call on the same thread.
//! * Paths are NUL-terminated UTF-8 strings.
//! * File formats are identical to the `gapweld` CLI, so artifacts are
//!   interchangeable between bindings and the command line.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use gapweld::eval::{
    BaselineDistanceScorer, EvalOptions, NativeScorer, Scorer,
};
use gapweld::gap::GapSpec;
use gapweld::pointcloud::RepConfig;
use gapweld::scoring::TrainConfig;
use gapweld::synth::SynthConfig;
use gapweld::{GapweldError, LabelVolume};

/// Result codes. `Ok` is zero; other values match the CLI exit-code split
/// between validation problems and I/O problems.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GwStatus {
    Ok = 0,
    /// Invalid argument, range, or malformed file contents.
    InvalidArgument = 1,
    /// Filesystem-level failure.
    IoError = 2,
    /// A required pointer was NULL.
    NullPointer = 3,
    /// An internal panic was caught at the boundary.
    Panic = 4,
}

/// Opaque dense label volume.
pub struct GwVolume {
    inner: LabelVolume,
}

/// Opaque gap instance (gapped volume + provenance + truth pairs).
pub struct GwGapInstance {
    inner: gapweld::gap::GapInstance,
}

/// Opaque scorer parameters.
pub struct GwScorerParams {
    inner: gapweld::scoring::ScorerParams,
}

/// Synthetic-volume generation settings; mirrors the library config.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct GwSynthConfig {
    pub dims: [usize; 3],
    pub resolution_nm: [f64; 3],
    pub n_tubes: usize,
    pub radius_vox_min: f64,
    pub radius_vox_max: f64,
    pub max_angle_deg: f64,
    pub wobble: f64,
    pub seed: u64,
}

/// Settings shared by the evaluation entry points.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct GwEvalConfig {
    pub cs: usize,
    pub np: usize,
    pub group_size: usize,
    pub seed: u64,
    /// Normalization scale in nm; must match the scale used in training
    /// when scoring with the native network.
    pub norm_scale_nm: f64,
    pub include_background: bool,
    pub include_gap: bool,
    /// Parallelism across gap positions; 1 is sequential and bit-identical
    /// to parallel runs.
    pub jobs: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &GapweldError) -> GwStatus {
    match err.exit_code() {
        2 => GwStatus::IoError,
        _ => GwStatus::InvalidArgument,
    }
}

/// Message for the most recent failure on this thread. Never NULL; empty
/// before the first failure. The pointer is invalidated by the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn gw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn run_guarded(f: impl FnOnce() -> GwStatus) -> GwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            GwStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a valid NUL-terminated string.
unsafe fn path_arg(ptr: *const c_char, name: &str) -> Result<PathBuf, GwStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is NULL"));
        return Err(GwStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(&format!("{name} is not valid UTF-8"));
            Err(GwStatus::InvalidArgument)
        }
    }
}

fn require<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, GwStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is NULL"));
        return Err(GwStatus::NullPointer);
    }
    Ok(unsafe { &*ptr })
}

fn require_mut<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, GwStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is NULL"));
        return Err(GwStatus::NullPointer);
    }
    Ok(unsafe { &mut *ptr })
}

fn emit<T>(out: *mut *mut T, value: T, name: &str) -> GwStatus {
    if out.is_null() {
        set_error(&format!("{name} is NULL"));
        return GwStatus::NullPointer;
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    GwStatus::Ok
}

macro_rules! try_status {
    ($expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        }
    };
}

macro_rules! try_arg {
    ($expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

// ---------------------------------------------------------------------------
// Volumes
// ---------------------------------------------------------------------------

/// Load a volume from its JSON header path.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn gw_volume_load(path: *const c_char, out: *mut *mut GwVolume) -> GwStatus {
    run_guarded(|| {
        let path = try_arg!(path_arg(path, "path"));
        let vol = try_status!(gapweld::volume::load_volume(&path));
        emit(out, GwVolume { inner: vol }, "out")
    })
}

/// Save a volume (header + raw payload next to it).
///
/// # Safety
/// `vol` must be a live handle from this library; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gw_volume_save(vol: *const GwVolume, path: *const c_char) -> GwStatus {
    run_guarded(|| {
        let vol = try_arg!(require(vol, "vol"));
        let path = try_arg!(path_arg(path, "path"));
        try_status!(gapweld::volume::save_volume(&vol.inner, &path));
        GwStatus::Ok
    })
}

/// Voxel counts of a volume.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gw_volume_dims(
    vol: *const GwVolume,
    x: *mut usize,
    y: *mut usize,
    z: *mut usize,
) -> GwStatus {
    run_guarded(|| {
        let vol = try_arg!(require(vol, "vol"));
        if x.is_null() || y.is_null() || z.is_null() {
            set_error("dims output pointer is NULL");
            return GwStatus::NullPointer;
        }
        let dims = vol.inner.dims();
        *x = dims.0;
        *y = dims.1;
        *z = dims.2;
        GwStatus::Ok
    })
}

/// # Safety
/// `vol` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gw_volume_free(vol: *mut GwVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Generate a synthetic tubular volume.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gw_synth_generate(
    cfg: *const GwSynthConfig,
    out: *mut *mut GwVolume,
) -> GwStatus {
    run_guarded(|| {
        let cfg = try_arg!(require(cfg, "cfg"));
        let config = SynthConfig {
            dims: (cfg.dims[0], cfg.dims[1], cfg.dims[2]),
            resolution_nm: (
                cfg.resolution_nm[0],
                cfg.resolution_nm[1],
                cfg.resolution_nm[2],
            ),
            n_tubes: cfg.n_tubes,
            radius_vox: (cfg.radius_vox_min, cfg.radius_vox_max),
            max_angle_deg: cfg.max_angle_deg,
            wobble: cfg.wobble,
            seed: cfg.seed,
        };
        let vol = try_status!(gapweld::synth::generate_volume(&config));
        emit(out, GwVolume { inner: vol }, "out")
    })
}

// ---------------------------------------------------------------------------
// Gap instances
// ---------------------------------------------------------------------------

/// Drop `ns` slices starting at `z0` and build the gap instance.
///
/// # Safety
/// `gt` must be a live volume handle; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gw_gap_simulate(
    gt: *const GwVolume,
    z0: usize,
    ns: usize,
    out: *mut *mut GwGapInstance,
) -> GwStatus {
    run_guarded(|| {
        let gt = try_arg!(require(gt, "gt"));
        let inst = try_status!(gapweld::gap::make_gap_instance(
            &gt.inner,
            GapSpec::new(z0, ns)
        ));
        emit(out, GwGapInstance { inner: inst }, "out")
    })
}

/// Write the instance (manifest + gapped volume) into a directory.
///
/// # Safety
/// `inst` must be a live handle; `dir` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gw_gap_save(inst: *const GwGapInstance, dir: *const c_char) -> GwStatus {
    run_guarded(|| {
        let inst = try_arg!(require(inst, "inst"));
        let dir = try_arg!(path_arg(dir, "dir"));
        try_status!(gapweld::gap::save_gap_instance(&inst.inner, &dir));
        GwStatus::Ok
    })
}

/// Load an instance from a directory written by [`gw_gap_save`].
///
/// # Safety
/// `dir` must be a valid string; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gw_gap_load(dir: *const c_char, out: *mut *mut GwGapInstance) -> GwStatus {
    run_guarded(|| {
        let dir = try_arg!(path_arg(dir, "dir"));
        let inst = try_status!(gapweld::gap::load_gap_instance(&dir));
        emit(out, GwGapInstance { inner: inst }, "out")
    })
}

/// Number of ground-truth merge pairs; 0 for a NULL handle.
///
/// # Safety
/// `inst` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gw_gap_truth_pair_count(inst: *const GwGapInstance) -> usize {
    if inst.is_null() {
        return 0;
    }
    (*inst).inner.truth_pairs.len()
}

/// # Safety
/// `inst` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gw_gap_free(inst: *mut GwGapInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Build the labeled point-cloud dataset for a gap instance and write it to
/// `dataset_out`. `candidates_out` may be NULL to skip the candidate
/// manifest. The normalization scale is computed from the dataset.
///
/// # Safety
/// `inst` must be a live handle; paths valid strings (or NULL where allowed).
#[no_mangle]
pub unsafe extern "C" fn gw_extract_examples(
    inst: *const GwGapInstance,
    cs: usize,
    np: usize,
    group_size: usize,
    seed: u64,
    dataset_out: *const c_char,
    candidates_out: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let inst = try_arg!(require(inst, "inst"));
        let dataset_path = try_arg!(path_arg(dataset_out, "dataset_out"));
        let groups = try_status!(gapweld::candidates::candidate_groups(
            &inst.inner,
            group_size
        ));
        if !candidates_out.is_null() {
            let path = try_arg!(path_arg(candidates_out, "candidates_out"));
            try_status!(gapweld::candidates::write_candidates(&groups, &path));
        }
        let requests: Vec<gapweld::pointcloud::ExampleRequest<'_>> = groups
            .iter()
            .flat_map(|g| {
                g.candidates.iter().map(|c| {
                    let truth = inst.inner.truth_pairs.contains(&gapweld::gap::TruthPair {
                        top_fragment: g.top,
                        bottom_fragment: c.bottom,
                    });
                    gapweld::pointcloud::ExampleRequest {
                        inst: &inst.inner,
                        top: g.top,
                        bottom: c.bottom,
                        label: Some(u8::from(truth)),
                    }
                })
            })
            .collect();
        let dataset = try_status!(gapweld::pointcloud::build_dataset_auto_scale(
            &requests, cs, np, seed
        ));
        try_status!(gapweld::pointcloud::write_dataset(&dataset, &dataset_path));
        GwStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Scorer parameters and training
// ---------------------------------------------------------------------------

/// Fresh seeded parameters (Xavier-uniform weights, zero biases).
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn gw_params_init(seed: u64, out: *mut *mut GwScorerParams) -> GwStatus {
    run_guarded(|| {
        emit(
            out,
            GwScorerParams {
                inner: gapweld::scoring::init_scorer(seed),
            },
            "out",
        )
    })
}

/// # Safety
/// `path` must be a valid string; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gw_params_load(
    path: *const c_char,
    out: *mut *mut GwScorerParams,
) -> GwStatus {
    run_guarded(|| {
        let path = try_arg!(path_arg(path, "path"));
        let params = try_status!(gapweld::scoring::load_params(&path));
        emit(out, GwScorerParams { inner: params }, "out")
    })
}

/// # Safety
/// `params` must be a live handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gw_params_save(
    params: *const GwScorerParams,
    path: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let params = try_arg!(require(params, "params"));
        let path = try_arg!(path_arg(path, "path"));
        try_status!(gapweld::scoring::save_params(&params.inner, &path));
        GwStatus::Ok
    })
}

/// # Safety
/// `params` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gw_params_free(params: *mut GwScorerParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Train `params` in place on a labeled dataset file. When `final_loss` is
/// non-NULL it receives the last epoch's mean cross-entropy.
///
/// # Safety
/// `params` must be a live mutable handle; `dataset_path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gw_train(
    params: *mut GwScorerParams,
    dataset_path: *const c_char,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
    final_loss: *mut f64,
) -> GwStatus {
    run_guarded(|| {
        let params = try_arg!(require_mut(params, "params"));
        let path = try_arg!(path_arg(dataset_path, "dataset_path"));
        let dataset = try_status!(gapweld::pointcloud::read_dataset(&path));
        let cfg = TrainConfig {
            epochs,
            learning_rate,
            batch_size,
            seed,
        };
        let (trained, history) = try_status!(gapweld::scoring::train(&params.inner, &dataset, &cfg));
        params.inner = trained;
        if !final_loss.is_null() {
            *final_loss = history.last().copied().unwrap_or(f64::NAN);
        }
        GwStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Score a dataset file with the native network; writes the score TsV.
///
/// # Safety
/// `params` must be a live handle; paths valid strings.
#[no_mangle]
pub unsafe extern "C" fn gw_score_native(
    params: *const GwScorerParams,
    dataset_path: *const c_char,
    scores_out: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let params = try_arg!(require(params, "params"));
        let dataset_path = try_arg!(path_arg(dataset_path, "dataset_path"));
        let out = try_arg!(path_arg(scores_out, "scores_out"));
        let dataset = try_status!(gapweld::pointcloud::read_dataset(&dataset_path));
        let table = try_status!(gapweld::scoring::score_native(&params.inner, &dataset));
        try_status!(gapweld::scoring::write_scores(&table, &out));
        GwStatus::Ok
    })
}

/// Score an instance with the distance baseline; writes the score TSV.
///
/// # Safety
/// `inst` must be a live handle; `scores_out` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gw_score_baseline(
    inst: *const GwGapInstance,
    group_size: usize,
    scores_out: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let inst = try_arg!(require(inst, "inst"));
        let out = try_arg!(path_arg(scores_out, "scores_out"));
        let groups = try_status!(gapweld::candidates::candidate_groups(
            &inst.inner,
            group_size
        ));
        let table = gapweld::scoring::score_baseline(&groups);
        try_status!(gapweld::scoring::write_scores(&table, &out));
        GwStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Stitching and evaluation
// ---------------------------------------------------------------------------

/// Threshold a score TSV and apply the merges to the instance.
///
/// # Safety
/// `inst` must be a live handle; `scores_path` a valid string; `out` a valid
/// destination.
#[no_mangle]
pub unsafe extern "C" fn gw_stitch(
    inst: *const GwGapInstance,
    scores_path: *const c_char,
    threshold: f64,
    out: *mut *mut GwVolume,
) -> GwStatus {
    run_guarded(|| {
        let inst = try_arg!(require(inst, "inst"));
        let scores_path = try_arg!(path_arg(scores_path, "scores_path"));
        let scores = try_status!(gapweld::scoring::load_external_scores(&scores_path));
        let decisions = try_status!(gapweld::eval::apply_threshold(&scores, threshold));
        let stitched = try_status!(gapweld::eval::stitch(&inst.inner, &decisions));
        emit(out, GwVolume { inner: stitched }, "out")
    })
}

fn eval_options_from(cfg: &GwEvalConfig) -> EvalOptions {
    let mut opts = EvalOptions::new(RepConfig {
        cs: cfg.cs,
        np: cfg.np,
        norm_scale_nm: cfg.norm_scale_nm,
        seed: cfg.seed,
    });
    opts.group_size = cfg.group_size;
    opts.include_background = cfg.include_background;
    opts.include_gap = cfg.include_gap;
    opts.jobs = cfg.jobs;
    opts
}

/// Evaluate one instance against ground truth with scores from a TSV;
/// writes the report JSON.
///
/// # Safety
/// `gt` and `inst` must be live handles; `cfg` valid; paths valid strings.
#[no_mangle]
pub unsafe extern "C" fn gw_evaluate(
    gt: *const GwVolume,
    inst: *const GwGapInstance,
    scores_path: *const c_char,
    threshold: f64,
    cfg: *const GwEvalConfig,
    report_out: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let gt = try_arg!(require(gt, "gt"));
        let inst = try_arg!(require(inst, "inst"));
        let cfg = try_arg!(require(cfg, "cfg"));
        let scores_path = try_arg!(path_arg(scores_path, "scores_path"));
        let report_path = try_arg!(path_arg(report_out, "report_out"));
        let scores = try_status!(gapweld::scoring::load_external_scores(&scores_path));
        let opts = eval_options_from(cfg);
        let report = try_status!(gapweld::eval::evaluate_with_scores(
            &gt.inner,
            &inst.inner,
            &scores,
            threshold,
            &opts
        ));
        try_status!(gapweld::eval::write_report(&report, &report_path));
        GwStatus::Ok
    })
}

unsafe fn scorer_from(
    params: *const GwScorerParams,
) -> Result<Box<dyn Scorer>, GwStatus> {
    if params.is_null() {
        Ok(Box::new(BaselineDistanceScorer))
    } else {
        Ok(Box::new(NativeScorer {
            params: (*params).inner.clone(),
        }))
    }
}

/// Sliding-gap evaluation at one threshold; writes the report JSON. A NULL
/// `params` selects the distance baseline, otherwise the native network.
///
/// # Safety
/// `gt` must be a live handle; `cfg` valid; `report_out` a valid string;
/// `params` NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gw_sliding_eval(
    gt: *const GwVolume,
    ns: usize,
    params: *const GwScorerParams,
    threshold: f64,
    cfg: *const GwEvalConfig,
    report_out: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let gt = try_arg!(require(gt, "gt"));
        let cfg = try_arg!(require(cfg, "cfg"));
        let report_path = try_arg!(path_arg(report_out, "report_out"));
        let scorer = try_arg!(scorer_from(params));
        let opts = eval_options_from(cfg);
        let report = try_status!(gapweld::eval::sliding_eval(
            &gt.inner,
            ns,
            scorer.as_ref(),
            threshold,
            &opts
        ));
        try_status!(gapweld::eval::write_report(&report, &report_path));
        GwStatus::Ok
    })
}

/// Threshold sweep over the sliding protocol; writes the merge-curve CSV.
/// A NULL `params` selects the distance baseline.
///
/// # Safety
/// `gt` must be a live handle; `thresholds` must point at `n_thresholds`
/// doubles; `cfg` valid; `csv_out` a valid string; `params` NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gw_sweep(
    gt: *const GwVolume,
    ns: usize,
    params: *const GwScorerParams,
    thresholds: *const f64,
    n_thresholds: usize,
    cfg: *const GwEvalConfig,
    csv_out: *const c_char,
) -> GwStatus {
    run_guarded(|| {
        let gt = try_arg!(require(gt, "gt"));
        let cfg = try_arg!(require(cfg, "cfg"));
        let csv_path = try_arg!(path_arg(csv_out, "csv_out"));
        if thresholds.is_null() {
            set_error("thresholds is NULL");
            return GwStatus::NullPointer;
        }
        let grid = std::slice::from_raw_parts(thresholds, n_thresholds).to_vec();
        let scorer = try_arg!(scorer_from(params));
        let opts = eval_options_from(cfg);
        let table = try_status!(gapweld::eval::sweep(
            &gt.inner,
            ns,
            scorer.as_ref(),
            &grid,
            &opts
        ));
        try_status!(gapweld::eval::write_sweep_csv(&table, &csv_path));
        GwStatus::Ok
    })
}
