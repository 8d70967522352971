//! Stitching and evaluation: threshold scores into merge decisions, apply
//! them, and measure the damage repair.
//!
//! Variation of Information is computed with natural-log entropies (units
//! are nats) over a caller-supplied voxel mask. The composed evaluators
//! exclude the dropped slices (the prediction carries no labels there) and
//! background voxels by default; both toggles are exposed.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{self, CandidateGroup, Side};
use crate::error::{GapweldError, Result};
use crate::gap::{make_gap_instance, GapInstance, GapSpec, TruthPair};
use crate::pointcloud::{build_dataset, ExampleRequest, RepConfig};
use crate::scoring::{score_baseline, score_native, ScoreTable, ScorerParams};
use crate::volume::{LabelVolume, VoxelCoord};

/// The pairs whose merge probability strictly exceeded the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeDecisionSet {
    pub threshold: f64,
    pub pairs: std::collections::BTreeSet<(u64, u64)>,
}

/// Keep exactly the rows with `p_merge > t` (strict, so `t = 1` keeps none).
pub fn apply_threshold(scores: &ScoreTable, t: f64) -> Result<MergeDecisionSet> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GapweldError::invalid(format!(
            "threshold must lie in [0, 1], got {t}"
        )));
    }
    let pairs = scores
        .rows
        .iter()
        .filter(|r| r.p_merge > t)
        .map(|r| (r.top, r.bottom))
        .collect();
    Ok(MergeDecisionSet { threshold: t, pairs })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Apply merge decisions: union-find over fragment labels, then relabel each
/// fragment to the smallest label of its class. Transitive merges are
/// allowed; background and the foreground voxel set are untouched.
pub fn stitch(inst: &GapInstance, decisions: &MergeDecisionSet) -> Result<LabelVolume> {
    let labels: Vec<u64> = inst.origin_of.keys().copied().collect();
    let index_of: HashMap<u64, usize> =
        labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut uf = UnionFind::new(labels.len());
    for &(a, b) in &decisions.pairs {
        let ia = *index_of
            .get(&a)
            .ok_or_else(|| GapweldError::invalid(format!("unknown fragment label {a}")))?;
        let ib = *index_of
            .get(&b)
            .ok_or_else(|| GapweldError::invalid(format!("unknown fragment label {b}")))?;
        uf.union(ia, ib);
    }
    // Labels are sorted ascending, so the root with the smallest index is
    // also the smallest label of its class.
    let mut target: HashMap<u64, u64> = HashMap::with_capacity(labels.len());
    for (i, &l) in labels.iter().enumerate() {
        let root = uf.find(i);
        target.insert(l, labels[root]);
    }
    let mut out = inst.gapped.clone();
    out.map_labels(|l| if l == 0 { 0 } else { target[&l] });
    Ok(out)
}

/// Conditional-entropy halves of Variation of Information, in nats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViScores {
    /// H(pred | gt): how much the prediction splits ground-truth segments.
    pub split: f64,
    /// H(gt | pred): how much the prediction merges ground-truth segments.
    pub merge: f64,
    pub total: f64,
}

/// Sum entropy terms in a canonical order so the result is exactly invariant
/// under label permutations and argument transposition.
fn conditional_entropy(mut terms: Vec<(u64, u64)>, n: u64) -> f64 {
    terms.sort_unstable();
    let n = n as f64;
    terms
        .iter()
        .map(|&(joint, marginal)| {
            if joint == marginal {
                0.0 // within-cell term vanishes; avoids ln(1) noise
            } else {
                (joint as f64 / n) * ((marginal as f64 / joint as f64).ln())
            }
        })
        .sum()
}

/// Variation of Information between two equally-sized volumes over the
/// voxels selected by `mask`. Natural-log entropies; `0 ln 0 = 0`.
pub fn variation_of_information(
    pred: &LabelVolume,
    gt: &LabelVolume,
    mask: impl Fn(VoxelCoord) -> bool,
) -> Result<ViScores> {
    if pred.dims() != gt.dims() {
        return Err(GapweldError::invalid(format!(
            "volume dims differ: {:?} vs {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let mut joint: HashMap<(u64, u64), u64> = HashMap::new();
    let mut pred_marginal: HashMap<u64, u64> = HashMap::new();
    let mut gt_marginal: HashMap<u64, u64> = HashMap::new();
    let mut n = 0u64;
    for c in pred.coords() {
        if !mask(c) {
            continue;
        }
        let s = pred.get(c.x, c.y, c.z);
        let t = gt.get(c.x, c.y, c.z);
        *joint.entry((s, t)).or_insert(0) += 1;
        *pred_marginal.entry(s).or_insert(0) += 1;
        *gt_marginal.entry(t).or_insert(0) += 1;
        n += 1;
    }
    if n == 0 {
        return Err(GapweldError::invalid("mask selects no voxels"));
    }
    let split_terms: Vec<(u64, u64)> = joint
        .iter()
        .map(|(&(_, t), &c)| (c, gt_marginal[&t]))
        .collect();
    let merge_terms: Vec<(u64, u64)> = joint
        .iter()
        .map(|(&(s, _), &c)| (c, pred_marginal[&s]))
        .collect();
    let split = conditional_entropy(split_terms, n);
    let merge = conditional_entropy(merge_terms, n);
    Ok(ViScores {
        split,
        merge,
        total: split + merge,
    })
}

/// `(vi_pre - vi_post) * 100 / vi_pre`. May be negative when stitching made
/// things worse. `vi_pre` must be positive.
pub fn percent_reduction(vi_pre: f64, vi_post: f64) -> Result<f64> {
    if !(vi_pre > 0.0) {
        return Err(GapweldError::invalid(format!(
            "percent reduction needs vi_pre > 0, got {vi_pre}"
        )));
    }
    Ok((vi_pre - vi_post) * 100.0 / vi_pre)
}

/// Tallies behind the merge rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub truth_pairs: u64,
    pub top_fragments: u64,
}

impl MergeCounts {
    fn accumulate(&mut self, other: &MergeCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.truth_pairs += other.truth_pairs;
        self.top_fragments += other.top_fragments;
    }
}

/// Merge success rate (recall of true cross-gap connections) and merge error
/// rate (false positives per top fragment; may exceed 1). With no truth
/// pairs at all, success is vacuously 1.
pub fn merge_rates(
    decisions: &MergeDecisionSet,
    inst: &GapInstance,
) -> Result<(f64, f64, MergeCounts)> {
    let tops = candidates::border_fragments(inst, Side::Top);
    if tops.is_empty() {
        return Err(GapweldError::invalid(
            "no top border fragments; merge error rate is undefined",
        ));
    }
    let tp = decisions
        .pairs
        .iter()
        .filter(|&&(t, b)| {
            inst.truth_pairs.contains(&TruthPair {
                top_fragment: t,
                bottom_fragment: b,
            })
        })
        .count() as u64;
    let fp = decisions.pairs.len() as u64 - tp;
    let counts = MergeCounts {
        true_positives: tp,
        false_positives: fp,
        truth_pairs: inst.truth_pairs.len() as u64,
        top_fragments: tops.len() as u64,
    };
    let success = if counts.truth_pairs == 0 {
        1.0
    } else {
        tp as f64 / counts.truth_pairs as f64
    };
    let error = fp as f64 / counts.top_fragments as f64;
    Ok((success, error, counts))
}

// ---------------------------------------------------------------------------
// Scorers and composed evaluation
// ---------------------------------------------------------------------------

/// A source of merge probabilities for the candidate groups of an instance.
pub trait Scorer: Sync {
    fn name(&self) -> &'static str;
    fn score(
        &self,
        inst: &GapInstance,
        groups: &[CandidateGroup],
        rep: &RepConfig,
    ) -> Result<ScoreTable>;
}

/// The non-learning baseline: merge each top with its nearest candidate.
pub struct BaselineDistanceScorer;

impl Scorer for BaselineDistanceScorer {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn score(
        &self,
        _inst: &GapInstance,
        groups: &[CandidateGroup],
        _rep: &RepConfig,
    ) -> Result<ScoreTable> {
        Ok(score_baseline(groups))
    }
}

/// The trained point network applied to freshly built point clouds. The
/// `RepConfig` must carry the normalization scale the network was trained
/// with.
pub struct NativeScorer {
    pub params: ScorerParams,
}

impl Scorer for NativeScorer {
    fn name(&self) -> &'static str {
        "native"
    }

    fn score(
        &self,
        inst: &GapInstance,
        groups: &[CandidateGroup],
        rep: &RepConfig,
    ) -> Result<ScoreTable> {
        let requests: Vec<ExampleRequest<'_>> = groups
            .iter()
            .flat_map(|g| {
                g.candidates.iter().map(|c| ExampleRequest {
                    inst,
                    top: g.top,
                    bottom: c.bottom,
                    label: None,
                })
            })
            .collect();
        let dataset = build_dataset(&requests, rep)?;
        score_native(&self.params, &dataset)
    }
}

/// Knobs shared by the composed evaluators.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub group_size: usize,
    pub rep: RepConfig,
    pub include_background: bool,
    pub include_gap: bool,
    /// Parallelism across gap positions; 1 is sequential and bit-identical
    /// to any other setting.
    pub jobs: usize,
}

impl EvalOptions {
    pub fn new(rep: RepConfig) -> Self {
        EvalOptions {
            group_size: candidates::DEFAULT_GROUP_SIZE,
            rep,
            include_background: false,
            include_gap: false,
            jobs: 1,
        }
    }
}

/// Everything measured for one configuration; field means over positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ns: usize,
    pub threshold: f64,
    pub vi_pre: f64,
    pub vi_post: f64,
    pub percent_reduction: f64,
    pub merge_success_rate: f64,
    pub merge_error_rate: f64,
    pub counts: MergeCounts,
    pub positions: usize,
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report)
        .map_err(|e| GapweldError::invalid(format!("report encode: {e}")))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| GapweldError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let bytes = fs::read(path).map_err(|e| GapweldError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| GapweldError::format(path, e.to_string()))
}

fn vi_mask(
    gt: &LabelVolume,
    spec: GapSpec,
    include_background: bool,
    include_gap: bool,
) -> impl Fn(VoxelCoord) -> bool + '_ {
    move |c: VoxelCoord| {
        if !include_gap && c.z >= spec.z0 && c.z < spec.z0 + spec.ns {
            return false;
        }
        include_background || gt.get(c.x, c.y, c.z) != 0
    }
}

/// Evaluate one instance against ground truth with precomputed scores.
pub fn evaluate_with_scores(
    gt: &LabelVolume,
    inst: &GapInstance,
    scores: &ScoreTable,
    threshold: f64,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    scores.validate()?;
    let mask = vi_mask(gt, inst.spec, opts.include_background, opts.include_gap);
    let vi_pre = variation_of_information(&inst.gapped, gt, &mask)?.total;
    let decisions = apply_threshold(scores, threshold)?;
    let stitched = stitch(inst, &decisions)?;
    let vi_post = variation_of_information(&stitched, gt, &mask)?.total;
    let (success, error, counts) = merge_rates(&decisions, inst)?;
    Ok(EvalReport {
        ns: inst.spec.ns,
        threshold,
        vi_pre,
        vi_post,
        percent_reduction: percent_reduction(vi_pre, vi_post)?,
        merge_success_rate: success,
        merge_error_rate: error,
        counts,
        positions: 1,
    })
}

struct PositionOutcome {
    vi_pre: f64,
    per_threshold: Vec<ThresholdOutcome>,
}

struct ThresholdOutcome {
    vi_post: f64,
    success: f64,
    error: f64,
    counts: MergeCounts,
}

/// Score once, threshold many times.
fn run_position(
    gt: &LabelVolume,
    z0: usize,
    ns: usize,
    scorer: &dyn Scorer,
    thresholds: &[f64],
    opts: &EvalOptions,
) -> Result<PositionOutcome> {
    let inst = make_gap_instance(gt, GapSpec::new(z0, ns))?;
    let groups = candidates::candidate_groups(&inst, opts.group_size)?;
    let scores = scorer.score(&inst, &groups, &opts.rep)?;
    let mask = vi_mask(gt, inst.spec, opts.include_background, opts.include_gap);
    let vi_pre = variation_of_information(&inst.gapped, gt, &mask)?.total;

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let decisions = apply_threshold(&scores, t)?;
        let stitched = stitch(&inst, &decisions)?;
        let vi_post = variation_of_information(&stitched, gt, &mask)?.total;
        let (success, error, counts) = merge_rates(&decisions, &inst)?;
        per_threshold.push(ThresholdOutcome {
            vi_post,
            success,
            error,
            counts,
        });
    }
    Ok(PositionOutcome { vi_pre, per_threshold })
}

fn admissible_positions(zdim: usize, ns: usize) -> Vec<usize> {
    // z0 = 0 and z0 + ns = zdim are excluded so both sides always exist.
    if zdim < ns + 2 {
        return Vec::new();
    }
    (1..=zdim - ns - 1).collect()
}

fn run_all_positions(
    gt: &LabelVolume,
    ns: usize,
    scorer: &dyn Scorer,
    thresholds: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<PositionOutcome>> {
    let positions = admissible_positions(gt.dims().2, ns);
    if positions.is_empty() {
        return Err(GapweldError::invalid(format!(
            "no admissible gap positions for ns {ns} in a volume with z dim {}",
            gt.dims().2
        )));
    }
    if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| GapweldError::invalid(format!("thread pool: {e}")))?;
        pool.install(|| {
            positions
                .par_iter()
                .map(|&z0| run_position(gt, z0, ns, scorer, thresholds, opts))
                .collect()
        })
    } else {
        positions
            .iter()
            .map(|&z0| run_position(gt, z0, ns, scorer, thresholds, opts))
            .collect()
    }
}

/// Collapse per-position outcomes for one threshold into a report.
/// VI fields are arithmetic means over positions; the headline percent
/// reduction is computed from those means so a position with tiny vi_pre
/// cannot dominate; counts are totals and rates are means.
fn aggregate(
    outcomes: &[PositionOutcome],
    which: usize,
    ns: usize,
    threshold: f64,
) -> Result<EvalReport> {
    let n = outcomes.len() as f64;
    let vi_pre = outcomes.iter().map(|o| o.vi_pre).sum::<f64>() / n;
    let vi_post = outcomes
        .iter()
        .map(|o| o.per_threshold[which].vi_post)
        .sum::<f64>()
        / n;
    let success = outcomes
        .iter()
        .map(|o| o.per_threshold[which].success)
        .sum::<f64>()
        / n;
    let error = outcomes
        .iter()
        .map(|o| o.per_threshold[which].error)
        .sum::<f64>()
        / n;
    let mut counts = MergeCounts::default();
    for o in outcomes {
        counts.accumulate(&o.per_threshold[which].counts);
    }
    Ok(EvalReport {
        ns,
        threshold,
        vi_pre,
        vi_post,
        percent_reduction: percent_reduction(vi_pre, vi_post)?,
        merge_success_rate: success,
        merge_error_rate: error,
        counts,
        positions: outcomes.len(),
    })
}

/// Drop `ns` slices at every admissible z index, run the full pipeline at
/// each, and average. VI is measured outside the dropped slices.
pub fn sliding_eval(
    gt: &LabelVolume,
    ns: usize,
    scorer: &dyn Scorer,
    threshold: f64,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let outcomes = run_all_positions(gt, ns, scorer, &[threshold], opts)?;
    aggregate(&outcomes, 0, ns, threshold)
}

/// One sweep row; the merge-curve CSV serializes these.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub vi_pre: f64,
    pub vi_post: f64,
    pub percent_reduction: f64,
    pub success_rate: f64,
    pub error_rate: f64,
    pub optimal: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// Evaluate a threshold grid with shared scoring: each gap position is
/// scored once and re-thresholded per grid value. The row with the maximal
/// percent reduction is flagged optimal (first on ties).
pub fn sweep(
    gt: &LabelVolume,
    ns: usize,
    scorer: &dyn Scorer,
    thresholds: &[f64],
    opts: &EvalOptions,
) -> Result<SweepTable> {
    if thresholds.is_empty() {
        return Err(GapweldError::invalid("threshold grid is empty"));
    }
    for &t in thresholds {
        if !(0.0..=1.0).contains(&t) {
            return Err(GapweldError::invalid(format!(
                "threshold {t} outside [0, 1]"
            )));
        }
    }
    let outcomes = run_all_positions(gt, ns, scorer, thresholds, opts)?;
    let mut rows = Vec::with_capacity(thresholds.len());
    for (i, &t) in thresholds.iter().enumerate() {
        let report = aggregate(&outcomes, i, ns, t)?;
        rows.push(SweepRow {
            threshold: t,
            vi_pre: report.vi_pre,
            vi_post: report.vi_post,
            percent_reduction: report.percent_reduction,
            success_rate: report.merge_success_rate,
            error_rate: report.merge_error_rate,
            optimal: false,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.percent_reduction
                .partial_cmp(&b.percent_reduction)
                .unwrap()
                .then(ib.cmp(ia)) // prefer the earliest row on ties
        })
        .map(|(i, _)| i)
        .unwrap();
    rows[best].optimal = true;
    Ok(SweepTable { rows })
}

const SWEEP_HEADER: &str = "threshold,vi_pre,vi_post,percent_reduction,success_rate,error_rate,optimal";

/// Plot-ready CSV for merge curves.
pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.threshold,
            r.vi_pre,
            r.vi_post,
            r.percent_reduction,
            r.success_rate,
            r.error_rate,
            r.optimal
        ));
    }
    fs::write(path, out).map_err(|e| GapweldError::io(path, e))
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let file = fs::File::open(path).map_err(|e| GapweldError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == SWEEP_HEADER => {}
        Some(Ok(h)) => {
            return Err(GapweldError::format(
                path,
                format!("expected header {SWEEP_HEADER:?}, got {h:?}"),
            ))
        }
        Some(Err(e)) => return Err(GapweldError::io(path, e)),
        None => return Err(GapweldError::format(path, "empty sweep file")),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| GapweldError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(GapweldError::format(
                path,
                format!("line {}: expected 7 fields", lineno + 2),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| GapweldError::format(path, format!("line {}: bad number {s:?}", lineno + 2)))
        };
        let optimal = match fields[6] {
            "true" => true,
            "false" => false,
            other => {
                return Err(GapweldError::format(
                    path,
                    format!("line {}: bad optimal flag {other:?}", lineno + 2),
                ))
            }
        };
        rows.push(SweepRow {
            threshold: num(fields[0])?,
            vi_pre: num(fields[1])?,
            vi_post: num(fields[2])?,
            percent_reduction: num(fields[3])?,
            success_rate: num(fields[4])?,
            error_rate: num(fields[5])?,
            optimal,
        });
    }
    Ok(SweepTable { rows })
}

/// The paper-style default grid 0.1, 0.2, ..., 0.9.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}
