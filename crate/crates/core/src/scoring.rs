//! Merge-probability scorers.
//!
//! Three interchangeable sources of per-pair merge probabilities:
//!
//! * [`score_baseline`]: the non-learning heuristic -- each top fragment's
//!   nearest candidate gets probability 1, everything else 0.
//! * a small trainable point network ([`init_scorer`], [`train`],
//!   [`score_native`]): a per-point MLP (3 -> 64 -> 128, ReLU), a
//!   coordinate-wise max over points, and a 128 -> 64 -> 2 head with
//!   softmax. The max pool makes it invariant to point order.
//! * [`load_external_scores`]: a TSV bridge for probabilities produced by
//!   an out-of-process model.
//!
//! The network is trained with plain mini-batch gradient descent on mean
//! cross-entropy; gradients are hand-derived and checked against central
//! finite differences by [`grad_check`].

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateGroup;
use crate::error::{GapweldError, Result};
use crate::pointcloud::{Dataset, PointCloudExample};
use crate::seeds;

/// One scored candidate pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreRow {
    pub example_id: u64,
    pub top: u64,
    pub bottom: u64,
    pub p_merge: f64,
}

/// Per-pair merge probabilities, one row per candidate pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Probability range and example-id uniqueness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for row in &self.rows {
            if !row.p_merge.is_finite() || !(0.0..=1.0).contains(&row.p_merge) {
                return Err(GapweldError::invalid(format!(
                    "p_merge {} for example {} is outside [0, 1]",
                    row.p_merge, row.example_id
                )));
            }
            if !seen.insert(row.example_id) {
                return Err(GapweldError::invalid(format!(
                    "duplicate example id {}",
                    row.example_id
                )));
            }
        }
        Ok(())
    }

    /// Every example id must belong to the given set.
    pub fn check_ids(&self, known: &BTreeSet<u64>) -> Result<()> {
        for row in &self.rows {
            if !known.contains(&row.example_id) {
                return Err(GapweldError::invalid(format!(
                    "unknown example id {}",
                    row.example_id
                )));
            }
        }
        Ok(())
    }
}

const SCORE_HEADER: &str = "example_id\ttop\tbottom\tp_merge";

/// Write a score table as UTF-8 TSV with LF line endings.
pub fn write_scores(table: &ScoreTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(SCORE_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            row.example_id, row.top, row.bottom, row.p_merge
        ));
    }
    fs::write(path, out).map_err(|e| GapweldError::io(path, e))
}

/// Parse and validate a score TSV (range check, duplicate-id check).
pub fn load_external_scores(path: &Path) -> Result<ScoreTable> {
    let file = fs::File::open(path).map_err(|e| GapweldError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == SCORE_HEADER => {}
        Some(Ok(h)) => {
            return Err(GapweldError::format(
                path,
                format!("expected header {SCORE_HEADER:?}, got {h:?}"),
            ))
        }
        Some(Err(e)) => return Err(GapweldError::io(path, e)),
        None => return Err(GapweldError::format(path, "empty score file")),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| GapweldError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(GapweldError::format(
                path,
                format!("line {}: expected 4 tab-separated fields", lineno + 2),
            ));
        }
        let parse_u64 = |s: &str, name: &str| {
            s.parse::<u64>().map_err(|_| {
                GapweldError::format(path, format!("line {}: bad {name} {s:?}", lineno + 2))
            })
        };
        let p_merge: f64 = fields[3].parse().map_err(|_| {
            GapweldError::format(
                path,
                format!("line {}: bad p_merge {:?}", lineno + 2, fields[3]),
            )
        })?;
        rows.push(ScoreRow {
            example_id: parse_u64(fields[0], "example_id")?,
            top: parse_u64(fields[1], "top")?,
            bottom: parse_u64(fields[2], "bottom")?,
            p_merge,
        });
    }
    let table = ScoreTable { rows };
    table.validate().map_err(|e| match e {
        GapweldError::Invalid(reason) => GapweldError::format(path, reason),
        other => other,
    })?;
    Ok(table)
}

/// Hard 0/1 scores: for each top, the minimum-distance candidate gets 1.0,
/// the rest 0.0. Candidates are already in distance order with ties broken,
/// so under any threshold in (0, 1) exactly one merge per top survives.
pub fn score_baseline(groups: &[CandidateGroup]) -> ScoreTable {
    let mut rows = Vec::new();
    let mut next_id = 0u64;
    for group in groups {
        for (rank, c) in group.candidates.iter().enumerate() {
            rows.push(ScoreRow {
                example_id: next_id,
                top: group.top,
                bottom: c.bottom,
                p_merge: if rank == 0 { 1.0 } else { 0.0 },
            });
            next_id += 1;
        }
    }
    ScoreTable { rows }
}

// ---------------------------------------------------------------------------
// Point network
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn xavier(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    fn apply(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            // Four fixed accumulator lanes; the summation order is static,
            // so results stay bit-reproducible run to run.
            let mut acc = [0.0f64; 4];
            let chunks = row.len() / 4;
            for i in 0..chunks {
                let base = i * 4;
                acc[0] += row[base] * input[base];
                acc[1] += row[base + 1] * input[base + 1];
                acc[2] += row[base + 2] * input[base + 2];
                acc[3] += row[base + 3] * input[base + 3];
            }
            let mut tail = self.bias[o];
            for i in chunks * 4..row.len() {
                tail += row[i] * input[i];
            }
            *out_v = tail + ((acc[0] + acc[2]) + (acc[1] + acc[3]));
        }
    }

    fn check_shape(&self, in_dim: usize, out_dim: usize, name: &str) -> Result<()> {
        if self.in_dim != in_dim || self.out_dim != out_dim {
            return Err(GapweldError::invalid(format!(
                "{name} must be {out_dim}x{in_dim}, got {}x{}",
                self.out_dim, self.in_dim
            )));
        }
        if self.weights.len() != in_dim * out_dim || self.bias.len() != out_dim {
            return Err(GapweldError::invalid(format!(
                "{name} weight/bias lengths inconsistent with declared shape"
            )));
        }
        if self
            .weights
            .iter()
            .chain(self.bias.iter())
            .any(|v| !v.is_finite())
        {
            return Err(GapweldError::invalid(format!("{name} has non-finite entries")));
        }
        Ok(())
    }
}

/// Widths of the per-point MLP and the pooled head.
pub const POINT_DIMS: [usize; 3] = [3, 64, 128];
pub const HEAD_DIMS: [usize; 3] = [128, 64, 2];

/// All weights of the point scorer, f64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerParams {
    pub point_layers: Vec<DenseLayer>,
    pub head_layers: Vec<DenseLayer>,
}

impl ScorerParams {
    pub fn validate(&self) -> Result<()> {
        if self.point_layers.len() != 2 || self.head_layers.len() != 2 {
            return Err(GapweldError::invalid(
                "scorer must have 2 point layers and 2 head layers",
            ));
        }
        self.point_layers[0].check_shape(POINT_DIMS[0], POINT_DIMS[1], "point layer 0")?;
        self.point_layers[1].check_shape(POINT_DIMS[1], POINT_DIMS[2], "point layer 1")?;
        self.head_layers[0].check_shape(HEAD_DIMS[0], HEAD_DIMS[1], "head layer 0")?;
        self.head_layers[1].check_shape(HEAD_DIMS[1], HEAD_DIMS[2], "head layer 1")?;
        Ok(())
    }

    fn zeros_like() -> Self {
        ScorerParams {
            point_layers: vec![
                DenseLayer::zeros(POINT_DIMS[0], POINT_DIMS[1]),
                DenseLayer::zeros(POINT_DIMS[1], POINT_DIMS[2]),
            ],
            head_layers: vec![
                DenseLayer::zeros(HEAD_DIMS[0], HEAD_DIMS[1]),
                DenseLayer::zeros(HEAD_DIMS[1], HEAD_DIMS[2]),
            ],
        }
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.point_layers.iter().chain(self.head_layers.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.point_layers
            .iter_mut()
            .chain(self.head_layers.iter_mut())
    }

    /// Total number of scalar parameters (weights + biases).
    pub fn len(&self) -> usize {
        self.layers()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_flat(&self, mut i: usize) -> f64 {
        for l in self.layers() {
            if i < l.weights.len() {
                return l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("flat index out of range");
    }

    fn set_flat(&mut self, mut i: usize, v: f64) {
        for l in self.layers_mut() {
            if i < l.weights.len() {
                l.weights[i] = v;
                return;
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                l.bias[i] = v;
                return;
            }
            i -= l.bias.len();
        }
        panic!("flat index out of range");
    }

    /// In-place `w -= lr * g` over every parameter.
    fn step(&mut self, lr: f64, grad: &ScorerParams) {
        for (l, g) in self.layers_mut().zip(grad.layers()) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in l.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }

    fn add_assign(&mut self, other: &ScorerParams) {
        for (l, o) in self.layers_mut().zip(other.layers()) {
            for (w, ow) in l.weights.iter_mut().zip(&o.weights) {
                *w += ow;
            }
            for (b, ob) in l.bias.iter_mut().zip(&o.bias) {
                *b += ob;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for l in self.layers_mut() {
            for w in &mut l.weights {
                *w *= s;
            }
            for b in &mut l.bias {
                *b *= s;
            }
        }
    }
}

/// Deterministic seeded initialization: Xavier-uniform weights, zero biases.
pub fn init_scorer(seed: u64) -> ScorerParams {
    let mut rng = seeds::rng_from(&[0x5c0e_e12a, seed]);
    ScorerParams {
        point_layers: vec![
            DenseLayer::xavier(POINT_DIMS[0], POINT_DIMS[1], &mut rng),
            DenseLayer::xavier(POINT_DIMS[1], POINT_DIMS[2], &mut rng),
        ],
        head_layers: vec![
            DenseLayer::xavier(HEAD_DIMS[0], HEAD_DIMS[1], &mut rng),
            DenseLayer::xavier(HEAD_DIMS[1], HEAD_DIMS[2], &mut rng),
        ],
    }
}

/// Save params as JSON with explicit layer shapes.
pub fn save_params(params: &ScorerParams, path: &Path) -> Result<()> {
    params.validate()?;
    let mut bytes = serde_json::to_vec(params)
        .map_err(|e| GapweldError::invalid(format!("params encode: {e}")))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| GapweldError::io(path, e))
}

pub fn load_params(path: &Path) -> Result<ScorerParams> {
    let bytes = fs::read(path).map_err(|e| GapweldError::io(path, e))?;
    let params: ScorerParams = serde_json::from_slice(&bytes)
        .map_err(|e| GapweldError::format(path, e.to_string()))?;
    params
        .validate()
        .map_err(|e| GapweldError::format(path, e.to_string()))?;
    Ok(params)
}

struct ForwardCache {
    /// Channel-wise max over per-point features.
    pooled: Vec<f64>,
    /// Winning point index per channel (first maximizer).
    argmax: Vec<usize>,
    /// Head hidden pre-activations.
    head_pre: Vec<f64>,
    head_hidden: Vec<f64>,
    probs: [f64; 2],
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn run_forward(params: &ScorerParams, points: &[[f32; 3]]) -> ForwardCache {
    let c1 = POINT_DIMS[1];
    let c2 = POINT_DIMS[2];
    let mut pooled = vec![f64::NEG_INFINITY; c2];
    let mut argmax = vec![0usize; c2];
    let mut h1 = vec![0.0f64; c1];
    let mut h2 = vec![0.0f64; c2];
    for (i, p) in points.iter().enumerate() {
        let x = [p[0] as f64, p[1] as f64, p[2] as f64];
        params.point_layers[0].apply(&x, &mut h1);
        relu_inplace(&mut h1);
        params.point_layers[1].apply(&h1, &mut h2);
        relu_inplace(&mut h2);
        for c in 0..c2 {
            if h2[c] > pooled[c] {
                pooled[c] = h2[c];
                argmax[c] = i;
            }
        }
    }

    let mut head_pre = vec![0.0f64; HEAD_DIMS[1]];
    params.head_layers[0].apply(&pooled, &mut head_pre);
    let mut head_hidden = head_pre.clone();
    relu_inplace(&mut head_hidden);
    let mut logits = [0.0f64; 2];
    params.head_layers[1].apply(&head_hidden, &mut logits);

    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    ForwardCache {
        pooled,
        argmax,
        head_pre,
        head_hidden,
        probs: [e0 / z, e1 / z],
    }
}

/// Probability pair `(p0, p1)` for an example; `p1` is the merge
/// probability. Invariant under any permutation of the points.
pub fn forward(params: &ScorerParams, ex: &PointCloudExample) -> Result<(f64, f64)> {
    params.validate()?;
    if ex.points.is_empty() {
        return Err(GapweldError::invalid("example has no points"));
    }
    if ex
        .points
        .iter()
        .any(|p| p.iter().any(|v| !v.is_finite()))
    {
        return Err(GapweldError::invalid("example contains non-finite coordinates"));
    }
    let cache = run_forward(params, &ex.points);
    Ok((cache.probs[0], cache.probs[1]))
}

fn cross_entropy(probs: &[f64; 2], y: u8) -> f64 {
    -probs[y as usize].ln()
}

/// Gradient of the cross-entropy loss w.r.t. every parameter of the scorer.
fn backward(
    params: &ScorerParams,
    points: &[[f32; 3]],
    cache: &ForwardCache,
    y: u8,
) -> ScorerParams {
    let mut grad = ScorerParams::zeros_like();
    // Softmax + CE: dL/dlogit = p - onehot(y).
    let mut dlogits = [cache.probs[0], cache.probs[1]];
    dlogits[y as usize] -= 1.0;

    // Head output layer.
    {
        let g = &mut grad.head_layers[1];
        for o in 0..HEAD_DIMS[2] {
            for i in 0..HEAD_DIMS[1] {
                g.weights[o * HEAD_DIMS[1] + i] = dlogits[o] * cache.head_hidden[i];
            }
            g.bias[o] = dlogits[o];
        }
    }
    // Into head hidden.
    let w_out = &params.head_layers[1];
    let mut d_hidden = vec![0.0f64; HEAD_DIMS[1]];
    for (i, dh) in d_hidden.iter_mut().enumerate() {
        for o in 0..HEAD_DIMS[2] {
            *dh += w_out.weights[o * HEAD_DIMS[1] + i] * dlogits[o];
        }
        if cache.head_pre[i] <= 0.0 {
            *dh = 0.0;
        }
    }
    // Head hidden layer.
    {
        let g = &mut grad.head_layers[0];
        for o in 0..HEAD_DIMS[1] {
            for i in 0..HEAD_DIMS[0] {
                g.weights[o * HEAD_DIMS[0] + i] = d_hidden[o] * cache.pooled[i];
            }
            g.bias[o] = d_hidden[o];
        }
    }
    // Into the pooled features.
    let w_h0 = &params.head_layers[0];
    let mut d_pooled = vec![0.0f64; HEAD_DIMS[0]];
    for (c, dp) in d_pooled.iter_mut().enumerate() {
        for o in 0..HEAD_DIMS[1] {
            *dp += w_h0.weights[o * HEAD_DIMS[0] + c] * d_hidden[o];
        }
    }

    // Max pool routes each channel's gradient to its winning point. Group
    // channels by winning point so each point's MLP is replayed once.
    let c1 = POINT_DIMS[1];
    let c2 = POINT_DIMS[2];
    let mut channels_of: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for c in 0..c2 {
        if d_pooled[c] != 0.0 {
            channels_of.entry(cache.argmax[c]).or_default().push(c);
        }
    }

    let mut h1 = vec![0.0f64; c1];
    let mut a2 = vec![0.0f64; c2];
    for (&pt, channels) in &channels_of {
        let p = points[pt];
        let x = [p[0] as f64, p[1] as f64, p[2] as f64];
        params.point_layers[0].apply(&x, &mut h1);
        let a1 = h1.clone();
        relu_inplace(&mut h1);
        params.point_layers[1].apply(&h1, &mut a2);

        let mut d_h1 = vec![0.0f64; c1];
        for &c in channels {
            // ReLU on the second point layer, at the pooled winner.
            if a2[c] <= 0.0 {
                continue;
            }
            let d = d_pooled[c];
            let g2 = &mut grad.point_layers[1];
            for i in 0..c1 {
                g2.weights[c * c1 + i] += d * h1[i];
            }
            g2.bias[c] += d;
            let row = &params.point_layers[1].weights[c * c1..(c + 1) * c1];
            for i in 0..c1 {
                d_h1[i] += row[i] * d;
            }
        }
        let g1 = &mut grad.point_layers[0];
        for (i, mut dv) in d_h1.iter().copied().enumerate() {
            if a1[i] <= 0.0 {
                dv = 0.0;
            }
            if dv != 0.0 {
                for (a, xv) in x.iter().enumerate() {
                    g1.weights[i * 3 + a] += dv * xv;
                }
                g1.bias[i] += dv;
            }
        }
    }

    grad
}

fn example_loss_and_grad(
    params: &ScorerParams,
    ex: &PointCloudExample,
    y: u8,
) -> (f64, ScorerParams) {
    let cache = run_forward(params, &ex.points);
    let loss = cross_entropy(&cache.probs, y);
    let grad = backward(params, &ex.points, &cache, y);
    (loss, grad)
}

/// Training hyperparameters. `learning_rate` may be zero (no-op steps);
/// negative rates are rejected.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.001,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(GapweldError::invalid("epochs must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(GapweldError::invalid("learning_rate must be >= 0"));
        }
        if self.batch_size < 1 {
            return Err(GapweldError::invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Mini-batch gradient descent on mean cross-entropy. Returns the trained
/// parameters and the mean loss per epoch (running loss, summed in example
/// order so runs are bit-reproducible for a fixed seed).
pub fn train(
    params: &ScorerParams,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ScorerParams, Vec<f64>)> {
    params.validate()?;
    cfg.validate()?;
    let labels: Vec<u8> = dataset
        .examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            ex.label
                .ok_or_else(|| GapweldError::invalid(format!("example {i} has no label")))
        })
        .collect::<Result<_>>()?;
    if labels.is_empty() {
        return Err(GapweldError::invalid("dataset is empty"));
    }
    let distinct: BTreeSet<u8> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        log::warn!(
            "training dataset has a single class ({:?}); proceeding anyway",
            distinct
        );
    }

    let n = labels.len();
    let mut params = params.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = vec![0.0f64; n];

    for epoch in 0..cfg.epochs {
        let mut rng = seeds::rng_from(&[0x7e41_0c5e, cfg.seed, epoch as u64]);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, ScorerParams)> = batch
                .par_iter()
                .map(|&i| example_loss_and_grad(&params, &dataset.examples[i], labels[i]))
                .collect();
            let mut grad = ScorerParams::zeros_like();
            for (&i, (loss, g)) in batch.iter().zip(&results) {
                losses[i] = *loss;
                grad.add_assign(g);
            }
            grad.scale(1.0 / batch.len() as f64);
            params.step(cfg.learning_rate, &grad);
        }
        history.push(losses.iter().sum::<f64>() / n as f64);
    }
    Ok((params, history))
}

/// Compare the analytic gradient against central finite differences over
/// every parameter; returns the maximum relative error. Entries smaller than
/// 1e-2 in magnitude are compared on that absolute scale instead, which
/// keeps float noise in near-zero gradients from dominating the ratio.
pub fn grad_check(params: &ScorerParams, ex: &PointCloudExample, eps: f64) -> Result<f64> {
    params.validate()?;
    if !(eps > 0.0) {
        return Err(GapweldError::invalid("eps must be > 0"));
    }
    let y = ex
        .label
        .ok_or_else(|| GapweldError::invalid("grad_check needs a labeled example"))?;
    let (_, analytic) = example_loss_and_grad(params, ex, y);
    let total = params.len();

    let max_err = (0..total)
        .into_par_iter()
        .chunks(512)
        .map(|chunk| {
            let mut local = params.clone();
            let mut worst = 0.0f64;
            for i in chunk {
                let w = local.get_flat(i);
                local.set_flat(i, w + eps);
                let up = cross_entropy(&run_forward(&local, &ex.points).probs, y);
                local.set_flat(i, w - eps);
                let down = cross_entropy(&run_forward(&local, &ex.points).probs, y);
                local.set_flat(i, w);
                let numeric = (up - down) / (2.0 * eps);
                let a = analytic.get_flat(i);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2);
                worst = worst.max(err);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(max_err)
}

/// Score every example of a dataset with the native network. Example ids
/// are the dataset row indices.
pub fn score_native(params: &ScorerParams, dataset: &Dataset) -> Result<ScoreTable> {
    params.validate()?;
    let rows = dataset
        .examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let cache = run_forward(params, &ex.points);
            ScoreRow {
                example_id: i as u64,
                top: ex.meta.top,
                bottom: ex.meta.bottom,
                p_merge: cache.probs[1],
            }
        })
        .collect();
    Ok(ScoreTable { rows })
}
