//! Candidate selection: which bottom fragments should be considered for each
//! top fragment, ranked by average physical distance across the gap.
//!
//! The distance between two fragments is the mean Euclidean distance over
//! all pairs of their border-slice voxels, measured in nanometers. Sides
//! with more than [`DISTANCE_SAMPLE_CAP`] border voxels are uniformly
//! subsampled with a seed derived from the fragment label, so results do not
//! depend on call order.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{GapweldError, Result};
use crate::gap::GapInstance;
use crate::seeds;
use crate::volume::VoxelCoord;

/// Per-side cap on border voxels entering the all-pairs mean. Below the cap
/// the mean is exact.
pub const DISTANCE_SAMPLE_CAP: usize = 1024;

/// Default candidate group size.
pub const DEFAULT_GROUP_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Top,
    Bottom,
}

/// One ranked merge candidate for a top fragment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub bottom: u64,
    pub avg_distance_nm: f64,
}

/// The candidates for one top fragment, at most `g` of them, ordered by
/// ascending distance with ties broken by ascending label.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateGroup {
    pub top: u64,
    pub candidates: Vec<Candidate>,
}

/// Fragment labels with at least one voxel on the border slice of the given
/// side, ascending. Empty when that side of the gap does not exist.
pub fn border_fragments(inst: &GapInstance, side: Side) -> Vec<u64> {
    let z = match side {
        Side::Top => inst.top_border_z(),
        Side::Bottom => inst.bottom_border_z(),
    };
    match z {
        Some(z) => inst.gapped.labels_on_slice(z),
        None => Vec::new(),
    }
}

fn border_voxels_checked(inst: &GapInstance, label: u64, side: Side) -> Result<Vec<VoxelCoord>> {
    let z = match side {
        Side::Top => inst.top_border_z(),
        Side::Bottom => inst.bottom_border_z(),
    }
    .ok_or_else(|| GapweldError::invalid(format!("{side:?} side of the gap does not exist")))?;
    let voxels = inst.gapped.label_voxels_on_slice(label, z);
    if voxels.is_empty() {
        return Err(GapweldError::invalid(format!(
            "fragment {label} has no voxels on the {side:?} border slice {z}"
        )));
    }
    Ok(voxels)
}

/// Uniform subsample down to the cap, seeded by the fragment label and its
/// border slice so the choice is stable regardless of who asks.
fn capped(voxels: Vec<VoxelCoord>, label: u64, border_z: usize) -> Vec<VoxelCoord> {
    if voxels.len() <= DISTANCE_SAMPLE_CAP {
        return voxels;
    }
    let mut rng = seeds::rng_from(&[0x00d1_57a0, label, border_z as u64]);
    let mut idx = sample(&mut rng, voxels.len(), DISTANCE_SAMPLE_CAP).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| voxels[i]).collect()
}

/// Mean pairwise physical distance between two voxel sets. Symmetric in its
/// arguments bit-for-bit: iteration order is canonicalized before summing.
fn mean_pairwise_distance_nm(
    a: &[VoxelCoord],
    b: &[VoxelCoord],
    resolution_nm: (f64, f64, f64),
) -> f64 {
    let (first, second) = if (a.len(), a.first()) <= (b.len(), b.first()) {
        (a, b)
    } else {
        (b, a)
    };
    let (rx, ry, rz) = resolution_nm;
    let mut sum = 0.0f64;
    for p in first {
        for q in second {
            let dx = (p.x as f64 - q.x as f64) * rx;
            let dy = (p.y as f64 - q.y as f64) * ry;
            let dz = (p.z as f64 - q.z as f64) * rz;
            sum += (dx * dx + dy * dy + dz * dz).sqrt();
        }
    }
    sum / (first.len() as f64 * second.len() as f64)
}

/// Average Euclidean distance, in nanometers, between the border-slice
/// voxels of a top fragment and those of a bottom fragment.
pub fn avg_distance(inst: &GapInstance, top: u64, bottom: u64) -> Result<f64> {
    let top_voxels = border_voxels_checked(inst, top, Side::Top)?;
    let bottom_voxels = border_voxels_checked(inst, bottom, Side::Bottom)?;
    let tz = inst.top_border_z().unwrap();
    let bz = inst.bottom_border_z().unwrap();
    let top_voxels = capped(top_voxels, top, tz);
    let bottom_voxels = capped(bottom_voxels, bottom, bz);
    Ok(mean_pairwise_distance_nm(
        &top_voxels,
        &bottom_voxels,
        inst.gapped.resolution_nm(),
    ))
}

/// The `g` nearest bottom border fragments for `top` (all of them if fewer
/// exist), ascending by distance, ties broken by ascending label.
pub fn candidate_group(inst: &GapInstance, top: u64, g: usize) -> Result<CandidateGroup> {
    if g < 1 {
        return Err(GapweldError::invalid("group size must be >= 1"));
    }
    let tops = border_fragments(inst, Side::Top);
    if !tops.contains(&top) {
        return Err(GapweldError::invalid(format!(
            "{top} is not a top border fragment"
        )));
    }
    let mut scored: Vec<Candidate> = border_fragments(inst, Side::Bottom)
        .into_iter()
        .map(|bottom| {
            avg_distance(inst, top, bottom).map(|d| Candidate {
                bottom,
                avg_distance_nm: d,
            })
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        a.avg_distance_nm
            .partial_cmp(&b.avg_distance_nm)
            .unwrap()
            .then(a.bottom.cmp(&b.bottom))
    });
    scored.truncate(g);
    Ok(CandidateGroup {
        top,
        candidates: scored,
    })
}

/// Candidate groups for every top border fragment, in ascending top order.
pub fn candidate_groups(inst: &GapInstance, g: usize) -> Result<Vec<CandidateGroup>> {
    border_fragments(inst, Side::Top)
        .into_iter()
        .map(|top| candidate_group(inst, top, g))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    top: u64,
    bottom: u64,
    avg_distance_nm: f64,
    rank: usize,
}

/// Write groups as JSON lines, one object per (top, bottom) candidate.
pub fn write_candidates(groups: &[CandidateGroup], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for group in groups {
        for (rank, c) in group.candidates.iter().enumerate() {
            let record = CandidateRecord {
                top: group.top,
                bottom: c.bottom,
                avg_distance_nm: c.avg_distance_nm,
                rank,
            };
            serde_json::to_writer(&mut out, &record)
                .map_err(|e| GapweldError::invalid(format!("candidate encode: {e}")))?;
            out.push(b'\n');
        }
    }
    fs::write(path, out).map_err(|e| GapweldError::io(path, e))
}

/// Read a candidate manifest back into groups (tops ascending, candidates in
/// recorded rank order).
pub fn read_candidates(path: &Path) -> Result<Vec<CandidateGroup>> {
    let file = fs::File::open(path).map_err(|e| GapweldError::io(path, e))?;
    let mut records: Vec<CandidateRecord> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GapweldError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CandidateRecord = serde_json::from_str(&line)
            .map_err(|e| GapweldError::format(path, format!("line {}: {e}", lineno + 1)))?;
        records.push(rec);
    }
    records.sort_by_key(|r| (r.top, r.rank));
    let mut groups: Vec<CandidateGroup> = Vec::new();
    for rec in records {
        match groups.last_mut() {
            Some(g) if g.top == rec.top => {
                if rec.rank != g.candidates.len() {
                    return Err(GapweldError::format(
                        path,
                        format!("top {} has a gap in candidate ranks", rec.top),
                    ));
                }
                g.candidates.push(Candidate {
                    bottom: rec.bottom,
                    avg_distance_nm: rec.avg_distance_nm,
                });
            }
            _ => {
                if rec.rank != 0 {
                    return Err(GapweldError::format(
                        path,
                        format!("top {} starts at rank {}", rec.top, rec.rank),
                    ));
                }
                groups.push(CandidateGroup {
                    top: rec.top,
                    candidates: vec![Candidate {
                        bottom: rec.bottom,
                        avg_distance_nm: rec.avg_distance_nm,
                    }],
                });
            }
        }
    }
    Ok(groups)
}
