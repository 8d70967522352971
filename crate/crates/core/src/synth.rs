//! Deterministic synthetic volumes: tubular phantoms swept through the
//! z-stack at controlled angles, for training fixtures and the
//! parallel-vs-oblique study.
//!
//! Each tube is a disk of fixed radius swept along a straight (optionally
//! jittered) line. The inclination is measured in voxel index space: an
//! angle of `a` degrees displaces the center by `tan(a)` voxels per slice,
//! independent of the anisotropy of the physical resolution. Tubes span
//! every slice, are rasterized slice-by-slice as 2D capsules between
//! consecutive centers (which keeps them 6-connected at any angle), and are
//! placed rejection-style: a tube that would overlap an earlier one or leave
//! the volume laterally is retried with fresh randomness, so earlier labels
//! are never overwritten.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GapweldError, Result};
use crate::seeds;
use crate::volume::LabelVolume;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dims: (usize, usize, usize),
    pub resolution_nm: (f64, f64, f64),
    pub n_tubes: usize,
    /// Inclusive radius range in voxels.
    pub radius_vox: (f64, f64),
    /// Maximum inclination from the z-axis, degrees, in voxel index space.
    pub max_angle_deg: f64,
    /// Per-slice center jitter amplitude in voxels.
    pub wobble: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tubes < 1 {
            return Err(GapweldError::invalid("n_tubes must be >= 1"));
        }
        if self.dims.0 == 0 || self.dims.1 == 0 || self.dims.2 == 0 {
            return Err(GapweldError::invalid("dims must be positive"));
        }
        if !(self.radius_vox.0 >= 1.0) || self.radius_vox.1 < self.radius_vox.0 {
            return Err(GapweldError::invalid(
                "radius range must satisfy 1 <= min <= max",
            ));
        }
        if !(0.0..90.0).contains(&self.max_angle_deg) {
            return Err(GapweldError::invalid("max_angle_deg must be in [0, 90)"));
        }
        if self.wobble < 0.0 {
            return Err(GapweldError::invalid("wobble must be >= 0"));
        }
        Ok(())
    }
}

/// What was actually placed, for the sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeRecord {
    pub label: u64,
    pub angle_deg: f64,
    pub azimuth_deg: f64,
    pub radius_vox: f64,
    /// Center position at z = 0, in voxel coordinates.
    pub entry: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: SynthConfig,
    tubes: Vec<TubeRecord>,
}

const MAX_ATTEMPTS_PER_TUBE: usize = 200;

struct TubeShape {
    /// One (x, y) center per slice.
    centers: Vec<[f64; 2]>,
    radius: f64,
    angle_deg: f64,
    azimuth_deg: f64,
}

fn propose_tube(cfg: &SynthConfig, rng: &mut impl Rng) -> Option<TubeShape> {
    let zdim = cfg.dims.2;
    let angle_deg = rng.random_range(0.0..=cfg.max_angle_deg);
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let radius = rng.random_range(cfg.radius_vox.0..=cfg.radius_vox.1);
    let slope = angle_deg.to_radians().tan();
    let (sx, sy) = (slope * azimuth.cos(), slope * azimuth.sin());

    // Line offsets plus jitter, before choosing the entry point.
    let mut offsets = Vec::with_capacity(zdim);
    for z in 0..zdim {
        let jx = if cfg.wobble > 0.0 && z > 0 {
            rng.random_range(-cfg.wobble..=cfg.wobble)
        } else {
            0.0
        };
        let jy = if cfg.wobble > 0.0 && z > 0 {
            rng.random_range(-cfg.wobble..=cfg.wobble)
        } else {
            0.0
        };
        offsets.push([sx * z as f64 + jx, sy * z as f64 + jy]);
    }

    // Entry window keeping the whole disk in-bounds on every slice.
    let margin = radius + 0.5;
    let mut lo = [f64::NEG_INFINITY; 2];
    let mut hi = [f64::INFINITY; 2];
    for off in &offsets {
        for a in 0..2 {
            lo[a] = lo[a].max(margin - off[a]);
            let dim = if a == 0 { cfg.dims.0 } else { cfg.dims.1 } as f64;
            hi[a] = hi[a].min(dim - 1.0 - margin - off[a]);
        }
    }
    if lo[0] > hi[0] || lo[1] > hi[1] {
        return None; // too steep for this volume; retry with a new draw
    }
    let entry = [
        rng.random_range(lo[0]..=hi[0]),
        rng.random_range(lo[1]..=hi[1]),
    ];
    let centers = offsets
        .iter()
        .map(|off| [entry[0] + off[0], entry[1] + off[1]])
        .collect();
    Some(TubeShape {
        centers,
        radius,
        angle_deg,
        azimuth_deg: azimuth.to_degrees(),
    })
}

/// Squared distance from a point to the segment [a, b] in 2D.
fn dist2_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    dx * dx + dy * dy
}

/// Rasterize one tube into a voxel index list. Slice z covers the capsule
/// between centers[z] and centers[z+1]; consecutive slices therefore share
/// the disk at centers[z+1], keeping the tube 6-connected.
fn rasterize(shape: &TubeShape, dims: (usize, usize, usize)) -> Vec<usize> {
    let (dx, dy, dz) = dims;
    let r2 = shape.radius * shape.radius;
    let mut voxels = Vec::new();
    for z in 0..dz {
        let a = shape.centers[z];
        let b = shape.centers[(z + 1).min(dz - 1)];
        let x_lo = (a[0].min(b[0]) - shape.radius).floor().max(0.0) as usize;
        let x_hi = (a[0].max(b[0]) + shape.radius).ceil().min((dx - 1) as f64) as usize;
        let y_lo = (a[1].min(b[1]) - shape.radius).floor().max(0.0) as usize;
        let y_hi = (a[1].max(b[1]) + shape.radius).ceil().min((dy - 1) as f64) as usize;
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                if dist2_to_segment([x as f64, y as f64], a, b) <= r2 {
                    voxels.push(x + dx * (y + dy * z));
                }
            }
        }
    }
    voxels
}

/// Generate the labeled volume; labels are 1..=n_tubes in placement order.
pub fn generate_volume(cfg: &SynthConfig) -> Result<LabelVolume> {
    Ok(generate_volume_with_records(cfg)?.0)
}

/// Generate and also report per-tube placement records.
pub fn generate_volume_with_records(cfg: &SynthConfig) -> Result<(LabelVolume, Vec<TubeRecord>)> {
    cfg.validate()?;
    let mut vol = LabelVolume::filled(cfg.dims, cfg.resolution_nm, 0)?;
    let mut records = Vec::with_capacity(cfg.n_tubes);
    let mut rng = seeds::rng_from(&[0x57b3, cfg.seed]);
    let data_len = vol.voxel_count();

    for tube_idx in 0..cfg.n_tubes {
        let label = (tube_idx + 1) as u64;
        let mut placed = false;
        for _attempt in 0..MAX_ATTEMPTS_PER_TUBE {
            let Some(shape) = propose_tube(cfg, &mut rng) else {
                continue;
            };
            let voxels = rasterize(&shape, cfg.dims);
            debug_assert!(voxels.iter().all(|&i| i < data_len));
            // First-writer wins: reject any overlap with earlier tubes.
            if voxels.iter().any(|&i| vol.data()[i] != 0) {
                continue;
            }
            for &i in &voxels {
                let z = i / (cfg.dims.0 * cfg.dims.1);
                let y = (i / cfg.dims.0) % cfg.dims.1;
                let x = i % cfg.dims.0;
                vol.set(x, y, z, label);
            }
            records.push(TubeRecord {
                label,
                angle_deg: shape.angle_deg,
                azimuth_deg: shape.azimuth_deg,
                radius_vox: shape.radius,
                entry: shape.centers[0],
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(GapweldError::invalid(format!(
                "failed to place tube {label} after {MAX_ATTEMPTS_PER_TUBE} attempts; \
                 volume too crowded for the requested angle/radius"
            )));
        }
    }
    Ok((vol, records))
}

/// Write the generation sidecar (config + per-tube records) as JSON.
pub fn write_sidecar(cfg: &SynthConfig, tubes: &[TubeRecord], path: &Path) -> Result<()> {
    let sidecar = Sidecar {
        config: *cfg,
        tubes: tubes.to_vec(),
    };
    let mut bytes = serde_json::to_vec_pretty(&sidecar)
        .map_err(|e| GapweldError::invalid(format!("sidecar encode: {e}")))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| GapweldError::io(path, e))
}
