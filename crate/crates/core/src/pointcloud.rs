//! Point-cloud examples: convert a (top, bottom) candidate pair into a
//! fixed-size normalized point cloud.
//!
//! The surface voxels of both fragments, restricted to a window of context
//! slices around the gap, form the sampling pool in shared physical
//! coordinates -- the relative position of the two fragments is preserved.
//! Exactly `np` points are drawn (with replacement only when the pool is
//! smaller), translated so the joint bounding-box minimum sits at the
//! origin, and divided by one dataset-wide scale so relative sizes between
//! examples survive normalization.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GapweldError, Result};
use crate::gap::GapInstance;
use crate::seeds;
use crate::volume::{self, VoxelCoord};

/// Default number of points per example.
pub const DEFAULT_NP: usize = 2048;
/// Default number of context slices per side.
pub const DEFAULT_CS: usize = 3;

/// How examples are built: context slices, points per example, the shared
/// normalization scale in nanometers, and the sampling seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepConfig {
    pub cs: usize,
    pub np: usize,
    pub norm_scale_nm: f64,
    pub seed: u64,
}

impl RepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cs < 1 {
            return Err(GapweldError::invalid("cs must be >= 1"));
        }
        if self.np < 1 {
            return Err(GapweldError::invalid("np must be >= 1"));
        }
        if !(self.norm_scale_nm > 0.0) || !self.norm_scale_nm.is_finite() {
            return Err(GapweldError::invalid(format!(
                "norm_scale_nm must be strictly positive, got {}",
                self.norm_scale_nm
            )));
        }
        Ok(())
    }
}

/// Which pair an example came from and under what gap geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub top: u64,
    pub bottom: u64,
    pub z0: usize,
    pub ns: usize,
    pub cs: usize,
}

/// A normalized fixed-size point cloud with an optional binary label
/// (`None` at inference time).
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudExample {
    pub points: Vec<[f32; 3]>,
    pub label: Option<u8>,
    pub meta: ExampleMeta,
}

/// A set of examples that share `np`, `cs`, and the normalization scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub np: usize,
    pub cs: usize,
    pub norm_scale_nm: f64,
    pub examples: Vec<PointCloudExample>,
}

/// The slice window `[z0-cs, z0+ns+cs)` clamped to the volume bounds.
/// Unclamped it spans `2*cs + ns` slices.
pub fn truncate_window(inst: &GapInstance, cs: usize) -> (usize, usize) {
    let spec = inst.spec;
    let zdim = inst.gapped.dims().2;
    let zlo = spec.z0.saturating_sub(cs);
    let zhi = (spec.z0 + spec.ns + cs).min(zdim);
    (zlo, zhi)
}

/// One example to build: the pair, plus its label when known.
#[derive(Clone, Copy, Debug)]
pub struct ExampleRequest<'a> {
    pub inst: &'a GapInstance,
    pub top: u64,
    pub bottom: u64,
    pub label: Option<u8>,
}

/// The windowed surface pool of a pair: top points then bottom points, in
/// shared physical coordinates (nm), deterministic scan order.
fn windowed_pool(
    inst: &GapInstance,
    surfaces: &BTreeMap<u64, Vec<VoxelCoord>>,
    top: u64,
    bottom: u64,
    cs: usize,
) -> Result<Vec<[f64; 3]>> {
    let (zlo, zhi) = truncate_window(inst, cs);
    let take = |label: u64, side: &str| -> Result<Vec<[f64; 3]>> {
        let pts: Vec<[f64; 3]> = surfaces
            .get(&label)
            .map(|vs| {
                vs.iter()
                    .filter(|c| c.z >= zlo && c.z < zhi)
                    .map(|&c| inst.gapped.phys(c))
                    .collect()
            })
            .unwrap_or_default();
        if pts.is_empty() {
            return Err(GapweldError::invalid(format!(
                "{side} fragment {label} has no surface voxels in window [{zlo}, {zhi})"
            )));
        }
        Ok(pts)
    };
    let mut pool = take(top, "top")?;
    pool.extend(take(bottom, "bottom")?);
    Ok(pool)
}

/// Largest per-axis extent of the pool's bounding box, in nm.
fn pool_extent_nm(pool: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pool {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max)
}

fn sample_pool(pool: &[[f64; 3]], np: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    if pool.len() >= np {
        let mut idx = sample(rng, pool.len(), np).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i]).collect()
    } else {
        (0..np).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}

fn normalize(sampled: &[[f64; 3]], scale_nm: f64) -> Result<Vec<[f32; 3]>> {
    let mut lo = [f64::INFINITY; 3];
    for p in sampled {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
        }
    }
    let mut out = Vec::with_capacity(sampled.len());
    for p in sampled {
        let mut q = [0f32; 3];
        for a in 0..3 {
            let v = (p[a] - lo[a]) / scale_nm;
            if v > 1.0 {
                return Err(GapweldError::invalid(format!(
                    "normalized coordinate {v} exceeds 1; norm_scale_nm {scale_nm} is \
                     smaller than the example extent"
                )));
            }
            q[a] = v as f32;
        }
        out.push(q);
    }
    Ok(out)
}

fn example_rng(cfg: &RepConfig, inst: &GapInstance, top: u64, bottom: u64) -> impl Rng {
    seeds::rng_from(&[
        0x9c1e_c10d,
        cfg.seed,
        top,
        bottom,
        inst.spec.z0 as u64,
        inst.spec.ns as u64,
        cfg.cs as u64,
        cfg.np as u64,
    ])
}

fn build_from_pool(
    pool: &[[f64; 3]],
    cfg: &RepConfig,
    inst: &GapInstance,
    top: u64,
    bottom: u64,
    label: Option<u8>,
) -> Result<PointCloudExample> {
    if let Some(y) = label {
        if y > 1 {
            return Err(GapweldError::invalid(format!("label must be 0 or 1, got {y}")));
        }
    }
    let mut rng = example_rng(cfg, inst, top, bottom);
    let sampled = sample_pool(pool, cfg.np, &mut rng);
    let points = normalize(&sampled, cfg.norm_scale_nm)?;
    Ok(PointCloudExample {
        points,
        label,
        meta: ExampleMeta {
            top,
            bottom,
            z0: inst.spec.z0,
            ns: inst.spec.ns,
            cs: cfg.cs,
        },
    })
}

/// Build one example. Surfaces are extracted with 6-connectivity over the
/// whole gapped volume, then restricted to the context window.
pub fn build_example(
    inst: &GapInstance,
    top: u64,
    bottom: u64,
    cfg: &RepConfig,
    label: Option<u8>,
) -> Result<PointCloudExample> {
    cfg.validate()?;
    let mut surfaces = BTreeMap::new();
    surfaces.insert(top, volume::surface_voxels(&inst.gapped, top));
    if bottom != top {
        surfaces.insert(bottom, volume::surface_voxels(&inst.gapped, bottom));
    }
    let pool = windowed_pool(inst, &surfaces, top, bottom, cfg.cs)?;
    build_from_pool(&pool, cfg, inst, top, bottom, label)
}

fn pools_for(requests: &[ExampleRequest<'_>], cs: usize) -> Result<Vec<Vec<[f64; 3]>>> {
    // One surface scan per distinct instance; requests usually share one.
    let mut surface_cache: Vec<(*const GapInstance, BTreeMap<u64, Vec<VoxelCoord>>)> = Vec::new();
    let mut pools = Vec::with_capacity(requests.len());
    for req in requests {
        let key = req.inst as *const GapInstance;
        let surfaces = match surface_cache.iter().position(|(k, _)| *k == key) {
            Some(i) => &surface_cache[i].1,
            None => {
                surface_cache.push((key, volume::surface_voxels_by_label(&req.inst.gapped)));
                &surface_cache.last().unwrap().1
            }
        };
        pools.push(windowed_pool(req.inst, surfaces, req.top, req.bottom, cs)?);
    }
    Ok(pools)
}

/// Build a dataset with an explicit normalization scale (`cfg.norm_scale_nm`).
pub fn build_dataset(requests: &[ExampleRequest<'_>], cfg: &RepConfig) -> Result<Dataset> {
    cfg.validate()?;
    let pools = pools_for(requests, cfg.cs)?;
    let examples = requests
        .iter()
        .zip(&pools)
        .map(|(req, pool)| build_from_pool(pool, cfg, req.inst, req.top, req.bottom, req.label))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        np: cfg.np,
        cs: cfg.cs,
        norm_scale_nm: cfg.norm_scale_nm,
        examples,
    })
}

/// Build a dataset computing the scale in a first pass: the maximum per-axis
/// physical extent over all example pools. A degenerate (single-point)
/// dataset falls back to 1 nm.
pub fn build_dataset_auto_scale(
    requests: &[ExampleRequest<'_>],
    cs: usize,
    np: usize,
    seed: u64,
) -> Result<Dataset> {
    if requests.is_empty() {
        return Ok(Dataset {
            np,
            cs,
            norm_scale_nm: 1.0,
            examples: Vec::new(),
        });
    }
    let pools = pools_for(requests, cs)?;
    let mut scale = pools.iter().map(|p| pool_extent_nm(p)).fold(0.0, f64::max);
    if scale <= 0.0 {
        scale = 1.0;
    }
    let cfg = RepConfig {
        cs,
        np,
        norm_scale_nm: scale,
        seed,
    };
    cfg.validate()?;
    let examples = requests
        .iter()
        .zip(&pools)
        .map(|(req, pool)| build_from_pool(pool, &cfg, req.inst, req.top, req.bottom, req.label))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        np,
        cs,
        norm_scale_nm: scale,
        examples,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    np: usize,
    cs: usize,
    norm_scale_nm: f64,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleRecord {
    meta: ExampleMeta,
    label: Option<u8>,
    points: Vec<f32>,
}

/// Write a dataset: a header line followed by one JSON line per example.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| GapweldError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = DatasetHeader {
        np: dataset.np,
        cs: dataset.cs,
        norm_scale_nm: dataset.norm_scale_nm,
        count: dataset.examples.len(),
    };
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| GapweldError::invalid(format!("header encode: {e}")))?;
    w.write_all(b"\n").map_err(|e| GapweldError::io(path, e))?;
    for ex in &dataset.examples {
        let record = ExampleRecord {
            meta: ex.meta,
            label: ex.label,
            points: ex.points.iter().flat_map(|p| p.iter().copied()).collect(),
        };
        serde_json::to_writer(&mut w, &record)
            .map_err(|e| GapweldError::invalid(format!("example encode: {e}")))?;
        w.write_all(b"\n").map_err(|e| GapweldError::io(path, e))?;
    }
    w.flush().map_err(|e| GapweldError::io(path, e))
}

/// Read a dataset written by [`write_dataset`], validating record arity,
/// label values, and coordinate range.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| GapweldError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(l) => l.map_err(|e| GapweldError::io(path, e))?,
        None => return Err(GapweldError::format(path, "missing dataset header")),
    };
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| GapweldError::format(path, format!("header: {e}")))?;

    let mut examples = Vec::with_capacity(header.count);
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| GapweldError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExampleRecord = serde_json::from_str(&line)
            .map_err(|e| GapweldError::format(path, format!("line {}: {e}", lineno + 2)))?;
        if record.points.len() != 3 * header.np {
            return Err(GapweldError::format(
                path,
                format!(
                    "line {}: expected {} coordinates ({} points), got {}",
                    lineno + 2,
                    3 * header.np,
                    header.np,
                    record.points.len()
                ),
            ));
        }
        if let Some(y) = record.label {
            if y > 1 {
                return Err(GapweldError::format(
                    path,
                    format!("line {}: label must be 0 or 1, got {y}", lineno + 2),
                ));
            }
        }
        if record
            .points
            .iter()
            .any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v))
        {
            return Err(GapweldError::format(
                path,
                format!("line {}: coordinates must lie in [0, 1]", lineno + 2),
            ));
        }
        let points = record
            .points
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        examples.push(PointCloudExample {
            points,
            label: record.label,
            meta: record.meta,
        });
    }
    if examples.len() != header.count {
        return Err(GapweldError::format(
            path,
            format!(
                "header count {} does not match {} records",
                header.count,
                examples.len()
            ),
        ));
    }
    Ok(Dataset {
        np: header.np,
        cs: header.cs,
        norm_scale_nm: header.norm_scale_nm,
        examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{make_gap_instance, GapSpec};
    use crate::volume::LabelVolume;

    fn two_tube_instance(ns: usize) -> GapInstance {
        let mut v = LabelVolume::filled((9, 5, 12), (4.0, 4.0, 40.0), 0).unwrap();
        for z in 0..12 {
            for (x, y) in [(2, 2), (2, 3), (3, 2)] {
                v.set(x, y, z, 1);
            }
            for (x, y) in [(6, 2), (6, 3), (7, 2)] {
                v.set(x, y, z, 2);
            }
        }
        make_gap_instance(&v, GapSpec::new(5, ns)).unwrap()
    }

    fn pair_of(inst: &GapInstance) -> (u64, u64) {
        let p = inst.truth_pairs.iter().next().unwrap();
        (p.top_fragment, p.bottom_fragment)
    }

    #[test]
    fn window_width_is_two_cs_plus_ns() {
        let mut v = LabelVolume::filled((3, 3, 20), (4.0, 4.0, 40.0), 0).unwrap();
        for z in 0..20 {
            v.set(1, 1, z, 1);
        }
        let inst = make_gap_instance(&v, GapSpec::new(5, 5)).unwrap();
        let (zlo, zhi) = truncate_window(&inst, 3);
        assert_eq!(zhi - zlo, 2 * 3 + 5);
        assert_eq!((zlo, zhi), (2, 13));
    }

    #[test]
    fn window_clamps_at_edges() {
        let mut v = LabelVolume::filled((3, 3, 125), (4.0, 4.0, 40.0), 0).unwrap();
        for z in 0..125 {
            v.set(1, 1, z, 1);
        }
        let inst = make_gap_instance(&v, GapSpec::new(1, 1)).unwrap();
        assert_eq!(truncate_window(&inst, 1), (0, 3));
        let inst2 = make_gap_instance(&v, GapSpec::new(2, 1)).unwrap();
        assert_eq!(truncate_window(&inst2, 3), (0, 6));
    }

    fn cfg(np: usize) -> RepConfig {
        RepConfig {
            cs: 3,
            np,
            norm_scale_nm: 2000.0,
            seed: 7,
        }
    }

    #[test]
    fn small_pool_samples_with_replacement() {
        let inst = two_tube_instance(1);
        let (top, bottom) = pair_of(&inst);
        let ex = build_example(&inst, top, bottom, &cfg(2048), Some(1)).unwrap();
        assert_eq!(ex.points.len(), 2048);
        // Every sampled point must coincide with a pool position.
        let mut distinct: Vec<[f32; 3]> = ex.points.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        assert!(distinct.len() < 200, "few distinct positions, repeated many times");
    }

    #[test]
    fn points_map_back_to_surface_voxels() {
        let inst = two_tube_instance(2);
        let (top, bottom) = pair_of(&inst);
        let c = cfg(256);
        let ex = build_example(&inst, top, bottom, &c, Some(1)).unwrap();

        let (zlo, zhi) = truncate_window(&inst, c.cs);
        let mut pool_phys: Vec<[f64; 3]> = Vec::new();
        for label in [top, bottom] {
            for v in volume::surface_voxels(&inst.gapped, label) {
                if v.z >= zlo && v.z < zhi {
                    pool_phys.push(inst.gapped.phys(v));
                }
            }
        }
        let min_coord = |a: usize| {
            ex.points
                .iter()
                .map(|p| p[a] as f64)
                .fold(f64::INFINITY, f64::min)
        };
        for a in 0..3 {
            assert_eq!(min_coord(a), 0.0, "bbox min maps to 0 on axis {a}");
        }

        // Recover the translation: per axis it must be one of the pool
        // coordinates, the one that maps every point back onto the grid.
        let s = c.norm_scale_nm;
        let close = |a: f64, b: f64| (a - b).abs() < 1e-3;
        let mut translation = [f64::NAN; 3];
        for a in 0..3 {
            let mut values: Vec<f64> = pool_phys.iter().map(|p| p[a]).collect();
            values.sort_by(|x, y| x.partial_cmp(y).unwrap());
            values.dedup();
            translation[a] = values
                .iter()
                .copied()
                .find(|&t| {
                    ex.points
                        .iter()
                        .all(|p| values.iter().any(|&v| close(p[a] as f64 * s + t, v)))
                })
                .expect("some pool coordinate explains the translation");
        }
        // With the translation fixed, every point maps to an actual pool
        // member, i.e. a surface voxel inside the window.
        for p in &ex.points {
            let back: Vec<f64> = (0..3).map(|a| p[a] as f64 * s + translation[a]).collect();
            assert!(
                pool_phys
                    .iter()
                    .any(|q| (0..3).all(|a| close(back[a], q[a]))),
                "point {back:?} is not a surface voxel"
            );
        }

        // No point sits strictly inside the gap band: the largest empty
        // normalized z interval is at least ns*rz / S wide.
        let band = inst.spec.ns as f64 * 40.0 / s;
        let mut zs: Vec<f64> = ex.points.iter().map(|p| p[2] as f64).collect();
        zs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let max_gap = zs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(
            max_gap >= band,
            "largest empty z band {max_gap} must cover the gap width {band}"
        );
    }

    #[test]
    fn coordinates_stay_in_unit_cube() {
        let inst = two_tube_instance(3);
        let (top, bottom) = pair_of(&inst);
        let ex = build_example(&inst, top, bottom, &cfg(512), None).unwrap();
        for p in &ex.points {
            for a in 0..3 {
                assert!((0.0..=1.0).contains(&p[a]));
            }
        }
    }

    #[test]
    fn too_small_scale_is_a_config_error() {
        let inst = two_tube_instance(3);
        let (top, bottom) = pair_of(&inst);
        let c = RepConfig {
            cs: 3,
            np: 64,
            norm_scale_nm: 1.0,
            seed: 7,
        };
        assert!(build_example(&inst, top, bottom, &c, None).is_err());
    }

    #[test]
    fn seeded_build_is_bit_identical() {
        let inst = two_tube_instance(2);
        let (top, bottom) = pair_of(&inst);
        let a = build_example(&inst, top, bottom, &cfg(512), Some(0)).unwrap();
        let b = build_example(&inst, top, bottom, &cfg(512), Some(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn without_replacement_iff_pool_large_enough() {
        let inst = two_tube_instance(1);
        let (top, bottom) = pair_of(&inst);
        // Tiny np: pool >= np, so all points distinct.
        let ex = build_example(&inst, top, bottom, &cfg(8), None).unwrap();
        let mut pts = ex.points.clone();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        assert_eq!(pts.len(), 8, "sampling without replacement keeps points distinct");
    }

    #[test]
    fn shared_scale_preserves_relative_size() {
        // Two volumes, one with tubes twice as far apart as the other. Under
        // one shared scale the normalized x extents keep the 2:1 ratio.
        let build = |gap_x: usize| -> PointCloudExample {
            let mut v = LabelVolume::filled((32, 5, 12), (4.0, 4.0, 40.0), 0).unwrap();
            for z in 0..12 {
                v.set(2, 2, z, 1);
                v.set(2 + gap_x, 2, z, 2);
            }
            let inst = make_gap_instance(&v, GapSpec::new(5, 2)).unwrap();
            let tops = crate::candidates::border_fragments(&inst, crate::candidates::Side::Top);
            let bottoms =
                crate::candidates::border_fragments(&inst, crate::candidates::Side::Bottom);
            build_example(&inst, tops[0], bottoms[1], &cfg(512), None).unwrap()
        };
        let wide = build(20);
        let narrow = build(10);
        let extent_x = |ex: &PointCloudExample| -> f64 {
            let xs: Vec<f64> = ex.points.iter().map(|p| p[0] as f64).collect();
            xs.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
                - xs.iter().fold(f64::INFINITY, |m, &v| m.min(v))
        };
        let ratio = extent_x(&wide) / extent_x(&narrow);
        assert!((ratio - 2.0).abs() < 1e-5, "extent ratio {ratio} should be 2");
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = two_tube_instance(2);
        let mut requests = Vec::new();
        for group in crate::candidates::candidate_groups(&inst, 4).unwrap() {
            for c in &group.candidates {
                let pair = crate::gap::TruthPair {
                    top_fragment: group.top,
                    bottom_fragment: c.bottom,
                };
                requests.push(ExampleRequest {
                    inst: &inst,
                    top: group.top,
                    bottom: c.bottom,
                    label: Some(u8::from(inst.truth_pairs.contains(&pair))),
                });
            }
        }
        assert!(requests.len() >= 4);
        let ds = build_dataset_auto_scale(&requests, 2, 64, 11).unwrap();
        let path = dir.path().join("ds.jsonl");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_dataset_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset {
            np: 2048,
            cs: 3,
            norm_scale_nm: 100.0,
            examples: Vec::new(),
        };
        let path = dir.path().join("empty.jsonl");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert!(back.examples.is_empty());
        assert_eq!(back.np, 2048);
    }

    #[test]
    fn wrong_point_count_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let header = r#"{"np":2048,"cs":3,"norm_scale_nm":100.0,"count":1}"#;
        let coords: Vec<String> = (0..3 * 2047).map(|_| "0.5".to_string()).collect();
        let record = format!(
            r#"{{"meta":{{"top":1,"bottom":2,"z0":5,"ns":1,"cs":3}},"label":1,"points":[{}]}}"#,
            coords.join(",")
        );
        std::fs::write(&path, format!("{header}\n{record}\n")).unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("2048"), "{err}");
    }

    #[test]
    fn auto_scale_matches_widest_pool() {
        let inst = two_tube_instance(2);
        let (top, bottom) = pair_of(&inst);
        let requests = vec![ExampleRequest {
            inst: &inst,
            top,
            bottom,
            label: Some(1),
        }];
        let ds = build_dataset_auto_scale(&requests, 3, 128, 3).unwrap();
        // Window spans z in [2, 10): physical extent (10-1-2)*40 = 280 on z,
        // x extent (7-2)*4 = 20, so the scale is the z extent.
        assert_eq!(ds.norm_scale_nm, 280.0);
        // With the scale equal to the max extent, some coordinate reaches 1.
        let max_coord = ds.examples[0]
            .points
            .iter()
            .flat_map(|p| p.iter())
            .fold(f32::NEG_INFINITY, |m, &v| m.max(v));
        assert!(max_coord <= 1.0);
    }
}
