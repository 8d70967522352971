//! Missing-section simulation: zero out a run of z-slices, relabel the
//! fragments that fall out, and record which fragment pairs truly belong to
//! the same neuron across the gap.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GapweldError, Result};
use crate::volume::{self, Connectivity, LabelVolume};

/// Where the dropped slices sit: `ns` consecutive slices starting at `z0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapSpec {
    pub z0: usize,
    pub ns: usize,
}

impl GapSpec {
    pub fn new(z0: usize, ns: usize) -> Self {
        GapSpec { z0, ns }
    }

    pub fn validate(&self, zdim: usize) -> Result<()> {
        if self.ns < 1 {
            return Err(GapweldError::invalid("ns must be >= 1"));
        }
        if self.z0 + self.ns > zdim {
            return Err(GapweldError::invalid(format!(
                "gap [{}, {}) exceeds z dim {}",
                self.z0,
                self.z0 + self.ns,
                zdim
            )));
        }
        Ok(())
    }
}

/// A fragment pair known to belong to the same original neuron, with the
/// top member touching the slice above the gap and the bottom member the
/// slice below it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruthPair {
    pub top_fragment: u64,
    pub bottom_fragment: u64,
}

/// One simulated gap: the relabeled fragment volume, the provenance of each
/// fragment, and the ground-truth merge pairs.
///
/// A fragment may appear in several truth pairs: a neuron can have more than
/// one correct connection across the gap.
#[derive(Clone, Debug)]
pub struct GapInstance {
    pub gapped: LabelVolume,
    pub spec: GapSpec,
    /// fragment label -> original ground-truth label. Total on fragments.
    pub origin_of: BTreeMap<u64, u64>,
    pub truth_pairs: BTreeSet<TruthPair>,
}

impl GapInstance {
    /// Slice index just above the gap, if the gap does not start at z=0.
    pub fn top_border_z(&self) -> Option<usize> {
        (self.spec.z0 > 0).then(|| self.spec.z0 - 1)
    }

    /// Slice index just below the gap, if the gap does not end at the top.
    pub fn bottom_border_z(&self) -> Option<usize> {
        let below = self.spec.z0 + self.spec.ns;
        (below < self.gapped.dims().2).then_some(below)
    }
}

/// Zero out slices `[z0, z0+ns)`, leaving everything else untouched.
pub fn drop_slices(vol: &LabelVolume, spec: GapSpec) -> Result<LabelVolume> {
    spec.validate(vol.dims().2)?;
    let mut out = vol.clone();
    for z in spec.z0..spec.z0 + spec.ns {
        out.fill_slice(z, 0);
    }
    Ok(out)
}

/// Simulate a gap on ground truth `gt`: drop the slices, split the result
/// into 6-connected fragments, and pair up fragments of the same original
/// label that touch opposite border slices. A gap at the volume edge is
/// legal; the absent side simply contributes no truth pairs.
pub fn make_gap_instance(gt: &LabelVolume, spec: GapSpec) -> Result<GapInstance> {
    let dropped = drop_slices(gt, spec)?;
    let gapped = volume::connected_components(&dropped, Connectivity::Six);

    // Each fragment consists of voxels that all carried one gt label, so a
    // single lookup per voxel suffices and the map is total on fragments.
    let mut origin_of = BTreeMap::new();
    for (i, &frag) in gapped.data().iter().enumerate() {
        if frag != 0 {
            origin_of.entry(frag).or_insert_with(|| gt.data()[i]);
        }
    }

    let mut truth_pairs = BTreeSet::new();
    let top_z = (spec.z0 > 0).then(|| spec.z0 - 1);
    let bottom_z = {
        let below = spec.z0 + spec.ns;
        (below < gt.dims().2).then_some(below)
    };
    if let (Some(tz), Some(bz)) = (top_z, bottom_z) {
        let tops = gapped.labels_on_slice(tz);
        let bottoms = gapped.labels_on_slice(bz);
        let mut by_origin: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &b in &bottoms {
            by_origin.entry(origin_of[&b]).or_default().push(b);
        }
        for &t in &tops {
            if let Some(partners) = by_origin.get(&origin_of[&t]) {
                for &b in partners {
                    if b != t {
                        truth_pairs.insert(TruthPair {
                            top_fragment: t,
                            bottom_fragment: b,
                        });
                    }
                }
            }
        }
    }

    Ok(GapInstance {
        gapped,
        spec,
        origin_of,
        truth_pairs,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GapManifest {
    spec: GapSpec,
    origin_of: Vec<[u64; 2]>,
    truth_pairs: Vec<[u64; 2]>,
    volume: String,
}

const MANIFEST_NAME: &str = "manifest.json";
const VOLUME_NAME: &str = "gapped.json";

/// Write the instance into `dir`: a manifest plus the gapped volume in the
/// standard volume format.
pub fn save_gap_instance(inst: &GapInstance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GapweldError::io(dir, e))?;
    volume::save_volume(&inst.gapped, &dir.join(VOLUME_NAME))?;
    let manifest = GapManifest {
        spec: inst.spec,
        origin_of: inst.origin_of.iter().map(|(&f, &o)| [f, o]).collect(),
        truth_pairs: inst
            .truth_pairs
            .iter()
            .map(|p| [p.top_fragment, p.bottom_fragment])
            .collect(),
        volume: VOLUME_NAME.to_string(),
    };
    let path = dir.join(MANIFEST_NAME);
    let mut bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| GapweldError::invalid(format!("manifest encode: {e}")))?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| GapweldError::io(&path, e))
}

/// Load an instance written by [`save_gap_instance`].
pub fn load_gap_instance(dir: &Path) -> Result<GapInstance> {
    let path = dir.join(MANIFEST_NAME);
    let bytes = fs::read(&path).map_err(|e| GapweldError::io(&path, e))?;
    let manifest: GapManifest = serde_json::from_slice(&bytes)
        .map_err(|e| GapweldError::format(&path, e.to_string()))?;
    let gapped = volume::load_volume(&dir.join(&manifest.volume))?;
    manifest
        .spec
        .validate(gapped.dims().2)
        .map_err(|e| GapweldError::format(&path, e.to_string()))?;

    let mut origin_of = BTreeMap::new();
    for [frag, orig] in &manifest.origin_of {
        if origin_of.insert(*frag, *orig).is_some() {
            return Err(GapweldError::format(
                &path,
                format!("fragment {frag} listed twice in origin_of"),
            ));
        }
    }
    let truth_pairs = manifest
        .truth_pairs
        .iter()
        .map(|&[t, b]| TruthPair {
            top_fragment: t,
            bottom_fragment: b,
        })
        .collect();
    Ok(GapInstance {
        gapped,
        spec: manifest.spec,
        origin_of,
        truth_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VoxelCoord;
    use rand::Rng;

    fn tube_volume(n_tubes: usize, zdim: usize) -> LabelVolume {
        // Straight 1-voxel tubes spanning all z at distinct x positions.
        let mut v = LabelVolume::filled((2 * n_tubes + 1, 3, zdim), (4.0, 4.0, 40.0), 0).unwrap();
        for t in 0..n_tubes {
            for z in 0..zdim {
                v.set(2 * t + 1, 1, z, (t + 1) as u64);
            }
        }
        v
    }

    #[test]
    fn spec_validation() {
        assert!(GapSpec::new(0, 0).validate(10).is_err());
        assert!(GapSpec::new(8, 3).validate(10).is_err());
        assert!(GapSpec::new(8, 2).validate(10).is_ok());
    }

    #[test]
    fn drop_slices_zeroes_exactly_the_window() {
        let v = tube_volume(2, 125);
        let out = drop_slices(&v, GapSpec::new(5, 3)).unwrap();
        for z in 0..125 {
            let expect_zero = (5..8).contains(&z);
            for y in 0..3 {
                for x in 0..5 {
                    if expect_zero {
                        assert_eq!(out.get(x, y, z), 0, "slice {z} must be zero");
                    } else {
                        assert_eq!(out.get(x, y, z), v.get(x, y, z));
                    }
                }
            }
        }
    }

    #[test]
    fn drop_slices_idempotent_on_zero_slices() {
        let mut v = tube_volume(1, 10);
        for z in 4..6 {
            v.fill_slice(z, 0);
        }
        let out = drop_slices(&v, GapSpec::new(4, 2)).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn eight_slice_gap_supported() {
        let v = tube_volume(1, 20);
        let out = drop_slices(&v, GapSpec::new(6, 8)).unwrap();
        for z in 6..14 {
            assert_eq!(out.labels_on_slice(z), Vec::<u64>::new());
        }
    }

    #[test]
    fn single_tube_yields_one_truth_pair() {
        let v = tube_volume(1, 12);
        let inst = make_gap_instance(&v, GapSpec::new(5, 2)).unwrap();
        assert_eq!(inst.truth_pairs.len(), 1);
        let pair = inst.truth_pairs.iter().next().unwrap();
        assert_eq!(inst.origin_of[&pair.top_fragment], 1);
        assert_eq!(inst.origin_of[&pair.bottom_fragment], 1);
        assert_ne!(pair.top_fragment, pair.bottom_fragment);
    }

    #[test]
    fn tube_ending_inside_gap_has_no_pair() {
        let mut v = tube_volume(2, 12);
        // Tube 2 stops inside the gap: remove it from slice 6 upward.
        for z in 6..12 {
            v.set(3, 1, z, 0);
        }
        let inst = make_gap_instance(&v, GapSpec::new(5, 2)).unwrap();
        assert_eq!(inst.truth_pairs.len(), 1);
        let pair = inst.truth_pairs.iter().next().unwrap();
        assert_eq!(inst.origin_of[&pair.top_fragment], 1);
    }

    #[test]
    fn gap_at_volume_edge_yields_no_pairs() {
        let v = tube_volume(2, 10);
        let at_start = make_gap_instance(&v, GapSpec::new(0, 2)).unwrap();
        assert!(at_start.truth_pairs.is_empty());
        assert!(at_start.top_border_z().is_none());
        let at_end = make_gap_instance(&v, GapSpec::new(8, 2)).unwrap();
        assert!(at_end.truth_pairs.is_empty());
        assert!(at_end.bottom_border_z().is_none());
    }

    #[test]
    fn gapped_foreground_matches_dropped_volume() {
        let mut rng = crate::seeds::rng_from(&[0x6a, 7]);
        let data: Vec<u64> = (0..8 * 8 * 8).map(|_| rng.random_range(0..3u64)).collect();
        let v = LabelVolume::new((8, 8, 8), (4.0, 4.0, 40.0), data).unwrap();
        let spec = GapSpec::new(3, 2);
        let dropped = drop_slices(&v, spec).unwrap();
        let inst = make_gap_instance(&v, spec).unwrap();
        for i in 0..dropped.voxel_count() {
            assert_eq!(dropped.data()[i] == 0, inst.gapped.data()[i] == 0);
        }
    }

    /// Exhaustive oracle: recompute fragments, their origins, and every
    /// cross-gap pairing by direct voxel scans.
    fn truth_pair_oracle(gt: &LabelVolume, spec: GapSpec) -> BTreeSet<TruthPair> {
        let dropped = drop_slices(gt, spec).unwrap();
        let frags = volume::connected_components(&dropped, Connectivity::Six);
        let mut pairs = BTreeSet::new();
        if spec.z0 == 0 || spec.z0 + spec.ns >= gt.dims().2 {
            return pairs;
        }
        let tz = spec.z0 - 1;
        let bz = spec.z0 + spec.ns;
        let origin = |frag: u64| -> u64 {
            for (i, &f) in frags.data().iter().enumerate() {
                if f == frag {
                    return gt.data()[i];
                }
            }
            unreachable!()
        };
        for t in frags.labels_on_slice(tz) {
            for b in frags.labels_on_slice(bz) {
                if t != b && origin(t) == origin(b) {
                    pairs.insert(TruthPair {
                        top_fragment: t,
                        bottom_fragment: b,
                    });
                }
            }
        }
        pairs
    }

    #[test]
    fn random_volumes_match_pairing_oracle() {
        let mut rng = crate::seeds::rng_from(&[0x6a, 8]);
        for trial in 0..30 {
            let data: Vec<u64> = (0..6 * 6 * 8).map(|_| rng.random_range(0..3u64)).collect();
            let v = LabelVolume::new((6, 6, 8), (4.0, 4.0, 40.0), data).unwrap();
            let z0 = rng.random_range(1..5);
            let ns = rng.random_range(1..3);
            let spec = GapSpec::new(z0, ns);
            let inst = make_gap_instance(&v, spec).unwrap();
            assert_eq!(
                inst.truth_pairs,
                truth_pair_oracle(&v, spec),
                "trial {trial} spec {spec:?}"
            );
            // origin_of is total and single-valued over fragment voxels.
            for (i, &f) in inst.gapped.data().iter().enumerate() {
                if f != 0 {
                    assert_eq!(inst.origin_of[&f], v.data()[i]);
                }
            }
        }
    }

    #[test]
    fn fragment_can_have_multiple_partners() {
        // One neuron shaped like a U upside down: a bar above the gap with
        // two legs crossing it, so the single top fragment pairs with two
        // bottom fragments.
        let mut v = LabelVolume::filled((5, 1, 8), (4.0, 4.0, 40.0), 0).unwrap();
        for x in 0..5 {
            v.set(x, 0, 0, 1);
        }
        for z in 0..8 {
            v.set(0, 0, z, 1);
            v.set(4, 0, z, 1);
        }
        let inst = make_gap_instance(&v, GapSpec::new(3, 2)).unwrap();
        assert_eq!(inst.truth_pairs.len(), 2);
        let tops: BTreeSet<u64> = inst.truth_pairs.iter().map(|p| p.top_fragment).collect();
        assert_eq!(tops.len(), 1, "one top fragment with two partners");
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let v = tube_volume(3, 10);
        let inst = make_gap_instance(&v, GapSpec::new(4, 2)).unwrap();
        save_gap_instance(&inst, dir.path()).unwrap();
        let back = load_gap_instance(dir.path()).unwrap();
        assert_eq!(back.gapped, inst.gapped);
        assert_eq!(back.spec, inst.spec);
        assert_eq!(back.origin_of, inst.origin_of);
        assert_eq!(back.truth_pairs, inst.truth_pairs);
    }

    #[test]
    fn border_voxel_lookup_sanity() {
        let v = tube_volume(1, 6);
        let inst = make_gap_instance(&v, GapSpec::new(2, 2)).unwrap();
        let tz = inst.top_border_z().unwrap();
        let frag = inst.gapped.labels_on_slice(tz)[0];
        assert_eq!(
            inst.gapped.label_voxels_on_slice(frag, tz),
            vec![VoxelCoord::new(1, 1, 1)]
        );
    }
}
