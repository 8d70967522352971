//! Dense labeled volumes: storage, (de)serialization, connected components,
//! and surface-voxel extraction.
//!
//! Storage is x-fastest dense u64. Label 0 is background. The on-disk format
//! is a small JSON header next to a raw little-endian payload; see
//! [`save_volume`] and [`load_volume`].

use std::collections::VecDeque;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GapweldError, Result};

/// A voxel index triple. Each component is < the corresponding volume dim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoxelCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl VoxelCoord {
    pub fn new(x: usize, y: usize, z: usize) -> Self {
        VoxelCoord { x, y, z }
    }
}

/// Neighborhood used when tracing components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// Face neighbors only. The default for fragment relabeling: it never
    /// bridges diagonal touches that the imaging pipeline would separate.
    Six,
    /// Face, edge, and corner neighbors.
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<(isize, isize, isize)> {
        match self {
            Connectivity::Six => vec![
                (1, 0, 0),
                (-1, 0, 0),
                (0, 1, 0),
                (0, -1, 0),
                (0, 0, 1),
                (0, 0, -1),
            ],
            Connectivity::TwentySix => {
                let mut out = Vec::with_capacity(26);
                for dz in -1isize..=1 {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            if (dx, dy, dz) != (0, 0, 0) {
                                out.push((dx, dy, dz));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// Dense 3D grid of u64 labels with an anisotropic physical resolution.
///
/// Invariants: `data.len() == x*y*z`, resolution components strictly
/// positive. Label 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    dims: (usize, usize, usize),
    resolution_nm: (f64, f64, f64),
    data: Vec<u64>,
}

impl LabelVolume {
    pub fn new(
        dims: (usize, usize, usize),
        resolution_nm: (f64, f64, f64),
        data: Vec<u64>,
    ) -> Result<Self> {
        let expected = dims
            .0
            .checked_mul(dims.1)
            .and_then(|v| v.checked_mul(dims.2))
            .ok_or_else(|| GapweldError::invalid("volume dims overflow"))?;
        if data.len() != expected {
            return Err(GapweldError::invalid(format!(
                "data length {} does not match dims {}x{}x{} = {}",
                data.len(),
                dims.0,
                dims.1,
                dims.2,
                expected
            )));
        }
        Self::check_resolution(resolution_nm)?;
        Ok(LabelVolume {
            dims,
            resolution_nm,
            data,
        })
    }

    /// A volume with every voxel set to `label`.
    pub fn filled(
        dims: (usize, usize, usize),
        resolution_nm: (f64, f64, f64),
        label: u64,
    ) -> Result<Self> {
        let n = dims
            .0
            .checked_mul(dims.1)
            .and_then(|v| v.checked_mul(dims.2))
            .ok_or_else(|| GapweldError::invalid("volume dims overflow"))?;
        Self::new(dims, resolution_nm, vec![label; n])
    }

    fn check_resolution(res: (f64, f64, f64)) -> Result<()> {
        for (axis, r) in [("x", res.0), ("y", res.1), ("z", res.2)] {
            if !(r > 0.0) || !r.is_finite() {
                return Err(GapweldError::invalid(format!(
                    "resolution_nm.{axis} must be strictly positive, got {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn resolution_nm(&self) -> (f64, f64, f64) {
        self.resolution_nm
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn voxel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims.0 && y < self.dims.1 && z < self.dims.2);
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u64 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, label: u64) {
        let i = self.index(x, y, z);
        self.data[i] = label;
    }

    /// Physical position of a voxel index in nanometers.
    #[inline]
    pub fn phys(&self, c: VoxelCoord) -> [f64; 3] {
        [
            c.x as f64 * self.resolution_nm.0,
            c.y as f64 * self.resolution_nm.1,
            c.z as f64 * self.resolution_nm.2,
        ]
    }

    /// Iterate voxel coordinates in x-fastest scan order.
    pub fn coords(&self) -> impl Iterator<Item = VoxelCoord> + '_ {
        let (dx, dy, dz) = self.dims;
        (0..dz).flat_map(move |z| {
            (0..dy).flat_map(move |y| (0..dx).map(move |x| VoxelCoord { x, y, z }))
        })
    }

    /// Set every voxel of slice `z` to `label`.
    pub(crate) fn fill_slice(&mut self, z: usize, label: u64) {
        let per_slice = self.dims.0 * self.dims.1;
        let start = z * per_slice;
        self.data[start..start + per_slice].fill(label);
    }

    /// Labels present on slice `z`, excluding background, ascending.
    pub fn labels_on_slice(&self, z: usize) -> Vec<u64> {
        let per_slice = self.dims.0 * self.dims.1;
        let start = z * per_slice;
        let mut labels: Vec<u64> = self.data[start..start + per_slice]
            .iter()
            .copied()
            .filter(|&l| l != 0)
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Foreground voxels of `label` on slice `z`, x-fastest order.
    pub fn label_voxels_on_slice(&self, label: u64, z: usize) -> Vec<VoxelCoord> {
        let mut out = Vec::new();
        for y in 0..self.dims.1 {
            for x in 0..self.dims.0 {
                if self.get(x, y, z) == label {
                    out.push(VoxelCoord { x, y, z });
                }
            }
        }
        out
    }

    /// Replace every label through `f`. Background voxels are passed too, so
    /// callers that want to preserve background must map 0 to 0.
    pub(crate) fn map_labels(&mut self, f: impl Fn(u64) -> u64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeHeader {
    dims: [u64; 3],
    resolution_nm: [f64; 3],
    dtype: String,
    order: String,
    payload: String,
}

const DTYPE: &str = "u64le";
const ORDER: &str = "x-fastest";

fn payload_path_for(header_path: &Path) -> PathBuf {
    header_path.with_extension("u64")
}

/// Write `vol` as a JSON header at `path` plus a raw little-endian payload
/// next to it (same stem, `.u64` extension). Equal inputs produce
/// byte-identical files.
pub fn save_volume(vol: &LabelVolume, path: &Path) -> Result<()> {
    let payload_path = payload_path_for(path);
    let payload_name = payload_path
        .file_name()
        .ok_or_else(|| GapweldError::invalid(format!("bad volume path {}", path.display())))?
        .to_string_lossy()
        .into_owned();

    let header = VolumeHeader {
        dims: [vol.dims.0 as u64, vol.dims.1 as u64, vol.dims.2 as u64],
        resolution_nm: [
            vol.resolution_nm.0,
            vol.resolution_nm.1,
            vol.resolution_nm.2,
        ],
        dtype: DTYPE.to_string(),
        order: ORDER.to_string(),
        payload: payload_name,
    };
    let mut header_bytes = serde_json::to_vec_pretty(&header)
        .map_err(|e| GapweldError::invalid(format!("header encode: {e}")))?;
    header_bytes.push(b'\n');
    fs::write(path, header_bytes).map_err(|e| GapweldError::io(path, e))?;

    let mut file = fs::File::create(&payload_path).map_err(|e| GapweldError::io(&payload_path, e))?;
    let mut buf = Vec::with_capacity(vol.data.len() * 8);
    for &v in &vol.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)
        .map_err(|e| GapweldError::io(&payload_path, e))?;
    Ok(())
}

/// Load a volume saved by [`save_volume`]. The payload filename in the
/// header is resolved relative to the header's directory.
pub fn load_volume(path: &Path) -> Result<LabelVolume> {
    let header_bytes = fs::read(path).map_err(|e| GapweldError::io(path, e))?;
    let header: VolumeHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| GapweldError::format(path, format!("header: {e}")))?;

    if header.dtype != DTYPE {
        return Err(GapweldError::format(
            path,
            format!("dtype must be {DTYPE:?}, got {:?}", header.dtype),
        ));
    }
    if header.order != ORDER {
        return Err(GapweldError::format(
            path,
            format!("order must be {ORDER:?}, got {:?}", header.order),
        ));
    }
    let dims = (
        header.dims[0] as usize,
        header.dims[1] as usize,
        header.dims[2] as usize,
    );
    let res = (
        header.resolution_nm[0],
        header.resolution_nm[1],
        header.resolution_nm[2],
    );
    LabelVolume::check_resolution(res)
        .map_err(|e| GapweldError::format(path, e.to_string()))?;

    let payload_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.payload);
    let mut file = fs::File::open(&payload_path).map_err(|e| GapweldError::io(&payload_path, e))?;
    let expected_voxels = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| GapweldError::format(path, "dims overflow"))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| GapweldError::io(&payload_path, e))?;
    if bytes.len() != expected_voxels * 8 {
        return Err(GapweldError::format(
            &payload_path,
            format!(
                "payload is {} bytes, header dims imply {}",
                bytes.len(),
                expected_voxels * 8
            ),
        ));
    }
    let data: Vec<u64> = bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LabelVolume::new(dims, res, data).map_err(|e| GapweldError::format(path, e.to_string()))
}

/// Relabel into connected components. Two foreground voxels share an output
/// label iff they are connected through neighbors carrying the same *input*
/// label. Background stays 0. Output labels are 1..=K, assigned in ascending
/// order of each component's first voxel in x-fastest scan order.
pub fn connected_components(vol: &LabelVolume, connectivity: Connectivity) -> LabelVolume {
    let (dx, dy, dz) = vol.dims;
    let offsets = connectivity.offsets();
    let mut out = vec![0u64; vol.data.len()];
    let mut next_label = 0u64;
    let mut queue = VecDeque::new();

    for start in 0..vol.data.len() {
        let seed_label = vol.data[start];
        if seed_label == 0 || out[start] != 0 {
            continue;
        }
        next_label += 1;
        out[start] = next_label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let x = i % dx;
            let y = (i / dx) % dy;
            let z = i / (dx * dy);
            for &(ox, oy, oz) in &offsets {
                let nx = x as isize + ox;
                let ny = y as isize + oy;
                let nz = z as isize + oz;
                if nx < 0 || ny < 0 || nz < 0 {
                    continue;
                }
                let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
                if nx >= dx || ny >= dy || nz >= dz {
                    continue;
                }
                let ni = nx + dx * (ny + dy * nz);
                if out[ni] == 0 && vol.data[ni] == seed_label {
                    out[ni] = next_label;
                    queue.push_back(ni);
                }
            }
        }
    }

    LabelVolume {
        dims: vol.dims,
        resolution_nm: vol.resolution_nm,
        data: out,
    }
}

/// Voxels of `label` with at least one 6-neighbor that is a different label
/// or outside the volume. Out-of-bounds counts as exterior, so voxels on the
/// volume boundary are always included. Returned in x-fastest scan order; an
/// absent label yields an empty list.
pub fn surface_voxels(vol: &LabelVolume, label: u64) -> Vec<VoxelCoord> {
    let mut out = Vec::new();
    let (dx, dy, dz) = vol.dims;
    for z in 0..dz {
        for y in 0..dy {
            for x in 0..dx {
                if vol.get(x, y, z) != label {
                    continue;
                }
                if is_surface(vol, x, y, z, label, dx, dy, dz) {
                    out.push(VoxelCoord { x, y, z });
                }
            }
        }
    }
    out
}

#[inline]
fn is_surface(
    vol: &LabelVolume,
    x: usize,
    y: usize,
    z: usize,
    label: u64,
    dx: usize,
    dy: usize,
    dz: usize,
) -> bool {
    (x == 0 || vol.get(x - 1, y, z) != label)
        || (x + 1 == dx || vol.get(x + 1, y, z) != label)
        || (y == 0 || vol.get(x, y - 1, z) != label)
        || (y + 1 == dy || vol.get(x, y + 1, z) != label)
        || (z == 0 || vol.get(x, y, z - 1) != label)
        || (z + 1 == dz || vol.get(x, y, z + 1) != label)
}

/// Surface voxels of every foreground label in one scan. Lists follow
/// x-fastest order, identical to calling [`surface_voxels`] per label.
pub fn surface_voxels_by_label(vol: &LabelVolume) -> std::collections::BTreeMap<u64, Vec<VoxelCoord>> {
    let mut map: std::collections::BTreeMap<u64, Vec<VoxelCoord>> = Default::default();
    let (dx, dy, dz) = vol.dims;
    for z in 0..dz {
        for y in 0..dy {
            for x in 0..dx {
                let label = vol.get(x, y, z);
                if label == 0 {
                    continue;
                }
                if is_surface(vol, x, y, z, label, dx, dy, dz) {
                    map.entry(label).or_default().push(VoxelCoord { x, y, z });
                }
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::{BTreeMap, BTreeSet};

    fn vol_from(dims: (usize, usize, usize), data: Vec<u64>) -> LabelVolume {
        LabelVolume::new(dims, (4.0, 4.0, 40.0), data).unwrap()
    }

    /// Independent partition oracle: iterative min-label propagation until
    /// fixpoint, entirely separate from the BFS in `connected_components`.
    fn flood_fill_oracle(vol: &LabelVolume, connectivity: Connectivity) -> Vec<u64> {
        let (dx, dy, dz) = vol.dims();
        let n = vol.voxel_count();
        let mut ids: Vec<u64> = (0..n as u64).map(|i| i + 1).collect();
        for i in 0..n {
            if vol.data()[i] == 0 {
                ids[i] = 0;
            }
        }
        let offsets = connectivity.offsets();
        loop {
            let mut changed = false;
            for z in 0..dz {
                for y in 0..dy {
                    for x in 0..dx {
                        let i = vol.index(x, y, z);
                        if vol.data()[i] == 0 {
                            continue;
                        }
                        for &(ox, oy, oz) in &offsets {
                            let nx = x as isize + ox;
                            let ny = y as isize + oy;
                            let nz = z as isize + oz;
                            if nx < 0 || ny < 0 || nz < 0 {
                                continue;
                            }
                            let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
                            if nx >= dx || ny >= dy || nz >= dz {
                                continue;
                            }
                            let ni = vol.index(nx, ny, nz);
                            if vol.data()[ni] == vol.data()[i] && ids[ni] < ids[i] {
                                ids[i] = ids[ni];
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                return ids;
            }
        }
    }

    fn partition_classes(labels: &[u64]) -> BTreeSet<BTreeSet<usize>> {
        let mut classes: BTreeMap<u64, BTreeSet<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            if l != 0 {
                classes.entry(l).or_default().insert(i);
            }
        }
        classes.into_values().collect()
    }

    #[test]
    fn new_rejects_size_mismatch() {
        assert!(LabelVolume::new((2, 2, 2), (1.0, 1.0, 1.0), vec![0; 7]).is_err());
    }

    #[test]
    fn new_rejects_bad_resolution() {
        assert!(LabelVolume::new((1, 1, 1), (0.0, 1.0, 1.0), vec![0]).is_err());
        assert!(LabelVolume::new((1, 1, 1), (1.0, -4.0, 1.0), vec![0]).is_err());
    }

    #[test]
    fn roundtrip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = LabelVolume::filled((3, 4, 5), (4.0, 4.0, 40.0), 0).unwrap();
        v.set(1, 2, 3, 7);
        v.set(0, 0, 0, u64::MAX);
        let path = dir.path().join("v.json");
        save_volume(&v, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = LabelVolume::filled((4, 4, 4), (4.0, 4.0, 40.0), 0).unwrap();
        v.set(2, 1, 0, 42);
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        save_volume(&v, &p1).unwrap();
        save_volume(&v, &p2).unwrap();
        let h1 = std::fs::read(&p1).unwrap();
        let h2 = std::fs::read(&p2).unwrap();
        // Headers differ only in the payload filename they point at.
        assert_eq!(
            String::from_utf8(h1).unwrap().replace("a.u64", "b.u64"),
            String::from_utf8(h2).unwrap()
        );
        assert_eq!(
            std::fs::read(dir.path().join("a.u64")).unwrap(),
            std::fs::read(dir.path().join("b.u64")).unwrap()
        );
    }

    #[test]
    fn all_zero_volume_payload() {
        let dir = tempfile::tempdir().unwrap();
        let v = LabelVolume::filled((4, 4, 4), (1.0, 1.0, 1.0), 0).unwrap();
        let path = dir.path().join("zero.json");
        save_volume(&v, &path).unwrap();
        let payload = std::fs::read(dir.path().join("zero.u64")).unwrap();
        assert_eq!(payload.len(), 64 * 8);
        assert!(payload.iter().all(|&b| b == 0));
    }

    #[test]
    fn load_missing_file_is_io_error() {
        let err = load_volume(Path::new("/nonexistent/v.json")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn load_rejects_payload_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        let header = r#"{"dims":[2,2,2],"resolution_nm":[4,4,40],"dtype":"u64le","order":"x-fastest","payload":"v.u64"}"#;
        std::fs::write(&path, header).unwrap();
        std::fs::write(dir.path().join("v.u64"), vec![0u8; 7 * 8]).unwrap();
        let err = load_volume(&path).unwrap_err();
        assert_eq!(err.exit_code(), 1, "size mismatch is a format error: {err}");
    }

    #[test]
    fn load_rejects_nonpositive_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        let header = r#"{"dims":[1,1,1],"resolution_nm":[4,0,40],"dtype":"u64le","order":"x-fastest","payload":"v.u64"}"#;
        std::fs::write(&path, header).unwrap();
        std::fs::write(dir.path().join("v.u64"), vec![0u8; 8]).unwrap();
        assert!(load_volume(&path).is_err());
    }

    #[test]
    fn accepts_paper_scale_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.json");
        // Header checks only; payload kept tiny by lying about nothing:
        // use a 1250x1250x125-consistent payload would be 1.5 GB, so this
        // test constructs a small volume with the same resolution instead
        // and verifies the fields carry through.
        let v = LabelVolume::filled((5, 5, 5), (4.0, 4.0, 40.0), 1).unwrap();
        save_volume(&v, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back.resolution_nm(), (4.0, 4.0, 40.0));
        assert_eq!(back.dims(), (5, 5, 5));
    }

    #[test]
    fn single_tube_is_one_component() {
        let mut v = vol_from((3, 3, 6), vec![0; 54]);
        for z in 0..6 {
            v.set(1, 1, z, 9);
        }
        let cc = connected_components(&v, Connectivity::Six);
        let labels: BTreeSet<u64> = cc.data().iter().copied().filter(|&l| l != 0).collect();
        assert_eq!(labels.len(), 1);
        assert_eq!(labels.into_iter().next(), Some(1));
    }

    #[test]
    fn gap_splits_same_label_into_two_components() {
        let mut v = vol_from((1, 1, 5), vec![0; 5]);
        v.set(0, 0, 0, 3);
        v.set(0, 0, 4, 3);
        let cc = connected_components(&v, Connectivity::Six);
        assert_eq!(cc.get(0, 0, 0), 1);
        assert_eq!(cc.get(0, 0, 4), 2);
    }

    #[test]
    fn touching_different_labels_stay_separate() {
        let mut v = vol_from((2, 1, 1), vec![0; 2]);
        v.set(0, 0, 0, 5);
        v.set(1, 0, 0, 6);
        let cc = connected_components(&v, Connectivity::Six);
        assert_ne!(cc.get(0, 0, 0), cc.get(1, 0, 0));
    }

    #[test]
    fn diagonal_touch_joins_only_under_26() {
        let mut v = vol_from((2, 2, 1), vec![0; 4]);
        v.set(0, 0, 0, 5);
        v.set(1, 1, 0, 5);
        let six = connected_components(&v, Connectivity::Six);
        assert_ne!(six.get(0, 0, 0), six.get(1, 1, 0));
        let full = connected_components(&v, Connectivity::TwentySix);
        assert_eq!(full.get(0, 0, 0), full.get(1, 1, 0));
    }

    #[test]
    fn labels_are_contiguous_in_scan_order() {
        let mut v = vol_from((4, 1, 1), vec![0; 4]);
        v.set(3, 0, 0, 7); // later in scan order
        v.set(0, 0, 0, 7);
        let cc = connected_components(&v, Connectivity::Six);
        assert_eq!(cc.get(0, 0, 0), 1);
        assert_eq!(cc.get(3, 0, 0), 2);
    }

    #[test]
    fn random_volumes_match_flood_fill_oracle() {
        let mut rng = crate::seeds::rng_from(&[0xcc, 1]);
        for trial in 0..40 {
            let dims = (6, 6, 6);
            let data: Vec<u64> = (0..216).map(|_| rng.random_range(0..4u64)).collect();
            let v = vol_from(dims, data);
            for conn in [Connectivity::Six, Connectivity::TwentySix] {
                let cc = connected_components(&v, conn);
                let oracle = flood_fill_oracle(&v, conn);
                assert_eq!(
                    partition_classes(cc.data()),
                    partition_classes(&oracle),
                    "trial {trial} connectivity {conn:?}"
                );
            }
        }
    }

    #[test]
    fn components_idempotent_up_to_relabel() {
        let mut rng = crate::seeds::rng_from(&[0xcc, 2]);
        let data: Vec<u64> = (0..512).map(|_| rng.random_range(0..3u64)).collect();
        let v = vol_from((8, 8, 8), data);
        let once = connected_components(&v, Connectivity::Six);
        let twice = connected_components(&once, Connectivity::Six);
        assert_eq!(once, twice, "second pass must already be canonical");
    }

    #[test]
    fn isolated_voxel_is_its_own_surface() {
        let mut v = vol_from((5, 5, 5), vec![0; 125]);
        v.set(2, 2, 2, 4);
        assert_eq!(surface_voxels(&v, 4), vec![VoxelCoord::new(2, 2, 2)]);
    }

    #[test]
    fn solid_cube_surface_excludes_center() {
        let mut v = vol_from((5, 5, 5), vec![0; 125]);
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    v.set(x, y, z, 1);
                }
            }
        }
        let surf = surface_voxels(&v, 1);
        assert_eq!(surf.len(), 26);
        assert!(!surf.contains(&VoxelCoord::new(2, 2, 2)));
    }

    #[test]
    fn boundary_voxels_count_as_surface() {
        let v = LabelVolume::filled((3, 3, 3), (1.0, 1.0, 1.0), 8).unwrap();
        // Every voxel of a full volume touches the boundary except the center.
        let surf = surface_voxels(&v, 8);
        assert_eq!(surf.len(), 26);
        assert!(!surf.contains(&VoxelCoord::new(1, 1, 1)));
    }

    #[test]
    fn absent_label_yields_empty_surface() {
        let v = LabelVolume::filled((2, 2, 2), (1.0, 1.0, 1.0), 0).unwrap();
        assert!(surface_voxels(&v, 3).is_empty());
    }

    #[test]
    fn onion_shells_on_solid_cube() {
        // Removing the surface of a 5^3 cube leaves the 3^3 core; its
        // surface then excludes only the single center voxel.
        let mut v = vol_from((7, 7, 7), vec![0; 343]);
        for z in 1..6 {
            for y in 1..6 {
                for x in 1..6 {
                    v.set(x, y, z, 2);
                }
            }
        }
        let shell = surface_voxels(&v, 2);
        assert_eq!(shell.len(), 125 - 27);
        let mut peeled = v.clone();
        for c in &shell {
            peeled.set(c.x, c.y, c.z, 0);
        }
        let inner = surface_voxels(&peeled, 2);
        assert_eq!(inner.len(), 27 - 1);
    }

    #[test]
    fn surface_map_matches_per_label_calls() {
        let mut rng = crate::seeds::rng_from(&[0xcc, 3]);
        let data: Vec<u64> = (0..512).map(|_| rng.random_range(0..4u64)).collect();
        let v = vol_from((8, 8, 8), data);
        let map = surface_voxels_by_label(&v);
        for label in 1..4u64 {
            let direct = surface_voxels(&v, label);
            let via_map = map.get(&label).cloned().unwrap_or_default();
            assert_eq!(direct, via_map, "label {label}");
        }
        assert!(!map.contains_key(&0));
    }
}
