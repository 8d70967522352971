//! gapweld: repair 3D neuron segmentations that were split by consecutive
//! missing image sections.
//!
//! The pipeline operates purely on dense label volumes -- no grayscale EM
//! data is involved:
//!
//! 1. [`synth`] generates deterministic tubular phantom volumes.
//! 2. [`gap`] zeroes out a run of z-slices and relabels the resulting
//!    fragments, recording which fragment pairs truly belong together.
//! 3. [`candidates`] ranks bottom fragments per top fragment by average
//!    physical distance across the gap.
//! 4. [`pointcloud`] turns each (top, bottom) candidate into a normalized
//!    fixed-size point cloud.
//! 5. [`scoring`] assigns merge probabilities via a distance baseline, a
//!    trainable permutation-invariant point network, or an external score
//!    file.
//! 6. [`eval`] thresholds scores into merges, applies them, and measures
//!    Variation of Information plus merge success/error rates, including
//!    sliding-gap averages and threshold sweeps.
//!
//! The `gapweld` binary exposes all of this as subcommands; see [`cli`].

pub mod candidates;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gap;
pub mod pointcloud;
pub mod scoring;
mod seeds;
pub mod synth;
pub mod volume;

pub use error::{GapweldError, Result};
pub use volume::{Connectivity, LabelVolume, VoxelCoord};
