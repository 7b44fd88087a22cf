//! Training-free refinement of sparse weight masks.
//!
//! The crate covers the full desk-scale pipeline: deterministic synthetic
//! problem generation, calibration statistics, one-shot magnitude/wanda
//! pruning (ratio or n:m), iterative prune-and-grow mask refinement
//! driven by per-row reconstruction error, brute-force oracles for
//! verification, and a directory bundle format shared with the CLI.

pub mod bundle;
pub mod error;
pub mod oracle;
pub mod prune;
pub mod refine;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use prune::{prune_to_nm, prune_to_ratio, score_weights, Granularity, PruneMethod, PruneSpec, PruneTarget};
pub use refine::{
    apply_swap, grow_index, prune_index, refine_layer, refine_row, GrowCriterion,
    LayerRefineOutcome, PruneCriterion, RefineConfig, RowRefineReport, StopReason,
    TerminationMetric,
};
pub use synth::{generate_synthetic, standard_normals, splitmix64_output, SyntheticSpec};
pub use types::{
    compute_channel_stats, reconstruction_error, ActivationMatrix, ChannelStats, MaskPattern,
    RowReconState, SparsityMask, WeightMatrix,
};
