//! Diversified patch-based style swapping.
//!
//! Every content-feature patch is replaced by a style-feature patch chosen by
//! normalized cross-correlation against *shifted-normalized* style patches:
//! each style patch is divided by its L2 norm plus a random positive
//! deviation. Re-drawing the deviations yields arbitrarily many distinct yet
//! plausible swapped feature maps; drawing none of them reduces to the
//! classic deterministic style swap.
//!
//! The pipeline:
//!
//! 1. [`extract_patches`] slices both maps into sliding-window patches.
//! 2. [`sample_sigmas`] + [`shifted_normalize`] shift each style patch norm.
//! 3. [`ncc_match`] scores every content/style pair with a blocked dense
//!    product and keeps the per-row argmax.
//! 4. [`reconstruct`] folds the *original* style patches back with overlap
//!    averaging.
//!
//! [`div_swap`] composes all of the above. [`flip_audit`] and the
//! [`metrics`] module check the resulting assignments and measure diversity.
//!
//! Core math is generic over the [`Scalar`] type (`f32` or `f64`); the
//! on-disk `.dsfm` format is always binary32, so [`load_feature_map`] and
//! [`save_feature_map`] work on [`FeatureMapF32`].

mod audit;
mod error;
mod feature;
mod matching;
pub mod metrics;
mod oracle;
mod patch;
mod scalar;
mod sigma;
mod swap;

pub use audit::{flip_audit, FlipAuditReport, FLIP_SLACK};
pub use error::{DivSwapError, Result};
pub use feature::{
    channel_l2_map, load_feature_map, read_feature_map, save_feature_map, write_feature_map,
    FeatureMap, SpatialMap, DSFM_HEADER_LEN, DSFM_MAGIC, DSFM_VERSION,
};
pub use matching::ncc_match;
pub use oracle::ncc_match_oracle;
pub use patch::{
    extract_patches, patch_norms, reconstruct, write_match_csv, MatchResult, OverlapMode,
    PatchGrid, PatchLayout,
};
pub use scalar::Scalar;
pub use sigma::{sample_sigmas, Preset, SigmaDistribution, SigmaVector, SwapConfig};
pub use swap::{div_swap, div_swap_with, shifted_normalize, SwapOutput};

pub type FeatureMapF32 = FeatureMap<f32>;
pub type FeatureMapF64 = FeatureMap<f64>;
pub type PatchGridF32 = PatchGrid<f32>;
pub type PatchGridF64 = PatchGrid<f64>;
pub type MatchResultF32 = MatchResult<f32>;
pub type MatchResultF64 = MatchResult<f64>;
pub type SigmaVectorF32 = SigmaVector<f32>;
pub type SigmaVectorF64 = SigmaVector<f64>;
pub type SwapOutputF32 = SwapOutput<f32>;
pub type SwapOutputF64 = SwapOutput<f64>;
