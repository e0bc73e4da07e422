use crate::error::{DivSwapError, Result};
use crate::feature::FeatureMap;
use crate::matching::ncc_match;
use crate::patch::{extract_patches, patch_norms, reconstruct, MatchResult, PatchGrid};
use crate::scalar::Scalar;
use crate::sigma::{sample_sigmas, SigmaVector, SwapConfig};

/// Divides each style row by `‖row‖ + σ_j`, adding `epsilon` only where `σ_j = 0`.
pub fn shifted_normalize<T: Scalar>(
    style: &PatchGrid<T>,
    sigmas: &SigmaVector<T>,
    epsilon: T,
) -> Result<PatchGrid<T>> {
    if sigmas.len() != style.n_patches() {
        return Err(DivSwapError::Dimension(format!(
            "{} sigmas for {} style patches",
            sigmas.len(),
            style.n_patches()
        )));
    }
    let norms = patch_norms(style);
    Ok(normalize_with_norms(style, &norms, sigmas, epsilon))
}

fn normalize_with_norms<T: Scalar>(
    style: &PatchGrid<T>,
    norms: &[T],
    sigmas: &SigmaVector<T>,
    epsilon: T,
) -> PatchGrid<T> {
    style.map_rows(|j, src, dst| {
        let sigma = sigmas.values[j];
        let guard = if sigma == T::zero() { epsilon } else { T::zero() };
        let denom = norms[j] + sigma + guard;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = s / denom;
        }
    })
}

/// Swapped feature map plus everything needed to audit or reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapOutput<T> {
    pub output: FeatureMap<T>,
    pub matches: MatchResult<T>,
    pub sigmas: SigmaVector<T>,
}

/// Diversified style swap of `content` with patches from `style`.
///
/// With [`crate::SigmaDistribution::None`] this is the deterministic
/// nearest-NCC style swap.
pub fn div_swap<T: Scalar>(
    content: &FeatureMap<T>,
    style: &FeatureMap<T>,
    config: &SwapConfig,
) -> Result<SwapOutput<T>> {
    config.validate()?;
    let prepared = Prepared::new(content, style, config)?;
    let sigmas = sample_sigmas(prepared.style.n_patches(), config)?;
    prepared.run(content, sigmas, config)
}

/// Like [`div_swap`] but with caller-supplied deviations.
pub fn div_swap_with<T: Scalar>(
    content: &FeatureMap<T>,
    style: &FeatureMap<T>,
    config: &SwapConfig,
    sigmas: SigmaVector<T>,
) -> Result<SwapOutput<T>> {
    config.validate()?;
    let prepared = Prepared::new(content, style, config)?;
    if sigmas.len() != prepared.style.n_patches() {
        return Err(DivSwapError::Dimension(format!(
            "{} sigmas for {} style patches",
            sigmas.len(),
            prepared.style.n_patches()
        )));
    }
    prepared.run(content, sigmas, config)
}

struct Prepared<T> {
    content: PatchGrid<T>,
    style: PatchGrid<T>,
    norms: Vec<T>,
}

impl<T: Scalar> Prepared<T> {
    fn new(content: &FeatureMap<T>, style: &FeatureMap<T>, config: &SwapConfig) -> Result<Self> {
        if content.channels() != style.channels() {
            return Err(DivSwapError::Dimension(format!(
                "content has {} channels, style has {}",
                content.channels(),
                style.channels()
            )));
        }
        let content = extract_patches(content, config.patch_size, config.stride)?;
        let style = extract_patches(style, config.patch_size, config.stride)?;
        let norms = patch_norms(&style);
        Ok(Self {
            content,
            style,
            norms,
        })
    }

    fn run(
        &self,
        content: &FeatureMap<T>,
        sigmas: SigmaVector<T>,
        config: &SwapConfig,
    ) -> Result<SwapOutput<T>> {
        let eps = T::from_f64_lossy(config.epsilon);
        let normalized = normalize_with_norms(&self.style, &self.norms, &sigmas, eps);
        let matches = ncc_match(&self.content, &normalized)?;
        let output = reconstruct(
            &matches,
            &self.style,
            self.content.layout(),
            config.overlap,
            Some(content),
        )?;
        Ok(SwapOutput {
            output,
            matches,
            sigmas,
        })
    }
}
