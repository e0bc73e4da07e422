use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DivSwapError, Result};
use crate::patch::OverlapMode;
use crate::scalar::Scalar;

/// How the per-patch norm deviations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaDistribution {
    /// `σ ~ U(0, sigma_max]`.
    #[default]
    Uniform,
    /// Half-normal, `σ = |z|·sigma_max/2`.
    Normal,
    /// All deviations zero: plain NCC style swap.
    None,
}

/// Deviation ranges tuned for well-known patch-based and Gram-based pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Cnnmrf,
    StyleSwap,
    AvatarNet,
    Wct,
}

impl Preset {
    pub fn sigma_max(self) -> f64 {
        match self {
            Preset::Cnnmrf => 1e3,
            Preset::StyleSwap => 1e5,
            Preset::AvatarNet | Preset::Wct => 5e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// Upper end of the deviation range; ignored for [`SigmaDistribution::None`].
    pub sigma_max: f64,
    pub distribution: SigmaDistribution,
    pub seed: u64,
    /// Selects an independent deviation stream per generated output.
    pub output_index: u64,
    /// Denominator guard used only where a deviation is zero.
    pub epsilon: f64,
    pub overlap: OverlapMode,
}

impl Default for SwapConfig {
    fn default() -> Self {
        Self {
            patch_size: 3,
            stride: 1,
            sigma_max: 0.0,
            distribution: SigmaDistribution::None,
            seed: 0,
            output_index: 0,
            epsilon: 1e-9,
            overlap: OverlapMode::Average,
        }
    }
}

impl SwapConfig {
    /// Baseline (deterministic) swap.
    pub fn baseline() -> Self {
        Self::default()
    }

    pub fn uniform(sigma_max: f64, seed: u64) -> Self {
        Self {
            sigma_max,
            distribution: SigmaDistribution::Uniform,
            seed,
            ..Self::default()
        }
    }

    pub fn from_preset(preset: Preset, seed: u64) -> Self {
        Self::uniform(preset.sigma_max(), seed)
    }

    pub fn with_output_index(mut self, output_index: u64) -> Self {
        self.output_index = output_index;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(DivSwapError::Argument(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.distribution != SigmaDistribution::None
            && !(self.sigma_max > 0.0 && self.sigma_max.is_finite())
        {
            return Err(DivSwapError::Argument(format!(
                "sigma_max must be positive and finite, got {}",
                self.sigma_max
            )));
        }
        if self.patch_size == 0 || self.stride == 0 {
            return Err(DivSwapError::Argument(
                "patch size and stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-style-patch deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> SigmaVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// ChaCha words reserved per patch (one block). Draws are addressed by
/// `(seed, output_index, patch)` alone.
const WORDS_PER_PATCH: u128 = 16;

/// Draws one deviation per style patch.
///
/// `σ_j` depends only on `(config.seed, config.output_index, j)`: the ChaCha
/// key is the seed, the stream is the output index and patch `j` reads from
/// its own block of the keystream.
pub fn sample_sigmas<T: Scalar>(n_patches: usize, config: &SwapConfig) -> Result<SigmaVector<T>> {
    if n_patches == 0 {
        return Err(DivSwapError::Argument("need at least one style patch".into()));
    }
    config.validate()?;
    if config.distribution == SigmaDistribution::None {
        return Ok(SigmaVector::zeros(n_patches));
    }

    let mut base = ChaCha8Rng::seed_from_u64(config.seed);
    base.set_stream(config.output_index);
    let sigma_max = config.sigma_max;

    let values = (0..n_patches)
        .map(|j| {
            let mut rng = base.clone();
            rng.set_word_pos(j as u128 * WORDS_PER_PATCH);
            let sigma = match config.distribution {
                SigmaDistribution::Uniform => {
                    let u: f64 = rng.random();
                    sigma_max * (1.0 - u)
                }
                SigmaDistribution::Normal => loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let s = z.abs() * sigma_max * 0.5;
                    if s > 0.0 {
                        break s;
                    }
                },
                SigmaDistribution::None => unreachable!(),
            };
            let cast = T::from_f64_lossy(sigma);
            if cast > T::zero() {
                cast
            } else {
                T::min_positive_value()
            }
        })
        .collect();
    Ok(SigmaVector { values })
}
