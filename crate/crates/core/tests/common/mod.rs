#![allow(dead_code)]

use divswap::{FeatureMap, PatchGrid, PatchLayout, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_map<T: Scalar>(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap<T> {
    FeatureMap::from_fn(c, h, w, |_, _, _| T::from_f64_lossy(rng.random::<f64>())).unwrap()
}

/// Post-ReLU activations: `max(0, z)` with `z` standard normal.
pub fn relu_map<T: Scalar>(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap<T> {
    FeatureMap::from_fn(c, h, w, |_, _, _| {
        let z: f64 = rng.sample(StandardNormal);
        T::from_f64_lossy(z.max(0.0))
    })
    .unwrap()
}

/// Sparse post-ReLU activations: `max(0, z − 1)`, about 16% non-zero.
pub fn sparse_relu_map<T: Scalar>(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap<T> {
    FeatureMap::from_fn(c, h, w, |_, _, _| {
        let z: f64 = rng.sample(StandardNormal);
        T::from_f64_lossy((z - 1.0).max(0.0))
    })
    .unwrap()
}

/// `n` ReLU-Gaussian rows of length `dim`, laid out as 1x1 patches of a `dim×1×n` map.
pub fn relu_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PatchGrid<f64> {
    let layout = PatchLayout::new((dim, 1, n), 1, 1).unwrap();
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        let z: f64 = rng.sample(StandardNormal);
        data.push(z.max(0.0));
    }
    PatchGrid::from_rows(layout, data).unwrap()
}

/// Plain unit normalization written out independently of the library.
pub fn unit_rows<T: Scalar>(grid: &PatchGrid<T>, epsilon: T) -> PatchGrid<T> {
    let mut out = Vec::with_capacity(grid.as_slice().len());
    for row in grid.rows() {
        let mut sq = T::zero();
        for &v in row {
            sq = sq + v * v;
        }
        let denom = sq.sqrt() + epsilon;
        out.extend(row.iter().map(|&v| v / denom));
    }
    PatchGrid::from_rows(*grid.layout(), out).unwrap()
}

/// Random `(content, style, k, s)` with `C ≤ 8`, `H, W ≤ 12`, `k ∈ {1,2,3}`, `s ∈ {1,2}`.
pub fn random_instance<T: Scalar>(
    rng: &mut ChaCha8Rng,
) -> (FeatureMap<T>, FeatureMap<T>, usize, usize) {
    let c = rng.random_range(1..=8);
    let k = rng.random_range(1..=3);
    let s = rng.random_range(1..=2);
    let mut dims = || (rng.random_range(k..=12), rng.random_range(k..=12));
    let (ch, cw) = dims();
    let (sh, sw) = dims();
    let content = uniform_map(rng, c, ch, cw);
    let style = uniform_map(rng, c, sh, sw);
    (content, style, k, s)
}

pub fn max_abs_diff<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x.to_f64_lossy() - y.to_f64_lossy()).abs())
        .fold(0.0, f64::max)
}
