//! Times the baseline and diversified swap at a Relu4_1-like size.

use std::time::Instant;

use divswap::{div_swap, FeatureMap, SwapConfig};
use rand::{Rng, SeedableRng};

fn relu_noise(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap<f32> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.random::<f32>() - 0.5)
        .unwrap()
        .map_values(|v| v.max(0.0))
        .unwrap()
}

fn main() {
    // 256 channels, 52x52 map, 3x3 patches: 2500 patches of dimension 2304.
    let content = relu_noise(256, 52, 52, 1);
    let style = relu_noise(256, 52, 52, 2);
    for (name, cfg) in [
        ("baseline", SwapConfig::baseline()),
        ("diversified", SwapConfig::uniform(5e3, 7)),
    ] {
        let t = Instant::now();
        let out = div_swap(&content, &style, &cfg).unwrap();
        println!("{name:<12} {:>8.3} s  (first assignment {})", t.elapsed().as_secs_f64(), out.matches.assignments[0]);
    }
}
