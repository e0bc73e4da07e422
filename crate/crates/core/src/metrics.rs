//! Diversity statistics over sets of outputs and activation heat maps.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DivSwapError, Result};
use crate::feature::{channel_l2_map, FeatureMap};
use crate::scalar::Scalar;

/// 8-bit RGB image, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DivSwapError::Dimension(format!(
                "image dims must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != 3 * width * height {
            return Err(DivSwapError::Dimension(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, rgb.repeat(width * height))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Decodes any PNG and converts it to 8-bit RGB.
pub fn load_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()?
        .into_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, img.into_raw())
}

/// Writes an 8-bit RGB PNG via a temporary file renamed into place.
pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::Builder::new().suffix(".png").tempfile_in(dir)?;
    image::save_buffer_with_format(
        tmp.path(),
        &img.pixels,
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Mean absolute channel difference, normalized to `[0, 1]`.
pub fn pixel_distance(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(DivSwapError::Dimension(format!(
            "images are {}x{} and {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let total: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| u64::from(x.abs_diff(y)))
        .sum();
    Ok(total as f64 / (255.0 * a.pixels.len() as f64))
}

/// `1 − cos` of the flattened maps, in `[0, 2]`. Two all-zero maps are at
/// distance 0; an all-zero map is at distance 1 from anything else.
pub fn feature_distance<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(DivSwapError::Dimension(format!(
            "feature maps are {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.values().iter().zip(b.values()) {
        let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 && bb == 0.0 {
        return Ok(0.0);
    }
    if aa == 0.0 || bb == 0.0 {
        return Ok(1.0);
    }
    // sqrt(aa·bb) rather than sqrt(aa)·sqrt(bb): identical maps give exactly 1.
    let cos = (ab / (aa * bb).sqrt()).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Pixel,
    Feature,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Pixel => "pixel",
            DistanceKind::Feature => "feature",
        })
    }
}

/// Statistics of a distance over all unordered pairs of a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiversityReport {
    pub kind: DistanceKind,
    pub n_outputs: usize,
    pub n_pairs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation over pairs.
    pub stddev: f64,
}

impl DiversityReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for DiversityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {}", "kind", self.kind)?;
        writeln!(f, "{:<10} {}", "n_outputs", self.n_outputs)?;
        writeln!(f, "{:<10} {}", "n_pairs", self.n_pairs)?;
        writeln!(f, "{:<10} {:.6}", "mean", self.mean)?;
        writeln!(f, "{:<10} {:.6}", "min", self.min)?;
        writeln!(f, "{:<10} {:.6}", "max", self.max)?;
        write!(f, "{:<10} {:.6}", "stddev", self.stddev)
    }
}

fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Evaluates `distance` over every unordered pair `(i, j)`, `i < j`.
///
/// Pairs are computed in parallel but aggregated in index order, so the
/// report is identical for any thread count.
pub fn pairwise_report<I, F>(items: &[I], kind: DistanceKind, distance: F) -> Result<DiversityReport>
where
    I: Sync,
    F: Fn(&I, &I) -> Result<f64> + Sync,
{
    let n = items.len();
    if n < 2 {
        return Err(DivSwapError::Argument(format!(
            "need at least 2 items for pairwise distances, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| distance(&items[i], &items[j]))
        .collect::<Result<Vec<f64>>>()?;

    let count = dists.len() as f64;
    let mean = kahan_sum(dists.iter().copied()) / count;
    let var = kahan_sum(dists.iter().map(|d| (d - mean) * (d - mean))) / count;
    Ok(DiversityReport {
        kind,
        n_outputs: n,
        n_pairs: dists.len(),
        mean,
        min: dists.iter().copied().fold(f64::INFINITY, f64::min),
        max: dists.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        stddev: var.sqrt(),
    })
}

pub fn pixel_report(images: &[RgbImage]) -> Result<DiversityReport> {
    pairwise_report(images, DistanceKind::Pixel, pixel_distance)
}

pub fn feature_report<T: Scalar>(maps: &[FeatureMap<T>]) -> Result<DiversityReport> {
    pairwise_report(maps, DistanceKind::Feature, |a, b| feature_distance(a, b))
}

/// Grayscale heat map of per-location channel magnitude: min-max scaled to
/// `[0, 255]` (a constant map is all zeros), bilinearly resized with
/// half-pixel centers, replicated into RGB.
pub fn heatmap_png<T: Scalar>(
    map: &FeatureMap<T>,
    out_width: usize,
    out_height: usize,
) -> Result<RgbImage> {
    if out_width == 0 || out_height == 0 {
        return Err(DivSwapError::Argument(format!(
            "heat map size must be positive, got {out_width}x{out_height}"
        )));
    }
    let mags = channel_l2_map(map);
    let vals: Vec<f64> = mags.values.iter().map(|v| v.to_f64_lossy()).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm: Vec<f64> = if hi > lo {
        vals.iter().map(|v| (v - lo) / (hi - lo) * 255.0).collect()
    } else {
        vec![0.0; vals.len()]
    };

    let (in_h, in_w) = (mags.height, mags.width);
    let sample_axis = |dst: usize, out_len: usize, in_len: usize| {
        let src = ((dst as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5)
            .clamp(0.0, (in_len - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(in_len - 1);
        (i0, i1, src - i0 as f64)
    };

    let mut pixels = Vec::with_capacity(3 * out_width * out_height);
    for y in 0..out_height {
        let (y0, y1, ty) = sample_axis(y, out_height, in_h);
        for x in 0..out_width {
            let (x0, x1, tx) = sample_axis(x, out_width, in_w);
            let at = |yy: usize, xx: usize| norm[yy * in_w + xx];
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x1) * tx;
            let bottom = at(y1, x0) * (1.0 - tx) + at(y1, x1) * tx;
            let v = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
            pixels.extend_from_slice(&[v, v, v]);
        }
    }
    RgbImage::new(out_width, out_height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(v: u8) -> RgbImage {
        RgbImage::filled(1, 1, [v, v, v]).unwrap()
    }

    #[test]
    fn pixel_distance_extremes() {
        let a = RgbImage::new(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(pixel_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(pixel_distance(&gray(0), &gray(255)).unwrap(), 1.0);
        assert!(pixel_distance(&a, &gray(0)).is_err());
    }

    #[test]
    fn feature_distance_cases() {
        let a = FeatureMap::new(1, 1, 2, vec![1.0f64, 0.0]).unwrap();
        let b = FeatureMap::new(1, 1, 2, vec![0.0f64, 1.0]).unwrap();
        assert_eq!(feature_distance(&a, &b).unwrap(), 1.0);
        let c = FeatureMap::new(1, 2, 2, vec![0.3f64, -1.0, 2.0, 0.7]).unwrap();
        assert_eq!(feature_distance(&c, &c).unwrap(), 0.0);
        let neg = c.scaled(-1.0).unwrap();
        assert!((feature_distance(&c, &neg).unwrap() - 2.0).abs() < 1e-15);
        let z = FeatureMap::<f64>::zeros(1, 2, 2).unwrap();
        assert_eq!(feature_distance(&z, &z).unwrap(), 0.0);
        assert!(feature_distance(&a, &c).is_err());
    }

    #[test]
    fn three_gray_levels() {
        // Half-levels are not representable in u8; check the arithmetic on
        // real values and on the nearest byte levels.
        let vals = [0.0f64, 127.5, 255.0];
        let r = pairwise_report(&vals, DistanceKind::Pixel, |a, b| Ok((a - b).abs() / 255.0)).unwrap();
        assert_eq!(r.n_pairs, 3);
        assert!((r.mean - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((r.min, r.max), (0.5, 1.0));

        let imgs = [gray(0), gray(128), gray(255)];
        let r = pixel_report(&imgs).unwrap();
        assert!((r.mean - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_items_have_zero_spread() {
        let imgs = vec![gray(17); 5];
        let r = pixel_report(&imgs).unwrap();
        assert_eq!((r.n_outputs, r.n_pairs, r.mean, r.stddev), (5, 10, 0.0, 0.0));
        assert!(pixel_report(&imgs[..1]).is_err());
    }

    #[test]
    fn json_line_keys() {
        let r = pixel_report(&[gray(0), gray(255)]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        for key in ["kind", "n_outputs", "n_pairs", "mean", "min", "max", "stddev"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["kind"], "pixel");
        assert!(!r.to_json_line().contains('\n'));
    }

    #[test]
    fn heatmap_cases() {
        let constant = FeatureMap::new(2, 3, 3, vec![1.5f32; 18]).unwrap();
        let img = heatmap_png(&constant, 7, 5).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0));

        let single = FeatureMap::new(3, 1, 1, vec![1.0f32, 2.0, 3.0]).unwrap();
        assert!(heatmap_png(&single, 4, 4).unwrap().pixels().iter().all(|&p| p == 0));

        let two = FeatureMap::new(1, 1, 2, vec![3.0f32, 5.0]).unwrap();
        let img = heatmap_png(&two, 2, 1).unwrap();
        assert_eq!(img.pixels(), &[0, 0, 0, 255, 255, 255]);

        let up = heatmap_png(&two, 4, 1).unwrap();
        let row: Vec<u8> = (0..4).map(|x| up.pixel(x, 0)[0]).collect();
        // half-pixel centers: sources at -0.25, 0.25, 0.75, 1.25 (clamped)
        assert_eq!(row, vec![0, 64, 191, 255]);
        assert!(heatmap_png(&two, 0, 1).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = RgbImage::new(2, 2, (0..12).map(|v| v * 20).collect()).unwrap();
        save_png(&img, &path).unwrap();
        assert_eq!(load_png(&path).unwrap(), img);
    }

    proptest! {
        #[test]
        fn distances_are_symmetric(
            a in proptest::collection::vec(-5.0f64..5.0, 6),
            b in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let fa = FeatureMap::new(2, 1, 3, a).unwrap();
            let fb = FeatureMap::new(2, 1, 3, b).unwrap();
            let ab = feature_distance(&fa, &fb).unwrap();
            prop_assert!((0.0..=2.0).contains(&ab));
            prop_assert!((ab - feature_distance(&fb, &fa).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn pixel_distance_symmetric(a in proptest::collection::vec(any::<u8>(), 12), b in proptest::collection::vec(any::<u8>(), 12)) {
            let ia = RgbImage::new(2, 2, a).unwrap();
            let ib = RgbImage::new(2, 2, b).unwrap();
            let d = pixel_distance(&ia, &ib).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, pixel_distance(&ib, &ia).unwrap());
        }

        #[test]
        fn report_mean_matches_enumeration(vals in proptest::collection::vec(0.0f64..100.0, 2..12)) {
            let r = pairwise_report(&vals, DistanceKind::Feature, |a, b| Ok((a - b).abs())).unwrap();
            let mut total = 0.0;
            let mut count = 0;
            for i in 0..vals.len() {
                for j in 0..vals.len() {
                    if i < j {
                        total += (vals[i] - vals[j]).abs();
                        count += 1;
                    }
                }
            }
            prop_assert_eq!(r.n_pairs, count);
            prop_assert!((r.mean - total / count as f64).abs() <= 1e-9 * (1.0 + r.mean));
        }

        #[test]
        fn heatmap_ignores_power_of_two_scale(
            v in proptest::collection::vec(0.0f32..10.0, 12),
            k in -6i32..6,
        ) {
            let m = FeatureMap::new(1, 3, 4, v).unwrap();
            let scaled = m.scaled(2f32.powi(k)).unwrap();
            prop_assert_eq!(heatmap_png(&m, 9, 7).unwrap(), heatmap_png(&scaled, 9, 7).unwrap());
        }
    }
}
