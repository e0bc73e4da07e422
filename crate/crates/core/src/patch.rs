use std::io::Write;

use crate::error::{DivSwapError, Result};
use crate::feature::FeatureMap;
use crate::scalar::Scalar;

/// Geometry of a sliding-window patch extraction over a `C×H×W` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchLayout {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl PatchLayout {
    pub fn new(source_dims: (usize, usize, usize), patch_size: usize, stride: usize) -> Result<Self> {
        let (channels, height, width) = source_dims;
        if stride == 0 {
            return Err(DivSwapError::Argument("stride must be at least 1".into()));
        }
        if channels == 0 {
            return Err(DivSwapError::Dimension("source map has no channels".into()));
        }
        if patch_size == 0 {
            return Err(DivSwapError::Argument("patch size must be at least 1".into()));
        }
        if patch_size > height || patch_size > width {
            return Err(DivSwapError::Dimension(format!(
                "patch size {patch_size} does not fit a {height}x{width} map"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            patch_size,
            stride,
            grid_rows: (height - patch_size) / stride + 1,
            grid_cols: (width - patch_size) / stride + 1,
        })
    }

    pub fn n_patches(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Length of a flattened patch, `C·k·k`.
    pub fn dim(&self) -> usize {
        self.channels * self.patch_size * self.patch_size
    }

    pub fn source_dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Top-left source coordinate `(y, x)` of patch `i`.
    #[inline]
    pub fn origin(&self, i: usize) -> (usize, usize) {
        (
            (i / self.grid_cols) * self.stride,
            (i % self.grid_cols) * self.stride,
        )
    }

    /// True when every source element lies inside at least one window.
    pub fn covers_fully(&self) -> bool {
        let covered = |extent: usize, cells: usize| (cells - 1) * self.stride + self.patch_size == extent;
        self.stride <= self.patch_size
            && covered(self.height, self.grid_rows)
            && covered(self.width, self.grid_cols)
    }
}

/// Row-major matrix of flattened patches, one row per grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid<T> {
    layout: PatchLayout,
    patches: Vec<T>,
}

impl<T: Scalar> PatchGrid<T> {
    /// Wraps an existing `n_patches × dim` matrix.
    pub fn from_rows(layout: PatchLayout, patches: Vec<T>) -> Result<Self> {
        if patches.len() != layout.n_patches() * layout.dim() {
            return Err(DivSwapError::Dimension(format!(
                "expected {}x{} patch matrix, got {} values",
                layout.n_patches(),
                layout.dim(),
                patches.len()
            )));
        }
        if patches.iter().any(|v| !v.is_finite()) {
            return Err(DivSwapError::Validation("non-finite patch entry".into()));
        }
        Ok(Self { layout, patches })
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn n_patches(&self) -> usize {
        self.layout.n_patches()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.patches
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let d = self.dim();
        &self.patches[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.patches.chunks_exact(self.dim())
    }

    /// Same layout, rows produced by `f(index, row, out)`.
    pub(crate) fn map_rows(&self, mut f: impl FnMut(usize, &[T], &mut [T])) -> Self {
        let d = self.dim();
        let mut out = vec![T::zero(); self.patches.len()];
        for (i, (src, dst)) in self.rows().zip(out.chunks_exact_mut(d)).enumerate() {
            f(i, src, dst);
        }
        Self {
            layout: self.layout,
            patches: out,
        }
    }
}

/// Per-content-patch winning style index and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T> {
    pub assignments: Vec<usize>,
    pub scores: Vec<T>,
}

impl<T> MatchResult<T> {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// How overlapping patch contributions combine during reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapMode {
    /// Sum, then divide each element by the number of windows covering it.
    #[default]
    Average,
    /// Plain transposed-convolution sum.
    Sum,
}

/// im2col: every `k×k` window at the given stride, channel-major within a row.
pub fn extract_patches<T: Scalar>(
    map: &FeatureMap<T>,
    patch_size: usize,
    stride: usize,
) -> Result<PatchGrid<T>> {
    let layout = PatchLayout::new(map.dims(), patch_size, stride)?;
    let k = patch_size;
    let mut patches = Vec::with_capacity(layout.n_patches() * layout.dim());
    for i in 0..layout.n_patches() {
        let (y0, x0) = layout.origin(i);
        for c in 0..layout.channels {
            let plane = map.channel(c);
            for dy in 0..k {
                let start = (y0 + dy) * layout.width + x0;
                patches.extend_from_slice(&plane[start..start + k]);
            }
        }
    }
    Ok(PatchGrid { layout, patches })
}

/// Euclidean norm of every patch row.
pub fn patch_norms<T: Scalar>(grid: &PatchGrid<T>) -> Vec<T> {
    grid.rows()
        .map(|row| row.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt())
        .collect()
}

/// col2im: place `style` row `assignments[i]` at content grid position `i`.
///
/// Source elements not covered by any window are copied from `fill` (zero
/// when `fill` is `None`).
pub fn reconstruct<T: Scalar>(
    matches: &MatchResult<T>,
    style: &PatchGrid<T>,
    layout: &PatchLayout,
    mode: OverlapMode,
    fill: Option<&FeatureMap<T>>,
) -> Result<FeatureMap<T>> {
    if matches.assignments.len() != layout.n_patches() {
        return Err(DivSwapError::Dimension(format!(
            "{} assignments for a layout of {} patches",
            matches.assignments.len(),
            layout.n_patches()
        )));
    }
    if style.layout.channels != layout.channels || style.layout.patch_size != layout.patch_size {
        return Err(DivSwapError::Dimension(format!(
            "style patches are {}x{}x{}, layout wants {}x{}x{}",
            style.layout.channels,
            style.layout.patch_size,
            style.layout.patch_size,
            layout.channels,
            layout.patch_size,
            layout.patch_size
        )));
    }
    if let Some(bad) = matches.assignments.iter().find(|&&j| j >= style.n_patches()) {
        return Err(DivSwapError::Consistency(format!(
            "assignment {bad} out of range for {} style patches",
            style.n_patches()
        )));
    }
    if let Some(f) = fill {
        if f.dims() != layout.source_dims() {
            return Err(DivSwapError::Dimension(format!(
                "fill map is {:?}, layout source is {:?}",
                f.dims(),
                layout.source_dims()
            )));
        }
    }

    let (channels, height, width) = layout.source_dims();
    let k = layout.patch_size;
    let plane = height * width;
    let mut acc = vec![T::zero(); channels * plane];
    let mut counts = vec![0u32; plane];

    for (i, &j) in matches.assignments.iter().enumerate() {
        let (y0, x0) = layout.origin(i);
        let patch = style.row(j);
        for c in 0..channels {
            for dy in 0..k {
                let dst = c * plane + (y0 + dy) * width + x0;
                let src = (c * k + dy) * k;
                for (a, &v) in acc[dst..dst + k].iter_mut().zip(&patch[src..src + k]) {
                    *a = *a + v;
                }
            }
        }
        for dy in 0..k {
            let dst = (y0 + dy) * width + x0;
            for n in &mut counts[dst..dst + k] {
                *n += 1;
            }
        }
    }

    for c in 0..channels {
        for (p, &n) in counts.iter().enumerate() {
            let slot = &mut acc[c * plane + p];
            if n == 0 {
                *slot = fill.map_or(T::zero(), |f| f.values()[c * plane + p]);
            } else if mode == OverlapMode::Average && n > 1 {
                *slot = *slot / T::from_u32(n).unwrap();
            }
        }
    }
    FeatureMap::new(channels, height, width, acc)
}

/// Formats like C's `%.9g`.
pub(crate) fn format_sig9(v: f64) -> String {
    const SIG: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= SIG {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (SIG - 1 - exp) as usize, v))
    }
}

/// CSV with header `content_index,style_index,score`.
pub fn write_match_csv<T: Scalar>(matches: &MatchResult<T>, mut out: impl Write) -> Result<()> {
    if matches.scores.len() != matches.assignments.len() {
        return Err(DivSwapError::Consistency(
            "scores and assignments differ in length".into(),
        ));
    }
    writeln!(out, "content_index,style_index,score")?;
    for (i, (j, s)) in matches.assignments.iter().zip(&matches.scores).enumerate() {
        writeln!(out, "{i},{j},{}", format_sig9(s.to_f64_lossy()))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, h: usize, w: usize) -> FeatureMap<f64> {
        FeatureMap::from_fn(c, h, w, |ch, y, x| (ch * h * w + y * w + x + 1) as f64).unwrap()
    }

    #[test]
    fn full_window_is_single_patch() {
        let map = ramp(1, 3, 3);
        let grid = extract_patches(&map, 3, 1).unwrap();
        assert_eq!(grid.n_patches(), 1);
        assert_eq!(grid.row(0), map.values());
    }

    #[test]
    fn three_by_three_k2_windows() {
        let grid = extract_patches(&ramp(1, 3, 3), 2, 1).unwrap();
        let rows: Vec<Vec<f64>> = grid.rows().map(<[f64]>::to_vec).collect();
        assert_eq!(
            rows,
            vec![
                vec![1.0, 2.0, 4.0, 5.0],
                vec![2.0, 3.0, 5.0, 6.0],
                vec![4.0, 5.0, 7.0, 8.0],
                vec![5.0, 6.0, 8.0, 9.0],
            ]
        );
    }

    #[test]
    fn stride_two_tiles() {
        let grid = extract_patches(&ramp(1, 4, 4), 2, 2).unwrap();
        assert_eq!(grid.n_patches(), 4);
        assert_eq!(grid.row(3), &[11.0, 12.0, 15.0, 16.0]);
        assert!(grid.layout().covers_fully());
    }

    #[test]
    fn multi_channel_rows_are_channel_major() {
        let grid = extract_patches(&ramp(2, 2, 3), 2, 1).unwrap();
        assert_eq!(grid.dim(), 8);
        assert_eq!(grid.row(1), &[2.0, 3.0, 5.0, 6.0, 8.0, 9.0, 11.0, 12.0]);
    }

    #[test]
    fn rows_reread_source() {
        let map = ramp(3, 7, 9);
        let grid = extract_patches(&map, 3, 2).unwrap();
        let l = grid.layout();
        for i in 0..grid.n_patches() {
            let (y0, x0) = l.origin(i);
            let mut n = 0;
            for c in 0..3 {
                for dy in 0..3 {
                    for dx in 0..3 {
                        assert_eq!(grid.row(i)[n], map.get(c, y0 + dy, x0 + dx));
                        n += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn extraction_errors() {
        let map = ramp(1, 3, 4);
        assert!(matches!(extract_patches(&map, 4, 1), Err(DivSwapError::Dimension(_))));
        assert!(matches!(extract_patches(&map, 2, 0), Err(DivSwapError::Argument(_))));
        assert!(matches!(extract_patches(&map, 0, 1), Err(DivSwapError::Argument(_))));
    }

    #[test]
    fn norms() {
        let layout = PatchLayout::new((1, 1, 2), 1, 1).unwrap();
        let grid = PatchGrid::from_rows(layout, vec![3.0f32, 4.0]).unwrap();
        assert_eq!(patch_norms(&grid), vec![3.0, 4.0]);

        let layout = PatchLayout::new((2, 2, 1), 1, 1).unwrap();
        let grid = PatchGrid::from_rows(layout, vec![3.0f32, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(patch_norms(&grid), vec![5.0, 0.0]);
    }

    #[test]
    fn single_patch_tiles_without_overlap() {
        let style = extract_patches(&ramp(1, 2, 2), 2, 2).unwrap();
        let layout = PatchLayout::new((1, 4, 6), 2, 2).unwrap();
        let m = MatchResult {
            assignments: vec![0; 6],
            scores: vec![0.0; 6],
        };
        let out = reconstruct(&m, &style, &layout, OverlapMode::Average, None).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(out.get(0, y, x), (1 + (y % 2) * 2 + x % 2) as f64);
            }
        }
    }

    #[test]
    fn hand_computed_overlap_average() {
        // Two distinct 2x2 style patches: A = all 1, B = all 5. On a 3x3
        // content grid with k=2, s=1 the four windows get A, B, B, A.
        let style_layout = PatchLayout::new((1, 2, 3), 2, 1).unwrap();
        let style = PatchGrid::from_rows(
            style_layout,
            vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0],
        )
        .unwrap();
        let layout = PatchLayout::new((1, 3, 3), 2, 1).unwrap();
        let m = MatchResult {
            assignments: vec![0, 1, 1, 0],
            scores: vec![0.0; 4],
        };
        let avg = reconstruct(&m, &style, &layout, OverlapMode::Average, None).unwrap();
        // corners: single window; edges: two windows; centre: all four.
        let expected = [
            1.0, 3.0, 5.0, //
            3.0, 3.0, 3.0, //
            5.0, 3.0, 1.0,
        ];
        assert_eq!(avg.values(), &expected);

        let sum = reconstruct(&m, &style, &layout, OverlapMode::Sum, None).unwrap();
        let expected_sum = [
            1.0, 6.0, 5.0, //
            6.0, 12.0, 6.0, //
            5.0, 6.0, 1.0,
        ];
        assert_eq!(sum.values(), &expected_sum);
    }

    #[test]
    fn coverage() {
        assert!(PatchLayout::new((1, 5, 5), 3, 1).unwrap().covers_fully());
        assert!(!PatchLayout::new((1, 5, 9), 1, 2).unwrap().covers_fully());
        assert!(!PatchLayout::new((1, 6, 6), 3, 2).unwrap().covers_fully());
    }

    #[test]
    fn uncovered_border_copies_fill() {
        let content = ramp(1, 5, 5);
        let grid = extract_patches(&content, 2, 2).unwrap();
        assert!(!grid.layout().covers_fully());
        let m = MatchResult {
            assignments: (0..grid.n_patches()).collect(),
            scores: vec![0.0; grid.n_patches()],
        };
        let out = reconstruct(&m, &grid, grid.layout(), OverlapMode::Average, Some(&content)).unwrap();
        assert_eq!(out, content);
        let zeroed = reconstruct(&m, &grid, grid.layout(), OverlapMode::Average, None).unwrap();
        assert_eq!(zeroed.get(0, 4, 4), 0.0);
    }

    #[test]
    fn reconstruct_errors() {
        let grid = extract_patches(&ramp(1, 3, 3), 2, 1).unwrap();
        let bad = MatchResult {
            assignments: vec![0, 1, 2, 4],
            scores: vec![0.0; 4],
        };
        assert!(matches!(
            reconstruct(&bad, &grid, grid.layout(), OverlapMode::Average, None),
            Err(DivSwapError::Consistency(_))
        ));
        let short = MatchResult {
            assignments: vec![0],
            scores: vec![0.0],
        };
        assert!(matches!(
            reconstruct(&short, &grid, grid.layout(), OverlapMode::Average, None),
            Err(DivSwapError::Dimension(_))
        ));
        let other = extract_patches(&ramp(2, 3, 3), 2, 1).unwrap();
        let ok = MatchResult {
            assignments: vec![0; 4],
            scores: vec![0.0; 4],
        };
        assert!(matches!(
            reconstruct(&ok, &other, grid.layout(), OverlapMode::Average, None),
            Err(DivSwapError::Dimension(_))
        ));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.70710678118), "0.707106781");
        assert_eq!(format_sig9(-123456.789012), "-123456.789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
        assert_eq!(format_sig9(2.0e12), "2e+12");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn match_csv() {
        let m = MatchResult {
            assignments: vec![2, 0],
            scores: vec![1.0f64, 0.5],
        };
        let mut buf = Vec::new();
        write_match_csv(&m, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "content_index,style_index,score\n0,2,1\n1,0,0.5\n"
        );
    }
}
