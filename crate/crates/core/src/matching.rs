//! Blocked dense correlation with a streaming per-row argmax.
//!
//! Style rows are packed into column panels of `NR` patches (`dim × NR`,
//! zero padded). Each rayon task owns `MC` content rows; for every panel it
//! accumulates an `MC × NR` score tile in `KC`-long slices of the inner
//! dimension, then folds the tile into the running argmax. Every score is
//! summed in plain index order starting from zero, so the result does not
//! depend on blocking or thread count.

use rayon::prelude::*;

use crate::error::{DivSwapError, Result};
use crate::patch::{MatchResult, PatchGrid};
use crate::scalar::Scalar;

const MR: usize = 4;
const NR: usize = 32;
const KC: usize = 256;
const MC: usize = 64;

/// `assignments[i] = argmax_j ⟨content_i, style_j⟩`, ties to the smallest `j`.
///
/// The style rows are expected to be normalized already (plain or shifted).
pub fn ncc_match<T: Scalar>(
    content: &PatchGrid<T>,
    style_normalized: &PatchGrid<T>,
) -> Result<MatchResult<T>> {
    let dim = content.dim();
    if dim != style_normalized.dim() {
        return Err(DivSwapError::Dimension(format!(
            "content patch dim {dim} != style patch dim {}",
            style_normalized.dim()
        )));
    }
    let n_c = content.n_patches();
    let n_s = style_normalized.n_patches();
    if n_c == 0 || n_s == 0 || dim == 0 {
        return Err(DivSwapError::Argument("empty patch grid".into()));
    }

    let panels = pack_panels(style_normalized.as_slice(), n_s, dim);
    let mut assignments = vec![0usize; n_c];
    let mut scores = vec![T::zero(); n_c];

    assignments
        .par_chunks_mut(MC)
        .zip(scores.par_chunks_mut(MC))
        .zip(content.as_slice().par_chunks(MC * dim))
        .for_each(|((best_idx, best_score), rows)| {
            match_block(rows, dim, &panels, n_s, best_idx, best_score);
        });

    Ok(MatchResult {
        assignments,
        scores,
    })
}

/// Panel `p` holds style rows `p·NR..p·NR+NR` transposed: `panel[k·NR + j]`.
fn pack_panels<T: Scalar>(style: &[T], n_s: usize, dim: usize) -> Vec<T> {
    let n_panels = n_s.div_ceil(NR);
    let mut packed = vec![T::zero(); n_panels * dim * NR];
    for (p, panel) in packed.chunks_exact_mut(dim * NR).enumerate() {
        for jj in 0..NR.min(n_s - p * NR) {
            let row = &style[(p * NR + jj) * dim..(p * NR + jj + 1) * dim];
            for (k, &v) in row.iter().enumerate() {
                panel[k * NR + jj] = v;
            }
        }
    }
    packed
}

fn match_block<T: Scalar>(
    rows: &[T],
    dim: usize,
    panels: &[T],
    n_s: usize,
    best_idx: &mut [usize],
    best_score: &mut [T],
) {
    let n_rows = best_idx.len();
    best_score.fill(T::neg_infinity());
    let mut tile = vec![[T::zero(); NR]; n_rows];

    for (p, panel) in panels.chunks_exact(dim * NR).enumerate() {
        for acc in tile.iter_mut() {
            *acc = [T::zero(); NR];
        }
        for k0 in (0..dim).step_by(KC) {
            let k1 = (k0 + KC).min(dim);
            let panel_slice = &panel[k0 * NR..k1 * NR];
            let mut r = 0;
            while r + MR <= n_rows {
                let a: [&[T]; MR] =
                    std::array::from_fn(|m| &rows[(r + m) * dim + k0..(r + m) * dim + k1]);
                let acc: &mut [[T; NR]; MR] = (&mut tile[r..r + MR]).try_into().unwrap();
                microkernel(a, panel_slice, acc);
                r += MR;
            }
            while r < n_rows {
                let a = [&rows[r * dim + k0..r * dim + k1]];
                let acc: &mut [[T; NR]; 1] = (&mut tile[r..r + 1]).try_into().unwrap();
                microkernel(a, panel_slice, acc);
                r += 1;
            }
        }

        let live = NR.min(n_s - p * NR);
        for (r, acc) in tile.iter().enumerate() {
            for (jj, &s) in acc[..live].iter().enumerate() {
                if s > best_score[r] {
                    best_score[r] = s;
                    best_idx[r] = p * NR + jj;
                }
            }
        }
    }
}

#[inline(always)]
fn microkernel<T: Scalar, const R: usize>(a: [&[T]; R], panel: &[T], acc: &mut [[T; NR]; R]) {
    let mut local = *acc;
    for (k, b) in panel.chunks_exact(NR).enumerate() {
        let b: &[T; NR] = b.try_into().unwrap();
        for m in 0..R {
            let av = a[m][k];
            for jj in 0..NR {
                local[m][jj] = local[m][jj] + av * b[jj];
            }
        }
    }
    *acc = local;
}
