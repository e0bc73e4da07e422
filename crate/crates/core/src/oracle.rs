use crate::error::{DivSwapError, Result};
use crate::patch::{MatchResult, PatchGrid};
use crate::scalar::Scalar;

/// Reference triple loop for [`crate::ncc_match`]; same contract, no shared code.
pub fn ncc_match_oracle<T: Scalar>(
    content: &PatchGrid<T>,
    style_normalized: &PatchGrid<T>,
) -> Result<MatchResult<T>> {
    let d = content.dim();
    if d != style_normalized.dim() {
        return Err(DivSwapError::Dimension(format!(
            "content patch dim {d} != style patch dim {}",
            style_normalized.dim()
        )));
    }
    let (n_c, n_s) = (content.n_patches(), style_normalized.n_patches());
    if n_c == 0 || n_s == 0 || d == 0 {
        return Err(DivSwapError::Argument("empty patch grid".into()));
    }
    let c = content.as_slice();
    let s = style_normalized.as_slice();

    let mut assignments = Vec::with_capacity(n_c);
    let mut scores = Vec::with_capacity(n_c);
    for i in 0..n_c {
        let mut best_j = 0;
        let mut best = T::neg_infinity();
        for j in 0..n_s {
            let mut dot = T::zero();
            for k in 0..d {
                dot = dot + c[i * d + k] * s[j * d + k];
            }
            if dot > best {
                best = dot;
                best_j = j;
            }
        }
        assignments.push(best_j);
        scores.push(best);
    }
    Ok(MatchResult {
        assignments,
        scores,
    })
}
