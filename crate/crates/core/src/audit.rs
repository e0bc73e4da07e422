use serde::Serialize;

use crate::error::{DivSwapError, Result};
use crate::patch::{patch_norms, MatchResult, PatchGrid};
use crate::scalar::Scalar;
use crate::sigma::SigmaVector;

/// Relative slack for the flip inequalities, scaled by the magnitude of
/// the terms being compared.
pub const FLIP_SLACK: f64 = 1e-6;

/// Assignments that moved away from the plain-NCC match, and whether they
/// moved the way the norm-shift algebra says they must.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FlipAuditReport {
    /// Content patches whose shifted match differs from the baseline match.
    pub n_flipped: usize,
    /// Flips whose baseline cosine is strictly higher for the old patch;
    /// only these are tested against the inequalities.
    pub n_checked: usize,
    pub inequality_violations: usize,
    /// Flips that landed on a style patch with a larger norm.
    pub n_higher_norm: usize,
    pub higher_norm_fraction: f64,
}

impl FlipAuditReport {
    /// Pools counts from independent audits.
    pub fn merge(&self, other: &Self) -> Self {
        let n_flipped = self.n_flipped + other.n_flipped;
        let n_higher_norm = self.n_higher_norm + other.n_higher_norm;
        Self {
            n_flipped,
            n_checked: self.n_checked + other.n_checked,
            inequality_violations: self.inequality_violations + other.inequality_violations,
            n_higher_norm,
            higher_norm_fraction: fraction(n_higher_norm, n_flipped),
        }
    }
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.to_f64_lossy() * y.to_f64_lossy())
        .sum()
}

/// Checks every flipped assignment (old match `a`, new match `b`) against
///
/// * `⟨c,s_b⟩·σ_a − ⟨c,s_a⟩·σ_b > ⟨c,s_a⟩·‖s_b‖ − ⟨c,s_b⟩·‖s_a‖`, and
/// * `⟨c,s_b⟩·σ_a > ⟨c,s_a⟩·σ_b`,
///
/// which must both hold when `cos(c,s_a) > cos(c,s_b)` and the shifted score
/// of `b` beats that of `a`. `style` holds the original (unnormalized) rows.
/// Arithmetic is done in `f64`.
pub fn flip_audit<T: Scalar>(
    content: &PatchGrid<T>,
    style: &PatchGrid<T>,
    baseline: &MatchResult<T>,
    shifted: &MatchResult<T>,
    sigmas: &SigmaVector<T>,
) -> Result<FlipAuditReport> {
    let n_c = content.n_patches();
    let n_s = style.n_patches();
    if content.dim() != style.dim() {
        return Err(DivSwapError::Consistency(format!(
            "content dim {} != style dim {}",
            content.dim(),
            style.dim()
        )));
    }
    if baseline.len() != n_c || shifted.len() != n_c {
        return Err(DivSwapError::Consistency(format!(
            "match lengths {} / {} do not cover {n_c} content patches",
            baseline.len(),
            shifted.len()
        )));
    }
    if sigmas.len() != n_s {
        return Err(DivSwapError::Consistency(format!(
            "{} sigmas for {n_s} style patches",
            sigmas.len()
        )));
    }
    if baseline
        .assignments
        .iter()
        .chain(&shifted.assignments)
        .any(|&j| j >= n_s)
    {
        return Err(DivSwapError::Consistency(
            "assignment out of style range".into(),
        ));
    }

    let norms: Vec<f64> = patch_norms(style).iter().map(|v| v.to_f64_lossy()).collect();
    let mut report = FlipAuditReport::default();

    for (i, (&a, &b)) in baseline
        .assignments
        .iter()
        .zip(&shifted.assignments)
        .enumerate()
    {
        if a == b {
            continue;
        }
        report.n_flipped += 1;
        let (na, nb) = (norms[a], norms[b]);
        if nb > na {
            report.n_higher_norm += 1;
        }

        let c = content.row(i);
        let ca = dot(c, style.row(a));
        let cb = dot(c, style.row(b));
        // ‖c‖ is common to both cosines and cancels in the comparison.
        let cos = |inner: f64, norm: f64| if norm > 0.0 { inner / norm } else { 0.0 };
        if cos(ca, na) <= cos(cb, nb) {
            continue;
        }
        report.n_checked += 1;

        let (sa, sb) = (
            sigmas.values[a].to_f64_lossy(),
            sigmas.values[b].to_f64_lossy(),
        );
        let lhs = cb * sa - ca * sb;
        let rhs = ca * nb - cb * na;
        let scale = (cb * sa).abs() + (ca * sb).abs() + (ca * nb).abs() + (cb * na).abs();
        let slack = FLIP_SLACK * scale;
        let rearranged_ok = lhs > rhs - slack;
        let reduced_ok = cb * sa > ca * sb - slack;
        if !(rearranged_ok && reduced_ok) {
            report.inequality_violations += 1;
        }
    }
    report.higher_norm_fraction = fraction(report.n_higher_norm, report.n_flipped);
    Ok(report)
}
