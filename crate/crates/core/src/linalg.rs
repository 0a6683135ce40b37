//! Dense SVD helpers for numerical rank estimation.

use nalgebra::DMatrix;

/// Singular values (descending) of the matrix whose rows are `rows`, each of
/// length `cols`.
pub fn singular_values(rows: &[Vec<f64>], cols: usize) -> Vec<f64> {
    if rows.is_empty() || cols == 0 {
        return Vec::new();
    }
    let mat = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `#{σ_i > rel_tol · σ_1}`.
pub fn numerical_rank(sv: &[f64], rel_tol: f64) -> usize {
    match sv.first() {
        Some(&s1) if s1 > 0.0 => sv.iter().filter(|&&s| s > rel_tol * s1).count(),
        _ => 0,
    }
}

/// `σ_rank / σ_{rank+1}`; `+∞` when there is no next singular value or it is
/// exactly zero.
pub fn gap_ratio(sv: &[f64], rank: usize) -> f64 {
    if rank == 0 || rank >= sv.len() || sv[rank] == 0.0 {
        return f64::INFINITY;
    }
    sv[rank - 1] / sv[rank]
}
