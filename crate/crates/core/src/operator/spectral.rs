use num_complex::Complex64;

use super::{check_skew_hermitian, hermitian_eigen, identity, skew_tol_for, CMatrix, I};
use crate::error::{Error, Result};

/// Default fraction of a block's multiplicity that its best overlap must
/// reach for label matching to succeed.
pub const DEFAULT_MIN_OVERLAP: f64 = 0.5;

/// Spectral decomposition `A = Σ_k b_k P_k` of a skew-Hermitian matrix with
/// near-degenerate eigenvalues grouped into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Purely imaginary eigenvalues `b_k`, one per block.
    pub eigenvalues: Vec<Complex64>,
    /// Orthogonal eigenprojectors `P_k`.
    pub projectors: Vec<CMatrix>,
    pub multiplicities: Vec<usize>,
}

/// Worst-case violations of the decomposition invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpectralDefects {
    pub hermiticity: f64,
    pub idempotency: f64,
    pub orthogonality: f64,
    pub completeness: f64,
    pub rank: f64,
}

impl SpectralDefects {
    pub fn max(&self) -> f64 {
        [
            self.hermiticity,
            self.idempotency,
            self.orthogonality,
            self.completeness,
            self.rank,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, |p| p.nrows())
    }

    pub fn n_blocks(&self) -> usize {
        self.projectors.len()
    }

    /// `Σ_k b_k P_k`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(n, n), |acc, (b, p)| acc + p * *b)
    }

    /// Smallest distance between distinct block eigenvalues (infinite for a
    /// single block).
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (k, bk) in self.eigenvalues.iter().enumerate() {
            for bl in &self.eigenvalues[k + 1..] {
                gap = gap.min((bk - bl).norm());
            }
        }
        gap
    }

    pub fn defects(&self) -> SpectralDefects {
        let n = self.dim();
        let mut d = SpectralDefects::default();
        let mut sum = CMatrix::zeros(n, n);
        for (k, p) in self.projectors.iter().enumerate() {
            d.hermiticity = d.hermiticity.max((p.adjoint() - p).norm());
            d.idempotency = d.idempotency.max((p * p - p).norm());
            for q in &self.projectors[k + 1..] {
                d.orthogonality = d.orthogonality.max((p * q).norm());
            }
            d.rank = d
                .rank
                .max((p.trace().re - self.multiplicities[k] as f64).abs());
            sum += p;
        }
        d.completeness = (sum - identity(n)).norm();
        d
    }

    /// Returns the decomposition with blocks reordered so that block `k` of
    /// the result is block `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            eigenvalues: perm.iter().map(|&i| self.eigenvalues[i]).collect(),
            projectors: perm.iter().map(|&i| self.projectors[i].clone()).collect(),
            multiplicities: perm.iter().map(|&i| self.multiplicities[i]).collect(),
        }
    }

    /// Overlap matrix `O[k][l] = Re tr(P_k Q_l)`.
    pub fn overlaps(&self, other: &Self) -> Vec<Vec<f64>> {
        self.projectors
            .iter()
            .map(|p| {
                other
                    .projectors
                    .iter()
                    .map(|q| trace_product(p, q))
                    .collect()
            })
            .collect()
    }
}

/// `Re tr(A B)` without forming the product.
fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// `1e-8 · ‖A‖_F`, the default eigenvalue grouping threshold.
pub fn default_gap_tol(a: &CMatrix) -> f64 {
    1e-8 * a.norm().max(f64::MIN_POSITIVE)
}

/// Spectral decomposition of a skew-Hermitian matrix. Eigenvalues closer than
/// `gap_tol` are merged into one block. Blocks are ordered by decreasing
/// imaginary part of the eigenvalue.
pub fn decompose(a: &CMatrix, gap_tol: f64) -> Result<SpectralDecomposition> {
    check_skew_hermitian(a, skew_tol_for(a))?;
    if gap_tol < 0.0 || !gap_tol.is_finite() {
        return Err(Error::OutOfRange {
            name: "gap_tol",
            value: gap_tol,
            expected: "finite and >= 0",
        });
    }
    let n = a.nrows();
    // iA is Hermitian with eigenvalues λ; A has eigenvalues -iλ.
    let (values, vectors) = hermitian_eigen(&a.map(|z| I * z));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, &lambda) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if lambda - values[*g.last().unwrap()] < gap_tol => g.push(j),
            _ => groups.push(vec![j]),
        }
    }

    let mut out = SpectralDecomposition {
        eigenvalues: Vec::with_capacity(groups.len()),
        projectors: Vec::with_capacity(groups.len()),
        multiplicities: Vec::with_capacity(groups.len()),
    };
    for g in groups {
        let mean = g.iter().map(|&j| values[j]).sum::<f64>() / g.len() as f64;
        let mut p = CMatrix::zeros(n, n);
        for &j in &g {
            let v = vectors.column(j);
            p += &v * v.adjoint();
        }
        out.eigenvalues.push(Complex64::new(0.0, -mean));
        out.projectors.push(p);
        out.multiplicities.push(g.len());
    }
    Ok(out)
}

/// Reorders the blocks of `next` to follow the labels of `prev`, using the
/// default overlap threshold. Returns the relabelled decomposition and the
/// permutation applied (`result[k] = next[perm[k]]`).
pub fn match_labels(
    prev: &SpectralDecomposition,
    next: &SpectralDecomposition,
) -> Result<(SpectralDecomposition, Vec<usize>)> {
    match_labels_with(prev, next, DEFAULT_MIN_OVERLAP)
}

/// Greedy maximal-overlap assignment. For the small block counts targeted
/// here greedy coincides with the optimal assignment; it is not guaranteed
/// to for many-block systems.
pub fn match_labels_with(
    prev: &SpectralDecomposition,
    next: &SpectralDecomposition,
    min_overlap_fraction: f64,
) -> Result<(SpectralDecomposition, Vec<usize>)> {
    if prev.dim() != next.dim() {
        return Err(Error::DimensionMismatch {
            expected: prev.dim(),
            found: next.dim(),
        });
    }
    let m = prev.n_blocks();
    if next.n_blocks() != m {
        return Err(Error::CrossingDetected {
            t: f64::NAN,
            block: 0,
            overlap: 0.0,
            multiplicity: prev.multiplicities.first().copied().unwrap_or(0),
        });
    }
    let overlaps = prev.overlaps(next);
    let mut perm = vec![usize::MAX; m];
    let mut used = vec![false; m];
    for _ in 0..m {
        let mut best: Option<(usize, usize, f64)> = None;
        for (k, row) in overlaps.iter().enumerate() {
            if perm[k] != usize::MAX {
                continue;
            }
            for (l, &o) in row.iter().enumerate() {
                if used[l] || next.multiplicities[l] != prev.multiplicities[k] {
                    continue;
                }
                if best.map_or(true, |(_, _, b)| o > b) {
                    best = Some((k, l, o));
                }
            }
        }
        let Some((k, l, _)) = best else {
            let k = (0..m).find(|&k| perm[k] == usize::MAX).unwrap_or(0);
            return Err(Error::CrossingDetected {
                t: f64::NAN,
                block: k,
                overlap: 0.0,
                multiplicity: prev.multiplicities[k],
            });
        };
        perm[k] = l;
        used[l] = true;
    }
    for (k, &l) in perm.iter().enumerate() {
        let o = overlaps[k][l];
        if o < min_overlap_fraction * prev.multiplicities[k] as f64 {
            return Err(Error::CrossingDetected {
                t: f64::NAN,
                block: k,
                overlap: o,
                multiplicity: prev.multiplicities[k],
            });
        }
    }
    Ok((next.permuted(&perm), perm))
}

/// Eigen-data sampled on a time grid with labels tracked continuously.
#[derive(Debug, Clone)]
pub struct SpectralPath {
    pub grid: Vec<f64>,
    pub decompositions: Vec<SpectralDecomposition>,
}

impl SpectralPath {
    /// Decomposes `drift(t)` on every grid point and matches each sample
    /// against its predecessor. `gap_tol_rel` scales with `‖drift(t)‖_F`.
    pub fn track<F>(
        drift: F,
        grid: &[f64],
        gap_tol_rel: f64,
        min_overlap_fraction: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> CMatrix,
    {
        check_grid(grid)?;
        let mut decompositions: Vec<SpectralDecomposition> = Vec::with_capacity(grid.len());
        for &t in grid {
            let a = drift(t);
            let d = decompose(&a, gap_tol_rel * a.norm())?;
            let d = match decompositions.last() {
                None => d,
                Some(prev) => {
                    match_labels_with(prev, &d, min_overlap_fraction)
                        .map_err(|e| e.at_time(t))?
                        .0
                }
            };
            decompositions.push(d);
        }
        Ok(Self {
            grid: grid.to_vec(),
            decompositions,
        })
    }

    /// Minimum over adjacent samples and blocks of
    /// `tr(P_k(t_i) P_k(t_{i+1})) − multiplicity_k`.
    pub fn label_consistency(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.decompositions.windows(2) {
            for (k, (p, q)) in w[0].projectors.iter().zip(&w[1].projectors).enumerate() {
                let o = trace_product(p, q) - w[0].multiplicities[k] as f64;
                worst = worst.min(o);
            }
        }
        worst
    }

    pub fn min_gap(&self) -> f64 {
        self.decompositions
            .iter()
            .map(SpectralDecomposition::min_gap)
            .fold(f64::INFINITY, f64::min)
    }

    /// Sample whose grid time is closest to `t`.
    pub fn nearest(&self, t: f64) -> &SpectralDecomposition {
        let idx = self.grid.partition_point(|&g| g < t);
        let idx = if idx == 0 {
            0
        } else if idx >= self.grid.len() {
            self.grid.len() - 1
        } else if (t - self.grid[idx - 1]) <= (self.grid[idx] - t) {
            idx - 1
        } else {
            idx
        };
        &self.decompositions[idx]
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("non-finite time in grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, max_abs_diff, pauli_x, pauli_z};

    fn lz_drift(t: f64) -> CMatrix {
        (pauli_x() + pauli_z().scale(t)).map(|z| z * c(0., -1.))
    }

    #[test]
    fn diagonal_input() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(0., -1.)]);
        let d = decompose(&a, 1e-8).unwrap();
        assert_eq!(d.n_blocks(), 2);
        assert_eq!(d.eigenvalues[0], c(0., 0.));
        assert!((d.eigenvalues[1] - c(0., -1.)).norm() < 1e-15);
        assert!((d.projectors[0][(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((d.projectors[1][(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn landau_zener_at_origin() {
        let d = decompose(&lz_drift(0.0), 1e-8).unwrap();
        // b_+ = +i with P_+ = (1 - X)/2, then b_- = -i with P_- = (1 + X)/2.
        assert!((d.eigenvalues[0] - c(0., 1.)).norm() < 1e-14);
        assert!((d.eigenvalues[1] - c(0., -1.)).norm() < 1e-14);
        let half = |s: f64| (identity(2) + pauli_x().scale(s)).scale(0.5);
        assert!(max_abs_diff(&d.projectors[0], &half(-1.0)) < 1e-14);
        assert!(max_abs_diff(&d.projectors[1], &half(1.0)) < 1e-14);
    }

    #[test]
    fn degenerate_eigenvalues_grouped() {
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0., -1.),
            c(0., 0.),
            c(0., 1e-12),
        ]));
        let d = decompose(&a, 1e-8).unwrap();
        assert_eq!(d.multiplicities, vec![2, 1]);
        assert!(d.defects().max() < 1e-14);
    }

    #[test]
    fn match_identical_is_identity() {
        let d = decompose(&lz_drift(0.3), 1e-8).unwrap();
        let (_, perm) = match_labels(&d, &d).unwrap();
        assert_eq!(perm, vec![0, 1]);
    }

    #[test]
    fn match_recovers_swap() {
        let d = decompose(&lz_drift(0.3), 1e-8).unwrap();
        let swapped = d.permuted(&[1, 0]);
        let (relabelled, perm) = match_labels(&d, &swapped).unwrap();
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(relabelled, d);
    }

    #[test]
    fn orthogonal_subspaces_flag_crossing() {
        let a = decompose(&lz_drift(-1e6), 1e-8).unwrap();
        // A completely rotated family cannot be matched.
        let b = SpectralDecomposition {
            eigenvalues: a.eigenvalues.clone(),
            projectors: vec![
                (identity(2) + pauli_x()).scale(0.5),
                (identity(2) - pauli_x()).scale(0.5),
            ],
            multiplicities: vec![1, 1],
        };
        let err = match_labels_with(&a, &b, 0.6).unwrap_err();
        assert!(matches!(err, Error::CrossingDetected { .. }));
    }

    #[test]
    fn tracked_path_consistent() {
        let grid: Vec<f64> = (0..=200).map(|i| -5.0 + 0.05 * i as f64).collect();
        let path = SpectralPath::track(lz_drift, &grid, 1e-8, 0.5).unwrap();
        assert!(path.label_consistency() > -0.5);
        assert!(path.min_gap() >= 2.0 - 1e-12);
        // labels follow the continuous branch, not a sort order
        let d = path.nearest(4.0);
        let t = 4.0;
        let s = (1.0f64 + t * t).sqrt();
        let p_plus = (identity(2) - (pauli_x() + pauli_z().scale(t)).scale(1.0 / s)).scale(0.5);
        assert!(max_abs_diff(&d.projectors[0], &p_plus) < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[0.0, 0.0]).is_err());
        assert!(check_grid(&[0.0, 1.0]).is_ok());
    }
}
