//! Exact Gaussian second-moment machinery.
//!
//! Everything downstream reduces to conditional covariances of jointly
//! Gaussian vectors, so this module owns the validated covariance type, the
//! tolerance-checked symmetric factorization used for every solve, the
//! constant-diagonal Toeplitz determinant shortcut, and mutual-information /
//! differential-entropy evaluation. All information quantities are in nats;
//! conversion to bits is a presentation concern.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on covariance entries.
const SYMMETRY_REL_TOL: f64 = 1e-12;
/// Eigenvalues are allowed to dip this far (relative to the matrix scale)
/// below zero before a matrix is rejected as not positive semidefinite.
const PSD_REL_TOL: f64 = 1e-9;
/// Pivots at or below this fraction of the largest diagonal entry abort a
/// factorization. Exact linear dependence (for example a zero-noise test
/// channel duplicating a measurement) must fail loudly rather than produce
/// garbage conditionals.
const PIVOT_REL_TOL: f64 = 1e-12;

/// ln(2*pi*e), the constant in the differential entropy of a Gaussian.
pub const LN_2PI_E: f64 = 2.837_877_066_409_345_3;

/// A validated covariance matrix: square, symmetric to within
/// [`SYMMETRY_REL_TOL`], and positive semidefinite to within a relative
/// eigenvalue tolerance of `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
}

impl CovMatrix {
    /// Validate and wrap a covariance matrix.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let n = entries.nrows();
        let scale = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                let delta = (entries[(i, j)] - entries[(j, i)]).abs();
                if delta > SYMMETRY_REL_TOL * scale {
                    return Err(Error::NotSymmetric { i, j, delta });
                }
            }
        }
        if scale > 0.0 && !shifted_factorization_succeeds(&entries, scale) {
            return Err(Error::NotPsd { scale });
        }
        Ok(Self { entries })
    }

    /// Build from an entry function, then validate.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Extract the (rows x cols) block selected by two index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.entries[(rows[i], cols[j])]
        })
    }

    /// Smallest and largest eigenvalues, via a full symmetric decomposition.
    /// Intended for invariant checks, not hot paths.
    pub fn min_max_eigenvalues(&self) -> (f64, f64) {
        let eig = self.entries.clone().symmetric_eigenvalues();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in eig.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Cheap PSD screen: a Cholesky pass on `m + 2e-9 * scale * I` must complete
/// with strictly positive pivots. This admits eigenvalues down to about
/// `-1e-9 * scale` without the cost of a full eigendecomposition.
fn shifted_factorization_succeeds(m: &DMatrix<f64>, scale: f64) -> bool {
    let n = m.nrows();
    let shift = 2.0 * PSD_REL_TOL * scale;
    let a = m.as_slice(); // column-major
    let mut l = vec![0.0_f64; n * n]; // column-major lower factor
    for j in 0..n {
        let mut d = a[j * n + j] + shift;
        for k in 0..j {
            let v = l[k * n + j];
            d -= v * v;
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let lj = d.sqrt();
        l[j * n + j] = lj;
        for i in (j + 1)..n {
            let mut v = a[j * n + i];
            for k in 0..j {
                v -= l[k * n + i] * l[k * n + j];
            }
            l[j * n + i] = v / lj;
        }
    }
    true
}

/// Index partition selecting the two sides (and optional conditioning set) of
/// a mutual-information evaluation. The three lists are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub conditioning: Vec<usize>,
}

impl IndexPartition {
    pub fn new(left: Vec<usize>, right: Vec<usize>, conditioning: Vec<usize>) -> Result<Self> {
        if left.is_empty() {
            return Err(Error::EmptyIndexSet { side: "left" });
        }
        if right.is_empty() {
            return Err(Error::EmptyIndexSet { side: "right" });
        }
        let mut seen = std::collections::HashSet::new();
        for &i in left.iter().chain(&right).chain(&conditioning) {
            if !seen.insert(i) {
                return Err(Error::RepeatedIndex { index: i });
            }
        }
        Ok(Self {
            left,
            right,
            conditioning,
        })
    }

    /// Unconditioned partition between two index sets.
    pub fn pair(left: Vec<usize>, right: Vec<usize>) -> Result<Self> {
        Self::new(left, right, Vec::new())
    }

    fn check_bounds(&self, dim: usize) -> Result<()> {
        for &i in self
            .left
            .iter()
            .chain(&self.right)
            .chain(&self.conditioning)
        {
            if i >= dim {
                return Err(Error::IndexOutOfBounds { index: i, dim });
            }
        }
        Ok(())
    }
}

struct Factor {
    /// Column-major lower factor: entry (i, j) at `j * n + i` for `i >= j`.
    l: Vec<f64>,
    n: usize,
    log_det: f64,
}

impl Factor {
    /// Solve `M x = rhs` given `M = L L^T`.
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut x = rhs.clone();
        for c in 0..x.ncols() {
            // forward: L y = rhs
            for i in 0..n {
                let mut v = x[(i, c)];
                for k in 0..i {
                    v -= self.l[k * n + i] * x[(k, c)];
                }
                x[(i, c)] = v / self.l[i * n + i];
            }
            // backward: L^T x = y
            for i in (0..n).rev() {
                let mut v = x[(i, c)];
                for k in (i + 1)..n {
                    v -= self.l[i * n + k] * x[(k, c)];
                }
                x[(i, c)] = v / self.l[i * n + i];
            }
        }
        x
    }
}

/// Symmetric factorization with the relative pivot tolerance. `labels` maps
/// local rows back to caller-side indices so singularity errors identify the
/// offending variable.
fn factor_spd(m: &DMatrix<f64>, labels: &[usize]) -> Result<Factor> {
    let n = m.nrows();
    let a = m.as_slice(); // column-major
    let mut scale = f64::MIN_POSITIVE;
    for j in 0..n {
        scale = scale.max(a[j * n + j].abs());
    }
    let mut l = vec![0.0_f64; n * n];
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let v = l[k * n + j];
            d -= v * v;
        }
        if !(d > PIVOT_REL_TOL * scale) {
            return Err(Error::SingularBlock {
                index: labels.get(j).copied().unwrap_or(j),
                ratio: d / scale,
            });
        }
        let lj = d.sqrt();
        l[j * n + j] = lj;
        log_det += d.ln();
        for i in (j + 1)..n {
            let mut v = a[j * n + i];
            for k in 0..j {
                v -= l[k * n + i] * l[k * n + j];
            }
            l[j * n + i] = v / lj;
        }
    }
    Ok(Factor { l, n, log_det })
}

fn validate_indices(indices: &[usize], dim: usize, side: &'static str) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::EmptyIndexSet { side });
    }
    validate_indices_allow_empty(indices, dim)
}

fn validate_indices_allow_empty(indices: &[usize], dim: usize) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for &i in indices {
        if i >= dim {
            return Err(Error::IndexOutOfBounds { index: i, dim });
        }
        if !seen.insert(i) {
            return Err(Error::RepeatedIndex { index: i });
        }
    }
    Ok(())
}

/// Conditional covariance `E[var(A | B)] = K_AA - K_AB K_BB^{-1} K_AB^T`.
///
/// An empty `given` set returns the targets block unchanged. The targets and
/// given lists may overlap (conditioning a variable on itself yields zero
/// residual variance). A numerically singular given block is an error naming
/// the offending index.
pub fn conditional_covariance(
    joint: &CovMatrix,
    targets: &[usize],
    given: &[usize],
) -> Result<CovMatrix> {
    validate_indices(targets, joint.dim(), "targets")?;
    validate_indices_allow_empty(given, joint.dim())?;
    let mut c = conditional_block(joint, targets, given)?;
    // Symmetrize away factorization round-off before revalidating.
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    CovMatrix::new(c)
}

/// Unvalidated core of [`conditional_covariance`]; callers own index checks.
fn conditional_block(
    joint: &CovMatrix,
    targets: &[usize],
    given: &[usize],
) -> Result<DMatrix<f64>> {
    let tt = joint.submatrix(targets, targets);
    if given.is_empty() {
        return Ok(tt);
    }
    let gg = joint.submatrix(given, given);
    let tg = joint.submatrix(targets, given);
    let factor = factor_spd(&gg, given)?;
    let x = factor.solve(&tg.transpose());
    Ok(&tt - &tg * &x)
}

/// Determinant of the k x k symmetric Toeplitz matrix with diagonal `a` and
/// off-diagonal `b`: `(a + (k-1) b) (a - b)^(k-1)`.
///
/// Closed form, O(1), exact for any `k`; large-agent sweeps rely on never
/// materializing the matrix.
pub fn toeplitz_det(a: f64, b: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0; // empty-matrix convention
    }
    (a + (k - 1) as f64 * b) * (a - b).powi((k - 1) as i32)
}

/// The recurring affine combination `alpha + (k-2) beta - (k-1) c`.
pub fn f1(alpha: f64, beta: f64, k: f64, c: f64) -> f64 {
    alpha + (k - 2.0) * beta - (k - 1.0) * c
}

/// Mutual information `I(A; B | C)` in nats, from the standard Gaussian
/// identity `I = 0.5 log( |S_A|C| |S_B|C| / |S_AB|C| )`.
///
/// Errors if any conditioned block is numerically singular, which signals a
/// deterministic dependence; callers must add test-channel noise first.
pub fn gaussian_mi(joint: &CovMatrix, part: &IndexPartition) -> Result<f64> {
    part.check_bounds(joint.dim())?;
    let ab: Vec<usize> = part.left.iter().chain(&part.right).copied().collect();
    let cond = conditional_block(joint, &ab, &part.conditioning)?;
    let na = part.left.len();
    let nb = part.right.len();
    let a_block = cond.view((0, 0), (na, na)).into_owned();
    let b_block = cond.view((na, na), (nb, nb)).into_owned();
    let ld_a = factor_spd(&a_block, &part.left)?.log_det;
    let ld_b = factor_spd(&b_block, &part.right)?.log_det;
    let ld_ab = factor_spd(&cond, &ab)?.log_det;
    // Nonnegative up to round-off; clip the dust.
    Ok((0.5 * (ld_a + ld_b - ld_ab)).max(0.0))
}

/// Differential entropy `h(targets | given) = 0.5 log((2 pi e)^m |S_t|g|)` in
/// nats, with `m = |targets|`.
pub fn gaussian_cond_entropy(joint: &CovMatrix, targets: &[usize], given: &[usize]) -> Result<f64> {
    validate_indices(targets, joint.dim(), "targets")?;
    validate_indices_allow_empty(given, joint.dim())?;
    let cond = conditional_block(joint, targets, given)?;
    let ld = factor_spd(&cond, targets)?.log_det;
    Ok(0.5 * (targets.len() as f64 * LN_2PI_E + ld))
}
