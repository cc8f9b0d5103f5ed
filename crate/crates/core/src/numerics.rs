//! Dense complex linear algebra kernel.
//!
//! Everything here works on explicit `DMatrix<Complex64>` arrays. Dimensions are
//! small (a few thousand at most), so exactness is preferred over speed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::StateVector;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Tolerance applied when validating values at construction.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Tolerance used by audits and assertions.
pub const ASSERT_TOL: f64 = 1e-9;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Returns an error if any entry is NaN or infinite.
pub fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("matrix has non-finite entries".into()))
    }
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn symmetrize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Square complex matrix that is Hermitian up to [`CONSTRUCTION_TOL`].
///
/// The stored matrix is always the exact Hermitian part `(A + A†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

/// Full spectral decomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        check_finite(&m)?;
        let dev = hermitian_deviation(&m);
        if dev > CONSTRUCTION_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Takes the Hermitian part of `m` without checking how far off it was.
    ///
    /// Only for matrices that are Hermitian by construction (sums of
    /// projectors, partial traces of Hermitian operators, ...).
    pub fn from_hermitian_part(m: ComplexMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        Self(symmetrize(&m))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x)));
        Self(ComplexMatrix::from_diagonal(&v))
    }

    pub fn identity(dim: usize) -> Self {
        Self(identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    /// Full eigendecomposition. Real matrices go through the real symmetric
    /// solver, which is both faster and slightly more accurate.
    pub fn eigh(&self) -> Spectrum {
        let n = self.dim();
        let (values, vectors) = if self.is_real() {
            let real = DMatrix::from_fn(n, n, |i, j| self.0[(i, j)].re);
            let eig = real.symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors.map(c))
        } else {
            let eig = self.0.clone().symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted_values = order.iter().map(|&i| values[i]).collect();
        let sorted_vectors = ComplexMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
        Spectrum { values: sorted_values, vectors: sorted_vectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().values
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty matrix")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `‖m‖₁ = Σ|λᵢ|`.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.abs()).sum()
    }

    /// Applies `f` to the spectrum: `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let spec = self.eigh();
        let n = self.dim();
        let mut scaled = spec.vectors.clone();
        for (j, &l) in spec.values.iter().enumerate() {
            let fl = f(l);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        HermitianMatrix::from_hermitian_part(&scaled * spec.vectors.adjoint())
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix(self.0.scale(s))
    }

    /// `Tr[self · other]`, real for Hermitian arguments.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        trace_of_product(&self.0, &other.0).re
    }
}

/// `Tr[a b]` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    a.kronecker(b)
}

/// Traces out every subsystem not listed in `keep`.
///
/// Subsystem `0` is the most significant factor of the row index. Kept
/// subsystems appear in the result in ascending order regardless of how
/// `keep` is ordered.
pub fn partial_trace_matrix(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidParameter("subsystem dimensions must be positive".into()));
    }
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch { expected: total, got: m.nrows() });
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidParameter(format!("subsystem {bad} out of range")));
    }
    let kept: Vec<bool> = (0..dims.len()).map(|i| keep.contains(&i)).collect();
    let kept_dim: usize = dims.iter().zip(&kept).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let traced_dim = total / kept_dim;

    // full_index[k * traced_dim + t] is the row of m for kept index k and traced index t.
    let mut full_index = vec![0usize; total];
    let mut digits = vec![0usize; dims.len()];
    for full in 0..total {
        let mut rest = full;
        for s in (0..dims.len()).rev() {
            digits[s] = rest % dims[s];
            rest /= dims[s];
        }
        let (mut k, mut t) = (0usize, 0usize);
        for s in 0..dims.len() {
            if kept[s] {
                k = k * dims[s] + digits[s];
            } else {
                t = t * dims[s] + digits[s];
            }
        }
        full_index[k * traced_dim + t] = full;
    }

    Ok(ComplexMatrix::from_fn(kept_dim, kept_dim, |i, j| {
        (0..traced_dim).map(|t| m[(full_index[i * traced_dim + t], full_index[j * traced_dim + t])]).sum()
    }))
}

pub fn partial_trace(m: &HermitianMatrix, dims: &[usize], keep: &[usize]) -> Result<HermitianMatrix> {
    partial_trace_matrix(m.matrix(), dims, keep).map(HermitianMatrix::from_hermitian_part)
}

/// Largest eigenvalue and a unit eigenvector for it.
///
/// The eigenvector's global phase is fixed so that its largest-modulus
/// component is real and positive.
pub fn eig_max(m: &HermitianMatrix) -> (f64, StateVector) {
    let spec = m.eigh();
    let last = m.dim() - 1;
    let mut v = spec.vectors.column(last).into_owned();
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ONE);
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        v *= phase;
    }
    let v = v.unscale(v.norm());
    (spec.values[last], StateVector::from_normalized(v))
}

/// Schatten p-norm; `p = f64::INFINITY` gives the operator norm.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("Schatten p must be >= 1, got {p}")));
    }
    let sv = singular_values(m);
    Ok(lp_norm(&sv, p))
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

fn lp_norm(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0f64, |a, &s| a.max(s.abs()))
    } else if p == 1.0 {
        values.iter().map(|s| s.abs()).sum()
    } else {
        values.iter().map(|s| s.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// The `d² × d²` operator exchanging the two tensor factors of `C^d ⊗ C^d`.
pub fn swap_operator(d: usize) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = ONE;
        }
    }
    HermitianMatrix(m)
}

/// Outcome of checking `λ_max(Σ|ψᵢ⟩⟨ψᵢ|) ≤ 1 + (n-1)δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotlarSteinAudit {
    pub lambda_max: f64,
    pub delta: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Audits the almost-orthogonality bound on the sum of rank-one projectors.
pub fn cotlar_stein_bound_audit(vectors: &[StateVector]) -> Result<CotlarSteinAudit> {
    let first = vectors.first().ok_or_else(|| Error::InvalidParameter("empty vector set".into()))?;
    let dim = first.dim();
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
    }
    let n = vectors.len();
    let mut delta = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            delta = delta.max(vectors[i].inner(&vectors[j]).norm());
        }
    }
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for v in vectors {
        sum += v.projector().matrix();
    }
    let lambda_max = HermitianMatrix::from_hermitian_part(sum).lambda_max();
    let bound = 1.0 + (n as f64 - 1.0) * delta;
    Ok(CotlarSteinAudit { lambda_max, delta, bound, holds: lambda_max <= bound + ASSERT_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: &[f64]) -> ComplexMatrix {
        HermitianMatrix::from_real_diagonal(d).into_matrix()
    }

    #[test]
    fn tensor_of_identities_and_projectors() {
        assert_eq!(tensor(&identity(2), &identity(2)), identity(4));
        assert_eq!(tensor(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])), diag(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_acts_factorwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = sample::random_matrix(&mut rng, 2, 2);
        let b = sample::random_matrix(&mut rng, 2, 2);
        let v = sample::random_complex_vector(&mut rng, 2);
        let w = sample::random_complex_vector(&mut rng, 2);
        let lhs = tensor(&a, &b) * tensor_vec(&v, &w);
        let rhs = tensor_vec(&(&a * &v), &(&b * &w));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = sample::random_density_matrix(&mut rng, 3, 3);
        let sigma = sample::random_density_matrix(&mut rng, 2, 2).matrix().scale(0.5);
        let joint = tensor(rho.matrix(), &sigma);
        let kept = partial_trace_matrix(&joint, &[3, 2], &[0]).unwrap();
        let expected = rho.matrix().scale(sigma.trace().re);
        assert!((kept - expected).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let s = 1.0 / 2f64.sqrt();
        let bell = StateVector::new(vec![c(s), ZERO, ZERO, c(s)]).unwrap();
        let p = bell.projector();
        for side in 0..2 {
            let r = partial_trace(&p, &[2, 2], &[side]).unwrap();
            assert!((r.matrix() - identity(2).scale(0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_orders_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = sample::random_density_matrix(&mut rng, 12, 12).hermitian().clone();
        let dims = [2, 3, 2];
        let direct = partial_trace(&m, &dims, &[1]).unwrap();
        let a = partial_trace(&partial_trace(&m, &dims, &[0, 1]).unwrap(), &[2, 3], &[1]).unwrap();
        let b = partial_trace(&partial_trace(&m, &dims, &[1, 2]).unwrap(), &[3, 2], &[0]).unwrap();
        // independent oracle: explicit index contraction
        let mut oracle = ComplexMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                for a0 in 0..2 {
                    for c0 in 0..2 {
                        oracle[(i, j)] += m.matrix()[(a0 * 6 + i * 2 + c0, a0 * 6 + j * 2 + c0)];
                    }
                }
            }
        }
        for r in [&direct, &a, &b] {
            assert!((r.matrix() - &oracle).norm() < 1e-12);
            assert!((r.trace() - m.trace()).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = HermitianMatrix::identity(4);
        assert!(matches!(partial_trace(&m, &[2, 3], &[0]), Err(Error::DimensionMismatch { .. })));
        assert!(partial_trace(&m, &[2, 2], &[2]).is_err());
    }

    #[test]
    fn eig_max_of_diagonal() {
        let (l, v) = eig_max(&HermitianMatrix::from_real_diagonal(&[0.3, 0.7]));
        assert!((l - 0.7).abs() < 1e-12);
        assert!((v.amplitudes()[1] - ONE).norm() < 1e-12);
    }

    #[test]
    fn eig_max_of_two_projectors_is_one_plus_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = sample::random_state_vector(&mut rng, 5);
            let b = sample::random_state_vector(&mut rng, 5);
            let delta = a.inner(&b).norm();
            let m = a.projector().add(&b.projector());
            let (l, v) = eig_max(&m);
            assert!((l - (1.0 + delta)).abs() < 1e-9);
            let residual = (m.matrix() * v.amplitudes() - v.amplitudes().scale(l)).norm();
            assert!(residual <= ASSERT_TOL);
        }
    }

    #[test]
    fn eig_max_dominates_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..10 {
            let m = sample::random_density_matrix(&mut rng, dim, dim);
            assert!(m.hermitian().lambda_max() >= m.trace() / dim as f64 - 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = identity(2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn schatten_norm_cases() {
        assert!((schatten_norm(&identity(5), 1.0).unwrap() - 5.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = sample::random_state_vector(&mut rng, 4).projector().into_matrix();
        for q in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            assert!((schatten_norm(&p, q).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(schatten_norm(&p, 0.5).is_err());
    }

    #[test]
    fn swap_operator_basics() {
        let s = swap_operator(2);
        // |01> = index 1 -> |10> = index 2
        assert_eq!(s.matrix()[(2, 1)], ONE);
        assert_eq!(s.matrix()[(1, 1)], ZERO);
        for d in 2..=4 {
            let s = swap_operator(d);
            let sq = s.matrix() * s.matrix();
            assert_eq!(sq, identity(d * d));
            assert_eq!(s.matrix().adjoint(), *s.matrix());
        }
    }

    #[test]
    fn cotlar_stein_orthonormal_basis() {
        let basis: Vec<_> = (0..4).map(|i| StateVector::basis(4, i)).collect();
        let audit = cotlar_stein_bound_audit(&basis).unwrap();
        assert!((audit.lambda_max - 1.0).abs() < 1e-12);
        assert_eq!(audit.bound, 1.0);
        assert!(audit.holds);
    }

    #[test]
    fn cotlar_stein_tight_for_two_vectors() {
        let theta = 0.3f64.acos();
        let a = StateVector::basis(2, 0);
        let b = StateVector::new(vec![c(theta.cos()), c(theta.sin())]).unwrap();
        let audit = cotlar_stein_bound_audit(&[a, b]).unwrap();
        assert!((audit.lambda_max - 1.3).abs() < 1e-9);
        assert!((audit.bound - 1.3).abs() < 1e-12);
    }
}
