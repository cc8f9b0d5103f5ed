//! Quantum and classical state model: pure states, density matrices,
//! classical-quantum ensembles and joint distributions.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, ComplexMatrix, ComplexVector, HermitianMatrix, CONSTRUCTION_TOL, ONE};

/// Unit vector in `C^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(ComplexVector);

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(amplitudes))
    }

    pub fn from_vector(v: ComplexVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!("state vector norm {norm} is not 1")));
        }
        Ok(Self(v))
    }

    /// Normalizes `v`; fails only for the zero vector.
    pub fn normalize(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self(v.unscale(norm)))
    }

    pub(crate) fn from_normalized(v: ComplexVector) -> Self {
        Self(v)
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = ComplexVector::zeros(dim);
        v[index] = ONE;
        Self(v)
    }

    /// `M^{-1/2} Σᵢ (-1)^{bitᵢ} |i⟩` for a sign pattern of length `M`.
    pub fn phase_state(signs: impl ExactSizeIterator<Item = bool>) -> Self {
        let m = signs.len();
        let amp = 1.0 / (m as f64).sqrt();
        Self(DVector::from_iterator(m, signs.map(|b| c(if b { -amp } else { amp }))))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector(self.0.kronecker(&other.0))
    }

    /// `|ψ⟩^{⊗t}`.
    pub fn tensor_power(&self, t: usize) -> StateVector {
        let mut acc = DVector::from_element(1, ONE);
        for _ in 0..t {
            acc = acc.kronecker(&self.0);
        }
        StateVector(acc)
    }

    pub fn projector(&self) -> HermitianMatrix {
        HermitianMatrix::from_hermitian_part(&self.0 * self.0.adjoint())
    }
}

/// Positive semidefinite, Hermitian matrix with trace at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        Self::from_hermitian(h)
    }

    pub fn from_hermitian(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if tr > 1.0 + CONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!("trace {tr} exceeds 1")));
        }
        let min = h.lambda_min();
        if min < -CONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(h))
    }

    /// Wraps a matrix that is a valid (sub)normalized state by construction.
    pub(crate) fn from_hermitian_unchecked(h: HermitianMatrix) -> Self {
        Self(h)
    }

    pub fn pure(psi: &StateVector) -> Self {
        Self(psi.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidState("negative diagonal entry".into()));
        }
        Self::from_hermitian(HermitianMatrix::from_real_diagonal(probs))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.0.matrix()
    }

    /// `s · ρ` for `0 ≤ s` with `s·Tr ρ ≤ 1`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if s < 0.0 {
            return Err(Error::InvalidParameter("negative scale".into()));
        }
        Self::from_hermitian(self.0.scale(s))
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        let v = psi.amplitudes();
        v.dotc(&(self.matrix() * v)).re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self(HermitianMatrix::from_hermitian_part(crate::numerics::tensor(self.matrix(), other.matrix())))
    }
}

/// Unhalved trace distance `‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.hermitian().sub(b.hermitian()).trace_norm())
}

/// `½‖a − b‖₁`.
pub fn trace_distance_halved(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    trace_distance(a, b).map(|d| 0.5 * d)
}

/// `½ Σ|p − q|`.
pub fn statistical_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Root fidelity `‖√a √b‖₁` of two positive operators; `|⟨ψ|φ⟩|` on pure states.
pub fn fidelity(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let sa = a.map_spectrum(|v| v.max(0.0).sqrt());
    let sb = b.map_spectrum(|v| v.max(0.0).sqrt());
    crate::numerics::singular_values(&(sa.matrix() * sb.matrix())).iter().sum()
}

/// Classical-quantum state `Σ_x |x⟩⟨x| ⊗ ρ_x` with subnormalized blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CqState {
    labels: Vec<String>,
    blocks: Vec<DensityMatrix>,
}

/// Tolerance on the total trace of a cq state.
pub const CQ_TRACE_TOL: f64 = 1e-9;

impl CqState {
    pub fn new(labels: Vec<String>, blocks: Vec<DensityMatrix>) -> Result<Self> {
        if labels.len() != blocks.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: blocks.len() });
        }
        let dim = blocks.first().map(|b| b.dim()).ok_or_else(|| Error::InvalidState("no blocks".into()))?;
        if let Some(b) = blocks.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: b.dim() });
        }
        let total: f64 = blocks.iter().map(|b| b.trace()).sum();
        if (total - 1.0).abs() > CQ_TRACE_TOL {
            return Err(Error::InvalidState(format!("block traces sum to {total}, not 1")));
        }
        Ok(Self { labels, blocks })
    }

    /// `Σ_x q_x |x⟩⟨x| ⊗ |ψ_x⟩⟨ψ_x|`.
    pub fn from_pure_ensemble(labels: Vec<String>, weights: &[f64], states: &[StateVector]) -> Result<Self> {
        if weights.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: weights.len(), got: states.len() });
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidDistribution("negative ensemble weight".into()));
        }
        let blocks = weights
            .iter()
            .zip(states)
            .map(|(&w, s)| DensityMatrix::from_hermitian_unchecked(s.projector().scale(w)))
            .collect();
        Self::new(labels, blocks)
    }

    /// Embeds `p(x, y)` as the diagonal blocks `ρ_x = Σ_y p(x,y)|y⟩⟨y|`.
    pub fn from_joint(j: &JointDistribution) -> Self {
        let blocks = j.table.iter().map(|row| DensityMatrix::diagonal(row).expect("valid table")).collect();
        Self { labels: j.x_labels.clone(), blocks }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn blocks(&self) -> &[DensityMatrix] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    /// Marginal `q_x = Tr ρ_x`.
    pub fn prior(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace()).collect()
    }

    /// `p_g(X) = max_x Tr ρ_x`.
    pub fn guess_prob_prior(&self) -> f64 {
        self.prior().into_iter().fold(0.0, f64::max)
    }

    /// `ρ_E = Σ_x ρ_x`.
    pub fn side_state(&self) -> HermitianMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim(), self.dim());
        for b in &self.blocks {
            acc += b.matrix();
        }
        HermitianMatrix::from_hermitian_part(acc)
    }

    /// Applies a channel given by Kraus operators to every block.
    pub fn apply_channel(&self, kraus: &[ComplexMatrix]) -> Result<Self> {
        let out_dim =
            kraus.first().map(|k| k.nrows()).ok_or_else(|| Error::InvalidParameter("no Kraus operators".into()))?;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut acc = ComplexMatrix::zeros(out_dim, out_dim);
                for k in kraus {
                    if k.ncols() != b.dim() {
                        return Err(Error::DimensionMismatch { expected: b.dim(), got: k.ncols() });
                    }
                    acc += k * b.matrix() * k.adjoint();
                }
                DensityMatrix::from_hermitian(HermitianMatrix::from_hermitian_part(acc))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.labels.clone(), blocks)
    }

    pub fn to_json(&self) -> CqStateJson {
        CqStateJson {
            labels: self.labels.clone(),
            blocks: self.blocks.iter().map(|b| matrix_to_json(b.matrix())).collect(),
        }
    }

    pub fn from_json(j: &CqStateJson) -> Result<Self> {
        let blocks = j.blocks.iter().map(|b| DensityMatrix::new(matrix_from_json(b)?)).collect::<Result<Vec<_>>>()?;
        Self::new(j.labels.clone(), blocks)
    }
}

/// Complex number serialized as `[re, im]`.
pub type ComplexJson = [f64; 2];
/// Row-major matrix of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<ComplexJson>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<ComplexMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidParameter("ragged matrix".into()));
    }
    Ok(ComplexMatrix::from_fn(n, cols, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

/// JSON schema of a cq state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqStateJson {
    pub labels: Vec<String>,
    pub blocks: Vec<MatrixJson>,
}

/// Tolerance on the total mass of a joint distribution.
pub const JOINT_SUM_TOL: f64 = 1e-12;

/// Nonnegative table `p(x, y)` over explicit alphabets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDistribution {
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    /// `table[x][y]`.
    pub table: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(x_labels: Vec<String>, y_labels: Vec<String>, table: Vec<Vec<f64>>) -> Result<Self> {
        let j = Self { x_labels, y_labels, table };
        j.validate()?;
        Ok(j)
    }

    /// Uses labels `"0".."|X|-1"` and `"0".."|Y|-1"`.
    pub fn from_table(table: Vec<Vec<f64>>) -> Result<Self> {
        let nx = table.len();
        let ny = table.first().map_or(0, |r| r.len());
        Self::new(index_labels(nx), index_labels(ny), table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.table.len() != self.x_labels.len() || self.x_labels.is_empty() {
            return Err(Error::InvalidDistribution("row count does not match X alphabet".into()));
        }
        if self.y_labels.is_empty() || self.table.iter().any(|r| r.len() != self.y_labels.len()) {
            return Err(Error::InvalidDistribution("row length does not match Y alphabet".into()));
        }
        if self.table.iter().flatten().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidDistribution("entries must be finite and nonnegative".into()));
        }
        let total: f64 = self.table.iter().flatten().sum();
        if (total - 1.0).abs() > JOINT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.table.len()
    }

    pub fn ny(&self) -> usize {
        self.y_labels.len()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.table[x][y]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.ny()).map(|y| self.table.iter().map(|r| r[y]).sum()).collect()
    }

    /// `p_g(X|Y) = Σ_y max_x p(x, y)`.
    pub fn guess_prob(&self) -> f64 {
        guess_prob_classical(self)
    }

    /// `H_min(X|Y) = −log₂ p_g(X|Y)`.
    pub fn min_entropy(&self) -> f64 {
        // `0 − x` rather than `−x` keeps an exact zero positive
        0.0 - self.guess_prob().log2()
    }
}

pub(crate) fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Fixed-width binary labels, most significant bit first.
pub fn bit_labels(bits: u32) -> Vec<String> {
    (0..1usize << bits).map(|x| bit_string(x, bits)).collect()
}

pub fn bit_string(x: usize, bits: u32) -> String {
    (0..bits).rev().map(|b| if (x >> b) & 1 == 1 { '1' } else { '0' }).collect()
}

/// `Σ_y max_x p(x, y)`.
pub fn guess_prob_classical(j: &JointDistribution) -> f64 {
    (0..j.ny()).map(|y| j.table.iter().map(|r| r[y]).fold(0.0, f64::max)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn statistical_distance_cases() {
        assert_eq!(statistical_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(statistical_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((statistical_distance(&[0.7, 0.3], &[0.5, 0.5]).unwrap() - 0.2).abs() < 1e-15);
        assert!(statistical_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn statistical_distance_is_best_subset_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = sample::random_distribution(&mut rng, 5);
            let q = sample::random_distribution(&mut rng, 5);
            let best = (0..32u32)
                .map(|s| (0..5).filter(|i| s >> i & 1 == 1).map(|i| p[i] - q[i]).sum::<f64>())
                .fold(f64::MIN, f64::max);
            assert!((statistical_distance(&p, &q).unwrap() - best).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_distance_cases() {
        let a = DensityMatrix::pure(&StateVector::basis(2, 0));
        let b = DensityMatrix::pure(&StateVector::basis(2, 1));
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!((trace_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!((trace_distance_halved(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        for overlap in [0.0, 0.2, 0.6, 0.95] {
            let theta = f64::acos(overlap);
            let psi = StateVector::new(vec![c(theta.cos()), c(theta.sin())]).unwrap();
            let d = trace_distance(&a, &DensityMatrix::pure(&psi)).unwrap();
            assert!((d - 2.0 * (1.0 - overlap * overlap).sqrt()).abs() < 1e-12);
        }
        assert!(trace_distance(&a, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn trace_distance_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let [a, b, d] = [0, 1, 2].map(|_| sample::random_density_matrix(&mut rng, 4, 4));
            let ab = trace_distance(&a, &b).unwrap();
            assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
            assert!(ab <= trace_distance(&a, &d).unwrap() + trace_distance(&d, &b).unwrap() + 1e-12);
        }
    }

    #[test]
    fn guess_prob_classical_cases() {
        let indep = JointDistribution::from_table(vec![vec![0.125, 0.125]; 4]).unwrap();
        assert!((indep.guess_prob() - 0.25).abs() < 1e-15);
        let copy = JointDistribution::from_table(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(copy.guess_prob(), 1.0);
        let j = JointDistribution::from_table(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert!((j.guess_prob() - 0.8).abs() < 1e-15);
        assert!((j.min_entropy() + 0.8f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn guess_prob_classical_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let j = sample::random_joint(&mut rng, 4, 3);
            let pg = j.guess_prob();
            let px = j.marginal_x().into_iter().fold(0.0, f64::max);
            assert!(pg >= px - 1e-12 && pg <= 1.0 + 1e-12);
            // deterministic X given Y iff each column has a single nonzero entry
            let deterministic = (0..3).all(|y| (0..4).filter(|&x| j.get(x, y) > 0.0).count() <= 1);
            assert_eq!((pg - 1.0).abs() < 1e-12, deterministic);
        }
        // X a function of Y: y0 -> x0 or x3 is ambiguous, so not deterministic
        let j = JointDistribution::from_table(vec![
            vec![0.3, 0.0, 0.0],
            vec![0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.2],
            vec![0.2, 0.0, 0.0],
        ])
        .unwrap();
        assert!((j.guess_prob() - 0.8).abs() < 1e-12);
        let f = JointDistribution::from_table(vec![vec![0.5, 0.0], vec![0.0, 0.25], vec![0.0, 0.25]]);
        assert!(f.is_ok());
    }

    #[test]
    fn joint_validation() {
        assert!(JointDistribution::from_table(vec![vec![0.5, 0.6]]).is_err());
        assert!(JointDistribution::from_table(vec![vec![1.5, -0.5]]).is_err());
        assert!(JointDistribution::new(index_labels(2), index_labels(1), vec![vec![1.0]]).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.7), c(0.5)]));
        assert!(DensityMatrix::new(m).is_err());
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.1), c(-0.1)]));
        assert!(DensityMatrix::new(m).is_err());
        assert!(StateVector::new(vec![c(1.0), c(1.0)]).is_err());
    }

    #[test]
    fn cq_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = sample::random_cq_state(&mut rng, 3, 2);
        let text = serde_json::to_string(&rho.to_json()).unwrap();
        let back = CqState::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        for (a, b) in rho.blocks().iter().zip(back.blocks()) {
            assert!((a.matrix() - b.matrix()).norm() < 1e-15);
        }
        assert!(serde_json::from_str::<CqStateJson>(r#"{"labels":[],"blocks":[],"extra":1}"#).is_err());
    }

    #[test]
    fn bit_labels_are_msb_first() {
        assert_eq!(bit_labels(2), vec!["00", "01", "10", "11"]);
    }
}
