//! Lightweight verification with `t` fingerprint copies as advice and a SWAP
//! test between each advice slot and the matching slot of the submission.
//!
//! The acceptance operator `⊗_i (I + SWAP_i)/2` expands as
//! `2^{−t} Σ_{T⊆[t]} SWAP_T`, and `Tr[SWAP_T (ρ ⊗ μ)] = Tr[ρ^T μ^T]` where the
//! superscript is the marginal on the slots in `T`. Slot 0 is the most
//! significant tensor factor throughout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::LeakageModel;
use crate::error::{Error, Result};
use crate::fingerprint::FingerprintScheme;
use crate::numerics::{
    partial_trace_matrix, swap_operator, tensor, trace_of_product, ComplexMatrix, HermitianMatrix, ASSERT_TOL,
};
use crate::sample;
use crate::state::{DensityMatrix, StateVector};

/// Largest `dim^t` handled exactly (12 qubits).
pub const MAX_SWAP_DIM: usize = 4096;
/// Largest `dim^t` for the index-contraction route, which costs `dim^{2t}` per subset.
pub const MAX_DIRECT_DIM: usize = 256;

#[derive(Debug, Clone)]
pub struct SwapScheme {
    base: FingerprintScheme,
    t: u32,
}

impl SwapScheme {
    pub fn new(base: FingerprintScheme, t: u32) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter("at least one copy is required".into()));
        }
        let total = (base.dim() as u128).checked_pow(t).unwrap_or(u128::MAX);
        if total > MAX_SWAP_DIM as u128 {
            return Err(Error::TooLarge(format!("{} copies of dimension {} exceed {MAX_SWAP_DIM}", t, base.dim())));
        }
        Ok(Self { base, t })
    }

    pub fn base(&self) -> &FingerprintScheme {
        &self.base
    }

    pub fn copies(&self) -> u32 {
        self.t
    }

    pub fn slot_dim(&self) -> usize {
        self.base.dim()
    }

    /// Dimension of the advice and of a submission, `dim^t`.
    pub fn total_dim(&self) -> usize {
        self.slot_dim().pow(self.t)
    }

    /// Qubits per slot.
    pub fn m_prime(&self) -> u32 {
        self.base.m_qubits()
    }

    /// Advice `φ_x^{⊗t}`.
    pub fn advice(&self, x: usize) -> StateVector {
        self.base.state(x).tensor_power(self.t as usize)
    }

    /// The honest submission, identical to the advice.
    pub fn honest(&self, x: usize) -> DensityMatrix {
        DensityMatrix::pure(&self.advice(x))
    }

    fn check_dim(&self, mu: &DensityMatrix) -> Result<()> {
        if mu.dim() != self.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.total_dim(), got: mu.dim() });
        }
        Ok(())
    }
}

fn slots_of(mask: u32, t: u32) -> Vec<usize> {
    (0..t as usize).filter(|&i| mask >> i & 1 == 1).collect()
}

/// `μ^T` for every subset `T` of the `t` slots, indexed by bitmask.
fn marginals(mu: &ComplexMatrix, d: usize, t: u32) -> Result<Vec<ComplexMatrix>> {
    let dims = vec![d; t as usize];
    (0..1u32 << t)
        .map(|mask| {
            if mask == 0 {
                Ok(ComplexMatrix::from_element(1, 1, mu.trace()))
            } else {
                partial_trace_matrix(mu, &dims, &slots_of(mask, t))
            }
        })
        .collect()
}

/// `⟨φ^{⊗|T|}|μ^T|φ^{⊗|T|}⟩` for every subset `T`.
fn subset_terms(phi: &StateVector, marg: &[ComplexMatrix], t: u32) -> Vec<f64> {
    let powers: Vec<StateVector> = (0..=t as usize).map(|k| phi.tensor_power(k)).collect();
    marg.iter()
        .enumerate()
        .map(|(mask, m)| {
            let v = powers[(mask as u32).count_ones() as usize].amplitudes();
            v.dotc(&(m * v)).re
        })
        .collect()
}

/// Exact `Tr[((I+SWAP)/2)^{⊗t} (φ_x^{⊗t} ⊗ μ)]` by the subset expansion.
pub fn swap_accept_probability(s: &SwapScheme, x: usize, mu: &DensityMatrix) -> Result<f64> {
    s.check_dim(mu)?;
    if x >= s.base.messages() {
        return Err(Error::InvalidParameter(format!("message {x} out of range")));
    }
    let marg = marginals(mu.matrix(), s.slot_dim(), s.t)?;
    let terms = subset_terms(&s.base.state(x), &marg, s.t);
    Ok(terms.iter().sum::<f64>() / (1u64 << s.t) as f64)
}

/// Subset expansion `2^{−t} Σ_T Tr[ρ^T μ^T]` for arbitrary advice `ρ`.
pub fn accept_by_expansion(advice: &ComplexMatrix, mu: &ComplexMatrix, d: usize, t: u32) -> Result<f64> {
    let a = marginals(advice, d, t)?;
    let m = marginals(mu, d, t)?;
    let total: f64 = a.iter().zip(&m).map(|(x, y)| trace_of_product(x, y).re).sum();
    Ok(total / (1u64 << t) as f64)
}

/// `Tr[SWAP_T (ρ ⊗ μ)]` by contracting indices of the full tensor: with
/// `(γ, η) = SWAP_T(α, β)` the trace is `Σ_{α,β} ρ[γ,α] μ[η,β]`.
fn swap_trace_direct(advice: &ComplexMatrix, mu: &ComplexMatrix, d: usize, t: u32, mask: u32) -> f64 {
    let dim = d.pow(t);
    let place: Vec<usize> = (0..t).map(|i| d.pow(t - 1 - i)).collect();
    let slots = slots_of(mask, t);
    let mut acc = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let mut g = a as isize;
            for &i in &slots {
                let da = (a / place[i]) % d;
                let db = (b / place[i]) % d;
                g += (db as isize - da as isize) * place[i] as isize;
            }
            let g = g as usize;
            let h = a + b - g;
            acc += (advice[(g, a)] * mu[(h, b)]).re;
        }
    }
    acc
}

/// Full-tensor acceptance without partial traces.
pub fn accept_direct(advice: &ComplexMatrix, mu: &ComplexMatrix, d: usize, t: u32) -> Result<f64> {
    let dim = d.pow(t);
    if dim > MAX_DIRECT_DIM {
        return Err(Error::TooLarge(format!("direct contraction limited to dimension {MAX_DIRECT_DIM}")));
    }
    if advice.nrows() != dim || mu.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: advice.nrows().max(mu.nrows()) });
    }
    let total: f64 = (0..1u32 << t).map(|mask| swap_trace_direct(advice, mu, d, t, mask)).sum();
    Ok(total / (1u64 << t) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapAuditReport {
    pub t: u32,
    pub m_prime: u32,
    /// `𝔼_{XY}` of the acceptance probability.
    pub acceptance: f64,
    /// `2^{−t} + max_i per_slot_terms[i]`.
    pub bound: f64,
    /// `𝔼_{XY} Tr[μ_Y^i φ_X]` for each slot `i`.
    pub per_slot_terms: Vec<f64>,
    /// `𝔼_{XY} Tr[φ_X^{⊗|T|} μ_Y^T]` by subset bitmask.
    pub subset_terms: Vec<f64>,
    /// Every nonempty subset term is at most its smallest slot term.
    pub term_by_term: bool,
    pub holds: bool,
}

/// Exact average acceptance of a per-`y` forgery and the slot-marginal bound.
pub fn swap_attack_audit(s: &SwapScheme, leak: &LeakageModel, forgery: &[DensityMatrix]) -> Result<SwapAuditReport> {
    let j = leak.joint(s.base.n_bits())?;
    if forgery.len() != j.ny() {
        return Err(Error::DimensionMismatch { expected: j.ny(), got: forgery.len() });
    }
    let subsets = 1usize << s.t;
    let mut expected = vec![0.0; subsets];
    for (y, mu) in forgery.iter().enumerate() {
        s.check_dim(mu)?;
        let support: Vec<usize> = (0..j.nx()).filter(|&x| j.get(x, y) > 0.0).collect();
        if support.is_empty() {
            continue;
        }
        let marg = marginals(mu.matrix(), s.slot_dim(), s.t)?;
        for x in support {
            let p = j.get(x, y);
            for (e, v) in expected.iter_mut().zip(subset_terms(&s.base.state(x), &marg, s.t)) {
                *e += p * v;
            }
        }
    }
    let acceptance = expected.iter().sum::<f64>() / subsets as f64;
    let per_slot_terms: Vec<f64> = (0..s.t).map(|i| expected[1 << i]).collect();
    let bound = 1.0 / subsets as f64 + per_slot_terms.iter().copied().fold(f64::MIN, f64::max);
    let term_by_term = (1..subsets).all(|mask| {
        let min_slot = slots_of(mask as u32, s.t).iter().map(|&i| per_slot_terms[i]).fold(f64::MAX, f64::min);
        expected[mask] <= min_slot + ASSERT_TOL
    });
    Ok(SwapAuditReport {
        t: s.t,
        m_prime: s.m_prime(),
        acceptance,
        bound,
        per_slot_terms,
        subset_terms: expected,
        term_by_term,
        holds: term_by_term && acceptance <= bound + ASSERT_TOL,
    })
}

/// `Tr[SWAP (ρ ⊗ σ)]` with the explicit swap operator.
pub fn swap_trace(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: sigma.dim() });
    }
    let joint = tensor(rho.matrix(), sigma.matrix());
    Ok(trace_of_product(swap_operator(rho.dim()).matrix(), &joint).re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub trials: usize,
    /// Largest `|expansion − direct|` over random advice and submissions.
    pub expansion_gap: f64,
    /// Largest `|Tr[SWAP(ρ⊗σ)] − Tr[ρσ]|` over random pairs.
    pub swap_gap: f64,
    pub holds: bool,
}

/// Tolerance for both identities.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Checks, on random mixed states, that the subset expansion equals the
/// full-tensor contraction, and that `Tr[SWAP(ρ⊗σ)] = Tr[ρσ]`.
pub fn two_proof_identities<R: Rng + ?Sized>(rng: &mut R, trials: usize, d: usize, t: u32) -> Result<IdentityReport> {
    let dim = d.pow(t);
    let mut expansion_gap: f64 = 0.0;
    let mut swap_gap: f64 = 0.0;
    for _ in 0..trials {
        let rank_a = rng.random_range(1..=dim);
        let rank_m = rng.random_range(1..=dim);
        let advice = sample::random_density_matrix(rng, dim, rank_a);
        let mu = sample::random_density_matrix(rng, dim, rank_m);
        let by_expansion = accept_by_expansion(advice.matrix(), mu.matrix(), d, t)?;
        let direct = accept_direct(advice.matrix(), mu.matrix(), d, t)?;
        expansion_gap = expansion_gap.max((by_expansion - direct).abs());

        let rank_r = rng.random_range(1..=d);
        let rank_s = rng.random_range(1..=d);
        let rho = sample::random_density_matrix(rng, d, rank_r);
        let sigma = sample::random_density_matrix(rng, d, rank_s);
        let lhs = swap_trace(rho.hermitian(), sigma.hermitian())?;
        swap_gap = swap_gap.max((lhs - rho.hermitian().trace_product(sigma.hermitian())).abs());
    }
    Ok(IdentityReport {
        trials,
        expansion_gap,
        swap_gap,
        holds: expansion_gap <= IDENTITY_TOL && swap_gap <= IDENTITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::{build_hadamard, build_random_linear};
    use crate::numerics::identity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `⊗_i (I+SWAP_i)/2` as an explicit matrix on `(advice slots, submission slots)`.
    fn explicit_operator(d: usize, t: u32) -> ComplexMatrix {
        let dim = d.pow(t);
        let mut op = ComplexMatrix::zeros(dim * dim, dim * dim);
        let place: Vec<usize> = (0..t).map(|i| d.pow(t - 1 - i)).collect();
        for mask in 0..1u32 << t {
            for a in 0..dim {
                for b in 0..dim {
                    let (mut g, mut h) = (a, b);
                    for i in slots_of(mask, t) {
                        let (da, db) = ((a / place[i]) % d, (b / place[i]) % d);
                        g = g - da * place[i] + db * place[i];
                        h = h - db * place[i] + da * place[i];
                    }
                    op[(g * dim + h, a * dim + b)] += crate::numerics::c(1.0);
                }
            }
        }
        op.unscale((1u64 << t) as f64)
    }

    #[test]
    fn explicit_operator_is_a_projector_matching_both_routes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, t) = (2, 2);
        let op = explicit_operator(d, t);
        assert!((&op * &op - &op).norm() < 1e-12);
        let advice = sample::random_density_matrix(&mut rng, 4, 2);
        let mu = sample::random_density_matrix(&mut rng, 4, 3);
        let full = trace_of_product(&op, &tensor(advice.matrix(), mu.matrix())).re;
        assert!((full - accept_direct(advice.matrix(), mu.matrix(), d, t).unwrap()).abs() < 1e-12);
        assert!((full - accept_by_expansion(advice.matrix(), mu.matrix(), d, t).unwrap()).abs() < 1e-12);
        let single = explicit_operator(2, 1);
        let swap = swap_operator(2);
        assert!((single - (identity(4) + swap.matrix()).unscale(2.0)).norm() < 1e-15);
    }

    #[test]
    fn honest_submission_always_passes() {
        for t in 1..=3 {
            let s = SwapScheme::new(build_hadamard(2).unwrap(), t).unwrap();
            for x in 0..4 {
                assert!((swap_accept_probability(&s, x, &s.honest(x)).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_copy_maximally_mixed() {
        let s = SwapScheme::new(build_hadamard(1).unwrap(), 1).unwrap();
        let v = swap_accept_probability(&s, 0, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn product_forgery_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = SwapScheme::new(build_random_linear(2, 4, 1.0, 3).unwrap(), 3).unwrap();
        let nu = sample::random_density_matrix(&mut rng, 4, 2);
        let mut mu = nu.clone();
        for _ in 1..3 {
            mu = mu.tensor(&nu);
        }
        for x in 0..4 {
            let single = (1.0 + nu.expectation(&s.base().state(x))) / 2.0;
            let v = swap_accept_probability(&s, x, &mu).unwrap();
            assert!((v - single.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn routes_agree_on_random_entangled_submissions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = SwapScheme::new(build_hadamard(1).unwrap(), 3).unwrap();
        for _ in 0..10 {
            let mu = sample::random_density_matrix(&mut rng, 8, 3);
            let x = rng.random_range(0..2);
            let advice = DensityMatrix::pure(&s.advice(x));
            let a = swap_accept_probability(&s, x, &mu).unwrap();
            let b = accept_direct(advice.matrix(), mu.matrix(), 2, 3).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_wrong_state_copies() {
        let s = SwapScheme::new(build_hadamard(2).unwrap(), 2).unwrap();
        let mu = s.honest(3);
        let r = swap_attack_audit(&s, &LeakageModel::none(), &[mu]).unwrap();
        assert!(r.holds);
        assert!(r.acceptance <= 0.25 + 0.25 + 1e-12);
        // three of four messages see an orthogonal submission: (1/4)(1) + (3/4)(1/4)
        assert!((r.acceptance - (0.25 + 0.75 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn single_copy_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = SwapScheme::new(build_random_linear(2, 4, 1.0, 5).unwrap(), 1).unwrap();
        let forgery: Vec<DensityMatrix> = (0..2).map(|_| sample::random_density_matrix(&mut rng, 4, 2)).collect();
        let r = swap_attack_audit(&s, &LeakageModel::prefix(1), &forgery).unwrap();
        assert!((r.acceptance - (1.0 + r.per_slot_terms[0]) / 2.0).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn random_entangled_forgeries_respect_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = SwapScheme::new(build_hadamard(2).unwrap(), 2).unwrap();
        for _ in 0..20 {
            let forgery: Vec<DensityMatrix> = (0..2)
                .map(|_| {
                    let rank = rng.random_range(1..=16);
                    sample::random_density_matrix(&mut rng, 16, rank)
                })
                .collect();
            let r = swap_attack_audit(&s, &LeakageModel::prefix(1), &forgery).unwrap();
            assert!(r.holds && r.term_by_term);
        }
    }

    #[test]
    fn identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = two_proof_identities(&mut rng, 50, 2, 2).unwrap();
        assert!(r.holds, "{r:?}");
        let psi = sample::random_state_vector(&mut rng, 3);
        let p = psi.projector();
        assert!((swap_trace(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let e0 = StateVector::basis(3, 0).projector();
        let e1 = StateVector::basis(3, 1).projector();
        assert!(swap_trace(&e0, &e1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn limits() {
        assert!(SwapScheme::new(build_hadamard(3).unwrap(), 5).is_err());
        assert!(SwapScheme::new(build_hadamard(3).unwrap(), 0).is_err());
        let s = SwapScheme::new(build_hadamard(3).unwrap(), 4).unwrap();
        assert_eq!(s.total_dim(), 4096);
        assert!(swap_accept_probability(&s, 0, &DensityMatrix::maximally_mixed(8)).is_err());
    }
}
