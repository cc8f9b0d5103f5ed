//! Guessing probability of a classical label from quantum side information.
//!
//! `p_g(X|E) = max_M Σ_x Tr[M_x ρ_x] = min { Tr σ : σ ⪰ ρ_x ∀x }`. The primal is
//! approached by the Ježek–Řeháček–Fiurášek fixed-point iteration started from
//! the pretty-good measurement; every iterate also yields a dual-feasible
//! operator after a scalar shift, so each solve returns a certified interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, ComplexMatrix, HermitianMatrix};
use crate::state::{CqState, StateVector};

pub const DEFAULT_GAP_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Relative eigenvalue cutoff for pseudo-inverses.
const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: DEFAULT_GAP_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Certified bounds on `p_g(X|E)`.
#[derive(Debug, Clone)]
pub struct Discrimination {
    /// Success probability of `povm`, a valid measurement.
    pub lower: f64,
    /// `Tr σ̃` of the best dual-feasible operator found.
    pub upper: f64,
    /// The shifted iterative dual alone, before comparing with the two
    /// closed-form certificates `ρ_E` and `max_x λ_max(ρ_x)·I`.
    pub upper_iterative: f64,
    pub povm: Vec<HermitianMatrix>,
    pub iterations: usize,
    pub converged: bool,
}

impl Discrimination {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `ρ^{-1/2}` restricted to the support of `ρ`, and the projector onto its kernel.
fn inverse_sqrt_on_support(rho: &HermitianMatrix) -> (HermitianMatrix, HermitianMatrix) {
    let spec = rho.eigh();
    let scale = spec.values.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let cutoff = PINV_CUTOFF * scale.max(f64::MIN_POSITIVE);
    let n = rho.dim();
    let mut inv = ComplexMatrix::zeros(n, n);
    let mut ker = ComplexMatrix::zeros(n, n);
    for (j, &l) in spec.values.iter().enumerate() {
        let v = spec.vectors.column(j);
        let outer = v * v.adjoint();
        if l > cutoff {
            inv += outer.scale(1.0 / l.sqrt());
        } else {
            ker += outer;
        }
    }
    (HermitianMatrix::from_hermitian_part(inv), HermitianMatrix::from_hermitian_part(ker))
}

/// `A M A` for positive semidefinite `M`, formed as `(A V)(A V)†` with
/// `M = V V†`. The product form stays positive under rounding even when `A`
/// is the ill-conditioned inverse square root of a nearly singular operator.
fn sandwich(outer: &HermitianMatrix, inner: &HermitianMatrix) -> HermitianMatrix {
    let spec = inner.eigh();
    let n = inner.dim();
    let support: Vec<usize> = (0..n).filter(|&j| spec.values[j] > 0.0).collect();
    let mut v = ComplexMatrix::zeros(n, support.len());
    for (k, &j) in support.iter().enumerate() {
        v.set_column(k, &(spec.vectors.column(j) * c(spec.values[j].sqrt())));
    }
    let b = outer.matrix() * v;
    HermitianMatrix::from_hermitian_part(&b * b.adjoint())
}

/// Pretty-good (square-root) measurement `Π_x = ρ_E^{-1/2} ρ_x ρ_E^{-1/2}`,
/// completed on the kernel of `ρ_E` by the first element.
pub fn pgm_povm(rho: &CqState) -> Vec<HermitianMatrix> {
    let (inv, ker) = inverse_sqrt_on_support(&rho.side_state());
    let mut povm: Vec<_> = rho.blocks().iter().map(|b| sandwich(&inv, b.hermitian())).collect();
    povm[0] = povm[0].add(&ker);
    povm
}

pub fn success_probability(rho: &CqState, povm: &[HermitianMatrix]) -> f64 {
    rho.blocks().iter().zip(povm).map(|(b, m)| b.hermitian().trace_product(m)).sum()
}

/// Success probability of the pretty-good measurement.
pub fn pgm_value(rho: &CqState) -> f64 {
    success_probability(rho, &pgm_povm(rho))
}

/// Pretty-good measurement success for a pure ensemble through its Gram
/// matrix: `Σ_x ((√G)_{xx})²` with `G_{xy} = √(q_x q_y) ⟨ψ_x|ψ_y⟩`.
pub fn pgm_value_pure(weights: &[f64], states: &[StateVector]) -> Result<f64> {
    if weights.len() != states.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: states.len() });
    }
    let n = states.len();
    let gram = ComplexMatrix::from_fn(n, n, |i, j| states[i].inner(&states[j]) * (weights[i] * weights[j]).sqrt());
    let gram = HermitianMatrix::from_hermitian_part(gram);
    let cutoff = PINV_CUTOFF * gram.trace();
    let root = gram.map_spectrum(|l| if l > cutoff { l.sqrt() } else { 0.0 });
    Ok((0..n).map(|i| root.matrix()[(i, i)].norm_sqr()).sum())
}

/// Shifted dual certificate `σ + λI` with `λ = max_x λ_max(ρ_x − σ)`.
fn dual_certificate(rho: &CqState, sigma: &HermitianMatrix) -> f64 {
    let shift = rho.blocks().iter().map(|b| b.hermitian().sub(sigma).lambda_max()).fold(f64::NEG_INFINITY, f64::max);
    sigma.trace() + shift * rho.dim() as f64
}

/// Re-completes a POVM whose elements drifted: `Π_x ← S^{-1/2} Π_x S^{-1/2}`.
fn recomplete(povm: &mut [HermitianMatrix]) {
    let n = povm[0].dim();
    let mut total = ComplexMatrix::zeros(n, n);
    for m in povm.iter() {
        total += m.matrix();
    }
    let (inv, ker) = inverse_sqrt_on_support(&HermitianMatrix::from_hermitian_part(total));
    for m in povm.iter_mut() {
        *m = sandwich(&inv, m);
    }
    povm[0] = povm[0].add(&ker);
}

/// Solves the minimum-error discrimination problem for `rho`.
///
/// Non-convergence within `max_iter` is not an error: the certified bounds
/// are still returned, with `converged = false`.
pub fn guess_prob_quantum(rho: &CqState, options: SolverOptions) -> Result<Discrimination> {
    if options.gap_tol.is_nan() || options.gap_tol <= 0.0 {
        return Err(Error::InvalidParameter("gap_tol must be positive".into()));
    }
    let dim = rho.dim();
    let blocks: Vec<&ComplexMatrix> = rho.blocks().iter().map(|b| b.matrix()).collect();

    // Closed-form dual points: ρ_E itself, and a multiple of the identity.
    let closed_form = f64::min(
        rho.side_state().trace(),
        dim as f64 * rho.blocks().iter().map(|b| b.hermitian().lambda_max()).fold(0.0, f64::max),
    );

    let mut povm = pgm_povm(rho);
    let mut best_lower = f64::NEG_INFINITY;
    let mut best_povm = povm.clone();
    let mut best_upper_iter = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let lower = success_probability(rho, &povm);
        if lower > best_lower {
            best_lower = lower;
            best_povm = povm.clone();
        }
        let mut lagrange = ComplexMatrix::zeros(dim, dim);
        for (b, m) in blocks.iter().zip(&povm) {
            lagrange += *b * m.matrix();
        }
        let sigma = HermitianMatrix::from_hermitian_part(lagrange);
        best_upper_iter = best_upper_iter.min(dual_certificate(rho, &sigma));
        if best_upper_iter.min(closed_form) - best_lower <= options.gap_tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;

        // Π_x ← G^{-1/2} ρ_x Π_x ρ_x G^{-1/2},  G = Σ_x ρ_x Π_x ρ_x
        let weighted: Vec<HermitianMatrix> =
            blocks.iter().zip(&povm).map(|(b, m)| HermitianMatrix::from_hermitian_part(*b * m.matrix() * *b)).collect();
        let mut g = ComplexMatrix::zeros(dim, dim);
        for w in &weighted {
            g += w.matrix();
        }
        let (inv, ker) = inverse_sqrt_on_support(&HermitianMatrix::from_hermitian_part(g));
        povm = weighted.iter().map(|w| sandwich(&inv, w)).collect();
        povm[0] = povm[0].add(&ker);
        recomplete(&mut povm);
    }

    Ok(Discrimination {
        lower: best_lower,
        upper: best_upper_iter.min(closed_form),
        upper_iterative: best_upper_iter,
        povm: best_povm,
        iterations,
        converged,
    })
}

/// `p_g(X) · 2^k`, valid when the side information fits in `k` qubits.
pub fn bounded_storage_bound(rho: &CqState, k_qubits: u32) -> Result<f64> {
    let capacity = 1usize.checked_shl(k_qubits).filter(|&c| c > 0).unwrap_or(usize::MAX);
    if rho.dim() > capacity {
        return Err(Error::InvalidParameter(format!(
            "side information of dimension {} does not fit in {k_qubits} qubits",
            rho.dim()
        )));
    }
    Ok(rho.guess_prob_prior() * 2f64.powi(k_qubits as i32))
}

/// Smallest `k` with `dim ≤ 2^k`.
pub fn qubits_for_dim(dim: usize) -> u32 {
    dim.next_power_of_two().trailing_zeros()
}
