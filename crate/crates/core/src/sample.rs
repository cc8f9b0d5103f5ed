//! Seeded random instances: Haar states, Ginibre mixed states, tables and
//! channels. Used by audits, sweeps and tests.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::numerics::{ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::state::{index_labels, CqState, DensityMatrix, JointDistribution, StateVector};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    ComplexVector::from_fn(dim, |_, _| gaussian(rng))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random pure state.
pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    loop {
        if let Ok(s) = StateVector::normalize(random_complex_vector(rng, dim)) {
            return s;
        }
    }
}

/// Normalized `G G†` for a `dim × rank` Ginibre matrix `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityMatrix {
    let g = random_matrix(rng, dim, rank.max(1));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_hermitian_unchecked(HermitianMatrix::from_hermitian_part(m.unscale(tr)))
}

/// Flat Dirichlet sample.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random joint table; roughly a third of the entries are zeroed when
/// `sparse` is set, which exercises ties and empty columns.
pub fn random_joint_with<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize, sparse: bool) -> JointDistribution {
    loop {
        let mut table: Vec<Vec<f64>> = (0..nx)
            .map(|_| {
                (0..ny).map(|_| if sparse && rng.random_bool(1.0 / 3.0) { 0.0 } else { Exp1.sample(rng) }).collect()
            })
            .collect();
        let total: f64 = table.iter().flatten().sum();
        if total == 0.0 {
            continue;
        }
        for row in &mut table {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
        renormalize(&mut table);
        return JointDistribution::new(index_labels(nx), index_labels(ny), table).expect("normalized table");
    }
}

pub fn random_joint<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize) -> JointDistribution {
    random_joint_with(rng, nx, ny, false)
}

/// Pushes the residual rounding error of a normalized table onto its largest entry.
pub(crate) fn renormalize(table: &mut [Vec<f64>]) {
    let total: f64 = table.iter().flatten().sum();
    let (mut bx, mut by, mut best) = (0, 0, f64::MIN);
    for (x, row) in table.iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p > best {
                (bx, by, best) = (x, y, p);
            }
        }
    }
    table[bx][by] += 1.0 - total;
}

/// Random cq state with Dirichlet prior and random-rank mixed blocks.
pub fn random_cq_state<R: Rng + ?Sized>(rng: &mut R, labels: usize, dim: usize) -> CqState {
    let prior = random_distribution(rng, labels);
    let blocks = prior
        .iter()
        .map(|&q| {
            let rank = rng.random_range(1..=dim);
            let rho = random_density_matrix(rng, dim, rank);
            DensityMatrix::from_hermitian_unchecked(rho.hermitian().scale(q))
        })
        .collect();
    CqState::new(index_labels(labels), blocks).expect("normalized by construction")
}

/// Random pure-state ensemble; uniform prior when `uniform` is set.
pub fn random_pure_cq_state<R: Rng + ?Sized>(rng: &mut R, labels: usize, dim: usize, uniform: bool) -> CqState {
    let prior = if uniform { vec![1.0 / labels as f64; labels] } else { random_distribution(rng, labels) };
    let states: Vec<_> = (0..labels).map(|_| random_state_vector(rng, dim)).collect();
    CqState::from_pure_ensemble(index_labels(labels), &prior, &states).expect("normalized by construction")
}

/// Kraus operators of a random channel `C^{d_in} → C^{d_out}` drawn from a
/// random isometry into `C^{d_out} ⊗ C^{kraus}`.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, kraus: usize) -> Vec<ComplexMatrix> {
    assert!(d_out * kraus >= d_in, "environment too small for an isometry");
    let g = random_matrix(rng, d_out * kraus, d_in);
    let q = g.qr().q();
    (0..kraus).map(|k| q.rows(k * d_out, d_out).into_owned()).collect()
}
