//! Seeded extractors against no, classical and quantum side information,
//! and the witness separating classical from quantum side information.
//!
//! All errors are unhalved: `‖·‖₁` on distributions and trace norm on
//! operators, so they lie in `[0, 2]`. The seed is part of the output
//! (strong convention) unless a function says otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{conversion_lower_bound, conversion_lower_bound_additive, min_conversion_error};
use crate::discrimination::{bounded_storage_bound, guess_prob_quantum, pgm_povm, SolverOptions};
use crate::error::{Error, Result};
use crate::fingerprint::FingerprintScheme;
use crate::numerics::{ComplexMatrix, HermitianMatrix};
use crate::state::{index_labels, CqState, JointDistribution};

/// Seed spaces are enumerated exhaustively, so `d` is capped.
pub const MAX_SEED_BITS: u32 = 20;
/// Cap on the number of flat sources enumerated by [`plain_error`].
pub const MAX_FLAT_SOURCES: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorMap {
    /// `Ext(x, S) = S·x` over GF(2); the seed is an `m × n` matrix whose row
    /// `i` occupies seed bits `[i·n, (i+1)·n)`, and row `i` gives output bit `i`.
    InnerProduct,
    /// `table[seed][x]`.
    Table(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededExtractor {
    pub n: u32,
    pub d: u32,
    pub m: u32,
    pub map: ExtractorMap,
}

impl SeededExtractor {
    pub fn seeds(&self) -> usize {
        1 << self.d
    }

    pub fn inputs(&self) -> usize {
        1 << self.n
    }

    pub fn outputs(&self) -> usize {
        1 << self.m
    }

    pub fn eval(&self, x: usize, seed: usize) -> usize {
        match &self.map {
            ExtractorMap::InnerProduct => {
                let mask = (1usize << self.n) - 1;
                (0..self.m as usize).fold(0, |z, i| {
                    let row = (seed >> (i * self.n as usize)) & mask;
                    z | ((((row & x).count_ones() & 1) as usize) << i)
                })
            }
            ExtractorMap::Table(t) => t[seed][x],
        }
    }

    /// Output of every input under one seed.
    fn outputs_for(&self, seed: usize) -> Vec<usize> {
        (0..self.inputs()).map(|x| self.eval(x, seed)).collect()
    }
}

pub fn build_ip_extractor(n: u32, m: u32) -> Result<SeededExtractor> {
    if m == 0 || m > n || n > 12 {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= n <= 12, got n = {n}, m = {m}")));
    }
    let d = n * m;
    if d > MAX_SEED_BITS {
        return Err(Error::TooLarge(format!("seed length {d} exceeds {MAX_SEED_BITS} bits")));
    }
    Ok(SeededExtractor { n, d, m, map: ExtractorMap::InnerProduct })
}

/// Extractor from an explicit table `table[seed][x] ∈ [0, 2^m)`.
pub fn table_extractor(n: u32, d: u32, m: u32, table: Vec<Vec<usize>>) -> Result<SeededExtractor> {
    if d > MAX_SEED_BITS || n > 12 || m > n.max(1) * 2 {
        return Err(Error::TooLarge("extractor table too large".into()));
    }
    let ok = table.len() == 1 << d && table.iter().all(|r| r.len() == 1 << n && r.iter().all(|&z| z < 1 << m));
    if !ok {
        return Err(Error::InvalidParameter("extractor table is not a total function".into()));
    }
    Ok(SeededExtractor { n, d, m, map: ExtractorMap::Table(table) })
}

fn check_source(e: &SeededExtractor, nx: usize) -> Result<()> {
    if nx != e.inputs() {
        return Err(Error::DimensionMismatch { expected: e.inputs(), got: nx });
    }
    Ok(())
}

/// `‖U_m ⊗ U_d ⊗ Y − (Ext(X, S), S, Y)‖₁` exactly.
pub fn classical_proof_error(e: &SeededExtractor, j: &JointDistribution) -> Result<f64> {
    check_source(e, j.nx())?;
    let py = j.marginal_y();
    let (outputs, seeds) = (e.outputs(), e.seeds());
    let total: f64 = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let out = e.outputs_for(s);
            let mut mass = vec![0.0; outputs * j.ny()];
            for (x, &z) in out.iter().enumerate() {
                for y in 0..j.ny() {
                    mass[z * j.ny() + y] += j.get(x, y);
                }
            }
            mass.iter().enumerate().map(|(i, &p)| (p - py[i % j.ny()] / outputs as f64).abs()).sum::<f64>()
        })
        .sum();
    Ok(total / seeds as f64)
}

/// Seedless variant `‖U_m ⊗ Y − (Ext(X, U_d), Y)‖₁`.
pub fn classical_proof_error_seedless(e: &SeededExtractor, j: &JointDistribution) -> Result<f64> {
    check_source(e, j.nx())?;
    let py = j.marginal_y();
    let outputs = e.outputs();
    let mut mass = vec![0.0; outputs * j.ny()];
    for s in 0..e.seeds() {
        for (x, z) in e.outputs_for(s).into_iter().enumerate() {
            for y in 0..j.ny() {
                mass[z * j.ny() + y] += j.get(x, y);
            }
        }
    }
    let seeds = e.seeds() as f64;
    Ok(mass.iter().enumerate().map(|(i, &p)| (p / seeds - py[i % j.ny()] / outputs as f64).abs()).sum())
}

/// `‖U_m ⊗ U_d ⊗ ρ_E − (Ext ⊗ I)(ρ_XE)‖₁`, one trace norm per `(seed, output)` block.
pub fn quantum_proof_error(e: &SeededExtractor, rho: &CqState) -> Result<f64> {
    check_source(e, rho.len())?;
    if rho.dim() > 64 {
        return Err(Error::TooLarge(format!("side dimension {} exceeds 64", rho.dim())));
    }
    let outputs = e.outputs();
    let ideal = rho.side_state().matrix().unscale(outputs as f64);
    let dim = rho.dim();
    let total: f64 = (0..e.seeds())
        .into_par_iter()
        .map(|s| {
            let mut blocks = vec![ComplexMatrix::zeros(dim, dim); outputs];
            for (x, z) in e.outputs_for(s).into_iter().enumerate() {
                blocks[z] += rho.blocks()[x].matrix();
            }
            blocks.into_iter().map(|b| HermitianMatrix::from_hermitian_part(b - &ideal).trace_norm()).sum::<f64>()
        })
        .sum();
    Ok(total / e.seeds() as f64)
}

/// Next subset of the same size, as a bitmask (Gosper's hack).
fn next_combination(v: u64) -> u64 {
    let t = v | (v - 1);
    (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1))
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Worst strong error over sources with `H_min(X) ≥ k`, no side information.
///
/// The error is convex in the source and such sources are mixtures of flat
/// sources on `2^k` strings, so enumerating flat sources gives the maximum.
pub fn plain_error(e: &SeededExtractor, k: u32) -> Result<f64> {
    if k > e.n {
        return Err(Error::InvalidParameter(format!("min-entropy {k} exceeds {} bits", e.n)));
    }
    if e.n > 6 {
        return Err(Error::TooLarge("flat-source enumeration needs n <= 6".into()));
    }
    let universe = 1u64 << e.n;
    let size = 1u64 << k;
    let count = binomial(universe, size);
    if count > MAX_FLAT_SOURCES {
        return Err(Error::TooLarge(format!("{count} flat sources exceed {MAX_FLAT_SOURCES}")));
    }
    let tables: Vec<Vec<usize>> = (0..e.seeds()).map(|s| e.outputs_for(s)).collect();
    let uniform = 1.0 / e.outputs() as f64;
    let mut mask = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
    let mut sources = vec![mask];
    while (sources.len() as u64) < count {
        mask = next_combination(mask);
        sources.push(mask);
    }
    let worst = sources
        .par_iter()
        .map(|&support| {
            let total: f64 = tables
                .iter()
                .map(|out| {
                    let mut hits = vec![0u32; e.outputs()];
                    for (x, &z) in out.iter().enumerate() {
                        if support >> x & 1 == 1 {
                            hits[z] += 1;
                        }
                    }
                    hits.iter().map(|&h| (h as f64 / size as f64 - uniform).abs()).sum::<f64>()
                })
                .sum();
            total / e.seeds() as f64
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Entropy threshold and error bound of the classical-proof guarantee in
/// unhalved units: a plain error `ε` at `k` gives error at most `2ε` for
/// every source with `−log p_g(X|Y) ≥ k + log₂(2/ε)`.
pub fn classical_proof_guarantee(k: u32, plain: f64) -> (f64, f64) {
    (k as f64 + (2.0 / plain).log2(), 2.0 * plain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorAuditReport {
    pub family: String,
    /// Certified `−log₂ p_g(X|E)` of the source.
    pub k_claimed: f64,
    /// Error against the classical side information obtained by measuring
    /// `E` with the pretty good measurement.
    pub worst_error_classical: f64,
    pub error_quantum: f64,
}

/// Audits one cq source: quantum error, and the error after `E` is measured.
pub fn audit_cq_source(e: &SeededExtractor, rho: &CqState, family: &str) -> Result<ExtractorAuditReport> {
    let pg = guess_prob_quantum(rho, SolverOptions::default())?;
    let povm = pgm_povm(rho);
    let table = (0..rho.len())
        .map(|x| povm.iter().map(|p| rho.blocks()[x].hermitian().trace_product(p).max(0.0)).collect())
        .collect::<Vec<Vec<f64>>>();
    let mut table = table;
    let total: f64 = table.iter().flatten().sum();
    for row in &mut table {
        for p in row.iter_mut() {
            *p /= total;
        }
    }
    crate::sample::renormalize(&mut table);
    let measured = JointDistribution::new(index_labels(rho.len()), index_labels(povm.len()), table)?;
    Ok(ExtractorAuditReport {
        family: family.to_string(),
        k_claimed: 0.0 - pg.upper.log2(),
        worst_error_classical: classical_proof_error(e, &measured)?,
        error_quantum: quantum_proof_error(e, rho)?,
    })
}

/// Uniform cq state `2^{−n} Σ_x |x⟩⟨x| ⊗ φ_x`.
pub fn fingerprint_cq_state(scheme: &FingerprintScheme) -> Result<CqState> {
    let n = scheme.messages();
    CqState::from_pure_ensemble(
        (0..n).map(|x| scheme.message_label(x)).collect(),
        &vec![1.0 / n as f64; n],
        &scheme.states(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopsepWitness {
    pub n: u32,
    pub m_qubits: u32,
    pub delta: f64,
    pub k: u32,
    /// Primal and dual bounds on `p_g(X|E)`.
    pub pg_lower: f64,
    pub pg_upper: f64,
    pub bounded_storage: f64,
    /// `−log₂ pg_upper`.
    pub certified_min_entropy: f64,
    /// `certified_min_entropy ≥ k`.
    pub in_cq_k: bool,
    /// Every `η` with `p_g(X|Y) ≤ 1/4` has `‖C(η) − ρ‖₁` at least this.
    pub cc2_distance_lower: f64,
    /// The separation margin `cc2_distance_lower − 0`; positive means the
    /// state cannot be reached from `CC(2)` at all.
    pub separation_margin: f64,
}

/// Least conversion error from `CC(k)`: `2(1 − δ − (1−δ)2^{−k})`.
pub fn cc_distance_lower_bound(delta: f64, k: u32) -> Result<f64> {
    min_conversion_error(delta, 0.5f64.powi(k as i32))
}

/// Builds the uniform fingerprint cq state of `scheme` and certifies its
/// quantum min-entropy and its distance from `CC(2)`.
pub fn topsep_witness(scheme: &FingerprintScheme, k: u32) -> Result<TopsepWitness> {
    let rho = fingerprint_cq_state(scheme)?;
    let pg = guess_prob_quantum(&rho, SolverOptions::default())?;
    let bounded_storage = bounded_storage_bound(&rho, scheme.m_qubits())?;
    let pg_upper = pg.upper.min(bounded_storage);
    let certified_min_entropy = 0.0 - pg_upper.log2();
    let cc2_distance_lower = cc_distance_lower_bound(scheme.delta_measured(), 2)?;
    Ok(TopsepWitness {
        n: scheme.n_bits(),
        m_qubits: scheme.m_qubits(),
        delta: scheme.delta_measured(),
        k,
        pg_lower: pg.lower,
        pg_upper,
        bounded_storage,
        certified_min_entropy,
        in_cq_k: certified_min_entropy >= k as f64,
        cc2_distance_lower,
        separation_margin: cc2_distance_lower,
    })
}

/// Conversion bounds at an explicit `(δ, ε)` point, rational and additive form.
pub fn topsep_parameter_point(delta: f64, epsilon: f64) -> Result<(f64, f64)> {
    Ok((conversion_lower_bound(delta, epsilon)?, conversion_lower_bound_additive(delta, epsilon)?))
}
