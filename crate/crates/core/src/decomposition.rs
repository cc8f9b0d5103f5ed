//! Subset-uniform canonical form of classical side information, and bounds on
//! the smooth conversion parameter.
//!
//! Any joint distribution `p(x, y)` can be rewritten as side information that
//! names a subset `S` of messages on which `X` is uniform, followed by a
//! classical channel `C(y|S)`, without changing `p_g(X|Y)`. The atoms are
//!
//! ```text
//! p_S(y) = min_{x∈S} p(x, y) − Σ_{S ⊊ S'} p_{S'}(y),   p̂_S = Σ_y p_S(y)
//! ```
//!
//! and for every `y` the subsets with `p_S(y) > 0` form a chain, namely the
//! level sets `{x : p(x, y) ≥ v}` of the column.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianMatrix};
use crate::state::{fidelity, CqState, DensityMatrix, JointDistribution};

/// Largest `|X|` for which the full subset lattice is enumerated.
pub const MAX_LATTICE_ALPHABET: usize = 12;
/// Negative lattice values above this are rounding residue and clamp to zero.
pub const CLAMP_TOL: f64 = 1e-12;
/// Positive contributions below this are rounding residue and are dropped.
const RESIDUE: f64 = 1e-15;
/// Tolerance on the decomposition invariants.
pub const INVARIANT_TOL: f64 = 1e-12;
/// Tolerance on reconstructing the source table through the channel.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Subset bitmask: bit `x` is set when message `x` belongs to the subset.
pub type SubsetMask = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub subset: SubsetMask,
    pub weight: f64,
}

impl Atom {
    pub fn size(&self) -> u32 {
        self.subset.count_ones()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.subset >> x & 1 == 1
    }
}

/// Weighted family `{(S, p_S)}` with reconstruction channel `C(y|S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetDecomposition {
    pub nx: usize,
    pub ny: usize,
    /// Sorted by subset mask; equal subsets from different `y` are merged.
    pub atoms: Vec<Atom>,
    /// `channel[S][y] = C(y|S)`, sparse.
    pub channel: BTreeMap<SubsetMask, BTreeMap<usize, f64>>,
}

/// `p_S(y)` before merging over `y`.
type Contributions = BTreeMap<SubsetMask, BTreeMap<usize, f64>>;

fn assemble(nx: usize, ny: usize, contributions: Contributions) -> SubsetDecomposition {
    let mut atoms = Vec::with_capacity(contributions.len());
    let mut channel = BTreeMap::new();
    for (subset, per_y) in contributions {
        let weight: f64 = per_y.values().sum();
        if weight <= 0.0 {
            continue;
        }
        atoms.push(Atom { subset, weight });
        channel.insert(subset, per_y.into_iter().map(|(y, p)| (y, p / weight)).collect());
    }
    SubsetDecomposition { nx, ny, atoms, channel }
}

fn add_contribution(c: &mut Contributions, subset: SubsetMask, y: usize, p: f64) {
    if p > RESIDUE {
        *c.entry(subset).or_default().entry(y).or_insert(0.0) += p;
    }
}

/// Literal top-down recursion over the full subset lattice.
pub fn canonicalize_lattice(j: &JointDistribution) -> Result<SubsetDecomposition> {
    let nx = j.nx();
    if nx > MAX_LATTICE_ALPHABET {
        return Err(Error::TooLarge(format!("|X| = {nx} exceeds the lattice limit {MAX_LATTICE_ALPHABET}")));
    }
    let full: SubsetMask = (1 << nx) - 1;
    let size = 1usize << nx;
    let mut order: Vec<SubsetMask> = (1..=full).collect();
    order.sort_by_key(|s| std::cmp::Reverse(s.count_ones()));

    let mut contributions = Contributions::new();
    let mut min_in = vec![f64::INFINITY; size];
    let mut value = vec![0.0f64; size];
    for y in 0..j.ny() {
        for s in 1..size {
            let low = s.trailing_zeros() as usize;
            min_in[s] = min_in[s & (s - 1)].min(j.get(low, y));
        }
        for &s in &order {
            let complement = full & !s;
            let mut above = 0.0;
            // every nonempty t ⊆ complement gives a strict superset s | t
            let mut t = complement;
            while t != 0 {
                above += value[(s | t) as usize];
                t = (t - 1) & complement;
            }
            let mut p = min_in[s as usize] - above;
            if p < 0.0 {
                if p < -CLAMP_TOL {
                    return Err(Error::Numerical(format!("lattice value {p:e} for subset {s:#b} at y = {y}")));
                }
                p = 0.0;
            }
            value[s as usize] = p;
            add_contribution(&mut contributions, s, y, p);
        }
    }
    Ok(assemble(nx, j.ny(), contributions))
}

/// Level-set construction: for each `y` the atoms are `{x : p(x,y) ≥ v}` with
/// weights equal to the gaps between consecutive distinct values.
pub fn canonicalize_levelsets(j: &JointDistribution) -> Result<SubsetDecomposition> {
    let nx = j.nx();
    if nx > 32 {
        return Err(Error::TooLarge(format!("|X| = {nx} does not fit a 32-bit subset mask")));
    }
    let mut contributions = Contributions::new();
    let mut column: Vec<(usize, f64)> = Vec::with_capacity(nx);
    for y in 0..j.ny() {
        column.clear();
        column.extend((0..nx).map(|x| (x, j.get(x, y))).filter(|&(_, p)| p > 0.0));
        column.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut mask: SubsetMask = 0;
        let mut i = 0;
        while i < column.len() {
            let v = column[i].1;
            while i < column.len() && column[i].1 == v {
                mask |= 1 << column[i].0;
                i += 1;
            }
            let next = column.get(i).map_or(0.0, |e| e.1);
            add_contribution(&mut contributions, mask, y, v - next);
        }
    }
    Ok(assemble(nx, j.ny(), contributions))
}

impl SubsetDecomposition {
    /// `Σ_S p_S`, the guessing probability of `X` given the subset.
    pub fn guess_prob(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `Σ_S p_S |S|`; equals one for a normalized source.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.size() as f64).sum()
    }

    /// `q_x = Σ_{S∋x} p_S`.
    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.nx).map(|x| self.atoms.iter().filter(|a| a.contains(x)).map(|a| a.weight).sum()).collect()
    }

    /// `Σ_S p'(x, S) C(y|S)`, the table obtained by pushing the channel through.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let mut table = vec![vec![0.0; self.ny]; self.nx];
        for a in &self.atoms {
            let Some(row) = self.channel.get(&a.subset) else { continue };
            for x in (0..self.nx).filter(|&x| a.contains(x)) {
                for (&y, &c) in row {
                    table[x][y] += a.weight * c;
                }
            }
        }
        table
    }

    /// For every `y`, the subsets with positive `p_S(y)` are nested.
    pub fn chains_per_y(&self) -> bool {
        (0..self.ny).all(|y| {
            let mut sets: Vec<SubsetMask> = self
                .atoms
                .iter()
                .filter(|a| self.channel.get(&a.subset).and_then(|r| r.get(&y)).is_some_and(|&c| c > 0.0))
                .map(|a| a.subset)
                .collect();
            sets.sort_by_key(|s| s.count_ones());
            sets.windows(2).all(|w| w[0] & w[1] == w[0])
        })
    }

    pub fn weight_of(&self, subset: SubsetMask) -> f64 {
        self.atoms.iter().find(|a| a.subset == subset).map_or(0.0, |a| a.weight)
    }

    pub fn to_json(&self) -> DecompositionJson {
        DecompositionJson {
            nx: self.nx,
            ny: self.ny,
            atoms: self.atoms.iter().map(|a| (a.subset, a.weight)).collect(),
            channel: self.channel.clone(),
        }
    }
}

/// Export format: atoms as `(bitmask, weight)` pairs, channel as nested maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionJson {
    pub nx: usize,
    pub ny: usize,
    pub atoms: Vec<(SubsetMask, f64)>,
    pub channel: BTreeMap<SubsetMask, BTreeMap<usize, f64>>,
}

/// Whether two decompositions have the same atoms, weights within `tol`.
pub fn atoms_agree(a: &SubsetDecomposition, b: &SubsetDecomposition, tol: f64) -> bool {
    let mut keys: Vec<SubsetMask> = a.atoms.iter().chain(&b.atoms).map(|x| x.subset).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter().all(|s| (a.weight_of(s) - b.weight_of(s)).abs() <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalReport {
    /// `Σ_S p_S = Σ_y max_x p(x, y)`.
    pub guess_prob_preserved: bool,
    /// Pushing the channel through reproduces the source entrywise.
    pub channel_reconstructs: bool,
    /// Atoms are nonempty subsets with nonnegative weight, channel rows are
    /// distributions, and the uniform-on-subset form has the source marginal.
    pub subset_uniform: bool,
    pub guess_prob_error: f64,
    pub reconstruction_error: f64,
    pub violations: Vec<String>,
}

impl CanonicalReport {
    pub fn all_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the three canonical-form properties of `d` against its source `j`.
pub fn verify_canonical_properties(j: &JointDistribution, d: &SubsetDecomposition) -> CanonicalReport {
    let mut violations = Vec::new();

    let guess_prob_error = (d.guess_prob() - j.guess_prob()).abs();
    let guess_prob_preserved = guess_prob_error <= INVARIANT_TOL;
    if !guess_prob_preserved {
        violations.push(format!("guessing probability off by {guess_prob_error:e}"));
    }

    let shape_ok = d.nx == j.nx() && d.ny == j.ny();
    let reconstruction_error = if shape_ok {
        d.reconstruct()
            .iter()
            .zip(&j.table)
            .flat_map(|(r, s)| r.iter().zip(s).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let channel_reconstructs = reconstruction_error <= RECONSTRUCTION_TOL;
    if !channel_reconstructs {
        violations.push(format!("channel reconstruction off by {reconstruction_error:e}"));
    }

    let mut form = Vec::new();
    let full: u64 = (1u64 << d.nx) - 1;
    for a in &d.atoms {
        if a.subset == 0 || u64::from(a.subset) & !full != 0 {
            form.push(format!("atom {:#b} is not a nonempty subset of X", a.subset));
        }
        if a.weight.is_nan() || a.weight < 0.0 {
            form.push(format!("atom {:#b} has negative weight", a.subset));
        }
        match d.channel.get(&a.subset) {
            Some(row)
                if row.values().all(|&c| c >= 0.0) && (row.values().sum::<f64>() - 1.0).abs() <= INVARIANT_TOL => {}
            _ => form.push(format!("channel row for {:#b} is not a distribution", a.subset)),
        }
    }
    if (d.total_mass() - 1.0).abs() > INVARIANT_TOL {
        form.push(format!("Σ p_S |S| = {}", d.total_mass()));
    }
    if shape_ok {
        let marginal_gap = d.marginal_x().iter().zip(j.marginal_x()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if marginal_gap > INVARIANT_TOL {
            form.push(format!("marginal of X off by {marginal_gap:e}"));
        }
    }
    let subset_uniform = form.is_empty();
    violations.extend(form);

    CanonicalReport {
        guess_prob_preserved,
        channel_reconstructs,
        subset_uniform,
        guess_prob_error,
        reconstruction_error,
        violations,
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("overlap δ = {delta} must lie in [0, 1)")));
    }
    Ok(())
}

/// Certified lower bound on `p_↓^ε` for any pure ensemble with maximum
/// overlap `δ`: rearranging `1 − ε/2 ≤ (1−δ)p + δ` gives
/// `p ≥ (1 − ε/2 − δ)/(1 − δ)`, clamped to `[0, 1]`.
pub fn conversion_lower_bound(delta: f64, epsilon: f64) -> Result<f64> {
    check_delta(delta)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter("ε must be nonnegative".into()));
    }
    Ok(((1.0 - epsilon / 2.0 - delta) / (1.0 - delta)).clamp(0.0, 1.0))
}

/// The looser additive form `1 − δ − ε/2`, clamped to `[0, 1]`.
pub fn conversion_lower_bound_additive(delta: f64, epsilon: f64) -> Result<f64> {
    check_delta(delta)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter("ε must be nonnegative".into()));
    }
    Ok((1.0 - delta - epsilon / 2.0).clamp(0.0, 1.0))
}

/// Smallest error `ε = 2(1 − δ − (1−δ)p)` at which classical side information
/// with guessing probability `p` can reproduce an ensemble of overlap `δ`.
pub fn min_conversion_error(delta: f64, guess_prob: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("overlap δ = {delta} must lie in [0, 1]")));
    }
    Ok((2.0 * (1.0 - delta - (1.0 - delta) * guess_prob)).max(0.0))
}

/// How the feasible family for [`conversion_upper_bound`] is chosen.
#[derive(Debug, Clone)]
pub enum ConversionFamily {
    /// Explicit clusters of label indices.
    Clusters(Vec<Vec<usize>>),
    /// Greedy complete-linkage clustering: a label joins the first cluster
    /// whose members all have root fidelity at least the threshold with it.
    FidelityThreshold(f64),
    /// Subsets and weights of a canonical decomposition.
    Decomposition(SubsetDecomposition),
}

/// A certified point `(p, ε)` on the conversion trade-off curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionPoint {
    pub guess_prob: f64,
    pub epsilon: f64,
    pub atoms: Vec<Atom>,
}

fn greedy_clusters(rho: &CqState, threshold: f64) -> Vec<Vec<usize>> {
    let normalized: Vec<Option<HermitianMatrix>> =
        rho.blocks().iter().map(|b| (b.trace() > 0.0).then(|| b.hermitian().scale(1.0 / b.trace()))).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for x in 0..rho.len() {
        let joins = |c: &Vec<usize>| {
            c.iter().all(|&y| match (&normalized[x], &normalized[y]) {
                (Some(a), Some(b)) => fidelity(a, b) >= threshold,
                _ => true,
            })
        };
        match clusters.iter_mut().find(|c| joins(c)) {
            Some(c) => c.push(x),
            None => clusters.push(vec![x]),
        }
    }
    clusters
}

fn block_average(rho: &CqState, subset: SubsetMask) -> HermitianMatrix {
    let dim = rho.dim();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for (x, b) in rho.blocks().iter().enumerate() {
        if subset >> x & 1 == 1 {
            acc += b.matrix();
        }
    }
    let tr = acc.trace().re;
    if tr > 0.0 {
        HermitianMatrix::from_hermitian_part(acc.unscale(tr))
    } else {
        HermitianMatrix::identity(dim).scale(1.0 / dim as f64)
    }
}

/// `Σ_x ‖Σ_{S∋x} p_S ρ̂_S − ρ_x‖₁` for the given atoms and states.
pub fn conversion_error(rho: &CqState, atoms: &[Atom], states: &[HermitianMatrix]) -> f64 {
    let dim = rho.dim();
    rho.blocks()
        .iter()
        .enumerate()
        .map(|(x, b)| {
            let mut acc = ComplexMatrix::zeros(dim, dim);
            for (a, s) in atoms.iter().zip(states) {
                if a.contains(x) {
                    acc += s.matrix().scale(a.weight);
                }
            }
            HermitianMatrix::from_hermitian_part(acc - b.matrix()).trace_norm()
        })
        .sum()
}

/// Evaluates a feasible point of the conversion minimization exactly.
///
/// Cluster weights are the mean prior over the cluster, and `ρ̂_S` is the
/// normalized block average over `S`.
pub fn conversion_upper_bound(rho: &CqState, family: &ConversionFamily) -> Result<ConversionPoint> {
    if rho.len() > 32 {
        return Err(Error::TooLarge("more than 32 labels".into()));
    }
    let prior = rho.prior();
    let atoms: Vec<Atom> = match family {
        ConversionFamily::Decomposition(d) => {
            if d.nx != rho.len() {
                return Err(Error::DimensionMismatch { expected: rho.len(), got: d.nx });
            }
            d.atoms.clone()
        }
        ConversionFamily::Clusters(_) | ConversionFamily::FidelityThreshold(_) => {
            let clusters = match family {
                ConversionFamily::Clusters(c) => c.clone(),
                ConversionFamily::FidelityThreshold(t) => greedy_clusters(rho, *t),
                ConversionFamily::Decomposition(_) => unreachable!(),
            };
            if clusters.is_empty() || clusters.iter().any(|c| c.is_empty()) {
                return Err(Error::InvalidParameter("empty clustering".into()));
            }
            clusters
                .iter()
                .map(|c| {
                    if let Some(&bad) = c.iter().find(|&&x| x >= rho.len()) {
                        return Err(Error::InvalidParameter(format!("label index {bad} out of range")));
                    }
                    let subset = c.iter().fold(0, |m, &x| m | 1 << x);
                    let weight = c.iter().map(|&x| prior[x]).sum::<f64>() / c.len() as f64;
                    Ok(Atom { subset, weight })
                })
                .collect::<Result<_>>()?
        }
    };
    let states: Vec<HermitianMatrix> = atoms.iter().map(|a| block_average(rho, a.subset)).collect();
    let epsilon = conversion_error(rho, &atoms, &states);
    Ok(ConversionPoint { guess_prob: atoms.iter().map(|a| a.weight).sum(), epsilon, atoms })
}

/// The normalized block average as a density matrix, for reporting.
pub fn cluster_state(rho: &CqState, subset: SubsetMask) -> DensityMatrix {
    DensityMatrix::from_hermitian_unchecked(block_average(rho, subset))
}
