//! Forgery attacks on the verification measurement `V = Σ_x |x⟩⟨x| ⊗ φ_x`
//! under classical leakage, and the audits of the resulting bounds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::FingerprintScheme;
use crate::numerics::{eig_max, ComplexMatrix, HermitianMatrix, ASSERT_TOL};
use crate::state::{bit_labels, index_labels, DensityMatrix, JointDistribution, StateVector};

/// Upper limit on `messages × dim` for materialized fingerprint ensembles.
pub const MAX_ENSEMBLE_ENTRIES: usize = 1 << 22;

/// How the side information `Y` is generated from `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageKind {
    /// The `k` most significant bits of `x`.
    PrefixBits(u32),
    /// `y = f(x)` for a table `f`.
    Deterministic(Vec<usize>),
    /// Rows `p(y|x)`.
    Stochastic(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageModel {
    pub kind: LeakageKind,
    /// Message prior; uniform when absent.
    pub prior: Option<Vec<f64>>,
}

impl LeakageModel {
    pub fn prefix(k: u32) -> Self {
        Self { kind: LeakageKind::PrefixBits(k), prior: None }
    }

    pub fn none() -> Self {
        Self::prefix(0)
    }

    pub fn deterministic(map: Vec<usize>) -> Self {
        Self { kind: LeakageKind::Deterministic(map), prior: None }
    }

    pub fn stochastic(rows: Vec<Vec<f64>>) -> Self {
        Self { kind: LeakageKind::Stochastic(rows), prior: None }
    }

    pub fn with_prior(mut self, prior: Vec<f64>) -> Self {
        self.prior = Some(prior);
        self
    }

    /// Joint table `p(x, y) = q_x p(y|x)` over `2^n_bits` messages.
    pub fn joint(&self, n_bits: u32) -> Result<JointDistribution> {
        let nx = 1usize << n_bits;
        let prior = match &self.prior {
            None => vec![1.0 / nx as f64; nx],
            Some(p) if p.len() == nx => p.clone(),
            Some(p) => return Err(Error::DimensionMismatch { expected: nx, got: p.len() }),
        };
        let (y_labels, table) = match &self.kind {
            LeakageKind::PrefixBits(k) => {
                if *k > n_bits {
                    return Err(Error::InvalidParameter(format!("cannot leak {k} of {n_bits} bits")));
                }
                let ny = 1usize << k;
                let table = (0..nx)
                    .map(|x| {
                        let mut row = vec![0.0; ny];
                        row[x >> (n_bits - k)] = prior[x];
                        row
                    })
                    .collect();
                (bit_labels(*k), table)
            }
            LeakageKind::Deterministic(f) => {
                if f.len() != nx {
                    return Err(Error::DimensionMismatch { expected: nx, got: f.len() });
                }
                let ny = f.iter().max().map_or(1, |m| m + 1);
                let table = (0..nx)
                    .map(|x| {
                        let mut row = vec![0.0; ny];
                        row[f[x]] = prior[x];
                        row
                    })
                    .collect();
                (index_labels(ny), table)
            }
            LeakageKind::Stochastic(rows) => {
                if rows.len() != nx {
                    return Err(Error::DimensionMismatch { expected: nx, got: rows.len() });
                }
                let ny = rows.first().map_or(0, Vec::len);
                for r in rows {
                    if r.len() != ny
                        || r.iter().any(|&p| p.is_nan() || p < 0.0)
                        || (r.iter().sum::<f64>() - 1.0).abs() > 1e-12
                    {
                        return Err(Error::InvalidDistribution(
                            "leakage rows must be distributions of equal length".into(),
                        ));
                    }
                }
                let table = rows.iter().zip(&prior).map(|(r, &q)| r.iter().map(|p| p * q).collect()).collect();
                (index_labels(ny), table)
            }
        };
        JointDistribution::new(bit_labels(n_bits), y_labels, table)
    }
}

/// Forgery state for one value of `y`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forgery {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl Forgery {
    pub fn dim(&self) -> usize {
        match self {
            Forgery::Pure(s) => s.dim(),
            Forgery::Mixed(m) => m.dim(),
        }
    }

    /// `⟨φ|μ|φ⟩`.
    pub fn acceptance(&self, phi: &StateVector) -> f64 {
        match self {
            Forgery::Pure(s) => s.inner(phi).norm_sqr(),
            Forgery::Mixed(m) => m.expectation(phi),
        }
    }
}

/// Map `y → μ_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgeryStrategy {
    pub per_y: Vec<Forgery>,
}

impl ForgeryStrategy {
    pub fn constant(f: Forgery, ny: usize) -> Self {
        Self { per_y: vec![f; ny] }
    }
}

/// Fingerprint states together with the leaked joint distribution.
#[derive(Debug, Clone)]
pub struct AttackInstance {
    pub states: Vec<StateVector>,
    pub joint: JointDistribution,
    pub delta: f64,
}

fn pairwise_delta(states: &[StateVector]) -> f64 {
    (0..states.len())
        .into_par_iter()
        .map(|i| ((i + 1)..states.len()).map(|j| states[i].inner(&states[j]).norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

impl AttackInstance {
    pub fn new(scheme: &FingerprintScheme, leak: &LeakageModel) -> Result<Self> {
        if scheme.messages().saturating_mul(scheme.dim()) > MAX_ENSEMBLE_ENTRIES {
            return Err(Error::TooLarge(format!(
                "{} fingerprints of dimension {} exceed the dense ensemble limit",
                scheme.messages(),
                scheme.dim()
            )));
        }
        let joint = leak.joint(scheme.n_bits())?;
        Ok(Self { states: scheme.states(), joint, delta: scheme.delta_measured() })
    }

    /// Arbitrary pure ensemble; `δ` is recomputed pairwise.
    pub fn from_states(states: Vec<StateVector>, joint: JointDistribution) -> Result<Self> {
        if states.len() != joint.nx() {
            return Err(Error::DimensionMismatch { expected: joint.nx(), got: states.len() });
        }
        if let Some(bad) = states.iter().find(|s| s.dim() != states[0].dim()) {
            return Err(Error::DimensionMismatch { expected: states[0].dim(), got: bad.dim() });
        }
        let delta = pairwise_delta(&states);
        Ok(Self { states, joint, delta })
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, StateVector::dim)
    }

    /// `e_s = Σ_{x,y} p(x,y) ⟨φ_x|μ_y|φ_x⟩`.
    pub fn passing_probability(&self, forgery: &ForgeryStrategy) -> Result<f64> {
        if forgery.per_y.len() != self.joint.ny() {
            return Err(Error::DimensionMismatch { expected: self.joint.ny(), got: forgery.per_y.len() });
        }
        if let Some(f) = forgery.per_y.iter().find(|f| f.dim() != self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: f.dim() });
        }
        Ok((0..self.joint.ny())
            .map(|y| {
                (0..self.joint.nx())
                    .filter(|&x| self.joint.get(x, y) > 0.0)
                    .map(|x| self.joint.get(x, y) * forgery.per_y[y].acceptance(&self.states[x]))
                    .sum::<f64>()
            })
            .sum())
    }

    /// `λ_max(Σ_x w_x φ_x)` with its eigenvector, computed on whichever of
    /// `B B†` or `B† B` is smaller, `B = [√w_x φ_x]`.
    fn top_eigen(&self, weights: &[(usize, f64)]) -> (f64, StateVector) {
        let dim = self.dim();
        if weights.is_empty() {
            return (0.0, self.states[0].clone());
        }
        let b = ComplexMatrix::from_fn(dim, weights.len(), |i, c| {
            let (x, w) = weights[c];
            self.states[x].amplitudes()[i] * w.sqrt()
        });
        if weights.len() < dim {
            let gram = HermitianMatrix::from_hermitian_part(b.adjoint() * &b);
            let (value, u) = eig_max(&gram);
            let lifted = &b * u.amplitudes();
            match StateVector::normalize(lifted) {
                Ok(psi) => (value, psi),
                Err(_) => (value, self.states[weights[0].0].clone()),
            }
        } else {
            eig_max(&HermitianMatrix::from_hermitian_part(&b * b.adjoint()))
        }
    }

    fn column(&self, y: usize) -> Vec<(usize, f64)> {
        (0..self.joint.nx()).map(|x| (x, self.joint.get(x, y))).filter(|&(_, p)| p > 0.0).collect()
    }

    /// Optimal forgery: `e_s` is linear in each `μ_y` separately, so the best
    /// choice is the top eigenvector of `Σ_x p(x,y) φ_x` for every `y`, and
    /// `e_s* = Σ_y λ_max(Σ_x p(x,y) φ_x)`. No SDP is needed.
    pub fn optimal_forgery(&self) -> (ForgeryStrategy, f64) {
        let per_y: Vec<(f64, StateVector)> =
            (0..self.joint.ny()).into_par_iter().map(|y| self.top_eigen(&self.column(y))).collect();
        let value = per_y.iter().map(|(v, _)| v).sum();
        (ForgeryStrategy { per_y: per_y.into_iter().map(|(_, s)| Forgery::Pure(s)).collect() }, value)
    }

    /// Submit the fingerprint of the posterior argmax.
    pub fn guess_then_hash(&self) -> (ForgeryStrategy, f64) {
        let per_y: Vec<Forgery> = (0..self.joint.ny())
            .map(|y| {
                let best =
                    (0..self.joint.nx())
                        .fold(0, |b, x| if self.joint.get(x, y) > self.joint.get(b, y) { x } else { b });
                Forgery::Pure(self.states[best].clone())
            })
            .collect();
        let strategy = ForgeryStrategy { per_y };
        let value = self.passing_probability(&strategy).expect("consistent dimensions");
        (strategy, value)
    }

    /// Best single fingerprint `φ_{x₀}` submitted regardless of `y`.
    pub fn best_fixed_fingerprint(&self) -> (usize, f64) {
        let prior = self.joint.marginal_x();
        let support: Vec<usize> = (0..prior.len()).filter(|&x| prior[x] > 0.0).collect();
        (0..self.states.len())
            .into_par_iter()
            .map(|x0| {
                let v: f64 =
                    support.iter().map(|&x| prior[x] * self.states[x].inner(&self.states[x0]).norm_sqr()).sum();
                (x0, v)
            })
            .reduce(|| (0, f64::MIN), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
    }

    /// Best `y`-independent forgery: `λ_max(Σ_x q_x φ_x)`.
    pub fn best_fixed_state(&self) -> f64 {
        let prior = self.joint.marginal_x();
        let weights: Vec<(usize, f64)> = prior.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
        self.top_eigen(&weights).0
    }

    /// Full audit. Never fails; see [`separation_audit`] for the checked form.
    pub fn report(&self) -> AttackReport {
        let (_, e_s_star) = self.optimal_forgery();
        let p_g = self.joint.guess_prob();
        let delta = self.delta;
        let bound = (1.0 - delta) * p_g + delta;
        let mut baselines = BTreeMap::new();
        baselines.insert("guess_then_hash".to_string(), self.guess_then_hash().1);
        baselines.insert("fixed_fingerprint".to_string(), self.best_fixed_fingerprint().1);
        baselines.insert("fixed_optimal".to_string(), self.best_fixed_state());
        let best_baseline = baselines.values().copied().fold(f64::MIN, f64::max);
        let nx = self.joint.nx() as f64;
        AttackReport {
            n: nx.log2(),
            m: (self.dim() as f64).log2().ceil() as u32,
            dim: self.dim(),
            delta,
            k_leak: nx.log2() + p_g.log2(),
            p_g,
            e_s_star,
            bound,
            margin: bound - e_s_star,
            baselines,
            holds: e_s_star <= bound + ASSERT_TOL && e_s_star >= best_baseline - ASSERT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    /// `log₂ |X|`.
    pub n: f64,
    /// Qubits of the fingerprint register, `⌈log₂ dim⌉`.
    pub m: u32,
    pub dim: usize,
    pub delta: f64,
    /// `n − H_min(X|Y)`.
    pub k_leak: f64,
    pub p_g: f64,
    pub e_s_star: f64,
    /// `(1−δ) p_g + δ`.
    pub bound: f64,
    pub margin: f64,
    pub baselines: BTreeMap<String, f64>,
    /// `max(baselines) ≤ e_s* ≤ bound`, within tolerance.
    pub holds: bool,
}

/// Flat CSV projection of an [`AttackReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackCsvRow {
    pub n: f64,
    pub m: u32,
    pub delta: f64,
    pub k_leak: f64,
    pub p_g: f64,
    pub e_s_star: f64,
    pub bound: f64,
    pub margin: f64,
}

impl From<&AttackReport> for AttackCsvRow {
    fn from(r: &AttackReport) -> Self {
        Self {
            n: r.n,
            m: r.m,
            delta: r.delta,
            k_leak: r.k_leak,
            p_g: r.p_g,
            e_s_star: r.e_s_star,
            bound: r.bound,
            margin: r.margin,
        }
    }
}

pub fn passing_probability(scheme: &FingerprintScheme, leak: &LeakageModel, forgery: &ForgeryStrategy) -> Result<f64> {
    AttackInstance::new(scheme, leak)?.passing_probability(forgery)
}

pub fn optimal_forgery(scheme: &FingerprintScheme, leak: &LeakageModel) -> Result<(ForgeryStrategy, f64)> {
    Ok(AttackInstance::new(scheme, leak)?.optimal_forgery())
}

/// `e_s` of the guess-then-hash, best fixed fingerprint and best fixed state strategies.
pub fn baseline_strategies(scheme: &FingerprintScheme, leak: &LeakageModel) -> Result<BTreeMap<String, f64>> {
    Ok(AttackInstance::new(scheme, leak)?.report().baselines)
}

/// Computes the report and fails with [`Error::AuditViolation`] when the
/// separation bound or the baseline ordering is broken.
pub fn separation_audit(scheme: &FingerprintScheme, leak: &LeakageModel) -> Result<AttackReport> {
    audit_instance(&AttackInstance::new(scheme, leak)?)
}

pub fn audit_instance(instance: &AttackInstance) -> Result<AttackReport> {
    let r = instance.report();
    if r.holds {
        Ok(r)
    } else {
        Err(Error::AuditViolation(format!(
            "e_s* = {} against bound {} and baselines {:?}",
            r.e_s_star, r.bound, r.baselines
        )))
    }
}

/// Optimal forgery against a classical tag `h(x)`: `Σ_y max_t Σ_{x: h(x)=t} p(x, y)`.
pub fn classical_hash_attack(hash: &[usize], j: &JointDistribution) -> Result<f64> {
    if hash.len() != j.nx() {
        return Err(Error::DimensionMismatch { expected: j.nx(), got: hash.len() });
    }
    let tags = hash.iter().max().map_or(0, |t| t + 1);
    Ok((0..j.ny())
        .map(|y| {
            let mut mass = vec![0.0; tags];
            for (x, &t) in hash.iter().enumerate() {
                mass[t] += j.get(x, y);
            }
            mass.into_iter().fold(0.0, f64::max)
        })
        .sum())
}

/// Truncation hash `h(x)` = first `m` bits of an `n`-bit `x`.
pub fn truncation_hash(n: u32, m: u32) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::InvalidParameter(format!("tag length {m} exceeds message length {n}")));
    }
    Ok((0..1usize << n).map(|x| x >> (n - m)).collect())
}

/// Uniform `x`, the adversary learns the first `k` bits of the truncation
/// tag and guesses the remaining `m − k` uniformly. Evaluated exhaustively.
pub fn prefix_guessing_success(n: u32, m: u32, k: u32) -> Result<f64> {
    let tags = truncation_hash(n, m)?;
    if k > m {
        return Err(Error::InvalidParameter(format!("cannot leak {k} of {m} tag bits")));
    }
    let unknown = m - k;
    let guesses = 1usize << unknown;
    let hits: usize = tags
        .iter()
        .map(|&t| {
            let leaked = t >> unknown;
            (0..guesses).filter(|&g| (leaked << unknown | g) == t).count()
        })
        .sum();
    Ok(hits as f64 / (guesses * tags.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::{build_hadamard, build_random_linear};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn honest_prover_passes() {
        let s = build_hadamard(3).unwrap();
        let inst = AttackInstance::new(&s, &LeakageModel::prefix(3)).unwrap();
        let honest = ForgeryStrategy { per_y: s.states().into_iter().map(Forgery::Pure).collect() };
        assert!((inst.passing_probability(&honest).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_forgery() {
        let s = build_hadamard(2).unwrap();
        let leak = LeakageModel::none();
        let f = ForgeryStrategy::constant(Forgery::Mixed(DensityMatrix::maximally_mixed(4)), 1);
        assert!((passing_probability(&s, &leak, &f).unwrap() - 0.25).abs() < 1e-12);
        let fixed = ForgeryStrategy::constant(Forgery::Pure(s.state(2)), 1);
        assert!((passing_probability(&s, &leak, &fixed).unwrap() - 0.25).abs() < 1e-12);
        let wrong = ForgeryStrategy::constant(Forgery::Pure(s.state(0)), 2);
        assert!(passing_probability(&s, &leak, &wrong).is_err());
    }

    #[test]
    fn orthonormal_prefix_leak() {
        let s = build_hadamard(2).unwrap();
        let (_, v) = optimal_forgery(&s, &LeakageModel::prefix(1)).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let s3 = build_hadamard(3).unwrap();
        let (_, v3) = optimal_forgery(&s3, &LeakageModel::prefix(1)).unwrap();
        assert!((v3 - 0.25).abs() < 1e-12);
        let (_, v32) = optimal_forgery(&s3, &LeakageModel::prefix(2)).unwrap();
        assert!((v32 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn optimal_value_is_achieved_by_the_returned_strategy() {
        let s = build_random_linear(5, 32, 0.5, 3).unwrap();
        let inst = AttackInstance::new(&s, &LeakageModel::prefix(2)).unwrap();
        let (strategy, value) = inst.optimal_forgery();
        assert!((inst.passing_probability(&strategy).unwrap() - value).abs() < 1e-10);
    }

    #[test]
    fn gram_and_dense_routes_agree() {
        // support 2^(6-1) = 32 equals dim 32 for k = 1 (dense), and 16 < 32 for k = 2 (Gram)
        let s = build_random_linear(6, 32, 0.7, 9).unwrap();
        let inst = AttackInstance::new(&s, &LeakageModel::prefix(1)).unwrap();
        for y in 0..2 {
            let col = inst.column(y);
            let (gram, _) = inst.top_eigen(&col[..16]);
            let b = ComplexMatrix::from_fn(32, 16, |i, c| inst.states[col[c].0].amplitudes()[i] * col[c].1.sqrt());
            let dense = HermitianMatrix::from_hermitian_part(&b * b.adjoint()).lambda_max();
            assert!((gram - dense).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_zero_meets_guessing_probability() {
        let s = build_hadamard(4).unwrap();
        for k in 0..=4 {
            let r = separation_audit(&s, &LeakageModel::prefix(k)).unwrap();
            assert!((r.e_s_star - r.p_g).abs() < 1e-9);
            assert!((r.baselines["guess_then_hash"] - r.p_g).abs() < 1e-12);
            assert!((r.k_leak - k as f64).abs() < 1e-12);
        }
        let full = separation_audit(&s, &LeakageModel::prefix(4)).unwrap();
        assert!((full.e_s_star - 1.0).abs() < 1e-12 && (full.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_linear_audit_and_baselines() {
        let s = build_random_linear(6, 16, 0.5, 1).unwrap();
        let r = separation_audit(&s, &LeakageModel::prefix(3)).unwrap();
        assert!(r.holds && r.margin >= -1e-9);
        for v in r.baselines.values() {
            assert!(*v <= r.e_s_star + 1e-9);
        }
        assert!(r.e_s_star >= r.p_g - 1e-9);
    }

    #[test]
    fn coarser_leakage_never_helps() {
        let s = build_random_linear(5, 16, 0.6, 4).unwrap();
        let values: Vec<f64> = (0..=5).map(|k| optimal_forgery(&s, &LeakageModel::prefix(k)).unwrap().1).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert!(values[0] >= 1.0 / s.dim() as f64);
    }

    #[test]
    fn stochastic_and_deterministic_leakage() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = build_random_linear(3, 8, 0.8, 2).unwrap();
        let rows: Vec<Vec<f64>> = (0..8).map(|_| sample::random_distribution(&mut rng, 3)).collect();
        let prior = sample::random_distribution(&mut rng, 8);
        let leak = LeakageModel::stochastic(rows).with_prior(prior);
        assert!(separation_audit(&s, &leak).unwrap().holds);
        let det = LeakageModel::deterministic(vec![0, 0, 1, 1, 2, 2, 0, 1]);
        assert_eq!(det.joint(3).unwrap().ny(), 3);
        assert!(LeakageModel::deterministic(vec![0; 3]).joint(3).is_err());
        assert!(LeakageModel::prefix(4).joint(3).is_err());
    }

    #[test]
    fn violation_is_reported() {
        let s = build_hadamard(2).unwrap();
        let mut inst = AttackInstance::new(&s, &LeakageModel::none()).unwrap();
        // claim a delta far below the truth for a collapsed ensemble
        inst.states = vec![s.state(0); 4];
        inst.delta = 0.0;
        assert!(matches!(audit_instance(&inst), Err(Error::AuditViolation(_))));
    }

    #[test]
    fn classical_hash_examples() {
        let j = LeakageModel::none().joint(4).unwrap();
        let id: Vec<usize> = (0..16).collect();
        assert!((classical_hash_attack(&id, &j).unwrap() - 1.0 / 16.0).abs() < 1e-15);

        let h = truncation_hash(8, 6).unwrap();
        let tag_leak = LeakageModel::deterministic(h.clone()).joint(8).unwrap();
        assert!((classical_hash_attack(&h, &tag_leak).unwrap() - 1.0).abs() < 1e-12);

        let four = LeakageModel::deterministic(h.iter().map(|t| t >> 2).collect()).joint(8).unwrap();
        assert!(classical_hash_attack(&h, &four).unwrap() >= 0.25 - 1e-12);
        assert!((prefix_guessing_success(8, 6, 4).unwrap() - 0.25).abs() < 1e-15);
    }
}
