//! Quantum fingerprints built from binary codes.
//!
//! A code `E: {0,1}^n → {0,1}^M` yields the phase states
//! `|φ_x⟩ = M^{-1/2} Σᵢ (-1)^{E(x)ᵢ} |i⟩`, whose overlaps are
//! `⟨φ_x|φ_y⟩ = 1 − 2·d_H(E(x), E(y))/M`. Messages are integers whose bit
//! string is read most significant bit first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{bit_string, StateVector};

/// Largest message length for which all pairs are enumerated exactly.
pub const MAX_MESSAGE_BITS: u32 = 12;
pub const MAX_CODE_LEN: usize = 4096;
/// Attempts made by [`build_random_linear`] before giving up.
pub const RANDOM_LINEAR_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Hadamard,
    RandomLinear,
    External,
}

impl std::fmt::Display for Construction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Construction::Hadamard => "hadamard",
            Construction::RandomLinear => "random_linear",
            Construction::External => "external",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoder {
    /// Row `i` of the generator is an `n`-bit mask `gᵢ`; `E(x)ᵢ = gᵢ·x mod 2`.
    Linear { generator: Vec<u32> },
    /// Arbitrary codeword table indexed by message.
    Table,
}

/// An `(n, m, δ)` fingerprint family.
#[derive(Debug, Clone)]
pub struct FingerprintScheme {
    n_bits: u32,
    code_len: usize,
    encoder: Encoder,
    /// Codeword of every message, packed into 64-bit words.
    codewords: Vec<Vec<u64>>,
    delta_measured: f64,
    construction: Construction,
    seed: Option<u64>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

fn pack(bits: impl Iterator<Item = bool>, len: usize) -> Vec<u64> {
    let mut words = vec![0u64; words_for(len)];
    for (i, b) in bits.enumerate() {
        if b {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

fn check_message_bits(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("message length must be at least 1".into()));
    }
    if n > MAX_MESSAGE_BITS {
        return Err(Error::TooLarge(format!("message length {n} exceeds {MAX_MESSAGE_BITS} bits")));
    }
    Ok(())
}

fn linear_codewords(n: u32, generator: &[u32]) -> Vec<Vec<u64>> {
    (0..1u32 << n).map(|x| pack(generator.iter().map(|&g| (g & x).count_ones() & 1 == 1), generator.len())).collect()
}

/// Codeword weights `wt(E(x))` for every `x`, via a Walsh–Hadamard transform
/// of the generator row histogram.
fn linear_weights(n: u32, generator: &[u32]) -> Vec<i64> {
    let size = 1usize << n;
    let mut hist = vec![0i64; size];
    for &g in generator {
        hist[g as usize] += 1;
    }
    let mut h = 1;
    while h < size {
        for start in (0..size).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (hist[i], hist[i + h]);
                hist[i] = a + b;
                hist[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let m = generator.len() as i64;
    hist.into_iter().map(|s| (m - s) / 2).collect()
}

/// `max_{x≠0} |1 − 2·wt(E(x))/M|` for a linear code.
fn linear_bias(n: u32, generator: &[u32]) -> f64 {
    let m = generator.len() as i64;
    linear_weights(n, generator)
        .into_iter()
        .skip(1)
        .map(|w| (m - 2 * w).abs())
        .max()
        .map_or(0.0, |d| d as f64 / m as f64)
}

impl FingerprintScheme {
    fn from_parts(
        n_bits: u32,
        code_len: usize,
        encoder: Encoder,
        codewords: Vec<Vec<u64>>,
        construction: Construction,
        seed: Option<u64>,
    ) -> Self {
        let mut s = Self { n_bits, code_len, encoder, codewords, delta_measured: 0.0, construction, seed };
        s.delta_measured = delta_of(&s);
        s
    }

    /// Scheme with an explicit codeword table (`codewords[x][i]`).
    pub fn from_codewords(n_bits: u32, codewords: &[Vec<bool>]) -> Result<Self> {
        check_message_bits(n_bits)?;
        if codewords.len() != 1usize << n_bits {
            return Err(Error::DimensionMismatch { expected: 1 << n_bits, got: codewords.len() });
        }
        let code_len = codewords[0].len();
        if code_len == 0 || code_len > MAX_CODE_LEN {
            return Err(Error::InvalidParameter(format!("code length {code_len} outside 1..={MAX_CODE_LEN}")));
        }
        if let Some(bad) = codewords.iter().find(|c| c.len() != code_len) {
            return Err(Error::DimensionMismatch { expected: code_len, got: bad.len() });
        }
        let packed = codewords.iter().map(|c| pack(c.iter().copied(), code_len)).collect();
        Ok(Self::from_parts(n_bits, code_len, Encoder::Table, packed, Construction::External, None))
    }

    /// Scheme from an explicit generator matrix given as row masks.
    pub fn from_generator(
        n_bits: u32,
        generator: Vec<u32>,
        construction: Construction,
        seed: Option<u64>,
    ) -> Result<Self> {
        check_message_bits(n_bits)?;
        if generator.is_empty() || generator.len() > MAX_CODE_LEN {
            return Err(Error::InvalidParameter(format!("code length {} outside 1..={MAX_CODE_LEN}", generator.len())));
        }
        if generator.iter().any(|&g| g >> n_bits != 0) {
            return Err(Error::InvalidParameter("generator row wider than the message".into()));
        }
        let codewords = linear_codewords(n_bits, &generator);
        Ok(Self::from_parts(n_bits, generator.len(), Encoder::Linear { generator }, codewords, construction, seed))
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn messages(&self) -> usize {
        1 << self.n_bits
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    /// Hilbert-space dimension of each fingerprint, equal to the code length.
    pub fn dim(&self) -> usize {
        self.code_len
    }

    /// `⌈log₂ M⌉`.
    pub fn m_qubits(&self) -> u32 {
        self.code_len.next_power_of_two().trailing_zeros()
    }

    pub fn delta_measured(&self) -> f64 {
        self.delta_measured
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn codeword_bit(&self, x: usize, i: usize) -> bool {
        self.codewords[x][i / 64] >> (i % 64) & 1 == 1
    }

    pub fn codeword(&self, x: usize) -> Vec<bool> {
        (0..self.code_len).map(|i| self.codeword_bit(x, i)).collect()
    }

    pub fn hamming_distance(&self, x: usize, y: usize) -> usize {
        self.codewords[x].iter().zip(&self.codewords[y]).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// Exact `⟨φ_x|φ_y⟩` from the codeword distance.
    pub fn overlap(&self, x: usize, y: usize) -> f64 {
        let m = self.code_len as i64;
        (m - 2 * self.hamming_distance(x, y) as i64) as f64 / m as f64
    }

    pub fn state(&self, x: usize) -> StateVector {
        StateVector::phase_state((0..self.code_len).map(|i| self.codeword_bit(x, i)))
    }

    pub fn states(&self) -> Vec<StateVector> {
        (0..self.messages()).map(|x| self.state(x)).collect()
    }

    pub fn message_label(&self, x: usize) -> String {
        bit_string(x, self.n_bits)
    }

    pub fn to_json(&self) -> SchemeJson {
        let row = |g: &u32| bit_string(*g as usize, self.n_bits);
        let (generator, codewords) = match &self.encoder {
            Encoder::Linear { generator } => (Some(generator.iter().map(row).collect()), None),
            Encoder::Table => (
                None,
                Some(
                    (0..self.messages())
                        .map(|x| self.codeword(x).into_iter().map(|b| if b { '1' } else { '0' }).collect())
                        .collect(),
                ),
            ),
        };
        SchemeJson {
            n_bits: self.n_bits,
            code_len: self.code_len,
            construction: self.construction,
            seed: self.seed,
            generator,
            codewords,
            delta: self.delta_measured,
        }
    }

    pub fn from_json(j: &SchemeJson) -> Result<Self> {
        let parse_bits = |s: &str| -> Result<Vec<bool>> {
            s.chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::InvalidParameter(format!("bad bit {other:?}"))),
                })
                .collect()
        };
        let scheme = match (&j.generator, &j.codewords) {
            (Some(rows), None) => {
                let generator = rows
                    .iter()
                    .map(|r| {
                        if r.len() != j.n_bits as usize {
                            return Err(Error::DimensionMismatch { expected: j.n_bits as usize, got: r.len() });
                        }
                        Ok(parse_bits(r)?.into_iter().fold(0u32, |acc, b| acc << 1 | b as u32))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_generator(j.n_bits, generator, j.construction, j.seed)?
            }
            (None, Some(words)) => {
                let table = words.iter().map(|w| parse_bits(w)).collect::<Result<Vec<_>>>()?;
                Self::from_codewords(j.n_bits, &table)?
            }
            _ => return Err(Error::InvalidParameter("scheme needs exactly one of generator or codewords".into())),
        };
        if scheme.code_len != j.code_len {
            return Err(Error::DimensionMismatch { expected: j.code_len, got: scheme.code_len });
        }
        Ok(scheme)
    }
}

/// Exchange format for schemes, so attacks can replay against identical codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeJson {
    pub n_bits: u32,
    pub code_len: usize,
    pub construction: Construction,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Generator rows as `n`-bit strings.
    #[serde(default)]
    pub generator: Option<Vec<String>>,
    /// Codeword table for external schemes.
    #[serde(default)]
    pub codewords: Option<Vec<String>>,
    /// Informational; recomputed on import.
    #[serde(default)]
    pub delta: f64,
}

/// Hadamard code `E(x)ᵢ = x·i`, `M = 2^n`: all distinct fingerprints are orthogonal.
pub fn build_hadamard(n: u32) -> Result<FingerprintScheme> {
    check_message_bits(n)?;
    FingerprintScheme::from_generator(n, (0..1u32 << n).collect(), Construction::Hadamard, None)
}

/// Random linear code of length `M` whose nonzero codewords all have
/// relative weight within `[(1−δ)/2, (1+δ)/2]`, so that `δ_measured ≤ δ`.
///
/// Generator rows are drawn as 12-bit words and masked to `n` bits, so for a
/// fixed seed the first attempt's codes are nested in `n`.
pub fn build_random_linear(n: u32, code_len: usize, delta_target: f64, seed: u64) -> Result<FingerprintScheme> {
    check_message_bits(n)?;
    if code_len == 0 || code_len > MAX_CODE_LEN {
        return Err(Error::TooLarge(format!("code length {code_len} outside 1..={MAX_CODE_LEN}")));
    }
    if !(0.0..=1.0).contains(&delta_target) {
        return Err(Error::InvalidParameter(format!("delta_target {delta_target} outside [0, 1]")));
    }
    let mask = (1u32 << n) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_LINEAR_RETRIES {
        let generator: Vec<u32> = (0..code_len).map(|_| rng.random::<u32>() & 0xFFF & mask).collect();
        if linear_bias(n, &generator) <= delta_target {
            return FingerprintScheme::from_generator(n, generator, Construction::RandomLinear, Some(seed));
        }
    }
    Err(Error::RetryCapExceeded(format!(
        "no length-{code_len} linear code with bias <= {delta_target} for n = {n} in {RANDOM_LINEAR_RETRIES} attempts"
    )))
}

/// Shortest power-of-two code length for which [`build_random_linear`] succeeds.
pub fn build_random_linear_shortest(n: u32, delta_target: f64, seed: u64) -> Result<FingerprintScheme> {
    let mut last = None;
    let mut len = 2usize;
    while len <= MAX_CODE_LEN {
        match build_random_linear(n, len, delta_target, seed) {
            Ok(s) => return Ok(s),
            Err(e @ Error::RetryCapExceeded(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
        len *= 2;
    }
    Err(last.unwrap_or_else(|| Error::RetryCapExceeded("no code length tried".into())))
}

/// Exact `max_{x≠x'} |⟨φ_x|φ_{x'}⟩|` by enumerating every pair.
pub fn delta_of(scheme: &FingerprintScheme) -> f64 {
    let n = scheme.messages();
    let m = scheme.code_len as i64;
    let worst = (0..n)
        .into_par_iter()
        .map(|x| ((x + 1)..n).map(|y| (m - 2 * scheme.hamming_distance(x, y) as i64).abs()).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    worst as f64 / m as f64
}

/// `max_{x≠0} |1 − 2·wt(E(x))/M|`, the bias of a linear code, or `None` for
/// table schemes.
pub fn linear_code_bias(scheme: &FingerprintScheme) -> Option<f64> {
    match &scheme.encoder {
        Encoder::Linear { generator } => Some(linear_bias(scheme.n_bits, generator)),
        Encoder::Table => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: u32,
    pub m_qubits: u32,
    pub code_len: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegligibilityProfile {
    pub rows: Vec<ProfileRow>,
    /// δ never decreases from one row to the next.
    pub delta_nondecreasing: bool,
    /// Among rows sorted by `m`, δ never increases.
    pub delta_nonincreasing_in_m: bool,
}

/// Finite-n table of `(n, m, δ)` for a scheme family.
pub fn negligibility_profile<F>(family: F, n_range: &[u32]) -> Result<NegligibilityProfile>
where
    F: Fn(u32) -> Result<FingerprintScheme>,
{
    let rows = n_range
        .iter()
        .map(|&n| {
            let s = family(n)?;
            Ok(ProfileRow { n, m_qubits: s.m_qubits(), code_len: s.code_len(), delta: delta_of(&s) })
        })
        .collect::<Result<Vec<_>>>()?;
    let delta_nondecreasing = rows.windows(2).all(|w| w[1].delta >= w[0].delta);
    let mut by_m = rows.clone();
    by_m.sort_by_key(|r| r.m_qubits);
    let delta_nonincreasing_in_m = by_m.windows(2).all(|w| w[1].m_qubits == w[0].m_qubits || w[1].delta <= w[0].delta);
    Ok(NegligibilityProfile { rows, delta_nondecreasing, delta_nonincreasing_in_m })
}
