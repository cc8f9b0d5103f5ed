//! Experiment configuration: a TOML file whose values are overridden by
//! command-line flags. Unknown keys are rejected.
//!
//! ```toml
//! command = "attack"
//! seed = 1
//! output = "attack.json"
//! leak = "prefix:6"
//!
//! [scheme]
//! n = 8
//! construction = "hadamard"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qhash_core::attack::LeakageModel;
use qhash_core::fingerprint::Construction;
use serde::{Deserialize, Serialize};

/// Invalid or incomplete configuration; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Fingerprint,
    Decompose,
    Attack,
    Swap,
    Extractor,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionArg {
    Hadamard,
    RandomLinear,
    External,
}

impl From<ConstructionArg> for Construction {
    fn from(c: ConstructionArg) -> Self {
        match c {
            ConstructionArg::Hadamard => Construction::Hadamard,
            ConstructionArg::RandomLinear => Construction::RandomLinear,
            ConstructionArg::External => Construction::External,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DecomposeMethod {
    Lattice,
    Levelsets,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub n: Option<u32>,
    pub construction: Option<ConstructionArg>,
    /// Code length `M`; the shortest power of two meeting `delta_target` when absent.
    pub code_len: Option<usize>,
    pub delta_target: Option<f64>,
    /// Scheme JSON for external constructions.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapConfig {
    pub t: Option<u32>,
    /// `honest_guess`, `fixed:<x>`, `mixed`, `random` or `optimal_product`.
    pub forgery: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorConfig {
    /// Output bits of the inner-product extractor.
    pub m: Option<u32>,
    /// Min-entropy threshold for the separation witness.
    pub k: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub input: Option<PathBuf>,
    pub method: Option<DecomposeMethod>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `attack` or `fingerprint`.
    pub command: Option<CommandKind>,
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub n: Vec<u32>,
    /// Prefix leakage sizes; points with `leak > n − leak_gap` are skipped.
    #[serde(default)]
    pub leak: Vec<u32>,
    pub leak_gap: Option<u32>,
    #[serde(default)]
    pub constructions: Vec<ConstructionArg>,
    pub code_len: Option<usize>,
    pub delta_target: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<CommandKind>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// Extra CSV report, where the command has one.
    pub csv: Option<PathBuf>,
    /// `none`, `full` or `prefix:<k>`.
    pub leak: Option<String>,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub swap: SwapConfig,
    #[serde(default)]
    pub extractor: ExtractorConfig,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn n(&self) -> anyhow::Result<u32> {
        self.scheme.n.ok_or_else(|| config_error("scheme.n is required"))
    }

    pub fn leak_model(&self, n: u32) -> anyhow::Result<LeakageModel> {
        parse_leak(self.leak.as_deref().unwrap_or("none"), n)
    }
}

pub fn parse_leak(spec: &str, n: u32) -> anyhow::Result<LeakageModel> {
    match spec {
        "none" => Ok(LeakageModel::none()),
        "full" => Ok(LeakageModel::prefix(n)),
        _ => {
            let k = spec
                .strip_prefix("prefix:")
                .and_then(|k| k.parse::<u32>().ok())
                .ok_or_else(|| config_error(format!("leak '{spec}' is not none, full or prefix:<k>")))?;
            if k > n {
                return Err(config_error(format!("cannot leak {k} of {n} bits")));
            }
            Ok(LeakageModel::prefix(k))
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qhash", version, about = "Quantum fingerprint hashes under classical leakage")]
pub struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<CommandArgs>,
}

#[derive(Debug, Args, Default)]
pub struct CommonFlags {
    /// RNG seed for randomized constructions and forgeries (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SchemeFlags {
    /// Message length in bits.
    #[arg(long)]
    pub n: Option<u32>,
    /// Code family (default hadamard).
    #[arg(long, value_enum)]
    pub construction: Option<ConstructionArg>,
    /// Code length of a random linear code; the shortest passing power of two when absent.
    #[arg(long)]
    pub code_len: Option<usize>,
    /// Largest allowed overlap of a random linear code (default 0.5).
    #[arg(long)]
    pub delta_target: Option<f64>,
    /// Scheme JSON for the external construction.
    #[arg(long)]
    pub scheme_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Build a fingerprint scheme and measure its overlap.
    Fingerprint {
        #[command(flatten)]
        scheme: SchemeFlags,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Canonical subset-uniform decomposition of a joint table.
    Decompose {
        /// Joint distribution JSON with `x_labels`, `y_labels` and `table`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Lattice recursion or level sets (lattice for small alphabets).
        #[arg(long, value_enum)]
        method: Option<DecomposeMethod>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Optimal and baseline forgeries with the separation audit.
    Attack {
        #[command(flatten)]
        scheme: SchemeFlags,
        /// Leakage: none, full or prefix:K (default none).
        #[arg(long)]
        leak: Option<String>,
        /// Also write a CSV summary to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// SWAP-test verification with t fingerprint copies.
    Swap {
        #[command(flatten)]
        scheme: SchemeFlags,
        /// Number of fingerprint copies (default 2).
        #[arg(long)]
        t: Option<u32>,
        /// Leakage: none, full or prefix:K (default none).
        #[arg(long)]
        leak: Option<String>,
        /// optimal_product (default), honest_guess, mixed, random or fixed:X.
        #[arg(long)]
        forgery: Option<String>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Extractor errors against fingerprint side information and the separation witness.
    Extractor {
        #[command(flatten)]
        scheme: SchemeFlags,
        /// Extractor output bits (default 1).
        #[arg(long)]
        m: Option<u32>,
        /// Min-entropy level checked by the separation witness (default 2).
        #[arg(long)]
        k: Option<u32>,
        /// Also write a CSV summary to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Grid of attack or fingerprint points, one CSV row each.
    Sweep {
        /// What each grid point runs: attack (default) or fingerprint.
        #[arg(long, value_enum)]
        sweep_command: Option<CommandKind>,
        /// Seed from which every point's seed is derived (default 0).
        #[arg(long)]
        master_seed: Option<u64>,
        /// Message lengths, comma separated.
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
        /// Leaked prefix lengths, comma separated (default 0).
        #[arg(long, value_delimiter = ',')]
        leak: Vec<u32>,
        /// Skip points leaking more than n minus this many bits.
        #[arg(long)]
        leak_gap: Option<u32>,
        /// Code families, comma separated (default hadamard).
        #[arg(long, value_enum, value_delimiter = ',')]
        constructions: Vec<ConstructionArg>,
        /// Code length for random linear points.
        #[arg(long)]
        code_len: Option<usize>,
        /// Overlap target for random linear points (default 0.5).
        #[arg(long)]
        delta_target: Option<f64>,
        /// CSV path; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn overlay<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn overlay_scheme(cfg: &mut SchemeConfig, f: SchemeFlags) {
    overlay(&mut cfg.n, f.n);
    overlay(&mut cfg.construction, f.construction);
    overlay(&mut cfg.code_len, f.code_len);
    overlay(&mut cfg.delta_target, f.delta_target);
    overlay(&mut cfg.file, f.scheme_file);
}

fn overlay_common(cfg: &mut ExperimentConfig, f: CommonFlags) {
    overlay(&mut cfg.seed, f.seed);
    overlay(&mut cfg.output, f.output);
}

impl Cli {
    /// Loads the config file, if any, and applies the subcommand's flags.
    pub fn resolve(self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let Some(command) = self.command else {
            if cfg.command.is_none() {
                return Err(config_error("no command given on the command line or in the config"));
            }
            return Ok(cfg);
        };
        let kind = match command {
            CommandArgs::Fingerprint { scheme, common } => {
                overlay_scheme(&mut cfg.scheme, scheme);
                overlay_common(&mut cfg, common);
                CommandKind::Fingerprint
            }
            CommandArgs::Decompose { input, method, common } => {
                overlay(&mut cfg.decompose.input, input);
                overlay(&mut cfg.decompose.method, method);
                overlay_common(&mut cfg, common);
                CommandKind::Decompose
            }
            CommandArgs::Attack { scheme, leak, csv, common } => {
                overlay_scheme(&mut cfg.scheme, scheme);
                overlay(&mut cfg.leak, leak);
                overlay(&mut cfg.csv, csv);
                overlay_common(&mut cfg, common);
                CommandKind::Attack
            }
            CommandArgs::Swap { scheme, t, leak, forgery, common } => {
                overlay_scheme(&mut cfg.scheme, scheme);
                overlay(&mut cfg.swap.t, t);
                overlay(&mut cfg.leak, leak);
                overlay(&mut cfg.swap.forgery, forgery);
                overlay_common(&mut cfg, common);
                CommandKind::Swap
            }
            CommandArgs::Extractor { scheme, m, k, csv, common } => {
                overlay_scheme(&mut cfg.scheme, scheme);
                overlay(&mut cfg.extractor.m, m);
                overlay(&mut cfg.extractor.k, k);
                overlay(&mut cfg.csv, csv);
                overlay_common(&mut cfg, common);
                CommandKind::Extractor
            }
            CommandArgs::Sweep {
                sweep_command,
                master_seed,
                n,
                leak,
                leak_gap,
                constructions,
                code_len,
                delta_target,
                output,
            } => {
                let s = &mut cfg.sweep;
                overlay(&mut s.command, sweep_command);
                overlay(&mut s.master_seed, master_seed);
                if !n.is_empty() {
                    s.n = n;
                }
                if !leak.is_empty() {
                    s.leak = leak;
                }
                if !constructions.is_empty() {
                    s.constructions = constructions;
                }
                overlay(&mut s.leak_gap, leak_gap);
                overlay(&mut s.code_len, code_len);
                overlay(&mut s.delta_target, delta_target);
                overlay(&mut cfg.output, output);
                CommandKind::Sweep
            }
        };
        if let Some(file_kind) = cfg.command {
            if file_kind != kind {
                return Err(config_error(format!("config is for {file_kind:?} but the {kind:?} command was run")));
            }
        }
        cfg.command = Some(kind);
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("command = \"attack\"\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[scheme]\nm = 3").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::parse_from(["qhash", "attack", "--n", "5", "--leak", "prefix:2"]);
        let mut cfg = cli.resolve().unwrap();
        assert_eq!(cfg.scheme.n, Some(5));
        cfg.scheme.n = Some(7);
        assert_eq!(cfg.leak_model(7).unwrap(), LeakageModel::prefix(2));
    }

    #[test]
    fn empty_config_has_no_command() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let cli = Cli { config: None, command: None };
        let err = cli.resolve().unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn leak_specs() {
        assert_eq!(parse_leak("full", 4).unwrap(), LeakageModel::prefix(4));
        assert_eq!(parse_leak("none", 4).unwrap(), LeakageModel::none());
        assert!(parse_leak("prefix:5", 4).is_err());
        assert!(parse_leak("suffix:1", 4).is_err());
    }
}
