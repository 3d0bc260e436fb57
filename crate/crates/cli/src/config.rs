//! Configuration file loading and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ssa_core::cost::{AnnCostParams, EnergyConfig, SpikformerCostParams};
use ssa_core::functional::check_d_k;
use ssa_core::sc::EncoderRange;
use ssa_core::verify::VerifyParams;
use ssa_core::{LifConfig, Normalization, ResetMode, RngSharing, SsaConfig, SsaError};

use crate::error::CliError;

/// Used when neither `--config` nor `SSA_CONFIG` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");
pub const DEFAULT_SOURCE: &str = "<builtin default>";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub ssa: SsaSection,
    #[serde(default)]
    pub lif: LifSection,
    #[serde(default)]
    pub inputs: InputsSection,
    pub energy: Option<EnergySection>,
    #[serde(default)]
    pub ann: AnnSection,
    #[serde(default)]
    pub spikformer: SpikformerSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsaSection {
    pub n: usize,
    pub d: usize,
    pub d_k: usize,
    pub t: usize,
    pub seed: u64,
    pub input_lo: f64,
    pub input_hi: f64,
    pub normalization: Normalization,
    pub sharing: RngSharing,
}

impl Default for SsaSection {
    fn default() -> Self {
        Self {
            n: 8,
            d: 16,
            d_k: 16,
            t: 64,
            seed: 2024,
            input_lo: 0.0,
            input_hi: 1.0,
            normalization: Normalization::PowerOfTwo,
            sharing: RngSharing::PerEncoder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifSection {
    pub beta: f64,
    pub threshold: f64,
    pub reset: ResetMode,
}

impl Default for LifSection {
    fn default() -> Self {
        Self {
            beta: 0.9,
            threshold: 1.0,
            reset: ResetMode::ToZero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Synthetic {
    /// Every input at the top of its range.
    Ones,
    /// Seeded uniform inputs.
    Random,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsSection {
    pub synthetic: Option<Synthetic>,
    pub x: Option<PathBuf>,
    pub w_q: Option<PathBuf>,
    pub w_k: Option<PathBuf>,
    pub w_v: Option<PathBuf>,
    pub p_q: Option<PathBuf>,
    pub p_k: Option<PathBuf>,
    pub p_v: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub provenance: String,
    pub mac_pj: Option<f64>,
    pub ac_pj: Option<f64>,
    pub and_pj: Option<f64>,
    pub add_pj: Option<f64>,
    pub rng_pj: Option<f64>,
    pub compare_pj: Option<f64>,
    pub mem_read_pj_per_bit: Option<f64>,
    pub mem_write_pj_per_bit: Option<f64>,
}

impl EnergySection {
    pub fn to_energy_config(&self) -> Result<EnergyConfig, SsaError> {
        let entries = [
            ("mac_pj", self.mac_pj),
            ("ac_pj", self.ac_pj),
            ("and_pj", self.and_pj),
            ("add_pj", self.add_pj),
            ("rng_pj", self.rng_pj),
            ("compare_pj", self.compare_pj),
            ("mem_read_pj_per_bit", self.mem_read_pj_per_bit),
            ("mem_write_pj_per_bit", self.mem_write_pj_per_bit),
        ];
        let map: BTreeMap<String, f64> = entries
            .iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
        EnergyConfig::from_map(&map, &self.provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnSection {
    pub softmax_weight: u64,
    pub bits_per_value: u32,
}

impl Default for AnnSection {
    fn default() -> Self {
        let p = AnnCostParams::default();
        Self {
            softmax_weight: p.softmax_weight,
            bits_per_value: p.bits_per_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikformerSection {
    pub intermediate_bits: u32,
}

impl Default for SpikformerSection {
    fn default() -> Self {
        Self {
            intermediate_bits: SpikformerCostParams::default().intermediate_bits,
        }
    }
}

/// Verification parameters; the seed comes from `[ssa]` or `--seed`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub grid: Vec<usize>,
    pub product_seeds: usize,
    pub product_t: usize,
    pub param_instances: usize,
    pub bitexact_t: usize,
    pub bitexact_seeds: usize,
    pub stat_n: usize,
    pub stat_d: usize,
    pub stat_d_k: usize,
    pub stat_t: usize,
    pub stat_seeds: usize,
    pub stat_tolerance: f64,
    pub stat_min_fraction: f64,
    pub count_cells: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        let p = VerifyParams::default();
        Self {
            grid: p.grid,
            product_seeds: p.product_seeds,
            product_t: p.product_t,
            param_instances: p.param_instances,
            bitexact_t: p.bitexact_t,
            bitexact_seeds: p.bitexact_seeds,
            stat_n: p.stat_n,
            stat_d: p.stat_d,
            stat_d_k: p.stat_d_k,
            stat_t: p.stat_t,
            stat_seeds: p.stat_seeds,
            stat_tolerance: p.stat_tolerance,
            stat_min_fraction: p.stat_min_fraction,
            count_cells: p.count_cells,
        }
    }
}

impl VerifySection {
    pub fn to_params(&self, seed: u64) -> VerifyParams {
        VerifyParams {
            seed,
            grid: self.grid.clone(),
            product_seeds: self.product_seeds,
            product_t: self.product_t,
            param_instances: self.param_instances,
            bitexact_t: self.bitexact_t,
            bitexact_seeds: self.bitexact_seeds,
            stat_n: self.stat_n,
            stat_d: self.stat_d,
            stat_d_k: self.stat_d_k,
            stat_t: self.stat_t,
            stat_seeds: self.stat_seeds,
            stat_tolerance: self.stat_tolerance,
            stat_min_fraction: self.stat_min_fraction,
            count_cells: self.count_cells,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Independent,
    Lif,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub n: Vec<usize>,
    pub d_k: Vec<usize>,
    pub t: Vec<usize>,
    /// Seeds per cell, offset from the effective seed.
    pub seeds: usize,
    /// Also run the cycle-accurate model and check it bit for bit.
    pub cycle: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            mode: SweepMode::Independent,
            n: vec![2, 4, 8],
            d_k: vec![4, 8, 16],
            t: vec![256],
            seeds: 4,
            cycle: true,
        }
    }
}

/// A parsed configuration plus what is needed to report where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub source: String,
    pub text: String,
    pub file: ConfigFile,
    /// Relative input paths resolve against this directory.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let (source, text, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (p.display().to_string(), text, base)
            }
            None => (DEFAULT_SOURCE.to_string(), DEFAULT_CONFIG.to_string(), PathBuf::new()),
        };
        Self::parse(source, text, base_dir)
    }

    pub fn parse(source: String, text: String, base_dir: PathBuf) -> Result<Self, CliError> {
        // toml errors carry the line and column.
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
        Ok(Self {
            source,
            text,
            file,
            base_dir,
        })
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Formats a validation error, pointing at the offending key if present.
    pub fn error_at(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        match key_line(&self.text, section, key) {
            Some(line) => CliError::Config(format!("{}:{line}: [{section}] {key}: {msg}", self.source)),
            None => CliError::Config(format!("{}: [{section}] {key}: {msg}", self.source)),
        }
    }

    pub fn ssa_config(&self, seed: u64) -> Result<SsaConfig, CliError> {
        let s = &self.file.ssa;
        let input_range =
            EncoderRange::new(s.input_lo, s.input_hi).map_err(|e| self.error_at("ssa", "input_lo", e))?;
        let cfg = SsaConfig {
            n: s.n,
            d: s.d,
            d_k: s.d_k,
            t: s.t,
            global_seed: seed,
            input_range,
            normalization: s.normalization,
            sharing: s.sharing,
        };
        self.check_ssa(&cfg)?;
        Ok(cfg)
    }

    /// Validates a config derived from `[ssa]`, blaming the matching key.
    pub fn check_ssa(&self, cfg: &SsaConfig) -> Result<(), CliError> {
        cfg.validate().map_err(|e| {
            let key = match &e {
                SsaError::NotPowerOfTwo { what: "D_K", .. } => "d_k",
                SsaError::NotPowerOfTwo { what: "N", .. } => "n",
                _ if cfg.t == 0 => "t",
                _ if cfg.d == 0 => "d",
                _ => "n",
            };
            self.error_at("ssa", key, e)
        })
    }

    pub fn lif_config(&self) -> Result<LifConfig, CliError> {
        let l = &self.file.lif;
        LifConfig::new(l.beta, l.threshold, l.reset).map_err(|e| self.error_at("lif", "beta", e))
    }

    pub fn verify_params(&self, seed: u64) -> Result<VerifyParams, CliError> {
        let v = &self.file.verify;
        if v.grid.is_empty() {
            return Err(self.error_at("verify", "grid", "must not be empty"));
        }
        for &g in &v.grid {
            check_d_k(g).map_err(|e| self.error_at("verify", "grid", e))?;
        }
        check_d_k(v.stat_d_k).map_err(|e| self.error_at("verify", "stat_d_k", e))?;
        if !v.stat_n.is_power_of_two() {
            return Err(self.error_at("verify", "stat_n", "must be a power-of-two value"));
        }
        if !(0.0..=1.0).contains(&v.stat_min_fraction) {
            return Err(self.error_at("verify", "stat_min_fraction", "must be in [0, 1]"));
        }
        let positive = [
            ("product_seeds", v.product_seeds),
            ("product_t", v.product_t),
            ("param_instances", v.param_instances),
            ("bitexact_t", v.bitexact_t),
            ("bitexact_seeds", v.bitexact_seeds),
            ("stat_d", v.stat_d),
            ("stat_t", v.stat_t),
            ("stat_seeds", v.stat_seeds),
            ("count_cells", v.count_cells),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(self.error_at("verify", key, "must be positive"));
            }
        }
        Ok(v.to_params(seed))
    }

    pub fn energy_config(&self) -> Result<EnergyConfig, CliError> {
        let section = self
            .file
            .energy
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{}: missing [energy] section", self.source)))?;
        section.to_energy_config().map_err(|e| self.error_at("energy", "provenance", e))
    }

    pub fn ann_params(&self) -> AnnCostParams {
        AnnCostParams {
            softmax_weight: self.file.ann.softmax_weight,
            bits_per_value: self.file.ann.bits_per_value,
        }
    }

    pub fn spikformer_params(&self) -> SpikformerCostParams {
        SpikformerCostParams {
            intermediate_bits: self.file.spikformer.intermediate_bits,
        }
    }
}

/// 1-based line of `key = ...` inside `[section]`, if written out.
pub fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(idx + 1);
            }
        }
    }
    None
}
