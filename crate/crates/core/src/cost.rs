//! Operation and memory-access counts for three attention implementations,
//! and their conversion to energy with user-supplied per-operation costs.
//!
//! Memory is a single on-chip SRAM level; energy is proportional to the
//! number of bits read or written.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsaError};
use crate::sau::TraceTotals;

/// Memory traffic: number of accesses and total bits moved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemCount {
    pub accesses: u64,
    pub bits: u64,
}

impl MemCount {
    pub fn of(accesses: u64, bits_per_access: u32) -> Self {
        Self {
            accesses,
            bits: accesses * bits_per_access as u64,
        }
    }
}

impl Add for MemCount {
    type Output = MemCount;
    fn add(self, o: MemCount) -> MemCount {
        MemCount {
            accesses: self.accesses + o.accesses,
            bits: self.bits + o.bits,
        }
    }
}

impl Mul<u64> for MemCount {
    type Output = MemCount;
    fn mul(self, k: u64) -> MemCount {
        MemCount {
            accesses: self.accesses * k,
            bits: self.bits * k,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub mac_ops: u64,
    pub ac_ops: u64,
    pub and_ops: u64,
    pub add_ops: u64,
    pub rng_draws: u64,
    pub compare_ops: u64,
    /// Softmax work in MAC-equivalent operations.
    pub softmax_ops: u64,
    pub mem_reads: MemCount,
    pub mem_writes: MemCount,
}

impl Mul<u64> for OpCounts {
    type Output = OpCounts;
    fn mul(self, k: u64) -> OpCounts {
        OpCounts {
            mac_ops: self.mac_ops * k,
            ac_ops: self.ac_ops * k,
            and_ops: self.and_ops * k,
            add_ops: self.add_ops * k,
            rng_draws: self.rng_draws * k,
            compare_ops: self.compare_ops * k,
            softmax_ops: self.softmax_ops * k,
            mem_reads: self.mem_reads * k,
            mem_writes: self.mem_writes * k,
        }
    }
}

impl OpCounts {
    /// Processing counts recorded by a SAU-array trace. Memory is not
    /// modeled by the simulator and stays zero.
    pub fn from_trace(totals: &TraceTotals) -> Self {
        OpCounts {
            and_ops: totals.and_ops,
            add_ops: totals.counter_ops + totals.row_adds,
            rng_draws: totals.rng_draws,
            compare_ops: totals.rng_draws,
            ..OpCounts::default()
        }
    }
}

fn dims(n: usize, d_k: usize) -> (u64, u64) {
    (n as u64, d_k as u64)
}

/// Stochastic attention block over `t` time steps.
///
/// Per step: `2 N^2 D_K` AND gates (score and weighted-sum phases),
/// `N^2 D_K` counter increments plus `N D_K` row additions,
/// `N^2 + N D_K` encoder draws each with one comparison, `3 N D_K` one-bit
/// reads of Q/K/V and `N D_K` one-bit writes of the output.
pub fn count_ops_ssa(n: usize, d_k: usize, t: usize) -> OpCounts {
    let (n, d_k) = dims(n, d_k);
    let draws = n * n + n * d_k;
    let per_step = OpCounts {
        and_ops: 2 * n * n * d_k,
        add_ops: n * n * d_k + n * d_k,
        rng_draws: draws,
        compare_ops: draws,
        mem_reads: MemCount::of(3 * n * d_k, 1),
        mem_writes: MemCount::of(n * d_k, 1),
        ..OpCounts::default()
    };
    per_step * t as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnCostParams {
    /// MAC-equivalent operations charged per softmax element (`N^2` elements).
    pub softmax_weight: u64,
    /// Width of every stored value.
    pub bits_per_value: u32,
}

impl Default for AnnCostParams {
    fn default() -> Self {
        Self {
            softmax_weight: 1,
            bits_per_value: 8,
        }
    }
}

/// Quantized floating-point-style attention, one pass.
///
/// `2 N^2 D_K` MACs for `Q K^T` and the value product, `N^2 * softmax_weight`
/// softmax operations. Memory: Q/K/V reads and a score-matrix write and
/// read-back, plus the output write, all at `bits_per_value`.
pub fn count_ops_ann(n: usize, d_k: usize, params: &AnnCostParams) -> OpCounts {
    let (n, d_k) = dims(n, d_k);
    let w = params.bits_per_value;
    OpCounts {
        mac_ops: 2 * n * n * d_k,
        softmax_ops: params.softmax_weight * n * n,
        mem_reads: MemCount::of(3 * n * d_k + n * n, w),
        mem_writes: MemCount::of(n * n + n * d_k, w),
        ..OpCounts::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikformerCostParams {
    /// Width of the integer score matrix and output stored each step.
    pub intermediate_bits: u32,
}

impl Default for SpikformerCostParams {
    fn default() -> Self {
        Self {
            intermediate_bits: 8,
        }
    }
}

/// Spiking attention with integer multipliers over `t` time steps.
///
/// Binary operands turn every multiply into an accumulate: `2 N^2 D_K` ACs
/// per step. Memory per step: one-bit Q/K/V reads, plus the integer score
/// matrix written and read back and the integer output written.
pub fn count_ops_spikformer(n: usize, d_k: usize, t: usize, params: &SpikformerCostParams) -> OpCounts {
    let (n, d_k) = dims(n, d_k);
    let w = params.intermediate_bits;
    let per_step = OpCounts {
        ac_ops: 2 * n * n * d_k,
        mem_reads: MemCount::of(3 * n * d_k, 1) + MemCount::of(n * n, w),
        mem_writes: MemCount::of(n * n + n * d_k, w),
        ..OpCounts::default()
    };
    per_step * t as u64
}

/// Keys accepted by [`EnergyConfig::from_map`], all in picojoules.
pub const ENERGY_KEYS: [&str; 8] = [
    "mac_pj",
    "ac_pj",
    "and_pj",
    "add_pj",
    "rng_pj",
    "compare_pj",
    "mem_read_pj_per_bit",
    "mem_write_pj_per_bit",
];

/// Per-operation energies in picojoules. Softmax operations are charged at
/// the MAC rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub mac_pj: f64,
    pub ac_pj: f64,
    pub and_pj: f64,
    pub add_pj: f64,
    pub rng_pj: f64,
    pub compare_pj: f64,
    pub mem_read_pj_per_bit: f64,
    pub mem_write_pj_per_bit: f64,
    /// Where the constants come from.
    pub provenance: String,
}

impl EnergyConfig {
    /// Builds from a key/value map; every key in [`ENERGY_KEYS`] is required.
    pub fn from_map(values: &BTreeMap<String, f64>, provenance: &str) -> Result<Self> {
        let get = |key: &str| {
            values
                .get(key)
                .copied()
                .ok_or_else(|| SsaError::Config(format!("missing energy constant `{key}`")))
        };
        let cfg = Self {
            mac_pj: get("mac_pj")?,
            ac_pj: get("ac_pj")?,
            and_pj: get("and_pj")?,
            add_pj: get("add_pj")?,
            rng_pj: get("rng_pj")?,
            compare_pj: get("compare_pj")?,
            mem_read_pj_per_bit: get("mem_read_pj_per_bit")?,
            mem_write_pj_per_bit: get("mem_write_pj_per_bit")?,
            provenance: provenance.to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.provenance.trim().is_empty() {
            return Err(SsaError::Config("energy provenance must not be empty".into()));
        }
        for (key, v) in ENERGY_KEYS.iter().zip(self.values()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SsaError::Config(format!(
                    "energy constant `{key}` must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn values(&self) -> [f64; 8] {
        [
            self.mac_pj,
            self.ac_pj,
            self.and_pj,
            self.add_pj,
            self.rng_pj,
            self.compare_pj,
            self.mem_read_pj_per_bit,
            self.mem_write_pj_per_bit,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub processing_uj: f64,
    pub memory_uj: f64,
    pub total_uj: f64,
    /// Energy per category in microjoules, in a fixed order.
    pub breakdown: Vec<(String, f64)>,
}

const PJ_TO_UJ: f64 = 1e-6;

pub fn energy(counts: &OpCounts, cfg: &EnergyConfig) -> Result<EnergyReport> {
    cfg.validate()?;
    let processing = [
        ("mac", counts.mac_ops as f64 * cfg.mac_pj),
        ("softmax", counts.softmax_ops as f64 * cfg.mac_pj),
        ("ac", counts.ac_ops as f64 * cfg.ac_pj),
        ("and", counts.and_ops as f64 * cfg.and_pj),
        ("add", counts.add_ops as f64 * cfg.add_pj),
        ("rng", counts.rng_draws as f64 * cfg.rng_pj),
        ("compare", counts.compare_ops as f64 * cfg.compare_pj),
    ];
    let memory = [
        ("mem_read", counts.mem_reads.bits as f64 * cfg.mem_read_pj_per_bit),
        ("mem_write", counts.mem_writes.bits as f64 * cfg.mem_write_pj_per_bit),
    ];
    let processing_uj = processing.iter().map(|(_, e)| e).sum::<f64>() * PJ_TO_UJ;
    let memory_uj = memory.iter().map(|(_, e)| e).sum::<f64>() * PJ_TO_UJ;
    Ok(EnergyReport {
        processing_uj,
        memory_uj,
        total_uj: processing_uj + memory_uj,
        breakdown: processing
            .iter()
            .chain(memory.iter())
            .map(|(k, e)| (k.to_string(), e * PJ_TO_UJ))
            .collect(),
    })
}
