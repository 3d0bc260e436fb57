//! Per-cycle records of the SAU array and their line-delimited JSON form.
//!
//! A trace file starts with one header object, followed by one object per
//! clock cycle:
//!
//! ```text
//! {"format":"ssa-cycle-trace","version":1,"n":2,"d_k":4,"pipelined":false,"full":false}
//! {"cycle":0,"phase":"accumulate","q":"01","k":"03","v":"01","and":4,"cnt":4,"add":0,"draws":0,"max_counter":1}
//! {"cycle":4,"phase":"weighted-sum","s":["01","03"],"emit":[[0,0,0,1],[0,1,0,0]],"and":4,"cnt":0,"add":2,"draws":6,"max_counter":0}
//! ```
//!
//! * `q`, `k`, `v`: port bits of this cycle, hex-packed LSB-first (bit `i`
//!   of the vector is bit `i % 8` of byte `i / 8`); absent when no input.
//! * `s`: score bits latched at the start of this cycle, one hex-packed
//!   string per row; absent when no latch happened.
//! * `emit`: output bits as `[step, row, d, bit]`.
//! * `and`, `cnt`, `add`, `draws`: AND-gate evaluations, counter updates,
//!   row-adder activations and LFSR draws during this cycle.
//! * `max_counter`: largest SAU counter value after this cycle.
//! * `counters`: row-major SAU counters after this cycle (full traces only).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PortBits;
use crate::error::Result;
use crate::matrix::SpikeMatrix;

pub const TRACE_FORMAT: &str = "ssa-cycle-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockPhase {
    Idle,
    Accumulate,
    WeightedSum,
    /// Accumulate of one step overlapping the weighted sum of the previous.
    Overlapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedBit {
    pub step: usize,
    pub row: usize,
    pub col: usize,
    pub bit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreLatch {
    pub step: usize,
    pub bits: SpikeMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleRecord {
    pub cycle: u64,
    pub phase: BlockPhase,
    pub ports: Option<PortBits>,
    pub scores: Option<ScoreLatch>,
    pub emitted: Vec<EmittedBit>,
    pub and_ops: u32,
    pub counter_ops: u32,
    pub row_adds: u32,
    pub rng_draws: u32,
    pub max_counter: u16,
    pub counters: Option<Vec<u16>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceTotals {
    pub cycles: u64,
    pub and_ops: u64,
    pub counter_ops: u64,
    pub row_adds: u64,
    pub rng_draws: u64,
    pub emitted_bits: u64,
    pub max_counter: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleTrace {
    pub n: usize,
    pub d_k: usize,
    pub pipelined: bool,
    pub full: bool,
    pub records: Vec<CycleRecord>,
}

impl CycleTrace {
    pub fn new(n: usize, d_k: usize, pipelined: bool, full: bool) -> Self {
        Self {
            n,
            d_k,
            pipelined,
            full,
            records: Vec::new(),
        }
    }

    pub fn append(&mut self, other: CycleTrace) {
        self.records.extend(other.records);
    }

    pub fn totals(&self) -> TraceTotals {
        let mut t = TraceTotals {
            cycles: self.records.len() as u64,
            ..TraceTotals::default()
        };
        for r in &self.records {
            t.and_ops += r.and_ops as u64;
            t.counter_ops += r.counter_ops as u64;
            t.row_adds += r.row_adds as u64;
            t.rng_draws += r.rng_draws as u64;
            t.emitted_bits += r.emitted.len() as u64;
            t.max_counter = t.max_counter.max(r.max_counter);
        }
        t
    }

    /// Cycles from the first input bit to the last output bit, inclusive.
    pub fn latency(&self) -> Option<u64> {
        let first_in = self.records.iter().find(|r| r.ports.is_some())?.cycle;
        let last_out = self.records.iter().rev().find(|r| !r.emitted.is_empty())?.cycle;
        Some(last_out + 1 - first_in)
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].cycle == w[0].cycle + 1)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = TraceHeader {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            n: self.n,
            d_k: self.d_k,
            pipelined: self.pipelined,
            full: self.full,
        };
        writeln!(out, "{}", to_json(&header))?;
        for r in &self.records {
            writeln!(out, "{}", to_json(&TraceLine::from(r)))?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("trace is ASCII")
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("trace records always serialize")
}

/// Packs a bit vector LSB-first into bytes and renders it as lowercase hex.
pub fn hex_pack(bits: &[u8]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (idx, &b) in bits.iter().enumerate() {
        bytes[idx / 8] |= (b & 1) << (idx % 8);
    }
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub d_k: usize,
    pub pipelined: bool,
    pub full: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceLine {
    pub cycle: u64,
    pub phase: BlockPhase,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub v: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub emit: Vec<[usize; 4]>,
    pub and: u32,
    pub cnt: u32,
    pub add: u32,
    pub draws: u32,
    pub max_counter: u16,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counters: Option<Vec<u16>>,
}

impl From<&CycleRecord> for TraceLine {
    fn from(r: &CycleRecord) -> Self {
        Self {
            cycle: r.cycle,
            phase: r.phase,
            q: r.ports.as_ref().map(|p| hex_pack(&p.q)),
            k: r.ports.as_ref().map(|p| hex_pack(&p.k)),
            v: r.ports.as_ref().map(|p| hex_pack(&p.v)),
            s: r.scores.as_ref().map(|latch| {
                (0..latch.bits.rows())
                    .map(|i| hex_pack(latch.bits.row(i)))
                    .collect()
            }),
            emit: r
                .emitted
                .iter()
                .map(|e| [e.step, e.row, e.col, e.bit as usize])
                .collect(),
            and: r.and_ops,
            cnt: r.counter_ops,
            add: r.row_adds,
            draws: r.rng_draws,
            max_counter: r.max_counter,
            counters: r.counters.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_pack_is_lsb_first() {
        assert_eq!(hex_pack(&[1, 0, 0, 0]), "01");
        assert_eq!(hex_pack(&[0, 1, 1]), "06");
        assert_eq!(hex_pack(&[1, 0, 0, 0, 0, 0, 0, 0, 1]), "0101");
        assert_eq!(hex_pack(&[]), "");
    }
}
