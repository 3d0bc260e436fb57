//! Cycle-accurate model of the N x N stochastic attention unit (SAU) array.
//!
//! SAU `(i, j)` pairs query row `i` with key/value row `j`. Each time step
//! takes two phases of `D_K` cycles:
//!
//! * accumulate: cycle `c` ANDs `Q[i,c]` with `K[j,c]` into a counter
//!   and shifts `V[j,c]` into a `D_K`-bit FIFO;
//! * weighted sum: at the phase boundary every counter is re-encoded into
//!   the held score bit `S[i,j]` and cleared; then for `D_K` cycles each SAU
//!   outputs `S[i,j] & V[j,d]` (popped from its FIFO), the row adder sums the
//!   `N` outputs of row `i`, and the row's output encoder emits `Attn[i,d]`.
//!
//! The controller is self-timed: a phase boundary fires at the start of the
//! cycle following the `D_K`-th accumulate cycle. Feeding the next step's
//! ports immediately overlaps its accumulate phase with the current weighted
//! sum, giving `D_K * (T + 1)` cycles for `T` steps; idling between steps
//! gives `2 * D_K` cycles per step.

mod fifo;
mod schedule;
mod trace;

pub use fifo::{FifoFault, ShiftFifo};
pub use schedule::{stream_schedule, PortBits, PortStreams};
pub use trace::{
    hex_pack, BlockPhase, CycleRecord, CycleTrace, EmittedBit, ScoreLatch, TraceHeader, TraceLine,
    TraceTotals, TRACE_FORMAT, TRACE_VERSION,
};

use crate::error::{Result, SsaError};
use crate::functional::{check_d_k, check_n, EncoderBank, SsaConfig};
use crate::lif::QkvSpikes;
use crate::matrix::SpikeMatrix;

/// Registers of one SAU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SauState {
    /// AND-count of the step being accumulated. Holds values up to `D_K`,
    /// so `D_K = 256` needs the carry bit beyond the 8-bit output.
    pub counter: u16,
    /// Held score bit for the weighted-sum phase.
    pub s_reg: bool,
    pub v_fifo: ShiftFifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct WeightedSum {
    step: usize,
    d: usize,
}

/// The whole SSA block: SAU array, row adders, encoders and controller.
#[derive(Debug, Clone)]
pub struct SsaBlock {
    n: usize,
    d_k: usize,
    saus: Vec<SauState>,
    bank: EncoderBank,
    cycle: u64,
    acc_cycles: usize,
    acc_step: usize,
    weighted_sum: Option<WeightedSum>,
    full_trace: bool,
}

/// Attention output and latched scores of one time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestepOutput {
    pub attn: SpikeMatrix,
    pub s: SpikeMatrix,
    pub trace: CycleTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamOutput {
    pub attn: Vec<SpikeMatrix>,
    pub s: Vec<SpikeMatrix>,
    pub trace: CycleTrace,
}

impl StreamOutput {
    pub fn cycles(&self) -> u64 {
        self.trace.records.len() as u64
    }
}

impl SsaBlock {
    pub fn new(d_k: usize, bank: EncoderBank) -> Result<Self> {
        check_d_k(d_k)?;
        let n = bank.n();
        check_n(n, bank.normalization())?;
        let saus = (0..n * n)
            .map(|_| SauState {
                counter: 0,
                s_reg: false,
                v_fifo: ShiftFifo::new(d_k),
            })
            .collect();
        Ok(Self {
            n,
            d_k,
            saus,
            bank,
            cycle: 0,
            acc_cycles: 0,
            acc_step: 0,
            weighted_sum: None,
            full_trace: false,
        })
    }

    pub fn for_config(cfg: &SsaConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(cfg.d_k, EncoderBank::for_config(cfg))
    }

    /// Record every SAU counter in each cycle record.
    pub fn with_full_trace(mut self, full: bool) -> Self {
        self.full_trace = full;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    pub fn sau_count(&self) -> usize {
        self.saus.len()
    }

    pub fn sau(&self, i: usize, j: usize) -> &SauState {
        &self.saus[i * self.n + j]
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn is_idle(&self) -> bool {
        self.acc_cycles == 0 && self.weighted_sum.is_none()
    }

    fn fifo_error(&self, idx: usize, fault: FifoFault) -> SsaError {
        SsaError::Fifo {
            row: idx / self.n,
            col: idx % self.n,
            kind: match fault {
                FifoFault::Overflow => "overflow",
                FifoFault::Underflow => "underflow",
            },
        }
    }

    /// Advances the block by one clock. `ports` is `Some` in accumulate
    /// cycles and `None` otherwise.
    pub fn block_cycle(&mut self, ports: Option<&PortBits>) -> Result<CycleRecord> {
        let n = self.n;
        if let Some(p) = ports {
            for (name, bits) in [("q", &p.q), ("k", &p.k), ("v", &p.v)] {
                if bits.len() != n || bits.iter().any(|&b| b > 1) {
                    return Err(SsaError::Config(format!(
                        "port vector {name} must hold {n} bits"
                    )));
                }
            }
        }
        let mut record = CycleRecord {
            cycle: self.cycle,
            phase: BlockPhase::Idle,
            ports: ports.cloned(),
            scores: None,
            emitted: Vec::new(),
            and_ops: 0,
            counter_ops: 0,
            row_adds: 0,
            rng_draws: 0,
            max_counter: 0,
            counters: None,
        };

        // Phase boundary: latch scores from the completed accumulation.
        if self.acc_cycles == self.d_k {
            if self.weighted_sum.is_some() {
                return Err(SsaError::Config(
                    "schedule conflict: new scores while weighted sum in progress".into(),
                ));
            }
            let mut latched = SpikeMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let idx = i * n + j;
                    let count = self.saus[idx].counter as u32;
                    let (bit, _) = self.bank.encode_score(i, j, count, self.d_k as u32)?;
                    let sau = &mut self.saus[idx];
                    sau.s_reg = bit;
                    sau.counter = 0;
                    latched.set(i, j, bit);
                }
            }
            record.rng_draws += (n * n) as u32;
            record.scores = Some(ScoreLatch {
                step: self.acc_step,
                bits: latched,
            });
            self.weighted_sum = Some(WeightedSum {
                step: self.acc_step,
                d: 0,
            });
            self.acc_step += 1;
            self.acc_cycles = 0;
        }

        let mut weighted = false;
        if let Some(ws) = self.weighted_sum {
            weighted = true;
            for i in 0..n {
                let mut sum = 0u32;
                for j in 0..n {
                    let idx = i * n + j;
                    let v_bit = self.saus[idx]
                        .v_fifo
                        .pop()
                        .map_err(|f| self.fifo_error(idx, f))?;
                    sum += (self.saus[idx].s_reg & v_bit) as u32;
                }
                let (bit, _) = self.bank.encode_output(i, sum)?;
                record.emitted.push(EmittedBit {
                    step: ws.step,
                    row: i,
                    col: ws.d,
                    bit,
                });
            }
            record.and_ops += (n * n) as u32;
            record.row_adds += n as u32;
            record.rng_draws += n as u32;
            self.weighted_sum = (ws.d + 1 < self.d_k).then_some(WeightedSum {
                step: ws.step,
                d: ws.d + 1,
            });
        }

        if let Some(p) = ports {
            for i in 0..n {
                for j in 0..n {
                    let idx = i * n + j;
                    let sau = &mut self.saus[idx];
                    sau.counter += (p.q[i] & p.k[j]) as u16;
                    if sau.counter as usize > self.d_k {
                        return Err(SsaError::SauCounterOverflow {
                            row: i,
                            col: j,
                            value: sau.counter,
                            d_k: self.d_k,
                        });
                    }
                    sau.v_fifo
                        .push(p.v[j] != 0)
                        .map_err(|f| self.fifo_error(idx, f))?;
                }
            }
            record.and_ops += (n * n) as u32;
            record.counter_ops += (n * n) as u32;
            self.acc_cycles += 1;
        }

        record.phase = match (ports.is_some(), weighted) {
            (true, true) => BlockPhase::Overlapped,
            (true, false) => BlockPhase::Accumulate,
            (false, true) => BlockPhase::WeightedSum,
            (false, false) => BlockPhase::Idle,
        };
        record.max_counter = self.saus.iter().map(|s| s.counter).max().unwrap_or(0);
        if self.full_trace {
            record.counters = Some(self.saus.iter().map(|s| s.counter).collect());
        }
        self.cycle += 1;
        Ok(record)
    }

    fn check_inputs(&self, qkv: &QkvSpikes) -> Result<()> {
        let expected = (self.n, self.d_k);
        for (name, m) in [("Q", &qkv.q), ("K", &qkv.k), ("V", &qkv.v)] {
            if m.shape() != expected {
                return Err(SsaError::DimensionMismatch {
                    context: match name {
                        "Q" => "SAU array input (Q)",
                        "K" => "SAU array input (K)",
                        _ => "SAU array input (V)",
                    },
                    expected,
                    actual: m.shape(),
                });
            }
        }
        Ok(())
    }

    /// Runs one unpipelined time step: `D_K` accumulate cycles followed by
    /// `D_K` weighted-sum cycles.
    pub fn run_timestep(
        &mut self,
        q_t: &SpikeMatrix,
        k_t: &SpikeMatrix,
        v_t: &SpikeMatrix,
    ) -> Result<TimestepOutput> {
        let qkv = QkvSpikes {
            q: q_t.clone(),
            k: k_t.clone(),
            v: v_t.clone(),
        };
        let out = self.run_stream(std::slice::from_ref(&qkv), false)?;
        Ok(TimestepOutput {
            attn: out.attn.into_iter().next().expect("one step in, one step out"),
            s: out.s.into_iter().next().expect("one step in, one step out"),
            trace: out.trace,
        })
    }

    /// Runs a sequence of time steps, overlapping consecutive steps when
    /// `pipelined` is set.
    pub fn run_stream(&mut self, steps: &[QkvSpikes], pipelined: bool) -> Result<StreamOutput> {
        if !self.is_idle() {
            return Err(SsaError::Config("block must be idle to start a stream".into()));
        }
        for qkv in steps {
            self.check_inputs(qkv)?;
        }
        let first_step = self.acc_step;
        let mut trace = CycleTrace::new(self.n, self.d_k, pipelined, self.full_trace);
        for qkv in steps {
            let schedule = stream_schedule(&qkv.q, &qkv.k, &qkv.v)?;
            for ports in &schedule.cycles {
                trace.records.push(self.block_cycle(Some(ports))?);
            }
            if !pipelined {
                self.drain(&mut trace)?;
            }
        }
        self.drain(&mut trace)?;

        let mut attn = vec![SpikeMatrix::zeros(self.n, self.d_k); steps.len()];
        let mut s = vec![SpikeMatrix::zeros(self.n, self.n); steps.len()];
        for r in &trace.records {
            if let Some(latch) = &r.scores {
                s[latch.step - first_step] = latch.bits.clone();
            }
            for e in &r.emitted {
                attn[e.step - first_step].set(e.row, e.col, e.bit);
            }
        }
        Ok(StreamOutput { attn, s, trace })
    }

    /// Clocks with idle ports until all pending work has been emitted.
    fn drain(&mut self, trace: &mut CycleTrace) -> Result<()> {
        while !self.is_idle() {
            trace.records.push(self.block_cycle(None)?);
        }
        Ok(())
    }
}
