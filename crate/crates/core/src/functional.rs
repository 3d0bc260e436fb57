//! Time-step-level functional model of the stochastic attention block.
//!
//! Per time step the score matrix is sampled as
//! `S[i,j] ~ Bern(count_ij / D_K)` with `count_ij = sum_d Q[i,d] & K[j,d]`,
//! then `Attn[i,d] ~ Bern(sum_j (S[i,j] & V[j,d]) / N)`.
//!
//! Draw order (the canonical schedule shared with the cycle simulator):
//! the N*N score encoders draw once each in row-major order, then each row's
//! output encoder draws D_K times in `d` order. With one LFSR per encoder only
//! the per-encoder order matters, which is what lets the pipelined hardware
//! interleave phases and still match bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsaError};
use crate::lif::{encode_qkv, LifConfig, QkvLayers, QkvSpikes, QkvWeights};
use crate::matrix::{ensure_shape, RealMatrix, SpikeMatrix};
use crate::sc::{
    bernoulli_encode, bernoulli_from_count, bernoulli_from_ratio, derive_seed, EncoderModule,
    EncoderRange, LfsrRng,
};

/// Widest key dimension the 8-bit SAU counter supports.
pub const MAX_D_K: usize = 256;
/// Widest token count an output encoder can normalize by.
pub const MAX_N: usize = 1 << 16;

/// How the output encoders normalize a row sum by `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `N` must be a power of two; `(draw mod N) < sum`, exact.
    #[default]
    PowerOfTwo,
    /// Any `N`; compares against `round(sum * 2^16 / N)`. Not exact.
    General,
}

/// Whether score encoders own an LFSR each or share one per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RngSharing {
    #[default]
    PerEncoder,
    /// All score encoders of row `i` draw from one LFSR in `j` order.
    SharedPerRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaConfig {
    /// Tokens.
    pub n: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Key dimension.
    pub d_k: usize,
    /// Time steps.
    pub t: usize,
    pub global_seed: u64,
    pub input_range: EncoderRange,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub sharing: RngSharing,
}

impl SsaConfig {
    pub fn new(n: usize, d: usize, d_k: usize, t: usize, global_seed: u64) -> Result<Self> {
        let cfg = Self {
            n,
            d,
            d_k,
            t,
            global_seed,
            input_range: EncoderRange::unit(),
            normalization: Normalization::PowerOfTwo,
            sharing: RngSharing::PerEncoder,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(SsaError::Config("embedding dimension D must be positive".into()));
        }
        check_d_k(self.d_k)?;
        check_n(self.n, self.normalization)
    }
}

pub fn check_d_k(d_k: usize) -> Result<()> {
    if d_k == 0 || !d_k.is_power_of_two() || d_k > MAX_D_K {
        return Err(SsaError::NotPowerOfTwo {
            what: "D_K",
            value: d_k,
            min: 1,
            max: MAX_D_K,
        });
    }
    Ok(())
}

pub fn check_n(n: usize, normalization: Normalization) -> Result<()> {
    match normalization {
        Normalization::PowerOfTwo if n == 0 || !n.is_power_of_two() || n > MAX_N => {
            Err(SsaError::NotPowerOfTwo {
                what: "N",
                value: n,
                min: 1,
                max: MAX_N,
            })
        }
        Normalization::General if n == 0 || n > MAX_N => Err(SsaError::Config(format!(
            "N must be in [1, {MAX_N}], got {n}"
        ))),
        _ => Ok(()),
    }
}

/// LFSRs for the score and output encoders of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderBank {
    n: usize,
    sharing: RngSharing,
    normalization: Normalization,
    score: Vec<LfsrRng>,
    output: Vec<LfsrRng>,
}

impl EncoderBank {
    pub fn new(global_seed: u64, n: usize, sharing: RngSharing, normalization: Normalization) -> Self {
        let seeded = |module, row, col| {
            LfsrRng::new(derive_seed(global_seed, module, row, col)).expect("derived seeds are nonzero")
        };
        let score = match sharing {
            RngSharing::PerEncoder => (0..n * n)
                .map(|idx| seeded(EncoderModule::Score, idx / n, idx % n))
                .collect(),
            RngSharing::SharedPerRow => (0..n)
                .map(|i| seeded(EncoderModule::Score, i, 0x0FFF_FFFF))
                .collect(),
        };
        let output = (0..n).map(|i| seeded(EncoderModule::Output, i, 0)).collect();
        Self {
            n,
            sharing,
            normalization,
            score,
            output,
        }
    }

    pub fn for_config(cfg: &SsaConfig) -> Self {
        Self::new(cfg.global_seed, cfg.n, cfg.sharing, cfg.normalization)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    #[inline]
    pub fn score_rng(&mut self, i: usize, j: usize) -> &mut LfsrRng {
        match self.sharing {
            RngSharing::PerEncoder => &mut self.score[i * self.n + j],
            RngSharing::SharedPerRow => &mut self.score[i],
        }
    }

    #[inline]
    pub fn output_rng(&mut self, i: usize) -> &mut LfsrRng {
        &mut self.output[i]
    }

    /// Score encoder: Bernoulli(count / D_K). Returns (bit, draw).
    #[inline]
    pub fn encode_score(&mut self, i: usize, j: usize, count: u32, d_k: u32) -> Result<(bool, u16)> {
        let rng = self.score_rng(i, j);
        // The next draw is the current register value.
        let draw = rng.state();
        let bit = bernoulli_from_count(count, d_k, rng)?;
        Ok((bit, draw))
    }

    /// Output encoder: Bernoulli(sum / N). Returns (bit, draw).
    #[inline]
    pub fn encode_output(&mut self, i: usize, sum: u32) -> Result<(bool, u16)> {
        let n = self.n as u32;
        let normalization = self.normalization;
        let rng = self.output_rng(i);
        let draw = rng.state();
        let bit = match normalization {
            Normalization::PowerOfTwo => bernoulli_from_count(sum, n, rng)?,
            Normalization::General => bernoulli_from_ratio(sum, n, rng)?,
        };
        Ok((bit, draw))
    }
}

/// Everything sampled and computed during one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaStepOutput {
    /// Sampled attention scores, N x N.
    pub s: SpikeMatrix,
    /// Sampled attention output, N x D_K.
    pub attn: SpikeMatrix,
    /// Exact Bernoulli parameters behind `s`.
    pub s_params: RealMatrix,
    /// Exact Bernoulli parameters behind `attn`, given `s`.
    pub attn_params: RealMatrix,
    /// LFSR word consumed by each score encoder, row-major N x N.
    pub s_draws: Vec<u16>,
    /// LFSR word consumed by each output draw, row-major N x D_K.
    pub attn_draws: Vec<u16>,
}

impl SsaStepOutput {
    /// Re-derives every sampled bit from the recorded parameters and draws.
    /// Only meaningful for power-of-two normalization.
    pub fn replay_consistent(&self) -> bool {
        let (n, d_k) = self.attn.shape();
        let fires = |p: f64, denom: usize, draw: u16| {
            let count = (p * denom as f64) as usize;
            (draw as usize & (denom - 1)) < count
        };
        let s_ok = (0..n * n).all(|idx| {
            let (i, j) = (idx / n, idx % n);
            self.s.get(i, j) == fires(self.s_params.get(i, j), d_k, self.s_draws[idx])
        });
        let a_ok = (0..n * d_k).all(|idx| {
            let (i, d) = (idx / d_k, idx % d_k);
            self.attn.get(i, d) == fires(self.attn_params.get(i, d), n, self.attn_draws[idx])
        });
        s_ok && a_ok
    }
}

fn check_step_inputs(q_t: &SpikeMatrix, k_t: &SpikeMatrix, v_t: &SpikeMatrix, n: usize) -> Result<()> {
    let (rows, d_k) = q_t.shape();
    ensure_shape("ssa_step (Q)", (n, q_t.cols()), (rows, d_k))?;
    ensure_shape("ssa_step (K)", (n, d_k), k_t.shape())?;
    ensure_shape("ssa_step (V)", (n, d_k), v_t.shape())?;
    if d_k > MAX_D_K || n > MAX_N {
        return Err(SsaError::CounterOverflow {
            count: d_k.max(n) as u32,
            denom: if d_k > MAX_D_K { MAX_D_K as u32 } else { MAX_N as u32 },
        });
    }
    check_d_k(d_k)
}

/// Samples `S^t` and `Attn^t` from one step of spiking Q/K/V.
pub fn ssa_step(
    q_t: &SpikeMatrix,
    k_t: &SpikeMatrix,
    v_t: &SpikeMatrix,
    bank: &mut EncoderBank,
) -> Result<SsaStepOutput> {
    let n = bank.n();
    check_step_inputs(q_t, k_t, v_t, n)?;
    let d_k = q_t.cols();

    let mut s = SpikeMatrix::zeros(n, n);
    let mut s_params = RealMatrix::zeros(n, n);
    let mut s_draws = Vec::with_capacity(n * n);
    for i in 0..n {
        let q_row = q_t.row(i);
        for j in 0..n {
            let count = q_row
                .iter()
                .zip(k_t.row(j))
                .map(|(&a, &b)| (a & b) as u32)
                .sum::<u32>();
            let (bit, draw) = bank.encode_score(i, j, count, d_k as u32)?;
            s.set(i, j, bit);
            s_params.set(i, j, count as f64 / d_k as f64);
            s_draws.push(draw);
        }
    }

    let mut attn = SpikeMatrix::zeros(n, d_k);
    let mut attn_params = RealMatrix::zeros(n, d_k);
    let mut attn_draws = Vec::with_capacity(n * d_k);
    for i in 0..n {
        for d in 0..d_k {
            let sum = (0..n)
                .map(|j| (s.get(i, j) & v_t.get(j, d)) as u32)
                .sum::<u32>();
            let (bit, draw) = bank.encode_output(i, sum)?;
            attn.set(i, d, bit);
            attn_params.set(i, d, sum as f64 / n as f64);
            attn_draws.push(draw);
        }
    }

    Ok(SsaStepOutput {
        s,
        attn,
        s_params,
        attn_params,
        s_draws,
        attn_draws,
    })
}

enum SpikeSource {
    Lif {
        x: RealMatrix,
        weights: QkvWeights,
        layers: QkvLayers,
        range: EncoderRange,
        encoders: Vec<LfsrRng>,
    },
    Independent {
        probs: [RealMatrix; 3],
        encoders: [Vec<LfsrRng>; 3],
    },
}

fn encoder_grid(seed: u64, module: EncoderModule, rows: usize, cols: usize) -> Vec<LfsrRng> {
    (0..rows * cols)
        .map(|idx| {
            LfsrRng::new(derive_seed(seed, module, idx / cols, idx % cols))
                .expect("derived seeds are nonzero")
        })
        .collect()
}

fn encode_matrix(values: &RealMatrix, range: &EncoderRange, encoders: &mut [LfsrRng]) -> SpikeMatrix {
    let cols = values.cols();
    SpikeMatrix::from_fn(values.rows(), cols, |r, c| {
        bernoulli_encode(values.get(r, c), range, &mut encoders[r * cols + c])
    })
}

/// Step-by-step driver that owns all state carried across time steps.
pub struct SsaRunner {
    source: SpikeSource,
    bank: EncoderBank,
    steps_taken: usize,
}

impl SsaRunner {
    /// Full pipeline: Bernoulli-encode `x` each step, run the LIF Q/K/V
    /// layers, then the attention block.
    pub fn lif(x: &RealMatrix, weights: &QkvWeights, lif_cfg: LifConfig, cfg: &SsaConfig) -> Result<Self> {
        cfg.validate()?;
        ensure_shape("ssa_run (X)", (cfg.n, cfg.d), x.shape())?;
        ensure_shape("ssa_run (W)", (cfg.d, cfg.d_k), weights.w_q.shape())?;
        Ok(Self {
            source: SpikeSource::Lif {
                x: x.clone(),
                weights: weights.clone(),
                layers: QkvLayers::new(lif_cfg, cfg.n, cfg.d_k),
                range: cfg.input_range,
                encoders: encoder_grid(cfg.global_seed, EncoderModule::Input, cfg.n, cfg.d),
            },
            bank: EncoderBank::for_config(cfg),
            steps_taken: 0,
        })
    }

    /// Bypasses the LIF layer: Q, K, V are independent Bernoulli streams
    /// with the given per-entry probabilities (each N x D_K).
    pub fn independent(pq: &RealMatrix, pk: &RealMatrix, pv: &RealMatrix, cfg: &SsaConfig) -> Result<Self> {
        cfg.validate()?;
        let shape = (cfg.n, cfg.d_k);
        ensure_shape("independent input (Pq)", shape, pq.shape())?;
        ensure_shape("independent input (Pk)", shape, pk.shape())?;
        ensure_shape("independent input (Pv)", shape, pv.shape())?;
        for p in [pq, pk, pv] {
            p.ensure_unit_range()?;
        }
        let grid = |m| encoder_grid(cfg.global_seed, m, cfg.n, cfg.d_k);
        Ok(Self {
            source: SpikeSource::Independent {
                probs: [pq.clone(), pk.clone(), pv.clone()],
                encoders: [
                    grid(EncoderModule::IndependentQ),
                    grid(EncoderModule::IndependentK),
                    grid(EncoderModule::IndependentV),
                ],
            },
            bank: EncoderBank::for_config(cfg),
            steps_taken: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    fn next_inputs(&mut self) -> Result<QkvSpikes> {
        match &mut self.source {
            SpikeSource::Lif {
                x,
                weights,
                layers,
                range,
                encoders,
            } => {
                let x_t = encode_matrix(x, range, encoders);
                encode_qkv(&x_t, weights, layers)
            }
            SpikeSource::Independent { probs, encoders } => {
                let unit = EncoderRange::unit();
                let [eq, ek, ev] = encoders;
                Ok(QkvSpikes {
                    q: encode_matrix(&probs[0], &unit, eq),
                    k: encode_matrix(&probs[1], &unit, ek),
                    v: encode_matrix(&probs[2], &unit, ev),
                })
            }
        }
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<(QkvSpikes, SsaStepOutput)> {
        let qkv = self.next_inputs()?;
        let out = ssa_step(&qkv.q, &qkv.k, &qkv.v, &mut self.bank)?;
        self.steps_taken += 1;
        Ok((qkv, out))
    }

    pub fn run(mut self, steps: usize) -> Result<SsaRun> {
        let mut run = SsaRun::default();
        for _ in 0..steps {
            let (qkv, out) = self.step()?;
            run.qkv.push(qkv);
            run.steps.push(out);
        }
        Ok(run)
    }
}

/// Per-step inputs and outputs of a functional run.
#[derive(Debug, Clone, Default)]
pub struct SsaRun {
    pub qkv: Vec<QkvSpikes>,
    pub steps: Vec<SsaStepOutput>,
}

impl SsaRun {
    pub fn decode(&self) -> Result<RealMatrix> {
        decode_output(&self.steps)
    }
}

/// Runs `cfg.t` steps of the full LIF-driven pipeline.
pub fn ssa_run(x: &RealMatrix, weights: &QkvWeights, lif_cfg: LifConfig, cfg: &SsaConfig) -> Result<SsaRun> {
    SsaRunner::lif(x, weights, lif_cfg, cfg)?.run(cfg.t)
}

/// Runs `cfg.t` steps with independent Bernoulli Q/K/V inputs.
pub fn ssa_run_independent(pq: &RealMatrix, pk: &RealMatrix, pv: &RealMatrix, cfg: &SsaConfig) -> Result<SsaRun> {
    SsaRunner::independent(pq, pk, pv, cfg)?.run(cfg.t)
}

/// Rate decoding: elementwise mean of the attention bits over time.
pub fn decode_output(outputs: &[SsaStepOutput]) -> Result<RealMatrix> {
    decode_spikes(outputs.iter().map(|o| &o.attn))
}

pub fn decode_spikes<'a>(mut spikes: impl Iterator<Item = &'a SpikeMatrix>) -> Result<RealMatrix> {
    let first = spikes.next().ok_or(SsaError::EmptySequence)?;
    let (rows, cols) = first.shape();
    let mut counts: Vec<u64> = first.as_bytes().iter().map(|&b| b as u64).collect();
    let mut total = 1u64;
    for m in spikes {
        ensure_shape("decode_output", (rows, cols), m.shape())?;
        for (c, &b) in counts.iter_mut().zip(m.as_bytes()) {
            *c += b as u64;
        }
        total += 1;
    }
    RealMatrix::new(rows, cols, counts.iter().map(|&c| c as f64 / total as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_attn_params, exact_ssa_params};

    fn bank(n: usize, seed: u64) -> EncoderBank {
        EncoderBank::new(seed, n, RngSharing::PerEncoder, Normalization::PowerOfTwo)
    }

    #[test]
    fn config_validation() {
        assert!(SsaConfig::new(4, 8, 8, 16, 0).is_ok());
        let err = SsaConfig::new(4, 8, 3, 16, 0).unwrap_err();
        assert!(err.to_string().contains("power-of-two"), "{err}");
        assert!(SsaConfig::new(3, 8, 8, 16, 0).is_err());
        assert!(SsaConfig::new(4, 8, 512, 16, 0).is_err());
        let mut cfg = SsaConfig::new(4, 8, 8, 16, 0).unwrap();
        cfg.n = 3;
        cfg.normalization = Normalization::General;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn all_ones_step_is_all_ones() {
        for seed in 0..5 {
            let ones = SpikeMatrix::ones(4, 8);
            let out = ssa_step(&ones, &ones, &ones, &mut bank(4, seed)).unwrap();
            assert_eq!(out.s, SpikeMatrix::ones(4, 4));
            assert_eq!(out.attn, ones);
        }
    }

    #[test]
    fn all_zero_step_is_all_zero() {
        let z = SpikeMatrix::zeros(2, 4);
        let out = ssa_step(&z, &z, &z, &mut bank(2, 9)).unwrap();
        assert_eq!(out.s.count_ones() + out.attn.count_ones(), 0);
    }

    #[test]
    fn step_matches_oracle_params_and_draws() {
        let q = SpikeMatrix::new(2, 4, vec![1, 0, 1, 1, 0, 1, 1, 0]).unwrap();
        let k = SpikeMatrix::new(2, 4, vec![1, 1, 0, 1, 0, 1, 1, 1]).unwrap();
        let v = SpikeMatrix::new(2, 4, vec![1, 0, 1, 0, 0, 1, 1, 0]).unwrap();
        let mut b = bank(2, 77);
        let mut shadow = b.clone();
        let out = ssa_step(&q, &k, &v, &mut b).unwrap();
        assert_eq!(out.s_params, exact_ssa_params(&q, &k).unwrap());
        assert_eq!(out.attn_params, exact_attn_params(&out.s, &v).unwrap());
        // Independently replay the canonical schedule.
        for i in 0..2 {
            for j in 0..2 {
                let c = (out.s_params.get(i, j) * 4.0) as u32;
                let bit = bernoulli_from_count(c, 4, shadow.score_rng(i, j)).unwrap();
                assert_eq!(bit, out.s.get(i, j));
            }
        }
        for i in 0..2 {
            for d in 0..4 {
                let c = (out.attn_params.get(i, d) * 2.0) as u32;
                let bit = bernoulli_from_count(c, 2, shadow.output_rng(i)).unwrap();
                assert_eq!(bit, out.attn.get(i, d));
            }
        }
        assert_eq!(shadow, b);
        assert!(out.replay_consistent());
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let a = SpikeMatrix::zeros(2, 4);
        let b = SpikeMatrix::zeros(2, 3);
        assert!(ssa_step(&a, &b, &a, &mut bank(2, 0)).is_err());
        assert!(ssa_step(&a, &a, &a, &mut bank(4, 0)).is_err());
        let wide = SpikeMatrix::zeros(2, 512);
        assert!(ssa_step(&wide, &wide, &wide, &mut bank(2, 0)).is_err());
    }

    #[test]
    fn lif_run_with_low_input_is_silent() {
        let cfg = SsaConfig::new(2, 3, 4, 10, 5).unwrap();
        let x = RealMatrix::zeros(2, 3);
        let w = RealMatrix::filled(3, 4, 2.0);
        let weights = QkvWeights::new(w.clone(), w.clone(), w).unwrap();
        let run = ssa_run(&x, &weights, LifConfig::default(), &cfg).unwrap();
        assert_eq!(run.steps.len(), 10);
        assert!(run.steps.iter().all(|o| o.attn.count_ones() == 0 && o.s.count_ones() == 0));
        assert_eq!(run.decode().unwrap(), RealMatrix::zeros(2, 4));
    }

    #[test]
    fn zero_steps_is_empty() {
        let cfg = SsaConfig::new(2, 3, 4, 0, 5).unwrap();
        let w = RealMatrix::filled(3, 4, 1.0);
        let weights = QkvWeights::new(w.clone(), w.clone(), w).unwrap();
        let run = ssa_run(&RealMatrix::zeros(2, 3), &weights, LifConfig::default(), &cfg).unwrap();
        assert!(run.steps.is_empty());
        assert_eq!(run.decode(), Err(SsaError::EmptySequence));
    }

    #[test]
    fn decode_single_step_is_identity() {
        let z = SpikeMatrix::zeros(2, 2);
        let attn = SpikeMatrix::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let out = SsaStepOutput {
            s: z.clone(),
            attn: attn.clone(),
            s_params: RealMatrix::zeros(2, 2),
            attn_params: RealMatrix::zeros(2, 2),
            s_draws: vec![1; 4],
            attn_draws: vec![1; 4],
        };
        assert_eq!(decode_output(&[out]).unwrap(), attn.to_real());
    }

    #[test]
    fn general_normalization_runs_with_odd_n() {
        let mut cfg = SsaConfig::new(4, 2, 4, 8, 1).unwrap();
        cfg.n = 3;
        cfg.normalization = Normalization::General;
        let ones = RealMatrix::filled(3, 4, 1.0);
        let run = ssa_run_independent(&ones, &ones, &ones, &cfg).unwrap();
        assert_eq!(run.decode().unwrap(), ones);
    }

    #[test]
    fn shared_rows_differ_from_per_encoder_but_stay_deterministic() {
        let mut cfg = SsaConfig::new(4, 2, 8, 32, 3).unwrap();
        let p = RealMatrix::filled(4, 8, 0.5);
        let a = ssa_run_independent(&p, &p, &p, &cfg).unwrap();
        cfg.sharing = RngSharing::SharedPerRow;
        let b = ssa_run_independent(&p, &p, &p, &cfg).unwrap();
        let c = ssa_run_independent(&p, &p, &p, &cfg).unwrap();
        assert_eq!(a.qkv, b.qkv);
        assert_ne!(a.steps, b.steps);
        assert_eq!(b.steps, c.steps);
    }
}
