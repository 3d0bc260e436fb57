//! Discrete-time leaky integrate-and-fire layer and the spiking Q/K/V encoder.
//!
//! Per neuron and time step: `v = beta * v + I`; spike iff `v >= v_threshold`;
//! after a spike the membrane is reset to zero or reduced by the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsaError};
use crate::matrix::{ensure_shape, RealMatrix, SpikeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetMode {
    #[default]
    ToZero,
    Subtract,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifConfig {
    beta: f64,
    v_threshold: f64,
    reset: ResetMode,
}

impl LifConfig {
    pub fn new(beta: f64, v_threshold: f64, reset: ResetMode) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(SsaError::Config(format!("LIF beta must be in [0, 1), got {beta}")));
        }
        if !(v_threshold > 0.0 && v_threshold.is_finite()) {
            return Err(SsaError::Config(format!(
                "LIF threshold must be positive, got {v_threshold}"
            )));
        }
        Ok(Self {
            beta,
            v_threshold,
            reset,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v_threshold(&self) -> f64 {
        self.v_threshold
    }

    pub fn reset(&self) -> ResetMode {
        self.reset
    }
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            v_threshold: 1.0,
            reset: ResetMode::ToZero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifLayer {
    config: LifConfig,
    membrane: RealMatrix,
}

impl LifLayer {
    pub fn new(config: LifConfig, rows: usize, cols: usize) -> Self {
        Self {
            config,
            membrane: RealMatrix::zeros(rows, cols),
        }
    }

    pub fn config(&self) -> &LifConfig {
        &self.config
    }

    pub fn membrane(&self) -> &RealMatrix {
        &self.membrane
    }

    pub fn reset_state(&mut self) {
        self.membrane = RealMatrix::zeros(self.membrane.rows(), self.membrane.cols());
    }

    /// Advances every neuron by one time step.
    pub fn step(&mut self, current: &RealMatrix) -> Result<SpikeMatrix> {
        ensure_shape("lif_step", self.membrane.shape(), current.shape())?;
        let (rows, cols) = current.shape();
        let LifConfig {
            beta,
            v_threshold,
            reset,
        } = self.config;
        let mut spikes = SpikeMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let mut v = beta * self.membrane.get(r, c) + current.get(r, c);
                if !v.is_finite() {
                    return Err(SsaError::NonFinite { row: r, col: c });
                }
                if v >= v_threshold {
                    spikes.set(r, c, true);
                    v = match reset {
                        ResetMode::ToZero => 0.0,
                        ResetMode::Subtract => v - v_threshold,
                    };
                }
                self.membrane.set(r, c, v);
            }
        }
        Ok(spikes)
    }
}

/// Value-semantics form of [`LifLayer::step`].
pub fn lif_step(layer: &LifLayer, current: &RealMatrix) -> Result<(LifLayer, SpikeMatrix)> {
    let mut next = layer.clone();
    let spikes = next.step(current)?;
    Ok((next, spikes))
}

/// Projection weights, each `D x D_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct QkvWeights {
    pub w_q: RealMatrix,
    pub w_k: RealMatrix,
    pub w_v: RealMatrix,
}

impl QkvWeights {
    pub fn new(w_q: RealMatrix, w_k: RealMatrix, w_v: RealMatrix) -> Result<Self> {
        ensure_shape("QkvWeights (W_K)", w_q.shape(), w_k.shape())?;
        ensure_shape("QkvWeights (W_V)", w_q.shape(), w_v.shape())?;
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn d(&self) -> usize {
        self.w_q.rows()
    }

    pub fn d_k(&self) -> usize {
        self.w_q.cols()
    }
}

/// One LIF layer each for Q, K and V.
#[derive(Debug, Clone, PartialEq)]
pub struct QkvLayers {
    pub q: LifLayer,
    pub k: LifLayer,
    pub v: LifLayer,
}

impl QkvLayers {
    pub fn new(config: LifConfig, n: usize, d_k: usize) -> Self {
        Self {
            q: LifLayer::new(config, n, d_k),
            k: LifLayer::new(config, n, d_k),
            v: LifLayer::new(config, n, d_k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QkvSpikes {
    pub q: SpikeMatrix,
    pub k: SpikeMatrix,
    pub v: SpikeMatrix,
}

/// `X_t * W` for binary `X_t`: each output row is the sum of the weight rows
/// selected by that token's spikes. Accumulate-only, no multiplies.
pub fn spike_matmul(x_t: &SpikeMatrix, w: &RealMatrix) -> Result<RealMatrix> {
    if x_t.cols() != w.rows() {
        return Err(SsaError::DimensionMismatch {
            context: "spike_matmul",
            expected: (x_t.rows(), w.rows()),
            actual: x_t.shape(),
        });
    }
    let mut out = RealMatrix::zeros(x_t.rows(), w.cols());
    let mut acc = vec![0.0; w.cols()];
    for i in 0..x_t.rows() {
        acc.fill(0.0);
        for (d, &bit) in x_t.row(i).iter().enumerate() {
            if bit != 0 {
                for (a, &wv) in acc.iter_mut().zip(w.row(d)) {
                    *a += wv;
                }
            }
        }
        for (c, &a) in acc.iter().enumerate() {
            out.set(i, c, a);
        }
    }
    Ok(out)
}

/// Drives the three LIF layers with `X_t * W_Q`, `X_t * W_K`, `X_t * W_V`.
pub fn encode_qkv(
    x_t: &SpikeMatrix,
    weights: &QkvWeights,
    layers: &mut QkvLayers,
) -> Result<QkvSpikes> {
    let q = layers.q.step(&spike_matmul(x_t, &weights.w_q)?)?;
    let k = layers.k.step(&spike_matmul(x_t, &weights.w_k)?)?;
    let v = layers.v.step(&spike_matmul(x_t, &weights.w_v)?)?;
    Ok(QkvSpikes { q, k, v })
}
