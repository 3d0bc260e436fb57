use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::{ensure_shape, SpikeMatrix};

/// Bits present on the array's input ports during one accumulate cycle.
///
/// `q[i]` drives every SAU in output row `i`; `k[j]` and `v[j]` drive every
/// SAU that pairs with token `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortBits {
    pub q: Vec<u8>,
    pub k: Vec<u8>,
    pub v: Vec<u8>,
}

/// One [`PortBits`] per accumulate cycle of a time step (`D_K` entries).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortStreams {
    pub cycles: Vec<PortBits>,
}

/// At cycle `c`, port `j` carries `K[j,c]` and `V[j,c]`; port `i` carries `Q[i,c]`.
pub fn stream_schedule(q_t: &SpikeMatrix, k_t: &SpikeMatrix, v_t: &SpikeMatrix) -> Result<PortStreams> {
    ensure_shape("stream_schedule (K)", q_t.shape(), k_t.shape())?;
    ensure_shape("stream_schedule (V)", q_t.shape(), v_t.shape())?;
    let (n, d_k) = q_t.shape();
    let column = |m: &SpikeMatrix, c: usize| (0..n).map(|r| m.get(r, c) as u8).collect::<Vec<u8>>();
    let cycles = (0..d_k)
        .map(|c| PortBits {
            q: column(q_t, c),
            k: column(k_t, c),
            v: column(v_t, c),
        })
        .collect();
    Ok(PortStreams { cycles })
}
