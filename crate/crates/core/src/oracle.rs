//! Exact reference computations for attention.
//!
//! Two families live here: floating-point attention (softmax and the
//! softmax-free linear form) and the exact Bernoulli parameters of the
//! stochastic pathway. The stochastic pathway normalizes the score product by
//! `1/D_K` and the value product by `1/N`, where floating-point attention
//! uses `1/sqrt(D_K)`; both are exposed so the difference stays visible.

use crate::error::{Result, SsaError};
use crate::matrix::{ensure_shape, RealMatrix, SpikeMatrix};

fn check_qkv(q: &RealMatrix, k: &RealMatrix, v: &RealMatrix) -> Result<()> {
    ensure_shape("attention (K)", q.shape(), k.shape())?;
    ensure_shape("attention (V)", (k.rows(), q.cols()), v.shape())?;
    Ok(())
}

/// `softmax(Q K^T / sqrt(d_k)) V` with a row-wise, max-subtracted softmax.
pub fn softmax_attention(
    q: &RealMatrix,
    k: &RealMatrix,
    v: &RealMatrix,
    d_k: usize,
) -> Result<RealMatrix> {
    check_qkv(q, k, v)?;
    if d_k == 0 {
        return Err(SsaError::Config("d_k must be positive".into()));
    }
    let scale = 1.0 / (d_k as f64).sqrt();
    let scores = q.matmul(&k.transpose())?.scale(scale);
    let n = scores.rows();
    let mut weights = RealMatrix::zeros(n, scores.cols());
    for i in 0..n {
        let row = scores.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (j, e) in exps.iter().enumerate() {
            weights.set(i, j, e / total);
        }
        let row_sum: f64 = weights.row(i).iter().sum();
        assert!((row_sum - 1.0).abs() < 1e-9, "softmax row {i} sums to {row_sum}");
    }
    weights.matmul(v)
}

/// Softmax-free attention with the conventional scaling: `(Q K^T / sqrt(d_k)) V`.
pub fn linear_attention(
    q: &RealMatrix,
    k: &RealMatrix,
    v: &RealMatrix,
    d_k: usize,
) -> Result<RealMatrix> {
    check_qkv(q, k, v)?;
    if d_k == 0 {
        return Err(SsaError::Config("d_k must be positive".into()));
    }
    q.matmul(&k.transpose())?
        .scale(1.0 / (d_k as f64).sqrt())
        .matmul(v)
}

/// Expected time-averaged output of the stochastic block for independent
/// Bernoulli Q/K/V streams: `Pq Pk^T Pv / (N * D_K)`.
pub fn linear_ssa_expectation(
    pq: &RealMatrix,
    pk: &RealMatrix,
    pv: &RealMatrix,
) -> Result<RealMatrix> {
    check_qkv(pq, pk, pv)?;
    pq.ensure_unit_range()?;
    pk.ensure_unit_range()?;
    pv.ensure_unit_range()?;
    let (n, d_k) = pq.shape();
    pq.matmul(&pk.transpose())?
        .scale(1.0 / d_k as f64)
        .matmul(pv)
        .map(|m| m.scale(1.0 / n as f64))
}

/// Entry `(i, j)` is `(1/D_K) * sum_d Q[i,d] & K[j,d]`.
pub fn exact_ssa_params(q_t: &SpikeMatrix, k_t: &SpikeMatrix) -> Result<RealMatrix> {
    ensure_shape("exact_ssa_params", q_t.shape(), k_t.shape())?;
    let (n, d_k) = q_t.shape();
    let mut out = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let hits = q_t
                .row(i)
                .iter()
                .zip(k_t.row(j))
                .filter(|(&a, &b)| a & b == 1)
                .count();
            out.set(i, j, hits as f64 / d_k as f64);
        }
    }
    Ok(out)
}

/// Entry `(i, d)` is `(1/N) * sum_j S[i,j] & V[j,d]`.
pub fn exact_attn_params(s_t: &SpikeMatrix, v_t: &SpikeMatrix) -> Result<RealMatrix> {
    let n = v_t.rows();
    ensure_shape("exact_attn_params", (n, n), s_t.shape())?;
    let d_k = v_t.cols();
    let mut out = RealMatrix::zeros(n, d_k);
    for i in 0..n {
        for d in 0..d_k {
            let hits = (0..n).filter(|&j| s_t.get(i, j) && v_t.get(j, d)).count();
            out.set(i, d, hits as f64 / n as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> RealMatrix {
        RealMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn bits(rows: &[&[u8]]) -> SpikeMatrix {
        SpikeMatrix::new(rows.len(), rows[0].len(), rows.concat()).unwrap()
    }

    /// Direct two-loop evaluation of softmax attention.
    fn naive_softmax_attention(q: &RealMatrix, k: &RealMatrix, v: &RealMatrix) -> RealMatrix {
        let n = q.rows();
        let d_k = q.cols();
        RealMatrix::from_fn(n, v.cols(), |i, c| {
            let scores: Vec<f64> = (0..n)
                .map(|j| (0..d_k).map(|d| q.get(i, d) * k.get(j, d)).sum::<f64>() / (d_k as f64).sqrt())
                .collect();
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            (0..n).map(|j| scores[j].exp() / z * v.get(j, c)).sum()
        })
    }

    #[test]
    fn softmax_single_token_returns_value_row() {
        let v = m(&[&[0.3, -2.0, 5.0]]);
        let q = m(&[&[1.0, 2.0, 3.0]]);
        let out = softmax_attention(&q, &q, &v, 3).unwrap();
        assert!(out.max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn softmax_zero_scores_average_values() {
        let z = RealMatrix::zeros(3, 2);
        let v = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 9.0]]);
        let out = softmax_attention(&z, &z, &v, 2).unwrap();
        let means = m(&[&[3.0, 5.0], &[3.0, 5.0], &[3.0, 5.0]]);
        assert!(out.max_abs_diff(&means) < 1e-12);
    }

    #[test]
    fn softmax_matches_naive_on_3x4() {
        let q = m(&[&[0.1, -0.4, 0.9, 1.2], &[0.0, 0.3, -0.7, 0.5], &[1.1, 0.2, 0.3, -0.6]]);
        let k = m(&[&[0.5, 0.5, -0.2, 0.1], &[-1.0, 0.8, 0.4, 0.0], &[0.3, -0.3, 0.6, 0.9]]);
        let v = m(&[&[1.0, 0.0, 2.0, -1.0], &[0.5, 0.5, 0.5, 0.5], &[-2.0, 1.0, 0.0, 3.0]]);
        let out = softmax_attention(&q, &k, &v, 4).unwrap();
        assert!(out.max_abs_diff(&naive_softmax_attention(&q, &k, &v)) < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = RealMatrix::zeros(2, 3);
        let b = RealMatrix::zeros(3, 3);
        assert!(softmax_attention(&a, &b, &a, 3).is_err());
        assert!(linear_ssa_expectation(&a, &b, &a).is_err());
        assert!(exact_ssa_params(&SpikeMatrix::zeros(2, 3), &SpikeMatrix::zeros(3, 3)).is_err());
        assert!(exact_attn_params(&SpikeMatrix::zeros(2, 2), &SpikeMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn expectation_extremes() {
        let ones = RealMatrix::filled(4, 8, 1.0);
        let out = linear_ssa_expectation(&ones, &ones, &ones).unwrap();
        assert_eq!(out, ones);
        let zeros = RealMatrix::zeros(4, 8);
        assert_eq!(linear_ssa_expectation(&ones, &ones, &zeros).unwrap(), zeros);
    }

    #[test]
    fn expectation_rejects_non_probabilities() {
        let ones = RealMatrix::filled(2, 2, 1.0);
        let bad = RealMatrix::filled(2, 2, 1.5);
        assert!(matches!(
            linear_ssa_expectation(&ones, &bad, &ones),
            Err(SsaError::OutOfUnitRange { .. })
        ));
    }

    #[test]
    fn exact_params_trivial_cases() {
        let ones = SpikeMatrix::ones(3, 4);
        assert_eq!(exact_ssa_params(&ones, &ones).unwrap(), RealMatrix::filled(3, 3, 1.0));
        let q = bits(&[&[1, 1, 0, 0], &[1, 0, 0, 0]]);
        let k = bits(&[&[0, 0, 1, 1], &[0, 0, 0, 1]]);
        assert_eq!(exact_ssa_params(&q, &k).unwrap(), RealMatrix::zeros(2, 2));

        let v = bits(&[&[1, 0, 1], &[1, 1, 0], &[0, 0, 1], &[1, 0, 0]]);
        let s = SpikeMatrix::ones(4, 4);
        let expected = RealMatrix::from_fn(4, 3, |_, d| [0.75, 0.25, 0.5][d]);
        assert_eq!(exact_attn_params(&s, &v).unwrap(), expected);
        assert_eq!(
            exact_attn_params(&s, &SpikeMatrix::zeros(4, 3)).unwrap(),
            RealMatrix::zeros(4, 3)
        );
    }

    #[test]
    fn exact_params_hand_enumerated_n2_dk4() {
        // Q row0 = 1011, row1 = 0110; K row0 = 1101, row1 = 0111.
        // AND counts: (0,0)=1001->2, (0,1)=0011->2, (1,0)=0100->1, (1,1)=0110->2.
        let q = bits(&[&[1, 0, 1, 1], &[0, 1, 1, 0]]);
        let k = bits(&[&[1, 1, 0, 1], &[0, 1, 1, 1]]);
        let s = exact_ssa_params(&q, &k).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.5, 0.25, 0.5]);

        // S = [[1,0],[1,1]], V rows 1010 / 0110:
        // row0 = V0 -> 1010 /2; row1 = V0 + V1 -> 1,1,2,0 /2.
        let s_t = bits(&[&[1, 0], &[1, 1]]);
        let v = bits(&[&[1, 0, 1, 0], &[0, 1, 1, 0]]);
        let a = exact_attn_params(&s_t, &v).unwrap();
        assert_eq!(a.as_slice(), &[0.5, 0.0, 0.5, 0.0, 0.5, 0.5, 1.0, 0.0]);
    }

    #[test]
    fn linear_attention_drops_softmax() {
        let q = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let v = m(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let out = linear_attention(&q, &q, &v, 4).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0, 0.0, 2.0]);
    }
}
