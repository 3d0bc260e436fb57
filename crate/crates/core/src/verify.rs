//! Invariant suite: each check exercises one end-to-end property and
//! reports pass/fail with its statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{count_ops_ssa, OpCounts};
use crate::error::Result;
use crate::functional::{ssa_run, ssa_run_independent, ssa_step, EncoderBank, SsaConfig, SsaRun};
use crate::lif::{spike_matmul, LifConfig, QkvWeights};
use crate::matrix::{RealMatrix, SpikeMatrix};
use crate::oracle::{exact_attn_params, exact_ssa_params, linear_ssa_expectation};
use crate::sau::SsaBlock;
use crate::sc::{bernoulli_from_count, derive_seed, BitStream, EncoderModule, EncoderRange, LfsrRng, LFSR_PERIOD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyParams {
    pub seed: u64,
    /// Values of N and D_K checked pairwise.
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

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            seed: 0x55A_2024,
            grid: vec![2, 4, 8, 16],
            product_seeds: 10,
            product_t: 1 << 16,
            param_instances: 100,
            bitexact_t: 64,
            bitexact_seeds: 30,
            stat_n: 8,
            stat_d: 16,
            stat_d_k: 16,
            stat_t: 4096,
            stat_seeds: 30,
            stat_tolerance: 0.05,
            stat_min_fraction: 0.99,
            count_cells: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn random_spikes(rng: &mut impl Rng, rows: usize, cols: usize, density: f64) -> SpikeMatrix {
    SpikeMatrix::from_fn(rows, cols, |_, _| rng.gen_bool(density))
}

pub fn random_probs(rng: &mut impl Rng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..=1.0))
}

/// Random inputs for the LIF pipeline that keep neurons near threshold:
/// `X ~ U[0, 1]`, `W ~ U[-0.5, 1.5] * 4 / D`.
pub fn random_lif_inputs(rng: &mut impl Rng, n: usize, d: usize, d_k: usize) -> (RealMatrix, QkvWeights) {
    let x = random_probs(rng, n, d);
    let mut w = || RealMatrix::from_fn(d, d_k, |_, _| rng.gen_range(-0.5..1.5) * 4.0 / d as f64);
    let weights = QkvWeights::new(w(), w(), w()).expect("equal shapes");
    (x, weights)
}

fn aux_rng(seed: u64, col: usize) -> LfsrRng {
    LfsrRng::new(derive_seed(seed, EncoderModule::Auxiliary, 0, col)).expect("nonzero")
}

fn check_lfsr_period() -> (bool, String) {
    let mut rng = LfsrRng::new(1).expect("nonzero");
    let mut steps = 0u32;
    loop {
        rng.next_word();
        steps += 1;
        if rng.state() == 1 || steps > LFSR_PERIOD {
            break;
        }
    }
    (steps == LFSR_PERIOD, format!("period {steps}"))
}

fn check_count_exactness() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for denom in [1u32, 2, 4, 8, 16, 32, 64, 128, 256] {
        for count in 0..=denom {
            let mut rng = aux_rng(7, denom as usize);
            let mut ones = 0u32;
            for _ in 0..LFSR_PERIOD {
                ones += bernoulli_from_count(count, denom, &mut rng)? as u32;
            }
            let ideal = count as f64 * LFSR_PERIOD as f64 / denom as f64;
            worst = worst.max((ones as f64 - ideal).abs());
        }
    }
    Ok((worst <= 1.0, format!("max |ones - c(2^16-1)/d| = {worst:.3}")))
}

/// AND of two independently seeded streams has rate p1 * p2.
pub fn check_sc_product(params: &VerifyParams) -> (bool, String) {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let t = params.product_t;
    let unit = EncoderRange::unit();
    let mut worst_z = 0.0f64;
    let mut failures = 0usize;
    let mut trials = 0usize;
    for s in 0..params.product_seeds as u64 {
        let seed = params.seed.wrapping_add(s);
        for &p1 in &grid {
            for &p2 in &grid {
                let a = BitStream::encode(p1, &unit, &mut aux_rng(seed, 0), t);
                let b = BitStream::encode(p2, &unit, &mut aux_rng(seed, 1), t);
                let rate = a.and(&b).expect("equal lengths").rate();
                let p = p1 * p2;
                let bound = 4.0 * (p * (1.0 - p) / t as f64).sqrt();
                let dev = (rate - p).abs();
                trials += 1;
                if dev > bound {
                    failures += 1;
                }
                if bound > 0.0 {
                    worst_z = worst_z.max(dev / (bound / 4.0));
                }
            }
        }
    }
    (
        failures == 0,
        format!("{trials} trials, {failures} outside 4 sigma, worst |z| = {worst_z:.2}"),
    )
}

/// Recorded step parameters equal the oracle's exact parameters.
pub fn check_exact_params(params: &VerifyParams) -> Result<(bool, String)> {
    let mut rng = rng_for(params.seed, 2);
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for &n in &params.grid {
        for &d_k in &params.grid {
            for _ in 0..params.param_instances {
                let density = rng.gen_range(0.0..=1.0);
                let q = random_spikes(&mut rng, n, d_k, density);
                let k = random_spikes(&mut rng, n, d_k, density);
                let v = random_spikes(&mut rng, n, d_k, density);
                let cfg = SsaConfig::new(n, d_k, d_k, 1, rng.gen())?;
                let out = ssa_step(&q, &k, &v, &mut EncoderBank::for_config(&cfg))?;
                total += 1;
                if out.s_params != exact_ssa_params(&q, &k)?
                    || out.attn_params != exact_attn_params(&out.s, &v)?
                    || !out.replay_consistent()
                {
                    mismatches += 1;
                }
            }
        }
    }
    Ok((mismatches == 0, format!("{total} instances, {mismatches} mismatches")))
}

fn functional_run(cfg: &SsaConfig, lif_path: bool, rng: &mut ChaCha8Rng) -> Result<SsaRun> {
    if lif_path {
        let (x, weights) = random_lif_inputs(rng, cfg.n, cfg.d, cfg.d_k);
        ssa_run(&x, &weights, LifConfig::default(), cfg)
    } else {
        let [pq, pk, pv] = [0, 1, 2].map(|_| random_probs(rng, cfg.n, cfg.d_k));
        ssa_run_independent(&pq, &pk, &pv, cfg)
    }
}

#[derive(Debug, Default)]
struct CycleStats {
    runs: usize,
    output_mismatches: usize,
    mode_mismatches: usize,
    latency_violations: usize,
    pipelined_violations: usize,
    max_counter_excess: usize,
    structural_violations: usize,
}

fn cycle_stats(params: &VerifyParams) -> Result<CycleStats> {
    let mut stats = CycleStats::default();
    let t = params.bitexact_t;
    for &n in &params.grid {
        for &d_k in &params.grid {
            for s in 0..params.bitexact_seeds as u64 {
                let seed = params.seed.wrapping_add(s);
                let mut rng = rng_for(seed, (n * 1000 + d_k) as u64);
                let cfg = SsaConfig::new(n, 2 * d_k, d_k, t, seed)?;
                let run = functional_run(&cfg, s % 2 == 0, &mut rng)?;

                let plain = SsaBlock::for_config(&cfg)?.run_stream(&run.qkv, false)?;
                let piped = SsaBlock::for_config(&cfg)?.run_stream(&run.qkv, true)?;
                stats.runs += 1;

                let same_as_functional = run
                    .steps
                    .iter()
                    .zip(plain.attn.iter().zip(&plain.s))
                    .all(|(f, (a, s))| f.attn == *a && f.s == *s);
                if !same_as_functional || plain.attn.len() != t {
                    stats.output_mismatches += 1;
                }
                if plain.attn != piped.attn || plain.s != piped.s {
                    stats.mode_mismatches += 1;
                }
                let step_cycles = 2 * d_k as u64;
                let per_step_ok = plain.cycles() == step_cycles * t as u64
                    && plain
                        .trace
                        .records
                        .chunks(2 * d_k)
                        .all(|chunk| {
                            let first_in = chunk.iter().find(|r| r.ports.is_some()).map(|r| r.cycle);
                            let last_out = chunk.iter().rev().find(|r| !r.emitted.is_empty()).map(|r| r.cycle);
                            matches!((first_in, last_out), (Some(a), Some(b)) if b + 1 - a == step_cycles)
                        });
                if !per_step_ok {
                    stats.latency_violations += 1;
                }
                if piped.cycles() != (d_k * (t + 1)) as u64 {
                    stats.pipelined_violations += 1;
                }
                let totals = plain.trace.totals();
                if totals.max_counter as usize > d_k || piped.trace.totals().max_counter as usize > d_k {
                    stats.max_counter_excess += 1;
                }
                let expect_and = (2 * n * n * d_k * t) as u64;
                let expect_adds = (n * d_k * t) as u64;
                if totals.and_ops != expect_and || totals.row_adds != expect_adds {
                    stats.structural_violations += 1;
                }
            }
        }
    }
    Ok(stats)
}

/// Cycle simulator against the functional model, plus the cycle contracts.
pub fn check_cycle_model(params: &VerifyParams) -> Result<[(bool, String); 2]> {
    let st = cycle_stats(params)?;
    let exact = (
        st.output_mismatches == 0,
        format!("{} runs, {} differ from the functional model", st.runs, st.output_mismatches),
    );
    let contracts = (
        st.mode_mismatches == 0
            && st.latency_violations == 0
            && st.pipelined_violations == 0
            && st.max_counter_excess == 0
            && st.structural_violations == 0,
        format!(
            "{} runs: latency violations {}, pipelined cycle violations {}, pipelined/unpipelined output diffs {}, counter overflows {}, AND/adder count violations {}",
            st.runs,
            st.latency_violations,
            st.pipelined_violations,
            st.mode_mismatches,
            st.max_counter_excess,
            st.structural_violations
        ),
    );
    Ok([exact, contracts])
}

/// Time-averaged output converges to the linear expectation.
pub fn check_convergence(params: &VerifyParams) -> Result<(bool, String)> {
    let mut within = 0usize;
    let mut total = 0usize;
    let mut worst = 0.0f64;
    for s in 0..params.stat_seeds as u64 {
        let seed = params.seed.wrapping_add(s);
        let mut rng = rng_for(seed, 5);
        let cfg = SsaConfig::new(params.stat_n, params.stat_d, params.stat_d_k, params.stat_t, seed)?;
        let [pq, pk, pv] = [0, 1, 2].map(|_| random_probs(&mut rng, cfg.n, cfg.d_k));
        let decoded = ssa_run_independent(&pq, &pk, &pv, &cfg)?.decode()?;
        let expected = linear_ssa_expectation(&pq, &pk, &pv)?;
        for (a, b) in decoded.as_slice().iter().zip(expected.as_slice()) {
            let err = (a - b).abs();
            worst = worst.max(err);
            total += 1;
            within += (err <= params.stat_tolerance) as usize;
        }
    }
    let fraction = within as f64 / total as f64;
    Ok((
        fraction >= params.stat_min_fraction,
        format!(
            "{within}/{total} elements within {} ({:.4}), max error {worst:.4}",
            params.stat_tolerance, fraction
        ),
    ))
}

/// Closed-form counts equal the counts observed in simulator traces.
pub fn check_count_trace(params: &VerifyParams) -> Result<(bool, String)> {
    let mut rng = rng_for(params.seed, 6);
    let mut mismatches = 0usize;
    let mut cells = Vec::new();
    for _ in 0..params.count_cells {
        let n = 1 << rng.gen_range(1..=4);
        let d_k = 1 << rng.gen_range(0..=5);
        let t = rng.gen_range(1..=12);
        let cfg = SsaConfig::new(n, d_k, d_k, t, rng.gen())?;
        let run = functional_run(&cfg, false, &mut rng)?;
        let traced = SsaBlock::for_config(&cfg)?.run_stream(&run.qkv, rng.gen())?;
        let from_trace = OpCounts::from_trace(&traced.trace.totals());
        let formula = count_ops_ssa(n, d_k, t);
        if from_trace.and_ops != formula.and_ops
            || from_trace.rng_draws != formula.rng_draws
            || from_trace.add_ops != formula.add_ops
        {
            mismatches += 1;
        }
        cells.push(format!("({n},{d_k},{t})"));
    }
    Ok((
        mismatches == 0,
        format!("cells {}: {mismatches} mismatches", cells.join(" ")),
    ))
}

/// Algebraic identity between the one-shot expectation and the two-stage
/// parameters, on binary inputs.
pub fn check_oracle_identity(params: &VerifyParams) -> Result<(bool, String)> {
    let mut rng = rng_for(params.seed, 7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = 1 << rng.gen_range(0..=4);
        let d_k = 1 << rng.gen_range(0..=4);
        let [q, k, v] = [0, 1, 2].map(|_| random_spikes(&mut rng, n, d_k, 0.5));
        let direct = linear_ssa_expectation(&q.to_real(), &k.to_real(), &v.to_real())?;
        let two_stage = exact_ssa_params(&q, &k)?.matmul(&v.to_real())?.scale(1.0 / n as f64);
        worst = worst.max(direct.max_abs_diff(&two_stage));
    }
    Ok((worst <= 1e-12, format!("max |difference| = {worst:.2e}")))
}

/// Spike-selected weight-row sums equal a general matrix product.
pub fn check_lif_accumulate(params: &VerifyParams) -> Result<(bool, String)> {
    let mut rng = rng_for(params.seed, 8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (n, d, d_k) = (rng.gen_range(1..9), rng.gen_range(1..17), rng.gen_range(1..17));
        let x = random_spikes(&mut rng, n, d, 0.5);
        let w = RealMatrix::from_fn(d, d_k, |_, _| rng.gen_range(-2.0..2.0));
        let ac = spike_matmul(&x, &w)?;
        let mac = x.to_real().matmul(&w)?;
        worst = worst.max(ac.max_abs_diff(&mac));
    }
    Ok((worst <= 1e-12, format!("max |AC - MAC| = {worst:.2e}")))
}

/// Runs every check.
pub fn run_all(params: &VerifyParams) -> VerifyReport {
    let mut checks = vec![
        {
            let (ok, detail) = check_lfsr_period();
            CheckOutcome::new("lfsr-period", ok, detail)
        },
        CheckOutcome::from_result("count-encoder-exactness", check_count_exactness()),
        {
            let (ok, detail) = check_sc_product(params);
            CheckOutcome::new("sc-product", ok, detail)
        },
        CheckOutcome::from_result("oracle-identity", check_oracle_identity(params)),
        CheckOutcome::from_result("lif-accumulate", check_lif_accumulate(params)),
        CheckOutcome::from_result("exact-params", check_exact_params(params)),
    ];
    match check_cycle_model(params) {
        Ok([exact, contracts]) => {
            checks.push(CheckOutcome::new("cycle-bit-exact", exact.0, exact.1));
            checks.push(CheckOutcome::new("cycle-contracts", contracts.0, contracts.1));
        }
        Err(e) => checks.push(CheckOutcome::new("cycle-model", false, format!("error: {e}"))),
    }
    checks.push(CheckOutcome::from_result("convergence", check_convergence(params)));
    checks.push(CheckOutcome::from_result("count-trace", check_count_trace(params)));
    VerifyReport {
        seed: params.seed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_suite_passes() {
        let params = VerifyParams {
            grid: vec![2, 4],
            product_seeds: 1,
            product_t: 1 << 14,
            param_instances: 5,
            bitexact_t: 4,
            bitexact_seeds: 2,
            stat_t: 1024,
            stat_seeds: 2,
            stat_tolerance: 0.1,
            count_cells: 3,
            ..VerifyParams::default()
        };
        let report = run_all(&params);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
