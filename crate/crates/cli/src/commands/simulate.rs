use serde::Serialize;

use ssa_core::matfile::{encode, stack_spikes, MatrixData};

use crate::error::{CliError, Outcome};
use crate::report::{write_bytes, write_json, Provenance};
use crate::run::{bit_exact, load_inputs, mean_rate, run_cycle, run_functional, InputMode};
use crate::{Common, RunFlags};

#[derive(Serialize)]
struct Rates {
    q: f64,
    k: f64,
    v: f64,
    s: f64,
    attn: f64,
}

#[derive(Serialize)]
struct CycleSummary {
    pipelined: bool,
    cycles: u64,
    /// Cycles the other schedule takes, from its closed form.
    alternative_cycles: u64,
    bit_exact: bool,
}

#[derive(Serialize)]
struct Summary {
    provenance: Provenance,
    mode: InputMode,
    n: usize,
    d: usize,
    d_k: usize,
    t: usize,
    rates: Rates,
    decoded_mean: f64,
    cycle_model: CycleSummary,
    files: Vec<String>,
}

pub fn run(common: &Common, flags: &RunFlags, save_spikes: bool) -> Result<Outcome, CliError> {
    let (loaded, seed) = common.load()?;
    let cfg = loaded.ssa_config(seed)?;
    let mode = if flags.independent { InputMode::Independent } else { InputMode::Lif };
    let inputs = load_inputs(&loaded, &cfg, mode, flags.synthetic)?;
    let run = run_functional(&loaded, &inputs, &cfg)?;
    let decoded = run.decode()?;
    let stream = run_cycle(&cfg, &run, flags.pipelined, false)?;
    let exact = bit_exact(&run, &stream);

    let (d_k, t) = (cfg.d_k as u64, cfg.t as u64);
    let alternative_cycles = if flags.pipelined { 2 * d_k * t } else { d_k * (t + 1) };
    let mut files = vec!["decoded.mat".to_string()];
    write_bytes(&common.out, "decoded.mat", &encode(&MatrixData::Real(decoded.clone())))?;
    if save_spikes {
        let attn: Vec<_> = run.steps.iter().map(|s| s.attn.clone()).collect();
        let stacked = stack_spikes(&attn)?;
        write_bytes(&common.out, "attn_spikes.mat", &encode(&MatrixData::Bits(stacked)))?;
        files.push("attn_spikes.mat".to_string());
    }

    let summary = Summary {
        provenance: Provenance::new("simulate", &loaded, seed),
        mode,
        n: cfg.n,
        d: cfg.d,
        d_k: cfg.d_k,
        t: cfg.t,
        rates: Rates {
            q: mean_rate(run.qkv.iter().map(|x| &x.q)),
            k: mean_rate(run.qkv.iter().map(|x| &x.k)),
            v: mean_rate(run.qkv.iter().map(|x| &x.v)),
            s: mean_rate(run.steps.iter().map(|x| &x.s)),
            attn: mean_rate(run.steps.iter().map(|x| &x.attn)),
        },
        decoded_mean: decoded.as_slice().iter().sum::<f64>() / decoded.as_slice().len() as f64,
        cycle_model: CycleSummary {
            pipelined: flags.pipelined,
            cycles: stream.cycles(),
            alternative_cycles,
            bit_exact: exact,
        },
        files,
    };
    write_json(&common.out, "summary.json", &summary)?;

    let r = &summary.rates;
    println!(
        "simulate: N={} D={} D_K={} T={} seed={seed} mode={mode:?}",
        cfg.n, cfg.d, cfg.d_k, cfg.t
    );
    println!(
        "rates: q={:.4} k={:.4} v={:.4} s={:.4} attn={:.4}",
        r.q, r.k, r.v, r.s, r.attn
    );
    println!(
        "cycles: {} ({}), other schedule {}; cycle model {}",
        stream.cycles(),
        if flags.pipelined { "pipelined" } else { "unpipelined" },
        alternative_cycles,
        if exact { "bit-exact" } else { "MISMATCH" }
    );
    println!("output: {}", common.out.display());
    Ok(Outcome::from_pass(exact))
}
