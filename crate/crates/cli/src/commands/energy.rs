use serde::Serialize;

use ssa_core::cost::{
    count_ops_ann, count_ops_spikformer, count_ops_ssa, energy, EnergyConfig, EnergyReport, OpCounts,
};
use ssa_core::verify::{random_spikes, rng_for};
use ssa_core::{QkvSpikes, SsaBlock};

use crate::error::{CliError, Outcome};
use crate::report::{write_csv, write_json, Provenance};
use crate::Common;

/// Published totals in microjoules for the same three models, kept for
/// comparison only. They rest on per-op constants that are not part of any
/// config here, so no run is expected to reproduce them.
pub const REFERENCE_ANCHORS: [(&str, f64, f64, f64); 3] = [
    ("ann", 7.77, 89.96, 97.73),
    ("integer-spiking", 6.20, 102.85, 109.05),
    ("ssa", 1.23, 52.80, 54.03),
];

/// Time steps simulated for the count cross-check; counts are linear in T.
const CROSS_CHECK_MAX_T: usize = 4;
const SALT_CROSS_CHECK: u64 = 0xE4E;

#[derive(Serialize)]
struct Row {
    model: &'static str,
    counts: OpCounts,
    energy: EnergyReport,
}

#[derive(Serialize)]
struct CrossCheck {
    t: usize,
    and_ops: (u64, u64),
    add_ops: (u64, u64),
    rng_draws: (u64, u64),
    passed: bool,
}

#[derive(Serialize)]
struct Anchor {
    model: &'static str,
    processing_uj: f64,
    memory_uj: f64,
    total_uj: f64,
}

#[derive(Serialize)]
struct Report {
    provenance: Provenance,
    energy_constants: EnergyConfig,
    n: usize,
    d_k: usize,
    t: usize,
    rows: Vec<Row>,
    cross_check: CrossCheck,
    reference_anchors: Vec<Anchor>,
}

#[derive(Serialize)]
struct CsvRow {
    model: &'static str,
    mac_ops: u64,
    ac_ops: u64,
    and_ops: u64,
    add_ops: u64,
    rng_draws: u64,
    compare_ops: u64,
    softmax_ops: u64,
    mem_read_bits: u64,
    mem_write_bits: u64,
    processing_uj: f64,
    memory_uj: f64,
    total_uj: f64,
}

/// Runs the SAU array on random spikes and compares its counts with the
/// closed form.
fn cross_check(n: usize, d_k: usize, t: usize, seed: u64) -> Result<CrossCheck, CliError> {
    let t = t.clamp(1, CROSS_CHECK_MAX_T);
    let mut rng = rng_for(seed, SALT_CROSS_CHECK);
    let steps: Vec<_> = (0..t)
        .map(|_| QkvSpikes {
            q: random_spikes(&mut rng, n, d_k, 0.5),
            k: random_spikes(&mut rng, n, d_k, 0.5),
            v: random_spikes(&mut rng, n, d_k, 0.5),
        })
        .collect();
    let cfg = ssa_core::SsaConfig {
        n,
        d: d_k,
        d_k,
        t,
        global_seed: seed,
        input_range: ssa_core::sc::EncoderRange::unit(),
        normalization: ssa_core::Normalization::General,
        sharing: ssa_core::RngSharing::PerEncoder,
    };
    let out = SsaBlock::for_config(&cfg)?.run_stream(&steps, true)?;
    let traced = OpCounts::from_trace(&out.trace.totals());
    let closed = count_ops_ssa(n, d_k, t);
    let and_ops = (traced.and_ops, closed.and_ops);
    let add_ops = (traced.add_ops, closed.add_ops);
    let rng_draws = (traced.rng_draws, closed.rng_draws);
    Ok(CrossCheck {
        t,
        and_ops,
        add_ops,
        rng_draws,
        passed: and_ops.0 == and_ops.1 && add_ops.0 == add_ops.1 && rng_draws.0 == rng_draws.1,
    })
}

pub fn run(common: &Common) -> Result<Outcome, CliError> {
    let (loaded, seed) = common.load()?;
    let cfg = loaded.ssa_config(seed)?;
    let constants = loaded.energy_config()?;
    let (n, d_k, t) = (cfg.n, cfg.d_k, cfg.t);

    let mut rows = Vec::new();
    for (model, counts) in [
        ("ann", count_ops_ann(n, d_k, &loaded.ann_params())),
        ("integer-spiking", count_ops_spikformer(n, d_k, t, &loaded.spikformer_params())),
        ("ssa", count_ops_ssa(n, d_k, t)),
    ] {
        let energy = energy(&counts, &constants)?;
        rows.push(Row { model, counts, energy });
    }
    let check = cross_check(n, d_k, t, seed)?;

    println!("energy: N={n} D_K={d_k} T={t}; constants: {}", constants.provenance);
    println!(
        "{:<16} {:>14} {:>14} {:>14} {:>16}",
        "model", "processing_uJ", "memory_uJ", "total_uJ", "ops"
    );
    for r in &rows {
        let c = &r.counts;
        let ops = c.mac_ops + c.ac_ops + c.and_ops + c.add_ops + c.rng_draws + c.softmax_ops;
        println!(
            "{:<16} {:>14.6} {:>14.6} {:>14.6} {:>16}",
            r.model, r.energy.processing_uj, r.energy.memory_uj, r.energy.total_uj, ops
        );
    }
    println!("reference anchors (uJ, not reproduced by this model):");
    for (model, p, m, total) in REFERENCE_ANCHORS {
        println!("{model:<16} {p:>14.2} {m:>14.2} {total:>14.2}");
    }
    println!(
        "count cross-check against trace (T={}): {}",
        check.t,
        if check.passed { "ok" } else { "MISMATCH" }
    );

    let csv_rows: Vec<CsvRow> = rows
        .iter()
        .map(|r| CsvRow {
            model: r.model,
            mac_ops: r.counts.mac_ops,
            ac_ops: r.counts.ac_ops,
            and_ops: r.counts.and_ops,
            add_ops: r.counts.add_ops,
            rng_draws: r.counts.rng_draws,
            compare_ops: r.counts.compare_ops,
            softmax_ops: r.counts.softmax_ops,
            mem_read_bits: r.counts.mem_reads.bits,
            mem_write_bits: r.counts.mem_writes.bits,
            processing_uj: r.energy.processing_uj,
            memory_uj: r.energy.memory_uj,
            total_uj: r.energy.total_uj,
        })
        .collect();
    write_csv(&common.out, "energy.csv", &csv_rows)?;
    let passed = check.passed;
    let report = Report {
        provenance: Provenance::new("energy", &loaded, seed),
        energy_constants: constants,
        n,
        d_k,
        t,
        rows,
        cross_check: check,
        reference_anchors: REFERENCE_ANCHORS
            .iter()
            .map(|&(model, processing_uj, memory_uj, total_uj)| Anchor {
                model,
                processing_uj,
                memory_uj,
                total_uj,
            })
            .collect(),
    };
    write_json(&common.out, "energy.json", &report)?;
    Ok(Outcome::from_pass(passed))
}
