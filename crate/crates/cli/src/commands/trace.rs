use std::io::Write;

use serde::Serialize;

use crate::error::{CliError, Outcome};
use crate::report::{ensure_dir, write_json, Provenance};
use crate::run::{bit_exact, load_inputs, run_cycle, run_functional, InputMode};
use crate::{Common, RunFlags};

#[derive(Serialize)]
struct TraceSummary {
    provenance: Provenance,
    mode: InputMode,
    n: usize,
    d_k: usize,
    t: usize,
    pipelined: bool,
    full_trace: bool,
    cycles: u64,
    and_ops: u64,
    counter_ops: u64,
    row_adds: u64,
    rng_draws: u64,
    max_counter: u16,
    bit_exact: bool,
}

pub fn run(common: &Common, flags: &RunFlags, full_trace: bool) -> Result<Outcome, CliError> {
    let (loaded, seed) = common.load()?;
    let cfg = loaded.ssa_config(seed)?;
    let mode = if flags.independent { InputMode::Independent } else { InputMode::Lif };
    let inputs = load_inputs(&loaded, &cfg, mode, flags.synthetic)?;
    let run = run_functional(&loaded, &inputs, &cfg)?;
    let stream = run_cycle(&cfg, &run, flags.pipelined, full_trace)?;
    let exact = bit_exact(&run, &stream);

    ensure_dir(&common.out)?;
    let path = common.out.join("trace.jsonl");
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut out = std::io::BufWriter::new(file);
    stream.trace.write_jsonl(&mut out)?;
    out.flush().map_err(|e| CliError::io(&path, e))?;

    let totals = stream.trace.totals();
    let summary = TraceSummary {
        provenance: Provenance::new("trace", &loaded, seed),
        mode,
        n: cfg.n,
        d_k: cfg.d_k,
        t: cfg.t,
        pipelined: flags.pipelined,
        full_trace,
        cycles: totals.cycles,
        and_ops: totals.and_ops,
        counter_ops: totals.counter_ops,
        row_adds: totals.row_adds,
        rng_draws: totals.rng_draws,
        max_counter: totals.max_counter,
        bit_exact: exact,
    };
    write_json(&common.out, "trace_summary.json", &summary)?;
    println!(
        "trace: {} cycles, {} AND ops, {} draws; cycle model {}",
        totals.cycles,
        totals.and_ops,
        totals.rng_draws,
        if exact { "bit-exact" } else { "MISMATCH" }
    );
    println!("written: {}", path.display());
    Ok(Outcome::from_pass(exact))
}
