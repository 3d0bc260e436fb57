//! Building inputs and running the functional and cycle-accurate models.

use serde::Serialize;

use ssa_core::matfile::read_real_file;
use ssa_core::verify::{random_lif_inputs, random_probs, rng_for};
use ssa_core::{
    ssa_run, ssa_run_independent, QkvWeights, RealMatrix, SpikeMatrix, SsaBlock, SsaConfig, SsaRun,
    StreamOutput,
};

use crate::config::{LoadedConfig, Synthetic};
use crate::error::CliError;

const SALT_LIF_INPUTS: u64 = 0x11F;
const SALT_PROB_INPUTS: u64 = 0x9B0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    Lif,
    Independent,
}

#[derive(Debug, Clone)]
pub enum Inputs {
    Lif { x: RealMatrix, weights: QkvWeights },
    Independent { pq: RealMatrix, pk: RealMatrix, pv: RealMatrix },
}

/// Synthetic inputs for the given shape, seeded from `seed`.
pub fn synthetic_inputs(kind: Synthetic, mode: InputMode, cfg: &SsaConfig) -> Inputs {
    let (n, d, d_k) = (cfg.n, cfg.d, cfg.d_k);
    match (kind, mode) {
        (Synthetic::Ones, InputMode::Lif) => {
            let w = RealMatrix::filled(d, d_k, 1.0);
            Inputs::Lif {
                x: RealMatrix::filled(n, d, cfg.input_range.hi()),
                weights: QkvWeights::new(w.clone(), w.clone(), w).expect("equal shapes"),
            }
        }
        (Synthetic::Ones, InputMode::Independent) => {
            let p = RealMatrix::filled(n, d_k, 1.0);
            Inputs::Independent {
                pq: p.clone(),
                pk: p.clone(),
                pv: p,
            }
        }
        (Synthetic::Random, InputMode::Lif) => {
            let (x, weights) = random_lif_inputs(&mut rng_for(cfg.global_seed, SALT_LIF_INPUTS), n, d, d_k);
            let range = cfg.input_range;
            let x = RealMatrix::from_fn(n, d, |i, j| range.lo() + x.get(i, j) * (range.hi() - range.lo()));
            Inputs::Lif { x, weights }
        }
        (Synthetic::Random, InputMode::Independent) => {
            let mut rng = rng_for(cfg.global_seed, SALT_PROB_INPUTS);
            Inputs::Independent {
                pq: random_probs(&mut rng, n, d_k),
                pk: random_probs(&mut rng, n, d_k),
                pv: random_probs(&mut rng, n, d_k),
            }
        }
    }
}

/// Inputs from `--synthetic`, `[inputs] synthetic`, or matrix files, in that order.
pub fn load_inputs(
    loaded: &LoadedConfig,
    cfg: &SsaConfig,
    mode: InputMode,
    synthetic: Option<Synthetic>,
) -> Result<Inputs, CliError> {
    let section = &loaded.file.inputs;
    if let Some(kind) = synthetic.or(section.synthetic) {
        return Ok(synthetic_inputs(kind, mode, cfg));
    }
    let read = |key: &str, p: &Option<std::path::PathBuf>| -> Result<RealMatrix, CliError> {
        let p = p.as_ref().ok_or_else(|| {
            CliError::Input(format!(
                "no inputs: set [inputs] {key} (or synthetic) in the config, or pass --synthetic"
            ))
        })?;
        let path = loaded.resolve(p);
        read_real_file(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    };
    Ok(match mode {
        InputMode::Lif => Inputs::Lif {
            x: read("x", &section.x)?,
            weights: QkvWeights::new(
                read("w_q", &section.w_q)?,
                read("w_k", &section.w_k)?,
                read("w_v", &section.w_v)?,
            )?,
        },
        InputMode::Independent => Inputs::Independent {
            pq: read("p_q", &section.p_q)?,
            pk: read("p_k", &section.p_k)?,
            pv: read("p_v", &section.p_v)?,
        },
    })
}

pub fn run_functional(loaded: &LoadedConfig, inputs: &Inputs, cfg: &SsaConfig) -> Result<SsaRun, CliError> {
    Ok(match inputs {
        Inputs::Lif { x, weights } => ssa_run(x, weights, loaded.lif_config()?, cfg)?,
        Inputs::Independent { pq, pk, pv } => ssa_run_independent(pq, pk, pv, cfg)?,
    })
}

/// Replays the functional run's Q/K/V through the SAU array.
pub fn run_cycle(cfg: &SsaConfig, run: &SsaRun, pipelined: bool, full_trace: bool) -> Result<StreamOutput, CliError> {
    let mut block = SsaBlock::for_config(cfg)?.with_full_trace(full_trace);
    Ok(block.run_stream(&run.qkv, pipelined)?)
}

/// True when the cycle model reproduced every S and Attn bit.
pub fn bit_exact(run: &SsaRun, stream: &StreamOutput) -> bool {
    stream.attn.len() == run.steps.len()
        && run
            .steps
            .iter()
            .zip(stream.attn.iter().zip(&stream.s))
            .all(|(f, (a, s))| &f.attn == a && &f.s == s)
}

/// Mean firing rate over a sequence of spike matrices.
pub fn mean_rate<'a>(mats: impl Iterator<Item = &'a SpikeMatrix>) -> f64 {
    let (mut ones, mut total) = (0usize, 0usize);
    for m in mats {
        ones += m.count_ones();
        total += m.as_bytes().len();
    }
    if total == 0 {
        0.0
    } else {
        ones as f64 / total as f64
    }
}
