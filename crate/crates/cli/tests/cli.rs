use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use ssa_core::matfile::{self, MatrixData};
use ssa_core::RealMatrix;

/// A reduced verification suite so the tests stay fast.
const SMALL_VERIFY: &str = r#"
[verify]
grid = [2, 4]
product_seeds = 2
product_t = 4096
param_instances = 5
bitexact_t = 8
bitexact_seeds = 2
stat_n = 4
stat_d = 8
stat_d_k = 8
stat_t = 2048
stat_seeds = 2
count_cells = 3
"#;

const SMALL_SSA: &str = "[ssa]\nn = 4\nd = 8\nd_k = 8\nt = 16\nseed = 5\n";

const UNIT_ENERGY: &str = r#"
[energy]
provenance = "unit test constants"
mac_pj = 1.0
ac_pj = 1.0
and_pj = 1.0
add_pj = 1.0
rng_pj = 1.0
compare_pj = 1.0
mem_read_pj_per_bit = 1.0
mem_write_pj_per_bit = 1.0
"#;

fn ssa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssa"))
        .args(args)
        .env_remove("SSA_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_small_suite_passes_and_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{SMALL_SSA}{SMALL_VERIFY}"));
    let out_dir = dir.path().join("out");
    let out = ssa(&["verify", "-c", s(&cfg), "-o", s(&out_dir), "--seed", "99"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] cycle-bit-exact"));
    assert!(!stdout.contains("[FAIL]"));

    let report = read_json(out_dir.join("verify.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["provenance"]["seed"], 99);
    assert_eq!(report["seed"], 99);
    let hash = report["provenance"]["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    // Without the override the configured seed is used.
    let out = ssa(&["verify", "-c", s(&cfg), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(out_dir.join("verify.json"))["provenance"]["seed"], 5);
}

#[test]
fn verify_with_builtin_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssa(&["verify", "-o", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(dir.path().join("verify.json"));
    assert_eq!(report["checks"].as_array().unwrap().len(), 10);
    assert_eq!(report["provenance"]["config_source"], "<builtin default>");
}

#[test]
fn non_power_of_two_d_k_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[ssa]\nn = 4\nd_k = 3\n");
    for cmd in ["verify", "simulate", "energy"] {
        let out = ssa(&[cmd, "-c", s(&cfg), "-o", s(dir.path())]);
        assert_eq!(code(&out), 2, "{cmd}");
        let err = stderr(&out);
        assert!(err.contains("power-of-two"), "{err}");
        assert!(err.contains("bad.toml:3"), "{err}");
    }
}

#[test]
fn parse_errors_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[ssa]\nn = 4\n\n[lif]\nbeta = 0.5\nthreshhold = 1.0\n");
    let out = ssa(&["verify", "-c", s(&cfg), "-o", s(dir.path())]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 6") && err.contains("threshhold"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ssa(&[])), 2);
    assert_eq!(code(&ssa(&["simulate", "--synthetic", "sometimes"])), 2);
    assert_eq!(code(&ssa(&["verify", "--seed", "-3"])), 2);
}

#[test]
fn config_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "env.toml", "[ssa]\nd_k = 5\n");
    let out = Command::new(env!("CARGO_BIN_EXE_ssa"))
        .args(["simulate", "--synthetic", "ones", "-o", s(dir.path())])
        .env("SSA_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("env.toml"));
}

#[test]
fn simulate_all_ones_decodes_to_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SSA);
    for independent in [false, true] {
        let out_dir = dir.path().join(format!("o{independent}"));
        let mut args = vec!["simulate", "-c", s(&cfg), "-o", s(&out_dir), "--synthetic", "ones"];
        if independent {
            args.push("--independent");
        }
        let out = ssa(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let decoded = matfile::read_real_file(out_dir.join("decoded.mat")).unwrap();
        assert_eq!(decoded, RealMatrix::filled(4, 8, 1.0));
    }
}

#[test]
fn simulate_is_deterministic_and_schedule_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SSA);
    let run = |name: &str, pipelined: bool| {
        let out_dir = dir.path().join(name);
        let mut args = vec!["simulate", "-c", s(&cfg), "-o", s(&out_dir), "--synthetic", "random", "--save-spikes"];
        if pipelined {
            args.push("--pipelined");
        }
        let out = ssa(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out_dir
    };
    let a = run("a", false);
    let b = run("b", false);
    let c = run("c", true);
    for f in ["decoded.mat", "attn_spikes.mat", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::read(a.join("decoded.mat")).unwrap(), std::fs::read(c.join("decoded.mat")).unwrap());

    let sa = read_json(a.join("summary.json"));
    let sc = read_json(c.join("summary.json"));
    assert_eq!(sa["cycle_model"]["cycles"], 2 * 8 * 16);
    assert_eq!(sc["cycle_model"]["cycles"], 8 * 17);
    assert_eq!(sa["cycle_model"]["bit_exact"], true);
    assert_eq!(sc["cycle_model"]["bit_exact"], true);

    // T steps of N x D_K stacked row-wise.
    match matfile::read_file(a.join("attn_spikes.mat")).unwrap() {
        MatrixData::Bits(m) => assert_eq!(m.shape(), (16 * 4, 8)),
        other => panic!("expected bits, got {:?}", other.kind()),
    }
}

#[test]
fn simulate_reads_matrix_files_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let put = |name: &str, m: RealMatrix| {
        matfile::write_file(data.join(name), &MatrixData::Real(m)).unwrap();
    };
    put("x.mat", RealMatrix::filled(4, 8, 1.0));
    for w in ["wq.mat", "wk.mat", "wv.mat"] {
        put(w, RealMatrix::filled(8, 8, 1.0));
    }
    put("bad.mat", RealMatrix::filled(5, 8, 1.0));
    let inputs = "[inputs]\nx = \"data/x.mat\"\nw_q = \"data/wq.mat\"\nw_k = \"data/wk.mat\"\nw_v = \"data/wv.mat\"\n";
    let cfg = write_config(dir.path(), "c.toml", &format!("{SMALL_SSA}{inputs}"));
    let out_dir = dir.path().join("out");
    let out = ssa(&["simulate", "-c", s(&cfg), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        matfile::read_real_file(out_dir.join("decoded.mat")).unwrap(),
        RealMatrix::filled(4, 8, 1.0)
    );

    let cfg = write_config(dir.path(), "bad.toml", &format!("{SMALL_SSA}{}", inputs.replace("x.mat", "bad.mat")));
    let out = ssa(&["simulate", "-c", s(&cfg), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    let cfg = write_config(dir.path(), "missing.toml", &format!("{SMALL_SSA}{}", inputs.replace("x.mat", "nope.mat")));
    let out = ssa(&["simulate", "-c", s(&cfg), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.mat"));
}

#[test]
fn trace_writes_versioned_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SSA);
    for (pipelined, cycles) in [(false, 2 * 8 * 16), (true, 8 * 17)] {
        let out_dir = dir.path().join(format!("t{pipelined}"));
        let mut args = vec!["trace", "-c", s(&cfg), "-o", s(&out_dir), "--synthetic", "random", "--full-trace"];
        if pipelined {
            args.push("--pipelined");
        }
        let out = ssa(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = std::fs::read_to_string(out_dir.join("trace.jsonl")).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["format"], "ssa-cycle-trace");
        assert_eq!(lines[0]["version"], 1);
        assert_eq!(lines[0]["pipelined"], pipelined);
        assert_eq!(lines.len(), cycles + 1);
        assert!(lines[1..].iter().all(|l| l["counters"].as_array().map(|c| c.len()) == Some(16)));
        let summary = read_json(out_dir.join("trace_summary.json"));
        assert_eq!(summary["cycles"], cycles);
        assert_eq!(summary["and_ops"], 2 * 16 * 8 * 16);
    }
}

fn energy_rows(dir: &Path, name: &str, text: &str) -> Value {
    let cfg = write_config(dir, name, text);
    let out_dir = dir.join(format!("{name}.out"));
    let out = ssa(&["energy", "-c", s(&cfg), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_dir.join("energy.csv").exists());
    read_json(out_dir.join("energy.json"))
}

#[test]
fn energy_table_structure_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = energy_rows(dir.path(), "t1.toml", &format!("[ssa]\nn = 4\nd_k = 8\nt = 1\n{UNIT_ENERGY}"));
    let t10 = energy_rows(dir.path(), "t10.toml", &format!("[ssa]\nn = 4\nd_k = 8\nt = 10\n{UNIT_ENERGY}"));
    let models: Vec<_> = t1["rows"].as_array().unwrap().iter().map(|r| r["model"].clone()).collect();
    assert_eq!(models, ["ann", "integer-spiking", "ssa"]);
    assert_eq!(t1["cross_check"]["passed"], true);
    assert_eq!(t10["cross_check"]["passed"], true);
    assert_eq!(t1["reference_anchors"].as_array().unwrap().len(), 3);
    let mem = |v: &Value, i: usize| v["rows"][i]["energy"]["memory_uj"].as_f64().unwrap();
    for i in [1, 2] {
        assert!((mem(&t10, i) - 10.0 * mem(&t1, i)).abs() <= 1e-12 * mem(&t10, i));
    }
    // The ANN row has no time dimension.
    assert_eq!(mem(&t10, 0), mem(&t1, 0));
    // Unit constants make the SSA AND count visible directly.
    assert_eq!(t1["rows"][2]["counts"]["and_ops"], 2 * 16 * 8);
}

#[test]
fn zero_energy_config_gives_zero_report() {
    let dir = tempfile::tempdir().unwrap();
    let zero = UNIT_ENERGY.replace("= 1.0", "= 0.0");
    let report = energy_rows(dir.path(), "z.toml", &format!("{SMALL_SSA}{zero}"));
    for row in report["rows"].as_array().unwrap() {
        assert_eq!(row["energy"]["total_uj"], 0.0);
        assert_eq!(row["energy"]["processing_uj"], 0.0);
        assert_eq!(row["energy"]["memory_uj"], 0.0);
    }
}

#[test]
fn energy_requires_every_constant() {
    let dir = tempfile::tempdir().unwrap();
    let partial = UNIT_ENERGY.replace("rng_pj = 1.0\n", "");
    let cfg = write_config(dir.path(), "p.toml", &format!("{SMALL_SSA}{partial}"));
    let out = ssa(&["energy", "-c", s(&cfg), "-o", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("rng_pj"), "{}", stderr(&out));
    let cfg = write_config(dir.path(), "none.toml", SMALL_SSA);
    assert_eq!(code(&ssa(&["energy", "-c", s(&cfg), "-o", s(dir.path())])), 2);
}

#[test]
fn sweep_writes_one_row_per_cell_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = "[sweep]\nn = [2, 4]\nd_k = [4, 8]\nt = [32, 64]\nseeds = 3\n";
    let cfg = write_config(dir.path(), "c.toml", &format!("{SMALL_SSA}{UNIT_ENERGY}{sweep}"));
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = ssa(&["sweep", "-c", s(&cfg), "-o", s(&out_dir)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let lines: Vec<_> = a.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2 * 2 * 3);
    assert!(lines[0].starts_with("n,d_k,t,seed,"));
    assert!(lines[1..].iter().all(|l| l.contains(",true,")));

    let lif = write_config(dir.path(), "lif.toml", &format!("{SMALL_SSA}[sweep]\nmode = \"lif\"\nn = [4]\nd_k = [8]\nt = [16]\nseeds = 2\ncycle = false\n"));
    let out = ssa(&["sweep", "-c", s(&lif), "-o", s(&dir.path().join("l"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let bad = write_config(dir.path(), "bad.toml", "[sweep]\nd_k = [4, 6]\n");
    let out = ssa(&["sweep", "-c", s(&bad), "-o", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("power-of-two"));
}
