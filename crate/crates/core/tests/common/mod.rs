//! Shared runner for the CLI golden cases.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Name, arguments (`{F}` is the fixture dir, `{T}` the output dir) and
/// expected exit code.
pub const CASES: &[(&str, &str, i32)] = &[
    ("info_ones", "info {F}/ones.dtent", 0),
    ("info_ones_binary", "info {F}/ones.dten", 0),
    ("info_eps", "info {F}/eps.dtent", 0),
    ("info_corrupt", "info {F}/corrupt_magic.dten", 3),
    ("info_missing", "info {F}/no_such_file.dten", 3),
    ("rank222_rotation", "rank222 {F}/rotation.dtent", 0),
    ("rank222_diag", "rank222 {F}/diag.dtent", 0),
    ("rank222_wrong_shape", "rank222 {F}/eps.dtent", 2),
    ("decompose_tt_additive", "decompose {F}/additive.dtent --method tt --rank 2,2 --out {T}/additive.tt --report {T}/additive_tt.json", 0),
    ("decompose_tt_tol", "decompose {F}/additive.dtent --method tt --tol 1e-10 --out {T}/additive_tol.tt", 0),
    ("decompose_hosvd_full", "decompose {F}/additive.dtent --method hosvd --rank 4,4,4 --out {T}/additive.tuck", 0),
    ("decompose_hooi", "decompose {F}/additive.dtent --method hooi --rank 2,2,2 --out {T}/additive_hooi.tuck --report {T}/hooi.json", 0),
    ("decompose_cp_rotation", "decompose {F}/rotation.dtent --method cp --rank 2 --seed 3 --max-sweeps 40 --out {T}/rotation.cp --report {T}/rotation_cp.json", 0),
    ("decompose_cp_ones", "decompose {F}/ones.dtent --method cp --rank 1 --seed 1 --out {T}/ones.cp", 0),
    ("decompose_cp_tol", "decompose {F}/ones.dtent --method cp --tol 0.1 --out {T}/never.cp", 2),
    ("decompose_rank_arity", "decompose {F}/additive.dtent --method tt --rank 2 --out {T}/never.tt", 2),
    ("decompose_no_target", "decompose {F}/additive.dtent --method tt --out {T}/never.tt", 2),
    ("reconstruct_tt", "reconstruct {F}/additive.tt --out {T}/additive_from_tt.dtent", 0),
    ("reconstruct_zero_core", "reconstruct {F}/zero_core.tuck --out {T}/zero.dten", 0),
    ("reconstruct_guard", "--max-dense 10 reconstruct {F}/additive.tt --out {T}/never.dten", 4),
    ("error_tt", "error {F}/additive.dtent {F}/additive.tt", 0),
    ("error_mismatched", "error {F}/ones.dtent {F}/additive.tt", 2),
    ("tt_z_additive", "tt z {F}/additive.tt", 0),
    ("tt_z_separable", "tt z {F}/separable.tt", 0),
    ("tt_marginal", "tt marginal 2 {F}/additive.tt", 0),
    ("tt_entry", "tt entry {F}/additive.tt 1 2 3", 0),
    ("tt_entry_range", "tt entry {F}/additive.tt 5 1 1", 2),
    ("tt_wrong_format", "tt z {F}/ones.dten", 3),
    ("grid_square_of_sum", "grid --poly {F}/square_of_sum.poly --mesh {F}/mesh2d.txt --out {T}/sq.dten --cp-out {T}/sq.cp", 0),
    ("grid_constant", "grid --poly {F}/constant.poly --mesh {F}/mesh2d.txt --out {T}/const.dtent --cp-out {T}/const.cp", 0),
    ("grid_builtin", "grid --builtin exp-sum --mesh {F}/mesh2d.txt --out {T}/exp.dten", 0),
];

pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

fn expand(args: &str, out: &Path) -> Vec<String> {
    let f = fixtures();
    args.split_whitespace()
        .map(|a| {
            a.replace("{F}", f.to_str().unwrap())
                .replace("{T}", out.to_str().unwrap())
        })
        .collect()
}

pub fn run_case(args: &str, out: &Path) -> Outcome {
    let output = Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(expand(args, out))
        .env_remove("LOWRANK_MAX_DENSE_ENTRIES")
        .output()
        .expect("failed to launch lowrank");
    Outcome {
        stdout: String::from_utf8(output.stdout).expect("stdout is UTF-8"),
        code: output.status.code().unwrap_or(-1),
    }
}

/// Drops the wall-clock lines, the only nondeterministic part of the output.
pub fn strip_timing(text: &str) -> String {
    text.lines()
        .filter(|l| {
            !l.starts_with("wall_time=") && !l.trim_start().starts_with("\"wall_time_seconds\"")
        })
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Every file written into `dir`, JSON reports with timing stripped.
pub fn output_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = std::fs::read(&path).unwrap();
        let bytes = if name.ends_with(".json") {
            strip_timing(&String::from_utf8(bytes).unwrap()).into_bytes()
        } else {
            bytes
        };
        out.insert(name, bytes);
    }
    out
}

/// Runs every case into `dir`, returning the timing-stripped stdout per case.
pub fn run_all(dir: &Path) -> Vec<(String, Outcome)> {
    CASES
        .iter()
        .map(|(name, args, _)| {
            let mut o = run_case(args, dir);
            o.stdout = strip_timing(&o.stdout);
            (name.to_string(), o)
        })
        .collect()
}

/// Compares a case's stdout with its golden file. With `LOWRANK_BLESS=1`
/// set, missing or differing goldens are rewritten instead.
pub fn check_golden(name: &str, stdout: &str) -> Result<(), String> {
    let path = golden_dir().join(format!("{name}.out"));
    if std::env::var("LOWRANK_BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, stdout).unwrap();
        return Ok(());
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected != stdout {
        return Err(format!(
            "{name}: stdout differs from golden\n--- expected\n{expected}--- got\n{stdout}"
        ));
    }
    Ok(())
}
