//! Drive the command-line pipeline in-process: simulate, estimate and
//! privatize into a temporary directory.

use dp_residual::cli::{main_with_args, PRODUCTION_ENV};

fn main() {
    let out = std::env::temp_dir().join("dp-residual-example");
    let out = out.to_str().expect("utf-8 temp dir");
    if std::env::var(PRODUCTION_ENV).is_ok() {
        eprintln!("{PRODUCTION_ENV} is set: the release seed will not be recorded");
    }
    for cmd in ["simulate", "estimate", "privatize", "delta-curve", "roc"] {
        let code = main_with_args(["dp-residual", "--out", out, "--seed", "17", cmd]);
        assert_eq!(code, 0, "{cmd} failed");
    }
    let summary = std::fs::read_to_string(format!("{out}/summary.csv")).expect("summary");
    print!("{summary}");
}
