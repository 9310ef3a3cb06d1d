#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vqart::fixture::{write_fixture, FixtureSpec};

pub const SMALL_MODEL: [&str; 12] = [
    "--codebook-size",
    "16",
    "--embedding-dim",
    "8",
    "--hidden",
    "32",
    "--hidden-blocks",
    "2",
    "--max-epochs",
    "4",
    "--patience",
    "2",
];

pub fn fixture(dir: &Path, spec: &FixtureSpec) -> PathBuf {
    write_fixture(dir, spec).expect("fixture written")
}

pub fn vqart(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqart"))
        .env_remove("VQART_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}
