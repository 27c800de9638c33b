#![allow(dead_code)]

pub mod tables;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

static SCRATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Create a fresh scratch directory for one test, unique across the process.
pub fn scratch_dir(label: &str) -> PathBuf {
    let stamp = SCRATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!(
        "rbcert-test-{}-{}-{}",
        label,
        std::process::id(),
        stamp
    ));
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}
