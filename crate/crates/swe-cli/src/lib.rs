//! Support library for the `swe` binary: experiment helpers and the
//! validation suite. Kept as a library so the logic is unit-testable.

pub mod validate;

/// Weak-scaling problem side: the per-worker cell count is held constant,
/// and a non-square total is rounded up to the next integer side.
pub fn weak_n_side(workers: usize, cells_per_worker: usize) -> usize {
    let total = (workers * cells_per_worker) as f64;
    total.sqrt().ceil() as usize
}

/// Median of timing repetitions (NaN-free input).
pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in timings"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Rough per-run memory footprint: padded cell count times 8-byte words
/// times a conservative array multiplier (fields, halos, accumulators,
/// trial copies, gather buffers).
pub fn estimated_footprint_bytes(n_side: usize) -> u64 {
    let padded = (n_side as u64 + 2) * (n_side as u64 + 2);
    padded * 8 * 32
}

/// `MemAvailable` from /proc/meminfo, in bytes. `None` off Linux or if the
/// field is missing.
pub fn available_memory_bytes() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("MemAvailable:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}
