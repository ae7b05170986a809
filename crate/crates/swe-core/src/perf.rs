//! Kernel cost models and timing samples, ERT-style empirical peak
//! estimation, roofline normalization and scaling metrics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    ComputeDt,
    FluxX,
    FluxY,
    NewState,
    DtReduction,
}

pub const KERNELS: [KernelKind; 5] = [
    KernelKind::ComputeDt,
    KernelKind::FluxX,
    KernelKind::FluxY,
    KernelKind::NewState,
    KernelKind::DtReduction,
];

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::ComputeDt => "computeDt",
            KernelKind::FluxX => "fluxX",
            KernelKind::FluxY => "fluxY",
            KernelKind::NewState => "newState",
            KernelKind::DtReduction => "dtReduction",
        }
    }
}

/// Analytic per-interior-cell cost of one kernel invocation.
///
/// FLOP convention: +, -, *, /, sqrt each count 1; comparisons and sign
/// flips count 0. The byte model counts algorithmic traffic only: each
/// field value read once and written once per kernel pass, 8-byte words;
/// cache-level traffic is out of scope.
#[derive(Debug, Clone, Copy)]
pub struct KernelCostModel {
    pub kind: KernelKind,
    pub flops_per_cell: f64,
    pub bytes_per_cell: f64,
}

impl KernelCostModel {
    /// Frozen model constants for the solver kernels on a wet interior.
    ///
    /// FLOP counts are calibrated against an arithmetic-counting oracle on
    /// a fully wet 32x32 circular dam break (see the cost-model fidelity
    /// test); byte counts follow the read-once/write-once rule:
    ///   computeDt    reads h,hu,hv                      -> 24 B/cell
    ///   fluxX/fluxY  read h,hu,hv,z, write 3 accumulators -> 56 B/cell
    ///   newState     reads U(3) + 2 accumulators(6), writes U(3) -> 96 B/cell
    ///   dtReduction  reads h + 2 depth accumulators      -> 24 B/cell
    pub fn standard(kind: KernelKind) -> Self {
        let (flops, bytes) = match kind {
            KernelKind::ComputeDt => (7.0, 24.0),
            KernelKind::FluxX => (114.3, 56.0),
            KernelKind::FluxY => (114.3, 56.0),
            KernelKind::NewState => (9.0, 96.0),
            KernelKind::DtReduction => (5.0, 24.0),
        };
        Self {
            kind,
            flops_per_cell: flops,
            bytes_per_cell: bytes,
        }
    }
}

/// Accumulated timing and cost-model evaluation of one kernel over a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSample {
    pub kernel: String,
    pub calls: u64,
    pub total_s: f64,
    pub total_flops: f64,
    pub total_bytes: f64,
}

impl KernelSample {
    pub fn p_achieved(&self) -> f64 {
        self.total_flops / self.total_s
    }

    pub fn a_achieved(&self) -> f64 {
        self.total_flops / self.total_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeakSource {
    Empirical,
    Supplied,
}

/// Peak processing speed and memory bandwidth for one platform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformPeaks {
    pub platform: String,
    pub p_peak_gflops: f64,
    pub b_peak_gbs: f64,
    pub source: PeakSource,
}

impl PlatformPeaks {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_peak_gflops > 0.0 && self.b_peak_gbs > 0.0) {
            return Err(Error::Perf(format!(
                "peaks must be > 0, got ({}, {})",
                self.p_peak_gflops, self.b_peak_gbs
            )));
        }
        Ok(())
    }

    /// Arithmetic-intensity threshold `p_peak / b_peak` [FLOP/B].
    pub fn a_thresh(&self) -> f64 {
        self.p_peak_gflops / self.b_peak_gbs
    }
}

/// Normalized roofline coordinates `(p_norm, a_norm)`.
pub fn roofline_normalize(sample: &KernelSample, peaks: &PlatformPeaks) -> Result<(f64, f64)> {
    peaks.validate()?;
    let p_norm = sample.p_achieved() / (peaks.p_peak_gflops * 1e9);
    let a_norm = sample.a_achieved() / peaks.a_thresh();
    Ok((p_norm, a_norm))
}

/// One strong/weak scaling table row: `s = e = t_node / t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub workers: usize,
    pub time_s: f64,
    pub ratio: f64,
}

pub fn scaling_metrics(t_node: f64, runs: &[(usize, f64)]) -> Result<Vec<ScalingRow>> {
    if !(t_node > 0.0) {
        return Err(Error::Perf("missing or non-positive baseline time".into()));
    }
    Ok(runs
        .iter()
        .map(|&(workers, time_s)| ScalingRow {
            workers,
            time_s,
            ratio: t_node / time_s,
        })
        .collect())
}

/// Injectable monotonic clock, seconds.
pub trait Timer: Sync {
    fn now_s(&self) -> f64;
}

pub struct MonotonicTimer(Instant);

impl Default for MonotonicTimer {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Timer for MonotonicTimer {
    fn now_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Peak probing configuration: a working-set ladder for the streaming
/// (bandwidth) trials and a FLOP-per-element ladder for the compute trials,
/// both built on d = a*b + c kernels.
#[derive(Debug, Clone)]
pub struct PeakProbeConfig {
    /// Element counts per array; should span cache-resident to
    /// memory-resident sizes.
    pub sizes: Vec<usize>,
    /// Fused multiply-add repetitions per element for the compute trials.
    pub fma_ladder: Vec<usize>,
    pub repetitions: usize,
    pub threads: usize,
    /// Trials faster than this are dropped as below timer resolution.
    pub min_measurable_s: f64,
    pub platform: String,
}

impl Default for PeakProbeConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1 << 14, 1 << 17, 1 << 20, 1 << 23],
            fma_ladder: vec![16, 64, 256],
            repetitions: 5,
            threads: 1,
            min_measurable_s: 1e-6,
            platform: "local".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub kind: &'static str,
    pub elements: usize,
    pub flops_per_s: f64,
    pub bytes_per_s: f64,
}

#[derive(Debug)]
pub struct PeakEstimate {
    pub peaks: PlatformPeaks,
    pub trials: Vec<TrialResult>,
    pub warnings: Vec<String>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in timings"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Streaming triad d[i] = a[i]*b[i] + c[i]: 2 FLOP, 32 bytes per element.
fn run_stream_trial(n: usize, threads: usize, timer: &dyn Timer) -> f64 {
    let chunk = n / threads.max(1);
    let barrier = std::sync::Barrier::new(threads);
    let elapsed = std::sync::Mutex::new(0.0f64);
    std::thread::scope(|scope| {
        for t in 0..threads {
            let barrier = &barrier;
            let elapsed = &elapsed;
            let count = if t == threads - 1 { n - chunk * (threads - 1) } else { chunk };
            scope.spawn(move || {
                let a = vec![1.000001f64; count];
                let b = vec![0.999999f64; count];
                let c = vec![0.5f64; count];
                let mut d = vec![0.0f64; count];
                barrier.wait();
                let t0 = timer.now_s();
                for i in 0..count {
                    d[i] = a[i] * b[i] + c[i];
                }
                std::hint::black_box(&d);
                let t1 = timer.now_s();
                barrier.wait();
                if t == 0 {
                    *elapsed.lock().unwrap() = t1 - t0;
                }
            });
        }
    });
    let e = *elapsed.lock().unwrap();
    e
}

/// Register-resident FMA chain: 2*k FLOP, 16 bytes per element.
fn run_compute_trial(n: usize, k: usize, threads: usize, timer: &dyn Timer) -> f64 {
    let chunk = n / threads.max(1);
    let barrier = std::sync::Barrier::new(threads);
    let elapsed = std::sync::Mutex::new(0.0f64);
    std::thread::scope(|scope| {
        for t in 0..threads {
            let barrier = &barrier;
            let elapsed = &elapsed;
            let count = if t == threads - 1 { n - chunk * (threads - 1) } else { chunk };
            scope.spawn(move || {
                let src = vec![0.999999f64; count];
                let mut dst = vec![0.0f64; count];
                let a = std::hint::black_box(1.000000001f64);
                let c = std::hint::black_box(1e-9f64);
                barrier.wait();
                let t0 = timer.now_s();
                for i in 0..count {
                    let mut x = src[i];
                    for _ in 0..k {
                        x = x * a + c;
                    }
                    dst[i] = x;
                }
                std::hint::black_box(&dst);
                let t1 = timer.now_s();
                barrier.wait();
                if t == 0 {
                    *elapsed.lock().unwrap() = t1 - t0;
                }
            });
        }
    });
    let e = *elapsed.lock().unwrap();
    e
}

/// Estimate machine peaks: `b_peak` from the best streaming trial,
/// `p_peak` from the best trial of any intensity. Medians over
/// `repetitions`; trials below the timer resolution are dropped with a
/// warning.
pub fn estimate_peaks(cfg: &PeakProbeConfig, timer: &dyn Timer) -> Result<PeakEstimate> {
    if cfg.sizes.is_empty() || cfg.repetitions == 0 {
        return Err(Error::Perf("peak probe needs at least one size and repetition".into()));
    }
    let mut trials = Vec::new();
    let mut warnings = Vec::new();
    let mut p_peak: f64 = 0.0;
    let mut b_peak: f64 = 0.0;

    for &n in &cfg.sizes {
        let times: Vec<f64> = (0..cfg.repetitions)
            .map(|_| run_stream_trial(n, cfg.threads, timer))
            .collect();
        let t = median(times);
        if t < cfg.min_measurable_s {
            warnings.push(format!(
                "stream trial n={n} took {t:.3e}s, below timer resolution; dropped"
            ));
            continue;
        }
        let flops = 2.0 * n as f64 / t;
        let bytes = 32.0 * n as f64 / t;
        trials.push(TrialResult {
            kind: "stream",
            elements: n,
            flops_per_s: flops,
            bytes_per_s: bytes,
        });
        p_peak = p_peak.max(flops);
        b_peak = b_peak.max(bytes);
    }

    for &n in &cfg.sizes {
        for &k in &cfg.fma_ladder {
            let times: Vec<f64> = (0..cfg.repetitions)
                .map(|_| run_compute_trial(n, k, cfg.threads, timer))
                .collect();
            let t = median(times);
            if t < cfg.min_measurable_s {
                warnings.push(format!(
                    "compute trial n={n} k={k} took {t:.3e}s, below timer resolution; dropped"
                ));
                continue;
            }
            let flops = 2.0 * (k * n) as f64 / t;
            let bytes = 16.0 * n as f64 / t;
            trials.push(TrialResult {
                kind: "compute",
                elements: n,
                flops_per_s: flops,
                bytes_per_s: bytes,
            });
            p_peak = p_peak.max(flops);
        }
    }

    if trials.is_empty() {
        return Err(Error::Perf("every peak trial was below timer resolution".into()));
    }
    Ok(PeakEstimate {
        peaks: PlatformPeaks {
            platform: cfg.platform.clone(),
            p_peak_gflops: p_peak / 1e9,
            b_peak_gbs: b_peak / 1e9,
            source: PeakSource::Empirical,
        },
        trials,
        warnings,
    })
}

/// Peaks CSV: `platform,p_peak_gflops,b_peak_gbs`.
pub fn write_peaks_csv(path: &Path, peaks: &[PlatformPeaks]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "platform,p_peak_gflops,b_peak_gbs")?;
    for p in peaks {
        writeln!(w, "{},{},{}", p.platform, p.p_peak_gflops, p.b_peak_gbs)?;
    }
    Ok(())
}

pub fn read_peaks_csv(path: &Path) -> Result<Vec<PlatformPeaks>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("platform")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Perf(format!("peaks CSV line {}: expected 3 columns", lineno + 1)));
        }
        let p = PlatformPeaks {
            platform: cols[0].trim().to_string(),
            p_peak_gflops: cols[1].trim().parse().map_err(|e| {
                Error::Perf(format!("peaks CSV line {}: {e}", lineno + 1))
            })?,
            b_peak_gbs: cols[2].trim().parse().map_err(|e| {
                Error::Perf(format!("peaks CSV line {}: {e}", lineno + 1))
            })?,
            source: PeakSource::Supplied,
        };
        p.validate()?;
        out.push(p);
    }
    Ok(out)
}

/// Roofline CSV: `kernel,p_achieved,a_achieved,p_norm,a_norm`
/// (p in FLOP/s, a in FLOP/B).
pub fn write_roofline_csv(
    path: &Path,
    samples: &[KernelSample],
    peaks: &PlatformPeaks,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "kernel,p_achieved,a_achieved,p_norm,a_norm")?;
    for s in samples {
        let (p_norm, a_norm) = roofline_normalize(s, peaks)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            s.kernel,
            s.p_achieved(),
            s.a_achieved(),
            p_norm,
            a_norm
        )?;
    }
    Ok(())
}

/// Scaling CSV: `workers,time_s,speedup,efficiency` (both ratio columns
/// carry `t_node/t`; strong runs read the speedup column, weak runs the
/// efficiency column).
pub fn write_scaling_csv(path: &Path, rows: &[ScalingRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "workers,time_s,speedup,efficiency")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.workers, r.time_s, r.ratio, r.ratio)?;
    }
    Ok(())
}
