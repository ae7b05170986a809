//! `swe`: command-line front end for the shallow-water solver and its
//! performance harness. Subcommands cover single runs, strong/weak scaling
//! experiments, roofline and peak measurement, performance-portability
//! reports, and the physics validation suite.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use swe_cli::validate::{run_suite, Inject};
use swe_cli::{available_memory_bytes, estimated_footprint_bytes, median, weak_n_side};
use swe_core::driver::{run_simulation, RunOptions, RunReport};
use swe_core::grid::parse_kv_file;
use swe_core::perf::{
    estimate_peaks, read_peaks_csv, scaling_metrics, write_peaks_csv, write_roofline_csv,
    write_scaling_csv, MonotonicTimer, PeakProbeConfig, PlatformPeaks,
};
use swe_core::ppmetrics::{
    pp_sweep, read_observations_csv, write_observations_csv, write_report_csv, write_report_json,
    PlatformObservation,
};
use swe_core::{ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "swe", about = "2D shallow-water solver and performance harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write a run summary (and snapshots).
    Run {
        /// Scenario config file (key = value with [scenario] section).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Rank grid dimensions.
        #[arg(long, default_value_t = 1)]
        px: usize,
        #[arg(long, default_value_t = 1)]
        py: usize,
        /// Snapshot cadence in simulated seconds.
        #[arg(long)]
        t_io: Option<f64>,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Strong scaling: fixed problem, growing worker counts.
    ScaleStrong {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        workers: Vec<usize>,
        /// Timing repetitions per row; the median is reported.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 20)]
        max_steps: u64,
    },
    /// Weak scaling: fixed cells per worker.
    ScaleWeak {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 4096)]
        cells_per_worker: usize,
        #[arg(long, default_value_t = 20)]
        max_steps: u64,
    },
    /// Measure kernel samples and place them on the roofline.
    Roofline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Peaks CSV; probed empirically when absent.
        #[arg(long)]
        peaks: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        max_steps: u64,
    },
    /// Probe empirical machine peaks and write a peaks CSV.
    Peaks {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value = "local")]
        platform: String,
    },
    /// Score observations against peak tables: per-kernel PP1/PP2 report.
    Ppreport {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        peaks: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the physics/determinism validation suite.
    Validate {
        /// Fault injection hook (canary): beta-sign-flip or
        /// scramble-sweep-order.
        #[arg(long, hide = true)]
        inject: Option<String>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => {
            let map = parse_kv_file(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ScenarioConfig::from_kv(&map)?)
        }
        None => Ok(ScenarioConfig {
            kind: ScenarioKind::CircularDamBreak,
            n_side: 256,
            t_end: 1e12,
            ..ScenarioConfig::default()
        }),
    }
}

fn check_resources(n_side: usize, workers: usize) -> Result<()> {
    let footprint = estimated_footprint_bytes(n_side);
    if let Some(avail) = available_memory_bytes() {
        if footprint > avail {
            bail!(
                "estimated footprint {:.1} GiB for n_side={n_side} exceeds available memory \
                 {:.1} GiB; refusing to launch",
                footprint as f64 / (1u64 << 30) as f64,
                avail as f64 / (1u64 << 30) as f64
            );
        }
    }
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if workers > cores {
        eprintln!("warning: {workers} workers on {cores} core(s); timings will be oversubscribed");
    }
    Ok(())
}

fn timed_run(cfg: &ScenarioConfig, workers: usize, max_steps: u64) -> Result<RunReport> {
    let opts = RunOptions {
        p_x: workers,
        p_y: 1,
        max_steps: Some(max_steps),
        ..RunOptions::default()
    };
    Ok(run_simulation(cfg, &opts)?)
}

fn cmd_run(
    config: &Option<PathBuf>,
    out: &Path,
    px: usize,
    py: usize,
    t_io: Option<f64>,
    max_steps: Option<u64>,
) -> Result<()> {
    let cfg = load_config(config)?;
    check_resources(cfg.n_side, px * py)?;
    std::fs::create_dir_all(out)?;
    let opts = RunOptions {
        p_x: px,
        p_y: py,
        t_io,
        max_steps,
        output_dir: Some(out.to_path_buf()),
        ..RunOptions::default()
    };
    let report = run_simulation(&cfg, &opts)?;
    let summary = report.summary_json();
    std::fs::write(out.join("run_summary.json"), &summary)?;
    println!("{summary}");
    eprintln!(
        "wrote {} snapshot(s) and run_summary.json to {}",
        report.snapshot_paths.len(),
        out.display()
    );
    Ok(())
}

fn cmd_scale(
    config: &Option<PathBuf>,
    out: &Path,
    workers: &[usize],
    reps: usize,
    max_steps: u64,
    cells_per_worker: Option<usize>,
) -> Result<()> {
    if workers.is_empty() || reps == 0 {
        bail!("need at least one worker count and one repetition");
    }
    let base_cfg = load_config(config)?;
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for &w in workers {
        let cfg = match cells_per_worker {
            Some(cpw) => ScenarioConfig {
                n_side: weak_n_side(w, cpw),
                ..base_cfg.clone()
            },
            None => base_cfg.clone(),
        };
        check_resources(cfg.n_side, w)?;
        let times: Vec<f64> = (0..reps)
            .map(|_| timed_run(&cfg, w, max_steps).map(|r| r.wall_time_s))
            .collect::<Result<_>>()?;
        let t = median(times);
        rows.push((w, t));
        eprintln!("workers={w} n_side={} median time {t:.4}s over {reps} rep(s)", cfg.n_side);
    }
    let t_base = rows[0].1;
    let table = scaling_metrics(t_base, &rows)?;
    for w in rows.windows(2) {
        if w[1].1 > w[0].1 && cells_per_worker.is_none() {
            eprintln!(
                "warning: median time increased from {} to {} workers (non-monotone)",
                w[0].0, w[1].0
            );
        }
    }
    let name = if cells_per_worker.is_some() {
        "weak_scaling.csv"
    } else {
        "strong_scaling.csv"
    };
    let path = out.join(name);
    write_scaling_csv(&path, &table)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn probe_host_peaks(reps: usize, platform: &str) -> Result<(PlatformPeaks, Vec<String>)> {
    let cfg = PeakProbeConfig {
        repetitions: reps.max(1),
        platform: platform.to_string(),
        ..PeakProbeConfig::default()
    };
    let est = estimate_peaks(&cfg, &MonotonicTimer::default())?;
    Ok((est.peaks, est.warnings))
}

fn cmd_roofline(
    config: &Option<PathBuf>,
    out: &Path,
    peaks_path: &Option<PathBuf>,
    max_steps: u64,
) -> Result<()> {
    let cfg = load_config(config)?;
    check_resources(cfg.n_side, 1)?;
    std::fs::create_dir_all(out)?;
    let peaks = match peaks_path {
        Some(p) => {
            let table = read_peaks_csv(p)?;
            table
                .into_iter()
                .next()
                .context("peaks CSV has no data rows")?
        }
        None => {
            let (peaks, warnings) = probe_host_peaks(5, "local")?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            peaks
        }
    };
    let report = run_simulation(
        &cfg,
        &RunOptions {
            max_steps: Some(max_steps),
            ..RunOptions::default()
        },
    )?;
    let roofline_path = out.join("roofline.csv");
    write_roofline_csv(&roofline_path, &report.kernel_samples, &peaks)?;
    let observations: Vec<PlatformObservation> = report
        .kernel_samples
        .iter()
        .map(|s| PlatformObservation {
            platform: peaks.platform.clone(),
            kernel: s.kernel.clone(),
            n_side: cfg.n_side,
            p_achieved_gflops: s.p_achieved() / 1e9,
            a_achieved_flops_per_byte: s.a_achieved(),
        })
        .collect();
    let obs_path = out.join("observations.csv");
    write_observations_csv(&obs_path, &observations)?;
    println!("wrote {} and {}", roofline_path.display(), obs_path.display());
    Ok(())
}

fn cmd_peaks(out: &Path, reps: usize, platform: &str) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let (peaks, warnings) = probe_host_peaks(reps, platform)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let path = out.join("peaks.csv");
    write_peaks_csv(&path, std::slice::from_ref(&peaks))?;
    println!(
        "{}: p_peak = {:.3} GFLOP/s, b_peak = {:.3} GB/s (a_thresh = {:.3} FLOP/B); wrote {}",
        peaks.platform,
        peaks.p_peak_gflops,
        peaks.b_peak_gbs,
        peaks.a_thresh(),
        path.display()
    );
    Ok(())
}

fn cmd_ppreport(observations: &Path, peaks: &Path, out: &Path) -> Result<()> {
    let obs = read_observations_csv(observations)?;
    let peak_table = read_peaks_csv(peaks)?;
    if peak_table.is_empty() {
        bail!("peaks CSV has no data rows");
    }
    std::fs::create_dir_all(out)?;
    let mut warnings = Vec::new();
    let rows = pp_sweep(&obs, &peak_table, &mut warnings)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let csv_path = out.join("pp_report.csv");
    let json_path = out.join("pp_report.json");
    write_report_csv(&csv_path, &rows)?;
    write_report_json(&json_path, &rows, &warnings)?;
    for row in &rows {
        println!("{}: PP1 = {:.4}, PP2 = {:.4}", row.kernel, row.pp1, row.pp2);
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_validate(inject: &Option<String>) -> Result<()> {
    let inject = match inject {
        Some(s) => Some(Inject::parse(s).with_context(|| format!("unknown injection '{s}'"))?),
        None => None,
    };
    let results = run_suite(inject);
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {} (bound {:.1e})", r.name, r.detail, r.bound);
    }
    println!("{}", serde_json::to_string(&results)?);
    if results.iter().any(|r| !r.passed) {
        std::process::exit(1);
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Run {
            config,
            out,
            px,
            py,
            t_io,
            max_steps,
        } => cmd_run(config, out, *px, *py, *t_io, *max_steps),
        Cmd::ScaleStrong {
            config,
            out,
            workers,
            reps,
            max_steps,
        } => cmd_scale(config, out, workers, *reps, *max_steps, None),
        Cmd::ScaleWeak {
            config,
            out,
            workers,
            reps,
            cells_per_worker,
            max_steps,
        } => cmd_scale(config, out, workers, *reps, *max_steps, Some(*cells_per_worker)),
        Cmd::Roofline {
            config,
            out,
            peaks,
            max_steps,
        } => cmd_roofline(config, out, peaks, *max_steps),
        Cmd::Peaks {
            out,
            reps,
            platform,
        } => cmd_peaks(out, *reps, platform),
        Cmd::Ppreport {
            observations,
            peaks,
            out,
        } => cmd_ppreport(observations, peaks, out),
        Cmd::Validate { inject } => cmd_validate(inject),
    }
}
