//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/SKIP line with the measured quantity and its bound.

use std::cell::Cell;
use std::ops::{Add, Div, Mul, Sub};
use std::time::Instant;

use swe_core::driver::{run_dambreak_1d, run_simulation, RunOptions};
use swe_core::grid::read_snapshot;
use swe_core::perf::{
    estimate_peaks, roofline_normalize, KernelCostModel, KernelKind, MonotonicTimer,
    PeakProbeConfig, PeakSource, PlatformPeaks, KERNELS,
};
use swe_core::ppmetrics::{pp1, pp2};
use swe_core::riemann::{accumulate_flux_sweep, EdgeFluxAccumulator, Orientation, SolverOptions};
use swe_core::timestepping::compute_dt;
use swe_core::{FieldSet, GridSpec, ScenarioConfig, ScenarioKind};

const G: f64 = 9.81;

fn circular(n_side: usize, t_end: f64) -> ScenarioConfig {
    ScenarioConfig {
        kind: ScenarioKind::CircularDamBreak,
        n_side,
        t_end,
        ..ScenarioConfig::default()
    }
}

#[test]
fn criterion_01_well_balancing() {
    let cfg = ScenarioConfig {
        kind: ScenarioKind::LakeAtRest,
        n_side: 200,
        t_end: 1e12,
        ..ScenarioConfig::default()
    };
    let opts = RunOptions {
        max_steps: Some(1000),
        ..RunOptions::default()
    };
    let spec = cfg.grid_spec().unwrap();
    let initial = cfg.initialize(&spec).unwrap();
    let start = Instant::now();
    let report = run_simulation(&cfg, &opts).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(report.steps, 1000);
    let mut max_dev = 0.0f64;
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let k = spec.flat_index(i, j);
            let d = (report.fields.h[k] + report.fields.z[k]) - (initial.h[k] + initial.z[k]);
            max_dev = max_dev.max(d.abs());
        }
    }
    assert!(max_dev <= 1e-12, "surface deviation {max_dev:.3e} > 1e-12");
    assert!(elapsed < 30.0, "runtime {elapsed:.1}s >= 30s");
    println!(
        "PASS criterion 1 (well-balancing): max |eta - eta0| = {max_dev:.3e} <= 1e-12 \
         in {elapsed:.1}s over 1000 steps"
    );
}

#[test]
fn criterion_02_mass_conservation() {
    let cfg = circular(200, 40.0);
    let report = run_simulation(&cfg, &RunOptions::default()).unwrap();
    assert!(report.steps >= 1000, "only {} steps", report.steps);
    let v0 = report.mass_audit[0].volume;
    let mut max_drift = 0.0f64;
    for entry in &report.mass_audit {
        max_drift = max_drift.max(((entry.volume - v0) / v0).abs());
    }
    assert!(max_drift <= 1e-10, "relative drift {max_drift:.3e} > 1e-10");
    println!(
        "PASS criterion 2 (mass conservation): relative volume drift {max_drift:.3e} <= 1e-10 \
         over {} steps",
        report.steps
    );
}

#[test]
fn criterion_03_radial_mirror_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = circular(100, 1.0);
    let opts = RunOptions {
        t_io: Some(0.25),
        output_dir: Some(dir.path().to_path_buf()),
        ..RunOptions::default()
    };
    let report = run_simulation(&cfg, &opts).unwrap();
    assert!(report.snapshot_paths.len() >= 4);
    let mut max_diff = 0.0f64;
    for path in &report.snapshot_paths {
        let (spec, fields) = read_snapshot(path).unwrap();
        let n = spec.n_x;
        for j in 1..=n {
            for i in 1..=n {
                let h = fields.h[spec.flat_index(i, j)];
                for &(a, b) in &[(j, i), (n + 1 - i, j), (i, n + 1 - j)] {
                    max_diff = max_diff.max((h - fields.h[spec.flat_index(a, b)]).abs());
                }
            }
        }
    }
    assert!(max_diff <= 1e-12, "asymmetry {max_diff:.3e} > 1e-12");
    println!(
        "PASS criterion 3 (symmetry): max transpose/mirror difference {max_diff:.3e} <= 1e-12 \
         across {} snapshots",
        report.snapshot_paths.len()
    );
}

#[test]
fn criterion_04_decomposition_equivalence() {
    let cfg = circular(128, 1e12);
    let run = |p_x, p_y| {
        let opts = RunOptions {
            p_x,
            p_y,
            max_steps: Some(200),
            ..RunOptions::default()
        };
        run_simulation(&cfg, &opts).unwrap()
    };
    let reference = run(1, 1);
    for (p_x, p_y) in [(2, 2), (4, 1)] {
        let other = run(p_x, p_y);
        for (name, fa, fb) in [
            ("h", &reference.fields.h, &other.fields.h),
            ("hu", &reference.fields.hu, &other.fields.hu),
            ("hv", &reference.fields.hv, &other.fields.hv),
        ] {
            for (k, (a, b)) in fa.iter().zip(fb.iter()).enumerate() {
                assert_eq!(
                    a.to_bits(),
                    b.to_bits(),
                    "{name}[{k}] differs between (1,1) and ({p_x},{p_y})"
                );
            }
        }
    }
    println!(
        "PASS criterion 4 (decomposition equivalence): h,hu,hv bitwise identical across \
         (1,1)/(2,2)/(4,1) after 200 steps"
    );
}

#[test]
fn criterion_05_stoker_convergence() {
    let table = run_dambreak_1d(&[200, 400, 800, 1600], 4.0).unwrap();
    assert!(table.monotone, "L1 errors not strictly decreasing: {:?}", table.rows);
    assert!(
        table.observed_order >= 0.6,
        "observed order {:.3} < 0.6",
        table.observed_order
    );
    for row in &table.rows {
        assert!(
            row.shock_error <= 2.0 * row.dx,
            "shock error {} > 2*dx at n={}",
            row.shock_error,
            row.n_cells
        );
    }
    println!(
        "PASS criterion 5 (analytical dam break): L1 errors {:?} strictly decreasing, \
         observed order {:.2} >= 0.6, shock within 2*dx at all resolutions",
        table.rows.iter().map(|r| r.l1_error).collect::<Vec<_>>(),
        table.observed_order
    );
}

#[test]
fn criterion_06_cfl_value() {
    let spec = GridSpec::new(8, 8, 0.5, (0.0, 0.0)).unwrap();
    let mut fields = FieldSet::zeros(&spec);
    fields.h.fill(1.0);
    let dt = compute_dt(&fields, &spec, 0.45, G).unwrap();
    let expected = 0.45 * 0.5 / G.sqrt();
    let rel = ((dt - expected) / expected).abs();
    assert!(rel <= 1e-12, "dt {dt:.15} vs {expected:.15}, rel err {rel:.3e}");
    println!(
        "PASS criterion 6 (CFL value): dt = {dt:.13} matches 0.45*0.5/sqrt(9.81) \
         within {rel:.1e} relative"
    );
}

#[test]
fn criterion_07_metric_algebra() {
    let rs = [0.2, 0.4, 0.6, 0.8];
    assert_eq!(pp2(&rs), 0.5);
    assert!((pp1(&rs) - 0.384).abs() <= 1e-3, "pp1 = {}", pp1(&rs));

    // AM-HM fuzz over 10^4 random score vectors (xorshift, fixed seed).
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..10_000 {
        let len = 1 + (next() * 8.0) as usize;
        let rs: Vec<f64> = (0..len).map(|_| next().max(1e-6)).collect();
        let (h, a) = (pp1(&rs), pp2(&rs));
        assert!(h <= a + 1e-15, "AM-HM violated for {rs:?}");
        assert!(h > 0.0 && a <= 1.0 + 1e-15);
    }
    println!(
        "PASS criterion 7 (metric algebra): pp2 = 0.5 exact, pp1 = {:.4} within 1e-3 of 0.384, \
         AM-HM held on 10000 random vectors",
        pp1(&rs)
    );
}

#[test]
fn criterion_08_roofline_normalization() {
    let reference = PlatformPeaks {
        platform: "reference".into(),
        p_peak_gflops: 9494.71,
        b_peak_gbs: 1258.40,
        source: PeakSource::Supplied,
    };
    let a_thresh = reference.a_thresh();
    assert!((a_thresh - 7.5450).abs() <= 1e-4, "a_thresh = {a_thresh}");

    let fixed = swe_core::perf::KernelSample {
        kernel: "fluxX".into(),
        calls: 1,
        total_s: 1.0,
        total_flops: reference.p_peak_gflops * 1e9,
        total_bytes: reference.p_peak_gflops * 1e9 / a_thresh,
    };
    let (p_norm, a_norm) = roofline_normalize(&fixed, &reference).unwrap();
    assert_eq!(p_norm, 1.0);
    assert!((a_norm - 1.0).abs() < 1e-15);

    // Feasibility of live kernel samples against empirically probed host
    // peaks: nothing may sit above the roofline by more than 5%.
    let probe = PeakProbeConfig {
        sizes: vec![1 << 20, 1 << 23],
        fma_ladder: vec![64, 256],
        repetitions: 5,
        threads: 1,
        min_measurable_s: 1e-6,
        platform: "host".into(),
    };
    let est = estimate_peaks(&probe, &MonotonicTimer::default()).unwrap();
    let cfg = circular(1024, 1e12);
    let opts = RunOptions {
        max_steps: Some(10),
        ..RunOptions::default()
    };
    let report = run_simulation(&cfg, &opts).unwrap();
    let mut worst = 0.0f64;
    for sample in &report.kernel_samples {
        let (p_norm, a_norm) = roofline_normalize(sample, &est.peaks).unwrap();
        let bound = a_norm.max(1.0) * 1.05;
        assert!(
            p_norm <= bound,
            "{}: p_norm {p_norm:.4} above the roofline bound {bound:.4} \
             (a_norm {a_norm:.4}, host peaks {:.2} GFLOP/s / {:.2} GB/s)",
            sample.kernel,
            est.peaks.p_peak_gflops,
            est.peaks.b_peak_gbs
        );
        worst = worst.max(p_norm / bound);
    }
    println!(
        "PASS criterion 8 (roofline): a_thresh = {a_thresh:.4} within 1e-4 of 7.5450, \
         fixed point exact, all 5 kernels feasible (worst margin {:.0}% of bound) against \
         host peaks {:.2} GFLOP/s / {:.2} GB/s",
        worst * 100.0,
        est.peaks.p_peak_gflops,
        est.peaks.b_peak_gbs
    );
}

#[test]
fn criterion_09_strong_scaling_trend() {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if cores < 8 {
        println!(
            "SKIP criterion 9 (strong scaling): requires an 8-core host, found {cores} core(s); \
             the trend check only binds on its stated hardware"
        );
        return;
    }
    let cfg = circular(2048, 1e12);
    let mut rows = Vec::new();
    for workers in [1usize, 2, 4, 8] {
        let mut times = Vec::new();
        for _ in 0..3 {
            let opts = RunOptions {
                p_x: workers,
                p_y: 1,
                max_steps: Some(20),
                ..RunOptions::default()
            };
            times.push(run_simulation(&cfg, &opts).unwrap().wall_time_s);
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push((workers, times[times.len() / 2]));
    }
    for w in rows.windows(2) {
        assert!(
            w[1].1 <= w[0].1,
            "median time increased from {} to {} workers",
            w[0].0,
            w[1].0
        );
    }
    let speedup = rows[0].1 / rows[3].1;
    assert!(speedup >= 4.0, "speedup at 8 workers = {speedup:.2} < 4.0");
    println!(
        "PASS criterion 9 (strong scaling): speedup at 8 workers = {speedup:.2} >= 4.0, \
         median times monotone nonincreasing"
    );
}

// --- criterion 10: arithmetic-counting oracle -------------------------------
//
// `C` is a counting scalar: every +, -, *, / and sqrt bumps a thread-local
// tally; comparisons, abs, min/max and sign flips are free. The oracle
// functions below re-walk each kernel's arithmetic with `C` and the tally is
// compared against the declared per-cell model.

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

fn reset_flops() {
    FLOPS.with(|f| f.set(0));
}

fn flops() -> u64 {
    FLOPS.with(|f| f.get())
}

fn tick() {
    FLOPS.with(|f| f.set(f.get() + 1));
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct C(f64);

impl Add for C {
    type Output = C;
    fn add(self, o: C) -> C {
        tick();
        C(self.0 + o.0)
    }
}

impl Sub for C {
    type Output = C;
    fn sub(self, o: C) -> C {
        tick();
        C(self.0 - o.0)
    }
}

impl Mul for C {
    type Output = C;
    fn mul(self, o: C) -> C {
        tick();
        C(self.0 * o.0)
    }
}

impl Div for C {
    type Output = C;
    fn div(self, o: C) -> C {
        tick();
        C(self.0 / o.0)
    }
}

impl C {
    fn sqrt(self) -> C {
        tick();
        C(self.0.sqrt())
    }
    fn abs(self) -> C {
        C(self.0.abs())
    }
    fn max(self, o: C) -> C {
        C(self.0.max(o.0))
    }
    fn neg(self) -> C {
        C(-self.0)
    }
}

const H_EPS: f64 = 1e-12;
const C_EPS: f64 = 1e-12;

fn oracle_compute_dt(fields: &FieldSet, spec: &GridSpec, cfl: f64, g: f64) -> u64 {
    reset_flops();
    let mut min_ratio = f64::INFINITY;
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let k = spec.flat_index(i, j);
            let h = fields.h[k];
            if h <= H_EPS {
                continue;
            }
            let h = C(h);
            let c = (C(g) * h).sqrt();
            let u = C(fields.hu[k]) / h;
            let v = C(fields.hv[k]) / h;
            let speed = (u.abs() + c).max(v.abs() + c);
            let ratio = C(spec.dx) / speed;
            min_ratio = min_ratio.min(ratio.0);
        }
    }
    let _ = C(cfl) * C(min_ratio);
    flops()
}

struct OracleEdge {
    h: C,
    q_n: C,
    q_t: C,
    z: C,
}

impl OracleEdge {
    fn vel(&self) -> (C, C) {
        if self.h.0 > H_EPS {
            (self.q_n / self.h, self.q_t / self.h)
        } else {
            (C(0.0), C(0.0))
        }
    }
}

/// Counting mirror of one edge's decomposition + upwinded contributions.
/// Returns None for a degenerate edge.
fn oracle_edge(left: &OracleEdge, right: &OracleEdge, g: f64, entropy_fix: bool) -> Option<([C; 3], [C; 3])> {
    let g = C(g);
    let sl = C(left.h.0.max(0.0)).sqrt();
    let sr = C(right.h.0.max(0.0)).sqrt();
    let (ul_n, ul_t) = left.vel();
    let (ur_n, ur_t) = right.vel();
    let denom = sl + sr;
    let (u_n, u_t) = if denom.0 > 0.0 {
        ((sl * ul_n + sr * ur_n) / denom, (sl * ul_t + sr * ur_t) / denom)
    } else {
        (C(0.0), C(0.0))
    };
    let c = (g * (left.h + right.h) * C(0.5)).sqrt();
    if c.0 < C_EPS {
        return None;
    }

    let dh = right.h - left.h;
    let dq_n = right.q_n - left.q_n;
    let dq_t = right.q_t - left.q_t;
    let dz = right.z - left.z;
    let lambda = [u_n - c, u_n, u_n + c];
    let evec = [
        [C(1.0), u_n - c, u_t],
        [C(0.0), C(0.0), C(1.0)],
        [C(1.0), u_n + c, u_t],
    ];
    let two_c = C(2.0) * c;
    let shear = (dq_n - u_n * dh) / two_c;
    let alpha = [C(0.5) * dh - shear, dq_t - u_t * dh, C(0.5) * dh + shear];
    let h_bar = C(0.5) * (left.h + right.h);
    let b1 = g * h_bar * dz / two_c;
    let beta = [b1, C(0.0), b1.neg()];

    let cl = (g * C(left.h.0.max(0.0))).sqrt();
    let cr = (g * C(right.h.0.max(0.0))).sqrt();
    let (ul, _) = left.vel();
    let (ur, _) = right.vel();
    let sides = [(ul - cl, ur - cr), (C(0.0), C(0.0)), (ul + cl, ur + cr)];

    let minus_fraction = |lambda: C, lam_l: C, lam_r: C, fix: bool| -> C {
        if fix && lam_l.0 < 0.0 && 0.0 < lam_r.0 {
            let hat_minus = lam_l * (lam_r - lambda) / (lam_r - lam_l);
            if lambda.0.abs() > C_EPS {
                C((hat_minus / lambda).0.clamp(0.0, 1.0))
            } else {
                C(0.5)
            }
        } else if lambda.0 < 0.0 {
            C(1.0)
        } else if lambda.0 > 0.0 {
            C(0.0)
        } else {
            C(0.5)
        }
    };

    let mut minus = [C(0.0); 3];
    let mut plus = [C(0.0); 3];
    for m in 0..3 {
        let w = lambda[m] * alpha[m] - beta[m];
        let theta = if m == 1 {
            minus_fraction(lambda[m], C(0.0), C(0.0), false)
        } else {
            minus_fraction(lambda[m], sides[m].0, sides[m].1, entropy_fix)
        };
        for comp in 0..3 {
            let full = w * evec[m][comp];
            let part = theta * full;
            minus[comp] = minus[comp] + part;
            plus[comp] = plus[comp] + (full - part);
        }
    }
    Some((minus, plus))
}

fn oracle_flux_sweep(fields: &FieldSet, spec: &GridSpec, orientation: Orientation, g: f64) -> u64 {
    reset_flops();
    let (n_edges_major, n_minor) = match orientation {
        Orientation::X => (spec.n_x + 1, spec.n_y),
        Orientation::Y => (spec.n_y + 1, spec.n_x),
    };
    let mut sink = C(0.0);
    for minor in 1..=n_minor {
        for e in 0..n_edges_major {
            let ((li, lj), (ri, rj)) = match orientation {
                Orientation::X => ((e, minor), (e + 1, minor)),
                Orientation::Y => ((minor, e), (minor, e + 1)),
            };
            let kl = spec.flat_index(li, lj);
            let kr = spec.flat_index(ri, rj);
            let hl = fields.h[kl];
            let hr = fields.h[kr];
            if hl <= H_EPS && hr <= H_EPS {
                continue;
            }
            let (qn_l, qt_l, qn_r, qt_r) = match orientation {
                Orientation::X => (fields.hu[kl], fields.hv[kl], fields.hu[kr], fields.hv[kr]),
                Orientation::Y => (fields.hv[kl], fields.hu[kl], fields.hv[kr], fields.hu[kr]),
            };
            let left = OracleEdge { h: C(hl), q_n: C(qn_l), q_t: C(qt_l), z: C(fields.z[kl]) };
            let right = OracleEdge { h: C(hr), q_n: C(qn_r), q_t: C(qt_r), z: C(fields.z[kr]) };
            let Some((minus, plus)) = oracle_edge(&left, &right, g, true) else {
                continue;
            };
            // Per-cell accumulator adds (three components each side).
            if spec.is_interior(li, lj) {
                for v in minus {
                    sink = sink + v;
                }
            }
            if spec.is_interior(ri, rj) {
                for v in plus {
                    sink = sink + v;
                }
            }
        }
    }
    flops()
}

fn oracle_new_state(fields: &FieldSet, spec: &GridSpec, acc_x: &EdgeFluxAccumulator, acc_y: &EdgeFluxAccumulator, dt: f64) -> u64 {
    reset_flops();
    let dtdx = C(dt) / C(spec.dx);
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let k = spec.flat_index(i, j);
            let _h = C(fields.h[k]) - dtdx * (C(acc_x.d_h[k]) + C(acc_y.d_h[k]));
            let _hu = C(fields.hu[k]) - dtdx * (C(acc_x.d_hu[k]) + C(acc_y.d_hu[k]));
            let _hv = C(fields.hv[k]) - dtdx * (C(acc_x.d_hv[k]) + C(acc_y.d_hv[k]));
        }
    }
    flops()
}

fn oracle_dt_reduction(fields: &FieldSet, spec: &GridSpec, acc_x: &EdgeFluxAccumulator, acc_y: &EdgeFluxAccumulator, dt: f64, rain: f64) -> u64 {
    reset_flops();
    let dtdx = C(dt) / C(spec.dx);
    let mut worst = 0.0f64;
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let k = spec.flat_index(i, j);
            let h = C(fields.h[k]) - dtdx * (C(acc_x.d_h[k]) + C(acc_y.d_h[k]))
                + C(rain) * C(dt);
            worst = worst.min(h.0);
        }
    }
    flops()
}

#[test]
fn criterion_10_cost_model_fidelity() {
    let cfg = circular(32, 1.0);
    let spec = cfg.grid_spec().unwrap();
    let fields = cfg.initialize(&spec).unwrap();
    let cells = (spec.n_x * spec.n_y) as f64;

    let opts = SolverOptions::default();
    let mut acc_x = EdgeFluxAccumulator::zeros(&spec);
    let mut acc_y = EdgeFluxAccumulator::zeros(&spec);
    accumulate_flux_sweep(&fields, &spec, Orientation::X, G, &opts, &mut acc_x).unwrap();
    accumulate_flux_sweep(&fields, &spec, Orientation::Y, G, &opts, &mut acc_y).unwrap();
    let dt = compute_dt(&fields, &spec, cfg.cfl, G).unwrap();

    let measured = [
        (KernelKind::ComputeDt, oracle_compute_dt(&fields, &spec, cfg.cfl, G)),
        (KernelKind::FluxX, oracle_flux_sweep(&fields, &spec, Orientation::X, G)),
        (KernelKind::FluxY, oracle_flux_sweep(&fields, &spec, Orientation::Y, G)),
        (KernelKind::NewState, oracle_new_state(&fields, &spec, &acc_x, &acc_y, dt)),
        (KernelKind::DtReduction, oracle_dt_reduction(&fields, &spec, &acc_x, &acc_y, dt, 0.0)),
    ];
    assert_eq!(measured.map(|(k, _)| k), KERNELS);

    let mut lines = Vec::new();
    for (kind, count) in measured {
        let per_cell = count as f64 / cells;
        let declared = KernelCostModel::standard(kind).flops_per_cell;
        let rel = ((per_cell - declared) / declared).abs();
        assert!(
            rel <= 0.05,
            "{}: oracle {per_cell:.3} FLOP/cell vs declared {declared} (off by {:.1}%)",
            kind.name(),
            rel * 100.0
        );
        lines.push(format!("{} {per_cell:.2}/{declared}", kind.name()));
    }
    println!(
        "PASS criterion 10 (cost-model fidelity): oracle/declared FLOP per cell within 5%: {}",
        lines.join(", ")
    );
}
