//! Simulation driver: the rank-parallel step loop in its fixed phase
//! order, kernel timing, mass auditing, snapshot output, and the 1D
//! dam-break convergence oracle.

use crate::decomposition::{
    apply_reflective_bc, exchange_halos, Message, RankFabric, SubdomainLayout,
};
use crate::error::{Error, Result};
use crate::grid::{write_snapshot, FieldSet, GridSpec, ScenarioConfig, ScenarioKind};
use crate::perf::{KernelCostModel, KernelKind, KernelSample, KERNELS};
use crate::riemann::{accumulate_flux_sweep, EdgeFluxAccumulator, Orientation, SolverOptions};
use crate::stoker::StokerSolution;
use crate::timestepping::{
    compute_dt, compute_new_state, compute_time_step_reduction, UpdateOutcome,
    DEFAULT_MAX_REDUCTIONS,
};
use serde::Serialize;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Phase sequence executed on every step, in order. The snapshot phase
/// always runs; emission within it is conditional on the output cadence.
pub const STEP_PHASES: [&str; 9] = [
    "computeDt",
    "fluxX",
    "fluxY",
    "dtReduction",
    "newState",
    "reflectiveBC",
    "exchangeHalos",
    "boundaryAccounting",
    "snapshot",
];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub p_x: usize,
    pub p_y: usize,
    /// Snapshot cadence in simulated seconds; `None` writes only the final
    /// snapshot (when an output directory is set), keeping the timed loop
    /// free of I/O.
    pub t_io: Option<f64>,
    pub max_steps: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub solver: SolverOptions,
    pub max_reductions: u32,
    pub exchange_timeout: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            p_x: 1,
            p_y: 1,
            t_io: None,
            max_steps: None,
            output_dir: None,
            solver: SolverOptions::default(),
            max_reductions: DEFAULT_MAX_REDUCTIONS,
            exchange_timeout: Duration::from_secs(60),
        }
    }
}

/// One row of the running mass ledger. `boundary_inflow` is the volume
/// change not explained by the rain source; reflective walls admit none.
#[derive(Debug, Clone, Serialize)]
pub struct MassAuditEntry {
    pub step: u64,
    pub t: f64,
    pub volume: f64,
    pub boundary_inflow: f64,
}

#[derive(Debug)]
pub struct RunReport {
    pub steps: u64,
    pub t_final: f64,
    /// Simulation loop time only; initialization and output writing are
    /// excluded.
    pub wall_time_s: f64,
    pub kernel_samples: Vec<KernelSample>,
    pub mass_audit: Vec<MassAuditEntry>,
    pub snapshot_paths: Vec<PathBuf>,
    /// Accepted global dt per step.
    pub dt_trail: Vec<f64>,
    /// Kernel/phase invocation sequence per step, recorded on rank 0.
    pub phase_trace: Vec<Vec<&'static str>>,
    pub spec: GridSpec,
    /// Final global fields (interior cells; halos zeroed).
    pub fields: FieldSet,
    pub fabric_messages: u64,
    pub fabric_bytes: u64,
}

impl RunReport {
    /// CLI-facing run summary.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct KernelOut<'a> {
            kernel: &'a str,
            calls: u64,
            total_s: f64,
            flops: f64,
            bytes: f64,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            steps: u64,
            t_final: f64,
            wall_time_s: f64,
            kernels: Vec<KernelOut<'a>>,
        }
        let summary = Summary {
            steps: self.steps,
            t_final: self.t_final,
            wall_time_s: self.wall_time_s,
            kernels: self
                .kernel_samples
                .iter()
                .map(|s| KernelOut {
                    kernel: &s.kernel,
                    calls: s.calls,
                    total_s: s.total_s,
                    flops: s.total_flops,
                    bytes: s.total_bytes,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }
}

struct KernelClock {
    model: KernelCostModel,
    calls: u64,
    total_s: f64,
}

impl KernelClock {
    fn sample(&self, global_cells: f64) -> KernelSample {
        KernelSample {
            kernel: self.model.kind.name().to_string(),
            calls: self.calls,
            total_s: self.total_s,
            total_flops: self.model.flops_per_cell * global_cells * self.calls as f64,
            total_bytes: self.model.bytes_per_cell * global_cells * self.calls as f64,
        }
    }
}

/// Copy the global padded arrays into one rank's local padded arrays. The
/// local cell (li, lj) maps to the global padded cell
/// (gi + li, gj + lj), which covers interior, neighbor-interior halo, and
/// physical-boundary halo cells alike, so no initial exchange is needed.
fn scatter_local(global: &GridSpec, fields: &FieldSet, layout: &SubdomainLayout) -> FieldSet {
    let local = &layout.local;
    let (gi, gj) = layout.global_offset;
    let mut out = FieldSet::zeros(local);
    for lj in 0..local.padded_y() {
        for li in 0..local.padded_x() {
            let kl = local.flat_index(li, lj);
            let kg = global.flat_index(gi + li, gj + lj);
            out.h[kl] = fields.h[kg];
            out.hu[kl] = fields.hu[kg];
            out.hv[kl] = fields.hv[kg];
            out.z[kl] = fields.z[kg];
        }
    }
    out
}

/// Gather every rank's interior block onto rank 0 in rank order. Non-zero
/// ranks send and return `None`; rank 0 assembles the global field set
/// with halos zeroed.
fn gather_global(
    fields: &FieldSet,
    layout: &SubdomainLayout,
    fabric: &RankFabric,
    global: &GridSpec,
) -> Result<Option<FieldSet>> {
    let local = &layout.local;
    let n_ranks = layout.p_x * layout.p_y;
    if layout.rank != 0 {
        let n = local.n_x * local.n_y;
        let mut payload = Vec::with_capacity(4 * n);
        for field in [&fields.h, &fields.hu, &fields.hv, &fields.z] {
            for j in 1..=local.n_y {
                for i in 1..=local.n_x {
                    payload.push(field[local.flat_index(i, j)]);
                }
            }
        }
        fabric.send(0, Message::Block(payload));
        return Ok(None);
    }
    let mut out = FieldSet::zeros(global);
    let place = |out: &mut FieldSet, lay: &SubdomainLayout, data: &[f64]| {
        let n = lay.local.n_x * lay.local.n_y;
        for (f, chunk) in [0usize, 1, 2, 3].iter().zip(data.chunks_exact(n)) {
            let dst: &mut [f64] = match f {
                0 => &mut out.h,
                1 => &mut out.hu,
                2 => &mut out.hv,
                _ => &mut out.z,
            };
            let mut idx = 0;
            for j in 1..=lay.local.n_y {
                for i in 1..=lay.local.n_x {
                    let gi = lay.global_offset.0 + i;
                    let gj = lay.global_offset.1 + j;
                    dst[global.flat_index(gi, gj)] = chunk[idx];
                    idx += 1;
                }
            }
        }
    };
    // Rank 0's own block, copied directly.
    let n0 = local.n_x * local.n_y;
    let mut own = Vec::with_capacity(4 * n0);
    for field in [&fields.h, &fields.hu, &fields.hv, &fields.z] {
        for j in 1..=local.n_y {
            for i in 1..=local.n_x {
                own.push(field[local.flat_index(i, j)]);
            }
        }
    }
    place(&mut out, layout, &own);
    for r in 1..n_ranks {
        let lay = SubdomainLayout::build(global, layout.p_x, layout.p_y, r)?;
        match fabric.recv_from(r)? {
            Message::Block(data) => place(&mut out, &lay, &data),
            other => {
                return Err(Error::Decomposition(format!(
                    "unexpected message during gather: {other:?}"
                )))
            }
        }
    }
    Ok(Some(out))
}

struct RankZeroOutput {
    steps: u64,
    t_final: f64,
    wall_time_s: f64,
    kernel_samples: Vec<KernelSample>,
    mass_audit: Vec<MassAuditEntry>,
    snapshot_paths: Vec<PathBuf>,
    dt_trail: Vec<f64>,
    phase_trace: Vec<Vec<&'static str>>,
    fields: FieldSet,
}

/// Run the scenario to `t_end` on a `p_x * p_y` rank grid, one worker
/// thread per rank. Each step executes the phases of [`STEP_PHASES`] in
/// order:
/// computeDt + global min, x sweep, y sweep, trial update + dt reduction
/// with a global min and the wet-dry halo exchange, state update,
/// reflective boundaries, state halo exchange, boundary mass accounting,
/// and the (conditional) snapshot.
pub fn run_simulation(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let global_spec = cfg.grid_spec()?;
    let global_fields = Arc::new(cfg.initialize(&global_spec)?);
    let n_ranks = opts.p_x * opts.p_y;
    if n_ranks == 0 {
        return Err(Error::Decomposition("rank grid must be non-empty".into()));
    }
    if let Some(dir) = &opts.output_dir {
        std::fs::create_dir_all(dir)?;
    }

    let fabrics = RankFabric::fully_connected(n_ranks, opts.exchange_timeout);
    let stats = fabrics[0].stats();
    let mut rank_zero: Option<RankZeroOutput> = None;

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for (rank, fabric) in fabrics.into_iter().enumerate() {
            let global_fields = Arc::clone(&global_fields);
            let global_spec = global_spec.clone();
            handles.push(scope.spawn(move || {
                rank_worker(cfg, opts, &global_spec, &global_fields, rank, fabric)
            }));
        }
        for handle in handles {
            let out = handle
                .join()
                .map_err(|_| Error::Decomposition("rank worker panicked".into()))??;
            if let Some(out) = out {
                rank_zero = Some(out);
            }
        }
        Ok(())
    })?;

    let out = rank_zero.expect("rank 0 reports");
    let (messages, bytes) = stats.snapshot();
    Ok(RunReport {
        steps: out.steps,
        t_final: out.t_final,
        wall_time_s: out.wall_time_s,
        kernel_samples: out.kernel_samples,
        mass_audit: out.mass_audit,
        snapshot_paths: out.snapshot_paths,
        dt_trail: out.dt_trail,
        phase_trace: out.phase_trace,
        spec: global_spec,
        fields: out.fields,
        fabric_messages: messages,
        fabric_bytes: bytes,
    })
}

fn rank_worker(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
    global_spec: &GridSpec,
    global_fields: &FieldSet,
    rank: usize,
    fabric: RankFabric,
) -> Result<Option<RankZeroOutput>> {
    let layout = SubdomainLayout::build(global_spec, opts.p_x, opts.p_y, rank)?;
    let local = layout.local.clone();
    let mut fields = scatter_local(global_spec, global_fields, &layout);
    apply_reflective_bc(&mut fields, &local, &layout);

    let mut acc_x = EdgeFluxAccumulator::zeros(&local);
    let mut acc_y = EdgeFluxAccumulator::zeros(&local);
    let mut clocks: Vec<KernelClock> = KERNELS
        .iter()
        .map(|&k| KernelClock {
            model: KernelCostModel::standard(k),
            calls: 0,
            total_s: 0.0,
        })
        .collect();
    let clock_of = |kind: KernelKind| -> usize {
        KERNELS.iter().position(|&k| k == kind).expect("known kernel")
    };

    let is_root = rank == 0;
    let global_cells = (global_spec.n_x * global_spec.n_y) as f64;
    let area = global_cells * global_spec.dx * global_spec.dx;
    let t_end = cfg.t_end;
    let max_steps = opts.max_steps.unwrap_or(u64::MAX);
    let mut t = 0.0f64;
    let mut steps = 0u64;
    let mut volume = fabric.allreduce_sum_ordered(fields.total_volume(&local))?;
    let mut mass_audit = vec![MassAuditEntry {
        step: 0,
        t: 0.0,
        volume,
        boundary_inflow: 0.0,
    }];
    let mut dt_trail = Vec::new();
    let mut phase_trace = Vec::new();
    let mut snapshot_paths = Vec::new();
    let mut io_time = 0.0f64;

    let loop_start = Instant::now();
    while t < t_end * (1.0 - 1e-12) && steps < max_steps {
        let step = steps + 1;
        let mut phases = Vec::with_capacity(STEP_PHASES.len());

        // Phase 1: CFL timestep, global minimum.
        fabric.barrier_wait();
        let t0 = Instant::now();
        let dt_local = compute_dt(&fields, &local, cfg.cfl, cfg.g)?;
        fabric.barrier_wait();
        let k = clock_of(KernelKind::ComputeDt);
        clocks[k].calls += 1;
        clocks[k].total_s += t0.elapsed().as_secs_f64();
        let mut dt = fabric.allreduce_min(dt_local)?;
        dt = dt.min(t_end - t);
        phases.push("computeDt");

        // Phases 2-3: directional flux sweeps.
        for (orientation, kind, acc) in [
            (Orientation::X, KernelKind::FluxX, &mut acc_x),
            (Orientation::Y, KernelKind::FluxY, &mut acc_y),
        ] {
            fabric.barrier_wait();
            let t0 = Instant::now();
            acc.reset();
            accumulate_flux_sweep(&fields, &local, orientation, cfg.g, &opts.solver, acc)?;
            fabric.barrier_wait();
            let k = clock_of(kind);
            clocks[k].calls += 1;
            clocks[k].total_s += t0.elapsed().as_secs_f64();
            phases.push(kind.name());
        }

        // Phase 4: positivity reduction (global min) + wet-dry exchange.
        fabric.barrier_wait();
        let t0 = Instant::now();
        let (dt_reduced, _k_applied) = compute_time_step_reduction(
            &fields,
            &local,
            &acc_x,
            &acc_y,
            dt,
            cfg.rain_rate,
            opts.max_reductions,
            step,
        )?;
        fabric.barrier_wait();
        let k = clock_of(KernelKind::DtReduction);
        clocks[k].calls += 1;
        clocks[k].total_s += t0.elapsed().as_secs_f64();
        let dt = fabric.allreduce_min(dt_reduced)?;
        exchange_halos(&mut fields, &local, &layout, &fabric)?;
        phases.push("dtReduction");

        // Phase 5: state update with the settled dt.
        fabric.barrier_wait();
        let t0 = Instant::now();
        let outcome = compute_new_state(
            &fields,
            &local,
            &acc_x,
            &acc_y,
            dt,
            cfg.rain_rate,
            cfg.manning_n,
            cfg.g,
        );
        fabric.barrier_wait();
        let k = clock_of(KernelKind::NewState);
        clocks[k].calls += 1;
        clocks[k].total_s += t0.elapsed().as_secs_f64();
        match outcome {
            UpdateOutcome::Accepted(new) => fields = new,
            UpdateOutcome::NeedsReduction { i, j, h } => {
                return Err(Error::ReductionExceeded {
                    step,
                    max_reductions: opts.max_reductions,
                    i: layout.global_offset.0 + i,
                    j: layout.global_offset.1 + j,
                    h,
                })
            }
        }
        phases.push("newState");

        // Phase 6: reflective boundaries on physical walls.
        apply_reflective_bc(&mut fields, &local, &layout);
        phases.push("reflectiveBC");

        // Phase 7: state continuity exchange.
        exchange_halos(&mut fields, &local, &layout, &fabric)?;
        phases.push("exchangeHalos");

        // Phase 8: boundary mass ledger. Reflective walls admit no volume;
        // any change beyond the rain source is recorded as inflow.
        let new_volume = fabric.allreduce_sum_ordered(fields.total_volume(&local))?;
        let expected = volume + cfg.rain_rate * dt * area;
        let inflow = new_volume - expected;
        volume = new_volume;
        t += dt;
        steps = step;
        if is_root {
            mass_audit.push(MassAuditEntry {
                step,
                t,
                volume,
                boundary_inflow: inflow,
            });
            dt_trail.push(dt);
        }
        phases.push("boundaryAccounting");

        // Phase 9: snapshot at t_io multiples; emission is conditional but
        // the phase always runs and never counts toward wall time.
        let emit = match (opts.output_dir.as_ref(), opts.t_io) {
            (Some(_), Some(t_io)) => ((t / t_io).floor() - ((t - dt) / t_io).floor()) >= 1.0,
            _ => false,
        };
        if emit {
            let t0 = Instant::now();
            let gathered = gather_global(&fields, &layout, &fabric, global_spec)?;
            if let (Some(gathered), Some(dir)) = (gathered, opts.output_dir.as_ref()) {
                let path = dir.join(format!("snap_{step:06}.bin"));
                write_snapshot(&path, global_spec, &gathered)?;
                snapshot_paths.push(path);
            }
            io_time += t0.elapsed().as_secs_f64();
        }
        phases.push("snapshot");
        if is_root {
            phase_trace.push(phases);
        }
    }
    let wall_time_s = loop_start.elapsed().as_secs_f64() - io_time;

    if steps == 0 {
        return Err(Error::InvalidScenario(
            "simulation ended before the first step; t_end too small".into(),
        ));
    }

    // Final snapshot and gather sit outside the timed loop.
    let gathered = gather_global(&fields, &layout, &fabric, global_spec)?;
    if !is_root {
        return Ok(None);
    }
    let gathered = gathered.expect("rank 0 gathers");
    if let Some(dir) = opts.output_dir.as_ref() {
        let path = dir.join("final.bin");
        write_snapshot(&path, global_spec, &gathered)?;
        snapshot_paths.push(path);
    }
    Ok(Some(RankZeroOutput {
        steps,
        t_final: t,
        wall_time_s,
        kernel_samples: clocks.iter().map(|c| c.sample(global_cells)).collect(),
        mass_audit,
        snapshot_paths,
        dt_trail,
        phase_trace,
        fields: gathered,
    }))
}

/// One resolution of the 1D dam-break convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n_cells: usize,
    pub dx: f64,
    pub l1_error: f64,
    pub shock_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// L1 errors strictly decreasing with resolution.
    pub monotone: bool,
    /// Mean observed order over consecutive refinements.
    pub observed_order: f64,
}

/// Channel length of the 1D dam-break validation domain [m]; the dam sits
/// at x = 0.
pub const DAMBREAK_DOMAIN_M: f64 = 100.0;
pub const DAMBREAK_H_LEFT: f64 = 4.0;
pub const DAMBREAK_H_RIGHT: f64 = 1.0;

/// Run the 1D wet-bed dam break at each resolution and score the depth
/// field against the analytical solution: L1(h) error and shock-position
/// error at `t_end`.
pub fn run_dambreak_1d(resolutions: &[usize], t_end: f64) -> Result<ConvergenceTable> {
    if resolutions.len() < 3 {
        return Err(Error::Validation(
            "convergence study needs at least 3 resolutions".into(),
        ));
    }
    let g = 9.81;
    let exact = StokerSolution::new(DAMBREAK_H_LEFT, DAMBREAK_H_RIGHT, g)?;
    let mut rows = Vec::new();
    for &n in resolutions {
        let dx = DAMBREAK_DOMAIN_M / n as f64;
        let cfg = ScenarioConfig {
            kind: ScenarioKind::Dambreak1d,
            n_side: n,
            dx,
            t_end,
            ..ScenarioConfig::default()
        };
        let report = run_simulation(&cfg, &RunOptions::default())?;
        let spec = &report.spec;
        let tf = report.t_final;
        let mut l1 = 0.0;
        for i in 1..=spec.n_x {
            let (x, _) = spec.cell_center(i, 1);
            let h = report.fields.h[spec.flat_index(i, 1)];
            l1 += (h - exact.depth(x, tf)).abs();
        }
        l1 *= dx;
        // Shock front: rightmost crossing of the mid-depth level, scanned
        // from the right wall.
        let h_mid_level = 0.5 * (exact.h_mid + DAMBREAK_H_RIGHT);
        let mut shock_x = spec.origin.0;
        for i in (1..=spec.n_x).rev() {
            if report.fields.h[spec.flat_index(i, 1)] > h_mid_level {
                shock_x = spec.cell_center(i, 1).0;
                break;
            }
        }
        rows.push(ConvergenceRow {
            n_cells: n,
            dx,
            l1_error: l1,
            shock_error: (shock_x - exact.shock_position(tf)).abs(),
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].l1_error < w[0].l1_error);
    let orders: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            let ratio = w[0].l1_error / w[1].l1_error;
            let refine = w[1].n_cells as f64 / w[0].n_cells as f64;
            ratio.ln() / refine.ln()
        })
        .collect();
    let observed_order = orders.iter().sum::<f64>() / orders.len() as f64;
    Ok(ConvergenceTable {
        rows,
        monotone,
        observed_order,
    })
}
