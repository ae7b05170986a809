//! Cartesian rank grid, subdomain extents, reflective boundary conditions
//! and packed halo exchange over an in-process message fabric. Ranks are
//! worker threads connected by ordered channels; the protocol (pack, post
//! sends, receive, unpack) mirrors a distributed halo exchange at desk
//! scale.

use crate::error::{Error, Result};
use crate::grid::{FieldSet, GridSpec};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Arc, Barrier, Mutex};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Down,
    Up,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Down, Side::Up];

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Down => Side::Up,
            Side::Up => Side::Down,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Down => 2,
            Side::Up => 3,
        }
    }
}

/// `P_i = R mod P_x`, `P_j = R div P_x`; bijective over the rank grid.
pub fn rank_to_coords(rank: usize, p_x: usize, p_y: usize) -> Result<(usize, usize)> {
    if rank >= p_x * p_y {
        return Err(Error::Decomposition(format!(
            "rank {rank} out of range for {p_x}x{p_y} grid"
        )));
    }
    Ok((rank % p_x, rank / p_x))
}

pub fn coords_to_rank(coords: (usize, usize), p_x: usize) -> usize {
    coords.1 * p_x + coords.0
}

/// Block partition along one axis: sizes differ by at most one, remainder
/// cells go to the lowest-coordinate ranks. Returns `(local_n, offset)`.
pub fn local_extent_1d(n_global: usize, p: usize, coord: usize) -> Result<(usize, usize)> {
    if p > n_global {
        return Err(Error::Decomposition(format!(
            "more ranks ({p}) than cells ({n_global}) along an axis"
        )));
    }
    let base = n_global / p;
    let rem = n_global % p;
    let local = base + usize::from(coord < rem);
    let offset = coord * base + coord.min(rem);
    Ok((local, offset))
}

/// One rank's placement in the decomposed domain.
#[derive(Debug, Clone)]
pub struct SubdomainLayout {
    pub p_x: usize,
    pub p_y: usize,
    pub rank: usize,
    pub coords: (usize, usize),
    /// Local interior grid (with its own physical origin).
    pub local: GridSpec,
    /// Global interior offset (gi, gj) of this rank's first interior cell.
    pub global_offset: (usize, usize),
    pub neighbors: [Option<usize>; 4],
}

impl SubdomainLayout {
    pub fn build(global: &GridSpec, p_x: usize, p_y: usize, rank: usize) -> Result<Self> {
        if p_x == 0 || p_y == 0 {
            return Err(Error::Decomposition("process grid dims must be >= 1".into()));
        }
        let coords = rank_to_coords(rank, p_x, p_y)?;
        let (ln_x, gi) = local_extent_1d(global.n_x, p_x, coords.0)?;
        let (ln_y, gj) = local_extent_1d(global.n_y, p_y, coords.1)?;
        let origin = (
            global.origin.0 + gi as f64 * global.dx,
            global.origin.1 + gj as f64 * global.dx,
        );
        let local = GridSpec::new(ln_x, ln_y, global.dx, origin)?;
        let mut neighbors = [None; 4];
        if coords.0 > 0 {
            neighbors[Side::Left.tag() as usize] = Some(coords_to_rank((coords.0 - 1, coords.1), p_x));
        }
        if coords.0 + 1 < p_x {
            neighbors[Side::Right.tag() as usize] = Some(coords_to_rank((coords.0 + 1, coords.1), p_x));
        }
        if coords.1 > 0 {
            neighbors[Side::Down.tag() as usize] = Some(coords_to_rank((coords.0, coords.1 - 1), p_x));
        }
        if coords.1 + 1 < p_y {
            neighbors[Side::Up.tag() as usize] = Some(coords_to_rank((coords.0, coords.1 + 1), p_x));
        }
        Ok(Self {
            p_x,
            p_y,
            rank,
            coords,
            local,
            global_offset: (gi, gj),
            neighbors,
        })
    }

    pub fn neighbor(&self, side: Side) -> Option<usize> {
        self.neighbors[side.tag() as usize]
    }
}

/// Packed halo payload: `[h-slab, hu-slab, hv-slab]`, each slab one edge
/// length, ordering fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloBuffer {
    pub side: Side,
    pub payload: Vec<f64>,
}

fn edge_len(spec: &GridSpec, side: Side) -> usize {
    match side {
        Side::Left | Side::Right => spec.n_y,
        Side::Down | Side::Up => spec.n_x,
    }
}

/// Padded coordinates of the interior boundary strip on `side`.
fn strip_cells(spec: &GridSpec, side: Side, halo: bool) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (fixed_i, fixed_j): (Option<usize>, Option<usize>) = match (side, halo) {
        (Side::Left, false) => (Some(1), None),
        (Side::Left, true) => (Some(0), None),
        (Side::Right, false) => (Some(spec.n_x), None),
        (Side::Right, true) => (Some(spec.n_x + 1), None),
        (Side::Down, false) => (None, Some(1)),
        (Side::Down, true) => (None, Some(0)),
        (Side::Up, false) => (None, Some(spec.n_y)),
        (Side::Up, true) => (None, Some(spec.n_y + 1)),
    };
    let len = edge_len(spec, side);
    (1..=len).map(move |t| match (fixed_i, fixed_j) {
        (Some(i), None) => (i, t),
        (None, Some(j)) => (t, j),
        _ => unreachable!(),
    })
}

/// Copy the one-cell-deep interior boundary strip into a packed buffer.
pub fn pack_halo(fields: &FieldSet, spec: &GridSpec, side: Side) -> HaloBuffer {
    let len = edge_len(spec, side);
    let mut payload = Vec::with_capacity(3 * len);
    for arr in [&fields.h, &fields.hu, &fields.hv] {
        for (i, j) in strip_cells(spec, side, false) {
            payload.push(arr[spec.flat_index(i, j)]);
        }
    }
    HaloBuffer { side, payload }
}

/// Write a received buffer into the halo strip on `side`.
pub fn unpack_halo(fields: &mut FieldSet, spec: &GridSpec, side: Side, buf: &HaloBuffer) -> Result<()> {
    let len = edge_len(spec, side);
    if buf.payload.len() != 3 * len {
        return Err(Error::Decomposition(format!(
            "halo length mismatch: got {}, expected {}",
            buf.payload.len(),
            3 * len
        )));
    }
    for (slab, arr) in [&mut fields.h, &mut fields.hu, &mut fields.hv].into_iter().enumerate() {
        for (t, (i, j)) in strip_cells(spec, side, true).enumerate() {
            arr[spec.flat_index(i, j)] = buf.payload[slab * len + t];
        }
    }
    Ok(())
}

/// Reflective wall on sides without a neighbor: halo h and z mirror the
/// adjacent interior cell, the wall-normal unit discharge is negated, the
/// tangential one copied.
pub fn apply_reflective_bc(fields: &mut FieldSet, spec: &GridSpec, layout: &SubdomainLayout) {
    for side in SIDES {
        if layout.neighbor(side).is_some() {
            continue;
        }
        let interior: Vec<(usize, usize)> = strip_cells(spec, side, false).collect();
        let halo: Vec<(usize, usize)> = strip_cells(spec, side, true).collect();
        let normal_is_x = matches!(side, Side::Left | Side::Right);
        for (&(ii, ij), &(hi, hj)) in interior.iter().zip(halo.iter()) {
            let ki = spec.flat_index(ii, ij);
            let kh = spec.flat_index(hi, hj);
            fields.h[kh] = fields.h[ki];
            fields.z[kh] = fields.z[ki];
            if normal_is_x {
                fields.hu[kh] = -fields.hu[ki];
                fields.hv[kh] = fields.hv[ki];
            } else {
                fields.hu[kh] = fields.hu[ki];
                fields.hv[kh] = -fields.hv[ki];
            }
        }
    }
}

/// Message kinds moved over the fabric.
#[derive(Debug)]
pub enum Message {
    Halo(HaloBuffer),
    Scalar(f64),
    Block(Vec<f64>),
}

impl Message {
    fn byte_len(&self) -> u64 {
        match self {
            Message::Halo(b) => (b.payload.len() * 8) as u64,
            Message::Scalar(_) => 8,
            Message::Block(v) => (v.len() * 8) as u64,
        }
    }
}

/// Aggregate traffic counters for one run.
#[derive(Debug, Default)]
pub struct FabricStats {
    pub messages: AtomicU64,
    pub bytes: AtomicU64,
}

impl FabricStats {
    pub fn snapshot(&self) -> (u64, u64) {
        (self.messages.load(Ordering::Relaxed), self.bytes.load(Ordering::Relaxed))
    }
}

/// One rank's endpoint of the in-process fabric: an ordered channel per
/// peer pair plus a start/stop barrier shared by all ranks.
pub struct RankFabric {
    pub rank: usize,
    pub n_ranks: usize,
    senders: Vec<Sender<Message>>,
    receivers: Vec<Mutex<Receiver<Message>>>,
    barrier: Arc<Barrier>,
    stats: Arc<FabricStats>,
    timeout: Duration,
}

impl RankFabric {
    /// Build fully connected endpoints for `n_ranks` ranks.
    pub fn fully_connected(n_ranks: usize, timeout: Duration) -> Vec<RankFabric> {
        let stats = Arc::new(FabricStats::default());
        let barrier = Arc::new(Barrier::new(n_ranks));
        // senders[src][dst], receivers[dst][src]
        let mut sender_rows: Vec<Vec<Sender<Message>>> = (0..n_ranks).map(|_| Vec::new()).collect();
        let mut receiver_rows: Vec<Vec<Mutex<Receiver<Message>>>> =
            (0..n_ranks).map(|_| Vec::new()).collect();
        // src-major fill order leaves receiver_rows[dst] indexed by src.
        for src in 0..n_ranks {
            for dst in 0..n_ranks {
                let (tx, rx) = std::sync::mpsc::channel();
                sender_rows[src].push(tx);
                receiver_rows[dst].push(Mutex::new(rx));
            }
        }
        let mut out = Vec::with_capacity(n_ranks);
        for (rank, receivers) in receiver_rows.into_iter().enumerate() {
            out.push(RankFabric {
                rank,
                n_ranks,
                senders: sender_rows[rank].clone(),
                receivers,
                barrier: barrier.clone(),
                stats: stats.clone(),
                timeout,
            });
        }
        out
    }

    pub fn stats(&self) -> Arc<FabricStats> {
        self.stats.clone()
    }

    pub fn barrier_wait(&self) {
        self.barrier.wait();
    }

    pub fn send(&self, dst: usize, msg: Message) {
        self.stats.messages.fetch_add(1, Ordering::Relaxed);
        self.stats.bytes.fetch_add(msg.byte_len(), Ordering::Relaxed);
        // A disconnected peer shows up as a timeout on the other side.
        let _ = self.senders[dst].send(msg);
    }

    pub fn recv_from(&self, src: usize) -> Result<Message> {
        self.receivers[src]
            .lock()
            .expect("fabric receiver poisoned")
            .recv_timeout(self.timeout)
            .map_err(|_| Error::ExchangeTimeout {
                from: src,
                to: self.rank,
            })
    }

    /// Exact global min: gather to rank 0 in rank order, broadcast back.
    pub fn allreduce_min(&self, value: f64) -> Result<f64> {
        if self.n_ranks == 1 {
            return Ok(value);
        }
        if self.rank == 0 {
            let mut m = value;
            for src in 1..self.n_ranks {
                match self.recv_from(src)? {
                    Message::Scalar(v) => m = m.min(v),
                    other => {
                        return Err(Error::Decomposition(format!(
                            "unexpected message in min reduction: {other:?}"
                        )))
                    }
                }
            }
            for dst in 1..self.n_ranks {
                self.send(dst, Message::Scalar(m));
            }
            Ok(m)
        } else {
            self.send(0, Message::Scalar(value));
            match self.recv_from(0)? {
                Message::Scalar(v) => Ok(v),
                other => Err(Error::Decomposition(format!(
                    "unexpected message in min broadcast: {other:?}"
                ))),
            }
        }
    }

    /// Rank-ordered global sum on rank 0 (deterministic addition order);
    /// every rank receives the result.
    pub fn allreduce_sum_ordered(&self, value: f64) -> Result<f64> {
        if self.n_ranks == 1 {
            return Ok(value);
        }
        if self.rank == 0 {
            let mut s = value;
            for src in 1..self.n_ranks {
                match self.recv_from(src)? {
                    Message::Scalar(v) => s += v,
                    other => {
                        return Err(Error::Decomposition(format!(
                            "unexpected message in sum reduction: {other:?}"
                        )))
                    }
                }
            }
            for dst in 1..self.n_ranks {
                self.send(dst, Message::Scalar(s));
            }
            Ok(s)
        } else {
            self.send(0, Message::Scalar(value));
            match self.recv_from(0)? {
                Message::Scalar(v) => Ok(v),
                other => Err(Error::Decomposition(format!(
                    "unexpected message in sum broadcast: {other:?}"
                ))),
            }
        }
    }
}

/// Post all sends, then receive and unpack from every neighbor, fixed side
/// order. Channels are buffered, so the post-all-then-wait contract cannot
/// deadlock for any rank grid.
pub fn exchange_halos(
    fields: &mut FieldSet,
    spec: &GridSpec,
    layout: &SubdomainLayout,
    fabric: &RankFabric,
) -> Result<()> {
    for side in SIDES {
        if let Some(dst) = layout.neighbor(side) {
            let buf = pack_halo(fields, spec, side);
            fabric.send(dst, Message::Halo(buf));
        }
    }
    for side in SIDES {
        if let Some(src) = layout.neighbor(side) {
            match fabric.recv_from(src)? {
                Message::Halo(buf) => {
                    if buf.side != side.opposite() {
                        return Err(Error::Decomposition(format!(
                            "halo side mismatch from rank {src}: got {:?}, expected {:?}",
                            buf.side,
                            side.opposite()
                        )));
                    }
                    let relabeled = HaloBuffer {
                        side,
                        payload: buf.payload,
                    };
                    unpack_halo(fields, spec, side, &relabeled)?;
                }
                other => {
                    return Err(Error::Decomposition(format!(
                        "unexpected message during halo exchange: {other:?}"
                    )))
                }
            }
        }
    }
    Ok(())
}
