//! Point navigation in the configuration-space raster.
//!
//! [`bug1`] is a cell-level Bug1: move along a digital straight line toward
//! the target, and on contact turn left and walk the whole obstacle
//! boundary (obstacle on the right hand) until the hit point comes around
//! again, then go back along the boundary to the boundary cell nearest the
//! target and leave from there. Free space is 8-connected and obstacles are
//! 4-connected, so boundary walking is crack following: each state is a
//! free cell plus a heading with the obstacle cell on its right.
//!
//! The torus adds one wrinkle. A virtual obstacle can wrap around the
//! square (a band), and then the component-wise shortest line toward the
//! target may be blocked even though the target is reachable the other way
//! round. When a leave point offers no progress, the walker retargets a
//! different lift of the target (the other winding classes of the straight
//! line, nearest first) and carries on from where it stands. Boundaries
//! already walked are remembered and never walked in full twice.
//!
//! [`bfs_shortest`] is the independent oracle: a breadth-first search over
//! the 8-connected free cells where a diagonal hop counts as two unit
//! half-steps, so it returns a path of minimal joint-space L1 length.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cspace::{CSpaceRaster, Cell};
use crate::geometry::{torus_l1, Configuration};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("start configuration lies in an occupied cell")]
    StartBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathStatus {
    Reached,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub status: PathStatus,
    pub waypoints: Vec<Configuration>,
    /// Sum of `|Δθ1| + |Δθ2|` over consecutive waypoints, radians.
    pub length: f64,
}

impl PathResult {
    pub fn reached(&self) -> bool {
        self.status == PathStatus::Reached
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Bug1Trace {
    pub hit_points: Vec<Configuration>,
    pub leave_points: Vec<Configuration>,
    /// Length (radians) of each full boundary walk, in the order walked.
    pub circumnavigations: Vec<f64>,
}

type Pos = (i64, i64);

const DIRS: [Pos; 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

fn left(d: Pos) -> Pos {
    (-d.1, d.0)
}

fn right(d: Pos) -> Pos {
    (d.1, -d.0)
}

fn add(a: Pos, b: Pos) -> Pos {
    (a.0 + b.0, a.1 + b.1)
}

fn sub(a: Pos, b: Pos) -> Pos {
    (a.0 - b.0, a.1 - b.1)
}

fn l1(a: Pos, b: Pos) -> u64 {
    (a.0 - b.0).unsigned_abs() + (a.1 - b.1).unsigned_abs()
}

fn dir_index(d: Pos) -> u8 {
    DIRS.iter().position(|&x| x == d).expect("unit direction") as u8
}

/// Crack state on the torus: free cell and heading, obstacle on the right.
type Crack = (Cell, u8);

/// One closed boundary walk. Offsets are cover-space displacements of the
/// walker relative to state 0; `offsets[m]` is the shift picked up after a
/// full turn (non-zero for boundaries that wrap around the torus).
struct BoundaryLoop {
    states: Vec<Crack>,
    offsets: Vec<Pos>,
    /// Cumulative L1 walking cost in cell units.
    cost: Vec<u64>,
}

impl BoundaryLoop {
    fn len(&self) -> usize {
        self.states.len()
    }

    fn shift(&self) -> Pos {
        self.offsets[self.len()]
    }
}

/// One step of crack following from `(free, heading)`.
/// Returns the new free cell (cover coordinates) and heading.
fn follow_step(raster: &CSpaceRaster, free: Pos, d: Pos) -> (Pos, Pos) {
    let r = right(d);
    let ahead_left = add(free, d);
    let ahead_right = add(ahead_left, r);
    if !raster.is_occupied_wrapped(ahead_right.0, ahead_right.1) {
        (ahead_right, r)
    } else if !raster.is_occupied_wrapped(ahead_left.0, ahead_left.1) {
        (ahead_left, d)
    } else {
        (free, left(d))
    }
}

fn step_cost(a: Pos, b: Pos) -> u64 {
    l1(a, b)
}

fn dot(a: Pos, b: Pos) -> i64 {
    a.0 * b.0 + a.1 * b.1
}

fn cross(a: Pos, b: Pos) -> i64 {
    a.0 * b.1 - a.1 * b.0
}

struct Walker<'a> {
    raster: &'a CSpaceRaster,
    pos: Pos,
    cells: Vec<Cell>,
    target: Cell,
    loops: Vec<BoundaryLoop>,
    index: HashMap<Crack, (usize, usize)>,
    /// Lifts of the target cell in cover coordinates.
    lifts: Vec<Pos>,
    /// Lifts known to be cut off from the walker.
    cut_off: Vec<bool>,
    trace: Bug1Trace,
}

enum Attempt {
    Reached,
    /// This lift is out of reach.
    Failed,
    /// The target cell itself is occupied.
    Blocked,
}

/// Winding number of the closed lattice polygon `poly` around `p`, or
/// `None` when `p` is one of its vertices. Edges are unit or diagonal
/// steps, so no other lattice point lies on the polygon.
fn winding(poly: &[Pos], p: Pos) -> Option<i64> {
    let mut w = 0;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        if a == p {
            return None;
        }
        let side = cross(sub(b, a), sub(p, a));
        if a.1 <= p.1 {
            if b.1 > p.1 && side > 0 {
                w += 1;
            }
        } else if b.1 <= p.1 && side < 0 {
            w -= 1;
        }
    }
    Some(w)
}

impl<'a> Walker<'a> {
    fn cell(&self, p: Pos) -> Cell {
        self.raster.wrap(p.0, p.1)
    }

    fn free(&self, p: Pos) -> bool {
        !self.raster.is_occupied_wrapped(p.0, p.1)
    }

    /// Moves to an adjacent (or the same) free cell. True when the target
    /// cell has been entered.
    fn move_to(&mut self, p: Pos) -> bool {
        debug_assert!(self.free(p));
        if p != self.pos {
            self.pos = p;
            let c = self.cell(p);
            self.cells.push(c);
        }
        self.cell(self.pos) == self.target
    }

    fn crack(&self, p: Pos, d: Pos) -> Crack {
        (self.cell(p), dir_index(d))
    }

    /// Walks the whole boundary starting at the current cell with heading
    /// `d`, recording it. Returns the loop id, or `None` if the target cell
    /// was entered on the way.
    fn circumnavigate(&mut self, d: Pos) -> Option<usize> {
        let start = self.crack(self.pos, d);
        let origin = self.pos;
        let mut states = vec![start];
        let mut offsets = vec![(0, 0)];
        let mut cost = vec![0];
        let (mut p, mut h) = (self.pos, d);
        // a crack cycle has at most 4 n² states
        let cap = 4 * self.raster.n() * self.raster.n() + 4;
        let mut reached = false;
        loop {
            let (np, nh) = follow_step(self.raster, p, h);
            let c = cost.last().copied().unwrap_or(0) + step_cost(p, np);
            if !reached && self.move_to(np) {
                reached = true;
            }
            p = np;
            h = nh;
            let s = self.crack(p, h);
            if s == start || states.len() >= cap {
                offsets.push(sub(p, origin));
                cost.push(c);
                break;
            }
            states.push(s);
            offsets.push(sub(p, origin));
            cost.push(c);
            if reached {
                break;
            }
        }
        if reached {
            return None;
        }
        // same torus cell; stay in the period the walk started from
        self.pos = origin;
        let h_len = self.raster.cell_size();
        self.trace
            .circumnavigations
            .push(*cost.last().unwrap() as f64 * h_len);
        let id = self.loops.len();
        for (k, s) in states.iter().enumerate() {
            self.index.entry(*s).or_insert((id, k));
        }
        self.loops.push(BoundaryLoop {
            states,
            offsets,
            cost,
        });
        Some(id)
    }

    /// Walks along loop `id` from state `k` (walker currently there) by
    /// `steps` states forward (`forward == true`) or backward.
    fn walk_loop(&mut self, id: usize, k: usize, steps: usize, forward: bool) -> bool {
        let m = self.loops[id].len();
        let base = self.pos;
        let off_k = self.loops[id].offsets[k];
        for s in 1..=steps {
            let (idx, wraps) = if forward {
                let t = k + s;
                (t % m, (t / m) as i64)
            } else {
                let t = k as i64 - s as i64;
                (t.rem_euclid(m as i64) as usize, t.div_euclid(m as i64))
            };
            let lp = &self.loops[id];
            let shift = lp.shift();
            let off = lp.offsets[idx];
            let p = (
                base.0 + off.0 - off_k.0 + wraps * shift.0,
                base.1 + off.1 - off_k.1 + wraps * shift.1,
            );
            if self.move_to(p) {
                return true;
            }
        }
        false
    }

    /// Marks lifts on the obstacle side of loop `id` as cut off; the walker
    /// stands on state `k`, free space is on the loop's left.
    ///
    /// A boundary that wraps around the torus lifts to an endless curve and
    /// everything beyond it on the right is out of reach; a ray cast to the
    /// right from a lift on the left crosses the curve once, net. A closed boundary
    /// walked clockwise surrounds an obstacle, so the lifts inside any of its
    /// translates are out of reach; walked counter-clockwise it surrounds the
    /// walker's pocket and every lift outside is.
    fn rule_out_behind(&mut self, id: usize, k: usize) {
        let lp = &self.loops[id];
        let shift = lp.shift();
        let base = sub(self.pos, lp.offsets[k]);
        if shift == (0, 0) {
            let poly = &lp.offsets[..lp.len()];
            let area: i64 = (0..poly.len())
                .map(|k| cross(poly[k], poly[(k + 1) % poly.len()]))
                .sum();
            let n = self.raster.n() as i64;
            let (lo, hi) = poly.iter().fold(((i64::MAX, i64::MAX), (i64::MIN, i64::MIN)), |(lo, hi), p| {
                ((lo.0.min(p.0), lo.1.min(p.1)), (hi.0.max(p.0), hi.1.max(p.1)))
            });
            for (lift, out) in self.lifts.iter().zip(self.cut_off.iter_mut()) {
                let rel = sub(*lift, base);
                let mut inside = false;
                let mut on_curve = false;
                for a in (lo.0 - rel.0).div_euclid(n)..=(hi.0 - rel.0).div_euclid(n) + 1 {
                    for b in (lo.1 - rel.1).div_euclid(n)..=(hi.1 - rel.1).div_euclid(n) + 1 {
                        match winding(poly, (rel.0 + a * n, rel.1 + b * n)) {
                            None => on_curve = true,
                            Some(0) => {}
                            Some(_) => inside = true,
                        }
                    }
                }
                let cut = if area < 0 { inside } else { !inside && !on_curve };
                if cut {
                    *out = true;
                }
            }
            return;
        }
        let m = lp.len() as i64;
        let period = shift.0 * shift.0 + shift.1 * shift.1;
        let along: Vec<i64> = lp.offsets[..=lp.len()].iter().map(|&o| dot(shift, o)).collect();
        let (lo, hi) = along
            .iter()
            .fold((i64::MAX, i64::MIN), |(lo, hi), &a| (lo.min(a), hi.max(a)));
        for (lift, out) in self.lifts.iter().zip(self.cut_off.iter_mut()) {
            let rel = sub(*lift, base);
            let here = dot(shift, rel);
            // periods whose stretch of curve straddles the lift
            let k_lo = (here - hi).div_euclid(period) - 1;
            let k_hi = (here - lo).div_euclid(period) + 1;
            let mut crossings = 0i64;
            let mut on_curve = false;
            'periods: for k in k_lo..=k_hi {
                let at = |t: i64| {
                    let o = lp.offsets[t as usize];
                    let p = (o.0 + k * shift.0, o.1 + k * shift.1);
                    let d = sub(p, rel);
                    (dot(shift, d), cross(shift, d))
                };
                for t in 0..m {
                    let (au, av) = at(t);
                    let (bu, bv) = at(t + 1);
                    if (au, av) == (0, 0) {
                        on_curve = true;
                        break 'periods;
                    }
                    // ray from the lift toward the right of the curve: u = 0, v < 0
                    let up = au <= 0 && bu > 0;
                    let down = bu <= 0 && au > 0;
                    if up || down {
                        let num = av * (bu - au) - (bv - av) * au;
                        let below = if bu > au { num < 0 } else { num > 0 };
                        if below {
                            crossings += if up { 1 } else { -1 };
                        }
                    }
                }
            }
            if !on_curve && crossings == 0 {
                *out = true;
            }
        }
    }

    /// Picks the loop state nearest to `goal` when setting out from state `k`
    /// at the current position. Returns `(steps, forward, distance)`.
    fn nearest_on_loop(&self, id: usize, k: usize, goal: Pos) -> (usize, bool, u64) {
        let lp = &self.loops[id];
        let m = lp.len();
        let shift = lp.shift();
        let off_k = lp.offsets[k];
        let total = lp.cost[m];
        let mut best = (0usize, true, l1(self.pos, goal), 0u64);
        for s in 1..m {
            for forward in [true, false] {
                let (idx, wraps, walk) = if forward {
                    let t = k + s;
                    let idx = t % m;
                    let wraps = (t / m) as i64;
                    let walk = if idx >= k {
                        lp.cost[idx] - lp.cost[k]
                    } else {
                        total - lp.cost[k] + lp.cost[idx]
                    };
                    (idx, wraps, walk)
                } else {
                    let t = k as i64 - s as i64;
                    let idx = t.rem_euclid(m as i64) as usize;
                    let wraps = t.div_euclid(m as i64);
                    let walk = if idx <= k {
                        lp.cost[k] - lp.cost[idx]
                    } else {
                        lp.cost[k] + total - lp.cost[idx]
                    };
                    (idx, wraps, walk)
                };
                let off = lp.offsets[idx];
                let p = (
                    self.pos.0 + off.0 - off_k.0 + wraps * shift.0,
                    self.pos.1 + off.1 - off_k.1 + wraps * shift.1,
                );
                let d = l1(p, goal);
                if d < best.2 || (d == best.2 && walk < best.3) {
                    best = (s, forward, d, walk);
                }
            }
        }
        (best.0, best.1, best.2)
    }

    /// Next cell of the 4-connected digital line from `from` to `goal`,
    /// given the walker is at `self.pos` on that line.
    fn line_step(&self, from: Pos, goal: Pos) -> Option<Pos> {
        let p = self.pos;
        if p == goal {
            return None;
        }
        let (dx, dy) = sub(goal, from);
        let sx = (goal.0 - p.0).signum();
        let sy = (goal.1 - p.1).signum();
        if sx == 0 {
            return Some((0, sy));
        }
        if sy == 0 {
            return Some((sx, 0));
        }
        let err = |q: Pos| ((q.0 - from.0) * dy - (q.1 - from.1) * dx).abs();
        if err((p.0 + sx, p.1)) <= err((p.0, p.1 + sy)) {
            Some((sx, 0))
        } else {
            Some((0, sy))
        }
    }

    fn attempt(&mut self, lift: usize) -> Attempt {
        let goal = self.lifts[lift];
        let mut best_leave: Option<u64> = None;
        let mut leg_from = self.pos;
        let mut forced: Option<Pos> = None;
        loop {
            // straight leg
            let blocked_dir = loop {
                let step = match forced.take() {
                    Some(s) => s,
                    None => match self.line_step(leg_from, goal) {
                        Some(s) => s,
                        // at the lift of the target, so at the target cell
                        None => return Attempt::Reached,
                    },
                };
                let next = add(self.pos, step);
                if self.free(next) {
                    if self.move_to(next) {
                        return Attempt::Reached;
                    }
                } else {
                    break step;
                }
            };
            // hit: turn left, obstacle on the right
            let touched_target = self.cell(add(self.pos, blocked_dir)) == self.target;
            let heading = left(blocked_dir);
            let hit_crack = self.crack(self.pos, heading);
            self.trace
                .hit_points
                .push(self.raster.config_of(self.cell(self.pos)));
            let (id, k) = match self.index.get(&hit_crack) {
                Some(&(id, k)) => (id, k),
                None => match self.circumnavigate(heading) {
                    Some(id) => (id, 0),
                    None => return Attempt::Reached,
                },
            };
            if touched_target {
                return Attempt::Blocked;
            }
            self.rule_out_behind(id, k);
            if self.cut_off[lift] {
                return Attempt::Failed;
            }
            let (steps, forward, dist) = self.nearest_on_loop(id, k, goal);
            if self.walk_loop(id, k, steps, forward) {
                return Attempt::Reached;
            }
            self.trace
                .leave_points
                .push(self.raster.config_of(self.cell(self.pos)));
            if best_leave.is_some_and(|b| dist >= b) {
                return Attempt::Failed;
            }
            best_leave = Some(dist);

            // leave: any free step that closes in on the goal
            let sx = (goal.0 - self.pos.0).signum();
            let sy = (goal.1 - self.pos.1).signum();
            let mut toward: Vec<Pos> = Vec::with_capacity(2);
            if let Some(s) = self.line_step(self.pos, goal) {
                toward.push(s);
            }
            for s in [(sx, 0), (0, sy)] {
                if s != (0, 0) && !toward.contains(&s) {
                    toward.push(s);
                }
            }
            if toward.is_empty() {
                return Attempt::Reached;
            }
            let here = self.pos;
            if toward
                .iter()
                .any(|s| self.cell(add(here, *s)) == self.target && !self.free(add(here, *s)))
            {
                // the target cell is next door and occupied
                return Attempt::Blocked;
            }
            if let Some(&s) = toward.iter().find(|s| self.free(add(here, **s))) {
                forced = Some(s);
            } else {
                // every useful step is blocked; only another obstacle's
                // boundary can still lead on
                let other = toward.iter().find(|s| {
                    let c = self.crack(here, left(**s));
                    self.index.get(&c).map(|&(lid, _)| lid) != Some(id)
                });
                match other {
                    Some(&s) => forced = Some(s),
                    None => return Attempt::Failed,
                }
            }
            leg_from = self.pos;
        }
    }
}

/// Cells of the path turned into waypoints: the exact start, the center of
/// every visited cell, and the exact target when it was reached.
fn to_path(
    raster: &CSpaceRaster,
    start: Configuration,
    target: Configuration,
    cells: &[Cell],
    status: PathStatus,
) -> PathResult {
    let mut waypoints = vec![start];
    if cells.len() > 1 {
        let mut prev: Option<Cell> = None;
        for &c in cells {
            if prev != Some(c) {
                waypoints.push(raster.config_of(c));
                prev = Some(c);
            }
        }
    }
    if status == PathStatus::Reached && target != start {
        waypoints.push(target);
    }
    let length = waypoints.windows(2).map(|w| torus_l1(w[0], w[1])).sum();
    PathResult {
        status,
        waypoints,
        length,
    }
}

/// Signed cell offset from `a` to `b` along one axis, in `(-n/2, n/2]`.
fn cell_delta(a: usize, b: usize, n: usize) -> i64 {
    let n = n as i64;
    let d = (b as i64 - a as i64).rem_euclid(n);
    if 2 * d > n {
        d - n
    } else {
        d
    }
}

pub fn bug1(
    raster: &CSpaceRaster,
    start: Configuration,
    target: Configuration,
) -> Result<(PathResult, Bug1Trace), NavError> {
    let sc = raster.cell_of(start);
    if raster.is_occupied(sc) {
        return Err(NavError::StartBlocked);
    }
    let tc = raster.cell_of(target);
    if sc == tc {
        let path = to_path(raster, start, target, &[sc], PathStatus::Reached);
        return Ok((path, Bug1Trace::default()));
    }
    let n = raster.n();
    let base = (
        sc.i as i64 + cell_delta(sc.i, tc.i, n),
        sc.j as i64 + cell_delta(sc.j, tc.j, n),
    );
    // lifts of the target: the four winding classes of the straight line and
    // one further ring around them
    let mut lifts: Vec<Pos> = Vec::new();
    for a in -2..=2i64 {
        for b in -2..=2i64 {
            lifts.push((base.0 + a * n as i64, base.1 + b * n as i64));
        }
    }
    let mut w = Walker {
        raster,
        pos: (sc.i as i64, sc.j as i64),
        cells: vec![sc],
        target: tc,
        loops: Vec::new(),
        index: HashMap::new(),
        cut_off: vec![false; lifts.len()],
        lifts,
        trace: Bug1Trace::default(),
    };
    let mut tried = vec![false; w.lifts.len()];
    let mut status = PathStatus::Unreachable;
    loop {
        let here = w.pos;
        let Some(k) = (0..w.lifts.len())
            .filter(|&k| !tried[k] && !w.cut_off[k])
            .min_by_key(|&k| (l1(here, w.lifts[k]), k))
        else {
            break;
        };
        tried[k] = true;
        match w.attempt(k) {
            Attempt::Reached => {
                status = PathStatus::Reached;
                break;
            }
            Attempt::Blocked => break,
            Attempt::Failed => {}
        }
    }
    let path = to_path(raster, start, target, &w.cells, status);
    Ok((path, w.trace))
}

/// Minimal-length path over 8-connected free cells on the torus.
/// A diagonal hop costs two unit half-steps, an axis hop one.
pub fn bfs_shortest(
    raster: &CSpaceRaster,
    start: Configuration,
    target: Configuration,
) -> Result<PathResult, NavError> {
    let sc = raster.cell_of(start);
    if raster.is_occupied(sc) {
        return Err(NavError::StartBlocked);
    }
    let tc = raster.cell_of(target);
    let n = raster.n();
    let idx = |c: Cell| c.i * n + c.j;
    const UNSEEN: u32 = u32::MAX;
    let mut dist = vec![UNSEEN; n * n];
    let mut parent = vec![usize::MAX; n * n];
    // bucket queue indexed by distance modulo 3 (edge weights are 1 or 2)
    let mut buckets: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    dist[idx(sc)] = 0;
    buckets[0].push(idx(sc));
    let mut d = 0u32;
    let mut pending = 1usize;
    let mut found = sc == tc;
    const MOVES: [(i64, i64, u32); 8] = [
        (1, 0, 1),
        (0, 1, 1),
        (-1, 0, 1),
        (0, -1, 1),
        (1, 1, 2),
        (-1, 1, 2),
        (-1, -1, 2),
        (1, -1, 2),
    ];
    while pending > 0 && !found {
        let slot = (d % 3) as usize;
        let frontier = std::mem::take(&mut buckets[slot]);
        for k in frontier {
            pending -= 1;
            if dist[k] != d {
                continue;
            }
            if k == idx(tc) {
                found = true;
                break;
            }
            let (i, j) = ((k / n) as i64, (k % n) as i64);
            for &(di, dj, w) in &MOVES {
                let c = raster.wrap(i + di, j + dj);
                if raster.is_occupied(c) {
                    continue;
                }
                let nk = idx(c);
                let nd = d + w;
                if nd < dist[nk] {
                    dist[nk] = nd;
                    parent[nk] = k;
                    buckets[(nd % 3) as usize].push(nk);
                    pending += 1;
                }
            }
        }
        d += 1;
    }
    if !found {
        return Ok(to_path(raster, start, target, &[sc], PathStatus::Unreachable));
    }
    let mut cells = Vec::new();
    let mut k = idx(tc);
    while k != idx(sc) {
        cells.push(Cell::new(k / n, k % n));
        k = parent[k];
    }
    cells.push(sc);
    cells.reverse();
    Ok(to_path(raster, start, target, &cells, PathStatus::Reached))
}
