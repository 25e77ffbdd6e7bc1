#![allow(dead_code)]

use std::f64::consts::TAU;

use armspace::cspace::{CSpaceRaster, Cell};
use armspace::geometry::{torus_l1, Configuration};
use armspace::navigator::PathResult;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Raster made of random wrapping rectangles and, sometimes, a band with a
/// few gaps.
pub fn synthetic_raster(seed: u64, n: usize) -> CSpaceRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = CSpaceRaster::free(n).unwrap();
    let rects = rng.gen_range(0..7);
    for _ in 0..rects {
        let (i0, j0) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (w, h) = (rng.gen_range(1..=n / 2), rng.gen_range(1..=n / 2));
        for di in 0..w {
            for dj in 0..h {
                r.set(Cell::new((i0 + di) % n, (j0 + dj) % n), true);
            }
        }
    }
    if rng.gen_bool(0.4) {
        let vertical = rng.gen_bool(0.5);
        let at = rng.gen_range(0..n);
        let thick = rng.gen_range(1..=3);
        let gaps: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..n)).collect();
        for k in 0..n {
            if gaps.contains(&k) {
                continue;
            }
            for t in 0..thick {
                let c = if vertical {
                    Cell::new((at + t) % n, k)
                } else {
                    Cell::new(k, (at + t) % n)
                };
                r.set(c, true);
            }
        }
    }
    r
}

/// Free configuration at a random cell center, if the raster has one.
pub fn random_free(rng: &mut ChaCha8Rng, r: &CSpaceRaster) -> Option<Configuration> {
    for _ in 0..1000 {
        let c = Cell::new(rng.gen_range(0..r.n()), rng.gen_range(0..r.n()));
        if !r.is_occupied(c) {
            let h = r.cell_size();
            let base = r.config_of(c);
            let jitter = |v: f64, rng: &mut ChaCha8Rng| v + rng.gen_range(-0.49..0.49) * h;
            let t1 = jitter(base.theta1.radians(), rng).rem_euclid(TAU);
            let t2 = jitter(base.theta2.radians(), rng).rem_euclid(TAU);
            let q = Configuration::new(t1, t2).unwrap();
            if r.cell_of(q) == c {
                return Some(q);
            }
        }
    }
    None
}

/// Occupied/free edge count between 4-neighbours times the cell size.
pub fn boundary_perimeter(r: &CSpaceRaster) -> f64 {
    let n = r.n() as i64;
    let mut edges = 0usize;
    for i in 0..n {
        for j in 0..n {
            let a = r.is_occupied_wrapped(i, j);
            if a != r.is_occupied_wrapped(i + 1, j) {
                edges += 1;
            }
            if a != r.is_occupied_wrapped(i, j + 1) {
                edges += 1;
            }
        }
    }
    edges as f64 * r.cell_size()
}

/// Every interior waypoint is a free cell center and consecutive interior
/// waypoints are 8-neighbours on the torus.
pub fn path_is_free(r: &CSpaceRaster, p: &PathResult) -> Result<(), String> {
    let n = r.n() as i64;
    let interior: &[Configuration] = if p.waypoints.len() > 2 {
        let end = if p.reached() {
            p.waypoints.len() - 1
        } else {
            p.waypoints.len()
        };
        &p.waypoints[1..end]
    } else {
        &[]
    };
    let cells: Vec<Cell> = interior.iter().map(|q| r.cell_of(*q)).collect();
    for c in &cells {
        if r.is_occupied(*c) {
            return Err(format!("path enters occupied cell {c:?}"));
        }
    }
    for w in cells.windows(2) {
        let di = (w[0].i as i64 - w[1].i as i64).rem_euclid(n);
        let dj = (w[0].j as i64 - w[1].j as i64).rem_euclid(n);
        let ok = |d: i64| d <= 1 || d == n - 1;
        if !ok(di) || !ok(dj) {
            return Err(format!("jump {:?} -> {:?}", w[0], w[1]));
        }
    }
    Ok(())
}

pub fn geodesic(a: Configuration, b: Configuration) -> f64 {
    torus_l1(a, b)
}
