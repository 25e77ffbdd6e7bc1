//! Configuration-space obstacle raster on the two-torus.
//!
//! Cell `(i, j)` covers `[2πi/n, 2π(i+1)/n) × [2πj/n, 2π(j+1)/n)` in
//! `(θ1, θ2)` and is occupied iff the arm collides at the cell center.
//! Column `n-1` adjoins column `0` and row `n-1` adjoins row `0`.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{link1_collides, link2_collides, LinkModel};
use crate::geometry::{Configuration, Obstacle};
use crate::kinematics::ArmGeometry;

pub const MIN_RESOLUTION: usize = 8;
pub const DEFAULT_RESOLUTION: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CSpaceError {
    #[error("raster resolution must be at least {MIN_RESOLUTION}, got {0}")]
    ResolutionTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterOptions {
    pub n: usize,
    /// Extra safety margin: occupied cells are grown by this many cells
    /// (Chebyshev radius, toroidal).
    pub dilation: usize,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            n: DEFAULT_RESOLUTION,
            dilation: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Cell { i, j }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CSpaceRaster {
    n: usize,
    /// Column-major: index `i * n + j`.
    cells: Vec<bool>,
}

impl CSpaceRaster {
    pub fn free(n: usize) -> Result<Self, CSpaceError> {
        if n < MIN_RESOLUTION {
            return Err(CSpaceError::ResolutionTooSmall(n));
        }
        Ok(CSpaceRaster {
            n,
            cells: vec![false; n * n],
        })
    }

    /// Builds a raster from an occupancy predicate over cells.
    pub fn from_fn(
        n: usize,
        mut occupied: impl FnMut(Cell) -> bool,
    ) -> Result<Self, CSpaceError> {
        let mut r = CSpaceRaster::free(n)?;
        for i in 0..n {
            for j in 0..n {
                r.cells[i * n + j] = occupied(Cell::new(i, j));
            }
        }
        Ok(r)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Angular width of one cell.
    pub fn cell_size(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.cells[c.i * self.n + c.j]
    }

    pub fn set(&mut self, c: Cell, occupied: bool) {
        self.cells[c.i * self.n + c.j] = occupied;
    }

    /// Occupancy at signed (unwrapped) indices.
    pub fn is_occupied_wrapped(&self, i: i64, j: i64) -> bool {
        self.is_occupied(self.wrap(i, j))
    }

    pub fn wrap(&self, i: i64, j: i64) -> Cell {
        let n = self.n as i64;
        Cell::new(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)
    }

    pub fn cell_of(&self, q: Configuration) -> Cell {
        let k = |a: f64| ((a * self.n as f64 / TAU) as usize).min(self.n - 1);
        Cell::new(k(q.theta1.radians()), k(q.theta2.radians()))
    }

    /// Center configuration of a cell.
    pub fn config_of(&self, c: Cell) -> Configuration {
        let h = self.cell_size();
        Configuration::wrapped((c.i as f64 + 0.5) * h, (c.j as f64 + 0.5) * h)
    }

    pub fn is_free(&self, q: Configuration) -> bool {
        !self.is_occupied(self.cell_of(q))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, bool)> + '_ {
        let n = self.n;
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, &b)| (Cell::new(k / n, k % n), b))
    }

    /// Cells in one row (`θ2` index `j`), ordered by `θ1`.
    pub fn row(&self, j: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.cells[i * self.n + j])
    }

    /// Toroidal shift by `di` columns and `dj` rows.
    pub fn shifted(&self, di: usize, dj: usize) -> CSpaceRaster {
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.cells[((i + di) % n) * n + (j + dj) % n] = self.cells[i * n + j];
            }
        }
        out
    }

    pub fn dilated(&self, radius: usize) -> CSpaceRaster {
        if radius == 0 {
            return self.clone();
        }
        let n = self.n as i64;
        let r = radius as i64;
        let mut out = self.clone();
        for (c, occ) in self.cells() {
            if !occ {
                continue;
            }
            for di in -r..=r {
                for dj in -r..=r {
                    let t = self.wrap(c.i as i64 + di, c.j as i64 + dj);
                    out.cells[t.i * n as usize + t.j] = true;
                }
            }
        }
        out
    }

    /// Binary portable graymap: `θ1` along columns, row 0 is `θ2 = 0`,
    /// obstacles black (0), free space white (255).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.n, self.n)?;
        let mut line = vec![0u8; self.n];
        for j in 0..self.n {
            for (px, occ) in line.iter_mut().zip(self.row(j)) {
                *px = if occ { 0 } else { 255 };
            }
            w.write_all(&line)?;
        }
        Ok(())
    }
}

pub fn build_raster(
    arm: &ArmGeometry,
    links: &LinkModel,
    obstacles: &[Obstacle],
    n: usize,
) -> Result<CSpaceRaster, CSpaceError> {
    build_raster_with(arm, links, obstacles, RasterOptions { n, dilation: 0 })
}

/// Per-link sweep: a column whose center `θ1` puts link 1 in contact is
/// filled whole; otherwise link 2 is swept through every `θ2` cell center.
pub fn build_raster_with(
    arm: &ArmGeometry,
    links: &LinkModel,
    obstacles: &[Obstacle],
    opts: RasterOptions,
) -> Result<CSpaceRaster, CSpaceError> {
    let mut raster = CSpaceRaster::free(opts.n)?;
    let n = opts.n;
    let probe = CSpaceRaster::free(n)?;
    raster
        .cells
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, column)| {
            let theta1 = probe.config_of(Cell::new(i, 0)).theta1;
            if link1_collides(arm, links, obstacles, theta1) {
                column.fill(true);
                return;
            }
            for (j, cell) in column.iter_mut().enumerate() {
                *cell = link2_collides(arm, links, obstacles, probe.config_of(Cell::new(i, j)));
            }
        });
    Ok(raster.dilated(opts.dilation))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Virtual-obstacle labeling: 0 is free, `1..=count` are obstacle ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    n: usize,
    labels: Vec<u32>,
    pub count: u32,
}

impl ComponentLabels {
    pub fn label(&self, c: Cell) -> u32 {
        self.labels[c.i * self.n + c.j]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn label_components(raster: &CSpaceRaster) -> ComponentLabels {
    label_components_with(raster, Connectivity::Four)
}

pub fn label_components_with(raster: &CSpaceRaster, conn: Connectivity) -> ComponentLabels {
    let n = raster.n;
    let mut labels = vec![0u32; n * n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n * n {
        if !raster.cells[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = ((k / n) as i64, (k % n) as i64);
            for &(di, dj) in conn.offsets() {
                let c = raster.wrap(i + di, j + dj);
                let idx = c.i * n + c.j;
                if raster.cells[idx] && labels[idx] == 0 {
                    labels[idx] = count;
                    queue.push_back(idx);
                }
            }
        }
    }
    ComponentLabels { n, labels, count }
}

/// Key/value sidecar written next to an exported graymap.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMetadata {
    pub n: usize,
    pub l1: f64,
    pub l2: f64,
    pub link_width: f64,
    pub dilation: usize,
    pub scenario_hash: String,
    pub components: u32,
}

impl RasterMetadata {
    pub fn to_text(&self) -> String {
        format!(
            "n={}\nl1={}\nl2={}\nlink_width={}\ndilation={}\nscenario_hash={}\ncomponents={}\n",
            self.n, self.l1, self.l2, self.link_width, self.dilation, self.scenario_hash, self.components
        )
    }
}
