//! Growable 2D log-odds grid of landing safety over world x-y.
//!
//! Cells live on a global lattice anchored at the world origin: the cell of a
//! world point is `floor(x / resolution)`, `floor(y / resolution)`. The array
//! only stores the window `offset .. offset + size` of that lattice, so growing
//! it never moves an existing cell in world space.
//!
//! Log-odds are kept in fixed point (micro-units). Evidence sums are then
//! exact and order-free, which keeps maps byte-identical across runs and
//! thread counts.

use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::io::{KvFile, Pgm};

const UNITS_PER_LOG_ODD: f64 = 1e6;

fn to_units(l: f64) -> i64 {
    (l * UNITS_PER_LOG_ODD).round() as i64
}

fn from_units(u: i64) -> f64 {
    u as f64 / UNITS_PER_LOG_ODD
}

pub fn logistic(l: f64) -> f64 {
    1.0 - 1.0 / (1.0 + l.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub l_hit: f64,
    pub l_miss: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub p_safe: f64,
    pub p_unsafe: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            l_hit: 0.85,
            l_miss: -0.4,
            l_min: -2.0,
            l_max: 3.5,
            p_safe: 0.95,
            p_unsafe: 0.3,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_miss < 0.0 && self.l_hit > 0.0) {
            return Err(Error::invalid("need l_miss < 0 < l_hit"));
        }
        if !(self.l_min < 0.0 && self.l_max > 0.0) {
            return Err(Error::invalid("need l_min < 0 < l_max"));
        }
        if !(self.p_safe > 0.5 && self.p_safe <= 1.0) {
            return Err(Error::invalid("p_safe must lie in (0.5, 1]"));
        }
        if !(self.p_unsafe >= 0.0 && self.p_unsafe < 0.5) {
            return Err(Error::invalid("p_unsafe must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellState {
    log_odds: i64,
    pub observed: bool,
}

impl CellState {
    pub fn log_odds(&self) -> f64 {
        from_units(self.log_odds)
    }

    pub fn probability(&self) -> f64 {
        if self.observed {
            logistic(self.log_odds())
        } else {
            0.5
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Safe,
    Unsafe,
    Unknown,
}

impl CellClass {
    pub fn to_byte(self) -> u8 {
        match self {
            CellClass::Safe => 0,
            CellClass::Unsafe => 128,
            CellClass::Unknown => 255,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(CellClass::Safe),
            128 => Some(CellClass::Unsafe),
            255 => Some(CellClass::Unknown),
            _ => None,
        }
    }
}

/// Array cell index: column (x) then row (y). Signed so that queries outside
/// the stored window are expressible.
pub type CellIndex = (i64, i64);

/// Deduplicated per-frame evidence on the global lattice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameEvidence {
    pub safe: Vec<[i64; 2]>,
    pub hazard: Vec<[i64; 2]>,
}

fn lattice_cells(clouds: &[&PointCloud], resolution: f64) -> Vec<[i64; 2]> {
    let mut cells: Vec<[i64; 2]> = clouds
        .iter()
        .flat_map(|c| c.points())
        .map(|p| {
            [
                (p.x / resolution).floor() as i64,
                (p.y / resolution).floor() as i64,
            ]
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

impl FrameEvidence {
    pub fn from_clouds(safe: &PointCloud, hazard: &PointCloud, resolution: f64) -> Self {
        Self::from_cloud_sets(&[safe], &[hazard], resolution)
    }

    /// Evidence from several safe and several hazard clouds of one frame.
    pub fn from_cloud_sets(safe: &[&PointCloud], hazard: &[&PointCloud], resolution: f64) -> Self {
        Self {
            safe: lattice_cells(safe, resolution),
            hazard: lattice_cells(hazard, resolution),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.safe.is_empty() && self.hazard.is_empty()
    }

    fn bounds(&self) -> Option<([i64; 2], [i64; 2])> {
        let mut it = self.safe.iter().chain(&self.hazard);
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), c| {
            (
                [lo[0].min(c[0]), lo[1].min(c[1])],
                [hi[0].max(c[0]), hi[1].max(c[1])],
            )
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    resolution: f64,
    offset: [i64; 2],
    width: usize,
    height: usize,
    cells: Vec<CellState>,
}

impl GridMap {
    pub fn new(resolution: f64) -> Result<Self> {
        Self::with_window(resolution, [0, 0], 0, 0)
    }

    /// Empty grid covering lattice cells `offset .. offset + (width, height)`.
    pub fn with_window(
        resolution: f64,
        offset: [i64; 2],
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            resolution,
            offset,
            width,
            height,
            cells: vec![CellState::default(); width * height],
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn offset(&self) -> [i64; 2] {
        self.offset
    }

    /// World position of the outer corner of cell (0, 0).
    pub fn origin(&self) -> [f64; 2] {
        [
            self.offset[0] as f64 * self.resolution,
            self.offset[1] as f64 * self.resolution,
        ]
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> CellIndex {
        (
            (x / self.resolution).floor() as i64 - self.offset[0],
            (y / self.resolution).floor() as i64 - self.offset[1],
        )
    }

    pub fn cell_center(&self, cell: CellIndex) -> [f64; 2] {
        [
            (cell.0 + self.offset[0]) as f64 * self.resolution + 0.5 * self.resolution,
            (cell.1 + self.offset[1]) as f64 * self.resolution + 0.5 * self.resolution,
        ]
    }

    fn linear(&self, cell: CellIndex) -> Option<usize> {
        let (c, r) = cell;
        (c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height)
            .then(|| r as usize * self.width + c as usize)
    }

    /// Unobserved default for cells outside the stored window.
    pub fn cell(&self, cell: CellIndex) -> CellState {
        self.linear(cell).map(|i| self.cells[i]).unwrap_or_default()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    /// Overwrites one stored cell's log-odds and marks it observed.
    pub fn set_log_odds(&mut self, cell: CellIndex, log_odds: f64) -> Result<()> {
        let i = self
            .linear(cell)
            .ok_or_else(|| Error::invalid(format!("cell {cell:?} outside grid")))?;
        self.cells[i] = CellState {
            log_odds: to_units(log_odds),
            observed: true,
        };
        Ok(())
    }

    fn ensure_covers(&mut self, lo: [i64; 2], hi: [i64; 2]) {
        let cur_hi = [
            self.offset[0] + self.width as i64 - 1,
            self.offset[1] + self.height as i64 - 1,
        ];
        let empty = self.width == 0 || self.height == 0;
        if !empty
            && lo[0] >= self.offset[0]
            && lo[1] >= self.offset[1]
            && hi[0] <= cur_hi[0]
            && hi[1] <= cur_hi[1]
        {
            return;
        }
        let (mut lo, mut hi) = (lo, hi);
        if !empty {
            for k in 0..2 {
                lo[k] = lo[k].min(self.offset[k]);
                hi[k] = hi[k].max(cur_hi[k]);
            }
        }
        for k in 0..2 {
            let margin = ((hi[k] - lo[k] + 1) as f64 * 0.25).ceil() as i64;
            lo[k] -= margin;
            hi[k] += margin;
        }
        let (w, h) = ((hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize);
        let mut cells = vec![CellState::default(); w * h];
        let (dx, dy) = (
            (self.offset[0] - lo[0]) as usize,
            (self.offset[1] - lo[1]) as usize,
        );
        for r in 0..self.height {
            let src = &self.cells[r * self.width..][..self.width];
            cells[(r + dy) * w + dx..][..self.width].copy_from_slice(src);
        }
        self.offset = lo;
        self.width = w;
        self.height = h;
        self.cells = cells;
    }

    /// Adds one frame of evidence: each listed cell gets `l_hit` and/or
    /// `l_miss` once, then is clamped to `[l_min, l_max]`.
    pub fn apply(&mut self, ev: &FrameEvidence, params: &GridParams) {
        let Some((lo, hi)) = ev.bounds() else {
            return;
        };
        self.ensure_covers(lo, hi);
        let (hit, miss) = (to_units(params.l_hit), to_units(params.l_miss));
        let (lmin, lmax) = (to_units(params.l_min), to_units(params.l_max));
        // the two lists are sorted, so a cell in both gets hit + miss before clamping
        let mut delta: Vec<([i64; 2], i64)> = Vec::with_capacity(ev.safe.len() + ev.hazard.len());
        delta.extend(ev.safe.iter().map(|&c| (c, hit)));
        delta.extend(ev.hazard.iter().map(|&c| (c, miss)));
        delta.sort_unstable_by_key(|(c, _)| *c);
        let mut i = 0;
        while i < delta.len() {
            let cell = delta[i].0;
            let mut sum = 0;
            while i < delta.len() && delta[i].0 == cell {
                sum += delta[i].1;
                i += 1;
            }
            let idx = self
                .linear((cell[0] - self.offset[0], cell[1] - self.offset[1]))
                .expect("grid grown to fit");
            let st = &mut self.cells[idx];
            st.log_odds = (st.log_odds + sum).clamp(lmin, lmax);
            st.observed = true;
        }
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.observed).count()
    }
}

/// Applies one frame of world-frame evidence.
pub fn update_grid(
    grid: &mut GridMap,
    safe: &PointCloud,
    hazard: &PointCloud,
    params: &GridParams,
) {
    let ev = FrameEvidence::from_clouds(safe, hazard, grid.resolution);
    grid.apply(&ev, params);
}

pub fn cell_probability(grid: &GridMap, cell: CellIndex) -> f64 {
    grid.cell(cell).probability()
}

pub fn cell_class(grid: &GridMap, cell: CellIndex, params: &GridParams) -> CellClass {
    classify_state(&grid.cell(cell), params)
}

fn classify_state(st: &CellState, params: &GridParams) -> CellClass {
    if !st.observed {
        return CellClass::Unknown;
    }
    let p = st.probability();
    if p >= params.p_safe {
        CellClass::Safe
    } else if p <= params.p_unsafe {
        CellClass::Unsafe
    } else {
        CellClass::Unknown
    }
}

/// Immutable per-cell classification of a map window, as exported to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    pub width: usize,
    pub height: usize,
    /// World position of the outer corner of cell (0, 0).
    pub origin: [f64; 2],
    pub resolution: f64,
    /// Row-major, row index = y.
    pub classes: Vec<CellClass>,
    pub observed: Vec<bool>,
}

impl ClassMap {
    pub fn class(&self, col: usize, row: usize) -> CellClass {
        self.classes[row * self.width + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    /// Cell containing a world point, if inside the window.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin[0]) / self.resolution).floor();
        let r = ((y - self.origin[1]) / self.resolution).floor();
        (c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height)
            .then_some((c as usize, r as usize))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.classes.iter().map(|c| c.to_byte()).collect()
    }

    pub fn to_pgm(&self) -> Pgm {
        Pgm::gray8(self.width, self.height, self.to_bytes())
    }

    pub fn observed_pgm(&self) -> Pgm {
        Pgm::gray8(
            self.width,
            self.height,
            self.observed
                .iter()
                .map(|&o| if o { 255 } else { 0 })
                .collect(),
        )
    }

    pub fn header_text(&self) -> String {
        format!(
            "origin_x={:.6}\norigin_y={:.6}\nresolution={:.6}\n",
            self.origin[0], self.origin[1], self.resolution
        )
    }

    /// Writes `<stem>.pgm` and its `<stem>.hdr` header.
    pub fn write_image(&self, dir: &Path, stem: &str) -> Result<()> {
        self.to_pgm().write(dir.join(format!("{stem}.pgm")))?;
        let header = dir.join(format!("{stem}.hdr"));
        std::fs::write(&header, self.header_text()).map_err(|e| Error::io(&header, e))
    }

    /// [`ClassMap::write_image`] plus the `<stem>_observed.pgm` mask.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        self.write_image(dir, stem)?;
        self.observed_pgm()
            .write(dir.join(format!("{stem}_observed.pgm")))
    }

    /// Reads a map written by [`ClassMap::write`]. Without an observed mask
    /// every cell counts as observed.
    pub fn read(pgm_path: &Path) -> Result<Self> {
        let img = Pgm::read(pgm_path)?;
        let (width, height) = (img.width, img.height);
        let bytes = img.into_gray8(pgm_path)?;
        let classes = bytes
            .iter()
            .map(|&b| {
                CellClass::from_byte(b)
                    .ok_or_else(|| Error::parse(pgm_path, 0, format!("unexpected map byte {b}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let header_path = pgm_path.with_extension("hdr");
        let kv = KvFile::load(&header_path)?;
        kv.reject_unknown(&["origin_x", "origin_y", "resolution"])?;
        let resolution: f64 = kv.require("resolution")?;
        if !(resolution > 0.0) {
            return Err(Error::parse(&header_path, 0, "resolution must be positive"));
        }
        let origin = [kv.require("origin_x")?, kv.require("origin_y")?];
        let stem = pgm_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("map");
        let mask_path = pgm_path.with_file_name(format!("{stem}_observed.pgm"));
        let observed = if mask_path.exists() {
            let m = Pgm::read(&mask_path)?;
            if (m.width, m.height) != (width, height) {
                return Err(Error::parse(
                    &mask_path,
                    0,
                    "observed mask size differs from map",
                ));
            }
            m.into_gray8(&mask_path)?
                .into_iter()
                .map(|b| b != 0)
                .collect()
        } else {
            vec![true; width * height]
        };
        Ok(Self {
            width,
            height,
            origin,
            resolution,
            classes,
            observed,
        })
    }
}

/// Per-cell classification of the whole stored window.
pub fn export_map(grid: &GridMap, params: &GridParams) -> ClassMap {
    ClassMap {
        width: grid.width,
        height: grid.height,
        origin: grid.origin(),
        resolution: grid.resolution,
        classes: grid
            .cells
            .iter()
            .map(|st| classify_state(st, params))
            .collect(),
        observed: grid.cells.iter().map(|st| st.observed).collect(),
    }
}

/// Single-writer grid whose readers take immutable snapshots. An update is
/// applied to a private copy whenever a snapshot is outstanding, so readers
/// never observe a half-applied frame.
#[derive(Debug)]
pub struct SharedGrid {
    current: RwLock<Arc<GridMap>>,
}

impl SharedGrid {
    pub fn new(grid: GridMap) -> Self {
        Self {
            current: RwLock::new(Arc::new(grid)),
        }
    }

    pub fn apply(&self, ev: &FrameEvidence, params: &GridParams) {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let mut next = Arc::clone(&guard);
        Arc::make_mut(&mut next).apply(ev, params);
        *guard = next;
    }

    pub fn snapshot(&self) -> Arc<GridMap> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }
}
