//! Landing patch search and scoring over a classified map snapshot.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::{export_map, CellClass, ClassMap, GridMap, GridParams};
use crate::io::Pgm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneState {
    pub position: Point3,
    pub yaw: f64,
}

impl DroneState {
    pub fn new(position: Point3, yaw: f64) -> Result<Self> {
        if !(position.coords.iter().all(|v| v.is_finite()) && yaw.is_finite()) {
            return Err(Error::invalid("drone state must be finite"));
        }
        Ok(Self { position, yaw })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub drone_diameter: f64,
    pub patch_scale: f64,
    pub clearance_cap: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.65,
            beta: 0.35,
            drone_diameter: 0.27,
            patch_scale: 1.85,
            clearance_cap: 5.0,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !((0.0..=1.0).contains(&self.alpha) && (0.0..=1.0).contains(&self.beta)) {
            return Err(Error::invalid("alpha and beta must lie in [0, 1]"));
        }
        if (self.alpha + self.beta - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "alpha + beta must be 1, got {}",
                self.alpha + self.beta
            )));
        }
        if !(self.drone_diameter > 0.0 && self.patch_scale > 0.0 && self.clearance_cap > 0.0) {
            return Err(Error::invalid(
                "drone_diameter, patch_scale and clearance_cap must be positive",
            ));
        }
        Ok(())
    }

    /// Patch side in cells. The small tolerance keeps 1.85 * 0.27 / 0.1
    /// (4.995 in floating point) from being pushed to 6 by rounding noise.
    pub fn patch_side(&self, resolution: f64) -> usize {
        ((self.patch_scale * self.drone_diameter / resolution) - 1e-9)
            .ceil()
            .max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandingPatch {
    /// (column, row) in the map window.
    pub center_cell: (usize, usize),
    pub center_world: [f64; 2],
    pub j_d: f64,
    pub j_un: f64,
    pub cost: f64,
}

impl LandingPatch {
    pub fn report_line(&self) -> String {
        format!(
            "{:.6} {:.6} {:.6} {:.6} {:.6}",
            self.center_world[0], self.center_world[1], self.cost, self.j_d, self.j_un
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Point3,
    pub yaw: f64,
}

/// Row-major per-cell clearance in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Clearance {
    pub width: usize,
    pub height: usize,
    pub meters: Vec<f64>,
}

impl Clearance {
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.meters[row * self.width + col]
    }
}

const FAR: f64 = 1e20;

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let parabola = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = parabola(q, v[k]);
        // z[0] is -inf, so this stops at k = 0 at the latest
        while s <= z[k] {
            k -= 1;
            s = parabola(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance from every cell centre to the nearest Unsafe or
/// Unknown cell of the window, capped at `cap`.
pub fn clearance_transform(map: &ClassMap, cap: f64) -> Clearance {
    let (w, h) = (map.width, map.height);
    let mut d2: Vec<f64> = map
        .classes
        .iter()
        .map(|&c| if c == CellClass::Safe { FAR } else { 0.0 })
        .collect();
    let n = w.max(h);
    let (mut f, mut out, mut v, mut z) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0usize; n],
        vec![0.0; n + 1],
    );
    for r in 0..h {
        let row = &mut d2[r * w..][..w];
        f[..w].copy_from_slice(row);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        row.copy_from_slice(&out[..w]);
    }
    for c in 0..w {
        for r in 0..h {
            f[r] = d2[r * w + c];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for r in 0..h {
            d2[r * w + c] = out[r];
        }
    }
    let meters = d2
        .into_iter()
        .map(|d| {
            if d >= FAR / 2.0 {
                cap
            } else {
                (d.sqrt() * map.resolution).min(cap)
            }
        })
        .collect();
    Clearance {
        width: w,
        height: h,
        meters,
    }
}

/// Centre cells of every `side` x `side` window whose cells are all Safe, in
/// row-major order. For even sides the centre is the lower-right of the
/// four middle cells.
pub fn find_patches(map: &ClassMap, side: usize) -> Vec<(usize, usize)> {
    let (w, h) = (map.width, map.height);
    if side == 0 || side > w || side > h {
        return Vec::new();
    }
    // summed-area table of safe cells, padded by one row and column
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for r in 0..h {
        let mut run = 0;
        for c in 0..w {
            run += (map.classes[r * w + c] == CellClass::Safe) as u32;
            sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + run;
        }
    }
    let full = (side * side) as u32;
    let mut out = Vec::new();
    for r0 in 0..=h - side {
        for c0 in 0..=w - side {
            let (r1, c1) = (r0 + side, c0 + side);
            let s = sat[r1 * (w + 1) + c1] + sat[r0 * (w + 1) + c0]
                - sat[r0 * (w + 1) + c1]
                - sat[r1 * (w + 1) + c0];
            if s == full {
                out.push((c0 + side / 2, r0 + side / 2));
            }
        }
    }
    out
}

pub fn patch_cost(
    center: (usize, usize),
    drone: &DroneState,
    map: &ClassMap,
    clearance: &Clearance,
    cfg: &SelectorConfig,
) -> Result<LandingPatch> {
    let center_world = map.cell_center(center.0, center.1);
    let p = drone.position;
    let j_d =
        ((p.x - center_world[0]).powi(2) + (p.y - center_world[1]).powi(2) + p.z.powi(2)).sqrt();
    let j_un = clearance.at(center.0, center.1);
    if !(j_un > 0.0) {
        return Err(Error::Contract(format!(
            "patch centre {center:?} has zero clearance"
        )));
    }
    let cost = cfg.alpha * j_d + cfg.beta / j_un;
    Ok(LandingPatch {
        center_cell: center,
        center_world,
        j_d,
        j_un,
        cost,
    })
}

/// Lowest-cost patch of a classified map. Ties go to the smaller `j_d`, then
/// to the earlier cell in row-major order.
pub fn select_on_map(
    map: &ClassMap,
    drone: &DroneState,
    cfg: &SelectorConfig,
) -> Result<Option<LandingPatch>> {
    cfg.validate()?;
    let side = cfg.patch_side(map.resolution);
    let centers = find_patches(map, side);
    if centers.is_empty() {
        return Ok(None);
    }
    let clearance = clearance_transform(map, cfg.clearance_cap);
    let mut best: Option<LandingPatch> = None;
    for c in centers {
        let cand = patch_cost(c, drone, map, &clearance, cfg)?;
        let better = match &best {
            None => true,
            Some(b) => cand.cost < b.cost || (cand.cost == b.cost && cand.j_d < b.j_d),
        };
        if better {
            best = Some(cand);
        }
    }
    if let Some(site) = &best {
        let half = side / 2;
        let (c0, r0) = (site.center_cell.0 - half, site.center_cell.1 - half);
        for r in r0..r0 + side {
            for c in c0..c0 + side {
                if map.class(c, r) != CellClass::Safe {
                    return Err(Error::Contract(format!(
                        "selected patch contains non-safe cell ({c}, {r})"
                    )));
                }
            }
        }
    }
    Ok(best)
}

/// Selection on a snapshot of the live grid.
pub fn select_landing_site(
    grid: &GridMap,
    drone: &DroneState,
    cfg: &SelectorConfig,
    params: &GridParams,
) -> Result<Option<LandingPatch>> {
    select_on_map(&export_map(grid, params), drone, cfg)
}

/// Climb-free two-step approach: fly level above the site, then descend.
pub fn landing_waypoints(drone: &DroneState, site: &LandingPatch) -> [Waypoint; 2] {
    let [x, y] = site.center_world;
    [
        Waypoint {
            position: Point3::new(x, y, drone.position.z),
            yaw: drone.yaw,
        },
        Waypoint {
            position: Point3::new(x, y, 0.0),
            yaw: drone.yaw,
        },
    ]
}

/// Map image with the site's centre cell drawn as byte 64.
pub fn annotate_map(map: &ClassMap, site: &LandingPatch) -> Pgm {
    let mut bytes = map.to_bytes();
    bytes[site.center_cell.1 * map.width + site.center_cell.0] = 64;
    Pgm::gray8(map.width, map.height, bytes)
}
