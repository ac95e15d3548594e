//! Cell decompositions of fundamental domains with hyperbolic area weights.
//!
//! Two zones: a uniform Euclidean grid on the disk clipped to the fundamental
//! polygon (bulk), and per-cusp strips in horoball coordinates, uniform in
//! `(u, log v)` so that stencils stay aligned up the cusp. Every stencil slot
//! that leaves the stored cells carries a ghost link: interpolation weights at
//! the folded point plus the folding word, which the field layer turns into a
//! fiber transport.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::geom::{disk_conformal_factor, hyperbolic_distance};
use crate::group::{SurfaceGroup, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Disk,
    Cusp { cusp: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    /// Center in disk coordinates (both zones).
    pub center: Complex64,
    pub chart: Chart,
    /// `(x, y)` in the disk chart, `(u, v)` in a cusp chart.
    pub chart_pos: (f64, f64),
    pub area_hyp: f64,
    pub diameter_hyp: f64,
}

/// Stencil slot: either a stored cell or a ghost link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeighborRef {
    Interior(usize),
    Ghost(usize),
}

/// Equivariant ghost: the field at the unfolded point equals the transport by
/// `word^{-1}` of the interpolated field at the folded sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GhostLink {
    pub sources: Vec<(usize, f64)>,
    pub word: Word,
    /// True when interpolation had to clamp (cutoff row or sparse corner).
    pub clamped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspMeshParams {
    /// Interface level: bulk below, strip cells above.
    pub y0: f64,
    /// Truncation level from the requested cusp area.
    pub v_cut: f64,
    pub du: f64,
    pub ds: f64,
    pub n_u: usize,
    pub n_rows: usize,
    /// Index of cell (row 0, col 0); rows are contiguous, row-major.
    pub first_cell: usize,
}

#[derive(Debug, Clone)]
pub struct HyperbolicMesh {
    pub group: Arc<SurfaceGroup>,
    pub resolution: usize,
    pub cusp_area: f64,
    pub dx: f64,
    pub cells: Vec<Cell>,
    pub neighbors: Vec<[NeighborRef; 4]>,
    pub ghosts: Vec<GhostLink>,
    pub cusp_params: Vec<CuspMeshParams>,
    /// Bulk grid lookup (i, j) -> cell index.
    pub bulk_index: HashMap<(i64, i64), usize>,
    /// Count of clamped interpolations met while building ghost links.
    pub clamped_links: usize,
}

/// Directions of the four stencil slots, in chart coordinates.
pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

impl HyperbolicMesh {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Conformal factor of the hyperbolic metric in the cell's own chart.
    pub fn chart_factor(&self, cell: usize) -> f64 {
        match self.cells[cell].chart {
            Chart::Disk => disk_conformal_factor(self.cells[cell].center),
            Chart::Cusp { .. } => {
                let v = self.cells[cell].chart_pos.1;
                1.0 / (v * v)
            }
        }
    }

    /// Stencil steps `(h_x, h_y)` in the cell's chart; for cusp cells the
    /// second component is the log-v step (use `d/dv = (1/v) d/ds`).
    pub fn cell_steps(&self, cell: usize) -> (f64, f64) {
        match self.cells[cell].chart {
            Chart::Disk => (self.dx, self.dx),
            Chart::Cusp { cusp } => {
                let p = &self.cusp_params[cusp];
                (p.du, p.ds)
            }
        }
    }

    /// True when all four stencil slots are stored cells or exact ghosts.
    pub fn is_interior(&self, cell: usize) -> bool {
        self.neighbors[cell].iter().all(|n| matches!(n, NeighborRef::Interior(_)))
    }

    /// Has at least one non-clamped ghost link (equivariant transfer cell).
    pub fn is_transfer_boundary(&self, cell: usize) -> bool {
        self.neighbors[cell].iter().any(|n| match n {
            NeighborRef::Ghost(g) => !self.ghosts[*g].clamped,
            _ => false,
        })
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area_hyp).sum()
    }

    /// Unfolded disk position of a stencil slot of `cell`.
    pub fn neighbor_point(&self, cell: usize, dir: usize) -> Complex64 {
        let c = &self.cells[cell];
        match c.chart {
            Chart::Disk => {
                let (x, y) = c.chart_pos;
                let (dx, dy) = match dir {
                    EAST => (self.dx, 0.0),
                    WEST => (-self.dx, 0.0),
                    NORTH => (0.0, self.dx),
                    _ => (0.0, -self.dx),
                };
                Complex64::new(x + dx, y + dy)
            }
            Chart::Cusp { cusp } => {
                let p = &self.cusp_params[cusp];
                let (u, v) = c.chart_pos;
                let (u2, v2) = match dir {
                    EAST => (u + p.du, v),
                    WEST => (u - p.du, v),
                    NORTH => (u, v * p.ds.exp()),
                    _ => (u, v * (-p.ds).exp()),
                };
                // continuation in the cell's own corner frame; junction and
                // seam crossings are recovered by folding
                let corner = self.group.cusp_corner_of(cusp, u);
                self.group.cusp_frame_point(cusp, corner, u2, v2)
            }
        }
    }

    /// Interpolation weights for a point already inside the fundamental
    /// polygon. Returns `(sources, clamped)`.
    pub fn interp_at(&self, z: Complex64) -> (Vec<(usize, f64)>, bool) {
        // cusp zones take precedence above their interface level
        for (ci, p) in self.cusp_params.iter().enumerate() {
            if p.n_rows == 0 {
                continue;
            }
            if let Some((found, u, v)) = self.group.cusp_coordinates(z, p.y0) {
                if found == ci {
                    return self.interp_cusp(ci, u, v);
                }
            }
        }
        self.interp_bulk(z)
    }

    pub fn cusp_cell_index(&self, ci: usize, row: usize, col: usize) -> usize {
        let p = &self.cusp_params[ci];
        p.first_cell + row * p.n_u + col
    }

    fn interp_cusp(&self, ci: usize, u: f64, v: f64) -> (Vec<(usize, f64)>, bool) {
        let p = &self.cusp_params[ci];
        let mut clamped = false;
        let s = (v / p.y0).ln() / p.ds - 0.5;
        let mut r0 = s.floor();
        let mut fr = s - r0;
        if r0 < 0.0 {
            r0 = 0.0;
            fr = 0.0;
            clamped = true;
        }
        if r0 as usize >= p.n_rows - 1 {
            if s > (p.n_rows - 1) as f64 {
                clamped = true; // beyond the cutoff row
            }
            r0 = (p.n_rows - 1) as f64;
            fr = 0.0;
        }
        let c = u / p.du - 0.5;
        let mut c0 = c.floor();
        let mut fc = c - c0;
        if c0 < 0.0 {
            c0 = 0.0;
            fc = 0.0;
            clamped = true; // seam margin: nearest column
        }
        if c0 as usize >= p.n_u - 1 {
            c0 = (p.n_u - 1) as f64;
            fc = 0.0;
            clamped = true;
        }
        // column interpolation must not mix corner frames: the stored field
        // jumps by a pairing transport at corner junctions
        let k_query = self.group.cusp_corner_of(ci, u);
        let corner_of_col = |col: f64| self.group.cusp_corner_of(ci, (col + 0.5) * p.du);
        let c0_ok = corner_of_col(c0) == k_query;
        let c1_ok = c0 as usize + 1 < p.n_u && corner_of_col(c0 + 1.0) == k_query;
        match (c0_ok, c1_ok) {
            (true, true) => {}
            (true, false) => {
                fc = 0.0;
                clamped = true;
            }
            (false, true) => {
                c0 += 1.0;
                fc = 0.0;
                clamped = true;
            }
            (false, false) => {
                clamped = true; // corners are many columns wide; keep nearest
                fc = 0.0;
            }
        }
        let (r0, c0) = (r0 as usize, c0 as usize);
        let r1 = (r0 + 1).min(p.n_rows - 1);
        let c1 = (c0 + 1).min(p.n_u - 1);
        let mut out = Vec::with_capacity(4);
        let mut push = |row: usize, col: usize, w: f64| {
            if w > 1e-14 {
                out.push((self.cusp_cell_index(ci, row, col), w));
            }
        };
        push(r0, c0, (1.0 - fr) * (1.0 - fc));
        push(r0, c1, (1.0 - fr) * fc);
        push(r1, c0, fr * (1.0 - fc));
        push(r1, c1, fr * fc);
        (out, clamped)
    }

    fn interp_bulk(&self, z: Complex64) -> (Vec<(usize, f64)>, bool) {
        let gx = (z.re + 1.0) / self.dx - 0.5;
        let gy = (z.im + 1.0) / self.dx - 0.5;
        let i0 = gx.floor() as i64;
        let j0 = gy.floor() as i64;
        let fx = gx - i0 as f64;
        let fy = gy - j0 as f64;
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut total = 0.0;
        for (di, dj, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            if let Some(&idx) = self.bulk_index.get(&(i0 + di, j0 + dj)) {
                out.push((idx, w));
                total += w;
            }
        }
        if total > 0.25 {
            for e in out.iter_mut() {
                e.1 /= total;
            }
            (out, total < 1.0 - 1e-12)
        } else {
            // sparse corner: nearest stored bulk cell in a small ring
            for radius in 0..4i64 {
                let mut best: Option<(usize, f64)> = None;
                for di in -radius..=radius {
                    for dj in -radius..=radius {
                        if di.abs().max(dj.abs()) != radius {
                            continue;
                        }
                        if let Some(&idx) = self.bulk_index.get(&(i0 + di, j0 + dj)) {
                            let d = (self.cells[idx].center - z).norm();
                            if best.map_or(true, |(_, bd)| d < bd) {
                                best = Some((idx, d));
                            }
                        }
                    }
                }
                if let Some((idx, _)) = best {
                    return (vec![(idx, 1.0)], true);
                }
            }
            (vec![], true)
        }
    }

    /// Folds an arbitrary disk point into the polygon and returns the
    /// interpolation sources plus the folding word.
    pub fn sample_sources(&self, z: Complex64) -> Result<(Vec<(usize, f64)>, Word, bool), LabError> {
        let (folded, word) = self.group.fold(z, 512)?;
        let (src, clamped) = self.interp_at(folded);
        if src.is_empty() {
            return Err(LabError::Mesh(format!("no cells near folded point {folded}")));
        }
        Ok((src, word, clamped))
    }
}

/// Classification of a probe point during bulk meshing.
fn in_bulk(group: &SurfaceGroup, exclude_v: &[f64], z: Complex64) -> bool {
    if z.norm() >= 0.999 || !group.contains(z) {
        return false;
    }
    if !group.cusps.is_empty() {
        if let Some((ci, _, v)) = group.cusp_coordinates(z, exclude_v.iter().cloned().fold(f64::INFINITY, f64::min)) {
            if v > exclude_v[ci] {
                return false;
            }
        }
    }
    true
}

/// Recursive hyperbolic area of `rect ∩ bulk region` (midpoint quadrature on
/// fully interior rectangles, subdivision along the boundary).
fn bulk_area(group: &SurfaceGroup, exclude_v: &[f64], x0: f64, y0: f64, w: f64, depth: usize) -> f64 {
    let probes = [
        (x0 + 0.01 * w, y0 + 0.01 * w),
        (x0 + 0.99 * w, y0 + 0.01 * w),
        (x0 + 0.01 * w, y0 + 0.99 * w),
        (x0 + 0.99 * w, y0 + 0.99 * w),
        (x0 + 0.5 * w, y0 + 0.5 * w),
    ];
    let inside: Vec<bool> =
        probes.iter().map(|&(x, y)| in_bulk(group, exclude_v, Complex64::new(x, y))).collect();
    let all = inside.iter().all(|&b| b);
    let none = inside.iter().all(|&b| !b);
    if none && depth == 0 {
        return 0.0;
    }
    if all {
        // 2x2 midpoint quadrature of the conformal factor
        let mut s = 0.0;
        for &ox in &[0.25, 0.75] {
            for &oy in &[0.25, 0.75] {
                s += disk_conformal_factor(Complex64::new(x0 + ox * w, y0 + oy * w));
            }
        }
        return s / 4.0 * w * w;
    }
    if depth >= 4 {
        // finest level: count a 3x3 sample
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let z = Complex64::new(x0 + (i as f64 + 0.5) * w / 3.0, y0 + (j as f64 + 0.5) * w / 3.0);
                if in_bulk(group, exclude_v, z) {
                    s += disk_conformal_factor(z);
                }
            }
        }
        return s / 9.0 * w * w;
    }
    let h = w / 2.0;
    bulk_area(group, exclude_v, x0, y0, h, depth + 1)
        + bulk_area(group, exclude_v, x0 + h, y0, h, depth + 1)
        + bulk_area(group, exclude_v, x0, y0 + h, h, depth + 1)
        + bulk_area(group, exclude_v, x0 + h, y0 + h, h, depth + 1)
}

/// Builds the mesh for a group with a fundamental polygon.
///
/// `resolution` is the number of grid cells across `[-1, 1]`; `cusp_area` is
/// the total hyperbolic area removed at the cusps (split evenly among them).
pub fn build_mesh(group: &Arc<SurfaceGroup>, resolution: usize, cusp_area: f64) -> Result<HyperbolicMesh, LabError> {
    if resolution < 8 {
        return Err(LabError::Validation("mesh resolution must be at least 8".into()));
    }
    if group.sides.is_empty() {
        return Err(LabError::Mesh("group has no fundamental polygon to mesh".into()));
    }
    if !group.cusps.is_empty() && cusp_area <= 0.0 {
        return Err(LabError::Validation("cusp area cutoff must be positive for cusped groups".into()));
    }
    let dx = 2.0 / resolution as f64;
    let n_cusps = group.cusps.len();

    // per-cusp strip parameters
    let mut cusp_params: Vec<CuspMeshParams> = Vec::with_capacity(n_cusps);
    let mut exclude_v: Vec<f64> = Vec::with_capacity(n_cusps);
    for chart in &group.cusps {
        let w = chart.width;
        let area_per_cusp = cusp_area / n_cusps as f64;
        let v_cut = w / area_per_cusp;
        let y0 = w / 2.0;
        if v_cut <= y0 * (1.0 + dx) {
            // shallow cutoff: bulk handles everything up to v_cut
            cusp_params.push(CuspMeshParams { y0: v_cut, v_cut, du: 0.0, ds: 0.0, n_u: 0, n_rows: 0, first_cell: 0 });
            exclude_v.push(v_cut);
        } else {
            let n_rows = ((v_cut / y0).ln() / dx).ceil().max(1.0) as usize;
            let ds = (v_cut / y0).ln() / n_rows as f64;
            // corner junctions sit at integer u for the built-in families;
            // snapping du = 1/m keeps junctions on column edges so cell
            // centers are never frame-ambiguous
            let per_unit = (1.0 / (y0 * ds)).round().max(2.0);
            let n_u = ((w * per_unit).round() as usize).max(4);
            let du = w / n_u as f64;
            cusp_params.push(CuspMeshParams { y0, v_cut, du, ds, n_u, n_rows, first_cell: 0 });
            exclude_v.push(y0);
        }
    }

    // bulk cells
    let mut cells: Vec<Cell> = Vec::new();
    let mut bulk_index: HashMap<(i64, i64), usize> = HashMap::new();
    for i in 0..resolution as i64 {
        for j in 0..resolution as i64 {
            let x0 = -1.0 + i as f64 * dx;
            let y0 = -1.0 + j as f64 * dx;
            let center = Complex64::new(x0 + dx / 2.0, y0 + dx / 2.0);
            if !in_bulk(group, &exclude_v, center) {
                continue;
            }
            let area = bulk_area(group, &exclude_v, x0, y0, dx, 0);
            if area < 1e-14 {
                return Err(LabError::Mesh(format!(
                    "degenerate clipped cell at ({}, {}) with area {area:.3e}",
                    center.re, center.im
                )));
            }
            let lam = disk_conformal_factor(center);
            bulk_index.insert((i, j), cells.len());
            cells.push(Cell {
                center,
                chart: Chart::Disk,
                chart_pos: (center.re, center.im),
                area_hyp: area,
                diameter_hyp: dx * (2.0 * lam).sqrt(),
            });
        }
    }
    if cells.is_empty() {
        return Err(LabError::Mesh("no bulk cells inside the fundamental polygon".into()));
    }

    // boundary slivers: grid cells whose center fell outside still clip a
    // piece of the domain; attribute that area to the nearest stored neighbor
    // so the total stays an honest quadrature of the meshed region
    let occupied: Vec<(i64, i64)> = bulk_index.keys().copied().collect();
    let mut sliver_targets: Vec<(usize, f64)> = Vec::new();
    let mut visited: std::collections::HashSet<(i64, i64)> = occupied.iter().copied().collect();
    for &(i, j) in &occupied {
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
            let key = (i + di, j + dj);
            if visited.contains(&key) || bulk_index.contains_key(&key) {
                continue;
            }
            visited.insert(key);
            let x0 = -1.0 + key.0 as f64 * dx;
            let y0 = -1.0 + key.1 as f64 * dx;
            let area = bulk_area(group, &exclude_v, x0, y0, dx, 1);
            if area <= 0.0 {
                continue;
            }
            let center = Complex64::new(x0 + dx / 2.0, y0 + dx / 2.0);
            let mut best: Option<(usize, f64)> = None;
            for (ddi, ddj) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                if let Some(&idx) = bulk_index.get(&(key.0 + ddi, key.1 + ddj)) {
                    let d = (cells[idx].center - center).norm();
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((idx, d));
                    }
                }
            }
            if let Some((idx, _)) = best {
                sliver_targets.push((idx, area));
            }
        }
    }
    for (idx, area) in sliver_targets {
        cells[idx].area_hyp += area;
    }

    // cusp strip cells (row-major, bottom row first)
    for (ci, p) in cusp_params.iter_mut().enumerate() {
        if p.n_rows == 0 {
            continue;
        }
        p.first_cell = cells.len();
        for m in 0..p.n_rows {
            let v_lo = p.y0 * ((m as f64) * p.ds).exp();
            let v_hi = p.y0 * ((m as f64 + 1.0) * p.ds).exp();
            let v_c = (v_lo * v_hi).sqrt();
            let area_cell = p.du * (1.0 / v_lo - 1.0 / v_hi);
            for n in 0..p.n_u {
                let u_c = (n as f64 + 0.5) * p.du;
                let center = group.cusp_point(ci, u_c, v_c);
                cells.push(Cell {
                    center,
                    chart: Chart::Cusp { cusp: ci },
                    chart_pos: (u_c, v_c),
                    area_hyp: area_cell,
                    diameter_hyp: ((p.du / v_c).powi(2) + p.ds.powi(2)).sqrt(),
                });
            }
        }
    }

    let mut mesh = HyperbolicMesh {
        group: Arc::clone(group),
        resolution,
        cusp_area,
        dx,
        cells,
        neighbors: Vec::new(),
        ghosts: Vec::new(),
        cusp_params,
        bulk_index,
        clamped_links: 0,
    };

    // stencil wiring
    let mut neighbors = Vec::with_capacity(mesh.cells.len());
    let mut ghosts: Vec<GhostLink> = Vec::new();
    let mut ghost_cache: HashMap<(u64, u64), usize> = HashMap::new();
    for idx in 0..mesh.cells.len() {
        let mut slots = [NeighborRef::Interior(0); 4];
        for dir in 0..4 {
            slots[dir] = direct_neighbor(&mesh, idx, dir).map(NeighborRef::Interior).unwrap_or_else(|| {
                let p = mesh.neighbor_point(idx, dir);
                let key = (p.re.to_bits(), p.im.to_bits());
                if let Some(&g) = ghost_cache.get(&key) {
                    return NeighborRef::Ghost(g);
                }
                let link = match mesh.sample_sources(p) {
                    Ok((sources, word, clamped)) => GhostLink { sources, word, clamped },
                    Err(_) => GhostLink { sources: vec![(idx, 1.0)], word: Word::default(), clamped: true },
                };
                ghosts.push(link);
                ghost_cache.insert(key, ghosts.len() - 1);
                NeighborRef::Ghost(ghosts.len() - 1)
            });
        }
        neighbors.push(slots);
    }
    mesh.clamped_links = ghosts.iter().filter(|g| g.clamped).count();
    mesh.neighbors = neighbors;
    mesh.ghosts = ghosts;
    Ok(mesh)
}

/// Aligned stored neighbor in the same chart zone, when it exists.
fn direct_neighbor(mesh: &HyperbolicMesh, idx: usize, dir: usize) -> Option<usize> {
    match mesh.cells[idx].chart {
        Chart::Disk => {
            let (x, y) = mesh.cells[idx].chart_pos;
            let i = ((x + 1.0) / mesh.dx - 0.5).round() as i64;
            let j = ((y + 1.0) / mesh.dx - 0.5).round() as i64;
            let (i2, j2) = match dir {
                EAST => (i + 1, j),
                WEST => (i - 1, j),
                NORTH => (i, j + 1),
                _ => (i, j - 1),
            };
            mesh.bulk_index.get(&(i2, j2)).copied()
        }
        Chart::Cusp { cusp } => {
            let p = &mesh.cusp_params[cusp];
            let (u, v) = mesh.cells[idx].chart_pos;
            let col = (u / p.du - 0.5).round() as i64;
            let row = ((v / p.y0).ln() / p.ds - 0.5).round() as i64;
            let (row2, col2) = match dir {
                EAST => (row, col + 1),
                WEST => (row, col - 1),
                NORTH => (row + 1, col),
                _ => (row - 1, col),
            };
            if row2 < 0 || row2 >= p.n_rows as i64 || col2 < 0 || col2 >= p.n_u as i64 {
                return None;
            }
            // a corner junction between the columns means the neighbor stores
            // a transported frame: route it through a ghost link instead
            let u2 = (col2 as f64 + 0.5) * p.du;
            if mesh.group.cusp_corner_of(cusp, u) != mesh.group.cusp_corner_of(cusp, u2) {
                return None;
            }
            Some(mesh.cusp_cell_index(cusp, row2 as usize, col2 as usize))
        }
    }
}

/// A closed horocircle around a cusp with its sampled lift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Horocircle {
    pub cusp: usize,
    /// Horoball level: the horocircle is `{v = level}` in the cusp chart.
    pub level: f64,
    /// Max hyperbolic distance from the basepoint along the circle.
    pub delta: f64,
    /// One fundamental period of the lift, `u` from 0 to the cusp width;
    /// the endpoint satisfies `points[last] = seam(points[0])`.
    pub points: Vec<Complex64>,
    pub us: Vec<f64>,
}

/// Builds the horocircle family at the given `v` levels.
pub fn horocircle_family(
    group: &SurfaceGroup,
    cusp: usize,
    levels: &[f64],
    samples: usize,
) -> Result<Vec<Horocircle>, LabError> {
    let chart = group
        .cusps
        .get(cusp)
        .ok_or_else(|| LabError::Validation(format!("no cusp chart {cusp}")))?;
    let seam = chart.seam_word.matrix(&group.generators);
    if !seam.is_parabolic(1e-9) {
        return Err(LabError::GroupSpec("cusp seam word is not parabolic".into()));
    }
    let w = chart.width;
    let mut out = Vec::with_capacity(levels.len());
    for &v in levels {
        if v <= 0.0 {
            return Err(LabError::Validation("horocircle level must be positive".into()));
        }
        let us: Vec<f64> = (0..=samples).map(|j| j as f64 * w / samples as f64).collect();
        let points: Vec<Complex64> = us.iter().map(|&u| group.cusp_point_unfolded(cusp, u, v)).collect();
        // any two points on the closed horocircle are joined along the shorter
        // arc, so half the hyperbolic length bounds the diameter downstairs
        let length: f64 = (1..points.len())
            .map(|j| hyperbolic_distance(points[j - 1], points[j]))
            .sum();
        let delta = length / 2.0;
        out.push(Horocircle { cusp, level: v, delta, points, us });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt_group() -> Arc<SurfaceGroup> {
        Arc::new(SurfaceGroup::punctured_torus().unwrap())
    }

    #[test]
    fn punctured_torus_area_converges() {
        let group = pt_group();
        let mesh = build_mesh(&group, 48, 0.05).unwrap();
        let total = mesh.total_area();
        // |chi| = 1: full area 2pi, removed 0.05, quadrature budget 2%
        assert!(total <= 2.0 * PI + 1e-9, "area {total} exceeds 2pi");
        assert!(total >= 2.0 * PI - 0.05 - 0.02 * 2.0 * PI, "area {total} too small");
    }

    #[test]
    fn genus2_area_within_two_percent() {
        let group = Arc::new(SurfaceGroup::closed_genus2().unwrap());
        let mesh = build_mesh(&group, 64, 0.0).unwrap();
        let total = mesh.total_area();
        let expect = 4.0 * PI;
        assert!((total - expect).abs() / expect < 0.02, "area {total} vs {expect}");
    }

    #[test]
    fn doubling_resolution_halves_diameters() {
        let group = pt_group();
        let coarse = build_mesh(&group, 24, 0.2).unwrap();
        let fine = build_mesh(&group, 48, 0.2).unwrap();
        let dmax = |m: &HyperbolicMesh| m.cells.iter().map(|c| c.diameter_hyp).fold(0.0, f64::max);
        assert!(dmax(&fine) <= 0.55 * dmax(&coarse), "difference {} vs {}", dmax(&fine), dmax(&coarse));
    }

    #[test]
    fn boundary_cells_have_transfers() {
        let group = pt_group();
        let mesh = build_mesh(&group, 32, 0.3).unwrap();
        let mut transfer = 0;
        for idx in 0..mesh.cell_count() {
            for n in &mesh.neighbors[idx] {
                if let NeighborRef::Ghost(g) = n {
                    let link = &mesh.ghosts[*g];
                    if !link.word.0.is_empty() {
                        // transfer words are built from side-pairing letters
                        for l in &link.word.0 {
                            assert!(l.gen < group.generators.len());
                        }
                        transfer += 1;
                    }
                    assert!(!link.sources.is_empty());
                }
            }
        }
        assert!(transfer > 0, "expected side-pairing transfers on the boundary");
    }

    #[test]
    fn stencils_are_complete_and_weighted() {
        let group = pt_group();
        let mesh = build_mesh(&group, 32, 0.3).unwrap();
        for idx in 0..mesh.cell_count() {
            for n in &mesh.neighbors[idx] {
                if let NeighborRef::Ghost(g) = n {
                    let w: f64 = mesh.ghosts[*g].sources.iter().map(|(_, w)| w).sum();
                    assert!((w - 1.0).abs() < 1e-9, "ghost weights sum to {w}");
                }
            }
        }
        // a decent share of cells are fully interior
        let interior = (0..mesh.cell_count()).filter(|&i| mesh.is_interior(i)).count();
        assert!(interior * 2 > mesh.cell_count());
    }

    #[test]
    fn horocircle_endpoints_and_monotone_delta() {
        let group = pt_group();
        let levels: Vec<f64> = (0..10).map(|k| 4.0 * 1.4f64.powi(k)).collect();
        let circles = horocircle_family(&group, 0, &levels, 64).unwrap();
        let seam = group.cusps[0].seam_word.matrix(&group.generators);
        for hc in &circles {
            let img = seam.apply(hc.points[0]);
            assert!((img - *hc.points.last().unwrap()).norm() < 1e-8, "endpoint relation fails");
        }
        for k in 1..circles.len() {
            assert!(circles[k].delta < circles[k - 1].delta, "delta not strictly decreasing");
        }
        // polyline hyperbolic length tracks the chart length W/v
        for hc in &circles {
            let mut len = 0.0;
            for j in 1..hc.points.len() {
                len += hyperbolic_distance(hc.points[j - 1], hc.points[j]);
            }
            let expect = group.cusps[0].width / hc.level;
            assert!((len - expect).abs() < 0.02 * expect + 1e-6, "length {len} vs {expect}");
        }
    }

    #[test]
    fn interpolation_recovers_cell_centers() {
        let group = pt_group();
        let mesh = build_mesh(&group, 32, 0.3).unwrap();
        for idx in (0..mesh.cell_count()).step_by(17) {
            let (src, _clamped) = mesh.interp_at(mesh.cells[idx].center);
            let w: f64 = src
                .iter()
                .filter(|(i, _)| *i == idx)
                .map(|(_, w)| *w)
                .sum();
            assert!(w > 0.95, "center interpolation should hit its own cell (got {w})");
        }
    }

    #[test]
    fn rejects_low_resolution_and_missing_polygon() {
        let group = pt_group();
        assert!(build_mesh(&group, 4, 0.1).is_err());
        let custom = Arc::new(
            SurfaceGroup::custom(
                vec!["A".into(), "B".into()],
                vec![[[1.0, 1.0], [1.0, 2.0]], [[1.0, -1.0], [-1.0, 2.0]]],
                vec![],
                vec![crate::group::Word(vec![
                    crate::group::Letter { gen: 0, inv: false },
                    crate::group::Letter { gen: 1, inv: false },
                    crate::group::Letter { gen: 0, inv: true },
                    crate::group::Letter { gen: 1, inv: true },
                ])],
                1,
            )
            .unwrap(),
        );
        assert!(build_mesh(&custom, 32, 0.1).is_err());
    }
}
