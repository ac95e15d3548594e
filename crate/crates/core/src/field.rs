//! Harmonic fiber-measure fields on the suspension foliation.
//!
//! A field stores, per mesh cell, the binned fiber measure of mass 2pi whose
//! densities are leafwise harmonic and equivariant across the fundamental
//! domain boundary. The solver runs damped Jacobi sweeps of the conformal
//! 5-point stencil with mass-conservative pushforward transfer at every ghost
//! link and per-sweep renormalization to mass 2pi.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{detect_finite_orbit, CircleLift, Representation};
use crate::error::LabError;
use crate::geom::poisson_kernel;
use crate::mesh::{Chart, HyperbolicMesh, NeighborRef, EAST, NORTH, SOUTH, WEST};

/// Discretized disintegration of a harmonic measure: per-cell fiber bin
/// masses (summing to 2pi) against the uniform transverse weights `nu`.
#[derive(Debug, Clone)]
pub struct FiberMeasureField {
    pub mesh: Arc<HyperbolicMesh>,
    pub t_bins: usize,
    /// Cell-major bin masses, `masses[cell * t_bins + k]`.
    pub masses: Vec<f64>,
    /// Transverse weights per fiber bin; uniform with total 2pi.
    pub nu: Vec<f64>,
    pub solver_tol: f64,
}

/// Outcome metadata of a solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub residual_history: Vec<f64>,
    pub finite_orbit_advisory: Option<Vec<f64>>,
    /// Minimum bin density seen in the final field.
    pub min_density: f64,
    /// Set when some bin density fell below the atomic-collapse floor.
    pub near_atomic: bool,
}

impl FiberMeasureField {
    pub fn bin_width(&self) -> f64 {
        TAU / self.t_bins as f64
    }

    pub fn cell_masses(&self, cell: usize) -> &[f64] {
        &self.masses[cell * self.t_bins..(cell + 1) * self.t_bins]
    }

    pub fn density(&self, cell: usize, bin: usize) -> f64 {
        self.masses[cell * self.t_bins + bin] / self.bin_width()
    }

    pub fn cell_mass(&self, cell: usize) -> f64 {
        self.cell_masses(cell).iter().sum()
    }

    /// Fiber bin centers.
    pub fn bin_centers(&self) -> Vec<f64> {
        let dt = self.bin_width();
        (0..self.t_bins).map(|k| (k as f64 + 0.5) * dt).collect()
    }

    /// Cumulative fiber coordinate `phi(z, t)` of a cell as a circle lift
    /// (breakpoints at bin edges, endpoint renormalized to exactly 2pi).
    pub fn phi_lift(&self, cell: usize) -> Result<CircleLift, LabError> {
        phi_from_masses(self.cell_masses(cell))
    }

    /// Index of the cell whose center is nearest to the disk origin.
    pub fn base_cell(&self) -> usize {
        nearest_cell(&self.mesh, Complex64::new(0.0, 0.0))
    }
}

pub(crate) fn nearest_cell(mesh: &HyperbolicMesh, z: Complex64) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (i, c) in mesh.cells.iter().enumerate() {
        let d = (c.center - z).norm();
        if d < bd {
            bd = d;
            best = i;
        }
    }
    best
}

pub(crate) fn phi_from_masses(masses: &[f64]) -> Result<CircleLift, LabError> {
    let t = masses.len();
    let dt = TAU / t as f64;
    let mut xs = Vec::with_capacity(t);
    let mut ys = Vec::with_capacity(t);
    let mut acc = 0.0;
    // bins below the floor keep a representable slope so the cumulative
    // stays strictly monotone and invertible
    let floor = 1e-12;
    for (k, &m) in masses.iter().enumerate() {
        if m < 0.0 {
            return Err(LabError::CircleMap(format!("negative bin mass {m} at bin {k}")));
        }
        xs.push(k as f64 * dt);
        ys.push(acc);
        acc += m.max(floor);
    }
    let scale = TAU / acc;
    for y in ys.iter_mut() {
        *y *= scale;
    }
    CircleLift::new(xs, ys)
}

/// Mass-conservative rebinning operator of a fixed circle map on the uniform
/// bin grid, precomputed as a sparse matrix over source bins.
#[derive(Debug, Clone)]
pub struct Transport {
    t: usize,
    offsets: Vec<u32>,
    entries: Vec<(u32, f64)>,
}

impl Transport {
    pub fn from_lift(lift: &CircleLift, t: usize) -> Self {
        let dt = TAU / t as f64;
        let mut offsets = Vec::with_capacity(t + 1);
        let mut entries: Vec<(u32, f64)> = Vec::new();
        offsets.push(0u32);
        let mut a = lift.eval(0.0);
        for k in 0..t {
            let b = lift.eval((k + 1) as f64 * dt);
            let len = b - a;
            debug_assert!(len > 0.0);
            let shift = TAU * (a / TAU).floor();
            let (lo0, hi0) = (a - shift, b - shift);
            let mut j = (lo0 / dt).floor() as i64;
            let mut lo = lo0;
            while lo < hi0 - 1e-300 {
                let hi = ((j + 1) as f64 * dt).min(hi0);
                let frac = (hi - lo) / len;
                if frac > 0.0 {
                    entries.push(((j.rem_euclid(t as i64)) as u32, frac));
                }
                lo = hi;
                j += 1;
            }
            offsets.push(entries.len() as u32);
            a = b;
        }
        Transport { t, offsets, entries }
    }

    pub fn identity(t: usize) -> Self {
        Transport {
            t,
            offsets: (0..=t as u32).collect(),
            entries: (0..t as u32).map(|k| (k, 1.0)).collect(),
        }
    }

    /// out[j] = sum_k src[k] * fraction(k -> j); preserves total mass.
    pub fn apply(&self, src: &[f64], out: &mut [f64]) {
        debug_assert_eq!(src.len(), self.t);
        out.fill(0.0);
        for k in 0..self.t {
            let m = src[k];
            if m == 0.0 {
                continue;
            }
            for &(j, f) in &self.entries[self.offsets[k] as usize..self.offsets[k + 1] as usize] {
                out[j as usize] += m * f;
            }
        }
    }
}

/// Builds the transports of all ghost links: the ghost measure is the
/// pushforward by `rho(word)^{-1}` of the interpolated source measure.
pub fn ghost_transports(
    mesh: &HyperbolicMesh,
    rep: &Representation,
    t_bins: usize,
) -> Result<Vec<Option<Arc<Transport>>>, LabError> {
    let mut cache: HashMap<Vec<(usize, bool)>, Arc<Transport>> = HashMap::new();
    let mut out = Vec::with_capacity(mesh.ghosts.len());
    for link in &mesh.ghosts {
        if link.word.0.is_empty() {
            out.push(None);
            continue;
        }
        let key: Vec<(usize, bool)> = link.word.0.iter().map(|l| (l.gen, l.inv)).collect();
        let transport = match cache.get(&key) {
            Some(t) => Arc::clone(t),
            None => {
                let lift = rep.evaluate_word(&link.word)?.inverse();
                let t = Arc::new(Transport::from_lift(&lift, t_bins));
                cache.insert(key, Arc::clone(&t));
                t
            }
        };
        out.push(Some(transport));
    }
    Ok(out)
}

/// Gathers the bin masses a stencil slot sees (interior cell or transported
/// ghost) into `out`.
pub fn neighbor_masses(
    field_masses: &[f64],
    t: usize,
    mesh: &HyperbolicMesh,
    transports: &[Option<Arc<Transport>>],
    slot: NeighborRef,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    match slot {
        NeighborRef::Interior(n) => {
            out.copy_from_slice(&field_masses[n * t..(n + 1) * t]);
        }
        NeighborRef::Ghost(g) => {
            let link = &mesh.ghosts[g];
            scratch.fill(0.0);
            for &(src, w) in &link.sources {
                for k in 0..t {
                    scratch[k] += w * field_masses[src * t + k];
                }
            }
            match &transports[g] {
                None => out.copy_from_slice(scratch),
                Some(tr) => tr.apply(scratch, out),
            }
        }
    }
}

/// Jacobi stencil weights (E, W, N, S) of a cell in its own chart; positive
/// and summing to 1. Bulk: plain 4-average (Euclidean-harmonic by conformal
/// invariance). Cusp strips in (u, s = log v): from
/// `v^2 f_uu + f_ss - f_s = 0`.
pub fn stencil_weights(mesh: &HyperbolicMesh, cell: usize) -> [f64; 4] {
    match mesh.cells[cell].chart {
        Chart::Disk => [0.25; 4],
        Chart::Cusp { cusp } => {
            let p = &mesh.cusp_params[cusp];
            let v = mesh.cells[cell].chart_pos.1;
            let a = v * v / (p.du * p.du);
            let bn = 1.0 / (p.ds * p.ds) - 1.0 / (2.0 * p.ds);
            let bs = 1.0 / (p.ds * p.ds) + 1.0 / (2.0 * p.ds);
            let denom = 2.0 * a + bn + bs;
            [a / denom, a / denom, bn / denom, bs / denom]
        }
    }
}

/// The exact maximal field of the Fuchsian action: the Poisson kernel sampled
/// at cell centers and bin centers, with per-cell mass renormalized to 2pi.
pub fn exact_fuchsian_field(mesh: &Arc<HyperbolicMesh>, t_bins: usize) -> FiberMeasureField {
    let dt = TAU / t_bins as f64;
    let mut masses = vec![0.0; mesh.cell_count() * t_bins];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let mut total = 0.0;
        for k in 0..t_bins {
            let t = (k as f64 + 0.5) * dt;
            let m = poisson_kernel(cell.center, t) * dt;
            masses[c * t_bins + k] = m;
            total += m;
        }
        let scale = TAU / total;
        for k in 0..t_bins {
            masses[c * t_bins + k] *= scale;
        }
    }
    FiberMeasureField {
        mesh: Arc::clone(mesh),
        t_bins,
        masses,
        nu: vec![dt; t_bins],
        solver_tol: 0.0,
    }
}

/// Solver options for [`solve_harmonic_field`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub damping: f64,
    /// Coarse-to-fine start from halved resolutions (still damped Jacobi).
    pub nested: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-6, max_sweeps: 40_000, damping: 1.0, nested: true }
    }
}

/// Solves for a harmonic equivariant fiber measure by damped Jacobi sweeps.
pub fn solve_harmonic_field(
    rep: &Representation,
    mesh: &Arc<HyperbolicMesh>,
    t_bins: usize,
    opts: &SolveOptions,
) -> Result<(FiberMeasureField, SolveReport), LabError> {
    if !t_bins.is_power_of_two() || t_bins < 64 {
        return Err(LabError::Validation("fiber bins must be a power of two >= 64".into()));
    }
    let advisory = detect_finite_orbit(rep, 12);

    // nested start: solve a coarser mesh of the same domain first
    let mut init: Option<Vec<f64>> = None;
    if opts.nested && mesh.resolution >= 24 {
        let coarse_res = mesh.resolution / 2;
        let coarse_mesh = Arc::new(crate::mesh::build_mesh(&mesh.group, coarse_res, mesh.cusp_area)?);
        let coarse_opts = SolveOptions { tol: opts.tol * 4.0, ..opts.clone() };
        let (coarse, _) = solve_harmonic_field(rep, &coarse_mesh, t_bins, &coarse_opts)?;
        let mut start = vec![0.0; mesh.cell_count() * t_bins];
        for (c, cell) in mesh.cells.iter().enumerate() {
            let (src, _) = coarse_mesh.interp_at(cell.center);
            let row = &mut start[c * t_bins..(c + 1) * t_bins];
            if src.is_empty() {
                row.fill(TAU / t_bins as f64);
            } else {
                for &(s, w) in &src {
                    for k in 0..t_bins {
                        row[k] += w * coarse.masses[s * t_bins + k];
                    }
                }
                let total: f64 = row.iter().sum();
                let scale = TAU / total;
                row.iter_mut().for_each(|m| *m *= scale);
            }
        }
        init = Some(start);
    }

    let (masses, report) = jacobi_solve(rep, mesh, t_bins, opts, init, advisory)?;
    let field = FiberMeasureField {
        mesh: Arc::clone(mesh),
        t_bins,
        masses,
        nu: vec![TAU / t_bins as f64; t_bins],
        solver_tol: opts.tol,
    };
    Ok((field, report))
}

fn jacobi_solve(
    rep: &Representation,
    mesh: &Arc<HyperbolicMesh>,
    t: usize,
    opts: &SolveOptions,
    init: Option<Vec<f64>>,
    advisory: Option<Vec<f64>>,
) -> Result<(Vec<f64>, SolveReport), LabError> {
    let n = mesh.cell_count();
    let transports = ghost_transports(mesh, rep, t)?;
    let weights: Vec<[f64; 4]> = (0..n).map(|c| stencil_weights(mesh, c)).collect();
    let mut cur = init.unwrap_or_else(|| vec![TAU / t as f64; n * t]);
    let mut next = vec![0.0; n * t];
    let mut history: Vec<f64> = Vec::new();
    let mut converged_at = None;

    for sweep in 0..opts.max_sweeps {
        let residual: f64 = next
            .par_chunks_mut(t)
            .enumerate()
            .map(|(c, out)| {
                let mut gathered = vec![0.0; t];
                let mut scratch = vec![0.0; t];
                let mut acc = vec![0.0; t];
                for dir in [EAST, WEST, NORTH, SOUTH] {
                    neighbor_masses(&cur, t, mesh, &transports, mesh.neighbors[c][dir], &mut scratch, &mut gathered);
                    let w = weights[c][dir];
                    for k in 0..t {
                        acc[k] += w * gathered[k];
                    }
                }
                // renormalize to fiber mass 2pi
                let total: f64 = acc.iter().sum();
                let scale = TAU / total;
                let mut delta = 0.0;
                let old = &cur[c * t..(c + 1) * t];
                for k in 0..t {
                    let target = acc[k] * scale;
                    let v = old[k] + opts.damping * (target - old[k]);
                    delta += (v - old[k]).abs();
                    out[k] = v;
                }
                delta / TAU
            })
            .reduce(|| 0.0f64, f64::max);
        std::mem::swap(&mut cur, &mut next);
        if sweep % 8 == 0 || residual <= opts.tol {
            history.push(residual);
        }
        if residual <= opts.tol {
            converged_at = Some(sweep + 1);
            break;
        }
    }

    if converged_at.is_none() {
        let last = history.last().copied().unwrap_or(f64::NAN);
        return Err(LabError::NonConvergence { sweeps: opts.max_sweeps, last_residual: last, history });
    }

    let dt = TAU / t as f64;
    let min_density = cur.iter().cloned().fold(f64::INFINITY, f64::min) / dt;
    Ok((
        cur,
        SolveReport {
            sweeps: converged_at.unwrap(),
            residual_history: history,
            finite_orbit_advisory: advisory,
            min_density,
            near_atomic: min_density < 1e-12,
        },
    ))
}

/// Discrete leafwise-harmonic residual on interior cells: max over cells of
/// the L1 stencil defect of the bin masses, relative to the fiber mass.
pub fn harmonic_residual(field: &FiberMeasureField, rep: &Representation) -> Result<f64, LabError> {
    let mesh = &field.mesh;
    let t = field.t_bins;
    let transports = ghost_transports(mesh, rep, t)?;
    let mut worst = 0.0f64;
    let mut gathered = vec![0.0; t];
    let mut scratch = vec![0.0; t];
    let mut acc = vec![0.0; t];
    for c in 0..mesh.cell_count() {
        if !mesh.is_interior(c) {
            continue;
        }
        let w = stencil_weights(mesh, c);
        acc.fill(0.0);
        for dir in [EAST, WEST, NORTH, SOUTH] {
            neighbor_masses(&field.masses, t, mesh, &transports, mesh.neighbors[c][dir], &mut scratch, &mut gathered);
            for k in 0..t {
                acc[k] += w[dir] * gathered[k];
            }
        }
        let old = field.cell_masses(c);
        let defect: f64 = (0..t).map(|k| (acc[k] - old[k]).abs()).sum();
        worst = worst.max(defect / TAU);
    }
    Ok(worst)
}

/// Harnack gradient report: `|d log h|_hyp` by central differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnackReport {
    pub max_gradient: f64,
    pub argmax_cell: usize,
    /// Per-cell maxima over fiber bins (NaN on cells without clean stencils).
    pub per_cell_max: Vec<f64>,
}

pub fn harnack_check(field: &FiberMeasureField, rep: &Representation) -> Result<HarnackReport, LabError> {
    let mesh = &field.mesh;
    let t = field.t_bins;
    let transports = ghost_transports(mesh, rep, t)?;
    let mut per_cell = vec![f64::NAN; mesh.cell_count()];
    let mut max_gradient = 0.0f64;
    let mut argmax = 0;
    let mut east = vec![0.0; t];
    let mut west = vec![0.0; t];
    let mut north = vec![0.0; t];
    let mut south = vec![0.0; t];
    let mut scratch = vec![0.0; t];
    for c in 0..mesh.cell_count() {
        // interior cells only: transported ghosts rebin (and so smooth)
        // concentrated measures, which corrupts log-gradients
        if !mesh.is_interior(c) {
            continue;
        }
        neighbor_masses(&field.masses, t, mesh, &transports, mesh.neighbors[c][EAST], &mut scratch, &mut east);
        neighbor_masses(&field.masses, t, mesh, &transports, mesh.neighbors[c][WEST], &mut scratch, &mut west);
        neighbor_masses(&field.masses, t, mesh, &transports, mesh.neighbors[c][NORTH], &mut scratch, &mut north);
        neighbor_masses(&field.masses, t, mesh, &transports, mesh.neighbors[c][SOUTH], &mut scratch, &mut south);
        let (hx, hy) = mesh.cell_steps(c);
        let sqrt_lambda = mesh.chart_factor(c).sqrt();
        let me = field.cell_masses(c);
        let mut cell_max = 0.0f64;
        for k in 0..t {
            if me[k] <= 0.0 {
                continue;
            }
            let ge = (east[k].max(1e-300).ln() - west[k].max(1e-300).ln()) / (2.0 * hx);
            let mut gn = (north[k].max(1e-300).ln() - south[k].max(1e-300).ln()) / (2.0 * hy);
            if let Chart::Cusp { .. } = mesh.cells[c].chart {
                // d/dv = (1/v) d/ds
                gn /= mesh.cells[c].chart_pos.1;
            }
            let g = (ge * ge + gn * gn).sqrt() / sqrt_lambda;
            cell_max = cell_max.max(g);
        }
        per_cell[c] = cell_max;
        if cell_max > max_gradient {
            max_gradient = cell_max;
            argmax = c;
        }
    }
    Ok(HarnackReport { max_gradient, argmax_cell: argmax, per_cell_max: per_cell })
}

/// Result of collapsing the complement of the fiber-measure support.
#[derive(Debug, Clone)]
pub struct SemiconjugacyResult {
    pub psi: CircleLift,
    pub rep_prime: Representation,
    /// Angle measure of the bins whose mass sits below the support floor.
    pub support_deficiency: f64,
    pub equivariance_residual: f64,
    pub base_cell: usize,
}

/// Collapses along the cumulative of the base-cell fiber measure; the new
/// representation is `psi . rho . psi^{-1}` evaluated by exact PL composition.
pub fn collapse_semiconjugacy(
    field: &FiberMeasureField,
    rep: &Representation,
) -> Result<SemiconjugacyResult, LabError> {
    let base = field.base_cell();
    let masses = field.cell_masses(base);
    let total: f64 = masses.iter().sum();
    if let Some((bin, &m)) = masses.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()) {
        if m / total > 0.5 {
            return Err(LabError::AtomicMeasure { bin, fraction: m / total });
        }
    }
    let psi = phi_from_masses(masses)?;
    let psi_inv = psi.inverse();
    let floor = 1e-12;
    let support_deficiency = masses.iter().filter(|&&m| m <= floor).count() as f64 * field.bin_width();

    let mut lifts = Vec::with_capacity(rep.lifts.len());
    for lift in &rep.lifts {
        lifts.push(psi.compose(lift).compose(&psi_inv).normalize_canonical());
    }
    // equivariance residual of psi against the collapsed generators
    let mut residual = 0.0f64;
    for (g, lift) in rep.lifts.iter().enumerate() {
        for k in 0..256 {
            let x = k as f64 / 256.0 * TAU;
            let lhs = psi.eval(lift.eval(x));
            let rhs = lifts[g].eval(psi.eval(x));
            let d = (lhs - rhs).rem_euclid(TAU);
            residual = residual.max(d.min(TAU - d));
        }
    }
    let rep_prime = Representation {
        kind: crate::circle::RepKind::PlCustom,
        labels: rep.labels.clone(),
        lifts,
        matrices: None,
        conjugator: None,
        sample_resolution: rep.sample_resolution,
    };
    Ok(SemiconjugacyResult {
        psi,
        rep_prime,
        support_deficiency,
        equivariance_residual: residual,
        base_cell: base,
    })
}

/// Empirical fiber measure from a folded mean-value random walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McFiberMeasure {
    pub masses: Vec<f64>,
    pub escaped_paths: usize,
    pub paths: usize,
}

/// Runs `paths` random walks of `n_steps` jumps of hyperbolic radius `step`,
/// folding into the fundamental domain and transporting the circle coordinate
/// by the folding words. With a field, each path samples the endpoint cell's
/// fiber measure (the harmonic pairing); without, it uses the endpoint angle.
#[allow(clippy::too_many_arguments)]
pub fn mc_fiber_measure(
    rep: &Representation,
    mesh: &Arc<HyperbolicMesh>,
    z0: Complex64,
    step: f64,
    paths: usize,
    n_steps: usize,
    seed: u64,
    field: Option<&FiberMeasureField>,
    t_bins: usize,
) -> Result<McFiberMeasure, LabError> {
    use rand::Rng;
    use rand::SeedableRng;
    if step > 0.1 {
        return Err(LabError::Validation("walk step must be at most 0.1".into()));
    }
    if let Some(f) = field {
        if f.t_bins != t_bins {
            return Err(LabError::Validation("field bin count mismatch".into()));
        }
    }
    let group = &mesh.group;
    let (start, start_word) = group.fold(z0, 512)?;
    let r = (step / 2.0).tanh();
    let dt = TAU / t_bins as f64;

    // inverse generator lifts evaluated pointwise during the pullback
    let inv_lifts: Vec<CircleLift> = rep.lifts.iter().map(|l| l.inverse()).collect();

    let results: Vec<Result<(usize, usize), LabError>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            // documented splitting rule: path seed = root ^ ((index+1) * golden)
            let mix = seed ^ ((p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix);
            let mut escapes = 0usize;
            'path: loop {
                let mut z = start;
                let mut word: Vec<crate::group::Letter> = start_word.0.clone();
                for _ in 0..n_steps {
                    let xi = rng.gen_range(0.0..TAU);
                    let jump = Complex64::from_polar(r, xi);
                    let moved = (jump + z) / (1.0 + z.conj() * jump);
                    match group.fold(moved, 256) {
                        Ok((zf, w)) => {
                            z = zf;
                            // the fold word acts after the accumulated word
                            let mut new_word = w.0;
                            new_word.extend_from_slice(&word);
                            word = new_word;
                        }
                        Err(_) => {
                            escapes += 1;
                            if escapes > 64 {
                                return Err(LabError::Geometry("walk keeps escaping the folding budget".into()));
                            }
                            continue 'path;
                        }
                    }
                    // beyond the cusp truncation counts as an escape
                    if !group.cusps.is_empty() {
                        if let Some((ci, _, v)) = group.cusp_coordinates(z, 2.0) {
                            if mesh.cusp_params[ci].v_cut.is_finite() && v > mesh.cusp_params[ci].v_cut {
                                escapes += 1;
                                if escapes > 64 {
                                    return Err(LabError::Geometry("walk keeps entering the cusp tail".into()));
                                }
                                continue 'path;
                            }
                        }
                    }
                }
                // sample a fiber angle at the endpoint
                let theta_end = match field {
                    Some(f) => {
                        let (src, _) = f.mesh.interp_at(z);
                        let pick: f64 = rng.gen_range(0.0..1.0);
                        let cell = pick_weighted(&src, pick).unwrap_or_else(|| nearest_cell(&f.mesh, z));
                        let q: f64 = rng.gen_range(0.0..1.0);
                        sample_from_masses(f.cell_masses(cell), q)
                    }
                    None => z.arg().rem_euclid(TAU),
                };
                // transport back: theta0 = rho(word)^{-1}(theta_end) pointwise
                let mut x = theta_end;
                for l in word.iter() {
                    x = if l.inv { rep.lifts[l.gen].eval(x) } else { inv_lifts[l.gen].eval(x) };
                }
                let bin = ((x.rem_euclid(TAU)) / dt) as usize % t_bins;
                return Ok((bin, escapes));
            }
        })
        .collect();

    let mut masses = vec![0.0; t_bins];
    let mut escaped = 0usize;
    for r in results {
        let (bin, esc) = r?;
        masses[bin] += 1.0;
        escaped += esc;
    }
    let total: f64 = masses.iter().sum();
    for m in masses.iter_mut() {
        *m *= TAU / total;
    }
    Ok(McFiberMeasure { masses, escaped_paths: escaped, paths })
}

fn pick_weighted(src: &[(usize, f64)], q: f64) -> Option<usize> {
    let total: f64 = src.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for &(i, w) in src {
        acc += w / total;
        if q <= acc {
            return Some(i);
        }
    }
    src.last().map(|&(i, _)| i)
}

/// Inverse-CDF sample of a binned measure at quantile `q`.
fn sample_from_masses(masses: &[f64], q: f64) -> f64 {
    let total: f64 = masses.iter().sum();
    let target = q * total;
    let dt = TAU / masses.len() as f64;
    let mut acc = 0.0;
    for (k, &m) in masses.iter().enumerate() {
        if acc + m >= target {
            let frac = if m > 0.0 { (target - acc) / m } else { 0.5 };
            return (k as f64 + frac) * dt;
        }
        acc += m;
    }
    TAU - 0.5 * dt
}

/// Wasserstein-1 distance between binned probability measures on the circle
/// (minimum over rotations of the CDF-difference integral).
pub fn wasserstein_circle(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let t = a.len();
    let dt = TAU / t as f64;
    let ta: f64 = a.iter().sum();
    let tb: f64 = b.iter().sum();
    let mut cum = 0.0;
    let mut cums: Vec<f64> = Vec::with_capacity(t);
    for k in 0..t {
        cum += a[k] / ta - b[k] / tb;
        cums.push(cum);
    }
    // the optimal rotation subtracts the median of the CDF difference
    let mut sorted = cums.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let med = sorted[t / 2];
    cums.iter().map(|c| (c - med).abs()).sum::<f64>() * dt * TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SurfaceGroup;
    use crate::mesh::build_mesh;
    use approx::assert_abs_diff_eq;

    fn pt_mesh(res: usize, cusp_area: f64) -> Arc<HyperbolicMesh> {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        Arc::new(build_mesh(&group, res, cusp_area).unwrap())
    }

    #[test]
    fn exact_field_mass_and_center_density() {
        let mesh = pt_mesh(24, 0.4);
        let field = exact_fuchsian_field(&mesh, 256);
        for c in 0..mesh.cell_count() {
            assert_abs_diff_eq!(field.cell_mass(c), TAU, epsilon = 1e-9);
        }
        // cell nearest 0 has h ~ 1 in every bin
        let base = field.base_cell();
        for k in 0..field.t_bins {
            let h = field.density(base, k);
            assert!((h - 1.0).abs() < 0.15, "density {h} at bin {k}");
        }
        // midpoint quadrature of the Poisson kernel integrates to 2pi
        let dt = field.bin_width();
        for c in (0..mesh.cell_count()).step_by(29) {
            let z = mesh.cells[c].center;
            let direct: f64 = (0..field.t_bins)
                .map(|k| poisson_kernel(z, (k as f64 + 0.5) * dt) * dt)
                .sum();
            assert!((direct - TAU).abs() < 1e-3, "midpoint quadrature defect {direct}");
        }
    }

    #[test]
    fn exact_field_harmonic_residual_refines() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let rep = Representation::fuchsian_boundary(&group, 512);
        let mut res_prev = f64::INFINITY;
        for res in [16usize, 32] {
            let mesh = Arc::new(build_mesh(&group, res, 0.4).unwrap());
            let field = exact_fuchsian_field(&mesh, 128);
            let r = harmonic_residual(&field, &rep).unwrap();
            assert!(r < res_prev, "residual should shrink under refinement");
            res_prev = r;
        }
        assert!(res_prev < 2.5e-4, "final residual {res_prev}");
    }

    #[test]
    fn phi_lift_identity_for_uniform_masses() {
        let masses = vec![TAU / 64.0; 64];
        let phi = phi_from_masses(&masses).unwrap();
        for k in 0..64 {
            let x = k as f64 / 64.0 * TAU;
            assert_abs_diff_eq!(phi.eval(x), x, epsilon = 1e-12);
        }
    }

    #[test]
    fn transport_preserves_mass_and_matches_pushforward() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let lift = crate::circle::random_lift(&mut rng, 13);
        let t = 128;
        let masses: Vec<f64> = (0..t).map(|k| 0.1 + (k as f64 * 0.3).sin().abs()).collect();
        let tr = Transport::from_lift(&lift, t);
        let mut out1 = vec![0.0; t];
        tr.apply(&masses, &mut out1);
        let mut out2 = vec![0.0; t];
        lift.pushforward_bins(&masses, &mut out2);
        for k in 0..t {
            assert_abs_diff_eq!(out1[k], out2[k], epsilon = 1e-12);
        }
        let s1: f64 = out1.iter().sum();
        let s0: f64 = masses.iter().sum();
        assert_abs_diff_eq!(s1, s0, epsilon = 1e-10);
    }

    #[test]
    fn rotation_representation_has_uniform_fixed_point() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = Arc::new(build_mesh(&group, 16, 0.6).unwrap());
        let rep = Representation::pl_custom(
            &group,
            vec![CircleLift::rotation(1.1), CircleLift::rotation(2.7)],
        )
        .unwrap();
        let t = 64;
        let (field, report) = solve_harmonic_field(
            &rep,
            &mesh,
            t,
            &SolveOptions { tol: 1e-9, max_sweeps: 4000, damping: 1.0, nested: false },
        )
        .unwrap();
        for c in (0..mesh.cell_count()).step_by(7) {
            for k in 0..t {
                assert!((field.density(c, k) - 1.0).abs() < 1e-6, "density {}", field.density(c, k));
            }
        }
        assert!(report.finite_orbit_advisory.is_none());
    }

    #[test]
    fn identity_representation_keeps_uniform_and_advises() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = Arc::new(build_mesh(&group, 16, 0.6).unwrap());
        let rep = Representation::pl_custom(&group, vec![CircleLift::identity(), CircleLift::identity()]).unwrap();
        let (field, report) = solve_harmonic_field(
            &rep,
            &mesh,
            64,
            &SolveOptions { tol: 1e-9, max_sweeps: 2000, damping: 1.0, nested: false },
        )
        .unwrap();
        assert!(report.finite_orbit_advisory.is_some(), "identity action has finite orbits");
        for k in 0..64 {
            assert!((field.density(0, k) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn harnack_zero_for_uniform_and_one_for_poisson_kernel() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = pt_mesh(32, 0.4);
        let rep = Representation::fuchsian_boundary(&group, 512);
        let uniform = FiberMeasureField {
            mesh: Arc::clone(&mesh),
            t_bins: 64,
            masses: vec![TAU / 64.0; mesh.cell_count() * 64],
            nu: vec![TAU / 64.0; 64],
            solver_tol: 0.0,
        };
        let rep_id = Representation::pl_custom(&group, vec![CircleLift::identity(), CircleLift::identity()]).unwrap();
        let hr = harnack_check(&uniform, &rep_id).unwrap();
        assert!(hr.max_gradient < 1e-12);
        // Poisson field: the gradient bound is attained within discretization
        let field = exact_fuchsian_field(&mesh, 256);
        let hr = harnack_check(&field, &rep).unwrap();
        assert!((hr.max_gradient - 1.0).abs() < 1e-2, "max |dlog h| = {}", hr.max_gradient);
    }

    #[test]
    fn collapse_on_fuchsian_field_is_identity() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = pt_mesh(32, 0.4);
        let rep = Representation::fuchsian_boundary(&group, 1024);
        let field = exact_fuchsian_field(&mesh, 256);
        let semi = collapse_semiconjugacy(&field, &rep).unwrap();
        let grid_tol = 2.0 * (mesh.dx + TAU / 256.0);
        assert!(semi.psi.sup_distance(&CircleLift::identity()) < grid_tol);
        assert!(semi.support_deficiency == 0.0);
        assert!(semi.equivariance_residual < 1e-9, "residual {}", semi.equivariance_residual);
    }

    #[test]
    fn collapse_reports_gap_mass() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = pt_mesh(16, 0.6);
        let t = 64;
        // synthetic gap fixture: a fiber measure vanishing on an arc
        let mut masses = vec![0.0; mesh.cell_count() * t];
        for c in 0..mesh.cell_count() {
            for k in 0..t {
                let gap = k >= t / 4 && k < t / 2;
                masses[c * t + k] = if gap { 1e-15 } else { 1.0 };
            }
            let total: f64 = masses[c * t..(c + 1) * t].iter().sum();
            for k in 0..t {
                masses[c * t + k] *= TAU / total;
            }
        }
        let field = FiberMeasureField { mesh: Arc::clone(&mesh), t_bins: t, masses, nu: vec![TAU / t as f64; t], solver_tol: 0.0 };
        let rep = Representation::pl_custom(&group, vec![CircleLift::rotation(0.5), CircleLift::rotation(1.3)]).unwrap();
        let semi = collapse_semiconjugacy(&field, &rep).unwrap();
        assert!(semi.support_deficiency > 0.2, "gap mass {}", semi.support_deficiency);
        // the collapsed cumulative still covers the full circle: the
        // pushforward of the base measure has full support
        let span = semi.psi.eval(TAU) - semi.psi.eval(0.0);
        assert_abs_diff_eq!(span, TAU, epsilon = 1e-9);
    }

    #[test]
    fn atomic_base_measure_is_an_error() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = pt_mesh(16, 0.6);
        let t = 64;
        let mut masses = vec![1e-14; mesh.cell_count() * t];
        for c in 0..mesh.cell_count() {
            masses[c * t + 5] = TAU;
        }
        let field = FiberMeasureField { mesh: Arc::clone(&mesh), t_bins: t, masses, nu: vec![TAU / t as f64; t], solver_tol: 0.0 };
        let rep = Representation::pl_custom(&group, vec![CircleLift::identity(), CircleLift::identity()]).unwrap();
        assert!(matches!(collapse_semiconjugacy(&field, &rep), Err(LabError::AtomicMeasure { .. })));
    }

    #[test]
    fn mc_deterministic_and_uniform_for_rotations() {
        let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
        let mesh = pt_mesh(16, 0.6);
        let rep = Representation::pl_custom(
            &group,
            vec![CircleLift::rotation(1.0), CircleLift::rotation(2.0)],
        )
        .unwrap();
        let t = 64;
        // pairing estimator against the uniform field (the exact fixed point
        // for rotation-valued actions)
        let uniform = FiberMeasureField {
            mesh: Arc::clone(&mesh),
            t_bins: t,
            masses: vec![TAU / t as f64; mesh.cell_count() * t],
            nu: vec![TAU / t as f64; t],
            solver_tol: 0.0,
        };
        let run = || {
            mc_fiber_measure(&rep, &mesh, Complex64::new(0.1, 0.05), 0.1, 4000, 60, 42, Some(&uniform), t).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.masses, b.masses, "identical seeds must give identical histograms");
        // multinomial band per bin around uniform
        let n = 4000.0;
        let p = 1.0 / t as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for k in 0..t {
            let count = a.masses[k] * n / TAU;
            assert!((count - n * p).abs() < 5.0 * sigma, "bin {k} count {count}");
        }
    }

    #[test]
    fn wasserstein_basics() {
        let t = 64;
        let u = vec![TAU / t as f64; t];
        assert!(wasserstein_circle(&u, &u) < 1e-14);
        let mut v = u.clone();
        v.rotate_right(1);
        let w = wasserstein_circle(&u, &v);
        assert!(w <= TAU / t as f64 + 1e-9);
    }
}
