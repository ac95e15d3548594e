//! Monotone circle-lift algebra: piecewise-linear lifts of orientation-preserving
//! circle homeomorphisms, their compositions and inverses, translation numbers,
//! representations of surface groups, and Euler numbers.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::geom::MoebiusElement;
use crate::group::{SurfaceGroup, Word};

/// A monotone degree-one lift R -> R of a circle homeomorphism.
///
/// Stored as one period of breakpoints in `[0, 2pi)` with strictly increasing
/// values, extended by `f(x + 2pi) = f(x) + 2pi`. Values are not confined to
/// `[0, 2pi)`: lifts shifted by `2pi k` are distinct elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleLift {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl CircleLift {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, LabError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(LabError::CircleMap("breakpoint/value arrays empty or mismatched".into()));
        }
        if xs[0] < 0.0 || *xs.last().unwrap() >= TAU {
            return Err(LabError::CircleMap("breakpoints must lie in [0, 2pi)".into()));
        }
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] {
                return Err(LabError::CircleMap("breakpoints not strictly increasing".into()));
            }
            if ys[i] <= ys[i - 1] {
                return Err(LabError::CircleMap("values not strictly increasing".into()));
            }
        }
        if ys[ys.len() - 1] >= ys[0] + TAU {
            return Err(LabError::CircleMap("value span exceeds one period".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn identity() -> Self {
        Self { xs: vec![0.0], ys: vec![0.0] }
    }

    /// Rigid rotation lift `x -> x + angle`.
    pub fn rotation(angle: f64) -> Self {
        Self { xs: vec![0.0], ys: vec![angle] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Samples the exact boundary lift of a Möbius element to a PL lift.
    ///
    /// `extra` angles (e.g. boundary fixed points of the element) are inserted
    /// as breakpoints so that parabolic/hyperbolic fixed points survive the
    /// sampling exactly; the result is canonically normalized.
    pub fn from_moebius_boundary(g: &MoebiusElement, resolution: usize, extra: &[f64]) -> Self {
        let mut xs: Vec<f64> = (0..resolution).map(|k| k as f64 / resolution as f64 * TAU).collect();
        for &a in extra {
            xs.push(a.rem_euclid(TAU));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if let Some(&last) = xs.last() {
            if TAU - last < 1e-12 {
                xs.pop();
            }
        }
        let shift = -TAU * (g.boundary_lift_raw(0.0) / TAU).floor();
        let ys: Vec<f64> = xs.iter().map(|&x| g.boundary_lift_raw(x) + shift).collect();
        Self::sanitize(xs, ys)
    }

    fn segment(&self, i: usize) -> (f64, f64, f64, f64) {
        let n = self.xs.len();
        if i + 1 < n {
            (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1])
        } else {
            (self.xs[n - 1], self.xs[0] + TAU, self.ys[n - 1], self.ys[0] + TAU)
        }
    }

    /// Evaluates the lift at any real `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut k = ((x - self.xs[0]) / TAU).floor();
        let mut xr = x - TAU * k;
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&b| b <= xr) {
            0 => {
                // rounding put xr just below xs[0]: previous period's wrap segment
                k -= 1.0;
                xr += TAU;
                n - 1
            }
            p => p - 1,
        };
        let (x0, x1, y0, y1) = self.segment(i);
        let t = if x1 > x0 { (xr - x0) / (x1 - x0) } else { 0.0 };
        y0 + t * (y1 - y0) + TAU * k
    }

    /// Evaluates the induced circle map, reduced to `[0, 2pi)`.
    pub fn eval_circle(&self, x: f64) -> f64 {
        self.eval(x).rem_euclid(TAU)
    }

    /// Shifts the lift by `2pi k` (same circle map, different lift).
    pub fn shifted(&self, k: i64) -> Self {
        let ys = self.ys.iter().map(|y| y + TAU * k as f64).collect();
        Self { xs: self.xs.clone(), ys }
    }

    /// Canonical representative with value at 0 in `[0, 2pi)`.
    pub fn normalize_canonical(&self) -> Self {
        let k = (self.eval(0.0) / TAU).floor() as i64;
        self.shifted(-k)
    }

    /// Drops breakpoints that collide under rounding, keeping strict
    /// monotonicity; deviations are confined to near-duplicate points.
    fn sanitize(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let mut fx: Vec<f64> = Vec::with_capacity(xs.len());
        let mut fy: Vec<f64> = Vec::with_capacity(xs.len());
        for (x, y) in xs.into_iter().zip(ys) {
            if let (Some(&lx), Some(&ly)) = (fx.last(), fy.last()) {
                if x - lx < 1e-12 || y - ly <= 0.0 {
                    continue;
                }
            }
            fx.push(x);
            fy.push(y);
        }
        // wrap segment must keep positive slope
        while fx.len() > 1 {
            let n = fx.len();
            if fy[n - 1] >= fy[0] + TAU || fx[n - 1] >= TAU - 1e-13 {
                fx.pop();
                fy.pop();
            } else {
                break;
            }
        }
        Self::new(fx, fy).expect("sanitized lift is strictly monotone")
    }

    /// Exact functional inverse.
    pub fn inverse(&self) -> Self {
        let n = self.xs.len();
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n);
        for i in 0..n {
            let k = (self.ys[i] / TAU).floor();
            pts.push((self.ys[i] - TAU * k, self.xs[i] - TAU * k));
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (xs, ys) = pts.into_iter().unzip();
        Self::sanitize(xs, ys)
    }

    /// Exact composition `self ∘ rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let rhs_inv = rhs.inverse();
        let mut xs: Vec<f64> = rhs.xs.clone();
        for &b in &self.xs {
            let x = rhs_inv.eval(b).rem_euclid(TAU);
            xs.push(x);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(rhs.eval(x))).collect();
        Self::sanitize(xs, ys)
    }

    /// Sup distance between the induced functions, over one period.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for &x in self.xs.iter().chain(other.xs.iter()) {
            m = m.max((self.eval(x) - other.eval(x)).abs());
        }
        m
    }

    /// Mass-conservative pushforward of a binned fiber measure through this map.
    ///
    /// `masses[k]` sits on the uniform bin `[2pi k/T, 2pi(k+1)/T)`; the output
    /// is rebinned on the same grid by interval overlap, preserving the total.
    pub fn pushforward_bins(&self, masses: &[f64], out: &mut [f64]) {
        let t = masses.len();
        debug_assert_eq!(out.len(), t);
        out.fill(0.0);
        let dt = TAU / t as f64;
        let mut a = self.eval(0.0);
        for (k, &mk) in masses.iter().enumerate() {
            let b = self.eval((k + 1) as f64 * dt);
            if mk != 0.0 {
                spread_interval(a, b, mk, out, dt);
            }
            a = b;
        }
    }

    /// Minimum slope over all segments (including the wrap segment).
    pub fn min_slope(&self) -> f64 {
        let n = self.xs.len();
        (0..n)
            .map(|i| {
                let (x0, x1, y0, y1) = self.segment(i);
                (y1 - y0) / (x1 - x0)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Distributes mass `m` on the angular interval `[a, b)` over uniform bins.
fn spread_interval(a: f64, b: f64, m: f64, out: &mut [f64], dt: f64) {
    let t = out.len();
    let len = b - a;
    debug_assert!(len > 0.0 && len < TAU + 1e-9);
    let shift = TAU * (a / TAU).floor();
    let (a, b) = (a - shift, b - shift);
    let density = m / len;
    let mut j = (a / dt).floor() as usize;
    let mut lo = a;
    while lo < b - 1e-300 {
        let hi = ((j + 1) as f64 * dt).min(b);
        out[j % t] += density * (hi - lo);
        lo = hi;
        j += 1;
    }
}

/// Outcome of a translation-number computation with its certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationNumber {
    pub value: f64,
    /// Certified bracket containing the exact translation number.
    pub bracket: (f64, f64),
    /// Set when an exact periodic-point certificate was found.
    pub exact_rational: Option<(i64, u32)>,
}

/// Translation number of a lift with certified tolerance.
///
/// Tries an exact periodic-point certificate on small powers first, then
/// brackets `tau` by `(f^n(0) - 0 ± 2pi)/(2pi n)`, squaring the map while
/// breakpoint growth allows to accelerate the pointwise iteration.
pub fn translation_number(f: &CircleLift, tol: f64) -> Result<TranslationNumber, LabError> {
    if tol <= 0.0 {
        return Err(LabError::Validation("translation tolerance must be positive".into()));
    }
    if let Some((p, q)) = rational_certificate(f, 8) {
        let v = p as f64 / q as f64;
        return Ok(TranslationNumber { value: v, bracket: (v, v), exact_rational: Some((p, q)) });
    }

    // square the map while it stays small enough for fast evaluation
    const BREAKPOINT_CAP: usize = 1 << 20;
    let mut g = f.clone();
    let mut p2: u64 = 1;
    while g.len() * 2 <= BREAKPOINT_CAP && p2 < (1 << 12) {
        g = g.compose(&g);
        p2 *= 2;
    }

    let n_target = (2.0 / tol).ceil() as u64;
    let steps = n_target.div_ceil(p2).max(1);
    let run = |x0: f64| -> f64 {
        let mut x = x0;
        for _ in 0..steps {
            x = g.eval(x);
        }
        x
    };
    let n = (steps * p2) as f64;
    let d0 = run(0.0) - 0.0;
    let dpi = run(std::f64::consts::PI) - std::f64::consts::PI;
    let v0 = d0 / (TAU * n);
    let vpi = dpi / (TAU * n);
    let bracket = (v0 - 1.0 / n, v0 + 1.0 / n);
    if (v0 - vpi).abs() > 2.0 * (tol + 2.0 / n) {
        return Err(LabError::TranslationBracket { lo: bracket.0, hi: bracket.1 });
    }
    Ok(TranslationNumber { value: v0, bracket, exact_rational: None })
}

/// Searches for an exact rational translation number `p/q`, `q <= q_max`,
/// via a periodic point of the q-th power on its breakpoint segments.
fn rational_certificate(f: &CircleLift, q_max: u32) -> Option<(i64, u32)> {
    const CAP: usize = 1 << 19;
    let mut power = f.clone();
    for q in 1..=q_max {
        if q > 1 {
            if power.len() + f.len() > CAP {
                return None;
            }
            power = f.compose(&power);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &x) in power.breakpoints().iter().enumerate() {
            let d = power.values()[i] - x;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let p_lo = ((lo - 1e-11) / TAU).ceil() as i64;
        let p_hi = ((hi + 1e-11) / TAU).floor() as i64;
        if p_lo <= p_hi {
            // monotone lift: at most one integer level can be crossed
            return Some((p_lo, q));
        }
    }
    None
}

/// How a representation evaluates words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepKind {
    /// Boundary action of the matrices; words evaluated through matrix products.
    FuchsianBoundary,
    /// Piecewise-linear generators; words evaluated by exact PL composition.
    PlCustom,
    /// `g . rho_0 . g^{-1}` for a PL conjugator g; words evaluated through
    /// matrix products and conjugated once.
    ConjugatedFuchsian,
}

/// A homomorphism of the surface group into circle homeomorphisms, carried by
/// canonical lifts of the generators.
#[derive(Debug, Clone)]
pub struct Representation {
    pub kind: RepKind,
    pub labels: Vec<String>,
    /// Canonical lift per generator (value at 0 in [0, 2pi)).
    pub lifts: Vec<CircleLift>,
    /// Generator matrices (fuchsian and conjugated kinds).
    pub matrices: Option<Vec<MoebiusElement>>,
    pub conjugator: Option<CircleLift>,
    pub sample_resolution: usize,
}

pub const DEFAULT_BOUNDARY_SAMPLES: usize = 4096;

impl Representation {
    /// Fuchsian boundary representation of the group.
    pub fn fuchsian_boundary(group: &SurfaceGroup, resolution: usize) -> Self {
        let lifts = group
            .generators
            .iter()
            .map(|g| CircleLift::from_moebius_boundary(g, resolution, &g.boundary_fixed_angles()))
            .collect();
        Representation {
            kind: RepKind::FuchsianBoundary,
            labels: group.labels.clone(),
            lifts,
            matrices: Some(group.generators.clone()),
            conjugator: None,
            sample_resolution: resolution,
        }
    }

    /// Conjugation of the Fuchsian boundary action by a PL circle homeomorphism.
    pub fn conjugated_fuchsian(group: &SurfaceGroup, conjugator: CircleLift, resolution: usize) -> Self {
        let conj_inv = conjugator.inverse();
        let lifts = group
            .generators
            .iter()
            .map(|g| {
                let base = CircleLift::from_moebius_boundary(g, resolution, &g.boundary_fixed_angles());
                conjugator.compose(&base).compose(&conj_inv).normalize_canonical()
            })
            .collect();
        Representation {
            kind: RepKind::ConjugatedFuchsian,
            labels: group.labels.clone(),
            lifts,
            matrices: Some(group.generators.clone()),
            conjugator: Some(conjugator),
            sample_resolution: resolution,
        }
    }

    /// Representation from explicit canonical PL lifts, one per group generator.
    pub fn pl_custom(group: &SurfaceGroup, lifts: Vec<CircleLift>) -> Result<Self, LabError> {
        if lifts.len() != group.generators.len() {
            return Err(LabError::Validation(format!(
                "expected {} generator lifts, got {}",
                group.generators.len(),
                lifts.len()
            )));
        }
        let lifts: Vec<CircleLift> = lifts.into_iter().map(|l| l.normalize_canonical()).collect();
        Ok(Representation {
            kind: RepKind::PlCustom,
            labels: group.labels.clone(),
            lifts,
            matrices: None,
            conjugator: None,
            sample_resolution: DEFAULT_BOUNDARY_SAMPLES,
        })
    }

    pub fn generator_count(&self) -> usize {
        self.lifts.len()
    }

    fn check_word(&self, word: &Word) -> Result<(), LabError> {
        for l in &word.0 {
            if l.gen >= self.lifts.len() {
                return Err(LabError::Validation(format!("unknown generator index {}", l.gen)));
            }
        }
        Ok(())
    }

    /// Evaluates the homomorphic lift of a word: the composition of the
    /// canonical generator lifts, inverse letters as functional inverses.
    pub fn evaluate_word(&self, word: &Word) -> Result<CircleLift, LabError> {
        self.check_word(word)?;
        if word.0.is_empty() {
            return Ok(CircleLift::identity());
        }
        match self.kind {
            RepKind::PlCustom => {
                let mut acc: Option<CircleLift> = None;
                for letter in &word.0 {
                    let lift = if letter.inv { self.lifts[letter.gen].inverse() } else { self.lifts[letter.gen].clone() };
                    acc = Some(match acc {
                        None => lift,
                        Some(f) => f.compose(&lift),
                    });
                }
                Ok(acc.unwrap())
            }
            RepKind::FuchsianBoundary | RepKind::ConjugatedFuchsian => {
                let mats = self.matrices.as_ref().expect("matrix-backed representation");
                let mut prod = MoebiusElement::identity();
                for letter in &word.0 {
                    let m = if letter.inv { mats[letter.gen].inverse() } else { mats[letter.gen] };
                    prod = prod.compose(&m);
                }
                let sampled = CircleLift::from_moebius_boundary(
                    &prod,
                    self.sample_resolution,
                    &prod.boundary_fixed_angles(),
                );
                // offset so the sampled lift matches the homomorphic composition
                let chain0 = self.chain_eval_base(word, 0.0);
                let base = match self.kind {
                    RepKind::ConjugatedFuchsian => {
                        let g = self.conjugator.as_ref().unwrap();
                        let gi = g.inverse();
                        g.compose(&sampled).compose(&gi)
                    }
                    _ => sampled,
                };
                let chain_full = match self.kind {
                    RepKind::ConjugatedFuchsian => {
                        let g = self.conjugator.as_ref().unwrap();
                        g.eval(chain0) // chain0 already includes the inner g^{-1} chain
                    }
                    _ => chain0,
                };
                let k = ((chain_full - base.eval(0.0)) / TAU).round() as i64;
                Ok(base.shifted(k))
            }
        }
    }

    /// Evaluates the chain of exact canonical generator lifts at a point
    /// (matrix-backed kinds; used to fix the 2pi offset of word lifts).
    fn chain_eval_base(&self, word: &Word, x: f64) -> f64 {
        let mats = self.matrices.as_ref().unwrap();
        let canon = |g: &MoebiusElement, x: f64| -> f64 {
            let shift = -TAU * (g.boundary_lift_raw(0.0) / TAU).floor();
            g.boundary_lift_raw(x) + shift
        };
        let mut x = match self.kind {
            RepKind::ConjugatedFuchsian => self.conjugator.as_ref().unwrap().inverse().eval(x),
            _ => x,
        };
        for letter in word.0.iter().rev() {
            let g = &mats[letter.gen];
            if letter.inv {
                // functional inverse of the canonical lift of g
                let gi = g.inverse();
                let raw0 = canon(g, 0.0);
                let m = (-canon(&gi, raw0) / TAU).round();
                x = canon(&gi, x) + TAU * m;
            } else {
                x = canon(g, x);
            }
        }
        // NB: for the conjugated kind this returns the inner chain; the caller
        // applies the outer conjugator lift.
        x
    }
}

/// Euler number of a representation.
///
/// Closed surfaces: minus the translation amount of the lifted relator over
/// 2pi (an exact integer; the residual over breakpoints is reported). Cusped
/// surfaces: minus the sum of translation numbers of the cusp words.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EulerNumber {
    pub value: f64,
    /// Closed case: sup residual of the lifted relator from an exact translation.
    pub relator_residual: Option<f64>,
    /// Cusped case: per-cusp translation numbers of the lifted cusp words.
    pub cusp_translations: Vec<TranslationNumber>,
}

pub fn euler_number(group: &SurfaceGroup, rep: &Representation, tol: f64) -> Result<EulerNumber, LabError> {
    if !group.relator_words.is_empty() {
        let mut value = 0.0;
        let mut worst = 0.0f64;
        for relator in &group.relator_words {
            let lift = rep.evaluate_word(relator)?;
            let d0 = lift.eval(0.0);
            let e_int = (d0 / TAU).round();
            let mut residual = 0.0f64;
            for (i, &x) in lift.breakpoints().iter().enumerate() {
                residual = residual.max((lift.values()[i] - x - TAU * e_int).abs());
            }
            if residual > 1e-6 {
                return Err(LabError::Validation(format!(
                    "relator does not act as the identity on the circle (residual {residual:.3e})"
                )));
            }
            worst = worst.max(residual);
            value += -e_int;
        }
        Ok(EulerNumber { value, relator_residual: Some(worst), cusp_translations: Vec::new() })
    } else if !group.cusp_words.is_empty() {
        let mut taus = Vec::new();
        let mut value = 0.0;
        for c in &group.cusp_words {
            let lift = rep.evaluate_word(c)?;
            let tau = translation_number(&lift, tol)?;
            value -= tau.value;
            taus.push(tau);
        }
        Ok(EulerNumber { value, relator_residual: None, cusp_translations: taus })
    } else {
        Err(LabError::GroupSpec("group has neither relators nor cusps".into()))
    }
}

/// Best-effort search for a finite orbit of the action on the circle.
///
/// Grows orbit candidates from breakpoints (and 0) under all generators; a
/// closure of cardinality at most `max_period` that every generator permutes
/// within tolerance is reported. Absence is not a proof.
pub fn detect_finite_orbit(rep: &Representation, max_period: usize) -> Option<Vec<f64>> {
    const CLUSTER_TOL: f64 = 1e-7;
    let mut candidates: Vec<f64> = vec![0.0];
    for lift in &rep.lifts {
        for &b in lift.breakpoints().iter().take(16) {
            candidates.push(b);
        }
    }
    for k in 0..8 {
        candidates.push(k as f64 / 8.0 * TAU);
    }
    let maps: Vec<&CircleLift> = rep.lifts.iter().collect();
    'cand: for &c in &candidates {
        let mut orbit: Vec<f64> = vec![c.rem_euclid(TAU)];
        let mut frontier = orbit.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &x in &frontier {
                for f in &maps {
                    for y in [f.eval_circle(x), f.inverse().eval_circle(x)] {
                        let known = orbit.iter().any(|&o| circ_dist(o, y) < CLUSTER_TOL);
                        if !known {
                            if orbit.len() >= max_period {
                                continue 'cand;
                            }
                            orbit.push(y);
                            next.push(y);
                        }
                    }
                }
            }
            frontier = next;
        }
        // verify each generator permutes the orbit
        let ok = maps.iter().all(|f| {
            orbit.iter().all(|&x| {
                let y = f.eval_circle(x);
                orbit.iter().any(|&o| circ_dist(o, y) < 10.0 * CLUSTER_TOL)
            })
        });
        if ok {
            orbit.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return Some(orbit);
        }
    }
    None
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Random monotone PL lift with `k` breakpoints (for representation sweeps).
pub fn random_lift<R: rand::Rng>(rng: &mut R, k: usize) -> CircleLift {
    assert!(k >= 1);
    loop {
        let mut xs: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..TAU)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b) < 1e-6);
        if xs.len() < k {
            continue;
        }
        let gaps: Vec<f64> = (0..k).map(|_| -rng.gen_range(1e-12..1.0f64).ln()).collect();
        let total: f64 = gaps.iter().sum();
        let y0 = rng.gen_range(0.0..TAU);
        let mut ys = Vec::with_capacity(k);
        let mut acc = y0;
        for g in gaps.iter().take(k) {
            ys.push(acc);
            acc += g / total * TAU;
        }
        return CircleLift::new(xs, ys).expect("random lift construction").normalize_canonical();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SurfaceGroup;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng as _, SeedableRng};

    #[test]
    fn identity_and_rotation_eval() {
        let id = CircleLift::identity();
        assert_abs_diff_eq!(id.eval(1.3), 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(id.eval(1.3 + TAU), 1.3 + TAU, epsilon = 1e-12);
        let r = CircleLift::rotation(TAU * 3.0 / 7.0);
        assert_abs_diff_eq!(r.eval(0.0), TAU * 3.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..20 {
            let f = random_lift(&mut rng, 17);
            let fi = f.inverse();
            for k in 0..64 {
                let x = k as f64 / 64.0 * TAU;
                assert!((fi.eval(f.eval(x)) - x).abs() < 1e-10);
                assert!((f.eval(fi.eval(x)) - x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rotation_translation_number() {
        let r = CircleLift::rotation(TAU * 3.0 / 7.0);
        let tau = translation_number(&r, 1e-9).unwrap();
        assert_abs_diff_eq!(tau.value, 3.0 / 7.0, epsilon = 1e-9);
        assert_eq!(tau.exact_rational, Some((3, 7)));
    }

    #[test]
    fn fixed_point_forces_zero() {
        // lift with f(0) = 0 exactly
        let f = CircleLift::new(vec![0.0, 1.0, 4.0], vec![0.0, 2.0, 4.5]).unwrap();
        let tau = translation_number(&f, 1e-10).unwrap();
        assert_eq!(tau.value, 0.0);
        assert_eq!(tau.exact_rational, Some((0, 1)));
    }

    #[test]
    fn translation_equivariance_under_shift() {
        let mut rng = StdRng::seed_from_u64(4);
        let f = random_lift(&mut rng, 9);
        let t0 = translation_number(&f, 1e-6).unwrap().value;
        let t1 = translation_number(&f.shifted(1), 1e-6).unwrap().value;
        assert!((t1 - t0 - 1.0).abs() < 2e-6);
    }

    #[test]
    fn tau_power_linearity() {
        let mut rng = StdRng::seed_from_u64(40);
        let f = random_lift(&mut rng, 7);
        let tol = 1e-6;
        let t1 = translation_number(&f, tol).unwrap().value;
        let mut p = f.clone();
        for n in 2..=8usize {
            p = p.compose(&f);
            let tn = translation_number(&p, tol).unwrap().value;
            assert!(
                (tn - n as f64 * t1).abs() <= n as f64 * tol + 1e-9,
                "tau(f^{n}) = {tn} vs {}",
                n as f64 * t1
            );
        }
    }

    #[test]
    fn tau_conjugation_invariance() {
        let mut rng = StdRng::seed_from_u64(23);
        let tol = 1e-7;
        for _ in 0..5 {
            let f = random_lift(&mut rng, 11);
            let g = random_lift(&mut rng, 5);
            let conj = g.compose(&f).compose(&g.inverse());
            let t0 = translation_number(&f, tol).unwrap().value;
            let t1 = translation_number(&conj, tol).unwrap().value;
            assert!((t0 - t1).abs() <= 2.0 * tol + 1e-9, "conjugation moved tau: {t0} vs {t1}");
        }
    }

    #[test]
    fn punctured_torus_commutator_is_unit_translation() {
        let group = SurfaceGroup::punctured_torus().unwrap();
        let rep = Representation::fuchsian_boundary(&group, 1024);
        let lift = rep.evaluate_word(&group.cusp_words[0]).unwrap();
        let tau = translation_number(&lift, 1e-8).unwrap();
        assert_eq!(tau.exact_rational, Some((1, 1)), "commutator should certify tau = 1");
        let e = euler_number(&group, &rep, 1e-8).unwrap();
        assert_abs_diff_eq!(e.value, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn evaluate_word_matches_matrix_boundary() {
        let group = SurfaceGroup::punctured_torus().unwrap();
        let rep = Representation::fuchsian_boundary(&group, 2048);
        let word = Word::parse("A B A", &group.labels).unwrap();
        let lift = rep.evaluate_word(&word).unwrap();
        let mut m = MoebiusElement::identity();
        for g in [0usize, 1, 0] {
            m = m.compose(&group.generators[g]);
        }
        for k in 0..256 {
            let x = k as f64 / 256.0 * TAU;
            let direct = m.boundary_lift_raw(x);
            let diff = (lift.eval(x) - direct) / TAU;
            assert!((diff - diff.round()).abs() < 1e-6, "word lift deviates at x={x}");
        }
    }

    #[test]
    fn empty_and_cancelling_words() {
        let group = SurfaceGroup::punctured_torus().unwrap();
        let rep = Representation::fuchsian_boundary(&group, 512);
        let empty = rep.evaluate_word(&Word(vec![])).unwrap();
        assert_eq!(empty.eval(0.0), 0.0);
        let w = Word::parse("A A^-1", &group.labels).unwrap();
        let lift = rep.evaluate_word(&w).unwrap();
        assert!(lift.sup_distance(&CircleLift::identity()) < 1e-10);
    }

    #[test]
    fn finite_orbit_detection() {
        let group = SurfaceGroup::punctured_torus().unwrap();
        // trivial representation
        let triv = Representation::pl_custom(&group, vec![CircleLift::identity(), CircleLift::identity()]).unwrap();
        let orbit = detect_finite_orbit(&triv, 12).unwrap();
        assert_eq!(orbit.len(), 1);
        assert!(orbit[0].abs() < 1e-12);
        // rotations by 2pi/3
        let r = CircleLift::rotation(TAU / 3.0);
        let rot = Representation::pl_custom(&group, vec![r.clone(), r]).unwrap();
        let orbit = detect_finite_orbit(&rot, 12).unwrap();
        assert_eq!(orbit.len(), 3);
        // Fuchsian boundary action: none up to period 12
        let fuch = Representation::fuchsian_boundary(&group, 512);
        assert!(detect_finite_orbit(&fuch, 12).is_none());
    }

    #[test]
    fn rotations_make_commutator_trivial() {
        let group = SurfaceGroup::punctured_torus().unwrap();
        let rep = Representation::pl_custom(
            &group,
            vec![CircleLift::rotation(0.9), CircleLift::rotation(2.2)],
        )
        .unwrap();
        let e = euler_number(&group, &rep, 1e-9).unwrap();
        assert_abs_diff_eq!(e.value, 0.0, epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn composition_closure(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let f = random_lift(&mut rng, 6);
            let g = random_lift(&mut rng, 9);
            let h = f.compose(&g);
            prop_assert!(h.min_slope() > 0.0);
            for k in 0..32 {
                let x = k as f64 / 32.0 * TAU;
                prop_assert!((h.eval(x) - f.eval(g.eval(x))).abs() < 1e-9);
                prop_assert!((h.eval(x + TAU) - h.eval(x) - TAU).abs() < 1e-9);
            }
            let hi = h.inverse();
            for k in 0..16 {
                let x = k as f64 / 16.0 * TAU;
                prop_assert!((hi.eval(h.eval(x)) - x).abs() < 1e-10);
            }
        }

        #[test]
        fn pushforward_conserves_mass(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let f = random_lift(&mut rng, 8);
            let t = 64;
            let masses: Vec<f64> = (0..t).map(|_| rng.gen_range(0.01..1.0f64)).collect();
            let total: f64 = masses.iter().sum();
            let mut out = vec![0.0; t];
            f.pushforward_bins(&masses, &mut out);
            let total_out: f64 = out.iter().sum();
            prop_assert!(((total - total_out) / total).abs() < 1e-12);
            prop_assert!(out.iter().all(|&m| m >= 0.0));
        }
    }
}
