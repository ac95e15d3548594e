//! Fuchsian surface groups with explicit fundamental polygons.
//!
//! Two built-in families: the once-punctured torus (ideal square in the disk,
//! free group on A, B with parabolic commutator) and the closed genus-2
//! surface (regular octagon with opposite sides paired). Side geodesics are
//! stored as circles orthogonal to the unit circle; a point is inside the
//! polygon iff it lies outside every side circle.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::geom::{cayley, cayley_inv, MoebiusElement};

/// One letter of a word over the group generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Letter {
    pub gen: usize,
    pub inv: bool,
}

/// A word over the generators; acts as the left-to-right product
/// (`w = l1 l2 ... ln` sends `x` to `l1(l2(...ln(x)))`).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    /// Parses a word like `"A B^-1 A"` against generator labels.
    pub fn parse(text: &str, labels: &[String]) -> Result<Word, LabError> {
        let mut letters = Vec::new();
        for tok in text.split_whitespace() {
            let (name, inv) = match tok.strip_suffix("^-1") {
                Some(n) => (n, true),
                None => (tok, false),
            };
            let gen = labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| LabError::Validation(format!("unknown generator label {name}")))?;
            letters.push(Letter { gen, inv });
        }
        Ok(Word(letters))
    }

    pub fn display(&self, labels: &[String]) -> String {
        self.0
            .iter()
            .map(|l| {
                if l.inv {
                    format!("{}^-1", labels[l.gen])
                } else {
                    labels[l.gen].clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| Letter { gen: l.gen, inv: !l.inv }).collect())
    }

    /// Evaluates the word as a matrix product.
    pub fn matrix(&self, generators: &[MoebiusElement]) -> MoebiusElement {
        let mut m = MoebiusElement::identity();
        for l in &self.0 {
            let g = if l.inv { generators[l.gen].inverse() } else { generators[l.gen] };
            m = m.compose(&g);
        }
        m
    }
}

/// A side of the fundamental polygon: an arc of a circle orthogonal to the
/// unit circle. Interior points of the polygon satisfy `|z - center| >= radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Side {
    pub center: Complex64,
    pub radius: f64,
    pub partner: usize,
    /// Single-letter word of the pairing; `element` maps this side onto the
    /// partner side and moves points beyond this side back toward the polygon.
    pub letter: Letter,
}

/// One corner of a cusp: an ideal vertex and the half-plane conjugator
/// sending the corner to the strip `[u0, u0 + width] x (y, inf)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspCorner {
    pub vertex: Complex64,
    pub conjugator: MoebiusElement,
    pub u0: f64,
    pub width: f64,
}

/// Chart data of one cusp: corners tile `u in [0, W)`; the seam word acts as
/// `u -> u + W` in the chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspChart {
    pub width: f64,
    pub seam_word: Word,
    pub corners: Vec<CuspCorner>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupFamily {
    PuncturedTorus,
    ClosedGenus2,
    Custom,
}

/// A torsion-free Fuchsian group with fundamental-domain combinatorics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceGroup {
    pub family: GroupFamily,
    pub labels: Vec<String>,
    pub generators: Vec<MoebiusElement>,
    pub genus: usize,
    /// Cusp loops oriented so that the Fuchsian Euler number is the Euler
    /// characteristic (for the punctured torus: the commutator `[A, B]`).
    pub cusp_words: Vec<Word>,
    pub relator_words: Vec<Word>,
    /// Polygon vertices in the disk model (on the unit circle when ideal).
    pub polygon_vertices: Vec<Complex64>,
    pub sides: Vec<Side>,
    pub cusps: Vec<CuspChart>,
}

impl SurfaceGroup {
    /// Standard once-punctured torus: `A = [[1,1],[1,2]]`, `B = [[1,-1],[-1,2]]`,
    /// fundamental domain the ideal square with vertices `1, i, -1, -i`.
    pub fn punctured_torus() -> Result<Self, LabError> {
        let a = MoebiusElement::from_matrix([[1.0, 1.0], [1.0, 2.0]])?;
        let b = MoebiusElement::from_matrix([[1.0, -1.0], [-1.0, 2.0]])?;
        let labels = vec!["A".to_string(), "B".to_string()];
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        // sides on unit circles centered at the four (±1 ± i)
        let sides = vec![
            Side { center: one + i, radius: 1.0, partner: 2, letter: Letter { gen: 0, inv: false } },
            Side { center: -one + i, radius: 1.0, partner: 3, letter: Letter { gen: 1, inv: true } },
            Side { center: -one - i, radius: 1.0, partner: 0, letter: Letter { gen: 0, inv: true } },
            Side { center: one - i, radius: 1.0, partner: 1, letter: Letter { gen: 1, inv: false } },
        ];
        let t1 = MoebiusElement::from_matrix([[1.0, 1.0], [0.0, 1.0]])?;
        let bi = b.inverse();
        let ai = a.inverse();
        // corner conjugators found by walking the ideal-vertex cycle; the
        // corners tile u in [0, 6) and the seam word acts as u -> u + 6
        let corners = vec![
            CuspCorner { vertex: one, conjugator: t1, u0: 0.0, width: 2.0 },
            CuspCorner { vertex: i, conjugator: t1.compose(&bi), u0: 2.0, width: 1.0 },
            CuspCorner { vertex: -one, conjugator: t1.compose(&bi).compose(&ai), u0: 3.0, width: 2.0 },
            CuspCorner { vertex: -i, conjugator: t1.compose(&bi).compose(&ai).compose(&b), u0: 5.0, width: 1.0 },
        ];
        let seam_word = Word(vec![
            Letter { gen: 1, inv: true },
            Letter { gen: 0, inv: true },
            Letter { gen: 1, inv: false },
            Letter { gen: 0, inv: false },
        ]);
        let cusp_word = Word(vec![
            Letter { gen: 0, inv: false },
            Letter { gen: 1, inv: false },
            Letter { gen: 0, inv: true },
            Letter { gen: 1, inv: true },
        ]);
        let group = SurfaceGroup {
            family: GroupFamily::PuncturedTorus,
            labels,
            generators: vec![a, b],
            genus: 1,
            cusp_words: vec![cusp_word],
            relator_words: vec![],
            polygon_vertices: vec![one, i, -one, -i],
            sides,
            cusps: vec![CuspChart { width: 6.0, seam_word, corners }],
        };
        group.validate()?;
        Ok(group)
    }

    /// Closed genus-2 surface on the regular octagon with opposite sides
    /// paired by translations `g_k = R(k pi/4) T R(-k pi/4)`.
    pub fn closed_genus2() -> Result<Self, LabError> {
        let cot8 = 1.0 / (PI / 8.0).tan();
        let apothem = cot8.acosh();
        let translation_length = 2.0 * apothem;
        let l2 = translation_length / 2.0;
        let base = MoebiusElement::from_su11(Complex64::new(l2.cosh(), 0.0), Complex64::new(l2.sinh(), 0.0));
        let gens: Vec<MoebiusElement> = (0..4)
            .map(|k| {
                let r = MoebiusElement::disk_rotation(k as f64 * PI / 4.0);
                r.compose(&base).compose(&r.inverse())
            })
            .collect();
        let labels: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();

        // side k has its midpoint in direction k pi/4 at hyperbolic distance
        // `apothem`; the side geodesic circle follows from orthogonality
        let q = (apothem / 2.0).tanh();
        let center_abs = (q + 1.0 / q) / 2.0;
        let radius = (1.0 / q - q) / 2.0;
        let mut sides = Vec::with_capacity(8);
        for k in 0..8usize {
            let dir = Complex64::from_polar(center_abs, k as f64 * PI / 4.0);
            let letter = if k < 4 {
                Letter { gen: k, inv: true } // beyond side k lies g_k F
            } else {
                Letter { gen: k - 4, inv: false }
            };
            sides.push(Side { center: dir, radius, partner: (k + 4) % 8, letter });
        }
        // vertex cycle of the octagon: product in this order is the relator
        let relator_indices = [4usize, 1, 6, 3, 0, 5, 2, 7];
        let relator = Word(
            relator_indices
                .iter()
                .map(|&i| {
                    if i < 4 {
                        Letter { gen: i, inv: false }
                    } else {
                        Letter { gen: i - 4, inv: true }
                    }
                })
                .collect(),
        );
        let circumradius_e = (cot8 * cot8).acosh() / 2.0; // hyperbolic R/2
        let re = circumradius_e.tanh();
        let vertices: Vec<Complex64> =
            (0..8).map(|k| Complex64::from_polar(re, k as f64 * PI / 4.0 - PI / 8.0)).collect();
        let group = SurfaceGroup {
            family: GroupFamily::ClosedGenus2,
            labels,
            generators: gens,
            genus: 2,
            cusp_words: vec![],
            relator_words: vec![relator],
            polygon_vertices: vertices,
            sides,
            cusps: vec![],
        };
        group.validate()?;
        Ok(group)
    }

    /// Group from user-supplied matrices; meshing requires a built-in family.
    pub fn custom(
        labels: Vec<String>,
        matrices: Vec<[[f64; 2]; 2]>,
        relator_words: Vec<Word>,
        cusp_words: Vec<Word>,
        genus: usize,
    ) -> Result<Self, LabError> {
        let generators = matrices
            .into_iter()
            .map(MoebiusElement::from_matrix)
            .collect::<Result<Vec<_>, _>>()?;
        let group = SurfaceGroup {
            family: GroupFamily::Custom,
            labels,
            generators,
            genus,
            cusp_words,
            relator_words,
            polygon_vertices: vec![],
            sides: vec![],
            cusps: vec![],
        };
        group.validate()?;
        Ok(group)
    }

    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * self.genus as i64 - self.cusps_count() as i64
    }

    pub fn cusps_count(&self) -> usize {
        if self.family == GroupFamily::Custom {
            self.cusp_words.len()
        } else {
            self.cusps.len()
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.labels.len() != self.generators.len() {
            return Err(LabError::GroupSpec("labels/generators length mismatch".into()));
        }
        if self.euler_characteristic() >= 0 {
            return Err(LabError::GroupSpec(format!(
                "Euler characteristic {} must be negative",
                self.euler_characteristic()
            )));
        }
        for w in &self.relator_words {
            let m = w.matrix(&self.generators);
            if !m.is_identity(1e-9) {
                return Err(LabError::GroupSpec(format!(
                    "relator {} does not evaluate to ±identity",
                    w.display(&self.labels)
                )));
            }
        }
        for w in &self.cusp_words {
            let m = w.matrix(&self.generators);
            if !m.is_parabolic(1e-9) || m.is_identity(1e-9) {
                return Err(LabError::GroupSpec(format!(
                    "cusp word {} is not parabolic (|trace| = {})",
                    w.display(&self.labels),
                    m.trace().abs()
                )));
            }
        }
        // side pairing maps its side onto the partner side
        for (k, side) in self.sides.iter().enumerate() {
            let g = self.letter_element(&side.letter);
            let partner = &self.sides[side.partner];
            for t in [0.25, 0.5, 0.75] {
                if let Some(p) = self.side_point(k, t) {
                    let img = g.apply(p);
                    let dev = ((img - partner.center).norm() - partner.radius).abs();
                    if dev > 1e-8 {
                        return Err(LabError::GroupSpec(format!(
                            "side {k} pairing misses partner by {dev:.2e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn letter_element(&self, l: &Letter) -> MoebiusElement {
        if l.inv {
            self.generators[l.gen].inverse()
        } else {
            self.generators[l.gen]
        }
    }

    /// A point on side `k` at parameter `t` (arc between the polygon vertices).
    fn side_point(&self, k: usize, t: f64) -> Option<Complex64> {
        let side = &self.sides[k];
        let n = self.polygon_vertices.len();
        if n == 0 {
            return None;
        }
        // side k joins vertex k and vertex k+1 in both families
        let v0 = self.polygon_vertices[k % n];
        let v1 = self.polygon_vertices[(k + 1) % n];
        let a0 = (v0 - side.center).arg();
        let mut a1 = (v1 - side.center).arg();
        // shorter arc
        while a1 - a0 > PI {
            a1 -= TAU;
        }
        while a1 - a0 < -PI {
            a1 += TAU;
        }
        let ang = a0 + t * (a1 - a0);
        Some(side.center + Complex64::from_polar(side.radius, ang))
    }

    /// True when `z` lies in the closed fundamental polygon.
    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() < 1.0 && self.sides.iter().all(|s| (z - s.center).norm() >= s.radius - 1e-13)
    }

    /// Signed depth beyond the most violated side (negative inside).
    fn worst_side(&self, z: Complex64) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for (k, s) in self.sides.iter().enumerate() {
            let d = s.radius - (z - s.center).norm(); // positive when beyond the side
            if d > 1e-13 && worst.map_or(true, |(_, w)| d > w) {
                worst = Some((k, d));
            }
        }
        worst
    }

    /// Folds a disk point into the fundamental polygon.
    ///
    /// Returns the folded point and the word `gamma` with `folded = gamma(z)`.
    pub fn fold(&self, z: Complex64, max_steps: usize) -> Result<(Complex64, Word), LabError> {
        if self.sides.is_empty() {
            return Err(LabError::GroupSpec("group has no fundamental polygon".into()));
        }
        let mut z = z;
        let mut letters: Vec<Letter> = Vec::new();
        for _ in 0..max_steps {
            match self.worst_side(z) {
                None => {
                    letters.reverse();
                    return Ok((z, Word(letters)));
                }
                Some((k, _)) => {
                    let side = &self.sides[k];
                    z = self.letter_element(&side.letter).apply(z);
                    letters.push(side.letter);
                }
            }
        }
        Err(LabError::Geometry(format!("folding did not terminate for {z}")))
    }

    /// Chart coordinates `(cusp index, u, v)` when `z` lies in a cusp corner
    /// above `v_floor`.
    pub fn cusp_coordinates(&self, z: Complex64, v_floor: f64) -> Option<(usize, f64, f64)> {
        let w = cayley_inv(z);
        for (ci, chart) in self.cusps.iter().enumerate() {
            for corner in &chart.corners {
                let wp = corner.conjugator.apply_h(w);
                let margin = 1e-9;
                if wp.im > v_floor
                    && wp.re >= corner.u0 - margin
                    && wp.re <= corner.u0 + corner.width + margin
                {
                    return Some((ci, wp.re, wp.im));
                }
            }
        }
        None
    }

    /// Disk point of the chart coordinates of cusp `ci` (u taken mod width).
    pub fn cusp_point(&self, ci: usize, u: f64, v: f64) -> Complex64 {
        let chart = &self.cusps[ci];
        let um = u.rem_euclid(chart.width);
        for corner in &chart.corners {
            if um >= corner.u0 - 1e-12 && um <= corner.u0 + corner.width + 1e-12 {
                let w = corner.conjugator.inverse().apply_h(Complex64::new(um, v));
                return cayley(w);
            }
        }
        unreachable!("corners tile the cusp width");
    }

    /// Index of the corner whose u-range contains `u` (reduced mod width).
    pub fn cusp_corner_of(&self, ci: usize, u: f64) -> usize {
        let chart = &self.cusps[ci];
        let um = u.rem_euclid(chart.width);
        for (k, corner) in chart.corners.iter().enumerate() {
            if um >= corner.u0 - 1e-12 && um < corner.u0 + corner.width {
                return k;
            }
        }
        chart.corners.len() - 1
    }

    /// Analytic continuation of one corner frame to arbitrary `u`: the disk
    /// point of `N_k^{-1}(u + iv)` with no corner switching. Within the
    /// corner's own u-range this is a fundamental-domain point; beyond, it is
    /// the unfolded continuation into neighboring translates.
    pub fn cusp_frame_point(&self, ci: usize, corner: usize, u: f64, v: f64) -> Complex64 {
        let c = &self.cusps[ci].corners[corner];
        cayley(c.conjugator.inverse().apply_h(Complex64::new(u, v)))
    }

    /// One full lift of the horocircle `{v = const}`: the straight horocyclic
    /// line in the corner-0 frame, where the cusp sits at infinity. Satisfies
    /// `point(u + width) = seam(point(u))` exactly.
    pub fn cusp_point_unfolded(&self, ci: usize, u: f64, v: f64) -> Complex64 {
        self.cusp_frame_point(ci, 0, u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    // independent 2x2 oracle used by the tests only
    fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        [
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ]
    }

    #[test]
    fn punctured_torus_commutator_is_parabolic() {
        let a = [[1.0, 1.0], [1.0, 2.0]];
        let b = [[1.0, -1.0], [-1.0, 2.0]];
        let ai = [[2.0, -1.0], [-1.0, 1.0]];
        let bi = [[2.0, 1.0], [1.0, 1.0]];
        let comm = mat_mul(mat_mul(a, b), mat_mul(ai, bi));
        assert_abs_diff_eq!(comm[0][0] + comm[1][1], -2.0, epsilon = 1e-12);
        let g = SurfaceGroup::punctured_torus().unwrap();
        assert_eq!(g.euler_characteristic(), -1);
        let m = g.cusp_words[0].matrix(&g.generators);
        assert!(m.is_parabolic(1e-12));
    }

    #[test]
    fn octagon_relator_is_identity() {
        let g = SurfaceGroup::closed_genus2().unwrap();
        assert_eq!(g.euler_characteristic(), -2);
        // oracle: plain matrix products of the side pairings in relator order
        let mats: Vec<[[f64; 2]; 2]> = g.generators.iter().map(|m| m.m).collect();
        let inv = |m: [[f64; 2]; 2]| [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
        let mut prod = [[1.0, 0.0], [0.0, 1.0]];
        for l in &g.relator_words[0].0 {
            let m = if l.inv { inv(mats[l.gen]) } else { mats[l.gen] };
            prod = mat_mul(prod, m);
        }
        let s = if prod[0][0] >= 0.0 { 1.0 } else { -1.0 };
        assert_abs_diff_eq!(s * prod[0][0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s * prod[1][1], 1.0, epsilon = 1e-9);
        assert!(prod[0][1].abs() < 1e-9 && prod[1][0].abs() < 1e-9);
    }

    #[test]
    fn custom_group_rejects_bad_specs() {
        // free abelian-ish pair with a false relator
        let labels = vec!["A".into(), "B".into()];
        let a = [[1.0, 1.0], [1.0, 2.0]];
        let b = [[1.0, -1.0], [-1.0, 2.0]];
        let w = Word(vec![Letter { gen: 0, inv: false }, Letter { gen: 1, inv: false }]);
        assert!(SurfaceGroup::custom(labels.clone(), vec![a, b], vec![w.clone()], vec![], 1).is_err());
        // cusp word that is not parabolic
        assert!(SurfaceGroup::custom(labels.clone(), vec![a, b], vec![], vec![w], 1).is_err());
        // nonnegative Euler characteristic
        assert!(SurfaceGroup::custom(labels, vec![a, b], vec![], vec![], 0).is_err());
    }

    #[test]
    fn polygon_membership_and_folding() {
        let g = SurfaceGroup::punctured_torus().unwrap();
        assert!(g.contains(Complex64::new(0.0, 0.0)));
        assert!(g.contains(Complex64::new(0.4, 0.0)));
        assert!(!g.contains(Complex64::new(0.4, 0.4))); // inside the 1+i circle
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let z = Complex64::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
            if z.norm() >= 0.92 {
                continue;
            }
            let (folded, word) = g.fold(z, 200).unwrap();
            assert!(g.contains(folded), "fold landed outside at {folded}");
            let img = word.matrix(&g.generators).apply(z);
            assert!((img - folded).norm() < 1e-9, "word does not reproduce the fold");
        }
    }

    #[test]
    fn octagon_folding() {
        let g = SurfaceGroup::closed_genus2().unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..200 {
            let z = Complex64::new(rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95));
            if z.norm() >= 0.97 {
                continue;
            }
            let (folded, word) = g.fold(z, 400).unwrap();
            assert!(g.contains(folded));
            let img = word.matrix(&g.generators).apply(z);
            assert!((img - folded).norm() < 1e-9);
        }
    }

    #[test]
    fn cusp_chart_round_trip_and_seam() {
        let g = SurfaceGroup::punctured_torus().unwrap();
        let chart = &g.cusps[0];
        assert_abs_diff_eq!(chart.corners.iter().map(|c| c.width).sum::<f64>(), chart.width, epsilon = 1e-12);
        // chart -> disk -> chart round trip
        for &(u, v) in &[(0.3, 4.0), (2.5, 7.0), (4.2, 3.5), (5.5, 11.0)] {
            let z = g.cusp_point(0, u, v);
            let (ci, u2, v2) = g.cusp_coordinates(z, 2.0).expect("in cusp region");
            assert_eq!(ci, 0);
            assert_abs_diff_eq!(u2, u, epsilon = 1e-9);
            assert_abs_diff_eq!(v2, v, epsilon = 1e-9);
        }
        // unfolded chart points continue through the seam: the seam word maps
        // the lift at u to the lift at u + width, for every corner's u-range
        let seam = chart.seam_word.matrix(&g.generators);
        for &(u, v) in &[(0.7, 5.0), (2.4, 9.0), (3.3, 9.0), (5.6, 4.0)] {
            let z_in = g.cusp_point_unfolded(0, u, v);
            let z_out = g.cusp_point_unfolded(0, u + chart.width, v);
            assert!((seam.apply(z_in) - z_out).norm() < 1e-9, "seam relation fails at u={u}");
        }
        // the seam conjugates to the translation by +width in corner-0 frame
        let n0 = chart.corners[0].conjugator;
        let w_img = n0.apply_h(seam.apply_h(n0.inverse().apply_h(Complex64::new(0.3, 7.0))));
        assert_abs_diff_eq!(w_img.re, 0.3 + chart.width, epsilon = 1e-9);
        assert_abs_diff_eq!(w_img.im, 7.0, epsilon = 1e-9);
    }

    #[test]
    fn word_parse_and_display() {
        let g = SurfaceGroup::punctured_torus().unwrap();
        let w = Word::parse("A B^-1 A", &g.labels).unwrap();
        assert_eq!(w.display(&g.labels), "A B^-1 A");
        assert!(Word::parse("Z", &g.labels).is_err());
        let wi = w.inverse();
        assert!(w.matrix(&g.generators).compose(&wi.matrix(&g.generators)).is_identity(1e-12));
    }
}
