//! The classic manual construction of a standard gamut, automated.
//!
//! 1. Intersect the projectors' primary chromaticity triangles and pick the
//!    largest triangle inside the intersection.
//! 2. Average the projectors' black chromaticities; black is the darkest
//!    common color of that chromaticity.
//! 3. White is the brightest common color of the same chromaticity.
//! 4. Lift the triangle to primaries summing to `W - K`.
//! 5. Scale the primaries down until the gamut fits.

use nalgebra::Matrix3;
use serde::Serialize;
use thiserror::Error;

use crate::color::{
    self, chromaticity, luminosity, Chroma, Color, ColorError, Corner, CornerSet, Gamut, LuminosityWeights,
};
use crate::polytope::{ray_extent, Polytope, PolytopeError};
use crate::GamutIntersectionError;

/// Polygon vertices closer than this (in chromaticity units) are merged.
const VERTEX_TOL: f64 = 1e-12;

/// Scales at or below this are rejected.
pub const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoneError {
    #[error("no gamuts given")]
    NoGamuts,
    #[error("gamut {index}: primary chromaticity triangle is degenerate")]
    DegenerateChromaTriangle { index: usize },
    #[error("the primary chromaticity triangles do not overlap")]
    EmptyChromaIntersection,
    #[error("polygon has {0} vertices, need at least 3")]
    TooFewVertices(usize),
    #[error("the chosen chromaticities are collinear")]
    SingularChromaBasis,
    #[error("white minus black lies outside the primary cone (scales {0:?})")]
    NegativeScale([f64; 3]),
    #[error("no positive primary scale keeps the gamut inside")]
    NoPositiveScale,
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Intersection(#[from] GamutIntersectionError),
}

/// A convex polygon on the chromaticity plane, counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChromaPolygon {
    pub vertices: Vec<Chroma>,
}

impl ChromaPolygon {
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    pub fn contains(&self, c: &Chroma, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| orient(&self.vertices[i], &self.vertices[(i + 1) % n], c) >= -tol)
    }
}

fn cross(a: &Chroma, b: &Chroma) -> f64 {
    a.u * b.v - a.v * b.u
}

/// Twice the signed area of `a, b, c`.
fn orient(a: &Chroma, b: &Chroma, c: &Chroma) -> f64 {
    (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u)
}

/// The chromaticities of a gamut's primaries `R - K, G - K, B - K`.
pub fn primary_chromas(g: &Gamut) -> Result<[Chroma; 3], ColorError> {
    Ok([
        chromaticity(&(g.r - g.k))?,
        chromaticity(&(g.g - g.k))?,
        chromaticity(&(g.b - g.k))?,
    ])
}

/// Keeps the part of `poly` left of the directed line `a -> b`.
fn clip(poly: &[Chroma], a: &Chroma, b: &Chroma) -> Vec<Chroma> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        let sp = orient(a, b, p);
        let sq = orient(a, b, q);
        if sp >= 0.0 {
            out.push(*p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push(Chroma::new(p.u + t * (q.u - p.u), p.v + t * (q.v - p.v)));
        }
    }
    out
}

fn dedup(poly: Vec<Chroma>) -> Vec<Chroma> {
    let mut out: Vec<Chroma> = Vec::with_capacity(poly.len());
    for c in poly {
        if out.last().is_none_or(|l| l.distance(&c) > VERTEX_TOL) {
            out.push(c);
        }
    }
    while out.len() > 1 && out[0].distance(out.last().unwrap()) <= VERTEX_TOL {
        out.pop();
    }
    out
}

/// Intersection of the primary chromaticity triangles of all gamuts.
pub fn chroma_intersection(gamuts: &[Gamut]) -> Result<ChromaPolygon, StoneError> {
    let mut poly: Option<Vec<Chroma>> = None;
    for (index, g) in gamuts.iter().enumerate() {
        let mut tri = primary_chromas(g)?;
        let area = orient(&tri[0], &tri[1], &tri[2]);
        if area.abs() <= VERTEX_TOL {
            return Err(StoneError::DegenerateChromaTriangle { index });
        }
        if area < 0.0 {
            tri.swap(1, 2);
        }
        poly = Some(match poly {
            None => tri.to_vec(),
            Some(mut p) => {
                for i in 0..3 {
                    p = clip(&p, &tri[i], &tri[(i + 1) % 3]);
                    if p.is_empty() {
                        break;
                    }
                }
                dedup(p)
            }
        });
    }
    let vertices = poly.ok_or(StoneError::NoGamuts)?;
    let out = ChromaPolygon { vertices };
    if out.vertices.len() < 3 || out.area() <= VERTEX_TOL {
        return Err(StoneError::EmptyChromaIntersection);
    }
    Ok(out)
}

/// The largest-area triangle with vertices among the polygon's, as vertex
/// indices. Ties keep the first triple in lexicographic order.
pub fn largest_triangle(poly: &ChromaPolygon) -> Result<[usize; 3], StoneError> {
    let v = &poly.vertices;
    let n = v.len();
    if n < 3 {
        return Err(StoneError::TooFewVertices(n));
    }
    let mut best = ([0, 1, 2], f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let a = orient(&v[i], &v[j], &v[k]).abs();
                if a > best.1 * (1.0 + 1e-12) {
                    best = ([i, j, k], a);
                }
            }
        }
    }
    Ok(best.0)
}

pub fn triangle_area(a: &Chroma, b: &Chroma, c: &Chroma) -> f64 {
    orient(a, b, c).abs() / 2.0
}

/// Assigns the three chromaticities to red, green and blue: among the
/// orderings whose ray directions are right-handed, the one closest to the
/// projectors' mean primary chromaticities.
pub fn label_primaries(tri: [Chroma; 3], gamuts: &[Gamut]) -> Result<[Chroma; 3], StoneError> {
    let n = gamuts.len() as f64;
    let mut mean = [Chroma::new(0.0, 0.0); 3];
    for g in gamuts {
        for (m, c) in mean.iter_mut().zip(primary_chromas(g)?) {
            m.u += c.u / n;
            m.v += c.v / n;
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut best: Option<([Chroma; 3], f64)> = None;
    for p in PERMS {
        let cand = [tri[p[0]], tri[p[1]], tri[p[2]]];
        let m = Matrix3::from_columns(&[cand[0].direction(), cand[1].direction(), cand[2].direction()]);
        if m.determinant() <= 0.0 {
            continue;
        }
        let cost: f64 = cand.iter().zip(&mean).map(|(c, m)| c.distance(m)).sum();
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((cand, cost));
        }
    }
    best.map(|(c, _)| c).ok_or(StoneError::SingularChromaBasis)
}

/// Scales `s` with `sum_i s_i d(c_i) = W - K`.
pub fn solve_primaries(chromas: &[Chroma; 3], k: &Color, w: &Color) -> Result<[f64; 3], StoneError> {
    let m = Matrix3::from_columns(&[chromas[0].direction(), chromas[1].direction(), chromas[2].direction()]);
    if m.determinant().abs() <= 1e-12 {
        return Err(StoneError::SingularChromaBasis);
    }
    let s = m.lu().solve(&(w - k)).ok_or(StoneError::SingularChromaBasis)?;
    let s = [s[0], s[1], s[2]];
    let tol = MIN_SCALE * (w - k).amax();
    if s.iter().any(|&x| x <= tol) {
        return Err(StoneError::NegativeScale(s));
    }
    Ok(s)
}

/// The largest `alpha` in `(0, 1]` keeping every corner of the gamut with
/// black `k` and primaries `k + alpha * s_i * d_i` inside `p`.
pub fn max_feasible_scale(
    k: &Color,
    directions: &[Color; 3],
    scales: &[f64; 3],
    p: &Polytope,
) -> Result<f64, StoneError> {
    let edges: Vec<Color> = directions.iter().zip(scales).map(|(d, s)| d * *s).collect();
    let mut alpha: f64 = 1.0;
    for h in p.facets() {
        let n = Color::new(h.normal[0], h.normal[1], h.normal[2]);
        let room = (h.offset - n.dot(k)).max(0.0);
        for mask in 1..8usize {
            let v: Color = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).sum();
            let reach = n.dot(&v);
            if reach > 1e-12 * v.norm() {
                alpha = alpha.min(room / reach);
            }
        }
    }
    if alpha <= MIN_SCALE {
        return Err(StoneError::NoPositiveScale);
    }
    Ok(alpha)
}

/// Every intermediate value of the construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoneTrace {
    pub polygon: ChromaPolygon,
    /// Red, green and blue chromaticities.
    pub chroma_triangle: [Chroma; 3],
    pub black_chroma: Chroma,
    pub k: Color,
    pub w: Color,
    pub k_luminosity: f64,
    pub w_luminosity: f64,
    pub primary_scales: [f64; 3],
    pub alpha: f64,
    pub gamut: Gamut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoneResult {
    pub corners: CornerSet,
    pub volume: f64,
    /// Luminosity ratio of the final white over black.
    pub ratio: f64,
    pub trace: StoneTrace,
}

/// Runs all five steps against the gamut intersection `p` of `gamuts`.
pub fn stone_gamut(gamuts: &[Gamut], p: &Polytope, w: &LuminosityWeights) -> Result<StoneResult, StoneError> {
    if gamuts.is_empty() {
        return Err(StoneError::NoGamuts);
    }
    let polygon = chroma_intersection(gamuts)?;
    let [a, b, c] = largest_triangle(&polygon)?;
    let tri = [polygon.vertices[a], polygon.vertices[b], polygon.vertices[c]];
    let chroma_triangle = label_primaries(tri, gamuts)?;

    let n = gamuts.len() as f64;
    let mut black_chroma = Chroma::new(0.0, 0.0);
    for g in gamuts {
        let c = chromaticity(&g.k)?;
        black_chroma.u += c.u / n;
        black_chroma.v += c.v / n;
    }
    let ext = ray_extent(p, &black_chroma)?;
    let (k, white) = (ext.lambda_minus, ext.lambda_plus);

    let primary_scales = solve_primaries(&chroma_triangle, &k, &white)?;
    let directions = chroma_triangle.map(|c| c.direction());
    let alpha = max_feasible_scale(&k, &directions, &primary_scales, p)?;
    let prim = |i: usize| k + directions[i] * (alpha * primary_scales[i]);
    let gamut = Gamut::new(k, prim(0), prim(1), prim(2));
    let corners = color::derive_corners(&gamut)?;
    let final_w = corners.get(Corner::W);
    Ok(StoneResult {
        corners,
        volume: gamut.volume(),
        // Black and the scaled white share a ray, so channel sums compare
        // as luminosities do.
        ratio: final_w.sum() / k.sum(),
        trace: StoneTrace {
            polygon,
            chroma_triangle,
            black_chroma,
            k,
            w: white,
            k_luminosity: luminosity(&k, w),
            w_luminosity: luminosity(&white, w),
            primary_scales,
            alpha,
            gamut,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cube12, pair};
    use crate::gamut_intersection;
    use crate::polytope::DEFAULT_TOL;
    use crate::rng::XorShift64;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn v(x: f64, y: f64, z: f64) -> Color {
        Vector3::new(x, y, z)
    }

    fn axis() -> [Chroma; 3] {
        [Chroma::new(1.0, 0.0), Chroma::new(0.0, 1.0), Chroma::new(0.0, 0.0)]
    }

    fn poly(pts: &[(f64, f64)]) -> ChromaPolygon {
        ChromaPolygon {
            vertices: pts.iter().map(|&(u, v)| Chroma::new(u, v)).collect(),
        }
    }

    #[test]
    fn cube_chroma_triangle() {
        for gs in [vec![cube12()], vec![cube12(), cube12()]] {
            let p = chroma_intersection(&gs).unwrap();
            assert_eq!(p.vertices.len(), 3);
            for c in axis() {
                assert!(p.vertices.iter().any(|x| x.distance(&c) < 1e-15));
            }
            assert_relative_eq!(p.area(), 0.5);
        }
    }

    #[test]
    fn sliver_intersection_is_inside_both() {
        let k = v(0.0, 0.0, 0.0);
        let a = Gamut::new(k, v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0));
        // Primaries whose triangle barely overlaps the axis one near (1, 0).
        let b = Gamut::new(k, v(2.0, -0.9, 0.1), v(0.9, 0.05, 0.05), v(1.2, 0.0, -0.3));
        let p = chroma_intersection(&[a, b]).unwrap();
        assert!(p.vertices.len() >= 3);
        let ta = ChromaPolygon {
            vertices: primary_chromas(&a).unwrap().to_vec(),
        };
        let mut tb = primary_chromas(&b).unwrap().to_vec();
        if orient(&tb[0], &tb[1], &tb[2]) < 0.0 {
            tb.swap(1, 2);
        }
        let tb = ChromaPolygon { vertices: tb };
        for c in &p.vertices {
            assert!(ta.contains(c, 1e-12) && tb.contains(c, 1e-12), "{c:?}");
        }
        assert!(p.area() < 0.5 * ta.area().abs());
    }

    #[test]
    fn disjoint_triangles_are_rejected() {
        let k = v(0.0, 0.0, 0.0);
        let a = Gamut::new(k, v(1.0, 0.0, 0.0), v(0.9, 0.1, 0.0), v(0.9, 0.0, 0.1));
        let b = Gamut::new(k, v(0.0, 1.0, 0.0), v(0.0, 0.9, 0.1), v(0.1, 0.9, 0.0));
        assert!(matches!(
            chroma_intersection(&[a, b]),
            Err(StoneError::EmptyChromaIntersection)
        ));
    }

    #[test]
    fn largest_triangle_examples() {
        let tri = poly(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(largest_triangle(&tri).unwrap(), [0, 1, 2]);
        let sq = poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let [a, b, c] = largest_triangle(&sq).unwrap();
        assert_relative_eq!(triangle_area(&sq.vertices[a], &sq.vertices[b], &sq.vertices[c]), 0.5);
        let hex: Vec<(f64, f64)> = (0..6)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 3.0;
                (t.cos(), t.sin())
            })
            .collect();
        let hex = poly(&hex);
        let [a, b, c] = largest_triangle(&hex).unwrap();
        assert_eq!([a, b, c], [0, 2, 4]);
        let area = triangle_area(&hex.vertices[a], &hex.vertices[b], &hex.vertices[c]);
        assert_relative_eq!(area, 3.0 * 3f64.sqrt() / 4.0, epsilon = 1e-12);
        assert!(matches!(
            largest_triangle(&poly(&[(0.0, 0.0), (1.0, 0.0)])),
            Err(StoneError::TooFewVertices(2))
        ));
    }

    #[test]
    fn largest_triangle_beats_random_triples() {
        let mut rng = XorShift64::new(9);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 12.0 + rng.range(-0.2, 0.2);
                (t.cos() * rng.range(0.8, 1.0), t.sin() * rng.range(0.8, 1.0))
            })
            .collect();
        let p = poly(&pts);
        let [a, b, c] = largest_triangle(&p).unwrap();
        let best = triangle_area(&p.vertices[a], &p.vertices[b], &p.vertices[c]);
        for _ in 0..10_000 {
            let i = rng.range_usize(0, 11);
            let j = rng.range_usize(0, 11);
            let k = rng.range_usize(0, 11);
            let a = triangle_area(&p.vertices[i], &p.vertices[j], &p.vertices[k]);
            assert!(a <= best * (1.0 + 1e-12), "{a} > {best}");
        }
    }

    #[test]
    fn primaries_examples() {
        let s = solve_primaries(&axis(), &v(1.0, 1.0, 1.0), &v(2.0, 2.0, 2.0)).unwrap();
        assert_eq!(s, [1.0, 1.0, 1.0]);
        let s = solve_primaries(&axis(), &v(1.0, 1.0, 1.0), &v(3.0, 2.0, 2.0)).unwrap();
        assert_eq!(s, [2.0, 1.0, 1.0]);
        let err = solve_primaries(&axis(), &v(1.0, 1.0, 1.0), &v(0.5, 2.0, 2.0));
        assert!(matches!(err, Err(StoneError::NegativeScale(_))));
        let flat = [Chroma::new(0.2, 0.2), Chroma::new(0.4, 0.4), Chroma::new(0.6, 0.6)];
        assert!(matches!(
            solve_primaries(&flat, &v(0.0, 0.0, 0.0), &v(1.0, 1.0, 1.0)),
            Err(StoneError::SingularChromaBasis)
        ));
    }

    #[test]
    fn primaries_round_trip_white() {
        let mut rng = XorShift64::new(4);
        for _ in 0..100 {
            let chromas = [
                Chroma::new(rng.range(0.5, 0.7), rng.range(0.25, 0.35)),
                Chroma::new(rng.range(0.25, 0.35), rng.range(0.5, 0.7)),
                Chroma::new(rng.range(0.1, 0.2), rng.range(0.05, 0.1)),
            ];
            let k = v(rng.range(0.0, 0.1), rng.range(0.0, 0.1), rng.range(0.0, 0.1));
            let w = k
                + (0..3)
                    .map(|i| chromas[i].direction() * rng.range(0.5, 2.0))
                    .sum::<Color>();
            let s = solve_primaries(&chromas, &k, &w).unwrap();
            let prim = |i: usize| k + chromas[i].direction() * s[i];
            let cs = color::derive_corners(&Gamut::new(k, prim(0), prim(1), prim(2))).unwrap();
            assert!((cs.get(Corner::W) - w).amax() <= 1e-10);
        }
    }

    #[test]
    fn scale_examples() {
        let p = gamut_intersection(&[cube12()], DEFAULT_TOL).unwrap();
        let dirs = axis().map(|c| c.direction());
        let k = v(1.0, 1.0, 1.0);
        assert_eq!(max_feasible_scale(&k, &dirs, &[1.0; 3], &p).unwrap(), 1.0);
        assert_relative_eq!(
            max_feasible_scale(&k, &dirs, &[2.0; 3], &p).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let small = gamut_intersection(&[cube12().scaled(0.5).translated(&v(0.5, 0.5, 0.5))], DEFAULT_TOL).unwrap();
        assert!(max_feasible_scale(&k, &dirs, &[2.0; 3], &small).unwrap() <= 0.5);
    }

    #[test]
    fn alpha_is_maximal() {
        let p = gamut_intersection(&[cube12()], DEFAULT_TOL).unwrap();
        let dirs = [v(1.0, 0.1, 0.0), v(0.0, 1.0, 0.2), v(0.3, 0.0, 1.0)];
        let k = v(1.0, 1.0, 1.0);
        let s = [1.3, 0.9, 1.1];
        let a = max_feasible_scale(&k, &dirs, &s, &p).unwrap();
        assert!(a < 1.0);
        let outside = |alpha: f64| {
            let e: Vec<Color> = dirs.iter().zip(&s).map(|(d, s)| d * (alpha * s)).collect();
            let g = Gamut::new(k, k + e[0], k + e[1], k + e[2]);
            Corner::ALL
                .iter()
                .map(|&c| g.corner(c).amax() - 2.0)
                .fold(f64::MIN, f64::max)
        };
        assert!(outside(a) <= 1e-12);
        assert!(outside(a + 1e-6) > 1e-9);
    }

    #[test]
    fn cube_is_recovered() {
        let gs = [cube12()];
        let p = gamut_intersection(&gs, DEFAULT_TOL).unwrap();
        let r = stone_gamut(&gs, &p, &LuminosityWeights::y_channel()).unwrap();
        assert_eq!(r.trace.alpha, 1.0);
        assert_relative_eq!(r.volume, 1.0, epsilon = 1e-12);
        for c in Corner::ALL {
            assert_relative_eq!(r.corners.get(c), cube12().corner(c), epsilon = 1e-12);
        }
        assert_relative_eq!(r.ratio, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pair_is_feasible() {
        let gs = pair();
        let p = gamut_intersection(&gs, DEFAULT_TOL).unwrap();
        let r = stone_gamut(&gs, &p, &LuminosityWeights::y_channel()).unwrap();
        assert!(chromaticity(&r.trace.k).unwrap().distance(&r.trace.black_chroma) < 1e-15);
        assert!(chromaticity(&r.trace.w).unwrap().distance(&r.trace.black_chroma) < 1e-15);
        for g in &gs {
            for (_, c) in r.corners.iter() {
                let x = g.device_coordinates(&c).unwrap();
                assert!(x.iter().all(|t| (-1e-9..=1.0 + 1e-9).contains(t)), "{x:?}");
            }
        }
    }
}
