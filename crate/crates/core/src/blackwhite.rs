//! Black and white point selection.
//!
//! Among all chromaticities `c` whose ray through the origin meets the gamut
//! intersection `P`, pick the one maximizing the luminosity ratio between the
//! farthest point `λ⁺(c)` and the nearest point `λ⁻(c)` of `P` on that ray.
//! The optimum sits at a vertex of the overlay of the two chromaticity
//! subdivisions induced by the near facets and the far facets of `P`. Those
//! overlay vertices are enumerated directly:
//!
//! 1. near-side vertices of `P`, paired with the first far facet plane hit by
//!    their ray;
//! 2. far-side vertices of `P`, paired with the last near facet plane;
//! 3. crossings between the chromaticity projections of near-side and
//!    far-side edges.

use std::cmp::Ordering;

use nalgebra::Matrix3;
use serde::Serialize;
use thiserror::Error;

use crate::color::{chromaticity, luminosity, Chroma, Color, ColorError, LuminosityWeights};
use crate::polytope::{classify_facets, contains_color, face_lattice, Polytope, PolytopeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlackWhiteError {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error("no black/white candidates found")]
    NoCandidates,
}

/// Which overlay vertex class produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    LowerVertex,
    UpperVertex,
    EdgeCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateChroma {
    pub chroma: Chroma,
    pub source: CandidateSource,
    pub lambda_minus: Color,
    pub lambda_plus: Color,
}

impl CandidateChroma {
    /// Ratio of channel sums, i.e. of ray parameters. Along a ray through the
    /// origin this equals the luminosity ratio for every linear luminosity.
    pub fn ray_ratio(&self) -> f64 {
        self.lambda_plus.sum() / self.lambda_minus.sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BwSelection {
    pub k: Color,
    pub w: Color,
    pub chroma: Chroma,
    /// `luminosity(W) / luminosity(K)`.
    pub ratio: f64,
    pub candidate_count: usize,
}

/// Enumerates the overlay-vertex candidates of `p`.
pub fn candidate_chromaticities(p: &Polytope) -> Result<Vec<CandidateChroma>, BlackWhiteError> {
    let class = classify_facets(p)?;
    let tol = p.tol();
    let mut out = Vec::new();

    let on_side = |facets: &[usize], side: &[usize]| facets.iter().any(|f| side.binary_search(f).is_ok());
    let mut lower = class.lower.clone();
    lower.sort_unstable();
    let mut upper = class.upper.clone();
    upper.sort_unstable();

    let mut push = |c: CandidateChroma| {
        if contains_color(p, &c.lambda_minus, tol) && contains_color(p, &c.lambda_plus, tol) {
            out.push(c);
        }
    };

    for (vi, vf) in p.vertex_facets().iter().enumerate() {
        let v = p.vertex3(vi);
        let chroma = chromaticity(&v)?;
        let dir = chroma.direction();
        let t_v = v.sum();
        if on_side(vf, &lower) {
            if let Some(t) = nearest_crossing(p, &class.upper, &dir) {
                push(CandidateChroma {
                    chroma,
                    source: CandidateSource::LowerVertex,
                    lambda_minus: v,
                    lambda_plus: dir * t.max(t_v),
                });
            }
        }
        if on_side(vf, &upper) {
            if let Some(t) = farthest_crossing(p, &class.lower, &dir) {
                push(CandidateChroma {
                    chroma,
                    source: CandidateSource::UpperVertex,
                    lambda_minus: dir * t.min(t_v),
                    lambda_plus: v,
                });
            }
        }
    }

    let (lower_edges, upper_edges) = side_edges(p, &lower, &upper);
    for &(a, b) in &lower_edges {
        for &(c, d) in &upper_edges {
            let (s0, s1) = (p.vertex3(a), p.vertex3(b));
            let (u0, u1) = (p.vertex3(c), p.vertex3(d));
            if let Some((near, far)) = ray_through_segments(&s0, &s1, &u0, &u1) {
                push(CandidateChroma {
                    chroma: chromaticity(&near)?,
                    source: CandidateSource::EdgeCrossing,
                    lambda_minus: near,
                    lambda_plus: far,
                });
            }
        }
    }
    Ok(out)
}

/// Smallest positive ray parameter at which the ray `t * dir` crosses one of
/// the given facet planes from inside.
fn nearest_crossing(p: &Polytope, facets: &[usize], dir: &Color) -> Option<f64> {
    facets
        .iter()
        .filter_map(|&f| {
            let h = &p.facets()[f];
            let nd = h.normal[0] * dir.x + h.normal[1] * dir.y + h.normal[2] * dir.z;
            (nd > 0.0).then(|| h.offset / nd)
        })
        .filter(|t| *t > 0.0)
        .min_by(f64::total_cmp)
}

fn farthest_crossing(p: &Polytope, facets: &[usize], dir: &Color) -> Option<f64> {
    facets
        .iter()
        .filter_map(|&f| {
            let h = &p.facets()[f];
            let nd = h.normal[0] * dir.x + h.normal[1] * dir.y + h.normal[2] * dir.z;
            (nd < 0.0).then(|| h.offset / nd)
        })
        .filter(|t| *t > 0.0)
        .max_by(f64::total_cmp)
}

type Edges = Vec<(usize, usize)>;

/// Edges of `p` lying on at least one near facet, and those on at least one
/// far facet.
fn side_edges(p: &Polytope, lower: &[usize], upper: &[usize]) -> (Edges, Edges) {
    let lattice = face_lattice(p);
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for &e in &lattice.by_dim[1] {
        let vs = &lattice.faces[e].vertices;
        let (a, b) = (vs[0], vs[1]);
        let shared: Vec<usize> = p.vertex_facets()[a]
            .iter()
            .copied()
            .filter(|f| p.vertex_facets()[b].contains(f))
            .collect();
        if shared.iter().any(|f| lower.binary_search(f).is_ok()) {
            lo.push((a, b));
        }
        if shared.iter().any(|f| upper.binary_search(f).is_ok()) {
            hi.push((a, b));
        }
    }
    (lo, hi)
}

/// Finds the ray through the origin meeting both closed segments `[s0, s1]`
/// and `[u0, u1]`, if it is unique. Returns the points on the first and on the
/// second segment, ordered so the nearer one comes first.
///
/// Solves `s0 + a (s1 - s0) = m u0 + n (u1 - u0)` for `(a, m, n)`; the second
/// point is `u0 + (n / m)(u1 - u0)`.
fn ray_through_segments(s0: &Color, s1: &Color, u0: &Color, u1: &Color) -> Option<(Color, Color)> {
    let es = s1 - s0;
    let eu = u1 - u0;
    let a = Matrix3::from_columns(&[es, -u0, -eu]);
    let scale = es.norm() * u0.norm() * eu.norm();
    let det = a.determinant();
    if !(det.abs() > 1e-12 * scale) {
        return None;
    }
    let sol = a.try_inverse()? * (-s0);
    let (alpha, mu, nu) = (sol[0], sol[1], sol[2]);
    const EDGE_TOL: f64 = 1e-12;
    if !(mu > 0.0) {
        return None;
    }
    let beta = nu / mu;
    if !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&alpha) || !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&beta) {
        return None;
    }
    let on_s = s0 + es * alpha.clamp(0.0, 1.0);
    let on_u = u0 + eu * beta.clamp(0.0, 1.0);
    if on_s.sum() <= on_u.sum() {
        Some((on_s, on_u))
    } else {
        None
    }
}

/// Total order used to pick the winning candidate: larger ray ratio, then
/// brighter white, then smaller chromaticity `(u, v)`. Ratio and brightness
/// comparisons treat relative differences below `1e-12` as ties.
///
/// Brightness is the channel sum of the white point rather than its weighted
/// luminosity. Optimal rays often form a continuum (parallel lower and upper
/// facets), and a weighted comparison across different rays would make the
/// choice depend on the weights.
fn better(a: &CandidateChroma, b: &CandidateChroma) -> Ordering {
    const REL: f64 = 1e-12;
    let cmp_tol = |x: f64, y: f64| {
        if (x - y).abs() <= REL * x.abs().max(y.abs()) {
            Ordering::Equal
        } else {
            x.total_cmp(&y)
        }
    };
    cmp_tol(a.ray_ratio(), b.ray_ratio())
        .then_with(|| cmp_tol(a.lambda_plus.sum(), b.lambda_plus.sum()))
        .then_with(|| b.chroma.u.total_cmp(&a.chroma.u))
        .then_with(|| b.chroma.v.total_cmp(&a.chroma.v))
}

/// Picks `K` and `W` maximizing the luminosity ratio.
pub fn select_black_white(p: &Polytope, w: &LuminosityWeights) -> Result<BwSelection, BlackWhiteError> {
    let cands = candidate_chromaticities(p)?;
    select_from(&cands, w)
}

pub fn select_from(cands: &[CandidateChroma], w: &LuminosityWeights) -> Result<BwSelection, BlackWhiteError> {
    let best = cands
        .iter()
        .reduce(|best, c| if better(c, best) == Ordering::Greater { c } else { best })
        .ok_or(BlackWhiteError::NoCandidates)?;
    Ok(BwSelection {
        k: best.lambda_minus,
        w: best.lambda_plus,
        chroma: best.chroma,
        ratio: luminosity(&best.lambda_plus, w) / luminosity(&best.lambda_minus, w),
        candidate_count: cands.len(),
    })
}
