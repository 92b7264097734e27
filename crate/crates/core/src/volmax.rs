//! Volume maximization with fixed black and white points.
//!
//! With `K` and `W` fixed, a gamut is determined by the pair `(R, B)`; `G`
//! and the secondaries follow linearly. The pairs keeping all eight corners
//! inside every projector gamut form a 6-dimensional polytope. Its volume
//! objective is a quadratic form, so the maximum over each simplex of a
//! boundary triangulation is either at a vertex or at the critical point of
//! a negative definite restriction.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::color::{self, Color, ColorError, CornerSet, Gamut};
use crate::polytope::{
    self, face_lattice, intersect_halfspaces_within, pulling_triangulation, BoundingBox, Halfspace, Polytope,
    PolytopeError, Simplex,
};

/// Barycentric slack allowed for an interior critical point.
pub const BARYCENTRIC_TOL: f64 = 1e-9;

/// Relative eigenvalue threshold for negative definiteness.
pub const DEFINITENESS_TOL: f64 = 1e-10;

/// Optimal volumes at or below this are reported as degenerate.
pub const DEGENERATE_VOLUME: f64 = 1e-12;

/// Values this close (relative) are ties, broken by the point.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolmaxError {
    #[error("no gamuts given")]
    NoGamuts,
    #[error("gamut {index}: {source}")]
    Gamut {
        index: usize,
        #[source]
        source: ColorError,
    },
    #[error("{point} violates gamut {gamut} by {violation:e}")]
    InfeasibleAnchor {
        point: &'static str,
        gamut: usize,
        violation: f64,
    },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error("best feasible volume {volume:e} is degenerate")]
    DegenerateOptimum { volume: f64 },
    #[error(transparent)]
    Color(#[from] ColorError),
}

/// A point `(R, B)` of the 6-dimensional search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RbPoint {
    pub r: Color,
    pub b: Color,
}

impl RbPoint {
    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self {
            r: Vector3::new(x[0], x[1], x[2]),
            b: Vector3::new(x[3], x[4], x[5]),
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(6, self.r.iter().chain(self.b.iter()).copied())
    }
}

/// Each derived corner as `a_r R + a_b B + c_k K + c_w W`.
const CORNER_FORMS: [(&str, f64, f64, f64, f64); 6] = [
    ("R", 1.0, 0.0, 0.0, 0.0),
    ("B", 0.0, 1.0, 0.0, 0.0),
    ("G", -1.0, -1.0, 2.0, 1.0),
    ("C", -1.0, 0.0, 1.0, 1.0),
    ("M", 1.0, 1.0, -1.0, 0.0),
    ("Y", 0.0, -1.0, 1.0, 1.0),
];

/// The `36n` halfspaces in `(R, B)` keeping every corner of the gamut
/// spanned by `K, R, B, W` inside every input gamut.
pub fn gamma_halfspaces(gamuts: &[Gamut], k: &Color, w: &Color) -> Result<Vec<Halfspace>, VolmaxError> {
    if gamuts.is_empty() {
        return Err(VolmaxError::NoGamuts);
    }
    let mut out = Vec::with_capacity(36 * gamuts.len());
    for (gi, g) in gamuts.iter().enumerate() {
        let hs = color::gamut_halfspaces(g).map_err(|source| VolmaxError::Gamut { index: gi, source })?;
        let scale = hs.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
        for h in &hs {
            let n = Vector3::new(h.normal[0], h.normal[1], h.normal[2]);
            for (point, x) in [("K", k), ("W", w)] {
                let violation = n.dot(x) - h.offset;
                if violation > polytope::DEFAULT_TOL * scale {
                    return Err(VolmaxError::InfeasibleAnchor {
                        point,
                        gamut: gi,
                        violation,
                    });
                }
            }
            for &(_, ar, ab, ck, cw) in &CORNER_FORMS {
                let normal = DVector::from_iterator(6, (n * ar).iter().chain((n * ab).iter()).copied());
                let offset = h.offset - n.dot(&(k * ck + w * cw));
                out.push(Halfspace::new(normal, offset));
            }
        }
    }
    Ok(out)
}

/// `x^T H x / 2 + g^T x + c` on the 6 coordinates of `(R, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.gradient.dot(x) + self.constant
    }

    /// Largest absolute eigenvalue of the hessian.
    pub fn scale(&self) -> f64 {
        SymmetricEigen::new(self.hessian.clone()).eigenvalues.amax()
    }
}

/// The signed volume `det(R - K, W - K, B - K)` as a quadratic in `(R, B)`.
///
/// This equals `det(R - K, G - K, B - K)` for the gamut with corners
/// `K, R, G, B` and white `W`.
pub fn vol_objective(k: &Color, w: &Color) -> QuadraticObjective {
    let s: Matrix3<f64> = (w - k).cross_matrix();
    let mut hessian = DMatrix::zeros(6, 6);
    hessian.view_mut((0, 3), (3, 3)).copy_from(&s);
    hessian.view_mut((3, 0), (3, 3)).copy_from(&s.transpose());
    let sk = s * k;
    let gradient = DVector::from_iterator(6, (-sk).iter().chain(sk.iter()).copied());
    QuadraticObjective {
        hessian,
        gradient,
        constant: 0.0,
    }
}

/// Where the objective peaks on one simplex, if that is a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCandidate {
    pub simplex: Simplex,
    pub point: DVector<f64>,
    pub value: f64,
}

/// The maximum of `q` over the relative interior of the simplex with the
/// given vertex coordinates, when the restriction is negative definite and
/// its critical point lies in the simplex. A single vertex is always its own
/// candidate.
///
/// `scale` sets the definiteness threshold; pass [`QuadraticObjective::scale`].
pub fn restricted_max(
    simplex: &Simplex,
    points: &[DVector<f64>],
    q: &QuadraticObjective,
    scale: f64,
) -> Option<SimplexCandidate> {
    let k = points.len() - 1;
    let p0 = &points[0];
    if k == 0 {
        return Some(SimplexCandidate {
            simplex: simplex.clone(),
            point: p0.clone(),
            value: q.value(p0),
        });
    }
    let dim = p0.len();
    let edges = DMatrix::from_fn(dim, k, |r, c| points[c + 1][r] - p0[r]);
    let qr = edges.qr();
    let basis = qr.q();
    let rmat = qr.r();

    let a = basis.transpose() * &q.hessian * &basis;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a.clone());
    if scale <= 0.0 || eig.eigenvalues.iter().any(|&l| l >= -DEFINITENESS_TOL * scale) {
        return None;
    }
    let b = basis.transpose() * (&q.hessian * p0 + &q.gradient);
    // Critical point: a y = -b, with -a positive definite.
    let y = (-&a).cholesky()?.solve(&b);

    let lam = rmat.solve_upper_triangular(&y)?;
    let lam0 = 1.0 - lam.sum();
    if lam0 < -BARYCENTRIC_TOL || lam.iter().any(|&l| l < -BARYCENTRIC_TOL) {
        return None;
    }
    let mut bary: Vec<f64> = std::iter::once(lam0)
        .chain(lam.iter().copied())
        .map(|l| l.max(0.0))
        .collect();
    let total: f64 = bary.iter().sum();
    bary.iter_mut().for_each(|l| *l /= total);
    let point = points
        .iter()
        .zip(&bary)
        .fold(DVector::zeros(dim), |acc, (p, &l)| acc + p * l);
    let value = q.value(&point);
    Some(SimplexCandidate {
        simplex: simplex.clone(),
        point,
        value,
    })
}

/// Counts from one volume maximization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolmaxStats {
    pub halfspaces: usize,
    pub gamma_vertices: usize,
    pub gamma_facets: usize,
    /// Simplices of the boundary complex, by dimension.
    pub simplices_by_dim: Vec<usize>,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMax {
    pub point: RbPoint,
    pub corners: CornerSet,
    pub volume: f64,
    pub stats: VolmaxStats,
}

/// Orders candidates by value and breaks near-ties by the lexicographically
/// larger point.
fn better(a: &SimplexCandidate, b: &SimplexCandidate) -> bool {
    let tie = TIE_TOL * a.value.abs().max(b.value.abs()).max(1e-300);
    if (a.value - b.value).abs() > tie {
        return a.value > b.value;
    }
    let lex = a
        .point
        .iter()
        .zip(b.point.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal);
    lex == Ordering::Greater
}

/// Maximizes the gamut volume over all `(R, B)` keeping every corner inside
/// every gamut, for fixed `K` and `W`.
pub fn maximize_volume(gamuts: &[Gamut], k: &Color, w: &Color) -> Result<VolumeMax, VolmaxError> {
    maximize_volume_tol(gamuts, k, w, polytope::DEFAULT_TOL)
}

/// As [`maximize_volume`], with the polytope tolerance given.
pub fn maximize_volume_tol(gamuts: &[Gamut], k: &Color, w: &Color, tol: f64) -> Result<VolumeMax, VolmaxError> {
    let hs = gamma_halfspaces(gamuts, k, w)?;
    let bounds = crate::gamut_bounds(gamuts)
        .ok_or(VolmaxError::NoGamuts)?
        .enlarged(0.1, 1.0);
    let lo = DVector::from_iterator(6, bounds.lo.iter().chain(bounds.lo.iter()).copied());
    let hi = DVector::from_iterator(6, bounds.hi.iter().chain(bounds.hi.iter()).copied());
    let gamma = intersect_halfspaces_within(&hs, 6, tol, &BoundingBox::new(lo, hi))?;
    maximize_over(&gamma, hs.len(), k, w)
}

/// The simplex scan of [`maximize_volume`] over an already built `Γ`.
pub fn maximize_over(gamma: &Polytope, halfspaces: usize, k: &Color, w: &Color) -> Result<VolumeMax, VolmaxError> {
    let lattice = face_lattice(gamma);
    let tri = pulling_triangulation(gamma, &lattice);
    let q = vol_objective(k, w);
    let scale = q.scale();

    let mut best: Option<SimplexCandidate> = None;
    let mut candidates = 0;
    for s in &tri.simplices {
        // The objective has only two negative eigenvalues, so no restriction
        // to three or more dimensions is negative definite.
        if s.dim() > 2 {
            continue;
        }
        let pts: Vec<DVector<f64>> = s.vertices.iter().map(|&v| gamma.vertex(v).clone()).collect();
        if let Some(c) = restricted_max(s, &pts, &q, scale) {
            candidates += 1;
            if best.as_ref().is_none_or(|b| better(&c, b)) {
                best = Some(c);
            }
        }
    }
    let best = best.expect("a nonempty polytope has vertices");
    if best.value <= DEGENERATE_VOLUME {
        return Err(VolmaxError::DegenerateOptimum { volume: best.value });
    }
    let point = RbPoint::from_vector(&best.point);
    let gamut = Gamut::from_krbw(*k, point.r, point.b, *w);
    let corners = color::derive_corners(&gamut)?;
    Ok(VolumeMax {
        point,
        corners,
        volume: best.value,
        stats: VolmaxStats {
            halfspaces,
            gamma_vertices: gamma.vertices().len(),
            gamma_facets: gamma.facets().len(),
            simplices_by_dim: tri.count_by_dim(),
            candidates,
        },
    })
}
