//! Color algebra of additive (three-channel) gamuts.
//!
//! Colors live in a three-dimensional device-independent tristimulus space.
//! A projector gamut is the parallelepiped spanned from its black point `K`
//! by the three primary edges `R - K`, `G - K` and `B - K`; the remaining four
//! corners follow by additivity.

use nalgebra::{DVector, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::Halfspace;

/// A point in device-independent color space.
pub type Color = Vector3<f64>;

/// Relative threshold applied to `det(R-K, G-K, B-K)` against the product of
/// the edge norms.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Absolute threshold on channel sums.
pub const ZERO_SUM_TOL: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColorError {
    #[error("degenerate gamut: det(R-K, G-K, B-K) = {det:e} is below tolerance")]
    DegenerateGamut { det: f64 },
    #[error("left-handed corner labeling: det(R-K, G-K, B-K) = {det:e} < 0")]
    LeftHanded { det: f64 },
    #[error("color has nonpositive channel sum {sum:e}")]
    ZeroSum { sum: f64 },
    #[error("luminosity weights must be finite, nonnegative and not all zero, got {0:?}")]
    InvalidWeights([f64; 3]),
}

/// The eight corner labels of an additive gamut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    K,
    R,
    G,
    B,
    C,
    M,
    Y,
    W,
}

impl Corner {
    pub const ALL: [Corner; 8] = [
        Corner::K,
        Corner::R,
        Corner::G,
        Corner::B,
        Corner::C,
        Corner::M,
        Corner::Y,
        Corner::W,
    ];

    /// Coefficients `(k, r, g, b)` such that the corner equals
    /// `k*K + r*R + g*G + b*B`.
    pub fn coefficients(self) -> [f64; 4] {
        match self {
            Corner::K => [1.0, 0.0, 0.0, 0.0],
            Corner::R => [0.0, 1.0, 0.0, 0.0],
            Corner::G => [0.0, 0.0, 1.0, 0.0],
            Corner::B => [0.0, 0.0, 0.0, 1.0],
            Corner::C => [-1.0, 0.0, 1.0, 1.0],
            Corner::M => [-1.0, 1.0, 0.0, 1.0],
            Corner::Y => [-1.0, 1.0, 1.0, 0.0],
            Corner::W => [-2.0, 1.0, 1.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Corner::K => "K",
            Corner::R => "R",
            Corner::G => "G",
            Corner::B => "B",
            Corner::C => "C",
            Corner::M => "M",
            Corner::Y => "Y",
            Corner::W => "W",
        }
    }
}

/// A gamut given by its black point and its three primaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamut {
    pub k: Color,
    pub r: Color,
    pub g: Color,
    pub b: Color,
}

/// All eight corners of a gamut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerSet {
    pub k: Color,
    pub r: Color,
    pub g: Color,
    pub b: Color,
    pub c: Color,
    pub m: Color,
    pub y: Color,
    pub w: Color,
}

impl CornerSet {
    pub fn get(&self, corner: Corner) -> Color {
        match corner {
            Corner::K => self.k,
            Corner::R => self.r,
            Corner::G => self.g,
            Corner::B => self.b,
            Corner::C => self.c,
            Corner::M => self.m,
            Corner::Y => self.y,
            Corner::W => self.w,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Corner, Color)> + '_ {
        Corner::ALL.into_iter().map(move |c| (c, self.get(c)))
    }

    pub fn gamut(&self) -> Gamut {
        Gamut {
            k: self.k,
            r: self.r,
            g: self.g,
            b: self.b,
        }
    }
}

impl Gamut {
    pub fn new(k: Color, r: Color, g: Color, b: Color) -> Self {
        Self { k, r, g, b }
    }

    /// Builds the gamut whose white point is `w`, i.e. `G = W + 2K - R - B`.
    pub fn from_krbw(k: Color, r: Color, b: Color, w: Color) -> Self {
        Self {
            k,
            r,
            g: w + 2.0 * k - r - b,
            b,
        }
    }

    /// Edge matrix with columns `R-K`, `G-K`, `B-K`.
    pub fn edge_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.r - self.k, self.g - self.k, self.b - self.k])
    }

    /// Signed volume `det(R-K, G-K, B-K)`.
    pub fn signed_volume(&self) -> f64 {
        self.edge_matrix().determinant()
    }

    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    /// Degeneracy threshold for this gamut's determinant.
    fn det_threshold(&self) -> f64 {
        DEGENERACY_TOL * (self.r - self.k).norm() * (self.g - self.k).norm() * (self.b - self.k).norm()
    }

    /// Fails if the gamut is flat (relative to its edge lengths).
    pub fn check_nondegenerate(&self) -> Result<f64, ColorError> {
        let det = self.signed_volume();
        let thr = self.det_threshold();
        if !det.is_finite() || det.abs() <= thr || thr == 0.0 {
            return Err(ColorError::DegenerateGamut { det });
        }
        Ok(det)
    }

    /// Fails if the gamut is flat or its corners are labeled left-handed.
    pub fn check_oriented(&self) -> Result<(), ColorError> {
        let det = self.check_nondegenerate()?;
        if det < 0.0 {
            return Err(ColorError::LeftHanded { det });
        }
        Ok(())
    }

    pub fn corner(&self, corner: Corner) -> Color {
        let [ck, cr, cg, cb] = corner.coefficients();
        ck * self.k + cr * self.r + cg * self.g + cb * self.b
    }

    pub fn white(&self) -> Color {
        self.corner(Corner::W)
    }

    pub fn translated(&self, by: &Color) -> Self {
        Self::new(self.k + by, self.r + by, self.g + by, self.b + by)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.k * s, self.r * s, self.g * s, self.b * s)
    }

    /// Affine coordinates `(r, g, b)` of `x` in the gamut's edge frame, so
    /// that `x = K + r(R-K) + g(G-K) + b(B-K)`.
    pub fn device_coordinates(&self, x: &Color) -> Option<Vector3<f64>> {
        self.edge_matrix().try_inverse().map(|inv| inv * (x - self.k))
    }
}

/// Derives the eight corners of a nondegenerate gamut.
pub fn derive_corners(g: &Gamut) -> Result<CornerSet, ColorError> {
    g.check_nondegenerate()?;
    Ok(corners_unchecked(g))
}

pub(crate) fn corners_unchecked(g: &Gamut) -> CornerSet {
    CornerSet {
        k: g.k,
        r: g.r,
        g: g.g,
        b: g.b,
        c: g.corner(Corner::C),
        m: g.corner(Corner::M),
        y: g.corner(Corner::Y),
        w: g.corner(Corner::W),
    }
}

/// Weights of a linear luminosity functional: nonnegative and not all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct LuminosityWeights([f64; 3]);

impl LuminosityWeights {
    pub fn new(w: [f64; 3]) -> Result<Self, ColorError> {
        if w.iter().all(|x| x.is_finite() && *x >= 0.0) && w.iter().sum::<f64>() > 0.0 {
            Ok(Self(w))
        } else {
            Err(ColorError::InvalidWeights(w))
        }
    }

    /// Weights selecting only the middle channel, the luminance channel of
    /// XYZ-like spaces. This is the instance default.
    pub fn y_channel() -> Self {
        Self([0.0, 1.0, 0.0])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::from(self.0)
    }
}

impl Default for LuminosityWeights {
    fn default() -> Self {
        Self::y_channel()
    }
}

impl TryFrom<[f64; 3]> for LuminosityWeights {
    type Error = ColorError;

    fn try_from(w: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<LuminosityWeights> for [f64; 3] {
    fn from(w: LuminosityWeights) -> Self {
        w.0
    }
}

pub fn luminosity(c: &Color, w: &LuminosityWeights) -> f64 {
    let [w1, w2, w3] = w.0;
    w1 * c.x + w2 * c.y + w3 * c.z
}

/// Coordinates on the unit-sum plane `x1 + x2 + x3 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chroma {
    pub u: f64,
    pub v: f64,
}

impl Chroma {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Direction of the chromaticity ray, normalized to unit channel sum.
    pub fn direction(&self) -> Color {
        Color::new(self.u, self.v, 1.0 - self.u - self.v)
    }

    pub fn distance(&self, other: &Chroma) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

pub fn chromaticity(c: &Color) -> Result<Chroma, ColorError> {
    let sum = c.x + c.y + c.z;
    if !(sum > ZERO_SUM_TOL) {
        return Err(ColorError::ZeroSum { sum });
    }
    Ok(Chroma::new(c.x / sum, c.y / sum))
}

/// The six facet halfspaces of a gamut parallelepiped, each with a unit
/// outward normal, ordered `r >= 0, r <= 1, g >= 0, g <= 1, b >= 0, b <= 1`
/// in the gamut's device coordinates.
pub fn gamut_halfspaces(g: &Gamut) -> Result<[Halfspace; 6], ColorError> {
    g.check_nondegenerate()?;
    let inv = g
        .edge_matrix()
        .try_inverse()
        .ok_or(ColorError::DegenerateGamut { det: 0.0 })?;
    let mut out: Vec<Halfspace> = Vec::with_capacity(6);
    for i in 0..3 {
        // Row i of the inverse maps x - K to the i-th device coordinate.
        let row: Vector3<f64> = inv.row(i).transpose();
        let norm = row.norm();
        let unit = row / norm;
        let at_k = unit.dot(&g.k);
        out.push(Halfspace::new(
            DVector::from_iterator(3, (-unit).iter().copied()),
            -at_k,
        ));
        out.push(Halfspace::new(
            DVector::from_iterator(3, unit.iter().copied()),
            at_k + 1.0 / norm,
        ));
    }
    Ok(out.try_into().expect("six halfspaces"))
}

/// Homogeneous 4x4 matrix taking standard-gamut device coordinates
/// `(r, g, b, 1)` to the device coordinates of `projector` that reproduce the
/// same color.
pub fn device_transform(standard: &Gamut, projector: &Gamut) -> Result<Matrix4<f64>, ColorError> {
    standard.check_nondegenerate()?;
    projector.check_nondegenerate()?;
    let inv = projector
        .edge_matrix()
        .try_inverse()
        .ok_or(ColorError::DegenerateGamut { det: 0.0 })?;
    let linear = inv * standard.edge_matrix();
    let offset = inv * (standard.k - projector.k);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&linear);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&offset);
    Ok(m)
}

/// Applies a homogeneous device transform to device coordinates.
pub fn apply_transform(m: &Matrix4<f64>, rgb: &Vector3<f64>) -> Vector3<f64> {
    let h = m * rgb.push(1.0);
    Vector3::new(h[0], h[1], h[2])
}

/// Device coordinates of the eight corners of the unit device cube, in
/// [`Corner::ALL`] order.
pub fn unit_cube_corners() -> [Vector3<f64>; 8] {
    Corner::ALL.map(|c| {
        let [_, r, g, b] = c.coefficients();
        Vector3::new(r, g, b)
    })
}
