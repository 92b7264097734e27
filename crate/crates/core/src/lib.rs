//! Common color gamuts for tiled multi-projector displays.
//!
//! Each projector's gamut is a parallelepiped in device-independent color
//! space. This crate finds a *standard gamut*, a parallelepiped contained in
//! every projector's gamut, in three ways:
//!
//! * [`blackwhite`] + [`volmax`]: pick black and white points of a common
//!   chromaticity maximizing their luminosity ratio, then maximize volume
//!   over the remaining six degrees of freedom.
//! * [`qcp`]: minimize the worst weighted corner deviation from target
//!   colors over all twelve degrees of freedom.
//! * [`stone`]: the classic manual procedure, automated, as a baseline.
//!
//! [`oracle`] holds brute-force reference computations used to check the
//! optimizers.

pub mod blackwhite;
pub mod color;
pub mod fixtures;
pub mod oracle;
pub mod polytope;
pub mod qcp;
pub mod rng;
pub mod stone;
pub mod volmax;

pub use color::{Chroma, Color, CornerSet, Gamut, LuminosityWeights};
pub use polytope::{Halfspace, Polytope};

use polytope::{intersect_halfspaces_within, BoundingBox, PolytopeError};

/// Intersection of the given gamuts as a 3-polytope.
pub fn gamut_intersection(gamuts: &[Gamut], tol: f64) -> Result<Polytope, GamutIntersectionError> {
    let mut hs = Vec::with_capacity(6 * gamuts.len());
    for (i, g) in gamuts.iter().enumerate() {
        let six = color::gamut_halfspaces(g).map_err(|source| GamutIntersectionError::Gamut { index: i, source })?;
        hs.extend(six);
    }
    let bounds = gamut_bounds(gamuts).ok_or(GamutIntersectionError::NoGamuts)?;
    Ok(intersect_halfspaces_within(&hs, 3, tol, &bounds.enlarged(0.1, 1.0))?)
}

/// Intersection of the per-gamut bounding boxes; contains every point common
/// to all gamuts.
pub fn gamut_bounds(gamuts: &[Gamut]) -> Option<BoundingBox> {
    let mut out: Option<BoundingBox> = None;
    for g in gamuts {
        let corners = color::corners_unchecked(g);
        let pts: Vec<_> = corners.iter().map(|(_, c)| polytope::to_dvector(&c)).collect();
        let b = BoundingBox::of_points(&pts).expect("eight corners");
        out = Some(match out {
            None => b,
            Some(o) => BoundingBox::new(o.lo.sup(&b.lo), o.hi.inf(&b.hi)),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GamutIntersectionError {
    #[error("no gamuts given")]
    NoGamuts,
    #[error("gamut {index}: {source}")]
    Gamut {
        index: usize,
        #[source]
        source: color::ColorError,
    },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}
