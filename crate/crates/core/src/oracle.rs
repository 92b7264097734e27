//! Brute-force reference computations.
//!
//! These are slow and simple on purpose: they share no code with the
//! optimizers beyond the feasibility predicates, so agreement between the
//! two is meaningful.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::color::{Chroma, Color, Gamut};
use crate::polytope::{ray_extent, BoundingBox, Halfspace, Polytope, DEDUP_TOL, DEFAULT_TOL};
use crate::rng::XorShift64;
use crate::volmax::{gamma_halfspaces, RbPoint, VolmaxError};

/// Seed used by the command line tool unless another is given.
pub const DEFAULT_SEED: u64 = 1;

/// Largest number of linear systems [`subset_vertex_oracle`] will solve.
pub const MAX_SUBSETS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{count} subsets exceed the limit of {MAX_SUBSETS}")]
    TooManySubsets { count: u64 },
    #[error(transparent)]
    Volmax(#[from] VolmaxError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub best_value: f64,
    /// Coordinates of the best point; empty when nothing was feasible.
    pub best_witness: Vec<f64>,
    /// Grid cells or random samples evaluated.
    pub samples_or_cells: u64,
    /// Cells or samples that were feasible.
    pub feasible: u64,
    pub seed: Option<u64>,
}

/// Open-cell centroids of a `res x res` triangular grid on the chromaticity
/// simplex `u, v > 0, u + v < 1`.
pub fn grid_chromaticities(res: usize) -> Vec<Chroma> {
    let n = res as f64;
    let mut out = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res - i {
            out.push(Chroma::new((i as f64 + 1.0 / 3.0) / n, (j as f64 + 1.0 / 3.0) / n));
            if i + j + 1 < res {
                out.push(Chroma::new((i as f64 + 2.0 / 3.0) / n, (j as f64 + 2.0 / 3.0) / n));
            }
        }
    }
    out
}

/// Best luminosity ratio over the grid chromaticities whose ray meets `p`.
///
/// Returns value 0 with an empty witness when no ray meets `p`.
pub fn grid_bw_oracle(p: &Polytope, res: usize) -> OracleReport {
    let cells = grid_chromaticities(res);
    let mut best: Option<(f64, Chroma)> = None;
    let mut feasible = 0;
    for c in &cells {
        let Ok(ext) = ray_extent(p, c) else { continue };
        feasible += 1;
        let r = ext.ratio();
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, *c));
        }
    }
    OracleReport {
        best_value: best.map_or(0.0, |(b, _)| b),
        best_witness: best.map_or(Vec::new(), |(_, c)| vec![c.u, c.v]),
        samples_or_cells: cells.len() as u64,
        feasible,
        seed: None,
    }
}

/// Best signed volume over uniform random `(R, B)` samples that keep every
/// corner inside every gamut. The collapsed pair `(K, K)`, of volume 0, is
/// always included.
///
/// Coordinates are drawn in the order `R.x, R.y, R.z, B.x, B.y, B.z`, each
/// as `lo + (hi - lo) * u` with `u` from [`XorShift64::next_f64`], from the
/// bounding box of the gamut intersection.
pub fn sample_volume_oracle(
    gamuts: &[Gamut],
    k: &Color,
    w: &Color,
    samples: u64,
    seed: u64,
) -> Result<OracleReport, OracleError> {
    let hs = gamma_halfspaces(gamuts, k, w)?;
    let hs: Vec<Halfspace> = hs.iter().filter_map(Halfspace::normalized).collect();
    let scale = hs.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
    let eps = DEFAULT_TOL * scale;

    let bounds = intersection_bounds(gamuts)?;
    let lo = &bounds.lo;
    let span = &bounds.hi - lo;

    let mut best_value = 0.0;
    let mut best = RbPoint { r: *k, b: *k };
    let mut feasible = 1;
    let mut rng = XorShift64::new(seed);
    let mut x = DVector::zeros(6);
    for _ in 0..samples {
        for i in 0..6 {
            x[i] = lo[i % 3] + span[i % 3] * rng.next_f64();
        }
        if hs.iter().any(|h| h.slack(&x) < -eps) {
            continue;
        }
        feasible += 1;
        let p = RbPoint::from_vector(&x);
        let value = Gamut::from_krbw(*k, p.r, p.b, *w).signed_volume();
        if value > best_value {
            best_value = value;
            best = p;
        }
    }
    Ok(OracleReport {
        best_value,
        best_witness: best.to_vector().iter().copied().collect(),
        samples_or_cells: samples,
        feasible,
        seed: Some(seed),
    })
}

/// Bounding box of the intersection of the gamuts, from its vertices when
/// the subset enumeration is small enough and from the per-gamut boxes
/// otherwise.
fn intersection_bounds(gamuts: &[Gamut]) -> Result<BoundingBox, OracleError> {
    let fallback = || crate::gamut_bounds(gamuts).ok_or(OracleError::Volmax(VolmaxError::NoGamuts));
    let mut hs = Vec::with_capacity(6 * gamuts.len());
    for (index, g) in gamuts.iter().enumerate() {
        let six = crate::color::gamut_halfspaces(g).map_err(|source| VolmaxError::Gamut { index, source })?;
        hs.extend(six);
    }
    match subset_vertex_oracle(&hs, 3) {
        Ok(vs) if !vs.is_empty() => Ok(BoundingBox::of_points(&vs).expect("nonempty")),
        Ok(_) => fallback(),
        Err(OracleError::TooManySubsets { .. }) => fallback(),
        Err(e) => Err(e),
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Vertices of `{x : h.x <= h.offset}` by solving every `dim`-subset of the
/// constraints as equalities and keeping the feasible solutions.
pub fn subset_vertex_oracle(hs: &[Halfspace], dim: usize) -> Result<Vec<DVector<f64>>, OracleError> {
    let count = binomial(hs.len() as u64, dim as u64);
    if count > MAX_SUBSETS {
        return Err(OracleError::TooManySubsets { count });
    }
    let hs: Vec<Halfspace> = hs.iter().filter_map(Halfspace::normalized).collect();
    let scale = hs.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
    let eps = DEFAULT_TOL * scale;
    let mut out: Vec<DVector<f64>> = Vec::new();
    for subset in (0..hs.len()).combinations(dim) {
        let a = DMatrix::from_fn(dim, dim, |r, c| hs[subset[r]].normal[c]);
        let b = DVector::from_fn(dim, |r, _| hs[subset[r]].offset);
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = lu.solve(&b) else { continue };
        if hs.iter().any(|h| h.slack(&x) < -eps) {
            continue;
        }
        if out.iter().any(|v| (v - &x).amax() <= DEDUP_TOL * scale) {
            continue;
        }
        out.push(x);
    }
    Ok(out)
}
