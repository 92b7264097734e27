//! Min-max corner placement over all twelve gamut parameters.
//!
//! Each corner of the standard gamut gets a quality function (distance to a
//! target, or signed distance along a direction). The solver minimizes the
//! largest of them subject to every corner lying in every projector gamut.
//! For a fixed level `t` the feasible parameters form an intersection of
//! halfspaces and cylinders around affine subspaces, each with a closed form
//! projection, so feasibility is decided by cyclic projections and the level
//! by bisection.

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{self, chromaticity, Color, ColorError, Corner, CornerSet, Gamut};

/// `(K, R, G, B)` stacked.
pub type Params = SVector<f64, 12>;

/// Sweep budget for one feasibility test.
pub const MAX_SWEEPS: usize = 10_000;

/// A sweep moving the point less than this (relative) has converged.
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Relative slack for quality constraints.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Containment halfspaces are projected onto after pulling them in by this
/// (relative) margin, and checked with [`CONTAINMENT_SLACK`], so accepted
/// points are inside every gamut up to rounding.
const CONTAINMENT_MARGIN: f64 = 1e-10;
const CONTAINMENT_SLACK: f64 = 1e-12;

/// The doubling search gives up above this multiple of the instance scale.
pub const MAX_LEVEL: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QcpError {
    #[error("no quality specs given")]
    NoSpecs,
    #[error("no gamuts given")]
    NoGamuts,
    #[error("spec {index}: {reason}")]
    InvalidSpec { index: usize, reason: &'static str },
    #[error("gamut {index}: {source}")]
    Gamut {
        index: usize,
        #[source]
        source: ColorError,
    },
    #[error("no feasible level found up to {limit:e}")]
    NoFiniteLevel { limit: f64 },
    #[error("bisection tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QualityKind {
    /// `weight * |x - target|`.
    Euclidean,
    /// `weight * direction . (x - target)`.
    Linear { direction: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerQualitySpec {
    pub corner: Corner,
    #[serde(flatten)]
    pub kind: QualityKind,
    pub target: [f64; 3],
    pub weight: f64,
}

impl CornerQualitySpec {
    pub fn euclidean(corner: Corner, target: Color, weight: f64) -> Self {
        Self {
            corner,
            kind: QualityKind::Euclidean,
            target: target.into(),
            weight,
        }
    }

    pub fn linear(corner: Corner, direction: Color, target: Color, weight: f64) -> Self {
        Self {
            corner,
            kind: QualityKind::Linear {
                direction: direction.into(),
            },
            target: target.into(),
            weight,
        }
    }

    fn validate(&self, index: usize) -> Result<(), QcpError> {
        let bad = |reason| Err(QcpError::InvalidSpec { index, reason });
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return bad("weight must be positive and finite");
        }
        if !self.target.iter().all(|t| t.is_finite()) {
            return bad("target must be finite");
        }
        if let QualityKind::Linear { direction } = self.kind {
            if !direction.iter().all(|t| t.is_finite()) || Vector3::from(direction).norm() == 0.0 {
                return bad("direction must be finite and nonzero");
            }
        }
        Ok(())
    }
}

/// The quality value of one corner color.
pub fn corner_quality(spec: &CornerQualitySpec, x: &Color) -> f64 {
    let d = x - Vector3::from(spec.target);
    match spec.kind {
        QualityKind::Euclidean => spec.weight * d.norm(),
        QualityKind::Linear { direction } => spec.weight * Vector3::from(direction).dot(&d),
    }
}

pub fn params_of(g: &Gamut) -> Params {
    Params::from_iterator(
        g.k.iter()
            .chain(g.r.iter())
            .chain(g.g.iter())
            .chain(g.b.iter())
            .copied(),
    )
}

pub fn gamut_of(p: &Params) -> Gamut {
    let block = |i: usize| Vector3::new(p[3 * i], p[3 * i + 1], p[3 * i + 2]);
    Gamut::new(block(0), block(1), block(2), block(3))
}

fn corner_of(coeffs: &[f64; 4], p: &Params) -> Color {
    (0..4).fold(Color::zeros(), |acc, i| {
        acc + Vector3::new(p[3 * i], p[3 * i + 1], p[3 * i + 2]) * coeffs[i]
    })
}

/// One closed convex set of the feasibility problem at a fixed level.
#[derive(Debug, Clone)]
enum Constraint {
    /// `a . p <= b`.
    Half { a: Params, b: f64, a_norm2: f64 },
    /// `|corner(p) - center| <= radius`.
    Ball {
        coeffs: [f64; 4],
        coeff_norm2: f64,
        center: Color,
        radius: f64,
    },
}

impl Constraint {
    fn halfspace(coeffs: &[f64; 4], n: &Color, b: f64) -> Self {
        let a = Params::from_fn(|i, _| coeffs[i / 3] * n[i % 3]);
        let a_norm2 = a.norm_squared();
        Constraint::Half { a, b, a_norm2 }
    }

    fn project(&self, p: &mut Params) {
        match self {
            Constraint::Half { a, b, a_norm2 } => {
                let excess = a.dot(p) - b;
                if excess > 0.0 {
                    *p -= a * (excess / a_norm2);
                }
            }
            Constraint::Ball {
                coeffs,
                coeff_norm2,
                center,
                radius,
            } => {
                let delta = corner_of(coeffs, p) - center;
                let dist = delta.norm();
                if dist > *radius {
                    let shift = delta * ((1.0 - radius / dist) / coeff_norm2);
                    for i in 0..4 {
                        for j in 0..3 {
                            p[3 * i + j] -= coeffs[i] * shift[j];
                        }
                    }
                }
            }
        }
    }
}

/// The fixed data of one instance: containment halfspaces and specs.
#[derive(Debug, Clone)]
struct Problem {
    containment: Vec<Constraint>,
    /// Unit-normal gamut halfspaces, for the containment check.
    gamut_hs: Vec<(Color, f64)>,
    specs: Vec<CornerQualitySpec>,
    scale: f64,
    start: Params,
}

impl Problem {
    fn new(gamuts: &[Gamut], specs: &[CornerQualitySpec]) -> Result<Self, QcpError> {
        if gamuts.is_empty() {
            return Err(QcpError::NoGamuts);
        }
        if specs.is_empty() {
            return Err(QcpError::NoSpecs);
        }
        for (i, s) in specs.iter().enumerate() {
            s.validate(i)?;
        }
        let mut containment = Vec::with_capacity(48 * gamuts.len());
        let mut gamut_hs = Vec::with_capacity(6 * gamuts.len());
        let mut scale: f64 = 1.0;
        for (index, g) in gamuts.iter().enumerate() {
            let hs = color::gamut_halfspaces(g).map_err(|source| QcpError::Gamut { index, source })?;
            for h in &hs {
                scale = scale.max(h.offset.abs());
                gamut_hs.push((Vector3::new(h.normal[0], h.normal[1], h.normal[2]), h.offset));
            }
        }
        for s in specs {
            scale = scale.max(Vector3::from(s.target).amax());
        }
        for (n, h) in &gamut_hs {
            for c in Corner::ALL {
                containment.push(Constraint::halfspace(
                    &c.coefficients(),
                    n,
                    h - CONTAINMENT_MARGIN * scale,
                ));
            }
        }
        let start = gamuts.iter().map(params_of).sum::<Params>() / gamuts.len() as f64;
        Ok(Self {
            containment,
            gamut_hs,
            specs: specs.to_vec(),
            scale,
            start,
        })
    }

    /// Constraints of the specs at level `t`, or `None` when some spec
    /// cannot be met at any parameters (a distance below zero).
    fn level_constraints(&self, t: f64) -> Option<Vec<Constraint>> {
        let mut out = Vec::with_capacity(self.specs.len());
        for s in &self.specs {
            let coeffs = s.corner.coefficients();
            let target = Vector3::from(s.target);
            match s.kind {
                QualityKind::Euclidean => {
                    let radius = t / s.weight;
                    if radius < 0.0 {
                        return None;
                    }
                    out.push(Constraint::Ball {
                        coeffs,
                        coeff_norm2: coeffs.iter().map(|c| c * c).sum(),
                        center: target,
                        radius,
                    });
                }
                QualityKind::Linear { direction } => {
                    let n = Vector3::from(direction) * s.weight;
                    out.push(Constraint::halfspace(&coeffs, &n, t + n.dot(&target)));
                }
            }
        }
        Some(out)
    }

    fn is_feasible(&self, p: &Params, t: f64, tol: f64) -> bool {
        let eps = tol * self.scale;
        let slack = CONTAINMENT_SLACK * self.scale;
        let corners: Vec<Color> = Corner::ALL.iter().map(|c| corner_of(&c.coefficients(), p)).collect();
        let contained = self
            .gamut_hs
            .iter()
            .all(|(n, h)| corners.iter().all(|x| n.dot(x) <= h + slack));
        contained
            && self
                .specs
                .iter()
                .all(|s| corner_quality(s, &corner_of(&s.corner.coefficients(), p)) <= t + eps)
    }

    /// Continues the projections from a feasible `p` until they settle,
    /// keeping the result only if it is still feasible.
    fn polish(&self, p: Params, t: f64, tol: f64) -> (Params, usize) {
        let Some(level) = self.level_constraints(t) else {
            return (p, 0);
        };
        let mut q = p;
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let before = q;
            for c in self.containment.iter().chain(&level) {
                c.project(&mut q);
            }
            if (q - before).amax() < CONVERGENCE_TOL * self.scale {
                break;
            }
        }
        if self.is_feasible(&q, t, tol) {
            (q, sweeps)
        } else {
            (p, sweeps)
        }
    }

    fn feasible_at_level(&self, t: f64, tol: f64) -> LevelOutcome {
        let Some(level) = self.level_constraints(t) else {
            return LevelOutcome::Infeasible { sweeps: 0 };
        };
        let mut p = self.start;
        for sweep in 1..=MAX_SWEEPS {
            let before = p;
            for c in self.containment.iter().chain(&level) {
                c.project(&mut p);
            }
            if self.is_feasible(&p, t, tol) {
                return LevelOutcome::Feasible {
                    point: p,
                    sweeps: sweep,
                };
            }
            if (p - before).amax() < CONVERGENCE_TOL * self.scale {
                return LevelOutcome::Infeasible { sweeps: sweep };
            }
        }
        LevelOutcome::BudgetExceeded { sweeps: MAX_SWEEPS }
    }
}

/// Result of one feasibility test.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelOutcome {
    Feasible {
        point: Params,
        sweeps: usize,
    },
    /// The projections settled on a cycle away from the intersection.
    Infeasible {
        sweeps: usize,
    },
    /// Neither feasible nor settled after [`MAX_SWEEPS`].
    BudgetExceeded {
        sweeps: usize,
    },
}

impl LevelOutcome {
    pub fn point(&self) -> Option<&Params> {
        match self {
            LevelOutcome::Feasible { point, .. } => Some(point),
            _ => None,
        }
    }

    pub fn sweeps(&self) -> usize {
        match *self {
            LevelOutcome::Feasible { sweeps, .. }
            | LevelOutcome::Infeasible { sweeps }
            | LevelOutcome::BudgetExceeded { sweeps } => sweeps,
        }
    }
}

/// Searches for parameters with every corner in every gamut and every
/// quality at most `t`, up to the relative slack `tol` on the qualities.
pub fn feasible_at_level(
    gamuts: &[Gamut],
    specs: &[CornerQualitySpec],
    t: f64,
    tol: f64,
) -> Result<LevelOutcome, QcpError> {
    Ok(Problem::new(gamuts, specs)?.feasible_at_level(t, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QcpSolution {
    pub gamut: Gamut,
    pub corners: CornerSet,
    pub t_star: f64,
    /// Bisection steps after the bracket was found.
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// Projection sweeps over all feasibility tests.
    pub sweeps: usize,
    /// Tests that ran out of budget; they count as infeasible.
    pub budget_exceeded: usize,
    /// Distance between the chromaticities of the result's black and white.
    pub chroma_gap: Option<f64>,
}

/// Minimizes the largest corner quality subject to containment by bisection
/// on the level, to an absolute bracket width `tol`.
pub fn solve_qcp(gamuts: &[Gamut], specs: &[CornerQualitySpec], tol: f64) -> Result<QcpSolution, QcpError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(QcpError::InvalidTolerance(tol));
    }
    let problem = Problem::new(gamuts, specs)?;
    let mut sweeps = 0;
    let mut budget_exceeded = 0;
    let mut test = |t: f64| {
        let out = problem.feasible_at_level(t, FEASIBILITY_TOL);
        sweeps += out.sweeps();
        if matches!(out, LevelOutcome::BudgetExceeded { .. }) {
            budget_exceeded += 1;
        }
        out.point().copied()
    };

    let limit = MAX_LEVEL * problem.scale;
    let all_euclidean = specs.iter().all(|s| s.kind == QualityKind::Euclidean);
    let (mut lo, mut hi, mut best) = match test(0.0) {
        Some(p) if all_euclidean => {
            // No distance is negative, so every level below 0 is infeasible.
            (-tol, 0.0, p)
        }
        Some(p) => {
            let (mut hi, mut best) = (0.0, p);
            let mut step = problem.scale;
            loop {
                if step > limit {
                    return Err(QcpError::NoFiniteLevel { limit: -limit });
                }
                match test(-step) {
                    Some(q) => {
                        hi = -step;
                        best = q;
                        step *= 2.0;
                    }
                    None => break (-step, hi, best),
                }
            }
        }
        None => {
            let mut lo = 0.0;
            let mut step = problem.scale;
            loop {
                if step > limit {
                    return Err(QcpError::NoFiniteLevel { limit });
                }
                match test(step) {
                    Some(q) => break (lo, step, q),
                    None => {
                        lo = step;
                        step *= 2.0;
                    }
                }
            }
        }
    };

    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        match test(mid) {
            Some(p) => {
                hi = mid;
                best = p;
            }
            None => lo = mid,
        }
    }

    let (best, extra) = problem.polish(best, hi, FEASIBILITY_TOL);
    sweeps += extra;
    let gamut = gamut_of(&best);
    let corners = color::corners_unchecked(&gamut);
    let chroma_gap = match (
        chromaticity(&corners.get(Corner::K)),
        chromaticity(&corners.get(Corner::W)),
    ) {
        (Ok(a), Ok(b)) => Some(a.distance(&b)),
        _ => None,
    };
    Ok(QcpSolution {
        gamut,
        corners,
        t_star: hi,
        iterations,
        bracket: (lo, hi),
        sweeps,
        budget_exceeded,
        chroma_gap,
    })
}

/// Targets at the per-corner averages of the projector gamuts, weight 2 for
/// black and white and 1 for the six chromatic corners.
pub fn default_specs(gamuts: &[Gamut]) -> Vec<CornerQualitySpec> {
    let n = gamuts.len().max(1) as f64;
    Corner::ALL
        .iter()
        .map(|&c| {
            let mean = gamuts.iter().map(|g| g.corner(c)).sum::<Color>() / n;
            let weight = if matches!(c, Corner::K | Corner::W) { 2.0 } else { 1.0 };
            CornerQualitySpec::euclidean(c, mean, weight)
        })
        .collect()
}

/// Euclidean specs pinning every corner of `g`.
pub fn corner_specs(g: &Gamut) -> Vec<CornerQualitySpec> {
    Corner::ALL
        .iter()
        .map(|&c| CornerQualitySpec::euclidean(c, g.corner(c), 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cube12, pair};
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> Color {
        Vector3::new(x, y, z)
    }

    #[test]
    fn quality_examples() {
        let e = CornerQualitySpec::euclidean(Corner::K, v(1.0, 1.0, 1.0), 1.0);
        assert_eq!(corner_quality(&e, &v(1.0, 1.0, 1.0)), 0.0);
        let e = CornerQualitySpec::euclidean(Corner::K, v(0.0, 0.0, 0.0), 2.0);
        assert_relative_eq!(
            corner_quality(&e, &v(1.0, 1.0, 1.0)),
            2.0 * 3f64.sqrt(),
            epsilon = 1e-15
        );
        let l = CornerQualitySpec::linear(Corner::K, v(0.0, 1.0, 0.0), v(0.0, 0.0, 0.0), 1.0);
        assert_eq!(corner_quality(&l, &v(1.0, 2.0, 3.0)), 2.0);
    }

    #[test]
    fn params_round_trip() {
        let g = cube12();
        assert_eq!(gamut_of(&params_of(&g)), g);
        for c in Corner::ALL {
            assert_eq!(corner_of(&c.coefficients(), &params_of(&g)), g.corner(c));
        }
    }

    #[test]
    fn ball_projection_is_exact() {
        let c = Constraint::Ball {
            coeffs: Corner::W.coefficients(),
            coeff_norm2: 7.0,
            center: v(0.0, 0.0, 0.0),
            radius: 0.5,
        };
        let mut p = params_of(&cube12());
        c.project(&mut p);
        let w = corner_of(&Corner::W.coefficients(), &p);
        assert_relative_eq!(w.norm(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn own_corners_are_feasible_at_small_level() {
        let g = cube12();
        let specs = corner_specs(&g);
        let out = feasible_at_level(&[g], &specs, 0.01, FEASIBILITY_TOL).unwrap();
        assert!(out.point().is_some(), "{out:?}");
        let out = feasible_at_level(&[g], &specs, 1e6, FEASIBILITY_TOL).unwrap();
        assert!(out.point().is_some());
    }

    #[test]
    fn origin_target_is_infeasible_below_distance() {
        let spec = [CornerQualitySpec::euclidean(Corner::K, v(0.0, 0.0, 0.0), 1.0)];
        let out = feasible_at_level(&[cube12()], &spec, 1.0, FEASIBILITY_TOL).unwrap();
        assert!(matches!(out, LevelOutcome::Infeasible { .. }), "{out:?}");
    }

    #[test]
    fn cube_corner_specs_recover_cube() {
        let g = cube12();
        let sol = solve_qcp(&[g], &corner_specs(&g), 1e-8).unwrap();
        assert!(sol.t_star <= 1e-6);
        for c in Corner::ALL {
            assert_relative_eq!(sol.corners.get(c), g.corner(c), epsilon = 1e-10);
        }
        assert!((sol.gamut.volume() - 1.0).abs() <= 1e-9);
        assert_eq!(sol.budget_exceeded, 0);
    }

    #[test]
    fn origin_target_gives_sqrt3() {
        let spec = [CornerQualitySpec::euclidean(Corner::K, v(0.0, 0.0, 0.0), 1.0)];
        let sol = solve_qcp(&[cube12()], &spec, 1e-8).unwrap();
        assert!((sol.t_star - 3f64.sqrt()).abs() <= 1e-6, "{}", sol.t_star);
        assert!(sol.bracket.1 - sol.bracket.0 <= 1e-8);
        assert_eq!(sol.budget_exceeded, 0);
    }

    #[test]
    fn linear_luminosity_spec() {
        let spec = [CornerQualitySpec::linear(
            Corner::K,
            v(0.0, 1.0, 0.0),
            v(0.0, 0.0, 0.0),
            1.0,
        )];
        let sol = solve_qcp(&[cube12()], &spec, 1e-8).unwrap();
        assert!((sol.t_star - 1.0).abs() <= 1e-6, "{}", sol.t_star);
    }

    #[test]
    fn negative_levels_are_searched() {
        // Minimizing -y of black: the best is -2 at the top face.
        let spec = [CornerQualitySpec::linear(
            Corner::K,
            v(0.0, -1.0, 0.0),
            v(0.0, 0.0, 0.0),
            1.0,
        )];
        let sol = solve_qcp(&[cube12()], &spec, 1e-8).unwrap();
        assert!((sol.t_star + 2.0).abs() <= 1e-6, "{}", sol.t_star);
    }

    #[test]
    fn default_specs_on_pair() {
        let gs = pair();
        let specs = default_specs(&gs);
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[0].weight, 2.0);
        let sol = solve_qcp(&gs, &specs, 1e-7).unwrap();
        assert!(sol.chroma_gap.is_some());
        for g in &gs {
            for (_, c) in sol.corners.iter() {
                let x = g.device_coordinates(&c).unwrap();
                assert!(x.iter().all(|t| (-1e-9..=1.0 + 1e-9).contains(t)), "{x:?}");
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = [CornerQualitySpec::euclidean(Corner::K, v(0.0, 0.0, 0.0), 0.0)];
        assert!(matches!(
            solve_qcp(&[cube12()], &bad, 1e-6),
            Err(QcpError::InvalidSpec { .. })
        ));
        assert!(matches!(solve_qcp(&[cube12()], &[], 1e-6), Err(QcpError::NoSpecs)));
    }
}
