//! Reference instances: the axis cube, its shifted copy, and seeded random
//! families of sheared boxes and halfspace systems.

use nalgebra::Matrix3;

use crate::color::{Color, Gamut};
use crate::polytope::Halfspace;
use crate::rng::XorShift64;

/// The axis cube `[1, 2]^3`.
pub fn cube12() -> Gamut {
    Gamut::new(
        Color::new(1.0, 1.0, 1.0),
        Color::new(2.0, 1.0, 1.0),
        Color::new(1.0, 2.0, 1.0),
        Color::new(1.0, 1.0, 2.0),
    )
}

/// [`cube12`] shifted by 0.25 along the first axis.
pub fn cube12x() -> Gamut {
    cube12().translated(&Color::new(0.25, 0.0, 0.0))
}

/// Two cubes whose intersection is `[1.25, 2] x [1, 2] x [1, 2]`.
pub fn pair() -> Vec<Gamut> {
    vec![cube12(), cube12x()]
}

/// A randomly sheared, scaled and translated copy of [`cube12`].
///
/// Perturbations are small enough that every instance contains a
/// neighbourhood of `(1.5, 1.5, 1.5)`, so any collection of them has a
/// full-dimensional common intersection away from the origin.
pub fn random_box(rng: &mut XorShift64) -> Gamut {
    let k = Color::new(
        1.0 + rng.range(-0.15, 0.15),
        1.0 + rng.range(-0.15, 0.15),
        1.0 + rng.range(-0.15, 0.15),
    );
    let m = Matrix3::from_fn(|i, j| {
        if i == j {
            rng.range(0.85, 1.15)
        } else {
            rng.range(-0.12, 0.12)
        }
    });
    Gamut::new(k, k + m.column(0), k + m.column(1), k + m.column(2))
}

/// `n` random boxes from the given seed.
pub fn random_instance(seed: u64, n: usize) -> Vec<Gamut> {
    let mut rng = XorShift64::new(seed);
    (0..n).map(|_| random_box(&mut rng)).collect()
}

/// `m` halfspaces in 3-D with random unit normals and offsets in `[0.5, 1.5]`,
/// so the origin is interior. The intersection may be unbounded.
pub fn random_halfspaces(rng: &mut XorShift64, m: usize) -> Vec<Halfspace> {
    (0..m)
        .map(|_| {
            let n = loop {
                let n = Color::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
                let len = n.norm();
                if len > 0.1 && len <= 1.0 {
                    break n / len;
                }
            };
            Halfspace::from_slice(n.as_slice(), rng.range(0.5, 1.5))
        })
        .collect()
}
