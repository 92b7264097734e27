//! Reading and validating projector instances.

use serde::Deserialize;
use thiserror::Error;

use tilegamut::color::{ColorError, Corner};
use tilegamut::{Color, Gamut, LuminosityWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub id: String,
    pub gamut: Gamut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub projectors: Vec<Projector>,
    pub weights: LuminosityWeights,
}

impl Instance {
    pub fn gamuts(&self) -> Vec<Gamut> {
        self.projectors.iter().map(|p| p.gamut).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("instance has no projectors")]
    NoProjectors,
    #[error("projector id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("projector {id:?}: corner {corner} has a non-finite channel")]
    NonFinite { id: String, corner: &'static str },
    #[error("projector {id:?}: degenerate gamut (det {det:e})")]
    DegenerateGamut { id: String, det: f64 },
    #[error("projector {id:?}: left-handed labeling (det {det:e}); swap two primaries")]
    Orientation { id: String, det: f64 },
    #[error("projector {id:?}: corner {corner} has nonpositive channel sum {sum:e}")]
    NonpositiveCornerSum { id: String, corner: &'static str, sum: f64 },
    #[error("invalid luminosity weights {0:?}: need finite, nonnegative, positive sum")]
    InvalidWeights([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default)]
    luminosity_weights: Option<[f64; 3]>,
    projectors: Vec<RawProjector>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProjector {
    id: String,
    #[serde(rename = "K")]
    k: [f64; 3],
    #[serde(rename = "R")]
    r: [f64; 3],
    #[serde(rename = "G")]
    g: [f64; 3],
    #[serde(rename = "B")]
    b: [f64; 3],
}

/// Parses and validates an instance from JSON.
pub fn parse_instance(bytes: &[u8]) -> Result<Instance, InstanceError> {
    let raw: RawInstance = serde_json::from_slice(bytes).map_err(|e| InstanceError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let weights = match raw.luminosity_weights {
        Some(w) => LuminosityWeights::new(w).map_err(|_| ValidationError::InvalidWeights(w))?,
        None => LuminosityWeights::y_channel(),
    };
    let projectors = raw
        .projectors
        .into_iter()
        .map(|p| Projector {
            id: p.id,
            gamut: Gamut::new(p.k.into(), p.r.into(), p.g.into(), p.b.into()),
        })
        .collect();
    let inst = Instance { projectors, weights };
    validate(&inst)?;
    Ok(inst)
}

pub fn validate(inst: &Instance) -> Result<(), ValidationError> {
    if inst.projectors.is_empty() {
        return Err(ValidationError::NoProjectors);
    }
    for (i, p) in inst.projectors.iter().enumerate() {
        if inst.projectors[..i].iter().any(|q| q.id == p.id) {
            return Err(ValidationError::DuplicateId(p.id.clone()));
        }
        let id = || p.id.clone();
        for c in [Corner::K, Corner::R, Corner::G, Corner::B] {
            if !p.gamut.corner(c).iter().all(|x| x.is_finite()) {
                return Err(ValidationError::NonFinite {
                    id: id(),
                    corner: c.name(),
                });
            }
        }
        match p.gamut.check_oriented() {
            Ok(()) => {}
            Err(ColorError::DegenerateGamut { det }) => return Err(ValidationError::DegenerateGamut { id: id(), det }),
            Err(ColorError::LeftHanded { det }) => return Err(ValidationError::Orientation { id: id(), det }),
            Err(_) => {
                return Err(ValidationError::DegenerateGamut {
                    id: id(),
                    det: p.gamut.signed_volume(),
                })
            }
        }
        for c in Corner::ALL {
            let sum = p.gamut.corner(c).sum();
            if !(sum > 0.0) {
                return Err(ValidationError::NonpositiveCornerSum {
                    id: id(),
                    corner: c.name(),
                    sum,
                });
            }
        }
    }
    Ok(())
}

/// Serializes an instance in the input schema.
pub fn instance_json(inst: &Instance) -> serde_json::Value {
    let arr = |c: Color| serde_json::json!([c.x, c.y, c.z]);
    serde_json::json!({
        "luminosity_weights": inst.weights.as_array(),
        "projectors": inst.projectors.iter().map(|p| serde_json::json!({
            "id": p.id,
            "K": arr(p.gamut.k),
            "R": arr(p.gamut.r),
            "G": arr(p.gamut.g),
            "B": arr(p.gamut.b),
        })).collect::<Vec<_>>(),
    })
}
