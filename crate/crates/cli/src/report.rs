//! The JSON report written by the command-line tool.

use serde::Serialize;

use crate::instance::Instance;
use crate::pipeline::{
    Comparison, Config, GamutResult, MethodFailure, Perturbation, PipelineOutput, Verification, VerifyConfig,
};
use tilegamut::blackwhite::BwSelection;

pub const MAPPING: &str = "each matrix maps standard-gamut device coordinates (r, g, b, 1) to the projector's \
device coordinates; row-major, homogeneous row last";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub polytope: f64,
    pub qcp_bracket: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub projectors: usize,
    pub distinct_gamuts: usize,
    pub luminosity_weights: [f64; 3],
    pub method: &'static str,
    pub mapping: &'static str,
    pub tolerances: Tolerances,
    pub intersection: IntersectionSummary,
    pub black_white: Option<BwSelection>,
    pub results: Vec<GamutResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<MethodFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionSummary {
    pub vertices: usize,
    pub facets: usize,
}

impl Report {
    pub fn new(inst: &Instance, cfg: &Config, out: PipelineOutput) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            projectors: inst.projectors.len(),
            distinct_gamuts: out.distinct_gamuts,
            luminosity_weights: inst.weights.as_array(),
            method: cfg.method.name(),
            mapping: MAPPING,
            tolerances: Tolerances {
                polytope: cfg.tol,
                qcp_bracket: cfg.qcp_tol,
            },
            intersection: IntersectionSummary {
                vertices: out.intersection_vertices,
                facets: out.intersection_facets,
            },
            black_white: out.black_white,
            results: out.results,
            failures: out.failures,
            comparison: out.comparison,
            verification: out.verification,
            perturbation: out.perturbation,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn verify_config(&self) -> Option<VerifyConfig> {
        self.verification.as_ref().map(|v| v.config)
    }
}
