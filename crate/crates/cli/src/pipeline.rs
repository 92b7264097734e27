//! Running the optimizers on an instance and collecting their results.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use tilegamut::blackwhite::{select_black_white, BlackWhiteError, BwSelection};
use tilegamut::color::{self, luminosity, ColorError, Corner, CornerSet};
use tilegamut::oracle::{grid_bw_oracle, sample_volume_oracle, OracleError, OracleReport, DEFAULT_SEED};
use tilegamut::polytope::{PolytopeError, DEFAULT_TOL};
use tilegamut::qcp::{default_specs, solve_qcp, CornerQualitySpec, QcpError};
use tilegamut::rng::XorShift64;
use tilegamut::stone::{stone_gamut, StoneError};
use tilegamut::volmax::{maximize_volume_tol, VolmaxError};
use tilegamut::{gamut_intersection, Gamut, GamutIntersectionError, Polytope};

use crate::instance::{Instance, Projector};

/// Containment slack for the corner audits, in device coordinates.
pub const AUDIT_TOL: f64 = 1e-9;

/// Allowed relative shortfall of the volume optimum against sampling.
pub const VOLUME_ORACLE_TOL: f64 = 1e-6;

/// Allowed shortfall of the exact ratio against the grid.
pub const RATIO_ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Volmax,
    Qcp,
    Stone,
    All,
}

impl Method {
    fn runs(self) -> &'static [Method] {
        match self {
            Method::Volmax => &[Method::Volmax],
            Method::Qcp => &[Method::Qcp],
            Method::Stone => &[Method::Stone],
            Method::All => &[Method::Volmax, Method::Qcp, Method::Stone],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Volmax => "volmax",
            Method::Qcp => "qcp",
            Method::Stone => "stone",
            Method::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub grid_res: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grid_res: 200,
            samples: 100_000,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub method: Method,
    pub qcp_specs: Option<Vec<CornerQualitySpec>>,
    /// Relative tolerance of the polytope computations.
    pub tol: f64,
    /// Bisection bracket width for the min-max solver.
    pub qcp_tol: f64,
    pub verify: Option<VerifyConfig>,
    /// Relative size of the deterministic shrink applied when a degenerate
    /// configuration stops the computation.
    pub perturb: Option<f64>,
    pub perturb_seed: u64,
    pub timings: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            method: Method::Volmax,
            qcp_specs: None,
            tol: DEFAULT_TOL,
            qcp_tol: 1e-8,
            verify: None,
            perturb: None,
            perturb_seed: DEFAULT_SEED,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Intersection(#[from] GamutIntersectionError),
    #[error(transparent)]
    BlackWhite(#[from] BlackWhiteError),
    #[error(transparent)]
    Volmax(#[from] VolmaxError),
    #[error(transparent)]
    Qcp(#[from] QcpError),
    #[error(transparent)]
    Stone(#[from] StoneError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("projector {id:?}: {source}")]
    Projector {
        id: String,
        #[source]
        source: ColorError,
    },
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const VERIFICATION: i32 = 4;
    pub const NUMERICAL: i32 = 5;
}

fn polytope_code(e: &PolytopeError) -> i32 {
    match e {
        PolytopeError::EmptyIntersection | PolytopeError::DegenerateIntersection { .. } => exit::INFEASIBLE,
        PolytopeError::OriginInside => exit::VALIDATION,
        _ => exit::NUMERICAL,
    }
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Intersection(GamutIntersectionError::Polytope(p)) => polytope_code(p),
            PipelineError::Intersection(GamutIntersectionError::NoGamuts) => exit::VALIDATION,
            PipelineError::Intersection(GamutIntersectionError::Gamut { .. }) => exit::VALIDATION,
            PipelineError::BlackWhite(BlackWhiteError::Polytope(p)) => polytope_code(p),
            PipelineError::Volmax(VolmaxError::Polytope(p)) => polytope_code(p),
            PipelineError::Volmax(VolmaxError::DegenerateOptimum { .. }) => exit::INFEASIBLE,
            PipelineError::Qcp(QcpError::NoFiniteLevel { .. }) => exit::INFEASIBLE,
            PipelineError::Qcp(QcpError::InvalidSpec { .. } | QcpError::NoSpecs | QcpError::InvalidTolerance(_)) => {
                exit::VALIDATION
            }
            PipelineError::Stone(
                StoneError::EmptyChromaIntersection | StoneError::NegativeScale(_) | StoneError::NoPositiveScale,
            ) => exit::INFEASIBLE,
            PipelineError::Stone(StoneError::Polytope(p)) => polytope_code(p),
            _ => exit::NUMERICAL,
        }
    }

    /// Failures that a small perturbation of the input may remove.
    pub fn is_degenerate(&self) -> bool {
        let degenerate = |p: &PolytopeError| {
            matches!(
                p,
                PolytopeError::OriginOnFacetPlane { .. }
                    | PolytopeError::RayMisses { .. }
                    | PolytopeError::DegenerateIntersection { .. }
            )
        };
        match self {
            PipelineError::BlackWhite(BlackWhiteError::Polytope(p))
            | PipelineError::Stone(StoneError::Polytope(p))
            | PipelineError::Volmax(VolmaxError::Polytope(p)) => degenerate(p),
            PipelineError::BlackWhite(BlackWhiteError::NoCandidates) => true,
            // A primary scale that is zero up to rounding: white sits on the
            // boundary of the primary cone.
            PipelineError::Stone(StoneError::NegativeScale(s)) => {
                let max = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                s.iter().all(|x| *x >= -1e-9 * max)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectorMatrix {
    pub id: String,
    /// Row-major; the last row is `(0, 0, 0, 1)`.
    pub matrix: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GamutResult {
    pub method: String,
    pub gamut: CornerSet,
    pub volume: f64,
    /// Luminosity of white over black; absent when black has none.
    pub luminosity_ratio: Option<f64>,
    pub per_projector_matrix: Vec<ProjectorMatrix>,
    pub diagnostics: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodFailure {
    pub method: String,
    pub error: String,
    pub exit_code: i32,
    #[serde(skip)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub volumes: Map<String, Value>,
    pub luminosity_ratios: Map<String, Value>,
    /// Whether volmax and stone chose the same black and white.
    pub same_black_white: Option<bool>,
    /// Only asserted when both chose the same black and white.
    pub volmax_not_below_stone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub config: VerifyConfig,
    pub grid: Option<OracleReport>,
    pub volume: Option<OracleReport>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    pub magnitude: f64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutput {
    /// Projectors with pairwise distinct gamuts; duplicates are computed once.
    pub distinct_gamuts: usize,
    pub intersection_vertices: usize,
    pub intersection_facets: usize,
    pub black_white: Option<BwSelection>,
    pub results: Vec<GamutResult>,
    pub failures: Vec<MethodFailure>,
    pub comparison: Option<Comparison>,
    pub verification: Option<Verification>,
    pub perturbation: Option<Perturbation>,
}

impl PipelineOutput {
    pub fn verified(&self) -> bool {
        self.verification.as_ref().is_none_or(|v| v.violations.is_empty())
    }
}

/// Distinct gamuts in first-appearance order.
pub fn distinct_gamuts(projectors: &[Projector]) -> Vec<Gamut> {
    let mut out: Vec<Gamut> = Vec::new();
    for p in projectors {
        if !out.contains(&p.gamut) {
            out.push(p.gamut);
        }
    }
    out
}

/// Shrinks each gamut toward its center by a factor in
/// `[1 - magnitude, 1 - magnitude / 2]` drawn from a seeded generator.
pub fn shrink_gamuts(gamuts: &[Gamut], magnitude: f64, seed: u64) -> Vec<Gamut> {
    let mut rng = XorShift64::new(seed);
    gamuts
        .iter()
        .map(|g| {
            let f = 1.0 - rng.range(0.5 * magnitude, magnitude);
            let center = (g.k + g.corner(Corner::W)) * 0.5;
            g.translated(&-center).scaled(f).translated(&center)
        })
        .collect()
}

fn matrices(standard: &Gamut, projectors: &[Projector]) -> Result<Vec<ProjectorMatrix>, PipelineError> {
    projectors
        .iter()
        .map(|p| {
            let m = color::device_transform(standard, &p.gamut).map_err(|source| PipelineError::Projector {
                id: p.id.clone(),
                source,
            })?;
            Ok(ProjectorMatrix {
                id: p.id.clone(),
                matrix: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
            })
        })
        .collect()
}

fn ratio(corners: &CornerSet, inst: &Instance) -> Option<f64> {
    let lk = luminosity(&corners.k, &inst.weights);
    let lw = luminosity(&corners.w, &inst.weights);
    (lk > 0.0 && lw.is_finite()).then(|| lw / lk)
}

struct Context<'a> {
    inst: &'a Instance,
    cfg: &'a Config,
    gamuts: Vec<Gamut>,
    p: Polytope,
    bw: Option<Result<BwSelection, PipelineError>>,
}

impl Context<'_> {
    fn black_white(&mut self) -> Result<BwSelection, PipelineError> {
        if self.bw.is_none() {
            self.bw = Some(select_black_white(&self.p, &self.inst.weights).map_err(PipelineError::from));
        }
        self.bw.clone().expect("just set")
    }

    fn result(
        &self,
        method: Method,
        corners: CornerSet,
        diagnostics: Map<String, Value>,
    ) -> Result<GamutResult, PipelineError> {
        let gamut = corners.gamut();
        Ok(GamutResult {
            method: method.name().to_string(),
            gamut: corners,
            volume: gamut.volume(),
            luminosity_ratio: ratio(&corners, self.inst),
            per_projector_matrix: matrices(&gamut, &self.inst.projectors)?,
            diagnostics,
        })
    }

    fn run(&mut self, method: Method) -> Result<GamutResult, PipelineError> {
        let start = Instant::now();
        let mut diag = Map::new();
        let corners = match method {
            Method::Volmax => {
                let bw = self.black_white()?;
                let vm = maximize_volume_tol(&self.gamuts, &bw.k, &bw.w, self.cfg.tol)?;
                diag.insert("black_white_candidates".into(), json!(bw.candidate_count));
                diag.insert("chromaticity".into(), json!([bw.chroma.u, bw.chroma.v]));
                diag.insert("objective".into(), json!(vm.volume));
                diag.insert("gamma".into(), json!(vm.stats));
                vm.corners
            }
            Method::Qcp => {
                let (specs, source) = match &self.cfg.qcp_specs {
                    Some(s) => (s.clone(), "provided"),
                    None => (default_specs(&self.gamuts), "default"),
                };
                let sol = solve_qcp(&self.gamuts, &specs, self.cfg.qcp_tol)?;
                diag.insert("specs".into(), json!(source));
                diag.insert("spec_count".into(), json!(specs.len()));
                diag.insert("t_star".into(), json!(sol.t_star));
                diag.insert("bracket".into(), json!([sol.bracket.0, sol.bracket.1]));
                diag.insert("iterations".into(), json!(sol.iterations));
                diag.insert("sweeps".into(), json!(sol.sweeps));
                diag.insert("budget_exceeded".into(), json!(sol.budget_exceeded));
                diag.insert("chromaticity_gap".into(), json!(sol.chroma_gap));
                sol.corners
            }
            Method::Stone => {
                let st = stone_gamut(&self.gamuts, &self.p, &self.inst.weights)?;
                diag.insert("trace".into(), json!(st.trace));
                st.corners
            }
            Method::All => unreachable!("expanded by the caller"),
        };
        if self.cfg.timings {
            diag.insert("runtime_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
        }
        self.result(method, corners, diag)
    }
}

/// Runs the configured methods. Method failures under `all` are recorded
/// as long as one method succeeds. With `perturb` set, a degenerate failure
/// of the run or of any method triggers one retry on shrunk gamuts.
pub fn run_pipeline(inst: &Instance, cfg: &Config) -> Result<PipelineOutput, PipelineError> {
    let gamuts = distinct_gamuts(&inst.projectors);
    let first = run_on(inst, cfg, gamuts.clone());
    let reason = match (&first, cfg.perturb) {
        (_, None) => return first,
        (Err(e), _) if e.is_degenerate() => e.to_string(),
        (Ok(out), _) => match out.failures.iter().find(|f| f.degenerate) {
            Some(f) => format!("{}: {}", f.method, f.error),
            None => return first,
        },
        _ => return first,
    };
    let magnitude = cfg.perturb.expect("checked");
    let shrunk = shrink_gamuts(&gamuts, magnitude, cfg.perturb_seed);
    let mut out = run_on(inst, cfg, shrunk)?;
    out.perturbation = Some(Perturbation {
        magnitude,
        seed: cfg.perturb_seed,
        reason,
    });
    Ok(out)
}

fn run_on(inst: &Instance, cfg: &Config, gamuts: Vec<Gamut>) -> Result<PipelineOutput, PipelineError> {
    let p = gamut_intersection(&gamuts, cfg.tol)?;
    let mut ctx = Context {
        inst,
        cfg,
        gamuts,
        p,
        bw: None,
    };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for &m in cfg.method.runs() {
        match ctx.run(m) {
            Ok(r) => results.push(r),
            Err(e) => {
                failures.push(MethodFailure {
                    method: m.name().to_string(),
                    error: e.to_string(),
                    exit_code: e.exit_code(),
                    degenerate: e.is_degenerate(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if results.is_empty() {
        return Err(first_error.expect("at least one method ran"));
    }

    let black_white = match ctx.bw.clone() {
        Some(Ok(bw)) => Some(bw),
        _ => None,
    };
    let comparison = (cfg.method == Method::All).then(|| compare(&results));
    let verification = match cfg.verify {
        Some(v) => Some(verify(&ctx, &results, black_white.as_ref(), v)?),
        None => None,
    };
    Ok(PipelineOutput {
        distinct_gamuts: ctx.gamuts.len(),
        intersection_vertices: ctx.p.vertices().len(),
        intersection_facets: ctx.p.facets().len(),
        black_white,
        results,
        failures,
        comparison,
        verification,
        perturbation: None,
    })
}

fn compare(results: &[GamutResult]) -> Comparison {
    let mut volumes = Map::new();
    let mut luminosity_ratios = Map::new();
    for r in results {
        volumes.insert(r.method.clone(), json!(r.volume));
        luminosity_ratios.insert(r.method.clone(), json!(r.luminosity_ratio));
    }
    let find = |m: &str| results.iter().find(|r| r.method == m);
    let (same_black_white, volmax_not_below_stone) = match (find("volmax"), find("stone")) {
        (Some(v), Some(s)) => {
            let close = |a: &tilegamut::Color, b: &tilegamut::Color| (a - b).amax() <= 1e-9 * a.amax().max(1.0);
            let same = close(&v.gamut.k, &s.gamut.k) && close(&v.gamut.w, &s.gamut.w);
            (Some(same), same.then_some(v.volume >= s.volume - 1e-9))
        }
        _ => (None, None),
    };
    Comparison {
        volumes,
        luminosity_ratios,
        same_black_white,
        volmax_not_below_stone,
    }
}

/// Device coordinates of each standard corner under one matrix.
fn corner_audit(m: &ProjectorMatrix) -> Option<f64> {
    let worst = color::unit_cube_corners()
        .iter()
        .flat_map(|x| (0..3).map(move |r| (0..3).map(|c| m.matrix[r][c] * x[c]).sum::<f64>() + m.matrix[r][3]))
        .map(|t| (-t).max(t - 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    (worst > AUDIT_TOL).then_some(worst)
}

fn verify(
    ctx: &Context,
    results: &[GamutResult],
    bw: Option<&BwSelection>,
    v: VerifyConfig,
) -> Result<Verification, PipelineError> {
    let mut violations = Vec::new();
    for r in results {
        for m in &r.per_projector_matrix {
            if let Some(worst) = corner_audit(m) {
                violations.push(format!(
                    "{}: a corner leaves projector {:?} by {worst:e}",
                    r.method, m.id
                ));
            }
        }
    }
    let mut grid = None;
    let mut volume = None;
    if let Some(bw) = bw {
        let g = grid_bw_oracle(&ctx.p, v.grid_res);
        if bw.ratio < g.best_value - RATIO_ORACLE_TOL {
            violations.push(format!(
                "grid ratio {} exceeds selected ratio {}",
                g.best_value, bw.ratio
            ));
        }
        grid = Some(g);
        if let Some(vm) = results.iter().find(|r| r.method == "volmax") {
            let s = sample_volume_oracle(&ctx.gamuts, &bw.k, &bw.w, v.samples, v.seed)?;
            if vm.volume < s.best_value * (1.0 - VOLUME_ORACLE_TOL) {
                violations.push(format!("sampled volume {} exceeds optimum {}", s.best_value, vm.volume));
            }
            volume = Some(s);
        }
    }
    Ok(Verification {
        config: v,
        grid,
        volume,
        violations,
    })
}
