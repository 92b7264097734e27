//! Bounded convex polytopes in dimension 2, 3 or 6.
//!
//! Polytopes are built from halfspaces by the double description method:
//! starting from a bounding box, each halfspace is inserted in turn while the
//! full vertex list, together with the set of constraints tight at each
//! vertex, is maintained. Adjacency between vertices is decided
//! combinatorially, which is exact as long as the incidence sets are.
//!
//! Once built, a polytope carries its irredundant facets and the
//! vertex/facet incidence relation. From there [`face_lattice`] recovers every
//! face and [`pulling_triangulation`] triangulates the boundary by coning each
//! face from its lexicographically smallest vertex.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::color::{Chroma, Color};

/// Relative tolerance for feasibility and incidence decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Vertex deduplication radius, relative to the polytope diameter.
pub const DEDUP_TOL: f64 = 1e-8;

const SUPPORTED_DIMS: [usize; 3] = [2, 3, 6];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolytopeError {
    #[error("unsupported dimension {0} (expected 2, 3 or 6)")]
    UnsupportedDimension(usize),
    #[error("halfspace {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("halfspace {0} has a zero or non-finite normal")]
    ZeroNormal(usize),
    #[error("no halfspaces given")]
    NoHalfspaces,
    #[error("halfspace intersection is empty")]
    EmptyIntersection,
    #[error("halfspace intersection is unbounded")]
    UnboundedRegion,
    #[error("halfspace intersection is degenerate: affine dimension {achieved} < {dim}")]
    DegenerateIntersection { dim: usize, achieved: usize },
    #[error("facet {facet} lies on a plane through the origin")]
    OriginOnFacetPlane { facet: usize },
    #[error("the origin lies inside the polytope")]
    OriginInside,
    #[error("the chromaticity ray ({u}, {v}) misses the polytope")]
    RayMisses { u: f64, v: f64 },
    #[error("operation requires a 3-dimensional polytope, got dimension {0}")]
    NotThreeDimensional(usize),
}

/// The closed halfspace `normal . x <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn from_slice(normal: &[f64], offset: f64) -> Self {
        Self::new(DVector::from_column_slice(normal), offset)
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `offset - normal . x`; nonnegative exactly on the feasible side.
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.offset - self.normal.dot(x)
    }

    pub fn slack3(&self, x: &Color) -> f64 {
        self.offset - (self.normal[0] * x.x + self.normal[1] * x.y + self.normal[2] * x.z)
    }

    /// The same halfspace with a unit normal, or `None` for a zero normal.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.normal.norm();
        if !(n > 0.0) || !n.is_finite() || !self.offset.is_finite() {
            return None;
        }
        Some(Self::new(&self.normal / n, self.offset / n))
    }
}

/// Axis-aligned box used to seed the double description.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl BoundingBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self::new(
            DVector::from_element(dim, -half_width),
            DVector::from_element(dim, half_width),
        )
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a DVector<f64>>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.clone(), first.clone());
        for p in it {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Some(Self::new(lo, hi))
    }

    /// Grows the box on every side by `rel` times its largest extent plus
    /// `abs`.
    pub fn enlarged(&self, rel: f64, abs: f64) -> Self {
        let extent = (&self.hi - &self.lo).max();
        let pad = rel * extent + abs;
        Self::new(self.lo.add_scalar(-pad), self.hi.add_scalar(pad))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// A bounded, full-dimensional convex polytope in vertex and facet form.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<DVector<f64>>,
    facets: Vec<Halfspace>,
    facet_sources: Vec<usize>,
    facet_vertices: Vec<Vec<usize>>,
    vertex_facets: Vec<Vec<usize>>,
    tol: f64,
    scale: f64,
}

impl Polytope {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &DVector<f64> {
        &self.vertices[i]
    }

    /// A vertex of a 3-dimensional polytope as a color.
    pub fn vertex3(&self, i: usize) -> Color {
        let v = &self.vertices[i];
        Color::new(v[0], v[1], v[2])
    }

    /// Irredundant facet halfspaces, each with a unit normal.
    pub fn facets(&self) -> &[Halfspace] {
        &self.facets
    }

    /// Index into the input halfspace list that produced each facet.
    pub fn facet_sources(&self) -> &[usize] {
        &self.facet_sources
    }

    /// Sorted vertex indices lying on each facet.
    pub fn facet_vertices(&self) -> &[Vec<usize>] {
        &self.facet_vertices
    }

    /// Sorted facet indices tight at each vertex.
    pub fn vertex_facets(&self) -> &[Vec<usize>] {
        &self.vertex_facets
    }

    /// The relative tolerance the polytope was built with.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Magnitude used to turn relative tolerances into absolute ones.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(&self.vertices).expect("polytope has vertices")
    }

    pub fn diameter(&self) -> f64 {
        let b = self.bounding_box();
        (&b.hi - &b.lo).norm()
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for v in &self.vertices {
            c += v;
        }
        c / self.vertices.len() as f64
    }
}

/// Builds the polytope `{x : normal_i . x <= offset_i for all i}`.
///
/// The seed box is chosen from the halfspace offsets and widened when the
/// result touches it; a region that still touches the widest box is reported
/// as unbounded.
pub fn intersect_halfspaces(hs: &[Halfspace], dim: usize, tol: f64) -> Result<Polytope, PolytopeError> {
    let prepared = prepare(hs, dim)?;
    let mut half_width = 1e3 * (1.0 + prepared.scale);
    for attempt in 0..3 {
        let bounds = BoundingBox::cube(dim, half_width);
        match double_description(&prepared, dim, tol, &bounds) {
            Err(PolytopeError::UnboundedRegion) if attempt < 2 => half_width *= 1e3,
            other => return other,
        }
    }
    unreachable!("the last attempt returns")
}

/// As [`intersect_halfspaces`], but seeded from a caller-supplied box that
/// must strictly contain the intersection.
pub fn intersect_halfspaces_within(
    hs: &[Halfspace],
    dim: usize,
    tol: f64,
    bounds: &BoundingBox,
) -> Result<Polytope, PolytopeError> {
    let prepared = prepare(hs, dim)?;
    if bounds.dim() != dim {
        return Err(PolytopeError::DimensionMismatch {
            index: usize::MAX,
            expected: dim,
            found: bounds.dim(),
        });
    }
    double_description(&prepared, dim, tol, bounds)
}

struct Prepared {
    /// Normalized halfspaces, exact duplicates removed.
    halfspaces: Vec<Halfspace>,
    /// Input index for each retained halfspace.
    sources: Vec<usize>,
    scale: f64,
}

fn prepare(hs: &[Halfspace], dim: usize) -> Result<Prepared, PolytopeError> {
    if !SUPPORTED_DIMS.contains(&dim) {
        return Err(PolytopeError::UnsupportedDimension(dim));
    }
    if hs.is_empty() {
        return Err(PolytopeError::NoHalfspaces);
    }
    let mut halfspaces: Vec<Halfspace> = Vec::with_capacity(hs.len());
    let mut sources = Vec::with_capacity(hs.len());
    for (i, h) in hs.iter().enumerate() {
        if h.dim() != dim {
            return Err(PolytopeError::DimensionMismatch {
                index: i,
                expected: dim,
                found: h.dim(),
            });
        }
        let n = h.normalized().ok_or(PolytopeError::ZeroNormal(i))?;
        let duplicate = halfspaces.iter().any(|e| {
            (e.offset - n.offset).abs() <= 1e-12 * (1.0 + n.offset.abs()) && (&e.normal - &n.normal).amax() <= 1e-12
        });
        if !duplicate {
            halfspaces.push(n);
            sources.push(i);
        }
    }
    let scale = halfspaces.iter().map(|h| h.offset.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    Ok(Prepared {
        halfspaces,
        sources,
        scale,
    })
}

struct DdVertex {
    x: DVector<f64>,
    /// Tight constraints; box constraints first, then the inputs.
    active: FixedBitSet,
}

fn double_description(
    prepared: &Prepared,
    dim: usize,
    tol: f64,
    bounds: &BoundingBox,
) -> Result<Polytope, PolytopeError> {
    let n_box = 2 * dim;
    let n_total = n_box + prepared.halfspaces.len();
    let eps = tol * prepared.scale;

    // Box constraint 2j is x_j >= lo_j, 2j + 1 is x_j <= hi_j.
    let mut verts: Vec<DdVertex> = (0..1usize << dim)
        .map(|mask| {
            let mut active = FixedBitSet::with_capacity(n_total);
            let x = DVector::from_fn(dim, |j, _| {
                if mask >> j & 1 == 0 {
                    active.insert(2 * j);
                    bounds.lo[j]
                } else {
                    active.insert(2 * j + 1);
                    bounds.hi[j]
                }
            });
            DdVertex { x, active }
        })
        .collect();

    for (i, h) in prepared.halfspaces.iter().enumerate() {
        let ci = n_box + i;
        let slack: Vec<f64> = verts.iter().map(|v| h.slack(&v.x)).collect();
        let mut outside = Vec::new();
        let mut inside = Vec::new();
        let mut on = Vec::new();
        for (k, &s) in slack.iter().enumerate() {
            if s < -eps {
                outside.push(k);
            } else if s > eps {
                inside.push(k);
            } else {
                on.push(k);
            }
        }
        if outside.is_empty() {
            for &k in &on {
                verts[k].active.insert(ci);
            }
            continue;
        }
        if inside.is_empty() {
            if on.is_empty() {
                return Err(PolytopeError::EmptyIntersection);
            }
            let pts: Vec<&DVector<f64>> = on.iter().map(|&k| &verts[k].x).collect();
            let achieved = affine_rank(&pts, 10.0 * eps);
            return Err(PolytopeError::DegenerateIntersection { dim, achieved });
        }

        let mut created = Vec::new();
        let mut common = FixedBitSet::with_capacity(n_total);
        for &u in &outside {
            for &w in &inside {
                common.clone_from(&verts[u].active);
                common.intersect_with(&verts[w].active);
                if common.count_ones(..) + 1 < dim {
                    continue;
                }
                let adjacent = verts
                    .iter()
                    .enumerate()
                    .all(|(k, v)| k == u || k == w || !common.is_subset(&v.active));
                if !adjacent {
                    continue;
                }
                let t = slack[u] / (slack[u] - slack[w]);
                let x = &verts[u].x + (&verts[w].x - &verts[u].x) * t;
                let mut active = common.clone();
                active.insert(ci);
                created.push(DdVertex { x, active });
            }
        }
        let mut next: Vec<DdVertex> = Vec::with_capacity(inside.len() + on.len() + created.len());
        let mut keep = vec![false; verts.len()];
        for &k in inside.iter().chain(&on) {
            keep[k] = true;
        }
        let on_set: HashSet<usize> = on.into_iter().collect();
        for (k, mut v) in verts.into_iter().enumerate() {
            if keep[k] {
                if on_set.contains(&k) {
                    v.active.insert(ci);
                }
                next.push(v);
            }
        }
        next.extend(created);
        verts = next;
    }

    if verts
        .iter()
        .any(|v| v.active.ones().take_while(|&c| c < n_box).next().is_some())
    {
        return Err(PolytopeError::UnboundedRegion);
    }

    // Re-solve every vertex from its tight constraints to shed the rounding
    // accumulated along the insertion chain.
    for v in &mut verts {
        let rows: Vec<usize> = v.active.ones().map(|c| c - n_box).collect();
        if let Some(x) = least_squares_vertex(&prepared.halfspaces, &rows, dim) {
            if (&x - &v.x).norm() <= 1e3 * eps.max(f64::EPSILON * prepared.scale) {
                v.x = x;
            }
        }
    }

    // Merge vertices closer than the dedup radius.
    let diam = {
        let b = BoundingBox::of_points(verts.iter().map(|v| &v.x)).expect("nonempty");
        (&b.hi - &b.lo).norm()
    };
    let radius = DEDUP_TOL * diam.max(f64::MIN_POSITIVE);
    let mut merged: Vec<DdVertex> = Vec::with_capacity(verts.len());
    for v in verts {
        match merged.iter_mut().find(|m| (&m.x - &v.x).norm() <= radius) {
            Some(m) => m.active.union_with(&v.active),
            None => merged.push(v),
        }
    }
    let verts = merged;

    let pts: Vec<&DVector<f64>> = verts.iter().map(|v| &v.x).collect();
    let rank_tol = 10.0 * eps.max(tol * diam);
    let achieved = affine_rank(&pts, rank_tol);
    if achieved < dim {
        return Err(PolytopeError::DegenerateIntersection { dim, achieved });
    }

    // Facets: constraints whose tight vertices span a hyperplane, one per
    // distinct vertex set.
    let mut facets = Vec::new();
    let mut facet_sources = Vec::new();
    let mut facet_vertices: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for (i, h) in prepared.halfspaces.iter().enumerate() {
        let ci = n_box + i;
        let on: Vec<usize> = (0..verts.len()).filter(|&k| verts[k].active.contains(ci)).collect();
        if on.len() < dim || seen.contains(&on) {
            continue;
        }
        let pts: Vec<&DVector<f64>> = on.iter().map(|&k| &verts[k].x).collect();
        if affine_rank(&pts, rank_tol) != dim - 1 {
            continue;
        }
        seen.insert(on.clone());
        facets.push(h.clone());
        facet_sources.push(prepared.sources[i]);
        facet_vertices.push(on);
    }
    let mut vertex_facets = vec![Vec::new(); verts.len()];
    for (f, vs) in facet_vertices.iter().enumerate() {
        for &v in vs {
            vertex_facets[v].push(f);
        }
    }

    Ok(Polytope {
        dim,
        vertices: verts.into_iter().map(|v| v.x).collect(),
        facets,
        facet_sources,
        facet_vertices,
        vertex_facets,
        tol,
        scale: prepared.scale,
    })
}

fn least_squares_vertex(hs: &[Halfspace], rows: &[usize], dim: usize) -> Option<DVector<f64>> {
    if rows.len() < dim {
        return None;
    }
    let a = DMatrix::from_fn(rows.len(), dim, |r, c| hs[rows[r]].normal[c]);
    let b = DVector::from_fn(rows.len(), |r, _| hs[rows[r]].offset);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count() < dim {
        return None;
    }
    svd.solve(&b, 1e-12 * smax).ok()
}

/// Affine dimension of a point set: the number of singular values of the
/// centered point matrix above `tol`.
pub fn affine_rank(points: &[&DVector<f64>], tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let dim = points[0].len();
    let p0 = points[0];
    let m = DMatrix::from_fn(points.len() - 1, dim, |r, c| points[r + 1][c] - p0[c]);
    m.singular_values().iter().filter(|&&s| s > tol).count()
}

/// Facet-based membership: `normal . x <= offset + tol * |normal| * max(1, |x|)`
/// for every facet.
pub fn contains_point(p: &Polytope, x: &DVector<f64>, tol: f64) -> bool {
    let scale = x.norm().max(1.0);
    p.facets
        .iter()
        .all(|h| h.normal.dot(x) <= h.offset + tol * h.normal.norm() * scale)
}

pub fn contains_color(p: &Polytope, x: &Color, tol: f64) -> bool {
    contains_point(p, &DVector::from_column_slice(x.as_slice()), tol)
}

/// One face of a polytope, identified by its vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub dim: usize,
    /// Sorted vertex indices.
    pub vertices: Vec<usize>,
    /// Indices (into [`FaceLattice::faces`]) of this face's own facets.
    pub subfaces: Vec<usize>,
}

/// All proper nonempty faces of a polytope.
#[derive(Debug, Clone)]
pub struct FaceLattice {
    pub faces: Vec<Face>,
    /// Face indices grouped by dimension `0..d`.
    pub by_dim: Vec<Vec<usize>>,
}

impl FaceLattice {
    pub fn counts(&self) -> Vec<usize> {
        self.by_dim.iter().map(Vec::len).collect()
    }
}

/// Computes every proper face, from facets down to vertices.
///
/// The facets of a face `F` are the inclusion-maximal sets among
/// `F ∩ facet` for the polytope facets not containing `F`.
pub fn face_lattice(p: &Polytope) -> FaceLattice {
    let d = p.dim;
    let nv = p.vertices.len();
    let facet_sets: Vec<FixedBitSet> = p
        .facet_vertices
        .iter()
        .map(|vs| {
            let mut b = FixedBitSet::with_capacity(nv);
            vs.iter().for_each(|&v| b.insert(v));
            b
        })
        .collect();

    let mut sets: Vec<FixedBitSet> = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); d];
    let mut index: HashMap<FixedBitSet, usize> = HashMap::new();

    let mut intern = |set: FixedBitSet,
                      dim: usize,
                      faces: &mut Vec<Face>,
                      sets: &mut Vec<FixedBitSet>,
                      by_dim: &mut Vec<Vec<usize>>|
     -> usize {
        if let Some(&id) = index.get(&set) {
            return id;
        }
        let id = faces.len();
        faces.push(Face {
            dim,
            vertices: set.ones().collect(),
            subfaces: Vec::new(),
        });
        by_dim[dim].push(id);
        index.insert(set.clone(), id);
        sets.push(set);
        id
    };

    for set in &facet_sets {
        intern(set.clone(), d - 1, &mut faces, &mut sets, &mut by_dim);
    }
    for dim in (1..d).rev() {
        let level = by_dim[dim].clone();
        for id in level {
            let f = sets[id].clone();
            let mut cands: Vec<FixedBitSet> = Vec::new();
            for fs in &facet_sets {
                if f.is_subset(fs) {
                    continue;
                }
                let mut inter = f.clone();
                inter.intersect_with(fs);
                if inter.is_clear() {
                    continue;
                }
                cands.push(inter);
            }
            cands.sort_by(|a, b| {
                b.count_ones(..)
                    .cmp(&a.count_ones(..))
                    .then_with(|| a.ones().cmp(b.ones()))
            });
            let mut maximal: Vec<FixedBitSet> = Vec::new();
            for c in cands {
                if !maximal.iter().any(|m| c.is_subset(m)) {
                    maximal.push(c);
                }
            }
            let subs: Vec<usize> = maximal
                .into_iter()
                .map(|s| intern(s, dim - 1, &mut faces, &mut sets, &mut by_dim))
                .collect();
            faces[id].subfaces = subs;
        }
    }
    FaceLattice { faces, by_dim }
}

/// A simplex on a polytope boundary, as sorted vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    pub vertices: Vec<usize>,
}

impl Simplex {
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        Self { vertices }
    }

    /// Dimension `k` of the simplex (one less than its vertex count).
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// `k`-dimensional volume, from the Gram determinant of the edge vectors.
    pub fn volume(&self, p: &Polytope) -> f64 {
        let k = self.dim();
        if k == 0 {
            return 1.0;
        }
        let p0 = &p.vertices[self.vertices[0]];
        let e = DMatrix::from_fn(p.dim, k, |r, c| p.vertices[self.vertices[c + 1]][r] - p0[r]);
        let gram = e.transpose() * &e;
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        gram.determinant().max(0.0).sqrt() / fact
    }
}

/// The pulling triangulation of a polytope boundary.
#[derive(Debug, Clone)]
pub struct BoundaryTriangulation {
    /// For each face of the lattice (same indexing), the simplices of its
    /// own dimension that triangulate it.
    pub by_face: Vec<Vec<Simplex>>,
    /// The whole simplicial complex: every face of every simplex, sorted by
    /// dimension and then vertex indices.
    pub simplices: Vec<Simplex>,
}

impl BoundaryTriangulation {
    /// The simplices of dimension `d - 1` covering the boundary.
    pub fn top<'a>(&'a self, lattice: &'a FaceLattice) -> impl Iterator<Item = &'a Simplex> + 'a {
        let d = lattice.by_dim.len();
        lattice.by_dim[d - 1].iter().flat_map(move |&f| self.by_face[f].iter())
    }

    pub fn count_by_dim(&self) -> Vec<usize> {
        let maxd = self.simplices.iter().map(Simplex::dim).max().unwrap_or(0);
        let mut counts = vec![0; maxd + 1];
        for s in &self.simplices {
            counts[s.dim()] += 1;
        }
        counts
    }
}

/// Lexicographic order of vertex coordinates.
fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Triangulates every face by coning from its lexicographically smallest
/// ("bottommost") vertex over the triangulations of the subfaces that avoid
/// it, then closes the result under taking faces.
pub fn pulling_triangulation(p: &Polytope, lattice: &FaceLattice) -> BoundaryTriangulation {
    let nv = p.vertices.len();
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&a, &b| lex_cmp(&p.vertices[a], &p.vertices[b]));
    let mut rank = vec![0usize; nv];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }

    let mut by_face: Vec<Vec<Simplex>> = vec![Vec::new(); lattice.faces.len()];
    for dim in 0..lattice.by_dim.len() {
        for &fid in &lattice.by_dim[dim] {
            let face = &lattice.faces[fid];
            if dim == 0 {
                by_face[fid] = vec![Simplex::new(face.vertices.clone())];
                continue;
            }
            let apex = *face
                .vertices
                .iter()
                .min_by_key(|&&v| rank[v])
                .expect("faces are nonempty");
            let mut out = Vec::new();
            for &sub in &face.subfaces {
                if lattice.faces[sub].vertices.binary_search(&apex).is_ok() {
                    continue;
                }
                for s in &by_face[sub] {
                    let mut vs = s.vertices.clone();
                    vs.push(apex);
                    out.push(Simplex::new(vs));
                }
            }
            by_face[fid] = out;
        }
    }

    let d = lattice.by_dim.len();
    let mut closure: HashSet<Simplex> = HashSet::new();
    for &fid in &lattice.by_dim[d - 1] {
        for s in &by_face[fid] {
            let m = s.vertices.len();
            for mask in 1u32..(1 << m) {
                let vs = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| s.vertices[i]).collect();
                closure.insert(Simplex { vertices: vs });
            }
        }
    }
    let mut simplices: Vec<Simplex> = closure.into_iter().collect();
    simplices.sort_by(|a, b| a.dim().cmp(&b.dim()).then_with(|| a.vertices.cmp(&b.vertices)));
    BoundaryTriangulation { by_face, simplices }
}

/// Facets split by which side of their plane the origin lies on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetClass {
    /// Facets visible from the origin (negative offset).
    pub lower: Vec<usize>,
    /// Facets facing away from the origin (positive offset).
    pub upper: Vec<usize>,
}

pub fn classify_facets(p: &Polytope) -> Result<FacetClass, PolytopeError> {
    if p.dim != 3 {
        return Err(PolytopeError::NotThreeDimensional(p.dim));
    }
    let eps = p.tol * p.scale;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (i, h) in p.facets.iter().enumerate() {
        if h.offset.abs() <= eps {
            return Err(PolytopeError::OriginOnFacetPlane { facet: i });
        }
        if h.offset < 0.0 {
            lower.push(i);
        } else {
            upper.push(i);
        }
    }
    if lower.is_empty() {
        return Err(PolytopeError::OriginInside);
    }
    Ok(FacetClass { lower, upper })
}

/// Entry and exit points of a chromaticity ray through a 3-polytope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayExtent {
    pub t_minus: f64,
    pub t_plus: f64,
    /// Nearest point of the polytope on the ray.
    pub lambda_minus: Color,
    /// Farthest point of the polytope on the ray.
    pub lambda_plus: Color,
}

impl RayExtent {
    /// Ray-parameter ratio `t+ / t-`, which equals the luminosity ratio of
    /// the two points under any linear luminosity.
    pub fn ratio(&self) -> f64 {
        self.t_plus / self.t_minus
    }
}

/// Intersects the ray `{t * (u, v, 1 - u - v) : t > 0}` with `p`.
pub fn ray_extent(p: &Polytope, c: &Chroma) -> Result<RayExtent, PolytopeError> {
    if p.dim != 3 {
        return Err(PolytopeError::NotThreeDimensional(p.dim));
    }
    let d = c.direction();
    let miss = PolytopeError::RayMisses { u: c.u, v: c.v };
    let mut t_lo = 0.0f64;
    let mut t_hi = f64::INFINITY;
    for h in &p.facets {
        let nd = h.normal[0] * d.x + h.normal[1] * d.y + h.normal[2] * d.z;
        if nd.abs() <= 1e-15 {
            if h.offset < -p.tol * p.scale {
                return Err(miss);
            }
        } else if nd > 0.0 {
            t_hi = t_hi.min(h.offset / nd);
        } else {
            t_lo = t_lo.max(h.offset / nd);
        }
    }
    if !t_hi.is_finite() {
        return Err(PolytopeError::UnboundedRegion);
    }
    // Grazing contact within tolerance counts as a single tangent point.
    let slack = p.tol * t_hi.abs().max(t_lo.abs()).max(1.0);
    if t_lo > t_hi + slack || t_hi <= 0.0 {
        return Err(miss);
    }
    if t_lo > t_hi {
        let mid = 0.5 * (t_lo + t_hi);
        t_lo = mid;
        t_hi = mid;
    }
    Ok(RayExtent {
        t_minus: t_lo,
        t_plus: t_hi,
        lambda_minus: d * t_lo,
        lambda_plus: d * t_hi,
    })
}

pub(crate) fn to_dvector(c: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(c.as_slice())
}
