//! Enriched edge rows and aggregated instance descriptors.
//!
//! Every per-part quantity (face areas, perimeters, distinct-neighbour
//! degrees, grid statistics, per-edge dihedral/concavity/curvature) is
//! computed once in a [`PartContext`] and then reused by both the edge rows
//! and the instance descriptors, so a full pass over a part stays linear in
//! `|V| + |E|`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dsu::DisjointSets;
use crate::graph::{EdgeRecord, EdgeType, FaceGrid, PartGraph, SurfaceType};
use crate::learner::FeatureMatrix;
use crate::EPSILON;

/// Bumped whenever the edge row layout changes.
pub const EDGE_FEATURE_SCHEMA_VERSION: u32 = 1;
/// Bumped whenever the instance descriptor layout changes.
pub const INSTANCE_FEATURE_SCHEMA_VERSION: u32 = 1;

/// Names of the derived block appended to the raw edge attributes.
pub const EDGE_DELTA_NAMES: [&str; EDGE_DELTA_LEN] = [
    "dihedral_angle",
    "concavity",
    "area_ratio",
    "perimeter_ratio",
    "normalized_length",
    "centroid_distance",
    "edge_line",
    "edge_circle",
    "edge_ellipse",
    "edge_bspline",
    "edge_other",
    "s_plane",
    "s_cylinder",
    "s_cone",
    "s_sphere",
    "s_torus",
    "s_bspline",
    "s_other",
    "t_plane",
    "t_cylinder",
    "t_cone",
    "t_sphere",
    "t_torus",
    "t_bspline",
    "t_other",
    "log_area_gap",
    "degree_s",
    "degree_t",
];
pub const EDGE_DELTA_LEN: usize = 6 + EdgeType::COUNT + 2 * SurfaceType::COUNT + 3;

const DELTA_EDGE_TYPE: usize = 6;
const DELTA_SURF_S: usize = DELTA_EDGE_TYPE + EdgeType::COUNT;
const DELTA_SURF_T: usize = DELTA_SURF_S + SurfaceType::COUNT;
const DELTA_TAIL: usize = DELTA_SURF_T + SurfaceType::COUNT;

/// Width of an enriched edge row for raw edge attributes of width `d_edge`.
pub fn edge_feature_len(d_edge: usize) -> usize {
    d_edge + EDGE_DELTA_LEN
}

/// Fraction of the valid grid samples (closest to the edge) used for the
/// local normal estimate.
const NEAR_EDGE_FRACTION: f64 = 0.10;

/// Spectral connectivity switches from dense Jacobi to inverse iteration
/// above this many nodes.
pub const DENSE_EIGEN_LIMIT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AttributeError {
    #[error("face grid has no valid samples")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrWarning {
    /// A face with zero area fed a ratio; the epsilon guard was applied.
    ZeroArea { face: usize },
    /// Masked mean normal cancelled to zero; slot values were used instead.
    DegenerateNormal { face: usize },
    /// Grid present but without any valid sample.
    EmptyGrid { face: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStats {
    pub centroid: [f64; 3],
    pub mean_normal: [f64; 3],
    pub valid_fraction: f64,
    /// The masked mean normal was the zero vector and is left unnormalized.
    pub degenerate_normal: bool,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn masked_mean(grid: &FaceGrid, picks: impl Iterator<Item = usize>) -> Option<([f64; 3], [f64; 3], usize)> {
    let mut c = [0.0; 3];
    let mut nrm = [0.0; 3];
    let mut count = 0usize;
    for idx in picks {
        let p = grid.position(idx);
        let q = grid.normal(idx);
        for d in 0..3 {
            c[d] += p[d];
            nrm[d] += q[d];
        }
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let inv = 1.0 / count as f64;
    Some((
        [c[0] * inv, c[1] * inv, c[2] * inv],
        [nrm[0] * inv, nrm[1] * inv, nrm[2] * inv],
        count,
    ))
}

/// Masked centroid, renormalized mean normal and valid fraction of a grid.
pub fn grid_derived_face_stats(grid: &FaceGrid) -> Result<GridStats, AttributeError> {
    let (centroid, mean, count) =
        masked_mean(grid, (0..grid.len()).filter(|&i| grid.is_valid(i))).ok_or(AttributeError::EmptyGrid)?;
    let len = norm(mean);
    let (mean_normal, degenerate_normal) = if len > EPSILON {
        ([mean[0] / len, mean[1] / len, mean[2] / len], false)
    } else {
        ([0.0; 3], true)
    };
    Ok(GridStats {
        centroid,
        mean_normal,
        valid_fraction: count as f64 / grid.len() as f64,
        degenerate_normal,
    })
}

fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]))
}

fn polyline_distance(p: [f64; 3], polyline: &[[f64; 3]]) -> f64 {
    match polyline.len() {
        0 => 0.0,
        1 => norm(sub(p, polyline[0])),
        _ => polyline
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Mean position and normal of the valid grid samples nearest to the edge.
fn near_edge_frame(grid: &FaceGrid, polyline: &[[f64; 3]]) -> Option<([f64; 3], [f64; 3])> {
    let valid: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_valid(i)).collect();
    if valid.is_empty() {
        return None;
    }
    let (c, n, _) = if polyline.is_empty() {
        masked_mean(grid, valid.iter().copied())?
    } else {
        let mut dist: Vec<(f64, usize)> = valid
            .iter()
            .map(|&i| (polyline_distance(grid.position(i), polyline), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let keep = (libm::ceil(dist.len() as f64 * NEAR_EDGE_FRACTION) as usize).max(1);
        masked_mean(grid, dist[..keep].iter().map(|&(_, i)| i))?
    };
    let len = norm(n);
    if len <= EPSILON {
        return None;
    }
    Some((c, [n[0] / len, n[1] / len, n[2] / len]))
}

/// Interior angle between two faces from their normals: π for coplanar.
pub fn dihedral_from_normals(n_i: [f64; 3], n_j: [f64; 3]) -> f64 {
    PI - libm::acos(dot(n_i, n_j).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceStats {
    pub area: f64,
    pub perimeter: f64,
    pub degree: usize,
    pub grid: Option<GridStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    /// Radians in `[0, π]`.
    pub dihedral: f64,
    pub concave: bool,
    pub curvature: f64,
    pub centroid_distance: f64,
}

/// Per-part precomputation shared by edge enrichment and instance features.
#[derive(Debug, Clone)]
pub struct PartContext<'g> {
    graph: &'g PartGraph,
    faces: Vec<FaceStats>,
    edges: Vec<EdgeGeometry>,
    warnings: Vec<AttrWarning>,
}

fn slot_value(e: &EdgeRecord, slot: Option<usize>) -> Option<f64> {
    slot.map(|s| e.attrs[s]).filter(|v| v.is_finite())
}

fn edge_curvature(e: &EdgeRecord, slot: Option<usize>) -> f64 {
    match &e.samples {
        Some(samples) => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for j in 0..samples.m_res {
                let r = samples.radius(j);
                if samples.is_valid(j) && r.is_finite() && r != 0.0 {
                    sum += 1.0 / libm::fabs(r);
                    count += 1;
                }
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        }
        None => slot_value(e, slot).unwrap_or(0.0),
    }
}

impl<'g> PartContext<'g> {
    pub fn new(graph: &'g PartGraph) -> Self {
        let slots = graph.schema().slots;
        let mut warnings = Vec::new();
        let mut faces: Vec<FaceStats> = graph
            .faces()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let grid = f.grid.as_ref().and_then(|g| match grid_derived_face_stats(g) {
                    Ok(stats) => {
                        if stats.degenerate_normal {
                            warnings.push(AttrWarning::DegenerateNormal { face: i });
                        }
                        Some(stats)
                    }
                    Err(AttributeError::EmptyGrid) => {
                        warnings.push(AttrWarning::EmptyGrid { face: i });
                        None
                    }
                });
                if f.area == 0.0 {
                    warnings.push(AttrWarning::ZeroArea { face: i });
                }
                FaceStats {
                    area: f.area,
                    perimeter: 0.0,
                    degree: graph.degree(i),
                    grid,
                }
            })
            .collect();
        for (i, stats) in faces.iter_mut().enumerate() {
            stats.perimeter = graph
                .incident_edges(i)
                .iter()
                .map(|&k| graph.edges()[k as usize].length)
                .sum();
        }

        let edges = graph
            .edges()
            .iter()
            .map(|e| {
                let (si, ti) = (e.face_s as usize, e.face_t as usize);
                let fs = &graph.faces()[si];
                let ft = &graph.faces()[ti];
                let slot_dihedral = slot_value(e, slots.dihedral).map(|v| v.clamp(0.0, PI));
                let slot_concave = slot_value(e, slots.concavity).map(|v| v >= 0.5);
                let slot_distance = slot_value(e, slots.centroid_distance);

                let mut geometry = EdgeGeometry {
                    dihedral: slot_dihedral.unwrap_or(0.0),
                    concave: slot_concave.unwrap_or(false),
                    curvature: edge_curvature(e, slots.curvature),
                    centroid_distance: slot_distance.unwrap_or(0.0),
                };
                if let (Some(gs), Some(gt), Some(stats_s), Some(stats_t)) =
                    (&fs.grid, &ft.grid, &faces[si].grid, &faces[ti].grid)
                {
                    geometry.centroid_distance = norm(sub(stats_s.centroid, stats_t.centroid));
                    let polyline: Vec<[f64; 3]> = e
                        .samples
                        .as_ref()
                        .map(|s| (0..s.m_res).filter(|&j| s.is_valid(j)).map(|j| s.point(j)).collect())
                        .unwrap_or_default();
                    if let (Some((c_s, n_s)), Some((c_t, n_t))) =
                        (near_edge_frame(gs, &polyline), near_edge_frame(gt, &polyline))
                    {
                        geometry.dihedral = dihedral_from_normals(n_s, n_t);
                        // each face's centroid seen from the other's outward side
                        let lift = dot(sub(c_t, c_s), n_s) + dot(sub(c_s, c_t), n_t);
                        geometry.concave = lift > EPSILON;
                    }
                }
                geometry
            })
            .collect();

        Self {
            graph,
            faces,
            edges,
            warnings,
        }
    }

    pub fn graph(&self) -> &'g PartGraph {
        self.graph
    }

    pub fn face_stats(&self) -> &[FaceStats] {
        &self.faces
    }

    pub fn edge_geometry(&self) -> &[EdgeGeometry] {
        &self.edges
    }

    pub fn warnings(&self) -> &[AttrWarning] {
        &self.warnings
    }

    /// Appends the enriched row of edge `k` to `out`.
    pub fn edge_row(&self, k: usize, out: &mut Vec<f64>) {
        let e = &self.graph.edges()[k];
        let geo = &self.edges[k];
        let s = &self.faces[e.face_s as usize];
        let t = &self.faces[e.face_t as usize];
        let fs = &self.graph.faces()[e.face_s as usize];
        let ft = &self.graph.faces()[e.face_t as usize];
        let start = out.len();
        out.extend_from_slice(&e.attrs);
        out.resize(start + e.attrs.len() + EDGE_DELTA_LEN, 0.0);
        let d = &mut out[start + e.attrs.len()..];

        d[0] = geo.dihedral;
        d[1] = if geo.concave { 1.0 } else { 0.0 };
        d[2] = guarded_ratio(s.area, t.area);
        d[3] = guarded_ratio(s.perimeter, t.perimeter);
        d[4] = e.length / (libm::sqrt(s.area) + libm::sqrt(t.area) + EPSILON);
        d[5] = geo.centroid_distance / (libm::sqrt(s.area + t.area) + EPSILON);
        d[DELTA_EDGE_TYPE + e.edge_type.index()] = 1.0;
        d[DELTA_SURF_S + fs.surface_type.index()] = 1.0;
        d[DELTA_SURF_T + ft.surface_type.index()] = 1.0;
        d[DELTA_TAIL] = libm::fabs(libm::log(s.area + EPSILON) - libm::log(t.area + EPSILON));
        d[DELTA_TAIL + 1] = s.degree as f64;
        d[DELTA_TAIL + 2] = t.degree as f64;
    }

    /// All enriched edge rows of the part.
    pub fn enriched_edges(&self) -> FeatureMatrix {
        let width = edge_feature_len(self.graph.schema().d_edge);
        let mut data = Vec::with_capacity(width * self.graph.n_edges());
        for k in 0..self.graph.n_edges() {
            self.edge_row(k, &mut data);
        }
        FeatureMatrix::from_vec(width, data).expect("edge rows have uniform width")
    }

    /// Descriptor of the face set `faces` (ascending, unique, non-empty).
    pub fn instance_features(&self, faces: &[u32]) -> InstanceFeatureVector {
        let mut member = alloc::vec![false; self.graph.n_faces()];
        for &f in faces {
            member[f as usize] = true;
        }
        self.instance_features_with(faces, |f| member[f as usize])
    }

    /// Like [`PartContext::instance_features`] but with a caller-supplied
    /// membership test, so a whole partition can be described in one pass.
    pub fn instance_features_with(
        &self,
        faces: &[u32],
        member: impl Fn(u32) -> bool,
    ) -> InstanceFeatureVector {
        let g = self.graph;
        let mut internal: Vec<u32> = Vec::new();
        let mut boundary: Vec<u32> = Vec::new();
        let mut area_sum = 0.0;
        let mut surface_hist = [0.0; SurfaceType::COUNT];
        for &f in faces {
            area_sum += self.faces[f as usize].area;
            surface_hist[g.faces()[f as usize].surface_type.index()] += 1.0;
            for &k in g.incident_edges(f as usize) {
                let e = &g.edges()[k as usize];
                let other = e.other(f);
                if member(other) {
                    if e.face_s == f {
                        internal.push(k);
                    }
                } else {
                    boundary.push(k);
                }
            }
        }
        internal.sort_unstable();
        boundary.sort_unstable();

        let n_faces = faces.len();
        let mut z = alloc::vec![0.0; INSTANCE_FEATURE_LEN];
        z[IF_N_FACES] = n_faces as f64;
        z[IF_N_INTERNAL] = internal.len() as f64;
        z[IF_N_BOUNDARY] = boundary.len() as f64;
        z[IF_L_LOG] = libm::log(libm::sqrt(area_sum) + EPSILON);
        if n_faces > 0 {
            for (dst, count) in z[IF_SURFACE_HIST..].iter_mut().zip(surface_hist) {
                *dst = count / n_faces as f64;
            }
        }
        if !internal.is_empty() {
            let inv = 1.0 / internal.len() as f64;
            for &k in &internal {
                z[IF_EDGE_HIST + g.edges()[k as usize].edge_type.index()] += inv;
            }
            let mut curv: Vec<f64> = internal.iter().map(|&k| self.edges[k as usize].curvature).collect();
            let (mean, std) = mean_std(&curv);
            curv.sort_by(f64::total_cmp);
            z[IF_CURVATURE] = mean;
            z[IF_CURVATURE + 1] = std;
            z[IF_CURVATURE + 2] = curv[0];
            z[IF_CURVATURE + 3] = curv[curv.len() - 1];
            z[IF_CURVATURE + 4] = median_sorted(&curv);
            let concave = internal.iter().filter(|&&k| self.edges[k as usize].concave).count();
            z[IF_CONCAVE_FRACTION] = concave as f64 * inv;
        }
        z[IF_SPECTRAL] = self.spectral_connectivity_sorted(faces, &internal);
        z[IF_LOOPS] = boundary_loops_of(g, &boundary) as f64;
        if !boundary.is_empty() {
            let dihedrals: Vec<f64> = boundary.iter().map(|&k| self.edges[k as usize].dihedral).collect();
            let (mean, std) = mean_std(&dihedrals);
            z[IF_BOUNDARY_DIHEDRAL] = mean;
            z[IF_BOUNDARY_DIHEDRAL + 1] = std;
        }
        z[IF_LOG_AREA] = libm::log(area_sum + EPSILON);
        InstanceFeatureVector(z)
    }

    fn spectral_connectivity_sorted(&self, faces: &[u32], internal: &[u32]) -> f64 {
        let n = faces.len();
        if n <= 1 {
            return 0.0;
        }
        let local = |f: u32| faces.binary_search(&f).expect("internal edge endpoint in set");
        let mut pairs: Vec<(usize, usize)> = internal
            .iter()
            .map(|&k| {
                let e = &self.graph.edges()[k as usize];
                let (a, b) = (local(e.face_s), local(e.face_t));
                (a.min(b), a.max(b))
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        algebraic_connectivity(n, &pairs)
    }
}

fn guarded_ratio(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if lo > 0.0 {
        lo / hi
    } else {
        (lo + EPSILON) / (hi + EPSILON)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Enriched rows for every edge of `g`, plus any guard warnings.
pub fn enrich_edges(g: &PartGraph) -> (FeatureMatrix, Vec<AttrWarning>) {
    let ctx = PartContext::new(g);
    (ctx.enriched_edges(), ctx.warnings)
}

// Instance descriptor layout.
const IF_N_FACES: usize = 0;
const IF_N_INTERNAL: usize = 1;
const IF_N_BOUNDARY: usize = 2;
const IF_L_LOG: usize = 3;
const IF_SURFACE_HIST: usize = 4;
const IF_EDGE_HIST: usize = IF_SURFACE_HIST + SurfaceType::COUNT;
const IF_CURVATURE: usize = IF_EDGE_HIST + EdgeType::COUNT;
const IF_SPECTRAL: usize = IF_CURVATURE + 5;
const IF_LOOPS: usize = IF_SPECTRAL + 1;
const IF_BOUNDARY_DIHEDRAL: usize = IF_LOOPS + 1;
const IF_CONCAVE_FRACTION: usize = IF_BOUNDARY_DIHEDRAL + 2;
const IF_LOG_AREA: usize = IF_CONCAVE_FRACTION + 1;
pub const INSTANCE_FEATURE_LEN: usize = IF_LOG_AREA + 1;

pub const INSTANCE_FEATURE_NAMES: [&str; INSTANCE_FEATURE_LEN] = [
    "n_faces",
    "n_internal_edges",
    "n_boundary_edges",
    "log_characteristic_length",
    "hist_plane",
    "hist_cylinder",
    "hist_cone",
    "hist_sphere",
    "hist_torus",
    "hist_bspline",
    "hist_other",
    "hist_line",
    "hist_circle",
    "hist_ellipse",
    "hist_edge_bspline",
    "hist_edge_other",
    "curvature_mean",
    "curvature_std",
    "curvature_min",
    "curvature_max",
    "curvature_median",
    "spectral_connectivity",
    "boundary_loop_count",
    "boundary_dihedral_mean",
    "boundary_dihedral_std",
    "concave_internal_fraction",
    "log_total_area",
];

/// Fixed-length descriptor z_C of a face set.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFeatureVector(pub Vec<f64>);

impl InstanceFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn n_faces(&self) -> usize {
        self.0[IF_N_FACES] as usize
    }
    pub fn n_internal_edges(&self) -> usize {
        self.0[IF_N_INTERNAL] as usize
    }
    pub fn n_boundary_edges(&self) -> usize {
        self.0[IF_N_BOUNDARY] as usize
    }
    pub fn log_characteristic_length(&self) -> f64 {
        self.0[IF_L_LOG]
    }
    pub fn surface_histogram(&self) -> &[f64] {
        &self.0[IF_SURFACE_HIST..IF_EDGE_HIST]
    }
    pub fn edge_histogram(&self) -> &[f64] {
        &self.0[IF_EDGE_HIST..IF_CURVATURE]
    }
    /// mean, std, min, max, median
    pub fn curvature_stats(&self) -> &[f64] {
        &self.0[IF_CURVATURE..IF_SPECTRAL]
    }
    pub fn spectral_connectivity(&self) -> f64 {
        self.0[IF_SPECTRAL]
    }
    pub fn boundary_loop_count(&self) -> usize {
        self.0[IF_LOOPS] as usize
    }
    pub fn boundary_dihedral(&self) -> (f64, f64) {
        (self.0[IF_BOUNDARY_DIHEDRAL], self.0[IF_BOUNDARY_DIHEDRAL + 1])
    }
    pub fn concave_internal_fraction(&self) -> f64 {
        self.0[IF_CONCAVE_FRACTION]
    }
    pub fn log_total_area(&self) -> f64 {
        self.0[IF_LOG_AREA]
    }
}

fn sorted_unique(faces: &[u32]) -> Vec<u32> {
    let mut v = faces.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// z_C for the face set `faces` (any order, duplicates ignored).
pub fn instance_features(g: &PartGraph, faces: &[u32]) -> InstanceFeatureVector {
    PartContext::new(g).instance_features(&sorted_unique(faces))
}

/// λ₂ of the combinatorial Laplacian of the induced simple subgraph `G[C]`;
/// zero when `|C| ≤ 1` or `G[C]` is disconnected.
pub fn spectral_connectivity(g: &PartGraph, faces: &[u32]) -> f64 {
    let faces = sorted_unique(faces);
    let mut pairs = Vec::new();
    for (a, &f) in faces.iter().enumerate() {
        for &k in g.incident_edges(f as usize) {
            let other = g.edges()[k as usize].other(f);
            if let Ok(b) = faces.binary_search(&other) {
                if a < b {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    algebraic_connectivity(faces.len(), &pairs)
}

/// Number of connected groups of boundary edges of `C`, two boundary edges
/// being linked when they share an incident face.
pub fn boundary_loop_count(g: &PartGraph, faces: &[u32]) -> usize {
    let faces = sorted_unique(faces);
    let mut boundary = Vec::new();
    for &f in &faces {
        for &k in g.incident_edges(f as usize) {
            if faces.binary_search(&g.edges()[k as usize].other(f)).is_err() {
                boundary.push(k);
            }
        }
    }
    boundary.sort_unstable();
    boundary_loops_of(g, &boundary)
}

fn boundary_loops_of(g: &PartGraph, boundary: &[u32]) -> usize {
    if boundary.is_empty() {
        return 0;
    }
    let mut by_face: Vec<(u32, u32)> = Vec::with_capacity(2 * boundary.len());
    for (b, &k) in boundary.iter().enumerate() {
        let e = &g.edges()[k as usize];
        by_face.push((e.face_s, b as u32));
        by_face.push((e.face_t, b as u32));
    }
    by_face.sort_unstable();
    let mut dsu = DisjointSets::new(boundary.len());
    let mut components = boundary.len();
    for w in by_face.windows(2) {
        if w[0].0 == w[1].0 && dsu.union(w[0].1 as usize, w[1].1 as usize) {
            components -= 1;
        }
    }
    components
}

fn is_connected(n: usize, adj: &[Vec<usize>]) -> bool {
    let mut seen = alloc::vec![false; n];
    let mut stack = alloc::vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// λ₂ of the simple graph on `n` nodes with undirected `pairs` (a < b, unique).
pub fn algebraic_connectivity(n: usize, pairs: &[(usize, usize)]) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let mut adj = alloc::vec![Vec::new(); n];
    for &(a, b) in pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    if !is_connected(n, &adj) {
        return 0.0;
    }
    let lambda = if n <= DENSE_EIGEN_LIMIT {
        let mut lap = alloc::vec![0.0; n * n];
        for (i, nbrs) in adj.iter().enumerate() {
            lap[i * n + i] = nbrs.len() as f64;
            for &j in nbrs {
                lap[i * n + j] = -1.0;
            }
        }
        let mut eig = jacobi_eigenvalues(n, &mut lap);
        eig.sort_by(f64::total_cmp);
        eig[1]
    } else {
        inverse_iteration_lambda2(&adj)
    };
    lambda.max(0.0)
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
/// `a` is overwritten.
pub fn jacobi_eigenvalues(n: usize, a: &mut [f64]) -> Vec<f64> {
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j] * a[i * n + j];
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn laplacian_apply(adj: &[Vec<usize>], x: &[f64], out: &mut [f64]) {
    for (i, nbrs) in adj.iter().enumerate() {
        let mut v = nbrs.len() as f64 * x[i];
        for &j in nbrs {
            v -= x[j];
        }
        out[i] = v;
    }
}

fn project_out_constant(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `L y = b` for `b ⊥ 1` by conjugate gradients, returning `y ⊥ 1`.
fn laplacian_solve(adj: &[Vec<usize>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = alloc::vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = alloc::vec![0.0; n];
    let b_norm = libm::sqrt(vdot(b, b));
    let mut rr = vdot(&r, &r);
    for _ in 0..4 * n {
        if libm::sqrt(rr) <= 1e-13 * b_norm {
            break;
        }
        laplacian_apply(adj, &p, &mut ap);
        let alpha = rr / vdot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = vdot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    project_out_constant(&mut x);
    x
}

/// Smallest non-zero Laplacian eigenvalue of a connected graph by inverse
/// iteration restricted to the complement of the constant vector.
fn inverse_iteration_lambda2(adj: &[Vec<usize>]) -> f64 {
    const TOLERANCE: f64 = 1e-8;
    let n = adj.len();
    let mut x: Vec<f64> = (0..n).map(|i| i as f64 + 0.5 * libm::sin(i as f64)).collect();
    project_out_constant(&mut x);
    let scale = 1.0 / libm::sqrt(vdot(&x, &x));
    x.iter_mut().for_each(|v| *v *= scale);
    let mut lx = alloc::vec![0.0; n];
    let mut estimate = f64::INFINITY;
    for _ in 0..10 * n {
        let mut y = laplacian_solve(adj, &x);
        let len = libm::sqrt(vdot(&y, &y));
        if len == 0.0 {
            break;
        }
        y.iter_mut().for_each(|v| *v /= len);
        laplacian_apply(adj, &y, &mut lx);
        let rayleigh = vdot(&y, &lx);
        x = y;
        let done = libm::fabs(rayleigh - estimate) <= TOLERANCE * rayleigh.max(1.0);
        estimate = rayleigh;
        if done {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeRecord, FaceRecord, Schema};
    use alloc::vec;

    fn face(area: f64, st: SurfaceType) -> FaceRecord {
        FaceRecord {
            attrs: vec![],
            surface_type: st,
            area,
            truth: None,
            grid: None,
        }
    }

    fn edge(s: u32, t: u32, ty: EdgeType) -> EdgeRecord {
        EdgeRecord {
            face_s: s,
            face_t: t,
            attrs: vec![],
            edge_type: ty,
            length: 1.0,
            samples: None,
        }
    }

    fn graph(faces: Vec<FaceRecord>, edges: &[(u32, u32)]) -> PartGraph {
        let edges = edges.iter().map(|&(s, t)| edge(s, t, EdgeType::Line)).collect();
        build_graph("p", Schema::new(0, 0, 1), faces, edges).unwrap()
    }

    fn flat_grid(z: f64, x0: f64, normal: [f64; 3]) -> FaceGrid {
        let mut samples = vec![];
        for u in 0..4 {
            for v in 0..4 {
                samples.extend_from_slice(&[
                    x0 + u as f64,
                    v as f64,
                    z,
                    normal[0],
                    normal[1],
                    normal[2],
                    1.0,
                ]);
            }
        }
        FaceGrid {
            u_res: 4,
            v_res: 4,
            samples,
        }
    }

    #[test]
    fn area_ratio_quarter() {
        let g = graph(vec![face(2.0, SurfaceType::Plane), face(8.0, SurfaceType::Plane)], &[(0, 1)]);
        let (m, _) = enrich_edges(&g);
        assert_eq!(m.row(0)[2], 0.25);
    }

    #[test]
    fn twin_faces_have_unit_ratios() {
        let g = graph(vec![face(3.0, SurfaceType::Plane), face(3.0, SurfaceType::Plane)], &[(0, 1)]);
        let (m, _) = enrich_edges(&g);
        assert_eq!(m.row(0)[2], 1.0);
        assert_eq!(m.row(0)[3], 1.0);
    }

    #[test]
    fn zero_area_is_guarded_and_flagged() {
        let g = graph(vec![face(0.0, SurfaceType::Plane), face(4.0, SurfaceType::Plane)], &[(0, 1)]);
        let (m, warnings) = enrich_edges(&g);
        let r = m.row(0)[2];
        assert!(r > 0.0 && r <= 1.0 && r.is_finite());
        assert_eq!(warnings, vec![AttrWarning::ZeroArea { face: 0 }]);
    }

    #[test]
    fn coplanar_grids_give_straight_angle() {
        let mut f0 = face(9.0, SurfaceType::Plane);
        let mut f1 = face(9.0, SurfaceType::Plane);
        f0.grid = Some(flat_grid(0.0, 0.0, [0.0, 0.0, 1.0]));
        f1.grid = Some(flat_grid(0.0, 3.0, [0.0, 0.0, 1.0]));
        let g = graph(vec![f0, f1], &[(0, 1)]);
        let (m, _) = enrich_edges(&g);
        // acos(n_i . n_j) = acos(1) = 0, so the interior angle is π
        let by_hand = PI - libm::acos(1.0);
        assert_eq!(m.row(0)[0], by_hand);
        assert_eq!(m.row(0)[1], 0.0);
    }

    #[test]
    fn perpendicular_grids_concavity_is_symmetric() {
        // floor at z=0 facing up, wall at x=0 facing +x rising above the floor: concave corner
        let floor = flat_grid(0.0, 0.5, [0.0, 0.0, 1.0]);
        let mut wall_samples = vec![];
        for u in 0..4 {
            for v in 0..4 {
                wall_samples.extend_from_slice(&[0.0, u as f64, 0.5 + v as f64, 1.0, 0.0, 0.0, 1.0]);
            }
        }
        let wall = FaceGrid {
            u_res: 4,
            v_res: 4,
            samples: wall_samples,
        };
        for (a, b) in [(floor.clone(), wall.clone()), (wall, floor)] {
            let mut f0 = face(9.0, SurfaceType::Plane);
            let mut f1 = face(9.0, SurfaceType::Plane);
            f0.grid = Some(a);
            f1.grid = Some(b);
            let g = graph(vec![f0, f1], &[(0, 1)]);
            let (m, _) = enrich_edges(&g);
            assert!((m.row(0)[0] - PI / 2.0).abs() < 1e-12);
            assert_eq!(m.row(0)[1], 1.0);
        }
    }

    #[test]
    fn grid_stats() {
        let grid = flat_grid(2.0, 0.0, [0.0, 0.0, 1.0]);
        let s = grid_derived_face_stats(&grid).unwrap();
        assert_eq!(s.mean_normal, [0.0, 0.0, 1.0]);
        assert_eq!(s.valid_fraction, 1.0);
        assert_eq!(s.centroid, [1.5, 1.5, 2.0]);

        let mut half = grid.clone();
        for i in 0..8 {
            half.samples[i * GRID_CHANNELS_LOCAL + 6] = 0.0;
        }
        let s = grid_derived_face_stats(&half).unwrap();
        // rows u = 0, 1 masked: remaining u in {2, 3}
        assert_eq!(s.centroid, [2.5, 1.5, 2.0]);
        assert_eq!(s.valid_fraction, 0.5);

        let mut anti = grid.clone();
        for i in 0..16 {
            if i % 2 == 1 {
                anti.samples[i * GRID_CHANNELS_LOCAL + 5] = -1.0;
            }
        }
        let s = grid_derived_face_stats(&anti).unwrap();
        assert!(s.degenerate_normal);
        assert_eq!(s.mean_normal, [0.0, 0.0, 0.0]);

        let mut empty = grid;
        for i in 0..16 {
            empty.samples[i * GRID_CHANNELS_LOCAL + 6] = 0.0;
        }
        assert_eq!(grid_derived_face_stats(&empty), Err(AttributeError::EmptyGrid));
    }

    const GRID_CHANNELS_LOCAL: usize = crate::graph::GRID_CHANNELS;

    #[test]
    fn log_characteristic_length() {
        let g = graph(vec![face(4.0, SurfaceType::Plane)], &[]);
        let z = instance_features(&g, &[0]);
        assert!((z.log_characteristic_length() - libm::log(2.0 + 1e-9)).abs() < 1e-15);
        assert!((z.log_characteristic_length() - 0.6931472).abs() < 1e-7);
    }

    #[test]
    fn singleton_instance() {
        let g = graph(
            vec![face(1.0, SurfaceType::Cylinder), face(1.0, SurfaceType::Plane)],
            &[(0, 1)],
        );
        let z = instance_features(&g, &[0]);
        assert_eq!(z.n_faces(), 1);
        assert_eq!(z.n_internal_edges(), 0);
        assert_eq!(z.n_boundary_edges(), 1);
        assert_eq!(z.spectral_connectivity(), 0.0);
        assert!(z.edge_histogram().iter().all(|&v| v == 0.0));
        assert_eq!(z.surface_histogram()[SurfaceType::Cylinder.index()], 1.0);
    }

    #[test]
    fn whole_part_has_no_boundary() {
        let g = graph(
            (0..4).map(|_| face(1.0, SurfaceType::Plane)).collect(),
            &[(0, 1), (1, 2), (2, 3), (3, 0)],
        );
        let z = instance_features(&g, &[0, 1, 2, 3]);
        assert_eq!(z.n_boundary_edges(), 0);
        assert_eq!(z.boundary_loop_count(), 0);
        assert_eq!(z.n_internal_edges(), 4);
        let total: f64 = z.edge_histogram().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_examples() {
        let path = graph((0..3).map(|_| face(1.0, SurfaceType::Plane)).collect(), &[(0, 1), (1, 2)]);
        assert!((spectral_connectivity(&path, &[0, 1, 2]) - 1.0).abs() < 1e-12);
        let k4 = graph(
            (0..4).map(|_| face(1.0, SurfaceType::Plane)).collect(),
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        );
        assert!((spectral_connectivity(&k4, &[0, 1, 2, 3]) - 4.0).abs() < 1e-12);
        let pair = graph((0..2).map(|_| face(1.0, SurfaceType::Plane)).collect(), &[]);
        assert_eq!(spectral_connectivity(&pair, &[0, 1]), 0.0);
    }

    #[test]
    fn boundary_loops() {
        // stock faces 0 and 1 (adjacent); hole A = {2,3} on stock 0, hole B = {4,5} on stock 1
        let faces = (0..6).map(|_| face(1.0, SurfaceType::Plane)).collect();
        let g = graph(faces, &[(0, 1), (2, 3), (2, 0), (3, 0), (4, 5), (4, 1), (5, 1)]);
        // oracle: boundary edges of {2,3} are (2,0),(3,0), both touch face 0 -> one group
        assert_eq!(boundary_loop_count(&g, &[2, 3]), 1);
        // {2,3,4,5}: rings on faces 0 and 1 never share a face -> two groups
        assert_eq!(boundary_loop_count(&g, &[2, 3, 4, 5]), 2);
        assert_eq!(boundary_loop_count(&g, &[0, 1, 2, 3, 4, 5]), 0);
    }
}
