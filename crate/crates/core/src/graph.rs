//! Face-adjacency graph data model.
//!
//! A [`PartGraph`] holds one node per B-Rep face and one [`EdgeRecord`] per
//! manifold B-Rep edge. Several records may join the same face pair; the
//! boolean adjacency collapses them while the per-edge classifier still sees
//! each record.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dsu::DisjointSets;

/// Channels per face-grid sample: position (3), unit normal (3), mask (1).
pub const GRID_CHANNELS: usize = 7;
/// Channels per edge sample: point, tangent, normal, binormal (3 each),
/// trim mask, radius, torsion.
pub const EDGE_SAMPLE_CHANNELS: usize = 15;

const NORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurfaceType {
    Plane,
    Cylinder,
    Cone,
    Sphere,
    Torus,
    Bspline,
    Other,
}

impl SurfaceType {
    pub const ALL: [SurfaceType; 7] = [
        SurfaceType::Plane,
        SurfaceType::Cylinder,
        SurfaceType::Cone,
        SurfaceType::Sphere,
        SurfaceType::Torus,
        SurfaceType::Bspline,
        SurfaceType::Other,
    ];
    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceType::Plane => "plane",
            SurfaceType::Cylinder => "cylinder",
            SurfaceType::Cone => "cone",
            SurfaceType::Sphere => "sphere",
            SurfaceType::Torus => "torus",
            SurfaceType::Bspline => "bspline",
            SurfaceType::Other => "other",
        }
    }
}

impl FromStr for SurfaceType {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SurfaceType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| UnknownCategory(String::from(s)))
    }
}

impl fmt::Display for SurfaceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    Line,
    Circle,
    Ellipse,
    Bspline,
    Other,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::Line,
        EdgeType::Circle,
        EdgeType::Ellipse,
        EdgeType::Bspline,
        EdgeType::Other,
    ];
    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Line => "line",
            EdgeType::Circle => "circle",
            EdgeType::Ellipse => "ellipse",
            EdgeType::Bspline => "bspline",
            EdgeType::Other => "other",
        }
    }
}

impl FromStr for EdgeType {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| UnknownCategory(String::from(s)))
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown category name `{0}`")]
pub struct UnknownCategory(pub String);

/// Indices into the raw edge attribute vector for quantities that would
/// otherwise be derived from sample tensors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttrSlots {
    pub dihedral: Option<usize>,
    pub concavity: Option<usize>,
    pub curvature: Option<usize>,
    pub centroid_distance: Option<usize>,
}

impl AttrSlots {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, usize)> + '_ {
        [
            ("dihedral", self.dihedral),
            ("concavity", self.concavity),
            ("curvature", self.curvature),
            ("centroid_distance", self.centroid_distance),
        ]
        .into_iter()
        .filter_map(|(name, slot)| slot.map(|s| (name, s)))
    }

    pub fn set(&mut self, name: &str, index: usize) -> Result<(), UnknownCategory> {
        match name {
            "dihedral" => self.dihedral = Some(index),
            "concavity" => self.concavity = Some(index),
            "curvature" => self.curvature = Some(index),
            "centroid_distance" => self.centroid_distance = Some(index),
            other => return Err(UnknownCategory(String::from(other))),
        }
        Ok(())
    }
}

/// Dataset-wide dimensions shared by every part of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub d_face: usize,
    pub d_edge: usize,
    pub n_classes: usize,
    pub slots: AttrSlots,
}

impl Schema {
    pub fn new(d_face: usize, d_edge: usize, n_classes: usize) -> Self {
        Self {
            d_face,
            d_edge,
            n_classes,
            slots: AttrSlots::default(),
        }
    }

    pub fn with_slots(mut self, slots: AttrSlots) -> Self {
        self.slots = slots;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundTruth {
    pub instance_id: u32,
    pub class: u32,
}

/// U×V samples of position, unit normal and validity mask, row-major in
/// `(u, v, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGrid {
    pub u_res: usize,
    pub v_res: usize,
    pub samples: Vec<f64>,
}

impl FaceGrid {
    pub fn len(&self) -> usize {
        self.u_res * self.v_res
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, idx: usize) -> &[f64] {
        &self.samples[idx * GRID_CHANNELS..(idx + 1) * GRID_CHANNELS]
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let s = self.sample(idx);
        [s[0], s[1], s[2]]
    }

    pub fn normal(&self, idx: usize) -> [f64; 3] {
        let s = self.sample(idx);
        [s[3], s[4], s[5]]
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.sample(idx)[6] == 1.0
    }

    fn check(&self) -> Result<(), &'static str> {
        if self.u_res < 2 || self.v_res < 2 {
            return Err("grid resolution below 2");
        }
        if self.samples.len() != self.len() * GRID_CHANNELS {
            return Err("grid data length is not u*v*7");
        }
        for i in 0..self.len() {
            let mask = self.sample(i)[6];
            if mask != 0.0 && mask != 1.0 {
                return Err("grid mask not in {0,1}");
            }
            if mask == 1.0 {
                let [x, y, z] = self.normal(i);
                let norm = libm::sqrt(x * x + y * y + z * z);
                if !(libm::fabs(norm - 1.0) <= NORMAL_TOLERANCE) {
                    return Err("valid grid normal is not unit length");
                }
            }
        }
        Ok(())
    }
}

/// M samples along an edge, row-major in `(sample, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSamples {
    pub m_res: usize,
    pub samples: Vec<f64>,
}

impl EdgeSamples {
    pub fn sample(&self, idx: usize) -> &[f64] {
        &self.samples[idx * EDGE_SAMPLE_CHANNELS..(idx + 1) * EDGE_SAMPLE_CHANNELS]
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let s = self.sample(idx);
        [s[0], s[1], s[2]]
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.sample(idx)[12] == 1.0
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.sample(idx)[13]
    }

    fn check(&self) -> Result<(), &'static str> {
        if self.m_res < 2 {
            return Err("edge sample count below 2");
        }
        if self.samples.len() != self.m_res * EDGE_SAMPLE_CHANNELS {
            return Err("edge sample data length is not m*15");
        }
        for i in 0..self.m_res {
            let mask = self.sample(i)[12];
            if mask != 0.0 && mask != 1.0 {
                return Err("edge trim mask not in {0,1}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceRecord {
    pub attrs: Vec<f64>,
    pub surface_type: SurfaceType,
    pub area: f64,
    pub truth: Option<GroundTruth>,
    pub grid: Option<FaceGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub face_s: u32,
    pub face_t: u32,
    pub attrs: Vec<f64>,
    pub edge_type: EdgeType,
    pub length: f64,
    pub samples: Option<EdgeSamples>,
}

impl EdgeRecord {
    /// The incident face that is not `face`.
    pub fn other(&self, face: u32) -> u32 {
        if self.face_s == face {
            self.face_t
        } else {
            self.face_s
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("edge {edge} references face {face} but the part has {n_faces} faces")]
    DanglingFace { edge: usize, face: u32, n_faces: usize },
    #[error("edge {edge} joins face {face} to itself (non-manifold)")]
    ManifoldViolation { edge: usize, face: u32 },
    #[error("face {face} has {found} attributes, schema declares d_F = {expected}")]
    FaceAttrLength { face: usize, expected: usize, found: usize },
    #[error("edge {edge} has {found} attributes, schema declares d_E = {expected}")]
    EdgeAttrLength { edge: usize, expected: usize, found: usize },
    #[error("attribute slot `{name}` = {index} is outside d_E = {d_edge}")]
    SlotOutOfRange { name: &'static str, index: usize, d_edge: usize },
    #[error("face {face}: {reason}")]
    InvalidGrid { face: usize, reason: &'static str },
    #[error("edge {edge}: {reason}")]
    InvalidSamples { edge: usize, reason: &'static str },
    #[error("face {face} has invalid area {area}")]
    InvalidArea { face: usize, area: f64 },
    #[error("edge {edge} has invalid length {length}")]
    InvalidLength { edge: usize, length: f64 },
    #[error("face {face} class {class} is outside [0, {n_classes})")]
    ClassOutOfRange { face: usize, class: u32, n_classes: usize },
    #[error("faces {first} and {second} disagree on ground-truth presence")]
    MixedTruth { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelError {
    #[error("face {face} carries no ground-truth instance")]
    MissingTruth { face: usize },
}

/// One part as an immutable, validated face-adjacency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGraph {
    part_id: String,
    schema: Schema,
    faces: Vec<FaceRecord>,
    edges: Vec<EdgeRecord>,
    // CSR: face -> incident edge indices, ascending
    inc_offsets: Vec<u32>,
    inc_edges: Vec<u32>,
    degree: Vec<u32>,
}

/// Validates the records and builds the incidence structure.
pub fn build_graph(
    part_id: impl Into<String>,
    schema: Schema,
    faces: Vec<FaceRecord>,
    edges: Vec<EdgeRecord>,
) -> Result<PartGraph, GraphError> {
    for (name, index) in schema.slots.iter() {
        if index >= schema.d_edge {
            return Err(GraphError::SlotOutOfRange {
                name,
                index,
                d_edge: schema.d_edge,
            });
        }
    }
    let n = faces.len();
    for (i, f) in faces.iter().enumerate() {
        if f.attrs.len() != schema.d_face {
            return Err(GraphError::FaceAttrLength {
                face: i,
                expected: schema.d_face,
                found: f.attrs.len(),
            });
        }
        if !(f.area >= 0.0) || !f.area.is_finite() {
            return Err(GraphError::InvalidArea { face: i, area: f.area });
        }
        if let Some(t) = f.truth {
            if t.class as usize >= schema.n_classes {
                return Err(GraphError::ClassOutOfRange {
                    face: i,
                    class: t.class,
                    n_classes: schema.n_classes,
                });
            }
        }
        if let Some(grid) = &f.grid {
            grid.check()
                .map_err(|reason| GraphError::InvalidGrid { face: i, reason })?;
        }
    }
    if let Some(first) = faces.first() {
        let has = first.truth.is_some();
        if let Some(j) = faces.iter().position(|f| f.truth.is_some() != has) {
            return Err(GraphError::MixedTruth { first: 0, second: j });
        }
    }
    for (k, e) in edges.iter().enumerate() {
        for face in [e.face_s, e.face_t] {
            if face as usize >= n {
                return Err(GraphError::DanglingFace {
                    edge: k,
                    face,
                    n_faces: n,
                });
            }
        }
        if e.face_s == e.face_t {
            return Err(GraphError::ManifoldViolation {
                edge: k,
                face: e.face_s,
            });
        }
        if e.attrs.len() != schema.d_edge {
            return Err(GraphError::EdgeAttrLength {
                edge: k,
                expected: schema.d_edge,
                found: e.attrs.len(),
            });
        }
        if !(e.length >= 0.0) || !e.length.is_finite() {
            return Err(GraphError::InvalidLength {
                edge: k,
                length: e.length,
            });
        }
        if let Some(s) = &e.samples {
            s.check()
                .map_err(|reason| GraphError::InvalidSamples { edge: k, reason })?;
        }
    }

    let mut counts = alloc::vec![0u32; n + 1];
    for e in &edges {
        counts[e.face_s as usize + 1] += 1;
        counts[e.face_t as usize + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let inc_offsets = counts;
    let mut cursor: Vec<u32> = inc_offsets[..n].to_vec();
    let mut inc_edges = alloc::vec![0u32; 2 * edges.len()];
    for (k, e) in edges.iter().enumerate() {
        for face in [e.face_s, e.face_t] {
            inc_edges[cursor[face as usize] as usize] = k as u32;
            cursor[face as usize] += 1;
        }
    }

    // distinct-neighbour degree, collapsing multi-edges
    let mut stamp = alloc::vec![u32::MAX; n];
    let mut degree = alloc::vec![0u32; n];
    for i in 0..n {
        let lo = inc_offsets[i] as usize;
        let hi = inc_offsets[i + 1] as usize;
        for &k in &inc_edges[lo..hi] {
            let j = edges[k as usize].other(i as u32) as usize;
            if stamp[j] != i as u32 {
                stamp[j] = i as u32;
                degree[i] += 1;
            }
        }
    }

    Ok(PartGraph {
        part_id: part_id.into(),
        schema,
        faces,
        edges,
        inc_offsets,
        inc_edges,
        degree,
    })
}

impl PartGraph {
    pub fn part_id(&self) -> &str {
        &self.part_id
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn faces(&self) -> &[FaceRecord] {
        &self.faces
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge indices incident to `face`, ascending.
    pub fn incident_edges(&self, face: usize) -> &[u32] {
        &self.inc_edges[self.inc_offsets[face] as usize..self.inc_offsets[face + 1] as usize]
    }

    /// Number of distinct neighbouring faces.
    pub fn degree(&self, face: usize) -> usize {
        self.degree[face] as usize
    }

    pub fn has_truth(&self) -> bool {
        !self.faces.is_empty() && self.faces.iter().all(|f| f.truth.is_some())
    }

    pub fn into_parts(self) -> (String, Schema, Vec<FaceRecord>, Vec<EdgeRecord>) {
        (self.part_id, self.schema, self.faces, self.edges)
    }

    /// Copy of this graph with a different identifier.
    pub fn with_part_id(mut self, part_id: impl Into<String>) -> Self {
        self.part_id = part_id.into();
        self
    }

    /// Copy with all ground truth removed.
    pub fn without_truth(&self) -> Self {
        let mut g = self.clone();
        for f in &mut g.faces {
            f.truth = None;
        }
        g
    }
}

/// Boolean n×n adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.cells[i * self.n..(i + 1) * self.n]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&a| a).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i))
    }
}

pub fn adjacency_matrix(g: &PartGraph) -> AdjacencyMatrix {
    let n = g.n_faces();
    let mut cells = alloc::vec![false; n * n];
    for e in g.edges() {
        let (s, t) = (e.face_s as usize, e.face_t as usize);
        cells[s * n + t] = true;
        cells[t * n + s] = true;
    }
    AdjacencyMatrix { n, cells }
}

fn truth_of(g: &PartGraph, face: usize) -> Result<GroundTruth, LabelError> {
    g.faces[face].truth.ok_or(LabelError::MissingTruth { face })
}

/// y_k = 1 iff both incident faces share a ground-truth instance id.
pub fn binary_edge_labels(g: &PartGraph) -> Result<Vec<u8>, LabelError> {
    if let Some(face) = g.faces.iter().position(|f| f.truth.is_none()) {
        return Err(LabelError::MissingTruth { face });
    }
    g.edges
        .iter()
        .map(|e| {
            let a = truth_of(g, e.face_s as usize)?;
            let b = truth_of(g, e.face_t as usize)?;
            Ok(u8::from(a.instance_id == b.instance_id))
        })
        .collect()
}

/// A connected ground-truth instance. Instances whose faces are disconnected
/// in the graph are split into one `TruthInstance` per component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthInstance {
    pub instance_id: u32,
    pub class: u32,
    /// Sorted ascending.
    pub faces: Vec<u32>,
    /// Component index within the original instance (0 when connected).
    pub fragment: u32,
}

/// Ground-truth instances plus a record of which ones had to be split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceReport {
    /// Canonical order: by smallest face index.
    pub instances: Vec<TruthInstance>,
    /// Instance ids whose face set is disconnected, ascending.
    pub disconnected: Vec<u32>,
}

impl InstanceReport {
    pub fn is_clean(&self) -> bool {
        self.disconnected.is_empty()
    }
}

/// Splits ground truth into connected instances using only edges whose
/// endpoints share an instance id.
pub fn truth_instances(g: &PartGraph) -> Result<InstanceReport, LabelError> {
    let labels = binary_edge_labels(g)?;
    let mut dsu = DisjointSets::new(g.n_faces());
    for (e, &y) in g.edges.iter().zip(&labels) {
        if y == 1 {
            dsu.union(e.face_s as usize, e.face_t as usize);
        }
    }
    let groups = dsu.groups();
    let mut fragments: alloc::collections::BTreeMap<u32, u32> = Default::default();
    let mut instances = Vec::with_capacity(groups.len());
    for faces in groups {
        let t = truth_of(g, faces[0] as usize)?;
        let frag = fragments.entry(t.instance_id).or_insert(0);
        instances.push(TruthInstance {
            instance_id: t.instance_id,
            class: t.class,
            faces,
            fragment: *frag,
        });
        *frag += 1;
    }
    let disconnected = fragments
        .into_iter()
        .filter(|&(_, count)| count > 1)
        .map(|(id, _)| id)
        .collect();
    Ok(InstanceReport {
        instances,
        disconnected,
    })
}
