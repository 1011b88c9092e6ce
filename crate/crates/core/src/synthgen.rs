//! Deterministic generator of labeled synthetic part graphs.
//!
//! Each part is a prism-shaped stock (top, bottom and a ring of 4 to 12
//! side faces, instance 0) with machining-feature motifs attached to
//! randomly chosen stock faces. Attributes are drawn from fixed
//! class-conditional distributions rather than computed from solid geometry.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, part index)`, with one
//! stream for topology and one for attribute values, so every part can be
//! regenerated on its own. Topology uses integer draws only. Real-valued
//! draws use `libm`, so output does not depend on the platform math library.
//!
//! Sizes are snapped to a preferred-number series and dihedral angles to
//! 0.01 rad. This mirrors drawings dimensioned at fixed precision and keeps
//! the number of distinct values per attribute small.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{
    build_graph, AttrSlots, EdgeRecord, EdgeType, FaceGrid, FaceRecord, GraphError, GroundTruth, PartGraph,
    Schema, SurfaceType, GRID_CHANNELS,
};

/// Class vocabulary in default order; index 0 is the stock.
pub const DEFAULT_CLASSES: [&str; 7] = [
    "stock",
    "through_hole",
    "blind_hole",
    "rect_pocket",
    "slot",
    "chamfer",
    "boss",
];

/// Face attributes: surface curvature.
pub const GEN_D_FACE: usize = 1;
/// Edge attributes: dihedral angle, concavity flag, edge curvature.
pub const GEN_D_EDGE: usize = 3;

const STREAM_TOPOLOGY: u64 = 0;
const STREAM_ATTRIBUTES: u64 = 1;

/// Dihedral spread at full noise.
const DIHEDRAL_SPREAD: f64 = 0.8;
/// Log-area spread that does not depend on noise.
const AREA_SIGMA: f64 = 0.2;
/// Steps per decade of the preferred-number series.
const SERIES_STEPS: f64 = 40.0;
const GRID_RES: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown feature class `{0}`")]
    UnknownClass(String),
    #[error("generated part is invalid: {0}")]
    Graph(#[from] GraphError),
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_parts: usize,
    /// Class names; the first must be `stock`, the rest name motifs.
    pub classes: Vec<String>,
    /// Inclusive range of motifs per part.
    pub features_per_part: (usize, usize),
    /// Attribute noise η in `[0, 1]`.
    pub noise: f64,
    /// Ambiguity ρ in `[0, 1]`: the chance that an edge takes its angle and
    /// concavity from the opposite (boundary versus interior) distribution.
    pub ambiguity: f64,
    /// Emit simple analytic sample grids for every face.
    pub with_grids: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_parts: 1000,
            classes: DEFAULT_CLASSES.iter().map(|c| String::from(*c)).collect(),
            features_per_part: (2, 8),
            noise: 0.15,
            ambiguity: 0.1,
            with_grids: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<Vec<Motif>, GenError> {
        if self.classes.first().map(String::as_str) != Some("stock") {
            return Err(GenError::InvalidConfig("class 0 must be `stock`"));
        }
        let (lo, hi) = self.features_per_part;
        if lo > hi {
            return Err(GenError::InvalidConfig("features_per_part range is empty"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(GenError::InvalidConfig("noise must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.ambiguity) {
            return Err(GenError::InvalidConfig("ambiguity must be in [0, 1]"));
        }
        let motifs = self.classes[1..]
            .iter()
            .map(|c| Motif::from_name(c).ok_or_else(|| GenError::UnknownClass(c.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        if hi > 0 && motifs.is_empty() {
            return Err(GenError::InvalidConfig("features requested but no feature classes configured"));
        }
        let mut seen = motifs.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != motifs.len() || self.classes[1..].iter().any(|c| c == "stock") {
            return Err(GenError::InvalidConfig("class names must be unique"));
        }
        Ok(motifs)
    }

    pub fn schema(&self) -> Schema {
        let slots = AttrSlots {
            dihedral: Some(0),
            concavity: Some(1),
            curvature: Some(2),
            centroid_distance: None,
        };
        Schema::new(GEN_D_FACE, GEN_D_EDGE, self.classes.len()).with_slots(slots)
    }
}

/// Feature motif templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Motif {
    ThroughHole,
    BlindHole,
    RectPocket,
    Slot,
    Chamfer,
    Boss,
}

impl Motif {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "through_hole" => Motif::ThroughHole,
            "blind_hole" => Motif::BlindHole,
            "rect_pocket" => Motif::RectPocket,
            "slot" => Motif::Slot,
            "chamfer" => Motif::Chamfer,
            "boss" => Motif::Boss,
            _ => return None,
        })
    }
}

/// Class-typical angle and convexity of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeKind {
    boundary: bool,
    dihedral: f64,
    concave: bool,
}

const fn interior(dihedral: f64, concave: bool) -> EdgeKind {
    EdgeKind {
        boundary: false,
        dihedral,
        concave,
    }
}

const fn boundary(dihedral: f64, concave: bool) -> EdgeKind {
    EdgeKind {
        boundary: true,
        dihedral,
        concave,
    }
}

// Interior centres lie in [1.2, 1.85] and boundary centres in [2.15, 2.75],
// so with zero noise and ambiguity the angle alone separates them.
const STOCK_EDGE: EdgeKind = interior(1.57, false);
const HOLE_SEAM: EdgeKind = interior(1.85, false);
const HOLE_FLOOR: EdgeKind = interior(1.30, true);
const POCKET_FLOOR: EdgeKind = interior(1.57, true);
const POCKET_CORNER: EdgeKind = interior(1.45, true);
const SLOT_FLOOR: EdgeKind = interior(1.62, true);
const SLOT_END: EdgeKind = interior(1.75, true);
const BOSS_TOP: EdgeKind = interior(1.20, false);
const BOSS_CORNER: EdgeKind = interior(1.70, false);

const THROUGH_HOLE_RIM: EdgeKind = boundary(2.20, false);
const BLIND_HOLE_RIM: EdgeKind = boundary(2.30, false);
const POCKET_RIM: EdgeKind = boundary(2.45, false);
const SLOT_RIM: EdgeKind = boundary(2.60, false);
const CHAMFER_RIM: EdgeKind = boundary(2.75, false);
const BOSS_FOOT: EdgeKind = boundary(2.15, true);

const INTERIOR_KINDS: [EdgeKind; 9] = [
    STOCK_EDGE,
    HOLE_SEAM,
    HOLE_FLOOR,
    POCKET_FLOOR,
    POCKET_CORNER,
    SLOT_FLOOR,
    SLOT_END,
    BOSS_TOP,
    BOSS_CORNER,
];
const BOUNDARY_KINDS: [EdgeKind; 6] = [
    THROUGH_HOLE_RIM,
    BLIND_HOLE_RIM,
    POCKET_RIM,
    SLOT_RIM,
    CHAMFER_RIM,
    BOSS_FOOT,
];

/// Snaps a positive value to the preferred-number series.
fn preferred(x: f64) -> f64 {
    let step = libm::round(libm::log10(x) * SERIES_STEPS);
    libm::pow(10.0, step / SERIES_STEPS)
}

fn stream_rng(seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw by the Box-Muller transform.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

struct PendingEdge {
    s: u32,
    t: u32,
    kind: EdgeKind,
    edge_type: EdgeType,
    /// Length before noise.
    length: f64,
    radius: Option<f64>,
}

struct PendingFace {
    surface: SurfaceType,
    /// Area before noise.
    area: f64,
    radius: Option<f64>,
    truth: GroundTruth,
}

struct Builder<'a> {
    faces: Vec<PendingFace>,
    edges: Vec<PendingEdge>,
    topo: &'a mut ChaCha8Rng,
    attr: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn face(&mut self, surface: SurfaceType, area: f64, radius: Option<f64>, truth: GroundTruth) -> u32 {
        self.faces.push(PendingFace {
            surface,
            area,
            radius,
            truth,
        });
        (self.faces.len() - 1) as u32
    }

    fn edge(&mut self, s: u32, t: u32, kind: EdgeKind, edge_type: EdgeType, length: f64, radius: Option<f64>) {
        self.edges.push(PendingEdge {
            s,
            t,
            kind,
            edge_type,
            length,
            radius,
        });
    }

    fn line(&mut self, s: u32, t: u32, kind: EdgeKind, length: f64) {
        self.edge(s, t, kind, EdgeType::Line, length, None);
    }

    fn arc(&mut self, s: u32, t: u32, kind: EdgeKind, length: f64, radius: f64) {
        self.edge(s, t, kind, EdgeType::Circle, length, Some(radius));
    }

    fn coin(&mut self) -> bool {
        self.topo.random_range(0..2u32) == 1
    }

    /// Ring of `walls` joined to each other and to `floor`, each wall also
    /// meeting `host`.
    #[allow(clippy::too_many_arguments)]
    fn walled(
        &mut self,
        host: u32,
        truth: GroundTruth,
        size: f64,
        floor: (f64, EdgeKind),
        walls: usize,
        corner: EdgeKind,
        rim: EdgeKind,
    ) -> u32 {
        let f = self.face(SurfaceType::Plane, floor.0 * size * size, None, truth);
        let first = self.faces.len() as u32;
        for _ in 0..walls {
            self.face(SurfaceType::Plane, 1.5 * size * size, None, truth);
        }
        for w in 0..walls as u32 {
            let wall = first + w;
            let next = first + (w + 1) % walls as u32;
            self.line(f, wall, floor.1, 2.0 * size);
            self.line(wall, next, corner, size);
            self.line(host, wall, rim, 2.0 * size);
        }
        f
    }
}

/// Prism stock faces: 0 top, 1 bottom, 2.. the side ring.
struct Stock {
    sides: u32,
}

impl Stock {
    fn n_faces(&self) -> u32 {
        self.sides + 2
    }

    fn opposite(&self, f: u32) -> u32 {
        match f {
            0 => 1,
            1 => 0,
            s => 2 + (s - 2 + self.sides / 2) % self.sides,
        }
    }

    fn neighbour(&self, f: u32, pick: u32) -> u32 {
        match f {
            0 | 1 => 2 + pick % self.sides,
            s => match pick % 4 {
                0 => 0,
                1 => 1,
                2 => 2 + (s - 2 + 1) % self.sides,
                _ => 2 + (s - 2 + self.sides - 1) % self.sides,
            },
        }
    }
}

fn add_motif(b: &mut Builder<'_>, stock: &Stock, motif: Motif, truth: GroundTruth) {
    let host = b.topo.random_range(0..stock.n_faces());
    let size = preferred(libm::exp(libm::log(3.0) + b.attr.random::<f64>() * libm::log(5.0)));
    let radius = preferred(0.5 * size);
    let circumference = 2.0 * PI * radius;
    match motif {
        Motif::ThroughHole => {
            let exit = stock.opposite(host);
            if b.coin() {
                let a = b.face(SurfaceType::Cylinder, 3.0 * size * size, Some(radius), truth);
                let c = b.face(SurfaceType::Cylinder, 3.0 * size * size, Some(radius), truth);
                b.line(a, c, HOLE_SEAM, 2.0 * size);
                b.line(a, c, HOLE_SEAM, 2.0 * size);
                for half in [a, c] {
                    b.arc(host, half, THROUGH_HOLE_RIM, 0.5 * circumference, radius);
                    b.arc(exit, half, THROUGH_HOLE_RIM, 0.5 * circumference, radius);
                }
            } else {
                let a = b.face(SurfaceType::Cylinder, 6.0 * size * size, Some(radius), truth);
                b.arc(host, a, THROUGH_HOLE_RIM, circumference, radius);
                b.arc(exit, a, THROUGH_HOLE_RIM, circumference, radius);
            }
        }
        Motif::BlindHole => {
            let wall = b.face(SurfaceType::Cylinder, 3.0 * size * size, Some(radius), truth);
            let floor_type = if b.coin() { SurfaceType::Plane } else { SurfaceType::Cone };
            let floor = b.face(floor_type, 0.8 * size * size, None, truth);
            b.arc(host, wall, BLIND_HOLE_RIM, circumference, radius);
            b.arc(wall, floor, HOLE_FLOOR, circumference, radius);
        }
        Motif::RectPocket => {
            b.walled(host, truth, size, (4.0, POCKET_FLOOR), 4, POCKET_CORNER, POCKET_RIM);
        }
        Motif::Slot => {
            let floor = b.face(SurfaceType::Plane, 3.0 * size * size, None, truth);
            let w0 = b.face(SurfaceType::Plane, 1.5 * size * size, None, truth);
            let w1 = b.face(SurfaceType::Plane, 1.5 * size * size, None, truth);
            for w in [w0, w1] {
                b.line(floor, w, SLOT_FLOOR, 3.0 * size);
                b.line(host, w, SLOT_RIM, 3.0 * size);
            }
            if b.coin() {
                for _ in 0..2 {
                    let end = b.face(SurfaceType::Cylinder, 0.8 * size * size, Some(radius), truth);
                    b.arc(end, w0, SLOT_END, size, radius);
                    b.arc(end, w1, SLOT_END, size, radius);
                    b.arc(end, floor, SLOT_FLOOR, 0.5 * circumference, radius);
                    b.arc(host, end, SLOT_RIM, 0.5 * circumference, radius);
                }
            } else {
                // runs out through two further stock faces
                let pick = b.topo.random_range(0..4u32);
                for exit in [stock.neighbour(host, pick), stock.neighbour(host, pick + 1)] {
                    for f in [floor, w0, w1] {
                        b.line(exit, f, SLOT_RIM, size);
                    }
                }
            }
        }
        Motif::Chamfer => {
            let other = stock.neighbour(host, b.topo.random_range(0..4u32));
            let c = b.face(SurfaceType::Plane, 1.2 * size * size, None, truth);
            b.line(host, c, CHAMFER_RIM, 4.0 * size);
            b.line(other, c, CHAMFER_RIM, 4.0 * size);
        }
        Motif::Boss => {
            if b.coin() {
                let wall = b.face(SurfaceType::Cylinder, 4.0 * size * size, Some(radius), truth);
                let top = b.face(SurfaceType::Plane, 0.8 * size * size, None, truth);
                b.arc(wall, top, BOSS_TOP, circumference, radius);
                b.arc(host, wall, BOSS_FOOT, circumference, radius);
            } else {
                b.walled(host, truth, size, (3.0, BOSS_TOP), 4, BOSS_CORNER, BOSS_FOOT);
            }
        }
    }
}

fn draw_edge_attrs(rng: &mut ChaCha8Rng, kind: EdgeKind, cfg: &GenConfig) -> (f64, bool) {
    // ambiguity: borrow the angle and convexity of the opposite population
    let kind = if rng.random::<f64>() < cfg.ambiguity {
        let pool: &[EdgeKind] = if kind.boundary {
            &INTERIOR_KINDS
        } else {
            &BOUNDARY_KINDS
        };
        pool[rng.random_range(0..pool.len())]
    } else {
        kind
    };
    let z = normal(rng);
    let dihedral = libm::round((kind.dihedral + cfg.noise * DIHEDRAL_SPREAD * z).clamp(0.0, PI) * 100.0) / 100.0;
    let flip = rng.random::<f64>() < cfg.noise / 5.0;
    (dihedral, kind.concave != flip)
}

fn analytic_grid(surface: SurfaceType, area: f64, radius: Option<f64>, anchor: [f64; 3], axis: usize) -> FaceGrid {
    let mut samples = Vec::with_capacity(GRID_RES * GRID_RES * GRID_CHANNELS);
    let side = libm::sqrt(area);
    for i in 0..GRID_RES {
        for j in 0..GRID_RES {
            let u = i as f64 / (GRID_RES - 1) as f64;
            let v = j as f64 / (GRID_RES - 1) as f64;
            let (p, n) = match (surface, radius) {
                (SurfaceType::Cylinder, Some(r)) => {
                    let theta = PI * u;
                    let (s, c) = (libm::sin(theta), libm::cos(theta));
                    ([r * c, r * s, side * v], [c, s, 0.0])
                }
                _ => ([side * u, side * v, 0.0], [0.0, 0.0, 1.0]),
            };
            // rotate so that the local z axis becomes `axis`
            let rot = |a: [f64; 3]| -> [f64; 3] {
                match axis {
                    0 => [a[2], a[0], a[1]],
                    1 => [a[1], a[2], a[0]],
                    _ => a,
                }
            };
            let (p, n) = (rot(p), rot(n));
            samples.extend_from_slice(&[p[0] + anchor[0], p[1] + anchor[1], p[2] + anchor[2], n[0], n[1], n[2], 1.0]);
        }
    }
    FaceGrid {
        u_res: GRID_RES,
        v_res: GRID_RES,
        samples,
    }
}

/// Builds part `index` of the dataset described by `cfg`.
pub fn generate_part(cfg: &GenConfig, index: u64) -> Result<PartGraph, GenError> {
    let motifs = cfg.validate()?;
    Ok(generate_with(cfg, &motifs, index)?)
}

fn generate_with(cfg: &GenConfig, motifs: &[Motif], index: u64) -> Result<PartGraph, GraphError> {
    let mut topo = stream_rng(cfg.seed, index, STREAM_TOPOLOGY);
    let mut attr = stream_rng(cfg.seed, index, STREAM_ATTRIBUTES);
    let stock = Stock {
        sides: topo.random_range(4..=12u32),
    };
    let (lo, hi) = cfg.features_per_part;
    let n_features = topo.random_range(lo..=hi);

    let mut b = Builder {
        faces: Vec::new(),
        edges: Vec::new(),
        topo: &mut topo,
        attr: &mut attr,
    };
    let stock_truth = GroundTruth {
        instance_id: 0,
        class: 0,
    };
    let stock_size = preferred(libm::exp(libm::log(40.0) + b.attr.random::<f64>() * libm::log(2.5)));
    for _ in 0..stock.n_faces() {
        b.face(SurfaceType::Plane, stock_size * stock_size, None, stock_truth);
    }
    for s in 0..stock.sides {
        let side = 2 + s;
        let next = 2 + (s + 1) % stock.sides;
        b.line(0, side, STOCK_EDGE, stock_size);
        b.line(1, side, STOCK_EDGE, stock_size);
        b.line(side, next, STOCK_EDGE, stock_size);
    }
    for k in 0..n_features {
        let m = b.topo.random_range(0..motifs.len());
        let truth = GroundTruth {
            instance_id: k as u32 + 1,
            class: m as u32 + 1,
        };
        add_motif(&mut b, &stock, motifs[m], truth);
    }

    let Builder { faces, edges, .. } = b;
    let size_sigma = AREA_SIGMA + cfg.noise;
    let mut face_records = Vec::with_capacity(faces.len());
    for (i, f) in faces.iter().enumerate() {
        let area = preferred(f.area * libm::exp(size_sigma * normal(&mut attr)));
        let grid = cfg.with_grids.then(|| {
            let anchor = [(i % 7) as f64 * 50.0, (i % 5) as f64 * 50.0, (i % 3) as f64 * 50.0];
            analytic_grid(f.surface, area, f.radius, anchor, i % 3)
        });
        face_records.push(FaceRecord {
            attrs: alloc::vec![f.radius.map_or(0.0, |r| 1.0 / r)],
            surface_type: f.surface,
            area,
            truth: Some(f.truth),
            grid,
        });
    }
    let mut edge_records = Vec::with_capacity(edges.len());
    for e in &edges {
        let (dihedral, concave) = draw_edge_attrs(&mut attr, e.kind, cfg);
        let length = preferred(e.length * libm::exp(0.5 * size_sigma * normal(&mut attr)));
        let curvature = e.radius.map_or(0.0, |r| 1.0 / r);
        edge_records.push(EdgeRecord {
            face_s: e.s,
            face_t: e.t,
            attrs: alloc::vec![dihedral, if concave { 1.0 } else { 0.0 }, curvature],
            edge_type: e.edge_type,
            length,
            samples: None,
        });
    }
    build_graph(part_id(index), cfg.schema(), face_records, edge_records)
}

pub fn part_id(index: u64) -> String {
    format!("part-{index:06}")
}

/// Every part of the dataset in index order.
pub fn generate_parts(cfg: &GenConfig) -> Result<Vec<PartGraph>, GenError> {
    let motifs = cfg.validate()?;
    (0..cfg.n_parts as u64)
        .map(|i| generate_with(cfg, &motifs, i).map_err(GenError::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

fn index_hash(seed: u64, index: u64) -> u64 {
    let mut h = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// 70/15/15 train/val/test assignment: parts ranked by a seeded hash of
/// their index, the first 70% (rounded) to train and the next 15% to val.
pub fn assign_splits(seed: u64, n_parts: usize) -> Vec<Split> {
    let mut order: Vec<(u64, usize)> = (0..n_parts).map(|i| (index_hash(seed, i as u64), i)).collect();
    order.sort_unstable();
    let n_train = (n_parts * 70 + 50) / 100;
    let n_val = (n_parts * 15 + 50) / 100;
    let mut splits = alloc::vec![Split::Test; n_parts];
    for (rank, &(_, i)) in order.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }
    splits
}

/// Dataset summary written next to the parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub n_parts: usize,
    pub classes: Vec<String>,
    /// Instances per class.
    pub class_counts: Vec<usize>,
    pub n_instances: usize,
    pub n_faces: usize,
    pub n_edges: usize,
    pub n_boundary_edges: usize,
    pub splits: Vec<Split>,
}

/// Lowest and highest acceptable boundary-edge fraction at default settings.
pub const BOUNDARY_FRACTION_RANGE: (f64, f64) = (0.10, 0.60);

impl Manifest {
    pub fn from_parts(cfg: &GenConfig, parts: &[PartGraph]) -> Self {
        let mut class_counts = alloc::vec![0usize; cfg.classes.len()];
        let mut m = Manifest {
            n_parts: parts.len(),
            classes: cfg.classes.clone(),
            class_counts: Vec::new(),
            n_instances: 0,
            n_faces: 0,
            n_edges: 0,
            n_boundary_edges: 0,
            splits: assign_splits(cfg.seed, parts.len()),
        };
        for g in parts {
            let mut seen: Vec<GroundTruth> = g.faces().iter().filter_map(|f| f.truth).collect();
            seen.sort_unstable();
            seen.dedup_by_key(|t| t.instance_id);
            for t in &seen {
                class_counts[t.class as usize] += 1;
            }
            m.n_instances += seen.len();
            m.n_faces += g.n_faces();
            m.n_edges += g.n_edges();
            m.n_boundary_edges += g
                .edges()
                .iter()
                .filter(|e| {
                    let (s, t) = (&g.faces()[e.face_s as usize], &g.faces()[e.face_t as usize]);
                    s.truth.map(|x| x.instance_id) != t.truth.map(|x| x.instance_id)
                })
                .count();
        }
        m.class_counts = class_counts;
        m
    }

    pub fn boundary_fraction(&self) -> f64 {
        if self.n_edges == 0 {
            0.0
        } else {
            self.n_boundary_edges as f64 / self.n_edges as f64
        }
    }

    pub fn split_size(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }
}
