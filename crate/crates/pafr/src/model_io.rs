//! Binary model files.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic            8 bytes  "PAFRMDL1"
//! edge_schema      u32
//! instance_schema  u32
//! d_edge           u64
//! threshold        f64
//! n_classes        u32, then per class: u32 byte length + UTF-8 name
//! boundary model   config block, n_features u64, base_score f64,
//!                  n_trees u32, trees
//! calibrator       n u32, n breakpoints f64, n values f64
//! semantic model   config block, n_features u64, K u32, K base scores f64,
//!                  rounds u32, K * rounds trees (class-major)
//! crc32            u32 over every preceding byte
//! ```
//!
//! A config block is `n_trees u64, max_depth u64, learning_rate f64,
//! lambda_l2 f64, min_child_hessian f64, n_folds u64, seed u64`. A tree is a
//! node count `u32` followed by flat nodes: tag `u8` 0 = leaf with weight
//! `f64`, tag 1 = split with `feature u32, threshold f64, left u32,
//! right u32`.

use std::io::{self, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use pafr_core::learner::{
    CalibratedBinaryClassifier, DecisionTree, GbdtBinaryModel, GbdtMulticlassModel, IsotonicModel,
    LearnError, TrainConfig, TreeNode,
};
use pafr_core::pipeline::PipelineError;
use pafr_core::PipelineModel;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"PAFRMDL1";

/// Upper bound on any stored count, to reject corrupt lengths before
/// allocating.
const MAX_COUNT: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("model file is truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("{0} trailing bytes after the model")]
    TrailingBytes(usize),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

fn write_config<W: Write>(w: &mut W, c: &TrainConfig) -> io::Result<()> {
    w.write_u64::<LE>(c.n_trees as u64)?;
    w.write_u64::<LE>(c.max_depth as u64)?;
    w.write_f64::<LE>(c.learning_rate)?;
    w.write_f64::<LE>(c.lambda_l2)?;
    w.write_f64::<LE>(c.min_child_hessian)?;
    w.write_u64::<LE>(c.n_folds as u64)?;
    w.write_u64::<LE>(c.seed)
}

fn write_tree<W: Write>(w: &mut W, t: &DecisionTree) -> io::Result<()> {
    w.write_u32::<LE>(t.nodes().len() as u32)?;
    for node in t.nodes() {
        match *node {
            TreeNode::Leaf { weight } => {
                w.write_u8(0)?;
                w.write_f64::<LE>(weight)?;
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                w.write_u8(1)?;
                w.write_u32::<LE>(feature)?;
                w.write_f64::<LE>(threshold)?;
                w.write_u32::<LE>(left)?;
                w.write_u32::<LE>(right)?;
            }
        }
    }
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> io::Result<()> {
    v.iter().try_for_each(|&x| w.write_f64::<LE>(x))
}

/// Serializes the model into its file bytes.
pub fn encode(model: &PipelineModel) -> Vec<u8> {
    let mut w = Vec::new();
    encode_into(&mut w, model).expect("writing to a Vec cannot fail");
    let crc = crc32fast::hash(&w);
    w.extend_from_slice(&crc.to_le_bytes());
    w
}

fn encode_into(w: &mut Vec<u8>, model: &PipelineModel) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(model.edge_schema_version())?;
    w.write_u32::<LE>(model.instance_schema_version())?;
    w.write_u64::<LE>(model.d_edge() as u64)?;
    w.write_f64::<LE>(model.threshold())?;
    w.write_u32::<LE>(model.class_names().len() as u32)?;
    for name in model.class_names() {
        w.write_u32::<LE>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
    }

    let base = model.boundary().base();
    write_config(w, base.config())?;
    w.write_u64::<LE>(base.n_features() as u64)?;
    w.write_f64::<LE>(base.base_score())?;
    w.write_u32::<LE>(base.trees().len() as u32)?;
    for t in base.trees() {
        write_tree(w, t)?;
    }
    let iso = model.boundary().calibrator();
    w.write_u32::<LE>(iso.breakpoints().len() as u32)?;
    write_f64s(w, iso.breakpoints())?;
    write_f64s(w, iso.values())?;

    let sem = model.semantic();
    write_config(w, sem.config())?;
    w.write_u64::<LE>(sem.n_features() as u64)?;
    w.write_u32::<LE>(sem.n_classes() as u32)?;
    write_f64s(w, sem.base_scores())?;
    w.write_u32::<LE>(sem.n_rounds() as u32)?;
    for k in 0..sem.n_classes() {
        for t in sem.class_trees(k) {
            write_tree(w, t)?;
        }
    }
    Ok(())
}

struct Decoder<'a> {
    cur: Cursor<&'a [u8]>,
}

impl Decoder<'_> {
    fn eof(e: io::Error) -> ModelIoError {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ModelIoError::Truncated
        } else {
            ModelIoError::Io(e)
        }
    }

    fn u8(&mut self) -> Result<u8, ModelIoError> {
        self.cur.read_u8().map_err(Self::eof)
    }

    fn u32(&mut self) -> Result<u32, ModelIoError> {
        self.cur.read_u32::<LE>().map_err(Self::eof)
    }

    fn u64(&mut self) -> Result<u64, ModelIoError> {
        self.cur.read_u64::<LE>().map_err(Self::eof)
    }

    fn f64(&mut self) -> Result<f64, ModelIoError> {
        self.cur.read_f64::<LE>().map_err(Self::eof)
    }

    /// A count, checked against the bytes left so corrupt files fail
    /// before a huge allocation.
    fn count(&mut self, min_item_bytes: u64) -> Result<usize, ModelIoError> {
        let n = self.u32()? as u64;
        let left = self.cur.get_ref().len() as u64 - self.cur.position();
        if n * min_item_bytes > left {
            return Err(ModelIoError::Truncated);
        }
        Ok(n as usize)
    }

    fn usize(&mut self) -> Result<usize, ModelIoError> {
        let v = self.u64()?;
        if v >= MAX_COUNT {
            return Err(ModelIoError::Corrupt(format!("count {v} is out of range")));
        }
        Ok(v as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelIoError> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn string(&mut self) -> Result<String, ModelIoError> {
        let n = self.count(1)?;
        let mut buf = vec![0u8; n];
        self.cur.read_exact(&mut buf).map_err(Self::eof)?;
        String::from_utf8(buf).map_err(|_| ModelIoError::Corrupt("class name is not UTF-8".into()))
    }

    fn config(&mut self) -> Result<TrainConfig, ModelIoError> {
        Ok(TrainConfig {
            n_trees: self.usize()?,
            max_depth: self.usize()?,
            learning_rate: self.f64()?,
            lambda_l2: self.f64()?,
            min_child_hessian: self.f64()?,
            n_folds: self.usize()?,
            seed: self.u64()?,
        })
    }

    fn tree(&mut self) -> Result<DecisionTree, ModelIoError> {
        let n = self.count(9)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(match self.u8()? {
                0 => TreeNode::Leaf { weight: self.f64()? },
                1 => TreeNode::Split {
                    feature: self.u32()?,
                    threshold: self.f64()?,
                    left: self.u32()?,
                    right: self.u32()?,
                },
                tag => return Err(ModelIoError::Corrupt(format!("unknown node tag {tag}"))),
            });
        }
        DecisionTree::try_from_nodes(nodes).ok_or_else(|| ModelIoError::Corrupt("malformed tree".into()))
    }
}

/// Parses file bytes, verifying the magic and checksum first.
pub fn decode(bytes: &[u8]) -> Result<PipelineModel, ModelIoError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(ModelIoError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelIoError::Checksum { stored, computed });
    }
    let mut d = Decoder {
        cur: Cursor::new(&body[MAGIC.len()..]),
    };
    let edge_schema = d.u32()?;
    let instance_schema = d.u32()?;
    let d_edge = d.usize()?;
    let threshold = d.f64()?;
    let n_names = d.count(4)?;
    let class_names = (0..n_names).map(|_| d.string()).collect::<Result<Vec<_>, _>>()?;

    let config = d.config()?;
    let n_features = d.usize()?;
    let base_score = d.f64()?;
    let n_trees = d.count(13)?;
    let trees = (0..n_trees).map(|_| d.tree()).collect::<Result<Vec<_>, _>>()?;
    let base = GbdtBinaryModel::from_parts(trees, base_score, config, n_features)?;
    let n_iso = d.count(16)?;
    let breakpoints = d.f64s(n_iso)?;
    let values = d.f64s(n_iso)?;
    let calibrator = IsotonicModel::from_parts(breakpoints, values)?;

    let sem_config = d.config()?;
    let sem_features = d.usize()?;
    let k = d.count(8)?;
    let base_scores = d.f64s(k)?;
    let rounds = d.count(0)?;
    let mut class_trees = Vec::with_capacity(k);
    for _ in 0..k {
        class_trees.push((0..rounds).map(|_| d.tree()).collect::<Result<Vec<_>, _>>()?);
    }
    let semantic = GbdtMulticlassModel::from_parts(class_trees, base_scores, sem_config, sem_features)?;

    let left = body.len() - MAGIC.len() - d.cur.position() as usize;
    if left != 0 {
        return Err(ModelIoError::TrailingBytes(left));
    }
    Ok(PipelineModel::from_parts(
        CalibratedBinaryClassifier::new(base, calibrator),
        semantic,
        threshold,
        d_edge,
        edge_schema,
        instance_schema,
        class_names,
    )?)
}

pub fn save_model(model: &PipelineModel, path: &Path) -> io::Result<()> {
    std::fs::write(path, encode(model))
}

pub fn load_model(path: &Path) -> Result<PipelineModel, ModelIoError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pafr_core::attributes::EDGE_FEATURE_SCHEMA_VERSION;
    use pafr_core::pipeline::{train_pipeline, PipelineConfig};
    use pafr_core::synthgen::{generate_parts, GenConfig};
    use std::sync::OnceLock;

    fn model() -> &'static PipelineModel {
        static M: OnceLock<PipelineModel> = OnceLock::new();
        M.get_or_init(|| {
            let cfg = GenConfig {
                n_parts: 10,
                ..GenConfig::default()
            };
            let parts = generate_parts(&cfg).unwrap();
            let mut pc = PipelineConfig::default();
            pc.boundary.n_trees = 8;
            pc.semantic.n_trees = 5;
            train_pipeline(&parts, cfg.classes, &pc).unwrap().0
        })
    }

    #[test]
    fn roundtrip_is_identity() {
        let bytes = encode(model());
        assert_eq!(&bytes[..8], MAGIC);
        let back = decode(&bytes).unwrap();
        assert_eq!(&back, model());
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn roundtrip_preserves_predictions() {
        let back = decode(&encode(model())).unwrap();
        let mut s = 7u64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..model().boundary().n_features())
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (s >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0
                })
                .collect();
            let a = model().boundary().predict_proba(&x).unwrap();
            let b = back.boundary().predict_proba(&x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode(model());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(ModelIoError::BadMagic)));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(model());
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(decode(&flipped), Err(ModelIoError::Checksum { .. })));
        assert!(decode(&bytes[..bytes.len() - 10]).is_err());
    }

    #[test]
    fn future_schema_version_names_both() {
        let mut body = encode(model());
        body.truncate(body.len() - 4);
        body[8..12].copy_from_slice(&(EDGE_FEATURE_SCHEMA_VERSION + 1).to_le_bytes());
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        let msg = decode(&body).unwrap_err().to_string();
        assert!(msg.contains(&format!("version {}", EDGE_FEATURE_SCHEMA_VERSION + 1)), "{msg}");
        assert!(msg.contains(&format!("version {EDGE_FEATURE_SCHEMA_VERSION}")), "{msg}");
    }
}
