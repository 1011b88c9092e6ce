//! Line-delimited part files.
//!
//! The first line is a header naming the schema and dimensions; every
//! following non-blank line holds one part. Reals are written with the
//! shortest representation that parses back to the same bits. JSON has no
//! spelling for non-finite numbers, so `NaN` (a missing attribute) is written
//! as `null` and infinities as the strings `"inf"` and `"-inf"`.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use pafr_core::graph::{build_graph, GraphError};
use pafr_core::{
    AttrSlots, EdgeRecord, EdgeSamples, EdgeType, FaceGrid, FaceRecord, GroundTruth, PartGraph,
    Schema, SurfaceType,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Schema tag written in, and required of, every header.
pub const GRAPH_SCHEMA: &str = "pafr-graph/1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unsupported schema `{found}`, this build reads `{supported}`")]
    UnsupportedSchema { found: String, supported: &'static str },
    #[error("header at byte {offset}: {message}")]
    Header { offset: u64, message: String },
    #[error("part `{part_id}` at byte {offset}: {message}")]
    Part { part_id: String, offset: u64, message: String },
    #[error("record at byte {offset}: {message}")]
    Record { offset: u64, message: String },
    #[error("part `{part_id}` at byte {offset}: {source}")]
    Graph {
        part_id: String,
        offset: u64,
        source: GraphError,
    },
}

/// First record of a part file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    #[serde(rename = "d_F")]
    pub d_face: usize,
    #[serde(rename = "d_E")]
    pub d_edge: usize,
    #[serde(rename = "K")]
    pub n_classes: usize,
    pub classes: Vec<String>,
    /// Named positions inside the edge attribute vector.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attr_slots: BTreeMap<String, usize>,
}

impl Header {
    pub fn new(schema: &Schema, classes: &[String]) -> Self {
        Self {
            schema: GRAPH_SCHEMA.to_string(),
            d_face: schema.d_face,
            d_edge: schema.d_edge,
            n_classes: schema.n_classes,
            classes: classes.to_vec(),
            attr_slots: schema.slots.iter().map(|(n, i)| (n.to_string(), i)).collect(),
        }
    }

    /// The in-memory schema, after checking the tag and class count.
    pub fn to_schema(&self) -> Result<Schema, String> {
        if self.classes.len() != self.n_classes {
            return Err(format!(
                "K = {} but {} class names are listed",
                self.n_classes,
                self.classes.len()
            ));
        }
        let mut slots = AttrSlots::default();
        for (name, &index) in &self.attr_slots {
            slots.set(name, index).map_err(|e| e.to_string())?;
        }
        Ok(Schema::new(self.d_face, self.d_edge, self.n_classes).with_slots(slots))
    }
}

/// A real that may be non-finite.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_none()
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
            Null(()),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Real(v)),
            Raw::Null(()) => Ok(Real(f64::NAN)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" | "NaN" => Ok(Real(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("`{other}` is not a number"))),
            },
        }
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().map(|&x| Real(x)).collect()
}

fn unreal(v: Vec<Real>) -> Vec<f64> {
    v.into_iter().map(|r| r.0).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridJson {
    u: usize,
    v: usize,
    data: Vec<Real>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesJson {
    m: usize,
    data: Vec<Real>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceJson {
    attrs: Vec<Real>,
    surface_type: String,
    area: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeJson {
    s: u32,
    t: u32,
    attrs: Vec<Real>,
    edge_type: String,
    length: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<SamplesJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartJson {
    part_id: String,
    faces: Vec<FaceJson>,
    edges: Vec<EdgeJson>,
}

fn part_to_json(g: &PartGraph) -> PartJson {
    PartJson {
        part_id: g.part_id().to_string(),
        faces: g
            .faces()
            .iter()
            .map(|f| FaceJson {
                attrs: reals(&f.attrs),
                surface_type: f.surface_type.name().to_string(),
                area: Real(f.area),
                instance_id: f.truth.map(|t| t.instance_id),
                class: f.truth.map(|t| t.class),
                grid: f.grid.as_ref().map(|gr| GridJson {
                    u: gr.u_res,
                    v: gr.v_res,
                    data: reals(&gr.samples),
                }),
            })
            .collect(),
        edges: g
            .edges()
            .iter()
            .map(|e| EdgeJson {
                s: e.face_s,
                t: e.face_t,
                attrs: reals(&e.attrs),
                edge_type: e.edge_type.name().to_string(),
                length: Real(e.length),
                samples: e.samples.as_ref().map(|s| SamplesJson {
                    m: s.m_res,
                    data: reals(&s.samples),
                }),
            })
            .collect(),
    }
}

fn json_to_part(rec: PartJson, schema: Schema, offset: u64) -> Result<PartGraph, FormatError> {
    let part_id = rec.part_id;
    let bad = |message: String| FormatError::Part {
        part_id: part_id.clone(),
        offset,
        message,
    };
    let mut faces = Vec::with_capacity(rec.faces.len());
    for (i, f) in rec.faces.into_iter().enumerate() {
        let truth = match (f.instance_id, f.class) {
            (Some(instance_id), Some(class)) => Some(GroundTruth { instance_id, class }),
            (None, None) => None,
            _ => return Err(bad(format!("face {i} has only one of instance_id and class"))),
        };
        let surface_type: SurfaceType = f
            .surface_type
            .parse()
            .map_err(|e| bad(format!("face {i}: {e}")))?;
        faces.push(FaceRecord {
            attrs: unreal(f.attrs),
            surface_type,
            area: f.area.0,
            truth,
            grid: f.grid.map(|gr| FaceGrid {
                u_res: gr.u,
                v_res: gr.v,
                samples: unreal(gr.data),
            }),
        });
    }
    let mut edges = Vec::with_capacity(rec.edges.len());
    for (k, e) in rec.edges.into_iter().enumerate() {
        let edge_type: EdgeType = e.edge_type.parse().map_err(|err| bad(format!("edge {k}: {err}")))?;
        edges.push(EdgeRecord {
            face_s: e.s,
            face_t: e.t,
            attrs: unreal(e.attrs),
            edge_type,
            length: e.length.0,
            samples: e.samples.map(|s| EdgeSamples {
                m_res: s.m,
                samples: unreal(s.data),
            }),
        });
    }
    build_graph(part_id.clone(), schema, faces, edges).map_err(|source| FormatError::Graph {
        part_id,
        offset,
        source,
    })
}

pub fn write_header<W: Write>(w: &mut W, header: &Header) -> io::Result<()> {
    serde_json::to_writer(&mut *w, header)?;
    w.write_all(b"\n")
}

pub fn write_part<W: Write>(w: &mut W, g: &PartGraph) -> io::Result<()> {
    serde_json::to_writer(&mut *w, &part_to_json(g))?;
    w.write_all(b"\n")
}

/// One part as a single line, without the trailing newline.
pub fn part_to_line(g: &PartGraph) -> String {
    serde_json::to_string(&part_to_json(g)).expect("part records always serialize")
}

/// Writes a header followed by every part.
pub fn write_dataset<W: Write>(w: &mut W, header: &Header, parts: &[PartGraph]) -> io::Result<()> {
    write_header(w, header)?;
    for g in parts {
        write_part(w, g)?;
    }
    Ok(())
}

/// Best-effort recovery of the part id from a line that failed to parse.
fn sniff_part_id(line: &str) -> Option<String> {
    let key = line.find("\"part_id\"")?;
    let rest = line[key + 9..].trim_start().strip_prefix(':')?.trim_start();
    let rest = rest.strip_prefix('"')?;
    Some(rest[..rest.find('"')?].to_string())
}

/// Byte position of a serde_json error inside a single-line record.
fn error_offset(line: &str, err: &serde_json::Error) -> u64 {
    if err.line() <= 1 {
        // serde_json counts columns in bytes from 1
        err.column().saturating_sub(1).min(line.len()) as u64
    } else {
        line.len() as u64
    }
}

/// Streaming reader: parses the header eagerly and yields parts one at a
/// time.
pub struct PartReader<R> {
    input: R,
    header: Option<Header>,
    schema: Option<Schema>,
    offset: u64,
    line: String,
}

impl<R: BufRead> PartReader<R> {
    /// Reads the header. A file with no records at all is accepted and
    /// yields no parts.
    pub fn new(input: R) -> Result<Self, FormatError> {
        let mut reader = Self {
            input,
            header: None,
            schema: None,
            offset: 0,
            line: String::new(),
        };
        if let Some(start) = reader.next_line()? {
            let text = reader.line.trim_end();
            let header: Header = serde_json::from_str(text).map_err(|e| FormatError::Header {
                offset: start + error_offset(text, &e),
                message: e.to_string(),
            })?;
            if header.schema != GRAPH_SCHEMA {
                return Err(FormatError::UnsupportedSchema {
                    found: header.schema,
                    supported: GRAPH_SCHEMA,
                });
            }
            let schema = header
                .to_schema()
                .map_err(|message| FormatError::Header { offset: start, message })?;
            reader.schema = Some(schema);
            reader.header = Some(header);
        }
        Ok(reader)
    }

    /// `None` only for a file without any records.
    pub fn header(&self) -> Option<&Header> {
        self.header.as_ref()
    }

    /// Advances to the next non-blank line and returns its starting offset.
    fn next_line(&mut self) -> Result<Option<u64>, FormatError> {
        loop {
            self.line.clear();
            let start = self.offset;
            let n = self.input.read_line(&mut self.line)?;
            if n == 0 {
                return Ok(None);
            }
            self.offset += n as u64;
            if !self.line.trim().is_empty() {
                return Ok(Some(start));
            }
        }
    }

    fn read_part(&mut self) -> Result<Option<PartGraph>, FormatError> {
        let Some(start) = self.next_line()? else {
            return Ok(None);
        };
        let text = self.line.trim_end();
        let rec: PartJson = serde_json::from_str(text).map_err(|e| {
            let offset = start + error_offset(text, &e);
            match sniff_part_id(text) {
                Some(part_id) => FormatError::Part {
                    part_id,
                    offset,
                    message: e.to_string(),
                },
                None => FormatError::Record {
                    offset,
                    message: e.to_string(),
                },
            }
        })?;
        let schema = self.schema.expect("a header precedes every part");
        json_to_part(rec, schema, start).map(Some)
    }
}

impl<R: BufRead> Iterator for PartReader<R> {
    type Item = Result<PartGraph, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_part().transpose()
    }
}

/// A header with all parts, read eagerly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: Option<Header>,
    pub parts: Vec<PartGraph>,
}

impl Dataset {
    pub fn class_names(&self) -> Vec<String> {
        self.header.as_ref().map(|h| h.classes.clone()).unwrap_or_default()
    }
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset, FormatError> {
    let mut reader = PartReader::new(input)?;
    let parts = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        header: reader.header,
        parts,
    })
}
