//! Generated datasets on disk: generator config files, manifests and split
//! selection.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pafr_core::synthgen::{generate_part, GenConfig, GenError, Manifest, Split, BOUNDARY_FRACTION_RANGE};
use pafr_core::PartGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::{part_to_line, write_header, Header, GRAPH_SCHEMA};
use crate::report::ClassCount;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Generator settings as read from a TOML file. Every key is optional and
/// command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenFile {
    pub seed: Option<u64>,
    pub parts: Option<usize>,
    pub classes: Option<Vec<String>>,
    pub features_per_part: Option<[usize; 2]>,
    pub noise: Option<f64>,
    pub ambiguity: Option<f64>,
    pub with_grids: Option<bool>,
}

impl GenFile {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Overlays the file onto `cfg`.
    pub fn apply(&self, cfg: &mut GenConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.parts {
            cfg.n_parts = v;
        }
        if let Some(v) = &self.classes {
            cfg.classes = v.clone();
        }
        if let Some([lo, hi]) = self.features_per_part {
            cfg.features_per_part = (lo, hi);
        }
        if let Some(v) = self.noise {
            cfg.noise = v;
        }
        if let Some(v) = self.ambiguity {
            cfg.ambiguity = v;
        }
        if let Some(v) = self.with_grids {
            cfg.with_grids = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSettings {
    pub seed: u64,
    pub n_parts: usize,
    pub classes: Vec<String>,
    pub features_per_part: [usize; 2],
    pub noise: f64,
    pub ambiguity: f64,
    pub with_grids: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// `manifest.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub schema: String,
    pub generator: GeneratorSettings,
    pub n_parts: usize,
    pub n_instances: usize,
    pub n_faces: usize,
    pub n_edges: usize,
    pub n_boundary_edges: usize,
    pub boundary_fraction: f64,
    pub class_counts: Vec<ClassCount>,
    pub splits: Splits,
}

impl ManifestFile {
    pub fn new(cfg: &GenConfig, parts: &[PartGraph]) -> Self {
        let m = Manifest::from_parts(cfg, parts);
        let mut splits = Splits::default();
        for (g, s) in parts.iter().zip(&m.splits) {
            let list = match s {
                Split::Train => &mut splits.train,
                Split::Val => &mut splits.val,
                Split::Test => &mut splits.test,
            };
            list.push(g.part_id().to_string());
        }
        Self {
            schema: GRAPH_SCHEMA.to_string(),
            generator: GeneratorSettings {
                seed: cfg.seed,
                n_parts: cfg.n_parts,
                classes: cfg.classes.clone(),
                features_per_part: [cfg.features_per_part.0, cfg.features_per_part.1],
                noise: cfg.noise,
                ambiguity: cfg.ambiguity,
                with_grids: cfg.with_grids,
            },
            n_parts: m.n_parts,
            n_instances: m.n_instances,
            n_faces: m.n_faces,
            n_edges: m.n_edges,
            n_boundary_edges: m.n_boundary_edges,
            boundary_fraction: m.boundary_fraction(),
            class_counts: m
                .classes
                .iter()
                .zip(&m.class_counts)
                .map(|(c, &count)| ClassCount {
                    class: c.clone(),
                    count,
                })
                .collect(),
            splits,
        }
    }
}

/// Generates all parts, in parallel and in index order.
pub fn generate(cfg: &GenConfig) -> Result<Vec<PartGraph>, GenError> {
    cfg.validate()?;
    (0..cfg.n_parts as u64)
        .into_par_iter()
        .map(|i| generate_part(cfg, i))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Writes `dataset.jsonl` and `manifest.json` into `dir`.
pub fn write_generated(dir: &Path, cfg: &GenConfig, parts: &[PartGraph]) -> std::io::Result<ManifestFile> {
    std::fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(File::create(dir.join(DATASET_FILE))?);
    write_header(&mut out, &Header::new(&cfg.schema(), &cfg.classes))?;
    let lines: Vec<String> = parts.par_iter().map(part_to_line).collect();
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let manifest = ManifestFile::new(cfg, parts);
    if !parts.is_empty() {
        let f = manifest.boundary_fraction;
        if f < BOUNDARY_FRACTION_RANGE.0 || f > BOUNDARY_FRACTION_RANGE.1 {
            log::warn!(
                "boundary edge fraction {f:.3} is outside [{}, {}]",
                BOUNDARY_FRACTION_RANGE.0,
                BOUNDARY_FRACTION_RANGE.1
            );
        }
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// `manifest.json` next to a dataset file.
pub fn sibling_manifest(data: &Path) -> PathBuf {
    data.with_file_name(MANIFEST_FILE)
}

/// Keeps the parts listed under `split`, in file order. Returns the ids
/// that the manifest lists but the file lacks.
pub fn select_split(parts: Vec<PartGraph>, manifest: &ManifestFile, split: Split) -> (Vec<PartGraph>, Vec<String>) {
    let wanted: HashSet<&str> = manifest.splits.ids(split).iter().map(String::as_str).collect();
    let kept: Vec<PartGraph> = parts.into_iter().filter(|g| wanted.contains(g.part_id())).collect();
    let have: HashSet<&str> = kept.iter().map(|g| g.part_id()).collect();
    let missing = manifest
        .splits
        .ids(split)
        .iter()
        .filter(|id| !have.contains(id.as_str()))
        .cloned()
        .collect();
    (kept, missing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pafr_core::synthgen::generate_parts;

    #[test]
    fn parallel_generation_matches_sequential() {
        let cfg = GenConfig {
            n_parts: 20,
            seed: 3,
            ..GenConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate_parts(&cfg).unwrap());
    }

    #[test]
    fn config_file_overlays_defaults() {
        let f = GenFile::parse("seed = 4\nfeatures_per_part = [1, 3]\nnoise = 0.0\n").unwrap();
        let mut cfg = GenConfig::default();
        f.apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.features_per_part, cfg.noise), (4, (1, 3), 0.0));
        assert!(GenFile::parse("colour = 1").is_err());
    }

    #[test]
    fn manifest_splits_cover_every_part() {
        let cfg = GenConfig {
            n_parts: 100,
            ..GenConfig::default()
        };
        let parts = generate(&cfg).unwrap();
        let m = ManifestFile::new(&cfg, &parts);
        assert_eq!((m.splits.train.len(), m.splits.val.len(), m.splits.test.len()), (70, 15, 15));
        let (test, missing) = select_split(parts, &m, Split::Test);
        assert_eq!(test.len(), 15);
        assert!(missing.is_empty());
    }
}
