use std::sync::OnceLock;

use pafr::format::{read_dataset, write_dataset, Header};
use pafr::model_io::{decode, encode};
use pafr::run::{read_predictions, write_predictions};
use pafr_core::learner::TrainConfig;
use pafr_core::pipeline::{infer, train_pipeline, PipelineConfig, PipelineModel};
use pafr_core::synthgen::{generate_part, generate_parts, GenConfig};
use pafr_core::PartGraph;
use proptest::prelude::*;

fn model() -> &'static PipelineModel {
    static MODEL: OnceLock<PipelineModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = GenConfig {
            n_parts: 20,
            ..GenConfig::default()
        };
        let quick = |c: TrainConfig| TrainConfig {
            n_trees: 8,
            max_depth: 3,
            ..c
        };
        let pc = PipelineConfig {
            boundary: quick(TrainConfig::binary()),
            semantic: quick(TrainConfig::multiclass()),
            ..PipelineConfig::default()
        };
        train_pipeline(&generate_parts(&cfg).unwrap(), cfg.classes, &pc).unwrap().0
    })
}

fn any_part() -> impl Strategy<Value = (GenConfig, PartGraph)> {
    (any::<u64>(), 0u64..1000, 0.0f64..=1.0, any::<bool>(), 0usize..=5).prop_map(|(seed, i, noise, grids, hi)| {
        let cfg = GenConfig {
            seed,
            noise,
            with_grids: grids,
            features_per_part: (0, hi),
            ..GenConfig::default()
        };
        let g = generate_part(&cfg, i).unwrap();
        (cfg, g)
    })
}

/// Replaces some edge attributes with non-finite values.
fn with_specials(g: &PartGraph, picks: &[(usize, u8)]) -> PartGraph {
    let (id, schema, faces, mut edges) = g.clone().into_parts();
    for &(k, which) in picks {
        let n = edges.len();
        if n == 0 {
            break;
        }
        let e = &mut edges[k % n];
        let slot = k % e.attrs.len();
        e.attrs[slot] = match which % 3 {
            0 => f64::NAN,
            1 => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
    }
    pafr_core::graph::build_graph(id, schema, faces, edges).unwrap()
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jsonl_round_trips_parts((cfg, g) in any_part(), picks in proptest::collection::vec((any::<usize>(), any::<u8>()), 0..4)) {
        let g = with_specials(&g, &picks);
        let header = Header::new(&cfg.schema(), &cfg.classes);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &header, std::slice::from_ref(&g)).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back.header.as_ref(), Some(&header));
        let h = &back.parts[0];
        prop_assert_eq!(h.part_id(), g.part_id());
        prop_assert_eq!(h.n_faces(), g.n_faces());
        for (a, b) in h.edges().iter().zip(g.edges()) {
            prop_assert!(same_bits(&a.attrs, &b.attrs));
            prop_assert_eq!((a.face_s, a.face_t, a.edge_type), (b.face_s, b.face_t, b.edge_type));
            prop_assert_eq!(a.length.to_bits(), b.length.to_bits());
        }
        for (a, b) in h.faces().iter().zip(g.faces()) {
            prop_assert!(same_bits(&a.attrs, &b.attrs));
            prop_assert_eq!(a.truth, b.truth);
            prop_assert_eq!(&a.grid, &b.grid);
        }
    }

    #[test]
    fn model_file_detects_any_single_byte_change(pos in any::<usize>(), flip in 1u8..=255) {
        let bytes = encode(model());
        let mut bad = bytes.clone();
        let i = pos % bad.len();
        bad[i] ^= flip;
        prop_assert!(decode(&bad).is_err());
        prop_assert!(decode(&bytes[..i]).is_err());
    }

    #[test]
    fn predictions_round_trip((_, g) in any_part()) {
        let p = infer(model(), &g).unwrap();
        let mut buf = Vec::new();
        write_predictions(&mut buf, std::slice::from_ref(&p), model().class_names()).unwrap();
        let back = read_predictions(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0].part_id, &p.part_id);
        prop_assert_eq!(back[0].instances.len(), p.instances.len());
        for (a, b) in back[0].instances.iter().zip(&p.instances) {
            prop_assert_eq!(&a.faces, &b.faces);
            prop_assert_eq!(a.class, b.class);
            prop_assert_eq!(a.confidence.to_bits(), b.confidence.to_bits());
        }
    }
}

#[test]
fn model_file_round_trips_exactly() {
    let bytes = encode(model());
    let back = decode(&bytes).unwrap();
    assert_eq!(&back, model());
    assert_eq!(encode(&back), bytes);
}
