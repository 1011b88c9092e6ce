//! Independent reference implementations checked against the library.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use pafr_core::attributes::{algebraic_connectivity, jacobi_eigenvalues};
use pafr_core::graph::{build_graph, EdgeRecord, EdgeType, FaceRecord, Schema, SurfaceType};
use pafr_core::learner::fit_isotonic;
use pafr_core::metrics::{match_instances, panoptic_quality, LabeledInstance};
use pafr_core::pipeline::components;
use pafr_core::PartGraph;
use proptest::prelude::*;

fn graph(n: usize, pairs: &[(u32, u32)]) -> PartGraph {
    let faces = (0..n)
        .map(|_| FaceRecord {
            attrs: vec![],
            surface_type: SurfaceType::Plane,
            area: 1.0,
            truth: None,
            grid: None,
        })
        .collect();
    let edges = pairs
        .iter()
        .map(|&(s, t)| EdgeRecord {
            face_s: s,
            face_t: t,
            attrs: vec![],
            edge_type: EdgeType::Line,
            length: 1.0,
            samples: None,
        })
        .collect();
    build_graph("g", Schema::new(0, 0, 1), faces, edges).unwrap()
}

fn bfs_components(n: usize, pairs: &[(u32, u32)], keep: &[bool]) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); n];
    for (&(s, t), &k) in pairs.iter().zip(keep) {
        if k {
            adj[s as usize].push(t as usize);
            adj[t as usize].push(s as usize);
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start as u32];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w as u32);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn random_graph() -> impl Strategy<Value = (usize, Vec<(u32, u32)>, Vec<bool>)> {
    (1usize..=50).prop_flat_map(|n| {
        let pair = (0..n as u32, 1..n.max(2) as u32).prop_map(move |(s, d)| (s, (s + d) % n as u32));
        let max_edges = if n == 1 { 0 } else { 2 * n };
        proptest::collection::vec((pair, any::<bool>()), 0..=max_edges).prop_map(move |es| {
            let (pairs, keep) = es.into_iter().unzip();
            (n, pairs, keep)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn components_match_bfs((n, pairs, keep) in random_graph()) {
        let g = graph(n, &pairs);
        let mask: Vec<u8> = keep.iter().map(|&k| u8::from(k)).collect();
        prop_assert_eq!(components(&g, &mask), bfs_components(n, &pairs, &keep));
    }
}

/// Least-squares non-decreasing fit by trying every split into consecutive
/// blocks and keeping the best monotone sequence of block means.
fn brute_isotonic(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let cut = i + 1 == n || mask & (1 << i) != 0;
            if cut {
                let mean = y[start..=i].iter().sum::<f64>() / (i + 1 - start) as f64;
                fit.extend(std::iter::repeat_n(mean, i + 1 - start));
                start = i + 1;
            }
        }
        if fit.windows(2).any(|w| w[0] > w[1] + 1e-15) {
            continue;
        }
        let sse: f64 = fit.iter().zip(y).map(|(f, v)| (f - v) * (f - v)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
            best = Some((sse, fit));
        }
    }
    best.unwrap().1
}

#[test]
fn isotonic_matches_brute_force_on_all_short_sequences() {
    let levels = [0.0, 0.5, 1.0];
    let mut worst: f64 = 0.0;
    for n in 1..=8u32 {
        for code in 0..3usize.pow(n) {
            let mut c = code;
            let y: Vec<f64> = (0..n)
                .map(|_| {
                    let v = levels[c % 3];
                    c /= 3;
                    v
                })
                .collect();
            let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let m = fit_isotonic(&scores, &y).unwrap();
            for (s, want) in scores.iter().zip(brute_isotonic(&y)) {
                worst = worst.max((m.apply(*s) - want).abs());
            }
        }
    }
    assert!(worst <= 1e-9, "max deviation {worst}");
}

/// Largest one-to-one matching over class-consistent pairs with IoU > 0.5,
/// found by trying every assignment. Returns all matchings of maximal size.
fn exhaustive_matchings(
    preds: &[LabeledInstance],
    gts: &[LabeledInstance],
    exclude: &[u32],
) -> Vec<Vec<(usize, usize)>> {
    let iou = |a: &[u32], b: &[u32]| {
        let inter = a.iter().filter(|f| b.contains(f)).count();
        inter as f64 / (a.len() + b.len() - inter) as f64
    };
    let valid = |p: usize, g: usize| {
        let (pi, gi) = (&preds[p], &gts[g]);
        pi.class == gi.class && !exclude.contains(&pi.class) && iou(&pi.faces, &gi.faces) > 0.5
    };
    fn rec(
        p: usize,
        n_p: usize,
        n_g: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        valid: &dyn Fn(usize, usize) -> bool,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if p == n_p {
            out.push(cur.clone());
            return;
        }
        rec(p + 1, n_p, n_g, used, cur, valid, out);
        for g in 0..n_g {
            if !used[g] && valid(p, g) {
                used[g] = true;
                cur.push((p, g));
                rec(p + 1, n_p, n_g, used, cur, valid, out);
                cur.pop();
                used[g] = false;
            }
        }
    }
    let mut all = Vec::new();
    rec(0, preds.len(), gts.len(), &mut vec![false; gts.len()], &mut Vec::new(), &valid, &mut all);
    let best = all.iter().map(Vec::len).max().unwrap_or(0);
    all.retain(|m| m.len() == best);
    all
}

fn partition(labels: &[u32], classes: &[u32]) -> Vec<LabeledInstance> {
    let mut ids: Vec<u32> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|&id| {
            let faces = (0..labels.len() as u32).filter(|&f| labels[f as usize] == id).collect();
            LabeledInstance::new(faces, classes[id as usize])
        })
        .collect()
}

fn partition_pair() -> impl Strategy<Value = (Vec<LabeledInstance>, Vec<LabeledInstance>, Vec<u32>)> {
    (1usize..=30, 1u32..=10).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec(0..k, n),
            proptest::collection::vec(proptest::option::weighted(0.3, 0..k), n),
            proptest::collection::vec(0u32..3, k as usize),
            proptest::collection::vec(0u32..3, k as usize),
            proptest::collection::vec(0u32..3, 0..2),
        )
            .prop_map(|(gt, noise, gt_classes, pred_classes, exclude)| {
                // predictions start from the ground truth and move some faces
                let pred: Vec<u32> = gt.iter().zip(&noise).map(|(&g, n)| n.unwrap_or(g)).collect();
                let mixed: Vec<u32> = gt_classes
                    .iter()
                    .zip(&pred_classes)
                    .enumerate()
                    .map(|(i, (&a, &b))| if i % 3 == 0 { b } else { a })
                    .collect();
                (partition(&pred, &mixed), partition(&gt, &gt_classes), exclude)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matching_equals_exhaustive_search((preds, gts, exclude) in partition_pair()) {
        let m = match_instances(&preds, &gts, &exclude).unwrap();
        let optimal = exhaustive_matchings(&preds, &gts, &exclude);
        prop_assert_eq!(optimal.len(), 1);
        let tp: Vec<(usize, usize)> = m.tp.iter().map(|&(p, g, _)| (p, g)).collect();
        prop_assert_eq!(&tp, &optimal[0]);
        let kept_p = preds.iter().filter(|p| !exclude.contains(&p.class)).count();
        let kept_g = gts.iter().filter(|g| !exclude.contains(&g.class)).count();
        prop_assert_eq!(m.fp.len(), kept_p - tp.len());
        prop_assert_eq!(m.fn_.len(), kept_g - tp.len());
        let r = panoptic_quality(&preds, &gts, &exclude).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.pq));
        if r.counts.tp > 0 {
            prop_assert!((r.pq - r.sq * r.rq).abs() <= 1e-12);
        }
    }
}

fn laplacian(n: usize, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(a, b) in pairs {
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
    }
    l
}

proptest! {
    #[test]
    fn algebraic_connectivity_matches_dense_eigensolver(
        n in 2usize..=12,
        raw in proptest::collection::vec((0usize..12, 0usize..12), 0..30),
    ) {
        let mut pairs: Vec<(usize, usize)> = raw
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut eig: Vec<f64> = SymmetricEigen::new(laplacian(n, &pairs)).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        prop_assert!((algebraic_connectivity(n, &pairs) - eig[1]).abs() < 1e-8);

        let mut dense = laplacian(n, &pairs).as_slice().to_vec();
        let mut ours = jacobi_eigenvalues(n, &mut dense);
        ours.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&eig) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
