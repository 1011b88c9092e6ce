//! Column index and level-wise exact-greedy tree growth.
//!
//! Each feature is ranked once per training set: rank 0 is `NaN`, ranks
//! `1..` are the distinct values in ascending order. Two scan routes share
//! that ranking and enumerate exactly the same candidate thresholds:
//!
//! * low-cardinality columns accumulate per-node histograms with one bin per
//!   distinct value; a node's larger child is derived from its parent by
//!   subtracting the smaller child;
//! * high-cardinality columns keep a value-sorted row list per node, stored
//!   as contiguous segments that are stably partitioned after every split.
//!
//! A split between the `NaN` rank and the smallest value is allowed; its
//! threshold is that smallest value, so only missing values go left.
//!
//! A column whose ranks coincide with those of an earlier column induces the
//! same partitions with the same gains and would always lose the
//! lowest-index tie-break, so it is skipped.

use alloc::vec::Vec;

use super::matrix::FeatureMatrix;
use super::tree::{DecisionTree, TreeNode, TreeParams};

/// Columns with at most this many distinct values are histogrammed.
const BIN_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy)]
enum Loc {
    Binned(usize),
    Sorted(usize),
    Alias(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct ColumnIndex {
    n_rows: usize,
    values: Vec<Vec<f64>>,
    loc: Vec<Loc>,
    binned: Vec<usize>,
    bin_offsets: Vec<usize>,
    bins: Vec<u16>,
    sorted: Vec<usize>,
    sorted_rows: Vec<Vec<u32>>,
    sorted_ranks: Vec<Vec<u32>>,
    row_ranks: Vec<Vec<u32>>,
}

/// Order-preserving integer key of a non-`NaN` float; `-0.0` and `0.0`
/// share a key.
fn order_key(v: f64) -> u64 {
    let bits = if v == 0.0 { 0u64 } else { v.to_bits() };
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn rank_hash(ranks: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &r in ranks {
        h ^= r as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl ColumnIndex {
    pub(crate) fn new(x: &FeatureMatrix) -> Self {
        let n = x.n_rows();
        let n_cols = x.n_cols();
        let mut values = Vec::with_capacity(n_cols);
        let mut loc = Vec::with_capacity(n_cols);
        let mut binned = Vec::new();
        let mut sorted = Vec::new();
        let mut sorted_rows = Vec::new();
        let mut sorted_ranks = Vec::new();
        let mut row_ranks: Vec<Vec<u32>> = Vec::new();
        let mut binned_ranks: Vec<Vec<u32>> = Vec::new();
        // (hash, distinct count, feature) of every kept column
        let mut seen: Vec<(u64, usize, usize)> = Vec::new();
        let mut kept_ranks: Vec<Option<Vec<u32>>> = Vec::with_capacity(n_cols);
        let mut column: Vec<(u64, u32)> = Vec::with_capacity(n);

        for f in 0..n_cols {
            column.clear();
            let mut order: Vec<u32> = Vec::with_capacity(n);
            for r in 0..n {
                let v = x.get(r, f);
                if v.is_nan() {
                    order.push(r as u32);
                } else {
                    column.push((order_key(v), r as u32));
                }
            }
            let n_nan = order.len();
            column.sort_unstable();
            let mut distinct: Vec<f64> = Vec::new();
            let mut last_key = None;
            let mut rank = alloc::vec![0u32; n];
            let mut ordered_ranks = alloc::vec![0u32; n_nan];
            for &(key, r) in &column {
                if last_key != Some(key) {
                    last_key = Some(key);
                    let v = x.get(r as usize, f);
                    distinct.push(if v == 0.0 { 0.0 } else { v });
                }
                rank[r as usize] = distinct.len() as u32;
                order.push(r);
                ordered_ranks.push(distinct.len() as u32);
            }

            let h = rank_hash(&rank);
            let twin = seen.iter().find(|&&(sh, sd, sf)| {
                sh == h && sd == distinct.len() && kept_ranks[sf].as_deref() == Some(&rank[..])
            });
            if let Some(&(_, _, sf)) = twin {
                loc.push(Loc::Alias(sf));
                kept_ranks.push(None);
            } else if distinct.len() <= BIN_LIMIT {
                seen.push((h, distinct.len(), f));
                loc.push(Loc::Binned(binned.len()));
                binned.push(f);
                binned_ranks.push(rank.clone());
                kept_ranks.push(Some(rank));
            } else {
                seen.push((h, distinct.len(), f));
                loc.push(Loc::Sorted(sorted.len()));
                sorted.push(f);
                sorted_rows.push(order);
                sorted_ranks.push(ordered_ranks);
                row_ranks.push(rank.clone());
                kept_ranks.push(Some(rank));
            }
            values.push(distinct);
        }

        let nb = binned.len();
        let mut bin_offsets = Vec::with_capacity(nb + 1);
        let mut acc = 0usize;
        for &f in &binned {
            bin_offsets.push(acc);
            acc += values[f].len() + 1;
        }
        bin_offsets.push(acc);
        let mut bins = alloc::vec![0u16; n * nb];
        for (j, ranks) in binned_ranks.iter().enumerate() {
            for (r, &rk) in ranks.iter().enumerate() {
                bins[r * nb + j] = rk as u16;
            }
        }

        Self {
            n_rows: n,
            values,
            loc,
            binned,
            bin_offsets,
            bins,
            sorted,
            sorted_rows,
            sorted_ranks,
            row_ranks,
        }
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub(crate) fn n_cols(&self) -> usize {
        self.values.len()
    }

    fn rank(&self, feature: usize, row: u32) -> u32 {
        match self.loc[feature] {
            Loc::Binned(j) => self.bins[row as usize * self.binned.len() + j] as u32,
            Loc::Sorted(i) => self.row_ranks[i][row as usize],
            Loc::Alias(f) => self.rank(f, row),
        }
    }

    fn total_bins(&self) -> usize {
        *self.bin_offsets.last().unwrap_or(&0)
    }

    /// Threshold strictly above the value of rank `lo` and at most the value
    /// of rank `hi`. With `lo == 0` only `NaN` rows go left.
    fn threshold(&self, feature: usize, lo: u32, hi: u32) -> f64 {
        let b = self.values[feature][hi as usize - 1];
        if lo == 0 {
            return b;
        }
        let a = self.values[feature][lo as usize - 1];
        let mid = a * 0.5 + b * 0.5;
        if mid > a && mid <= b {
            mid
        } else {
            b
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    lo_rank: u32,
    hi_rank: u32,
    g_left: f64,
    h_left: f64,
}

fn better(candidate: &Split, best: &Option<Split>) -> bool {
    match best {
        None => true,
        Some(b) => {
            candidate.gain > b.gain
                || (candidate.gain == b.gain
                    && (candidate.feature, candidate.hi_rank) < (b.feature, b.hi_rank))
        }
    }
}

/// Split evaluation for one node.
#[derive(Debug, Clone, Copy)]
struct Scorer {
    g: f64,
    h: f64,
    parent: f64,
    lambda: f64,
    mch: f64,
}

impl Scorer {
    fn new(g: f64, h: f64, params: &TreeParams) -> Self {
        Self {
            g,
            h,
            parent: g * g / (h + params.lambda_l2),
            lambda: params.lambda_l2,
            mch: params.min_child_hessian,
        }
    }

    #[inline]
    fn consider(&self, feature: usize, lo: u32, hi: u32, gl: f64, hl: f64, best: &mut Option<Split>) {
        let gr = self.g - gl;
        let hr = self.h - hl;
        if hl < self.mch || hr < self.mch || hl + self.lambda <= 0.0 || hr + self.lambda <= 0.0 {
            return;
        }
        let gain = 0.5 * (gl * gl / (hl + self.lambda) + gr * gr / (hr + self.lambda) - self.parent);
        if !(gain > 0.0) {
            return;
        }
        let cand = Split {
            gain,
            feature,
            lo_rank: lo,
            hi_rank: hi,
            g_left: gl,
            h_left: hl,
        };
        if better(&cand, best) {
            *best = Some(cand);
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Hist {
    gh: Vec<[f64; 2]>,
    count: Vec<u32>,
}

#[derive(Debug)]
struct Node {
    node: usize,
    start: usize,
    end: usize,
    g: f64,
    h: f64,
    depth: usize,
    hist: Option<Hist>,
    best: Option<Split>,
}

/// Siblings created by one split, with the parent's histogram if it had one.
struct Group {
    nodes: Vec<Node>,
    parent_hist: Option<Hist>,
}

/// Leaf membership of a grown tree: `rows()[start..end]` fall in a leaf
/// of raw weight `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LeafSegment {
    pub start: usize,
    pub end: usize,
    pub weight: f64,
}

/// Node-partitioned copy of one high-cardinality column: within every node
/// segment, rows appear in ascending rank order.
#[derive(Debug, Clone, Default)]
struct Segments {
    rows: Vec<u32>,
    ranks: Vec<u32>,
    gh: Vec<[f64; 2]>,
}

/// Grows trees over a fixed subset of the indexed rows.
pub(crate) struct Grower<'a> {
    index: &'a ColumnIndex,
    params: TreeParams,
    root_rows: Vec<u32>,
    rows: Vec<u32>,
    root_segments: Vec<Segments>,
    segments: Vec<Segments>,
    scratch: Segments,
    go_left: Vec<bool>,
    pool: Vec<Hist>,
}

impl<'a> Grower<'a> {
    /// `subset` lists the training rows in ascending order; `None` means all
    /// rows.
    pub(crate) fn new(index: &'a ColumnIndex, params: TreeParams, subset: Option<&[u32]>) -> Self {
        let root_rows: Vec<u32> = match subset {
            None => (0..index.n_rows as u32).collect(),
            Some(rows) => rows.to_vec(),
        };
        let mut member = alloc::vec![subset.is_none(); index.n_rows];
        if subset.is_some() {
            for &r in &root_rows {
                member[r as usize] = true;
            }
        }
        let root_segments: Vec<Segments> = (0..index.sorted.len())
            .map(|i| {
                let mut seg = Segments::default();
                for (&r, &rank) in index.sorted_rows[i].iter().zip(&index.sorted_ranks[i]) {
                    if member[r as usize] {
                        seg.rows.push(r);
                        seg.ranks.push(rank);
                    }
                }
                seg.gh = alloc::vec![[0.0; 2]; seg.rows.len()];
                seg
            })
            .collect();
        let n = root_rows.len();
        Self {
            index,
            params,
            rows: root_rows.clone(),
            root_rows,
            segments: root_segments.clone(),
            root_segments,
            scratch: Segments {
                rows: Vec::with_capacity(n),
                ranks: Vec::with_capacity(n),
                gh: Vec::with_capacity(n),
            },
            go_left: alloc::vec![false; index.n_rows],
            pool: Vec::new(),
        }
    }

    pub(crate) fn root_rows(&self) -> &[u32] {
        &self.root_rows
    }

    /// Row permutation of the last grown tree; leaf segments index into it.
    pub(crate) fn rows(&self) -> &[u32] {
        &self.rows
    }

    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.lambda_l2;
        if denom > 0.0 {
            -g / denom
        } else {
            0.0
        }
    }

    fn eligible(params: &TreeParams, n: &Node) -> bool {
        n.depth < params.max_depth && n.end - n.start >= 2 && n.h >= 2.0 * params.min_child_hessian
    }

    fn build_hist(&mut self, start: usize, end: usize, gh: &[[f64; 2]]) -> Hist {
        let index = self.index;
        let total = index.total_bins();
        let mut hist = match self.pool.pop() {
            Some(mut h) => {
                h.gh.fill([0.0; 2]);
                h.count.fill(0);
                h
            }
            None => Hist {
                gh: alloc::vec![[0.0; 2]; total],
                count: alloc::vec![0; total],
            },
        };
        let nb = index.binned.len();
        let offsets = &index.bin_offsets[..nb];
        for &r in &self.rows[start..end] {
            let [g, h] = gh[r as usize];
            let base = r as usize * nb;
            for (&off, &b) in offsets.iter().zip(&index.bins[base..base + nb]) {
                let slot = off + b as usize;
                let cell = &mut hist.gh[slot];
                cell[0] += g;
                cell[1] += h;
                hist.count[slot] += 1;
            }
        }
        hist
    }

    /// Fills in the histograms of the eligible nodes of a sibling group.
    fn group_hists(&mut self, group: &mut Group, gh: &[[f64; 2]]) {
        let want: Vec<bool> = group
            .nodes
            .iter()
            .map(|n| Self::eligible(&self.params, n))
            .collect();
        let parent = group.parent_hist.take();
        if !want.iter().any(|&w| w) {
            if let Some(p) = parent {
                self.pool.push(p);
            }
            return;
        }
        match parent {
            Some(mut parent) if group.nodes.len() == 2 => {
                let len = |n: &Node| n.end - n.start;
                let small = if len(&group.nodes[0]) <= len(&group.nodes[1]) { 0 } else { 1 };
                let large = 1 - small;
                let small_hist = self.build_hist(group.nodes[small].start, group.nodes[small].end, gh);
                for (p, c) in parent.gh.iter_mut().zip(&small_hist.gh) {
                    p[0] -= c[0];
                    p[1] -= c[1];
                }
                for (p, c) in parent.count.iter_mut().zip(&small_hist.count) {
                    *p -= c;
                }
                if want[small] {
                    group.nodes[small].hist = Some(small_hist);
                } else {
                    self.pool.push(small_hist);
                }
                if want[large] {
                    group.nodes[large].hist = Some(parent);
                } else {
                    self.pool.push(parent);
                }
            }
            parent => {
                if let Some(p) = parent {
                    self.pool.push(p);
                }
                for (k, node) in group.nodes.iter_mut().enumerate() {
                    if want[k] {
                        node.hist = Some(self.build_hist(node.start, node.end, gh));
                    }
                }
            }
        }
    }

    fn scan_hist(&self, node: &mut Node) {
        let Some(hist) = node.hist.as_ref() else {
            return;
        };
        let index = self.index;
        let scorer = Scorer::new(node.g, node.h, &self.params);
        let mut best = node.best;
        for (j, &f) in index.binned.iter().enumerate() {
            let lo = index.bin_offsets[j];
            let hi = index.bin_offsets[j + 1];
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut prev = 0u32;
            let mut started = false;
            for (b, slot) in (lo..hi).enumerate() {
                if hist.count[slot] == 0 {
                    continue;
                }
                let b = b as u32;
                if started {
                    if node.h - hl < scorer.mch {
                        break;
                    }
                    scorer.consider(f, prev, b, gl, hl, &mut best);
                }
                gl += hist.gh[slot][0];
                hl += hist.gh[slot][1];
                prev = b;
                started = true;
            }
        }
        node.best = best;
    }

    fn scan_segments(&self, node: &mut Node) {
        let index = self.index;
        let scorer = Scorer::new(node.g, node.h, &self.params);
        let mut best = node.best;
        for (i, &f) in index.sorted.iter().enumerate() {
            let seg = &self.segments[i];
            let ranks = &seg.ranks[node.start..node.end];
            let ghs = &seg.gh[node.start..node.end];
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut prev = ranks[0];
            for (&rank, &[g, h]) in ranks.iter().zip(ghs) {
                if rank != prev {
                    if node.h - hl < scorer.mch {
                        break;
                    }
                    scorer.consider(f, prev, rank, gl, hl, &mut best);
                    prev = rank;
                }
                gl += g;
                hl += h;
            }
        }
        node.best = best;
    }

    fn partition(&mut self, node: &Node, s: &Split) -> usize {
        let index = self.index;
        let (start, end) = (node.start, node.end);
        let seg = &mut self.rows[start..end];
        for &r in seg.iter() {
            self.go_left[r as usize] = index.rank(s.feature, r) < s.hi_rank;
        }
        let go_left = &self.go_left;
        let scratch = &mut self.scratch;
        scratch.rows.clear();
        let mut write = 0;
        for i in 0..seg.len() {
            let r = seg[i];
            if go_left[r as usize] {
                seg[write] = r;
                write += 1;
            } else {
                scratch.rows.push(r);
            }
        }
        seg[write..].copy_from_slice(&scratch.rows);

        for segs in self.segments.iter_mut() {
            scratch.rows.clear();
            scratch.ranks.clear();
            scratch.gh.clear();
            let rows = &mut segs.rows[start..end];
            let ranks = &mut segs.ranks[start..end];
            let ghs = &mut segs.gh[start..end];
            let mut w = 0;
            for i in 0..rows.len() {
                let r = rows[i];
                if go_left[r as usize] {
                    rows[w] = r;
                    ranks[w] = ranks[i];
                    ghs[w] = ghs[i];
                    w += 1;
                } else {
                    scratch.rows.push(r);
                    scratch.ranks.push(ranks[i]);
                    scratch.gh.push(ghs[i]);
                }
            }
            rows[w..].copy_from_slice(&scratch.rows);
            ranks[w..].copy_from_slice(&scratch.ranks);
            ghs[w..].copy_from_slice(&scratch.gh);
        }
        write
    }

    /// Grows one tree on per-row `[gradient, hessian]` pairs indexed by the
    /// global row id. Rows outside the subset are ignored.
    pub(crate) fn grow(&mut self, gh: &[[f64; 2]]) -> (DecisionTree, Vec<LeafSegment>) {
        self.rows.copy_from_slice(&self.root_rows);
        let index = self.index;
        let params = self.params;
        for (dst, src) in self.segments.iter_mut().zip(&self.root_segments) {
            dst.rows.copy_from_slice(&src.rows);
            dst.ranks.copy_from_slice(&src.ranks);
            for (d, &r) in dst.gh.iter_mut().zip(&src.rows) {
                *d = gh[r as usize];
            }
        }
        let (mut g, mut h) = (0.0, 0.0);
        for &r in &self.root_rows {
            g += gh[r as usize][0];
            h += gh[r as usize][1];
        }
        let mut nodes = alloc::vec![TreeNode::Leaf { weight: 0.0 }];
        let mut leaves = Vec::new();
        let mut level = alloc::vec![Group {
            nodes: alloc::vec![Node {
                node: 0,
                start: 0,
                end: self.rows.len(),
                g,
                h,
                depth: 0,
                hist: None,
                best: None,
            }],
            parent_hist: None,
        }];

        while !level.is_empty() {
            for group in level.iter_mut() {
                if !index.binned.is_empty() {
                    self.group_hists(group, gh);
                }
                for node in group.nodes.iter_mut() {
                    if Self::eligible(&params, node) {
                        self.scan_hist(node);
                        self.scan_segments(node);
                    }
                }
            }

            let mut next = Vec::with_capacity(level.len() * 2);
            for group in level {
                for mut node in group.nodes {
                    let split = if Self::eligible(&params, &node) { node.best } else { None };
                    let Some(s) = split else {
                        if let Some(hist) = node.hist.take() {
                            self.pool.push(hist);
                        }
                        let weight = self.leaf_weight(node.g, node.h);
                        nodes[node.node] = TreeNode::Leaf { weight };
                        leaves.push(LeafSegment {
                            start: node.start,
                            end: node.end,
                            weight,
                        });
                        continue;
                    };
                    let n_left = self.partition(&node, &s);
                    let left = nodes.len();
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes[node.node] = TreeNode::Split {
                        feature: s.feature as u32,
                        threshold: index.threshold(s.feature, s.lo_rank, s.hi_rank),
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    let mid = node.start + n_left;
                    let child = |k: usize, start: usize, end: usize, g: f64, h: f64| Node {
                        node: left + k,
                        start,
                        end,
                        g,
                        h,
                        depth: node.depth + 1,
                        hist: None,
                        best: None,
                    };
                    next.push(Group {
                        nodes: alloc::vec![
                            child(0, node.start, mid, s.g_left, s.h_left),
                            child(1, mid, node.end, node.g - s.g_left, node.h - s.h_left),
                        ],
                        parent_hist: node.hist.take(),
                    });
                }
            }
            level = next;
        }
        (DecisionTree::from_nodes(nodes), leaves)
    }
}
