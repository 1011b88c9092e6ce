//! Disjoint-set forest used for connected components.

use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: alloc::vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        // path compression
        let mut cur = x;
        while self.parent[cur] as usize != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    /// Returns `true` when the two sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb as u32,
            core::cmp::Ordering::Greater => self.parent[rb] = ra as u32,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u32;
                self.rank[ra] += 1;
            }
        }
        true
    }

    /// Groups elements by set, each group sorted ascending and groups ordered
    /// by their smallest member.
    pub fn groups(&mut self) -> Vec<Vec<u32>> {
        let n = self.len();
        let mut slot = alloc::vec![u32::MAX; n];
        let mut out: Vec<Vec<u32>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == u32::MAX {
                slot[r] = out.len() as u32;
                out.push(Vec::new());
            }
            out[slot[r] as usize].push(i as u32);
        }
        out
    }

    /// Per-element group index, using the ordering of [`DisjointSets::groups`].
    pub fn labels(&mut self) -> (Vec<u32>, usize) {
        let n = self.len();
        let mut slot = alloc::vec![u32::MAX; n];
        let mut labels = alloc::vec![0u32; n];
        let mut count = 0u32;
        for (i, label) in labels.iter_mut().enumerate() {
            let r = self.find(i);
            if slot[r] == u32::MAX {
                slot[r] = count;
                count += 1;
            }
            *label = slot[r];
        }
        (labels, count as usize)
    }
}
