//! Exact k-nearest-neighbour index: a median-split kd-tree over a prefix of
//! the stored points plus a linearly scanned insertion buffer.
//!
//! Points are addressed by position (insertion order). Distance ties are
//! resolved in favour of the lower position, so results are identical to a
//! brute-force scan sorted by `(distance, position)`.

use std::cmp::Ordering;

use crate::data::squared_distance;

const LEAF_SIZE: usize = 16;
const MIN_BUFFER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub pos: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Neighbor) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.pos.cmp(&other.pos))
    }
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdIndex {
    dim: usize,
    coords: Vec<f64>,
    /// Permutation of `0..tree_len` grouped by leaf.
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Points `tree_len..len()` are in the insertion buffer.
    tree_len: usize,
}

impl KdIndex {
    pub fn new(dim: usize) -> Self {
        KdIndex {
            dim,
            coords: Vec::new(),
            order: Vec::new(),
            nodes: Vec::new(),
            tree_len: 0,
        }
    }

    pub fn from_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut idx = KdIndex::new(dim);
        for p in points {
            debug_assert_eq!(p.len(), dim);
            idx.coords.extend_from_slice(p);
        }
        idx.rebuild();
        idx
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, pos: usize) -> &[f64] {
        &self.coords[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn buffered(&self) -> usize {
        self.len() - self.tree_len
    }

    /// Appends a point to the insertion buffer, rebuilding the tree once the
    /// buffer outgrows `max(64, n/4)`.
    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim, "point dimensionality");
        self.coords.extend_from_slice(p);
        if self.buffered() > MIN_BUFFER.max(self.len() / 4) {
            self.rebuild();
        }
    }

    /// Drops the `count` oldest points and rebuilds. Positions shift down by
    /// `count`.
    pub fn drop_front(&mut self, count: usize) {
        let count = count.min(self.len());
        self.coords.drain(..count * self.dim);
        self.rebuild();
    }

    pub fn rebuild(&mut self) {
        let n = self.len();
        self.order = (0..n).collect();
        self.nodes.clear();
        self.tree_len = n;
        if n > 0 {
            self.build_node(0, n);
        }
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let node = &self.nodes[id];
        let split_dim = (0..self.dim)
            .max_by(|&a, &b| {
                (node.hi[a] - node.lo[a])
                    .total_cmp(&(node.hi[b] - node.lo[b]))
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        if node.hi[split_dim] - node.lo[split_dim] <= 0.0 {
            // all points coincide
            return id;
        }
        let mid = start + (end - start) / 2;
        let coords = &self.coords;
        let dim = self.dim;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + split_dim]
                .total_cmp(&coords[b * dim + split_dim])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].kind = NodeKind::Split { left, right };
        id
    }

    fn bounds(&self, start: usize, end: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &p in &self.order[start..end] {
            for (d, v) in self.point(p).iter().enumerate() {
                lo[d] = lo[d].min(*v);
                hi[d] = hi[d].max(*v);
            }
        }
        (lo, hi)
    }

    /// The `k` nearest stored points sorted by `(distance, position)`.
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        let mut best = Best::new(k);
        if k == 0 || self.is_empty() {
            return best.items;
        }
        if !self.nodes.is_empty() {
            self.search(0, query, &mut best);
        }
        for pos in self.tree_len..self.len() {
            best.offer(Neighbor {
                pos,
                dist2: squared_distance(query, self.point(pos)),
            });
        }
        best.items
    }

    fn search(&self, id: usize, query: &[f64], best: &mut Best) {
        match self.nodes[id].kind {
            NodeKind::Leaf { start, end } => {
                for &pos in &self.order[start..end] {
                    best.offer(Neighbor {
                        pos,
                        dist2: squared_distance(query, self.point(pos)),
                    });
                }
            }
            NodeKind::Split { left, right } => {
                let dl = box_distance2(&self.nodes[left], query);
                let dr = box_distance2(&self.nodes[right], query);
                let (first, d_first, second, d_second) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                if !best.prunes(d_first) {
                    self.search(first, query, best);
                }
                if !best.prunes(d_second) {
                    self.search(second, query, best);
                }
            }
        }
    }

    /// Checks that every stored point is reachable exactly once.
    pub fn audit(&self) -> bool {
        let mut seen = vec![false; self.len()];
        for &p in &self.order {
            if p >= self.tree_len || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        seen[..self.tree_len].iter().all(|s| *s) && self.order.len() == self.tree_len
    }
}

/// Lower bound on the squared distance from `q` to any point in the node's
/// bounding box. Computed term-wise with the same arithmetic as
/// [`squared_distance`], so it never exceeds a contained point's distance.
fn box_distance2(node: &Node, q: &[f64]) -> f64 {
    q.iter()
        .zip(node.lo.iter().zip(&node.hi))
        .map(|(x, (lo, hi))| {
            let c = x.clamp(*lo, *hi);
            (x - c) * (x - c)
        })
        .sum()
}

struct Best {
    k: usize,
    items: Vec<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn prunes(&self, bound: f64) -> bool {
        self.items.len() == self.k && bound > self.items[self.k - 1].dist2
    }

    fn offer(&mut self, n: Neighbor) {
        if self.items.len() == self.k
            && n.cmp_key(&self.items[self.k - 1]) != Ordering::Less
        {
            return;
        }
        let at = self
            .items
            .partition_point(|m| m.cmp_key(&n) == Ordering::Less);
        self.items.insert(at, n);
        self.items.truncate(self.k);
    }
}

/// Reference scan used by tests and by the brute-force SCM path.
pub fn brute_force_knn(points: &[&[f64]], query: &[f64], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(pos, p)| Neighbor {
            pos,
            dist2: squared_distance(query, p),
        })
        .collect();
    all.sort_by(|a, b| a.cmp_key(b));
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_points(n: usize, dim: usize, coords: &[f64]) -> Vec<Vec<f64>> {
        (0..n).map(|i| coords[i * dim..(i + 1) * dim].to_vec()).collect()
    }

    #[test]
    fn empty_index_returns_nothing() {
        let idx = KdIndex::new(3);
        assert!(idx.knn(&[0.0, 0.0, 0.0], 4).is_empty());
    }

    #[test]
    fn ties_go_to_lower_position() {
        let pts = [vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0]];
        let idx = KdIndex::from_points(2, pts.iter().map(|p| p.as_slice()));
        let nn = idx.knn(&[0.0, 0.0], 2);
        assert_eq!(nn.iter().map(|n| n.pos).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn buffer_and_drop_front_stay_consistent() {
        let mut idx = KdIndex::new(1);
        for i in 0..300 {
            idx.push(&[i as f64]);
            assert!(idx.audit());
        }
        idx.drop_front(100);
        assert_eq!(idx.len(), 200);
        assert_eq!(idx.point(0), &[100.0]);
        let nn = idx.knn(&[150.2], 1);
        assert_eq!(nn[0].pos, 50);
        assert!(idx.audit());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_brute_force(
            n in 1usize..500,
            k in 1usize..40,
            seed_coords in proptest::collection::vec(-3i32..3, 8 * 500),
            q in proptest::collection::vec(-3.0f64..3.0, 8),
            pushes in 0usize..100,
        ) {
            // Integer-valued coordinates generate plenty of exact distance ties.
            let coords: Vec<f64> = seed_coords.iter().map(|&c| c as f64 * 0.5).collect();
            let pts = grid_points(n, 8, &coords);
            let mut idx = KdIndex::from_points(8, pts.iter().map(|p| p.as_slice()));
            let extra = pushes.min(500 - n);
            let mut all = pts.clone();
            for i in 0..extra {
                let p = coords[(n + i) * 8..(n + i + 1) * 8].to_vec();
                idx.push(&p);
                all.push(p);
            }
            let refs: Vec<&[f64]> = all.iter().map(|p| p.as_slice()).collect();
            let expected = brute_force_knn(&refs, &q, k);
            prop_assert_eq!(idx.knn(&q, k), expected);
        }
    }
}
