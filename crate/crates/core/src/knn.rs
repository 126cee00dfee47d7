//! Exact k-nearest-neighbour search.
//!
//! Neighbours are ordered by `(squared Euclidean distance, training index)`,
//! so equal distances resolve to the lowest index. The kd-tree and the
//! brute-force scan compute distances with the same summation order and
//! therefore return identical neighbour lists.

use crate::matrix::DataMatrix;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    BruteForce,
    #[default]
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist2: f64,
    pub index: usize,
}

impl Neighbor {
    fn precedes(&self, other: &Neighbor) -> bool {
        match self.dist2.total_cmp(&other.dist2) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => self.index < other.index,
            std::cmp::Ordering::Greater => false,
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Sorted list of the best `k` candidates seen so far.
struct Best {
    k: usize,
    items: Vec<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_dist(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |n| n.dist2)
    }

    #[inline]
    fn offer(&mut self, cand: Neighbor) {
        if self.full() && !cand.precedes(self.items.last().expect("k >= 1")) {
            return;
        }
        let pos = self.items.partition_point(|n| n.precedes(&cand));
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    n: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(points: &DataMatrix) -> Self {
        let mut index = Self {
            dim: points.cols(),
            n: points.rows(),
            points: points.values().to_vec(),
            order: (0..points.rows()).collect(),
            nodes: Vec::new(),
        };
        if index.n > 0 {
            index.build(0, index.n);
        }
        index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in &self.order[start..end] {
            let p = &self.points[i * self.dim..(i + 1) * self.dim];
            for d in 0..self.dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let id = self.nodes.len();
        let spread = |d: usize| hi[d] - lo[d];
        let split_dim = (0..self.dim).max_by(|&a, &b| spread(a).total_cmp(&spread(b)).then(b.cmp(&a)));
        let leaf = end - start <= LEAF_SIZE || split_dim.is_none_or(|d| spread(d) == 0.0);
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if leaf {
            return id;
        }
        let d = split_dim.expect("non-leaf has a split dimension");
        let mid = start + (end - start) / 2;
        let (dim, points) = (self.dim, &self.points);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + d].total_cmp(&points[b * dim + d]).then(a.cmp(&b))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id].kind = NodeKind::Split { left, right };
        id
    }

    fn box_dist(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&v, &lo), &hi) in q.iter().zip(&node.lo).zip(&node.hi) {
            let delta = if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            };
            s += delta * delta;
        }
        s
    }

    /// `k` nearest training points to `q`, nearest first.
    pub fn nearest(&self, q: &[f64], k: usize, strategy: SearchStrategy) -> Vec<Neighbor> {
        assert_eq!(q.len(), self.dim, "query width");
        let k = k.min(self.n);
        if k == 0 {
            return Vec::new();
        }
        let mut best = Best::new(k);
        match strategy {
            SearchStrategy::BruteForce => {
                for i in 0..self.n {
                    best.offer(Neighbor {
                        dist2: sq_dist(q, self.point(i)),
                        index: i,
                    });
                }
            }
            SearchStrategy::KdTree => self.search(0, q, &mut best),
        }
        best.items
    }

    fn search(&self, id: usize, q: &[f64], best: &mut Best) {
        let node = &self.nodes[id];
        match node.kind {
            NodeKind::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    best.offer(Neighbor {
                        dist2: sq_dist(q, self.point(i)),
                        index: i,
                    });
                }
            }
            NodeKind::Split { left, right } => {
                let dl = self.box_dist(&self.nodes[left], q);
                let dr = self.box_dist(&self.nodes[right], q);
                let (first, d_first, second, d_second) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                // Equal bounds are still visited: a tied point with a lower
                // index must be able to displace the current worst.
                if !best.full() || d_first <= best.worst_dist() {
                    self.search(first, q, best);
                }
                if !best.full() || d_second <= best.worst_dist() {
                    self.search(second, q, best);
                }
            }
        }
    }
}
