//! Static 3-d tree for exact K-nearest-neighbor queries.
//!
//! Results are ordered by `(squared distance, index)`, so equal distances
//! resolve to the lower input index on every query path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

const LEAF_SIZE: usize = 8;
/// Below this many points queries scan linearly.
pub const EXHAUSTIVE_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if points.len() > EXHAUSTIVE_LIMIT {
            build(&points, &mut order, 0, &mut nodes);
        }
        KdTree {
            points,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Indices of the `k` nearest points, nearest first. Returns fewer than
    /// `k` indices only when the tree holds fewer points.
    pub fn nearest(&self, query: &[f64; 3], k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        self.nearest_into(query, k, &mut out);
        out
    }

    /// Like [`KdTree::nearest`], reusing `out`.
    pub fn nearest_into(&self, query: &[f64; 3], k: usize, out: &mut Vec<usize>) {
        out.clear();
        if k == 0 || self.points.is_empty() {
            return;
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if self.nodes.is_empty() {
            for (i, p) in self.points.iter().enumerate() {
                offer(
                    &mut heap,
                    k,
                    Candidate {
                        dist: dist2(query, p),
                        index: i as u32,
                    },
                );
            }
        } else {
            self.search(0, query, k, &mut heap);
        }
        let mut found = heap.into_vec();
        found.sort_unstable();
        out.extend(found.into_iter().map(|c| c.index as usize));
    }

    fn search(&self, node: usize, query: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let c = Candidate {
                        dist: dist2(query, &self.points[i as usize]),
                        index: i,
                    };
                    offer(heap, k, c);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[axis as usize] - value;
                let (near, far) = if delta < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near as usize, query, k, heap);
                // `<=` keeps equal-distance points with lower indices reachable.
                if heap.len() < k || delta * delta <= heap.peek().unwrap().dist {
                    self.search(far as usize, query, k, heap);
                }
            }
        }
    }
}

#[inline]
fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, c: Candidate) {
    if heap.len() < k {
        heap.push(c);
    } else if c < *heap.peek().unwrap() {
        heap.pop();
        heap.push(c);
    }
}

fn build(points: &[[f64; 3]], order: &mut [u32], offset: u32, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len() as u32,
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[axis] - lo[axis] == 0.0 {
        // all points coincide
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len() as u32,
        });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis])
    });
    let value = points[order[mid] as usize][axis];
    nodes.push(Node::Split {
        axis: axis as u8,
        value,
        left: 0,
        right: 0,
    });
    let (left_slice, right_slice) = order.split_at_mut(mid);
    let left = build(points, left_slice, offset, nodes);
    let right = build(points, right_slice, offset + mid as u32, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

/// Indices of the `k` points nearest to `query` by squared Euclidean
/// distance, ties broken by lower index.
pub fn knn(query: [f64; 3], points: &[[f64; 3]], k: usize) -> Result<Vec<usize>> {
    if k < 1 {
        return Err(Error::InvalidInput("knn requires k >= 1".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("knn over an empty point set".into()));
    }
    Ok(KdTree::new(points.to_vec()).nearest(&query, k))
}
