//! Exact k-nearest-neighbor search over Euclidean predictors.
//!
//! Two backends answer the same query: a brute-force scan and a kd-tree.
//! Both order candidates by `(squared distance, row index)`, so ties at the
//! k-th distance always resolve to the lower row index and the two backends
//! return identical lists.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::PredictorMatrix;

/// Above this many rows `Strategy::Auto` builds a kd-tree.
pub const KDTREE_THRESHOLD: usize = 20_000;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Auto,
    Brute,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub distance: T,
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    sq: T,
    index: usize,
}

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Candidate<T> {}
impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq
            .partial_cmp(&other.sq)
            .expect("finite distances")
            .then(self.index.cmp(&other.index))
    }
}

#[inline]
fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: T, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct KdTree<T> {
    /// Points in leaf order, row-major.
    points: Vec<T>,
    /// Original row index of each reordered point.
    ids: Vec<usize>,
    nodes: Vec<Node<T>>,
    p: usize,
}

impl<T: Scalar> KdTree<T> {
    fn build(x: &PredictorMatrix<T>) -> Self {
        let p = x.ncols();
        let mut perm: Vec<usize> = (0..x.nrows()).collect();
        let mut nodes = Vec::new();
        Self::build_node(x, &mut perm, 0, &mut nodes);
        let mut points = Vec::with_capacity(x.nrows() * p);
        for &i in &perm {
            points.extend_from_slice(x.row(i));
        }
        Self { points, ids: perm, nodes, p }
    }

    fn build_node(x: &PredictorMatrix<T>, perm: &mut [usize], offset: usize, nodes: &mut Vec<Node<T>>) -> usize {
        let id = nodes.len();
        let len = perm.len();
        let leaf = Node::Leaf { start: offset, end: offset + len };
        if len <= LEAF_SIZE {
            nodes.push(leaf);
            return id;
        }
        let (dim, spread) = (0..x.ncols())
            .map(|j| {
                let (lo, hi) = perm.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                    let v = x.row(i)[j];
                    (lo.min(v), hi.max(v))
                });
                (j, hi - lo)
            })
            .fold((0, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if spread <= T::zero() {
            nodes.push(leaf);
            return id;
        }
        let mid = len / 2;
        perm.select_nth_unstable_by(mid, |&a, &b| {
            x.row(a)[dim]
                .partial_cmp(&x.row(b)[dim])
                .expect("finite predictors")
                .then(a.cmp(&b))
        });
        let value = x.row(perm[mid])[dim];
        nodes.push(leaf);
        let (lo, hi) = perm.split_at_mut(mid);
        let left = Self::build_node(x, lo, offset, nodes);
        let right = Self::build_node(x, hi, offset + mid, nodes);
        nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    fn search(&self, node: usize, q: &[T], k: usize, heap: &mut BinaryHeap<Candidate<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let pt = &self.points[slot * self.p..(slot + 1) * self.p];
                    let c = Candidate { sq: sq_dist(pt, q), index: self.ids[slot] };
                    offer(heap, c, k);
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= T::zero() { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                let bound = diff * diff;
                // `<=` keeps equal-distance points with lower indices reachable.
                if heap.len() < k || bound <= heap.peek().expect("non-empty heap").sq {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

#[inline]
fn offer<T: Scalar>(heap: &mut BinaryHeap<Candidate<T>>, c: Candidate<T>, k: usize) {
    if heap.len() < k {
        heap.push(c);
    } else if let Some(mut top) = heap.peek_mut() {
        if c < *top {
            *top = c;
        }
    }
}

#[derive(Debug, Clone)]
enum Backend<T> {
    Brute,
    KdTree(KdTree<T>),
}

/// Immutable, thread-safe exact nearest-neighbor index over the rows of a
/// predictor matrix.
#[derive(Debug, Clone)]
pub struct NeighborIndex<T> {
    data: Arc<PredictorMatrix<T>>,
    backend: Backend<T>,
}

impl<T: Scalar> NeighborIndex<T> {
    pub fn build(data: Arc<PredictorMatrix<T>>, strategy: Strategy) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::validation("cannot index an empty predictor matrix"));
        }
        if data.ncols() == 0 {
            return Err(Error::validation("cannot index predictors of width 0"));
        }
        let use_tree = match strategy {
            Strategy::Auto => data.nrows() > KDTREE_THRESHOLD,
            Strategy::Brute => false,
            Strategy::KdTree => true,
        };
        let backend = if use_tree {
            Backend::KdTree(KdTree::build(&data))
        } else {
            Backend::Brute
        };
        Ok(Self { data, backend })
    }

    pub fn strategy(&self) -> Strategy {
        match self.backend {
            Backend::Brute => Strategy::Brute,
            Backend::KdTree(_) => Strategy::KdTree,
        }
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Arc<PredictorMatrix<T>> {
        &self.data
    }

    /// The `min(k, n)` rows closest to `q`, by non-decreasing distance.
    pub fn query(&self, q: &[T], k: usize) -> Result<Vec<Neighbor<T>>> {
        if q.len() != self.width() {
            return Err(Error::validation(format!(
                "query has width {}, index has {}",
                q.len(),
                self.width()
            )));
        }
        if k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        if let Some(j) = q.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("query coordinate {j} is not finite")));
        }
        let k = k.min(self.len());
        let mut cands = match &self.backend {
            Backend::Brute => self.brute(q, k),
            Backend::KdTree(tree) => {
                let mut heap = BinaryHeap::with_capacity(k + 1);
                tree.search(0, q, k, &mut heap);
                heap.into_vec()
            }
        };
        cands.sort_unstable();
        Ok(cands
            .into_iter()
            .map(|c| Neighbor { index: c.index, distance: c.sq.sqrt() })
            .collect())
    }

    fn brute(&self, q: &[T], k: usize) -> Vec<Candidate<T>> {
        let mut all: Vec<Candidate<T>> = self
            .data
            .rows()
            .enumerate()
            .map(|(index, r)| Candidate { sq: sq_dist(r, q), index })
            .collect();
        if k < all.len() {
            all.select_nth_unstable(k - 1);
            all.truncate(k);
        }
        all
    }

    /// Queries every row of `queries`, in parallel, preserving row order.
    pub fn query_batch(&self, queries: &PredictorMatrix<T>, k: usize) -> Result<Vec<Vec<Neighbor<T>>>> {
        (0..queries.nrows())
            .into_par_iter()
            .map(|i| self.query(queries.row(i), k))
            .collect()
    }
}
