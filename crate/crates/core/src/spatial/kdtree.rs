use crate::error::{Error, Result};
use crate::model::Position;

const LEAF_SIZE: usize = 8;

/// A neighbor returned by [`KdTree`] queries. `index` is the id the point was
/// inserted with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Neighbor {
    pub dist2: u64,
    pub index: u32,
}

#[inline]
pub fn dist2(a: Position, b: Position) -> u64 {
    let dx = a[0] as i64 - b[0] as i64;
    let dy = a[1] as i64 - b[1] as i64;
    let dz = a[2] as i64 - b[2] as i64;
    (dx * dx + dy * dy + dz * dz) as u64
}

#[derive(Debug, Clone)]
struct Node {
    lo: Position,
    hi: Position,
    start: u32,
    end: u32,
    // 0 marks a leaf; the root is never anyone's child.
    left: u32,
    right: u32,
    min_id: u32,
}

impl Node {
    #[inline]
    fn lower_bound(&self, q: Position) -> u64 {
        let mut d = 0u64;
        for a in 0..3 {
            let gap = if q[a] < self.lo[a] {
                self.lo[a] - q[a]
            } else if q[a] > self.hi[a] {
                q[a] - self.hi[a]
            } else {
                0
            } as u64;
            d += gap * gap;
        }
        d
    }
}

/// Static k-d tree over integer points with exact k-nearest-neighbor queries.
///
/// Results are ordered by `(dist2, index)`, so they are identical to a
/// brute-force scan with the same tie-break regardless of how the tree was
/// built.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Position>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

/// Bounded, sorted candidate list.
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

    #[inline]
    fn worst(&self) -> Neighbor {
        if self.items.len() < self.k {
            Neighbor {
                dist2: u64::MAX,
                index: u32::MAX,
            }
        } else {
            self.items[self.k - 1]
        }
    }

    #[inline]
    fn offer(&mut self, n: Neighbor) {
        if self.items.len() == self.k && n >= self.items[self.k - 1] {
            return;
        }
        let pos = self.items.partition_point(|x| *x < n);
        self.items.insert(pos, n);
        self.items.truncate(self.k);
    }
}

impl KdTree {
    /// Builds a tree over `(id, position)` pairs. Ids need not be contiguous
    /// but must be unique for the tie-break to be meaningful.
    pub fn build(items: impl IntoIterator<Item = (u32, Position)>) -> Result<KdTree> {
        let mut items: Vec<(Position, u32)> = items.into_iter().map(|(i, p)| (p, i)).collect();
        if items.is_empty() {
            return Err(Error::InvalidParameter("k-d tree over an empty point set".into()));
        }
        let mut nodes = Vec::with_capacity(2 * items.len() / LEAF_SIZE + 1);
        build_node(&mut items, 0, &mut nodes);
        let (points, ids) = items.into_iter().unzip();
        Ok(KdTree { points, ids, nodes })
    }

    /// Convenience: ids are the slice indices.
    pub fn from_positions(positions: &[Position]) -> Result<KdTree> {
        KdTree::build(positions.iter().enumerate().map(|(i, &p)| (i as u32, p)))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `min(k, len)` nearest points to `query`.
    pub fn knn(&self, query: Position, k: usize) -> Vec<Neighbor> {
        self.knn_below(query, k, u32::MAX)
    }

    /// Like [`KdTree::knn`] but only considers points whose id is `< bound`.
    pub fn knn_below(&self, query: Position, k: usize, bound: u32) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut best = Best::new(k);
        self.search(0, query, bound, &mut best);
        best.items
    }

    fn search(&self, ni: usize, q: Position, bound: u32, best: &mut Best) {
        let node = &self.nodes[ni];
        if node.left == 0 {
            for j in node.start as usize..node.end as usize {
                let id = self.ids[j];
                if id < bound {
                    best.offer(Neighbor {
                        dist2: dist2(q, self.points[j]),
                        index: id,
                    });
                }
            }
            return;
        }
        let (l, r) = (node.left as usize, node.right as usize);
        let (dl, dr) = (self.nodes[l].lower_bound(q), self.nodes[r].lower_bound(q));
        let order = if dl <= dr { [(l, dl), (r, dr)] } else { [(r, dr), (l, dl)] };
        for (child, lb) in order {
            let c = &self.nodes[child];
            if c.min_id >= bound {
                continue;
            }
            let worst = best.worst();
            if (lb, c.min_id) > (worst.dist2, worst.index) {
                continue;
            }
            self.search(child, q, bound, best);
        }
    }
}

fn build_node(items: &mut [(Position, u32)], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let mut lo = [u32::MAX; 3];
    let mut hi = [0u32; 3];
    let mut min_id = u32::MAX;
    for (p, id) in items.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
        min_id = min_id.min(*id);
    }
    let me = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        start: offset as u32,
        end: (offset + items.len()) as u32,
        left: 0,
        right: 0,
        min_id,
    });
    let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    if items.len() <= LEAF_SIZE || extent == [0, 0, 0] {
        return me as u32;
    }
    let axis = (0..3).max_by_key(|&a| (extent[a], std::cmp::Reverse(a))).unwrap();
    let mid = items.len() / 2;
    items.select_nth_unstable_by_key(mid, |(p, id)| (p[axis], *id));
    let (left_items, right_items) = items.split_at_mut(mid);
    let left = build_node(left_items, offset, nodes);
    let right = build_node(right_items, offset + mid, nodes);
    nodes[me].left = left;
    nodes[me].right = right;
    me as u32
}
