use super::Point3;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a point slice. Answers exact radius queries and
/// returns ids (indices into the slice it was built from).
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(points: &[Point3]) -> Self {
        let mut index = SpatialIndex {
            points: points.to_vec(),
            ids: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            index.build_node(0, points.len());
        }
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return slot;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a].axis(axis).total_cmp(&points[b].axis(axis))
        });
        let value = self.points[self.ids[mid]].axis(axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[slot] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        slot
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &id in &self.ids[start..end] {
            let p = self.points[id];
            for a in 0..3 {
                lo[a] = lo[a].min(p.axis(a));
                hi[a] = hi[a].max(p.axis(a));
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ids of all points at distance `<= radius` from `query`, appended to `out` unsorted.
    pub fn within(&self, query: &Point3, radius: f64, out: &mut Vec<usize>) {
        self.search(query, radius, false, out);
    }

    /// Ids of all points at distance `< radius` from `query`, appended to `out` unsorted.
    pub fn within_strict(&self, query: &Point3, radius: f64, out: &mut Vec<usize>) {
        self.search(query, radius, true, out);
    }

    /// Sorted ids at distance `<= radius`.
    pub fn radius_query(&self, query: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within(query, radius, &mut out);
        out.sort_unstable();
        out
    }

    fn search(&self, query: &Point3, radius: f64, strict: bool, out: &mut Vec<usize>) {
        if self.nodes.is_empty() || radius < 0.0 {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match self.nodes[n] {
                Node::Leaf { start, end } => {
                    for &id in &self.ids[start..end] {
                        let d2 = self.points[id].distance_squared(query);
                        if d2 < r2 || (!strict && d2 == r2) {
                            out.push(id);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    // Left holds coordinates <= value, right holds >= value.
                    let delta = query.axis(axis) - value;
                    if delta <= radius {
                        stack.push(left);
                    }
                    if -delta <= radius {
                        stack.push(right);
                    }
                }
            }
        }
    }
}
