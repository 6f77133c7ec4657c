/// Convex hull of labeled planar points, vertices in counter-clockwise order.
///
/// Points are buffered and folded into the hull in batches, so memory stays
/// proportional to the hull size plus one batch. Labels travel with their
/// points so callers can report which sample attains an extreme value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanarHull {
    vertices: Vec<([f64; 2], usize)>,
    pending: Vec<([f64; 2], usize)>,
}

const BATCH: usize = 4096;

impl PlanarHull {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: [f64; 2], label: usize) {
        self.pending.push((point, label));
        if self.pending.len() >= BATCH {
            self.flush();
        }
    }

    pub fn merge(&mut self, mut other: PlanarHull) {
        other.flush();
        self.pending.extend(other.vertices);
        self.flush();
    }

    pub fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let mut pts = std::mem::take(&mut self.vertices);
        pts.append(&mut self.pending);
        self.vertices = monotone_chain(pts);
    }

    /// Hull vertices; call [`flush`](Self::flush) after the last `push`.
    pub fn vertices(&self) -> &[([f64; 2], usize)] {
        debug_assert!(self.pending.is_empty(), "flush before reading vertices");
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.pending.is_empty()
    }

    /// `max dir·p` over the hull with the attaining label.
    pub fn max_dot(&self, dir: [f64; 2]) -> Option<(f64, usize)> {
        self.vertices.iter().map(|(p, l)| (dir[0] * p[0] + dir[1] * p[1], *l)).fold(None, |best, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn monotone_chain(mut pts: Vec<([f64; 2], usize)>) -> Vec<([f64; 2], usize)> {
    pts.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])).then(a.1.cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<([f64; 2], usize)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2].0, lower[lower.len() - 1].0, p.0) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<([f64; 2], usize)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2].0, upper[upper.len() - 1].0, p.0) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_interior_points() {
        let mut h = PlanarHull::new();
        for (i, p) in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]].iter().enumerate() {
            h.push(*p, i);
        }
        h.flush();
        assert_eq!(h.vertices().len(), 4);
        assert_eq!(h.max_dot([1.0, 1.0]), Some((2.0, 2)));
    }

    #[test]
    fn duplicates_keep_lowest_label_and_merge_is_order_free() {
        let mut a = PlanarHull::new();
        a.push([1.0, 2.0], 7);
        a.push([1.0, 2.0], 3);
        a.flush();
        assert_eq!(a.vertices(), &[([1.0, 2.0], 3)]);
        let mut b = PlanarHull::new();
        b.push([0.0, 0.0], 1);
        b.push([2.0, 0.0], 2);
        let (mut ab, mut ba) = (a.clone(), b.clone());
        ab.merge(b);
        ba.merge(a);
        assert_eq!(ab.vertices(), ba.vertices());
    }
}
