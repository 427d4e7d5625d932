//! Static kd-tree for exact nearest-neighbour distance queries.

/// Points are reordered in place; each subtree occupies a contiguous range
/// with its median at the middle index.
#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    axes: Vec<u8>,
}

impl<const D: usize> KdTree<D> {
    pub fn build(points: &[[f64; D]]) -> Self {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build_range(&mut pts, &mut axes, 0);
        KdTree { points: pts, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean distance from `q` to its nearest stored point.
    /// `f64::INFINITY` for an empty tree.
    pub fn nearest_distance(&self, q: &[f64; D]) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best.sqrt()
    }

    fn search(&self, lo: usize, hi: usize, q: &[f64; D], best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < *best {
            *best = d2;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff < *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build_range<const D: usize>(pts: &mut [[f64; D]], axes: &mut [u8], depth: usize) {
    if pts.len() <= 1 {
        if let Some(a) = axes.first_mut() {
            *a = (depth % D) as u8;
        }
        return;
    }
    // Split on the axis of largest spread.
    let mut axis = 0;
    let mut spread = -1.0;
    for a in 0..D {
        let (mn, mx) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), p| (mn.min(p[a]), mx.max(p[a])));
        if mx - mn > spread {
            spread = mx - mn;
            axis = a;
        }
    }
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (lp, rp) = pts.split_at_mut(mid);
    let (la, ra) = axes.split_at_mut(mid);
    build_range(lp, la, depth + 1);
    build_range(&mut rp[1..], &mut ra[1..], depth + 1);
}
