//! Static kd-tree over a flat point array, built once and shared read-only.

/// Balanced kd-tree stored implicitly: the range `[lo, hi)` of `order` has its
/// splitting point at `mid = (lo + hi) / 2` and splitting axis `axis[mid]`.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    axis: Vec<u8>,
}

impl KdTree {
    /// Build from `count = points.len() / dim` points stored row-major.
    pub fn new(points: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let count = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            order: (0..count).collect(),
            axis: vec![0; count],
        };
        tree.build(0, count);
        tree
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, |r| r.len());
        let flat = rows.iter().flat_map(|r| r.iter().copied()).collect();
        KdTree::new(flat, dim)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn coord(&self, i: usize, d: usize) -> f64 {
        self.points[i * self.dim + d]
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let mut best_axis = 0;
        let mut best_spread = -1.0;
        for d in 0..self.dim {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[lo..hi] {
                let c = self.coord(i, d);
                mn = mn.min(c);
                mx = mx.max(c);
            }
            if mx - mn > best_spread {
                best_spread = mx - mn;
                best_axis = d;
            }
        }
        let mid = (lo + hi) / 2;
        let (pts, dim) = (&self.points, self.dim);
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a * dim + best_axis]
                .partial_cmp(&pts[b * dim + best_axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        self.axis[mid] = best_axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    fn d2(&self, i: usize, q: &[f64]) -> f64 {
        let p = self.point(i);
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Nearest point: `(index, squared distance)`.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, self.len(), q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, lo: usize, hi: usize, q: &[f64], best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d2 = self.d2(i, q);
        if d2 < best.1 || (d2 == best.1 && i < best.0) {
            *best = (i, d2);
        }
        if hi - lo == 1 {
            return;
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.coord(i, ax);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(near.0, near.1, q, best);
        if diff * diff <= best.1 {
            self.nearest_rec(far.0, far.1, q, best);
        }
    }

    /// The `k` nearest points sorted by increasing distance: `(squared distance, index)`.
    pub fn k_nearest(&self, q: &[f64], k: usize) -> Vec<(f64, usize)> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, self.len(), q, k, &mut heap);
        }
        heap.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        heap
    }

    fn knn_rec(&self, lo: usize, hi: usize, q: &[f64], k: usize, heap: &mut Vec<(f64, usize)>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d2 = self.d2(i, q);
        let worst = |h: &Vec<(f64, usize)>| {
            h.iter()
                .map(|e| e.0)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        if heap.len() < k {
            heap.push((d2, i));
        } else if d2 < worst(heap) {
            let pos = heap
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(p, _)| p)
                .unwrap_or(0);
            heap[pos] = (d2, i);
        }
        if hi - lo == 1 {
            return;
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.coord(i, ax);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, q, k, heap);
        if heap.len() < k || diff * diff <= worst(heap) {
            self.knn_rec(far.0, far.1, q, k, heap);
        }
    }

    /// Visit every point within distance `r` (closed ball) of `q`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], r: f64, mut f: F) {
        let r2 = r * r;
        self.within_rec(0, self.len(), q, r2, &mut f);
    }

    fn within_rec<F: FnMut(usize, f64)>(&self, lo: usize, hi: usize, q: &[f64], r2: f64, f: &mut F) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d2 = self.d2(i, q);
        if d2 <= r2 {
            f(i, d2);
        }
        if hi - lo == 1 {
            return;
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.coord(i, ax);
        if diff < 0.0 || diff * diff <= r2 {
            self.within_rec(lo, mid, q, r2, f);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_rec(mid + 1, hi, q, r2, f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(rows: &[Vec<f64>], q: &[f64]) -> f64 {
        rows.iter()
            .map(|p| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let tree = KdTree::from_rows(&rows);
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (_, d2) = tree.nearest(&q).unwrap();
            assert!((d2 - brute_nearest(&rows, &q)).abs() < 1e-15);
            let knn = tree.k_nearest(&q, 5);
            assert_eq!(knn.len(), 5);
            assert!((knn[0].0 - d2).abs() < 1e-15);
            let mut count = 0;
            tree.for_each_within(&q, 0.4, |_, _| count += 1);
            let brute = rows
                .iter()
                .filter(|p| p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= 0.16)
                .count();
            assert_eq!(count, brute);
        }
    }
}
