//! Low-discrepancy (Halton) sequences used to sample cone supports.

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// The `i`-th Halton point in `[0,1)^dim` (skipping index 0), shifted by a
/// Cranley–Patterson rotation `shift` (use zeros for the plain sequence).
pub fn halton(i: u64, dim: usize, shift: &[f64]) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension too large");
    (0..dim)
        .map(|d| {
            let v = radical_inverse(i + 1, PRIMES[d]) + shift.get(d).copied().unwrap_or(0.0);
            v - v.floor()
        })
        .collect()
}

/// `count` quasi-random points in the closed `dim`-ball of radius `radius`, plus
/// `count` points on its boundary sphere; rejection from the cube.
pub fn ball_points(dim: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    if dim == 0 {
        return vec![Vec::new()];
    }
    let mut interior = Vec::with_capacity(count);
    let mut boundary = Vec::with_capacity(count);
    let mut i = 0u64;
    let cap = 64 * count as u64 + 1024;
    while (interior.len() < count || boundary.len() < count) && i < cap {
        let u = halton(i, dim, &[]);
        i += 1;
        let p: Vec<f64> = u.iter().map(|x| (2.0 * x - 1.0) * radius).collect();
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r <= radius {
            if interior.len() < count {
                interior.push(p.clone());
            }
            if boundary.len() < count && r > 1e-12 {
                boundary.push(p.iter().map(|x| x * radius / r).collect());
            }
        }
    }
    if dim == 1 {
        boundary = vec![vec![radius], vec![-radius]];
    }
    interior.extend(boundary);
    interior
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_prefix() {
        let xs: Vec<f64> = (0..3).map(|i| halton(i, 1, &[])[0]).collect();
        assert_eq!(xs, vec![0.5, 0.25, 0.75]);
    }

    #[test]
    fn ball_points_stay_inside() {
        let pts = ball_points(3, 2.0, 200);
        assert_eq!(pts.len(), 400);
        assert!(pts.iter().all(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 2.0 + 1e-12));
    }
}
