//! Affine subspaces, projections, regions and Hausdorff distance.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm_sq, sub};
use crate::par;
use crate::spatial::KdTree;

/// Default absolute tolerance for geometric predicates.
pub const TOL: f64 = 1e-9;

/// Affine subspace `offset + span(basis)` of ℝ^ambient_dim with an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRepr", into = "SubspaceRepr")]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
    #[serde(default)]
    offset: Option<Vec<f64>>,
}

impl TryFrom<SubspaceRepr> for Subspace {
    type Error = Error;
    fn try_from(r: SubspaceRepr) -> Result<Self> {
        let offset = r.offset.unwrap_or_else(|| vec![0.0; r.ambient_dim]);
        Subspace::affine(offset, &r.basis)
    }
}

impl From<Subspace> for SubspaceRepr {
    fn from(s: Subspace) -> Self {
        SubspaceRepr {
            ambient_dim: s.ambient_dim,
            basis: s.basis,
            offset: Some(s.offset),
        }
    }
}

impl Subspace {
    /// Linear span of `vectors` (orthonormalized; dependent vectors are dropped).
    pub fn linear(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        Subspace::affine(vec![0.0; ambient_dim], vectors)
    }

    /// `offset + span(vectors)`. The stored offset is the point of the subspace
    /// nearest the origin.
    pub fn affine(offset: Vec<f64>, vectors: &[Vec<f64>]) -> Result<Self> {
        let ambient_dim = offset.len();
        for v in vectors {
            check_dim(ambient_dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite basis vector".into()));
            }
        }
        if offset.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite offset".into()));
        }
        let basis = linalg::orthonormalize(vectors, 1e-10);
        let mut s = Subspace {
            ambient_dim,
            basis,
            offset: vec![0.0; ambient_dim],
        };
        s.offset = s.perp_linear(&offset);
        Ok(s)
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Vec::new(),
            offset: vec![0.0; ambient_dim],
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: (0..ambient_dim).map(|i| linalg::unit(ambient_dim, i)).collect(),
            offset: vec![0.0; ambient_dim],
        }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Result<Self> {
        if let Some(&bad) = axes.iter().find(|&&a| a >= ambient_dim) {
            return Err(Error::InvalidInput(format!("coordinate {bad} out of range")));
        }
        let v: Vec<Vec<f64>> = axes.iter().map(|&a| linalg::unit(ambient_dim, a)).collect();
        Subspace::linear(ambient_dim, &v)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn is_linear(&self) -> bool {
        self.offset.iter().all(|&x| x == 0.0)
    }

    /// Linear part of the subspace (same directions through the origin).
    pub fn direction(&self) -> Subspace {
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: self.basis.clone(),
            offset: vec![0.0; self.ambient_dim],
        }
    }

    fn tangential_linear(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        for b in &self.basis {
            linalg::axpy(&mut out, dot(v, b), b);
        }
        out
    }

    fn perp_linear(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for _ in 0..2 {
            for b in &self.basis {
                let c = dot(&out, b);
                linalg::axpy(&mut out, -c, b);
            }
        }
        out
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim, p.len())?;
        Ok(self.project_unchecked(p))
    }

    pub(crate) fn project_unchecked(&self, p: &[f64]) -> Vec<f64> {
        let rel = sub(p, &self.offset);
        linalg::add(&self.tangential_linear(&rel), &self.offset)
    }

    /// Coordinates of the projection of `p` in the stored basis (relative to the offset).
    pub fn coords(&self, p: &[f64]) -> Vec<f64> {
        let rel = sub(p, &self.offset);
        self.basis.iter().map(|b| dot(&rel, b)).collect()
    }

    /// Point of the subspace with the given basis coordinates.
    pub fn point(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.offset.clone();
        for (c, b) in coords.iter().zip(&self.basis) {
            linalg::axpy(&mut out, *c, b);
        }
        out
    }

    /// `p − project(p)`, the normal residual.
    pub fn residual(&self, p: &[f64]) -> Vec<f64> {
        self.perp_linear(&sub(p, &self.offset))
    }

    /// Component of a direction vector orthogonal to the subspace directions.
    pub fn perp_of_vector(&self, v: &[f64]) -> Vec<f64> {
        self.perp_linear(v)
    }

    /// Component of a direction vector along the subspace directions.
    pub fn tangential_of_vector(&self, v: &[f64]) -> Vec<f64> {
        self.tangential_linear(v)
    }

    pub fn distance_sq(&self, p: &[f64]) -> f64 {
        norm_sq(&self.residual(p))
    }

    pub fn distance(&self, p: &[f64]) -> f64 {
        self.distance_sq(p).sqrt()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.ambient_dim && self.distance(p) <= tol
    }

    /// Orthogonal complement of the direction space, through the origin.
    pub fn orthogonal_complement(&self) -> Subspace {
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: linalg::complement(&self.basis, self.ambient_dim),
            offset: vec![0.0; self.ambient_dim],
        }
    }

    pub fn translated(&self, v: &[f64]) -> Result<Subspace> {
        check_dim(self.ambient_dim, v.len())?;
        Subspace::affine(linalg::add(&self.offset, v), &self.basis)
    }

    /// Image under `x ↦ R x` for an orthogonal matrix given by rows.
    pub fn rotated(&self, rot: &[Vec<f64>]) -> Result<Subspace> {
        check_dim(self.ambient_dim, rot.len())?;
        let apply = |v: &[f64]| -> Vec<f64> { rot.iter().map(|r| dot(r, v)).collect() };
        let basis: Vec<Vec<f64>> = self.basis.iter().map(|b| apply(b)).collect();
        Subspace::affine(apply(&self.offset), &basis)
    }

    /// Largest sine of the principal angles between the direction spaces
    /// (1 when dimensions differ).
    pub fn max_angle_sin(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() {
            return 1.0;
        }
        if self.dim() == 0 {
            return 0.0;
        }
        let cos = linalg::principal_cosines(&self.basis, &other.basis);
        let c = cos.last().copied().unwrap_or(1.0);
        (1.0 - c * c).max(0.0).sqrt()
    }

    /// True when the two subspaces are the same set up to `tol`.
    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.ambient_dim == other.ambient_dim
            && self.dim() == other.dim()
            && self.max_angle_sin(other) <= tol
            && linalg::dist(&self.offset, &other.offset) <= tol
    }

    /// True when `other ⊂ self` up to `tol`.
    pub fn contains_subspace(&self, other: &Subspace, tol: f64) -> bool {
        self.ambient_dim == other.ambient_dim
            && self.contains(&other.offset, tol)
            && other
                .basis
                .iter()
                .all(|b| linalg::norm(&self.perp_linear(b)) <= tol)
    }

    /// Intersection of two affine subspaces; `None` when they are disjoint.
    pub fn intersection(&self, other: &Subspace, tol: f64) -> Result<Option<Subspace>> {
        check_dim(self.ambient_dim, other.ambient_dim)?;
        let d = self.ambient_dim;
        // Directions common to both: null space of (I − P1) + (I − P2).
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = 2.0;
        }
        for b in self.basis.iter().chain(&other.basis) {
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] -= b[i] * b[j];
                }
            }
        }
        let (vals, vecs) = linalg::sym_eigen(&m, d);
        let common: Vec<Vec<f64>> = vals
            .iter()
            .zip(vecs)
            .filter(|(v, _)| v.abs() < 1e-10)
            .map(|(_, v)| v)
            .collect();
        // A point in both: solve B1 a − B2 b = o2 − o1.
        let (p, q) = (self.dim(), other.dim());
        let cols = p + q;
        let rhs = sub(&other.offset, &self.offset);
        let point = if cols == 0 {
            if linalg::norm(&rhs) > tol {
                return Ok(None);
            }
            self.offset.clone()
        } else {
            let mut a = vec![0.0; d * cols];
            for r in 0..d {
                for (c, b) in self.basis.iter().enumerate() {
                    a[r * cols + c] = b[r];
                }
                for (c, b) in other.basis.iter().enumerate() {
                    a[r * cols + p + c] = -b[r];
                }
            }
            let sol = linalg::lstsq(&a, d, cols, &rhs)
                .ok_or_else(|| Error::Degenerate("intersection solve failed".into()))?;
            let x = self.point(&sol[..p]);
            if other.distance(&x) > tol || self.distance(&x) > tol {
                return Ok(None);
            }
            x
        };
        Subspace::affine(point, &common).map(Some)
    }
}

/// Orthogonal projection of `p` onto `s`.
pub fn project(p: &[f64], s: &Subspace) -> Result<Vec<f64>> {
    s.project(p)
}

/// Regions used to restrict integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ (|x| − rho)² + |y − zeta|² < r² }` with `x`, `y` the components normal
    /// and tangential to `axis`.
    Torus { axis: Subspace, rho: f64, r: f64, zeta: Vec<f64> },
    /// Union of toric regions of common radius `r` around the generator points `(rho, zeta)`.
    Revolution { axis: Subspace, generator: Vec<(f64, Vec<f64>)>, r: f64 },
    /// `B_radius(0) ⊂ ℝⁿ` in the first `n` coordinates, times the remaining coordinates.
    Cylinder { n: usize, radius: f64 },
    /// `{ inner ≤ |X − center| < outer }`.
    Shell { center: Vec<f64>, inner: f64, outer: f64 },
    All,
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Region {
        Region::Ball { center, radius }
    }

    pub fn unit_ball(dim: usize) -> Region {
        Region::Ball { center: vec![0.0; dim], radius: 1.0 }
    }

    pub fn torus(axis: Subspace, rho: f64, r: f64, zeta: Vec<f64>) -> Result<Region> {
        if !(0.0 < r && r < rho) {
            return Err(Error::InvalidInput(format!("torus needs 0 < r < rho, got r={r}, rho={rho}")));
        }
        check_dim(axis.ambient_dim(), zeta.len())?;
        Ok(Region::Torus { axis, rho, r, zeta })
    }

    /// Radius of a ball about the origin containing the region, if bounded.
    pub fn bounding_radius(&self) -> Option<f64> {
        match self {
            Region::Ball { center, radius } => Some(linalg::norm(center) + radius),
            Region::Shell { center, outer, .. } => Some(linalg::norm(center) + outer),
            Region::Torus { axis, rho, r, zeta } => {
                Some(linalg::norm(&axis.project_unchecked(zeta)) + rho + r)
            }
            Region::Revolution { axis, generator, r } => generator
                .iter()
                .map(|(rho, z)| linalg::norm(&axis.project_unchecked(z)) + rho + r)
                .fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b)))),
            Region::Cylinder { .. } | Region::All => None,
        }
    }

    /// Membership; dimension mismatches are errors.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        match self {
            Region::Ball { center, .. } | Region::Shell { center, .. } => {
                check_dim(center.len(), p.len())?
            }
            Region::Torus { axis, .. } | Region::Revolution { axis, .. } => {
                check_dim(axis.ambient_dim(), p.len())?
            }
            Region::Cylinder { n, .. } => {
                if p.len() < *n {
                    return Err(Error::DimensionMismatch { expected: *n, got: p.len() });
                }
            }
            Region::All => {}
        }
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => linalg::dist_sq(p, center) < radius * radius,
            Region::Shell { center, inner, outer } => {
                let d = linalg::dist(p, center);
                d >= *inner && d < *outer
            }
            Region::Torus { axis, rho, r, zeta } => torus_contains(axis, *rho, *r, zeta, p),
            Region::Revolution { axis, generator, r } => generator
                .iter()
                .any(|(rho, zeta)| torus_contains(axis, *rho, *r, zeta, p)),
            Region::Cylinder { n, radius } => {
                p[..*n].iter().map(|x| x * x).sum::<f64>() < radius * radius
            }
            Region::All => true,
        }
    }
}

fn torus_contains(axis: &Subspace, rho: f64, r: f64, zeta: &[f64], p: &[f64]) -> bool {
    let x = linalg::norm(&axis.residual(p));
    let y = axis.project_unchecked(p);
    let zy = axis.project_unchecked(zeta);
    (x - rho).powi(2) + linalg::dist_sq(&y, &zy) < r * r
}

/// Membership predicate for `R`.
pub fn region_contains(r: &Region, p: &[f64]) -> Result<bool> {
    r.contains(p)
}

/// Directed distance `sup_{a∈A} inf_{b∈B} |a − b|` using a prebuilt index on `B`.
pub fn directed_distance(a: &[Vec<f64>], b: &KdTree) -> f64 {
    par::max(a.len(), |i| b.nearest(&a[i]).map_or(f64::INFINITY, |(_, d2)| d2)).sqrt()
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptySet("first set of hausdorff_distance"));
    }
    if b.is_empty() {
        return Err(Error::EmptySet("second set of hausdorff_distance"));
    }
    let dim = a[0].len();
    for p in a.iter().chain(b) {
        check_dim(dim, p.len())?;
    }
    let ta = KdTree::from_rows(a);
    let tb = KdTree::from_rows(b);
    Ok(directed_distance(a, &tb).max(directed_distance(b, &ta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let x_axis = Subspace::coordinate(2, &[0]).unwrap();
        assert_eq!(project(&[1.0, 1.0], &x_axis).unwrap(), vec![1.0, 0.0]);
        let full = Subspace::full(3);
        assert_eq!(project(&[1.0, -2.0, 3.0], &full).unwrap(), vec![1.0, -2.0, 3.0]);
        let diag = Subspace::linear(3, &[vec![1.0, 1.0, 0.0]]).unwrap();
        let p = project(&[2.0, 3.0, 5.0], &diag).unwrap();
        // oracle: ((2+3)/2)(1,1,0)
        for (a, b) in p.iter().zip([2.5, 2.5, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(project(&[1.0, 2.0], &diag).is_err());
    }

    #[test]
    fn hausdorff_singletons_and_empty() {
        assert_eq!(hausdorff_distance(&[vec![0.0]], &[vec![3.0]]).unwrap(), 3.0);
        assert!(hausdorff_distance(&[], &[vec![3.0]]).is_err());
    }

    #[test]
    fn torus_examples() {
        let axis = Subspace::coordinate(3, &[2]).unwrap();
        let t = Region::torus(axis, 0.5, 0.25, vec![0.0; 3]).unwrap();
        assert!(t.contains(&[0.5, 0.0, 0.0]).unwrap());
        assert!(!t.contains(&[0.0, 0.0, 0.1]).unwrap());
        assert!(Region::torus(Subspace::zero(3), 0.25, 0.5, vec![0.0; 3]).is_err());
    }

    #[test]
    fn intersections() {
        let p1 = Subspace::coordinate(3, &[0, 1]).unwrap();
        let p2 = Subspace::coordinate(3, &[1, 2]).unwrap();
        let i = p1.intersection(&p2, 1e-9).unwrap().unwrap();
        assert_eq!(i.dim(), 1);
        assert!(i.contains(&[0.0, 7.0, 0.0], 1e-12));
        let lifted = p1.translated(&[0.0, 0.0, 1.0]).unwrap();
        assert!(p1.intersection(&lifted, 1e-9).unwrap().is_none());
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let s = Subspace::linear(3, &[vec![1.0, 1.0, 0.0]]).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: Subspace = serde_json::from_str(&j).unwrap();
        assert!(back.same_as(&s, 1e-15));
    }
}
