//! Unions of planes and half-planes: axes, spines, alignment, support distance and ν.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Subspace, TOL};
use crate::linalg::{self, dot, norm, norm_sq, sub};
use crate::par;
use crate::quasi;
use crate::spatial::KdTree;
use crate::twovalued::Pair2;

/// `{ p ∈ plane : ⟨p − o, side⟩ ≥ 0 }` where `o` is the offset of `boundary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    plane: Subspace,
    boundary: Subspace,
    side: Vec<f64>,
}

impl HalfPlane {
    /// Half-plane bounded by `boundary` extending in the direction `side`
    /// (the component of `side` orthogonal to `boundary` is used).
    pub fn new(boundary: Subspace, side: &[f64]) -> Result<HalfPlane> {
        check_dim(boundary.ambient_dim(), side.len())?;
        let s = linalg::normalized(&boundary.perp_of_vector(side))
            .ok_or_else(|| Error::Degenerate("half-plane side lies in its boundary".into()))?;
        let mut dirs = boundary.basis().to_vec();
        dirs.push(s.clone());
        let plane = Subspace::affine(boundary.offset().to_vec(), &dirs)?;
        Ok(HalfPlane { plane, boundary, side: s })
    }

    pub fn plane(&self) -> &Subspace {
        &self.plane
    }

    pub fn boundary(&self) -> &Subspace {
        &self.boundary
    }

    pub fn side(&self) -> &[f64] {
        &self.side
    }

    /// Signed coordinate of `p` along the side direction.
    pub fn side_coord(&self, p: &[f64]) -> f64 {
        dot(&sub(p, self.boundary.offset()), &self.side)
    }

    pub fn dist_sq(&self, p: &[f64]) -> f64 {
        let normal = self.plane.distance_sq(p);
        let t = self.side_coord(p);
        if t >= 0.0 {
            normal
        } else {
            normal + t * t
        }
    }

    fn map(&self, f: &dyn Fn(&Subspace) -> Result<Subspace>, rot: Option<&[Vec<f64>]>) -> Result<HalfPlane> {
        let boundary = f(&self.boundary)?;
        let side = match rot {
            Some(r) => r.iter().map(|row| dot(row, &self.side)).collect(),
            None => self.side.clone(),
        };
        HalfPlane::new(boundary, &side)
    }
}

/// Structural class of a cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeClass {
    /// Two planes with empty intersection.
    PairDisjoint,
    /// Two planes meeting in a subspace of dimension at most n − 2.
    PairLowAxis,
    /// Two planes meeting in an (n−1)-dimensional subspace.
    PairCodimOneAxis,
    FourHalfPlanes,
    Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ConeKind {
    PairOfPlanes { p1: Subspace, p2: Subspace },
    FourHalfPlanes { half_planes: Vec<HalfPlane> },
    Plane { plane: Subspace, multiplicity: u32 },
}

/// A pair of distinct planes, four half-planes with a common boundary, or a
/// single plane with multiplicity. Planes may be affine (translated cones).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeRepr", into = "ConeRepr")]
pub struct Cone {
    n: usize,
    k: usize,
    kind: ConeKind,
    axis: Option<Subspace>,
}

#[derive(Serialize, Deserialize)]
struct ConeRepr {
    n: usize,
    k: usize,
    #[serde(flatten)]
    kind: ConeKind,
}

impl TryFrom<ConeRepr> for Cone {
    type Error = Error;
    fn try_from(r: ConeRepr) -> Result<Cone> {
        let c = match r.kind {
            ConeKind::PairOfPlanes { p1, p2 } => Cone::pair(p1, p2)?,
            ConeKind::FourHalfPlanes { half_planes } => {
                let hp: [HalfPlane; 4] = half_planes
                    .try_into()
                    .map_err(|_| Error::InvalidInput("need exactly four half-planes".into()))?;
                Cone::four_half_planes(hp)?
            }
            ConeKind::Plane { plane, multiplicity } => Cone::plane(plane, multiplicity)?,
        };
        if c.n != r.n || c.k != r.k {
            return Err(Error::InvalidInput("declared n, k disagree with the planes".into()));
        }
        Ok(c)
    }
}

impl From<Cone> for ConeRepr {
    fn from(c: Cone) -> Self {
        ConeRepr { n: c.n, k: c.k, kind: c.kind }
    }
}

/// One plane or half-plane of a cone with its multiplicity.
#[derive(Debug, Clone, Copy)]
pub enum Piece<'a> {
    Plane(&'a Subspace, u32),
    Half(&'a HalfPlane),
}

impl Piece<'_> {
    pub fn plane(&self) -> &Subspace {
        match self {
            Piece::Plane(p, _) => p,
            Piece::Half(h) => h.plane(),
        }
    }

    pub fn multiplicity(&self) -> u32 {
        match self {
            Piece::Plane(_, m) => *m,
            Piece::Half(_) => 1,
        }
    }

    pub fn dist_sq(&self, p: &[f64]) -> f64 {
        match self {
            Piece::Plane(s, _) => s.distance_sq(p),
            Piece::Half(h) => h.dist_sq(p),
        }
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.dist_sq(p) <= tol * tol
    }
}

/// A piece written as a graph `x ↦ M x + c` over ℝⁿ × {0}, with an optional
/// half-space constraint `⟨x, normal⟩ ≥ threshold` for half-planes.
#[derive(Debug, Clone)]
pub struct GraphPiece {
    /// k×n matrix, row-major.
    pub m: Vec<f64>,
    pub c: Vec<f64>,
    pub constraint: Option<(Vec<f64>, f64)>,
    pub multiplicity: u32,
    /// Area element `√det(I + MᵀM)`.
    pub jacobian: f64,
}

impl GraphPiece {
    pub fn covers(&self, x: &[f64]) -> bool {
        match &self.constraint {
            None => true,
            Some((nrm, t)) => dot(x, nrm) >= *t,
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..self.c.len())
            .map(|r| self.c[r] + (0..n).map(|j| self.m[r * n + j] * x[j]).sum::<f64>())
            .collect()
    }
}

/// Orthonormal frame placing the axis of a cone in the last `m` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentFrame {
    /// Rows form the new orthonormal basis: first the axis complement, then the axis.
    pub rotation: Vec<Vec<f64>>,
    pub m: usize,
    pub l: usize,
    /// Cross-section directions of the half-planes (four half-plane cones only).
    pub omegas: Vec<Vec<f64>>,
}

impl AlignmentFrame {
    /// Coordinates of `p` in the frame.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.rotation.iter().map(|r| dot(r, p)).collect()
    }

    /// Inverse of [`AlignmentFrame::apply`].
    pub fn unapply(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; q.len()];
        for (row, &c) in self.rotation.iter().zip(q) {
            linalg::axpy(&mut out, c, row);
        }
        out
    }
}

fn reject_coincident(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.same_as(b, 1e-12) {
        return Err(Error::Degenerate("coinciding planes".into()));
    }
    Ok(())
}

impl Cone {
    /// `|P1| + |P2|` for distinct n-planes in the same ambient space.
    pub fn pair(p1: Subspace, p2: Subspace) -> Result<Cone> {
        check_dim(p1.ambient_dim(), p2.ambient_dim())?;
        check_dim(p1.dim(), p2.dim())?;
        let n = p1.dim();
        if n == 0 || n >= p1.ambient_dim() {
            return Err(Error::InvalidInput("planes need 0 < n < ambient dimension".into()));
        }
        reject_coincident(&p1, &p2)?;
        let axis = p1.intersection(&p2, 1e-10)?;
        let k = p1.ambient_dim() - n;
        Ok(Cone { n, k, kind: ConeKind::PairOfPlanes { p1, p2 }, axis })
    }

    /// Four half-planes sharing one (n−1)-dimensional boundary.
    pub fn four_half_planes(hp: [HalfPlane; 4]) -> Result<Cone> {
        let b = hp[0].boundary().clone();
        let amb = b.ambient_dim();
        let n = b.dim() + 1;
        if n >= amb {
            return Err(Error::InvalidInput("half-planes need n < ambient dimension".into()));
        }
        for h in &hp[1..] {
            if !h.boundary().same_as(&b, 1e-10) {
                return Err(Error::InvalidInput("half-planes must share their boundary".into()));
            }
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if linalg::dist(hp[i].side(), hp[j].side()) < 1e-12 {
                    return Err(Error::Degenerate("coinciding half-planes".into()));
                }
            }
        }
        Ok(Cone {
            n,
            k: amb - n,
            kind: ConeKind::FourHalfPlanes { half_planes: hp.to_vec() },
            axis: Some(b),
        })
    }

    /// Four half-planes with common boundary `axis` in the directions `omegas`.
    pub fn from_axis_and_sides(axis: Subspace, omegas: &[Vec<f64>; 4]) -> Result<Cone> {
        let hp: Vec<HalfPlane> = omegas
            .iter()
            .map(|w| HalfPlane::new(axis.clone(), w))
            .collect::<Result<_>>()?;
        Cone::four_half_planes(hp.try_into().expect("four half-planes"))
    }

    /// A single plane counted `multiplicity` times.
    pub fn plane(plane: Subspace, multiplicity: u32) -> Result<Cone> {
        let n = plane.dim();
        if n == 0 || n >= plane.ambient_dim() || multiplicity == 0 {
            return Err(Error::InvalidInput("plane needs 0 < n < ambient and multiplicity ≥ 1".into()));
        }
        let k = plane.ambient_dim() - n;
        Ok(Cone { n, k, axis: Some(plane.clone()), kind: ConeKind::Plane { plane, multiplicity } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + self.k
    }

    pub fn class(&self) -> ConeClass {
        match &self.kind {
            ConeKind::Plane { .. } => ConeClass::Plane,
            ConeKind::FourHalfPlanes { .. } => ConeClass::FourHalfPlanes,
            ConeKind::PairOfPlanes { .. } => match &self.axis {
                None => ConeClass::PairDisjoint,
                Some(a) if a.dim() + 1 == self.n => ConeClass::PairCodimOneAxis,
                Some(_) => ConeClass::PairLowAxis,
            },
        }
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.kind, ConeKind::PairOfPlanes { .. })
    }

    /// The two planes of a pair.
    pub fn planes(&self) -> Option<(&Subspace, &Subspace)> {
        match &self.kind {
            ConeKind::PairOfPlanes { p1, p2 } => Some((p1, p2)),
            _ => None,
        }
    }

    pub fn half_planes(&self) -> Option<&[HalfPlane]> {
        match &self.kind {
            ConeKind::FourHalfPlanes { half_planes } => Some(half_planes),
            _ => None,
        }
    }

    pub fn pieces(&self) -> Vec<Piece<'_>> {
        match &self.kind {
            ConeKind::PairOfPlanes { p1, p2 } => vec![Piece::Plane(p1, 1), Piece::Plane(p2, 1)],
            ConeKind::FourHalfPlanes { half_planes } => half_planes.iter().map(Piece::Half).collect(),
            ConeKind::Plane { plane, multiplicity } => vec![Piece::Plane(plane, *multiplicity)],
        }
    }

    /// `A(C)`: the intersection of the planes, the common boundary of the
    /// half-planes, or the plane itself. `None` for disjoint planes.
    pub fn axis(&self) -> Option<&Subspace> {
        self.axis.as_ref()
    }

    pub fn axis_dim(&self) -> Option<usize> {
        self.axis.as_ref().map(|a| a.dim())
    }

    /// `r_C(X) = dist(X, A(C))`.
    pub fn r(&self, x: &[f64]) -> Result<f64> {
        let a = self.axis.as_ref().ok_or_else(|| Error::Degenerate("cone has empty axis".into()))?;
        check_dim(a.ambient_dim(), x.len())?;
        Ok(a.distance(x))
    }

    pub fn dist_sq_to_support(&self, x: &[f64]) -> f64 {
        self.pieces().iter().map(|p| p.dist_sq(x)).fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the support of the cone.
    pub fn dist_to_support(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.ambient_dim(), x.len())?;
        Ok(self.dist_sq_to_support(x).sqrt())
    }

    pub fn passes_through_origin(&self) -> bool {
        let z = vec![0.0; self.ambient_dim()];
        self.pieces().iter().all(|p| p.contains(&z, TOL))
    }

    /// `S(C)`, the set of points of maximal density.
    pub fn spine(&self) -> Result<Subspace> {
        if !self.passes_through_origin() {
            return Err(Error::InvalidInput("spine needs a cone through the origin".into()));
        }
        Ok(self.axis.clone().expect("cones through the origin have an axis"))
    }

    /// Frame with the axis in the last `m` coordinates.
    pub fn align(&self) -> Result<AlignmentFrame> {
        let axis = self
            .axis
            .as_ref()
            .ok_or_else(|| Error::Degenerate("cone with empty axis has no cylindrical structure".into()))?;
        let d = self.ambient_dim();
        let proj: Vec<Vec<f64>> = (0..d)
            .map(|i| axis.tangential_of_vector(&linalg::unit(d, i)))
            .collect();
        let axis_rows = linalg::orthonormalize(&proj, 1e-8);
        let mut rotation = linalg::complement(&axis_rows, d);
        let m = axis_rows.len();
        rotation.extend(axis_rows);
        let omegas = self
            .half_planes()
            .map(|hp| hp.iter().map(|h| h.side().to_vec()).collect())
            .unwrap_or_default();
        Ok(AlignmentFrame { rotation, m, l: self.n - m.min(self.n), omegas })
    }

    /// The piece containing `x` (nearest piece), used for local tangent planes.
    pub fn nearest_piece(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.pieces().iter().enumerate() {
            let d = p.dist_sq(x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Image of the cone under `X ↦ R X` (rows of an orthogonal matrix).
    pub fn rotated(&self, rot: &[Vec<f64>]) -> Result<Cone> {
        self.map_subspaces(&|s| s.rotated(rot), Some(rot))
    }

    pub fn translated(&self, v: &[f64]) -> Result<Cone> {
        self.map_subspaces(&|s| s.translated(v), None)
    }

    /// Image under `X ↦ (X − center)/rho`.
    pub fn rescaled(&self, center: &[f64], rho: f64) -> Result<Cone> {
        check_dim(self.ambient_dim(), center.len())?;
        self.map_subspaces(
            &|s| {
                let o: Vec<f64> = sub(s.offset(), center).iter().map(|v| v / rho).collect();
                Subspace::affine(o, s.basis())
            },
            None,
        )
    }

    fn map_subspaces(&self, f: &dyn Fn(&Subspace) -> Result<Subspace>, rot: Option<&[Vec<f64>]>) -> Result<Cone> {
        match &self.kind {
            ConeKind::PairOfPlanes { p1, p2 } => Cone::pair(f(p1)?, f(p2)?),
            ConeKind::FourHalfPlanes { half_planes } => {
                let hp: Vec<HalfPlane> = half_planes.iter().map(|h| h.map(f, rot)).collect::<Result<_>>()?;
                Cone::four_half_planes(hp.try_into().expect("four"))
            }
            ConeKind::Plane { plane, multiplicity } => Cone::plane(f(plane)?, *multiplicity),
        }
    }

    /// Pieces written as graphs over ℝⁿ × {0}; fails if some plane is vertical.
    pub fn graph_pieces(&self) -> Result<Vec<GraphPiece>> {
        let (n, k) = (self.n, self.k);
        self.pieces()
            .iter()
            .map(|piece| {
                let plane = piece.plane();
                // Basis matrix B (N×n): top block Bx (n×n), bottom By (k×n).
                let b = plane.basis();
                let bx = nalgebra::DMatrix::from_fn(n, n, |i, j| b[j][i]);
                let by = nalgebra::DMatrix::from_fn(k, n, |i, j| b[j][n + i]);
                let inv = bx
                    .try_inverse()
                    .filter(|m| m.iter().all(|v| v.is_finite() && v.abs() < 1e8))
                    .ok_or_else(|| Error::Degenerate("plane is not a graph over ℝⁿ".into()))?;
                let mm = &by * &inv;
                let o = plane.offset();
                let ox = nalgebra::DVector::from_column_slice(&o[..n]);
                let c: Vec<f64> = (0..k).map(|r| o[n + r] - (mm.row(r) * &ox)[0]).collect();
                let m: Vec<f64> = (0..k).flat_map(|r| (0..n).map(move |j| (r, j))).map(|(r, j)| mm[(r, j)]).collect();
                let g = nalgebra::DMatrix::identity(n, n) + mm.transpose() * &mm;
                let jacobian = g.determinant().sqrt();
                let constraint = match piece {
                    Piece::Plane(..) => None,
                    Piece::Half(h) => {
                        let s = h.side();
                        let mut nrm = s[..n].to_vec();
                        for j in 0..n {
                            for r in 0..k {
                                nrm[j] += m[r * n + j] * s[n + r];
                            }
                        }
                        let t = dot(h.boundary().offset(), s) - dot(&c, &s[n..]);
                        Some((nrm, t))
                    }
                };
                Ok(GraphPiece { m, c, constraint, multiplicity: piece.multiplicity(), jacobian })
            })
            .collect()
    }

    /// Two-valued graph value of the cone over `x ∈ ℝⁿ`.
    pub fn graph_values(&self, x: &[f64]) -> Result<Pair2> {
        check_dim(self.n, x.len())?;
        let pieces = self.graph_pieces()?;
        graph_values_from(&pieces, x)
    }

    /// Quasi-random points of `spt‖C‖ ∩ B̄_radius(0)`, about `count` per piece,
    /// including points on the bounding sphere and on half-plane boundaries.
    pub fn support_samples(&self, radius: f64, count: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for piece in self.pieces() {
            let plane = piece.plane();
            let r2 = radius * radius - norm_sq(plane.offset());
            if r2 < 0.0 {
                continue;
            }
            let pr = r2.sqrt();
            let keep = |p: &Vec<f64>| match piece {
                Piece::Half(h) => h.side_coord(p) >= 0.0,
                _ => true,
            };
            let factor = if matches!(piece, Piece::Half(_)) { 2 } else { 1 };
            for c in quasi::ball_points(plane.dim(), pr, factor * count) {
                let p = plane.point(&c);
                if keep(&p) {
                    out.push(p);
                }
            }
            if let Piece::Half(h) = piece {
                let b = h.boundary();
                let rb2 = radius * radius - norm_sq(b.offset());
                if rb2 >= 0.0 {
                    for c in quasi::ball_points(b.dim(), rb2.sqrt(), count / 4 + 1) {
                        out.push(b.point(&c));
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn graph_values_from(pieces: &[GraphPiece], x: &[f64]) -> Result<Pair2> {
    // (margin, piece); points on a shared boundary within rounding are counted once per pair
    let scale = 1e-12 * (1.0 + norm_sq(x).sqrt());
    let mut hits: Vec<(f64, &GraphPiece)> = pieces
        .iter()
        .map(|p| match &p.constraint {
            None => (f64::INFINITY, p),
            Some((nrm, t)) => (dot(x, nrm) - t, p),
        })
        .filter(|(margin, _)| *margin >= -scale)
        .collect();
    hits.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut vals = Vec::new();
    for (margin, p) in &hits {
        for _ in 0..p.multiplicity {
            if vals.len() == 2 {
                if *margin > scale {
                    return Err(Error::NotGraphical("more than 2 sheets over the point".into()));
                }
                continue;
            }
            vals.push(p.value(x));
        }
    }
    if vals.len() != 2 {
        return Err(Error::NotGraphical(format!("{} sheets over the point", vals.len())));
    }
    let b = vals.pop().expect("two");
    let a = vals.pop().expect("two");
    Ok(Pair2::new(a, b))
}

/// Nearest point of `piece ∩ B̄_radius(0)` to `x`.
fn nearest_in_ball(piece: &Piece, x: &[f64], radius: f64) -> Option<Vec<f64>> {
    let plane = piece.plane();
    let center = plane.offset().to_vec();
    let r2 = radius * radius - norm_sq(&center);
    if r2 < 0.0 {
        return None;
    }
    let rd = r2.sqrt();
    let clamp_disk = |p: Vec<f64>, c: &[f64], r: f64| -> Vec<f64> {
        let d = sub(&p, c);
        let l = norm(&d);
        if l <= r {
            p
        } else {
            linalg::add(c, &linalg::scale(&d, r / l))
        }
    };
    let q = plane.project_unchecked(x);
    match piece {
        Piece::Plane(..) => Some(clamp_disk(q, &center, rd)),
        Piece::Half(h) => {
            let in_h = |p: &[f64]| h.side_coord(p) >= -1e-15;
            let in_d = |p: &[f64]| linalg::dist(p, &center) <= rd * (1.0 + 1e-15);
            let mut cands = Vec::new();
            let pd = clamp_disk(q.clone(), &center, rd);
            if in_h(&pd) {
                cands.push(pd);
            }
            let t = h.side_coord(&q);
            let ph = if t < 0.0 { linalg::add(&q, &linalg::scale(h.side(), -t)) } else { q.clone() };
            if in_d(&ph) {
                cands.push(ph.clone());
            }
            // Segment of the boundary inside the disk.
            let b = h.boundary();
            let cb = b.project_unchecked(&center);
            let rb2 = rd * rd - linalg::dist_sq(&cb, &center);
            if rb2 >= 0.0 {
                let pb = b.project_unchecked(&ph);
                cands.push(clamp_disk(pb, &cb, rb2.sqrt()));
            }
            cands
                .into_iter()
                .min_by(|a, b| linalg::dist_sq(a, x).partial_cmp(&linalg::dist_sq(b, x)).unwrap_or(std::cmp::Ordering::Equal))
        }
    }
}

/// Distance from `x` to `spt‖C‖ ∩ B̄_radius(0)`.
pub fn dist_to_support_in_ball(c: &Cone, x: &[f64], radius: f64) -> f64 {
    c.pieces()
        .iter()
        .filter_map(|p| nearest_in_ball(p, x, radius))
        .map(|q| linalg::dist_sq(&q, x))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Minimum per-piece sample count accepted by [`nu`].
pub const NU_MIN_SAMPLES: usize = 100;

/// `ν_{C,D}`: Hausdorff distance between `spt‖C‖ ∩ B₂(0)` and `spt‖D‖ ∩ B₂(0)`,
/// from quasi-random samples of each support against the exact other support.
pub fn nu(c: &Cone, d: &Cone, samples: usize) -> Result<f64> {
    check_dim(c.ambient_dim(), d.ambient_dim())?;
    if samples < NU_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: NU_MIN_SAMPLES, got: samples });
    }
    let directed = |a: &Cone, b: &Cone| -> Result<f64> {
        let pts = a.support_samples(2.0, samples);
        if pts.is_empty() {
            return Err(Error::EmptySet("cone support inside B₂"));
        }
        Ok(par::max(pts.len(), |i| dist_to_support_in_ball(b, &pts[i], 2.0)))
    };
    let v = directed(c, d)?.max(directed(d, c)?);
    if !v.is_finite() {
        return Err(Error::EmptySet("cone support inside B₂"));
    }
    Ok(v)
}

/// Fully discrete ν: Hausdorff distance between sample clouds of both supports.
pub fn nu_sampled(c: &Cone, d: &Cone, samples: usize) -> Result<f64> {
    if samples < NU_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: NU_MIN_SAMPLES, got: samples });
    }
    let a = c.support_samples(2.0, samples);
    let b = d.support_samples(2.0, samples);
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet("cone support inside B₂"));
    }
    let ta = KdTree::from_rows(&a);
    let tb = KdTree::from_rows(&b);
    Ok(crate::geometry::directed_distance(&a, &tb).max(crate::geometry::directed_distance(&b, &ta)))
}

/// Linear n-plane spanned by the columns of `[I; M]` for a k×n matrix `m` (row-major).
pub fn graph_plane(n: usize, k: usize, m: &[f64]) -> Result<Subspace> {
    check_dim(n * k, m.len())?;
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut v = linalg::unit(n + k, j);
            for r in 0..k {
                v[n + r] = m[r * n + j];
            }
            v
        })
        .collect();
    Subspace::linear(n + k, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(angle: f64) -> Subspace {
        Subspace::linear(2, &[vec![angle.cos(), angle.sin()]]).unwrap()
    }

    #[test]
    fn support_distance_examples() {
        let c = Cone::pair(line(std::f64::consts::FRAC_PI_4), line(-std::f64::consts::FRAC_PI_4)).unwrap();
        assert!((c.dist_to_support(&[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let h = HalfPlane::new(Subspace::zero(2), &[1.0, 0.0]).unwrap();
        assert_eq!(h.dist_sq(&[-3.0, 4.0]), 25.0);
    }

    #[test]
    fn coincident_planes_rejected() {
        assert!(Cone::pair(line(0.3), line(0.3)).is_err());
    }

    #[test]
    fn parallel_planes_have_empty_axis() {
        let p = Subspace::coordinate(3, &[0, 1]).unwrap();
        let q = p.translated(&[0.0, 0.0, 1.0]).unwrap();
        let c = Cone::pair(p, q).unwrap();
        assert!(c.axis().is_none());
        assert_eq!(c.class(), ConeClass::PairDisjoint);
        assert!(c.align().is_err());
    }

    #[test]
    fn nu_of_two_lines_matches_extremal_point() {
        let theta: f64 = 0.3;
        let a = Cone::plane(line(0.0), 2).unwrap();
        let b = Cone::pair(line(0.0), line(theta)).unwrap();
        // The far endpoint (2,0)·(cos θ, sin θ) is at distance 2 sin θ from the x-axis.
        let v = nu(&a, &b, 400).unwrap();
        assert!((v - 2.0 * theta.sin()).abs() < 1e-12, "{v}");
        assert!(nu(&a, &b, 50).is_err());
    }

    #[test]
    fn graph_values_of_crossing_lines() {
        let c = Cone::pair(line(0.0), line(std::f64::consts::FRAC_PI_4)).unwrap();
        let v = c.graph_values(&[2.0]).unwrap();
        assert!((v.a1()[0]).abs() < 1e-12 && (v.a2()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let h: [HalfPlane; 4] = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, -1.0, 1.0]]
            .map(|s| HalfPlane::new(Subspace::zero(3), &s).unwrap());
        let c = Cone::four_half_planes(h).unwrap();
        let j = serde_json::to_string(&c).unwrap();
        let back: Cone = serde_json::from_str(&j).unwrap();
        assert_eq!(back, c);
    }
}
