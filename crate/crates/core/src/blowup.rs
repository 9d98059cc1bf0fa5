//! Fields over cones, the linearized class ℋ(C⁽⁰⁾), dehomogenization and
//! harmonicity/homogeneity diagnostics for blow-up candidates.

use serde::{Deserialize, Serialize};

use crate::cones::{Cone, Piece};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Region;
use crate::linalg::{self, dot};
use crate::par;

/// Lattice chart of one plane or half-plane of a cone through the origin.
#[derive(Debug, Clone)]
pub struct Chart {
    /// n orthonormal rows; for half-planes the boundary basis followed by the side.
    pub basis: Vec<Vec<f64>>,
    /// Orthonormal basis of the normal space.
    pub normals: Vec<Vec<f64>>,
    pub half: bool,
    pub multiplicity: u32,
    cells: i64,
    table: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Chart {
    fn extent(&self, d: usize) -> (i64, i64) {
        if self.half && d + 1 == self.basis.len() {
            (0, self.cells)
        } else {
            (-self.cells, self.cells)
        }
    }

    fn slot(&self, idx: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for (d, &i) in idx.iter().enumerate() {
            let (lo, hi) = self.extent(d);
            if i < lo || i >= hi {
                return None;
            }
            flat = flat * (hi - lo) as usize + (i - lo) as usize;
        }
        Some(flat)
    }

    fn node(&self, idx: &[i64]) -> Option<usize> {
        self.slot(idx).map(|s| self.table[s]).filter(|&v| v != ABSENT).map(|v| v as usize)
    }

    fn point(&self, coords: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.basis[0].len()];
        for (e, c) in self.basis.iter().zip(coords) {
            linalg::axpy(&mut p, *c, e);
        }
        p
    }

    fn normal_part(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for nu in &self.normals {
            linalg::axpy(&mut out, dot(nu, v), nu);
        }
        out
    }
}

/// Samples of a field `v: spt‖C⁽⁰⁾‖ ∩ B_radius → C⁽⁰⁾^⊥` on cell-centred
/// lattices of spacing `h` in each piece (Cartesian on planes, `(y, s)` on
/// half-planes with `s > 0` the distance to the boundary).
#[derive(Debug, Clone)]
pub struct ConeField {
    cone: Cone,
    h: f64,
    radius: f64,
    charts: Vec<Chart>,
    node_chart: Vec<u32>,
    node_index: Vec<i64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    cone: Cone,
    h: f64,
    radius: f64,
    values: Vec<Vec<f64>>,
}

impl Serialize for ConeField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRepr {
            cone: self.cone.clone(),
            h: self.h,
            radius: self.radius,
            values: (0..self.len()).map(|i| self.value(i).to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConeField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FieldRepr::deserialize(d)?;
        ConeField::from_values(r.cone, r.h, r.radius, r.values).map_err(serde::de::Error::custom)
    }
}

impl ConeField {
    /// Zero field on the lattice.
    pub fn new(cone: Cone, h: f64, radius: f64) -> Result<ConeField> {
        if !(h > 0.0 && radius > h) {
            return Err(Error::InvalidInput("need 0 < h < radius".into()));
        }
        if !cone.passes_through_origin() {
            return Err(Error::InvalidInput("cone fields need a cone through the origin".into()));
        }
        let axis = cone
            .axis()
            .ok_or_else(|| Error::Degenerate("cone with empty axis".into()))?
            .clone();
        let n = cone.n();
        let dim = cone.ambient_dim();
        let cells = (radius / h).ceil() as i64;
        if (2 * cells as u128).pow(n as u32) > (1u128 << 28) {
            return Err(Error::InvalidInput("cone field lattice too large".into()));
        }
        let mut charts = Vec::new();
        let mut node_chart = Vec::new();
        let mut node_index = Vec::new();
        for (ci, piece) in cone.pieces().iter().enumerate() {
            let (basis, half) = match piece {
                Piece::Plane(p, _) => (p.basis().to_vec(), false),
                Piece::Half(hp) => {
                    let mut b = hp.boundary().basis().to_vec();
                    b.push(hp.side().to_vec());
                    (b, true)
                }
            };
            let normals = linalg::complement(&basis, dim);
            let mut chart = Chart { basis, normals, half, multiplicity: piece.multiplicity(), cells, table: Vec::new() };
            let size: usize = (0..n).map(|d| {
                let (lo, hi) = chart.extent(d);
                (hi - lo) as usize
            }).product();
            chart.table = vec![ABSENT; size];
            let mut idx: Vec<i64> = (0..n).map(|d| chart.extent(d).0).collect();
            'outer: loop {
                let coords: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * h).collect();
                let p = chart.point(&coords);
                if linalg::norm_sq(&p) < radius * radius && axis.distance(&p) > 0.0 {
                    let slot = chart.slot(&idx).expect("in range");
                    chart.table[slot] = node_chart.len() as u32;
                    node_chart.push(ci as u32);
                    node_index.extend_from_slice(&idx);
                }
                for d in (0..n).rev() {
                    idx[d] += 1;
                    if idx[d] < chart.extent(d).1 {
                        continue 'outer;
                    }
                    idx[d] = chart.extent(d).0;
                }
                break;
            }
            charts.push(chart);
        }
        let len = node_chart.len();
        Ok(ConeField { cone, h, radius, charts, node_chart, node_index, values: vec![0.0; len * dim] })
    }

    /// Field with values `f(X, piece)` projected onto the normal space of the piece.
    pub fn from_fn<F>(cone: Cone, h: f64, radius: f64, f: F) -> Result<ConeField>
    where
        F: Fn(&[f64], usize) -> Vec<f64> + Sync,
    {
        let mut field = ConeField::new(cone, h, radius)?;
        field.fill(|x, c, _| f(x, c))?;
        Ok(field)
    }

    /// Field from explicit node values (in node order); each value must be
    /// normal to its piece.
    pub fn from_values(cone: Cone, h: f64, radius: f64, values: Vec<Vec<f64>>) -> Result<ConeField> {
        let mut field = ConeField::new(cone, h, radius)?;
        check_dim(field.len(), values.len())?;
        let dim = field.cone.ambient_dim();
        for (i, v) in values.iter().enumerate() {
            check_dim(dim, v.len())?;
            let chart = &field.charts[field.node_chart[i] as usize];
            let nv = chart.normal_part(v);
            let tang = linalg::dist(&nv, v);
            if tang > 1e-10 * linalg::norm(v).max(1.0) {
                return Err(Error::InvalidInput(format!("value at node {i} is not normal to the cone (tangential part {tang:.2e})")));
            }
            field.values[i * dim..(i + 1) * dim].copy_from_slice(&nv);
        }
        Ok(field)
    }

    fn fill<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&[f64], usize, &[f64]) -> Vec<f64> + Sync,
    {
        let dim = self.cone.ambient_dim();
        let vals = par::collect(self.len(), |i| {
            let x = self.point(i);
            let c = self.node_chart[i] as usize;
            let out = f(&x, c, self.value(i));
            (out.len() == dim).then(|| self.charts[c].normal_part(&out))
        });
        for (i, v) in vals.into_iter().enumerate() {
            let v = v.ok_or(Error::DimensionMismatch { expected: dim, got: 0 })?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite field value".into()));
            }
            self.values[i * dim..(i + 1) * dim].copy_from_slice(&v);
        }
        Ok(())
    }

    /// Field with `g(X, piece)` (projected to the normal space) added.
    pub fn with_added<G>(&self, g: G) -> Result<ConeField>
    where
        G: Fn(&[f64], usize) -> Vec<f64> + Sync,
    {
        let mut out = self.clone();
        out.fill(|x, c, v| linalg::add(v, &g(x, c)))?;
        Ok(out)
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn len(&self) -> usize {
        self.node_chart.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_chart.is_empty()
    }

    pub fn chart_of(&self, i: usize) -> usize {
        self.node_chart[i] as usize
    }

    fn lattice(&self, i: usize) -> &[i64] {
        let n = self.cone.n();
        &self.node_index[i * n..(i + 1) * n]
    }

    /// Chart coordinates of node `i`.
    pub fn coords(&self, i: usize) -> Vec<f64> {
        self.lattice(i).iter().map(|&k| (k as f64 + 0.5) * self.h).collect()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.charts[self.chart_of(i)].point(&self.coords(i))
    }

    pub fn value(&self, i: usize) -> &[f64] {
        let d = self.cone.ambient_dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.h.powi(self.cone.n() as i32) * self.charts[self.chart_of(i)].multiplicity as f64
    }

    /// `(∫ |v|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        par::sum(self.len(), |i| self.weight(i) * linalg::norm_sq(self.value(i))).sqrt()
    }

    /// Multilinear interpolation at chart coordinates `u`; `None` when a
    /// surrounding lattice node is missing.
    pub fn interpolate(&self, chart: usize, u: &[f64]) -> Option<Vec<f64>> {
        let n = self.cone.n();
        let d = self.cone.ambient_dim();
        let ch = self.charts.get(chart)?;
        let mut base = vec![0i64; n];
        let mut frac = vec![0.0; n];
        for a in 0..n {
            let t = u[a] / self.h - 0.5;
            let f = t.floor();
            base[a] = f as i64;
            frac[a] = t - f;
        }
        let mut out = vec![0.0; d];
        let mut idx = vec![0i64; n];
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            for a in 0..n {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit as i64;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let node = ch.node(&idx)?;
            linalg::axpy(&mut out, w, self.value(node));
        }
        Some(out)
    }
}

/// Cells kept between interior nodes and the axis or outer boundary.
const INTERIOR_CELLS: f64 = 2.0;

/// `max |Δ_h v| / ‖v‖_{L²}` over interior nodes (at least two cells from the
/// axis and from the outer boundary), five-point-type Laplacian per chart.
pub fn harmonic_defect(v: &ConeField) -> f64 {
    let norm = v.l2_norm();
    if norm == 0.0 {
        return 0.0;
    }
    let n = v.cone.n();
    let d = v.cone.ambient_dim();
    let h = v.h;
    let axis = v.cone.axis().expect("cone fields have an axis");
    let worst = par::max(v.len(), |i| {
        let x = v.point(i);
        if axis.distance(&x) < INTERIOR_CELLS * h || linalg::norm(&x) > v.radius - INTERIOR_CELLS * h {
            return 0.0;
        }
        let ch = &v.charts[v.chart_of(i)];
        let idx = v.lattice(i).to_vec();
        let mut lap = linalg::scale(v.value(i), -2.0 * n as f64);
        for a in 0..n {
            for dir in [-1i64, 1] {
                let mut j = idx.clone();
                j[a] += dir;
                match ch.node(&j) {
                    Some(nb) => linalg::axpy(&mut lap, 1.0, v.value(nb)),
                    None => return 0.0,
                }
            }
        }
        let _ = d;
        linalg::norm(&lap) / (h * h)
    });
    worst.max(0.0) / norm
}

/// `∫ R^{2−n} |∂_R(v/R^d)|²`, with the radial derivative taken by central
/// differences on the log-spaced radii `R e^{±η}`, `η = h/(2R)`; nodes whose
/// stencil leaves the lattice are skipped.
pub fn homogeneity_defect(v: &ConeField, degree: f64) -> f64 {
    ray_deficit(v, degree, None)
}

pub(crate) fn ray_deficit(v: &ConeField, degree: f64, region: Option<&Region>) -> f64 {
    let n = v.cone.n();
    let h = v.h;
    par::sum(v.len(), |i| {
        let x = v.point(i);
        if let Some(r) = region {
            if !r.contains_unchecked(&x) {
                return 0.0;
            }
        }
        let rr = linalg::norm(&x);
        if rr <= h {
            return 0.0;
        }
        let eta = h / (2.0 * rr);
        let (lo, hi) = ((-eta).exp(), eta.exp());
        let u = v.coords(i);
        let c = v.chart_of(i);
        let (Some(a), Some(b)) = (
            v.interpolate(c, &linalg::scale(&u, lo)),
            v.interpolate(c, &linalg::scale(&u, hi)),
        ) else {
            return 0.0;
        };
        let (r_lo, r_hi) = (rr * lo, rr * hi);
        let diff: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (q / r_hi.powf(degree) - p / r_lo.powf(degree)) / (r_hi - r_lo))
            .collect();
        v.weight(i) * rr.powf(2.0 - n as f64) * linalg::norm_sq(&diff)
    })
}

/// An element of ℋ(C⁽⁰⁾).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HElement {
    /// `ψ(x, y) = Σ_p y_p c_p^{⊥} + |x| φ(x/|x|)` on a four half-plane cone:
    /// `c` holds n − 1 ambient vectors (one per axis basis vector), `phi` the
    /// four values `φ(ω_j)`, each normal to half-plane `j`.
    FourHalfPlanes { c: Vec<Vec<f64>>, phi: Vec<Vec<f64>> },
    /// Pair of planes: `maps[i]` is a k×n matrix (row-major) from plane
    /// coordinates to normal coordinates of plane `i`; `kappa` adds the
    /// constant field `κ^{⊥}`.
    Pair { kappa: Vec<f64>, maps: Vec<Vec<f64>> },
}

fn structure(c0: &Cone) -> Result<(usize, usize, usize)> {
    if !c0.passes_through_origin() {
        return Err(Error::InvalidInput("ℋ is defined for cones through the origin".into()));
    }
    let m = c0.axis_dim().ok_or_else(|| Error::Degenerate("cone with empty axis".into()))?;
    Ok((c0.n(), c0.ambient_dim(), m))
}

impl HElement {
    pub fn zero(c0: &Cone) -> Result<HElement> {
        let (n, dim, _) = structure(c0)?;
        let k = dim - n;
        if c0.half_planes().is_some() {
            Ok(HElement::FourHalfPlanes { c: vec![vec![0.0; dim]; n - 1], phi: vec![vec![0.0; dim]; 4] })
        } else if c0.is_pair() {
            Ok(HElement::Pair { kappa: vec![0.0; dim], maps: vec![vec![0.0; k * n]; 2] })
        } else {
            Err(Error::InvalidInput("ℋ needs a pair of planes or four half-planes".into()))
        }
    }

    /// Check shapes and normality against `c0`.
    pub fn validate(&self, c0: &Cone) -> Result<()> {
        let (n, dim, _) = structure(c0)?;
        match self {
            HElement::FourHalfPlanes { c, phi } => {
                let hp = c0
                    .half_planes()
                    .ok_or_else(|| Error::InvalidInput("four half-plane element on another cone".into()))?;
                check_dim(n - 1, c.len())?;
                check_dim(4, phi.len())?;
                for v in c.iter().chain(phi) {
                    check_dim(dim, v.len())?;
                }
                for (p, h) in phi.iter().zip(hp) {
                    let t = linalg::norm(&h.plane().tangential_of_vector(p));
                    if t > 1e-10 * linalg::norm(p).max(1.0) {
                        return Err(Error::InvalidInput(format!("φ(ω) has tangential part {t:.2e}")));
                    }
                }
            }
            HElement::Pair { kappa, maps } => {
                if !c0.is_pair() {
                    return Err(Error::InvalidInput("pair element on another cone".into()));
                }
                check_dim(dim, kappa.len())?;
                check_dim(2, maps.len())?;
                for m in maps {
                    check_dim((dim - n) * n, m.len())?;
                }
            }
        }
        Ok(())
    }

    /// Value on chart `piece` of `c0` at `x` (assumed to lie on that piece).
    fn eval_on(&self, c0: &Cone, charts: &[PieceFrame], piece: usize, x: &[f64]) -> Vec<f64> {
        let dim = x.len();
        let (basis, normals) = &charts[piece];
        let project = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; dim];
            for nu in normals {
                linalg::axpy(&mut out, dot(nu, v), nu);
            }
            out
        };
        match self {
            HElement::FourHalfPlanes { c, phi } => {
                let n = basis.len();
                let mut out = vec![0.0; dim];
                for p in 0..n - 1 {
                    linalg::axpy(&mut out, dot(&basis[p], x), &c[p]);
                }
                let mut out = project(&out);
                let s = dot(&basis[n - 1], x);
                linalg::axpy(&mut out, s, &phi[piece]);
                out
            }
            HElement::Pair { kappa, maps } => {
                let n = basis.len();
                let u: Vec<f64> = basis.iter().map(|e| dot(e, x)).collect();
                let mut out = project(kappa);
                for (r, nu) in normals.iter().enumerate() {
                    let val: f64 = (0..n).map(|s| maps[piece][r * n + s] * u[s]).sum();
                    linalg::axpy(&mut out, val, nu);
                }
                let _ = c0;
                out
            }
        }
    }
}

/// Tangent and normal rows of one piece.
type PieceFrame = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Bases of the pieces in the order used by [`ConeField`] and [`HElement`].
fn piece_frames(c0: &Cone) -> Vec<PieceFrame> {
    let dim = c0.ambient_dim();
    c0.pieces()
        .iter()
        .map(|p| {
            let basis = match p {
                Piece::Plane(s, _) => s.basis().to_vec(),
                Piece::Half(hp) => {
                    let mut b = hp.boundary().basis().to_vec();
                    b.push(hp.side().to_vec());
                    b
                }
            };
            let normals = linalg::complement(&basis, dim);
            (basis, normals)
        })
        .collect()
}

/// `ψ(X)` for `X ∈ spt‖C⁽⁰⁾‖` off the axis.
pub fn eval_h(psi: &HElement, c0: &Cone, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(c0.ambient_dim(), x.len())?;
    psi.validate(c0)?;
    let axis = c0.axis().expect("validated");
    if axis.distance(x) <= 1e-12 * linalg::norm(x).max(1.0) {
        return Err(Error::InvalidInput("X lies on the axis (r = 0)".into()));
    }
    let tol = 1e-8 * linalg::norm(x).max(1.0);
    let piece = c0
        .pieces()
        .iter()
        .position(|p| p.dist_sq(x) <= tol * tol)
        .ok_or_else(|| Error::InvalidInput("X is not on the support of the cone".into()))?;
    Ok(psi.eval_on(c0, &piece_frames(c0), piece, x))
}

/// Basis of ℋ(C⁽⁰⁾) and the coefficient ↔ element correspondence.
pub struct HBasis {
    cone: Cone,
    frames: Vec<PieceFrame>,
    /// Orthonormal basis of `A(C⁽⁰⁾)^⊥` (axis-term directions and κ directions).
    perp: Vec<Vec<f64>>,
}

impl HBasis {
    pub fn new(c0: &Cone) -> Result<HBasis> {
        HElement::zero(c0)?;
        let axis = c0.axis().expect("checked").direction();
        let perp = linalg::complement(axis.basis(), c0.ambient_dim());
        Ok(HBasis { cone: c0.clone(), frames: piece_frames(c0), perp })
    }

    pub fn dim(&self) -> usize {
        let n = self.cone.n();
        let k = self.cone.ambient_dim() - n;
        if self.cone.half_planes().is_some() {
            (n - 1) * self.perp.len() + 4 * k
        } else {
            2 * k * n + self.perp.len()
        }
    }

    pub fn element(&self, coef: &[f64]) -> HElement {
        let n = self.cone.n();
        let dim = self.cone.ambient_dim();
        let k = dim - n;
        let mut it = coef.iter().copied();
        if self.cone.half_planes().is_some() {
            let c = (0..n - 1)
                .map(|_| {
                    let mut v = vec![0.0; dim];
                    for e in &self.perp {
                        linalg::axpy(&mut v, it.next().unwrap_or(0.0), e);
                    }
                    v
                })
                .collect();
            let phi = (0..4)
                .map(|j| {
                    let mut v = vec![0.0; dim];
                    for nu in &self.frames[j].1 {
                        linalg::axpy(&mut v, it.next().unwrap_or(0.0), nu);
                    }
                    v
                })
                .collect();
            HElement::FourHalfPlanes { c, phi }
        } else {
            let maps = (0..2).map(|_| (0..k * n).map(|_| it.next().unwrap_or(0.0)).collect()).collect();
            let mut kappa = vec![0.0; dim];
            for e in &self.perp {
                linalg::axpy(&mut kappa, it.next().unwrap_or(0.0), e);
            }
            HElement::Pair { kappa, maps }
        }
    }

    /// Coefficients of `psi` in this basis.
    pub fn coefficients(&self, psi: &HElement) -> Vec<f64> {
        match psi {
            HElement::FourHalfPlanes { c, phi } => {
                let mut out = Vec::new();
                for v in c {
                    out.extend(self.perp.iter().map(|e| dot(e, v)));
                }
                for (j, v) in phi.iter().enumerate() {
                    out.extend(self.frames[j].1.iter().map(|nu| dot(nu, v)));
                }
                out
            }
            HElement::Pair { kappa, maps } => {
                let mut out: Vec<f64> = maps.concat();
                out.extend(self.perp.iter().map(|e| dot(e, kappa)));
                out
            }
        }
    }

    /// Value of basis element `a` on piece `piece` at `x`.
    pub fn eval_basis(&self, a: usize, piece: usize, x: &[f64]) -> Vec<f64> {
        let mut coef = vec![0.0; self.dim()];
        coef[a] = 1.0;
        self.element(&coef).eval_on(&self.cone, &self.frames, piece, x)
    }

    pub fn eval(&self, psi: &HElement, piece: usize, x: &[f64]) -> Vec<f64> {
        psi.eval_on(&self.cone, &self.frames, piece, x)
    }
}

/// L² norms of a dehomogenization on `B_ρ(Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DehomNorms {
    pub field: f64,
    pub projection: f64,
    pub residual: f64,
    /// `max_a |⟨residual, b_a⟩| / (‖b_a‖ · ‖v‖)`.
    pub orthogonality: f64,
    pub samples: usize,
    pub dim_h: usize,
}

#[derive(Debug, Clone)]
pub struct Dehomogenization {
    pub element: HElement,
    pub coefficients: Vec<f64>,
    /// `v − ψ(· − Z)` at every node of the field.
    pub residual: ConeField,
    pub norms: DehomNorms,
}

/// Minimum ratio of samples to dim ℋ.
pub const SAMPLES_PER_DIM: usize = 10;

/// Orthogonality tolerance of the post-check.
pub const ORTHO_TOL: f64 = 1e-8;

/// L²(B_ρ(Z)) projection of `v` onto `{ψ(· − Z) : ψ ∈ ℋ(C⁽⁰⁾)}`.
pub fn dehomogenize(v: &ConeField, z: &[f64], rho: f64) -> Result<Dehomogenization> {
    let c0 = v.cone();
    let dim = c0.ambient_dim();
    check_dim(dim, z.len())?;
    let axis = c0.axis().ok_or_else(|| Error::Degenerate("cone with empty axis".into()))?;
    if axis.distance(z) > 1e-9 * linalg::norm(z).max(1.0) {
        return Err(Error::InvalidInput("Z must lie on the axis".into()));
    }
    let basis = HBasis::new(c0)?;
    let nb = basis.dim();
    let nodes: Vec<usize> = (0..v.len())
        .filter(|&i| linalg::dist_sq(&v.point(i), z) < rho * rho)
        .collect();
    if nodes.len() < SAMPLES_PER_DIM * nb {
        return Err(Error::InsufficientSamples { needed: SAMPLES_PER_DIM * nb, got: nodes.len() });
    }
    // design matrix: one block of `dim` rows per node, scaled by √w
    let rows = nodes.len() * dim;
    let blocks = par::collect(nodes.len(), |j| {
        let i = nodes[j];
        let x = linalg::sub(&v.point(i), z);
        let piece = v.chart_of(i);
        let sw = v.weight(i).sqrt();
        let cols: Vec<Vec<f64>> = (0..nb).map(|a| linalg::scale(&basis.eval_basis(a, piece, &x), sw)).collect();
        (cols, linalg::scale(v.value(i), sw))
    });
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, nb);
    let mut b = nalgebra::DVector::<f64>::zeros(rows);
    for (j, (cols, rhs)) in blocks.iter().enumerate() {
        for c in 0..dim {
            let r = j * dim + c;
            for (col, vals) in cols.iter().enumerate() {
                a[(r, col)] = vals[c];
            }
            b[r] = rhs[c];
        }
    }
    let col_norms: Vec<f64> = (0..nb).map(|c| a.column(c).norm()).collect();
    let qr = a.clone().qr();
    let r = qr.r();
    let rmax = (0..nb).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if rmax == 0.0 || (0..nb).any(|i| r[(i, i)].abs() <= 1e-10 * rmax) {
        return Err(Error::Degenerate("rank-deficient normal equations".into()));
    }
    let qtb = qr.q().transpose() * &b;
    let coef = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Degenerate("rank-deficient normal equations".into()))?;
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let element = basis.element(&coefficients);
    let resid_vec = &b - &a * &coef;
    let field_norm = b.norm();
    let orthogonality = if field_norm == 0.0 {
        0.0
    } else {
        (0..nb)
            .map(|c| a.column(c).dot(&resid_vec).abs() / (col_norms[c] * field_norm))
            .fold(0.0, f64::max)
    };
    if orthogonality > ORTHO_TOL {
        return Err(Error::Degenerate(format!("orthogonality post-check failed ({orthogonality:.2e})")));
    }
    let residual = {
        let mut out = v.clone();
        out.fill(|x, piece, val| linalg::sub(val, &basis.eval(&element, piece, &linalg::sub(x, z))))?;
        out
    };
    let norms = DehomNorms {
        field: field_norm,
        projection: (&a * &coef).norm(),
        residual: resid_vec.norm(),
        orthogonality,
        samples: nodes.len(),
        dim_h: nb,
    };
    Ok(Dehomogenization { element, coefficients, residual, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::four_half_planes_cone;

    #[test]
    fn linear_field_is_harmonic_and_homogeneous() {
        let c = four_half_planes_cone(1).unwrap();
        let f = ConeField::from_fn(c, 1.0 / 32.0, 1.0, |x, _| vec![0.0, 0.0, x[0] + 2.0 * x[1], x[1]]).unwrap();
        assert!(harmonic_defect(&f) < 1e-10);
        assert!(homogeneity_defect(&f, 1.0) < 1e-20);
    }

    #[test]
    fn planted_element_round_trip() {
        let c = four_half_planes_cone(1).unwrap();
        let basis = HBasis::new(&c).unwrap();
        let coef: Vec<f64> = (0..basis.dim()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let psi = basis.element(&coef);
        assert_eq!(basis.coefficients(&psi).len(), coef.len());
        for (a, b) in basis.coefficients(&psi).iter().zip(&coef) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
