//! Graphs as weighted point clouds: area-formula weights, mass, density and tangents.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cones::Cone;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Region, Subspace};
use crate::linalg::{self, dot};
use crate::par;
use crate::spatial::KdTree;
use crate::twovalued::{match_slices, TwoValuedGrid};

/// Default density threshold slack: points with ratio ≥ 2 − δ count as Θ ≥ 2 points.
pub const DELTA_THETA: f64 = 0.05;

/// Tangent fits with `λ_{n+1}/λ_n` above this are flagged unreliable.
pub const TANGENT_RESIDUAL_MAX: f64 = 0.1;

/// Volume of the unit n-ball.
pub fn omega(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => omega(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// Weighted point cloud representing an n-varifold in ℝ^{n+k}.
#[derive(Debug, Clone)]
pub struct SampledVarifold {
    n: usize,
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    /// n orthonormal rows of length `dim` per sample.
    tangents: Option<Vec<f64>>,
    tangent_ok: Vec<bool>,
    cell_radius: Vec<f64>,
    sheet: Vec<Option<u8>>,
    resolution: f64,
    provenance: String,
    index: OnceLock<KdTree>,
}

/// One sample as assembled by the builders.
#[derive(Debug, Clone)]
pub struct Sample {
    pub point: Vec<f64>,
    pub weight: f64,
    pub tangent: Vec<Vec<f64>>,
    pub tangent_ok: bool,
    pub cell_radius: f64,
    pub sheet: Option<u8>,
}

/// Density ratios at dyadic radii about a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub center: Vec<f64>,
    /// Strictly decreasing.
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl DensityProfile {
    /// Ratio at the smallest radius.
    pub fn finest(&self) -> f64 {
        *self.ratios.last().expect("profiles are nonempty")
    }
}

/// Best-fit tangent plane through a point.
#[derive(Debug, Clone)]
pub struct TangentEstimate {
    pub plane: Subspace,
    /// `λ_{n+1} / λ_n` of the local second-moment form.
    pub residual: f64,
    pub reliable: bool,
    pub samples: usize,
}

impl SampledVarifold {
    pub fn from_samples(n: usize, dim: usize, samples: Vec<Sample>, resolution: f64, provenance: &str) -> Result<Self> {
        let mut v = SampledVarifold {
            n,
            dim,
            points: Vec::with_capacity(samples.len() * dim),
            weights: Vec::with_capacity(samples.len()),
            tangents: Some(Vec::with_capacity(samples.len() * n * dim)),
            tangent_ok: Vec::with_capacity(samples.len()),
            cell_radius: Vec::with_capacity(samples.len()),
            sheet: Vec::with_capacity(samples.len()),
            resolution,
            provenance: provenance.to_string(),
            index: OnceLock::new(),
        };
        for s in samples {
            check_dim(dim, s.point.len())?;
            if !(s.weight > 0.0 && s.weight.is_finite()) || s.point.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("sample weights must be positive and points finite".into()));
            }
            check_dim(n, s.tangent.len())?;
            v.points.extend_from_slice(&s.point);
            v.weights.push(s.weight);
            let t = v.tangents.as_mut().expect("tangents");
            for row in &s.tangent {
                check_dim(dim, row.len())?;
                t.extend_from_slice(row);
            }
            v.tangent_ok.push(s.tangent_ok);
            v.cell_radius.push(s.cell_radius);
            v.sheet.push(s.sheet);
        }
        Ok(v)
    }

    /// Cloud without tangent information (e.g. raw points with weights).
    pub fn from_points(n: usize, points: &[Vec<f64>], weights: &[f64], resolution: f64) -> Result<Self> {
        check_dim(points.len(), weights.len())?;
        let dim = points.first().map_or(0, |p| p.len());
        let mut flat = Vec::with_capacity(points.len() * dim);
        for (p, w) in points.iter().zip(weights) {
            check_dim(dim, p.len())?;
            if !(*w > 0.0) {
                return Err(Error::InvalidInput("weights must be positive".into()));
            }
            flat.extend_from_slice(p);
        }
        Ok(SampledVarifold {
            n,
            dim,
            points: flat,
            weights: weights.to_vec(),
            tangents: None,
            tangent_ok: vec![false; weights.len()],
            cell_radius: vec![resolution / 2.0; weights.len()],
            sheet: vec![None; weights.len()],
            resolution,
            provenance: "points".into(),
            index: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Lattice spacing of the source.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_tangents(&self) -> bool {
        self.tangents.is_some()
    }

    /// Orthonormal tangent rows of sample `i` (flattened n × dim).
    pub fn tangent(&self, i: usize) -> Option<&[f64]> {
        let w = self.n * self.dim;
        self.tangents.as_ref().map(|t| &t[i * w..(i + 1) * w])
    }

    pub fn tangent_ok(&self, i: usize) -> bool {
        self.tangent_ok[i]
    }

    /// Radius of the patch represented by sample `i`.
    pub fn cell_radius(&self, i: usize) -> f64 {
        self.cell_radius[i]
    }

    pub fn sheet(&self, i: usize) -> Option<u8> {
        self.sheet[i]
    }

    /// Spatial index over the sample points, built on first use.
    pub fn index(&self) -> &KdTree {
        self.index
            .get_or_init(|| KdTree::new(self.points.clone(), self.dim.max(1)))
    }

    pub fn mass(&self) -> f64 {
        par::sum(self.len(), |i| self.weights[i])
    }

    /// `‖V‖(R)`.
    pub fn mass_in(&self, r: &Region) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        r.contains(self.point(0))?;
        Ok(par::sum(self.len(), |i| {
            if r.contains_unchecked(self.point(i)) {
                self.weights[i]
            } else {
                0.0
            }
        }))
    }

    /// Indices of samples in the open ball, increasing.
    pub fn in_ball(&self, center: &[f64], rho: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.index().for_each_within(center, rho, |i, d2| {
            if d2 < rho * rho {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// `‖V‖(B_ρ(X)) / (ωₙ ρⁿ)`; `ρ` must be at least four lattice spacings.
    pub fn density_ratio(&self, x: &[f64], rho: f64) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let floor = 4.0 * self.resolution;
        if !(rho >= floor) {
            return Err(Error::BelowResolution { rho, floor });
        }
        let idx = self.in_ball(x, rho);
        let m = par::sum(idx.len(), |j| self.weights[idx[j]]);
        Ok(m / (omega(self.n) * rho.powi(self.n as i32)))
    }

    /// Ratios at `rho, rho/2, rho/4, rho/8`, stopping at the resolution floor.
    pub fn density_profile(&self, x: &[f64], rho: f64) -> Result<DensityProfile> {
        let mut radii = Vec::new();
        let mut ratios = Vec::new();
        let mut r = rho;
        for _ in 0..4 {
            match self.density_ratio(x, r) {
                Ok(v) => {
                    radii.push(r);
                    ratios.push(v);
                }
                Err(e) if radii.is_empty() => return Err(e),
                Err(_) => break,
            }
            r /= 2.0;
        }
        Ok(DensityProfile { center: x.to_vec(), radii, ratios })
    }

    /// Principal n-plane through `x` of the samples in `B_ρ(x)`, optionally
    /// restricted to one sheet.
    pub fn tangent_estimate(&self, x: &[f64], rho: f64, sheet: Option<u8>) -> Result<TangentEstimate> {
        check_dim(self.dim, x.len())?;
        let d = self.dim;
        let idx: Vec<usize> = self
            .in_ball(x, rho)
            .into_iter()
            .filter(|&i| sheet.is_none() || self.sheet[i] == sheet)
            .collect();
        let needed = 3 * self.n;
        if idx.len() < needed {
            return Err(Error::InsufficientSamples { needed, got: idx.len() });
        }
        let m = par::sum_vec(idx.len(), d * d, |j, acc| {
            let i = idx[j];
            let w = self.weights[i];
            let p = self.point(i);
            for a in 0..d {
                let da = p[a] - x[a];
                for b in 0..d {
                    acc[a * d + b] += w * da * (p[b] - x[b]);
                }
            }
        });
        let (vals, vecs) = linalg::sym_eigen(&m, d);
        let lam_n = vals[self.n - 1];
        let lam_next = if self.n < d { vals[self.n].max(0.0) } else { 0.0 };
        let residual = if lam_n > 0.0 { lam_next / lam_n } else { f64::INFINITY };
        let plane = Subspace::affine(x.to_vec(), &vecs[..self.n])?;
        Ok(TangentEstimate {
            plane,
            residual,
            reliable: residual <= TANGENT_RESIDUAL_MAX,
            samples: idx.len(),
        })
    }

    /// `|e^{⊥_T}|²` summed over an orthonormal family `dirs`, for sample `i`.
    pub(crate) fn normal_energy(&self, i: usize, dirs: &[Vec<f64>]) -> f64 {
        let t = self.tangent(i).expect("tangents present");
        dirs.iter()
            .map(|e| {
                let mut tang = 0.0;
                for r in 0..self.n {
                    let c = dot(e, &t[r * self.dim..(r + 1) * self.dim]);
                    tang += c * c;
                }
                (linalg::norm_sq(e) - tang).max(0.0)
            })
            .sum()
    }

    /// `∫_R |a^C_V|² d‖V‖` with `|a^C_V(X)|² = Σ_j |e_j^{⊥_{T_X V}}|²` over an
    /// orthonormal basis of `A(C)`.
    pub fn axis_tilt(&self, c: &Cone, r: &Region) -> Result<f64> {
        check_dim(self.dim, c.ambient_dim())?;
        let axis = c.axis().ok_or_else(|| Error::Degenerate("axis tilt needs a nonempty axis".into()))?;
        if !self.has_tangents() {
            return Err(Error::InvalidInput("varifold has no tangent data".into()));
        }
        let dirs = axis.basis().to_vec();
        if !self.is_empty() {
            r.contains(self.point(0))?;
        }
        Ok(par::sum(self.len(), |i| {
            if r.contains_unchecked(self.point(i)) {
                self.weights[i] * self.normal_energy(i, &dirs)
            } else {
                0.0
            }
        }))
    }

    /// Image under `X ↦ R X` for an orthogonal matrix given by rows.
    pub fn rotated(&self, rot: &[Vec<f64>]) -> Result<SampledVarifold> {
        check_dim(self.dim, rot.len())?;
        let apply = |v: &[f64]| -> Vec<f64> { rot.iter().map(|r| dot(r, v)).collect() };
        let mut out = self.clone();
        out.index = OnceLock::new();
        for i in 0..self.len() {
            let p = apply(self.point(i));
            out.points[i * self.dim..(i + 1) * self.dim].copy_from_slice(&p);
        }
        if let Some(t) = out.tangents.as_mut() {
            for row in t.chunks_mut(self.dim) {
                let r = apply(row);
                row.copy_from_slice(&r);
            }
        }
        Ok(out)
    }

    /// `(η_{center,ρ})_# V` restricted to `B_radius(0)`: samples of
    /// `B_{radius·ρ}(center)` mapped by `X ↦ (X − center)/ρ`.
    pub fn window(&self, center: &[f64], rho: f64, radius: f64) -> Result<SampledVarifold> {
        check_dim(self.dim, center.len())?;
        if !(rho > 0.0) {
            return Err(Error::InvalidInput("window scale must be positive".into()));
        }
        let idx = self.in_ball(center, radius * rho);
        let d = self.dim;
        let nt = self.n * d;
        let scale_w = rho.powi(self.n as i32);
        let mut out = SampledVarifold {
            n: self.n,
            dim: d,
            points: Vec::with_capacity(idx.len() * d),
            weights: Vec::with_capacity(idx.len()),
            tangents: self.tangents.as_ref().map(|_| Vec::with_capacity(idx.len() * nt)),
            tangent_ok: Vec::with_capacity(idx.len()),
            cell_radius: Vec::with_capacity(idx.len()),
            sheet: Vec::with_capacity(idx.len()),
            resolution: self.resolution / rho,
            provenance: self.provenance.clone(),
            index: OnceLock::new(),
        };
        for &i in &idx {
            out.points.extend(self.point(i).iter().zip(center).map(|(p, c)| (p - c) / rho));
            out.weights.push(self.weights[i] / scale_w);
            if let (Some(t), Some(src)) = (out.tangents.as_mut(), self.tangents.as_ref()) {
                t.extend_from_slice(&src[i * nt..(i + 1) * nt]);
            }
            out.tangent_ok.push(self.tangent_ok[i]);
            out.cell_radius.push(self.cell_radius[i] / rho);
            out.sheet.push(self.sheet[i]);
        }
        Ok(out)
    }

    pub(crate) fn with_sheets(mut self, sheets: Vec<Option<u8>>) -> Self {
        self.sheet = sheets;
        self
    }
}

fn tangent_rows(n: usize, k: usize, df: &[f64]) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut v = linalg::unit(n + k, j);
            for r in 0..k {
                v[n + r] = df[r * n + j];
            }
            v
        })
        .collect();
    linalg::orthonormalize(&cols, 1e-12)
}

fn area_factor(n: usize, k: usize, df: &[f64]) -> f64 {
    let g = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let mut s = if i == j { 1.0 } else { 0.0 };
        for r in 0..k {
            s += df[r * n + i] * df[r * n + j];
        }
        s
    });
    g.determinant().max(0.0).sqrt()
}

/// Value at node `to` continuing component `b` of node `from` under the
/// 𝒢-minimizing matching, its component index at `to`, and whether the match
/// was unambiguous.
fn matched(f: &TwoValuedGrid, from: usize, to: usize, b: usize) -> (usize, bool) {
    let (a1, a2) = f.values(from);
    let (b1, b2) = f.values(to);
    let m = match_slices(a1, a2, b1, b2);
    let distinct = linalg::dist(b1, b2) > 0.0;
    let ok = !(distinct && m.is_ambiguous());
    let idx = if m.crossed == (b == 0) { 1 } else { 0 };
    (idx, ok)
}

fn component(f: &TwoValuedGrid, node: usize, b: usize) -> &[f64] {
    let (a1, a2) = f.values(node);
    if b == 0 {
        a1
    } else {
        a2
    }
}

/// Values one and two steps away along `axis` in direction `dir`, continuing
/// branch `b`; `None` where a node is missing or a match is ambiguous.
#[allow(clippy::type_complexity)]
fn walk(f: &TwoValuedGrid, a: usize, b: usize, axis: usize, dir: i64) -> (Option<&[f64]>, Option<&[f64]>, Option<&[f64]>) {
    let Some(y1) = f.neighbor(a, axis, dir) else {
        return (None, None, None);
    };
    let (b1, ok1) = matched(f, a, y1, b);
    let v1 = component(f, y1, b1);
    if !ok1 {
        return (None, None, Some(v1));
    }
    let v2 = f.neighbor(y1, axis, dir).and_then(|y2| {
        let (b2, ok2) = matched(f, y1, y2, b1);
        ok2.then(|| component(f, y2, b2))
    });
    (Some(v1), v2, Some(v1))
}

fn second_diff(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(b).zip(c).map(|((x, y), z)| (x - 2.0 * y + z).powi(2)).sum::<f64>().sqrt()
}

/// Derivative of branch value `v` along one axis, choosing among the central
/// and the two one-sided second-order stencils the one with the smallest
/// second difference (so stencils do not straddle sheet crossings). Returns
/// the column and whether an unambiguous stencil was available.
fn branch_derivative(f: &TwoValuedGrid, a: usize, b: usize, axis: usize) -> (Vec<f64>, bool) {
    let h = f.h();
    let v = component(f, a, b);
    let (p1, p2, p_any) = walk(f, a, b, axis, 1);
    let (m1, m2, m_any) = walk(f, a, b, axis, -1);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut offer = |score: f64, col: Vec<f64>| {
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, col));
        }
    };
    if let (Some(p1), Some(m1)) = (p1, m1) {
        // central stencil wins ties
        let c0 = second_diff(p1, v, m1) / 1.5;
        offer(c0, v.iter().enumerate().map(|(r, _)| (p1[r] - m1[r]) / (2.0 * h)).collect());
    }
    if let (Some(p1), Some(p2)) = (p1, p2) {
        offer(
            second_diff(v, p1, p2),
            (0..v.len()).map(|r| (-3.0 * v[r] + 4.0 * p1[r] - p2[r]) / (2.0 * h)).collect(),
        );
    }
    if let (Some(m1), Some(m2)) = (m1, m2) {
        offer(
            second_diff(v, m1, m2),
            (0..v.len()).map(|r| (3.0 * v[r] - 4.0 * m1[r] + m2[r]) / (2.0 * h)).collect(),
        );
    }
    if let Some((_, col)) = best {
        return (col, true);
    }
    // First-order fallbacks.
    if let Some(p1) = p1 {
        return ((0..v.len()).map(|r| (p1[r] - v[r]) / h).collect(), true);
    }
    if let Some(m1) = m1 {
        return ((0..v.len()).map(|r| (v[r] - m1[r]) / h).collect(), true);
    }
    if let Some(p) = p_any {
        return ((0..v.len()).map(|r| (p[r] - v[r]) / h).collect(), false);
    }
    if let Some(m) = m_any {
        return ((0..v.len()).map(|r| (v[r] - m[r]) / h).collect(), false);
    }
    (vec![0.0; v.len()], false)
}

/// Sample the graph of a two-valued grid function: one point per node per
/// branch, weighted by `hⁿ √det(I + DfᵀDf)`.
///
/// Branch derivatives are finite differences along 𝒢-matched neighbours.
/// Matches whose two pairings cost within a factor two of each other are
/// treated as ambiguous and avoided; nodes with no unambiguous stencil on
/// some axis get `tangent_ok = false`.
pub fn sample_graph(f: &TwoValuedGrid) -> Result<SampledVarifold> {
    let (n, k, h) = (f.n(), f.k(), f.h());
    let act = f.active();
    let per_node = par::collect(act.len(), |j| {
        let a = act[j];
        let x = f.position(a);
        let mut out = Vec::with_capacity(2);
        for b in 0..2 {
            let v = component(f, a, b);
            let mut df = vec![0.0; k * n];
            let mut ok_all = true;
            for ax in 0..n {
                let (col, ok) = branch_derivative(f, a, b, ax);
                ok_all &= ok;
                for r in 0..k {
                    df[r * n + ax] = col[r];
                }
            }
            let mut point = x.clone();
            point.extend_from_slice(v);
            let frob: f64 = (n as f64 + df.iter().map(|d| d * d).sum::<f64>()).sqrt();
            out.push(Sample {
                point,
                weight: h.powi(n as i32) * area_factor(n, k, &df),
                tangent: tangent_rows(n, k, &df),
                tangent_ok: ok_all,
                cell_radius: 0.5 * h * (n as f64).sqrt() * frob,
                sheet: None,
            });
        }
        out
    });
    let samples: Vec<Sample> = per_node.into_iter().flatten().collect();
    if samples.iter().any(|s| s.point.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidInput("non-finite values in grid".into()));
    }
    SampledVarifold::from_samples(n, n + k, samples, h, "grid")
}

/// Sample a cone directly: cell-centred lattice of spacing `h` on ℝⁿ inside
/// `B_radius(0)`, lifted to every graph piece covering the node.
pub fn sample_cone(c: &Cone, h: f64, radius: f64) -> Result<SampledVarifold> {
    let pieces = c.graph_pieces()?;
    let (n, k) = (c.n(), c.k());
    let lattice = TwoValuedGrid::from_fn(n, 1, radius, h, |_| Ok(crate::twovalued::Pair2::double(vec![0.0])))?;
    let mut samples = Vec::new();
    for (pi, piece) in pieces.iter().enumerate() {
        let tangent = tangent_rows(n, k, &piece.m);
        for &a in lattice.active() {
            let x = lattice.position(a);
            if !piece.covers(&x) {
                continue;
            }
            let mut point = x.clone();
            point.extend(piece.value(&x));
            let frob = (n as f64 + piece.m.iter().map(|d| d * d).sum::<f64>()).sqrt();
            for _ in 0..piece.multiplicity {
                samples.push(Sample {
                    point: point.clone(),
                    weight: h.powi(n as i32) * piece.jacobian,
                    tangent: tangent.clone(),
                    tangent_ok: true,
                    cell_radius: 0.5 * h * (n as f64).sqrt() * frob,
                    sheet: Some(pi as u8),
                });
            }
        }
    }
    SampledVarifold::from_samples(n, n + k, samples, h, "cone")
}

/// Half-planes `{b + s·ω : b ∈ boundary, s ≥ 0}` with unit weights per cell,
/// sampled at cell centres in `s` and along the boundary, inside `B_radius(0)`.
/// Any number of sides is allowed (used for unbalanced configurations).
pub fn sample_half_planes(boundary: &Subspace, sides: &[Vec<f64>], h: f64, radius: f64) -> Result<SampledVarifold> {
    let m = boundary.dim();
    let n = m + 1;
    let dim = boundary.ambient_dim();
    let cells = (radius / h).ceil() as i64;
    let mut samples = Vec::new();
    for (si, side) in sides.iter().enumerate() {
        check_dim(dim, side.len())?;
        let w = linalg::normalized(&boundary.perp_of_vector(side))
            .ok_or_else(|| Error::Degenerate("side lies in the boundary".into()))?;
        let mut tangent = boundary.basis().to_vec();
        tangent.push(w.clone());
        let mut idx = vec![-cells; m];
        loop {
            let u: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * h).collect();
            for s in 0..cells {
                let t = (s as f64 + 0.5) * h;
                let mut p = boundary.point(&u);
                linalg::axpy(&mut p, t, &w);
                if linalg::norm_sq(&p) < radius * radius {
                    samples.push(Sample {
                        point: p,
                        weight: h.powi(n as i32),
                        tangent: tangent.clone(),
                        tangent_ok: true,
                        cell_radius: 0.5 * h * (n as f64).sqrt(),
                        sheet: Some(si as u8),
                    });
                }
            }
            // advance the boundary multi-index
            let mut d = 0;
            while d < m {
                idx[d] += 1;
                if idx[d] < cells {
                    break;
                }
                idx[d] = -cells;
                d += 1;
            }
            if d == m {
                break;
            }
        }
    }
    SampledVarifold::from_samples(n, dim, samples, h, "half_planes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twovalued::Pair2;

    #[test]
    fn unit_ball_volumes() {
        assert_eq!(omega(1), 2.0);
        assert!((omega(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((omega(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn double_zero_plane_mass() {
        let f = TwoValuedGrid::from_fn(2, 1, 1.0, 1.0 / 64.0, |_| Ok(Pair2::double(vec![0.0]))).unwrap();
        let v = sample_graph(&f).unwrap();
        assert!((v.mass() - 2.0 * std::f64::consts::PI).abs() < 0.02 * 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn crossing_segments_mass() {
        let m: f64 = 0.6;
        let f = TwoValuedGrid::from_fn(1, 1, 1.0, 1.0 / 100.0, |x| Ok(Pair2::new(vec![m * x[0]], vec![-m * x[0]]))).unwrap();
        let v = sample_graph(&f).unwrap();
        let exact = 4.0 * (1.0 + m * m).sqrt();
        assert!((v.mass() - exact).abs() < 1e-9, "{} vs {exact}", v.mass());
    }

    #[test]
    fn density_floor_enforced() {
        let f = TwoValuedGrid::from_fn(1, 1, 1.0, 0.01, |_| Ok(Pair2::new(vec![0.0], vec![1.0]))).unwrap();
        let v = sample_graph(&f).unwrap();
        assert!(matches!(v.density_ratio(&[0.0, 0.0], 0.02), Err(Error::BelowResolution { .. })));
        let r = v.density_ratio(&[0.0, 0.0], 0.5).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }
}
