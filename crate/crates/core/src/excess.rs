//! L² excess functionals of a sampled varifold relative to cones.

use serde::{Deserialize, Serialize};

use crate::blowup::ConeField;
use crate::conefit::{self, FitOptions};
use crate::cones::{self, Cone};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Region, Subspace};
use crate::linalg::{self, dot};
use crate::par;
use crate::quasi;
use crate::varifold::{omega, SampledVarifold};

/// Default collar: the reverse term of `Q` ignores `{r_{C⁽⁰⁾} < 1/8}`.
pub const COLLAR: f64 = 0.125;

/// Both components of a two-sided excess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    /// `∫ dist²(X, spt‖C‖) d‖V‖` over the region.
    pub one_sided: f64,
    /// `∫ dist²(X, spt‖V‖) d‖C‖` over the region minus the collar.
    pub reverse: f64,
    /// Square root of the sum.
    pub q: f64,
    pub region: Region,
    pub collar: f64,
    /// Number of cone quadrature points used for the reverse term.
    pub reverse_points: usize,
}

/// `Σ weight · dist²(X, spt‖C‖)` over samples in `R`.
pub fn excess_e(v: &SampledVarifold, c: &Cone, r: &Region) -> Result<f64> {
    check_dim(v.ambient_dim(), c.ambient_dim())?;
    if v.is_empty() {
        return Ok(0.0);
    }
    r.contains(v.point(0))?;
    Ok(par::sum(v.len(), |i| {
        let p = v.point(i);
        if r.contains_unchecked(p) {
            v.weight(i) * c.dist_sq_to_support(p)
        } else {
            0.0
        }
    }))
}

/// Same as [`excess_e`] over an explicit list of sample indices.
pub(crate) fn excess_on(v: &SampledVarifold, idx: &[usize], c: &Cone) -> f64 {
    par::sum(idx.len(), |j| {
        let i = idx[j];
        v.weight(i) * c.dist_sq_to_support(v.point(i))
    })
}

/// Nearest V samples consulted for the patch distance.
const PATCH_NEIGHBOURS: usize = 16;

/// Squared distance from `x` to `spt‖V‖`, treating each sample as a flat disc
/// of radius `cell_radius` in its tangent plane.
pub fn dist_sq_to_varifold(v: &SampledVarifold, x: &[f64]) -> f64 {
    let nb = v.index().k_nearest(x, PATCH_NEIGHBOURS);
    let n = v.n();
    let d = v.ambient_dim();
    let mut best = f64::INFINITY;
    for (d2, i) in nb {
        let cand = match v.tangent(i) {
            Some(t) => {
                let diff = linalg::sub(x, v.point(i));
                let mut tang2 = 0.0;
                for r in 0..n {
                    let c = dot(&diff, &t[r * d..(r + 1) * d]);
                    tang2 += c * c;
                }
                let normal2 = (d2 - tang2).max(0.0);
                let excess_t = (tang2.sqrt() - v.cell_radius(i)).max(0.0);
                normal2 + excess_t * excess_t
            }
            None => d2,
        };
        best = best.min(cand);
    }
    best
}

/// Quadrature nodes `(X, weight)` on `spt‖C‖ ∩ B_radius(center)`: quasi-random
/// points of each piece, equal weights summing to the piece area.
pub fn cone_quadrature(c: &Cone, center: &[f64], radius: f64, count: usize) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    for piece in c.pieces() {
        let plane = piece.plane();
        let foot = plane.project_unchecked(center);
        let r2 = radius * radius - linalg::dist_sq(&foot, center);
        if r2 <= 0.0 {
            continue;
        }
        let pr = r2.sqrt();
        let n = plane.dim();
        let w = omega(n) * pr.powi(n as i32) / count as f64 * piece.multiplicity() as f64;
        let base = plane.coords(&foot);
        let pts = quasi::ball_points(n, pr, count);
        for q in pts.into_iter().take(count) {
            let coords: Vec<f64> = base.iter().zip(&q).map(|(b, c)| b + c).collect();
            let p = plane.point(&coords);
            let keep = match piece {
                cones::Piece::Half(h) => h.side_coord(&p) >= 0.0,
                _ => true,
            };
            if keep {
                out.push((p, w));
            }
        }
    }
    out
}

/// Options for [`excess_q`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QOptions {
    pub collar: f64,
    /// Quasi-random base points in `B₂ⁿ` per cone piece.
    pub points: usize,
    /// Cranley–Patterson shift of the base points.
    pub shift: Vec<f64>,
}

impl Default for QOptions {
    fn default() -> Self {
        QOptions { collar: COLLAR, points: 20_000, shift: Vec::new() }
    }
}

/// `Q_V(C⁽⁰⁾)`: one-sided excess over `B₂ⁿ × ℝᵏ` plus the reverse excess over
/// `(B₂ⁿ × ℝᵏ) \ {r_{C⁽⁰⁾} < collar}`, square-rooted.
///
/// The reverse integral uses quasi-random base points of `B₂ⁿ` lifted to
/// each graph piece of `C⁽⁰⁾`.
pub fn excess_q(v: &SampledVarifold, c0: &Cone, opts: &QOptions) -> Result<ExcessReport> {
    check_dim(v.ambient_dim(), c0.ambient_dim())?;
    let axis = c0.axis().ok_or_else(|| Error::Degenerate("Q needs a cone with nonempty axis".into()))?;
    let n = c0.n();
    let outer = Region::Cylinder { n, radius: 2.0 };
    let one_sided = excess_e(v, c0, &outer)?;
    let in_outer = (0..v.len()).any(|i| {
        let p = v.point(i);
        outer.contains_unchecked(p) && axis.distance(p) >= opts.collar
    });
    if !in_outer {
        return Err(Error::EmptySet("varifold samples outside the collar (reverse excess undefined)"));
    }
    let pieces = c0.graph_pieces()?;
    let mut shift = opts.shift.clone();
    shift.resize(n, 0.0);
    let mut base = Vec::with_capacity(opts.points);
    let mut i = 0u64;
    while base.len() < opts.points && i < 64 * opts.points as u64 + 1024 {
        let u = quasi::halton(i, n, &shift);
        i += 1;
        let x: Vec<f64> = u.iter().map(|t| 4.0 * t - 2.0).collect();
        if linalg::norm_sq(&x) < 4.0 {
            base.push(x);
        }
    }
    let cell = omega(n) * 2f64.powi(n as i32) / base.len() as f64;
    let mut quad = Vec::new();
    for p in &pieces {
        for x in &base {
            if !p.covers(x) {
                continue;
            }
            let mut pt = x.clone();
            pt.extend(p.value(x));
            if axis.distance(&pt) < opts.collar {
                continue;
            }
            quad.push((pt, cell * p.jacobian * p.multiplicity as f64));
        }
    }
    let reverse = par::sum(quad.len(), |j| quad[j].1 * dist_sq_to_varifold(v, &quad[j].0));
    Ok(ExcessReport {
        one_sided,
        reverse,
        q: (one_sided + reverse).sqrt(),
        region: outer,
        collar: opts.collar,
        reverse_points: quad.len(),
    })
}

/// Result of [`coarser_excess`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoarserExcess {
    pub value: f64,
    pub cone: Cone,
    /// Dimension of the axis the competitors were constrained to contain.
    pub axis_dim: usize,
}

/// `ℰ²_V(C)`: the least excess over `B₁` among pairs `D` whose axis strictly
/// contains `A(C)` and lies in `A(C⁽⁰⁾)`.
///
/// Competitor axes are `A(C) ⊕ span{u}` for unit `u ∈ A(C⁽⁰⁾) ⊖ A(C)`; when
/// that complement has dimension above one, its basis vectors and seeded
/// random combinations are tried.
pub fn coarser_excess(v: &SampledVarifold, c: &Cone, c0: &Cone, opts: &FitOptions) -> Result<CoarserExcess> {
    if !c.is_pair() {
        return Err(Error::InvalidInput("coarser excess compares against a pair of planes".into()));
    }
    let ac = c.axis().ok_or_else(|| Error::Degenerate("C has empty axis".into()))?;
    let a0 = c0.axis().ok_or_else(|| Error::Degenerate("C⁽⁰⁾ has empty axis".into()))?;
    if ac.dim() >= a0.dim() {
        return Err(Error::InvalidInput(format!(
            "no admissible coarser axis: dim A(C) = {} is not below dim A(C⁽⁰⁾) = {}",
            ac.dim(),
            a0.dim()
        )));
    }
    let ac_dir = ac.direction();
    let extra: Vec<Vec<f64>> = linalg::orthonormalize(
        &a0.basis().iter().map(|b| ac_dir.perp_of_vector(b)).collect::<Vec<_>>(),
        1e-8,
    );
    let mut candidates: Vec<Vec<f64>> = extra.clone();
    if extra.len() > 1 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
        for _ in 0..opts.restarts.max(1) {
            let mut u = vec![0.0; v.ambient_dim()];
            for e in &extra {
                linalg::axpy(&mut u, rng.random_range(-1.0..1.0), e);
            }
            if let Some(u) = linalg::normalized(&u) {
                candidates.push(u);
            }
        }
    }
    let region = Region::unit_ball(v.ambient_dim());
    let mut best: Option<CoarserExcess> = None;
    for u in candidates {
        let mut dirs = ac_dir.basis().to_vec();
        dirs.push(u);
        let w = Subspace::linear(v.ambient_dim(), &dirs)?;
        let fit = conefit::fit_pair_with_axis(v, &region, &w, c, opts)?;
        if best.as_ref().is_none_or(|b| fit.excess < b.value) {
            best = Some(CoarserExcess { value: fit.excess, cone: fit.cone, axis_dim: w.dim() });
        }
    }
    best.ok_or_else(|| Error::Optimizer("no admissible competitor".into()))
}

/// Outcome of [`single_plane_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

/// `∫_{B_{1/2}} dist²(X, P₁) d‖V‖ / ∫_{B₁} dist²(X, spt‖C‖) d‖V‖` for
/// `C = |P₁| + |P₂|`; `0/0` is reported as 0.
pub fn single_plane_ratio(v: &SampledVarifold, c: &Cone) -> Result<Ratio> {
    let (p1, _) = c.planes().ok_or_else(|| Error::InvalidInput("single-plane ratio needs a pair".into()))?;
    check_dim(v.ambient_dim(), c.ambient_dim())?;
    let d = v.ambient_dim();
    let zero = vec![0.0; d];
    let num_idx = v.in_ball(&zero, 0.5);
    let den_idx = v.in_ball(&zero, 1.0);
    let num = par::sum(num_idx.len(), |j| {
        let i = num_idx[j];
        v.weight(i) * p1.distance_sq(v.point(i))
    });
    let den = excess_on(v, &den_idx, c);
    let scale = 1e-24 * v.mass().max(1e-300);
    Ok(if den <= scale {
        if num <= scale {
            Ratio::Finite(0.0)
        } else {
            Ratio::Infinite
        }
    } else {
        Ratio::Finite(num / den)
    })
}

/// Largest ν accepted before writing C as a graph over C⁽⁰⁾.
pub const GRAPH_NU_MAX: f64 = 0.1;

/// `∫_R R^{2−n} |∂_R((u + c)/R)|² d‖C⁽⁰⁾‖`, where `u` is a field over
/// `C⁽⁰⁾` and `c` writes `C` as a graph over `C⁽⁰⁾`.
///
/// Requires `ν(C, C⁽⁰⁾) < 0.1`, and `R` must not contain field nodes with
/// `r_{C⁽⁰⁾} < τ/2`.
pub fn radial_homogeneity_deficit(u: &ConeField, c: &Cone, region: &Region, tau: f64) -> Result<f64> {
    let c0 = u.cone();
    check_dim(c0.ambient_dim(), c.ambient_dim())?;
    let nu = cones::nu(c, c0, 400)?;
    if nu >= GRAPH_NU_MAX {
        return Err(Error::InvalidInput(format!("ν(C, C⁽⁰⁾) = {nu:.3} is too large for a graphical representation")));
    }
    let axis = c0.axis().ok_or_else(|| Error::Degenerate("C⁽⁰⁾ has empty axis".into()))?;
    for node in 0..u.len() {
        let x = u.point(node);
        if region.contains_unchecked(&x) && axis.distance(&x) < tau / 2.0 {
            return Err(Error::InvalidInput("region reaches into {r < τ/2}".into()));
        }
    }
    let graph = cone_graph_over(c, c0)?;
    let total = u.with_added(|x, piece| graph(x, piece))?;
    Ok(crate::blowup::ray_deficit(&total, 1.0, Some(region)))
}

/// For each piece of `C⁽⁰⁾`, the linear map writing the nearest plane of `C`
/// as a graph over it; returns `X ↦ c(X)`.
fn cone_graph_over<'a>(c: &'a Cone, c0: &'a Cone) -> Result<impl Fn(&[f64], usize) -> Vec<f64> + Sync + 'a> {
    let c_planes: Vec<Subspace> = c.pieces().iter().map(|p| p.plane().clone()).collect();
    let mut maps = Vec::new();
    for piece in c0.pieces() {
        let p = piece.plane().clone();
        let nearest = c_planes
            .iter()
            .min_by(|a, b| {
                p.max_angle_sin(a)
                    .partial_cmp(&p.max_angle_sin(b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .cloned()
            .ok_or_else(|| Error::Degenerate("empty cone".into()))?;
        maps.push((p, nearest));
    }
    Ok(move |x: &[f64], piece: usize| -> Vec<f64> {
        let (p, q) = &maps[piece];
        graph_offset(p, q, x)
    })
}

/// The vector `c ∈ P^⊥` with `x + c ∈ Q`, for `x ∈ P` and `Q` graphical over `P`.
pub(crate) fn graph_offset(p: &Subspace, q: &Subspace, x: &[f64]) -> Vec<f64> {
    let d = p.ambient_dim();
    let normals = linalg::complement(p.basis(), d);
    let qn = linalg::complement(q.basis(), d);
    // Solve for c = Σ a_j ν_j with ⟨x + c − o_Q, μ_r⟩ = 0 for all normals μ_r of Q.
    let rows = qn.len();
    let cols = normals.len();
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows];
    let rel = linalg::sub(x, q.offset());
    for r in 0..rows {
        for j in 0..cols {
            a[r * cols + j] = dot(&qn[r], &normals[j]);
        }
        b[r] = -dot(&qn[r], &rel);
    }
    let coef = linalg::lstsq(&a, rows, cols, &b).unwrap_or_else(|| vec![0.0; cols]);
    let mut c = vec![0.0; d];
    for (j, nu) in normals.iter().enumerate() {
        linalg::axpy(&mut c, coef[j], nu);
    }
    c
}
