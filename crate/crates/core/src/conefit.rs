//! Best-fit cones, the multiscale excess-decay pipeline and singular-set graph fits.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{self, Cone, ConeClass, HalfPlane};
use crate::error::{check_dim, Error, Result};
use crate::excess::{self, QOptions};
use crate::geometry::{Region, Subspace};
use crate::linalg::{self, dot};
use crate::par;
use crate::varifold::{SampledVarifold, DELTA_THETA};

/// Cone family searched by [`fit_cone`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitClass {
    Pair,
    FourHp,
}

impl FitClass {
    pub fn parse(s: &str) -> Result<FitClass> {
        match s {
            "pair" => Ok(FitClass::Pair),
            "four_hp" => Ok(FitClass::FourHp),
            _ => Err(Error::InvalidInput(format!("unknown cone class '{s}' (pair | four_hp)"))),
        }
    }

    /// Family matching the structure of `c`.
    pub fn of(c: &Cone) -> FitClass {
        if c.class() == ConeClass::FourHalfPlanes {
            FitClass::FourHp
        } else {
            FitClass::Pair
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of starts; the first is the initial cone itself.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Relative decrease of the objective below which iteration stops.
    pub tol: f64,
    /// Size of the random perturbation applied to the initial cone on restarts.
    pub perturbation: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 4, seed: 0, max_iter: 60, tol: 1e-13, perturbation: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub cone: Cone,
    pub excess: f64,
    pub iterations: usize,
    /// Index of the winning start (0 is the unperturbed initial cone).
    pub start: usize,
    pub converged: bool,
    /// `A(C) ⊂ A(C⁽⁰⁾)` holds to 1e-8.
    pub axis_constraint_ok: bool,
}

/// Copy of `c` with every plane moved to pass through the origin.
pub fn through_origin(c: &Cone) -> Result<Cone> {
    let lin = |s: &Subspace| Subspace::linear(s.ambient_dim(), s.basis());
    if let Some((p1, p2)) = c.planes() {
        return Cone::pair(lin(p1)?, lin(p2)?);
    }
    if let Some(hp) = c.half_planes() {
        let b = lin(hp[0].boundary())?;
        let sides: Vec<Vec<f64>> = hp.iter().map(|h| h.side().to_vec()).collect();
        return Cone::from_axis_and_sides(b, &[sides[0].clone(), sides[1].clone(), sides[2].clone(), sides[3].clone()]);
    }
    let p = c.pieces()[0].plane().clone();
    Cone::plane(lin(&p)?, c.pieces()[0].multiplicity())
}

/// Axis every fitted pair is required to contain: `A(C⁽⁰⁾)` when it has
/// dimension n − 1, otherwise `{0}`.
fn required_pair_axis(c0: &Cone) -> Subspace {
    let d = c0.ambient_dim();
    match c0.axis() {
        Some(a) if a.dim() + 1 == c0.n() => a.direction(),
        _ => Subspace::zero(d),
    }
}

/// Minimizer of `excess_E(V, ·, R)` over the family `class`, started from
/// `C⁽⁰⁾` and `opts.restarts − 1` seeded perturbations of it.
///
/// Pairs are fitted by alternating nearest-plane assignment and principal
/// subspaces; four half-plane cones keep the axis `A(C⁽⁰⁾)` and refit the
/// cross-section directions.
pub fn fit_cone(v: &SampledVarifold, class: FitClass, c0: &Cone, region: &Region, opts: &FitOptions) -> Result<FitResult> {
    check_dim(v.ambient_dim(), c0.ambient_dim())?;
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("restarts must be at least 1".into()));
    }
    let init = through_origin(c0)?;
    match class {
        FitClass::Pair => {
            let w = required_pair_axis(&init);
            let start = if init.is_pair() {
                init.clone()
            } else {
                pair_from(&init, &w)?
            };
            let mut fit = fit_pair_with_axis(v, region, &w, &start, opts)?;
            fit.axis_constraint_ok = axis_within(&fit.cone, c0);
            Ok(fit)
        }
        FitClass::FourHp => {
            let axis = init
                .axis()
                .filter(|a| a.dim() + 1 == init.n())
                .ok_or_else(|| Error::InvalidInput("four half-plane fit needs C⁽⁰⁾ with an (n−1)-dimensional axis".into()))?
                .direction();
            let omegas: Vec<Vec<f64>> = match init.half_planes() {
                Some(hp) => hp.iter().map(|h| h.side().to_vec()).collect(),
                None => {
                    let (p1, p2) = init
                        .planes()
                        .ok_or_else(|| Error::InvalidInput("cannot seed half-planes from a single plane".into()))?;
                    let s1 = first_side(p1, &axis)?;
                    let s2 = first_side(p2, &axis)?;
                    vec![s1.clone(), linalg::scale(&s1, -1.0), s2.clone(), linalg::scale(&s2, -1.0)]
                }
            };
            let mut fit = fit_four_hp(v, region, &axis, &omegas, opts)?;
            fit.axis_constraint_ok = axis_within(&fit.cone, c0);
            Ok(fit)
        }
    }
}

fn first_side(p: &Subspace, axis: &Subspace) -> Result<Vec<f64>> {
    p.basis()
        .iter()
        .filter_map(|b| linalg::normalized(&axis.perp_of_vector(b)))
        .next()
        .ok_or_else(|| Error::Degenerate("plane lies in the axis".into()))
}

fn pair_from(c: &Cone, w: &Subspace) -> Result<Cone> {
    let hp = c
        .half_planes()
        .ok_or_else(|| Error::InvalidInput("cannot seed a pair from a single plane".into()))?;
    let mk = |a: &HalfPlane, b: &HalfPlane| -> Result<Subspace> {
        let mut dirs = w.basis().to_vec();
        dirs.extend(hp[0].boundary().basis().iter().cloned());
        dirs.push(linalg::sub(a.side(), b.side()));
        let dirs = linalg::orthonormalize(&dirs, 1e-8);
        Subspace::linear(w.ambient_dim(), &dirs[..c.n()])
    };
    Cone::pair(mk(&hp[0], &hp[2])?, mk(&hp[1], &hp[3])?)
}

fn axis_within(c: &Cone, c0: &Cone) -> bool {
    match (c.axis(), c0.axis()) {
        (Some(a), Some(a0)) => a0.direction().contains_subspace(&a.direction(), 1e-8),
        (None, _) => true,
        _ => false,
    }
}

struct Projected {
    /// Complement coordinates of every sample in the region.
    q: Vec<Vec<f64>>,
    w: Vec<f64>,
    /// Orthonormal basis of the complement of the fixed subspace.
    perp: Vec<Vec<f64>>,
}

fn project_samples(v: &SampledVarifold, region: &Region, fixed: &Subspace) -> Result<Projected> {
    let d = v.ambient_dim();
    let perp = linalg::complement(fixed.basis(), d);
    let idx: Vec<usize> = (0..v.len()).filter(|&i| region.contains_unchecked(v.point(i))).collect();
    if idx.is_empty() {
        return Err(Error::EmptySet("no varifold samples in the fit region"));
    }
    let q = par::collect(idx.len(), |j| {
        let p = v.point(idx[j]);
        perp.iter().map(|e| dot(e, p)).collect::<Vec<f64>>()
    });
    let w = idx.iter().map(|&i| v.weight(i)).collect();
    Ok(Projected { q, w, perp })
}

fn lift(perp: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; perp[0].len()];
    for (e, &x) in perp.iter().zip(c) {
        linalg::axpy(&mut out, x, e);
    }
    out
}

fn dist2_plane(q: &[f64], u: &[Vec<f64>]) -> f64 {
    let t: f64 = u.iter().map(|e| dot(e, q).powi(2)).sum();
    (linalg::norm_sq(q) - t).max(0.0)
}

fn moment(pr: &Projected, sel: impl Fn(usize) -> bool + Sync) -> Vec<f64> {
    let m = pr.perp.len();
    par::sum_vec(pr.q.len(), m * m, |j, acc| {
        if sel(j) {
            let q = &pr.q[j];
            let w = pr.w[j];
            for a in 0..m {
                for b in 0..m {
                    acc[a * m + b] += w * q[a] * q[b];
                }
            }
        }
    })
}

fn perturb(rng: &mut ChaCha8Rng, vecs: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    vecs.iter()
        .map(|v| v.iter().map(|x| x + eps * rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Best pair of n-planes both containing the linear subspace `w`, started
/// from `init` and seeded perturbations of it.
pub fn fit_pair_with_axis(v: &SampledVarifold, region: &Region, w: &Subspace, init: &Cone, opts: &FitOptions) -> Result<FitResult> {
    let n = v.n();
    if w.dim() >= n {
        return Err(Error::InvalidInput("required axis must have dimension below n".into()));
    }
    let (ip1, ip2) = init.planes().ok_or_else(|| Error::InvalidInput("initial cone is not a pair".into()))?;
    let pr = project_samples(v, region, w)?;
    let free = n - w.dim();
    let start_u = |p: &Subspace| -> Vec<Vec<f64>> {
        let c: Vec<Vec<f64>> = p
            .basis()
            .iter()
            .map(|b| pr.perp.iter().map(|e| dot(e, b)).collect())
            .collect();
        linalg::orthonormalize(&c, 1e-8)
    };
    let u0 = [start_u(ip1), start_u(ip2)];
    if u0.iter().any(|u| u.len() < free) {
        return Err(Error::InvalidInput("initial planes do not contain the required axis".into()));
    }
    let runs = par::collect(opts.restarts, |r| {
        let mut u = u0.clone();
        if r > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            for ui in u.iter_mut() {
                *ui = linalg::orthonormalize(&perturb(&mut rng, ui, opts.perturbation), 1e-8);
            }
            if u.iter().any(|ui| ui.len() < free) {
                return None;
            }
        }
        pair_iterate(&pr, u, free, opts).map(|(u, it, conv)| (r, u, it, conv))
    });
    let mut best: Option<FitResult> = None;
    for (r, u, it, conv) in runs.into_iter().flatten() {
        let planes: Vec<Subspace> = u
            .iter()
            .map(|ui| {
                let mut dirs = w.basis().to_vec();
                dirs.extend(ui.iter().map(|c| lift(&pr.perp, c)));
                Subspace::linear(v.ambient_dim(), &dirs)
            })
            .collect::<Result<_>>()?;
        let Ok(cone) = Cone::pair(planes[0].clone(), planes[1].clone()) else { continue };
        if planes[0].max_angle_sin(&planes[1]) < 1e-6 {
            continue;
        }
        let e = excess::excess_e(v, &cone, region)?;
        if best.as_ref().is_none_or(|b| e < b.excess) {
            best = Some(FitResult { cone, excess: e, iterations: it, start: r, converged: conv, axis_constraint_ok: true });
        }
    }
    let init_e = excess::excess_e(v, init, region)?;
    match best {
        Some(b) if b.excess <= init_e => Ok(b),
        Some(_) => Ok(FitResult { cone: init.clone(), excess: init_e, iterations: 0, start: 0, converged: true, axis_constraint_ok: true }),
        None => Err(Error::Optimizer("every start degenerated to coinciding planes".into())),
    }
}

type PairState = [Vec<Vec<f64>>; 2];

fn pair_iterate(pr: &Projected, mut u: PairState, free: usize, opts: &FitOptions) -> Option<(PairState, usize, bool)> {
    let m = pr.perp.len();
    let mut prev = f64::INFINITY;
    for it in 1..=opts.max_iter.max(1) {
        let assign: Vec<u8> = par::collect(pr.q.len(), |j| {
            u8::from(dist2_plane(&pr.q[j], &u[1]) < dist2_plane(&pr.q[j], &u[0]))
        });
        let obj = par::sum(pr.q.len(), |j| pr.w[j] * dist2_plane(&pr.q[j], &u[assign[j] as usize]));
        if prev.is_finite() && prev - obj <= opts.tol * prev.max(f64::MIN_POSITIVE) {
            return Some((u, it, true));
        }
        prev = obj;
        let mut next = u.clone();
        for (s, slot) in next.iter_mut().enumerate() {
            let mm = moment(pr, |j| assign[j] as usize == s);
            if mm.iter().all(|x| *x == 0.0) {
                return None;
            }
            let (_, vecs) = linalg::sym_eigen(&mm, m);
            *slot = vecs[..free].to_vec();
        }
        u = next;
    }
    Some((u, opts.max_iter, false))
}

/// Best four half-plane cone with boundary `axis` (linear, dimension n − 1).
pub fn fit_four_hp(v: &SampledVarifold, region: &Region, axis: &Subspace, omegas: &[Vec<f64>], opts: &FitOptions) -> Result<FitResult> {
    if omegas.len() != 4 {
        return Err(Error::InvalidInput("need four cross-section directions".into()));
    }
    let pr = project_samples(v, region, axis)?;
    let to_q = |s: &[f64]| -> Vec<f64> { pr.perp.iter().map(|e| dot(e, s)).collect() };
    let w0: Vec<Vec<f64>> = omegas
        .iter()
        .map(|s| linalg::normalized(&to_q(s)).ok_or_else(|| Error::Degenerate("side lies in the axis".into())))
        .collect::<Result<_>>()?;
    let runs = par::collect(opts.restarts, |r| {
        let mut om = w0.clone();
        if r > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            om = perturb(&mut rng, &om, opts.perturbation);
            for o in om.iter_mut() {
                *o = linalg::normalized(o)?;
            }
        }
        hp_iterate(&pr, om, opts).map(|(om, it, conv)| (r, om, it, conv))
    });
    let mut best: Option<FitResult> = None;
    for (r, om, it, conv) in runs.into_iter().flatten() {
        let sides: Vec<Vec<f64>> = om.iter().map(|o| lift(&pr.perp, o)).collect();
        let Ok(cone) = Cone::from_axis_and_sides(axis.clone(), &[sides[0].clone(), sides[1].clone(), sides[2].clone(), sides[3].clone()]) else {
            continue;
        };
        let e = excess::excess_e(v, &cone, region)?;
        if best.as_ref().is_none_or(|b| e < b.excess) {
            best = Some(FitResult { cone, excess: e, iterations: it, start: r, converged: conv, axis_constraint_ok: true });
        }
    }
    best.ok_or_else(|| Error::Optimizer("every start produced coinciding half-planes".into()))
}

fn hp_dist2(q: &[f64], om: &[f64]) -> f64 {
    let t = dot(q, om);
    let q2 = linalg::norm_sq(q);
    if t > 0.0 {
        (q2 - t * t).max(0.0)
    } else {
        q2
    }
}

fn hp_iterate(pr: &Projected, mut om: Vec<Vec<f64>>, opts: &FitOptions) -> Option<(Vec<Vec<f64>>, usize, bool)> {
    let m = pr.perp.len();
    let mut prev = f64::INFINITY;
    for it in 1..=opts.max_iter.max(1) {
        let assign: Vec<u8> = par::collect(pr.q.len(), |j| {
            let mut b = (0u8, f64::INFINITY);
            for (s, o) in om.iter().enumerate() {
                let d = hp_dist2(&pr.q[j], o);
                if d < b.1 {
                    b = (s as u8, d);
                }
            }
            b.0
        });
        let obj = par::sum(pr.q.len(), |j| pr.w[j] * hp_dist2(&pr.q[j], &om[assign[j] as usize]));
        if prev.is_finite() && prev - obj <= opts.tol * prev.max(f64::MIN_POSITIVE) {
            return Some((om, it, true));
        }
        prev = obj;
        for (s, slot) in om.iter_mut().enumerate() {
            let sel = |j: usize| assign[j] as usize == s && dot(&pr.q[j], slot) > 0.0;
            let mm = moment(pr, sel);
            if mm.iter().all(|x| *x == 0.0) {
                continue;
            }
            let (_, vecs) = linalg::sym_eigen(&mm, m);
            let mut e = vecs[0].clone();
            let mean = par::sum(pr.q.len(), |j| if sel(j) { pr.w[j] * dot(&pr.q[j], &e) } else { 0.0 });
            if mean < 0.0 {
                e = linalg::scale(&e, -1.0);
            }
            *slot = e;
        }
    }
    Some((om, opts.max_iter, false))
}

/// One scale of the decay pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRecord {
    pub j: usize,
    pub scale: f64,
    pub cone: Cone,
    /// Orthonormal basis of the fitted axis.
    pub axis: Vec<Vec<f64>>,
    /// Sine of the largest principal angle between consecutive fitted axes.
    pub rotation_step: f64,
    /// `θ^{−j(n+2)} ∫_{B_{θʲ}} dist²(X, spt‖C⁽ʲ⁾‖) d‖V‖`.
    pub one_sided: f64,
    /// Reverse excess of the fitted cone at the same scale, same normalization.
    pub reverse: f64,
    /// `ν(C⁽ʲ⁾, C⁽ʲ⁻¹⁾)`.
    pub nu_step: f64,
    /// Rescaled mass in the unit ball.
    pub mass: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayGates {
    pub density: f64,
    pub density_radius: f64,
    pub density_ok: bool,
    /// `Q_V(C⁽⁰⁾)` at the largest dyadic scale whose cylinder is covered by V.
    pub q: Option<f64>,
    pub q_scale: Option<f64>,
    pub q_gate: f64,
    pub q_ok: bool,
    /// Every fitted axis lies in `A(C⁽⁰⁾)`.
    pub axis_constraint_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub theta: f64,
    pub center: Vec<f64>,
    pub class: FitClass,
    pub records: Vec<DecayRecord>,
    /// Least-squares slope of `log one_sided` against `log scale` (at least four scales).
    pub slope: Option<f64>,
    pub exact_cone: bool,
    /// Stopped because the next scale fell below 8h.
    pub truncated: bool,
    pub gates: DecayGates,
    pub singular_graph: Option<SingularGraphFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub fit: FitOptions,
    /// Soft gate on `Q_V(C⁽⁰⁾)`; recorded in the report, never fatal.
    pub q_gate: f64,
    /// Quadrature points per cone piece for reverse excesses.
    pub reverse_points: usize,
    pub class: Option<FitClass>,
    pub singular_graph: bool,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { fit: FitOptions::default(), q_gate: 1.0, reverse_points: 4000, class: None, singular_graph: false }
    }
}

/// Density-ratio radius for the Θ ≥ 2 precondition, in units of h.
pub const DENSITY_RADIUS_CELLS: f64 = 16.0;

/// Run the excess-improvement ladder at scales `θʲ`, `j = 1..J`, about `center`.
pub fn decay_pipeline(v: &SampledVarifold, c0: &Cone, theta: f64, steps: usize, center: &[f64], opts: &DecayOptions) -> Result<DecayReport> {
    check_dim(v.ambient_dim(), c0.ambient_dim())?;
    check_dim(v.ambient_dim(), center.len())?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput("θ must lie in (0, 1)".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("J must be at least 1".into()));
    }
    let h = v.resolution();
    let density_radius = DENSITY_RADIUS_CELLS * h;
    let density = v.density_ratio(center, density_radius)?;
    if density < 2.0 - DELTA_THETA {
        return Err(Error::NotSingularPoint(format!(
            "density ratio {density:.4} at radius {density_radius:.4e} is below 2 − δ"
        )));
    }
    let class = opts.class.unwrap_or_else(|| FitClass::of(c0));
    let c0_local = through_origin(c0)?;
    let (q, q_scale) = gate_q(v, &c0_local, center, opts)?;
    let q_ok = q.is_some_and(|q| q <= opts.q_gate);
    let n = v.n();
    let mut prev = c0_local.clone();
    let mut records = Vec::new();
    let mut truncated = false;
    let mut axis_ok = true;
    for j in 1..=steps {
        let scale = theta.powi(j as i32);
        if scale < 8.0 * h {
            truncated = true;
            break;
        }
        let margin = 1.0 + 4.0 * h / scale;
        let vj = v.window(center, scale, margin)?;
        let unit = Region::unit_ball(v.ambient_dim());
        let fit = fit_cone(&vj, class, &prev, &unit, &opts.fit)?;
        axis_ok &= fit.axis_constraint_ok;
        let reverse = reverse_in_ball(&vj, &fit.cone, opts.reverse_points);
        let mass = vj.mass_in(&unit)?;
        let nu_step = cones::nu(&fit.cone, &prev, 400)?;
        let rotation_step = match (fit.cone.axis(), prev.axis()) {
            (Some(a), Some(b)) if a.dim() == b.dim() && a.dim() > 0 => a.direction().max_angle_sin(&b.direction()),
            _ => 0.0,
        };
        records.push(DecayRecord {
            j,
            scale,
            axis: fit.cone.axis().map(|a| a.basis().to_vec()).unwrap_or_default(),
            cone: fit.cone.clone(),
            rotation_step,
            one_sided: fit.excess,
            reverse,
            nu_step,
            mass,
            samples: vj.len(),
        });
        prev = fit.cone;
    }
    let _ = n;
    let exact_cone = !records.is_empty()
        && records.iter().all(|r| r.one_sided + r.reverse <= 1e-8 * r.mass.max(f64::MIN_POSITIVE));
    let slope = fit_slope(&records);
    let singular_graph = if opts.singular_graph {
        let ball = Region::ball(center.to_vec(), theta);
        Some(singular_graph_fit(v, &c0.translated(center)?, &ball, &SingularOptions::default())?)
    } else {
        None
    };
    Ok(DecayReport {
        theta,
        center: center.to_vec(),
        class,
        records,
        slope,
        exact_cone,
        truncated,
        gates: DecayGates { density, density_radius, density_ok: true, q, q_scale, q_gate: opts.q_gate, q_ok, axis_constraint_ok: axis_ok },
        singular_graph,
    })
}

fn gate_q(v: &SampledVarifold, c0: &Cone, center: &[f64], opts: &DecayOptions) -> Result<(Option<f64>, Option<f64>)> {
    if c0.axis().is_none() || c0.graph_pieces().is_err() {
        return Ok((None, None));
    }
    let n = v.n();
    let cover = par::max(v.len(), |i| {
        let p = v.point(i);
        (0..n).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>().sqrt()
    });
    // the base cylinder of radius 2 must sit inside the sampled window
    let mut s = 1.0;
    while 2.0 * s > cover && s > 16.0 * v.resolution() {
        s /= 2.0;
    }
    if 2.0 * s > cover {
        return Ok((None, None));
    }
    let vs = v.window(center, s, f64::MAX)?;
    let qo = QOptions { points: opts.reverse_points.max(1000), ..QOptions::default() };
    match excess::excess_q(&vs, c0, &qo) {
        Ok(r) => Ok((Some(r.q), Some(s))),
        Err(Error::EmptySet(_)) => Ok((None, None)),
        Err(e) => Err(e),
    }
}

/// `∫_{B₁ ∩ {r ≥ 1/8}} dist²(X, spt‖V‖) d‖C‖` by cone quadrature.
pub fn reverse_in_ball(v: &SampledVarifold, c: &Cone, points: usize) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let zero = vec![0.0; c.ambient_dim()];
    let quad = excess::cone_quadrature(c, &zero, 1.0, points);
    let axis = c.axis();
    par::sum(quad.len(), |j| {
        let (p, w) = &quad[j];
        if linalg::norm_sq(p) >= 1.0 || axis.is_some_and(|a| a.distance(p) < excess::COLLAR) {
            return 0.0;
        }
        w * excess::dist_sq_to_varifold(v, p)
    })
}

fn fit_slope(records: &[DecayRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.one_sided > 0.0 && r.one_sided.is_finite())
        .map(|r| (r.scale.ln(), r.one_sided.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularOptions {
    /// Density radius in units of h.
    pub radius_cells: f64,
    pub degree: usize,
    pub alpha: f64,
}

impl Default for SingularOptions {
    fn default() -> Self {
        SingularOptions { radius_cells: 8.0, degree: 3, alpha: 0.5 }
    }
}

/// Polynomial `φ: A(C⁽⁰⁾) → A(C⁽⁰⁾)^⊥` through the detected high-density points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularGraphFit {
    pub axis: Vec<Vec<f64>>,
    pub normal: Vec<Vec<f64>>,
    /// Exponent vectors of the monomials in axis coordinates.
    pub monomials: Vec<Vec<usize>>,
    /// One coefficient row per normal direction.
    pub coefficients: Vec<Vec<f64>>,
    /// Fiber representatives `(y, φ-value)` the fit passes through.
    pub points: Vec<(Vec<f64>, Vec<f64>)>,
    pub detected: usize,
    pub residual_sup: f64,
    pub alpha: f64,
    /// `sup |Dφ(y) − Dφ(y′)| / |y − y′|^α` over the representatives.
    pub holder: f64,
}

impl SingularGraphFit {
    /// `φ(y)` in normal coordinates.
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let basis: Vec<f64> = self.monomials.iter().map(|e| mono(y, e)).collect();
        self.coefficients.iter().map(|row| dot(row, &basis)).collect()
    }

    /// `Dφ(y)`: one row per normal direction.
    pub fn gradient(&self, y: &[f64]) -> Vec<Vec<f64>> {
        self.coefficients
            .iter()
            .map(|row| {
                (0..y.len())
                    .map(|a| {
                        self.monomials
                            .iter()
                            .zip(row)
                            .map(|(e, c)| {
                                if e[a] == 0 {
                                    0.0
                                } else {
                                    let mut ee = e.clone();
                                    ee[a] -= 1;
                                    c * e[a] as f64 * mono(y, &ee)
                                }
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// `φ(y)` as a point of the ambient space.
    pub fn point(&self, y: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.normal.first().or(self.axis.first()).map_or(0, |v| v.len())];
        for (e, c) in self.axis.iter().zip(y) {
            linalg::axpy(&mut p, *c, e);
        }
        for (e, c) in self.normal.iter().zip(self.eval(y)) {
            linalg::axpy(&mut p, c, e);
        }
        p
    }
}

fn mono(y: &[f64], e: &[usize]) -> f64 {
    y.iter().zip(e).map(|(x, &p)| x.powi(p as i32)).product()
}

fn monomials(m: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; m]];
    for _ in 0..degree {
        let mut next = out.clone();
        for e in &out {
            for a in 0..m {
                let mut f = e.clone();
                f[a] += 1;
                if !next.contains(&f) {
                    next.push(f);
                }
            }
        }
        out = next;
    }
    out.sort_by_key(|e| (e.iter().sum::<usize>(), std::cmp::Reverse(e.clone())));
    out
}

/// Detect samples with density ratio ≥ 2 − δ in `ball`, check that they form
/// a graph over `A(C⁽⁰⁾)` and fit a polynomial of degree ≤ 3 through them.
pub fn singular_graph_fit(v: &SampledVarifold, c0: &Cone, ball: &Region, opts: &SingularOptions) -> Result<SingularGraphFit> {
    check_dim(v.ambient_dim(), c0.ambient_dim())?;
    let axis = c0.axis().ok_or_else(|| Error::Degenerate("C⁽⁰⁾ has empty axis".into()))?;
    let dir = axis.direction();
    let axis_basis = dir.basis().to_vec();
    let normal = linalg::complement(&axis_basis, v.ambient_dim());
    let h = v.resolution();
    let rho = opts.radius_cells * h;
    let cand: Vec<usize> = (0..v.len()).filter(|&i| ball.contains_unchecked(v.point(i))).collect();
    let dens = par::collect(cand.len(), |j| v.density_ratio(v.point(cand[j]), rho).unwrap_or(0.0));
    let hits: Vec<usize> = cand
        .iter()
        .zip(&dens)
        .filter(|(_, d)| **d >= 2.0 - DELTA_THETA)
        .map(|(&i, _)| i)
        .collect();
    if hits.is_empty() {
        return Err(Error::EmptySet("no Θ ≥ 2 − δ points in the ball"));
    }
    let coord = |p: &[f64], b: &[Vec<f64>]| -> Vec<f64> { b.iter().map(|e| dot(e, p)).collect() };
    let mut bins: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for &i in &hits {
        let y = coord(v.point(i), &axis_basis);
        let key = y.iter().map(|t| (t / h).floor() as i64).collect();
        bins.entry(key).or_default().push(i);
    }
    let mut reps = Vec::new();
    for members in bins.values() {
        let pts: Vec<Vec<f64>> = members.iter().map(|&i| coord(v.point(i), &normal)).collect();
        let groups = single_linkage(&pts, 2.0 * h);
        if groups.len() > 1 {
            let centers: Vec<Vec<f64>> = groups.iter().map(|g| mean_of(g.iter().map(|&a| &pts[a]))).collect();
            for a in 0..centers.len() {
                for b in a + 1..centers.len() {
                    let d = linalg::dist(&centers[a], &centers[b]);
                    if d > 3.0 * h {
                        return Err(Error::NotGraphical(format!(
                            "two high-density clusters {d:.3e} apart on one axis fiber"
                        )));
                    }
                }
            }
        }
        let wsum: f64 = members.iter().map(|&i| v.weight(i)).sum();
        let mut y = vec![0.0; axis_basis.len()];
        let mut z = vec![0.0; normal.len()];
        for (&i, q) in members.iter().zip(&pts) {
            linalg::axpy(&mut y, v.weight(i) / wsum, &coord(v.point(i), &axis_basis));
            linalg::axpy(&mut z, v.weight(i) / wsum, q);
        }
        reps.push((y, z));
    }
    let m = axis_basis.len();
    let mut degree = opts.degree.min(3);
    let mut monos = monomials(m, degree);
    while degree > 0 && monos.len() * 2 > reps.len() {
        degree -= 1;
        monos = monomials(m, degree);
    }
    let rows = reps.len();
    let cols = monos.len();
    let mut a = vec![0.0; rows * cols];
    for (r, (y, _)) in reps.iter().enumerate() {
        for (c, e) in monos.iter().enumerate() {
            a[r * cols + c] = mono(y, e);
        }
    }
    let mut coefficients = Vec::new();
    for comp in 0..normal.len() {
        let b: Vec<f64> = reps.iter().map(|(_, z)| z[comp]).collect();
        let coef = linalg::lstsq(&a, rows, cols, &b).ok_or_else(|| Error::Degenerate("singular set fit is rank deficient".into()))?;
        coefficients.push(coef);
    }
    let mut fit = SingularGraphFit {
        axis: axis_basis,
        normal,
        monomials: monos,
        coefficients,
        points: reps,
        detected: hits.len(),
        residual_sup: 0.0,
        alpha: opts.alpha,
        holder: 0.0,
    };
    fit.residual_sup = fit
        .points
        .iter()
        .map(|(y, z)| linalg::dist(&fit.eval(y), z))
        .fold(0.0, f64::max);
    let grads: Vec<Vec<f64>> = fit.points.iter().map(|(y, _)| fit.gradient(y).concat()).collect();
    let mut holder: f64 = 0.0;
    for a in 0..fit.points.len() {
        for b in a + 1..fit.points.len() {
            let d = linalg::dist(&fit.points[a].0, &fit.points[b].0);
            if d > 0.0 {
                holder = holder.max(linalg::dist(&grads[a], &grads[b]) / d.powf(opts.alpha));
            }
        }
    }
    fit.holder = holder;
    Ok(fit)
}

fn mean_of<'a>(it: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut cnt = 0.0;
    for p in it {
        if acc.is_empty() {
            acc = vec![0.0; p.len()];
        }
        linalg::axpy(&mut acc, 1.0, p);
        cnt += 1.0;
    }
    linalg::scale(&acc, 1.0 / cnt)
}

fn single_linkage(pts: &[Vec<f64>], r: f64) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; pts.len()];
    let mut groups = Vec::new();
    for s in 0..pts.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let g = groups.len();
        label[s] = g;
        let mut stack = vec![s];
        let mut members = vec![s];
        while let Some(a) = stack.pop() {
            for b in 0..pts.len() {
                if label[b] == usize::MAX && linalg::dist(&pts[a], &pts[b]) <= r {
                    label[b] = g;
                    stack.push(b);
                    members.push(b);
                }
            }
        }
        groups.push(members);
    }
    groups
}
