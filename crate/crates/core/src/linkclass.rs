//! Links of 2-dimensional two-valued cones: sampling on the unit sphere and
//! classification into two great circles or four half great circles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::par;
use crate::twovalued::{match_slices, metric_g, TwoValuedMap};

/// Minimum number of angles for classification.
pub const MIN_ANGLES: usize = 64;

/// Relative tolerance of the degree-1 homogeneity check.
pub const HOMOGENEITY_TOL: f64 = 0.01;

/// Separation below which a refined fiber pair counts as a coincidence.
pub const COINCIDENCE_TOL: f64 = 1e-7;

/// A polyline of unit vectors on the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkArc {
    pub points: Vec<Vec<f64>>,
    /// Junction at `points[0]`.
    pub start: Option<usize>,
    /// Junction at the last point.
    pub end: Option<usize>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    /// Angle on S¹ of the base point (NaN for synthetic links).
    pub angle: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub m: usize,
    pub ambient_dim: usize,
    pub angles: Vec<f64>,
    /// Normalized graph points `(x, aᵢ)/|(x, aᵢ)|` per angle.
    pub fibers: Vec<[Vec<f64>; 2]>,
    /// Sampled angles adjacent to a coincidence.
    pub singular_flags: Vec<bool>,
    pub junctions: Vec<Junction>,
    pub arcs: Vec<LinkArc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkVerdict {
    TwoDisjointGreatCircles,
    FourHalfCircles,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionReport {
    pub point: Vec<f64>,
    pub degree: usize,
    /// Unit outgoing tangents, one per incident arc end.
    pub tangents: Vec<Vec<f64>>,
    /// `|Σ γ̇ᵢ(0)|`.
    pub balance_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkClassification {
    pub verdict: LinkVerdict,
    pub junctions: Vec<JunctionReport>,
    pub balance_defects: Vec<f64>,
    /// Smallest singular value of each arc's point matrix divided by √points.
    pub geodesy_residuals: Vec<f64>,
    /// `|∠(J₀, J₁) − π|` when there are exactly two junctions.
    pub antipodal_error: Option<f64>,
    pub diagnostics: Vec<String>,
}

fn lift(x: &[f64], a: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    p.extend_from_slice(a);
    let r = linalg::norm(&p);
    linalg::scale(&p, 1.0 / r)
}

fn base(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Normalized fiber pair at angle `theta`.
fn fiber<M: TwoValuedMap>(f: &M, theta: f64) -> Result<[Vec<f64>; 2]> {
    let x = base(theta);
    let p = f.eval(&x)?;
    Ok([lift(&x, p.a1()), lift(&x, p.a2())])
}

fn separation<M: TwoValuedMap>(f: &M, theta: f64) -> Result<f64> {
    let [a, b] = fiber(f, theta)?;
    Ok(linalg::dist(&a, &b))
}

/// Golden-section minimization of the fiber separation on `[lo, hi]`.
fn refine<M: TwoValuedMap>(f: &M, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (separation(f, c)?, separation(f, d)?);
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = separation(f, c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = separation(f, d)?;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, separation(f, t)?))
}

/// Sample the link of a 2-dimensional two-valued cone at `m` equally spaced
/// angles and assemble it into arcs between junctions.
///
/// Coincidences are located by minimizing the fiber separation between
/// samples, so junctions need not fall on sampled angles.
pub fn sample_link<M: TwoValuedMap + Sync>(f: &M, m: usize) -> Result<LinkSample> {
    if f.n() != 2 {
        return Err(Error::InvalidInput(format!("links need a 2-dimensional cone, got n = {}", f.n())));
    }
    if m < 8 {
        return Err(Error::InvalidInput("need at least 8 angles".into()));
    }
    let dim = 2 + f.k();
    let step = std::f64::consts::TAU / m as f64;
    let angles: Vec<f64> = (0..m).map(|j| j as f64 * step).collect();
    // degree-1 homogeneity on each sampled ray
    let checks = par::collect(m, |j| -> Result<f64> {
        let x = base(angles[j]);
        let p1 = f.eval(&x)?;
        let scaled = |s: f64| -> Result<f64> {
            let ps = f.eval(&[s * x[0], s * x[1]])?;
            let (a, b) = p1.clone().into_parts();
            let expect = crate::twovalued::Pair2::new(linalg::scale(&a, s), linalg::scale(&b, s));
            Ok(metric_g(&ps, &expect) / (s * (1.0 + linalg::norm(p1.a1()) + linalg::norm(p1.a2()))))
        };
        Ok(scaled(2.0)?.max(scaled(0.5)?))
    });
    for (j, c) in checks.into_iter().enumerate() {
        let c = c?;
        if c > HOMOGENEITY_TOL {
            return Err(Error::InvalidInput(format!(
                "input is not homogeneous of degree 1 (relative defect {c:.3e} at angle {:.4})",
                angles[j]
            )));
        }
    }
    let fibers = par::collect(m, |j| fiber(f, angles[j])).into_iter().collect::<Result<Vec<_>>>()?;
    let sep: Vec<f64> = fibers.iter().map(|[a, b]| linalg::dist(a, b)).collect();
    // candidate coincidences: local minima of the separation below a few steps
    let mut junctions: Vec<Junction> = Vec::new();
    let mut flags = vec![false; m];
    for j in 0..m {
        let (l, r) = (sep[(j + m - 1) % m], sep[(j + 1) % m]);
        let is_min = sep[j] <= l && sep[j] < r;
        if !(is_min && sep[j] < 3.0 * step) {
            continue;
        }
        let (t, s) = refine(f, angles[j] - step, angles[j] + step)?;
        if s < COINCIDENCE_TOL {
            let t = t.rem_euclid(std::f64::consts::TAU);
            let [a, b] = fiber(f, t)?;
            let point = linalg::normalized(&linalg::add(&a, &b)).unwrap_or(a);
            junctions.push(Junction { angle: t, point });
            flags[j] = true;
        }
    }
    junctions.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    let arcs = assemble_arcs(&angles, &fibers, &junctions);
    Ok(LinkSample { m, ambient_dim: dim, angles, fibers, singular_flags: flags, junctions, arcs })
}

/// Continue the two fiber points along consecutive angles.
fn continue_pair(fibers: &[[Vec<f64>; 2]], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, bool) {
    let mut a = vec![fibers[idx[0]][0].clone()];
    let mut b = vec![fibers[idx[0]][1].clone()];
    let mut swapped = false;
    for w in idx.windows(2) {
        let [p1, p2] = &fibers[w[0]];
        let [q1, q2] = &fibers[w[1]];
        swapped ^= match_slices(p1, p2, q1, q2).crossed;
        let (x, y) = if swapped { (q2, q1) } else { (q1, q2) };
        a.push(x.clone());
        b.push(y.clone());
    }
    (a, b, swapped)
}

fn assemble_arcs(angles: &[f64], fibers: &[[Vec<f64>; 2]], junctions: &[Junction]) -> Vec<LinkArc> {
    let m = angles.len();
    if junctions.is_empty() {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.push(0);
        let (mut a, mut b, swapped) = continue_pair(fibers, &idx);
        a.pop();
        b.pop();
        if swapped {
            // one curve covering both sheets
            a.extend(b);
            return vec![LinkArc { points: a, start: None, end: None, closed: true }];
        }
        return vec![
            LinkArc { points: a, start: None, end: None, closed: true },
            LinkArc { points: b, start: None, end: None, closed: true },
        ];
    }
    let eps = 1e-12;
    let nj = junctions.len();
    let mut arcs = Vec::new();
    for s in 0..nj {
        let (t0, t1) = (junctions[s].angle, junctions[(s + 1) % nj].angle);
        let span = (t1 - t0).rem_euclid(std::f64::consts::TAU);
        let span = if span <= eps { std::f64::consts::TAU } else { span };
        let offset = |j: usize| (angles[j] - t0).rem_euclid(std::f64::consts::TAU);
        let mut ordered: Vec<usize> = (0..m).filter(|&j| offset(j) > eps && offset(j) < span - eps).collect();
        ordered.sort_by(|&i, &j| offset(i).total_cmp(&offset(j)));
        if ordered.is_empty() {
            continue;
        }
        let (a, b, _) = continue_pair(fibers, &ordered);
        for mut pts in [a, b] {
            pts.insert(0, junctions[s].point.clone());
            pts.push(junctions[(s + 1) % nj].point.clone());
            arcs.push(LinkArc { points: pts, start: Some(s), end: Some((s + 1) % nj), closed: false });
        }
    }
    arcs
}

/// Half great circles from `j` to `−j` leaving in the unit directions
/// `sides` (orthogonal to `j`), each with `m/2` interior points.
pub fn half_circle_link(j: &[f64], sides: &[Vec<f64>], m: usize) -> Result<LinkSample> {
    let dim = j.len();
    let j = linalg::normalized(j).ok_or_else(|| Error::Degenerate("zero junction point".into()))?;
    let anti = linalg::scale(&j, -1.0);
    let half = (m / 2).max(2);
    let mut arcs = Vec::new();
    for s in sides {
        let mut w = s.clone();
        let c = dot(&w, &j);
        linalg::axpy(&mut w, -c, &j);
        let w = linalg::normalized(&w).ok_or_else(|| Error::Degenerate("side parallel to the junction".into()))?;
        let mut pts = vec![j.clone()];
        for i in 1..half {
            let t = std::f64::consts::PI * i as f64 / half as f64;
            let mut p = linalg::scale(&j, t.cos());
            linalg::axpy(&mut p, t.sin(), &w);
            pts.push(p);
        }
        pts.push(anti.clone());
        arcs.push(LinkArc { points: pts, start: Some(0), end: Some(1), closed: false });
    }
    Ok(LinkSample {
        m,
        ambient_dim: dim,
        angles: Vec::new(),
        fibers: Vec::new(),
        singular_flags: Vec::new(),
        junctions: vec![
            Junction { angle: f64::NAN, point: j },
            Junction { angle: f64::NAN, point: anti },
        ],
        arcs,
    })
}

/// Three half great circles in S² at the planted directions
/// `(1,0,0)`, `(0,1,0)`, `(−1,0,0)` between `±e₃`; the tangent sum at either
/// junction has norm 1.
pub fn broken_three_arc_link(m: usize) -> Result<LinkSample> {
    let sides = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0]];
    half_circle_link(&[0.0, 0.0, 1.0], &sides, m)
}

/// Smallest singular value of the point matrix beyond the second, over √rows.
fn planarity(points: &[Vec<f64>]) -> f64 {
    let dim = points[0].len();
    if dim <= 2 {
        return 0.0;
    }
    let mut g = vec![0.0; dim * dim];
    for p in points {
        for i in 0..dim {
            for j in 0..dim {
                g[i * dim + j] += p[i] * p[j];
            }
        }
    }
    let (vals, _) = linalg::sym_eigen(&g, dim);
    let mut v = vals;
    v.sort_by(|a, b| b.total_cmp(a));
    v[2].max(0.0).sqrt() / (points.len() as f64).sqrt()
}

/// Unit tangent at `p[0]` from a 3-point one-sided stencil in arclength.
fn outgoing_tangent(p0: &[f64], p1: &[f64], p2: &[f64]) -> Option<Vec<f64>> {
    let ang = |a: &[f64], b: &[f64]| dot(a, b).clamp(-1.0, 1.0).acos();
    let s1 = ang(p0, p1);
    let s2 = s1 + ang(p1, p2);
    if !(s1 > 0.0 && s2 > s1) {
        return None;
    }
    let c0 = -(s1 + s2) / (s1 * s2);
    let c1 = s2 / (s1 * (s2 - s1));
    let c2 = -s1 / (s2 * (s2 - s1));
    let mut d: Vec<f64> = (0..p0.len()).map(|i| c0 * p0[i] + c1 * p1[i] + c2 * p2[i]).collect();
    let r = dot(&d, p0);
    linalg::axpy(&mut d, -r, p0);
    linalg::normalized(&d)
}

/// Geodesy tolerance: arcs pass if their residual is below this.
pub const GEODESY_TOL: f64 = 1e-6;

/// Classify a sampled link.
pub fn classify_link(s: &LinkSample) -> Result<LinkClassification> {
    if s.m < MIN_ANGLES {
        return Err(Error::InsufficientSamples { needed: MIN_ANGLES, got: s.m });
    }
    let mut diagnostics = Vec::new();
    let geodesy: Vec<f64> = s.arcs.iter().map(|a| planarity(&a.points)).collect();
    let geodesic = geodesy.iter().all(|g| *g < GEODESY_TOL);
    if !geodesic {
        let worst = geodesy.iter().cloned().fold(0.0, f64::max);
        diagnostics.push(format!("arc off a great circle (residual {worst:.3e})"));
    }
    let mut reports = Vec::new();
    for (ji, j) in s.junctions.iter().enumerate() {
        let mut tangents = Vec::new();
        for arc in &s.arcs {
            let n = arc.points.len();
            if arc.start == Some(ji) && n >= 3 {
                tangents.extend(outgoing_tangent(&arc.points[0], &arc.points[1], &arc.points[2]));
            }
            if arc.end == Some(ji) && n >= 3 {
                tangents.extend(outgoing_tangent(&arc.points[n - 1], &arc.points[n - 2], &arc.points[n - 3]));
            }
        }
        let mut sum = vec![0.0; s.ambient_dim];
        for t in &tangents {
            linalg::axpy(&mut sum, 1.0, t);
        }
        reports.push(JunctionReport {
            point: j.point.clone(),
            degree: tangents.len(),
            balance_defect: linalg::norm(&sum),
            tangents,
        });
    }
    let antipodal_error = (s.junctions.len() == 2).then(|| {
        let c = dot(&s.junctions[0].point, &s.junctions[1].point).clamp(-1.0, 1.0);
        (c.acos() - std::f64::consts::PI).abs()
    });
    let verdict = match s.junctions.len() {
        0 => {
            let disjoint = s.arcs.len() == 2 && {
                let d = s.arcs[0]
                    .points
                    .iter()
                    .flat_map(|p| s.arcs[1].points.iter().map(move |q| linalg::dist(p, q)))
                    .fold(f64::INFINITY, f64::min);
                d > COINCIDENCE_TOL
            };
            if !disjoint {
                diagnostics.push(format!("{} closed curve(s) without junctions", s.arcs.len()));
            }
            if disjoint && geodesic {
                LinkVerdict::TwoDisjointGreatCircles
            } else {
                LinkVerdict::Inconsistent
            }
        }
        2 => {
            let anti_ok = antipodal_error.is_some_and(|e| e < 2.0 / s.m as f64);
            if !anti_ok {
                diagnostics.push(format!("junctions not antipodal (error {:.3e})", antipodal_error.unwrap_or(f64::NAN)));
            }
            let degrees_ok = reports.iter().all(|r| r.degree == 4);
            if !degrees_ok {
                let d: Vec<usize> = reports.iter().map(|r| r.degree).collect();
                diagnostics.push(format!("junction degrees {d:?}, expected 4"));
            }
            if anti_ok && degrees_ok && geodesic && s.arcs.len() == 4 {
                LinkVerdict::FourHalfCircles
            } else {
                LinkVerdict::Inconsistent
            }
        }
        n => {
            diagnostics.push(format!("{n} junctions"));
            LinkVerdict::Inconsistent
        }
    };
    Ok(LinkClassification {
        verdict,
        balance_defects: reports.iter().map(|r| r.balance_defect).collect(),
        junctions: reports,
        geodesy_residuals: geodesy,
        antipodal_error,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_stencil_exact_direction_on_great_circle() {
        let p = |t: f64| vec![t.cos(), 0.0, t.sin()];
        let t = outgoing_tangent(&p(0.0), &p(0.01), &p(0.03)).unwrap();
        assert!((t[2] - 1.0).abs() < 1e-4 && t[0].abs() < 1e-12);
    }

    #[test]
    fn broken_link_is_inconsistent_with_unit_imbalance() {
        let s = broken_three_arc_link(128).unwrap();
        let c = classify_link(&s).unwrap();
        assert_eq!(c.verdict, LinkVerdict::Inconsistent);
        for d in &c.balance_defects {
            assert!((d - 1.0).abs() < 1e-3, "{d}");
        }
    }

    #[test]
    fn planted_four_arcs_balance() {
        let sides = vec![vec![1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, -1.0, 0.0]];
        let s = half_circle_link(&[0.0, 1.0, 0.0, 0.0], &sides, 128).unwrap();
        let c = classify_link(&s).unwrap();
        assert_eq!(c.verdict, LinkVerdict::FourHalfCircles);
        assert!(c.balance_defects.iter().all(|d| *d < 1e-10));
    }
}
