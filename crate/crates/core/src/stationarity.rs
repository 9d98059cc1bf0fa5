//! Stationarity checks: first-variation defect of sampled varifolds and the
//! weak minimal surface system residual of single-valued sheets.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot};
use crate::par;
use crate::twovalued::{match_slices, SheetGrid, TwoValuedMap};
use crate::varifold::{omega, SampledVarifold};

/// Fraction of unreliable tangents tolerated inside a field's support.
pub const UNRELIABLE_MAX: f64 = 0.05;

/// `β(s) = (1 − s²)⁴` for `s < 1`.
fn beta(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - s2).powi(4)
    }
}

/// `∇_X β(|X − c|/r)`.
fn grad_beta(x: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let d = linalg::sub(x, c);
    let s2 = linalg::norm_sq(&d) / (r * r);
    if s2 >= 1.0 {
        return vec![0.0; x.len()];
    }
    let f = -8.0 * (1.0 - s2).powi(3) / (r * r);
    linalg::scale(&d, f)
}

/// `sup_s |β'(s)|`, attained at `s = 1/√7`.
fn beta_slope_max() -> f64 {
    8.0 / 7f64.sqrt() * (6.0f64 / 7.0).powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `Φ = a·β·e_p`.
    CoordinateBump { direction: usize },
    /// `Φ = a·β·(X − c)/r`.
    RadialBump,
}

/// Compactly supported vector field on the ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestField {
    #[serde(flatten)]
    pub kind: FieldKind,
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl TestField {
    pub fn coordinate(direction: usize, center: Vec<f64>, radius: f64) -> TestField {
        TestField { kind: FieldKind::CoordinateBump { direction }, center, radius, amplitude: 1.0 }
    }

    pub fn radial(center: Vec<f64>, radius: f64) -> TestField {
        TestField { kind: FieldKind::RadialBump, center, radius, amplitude: 1.0 }
    }

    pub fn scaled(&self, s: f64) -> TestField {
        TestField { amplitude: self.amplitude * s, ..self.clone() }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        check_dim(dim, self.center.len())?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput("test field radius must be positive".into()));
        }
        if let FieldKind::CoordinateBump { direction } = self.kind {
            if direction >= dim {
                return Err(Error::InvalidInput(format!("direction {direction} out of range for ℝ^{dim}")));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let s2 = linalg::dist_sq(x, &self.center) / (self.radius * self.radius);
        let b = self.amplitude * beta(s2);
        match self.kind {
            FieldKind::CoordinateBump { direction } => {
                let mut v = vec![0.0; x.len()];
                v[direction] = b;
                v
            }
            FieldKind::RadialBump => linalg::scale(&linalg::sub(x, &self.center), b / self.radius),
        }
    }

    /// `div_S Φ(x)` for the tangent plane spanned by the orthonormal rows of
    /// `tangent` (flattened, `n` rows of length `dim`).
    pub fn tangential_divergence(&self, x: &[f64], tangent: &[f64], n: usize) -> f64 {
        let dim = x.len();
        let g = grad_beta(x, &self.center, self.radius);
        let rows = || tangent.chunks(dim).take(n);
        let pg: Vec<f64> = {
            let mut p = vec![0.0; dim];
            for t in rows() {
                linalg::axpy(&mut p, dot(t, &g), t);
            }
            p
        };
        let v = match self.kind {
            FieldKind::CoordinateBump { direction } => pg[direction],
            FieldKind::RadialBump => {
                let s2 = linalg::dist_sq(x, &self.center) / (self.radius * self.radius);
                let d = linalg::sub(x, &self.center);
                (dot(&pg, &d) + n as f64 * beta(s2)) / self.radius
            }
        };
        self.amplitude * v
    }

    /// Upper bound for the operator norm of `DΦ`.
    pub fn derivative_bound(&self) -> f64 {
        let slope = beta_slope_max() / self.radius;
        let b = match self.kind {
            FieldKind::CoordinateBump { .. } => slope,
            FieldKind::RadialBump => slope + 1.0 / self.radius,
        };
        self.amplitude.abs() * b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDefect {
    pub field: TestField,
    /// `Σ w · div_S Φ`.
    pub raw: f64,
    /// `|raw| / (sup|DΦ| · ‖V‖(supp Φ))`.
    pub normalized: f64,
    pub support_mass: f64,
    pub samples: usize,
    pub unreliable_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstVariationReport {
    pub fields: Vec<FieldDefect>,
    /// Maximum normalized defect.
    pub defect: f64,
}

/// `max_Φ |δV(Φ)|` over `fields`, each normalized by its derivative bound and
/// the mass in its support.
///
/// Fields must be supported where the sample covers the varifold; a support
/// reaching past the sampled region produces a spurious boundary term.
pub fn first_variation_defect(v: &SampledVarifold, fields: &[TestField]) -> Result<FirstVariationReport> {
    if !v.has_tangents() {
        return Err(Error::InvalidInput("first variation needs tangent planes".into()));
    }
    if fields.is_empty() {
        return Err(Error::InvalidInput("no test fields".into()));
    }
    let (n, dim) = (v.n(), v.ambient_dim());
    let mut out = Vec::with_capacity(fields.len());
    for field in fields {
        field.validate(dim)?;
        let idx = v.in_ball(&field.center, field.radius);
        if idx.is_empty() {
            return Err(Error::EmptySet("test field support contains no samples"));
        }
        let bad = idx.iter().filter(|&&i| !v.tangent_ok(i)).count();
        let fraction = bad as f64 / idx.len() as f64;
        if fraction > UNRELIABLE_MAX {
            return Err(Error::UnreliableTangents { fraction });
        }
        let raw = par::sum(idx.len(), |j| {
            let i = idx[j];
            let t = v.tangent(i).expect("tangents present");
            v.weight(i) * field.tangential_divergence(v.point(i), t, n)
        });
        let support_mass: f64 = idx.iter().map(|&i| v.weight(i)).sum();
        let normalized = raw.abs() / (field.derivative_bound() * support_mass);
        out.push(FieldDefect {
            field: field.clone(),
            raw,
            normalized,
            support_mass,
            samples: idx.len(),
            unreliable_fraction: fraction,
        });
    }
    let defect = out.iter().map(|d| d.normalized).fold(0.0, f64::max);
    Ok(FirstVariationReport { fields: out, defect })
}

/// Coordinate bumps in every ambient direction plus one radial bump at each center.
pub fn bump_family(centers: &[Vec<f64>], radius: f64) -> Vec<TestField> {
    let mut out = Vec::new();
    for c in centers {
        for p in 0..c.len() {
            out.push(TestField::coordinate(p, c.clone(), radius));
        }
        out.push(TestField::radial(c.clone(), radius));
    }
    out
}

/// Scalar test function `φ = β(|x − c|/r) e_κ` on the domain ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub component: usize,
}

impl ScalarBump {
    fn value(&self, x: &[f64]) -> f64 {
        beta(linalg::dist_sq(x, &self.center) / (self.radius * self.radius))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MssEntry {
    pub test: ScalarBump,
    pub sheet: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MssReport {
    pub entries: Vec<MssEntry>,
    pub residual: f64,
}

/// Inverse metric times the area factor: returns `√g · g⁻¹` for the graph
/// metric `g = I + DfᵀDf` (`df` row-major k×n).
fn weighted_inverse_metric(n: usize, k: usize, df: &[f64]) -> Option<nalgebra::DMatrix<f64>> {
    let g = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let mut s = if i == j { 1.0 } else { 0.0 };
        for r in 0..k {
            s += df[r * n + i] * df[r * n + j];
        }
        s
    });
    let det = g.determinant();
    let inv = g.try_inverse()?;
    Some(inv * det.max(0.0).sqrt())
}

/// Discrete weak form `|Σ hⁿ √g g^{ij} D_i f^κ D_j φ|` with central
/// differences for both `f` and `φ`, normalized by `sup|Dφ| · ωₙ rⁿ`.
///
/// Central differences of `φ` sum to zero over the lattice, so affine `f`
/// gives zero up to rounding.
pub fn mss_residual(f: &SheetGrid, tests: &[ScalarBump]) -> Result<MssReport> {
    let entries = tests
        .iter()
        .map(|t| Ok(MssEntry { test: t.clone(), sheet: 0, value: mss_single(f, t)? }))
        .collect::<Result<Vec<_>>>()?;
    let residual = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    Ok(MssReport { entries, residual })
}

fn mss_single(f: &SheetGrid, t: &ScalarBump) -> Result<f64> {
    let (n, k, h) = (f.n(), f.k(), f.h());
    check_dim(n, t.center.len())?;
    if t.component >= k {
        return Err(Error::InvalidInput(format!("component {} out of range", t.component)));
    }
    if !(t.radius > 0.0) {
        return Err(Error::InvalidInput("bump radius must be positive".into()));
    }
    // Nodes whose φ-stencil reaches the support; all of them need a full
    // f-stencil.
    let reach = (t.radius + h) * (t.radius + h);
    let nodes: Vec<usize> = (0..f.len())
        .filter(|&i| linalg::dist_sq(&f.position(i), &t.center) < reach)
        .collect();
    let inside = |i: usize| f.is_set(i);
    for &i in &nodes {
        if !inside(i) {
            return Err(Error::InvalidInput("test support touches the sheet boundary".into()));
        }
        for ax in 0..n {
            for dir in [-1, 1] {
                match f.neighbor(i, ax, dir) {
                    Some(j) if inside(j) => {}
                    _ => return Err(Error::InvalidInput("test support touches the sheet boundary".into())),
                }
            }
        }
    }
    let terms = par::collect(nodes.len(), |j| {
        let i = nodes[j];
        let mut df = vec![0.0; k * n];
        let mut dphi = vec![0.0; n];
        for ax in 0..n {
            let p = f.neighbor(i, ax, 1).expect("checked");
            let m = f.neighbor(i, ax, -1).expect("checked");
            let (fp, fm) = (f.value(p), f.value(m));
            for r in 0..k {
                df[r * n + ax] = (fp[r] - fm[r]) / (2.0 * h);
            }
            dphi[ax] = (t.value(&f.position(p)) - t.value(&f.position(m))) / (2.0 * h);
        }
        if dphi.iter().all(|d| *d == 0.0) {
            return Some(0.0);
        }
        let a = weighted_inverse_metric(n, k, &df)?;
        let kap = t.component;
        let mut s = 0.0;
        for i2 in 0..n {
            for j2 in 0..n {
                s += a[(i2, j2)] * df[kap * n + i2] * dphi[j2];
            }
        }
        Some(s)
    });
    let terms: Vec<f64> = terms
        .into_iter()
        .map(|t| t.ok_or_else(|| Error::Degenerate("singular graph metric".into())))
        .collect::<Result<_>>()?;
    let total = terms.iter().sum::<f64>() * h.powi(n as i32);
    let scale = beta_slope_max() / t.radius * omega(n) * t.radius.powi(n as i32);
    Ok(total.abs() / scale)
}

/// Residual of a two-valued map on local patches: for each test a box of
/// spacing `h` covering its support is sampled, split into two sheets by
/// continuing the `𝒢`-minimizing matching from the patch centre, and each
/// sheet is tested separately.
///
/// Patches where the two values come closer than `min_separation` are
/// rejected (the sheets are not separated there).
pub fn mss_residual_two_valued<M: TwoValuedMap + Sync>(
    f: &M,
    h: f64,
    tests: &[ScalarBump],
    min_separation: f64,
) -> Result<MssReport> {
    let (n, k) = (f.n(), f.k());
    let mut entries = Vec::new();
    for t in tests {
        check_dim(n, t.center.len())?;
        let m = (t.radius / h).ceil() as usize + 2;
        let raw = SheetGrid::centered(&t.center, m, h, 2 * k, |x| {
            f.eval(x).ok().map(|p| {
                let (a, b) = p.into_parts();
                a.into_iter().chain(b).collect()
            })
        })?;
        let sheets = split_patch(&raw, k, min_separation)?;
        for (s, sheet) in sheets.iter().enumerate() {
            entries.push(MssEntry { test: t.clone(), sheet: s, value: mss_single(sheet, t)? });
        }
    }
    let residual = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    Ok(MssReport { entries, residual })
}

/// Split a patch storing both values (`2k` components per node) into two
/// continuous sheets by breadth-first continuation from the central node.
fn split_patch(raw: &SheetGrid, k: usize, min_separation: f64) -> Result<[SheetGrid; 2]> {
    let len = raw.len();
    let mut swapped: Vec<Option<bool>> = vec![None; len];
    let start = len / 2;
    if !raw.is_set(start) {
        return Err(Error::InvalidInput("patch centre is undefined".into()));
    }
    swapped[start] = Some(false);
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        let va = raw.value(a);
        if linalg::dist(&va[..k], &va[k..]) < min_separation {
            return Err(Error::AmbiguousMatching("sheets are not separated on the patch".into()));
        }
        for ax in 0..raw.n() {
            for dir in [-1, 1] {
                let Some(b) = raw.neighbor(a, ax, dir) else { continue };
                if !raw.is_set(b) || swapped[b].is_some() {
                    continue;
                }
                let vb = raw.value(b);
                let m = match_slices(&va[..k], &va[k..], &vb[..k], &vb[k..]);
                swapped[b] = Some(swapped[a].expect("visited") ^ m.crossed);
                queue.push_back(b);
            }
        }
    }
    let mut out = [raw.blank_like(k), raw.blank_like(k)];
    for (i, s) in swapped.iter().enumerate() {
        let Some(s) = *s else { continue };
        let v = raw.value(i);
        let (first, second) = if s { (&v[k..], &v[..k]) } else { (&v[..k], &v[k..]) };
        out[0].set_value(i, first);
        out[1].set_value(i, second);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_bound_is_the_maximum() {
        let m = (0..10_000)
            .map(|i| {
                let s = i as f64 / 10_000.0;
                8.0 * s * (1.0 - s * s).powi(3)
            })
            .fold(0.0, f64::max);
        assert!(m <= beta_slope_max() && m > beta_slope_max() - 1e-6);
    }

    #[test]
    fn divergence_matches_difference_quotient() {
        let field = TestField::radial(vec![0.1, -0.2, 0.05], 0.7);
        let t = [1.0, 0.0, 0.0, 0.0, 0.6, 0.8];
        let x = [0.2, 0.1, -0.1];
        let e = 1e-6;
        let mut fd = 0.0;
        for row in t.chunks(3) {
            let xp: Vec<f64> = x.iter().zip(row).map(|(a, b)| a + e * b).collect();
            let xm: Vec<f64> = x.iter().zip(row).map(|(a, b)| a - e * b).collect();
            fd += dot(&linalg::sub(&field.value(&xp), &field.value(&xm)), row) / (2.0 * e);
        }
        assert!((field.tangential_divergence(&x, &t, 2) - fd).abs() < 1e-8);
    }

    #[test]
    fn affine_sheet_has_zero_residual() {
        let f = SheetGrid::centered(&[0.0, 0.0], 20, 0.05, 2, |x| Some(vec![0.3 * x[0] - x[1] + 2.0, 0.7 * x[1]])).unwrap();
        let tests = [
            ScalarBump { center: vec![0.1, 0.0], radius: 0.6, component: 0 },
            ScalarBump { center: vec![0.0, -0.1], radius: 0.5, component: 1 },
        ];
        assert!(mss_residual(&f, &tests).unwrap().residual < 1e-12);
    }

    #[test]
    fn support_on_boundary_rejected() {
        let f = SheetGrid::centered(&[0.0, 0.0], 10, 0.05, 1, |x| Some(vec![x[0]])).unwrap();
        let t = [ScalarBump { center: vec![0.0, 0.0], radius: 0.6, component: 0 }];
        assert!(mss_residual(&f, &t).is_err());
    }
}
