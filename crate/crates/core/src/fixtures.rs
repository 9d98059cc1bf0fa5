//! Analytic fixtures: explicit minimal two-valued graphs, cones and broken
//! counter-examples, sampled on lattices.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{graph_plane, Cone};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Subspace;
use crate::linalg;
use crate::twovalued::{Pair2, TwoValuedGrid, TwoValuedMap};
use crate::varifold::{sample_half_planes, SampledVarifold};

/// The Lawson–Osserman constant `√5/2`.
pub fn lo_constant() -> f64 {
    5f64.sqrt() / 2.0
}

/// `η(z₁, z₂) = (|z₁|² − |z₂|², 2 z₁ z̄₂)` after normalizing `(z₁, z₂)` to unit length.
pub fn hopf(z1: [f64; 2], z2: [f64; 2]) -> Result<[f64; 3]> {
    let r2 = z1[0] * z1[0] + z1[1] * z1[1] + z2[0] * z2[0] + z2[1] * z2[1];
    if !(r2 > 0.0) {
        return Err(Error::InvalidInput("Hopf map of the zero vector".into()));
    }
    let e = eta([z1[0], z1[1], z2[0], z2[1]]);
    Ok([e[0] / r2, e[1] / r2, e[2] / r2])
}

/// Unnormalized quadratic `η` on ℝ⁴ ≅ ℂ².
fn eta(x: [f64; 4]) -> [f64; 3] {
    let (a, b, c, d) = (x[0], x[1], x[2], x[3]);
    // z₁ z̄₂ = (a + ib)(c − id)
    [a * a + b * b - c * c - d * d, 2.0 * (a * c + b * d), 2.0 * (b * c - a * d)]
}

/// The cone map `x ↦ (√5/2) |x| η(x/|x|)` from ℝ⁴ to ℝ³ (zero at the origin).
pub fn lo_map(x: &[f64]) -> [f64; 3] {
    let r = linalg::norm(x);
    if r == 0.0 {
        return [0.0; 3];
    }
    let e = eta([x[0], x[1], x[2], x[3]]);
    let s = lo_constant() / r;
    [s * e[0], s * e[1], s * e[2]]
}

fn cmul(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

/// Principal branch of `w^{3/2}`, cut along the negative real axis.
pub fn w32(w: [f64; 2]) -> [f64; 2] {
    let r = (w[0] * w[0] + w[1] * w[1]).sqrt();
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let th = w[1].atan2(w[0]) * 1.5;
    let m = r.powf(1.5);
    [m * th.cos(), m * th.sin()]
}

/// Named analytic fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum FixtureId {
    /// Graphs of two linear maps `x ↦ A₁x`, `x ↦ A₂x` (k×n, row-major).
    PairPlanes { n: usize, k: usize, a1: Vec<f64>, a2: Vec<f64> },
    /// `t ↦ {(t,0),(−t,0)}` for `t ≤ 0`, `{(0,t),(0,−t)}` for `t > 0`, times ℝᵐ.
    FourHalfPlanes { m: usize },
    /// `x ↦ {f(x), f(x)}` with the Lawson–Osserman cone map.
    HopfLoCone,
    /// `x ↦ {f(x), −f(x)}` with the Lawson–Osserman cone map.
    LoTwoValued,
    /// `w ↦ {w^{3/2}, −w^{3/2}}`.
    BranchedW32,
    /// `{w = 0} ∪ {w = a z + b z²}` over ℂ.
    HoloPairCurved { a: [f64; 2], b: [f64; 2] },
    /// The double plane `{y = s x₁}` over ℝ² into ℝ.
    TiltedPlane { slope: f64 },
    /// `{0, gap}` over ℝ² into ℝ.
    ParallelPlanes { gap: f64 },
    CustomGrid { path: String },
    /// Base fixture with both values shifted by a smooth seeded field.
    Perturbed { base: Box<FixtureId>, amplitude: f64, seed: u64 },
}

/// A fixture together with the lattice it is sampled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    #[serde(flatten)]
    pub id: FixtureId,
    pub h: f64,
    pub radius: f64,
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number '{t}'"))))
        .collect()
}

fn parse_complex(s: &str) -> Result<[f64; 2]> {
    let v = parse_list(s)?;
    match v.as_slice() {
        [re] => Ok([*re, 0.0]),
        [re, im] => Ok([*re, *im]),
        _ => Err(Error::InvalidInput(format!("complex parameter '{s}' needs 1 or 2 numbers"))),
    }
}

fn param<T: std::str::FromStr>(p: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::InvalidInput(format!("bad value '{v}' for {key}"))),
    }
}

impl FixtureId {
    /// Look up a fixture by name; parameters come as strings (`a=1,0` style).
    pub fn from_name(name: &str, p: &BTreeMap<String, String>) -> Result<FixtureId> {
        Ok(match name {
            "pair_planes" => {
                let n = param(p, "n", 2usize)?;
                let k = param(p, "k", 2usize)?;
                let a1 = match p.get("a1") {
                    Some(s) => parse_list(s)?,
                    None => vec![0.0; n * k],
                };
                let a2 = match p.get("a2") {
                    Some(s) => parse_list(s)?,
                    None => (0..k * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect(),
                };
                check_dim(n * k, a1.len())?;
                check_dim(n * k, a2.len())?;
                FixtureId::PairPlanes { n, k, a1, a2 }
            }
            "four_half_planes" => FixtureId::FourHalfPlanes { m: param(p, "m", 0usize)? },
            "hopf_lo_cone" => FixtureId::HopfLoCone,
            "lo_two_valued" => FixtureId::LoTwoValued,
            "branched_w32" => FixtureId::BranchedW32,
            "holo_pair_curved" => FixtureId::HoloPairCurved {
                a: p.get("a").map(|s| parse_complex(s)).transpose()?.unwrap_or([1.0, 0.0]),
                b: p.get("b").map(|s| parse_complex(s)).transpose()?.unwrap_or([1.0, 0.0]),
            },
            "tilted_plane" => FixtureId::TiltedPlane { slope: param(p, "slope", 0.5)? },
            "parallel_planes" => FixtureId::ParallelPlanes { gap: param(p, "gap", 0.5)? },
            "custom_grid" => FixtureId::CustomGrid {
                path: p
                    .get("path")
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput("custom_grid needs path=<file>".into()))?,
            },
            other => {
                if let Some(base) = other.strip_prefix("perturbed:") {
                    FixtureId::Perturbed {
                        base: Box::new(FixtureId::from_name(base, p)?),
                        amplitude: param(p, "amplitude", 0.01)?,
                        seed: param(p, "seed", 0u64)?,
                    }
                } else {
                    return Err(Error::InvalidInput(format!("unknown fixture id '{other}'")));
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            FixtureId::PairPlanes { .. } => "pair_planes".into(),
            FixtureId::FourHalfPlanes { .. } => "four_half_planes".into(),
            FixtureId::HopfLoCone => "hopf_lo_cone".into(),
            FixtureId::LoTwoValued => "lo_two_valued".into(),
            FixtureId::BranchedW32 => "branched_w32".into(),
            FixtureId::HoloPairCurved { .. } => "holo_pair_curved".into(),
            FixtureId::TiltedPlane { .. } => "tilted_plane".into(),
            FixtureId::ParallelPlanes { .. } => "parallel_planes".into(),
            FixtureId::CustomGrid { .. } => "custom_grid".into(),
            FixtureId::Perturbed { base, .. } => format!("perturbed:{}", base.name()),
        }
    }

    /// Domain and codomain dimensions `(n, k)`; unknown for custom grids.
    pub fn dims(&self) -> Option<(usize, usize)> {
        match self {
            FixtureId::PairPlanes { n, k, .. } => Some((*n, *k)),
            FixtureId::FourHalfPlanes { m } => Some((m + 1, 2)),
            FixtureId::HopfLoCone | FixtureId::LoTwoValued => Some((4, 3)),
            FixtureId::BranchedW32 | FixtureId::HoloPairCurved { .. } => Some((2, 2)),
            FixtureId::TiltedPlane { .. } | FixtureId::ParallelPlanes { .. } => Some((2, 1)),
            FixtureId::CustomGrid { .. } => None,
            FixtureId::Perturbed { base, .. } => base.dims(),
        }
    }

    /// Whether the fixture is a stationary (minimal) two-valued graph.
    pub fn is_minimal(&self) -> bool {
        !matches!(self, FixtureId::CustomGrid { .. } | FixtureId::Perturbed { .. })
    }

    /// The cone the fixture is, or its tangent cone at the origin, when it is
    /// a pair of planes, four half-planes or a plane.
    pub fn natural_cone(&self) -> Result<Option<Cone>> {
        Ok(match self {
            FixtureId::PairPlanes { n, k, a1, a2 } => Some(Cone::pair(graph_plane(*n, *k, a1)?, graph_plane(*n, *k, a2)?)?),
            FixtureId::FourHalfPlanes { m } => Some(four_half_planes_cone(*m)?),
            FixtureId::HoloPairCurved { a, .. } => {
                if a[0] == 0.0 && a[1] == 0.0 {
                    Some(Cone::plane(graph_plane(2, 2, &[0.0; 4])?, 2)?)
                } else {
                    Some(complex_pair(*a)?)
                }
            }
            FixtureId::BranchedW32 => Some(Cone::plane(graph_plane(2, 2, &[0.0; 4])?, 2)?),
            FixtureId::TiltedPlane { slope } => Some(Cone::plane(graph_plane(2, 1, &[*slope, 0.0])?, 2)?),
            FixtureId::ParallelPlanes { gap } => {
                let p = graph_plane(2, 1, &[0.0, 0.0])?;
                Some(Cone::pair(p.clone(), p.translated(&[0.0, 0.0, *gap])?)?)
            }
            FixtureId::Perturbed { base, .. } => base.natural_cone()?,
            FixtureId::HopfLoCone | FixtureId::LoTwoValued | FixtureId::CustomGrid { .. } => None,
        })
    }
}

/// `{w = 0} ∪ {w = a z}` in ℂ² ≅ ℝ⁴.
pub fn complex_pair(a: [f64; 2]) -> Result<Cone> {
    let p1 = graph_plane(2, 2, &[0.0; 4])?;
    // multiplication by a as a real 2×2 matrix
    let p2 = graph_plane(2, 2, &[a[0], -a[1], a[1], a[0]])?;
    Cone::pair(p1, p2)
}

/// The four half-planes cone of [`FixtureId::FourHalfPlanes`] in ℝ^{m+3}
/// with coordinates `(t, y₁..y_m, u₁, u₂)`.
pub fn four_half_planes_cone(m: usize) -> Result<Cone> {
    let d = m + 3;
    let axis = Subspace::coordinate(d, &(1..=m).collect::<Vec<_>>())?;
    let side = |t: f64, u1: f64, u2: f64| {
        let mut v = vec![0.0; d];
        v[0] = t;
        v[m + 1] = u1;
        v[m + 2] = u2;
        v
    };
    Cone::from_axis_and_sides(
        axis,
        &[side(-1.0, -1.0, 0.0), side(-1.0, 1.0, 0.0), side(1.0, 0.0, 1.0), side(1.0, 0.0, -1.0)],
    )
}

/// A loaded fixture, evaluable pointwise.
#[derive(Debug, Clone)]
pub struct Fixture {
    id: FixtureId,
    grid: Option<TwoValuedGrid>,
    perturbation: Vec<(Vec<f64>, f64, Vec<f64>)>,
    base: Option<Box<Fixture>>,
}

impl Fixture {
    pub fn new(id: FixtureId) -> Result<Fixture> {
        match &id {
            FixtureId::CustomGrid { path } => {
                let text = std::fs::read_to_string(path)?;
                let grid = TwoValuedGrid::from_json(&text)?;
                Ok(Fixture { id, grid: Some(grid), perturbation: Vec::new(), base: None })
            }
            FixtureId::Perturbed { base, amplitude, seed } => {
                let inner = Fixture::new((**base).clone())?;
                let (n, k) = (inner.n(), inner.k());
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let terms = (0..3)
                    .map(|_| {
                        let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                        let phase = rng.random_range(0.0..std::f64::consts::TAU);
                        let c: Vec<f64> = (0..k).map(|_| amplitude * rng.random_range(-1.0..1.0)).collect();
                        (xi, phase, c)
                    })
                    .collect();
                Ok(Fixture { id, grid: None, perturbation: terms, base: Some(Box::new(inner)) })
            }
            FixtureId::PairPlanes { n, k, a1, a2 } => {
                check_dim(n * k, a1.len())?;
                check_dim(n * k, a2.len())?;
                Ok(Fixture { id, grid: None, perturbation: Vec::new(), base: None })
            }
            _ => Ok(Fixture { id, grid: None, perturbation: Vec::new(), base: None }),
        }
    }

    pub fn id(&self) -> &FixtureId {
        &self.id
    }

    /// Sample on the cell-centred lattice of spacing `h` in `B_radius(0)`.
    /// Custom grids are returned as loaded.
    pub fn grid(&self, h: f64, radius: f64) -> Result<TwoValuedGrid> {
        if let Some(g) = &self.grid {
            return Ok(g.clone());
        }
        TwoValuedGrid::from_fn(self.n(), self.k(), radius, h, |x| self.eval(x))
    }
}

impl TwoValuedMap for Fixture {
    fn n(&self) -> usize {
        match &self.grid {
            Some(g) => g.n(),
            None => self.id.dims().map(|d| d.0).unwrap_or(0),
        }
    }

    fn k(&self) -> usize {
        match &self.grid {
            Some(g) => g.k(),
            None => self.id.dims().map(|d| d.1).unwrap_or(0),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<Pair2> {
        check_dim(self.n(), x.len())?;
        Ok(match &self.id {
            FixtureId::PairPlanes { n, k, a1, a2 } => {
                let lin = |a: &[f64]| -> Vec<f64> {
                    (0..*k).map(|r| (0..*n).map(|j| a[r * n + j] * x[j]).sum()).collect()
                };
                Pair2::new(lin(a1), lin(a2))
            }
            FixtureId::FourHalfPlanes { .. } => {
                let t = x[0];
                if t <= 0.0 {
                    Pair2::new(vec![t, 0.0], vec![-t, 0.0])
                } else {
                    Pair2::new(vec![0.0, t], vec![0.0, -t])
                }
            }
            FixtureId::HopfLoCone => {
                let f = lo_map(x).to_vec();
                Pair2::new(f.clone(), f)
            }
            FixtureId::LoTwoValued => {
                let f = lo_map(x);
                Pair2::new(f.to_vec(), f.iter().map(|v| -v).collect())
            }
            FixtureId::BranchedW32 => {
                let g = w32([x[0], x[1]]);
                Pair2::new(g.to_vec(), vec![-g[0], -g[1]])
            }
            FixtureId::HoloPairCurved { a, b } => {
                let z = [x[0], x[1]];
                let az = cmul(*a, z);
                let bz2 = cmul(*b, cmul(z, z));
                Pair2::new(vec![0.0, 0.0], vec![az[0] + bz2[0], az[1] + bz2[1]])
            }
            FixtureId::TiltedPlane { slope } => Pair2::double(vec![slope * x[0]]),
            FixtureId::ParallelPlanes { gap } => Pair2::new(vec![0.0], vec![*gap]),
            FixtureId::CustomGrid { .. } => self.grid.as_ref().expect("loaded").eval(x)?,
            FixtureId::Perturbed { .. } => {
                let base = self.base.as_ref().expect("loaded").eval(x)?;
                let mut u = vec![0.0; base.k()];
                for (xi, phase, c) in &self.perturbation {
                    let s = (linalg::dot(xi, x) + phase).sin();
                    linalg::axpy(&mut u, s, c);
                }
                let (a, b) = base.into_parts();
                Pair2::new(linalg::add(&a, &u), linalg::add(&b, &u))
            }
        })
    }
}

/// Sample the named fixture on its lattice.
pub fn generate(spec: &FixtureSpec) -> Result<TwoValuedGrid> {
    if !(spec.h > 0.0 && spec.radius > 0.0) {
        return Err(Error::InvalidInput("fixture needs h > 0 and radius > 0".into()));
    }
    Fixture::new(spec.id.clone())?.grid(spec.h, spec.radius)
}

/// Unbalanced junction: three half-lines in ℝ³ in the directions
/// `(1,0,0)`, `(0,1,0)`, `(−1,0,0)`; the co-normals sum to `(0,1,0)`.
pub fn three_half_lines(h: f64, radius: f64) -> Result<SampledVarifold> {
    let sides = three_half_line_sides();
    sample_half_planes(&Subspace::zero(3), &sides, h, radius)
}

pub fn three_half_line_sides() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_examples() {
        assert_eq!(hopf([1.0, 0.0], [0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        let s = 0.5f64.sqrt();
        let e = hopf([s, 0.0], [s, 0.0]).unwrap();
        assert!((e[0]).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15 && e[2].abs() < 1e-15);
        assert!(hopf([0.0, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn four_half_planes_values() {
        let f = Fixture::new(FixtureId::FourHalfPlanes { m: 0 }).unwrap();
        assert_eq!(f.eval(&[-1.0]).unwrap(), Pair2::new(vec![-1.0, 0.0], vec![1.0, 0.0]));
        assert_eq!(f.eval(&[1.0]).unwrap(), Pair2::new(vec![0.0, 1.0], vec![0.0, -1.0]));
        let c = four_half_planes_cone(0).unwrap();
        for t in [-0.7, 0.3] {
            assert!(linalg::dist(c.graph_values(&[t]).unwrap().a1(), f.eval(&[t]).unwrap().a1()) < 1e-15);
        }
    }

    #[test]
    fn branched_and_holo_values() {
        let f = Fixture::new(FixtureId::BranchedW32).unwrap();
        assert_eq!(f.eval(&[1.0, 0.0]).unwrap(), Pair2::new(vec![1.0, 0.0], vec![-1.0, 0.0]));
        let g = Fixture::new(FixtureId::HoloPairCurved { a: [1.0, 0.0], b: [1.0, 0.0] }).unwrap();
        assert_eq!(g.eval(&[0.0, 0.0]).unwrap(), Pair2::double(vec![0.0, 0.0]));
    }

    #[test]
    fn unknown_id_rejected() {
        assert!(FixtureId::from_name("catenoid", &BTreeMap::new()).is_err());
    }
}
