//! Unordered pairs, the metric 𝒢 on them, and two-valued functions sampled on lattices.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::par;

/// Unordered pair of vectors in ℝᵏ stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairRepr", into = "PairRepr")]
pub struct Pair2 {
    a1: Vec<f64>,
    a2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    a1: Vec<f64>,
    a2: Vec<f64>,
}

impl TryFrom<PairRepr> for Pair2 {
    type Error = Error;
    fn try_from(r: PairRepr) -> Result<Self> {
        Pair2::try_new(r.a1, r.a2)
    }
}

impl From<Pair2> for PairRepr {
    fn from(p: Pair2) -> Self {
        PairRepr { a1: p.a1, a2: p.a2 }
    }
}

fn lex_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    true
}

impl Pair2 {
    /// Panics if the two vectors have different lengths.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Pair2 {
        assert_eq!(a.len(), b.len(), "pair components must share dimension");
        if lex_le(&a, &b) {
            Pair2 { a1: a, a2: b }
        } else {
            Pair2 { a1: b, a2: a }
        }
    }

    pub fn try_new(a: Vec<f64>, b: Vec<f64>) -> Result<Pair2> {
        check_dim(a.len(), b.len())?;
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite pair component".into()));
        }
        Ok(Pair2::new(a, b))
    }

    /// The pair `{a, a}`.
    pub fn double(a: Vec<f64>) -> Pair2 {
        Pair2 { a1: a.clone(), a2: a }
    }

    pub fn a1(&self) -> &[f64] {
        &self.a1
    }

    pub fn a2(&self) -> &[f64] {
        &self.a2
    }

    pub fn k(&self) -> usize {
        self.a1.len()
    }

    /// `|a1 − a2|`.
    pub fn separation(&self) -> f64 {
        crate::linalg::dist(&self.a1, &self.a2)
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.a1, self.a2)
    }
}

/// `𝒢(a, b) = min{|a1−b1| + |a2−b2|, |a1−b2| + |a2−b1|}`.
///
/// Both pairs must have the same codimension.
pub fn metric_g(a: &Pair2, b: &Pair2) -> f64 {
    assert_eq!(a.k(), b.k(), "metric_g needs matching codimension");
    metric_g_slices(&a.a1, &a.a2, &b.a1, &b.a2)
}

pub(crate) fn metric_g_slices(a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> f64 {
    let (straight, crossed) = pairing_costs(a1, a2, b1, b2);
    straight.min(crossed)
}

/// Costs of the straight (a1↔b1) and crossed (a1↔b2) pairings.
pub(crate) fn pairing_costs(a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> (f64, f64) {
    use crate::linalg::dist;
    (dist(a1, b1) + dist(a2, b2), dist(a1, b2) + dist(a2, b1))
}

/// Result of matching the components of two pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matching {
    /// `true` when a1 is matched with b2.
    pub crossed: bool,
    pub cost: f64,
    pub other_cost: f64,
}

impl Matching {
    /// The two pairings produce different matched values and the losing one is
    /// within a factor two of the winner.
    pub fn is_ambiguous(&self) -> bool {
        self.other_cost < 2.0 * self.cost
    }
}

pub(crate) fn match_slices(a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> Matching {
    let (s, c) = pairing_costs(a1, a2, b1, b2);
    if c < s {
        Matching { crossed: true, cost: c, other_cost: s }
    } else {
        Matching { crossed: false, cost: s, other_cost: c }
    }
}

/// Anything that can be evaluated as a two-valued function on ℝⁿ.
pub trait TwoValuedMap: Sync {
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Pair2>;
}

impl TwoValuedMap for TwoValuedGrid {
    fn n(&self) -> usize {
        self.n
    }
    fn k(&self) -> usize {
        self.k
    }
    fn eval(&self, x: &[f64]) -> Result<Pair2> {
        TwoValuedGrid::eval(self, x)
    }
}

impl TwoValuedMap for crate::cones::Cone {
    fn n(&self) -> usize {
        crate::cones::Cone::n(self)
    }
    fn k(&self) -> usize {
        crate::cones::Cone::k(self)
    }
    fn eval(&self, x: &[f64]) -> Result<Pair2> {
        self.graph_values(x)
    }
}

/// Two-valued function sampled at the cell centres `x = (i + ½)h` of the
/// lattice `hℤⁿ` that lie in the open ball `B_radius(0) ⊂ ℝⁿ`.
///
/// Multi-indices run over `[−N, N−1]ⁿ` with `N = ⌈radius/h⌉`; node values are
/// stored densely over that box and masked outside the ball.
#[derive(Debug, Clone)]
pub struct TwoValuedGrid {
    n: usize,
    k: usize,
    radius: f64,
    h: f64,
    half: usize,
    side: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    active: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    n: usize,
    k: usize,
    radius: f64,
    h: f64,
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    index: Vec<i64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

impl TwoValuedGrid {
    fn empty(n: usize, k: usize, radius: f64, h: f64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput("n and k must be positive".into()));
        }
        if !(h > 0.0 && h.is_finite() && radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("need h > 0 and radius > 0, got h={h}, radius={radius}")));
        }
        let half = (radius / h - 1e-9).ceil().max(1.0) as usize;
        let side = 2 * half;
        let total = side
            .checked_pow(n as u32)
            .filter(|t| t.checked_mul(2 * k).is_some() && *t <= 1 << 28)
            .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
        let mut g = TwoValuedGrid {
            n,
            k,
            radius,
            h,
            half,
            side,
            values: vec![0.0; total * 2 * k],
            mask: vec![false; total],
            active: Vec::new(),
        };
        for flat in 0..total {
            let x = g.position(flat);
            if x.iter().map(|v| v * v).sum::<f64>() < radius * radius {
                g.mask[flat] = true;
                g.active.push(flat);
            }
        }
        Ok(g)
    }

    /// Sample `f` at every node inside the ball.
    pub fn from_fn<F>(n: usize, k: usize, radius: f64, h: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Pair2> + Sync + Send,
    {
        let mut g = TwoValuedGrid::empty(n, k, radius, h)?;
        let vals = par::collect(g.active.len(), |i| f(&g.position(g.active[i])));
        for (i, v) in vals.into_iter().enumerate() {
            let p = v?;
            check_dim(k, p.k())?;
            if p.a1.iter().chain(&p.a2).any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite sample value".into()));
            }
            let flat = g.active[i];
            g.set(flat, &p);
        }
        Ok(g)
    }

    fn set(&mut self, flat: usize, p: &Pair2) {
        let k = self.k;
        let base = flat * 2 * k;
        self.values[base..base + k].copy_from_slice(&p.a1);
        self.values[base + k..base + 2 * k].copy_from_slice(&p.a2);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Flat indices of the nodes inside the ball, increasing.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn node_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, flat: usize) -> bool {
        self.mask.get(flat).copied().unwrap_or(false)
    }

    /// Multi-index of a flat index.
    pub fn index(&self, flat: usize) -> Vec<i64> {
        let mut rem = flat;
        (0..self.n)
            .map(|_| {
                let c = rem % self.side;
                rem /= self.side;
                c as i64 - self.half as i64
            })
            .collect()
    }

    /// Flat index of an active node with the given multi-index.
    pub fn flat(&self, index: &[i64]) -> Option<usize> {
        if index.len() != self.n {
            return None;
        }
        let mut flat = 0usize;
        for d in (0..self.n).rev() {
            let c = index[d] + self.half as i64;
            if c < 0 || c >= self.side as i64 {
                return None;
            }
            flat = flat * self.side + c as usize;
        }
        self.is_active(flat).then_some(flat)
    }

    /// Node position `(index + ½)h`.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .into_iter()
            .map(|i| (i as f64 + 0.5) * self.h)
            .collect()
    }

    /// Active neighbour one step along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, flat: usize, axis: usize, dir: i64) -> Option<usize> {
        let stride = self.side.pow(axis as u32);
        let c = (flat / stride) % self.side;
        let nc = c as i64 + dir;
        if nc < 0 || nc >= self.side as i64 {
            return None;
        }
        let nf = (flat as i64 + dir * stride as i64) as usize;
        self.is_active(nf).then_some(nf)
    }

    /// Active node nearest to `x`, if `x` falls in a cell of the box.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.n {
            return None;
        }
        let idx: Vec<i64> = x.iter().map(|v| (v / self.h).floor() as i64).collect();
        self.flat(&idx)
    }

    /// The two components at a node.
    pub fn values(&self, flat: usize) -> (&[f64], &[f64]) {
        let k = self.k;
        let base = flat * 2 * k;
        (&self.values[base..base + k], &self.values[base + k..base + 2 * k])
    }

    pub fn pair(&self, flat: usize) -> Pair2 {
        let (a, b) = self.values(flat);
        Pair2 { a1: a.to_vec(), a2: b.to_vec() }
    }

    /// Value at the active node containing `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Pair2> {
        check_dim(self.n, x.len())?;
        self.nearest_node(x)
            .map(|f| self.pair(f))
            .ok_or_else(|| Error::InvalidInput("point outside the grid".into()))
    }

    pub fn to_json(&self) -> Result<String> {
        let nodes = self
            .active
            .iter()
            .map(|&f| {
                let (a1, a2) = self.values(f);
                NodeRecord { index: self.index(f), a1: a1.to_vec(), a2: a2.to_vec() }
            })
            .collect();
        let file = GridFile { n: self.n, k: self.k, radius: self.radius, h: self.h, nodes };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parse the JSON grid format. Every node inside the ball must be present.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GridFile = serde_json::from_str(text)?;
        let mut g = TwoValuedGrid::empty(file.n, file.k, file.radius, file.h)?;
        let mut seen = vec![false; g.mask.len()];
        for node in file.nodes {
            let flat = g
                .flat(&node.index)
                .ok_or_else(|| Error::InvalidInput(format!("node {:?} outside the ball", node.index)))?;
            let p = Pair2::try_new(node.a1, node.a2)?;
            check_dim(g.k, p.k())?;
            g.set(flat, &p);
            seen[flat] = true;
        }
        if let Some(&missing) = g.active.iter().find(|&&f| !seen[f]) {
            return Err(Error::InvalidInput(format!("missing value at node {:?}", g.index(missing))));
        }
        Ok(g)
    }
}

/// Largest `𝒢(f(x), f(y)) / |x − y|` over lattice-adjacent node pairs.
pub fn lipschitz_estimate(f: &TwoValuedGrid) -> Result<f64> {
    if f.node_count() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: f.node_count() });
    }
    let act = f.active();
    let m = par::max(act.len(), |i| {
        let a = act[i];
        let (a1, a2) = f.values(a);
        (0..f.n())
            .filter_map(|ax| f.neighbor(a, ax, 1))
            .map(|b| {
                let (b1, b2) = f.values(b);
                metric_g_slices(a1, a2, b1, b2)
            })
            .fold(0.0, f64::max)
    });
    Ok(m / f.h())
}

/// Largest `𝒢(f(x), f(y)) / |x − y|^α` over all node pairs (quadratic in the node count).
pub fn holder_seminorm(f: &TwoValuedGrid, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("Hölder exponent must lie in (0,1], got {alpha}")));
    }
    let act = f.active();
    let pos: Vec<Vec<f64>> = act.iter().map(|&a| f.position(a)).collect();
    Ok(par::max(act.len(), |i| {
        let (a1, a2) = f.values(act[i]);
        let mut best = 0.0f64;
        for j in i + 1..act.len() {
            let (b1, b2) = f.values(act[j]);
            let g = metric_g_slices(a1, a2, b1, b2);
            if g > 0.0 {
                best = best.max(g / crate::linalg::dist(&pos[i], &pos[j]).powf(alpha));
            }
        }
        best
    })
    .max(0.0))
}

/// Single-valued ℝᵏ-valued function on a masked box lattice `origin + h·idx`.
#[derive(Debug, Clone)]
pub struct SheetGrid {
    k: usize,
    h: f64,
    origin: Vec<f64>,
    dims: Vec<usize>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl SheetGrid {
    /// Sample `f` on the box; nodes where `f` returns `None` are masked out.
    pub fn from_fn<F>(origin: Vec<f64>, dims: Vec<usize>, h: f64, k: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Option<Vec<f64>> + Sync + Send,
    {
        check_dim(origin.len(), dims.len())?;
        if !(h > 0.0) || dims.contains(&0) {
            return Err(Error::InvalidInput("sheet grid needs h > 0 and nonempty dims".into()));
        }
        let total: usize = dims.iter().product();
        let mut g = SheetGrid {
            k,
            h,
            origin,
            dims,
            values: vec![0.0; total * k],
            mask: vec![false; total],
        };
        let vals = par::collect(total, |i| f(&g.position(i)));
        for (i, v) in vals.into_iter().enumerate() {
            if let Some(v) = v {
                check_dim(k, v.len())?;
                if v.iter().all(|x| x.is_finite()) {
                    g.values[i * k..(i + 1) * k].copy_from_slice(&v);
                    g.mask[i] = true;
                }
            }
        }
        Ok(g)
    }

    /// Box grid of `2m+1` nodes per axis centred at `center`.
    pub fn centered<F>(center: &[f64], m: usize, h: f64, k: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Option<Vec<f64>> + Sync + Send,
    {
        let origin = center.iter().map(|c| c - m as f64 * h).collect();
        SheetGrid::from_fn(origin, vec![2 * m + 1; center.len()], h, k, f)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        self.dims
            .iter()
            .map(|&d| {
                let c = rem % d;
                rem /= d;
                c
            })
            .collect()
    }

    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + i as f64 * self.h)
            .collect()
    }

    pub fn value(&self, flat: usize) -> &[f64] {
        &self.values[flat * self.k..(flat + 1) * self.k]
    }

    pub fn neighbor(&self, flat: usize, axis: usize, dir: i64) -> Option<usize> {
        let stride: usize = self.dims[..axis].iter().product();
        let c = (flat / stride) % self.dims[axis];
        let nc = c as i64 + dir;
        if nc < 0 || nc >= self.dims[axis] as i64 {
            return None;
        }
        Some((flat as i64 + dir * stride as i64) as usize)
    }

    /// Copy with `c` added to every value.
    pub fn shifted(&self, c: &[f64]) -> SheetGrid {
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v += c[i % self.k];
        }
        out
    }

    pub(crate) fn set_value(&mut self, flat: usize, v: &[f64]) {
        self.values[flat * self.k..(flat + 1) * self.k].copy_from_slice(v);
        self.mask[flat] = true;
    }

    /// Empty grid on the same lattice with `k` components.
    pub(crate) fn blank_like(&self, k: usize) -> SheetGrid {
        SheetGrid::blank(self.origin.clone(), self.dims.clone(), self.h, k)
    }

    pub(crate) fn blank(origin: Vec<f64>, dims: Vec<usize>, h: f64, k: usize) -> SheetGrid {
        let total: usize = dims.iter().product();
        SheetGrid { k, h, origin, dims, values: vec![0.0; total * k], mask: vec![false; total] }
    }
}
