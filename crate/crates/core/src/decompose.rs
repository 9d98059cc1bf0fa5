//! Sheet labelling of two-valued grids and branch detection by monodromy.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::twovalued::{lipschitz_estimate, match_slices, SheetGrid, TwoValuedGrid};
use crate::varifold::{sample_graph, SampledVarifold};

/// Label of one grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLabel {
    /// Sheet 1 takes `a1`, sheet 2 takes `a2`.
    Straight,
    /// Sheet 1 takes `a2`, sheet 2 takes `a1`.
    Swapped,
    /// Excluded: multiplicity-two point or separation too small to match.
    Double,
    /// Outside the labelling domain or not reached.
    Unlabelled,
}

impl NodeLabel {
    fn flip(self, crossed: bool) -> NodeLabel {
        match (self, crossed) {
            (NodeLabel::Straight, true) => NodeLabel::Swapped,
            (NodeLabel::Swapped, true) => NodeLabel::Straight,
            (l, _) => l,
        }
    }

    fn is_labelled(self) -> bool {
        matches!(self, NodeLabel::Straight | NodeLabel::Swapped)
    }
}

/// An edge whose endpoints received contradictory labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub from: usize,
    pub to: usize,
    pub position: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SheetLabelling {
    /// Indexed like [`TwoValuedGrid::active`].
    pub labels: Vec<NodeLabel>,
    pub conflicts: Vec<Conflict>,
    /// Points of the double set enclosed by a swapping loop.
    pub branch_points: Vec<Vec<f64>>,
    pub decomposed: bool,
    pub components: usize,
    /// More than one connected component of the labelling domain.
    pub disconnected: bool,
    /// `hⁿ ·` number of excluded nodes.
    pub exclusion_volume: f64,
    /// Separation threshold `2·L·h` used for matching.
    pub separation_floor: f64,
    pub seed: usize,
}

impl SheetLabelling {
    /// Whether `other` equals `self` up to one global swap of the sheets.
    pub fn agrees_up_to_swap(&self, other: &SheetLabelling) -> bool {
        if self.labels.len() != other.labels.len() {
            return false;
        }
        let same = self.labels.iter().zip(&other.labels).all(|(a, b)| a == b);
        let swapped = self.labels.iter().zip(&other.labels).all(|(a, b)| match (a, b) {
            (NodeLabel::Straight, NodeLabel::Swapped) | (NodeLabel::Swapped, NodeLabel::Straight) => true,
            (a, b) => a == b && !a.is_labelled(),
        });
        same || swapped
    }
}

/// Flat indices of nodes with `|a1 − a2| < tol`.
///
/// `tol` must be at least `2·L·h` with `L` the grid Lipschitz estimate.
pub fn detect_doubles(f: &TwoValuedGrid, tol: f64) -> Result<Vec<usize>> {
    let floor = 2.0 * lipschitz_estimate(f)? * f.h();
    if tol < floor {
        return Err(Error::InvalidInput(format!("tolerance {tol:.3e} is below 2·L·h = {floor:.3e}")));
    }
    Ok(f.active()
        .iter()
        .copied()
        .filter(|&a| {
            let (a1, a2) = f.values(a);
            linalg::dist(a1, a2) < tol
        })
        .collect())
}

/// `set` plus every active neighbour (one cell in each axis direction).
pub fn inflate(f: &TwoValuedGrid, set: &[usize]) -> Vec<usize> {
    let mut out: BTreeSet<usize> = set.iter().copied().collect();
    for &a in set {
        for ax in 0..f.n() {
            for dir in [-1, 1] {
                if let Some(b) = f.neighbor(a, ax, dir) {
                    out.insert(b);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Labels by breadth-first search over grid adjacency on the complement of
/// `exclusion`, starting from `seed` (an index into `active`, default 0).
///
/// Nodes with separation at most `2·L·h` join the exclusion set. Edges
/// connecting nodes with incompatible labels are recorded as conflicts;
/// `decomposed` holds iff there are none.
pub fn propagate_labels(f: &TwoValuedGrid, exclusion: &[usize], seed: Option<usize>) -> Result<SheetLabelling> {
    let act = f.active();
    let floor = 2.0 * lipschitz_estimate(f)? * f.h();
    let pos_of = |flat: usize| act.binary_search(&flat).ok();
    let mut labels = vec![NodeLabel::Unlabelled; act.len()];
    for &e in exclusion {
        if let Some(p) = pos_of(e) {
            labels[p] = NodeLabel::Double;
        }
    }
    for (p, &a) in act.iter().enumerate() {
        let (a1, a2) = f.values(a);
        if linalg::dist(a1, a2) <= floor {
            labels[p] = NodeLabel::Double;
        }
    }
    let excluded = labels.iter().filter(|l| **l == NodeLabel::Double).count();
    let seed = seed.unwrap_or(0);
    if seed >= act.len() {
        return Err(Error::InvalidInput(format!("seed {seed} out of range")));
    }
    let mut order: Vec<usize> = (seed..act.len()).chain(0..seed).collect();
    order.retain(|&p| labels[p] == NodeLabel::Unlabelled);
    let mut conflicts = Vec::new();
    let mut seen_edges = BTreeSet::new();
    let mut components = 0;
    for start in order {
        if labels[start] != NodeLabel::Unlabelled {
            continue;
        }
        components += 1;
        labels[start] = NodeLabel::Straight;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let a = act[p];
            for ax in 0..f.n() {
                for dir in [-1, 1] {
                    let Some(b) = f.neighbor(a, ax, dir) else { continue };
                    let Some(q) = pos_of(b) else { continue };
                    if labels[q] == NodeLabel::Double {
                        continue;
                    }
                    let (a1, a2) = f.values(a);
                    let (b1, b2) = f.values(b);
                    let m = match_slices(a1, a2, b1, b2);
                    let want = labels[p].flip(m.crossed);
                    if labels[q] == NodeLabel::Unlabelled {
                        labels[q] = want;
                        queue.push_back(q);
                    } else if labels[q] != want && seen_edges.insert((a.min(b), a.max(b))) {
                        let mid: Vec<f64> = f.position(a).iter().zip(f.position(b)).map(|(x, y)| 0.5 * (x + y)).collect();
                        conflicts.push(Conflict { from: a, to: b, position: mid });
                    }
                }
            }
        }
    }
    let branch_points = if f.n() == 2 { locate_branch_points(f, &labels) } else { Vec::new() };
    Ok(SheetLabelling {
        decomposed: conflicts.is_empty(),
        labels,
        conflicts,
        branch_points,
        components,
        disconnected: components > 1,
        exclusion_volume: excluded as f64 * f.h().powi(f.n() as i32),
        separation_floor: floor,
        seed,
    })
}

/// Permutation of the two sheets after continuation around a loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monodromy {
    Trivial,
    Swap,
}

/// Compose 𝒢-minimizing matchings around the closed node cycle `lp`.
pub fn monodromy_test(f: &TwoValuedGrid, lp: &[usize]) -> Result<Monodromy> {
    if lp.len() < 4 {
        return Err(Error::InvalidInput("a loop needs at least four nodes".into()));
    }
    let floor = 2.0 * lipschitz_estimate(f)? * f.h();
    let mut parity = false;
    for s in 0..lp.len() {
        let (a, b) = (lp[s], lp[(s + 1) % lp.len()]);
        if !f.is_active(a) || !f.is_active(b) {
            return Err(Error::InvalidInput("loop leaves the grid".into()));
        }
        let (ia, ib) = (f.index(a), f.index(b));
        let steps: i64 = ia.iter().zip(&ib).map(|(x, y)| (x - y).abs()).sum();
        if steps != 1 {
            return Err(Error::InvalidInput(format!("loop nodes {s} and {} are not adjacent", (s + 1) % lp.len())));
        }
        let (a1, a2) = f.values(a);
        if linalg::dist(a1, a2) <= floor {
            return Err(Error::AmbiguousMatching(format!(
                "separation {:.3e} at loop node {s} is below 2·L·h = {floor:.3e}",
                linalg::dist(a1, a2)
            )));
        }
        let (b1, b2) = f.values(b);
        parity ^= match_slices(a1, a2, b1, b2).crossed;
    }
    Ok(if parity { Monodromy::Swap } else { Monodromy::Trivial })
}

/// Counter-clockwise square loop of half-width `cells` around the node
/// nearest `center` in the plane of axes 0 and 1.
pub fn square_loop(f: &TwoValuedGrid, center: &[f64], cells: i64) -> Result<Vec<usize>> {
    if f.n() < 2 || cells < 1 {
        return Err(Error::InvalidInput("square loops need n ≥ 2 and half-width ≥ 1".into()));
    }
    let c = f
        .nearest_node(center)
        .map(|a| f.index(a))
        .ok_or_else(|| Error::InvalidInput("loop center outside the grid".into()))?;
    let mut path = Vec::new();
    let corners = [(cells, -cells), (cells, cells), (-cells, cells), (-cells, -cells)];
    let mut cur = (-cells, -cells);
    for &(tx, ty) in &corners {
        while cur != (tx, ty) {
            cur.0 += (tx - cur.0).signum();
            cur.1 += (ty - cur.1).signum();
            let mut idx = c.clone();
            idx[0] += cur.0;
            idx[1] += cur.1;
            let flat = f
                .flat(&idx)
                .ok_or_else(|| Error::InvalidInput("loop leaves the grid".into()))?;
            path.push(flat);
        }
    }
    Ok(path)
}

/// For each connected cluster of excluded nodes, test a square loop two cells
/// outside its bounding box; clusters with swap monodromy contribute their
/// node of least separation.
fn locate_branch_points(f: &TwoValuedGrid, labels: &[NodeLabel]) -> Vec<Vec<f64>> {
    let act = f.active();
    let pos_of = |flat: usize| act.binary_search(&flat).ok();
    let mut seen = vec![false; act.len()];
    let mut out = Vec::new();
    for s in 0..act.len() {
        if labels[s] != NodeLabel::Double || seen[s] {
            continue;
        }
        let mut cluster = vec![s];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(p) = stack.pop() {
            for ax in 0..f.n() {
                for dir in [-1, 1] {
                    if let Some(q) = f.neighbor(act[p], ax, dir).and_then(pos_of) {
                        if labels[q] == NodeLabel::Double && !seen[q] {
                            seen[q] = true;
                            stack.push(q);
                            cluster.push(q);
                        }
                    }
                }
            }
        }
        let idx: Vec<Vec<i64>> = cluster.iter().map(|&p| f.index(act[p])).collect();
        let lo: Vec<i64> = (0..2).map(|d| idx.iter().map(|i| i[d]).min().unwrap_or(0)).collect();
        let hi: Vec<i64> = (0..2).map(|d| idx.iter().map(|i| i[d]).max().unwrap_or(0)).collect();
        let center: Vec<f64> = (0..2).map(|d| ((lo[d] + hi[d]) / 2) as f64 * f.h() + 0.5 * f.h()).collect();
        let half = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2) + 3;
        let Ok(lp) = square_loop(f, &center, half) else { continue };
        if let Ok(Monodromy::Swap) = monodromy_test(f, &lp) {
            let best = cluster
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let sa = { let (x, y) = f.values(act[a]); linalg::dist(x, y) };
                    let sb = { let (x, y) = f.values(act[b]); linalg::dist(x, y) };
                    sa.total_cmp(&sb)
                })
                .expect("nonempty");
            out.push(f.position(act[best]));
        }
    }
    out
}

/// The two single-valued sheets selected by a labelling; unlabelled and
/// excluded nodes are left unset.
pub fn extract_sheets(f: &TwoValuedGrid, labelling: &SheetLabelling) -> Result<[SheetGrid; 2]> {
    let act = f.active();
    if labelling.labels.len() != act.len() {
        return Err(Error::InvalidInput("labelling does not match the grid".into()));
    }
    let n = f.n();
    let side = {
        let half = -f.index(0)[0];
        (2 * half) as usize
    };
    let origin = vec![f.position(0)[0]; n];
    let mut sheets = [
        SheetGrid::blank(origin.clone(), vec![side; n], f.h(), f.k()),
        SheetGrid::blank(origin, vec![side; n], f.h(), f.k()),
    ];
    for (p, &a) in act.iter().enumerate() {
        let (a1, a2) = f.values(a);
        match labelling.labels[p] {
            NodeLabel::Straight => {
                sheets[0].set_value(a, a1);
                sheets[1].set_value(a, a2);
            }
            NodeLabel::Swapped => {
                sheets[0].set_value(a, a2);
                sheets[1].set_value(a, a1);
            }
            _ => {}
        }
    }
    Ok(sheets)
}

/// Graph samples of `f` tagged with the sheet each sample belongs to under
/// `labelling`; samples at excluded or unlabelled nodes stay untagged.
pub fn labelled_varifold(f: &TwoValuedGrid, labelling: &SheetLabelling) -> Result<SampledVarifold> {
    if labelling.labels.len() != f.active().len() {
        return Err(Error::InvalidInput("labelling does not match the grid".into()));
    }
    let v = sample_graph(f)?;
    let sheets = labelling
        .labels
        .iter()
        .flat_map(|l| match l {
            NodeLabel::Straight => [Some(0), Some(1)],
            NodeLabel::Swapped => [Some(1), Some(0)],
            _ => [None, None],
        })
        .collect();
    Ok(v.with_sheets(sheets))
}

/// Flat indices of active nodes outside the annulus `inner ≤ |x| < outer`.
pub fn outside_annulus(f: &TwoValuedGrid, inner: f64, outer: f64) -> Vec<usize> {
    f.active()
        .iter()
        .copied()
        .filter(|&a| {
            let r = linalg::norm(&f.position(a));
            r < inner || r >= outer
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twovalued::Pair2;

    #[test]
    fn constant_separation_decomposes_with_constant_labels() {
        let f = TwoValuedGrid::from_fn(2, 1, 1.0, 0.05, |_| Ok(Pair2::new(vec![0.0], vec![1.0]))).unwrap();
        let l = propagate_labels(&f, &[], None).unwrap();
        assert!(l.decomposed);
        assert!(l.labels.iter().all(|x| *x == NodeLabel::Straight));
        assert!(detect_doubles(&f, 0.01).unwrap().is_empty());
    }

    #[test]
    fn square_loop_is_closed_and_adjacent() {
        let f = TwoValuedGrid::from_fn(2, 1, 1.0, 0.05, |_| Ok(Pair2::new(vec![0.0], vec![1.0]))).unwrap();
        let lp = square_loop(&f, &[0.0, 0.0], 3).unwrap();
        assert_eq!(lp.len(), 24);
        assert_eq!(monodromy_test(&f, &lp).unwrap(), Monodromy::Trivial);
    }
}
