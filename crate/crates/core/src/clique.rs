//! Maximal clique search and clique selection.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Correspondence;
use crate::graph::CompatGraph;

/// Default cap on the number of maximal cliques a single enumeration may produce.
pub const DEFAULT_CLIQUE_BUDGET: usize = 10_000_000;

/// Total clique size summed over all stored cliques before enumeration
/// stops; large near-complete graphs hit this long before the count budget.
pub const MAX_STORED_CLIQUE_ENTRIES: usize = 150_000_000;

/// A clique of the compatibility graph together with its total edge weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clique {
    /// Strictly increasing node indices.
    pub nodes: Vec<usize>,
    pub weight: f64,
}

impl Clique {
    /// Sorts `nodes` and sums the internal edge weights from `graph`.
    pub fn from_nodes(graph: &CompatGraph, mut nodes: Vec<usize>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        let weight = graph.subset_weight(&nodes);
        Self { nodes, weight }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

/// Heavier first, then lexicographically smaller node list.
fn heavier_first(a: &Clique, b: &Clique) -> Ordering {
    b.weight.total_cmp(&a.weight).then_with(|| a.nodes.cmp(&b.nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliqueFilterParams {
    pub min_size: usize,
    /// Keep only the heaviest `top_k` cliques when set.
    pub top_k: Option<usize>,
    pub use_normal_consistency: bool,
    pub t_alpha: f64,
    /// Maximum number of maximal cliques before enumeration gives up.
    pub budget: usize,
}

impl Default for CliqueFilterParams {
    fn default() -> Self {
        Self {
            min_size: 3,
            top_k: None,
            use_normal_consistency: false,
            t_alpha: 0.1,
            budget: DEFAULT_CLIQUE_BUDGET,
        }
    }
}

impl CliqueFilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == Some(0) {
            return Err(Error::InvalidParameter("top_k must be positive".into()));
        }
        if !(self.t_alpha > 0.0) {
            return Err(Error::InvalidParameter("t_alpha must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("clique budget must be positive".into()));
        }
        Ok(())
    }
}

/// Adjacency bit matrix for O(1) membership tests.
struct BitAdjacency {
    words: usize,
    bits: Vec<u64>,
}

impl BitAdjacency {
    fn new(graph: &CompatGraph) -> Self {
        let n = graph.node_count();
        let words = n.div_ceil(64).max(1);
        let mut bits = vec![0u64; n * words];
        for i in 0..n {
            for &j in graph.neighbors(i) {
                bits[i * words + j / 64] |= 1 << (j % 64);
            }
        }
        Self { words, bits }
    }

    #[inline]
    fn adjacent(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] & (1 << (j % 64)) != 0
    }
}

/// Vertices in degeneracy order: repeatedly remove a vertex of minimum
/// remaining degree. Returns the order and the degeneracy.
pub fn degeneracy_order(graph: &CompatGraph) -> (Vec<usize>, usize) {
    let n = graph.node_count();
    let mut degree: Vec<usize> = (0..n).map(|i| graph.degree(i)).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); max_degree + 1];
    for (v, &d) in degree.iter().enumerate() {
        buckets[d].push(v);
    }
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut degeneracy = 0;
    let mut lowest = 0;
    while order.len() < n {
        while buckets[lowest].is_empty() {
            lowest += 1;
        }
        let v = buckets[lowest].pop().expect("bucket is nonempty");
        // buckets hold stale entries; skip vertices already taken or moved
        if removed[v] || degree[v] != lowest {
            continue;
        }
        removed[v] = true;
        degeneracy = degeneracy.max(lowest);
        order.push(v);
        for &u in graph.neighbors(v) {
            if !removed[u] {
                degree[u] -= 1;
                buckets[degree[u]].push(u);
                lowest = lowest.min(degree[u]);
            }
        }
    }
    (order, degeneracy)
}

/// Bit-set helpers over `u64` words.
fn bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(w * 64 + b)
        })
    })
}

fn count(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

fn count_and(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
}

fn and(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

/// The neighborhood of one outer-loop vertex, renumbered to local ids so
/// that candidate and excluded sets fit in a few machine words.
struct Neighborhood<'a> {
    root: usize,
    /// Local id → graph node.
    ids: Vec<usize>,
    words: usize,
    rows: Vec<u64>,
    min_size: usize,
    budget: usize,
    found: &'a AtomicUsize,
    entries: &'a AtomicUsize,
    abort: &'a AtomicBool,
}

impl Neighborhood<'_> {
    fn row(&self, local: usize) -> &[u64] {
        &self.rows[local * self.words..(local + 1) * self.words]
    }

    /// Bron–Kerbosch with Tomita pivoting; `r` holds local ids and
    /// excludes the root.
    fn expand(&self, r: &mut Vec<usize>, mut p: Vec<u64>, mut x: Vec<u64>, out: &mut Vec<Vec<usize>>) {
        if self.abort.load(AtomicOrdering::Relaxed) {
            return;
        }
        let p_size = count(&p);
        if p_size == 0 {
            if x.iter().all(|&w| w == 0) && r.len() + 1 >= self.min_size {
                let size = r.len() + 1;
                if self.found.fetch_add(1, AtomicOrdering::Relaxed) >= self.budget
                    || self.entries.fetch_add(size, AtomicOrdering::Relaxed) + size > MAX_STORED_CLIQUE_ENTRIES
                {
                    self.abort.store(true, AtomicOrdering::Relaxed);
                    return;
                }
                let mut clique: Vec<usize> = r.iter().map(|&l| self.ids[l]).collect();
                clique.push(self.root);
                clique.sort_unstable();
                out.push(clique);
            }
            return;
        }
        if r.len() + 1 + p_size < self.min_size {
            return;
        }
        let mut pivot = 0;
        let mut pivot_hits = 0;
        for (i, (pw, xw)) in p.iter().zip(&x).enumerate() {
            for u in bits(&[pw | xw]) {
                let u = u + i * 64;
                let hits = count_and(&p, self.row(u));
                if hits >= pivot_hits {
                    pivot = u;
                    pivot_hits = hits;
                }
            }
        }
        let candidates: Vec<u64> = p.iter().zip(self.row(pivot)).map(|(a, b)| a & !b).collect();
        for v in bits(&candidates) {
            let row = self.row(v);
            r.push(v);
            self.expand(r, and(&p, row), and(&x, row), out);
            r.pop();
            p[v / 64] &= !(1 << (v % 64));
            x[v / 64] |= 1 << (v % 64);
        }
    }
}

/// All maximal cliques with at least `min_size` nodes, sorted by node list.
///
/// The outer loop walks a degeneracy ordering so each vertex only extends
/// into its later neighbors; per-vertex searches run in parallel and are
/// merged deterministically.
pub fn enumerate_maximal_cliques(graph: &CompatGraph, min_size: usize, budget: usize) -> Result<Vec<Clique>> {
    let n = graph.node_count();
    let adj = BitAdjacency::new(graph);
    let (order, _) = degeneracy_order(graph);
    let mut position = vec![0; n];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }
    let found = AtomicUsize::new(0);
    let entries = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let per_vertex: Vec<Vec<Vec<usize>>> = order
        .par_iter()
        .map(|&v| {
            let mut out = Vec::new();
            if abort.load(AtomicOrdering::Relaxed) {
                return out;
            }
            let (later, earlier): (Vec<usize>, Vec<usize>) =
                graph.neighbors(v).iter().partition(|&&u| position[u] > position[v]);
            let ids: Vec<usize> = later.iter().chain(&earlier).copied().collect();
            let m = ids.len();
            let words = m.div_ceil(64).max(1);
            let mut rows = vec![0u64; m * words];
            for (a, &ga) in ids.iter().enumerate() {
                for (b, &gb) in ids.iter().enumerate().skip(a + 1) {
                    if adj.adjacent(ga, gb) {
                        rows[a * words + b / 64] |= 1 << (b % 64);
                        rows[b * words + a / 64] |= 1 << (a % 64);
                    }
                }
            }
            let mut p = vec![0u64; words];
            let mut x = vec![0u64; words];
            for l in 0..later.len() {
                p[l / 64] |= 1 << (l % 64);
            }
            for l in later.len()..m {
                x[l / 64] |= 1 << (l % 64);
            }
            let hood = Neighborhood {
                root: v,
                ids,
                words,
                rows,
                min_size,
                budget,
                found: &found,
                entries: &entries,
                abort: &abort,
            };
            hood.expand(&mut Vec::new(), p, x, &mut out);
            out
        })
        .collect();
    if abort.load(AtomicOrdering::Relaxed) {
        return Err(if found.load(AtomicOrdering::Relaxed) > budget {
            Error::BudgetExceeded { cap: budget }
        } else {
            Error::CliqueStorageExceeded {
                entries: MAX_STORED_CLIQUE_ENTRIES,
            }
        });
    }
    let mut cliques: Vec<Clique> = per_vertex
        .into_iter()
        .flatten()
        .map(|nodes| {
            let weight = graph.subset_weight(&nodes);
            Clique { nodes, weight }
        })
        .collect();
    cliques.par_sort_unstable_by(|a, b| a.nodes.cmp(&b.nodes));
    Ok(cliques)
}

/// Keeps, for every node, the heaviest clique containing it, then drops
/// duplicates. Output preserves input order.
pub fn node_guided_select(cliques: &[Clique], n_nodes: usize) -> Vec<Clique> {
    let mut best: Vec<Option<usize>> = vec![None; n_nodes];
    for (ci, clique) in cliques.iter().enumerate() {
        for &node in &clique.nodes {
            if node >= n_nodes {
                continue;
            }
            let replace = match best[node] {
                None => true,
                Some(cur) => heavier_first(clique, &cliques[cur]) == Ordering::Less,
            };
            if replace {
                best[node] = Some(ci);
            }
        }
    }
    let mut keep: Vec<usize> = best.into_iter().flatten().collect();
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| cliques[i].clone()).collect()
}

/// `|sin a|` for the angle between two unit vectors; invariant to flipping either.
fn sin_angle(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.cross(b).norm().min(1.0)
}

/// True iff every pair in the clique has similar normal angles on both sides.
///
/// `corrs` is indexed by the clique's node ids.
pub fn normal_consistency_filter(clique: &Clique, corrs: &[Correspondence], t_alpha: f64) -> Result<bool> {
    let mut normals = Vec::with_capacity(clique.len());
    for &i in &clique.nodes {
        let c = &corrs[i];
        match (c.source_normal, c.target_normal) {
            (Some(s), Some(t)) => normals.push((s, t)),
            _ => return Err(Error::MissingNormals { index: c.index }),
        }
    }
    for (a, (si, ti)) in normals.iter().enumerate() {
        for (sj, tj) in &normals[a + 1..] {
            let sin_s = sin_angle(si, sj);
            let sin_t = sin_angle(ti, tj);
            if (sin_s - sin_t).abs() >= t_alpha {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The `k` heaviest cliques, heaviest first; equal weights fall back to
/// node-list order.
pub fn rank_top_k(cliques: &[Clique], k: usize) -> Vec<Clique> {
    let mut sorted = cliques.to_vec();
    sorted.sort_by(heavier_first);
    sorted.truncate(k);
    sorted
}

/// Largest maximal clique; ties go to the heavier one, then to node order.
pub fn maximum_clique(graph: &CompatGraph, min_size: usize) -> Result<Clique> {
    let adj = BitAdjacency::new(graph);
    let (order, _) = degeneracy_order(graph);
    let mut position = vec![0; graph.node_count()];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }
    let mut best: Vec<Vec<usize>> = Vec::new();
    let mut best_size = min_size.max(1);
    for &v in &order {
        let (later, earlier): (Vec<usize>, Vec<usize>) =
            graph.neighbors(v).iter().partition(|&&u| position[u] > position[v]);
        if 1 + later.len() < best_size {
            continue;
        }
        let mut r = vec![v];
        max_expand(&adj, &mut r, later, earlier, &mut best_size, &mut best);
    }
    best.into_iter()
        .map(|nodes| Clique::from_nodes(graph, nodes))
        .min_by(heavier_first)
        .ok_or(Error::NoClique { min_size })
}

fn max_expand(
    adj: &BitAdjacency,
    r: &mut Vec<usize>,
    mut p: Vec<usize>,
    mut x: Vec<usize>,
    best_size: &mut usize,
    best: &mut Vec<Vec<usize>>,
) {
    if r.len() + p.len() < *best_size {
        return;
    }
    if p.is_empty() {
        if x.is_empty() {
            if r.len() > *best_size {
                best.clear();
            }
            *best_size = r.len();
            best.push(r.clone());
        }
        return;
    }
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&w| adj.adjacent(u, w)).count())
        .expect("P is nonempty");
    let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj.adjacent(pivot, v)).collect();
    for v in candidates {
        let next_p: Vec<usize> = p.iter().copied().filter(|&w| adj.adjacent(v, w)).collect();
        let next_x: Vec<usize> = x.iter().copied().filter(|&w| adj.adjacent(v, w)).collect();
        r.push(v);
        max_expand(adj, r, next_p, next_x, best_size, best);
        r.pop();
        if let Some(pos) = p.iter().position(|&w| w == v) {
            p.swap_remove(pos);
        }
        x.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, UnitVec3};
    use crate::graph::GraphOrder;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn brute_force(graph: &CompatGraph, min_size: usize) -> BTreeSet<Vec<usize>> {
        let n = graph.node_count();
        let is_clique = |mask: u32| {
            (0..n).all(|i| mask & (1 << i) == 0 || (i + 1..n).all(|j| mask & (1 << j) == 0 || graph.has_edge(i, j)))
        };
        let mut out = BTreeSet::new();
        for mask in 1u32..(1u32 << n) {
            if (mask.count_ones() as usize) < min_size || !is_clique(mask) {
                continue;
            }
            let maximal = (0..n).all(|k| mask & (1 << k) != 0 || !is_clique(mask | (1 << k)));
            if maximal {
                out.insert((0..n).filter(|&i| mask & (1 << i) != 0).collect());
            }
        }
        out
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> CompatGraph {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    let x = rng.random_range(0.1..2.0);
                    w[i * n + j] = x;
                    w[j * n + i] = x;
                }
            }
        }
        CompatGraph::from_dense(n, w, GraphOrder::SecondOrder).unwrap()
    }

    fn node_sets(cliques: &[Clique]) -> BTreeSet<Vec<usize>> {
        cliques.iter().map(|c| c.nodes.clone()).collect()
    }

    fn clique(nodes: &[usize], weight: f64) -> Clique {
        Clique {
            nodes: nodes.to_vec(),
            weight,
        }
    }

    #[test]
    fn enumerate_examples() {
        let k4 = CompatGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let c = enumerate_maximal_cliques(&k4, 3, DEFAULT_CLIQUE_BUDGET).unwrap();
        assert_eq!(node_sets(&c), BTreeSet::from([vec![0, 1, 2, 3]]));
        assert_eq!(c[0].weight, 6.0);

        let cycle = CompatGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(enumerate_maximal_cliques(&cycle, 3, DEFAULT_CLIQUE_BUDGET).unwrap().is_empty());
        assert!(brute_force(&cycle, 3).is_empty());

        let two = CompatGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let c = enumerate_maximal_cliques(&two, 3, DEFAULT_CLIQUE_BUDGET).unwrap();
        assert_eq!(node_sets(&c), BTreeSet::from([vec![0, 1, 2], vec![3, 4, 5]]));
    }

    #[test]
    fn enumerate_respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(&mut rng, 40, 0.5);
        assert!(matches!(
            enumerate_maximal_cliques(&g, 1, 5),
            Err(Error::BudgetExceeded { cap: 5 })
        ));
    }

    #[test]
    fn enumerate_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..60 {
            let n = rng.random_range(1..=12);
            let p = [0.2, 0.5, 0.8][trial % 3];
            let g = random_graph(&mut rng, n, p);
            for min_size in [1, 3] {
                let got = enumerate_maximal_cliques(&g, min_size, DEFAULT_CLIQUE_BUDGET).unwrap();
                assert_eq!(node_sets(&got), brute_force(&g, min_size));
                assert_eq!(got.len(), node_sets(&got).len());
                for c in &got {
                    assert!((c.weight - g.subset_weight(&c.nodes)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn degeneracy_of_known_graphs() {
        let k4 = CompatGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(degeneracy_order(&k4).1, 3);
        let path = CompatGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        let (order, d) = degeneracy_order(&path);
        assert_eq!(d, 1);
        assert_eq!(order.len(), 4);
    }

    #[test]
    fn node_guided_examples() {
        let two = vec![clique(&[0, 1, 2], 3.0), clique(&[3, 4, 5], 3.0)];
        assert_eq!(node_guided_select(&two, 6), two);

        let shared = vec![clique(&[0, 1, 2], 9.0)];
        assert_eq!(node_guided_select(&shared, 3).len(), 1);
        assert!(node_guided_select(&[], 5).is_empty());
    }

    #[test]
    fn node_guided_against_brute_force() {
        // A = {0,1,2,3} weight 5, B = {0,4,5} weight 3, C = {1,4} weight 4
        let cliques = vec![clique(&[0, 1, 2, 3], 5.0), clique(&[0, 4, 5], 3.0), clique(&[1, 4], 4.0)];
        // brute force: per node, the heaviest containing clique
        let mut expected = BTreeSet::new();
        for node in 0..6 {
            let best = cliques
                .iter()
                .filter(|c| c.nodes.contains(&node))
                .max_by(|a, b| a.weight.total_cmp(&b.weight))
                .unwrap();
            expected.insert(best.nodes.clone());
        }
        let got = node_guided_select(&cliques, 6);
        assert_eq!(node_sets(&got), expected);
        // B survives only because node 5 has no heavier clique
        assert!(got.iter().any(|c| c.nodes == vec![0, 4, 5]));
    }

    #[test]
    fn node_guided_tie_prefers_smaller_node_list() {
        let cliques = vec![clique(&[0, 2, 3], 4.0), clique(&[0, 1, 2], 4.0)];
        let got = node_guided_select(&cliques, 4);
        // node 0 and 2 pick [0,1,2]; node 3 still needs [0,2,3]
        assert_eq!(got.len(), 2);
        let reversed: Vec<Clique> = cliques.iter().rev().cloned().collect();
        assert_eq!(node_sets(&node_guided_select(&reversed, 4)), node_sets(&got));
        // without node 3 nothing needs the second clique
        let only = node_guided_select(&cliques, 3);
        assert_eq!(node_sets(&only), BTreeSet::from([vec![0, 1, 2]]));
    }

    fn corr_with_normals(i: usize, ns: Vector3<f64>, nt: Vector3<f64>) -> Correspondence {
        Correspondence::new(i, Point3::origin(), Point3::origin())
            .with_normals(UnitVec3::new_normalize(ns), UnitVec3::new_normalize(nt))
    }

    #[test]
    fn normal_consistency_examples() {
        let rot = crate::geometry::RigidTransform::from_axis_angle(Vector3::new(1.0, 2.0, 3.0), 0.9, Vector3::zeros());
        let dirs = [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.3, 1.0, 0.0), Vector3::new(0.0, 0.2, 1.0)];
        let corrs: Vec<Correspondence> = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| corr_with_normals(i, *d, rot.apply_vector(d)))
            .collect();
        let c = clique(&[0, 1, 2], 1.0);
        assert!(normal_consistency_filter(&c, &corrs, 1e-9).unwrap());

        let bad = vec![
            corr_with_normals(0, Vector3::x(), Vector3::x()),
            corr_with_normals(1, Vector3::x(), Vector3::y()),
        ];
        let pair = clique(&[0, 1], 1.0);
        assert!(!normal_consistency_filter(&pair, &bad, 0.99).unwrap());

        let mut flipped = corrs.clone();
        flipped[1].source_normal = Some(-flipped[1].source_normal.unwrap());
        assert!(normal_consistency_filter(&c, &flipped, 1e-9).unwrap());
        let mut flipped_bad = bad.clone();
        flipped_bad[0].target_normal = Some(-flipped_bad[0].target_normal.unwrap());
        assert!(!normal_consistency_filter(&pair, &flipped_bad, 0.99).unwrap());

        let bare = vec![Correspondence::new(7, Point3::origin(), Point3::origin()); 2];
        assert!(matches!(
            normal_consistency_filter(&pair, &bare, 0.1),
            Err(Error::MissingNormals { index: 7 })
        ));
    }

    #[test]
    fn rank_examples() {
        let cs = vec![clique(&[0, 1, 2], 5.0), clique(&[3, 4, 5], 3.0), clique(&[6, 7, 8], 9.0)];
        let top2 = rank_top_k(&cs, 2);
        assert_eq!(top2.iter().map(|c| c.weight).collect::<Vec<_>>(), vec![9.0, 5.0]);
        let all = rank_top_k(&cs, 10);
        assert_eq!(all.iter().map(|c| c.weight).collect::<Vec<_>>(), vec![9.0, 5.0, 3.0]);

        let tied = vec![clique(&[2, 3, 4], 1.0), clique(&[0, 1, 5], 1.0)];
        for _ in 0..5 {
            let r = rank_top_k(&tied, 2);
            assert_eq!(r[0].nodes, vec![0, 1, 5]);
            assert_eq!(r[1].nodes, vec![2, 3, 4]);
        }
    }

    #[test]
    fn maximum_clique_examples() {
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                edges.push((i, j));
            }
        }
        edges.extend([(5, 6), (6, 7), (5, 7)]);
        let g = CompatGraph::from_edges(8, &edges);
        assert_eq!(maximum_clique(&g, 3).unwrap().nodes, vec![0, 1, 2, 3, 4]);

        let n = 6;
        let mut w = vec![0.0; n * n];
        for (a, b, x) in [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 2.0), (3, 4, 3.0), (4, 5, 3.0), (3, 5, 3.0)] {
            w[a * n + b] = x;
            w[b * n + a] = x;
        }
        let g = CompatGraph::from_dense(n, w, GraphOrder::SecondOrder).unwrap();
        let best = maximum_clique(&g, 3).unwrap();
        assert_eq!(best.nodes, vec![3, 4, 5]);
        assert_eq!(best.weight, 9.0);

        let empty = CompatGraph::from_edges(4, &[]);
        assert!(matches!(maximum_clique(&empty, 3), Err(Error::NoClique { .. })));
    }

    proptest! {
        #[test]
        fn enumeration_properties(seed in any::<u64>(), n in 2usize..14, p in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, n, p);
            let cliques = enumerate_maximal_cliques(&g, 1, DEFAULT_CLIQUE_BUDGET).unwrap();
            for c in &cliques {
                prop_assert!(c.nodes.windows(2).all(|w| w[0] < w[1]));
                for (a, &i) in c.nodes.iter().enumerate() {
                    for &j in &c.nodes[a + 1..] {
                        prop_assert!(g.has_edge(i, j));
                    }
                }
                for k in 0..n {
                    if !c.contains(k) {
                        prop_assert!(!c.nodes.iter().all(|&i| g.has_edge(i, k)));
                    }
                }
            }

            // relabeling permutes the output
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    w[perm[i] * n + perm[j]] = g.weight(i, j);
                }
            }
            let relabeled = CompatGraph::from_dense(n, w, GraphOrder::SecondOrder).unwrap();
            let got = node_sets(&enumerate_maximal_cliques(&relabeled, 1, DEFAULT_CLIQUE_BUDGET).unwrap());
            let expected: BTreeSet<Vec<usize>> = cliques
                .iter()
                .map(|c| {
                    let mut v: Vec<usize> = c.nodes.iter().map(|&i| perm[i]).collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            prop_assert_eq!(got, expected);

            if let Ok(max) = maximum_clique(&g, 1) {
                prop_assert!(cliques.iter().all(|c| c.len() <= max.len()));
            }

            let selected = node_guided_select(&cliques, n);
            prop_assert!(selected.len() <= n);
            for node in 0..n {
                if cliques.iter().any(|c| c.contains(node)) {
                    prop_assert!(selected.iter().any(|c| c.contains(node)));
                }
            }
        }
    }
}
