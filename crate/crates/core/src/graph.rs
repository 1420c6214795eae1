//! Graph families carrying the dependence structure, and structural
//! diagnostics (girth, regularity, connectivity ratio).
//!
//! Edges are stored as `(i, j)` with `i < j`, sorted lexicographically. Edge
//! index `k` everywhere else in the crate refers to this order.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = u32;
pub type Edge = (Vertex, Vertex);

/// Largest hypercube dimension generated unless a caller passes its own cap.
pub const HYPERCUBE_CAP: u32 = 20;
/// Largest projective-plane order generated (about 3.5 million edges).
pub const CAGE_ORDER_CAP: u64 = 151;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bipartite,
    TwoHub,
    Hypercube,
    Fan,
    Cage,
    Custom,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Bipartite,
        Family::TwoHub,
        Family::Hypercube,
        Family::Fan,
        Family::Cage,
        Family::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Bipartite => "bipartite",
            Family::TwoHub => "two_hub",
            Family::Hypercube => "hypercube",
            Family::Fan => "fan",
            Family::Cage => "cage",
            Family::Custom => "custom",
        }
    }

    /// Builds the family member with parameter `param` (m, or q for cages).
    pub fn build(self, param: u64) -> Result<Graph> {
        let m = || -> Result<u32> {
            u32::try_from(param).map_err(|_| Error::invalid(format!("{} parameter {param} too large", self.name())))
        };
        match self {
            Family::Bipartite => complete_bipartite(m()?),
            Family::TwoHub => two_hub(m()?),
            Family::Hypercube => hypercube(m()?),
            Family::Fan => fan(m()?),
            Family::Cage => cage_incidence(param),
            Family::Custom => Err(Error::invalid("custom graphs are loaded from an edge list, not generated")),
        }
    }

    /// Families whose members are regular graphs.
    pub fn is_regular(self) -> bool {
        matches!(self, Family::Bipartite | Family::Hypercube | Family::Cage)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown graph family `{s}` (expected bipartite, two_hub, hypercube, fan, cage or custom)"
                ))
            })
    }
}

/// Simple undirected graph in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<Edge>,
    family: Family,
    param: u64,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    family: Family,
    param: u64,
    vertex_count: usize,
    edges: Vec<[Vertex; 2]>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        let edges = r.edges.into_iter().map(|[i, j]| (i, j)).collect();
        Graph::new(r.vertex_count, edges, r.family, r.param)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            family: g.family,
            param: g.param,
            vertex_count: g.vertex_count,
            edges: g.edges.into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    /// Validates and canonicalizes an edge list: pairs are reordered to
    /// `i < j` and sorted; self-loops, duplicates and out-of-range indices are
    /// rejected.
    pub fn new(vertex_count: usize, mut edges: Vec<Edge>, family: Family, param: u64) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        if vertex_count > Vertex::MAX as usize {
            return Err(Error::invalid(format!("vertex count {vertex_count} exceeds u32 indexing")));
        }
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(Error::invalid(format!("self-loop at vertex {}", e.0)));
            }
            if e.1 < e.0 {
                *e = (e.1, e.0);
            }
            if e.1 as usize >= vertex_count {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) references a vertex >= {vertex_count}",
                    e.0, e.1
                )));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Graph {
            vertex_count,
            edges,
            family,
            param,
        })
    }

    /// Custom graph from an arbitrary edge list.
    pub fn custom(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        Graph::new(vertex_count, edges, Family::Custom, 0)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn param(&self) -> u64 {
        self.param
    }

    pub fn adjacency(&self) -> Vec<Vec<Vertex>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(i, j) in &self.edges {
            adj[i as usize].push(j);
            adj[j as usize].push(i);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertex_count];
        for &(i, j) in &self.edges {
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        deg
    }

    /// Common degree if the graph is regular.
    pub fn regular_degree(&self) -> Option<usize> {
        let deg = self.degrees();
        let first = deg[0];
        deg.iter().all(|&d| d == first).then_some(first)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn require_positive(name: &str, m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid(format!("{name} requires m >= 1")));
    }
    Ok(())
}

/// `K_{m,m}`: side 1 is `0..m`, side 2 is `m..2m`.
pub fn complete_bipartite(m: u32) -> Result<Graph> {
    require_positive("complete_bipartite", m)?;
    let edges = (0..m).flat_map(|i| (m..2 * m).map(move |j| (i, j))).collect();
    Graph::new(2 * m as usize, edges, Family::Bipartite, m.into())
}

/// Two hubs joined through `m` middle vertices: hub_left = 0, middle `1..=m`,
/// hub_right = `m + 1`.
pub fn two_hub(m: u32) -> Result<Graph> {
    require_positive("two_hub", m)?;
    let right = m + 1;
    let edges = (1..=m).flat_map(|v| [(0, v), (v, right)]).collect();
    Graph::new(m as usize + 2, edges, Family::TwoHub, m.into())
}

pub fn hypercube(m: u32) -> Result<Graph> {
    hypercube_capped(m, HYPERCUBE_CAP)
}

/// `m`-cube on `2^m` binary vectors, with an explicit dimension cap.
pub fn hypercube_capped(m: u32, cap: u32) -> Result<Graph> {
    require_positive("hypercube", m)?;
    if m > cap {
        return Err(Error::invalid(format!("hypercube dimension {m} exceeds the cap {cap}")));
    }
    if m > 31 {
        return Err(Error::invalid(format!("hypercube dimension {m} exceeds u32 indexing")));
    }
    let v: Vertex = 1 << m;
    let edges = (0..v)
        .flat_map(|u| (0..m).filter(move |b| u & (1 << b) == 0).map(move |b| (u, u | (1 << b))))
        .collect();
    Graph::new(v as usize, edges, Family::Hypercube, m.into())
}

/// Direction class `d in 1..=m` of a hypercube edge (the flipped bit, 1-based).
pub fn hypercube_direction(edge: Edge) -> Option<u32> {
    let x = edge.0 ^ edge.1;
    x.is_power_of_two().then(|| x.trailing_zeros() + 1)
}

/// Fan on `M_0 .. M_{2m+1}`: the edge `M_0 M_{2m+1}`, spokes `M_0 M_i` and
/// `M_{m+i} M_{2m+1}`, and blades `M_i M_{m+i}` for `1 <= i <= m`.
pub fn fan(m: u32) -> Result<Graph> {
    require_positive("fan", m)?;
    let last = 2 * m + 1;
    let mut edges = vec![(0, last)];
    for i in 1..=m {
        edges.push((0, i));
        edges.push((m + i, last));
        edges.push((i, m + i));
    }
    Graph::new(2 * m as usize + 2, edges, Family::Fan, m.into())
}

pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Normalized homogeneous coordinates of PG(2, q): first nonzero entry is 1.
fn projective_points(q: u64) -> Vec<[u64; 3]> {
    let mut pts = Vec::with_capacity((q * q + q + 1) as usize);
    for a in 0..q {
        for b in 0..q {
            pts.push([1, a, b]);
        }
    }
    for b in 0..q {
        pts.push([0, 1, b]);
    }
    pts.push([0, 0, 1]);
    pts
}

/// Point-line incidence graph of PG(2, q) for prime `q`. Points are
/// `0..N`, lines `N..2N` with `N = q^2 + q + 1`; lines use the same
/// coordinate list as points and `P ~ L` iff `P . L = 0 (mod q)`.
pub fn cage_incidence(q: u64) -> Result<Graph> {
    if !is_prime(q) {
        return Err(Error::Unsupported(format!(
            "cage_incidence needs a prime order, got {q} (prime powers need GF(p^k) arithmetic, which is not implemented)"
        )));
    }
    if q > CAGE_ORDER_CAP {
        return Err(Error::invalid(format!("projective plane order {q} exceeds the cap {CAGE_ORDER_CAP}")));
    }
    let pts = projective_points(q);
    let n = pts.len() as Vertex;
    let mut edges = Vec::with_capacity(((q + 1) * n as u64) as usize);
    for (i, p) in pts.iter().enumerate() {
        for (j, l) in pts.iter().enumerate() {
            if (p[0] * l[0] + p[1] * l[1] + p[2] * l[2]) % q == 0 {
                edges.push((i as Vertex, n + j as Vertex));
            }
        }
    }
    Graph::new(2 * n as usize, edges, Family::Cage, q)
}

/// Length of the shortest cycle, `None` for a forest. BFS from every vertex:
/// a non-tree edge `(u, w)` met from root `s` closes a closed walk of length
/// `d(u) + d(w) + 1` and the minimum over all roots is the girth.
pub fn girth(g: &Graph) -> Option<usize> {
    let adj = g.adjacency();
    let n = g.vertex_count();
    let mut best = usize::MAX;
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![Vertex::MAX; n];
    let mut queue = VecDeque::new();
    let mut touched = Vec::new();
    for root in 0..n {
        for &v in &touched {
            dist[v] = usize::MAX;
            parent[v] = Vertex::MAX;
        }
        touched.clear();
        dist[root] = 0;
        touched.push(root);
        queue.clear();
        queue.push_back(root);
        'bfs: while let Some(u) = queue.pop_front() {
            // nothing shorter can come from this root
            if 2 * dist[u] + 1 >= best {
                break;
            }
            for &w in &adj[u] {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u as Vertex;
                    touched.push(w);
                    queue.push_back(w);
                } else if parent[u] as usize != w {
                    best = best.min(dist[u] + dist[w] + 1);
                    if best == 3 {
                        break 'bfs;
                    }
                }
            }
        }
        if best == 3 {
            break;
        }
    }
    (best != usize::MAX).then_some(best)
}

/// Degree over vertex count for the regular families, as a reduced fraction.
pub fn connectivity_ratio(family: Family, param: u64) -> Result<Ratio<u64>> {
    if !family.is_regular() {
        return Err(Error::invalid(format!(
            "connectivity ratio is defined for regular families only; {family} is not regular"
        )));
    }
    let g = family.build(param)?;
    let degree = g
        .regular_degree()
        .ok_or_else(|| Error::Numeric(format!("{family}({param}) generated a non-regular graph")))?;
    Ok(Ratio::new(degree as u64, g.vertex_count() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shortest cycle by exhaustive DFS over simple paths; tiny graphs only.
    fn brute_girth(g: &Graph) -> Option<usize> {
        let adj = g.adjacency();
        let n = g.vertex_count();
        let mut best: Option<usize> = None;
        fn dfs(adj: &[Vec<Vertex>], start: usize, u: usize, depth: usize, seen: &mut Vec<bool>, best: &mut Option<usize>) {
            for &w in &adj[u] {
                let w = w as usize;
                if w == start && depth >= 3 {
                    *best = Some(best.map_or(depth, |b| b.min(depth)));
                } else if !seen[w] && w > start {
                    seen[w] = true;
                    dfs(adj, start, w, depth + 1, seen, best);
                    seen[w] = false;
                }
            }
        }
        for s in 0..n {
            let mut seen = vec![false; n];
            seen[s] = true;
            dfs(&adj, s, s, 1, &mut seen, &mut best);
        }
        best
    }

    #[test]
    fn family_counts() {
        let g = complete_bipartite(4).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (8, 16));
        let g = complete_bipartite(1).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (2, 1));
        let g = two_hub(6).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (8, 12));
        assert_eq!(two_hub(1).unwrap().edges(), &[(0, 1), (1, 2)]);
        let g = hypercube(3).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (8, 12));
        assert_eq!(hypercube(1).unwrap().edges(), &[(0, 1)]);
        let g = fan(6).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (14, 19));
        let g = fan(1).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 4));
        assert_eq!(girth(&g), Some(4));
    }

    #[test]
    fn zero_parameter_rejected() {
        assert!(complete_bipartite(0).is_err());
        assert!(two_hub(0).is_err());
        assert!(hypercube(0).is_err());
        assert!(fan(0).is_err());
        assert!(hypercube(21).is_err());
        assert!(hypercube_capped(21, 21).is_ok());
    }

    #[test]
    fn small_girths_match_brute_force() {
        for g in [
            complete_bipartite(2).unwrap(),
            complete_bipartite(3).unwrap(),
            two_hub(2).unwrap(),
            hypercube(2).unwrap(),
            hypercube(3).unwrap(),
            fan(3).unwrap(),
            cage_incidence(2).unwrap(),
        ] {
            assert_eq!(girth(&g), brute_girth(&g), "{:?}({})", g.family(), g.param());
        }
        assert_eq!(girth(&complete_bipartite(2).unwrap()), Some(4));
        assert_eq!(girth(&two_hub(2).unwrap()), Some(4));
        assert_eq!(girth(&fan(3).unwrap()), Some(4));
    }

    #[test]
    fn acyclic_and_triangle() {
        assert_eq!(girth(&complete_bipartite(1).unwrap()), None);
        assert_eq!(girth(&two_hub(1).unwrap()), None);
        let tri = Graph::custom(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(girth(&tri), Some(3));
    }

    #[test]
    fn heawood_graph() {
        let g = cage_incidence(2).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (14, 21));
        assert_eq!(g.regular_degree(), Some(3));
        assert_eq!(girth(&g), Some(6));
    }

    #[test]
    fn cage_counts_and_girth() {
        for q in [2u64, 3, 5, 7, 11, 13] {
            let g = cage_incidence(q).unwrap();
            let n = (q * q + q + 1) as usize;
            assert_eq!(g.vertex_count(), 2 * n);
            assert_eq!(g.edge_count(), (q as usize + 1) * n);
            assert_eq!(g.regular_degree(), Some(q as usize + 1));
            if q <= 7 {
                assert_eq!(girth(&g), Some(6), "q={q}");
            }
        }
        // the order used at full scale, checked by formula only
        let q = 64u64;
        assert_eq!((q + 1) * (q * q + q + 1), 270_465);
    }

    #[test]
    fn cage_diameter_three() {
        let g = cage_incidence(3).unwrap();
        let adj = g.adjacency();
        let mut diam = 0;
        for s in 0..g.vertex_count() {
            let mut dist = vec![usize::MAX; g.vertex_count()];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &w in &adj[u] {
                    if dist[w as usize] == usize::MAX {
                        dist[w as usize] = dist[u] + 1;
                        q.push_back(w as usize);
                    }
                }
            }
            diam = diam.max(*dist.iter().max().unwrap());
        }
        assert_eq!(diam, 3);
    }

    #[test]
    fn non_prime_order_rejected() {
        for q in [0u64, 1, 4, 6, 9, 64] {
            assert!(matches!(cage_incidence(q), Err(Error::Unsupported(_))), "q={q}");
        }
    }

    #[test]
    fn connectivity_ratios() {
        assert_eq!(connectivity_ratio(Family::Bipartite, 10).unwrap(), Ratio::new(1, 2));
        assert_eq!(connectivity_ratio(Family::Hypercube, 10).unwrap(), Ratio::new(10, 1024));
        assert_eq!(connectivity_ratio(Family::Cage, 3).unwrap(), Ratio::new(4, 26));
        assert!(connectivity_ratio(Family::TwoHub, 3).is_err());
        assert!(connectivity_ratio(Family::Fan, 3).is_err());
        for m in 1..=12 {
            assert_eq!(connectivity_ratio(Family::Bipartite, m).unwrap(), Ratio::new(1, 2));
        }
    }

    #[test]
    fn ratios_decrease_for_sparse_families() {
        let cube: Vec<_> = (1..=12).map(|m| connectivity_ratio(Family::Hypercube, m).unwrap()).collect();
        assert!(cube.windows(2).all(|w| w[1] <= w[0]));
        assert!(cube.windows(2).skip(1).all(|w| w[1] < w[0]));
        let cage: Vec<_> = [2, 3, 5, 7, 11, 13]
            .iter()
            .map(|&q| connectivity_ratio(Family::Cage, q).unwrap())
            .collect();
        assert!(cage.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn hypercube_directions() {
        let g = hypercube(4).unwrap();
        let mut per_class = [0usize; 5];
        for &e in g.edges() {
            per_class[hypercube_direction(e).unwrap() as usize] += 1;
        }
        assert_eq!(per_class, [0, 8, 8, 8, 8]);
        assert_eq!(hypercube_direction((0, 3)), None);
    }

    #[test]
    fn fan_edges_follow_the_description() {
        let g = fan(2).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (0, 5), (1, 3), (2, 4), (3, 5), (4, 5)]);
    }

    #[test]
    fn validation() {
        assert!(Graph::custom(3, vec![(1, 1)]).is_err());
        assert!(Graph::custom(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(Graph::custom(3, vec![(0, 3)]).is_err());
        let g = Graph::custom(3, vec![(2, 1), (0, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 2)]);
    }

    #[test]
    fn json_round_trip() {
        let g = fan(3).unwrap();
        let s = g.to_json().unwrap();
        assert!(s.starts_with(r#"{"family":"fan","param":3,"vertex_count":8,"edges":[[0,1],"#));
        assert_eq!(Graph::from_json(&s).unwrap(), g);
        assert!(Graph::from_json(r#"{"family":"custom","param":0,"vertex_count":2,"edges":[[0,0]]}"#).is_err());
    }

    #[test]
    fn family_names_parse() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert_eq!("two-hub".parse::<Family>().unwrap(), Family::TwoHub);
        assert!("petersen".parse::<Family>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn family_formulas(m in 1u32..=12) {
                let g = complete_bipartite(m).unwrap();
                prop_assert_eq!((g.vertex_count(), g.edge_count()), (2 * m as usize, (m * m) as usize));
                let g = two_hub(m).unwrap();
                prop_assert_eq!((g.vertex_count(), g.edge_count()), (m as usize + 2, 2 * m as usize));
                let g = hypercube(m).unwrap();
                prop_assert_eq!((g.vertex_count(), g.edge_count()), (1usize << m, (m as usize) << (m - 1)));
                let g = fan(m).unwrap();
                prop_assert_eq!((g.vertex_count(), g.edge_count()), (2 * m as usize + 2, 3 * m as usize + 1));
            }

            #[test]
            fn family_girth_at_least_four(m in 2u32..=7) {
                for f in [Family::Bipartite, Family::TwoHub, Family::Hypercube, Family::Fan] {
                    let g = f.build(m.into()).unwrap();
                    prop_assert!(girth(&g).unwrap() >= 4);
                }
            }

            #[test]
            fn regeneration_is_identical(m in 1u32..=9) {
                for f in [Family::Bipartite, Family::TwoHub, Family::Hypercube, Family::Fan] {
                    let a = f.build(m.into()).unwrap().to_json().unwrap();
                    let b = f.build(m.into()).unwrap().to_json().unwrap();
                    prop_assert_eq!(a, b);
                }
            }

            #[test]
            fn canonical_form_is_order_free(mut edges in proptest::collection::vec((0u32..10, 0u32..10), 0..30)) {
                edges.retain(|e| e.0 != e.1);
                edges.iter_mut().for_each(|e| if e.0 > e.1 { *e = (e.1, e.0) });
                edges.sort_unstable();
                edges.dedup();
                let a = Graph::custom(10, edges.clone()).unwrap();
                let rev: Vec<_> = edges.iter().rev().map(|&(i, j)| (j, i)).collect();
                let b = Graph::custom(10, rev).unwrap();
                prop_assert_eq!(a.edges(), b.edges());
                prop_assert!(a.edges().windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(girth(&a), brute_girth(&a));
            }
        }
    }
}
