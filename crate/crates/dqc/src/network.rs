//! Networks of quantum modules: named modules with computation and link
//! capacities, an undirected connectivity graph, Steiner-tree routing with a
//! per-network cache, and random topology generators.

use crate::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, RwLock};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModuleDecl {
    name: String,
    comp: u32,
    #[serde(default)]
    link: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkDecl {
    modules: Vec<ModuleDecl>,
    edges: Vec<(String, String)>,
}

/// A network of quantum modules. Modules are addressed by index internally;
/// ties in routing and optimisation are broken by lexicographic module name.
#[derive(Debug)]
pub struct Network {
    names: Vec<String>,
    comp: Vec<u32>,
    link: Vec<Option<u32>>,
    adj: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
    cache: RwLock<HashMap<Vec<usize>, Arc<SteinerTree>>>,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Network {
            names: self.names.clone(),
            comp: self.comp.clone(),
            link: self.link.clone(),
            adj: self.adj.clone(),
            edges: self.edges.clone(),
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.comp == other.comp
            && self.link == other.link
            && self.edges == other.edges
    }
}

impl Network {
    /// Build a network from named modules. `modules` supplies
    /// `(name, computation capacity, link capacity)`; `None` link capacity
    /// means unbounded. Edges are undirected; duplicates collapse.
    pub fn new(
        modules: Vec<(String, u32, Option<u32>)>,
        edges: Vec<(String, String)>,
    ) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::InvalidParams("network needs at least one module".into()));
        }
        let mut names = Vec::new();
        let mut comp = Vec::new();
        let mut link = Vec::new();
        let mut index = BTreeMap::new();
        for (name, c, l) in modules {
            if index.contains_key(&name) {
                return Err(Error::InvalidParams(format!("duplicate module name {name}")));
            }
            index.insert(name.clone(), names.len());
            names.push(name);
            comp.push(c);
            link.push(l);
        }
        let mut eset = BTreeSet::new();
        for (a, b) in edges {
            let ia = *index.get(&a).ok_or_else(|| Error::UnknownModule(a.clone()))?;
            let ib = *index.get(&b).ok_or_else(|| Error::UnknownModule(b.clone()))?;
            if ia == ib {
                return Err(Error::InvalidParams(format!("self-loop on module {a}")));
            }
            eset.insert((ia.min(ib), ia.max(ib)));
        }
        let mut adj = vec![Vec::new(); names.len()];
        for &(a, b) in &eset {
            adj[a].push(b);
            adj[b].push(a);
        }
        // deterministic neighbour order: lexicographic by name
        for l in &mut adj {
            l.sort_by(|&x, &y| names[x].cmp(&names[y]));
        }
        Ok(Network { names, comp, link, adj, edges: eset, cache: RwLock::new(HashMap::new()) })
    }

    pub fn module_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, m: usize) -> &str {
        &self.names[m]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownModule(name.into()))
    }

    /// Computation-qubit capacity of module `m`.
    pub fn comp_capacity(&self, m: usize) -> u32 {
        self.comp[m]
    }

    /// Link-qubit capacity of module `m`; `None` is unbounded.
    pub fn link_capacity(&self, m: usize) -> Option<u32> {
        self.link[m]
    }

    pub fn total_comp_capacity(&self) -> u64 {
        self.comp.iter().map(|&c| c as u64).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbours(&self, m: usize) -> &[usize] {
        &self.adj[m]
    }

    pub fn is_connected(&self) -> bool {
        if self.names.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.names.len()];
        let mut q = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = q.pop_front() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    q.push_back(w);
                }
            }
        }
        count == self.names.len()
    }

    /// Hop distances from `src` to every module (usize::MAX if unreachable).
    pub fn bfs_dists(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.names.len()];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(v) = q.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    /// Deterministic shortest path between two modules (BFS, parents chosen in
    /// lexicographic name order). Includes both endpoints.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        let mut parent = vec![usize::MAX; self.names.len()];
        let mut seen = vec![false; self.names.len()];
        seen[from] = true;
        let mut q = VecDeque::from([from]);
        while let Some(v) = q.pop_front() {
            if v == to {
                break;
            }
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    q.push_back(w);
                }
            }
        }
        if !seen[to] {
            return Err(Error::Infeasible(format!(
                "modules {} and {} are not connected",
                self.names[from], self.names[to]
            )));
        }
        let mut path = vec![to];
        let mut v = to;
        while v != from {
            v = parent[v];
            path.push(v);
        }
        path.reverse();
        Ok(path)
    }

    /// Approximate minimum Steiner tree spanning `terminals` (metric-closure
    /// 2-approximation: MST over terminal distances, edges expanded to real
    /// shortest paths, spanning tree of the union, non-terminal leaves pruned).
    /// Results are cached per sorted terminal set.
    pub fn steiner_tree(&self, terminals: &[usize]) -> Result<Arc<SteinerTree>> {
        let mut key: Vec<usize> = terminals.to_vec();
        key.sort_unstable();
        key.dedup();
        if let Some(t) = self.cache.read().unwrap().get(&key) {
            return Ok(Arc::clone(t));
        }
        let tree = Arc::new(self.compute_steiner(&key)?);
        self.cache.write().unwrap().insert(key, Arc::clone(&tree));
        Ok(tree)
    }

    fn compute_steiner(&self, terminals: &[usize]) -> Result<SteinerTree> {
        for &t in terminals {
            if t >= self.names.len() {
                return Err(Error::UnknownVertex(format!("module index {t}")));
            }
        }
        if terminals.len() <= 1 {
            return Ok(SteinerTree::new(terminals.to_vec(), Vec::new(), self));
        }
        let dists: BTreeMap<usize, Vec<usize>> =
            terminals.iter().map(|&t| (t, self.bfs_dists(t))).collect();
        for &t in terminals {
            for &u in terminals {
                if dists[&t][u] == usize::MAX {
                    return Err(Error::Infeasible(format!(
                        "modules {} and {} are not connected",
                        self.names[t], self.names[u]
                    )));
                }
            }
        }
        // Prim over the metric closure, seeded at the lexicographically
        // smallest terminal; ties by (distance, attach name, new name).
        let start = *terminals
            .iter()
            .min_by(|&&a, &&b| self.names[a].cmp(&self.names[b]))
            .unwrap();
        let mut reached: BTreeSet<usize> = BTreeSet::from([start]);
        let mut union_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        while reached.len() < terminals.len() {
            let mut best: Option<(usize, &str, &str, usize, usize)> = None;
            for &t in terminals.iter().filter(|t| !reached.contains(t)) {
                for &r in &reached {
                    let d = dists[&t][r];
                    let cand = (d, self.names[r].as_str(), self.names[t].as_str(), r, t);
                    if best.is_none()
                        || (cand.0, cand.1, cand.2) < (best.unwrap().0, best.unwrap().1, best.unwrap().2)
                    {
                        best = Some(cand);
                    }
                }
            }
            let (_, _, _, attach, target) = best.unwrap();
            let path = self.shortest_path(attach, target)?;
            for w in path.windows(2) {
                union_edges.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
            reached.insert(target);
        }
        // spanning tree of the union subgraph (BFS from smallest-name terminal)
        let mut sub_adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in &union_edges {
            sub_adj.entry(a).or_default().push(b);
            sub_adj.entry(b).or_default().push(a);
        }
        for l in sub_adj.values_mut() {
            l.sort_by(|&x, &y| self.names[x].cmp(&self.names[y]));
        }
        let mut tree_edges: Vec<(usize, usize)> = Vec::new();
        let mut seen: BTreeSet<usize> = BTreeSet::from([start]);
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            for &w in sub_adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(w) {
                    tree_edges.push((v.min(w), v.max(w)));
                    q.push_back(w);
                }
            }
        }
        // prune non-terminal leaves
        let terminal_set: BTreeSet<usize> = terminals.iter().copied().collect();
        loop {
            let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
            for &(a, b) in &tree_edges {
                *degree.entry(a).or_default() += 1;
                *degree.entry(b).or_default() += 1;
            }
            let before = tree_edges.len();
            tree_edges.retain(|&(a, b)| {
                !(degree[&a] == 1 && !terminal_set.contains(&a))
                    && !(degree[&b] == 1 && !terminal_set.contains(&b))
            });
            if tree_edges.len() == before {
                break;
            }
        }
        Ok(SteinerTree::new(terminals.to_vec(), tree_edges, self))
    }
}

/// A tree of network edges spanning a terminal set.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinerTree {
    pub terminals: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    adj: BTreeMap<usize, Vec<usize>>,
}

impl SteinerTree {
    fn new(terminals: Vec<usize>, edges: Vec<(usize, usize)>, net: &Network) -> Self {
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &t in &terminals {
            adj.entry(t).or_default();
        }
        for &(a, b) in &edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        for l in adj.values_mut() {
            l.sort_by(|&x, &y| net.names[x].cmp(&net.names[y]));
        }
        SteinerTree { terminals, edges, adj }
    }

    /// Number of ebits needed to activate the whole tree (its edge count).
    pub fn cost(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.adj.keys().copied()
    }

    pub fn contains(&self, m: usize) -> bool {
        self.adj.contains_key(&m)
    }

    /// Shortest path inside the tree from the nearest vertex of `from` to
    /// `target`; returns the vertex sequence starting inside `from`.
    /// BFS from `target` stops at the first `from` vertex (nearest-first).
    pub fn path_from_set(&self, from: &BTreeSet<usize>, target: usize) -> Result<Vec<usize>> {
        if from.contains(&target) {
            return Ok(vec![target]);
        }
        if !self.adj.contains_key(&target) {
            return Err(Error::UnknownVertex(format!("module {target} not in tree")));
        }
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        let mut seen: BTreeSet<usize> = BTreeSet::from([target]);
        let mut q = VecDeque::from([target]);
        while let Some(v) = q.pop_front() {
            if from.contains(&v) {
                let mut path = vec![v];
                let mut cur = v;
                while cur != target {
                    cur = parent[&cur];
                    path.push(cur);
                }
                return Ok(path);
            }
            for &w in &self.adj[&v] {
                if seen.insert(w) {
                    parent.insert(w, v);
                    q.push_back(w);
                }
            }
        }
        Err(Error::Infeasible(format!("no tree path reaches module {target}")))
    }
}

// --- serialization ---------------------------------------------------------

impl Serialize for Network {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let decl = NetworkDecl {
            modules: (0..self.names.len())
                .map(|i| ModuleDecl {
                    name: self.names[i].clone(),
                    comp: self.comp[i],
                    link: self.link[i],
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (self.names[a].clone(), self.names[b].clone()))
                .collect(),
        };
        decl.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let decl = NetworkDecl::deserialize(d)?;
        Network::new(
            decl.modules.into_iter().map(|m| (m.name, m.comp, m.link)).collect(),
            decl.edges,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl Network {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

// --- generators -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    Homogeneous,
    Unstructured,
    ScaleFree,
    SmallWorld,
}

impl std::str::FromStr for NetworkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(NetworkKind::Homogeneous),
            "unstructured" => Ok(NetworkKind::Unstructured),
            "scale-free" | "scale_free" => Ok(NetworkKind::ScaleFree),
            "small-world" | "small_world" => Ok(NetworkKind::SmallWorld),
            other => Err(Error::InvalidParams(format!("unknown network kind {other}"))),
        }
    }
}

fn module_names(n: usize) -> Vec<String> {
    let width = (n.max(2) - 1).to_string().len();
    (0..n).map(|i| format!("m{i:0width$}")).collect()
}

/// Generate a random network. Homogeneous networks are fully connected with
/// the qubits split evenly and unbounded link capacity. The heterogeneous
/// kinds are tuned to average degree 2, assign qubits to modules at random
/// (each module keeps at least one) and bound every link register by the
/// largest integer strictly smaller than the average qubits per module.
pub fn gen_network(
    kind: NetworkKind,
    n_modules: usize,
    total_qubits: usize,
    seed: u64,
) -> Result<Network> {
    if n_modules < 2 {
        return Err(Error::InvalidParams("need at least 2 modules".into()));
    }
    if total_qubits < n_modules {
        return Err(Error::InvalidParams(
            "need at least one qubit per module".into(),
        ));
    }
    let names = module_names(n_modules);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if kind == NetworkKind::Homogeneous {
        let per = total_qubits / n_modules;
        let extra = total_qubits % n_modules;
        let modules: Vec<(String, u32, Option<u32>)> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), (per + usize::from(i < extra)) as u32, None))
            .collect();
        let mut edges = Vec::new();
        for i in 0..n_modules {
            for j in i + 1..n_modules {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
        return Network::new(modules, edges);
    }

    // random qubit assignment, each module keeps at least one
    let mut comp = vec![1u32; n_modules];
    for _ in 0..(total_qubits - n_modules) {
        comp[rng.gen_range(0..n_modules)] += 1;
    }
    let avg = total_qubits as f64 / n_modules as f64;
    let eps = if avg.fract() == 0.0 { avg as u32 - 1 } else { avg.floor() as u32 };
    let eps = eps.max(1);

    let edges = loop {
        let candidate: BTreeSet<(usize, usize)> = match kind {
            NetworkKind::Homogeneous => unreachable!(),
            NetworkKind::Unstructured => {
                // Erdos-Renyi at p = 2/(n-1) (average degree 2)
                let p = 2.0 / (n_modules as f64 - 1.0);
                let mut e = BTreeSet::new();
                for i in 0..n_modules {
                    for j in i + 1..n_modules {
                        if rng.gen::<f64>() < p.min(1.0) {
                            e.insert((i, j));
                        }
                    }
                }
                e
            }
            NetworkKind::ScaleFree => {
                // Barabasi-Albert, m=1 with one m=2 arrival so |E| = n
                let mut e = BTreeSet::new();
                let mut endpoints: Vec<usize> = vec![0, 1];
                e.insert((0, 1));
                let double = if n_modules > 2 { rng.gen_range(2..n_modules) } else { 0 };
                for v in 2..n_modules {
                    let m = if v == double { 2usize.min(v) } else { 1 };
                    let mut chosen = BTreeSet::new();
                    while chosen.len() < m {
                        let t = endpoints[rng.gen_range(0..endpoints.len())];
                        if t != v {
                            chosen.insert(t);
                        }
                    }
                    for t in chosen {
                        e.insert((t.min(v), t.max(v)));
                        endpoints.push(t);
                        endpoints.push(v);
                    }
                }
                e
            }
            NetworkKind::SmallWorld => {
                // Watts-Strogatz ring of degree 2, rewiring probability 0.25
                let mut e = BTreeSet::new();
                for i in 0..n_modules {
                    let j = (i + 1) % n_modules;
                    let (mut a, mut b) = (i.min(j), i.max(j));
                    if rng.gen::<f64>() < 0.25 {
                        for _ in 0..16 {
                            let c = rng.gen_range(0..n_modules);
                            if c != a && c != b && !e.contains(&(a.min(c), a.max(c))) {
                                b = a.max(c);
                                a = a.min(c);
                                break;
                            }
                        }
                    }
                    e.insert((a, b));
                }
                e
            }
        };
        let net = Network::new(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), comp[i], Some(eps)))
                .collect(),
            candidate
                .iter()
                .map(|&(a, b)| (names[a].clone(), names[b].clone()))
                .collect(),
        )?;
        if net.is_connected() {
            break net;
        }
    };
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Network {
        let names: Vec<String> = (0..n).map(|i| format!("{}", (b'A' + i as u8) as char)).collect();
        Network::new(
            names.iter().map(|n| (n.clone(), 2, None)).collect(),
            names.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect(),
        )
        .unwrap()
    }

    /// Exhaustive minimum Steiner tree by searching all edge subsets.
    fn steiner_optimal(net: &Network, terminals: &[usize]) -> usize {
        let edges: Vec<(usize, usize)> = net.edges().collect();
        let terms: BTreeSet<usize> = terminals.iter().copied().collect();
        if terms.len() <= 1 {
            return 0;
        }
        let mut best = usize::MAX;
        for mask in 0u32..(1 << edges.len()) {
            let count = mask.count_ones() as usize;
            if count >= best {
                continue;
            }
            let chosen: Vec<(usize, usize)> =
                edges.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &(a, b) in &chosen {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
            let start = *terms.iter().next().unwrap();
            let mut seen = BTreeSet::from([start]);
            let mut q = VecDeque::from([start]);
            while let Some(v) = q.pop_front() {
                for &w in adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                    if seen.insert(w) {
                        q.push_back(w);
                    }
                }
            }
            if terms.is_subset(&seen) {
                best = count;
            }
        }
        best
    }

    #[test]
    fn two_terminals_is_shortest_path() {
        let net = line(5);
        let t = net.steiner_tree(&[0, 4]).unwrap();
        assert_eq!(t.cost(), 4);
        let t = net.steiner_tree(&[1, 3]).unwrap();
        assert_eq!(t.cost(), 2);
    }

    #[test]
    fn single_edge_terminals_exact() {
        let net = line(3);
        assert_eq!(net.steiner_tree(&[0, 1]).unwrap().cost(), 1);
        assert_eq!(net.steiner_tree(&[2]).unwrap().cost(), 0);
    }

    #[test]
    fn t_network_center_is_steiner_point() {
        // A, B, C all attached to hub D: spanning {A,B,C} costs 3 via D.
        let net = Network::new(
            vec![
                ("A".into(), 1, None),
                ("B".into(), 1, None),
                ("C".into(), 1, None),
                ("D".into(), 1, None),
            ],
            vec![("A".into(), "D".into()), ("B".into(), "D".into()), ("C".into(), "D".into())],
        )
        .unwrap();
        let t = net.steiner_tree(&[0, 1, 2]).unwrap();
        assert_eq!(t.cost(), 3);
        assert!(t.contains(3));
    }

    #[test]
    fn steiner_within_factor_two_of_optimal() {
        for seed in 0..30u64 {
            let net = gen_network(NetworkKind::Unstructured, 6, 12, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let k = rng.gen_range(2..=4);
            let mut terms: Vec<usize> = (0..6).collect();
            terms.shuffle(&mut rng);
            terms.truncate(k);
            let approx = net.steiner_tree(&terms).unwrap().cost();
            let best = steiner_optimal(&net, &terms);
            assert!(approx >= best, "approximation beat the optimum");
            let leaves = terms.len().max(2);
            let bound = (2.0 - 2.0 / leaves as f64) * best as f64 + 1e-9;
            assert!(
                (approx as f64) <= bound,
                "seed {seed}: approx {approx} > 2x bound of optimal {best}"
            );
        }
    }

    #[test]
    fn steiner_deterministic_and_cached() {
        let net = gen_network(NetworkKind::SmallWorld, 7, 14, 3).unwrap();
        let a = net.steiner_tree(&[0, 3, 5]).unwrap();
        let b = net.steiner_tree(&[5, 0, 3]).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let fresh = net.clone();
        let c = fresh.steiner_tree(&[0, 3, 5]).unwrap();
        assert_eq!(a.edges, c.edges);
    }

    #[test]
    fn tree_path_from_set_is_nearest_first() {
        let net = line(5); // A-B-C-D-E
        let t = net.steiner_tree(&[0, 4]).unwrap();
        let path = t.path_from_set(&BTreeSet::from([0, 1]), 3).unwrap();
        assert_eq!(path, vec![1, 2, 3]);
        let path = t.path_from_set(&BTreeSet::from([2]), 2).unwrap();
        assert_eq!(path, vec![2]);
    }

    #[test]
    fn homogeneous_network_shape() {
        let net = gen_network(NetworkKind::Homogeneous, 4, 32, 0).unwrap();
        assert_eq!(net.module_count(), 4);
        for m in 0..4 {
            assert_eq!(net.comp_capacity(m), 8);
            assert_eq!(net.link_capacity(m), None);
        }
        assert_eq!(net.edges().count(), 6); // complete graph K4
    }

    #[test]
    fn heterogeneous_networks_connected_and_bounded() {
        for kind in [NetworkKind::Unstructured, NetworkKind::ScaleFree, NetworkKind::SmallWorld] {
            for seed in 0..10u64 {
                let net = gen_network(kind, 5, 20, seed).unwrap();
                assert!(net.is_connected());
                let total: u64 = (0..5).map(|m| net.comp_capacity(m) as u64).sum();
                assert_eq!(total, 20);
                for m in 0..5 {
                    assert!(net.comp_capacity(m) >= 1);
                    assert_eq!(net.link_capacity(m), Some(3)); // 20/5 = 4, largest int < 4
                }
            }
        }
    }

    #[test]
    fn scale_free_average_degree_two() {
        for seed in 0..10u64 {
            let net = gen_network(NetworkKind::ScaleFree, 8, 16, seed).unwrap();
            assert_eq!(net.edges().count(), 8); // |E| = n gives average degree 2
        }
    }

    #[test]
    fn generators_deterministic() {
        for kind in [NetworkKind::Unstructured, NetworkKind::ScaleFree, NetworkKind::SmallWorld] {
            let a = gen_network(kind, 6, 18, 42).unwrap();
            let b = gen_network(kind, 6, 18, 42).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn network_json_round_trip() {
        let net = Network::new(
            vec![("A".into(), 4, Some(3)), ("B".into(), 4, None)],
            vec![("A".into(), "B".into())],
        )
        .unwrap();
        let s = net.to_json();
        let back = Network::from_json(&s).unwrap();
        assert_eq!(net, back);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["modules"][0]["name"], "A");
        assert_eq!(v["modules"][0]["comp"], 4);
        assert_eq!(v["modules"][0]["link"], 3);
        assert_eq!(v["modules"][1]["link"], serde_json::Value::Null);
        assert_eq!(v["edges"][0][0], "A");
    }

    #[test]
    fn unknown_module_in_edge() {
        let r = Network::new(vec![("A".into(), 1, None)], vec![("A".into(), "Z".into())]);
        assert!(matches!(r, Err(Error::UnknownModule(_))));
    }
}
