//! K minimum-delay simple paths over the physical graph (Yen's algorithm on top of Dijkstra).

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use crate::model::{PhysicalGraph, Vertex};

#[derive(Debug, Clone, PartialEq)]
pub struct PhysPath {
    pub links: Vec<usize>,
    pub delay: f64,
}

impl PhysPath {
    fn key(&self) -> (OrdF64, &[usize]) {
        (OrdF64(self.delay), &self.links)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(PartialEq, Eq)]
struct Entry {
    dist: OrdF64,
    hops: usize,
    vertex: Vertex,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, hops, vertex)
        other
            .dist
            .cmp(&self.dist)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Locations may only appear as the first vertex of a path.
fn transit_ok(v: Vertex, target: Vertex) -> bool {
    v == target || matches!(v, Vertex::Node(_))
}

fn dijkstra(
    g: &PhysicalGraph,
    source: Vertex,
    target: Vertex,
    banned_links: &HashSet<usize>,
    banned_vertices: &HashSet<Vertex>,
) -> Option<PhysPath> {
    let mut dist: HashMap<Vertex, (f64, usize)> = HashMap::new();
    let mut prev: HashMap<Vertex, usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(source, (0.0, 0));
    heap.push(Entry {
        dist: OrdF64(0.0),
        hops: 0,
        vertex: source,
    });
    while let Some(Entry {
        dist: OrdF64(d),
        hops,
        vertex,
    }) = heap.pop()
    {
        if dist
            .get(&vertex)
            .map(|&(bd, bh)| (d, hops) > (bd, bh))
            .unwrap_or(false)
        {
            continue;
        }
        if vertex == target {
            break;
        }
        for &li in g.out_links(vertex) {
            if banned_links.contains(&li) {
                continue;
            }
            let link = &g.links[li];
            let next = link.to;
            if banned_vertices.contains(&next) || next == source || !transit_ok(next, target) {
                continue;
            }
            let cand = (d + link.delay, hops + 1);
            let better = match dist.get(&next) {
                None => true,
                Some(&cur) => {
                    cand < cur || (cand == cur && prev.get(&next).map(|&p| li < p).unwrap_or(true))
                }
            };
            if better {
                dist.insert(next, cand);
                prev.insert(next, li);
                heap.push(Entry {
                    dist: OrdF64(cand.0),
                    hops: cand.1,
                    vertex: next,
                });
            }
        }
    }
    dist.get(&target)?;
    let mut links = Vec::new();
    let mut cur = target;
    while cur != source {
        let li = prev[&cur];
        links.push(li);
        cur = g.links[li].from;
    }
    links.reverse();
    let delay = links.iter().map(|&l| g.links[l].delay).sum();
    Some(PhysPath { links, delay })
}

/// Up to `k` loop-free paths from `source` to `target` in ascending delay order. Ties are
/// broken by hop count, then by link indices. Locations are never used as transit vertices.
pub fn k_shortest_paths(
    g: &PhysicalGraph,
    source: Vertex,
    target: Vertex,
    k: usize,
) -> Vec<PhysPath> {
    if source == target || k == 0 {
        return Vec::new();
    }
    let Some(first) = dijkstra(g, source, target, &HashSet::new(), &HashSet::new()) else {
        return Vec::new();
    };
    let mut found = vec![first];
    let mut pool: BTreeSet<(OrdF64, usize, Vec<usize>)> = BTreeSet::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(found[0].links.clone());

    while found.len() < k {
        let last = found.last().cloned().expect("non-empty");
        for spur_idx in 0..last.links.len() {
            let root = &last.links[..spur_idx];
            let spur_vertex = if spur_idx == 0 {
                source
            } else {
                g.links[root[spur_idx - 1]].to
            };
            let mut banned_links = HashSet::new();
            for p in &found {
                if p.links.len() > spur_idx && p.links[..spur_idx] == *root {
                    banned_links.insert(p.links[spur_idx]);
                }
            }
            let mut banned_vertices: HashSet<Vertex> = HashSet::new();
            banned_vertices.insert(source);
            for &l in root {
                banned_vertices.insert(g.links[l].to);
            }
            banned_vertices.remove(&spur_vertex);
            if let Some(spur) = dijkstra(g, spur_vertex, target, &banned_links, &banned_vertices) {
                let mut links = root.to_vec();
                links.extend(spur.links);
                if seen.insert(links.clone()) {
                    let delay = links.iter().map(|&l| g.links[l].delay).sum();
                    pool.insert((OrdF64(delay), links.len(), links));
                }
            }
        }
        let Some(best) = pool.pop_first() else { break };
        found.push(PhysPath {
            delay: best.0 .0,
            links: best.2,
        });
    }
    found.sort_by(|a, b| a.key().cmp(&b.key()));
    found
}

/// Every loop-free path from `source` to `target` with at most `max_hops` links, in
/// lexicographic link order. Used by the exhaustive oracle.
pub fn all_simple_paths(
    g: &PhysicalGraph,
    source: Vertex,
    target: Vertex,
    max_hops: usize,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if source == target {
        return out;
    }
    let mut visited = HashSet::new();
    visited.insert(source);
    let mut stack = Vec::new();
    walk(
        g,
        source,
        target,
        max_hops,
        &mut visited,
        &mut stack,
        &mut out,
    );
    out
}

fn walk(
    g: &PhysicalGraph,
    at: Vertex,
    target: Vertex,
    max_hops: usize,
    visited: &mut HashSet<Vertex>,
    stack: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if stack.len() == max_hops {
        return;
    }
    for &li in g.out_links(at) {
        let next = g.links[li].to;
        if visited.contains(&next) || !transit_ok(next, target) {
            continue;
        }
        stack.push(li);
        if next == target {
            out.push(stack.clone());
        } else {
            visited.insert(next);
            walk(g, next, target, max_hops, visited, stack, out);
            visited.remove(&next);
        }
        stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_scenario;

    fn diamond() -> PhysicalGraph {
        // a -> {b, c} -> d, plus a direct slow a -> d
        let text = r#"
name = "diamond"
[[nodes]]
id = "a"
[[nodes]]
id = "b"
[[nodes]]
id = "c"
[[nodes]]
id = "d"
[[links]]
id = "ab"
from = "a"
to = "b"
delay = 1.0
capacity = 1.0
[[links]]
id = "bd"
from = "b"
to = "d"
delay = 1.0
capacity = 1.0
[[links]]
id = "ac"
from = "a"
to = "c"
delay = 1.0
capacity = 1.0
[[links]]
id = "cd"
from = "c"
to = "d"
delay = 2.0
capacity = 1.0
[[links]]
id = "ad"
from = "a"
to = "d"
delay = 5.0
capacity = 1.0
"#;
        parse_scenario(text).unwrap().graph
    }

    #[test]
    fn yen_returns_paths_in_delay_order() {
        let g = diamond();
        let a = Vertex::Node(g.node_idx(&"a".into()).unwrap());
        let d = Vertex::Node(g.node_idx(&"d".into()).unwrap());
        let paths = k_shortest_paths(&g, a, d, 5);
        let delays: Vec<f64> = paths.iter().map(|p| p.delay).collect();
        assert_eq!(delays, vec![2.0, 3.0, 5.0]);
    }

    #[test]
    fn yen_matches_exhaustive_enumeration() {
        let g = diamond();
        let a = Vertex::Node(g.node_idx(&"a".into()).unwrap());
        let d = Vertex::Node(g.node_idx(&"d".into()).unwrap());
        let mut all: Vec<f64> = all_simple_paths(&g, a, d, 10)
            .iter()
            .map(|p| p.iter().map(|&l| g.links[l].delay).sum())
            .collect();
        all.sort_by(f64::total_cmp);
        let yen: Vec<f64> = k_shortest_paths(&g, a, d, 100)
            .iter()
            .map(|p| p.delay)
            .collect();
        assert_eq!(all, yen);
    }

    #[test]
    fn hop_bound_limits_enumeration() {
        let g = diamond();
        let a = Vertex::Node(g.node_idx(&"a".into()).unwrap());
        let d = Vertex::Node(g.node_idx(&"d".into()).unwrap());
        assert_eq!(all_simple_paths(&g, a, d, 1).len(), 1);
    }
}
