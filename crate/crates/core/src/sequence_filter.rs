//! Sequence-encoding graph and breadth-first frequency filtering.
//!
//! Vertices are the distinct encodings of the closure members; an arc
//! joins the encoding of a prefix to the encoding of each of its one-step
//! extensions. The weight `ψ` of an arc counts how often the closure
//! passes along it: every member `σ` credits its frequency to the arc
//! from the encoding of its parent.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::event_log::{PrefixClosure, Trace};
use crate::region::{sequence_encoding, EncodingVector};

pub type VertexId = usize;

#[derive(Clone, Debug)]
pub struct SequenceEncodingGraph {
    vertices: Vec<EncodingVector>,
    index: HashMap<EncodingVector, VertexId>,
    /// Closure members per vertex, shortest first.
    members: Vec<Vec<(Trace, u64)>>,
    psi: BTreeMap<(VertexId, VertexId), u64>,
    children: Vec<Vec<VertexId>>,
    parents: Vec<Vec<VertexId>>,
    shorthands: Vec<String>,
}

impl SequenceEncodingGraph {
    pub fn build(pc: &PrefixClosure) -> Self {
        let alphabet = pc.alphabet();
        let mut ordered: Vec<(&Trace, u64)> = pc.entries().collect();
        ordered.sort_by(|a, b| (a.0.len(), a.0).cmp(&(b.0.len(), b.0)));

        let mut g = SequenceEncodingGraph {
            vertices: Vec::new(),
            index: HashMap::new(),
            members: Vec::new(),
            psi: BTreeMap::new(),
            children: Vec::new(),
            parents: Vec::new(),
            shorthands: Vec::new(),
        };
        for (sigma, freq) in ordered {
            let v = sequence_encoding(sigma, alphabet).expect("closure over its alphabet");
            let id = match g.index.get(&v) {
                Some(&id) => id,
                None => {
                    let id = g.vertices.len();
                    g.shorthands.push(v.shorthand(alphabet));
                    g.index.insert(v.clone(), id);
                    g.vertices.push(v);
                    g.members.push(Vec::new());
                    g.children.push(Vec::new());
                    g.parents.push(Vec::new());
                    id
                }
            };
            g.members[id].push((sigma.clone(), freq));
            if let Some(parent) = sigma.parent() {
                let pv = sequence_encoding(&parent, alphabet).expect("closure over its alphabet");
                let pid = g.index[&pv];
                let w = g.psi.entry((pid, id)).or_insert(0);
                if *w == 0 {
                    g.children[pid].push(id);
                    g.parents[id].push(pid);
                }
                *w += freq;
            }
        }
        for c in g.children.iter_mut().chain(g.parents.iter_mut()) {
            c.sort_unstable();
        }
        debug_assert!(g.topological_order().is_some());
        g
    }

    /// The encoding of the empty sequence.
    pub fn root(&self) -> VertexId {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn arc_count(&self) -> usize {
        self.psi.len()
    }

    pub fn encoding(&self, v: VertexId) -> &EncodingVector {
        &self.vertices[v]
    }

    pub fn vertex_of(&self, encoding: &EncodingVector) -> Option<VertexId> {
        self.index.get(encoding).copied()
    }

    /// Vertex by its `([bag],a)` shorthand.
    pub fn find(&self, shorthand: &str) -> Option<VertexId> {
        self.shorthands.iter().position(|s| s == shorthand)
    }

    pub fn shorthand(&self, v: VertexId) -> &str {
        &self.shorthands[v]
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v]
    }

    pub fn parents(&self, v: VertexId) -> &[VertexId] {
        &self.parents[v]
    }

    pub fn psi(&self, from: VertexId, to: VertexId) -> Option<u64> {
        self.psi.get(&(from, to)).copied()
    }

    pub fn arcs(&self) -> impl Iterator<Item = ((VertexId, VertexId), u64)> + '_ {
        self.psi.iter().map(|(&k, &w)| (k, w))
    }

    pub fn members(&self, v: VertexId) -> &[(Trace, u64)] {
        &self.members[v]
    }

    /// Summed closure frequency of the members of `v`.
    pub fn frequency(&self, v: VertexId) -> u64 {
        self.members[v].iter().map(|(_, f)| f).sum()
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<VertexId>> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<VertexId> = (0..self.vertices.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }

    /// Graphviz rendering with ψ labels. Vertices outside `retained`
    /// (other than the root) are dashed, arcs into them dotted.
    pub fn to_dot(&self, retained: Option<&BTreeSet<VertexId>>) -> String {
        let pruned = |v: VertexId| v != self.root() && retained.is_some_and(|c| !c.contains(&v));
        let mut out = String::from("digraph seg {\n  node [shape=circle, fixedsize=false];\n");
        for v in 0..self.vertices.len() {
            let style = if pruned(v) { ", style=dashed" } else { "" };
            let _ = writeln!(
                out,
                "  v{v} [label=\"{}\"{style}];",
                self.shorthands[v].replace('"', "\\\"")
            );
        }
        for (&(a, b), w) in &self.psi {
            let style = if pruned(b) { ", style=dotted" } else { "" };
            let _ = writeln!(out, "  v{a} -> v{b} [label=\"{w}\"{style}];");
        }
        out.push_str("}\n");
        out
    }

    /// One line per closure member, shortest first: trace, encoding,
    /// shorthand and closure frequency, tab separated.
    pub fn encoding_table(&self) -> String {
        let mut rows: Vec<(&Trace, VertexId, u64)> = Vec::new();
        for v in 0..self.vertices.len() {
            for (t, f) in &self.members[v] {
                rows.push((t, v, *f));
            }
        }
        rows.sort_by(|a, b| (a.0.len(), a.0).cmp(&(b.0.len(), b.0)));
        let mut out = String::from("sequence\tencoding\tshorthand\tfrequency\n");
        for (t, v, f) in rows {
            let _ = writeln!(out, "{t}\t{}\t{}\t{f}", self.vertices[v], self.shorthands[v]);
        }
        out
    }
}

/// Chooses which children of a vertex survive.
pub trait SequenceFilter {
    fn select(&self, g: &SequenceEncodingGraph, v: VertexId) -> Vec<VertexId>;
}

/// Keeps the children whose arc weight is at least `(1 - alpha)` times
/// the heaviest outgoing arc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaMax {
    alpha: f64,
}

impl KappaMax {
    pub fn new(alpha: f64) -> Option<Self> {
        (0.0..=1.0).contains(&alpha).then_some(KappaMax { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl SequenceFilter for KappaMax {
    fn select(&self, g: &SequenceEncodingGraph, v: VertexId) -> Vec<VertexId> {
        let weights: Vec<(VertexId, u64)> = g
            .children(v)
            .iter()
            .map(|&c| (c, g.psi(v, c).expect("child arc")))
            .collect();
        let Some(max) = weights.iter().map(|&(_, w)| w).max() else {
            return Vec::new();
        };
        let threshold = (1.0 - self.alpha) * max as f64;
        weights
            .into_iter()
            .filter(|&(_, w)| w as f64 >= threshold)
            .map(|(c, _)| c)
            .collect()
    }
}

impl<F> SequenceFilter for F
where
    F: Fn(&SequenceEncodingGraph, VertexId) -> Vec<VertexId>,
{
    fn select(&self, g: &SequenceEncodingGraph, v: VertexId) -> Vec<VertexId> {
        self(g, v)
    }
}

/// Breadth-first traversal from the root collecting every selected
/// child. The root itself is never part of the result. A vertex is
/// enqueued at most once.
pub fn sef_bfs(g: &SequenceEncodingGraph, filter: &dyn SequenceFilter) -> BTreeSet<VertexId> {
    let mut retained = BTreeSet::new();
    let mut enqueued = vec![false; g.vertex_count()];
    let mut queue = VecDeque::from([g.root()]);
    enqueued[g.root()] = true;
    while let Some(v) = queue.pop_front() {
        for c in filter.select(g, v) {
            retained.insert(c);
            if !enqueued[c] {
                enqueued[c] = true;
                queue.push_back(c);
            }
        }
    }
    retained
}

/// Encodings of the retained vertices, ready for constraint building.
pub fn retained_encodings(g: &SequenceEncodingGraph, retained: &BTreeSet<VertexId>) -> BTreeSet<EncodingVector> {
    retained.iter().map(|&v| g.encoding(v).clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{parse_trace_log, use_transform};

    const L1: &str = "10;a b d e g\n12;a c d e f d b e g\n9;a d c e h\n11;a b d e f c d e g\n13;a d c e f b d e h";

    fn noisy_graph() -> SequenceEncodingGraph {
        let u = use_transform(&parse_trace_log(&format!("{L1}\n1;a b c d e g")).unwrap()).unwrap();
        SequenceEncodingGraph::build(&u.prefix_closure())
    }

    fn v(g: &SequenceEncodingGraph, s: &str) -> VertexId {
        g.find(&s.replace('S', "__start__"))
            .unwrap_or_else(|| panic!("no vertex {s}"))
    }

    #[test]
    fn single_trace_is_a_path() {
        let u = use_transform(&parse_trace_log("a").unwrap()).unwrap();
        let g = SequenceEncodingGraph::build(&u.prefix_closure());
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.arc_count(), 3);
        assert!(g.arcs().all(|(_, w)| w == 1));
    }

    #[test]
    fn kappa_keeps_heavy_child() {
        let g = noisy_graph();
        let ab = v(&g, "([S,a],b)");
        let keep = KappaMax::new(0.75).unwrap().select(&g, ab);
        assert_eq!(keep, vec![v(&g, "([S,a,b],d)")]);

        let all = KappaMax::new(1.0).unwrap().select(&g, ab);
        assert_eq!(all.len(), 2);
        let top = KappaMax::new(0.0).unwrap().select(&g, ab);
        assert_eq!(top, vec![v(&g, "([S,a,b],d)")]);
        assert!(KappaMax::new(1.2).is_none());
    }

    #[test]
    fn kappa_zero_keeps_all_maxima() {
        let g = noisy_graph();
        let sa = v(&g, "([S],a)");
        // children weights 22, 12, 22
        assert_eq!(KappaMax::new(0.0).unwrap().select(&g, sa).len(), 2);
    }

    #[test]
    fn childless_vertex() {
        let g = noisy_graph();
        let leaf = v(&g, "([S,a,c,d,e,h],__end__)");
        assert!(KappaMax::new(0.5).unwrap().select(&g, leaf).is_empty());
    }

    #[test]
    fn bfs_with_trivial_filters() {
        let g = noisy_graph();
        let everything = sef_bfs(&g, &|g: &SequenceEncodingGraph, v| g.children(v).to_vec());
        assert_eq!(everything.len(), g.vertex_count() - 1);
        assert!(!everything.contains(&g.root()));
        let nothing = sef_bfs(&g, &|_: &SequenceEncodingGraph, _| Vec::new());
        assert!(nothing.is_empty());
    }

    #[test]
    fn dot_marks_pruned() {
        let g = noisy_graph();
        let kept = sef_bfs(&g, &KappaMax::new(0.75).unwrap());
        let dot = g.to_dot(Some(&kept));
        assert_eq!(dot.matches("style=dashed").count(), 5);
        assert_eq!(dot.matches("style=dotted").count(), 5);
    }
}
