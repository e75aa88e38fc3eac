//! Causal relation oracle: a dependency graph over the activities of a
//! unique start/end log, repaired so that every activity sits on a path
//! from the start activity to the end activity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::event_log::{Activity, Alphabet, EventLog, UseLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausalError {
    #[error("threshold {0} outside [0,1]")]
    Threshold(f64),
    #[error("cannot connect activity {0}: it has no directly-follows contact with the connected part")]
    Unrepairable(Activity),
}

pub type DirectlyFollows = BTreeMap<(Activity, Activity), u64>;

/// Counts adjacent pairs, weighted by trace multiplicity.
pub fn directly_follows(log: &EventLog) -> DirectlyFollows {
    let mut df = DirectlyFollows::new();
    for (t, n) in log.traces() {
        for w in t.activities().windows(2) {
            *df.entry((w[0].clone(), w[1].clone())).or_insert(0) += n;
        }
    }
    df
}

fn df_count(df: &DirectlyFollows, a: &Activity, b: &Activity) -> u64 {
    df.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
}

/// Heuristics-miner dependency measure `(|a>b| - |b>a|) / (|a>b| + |b>a| + 1)`.
pub fn dependency(a: &Activity, b: &Activity, df: &DirectlyFollows) -> f64 {
    dependency_from_counts(df_count(df, a, b), df_count(df, b, a))
}

pub fn dependency_from_counts(ab: u64, ba: u64) -> f64 {
    (ab as f64 - ba as f64) / (ab as f64 + ba as f64 + 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalGraph {
    vertices: Alphabet,
    start: Activity,
    end: Activity,
    arcs: BTreeMap<(Activity, Activity), f64>,
    df: DirectlyFollows,
}

impl CausalGraph {
    /// Builds a graph from explicit parts. Arcs into `start` or out of
    /// `end` are dropped.
    pub fn from_parts(
        vertices: Alphabet,
        start: Activity,
        end: Activity,
        arcs: impl IntoIterator<Item = ((Activity, Activity), f64)>,
        df: DirectlyFollows,
    ) -> Self {
        let arcs = arcs
            .into_iter()
            .filter(|((a, b), _)| *b != start && *a != end)
            .collect();
        CausalGraph {
            vertices,
            start,
            end,
            arcs,
            df,
        }
    }

    pub fn vertices(&self) -> &Alphabet {
        &self.vertices
    }

    pub fn start(&self) -> &Activity {
        &self.start
    }

    pub fn end(&self) -> &Activity {
        &self.end
    }

    /// Arcs in sorted order.
    pub fn arcs(&self) -> impl Iterator<Item = (&Activity, &Activity)> + '_ {
        self.arcs.keys().map(|(a, b)| (a, b))
    }

    pub fn weight(&self, a: &Activity, b: &Activity) -> Option<f64> {
        self.arcs.get(&(a.clone(), b.clone())).copied()
    }

    pub fn contains_arc(&self, a: &Activity, b: &Activity) -> bool {
        self.arcs.contains_key(&(a.clone(), b.clone()))
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn directly_follows(&self) -> &DirectlyFollows {
        &self.df
    }

    fn successors(&self) -> BTreeMap<&Activity, Vec<&Activity>> {
        let mut succ: BTreeMap<&Activity, Vec<&Activity>> = BTreeMap::new();
        for (a, b) in self.arcs.keys() {
            succ.entry(a).or_default().push(b);
        }
        succ
    }

    fn predecessors(&self) -> BTreeMap<&Activity, Vec<&Activity>> {
        let mut pred: BTreeMap<&Activity, Vec<&Activity>> = BTreeMap::new();
        for (a, b) in self.arcs.keys() {
            pred.entry(b).or_default().push(a);
        }
        pred
    }

    fn reachable_from<'a>(
        &'a self,
        root: &'a Activity,
        adj: &BTreeMap<&'a Activity, Vec<&'a Activity>>,
    ) -> BTreeSet<&'a Activity> {
        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &w in adj.get(v).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal {\n  rankdir=LR;\n");
        for v in self.vertices.iter() {
            let _ = writeln!(out, "  \"{}\";", escape(v.name()));
        }
        for ((a, b), w) in &self.arcs {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.3}\"];",
                escape(a.name()),
                escape(b.name()),
                w
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Arcs `(a,b)` with observed `a>b` contact and dependency at least
/// `threshold`, excluding arcs into the start or out of the end activity.
pub fn build_causal_graph(log: &UseLog, threshold: f64) -> Result<CausalGraph, CausalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CausalError::Threshold(threshold));
    }
    let df = directly_follows(log.log());
    let arcs: Vec<_> = df
        .keys()
        .filter_map(|(a, b)| {
            let d = dependency(a, b, &df);
            (d >= threshold).then(|| ((a.clone(), b.clone()), d))
        })
        .collect();
    Ok(CausalGraph::from_parts(
        log.alphabet(),
        log.start().clone(),
        log.end().clone(),
        arcs,
        df,
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathReport {
    /// Vertices not reachable from the start activity.
    pub unreachable: Vec<Activity>,
    /// Vertices from which the end activity is not reachable.
    pub dead_ends: Vec<Activity>,
    /// Arcs into the start or out of the end activity.
    pub invalid_arcs: Vec<(Activity, Activity)>,
}

impl PathReport {
    pub fn is_ok(&self) -> bool {
        self.unreachable.is_empty() && self.dead_ends.is_empty() && self.invalid_arcs.is_empty()
    }
}

/// Checks that every vertex lies on a start-to-end path and that neither
/// the start nor the end activity lies on a cycle.
pub fn validate_path_property(g: &CausalGraph) -> PathReport {
    let mut report = PathReport::default();
    for (a, b) in g.arcs.keys() {
        if *b == g.start || *a == g.end {
            report.invalid_arcs.push((a.clone(), b.clone()));
        }
    }
    let succ = g.successors();
    let pred = g.predecessors();
    let fwd = g.reachable_from(&g.start, &succ);
    let bwd = g.reachable_from(&g.end, &pred);
    for v in g.vertices.iter() {
        if !fwd.contains(v) {
            report.unreachable.push(v.clone());
        }
        if !bwd.contains(v) {
            report.dead_ends.push(v.clone());
        }
    }
    report
}

/// Greedily attaches disconnected vertices by their strongest observed
/// directly-follows arcs until the path property holds. Never removes arcs.
pub fn repair_for_path_property(g: &CausalGraph) -> Result<CausalGraph, CausalError> {
    let mut g = g.clone();
    loop {
        let report = validate_path_property(&g);
        if report.is_ok() {
            return Ok(g);
        }
        if let Some(first) = report.unreachable.first() {
            let reach: BTreeSet<Activity> =
                g.vertices.iter().filter(|v| !report.unreachable.contains(v)).cloned().collect();
            let candidates = g.df.iter().filter(|((a, b), &n)| {
                n > 0 && reach.contains(a) && !reach.contains(b) && *a != g.end && *b != g.start
            });
            let arc = best_arc(&g, candidates.map(|(k, _)| k));
            match arc {
                Some(arc) => {
                    let w = dependency(&arc.0, &arc.1, &g.df);
                    g.arcs.insert(arc, w);
                }
                None => return Err(CausalError::Unrepairable(first.clone())),
            }
            continue;
        }
        if let Some(first) = report.dead_ends.first() {
            let coreach: BTreeSet<Activity> =
                g.vertices.iter().filter(|v| !report.dead_ends.contains(v)).cloned().collect();
            let candidates = g.df.iter().filter(|((a, b), &n)| {
                n > 0 && !coreach.contains(a) && coreach.contains(b) && *a != g.end && *b != g.start
            });
            let arc = best_arc(&g, candidates.map(|(k, _)| k));
            match arc {
                Some(arc) => {
                    let w = dependency(&arc.0, &arc.1, &g.df);
                    g.arcs.insert(arc, w);
                }
                None => return Err(CausalError::Unrepairable(first.clone())),
            }
            continue;
        }
        // only invalid arcs remain; they cannot be repaired by adding arcs
        let (a, b) = report.invalid_arcs[0].clone();
        return Err(CausalError::Unrepairable(if a == g.end { a } else { b }));
    }
}

/// Maximum dependency, ties broken by (target, source) name order.
fn best_arc<'a>(
    g: &CausalGraph,
    candidates: impl Iterator<Item = &'a (Activity, Activity)>,
) -> Option<(Activity, Activity)> {
    let mut best: Option<(f64, &(Activity, Activity))> = None;
    for arc in candidates {
        let w = dependency(&arc.0, &arc.1, &g.df);
        best = match best {
            None => Some((w, arc)),
            Some((bw, barc)) => {
                let better = w > bw || (w == bw && (&arc.1, &arc.0) < (&barc.1, &barc.0));
                if better {
                    Some((w, arc))
                } else {
                    Some((bw, barc))
                }
            }
        };
    }
    best.map(|(_, arc)| arc.clone())
}

/// Builds and repairs the causal graph in one step.
pub fn causal_oracle(log: &UseLog, threshold: f64) -> Result<CausalGraph, CausalError> {
    repair_for_path_property(&build_causal_graph(log, threshold)?)
}
