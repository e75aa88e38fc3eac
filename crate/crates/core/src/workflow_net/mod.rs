//! Labelled Petri nets and workflow nets.

mod pnml;
mod state_space;

pub use pnml::{export_dot, export_pnml, import_pnml};
pub use state_space::{explore_state_space, relaxed_soundness_by_state_space, StateSpace, Verdict};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::event_log::{Activity, EventLog, Trace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("transition {0} is not enabled")]
    NotEnabled(String),
    #[error("no transition carries label {0}")]
    UnknownLabel(Activity),
    #[error("label {0} is carried by {1} transitions")]
    AmbiguousLabel(Activity, usize),
    #[error("pnml: {0}")]
    Pnml(String),
    #[error("node index out of range")]
    BadNode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    /// `None` for silent transitions.
    pub label: Option<Activity>,
}

/// A labelled Petri net with unit arc weights.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    preset: Vec<BTreeSet<PlaceId>>,
    postset: Vec<BTreeSet<PlaceId>>,
}

impl PetriNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_place(&mut self, name: impl Into<String>) -> PlaceId {
        self.places.push(name.into());
        PlaceId(self.places.len() - 1)
    }

    pub fn add_transition(&mut self, name: impl Into<String>, label: Option<Activity>) -> TransitionId {
        self.transitions.push(Transition {
            name: name.into(),
            label,
        });
        self.preset.push(BTreeSet::new());
        self.postset.push(BTreeSet::new());
        TransitionId(self.transitions.len() - 1)
    }

    /// Arc from a place into a transition.
    pub fn add_input_arc(&mut self, p: PlaceId, t: TransitionId) {
        self.preset[t.0].insert(p);
    }

    /// Arc from a transition into a place.
    pub fn add_output_arc(&mut self, t: TransitionId, p: PlaceId) {
        self.postset[t.0].insert(p);
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.places[p.0]
    }

    pub fn transition(&self, t: TransitionId) -> &Transition {
        &self.transitions[t.0]
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> {
        (0..self.places.len()).map(PlaceId)
    }

    pub fn transitions(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn preset(&self, t: TransitionId) -> &BTreeSet<PlaceId> {
        &self.preset[t.0]
    }

    pub fn postset(&self, t: TransitionId) -> &BTreeSet<PlaceId> {
        &self.postset[t.0]
    }

    /// Transitions consuming from `p`.
    pub fn place_postset(&self, p: PlaceId) -> BTreeSet<TransitionId> {
        self.transitions().filter(|t| self.preset[t.0].contains(&p)).collect()
    }

    /// Transitions producing into `p`.
    pub fn place_preset(&self, p: PlaceId) -> BTreeSet<TransitionId> {
        self.transitions().filter(|t| self.postset[t.0].contains(&p)).collect()
    }

    pub fn arc_count(&self) -> usize {
        self.preset.iter().chain(&self.postset).map(BTreeSet::len).sum()
    }

    /// Transitions carrying `label`.
    pub fn transitions_with_label(&self, label: &Activity) -> Vec<TransitionId> {
        self.transitions()
            .filter(|t| self.transitions[t.0].label.as_ref() == Some(label))
            .collect()
    }

    pub fn visible_labels(&self) -> BTreeSet<Activity> {
        self.transitions.iter().filter_map(|t| t.label.clone()).collect()
    }

    pub fn enabled(&self, marking: &Marking, t: TransitionId) -> bool {
        self.preset[t.0].iter().all(|p| marking.tokens(*p) > 0)
    }

    pub fn enabled_transitions(&self, marking: &Marking) -> Vec<TransitionId> {
        self.transitions().filter(|&t| self.enabled(marking, t)).collect()
    }

    pub fn fire(&self, marking: &Marking, t: TransitionId) -> Result<Marking, NetError> {
        if !self.enabled(marking, t) {
            return Err(NetError::NotEnabled(self.transitions[t.0].name.clone()));
        }
        let mut next = marking.clone();
        for p in &self.preset[t.0] {
            next.counts[p.0] -= 1;
        }
        for p in &self.postset[t.0] {
            next.counts[p.0] += 1;
        }
        Ok(next)
    }

    /// Label-independent structural form: place names, transition
    /// names and labels, and arcs by name. Equal forms mean isomorphic nets.
    pub fn canonical_form(&self) -> CanonicalNet {
        let mut arcs = BTreeSet::new();
        for t in self.transitions() {
            let tn = self.transitions[t.0].name.clone();
            for p in &self.preset[t.0] {
                arcs.insert((self.places[p.0].clone(), tn.clone()));
            }
            for p in &self.postset[t.0] {
                arcs.insert((tn.clone(), self.places[p.0].clone()));
            }
        }
        CanonicalNet {
            places: self.places.iter().cloned().collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| (t.name.clone(), t.label.as_ref().map(|a| a.name().to_string())))
                .collect(),
            arcs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalNet {
    pub places: BTreeSet<String>,
    pub transitions: BTreeSet<(String, Option<String>)>,
    pub arcs: BTreeSet<(String, String)>,
}

/// Token counts per place.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking {
    counts: Vec<u64>,
}

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking {
            counts: vec![0; places],
        }
    }

    pub fn single(places: usize, p: PlaceId) -> Self {
        let mut m = Self::empty(places);
        m.counts[p.0] = 1;
        m
    }

    pub fn tokens(&self, p: PlaceId) -> u64 {
        self.counts[p.0]
    }

    pub fn add(&mut self, p: PlaceId, n: u64) {
        self.counts[p.0] += n;
    }

    /// Removes up to `n` tokens, returning how many were missing.
    pub fn take(&mut self, p: PlaceId, n: u64) -> u64 {
        let have = self.counts[p.0];
        self.counts[p.0] = have.saturating_sub(n);
        n.saturating_sub(have)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// A Petri net with a designated source and sink place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkflowNet {
    pub net: PetriNet,
    pub source: PlaceId,
    pub sink: PlaceId,
}

impl WorkflowNet {
    pub fn initial_marking(&self) -> Marking {
        Marking::single(self.net.place_count(), self.source)
    }

    pub fn final_marking(&self) -> Marking {
        Marking::single(self.net.place_count(), self.sink)
    }

    /// The unique transition for `label`.
    pub fn transition_for(&self, label: &Activity) -> Result<TransitionId, NetError> {
        match self.net.transitions_with_label(label).as_slice() {
            [t] => Ok(*t),
            [] => Err(NetError::UnknownLabel(label.clone())),
            many => Err(NetError::AmbiguousLabel(label.clone(), many.len())),
        }
    }

    fn silent_enabled(&self, marking: &Marking) -> Vec<TransitionId> {
        self.net
            .transitions()
            .filter(|&t| self.net.transition(t).label.is_none() && self.net.enabled(marking, t))
            .collect()
    }

    /// Fires the transitions of `labels` from `marking`. Before a label
    /// whose transition is not enabled, an enabled silent transition is
    /// fired if that enables it (smallest id first). Returns the index of
    /// the first label that could not fire, if any.
    fn fire_labels(
        &self,
        marking: &mut Marking,
        fired: &mut Vec<TransitionId>,
        labels: &[TransitionId],
    ) -> Result<Option<usize>, NetError> {
        for (i, &t) in labels.iter().enumerate() {
            if !self.net.enabled(marking, t) {
                let helper = self.silent_enabled(marking).into_iter().find(|&u| {
                    self.net
                        .fire(marking, u)
                        .is_ok_and(|m| self.net.enabled(&m, t))
                });
                match helper {
                    Some(u) => {
                        *marking = self.net.fire(marking, u)?;
                        fired.push(u);
                    }
                    None => return Ok(Some(i)),
                }
            }
            *marking = self.net.fire(marking, t)?;
            fired.push(t);
        }
        Ok(None)
    }

    fn label_transitions(&self, trace: &Trace) -> Result<Vec<TransitionId>, NetError> {
        trace.activities().iter().map(|a| self.transition_for(a)).collect()
    }

    /// Replays a trace of visible labels from the initial marking. After
    /// the last label, silent transitions are fired while exactly one is
    /// enabled and the final marking has not been reached.
    pub fn replay(&self, trace: &Trace) -> Result<ReplayResult, NetError> {
        let labels = self.label_transitions(trace)?;
        let mut marking = self.initial_marking();
        let mut fired = Vec::new();
        if let Some(i) = self.fire_labels(&mut marking, &mut fired, &labels)? {
            return Ok(ReplayResult {
                blocked_at: Some(i),
                final_marking: marking,
                fired,
                reached_final: false,
            });
        }
        let target = self.final_marking();
        let mut budget = 2 * self.net.transition_count() + 2;
        while marking != target && budget > 0 {
            match self.silent_enabled(&marking).as_slice() {
                [u] => {
                    marking = self.net.fire(&marking, *u)?;
                    fired.push(*u);
                }
                _ => break,
            }
            budget -= 1;
        }
        let reached_final = marking == target;
        Ok(ReplayResult {
            blocked_at: (!reached_final).then_some(trace.len()),
            final_marking: marking,
            fired,
            reached_final,
        })
    }

    /// Marking reached by a prefix, without completing to the final
    /// marking; `None` if some label cannot fire.
    pub fn replay_prefix(&self, prefix: &Trace) -> Result<Option<Marking>, NetError> {
        let labels = self.label_transitions(prefix)?;
        let mut marking = self.initial_marking();
        let mut fired = Vec::new();
        Ok(self
            .fire_labels(&mut marking, &mut fired, &labels)?
            .is_none()
            .then_some(marking))
    }

    /// One label from `marking`, with the same silent lookahead as replay.
    pub fn step(&self, marking: &Marking, label: &Activity) -> Result<Option<Marking>, NetError> {
        let t = self.transition_for(label)?;
        let mut next = marking.clone();
        let mut fired = Vec::new();
        Ok(self
            .fire_labels(&mut next, &mut fired, &[t])?
            .is_none()
            .then_some(next))
    }

    /// Visible labels that can occur next: enabled now, or after one
    /// enabled silent transition.
    pub fn next_labels(&self, marking: &Marking) -> BTreeSet<Activity> {
        let mut out = BTreeSet::new();
        let mut collect = |m: &Marking| {
            for t in self.net.enabled_transitions(m) {
                if let Some(a) = &self.net.transition(t).label {
                    out.insert(a.clone());
                }
            }
        };
        collect(marking);
        for u in self.silent_enabled(marking) {
            if let Ok(m) = self.net.fire(marking, u) {
                collect(&m);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayResult {
    /// Index of the first label that could not fire, or the trace length
    /// when the labels fired but the final marking was not reached.
    pub blocked_at: Option<usize>,
    pub final_marking: Marking,
    /// Fired transitions, silent ones included.
    pub fired: Vec<TransitionId>,
    pub reached_final: bool,
}

impl ReplayResult {
    pub fn is_ok(&self) -> bool {
        self.reached_final
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WfReport {
    pub problems: Vec<String>,
    /// Nodes not on a path from source to sink.
    pub off_path: Vec<String>,
}

impl WfReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty() && self.off_path.is_empty()
    }
}

/// Checks the workflow-net conditions: the source has no input, the sink
/// has no output, they differ, and every node lies on a path between them.
pub fn is_wf_net(net: &PetriNet, source: PlaceId, sink: PlaceId) -> WfReport {
    let mut report = WfReport::default();
    if source.0 >= net.place_count() || sink.0 >= net.place_count() {
        report.problems.push("source or sink is not a place of the net".into());
        return report;
    }
    if source == sink {
        report.problems.push("source and sink coincide".into());
    }
    if !net.place_preset(source).is_empty() {
        report.problems.push(format!("source {} has incoming arcs", net.place_name(source)));
    }
    if !net.place_postset(sink).is_empty() {
        report.problems.push(format!("sink {} has outgoing arcs", net.place_name(sink)));
    }

    // nodes: places 0..P, transitions P..P+T
    let np = net.place_count();
    let total = np + net.transition_count();
    let mut fwd_adj = vec![Vec::new(); total];
    let mut bwd_adj = vec![Vec::new(); total];
    for t in net.transitions() {
        for p in net.preset(t) {
            fwd_adj[p.0].push(np + t.0);
            bwd_adj[np + t.0].push(p.0);
        }
        for p in net.postset(t) {
            fwd_adj[np + t.0].push(p.0);
            bwd_adj[p.0].push(np + t.0);
        }
    }
    let reach = |start: usize, adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    };
    let fwd = reach(source.0, &fwd_adj);
    let bwd = reach(sink.0, &bwd_adj);
    for v in 0..total {
        if !(fwd[v] && bwd[v]) {
            report.off_path.push(if v < np {
                net.place_name(PlaceId(v)).to_string()
            } else {
                net.transition(TransitionId(v - np)).name.clone()
            });
        }
    }
    report
}

/// For each transition, the first log trace (canonical order) whose replay
/// fires it and ends in the final marking; `None` when there is none.
pub fn relaxed_soundness_witnesses(
    wf: &WorkflowNet,
    log: &EventLog,
) -> BTreeMap<TransitionId, Option<Trace>> {
    let mut witnesses: BTreeMap<TransitionId, Option<Trace>> =
        wf.net.transitions().map(|t| (t, None)).collect();
    for (trace, _) in log.traces() {
        let Ok(result) = wf.replay(trace) else {
            continue;
        };
        if !result.is_ok() {
            continue;
        }
        for t in result.fired {
            let slot = witnesses.get_mut(&t).expect("net transition");
            if slot.is_none() {
                *slot = Some(trace.clone());
            }
        }
    }
    witnesses
}

/// True iff every transition has a witness.
pub fn witnesses_cover_all(witnesses: &BTreeMap<TransitionId, Option<Trace>>) -> bool {
    witnesses.values().all(Option::is_some)
}
