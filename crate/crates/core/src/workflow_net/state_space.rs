use std::collections::{HashMap, VecDeque};

use super::{Marking, PetriNet, TransitionId, WorkflowNet};

/// Reachability graph explored breadth-first.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub markings: Vec<Marking>,
    pub edges: Vec<(usize, TransitionId, usize)>,
    /// False when the bound stopped the search.
    pub complete: bool,
}

pub fn explore_state_space(net: &PetriNet, initial: &Marking, bound: usize) -> StateSpace {
    let mut index: HashMap<Marking, usize> = HashMap::new();
    let mut markings = vec![initial.clone()];
    index.insert(initial.clone(), 0);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let mut complete = true;
    while let Some(i) = queue.pop_front() {
        for t in net.enabled_transitions(&markings[i]) {
            let next = net.fire(&markings[i], t).expect("enabled");
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if markings.len() >= bound {
                        complete = false;
                        continue;
                    }
                    markings.push(next.clone());
                    index.insert(next, markings.len() - 1);
                    queue.push_back(markings.len() - 1);
                    markings.len() - 1
                }
            };
            edges.push((i, t, j));
        }
    }
    StateSpace {
        markings,
        edges,
        complete,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    RelaxedSound,
    /// Transitions that occur on no run from the initial to the final marking.
    NotRelaxedSound(Vec<TransitionId>),
    /// The state-space bound was hit before a decision.
    Undecided,
}

/// Relaxed soundness from the reachability graph: every transition must
/// label an edge between markings that can still reach the final marking.
pub fn relaxed_soundness_by_state_space(wf: &WorkflowNet, bound: usize) -> Verdict {
    let space = explore_state_space(&wf.net, &wf.initial_marking(), bound);
    let target = wf.final_marking();
    let n = space.markings.len();
    let mut back = vec![Vec::new(); n];
    for &(i, _, j) in &space.edges {
        back[j].push(i);
    }
    let mut coreach = vec![false; n];
    let mut queue: VecDeque<usize> = space
        .markings
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == target)
        .map(|(i, _)| i)
        .collect();
    for &i in &queue {
        coreach[i] = true;
    }
    while let Some(j) = queue.pop_front() {
        for &i in &back[j] {
            if !coreach[i] {
                coreach[i] = true;
                queue.push_back(i);
            }
        }
    }
    let mut covered = vec![false; wf.net.transition_count()];
    for &(_, t, j) in &space.edges {
        if coreach[j] {
            covered[t.0] = true;
        }
    }
    let missing: Vec<TransitionId> = wf.net.transitions().filter(|t| !covered[t.0]).collect();
    if missing.is_empty() {
        Verdict::RelaxedSound
    } else if space.complete {
        Verdict::NotRelaxedSound(missing)
    } else {
        Verdict::Undecided
    }
}
