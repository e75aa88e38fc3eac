//! End-to-end discovery: USE-log, causal oracle, optional sequence
//! filtering, one region ILP per causal pair, net assembly.

use std::collections::BTreeSet;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::causal_graph::{causal_oracle, CausalError, CausalGraph};
use crate::event_log::{use_transform, Activity, EventLog, LogError, UseLog};
use crate::ilp::{BinarySolver, BranchAndBound, SolverError};
use crate::region::{
    build_constraint_system_with, instantiate_causal_ilp, Objective, ConstraintSystem, IlpInstance, RegionCandidate,
    RegionError,
};
use crate::sequence_filter::{retained_encodings, sef_bfs, KappaMax, SequenceEncodingGraph, VertexId};
use crate::workflow_net::{PetriNet, WorkflowNet};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("causal graph and log use different start/end markers")]
    Markers,
}

#[derive(Clone, Debug)]
pub struct DiscoveryOptions {
    /// Filter strength; `None` disables sequence filtering.
    pub alpha: Option<f64>,
    pub dependency_threshold: f64,
    /// Solve the per-pair programs on the rayon pool.
    pub parallel: bool,
    pub objective: Objective,
}

impl Default for DiscoveryOptions {
    fn default() -> Self {
        DiscoveryOptions {
            alpha: None,
            dependency_threshold: 0.9,
            parallel: true,
            objective: Objective::default(),
        }
    }
}

/// Result of one causal pair's program.
#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub pair: (Activity, Activity),
    /// `None` when the program was infeasible and the pair was skipped.
    pub region: Option<RegionCandidate>,
    pub objective: Option<i64>,
}

/// A discovered place with the pairs whose programs produced it.
#[derive(Clone, Debug)]
pub struct DiscoveredPlace {
    pub region: RegionCandidate,
    pub pairs: Vec<(Activity, Activity)>,
}

/// Sequence-encoding graph and the vertices kept by the filter.
#[derive(Clone, Debug)]
pub struct FilterTrace {
    pub graph: SequenceEncodingGraph,
    pub retained: BTreeSet<VertexId>,
}

#[derive(Clone, Debug)]
pub struct Discovery {
    pub net: WorkflowNet,
    pub use_log: UseLog,
    pub causal: CausalGraph,
    pub system: Arc<ConstraintSystem>,
    pub filter: Option<FilterTrace>,
    pub outcomes: Vec<PairOutcome>,
    pub places: Vec<DiscoveredPlace>,
}

impl Discovery {
    pub fn skipped_pairs(&self) -> Vec<&(Activity, Activity)> {
        self.outcomes
            .iter()
            .filter(|o| o.region.is_none())
            .map(|o| &o.pair)
            .collect()
    }

    /// One program per causal pair, in solving order.
    pub fn ilp_instances(&self) -> Result<Vec<IlpInstance>, RegionError> {
        self.outcomes
            .iter()
            .map(|o| instantiate_causal_ilp(&self.system, &o.pair.0, &o.pair.1))
            .collect()
    }
}

/// Discovers a workflow net with the default solver and the causal oracle
/// computed on the unfiltered log.
pub fn discover(log: &EventLog, opts: &DiscoveryOptions) -> Result<Discovery, DiscoveryError> {
    let use_log = use_transform(log)?;
    let causal = causal_oracle(&use_log, opts.dependency_threshold)?;
    discover_with(use_log, causal, opts, &BranchAndBound)
}

/// Discovery against an explicit causal graph and solver.
pub fn discover_with(
    use_log: UseLog,
    causal: CausalGraph,
    opts: &DiscoveryOptions,
    solver: &dyn BinarySolver,
) -> Result<Discovery, DiscoveryError> {
    if causal.start() != use_log.start() || causal.end() != use_log.end() {
        return Err(DiscoveryError::Markers);
    }
    let pc = use_log.prefix_closure();
    let filter = match opts.alpha {
        None => None,
        Some(alpha) => {
            let kappa = KappaMax::new(alpha).ok_or(DiscoveryError::Alpha(alpha))?;
            let graph = SequenceEncodingGraph::build(&pc);
            let retained = sef_bfs(&graph, &kappa);
            debug!(
                "filter kept {} of {} encodings",
                retained.len(),
                graph.vertex_count().saturating_sub(1)
            );
            Some(FilterTrace { graph, retained })
        }
    };
    let kept = filter
        .as_ref()
        .map(|f| retained_encodings(&f.graph, &f.retained));
    let system = Arc::new(build_constraint_system_with(&pc, kept.as_ref(), opts.objective)?);

    let pairs: Vec<(Activity, Activity)> = causal
        .arcs()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    let solve_pair = |(a, b): &(Activity, Activity)| -> Result<PairOutcome, DiscoveryError> {
        let instance = instantiate_causal_ilp(&system, a, b)?;
        let solution = solver.solve(&instance.program())?;
        let region = solution.assignment.as_deref().map(RegionCandidate::from_assignment);
        if region.is_none() {
            warn!("no place for causal pair ({a}, {b}): program infeasible");
        }
        Ok(PairOutcome {
            pair: (a.clone(), b.clone()),
            region,
            objective: solution.objective,
        })
    };
    let outcomes: Vec<PairOutcome> = if opts.parallel {
        pairs.par_iter().map(solve_pair).collect::<Result<_, _>>()?
    } else {
        pairs.iter().map(solve_pair).collect::<Result<_, _>>()?
    };
    let places = dedupe_places(&outcomes);
    let net = assemble_net(&use_log, system.alphabet(), &places);
    Ok(Discovery {
        net,
        use_log,
        causal,
        system,
        filter,
        outcomes,
        places,
    })
}

/// Identical regions collapse into one place, kept at first occurrence.
pub fn dedupe_places(outcomes: &[PairOutcome]) -> Vec<DiscoveredPlace> {
    let mut places: Vec<DiscoveredPlace> = Vec::new();
    for o in outcomes {
        let Some(region) = &o.region else { continue };
        match places.iter_mut().find(|p| &p.region == region) {
            Some(p) => p.pairs.push(o.pair.clone()),
            None => places.push(DiscoveredPlace {
                region: region.clone(),
                pairs: vec![o.pair.clone()],
            }),
        }
    }
    places
}

/// Place name listing its input and output activities, e.g. `({a,f},{d})`.
pub fn place_name(region: &RegionCandidate, alphabet: &crate::event_log::Alphabet) -> String {
    let set = |bits: &[bool]| {
        let names: Vec<&str> = bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| alphabet.get(i).name())
            .collect();
        format!("{{{}}}", names.join(","))
    };
    format!("({},{})", set(&region.x), set(&region.y))
}

fn assemble_net(
    use_log: &UseLog,
    alphabet: &crate::event_log::Alphabet,
    places: &[DiscoveredPlace],
) -> WorkflowNet {
    let mut net = PetriNet::new();
    let source = net.add_place("source");
    let transitions: Vec<_> = alphabet
        .iter()
        .map(|a| {
            let silent = a == use_log.start() || a == use_log.end();
            net.add_transition(a.name(), (!silent).then(|| a.clone()))
        })
        .collect();
    for place in places {
        let p = net.add_place(place_name(&place.region, alphabet));
        for (i, &t) in transitions.iter().enumerate() {
            if place.region.x[i] {
                net.add_output_arc(t, p);
            }
            if place.region.y[i] {
                net.add_input_arc(p, t);
            }
        }
    }
    let sink = net.add_place("sink");
    let start = alphabet.index_of(use_log.start()).expect("start in alphabet");
    let end = alphabet.index_of(use_log.end()).expect("end in alphabet");
    net.add_input_arc(source, transitions[start]);
    net.add_output_arc(transitions[end], sink);
    WorkflowNet { net, source, sink }
}
