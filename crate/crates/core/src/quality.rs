//! Replay fitness, escaping-edges precision, noise injection and a small
//! reference model for noise experiments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event_log::{act, Activity, EventLog, Trace};
use crate::workflow_net::{Marking, NetError, PetriNet, TransitionId, WorkflowNet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("noise level must lie in [0, 1], got {0}")]
    Level(f64),
    #[error("log labels missing from the net: {}", .0.iter().map(Activity::name).collect::<Vec<_>>().join(","))]
    MissingLabels(Vec<Activity>),
}

/// Log activities that no visible transition carries.
pub fn missing_labels(wf: &WorkflowNet, log: &EventLog) -> Vec<Activity> {
    let visible = wf.net.visible_labels();
    log.alphabet()
        .iter()
        .filter(|a| !visible.contains(*a))
        .cloned()
        .collect()
}

fn check_labels(wf: &WorkflowNet, log: &EventLog) -> Result<(), QualityError> {
    let missing = missing_labels(wf, log);
    if missing.is_empty() {
        Ok(())
    } else {
        Err(QualityError::MissingLabels(missing))
    }
}

/// Token counts of a replay, weighted by trace multiplicity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TokenCounts {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
}

impl TokenCounts {
    /// `½(1 − missing/consumed) + ½(1 − remaining/produced)`; a term with
    /// a zero denominator contributes 0.
    pub fn fitness(&self) -> f64 {
        let term = |bad: u64, total: u64| {
            if total == 0 {
                0.0
            } else {
                1.0 - bad as f64 / total as f64
            }
        };
        0.5 * term(self.missing, self.consumed) + 0.5 * term(self.remaining, self.produced)
    }
}

fn force_fire(net: &PetriNet, marking: &mut Marking, t: TransitionId, c: &mut TokenCounts) {
    for &p in net.preset(t) {
        c.missing += marking.take(p, 1);
        c.consumed += 1;
    }
    for &p in net.postset(t) {
        marking.add(p, 1);
        c.produced += 1;
    }
}

/// Token replay of one trace with missing-token insertion. A silent
/// transition that is the only consumer of the source fires first; a
/// silent transition that is the only producer of the sink fires last.
fn replay_tokens(wf: &WorkflowNet, trace: &Trace) -> Result<(TokenCounts, bool), NetError> {
    let net = &wf.net;
    let mut c = TokenCounts {
        produced: 1,
        ..Default::default()
    };
    let mut marking = wf.initial_marking();
    let silent = |ts: BTreeSet<TransitionId>| match ts.iter().collect::<Vec<_>>().as_slice() {
        [t] if net.transition(**t).label.is_none() => Some(**t),
        _ => None,
    };
    if let Some(t) = silent(net.place_postset(wf.source)) {
        force_fire(net, &mut marking, t, &mut c);
    }
    for a in trace.activities() {
        let t = wf.transition_for(a)?;
        force_fire(net, &mut marking, t, &mut c);
    }
    if marking.tokens(wf.sink) == 0 {
        if let Some(t) = silent(net.place_preset(wf.sink)) {
            force_fire(net, &mut marking, t, &mut c);
        }
    }
    c.missing += marking.take(wf.sink, 1);
    c.consumed += 1;
    c.remaining = marking.total();
    let perfect = c.missing == 0 && c.remaining == 0;
    Ok((c, perfect))
}

/// Summed token counts over the log and the number of perfectly
/// replayed instances.
pub fn token_replay(wf: &WorkflowNet, log: &EventLog) -> Result<(TokenCounts, u64), QualityError> {
    check_labels(wf, log)?;
    let mut total = TokenCounts::default();
    let mut fitting = 0;
    for (trace, n) in log.traces() {
        let (c, perfect) = replay_tokens(wf, trace)?;
        total.produced += n * c.produced;
        total.consumed += n * c.consumed;
        total.missing += n * c.missing;
        total.remaining += n * c.remaining;
        if perfect {
            fitting += n;
        }
    }
    Ok((total, fitting))
}

pub fn token_fitness(wf: &WorkflowNet, log: &EventLog) -> Result<f64, QualityError> {
    Ok(token_replay(wf, log)?.0.fitness())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PrecisionCounts {
    /// Σ w · |allowed \ used|.
    pub escaping: u64,
    /// Σ w · |allowed|.
    pub allowed: u64,
    /// Prefix instances that could not be replayed and were skipped.
    pub blocked: u64,
}

impl PrecisionCounts {
    pub fn precision(&self) -> f64 {
        if self.allowed == 0 {
            1.0
        } else {
            1.0 - self.escaping as f64 / self.allowed as f64
        }
    }
}

pub fn precision_counts(wf: &WorkflowNet, log: &EventLog) -> Result<PrecisionCounts, QualityError> {
    check_labels(wf, log)?;
    // every prefix with its weight and observed continuations
    let mut prefixes: BTreeMap<Trace, (u64, BTreeSet<Activity>)> = BTreeMap::new();
    for (trace, n) in log.traces() {
        for len in 0..=trace.len() {
            let entry = prefixes.entry(trace.prefix(len)).or_default();
            entry.0 += n;
            if len < trace.len() {
                entry.1.insert(trace.activities()[len].clone());
            }
        }
    }
    // parents sort before their extensions
    let mut states: BTreeMap<Trace, Option<Marking>> = BTreeMap::new();
    let mut counts = PrecisionCounts::default();
    for (prefix, (w, used)) in &prefixes {
        let marking = match prefix.parent() {
            None => Some(wf.initial_marking()),
            Some(parent) => match states.get(&parent).expect("parent visited") {
                Some(m) => wf.step(m, prefix.last().expect("non-empty"))?,
                None => None,
            },
        };
        match &marking {
            Some(m) => {
                let allowed = wf.next_labels(m);
                counts.allowed += w * allowed.len() as u64;
                counts.escaping += w * allowed.difference(used).count() as u64;
            }
            None => counts.blocked += w,
        }
        states.insert(prefix.clone(), marking);
    }
    Ok(counts)
}

pub fn escaping_edges_precision(wf: &WorkflowNet, log: &EventLog) -> Result<f64, QualityError> {
    Ok(precision_counts(wf, log)?.precision())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub fitness: f64,
    pub precision: f64,
    pub instances: u64,
    pub fitting_instances: u64,
    pub tokens: TokenCounts,
    pub prefixes: PrecisionCounts,
}

pub fn evaluate(wf: &WorkflowNet, log: &EventLog) -> Result<QualityReport, QualityError> {
    let (tokens, fitting) = token_replay(wf, log)?;
    let prefixes = precision_counts(wf, log)?;
    Ok(QualityReport {
        fitness: tokens.fitness(),
        precision: prefixes.precision(),
        instances: log.instance_count(),
        fitting_instances: fitting,
        tokens,
        prefixes,
    })
}

impl QualityReport {
    pub const CSV_HEADER: &'static str =
        "fitness,precision,instances,fitting_instances,escaping,allowed,blocked_prefixes";

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "fitness={:.6}", self.fitness);
        let _ = writeln!(out, "precision={:.6}", self.precision);
        let _ = writeln!(out, "instances={}", self.instances);
        let _ = writeln!(out, "fitting_instances={}", self.fitting_instances);
        let _ = writeln!(out, "produced={}", self.tokens.produced);
        let _ = writeln!(out, "consumed={}", self.tokens.consumed);
        let _ = writeln!(out, "missing={}", self.tokens.missing);
        let _ = writeln!(out, "remaining={}", self.tokens.remaining);
        let _ = writeln!(out, "escaping={}", self.prefixes.escaping);
        let _ = writeln!(out, "allowed={}", self.prefixes.allowed);
        let _ = writeln!(out, "blocked_prefixes={}", self.prefixes.blocked);
        out
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{},{},{},{},{}",
            self.fitness,
            self.precision,
            self.instances,
            self.fitting_instances,
            self.prefixes.escaping,
            self.prefixes.allowed,
            self.prefixes.blocked
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Manipulation {
    Head,
    Tail,
    Body,
    Swap,
}

fn remove_range(trace: &Trace, from: usize, to: usize) -> Trace {
    let a = trace.activities();
    a[..from].iter().chain(&a[to..]).cloned().collect()
}

fn manipulate(trace: &Trace, rng: &mut ChaCha8Rng) -> Trace {
    let len = trace.len();
    if len < 2 {
        return trace.clone();
    }
    let max_k = (len / 3).max(1);
    let op = [
        Manipulation::Head,
        Manipulation::Tail,
        Manipulation::Body,
        Manipulation::Swap,
    ][rng.gen_range(0..4)];
    let tail = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(1..=max_k);
        remove_range(trace, len - k, len)
    };
    match op {
        Manipulation::Head => {
            let k = rng.gen_range(1..=max_k);
            remove_range(trace, 0, k)
        }
        Manipulation::Tail => tail(rng),
        // the body excludes the first and last event
        Manipulation::Body if len >= 3 => {
            let k = rng.gen_range(1..=max_k.min(len - 2));
            let start = rng.gen_range(1..=len - 1 - k);
            remove_range(trace, start, start + k)
        }
        Manipulation::Body => tail(rng),
        Manipulation::Swap => {
            let a = trace.activities();
            let pairs: Vec<(usize, usize)> = (0..len)
                .flat_map(|i| (i + 1..len).map(move |j| (i, j)))
                .filter(|&(i, j)| a[i] != a[j])
                .collect();
            if pairs.is_empty() {
                return tail(rng);
            }
            let (i, j) = pairs[rng.gen_range(0..pairs.len())];
            let mut v = a.to_vec();
            v.swap(i, j);
            Trace::new(v)
        }
    }
}

/// Original and manipulated trace per instance, in canonical order.
pub fn noisy_instances(log: &EventLog, level: f64, seed: u64) -> Result<Vec<(Trace, Trace)>, QualityError> {
    if !(0.0..=1.0).contains(&level) {
        return Err(QualityError::Level(level));
    }
    let originals: Vec<Trace> = log.instances().cloned().collect();
    let n = originals.len();
    // guard against 0.1 * 30 = 3.0000000000000004
    let k = ((level * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();
    let mut out: Vec<(Trace, Trace)> = originals.iter().map(|t| (t.clone(), t.clone())).collect();
    for i in chosen {
        out[i].1 = manipulate(&originals[i], &mut rng);
    }
    Ok(out)
}

/// Manipulates `⌈level · instances⌉` uniformly chosen instances with one
/// of head, tail or body removal or a swap of two events.
pub fn inject_noise(log: &EventLog, level: f64, seed: u64) -> Result<EventLog, QualityError> {
    Ok(EventLog::from_traces(
        noisy_instances(log, level, seed)?
            .into_iter()
            .map(|(_, t)| (t, 1)),
    ))
}

/// Six-activity reference net: `a`, then `b` and `c` concurrently, then a
/// choice of `d` or `e`, then `f`.
pub fn reference_model() -> WorkflowNet {
    let mut net = PetriNet::new();
    let source = net.add_place("source");
    let p1 = net.add_place("p1");
    let p2 = net.add_place("p2");
    let p3 = net.add_place("p3");
    let p4 = net.add_place("p4");
    let p5 = net.add_place("p5");
    let sink = net.add_place("sink");
    let mut t = |n: &str| net.add_transition(n, Some(act(n)));
    let [a, b, c, d, e, f] = ["a", "b", "c", "d", "e", "f"].map(&mut t);
    net.add_input_arc(source, a);
    net.add_output_arc(a, p1);
    net.add_output_arc(a, p2);
    net.add_input_arc(p1, b);
    net.add_output_arc(b, p3);
    net.add_input_arc(p2, c);
    net.add_output_arc(c, p4);
    for x in [d, e] {
        net.add_input_arc(p3, x);
        net.add_input_arc(p4, x);
        net.add_output_arc(x, p5);
    }
    net.add_input_arc(p5, f);
    net.add_output_arc(f, sink);
    WorkflowNet { net, source, sink }
}

/// Random runs from the initial to the final marking, choosing uniformly
/// among enabled transitions. Runs longer than `max_len` or ending in a
/// dead marking are discarded and retried.
pub fn simulate(wf: &WorkflowNet, traces: usize, seed: u64, max_len: usize) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = wf.final_marking();
    let mut log = EventLog::new();
    let mut produced = 0;
    let mut attempts = 0;
    while produced < traces && attempts < traces * 100 {
        attempts += 1;
        let mut m = wf.initial_marking();
        let mut run = Vec::new();
        while m != target && run.len() <= max_len {
            let enabled = wf.net.enabled_transitions(&m);
            if enabled.is_empty() {
                break;
            }
            let t = enabled[rng.gen_range(0..enabled.len())];
            m = wf.net.fire(&m, t).expect("enabled");
            if let Some(a) = &wf.net.transition(t).label {
                run.push(a.clone());
            }
        }
        if m == target {
            log.add(Trace::new(run), 1);
            produced += 1;
        }
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{discover, DiscoveryOptions};
    use crate::event_log::parse_trace_log;
    use crate::workflow_net::is_wf_net;

    const L1: &str = "10;a b d e g\n12;a c d e f d b e g\n9;a d c e h\n11;a b d e f c d e g\n13;a d c e f b d e h";

    fn sequence_net(labels: &[&str]) -> WorkflowNet {
        let mut net = PetriNet::new();
        let source = net.add_place("source");
        let mut prev = source;
        for l in labels {
            let t = net.add_transition(*l, Some(act(l)));
            let p = net.add_place(format!("after_{l}"));
            net.add_input_arc(prev, t);
            net.add_output_arc(t, p);
            prev = p;
        }
        WorkflowNet {
            net,
            source,
            sink: prev,
        }
    }

    /// Every label is a self-loop on one heart place, entered and left
    /// through silent transitions.
    fn flower(labels: &BTreeSet<Activity>) -> WorkflowNet {
        let mut net = PetriNet::new();
        let source = net.add_place("source");
        let heart = net.add_place("heart");
        let sink = net.add_place("sink");
        let enter = net.add_transition("enter", None);
        net.add_input_arc(source, enter);
        net.add_output_arc(enter, heart);
        for l in labels {
            let t = net.add_transition(l.name(), Some(l.clone()));
            net.add_input_arc(heart, t);
            net.add_output_arc(t, heart);
        }
        let leave = net.add_transition("leave", None);
        net.add_input_arc(heart, leave);
        net.add_output_arc(leave, sink);
        WorkflowNet { net, source, sink }
    }

    #[test]
    fn perfect_and_degenerate_fitness() {
        let w = sequence_net(&["a", "b"]);
        let log = parse_trace_log("3;a b").unwrap();
        assert_eq!(token_fitness(&w, &log).unwrap(), 1.0);
        let empty = WorkflowNet {
            net: {
                let mut n = PetriNet::new();
                n.add_place("source");
                n.add_place("sink");
                n
            },
            source: crate::workflow_net::PlaceId(0),
            sink: crate::workflow_net::PlaceId(1),
        };
        let only_empty = EventLog::from_traces([(Trace::empty(), 2)]);
        assert_eq!(token_fitness(&empty, &only_empty).unwrap(), 0.0);
        assert_eq!(TokenCounts::default().fitness(), 0.0);
    }

    #[test]
    fn skipped_step_costs_tokens() {
        // a -> b -> g; the log skips b, so g misses its input token
        let w = sequence_net(&["a", "b", "g"]);
        let log = parse_trace_log("a g").unwrap();
        let (c, fitting) = token_replay(&w, &log).unwrap();
        // produced: initial + a + g = 3; consumed: a + g + final = 3
        // missing: g's input; remaining: a's output
        assert_eq!(
            c,
            TokenCounts {
                produced: 3,
                consumed: 3,
                missing: 1,
                remaining: 1
            }
        );
        assert_eq!(fitting, 0);
        assert!((c.fitness() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_label_is_reported() {
        let w = sequence_net(&["a"]);
        let log = parse_trace_log("a z").unwrap();
        assert_eq!(
            token_fitness(&w, &log),
            Err(QualityError::MissingLabels(vec![act("z")]))
        );
    }

    #[test]
    fn exact_net_has_precision_one() {
        let w = sequence_net(&["a", "b", "c"]);
        let log = parse_trace_log("a b c").unwrap();
        assert_eq!(escaping_edges_precision(&w, &log).unwrap(), 1.0);
    }

    #[test]
    fn flower_is_less_precise_than_discovery() {
        let l1 = parse_trace_log(L1).unwrap();
        let d = discover(&l1, &DiscoveryOptions::default()).unwrap();
        let discovered = escaping_edges_precision(&d.net, &l1).unwrap();
        let fl_net = flower(l1.alphabet());
        assert!(is_wf_net(&fl_net.net, fl_net.source, fl_net.sink).is_ok());
        assert_eq!(token_fitness(&fl_net, &l1).unwrap(), 1.0);
        let fl = escaping_edges_precision(&fl_net, &l1).unwrap();
        assert!(fl < discovered, "{fl} vs {discovered}");
        assert_eq!(token_fitness(&d.net, &l1).unwrap(), 1.0);
    }

    #[test]
    fn scale_invariance() {
        let l1 = parse_trace_log(L1).unwrap();
        let d = discover(&l1, &DiscoveryOptions::default()).unwrap();
        let r1 = evaluate(&d.net, &l1).unwrap();
        let r3 = evaluate(&d.net, &l1.scaled(3)).unwrap();
        assert_eq!(r1.fitness, r3.fitness);
        assert_eq!(r1.precision, r3.precision);
    }

    #[test]
    fn noise_counts_and_determinism() {
        let l1 = parse_trace_log(L1).unwrap();
        let pairs = noisy_instances(&l1, 0.05, 42).unwrap();
        assert_eq!(pairs.len(), 55);
        assert_eq!(pairs.iter().filter(|(a, b)| a != b).count(), 3);
        assert_eq!(inject_noise(&l1, 0.0, 7).unwrap(), l1);
        let all = noisy_instances(&l1, 1.0, 9).unwrap();
        assert!(all.iter().all(|(a, b)| a != b));
        assert_eq!(inject_noise(&l1, 1.0, 9).unwrap(), inject_noise(&l1, 1.0, 9).unwrap());
        let noisy = inject_noise(&l1, 0.3, 1).unwrap();
        assert_eq!(noisy.instance_count(), 55);
        assert!(noisy.alphabet().is_subset(l1.alphabet()));
        assert!(matches!(inject_noise(&l1, 1.5, 1), Err(QualityError::Level(_))));
        assert!(matches!(inject_noise(&l1, f64::NAN, 1), Err(QualityError::Level(_))));
    }

    #[test]
    fn short_traces_are_exempt() {
        let log = parse_trace_log("4;a").unwrap();
        assert_eq!(inject_noise(&log, 1.0, 3).unwrap(), log);
    }

    #[test]
    fn reference_model_simulation() {
        let w = reference_model();
        assert!(is_wf_net(&w.net, w.source, w.sink).is_ok());
        let log = simulate(&w, 50, 5, 50);
        assert_eq!(log.instance_count(), 50);
        for (t, _) in log.traces() {
            assert!(w.replay(t).unwrap().is_ok());
        }
        assert_eq!(simulate(&w, 50, 5, 50), log);
    }
}
