//! Event logs: activities, traces, bags of traces and their prefix-closures.
//!
//! Logs are read either from the line-oriented trace-log text format
//! (`count;act act ...`) or from XES documents (see [`xes`]).

pub mod xes;

pub use xes::parse_xes;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid activity name {0:?}")]
    InvalidActivity(String),
    #[error("activity {0} is not part of the alphabet")]
    OutOfAlphabet(Activity),
    #[error("the event log is empty")]
    EmptyLog,
    #[error("not a unique start/end log: {0}")]
    NotUseLog(String),
    #[error("xes: {0}")]
    Xes(String),
}

/// A named activity. Names are non-empty and contain neither whitespace
/// nor `;`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Activity(Arc<str>);

impl Activity {
    pub fn new(name: &str) -> Result<Self, LogError> {
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ';') {
            return Err(LogError::InvalidActivity(name.to_string()));
        }
        Ok(Activity(Arc::from(name)))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Builds an activity from a name known to be valid. Panics otherwise.
pub fn act(name: &str) -> Activity {
    Activity::new(name).expect("valid activity name")
}

/// A finite sequence of activities.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace(Vec<Activity>);

impl Trace {
    pub fn new(activities: Vec<Activity>) -> Self {
        Trace(activities)
    }

    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    /// Parses a whitespace-separated list of activity names.
    pub fn from_names(names: &str) -> Result<Self, LogError> {
        names
            .split_whitespace()
            .map(Activity::new)
            .collect::<Result<Vec<_>, _>>()
            .map(Trace)
    }

    pub fn activities(&self) -> &[Activity] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<&Activity> {
        self.0.last()
    }

    /// The longest proper prefix, `None` for the empty trace.
    pub fn parent(&self) -> Option<Trace> {
        if self.0.is_empty() {
            None
        } else {
            Some(Trace(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, len: usize) -> Trace {
        Trace(self.0[..len].to_vec())
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Trace(v)
    }

    pub fn push(&mut self, a: Activity) {
        self.0.push(a);
    }

    pub fn into_inner(self) -> Vec<Activity> {
        self.0
    }
}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ">")
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromIterator<Activity> for Trace {
    fn from_iter<I: IntoIterator<Item = Activity>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

/// An ordered alphabet. The position of an activity fixes its index in
/// every Parikh and encoding vector built over this alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    order: Vec<Activity>,
    index: HashMap<Activity, usize>,
}

impl Alphabet {
    /// Keeps the given order; duplicates are dropped after their first
    /// occurrence.
    pub fn from_ordered(activities: impl IntoIterator<Item = Activity>) -> Self {
        let mut order = Vec::new();
        let mut index = HashMap::new();
        for a in activities {
            if !index.contains_key(&a) {
                index.insert(a.clone(), order.len());
                order.push(a);
            }
        }
        Alphabet { order, index }
    }

    pub fn sorted(activities: impl IntoIterator<Item = Activity>) -> Self {
        let set: BTreeSet<Activity> = activities.into_iter().collect();
        Self::from_ordered(set)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn index_of(&self, a: &Activity) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn contains(&self, a: &Activity) -> bool {
        self.index.contains_key(a)
    }

    pub fn get(&self, i: usize) -> &Activity {
        &self.order[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Activity> + '_ {
        self.order.iter()
    }

    pub fn as_slice(&self) -> &[Activity] {
        &self.order
    }
}

/// Occurrence counts of each alphabet member in a trace.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParikhVector {
    pub counts: Vec<u64>,
}

impl ParikhVector {
    pub fn zeros(len: usize) -> Self {
        ParikhVector { counts: vec![0; len] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn parikh(trace: &Trace, alphabet: &Alphabet) -> Result<ParikhVector, LogError> {
    let mut p = ParikhVector::zeros(alphabet.len());
    for a in trace.activities() {
        let i = alphabet
            .index_of(a)
            .ok_or_else(|| LogError::OutOfAlphabet(a.clone()))?;
        p.counts[i] += 1;
    }
    Ok(p)
}

/// A bag of traces.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    traces: BTreeMap<Trace, u64>,
    alphabet: BTreeSet<Activity>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_traces(traces: impl IntoIterator<Item = (Trace, u64)>) -> Self {
        let mut log = EventLog::new();
        for (t, n) in traces {
            log.add(t, n);
        }
        log
    }

    /// Adds `count` instances of `trace`. A zero count is ignored.
    pub fn add(&mut self, trace: Trace, count: u64) {
        if count == 0 {
            return;
        }
        self.alphabet.extend(trace.activities().iter().cloned());
        *self.traces.entry(trace).or_insert(0) += count;
    }

    pub fn traces(&self) -> impl Iterator<Item = (&Trace, u64)> + '_ {
        self.traces.iter().map(|(t, &n)| (t, n))
    }

    pub fn multiplicity(&self, trace: &Trace) -> u64 {
        self.traces.get(trace).copied().unwrap_or(0)
    }

    pub fn alphabet(&self) -> &BTreeSet<Activity> {
        &self.alphabet
    }

    /// Number of distinct trace variants.
    pub fn variant_count(&self) -> usize {
        self.traces.len()
    }

    /// Number of trace instances, i.e. the sum of all multiplicities.
    pub fn instance_count(&self) -> u64 {
        self.traces.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Trace instances in canonical order, each repeated by multiplicity.
    pub fn instances(&self) -> impl Iterator<Item = &Trace> + '_ {
        self.traces
            .iter()
            .flat_map(|(t, &n)| std::iter::repeat_n(t, n as usize))
    }

    /// Multiplies every multiplicity by `factor`.
    pub fn scaled(&self, factor: u64) -> EventLog {
        EventLog::from_traces(self.traces().map(|(t, n)| (t.clone(), n * factor)))
    }
}

/// Parses the trace-log text format.
///
/// Each non-blank line not starting with `#` is either `count;a b c` or
/// `a b c` (count 1). Duplicate lines are summed.
pub fn parse_trace_log(text: &str) -> Result<EventLog, LogError> {
    let mut log = EventLog::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (count, body) = match line.split_once(';') {
            Some((c, rest)) => {
                let c = c.trim();
                let n: i64 = c.parse().map_err(|_| LogError::Parse {
                    line: line_no,
                    message: format!("malformed count {c:?}"),
                })?;
                if n <= 0 {
                    return Err(LogError::Parse {
                        line: line_no,
                        message: format!("count must be positive, got {n}"),
                    });
                }
                (n as u64, rest)
            }
            None => (1, line),
        };
        let mut trace = Trace::empty();
        for token in body.split_whitespace() {
            let a = Activity::new(token).map_err(|_| LogError::Parse {
                line: line_no,
                message: format!("invalid activity token {token:?}"),
            })?;
            trace.push(a);
        }
        log.add(trace, count);
    }
    Ok(log)
}

/// Writes the log in the trace-log text format, one variant per line in
/// canonical trace order.
pub fn serialize_trace_log(log: &EventLog) -> String {
    let mut out = String::new();
    for (t, n) in log.traces() {
        out.push_str(&n.to_string());
        out.push(';');
        let names: Vec<&str> = t.activities().iter().map(Activity::name).collect();
        out.push_str(&names.join(" "));
        out.push('\n');
    }
    out
}

pub const START_NAME: &str = "__start__";
pub const END_NAME: &str = "__end__";

/// A unique start/end log: every trace begins with `start` and ends with
/// `end`, each occurring exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UseLog {
    log: EventLog,
    start: Activity,
    end: Activity,
}

impl UseLog {
    /// Wraps an existing log after checking the unique start/end property.
    pub fn new(log: EventLog, start: Activity, end: Activity) -> Result<Self, LogError> {
        check_use(&log, &start, &end)?;
        Ok(UseLog { log, start, end })
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn start(&self) -> &Activity {
        &self.start
    }

    pub fn end(&self) -> &Activity {
        &self.end
    }

    /// Canonical order: start first, end last, everything else sorted.
    pub fn alphabet(&self) -> Alphabet {
        let inner = self
            .log
            .alphabet()
            .iter()
            .filter(|a| **a != self.start && **a != self.end)
            .cloned();
        Alphabet::from_ordered(
            std::iter::once(self.start.clone())
                .chain(inner)
                .chain(std::iter::once(self.end.clone())),
        )
    }

    pub fn prefix_closure(&self) -> PrefixClosure {
        let mut pc = build_closure(&self.log, self.alphabet());
        pc.markers = Some((self.start.clone(), self.end.clone()));
        pc
    }

    /// Removes the start and end markers again.
    pub fn unwrap_traces(&self) -> EventLog {
        EventLog::from_traces(self.log.traces().map(|(t, n)| {
            let acts = t.activities();
            (Trace::new(acts[1..acts.len() - 1].to_vec()), n)
        }))
    }
}

/// Checks the unique start/end predicate.
pub fn check_use(log: &EventLog, start: &Activity, end: &Activity) -> Result<(), LogError> {
    if start == end {
        return Err(LogError::NotUseLog("start and end coincide".into()));
    }
    for (t, _) in log.traces() {
        let acts = t.activities();
        if acts.len() < 2 {
            return Err(LogError::NotUseLog(format!("trace {t} too short")));
        }
        if acts[0] != *start || acts[1..].contains(start) {
            return Err(LogError::NotUseLog(format!(
                "trace {t} does not start uniquely with {start}"
            )));
        }
        if acts[acts.len() - 1] != *end || acts[..acts.len() - 1].contains(end) {
            return Err(LogError::NotUseLog(format!(
                "trace {t} does not end uniquely with {end}"
            )));
        }
    }
    Ok(())
}

fn fresh_name(base: &str, taken: &BTreeSet<Activity>) -> Activity {
    let mut name = base.to_string();
    while taken.iter().any(|a| a.name() == name) {
        name.push('\'');
    }
    act(&name)
}

/// Wraps every trace as `start · σ · end` with fresh start/end activities.
pub fn use_transform(log: &EventLog) -> Result<UseLog, LogError> {
    if log.is_empty() {
        return Err(LogError::EmptyLog);
    }
    let start = fresh_name(START_NAME, log.alphabet());
    let end = fresh_name(END_NAME, log.alphabet());
    let wrapped = EventLog::from_traces(log.traces().map(|(t, n)| {
        let mut acts = Vec::with_capacity(t.len() + 2);
        acts.push(start.clone());
        acts.extend(t.activities().iter().cloned());
        acts.push(end.clone());
        (Trace::new(acts), n)
    }));
    Ok(UseLog {
        log: wrapped,
        start,
        end,
    })
}

/// Frequency-annotated prefix-closure of a log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixClosure {
    alphabet: Alphabet,
    entries: BTreeMap<Trace, u64>,
    traces: BTreeMap<Trace, u64>,
    markers: Option<(Activity, Activity)>,
}

impl PrefixClosure {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Closure frequency of `trace`, zero if absent.
    pub fn frequency(&self, trace: &Trace) -> u64 {
        self.entries.get(trace).copied().unwrap_or(0)
    }

    pub fn contains(&self, trace: &Trace) -> bool {
        self.entries.contains_key(trace)
    }

    /// All members, the empty sequence included, in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&Trace, u64)> + '_ {
        self.entries.iter().map(|(t, &n)| (t, n))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The full traces of the source log with their multiplicities.
    pub fn traces(&self) -> impl Iterator<Item = (&Trace, u64)> + '_ {
        self.traces.iter().map(|(t, &n)| (t, n))
    }

    /// Start and end activity when built from a unique start/end log.
    pub fn markers(&self) -> Option<(&Activity, &Activity)> {
        self.markers.as_ref().map(|(s, e)| (s, e))
    }

    /// Multiplicity of `trace` as a complete trace of the source log.
    pub fn trace_multiplicity(&self, trace: &Trace) -> u64 {
        self.traces.get(trace).copied().unwrap_or(0)
    }
}

/// Prefix-closure over the lexicographically sorted alphabet of `log`.
pub fn prefix_closure(log: &EventLog) -> Result<PrefixClosure, LogError> {
    if log.is_empty() {
        return Err(LogError::EmptyLog);
    }
    Ok(build_closure(log, Alphabet::sorted(log.alphabet().iter().cloned())))
}

fn build_closure(log: &EventLog, alphabet: Alphabet) -> PrefixClosure {
    let mut entries: BTreeMap<Trace, u64> = BTreeMap::new();
    for (t, n) in log.traces() {
        for len in 0..=t.len() {
            *entries.entry(t.prefix(len)).or_insert(0) += n;
        }
    }
    PrefixClosure {
        alphabet,
        entries,
        traces: log.traces().map(|(t, n)| (t.clone(), n)).collect(),
        markers: None,
    }
}
