//! Region constraints over a prefix-closure.
//!
//! A candidate place is a triple `(m, x, y)` of binary variables: the
//! initial marking bit, incoming-arc indicators and outgoing-arc
//! indicators, one per alphabet member. Every non-empty prefix
//! `σ = σ'·<a>` yields the row `m + p(σ')·x - p(σ)·y >= 0`. Variables are
//! laid out as `(m, x_0..x_{n-1}, y_0..y_{n-1})` everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::event_log::{Activity, Alphabet, PrefixClosure, Trace};
use crate::ilp::{BinaryProgram, Row, RowKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegionError {
    #[error("activity {0} is not part of the alphabet")]
    OutOfAlphabet(Activity),
    #[error("retained encoding {0} does not occur in the prefix-closure")]
    UnknownEncoding(String),
    #[error("causal pair ({0}, {1}) is not admissible: arcs out of the end or into the start activity have no place")]
    InadmissiblePair(Activity, Activity),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Constraint row of a sequence: `(1, p(σ'), -p(σ))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodingVector(Vec<i64>);

impl EncodingVector {
    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    /// Number of activities the vector is laid out for.
    pub fn alphabet_len(&self) -> usize {
        (self.0.len() - 1) / 2
    }

    pub fn is_root(&self) -> bool {
        self.0[1..].iter().all(|&c| c == 0)
    }

    /// Row value for a candidate assignment.
    pub fn evaluate(&self, assignment: &[i64]) -> i64 {
        self.0.iter().zip(assignment).map(|(c, v)| c * v).sum()
    }

    /// Compact `([bag of σ'], a)` form, e.g. `([a_s,a],b)`.
    pub fn shorthand(&self, alphabet: &Alphabet) -> String {
        let n = self.alphabet_len();
        if self.is_root() {
            return "([],⊥)".to_string();
        }
        let mut bag = Vec::new();
        let mut last = None;
        for i in 0..n {
            let xi = self.0[1 + i];
            let yi = -self.0[1 + n + i];
            match xi {
                0 => {}
                1 => bag.push(alphabet.get(i).name().to_string()),
                k => bag.push(format!("{}^{}", alphabet.get(i).name(), k)),
            }
            if yi - xi == 1 {
                last = Some(alphabet.get(i).name());
            }
        }
        format!("([{}],{})", bag.join(","), last.unwrap_or("?"))
    }
}

impl fmt::Display for EncodingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub fn sequence_encoding(sigma: &Trace, alphabet: &Alphabet) -> Result<EncodingVector, RegionError> {
    let n = alphabet.len();
    let mut v = vec![0i64; 2 * n + 1];
    v[0] = 1;
    let acts = sigma.activities();
    for (pos, a) in acts.iter().enumerate() {
        let i = alphabet
            .index_of(a)
            .ok_or_else(|| RegionError::OutOfAlphabet(a.clone()))?;
        if pos + 1 < acts.len() {
            v[1 + i] += 1;
        }
        v[1 + n + i] -= 1;
    }
    Ok(EncodingVector(v))
}

/// A candidate place as binary `(m, x, y)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionCandidate {
    pub m: bool,
    pub x: Vec<bool>,
    pub y: Vec<bool>,
}

impl RegionCandidate {
    pub fn zeros(n: usize) -> Self {
        RegionCandidate {
            m: false,
            x: vec![false; n],
            y: vec![false; n],
        }
    }

    pub fn ones(n: usize) -> Self {
        RegionCandidate {
            m: true,
            x: vec![true; n],
            y: vec![true; n],
        }
    }

    /// Sets the given arcs by activity name; used for hand-written regions.
    pub fn with_arcs(
        alphabet: &Alphabet,
        inputs: &[&Activity],
        outputs: &[&Activity],
    ) -> Result<Self, RegionError> {
        let mut r = Self::zeros(alphabet.len());
        for a in inputs {
            let i = alphabet.index_of(a).ok_or_else(|| RegionError::OutOfAlphabet((*a).clone()))?;
            r.x[i] = true;
        }
        for a in outputs {
            let i = alphabet.index_of(a).ok_or_else(|| RegionError::OutOfAlphabet((*a).clone()))?;
            r.y[i] = true;
        }
        Ok(r)
    }

    pub fn from_assignment(values: &[bool]) -> Self {
        let n = (values.len() - 1) / 2;
        RegionCandidate {
            m: values[0],
            x: values[1..=n].to_vec(),
            y: values[1 + n..].to_vec(),
        }
    }

    pub fn to_assignment(&self) -> Vec<i64> {
        std::iter::once(self.m)
            .chain(self.x.iter().copied())
            .chain(self.y.iter().copied())
            .map(i64::from)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InequalityRow {
    pub vector: EncodingVector,
    /// Smallest closure member (canonical order) with this encoding.
    pub source: Trace,
    /// Summed closure frequency of all members with this encoding.
    pub frequency: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualityRow {
    /// `(1, p(σ), -p(σ))`: the place is empty after the trace.
    pub coefficients: Vec<i64>,
    pub source: Trace,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSystem {
    alphabet: Alphabet,
    markers: Option<(Activity, Activity)>,
    inequality_rows: Vec<InequalityRow>,
    equality_rows: Vec<EqualityRow>,
    objective: Vec<i64>,
}

impl ConstraintSystem {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn variable_count(&self) -> usize {
        2 * self.alphabet.len() + 1
    }

    pub fn inequality_rows(&self) -> &[InequalityRow] {
        &self.inequality_rows
    }

    pub fn equality_rows(&self) -> &[EqualityRow] {
        &self.equality_rows
    }

    pub fn objective(&self) -> &[i64] {
        &self.objective
    }

    pub fn markers(&self) -> Option<(&Activity, &Activity)> {
        self.markers.as_ref().map(|(s, e)| (s, e))
    }

    pub fn x_var(&self, a: &Activity) -> Option<usize> {
        self.alphabet.index_of(a).map(|i| 1 + i)
    }

    pub fn y_var(&self, a: &Activity) -> Option<usize> {
        self.alphabet.index_of(a).map(|i| 1 + self.alphabet.len() + i)
    }

    /// The binary program without any fixings: inequality rows, equality
    /// rows and the min-arc row `Σx + Σy >= 1`.
    pub fn program(&self) -> BinaryProgram {
        let nv = self.variable_count();
        let mut rows = Vec::with_capacity(self.inequality_rows.len() + self.equality_rows.len() + 1);
        for r in &self.inequality_rows {
            rows.push(Row::new(r.vector.as_slice().to_vec(), RowKind::Ge, 0));
        }
        for r in &self.equality_rows {
            rows.push(Row::new(r.coefficients.clone(), RowKind::Eq, 0));
        }
        let mut min_arc = vec![1i64; nv];
        min_arc[0] = 0;
        rows.push(Row::new(min_arc, RowKind::Ge, 1));
        BinaryProgram::new(nv, self.objective.clone(), rows)
    }

    /// True iff the candidate satisfies every inequality and equality row
    /// and the min-arc row.
    pub fn is_satisfied_by(&self, r: &RegionCandidate) -> bool {
        self.program().is_feasible(&r.to_assignment())
    }
}

/// Objective instantiation. Both favour minimal regions and add a
/// penalty of one on `m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    /// `Σ pc(σ)·(m + p(σ)ᵀ(x − y))`: tokens left in the place after each
    /// prefix. Self-loops cost nothing here, so they are only added when a
    /// constraint needs them.
    #[default]
    Residency,
    /// `Σ pc(σ)·(m + p(σ')ᵀx − p(σ)ᵀy)`: the slack of each region row.
    RowSlack,
}

fn objective_from_rows<'a>(
    n: usize,
    rows: impl Iterator<Item = (&'a EncodingVector, u64)>,
    objective: Objective,
) -> Vec<i64> {
    let mut c = vec![0i64; 2 * n + 1];
    c[0] = 1;
    for (v, freq) in rows {
        let freq = freq as i64;
        let s = v.as_slice();
        for (ci, vi) in c.iter_mut().zip(s) {
            *ci += freq * vi;
        }
        if objective == Objective::Residency {
            // p(σ) - p(σ') is the unit vector of the last activity
            for i in 0..n {
                if -s[1 + n + i] - s[1 + i] == 1 {
                    c[1 + i] += freq;
                }
            }
        }
    }
    c
}

/// Objective coefficients over every non-empty member of the closure.
pub fn objective_vector(pc: &PrefixClosure, objective: Objective) -> Vec<i64> {
    let n = pc.alphabet().len();
    let rows: Vec<(EncodingVector, u64)> = pc
        .entries()
        .filter(|(t, _)| !t.is_empty())
        .map(|(t, f)| (sequence_encoding(t, pc.alphabet()).expect("closure over its alphabet"), f))
        .collect();
    objective_from_rows(n, rows.iter().map(|(v, f)| (v, *f)), objective)
}

/// [`build_constraint_system_with`] using the default objective.
pub fn build_constraint_system(
    pc: &PrefixClosure,
    retained: Option<&BTreeSet<EncodingVector>>,
) -> Result<ConstraintSystem, RegionError> {
    build_constraint_system_with(pc, retained, Objective::default())
}

/// Builds the constraint system. With `retained`, only rows whose
/// encoding is retained are emitted, and a trace contributes its equality
/// row only if every one of its non-empty prefixes is retained.
pub fn build_constraint_system_with(
    pc: &PrefixClosure,
    retained: Option<&BTreeSet<EncodingVector>>,
    objective: Objective,
) -> Result<ConstraintSystem, RegionError> {
    let alphabet = pc.alphabet().clone();
    let n = alphabet.len();
    let mut rows: BTreeMap<EncodingVector, (Trace, u64)> = BTreeMap::new();
    let mut order: Vec<EncodingVector> = Vec::new();
    let mut all: BTreeSet<EncodingVector> = BTreeSet::new();
    for (t, f) in pc.entries() {
        let v = sequence_encoding(t, &alphabet)?;
        all.insert(v.clone());
        if t.is_empty() {
            continue;
        }
        if retained.is_some_and(|keep| !keep.contains(&v)) {
            continue;
        }
        match rows.get_mut(&v) {
            Some(entry) => entry.1 += f,
            None => {
                order.push(v.clone());
                rows.insert(v, (t.clone(), f));
            }
        }
    }
    if let Some(keep) = retained {
        if let Some(v) = keep.iter().find(|v| !all.contains(v)) {
            return Err(RegionError::UnknownEncoding(v.to_string()));
        }
    }

    let inequality_rows: Vec<InequalityRow> = order
        .into_iter()
        .map(|v| {
            let (source, frequency) = rows.remove(&v).expect("row recorded");
            InequalityRow {
                vector: v,
                source,
                frequency,
            }
        })
        .collect();

    let mut equality_rows = Vec::new();
    for (t, _) in pc.traces() {
        if let Some(keep) = retained {
            let kept = (1..=t.len()).all(|len| {
                sequence_encoding(&t.prefix(len), &alphabet)
                    .map(|v| keep.contains(&v))
                    .unwrap_or(false)
            });
            if !kept {
                continue;
            }
        }
        let mut coefficients = vec![0i64; 2 * n + 1];
        coefficients[0] = 1;
        for a in t.activities() {
            let i = alphabet
                .index_of(a)
                .ok_or_else(|| RegionError::OutOfAlphabet(a.clone()))?;
            coefficients[1 + i] += 1;
            coefficients[1 + n + i] -= 1;
        }
        equality_rows.push(EqualityRow {
            coefficients,
            source: t.clone(),
        });
    }

    let objective = objective_from_rows(
        n,
        inequality_rows.iter().map(|r| (&r.vector, r.frequency)),
        objective,
    );
    Ok(ConstraintSystem {
        alphabet,
        markers: pc.markers().map(|(s, e)| (s.clone(), e.clone())),
        inequality_rows,
        equality_rows,
        objective,
    })
}

/// A constraint system plus the fixings `m = 0, x(a) = 1, y(b) = 1` of a
/// causal pair `(a, b)`.
#[derive(Clone, Debug)]
pub struct IlpInstance {
    system: Arc<ConstraintSystem>,
    pair: (Activity, Activity),
    fixings: Vec<(usize, bool)>,
}

impl IlpInstance {
    pub fn system(&self) -> &ConstraintSystem {
        &self.system
    }

    pub fn pair(&self) -> (&Activity, &Activity) {
        (&self.pair.0, &self.pair.1)
    }

    pub fn fixings(&self) -> &[(usize, bool)] {
        &self.fixings
    }

    pub fn program(&self) -> BinaryProgram {
        let mut p = self.system.program();
        for &(var, value) in &self.fixings {
            p.fix(var, value);
        }
        p
    }

    /// LP-format-like text dump of the instance.
    pub fn to_lp_text(&self) -> String {
        let cs = &self.system;
        let names = variable_names(cs.alphabet());
        let mut out = String::new();
        let _ = writeln!(out, "\\ causal pair ({}, {})", self.pair.0, self.pair.1);
        out.push_str("Minimize\n obj:");
        push_linear(&mut out, cs.objective(), &names);
        out.push_str("\nSubject To\n");
        for (i, r) in cs.inequality_rows().iter().enumerate() {
            let _ = write!(out, " r{}:", i + 1);
            push_linear(&mut out, r.vector.as_slice(), &names);
            let _ = writeln!(out, " >= 0  \\ {}", r.source);
        }
        for (i, r) in cs.equality_rows().iter().enumerate() {
            let _ = write!(out, " e{}:", i + 1);
            push_linear(&mut out, &r.coefficients, &names);
            let _ = writeln!(out, " = 0  \\ {}", r.source);
        }
        let mut min_arc = vec![1i64; names.len()];
        min_arc[0] = 0;
        out.push_str(" arcs:");
        push_linear(&mut out, &min_arc, &names);
        out.push_str(" >= 1\n");
        for &(var, value) in &self.fixings {
            let _ = writeln!(out, " fix_{}: {} = {}", names[var], names[var], u8::from(value));
        }
        out.push_str("Binaries\n");
        let _ = writeln!(out, " {}", names.join(" "));
        out.push_str("End\n");
        out
    }
}

fn variable_names(alphabet: &Alphabet) -> Vec<String> {
    let sanitize = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect()
    };
    std::iter::once("m".to_string())
        .chain(alphabet.iter().map(|a| format!("x_{}", sanitize(a.name()))))
        .chain(alphabet.iter().map(|a| format!("y_{}", sanitize(a.name()))))
        .collect()
}

fn push_linear(out: &mut String, coeffs: &[i64], names: &[String]) {
    let mut first = true;
    for (c, name) in coeffs.iter().zip(names) {
        if *c == 0 {
            continue;
        }
        let sign = if *c < 0 { "-" } else if first { "" } else { "+" };
        let mag = c.abs();
        if mag == 1 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {mag} {name}");
        }
        first = false;
    }
    if first {
        out.push_str(" 0 m");
    }
}

pub fn instantiate_causal_ilp(
    system: &Arc<ConstraintSystem>,
    a: &Activity,
    b: &Activity,
) -> Result<IlpInstance, RegionError> {
    if let Some((start, end)) = system.markers() {
        if a == end || b == start {
            return Err(RegionError::InadmissiblePair(a.clone(), b.clone()));
        }
    }
    let xa = system.x_var(a).ok_or_else(|| RegionError::OutOfAlphabet(a.clone()))?;
    let yb = system.y_var(b).ok_or_else(|| RegionError::OutOfAlphabet(b.clone()))?;
    Ok(IlpInstance {
        system: Arc::clone(system),
        pair: (a.clone(), b.clone()),
        fixings: vec![(0, false), (xa, true), (yb, true)],
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionCheck {
    pub is_region: bool,
    /// First violated closure member in canonical order, with its row value.
    pub first_violation: Option<(Trace, i64)>,
}

/// Checks `m + p(σ')·x - p(σ)·y >= 0` for every non-empty closure member.
pub fn check_region(r: &RegionCandidate, pc: &PrefixClosure) -> Result<RegionCheck, RegionError> {
    let n = pc.alphabet().len();
    if r.x.len() != n || r.y.len() != n {
        return Err(RegionError::Dimension {
            expected: n,
            got: r.x.len().max(r.y.len()),
        });
    }
    let assignment = r.to_assignment();
    for (t, _) in pc.entries() {
        if t.is_empty() {
            continue;
        }
        let value = sequence_encoding(t, pc.alphabet())?.evaluate(&assignment);
        if value < 0 {
            return Ok(RegionCheck {
                is_region: false,
                first_violation: Some((t.clone(), value)),
            });
        }
    }
    Ok(RegionCheck {
        is_region: true,
        first_violation: None,
    })
}

/// The hand-constructed solution for an admissible causal pair on a
/// unique start/end log: a place fed by the start activity, drained by the
/// end activity, with self-loops on the pair's inner activities.
pub fn trivial_causal_region(
    alphabet: &Alphabet,
    start: &Activity,
    end: &Activity,
    a: &Activity,
    b: &Activity,
) -> Result<RegionCandidate, RegionError> {
    let mut inputs = vec![start];
    let mut outputs = vec![end];
    if a != start {
        inputs.push(a);
        outputs.push(a);
    }
    if b != end {
        inputs.push(b);
        outputs.push(b);
    }
    RegionCandidate::with_arcs(alphabet, &inputs, &outputs)
}
