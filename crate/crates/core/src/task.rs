//! Summoning task definitions, validation, call patterns and the task file
//! format.
//!
//! Pair indices are 1-based everywhere in the public surface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{causal_leq, CausalDiamond, SpacetimePoint, DEFAULT_TOL};

/// Largest task size for which call patterns are enumerated.
pub const MAX_ENUMERATED_PAIRS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskMode {
    /// At most one call will be made.
    #[serde(rename = "single")]
    SingleCallGuaranteed,
    /// Any subset of call points may be called; one matching return suffices.
    #[serde(rename = "multi")]
    UnrestrictedCalls,
    /// At most one call, and a return point need not follow its call point.
    #[serde(rename = "extended")]
    ExtendedGeometry,
}

impl TaskMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskMode::SingleCallGuaranteed => "single",
            TaskMode::UnrestrictedCalls => "multi",
            TaskMode::ExtendedGeometry => "extended",
        }
    }

    /// Modes in which empty diamonds are rejected.
    pub fn requires_nonempty_diamonds(self) -> bool {
        !matches!(self, TaskMode::ExtendedGeometry)
    }

    pub fn at_most_one_call(self) -> bool {
        !matches!(self, TaskMode::UnrestrictedCalls)
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(TaskMode::SingleCallGuaranteed),
            "multi" => Ok(TaskMode::UnrestrictedCalls),
            "extended" => Ok(TaskMode::ExtendedGeometry),
            other => Err(format!("unknown mode `{other}` (expected single, multi or extended)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummoningTask {
    pub dim: usize,
    pub start: SpacetimePoint,
    pub pairs: Vec<CausalDiamond>,
    pub mode: TaskMode,
    pub tol: f64,
}

impl SummoningTask {
    pub fn new(dim: usize, start: SpacetimePoint, pairs: Vec<CausalDiamond>, mode: TaskMode) -> Self {
        Self {
            dim,
            start,
            pairs,
            mode,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_mode(mut self, mode: TaskMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Number of call/return pairs.
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    /// Pair `i` (1-based).
    pub fn pair(&self, i: usize) -> &CausalDiamond {
        &self.pairs[i - 1]
    }

    pub fn call(&self, i: usize) -> &SpacetimePoint {
        &self.pairs[i - 1].call
    }

    pub fn ret(&self, i: usize) -> &SpacetimePoint {
        &self.pairs[i - 1].ret
    }

    /// `a <= b` at the task tolerance. Callers must have validated dimensions.
    pub fn leq(&self, a: &SpacetimePoint, b: &SpacetimePoint) -> bool {
        causal_leq(a, b, self.tol).unwrap_or(false)
    }

    /// `c_j <= r_i`: a call at `c_j` can be known at `r_i`.
    pub fn call_reaches(&self, j: usize, i: usize) -> bool {
        self.leq(self.call(j), self.ret(i))
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    BadDimension,
    BadTolerance,
    NoPairs,
    DimensionMismatch,
    NonFinite,
    EmptyDiamond,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::BadDimension => "BAD_DIMENSION",
            ViolationCode::BadTolerance => "BAD_TOLERANCE",
            ViolationCode::NoPairs => "NO_PAIRS",
            ViolationCode::DimensionMismatch => "DIMENSION_MISMATCH",
            ViolationCode::NonFinite => "NON_FINITE",
            ViolationCode::EmptyDiamond => "EMPTY_DIAMOND",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    /// 1-based pair index; `None` for task-level problems and the start point.
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{} at pair {}: {}", self.code.as_str(), i, self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, index: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            index,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Collects every problem with the task; never stops at the first one.
pub fn validate(task: &SummoningTask) -> ValidationReport {
    validate_as(task, task.mode)
}

/// Validates under the rules of `mode` instead of the task's own mode.
pub fn validate_as(task: &SummoningTask, mode: TaskMode) -> ValidationReport {
    let mut report = ValidationReport::default();
    if task.dim == 0 {
        report.push(ViolationCode::BadDimension, None, "spatial dimension must be at least 1");
    }
    if !(task.tol.is_finite() && task.tol >= 0.0) {
        report.push(
            ViolationCode::BadTolerance,
            None,
            format!("tolerance must be finite and non-negative, got {}", task.tol),
        );
    }
    if task.pairs.is_empty() {
        report.push(ViolationCode::NoPairs, None, "a task needs at least one call/return pair");
    }

    let check_point = |report: &mut ValidationReport, p: &SpacetimePoint, index: Option<usize>, label: &str| -> bool {
        let mut fine = true;
        if p.dim() != task.dim {
            report.push(
                ViolationCode::DimensionMismatch,
                index,
                format!("{label} has {} spatial coordinates, expected {}", p.dim(), task.dim),
            );
            fine = false;
        }
        if !p.is_finite() {
            report.push(ViolationCode::NonFinite, index, format!("{label} has a non-finite coordinate"));
            fine = false;
        }
        fine
    };

    check_point(&mut report, &task.start, None, "start");
    for (k, d) in task.pairs.iter().enumerate() {
        let i = k + 1;
        let call_ok = check_point(&mut report, &d.call, Some(i), "call point");
        let ret_ok = check_point(&mut report, &d.ret, Some(i), "return point");
        if call_ok && ret_ok && mode.requires_nonempty_diamonds() {
            let tol = if task.tol.is_finite() && task.tol >= 0.0 { task.tol } else { 0.0 };
            if !causal_leq(&d.call, &d.ret, tol).unwrap_or(false) {
                report.push(
                    ViolationCode::EmptyDiamond,
                    Some(i),
                    format!("return point {} is not in the causal future of call point {}", d.ret, d.call),
                );
            }
        }
    }
    report
}

/// A set of 1-based pair indices at which calls are made, stored as a bitmask
/// (bit `i - 1` for index `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CallPattern(u64);

impl CallPattern {
    pub const MAX_INDEX: usize = 64;

    pub const fn empty() -> Self {
        CallPattern(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        CallPattern(bits)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self, TaskError> {
        let mut bits = 0u64;
        for i in indices {
            if i == 0 || i > Self::MAX_INDEX {
                return Err(TaskError::BadIndex(i));
            }
            bits |= 1 << (i - 1);
        }
        Ok(CallPattern(bits))
    }

    pub fn single(i: usize) -> Self {
        CallPattern(1 << (i - 1))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        (1..=Self::MAX_INDEX).contains(&i) && self.0 & (1 << (i - 1)) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn max_index(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (1..=Self::MAX_INDEX).filter(move |&i| self.contains(i))
    }

    pub fn intersect(self, other: CallPattern) -> CallPattern {
        CallPattern(self.0 & other.0)
    }

    pub fn toggle(self, i: usize) -> CallPattern {
        CallPattern(self.0 ^ (1 << (i - 1)))
    }
}

impl fmt::Display for CallPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("task has {0} pairs; pattern enumeration is limited to {MAX_ENUMERATED_PAIRS}")]
    TooManyPairs(usize),
    #[error("pair index {0} is out of range (indices are 1-based)")]
    BadIndex(usize),
}

/// All call patterns the task's mode admits, in ascending bitmask order.
pub fn enumerate_patterns(task: &SummoningTask) -> Result<Vec<CallPattern>, TaskError> {
    let n = task.n();
    if n > MAX_ENUMERATED_PAIRS {
        return Err(TaskError::TooManyPairs(n));
    }
    if task.mode.at_most_one_call() {
        let mut out = vec![CallPattern::empty()];
        out.extend((1..=n).map(CallPattern::single));
        Ok(out)
    } else {
        Ok((0..1u64 << n).map(CallPattern).collect())
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorCode {
    Syntax,
    MissingField,
    UnknownField,
    BadValue,
}

impl ParseErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorCode::Syntax => "SYNTAX",
            ParseErrorCode::MissingField => "MISSING_FIELD",
            ParseErrorCode::UnknownField => "UNKNOWN_FIELD",
            ParseErrorCode::BadValue => "BAD_VALUE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} at line {line}, column {column}: {message}", code.as_str())]
pub struct ParseError {
    pub code: ParseErrorCode,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    dimension: usize,
    mode: TaskMode,
    #[serde(default = "default_tol")]
    tolerance: f64,
    start: SpacetimePoint,
    pairs: Vec<CausalDiamond>,
}

/// Parses the task file format. Geometric problems are left to [`validate`].
pub fn parse_task(text: &str) -> Result<SummoningTask, ParseError> {
    let file: TaskFile = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        let code = match e.classify() {
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof | serde_json::error::Category::Io => {
                ParseErrorCode::Syntax
            }
            serde_json::error::Category::Data if message.starts_with("missing field") => ParseErrorCode::MissingField,
            serde_json::error::Category::Data if message.starts_with("unknown field") => ParseErrorCode::UnknownField,
            serde_json::error::Category::Data => ParseErrorCode::BadValue,
        };
        // serde_json appends its own position; keep the bare message
        let message = match message.rfind(" at line ") {
            Some(pos) => message[..pos].to_string(),
            None => message,
        };
        ParseError {
            code,
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    Ok(SummoningTask {
        dim: file.dimension,
        start: file.start,
        pairs: file.pairs,
        mode: file.mode,
        tol: file.tolerance,
    })
}

fn num(v: f64) -> String {
    // ryu-backed, shortest representation that round-trips
    serde_json::to_string(&v).expect("finite number")
}

fn point_json(p: &SpacetimePoint) -> String {
    let xs: Vec<String> = p.x.iter().map(|&v| num(v)).collect();
    format!("{{\"t\": {}, \"x\": [{}]}}", num(p.t), xs.join(", "))
}

/// Canonical rendering: fixed field order, one pair per line.
pub fn serialize_task(task: &SummoningTask) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str(&format!("  \"dimension\": {},\n", task.dim));
    s.push_str(&format!("  \"mode\": \"{}\",\n", task.mode.as_str()));
    s.push_str(&format!("  \"tolerance\": {},\n", num(task.tol)));
    s.push_str(&format!("  \"start\": {},\n", point_json(&task.start)));
    s.push_str("  \"pairs\": [\n");
    for (k, d) in task.pairs.iter().enumerate() {
        let sep = if k + 1 == task.pairs.len() { "" } else { "," };
        s.push_str(&format!(
            "    {{\"call\": {}, \"return\": {}}}{}\n",
            point_json(&d.call),
            point_json(&d.ret),
            sep
        ));
    }
    s.push_str("  ]\n}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn p(t: f64, x: &[f64]) -> SpacetimePoint {
        SpacetimePoint::new(t, x.to_vec())
    }

    #[test]
    fn chain_is_valid() {
        let task = fixtures::chain(3);
        assert!(validate(&task).ok());
    }

    #[test]
    fn empty_diamond_is_mode_dependent() {
        let task = SummoningTask::new(
            1,
            p(0.0, &[0.0]),
            vec![
                CausalDiamond::new(p(1.0, &[0.0]), p(2.0, &[0.0])),
                CausalDiamond::new(p(2.0, &[0.0]), p(1.0, &[0.0])),
            ],
            TaskMode::UnrestrictedCalls,
        );
        let report = validate(&task);
        assert!(!report.ok());
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, ViolationCode::EmptyDiamond);
        assert_eq!(report.violations[0].index, Some(2));

        let ext = task.with_mode(TaskMode::ExtendedGeometry);
        assert!(validate(&ext).ok());
    }

    #[test]
    fn validate_collects_everything() {
        let task = SummoningTask {
            dim: 1,
            start: p(f64::NAN, &[0.0]),
            pairs: vec![
                CausalDiamond::new(p(0.0, &[0.0, 1.0]), p(1.0, &[0.0])),
                CausalDiamond::new(p(0.0, &[0.0]), p(1.0, &[f64::INFINITY])),
            ],
            mode: TaskMode::SingleCallGuaranteed,
            tol: -1.0,
        };
        let report = validate(&task);
        assert!(report.has(ViolationCode::BadTolerance));
        assert!(report.has(ViolationCode::NonFinite));
        assert!(report.has(ViolationCode::DimensionMismatch));
        assert_eq!(report.violations.len(), 4);

        let none = SummoningTask::new(0, p(0.0, &[]), vec![], TaskMode::UnrestrictedCalls);
        let report = validate(&none);
        assert!(report.has(ViolationCode::BadDimension));
        assert!(report.has(ViolationCode::NoPairs));
    }

    #[test]
    fn minimal_document() {
        let doc = r#"{"dimension": 1, "mode": "multi",
            "start": {"t": 0, "x": [0]},
            "pairs": [{"call": {"t": 1, "x": [0]}, "return": {"t": 2, "x": [0]}}]}"#;
        let task = parse_task(doc).unwrap();
        assert_eq!(task.n(), 1);
        assert_eq!(task.tol, DEFAULT_TOL);
        assert_eq!(task.mode, TaskMode::UnrestrictedCalls);
    }

    #[test]
    fn parse_errors() {
        let missing = r#"{"dimension": 1, "mode": "multi", "pairs": []}"#;
        let e = parse_task(missing).unwrap_err();
        assert_eq!(e.code, ParseErrorCode::MissingField);
        assert!(e.message.contains("start"));

        let unknown = r#"{"dimension": 1, "mode": "multi", "colour": 3, "start": {"t": 0, "x": [0]}, "pairs": []}"#;
        assert_eq!(parse_task(unknown).unwrap_err().code, ParseErrorCode::UnknownField);

        let syntax = "{\n  \"dimension\": 1,\n  \"mode\": ]";
        let e = parse_task(syntax).unwrap_err();
        assert_eq!(e.code, ParseErrorCode::Syntax);
        assert_eq!(e.line, 3);

        let bad_mode = r#"{"dimension": 1, "mode": "sometimes", "start": {"t": 0, "x": [0]}, "pairs": []}"#;
        assert_eq!(parse_task(bad_mode).unwrap_err().code, ParseErrorCode::BadValue);
    }

    #[test]
    fn patterns() {
        let mut task = fixtures::chain(2);
        let pats = enumerate_patterns(&task).unwrap();
        let shown: Vec<String> = pats.iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, ["{}", "{1}", "{2}", "{1,2}"]);

        task = fixtures::chain(3).with_mode(TaskMode::SingleCallGuaranteed);
        assert_eq!(enumerate_patterns(&task).unwrap().len(), 4);

        task = fixtures::chain(5);
        assert_eq!(enumerate_patterns(&task).unwrap().len(), 32);

        task = fixtures::chain(21);
        assert_eq!(enumerate_patterns(&task), Err(TaskError::TooManyPairs(21)));
    }

    #[test]
    fn pattern_indices() {
        let pat = CallPattern::from_indices([1, 3]).unwrap();
        assert!(pat.contains(1) && !pat.contains(2) && pat.contains(3));
        assert_eq!(pat.len(), 2);
        assert_eq!(pat.max_index(), 3);
        assert_eq!(CallPattern::from_indices([0]), Err(TaskError::BadIndex(0)));
    }

    #[test]
    fn fixtures_round_trip() {
        for (name, task) in fixtures::all() {
            let text = serialize_task(&task);
            assert_eq!(parse_task(&text).unwrap(), task, "{name}");
        }
    }
}
