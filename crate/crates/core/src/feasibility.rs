//! Feasibility of summoning tasks under the three call regimes, and the
//! causal-diamond ordering behind the teleportation chain.

use std::fmt;

use thiserror::Error;

use crate::exec::Exec;
use crate::geometry::diamonds_causally_related;
use crate::task::{validate_as, SummoningTask, TaskMode, ValidationReport};

/// Largest task the literal subset enumeration accepts.
pub const MAX_BRUTEFORCE_PAIRS: usize = 16;
/// Largest task the sequential-path search accepts.
pub const MAX_PATH_PAIRS: usize = 8;
/// Greedy elimination tracks subsets as bitmasks.
pub const MAX_PAIRS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// `r_i` is not in the causal future of the start point.
    StartUnreachable(usize),
    /// Diamonds `i` and `j` are not causally related.
    UnrelatedPair(usize, usize),
    /// No return point in the set sees every call point in the set.
    NoDominant(Vec<usize>),
    /// No single call point of pairs `i`, `j` reaches both return points.
    NoCommonCall(usize, usize),
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::StartUnreachable(i) => write!(f, "r_{i} is not in the causal future of s"),
            Witness::UnrelatedPair(i, j) => write!(f, "diamonds D_{i} and D_{j} are not causally related"),
            Witness::NoDominant(set) => write!(f, "subset {} has no dominant element", fmt_set(set)),
            Witness::NoCommonCall(i, j) => {
                write!(f, "no call point among c_{i}, c_{j} reaches both r_{i} and r_{j}")
            }
        }
    }
}

pub(crate) fn fmt_set(set: &[usize]) -> String {
    let parts: Vec<String> = set.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

pub(crate) fn fmt_tuple(seq: &[usize]) -> String {
    let parts: Vec<String> = seq.iter().map(|i| i.to_string()).collect();
    format!("({})", parts.join(","))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub mode: TaskMode,
    pub feasible: bool,
    pub witness: Option<Witness>,
    /// Chain order `σ(1), …, σ(N)` (1-based pair indices).
    pub ordering: Option<Vec<usize>>,
    /// Pairs whose return point is not causally after the call point.
    pub empty_diamonds: Vec<usize>,
}

impl Verdict {
    fn feasible(mode: TaskMode) -> Self {
        Verdict {
            mode,
            feasible: true,
            witness: None,
            ordering: None,
            empty_diamonds: Vec::new(),
        }
    }

    fn infeasible(mode: TaskMode, witness: Witness) -> Self {
        Verdict {
            mode,
            feasible: false,
            witness: Some(witness),
            ordering: None,
            empty_diamonds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error("invalid task:\n{0}")]
    InvalidTask(ValidationReport),
    #[error("operation requires {expected} mode, task is in {found} mode")]
    WrongMode { expected: TaskMode, found: TaskMode },
    #[error("task has {found} pairs; this operation is limited to {limit}")]
    TooManyPairs { found: usize, limit: usize },
    #[error("task is infeasible: {0}")]
    Infeasible(Witness),
    #[error("diamond {0} is not a segment (call and return at different places)")]
    NonDegenerate(usize),
    #[error("at most one empty diamond may occur in a feasible task, found {0:?}")]
    CorollaryViolated(Vec<usize>),
}

fn require_standard(task: &SummoningTask) -> Result<(), FeasibilityError> {
    let report = validate_as(task, TaskMode::UnrestrictedCalls);
    if !report.ok() {
        return Err(FeasibilityError::InvalidTask(report));
    }
    Ok(())
}

fn require_max(task: &SummoningTask, limit: usize) -> Result<(), FeasibilityError> {
    if task.n() > limit {
        return Err(FeasibilityError::TooManyPairs {
            found: task.n(),
            limit,
        });
    }
    Ok(())
}

fn first_unreachable(task: &SummoningTask) -> Option<usize> {
    (1..=task.n()).find(|&i| !task.leq(&task.start, task.ret(i)))
}

/// `sees[k]` has bit `i - 1` set when `c_i <= r_k`.
pub(crate) fn visibility_masks(task: &SummoningTask) -> Vec<u64> {
    (1..=task.n())
        .map(|k| {
            (1..=task.n())
                .filter(|&i| task.call_reaches(i, k))
                .fold(0u64, |m, i| m | 1 << (i - 1))
        })
        .collect()
}

fn mask_to_indices(mask: u64) -> Vec<usize> {
    (1..=64).filter(|&i| mask & (1 << (i - 1)) != 0).collect()
}

/// Decides the task under the at-most-one-call regime: every return point is
/// reachable from `s` and every two diamonds are causally related.
pub fn check_single_call(task: &SummoningTask) -> Result<Verdict, FeasibilityError> {
    require_standard(task)?;
    let mode = TaskMode::SingleCallGuaranteed;
    for i in 1..=task.n() {
        for j in i + 1..=task.n() {
            let related = diamonds_causally_related(task.pair(i), task.pair(j), task.tol)
                .expect("validated diamonds");
            if !related {
                return Ok(Verdict::infeasible(mode, Witness::UnrelatedPair(i, j)));
            }
        }
    }
    if let Some(i) = first_unreachable(task) {
        return Ok(Verdict::infeasible(mode, Witness::StartUnreachable(i)));
    }
    Ok(Verdict::feasible(mode))
}

/// Decides the task when calls may arrive at any subset of call points.
///
/// Greedy elimination: repeatedly remove the smallest index whose return
/// point sees every remaining call point. A dominant element of `K` dominates
/// every subset of `K` containing it, so getting stuck is the only way to
/// fail, and the stuck set is the witness. The chain order is the reverse of
/// the elimination order.
pub fn check_unrestricted(task: &SummoningTask) -> Result<Verdict, FeasibilityError> {
    require_standard(task)?;
    require_max(task, MAX_PAIRS)?;
    let mode = TaskMode::UnrestrictedCalls;
    let sees = visibility_masks(task);
    let n = task.n();
    let mut remaining: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut eliminated = Vec::with_capacity(n);
    while remaining != 0 {
        let dominant = mask_to_indices(remaining)
            .into_iter()
            .find(|&k| remaining & !sees[k - 1] == 0);
        match dominant {
            Some(k) => {
                eliminated.push(k);
                remaining &= !(1 << (k - 1));
            }
            None => {
                return Ok(Verdict::infeasible(mode, Witness::NoDominant(mask_to_indices(remaining))));
            }
        }
    }
    if let Some(i) = first_unreachable(task) {
        return Ok(Verdict::infeasible(mode, Witness::StartUnreachable(i)));
    }
    eliminated.reverse();
    let mut v = Verdict::feasible(mode);
    v.ordering = Some(eliminated);
    Ok(v)
}

/// Literal subset-by-subset check of the unrestricted-calls condition. Kept
/// independent of the greedy route; returns no ordering.
pub fn check_unrestricted_bruteforce(task: &SummoningTask) -> Result<Verdict, FeasibilityError> {
    check_unrestricted_bruteforce_with(task, Exec::default())
}

pub fn check_unrestricted_bruteforce_with(task: &SummoningTask, exec: Exec) -> Result<Verdict, FeasibilityError> {
    require_standard(task)?;
    require_max(task, MAX_BRUTEFORCE_PAIRS)?;
    let mode = TaskMode::UnrestrictedCalls;
    let n = task.n();
    let subset_ok = |mask: u64| -> bool {
        let members: Vec<usize> = (1..=n).filter(|&i| mask & (1 << (i - 1)) != 0).collect();
        members
            .iter()
            .any(|&k| members.iter().all(|&i| task.leq(task.call(i), task.ret(k))))
    };
    let failing = exec.find_first(1u64 << n, |mask| mask != 0 && !subset_ok(mask));
    if let Some(mask) = failing {
        return Ok(Verdict::infeasible(mode, Witness::NoDominant(mask_to_indices(mask))));
    }
    if let Some(i) = first_unreachable(task) {
        return Ok(Verdict::infeasible(mode, Witness::StartUnreachable(i)));
    }
    Ok(Verdict::feasible(mode))
}

/// Decides an extended-geometry task: every return point is reachable from
/// `s`, and for every two pairs one of their call points reaches both return
/// points. A feasible verdict lists the empty diamonds, of which there can be
/// at most one.
pub fn check_extended(task: &SummoningTask) -> Result<Verdict, FeasibilityError> {
    if task.mode != TaskMode::ExtendedGeometry {
        return Err(FeasibilityError::WrongMode {
            expected: TaskMode::ExtendedGeometry,
            found: task.mode,
        });
    }
    let report = validate_as(task, TaskMode::ExtendedGeometry);
    if !report.ok() {
        return Err(FeasibilityError::InvalidTask(report));
    }
    let mode = TaskMode::ExtendedGeometry;
    for i in 1..=task.n() {
        for j in i + 1..=task.n() {
            let common = [i, j]
                .iter()
                .any(|&m| task.call_reaches(m, i) && task.call_reaches(m, j));
            if !common {
                return Ok(Verdict::infeasible(mode, Witness::NoCommonCall(i, j)));
            }
        }
    }
    if let Some(i) = first_unreachable(task) {
        return Ok(Verdict::infeasible(mode, Witness::StartUnreachable(i)));
    }
    let empty: Vec<usize> = (1..=task.n()).filter(|&i| !task.call_reaches(i, i)).collect();
    if empty.len() > 1 {
        return Err(FeasibilityError::CorollaryViolated(empty));
    }
    let mut v = Verdict::feasible(mode);
    v.empty_diamonds = empty;
    Ok(v)
}

/// Dispatches on the task's own mode.
pub fn check(task: &SummoningTask) -> Result<Verdict, FeasibilityError> {
    match task.mode {
        TaskMode::SingleCallGuaranteed => check_single_call(task),
        TaskMode::UnrestrictedCalls => check_unrestricted(task),
        TaskMode::ExtendedGeometry => check_extended(task),
    }
}

/// Chain order for an unrestricted-calls feasible task.
pub fn construct_ordering(task: &SummoningTask) -> Result<Vec<usize>, FeasibilityError> {
    let v = check_unrestricted(task)?;
    match (v.ordering, v.witness) {
        (Some(order), _) => Ok(order),
        (None, Some(w)) => Err(FeasibilityError::Infeasible(w)),
        (None, None) => unreachable!("infeasible verdict without witness"),
    }
}

/// `σ` is a permutation of `1..=N` and each `r_σ(j)` sees `c_σ(i)` for all `i <= j`.
pub fn ordering_is_valid(task: &SummoningTask, order: &[usize]) -> bool {
    let n = task.n();
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n + 1];
    for &k in order {
        if k == 0 || k > n || seen[k] {
            return false;
        }
        seen[k] = true;
    }
    order
        .iter()
        .enumerate()
        .all(|(j, &rj)| order[..=j].iter().all(|&ci| task.call_reaches(ci, rj)))
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Looks for a causal path from `s` visiting every (segment-shaped) diamond in
/// some order. Returns the first order, in lexicographic permutation order,
/// that admits one.
///
/// For a fixed order, arriving as early as possible at each segment is
/// optimal: arrival at the next segment is `max(window start, now + distance)`.
pub fn find_sequential_causal_path(task: &SummoningTask) -> Result<Option<Vec<usize>>, FeasibilityError> {
    require_standard(task)?;
    require_max(task, MAX_PATH_PAIRS)?;
    for i in 1..=task.n() {
        if !task.pair(i).is_degenerate(task.tol).expect("validated") {
            return Err(FeasibilityError::NonDegenerate(i));
        }
    }
    let mut order: Vec<usize> = (1..=task.n()).collect();
    loop {
        if route_is_causal(task, &order) {
            return Ok(Some(order));
        }
        if !next_permutation(&mut order) {
            return Ok(None);
        }
    }
}

pub fn exists_sequential_causal_path(task: &SummoningTask) -> Result<bool, FeasibilityError> {
    find_sequential_causal_path(task).map(|r| r.is_some())
}

fn route_is_causal(task: &SummoningTask, order: &[usize]) -> bool {
    let mut now = task.start.t;
    let mut here = &task.start;
    for &k in order {
        let seg = task.pair(k);
        let travel = here.spatial_dist(&seg.call).expect("validated");
        let arrival = f64::max(seg.call.t, now + travel);
        if arrival > seg.ret.t + task.tol {
            return false;
        }
        now = arrival;
        here = &seg.call;
    }
    true
}
