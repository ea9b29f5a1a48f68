//! Discrete-event simulation of the teleportation-chain protocol and of the
//! two-call protocol for extended geometries.
//!
//! The unknown state is an abstract token. Teleportation moves its lineage
//! onto the partner half of a pre-shared pair; the half is useless until every
//! piece of classical teleportation data along the chain is causally
//! available where it is reconstructed. Agents are pinned to the spatial
//! locations of their points and classical broadcasts travel at light speed.
//!
//! Each run is sequential and deterministic. Events are processed in
//! coordinate-time order; at equal times call-point decisions precede
//! reconstruction checks.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::exec::Exec;
use crate::feasibility::{self, check_extended, visibility_masks, FeasibilityError};
use crate::geometry::{causal_leq, SpacetimePoint};
use crate::task::{CallPattern, SummoningTask, TaskMode};

/// Largest task for which every call pattern is simulated.
pub const MAX_SWEEP_PAIRS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error("call index {0} is outside 1..={1}")]
    BadPattern(usize, usize),
    #[error("at most one call may be made in this protocol, pattern {0}")]
    TooManyCalls(CallPattern),
    #[error("protocol requires {0}")]
    Precondition(String),
    #[error("reconstruction at r_{index} lacks causally available classical data {missing}")]
    MissingClassicalData { index: usize, missing: String },
    #[error("no-cloning violated: {0}")]
    DoubleCustody(String),
    #[error("entangled pair {0} consumed twice")]
    PairReused(usize),
    #[error("quantum system sent from {from} to {to} faster than light")]
    Superluminal { from: SpacetimePoint, to: SpacetimePoint },
    #[error("event `{event}` cites broadcast {broadcast} outside its causal past")]
    AcausalLog { event: String, broadcast: String },
    #[error("run with calls {pattern} broke its contract: {detail}")]
    Contract { pattern: CallPattern, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntangledPair {
    /// 1-based position in the chain.
    pub id: usize,
    pub loc_a: Vec<f64>,
    pub loc_b: Vec<f64>,
    pub consumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Classical outcome of the Bell measurement at chain position `hop`
    /// (0 is the start point).
    TeleportData { hop: usize },
    /// A call was received at `c_index`.
    CallReceivedStop { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalBroadcast {
    pub origin: SpacetimePoint,
    pub payload: Payload,
    pub label: String,
}

/// Where the unknown state is. A single value at every instant.
#[derive(Debug, Clone, PartialEq)]
pub enum Custody {
    AtLocation(Vec<f64>),
    InTransitTo(SpacetimePoint),
    Returned(usize),
    Unreturned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustodyRecord {
    pub since: f64,
    pub custody: Custody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Receive,
    Teleport { pair: usize, to: String, emits: String },
    CallReceived { index: usize, emits: Option<String> },
    NoCall { index: usize },
    SendQuantum { pair: usize, to: usize },
    Reconstruct { index: usize },
    Return { index: usize },
    Suppress { index: usize },
    NoHandover { index: usize },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Receive => write!(f, "RECEIVE"),
            Action::Teleport { pair, to, emits } => write!(f, "TELEPORT pair={pair} to={to} emit={emits}"),
            Action::CallReceived { index, emits: Some(e) } => write!(f, "CALL c{index} emit={e}"),
            Action::CallReceived { index, emits: None } => write!(f, "CALL c{index}"),
            Action::NoCall { index } => write!(f, "NO_CALL c{index}"),
            Action::SendQuantum { pair, to } => write!(f, "SEND_QUANTUM pair={pair} to=r{to}"),
            Action::Reconstruct { index } => write!(f, "RECONSTRUCT r{index}"),
            Action::Return { index } => write!(f, "RETURN r{index}"),
            Action::Suppress { index } => write!(f, "SUPPRESS r{index}"),
            Action::NoHandover { index } => write!(f, "NO_HANDOVER r{index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub point: SpacetimePoint,
    pub action: Action,
    /// Indices into [`EventLog::broadcasts`].
    pub justifications: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub broadcasts: Vec<ClassicalBroadcast>,
}

impl EventLog {
    /// Every cited broadcast originates in the causal past of the citing event.
    pub fn check_causal(&self, tol: f64) -> Result<(), SimError> {
        for e in &self.events {
            for &b in &e.justifications {
                let bc = &self.broadcasts[b];
                if !causal_leq(&bc.origin, &e.point, tol).unwrap_or(false) {
                    return Err(SimError::AcausalLog {
                        event: e.action.to_string(),
                        broadcast: bc.label.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn fmt_coords(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    parts.join(",")
}

impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            let just: Vec<&str> = e.justifications.iter().map(|&b| self.broadcasts[b].label.as_str()).collect();
            writeln!(
                f,
                "t={} @({}) {} [{}]",
                e.point.t,
                fmt_coords(&e.point.x),
                e.action,
                just.join(",")
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    ReturnedAt(usize),
    /// Nothing handed over; the state may have been rebuilt at `r_i` anyway.
    NoReturn(Option<usize>),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::ReturnedAt(i) => write!(f, "ReturnedAt {i}"),
            Outcome::NoReturn(None) => write!(f, "NoReturn"),
            Outcome::NoReturn(Some(i)) => write!(f, "NoReturn (ReconstructedAt r{i})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolPlan {
    pub task: SummoningTask,
    /// Chain order `σ(1), …, σ(N)`.
    pub ordering: Vec<usize>,
    /// Pair `k` links chain position `k - 1` (0 being `s`) to position `k`.
    pub pairs: Vec<EntangledPair>,
}

impl ProtocolPlan {
    fn position_point(&self, k: usize) -> &SpacetimePoint {
        if k == 0 {
            &self.task.start
        } else {
            self.task.call(self.ordering[k - 1])
        }
    }

    fn position_label(&self, k: usize) -> String {
        if k == 0 {
            "s".to_string()
        } else {
            format!("c{}", self.ordering[k - 1])
        }
    }
}

/// Lays out the chain: ordering from the greedy construction and one
/// maximally entangled pair between each consecutive pair of locations.
pub fn plan_chain_protocol(task: &SummoningTask) -> Result<ProtocolPlan, SimError> {
    let ordering = feasibility::construct_ordering(task)?;
    let mut plan = ProtocolPlan {
        task: task.clone(),
        ordering,
        pairs: Vec::with_capacity(task.n()),
    };
    for k in 1..=task.n() {
        plan.pairs.push(EntangledPair {
            id: k,
            loc_a: plan.position_point(k - 1).x.clone(),
            loc_b: plan.position_point(k).x.clone(),
            consumed: false,
        });
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub pattern: CallPattern,
    pub outcome: Outcome,
    pub log: EventLog,
    pub custody: Vec<CustodyRecord>,
    pub pairs: Vec<EntangledPair>,
}

// ---------------------------------------------------------------------------
// engine

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Start,
    Decide(usize),
    Respond(usize),
}

#[derive(Debug)]
struct Scheduled {
    t: f64,
    prio: u8,
    seq: usize,
    kind: Kind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.prio.cmp(&self.prio))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Scheduled>,
    seq: usize,
}

impl Queue {
    fn push(&mut self, t: f64, prio: u8, kind: Kind) {
        self.heap.push(Scheduled {
            t,
            prio,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop()
    }
}

/// State of the chain half held at chain position `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Half {
    AtCall,
    Consumed,
    /// Sent towards chain position's own or another return point (pair index).
    Sent(usize),
    Rebuilt { at: usize, returned: bool },
}

struct Sim<'a> {
    task: &'a SummoningTask,
    log: EventLog,
    custody: Vec<CustodyRecord>,
    pairs: Vec<EntangledPair>,
    /// `hops[k]`: the Bell measurement at chain position `k` has happened.
    hops: Vec<bool>,
    /// `halves[k]` for chain positions `1..=n`; index 0 unused.
    halves: Vec<Half>,
    received: bool,
    returned: Option<usize>,
    rebuilt_unreturned: Option<usize>,
}

impl<'a> Sim<'a> {
    fn new(task: &'a SummoningTask, pairs: Vec<EntangledPair>, chain_len: usize) -> Self {
        Sim {
            task,
            log: EventLog::default(),
            custody: Vec::new(),
            pairs,
            hops: vec![false; chain_len],
            halves: vec![Half::AtCall; chain_len + 1],
            received: false,
            returned: None,
            rebuilt_unreturned: None,
        }
    }

    fn broadcast(&mut self, origin: &SpacetimePoint, payload: Payload, label: String) -> String {
        self.log.broadcasts.push(ClassicalBroadcast {
            origin: origin.clone(),
            payload,
            label: label.clone(),
        });
        label
    }

    fn event(&mut self, point: &SpacetimePoint, action: Action, justifications: Vec<usize>) {
        self.log.events.push(Event {
            point: point.clone(),
            action,
            justifications,
        });
    }

    fn visible(&self, at: &SpacetimePoint, want: impl Fn(&Payload) -> bool) -> Vec<usize> {
        self.log
            .broadcasts
            .iter()
            .enumerate()
            .filter(|(_, b)| want(&b.payload) && self.task.leq(&b.origin, at))
            .map(|(k, _)| k)
            .collect()
    }

    fn consume(&mut self, pair: usize) -> Result<(), SimError> {
        let p = &mut self.pairs[pair - 1];
        if p.consumed {
            return Err(SimError::PairReused(pair));
        }
        p.consumed = true;
        Ok(())
    }

    fn send(&self, from: &SpacetimePoint, to: &SpacetimePoint) -> Result<(), SimError> {
        if !self.task.leq(from, to) {
            return Err(SimError::Superluminal {
                from: from.clone(),
                to: to.clone(),
            });
        }
        Ok(())
    }

    /// Chain position currently carrying the lineage: the length of the
    /// completed prefix of Bell measurements.
    fn lineage(&self) -> usize {
        self.hops.iter().take_while(|&&h| h).count()
    }

    fn current_custody(&self, position_loc: impl Fn(usize) -> Vec<f64>) -> Option<Custody> {
        if !self.received {
            return None;
        }
        let m = self.lineage();
        if m == 0 {
            return Some(Custody::AtLocation(self.task.start.x.clone()));
        }
        Some(match self.halves[m] {
            Half::AtCall | Half::Consumed => Custody::AtLocation(position_loc(m)),
            Half::Sent(to) => Custody::InTransitTo(self.task.ret(to).clone()),
            Half::Rebuilt { at, returned: true } => Custody::Returned(at),
            Half::Rebuilt { .. } => Custody::Unreturned,
        })
    }

    fn record_custody(&mut self, t: f64, position_loc: impl Fn(usize) -> Vec<f64>) {
        if let Some(c) = self.current_custody(position_loc) {
            if self.custody.last().map(|r| &r.custody) != Some(&c) {
                self.custody.push(CustodyRecord { since: t, custody: c });
            }
        }
    }

    /// Rebuilds the state carried by chain half `k` at `r_at`.
    fn rebuild(&mut self, k: usize, at: usize, hand_over: bool) -> Result<(), SimError> {
        if self.lineage() != k {
            return Err(SimError::DoubleCustody(format!(
                "r{at} rebuilt from half {k} while the state travels with half {}",
                self.lineage()
            )));
        }
        if hand_over {
            if let Some(prev) = self.returned {
                return Err(SimError::DoubleCustody(format!("returned at r{prev} and r{at}")));
            }
            self.returned = Some(at);
        } else {
            self.rebuilt_unreturned = Some(at);
        }
        self.halves[k] = Half::Rebuilt { at, returned: hand_over };
        Ok(())
    }

    fn finish(self, pattern: CallPattern) -> SimulationRun {
        let outcome = match self.returned {
            Some(i) => Outcome::ReturnedAt(i),
            None => Outcome::NoReturn(self.rebuilt_unreturned),
        };
        let mut log = self.log;
        // stable sort keeps processing order within equal times
        let mut order: Vec<usize> = (0..log.events.len()).collect();
        order.sort_by(|&a, &b| log.events[a].point.t.total_cmp(&log.events[b].point.t));
        log.events = order.into_iter().map(|k| log.events[k].clone()).collect();
        SimulationRun {
            pattern,
            outcome,
            log,
            custody: self.custody,
            pairs: self.pairs,
        }
    }
}

fn check_pattern(pattern: CallPattern, n: usize) -> Result<(), SimError> {
    if pattern.max_index() > n {
        return Err(SimError::BadPattern(pattern.max_index(), n));
    }
    Ok(())
}

/// Runs the teleportation chain for one call pattern.
///
/// The agent at `c_σ(k)` acts on its local call only: when called it
/// broadcasts a stop and sends its half to `r_σ(k)`; otherwise it teleports
/// onward through pair `k + 1` and broadcasts the classical data. The last
/// agent sends its half to `r_σ(N)` either way. A return point hands the state
/// over only if no earlier stop is visible there, so with any calls the state
/// comes out at the first called chain position.
pub fn simulate(plan: &ProtocolPlan, pattern: CallPattern) -> Result<SimulationRun, SimError> {
    let task = &plan.task;
    let n = task.n();
    check_pattern(pattern, n)?;
    let mut sim = Sim::new(task, plan.pairs.clone(), n);
    let loc = |m: usize| plan.position_point(m).x.clone();

    let mut queue = Queue::default();
    queue.push(task.start.t, 0, Kind::Start);
    for k in 1..=n {
        queue.push(plan.position_point(k).t, 0, Kind::Decide(k));
    }

    while let Some(item) = queue.pop() {
        match item.kind {
            Kind::Start => {
                sim.received = true;
                sim.event(&task.start, Action::Receive, vec![]);
                sim.consume(1)?;
                sim.hops[0] = true;
                let emits = sim.broadcast(&task.start, Payload::TeleportData { hop: 0 }, "TD(s)".into());
                sim.event(
                    &task.start,
                    Action::Teleport {
                        pair: 1,
                        to: plan.position_label(1),
                        emits,
                    },
                    vec![],
                );
            }
            Kind::Decide(k) => {
                let idx = plan.ordering[k - 1];
                let here = task.call(idx);
                if pattern.contains(idx) {
                    let emits = sim.broadcast(here, Payload::CallReceivedStop { index: idx }, format!("STOP(c{idx})"));
                    sim.event(here, Action::CallReceived { index: idx, emits: Some(emits) }, vec![]);
                    sim.send(here, task.ret(idx))?;
                    sim.halves[k] = Half::Sent(idx);
                    sim.event(here, Action::SendQuantum { pair: k, to: idx }, vec![]);
                    queue.push(task.ret(idx).t, 1, Kind::Respond(k));
                } else {
                    sim.event(here, Action::NoCall { index: idx }, vec![]);
                    if k < n {
                        sim.consume(k + 1)?;
                        sim.hops[k] = true;
                        sim.halves[k] = Half::Consumed;
                        let emits = sim.broadcast(here, Payload::TeleportData { hop: k }, format!("TD(c{idx})"));
                        sim.event(
                            here,
                            Action::Teleport {
                                pair: k + 1,
                                to: plan.position_label(k + 1),
                                emits,
                            },
                            vec![],
                        );
                    } else {
                        sim.send(here, task.ret(idx))?;
                        sim.halves[k] = Half::Sent(idx);
                        sim.event(here, Action::SendQuantum { pair: k, to: idx }, vec![]);
                        queue.push(task.ret(idx).t, 1, Kind::Respond(k));
                    }
                }
            }
            Kind::Respond(k) => {
                let idx = plan.ordering[k - 1];
                let at = task.ret(idx);
                let earlier: Vec<usize> = plan.ordering[..k - 1].to_vec();
                let stops = sim.visible(at, |p| matches!(p, Payload::CallReceivedStop { index } if earlier.contains(index)));
                if !stops.is_empty() {
                    sim.event(at, Action::Suppress { index: idx }, stops);
                } else {
                    let data = sim.visible(at, |p| matches!(p, Payload::TeleportData { hop } if *hop < k));
                    if data.len() < k {
                        let seen: Vec<usize> = data
                            .iter()
                            .filter_map(|&b| match sim.log.broadcasts[b].payload {
                                Payload::TeleportData { hop } => Some(hop),
                                _ => None,
                            })
                            .collect();
                        let missing: Vec<String> =
                            (0..k).filter(|h| !seen.contains(h)).map(|h| format!("TD({})", plan.position_label(h))).collect();
                        return Err(SimError::MissingClassicalData {
                            index: idx,
                            missing: missing.join(","),
                        });
                    }
                    let hand_over = pattern.contains(idx);
                    sim.rebuild(k, idx, hand_over)?;
                    sim.event(at, Action::Reconstruct { index: idx }, data.clone());
                    if hand_over {
                        sim.event(at, Action::Return { index: idx }, data);
                    }
                }
            }
        }
        sim.record_custody(item.t, loc);
    }

    let run = sim.finish(pattern);
    verify_chain_run(plan, &run)?;
    Ok(run)
}

/// Mechanical checks applied to every chain run: causal log, single return,
/// resource discipline and the first-called-position contract.
pub fn verify_chain_run(plan: &ProtocolPlan, run: &SimulationRun) -> Result<(), SimError> {
    let task = &plan.task;
    run.log.check_causal(task.tol)?;
    verify_single_return(run)?;

    // hop k's data exists iff pair k + 1 was consumed
    for k in 0..task.n() {
        let has_data = run
            .log
            .broadcasts
            .iter()
            .any(|b| b.payload == Payload::TeleportData { hop: k });
        if has_data != run.pairs[k].consumed {
            return Err(SimError::Contract {
                pattern: run.pattern,
                detail: format!("teleport data of hop {k} disagrees with consumption of pair {}", k + 1),
            });
        }
    }

    let expected = match plan.ordering.iter().find(|&&i| run.pattern.contains(i)) {
        Some(&first) => Outcome::ReturnedAt(first),
        None => Outcome::NoReturn(plan.ordering.last().copied()),
    };
    if run.outcome != expected {
        return Err(SimError::Contract {
            pattern: run.pattern,
            detail: format!("expected {expected}, got {}", run.outcome),
        });
    }
    Ok(())
}

fn verify_single_return(run: &SimulationRun) -> Result<(), SimError> {
    let returns = run
        .log
        .events
        .iter()
        .filter(|e| matches!(e.action, Action::Return { .. }))
        .count();
    let custody_returns = run
        .custody
        .iter()
        .filter(|r| matches!(r.custody, Custody::Returned(_)))
        .count();
    if returns > 1 || custody_returns > 1 {
        return Err(SimError::DoubleCustody(format!("{returns} returns in one run")));
    }
    match run.outcome {
        Outcome::ReturnedAt(i) if !run.pattern.contains(i) => Err(SimError::Contract {
            pattern: run.pattern,
            detail: format!("returned at uncalled r{i}"),
        }),
        Outcome::NoReturn(_) if !run.pattern.is_empty() && returns == 0 => Err(SimError::Contract {
            pattern: run.pattern,
            detail: "calls were made but nothing was returned".into(),
        }),
        Outcome::ReturnedAt(_) if run.pattern.is_empty() => Err(SimError::Contract {
            pattern: run.pattern,
            detail: "returned without any call".into(),
        }),
        _ => Ok(()),
    }
}

/// Outcomes of a plan for every call pattern, in ascending bitmask order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternOutcomes {
    pub n: usize,
    pub outcomes: Vec<(CallPattern, Outcome)>,
}

impl PatternOutcomes {
    pub fn get(&self, pattern: CallPattern) -> Option<Outcome> {
        self.outcomes.iter().find(|(p, _)| *p == pattern).map(|(_, o)| *o)
    }

    pub fn returns(&self) -> usize {
        self.outcomes.iter().filter(|(_, o)| matches!(o, Outcome::ReturnedAt(_))).count()
    }
}

pub fn simulate_all_patterns(plan: &ProtocolPlan) -> Result<PatternOutcomes, SimError> {
    simulate_all_patterns_with(plan, Exec::default())
}

pub fn simulate_all_patterns_with(plan: &ProtocolPlan, exec: Exec) -> Result<PatternOutcomes, SimError> {
    let n = plan.task.n();
    if n > MAX_SWEEP_PAIRS {
        return Err(SimError::Feasibility(FeasibilityError::TooManyPairs {
            found: n,
            limit: MAX_SWEEP_PAIRS,
        }));
    }
    let runs = exec.map_range(1u64 << n, |bits| {
        let pattern = CallPattern::from_bits(bits);
        simulate(plan, pattern).map(|run| (pattern, run.outcome))
    });
    let outcomes = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(PatternOutcomes { n, outcomes })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignallingViolation {
    /// Return point whose decision depends on an invisible call.
    pub index: usize,
    pub first: CallPattern,
    pub second: CallPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AuditReport {
    pub violations: Vec<SignallingViolation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "audit: PASS");
        }
        write!(f, "audit: FAIL")?;
        for v in &self.violations {
            write!(
                f,
                "\n  r{}: calls {} and {} agree on visible calls but decide differently",
                v.index, v.first, v.second
            )?;
        }
        Ok(())
    }
}

/// Checks that the return-or-not decision at each `r_i` is a function of the
/// calls visible there.
pub fn audit_no_signalling(results: &PatternOutcomes, task: &SummoningTask) -> AuditReport {
    let sees = visibility_masks(task);
    let mut report = AuditReport::default();
    for i in 1..=task.n() {
        let mut classes: HashMap<u64, (CallPattern, bool)> = HashMap::new();
        for &(pattern, outcome) in &results.outcomes {
            let decision = outcome == Outcome::ReturnedAt(i);
            let key = pattern.bits() & sees[i - 1];
            match classes.get(&key) {
                Some(&(first, d)) if d != decision => report.violations.push(SignallingViolation {
                    index: i,
                    first,
                    second: pattern,
                }),
                Some(_) => {}
                None => {
                    classes.insert(key, (pattern, decision));
                }
            }
        }
    }
    report
}

/// The two-call protocol for an extended-geometry task with two pairs.
///
/// One entangled pair links `s` with the call point `c_a` that reaches both
/// return points (pair 1 when it qualifies). A call at `c_a` sends the half to
/// `r_a` and broadcasts a stop; otherwise the half goes to `r_b`, where the
/// state is rebuilt and handed over when `c_b` was called.
pub fn simulate_two_call_extended(task: &SummoningTask, pattern: CallPattern) -> Result<SimulationRun, SimError> {
    if task.mode != TaskMode::ExtendedGeometry {
        return Err(SimError::Feasibility(FeasibilityError::WrongMode {
            expected: TaskMode::ExtendedGeometry,
            found: task.mode,
        }));
    }
    if task.n() != 2 {
        return Err(SimError::Precondition(format!("exactly two pairs, task has {}", task.n())));
    }
    check_pattern(pattern, 2)?;
    if pattern.len() > 1 {
        return Err(SimError::TooManyCalls(pattern));
    }
    let verdict = check_extended(task)?;
    if !verdict.feasible {
        return Err(SimError::Feasibility(FeasibilityError::Infeasible(
            verdict.witness.expect("infeasible verdict has a witness"),
        )));
    }
    let hub = [1, 2]
        .into_iter()
        .find(|&m| task.call_reaches(m, 1) && task.call_reaches(m, 2))
        .ok_or_else(|| SimError::Precondition("a call point reaching both return points".into()))?;
    let other = 3 - hub;

    let pairs = vec![EntangledPair {
        id: 1,
        loc_a: task.start.x.clone(),
        loc_b: task.call(hub).x.clone(),
        consumed: false,
    }];
    let mut sim = Sim::new(task, pairs, 1);
    let loc = |m: usize| if m == 0 { task.start.x.clone() } else { task.call(hub).x.clone() };

    let mut queue = Queue::default();
    queue.push(task.start.t, 0, Kind::Start);
    queue.push(task.call(hub).t, 0, Kind::Decide(hub));
    if pattern.contains(other) {
        queue.push(task.call(other).t, 0, Kind::Decide(other));
    }
    queue.push(task.ret(hub).t, 1, Kind::Respond(hub));
    queue.push(task.ret(other).t, 1, Kind::Respond(other));

    while let Some(item) = queue.pop() {
        match item.kind {
            Kind::Start => {
                sim.received = true;
                sim.event(&task.start, Action::Receive, vec![]);
                sim.consume(1)?;
                sim.hops[0] = true;
                let emits = sim.broadcast(&task.start, Payload::TeleportData { hop: 0 }, "TD(s)".into());
                sim.event(
                    &task.start,
                    Action::Teleport {
                        pair: 1,
                        to: format!("c{hub}"),
                        emits,
                    },
                    vec![],
                );
            }
            Kind::Decide(i) if i == hub => {
                let here = task.call(hub);
                let target = if pattern.contains(hub) {
                    let emits = sim.broadcast(here, Payload::CallReceivedStop { index: hub }, format!("STOP(c{hub})"));
                    sim.event(here, Action::CallReceived { index: hub, emits: Some(emits) }, vec![]);
                    hub
                } else {
                    sim.event(here, Action::NoCall { index: hub }, vec![]);
                    other
                };
                sim.send(here, task.ret(target))?;
                sim.halves[1] = Half::Sent(target);
                sim.event(here, Action::SendQuantum { pair: 1, to: target }, vec![]);
            }
            Kind::Decide(i) => {
                // nobody at c_b can act on this call in time
                sim.event(task.call(i), Action::CallReceived { index: i, emits: None }, vec![]);
            }
            Kind::Respond(i) => {
                let at = task.ret(i);
                if i == other {
                    let stops = sim.visible(at, |p| matches!(p, Payload::CallReceivedStop { .. }));
                    if !stops.is_empty() {
                        sim.event(at, Action::NoHandover { index: i }, stops);
                        sim.record_custody(item.t, loc);
                        continue;
                    }
                }
                if sim.halves[1] != Half::Sent(i) {
                    sim.record_custody(item.t, loc);
                    continue;
                }
                let data = sim.visible(at, |p| matches!(p, Payload::TeleportData { hop: 0 }));
                if data.is_empty() {
                    return Err(SimError::MissingClassicalData {
                        index: i,
                        missing: "TD(s)".into(),
                    });
                }
                let hand_over = pattern.contains(i);
                sim.rebuild(1, i, hand_over)?;
                sim.event(at, Action::Reconstruct { index: i }, data.clone());
                if hand_over {
                    sim.event(at, Action::Return { index: i }, data);
                }
            }
        }
        sim.record_custody(item.t, loc);
    }

    let run = sim.finish(pattern);
    run.log.check_causal(task.tol)?;
    verify_single_return(&run)?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn pat(ix: &[usize]) -> CallPattern {
        CallPattern::from_indices(ix.iter().copied()).unwrap()
    }

    #[test]
    fn chain_plan_layout() {
        let plan = plan_chain_protocol(&fixtures::chain(3)).unwrap();
        assert_eq!(plan.ordering, vec![1, 2, 3]);
        assert_eq!(plan.pairs.len(), 3);
        for p in &plan.pairs {
            assert_eq!((p.loc_a.as_slice(), p.loc_b.as_slice()), (&[0.0][..], &[0.0][..]));
        }
        let plan = plan_chain_protocol(&fixtures::nested()).unwrap();
        assert_eq!(plan.ordering, vec![2, 1]);
        assert_eq!(plan.pairs.len(), 2);
        assert!(matches!(
            plan_chain_protocol(&fixtures::cyclic_triangle()),
            Err(SimError::Feasibility(FeasibilityError::Infeasible(_)))
        ));
    }

    #[test]
    fn chain_runs() {
        let plan = plan_chain_protocol(&fixtures::chain(3)).unwrap();
        assert_eq!(simulate(&plan, pat(&[2])).unwrap().outcome, Outcome::ReturnedAt(2));
        assert_eq!(simulate(&plan, pat(&[1, 3])).unwrap().outcome, Outcome::ReturnedAt(1));
        let empty = simulate(&plan, CallPattern::empty()).unwrap();
        assert_eq!(empty.outcome, Outcome::NoReturn(Some(3)));
        assert_eq!(empty.custody.last().unwrap().custody, Custody::Unreturned);
        assert!(matches!(simulate(&plan, pat(&[4])), Err(SimError::BadPattern(4, 3))));
    }

    #[test]
    fn chain_log_rendering() {
        let plan = plan_chain_protocol(&fixtures::chain(3)).unwrap();
        let run = simulate(&plan, pat(&[2])).unwrap();
        let text = run.log.to_string();
        let expected = "\
t=0 @(0) RECEIVE []
t=0 @(0) TELEPORT pair=1 to=c1 emit=TD(s) []
t=1 @(0) NO_CALL c1 []
t=1 @(0) TELEPORT pair=2 to=c2 emit=TD(c1) []
t=2 @(0) CALL c2 emit=STOP(c2) []
t=2 @(0) SEND_QUANTUM pair=2 to=r2 []
t=2.5 @(0) RECONSTRUCT r2 [TD(s),TD(c1)]
t=2.5 @(0) RETURN r2 [TD(s),TD(c1)]
t=3 @(0) NO_CALL c3 []
t=3 @(0) SEND_QUANTUM pair=3 to=r3 []
t=3.5 @(0) SUPPRESS r3 [STOP(c2)]
";
        assert_eq!(text, expected);
        let kinds: Vec<&Custody> = run.custody.iter().map(|r| &r.custody).collect();
        assert_eq!(
            kinds,
            vec![
                &Custody::AtLocation(vec![0.0]),
                &Custody::InTransitTo(SpacetimePoint::new(2.5, vec![0.0])),
                &Custody::Returned(2),
            ]
        );
    }

    #[test]
    fn sweep_and_audit() {
        let task = fixtures::chain(3);
        let plan = plan_chain_protocol(&task).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let all = simulate_all_patterns_with(&plan, exec).unwrap();
            assert_eq!(all.outcomes.len(), 8);
            assert_eq!(all.returns(), 7);
            assert!(audit_no_signalling(&all, &task).passed());
        }

        let nested = fixtures::nested();
        let all = simulate_all_patterns(&plan_chain_protocol(&nested).unwrap()).unwrap();
        assert_eq!(all.outcomes.len(), 4);
        assert_eq!(all.get(pat(&[1, 2])), Some(Outcome::ReturnedAt(2)));

        let one = fixtures::chain(1);
        let all = simulate_all_patterns(&plan_chain_protocol(&one).unwrap()).unwrap();
        assert_eq!(
            all.outcomes,
            vec![
                (CallPattern::empty(), Outcome::NoReturn(Some(1))),
                (pat(&[1]), Outcome::ReturnedAt(1))
            ]
        );
        assert!(audit_no_signalling(&all, &one).passed());
    }

    #[test]
    fn audit_catches_signalling() {
        // r1 only sees c1 on the chain, so its decision cannot depend on c2
        let task = fixtures::chain(2);
        let forged = PatternOutcomes {
            n: 2,
            outcomes: vec![
                (CallPattern::empty(), Outcome::NoReturn(None)),
                (pat(&[1]), Outcome::ReturnedAt(1)),
                (pat(&[2]), Outcome::ReturnedAt(2)),
                (pat(&[1, 2]), Outcome::ReturnedAt(2)),
            ],
        };
        let report = audit_no_signalling(&forged, &task);
        assert!(!report.passed());
        assert_eq!(
            report.violations[0],
            SignallingViolation {
                index: 1,
                first: pat(&[1]),
                second: pat(&[1, 2])
            }
        );
        assert!(report.to_string().starts_with("audit: FAIL"));
    }

    #[test]
    fn acausal_citation_is_caught() {
        let mut log = EventLog::default();
        log.broadcasts.push(ClassicalBroadcast {
            origin: SpacetimePoint::new(5.0, vec![0.0]),
            payload: Payload::TeleportData { hop: 0 },
            label: "TD(s)".into(),
        });
        log.events.push(Event {
            point: SpacetimePoint::new(1.0, vec![0.0]),
            action: Action::Reconstruct { index: 1 },
            justifications: vec![0],
        });
        assert!(matches!(log.check_causal(1e-9), Err(SimError::AcausalLog { .. })));
    }

    #[test]
    fn broken_ordering_is_detected() {
        // reversing the chain leaves r1 without c2's data
        let mut plan = plan_chain_protocol(&fixtures::chain(2)).unwrap();
        plan.ordering = vec![2, 1];
        let err = simulate(&plan, pat(&[1])).unwrap_err();
        assert!(matches!(err, SimError::MissingClassicalData { index: 1, .. }), "{err}");
    }

    #[test]
    fn two_call_extended() {
        let task = fixtures::extended();
        let run = simulate_two_call_extended(&task, pat(&[1])).unwrap();
        assert_eq!(run.outcome, Outcome::ReturnedAt(1));
        assert!(run
            .log
            .events
            .iter()
            .any(|e| e.action == Action::NoHandover { index: 2 }));
        assert_eq!(simulate_two_call_extended(&task, pat(&[2])).unwrap().outcome, Outcome::ReturnedAt(2));
        assert_eq!(
            simulate_two_call_extended(&task, CallPattern::empty()).unwrap().outcome,
            Outcome::NoReturn(Some(2))
        );
        assert!(matches!(
            simulate_two_call_extended(&task, pat(&[1, 2])),
            Err(SimError::TooManyCalls(_))
        ));
        assert!(simulate_two_call_extended(&fixtures::extended_unreachable(), pat(&[1])).is_err());
        assert!(simulate_two_call_extended(&fixtures::chain(2), pat(&[1])).is_err());
    }

    #[test]
    fn two_call_relabels_hub() {
        // swap the pairs: the hub is now pair 2
        let mut task = fixtures::extended();
        task.pairs.swap(0, 1);
        assert_eq!(simulate_two_call_extended(&task, pat(&[2])).unwrap().outcome, Outcome::ReturnedAt(2));
        assert_eq!(simulate_two_call_extended(&task, pat(&[1])).unwrap().outcome, Outcome::ReturnedAt(1));
        assert_eq!(
            simulate_two_call_extended(&task, CallPattern::empty()).unwrap().outcome,
            Outcome::NoReturn(Some(1))
        );
    }
}
