//! Exhaustive search over deterministic causal response strategies, and the
//! parity certificate that rules them out for tasks with no dominant element.
//!
//! A strategy fixes, for every return point `r_i`, a decision table over the
//! subsets of calls visible at `r_i` (the `c_j` with `c_j <= r_i`). Depending
//! only on visible calls, every strategy is no-signalling by construction.

use std::fmt;

use thiserror::Error;

use crate::exec::Exec;
use crate::feasibility::{fmt_set, visibility_masks, FeasibilityError};
use crate::protocol::{Outcome, PatternOutcomes};
use crate::task::{validate_as, CallPattern, SummoningTask, TaskMode};

/// Default bound on the number of strategies enumerated.
pub const DEFAULT_CAP: u64 = 1 << 24;
/// Decision tables are packed into a `u64`.
pub const MAX_VISIBLE: usize = 6;
/// Validity is checked over all `2^N` call patterns.
pub const MAX_ORACLE_PAIRS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error("strategy space has 2^{log2_size} elements, over the cap of {cap}")]
    CapExceeded { log2_size: u64, cap: u64 },
    #[error("malformed strategy: {0}")]
    Malformed(String),
    #[error("r_{0} sees {1} call points; decision tables support at most {MAX_VISIBLE}")]
    TableTooWide(usize, usize),
    #[error("subset is not a witness: r_{0} sees every call point in it")]
    NotAWitness(usize),
    #[error("bad subset: {0}")]
    BadSubset(String),
}

/// `{j : c_j <= r_i}`, ascending.
pub fn visible_set(task: &SummoningTask, i: usize) -> Vec<usize> {
    (1..=task.n()).filter(|&j| task.call_reaches(j, i)).collect()
}

fn require_task(task: &SummoningTask) -> Result<(), OracleError> {
    let report = validate_as(task, TaskMode::UnrestrictedCalls);
    if !report.ok() {
        return Err(FeasibilityError::InvalidTask(report).into());
    }
    if task.n() > MAX_ORACLE_PAIRS {
        return Err(FeasibilityError::TooManyPairs {
            found: task.n(),
            limit: MAX_ORACLE_PAIRS,
        }
        .into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalStrategy {
    /// `visible[i - 1]`: call indices visible at `r_i`, ascending.
    pub visible: Vec<Vec<usize>>,
    /// `tables[i - 1]` bit `L` is the decision (1 = return) for the visible
    /// subset whose members are selected by the bits of `L` over `visible[i - 1]`.
    pub tables: Vec<u64>,
}

impl CausalStrategy {
    /// Local table index of `pattern` restricted to `visible[i - 1]`.
    fn local_index(&self, i: usize, pattern: CallPattern) -> u32 {
        self.visible[i - 1]
            .iter()
            .enumerate()
            .filter(|(_, &j)| pattern.contains(j))
            .fold(0u32, |acc, (p, _)| acc | 1 << p)
    }

    /// Whether `r_i` hands the state over when calls are made at `pattern`.
    pub fn returns_at(&self, i: usize, pattern: CallPattern) -> bool {
        self.tables[i - 1] >> self.local_index(i, pattern) & 1 == 1
    }

    /// Reads the strategy off the outcomes of every call pattern.
    pub fn induced(task: &SummoningTask, results: &PatternOutcomes) -> Result<Self, OracleError> {
        let visible: Vec<Vec<usize>> = (1..=task.n()).map(|i| visible_set(task, i)).collect();
        let mut tables = Vec::with_capacity(task.n());
        for (k, vis) in visible.iter().enumerate() {
            let i = k + 1;
            if vis.len() > MAX_VISIBLE {
                return Err(OracleError::TableTooWide(i, vis.len()));
            }
            let mut table = 0u64;
            for local in 0..1u64 << vis.len() {
                let pattern = CallPattern::from_indices(
                    vis.iter().enumerate().filter(|(p, _)| local >> p & 1 == 1).map(|(_, &j)| j),
                )
                .expect("indices in range");
                let outcome = results
                    .get(pattern)
                    .ok_or_else(|| OracleError::Malformed(format!("no outcome for calls {pattern}")))?;
                if outcome == Outcome::ReturnedAt(i) {
                    table |= 1 << local;
                }
            }
            tables.push(table);
        }
        Ok(CausalStrategy { visible, tables })
    }

    fn check_shape(&self, task: &SummoningTask) -> Result<(), OracleError> {
        if self.visible.len() != task.n() || self.tables.len() != task.n() {
            return Err(OracleError::Malformed(format!(
                "{} visible sets and {} tables for {} pairs",
                self.visible.len(),
                self.tables.len(),
                task.n()
            )));
        }
        for i in 1..=task.n() {
            let vis = &self.visible[i - 1];
            if *vis != visible_set(task, i) {
                return Err(OracleError::Malformed(format!("visible set of r_{i} does not match the task")));
            }
            if vis.len() > MAX_VISIBLE {
                return Err(OracleError::TableTooWide(i, vis.len()));
            }
            let width = 1u32 << vis.len();
            if width < 64 && self.tables[i - 1] >> width != 0 {
                return Err(OracleError::Malformed(format!("table of r_{i} has entries beyond 2^{}", vis.len())));
            }
        }
        Ok(())
    }
}

/// A strategy is valid when no call means no return anywhere, and any
/// non-empty set of calls gets exactly one return, at a called pair. A return
/// point outside the causal future of `s` can never hold the state, so its
/// table must be all-pass.
pub fn strategy_valid(strategy: &CausalStrategy, task: &SummoningTask) -> Result<bool, OracleError> {
    strategy.check_shape(task)?;
    Ok(is_valid_unchecked(strategy, task, &reachable_from_start(task)))
}

fn reachable_from_start(task: &SummoningTask) -> Vec<bool> {
    (1..=task.n()).map(|i| task.leq(&task.start, task.ret(i))).collect()
}

fn is_valid_unchecked(strategy: &CausalStrategy, task: &SummoningTask, reachable: &[bool]) -> bool {
    let n = task.n();
    if (0..n).any(|k| !reachable[k] && strategy.tables[k] != 0) {
        return false;
    }
    // empty pattern and singletons first: most strategies fail there
    let singletons = (0..n).map(|k| 1u64 << k);
    let rest = (1..1u64 << n).filter(|b| b.count_ones() > 1);
    std::iter::once(0u64).chain(singletons).chain(rest).all(|bits| {
        let pattern = CallPattern::from_bits(bits);
        let mut returner = None;
        for i in 1..=n {
            if strategy.returns_at(i, pattern) {
                if returner.is_some() {
                    return false;
                }
                returner = Some(i);
            }
        }
        match returner {
            None => pattern.is_empty(),
            Some(i) => pattern.contains(i),
        }
    })
}

/// The enumerable space of strategies for a task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategySpace {
    pub visible: Vec<Vec<usize>>,
    /// Table width `2^|visible(i)|` per return point.
    pub widths: Vec<u32>,
    pub size: u64,
}

impl StrategySpace {
    pub fn new(task: &SummoningTask, cap: u64) -> Result<Self, OracleError> {
        Self::over(task, &(1..=task.n()).collect::<Vec<_>>(), cap)
    }

    /// Strategies of the sub-task keeping only the pairs in `subset`; tables
    /// still indexed by full pair indices, with pairs outside `subset` fixed to
    /// never return and calls outside `subset` ignored.
    fn over(task: &SummoningTask, subset: &[usize], cap: u64) -> Result<Self, OracleError> {
        let mut visible = Vec::with_capacity(task.n());
        let mut widths = Vec::with_capacity(task.n());
        let mut log2_size = 0u64;
        for i in 1..=task.n() {
            if !subset.contains(&i) {
                visible.push(visible_set(task, i));
                widths.push(0);
                continue;
            }
            let vis: Vec<usize> = visible_set(task, i).into_iter().filter(|j| subset.contains(j)).collect();
            log2_size = log2_size.saturating_add(1u64 << vis.len().min(63));
            widths.push(if vis.len() <= MAX_VISIBLE { 1u32 << vis.len() } else { 0 });
            visible.push(vis);
        }
        if log2_size >= 64 || (1u64 << log2_size) > cap {
            return Err(OracleError::CapExceeded { log2_size, cap });
        }
        Ok(StrategySpace {
            visible,
            widths,
            size: 1u64 << log2_size,
        })
    }

    /// Strategy number `index`; table 1 holds the most significant bits, so
    /// increasing indices are lexicographic over `(f_1, …, f_N)`.
    pub fn get(&self, mut index: u64) -> CausalStrategy {
        let mut tables = vec![0u64; self.widths.len()];
        for k in (0..self.widths.len()).rev() {
            let w = self.widths[k];
            if w == 0 {
                continue;
            }
            let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            tables[k] = index & mask;
            index = if w == 64 { 0 } else { index >> w };
        }
        CausalStrategy {
            visible: self.visible.clone(),
            tables,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = CausalStrategy> + '_ {
        (0..self.size).map(move |k| self.get(k))
    }
}

pub fn enumerate_strategies(task: &SummoningTask, cap: u64) -> Result<StrategySpace, OracleError> {
    require_task(task)?;
    StrategySpace::new(task, cap)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub strategy: Option<CausalStrategy>,
    /// Strategies examined up to and including the match.
    pub checked: u64,
    pub space: u64,
}

pub fn exhaustive_search(task: &SummoningTask) -> Result<SearchResult, OracleError> {
    exhaustive_search_with(task, DEFAULT_CAP, Exec::default())
}

/// First valid strategy in enumeration order. Partitioned across threads by
/// index range; the answer does not depend on the partitioning.
pub fn exhaustive_search_with(task: &SummoningTask, cap: u64, exec: Exec) -> Result<SearchResult, OracleError> {
    let space = enumerate_strategies(task, cap)?;
    let reachable = reachable_from_start(task);
    let found = exec.find_first(space.size, |k| is_valid_unchecked(&space.get(k), task, &reachable));
    Ok(SearchResult {
        strategy: found.map(|k| space.get(k)),
        checked: found.map_or(space.size, |k| k + 1),
        space: space.size,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityEntry {
    pub index: usize,
    /// Smallest `j` in the subset with `c_j` invisible at `r_index`.
    pub partner: usize,
}

/// Counting argument against every causal strategy on a subset `M` without a
/// dominant element.
///
/// For each `i` in `M` some `c_j(i)` in `M` is invisible at `r_i`, so toggling
/// `j(i)` pairs the call patterns inside `M` without changing what `r_i` sees.
/// The number `Q_i` of patterns with a return at `r_i` is therefore even, and
/// so is their sum; a valid strategy needs the sum to be `2^|M| - 1`, which is
/// odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCertificate {
    pub subset: Vec<usize>,
    pub entries: Vec<ParityEntry>,
    pub required_total: u64,
    /// The toggle map is a fixed-point-free involution preserving each
    /// visible restriction, checked over all patterns in `M`.
    pub pairing_verified: bool,
    /// Strategies of the sub-task on `M` whose `Q_i` were tallied; `None`
    /// when the space is over the cap.
    pub strategies_checked: Option<u64>,
    /// Every tallied `Q_i` was even.
    pub counts_even: Option<bool>,
    pub contradiction: bool,
}

impl ParityCertificate {
    /// `Q_i` for each `i` in the subset under a concrete strategy.
    pub fn ledger(&self, strategy: &CausalStrategy) -> Vec<u64> {
        let mask = subset_mask(&self.subset);
        self.subset
            .iter()
            .map(|&i| {
                submasks(mask)
                    .filter(|&q| strategy.returns_at(i, CallPattern::from_bits(q)))
                    .count() as u64
            })
            .collect()
    }
}

fn subset_mask(subset: &[usize]) -> u64 {
    subset.iter().fold(0u64, |m, &i| m | 1 << (i - 1))
}

/// Every submask of `mask`, including 0 and `mask`.
fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

pub fn parity_certificate(task: &SummoningTask, subset: &[usize]) -> Result<ParityCertificate, OracleError> {
    parity_certificate_with(task, subset, DEFAULT_CAP, Exec::default())
}

pub fn parity_certificate_with(
    task: &SummoningTask,
    subset: &[usize],
    cap: u64,
    exec: Exec,
) -> Result<ParityCertificate, OracleError> {
    require_task(task)?;
    let mut m: Vec<usize> = subset.to_vec();
    m.sort_unstable();
    m.dedup();
    if m.is_empty() {
        return Err(OracleError::BadSubset("empty".into()));
    }
    if let Some(&bad) = m.iter().find(|&&i| i == 0 || i > task.n()) {
        return Err(OracleError::BadSubset(format!("index {bad} outside 1..={}", task.n())));
    }

    let mut entries = Vec::with_capacity(m.len());
    for &i in &m {
        let partner = m
            .iter()
            .copied()
            .find(|&j| !task.call_reaches(j, i))
            .ok_or(OracleError::NotAWitness(i))?;
        entries.push(ParityEntry { index: i, partner });
    }

    let sees = visibility_masks(task);
    let mask = subset_mask(&m);
    let pairing_verified = entries.iter().all(|e| {
        let toggle = 1u64 << (e.partner - 1);
        let vis = sees[e.index - 1];
        submasks(mask).all(|q| {
            let image = q ^ toggle;
            image != q && image & !mask == 0 && (image ^ toggle) == q && image & vis == q & vis
        })
    });

    let required_total = (1u64 << m.len()) - 1;
    let (strategies_checked, counts_even) = match StrategySpace::over(task, &m, cap) {
        Ok(space) => {
            let probe = ParityCertificate {
                subset: m.clone(),
                entries: entries.clone(),
                required_total,
                pairing_verified,
                strategies_checked: None,
                counts_even: None,
                contradiction: false,
            };
            let even = exec.all(space.size, |k| {
                let ledger = probe.ledger(&space.get(k));
                ledger.iter().all(|q| q % 2 == 0) && ledger.iter().sum::<u64>() != required_total
            });
            (Some(space.size), Some(even))
        }
        Err(OracleError::CapExceeded { .. }) => (None, None),
        Err(e) => return Err(e),
    };

    let contradiction = pairing_verified && required_total % 2 == 1 && counts_even != Some(false);
    Ok(ParityCertificate {
        subset: m,
        entries,
        required_total,
        pairing_verified,
        strategies_checked,
        counts_even,
        contradiction,
    })
}

impl fmt::Display for ParityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "parity certificate for M = {}", fmt_set(&self.subset))?;
        for e in &self.entries {
            writeln!(
                f,
                "  r{i}: c{j} not visible; Q <-> Q xor {{{j}}} fixes the view at r{i}, so Q_{i} is even",
                i = e.index,
                j = e.partner
            )?;
        }
        writeln!(
            f,
            "  pairing: {}",
            if self.pairing_verified { "verified" } else { "FAILED" }
        )?;
        match (self.strategies_checked, self.counts_even) {
            (Some(n), Some(true)) => writeln!(f, "  ledger: every Q_i even across all {n} strategies on M")?,
            (Some(n), Some(false)) => writeln!(f, "  ledger: odd Q_i found among {n} strategies on M")?,
            _ => writeln!(f, "  ledger: strategy space over the cap, not tallied")?,
        }
        let k = self.subset.len();
        writeln!(f, "  required total: 2^{k} - 1 = {} (odd)", self.required_total)?;
        if self.contradiction {
            write!(
                f,
                "  contradiction: a sum of even Q_i cannot equal {}",
                self.required_total
            )
        } else {
            write!(f, "  no contradiction established")
        }
    }
}
