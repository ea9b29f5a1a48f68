//! Reference configurations with analytically derived coordinates.

use crate::geometry::{CausalDiamond, SpacetimePoint};
use crate::task::{SummoningTask, TaskMode};

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn p(t: f64, x: &[f64]) -> SpacetimePoint {
    SpacetimePoint::new(t, x.to_vec())
}

fn d(call: SpacetimePoint, ret: SpacetimePoint) -> CausalDiamond {
    CausalDiamond::new(call, ret)
}

/// 2+1 dimensions, calls at the vertices of an equilateral triangle of side 2,
/// each return point 1.2 above the midpoint of the edge towards the next
/// vertex. `r_i` sees `c_i` and `c_{i+1}` (distance 1) but not the opposite
/// vertex (distance sqrt 3). Every pair of diamonds is related, yet no return
/// point sees all three calls.
pub fn cyclic_triangle() -> SummoningTask {
    let c1 = [0.0, 0.0];
    let c2 = [2.0, 0.0];
    let c3 = [1.0, SQRT3];
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    SummoningTask::new(
        2,
        p(-2.0, &[1.0, SQRT3 / 3.0]),
        vec![
            d(p(0.0, &c1), p(1.2, &mid(c1, c2))),
            d(p(0.0, &c2), p(1.2, &mid(c2, c3))),
            d(p(0.0, &c3), p(1.2, &mid(c3, c1))),
        ],
        TaskMode::SingleCallGuaranteed,
    )
}

/// 2+1 dimensions, unit equilateral triangle, each return directly above its
/// call at t = 1.5. Every call reaches every return, but visiting all three
/// segments in sequence takes two unit hops.
pub fn all_dominant_triangle() -> SummoningTask {
    let locs = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866_025_4]];
    SummoningTask::new(
        2,
        p(-2.0, &[0.5, 0.2887]),
        locs.iter().map(|l| d(p(0.0, l), p(1.5, l))).collect(),
        TaskMode::UnrestrictedCalls,
    )
}

/// 1+1 dimensions, `c_i = (i, 0)`, `r_i = (i + 0.5, 0)`, `s` at the origin.
pub fn chain(n: usize) -> SummoningTask {
    SummoningTask::new(
        1,
        p(0.0, &[0.0]),
        (1..=n).map(|i| d(p(i as f64, &[0.0]), p(i as f64 + 0.5, &[0.0]))).collect(),
        TaskMode::UnrestrictedCalls,
    )
}

/// `D_2` sits inside `D_1`; either order works.
pub fn nested() -> SummoningTask {
    SummoningTask::new(
        1,
        p(-1.0, &[0.0]),
        vec![d(p(0.0, &[0.0]), p(10.0, &[0.0])), d(p(2.0, &[0.0]), p(4.0, &[0.0]))],
        TaskMode::UnrestrictedCalls,
    )
}

/// Two unit-height diamonds ten apart; the start point can reach both.
pub fn spacelike_pair() -> SummoningTask {
    SummoningTask::new(
        1,
        p(-20.0, &[5.0]),
        vec![d(p(0.0, &[0.0]), p(1.0, &[0.0])), d(p(0.0, &[10.0]), p(1.0, &[10.0]))],
        TaskMode::SingleCallGuaranteed,
    )
}

/// `D_2` is empty (`r_2` is spacelike to `c_2`) but `c_1` reaches both returns.
pub fn extended() -> SummoningTask {
    SummoningTask::new(
        1,
        p(0.0, &[0.0]),
        vec![d(p(1.0, &[0.0]), p(2.0, &[0.0])), d(p(1.0, &[4.0]), p(3.0, &[1.0]))],
        TaskMode::ExtendedGeometry,
    )
}

/// As [`extended`] with `r_2` moved out of reach of `c_1`.
pub fn extended_unreachable() -> SummoningTask {
    let mut t = extended();
    t.pairs[1].ret = p(3.0, &[9.0]);
    t
}

/// Chain of six: the strategy space is far beyond any practical cap.
pub fn big() -> SummoningTask {
    chain(6)
}

/// Every named fixture shipped as a file, keyed by file stem.
pub fn all() -> Vec<(&'static str, SummoningTask)> {
    vec![
        ("cyclic-triangle", cyclic_triangle()),
        ("all-dominant-triangle", all_dominant_triangle()),
        ("chain", chain(3)),
        ("chain2", chain(2)),
        ("chain5", chain(5)),
        ("nested", nested()),
        ("spacelike-pair", spacelike_pair()),
        ("extended", extended()),
        ("extended-unreachable", extended_unreachable()),
        ("big-task", big()),
    ]
}
