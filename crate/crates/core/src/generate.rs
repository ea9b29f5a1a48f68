//! Seeded random tasks on an integer lattice.
//!
//! Integer coordinates keep every interval exact, so boundary cases (null
//! separations) occur often and are decided without rounding.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{CausalDiamond, SpacetimePoint};
use crate::task::{SummoningTask, TaskMode};

/// Shape of the generated tasks.
#[derive(Debug, Clone, Copy)]
pub struct TaskShape {
    pub dim: usize,
    pub pairs: usize,
    pub mode: TaskMode,
}

fn lattice_point<R: Rng>(rng: &mut R, t: std::ops::Range<i32>, dim: usize) -> SpacetimePoint {
    let t = rng.gen_range(t) as f64;
    let x = (0..dim).map(|_| rng.gen_range(-2..=2) as f64).collect::<Vec<_>>();
    SpacetimePoint::new(t, x)
}

/// A point in the closed future cone of `c` reached within `max_dt`.
fn future_of<R: Rng>(rng: &mut R, c: &SpacetimePoint, max_dt: i32) -> SpacetimePoint {
    let dt = rng.gen_range(0..=max_dt);
    // per-axis steps with sum of squares <= dt^2
    let mut budget = (dt * dt) as i64;
    let mut x = c.x.clone();
    for xk in x.iter_mut() {
        let reach = (budget as f64).sqrt().floor() as i32;
        let step = if reach > 0 { rng.gen_range(-reach..=reach) } else { 0 };
        budget -= (step as i64) * (step as i64);
        *xk += step as f64;
    }
    SpacetimePoint::new(c.t + dt as f64, x)
}

/// A task whose diamonds are all non-empty: `c` with t in 0..4, x in -2..=2,
/// `r` in the future cone of `c` within 4 time units, `s` with t in -6..0.
pub fn random_task<R: Rng>(rng: &mut R, shape: TaskShape) -> SummoningTask {
    let start = lattice_point(rng, -6..1, shape.dim);
    let pairs = (0..shape.pairs)
        .map(|_| {
            let c = lattice_point(rng, 0..5, shape.dim);
            let r = future_of(rng, &c, 4);
            CausalDiamond::new(c, r)
        })
        .collect();
    SummoningTask::new(shape.dim, start, pairs, shape.mode)
}

/// Deterministic batch: task `k` uses dimension `1 + k % max_dim` and
/// `1 + k % max_pairs` pairs.
pub fn random_tasks(seed: u64, count: usize, max_dim: usize, max_pairs: usize, mode: TaskMode) -> Vec<SummoningTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let shape = TaskShape {
                dim: 1 + k % max_dim,
                pairs: 1 + k % max_pairs,
                mode,
            };
            random_task(&mut rng, shape)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tasks_are_valid() {
        for task in random_tasks(7, 200, 3, 6, TaskMode::UnrestrictedCalls) {
            assert!(task.validate().ok(), "{task:?}");
            for d in &task.pairs {
                assert!(!d.is_empty(task.tol).unwrap());
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = random_tasks(1, 5, 2, 4, TaskMode::SingleCallGuaranteed);
        let b = random_tasks(1, 5, 2, 4, TaskMode::SingleCallGuaranteed);
        assert_eq!(a, b);
    }
}
