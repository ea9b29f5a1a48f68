//! Minkowski-space points, the closed causal order, and causal diamonds.
//!
//! Units have light speed 1. Coordinates are stored time-first and every
//! predicate works on squared intervals, so integer inputs are decided
//! exactly when `tol == 0`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance applied to both the time-orientation and interval tests.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("causal diamond is empty: return point is not in the causal future of the call point")]
    EmptyDiamond,
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// A point of (1 + d)-dimensional Minkowski space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: impl Into<Vec<f64>>) -> Self {
        Self { t, x: x.into() }
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &SpacetimePoint) -> Result<(), GeometryError> {
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Squared Euclidean distance between the spatial parts.
    pub fn spatial_dist2(&self, other: &SpacetimePoint) -> Result<f64, GeometryError> {
        self.check_dim(other)?;
        Ok(self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn spatial_dist(&self, other: &SpacetimePoint) -> Result<f64, GeometryError> {
        self.spatial_dist2(other).map(f64::sqrt)
    }
}

impl fmt::Display for SpacetimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, x=[", self.t)?;
        for (k, v) in self.x.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "])")
    }
}

/// Squared Minkowski interval `(t_a - t_b)^2 - |x_a - x_b|^2`.
///
/// Positive for timelike separation, zero on the light cone, negative for
/// spacelike separation.
pub fn interval2(a: &SpacetimePoint, b: &SpacetimePoint) -> Result<f64, GeometryError> {
    let dt = a.t - b.t;
    Ok(dt * dt - a.spatial_dist2(b)?)
}

/// `y <= x` in the closed causal order: `x` lies in the causal future of `y`
/// or coincides with it. Lightlike separation counts as causal.
pub fn causal_leq(y: &SpacetimePoint, x: &SpacetimePoint, tol: f64) -> Result<bool, GeometryError> {
    let i2 = interval2(x, y)?;
    Ok(x.t - y.t >= -tol && i2 >= -tol)
}

/// The set `{p : call <= p <= ret}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalDiamond {
    pub call: SpacetimePoint,
    #[serde(rename = "return")]
    pub ret: SpacetimePoint,
}

impl CausalDiamond {
    pub fn new(call: SpacetimePoint, ret: SpacetimePoint) -> Self {
        Self { call, ret }
    }

    /// True when the return point is not causally after the call point.
    pub fn is_empty(&self, tol: f64) -> Result<bool, GeometryError> {
        Ok(!causal_leq(&self.call, &self.ret, tol)?)
    }

    /// Call and return share a spatial location (a timelike segment).
    pub fn is_degenerate(&self, tol: f64) -> Result<bool, GeometryError> {
        Ok(self.call.spatial_dist2(&self.ret)? <= tol)
    }

    fn require_nonempty(&self, tol: f64) -> Result<(), GeometryError> {
        if self.is_empty(tol)? {
            return Err(GeometryError::EmptyDiamond);
        }
        Ok(())
    }
}

pub fn in_diamond(p: &SpacetimePoint, d: &CausalDiamond, tol: f64) -> Result<bool, GeometryError> {
    Ok(causal_leq(&d.call, p, tol)? && causal_leq(p, &d.ret, tol)?)
}

/// Whether some `x_i` in `di` and `x_j` in `dj` are causally comparable.
///
/// If `x_i >= x_j` then `r_i >= x_i >= x_j >= c_j`; conversely `r_i` and `c_j`
/// are themselves witnesses. So the existential reduces to two endpoint tests.
pub fn diamonds_causally_related(
    di: &CausalDiamond,
    dj: &CausalDiamond,
    tol: f64,
) -> Result<bool, GeometryError> {
    di.call.check_dim(&dj.call)?;
    di.require_nonempty(tol)?;
    dj.require_nonempty(tol)?;
    Ok(causal_leq(&dj.call, &di.ret, tol)? || causal_leq(&di.call, &dj.ret, tol)?)
}

/// Draws up to `n` points from the diamond by rejection inside its bounding
/// box. Degenerate (zero-volume) diamonds fall back to points on the segment
/// from call to return, which always lies inside. Both endpoints are included.
pub fn sample_diamond<R: Rng>(d: &CausalDiamond, n: usize, tol: f64, rng: &mut R) -> Vec<SpacetimePoint> {
    const ATTEMPTS: usize = 64;
    let mut out = Vec::with_capacity(n + 2);
    out.push(d.call.clone());
    out.push(d.ret.clone());
    let height = d.ret.t - d.call.t;
    for _ in 0..n {
        let mut accepted = None;
        if height > 0.0 {
            for _ in 0..ATTEMPTS {
                let t = d.call.t + rng.gen::<f64>() * height;
                let x: Vec<f64> = d
                    .call
                    .x
                    .iter()
                    .map(|c| c + (2.0 * rng.gen::<f64>() - 1.0) * height)
                    .collect();
                let p = SpacetimePoint { t, x };
                if in_diamond(&p, d, tol).unwrap_or(false) {
                    accepted = Some(p);
                    break;
                }
            }
        }
        let p = accepted.unwrap_or_else(|| {
            let lambda: f64 = rng.gen();
            SpacetimePoint {
                t: d.call.t + lambda * (d.ret.t - d.call.t),
                x: d
                    .call
                    .x
                    .iter()
                    .zip(&d.ret.x)
                    .map(|(c, r)| c + lambda * (r - c))
                    .collect(),
            }
        });
        out.push(p);
    }
    out
}

/// Definition-level check of [`diamonds_causally_related`]: samples points
/// from both diamonds and looks for a comparable pair. A `true` answer is
/// always sound.
pub fn sample_witness_related(
    di: &CausalDiamond,
    dj: &CausalDiamond,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<bool, GeometryError> {
    if n == 0 {
        return Err(GeometryError::NoSamples);
    }
    di.call.check_dim(&dj.call)?;
    di.require_nonempty(tol)?;
    dj.require_nonempty(tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let si = sample_diamond(di, n, tol, &mut rng);
    let sj = sample_diamond(dj, n, tol, &mut rng);
    for a in &si {
        for b in &sj {
            if causal_leq(a, b, tol)? || causal_leq(b, a, tol)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(t: f64, x: &[f64]) -> SpacetimePoint {
        SpacetimePoint::new(t, x.to_vec())
    }

    #[test]
    fn interval_examples() {
        assert_eq!(interval2(&p(1.0, &[0.0]), &p(0.0, &[0.0])).unwrap(), 1.0);
        assert_eq!(interval2(&p(1.0, &[1.0]), &p(0.0, &[0.0])).unwrap(), 0.0);
        assert_eq!(interval2(&p(0.0, &[3.0, 4.0]), &p(0.0, &[0.0, 0.0])).unwrap(), -25.0);
        assert_eq!(
            interval2(&p(0.0, &[1.0]), &p(0.0, &[0.0, 0.0])),
            Err(GeometryError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn causal_leq_examples() {
        let o = p(0.0, &[0.0]);
        assert!(causal_leq(&o, &o, 0.0).unwrap());
        assert!(causal_leq(&o, &p(1.0, &[1.0]), 0.0).unwrap());
        assert!(!causal_leq(&o, &p(1.0, &[2.0]), 0.0).unwrap());
        assert!(!causal_leq(&o, &p(-1.0, &[0.0]), 0.0).unwrap());
        assert!(causal_leq(&o, &p(0.0, &[0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn diamond_membership() {
        let d = CausalDiamond::new(p(0.0, &[0.0]), p(2.0, &[0.0]));
        assert!(in_diamond(&d.call, &d, 0.0).unwrap());
        assert!(in_diamond(&d.ret, &d, 0.0).unwrap());
        assert!(in_diamond(&p(1.0, &[0.5]), &d, 0.0).unwrap());
        assert!(!in_diamond(&p(1.0, &[5.0]), &d, 0.0).unwrap());
    }

    #[test]
    fn diamond_relations() {
        let outer = CausalDiamond::new(p(0.0, &[0.0]), p(10.0, &[0.0]));
        let inner = CausalDiamond::new(p(2.0, &[0.0]), p(4.0, &[0.0]));
        assert!(diamonds_causally_related(&outer, &inner, 0.0).unwrap());

        let a = CausalDiamond::new(p(0.0, &[0.0]), p(1.0, &[0.0]));
        let b = CausalDiamond::new(p(0.0, &[10.0]), p(1.0, &[10.0]));
        assert!(!diamonds_causally_related(&a, &b, 0.0).unwrap());
        assert!(!sample_witness_related(&a, &b, 200, 7, 0.0).unwrap());
        assert!(sample_witness_related(&outer, &inner, 1, 7, 0.0).unwrap());

        let empty = CausalDiamond::new(p(1.0, &[0.0]), p(0.0, &[0.0]));
        assert_eq!(
            diamonds_causally_related(&a, &empty, 0.0),
            Err(GeometryError::EmptyDiamond)
        );
        assert_eq!(sample_witness_related(&a, &b, 0, 1, 0.0), Err(GeometryError::NoSamples));
    }

    #[test]
    fn samples_stay_inside() {
        let d = CausalDiamond::new(p(0.0, &[0.0, 0.0]), p(2.0, &[0.5, 0.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in sample_diamond(&d, 100, 1e-9, &mut rng) {
            assert!(in_diamond(&q, &d, 1e-9).unwrap(), "{q}");
        }
        // lightlike diamond has no volume; the segment fallback still lands inside
        let l = CausalDiamond::new(p(0.0, &[0.0]), p(1.0, &[1.0]));
        for q in sample_diamond(&l, 20, 1e-9, &mut rng) {
            assert!(in_diamond(&q, &l, 1e-9).unwrap(), "{q}");
        }
    }

    fn int_point(dim: usize) -> impl Strategy<Value = SpacetimePoint> {
        (-4i32..=4, prop::collection::vec(-4i32..=4, dim))
            .prop_map(|(t, x)| SpacetimePoint::new(t as f64, x.into_iter().map(f64::from).collect::<Vec<_>>()))
    }

    /// Integer offsets `(dt, dx)` inside the closed future cone.
    fn future_offset(dim: usize) -> impl Strategy<Value = (i32, Vec<i32>)> {
        (0i32..=5)
            .prop_flat_map(move |dt| (Just(dt), prop::collection::vec(-dt..=dt, dim)))
            .prop_filter("outside cone", |(dt, dx)| dx.iter().map(|v| v * v).sum::<i32>() <= dt * dt)
    }

    fn shift(p: &SpacetimePoint, (dt, dx): &(i32, Vec<i32>)) -> SpacetimePoint {
        SpacetimePoint::new(p.t + *dt as f64, p.x.iter().zip(dx).map(|(a, b)| a + *b as f64).collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn reflexive(a in int_point(2)) {
            prop_assert!(causal_leq(&a, &a, 0.0).unwrap());
        }

        #[test]
        fn transitive(a in int_point(2), u in future_offset(2), v in future_offset(2)) {
            let b = shift(&a, &u);
            let c = shift(&b, &v);
            let ab = causal_leq(&a, &b, 0.0).unwrap();
            let bc = causal_leq(&b, &c, 0.0).unwrap();
            prop_assume!(ab && bc);
            prop_assert!(causal_leq(&a, &c, 0.0).unwrap());
        }

        #[test]
        fn antisymmetric(a in int_point(1), b in int_point(1)) {
            prop_assume!(a != b);
            prop_assert!(!(causal_leq(&a, &b, 0.0).unwrap() && causal_leq(&b, &a, 0.0).unwrap()));
        }

        #[test]
        fn interval_symmetric(a in int_point(3), b in int_point(3)) {
            prop_assert_eq!(interval2(&a, &b).unwrap(), interval2(&b, &a).unwrap());
        }

        #[test]
        fn relation_symmetric(c1 in int_point(2), c2 in int_point(2), h1 in 0i32..4, h2 in 0i32..4) {
            let d1 = CausalDiamond::new(c1.clone(), SpacetimePoint::new(c1.t + h1 as f64, c1.x.clone()));
            let d2 = CausalDiamond::new(c2.clone(), SpacetimePoint::new(c2.t + h2 as f64, c2.x.clone()));
            prop_assert_eq!(
                diamonds_causally_related(&d1, &d2, 0.0).unwrap(),
                diamonds_causally_related(&d2, &d1, 0.0).unwrap()
            );
        }
    }
}
