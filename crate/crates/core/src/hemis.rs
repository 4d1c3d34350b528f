//! Hemispheres `S_{mu,lam}` over the complex plane and the exact predicates
//! comparing them: strictly below, everywhere below, touching, and the lines
//! over which two hemispheres agree.
//!
//! Square roots never appear: a statement `sqrt(A) + sqrt(C) <= sqrt(B)` is
//! decided as `B - A - C >= 0` and `(B - A - C)^2 >= 4 A C`.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::is_unimodular;
use crate::qfield::{rat, rat_int, to_i64, AlgInt, FieldCtx, FieldElem, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HemisError {
    #[error("hemisphere needs mu != 0")]
    ZeroMu,
    #[error("pair ({0}, {1}) is not unimodular")]
    NotUnimodular(AlgInt, AlgInt),
    #[error("identical hemispheres have no agree-line")]
    Identical,
}

/// `S_{mu,lam}`: center `lam / mu`, squared radius `1 / N(mu)`.
#[derive(Clone, Debug)]
pub struct Hemisphere {
    pub mu: AlgInt,
    pub lam: AlgInt,
    pub center: FieldElem,
    pub sq_radius: Rational,
    pub(crate) fast: FastHemi,
}

impl PartialEq for Hemisphere {
    fn eq(&self, o: &Self) -> bool {
        self.mu == o.mu && self.lam == o.lam
    }
}
impl Eq for Hemisphere {}

/// Integer data of a hemisphere: `n = N(mu)`, `l = N(lam)` and twice the
/// `coords` of `P = lam * conj(mu)`, so that the squared height over `(x, y)`
/// is `(p2 x + m q2 y + 1 - l) / n - |z|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct FastHemi {
    pub n: i64,
    pub l: i64,
    pub p2: i64,
    pub q2: i64,
}

impl Hemisphere {
    pub fn new(mu: AlgInt, lam: AlgInt, ctx: &FieldCtx) -> Result<Self, HemisError> {
        if mu.is_zero() {
            return Err(HemisError::ZeroMu);
        }
        if !is_unimodular(&mu, &lam, ctx).expect("mu is nonzero") {
            return Err(HemisError::NotUnimodular(mu, lam));
        }
        Ok(Self::new_unchecked(mu, lam, ctx))
    }

    /// Skips the unimodularity test; callers must have checked it.
    pub(crate) fn new_unchecked(mu: AlgInt, lam: AlgInt, ctx: &FieldCtx) -> Self {
        let n = ctx.norm(&mu);
        let p = ctx.mul(&lam, &ctx.conj(&mu));
        let (px, py) = ctx.coords(&p.to_field());
        let fast = FastHemi {
            n: to_i64(&n),
            l: to_i64(&ctx.norm(&lam)),
            p2: (px * rat_int(2)).to_integer().try_into().expect("overflow"),
            q2: (py * rat_int(2)).to_integer().try_into().expect("overflow"),
        };
        let center = ctx
            .fdiv(&lam.to_field(), &mu.to_field())
            .expect("mu is nonzero");
        Hemisphere {
            mu,
            lam,
            center,
            sq_radius: Rational::new(1.into(), n),
            fast,
        }
    }

    /// The hemisphere translated by `t`, i.e. `S_{mu, lam + t mu}`.
    pub fn translate(&self, t: &AlgInt, ctx: &FieldCtx) -> Hemisphere {
        Self::new_unchecked(self.mu.clone(), &self.lam + &ctx.mul(t, &self.mu), ctx)
    }

    pub fn norm_mu(&self) -> i64 {
        self.fast.n
    }

    /// `|z - center|^2 - sq_radius`, the power of `z`.
    pub fn power(&self, z: &FieldElem, ctx: &FieldCtx) -> Rational {
        ctx.fnorm(&(z - &self.center)) - &self.sq_radius
    }

    /// Deterministic order: ascending `N(mu)`, then center, then `(mu, lam)`.
    pub fn sort_key(&self) -> (i64, FieldElem, AlgInt, AlgInt) {
        (
            self.fast.n,
            self.center.clone(),
            self.mu.clone(),
            self.lam.clone(),
        )
    }
}

/// Point `(z, zeta)` of upper half-space or its boundary, stored with `zeta^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointH {
    pub z: FieldElem,
    #[serde(with = "crate::serial::rational")]
    pub sq_height: Rational,
}

impl PointH {
    pub fn new(z: FieldElem, sq_height: Rational) -> Self {
        PointH { z, sq_height }
    }

    pub fn is_cusp(&self) -> bool {
        self.sq_height.is_zero()
    }
}

impl Ord for PointH {
    fn cmp(&self, o: &Self) -> Ordering {
        self.z
            .cmp(&o.z)
            .then_with(|| self.sq_height.cmp(&o.sq_height))
    }
}

impl PartialOrd for PointH {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// `a x + b y = c` in `coords` units, normalized so the first nonzero of
/// `(a, b)` is 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlaneLine {
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
}

impl PlaneLine {
    pub fn new(a: Rational, b: Rational, c: Rational) -> Option<Self> {
        let lead = if !a.is_zero() {
            a.clone()
        } else if !b.is_zero() {
            b.clone()
        } else {
            return None;
        };
        Some(PlaneLine {
            a: a / &lead,
            b: b / &lead,
            c: c / lead,
        })
    }

    pub fn contains(&self, x: &Rational, y: &Rational) -> bool {
        &self.a * x + &self.b * y == self.c
    }
}

/// True iff `lower` is strictly below `upper` over `z`.
pub fn strictly_below_at(
    z: &FieldElem,
    lower: &Hemisphere,
    upper: &Hemisphere,
    ctx: &FieldCtx,
) -> bool {
    upper.power(z, ctx) < lower.power(z, ctx)
}

pub fn point_strictly_below(p: &PointH, h: &Hemisphere, ctx: &FieldCtx) -> bool {
    ctx.fnorm(&(&p.z - &h.center)) + &p.sq_height < h.sq_radius
}

/// Decides `sqrt(a) + sqrt(c) <= sqrt(b)` for nonnegative rationals.
pub fn sqrt_sum_le(a: &Rational, c: &Rational, b: &Rational) -> bool {
    let s = b - a - c;
    !s.is_negative() && &s * &s >= rat_int(4) * a * c
}

/// Decides `|a - b - c| <= 2 sqrt(b c)` one side at a time, i.e. `a` lies
/// between `(sqrt b - sqrt c)^2` and `(sqrt b + sqrt c)^2`.
fn within_annulus(a: &Rational, b: &Rational, c: &Rational) -> bool {
    let four_bc = rat_int(4) * b * c;
    let outer = a - b - c;
    let inner = b + c - a;
    let ok_outer = !outer.is_positive() || &outer * &outer <= four_bc;
    let ok_inner = !inner.is_positive() || &inner * &inner <= four_bc;
    ok_outer && ok_inner
}

/// True iff `h1` lies nowhere above `h2`: `|c1 - c2| + r1 <= r2`.
pub fn everywhere_below(h1: &Hemisphere, h2: &Hemisphere, ctx: &FieldCtx) -> bool {
    let a = ctx.fnorm(&(&h1.center - &h2.center));
    sqrt_sum_le(&a, &h1.sq_radius, &h2.sq_radius)
}

/// True iff the two closed hemispheres meet in `H` or on its boundary.
pub fn touches(h1: &Hemisphere, h2: &Hemisphere, ctx: &FieldCtx) -> bool {
    let a = ctx.fnorm(&(&h1.center - &h2.center));
    within_annulus(&a, &h1.sq_radius, &h2.sq_radius)
}

/// The line over which neither hemisphere is strictly below the other.
pub fn agree_line(
    h1: &Hemisphere,
    h2: &Hemisphere,
    ctx: &FieldCtx,
) -> Result<PlaneLine, HemisError> {
    let (p1, q1) = ctx.coords(&h1.center);
    let (p2, q2) = ctx.coords(&h2.center);
    let m = rat_int(ctx.m());
    let two = rat_int(2);
    let a = &two * (&p2 - &p1);
    let b = &two * &m * (&q2 - &q1);
    let c = (ctx.fnorm(&h2.center) - &h2.sq_radius) - (ctx.fnorm(&h1.center) - &h1.sq_radius);
    PlaneLine::new(a, b, c).ok_or(HemisError::Identical)
}

pub fn intersect_lines(l1: &PlaneLine, l2: &PlaneLine) -> Option<(Rational, Rational)> {
    let det = &l1.a * &l2.b - &l1.b * &l2.a;
    if det.is_zero() {
        return None;
    }
    let x = (&l1.c * &l2.b - &l1.b * &l2.c) / &det;
    let y = (&l1.a * &l2.c - &l1.c * &l2.a) / det;
    Some((x, y))
}

/// The point of `h` above `z`, if `z` lies in the closed disk under `h`.
pub fn lift(z: &FieldElem, h: &Hemisphere, ctx: &FieldCtx) -> Option<PointH> {
    let sq = &h.sq_radius - ctx.fnorm(&(z - &h.center));
    if sq.is_negative() {
        None
    } else {
        Some(PointH::new(z.clone(), sq))
    }
}

/// `1/2` as a rational, a frequent constant.
pub fn half() -> Rational {
    rat(1, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(m: i64) -> FieldCtx {
        FieldCtx::new(m).unwrap()
    }

    fn unit_at(a: i64, b: i64, k: &FieldCtx) -> Hemisphere {
        Hemisphere::new(AlgInt::one(), AlgInt::new(a, b), k).unwrap()
    }

    #[test]
    fn construction() {
        let k = ctx(5);
        assert_eq!(
            Hemisphere::new(AlgInt::zero(), AlgInt::one(), &k),
            Err(HemisError::ZeroMu)
        );
        assert!(matches!(
            Hemisphere::new(AlgInt::new(2, 0), AlgInt::new(1, 1), &k),
            Err(HemisError::NotUnimodular(..))
        ));
        let h = Hemisphere::new(AlgInt::new(2, 0), AlgInt::one(), &k).unwrap();
        assert_eq!(h.center, FieldElem::new(rat(1, 2), rat(0, 1)));
        assert_eq!(h.sq_radius, rat(1, 4));
        assert_eq!(k.fmul(&h.center, &h.mu.to_field()), h.lam.to_field());
    }

    #[test]
    fn strictly_below_examples() {
        let k = ctx(5);
        let h0 = unit_at(0, 0, &k);
        let h1 = unit_at(1, 0, &k);
        let z = FieldElem::zero();
        assert!(!strictly_below_at(&z, &h0, &h0, &k));
        assert!(strictly_below_at(&z, &h1, &h0, &k));
        let mid = FieldElem::new(rat(1, 2), rat(0, 1));
        assert!(!strictly_below_at(&mid, &h1, &h0, &k));
        assert!(!strictly_below_at(&mid, &h0, &h1, &k));
    }

    #[test]
    fn point_below_examples() {
        let k = ctx(5);
        let h0 = unit_at(0, 0, &k);
        let apex = PointH::new(h0.center.clone(), h0.sq_radius.clone());
        assert!(!point_strictly_below(&apex, &h0, &k));
        assert!(point_strictly_below(
            &PointH::new(FieldElem::zero(), rat(1, 2)),
            &h0,
            &k
        ));
        // the singular point of m = 5 is under no unit hemisphere
        let s = PointH::new(k.from_coords(&rat(1, 2), &rat(1, 2)), rat(0, 1));
        for a in -2..=2 {
            for b in -2..=2 {
                assert!(!point_strictly_below(&s, &unit_at(a, b, &k), &k));
            }
        }
    }

    #[test]
    fn everywhere_below_examples() {
        let k = ctx(5);
        let h0 = unit_at(0, 0, &k);
        assert!(everywhere_below(&h0, &h0, &k));
        let small = Hemisphere::new(AlgInt::new(2, 0), AlgInt::one(), &k).unwrap();
        assert!(everywhere_below(&small, &h0, &k));
        assert!(!everywhere_below(&h0, &small, &k));
        assert!(!everywhere_below(&h0, &unit_at(1, 0, &k), &k));
    }

    #[test]
    fn agree_line_examples() {
        let k = ctx(5);
        let l = agree_line(&unit_at(0, 0, &k), &unit_at(1, 0, &k), &k).unwrap();
        assert_eq!(l, PlaneLine::new(rat(1, 1), rat(0, 1), rat(1, 2)).unwrap());
        assert_eq!(
            agree_line(&unit_at(0, 0, &k), &unit_at(0, 0, &k), &k),
            Err(HemisError::Identical)
        );
        // a smaller hemisphere: the computed line really is the tie locus
        let k2 = ctx(2);
        let h = Hemisphere::new(AlgInt::new(2, 0), AlgInt::new(1, 1), &k2).unwrap();
        let l = agree_line(&unit_at(0, 0, &k2), &h, &k2).unwrap();
        let axis = PlaneLine::new(rat(0, 1), rat(1, 1), rat(0, 1)).unwrap();
        let (x, y) = intersect_lines(&l, &axis).unwrap();
        let z = k2.from_coords(&x, &y);
        assert_eq!(unit_at(0, 0, &k2).power(&z, &k2), h.power(&z, &k2));
        // m = 7: unit hemispheres at 0 and w agree on the bisector of (0,0)-(-1/2,1/2)
        let k7 = ctx(7);
        let l = agree_line(&unit_at(0, 0, &k7), &unit_at(0, 1, &k7), &k7).unwrap();
        assert!(l.contains(&rat(-1, 4), &rat(1, 4)));
    }

    #[test]
    fn agree_line_for_unequal_radii() {
        // centers 0 and 1 with squared radii 1 and 1/4 in coords: 2x = 1 + 3/4
        let k = ctx(5);
        let h0 = unit_at(0, 0, &k);
        let mut h1 = unit_at(1, 0, &k);
        h1.sq_radius = rat(1, 4);
        let l = agree_line(&h0, &h1, &k).unwrap();
        assert_eq!(l, PlaneLine::new(rat(1, 1), rat(0, 1), rat(7, 8)).unwrap());
    }

    #[test]
    fn line_and_lift_examples() {
        let l = |a, b, c| PlaneLine::new(rat(a, 1), rat(b, 1), c).unwrap();
        assert_eq!(
            intersect_lines(&l(1, 0, rat(1, 2)), &l(0, 1, rat(1, 2))),
            Some((rat(1, 2), rat(1, 2)))
        );
        assert_eq!(
            intersect_lines(&l(1, 0, rat(0, 1)), &l(1, 0, rat(1, 1))),
            None
        );
        assert_eq!(
            intersect_lines(&l(1, 1, rat(1, 1)), &l(1, -1, rat(0, 1))),
            Some((rat(1, 2), rat(1, 2)))
        );
        let k = ctx(5);
        let h0 = unit_at(0, 0, &k);
        assert_eq!(lift(&h0.center, &h0, &k).unwrap().sq_height, rat(1, 1));
        assert_eq!(
            lift(&FieldElem::new(rat(1, 2), rat(0, 1)), &h0, &k)
                .unwrap()
                .sq_height,
            rat(3, 4)
        );
        assert!(lift(&FieldElem::from_ints(2, 0), &h0, &k).is_none());
    }

    #[test]
    fn touches_examples() {
        let k = ctx(5);
        let h0 = unit_at(0, 0, &k);
        assert!(touches(&h0, &unit_at(1, 0, &k), &k));
        assert!(!touches(&h0, &unit_at(3, 0, &k), &k));
        assert!(touches(&h0, &h0, &k));
        // nested without touching
        let tiny = Hemisphere::new(AlgInt::new(3, 0), AlgInt::one(), &k).unwrap();
        assert!(!touches(&h0, &tiny, &k));
    }

    fn arb_m() -> impl Strategy<Value = i64> {
        prop::sample::select(vec![2i64, 5, 6, 7, 10, 11, 15, 19])
    }

    fn arb_hemi(m: i64) -> impl Strategy<Value = Hemisphere> {
        (-4i64..=4, -4i64..=4, -6i64..=6, -6i64..=6)
            .prop_filter_map("unimodular", move |(a, b, c, d)| {
                Hemisphere::new(AlgInt::new(a, b), AlgInt::new(c, d), &ctx(m)).ok()
            })
    }

    fn arb_pair() -> impl Strategy<Value = (i64, Hemisphere, Hemisphere)> {
        arb_m().prop_flat_map(|m| (Just(m), arb_hemi(m), arb_hemi(m)))
    }

    fn arb_point() -> impl Strategy<Value = FieldElem> {
        (-20i64..20, 1i64..8, -20i64..20, 1i64..8)
            .prop_map(|(a, b, c, d)| FieldElem::new(rat(a, b), rat(c, d)))
    }

    proptest! {
        #[test]
        fn strictly_below_is_antisymmetric((m, h1, h2) in arb_pair(), z in arb_point()) {
            let k = ctx(m);
            prop_assert!(!(strictly_below_at(&z, &h1, &h2, &k) && strictly_below_at(&z, &h2, &h1, &k)));
        }

        #[test]
        fn agree_line_points_are_ties((m, h1, h2) in arb_pair(), t in -30i64..30, d in 1i64..7) {
            let k = ctx(m);
            let Ok(l) = agree_line(&h1, &h2, &k) else { return Ok(()); };
            // parametrize the line by one free coordinate
            let s = rat(t, d);
            let (x, y) = if l.b.is_zero() {
                (l.c.clone(), s)
            } else {
                (s.clone(), (&l.c - &l.a * &s) / &l.b)
            };
            let z = k.from_coords(&x, &y);
            prop_assert!(!strictly_below_at(&z, &h1, &h2, &k));
            prop_assert!(!strictly_below_at(&z, &h2, &h1, &k));
        }

        #[test]
        fn everywhere_below_means_nowhere_above((m, h1, h2) in arb_pair(), z in arb_point()) {
            let k = ctx(m);
            if everywhere_below(&h1, &h2, &k) {
                // wherever h1 exists, h2 is at least as high
                if let Some(p) = lift(&z, &h1, &k) {
                    prop_assert!(!strictly_below_at(&z, &h2, &h1, &k));
                    prop_assert!(lift(&z, &h2, &k).unwrap().sq_height >= p.sq_height);
                }
            }
        }

        #[test]
        fn lifted_points_lie_on_the_hemisphere((m, h1, _h2) in arb_pair(), z in arb_point()) {
            let k = ctx(m);
            if let Some(p) = lift(&z, &h1, &k) {
                prop_assert!(!point_strictly_below(&p, &h1, &k));
                prop_assert!(h1.power(&p.z, &k) + &p.sq_height == Rational::zero());
            }
        }

        #[test]
        fn fast_data_matches_exact_height((m, h1, _h2) in arb_pair(), z in arb_point()) {
            let k = ctx(m);
            let (x, y) = k.coords(&z);
            let f = h1.fast;
            let fast = (rat_int(f.p2) * &x + rat_int(m * f.q2) * &y + rat_int(1 - f.l)) / rat_int(f.n)
                - k.fnorm(&z);
            prop_assert_eq!(fast, -h1.power(&z, &k));
        }

        #[test]
        fn predicates_are_scale_free((m, h1, h2) in arb_pair(), t in 1i64..50) {
            // clearing denominators by a common square factor changes nothing
            let k = ctx(m);
            let a = k.fnorm(&(&h1.center - &h2.center));
            let s = rat_int(t * t);
            prop_assert_eq!(
                sqrt_sum_le(&a, &h1.sq_radius, &h2.sq_radius),
                sqrt_sum_le(&(&a * &s), &(&h1.sq_radius * &s), &(&h2.sq_radius * &s))
            );
            prop_assert_eq!(everywhere_below(&h1, &h2, &k), everywhere_below(&h1, &h2, &k));
        }
    }
}
