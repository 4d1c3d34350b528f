//! `PSL_2(O)` acting on upper half-space: the action formula, the bounded
//! search for all matrices taking one point to another, and finite
//! stabilizers.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{bezout, elements_of_norm_small, group_from_table, AbelianGroup};
use crate::hemis::PointH;
use crate::qfield::{
    ceil_sqrt, rat, rat_int, rational_sqrt, AlgInt, FieldCtx, FieldElem, Rational,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsomError {
    #[error("determinant is {0}, expected 1")]
    Determinant(AlgInt),
    #[error("point must lie strictly above the boundary (squared height {0})")]
    NotInterior(String),
    #[error("element set is not closed under multiplication")]
    NotAGroup,
}

/// `(a b; c d)` with determinant 1, stored up to sign: the first nonzero of
/// `(c, d, a, b)` has positive leading coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a: AlgInt,
    pub b: AlgInt,
    pub c: AlgInt,
    pub d: AlgInt,
}

impl Matrix2 {
    pub fn new(
        a: AlgInt,
        b: AlgInt,
        c: AlgInt,
        d: AlgInt,
        ctx: &FieldCtx,
    ) -> Result<Self, IsomError> {
        let det = &ctx.mul(&a, &d) - &ctx.mul(&b, &c);
        if det != AlgInt::one() {
            return Err(IsomError::Determinant(det));
        }
        Ok(Matrix2 { a, b, c, d }.canonical())
    }

    pub fn identity() -> Self {
        Matrix2 {
            a: AlgInt::one(),
            b: AlgInt::zero(),
            c: AlgInt::zero(),
            d: AlgInt::one(),
        }
    }

    /// `z -> z + t`.
    pub fn translation(t: &AlgInt) -> Self {
        Matrix2 {
            a: AlgInt::one(),
            b: t.clone(),
            c: AlgInt::zero(),
            d: AlgInt::one(),
        }
    }

    fn canonical(self) -> Self {
        let lead = [&self.c, &self.d, &self.a, &self.b]
            .into_iter()
            .find(|e| !e.is_zero())
            .expect("zero matrix")
            .clone();
        if lead.is_positive() {
            self
        } else {
            Matrix2 {
                a: -&self.a,
                b: -&self.b,
                c: -&self.c,
                d: -&self.d,
            }
        }
    }

    pub fn mul(&self, o: &Matrix2, ctx: &FieldCtx) -> Matrix2 {
        let m = |x: &AlgInt, y: &AlgInt| ctx.mul(x, y);
        Matrix2 {
            a: &m(&self.a, &o.a) + &m(&self.b, &o.c),
            b: &m(&self.a, &o.b) + &m(&self.b, &o.d),
            c: &m(&self.c, &o.a) + &m(&self.d, &o.c),
            d: &m(&self.c, &o.b) + &m(&self.d, &o.d),
        }
        .canonical()
    }

    pub fn inverse(&self) -> Matrix2 {
        Matrix2 {
            a: self.d.clone(),
            b: -&self.b,
            c: -&self.c,
            d: self.a.clone(),
        }
        .canonical()
    }

    pub fn is_identity(&self) -> bool {
        *self == Matrix2::identity()
    }

    /// Order in `PSL_2`, if at most `limit`.
    pub fn order(&self, ctx: &FieldCtx, limit: usize) -> Option<usize> {
        let mut p = self.clone();
        for k in 1..=limit {
            if p.is_identity() {
                return Some(k);
            }
            p = p.mul(self, ctx);
        }
        None
    }

    pub fn trace(&self) -> AlgInt {
        &self.a + &self.d
    }
}

impl fmt::Display for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}; {}, {})", self.a, self.b, self.c, self.d)
    }
}

/// The action on `H` and its boundary:
/// `den = |c z + d|^2 + |c|^2 zeta^2`,
/// `z' = ((a z + b) conj(c z + d) + a conj(c) zeta^2) / den`,
/// `zeta'^2 = zeta^2 / den^2`.
pub fn apply(g: &Matrix2, p: &PointH, ctx: &FieldCtx) -> PointH {
    let (a, b, c, d) = (
        g.a.to_field(),
        g.b.to_field(),
        g.c.to_field(),
        g.d.to_field(),
    );
    let cz_d = &ctx.fmul(&c, &p.z) + &d;
    let den = ctx.fnorm(&cz_d) + ctx.fnorm(&c) * &p.sq_height;
    let az_b = &ctx.fmul(&a, &p.z) + &b;
    let num =
        &ctx.fmul(&az_b, &ctx.fconj(&cz_d)) + &ctx.fmul(&a, &ctx.fconj(&c)).scale(&p.sq_height);
    if den.is_zero() {
        // a cusp sent to infinity; report it as the (unused) point at zero height
        return PointH::new(FieldElem::zero(), Rational::zero());
    }
    let inv = Rational::one() / &den;
    PointH::new(num.scale(&inv), &p.sq_height * &inv * &inv)
}

fn check_interior(p: &PointH) -> Result<(), IsomError> {
    if p.sq_height.is_positive() {
        Ok(())
    } else {
        Err(IsomError::NotInterior(crate::qfield::format_rational(
            &p.sq_height,
        )))
    }
}

/// All `g` with `c != 0` and `g p = q`, up to sign.
pub fn identify(p: &PointH, q: &PointH, ctx: &FieldCtx) -> Result<Vec<Matrix2>, IsomError> {
    check_interior(p)?;
    check_interior(q)?;
    // the height equation forces den = r / rho to be rational
    let Some(t) = rational_sqrt(&(&p.sq_height / &q.sq_height)) else {
        return Ok(vec![]);
    };
    let r2 = &p.sq_height;
    let c_bound = &t / r2; // N(c) <= 1 / (r rho)
    let max_norm = c_bound.floor().to_integer();
    let max_norm: i64 = num_traits::ToPrimitive::to_i64(&max_norm).expect("bound too large");
    let m = ctx.m();
    let mut found = BTreeSet::new();
    for n in 1..=max_norm {
        for (j, k) in elements_of_norm_small(n, ctx) {
            let c = AlgInt::new(j, k);
            let dd = &t - rat_int(n) * r2; // |c z + d|^2
            if dd.is_negative() {
                continue;
            }
            let minus_cz = -&ctx.fmul(&c.to_field(), &p.z);
            let (rr, ww) = (minus_cz.x.clone(), minus_cz.y.clone());
            // m (s - W)^2 <= D, or (m/4) (s - W)^2 <= D
            let scale = if ctx.is_3_mod_4() {
                rat(m, 4)
            } else {
                rat_int(m)
            };
            let span = ceil_sqrt(&(&dd / &scale));
            let w_floor = ww.floor().to_integer();
            let mut s: BigInt = &w_floor - &span - 1;
            while s <= &w_floor + &span + 1 {
                let sw = Rational::from_integer(s.clone()) - &ww;
                let delta = &dd - &scale * &sw * &sw;
                if !delta.is_negative() {
                    if let Some(root) = rational_sqrt(&delta) {
                        let base = if ctx.is_3_mod_4() {
                            &rr + &sw * rat(1, 2)
                        } else {
                            rr.clone()
                        };
                        let mut qs = vec![&base + &root];
                        if !root.is_zero() {
                            qs.push(&base - &root);
                        }
                        for qv in qs {
                            if !qv.is_integer() {
                                continue;
                            }
                            let d = AlgInt::from_big(qv.to_integer(), s.clone());
                            if let Some(g) = complete_matrix(&c, &d, p, q, ctx) {
                                found.insert(g);
                            }
                        }
                    }
                }
                s += 1;
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Given the bottom row, finds the unique top row (if any) sending `p` to `q`.
fn complete_matrix(
    c: &AlgInt,
    d: &AlgInt,
    p: &PointH,
    q: &PointH,
    ctx: &FieldCtx,
) -> Option<Matrix2> {
    let (x, y) = bezout(c, d, ctx)?;
    // x c + y d = 1, so (y, -x; c, d) has determinant 1
    let g0 = Matrix2 {
        a: y,
        b: -&x,
        c: c.clone(),
        d: d.clone(),
    };
    let image = apply(&g0, p, ctx);
    if image.sq_height != q.sq_height {
        return None;
    }
    let k = (&q.z - &image.z).to_alg_int()?;
    let g = Matrix2::translation(&k).mul(&g0, ctx);
    debug_assert_eq!(&apply(&g, p, ctx), q);
    Some(g)
}

/// [`identify`] together with the translations relating the points.
pub fn identify_with_translations(
    p: &PointH,
    q: &PointH,
    ctx: &FieldCtx,
) -> Result<Vec<Matrix2>, IsomError> {
    let mut out = identify(p, q, ctx)?;
    if p.sq_height == q.sq_height {
        if let Some(t) = (&q.z - &p.z).to_alg_int() {
            out.push(Matrix2::translation(&t));
        }
    }
    out.sort();
    Ok(out)
}

/// A finite subgroup of `PSL_2(O)` with its multiplication table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteGroup {
    /// Sorted, with the identity first.
    pub elements: Vec<Matrix2>,
    /// `table[i][j]` is the index of `elements[i] * elements[j]`.
    pub table: Vec<Vec<usize>>,
}

impl FiniteGroup {
    pub fn from_elements(mut elements: Vec<Matrix2>, ctx: &FieldCtx) -> Result<Self, IsomError> {
        elements.sort();
        elements.dedup();
        let id = Matrix2::identity();
        match elements.iter().position(|e| *e == id) {
            Some(i) => {
                let e = elements.remove(i);
                elements.insert(0, e);
            }
            None => return Err(IsomError::NotAGroup),
        }
        let index = |g: &Matrix2| elements.iter().position(|e| e == g);
        let mut table = vec![];
        for x in &elements {
            let mut row = vec![];
            for y in &elements {
                row.push(index(&x.mul(y, ctx)).ok_or(IsomError::NotAGroup)?);
            }
            table.push(row);
        }
        // closure plus finiteness gives inverses
        Ok(FiniteGroup { elements, table })
    }

    pub fn trivial() -> Self {
        FiniteGroup {
            elements: vec![Matrix2::identity()],
            table: vec![vec![0]],
        }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn index_of(&self, g: &Matrix2) -> Option<usize> {
        self.elements.iter().position(|e| e == g)
    }

    pub fn element_orders(&self, ctx: &FieldCtx) -> Vec<usize> {
        self.elements
            .iter()
            .map(|g| {
                g.order(ctx, self.order())
                    .expect("element of a finite group")
            })
            .collect()
    }

    pub fn conjugate(&self, h: &Matrix2, ctx: &FieldCtx) -> FiniteGroup {
        let hi = h.inverse();
        let elements = self
            .elements
            .iter()
            .map(|g| h.mul(g, ctx).mul(&hi, ctx))
            .collect();
        FiniteGroup::from_elements(elements, ctx).expect("conjugate of a group")
    }
}

pub fn stabilizer(p: &PointH, ctx: &FieldCtx) -> Result<FiniteGroup, IsomError> {
    FiniteGroup::from_elements(identify_with_translations(p, p, ctx)?, ctx)
}

/// Elements fixing both `p` and `q`.
pub fn edge_stabilizer(p: &PointH, q: &PointH, ctx: &FieldCtx) -> Result<FiniteGroup, IsomError> {
    let gp = stabilizer(p, ctx)?;
    let elements = gp
        .elements
        .into_iter()
        .filter(|g| apply(g, q, ctx) == *q)
        .collect();
    FiniteGroup::from_elements(elements, ctx)
}

pub fn abelianization(g: &FiniteGroup) -> AbelianGroup {
    group_from_table(&g.table)
}
