//! Arithmetic of `O_{-m}`: unimodular pairs, norm values, the fundamental
//! rectangle for the translations, singular points and the class group.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homology::{smith_normal_form, IntMatrix};
use crate::qfield::{isqrt, rat, AlgInt, FieldCtx, FieldElem, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("unimodularity is undefined for the pair (0, 0)")]
    BothZero,
    #[error("norm must be positive, got {0}")]
    NonPositiveNorm(i64),
    #[error("cannot parse group {0:?}")]
    ParseGroup(String),
}

// ---------------------------------------------------------------------------
// Hermite normal form of small two-column matrices

/// Extended gcd returning `(g, x, y)` with `x a + y b = g >= 0`.
pub fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let e = a.extended_gcd(b);
    if e.gcd.is_negative() {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Row-style Hermite normal form of an `n x 2` integer matrix together with a
/// unimodular transform `u` such that `u * rows = h`. The first two rows of
/// `h` are upper triangular with nonnegative diagonal, the rest vanish.
pub fn hnf_two_columns(rows: &[[BigInt; 2]]) -> (Vec<[BigInt; 2]>, Vec<Vec<BigInt>>) {
    let n = rows.len();
    let mut h: Vec<[BigInt; 2]> = rows.to_vec();
    let mut u: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigInt::one()
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();

    // combine rows `p` and `i` so that column `col` of row `i` becomes zero
    let eliminate =
        |h: &mut Vec<[BigInt; 2]>, u: &mut Vec<Vec<BigInt>>, p: usize, i: usize, col: usize| {
            if h[i][col].is_zero() {
                return;
            }
            let (g, x, y) = ext_gcd(&h[p][col], &h[i][col]);
            let a = &h[p][col] / &g;
            let b = &h[i][col] / &g;
            let hp = h[p].clone();
            let hi = h[i].clone();
            for c in 0..2 {
                h[p][c] = &x * &hp[c] + &y * &hi[c];
                h[i][c] = &a * &hi[c] - &b * &hp[c];
            }
            let up = u[p].clone();
            let ui = u[i].clone();
            for c in 0..n {
                u[p][c] = &x * &up[c] + &y * &ui[c];
                u[i][c] = &a * &ui[c] - &b * &up[c];
            }
        };

    let mut pivot = 0;
    for col in 0..2 {
        if pivot >= n {
            break;
        }
        for i in pivot + 1..n {
            eliminate(&mut h, &mut u, pivot, i, col);
        }
        if h[pivot][col].is_zero() {
            continue;
        }
        if h[pivot][col].is_negative() {
            for c in 0..2 {
                h[pivot][c] = -&h[pivot][c];
            }
            for c in 0..n {
                u[pivot][c] = -&u[pivot][c];
            }
        }
        // reduce entries above the pivot
        for r in 0..pivot {
            let q = h[r][col].div_floor(&h[pivot][col]);
            if !q.is_zero() {
                for c in 0..2 {
                    let t = &q * &h[pivot][c];
                    h[r][c] -= t;
                }
                for c in 0..n {
                    let t = &q * &u[pivot][c];
                    u[r][c] -= t;
                }
            }
        }
        pivot += 1;
    }
    (h, u)
}

fn ideal_rows(mu: &AlgInt, lam: &AlgInt, ctx: &FieldCtx) -> Vec<[BigInt; 2]> {
    let w = ctx.omega();
    [mu.clone(), ctx.mul(mu, &w), lam.clone(), ctx.mul(lam, &w)]
        .into_iter()
        .map(|e| [e.a, e.b])
        .collect()
}

/// Hermite basis of the ideal `mu O + lam O` in the basis `{1, w}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealBasis {
    pub rows: [[BigInt; 2]; 2],
}

impl IdealBasis {
    pub fn norm(&self) -> BigInt {
        &self.rows[0][0] * &self.rows[1][1] - &self.rows[0][1] * &self.rows[1][0]
    }
}

pub fn ideal_sum(mu: &AlgInt, lam: &AlgInt, ctx: &FieldCtx) -> Result<IdealBasis, ArithError> {
    if mu.is_zero() && lam.is_zero() {
        return Err(ArithError::BothZero);
    }
    let (h, _) = hnf_two_columns(&ideal_rows(mu, lam, ctx));
    Ok(IdealBasis {
        rows: [h[0].clone(), h[1].clone()],
    })
}

/// True iff `mu O + lam O = O`.
pub fn is_unimodular(mu: &AlgInt, lam: &AlgInt, ctx: &FieldCtx) -> Result<bool, ArithError> {
    Ok(ideal_sum(mu, lam, ctx)?.norm().is_one())
}

/// Integers `(x, y)` with `x c + y d = 1`, when the pair is unimodular.
pub fn bezout(c: &AlgInt, d: &AlgInt, ctx: &FieldCtx) -> Option<(AlgInt, AlgInt)> {
    if c.is_zero() && d.is_zero() {
        return None;
    }
    let (h, u) = hnf_two_columns(&ideal_rows(c, d, ctx));
    if !(h[0][0].is_one() && h[0][1].is_zero() && h[1][1].is_one()) {
        return None;
    }
    let x = AlgInt::from_big(u[0][0].clone(), u[0][1].clone());
    let y = AlgInt::from_big(u[0][2].clone(), u[0][3].clone());
    debug_assert!((&ctx.mul(&x, c) + &ctx.mul(&y, d)) == AlgInt::one());
    Some((x, y))
}

/// Fast unimodularity test on machine integers: the ideal index is the gcd of
/// the 2x2 minors of the coordinate matrix.
pub fn is_unimodular_small(mu: (i64, i64), lam: (i64, i64), ctx: &FieldCtx) -> bool {
    let (t, n) = if ctx.is_3_mod_4() {
        (1i128, ((1 + ctx.m()) / 4) as i128)
    } else {
        (0i128, ctx.m() as i128)
    };
    let times_w = |(a, b): (i128, i128)| (-n * b, a - t * b);
    let r0 = (mu.0 as i128, mu.1 as i128);
    let r2 = (lam.0 as i128, lam.1 as i128);
    let rows = [r0, times_w(r0), r2, times_w(r2)];
    let mut g: i128 = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            let minor = rows[i].0 * rows[j].1 - rows[i].1 * rows[j].0;
            g = g.gcd(&minor);
            if g == 1 {
                return true;
            }
        }
    }
    g == 1
}

// ---------------------------------------------------------------------------
// norms

/// All `mu` with `norm(mu) = n`, one per `{mu, -mu}`, sorted by `(a, b)`.
pub fn elements_of_norm(n: i64, ctx: &FieldCtx) -> Result<Vec<AlgInt>, ArithError> {
    if n < 1 {
        return Err(ArithError::NonPositiveNorm(n));
    }
    Ok(elements_of_norm_small(n, ctx)
        .into_iter()
        .map(|(a, b)| AlgInt::new(a, b))
        .collect())
}

pub(crate) fn elements_of_norm_small(n: i64, ctx: &FieldCtx) -> Vec<(i64, i64)> {
    let m = ctx.m();
    let mut out = BTreeSet::new();
    let mut push = |a: i64, b: i64| {
        if a > 0 || (a == 0 && b > 0) {
            out.insert((a, b));
        } else {
            out.insert((-a, -b));
        }
    };
    if ctx.is_3_mod_4() {
        // (2a - b)^2 + m b^2 = 4n
        let mut b = 0i64;
        while m * b * b <= 4 * n {
            let rest = 4 * n - m * b * b;
            let s = isqrt_i64(rest);
            if s * s == rest {
                for bb in [b, -b] {
                    for ss in [s, -s] {
                        if (bb + ss) % 2 == 0 {
                            push((bb + ss) / 2, bb);
                        }
                    }
                }
            }
            b += 1;
        }
    } else {
        let mut b = 0i64;
        while m * b * b <= n {
            let rest = n - m * b * b;
            let s = isqrt_i64(rest);
            if s * s == rest {
                for bb in [b, -b] {
                    for ss in [s, -s] {
                        push(ss, bb);
                    }
                }
            }
            b += 1;
        }
    }
    out.into_iter().collect()
}

pub fn isqrt_i64(n: i64) -> i64 {
    isqrt(&BigInt::from(n)).to_i64().unwrap()
}

/// Ascending stream of the values taken by the norm on nonzero integers.
pub struct NormValues {
    ctx: FieldCtx,
    next: i64,
}

impl Iterator for NormValues {
    type Item = i64;
    fn next(&mut self) -> Option<i64> {
        loop {
            let n = self.next;
            self.next += 1;
            if !elements_of_norm_small(n, &self.ctx).is_empty() {
                return Some(n);
            }
        }
    }
}

pub fn norm_values(ctx: &FieldCtx) -> NormValues {
    NormValues { ctx: *ctx, next: 1 }
}

/// The smallest norm value strictly greater than `n`.
pub fn next_norm_value(n: i64, ctx: &FieldCtx) -> i64 {
    NormValues {
        ctx: *ctx,
        next: n + 1,
    }
    .next()
    .unwrap()
}

// ---------------------------------------------------------------------------
// fundamental rectangle

/// Membership in the closed rectangle `D_0`, a fundamental domain of the
/// translations in `O`.
pub fn in_rectangle(z: &FieldElem, ctx: &FieldCtx) -> bool {
    let (x, y) = ctx.coords(z);
    if ctx.is_3_mod_4() {
        x >= rat(-1, 2) && x <= rat(1, 2) && y >= rat(0, 1) && y <= rat(1, 2)
    } else {
        x >= rat(0, 1) && x <= rat(1, 1) && y >= rat(0, 1) && y <= rat(1, 1)
    }
}

/// Returns `(z - t, t)` with `z - t` in `D_0`. Coordinates already inside the
/// closed range are left alone.
pub fn translate_to_rectangle(z: &FieldElem, ctx: &FieldCtx) -> (FieldElem, AlgInt) {
    let zero = Rational::zero();
    let one = Rational::one();
    let mut ty = BigInt::zero();
    if z.y < zero || z.y > one {
        ty = z.y.floor().to_integer();
    }
    let y = &z.y - Rational::from_integer(ty.clone());
    let mut tx = BigInt::zero();
    let x;
    if ctx.is_3_mod_4() {
        let half = rat(1, 2);
        let xr = &z.x - &y * &half;
        if xr < -half.clone() || xr > half {
            tx = (&xr + &half).floor().to_integer();
        }
        x = &z.x - Rational::from_integer(tx.clone());
    } else {
        if z.x < zero || z.x > one {
            tx = z.x.floor().to_integer();
        }
        x = &z.x - Rational::from_integer(tx.clone());
    }
    let out = FieldElem::new(x, y);
    debug_assert!(in_rectangle(&out, ctx));
    (out, AlgInt::from_big(tx, ty))
}

/// Corners of `D_0` in `coords` units, counterclockwise from the lower left.
pub fn rectangle_corners(ctx: &FieldCtx) -> [(Rational, Rational); 4] {
    if ctx.is_3_mod_4() {
        [
            (rat(-1, 2), rat(0, 1)),
            (rat(1, 2), rat(0, 1)),
            (rat(1, 2), rat(1, 2)),
            (rat(-1, 2), rat(1, 2)),
        ]
    } else {
        [
            (rat(0, 1), rat(0, 1)),
            (rat(1, 1), rat(0, 1)),
            (rat(1, 1), rat(1, 1)),
            (rat(0, 1), rat(1, 1)),
        ]
    }
}

// ---------------------------------------------------------------------------
// singular points

/// Representatives mod `O`, inside `D_0`, of the cusps lying on the boundary
/// of the polyhedron that are not equivalent to infinity. Sorted.
pub fn singular_points(ctx: &FieldCtx) -> Vec<FieldElem> {
    let m = ctx.m();
    let mut found: BTreeSet<FieldElem> = BTreeSet::new();
    let mut seen_mod_lattice: BTreeSet<FieldElem> = BTreeSet::new();
    let mut s = 2i64;
    while 3 * s * s <= 4 * m {
        for r in -s..=s {
            // -s/2 < r <= s/2 and s^2 <= r^2 + m
            if 2 * r <= -s || 2 * r > s || s * s > r * r + m {
                continue;
            }
            let (ok, modulus) = if ctx.is_3_mod_4() {
                (s % 2 == 0 && s != 2 && (r * r + m) % (2 * s) == 0, s / 2)
            } else {
                ((r * r + m) % s == 0, s)
            };
            if !ok {
                continue;
            }
            for p in 1..=modulus.max(1) {
                if p.gcd(&modulus) != 1 {
                    continue;
                }
                // p (r + sqrt(-m)) / s in coords
                let x_re = rat(p * r, s);
                let y_im = rat(p, s);
                let z = ctx.from_coords(&x_re, &y_im);
                let (key, _) = z.reduce_mod_lattice();
                if seen_mod_lattice.insert(key) {
                    found.insert(translate_to_rectangle(&z, ctx).0);
                }
            }
        }
        s += 1;
    }
    found.into_iter().collect()
}

// ---------------------------------------------------------------------------
// finitely generated abelian groups

/// `Z^free_rank` plus cyclic factors with invariants `d_1 | d_2 | ...`, each > 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbelianGroup {
    pub free_rank: usize,
    pub torsion: Vec<u64>,
}

impl AbelianGroup {
    pub fn trivial() -> Self {
        AbelianGroup {
            free_rank: 0,
            torsion: vec![],
        }
    }

    pub fn free(rank: usize) -> Self {
        AbelianGroup {
            free_rank: rank,
            torsion: vec![],
        }
    }

    /// Builds the canonical form from arbitrary cyclic orders (0 means `Z`,
    /// 1 is dropped).
    pub fn from_cyclic_orders(orders: &[u64]) -> Self {
        let free_rank = orders.iter().filter(|&&d| d == 0).count();
        let mut prime_powers: Vec<(u64, u64)> = vec![];
        for &d in orders.iter().filter(|&&d| d > 1) {
            for (p, e) in factorize(d) {
                prime_powers.push((p, p.pow(e)));
            }
        }
        // invariant factors: combine the largest prime powers of each prime
        let mut by_prime: std::collections::BTreeMap<u64, Vec<u64>> = Default::default();
        for (p, q) in prime_powers {
            by_prime.entry(p).or_default().push(q);
        }
        let len = by_prime.values().map(|v| v.len()).max().unwrap_or(0);
        let mut torsion = vec![1u64; len];
        for v in by_prime.values_mut() {
            v.sort_unstable_by(|a, b| b.cmp(a));
            for (i, q) in v.iter().enumerate() {
                torsion[len - 1 - i] *= q;
            }
        }
        AbelianGroup { free_rank, torsion }
    }

    /// Cokernel of the integer matrix with the given SNF diagonal, where
    /// `generators` is the number of columns of the presented module.
    pub fn from_invariants(generators: usize, diag: &[BigInt]) -> Self {
        let rank = diag.iter().filter(|d| !d.is_zero()).count();
        let mut orders: Vec<u64> = diag
            .iter()
            .filter(|d| !d.is_zero())
            .map(|d| d.abs().to_u64().expect("torsion coefficient too large"))
            .collect();
        orders.extend(std::iter::repeat_n(0, generators - rank));
        Self::from_cyclic_orders(&orders)
    }

    pub fn order(&self) -> Option<u64> {
        if self.free_rank > 0 {
            None
        } else {
            Some(self.torsion.iter().product())
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    /// Elementary divisors `p^e` with multiplicities, ascending.
    pub fn primary_parts(&self) -> Vec<(u64, usize)> {
        let mut parts: std::collections::BTreeMap<u64, usize> = Default::default();
        for &d in &self.torsion {
            for (p, e) in factorize(d) {
                *parts.entry(p.pow(e)).or_default() += 1;
            }
        }
        let mut v: Vec<_> = parts.into_iter().collect();
        v.sort_by_key(|&(q, _)| (smallest_prime(q), q));
        v
    }

    /// Additive rendering in primary form, e.g. `Z^9 ⊕ (Z/2)^2`; `0` if trivial.
    pub fn render_additive(&self) -> String {
        let mut parts = vec![];
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for (q, k) in self.primary_parts() {
            if k == 1 {
                parts.push(format!("Z/{q}"));
            } else {
                parts.push(format!("(Z/{q})^{k}"));
            }
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" ⊕ ")
        }
    }

    /// Multiplicative rendering by invariant factors, e.g. `Z/2×Z/2`; `1` if trivial.
    pub fn render_multiplicative(&self) -> String {
        if self.is_trivial() {
            return "1".into();
        }
        let mut parts: Vec<String> = vec!["Z".into(); self.free_rank];
        parts.extend(self.torsion.iter().map(|d| format!("Z/{d}")));
        parts.join("×")
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_additive())
    }
}

/// Parses both renderings plus `{1}` and `+` as a separator.
impl FromStr for AbelianGroup {
    type Err = ArithError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ArithError::ParseGroup(s.to_string());
        let t = s.trim();
        if t == "0" || t == "1" || t == "{1}" || t.is_empty() {
            return Ok(Self::trivial());
        }
        let mut orders = vec![];
        for part in t.split(['⊕', '×', '+']) {
            let part = part.trim();
            let (base, exp) = match part.rsplit_once('^') {
                Some((b, e)) => (b.trim(), e.trim().parse::<usize>().map_err(|_| err())?),
                None => (part, 1),
            };
            let base = base.trim_start_matches('(').trim_end_matches(')');
            let order = if base == "Z" {
                0
            } else {
                base.strip_prefix("Z/")
                    .ok_or_else(err)?
                    .parse::<u64>()
                    .map_err(|_| err())?
            };
            orders.extend(std::iter::repeat_n(order, exp));
        }
        Ok(Self::from_cyclic_orders(&orders))
    }
}

fn smallest_prime(q: u64) -> u64 {
    factorize(q).first().map(|&(p, _)| p).unwrap_or(1)
}

pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = vec![];
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Abelian group presented by generators `0..n` and integer relations, each
/// relation a sparse list of `(generator, coefficient)`.
pub fn presented_group(n: usize, relations: &[Vec<(usize, i64)>]) -> AbelianGroup {
    let mut mat = IntMatrix::zeros(relations.len(), n);
    for (i, rel) in relations.iter().enumerate() {
        for &(j, c) in rel {
            mat.add(i, j, &BigInt::from(c));
        }
    }
    let diag = smith_normal_form(&mat);
    AbelianGroup::from_invariants(n, &diag)
}

/// Abelian group given by its full multiplication table (`table[x][y] = xy`).
/// Generators are the elements, relations `[x] + [y] = [xy]`.
pub fn group_from_table(table: &[Vec<usize>]) -> AbelianGroup {
    let n = table.len();
    let mut rels = vec![];
    for x in 0..n {
        for y in 0..n {
            rels.push(vec![(x, 1), (y, 1), (table[x][y], -1)]);
        }
    }
    presented_group(n, &rels)
}

// ---------------------------------------------------------------------------
// class group via binary quadratic forms

/// Primitive positive definite form `a x^2 + b x y + c y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadForm {
    pub fn disc(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        b.abs() <= a && a <= c && ((b.abs() != a && a != c) || b >= 0)
    }

    fn normalize(self) -> Self {
        let (a, b) = (self.a, self.b);
        let d = self.disc();
        // b' = b + 2 r a with -a < b' <= a
        let r = (a - b).div_euclid(2 * a);
        let b2 = b + 2 * r * a;
        QuadForm {
            a,
            b: b2,
            c: (b2 * b2 - d) / (4 * a),
        }
    }

    pub fn reduce(self) -> Self {
        let mut f = self.normalize();
        while f.a > f.c {
            f = QuadForm {
                a: f.c,
                b: -f.b,
                c: f.a,
            }
            .normalize();
        }
        if f.a == f.c && f.b < 0 {
            f.b = -f.b;
        }
        debug_assert!(f.is_reduced());
        f
    }

    pub fn identity(disc: i64) -> Self {
        let b = disc.rem_euclid(2);
        QuadForm {
            a: 1,
            b,
            c: (b * b - disc) / 4,
        }
    }

    pub fn inverse(&self) -> Self {
        QuadForm {
            a: self.a,
            b: -self.b,
            c: self.c,
        }
        .reduce()
    }

    /// Gauss composition (Shanks' formulation), followed by reduction.
    pub fn compose(&self, other: &Self) -> Self {
        let (mut f1, mut f2) = (*self, *other);
        if f1.a > f2.a {
            std::mem::swap(&mut f1, &mut f2);
        }
        let disc = f1.disc();
        let s = (f1.b + f2.b) / 2;
        let n = f2.b - s;
        let (y1, d) = if f2.a % f1.a == 0 {
            (0, f1.a)
        } else {
            let e = f2.a.extended_gcd(&f1.a);
            let (g, u) = if e.gcd < 0 {
                (-e.gcd, -e.x)
            } else {
                (e.gcd, e.x)
            };
            (u, g)
        };
        let (x2, y2, d1) = if s % d == 0 {
            (0, -1, d)
        } else {
            let e = s.extended_gcd(&d);
            let (g, u, v) = if e.gcd < 0 {
                (-e.gcd, -e.x, -e.y)
            } else {
                (e.gcd, e.x, e.y)
            };
            (u, -v, g)
        };
        let v1 = f1.a / d1;
        let v2 = f2.a / d1;
        let r = ((y1 as i128 * y2 as i128 * n as i128 - x2 as i128 * f2.c as i128)
            .rem_euclid(v1 as i128)) as i64;
        let b3 = f2.b + 2 * v2 * r;
        let a3 = v1 * v2;
        let c3 = (b3 * b3 - disc) / (4 * a3);
        let out = QuadForm {
            a: a3,
            b: b3,
            c: c3,
        };
        debug_assert_eq!(out.disc(), disc);
        out.reduce()
    }
}

/// All reduced primitive forms of discriminant `disc < 0`, sorted.
pub fn reduced_forms(disc: i64) -> Vec<QuadForm> {
    let mut out = vec![];
    let mut a = 1i64;
    while 3 * a * a <= -disc {
        for b in -a + 1..=a {
            let num = b * b - disc;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            let f = QuadForm { a, b, c };
            if f.is_reduced() && a.gcd(&b).gcd(&c) == 1 {
                out.push(f);
            }
        }
        a += 1;
    }
    out.sort();
    out
}

/// Class group of `O_{-m}` as an abstract abelian group, together with the
/// reduced forms indexing its elements.
pub fn class_group_with_forms(ctx: &FieldCtx) -> (AbelianGroup, Vec<QuadForm>) {
    let disc = ctx.discriminant();
    let forms = reduced_forms(disc);
    let index = |f: &QuadForm| {
        forms
            .binary_search(f)
            .expect("composition left the form set")
    };
    let table: Vec<Vec<usize>> = forms
        .iter()
        .map(|f| forms.iter().map(|g| index(&f.compose(g))).collect())
        .collect();
    (group_from_table(&table), forms)
}

pub fn class_group(ctx: &FieldCtx) -> AbelianGroup {
    class_group_with_forms(ctx).0
}

pub fn class_number(ctx: &FieldCtx) -> u64 {
    reduced_forms(ctx.discriminant()).len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(m: i64) -> FieldCtx {
        FieldCtx::new(m).unwrap()
    }

    #[test]
    fn unimodular_examples() {
        let k5 = ctx(5);
        assert!(is_unimodular(&AlgInt::new(0, 1), &AlgInt::one(), &k5).unwrap());
        assert!(!is_unimodular(&AlgInt::new(2, 0), &AlgInt::new(1, 1), &k5).unwrap());
        assert!(!is_unimodular(&AlgInt::new(3, 0), &AlgInt::new(1, 1), &k5).unwrap());
        assert_eq!(
            ideal_sum(&AlgInt::new(2, 0), &AlgInt::new(1, 1), &k5)
                .unwrap()
                .norm(),
            BigInt::from(2)
        );
        assert_eq!(
            ideal_sum(&AlgInt::new(3, 0), &AlgInt::new(1, 1), &k5)
                .unwrap()
                .norm(),
            BigInt::from(3)
        );
        assert_eq!(
            is_unimodular(&AlgInt::zero(), &AlgInt::zero(), &k5),
            Err(ArithError::BothZero)
        );
    }

    #[test]
    fn norm_value_examples() {
        let v: Vec<i64> = norm_values(&ctx(5)).take(6).collect();
        assert_eq!(v, vec![1, 4, 5, 6, 9, 14]);
        let v: Vec<i64> = norm_values(&ctx(7)).take(5).collect();
        assert_eq!(v, vec![1, 2, 4, 7, 8]);
        assert_eq!(next_norm_value(2, &ctx(7)), 4);
    }

    #[test]
    fn elements_of_norm_examples() {
        assert_eq!(elements_of_norm(1, &ctx(5)).unwrap(), vec![AlgInt::one()]);
        assert_eq!(
            elements_of_norm(4, &ctx(5)).unwrap(),
            vec![AlgInt::new(2, 0)]
        );
        assert_eq!(
            elements_of_norm(2, &ctx(7)).unwrap(),
            vec![AlgInt::new(0, 1), AlgInt::new(1, 1)]
        );
        assert!(elements_of_norm(0, &ctx(7)).is_err());
    }

    #[test]
    fn rectangle_examples() {
        assert!(in_rectangle(&FieldElem::zero(), &ctx(5)));
        let k5 = ctx(5);
        assert!(in_rectangle(&k5.from_coords(&rat(1, 2), &rat(1, 2)), &k5));
        let k7 = ctx(7);
        let (z, t) = translate_to_rectangle(&FieldElem::from_ints(3, 1), &k7);
        assert_eq!(z, FieldElem::from_ints(0, 1));
        assert_eq!(t, AlgInt::new(3, 0));
    }

    #[test]
    fn singular_point_examples() {
        assert!(singular_points(&ctx(2)).is_empty());
        let k5 = ctx(5);
        assert_eq!(
            singular_points(&k5),
            vec![k5.from_coords(&rat(1, 2), &rat(1, 2))]
        );
        let k15 = ctx(15);
        let mut expect = vec![
            k15.from_coords(&rat(1, 4), &rat(1, 4)),
            k15.from_coords(&rat(-1, 4), &rat(1, 4)),
        ];
        expect.sort();
        assert_eq!(singular_points(&k15), expect);
        for m in [2, 7, 11, 19, 43, 67, 163] {
            assert!(singular_points(&ctx(m)).is_empty(), "m = {m}");
        }
    }

    #[test]
    fn class_group_examples() {
        assert!(class_group(&ctx(2)).is_trivial());
        assert_eq!(class_group(&ctx(5)), "Z/2".parse().unwrap());
        assert_eq!(class_group(&ctx(14)), "Z/4".parse().unwrap());
        assert_eq!(class_group(&ctx(21)), "Z/2×Z/2".parse().unwrap());
        assert_eq!(class_group(&ctx(30)), "Z/2×Z/2".parse().unwrap());
        assert_eq!(class_group(&ctx(87)), "Z/6".parse().unwrap());
    }

    /// Class number from the analytic formula `h = -(1/|D|) sum chi(n) n`,
    /// with `chi` the Kronecker symbol of the discriminant.
    fn analytic_class_number(disc: i64) -> i64 {
        let d = disc.abs();
        let s: i64 = (1..d).map(|n| kronecker(disc, n) * n).sum();
        -s / d
    }

    fn kronecker(a: i64, n: i64) -> i64 {
        let mut n = n;
        let mut res = 1;
        while n % 2 == 0 {
            n /= 2;
            res *= match a.rem_euclid(8) {
                1 | 7 => 1,
                3 | 5 => -1,
                _ => 0,
            };
        }
        // Jacobi symbol (a / n) for odd n
        let mut a = a.rem_euclid(n);
        let mut n = n;
        while a != 0 {
            while a % 2 == 0 {
                a /= 2;
                if n % 8 == 3 || n % 8 == 5 {
                    res = -res;
                }
            }
            std::mem::swap(&mut a, &mut n);
            if a % 4 == 3 && n % 4 == 3 {
                res = -res;
            }
            a %= n;
        }
        if n == 1 {
            res
        } else {
            0
        }
    }

    #[test]
    fn class_number_matches_analytic_formula() {
        for m in 2..=200 {
            if m == 3 || !crate::qfield::is_square_free(m) {
                continue;
            }
            let k = ctx(m);
            let g = class_group(&k);
            assert_eq!(
                g.order().unwrap() as i64,
                analytic_class_number(k.discriminant()),
                "m = {m}"
            );
            assert_eq!(g.order().unwrap(), class_number(&k));
            // nontrivial classes give singular points
            assert_eq!(g.is_trivial(), singular_points(&k).is_empty(), "m = {m}");
        }
    }

    #[test]
    fn composition_is_a_group_law() {
        for m in [5, 14, 21, 26, 71, 74] {
            let disc = ctx(m).discriminant();
            let forms = reduced_forms(disc);
            let e = QuadForm::identity(disc);
            for f in &forms {
                assert_eq!(f.compose(&e), *f);
                assert_eq!(f.compose(&f.inverse()), e);
                for g in &forms {
                    assert_eq!(f.compose(g), g.compose(f));
                    for h in &forms {
                        assert_eq!(f.compose(g).compose(h), f.compose(&g.compose(h)));
                    }
                }
            }
        }
    }

    #[test]
    fn group_rendering_and_parsing() {
        let g: AbelianGroup = "Z^9 ⊕ (Z/2)^2".parse().unwrap();
        assert_eq!(g.free_rank, 9);
        assert_eq!(g.torsion, vec![2, 2]);
        assert_eq!(g.to_string(), "Z^9 ⊕ (Z/2)^2");
        let g: AbelianGroup = "(Z/2)^2 ⊕ Z/3".parse().unwrap();
        assert_eq!(g.torsion, vec![2, 6]);
        assert_eq!(g.render_additive(), "(Z/2)^2 ⊕ Z/3");
        assert_eq!(
            "Z/6"
                .parse::<AbelianGroup>()
                .unwrap()
                .render_multiplicative(),
            "Z/6"
        );
        assert_eq!(AbelianGroup::trivial().render_multiplicative(), "1");
        assert_eq!(
            AbelianGroup::from_cyclic_orders(&[4, 6, 0]).torsion,
            vec![2, 12]
        );
    }

    fn arb_m() -> impl Strategy<Value = i64> {
        prop::sample::select(vec![2i64, 5, 6, 7, 10, 11, 15, 19, 23, 74])
    }

    proptest! {
        #[test]
        fn unimodularity_is_symmetric(m in arb_m(), a in -9i64..9, b in -9i64..9, c in -9i64..9, d in -9i64..9) {
            prop_assume!((a, b) != (0, 0) || (c, d) != (0, 0));
            let k = ctx(m);
            let mu = AlgInt::new(a, b);
            let lam = AlgInt::new(c, d);
            let u = is_unimodular(&mu, &lam, &k).unwrap();
            prop_assert_eq!(u, is_unimodular(&lam, &mu, &k).unwrap());
            prop_assert_eq!(u, is_unimodular(&-&mu, &lam, &k).unwrap());
            prop_assert_eq!(u, is_unimodular_small((a, b), (c, d), &k));
            prop_assert_eq!(u, bezout(&mu, &lam, &k).is_some());
        }

        #[test]
        fn elements_of_norm_agree_with_brute_force(m in arb_m(), n in 1i64..200) {
            let k = ctx(m);
            let mut brute = vec![];
            for a in -30i64..=30 {
                for b in -30i64..=30 {
                    let e = AlgInt::new(a, b);
                    if k.norm(&e) == BigInt::from(n) && (a > 0 || (a == 0 && b > 0)) {
                        brute.push(e);
                    }
                }
            }
            brute.sort();
            let got = elements_of_norm(n, &k).unwrap();
            prop_assert_eq!(&got, &brute);
            let is_value = norm_values(&k).take_while(|&v| v <= n).any(|v| v == n);
            prop_assert_eq!(is_value, !got.is_empty());
        }

        #[test]
        fn translation_lands_in_rectangle(m in arb_m(), x in -40i64..40, y in -40i64..40, d in 1i64..9) {
            let k = ctx(m);
            let z = FieldElem::new(rat(x, d), rat(y, d));
            let (z2, t) = translate_to_rectangle(&z, &k);
            prop_assert!(in_rectangle(&z2, &k));
            prop_assert_eq!(&z2 + &t, z);
        }
    }
}
