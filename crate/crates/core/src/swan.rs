//! Swan's reduction: collect hemispheres by increasing `N(mu)`, prune those
//! that are everywhere below others, compute the cell structure of the
//! boundary of `B(alpha_1, ..., alpha_n)` over `D_0`, and stop once no vertex
//! can be strictly below an unexamined hemisphere.
//!
//! The boundary over the plane is the upper envelope of the functions
//! `zeta^2 = r^2 - |z - c|^2`. They differ pairwise by affine functions, so the
//! cell of a hemisphere is a convex polygon cut out by half-planes bounded by
//! agree-lines. Cells are computed by exact half-plane clipping in integer
//! homogeneous coordinates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::{debug, info};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{
    bezout, class_number, elements_of_norm_small, in_rectangle, is_unimodular_small,
    next_norm_value, rectangle_corners, singular_points, translate_to_rectangle,
};
use crate::hemis::{FastHemi, Hemisphere, PointH};
use crate::qfield::{isqrt, rat, rat_int, AlgInt, FieldCtx, FieldElem, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwanError {
    #[error("the hemisphere list does not cover the plane: {0}")]
    NotACollection(String),
    #[error("no vertex with positive height survives")]
    NoPositiveVertex,
    #[error("horizon exceeded {0} without meeting the termination criterion")]
    HorizonExhausted(i64),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// Which hemispheres are erased after a successful cell computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PruneRule {
    /// Erase hemispheres carrying fewer than three distinct vertices.
    #[default]
    ThreeVertex,
    /// Erase only hemispheres carrying no vertex at all.
    Nonempty,
}

/// Hemispheres with centers in the closed rectangle `D_0`, ordered by
/// `N(mu)` then center.
#[derive(Clone, Debug)]
pub struct HemisphereList {
    pub ctx: FieldCtx,
    pub items: Vec<Hemisphere>,
}

impl HemisphereList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_norm(&self) -> i64 {
        self.items.iter().map(|h| h.norm_mu()).max().unwrap_or(0)
    }

    fn sort(&mut self) {
        self.items.sort_by_key(|h| h.sort_key());
    }
}

/// A vertex of the boundary, reduced into `D_0`, with the hemispheres
/// (list index and translation) passing through it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub point: PointH,
    pub supports: Vec<(usize, AlgInt)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet {
    pub vertices: Vec<Vertex>,
}

/// The cell of one hemisphere: its vertices counterclockwise in `coords`,
/// placed above the hemisphere's actual position (possibly outside `D_0`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacePolygon {
    pub hemi: usize,
    pub vertices: Vec<PointH>,
}

/// Output of one cell computation pass.
#[derive(Clone, Debug)]
pub struct VertexHeight {
    pub zeta_sq: Rational,
    pub list: HemisphereList,
    pub vertices: VertexSet,
    pub faces: Vec<FacePolygon>,
}

#[derive(Clone, Debug)]
pub struct Polyhedron {
    pub ctx: FieldCtx,
    pub list: HemisphereList,
    pub vertices: VertexSet,
    pub faces: Vec<FacePolygon>,
    pub zeta_sq: Rational,
    /// Largest norm value whose hemispheres were all examined.
    pub examined_norm: i64,
    pub e_estimate: Rational,
    pub horizons: Vec<i64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SwanConfig {
    pub prune: PruneRule,
    /// Give up past this norm (a guard, never reached in practice).
    pub max_horizon: Option<i64>,
}

// ---------------------------------------------------------------------------
// public steps

/// Unit hemispheres centered at the integers in `D_0`.
pub fn initial_step(ctx: &FieldCtx) -> HemisphereList {
    let mut items = vec![];
    for a in -2..=2 {
        for b in -2..=2 {
            let lam = AlgInt::new(a, b);
            if in_rectangle(&lam.to_field(), ctx) {
                items.push(Hemisphere::new_unchecked(AlgInt::one(), lam, ctx));
            }
        }
    }
    let mut list = HemisphereList { ctx: *ctx, items };
    list.sort();
    list
}

/// Extrapolated size of the largest `N(mu)` needed, used as a first horizon.
pub fn estimate_e(ctx: &FieldCtx, h: u64) -> Rational {
    let m = rat_int(ctx.m());
    let h = rat_int(h as i64);
    if ctx.is_3_mod_4() {
        rat(5, 2) * &m * h - rat_int(2) * m + rat(1, 2)
    } else {
        rat_int(21) * &m * h - rat_int(19) * m
    }
}

/// Adds the hemispheres of `N(mu) = n` not everywhere below a list member.
pub fn record_hemispheres(n: i64, list: &HemisphereList) -> HemisphereList {
    let mut work = WorkSet::new(list);
    work.record(n);
    work.into_list()
}

/// Cells, vertices and the lowest positive vertex height of a list.
pub fn minimal_vertex_height(
    list: &HemisphereList,
    rule: PruneRule,
) -> Result<VertexHeight, SwanError> {
    let mut work = WorkSet::new(list);
    let cells = work.cells_with_erasing(rule)?;
    Ok(VertexHeight {
        zeta_sq: cells.zeta_sq.clone(),
        vertices: cells.vertices.clone(),
        faces: cells.faces.clone(),
        list: work.into_list(),
    })
}

/// Alternates recording and cell computation until Swan's termination
/// criterion holds.
pub fn compute_polyhedron(ctx: &FieldCtx, config: SwanConfig) -> Result<Polyhedron, SwanError> {
    let h = class_number(ctx);
    let e = estimate_e(ctx, h);
    let disc = ctx.discriminant().abs();
    let e_int = e.ceil().to_integer().to_i64().unwrap_or(i64::MAX).max(1);
    let mut horizon = e_int.min(disc).max(1);
    let max_horizon = config.max_horizon.unwrap_or(1 << 40);
    let mut work = WorkSet::new(&initial_step(ctx));
    let mut examined = 1i64;
    let mut horizons = vec![];
    loop {
        if horizon > max_horizon {
            return Err(SwanError::HorizonExhausted(max_horizon));
        }
        horizons.push(horizon);
        let mut n = next_norm_value(examined, ctx);
        while n <= horizon {
            work.record(n);
            examined = n;
            n = next_norm_value(n, ctx);
        }
        info!(
            "m={} examined N(mu) <= {} ({} hemispheres)",
            ctx.m(),
            examined,
            work.list.len()
        );
        match work.cells_with_erasing(config.prune) {
            Err(SwanError::NotACollection(why)) => {
                debug!("not yet a collection: {why}");
                horizon = (horizon * 2).max(next_norm_value(examined, ctx));
            }
            Err(SwanError::NoPositiveVertex) => {
                horizon = (horizon * 2).max(next_norm_value(examined, ctx));
            }
            Err(e) => return Err(e),
            Ok(cells) => {
                let next = next_norm_value(examined, ctx);
                // no hemisphere of N(mu) >= next reaches above zeta^2 >= 1 / next
                if cells.zeta_sq.clone() * rat_int(next) >= Rational::one() {
                    let cells = cells.clone();
                    return Ok(Polyhedron {
                        ctx: *ctx,
                        list: work.into_list(),
                        vertices: cells.vertices,
                        faces: cells.faces,
                        zeta_sq: cells.zeta_sq,
                        examined_norm: examined,
                        e_estimate: e,
                        horizons,
                    });
                }
                let target = (Rational::one() / &cells.zeta_sq).ceil().to_integer();
                horizon = target.to_i64().unwrap_or(i64::MAX).max(next);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// termination audit

/// Result of re-checking Swan's criterion from scratch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub vertices_checked: usize,
    pub pairs_checked: u64,
    pub violations: Vec<String>,
}

/// For every vertex `(z, zeta)` with `zeta > 0`, enumerates all unimodular
/// `(mu, lam)` with `N(mu) zeta^2 < 1` and `|mu z - lam|^2 < 1 - N(mu) zeta^2`
/// without any pruning; each one would put the vertex strictly below.
pub fn audit_termination(poly: &Polyhedron) -> AuditReport {
    let ctx = &poly.ctx;
    let mut report = AuditReport {
        vertices_checked: 0,
        pairs_checked: 0,
        violations: vec![],
    };
    for v in &poly.vertices.vertices {
        let p = &v.point;
        if p.sq_height.is_zero() {
            continue;
        }
        report.vertices_checked += 1;
        let max_n = (Rational::one() / &p.sq_height)
            .ceil()
            .to_integer()
            .to_i64()
            .unwrap();
        for n in 1..=max_n {
            let room = Rational::one() - rat_int(n) * &p.sq_height;
            if !room.is_positive() {
                break;
            }
            for (a, b) in elements_of_norm_small(n, ctx) {
                let mu = AlgInt::new(a, b);
                let w = ctx.fmul(&mu.to_field(), &p.z);
                let (wx, wy) = (w.x.floor().to_integer(), w.y.floor().to_integer());
                for da in -2..=3 {
                    for db in -2..=3 {
                        let lam = AlgInt::from_big(&wx + da, &wy + db);
                        report.pairs_checked += 1;
                        let diff = &w - &lam;
                        if ctx.fnorm(&diff) < room && bezout(&mu, &lam, ctx).is_some() {
                            report
                                .violations
                                .push(format!("vertex {} below S({}, {})", p.z, mu, lam));
                        }
                    }
                }
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// work set: translates of list members near D_0, bucketed by position

const GRID: i64 = 8;

#[derive(Clone, Debug)]
struct Cells {
    zeta_sq: Rational,
    vertices: VertexSet,
    faces: Vec<FacePolygon>,
}

struct WorkSet {
    ctx: FieldCtx,
    list: HemisphereList,
    items: Vec<FastHemi>,
    seen: BTreeSet<(i64, i64, i64)>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    /// list index of the member representing each orbit mod `O`
    primaries: Vec<usize>,
    sqrt_m: i64,
}

impl WorkSet {
    fn new(list: &HemisphereList) -> Self {
        let mut w = WorkSet {
            ctx: list.ctx,
            list: list.clone(),
            items: vec![],
            seen: BTreeSet::new(),
            grid: HashMap::new(),
            primaries: vec![],
            sqrt_m: isqrt(&BigInt::from(list.ctx.m())).to_i64().unwrap(),
        };
        w.rebuild();
        w
    }

    fn into_list(self) -> HemisphereList {
        self.list
    }

    fn rebuild(&mut self) {
        self.list.sort();
        self.items.clear();
        self.seen.clear();
        self.grid.clear();
        self.primaries.clear();
        for i in 0..self.list.items.len() {
            self.register(i);
        }
    }

    /// Doubled `coords` of a lattice translation `a + b w`.
    fn shift_coords2(&self, a: i64, b: i64) -> (i64, i64) {
        if self.ctx.is_3_mod_4() {
            (2 * a - b, b)
        } else {
            (2 * a, 2 * b)
        }
    }

    /// Doubled `coords` bounds of `D_0`.
    fn rect2(&self) -> (i64, i64, i64, i64) {
        if self.ctx.is_3_mod_4() {
            (-1, 1, 0, 1)
        } else {
            (0, 2, 0, 2)
        }
    }

    fn translate_fast(&self, f: &FastHemi, a: i64, b: i64) -> FastHemi {
        let (sx, sy) = self.shift_coords2(a, b);
        let p2 = f.p2 + f.n * sx;
        let q2 = f.q2 + f.n * sy;
        let m = self.ctx.m() as i128;
        let num = (p2 as i128) * (p2 as i128) + m * (q2 as i128) * (q2 as i128);
        debug_assert_eq!(num % (4 * f.n as i128), 0);
        FastHemi {
            n: f.n,
            l: (num / (4 * f.n as i128)) as i64,
            p2,
            q2,
        }
    }

    /// Adds list member `i` and its translates near `D_0`.
    fn register(&mut self, i: usize) {
        let f = self.list.items[i].fast;
        if self.seen.contains(&(f.n, f.p2, f.q2)) {
            return; // a translate of an earlier member, already present
        }
        self.primaries.push(i);
        let (x0, x1, y0, y1) = self.rect2();
        let j = self.sqrt_m;
        for a in -5..=5 {
            for b in -5..=5 {
                let g = self.translate_fast(&f, a, b);
                // center within D_0 grown by 5/2 in x and 5/(2j) in y:
                // p2 / (2n) in [x0/2 - 5/2, x1/2 + 5/2]
                let inside_x = g.p2 >= g.n * (x0 - 5) && g.p2 <= g.n * (x1 + 5);
                let inside_y = g.q2 * j >= g.n * (y0 * j - 5) && g.q2 * j <= g.n * (y1 * j + 5);
                if !(inside_x && inside_y) {
                    continue;
                }
                if !self.seen.insert((g.n, g.p2, g.q2)) {
                    continue;
                }
                let idx = self.items.len();
                self.items.push(g);
                let (cx0, cx1, cy0, cy1) = self.disk_cells(&g);
                for cx in cx0..=cx1 {
                    for cy in cy0..=cy1 {
                        self.grid.entry((cx, cy)).or_default().push(idx);
                    }
                }
            }
        }
    }

    /// Grid cells covering a conservative box around the disk under `g`.
    fn disk_cells(&self, g: &FastHemi) -> (i64, i64, i64, i64) {
        let k = isqrt(&BigInt::from(g.n)).to_i64().unwrap() as i128;
        let j = self.sqrt_m as i128;
        let (n, p2, q2) = (g.n as i128, g.p2 as i128, g.q2 as i128);
        let gr = GRID as i128;
        // x in [p2/(2n) - 1/k, p2/(2n) + 1/k], y in [q2/(2n) - 1/(kj), ...]
        let fx = |sign: i128| ((p2 * k + sign * 2 * n) * gr).div_euclid(2 * n * k);
        let fy = |sign: i128| ((q2 * k * j + sign * 2 * n) * gr).div_euclid(2 * n * k * j);
        (fx(-1) as i64, fx(1) as i64, fy(-1) as i64, fy(1) as i64)
    }

    fn items_in_cells(&self, cx0: i64, cx1: i64, cy0: i64, cy1: i64) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                if let Some(v) = self.grid.get(&(cx, cy)) {
                    out.extend(v.iter().copied());
                }
            }
        }
        out.into_iter().collect()
    }

    // ---- recording ----

    fn record(&mut self, n: i64) {
        let ctx = self.ctx;
        let mut added = vec![];
        for mu in elements_of_norm_small(n, &ctx) {
            for lam in self.lambda_candidates(mu) {
                if !is_unimodular_small(mu, lam, &ctx) {
                    continue;
                }
                let f = fast_from_pair(mu, lam, &ctx);
                if !self.in_rect_fast(&f) {
                    continue;
                }
                if self.is_everywhere_below_some(&f) {
                    continue;
                }
                added.push(Hemisphere::new_unchecked(
                    AlgInt::new(mu.0, mu.1),
                    AlgInt::new(lam.0, lam.1),
                    &ctx,
                ));
            }
        }
        if added.is_empty() {
            return;
        }
        added.sort_by_key(|h| h.sort_key());
        // same norm hemispheres never prune each other except duplicates
        let start = self.list.items.len();
        self.list.items.extend(added);
        for i in start..self.list.items.len() {
            self.register(i);
        }
        debug!(
            "N = {n}: added {} hemispheres",
            self.list.items.len() - start
        );
    }

    fn in_rect_fast(&self, f: &FastHemi) -> bool {
        let (x0, x1, y0, y1) = self.rect2();
        f.p2 >= f.n * x0 && f.p2 <= f.n * x1 && f.q2 >= f.n * y0 && f.q2 <= f.n * y1
    }

    /// All `lam` with `lam / mu` possibly in `D_0`, from the image of its corners.
    fn lambda_candidates(&self, mu: (i64, i64)) -> Vec<(i64, i64)> {
        let ctx = &self.ctx;
        let mu_f = AlgInt::new(mu.0, mu.1).to_field();
        let mut lo = (i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN);
        for (x, y) in rectangle_corners(ctx) {
            let e = ctx.fmul(&ctx.from_coords(&x, &y), &mu_f);
            let (a0, a1) = (
                e.x.floor().to_integer().to_i64().unwrap(),
                e.x.ceil().to_integer().to_i64().unwrap(),
            );
            let (b0, b1) = (
                e.y.floor().to_integer().to_i64().unwrap(),
                e.y.ceil().to_integer().to_i64().unwrap(),
            );
            lo = (lo.0.min(a0), lo.1.min(b0));
            hi = (hi.0.max(a1), hi.1.max(b1));
        }
        let mut out = vec![];
        for a in lo.0..=hi.0 {
            for b in lo.1..=hi.1 {
                out.push((a, b));
            }
        }
        out
    }

    fn is_everywhere_below_some(&self, f: &FastHemi) -> bool {
        let gx = (f.p2 as i128 * GRID as i128).div_euclid(2 * f.n as i128) as i64;
        let gy = (f.q2 as i128 * GRID as i128).div_euclid(2 * f.n as i128) as i64;
        let m = self.ctx.m() as i128;
        if let Some(cands) = self.grid.get(&(gx, gy)) {
            for &i in cands {
                if fast_everywhere_below(f, &self.items[i], m) {
                    return true;
                }
            }
        }
        false
    }

    // ---- cells ----

    fn cells_with_erasing(&mut self, rule: PruneRule) -> Result<Cells, SwanError> {
        let (cells, degenerate) = self.cells()?;
        let doomed: BTreeSet<usize> = degenerate
            .into_iter()
            .filter(|&(_, count)| match rule {
                PruneRule::ThreeVertex => count < 3,
                PruneRule::Nonempty => count == 0,
            })
            .map(|(i, _)| i)
            .collect();
        if doomed.is_empty() {
            return Ok(cells);
        }
        // erase whole orbits mod O
        let keys: BTreeSet<(i64, FieldElem)> = doomed
            .iter()
            .map(|&i| orbit_key(&self.list.items[i]))
            .collect();
        let before = self.list.len();
        self.list.items.retain(|h| !keys.contains(&orbit_key(h)));
        debug!("erased {} hemispheres", before - self.list.len());
        self.rebuild();
        let (cells, degenerate) = self.cells()?;
        if degenerate.iter().any(|&(_, c)| c == 0) && rule == PruneRule::ThreeVertex {
            // only cells with one or two vertices may remain degenerate
            return Err(SwanError::Internal(
                "erasing changed the cell structure".into(),
            ));
        }
        Ok(cells)
    }

    /// Cells of all primary members. Returns also `(list index, distinct
    /// vertex count)` for members whose cell has no interior.
    fn cells(&self) -> Result<(Cells, Vec<(usize, usize)>), SwanError> {
        let ctx = self.ctx;
        let singular: BTreeSet<FieldElem> = singular_points(&ctx)
            .iter()
            .map(|s| s.reduce_mod_lattice().0)
            .collect();
        let mut faces = vec![];
        let mut degenerate = vec![];
        for &i in &self.primaries {
            let h = &self.list.items[i];
            match self.clip_cell(i) {
                CellShape::Polygon(pts) => {
                    let verts: Vec<PointH> =
                        pts.iter().map(|p| p.to_point(&h.fast, &ctx)).collect();
                    faces.push(FacePolygon {
                        hemi: i,
                        vertices: verts,
                    });
                }
                CellShape::Degenerate(count) => degenerate.push((i, count)),
            }
        }
        // collection check
        let mut min_zeta: Option<Rational> = None;
        let mut area = Rational::zero();
        let mut by_key: BTreeMap<(FieldElem, Rational), (PointH, BTreeSet<(usize, AlgInt)>)> =
            BTreeMap::new();
        for face in &faces {
            for v in &face.vertices {
                if v.sq_height.is_negative() {
                    return Err(SwanError::NotACollection(format!(
                        "point {} is under no hemisphere",
                        v.z
                    )));
                }
                let (key, _) = v.z.reduce_mod_lattice();
                if v.sq_height.is_zero() {
                    if !singular.contains(&key) {
                        return Err(SwanError::NotACollection(format!(
                            "non-singular point {} at height zero",
                            v.z
                        )));
                    }
                } else if min_zeta.as_ref().is_none_or(|z| &v.sq_height < z) {
                    min_zeta = Some(v.sq_height.clone());
                }
                let (inside, shift) = translate_to_rectangle(&v.z, &ctx);
                let entry = by_key
                    .entry((key, v.sq_height.clone()))
                    .or_insert_with(|| (PointH::new(inside, v.sq_height.clone()), BTreeSet::new()));
                entry.1.insert((face.hemi, -&shift));
            }
            area += polygon_area(&face.vertices, &ctx);
        }
        if area != ctx.cell_area() {
            return Err(SwanError::Internal(format!(
                "cells cover area {} instead of {}",
                area,
                ctx.cell_area()
            )));
        }
        let Some(zeta_sq) = min_zeta else {
            return Err(SwanError::NoPositiveVertex);
        };
        let vertices = VertexSet {
            vertices: by_key
                .into_values()
                .map(|(point, supports)| Vertex {
                    point,
                    supports: supports.into_iter().collect(),
                })
                .collect(),
        };
        Ok((
            Cells {
                zeta_sq,
                vertices,
                faces,
            },
            degenerate,
        ))
    }

    /// Cell of list member `i` (a primary), clipped from a box containing its disk.
    fn clip_cell(&self, i: usize) -> CellShape {
        let h = self.list.items[i].fast;
        let m = self.ctx.m() as i128;
        let k = isqrt(&BigInt::from(h.n)).to_i64().unwrap() as i128;
        let j = self.sqrt_m as i128;
        let (n, p2, q2) = (h.n as i128, h.p2 as i128, h.q2 as i128);
        // box |x - cx| <= 3/(2k), |y - cy| <= 3/(2kj), counterclockwise edges
        let bottom = Line::new(0, 2 * n * k * j, 3 * n - k * j * q2);
        let right = Line::new(-2 * n * k, 0, k * p2 + 3 * n);
        let top = Line::new(0, -2 * n * k * j, k * j * q2 + 3 * n);
        let left = Line::new(2 * n * k, 0, 3 * n - k * p2);
        let mut poly = Poly::new(vec![bottom, right, top, left]);

        // neighbours whose disks may meet the box, largest first
        let gr = GRID as i128;
        let bx = |s: i128| ((k * p2 + s * 3 * n) * gr).div_euclid(2 * n * k) as i64;
        let by = |s: i128| ((k * j * q2 + s * 3 * n) * gr).div_euclid(2 * n * k * j) as i64;
        let mut nbrs = self.items_in_cells(bx(-1), bx(1), by(-1), by(1));
        nbrs.sort_by_key(|&g| (self.items[g].n, g));
        for g in nbrs {
            let gi = &self.items[g];
            if *gi == h {
                continue;
            }
            let line = beats_line(&h, gi, m);
            if line.a == 0 && line.b == 0 {
                if line.c < 0 {
                    return CellShape::Degenerate(0);
                }
                continue;
            }
            match poly.clip(&line) {
                Some(p) => poly = p,
                None => return CellShape::Degenerate(poly.touching_count(&line)),
            }
        }
        let pts = poly.points();
        CellShape::Polygon(pts)
    }
}

fn orbit_key(h: &Hemisphere) -> (i64, FieldElem) {
    (h.norm_mu(), h.center.reduce_mod_lattice().0)
}

pub(crate) fn fast_from_pair(mu: (i64, i64), lam: (i64, i64), ctx: &FieldCtx) -> FastHemi {
    let (t, nn) = if ctx.is_3_mod_4() {
        (1i64, (1 + ctx.m()) / 4)
    } else {
        (0, ctx.m())
    };
    let norm = |(a, b): (i64, i64)| a * a - t * a * b + nn * b * b;
    // P = lam * conj(mu), conj(a + b w) = (a - t b) - b w
    let conj = (mu.0 - t * mu.1, -mu.1);
    let pa = lam.0 * conj.0 - nn * lam.1 * conj.1;
    let pb = lam.0 * conj.1 + lam.1 * conj.0 - t * lam.1 * conj.1;
    let (p2, q2) = if ctx.is_3_mod_4() {
        (2 * pa - pb, pb)
    } else {
        (2 * pa, 2 * pb)
    };
    FastHemi {
        n: norm(mu),
        l: norm(lam),
        p2,
        q2,
    }
}

/// `h1` everywhere below `h2`, decided on integers.
pub(crate) fn fast_everywhere_below(h1: &FastHemi, h2: &FastHemi, m: i128) -> bool {
    let (n1, n2) = (h1.n as i128, h2.n as i128);
    let qx = h1.p2 as i128 * n2 - h2.p2 as i128 * n1;
    let qy = h1.q2 as i128 * n2 - h2.q2 as i128 * n1;
    let a = qx * qx + m * qy * qy;
    let b = 4 * n1 * n1 * n2;
    let c = 4 * n1 * n2 * n2;
    let s = b - a - c;
    if s < 0 {
        return false;
    }
    match (
        s.checked_mul(s),
        a.checked_mul(c).and_then(|x| x.checked_mul(4)),
    ) {
        (Some(l), Some(r)) => l >= r,
        _ => {
            let (s, a, c) = (BigInt::from(s), BigInt::from(a), BigInt::from(c));
            &s * &s >= BigInt::from(4) * a * c
        }
    }
}

/// Half-plane where `h` is at least as high as `g`: `a x + b y + c >= 0`.
fn beats_line(h: &FastHemi, g: &FastHemi, m: i128) -> Line {
    let (nh, ng) = (h.n as i128, g.n as i128);
    Line::new(
        ng * h.p2 as i128 - nh * g.p2 as i128,
        m * (ng * h.q2 as i128 - nh * g.q2 as i128),
        ng * (1 - h.l as i128) - nh * (1 - g.l as i128),
    )
}

/// Signed area in `coords` units of a counterclockwise polygon.
pub fn polygon_area(vertices: &[PointH], ctx: &FieldCtx) -> Rational {
    let pts: Vec<(Rational, Rational)> = vertices.iter().map(|v| ctx.coords(&v.z)).collect();
    let k = pts.len();
    let mut twice = Rational::zero();
    for i in 0..k {
        let (x0, y0) = &pts[i];
        let (x1, y1) = &pts[(i + 1) % k];
        twice += x0 * y1 - x1 * y0;
    }
    twice / rat_int(2)
}

// ---------------------------------------------------------------------------
// exact convex clipping

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Line {
    a: i128,
    b: i128,
    c: i128,
}

impl Line {
    fn new(a: i128, b: i128, c: i128) -> Self {
        let g = a.gcd(&b).gcd(&c);
        if g > 1 {
            Line {
                a: a / g,
                b: b / g,
                c: c / g,
            }
        } else {
            Line { a, b, c }
        }
    }
}

/// Point `(x / d, y / d)` with `d > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct HPoint {
    x: BigInt,
    y: BigInt,
    d: BigInt,
}

impl HPoint {
    fn meet(l1: &Line, l2: &Line) -> Option<HPoint> {
        let big = |v: i128| BigInt::from(v);
        let d = big(l1.a) * big(l2.b) - big(l2.a) * big(l1.b);
        if d.is_zero() {
            return None;
        }
        let x = big(l1.b) * big(l2.c) - big(l2.b) * big(l1.c);
        let y = big(l1.c) * big(l2.a) - big(l2.c) * big(l1.a);
        Some(if d.is_negative() {
            HPoint {
                x: -x,
                y: -y,
                d: -d,
            }
        } else {
            HPoint { x, y, d }
        })
    }

    fn sign(&self, l: &Line) -> i32 {
        let v =
            BigInt::from(l.a) * &self.x + BigInt::from(l.b) * &self.y + BigInt::from(l.c) * &self.d;
        match v.sign() {
            num_bigint::Sign::Plus => 1,
            num_bigint::Sign::Minus => -1,
            num_bigint::Sign::NoSign => 0,
        }
    }

    fn coords(&self) -> (Rational, Rational) {
        (
            Rational::new(self.x.clone(), self.d.clone()),
            Rational::new(self.y.clone(), self.d.clone()),
        )
    }

    /// Lift on the hemisphere with integer data `f`.
    fn to_point(&self, f: &FastHemi, ctx: &FieldCtx) -> PointH {
        let m = BigInt::from(ctx.m());
        let (x, y, d) = (&self.x, &self.y, &self.d);
        let lin = BigInt::from(f.p2) * x + &m * BigInt::from(f.q2) * y + BigInt::from(1 - f.l) * d;
        let num = lin * d - BigInt::from(f.n) * (x * x + &m * y * y);
        let den = BigInt::from(f.n) * d * d;
        let (cx, cy) = self.coords();
        PointH::new(ctx.from_coords(&cx, &cy), Rational::new(num, den))
    }
}

/// Convex polygon as its cyclic list of edge lines; vertex `i` is the meet of
/// edges `i - 1` and `i`.
#[derive(Clone, Debug)]
struct Poly {
    edges: Vec<Line>,
    verts: Vec<HPoint>,
}

enum CellShape {
    Polygon(Vec<HPoint>),
    /// Cell without interior, with the number of its distinct points.
    Degenerate(usize),
}

impl Poly {
    fn new(edges: Vec<Line>) -> Self {
        let k = edges.len();
        let verts = (0..k)
            .map(|i| HPoint::meet(&edges[(i + k - 1) % k], &edges[i]).expect("box corner"))
            .collect();
        Poly { edges, verts }
    }

    fn points(&self) -> Vec<HPoint> {
        self.verts.clone()
    }

    fn touching_count(&self, l: &Line) -> usize {
        let pts: BTreeSet<(Rational, Rational)> = self
            .verts
            .iter()
            .filter(|v| v.sign(l) == 0)
            .map(|v| v.coords())
            .collect();
        pts.len()
    }

    /// Intersection with `l >= 0`; `None` when it has no interior.
    fn clip(&self, l: &Line) -> Option<Poly> {
        let k = self.verts.len();
        let s: Vec<i32> = self.verts.iter().map(|v| v.sign(l)).collect();
        if s.iter().all(|&x| x >= 0) {
            return Some(self.clone());
        }
        if s.iter().all(|&x| x <= 0) {
            return None;
        }
        let mut pairs: Vec<(Line, Line)> = vec![];
        for i in 0..k {
            let (prev, cur, next) = (s[(i + k - 1) % k], s[i], s[(i + 1) % k]);
            let e_in = self.edges[(i + k - 1) % k];
            let e_out = self.edges[i];
            if cur >= 0 {
                let a = if cur == 0 && prev < 0 { *l } else { e_in };
                let b = if cur == 0 && next < 0 { *l } else { e_out };
                pairs.push((a, b));
            }
            if cur > 0 && next < 0 {
                pairs.push((e_out, *l));
            }
            if cur < 0 && next > 0 {
                pairs.push((*l, e_out));
            }
        }
        let edges: Vec<Line> = pairs.iter().map(|p| p.1).collect();
        let kk = edges.len();
        if kk < 3 {
            return None;
        }
        let mut verts = vec![];
        for i in 0..kk {
            debug_assert_eq!(pairs[i].0, edges[(i + kk - 1) % kk]);
            verts.push(HPoint::meet(&edges[(i + kk - 1) % kk], &edges[i])?);
        }
        Some(Poly { edges, verts })
    }
}
