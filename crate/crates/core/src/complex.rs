//! Cell structure of the bottom of the fundamental polyhedron modulo the
//! translations in `O`, its orbits under `PSL_2(O)`, the subdivision making
//! every stabilizer fix its cell pointwise, and the quotient CW complex.
//!
//! Cells of the retract `X` are kept modulo `O`: a vertex by its reduced
//! position, an edge by `(start, end, shift)` joining `R(start)` to
//! `R(end) + shift`, a face by its cyclic list of `(vertex, shift)`. Orbits
//! under the face pairings are tracked by a union-find carrying, for each
//! cell, a matrix taking its root's representative onto its own.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::bezout;
use crate::hemis::{Hemisphere, PointH};
use crate::homology::IntMatrix;
use crate::isom::{apply, stabilizer, FiniteGroup, IsomError, Matrix2};
use crate::qfield::{rat_int, AlgInt, FieldCtx, FieldElem, Rational};
use crate::swan::Polyhedron;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("face on S({0}) has fewer than three vertices")]
    DegenerateFace(String),
    #[error("edge {0} lies in {1} faces, expected 2")]
    EdgeIncidence(String, usize),
    #[error("no patch face matches the image of the face on S({0})")]
    Unmatched(String),
    #[error("subdivision did not settle: {0}")]
    Subdivision(String),
    #[error("boundary maps do not compose to zero")]
    NotAComplex,
    #[error(transparent)]
    Isom(#[from] IsomError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Reduced position (both basis coordinates in `[0, 1)`) and squared height.
pub type VKey = (FieldElem, Rational);

fn key_of(p: &PointH) -> (VKey, AlgInt) {
    let (frac, t) = p.z.reduce_mod_lattice();
    ((frac, p.sq_height.clone()), t)
}

fn shifted(p: &PointH, t: &AlgInt) -> PointH {
    PointH::new(&p.z + t, p.sq_height.clone())
}

fn orbit_key(h: &Hemisphere) -> (i64, FieldElem) {
    (h.norm_mu(), h.center.reduce_mod_lattice().0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEdge {
    pub start: usize,
    pub end: usize,
    pub shift: AlgInt,
}

/// One slot of a face boundary: the edge, whether the face runs along it
/// forwards, and the translation placing the edge's representative there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSlot {
    pub edge: usize,
    pub sign: i8,
    pub offset: AlgInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchFace {
    /// Supporting hemisphere at the face's actual position.
    pub hemi: Hemisphere,
    /// Counterclockwise in projection.
    pub cycle: Vec<(usize, AlgInt)>,
    pub slots: Vec<EdgeSlot>,
}

/// Bottom cells of the polyhedron modulo translations: a cell structure on
/// the torus `C / O` with singular cusps among the vertices.
#[derive(Clone, Debug)]
pub struct Patch {
    pub ctx: FieldCtx,
    pub vertices: Vec<PointH>,
    pub edges: Vec<PatchEdge>,
    pub faces: Vec<PatchFace>,
}

impl Patch {
    pub fn vertex_at(&self, v: usize, t: &AlgInt) -> PointH {
        shifted(&self.vertices[v], t)
    }

    pub fn edge_points(&self, e: usize) -> (PointH, PointH) {
        let ed = &self.edges[e];
        (
            self.vertices[ed.start].clone(),
            self.vertex_at(ed.end, &ed.shift),
        )
    }

    pub fn face_points(&self, f: usize) -> Vec<PointH> {
        self.faces[f]
            .cycle
            .iter()
            .map(|(v, t)| self.vertex_at(*v, t))
            .collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.vertices.len(), self.edges.len(), self.faces.len()]
    }

    /// `V - E + F`, zero for a cell structure on the torus.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn singular_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v].sq_height.is_zero())
            .collect()
    }

    /// Connectivity of the 1-skeleton.
    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        if n == 0 {
            return false;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (root(&mut parent, e.start), root(&mut parent, e.end));
            parent[a.max(b)] = a.min(b);
        }
        (0..n).all(|v| root(&mut parent, v) == 0)
    }
}

/// Directions and splits requested by the subdivision step.
#[derive(Clone, Debug, Default)]
struct Refinement {
    /// Extra vertices, inserted into the edges containing them.
    points: BTreeSet<VKey>,
    /// Chords (point and direction in `coords`, relative to the face's stored
    /// position) splitting a face, keyed by its hemisphere orbit.
    chords: BTreeMap<(i64, FieldElem), [Rational; 4]>,
}

// ---------------------------------------------------------------------------
// extraction

/// Cells of the boundary over `D_0` modulo `O`, with every vertex lying on an
/// edge inserted into it.
pub fn extract_boundary_cells(poly: &Polyhedron) -> Result<Patch, ComplexError> {
    match build_patch(poly, &Refinement::default())? {
        Built::Patch(p) => Ok(p),
        Built::NeedPoints(_) => Err(ComplexError::Invariant("chord without vertices".into())),
    }
}

/// The Flöge retract keeps exactly the bottom cells; the patch holds nothing
/// else, so this checks its shape and passes it on.
pub fn floege_complex(patch: Patch) -> Result<Patch, ComplexError> {
    if !patch.is_connected() {
        return Err(ComplexError::Invariant("patch is disconnected".into()));
    }
    if patch.euler_characteristic() != 0 {
        return Err(ComplexError::Invariant(format!(
            "V - E + F = {} on the torus",
            patch.euler_characteristic()
        )));
    }
    Ok(patch)
}

enum Built {
    Patch(Patch),
    NeedPoints(Vec<VKey>),
}

fn build_patch(poly: &Polyhedron, refine: &Refinement) -> Result<Built, ComplexError> {
    let ctx = poly.ctx;
    let mut pool: BTreeSet<VKey> = refine.points.clone();
    for f in &poly.faces {
        for v in &f.vertices {
            pool.insert(key_of(v).0);
        }
    }
    let pool: Vec<(VKey, f64, f64)> = pool
        .into_iter()
        .map(|k| {
            let (x, y) = (k.0.x.to_f64().unwrap(), k.0.y.to_f64().unwrap());
            (k, x, y)
        })
        .collect();

    let mut polygons: Vec<(Hemisphere, Vec<PointH>)> = vec![];
    let mut wanted = vec![];
    for f in &poly.faces {
        let h = poly.list.items[f.hemi].clone();
        if f.vertices.len() < 3 {
            return Err(ComplexError::DegenerateFace(format!("{}, {}", h.mu, h.lam)));
        }
        let pts = insert_collinear(&f.vertices, &pool, &h, &ctx)?;
        match refine.chords.get(&orbit_key(&h)) {
            None => polygons.push((h, pts)),
            Some(chord) => match split_polygon(&pts, chord, &ctx) {
                Ok((a, b)) => {
                    polygons.push((h.clone(), a));
                    polygons.push((h, b));
                }
                Err(missing) => wanted.extend(missing),
            },
        }
    }
    if !wanted.is_empty() {
        return Ok(Built::NeedPoints(wanted));
    }

    let mut vkeys = BTreeSet::new();
    for (_, pts) in &polygons {
        for p in pts {
            vkeys.insert(key_of(p).0);
        }
    }
    let vindex: BTreeMap<VKey, usize> = vkeys
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let vertices: Vec<PointH> = vkeys.into_iter().map(|(z, s)| PointH::new(z, s)).collect();

    let mut cycles = vec![];
    let mut edge_keys: BTreeMap<(usize, usize, AlgInt), usize> = BTreeMap::new();
    for (h, pts) in &polygons {
        let cycle: Vec<(usize, AlgInt)> = pts
            .iter()
            .map(|p| {
                let (k, t) = key_of(p);
                (vindex[&k], t)
            })
            .collect();
        let k = cycle.len();
        for i in 0..k {
            let (key, _, _) = edge_key(&cycle[i], &cycle[(i + 1) % k]);
            *edge_keys.entry(key).or_insert(0) += 1;
        }
        cycles.push((h.clone(), cycle));
    }
    for (key, count) in &edge_keys {
        if *count != 2 {
            return Err(ComplexError::EdgeIncidence(
                format!("{} -> {} + {}", key.0, key.1, key.2),
                *count,
            ));
        }
    }
    let eindex: BTreeMap<(usize, usize, AlgInt), usize> = edge_keys
        .keys()
        .cloned()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let edges = eindex
        .keys()
        .map(|(a, b, t)| PatchEdge {
            start: *a,
            end: *b,
            shift: t.clone(),
        })
        .collect();
    let faces = cycles
        .into_iter()
        .map(|(hemi, cycle)| {
            let k = cycle.len();
            let slots = (0..k)
                .map(|i| {
                    let (key, sign, offset) = edge_key(&cycle[i], &cycle[(i + 1) % k]);
                    EdgeSlot {
                        edge: eindex[&key],
                        sign,
                        offset,
                    }
                })
                .collect();
            PatchFace { hemi, cycle, slots }
        })
        .collect();
    let patch = Patch {
        ctx,
        vertices,
        edges,
        faces,
    };
    // every requested point must have landed on some edge
    let present: BTreeSet<VKey> = patch.vertices.iter().map(|p| key_of(p).0).collect();
    for k in &refine.points {
        if !present.contains(k) {
            return Err(ComplexError::Invariant(format!(
                "point {} lies on no edge",
                k.0
            )));
        }
    }
    Ok(Built::Patch(patch))
}

/// Canonical edge key for the oriented slot `a -> b`, with the sign of the
/// slot relative to it and the translation of the representative.
fn edge_key(a: &(usize, AlgInt), b: &(usize, AlgInt)) -> ((usize, usize, AlgInt), i8, AlgInt) {
    let fwd = (a.0, b.0, &b.1 - &a.1);
    let bwd = (b.0, a.0, &a.1 - &b.1);
    if fwd <= bwd {
        (fwd, 1, a.1.clone())
    } else {
        (bwd, -1, b.1.clone())
    }
}

fn xy(p: &PointH, ctx: &FieldCtx) -> (Rational, Rational) {
    ctx.coords(&p.z)
}

/// Parameter of `r` along the open segment `p q`, if it lies there.
fn on_open_segment(
    p: &(Rational, Rational),
    q: &(Rational, Rational),
    r: &(Rational, Rational),
) -> Option<Rational> {
    let (dx, dy) = (&q.0 - &p.0, &q.1 - &p.1);
    let (ex, ey) = (&r.0 - &p.0, &r.1 - &p.1);
    if &dx * &ey != &dy * &ex {
        return None;
    }
    let len = &dx * &dx + &dy * &dy;
    let t = (&ex * &dx + &ey * &dy) / len;
    (t.is_positive() && t < Rational::one()).then_some(t)
}

fn insert_collinear(
    verts: &[PointH],
    pool: &[(VKey, f64, f64)],
    h: &Hemisphere,
    ctx: &FieldCtx,
) -> Result<Vec<PointH>, ComplexError> {
    // bounding box in basis coordinates
    let fx: Vec<f64> = verts.iter().map(|v| v.z.x.to_f64().unwrap()).collect();
    let fy: Vec<f64> = verts.iter().map(|v| v.z.y.to_f64().unwrap()).collect();
    let eps = 1e-9;
    let (x0, x1) = (
        fx.iter().cloned().fold(f64::MAX, f64::min) - eps,
        fx.iter().cloned().fold(f64::MIN, f64::max) + eps,
    );
    let (y0, y1) = (
        fy.iter().cloned().fold(f64::MAX, f64::min) - eps,
        fy.iter().cloned().fold(f64::MIN, f64::max) + eps,
    );
    let mut candidates = vec![];
    for (k, kx, ky) in pool {
        for a in (x0 - kx).ceil() as i64..=(x1 - kx).floor() as i64 {
            for b in (y0 - ky).ceil() as i64..=(y1 - ky).floor() as i64 {
                candidates.push(PointH::new(&k.0 + &AlgInt::new(a, b), k.1.clone()));
            }
        }
    }
    let pos: Vec<(Rational, Rational)> = verts.iter().map(|v| xy(v, ctx)).collect();
    let cpos: Vec<(Rational, Rational)> = candidates.iter().map(|c| xy(c, ctx)).collect();
    let k = verts.len();
    let mut out = vec![];
    for i in 0..k {
        out.push(verts[i].clone());
        let mut inner: Vec<(Rational, PointH)> = vec![];
        for (c, cp) in candidates.iter().zip(&cpos) {
            if let Some(t) = on_open_segment(&pos[i], &pos[(i + 1) % k], cp) {
                let lifted = &h.sq_radius - ctx.fnorm(&(&c.z - &h.center));
                if lifted != c.sq_height {
                    return Err(ComplexError::Invariant(format!(
                        "vertex {} over an edge of S({}, {}) at another height",
                        c.z, h.mu, h.lam
                    )));
                }
                inner.push((t, c.clone()));
            }
        }
        inner.sort_by(|a, b| a.0.cmp(&b.0));
        out.extend(inner.into_iter().map(|(_, p)| p));
    }
    Ok(out)
}

/// Splits a convex polygon along the line through `chord[0..2]` with
/// direction `chord[2..4]`. Fails with the boundary points that must first
/// become vertices.
fn split_polygon(
    pts: &[PointH],
    chord: &[Rational; 4],
    ctx: &FieldCtx,
) -> Result<(Vec<PointH>, Vec<PointH>), Vec<VKey>> {
    let side = |p: &PointH| {
        let (x, y) = xy(p, ctx);
        &chord[2] * (y - &chord[1]) - &chord[3] * (x - &chord[0])
    };
    let s: Vec<Rational> = pts.iter().map(side).collect();
    let on: Vec<usize> = (0..pts.len()).filter(|&i| s[i].is_zero()).collect();
    if on.len() == 2 && on[1] - on[0] != 1 && !(on[0] == 0 && on[1] == pts.len() - 1) {
        let (i, j) = (on[0], on[1]);
        let a = pts[i..=j].to_vec();
        let mut b = pts[j..].to_vec();
        b.extend_from_slice(&pts[..=i]);
        return Ok((a, b));
    }
    // crossings in edge interiors become vertices first
    let k = pts.len();
    let mut missing = vec![];
    for i in 0..k {
        let (a, b) = (&s[i], &s[(i + 1) % k]);
        if (a.is_positive() && b.is_negative()) || (a.is_negative() && b.is_positive()) {
            let t = a / (a - b);
            let p = &pts[i];
            let q = &pts[(i + 1) % k];
            let z = &p.z + &(&q.z - &p.z).scale(&t);
            // the chord point lies on the arc over the edge; its height
            // comes from either endpoint's hemisphere and is filled in by the
            // caller through the edge insertion, so lift via the edge circle
            missing.push((z, p.sq_height.clone()));
        }
    }
    Err(missing)
}

// ---------------------------------------------------------------------------
// orbits

/// Union-find over the cells of one dimension. For each cell `c`,
/// `g[c] R(parent[c]) = R(c)` with orientation sign `sign[c]`.
#[derive(Clone, Debug)]
pub struct CellOrbits {
    parent: Vec<usize>,
    g: Vec<Matrix2>,
    sign: Vec<i8>,
    /// Elements of the setwise stabilizer of a root's representative found as
    /// cycles, with their orientation signs.
    pub loops: BTreeMap<usize, Vec<(Matrix2, i8)>>,
}

impl CellOrbits {
    fn new(n: usize) -> Self {
        CellOrbits {
            parent: (0..n).collect(),
            g: vec![Matrix2::identity(); n],
            sign: vec![1; n],
            loops: BTreeMap::new(),
        }
    }

    /// `(root, g, sign)` with `g R(root) = R(c)`.
    pub fn find(&mut self, c: usize, ctx: &FieldCtx) -> (usize, Matrix2, i8) {
        if self.parent[c] == c {
            return (c, Matrix2::identity(), 1);
        }
        let p = self.parent[c];
        let (r, gp, sp) = self.find(p, ctx);
        let g = self.g[c].mul(&gp, ctx);
        let s = self.sign[c] * sp;
        self.parent[c] = r;
        self.g[c] = g.clone();
        self.sign[c] = s;
        (r, g, s)
    }

    /// Records `g R(c) = R(d)` with orientation sign `s`.
    fn join(&mut self, c: usize, d: usize, g: &Matrix2, s: i8, ctx: &FieldCtx) {
        let (rc, gc, sc) = self.find(c, ctx);
        let (rd, gd, sd) = self.find(d, ctx);
        let elem = gd.inverse().mul(g, ctx).mul(&gc, ctx);
        let sign = sc * s * sd;
        if rc == rd {
            if !(elem.is_identity() && sign == 1) {
                let l = self.loops.entry(rc).or_default();
                if !l.contains(&(elem.clone(), sign)) {
                    l.push((elem, sign));
                }
            }
        } else if rc < rd {
            self.parent[rd] = rc;
            self.g[rd] = elem;
            self.sign[rd] = sign;
            if let Some(l) = self.loops.remove(&rd) {
                for (x, xs) in l {
                    let back = self.g[rd].inverse().mul(&x, ctx).mul(&self.g[rd], ctx);
                    self.loops.entry(rc).or_default().push((back, xs));
                }
            }
        } else {
            self.parent[rc] = rd;
            self.g[rc] = elem.inverse();
            self.sign[rc] = sign;
            if let Some(l) = self.loops.remove(&rc) {
                for (x, xs) in l {
                    let back = elem.mul(&x, ctx).mul(&elem.inverse(), ctx);
                    self.loops.entry(rd).or_default().push((back, xs));
                }
            }
        }
    }

    pub fn roots(&mut self, ctx: &FieldCtx) -> Vec<usize> {
        let n = self.parent.len();
        (0..n).filter(|&c| self.find(c, ctx).0 == c).collect()
    }

    pub fn members(&mut self, root: usize, ctx: &FieldCtx) -> Vec<usize> {
        let n = self.parent.len();
        (0..n).filter(|&c| self.find(c, ctx).0 == root).collect()
    }
}

/// Orbits of vertices, edges and faces of a patch.
#[derive(Clone, Debug)]
pub struct Orbits {
    pub vertices: CellOrbits,
    pub edges: CellOrbits,
    pub faces: CellOrbits,
}

/// The matrix pairing the face on `S(mu, lam)` with the face on
/// `S(mu, -y)`, where `x mu + y lam = 1`.
pub fn face_pairing(h: &Hemisphere, ctx: &FieldCtx) -> Matrix2 {
    let (x, y) = bezout(&h.mu, &h.lam, ctx).expect("unimodular pair");
    Matrix2::new(-&y, -&x, h.mu.clone(), -&h.lam, ctx).expect("determinant one")
}

fn face_signature(cycle: &[(usize, AlgInt)]) -> (Vec<(usize, AlgInt)>, AlgInt) {
    let mut best: Option<(Vec<(usize, AlgInt)>, AlgInt)> = None;
    for (_, t0) in cycle {
        let mut s: Vec<(usize, AlgInt)> = cycle.iter().map(|(v, t)| (*v, t - t0)).collect();
        s.sort();
        if best.as_ref().is_none_or(|b| s < b.0) {
            best = Some((s, t0.clone()));
        }
    }
    best.expect("nonempty face")
}

enum Identified {
    Orbits(Orbits),
    NeedPoints(Vec<VKey>),
}

/// Orbits of the patch cells under the face pairings and translations.
pub fn identify_cells(patch: &Patch) -> Result<Orbits, ComplexError> {
    match identify_inner(patch)? {
        Identified::Orbits(o) => Ok(o),
        Identified::NeedPoints(p) => Err(ComplexError::Invariant(format!(
            "{} face pairing images are not vertices",
            p.len()
        ))),
    }
}

fn identify_inner(patch: &Patch) -> Result<Identified, ComplexError> {
    let ctx = patch.ctx;
    let vindex: BTreeMap<VKey, usize> = patch
        .vertices
        .iter()
        .enumerate()
        .map(|(i, p)| (key_of(p).0, i))
        .collect();
    let mut signatures = BTreeMap::new();
    for (f, face) in patch.faces.iter().enumerate() {
        let (sig, anchor) = face_signature(&face.cycle);
        signatures.insert(sig, (f, anchor));
    }

    // images of every face under its pairing, computed in parallel
    let images: Vec<(Matrix2, Vec<(VKey, AlgInt)>)> = patch
        .faces
        .par_iter()
        .enumerate()
        .map(|(f, face)| {
            let g = face_pairing(&face.hemi, &ctx);
            let imgs = patch
                .face_points(f)
                .iter()
                .map(|p| key_of(&apply(&g, p, &ctx)))
                .collect();
            (g, imgs)
        })
        .collect();

    let mut missing = BTreeSet::new();
    for (_, imgs) in &images {
        for (k, _) in imgs {
            if !vindex.contains_key(k) {
                missing.insert(k.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Ok(Identified::NeedPoints(missing.into_iter().collect()));
    }

    let mut orbits = Orbits {
        vertices: CellOrbits::new(patch.vertices.len()),
        edges: CellOrbits::new(patch.edges.len()),
        faces: CellOrbits::new(patch.faces.len()),
    };
    for (f, (g, imgs)) in images.iter().enumerate() {
        let face = &patch.faces[f];
        let image: Vec<(usize, AlgInt)> =
            imgs.iter().map(|(k, t)| (vindex[k], t.clone())).collect();
        let (sig, anchor) = face_signature(&image);
        let Some((f2, anchor2)) = signatures.get(&sig) else {
            return Err(ComplexError::Unmatched(format!(
                "{}, {}",
                face.hemi.mu, face.hemi.lam
            )));
        };
        let u = &anchor - anchor2;
        let target = &patch.faces[*f2];
        let k = target.cycle.len();
        let first = (image[0].0, &image[0].1 - &u);
        let second = (image[1].0, &image[1].1 - &u);
        let j = target
            .cycle
            .iter()
            .position(|x| *x == first)
            .expect("vertex of matched face");
        let sign = if target.cycle[(j + 1) % k] == second {
            1
        } else if target.cycle[(j + k - 1) % k] == second {
            -1
        } else {
            return Err(ComplexError::Invariant(
                "pairing scrambles a face boundary".into(),
            ));
        };
        let gf = Matrix2::translation(&-&u).mul(g, &ctx);
        orbits.faces.join(f, *f2, &gf, sign, &ctx);

        for (i, (v, t)) in face.cycle.iter().enumerate() {
            let (v2, s2) = &image[i];
            let gv = Matrix2::translation(&-s2)
                .mul(g, &ctx)
                .mul(&Matrix2::translation(t), &ctx);
            orbits.vertices.join(*v, *v2, &gv, 1, &ctx);
        }
        let n = face.cycle.len();
        for i in 0..n {
            let slot = &face.slots[i];
            let (key2, sign2, off2) = edge_key(&image[i], &image[(i + 1) % n]);
            let e2 = patch
                .edges
                .iter()
                .position(|e| (e.start, e.end, &e.shift) == (key2.0, key2.1, &key2.2))
                .ok_or_else(|| ComplexError::Invariant("image of an edge is not an edge".into()))?;
            let ge = Matrix2::translation(&-&off2)
                .mul(g, &ctx)
                .mul(&Matrix2::translation(&slot.offset), &ctx);
            orbits
                .edges
                .join(slot.edge, e2, &ge, slot.sign * sign2, &ctx);
        }
    }
    Ok(Identified::Orbits(orbits))
}

// ---------------------------------------------------------------------------
// subdivision

/// Coordinates `(point, direction)` of the projected axis of an involution:
/// the line through `a / c` in direction `i / c`.
fn axis_line(s: &Matrix2, ctx: &FieldCtx) -> [Rational; 4] {
    let c = s.c.to_field();
    let base = ctx
        .fdiv(&s.a.to_field(), &c)
        .expect("involution with c != 0");
    let (bx, by) = ctx.coords(&base);
    let (cx, cy) = ctx.coords(&c);
    [bx, by, rat_int(ctx.m()) * cy, cx]
}

/// The point of the edge `p q` fixed by the involution `s` swapping its ends.
fn flip_point(s: &Matrix2, p: &PointH, q: &PointH, ctx: &FieldCtx) -> Result<PointH, ComplexError> {
    let [ax, ay, dx, dy] = axis_line(s, ctx);
    let (px, py) = xy(p, ctx);
    let (qx, qy) = xy(q, ctx);
    let (ex, ey) = (&qx - &px, &qy - &py);
    // p + t e = a + u d
    let det = &ex * &dy - &ey * &dx;
    if det.is_zero() {
        return Err(ComplexError::Invariant(
            "flipped edge parallel to the axis".into(),
        ));
    }
    let t = ((&ax - &px) * &dy - (&ay - &py) * &dx) / det;
    if !(t.is_positive() && t < Rational::one()) {
        return Err(ComplexError::Invariant(
            "axis misses the flipped edge".into(),
        ));
    }
    let z = &p.z + &(&q.z - &p.z).scale(&t);
    let centre = ctx.fdiv(&s.a.to_field(), &s.c.to_field()).unwrap();
    let sq = Rational::one() / Rational::from_integer(ctx.norm(&s.c)) - ctx.fnorm(&(&z - &centre));
    let fixed = PointH::new(z, sq);
    if apply(s, &fixed, ctx) != fixed {
        return Err(ComplexError::Invariant("flip point is not fixed".into()));
    }
    Ok(fixed)
}

/// What one more round of subdivision must add, or `None` when every
/// stabilizer already fixes its cell pointwise.
fn refinement_needed(
    patch: &Patch,
    orbits: &mut Orbits,
) -> Result<Option<Refinement>, ComplexError> {
    let ctx = patch.ctx;
    let mut refine = Refinement::default();
    let edge_loops = orbits.edges.loops.clone();
    for (root, loops) in edge_loops {
        let Some((s, _)) = loops.iter().find(|(_, sg)| *sg < 0) else {
            continue;
        };
        let (p, q) = patch.edge_points(root);
        let fixed = flip_point(s, &p, &q, &ctx)?;
        for e in orbits.edges.members(root, &ctx) {
            let (_, g, _) = orbits.edges.find(e, &ctx);
            refine.points.insert(key_of(&apply(&g, &fixed, &ctx)).0);
        }
    }
    let face_loops = orbits.faces.loops.clone();
    for (root, loops) in face_loops {
        for (s, sg) in &loops {
            if *sg > 0 {
                return Err(ComplexError::Invariant(format!(
                    "face rotated onto itself by {s}"
                )));
            }
            if !s.trace().is_zero() {
                return Err(ComplexError::Invariant(format!(
                    "face reflected by {s} of nonzero trace"
                )));
            }
        }
        let Some((s, _)) = loops.first() else {
            continue;
        };
        for f in orbits.faces.members(root, &ctx) {
            let (_, g, _) = orbits.faces.find(f, &ctx);
            let sf = g.mul(s, &ctx).mul(&g.inverse(), &ctx);
            refine
                .chords
                .insert(orbit_key(&patch.faces[f].hemi), axis_line(&sf, &ctx));
        }
    }
    if refine.points.is_empty() && refine.chords.is_empty() {
        Ok(None)
    } else {
        Ok(Some(refine))
    }
}

/// Extraction, identification and subdivision until stabilizers fix their
/// cells pointwise.
pub fn subdivide(poly: &Polyhedron) -> Result<(Patch, Orbits), ComplexError> {
    let mut refine = Refinement::default();
    for round in 0..8 {
        let patch = match build_patch(poly, &refine)? {
            Built::Patch(p) => floege_complex(p)?,
            Built::NeedPoints(pts) => {
                refine.points.extend(lift_chord_points(poly, pts));
                continue;
            }
        };
        let mut orbits = match identify_inner(&patch)? {
            Identified::Orbits(o) => o,
            Identified::NeedPoints(pts) => {
                debug!(
                    "round {round}: {} pairing images become vertices",
                    pts.len()
                );
                refine.points.extend(pts);
                continue;
            }
        };
        match refinement_needed(&patch, &mut orbits)? {
            None => return Ok((patch, orbits)),
            Some(more) => {
                debug!(
                    "round {round}: {} flip points, {} face chords",
                    more.points.len(),
                    more.chords.len()
                );
                let before = (refine.points.len(), refine.chords.len());
                refine.points.extend(more.points);
                refine.chords.extend(more.chords);
                if (refine.points.len(), refine.chords.len()) == before {
                    return Err(ComplexError::Subdivision("no progress".into()));
                }
            }
        }
    }
    Err(ComplexError::Subdivision("too many rounds".into()))
}

/// Gives chord crossings their true height on the surface.
fn lift_chord_points(poly: &Polyhedron, pts: Vec<VKey>) -> Vec<VKey> {
    let ctx = &poly.ctx;
    pts.into_iter()
        .map(|(z, _)| {
            let best = poly
                .list
                .items
                .iter()
                .flat_map(|h| {
                    (-2..=2).flat_map(move |a| {
                        (-2..=2).map(move |b| h.translate(&AlgInt::new(a, b), ctx))
                    })
                })
                .map(|h| &h.sq_radius - ctx.fnorm(&(&z - &h.center)))
                .max()
                .expect("nonempty list");
            key_of(&PointH::new(z, best)).0
        })
        .collect()
}

// ---------------------------------------------------------------------------
// quotient

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeInclusion {
    pub start_vertex: usize,
    pub end_vertex: usize,
    /// For each element of the edge stabilizer, its index in the stabilizer
    /// of the start (end) vertex orbit representative; `None` at a cusp.
    pub start_images: Vec<Option<usize>>,
    pub end_images: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientComplex {
    pub m: i64,
    pub counts: [usize; 3],
    pub d1: IntMatrix,
    pub d2: IntMatrix,
    pub vertex_points: Vec<PointH>,
    /// Stabilizers at the vertex representatives; `None` for singular cusps.
    pub vertex_groups: Vec<Option<FiniteGroup>>,
    pub edge_orders: Vec<usize>,
    pub edge_inclusions: Vec<EdgeInclusion>,
}

impl QuotientComplex {
    pub fn singular_flags(&self) -> Vec<bool> {
        self.vertex_groups.iter().map(|g| g.is_none()).collect()
    }

    pub fn vertex_orders(&self) -> Vec<Option<usize>> {
        self.vertex_groups
            .iter()
            .map(|g| g.as_ref().map(|g| g.order()))
            .collect()
    }
}

const STABILIZER_ORDERS: [usize; 6] = [1, 2, 3, 4, 6, 12];

/// One cell per orbit, boundary maps, and stabilizer data.
pub fn quotient_complex(
    patch: &Patch,
    orbits: &mut Orbits,
) -> Result<QuotientComplex, ComplexError> {
    let ctx = patch.ctx;
    let vroots = orbits.vertices.roots(&ctx);
    let eroots = orbits.edges.roots(&ctx);
    let froots = orbits.faces.roots(&ctx);
    let vpos: BTreeMap<usize, usize> = vroots.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let epos: BTreeMap<usize, usize> = eroots.iter().enumerate().map(|(i, r)| (*r, i)).collect();

    let mut d1 = IntMatrix::zeros(vroots.len(), eroots.len());
    let one = BigInt::one();
    for (j, &e) in eroots.iter().enumerate() {
        let ed = &patch.edges[e];
        let a = vpos[&orbits.vertices.find(ed.start, &ctx).0];
        let b = vpos[&orbits.vertices.find(ed.end, &ctx).0];
        d1.add(b, j, &one);
        d1.add(a, j, &-&one);
    }
    let mut d2 = IntMatrix::zeros(eroots.len(), froots.len());
    for (k, &f) in froots.iter().enumerate() {
        for slot in &patch.faces[f].slots {
            let (r, _, s) = orbits.edges.find(slot.edge, &ctx);
            d2.add(epos[&r], k, &BigInt::from(slot.sign * s));
        }
    }
    if !d1.mul(&d2).is_zero() {
        return Err(ComplexError::NotAComplex);
    }

    // vertex stabilizers, computed at the highest point of each orbit
    let mut plans = vec![];
    for &r in &vroots {
        if patch.vertices[r].sq_height.is_zero() {
            plans.push(None);
            continue;
        }
        let members = orbits.vertices.members(r, &ctx);
        let top = *members
            .iter()
            .max_by(|&&a, &&b| {
                patch.vertices[a]
                    .sq_height
                    .cmp(&patch.vertices[b].sq_height)
                    .then(b.cmp(&a))
            })
            .unwrap();
        let (_, g, _) = orbits.vertices.find(top, &ctx);
        plans.push(Some((top, g)));
    }
    let vertex_groups: Vec<Option<FiniteGroup>> = plans
        .par_iter()
        .map(|plan| -> Result<Option<FiniteGroup>, ComplexError> {
            match plan {
                None => Ok(None),
                Some((top, g)) => {
                    let at_top = stabilizer(&patch.vertices[*top], &ctx)?;
                    Ok(Some(at_top.conjugate(&g.inverse(), &ctx)))
                }
            }
        })
        .collect::<Result<_, _>>()?;

    for (i, grp) in vertex_groups.iter().enumerate() {
        let Some(grp) = grp else { continue };
        if !STABILIZER_ORDERS.contains(&grp.order()) {
            return Err(ComplexError::Invariant(format!(
                "vertex stabilizer of order {}",
                grp.order()
            )));
        }
        for (x, _) in orbits.vertices.loops.get(&vroots[i]).into_iter().flatten() {
            if grp.index_of(x).is_none() {
                return Err(ComplexError::Invariant(format!(
                    "cycle element {x} outside the vertex stabilizer"
                )));
            }
        }
    }

    // edge stabilizers and their images in the vertex stabilizers
    let mut edge_inclusions = vec![];
    let mut edge_orders = vec![];
    for &e in &eroots {
        let ed = &patch.edges[e];
        let (ra, ga, _) = orbits.vertices.find(ed.start, &ctx);
        let (rb, gb, _) = orbits.vertices.find(ed.end, &ctx);
        let gb = Matrix2::translation(&ed.shift).mul(&gb, &ctx);
        let (p, q) = patch.edge_points(e);
        let ga_group = vertex_groups[vpos[&ra]]
            .as_ref()
            .map(|g| g.conjugate(&ga, &ctx));
        let gb_group = vertex_groups[vpos[&rb]]
            .as_ref()
            .map(|g| g.conjugate(&gb, &ctx));
        let elements: Vec<Matrix2> = match (&ga_group, &gb_group) {
            (Some(g), _) => g
                .elements
                .iter()
                .filter(|x| apply(x, &q, &ctx) == q)
                .cloned()
                .collect(),
            (None, Some(g)) => g
                .elements
                .iter()
                .filter(|x| apply(x, &p, &ctx) == p)
                .cloned()
                .collect(),
            (None, None) => stabilizer(&interior_point(patch, e)?, &ctx)?.elements,
        };
        for x in &elements {
            if apply(x, &p, &ctx) != p || apply(x, &q, &ctx) != q {
                return Err(ComplexError::Invariant(
                    "edge stabilizer moves an endpoint".into(),
                ));
            }
        }
        let image = |root: usize, conj: &Matrix2| -> Vec<Option<usize>> {
            let grp = vertex_groups[vpos[&root]].as_ref();
            elements
                .iter()
                .map(|x| {
                    grp.map(|g| {
                        g.index_of(&conj.inverse().mul(x, &ctx).mul(conj, &ctx))
                            .expect("edge element in vertex group")
                    })
                })
                .collect()
        };
        edge_orders.push(elements.len());
        edge_inclusions.push(EdgeInclusion {
            start_vertex: vpos[&ra],
            end_vertex: vpos[&rb],
            start_images: image(ra, &ga),
            end_images: image(rb, &gb),
        });
    }

    Ok(QuotientComplex {
        m: ctx.m(),
        counts: [vroots.len(), eroots.len(), froots.len()],
        d1,
        d2,
        vertex_points: vroots.iter().map(|&r| patch.vertices[r].clone()).collect(),
        vertex_groups,
        edge_orders,
        edge_inclusions,
    })
}

/// A point inside edge `e`, on the hemisphere of a face containing it.
fn interior_point(patch: &Patch, e: usize) -> Result<PointH, ComplexError> {
    let ctx = &patch.ctx;
    let (p, q) = patch.edge_points(e);
    let mid = (&p.z + &q.z).scale(&Rational::new(BigInt::one(), BigInt::from(2)));
    for face in &patch.faces {
        if let Some(slot) = face.slots.iter().find(|s| s.edge == e) {
            let at = &mid + &slot.offset;
            let sq = &face.hemi.sq_radius - ctx.fnorm(&(&at - &face.hemi.center));
            return Ok(PointH::new(mid, sq));
        }
    }
    Err(ComplexError::Invariant(format!("edge {e} bounds no face")))
}

/// The whole pipeline from a polyhedron to its quotient complex.
pub fn build_quotient(poly: &Polyhedron) -> Result<QuotientComplex, ComplexError> {
    let (patch, mut orbits) = subdivide(poly)?;
    quotient_complex(&patch, &mut orbits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{class_number, singular_points};
    use crate::homology::homology_of_complex;
    use crate::swan::{compute_polyhedron, SwanConfig};
    use crate::AbelianGroup;

    fn run(m: i64) -> (Polyhedron, Patch, QuotientComplex) {
        let ctx = FieldCtx::new(m).unwrap();
        let poly = compute_polyhedron(&ctx, SwanConfig::default()).unwrap();
        let (patch, mut orbits) = subdivide(&poly).unwrap();
        let qc = quotient_complex(&patch, &mut orbits).unwrap();
        (poly, patch, qc)
    }

    #[test]
    fn patch_is_a_torus() {
        for m in [2, 5, 7, 15, 19] {
            let ctx = FieldCtx::new(m).unwrap();
            let poly = compute_polyhedron(&ctx, SwanConfig::default()).unwrap();
            let patch = floege_complex(extract_boundary_cells(&poly).unwrap()).unwrap();
            assert_eq!(patch.euler_characteristic(), 0, "m = {m}");
            for face in &patch.faces {
                assert!(face.cycle.len() >= 3);
            }
        }
    }

    #[test]
    fn no_cusps_for_class_number_one() {
        let (_, patch, _) = run(2);
        assert!(patch.singular_vertices().is_empty());
    }

    #[test]
    fn m5_cusp_appears() {
        let (_, patch, qc) = run(5);
        let ctx = FieldCtx::new(5).unwrap();
        let s: BTreeSet<FieldElem> = singular_points(&ctx)
            .iter()
            .map(|z| z.reduce_mod_lattice().0)
            .collect();
        let got: BTreeSet<FieldElem> = patch
            .singular_vertices()
            .into_iter()
            .map(|v| patch.vertices[v].z.clone())
            .collect();
        assert_eq!(got, s);
        assert_eq!(qc.singular_flags().iter().filter(|&&b| b).count(), 1);
    }

    #[test]
    fn translation_pairs_are_recovered() {
        // an edge and its translate are the same cell modulo O
        let (_, patch, _) = run(7);
        for e in &patch.edges {
            assert!(e.start < patch.vertices.len() && e.end < patch.vertices.len());
        }
    }

    #[test]
    fn stabilizers_fix_cells_pointwise() {
        for m in [2, 7, 11, 15] {
            let ctx = FieldCtx::new(m).unwrap();
            let (_, patch, qc) = run(m);
            for (g, p) in qc.vertex_groups.iter().zip(&qc.vertex_points) {
                if let Some(g) = g {
                    assert!(g.elements.iter().all(|x| apply(x, p, &ctx) == *p));
                    assert!(g.element_orders(&ctx).iter().all(|&o| o <= 6));
                }
            }
            assert!(patch.is_connected());
        }
    }

    #[test]
    fn chain_complex_and_connectivity() {
        for m in [2, 5, 6, 7, 19] {
            let (_, _, qc) = run(m);
            assert!(qc.d1.mul(&qc.d2).is_zero());
            let [h0, _, h2] = homology_of_complex(&qc).unwrap();
            assert_eq!(h0, AbelianGroup::free(1));
            let h = class_number(&FieldCtx::new(m).unwrap()) as usize;
            assert!(h2.free_rank + 1 >= h);
        }
    }

    #[test]
    fn m2_quotient_has_h1_z() {
        let (_, _, qc) = run(2);
        let [_, h1, _] = homology_of_complex(&qc).unwrap();
        assert_eq!(h1, AbelianGroup::free(1));
    }

    #[test]
    fn serialization_is_stable() {
        let (_, _, a) = run(19);
        let (_, _, b) = run(19);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
