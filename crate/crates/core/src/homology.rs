//! Integer linear algebra and the homological invariants of the quotient
//! complex: cellular homology, the cuspidal part of `H_1`, the Farrell
//! supplement built from cell stabilizers, and table rows.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{class_group, presented_group, AbelianGroup};
use crate::complex::QuotientComplex;
use crate::qfield::FieldCtx;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomologyError {
    #[error("boundary maps do not compose to zero")]
    NotAComplex,
    #[error("H_1 of the quotient has no free summand to split off")]
    NoFreeSummand,
    #[error("spectral check failed: {0}")]
    SpectralCheck(String),
}

// ---------------------------------------------------------------------------
// sparse integer matrices

/// Serialized as `(row, col, value)` triples with values as strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "MatrixDoc", try_from = "MatrixDoc")]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<BTreeMap<usize, BigInt>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, String)>,
}

impl From<IntMatrix> for MatrixDoc {
    fn from(m: IntMatrix) -> Self {
        MatrixDoc {
            rows: m.rows,
            cols: m.cols,
            entries: m
                .triples()
                .into_iter()
                .map(|(i, j, v)| (i, j, v.to_string()))
                .collect(),
        }
    }
}

impl TryFrom<MatrixDoc> for IntMatrix {
    type Error = String;

    fn try_from(doc: MatrixDoc) -> Result<Self, String> {
        let mut m = IntMatrix::zeros(doc.rows, doc.cols);
        for (i, j, v) in doc.entries {
            if i >= doc.rows || j >= doc.cols {
                return Err(format!(
                    "entry ({i}, {j}) outside {}x{}",
                    doc.rows, doc.cols
                ));
            }
            let v: BigInt = v.parse().map_err(|_| format!("bad matrix entry {v:?}"))?;
            m.add(i, j, &v);
        }
        Ok(m)
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BTreeMap::new(); rows],
        }
    }

    pub fn from_dense(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut m = IntMatrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.add(i, j, &BigInt::from(v));
            }
        }
        m
    }

    pub fn add(&mut self, i: usize, j: usize, v: &BigInt) {
        assert!(i < self.rows && j < self.cols, "index out of range");
        if v.is_zero() {
            return;
        }
        let e = self.entries[i].entry(j).or_insert_with(BigInt::zero);
        *e += v;
        if e.is_zero() {
            self.entries[i].remove(&j);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> BigInt {
        self.entries[i]
            .get(&j)
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn row(&self, i: usize) -> &BTreeMap<usize, BigInt> {
        &self.entries[i]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|r| r.is_empty())
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, a) in &self.entries[i] {
                for (j, b) in &other.entries[*k] {
                    out.add(i, *j, &(a * b));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Nonzero entries as `(row, col, value)` triples in row-major order.
    pub fn triples(&self) -> Vec<(usize, usize, BigInt)> {
        let mut out = vec![];
        for (i, r) in self.entries.iter().enumerate() {
            for (j, v) in r {
                out.push((i, *j, v.clone()));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Smith normal form

/// Nonzero invariant factors `d_1 | d_2 | ...` (positive) of `m`; their
/// number is the rank.
pub fn smith_normal_form(m: &IntMatrix) -> Vec<BigInt> {
    let (units, rest) = eliminate_unit_pivots(m);
    let mut diag = dense_snf(rest);
    diag.extend(std::iter::repeat_n(BigInt::one(), units));
    divisibility_chain(diag)
}

pub fn rank(m: &IntMatrix) -> usize {
    smith_normal_form(m).len()
}

/// Repeatedly pivots on entries equal to `±1`, which removes one row and one
/// column each time without changing the remaining invariants. Returns the
/// number of pivots and the dense residual.
fn eliminate_unit_pivots(m: &IntMatrix) -> (usize, Vec<Vec<BigInt>>) {
    let mut rows: Vec<BTreeMap<usize, BigInt>> = m.entries.clone();
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m.cols];
    for (i, r) in rows.iter().enumerate() {
        for j in r.keys() {
            col_rows[*j].insert(i);
        }
    }
    let mut alive_rows: BTreeSet<usize> = (0..m.rows).collect();
    let mut alive_cols: BTreeSet<usize> = (0..m.cols).collect();
    let mut pivots = 0;
    loop {
        // cheapest unit pivot: fewest entries in its column, then its row
        let mut best: Option<(usize, usize, usize)> = None;
        for &i in &alive_rows {
            for (j, v) in &rows[i] {
                if v.abs().is_one() {
                    let cost = col_rows[*j].len() * rows[i].len();
                    if best.is_none_or(|(c, _, _)| cost < c) {
                        best = Some((cost, i, *j));
                    }
                }
            }
            if matches!(best, Some((1, _, _))) {
                break;
            }
        }
        let Some((_, pi, pj)) = best else { break };
        let prow = rows[pi].clone();
        let pval = prow[&pj].clone();
        let others: Vec<usize> = col_rows[pj].iter().copied().filter(|&k| k != pi).collect();
        for k in others {
            let factor = &rows[k][&pj] * &pval; // pval = ±1, so a_kj / pval = a_kj * pval
            for (j, v) in &prow {
                let e = rows[k].entry(*j).or_insert_with(BigInt::zero);
                *e -= &factor * v;
                if e.is_zero() {
                    rows[k].remove(j);
                    col_rows[*j].remove(&k);
                } else {
                    col_rows[*j].insert(k);
                }
            }
        }
        for j in prow.keys() {
            col_rows[*j].remove(&pi);
        }
        rows[pi].clear();
        alive_rows.remove(&pi);
        alive_cols.remove(&pj);
        pivots += 1;
    }
    let cols: Vec<usize> = alive_cols.into_iter().collect();
    let col_index: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(a, &b)| (b, a)).collect();
    let mut dense = vec![];
    for i in alive_rows {
        if rows[i].is_empty() {
            continue;
        }
        let mut r = vec![BigInt::zero(); cols.len()];
        for (j, v) in &rows[i] {
            r[col_index[j]] = v.clone();
        }
        dense.push(r);
    }
    (pivots, dense)
}

/// Diagonalizes a dense matrix by elementary operations; returns the nonzero
/// diagonal entries (absolute values, not yet a divisibility chain).
fn dense_snf(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let rows = a.len();
    if rows == 0 {
        return vec![];
    }
    let cols = a[0].len();
    let mut diag = vec![];
    let mut t = 0;
    while t < rows.min(cols) {
        // smallest nonzero entry in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !a[i][j].is_zero() && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        a.swap(t, bi);
        for r in a.iter_mut() {
            r.swap(t, bj);
        }
        loop {
            let mut done = true;
            for i in t + 1..rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = a[i][t].div_floor(&a[t][t]);
                for j in t..cols {
                    let v = &q * &a[t][j];
                    a[i][j] -= v;
                }
                if !a[i][t].is_zero() {
                    done = false;
                }
            }
            for j in t + 1..cols {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = a[t][j].div_floor(&a[t][t]);
                for i in t..rows {
                    let v = &q * &a[i][t];
                    a[i][j] -= v;
                }
                if !a[t][j].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
            // move the smallest remaining entry of row/column t to the pivot
            let mut best = (t, t);
            for i in t..rows {
                if !a[i][t].is_zero() && a[i][t].abs() < a[best.0][best.1].abs() {
                    best = (i, t);
                }
            }
            for j in t..cols {
                if !a[t][j].is_zero() && a[t][j].abs() < a[best.0][best.1].abs() {
                    best = (t, j);
                }
            }
            a.swap(t, best.0);
            for r in a.iter_mut() {
                r.swap(t, best.1);
            }
        }
        diag.push(a[t][t].abs());
        t += 1;
    }
    diag
}

fn divisibility_chain(mut d: Vec<BigInt>) -> Vec<BigInt> {
    d.retain(|x| !x.is_zero());
    let n = d.len();
    for i in 0..n {
        for j in i + 1..n {
            let g = d[i].gcd(&d[j]);
            let l = d[i].lcm(&d[j]);
            d[i] = g;
            d[j] = l;
        }
    }
    d
}

/// Cokernel `Z^cols / rowspace(m)`.
pub fn cokernel(m: &IntMatrix) -> AbelianGroup {
    AbelianGroup::from_invariants(m.cols, &smith_normal_form(m))
}

// ---------------------------------------------------------------------------
// homology of a 2-dimensional chain complex

/// `H_0, H_1, H_2` of `Z^F --d2--> Z^E --d1--> Z^V`, where `d1` is `V x E`
/// and `d2` is `E x F` (columns are the boundaries of cells).
pub fn homology_of_chain_complex(
    d1: &IntMatrix,
    d2: &IntMatrix,
) -> Result<[AbelianGroup; 3], HomologyError> {
    let (v, e, f) = (d1.rows, d1.cols, d2.cols);
    assert_eq!(d2.rows, e);
    if !d1.mul(d2).is_zero() {
        return Err(HomologyError::NotAComplex);
    }
    let s1 = smith_normal_form(d1);
    let s2 = smith_normal_form(d2);
    let (r1, r2) = (s1.len(), s2.len());
    let h0 = AbelianGroup::from_invariants(v, &s1);
    let mut orders: Vec<u64> = s2
        .iter()
        .filter(|d| !d.is_one())
        .map(|d| num_traits::ToPrimitive::to_u64(d).expect("torsion too large"))
        .collect();
    orders.extend(std::iter::repeat_n(0, e - r1 - r2));
    let h1 = AbelianGroup::from_cyclic_orders(&orders);
    let h2 = AbelianGroup::free(f - r2);
    Ok([h0, h1, h2])
}

pub fn homology_of_complex(qc: &QuotientComplex) -> Result<[AbelianGroup; 3], HomologyError> {
    homology_of_chain_complex(&qc.d1, &qc.d2)
}

/// Removes the free summand contributed by the cusp at infinity.
pub fn h1_cusp_from(h1: &AbelianGroup) -> Result<AbelianGroup, HomologyError> {
    if h1.free_rank == 0 {
        return Err(HomologyError::NoFreeSummand);
    }
    Ok(AbelianGroup {
        free_rank: h1.free_rank - 1,
        torsion: h1.torsion.clone(),
    })
}

pub fn h1_cusp(qc: &QuotientComplex) -> Result<AbelianGroup, HomologyError> {
    let [_, h1, _] = homology_of_complex(qc)?;
    h1_cusp_from(&h1)
}

/// Cokernel of the map from edge-stabilizer abelianizations to
/// vertex-stabilizer abelianizations induced by inclusion. Singular cusps have
/// infinite stabilizers and take no part.
pub fn farrell_supplement(qc: &QuotientComplex) -> AbelianGroup {
    // generators: the elements of every finite vertex stabilizer
    let mut offset = BTreeMap::new();
    let mut n = 0;
    for (v, st) in qc.vertex_groups.iter().enumerate() {
        if let Some(g) = st {
            offset.insert(v, n);
            n += g.table.len();
        }
    }
    let mut rels: Vec<Vec<(usize, i64)>> = vec![];
    for (v, st) in qc.vertex_groups.iter().enumerate() {
        if let Some(g) = st {
            let o = offset[&v];
            for x in 0..g.table.len() {
                for y in 0..g.table.len() {
                    rels.push(vec![(o + x, 1), (o + y, 1), (o + g.table[x][y], -1)]);
                }
            }
        }
    }
    for inc in &qc.edge_inclusions {
        for (at_end, at_start) in inc.end_images.iter().zip(&inc.start_images) {
            let mut r = vec![];
            if let (Some(o), Some(x)) = (offset.get(&inc.end_vertex), at_end) {
                r.push((o + x, 1));
            }
            if let (Some(o), Some(x)) = (offset.get(&inc.start_vertex), at_start) {
                r.push((o + x, -1));
            }
            if !r.is_empty() {
                rels.push(r);
            }
        }
    }
    presented_group(n, &rels)
}

// ---------------------------------------------------------------------------
// spectral sequence bookkeeping and table rows

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub class_number: u64,
    pub h2_rank: usize,
    pub singular_vertex_orbits: usize,
    pub h0_is_z: bool,
}

pub fn spectral_checks(
    qc: &QuotientComplex,
    ctx: &FieldCtx,
) -> Result<SpectralReport, HomologyError> {
    let [h0, _, h2] = homology_of_complex(qc)?;
    let h = class_group(ctx).order().unwrap();
    let report = SpectralReport {
        class_number: h,
        h2_rank: h2.free_rank,
        singular_vertex_orbits: qc.vertex_groups.iter().filter(|g| g.is_none()).count(),
        h0_is_z: h0 == AbelianGroup::free(1),
    };
    if !report.h0_is_z {
        return Err(HomologyError::SpectralCheck(format!(
            "H_0 = {h0}, expected Z"
        )));
    }
    if (report.h2_rank as u64) + 1 < h {
        return Err(HomologyError::SpectralCheck(format!(
            "rank H_2 = {} < h - 1 = {}",
            report.h2_rank,
            h - 1
        )));
    }
    if report.singular_vertex_orbits as u64 + 1 != h {
        return Err(HomologyError::SpectralCheck(format!(
            "{} singular vertex orbits, expected h - 1 = {}",
            report.singular_vertex_orbits,
            h - 1
        )));
    }
    Ok(report)
}

/// One row of the result table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub disc: i64,
    pub m: i64,
    pub class_group: AbelianGroup,
    pub h1_cusp: AbelianGroup,
    pub farrell_supplement: AbelianGroup,
}

impl TableRow {
    pub fn render(&self) -> String {
        format!(
            "{:>6}  {:>4}  {:<12}  {:<20}  {}",
            self.disc,
            self.m,
            self.class_group.render_multiplicative(),
            self.h1_cusp.render_additive(),
            self.farrell_supplement.render_additive()
        )
    }

    pub fn header() -> String {
        format!(
            "{:>6}  {:>4}  {:<12}  {:<20}  {}",
            "Δ", "m", "class group", "H_1^cusp", "Farrell supplement"
        )
    }
}

pub fn table_row_from(qc: &QuotientComplex, ctx: &FieldCtx) -> Result<TableRow, HomologyError> {
    Ok(TableRow {
        disc: ctx.discriminant(),
        m: ctx.m(),
        class_group: class_group(ctx),
        h1_cusp: h1_cusp(qc)?,
        farrell_supplement: farrell_supplement(qc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snf(rows: &[Vec<i64>]) -> Vec<i64> {
        smith_normal_form(&IntMatrix::from_dense(rows))
            .iter()
            .map(|d| num_traits::ToPrimitive::to_i64(d).unwrap())
            .collect()
    }

    #[test]
    fn snf_examples() {
        assert!(snf(&[vec![0, 0], vec![0, 0]]).is_empty());
        assert_eq!(snf(&[vec![2, 1], vec![1, 2]]), vec![1, 3]);
        assert_eq!(snf(&[vec![2, 4], vec![6, 8]]), vec![2, 4]);
        assert_eq!(snf(&[vec![2, 0], vec![0, 3]]), vec![1, 6]);
    }

    #[test]
    fn homology_examples() {
        // circle: one vertex, one loop
        let d1 = IntMatrix::from_dense(&[vec![0]]);
        let d2 = IntMatrix::zeros(1, 0);
        let [h0, h1, _] = homology_of_chain_complex(&d1, &d2).unwrap();
        assert_eq!(h0, AbelianGroup::free(1));
        assert_eq!(h1, AbelianGroup::free(1));
        // disk: triangle with its 2-cell
        let d1 = IntMatrix::from_dense(&[vec![-1, 0, 1], vec![1, -1, 0], vec![0, 1, -1]]);
        let d2 = IntMatrix::from_dense(&[vec![1], vec![1], vec![1]]);
        let [h0, h1, h2] = homology_of_chain_complex(&d1, &d2).unwrap();
        assert_eq!(h0, AbelianGroup::free(1));
        assert!(h1.is_trivial() && h2.is_trivial());
        // projective plane skeleton: loop attached with degree 2
        let d1 = IntMatrix::from_dense(&[vec![0]]);
        let d2 = IntMatrix::from_dense(&[vec![2]]);
        let [_, h1, _] = homology_of_chain_complex(&d1, &d2).unwrap();
        assert_eq!(h1, "Z/2".parse().unwrap());
        // not a complex
        let d1 = IntMatrix::from_dense(&[vec![1]]);
        let d2 = IntMatrix::from_dense(&[vec![1]]);
        assert_eq!(
            homology_of_chain_complex(&d1, &d2),
            Err(HomologyError::NotAComplex)
        );
    }

    #[test]
    fn h1_cusp_strips_one_z() {
        let g: AbelianGroup = "Z^10 ⊕ (Z/2)^2".parse().unwrap();
        assert_eq!(h1_cusp_from(&g).unwrap(), "Z^9 ⊕ (Z/2)^2".parse().unwrap());
        assert_eq!(
            h1_cusp_from(&"Z/2".parse().unwrap()),
            Err(HomologyError::NoFreeSummand)
        );
    }

    /// Invariants via determinantal divisors: `d_1 ... d_k = gcd of k x k minors`.
    fn snf_oracle(a: &[Vec<i64>]) -> Vec<i64> {
        let rows = a.len();
        let cols = a[0].len();
        let mut divisors = vec![BigInt::one()];
        for k in 1..=rows.min(cols) {
            let mut g = BigInt::zero();
            for rs in subsets(rows, k) {
                for cs in subsets(cols, k) {
                    let sub: Vec<Vec<BigInt>> = rs
                        .iter()
                        .map(|&i| cs.iter().map(|&j| BigInt::from(a[i][j])).collect())
                        .collect();
                    g = g.gcd(&det(sub));
                }
            }
            if g.is_zero() {
                break;
            }
            divisors.push(g);
        }
        divisors
            .windows(2)
            .map(|w| num_traits::ToPrimitive::to_i64(&(&w[1] / &w[0])).unwrap())
            .collect()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = subsets(n - 1, k);
        for mut s in subsets(n - 1, k - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    fn det(mut a: Vec<Vec<BigInt>>) -> BigInt {
        // Laplace expansion; matrices here are at most 6 x 6
        let n = a.len();
        if n == 1 {
            return a.remove(0).remove(0);
        }
        let mut total = BigInt::zero();
        for j in 0..n {
            if a[0][j].is_zero() {
                continue;
            }
            let minor: Vec<Vec<BigInt>> = a[1..]
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != j)
                        .map(|(_, v)| v.clone())
                        .collect()
                })
                .collect();
            let term = &a[0][j] * det(minor);
            if j % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        total
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..=6, 1usize..=6)
            .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-9i64..=9, c), r))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn snf_matches_determinantal_divisors(a in arb_matrix()) {
            prop_assert_eq!(snf(&a), snf_oracle(&a));
        }

        #[test]
        fn snf_invariant_under_unimodular_change(a in arb_matrix(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = a.len();
            let c = a[0].len();
            let mut b = a.clone();
            for _ in 0..8 {
                let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..r));
                if i != j {
                    let k = rng.gen_range(-3..=3);
                    for col in 0..c {
                        b[i][col] += k * b[j][col];
                    }
                }
                let (i, j) = (rng.gen_range(0..c), rng.gen_range(0..c));
                if i != j {
                    let k = rng.gen_range(-3..=3);
                    for row in b.iter_mut() {
                        row[i] += k * row[j];
                    }
                }
            }
            prop_assert_eq!(snf(&a), snf(&b));
        }
    }
}
