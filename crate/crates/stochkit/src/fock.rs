//! Truncated Fock-module operator calculus: shifts and their adjoints,
//! range projections, Fourier/Cesàro grading, per-column operator norms,
//! quotient-norm estimation, and the convergence checks that feed the
//! quotient-algebra picture.
//!
//! Operators act on the direct sum of the fibers of degree `0..=cap`.
//! Every operator here commutes with the right diagonal action, so it
//! preserves the column index; a block is stored as a sparse action on
//! matrix units, mapping a source unit `(i,j)` of one degree to a vector of
//! target rows in the same column `j` of another degree. Norms reduce to
//! per-column spectral norms of finite matrices. Anything truncated carries
//! the cap so a truncation artifact is never mistaken for a limit.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num::complex::Complex64;
use num::traits::{Signed, Zero};
use num::BigRational;

use crate::chain::communicating_classes;
use crate::error::{Error, Result};
use crate::matrix::{rat_to_f64, support_triples, Powers, StochasticMatrix, SupportSet};
use crate::subproduct::{inner, DiagonalElement, Fiber};
use crate::RationalMat;

/// Default truncation cap for the graded operator calculus.
pub const DEFAULT_CAP: usize = 16;

/// The fibers of degree `0..=cap` together with the exact powers of `P`
/// backing all scaling factors.
pub struct TruncatedFock {
    p: StochasticMatrix,
    cap: usize,
    powers: Vec<RationalMat>,
    supports: Vec<SupportSet>,
}

impl TruncatedFock {
    pub fn new(p: &StochasticMatrix, cap: usize) -> Self {
        let mut pw = Powers::new(p);
        let powers: Vec<RationalMat> = (0..=cap).map(|n| pw.get(n).clone()).collect();
        let supports = (0..=cap)
            .map(|n| {
                if n == 0 {
                    SupportSet::identity(p.dim())
                } else {
                    SupportSet::from_mat(&powers[n], n)
                }
            })
            .collect();
        TruncatedFock { p: p.clone(), cap, powers, supports }
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.p
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn support(&self, n: usize) -> &SupportSet {
        &self.supports[n]
    }

    pub fn unit(&self, n: usize, i: usize, j: usize) -> Result<Fiber> {
        Fiber::from_entries_with_support(
            &self.supports[n],
            self.dim(),
            [((i, j), Complex64::new(1.0, 0.0))],
        )
    }

    /// Exact ratio `P^n_ij · P^m_jk / P^{n+m}_ik`.
    fn ratio(&self, n: usize, m: usize, i: usize, j: usize, k: usize) -> BigRational {
        let num = self.powers[n].get(i, j).clone() * self.powers[m].get(j, k).clone();
        num / self.powers[n + m].get(i, k).clone()
    }

    /// `√(P^n_ij · P^m_jk / P^{n+m}_ik)`: exact inner ratio, numeric root.
    fn factor(&self, n: usize, m: usize, i: usize, j: usize, k: usize) -> f64 {
        rat_to_f64(&self.ratio(n, m, i, j, k)).sqrt()
    }

    /// The vacuum vector: the identity of the diagonal algebra in degree 0.
    pub fn vacuum(&self) -> FockVector {
        let mut v = FockVector::zero(self);
        let ones = (0..self.dim()).map(|i| ((i, i), Complex64::new(1.0, 0.0)));
        v.fibers[0] = Fiber::from_entries_with_support(&self.supports[0], self.dim(), ones)
            .expect("diagonal is on-support");
        v
    }

    /// Embeds a single fiber as a Fock vector.
    pub fn embed(&self, fiber: Fiber) -> FockVector {
        assert!(fiber.degree() <= self.cap);
        let mut v = FockVector::zero(self);
        let n = fiber.degree();
        v.fibers[n] = fiber;
        v
    }
}

/// An element of the truncated Fock module: one fiber per degree.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub fibers: Vec<Fiber>,
}

impl FockVector {
    pub fn zero(f: &TruncatedFock) -> Self {
        FockVector {
            fibers: (0..=f.cap()).map(|n| Fiber::zero(n, f.dim())).collect(),
        }
    }

    /// Module inner product: the sum of the fiber inner products.
    pub fn inner(&self, other: &FockVector) -> DiagonalElement {
        let dim = self.fibers.first().map_or(0, |f| f.dim());
        let mut acc = DiagonalElement::zero(dim);
        for (a, b) in self.fibers.iter().zip(&other.fibers) {
            acc = acc.add(&inner(a, b).expect("degrees aligned by construction"));
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self)
            .values
            .iter()
            .map(|v| v.re)
            .fold(0.0f64, f64::max)
            .sqrt()
    }
}

type ColumnVec = BTreeMap<usize, Complex64>;
type Block = BTreeMap<(usize, usize), ColumnVec>;

/// A graded block operator on the truncated Fock module, stored as a sparse
/// action on matrix units. Each block preserves the column index, which is
/// the structural form of commuting with the right diagonal action.
#[derive(Clone, Debug)]
pub struct FockOperator {
    cap: usize,
    dim: usize,
    /// `(source degree, target degree) → source unit → target rows`.
    blocks: BTreeMap<(usize, usize), Block>,
    shift_of: Option<Fiber>,
}

impl FockOperator {
    pub fn zero(f: &TruncatedFock) -> Self {
        FockOperator { cap: f.cap(), dim: f.dim(), blocks: BTreeMap::new(), shift_of: None }
    }

    /// The projection onto the degree-`n` fiber.
    pub fn q_n(f: &TruncatedFock, n: usize) -> Self {
        assert!(n <= f.cap());
        let mut block: Block = BTreeMap::new();
        for &(i, j) in &f.support(n).pairs {
            block.insert((i, j), BTreeMap::from([(i, Complex64::new(1.0, 0.0))]));
        }
        let mut blocks = BTreeMap::new();
        blocks.insert((n, n), block);
        FockOperator { cap: f.cap(), dim: f.dim(), blocks, shift_of: None }
    }

    /// The projection onto degrees `n..=cap`.
    pub fn q_from(f: &TruncatedFock, n: usize) -> Self {
        let mut out = FockOperator::zero(f);
        for m in n..=f.cap() {
            out = out.add(&FockOperator::q_n(f, m));
        }
        out
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn block_degrees(&self) -> Vec<(usize, usize)> {
        self.blocks.keys().copied().collect()
    }

    /// The homogeneity degree: `Some(k)` when every nonempty block raises
    /// the degree by the same `k` (the zero operator counts as degree 0).
    pub fn degree(&self) -> Option<i64> {
        let mut degs: BTreeSet<i64> = BTreeSet::new();
        for (&(src, dst), block) in &self.blocks {
            if !block.is_empty() {
                degs.insert(dst as i64 - src as i64);
            }
        }
        match degs.len() {
            0 => Some(0),
            1 => degs.into_iter().next(),
            _ => None,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.shift_of = None;
        for block in out.blocks.values_mut() {
            for colvec in block.values_mut() {
                for v in colvec.values_mut() {
                    *v *= c;
                }
            }
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &FockOperator) -> Self {
        assert_eq!(self.cap, other.cap);
        let mut out = self.clone();
        out.shift_of = None;
        for (&key, block) in &other.blocks {
            let target = out.blocks.entry(key).or_default();
            for (&unit, colvec) in block {
                let tv = target.entry(unit).or_default();
                for (&row, &c) in colvec {
                    *tv.entry(row).or_insert_with(Complex64::zero) += c;
                }
            }
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &FockOperator) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Operator composition `self ∘ rhs`.
    pub fn compose(&self, rhs: &FockOperator) -> Self {
        assert_eq!(self.cap, rhs.cap);
        let mut blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
        for (&(m0, m1), rblock) in &rhs.blocks {
            for (&(m1b, m2), lblock) in &self.blocks {
                if m1b != m1 {
                    continue;
                }
                let out_block = blocks.entry((m0, m2)).or_default();
                for (&(i, j), colvec1) in rblock {
                    for (&l, &c1) in colvec1 {
                        if let Some(colvec2) = lblock.get(&(l, j)) {
                            let tv = out_block.entry((i, j)).or_default();
                            for (&r, &c2) in colvec2 {
                                *tv.entry(r).or_insert_with(Complex64::zero) += c1 * c2;
                            }
                        }
                    }
                }
            }
        }
        let mut out = FockOperator { cap: self.cap, dim: self.dim, blocks, shift_of: None };
        out.prune();
        out
    }

    pub fn apply(&self, f: &TruncatedFock, v: &FockVector) -> FockVector {
        let mut acc: Vec<BTreeMap<(usize, usize), Complex64>> =
            vec![BTreeMap::new(); self.cap + 1];
        for (&(src, dst), block) in &self.blocks {
            for (&(i, j), &val) in v.fibers[src].iter().collect::<Vec<_>>() {
                if let Some(colvec) = block.get(&(i, j)) {
                    for (&r, &c) in colvec {
                        *acc[dst].entry((r, j)).or_insert_with(Complex64::zero) += val * c;
                    }
                }
            }
        }
        let mut out = FockVector::zero(f);
        for (n, entries) in acc.into_iter().enumerate() {
            out.fibers[n] = Fiber::from_entries_with_support(f.support(n), self.dim, entries)
                .expect("operator blocks stay on-support");
        }
        out
    }

    fn prune(&mut self) {
        for block in self.blocks.values_mut() {
            for colvec in block.values_mut() {
                colvec.retain(|_, v| *v != Complex64::zero());
            }
            block.retain(|_, colvec| !colvec.is_empty());
        }
        self.blocks.retain(|_, block| !block.is_empty());
    }

    /// Largest entry-wise deviation between two operators, over the union of
    /// their blocks.
    pub fn max_abs_diff(&self, other: &FockOperator) -> f64 {
        let keys: BTreeSet<(usize, usize)> = self
            .blocks
            .keys()
            .chain(other.blocks.keys())
            .copied()
            .collect();
        let empty = Block::new();
        let mut worst = 0.0f64;
        for key in keys {
            let a = self.blocks.get(&key).unwrap_or(&empty);
            let b = other.blocks.get(&key).unwrap_or(&empty);
            let units: BTreeSet<(usize, usize)> = a.keys().chain(b.keys()).copied().collect();
            for unit in units {
                let va = a.get(&unit);
                let vb = b.get(&unit);
                let rows: BTreeSet<usize> = va
                    .iter()
                    .flat_map(|m| m.keys())
                    .chain(vb.iter().flat_map(|m| m.keys()))
                    .copied()
                    .collect();
                for r in rows {
                    let x = va.and_then(|m| m.get(&r)).copied().unwrap_or_else(Complex64::zero);
                    let y = vb.and_then(|m| m.get(&r)).copied().unwrap_or_else(Complex64::zero);
                    worst = worst.max((x - y).norm());
                }
            }
        }
        worst
    }

    fn column_norm(&self, j: usize, src_keep: &dyn Fn(usize) -> bool) -> f64 {
        let mut row_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut col_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (&(src, dst), block) in &self.blocks {
            if !src_keep(src) {
                continue;
            }
            for (&(i, jj), colvec) in block {
                if jj != j {
                    continue;
                }
                let next = col_index.len();
                col_index.entry((src, i)).or_insert(next);
                for &r in colvec.keys() {
                    let next = row_index.len();
                    row_index.entry((dst, r)).or_insert(next);
                }
            }
        }
        if row_index.is_empty() || col_index.is_empty() {
            return 0.0;
        }
        let mut m = DMatrix::<Complex64>::zeros(row_index.len(), col_index.len());
        for (&(src, dst), block) in &self.blocks {
            if !src_keep(src) {
                continue;
            }
            for (&(i, jj), colvec) in block {
                if jj != j {
                    continue;
                }
                let ci = col_index[&(src, i)];
                for (&r, &c) in colvec {
                    let ri = row_index[&(dst, r)];
                    m[(ri, ci)] += c;
                }
            }
        }
        let svd = m.svd(false, false);
        svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s))
    }

    /// Per-column spectral norm, maximized over columns. Right-module maps
    /// preserve columns, so each column is a plain finite-dimensional
    /// operator and the module norm is the max of the column norms.
    pub fn op_norm(&self) -> f64 {
        (0..self.dim)
            .map(|j| self.column_norm(j, &|_| true))
            .fold(0.0, f64::max)
    }

    /// `‖self · Q_m‖`: the norm of the restriction to source degree `m`.
    pub fn op_norm_from_degree(&self, m: usize) -> f64 {
        (0..self.dim)
            .map(|j| self.column_norm(j, &|src| src == m))
            .fold(0.0, f64::max)
    }

    /// `‖self · Q_{[n, cap]}‖` for `n` over a window: the tail norms that
    /// bound the image of the operator in the quotient by the
    /// vanishing-at-infinity ideal. Makes sense for non-homogeneous
    /// operators too; no limit claim is attached, the caller sees what the
    /// truncation shows.
    pub fn tail_norm_window(
        &self,
        window: std::ops::RangeInclusive<usize>,
    ) -> Vec<(usize, f64)> {
        window
            .map(|n| {
                let v = (0..self.dim)
                    .map(|j| self.column_norm(j, &|src| src >= n))
                    .fold(0.0, f64::max);
                (n, v)
            })
            .collect()
    }
}

/// The shift `S_A(η) = U_{n,m}(A ⊗ η)` of a degree-`n` fiber `A`, with
/// blocks `m → n+m` for `n+m ≤ cap` (larger target degrees are clipped).
/// The degree-0 source block embeds the right multiplication
/// `T ↦ A · T`; a degree-0 `A` acts by left diagonal multiplication.
pub fn shift(f: &TruncatedFock, a: &Fiber) -> Result<FockOperator> {
    let n = a.degree();
    if n > f.cap() {
        return Err(Error::DegreeOverflow { degree: n, cap: f.cap() });
    }
    let mut blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
    if n == 0 {
        for m in 0..=f.cap() {
            let mut block: Block = BTreeMap::new();
            for &(i, j) in &f.support(m).pairs {
                let t = a.get(i, i);
                if t != Complex64::zero() {
                    block.insert((i, j), BTreeMap::from([(i, t)]));
                }
            }
            if !block.is_empty() {
                blocks.insert((m, m), block);
            }
        }
    } else {
        // Group the entries of A by column index.
        let mut by_col: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (&(i, j), &v) in a.iter() {
            by_col.entry(j).or_default().push((i, v));
        }
        for m in 0..=(f.cap() - n) {
            let mut block: Block = BTreeMap::new();
            if m == 0 {
                for (&j, rows) in &by_col {
                    let colvec: ColumnVec = rows.iter().map(|&(i, v)| (i, v)).collect();
                    block.insert((j, j), colvec);
                }
            } else {
                for &(j, k) in &f.support(m).pairs {
                    if let Some(rows) = by_col.get(&j) {
                        let mut colvec = ColumnVec::new();
                        for &(i, v) in rows {
                            let c = v * f.factor(n, m, i, j, k);
                            if c != Complex64::zero() {
                                *colvec.entry(i).or_insert_with(Complex64::zero) += c;
                            }
                        }
                        if !colvec.is_empty() {
                            block.insert((j, k), colvec);
                        }
                    }
                }
            }
            if !block.is_empty() {
                blocks.insert((m, n + m), block);
            }
        }
    }
    Ok(FockOperator { cap: f.cap(), dim: f.dim(), blocks, shift_of: Some(a.clone()) })
}

/// Closed-form adjoint of a shift: kills degrees below `n`, sends the
/// degree-`n` fiber to `Diag(A*B)` in degree 0, and on higher degrees acts
/// by `B ↦ √P^m * [(√P^n * A)* · ((√P^{n+m})^♭ * B)]`. Errors with
/// `NotAShift` when the operator was not built by [`shift`].
pub fn adjoint(f: &TruncatedFock, s: &FockOperator) -> Result<FockOperator> {
    let a = s.shift_of.clone().ok_or(Error::NotAShift)?;
    let n = a.degree();
    let mut blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
    if n == 0 {
        for m in 0..=f.cap() {
            let mut block: Block = BTreeMap::new();
            for &(i, j) in &f.support(m).pairs {
                let t = a.get(i, i).conj();
                if t != Complex64::zero() {
                    block.insert((i, j), BTreeMap::from([(i, t)]));
                }
            }
            if !block.is_empty() {
                blocks.insert((m, m), block);
            }
        }
    } else {
        // Group the entries of A by row index.
        let mut by_row: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (&(i, j), &v) in a.iter() {
            by_row.entry(i).or_default().push((j, v));
        }
        for src in n..=f.cap() {
            let m = src - n;
            let mut block: Block = BTreeMap::new();
            for &(l, k) in &f.support(src).pairs {
                let mut colvec = ColumnVec::new();
                if m == 0 {
                    let v = a.get(l, k).conj();
                    if v != Complex64::zero() {
                        colvec.insert(k, v);
                    }
                } else if let Some(cols) = by_row.get(&l) {
                    for &(j, v) in cols {
                        if f.support(m).contains(j, k) {
                            // √(P^n_lj · P^m_jk / P^{n+m}_lk)
                            let c = v.conj() * f.factor(n, m, l, j, k);
                            if c != Complex64::zero() {
                                *colvec.entry(j).or_insert_with(Complex64::zero) += c;
                            }
                        }
                    }
                }
                if !colvec.is_empty() {
                    block.insert((l, k), colvec);
                }
            }
            if !block.is_empty() {
                blocks.insert((src, m), block);
            }
        }
    }
    Ok(FockOperator { cap: f.cap(), dim: f.dim(), blocks, shift_of: None })
}

/// Left multiplication `W_A(B) = A · B` as a graded operator (the support
/// closes under multiplication, so no clipping ever triggers on-support).
pub fn w_operator(f: &TruncatedFock, a: &Fiber) -> Result<FockOperator> {
    let n = a.degree();
    if n > f.cap() {
        return Err(Error::DegreeOverflow { degree: n, cap: f.cap() });
    }
    assert!(n >= 1, "degree-0 left multiplication is the degree-0 shift");
    let mut by_col: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
    for (&(i, j), &v) in a.iter() {
        by_col.entry(j).or_default().push((i, v));
    }
    let mut blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
    for m in 0..=(f.cap() - n) {
        let mut block: Block = BTreeMap::new();
        if m == 0 {
            for (&j, rows) in &by_col {
                block.insert((j, j), rows.iter().map(|&(i, v)| (i, v)).collect());
            }
        } else {
            for &(j, k) in &f.support(m).pairs {
                if let Some(rows) = by_col.get(&j) {
                    block.insert((j, k), rows.iter().map(|&(i, v)| (i, v)).collect());
                }
            }
        }
        if !block.is_empty() {
            blocks.insert((m, n + m), block);
        }
    }
    Ok(FockOperator { cap: f.cap(), dim: f.dim(), blocks, shift_of: None })
}

/// The renormalized left multiplication `T_A = S_{(√P^n)^♭ * A}`, the shift
/// generator written in the multiplication picture. For irreducible `P` the
/// difference `T_A − W_A` vanishes at infinity in the fiber degree.
pub fn t_operator(f: &TruncatedFock, a: &Fiber) -> Result<FockOperator> {
    let n = a.degree();
    if n > f.cap() {
        return Err(Error::DegreeOverflow { degree: n, cap: f.cap() });
    }
    assert!(n >= 1, "degree-0 left multiplication is the degree-0 shift");
    let scaled = a.iter().map(|(&(i, j), &v)| {
        let ratio = num::BigRational::from_integer(1.into()) / f.powers[n].get(i, j).clone();
        ((i, j), v * rat_to_f64(&ratio).sqrt())
    });
    let flat_a = Fiber::from_entries_with_support(f.support(n), f.dim(), scaled)?;
    shift(f, &flat_a)
}

/// Exact verification that the range projection onto degrees `n..=cap`
/// equals the sum `Σ_{(i,j) ∈ E(P^n)} S_{E_ij} S*_{E_ij}`. The matched
/// square roots cancel, so each summand acts on a unit `E_lk` of degree
/// `m' ≥ n` as the exact ratio `P^n_lj P^{m'-n}_jk / P^{m'}_lk`; the
/// returned defect (max deviation from 1 on degrees `≥ n` and from 0 below)
/// is computed in exact rationals and must be zero.
pub fn q_projection_identity(f: &TruncatedFock, n: usize) -> BigRational {
    assert!(n <= f.cap());
    let one = BigRational::from_integer(1.into());
    let mut defect = BigRational::zero();
    for src in 0..=f.cap() {
        for &(l, k) in &f.support(src).pairs {
            let acc = if src < n {
                BigRational::zero()
            } else {
                let m = src - n;
                let mut acc = BigRational::zero();
                for j in 0..f.dim() {
                    if f.support(n).contains(l, j)
                        && (m == 0 && j == k || m > 0 && f.support(m).contains(j, k))
                    {
                        acc += f.ratio(n, m, l, j, k);
                    }
                }
                acc
            };
            let expected = if src >= n { one.clone() } else { BigRational::zero() };
            let d = (expected - acc).abs();
            if d > defect {
                defect = d;
            }
        }
    }
    defect
}

/// Extracts the degree-`k` homogeneous part by block selection; the grading
/// is structural, so no numeric integration is involved.
pub fn fourier(t: &FockOperator, k: i64) -> FockOperator {
    let blocks = t
        .blocks
        .iter()
        .filter(|(&(src, dst), _)| dst as i64 - src as i64 == k)
        .map(|(&key, block)| (key, block.clone()))
        .collect();
    FockOperator { cap: t.cap, dim: t.dim, blocks, shift_of: None }
}

/// Cesàro mean `Σ_{|k| ≤ m} (1 − |k|/(m+1)) Φ_k(T)`.
pub fn cesaro(t: &FockOperator, m: usize) -> FockOperator {
    let mut out = FockOperator { cap: t.cap, dim: t.dim, blocks: BTreeMap::new(), shift_of: None };
    let mm = m as i64;
    for k in -mm..=mm {
        let w = 1.0 - k.unsigned_abs() as f64 / (m as f64 + 1.0);
        out = out.add(&fourier(t, k).scale(Complex64::new(w, 0.0)));
    }
    out
}

/// Per-fiber norms `‖T Q_m‖` over a window, with a tail-max estimate of
/// `limsup_m ‖T Q_m‖` and a convergence flag. The flag is set when the
/// successive tail maxima stabilize (differences below `1e-6`) with at
/// least two stable steps before the window ends; the estimate is the tail
/// max at the point of stabilization, so a truncation artifact is not
/// reported as a limit.
#[derive(Clone, Debug)]
pub struct QuotientNormReport {
    pub degree: i64,
    pub values: Vec<(usize, f64)>,
    pub tail_estimate: f64,
    pub converged: bool,
    pub cap: usize,
}

pub fn quotient_norm_estimate(
    t: &FockOperator,
    window: std::ops::RangeInclusive<usize>,
) -> Result<QuotientNormReport> {
    let degree = t.degree().ok_or(Error::NotHomogeneous)?;
    let (lo, hi) = (*window.start(), *window.end());
    assert!(
        hi as i64 + degree.max(0) <= t.cap as i64,
        "window end {hi} exceeds cap {} minus operator degree {degree}",
        t.cap
    );
    let values: Vec<(usize, f64)> = (lo..=hi)
        .map(|m| (m, t.op_norm_from_degree(m)))
        .collect();
    let raw: Vec<f64> = values.iter().map(|&(_, v)| v).collect();
    let mut tail = vec![0.0f64; raw.len()];
    let mut run = 0.0f64;
    for (idx, &v) in raw.iter().enumerate().rev() {
        run = run.max(v);
        tail[idx] = run;
    }
    let mut stable_from = raw.len().saturating_sub(1);
    while stable_from > 0 && tail[stable_from - 1] - tail[stable_from] < 1e-6 {
        stable_from -= 1;
    }
    let converged = raw.len() >= 3 && stable_from + 2 < raw.len();
    let tail_estimate = tail.get(stable_from).copied().unwrap_or(0.0);
    Ok(QuotientNormReport { degree, values, tail_estimate, converged, cap: t.cap })
}

/// One row of the `c_m` convergence table: the largest
/// `|√(P^m_jk / P^{n+m}_ik) − 1|²` over the triple support at gap `m`.
#[derive(Clone, Debug)]
pub struct CmRow {
    pub m: usize,
    pub max: f64,
    pub argmax: Option<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct CmReport {
    pub n: usize,
    pub rows: Vec<CmRow>,
    pub converged: bool,
}

fn check_irreducible(p: &StochasticMatrix) -> Result<()> {
    if communicating_classes(p).classes.len() != 1 {
        return Err(Error::NotIrreducible);
    }
    Ok(())
}

/// The coefficients `c_m(i,j,k)` on `E(P^n, P^m)` (0 off it) whose decay
/// puts the difference of the two left-multiplication pictures in the
/// vanishing-at-infinity ideal. Inner ratios are exact; the flag reports
/// whether the per-`m` maxima have fallen below `1e-6` by the window end.
pub fn cm_convergence(
    p: &StochasticMatrix,
    n: usize,
    window: std::ops::RangeInclusive<usize>,
) -> Result<CmReport> {
    check_irreducible(p)?;
    assert!(n >= 1);
    let mut powers = Powers::new(p);
    let sn = powers.support(n);
    let mut rows = Vec::new();
    for m in window {
        let sm = powers.support(m);
        let mut max = 0.0f64;
        let mut argmax = None;
        for (i, j, k) in support_triples(&sn, &sm) {
            let ratio = powers.entry(m, j, k) / powers.entry(n + m, i, k);
            let c = (rat_to_f64(&ratio).sqrt() - 1.0).powi(2);
            if c > max {
                max = c;
                argmax = Some((i, j, k));
            }
        }
        rows.push(CmRow { m, max, argmax });
    }
    let converged = rows.last().is_some_and(|r| r.max < 1e-6);
    Ok(CmReport { n, rows, converged })
}

/// One `c_m` entry: the triple `(i,j,k)` and its coefficient.
pub type CmEntry = ((usize, usize, usize), f64);

/// Full `c_m` table at one gap `m`, for inspection.
pub fn cm_table(p: &StochasticMatrix, n: usize, m: usize) -> Result<Vec<CmEntry>> {
    check_irreducible(p)?;
    let mut powers = Powers::new(p);
    let sn = powers.support(n);
    let sm = powers.support(m);
    Ok(support_triples(&sn, &sm)
        .into_iter()
        .map(|(i, j, k)| {
            let ratio = powers.entry(m, j, k) / powers.entry(n + m, i, k);
            ((i, j, k), (rat_to_f64(&ratio).sqrt() - 1.0).powi(2))
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct TwGapReport {
    pub values: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Per-gap norms `‖(T_A − W_A) Q_m‖` where `W_A` is plain left matrix
/// multiplication clipped to the support and `T_A` the shift of
/// `(√P^n)^♭ * A`. On a unit `E_jk` the difference acts by
/// `Σ_i a_ij (√(P^m_jk/P^{n+m}_ik) − 1) E_ik`, so the gap is controlled by
/// the `c_m` table and must vanish as `m` grows for irreducible `P`.
pub fn tw_gap(
    p: &StochasticMatrix,
    a: &Fiber,
    window: std::ops::RangeInclusive<usize>,
) -> Result<TwGapReport> {
    check_irreducible(p)?;
    let n = a.degree();
    assert!(n >= 1, "gap operators are defined for fiber degree ≥ 1");
    let mut powers = Powers::new(p);
    let mut by_col: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
    for (&(i, j), &v) in a.iter() {
        by_col.entry(j).or_default().push((i, v));
    }
    let mut values = Vec::new();
    for m in window {
        let sm = powers.support(m);
        // Column-k matrices of the difference block m → n+m.
        let mut per_col: BTreeMap<usize, Vec<(usize, usize, Complex64)>> = BTreeMap::new();
        let mut col_ids: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
        for &(j, k) in &sm.pairs {
            let next = col_ids.entry(k).or_default().len();
            let src_id = *col_ids.get_mut(&k).unwrap().entry(j).or_insert(next);
            if let Some(rows) = by_col.get(&j) {
                for &(i, v) in rows {
                    let ratio = powers.entry(m, j, k) / powers.entry(n + m, i, k);
                    let c = v * (rat_to_f64(&ratio).sqrt() - 1.0);
                    if c != Complex64::zero() {
                        per_col.entry(k).or_default().push((i, src_id, c));
                    }
                }
            }
        }
        let mut norm = 0.0f64;
        for (k, entries) in per_col {
            let ncols = col_ids[&k].len();
            let mut row_ids: BTreeMap<usize, usize> = BTreeMap::new();
            for &(i, _, _) in &entries {
                let next = row_ids.len();
                row_ids.entry(i).or_insert(next);
            }
            let mut mat = DMatrix::<Complex64>::zeros(row_ids.len(), ncols);
            for (i, c, v) in entries {
                mat[(row_ids[&i], c)] += v;
            }
            let svd = mat.svd(false, false);
            norm = norm.max(svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s)));
        }
        values.push((m, norm));
    }
    let converged = values.last().is_some_and(|&(_, v)| v < 1e-6);
    Ok(TwGapReport { values, converged })
}
