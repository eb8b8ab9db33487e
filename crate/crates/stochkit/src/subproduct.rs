//! The standard presentation of the graded fiber system of a stochastic
//! matrix: degree-`n` fibers are complex matrices supported on `E(P^n)`,
//! the inner product is `⟨A,B⟩ = Diag(A*B)`, and multiplication is
//! `(√P^{n+m})^♭ * [(√P^n * A)·(√P^m * B)]`.
//!
//! Every square-root factor is the root of an exact rational ratio, so the
//! matched-root identities (coisometry, the degree-wise ratio criterion) are
//! checked in exact arithmetic with no tolerance.

use std::collections::BTreeMap;

use num::complex::Complex64;
use num::traits::{Signed, Zero};
use num::BigRational;

use crate::error::{Error, Result};
use crate::matrix::{rat_to_f64, support_triples, Powers, StochasticMatrix, SupportSet};

/// Element of the degree-`n` fiber: a sparse complex matrix whose entries
/// vanish off `E(P^n)` (degree 0 is the diagonal algebra).
#[derive(Clone, Debug, PartialEq)]
pub struct Fiber {
    degree: usize,
    dim: usize,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl Fiber {
    pub fn zero(degree: usize, dim: usize) -> Self {
        Fiber { degree, dim, entries: BTreeMap::new() }
    }

    /// Builds a fiber from explicit entries, rejecting any entry off the
    /// support of `P^degree`.
    pub fn from_entries(
        p: &StochasticMatrix,
        degree: usize,
        entries: impl IntoIterator<Item = ((usize, usize), Complex64)>,
    ) -> Result<Self> {
        let support = degree_support(p, degree);
        Self::from_entries_with_support(&support, p.dim(), entries)
    }

    pub(crate) fn from_entries_with_support(
        support: &SupportSet,
        dim: usize,
        entries: impl IntoIterator<Item = ((usize, usize), Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((i, j), v) in entries {
            if v == Complex64::zero() {
                continue;
            }
            if !support.contains(i, j) {
                return Err(Error::OffSupport { degree: support.degree, i, j });
            }
            map.insert((i, j), v);
        }
        Ok(Fiber { degree: support.degree, dim, entries: map })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries.get(&(i, j)).copied().unwrap_or_else(Complex64::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Complex64)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fiber norm `max_j (Σ_i |a_ij|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        let mut col_sq = BTreeMap::new();
        for (&(_, j), v) in &self.entries {
            *col_sq.entry(j).or_insert(0.0) += v.norm_sqr();
        }
        col_sq.values().fold(0.0f64, |acc, &s| acc.max(s)).sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(&k, &v)| (k, c * v))
            .filter(|(_, v)| *v != Complex64::zero())
            .collect();
        Fiber { degree: self.degree, dim: self.dim, entries }
    }

    pub fn add(&self, other: &Fiber) -> Result<Self> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { left: self.degree, right: other.degree });
        }
        let mut entries = self.entries.clone();
        for (&k, &v) in &other.entries {
            let cur = entries.entry(k).or_insert_with(Complex64::zero);
            *cur += v;
            if *cur == Complex64::zero() {
                entries.remove(&k);
            }
        }
        Ok(Fiber { degree: self.degree, dim: self.dim, entries })
    }

    pub fn sub(&self, other: &Fiber) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Left action of the diagonal algebra: `T · A` scales row `i` by `t_i`.
    pub fn left_diag(&self, t: &DiagonalElement) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(&(i, j), &v)| ((i, j), t.values[i] * v))
            .filter(|(_, v)| *v != Complex64::zero())
            .collect();
        Fiber { degree: self.degree, dim: self.dim, entries }
    }

    /// Right action of the diagonal algebra: `A · T` scales column `j` by `t_j`.
    pub fn right_diag(&self, t: &DiagonalElement) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(&(i, j), &v)| ((i, j), v * t.values[j]))
            .filter(|(_, v)| *v != Complex64::zero())
            .collect();
        Fiber { degree: self.degree, dim: self.dim, entries }
    }

    /// Compression `p_i · A`: keeps row `i`.
    pub fn left_proj(&self, i: usize) -> Self {
        let entries = self
            .entries
            .iter()
            .filter(|(&(r, _), _)| r == i)
            .map(|(&k, &v)| (k, v))
            .collect();
        Fiber { degree: self.degree, dim: self.dim, entries }
    }

    /// Compression `A · p_j`: keeps column `j`.
    pub fn right_proj(&self, j: usize) -> Self {
        let entries = self
            .entries
            .iter()
            .filter(|(&(_, c), _)| c == j)
            .map(|(&k, &v)| (k, v))
            .collect();
        Fiber { degree: self.degree, dim: self.dim, entries }
    }

    pub fn max_abs_diff(&self, other: &Fiber) -> f64 {
        let mut keys: std::collections::BTreeSet<(usize, usize)> =
            self.entries.keys().copied().collect();
        keys.extend(other.entries.keys().copied());
        keys.into_iter()
            .map(|(i, j)| (self.get(i, j) - other.get(i, j)).norm())
            .fold(0.0, f64::max)
    }
}

/// Element of the diagonal algebra `ℓ^∞(Ω)`, also the value space of fiber
/// inner products.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalElement {
    pub values: Vec<Complex64>,
}

impl DiagonalElement {
    pub fn zero(dim: usize) -> Self {
        DiagonalElement { values: vec![Complex64::zero(); dim] }
    }

    /// The minimal projection `p_j`.
    pub fn projection(dim: usize, j: usize) -> Self {
        let mut values = vec![Complex64::zero(); dim];
        values[j] = Complex64::new(1.0, 0.0);
        DiagonalElement { values }
    }

    pub fn add(&self, other: &DiagonalElement) -> Self {
        DiagonalElement {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &DiagonalElement) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn degree_support(p: &StochasticMatrix, degree: usize) -> SupportSet {
    if degree == 0 {
        SupportSet::identity(p.dim())
    } else {
        p.support(degree)
    }
}

/// The matrix unit `E_ij` of degree `n`; requires `(i,j) ∈ E(P^n)`.
pub fn fiber_unit(p: &StochasticMatrix, n: usize, i: usize, j: usize) -> Result<Fiber> {
    Fiber::from_entries(p, n, [((i, j), Complex64::new(1.0, 0.0))])
}

/// Fiber inner product `⟨A,B⟩ = Diag(A*B)`, conjugate-linear in the first
/// argument.
pub fn inner(a: &Fiber, b: &Fiber) -> Result<DiagonalElement> {
    if a.degree != b.degree {
        return Err(Error::DegreeMismatch { left: a.degree, right: b.degree });
    }
    let mut out = DiagonalElement::zero(a.dim.max(b.dim));
    for (&(i, j), &bv) in &b.entries {
        let av = a.get(i, j);
        out.values[j] += av.conj() * bv;
    }
    Ok(out)
}

/// Multiplication-map factor on matrix units:
/// `U(E_ij ⊗ E_jk) = √(P^n_ij · P^m_jk / P^{n+m}_ik) · E_ik`.
/// The inner ratio is exact; only the final root is numeric.
pub(crate) fn unit_factor(
    powers: &mut Powers,
    n: usize,
    m: usize,
    i: usize,
    j: usize,
    k: usize,
) -> f64 {
    let num = powers.entry(n, i, j) * powers.entry(m, j, k);
    let den = powers.entry(n + m, i, k);
    rat_to_f64(&(num / den)).sqrt()
}

/// The multiplication map `U_{n,m}(A ⊗ B)` of the standard presentation,
/// producing a degree-`n+m` fiber.
pub fn umap(p: &StochasticMatrix, n: usize, m: usize, a: &Fiber, b: &Fiber) -> Result<Fiber> {
    if a.degree != n {
        return Err(Error::DegreeMismatch { left: a.degree, right: n });
    }
    if b.degree != m {
        return Err(Error::DegreeMismatch { left: b.degree, right: m });
    }
    assert!(n >= 1 && m >= 1, "degree-0 factors act by diagonal multiplication");
    let mut powers = Powers::new(p);
    let mut entries: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for (&(i, j), &av) in &a.entries {
        for (&(j2, k), &bv) in &b.entries {
            if j2 != j {
                continue;
            }
            // (i,k) ∈ E(P^{n+m}) whenever both factors are on-support.
            let f = unit_factor(&mut powers, n, m, i, j, k);
            let cur = entries.entry((i, k)).or_insert_with(Complex64::zero);
            *cur += av * bv * f;
        }
    }
    entries.retain(|_, v| *v != Complex64::zero());
    Ok(Fiber { degree: n + m, dim: a.dim, entries })
}

/// Exact coisometry check of the multiplication maps: the maximum over
/// `(i,k) ∈ E(P^{n+m})` of `|1 − Σ_j P^n_ij P^m_jk / P^{n+m}_ik|`, the sum
/// running over the triple support `E(P^n, P^m)`. Exactly zero for every
/// stochastic matrix; a matrix pushed off the non-negative cone by the
/// unchecked constructor shows a positive defect.
pub fn coisometry_defect(p: &StochasticMatrix, n: usize, m: usize) -> BigRational {
    let mut powers = Powers::new(p);
    let sn = powers.support(n);
    let sm = powers.support(m);
    let snm = powers.support(n + m);
    let mut sums: BTreeMap<(usize, usize), BigRational> = BTreeMap::new();
    for (i, j, k) in support_triples(&sn, &sm) {
        let term = powers.entry(n, i, j) * powers.entry(m, j, k) / powers.entry(n + m, i, k);
        *sums.entry((i, k)).or_insert_with(BigRational::zero) += term;
    }
    let one = BigRational::from_integer(1.into());
    let mut defect = BigRational::zero();
    for &(i, k) in &snm.pairs {
        let s = sums.get(&(i, k)).cloned().unwrap_or_else(BigRational::zero);
        let d = (one.clone() - s).abs();
        if d > defect {
            defect = d;
        }
    }
    defect
}

/// Location of the first failure of the degree-wise ratio criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Eq31Violation {
    pub n: usize,
    pub m: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// Outcome of [`eq31_check`] up to a total-degree cutoff. A clean pass
/// certifies the criterion only up to the cutoff; a violation refutes it
/// outright.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eq31Report {
    pub cutoff: usize,
    pub first_violation: Option<Eq31Violation>,
}

impl Eq31Report {
    pub fn holds_up_to_cutoff(&self) -> bool {
        self.first_violation.is_none()
    }
}

fn is_permutation(sigma: &[usize], d: usize) -> bool {
    if sigma.len() != d {
        return false;
    }
    let mut seen = vec![false; d];
    for &s in sigma {
        if s >= d || seen[s] {
            return false;
        }
        seen[s] = true;
    }
    true
}

/// Checks that `sigma` is a graph isomorphism from `P` to `Q`:
/// `(i,j) ∈ E(P) ⟺ (σi,σj) ∈ E(Q)`.
pub fn is_graph_iso(p: &StochasticMatrix, q: &StochasticMatrix, sigma: &[usize]) -> bool {
    let d = p.dim();
    if q.dim() != d || !is_permutation(sigma, d) {
        return false;
    }
    for i in 0..d {
        for j in 0..d {
            if p.is_positive(i, j) != q.is_positive(sigma[i], sigma[j]) {
                return false;
            }
        }
    }
    true
}

/// Exact verification of the degree-wise ratio criterion
/// `P^n_ij · P^m_jk / P^{n+m}_ik = Q^n_{σi σj} · Q^m_{σj σk} / Q^{n+m}_{σi σk}`
/// over all `n,m ≥ 1` with `n+m ≤ cutoff` and all `(i,j,k) ∈ E(P^n, P^m)`,
/// in exact rational arithmetic (compared cross-multiplied, so no division).
///
/// Requires `sigma` to be a graph isomorphism; the supports of all powers
/// then correspond under `sigma` and every ratio is well defined.
pub fn eq31_check(
    p: &StochasticMatrix,
    q: &StochasticMatrix,
    sigma: &[usize],
    cutoff: usize,
) -> Result<Eq31Report> {
    if !is_graph_iso(p, q, sigma) {
        return Err(Error::GraphMismatch(format!(
            "{sigma:?} does not match the directed graphs"
        )));
    }
    let mut ctx = Eq31Context::new(p, q, cutoff);
    Ok(ctx.check(sigma))
}

type RatioTable = (
    Vec<((usize, usize, usize), BigRational)>,
    BTreeMap<(usize, usize, usize), BigRational>,
);

/// Shared exact-ratio state for repeated criterion checks against different
/// permutations of the same pair. The ratios are permutation-independent,
/// so they are tabled once per `(n,m)` — lazily, in total-degree order, so
/// a permutation that violates at low degree never forces a high power to
/// be formed — and each check reduces to exact rational equalities.
pub(crate) struct Eq31Context {
    pp: Powers,
    qp: Powers,
    cutoff: usize,
    /// `(n, m)` pairs in total-degree order, aligned with `tables`.
    degree_pairs: Vec<(usize, usize)>,
    tables: Vec<Option<RatioTable>>,
}

impl Eq31Context {
    pub(crate) fn new(p: &StochasticMatrix, q: &StochasticMatrix, cutoff: usize) -> Self {
        assert!(cutoff >= 2, "cutoff must allow at least n = m = 1");
        let mut degree_pairs = Vec::new();
        for total in 2..=cutoff {
            for n in 1..total {
                degree_pairs.push((n, total - n));
            }
        }
        let tables = vec![None; degree_pairs.len()];
        Eq31Context { pp: Powers::new(p), qp: Powers::new(q), cutoff, degree_pairs, tables }
    }

    fn table(&mut self, idx: usize) -> &RatioTable {
        if self.tables[idx].is_none() {
            let (n, m) = self.degree_pairs[idx];
            let sn = self.pp.support(n);
            let sm = self.pp.support(m);
            let mut p_side = Vec::new();
            for (i, j, k) in support_triples(&sn, &sm) {
                let pr = self.pp.entry(n, i, j) * self.pp.entry(m, j, k)
                    / self.pp.entry(n + m, i, k);
                p_side.push(((i, j, k), pr));
            }
            let qn = self.qp.support(n);
            let qm = self.qp.support(m);
            let mut q_side = BTreeMap::new();
            for (i, j, k) in support_triples(&qn, &qm) {
                let qr = self.qp.entry(n, i, j) * self.qp.entry(m, j, k)
                    / self.qp.entry(n + m, i, k);
                q_side.insert((i, j, k), qr);
            }
            self.tables[idx] = Some((p_side, q_side));
        }
        self.tables[idx].as_ref().unwrap()
    }

    pub(crate) fn check(&mut self, sigma: &[usize]) -> Eq31Report {
        let cutoff = self.cutoff;
        for idx in 0..self.degree_pairs.len() {
            let (n, m) = self.degree_pairs[idx];
            self.table(idx);
            let (p_side, q_side) = self.tables[idx].as_ref().unwrap();
            for ((i, j, k), pr) in p_side {
                // Under a graph isomorphism the image triple is on-support,
                // so the lookup always succeeds.
                let qr = &q_side[&(sigma[*i], sigma[*j], sigma[*k])];
                if pr != qr {
                    return Eq31Report {
                        cutoff,
                        first_violation: Some(Eq31Violation { n, m, i: *i, j: *j, k: *k }),
                    };
                }
            }
        }
        Eq31Report { cutoff, first_violation: None }
    }
}
