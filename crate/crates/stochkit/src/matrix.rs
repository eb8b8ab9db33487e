//! Row-stochastic matrices with exact rational entries.
//!
//! All structural quantities (powers, supports, row sums) are computed on
//! `BigRational`; only square-root-bearing quantities are handed to the
//! numeric layer, and those always convert an exact ratio first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num::bigint::{BigInt, Sign};
use num::traits::{Signed, ToPrimitive, Zero};
use num::{BigRational, BigUint, One};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::RationalMat;

/// A row-stochastic matrix over a finite ordered state set.
///
/// Invariants enforced at construction: entries are non-negative, every row
/// sums to exactly 1, and state labels are unique. States are indexed
/// `0..d-1` internally; labels are I/O only.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    states: Vec<String>,
    entries: RationalMat,
}

#[derive(Deserialize)]
struct MatrixJson {
    states: Option<Vec<String>>,
    rows: Vec<Vec<String>>,
}

impl StochasticMatrix {
    /// Validating constructor from exact rational rows.
    pub fn from_rows(states: Vec<String>, rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Validation("matrix must have at least one state".into()));
        }
        if states.len() != d {
            return Err(Error::Validation(format!(
                "{} labels for {} rows",
                states.len(),
                d
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.clone()) {
                return Err(Error::Validation(format!("duplicate state label {s:?}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            let mut sum = BigRational::zero();
            for (j, e) in row.iter().enumerate() {
                if e.is_negative() {
                    return Err(Error::Validation(format!("negative entry at ({i},{j})")));
                }
                sum += e;
            }
            if !sum.is_one() {
                return Err(Error::Validation(format!("row {i} sums to {sum}, not 1")));
            }
        }
        let entries = Mat::from_rows(rows).expect("row lengths checked above");
        Ok(StochasticMatrix { states, entries })
    }

    /// Bypasses validation; intended for negative-control tests that need a
    /// deliberately non-stochastic matrix.
    pub fn from_rows_unchecked(states: Vec<String>, rows: Vec<Vec<BigRational>>) -> Self {
        let entries = Mat::from_rows(rows).expect("rows must be rectangular");
        StochasticMatrix { states, entries }
    }

    /// Parses the matrix JSON format: `{"states": [...], "rows": [["1/2",...]]}`.
    /// Entries are strings holding a rational `p/q`, an integer, or a decimal
    /// (converted exactly). `states` may be omitted; indices are used then.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let parsed: MatrixJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let d = parsed.rows.len();
        let states = parsed
            .states
            .unwrap_or_else(|| (0..d).map(|i| i.to_string()).collect());
        let mut rows = Vec::with_capacity(d);
        for row in &parsed.rows {
            rows.push(
                row.iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Self::from_rows(states, rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigRational {
        self.entries.get(i, j)
    }

    pub fn entries(&self) -> &RationalMat {
        &self.entries
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        !self.entries.get(i, j).is_zero()
    }

    /// Exact `P^n`; `n = 0` yields the identity. Row sums remain exactly 1.
    pub fn power(&self, n: usize) -> StochasticMatrix {
        StochasticMatrix {
            states: self.states.clone(),
            entries: self.entries.pow(n),
        }
    }

    /// The support `E(P^n)` as an exact index-pair set, `n ≥ 1`.
    pub fn support(&self, n: usize) -> SupportSet {
        assert!(n >= 1, "support is defined for degree ≥ 1");
        SupportSet::from_mat(&self.entries.pow(n), n)
    }

    /// `√(P^n)` and `(√(P^n))^♭` in double precision. The flat matrix is the
    /// entry-wise reciprocal of the square root on the support and 0 off it.
    pub fn schur_ops(&self, n: usize) -> (SchurMatrix, SchurMatrix) {
        assert!(n >= 1, "schur ops are defined for degree ≥ 1");
        let pn = self.entries.pow(n);
        let sqrt = pn.map(|e| rat_to_f64(e).sqrt());
        let flat = sqrt.map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 });
        (
            SchurMatrix { entries: sqrt, role: SchurRole::Sqrt },
            SchurMatrix { entries: flat, role: SchurRole::Flat },
        )
    }

    /// Successor adjacency lists of the directed graph of `P`.
    pub fn graph(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).filter(|&j| self.is_positive(i, j)).collect())
            .collect()
    }

    /// Relabels states by `sigma`; with `R` the permutation matrix of
    /// `sigma`, the result `Q = R P R⁻¹` satisfies `Q[sigma(i)][sigma(j)] = P[i][j]`,
    /// i.e. `P` is isomorphic to `Q` through `sigma`.
    pub fn pushforward(&self, sigma: &[usize]) -> StochasticMatrix {
        let mut states = vec![String::new(); self.states.len()];
        for (i, s) in self.states.iter().enumerate() {
            states[sigma[i]] = s.clone();
        }
        StochasticMatrix {
            states,
            entries: self.entries.pushforward(sigma),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<String>> = (0..self.dim())
            .map(|i| self.entries.row(i).iter().map(|e| e.to_string()).collect())
            .collect();
        serde_json::json!({ "states": self.states, "rows": rows })
    }
}

impl fmt::Display for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            let row: Vec<String> = self.entries.row(i).iter().map(|e| e.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// The exact support of one power of a stochastic matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    pub degree: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    /// Strictly positive entries only; negative entries (possible only for
    /// deliberately corrupted non-stochastic inputs) are off-support.
    pub fn from_mat(m: &RationalMat, degree: usize) -> Self {
        let zero = BigRational::zero();
        let mut pairs = BTreeSet::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m.get(i, j) > &zero {
                    pairs.insert((i, j));
                }
            }
        }
        SupportSet { degree, pairs }
    }

    pub fn identity(d: usize) -> Self {
        SupportSet {
            degree: 0,
            pairs: (0..d).map(|i| (i, i)).collect(),
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    /// Successors grouped by source row.
    pub fn rows(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(i, j) in &self.pairs {
            out.entry(i).or_default().push(j);
        }
        out
    }
}

/// Triples `(i,j,k)` with `(i,j)` in the first support and `(j,k)` in the second.
pub fn support_triples(sn: &SupportSet, sm: &SupportSet) -> Vec<(usize, usize, usize)> {
    let rows_m = sm.rows();
    let mut out = Vec::new();
    for &(i, j) in &sn.pairs {
        if let Some(ks) = rows_m.get(&j) {
            for &k in ks {
                out.push((i, j, k));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchurRole {
    Sqrt,
    Flat,
    Plain,
}

/// A numeric-layer matrix tagged with its role in the Schur calculus.
#[derive(Clone, Debug, PartialEq)]
pub struct SchurMatrix {
    pub entries: Mat<f64>,
    pub role: SchurRole,
}

/// Cache of exact powers `P^0, P^1, …` grown on demand.
pub struct Powers {
    base: RationalMat,
    mats: Vec<RationalMat>,
}

impl Powers {
    pub fn new(p: &StochasticMatrix) -> Self {
        Powers {
            base: p.entries.clone(),
            mats: vec![Mat::identity(p.dim())],
        }
    }

    pub fn get(&mut self, n: usize) -> &RationalMat {
        while self.mats.len() <= n {
            let next = self.mats.last().unwrap().mul(&self.base);
            self.mats.push(next);
        }
        &self.mats[n]
    }

    pub fn entry(&mut self, n: usize, i: usize, j: usize) -> BigRational {
        self.get(n).get(i, j).clone()
    }

    pub fn support(&mut self, n: usize) -> SupportSet {
        SupportSet::from_mat(self.get(n), n)
    }
}

/// Parses `"p/q"`, an integer, or a decimal into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty entry".into()));
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {t:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {t:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {t:?}")));
        }
        BigRational::new(n, d)
    } else if let Some((int, frac)) = body.split_once('.') {
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal {t:?}")));
        }
        if int.is_empty() && frac.is_empty() {
            return Err(Error::Parse(format!("bad decimal {t:?}")));
        }
        let digits = format!("{int}{frac}");
        let n: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad decimal {t:?}")))?
        };
        let d = BigInt::from(10u32).pow(frac.len() as u32);
        BigRational::new(n, d)
    } else {
        let n: BigInt = body
            .parse()
            .map_err(|_| Error::Parse(format!("bad integer {t:?}")))?;
        BigRational::from_integer(n)
    };
    Ok(if sign < 0 { -value } else { value })
}

/// Converts an exact rational to `f64`, staying finite for numerators or
/// denominators far beyond the `f64` exponent range.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    let neg = r.numer().sign() == Sign::Minus;
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    let shift_num = (num.bits() as i64 - 900).max(0) as u64;
    let shift_den = (den.bits() as i64 - 900).max(0) as u64;
    let nf = biguint_shr_f64(num, shift_num);
    let df = biguint_shr_f64(den, shift_den);
    let mut v = nf / df;
    let mut e = shift_num as i64 - shift_den as i64;
    while e != 0 && v != 0.0 && v.is_finite() {
        let step = e.clamp(-900, 900);
        v *= 2f64.powi(step as i32);
        e -= step;
    }
    if neg {
        -v
    } else {
        v
    }
}

fn biguint_shr_f64(x: &BigUint, shift: u64) -> f64 {
    if shift == 0 {
        x.to_f64().unwrap_or(f64::INFINITY)
    } else {
        (x >> shift).to_f64().unwrap_or(f64::INFINITY)
    }
}
