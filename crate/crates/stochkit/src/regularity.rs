//! Reducing state sets, streamlined paths and cycles, candidate singular
//! states with their chain equivalence, proper triples, diagonal gauge
//! scaling families, and the disk-automorphism normalization used to
//! deform isomorphisms into regular ones.
//!
//! A streamlined path never repeats a vertex twice in a row, which is the
//! same as a path in the directed graph with all self-loops removed. That
//! identification makes the witness searches exact: existence questions
//! reduce to reachability and length questions to a bounded DP, with no
//! enumeration cap.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{Powers, StochasticMatrix};

/// A path with no immediate repetition `γ(t) = γ(t+1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamlinedPath {
    pub vertices: Vec<usize>,
}

impl StreamlinedPath {
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates edges and the no-adjacent-repeat condition against `P`.
    pub fn is_valid(&self, p: &StochasticMatrix) -> bool {
        self.vertices.windows(2).all(|w| w[0] != w[1] && p.is_positive(w[0], w[1]))
    }
}

/// Successor lists with self-loops removed: the graph whose paths are
/// exactly the streamlined paths.
fn streamlined_graph(p: &StochasticMatrix) -> Vec<Vec<usize>> {
    let d = p.dim();
    (0..d)
        .map(|i| (0..d).filter(|&j| j != i && p.is_positive(i, j)).collect())
        .collect()
}

/// `reach[a][b]`: a path of length ≥ 1 from `a` to `b` in the
/// self-loop-free graph.
fn streamlined_reach(graph: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let d = graph.len();
    let mut reach = vec![vec![false; d]; d];
    for a in 0..d {
        let mut queue: VecDeque<usize> = graph[a].iter().copied().collect();
        for &x in &graph[a] {
            reach[a][x] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &w in &graph[v] {
                if !reach[a][w] {
                    reach[a][w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    reach
}

#[derive(Clone, Debug)]
pub struct ReducingCheck {
    pub reducing: bool,
    /// A violating path when not reducing: it starts and ends in the set
    /// and leaves it in between.
    pub witness: Option<StreamlinedPath>,
}

/// A state set is reducing iff every path between its members stays inside
/// it. Checked by reachability over the complement: walk from the set's
/// exits through outside states and look for an edge back in.
pub fn is_reducing(p: &StochasticMatrix, set: &BTreeSet<usize>) -> ReducingCheck {
    assert!(!set.is_empty(), "reducing check needs a nonempty set");
    let d = p.dim();
    // pred[x]: how the outside state x was first reached.
    let mut pred: BTreeMap<usize, Option<usize>> = BTreeMap::new();
    let mut entry: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &s in set {
        for x in 0..d {
            if !set.contains(&x) && p.is_positive(s, x) && !pred.contains_key(&x) {
                pred.insert(x, None);
                entry.insert(x, s);
                queue.push_back(x);
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        for w in 0..d {
            if !p.is_positive(v, w) {
                continue;
            }
            if set.contains(&w) {
                // Reconstruct s → … → v → w.
                let mut back = vec![v];
                let mut cur = v;
                while let Some(&Some(prev)) = pred.get(&cur) {
                    back.push(prev);
                    cur = prev;
                }
                let start = entry[&cur];
                back.push(start);
                back.reverse();
                back.push(w);
                return ReducingCheck {
                    reducing: false,
                    witness: Some(StreamlinedPath { vertices: back }),
                };
            }
            if let std::collections::btree_map::Entry::Vacant(slot) = pred.entry(w) {
                slot.insert(Some(v));
                entry.insert(w, entry[&v]);
                queue.push_back(w);
            }
        }
    }
    ReducingCheck { reducing: true, witness: None }
}

/// A shortest streamlined cycle through `i`, or `None`. A singleton `{i}`
/// is reducing exactly when no such cycle exists, which the tests
/// cross-validate against [`is_reducing`].
pub fn streamlined_cycle_through(p: &StochasticMatrix, i: usize) -> Option<StreamlinedPath> {
    let graph = streamlined_graph(p);
    let d = p.dim();
    let mut best: Option<Vec<usize>> = None;
    for &j in &graph[i] {
        // BFS from j back to i in the self-loop-free graph.
        let mut prev = vec![usize::MAX; d];
        let mut seen = vec![false; d];
        seen[j] = true;
        let mut queue = VecDeque::from([j]);
        'bfs: while let Some(v) = queue.pop_front() {
            for &w in &graph[v] {
                if !seen[w] {
                    seen[w] = true;
                    prev[w] = v;
                    if w == i {
                        break 'bfs;
                    }
                    queue.push_back(w);
                }
            }
        }
        if !seen[i] {
            continue;
        }
        let mut path = vec![i];
        let mut cur = i;
        while cur != j {
            cur = prev[cur];
            path.push(cur);
        }
        path.push(i);
        path.reverse();
        if best.as_ref().is_none_or(|b| path.len() < b.len()) {
            best = Some(path);
        }
    }
    best.map(|vertices| StreamlinedPath { vertices })
}

/// Candidate singular states and their chain equivalence.
///
/// The candidate set `{i : P_ii > 0 and {i} reducing}` is a provable
/// superset of the states that can be singular for some isomorphism; which
/// candidates actually are is not decidable from the matrix alone, so
/// everything downstream is named `candidate` and verified where used.
#[derive(Clone, Debug)]
pub struct SingularityReport {
    pub reducing_states: BTreeSet<usize>,
    pub candidate_singular: BTreeSet<usize>,
    /// Partition of `candidate_singular` under the two-streamlined-paths
    /// relation.
    pub classes: Vec<Vec<usize>>,
    /// Lowest index per class, aligned with `classes`.
    pub representatives: Vec<usize>,
    reach: Vec<Vec<bool>>,
}

impl SingularityReport {
    /// Streamlined path from `a` to `b` exists (length 0 allowed).
    pub fn sp(&self, a: usize, b: usize) -> bool {
        a == b || self.reach[a][b]
    }

    pub fn class_of(&self, candidate: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&candidate))
    }
}

/// Computes reducing singletons, the candidate singular set, and its
/// partition. Two candidates are related when some pair of states admits
/// two streamlined paths, one through each; since streamlined paths
/// concatenate at a shared vertex, the relation reduces to reachability
/// (a common source reaching both and a common target reached by both).
pub fn singularity_report(p: &StochasticMatrix) -> SingularityReport {
    let d = p.dim();
    let graph = streamlined_graph(p);
    let reach = streamlined_reach(&graph);
    let reducing_states: BTreeSet<usize> = (0..d)
        .filter(|&i| is_reducing(p, &BTreeSet::from([i])).reducing)
        .collect();
    let candidate_singular: BTreeSet<usize> = reducing_states
        .iter()
        .copied()
        .filter(|&i| p.is_positive(i, i))
        .collect();

    let cands: Vec<usize> = candidate_singular.iter().copied().collect();
    let sp = |a: usize, b: usize| a == b || reach[a][b];
    let related = |c1: usize, c2: usize| {
        let common_source = (0..d).any(|i| sp(i, c1) && sp(i, c2));
        let common_target = (0..d).any(|k| sp(c1, k) && sp(c2, k));
        common_source && common_target
    };
    // Connected components of the relation graph on candidates.
    let mut class_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &c in &cands {
        if class_id.contains_key(&c) {
            continue;
        }
        let id = classes.len();
        let mut members = vec![c];
        class_id.insert(c, id);
        let mut queue = VecDeque::from([c]);
        while let Some(x) = queue.pop_front() {
            for &y in &cands {
                if !class_id.contains_key(&y) && related(x, y) {
                    class_id.insert(y, id);
                    members.push(y);
                    queue.push_back(y);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    let representatives = classes.iter().map(|c| c[0]).collect();
    SingularityReport { reducing_states, candidate_singular, classes, representatives, reach }
}

/// Answer to a proper-triple query `(i, k, n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProperTriple {
    pub proper: bool,
    /// Representative of the (necessarily unique) candidate class on the
    /// witnessing paths.
    pub class_representative: Option<usize>,
    /// The common length of all witnessing streamlined paths.
    pub length: Option<usize>,
}

/// Achievable streamlined-path lengths `< max_len` from `src` to every
/// vertex: `out[l][v]` iff a streamlined path of length `l` ends at `v`.
fn length_dp(graph: &[Vec<usize>], src: usize, max_len: usize) -> Vec<Vec<bool>> {
    let d = graph.len();
    let mut dp = vec![vec![false; d]; max_len + 1];
    dp[0][src] = true;
    for l in 0..max_len {
        for v in 0..d {
            if dp[l][v] {
                for &w in &graph[v] {
                    dp[l + 1][w] = true;
                }
            }
        }
    }
    dp
}

fn reversed(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); graph.len()];
    for (v, succs) in graph.iter().enumerate() {
        for &w in succs {
            out[w].push(v);
        }
    }
    out
}

/// Witness lengths through candidates for the pair `(i,k)`: every
/// streamlined path length `< max_len` from `i` to `k` passing through a
/// candidate state (endpoints included), with the candidate's class.
fn witness_lengths(
    p: &StochasticMatrix,
    report: &SingularityReport,
    i: usize,
    k: usize,
    max_len: usize,
) -> Vec<(usize, usize)> {
    let graph = streamlined_graph(p);
    let from_i = length_dp(&graph, i, max_len);
    let to_k = length_dp(&reversed(&graph), k, max_len);
    let mut out = BTreeSet::new();
    for &c in &report.candidate_singular {
        let class = report.class_of(c).expect("candidate is classified");
        for l1 in 0..=max_len {
            if !from_i[l1][c] {
                continue;
            }
            for l2 in 0..=(max_len - l1) {
                if to_k[l2][c] {
                    out.insert((l1 + l2, class));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Decides whether `(i,k,n)` is proper: a streamlined path from `i` to `k`
/// of length `ℓ < n` passes through a candidate singular state. All
/// witnessing paths must share one length (they do whenever the candidate
/// set coincides with the truly singular states); disagreement is reported
/// as an error rather than silently picking one.
pub fn proper_triple(
    p: &StochasticMatrix,
    report: &SingularityReport,
    i: usize,
    k: usize,
    n: usize,
) -> Result<ProperTriple> {
    let mut powers = Powers::new(p);
    if n == 0 || !powers.support(n).contains(i, k) {
        return Err(Error::OffSupport { degree: n, i, j: k });
    }
    let witnesses = witness_lengths(p, report, i, k, n - 1);
    let Some(&(len0, class0)) = witnesses.first() else {
        return Ok(ProperTriple { proper: false, class_representative: None, length: None });
    };
    for &(len, class) in &witnesses[1..] {
        if len != len0 {
            return Err(Error::AmbiguousWitnessLength(len0, len));
        }
        debug_assert_eq!(class, class0, "witnesses through one pair share a class");
    }
    Ok(ProperTriple {
        proper: true,
        class_representative: Some(report.representatives[class0]),
        length: Some(len0),
    })
}

/// The diagonal gauge family `V^Λ`: per degree `n`, the unit `E_ik` is
/// scaled by `λ_μ^{n-ℓ}` when `(i,k,n)` is proper with class `μ` and
/// witness length `ℓ`, and fixed otherwise.
#[derive(Clone, Debug)]
pub struct GaugeFamily {
    /// `factors[n]` maps `(i,k) ∈ E(P^n)` to its scalar, for `n = 1..=n_max`
    /// (index 0 unused and empty).
    pub factors: Vec<BTreeMap<(usize, usize), Complex64>>,
    /// Largest deviation of `factor_n(i,j)·factor_m(j,k)` from
    /// `factor_{n+m}(i,k)` over all unit tensors with `n+m ≤ n_max`.
    pub multiplicativity_defect: f64,
    pub checked_triples: usize,
}

/// Builds the gauge family for unit-modulus scalars `Λ`, one per candidate
/// class keyed by class representative (missing classes default to 1), and
/// verifies the subproduct-compatibility identity
/// `U(V_n ⊗ V_m) = V_{n+m} U` on all matrix-unit tensors up to total degree
/// `n_max`. The scalars have modulus one, so the identity is expected to
/// cancel exactly; the observed defect is reported.
pub fn gauge_family(
    p: &StochasticMatrix,
    report: &SingularityReport,
    lambda: &BTreeMap<usize, Complex64>,
    n_max: usize,
) -> Result<GaugeFamily> {
    for v in lambda.values() {
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitModulus);
        }
    }
    let mut powers = Powers::new(p);
    let mut factors: Vec<BTreeMap<(usize, usize), Complex64>> = vec![BTreeMap::new()];
    for n in 1..=n_max {
        let support = powers.support(n);
        let mut level = BTreeMap::new();
        for &(i, k) in &support.pairs {
            let pt = proper_triple(p, report, i, k, n)?;
            let factor = match (pt.proper, pt.class_representative, pt.length) {
                (true, Some(rep), Some(len)) => {
                    let l = lambda.get(&rep).copied().unwrap_or(Complex64::new(1.0, 0.0));
                    l.powi((n - len) as i32)
                }
                _ => Complex64::new(1.0, 0.0),
            };
            level.insert((i, k), factor);
        }
        factors.push(level);
    }

    let mut defect = 0.0f64;
    let mut checked = 0usize;
    for n in 1..n_max {
        for m in 1..=(n_max - n) {
            let sn = powers.support(n);
            let sm = powers.support(m);
            for (i, j, k) in crate::matrix::support_triples(&sn, &sm) {
                let lhs = factors[n][&(i, j)] * factors[m][&(j, k)];
                let rhs = factors[n + m][&(i, k)];
                defect = defect.max((lhs - rhs).norm());
                checked += 1;
            }
        }
    }
    Ok(GaugeFamily { factors, multiplicativity_defect: defect, checked_triples: checked })
}

/// A biholomorphic automorphism of the unit disk,
/// `z ↦ e^{iθ}(z − w)/(1 − w̄ z)` with `|w| < 1`.
#[derive(Clone, Copy, Debug)]
pub struct MoebiusMap {
    theta: f64,
    w: Complex64,
}

impl MoebiusMap {
    pub fn new(theta: f64, w: Complex64) -> Result<Self> {
        if w.norm() >= 1.0 {
            return Err(Error::Validation(format!(
                "center must lie in the open unit disk, |w| = {}",
                w.norm()
            )));
        }
        Ok(MoebiusMap { theta: theta.rem_euclid(2.0 * std::f64::consts::PI), w })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center(&self) -> Complex64 {
        self.w
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, self.theta);
        rot * (z - self.w) / (Complex64::new(1.0, 0.0) - self.w.conj() * z)
    }

    pub fn inv(&self, z: Complex64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, self.theta);
        (z + rot * self.w) / (rot + self.w.conj() * z)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Regularization {
    pub lambda: Complex64,
    pub mu: Complex64,
    /// Replayed value of `|T(μ · T⁻¹(λ · T(0)))|`.
    pub residual: f64,
}

/// Finds unit scalars `λ, μ` with `T(μ · T⁻¹(λ · T(0))) = 0`.
///
/// Geometry: as `λ` runs over the circle, `λ·T(0)` traces the circle `C`
/// of radius `|T(0)| = |w|` around the origin, and `T⁻¹(C)` is a circle
/// through the origin. The composite vanishes iff `μ · T⁻¹(λ·T(0))` hits
/// the zero `w` of `T`, i.e. iff `T⁻¹(λ·T(0))` has modulus `|w|`. Writing
/// the preimage in closed form, `T⁻¹(λ·T(0)) = w(1−λ)/(1−λ|w|²)`, the
/// modulus condition reduces to `|1−λ| = |1−λ|w|²|`, i.e.
/// `cos(arg λ) = (1+|w|²)/2`, which always has a solution; `μ` is then the
/// rotation carrying the preimage to `w`. A replayed evaluation is
/// returned as the residual, with a short angle-space polish as fallback.
pub fn moebius_regularize(t: &MoebiusMap) -> Result<Regularization> {
    let one = Complex64::new(1.0, 0.0);
    let residual_of = |lambda: Complex64, mu: Complex64| {
        t.eval(mu * t.inv(lambda * t.eval(Complex64::new(0.0, 0.0)))).norm()
    };
    let w = t.center();
    if w.norm() == 0.0 {
        return Ok(Regularization { lambda: one, mu: one, residual: residual_of(one, one) });
    }
    let a = w.norm_sqr();
    let phi = ((1.0 + a) / 2.0).acos();
    let mut lambda = Complex64::from_polar(1.0, phi);
    let z2 = w * (one - lambda) / (one - lambda * a);
    let mut mu = w / z2;
    mu /= mu.norm();
    let mut residual = residual_of(lambda, mu);

    if residual >= 1e-12 {
        // Angle-space Newton polish on g(φ,ψ) = T(e^{iψ}T⁻¹(e^{iφ}T(0))).
        let mut ang = (lambda.arg(), mu.arg());
        for _ in 0..40 {
            let g = |p: (f64, f64)| {
                t.eval(
                    Complex64::from_polar(1.0, p.1)
                        * t.inv(Complex64::from_polar(1.0, p.0) * t.eval(Complex64::new(0.0, 0.0))),
                )
            };
            let f0 = g(ang);
            if f0.norm() < 1e-14 {
                break;
            }
            let h = 1e-7;
            let d1 = (g((ang.0 + h, ang.1)) - f0) / h;
            let d2 = (g((ang.0, ang.1 + h)) - f0) / h;
            // Solve the 2x2 real system [Re d1 Re d2; Im d1 Im d2] δ = -f0.
            let det = d1.re * d2.im - d2.re * d1.im;
            if det.abs() < 1e-18 {
                break;
            }
            let dx = (-f0.re * d2.im + f0.im * d2.re) / det;
            let dy = (-d1.re * f0.im + d1.im * f0.re) / det;
            ang = (ang.0 + dx, ang.1 + dy);
        }
        lambda = Complex64::from_polar(1.0, ang.0);
        mu = Complex64::from_polar(1.0, ang.1);
        residual = residual_of(lambda, mu);
    }
    if residual >= 1e-12 {
        return Err(Error::NoConvergence(format!("residual {residual} after polish")));
    }
    Ok(Regularization { lambda, mu, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use num::BigRational;

    fn rq(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn reducible_family_singletons_are_reducing() {
        let p = fixtures::reducible_family(rq(1, 3));
        for i in 0..3 {
            let check = is_reducing(&p, &set(&[i]));
            assert!(check.reducing, "state {i}");
        }
        assert!(is_reducing(&p, &set(&[0, 1, 2])).reducing, "whole state set");
    }

    #[test]
    fn irreducible_singletons_are_not_reducing() {
        let p = fixtures::two_state();
        for i in 0..2 {
            let check = is_reducing(&p, &set(&[i]));
            assert!(!check.reducing);
            let witness = check.witness.unwrap();
            assert!(witness.is_valid(&p));
            assert_eq!(witness.vertices.first(), Some(&i));
            assert_eq!(witness.vertices.last(), Some(&i));
            assert!(witness.len() >= 2);
        }
    }

    #[test]
    fn streamlined_cycles() {
        let p = fixtures::cycle(2);
        let cyc = streamlined_cycle_through(&p, 0).unwrap();
        assert_eq!(cyc.vertices, vec![0, 1, 0]);

        // Absorbing states of the reducible family have none.
        let p = fixtures::reducible_family(rq(1, 3));
        for i in 0..3 {
            assert!(streamlined_cycle_through(&p, i).is_none(), "state {i}");
        }
    }

    #[test]
    fn reducing_iff_no_streamlined_cycle() {
        // Cross-check of the two independent algorithms on assorted fixtures.
        for p in [
            fixtures::two_state(),
            fixtures::cycle(3),
            fixtures::identity(3),
            fixtures::reducible_family(rq(2, 5)),
            fixtures::rank_one_family(rq(1, 4)),
        ] {
            for i in 0..p.dim() {
                let reducing = is_reducing(&p, &set(&[i])).reducing;
                let no_cycle = streamlined_cycle_through(&p, i).is_none();
                assert_eq!(reducing, no_cycle, "state {i} of {p}");
            }
        }
    }

    #[test]
    fn report_for_reducible_family() {
        let p = fixtures::reducible_family(rq(1, 3));
        let report = singularity_report(&p);
        assert_eq!(report.reducing_states, set(&[0, 1, 2]));
        assert_eq!(report.candidate_singular, set(&[1, 2]));
        // The absorbing states cannot share both endpoints.
        assert_eq!(report.classes, vec![vec![1], vec![2]]);
        assert_eq!(report.representatives, vec![1, 2]);
    }

    #[test]
    fn report_for_irreducible_and_trivial() {
        let p = fixtures::two_state();
        let report = singularity_report(&p);
        assert!(report.candidate_singular.is_empty());

        let one = StochasticMatrix::from_json_str(r#"{"rows":[["1"]]}"#).unwrap();
        let report = singularity_report(&one);
        assert_eq!(report.candidate_singular, set(&[0]));
        assert_eq!(report.classes, vec![vec![0]]);
    }

    #[test]
    fn related_candidates_with_common_endpoints() {
        // 0 feeds absorbing-ish loop states 1 and 2, both of which reach 3.
        let p = StochasticMatrix::from_json_str(
            r#"{"rows":[["0","1/2","1/2","0"],["0","1/2","0","1/2"],["0","0","1/2","1/2"],["0","0","0","1"]]}"#,
        )
        .unwrap();
        let report = singularity_report(&p);
        assert_eq!(report.candidate_singular, set(&[1, 2, 3]));
        // The paths (0,1,3) and (0,2,3) share both endpoints, so 1 ~ 2, and
        // (0,1,3) itself passes through 3, joining it to the class.
        assert_eq!(report.classes, vec![vec![1, 2, 3]]);
    }

    #[test]
    fn proper_triples_on_reducible_family() {
        let p = fixtures::reducible_family(rq(1, 3));
        let report = singularity_report(&p);
        // (0,1,n): the path (0,1) has length 1 through candidate 1.
        let pt = proper_triple(&p, &report, 0, 1, 3).unwrap();
        assert!(pt.proper);
        assert_eq!(pt.length, Some(1));
        assert_eq!(pt.class_representative, Some(1));
        // Strict inequality: length 1 is not < 1.
        let pt = proper_triple(&p, &report, 0, 1, 1).unwrap();
        assert!(!pt.proper);
        // Off-support query.
        assert!(matches!(
            proper_triple(&p, &report, 1, 0, 2),
            Err(Error::OffSupport { .. })
        ));
        // Deterministic cycle: no candidates at all.
        let c = fixtures::cycle(3);
        let rc = singularity_report(&c);
        let pt = proper_triple(&c, &rc, 0, 1, 4).unwrap();
        assert!(!pt.proper);
    }

    #[test]
    fn gauge_family_identity_when_lambda_trivial() {
        let p = fixtures::reducible_family(rq(1, 3));
        let report = singularity_report(&p);
        let fam = gauge_family(&p, &report, &BTreeMap::new(), 6).unwrap();
        for level in &fam.factors[1..] {
            assert!(level.values().all(|v| (v - Complex64::new(1.0, 0.0)).norm() == 0.0));
        }
        assert_eq!(fam.multiplicativity_defect, 0.0);

        // No candidates: identity for any lambda.
        let c = fixtures::cycle(3);
        let rc = singularity_report(&c);
        let lam = BTreeMap::new();
        let fam = gauge_family(&c, &rc, &lam, 6).unwrap();
        for level in &fam.factors[1..] {
            assert!(level.values().all(|v| (v - Complex64::new(1.0, 0.0)).norm() == 0.0));
        }
    }

    #[test]
    fn gauge_family_scales_by_shifted_power() {
        let p = fixtures::reducible_family(rq(1, 3));
        let report = singularity_report(&p);
        let i = Complex64::new(0.0, 1.0);
        let lam = BTreeMap::from([(1usize, i)]);
        let fam = gauge_family(&p, &report, &lam, 8).unwrap();
        for n in 2..=8usize {
            let f = fam.factors[n][&(0, 1)];
            assert!((f - i.powi(n as i32 - 1)).norm() < 1e-12, "degree {n}");
            // The untouched class stays fixed.
            assert_eq!(fam.factors[n][&(0, 2)], Complex64::new(1.0, 0.0));
        }
        assert_eq!(fam.factors[1][&(0, 1)], Complex64::new(1.0, 0.0));
        assert!(fam.multiplicativity_defect < 1e-12);
        assert!(fam.checked_triples > 0);
    }

    #[test]
    fn gauge_family_mixes_independent_classes() {
        let p = fixtures::reducible_family(rq(1, 3));
        let report = singularity_report(&p);
        let i = Complex64::new(0.0, 1.0);
        let minus = Complex64::new(-1.0, 0.0);
        let lam = BTreeMap::from([(1usize, i), (2usize, minus)]);
        let fam = gauge_family(&p, &report, &lam, 6).unwrap();
        for n in 2..=6usize {
            assert!((fam.factors[n][&(0, 1)] - i.powi(n as i32 - 1)).norm() < 1e-12);
            assert!((fam.factors[n][&(0, 2)] - minus.powi(n as i32 - 1)).norm() < 1e-12);
            assert!((fam.factors[n][&(1, 1)] - i.powi(n as i32)).norm() < 1e-12);
            assert!((fam.factors[n][&(2, 2)] - minus.powi(n as i32)).norm() < 1e-12);
        }
        assert!(fam.multiplicativity_defect < 1e-12);
    }

    #[test]
    fn gauge_family_rejects_non_unit_scalars() {
        let p = fixtures::reducible_family(rq(1, 3));
        let report = singularity_report(&p);
        let lam = BTreeMap::from([(1usize, Complex64::new(0.5, 0.0))]);
        assert!(matches!(
            gauge_family(&p, &report, &lam, 4),
            Err(Error::NotUnitModulus)
        ));
    }

    #[test]
    fn moebius_fixed_origin() {
        let t = MoebiusMap::new(1.3, Complex64::new(0.0, 0.0)).unwrap();
        let r = moebius_regularize(&t).unwrap();
        assert_eq!(r.lambda, Complex64::new(1.0, 0.0));
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn moebius_half_center_matches_grid_oracle() {
        let t = MoebiusMap::new(0.0, Complex64::new(0.5, 0.0)).unwrap();
        let r = moebius_regularize(&t).unwrap();
        assert!(r.residual < 1e-12, "residual {}", r.residual);
        assert!((r.lambda.norm() - 1.0).abs() < 1e-12);
        assert!((r.mu.norm() - 1.0).abs() < 1e-12);

        // Independent oracle: coarse 360×360 grid search over both angles,
        // then a local refinement around the best cell.
        let zero = Complex64::new(0.0, 0.0);
        let eval = |phi: f64, psi: f64| {
            t.eval(Complex64::from_polar(1.0, psi) * t.inv(Complex64::from_polar(1.0, phi) * t.eval(zero)))
                .norm()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let step = std::f64::consts::TAU / 360.0;
        for a in 0..360 {
            for b in 0..360 {
                let v = eval(a as f64 * step, b as f64 * step);
                if v < best.0 {
                    best = (v, a as f64 * step, b as f64 * step);
                }
            }
        }
        let (_, mut phi, mut psi) = best;
        let mut width = step;
        for _ in 0..60 {
            let mut local = (eval(phi, psi), phi, psi);
            for da in [-1.0, 0.0, 1.0] {
                for db in [-1.0, 0.0, 1.0] {
                    let v = eval(phi + da * width, psi + db * width);
                    if v < local.0 {
                        local = (v, phi + da * width, psi + db * width);
                    }
                }
            }
            phi = local.1;
            psi = local.2;
            width *= 0.6;
        }
        let oracle_residual = eval(phi, psi);
        assert!(oracle_residual < 1e-12, "grid oracle stalled at {oracle_residual}");
        // Both the closed form and the oracle hit a true zero; the zero set
        // is a single orbit so the angles agree up to the search tolerance.
        assert!(r.residual <= oracle_residual + 1e-12);
    }

    #[test]
    fn moebius_replay_validates_output() {
        for (theta, w) in [
            (0.7, Complex64::new(0.3, -0.4)),
            (2.9, Complex64::new(-0.8, 0.1)),
            (5.5, Complex64::new(0.05, 0.92)),
        ] {
            let t = MoebiusMap::new(theta, w).unwrap();
            let r = moebius_regularize(&t).unwrap();
            let replay = t
                .eval(r.mu * t.inv(r.lambda * t.eval(Complex64::new(0.0, 0.0))))
                .norm();
            assert!(replay < 1e-12, "replay {replay}");
        }
    }

    #[test]
    fn moebius_rejects_center_outside_disk() {
        assert!(MoebiusMap::new(0.0, Complex64::new(1.0, 0.0)).is_err());
    }
}
