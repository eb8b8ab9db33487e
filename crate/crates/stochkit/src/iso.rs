//! Permutation search and the isomorphism decision procedures.
//!
//! Three nested notions are searched: graph isomorphism (`~`), weighted
//! isomorphism (`≅`, exact entry match), and the degree-wise ratio
//! criterion checked up to a cutoff. The top-level decisions combine them:
//! for finite essential pairs the isometric question reduces exactly to the
//! weighted search and the algebraic question to the graph search; outside
//! the essential case the procedures refuse to overclaim and return
//! `Unknown` with the strongest certificate found.

use num::BigRational;

use crate::chain::{classify, communicating_classes, restrict, stationary};
use crate::error::{Error, Result};
use crate::matrix::{rat_to_f64, Powers, StochasticMatrix, SupportSet};
use crate::subproduct::{eq31_check, is_graph_iso, Eq31Context, Eq31Violation, Fiber};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertMode {
    Graph,
    Weighted,
    /// Ratio criterion verified for all total degrees up to the cutoff.
    Eq31 { cutoff: usize },
}

/// A permutation witnessing a verdict, tagged with how much it certifies.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityCertificate {
    pub sigma: Vec<usize>,
    pub mode: CertMode,
    /// Estimated `sup_n max(‖V_n‖, ‖V_n⁻¹‖)` when a similarity family has
    /// been built on top of the certificate.
    pub family_bound: Option<f64>,
}

impl SimilarityCertificate {
    /// Re-validates the certificate against the pair by direct exact check.
    pub fn validate(&self, p: &StochasticMatrix, q: &StochasticMatrix) -> bool {
        match self.mode {
            CertMode::Graph => is_graph_iso(p, q, &self.sigma),
            CertMode::Weighted => is_weighted_iso(p, q, &self.sigma),
            CertMode::Eq31 { cutoff } => eq31_check(p, q, &self.sigma, cutoff)
                .map(|r| r.holds_up_to_cutoff())
                .unwrap_or(false),
        }
    }

    /// The certificate for the pair in the opposite order.
    pub fn inverse(&self) -> SimilarityCertificate {
        let mut inv = vec![0; self.sigma.len()];
        for (i, &s) in self.sigma.iter().enumerate() {
            inv[s] = i;
        }
        SimilarityCertificate { sigma: inv, mode: self.mode.clone(), family_bound: self.family_bound }
    }
}

/// Three-valued decision outcome. `Yes` always carries a certificate; `No`
/// carries an exhaustion or invariant-mismatch reason.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: Answer,
    pub certificate: Option<SimilarityCertificate>,
    pub reason: String,
}

impl Verdict {
    fn yes(certificate: SimilarityCertificate, reason: impl Into<String>) -> Self {
        Verdict { answer: Answer::Yes, certificate: Some(certificate), reason: reason.into() }
    }

    fn no(reason: impl Into<String>) -> Self {
        Verdict { answer: Answer::No, certificate: None, reason: reason.into() }
    }

    fn unknown(certificate: Option<SimilarityCertificate>, reason: impl Into<String>) -> Self {
        Verdict { answer: Answer::Unknown, certificate, reason: reason.into() }
    }

    /// JSON form with `sigma` rendered as a state-label mapping.
    pub fn to_json(&self, p: &StochasticMatrix, q: &StochasticMatrix) -> serde_json::Value {
        let answer = match self.answer {
            Answer::Yes => "YES",
            Answer::No => "NO",
            Answer::Unknown => "UNKNOWN",
        };
        let (sigma, mode, cutoff) = match &self.certificate {
            Some(cert) => {
                let map: serde_json::Map<String, serde_json::Value> = cert
                    .sigma
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| {
                        (p.states()[i].clone(), serde_json::Value::String(q.states()[s].clone()))
                    })
                    .collect();
                let (mode, cutoff) = match cert.mode {
                    CertMode::Graph => ("graph", None),
                    CertMode::Weighted => ("weighted", None),
                    CertMode::Eq31 { cutoff } => ("eq31_up_to_N", Some(cutoff)),
                };
                (serde_json::Value::Object(map), Some(mode), cutoff)
            }
            None => (serde_json::Value::Null, None, None),
        };
        serde_json::json!({
            "answer": answer,
            "sigma": sigma,
            "mode": mode,
            "cutoff": cutoff,
            "reason": self.reason,
        })
    }
}

/// Exact weighted check: `P_ij = Q_{σi σj}` for all pairs.
pub fn is_weighted_iso(p: &StochasticMatrix, q: &StochasticMatrix, sigma: &[usize]) -> bool {
    let d = p.dim();
    if q.dim() != d || sigma.len() != d {
        return false;
    }
    for i in 0..d {
        for j in 0..d {
            if p.entry(i, j) != q.entry(sigma[i], sigma[j]) {
                return false;
            }
        }
    }
    true
}

/// Per-state invariants a candidate image must match before backtracking:
/// degrees, self-loop, and the communicating-class data (size, period,
/// essential flag); the weighted search additionally matches the sorted
/// row and column entry multisets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Profile {
    out_deg: usize,
    in_deg: usize,
    self_loop: bool,
    class_size: usize,
    class_period: Option<usize>,
    class_essential: bool,
    row_values: Vec<BigRational>,
    col_values: Vec<BigRational>,
}

fn profiles(p: &StochasticMatrix, weighted: bool) -> Vec<Profile> {
    let d = p.dim();
    let decomp = communicating_classes(p);
    let report = classify(p);
    (0..d)
        .map(|v| {
            let class_idx = decomp.class_of(v);
            let mut row_values = Vec::new();
            let mut col_values = Vec::new();
            if weighted {
                row_values = (0..d).map(|j| p.entry(v, j).clone()).collect();
                col_values = (0..d).map(|i| p.entry(i, v).clone()).collect();
                row_values.sort();
                col_values.sort();
            }
            Profile {
                out_deg: (0..d).filter(|&j| p.is_positive(v, j)).count(),
                in_deg: (0..d).filter(|&i| p.is_positive(i, v)).count(),
                self_loop: p.is_positive(v, v),
                class_size: decomp.classes[class_idx].len(),
                class_period: report.classes[class_idx].period,
                class_essential: decomp.essential_flags[class_idx],
                row_values,
                col_values,
            }
        })
        .collect()
}

struct Search<'a> {
    p: &'a StochasticMatrix,
    q: &'a StochasticMatrix,
    weighted: bool,
    order: Vec<usize>,
    candidates: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    /// `None` when the per-profile state counts already rule out any
    /// isomorphism.
    fn new(p: &'a StochasticMatrix, q: &'a StochasticMatrix, weighted: bool) -> Option<Self> {
        let d = p.dim();
        let pp = profiles(p, weighted);
        let qp = profiles(q, weighted);
        let mut sorted_p = pp.clone();
        let mut sorted_q = qp.clone();
        sorted_p.sort();
        sorted_q.sort();
        if sorted_p != sorted_q {
            return None;
        }
        let candidates: Vec<Vec<usize>> = (0..d)
            .map(|v| (0..d).filter(|&w| qp[w] == pp[v]).collect())
            .collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by_key(|&v| (candidates[v].len(), v));
        Some(Search { p, q, weighted, order, candidates })
    }

    fn compatible(&self, sigma: &[Option<usize>], v: usize, w: usize) -> bool {
        if self.weighted {
            if self.p.entry(v, v) != self.q.entry(w, w) {
                return false;
            }
        } else if self.p.is_positive(v, v) != self.q.is_positive(w, w) {
            return false;
        }
        for (u, assigned) in sigma.iter().enumerate() {
            let Some(wu) = *assigned else { continue };
            let ok = if self.weighted {
                self.p.entry(u, v) == self.q.entry(wu, w)
                    && self.p.entry(v, u) == self.q.entry(w, wu)
            } else {
                self.p.is_positive(u, v) == self.q.is_positive(wu, w)
                    && self.p.is_positive(v, u) == self.q.is_positive(w, wu)
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Deterministic depth-first enumeration; `on_found` returns `true` to
    /// stop. Returns whether any isomorphism was found.
    fn run(&self, on_found: &mut impl FnMut(&[usize]) -> bool) -> bool {
        let d = self.p.dim();
        let mut sigma: Vec<Option<usize>> = vec![None; d];
        let mut used = vec![false; d];
        self.backtrack(0, &mut sigma, &mut used, on_found).1
    }

    fn backtrack(
        &self,
        depth: usize,
        sigma: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        on_found: &mut impl FnMut(&[usize]) -> bool,
    ) -> (bool, bool) {
        if depth == self.order.len() {
            let full: Vec<usize> = sigma.iter().map(|s| s.unwrap()).collect();
            let stop = on_found(&full);
            return (stop, true);
        }
        let v = self.order[depth];
        let mut any = false;
        for &w in &self.candidates[v] {
            if used[w] || !self.compatible(sigma, v, w) {
                continue;
            }
            sigma[v] = Some(w);
            used[w] = true;
            let (stop, found) = self.backtrack(depth + 1, sigma, used, on_found);
            any |= found;
            sigma[v] = None;
            used[w] = false;
            if stop {
                return (true, any);
            }
        }
        (false, any)
    }
}

fn check_sizes(p: &StochasticMatrix, q: &StochasticMatrix) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::SizeMismatch { left: p.dim(), right: q.dim() });
    }
    Ok(())
}

fn first_iso(p: &StochasticMatrix, q: &StochasticMatrix, weighted: bool) -> Option<Vec<usize>> {
    let search = Search::new(p, q, weighted)?;
    let mut found = None;
    search.run(&mut |sigma| {
        found = Some(sigma.to_vec());
        true
    });
    found
}

/// Backtracking search for a permutation with `R_σ⁻¹ Gr(Q) R_σ = Gr(P)`,
/// pruned by degree and class-structure profiles.
pub fn find_graph_iso(p: &StochasticMatrix, q: &StochasticMatrix) -> Result<Verdict> {
    check_sizes(p, q)?;
    match first_iso(p, q, false) {
        Some(sigma) => Ok(Verdict::yes(
            SimilarityCertificate { sigma, mode: CertMode::Graph, family_bound: None },
            "directed graphs are isomorphic",
        )),
        None => Ok(Verdict::no(
            "exhausted all profile-compatible permutations; directed graphs are not isomorphic",
        )),
    }
}

/// Same search matching exact rational entries: `R_σ⁻¹ Q R_σ = P`.
pub fn find_weighted_iso(p: &StochasticMatrix, q: &StochasticMatrix) -> Result<Verdict> {
    check_sizes(p, q)?;
    match first_iso(p, q, true) {
        Some(sigma) => Ok(Verdict::yes(
            SimilarityCertificate { sigma, mode: CertMode::Weighted, family_bound: None },
            "weighted directed graphs are isomorphic",
        )),
        None => Ok(Verdict::no(
            "exhausted all profile-compatible permutations; weighted graphs are not isomorphic",
        )),
    }
}

/// Searches the graph isomorphisms for one satisfying the ratio criterion
/// up to total degree `cutoff`. A pass certifies only up to the cutoff
/// (flagged in the certificate); failure of every graph isomorphism is a
/// certified `No`, since a unitary fiber-system isomorphism would induce a
/// graph isomorphism satisfying the criterion at every degree.
pub fn find_eq31_iso(p: &StochasticMatrix, q: &StochasticMatrix, cutoff: usize) -> Result<Verdict> {
    check_sizes(p, q)?;
    let Some(search) = Search::new(p, q, false) else {
        return Ok(Verdict::no(
            "exhausted all profile-compatible permutations; directed graphs are not isomorphic",
        ));
    };
    let mut ctx = Eq31Context::new(p, q, cutoff);
    let mut passing: Option<Vec<usize>> = None;
    let mut violations: Vec<(Vec<usize>, Eq31Violation)> = Vec::new();
    let any = search.run(&mut |sigma| {
        let report = ctx.check(sigma);
        match report.first_violation {
            None => {
                passing = Some(sigma.to_vec());
                true
            }
            Some(v) => {
                if violations.len() < 4 {
                    violations.push((sigma.to_vec(), v));
                }
                false
            }
        }
    });
    if let Some(sigma) = passing {
        return Ok(Verdict::yes(
            SimilarityCertificate { sigma, mode: CertMode::Eq31 { cutoff }, family_bound: None },
            format!("ratio criterion holds for all total degrees ≤ {cutoff}"),
        ));
    }
    if !any {
        return Ok(Verdict::no(
            "exhausted all profile-compatible permutations; directed graphs are not isomorphic",
        ));
    }
    let detail: Vec<String> = violations
        .iter()
        .map(|(sigma, v)| {
            format!(
                "sigma {:?} fails at (n,m)=({},{}), triple ({},{},{})",
                sigma, v.n, v.m, v.i, v.j, v.k
            )
        })
        .collect();
    Ok(Verdict::no(format!(
        "every graph isomorphism violates the ratio criterion at total degree ≤ {cutoff}: {}",
        detail.join("; ")
    )))
}

/// Decides isometric isomorphism of the tensor algebras.
///
/// A weighted isomorphism is always sufficient (it satisfies the ratio
/// criterion at every degree, hence gives a unitary fiber-system
/// isomorphism and an isometric one), so a weighted hit is `Yes` for any
/// pair. For finite essential (equivalently recurrent) pairs it is also
/// necessary, making the decision exact. Otherwise a ratio-criterion pass
/// up to the cutoff yields `Unknown` with the certificate attached, and a
/// ratio-criterion refutation yields a certified `No`.
pub fn decide_isometric(
    p: &StochasticMatrix,
    q: &StochasticMatrix,
    cutoff: usize,
) -> Result<Verdict> {
    if p.dim() != q.dim() {
        return Ok(Verdict::no("state counts differ"));
    }
    let weighted = find_weighted_iso(p, q)?;
    if weighted.answer == Answer::Yes {
        return Ok(Verdict {
            reason: "weighted graph isomorphism found; it induces a unitary fiber-system \
                     isomorphism and hence an isometric isomorphism of the tensor algebras"
                .into(),
            ..weighted
        });
    }
    let both_essential = classify(p).essential && classify(q).essential;
    if both_essential {
        return Ok(Verdict::no(
            "finite essential pair: isometric isomorphism would force a weighted graph \
             isomorphism; the search exhausted all candidates",
        ));
    }
    let verdict = find_eq31_iso(p, q, cutoff)?;
    Ok(match verdict.answer {
        Answer::No => verdict,
        Answer::Yes => Verdict::unknown(
            verdict.certificate,
            format!(
                "ratio criterion holds up to total degree {cutoff}, which certifies a unitary \
                 fiber-system isomorphism only up to that degree; the pair is not essential, \
                 so no finite check decides all degrees"
            ),
        ),
        Answer::Unknown => verdict,
    })
}

/// Decides algebraic isomorphism of the tensor algebras of finite matrices.
///
/// A weighted isomorphism is always sufficient (isometric implies
/// algebraic). For essential pairs the question is exactly graph
/// isomorphism; otherwise absence of a graph isomorphism is a certified
/// `No` (any algebraic isomorphism induces a similarity of the fiber
/// systems, which forces graph isomorphism), and presence without a
/// weighted witness leaves the question open.
pub fn decide_algebraic(p: &StochasticMatrix, q: &StochasticMatrix) -> Result<Verdict> {
    if p.dim() != q.dim() {
        return Ok(Verdict::no("state counts differ"));
    }
    let both_essential = classify(p).essential && classify(q).essential;
    let verdict = find_graph_iso(p, q)?;
    Ok(match (both_essential, verdict.answer) {
        (true, Answer::Yes) => Verdict {
            reason: "finite essential pair: algebraic isomorphism of the tensor algebras is \
                     equivalent to graph isomorphism, and a witness was found"
                .into(),
            ..verdict
        },
        (true, _) => Verdict::no(
            "finite essential pair: algebraic isomorphism would force a graph isomorphism; \
             the search exhausted all candidates",
        ),
        (false, Answer::Yes) => {
            let weighted = find_weighted_iso(p, q)?;
            if weighted.answer == Answer::Yes {
                Verdict {
                    reason: "weighted graph isomorphism found; it induces an isometric and in \
                             particular an algebraic isomorphism of the tensor algebras"
                        .into(),
                    ..weighted
                }
            } else {
                Verdict::unknown(
                    verdict.certificate,
                    "graph isomorphism exists but the pair is not essential; a graph \
                     isomorphism yields a similarity only in the essential case, so the \
                     question stays open",
                )
            }
        }
        (false, _) => Verdict::no(
            "any algebraic isomorphism induces a similarity of the fiber systems, which \
             forces graph isomorphism; none exists",
        ),
    })
}

/// The closed-form degree-wise similarity family
/// `V_n(A) = (√Q^n)^♭ * [R_σ (√P^n * A) R_σ⁻¹]`, which on matrix units acts
/// as `E_ij ↦ √(P^n_ij / Q^n_{σi σj}) · E_{σi σj}`.
pub struct SimilarityFamily {
    sigma: Vec<usize>,
    cap: usize,
    dim: usize,
    p_powers: Vec<crate::RationalMat>,
    q_powers: Vec<crate::RationalMat>,
    q_supports: Vec<SupportSet>,
}

impl SimilarityFamily {
    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Exact scaling ratio `c_n(i,j) = P^n_ij / Q^n_{σi σj}` for
    /// `(i,j) ∈ E(P^n)`.
    pub fn ratio(&self, n: usize, i: usize, j: usize) -> Option<BigRational> {
        use num::traits::Zero;
        assert!(n >= 1 && n <= self.cap);
        let num = self.p_powers[n].get(i, j);
        if num.is_zero() {
            return None;
        }
        Some(num.clone() / self.q_powers[n].get(self.sigma[i], self.sigma[j]).clone())
    }

    /// Numeric scaling factor `√c_n(i,j)` applied to the unit `E_ij`.
    pub fn factor(&self, n: usize, i: usize, j: usize) -> Option<f64> {
        self.ratio(n, i, j).map(|r| rat_to_f64(&r).sqrt())
    }

    /// Applies `V_n` to a degree-`n` fiber of the source system, producing a
    /// fiber of the target system.
    pub fn apply(&self, fiber: &Fiber) -> Result<Fiber> {
        let n = fiber.degree();
        assert!(n >= 1 && n <= self.cap, "degree out of range");
        let entries = fiber.iter().map(|(&(i, j), &v)| {
            let f = self.factor(n, i, j).expect("fiber entries are on-support");
            ((self.sigma[i], self.sigma[j]), v * f)
        });
        Fiber::from_entries_with_support(&self.q_supports[n], self.dim, entries)
    }
}

/// Per-degree extremes of the similarity ratios.
#[derive(Clone, Debug)]
pub struct DegreeRatios {
    pub n: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Bound report accompanying a similarity family: per-degree ratio extremes
/// up to the cap, their sups, the exact limiting per-state ratio profile
/// `π^P_j / π^Q_{σj}` (block-wise stationary vectors), and the resulting
/// estimate of `sup_n max(‖V_n‖, ‖V_n⁻¹‖)`.
#[derive(Clone, Debug)]
pub struct SimilarityBound {
    pub per_degree: Vec<DegreeRatios>,
    pub sup_ratio: f64,
    pub sup_inv_ratio: f64,
    pub limit_profile: Vec<(usize, BigRational)>,
    pub family_bound: f64,
}

/// Builds the similarity family for a graph-isomorphic essential pair and
/// reports ratio bounds up to degree `cap`. The limiting profile certifies
/// that the per-degree ratios converge along admissible residues, so the
/// reported sup is an asymptotic bound and not a truncation artifact.
pub fn build_similarity(
    p: &StochasticMatrix,
    q: &StochasticMatrix,
    sigma: &[usize],
    cap: usize,
) -> Result<(SimilarityFamily, SimilarityBound)> {
    check_sizes(p, q)?;
    if !is_graph_iso(p, q, sigma) {
        return Err(Error::NotGraphIso);
    }
    let p_report = classify(p);
    let q_report = classify(q);
    if !p_report.essential || !q_report.essential {
        return Err(Error::NotEssential);
    }
    let mut pp = Powers::new(p);
    let mut qp = Powers::new(q);
    let p_powers: Vec<_> = (0..=cap).map(|n| pp.get(n).clone()).collect();
    let q_powers: Vec<_> = (0..=cap).map(|n| qp.get(n).clone()).collect();
    let q_supports: Vec<_> = (0..=cap)
        .map(|n| if n == 0 { SupportSet::identity(q.dim()) } else { SupportSet::from_mat(&q_powers[n], n) })
        .collect();
    let family = SimilarityFamily {
        sigma: sigma.to_vec(),
        cap,
        dim: p.dim(),
        p_powers,
        q_powers,
        q_supports,
    };

    let mut per_degree = Vec::with_capacity(cap);
    let mut sup_ratio = 0.0f64;
    let mut sup_inv = 0.0f64;
    for n in 1..=cap {
        let support = SupportSet::from_mat(&family.p_powers[n], n);
        let mut max_r = 0.0f64;
        let mut min_r = f64::INFINITY;
        for &(i, j) in &support.pairs {
            let r = rat_to_f64(&family.ratio(n, i, j).unwrap());
            max_r = max_r.max(r);
            min_r = min_r.min(r);
        }
        sup_ratio = sup_ratio.max(max_r);
        sup_inv = sup_inv.max(1.0 / min_r);
        per_degree.push(DegreeRatios { n, max_ratio: max_r, min_ratio: min_r });
    }

    // Exact limiting profile from the block-wise stationary distributions.
    let decomp = communicating_classes(p);
    let mut limit_profile = Vec::with_capacity(p.dim());
    let mut profile_by_state = vec![BigRational::from_integer(0.into()); p.dim()];
    for members in &decomp.classes {
        let p_block = restrict(p, members)?;
        let q_members: Vec<usize> = {
            let mut m: Vec<usize> = members.iter().map(|&v| sigma[v]).collect();
            m.sort_unstable();
            m
        };
        let q_block = restrict(q, &q_members)?;
        let p_pi = stationary(&p_block)?;
        let q_pi = stationary(&q_block)?;
        for (local, &v) in members.iter().enumerate() {
            let q_local = q_members.binary_search(&sigma[v]).expect("image in block");
            profile_by_state[v] = p_pi.weights[local].clone() / q_pi.weights[q_local].clone();
        }
    }
    for (v, ratio) in profile_by_state.into_iter().enumerate() {
        limit_profile.push((v, ratio));
    }

    let family_bound = sup_ratio.sqrt().max(sup_inv.sqrt());
    let bound = SimilarityBound { per_degree, sup_ratio, sup_inv_ratio: sup_inv, limit_profile, family_bound };
    Ok((family, bound))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::subproduct::umap;

    fn rq(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn graph_iso_identity_pair() {
        let p = fixtures::two_state();
        let v = find_graph_iso(&p, &p).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        let cert = v.certificate.unwrap();
        assert_eq!(cert.sigma, vec![0, 1]);
        assert!(cert.validate(&p, &p));
    }

    #[test]
    fn graph_iso_rejects_different_edge_counts() {
        let p = fixtures::cycle(2);
        let q = fixtures::identity(2);
        let v = find_graph_iso(&p, &q).unwrap();
        assert_eq!(v.answer, Answer::No);
    }

    #[test]
    fn graph_iso_finds_permuted_copy() {
        let p = StochasticMatrix::from_json_str(
            r#"{"rows":[["0","1","0"],["1/2","0","1/2"],["1","0","0"]]}"#,
        )
        .unwrap();
        let sigma = vec![2, 0, 1];
        let q = p.pushforward(&sigma);
        let v = find_graph_iso(&p, &q).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        assert!(v.certificate.unwrap().validate(&p, &q));
    }

    #[test]
    fn size_mismatch_is_an_error_for_searches() {
        let p = fixtures::cycle(2);
        let q = fixtures::cycle(3);
        assert!(matches!(find_graph_iso(&p, &q), Err(Error::SizeMismatch { .. })));
        assert!(matches!(find_weighted_iso(&p, &q), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn weighted_iso_distinguishes_rank_one_family() {
        let p = fixtures::rank_one_family(rq(1, 5));
        let q = fixtures::rank_one_family(rq(2, 5));
        let v = find_weighted_iso(&p, &q).unwrap();
        assert_eq!(v.answer, Answer::No);
        let v = find_weighted_iso(&p, &p).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        assert_eq!(v.certificate.unwrap().sigma, vec![0, 1]);
    }

    #[test]
    fn weighted_iso_finds_permuted_copy() {
        let p = fixtures::two_state();
        let sigma = vec![1, 0];
        let q = p.pushforward(&sigma);
        let v = find_weighted_iso(&p, &q).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        let cert = v.certificate.unwrap();
        assert!(is_weighted_iso(&p, &q, &cert.sigma));
    }

    #[test]
    fn eq31_iso_on_reducible_family() {
        let p = fixtures::reducible_family(rq(1, 5));
        let q = fixtures::reducible_family(rq(1, 3));
        let v = find_eq31_iso(&p, &q, 12).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        let cert = v.certificate.unwrap();
        assert_eq!(cert.mode, CertMode::Eq31 { cutoff: 12 });
        assert!(cert.validate(&p, &q));
    }

    #[test]
    fn eq31_iso_accepts_weighted_copy_and_rejects_violating_pair() {
        let p = fixtures::two_state();
        let q = p.pushforward(&[1, 0]);
        let v = find_eq31_iso(&p, &q, 6).unwrap();
        assert_eq!(v.answer, Answer::Yes);

        let q = StochasticMatrix::from_json_str(r#"{"rows":[["3/4","1/4"],["1/4","3/4"]]}"#)
            .unwrap();
        let v = find_eq31_iso(&p, &q, 6).unwrap();
        assert_eq!(v.answer, Answer::No);
        assert!(v.reason.contains("violates the ratio criterion"), "{}", v.reason);
    }

    #[test]
    fn isometric_decision_on_rank_one_family() {
        let p = fixtures::rank_one_family(rq(1, 5));
        let q = fixtures::rank_one_family(rq(2, 5));
        assert_eq!(decide_isometric(&p, &q, 12).unwrap().answer, Answer::No);
        assert_eq!(decide_isometric(&p, &p, 12).unwrap().answer, Answer::Yes);
    }

    #[test]
    fn isometric_decision_unknown_on_reducible_family() {
        let p = fixtures::reducible_family(rq(1, 5));
        let q = fixtures::reducible_family(rq(2, 5));
        let v = decide_isometric(&p, &q, 12).unwrap();
        assert_eq!(v.answer, Answer::Unknown);
        let cert = v.certificate.expect("leaning-yes certificate attached");
        assert_eq!(cert.mode, CertMode::Eq31 { cutoff: 12 });
    }

    #[test]
    fn decisions_are_reflexive_even_off_the_essential_case() {
        let p = fixtures::reducible_family(rq(1, 5));
        assert_eq!(decide_isometric(&p, &p, 12).unwrap().answer, Answer::Yes);
        assert_eq!(decide_algebraic(&p, &p).unwrap().answer, Answer::Yes);
    }

    #[test]
    fn algebraic_decision_examples() {
        let p = fixtures::rank_one_family(rq(1, 5));
        let q = fixtures::rank_one_family(rq(2, 5));
        assert_eq!(decide_algebraic(&p, &q).unwrap().answer, Answer::Yes);

        let v = decide_algebraic(&fixtures::cycle(2), &fixtures::cycle(3)).unwrap();
        assert_eq!(v.answer, Answer::No);

        let p = fixtures::reducible_family(rq(1, 5));
        let q = fixtures::reducible_family(rq(2, 5));
        assert_eq!(decide_algebraic(&p, &q).unwrap().answer, Answer::Unknown);
    }

    #[test]
    fn similarity_identity_pair_has_bound_one() {
        let p = fixtures::two_state();
        let (family, bound) = build_similarity(&p, &p, &[0, 1], 8).unwrap();
        for n in 1..=8 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(family.ratio(n, i, j).unwrap(), rq(1, 1));
                }
            }
        }
        assert!((bound.family_bound - 1.0).abs() < 1e-15);
    }

    #[test]
    fn similarity_on_permuted_copy_has_bound_one() {
        let p = fixtures::two_state();
        let sigma = vec![1, 0];
        let q = p.pushforward(&sigma);
        let (_, bound) = build_similarity(&p, &q, &sigma, 8).unwrap();
        assert!((bound.family_bound - 1.0).abs() < 1e-15);
        assert!(bound.limit_profile.iter().all(|(_, r)| r == &rq(1, 1)));
    }

    #[test]
    fn similarity_requires_graph_iso_and_essential() {
        let p = fixtures::two_state();
        let q = fixtures::cycle(2);
        assert!(matches!(build_similarity(&p, &q, &[0, 1], 4), Err(Error::NotGraphIso)));
        let r = fixtures::reducible_family(rq(1, 3));
        assert!(matches!(
            build_similarity(&r, &r, &[0, 1, 2], 4),
            Err(Error::NotEssential)
        ));
    }

    #[test]
    fn similarity_bound_dominates_applied_norms() {
        let p = fixtures::two_state();
        let q = StochasticMatrix::from_json_str(r#"{"rows":[["1/3","2/3"],["1/3","2/3"]]}"#)
            .unwrap();
        let (family, bound) = build_similarity(&p, &q, &[0, 1], 12).unwrap();
        for n in 1..=12usize {
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let a = crate::subproduct::fiber_unit(&p, n, i, j).unwrap();
                let image = family.apply(&a).unwrap();
                assert!(image.norm() <= bound.family_bound * a.norm() + 1e-12);
                // The bound is attained by some unit at some degree.
            }
        }
        let mut attained = 0.0f64;
        for n in 1..=12usize {
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                attained = attained.max(family.factor(n, i, j).unwrap());
            }
        }
        assert!((attained - bound.sup_ratio.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn similarity_intertwines_multiplication() {
        // Graph-isomorphic essential pair with different weights.
        let p = fixtures::two_state();
        let q = StochasticMatrix::from_json_str(r#"{"rows":[["1/3","2/3"],["1/3","2/3"]]}"#)
            .unwrap();
        let (family, bound) = build_similarity(&p, &q, &[0, 1], 10).unwrap();
        assert!(bound.family_bound.is_finite());
        for n in 1..=3usize {
            for m in 1..=3usize {
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            let a = crate::subproduct::fiber_unit(&p, n, i, j).unwrap();
                            let b = crate::subproduct::fiber_unit(&p, m, j, k).unwrap();
                            let lhs = family.apply(&umap(&p, n, m, &a, &b).unwrap()).unwrap();
                            let rhs = umap(
                                &q,
                                n,
                                m,
                                &family.apply(&a).unwrap(),
                                &family.apply(&b).unwrap(),
                            )
                            .unwrap();
                            assert!(lhs.max_abs_diff(&rhs) < 1e-9);
                        }
                    }
                }
            }
        }
    }
}
