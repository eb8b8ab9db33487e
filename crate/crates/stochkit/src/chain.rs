//! Finite Markov-chain structure theory: communicating classes, essential
//! states, periods, irreducible and cyclic decompositions, recurrence
//! classification, and exact stationary distributions.

use num::traits::Zero;
use num::{BigRational, One};

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;

/// Partition of the state set into communicating classes.
///
/// Classes are listed in topological order of the condensation, so for an
/// essential matrix `reordering` brings the matrix to exact block-diagonal
/// form with row-stochastic blocks (block-triangular otherwise).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecomposition {
    pub classes: Vec<Vec<usize>>,
    pub essential_flags: Vec<bool>,
    /// `reordering[new_index] = old_index`.
    pub reordering: Vec<usize>,
}

impl ClassDecomposition {
    pub fn class_of(&self, state: usize) -> usize {
        self.classes
            .iter()
            .position(|c| c.contains(&state))
            .expect("classes partition the state set")
    }

    pub fn all_essential(&self) -> bool {
        self.essential_flags.iter().all(|&e| e)
    }
}

/// Cyclic (residue-class) decomposition of an irreducible matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicDecomposition {
    pub period: usize,
    /// Residue classes `Ω_0, …, Ω_{r-1}`; the base state (lowest index)
    /// lies in `Ω_0` and every edge advances the residue by one mod `r`.
    pub residue_classes: Vec<Vec<usize>>,
    /// `reordering[new_index] = old_index`, grouping states by residue.
    pub reordering: Vec<usize>,
}

impl CyclicDecomposition {
    pub fn residue_of(&self, state: usize) -> usize {
        self.residue_classes
            .iter()
            .position(|c| c.contains(&state))
            .expect("residue classes partition the state set")
    }
}

/// Exact stationary distribution of an irreducible matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryDistribution {
    pub weights: Vec<BigRational>,
}

/// Per-class structure report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassReport {
    pub states: Vec<usize>,
    pub essential: bool,
    /// For finite matrices a class is recurrent iff it is essential.
    pub recurrent: bool,
    pub period: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainReport {
    pub essential: bool,
    pub classes: Vec<ClassReport>,
}

struct Tarjan<'a> {
    graph: &'a [Vec<usize>],
    index: usize,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    idx: Vec<Option<usize>>,
    low: Vec<usize>,
    comps: Vec<Vec<usize>>,
}

fn strongconnect(v: usize, st: &mut Tarjan<'_>) {
    st.idx[v] = Some(st.index);
    st.low[v] = st.index;
    st.index += 1;
    st.stack.push(v);
    st.on_stack[v] = true;
    for &w in &st.graph[v] {
        if st.idx[w].is_none() {
            strongconnect(w, st);
            st.low[v] = st.low[v].min(st.low[w]);
        } else if st.on_stack[w] {
            st.low[v] = st.low[v].min(st.idx[w].unwrap());
        }
    }
    if st.low[v] == st.idx[v].unwrap() {
        let mut comp = Vec::new();
        loop {
            let w = st.stack.pop().expect("stack underflow");
            st.on_stack[w] = false;
            comp.push(w);
            if w == v {
                break;
            }
        }
        comp.sort_unstable();
        st.comps.push(comp);
    }
}

/// Strongly-connected-component decomposition of the directed graph of `P`,
/// with essential flags (a class is essential iff no edge leaves it).
pub fn communicating_classes(p: &StochasticMatrix) -> ClassDecomposition {
    let graph = p.graph();
    let d = graph.len();
    let mut st = Tarjan {
        graph: &graph,
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; d],
        idx: vec![None; d],
        low: vec![0; d],
        comps: Vec::new(),
    };
    for v in 0..d {
        if st.idx[v].is_none() {
            strongconnect(v, &mut st);
        }
    }
    // Tarjan emits components sinks-first; reverse for topological order.
    let mut classes = st.comps;
    classes.reverse();

    let mut class_of = vec![0usize; d];
    for (c, members) in classes.iter().enumerate() {
        for &v in members {
            class_of[v] = c;
        }
    }
    let essential_flags = classes
        .iter()
        .enumerate()
        .map(|(c, members)| {
            members
                .iter()
                .all(|&v| graph[v].iter().all(|&w| class_of[w] == c))
        })
        .collect();
    let reordering = classes.iter().flatten().copied().collect();
    ClassDecomposition { classes, essential_flags, reordering }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// BFS levels from `root` restricted to the vertex set `members`.
fn bfs_levels(graph: &[Vec<usize>], members: &[usize], root: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; graph.len()];
    let in_set = {
        let mut f = vec![false; graph.len()];
        for &v in members {
            f[v] = true;
        }
        f
    };
    level[root] = Some(0);
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in &graph[v] {
            if in_set[w] && level[w].is_none() {
                level[w] = Some(level[v].unwrap() + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// Period of the communicating class of `i`: the gcd of all cycle lengths
/// through the class, computed from BFS level differences across the edges
/// inside the class. `None` when no cycle passes through `i`.
pub fn period(p: &StochasticMatrix, i: usize) -> Option<usize> {
    let graph = p.graph();
    let decomp = communicating_classes(p);
    let class = &decomp.classes[decomp.class_of(i)];
    let level = bfs_levels(&graph, class, class[0]);
    let mut g: u64 = 0;
    for &u in class {
        for &w in &graph[u] {
            if class.contains(&w) {
                let diff = level[u].unwrap() as i64 + 1 - level[w].unwrap() as i64;
                g = gcd(g, diff.unsigned_abs());
            }
        }
    }
    if g == 0 {
        None
    } else {
        Some(g as usize)
    }
}

fn check_irreducible(p: &StochasticMatrix) -> Result<ClassDecomposition> {
    let decomp = communicating_classes(p);
    if decomp.classes.len() != 1 {
        return Err(Error::NotIrreducible);
    }
    Ok(decomp)
}

/// Residue-class decomposition of an irreducible matrix. The base state is
/// the lowest index, canonically placed in `Ω_0`; residues are BFS path
/// lengths mod the period.
pub fn cyclic_decomposition(p: &StochasticMatrix) -> Result<CyclicDecomposition> {
    check_irreducible(p)?;
    let r = period(p, 0).expect("an irreducible finite matrix has a cycle");
    let graph = p.graph();
    let all: Vec<usize> = (0..p.dim()).collect();
    let level = bfs_levels(&graph, &all, 0);
    let mut residue_classes = vec![Vec::new(); r];
    for v in 0..p.dim() {
        let l = level[v].expect("irreducible: every state reachable");
        residue_classes[l % r].push(v);
    }
    let reordering = residue_classes.iter().flatten().copied().collect();
    Ok(CyclicDecomposition { period: r, residue_classes, reordering })
}

/// Essential/recurrent classification with per-class periods. For finite
/// matrices recurrence, positive recurrence and essentiality coincide
/// class-wise, so a single essential flag drives both fields.
pub fn classify(p: &StochasticMatrix) -> ChainReport {
    let decomp = communicating_classes(p);
    let classes = decomp
        .classes
        .iter()
        .zip(&decomp.essential_flags)
        .map(|(members, &essential)| ClassReport {
            states: members.clone(),
            essential,
            recurrent: essential,
            period: period(p, members[0]),
        })
        .collect();
    ChainReport { essential: decomp.all_essential(), classes }
}

/// Exact solve of a (possibly overdetermined) linear system by Gaussian
/// elimination over the rationals. Returns `None` unless the solution exists
/// and is unique.
fn solve_exact(
    mut rows: Vec<Vec<BigRational>>,
    mut rhs: Vec<BigRational>,
    ncols: usize,
) -> Option<Vec<BigRational>> {
    let nrows = rows.len();
    let mut pivot_row_of_col = vec![None; ncols];
    let mut used = vec![false; nrows];
    for col in 0..ncols {
        let pivot = (0..nrows).find(|&r| !used[r] && !rows[r][col].is_zero())?;
        used[pivot] = true;
        pivot_row_of_col[col] = Some(pivot);
        let pv = rows[pivot][col].clone();
        for r in 0..nrows {
            if r != pivot && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone() / pv.clone();
                for c in col..ncols {
                    let delta = factor.clone() * rows[pivot][c].clone();
                    rows[r][c] -= delta;
                }
                let delta = factor * rhs[pivot].clone();
                rhs[r] -= delta;
            }
        }
    }
    // Consistency of the remaining rows.
    for r in 0..nrows {
        if !used[r] && !rhs[r].is_zero() {
            return None;
        }
    }
    let mut x = vec![BigRational::zero(); ncols];
    for col in 0..ncols {
        let r = pivot_row_of_col[col]?;
        x[col] = rhs[r].clone() / rows[r][col].clone();
    }
    Some(x)
}

/// Exact stationary distribution `π P = π`, `Σ π = 1` of an irreducible
/// matrix, by exact Gaussian elimination.
pub fn stationary(p: &StochasticMatrix) -> Result<StationaryDistribution> {
    check_irreducible(p)?;
    let d = p.dim();
    // Rows: (P^T - I) x = 0 stacked with the normalization row Σ x = 1.
    let mut rows = Vec::with_capacity(d + 1);
    for j in 0..d {
        let mut row = Vec::with_capacity(d);
        for i in 0..d {
            let mut v = p.entry(i, j).clone();
            if i == j {
                v -= BigRational::one();
            }
            row.push(v);
        }
        rows.push(row);
    }
    rows.push(vec![BigRational::one(); d]);
    let mut rhs = vec![BigRational::zero(); d];
    rhs.push(BigRational::one());
    let weights = solve_exact(rows, rhs, d).ok_or(Error::NotIrreducible)?;
    debug_assert!(weights.iter().all(|w| w > &BigRational::zero()));
    Ok(StationaryDistribution { weights })
}

/// Restriction of a matrix to one communicating class; the rows of the
/// block sum to 1 exactly iff the class is essential.
pub fn restrict(p: &StochasticMatrix, members: &[usize]) -> Result<StochasticMatrix> {
    let rows = members
        .iter()
        .map(|&i| members.iter().map(|&j| p.entry(i, j).clone()).collect())
        .collect();
    let labels = members.iter().map(|&i| p.states()[i].clone()).collect();
    StochasticMatrix::from_rows(labels, rows)
}

/// Limit data of `P^(n)` along the admissible residue: the unique residue
/// `ℓ` with `P^(n)_{ij} > 0 ⟹ n ≡ ℓ (mod r)`, and the exact limit `π_j · r`
/// of `P^(mr+ℓ)_{ij}`.
pub fn limit_profile(
    p: &StochasticMatrix,
    i: usize,
    j: usize,
) -> Result<(usize, BigRational)> {
    let cyc = cyclic_decomposition(p)?;
    let pi = stationary(p)?;
    let r = cyc.period;
    let residue = (cyc.residue_of(j) + r - cyc.residue_of(i)) % r;
    let limit = pi.weights[j].clone() * BigRational::from_integer(r.into());
    Ok((residue, limit))
}
