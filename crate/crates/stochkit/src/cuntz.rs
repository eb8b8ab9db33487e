//! The complete isomorphism invariant of the quotient operator algebra of a
//! finite essential matrix: the quotient is isomorphic to
//! `C(T; M_{d_1} ⊕ … ⊕ M_{d_ℓ})` where `d_1 ≤ … ≤ d_ℓ` are the irreducible
//! block sizes, so two such algebras are isomorphic iff the sorted size
//! lists agree. Periods refine the block description (the quotient of an
//! irreducible `r`-periodic block is spatially a cyclic crossed product)
//! but do not change the algebra.

use crate::chain::{classify, communicating_classes, cyclic_decomposition, restrict};
use crate::error::{Error, Result};
use crate::iso::{Answer, Verdict};
use crate::matrix::StochasticMatrix;

/// Per-block refinement data of the invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockData {
    pub size: usize,
    pub period: usize,
    /// Common residue-class size `d/r` when the cyclic decomposition of the
    /// block has equal-sized classes; `None` otherwise (periodic blocks may
    /// have unequal residue classes, e.g. one hub feeding two satellites).
    pub q: Option<usize>,
}

/// Sorted irreducible block sizes with per-block cyclic data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuntzInvariant {
    /// `d_1 ≤ … ≤ d_ℓ`.
    pub block_sizes: Vec<usize>,
    /// Aligned with `block_sizes`.
    pub blocks: Vec<BlockData>,
}

/// Computes the invariant of a finite essential matrix: the irreducible
/// decomposition reduced to its sorted size list, with per-block periods.
pub fn cuntz_invariant(p: &StochasticMatrix) -> Result<CuntzInvariant> {
    let report = classify(p);
    if !report.essential {
        return Err(Error::NotEssential);
    }
    let decomp = communicating_classes(p);
    let mut blocks: Vec<BlockData> = Vec::with_capacity(decomp.classes.len());
    for members in &decomp.classes {
        let block = restrict(p, members)?;
        let cyc = cyclic_decomposition(&block)?;
        let size = members.len();
        let class_sizes: Vec<usize> = cyc.residue_classes.iter().map(Vec::len).collect();
        let equal = class_sizes.windows(2).all(|w| w[0] == w[1]);
        blocks.push(BlockData {
            size,
            period: cyc.period,
            q: if equal { Some(size / cyc.period) } else { None },
        });
    }
    blocks.sort_by_key(|b| (b.size, b.period));
    let block_sizes = blocks.iter().map(|b| b.size).collect();
    Ok(CuntzInvariant { block_sizes, blocks })
}

/// Exact decision: the quotient algebras are isomorphic iff the sorted
/// block-size lists coincide. Never `Unknown`. The equality of the
/// invariants is itself the witness, so no permutation certificate is
/// attached.
pub fn decide_cuntz_iso(p: &StochasticMatrix, q: &StochasticMatrix) -> Result<Verdict> {
    let ip = cuntz_invariant(p)?;
    let iq = cuntz_invariant(q)?;
    let equal = ip.block_sizes == iq.block_sizes;
    Ok(Verdict {
        answer: if equal { Answer::Yes } else { Answer::No },
        certificate: None,
        reason: format!(
            "sorted irreducible block sizes {:?} vs {:?} {}",
            ip.block_sizes,
            iq.block_sizes,
            if equal { "coincide (complete invariant)" } else { "differ" }
        ),
    })
}

/// Human-readable presentation `C(T; M_{d_1} ⊕ … ⊕ M_{d_ℓ})`, with `M_1`
/// written as the scalars and the per-block cyclic data appended as a note.
pub fn presentation(p: &StochasticMatrix) -> Result<String> {
    let inv = cuntz_invariant(p)?;
    let summands: Vec<String> = inv
        .block_sizes
        .iter()
        .map(|&d| if d == 1 { "C".to_string() } else { format!("M_{d}") })
        .collect();
    let notes: Vec<String> = inv
        .blocks
        .iter()
        .map(|b| match b.q {
            Some(q) => format!("r={}, q={}", b.period, q),
            None => format!("r={}", b.period),
        })
        .collect();
    Ok(format!("C(T; {}) [{}]", summands.join(" ⊕ "), notes.join("; ")))
}
