//! Ready-made example matrices used throughout the docs and tests.

use num::{BigRational, One, Zero};

use crate::matrix::StochasticMatrix;

fn labels(d: usize) -> Vec<String> {
    (0..d).map(|i| i.to_string()).collect()
}

/// `d`-state identity matrix.
pub fn identity(d: usize) -> StochasticMatrix {
    let rows = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    StochasticMatrix::from_rows(labels(d), rows).unwrap()
}

/// Cyclic permutation matrix `0 → 1 → … → d-1 → 0`.
pub fn cycle(d: usize) -> StochasticMatrix {
    let rows = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if j == (i + 1) % d {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    StochasticMatrix::from_rows(labels(d), rows).unwrap()
}

/// `[[1/2,1/2],[1/4,3/4]]`: irreducible, aperiodic, stationary `(1/3, 2/3)`.
pub fn two_state() -> StochasticMatrix {
    StochasticMatrix::from_json_str(r#"{"rows":[["1/2","1/2"],["1/4","3/4"]]}"#).unwrap()
}

/// The reducible one-parameter family
/// `[[0, r, 1-r], [0, 1, 0], [0, 0, 1]]` for `r ∈ (0,1)`: state 0 is
/// inessential, states 1 and 2 are absorbing, and `P(r)^n = P(r)` for all
/// `n ≥ 1`.
pub fn reducible_family(r: BigRational) -> StochasticMatrix {
    let one = BigRational::one();
    let zero = BigRational::zero();
    let rows = vec![
        vec![zero.clone(), r.clone(), one.clone() - r],
        vec![zero.clone(), one.clone(), zero.clone()],
        vec![zero.clone(), zero, one],
    ];
    StochasticMatrix::from_rows(labels(3), rows).unwrap()
}

/// The rank-one family `[[r, 1-r], [r, 1-r]]` for `r ∈ (0,1)`: irreducible
/// and aperiodic, with both rows equal to the stationary distribution.
pub fn rank_one_family(r: BigRational) -> StochasticMatrix {
    let one = BigRational::one();
    let rows = vec![
        vec![r.clone(), one.clone() - r.clone()],
        vec![r.clone(), one - r],
    ];
    StochasticMatrix::from_rows(labels(2), rows).unwrap()
}

/// Block-diagonal matrix assembled from irreducible pieces.
pub fn block_diagonal(blocks: &[StochasticMatrix]) -> StochasticMatrix {
    let d: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut rows = vec![vec![BigRational::zero(); d]; d];
    let mut offset = 0;
    for b in blocks {
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                rows[offset + i][offset + j] = b.entry(i, j).clone();
            }
        }
        offset += b.dim();
    }
    StochasticMatrix::from_rows(labels(d), rows).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reducible_family_is_idempotent() {
        let r = BigRational::new(1.into(), 3.into());
        let p = reducible_family(r);
        assert_eq!(p.power(5).entries(), p.entries());
    }
}
