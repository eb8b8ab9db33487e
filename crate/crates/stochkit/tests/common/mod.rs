//! Seeded random generators shared by the integration suites.

use num::complex::Complex64;
use num::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochkit::fock::{FockVector, TruncatedFock};
use stochkit::subproduct::Fiber;
use stochkit::{fixtures, StochasticMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn labels(d: usize) -> Vec<String> {
    (0..d).map(|i| i.to_string()).collect()
}

/// Exact random row-stochastic matrix: small integer weights normalized by
/// the exact row sum.
pub fn random_stochastic(rng: &mut ChaCha8Rng, d: usize) -> StochasticMatrix {
    let rows = (0..d)
        .map(|_| {
            let mut w: Vec<u32> = (0..d).map(|_| rng.gen_range(0..5)).collect();
            if w.iter().all(|&x| x == 0) {
                w[rng.gen_range(0..d)] = 1;
            }
            let sum: u32 = w.iter().sum();
            w.into_iter()
                .map(|x| BigRational::new(x.into(), sum.into()))
                .collect()
        })
        .collect();
    StochasticMatrix::from_rows(labels(d), rows).expect("normalized rows are stochastic")
}

/// Random irreducible matrix: a spanning cycle is forced into the support.
pub fn random_irreducible(rng: &mut ChaCha8Rng, d: usize) -> StochasticMatrix {
    let rows = (0..d)
        .map(|i| {
            let mut w: Vec<u32> = (0..d).map(|_| rng.gen_range(0..4)).collect();
            w[(i + 1) % d] += 1;
            let sum: u32 = w.iter().sum();
            w.into_iter()
                .map(|x| BigRational::new(x.into(), sum.into()))
                .collect()
        })
        .collect();
    StochasticMatrix::from_rows(labels(d), rows).expect("normalized rows are stochastic")
}

pub fn random_permutation(rng: &mut ChaCha8Rng, d: usize) -> Vec<usize> {
    let mut sigma: Vec<usize> = (0..d).collect();
    sigma.shuffle(rng);
    sigma
}

/// Random essential matrix with the given irreducible block sizes, hidden
/// behind a random relabeling. Returns the matrix and the permutation.
pub fn random_essential(
    rng: &mut ChaCha8Rng,
    block_sizes: &[usize],
) -> (StochasticMatrix, Vec<usize>) {
    let blocks: Vec<StochasticMatrix> = block_sizes
        .iter()
        .map(|&s| random_irreducible(rng, s))
        .collect();
    let diag = fixtures::block_diagonal(&blocks);
    let sigma = random_permutation(rng, diag.dim());
    (diag.pushforward(&sigma), sigma)
}

/// Random fiber supported on `E(P^n)` with complex entries in the unit box.
pub fn random_fiber(rng: &mut ChaCha8Rng, p: &StochasticMatrix, n: usize) -> Fiber {
    let support = if n == 0 {
        stochkit::SupportSet::identity(p.dim())
    } else {
        p.support(n)
    };
    let mut entries: Vec<((usize, usize), Complex64)> = Vec::new();
    for &(i, j) in &support.pairs {
        if rng.gen_bool(0.8) {
            entries.push((
                (i, j),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ));
        }
    }
    Fiber::from_entries(p, n, entries).expect("entries drawn from the support")
}

/// Random Fock vector with a few populated fibers.
pub fn random_fock_vector(rng: &mut ChaCha8Rng, f: &TruncatedFock) -> FockVector {
    let mut v = FockVector::zero(f);
    for n in 0..=f.cap() {
        if rng.gen_bool(0.5) {
            v.fibers[n] = random_fiber(rng, f.matrix(), n);
        }
    }
    v
}
