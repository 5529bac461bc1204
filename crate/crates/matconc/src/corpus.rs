//! Seeded random instance generators shared by tests, examples, and the CLI
//! fuzz suites.
//!
//! Everything here is deterministic in the seed: the same seed always yields
//! the same instance, independent of thread count or platform. Scales are
//! kept bounded (rates in `[0.2, 1.4]`, matrix norms a few units) so that
//! downstream exponentials stay far from overflow and tolerances can be fixed
//! crate-wide.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{FiniteMeasure, Generator, MatrixFunction, StateSpace};
use crate::error::Result;
use crate::matcore::{random_hermitian, HermitianMatrix};

/// Derives a stream seed from a master seed and a stream index.
///
/// Uses a splitmix64-style mix so that consecutive indices yield unrelated
/// streams; used to shard work (Monte Carlo chunks, fuzz trials) without
/// sharing RNG state across threads.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A strictly positive probability vector with entries bounded away from zero
/// (every weight ≥ `floor / (n·(1 + floor))` before normalization noise).
pub fn random_probability_vector(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// A random irreducible chain reversible w.r.t. a random fully supported
/// measure, returned tagged.
///
/// Construction: draw `μ > 0` and a symmetric weight matrix `W` with entries
/// in `[0.2, 1.2]`, then set `Q(x,y) = W(x,y)/μ(x)` off-diagonal. Detailed
/// balance `μ(x)Q(x,y) = W(x,y) = μ(y)Q(y,x)` holds by construction, and all
/// off-diagonal rates are strictly positive, so the chain is irreducible.
pub fn random_reversible_chain(n: usize, seed: u64) -> Result<(Generator, FiniteMeasure)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = StateSpace::indexed(n)?;
    let mu = FiniteMeasure::new(space.clone(), random_probability_vector(&mut rng, n, 0.15))?;
    let mut rates = nalgebra::DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in (x + 1)..n {
            let w = 0.2 + rng.random::<f64>();
            rates[(x, y)] = w / mu.weight(x);
            rates[(y, x)] = w / mu.weight(y);
        }
    }
    for x in 0..n {
        let off: f64 = (0..n).filter(|&y| y != x).map(|y| rates[(x, y)]).sum();
        rates[(x, x)] = -off;
    }
    let q = Generator::reversible(space, rates, mu.clone())?;
    Ok((q, mu))
}

/// A random Hermitian-valued function on `space` with `‖f(x)‖` of order
/// `scale`; per-state matrices are independent given the seed.
pub fn random_matrix_function(space: &StateSpace, d: usize, scale: f64, seed: u64) -> MatrixFunction {
    let values: Vec<HermitianMatrix> = (0..space.size())
        .map(|x| random_hermitian(d, scale, derive_seed(seed, x as u64)))
        .collect();
    MatrixFunction::new(space.clone(), values).expect("dimensions are uniform by construction")
}

/// A random matrix polynomial in `n` variables of total degree ≤ `deg` with
/// Hermitian `d×d` coefficients of magnitude about `scale`.
///
/// Every monomial of total degree ≤ `deg` receives an independent coefficient
/// with probability ½, so degrees and sparsity both vary with the seed; the
/// polynomial is never identically zero (the constant term is always kept).
pub fn random_polynomial(
    n: usize,
    deg: u32,
    d: usize,
    scale: f64,
    seed: u64,
) -> crate::gaussian::MatrixPolynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exponents: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..n {
        exponents = exponents
            .into_iter()
            .flat_map(|e| {
                (0..=deg).filter_map(move |k| {
                    let total: u32 = e.iter().sum::<u32>() + k;
                    (total <= deg).then(|| {
                        let mut e2 = e.clone();
                        e2.push(k);
                        e2
                    })
                })
            })
            .collect();
    }
    let mut term_seed = 0u64;
    let terms: Vec<(Vec<u32>, HermitianMatrix)> = exponents
        .into_iter()
        .filter_map(|e| {
            let keep = e.iter().all(|&k| k == 0) || rng.random::<f64>() < 0.5;
            keep.then(|| {
                term_seed += 1;
                (e, random_hermitian(d, scale, derive_seed(seed, 10_000 + term_seed)))
            })
        })
        .collect();
    crate::gaussian::MatrixPolynomial::new(n, d, terms)
        .expect("exponent lengths and dimensions are consistent by construction")
}

/// A random SCP-satisfying `k`-homogeneous cube measure: a conditioned
/// Bernoulli with success probabilities drawn from `[0.2, 0.8]`.
///
/// Conditioned Bernoulli measures always satisfy the stochastic covering
/// property, so these instances are safe inputs for generator construction;
/// use hand-crafted supports to exercise the violation paths.
pub fn random_scp_measure(n: usize, k: usize, seed: u64) -> Result<crate::scp::CubeMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
    crate::scp::builtin_measure(
        crate::scp::CubeMeasureFamily::ConditionedBernoulli,
        n,
        k,
        Some(&p),
    )
}

/// A random 1-Lipschitz (in Hamming distance, operator norm) function on the
/// support of a cube measure: `f(x) = Σ_{i ∈ x} A_i` with `‖A_i‖ ≤ 1`.
pub fn random_lipschitz_cube_function(
    mu: &crate::scp::CubeMeasure,
    d: usize,
    seed: u64,
) -> MatrixFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<HermitianMatrix> = (0..mu.n())
        .map(|i| {
            let raw = random_hermitian(d, 1.0, derive_seed(seed, i as u64));
            let norm = raw.op_norm().max(1e-12);
            raw.scale(rng.random_range(0.3..1.0) / norm)
        })
        .collect();
    let values: Vec<HermitianMatrix> = mu
        .support()
        .map(|(mask, _)| {
            let mut acc = HermitianMatrix::zeros(d);
            for (i, a) in coords.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    acc = &acc + a;
                }
            }
            acc
        })
        .collect();
    MatrixFunction::new(mu.state_space(), values)
        .expect("one value per support configuration by construction")
}

/// A random product space with `n` fully supported factors of 2 to
/// `max_factor_size` states each.
pub fn random_product_space(
    n: usize,
    max_factor_size: usize,
    seed: u64,
) -> Result<crate::product::ProductSpace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = (0..n)
        .map(|_| {
            let size = rng.random_range(2..=max_factor_size.max(2));
            let space = StateSpace::indexed(size)?;
            FiniteMeasure::new(space, random_probability_vector(&mut rng, size, 0.2))
        })
        .collect::<Result<Vec<_>>>()?;
    crate::product::ProductSpace::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_deterministic_and_spread_out() {
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
        // Consecutive indices should not collide for any master seed we use.
        let seeds: std::collections::BTreeSet<u64> =
            (0..1000).map(|i| derive_seed(123, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn random_chain_is_tagged_and_irreducible() {
        let (q, mu) = random_reversible_chain(5, 99).unwrap();
        assert!(q.stationary().is_some());
        assert!(mu.is_fully_supported());
        for x in 0..5 {
            for y in 0..5 {
                if x != y {
                    assert!(q.rate(x, y) > 0.0);
                }
            }
        }
        // Determinism.
        let (q2, mu2) = random_reversible_chain(5, 99).unwrap();
        assert_eq!(q.rates(), q2.rates());
        assert_eq!(mu.weights(), mu2.weights());
    }
}
