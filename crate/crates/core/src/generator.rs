//! Uniform random binary CSPs with an exact number of constraints and an
//! exact number of forbidden tuples per constraint.
//!
//! Sampling is without replacement at both levels: `m` distinct variable
//! pairs out of `n(n-1)/2`, then `round(t·d²)` distinct forbidden tuples out
//! of the `d²` domain product for each chosen pair. Rounding is half-up.
//!
//! # Seeds
//!
//! Instances are generated from a ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`; bounded draws use rejection sampling on
//! raw `u64` output, so the stream-to-instance mapping does not depend on the
//! `rand` distribution code. Suites derive one child seed per grid point and
//! replica:
//!
//! ```text
//! child = splitmix64(master ^ splitmix64((point << 32) | replica))
//! ```
//!
//! where `splitmix64` is the standard finalizer (see [`splitmix64`]). This
//! formula is part of the stable interface.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{CspInstance, Domain, Relation};

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("domain size must be at least 1")]
    EmptyDomain,
    #[error("{m} constraints requested but only {max} distinct pairs exist over {n} variables")]
    TooManyConstraints { n: usize, m: usize, max: usize },
    #[error("tightness {0} outside [0, 1]")]
    Tightness(f64),
    #[error("the grid is empty")]
    EmptyGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrbParams {
    pub n_vars: usize,
    pub domain_size: usize,
    pub n_constraints: usize,
    pub tightness: f64,
    pub seed: u64,
}

impl UrbParams {
    pub fn new(n_vars: usize, domain_size: usize, n_constraints: usize, tightness: f64, seed: u64) -> UrbParams {
        UrbParams { n_vars, domain_size, n_constraints, tightness, seed }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.domain_size == 0 {
            return Err(GeneratorError::EmptyDomain);
        }
        let max = self.n_vars * self.n_vars.saturating_sub(1) / 2;
        if self.n_constraints > max {
            return Err(GeneratorError::TooManyConstraints { n: self.n_vars, m: self.n_constraints, max });
        }
        if !(0.0..=1.0).contains(&self.tightness) {
            return Err(GeneratorError::Tightness(self.tightness));
        }
        Ok(())
    }

    /// Number of forbidden tuples per constraint: `round(t·d²)`, half-up.
    pub fn forbidden_per_constraint(&self) -> usize {
        let d2 = (self.domain_size * self.domain_size) as f64;
        ((self.tightness * d2 + 0.5).floor() as usize).min(self.domain_size * self.domain_size)
    }

    pub fn label(&self) -> String {
        format!(
            "urb-n{}-d{}-m{}-t{:.4}-s{}",
            self.n_vars, self.domain_size, self.n_constraints, self.tightness, self.seed
        )
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica` at grid point `point`.
pub fn derive_seed(master: u64, point: usize, replica: usize) -> u64 {
    splitmix64(master ^ splitmix64(((point as u64) << 32) | replica as u64))
}

/// Uniform integer in `0..bound` by rejection.
fn below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let r = rng.next_u64();
        if r < zone {
            return r % bound;
        }
    }
}

/// First `k` entries of a partial Fisher-Yates shuffle of `0..n`.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + below(rng, (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

pub fn generate_urb(params: &UrbParams) -> Result<CspInstance, GeneratorError> {
    params.validate()?;
    let UrbParams { n_vars: n, domain_size: d, n_constraints: m, .. } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut inst = CspInstance::with_variables((0..n).map(|i| (format!("V{i}"), Domain::range(1, d as i64))));
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut chosen: Vec<(usize, usize)> =
        sample_indices(&mut rng, pairs.len(), m).into_iter().map(|i| pairs[i]).collect();
    chosen.sort_unstable();

    let k = params.forbidden_per_constraint();
    for (x, y) in chosen {
        let tuples = sample_indices(&mut rng, d * d, k)
            .into_iter()
            .map(|idx| ((idx / d) as i64 + 1, (idx % d) as i64 + 1))
            .collect();
        inst.add_constraint(x, y, Relation::Forbidden(tuples));
    }

    inst.meta.name = params.label();
    let tags = &mut inst.meta.tags;
    tags.insert("generator".into(), "urb".into());
    tags.insert("n".into(), n.to_string());
    tags.insert("d".into(), d.to_string());
    tags.insert("m".into(), m.to_string());
    tags.insert("t".into(), params.tightness.to_string());
    tags.insert("seed".into(), params.seed.to_string());
    Ok(inst)
}

#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub point: usize,
    pub replica: usize,
    pub params: UrbParams,
    pub instance: CspInstance,
}

/// `replicas` instances per grid point, seeded by [`derive_seed`]. The `seed`
/// field of the grid points is ignored.
pub fn generate_suite(
    grid: &[UrbParams],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<SuiteEntry>, GeneratorError> {
    if grid.is_empty() {
        return Err(GeneratorError::EmptyGrid);
    }
    let mut out = Vec::with_capacity(grid.len() * replicas);
    for (point, base) in grid.iter().enumerate() {
        for replica in 0..replicas {
            let params = UrbParams { seed: derive_seed(master_seed, point, replica), ..*base };
            out.push(SuiteEntry { point, replica, params, instance: generate_urb(&params)? });
        }
    }
    Ok(out)
}

/// Grid points sweeping tightness at fixed `(n, d, m)`.
pub fn tightness_grid(n_vars: usize, domain_size: usize, n_constraints: usize, tightness: &[f64]) -> Vec<UrbParams> {
    tightness.iter().map(|&t| UrbParams::new(n_vars, domain_size, n_constraints, t, 0)).collect()
}

/// `start, start+step, ...` up to and including `end` (within rounding).
pub fn linspace_step(start: f64, end: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0);
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| ((start + step * i as f64) * 1e9).round() / 1e9).collect()
}
