//! The two-mode data law and the sparse binary latent law, as samplers and
//! as exact finite outcome tables.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::{self, add, dot, gaussian_vec, norm, scaled, RngStream};

/// How the two modes enter the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataVariant {
    /// `X ∈ {u1, u2}` with `<u1, u2> = γ`.
    CorrelatedModes,
    /// Orthogonal modes, `X = s1 u1 + s2 u2` with `Pr[s1 = s2 = 1] = γ`.
    CorrelatedCoefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDistribution {
    u1: Vec<f64>,
    u2: Vec<f64>,
    gamma: f64,
    variant: DataVariant,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&gamma) {
        return Err(LabError::Config(format!(
            "gamma must lie in [0, 1/2], got {gamma}"
        )));
    }
    Ok(())
}

impl DataDistribution {
    /// Validates the unit-norm and inner-product invariants of `variant`.
    pub fn new(u1: Vec<f64>, u2: Vec<f64>, gamma: f64, variant: DataVariant) -> Result<Self> {
        check_gamma(gamma)?;
        if u1.len() != u2.len() {
            return Err(LabError::DimensionMismatch {
                expected: u1.len(),
                found: u2.len(),
            });
        }
        if u1.len() < 2 {
            return Err(LabError::Config("dimension must be at least 2".into()));
        }
        for u in [&u1, &u2] {
            if (norm(u) - 1.0).abs() > 1e-12 {
                return Err(LabError::Config("modes must have unit norm".into()));
            }
        }
        let target = match variant {
            DataVariant::CorrelatedModes => gamma,
            DataVariant::CorrelatedCoefficients => 0.0,
        };
        if (dot(&u1, &u2) - target).abs() > 1e-12 {
            return Err(LabError::Config(format!(
                "mode inner product must be {target}, got {}",
                dot(&u1, &u2)
            )));
        }
        Ok(Self {
            u1,
            u2,
            gamma,
            variant,
        })
    }

    /// Draws modes with [`make_modes`] and wraps them.
    pub fn random(d: usize, gamma: f64, variant: DataVariant, rng: &mut RngStream) -> Result<Self> {
        let (u1, u2) = make_modes(d, gamma, variant, rng)?;
        Self::new(u1, u2, gamma, variant)
    }

    pub fn u1(&self) -> &[f64] {
        &self.u1
    }

    pub fn u2(&self) -> &[f64] {
        &self.u2
    }

    pub fn modes(&self) -> [&[f64]; 2] {
        [&self.u1, &self.u2]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn variant(&self) -> DataVariant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.u1.len()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        sample_data(self, rng)
    }

    pub fn enumerate(&self) -> OutcomeTable<Vec<f64>> {
        enumerate_data(self)
    }
}

/// Two unit vectors with inner product `γ` (CorrelatedModes) or `0`
/// (CorrelatedCoefficients), in a seeded random orientation.
pub fn make_modes(
    d: usize,
    gamma: f64,
    variant: DataVariant,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if d < 2 {
        return Err(LabError::Config("dimension must be at least 2".into()));
    }
    check_gamma(gamma)?;
    let inner = match variant {
        DataVariant::CorrelatedModes => gamma,
        DataVariant::CorrelatedCoefficients => 0.0,
    };

    // A Gaussian frame is a uniformly random rotation of (e1, e2).
    let g1 = gaussian_vec(rng, d, 1.0)?;
    let u1 = scaled(1.0 / norm(&g1), &g1);
    let mut perp = gaussian_vec(rng, d, 1.0)?;
    // two Gram-Schmidt passes for orthogonality to machine precision
    for _ in 0..2 {
        let c = dot(&perp, &u1);
        numerics::axpy(-c, &u1, &mut perp);
    }
    let perp = scaled(1.0 / norm(&perp), &perp);
    let mut u2 = add(
        &scaled(inner, &u1),
        &scaled((1.0 - inner * inner).sqrt(), &perp),
    );
    let n2 = norm(&u2);
    u2.iter_mut().for_each(|x| *x /= n2);
    Ok((u1, u2))
}

/// One draw from `p_data`.
///
/// CorrelatedCoefficients uses the coupling
/// `{both: γ, only u1: ½−γ, only u2: ½−γ, neither: γ}`.
pub fn sample_data(dist: &DataDistribution, rng: &mut RngStream) -> Vec<f64> {
    let r = rng.uniform();
    match dist.variant {
        DataVariant::CorrelatedModes => {
            if r < 0.5 {
                dist.u1.clone()
            } else {
                dist.u2.clone()
            }
        }
        DataVariant::CorrelatedCoefficients => {
            let g = dist.gamma;
            let (s1, s2) = if r < g {
                (true, true)
            } else if r < 0.5 {
                (true, false)
            } else if r < 1.0 - g {
                (false, true)
            } else {
                (false, false)
            };
            let mut x = vec![0.0; dist.dim()];
            if s1 {
                numerics::axpy(1.0, &dist.u1, &mut x);
            }
            if s2 {
                numerics::axpy(1.0, &dist.u2, &mut x);
            }
            x
        }
    }
}

/// Exact support of `p_data` (at most four rows, zero-probability rows dropped).
pub fn enumerate_data(dist: &DataDistribution) -> OutcomeTable<Vec<f64>> {
    let rows = match dist.variant {
        DataVariant::CorrelatedModes => {
            vec![(dist.u1.clone(), 0.5), (dist.u2.clone(), 0.5)]
        }
        DataVariant::CorrelatedCoefficients => {
            let g = dist.gamma;
            vec![
                (dist.u1.clone(), 0.5 - g),
                (dist.u2.clone(), 0.5 - g),
                (add(&dist.u1, &dist.u2), g),
                (vec![0.0; dist.dim()], g),
            ]
        }
    };
    OutcomeTable::from_rows(rows.into_iter().filter(|(_, p)| *p > 0.0).collect())
        .expect("data table probabilities are valid by construction")
}

/// Sparse binary latent vector `z ∈ {0,1}^m` stored as its sorted support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Latent {
    dim: usize,
    ones: Vec<usize>,
}

impl Latent {
    pub fn new(dim: usize, mut ones: Vec<usize>) -> Result<Self> {
        ones.sort_unstable();
        ones.dedup();
        if ones.is_empty() {
            return Err(LabError::Domain("latent must have non-zero support".into()));
        }
        if let Some(&bad) = ones.iter().find(|&&i| i >= dim) {
            return Err(LabError::DimensionMismatch {
                expected: dim,
                found: bad + 1,
            });
        }
        Ok(Self { dim, ones })
    }

    pub fn one_hot(dim: usize, i: usize) -> Result<Self> {
        Self::new(dim, vec![i])
    }

    /// Parses a dense 0/1 vector.
    pub fn from_dense(z: &[f64]) -> Result<Self> {
        let mut ones = Vec::new();
        for (i, &v) in z.iter().enumerate() {
            if v == 1.0 {
                ones.push(i);
            } else if v != 0.0 {
                return Err(LabError::Domain(format!(
                    "latent entry {i} is {v}, not binary"
                )));
            }
        }
        Self::new(z.len(), ones)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ones(&self) -> &[usize] {
        &self.ones
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.ones.binary_search(&j).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        for &i in &self.ones {
            z[i] = 1.0;
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentDistribution {
    m_g: usize,
    p_pair: f64,
}

impl LatentDistribution {
    pub const MAX_P_PAIR: f64 = 0.1;

    pub fn new(m_g: usize, p_pair: f64) -> Result<Self> {
        if m_g == 0 {
            return Err(LabError::Config("m_G must be at least 1".into()));
        }
        if !(0.0..=Self::MAX_P_PAIR).contains(&p_pair) {
            return Err(LabError::Config(format!(
                "p_pair must lie in [0, {}], got {p_pair}",
                Self::MAX_P_PAIR
            )));
        }
        if m_g < 2 && p_pair > 0.0 {
            return Err(LabError::Config("two-hot latents need m_G >= 2".into()));
        }
        Ok(Self { m_g, p_pair })
    }

    pub fn m_g(&self) -> usize {
        self.m_g
    }

    pub fn p_pair(&self) -> f64 {
        self.p_pair
    }

    pub fn p_single(&self) -> f64 {
        1.0 - self.p_pair
    }

    pub fn sample(&self, rng: &mut RngStream) -> Latent {
        sample_latent(self, rng)
    }

    pub fn enumerate(&self) -> OutcomeTable<Latent> {
        enumerate_latent(self)
    }
}

/// One-hot uniform w.p. `p_single`, two-hot uniform over unordered pairs
/// w.p. `p_pair`.
pub fn sample_latent(dist: &LatentDistribution, rng: &mut RngStream) -> Latent {
    let m = dist.m_g;
    if rng.uniform() < dist.p_pair {
        let i = rng.below(m);
        let mut j = rng.below(m - 1);
        if j >= i {
            j += 1;
        }
        Latent {
            dim: m,
            ones: vec![i.min(j), i.max(j)],
        }
    } else {
        Latent {
            dim: m,
            ones: vec![rng.below(m)],
        }
    }
}

/// Exact support: `m_G` one-hot rows followed by `C(m_G, 2)` two-hot rows.
pub fn enumerate_latent(dist: &LatentDistribution) -> OutcomeTable<Latent> {
    let m = dist.m_g;
    let mut rows = Vec::with_capacity(m + m * m.saturating_sub(1) / 2);
    let p1 = dist.p_single() / m as f64;
    for i in 0..m {
        rows.push((
            Latent {
                dim: m,
                ones: vec![i],
            },
            p1,
        ));
    }
    if dist.p_pair > 0.0 {
        let pairs = (m * (m - 1) / 2) as f64;
        let p2 = dist.p_pair / pairs;
        for i in 0..m {
            for j in i + 1..m {
                rows.push((
                    Latent {
                        dim: m,
                        ones: vec![i, j],
                    },
                    p2,
                ));
            }
        }
    }
    OutcomeTable::from_rows(rows).expect("latent table probabilities are valid by construction")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub value: T,
    pub probability: f64,
}

/// Finite discrete law: strictly positive probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable<T> {
    outcomes: Vec<Outcome<T>>,
}

impl<T> OutcomeTable<T> {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn from_rows(rows: Vec<(T, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(LabError::Domain("outcome table is empty".into()));
        }
        let mut total = 0.0;
        for (_, p) in &rows {
            if !(*p > 0.0 && p.is_finite()) {
                return Err(LabError::Domain(format!(
                    "outcome probability {p} is not positive"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(LabError::Domain(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            outcomes: rows
                .into_iter()
                .map(|(value, probability)| Outcome { value, probability })
                .collect(),
        })
    }

    /// Single-outcome table.
    pub fn point_mass(value: T) -> Self {
        Self {
            outcomes: vec![Outcome {
                value,
                probability: 1.0,
            }],
        }
    }

    pub fn outcomes(&self) -> &[Outcome<T>] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.outcomes.iter().map(|o| (&o.value, o.probability))
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// `Σ p · f(outcome)`.
    pub fn expectation(&self, mut f: impl FnMut(&T) -> f64) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.probability * f(&o.value))
            .sum()
    }
}
