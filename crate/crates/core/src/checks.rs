//! Self-checks run by the `gradcheck` and `oracle` commands: closed-form
//! gradients against central differences, and exact expectations against
//! Monte-Carlo means.

use serde::{Deserialize, Serialize};

use crate::distributions::{DataDistribution, DataVariant, LatentDistribution};
use crate::error::{LabError, Result};
use crate::gradients::{expected_gradient, fd_gradient, sample_gradient, GradientBundle, FD_STEP};
use crate::harness::{init_params, ExperimentConfig};
use crate::model::{discriminator_forward, generator_forward, GanParams};
use crate::numerics::{axpy, gaussian_vec, Matrix, RngStream};
use crate::par;

/// Deliberate corruptions of the analytic gradient, used to show the check
/// actually catches errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mutation {
    FlipBiasSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub mutation: Option<Mutation>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            step: FD_STEP,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            mutation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub component: String,
    pub analytic: f64,
    pub numeric: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl ComponentError {
    fn new(component: String, analytic: f64, numeric: f64) -> Self {
        let abs_err = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel_err = if scale == 0.0 { 0.0 } else { abs_err / scale };
        Self {
            component,
            analytic,
            numeric,
            abs_err,
            rel_err,
        }
    }

    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        self.rel_err < rel_tol || self.abs_err < abs_tol
    }
}

/// Outcome of one random configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub index: usize,
    pub d: usize,
    pub variant: DataVariant,
    pub f_real: f64,
    pub f_fake: f64,
    /// Component with the largest relative error among the failing ones, or
    /// among those above the absolute cut-off when none fail.
    pub worst: ComponentError,
    /// Largest relative error over components above the absolute cut-off.
    pub max_rel_error: f64,
    pub failures: Vec<ComponentError>,
}

impl GradCheckCase {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub cases: Vec<GradCheckCase>,
    /// Largest relative error over components whose absolute error is not
    /// below the near-zero cut-off.
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(GradCheckCase::passed)
    }

    pub fn worst_case(&self) -> Option<&GradCheckCase> {
        let by_rel =
            |a: &&GradCheckCase, b: &&GradCheckCase| a.worst.rel_err.total_cmp(&b.worst.rel_err);
        self.cases
            .iter()
            .filter(|c| !c.passed())
            .max_by(by_rel)
            .or_else(|| self.cases.iter().max_by(by_rel))
    }
}

struct RandomCase {
    params: GanParams,
    x: Vec<f64>,
    z: crate::distributions::Latent,
    variant: DataVariant,
}

/// Draws case `k`: `d` alternates between 10 and 100, the variant flips every
/// other case, and `a` is scaled so that the larger of `|f(X)|` and
/// `|f(G(z))|` is roughly uniform on `[0, 10]`.
fn random_case(seed: u64, k: usize) -> Result<RandomCase> {
    let mut rng = RngStream::new(seed, 1000 + k as u64);
    let d = if k.is_multiple_of(2) { 10 } else { 100 };
    let variant = if (k / 2).is_multiple_of(2) {
        DataVariant::CorrelatedModes
    } else {
        DataVariant::CorrelatedCoefficients
    };
    let gamma = 0.5 * rng.uniform();
    let data = DataDistribution::random(d, gamma, variant, &mut rng)?;
    let m_d = 1 + rng.below(5);
    let m_g = 2 + rng.below(9);
    let latent = LatentDistribution::new(m_g, 0.1 * rng.uniform())?;
    // Rows shaped like trained weights: order-one mode components plus
    // isotropic noise, so preactivations on both sides of the truncation.
    let rows = |n: usize, scale: f64, noise: f64, rng: &mut RngStream| -> Result<Matrix> {
        let r: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row = gaussian_vec(rng, d, noise)?;
                axpy(scale * rng.normal(1.0), data.u1(), &mut row);
                axpy(scale * rng.normal(1.0), data.u2(), &mut row);
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Matrix::from_rows(&r)
    };
    let w = rows(m_d, 1.0, 1.0 / d as f64, &mut rng)?;
    let v = rows(m_g, 0.5, 1.0 / (d * d) as f64, &mut rng)?;
    let lambda = (d as f64).powf(0.2);
    let tau_b = 1.0 / ((d as f64).sqrt() * (d as f64).ln());
    let b = rng.normal(1.0);
    let mut x = data.sample(&mut rng);
    // the all-zero data point makes f(X) independent of a
    if x.iter().all(|&c| c == 0.0) {
        x = data.u1().to_vec();
    }
    let z = latent.sample(&mut rng);
    let mut params = GanParams::new(v, w, 1.0, b, tau_b, lambda)?;
    let h_real = discriminator_forward(&params, &x)?.h;
    let h_fake = discriminator_forward(&params, &generator_forward(&params, &z)?)?.h;
    let h = h_real.abs().max(h_fake.abs());
    let target = 10.0 * rng.uniform();
    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    params.a = if h > 1e-12 {
        sign * (target - (tau_b * b).abs()).max(0.0) / h
    } else {
        1.0
    };
    Ok(RandomCase {
        params,
        x,
        z,
        variant,
    })
}

fn apply_mutation(g: &mut GradientBundle, m: Option<Mutation>) {
    if let Some(Mutation::FlipBiasSign) = m {
        g.g_b = -g.g_b;
    }
}

/// Analytic gradients against central differences of the loss on
/// `cfg.samples` random configurations.
pub fn gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.samples == 0 {
        return Err(LabError::Config(
            "gradcheck needs at least one sample".into(),
        ));
    }
    if cfg.step.is_nan() || cfg.step <= 0.0 {
        return Err(LabError::Config(format!(
            "step must be positive, got {}",
            cfg.step
        )));
    }
    let ks: Vec<usize> = (0..cfg.samples).collect();
    let cases = par::map(&ks, |&k| -> Result<GradCheckCase> {
        let c = random_case(cfg.seed, k)?;
        let mut analytic = sample_gradient(&c.params, &c.x, &c.z)?;
        apply_mutation(&mut analytic, cfg.mutation);
        let numeric = fd_gradient(&c.params, &c.x, &c.z, cfg.step)?;
        let errors: Vec<ComponentError> = analytic
            .components()
            .into_iter()
            .zip(numeric.flatten())
            .map(|((name, a), n)| ComponentError::new(name, a, n))
            .collect();
        let failures: Vec<ComponentError> = errors
            .iter()
            .filter(|e| !e.passes(cfg.rel_tol, cfg.abs_tol))
            .cloned()
            .collect();
        let significant: Vec<&ComponentError> =
            errors.iter().filter(|e| e.abs_err >= cfg.abs_tol).collect();
        let by_rel = |a: &&ComponentError, b: &&ComponentError| a.rel_err.total_cmp(&b.rel_err);
        let worst = failures
            .iter()
            .max_by(by_rel)
            .or_else(|| significant.iter().copied().max_by(by_rel))
            .or_else(|| errors.iter().max_by(|a, b| a.abs_err.total_cmp(&b.abs_err)))
            .cloned()
            .expect("bundles are nonempty");
        let max_rel_error = significant.iter().map(|e| e.rel_err).fold(0.0, f64::max);
        let fake = generator_forward(&c.params, &c.z)?;
        Ok(GradCheckCase {
            index: k,
            d: c.params.dim(),
            variant: c.variant,
            f_real: discriminator_forward(&c.params, &c.x)?.f,
            f_fake: discriminator_forward(&c.params, &fake)?.f,
            worst,
            max_rel_error,
            failures,
        })
    });
    let cases = cases.into_iter().collect::<Result<Vec<_>>>()?;
    let max_rel_error = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        cases,
        max_rel_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub snapshots: usize,
    pub samples: usize,
    /// Allowed deviation in standard errors.
    pub z_max: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            snapshots: 10,
            samples: 100_000,
            z_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComponent {
    pub component: String,
    pub exact: f64,
    pub mc_mean: f64,
    pub std_err: f64,
    /// `|mc_mean − exact| / std_err`; zero-variance components report 0 when
    /// the two agree and infinity otherwise.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSnapshot {
    pub index: usize,
    pub worst: OracleComponent,
    pub failures: Vec<OracleComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub snapshots: Vec<OracleSnapshot>,
    pub max_z: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.snapshots.iter().all(|s| s.failures.is_empty())
    }
}

/// Parameter snapshot `k`: the configured initialization re-drawn at larger
/// scale so every gradient component carries signal.
fn snapshot_params(base: &ExperimentConfig, k: usize) -> Result<GanParams> {
    let mut rng = RngStream::new(base.seed, 2000 + k as u64);
    let mut p = init_params(base, &mut rng)?;
    let d = base.d as f64;
    let w_scale = (2.0 / (d * base.init_variances.w_var)).sqrt();
    let v_scale = (1.0 / (d * base.init_variances.v_var)).sqrt();
    p.w.as_mut_slice().iter_mut().for_each(|x| *x *= w_scale);
    p.v.as_mut_slice().iter_mut().for_each(|x| *x *= v_scale);
    p.a = rng.normal(1.0);
    p.b = rng.normal(1.0);
    Ok(p)
}

/// Monte-Carlo means of the sample gradient against the exact expectation.
pub fn oracle(base: &ExperimentConfig, cfg: &OracleConfig) -> Result<OracleReport> {
    base.validate()?;
    if cfg.snapshots == 0 || cfg.samples < 2 {
        return Err(LabError::Config(
            "oracle needs snapshots >= 1 and samples >= 2".into(),
        ));
    }
    let data = base.data_distribution()?;
    let latent = base.latent_distribution()?;
    let (data_table, latent_table) = (data.enumerate(), latent.enumerate());
    let ks: Vec<usize> = (0..cfg.snapshots).collect();
    let snaps = par::map(&ks, |&k| -> Result<OracleSnapshot> {
        let params = snapshot_params(base, k)?;
        let exact = expected_gradient(&params, &data_table, &latent_table)?;
        let mut rng = RngStream::new(base.seed, 3000 + k as u64);
        let n = exact.flatten().len();
        // Welford accumulators
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for i in 0..cfg.samples {
            let x = data.sample(&mut rng);
            let z = latent.sample(&mut rng);
            let g = sample_gradient(&params, &x, &z)?.flatten();
            let c = 1.0 / (i + 1) as f64;
            for ((m, s), y) in mean.iter_mut().zip(m2.iter_mut()).zip(g) {
                let delta = y - *m;
                *m += delta * c;
                *s += delta * (y - *m);
            }
        }
        let samples = cfg.samples as f64;
        let comps: Vec<OracleComponent> = exact
            .components()
            .into_iter()
            .zip(mean.iter().zip(&m2))
            .map(|((component, e), (&m, &s))| {
                let std_err = (s / (samples - 1.0)).max(0.0).sqrt() / samples.sqrt();
                let diff = (m - e).abs();
                let z = if std_err > 0.0 {
                    diff / std_err
                } else if diff <= 1e-12 * e.abs().max(1.0) {
                    0.0
                } else {
                    f64::INFINITY
                };
                OracleComponent {
                    component,
                    exact: e,
                    mc_mean: m,
                    std_err,
                    z,
                }
            })
            .collect();
        let worst = comps
            .iter()
            .max_by(|a, b| a.z.total_cmp(&b.z))
            .cloned()
            .expect("bundles are nonempty");
        let failures = comps
            .into_iter()
            .filter(|c| c.z.is_nan() || c.z > cfg.z_max)
            .collect();
        Ok(OracleSnapshot {
            index: k,
            worst,
            failures,
        })
    });
    let snapshots = snaps.into_iter().collect::<Result<Vec<_>>>()?;
    let max_z = snapshots.iter().map(|s| s.worst.z).fold(0.0, f64::max);
    Ok(OracleReport { snapshots, max_z })
}
