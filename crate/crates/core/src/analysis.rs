//! Diagnostics over parameter snapshots: mode correlations, relative update
//! speeds, the gradient ratio, phase boundaries, run verdicts and the
//! step-size regime at initialization.

use serde::{Deserialize, Serialize};

use crate::distributions::{Latent, OutcomeTable};
use crate::error::{LabError, Result};
use crate::gradients::{player_norms, GradientBundle};
use crate::model::{generator_forward, sigma_prime, GanParams};
use crate::numerics::{add, cosine, decompose, dot, norm, scaled, BasisDecomposition};
use crate::optimizers::OptimizerConfig;

/// Cosines of one row against `(u1, u2)`.
pub type ModeCorr = [f64; 2];

/// One sampled point of a training trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: u64,
    pub loss_exp: f64,
    pub a: f64,
    pub b: f64,
    pub rel_update_d: f64,
    pub rel_update_g: f64,
    pub grad_ratio: f64,
    pub corr_w: Vec<ModeCorr>,
    pub corr_v: Vec<ModeCorr>,
    /// Global norm of the expected gradient; drives the convergence test.
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_coeffs: Option<Vec<BasisDecomposition>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictLabel {
    ModeCollapse,
    NoiseOnly,
    ModeRecovery,
    Mixed,
}

impl VerdictLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictLabel::ModeCollapse => "ModeCollapse",
            VerdictLabel::NoiseOnly => "NoiseOnly",
            VerdictLabel::ModeRecovery => "ModeRecovery",
            VerdictLabel::Mixed => "Mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    DiscriminatorFast,
    Balanced,
    GeneratorFast,
}

/// Concrete cut-offs for the verdict labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest Euclidean distance between a normalized output and a mode
    /// that still counts as hitting that mode.
    pub near_mode: f64,
    pub collapse_cos: f64,
    pub noise_cos: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            near_mode: 0.4,
            collapse_cos: 0.95,
            noise_cos: 0.2,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !(ok(self.near_mode) && ok(self.collapse_cos) && ok(self.noise_cos)) {
            return Err(LabError::Config(format!(
                "thresholds must be positive: {self:?}"
            )));
        }
        if self.collapse_cos > 1.0 || self.noise_cos > 1.0 {
            return Err(LabError::Config(
                "cosine thresholds must not exceed 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub label: VerdictLabel,
    /// Latent mass whose normalized output lies within `near_mode` of each mode.
    pub per_mode_coverage: [f64; 2],
    /// `max_z cos(G(z), u1 + u2)`.
    pub collapse_cosine: f64,
    /// `max_{z,l} |cos(G(z), u_l)|`.
    pub max_mode_cosine: f64,
    pub regime: Option<Regime>,
    /// Latents skipped because `G(z) = 0`.
    pub excluded_latents: usize,
    /// Mean relative residual of the generator rows outside `span{w_i(0)}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_residual: Option<f64>,
}

/// Cosines of every discriminator and generator row with each mode. A zero
/// row reports `[0, 0]` and is listed in the third component.
pub fn mode_correlations(
    params: &GanParams,
    modes: [&[f64]; 2],
) -> (Vec<ModeCorr>, Vec<ModeCorr>, Vec<String>) {
    let mut zero_rows = Vec::new();
    let mut rows = |m: &crate::numerics::Matrix, tag: &str| -> Vec<ModeCorr> {
        m.row_iter()
            .enumerate()
            .map(|(i, r)| match (cosine(r, modes[0]), cosine(r, modes[1])) {
                (Ok(c1), Ok(c2)) => [c1, c2],
                _ => {
                    zero_rows.push(format!("{tag}[{i}]"));
                    [0.0, 0.0]
                }
            })
            .collect()
    };
    let w = rows(&params.w, "W");
    let v = rows(&params.v, "V");
    (w, v, zero_rows)
}

/// `(η_D‖U_D‖ / ‖D‖, η_G‖U_V‖ / ‖V‖)` with per-player norms. `u` is the step
/// direction (the gradient itself for SGDA). A zero parameter norm yields
/// `f64::INFINITY` unless the direction is zero too.
pub fn relative_updates(
    params: &GanParams,
    u: &GradientBundle,
    cfg: &OptimizerConfig,
) -> (f64, f64) {
    let (ud, ug) = player_norms(u);
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    (
        ratio(cfg.eta_d * ud, params.discriminator_norm()),
        ratio(cfg.eta_g * ug, params.generator_norm()),
    )
}

/// `‖g_G(t)‖/‖g_G(0)‖ + ‖g_D(t)‖/‖g_D(0)‖`.
pub fn gradient_ratio(g_t: &GradientBundle, g_0: &GradientBundle) -> Result<f64> {
    let (d0, g0) = player_norms(g_0);
    if !(d0 > 0.0 && g0 > 0.0) {
        return Err(LabError::Config(format!(
            "gradient ratio baseline has a zero player norm (D {d0}, G {g0})"
        )));
    }
    let (dt, gt) = player_norms(g_t);
    Ok(gt / g0 + dt / d0)
}

/// Labels a final snapshot from its exact output distribution.
pub fn classify_run(
    params: &GanParams,
    modes: [&[f64]; 2],
    latent: &OutcomeTable<Latent>,
    thresholds: &Thresholds,
) -> Result<RunVerdict> {
    let sum = add(modes[0], modes[1]);
    let sum_hat = scaled(1.0 / norm(&sum), &sum);
    let units = [
        scaled(1.0 / norm(modes[0]), modes[0]),
        scaled(1.0 / norm(modes[1]), modes[1]),
    ];
    let mut coverage = [0.0; 2];
    let mut collapse = f64::NEG_INFINITY;
    let mut max_mode = 0.0_f64;
    let mut excluded = 0;
    for (z, p) in latent.iter() {
        let g = generator_forward(params, z)?;
        let n = norm(&g);
        if n == 0.0 || !n.is_finite() {
            excluded += 1;
            continue;
        }
        let g_hat = scaled(1.0 / n, &g);
        for (l, u) in units.iter().enumerate() {
            let c = dot(&g_hat, u).clamp(-1.0, 1.0);
            max_mode = max_mode.max(c.abs());
            // ‖ĝ − u‖² = 2 − 2 cos for unit vectors
            if (2.0 - 2.0 * c).max(0.0).sqrt() <= thresholds.near_mode {
                coverage[l] += p;
            }
        }
        collapse = collapse.max(dot(&g_hat, &sum_hat).clamp(-1.0, 1.0));
    }
    if excluded == latent.len() {
        collapse = 0.0;
    }
    let floor = 1.0 / (4.0 * params.m_g() as f64);
    let label = if coverage[0] >= floor && coverage[1] >= floor {
        VerdictLabel::ModeRecovery
    } else if collapse >= thresholds.collapse_cos && coverage == [0.0, 0.0] {
        VerdictLabel::ModeCollapse
    } else if max_mode <= thresholds.noise_cos {
        VerdictLabel::NoiseOnly
    } else {
        VerdictLabel::Mixed
    };
    Ok(RunVerdict {
        label,
        per_mode_coverage: coverage,
        collapse_cosine: collapse,
        max_mode_cosine: max_mode,
        regime: None,
        excluded_latents: excluded,
        noise_residual: None,
    })
}

/// Mean over generator rows of `‖v_j − P v_j‖ / ‖v_j‖`, with `P` the projection
/// onto `span{w_i(0)}`. Small values mean the generator only learned
/// combinations of the initial discriminator weights.
pub fn noise_residual(params: &GanParams, init: &GanParams) -> Result<f64> {
    let basis: Vec<&[f64]> = init.w.row_iter().collect();
    let mut total = 0.0;
    let mut count = 0;
    for v in params.v.row_iter() {
        let n = norm(v);
        if n == 0.0 {
            continue;
        }
        total += decompose(v, &basis)?.residual_norm / n;
        count += 1;
    }
    Ok(if count == 0 {
        0.0
    } else {
        total / count as f64
    })
}

/// Start of a detected phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStart {
    pub phase: u8,
    pub t: u64,
}

/// Phase boundaries of a trajectory.
///
/// Phase 1 starts at the first row. Phase 2 starts at the first row where the
/// best absolute discriminator-mode correlation has reached 0.9 of its maximum
/// over the series while the generator still moves less than a tenth as fast
/// as the discriminator. Phase 3 starts at the first later row where the
/// generator moves at least as fast as the discriminator. Absent transitions
/// are simply missing from the output. Absolute values are used because
/// flipping the sign of both `a` and `W` leaves the logit unchanged.
pub fn detect_phases(series: &[MetricsRow]) -> Vec<PhaseStart> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let best = |r: &MetricsRow| {
        r.corr_w
            .iter()
            .flat_map(|c| c.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    };
    let peak = series.iter().map(best).fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![PhaseStart {
        phase: 1,
        t: first.t,
    }];
    let Some(k2) = series
        .iter()
        .position(|r| best(r) >= 0.9 * peak && r.rel_update_g < 0.1 * r.rel_update_d)
    else {
        return out;
    };
    if k2 == 0 {
        return out;
    }
    out.push(PhaseStart {
        phase: 2,
        t: series[k2].t,
    });
    if let Some(r) = series[k2 + 1..]
        .iter()
        .find(|r| r.rel_update_g >= r.rel_update_d)
    {
        out.push(PhaseStart { phase: 3, t: r.t });
    }
    out
}

/// Per-mode discriminator alignment `max_i |cos(w_i, u_l)|` of one row.
pub fn mode_alignment(row: &MetricsRow) -> [f64; 2] {
    row.corr_w.iter().fold([0.0, 0.0], |m, c| {
        [m[0].max(c[0].abs()), m[1].max(c[1].abs())]
    })
}

/// The mode the discriminator locks onto first: the only mode whose alignment
/// has reached 0.9 of the series-wide peak at the first row where either does.
/// `None` if both cross together or the series is empty.
pub fn first_learned_mode(series: &[MetricsRow]) -> Option<usize> {
    let peak = series
        .iter()
        .map(|r| {
            let m = mode_alignment(r);
            m[0].max(m[1])
        })
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let row = series
        .iter()
        .map(mode_alignment)
        .find(|m| m[0].max(m[1]) >= 0.9 * peak)?;
    match (row[0] >= 0.9 * peak, row[1] >= 0.9 * peak) {
        (true, false) => Some(0),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Initial-alignment quantities `(A, B)`:
/// `A = max_{i,l} ½σ'(⟨w_i,u_l⟩)·sign⟨w_i,u_l⟩` and
/// `B = max_{i,j} (1/m_G)σ'(⟨w_i,v_j⟩)·sign⟨w_i,v_j⟩`.
pub fn alignment_strengths(init: &GanParams, modes: [&[f64]; 2]) -> (f64, f64) {
    let signed = |x: f64| sigma_prime(x, init.lambda) * x.signum();
    let mut a = f64::NEG_INFINITY;
    let mut b = f64::NEG_INFINITY;
    for w in init.w.row_iter() {
        for u in modes {
            a = a.max(0.5 * signed(dot(w, u)));
        }
        for v in init.v.row_iter() {
            b = b.max(signed(dot(w, v)) / init.m_g() as f64);
        }
    }
    (a, b)
}

/// Step-size regime at initialization.
///
/// With `r = η_G·B / (η_D·A)`: `r < 1/margin` is discriminator-fast,
/// `r > 1/(1 − 1/lnln d)` is generator-fast, and everything between is
/// balanced. A zero `η_G` is always discriminator-fast and a zero `η_D`
/// generator-fast.
pub fn classify_regime(
    cfg: &OptimizerConfig,
    init: &GanParams,
    modes: [&[f64]; 2],
    margin: f64,
) -> Regime {
    if cfg.eta_g == 0.0 {
        return Regime::DiscriminatorFast;
    }
    if cfg.eta_d == 0.0 {
        return Regime::GeneratorFast;
    }
    let (a, b) = alignment_strengths(init, modes);
    let d_side = cfg.eta_d * a;
    let g_side = cfg.eta_g * b;
    let gap = 1.0 / (init.dim() as f64).ln().ln().max(1.0);
    if g_side * margin < d_side {
        Regime::DiscriminatorFast
    } else if d_side < g_side * (1.0 - gap) {
        Regime::GeneratorFast
    } else {
        Regime::Balanced
    }
}

/// `ln d`, the default regime margin.
pub fn default_margin(d: usize) -> f64 {
    (d as f64).ln()
}
