//! Game optimizers as steppers over `(GanParams, GradientBundle)`.
//!
//! Every rule first builds a parameter-shaped direction `U`, then applies
//! `a += η_D U_a`, `b += η_D U_b`, `W += η_D U_W` (ascent) and
//! `V −= η_G U_V` (descent).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::gradients::GradientBundle;
use crate::model::GanParams;
use crate::numerics::axpy;

/// Grouping used by normalized and grafted rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormScope {
    /// Two groups, `{a, b, W}` and `{V}`. The discriminator group norm is
    /// `|g_a| + |g_b| + ‖g_W‖_F`.
    #[default]
    Global,
    /// Each of `a`, `b`, `W`, `V` is its own group.
    LayerWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgda,
    Nsgda {
        #[serde(default)]
        scope: NormScope,
    },
    AdamGames {
        #[serde(default)]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    AdaNsgda {
        #[serde(default)]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_norm_epsilon")]
        norm_epsilon: f64,
        #[serde(default)]
        scope: NormScope,
        /// Use the oracle from before this step's moment update for the
        /// magnitude instead of the fresh one.
        #[serde(default)]
        lagged_magnitude: bool,
    },
    AdaDir {
        #[serde(default)]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_norm_epsilon")]
        norm_epsilon: f64,
        #[serde(default)]
        scope: NormScope,
        #[serde(default)]
        lagged_magnitude: bool,
    },
}

fn default_beta2() -> f64 {
    0.9
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_norm_epsilon() -> f64 {
    1e-8
}

impl OptimizerKind {
    pub fn adam_games() -> Self {
        Self::AdamGames {
            beta1: 0.0,
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn ada_nsgda() -> Self {
        Self::AdaNsgda {
            beta1: 0.0,
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            norm_epsilon: default_norm_epsilon(),
            scope: NormScope::Global,
            lagged_magnitude: false,
        }
    }

    pub fn ada_dir() -> Self {
        Self::AdaDir {
            beta1: 0.0,
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            norm_epsilon: default_norm_epsilon(),
            scope: NormScope::Global,
            lagged_magnitude: false,
        }
    }

    fn moments(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Self::AdamGames {
                beta1,
                beta2,
                epsilon,
            }
            | Self::AdaNsgda {
                beta1,
                beta2,
                epsilon,
                ..
            }
            | Self::AdaDir {
                beta1,
                beta2,
                epsilon,
                ..
            } => Some((beta1, beta2, epsilon)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgda => "SGDA",
            Self::Nsgda { .. } => "nSGDA",
            Self::AdamGames { .. } => "Adam",
            Self::AdaNsgda { .. } => "Ada-nSGDA",
            Self::AdaDir { .. } => "AdaDir",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(rename = "eta_D")]
    pub eta_d: f64,
    #[serde(rename = "eta_G")]
    pub eta_g: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, eta_d: f64, eta_g: f64) -> Self {
        Self { kind, eta_d, eta_g }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_D", self.eta_d), ("eta_G", self.eta_g)] {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(LabError::Config(format!(
                    "{name} must be positive, got {eta}"
                )));
            }
        }
        if let Some((b1, b2, eps)) = self.kind.moments() {
            for (name, beta) in [("beta1", b1), ("beta2", b2)] {
                if !(0.0..1.0).contains(&beta) {
                    return Err(LabError::Config(format!(
                        "{name} must lie in [0, 1), got {beta}"
                    )));
                }
            }
            if eps.is_nan() || eps <= 0.0 {
                return Err(LabError::Config(format!(
                    "epsilon must be positive, got {eps}"
                )));
            }
        }
        if let OptimizerKind::AdaNsgda { norm_epsilon, .. }
        | OptimizerKind::AdaDir { norm_epsilon, .. } = self.kind
        {
            if norm_epsilon.is_nan() || norm_epsilon <= 0.0 {
                return Err(LabError::Config(format!(
                    "norm_epsilon must be positive, got {norm_epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// Un-corrected moment accumulators, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m1: GradientBundle,
    pub m2: GradientBundle,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &GanParams) -> Self {
        Self {
            m1: GradientBundle::zeros_like(params),
            m2: GradientBundle::zeros_like(params),
            step_count: 0,
        }
    }

    /// `M1 ← β1·M1 + g`, `M2 ← β2·M2 + g²` (no `(1−β)` weights, no bias
    /// correction).
    pub fn accumulate(&mut self, g: &GradientBundle, beta1: f64, beta2: f64) {
        fn update(m: &mut [f64], g: &[f64], beta: f64, square: bool) {
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = beta * *mi + if square { gi * gi } else { *gi };
            }
        }
        update(self.m1.g_v.as_mut_slice(), g.g_v.as_slice(), beta1, false);
        update(self.m1.g_w.as_mut_slice(), g.g_w.as_slice(), beta1, false);
        self.m1.g_a = beta1 * self.m1.g_a + g.g_a;
        self.m1.g_b = beta1 * self.m1.g_b + g.g_b;
        update(self.m2.g_v.as_mut_slice(), g.g_v.as_slice(), beta2, true);
        update(self.m2.g_w.as_mut_slice(), g.g_w.as_slice(), beta2, true);
        self.m2.g_a = beta2 * self.m2.g_a + g.g_a * g.g_a;
        self.m2.g_b = beta2 * self.m2.g_b + g.g_b * g.g_b;
        self.step_count += 1;
    }

    /// Element-wise oracle `A = M1 / √(M2 + ε)`.
    pub fn oracle(&self, epsilon: f64) -> GradientBundle {
        let mut a = self.m1.clone();
        let div = |x: &mut f64, m2: f64| *x /= (m2 + epsilon).sqrt();
        for (x, m2) in a.g_v.as_mut_slice().iter_mut().zip(self.m2.g_v.as_slice()) {
            div(x, *m2);
        }
        for (x, m2) in a.g_w.as_mut_slice().iter_mut().zip(self.m2.g_w.as_slice()) {
            div(x, *m2);
        }
        div(&mut a.g_a, self.m2.g_a);
        div(&mut a.g_b, self.m2.g_b);
        a
    }
}

/// A parameter group: a subset of `{a, b, W, V}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Discriminator,
    Generator,
    A,
    B,
    W,
    V,
}

impl Group {
    pub fn for_scope(scope: NormScope) -> &'static [Group] {
        match scope {
            NormScope::Global => &[Group::Discriminator, Group::Generator],
            NormScope::LayerWise => &[Group::A, Group::B, Group::W, Group::V],
        }
    }

    /// Group norm; the discriminator group sums its tensor norms.
    pub fn norm(self, t: &GradientBundle) -> f64 {
        match self {
            Group::Discriminator => t.g_a.abs() + t.g_b.abs() + t.g_w.frobenius_norm(),
            Group::Generator | Group::V => t.g_v.frobenius_norm(),
            Group::A => t.g_a.abs(),
            Group::B => t.g_b.abs(),
            Group::W => t.g_w.frobenius_norm(),
        }
    }

    /// Writes `scale · src` into this group's slots of `dst`.
    fn assign_scaled(self, scale: f64, src: &GradientBundle, dst: &mut GradientBundle) {
        let copy = |d: &mut [f64], s: &[f64]| {
            for (di, si) in d.iter_mut().zip(s) {
                *di = scale * si;
            }
        };
        match self {
            Group::Discriminator => {
                dst.g_a = scale * src.g_a;
                dst.g_b = scale * src.g_b;
                copy(dst.g_w.as_mut_slice(), src.g_w.as_slice());
            }
            Group::Generator | Group::V => copy(dst.g_v.as_mut_slice(), src.g_v.as_slice()),
            Group::A => dst.g_a = scale * src.g_a,
            Group::B => dst.g_b = scale * src.g_b,
            Group::W => copy(dst.g_w.as_mut_slice(), src.g_w.as_slice()),
        }
    }
}

/// Applies the ascent/descent update with direction `u`.
pub fn apply_direction(
    params: &GanParams,
    u: &GradientBundle,
    eta_d: f64,
    eta_g: f64,
) -> GanParams {
    let mut next = params.clone();
    next.a += eta_d * u.g_a;
    next.b += eta_d * u.g_b;
    axpy(eta_d, u.g_w.as_slice(), next.w.as_mut_slice());
    axpy(-eta_g, u.g_v.as_slice(), next.v.as_mut_slice());
    next
}

/// Per-group `dir / ‖dir‖ · magnitude(group)`; groups with `‖dir‖ + eps = 0`
/// stay zero.
fn graft(
    dir: &GradientBundle,
    scope: NormScope,
    eps: f64,
    magnitude: impl Fn(Group) -> f64,
) -> GradientBundle {
    let mut out = dir.scaled(0.0);
    for &group in Group::for_scope(scope) {
        let n = group.norm(dir) + eps;
        if n > 0.0 {
            group.assign_scaled(magnitude(group) / n, dir, &mut out);
        }
    }
    out
}

/// `W ← W + η_D g_W`, `V ← V − η_G g_V`.
pub fn sgda_step(params: &GanParams, g: &GradientBundle, cfg: &OptimizerConfig) -> GanParams {
    apply_direction(params, g, cfg.eta_d, cfg.eta_g)
}

/// Normalized SGDA: each group moves by exactly `η` in its group norm.
/// A group with zero gradient does not move.
pub fn nsgda_step(params: &GanParams, g: &GradientBundle, cfg: &OptimizerConfig) -> GanParams {
    let scope = match cfg.kind {
        OptimizerKind::Nsgda { scope } => scope,
        _ => NormScope::Global,
    };
    apply_direction(params, &graft(g, scope, 0.0, |_| 1.0), cfg.eta_d, cfg.eta_g)
}

fn moments_or_default(kind: &OptimizerKind) -> (f64, f64, f64) {
    kind.moments()
        .unwrap_or((0.0, default_beta2(), default_epsilon()))
}

/// Adam for games: advance the moments, then step along the oracle.
pub fn adam_games_step(
    params: &GanParams,
    g: &GradientBundle,
    state: &AdamState,
    cfg: &OptimizerConfig,
) -> (GanParams, AdamState) {
    let (b1, b2, eps) = moments_or_default(&cfg.kind);
    let mut next = state.clone();
    next.accumulate(g, b1, b2);
    let a = next.oracle(eps);
    (apply_direction(params, &a, cfg.eta_d, cfg.eta_g), next)
}

fn graft_settings(kind: &OptimizerKind) -> (f64, NormScope, bool) {
    match *kind {
        OptimizerKind::AdaNsgda {
            norm_epsilon,
            scope,
            lagged_magnitude,
            ..
        }
        | OptimizerKind::AdaDir {
            norm_epsilon,
            scope,
            lagged_magnitude,
            ..
        } => (norm_epsilon, scope, lagged_magnitude),
        _ => (default_norm_epsilon(), NormScope::Global, false),
    }
}

/// Adam magnitude on the SGDA direction:
/// `η · ‖A_group‖ · g_group / (‖g_group‖ + ε_n)`.
pub fn ada_nsgda_step(
    params: &GanParams,
    g: &GradientBundle,
    state: &AdamState,
    cfg: &OptimizerConfig,
) -> (GanParams, AdamState) {
    let (b1, b2, eps) = moments_or_default(&cfg.kind);
    let (norm_eps, scope, lagged) = graft_settings(&cfg.kind);
    let before = state.oracle(eps);
    let mut next = state.clone();
    next.accumulate(g, b1, b2);
    let oracle = if lagged { before } else { next.oracle(eps) };
    let u = graft(g, scope, norm_eps, |group| group.norm(&oracle));
    (apply_direction(params, &u, cfg.eta_d, cfg.eta_g), next)
}

/// SGDA magnitude on the Adam direction:
/// `η · ‖g_group‖ · A_group / (‖A_group‖ + ε_n)`.
pub fn adadir_step(
    params: &GanParams,
    g: &GradientBundle,
    state: &AdamState,
    cfg: &OptimizerConfig,
) -> (GanParams, AdamState) {
    let (b1, b2, eps) = moments_or_default(&cfg.kind);
    let (norm_eps, scope, lagged) = graft_settings(&cfg.kind);
    let before = state.oracle(eps);
    let mut next = state.clone();
    next.accumulate(g, b1, b2);
    let oracle = if lagged { before } else { next.oracle(eps) };
    let u = graft(&oracle, scope, norm_eps, |group| group.norm(g));
    (apply_direction(params, &u, cfg.eta_d, cfg.eta_g), next)
}

/// A configured stepper with its own moment state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    state: AdamState,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, params: &GanParams) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: AdamState::new(params),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn step(&mut self, params: &GanParams, g: &GradientBundle) -> GanParams {
        match self.cfg.kind {
            OptimizerKind::Sgda => sgda_step(params, g, &self.cfg),
            OptimizerKind::Nsgda { .. } => nsgda_step(params, g, &self.cfg),
            OptimizerKind::AdamGames { .. } => {
                let (p, s) = adam_games_step(params, g, &self.state, &self.cfg);
                self.state = s;
                p
            }
            OptimizerKind::AdaNsgda { .. } => {
                let (p, s) = ada_nsgda_step(params, g, &self.state, &self.cfg);
                self.state = s;
                p
            }
            OptimizerKind::AdaDir { .. } => {
                let (p, s) = adadir_step(params, g, &self.state, &self.cfg);
                self.state = s;
                p
            }
        }
    }

    /// The direction `U` that [`Optimizer::step`] would apply for `g`, without
    /// advancing the moment state. The generator slot carries the descent
    /// sign convention, so the actual move is `−η_G·U_V`.
    pub fn direction(&self, params: &GanParams, g: &GradientBundle) -> GradientBundle {
        let next = self.clone().step(params, g);
        let mut u = GradientBundle::zeros_like(params);
        let (eta_d, eta_g) = (self.cfg.eta_d, self.cfg.eta_g);
        u.g_a = (next.a - params.a) / eta_d;
        u.g_b = (next.b - params.b) / eta_d;
        for (o, (n, p)) in u
            .g_w
            .as_mut_slice()
            .iter_mut()
            .zip(next.w.as_slice().iter().zip(params.w.as_slice()))
        {
            *o = (n - p) / eta_d;
        }
        for (o, (n, p)) in u
            .g_v
            .as_mut_slice()
            .iter_mut()
            .zip(next.v.as_slice().iter().zip(params.v.as_slice()))
        {
            *o = (p - n) / eta_g;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_vec, Matrix, RngStream};

    fn params() -> GanParams {
        GanParams::new(
            Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-0.1, 0.0, 0.4]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, -1.0, 0.5]]).unwrap(),
            0.2,
            0.0,
            0.5,
            2.0,
        )
        .unwrap()
    }

    fn random_grad(rng: &mut RngStream, p: &GanParams) -> GradientBundle {
        let mut g = GradientBundle::zeros_like(p);
        g.g_a = rng.normal(1.0);
        g.g_b = rng.normal(1.0);
        let w = gaussian_vec(rng, g.g_w.as_slice().len(), 1.0).unwrap();
        g.g_w.as_mut_slice().copy_from_slice(&w);
        let v = gaussian_vec(rng, g.g_v.as_slice().len(), 1.0).unwrap();
        g.g_v.as_mut_slice().copy_from_slice(&v);
        g
    }

    fn delta(a: &GanParams, b: &GanParams) -> GradientBundle {
        let mut d = GradientBundle::zeros_like(a);
        d.g_a = b.a - a.a;
        d.g_b = b.b - a.b;
        for (x, (p, q)) in d
            .g_w
            .as_mut_slice()
            .iter_mut()
            .zip(a.w.as_slice().iter().zip(b.w.as_slice()))
        {
            *x = q - p;
        }
        for (x, (p, q)) in d
            .g_v
            .as_mut_slice()
            .iter_mut()
            .zip(a.v.as_slice().iter().zip(b.v.as_slice()))
        {
            *x = q - p;
        }
        d
    }

    #[test]
    fn sgda_zero_gradient_is_identity() {
        let p = params();
        let cfg = OptimizerConfig::new(OptimizerKind::Sgda, 0.1, 0.1);
        assert_eq!(sgda_step(&p, &GradientBundle::zeros_like(&p), &cfg), p);
    }

    #[test]
    fn sgda_sign_convention() {
        let p = params();
        let cfg = OptimizerConfig::new(OptimizerKind::Sgda, 1.0, 1.0);
        let mut g = GradientBundle::zeros_like(&p);
        g.g_a = 2.0;
        g.g_v.row_mut(0)[1] = 0.5;
        let q = sgda_step(&p, &g, &cfg);
        assert_eq!(q.a, p.a + 2.0);
        assert_eq!(q.v.row(0)[1], p.v.row(0)[1] - 0.5);
    }

    #[test]
    fn sgda_is_additive() {
        let mut rng = RngStream::new(1, 0);
        let p = params();
        let cfg = OptimizerConfig::new(OptimizerKind::Sgda, 0.3, 0.7);
        let g1 = random_grad(&mut rng, &p);
        let g2 = random_grad(&mut rng, &p);
        let two = sgda_step(&sgda_step(&p, &g1, &cfg), &g2, &cfg);
        let mut sum = g1.clone();
        sum.add_scaled(1.0, &g2);
        let one = sgda_step(&p, &sum, &cfg);
        let d = delta(&two, &one);
        assert!(d.flatten().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn nsgda_unit_group_steps() {
        let mut rng = RngStream::new(2, 0);
        let p = params();
        for scope in [NormScope::Global, NormScope::LayerWise] {
            let cfg = OptimizerConfig::new(OptimizerKind::Nsgda { scope }, 0.05, 0.02);
            let g = random_grad(&mut rng, &p);
            let d = delta(&p, &nsgda_step(&p, &g, &cfg));
            for &group in Group::for_scope(scope) {
                let eta = if matches!(group, Group::Generator | Group::V) {
                    0.02
                } else {
                    0.05
                };
                assert!((group.norm(&d) / eta - 1.0).abs() < 1e-12, "{group:?}");
            }
        }
    }

    #[test]
    fn nsgda_freezes_zero_group() {
        let p = params();
        let cfg = OptimizerConfig::new(
            OptimizerKind::Nsgda {
                scope: NormScope::Global,
            },
            0.1,
            0.1,
        );
        let mut g = GradientBundle::zeros_like(&p);
        g.g_a = -4.0;
        let q = nsgda_step(&p, &g, &cfg);
        assert_eq!(q.v, p.v);
        assert!((q.a - (p.a - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn layerwise_only_moves_nonzero_tensor() {
        let p = params();
        let cfg = OptimizerConfig::new(
            OptimizerKind::Nsgda {
                scope: NormScope::LayerWise,
            },
            0.1,
            0.3,
        );
        let mut g = GradientBundle::zeros_like(&p);
        g.g_v.row_mut(1).copy_from_slice(&[1.0, 2.0, 2.0]);
        let d = delta(&p, &nsgda_step(&p, &g, &cfg));
        assert_eq!(d.g_a, 0.0);
        assert_eq!(d.g_b, 0.0);
        assert!(d.g_w.as_slice().iter().all(|&x| x == 0.0));
        assert!((d.g_v.frobenius_norm() - 0.3).abs() < 1e-15);
        assert!(d.g_v.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adam_zero_gradient_first_step_idles() {
        let p = params();
        let cfg = OptimizerConfig::new(OptimizerKind::adam_games(), 0.1, 0.1);
        let (q, s) = adam_games_step(
            &p,
            &GradientBundle::zeros_like(&p),
            &AdamState::new(&p),
            &cfg,
        );
        assert_eq!(q, p);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn adam_second_moment_geometric_sum() {
        let p = params();
        let mut g = GradientBundle::zeros_like(&p);
        g.g_a = 0.7;
        g.g_w.row_mut(0)[2] = -2.0;
        let mut s = AdamState::new(&p);
        for t in 1..=25 {
            s.accumulate(&g, 0.0, 0.9);
            let closed = |x: f64| x * x * (1.0 - 0.9f64.powi(t)) / 0.1;
            assert!((s.m2.g_a - closed(0.7)).abs() < 1e-12 * closed(0.7));
            assert!((s.m2.g_w.row(0)[2] - closed(2.0)).abs() < 1e-12 * closed(2.0));
            assert_eq!(s.m1.g_a, 0.7);
        }
    }

    #[test]
    fn ada_nsgda_lagged_first_step_idles() {
        let mut rng = RngStream::new(3, 0);
        let p = params();
        let kind = OptimizerKind::AdaNsgda {
            beta1: 0.0,
            beta2: 0.9,
            epsilon: 1e-8,
            norm_epsilon: 1e-8,
            scope: NormScope::Global,
            lagged_magnitude: true,
        };
        let cfg = OptimizerConfig::new(kind, 0.1, 0.1);
        let g = random_grad(&mut rng, &p);
        let (q, s) = ada_nsgda_step(&p, &g, &AdamState::new(&p), &cfg);
        assert_eq!(q, p);
        // second step uses the now non-zero oracle
        let (q2, _) = ada_nsgda_step(&q, &g, &s, &cfg);
        assert_ne!(q2, q);
    }

    #[test]
    fn ada_nsgda_magnitude_and_direction() {
        let mut rng = RngStream::new(4, 0);
        let p = params();
        let cfg = OptimizerConfig::new(OptimizerKind::ada_nsgda(), 0.05, 0.02);
        let mut state = AdamState::new(&p);
        let mut cur = p.clone();
        for _ in 0..10 {
            let g = random_grad(&mut rng, &cur);
            let (next, s) = ada_nsgda_step(&cur, &g, &state, &cfg);
            let oracle = s.oracle(1e-8);
            let d = delta(&cur, &next);
            for (group, eta) in [(Group::Discriminator, 0.05), (Group::Generator, 0.02)] {
                let want = eta * group.norm(&oracle);
                let bound = want * 1e-8 / group.norm(&g) + 1e-15;
                assert!((group.norm(&d) - want).abs() <= bound);
            }
            cur = next;
            state = s;
        }
    }

    #[test]
    fn adadir_aligned_oracle_matches_sgda() {
        // beta1 = beta2 = 0, tiny eps, all |g| equal: A = sign(g) ∥ g
        let p = params();
        let kind = OptimizerKind::AdaDir {
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 1e-30,
            norm_epsilon: 1e-30,
            scope: NormScope::LayerWise,
            lagged_magnitude: false,
        };
        let cfg = OptimizerConfig::new(kind, 0.1, 0.2);
        let mut g = GradientBundle::zeros_like(&p);
        g.g_a = 0.5;
        g.g_b = -0.5;
        g.g_w.as_mut_slice().copy_from_slice(&[0.5, -0.5, 0.5]);
        g.g_v
            .as_mut_slice()
            .iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = if i % 2 == 0 { 0.5 } else { -0.5 });
        let (q, _) = adadir_step(&p, &g, &AdamState::new(&p), &cfg);
        let s = sgda_step(&p, &g, &OptimizerConfig::new(OptimizerKind::Sgda, 0.1, 0.2));
        assert!(delta(&q, &s).flatten().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn adadir_zero_oracle_freezes() {
        let p = params();
        let cfg = OptimizerConfig::new(OptimizerKind::ada_dir(), 0.1, 0.1);
        let (q, _) = adadir_step(
            &p,
            &GradientBundle::zeros_like(&p),
            &AdamState::new(&p),
            &cfg,
        );
        assert_eq!(q, p);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::new(OptimizerKind::Sgda, 0.0, 0.1)
            .validate()
            .is_err());
        let bad_beta = OptimizerKind::AdamGames {
            beta1: 1.0,
            beta2: 0.9,
            epsilon: 1e-8,
        };
        assert!(OptimizerConfig::new(bad_beta, 0.1, 0.1).validate().is_err());
        assert!(OptimizerConfig::new(OptimizerKind::ada_nsgda(), 0.1, 0.1)
            .validate()
            .is_ok());
    }

    #[test]
    fn kind_json_roundtrip_with_defaults() {
        let k: OptimizerKind = serde_json::from_str(r#"{"type":"AdaNsgda"}"#).unwrap();
        assert_eq!(k, OptimizerKind::ada_nsgda());
        let k: OptimizerKind =
            serde_json::from_str(r#"{"type":"Nsgda","scope":"LayerWise"}"#).unwrap();
        assert_eq!(
            k,
            OptimizerKind::Nsgda {
                scope: NormScope::LayerWise
            }
        );
        assert!(serde_json::from_str::<OptimizerKind>(r#"{"type":"Nsgda","x":1}"#).is_err());
    }

    #[test]
    fn direction_recovers_sgda_gradient_and_keeps_state() {
        let p = params();
        let mut rng = RngStream::new(4, 0);
        let g = random_grad(&mut rng, &p);
        let opt = Optimizer::new(OptimizerConfig::new(OptimizerKind::Sgda, 0.1, 0.05), &p).unwrap();
        let u = opt.direction(&p, &g);
        for (x, y) in u.flatten().iter().zip(g.flatten()) {
            assert!((x - y).abs() < 1e-12);
        }

        let adam = Optimizer::new(
            OptimizerConfig::new(OptimizerKind::adam_games(), 0.1, 0.05),
            &p,
        )
        .unwrap();
        let before = adam.state().clone();
        let u = adam.direction(&p, &g);
        assert_eq!(adam.state(), &before);
        let mut stepped = adam.clone();
        let next = stepped.step(&p, &g);
        let moved = apply_direction(&p, &u, 0.1, 0.05);
        for (x, y) in moved.w.as_slice().iter().zip(next.w.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in moved.v.as_slice().iter().zip(next.v.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
