//! Experiment configuration, presets, the training loop, sweeps, and CSV/JSON
//! persistence.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_regime, classify_run, default_margin, gradient_ratio, mode_correlations,
    noise_residual, relative_updates, MetricsRow, Regime, RunVerdict, Thresholds, VerdictLabel,
};
use crate::distributions::{
    DataDistribution, DataVariant, Latent, LatentDistribution, OutcomeTable,
};
use crate::error::{LabError, Result};
use crate::gradients::{expected_gradient, global_norm, sample_gradient};
use crate::model::{discriminator_forward, generator_forward, log_sigmoid, GanParams};
use crate::numerics::{decompose_labeled, gaussian_vec, Matrix, RngStream};
use crate::optimizers::{NormScope, Optimizer, OptimizerConfig, OptimizerKind};
use crate::par;

const STREAM_MODES: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_DATA: u64 = 3;
const STREAM_LATENT: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitVariances {
    pub a_var: f64,
    pub w_var: f64,
    pub v_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum StopRule {
    /// Stop at the first metric row whose expected-gradient norm is `≤ tol`.
    GradNorm { tol: f64 },
    /// Run exactly `t1` iterations (capped by `max_iters`).
    FixedBudget { t1: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub m_d: usize,
    pub m_g: usize,
    pub gamma: f64,
    pub data_variant: DataVariant,
    pub p_pair: f64,
    /// Activation truncation; `null` means the plain cubic.
    pub lambda: Option<f64>,
    pub tau_b: f64,
    pub init_variances: InitVariances,
    pub optimizer: OptimizerConfig,
    pub max_iters: u64,
    pub stop: StopRule,
    pub metric_stride: u64,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Margin for the regime classifier; `null` means `ln d`.
    #[serde(default)]
    pub regime_margin: Option<f64>,
    /// Attach basis decompositions of every weight row to each metrics row.
    #[serde(default)]
    pub record_basis: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m_d == 0 || self.m_g == 0 {
            return Err(LabError::Config("d, m_D and m_G must be positive".into()));
        }
        if !(self.m_d <= self.m_g && self.m_g <= self.d) {
            return Err(LabError::Config(format!(
                "need m_D <= m_G <= d, got m_D={}, m_G={}, d={}",
                self.m_d, self.m_g, self.d
            )));
        }
        if let Some(l) = self.lambda {
            if l.is_nan() || l <= 0.0 {
                return Err(LabError::Config(format!(
                    "Lambda must be positive, got {l}"
                )));
            }
        }
        let iv = self.init_variances;
        for (name, x) in [
            ("tau_b", self.tau_b),
            ("a_var", iv.a_var),
            ("w_var", iv.w_var),
            ("v_var", iv.v_var),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(LabError::Config(format!(
                    "{name} must be positive, got {x}"
                )));
            }
        }
        if self.metric_stride == 0 {
            return Err(LabError::Config("metric_stride must be positive".into()));
        }
        match self.stop {
            StopRule::GradNorm { tol } if tol.is_nan() || tol <= 0.0 => {
                return Err(LabError::Config(format!("tol must be positive, got {tol}")));
            }
            _ => {}
        }
        if let Some(m) = self.regime_margin {
            if m.is_nan() || m < 1.0 {
                return Err(LabError::Config(format!(
                    "regime_margin must be at least 1, got {m}"
                )));
            }
        }
        self.optimizer.validate()?;
        self.thresholds.validate()?;
        LatentDistribution::new(self.m_g, self.p_pair)?;
        if !(0.0..=0.5).contains(&self.gamma) {
            return Err(LabError::Domain(format!(
                "gamma must lie in [0, 1/2], got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn margin(&self) -> f64 {
        self.regime_margin.unwrap_or_else(|| default_margin(self.d))
    }

    /// Iterations the run may take at most.
    pub fn budget(&self) -> u64 {
        match self.stop {
            StopRule::GradNorm { .. } => self.max_iters,
            StopRule::FixedBudget { t1 } => t1.min(self.max_iters),
        }
    }

    pub fn data_distribution(&self) -> Result<DataDistribution> {
        let mut rng = RngStream::new(self.seed, STREAM_MODES);
        DataDistribution::random(self.d, self.gamma, self.data_variant, &mut rng)
    }

    pub fn latent_distribution(&self) -> Result<LatentDistribution> {
        LatentDistribution::new(self.m_g, self.p_pair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    SgdaBalanced,
    SgdaDiscFast,
    SgdaGenFast,
    Nsgda,
    AdamGames,
    AdaNsgda,
    AdaDir,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::SgdaBalanced,
        Preset::SgdaDiscFast,
        Preset::SgdaGenFast,
        Preset::Nsgda,
        Preset::AdamGames,
        Preset::AdaNsgda,
        Preset::AdaDir,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SgdaBalanced => "SgdaBalanced",
            Preset::SgdaDiscFast => "SgdaDiscFast",
            Preset::SgdaGenFast => "SgdaGenFast",
            Preset::Nsgda => "Nsgda",
            Preset::AdamGames => "AdamGames",
            Preset::AdaNsgda => "AdaNsgda",
            Preset::AdaDir => "AdaDir",
        }
    }
}

impl FromStr for Preset {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabError::Config(format!("unknown preset {s:?}")))
    }
}

/// Nsgda fixed budget is `T1 = ⌈T1_MULTIPLIER / η_D⌉`.
pub const T1_MULTIPLIER: f64 = 60.0;
pub const SGDA_TOL: f64 = 1e-6;
pub const NSGDA_ETA_D: f64 = 0.05;
/// Shared by the Adam, Ada-nSGDA and AdaDir presets. Large enough that AdaDir
/// blows up within the budget while the other two stay finite.
pub const ADAPTIVE_ETA_D: f64 = 0.5;
pub const SGDA_MAX_ITERS: u64 = 1_000_000;

pub fn t1_for(eta_d: f64, multiplier: f64) -> u64 {
    (multiplier / eta_d).ceil() as u64
}

/// Step sizes `(η_D, η_G)` of the SGDA presets.
pub fn sgda_step_sizes(preset: Preset) -> Option<(f64, f64)> {
    match preset {
        Preset::SgdaBalanced => Some((0.001, 0.003)),
        Preset::SgdaDiscFast => Some((0.001, 0.0001)),
        Preset::SgdaGenFast => Some((0.0001, 0.3)),
        _ => None,
    }
}

pub fn preset(p: Preset) -> ExperimentConfig {
    let d = 100usize;
    let m_d = 5usize;
    let ln = (d as f64).ln();
    let (optimizer, stop, max_iters, stride) = match p {
        Preset::SgdaBalanced | Preset::SgdaDiscFast | Preset::SgdaGenFast => {
            let (eta_d, eta_g) = sgda_step_sizes(p).expect("sgda preset");
            (
                OptimizerConfig::new(OptimizerKind::Sgda, eta_d, eta_g),
                StopRule::GradNorm { tol: SGDA_TOL },
                SGDA_MAX_ITERS,
                1000,
            )
        }
        _ => {
            let kind = match p {
                Preset::Nsgda => OptimizerKind::Nsgda {
                    scope: NormScope::Global,
                },
                Preset::AdamGames => OptimizerKind::adam_games(),
                Preset::AdaNsgda => OptimizerKind::ada_nsgda(),
                _ => OptimizerKind::ada_dir(),
            };
            let t1 = t1_for(NSGDA_ETA_D, T1_MULTIPLIER);
            let eta_d = if p == Preset::Nsgda {
                NSGDA_ETA_D
            } else {
                ADAPTIVE_ETA_D
            };
            (
                OptimizerConfig::new(kind, eta_d, eta_d / 2.0),
                StopRule::FixedBudget { t1 },
                t1,
                50,
            )
        }
    };
    ExperimentConfig {
        d,
        m_d,
        m_g: 10,
        gamma: 0.1,
        data_variant: DataVariant::CorrelatedCoefficients,
        p_pair: 0.05,
        lambda: Some((d as f64).powf(0.2)),
        tau_b: 1.0 / ((d as f64).sqrt() * ln),
        init_variances: InitVariances {
            a_var: 1.0 / (m_d as f64 * ln * ln),
            w_var: 1.0 / d as f64,
            v_var: 1.0 / (d * d) as f64,
        },
        optimizer,
        max_iters,
        stop,
        metric_stride: stride,
        seed: 0,
        thresholds: Thresholds::default(),
        regime_margin: None,
        record_basis: false,
    }
}

/// `v_j ~ N(0, v_var I)`, `w_i ~ N(0, w_var I)`, `a ~ N(0, a_var)`, `b = 0`.
pub fn init_params(cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<GanParams> {
    let iv = cfg.init_variances;
    let v: Vec<Vec<f64>> = (0..cfg.m_g)
        .map(|_| gaussian_vec(rng, cfg.d, iv.v_var))
        .collect::<Result<_>>()?;
    let w: Vec<Vec<f64>> = (0..cfg.m_d)
        .map(|_| gaussian_vec(rng, cfg.d, iv.w_var))
        .collect::<Result<_>>()?;
    let a = rng.normal(iv.a_var);
    GanParams::new(
        Matrix::from_rows(&v)?,
        Matrix::from_rows(&w)?,
        a,
        0.0,
        cfg.tau_b,
        cfg.lambda.unwrap_or(f64::INFINITY),
    )
}

/// Parameters at `t = 0` for `cfg.seed`.
pub fn initial_params(cfg: &ExperimentConfig) -> Result<GanParams> {
    init_params(cfg, &mut RngStream::new(cfg.seed, STREAM_INIT))
}

/// Exact `E[L]` under the enumerated laws.
pub fn expected_loss(
    params: &GanParams,
    data: &OutcomeTable<Vec<f64>>,
    latent: &OutcomeTable<Latent>,
) -> Result<f64> {
    let mut real = 0.0;
    for (x, p) in data.iter() {
        real += p * log_sigmoid(discriminator_forward(params, x)?.f);
    }
    let mut fake = 0.0;
    for (z, p) in latent.iter() {
        let g = generator_forward(params, z)?;
        fake += p * log_sigmoid(-discriminator_forward(params, &g)?.f);
    }
    Ok(real + fake)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t")]
pub enum StopReason {
    Converged(u64),
    BudgetExhausted(u64),
    Diverged(u64),
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged(_) => "Converged",
            StopReason::BudgetExhausted(_) => "BudgetExhausted",
            StopReason::Diverged(_) => "Diverged",
        }
    }

    pub fn t(self) -> u64 {
        match self {
            StopReason::Converged(t) | StopReason::BudgetExhausted(t) | StopReason::Diverged(t) => {
                t
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
    pub verdict: RunVerdict,
    pub stop_reason: StopReason,
    pub wall_time: f64,
    pub init_params: GanParams,
    /// Last finite parameters (the pre-divergence state for diverged runs).
    pub final_params: GanParams,
    pub modes: [Vec<f64>; 2],
}

impl RunRecord {
    pub fn final_row(&self) -> &MetricsRow {
        self.rows
            .last()
            .expect("a run always records at least one row")
    }
}

struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    data: OutcomeTable<Vec<f64>>,
    latent: OutcomeTable<Latent>,
    modes: [Vec<f64>; 2],
    g0: crate::gradients::GradientBundle,
    init: GanParams,
}

impl Evaluator<'_> {
    fn row(&self, t: u64, params: &GanParams, opt: &Optimizer) -> Result<MetricsRow> {
        let g = expected_gradient(params, &self.data, &self.latent)?;
        let u = opt.direction(params, &g);
        let (rel_d, rel_g) = relative_updates(params, &u, opt.config());
        let modes = [self.modes[0].as_slice(), self.modes[1].as_slice()];
        let (corr_w, corr_v, _) = mode_correlations(params, modes);
        let basis_coeffs = if self.cfg.record_basis {
            Some(self.basis(params)?)
        } else {
            None
        };
        Ok(MetricsRow {
            t,
            loss_exp: expected_loss(params, &self.data, &self.latent)?,
            a: params.a,
            b: params.b,
            rel_update_d: rel_d,
            rel_update_g: rel_g,
            grad_ratio: gradient_ratio(&g, &self.g0).unwrap_or(f64::NAN),
            corr_w,
            corr_v,
            grad_norm: global_norm(&g),
            basis_coeffs,
        })
    }

    /// Every `w_i` and `v_j` in `span{w(0), v(0), u1, u2}`.
    fn basis(&self, params: &GanParams) -> Result<Vec<crate::numerics::BasisDecomposition>> {
        let mut basis: Vec<&[f64]> = Vec::new();
        let mut labels = Vec::new();
        for (i, w) in self.init.w.row_iter().enumerate() {
            basis.push(w);
            labels.push(format!("w0_{i}"));
        }
        for (j, v) in self.init.v.row_iter().enumerate() {
            basis.push(v);
            labels.push(format!("v0_{j}"));
        }
        basis.push(&self.modes[0]);
        labels.push("u1".into());
        basis.push(&self.modes[1]);
        labels.push("u2".into());
        params
            .w
            .row_iter()
            .chain(params.v.row_iter())
            .map(|r| decompose_labeled(r, &basis, labels.clone()))
            .collect()
    }
}

/// Runs one experiment to completion. Divergence is recorded, not raised.
pub fn train(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let data_dist = cfg.data_distribution()?;
    let latent_dist = cfg.latent_distribution()?;
    let init = initial_params(cfg)?;
    let mut opt = Optimizer::new(cfg.optimizer, &init)?;
    let data = data_dist.enumerate();
    let latent = latent_dist.enumerate();
    let g0 = expected_gradient(&init, &data, &latent)?;
    let ev = Evaluator {
        cfg,
        data,
        latent,
        modes: [data_dist.u1().to_vec(), data_dist.u2().to_vec()],
        g0,
        init: init.clone(),
    };

    let mut data_rng = RngStream::new(cfg.seed, STREAM_DATA);
    let mut latent_rng = RngStream::new(cfg.seed, STREAM_LATENT);
    let mut params = init.clone();
    let mut rows = vec![ev.row(0, &params, &opt)?];
    let budget = cfg.budget();
    let tol = match cfg.stop {
        StopRule::GradNorm { tol } => Some(tol),
        StopRule::FixedBudget { .. } => None,
    };
    let mut stop = StopReason::BudgetExhausted(0);
    if tol.is_some_and(|tol| rows[0].grad_norm <= tol) {
        stop = StopReason::Converged(0);
    } else {
        for t in 1..=budget {
            let x = data_dist.sample(&mut data_rng);
            let z = latent_dist.sample(&mut latent_rng);
            let g = sample_gradient(&params, &x, &z)?;
            let next = opt.step(&params, &g);
            if !next.is_finite() {
                if rows.last().map(|r| r.t) != Some(t - 1) {
                    rows.push(ev.row(t - 1, &params, &opt)?);
                }
                stop = StopReason::Diverged(t);
                break;
            }
            params = next;
            if t % cfg.metric_stride == 0 || t == budget {
                let row = ev.row(t, &params, &opt)?;
                let converged = tol.is_some_and(|tol| row.grad_norm <= tol);
                rows.push(row);
                if converged {
                    stop = StopReason::Converged(t);
                    break;
                }
            }
            if t == budget {
                stop = StopReason::BudgetExhausted(t);
            }
        }
    }

    let modes = [ev.modes[0].as_slice(), ev.modes[1].as_slice()];
    let mut verdict = classify_run(&params, modes, &ev.latent, &cfg.thresholds)?;
    verdict.regime = Some(classify_regime(&cfg.optimizer, &init, modes, cfg.margin()));
    verdict.noise_residual = Some(noise_residual(&params, &init)?);
    let modes = ev.modes.clone();
    Ok(RunRecord {
        config: cfg.clone(),
        rows,
        verdict,
        stop_reason: stop,
        wall_time: start.elapsed().as_secs_f64(),
        init_params: init,
        final_params: params,
        modes,
    })
}

/// Regime of `cfg` at its own initialization.
pub fn regime_of(cfg: &ExperimentConfig) -> Result<Regime> {
    let init = initial_params(cfg)?;
    let data = cfg.data_distribution()?;
    Ok(classify_regime(
        &cfg.optimizer,
        &init,
        data.modes(),
        cfg.margin(),
    ))
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(LabError::Config(format!("bad grid [{lo}, {hi}] x {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (l, h) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (l + (h - l) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(rename = "eta_D_grid")]
    pub eta_d_grid: Vec<f64>,
    #[serde(rename = "eta_G_grid")]
    pub eta_g_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: ExperimentConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eta_d_grid.is_empty() || self.eta_g_grid.is_empty() || self.seeds.is_empty() {
            return Err(LabError::Config(
                "sweep grids and seeds must be nonempty".into(),
            ));
        }
        self.base.validate()
    }

    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &eta_d in &self.eta_d_grid {
            for &eta_g in &self.eta_g_grid {
                for &seed in &self.seeds {
                    let mut c = self.base.clone();
                    c.optimizer.eta_d = eta_d;
                    c.optimizer.eta_g = eta_g;
                    c.seed = seed;
                    out.push(c);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub eta_d: f64,
    pub eta_g: f64,
    pub seed: u64,
    pub outcome: std::result::Result<RunRecord, String>,
}

/// One `train` per `(η_D, η_G, seed)`, in grid order. Cells run in parallel
/// when the `parallel` feature is on; a failing cell is recorded and the
/// sweep continues.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    Ok(par::map(&spec.cells(), |c| SweepCell {
        eta_d: c.optimizer.eta_d,
        eta_g: c.optimizer.eta_g,
        seed: c.seed,
        outcome: train(c).map_err(|e| e.to_string()),
    }))
}

/// Majority verdict and mean final gradient ratio of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub eta_d: f64,
    pub eta_g: f64,
    pub majority: Option<VerdictLabel>,
    pub mean_grad_ratio: f64,
    pub regimes: Vec<Regime>,
    pub failures: usize,
}

pub fn summarize(cells: &[SweepCell]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    let mut groups: Vec<(f64, f64, Vec<&SweepCell>)> = Vec::new();
    for c in cells {
        match groups.iter_mut().find(|g| g.0 == c.eta_d && g.1 == c.eta_g) {
            Some(g) => g.2.push(c),
            None => groups.push((c.eta_d, c.eta_g, vec![c])),
        }
    }
    for (eta_d, eta_g, members) in groups {
        let ok: Vec<&RunRecord> = members
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok())
            .collect();
        let mut counts: Vec<(VerdictLabel, usize)> = Vec::new();
        for r in &ok {
            match counts.iter_mut().find(|(l, _)| *l == r.verdict.label) {
                Some(e) => e.1 += 1,
                None => counts.push((r.verdict.label, 1)),
            }
        }
        let majority = counts.iter().max_by_key(|(_, n)| *n).map(|(l, _)| *l);
        let ratios: Vec<f64> = ok.iter().map(|r| r.final_row().grad_ratio).collect();
        let mut regimes: Vec<Regime> = ok.iter().filter_map(|r| r.verdict.regime).collect();
        regimes.dedup();
        out.push(CellSummary {
            eta_d,
            eta_g,
            majority,
            mean_grad_ratio: if ratios.is_empty() {
                f64::NAN
            } else {
                ratios.iter().sum::<f64>() / ratios.len() as f64
            },
            regimes,
            failures: members.len() - ok.len(),
        });
    }
    out
}

/// Header of the per-run CSV.
pub fn run_csv_header(m_d: usize, m_g: usize) -> String {
    let mut h = String::from("t,loss_exp,a,b,rel_update_D,rel_update_G,grad_ratio");
    for i in 0..m_d {
        for l in 1..=2 {
            write!(h, ",corr_w_{i}_{l}").unwrap();
        }
    }
    for j in 0..m_g {
        for l in 1..=2 {
            write!(h, ",corr_v_{j}_{l}").unwrap();
        }
    }
    h
}

pub fn run_csv(record: &RunRecord) -> String {
    let cfg = &record.config;
    let mut s = run_csv_header(cfg.m_d, cfg.m_g);
    s.push('\n');
    for r in &record.rows {
        write!(
            s,
            "{},{},{},{},{},{},{}",
            r.t, r.loss_exp, r.a, r.b, r.rel_update_d, r.rel_update_g, r.grad_ratio
        )
        .unwrap();
        for c in r.corr_w.iter().chain(&r.corr_v) {
            write!(s, ",{},{}", c[0], c[1]).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Contents of `verdict.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    #[serde(flatten)]
    pub verdict: RunVerdict,
    pub stop_reason: StopReason,
    pub seed: u64,
}

/// Writes `run_<seed>.csv` and `verdict.json` into `dir`.
pub fn write_run(record: &RunRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join(format!("run_{}.csv", record.config.seed)),
        run_csv(record),
    )?;
    let v = VerdictFile {
        verdict: record.verdict.clone(),
        stop_reason: record.stop_reason,
        seed: record.config.seed,
    };
    std::fs::write(
        dir.join("verdict.json"),
        serde_json::to_string_pretty(&v)? + "\n",
    )?;
    Ok(())
}

pub const SWEEP_CSV_HEADER: &str =
    "eta_D,eta_G,seed,verdict,collapse_cosine,coverage_u1,coverage_u2,final_grad_ratio,stop_reason";

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for c in cells {
        match &c.outcome {
            Ok(r) => {
                let v = &r.verdict;
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    c.eta_d,
                    c.eta_g,
                    c.seed,
                    v.label.as_str(),
                    v.collapse_cosine,
                    v.per_mode_coverage[0],
                    v.per_mode_coverage[1],
                    r.final_row().grad_ratio,
                    r.stop_reason.as_str()
                )
                .unwrap();
            }
            Err(_) => {
                writeln!(
                    s,
                    "{},{},{},Error,NaN,NaN,NaN,NaN,Error",
                    c.eta_d, c.eta_g, c.seed
                )
                .unwrap();
            }
        }
    }
    s
}

/// Per-cell detail for `sweep.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCellReport {
    #[serde(rename = "eta_D")]
    pub eta_d: f64,
    #[serde(rename = "eta_G")]
    pub eta_g: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Writes `sweep.csv` and `sweep.json`.
pub fn write_sweep(cells: &[SweepCell], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), sweep_csv(cells))?;
    let reports: Vec<SweepCellReport> = cells
        .iter()
        .map(|c| SweepCellReport {
            eta_d: c.eta_d,
            eta_g: c.eta_g,
            seed: c.seed,
            verdict: c.outcome.as_ref().ok().map(|r| VerdictFile {
                verdict: r.verdict.clone(),
                stop_reason: r.stop_reason,
                seed: c.seed,
            }),
            error: c.outcome.as_ref().err().cloned(),
        })
        .collect();
    std::fs::write(
        dir.join("sweep.json"),
        serde_json::to_string_pretty(&reports)? + "\n",
    )?;
    Ok(())
}
