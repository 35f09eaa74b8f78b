//! Gradient-descent training of a [`CompiledLoss`] with Gini annealing.
//!
//! Each epoch records the problem loss plus `γ(t) Σ_i (1 - Σ_j x_ij^2)`,
//! backpropagates, and takes an Adam step. Negative `γ` early on rewards
//! fuzzy rows; once `γ` turns positive it pushes rows toward one-hot.
//! Every `snapshot_every` epochs the current `X` is hardened and verified;
//! the best snapshot over all epochs and restarts is returned.

pub mod encoder;
pub mod optim;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use encoder::{Backend, Encoder, EncoderConfig, EncoderError};
pub use optim::{Adam, AdamConfig};

use crate::model::{argmax, Assignment};
use crate::oracle::{self, VerifyReport};
use crate::problems::{CompileError, CompiledLoss, ObjectiveKind, Problem};
use crate::tensor::{Tape, Tensor, TensorError, Var};

/// Default learning rate for the direct backend. Adam moves each logit by
/// roughly the learning rate per step, so the message-passing default of
/// 1e-4 would leave a logit table almost where it started.
pub const DIRECT_LEARNING_RATE: f64 = 0.05;
pub const MESSAGE_PASSING_LEARNING_RATE: f64 = 1e-4;

/// Linear schedule `γ(t) = min(γ0 (1 - t/T0), cap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub gamma0: f64,
    pub zero_epoch: usize,
    /// Defaults to `-γ0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

impl AnnealSchedule {
    pub fn new(gamma0: f64, zero_epoch: usize) -> Self {
        AnnealSchedule {
            gamma0,
            zero_epoch,
            cap: None,
        }
    }

    pub fn cap(&self) -> f64 {
        self.cap.unwrap_or(-self.gamma0)
    }

    pub fn gamma(&self, epoch: usize) -> f64 {
        let t = epoch as f64 / self.zero_epoch as f64;
        (self.gamma0 * (1.0 - t)).min(self.cap())
    }

    fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma0 < 0.0 && self.gamma0.is_finite()) {
            return Err(TrainError::Config(format!(
                "gamma0 must be negative, got {}",
                self.gamma0
            )));
        }
        if self.zero_epoch == 0 {
            return Err(TrainError::Config("zero_epoch must be at least 1".into()));
        }
        if !self.cap().is_finite() {
            return Err(TrainError::Config("gamma cap must be finite".into()));
        }
        Ok(())
    }
}

/// `λ(t) = min(increment * t, cap)`, starting from 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyRamp {
    pub increment: f64,
    pub cap: f64,
}

impl Default for PenaltyRamp {
    fn default() -> Self {
        PenaltyRamp {
            increment: 10.0 / 1000.0,
            cap: 10.0,
        }
    }
}

impl PenaltyRamp {
    pub fn value(&self, epoch: usize) -> f64 {
        (self.increment * epoch as f64).min(self.cap)
    }

    fn validate(&self, name: &str) -> Result<(), TrainError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.increment) || !ok(self.cap) {
            return Err(TrainError::Config(format!(
                "{name} ramp needs finite, nonnegative increment and cap"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    /// `None` keeps `γ ≡ 0`.
    pub anneal: Option<AnnealSchedule>,
    pub lambda1: PenaltyRamp,
    pub lambda2: PenaltyRamp,
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub restarts: usize,
    pub snapshot_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_problem(Problem::MaxCut, Backend::Direct)
    }
}

impl TrainConfig {
    /// Defaults for `problem`: `γ0 = -0.25` and 4 layers for partitioning,
    /// `γ0 = -2.5` and 2 layers otherwise.
    pub fn for_problem(problem: Problem, backend: Backend) -> Self {
        let partition = problem.kind() == ObjectiveKind::Partition;
        let encoder = EncoderConfig {
            backend,
            layers: if partition { 4 } else { 2 },
            ..EncoderConfig::default()
        };
        let learning_rate = match backend {
            Backend::Direct => DIRECT_LEARNING_RATE,
            Backend::MessagePassing => MESSAGE_PASSING_LEARNING_RATE,
        };
        TrainConfig {
            encoder,
            anneal: Some(AnnealSchedule::new(if partition { -0.25 } else { -2.5 }, 1000)),
            lambda1: PenaltyRamp::default(),
            lambda2: PenaltyRamp::default(),
            optimizer: AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
            epochs: 5000,
            restarts: 10,
            snapshot_every: 50,
            seed: 0,
        }
    }

    pub fn gamma(&self, epoch: usize) -> f64 {
        self.anneal.map_or(0.0, |a| a.gamma(epoch))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.encoder.validate()?;
        if let Some(a) = &self.anneal {
            a.validate()?;
        }
        self.lambda1.validate("lambda1")?;
        self.lambda2.validate("lambda2")?;
        let lr = self.optimizer.learning_rate;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate must be positive, got {lr}")));
        }
        if self.restarts == 0 {
            return Err(TrainError::Config("restarts must be at least 1".into()));
        }
        if self.snapshot_every == 0 {
            return Err(TrainError::Config("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("all {0} restarts diverged (non-finite loss)")]
    AllDiverged(usize),
}

/// One epoch of the trace. `metric` is filled on snapshot epochs only:
/// conflicts for coloring, cut size for partitioning and max-cut, set size
/// for MIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub mean_gini: f64,
    pub metric: Option<f64>,
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub seed: u64,
    pub diverged: bool,
    pub feasible: bool,
    pub best_epoch: Option<usize>,
    pub best_report: Option<VerifyReport>,
    pub first_feasible_epoch: Option<usize>,
    pub final_mean_gini: Option<f64>,
    /// Fraction of rows whose largest entry is at least 0.99 at the end.
    pub final_discrete_fraction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub groups: Vec<usize>,
    pub report: VerifyReport,
    pub score: f64,
    pub restart: usize,
    pub epoch: usize,
    pub epochs_to_first_feasible: Option<usize>,
    pub restarts: Vec<RestartSummary>,
    /// Trace of the winning restart.
    pub trace: Vec<TraceRow>,
    /// Relaxed assignment of the winning restart after its last epoch.
    pub relaxed: Tensor,
}

/// `γ Σ_i (1 - Σ_j x_ij^2)`.
pub fn gini_penalty<'t>(x: Var<'t>, gamma: f64) -> Result<Var<'t>, TensorError> {
    let n = x.shape().0 as f64;
    x.mul(x)?.sum()?.scale(-gamma)?.add_scalar(gamma * n)
}

/// `1 - Σ_j x_j^2` per row.
pub fn gini_rows(x: &Tensor) -> Vec<f64> {
    (0..x.rows())
        .map(|r| 1.0 - x.row(r).iter().map(|v| v * v).sum::<f64>())
        .collect()
}

/// Mean row Gini coefficient, in `[0, 1 - 1/k]` for row-stochastic `x`.
pub fn discreteness(x: &Tensor) -> f64 {
    if x.rows() == 0 {
        return 0.0;
    }
    gini_rows(x).iter().sum::<f64>() / x.rows() as f64
}

/// Fraction of rows whose largest entry is at least `threshold`.
pub fn discrete_fraction(x: &Tensor, threshold: f64) -> f64 {
    if x.rows() == 0 {
        return 1.0;
    }
    let hits = (0..x.rows())
        .filter(|&r| x.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max) >= threshold)
        .count();
    hits as f64 / x.rows() as f64
}

/// Per-row argmax with ties to the lowest column.
pub fn harden(x: &Tensor) -> Assignment {
    let groups: Vec<usize> = (0..x.rows()).map(|r| argmax(x.row(r))).collect();
    Assignment::hard(&groups, x.cols()).expect("argmax is in range")
}

/// Problem loss plus Gini penalty for the encoder's current output. Returns
/// `(total, X)`.
pub fn training_loss<'t>(
    loss: &CompiledLoss,
    encoder: &Encoder,
    tape: &'t Tape,
    leaves: &[Var<'t>],
    gamma: f64,
) -> Result<(Var<'t>, Var<'t>), TensorError> {
    let (x, y) = encoder.forward(tape, leaves)?;
    let parts = loss.relaxed(x, y)?;
    let total = parts.total.add(gini_penalty(x, gamma)?)?;
    Ok((total, x))
}

/// Per-restart seeds drawn from a ChaCha stream keyed by `seed`.
pub fn restart_seeds(seed: u64, restarts: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone)]
struct Snapshot {
    groups: Vec<usize>,
    report: VerifyReport,
    score: f64,
    epoch: usize,
}

impl Snapshot {
    /// Feasible first, then fewer violations, then lower score.
    fn beats(&self, other: &Snapshot) -> bool {
        let key = |s: &Snapshot| (!s.report.feasible, s.report.violated_terms);
        match key(self).cmp(&key(other)) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.score < other.score - 1e-12,
        }
    }
}

struct RestartRun {
    summary: RestartSummary,
    best: Option<Snapshot>,
    trace: Vec<TraceRow>,
    relaxed: Option<Tensor>,
}

fn snapshot_metric(report: &VerifyReport) -> f64 {
    match report.problem.kind() {
        ObjectiveKind::Coloring => report.violated_terms as f64,
        ObjectiveKind::Partition | ObjectiveKind::MaxCut => report.cut.unwrap_or(0) as f64,
        ObjectiveKind::Mis => report.set_size.unwrap_or(0) as f64,
    }
}

fn run_restart(base: &CompiledLoss, config: &TrainConfig, seed: u64) -> Result<RestartRun, TrainError> {
    let mut loss = base.clone();
    let problem = loss.problem();
    let mut encoder = Encoder::new(&config.encoder, loss.instance(), loss.k(), loss.uses_color_head(), seed)?;
    let mut adam = Adam::new(config.optimizer, encoder.params());
    let mut trace = Vec::with_capacity(config.epochs + 1);
    let mut best: Option<Snapshot> = None;
    let mut first_feasible = None;
    let mut summary = RestartSummary {
        seed,
        diverged: false,
        feasible: false,
        best_epoch: None,
        best_report: None,
        first_feasible_epoch: None,
        final_mean_gini: None,
        final_discrete_fraction: None,
    };
    let mut last_x = None;

    for epoch in 0..=config.epochs {
        let gamma = config.gamma(epoch);
        let (l1, l2) = (config.lambda1.value(epoch), config.lambda2.value(epoch));
        loss.set_penalties(l1, l2)?;
        let tape = Tape::new();
        let leaves = encoder.leaves(&tape);
        let (total, x) = match training_loss(&loss, &encoder, &tape, &leaves, gamma) {
            Ok(v) => v,
            Err(TensorError::NonFinite { .. }) => {
                summary.diverged = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let xv = x.value();
        let mut row = TraceRow {
            epoch,
            loss: total.item(),
            mean_gini: discreteness(&xv),
            metric: None,
            gamma,
            lambda1: l1,
            lambda2: l2,
        };
        if epoch % config.snapshot_every == 0 || epoch == config.epochs {
            let groups = harden(&xv).groups().expect("hardened");
            let report = oracle::verify_groups(problem, loss.instance(), &groups, loss.k())
                .expect("instance was validated at compile time");
            row.metric = Some(snapshot_metric(&report));
            if report.feasible && first_feasible.is_none() {
                first_feasible = Some(epoch);
            }
            let snap = Snapshot {
                score: loss.hard_score_from_groups(&groups),
                groups,
                report,
                epoch,
            };
            if best.as_ref().is_none_or(|b| snap.beats(b)) {
                best = Some(snap);
            }
        }
        trace.push(row);
        if epoch == config.epochs {
            last_x = Some(xv);
            break;
        }
        let grads = tape.backward(total)?;
        let grads: Vec<Tensor> = leaves.iter().map(|l| grads.wrt(*l)).collect();
        if grads.iter().any(|g| !g.is_finite()) {
            summary.diverged = true;
            break;
        }
        adam.step(encoder.params_mut(), &grads);
    }

    summary.first_feasible_epoch = first_feasible;
    if let Some(b) = &best {
        summary.feasible = b.report.feasible;
        summary.best_epoch = Some(b.epoch);
        summary.best_report = Some(b.report.clone());
    }
    if let Some(x) = &last_x {
        summary.final_mean_gini = Some(discreteness(x));
        summary.final_discrete_fraction = Some(discrete_fraction(x, 0.99));
    }
    Ok(RestartRun {
        summary,
        best,
        trace,
        relaxed: last_x,
    })
}

fn run_all(loss: &CompiledLoss, config: &TrainConfig, seeds: &[u64]) -> Vec<Result<RestartRun, TrainError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| run_restart(loss, config, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.iter().map(|&s| run_restart(loss, config, s)).collect()
    }
}

/// Trains `config.restarts` independent runs and returns the best hardened
/// snapshot: feasible before infeasible, then by the problem's score.
/// Restarts run concurrently when the `parallel` feature is on; results do
/// not depend on scheduling.
pub fn train(loss: &CompiledLoss, config: &TrainConfig) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let seeds = restart_seeds(config.seed, config.restarts);
    let runs = run_all(loss, config, &seeds)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut winner: Option<usize> = None;
    for (i, run) in runs.iter().enumerate() {
        let Some(snap) = &run.best else { continue };
        let better = match winner.and_then(|w| runs[w].best.as_ref()) {
            None => true,
            Some(current) => snap.beats(current),
        };
        if better && !run.summary.diverged {
            winner = Some(i);
        }
    }
    let Some(w) = winner else {
        return Err(TrainError::AllDiverged(runs.len()));
    };
    let restarts: Vec<RestartSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let mut runs = runs;
    let run = runs.swap_remove(w);
    let best = run.best.expect("winner has a snapshot");
    Ok(TrainResult {
        groups: best.groups,
        report: best.report,
        score: best.score,
        restart: w,
        epoch: best.epoch,
        epochs_to_first_feasible: run.summary.first_feasible_epoch,
        restarts,
        trace: run.trace,
        relaxed: run.relaxed.expect("winner ran to completion"),
    })
}

/// Writes a trace as CSV with the header
/// `epoch,loss,mean_gini,metric,gamma,lambda1,lambda2`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("epoch,loss,mean_gini,metric,gamma,lambda1,lambda2\n");
    for r in trace {
        let metric = r.metric.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch, r.loss, r.mean_gini, metric, r.gamma, r.lambda1, r.lambda2
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::Graph;
    use crate::problems::{compile, CompileOptions};
    use crate::tensor::gradcheck::{central_difference, max_relative_error};

    #[test]
    fn gamma_schedule_is_linear_and_capped() {
        let s = AnnealSchedule::new(-2.5, 1000);
        assert_eq!(s.gamma(0), -2.5);
        assert_eq!(s.gamma(1000), 0.0);
        assert_eq!(s.gamma(500), -1.25);
        assert_eq!(s.gamma(1500), 1.25);
        assert_eq!(s.gamma(2000), 2.5);
        assert_eq!(s.gamma(5000), 2.5);
        let mut prev = f64::NEG_INFINITY;
        for t in 0..3000 {
            assert!(s.gamma(t) >= prev);
            prev = s.gamma(t);
        }
    }

    #[test]
    fn penalty_ramp() {
        let r = PenaltyRamp::default();
        assert_eq!(r.value(0), 0.0);
        assert!((r.value(500) - 5.0).abs() < 1e-12);
        assert_eq!(r.value(5000), 10.0);
    }

    #[test]
    fn gini_values() {
        let one_hot = Tensor::from_rows(&[[0.0, 1.0, 0.0, 0.0]]);
        assert_eq!(gini_rows(&one_hot), vec![0.0]);
        assert_eq!(gini_rows(&Tensor::filled(1, 4, 0.25)), vec![0.75]);
        assert_eq!(gini_rows(&Tensor::from_rows(&[[0.5, 0.5, 0.0, 0.0]])), vec![0.5]);
        assert_eq!(discreteness(&Tensor::filled(3, 2, 0.5)), 0.5);
        let tape = Tape::new();
        let x = tape.leaf(Tensor::filled(2, 4, 0.25));
        let p = gini_penalty(x, 2.0).unwrap();
        assert!((p.item() - 3.0).abs() < 1e-15);
        let g = tape.backward(p).unwrap().wrt(x);
        assert!(g.data().iter().all(|&v| v == g.data()[0]));
    }

    #[test]
    fn harden_examples() {
        let x = Tensor::from_rows(&[[0.1, 0.7, 0.2], [0.5, 0.5, 0.0]]);
        assert_eq!(harden(&x).groups().unwrap(), vec![1, 0]);
        let h = harden(&x);
        assert_eq!(harden(h.matrix()), h);
        assert_eq!(discreteness(h.matrix()), 0.0);
    }

    #[test]
    fn full_training_loss_gradients() {
        let g = Graph::cycle(5);
        for backend in [Backend::Direct, Backend::MessagePassing] {
            let mut loss = compile(crate::problems::Problem::GraphColoring, &g, &CompileOptions::default()).unwrap();
            loss.set_penalties(2.0, 0.5).unwrap();
            let config = EncoderConfig {
                backend,
                hidden_dim: 4,
                feature_dim: 3,
                init_scale: 0.7,
                ..Default::default()
            };
            let enc = Encoder::new(&config, &g, loss.k(), true, 4).unwrap();
            let numeric = central_difference(
                |p: &[Tensor]| {
                    let tape = Tape::new();
                    let leaves: Vec<_> = p.iter().map(|t| tape.leaf(t.clone())).collect();
                    training_loss(&loss, &enc, &tape, &leaves, 1.3).unwrap().0.item()
                },
                enc.params(),
                1e-5,
            );
            let tape = Tape::new();
            let leaves = enc.leaves(&tape);
            let (total, _) = training_loss(&loss, &enc, &tape, &leaves, 1.3).unwrap();
            let grads = tape.backward(total).unwrap();
            for (leaf, num) in leaves.iter().zip(&numeric) {
                assert!(max_relative_error(&grads.wrt(*leaf), num, 1e-6) < 1e-4, "{backend:?}");
            }
        }
    }

    #[test]
    fn single_edge_maxcut_and_determinism() {
        let loss = compile(
            crate::problems::Problem::MaxCut,
            &Graph::path(2),
            &CompileOptions::default(),
        )
        .unwrap();
        let config = TrainConfig {
            epochs: 300,
            restarts: 3,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(&loss, &config).unwrap();
        assert_eq!(a.report.cut, Some(1));
        let b = train(&loss, &config).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.groups, b.groups);
        assert_eq!(a.trace.len(), 301);
        assert!(a.trace[0].metric.is_some() && a.trace[1].metric.is_none());
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            restarts: 0,
            ..TrainConfig::default()
        };
        let loss = compile(
            crate::problems::Problem::MaxCut,
            &Graph::path(2),
            &CompileOptions::default(),
        )
        .unwrap();
        assert!(matches!(train(&loss, &bad), Err(TrainError::Config(_))));
        let bad_gamma = TrainConfig {
            anneal: Some(AnnealSchedule::new(1.0, 10)),
            ..TrainConfig::default()
        };
        assert!(bad_gamma.validate().is_err());
    }

    #[test]
    fn trace_csv_header() {
        let csv = trace_csv(&[TraceRow {
            epoch: 0,
            loss: 1.5,
            mean_gini: 0.5,
            metric: None,
            gamma: -2.5,
            lambda1: 0.0,
            lambda2: 0.0,
        }]);
        assert_eq!(
            csv,
            "epoch,loss,mean_gini,metric,gamma,lambda1,lambda2\n0,1.5,0.5,,-2.5,0,0\n"
        );
    }

    #[test]
    fn restart_seeds_are_deterministic() {
        assert_eq!(restart_seeds(5, 4), restart_seeds(5, 4));
        assert_ne!(restart_seeds(5, 4), restart_seeds(6, 4));
    }
}
