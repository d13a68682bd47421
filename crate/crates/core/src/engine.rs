//! Client and server loops of the local update procedure.
//!
//! Each round the server broadcasts `x_t`, a set of clients runs
//! [`client_update`] from it, and the averaged pseudo-gradient `q_t` is fed
//! to a server optimizer (plain gradient descent, heavy-ball or Nesterov).

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix;
use crate::rng;
use crate::scheme::WeightScheme;
use crate::world::{ClientModel, Population};

const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Mini-batch gradients and sampled clients.
    Stochastic,
    /// Full gradients, every client participates with its weight.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub theta: WeightScheme,
    pub clients_per_round: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub seed: u64,
    pub mode: RunMode,
}

impl RunConfig {
    /// Full-participation, full-gradient configuration.
    pub fn deterministic(pop: &Population, alpha: f64, gamma: f64, theta: WeightScheme, rounds: usize) -> Self {
        Self { alpha, gamma, theta, clients_per_round: pop.len(), batch_size: 1, rounds, seed: 0, mode: RunMode::Deterministic }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.mode == RunMode::Stochastic && (self.clients_per_round == 0 || self.batch_size == 0) {
            return Err(Error::InvalidInput("clients_per_round and batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Plain,
    Nesterov,
    HeavyBall,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [OptimizerKind::Plain, OptimizerKind::Nesterov, OptimizerKind::HeavyBall];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Plain => "plain",
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::HeavyBall => "heavy_ball",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plain" | "none" | "gd" => Some(OptimizerKind::Plain),
            "nesterov" => Some(OptimizerKind::Nesterov),
            "heavy_ball" | "heavy-ball" | "heavyball" => Some(OptimizerKind::HeavyBall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerOptSpec {
    pub kind: OptimizerKind,
    pub step: f64,
    pub momentum: f64,
    pub auto_tune: bool,
}

impl ServerOptSpec {
    pub fn plain(step: f64) -> Self {
        Self { kind: OptimizerKind::Plain, step, momentum: 0.0, auto_tune: false }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!("server step must be positive, got {}", self.step)));
        }
        if self.kind != OptimizerKind::Plain && !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Classical tuning for a quadratic with Hessian spectrum in `[μ̃, L̃]`.
pub fn auto_tune(kind: OptimizerKind, l_tilde: f64, mu_tilde: f64) -> Result<ServerOptSpec> {
    if !(mu_tilde > 0.0 && mu_tilde <= l_tilde && l_tilde.is_finite()) {
        return Err(Error::InvalidInput(format!("auto-tune needs 0 < mu <= L, got mu = {mu_tilde}, L = {l_tilde}")));
    }
    let kappa = l_tilde / mu_tilde;
    let (step, momentum) = match kind {
        OptimizerKind::Plain => (2.0 / (l_tilde + mu_tilde), 0.0),
        OptimizerKind::HeavyBall => {
            let s = l_tilde.sqrt() + mu_tilde.sqrt();
            let r = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
            (4.0 / (s * s), r * r)
        }
        OptimizerKind::Nesterov => {
            let q = (3.0 * kappa + 1.0).sqrt();
            (4.0 / (3.0 * l_tilde + mu_tilde), (q - 2.0) / (q + 2.0))
        }
    };
    Ok(ServerOptSpec { kind, step, momentum, auto_tune: true })
}

/// Algorithm 2: `K(Θ)` local steps with optional proximal term; returns
/// `Σ_k θ_k g_k`.
///
/// Deterministic mode uses full gradients and ignores `stream`. Stochastic
/// mode draws each mini-batch without replacement from the client's
/// examples.
pub fn client_update(client: &ClientModel, x: &[f64], cfg: &RunConfig, stream: &mut rng::Stream) -> Result<Vec<f64>> {
    if x.len() != client.dim() {
        return Err(Error::DimensionMismatch { expected: client.dim(), found: x.len() });
    }
    let examples = match cfg.mode {
        RunMode::Deterministic => None,
        RunMode::Stochastic => {
            let ex = client.examples().filter(|e| !e.is_empty()).ok_or(Error::EmptyExamples { client: 0 })?;
            if cfg.batch_size > ex.len() {
                return Err(Error::InvalidInput(format!(
                    "batch size {} exceeds the client's {} examples",
                    cfg.batch_size,
                    ex.len()
                )));
            }
            Some(ex)
        }
    };
    let k_total = cfg.theta.size();
    let mut xk = x.to_vec();
    let mut out = vec![0.0; x.len()];
    for k in 1..=k_total {
        let mut g = match examples {
            None => client.gradient(&xk),
            Some(ex) => {
                let mut g = vec![0.0; x.len()];
                let scale = 1.0 / cfg.batch_size as f64;
                for i in index::sample(stream, ex.len(), cfg.batch_size) {
                    matrix::axpy(&mut g, scale, &ex[i].gradient(&xk));
                }
                g
            }
        };
        if cfg.alpha != 0.0 {
            for ((gi, xi), x0) in g.iter_mut().zip(&xk).zip(x) {
                *gi += cfg.alpha * (xi - x0);
            }
        }
        let theta = cfg.theta.coefficient(k);
        if theta != 0.0 {
            matrix::axpy(&mut out, theta, &g);
        }
        if k < k_total {
            matrix::axpy(&mut xk, -cfg.gamma, &g);
        }
    }
    Ok(out)
}

/// Exact MAML meta-gradient after `k` (proximal) adaptation steps, with full
/// gradients: adapt, take the gradient at the adapted point, then
/// back-propagate it through every adaptation step.
pub fn client_update_maml(client: &ClientModel, x: &[f64], k: u64, gamma: f64, alpha: f64) -> Result<Vec<f64>> {
    if x.len() != client.dim() {
        return Err(Error::DimensionMismatch { expected: client.dim(), found: x.len() });
    }
    if k == 0 {
        return Err(Error::InvalidInput("MAML needs at least one adaptation step".into()));
    }
    let a = client.a_matrix();
    let prox_gradient = |y: &[f64]| {
        let mut g = client.gradient(y);
        if alpha != 0.0 {
            for ((gi, yi), x0) in g.iter_mut().zip(y).zip(x) {
                *gi += alpha * (yi - x0);
            }
        }
        g
    };
    let mut y = x.to_vec();
    for _ in 0..k {
        let g = prox_gradient(&y);
        matrix::axpy(&mut y, -gamma, &g);
    }
    // The meta-objective is the regularized loss at the adapted point, so the
    // outer gradient starts from the same proximal gradient.
    let mut g = prox_gradient(&y);
    for _ in 0..k {
        let ag = a.matvec(&g)?;
        for (gi, agi) in g.iter_mut().zip(&ag) {
            *gi -= gamma * (agi + alpha * *gi);
        }
    }
    Ok(g)
}

/// Momentum memory carried between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub previous: Option<Vec<f64>>,
}

impl OptState {
    pub fn new() -> Self {
        Self { previous: None }
    }
}

impl Default for OptState {
    fn default() -> Self {
        Self::new()
    }
}

/// Averaged pseudo-gradient `q_t` at `x` for round `round`.
pub fn pseudo_gradient(pop: &Population, x: &[f64], cfg: &RunConfig, round: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dim = pop.dim();
    let (chosen, scales): (Vec<usize>, Vec<f64>) = match cfg.mode {
        RunMode::Deterministic => ((0..pop.len()).collect(), pop.weights().to_vec()),
        RunMode::Stochastic => {
            let m = cfg.clients_per_round;
            if m > pop.len() {
                return Err(Error::TooManyClients { requested: m, available: pop.len() });
            }
            let mut stream = rng::child(cfg.seed, rng::stream_id(round as u64, u64::MAX));
            let chosen = sample_weighted(pop.weights(), m, &mut stream)?;
            (chosen, vec![1.0 / m as f64; m])
        }
    };
    let updates: Vec<Result<Vec<f64>>> = chosen
        .par_iter()
        .map(|&i| {
            let mut stream = rng::child(cfg.seed, rng::stream_id(round as u64, i as u64));
            client_update(&pop.clients()[i], x, cfg, &mut stream).map_err(|e| match e {
                Error::EmptyExamples { .. } => Error::EmptyExamples { client: i },
                other => other,
            })
        })
        .collect();
    let mut q = vec![0.0; dim];
    for (u, s) in updates.into_iter().zip(scales) {
        matrix::axpy(&mut q, s, &u?);
    }
    Ok(q)
}

/// `m` distinct indices drawn one at a time proportionally to the remaining
/// weights.
fn sample_weighted(weights: &[f64], m: usize, stream: &mut rng::Stream) -> Result<Vec<usize>> {
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    if m > positive {
        return Err(Error::TooManyClients { requested: m, available: positive });
    }
    let mut remaining: Vec<f64> = weights.to_vec();
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = remaining.iter().sum();
        let mut u = stream.gen::<f64>() * total;
        let mut pick = None;
        for (i, w) in remaining.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            pick = Some(i);
            if u < *w {
                break;
            }
            u -= w;
        }
        let i = pick.expect("at least one positive weight remains");
        remaining[i] = 0.0;
        chosen.push(i);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// One server step. Returns `x_{t+1}` and the pseudo-gradient used.
pub fn server_round(
    pop: &Population,
    x: &[f64],
    cfg: &RunConfig,
    opt: &ServerOptSpec,
    state: &mut OptState,
    round: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    opt.validate()?;
    let previous = state.previous.clone().unwrap_or_else(|| x.to_vec());
    let (next, q) = match opt.kind {
        OptimizerKind::Plain => {
            let q = pseudo_gradient(pop, x, cfg, round)?;
            (x.iter().zip(&q).map(|(xi, qi)| xi - opt.step * qi).collect(), q)
        }
        OptimizerKind::HeavyBall => {
            let q = pseudo_gradient(pop, x, cfg, round)?;
            let mut next: Vec<f64> = x.iter().zip(&q).map(|(xi, qi)| xi - opt.step * qi).collect();
            if opt.momentum != 0.0 {
                for ((n, xi), pi) in next.iter_mut().zip(x).zip(&previous) {
                    *n += opt.momentum * (xi - pi);
                }
            }
            (next, q)
        }
        OptimizerKind::Nesterov => {
            let query: Vec<f64> = x.iter().zip(&previous).map(|(xi, pi)| xi + opt.momentum * (xi - pi)).collect();
            let q = pseudo_gradient(pop, &query, cfg, round)?;
            (query.iter().zip(&q).map(|(yi, qi)| yi - opt.step * qi).collect(), q)
        }
    };
    state.previous = Some(x.to_vec());
    Ok((next, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub iterates: Vec<Vec<f64>>,
    pub pseudo_gradients: Vec<Vec<f64>>,
}

/// Algorithm 1: `cfg.rounds` server rounds from `x0`.
pub fn run(pop: &Population, x0: &[f64], cfg: &RunConfig, opt: &ServerOptSpec) -> Result<Trajectory> {
    if x0.len() != pop.dim() {
        return Err(Error::DimensionMismatch { expected: pop.dim(), found: x0.len() });
    }
    let mut state = OptState::new();
    let mut iterates = Vec::with_capacity(cfg.rounds + 1);
    let mut pseudo_gradients = Vec::with_capacity(cfg.rounds);
    iterates.push(x0.to_vec());
    for round in 0..cfg.rounds {
        let x = iterates.last().expect("nonempty");
        let (next, q) = server_round(pop, x, cfg, opt, &mut state, round)?;
        let norm = matrix::norm(&next);
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Divergence { round: round + 1, norm });
        }
        iterates.push(next);
        pseudo_gradients.push(q);
    }
    Ok(Trajectory { iterates, pseudo_gradients })
}

/// Trajectory as CSV, distances measured against the two given optima.
pub fn trajectory_csv(traj: &Trajectory, surrogate_opt: &[f64], empirical_opt: &[f64]) -> String {
    let dim = surrogate_opt.len();
    let mut out = String::from("round");
    for i in 0..dim {
        let _ = write!(out, ",comp_{i}");
    }
    out.push_str(",dist_to_surrogate_opt,dist_to_empirical_opt\n");
    for (t, x) in traj.iterates.iter().enumerate() {
        let _ = write!(out, "{t}");
        for v in x {
            let _ = write!(out, ",{v:.16e}");
        }
        let _ = writeln!(
            out,
            ",{:.16e},{:.16e}",
            matrix::distance(x, surrogate_opt),
            matrix::distance(x, empirical_opt)
        );
    }
    out
}
