//! Randomized checks of the identities and inequalities the library relies on.
//!
//! Each suite draws its own instances from a seed and reports the largest
//! amount by which any instance exceeded its tolerance (zero when all pass).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, DiscreteDistribution};
use crate::engine::{self, OptimizerKind, RunConfig, RunMode};
use crate::error::Result;
use crate::matrix::{self, SpectrumBounds, SymmetricMatrix};
use crate::rng::{self, Stream};
use crate::scheme::WeightScheme;
use crate::world::{self, Population, PopulationSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub max_violation: f64,
    pub pass: bool,
}

impl CheckReport {
    fn from_excess(name: &str, excess: &[f64]) -> Self {
        let max_violation = excess.iter().copied().fold(0.0, f64::max);
        let finite = excess.iter().all(|e| !e.is_nan());
        Self { name: name.to_string(), instances: excess.len(), max_violation, pass: finite && max_violation == 0.0 }
    }
}

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 16] = [
    "theorem1",
    "theorem1-stochastic",
    "theorem2",
    "theorem3",
    "lemma1",
    "eigen-map",
    "commute",
    "kappa-dominance",
    "kappa-monotonicity",
    "lemma3-4-tightness",
    "lemma5",
    "lemma6",
    "theorem4",
    "corollary1",
    "mad",
    "matrix-mad",
];

/// A random population and admissible hyperparameters.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pop: Population,
    pub alpha: f64,
    pub gamma: f64,
    pub theta: WeightScheme,
}

/// Ranges used when drawing instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub max_dim: usize,
    pub max_clients: usize,
    pub max_k: u64,
    pub examples_per_client: Option<usize>,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self { max_dim: 20, max_clients: 10, max_k: 50, examples_per_client: None }
    }
}

/// Draws a population with `μ = 1`, `L ∈ [1, 20]`, `C ∈ [0.5, 2]`, a random
/// scheme with `K(Θ) ≤ max_k`, `α ∈ {0} ∪ [0, 1]` and `γ < (L + α)⁻¹`.
pub fn random_instance(shape: &InstanceShape, stream: &mut Stream, seed: u64) -> Result<Instance> {
    let dim = stream.gen_range(1..=shape.max_dim);
    let clients = stream.gen_range(1..=shape.max_clients);
    let ell = 1.0 + 19.0 * stream.gen::<f64>();
    let c_radius = 0.5 + 1.5 * stream.gen::<f64>();
    let spec = PopulationSpec {
        dim,
        clients,
        bounds: SpectrumBounds::new(1.0, ell, c_radius)?,
        examples_per_client: shape.examples_per_client,
        uniform_weights: stream.gen::<bool>(),
    };
    let pop = world::random_population(&spec, seed)?;
    let alpha = if stream.gen::<bool>() { 0.0 } else { stream.gen::<f64>() };
    let gamma = 0.99 * stream.gen::<f64>() / (pop.max_eigenvalue() + alpha);
    let theta = random_scheme(shape.max_k, stream)?;
    let gamma = well_conditioned_gamma(&pop, alpha, gamma, &theta)?;
    Ok(Instance { pop, alpha, gamma, theta })
}

/// Replaces the scheme with `Θ_{1:K}` or `Θ_K` and draws `γ` inside the range
/// where the closed-form condition bounds apply.
fn closed_form_regime(inst: &mut Instance, s: &mut Stream) -> Result<()> {
    let k = s.gen_range(1..=50u64);
    let ell = inst.pop.bounds().ell;
    if s.gen::<bool>() {
        inst.theta = WeightScheme::first_k(k)?;
        inst.gamma = 0.99 * s.gen::<f64>() / (ell + inst.alpha);
    } else {
        inst.theta = WeightScheme::k_only(k)?;
        inst.gamma = 0.99 * s.gen::<f64>() / (k as f64 * ell + inst.alpha);
    }
    Ok(())
}

/// Largest instance condition number the randomized checks accept.
pub const MAX_KAPPA: f64 = 1e6;

/// Smallest accepted `μ̃ / L`; below it round-off in the local steps
/// dominates the pseudo-gradient.
pub const MIN_SURROGATE_SCALE: f64 = 1e-8;

/// Halves `gamma` until `κ_exact ≤ MAX_KAPPA` and `μ̃ ≥ MIN_SURROGATE_SCALE · L`,
/// keeping instances inside the range double precision resolves.
pub fn well_conditioned_gamma(pop: &Population, alpha: f64, mut gamma: f64, theta: &WeightScheme) -> Result<f64> {
    for _ in 0..200 {
        let r = bounds::kappa_exact(pop, alpha, gamma, theta)?;
        if r.kappa_exact <= MAX_KAPPA && r.mu_tilde >= MIN_SURROGATE_SCALE * pop.max_eigenvalue() {
            return Ok(gamma);
        }
        gamma *= 0.5;
    }
    Ok(0.0)
}

fn random_scheme(max_k: u64, stream: &mut Stream) -> Result<WeightScheme> {
    let k = stream.gen_range(1..=max_k);
    match stream.gen_range(0..3) {
        0 => WeightScheme::first_k(k),
        1 => WeightScheme::k_only(k),
        _ => {
            let mut c: Vec<f64> = (0..k).map(|_| if stream.gen::<f64>() < 0.3 { 0.0 } else { stream.gen::<f64>() * 2.0 }).collect();
            c[k as usize - 1] = 0.1 + stream.gen::<f64>();
            WeightScheme::from_coefficients(c)
        }
    }
}

fn random_point(dim: usize, scale: f64, stream: &mut Stream) -> Vec<f64> {
    rng::standard_normal_vec(stream, dim).into_iter().map(|v| v * scale).collect()
}

/// Runs `f` for each trial on its own stream, in parallel, preserving order.
fn per_trial<F>(trials: usize, seed: u64, salt: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut Stream, u64) -> Result<f64> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let id = rng::stream_id(salt, t as u64);
            let mut stream = rng::child(seed, id);
            f(&mut stream, id ^ seed)
        })
        .collect()
}

fn excess(measured: f64, allowed: f64) -> f64 {
    if measured.is_nan() {
        f64::NAN
    } else {
        (measured - allowed).max(0.0)
    }
}

/// Runs one named suite with `trials` random instances.
pub fn run_suite(name: &str, trials: usize, seed: u64) -> Result<CheckReport> {
    let shape = InstanceShape::default();
    let values = match name {
        "theorem1" => per_trial(trials, seed, 1, |s, id| {
            let inst = random_instance(&shape, s, id)?;
            let cfg = RunConfig::deterministic(&inst.pop, inst.alpha, inst.gamma, inst.theta.clone(), 1);
            let x = random_point(inst.pop.dim(), 2.0, s);
            let mut worst: f64 = 0.0;
            for client in inst.pop.clients() {
                let got = engine::client_update(client, &x, &cfg, s)?;
                let want = world::client_surrogate_gradient(client, &x, inst.alpha, inst.gamma, &inst.theta)?;
                worst = worst.max(matrix::distance(&got, &want));
            }
            Ok(excess(worst, 1e-9))
        })?,
        "theorem1-stochastic" => per_trial(trials, seed, 2, |s, id| {
            let shape = InstanceShape { max_dim: 3, max_clients: 1, max_k: 4, examples_per_client: Some(4) };
            let inst = random_instance(&shape, s, id)?;
            let client = &inst.pop.clients()[0];
            let mut cfg = RunConfig::deterministic(&inst.pop, inst.alpha, inst.gamma, inst.theta.clone(), 1);
            cfg.mode = RunMode::Stochastic;
            cfg.batch_size = s.gen_range(1..=2);
            let x = random_point(inst.pop.dim(), 1.0, s);
            let want = world::client_surrogate_gradient(client, &x, inst.alpha, inst.gamma, &inst.theta)?;
            Ok(excess(monte_carlo_z(client, &x, &cfg, &want, 4000, s)?, 4.0))
        })?,
        "theorem2" => per_trial(trials, seed, 3, |s, id| {
            let inst = random_instance(&InstanceShape { max_k: 20, ..shape }, s, id)?;
            let k = s.gen_range(1..=20u64);
            let alpha = if s.gen::<bool>() { 0.0 } else { 0.5 };
            let gamma = 0.99 * s.gen::<f64>() / (inst.pop.max_eigenvalue() + alpha);
            let client = &inst.pop.clients()[0];
            let x = random_point(inst.pop.dim(), 2.0, s);
            let got = engine::client_update_maml(client, &x, k, gamma, alpha)?;
            let cfg = RunConfig::deterministic(&inst.pop, alpha, gamma, WeightScheme::maml(k)?, 1);
            let want = engine::client_update(client, &x, &cfg, s)?;
            Ok(excess(matrix::distance(&got, &want), 1e-10))
        })?,
        "theorem3" => per_trial(trials, seed, 4, |s, id| {
            let inst = random_instance(&InstanceShape { max_dim: 10, ..shape }, s, id)?;
            theorem3_instance(&inst, s)
        })?,
        "lemma1" => per_trial(trials, seed, 5, |s, id| {
            let inst = random_instance(&shape, s, id)?;
            let mut worst = f64::NEG_INFINITY;
            for client in inst.pop.clients() {
                let q = world::distortion_matrix(client, inst.alpha, inst.gamma, &inst.theta)?.eigh()?;
                // Eigenvalues below round-off of the largest are not resolved.
                worst = worst.max(-q.min() - 1e-12 * q.max().abs());
            }
            Ok(if worst < 0.0 { 0.0 } else { worst.max(f64::MIN_POSITIVE) })
        })?,
        "eigen-map" => per_trial(trials, seed, 6, |s, id| {
            let inst = random_instance(&InstanceShape { max_dim: 10, ..shape }, s, id)?;
            let mut worst: f64 = 0.0;
            for client in inst.pop.clients() {
                let qa = world::client_surrogate_hessian(client, inst.alpha, inst.gamma, &inst.theta)?;
                let got = qa.eigh()?.eigenvalues;
                let mut want: Vec<f64> =
                    client.spectrum().iter().map(|&l| inst.theta.hessian_eigenvalue(l, inst.alpha, inst.gamma)).collect();
                want.sort_by(f64::total_cmp);
                for (g, w) in got.iter().zip(&want) {
                    worst = worst.max((g - w).abs());
                }
            }
            Ok(excess(worst, 1e-9))
        })?,
        "commute" => per_trial(trials, seed, 7, |s, id| {
            let inst = random_instance(&shape, s, id)?;
            let mut worst: f64 = 0.0;
            for client in inst.pop.clients() {
                let q = world::distortion_matrix(client, inst.alpha, inst.gamma, &inst.theta)?;
                worst = worst.max(q.commutator_norm(client.a_matrix())?);
            }
            Ok(excess(worst, 1e-10))
        })?,
        "kappa-dominance" => per_trial(trials, seed, 8, |s, id| {
            let mut inst = random_instance(&shape, s, id)?;
            closed_form_regime(&mut inst, s)?;
            let r = bounds::kappa_exact(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            let bound = r.kappa_bound.expect("preconditions hold by construction");
            Ok(excess(r.kappa_exact, bound * (1.0 + 1e-12) + 1e-9))
        })?,
        "kappa-monotonicity" => per_trial(trials, seed, 9, |s, _| {
            let ell = 1.0 + 50.0 * s.gen::<f64>();
            let alpha = s.gen::<f64>();
            let gamma = 0.9 * s.gen::<f64>() / (ell + alpha);
            let k = s.gen_range(1..200u64);
            let base = bounds::kappa_bound_fedavg(1.0, ell, alpha, gamma, k)?;
            let more_k = bounds::kappa_bound_fedavg(1.0, ell, alpha, gamma, k + 1)?;
            let more_gamma = bounds::kappa_bound_fedavg(1.0, ell, alpha, gamma * 1.05, k)?;
            let more_alpha = bounds::kappa_bound_fedavg(1.0, ell, alpha + 0.1, gamma * (ell + alpha) / (ell + alpha + 0.1), k)?;
            let tol = 1e-12 * base;
            Ok(excess(more_k - base, tol).max(excess(more_gamma - base, tol)).max(excess(more_alpha.min(base) - base, tol)))
        })?,
        "lemma3-4-tightness" => per_trial(trials, seed, 10, |s, _| {
            let ell = 1.0 + 50.0 * s.gen::<f64>();
            let pop = bounds::tightness_b3_population(1.0, ell)?;
            let alpha = if s.gen::<bool>() { 0.0 } else { s.gen::<f64>() };
            let k = s.gen_range(1..=100u64);
            let g_fed = 0.99 * s.gen::<f64>() / (ell + alpha);
            let g_maml = 0.99 * s.gen::<f64>() / (k as f64 * ell + alpha);
            let fed = bounds::kappa_exact(&pop, alpha, g_fed, &WeightScheme::first_k(k)?)?.kappa_exact;
            let want_fed = bounds::phi(ell, alpha, g_fed, k) / bounds::phi(1.0, alpha, g_fed, k);
            let maml = bounds::kappa_exact(&pop, alpha, g_maml, &WeightScheme::k_only(k)?)?.kappa_exact;
            let want_maml = bounds::psi(ell, alpha, g_maml, k) / bounds::psi(1.0, alpha, g_maml, k);
            Ok(excess((fed - want_fed).abs(), 1e-10).max(excess((maml - want_maml).abs(), 1e-10)))
        })?,
        "lemma5" => per_trial(trials, seed, 11, |s, id| {
            let inst = random_instance(&shape, s, id)?;
            let d = world::minimizer_distance(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            let b = bounds::distance_bound(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            Ok(excess(d, b + 1e-9))
        })?,
        "lemma6" => per_trial(trials, seed, 12, |s, id| {
            let mut inst = random_instance(&shape, s, id)?;
            closed_form_regime(&mut inst, s)?;
            let b = inst.pop.bounds();
            let kappa = bounds::closed_form_kappa(b, inst.alpha, inst.gamma, &inst.theta)?;
            let allowed = b.condition_number() / kappa;
            let mut worst: f64 = 0.0;
            for client in inst.pop.clients() {
                worst = worst.max(bounds::distortion_condition(client, inst.alpha, inst.gamma, &inst.theta)?);
            }
            Ok(excess(worst, allowed * (1.0 + 1e-12) + 1e-9))
        })?,
        "theorem4" => per_trial(trials, seed, 13, |s, id| {
            let mut inst = random_instance(&shape, s, id)?;
            closed_form_regime(&mut inst, s)?;
            let d = world::minimizer_distance(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            let b = bounds::distance_bound_closed_form(inst.pop.bounds(), inst.alpha, inst.gamma, &inst.theta)?;
            Ok(excess(d, b + 1e-9))
        })?,
        "corollary1" => per_trial(trials, seed, 14, |s, id| {
            let inst = random_instance(&InstanceShape { max_dim: 10, ..shape }, s, id)?;
            let (mu_t, l_t) = bounds::surrogate_spectrum(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            let opt = engine::auto_tune(OptimizerKind::Plain, l_t, mu_t)?;
            let rounds = s.gen_range(1..=40);
            let cfg = RunConfig::deterministic(&inst.pop, inst.alpha, inst.gamma, inst.theta.clone(), rounds);
            let x0 = random_point(inst.pop.dim(), 3.0, s);
            let traj = engine::run(&inst.pop, &x0, &cfg, &opt)?;
            let xt = world::surrogate_minimizer(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            let xe = world::empirical_minimizer(&inst.pop)?;
            let rho = bounds::rho_from_kappa(bounds::kappa_exact(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?.kappa_exact, OptimizerKind::Plain)?;
            let lhs = matrix::distance(traj.iterates.last().expect("nonempty"), &xe);
            let rhs = rho.powi(rounds as i32) * matrix::distance(&x0, &xt)
                + bounds::distance_bound(&inst.pop, inst.alpha, inst.gamma, &inst.theta)?;
            Ok(excess(lhs, rhs + 1e-9))
        })?,
        "mad" => per_trial(trials, seed, 15, |s, _| {
            let dist = random_distribution(s)?;
            let (m, b) = (bounds::mad(&dist), bounds::mad_bound(&dist));
            let gap = b - m;
            // Equality exactly on two-point supports.
            let equality_ok = if dist.is_two_point() { gap.abs() <= 1e-12 } else { gap > 1e-12 };
            Ok(excess(m, b + 1e-12) + if equality_ok { 0.0 } else { gap.abs().max(f64::MIN_POSITIVE) })
        })?,
        "matrix-mad" => per_trial(trials, seed, 16, |s, _| {
            let (x, y, a, b) = random_commuting_family(s)?;
            let m = bounds::matrix_weighted_discrepancy(&x, &y)?;
            let spec = bounds::matrix_weighted_mean_spectrum(&x, &y)?;
            let order = excess(a - spec[0], 1e-9).max(excess(spec[spec.len() - 1] - b, 1e-9));
            Ok(excess(m, bounds::matrix_discrepancy_bound(a, b) + 1e-9).max(order))
        })?,
        other => {
            return Err(crate::error::Error::InvalidInput(format!(
                "unknown suite `{other}`; expected one of {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(CheckReport::from_excess(name, &values))
}

/// Largest componentwise `|mean − want| / standard error` over `n` draws.
pub fn monte_carlo_z(
    client: &world::ClientModel,
    x: &[f64],
    cfg: &RunConfig,
    want: &[f64],
    n: usize,
    stream: &mut Stream,
) -> Result<f64> {
    let dim = x.len();
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    for _ in 0..n {
        let u = engine::client_update(client, x, cfg, stream)?;
        for i in 0..dim {
            let d = u[i] - want[i];
            sum[i] += d;
            sum_sq[i] += d * d;
        }
    }
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        let mean = sum[i] / nf;
        let var = (sum_sq[i] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        let se = (var / nf).sqrt();
        let z = if se > 0.0 { mean.abs() / se } else if mean.abs() <= 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    Ok(worst)
}

/// Plain per-step contraction and the spectral radius of the momentum
/// iterations, both against the rate from `κ_exact`.
fn theorem3_instance(inst: &Instance, s: &mut Stream) -> Result<f64> {
    let (pop, alpha, gamma, theta) = (&inst.pop, inst.alpha, inst.gamma, &inst.theta);
    let kappa = bounds::kappa_exact(pop, alpha, gamma, theta)?.kappa_exact;
    let h = world::surrogate_hessian(pop, alpha, gamma, theta)?;
    let spectrum = h.eigh()?.eigenvalues;
    let (mu_t, l_t) = (spectrum[0], spectrum[spectrum.len() - 1]);
    let mut worst: f64 = 0.0;

    let opt = engine::auto_tune(OptimizerKind::Plain, l_t, mu_t)?;
    let target = world::surrogate_minimizer(pop, alpha, gamma, theta)?;
    let x0: Vec<f64> = target.iter().zip(random_point(pop.dim(), 1.0, s)).map(|(a, b)| a + 1e3 * b).collect();
    let traj = engine::run(pop, &x0, &RunConfig::deterministic(pop, alpha, gamma, theta.clone(), 60), &opt)?;
    let errors: Vec<f64> = traj.iterates.iter().map(|x| matrix::distance(x, &target)).collect();
    let rho = bounds::rho_from_kappa(kappa, OptimizerKind::Plain)?;
    for t in 5..errors.len() - 1 {
        if errors[t + 1] < 1e-3 * errors[0] {
            break;
        }
        worst = worst.max(excess(errors[t + 1] / errors[t], rho + 1e-6));
    }

    for kind in [OptimizerKind::HeavyBall, OptimizerKind::Nesterov] {
        let opt = engine::auto_tune(kind, l_t, mu_t)?;
        let radius = spectrum.iter().map(|&l| momentum_radius(kind, opt.step, opt.momentum, l)).fold(0.0, f64::max);
        // The double root at μ̃ resolves only to about sqrt(ε).
        worst = worst.max(excess(radius, bounds::rho_from_kappa(kappa, kind)? + 1e-7));
    }
    Ok(worst)
}

/// Largest root modulus of the two-step recurrence a momentum method applies
/// to an eigen-direction with curvature `lambda`.
pub fn momentum_radius(kind: OptimizerKind, step: f64, momentum: f64, lambda: f64) -> f64 {
    // z² − b z + c = 0
    let (b, c) = match kind {
        OptimizerKind::Plain => return (1.0 - step * lambda).abs(),
        OptimizerKind::HeavyBall => (1.0 + momentum - step * lambda, momentum),
        OptimizerKind::Nesterov => {
            let a = 1.0 - step * lambda;
            ((1.0 + momentum) * a, momentum * a)
        }
    };
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        c.abs().sqrt()
    } else {
        let r = disc.sqrt();
        ((b + r) / 2.0).abs().max(((b - r) / 2.0).abs())
    }
}

/// Random finite distribution; about a third have two-point supports.
pub fn random_distribution(s: &mut Stream) -> Result<DiscreteDistribution> {
    let n = s.gen_range(1..=8);
    let lo = -5.0 + 10.0 * s.gen::<f64>();
    let hi = lo + 5.0 * s.gen::<f64>();
    let two_point = s.gen::<f64>() < 0.35;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            if two_point || i < 2 {
                if (i % 2 == 0) == (i < 2 || s.gen::<bool>()) {
                    lo
                } else {
                    hi
                }
            } else {
                lo + (hi - lo) * (0.01 + 0.98 * s.gen::<f64>())
            }
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + s.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let head: f64 = probs[..n - 1].iter().sum();
    probs[n - 1] = 1.0 - head;
    DiscreteDistribution::new(values, probs)
}

/// Jointly commuting family `(X_i, Y_i)` on one random eigenbasis, with
/// `aI ⪯ X_i ⪯ bI`. Returns the family and `(a, b)`.
#[allow(clippy::type_complexity)]
pub fn random_commuting_family(s: &mut Stream) -> Result<(Vec<SymmetricMatrix>, Vec<SymmetricMatrix>, f64, f64)> {
    let dim = s.gen_range(1..=5);
    let n = s.gen_range(1..=6);
    let a = 0.1 + s.gen::<f64>();
    let b = a + 0.01 + 5.0 * s.gen::<f64>();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let basis = matrix::random_orthonormal(dim, s)?;
    for _ in 0..n {
        let xv: Vec<f64> = (0..dim).map(|_| if s.gen::<f64>() < 0.3 { if s.gen::<bool>() { a } else { b } } else { a + (b - a) * s.gen::<f64>() }).collect();
        let yv: Vec<f64> = (0..dim).map(|_| 0.05 + 3.0 * s.gen::<f64>()).collect();
        x.push(SymmetricMatrix::from_spectrum(&basis, &xv)?);
        y.push(SymmetricMatrix::from_spectrum(&basis, &yv)?);
    }
    Ok((x, y, a, b))
}

/// Checks that apply to one given population and hyperparameter setting:
/// client update vs surrogate gradient, positivity of `Q_i`, the eigenvalue
/// map, commutation and the distance bound.
pub fn check_population(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme, x: &[f64]) -> Result<Vec<CheckReport>> {
    world::check_positive_distortion(pop, alpha, gamma)?;
    let cfg = RunConfig::deterministic(pop, alpha, gamma, theta.clone(), 1);
    let mut update = Vec::new();
    let mut positive = Vec::new();
    let mut eigen_map = Vec::new();
    let mut commute = Vec::new();
    let mut unused = rng::seeded(0);
    for client in pop.clients() {
        let got = engine::client_update(client, x, &cfg, &mut unused)?;
        let want = world::client_surrogate_gradient(client, x, alpha, gamma, theta)?;
        update.push(excess(matrix::distance(&got, &want), 1e-9));
        let q = world::distortion_matrix(client, alpha, gamma, theta)?;
        let qe = q.eigh()?;
        let neg = -qe.min() - 1e-12 * qe.max().abs();
        positive.push(if neg < 0.0 { 0.0 } else { neg.max(f64::MIN_POSITIVE) });
        let got = world::client_surrogate_hessian(client, alpha, gamma, theta)?.eigh()?.eigenvalues;
        let mut want: Vec<f64> = client.spectrum().iter().map(|&l| theta.hessian_eigenvalue(l, alpha, gamma)).collect();
        want.sort_by(f64::total_cmp);
        eigen_map.push(excess(got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max), 1e-9));
        commute.push(excess(q.commutator_norm(client.a_matrix())?, 1e-10));
    }
    let d = world::minimizer_distance(pop, alpha, gamma, theta)?;
    let b = bounds::distance_bound(pop, alpha, gamma, theta)?;
    Ok(vec![
        CheckReport::from_excess("theorem1", &update),
        CheckReport::from_excess("lemma1", &positive),
        CheckReport::from_excess("eigen-map", &eigen_map),
        CheckReport::from_excess("commute", &commute),
        CheckReport::from_excess("lemma5", &[excess(d, b + 1e-9)]),
    ])
}

/// Every suite in [`SUITES`] with the same trial count.
pub fn run_all(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    SUITES.iter().map(|name| run_suite(name, trials, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_on_a_few_trials() {
        for name in SUITES {
            let r = run_suite(name, 8, 3).unwrap();
            assert!(r.pass, "{r:?}");
            assert_eq!(r.instances, 8);
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", 1, 0).is_err());
    }

    #[test]
    fn momentum_radius_matches_rates() {
        for kappa in [1.5, 10.0, 100.0] {
            for kind in [OptimizerKind::HeavyBall, OptimizerKind::Nesterov] {
                let opt = engine::auto_tune(kind, kappa, 1.0).unwrap();
                let r = (0..=200)
                    .map(|i| 1.0 + (kappa - 1.0) * i as f64 / 200.0)
                    .map(|l| momentum_radius(kind, opt.step, opt.momentum, l))
                    .fold(0.0, f64::max);
                let want = bounds::rho_from_kappa(kappa, kind).unwrap();
                assert!((r - want).abs() < 1e-6, "{kind:?} {kappa}: {r} vs {want}");
            }
        }
    }
}
