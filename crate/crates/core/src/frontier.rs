//! Convergence/accuracy frontiers.
//!
//! Each admissible hyperparameter setting gives an operating point
//! `(ρ, Δ) ∈ [0, 1]²`: the server rate from the surrogate's condition number
//! and the normalized worst-case distance between surrogate and empirical
//! minimizers. Sweeping one hyperparameter traces a curve.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::engine::{self, OptimizerKind, RunConfig};
use crate::error::{Error, Result};
use crate::matrix::{self, SpectrumBounds};
use crate::rng;
use crate::scheme::WeightScheme;
use crate::world::{self, ClientModel, Population};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `Θ_{1:K}`.
    FedAvg,
    /// `Θ_K`.
    Maml,
}

impl Family {
    pub fn scheme(self, k: u64) -> Result<WeightScheme> {
        match self {
            Family::FedAvg => WeightScheme::first_k(k),
            Family::Maml => WeightScheme::k_only(k),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::FedAvg => "fedavg",
            Family::Maml => "maml",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    /// Closed-form family bound on diag-extreme spectra.
    ClosedForm,
    /// Eigenvalue map applied to actual client spectra.
    ExactSpectral,
}

impl KappaSource {
    pub fn name(self) -> &'static str {
        match self {
            KappaSource::ClosedForm => "closed_form",
            KappaSource::ExactSpectral => "exact_spectral",
        }
    }
}

/// How `γ` is chosen at each grid point when it is not the swept axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaRule {
    Fixed(f64),
    /// `γ = scale/(L + α)`, or `scale/(K L + α)` when `k_scaled`.
    InverseOf { scale: f64, k_scaled: bool },
}

impl GammaRule {
    pub fn resolve(self, ell: f64, alpha: f64, k: u64) -> f64 {
        match self {
            GammaRule::Fixed(g) => g,
            GammaRule::InverseOf { scale, k_scaled } => {
                let kl = if k_scaled { k as f64 * ell } else { ell };
                scale / (kl + alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    K(Vec<u64>),
    Gamma(Vec<f64>),
    Alpha(Vec<f64>),
}

impl SweepAxis {
    fn len(&self) -> usize {
        match self {
            SweepAxis::K(v) => v.len(),
            SweepAxis::Gamma(v) => v.len(),
            SweepAxis::Alpha(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: Family,
    pub axis: SweepAxis,
    pub mu: f64,
    pub ell: f64,
    pub alpha: f64,
    pub gamma: GammaRule,
    pub k: u64,
    pub optimizers: Vec<OptimizerKind>,
    pub kappa_source: KappaSource,
    /// Population for the spectral source; `diag(L, μ)` when absent.
    pub population: Option<Population>,
}

impl SweepSpec {
    /// K-sweep with a fixed rule for `γ`, plain server optimizer, closed form.
    pub fn k_sweep(family: Family, mu: f64, ell: f64, alpha: f64, gamma: GammaRule, grid: Vec<u64>) -> Self {
        Self {
            family,
            axis: SweepAxis::K(grid),
            mu,
            ell,
            alpha,
            gamma,
            k: 1,
            optimizers: vec![OptimizerKind::Plain],
            kappa_source: KappaSource::ClosedForm,
            population: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub axis_value: f64,
    pub rho: f64,
    /// Absent for schemes outside the two covered families.
    pub delta: Option<f64>,
    pub kappa: f64,
    pub kappa_source: KappaSource,
    pub alpha: f64,
    pub gamma: f64,
    pub k: u64,
    pub scheme: String,
    pub optimizer: OptimizerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub axis_value: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    pub skipped: Vec<SkippedPoint>,
}

impl Frontier {
    /// `(ρ, Δ)` pairs for one optimizer, in grid order.
    pub fn series(&self, kind: OptimizerKind) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.optimizer == kind)
            .filter_map(|p| p.delta.map(|d| (p.rho, d)))
            .collect()
    }

    pub fn optimizers(&self) -> Vec<OptimizerKind> {
        let mut kinds: Vec<OptimizerKind> = Vec::new();
        for p in &self.points {
            if !kinds.contains(&p.optimizer) {
                kinds.push(p.optimizer);
            }
        }
        kinds
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis_value,rho,delta,kappa,kappa_source,alpha,gamma,K,scheme,optimizer\n");
        for p in &self.points {
            let delta = p.delta.map(|d| format!("{d:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{},{:.16e},{},{:.16e},{:.16e},{},{},{}",
                p.axis_value,
                p.rho,
                delta,
                p.kappa,
                p.kappa_source.name(),
                p.alpha,
                p.gamma,
                p.k,
                p.scheme,
                p.optimizer.name()
            );
        }
        out
    }
}

/// Roughly logarithmic integer grid from 1 to `max` with about `points`
/// distinct values.
pub fn log_int_grid(max: u64, points: usize) -> Vec<u64> {
    if max <= 1 || points <= 1 {
        return vec![1];
    }
    let ln_max = (max as f64).ln();
    let mut grid: Vec<u64> = (0..points)
        .map(|i| ((ln_max * i as f64 / (points - 1) as f64).exp().round() as u64).clamp(1, max))
        .collect();
    grid.dedup();
    if grid.last() != Some(&max) {
        grid.push(max);
    }
    grid
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

struct GridPoint {
    axis_value: f64,
    alpha: f64,
    gamma: f64,
    k: u64,
}

fn grid_points(spec: &SweepSpec) -> Vec<GridPoint> {
    match &spec.axis {
        SweepAxis::K(ks) => ks
            .iter()
            .map(|&k| GridPoint { axis_value: k as f64, alpha: spec.alpha, gamma: spec.gamma.resolve(spec.ell, spec.alpha, k), k })
            .collect(),
        SweepAxis::Gamma(gs) => gs.iter().map(|&g| GridPoint { axis_value: g, alpha: spec.alpha, gamma: g, k: spec.k }).collect(),
        SweepAxis::Alpha(alphas) => alphas
            .iter()
            .map(|&a| GridPoint { axis_value: a, alpha: a, gamma: spec.gamma.resolve(spec.ell, a, spec.k), k: spec.k })
            .collect(),
    }
}

fn admissible(spec: &SweepSpec, g: &GridPoint) -> std::result::Result<(), String> {
    if g.k == 0 {
        return Err("K must be at least 1".into());
    }
    if !(g.gamma >= 0.0 && g.alpha >= 0.0) {
        return Err("alpha and gamma must be nonnegative".into());
    }
    if g.gamma * (spec.ell + g.alpha) >= 1.0 {
        return Err(format!("gamma = {} is not below 1/(L + alpha)", g.gamma));
    }
    if spec.family == Family::Maml && spec.kappa_source == KappaSource::ClosedForm && g.gamma * (g.k as f64 * spec.ell + g.alpha) >= 1.0 {
        return Err(format!("gamma = {} is not below 1/(K L + alpha) = {}", g.gamma, 1.0 / (g.k as f64 * spec.ell + g.alpha)));
    }
    Ok(())
}

/// `(κ, Δ)` for one grid point.
fn evaluate(spec: &SweepSpec, bounds: &SpectrumBounds, pop: Option<&Population>, g: &GridPoint) -> Result<(f64, f64)> {
    let theta = spec.family.scheme(g.k)?;
    match (spec.kappa_source, pop) {
        (KappaSource::ClosedForm, _) => {
            let kappa = bounds::closed_form_kappa(bounds, g.alpha, g.gamma, &theta)?;
            Ok((kappa, bounds::delta_from_kappa(kappa, bounds.condition_number())?))
        }
        (KappaSource::ExactSpectral, Some(pop)) => spectral_point(pop, g.alpha, g.gamma, &theta),
        (KappaSource::ExactSpectral, None) => {
            let pop = bounds::tightness_b3_population(bounds.mu, bounds.ell)?;
            spectral_point(&pop, g.alpha, g.gamma, &theta)
        }
    }
}

/// `κ` from the eigenvalue map and `Δ` from the distortion spectra.
fn spectral_point(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<(f64, f64)> {
    let kappa = bounds::kappa_exact(pop, alpha, gamma, theta)?.kappa_exact;
    let (ln_a, ln_b) = bounds::ln_distortion_extremes(pop, alpha, gamma, theta)?;
    Ok((kappa, bounds::delta_from_ln_distortion(ln_a, ln_b)))
}

/// Evaluates every grid point; inadmissible points are skipped with a reason.
pub fn sweep(spec: &SweepSpec) -> Result<Frontier> {
    if spec.axis.len() == 0 {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    if spec.optimizers.is_empty() {
        return Err(Error::InvalidInput("at least one optimizer is required".into()));
    }
    let bounds = SpectrumBounds::new(spec.mu, spec.ell, 1.0)?;
    let grid = grid_points(spec);
    let evaluated: Vec<std::result::Result<(f64, f64), String>> = grid
        .par_iter()
        .map(|g| {
            admissible(spec, g)?;
            evaluate(spec, &bounds, spec.population.as_ref(), g).map_err(|e| e.to_string())
        })
        .collect();
    let mut frontier = Frontier { points: Vec::new(), skipped: Vec::new() };
    for (g, r) in grid.iter().zip(evaluated) {
        match r {
            Err(reason) => frontier.skipped.push(SkippedPoint { axis_value: g.axis_value, reason }),
            Ok((kappa, delta)) => {
                for &kind in &spec.optimizers {
                    frontier.points.push(FrontierPoint {
                        axis_value: g.axis_value,
                        rho: bounds::rho_from_kappa(kappa, kind)?,
                        delta: Some(delta),
                        kappa,
                        kappa_source: spec.kappa_source,
                        alpha: g.alpha,
                        gamma: g.gamma,
                        k: g.k,
                        scheme: spec.family.scheme(g.k)?.tag().to_string(),
                        optimizer: kind,
                    });
                }
            }
        }
    }
    if frontier.points.is_empty() {
        let reason = frontier.skipped.first().map(|s| s.reason.clone()).unwrap_or_default();
        return Err(Error::Precondition(format!("every grid point was skipped ({reason})")));
    }
    Ok(frontier)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedMamlSpec {
    pub dim: usize,
    pub mu: f64,
    pub ell: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub k_grid: Vec<u64>,
    pub seed: u64,
    pub optimizers: Vec<OptimizerKind>,
}

/// `Θ_K` frontier on random matrices with spectrum spanning `[μ, L]`, one
/// fresh matrix per grid point. Works beyond `γ ≥ (KL + α)⁻¹`, where the
/// closed form no longer applies.
pub fn simulated_maml_sweep(spec: &SimulatedMamlSpec) -> Result<Frontier> {
    if spec.gamma * (spec.ell + spec.alpha) >= 1.0 {
        return Err(Error::Precondition(format!("gamma = {} must be below 1/(L + alpha)", spec.gamma)));
    }
    if spec.k_grid.is_empty() || spec.optimizers.is_empty() {
        return Err(Error::InvalidInput("grid and optimizer list must be nonempty".into()));
    }
    let bounds = SpectrumBounds::new(spec.mu, spec.ell, 0.0)?;
    let evaluated: Vec<Result<(f64, f64)>> = spec
        .k_grid
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut stream = rng::child(spec.seed, i as u64);
            let (a, eig) = matrix::random_spd_decomposed(spec.dim, &bounds, &mut stream)?;
            let client = ClientModel::with_decomposition(a, vec![0.0; spec.dim], eig);
            let pop = Population::uniform(vec![client], bounds)?;
            spectral_point(&pop, spec.alpha, spec.gamma, &WeightScheme::k_only(k)?)
        })
        .collect();
    let mut points = Vec::new();
    for (&k, r) in spec.k_grid.iter().zip(evaluated) {
        let (kappa, delta) = r?;
        for &kind in &spec.optimizers {
            points.push(FrontierPoint {
                axis_value: k as f64,
                rho: bounds::rho_from_kappa(kappa, kind)?,
                delta: Some(delta),
                kappa,
                kappa_source: KappaSource::ExactSpectral,
                alpha: spec.alpha,
                gamma: spec.gamma,
                k,
                scheme: WeightScheme::k_only(k)?.tag().to_string(),
                optimizer: kind,
            });
        }
    }
    Ok(Frontier { points, skipped: Vec::new() })
}

/// One simulated frontier per seed.
pub fn simulated_maml_ensemble(spec: &SimulatedMamlSpec, seeds: &[u64]) -> Result<Vec<Frontier>> {
    seeds.iter().map(|&seed| simulated_maml_sweep(&SimulatedMamlSpec { seed, ..spec.clone() })).collect()
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Euclidean distance from a point to a polyline.
pub fn point_polyline_distance(p: (f64, f64), line: &[(f64, f64)]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [q] => point_segment_distance(p, *q, *q),
        _ => line.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub max_distance: f64,
    pub pass: bool,
}

/// Largest distance from a point of `inner` to the `outer` polyline.
pub fn frontier_subset_check(inner: &[(f64, f64)], outer: &[(f64, f64)], tol: f64) -> Result<SubsetReport> {
    if inner.is_empty() || outer.is_empty() {
        return Err(Error::InvalidInput("frontiers must be nonempty".into()));
    }
    let max_distance = inner.iter().map(|&p| point_polyline_distance(p, outer)).fold(0.0, f64::max);
    Ok(SubsetReport { max_distance, pass: max_distance <= tol })
}

/// Symmetric Hausdorff distance between two polylines, measured from each
/// vertex to the other polyline.
pub fn hausdorff_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let one_way = |x: &[(f64, f64)], y: &[(f64, f64)]| x.iter().map(|&p| point_polyline_distance(p, y)).fold(0.0, f64::max);
    one_way(a, b).max(one_way(b, a))
}

/// Hausdorff distance between a frontier and its mirror image across
/// `ρ = Δ`.
pub fn symmetry_measure(series: &[(f64, f64)]) -> f64 {
    let mirrored: Vec<(f64, f64)> = series.iter().rev().map(|&(r, d)| (d, r)).collect();
    hausdorff_distance(series, &mirrored)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCrosscheck {
    pub rho_measured: f64,
    pub rho_predicted: f64,
    pub rounds_used: usize,
}

/// Runs the deterministic procedure with an auto-tuned server optimizer and
/// compares the geometric-mean contraction of `‖x_t − x*(α, γ, Θ)‖` with the
/// rate predicted from the condition number.
///
/// The error `x_t − x̃*` evolves independently of the centers, so the run uses
/// a copy of the population with all centers at the origin, started from the
/// unit vector along `x0 − x̃*`; the error then stays resolvable down to
/// [`ERROR_FLOOR`]. The mean is taken over the second half of the rounds before
/// that floor (at least rounds 5 onwards) so that polynomial transients of
/// repeated roots fade.
pub fn empirical_rate_crosscheck(
    pop: &Population,
    alpha: f64,
    gamma: f64,
    theta: &WeightScheme,
    kind: OptimizerKind,
    rounds: usize,
    x0: &[f64],
) -> Result<RateCrosscheck> {
    let kappa = bounds::kappa_exact(pop, alpha, gamma, theta)?.kappa_exact;
    let rho_predicted = bounds::rho_from_kappa(kappa, kind)?;
    let target = world::surrogate_minimizer(pop, alpha, gamma, theta)?;
    let direction = matrix::sub(x0, &target);
    let e0 = matrix::norm(&direction);
    let none = RateCrosscheck { rho_measured: 0.0, rho_predicted, rounds_used: 0 };
    if e0 == 0.0 || rounds == 0 {
        return Ok(none);
    }
    let homogeneous = centered_copy(pop)?;
    let start_point: Vec<f64> = direction.iter().map(|v| v / e0).collect();
    let (mu_t, l_t) = bounds::surrogate_spectrum(pop, alpha, gamma, theta)?;
    let opt = engine::auto_tune(kind, l_t, mu_t)?;
    let rounds = rounds.min(rounds_to_floor(rho_predicted));
    let cfg = RunConfig::deterministic(&homogeneous, alpha, gamma, theta.clone(), rounds);
    let traj = engine::run(&homogeneous, &start_point, &cfg, &opt)?;
    let errors: Vec<f64> = traj.iterates.iter().map(|x| matrix::norm(x)).collect();
    let last = (0..=rounds).take_while(|&t| errors[t] > ERROR_FLOOR).last().unwrap_or(0);
    let first = (last / 2).max(5.min(last));
    if last <= first {
        return Ok(none);
    }
    let rho_measured = (errors[last] / errors[first]).powf(1.0 / (last - first) as f64);
    Ok(RateCrosscheck { rho_measured, rho_predicted, rounds_used: last - first })
}

/// Smallest error norm used when measuring rates; well above the subnormal
/// range, where arithmetic slows down by orders of magnitude.
pub const ERROR_FLOOR: f64 = 1e-200;

/// Rounds a method with rate `rho` needs to bring a unit error below
/// [`ERROR_FLOOR`], with slack for polynomial transients.
pub fn rounds_to_floor(rho: f64) -> usize {
    if rho <= 0.0 {
        return 20;
    }
    let needed = ERROR_FLOOR.ln() / rho.min(1.0 - 1e-12).ln();
    (1.25 * needed).min(1e7) as usize + 20
}

/// Same matrices and weights, every center at the origin.
fn centered_copy(pop: &Population) -> Result<Population> {
    let clients = pop
        .clients()
        .iter()
        .map(|c| ClientModel::with_decomposition(c.a_matrix().clone(), vec![0.0; c.dim()], c.eigen().clone()))
        .collect();
    Population::new(clients, pop.weights().to_vec(), *pop.bounds())
}
