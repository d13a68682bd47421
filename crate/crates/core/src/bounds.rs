//! Closed-form condition numbers, rates and distance bounds.
//!
//! Everything here is evaluated from spectra through the scalar map
//! `λ ↦ Σ_k θ_k (1 − γ(λ + α))^{k−1} λ`, which gives the eigenvalues of
//! `Q_i A_i` without forming the matrix. Expectations over clients are
//! accumulated in log space so that very long schemes do not underflow.

use serde::{Deserialize, Serialize};

use crate::engine::OptimizerKind;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, SpectrumBounds, SymmetricMatrix};
use crate::scheme::{SchemeFamily, WeightScheme};
use crate::world::{self, ClientModel, Population};

const COMMUTE_TOL: f64 = 1e-9;

/// `φ(λ, α, γ, K) = Σ_{k=1}^K (1 − γ(λ + α))^{k−1} λ`.
pub fn phi(lambda: f64, alpha: f64, gamma: f64, k: u64) -> f64 {
    match WeightScheme::first_k(k) {
        Ok(t) => t.hessian_eigenvalue(lambda, alpha, gamma),
        Err(_) => 0.0,
    }
}

/// `ψ(λ, α, γ, K) = (1 − γ(λ + α))^{K−1} λ`.
pub fn psi(lambda: f64, alpha: f64, gamma: f64, k: u64) -> f64 {
    match WeightScheme::k_only(k) {
        Ok(t) => t.hessian_eigenvalue(lambda, alpha, gamma),
        Err(_) => 0.0,
    }
}

fn check_bounds(mu: f64, ell: f64, alpha: f64, gamma: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= ell && ell.is_finite()) {
        return Err(Error::InvalidInput(format!("need 0 < mu <= L, got mu = {mu}, L = {ell}")));
    }
    if !(alpha >= 0.0 && gamma >= 0.0 && alpha.is_finite() && gamma.is_finite()) {
        return Err(Error::InvalidInput("alpha and gamma must be nonnegative".into()));
    }
    Ok(())
}

/// `φ(L)/φ(μ)`, the condition-number bound for `Θ_{1:K}`.
pub fn kappa_bound_fedavg(mu: f64, ell: f64, alpha: f64, gamma: f64, k: u64) -> Result<f64> {
    check_bounds(mu, ell, alpha, gamma)?;
    if gamma * (ell + alpha) >= 1.0 {
        return Err(Error::Precondition(format!("gamma = {gamma} must be below 1/(L + alpha) = {}", 1.0 / (ell + alpha))));
    }
    let t = WeightScheme::first_k(k)?;
    let ln = |l: f64| t.ln_polynomial_at_shift(gamma * (l + alpha)).expect("positive below the threshold") + l.ln();
    Ok((ln(ell) - ln(mu)).exp())
}

/// `((1 − γ(L + α))/(1 − γ(μ + α)))^{K−1} · L/μ`, the bound for `Θ_K`.
pub fn kappa_bound_maml(mu: f64, ell: f64, alpha: f64, gamma: f64, k: u64) -> Result<f64> {
    check_bounds(mu, ell, alpha, gamma)?;
    if k == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    if gamma * (k as f64 * ell + alpha) >= 1.0 {
        return Err(Error::Precondition(format!(
            "gamma = {gamma} must be below 1/(K L + alpha) = {}",
            1.0 / (k as f64 * ell + alpha)
        )));
    }
    let ln_ratio = (-gamma * (ell + alpha)).ln_1p() - (-gamma * (mu + alpha)).ln_1p();
    Ok(((k - 1) as f64 * ln_ratio + (ell / mu).ln()).exp())
}

/// Condition number of the surrogate computed from client spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    /// `E_i[λ_max(Q_i A_i)] / E_i[λ_min(Q_i A_i)]`.
    pub kappa_exact: f64,
    /// Closed-form bound for the scheme's family, when its precondition holds.
    pub kappa_bound: Option<f64>,
    pub l_tilde: f64,
    pub mu_tilde: f64,
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Log of the extreme eigenvalues of `f(A)` where `f` is the scalar map with
/// log-value `ln_map`, taken over the whole spectrum (the map need not be
/// monotone).
fn ln_extremes(client: &ClientModel, ln_map: impl Fn(f64) -> Option<f64>) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &lambda in client.spectrum() {
        let v = ln_map(lambda).ok_or_else(|| {
            Error::Precondition(format!("nonpositive eigenvalue in the distorted spectrum at lambda = {lambda}"))
        })?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

fn check_population_gamma(pop: &Population, alpha: f64, gamma: f64) -> Result<()> {
    world::check_positive_distortion(pop, alpha, gamma)
}

/// Exact condition number of the surrogate via the eigenvalue map, plus the
/// family's closed-form bound when applicable.
pub fn kappa_exact(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<KappaReport> {
    check_population_gamma(pop, alpha, gamma)?;
    let mut ln_max = Vec::with_capacity(pop.len());
    let mut ln_min = Vec::with_capacity(pop.len());
    for (client, p) in pop.clients().iter().zip(pop.weights()) {
        if *p == 0.0 {
            continue;
        }
        let (lo, hi) = ln_extremes(client, |l| {
            if l <= 0.0 {
                return None;
            }
            theta.ln_polynomial_at_shift(gamma * (l + alpha)).map(|v| v + l.ln())
        })?;
        ln_max.push(hi + p.ln());
        ln_min.push(lo + p.ln());
    }
    let ln_l = log_sum_exp(ln_max.into_iter());
    let ln_m = log_sum_exp(ln_min.into_iter());
    let b = pop.bounds();
    let kappa_bound = match theta.family() {
        SchemeFamily::FirstK => kappa_bound_fedavg(b.mu, b.ell, alpha, gamma, theta.size()).ok(),
        SchemeFamily::KOnly => kappa_bound_maml(b.mu, b.ell, alpha, gamma, theta.size()).ok(),
        SchemeFamily::General => None,
    };
    Ok(KappaReport { kappa_exact: (ln_l - ln_m).exp(), kappa_bound, l_tilde: ln_l.exp(), mu_tilde: ln_m.exp() })
}

/// Extreme eigenvalues `(μ̃, L̃)` of the surrogate Hessian `E[Q_i A_i]`.
pub fn surrogate_spectrum(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<(f64, f64)> {
    let h = world::surrogate_hessian(pop, alpha, gamma, theta)?;
    let eig = h.eigh()?;
    Ok((eig.min(), eig.max()))
}

/// Table 2 rate for an optimizer on a `κ`-conditioned quadratic.
pub fn rho_from_kappa(kappa: f64, kind: OptimizerKind) -> Result<f64> {
    if !(kappa >= 1.0 - 1e-12) || kappa.is_nan() {
        return Err(Error::InvalidInput(format!("condition number must be >= 1, got {kappa}")));
    }
    let kappa = kappa.max(1.0);
    if kappa.is_infinite() {
        return Ok(1.0);
    }
    Ok(match kind {
        OptimizerKind::Plain => (kappa - 1.0) / (kappa + 1.0),
        OptimizerKind::Nesterov => 1.0 - 2.0 / (3.0 * kappa + 1.0).sqrt(),
        OptimizerKind::HeavyBall => {
            let s = kappa.sqrt();
            (s - 1.0) / (s + 1.0)
        }
    })
}

/// `Δ = (√κ₀ − √κ)/(√κ₀ + √κ)`.
pub fn delta_from_kappa(kappa: f64, kappa0: f64) -> Result<f64> {
    if !(kappa0 >= 1.0) || kappa.is_nan() {
        return Err(Error::InvalidInput(format!("kappa0 must be >= 1, got {kappa0}")));
    }
    if kappa > kappa0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("kappa = {kappa} exceeds kappa0 = {kappa0}")));
    }
    if kappa < 1.0 - 1e-12 {
        return Err(Error::InvalidInput(format!("kappa must be >= 1, got {kappa}")));
    }
    Ok(ratio_gap((kappa.max(1.0) / kappa0).min(1.0).sqrt()))
}

/// `(√b − √a)/(√b + √a)` for `0 < a ≤ b`.
pub fn delta_from_distortion(a: f64, b: f64) -> f64 {
    delta_from_ln_distortion(a.ln(), b.ln())
}

/// [`delta_from_distortion`] from `ln a` and `ln b`.
pub fn delta_from_ln_distortion(ln_a: f64, ln_b: f64) -> f64 {
    ratio_gap((0.5 * (ln_a - ln_b)).exp().min(1.0))
}

fn ratio_gap(r: f64) -> f64 {
    (1.0 - r) / (1.0 + r)
}

/// Extreme eigenvalues over all distortion matrices, in log space:
/// `(ln min_i λ_min(Q_i), ln max_i λ_max(Q_i))`.
pub fn ln_distortion_extremes(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<(f64, f64)> {
    check_population_gamma(pop, alpha, gamma)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for client in pop.clients() {
        let (a, b) = ln_extremes(client, |l| theta.ln_polynomial_at_shift(gamma * (l + alpha)))?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

/// Constant in front of the distance bound: `2C` in one dimension, `8C`
/// otherwise.
pub fn distance_constant(dim: usize, c_radius: f64) -> f64 {
    if dim == 1 {
        2.0 * c_radius
    } else {
        8.0 * c_radius
    }
}

/// Bound on `‖x*(α, γ, Θ) − x*‖` from the distortion spectra.
pub fn distance_bound(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<f64> {
    let (ln_a, ln_b) = ln_distortion_extremes(pop, alpha, gamma, theta)?;
    Ok(distance_constant(pop.dim(), pop.bounds().c_radius) * delta_from_ln_distortion(ln_a, ln_b))
}

/// `8C·Δ(κ, κ₀)`.
pub fn distance_bound_from_kappa(kappa: f64, kappa0: f64, c_radius: f64) -> Result<f64> {
    Ok(8.0 * c_radius * delta_from_kappa(kappa, kappa0)?)
}

/// Distance bound through the family's closed-form condition number, for
/// `Θ_{1:K}` (needs `γ < (L+α)⁻¹`) and `Θ_K` (needs `γ < (KL+α)⁻¹`).
pub fn distance_bound_closed_form(bounds: &SpectrumBounds, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<f64> {
    let kappa = closed_form_kappa(bounds, alpha, gamma, theta)?;
    distance_bound_from_kappa(kappa, bounds.condition_number(), bounds.c_radius)
}

/// Closed-form `κ(α, γ, Θ)` for the two covered families.
/// A single local step leaves the problem undistorted, so `K = 1` returns
/// `L/μ` exactly.
pub fn closed_form_kappa(bounds: &SpectrumBounds, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<f64> {
    let kappa = match theta.family() {
        SchemeFamily::FirstK => kappa_bound_fedavg(bounds.mu, bounds.ell, alpha, gamma, theta.size())?,
        SchemeFamily::KOnly => kappa_bound_maml(bounds.mu, bounds.ell, alpha, gamma, theta.size())?,
        SchemeFamily::General => {
            return Err(Error::InvalidInput("closed-form condition numbers exist only for first-k and k-only schemes".into()))
        }
    };
    Ok(if theta.size() == 1 { bounds.condition_number() } else { kappa })
}

/// `cond(Q_i)` for one client, from its spectrum.
pub fn distortion_condition(client: &ClientModel, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<f64> {
    let (lo, hi) = ln_extremes(client, |l| theta.ln_polynomial_at_shift(gamma * (l + alpha)))?;
    Ok((hi - lo).exp())
}

/// Finite distribution on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("distribution needs at least one value".into()));
        }
        if values.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: probs.len() });
        }
        if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput("values must be finite and probabilities nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { values, probs })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    /// `(a, b)`: smallest and largest value carrying positive probability.
    pub fn support_extremes(&self) -> (f64, f64) {
        self.support().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.probs).filter(|(_, p)| **p > 0.0).map(|(v, _)| *v)
    }

    /// Whether every value with positive probability is `a` or `b`.
    pub fn is_two_point(&self) -> bool {
        let (a, b) = self.support_extremes();
        self.support().all(|v| v == a || v == b)
    }
}

/// `D(X) = E|X − E[X]|`.
pub fn mad(dist: &DiscreteDistribution) -> f64 {
    let m = dist.mean();
    dist.values.iter().zip(&dist.probs).map(|(v, p)| p * (v - m).abs()).sum()
}

/// `2(b − E[X])(E[X] − a)/(b − a)`, zero when `a = b`.
pub fn mad_bound(dist: &DiscreteDistribution) -> f64 {
    let (a, b) = dist.support_extremes();
    if b <= a {
        return 0.0;
    }
    let m = dist.mean().clamp(a, b);
    2.0 * (b - m) * (m - a) / (b - a)
}

fn check_weighted_family(x: &[SymmetricMatrix], y: &[SymmetricMatrix]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InvalidInput("need at least one matrix".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let dim = x[0].dim();
    for (i, (xi, yi)) in x.iter().zip(y).enumerate() {
        if xi.dim() != dim || yi.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: xi.dim().max(yi.dim()) });
        }
        let scale = 1.0 + xi.as_matrix().frobenius_norm() * yi.as_matrix().frobenius_norm();
        let residual = xi.commutator_norm(yi)?;
        if residual > COMMUTE_TOL * scale {
            return Err(Error::NonCommuting { index: i, residual });
        }
        let lo = yi.eigh()?.min();
        if lo <= 0.0 {
            return Err(Error::Singular { lambda_min: lo });
        }
    }
    Ok(dim)
}

fn weighted_sums(x: &[SymmetricMatrix], y: &[SymmetricMatrix], dim: usize) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    let mut s = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
    let mut total = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
    for (xi, yi) in x.iter().zip(y) {
        s = s.add(&xi.mul_commuting(yi)?)?;
        total = total.add(yi)?;
    }
    Ok((s, total))
}

/// `f(X|Y) = (Σ X_i Y_i) Y⁻¹` with `Y = Σ Y_i`. Each pair must commute and
/// each `Y_i` must be positive definite.
pub fn matrix_weighted_mean(x: &[SymmetricMatrix], y: &[SymmetricMatrix]) -> Result<Matrix> {
    let dim = check_weighted_family(x, y)?;
    let (s, total) = weighted_sums(x, y, dim)?;
    s.as_matrix().matmul(total.inverse_spd()?.as_matrix())
}

/// Eigenvalues of `f(X|Y)`, via the similar symmetric matrix
/// `Y^{-1/2} S Y^{-1/2}`.
pub fn matrix_weighted_mean_spectrum(x: &[SymmetricMatrix], y: &[SymmetricMatrix]) -> Result<Vec<f64>> {
    let dim = check_weighted_family(x, y)?;
    let (s, total) = weighted_sums(x, y, dim)?;
    let inv_sqrt = total.eigh()?.map_spectrum(|v| 1.0 / v.sqrt()).reconstruct();
    let p = inv_sqrt.as_matrix().matmul(s.as_matrix())?.matmul(inv_sqrt.as_matrix())?;
    Ok(p.symmetrize().eigh()?.eigenvalues)
}

/// `M(X|Y) = Σ ‖Y⁻¹ f(X|Y)⁻¹ (X_i − f(X|Y)) Y_i‖` in operator norm.
/// `Y⁻¹ f⁻¹` simplifies to `(Σ X_i Y_i)⁻¹`.
pub fn matrix_weighted_discrepancy(x: &[SymmetricMatrix], y: &[SymmetricMatrix]) -> Result<f64> {
    let dim = check_weighted_family(x, y)?;
    let (s, total) = weighted_sums(x, y, dim)?;
    let s_inv = s.inverse_spd()?;
    let f = s.as_matrix().matmul(total.inverse_spd()?.as_matrix())?;
    let mut sum = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let term = s_inv.as_matrix().matmul(&xi.as_matrix().sub(&f)?)?.matmul(yi.as_matrix())?;
        sum += term.spectral_norm()?;
    }
    Ok(sum)
}

/// `2(b − a)/b`.
pub fn matrix_discrepancy_bound(a: f64, b: f64) -> f64 {
    2.0 * (b - a) / b
}

/// Two scalar clients `A = (4, 1)`, `c = (1, −1)` with weights `(p, 1 − p)`,
/// `C = 1`.
pub fn tightness_b2_population(p: f64) -> Result<Population> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("p must lie in (0, 1), got {p}")));
    }
    let clients = vec![
        ClientModel::new(SymmetricMatrix::diagonal(&[4.0]), vec![1.0])?,
        ClientModel::new(SymmetricMatrix::diagonal(&[1.0]), vec![-1.0])?,
    ];
    Population::new(clients, vec![p, 1.0 - p], SpectrumBounds::new(1.0, 4.0, 1.0)?)
}

/// Measured minimizer distance and its `2C` bound for the two-client
/// construction with `α = 0`, `γ = 1/8`, `Θ_K`.
pub fn tightness_case_b2(k: u64, p: f64) -> Result<(f64, f64)> {
    let pop = tightness_b2_population(p)?;
    let theta = WeightScheme::k_only(k)?;
    let distance = world::minimizer_distance(&pop, 0.0, 0.125, &theta)?;
    let bound = distance_bound(&pop, 0.0, 0.125, &theta)?;
    Ok((distance, bound))
}

/// `K → ∞` limit of the measured distance in [`tightness_case_b2`].
pub fn tightness_b2_limit(p: f64) -> f64 {
    8.0 * p / (3.0 * p + 1.0)
}

/// Single client `A = diag(L, μ)` on which the condition-number bounds are
/// attained.
pub fn tightness_b3_population(mu: f64, ell: f64) -> Result<Population> {
    let client = world::diagonal_client(&[ell, mu])?;
    Population::uniform(vec![client], SpectrumBounds::new(mu, ell, 0.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn phi_examples() {
        assert_eq!(phi(3.0, 0.2, 0.1, 1), 3.0);
        assert_eq!(phi(3.0, 0.0, 0.0, 7), 21.0);
        assert_relative_eq!(phi(1.0, 0.0, 0.1, 3), 2.71, max_relative = 1e-15);
    }

    #[test]
    fn phi_forms_agree_across_the_switch() {
        for &(l, a, g) in &[(1.0, 0.0, 0.01), (10.0, 0.5, 0.05), (2.0, 1.0, 1e-6)] {
            for k in [63u64, 64, 65, 200] {
                let s = g * (l + a);
                let closed = (1.0 - (1.0f64 - s).powi(k as i32)) / s * l;
                assert_relative_eq!(phi(l, a, g, k), closed, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(4.0, 0.3, 0.1, 1), 4.0);
        assert_eq!(psi(4.0, 0.3, 0.0, 9), 4.0);
        assert_relative_eq!(psi(10.0, 0.0, 0.01, 2), 9.0, max_relative = 1e-15);
    }

    #[test]
    fn kappa_bound_examples() {
        assert_relative_eq!(kappa_bound_fedavg(1.0, 10.0, 0.0, 0.0, 5).unwrap(), 10.0, max_relative = 1e-15);
        assert_relative_eq!(kappa_bound_fedavg(1.0, 10.0, 0.0, 0.05, 2).unwrap(), 15.0 / 1.95, max_relative = 1e-14);
        assert_abs_diff_eq!(kappa_bound_fedavg(1.0, 10.0, 0.0, 0.05, 1_000_000).unwrap(), 1.0, epsilon = 1e-6);
        assert!(kappa_bound_fedavg(1.0, 10.0, 0.0, 0.1, 2).is_err());
        assert_relative_eq!(kappa_bound_maml(1.0, 10.0, 0.0, 0.01, 1).unwrap(), 10.0, max_relative = 1e-15);
        assert_relative_eq!(kappa_bound_maml(1.0, 10.0, 0.3, 0.0, 7).unwrap(), 10.0, max_relative = 1e-15);
        assert_relative_eq!(kappa_bound_maml(1.0, 10.0, 0.0, 0.01, 2).unwrap(), 0.9 / 0.99 * 10.0, max_relative = 1e-14);
        assert!(kappa_bound_maml(1.0, 10.0, 0.0, 0.01, 10).is_err());
    }

    #[test]
    fn rho_examples() {
        for kind in OptimizerKind::ALL {
            assert_eq!(rho_from_kappa(1.0, kind).unwrap(), 0.0);
        }
        assert_relative_eq!(rho_from_kappa(9.0, OptimizerKind::Plain).unwrap(), 0.8, max_relative = 1e-15);
        assert_relative_eq!(rho_from_kappa(9.0, OptimizerKind::HeavyBall).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(rho_from_kappa(9.0, OptimizerKind::Nesterov).unwrap(), 0.622_035_527_4, max_relative = 1e-9);
        assert!(rho_from_kappa(0.5, OptimizerKind::Plain).is_err());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_from_kappa(10.0, 10.0).unwrap(), 0.0);
        assert_relative_eq!(delta_from_kappa(2.5, 10.0).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(delta_from_kappa(1.0, 10.0).unwrap(), 0.519_493_853_4, max_relative = 1e-9);
        assert!(delta_from_kappa(11.0, 10.0).is_err());
        assert_relative_eq!(distance_bound_from_kappa(2.5, 10.0, 1.0).unwrap(), 8.0 / 3.0, max_relative = 1e-15);
        assert_eq!(distance_bound_from_kappa(10.0, 10.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn distance_bound_trivial_cases() {
        let pop = tightness_b2_population(0.5).unwrap();
        assert_eq!(distance_bound(&pop, 0.0, 0.1, &WeightScheme::one()).unwrap(), 0.0);
        assert_eq!(distance_bound(&pop, 0.0, 0.0, &WeightScheme::first_k(9).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn mad_examples() {
        let c = DiscreteDistribution::new(vec![3.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert_eq!((mad(&c), mad_bound(&c)), (0.0, 0.0));
        let two = DiscreteDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!((mad(&two), mad_bound(&two)), (0.5, 0.5));
        let three = DiscreteDistribution::new(vec![0.0, 0.5, 1.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(mad(&three), 0.25);
        assert_eq!(mad_bound(&three), 0.5);
        assert!(!three.is_two_point());
        assert!(DiscreteDistribution::new(vec![1.0], vec![0.9]).is_err());
    }

    #[test]
    fn matrix_mean_examples() {
        let x = vec![SymmetricMatrix::diagonal(&[2.0]), SymmetricMatrix::diagonal(&[4.0])];
        let y = vec![SymmetricMatrix::identity(1), SymmetricMatrix::identity(1)];
        assert_relative_eq!(matrix_weighted_mean(&x, &y).unwrap().get(0, 0), 3.0, max_relative = 1e-15);
        // D(X)/|E[X]| = 1/3.
        assert_relative_eq!(matrix_weighted_discrepancy(&x, &y).unwrap(), 1.0 / 3.0, max_relative = 1e-14);
        assert!(matrix_weighted_discrepancy(&x, &y).unwrap() <= matrix_discrepancy_bound(2.0, 4.0));

        let a = SymmetricMatrix::diagonal(&[2.0, 5.0]);
        let w = SymmetricMatrix::diagonal(&[1.0, 3.0]);
        let f = matrix_weighted_mean(std::slice::from_ref(&a), std::slice::from_ref(&w)).unwrap();
        assert!(f.sub(a.as_matrix()).unwrap().frobenius_norm() < 1e-14);
        assert!(matrix_weighted_discrepancy(std::slice::from_ref(&a), std::slice::from_ref(&w)).unwrap() < 1e-14);
        assert!(matrix_weighted_discrepancy(&[a.clone(), a.clone()], &[w, SymmetricMatrix::identity(2)]).unwrap() < 1e-14);
    }

    #[test]
    fn matrix_mean_rejects_bad_pairs() {
        let x = SymmetricMatrix::new(2, vec![1.0, 0.5, 0.5, 2.0]).unwrap();
        let y = SymmetricMatrix::diagonal(&[1.0, 3.0]);
        assert!(matches!(matrix_weighted_mean(&[x], &[y]), Err(Error::NonCommuting { index: 0, .. })));
        let x = SymmetricMatrix::diagonal(&[1.0, 2.0]);
        let y = SymmetricMatrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(matrix_weighted_mean(&[x], &[y]), Err(Error::Singular { .. })));
    }

    #[test]
    fn tightness_b2() {
        let (d1, b1) = tightness_case_b2(1, 0.3).unwrap();
        assert_eq!((d1, b1), (0.0, 0.0));
        let (d, b) = tightness_case_b2(200, 0.999).unwrap();
        assert!(d >= 1.99 && b >= 1.99 && d <= b);
        let (d, _) = tightness_case_b2(400, 0.4).unwrap();
        assert_abs_diff_eq!(d, tightness_b2_limit(0.4), epsilon = 1e-12);
    }

    #[test]
    fn tightness_b3() {
        let pop = tightness_b3_population(1.0, 10.0).unwrap();
        let r = kappa_exact(&pop, 0.2, 0.03, &WeightScheme::first_k(7).unwrap()).unwrap();
        assert_relative_eq!(r.kappa_exact, phi(10.0, 0.2, 0.03, 7) / phi(1.0, 0.2, 0.03, 7), max_relative = 1e-12);
        assert_relative_eq!(r.kappa_exact, r.kappa_bound.unwrap(), max_relative = 1e-12);
        let r = kappa_exact(&pop, 0.0, 0.01, &WeightScheme::k_only(5).unwrap()).unwrap();
        assert_relative_eq!(r.kappa_exact, psi(10.0, 0.0, 0.01, 5) / psi(1.0, 0.0, 0.01, 5), max_relative = 1e-12);
        let r = kappa_exact(&pop, 0.0, 0.09, &WeightScheme::one()).unwrap();
        assert_relative_eq!(r.kappa_exact, 10.0, max_relative = 1e-12);
        assert_relative_eq!(r.kappa_exact, r.l_tilde / r.mu_tilde, max_relative = 1e-12);
    }

    #[test]
    fn pairwise_commuting_family_can_exceed_matrix_bound() {
        // Each pair commutes but the two pairs use different eigenbases.
        let t = std::f64::consts::PI / 8.0;
        let rot = Matrix::from_rows(2, vec![t.cos(), -t.sin(), t.sin(), t.cos()]).unwrap();
        let x = vec![SymmetricMatrix::diagonal(&[1.0, 8.0]), SymmetricMatrix::from_spectrum(&rot, &[1.0, 8.0]).unwrap()];
        let y = vec![SymmetricMatrix::diagonal(&[4.0, 16.0]), SymmetricMatrix::from_spectrum(&rot, &[1.0, 64.0]).unwrap()];
        let m = matrix_weighted_discrepancy(&x, &y).unwrap();
        assert_relative_eq!(m, 2.5508281842958276, max_relative = 1e-10);
        assert!(m > matrix_discrepancy_bound(1.0, 8.0));
    }
}
