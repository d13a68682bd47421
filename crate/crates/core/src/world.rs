//! Client populations of quadratic losses and their surrogate losses.
//!
//! Client `i` has loss `f_i(x) = ½‖A_i^{1/2}(x − c_i)‖²`. Running the local
//! update procedure with parameters `(α, γ, Θ)` is, in expectation, gradient
//! descent on the surrogate `f̃_i(x) = ½‖(Q_i A_i)^{1/2}(x − c_i)‖²` where
//! `Q_i = Σ_k θ_k (I − γ(A_i + αI))^{k−1}` is the client's distortion matrix.
//! Surrogate loss values drop the additive constant that the proximal term
//! introduces; only gradients and minimizers are used downstream.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{self, EigenDecomposition, SpectrumBounds, SymmetricMatrix};
use crate::rng;
use crate::scheme::{SchemeFamily, WeightScheme};

const SPECTRUM_TOL: f64 = 1e-9;
const WEIGHT_TOL: f64 = 1e-12;

/// One example `z`: loss `½‖B_z^{1/2}(x − c_z)‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticExample {
    pub b_matrix: SymmetricMatrix,
    pub center: Vec<f64>,
}

impl QuadraticExample {
    pub fn new(b_matrix: SymmetricMatrix, center: Vec<f64>) -> Result<Self> {
        if b_matrix.dim() != center.len() {
            return Err(Error::DimensionMismatch { expected: b_matrix.dim(), found: center.len() });
        }
        Ok(Self { b_matrix, center })
    }

    /// `B_z(x − c_z)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.b_matrix.matvec(&matrix::sub(x, &self.center)).expect("dims checked at construction")
    }
}

/// A client's quadratic loss `(A_i, c_i)`, optionally backed by a finite,
/// uniformly weighted example set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientModel {
    a_matrix: SymmetricMatrix,
    center: Vec<f64>,
    examples: Option<Vec<QuadraticExample>>,
    eigen: EigenDecomposition,
}

impl ClientModel {
    pub fn new(a_matrix: SymmetricMatrix, center: Vec<f64>) -> Result<Self> {
        if a_matrix.dim() != center.len() {
            return Err(Error::DimensionMismatch { expected: a_matrix.dim(), found: center.len() });
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("client center has non-finite entries".into()));
        }
        let eigen = a_matrix.eigh()?;
        Ok(Self { a_matrix, center, examples: None, eigen })
    }

    /// `A_i = mean(B_z)`, `c_i = A_i⁻¹ mean(B_z c_z)`.
    pub fn from_examples(examples: Vec<QuadraticExample>) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::InvalidInput("client needs at least one example".into()))?;
        let dim = first.center.len();
        let n = examples.len() as f64;
        let mut a = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
        let mut rhs = vec![0.0; dim];
        for ex in &examples {
            if ex.center.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ex.center.len() });
            }
            a = a.add(&ex.b_matrix.scale(1.0 / n))?;
            matrix::axpy(&mut rhs, 1.0 / n, &ex.b_matrix.matvec(&ex.center)?);
        }
        let center = a.solve_spd(&rhs)?;
        let mut client = Self::new(a, center)?;
        client.examples = Some(examples);
        Ok(client)
    }

    pub(crate) fn with_decomposition(a_matrix: SymmetricMatrix, center: Vec<f64>, eigen: EigenDecomposition) -> Self {
        Self { a_matrix, center, examples: None, eigen }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn a_matrix(&self) -> &SymmetricMatrix {
        &self.a_matrix
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn examples(&self) -> Option<&[QuadraticExample]> {
        self.examples.as_deref()
    }

    /// Ascending eigenvalues of `A_i`.
    pub fn spectrum(&self) -> &[f64] {
        &self.eigen.eigenvalues
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eigen
    }

    /// `∇f_i(x) = A_i(x − c_i)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a_matrix.matvec(&matrix::sub(x, &self.center)).expect("dims checked at construction")
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        let d = matrix::sub(x, &self.center);
        0.5 * matrix::dot(&d, &self.a_matrix.matvec(&d).expect("dims checked at construction"))
    }
}

/// Finite client population with sampling distribution `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    clients: Vec<ClientModel>,
    weights: Vec<f64>,
    bounds: SpectrumBounds,
}

impl Population {
    /// Validates every client against the bounds: `μI ⪯ A_i ⪯ LI` and `‖c_i‖ ≤ C`.
    pub fn new(clients: Vec<ClientModel>, weights: Vec<f64>, bounds: SpectrumBounds) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::InvalidInput("population needs at least one client".into()));
        }
        if weights.len() != clients.len() {
            return Err(Error::DimensionMismatch { expected: clients.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("client weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!("client weights sum to {total}, not 1")));
        }
        let dim = clients[0].dim();
        let spectrum_tol = SPECTRUM_TOL * bounds.ell.max(1.0);
        for (i, c) in clients.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
            let (lo, hi) = (c.eigen.min(), c.eigen.max());
            if lo < bounds.mu - spectrum_tol {
                return Err(Error::AssumptionViolated {
                    client: i,
                    detail: format!("lambda_min(A) = {lo} is below mu = {}", bounds.mu),
                });
            }
            if hi > bounds.ell + spectrum_tol {
                return Err(Error::AssumptionViolated {
                    client: i,
                    detail: format!("lambda_max(A) = {hi} exceeds L = {}", bounds.ell),
                });
            }
            let radius = matrix::norm(&c.center);
            if radius > bounds.c_radius + SPECTRUM_TOL {
                return Err(Error::AssumptionViolated {
                    client: i,
                    detail: format!("||c|| = {radius} exceeds C = {}", bounds.c_radius),
                });
            }
        }
        Ok(Self { clients, weights, bounds })
    }

    pub fn uniform(clients: Vec<ClientModel>, bounds: SpectrumBounds) -> Result<Self> {
        let n = clients.len().max(1);
        Self::new(clients, vec![1.0 / n as f64; n], bounds)
    }

    pub fn dim(&self) -> usize {
        self.clients[0].dim()
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    pub fn clients(&self) -> &[ClientModel] {
        &self.clients
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bounds(&self) -> &SpectrumBounds {
        &self.bounds
    }

    /// Largest eigenvalue over all `A_i` (the measured smoothness constant).
    pub fn max_eigenvalue(&self) -> f64 {
        self.clients.iter().map(|c| c.eigen.max()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.clients.iter().map(|c| c.eigen.min()).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn weighted(&self) -> impl Iterator<Item = (&ClientModel, f64)> {
        self.clients.iter().zip(self.weights.iter().copied())
    }
}

fn check_hyper(alpha: f64, gamma: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be >= 0, got {gamma}")));
    }
    Ok(())
}

/// Requires `γ(L + α) < 1` with `L` the population's largest eigenvalue, which
/// makes every distortion matrix positive definite.
pub fn check_positive_distortion(pop: &Population, alpha: f64, gamma: f64) -> Result<()> {
    check_hyper(alpha, gamma)?;
    let ell = pop.max_eigenvalue();
    if gamma * (ell + alpha) >= 1.0 {
        return Err(Error::Precondition(format!(
            "gamma = {gamma} must be below 1/(L + alpha) = {}",
            1.0 / (ell + alpha)
        )));
    }
    Ok(())
}

/// `Q_i(α, γ, Θ) = Σ_k θ_k M^{k−1}` with `M = I − γ(A_i + αI)`, built as a
/// matrix polynomial (no eigendecomposition involved).
pub fn distortion_matrix(client: &ClientModel, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<SymmetricMatrix> {
    check_hyper(alpha, gamma)?;
    let dim = client.dim();
    let step = SymmetricMatrix::identity(dim).sub(&client.a_matrix.add_identity(alpha).scale(gamma))?;
    let k = theta.size();
    match theta.family() {
        SchemeFamily::KOnly => matrix_power(&step, k - 1),
        SchemeFamily::FirstK => geometric_series(&step, k),
        SchemeFamily::General => {
            let coefficients = theta.coefficients();
            let mut q = SymmetricMatrix::scaled_identity(dim, coefficients[coefficients.len() - 1]);
            for &t in coefficients.iter().rev().skip(1) {
                q = q.mul_commuting(&step)?.add_identity(t);
            }
            Ok(q)
        }
    }
}

fn matrix_power(m: &SymmetricMatrix, mut e: u64) -> Result<SymmetricMatrix> {
    let mut result = SymmetricMatrix::identity(m.dim());
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul_commuting(&base)?;
        }
        e >>= 1;
        if e > 0 {
            base = base.mul_commuting(&base)?;
        }
    }
    Ok(result)
}

/// `Σ_{j<n} M^j` by binary doubling: `S_{2m} = S_m + M^m S_m`, `S_{m+1} = S_m + M^m`.
fn geometric_series(m: &SymmetricMatrix, n: u64) -> Result<SymmetricMatrix> {
    let dim = m.dim();
    let mut power = SymmetricMatrix::identity(dim);
    let mut sum = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
    for bit in (0..64 - n.leading_zeros()).rev() {
        sum = sum.add(&power.mul_commuting(&sum)?)?;
        power = power.mul_commuting(&power)?;
        if (n >> bit) & 1 == 1 {
            sum = sum.add(&power)?;
            power = power.mul_commuting(m)?;
        }
    }
    Ok(sum)
}

/// `Q_i A_i`, the Hessian of one client's surrogate.
pub fn client_surrogate_hessian(client: &ClientModel, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<SymmetricMatrix> {
    distortion_matrix(client, alpha, gamma, theta)?.mul_commuting(&client.a_matrix)
}

/// `∇f̃_i(x) = Q_i A_i (x − c_i)`.
pub fn client_surrogate_gradient(
    client: &ClientModel,
    x: &[f64],
    alpha: f64,
    gamma: f64,
    theta: &WeightScheme,
) -> Result<Vec<f64>> {
    let h = client_surrogate_hessian(client, alpha, gamma, theta)?;
    h.matvec(&matrix::sub(x, &client.center))
}

/// `E_i[Q_i A_i]`.
pub fn surrogate_hessian(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<SymmetricMatrix> {
    let dim = pop.dim();
    let mut h = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
    for (client, p) in pop.weighted() {
        h = h.add(&client_surrogate_hessian(client, alpha, gamma, theta)?.scale(p))?;
    }
    Ok(h)
}

/// `∇f̃(x) = E_i[Q_i A_i (x − c_i)]`.
pub fn surrogate_gradient(pop: &Population, x: &[f64], alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<Vec<f64>> {
    check_len(pop, x)?;
    let mut g = vec![0.0; pop.dim()];
    for (client, p) in pop.weighted() {
        matrix::axpy(&mut g, p, &client_surrogate_gradient(client, x, alpha, gamma, theta)?);
    }
    Ok(g)
}

/// `x*(α, γ, Θ) = E[Q_i A_i]⁻¹ E[Q_i A_i c_i]`.
pub fn surrogate_minimizer(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<Vec<f64>> {
    check_positive_distortion(pop, alpha, gamma)?;
    let dim = pop.dim();
    let mut h = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
    let mut rhs = vec![0.0; dim];
    for (client, p) in pop.weighted() {
        let qa = client_surrogate_hessian(client, alpha, gamma, theta)?;
        matrix::axpy(&mut rhs, p, &qa.matvec(&client.center)?);
        h = h.add(&qa.scale(p))?;
    }
    h.solve_spd(&rhs)
}

/// `x* = E[A_i]⁻¹ E[A_i c_i]`.
pub fn empirical_minimizer(pop: &Population) -> Result<Vec<f64>> {
    let dim = pop.dim();
    let mut h = SymmetricMatrix::new(dim, vec![0.0; dim * dim])?;
    let mut rhs = vec![0.0; dim];
    for (client, p) in pop.weighted() {
        matrix::axpy(&mut rhs, p, &client.a_matrix.matvec(&client.center)?);
        h = h.add(&client.a_matrix.scale(p))?;
    }
    h.solve_spd(&rhs)
}

/// `‖x*(α, γ, Θ) − x*‖`.
pub fn minimizer_distance(pop: &Population, alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<f64> {
    let surrogate = surrogate_minimizer(pop, alpha, gamma, theta)?;
    let empirical = empirical_minimizer(pop)?;
    Ok(matrix::distance(&surrogate, &empirical))
}

/// `f(x) = E_i[½‖A_i^{1/2}(x − c_i)‖²]`. For example-backed clients this
/// differs from the example average by a constant.
pub fn loss_value(pop: &Population, x: &[f64]) -> Result<f64> {
    check_len(pop, x)?;
    Ok(pop.weighted().map(|(c, p)| p * c.loss(x)).sum())
}

/// `f̃(x, α, γ, Θ)` without the additive constant.
pub fn surrogate_loss_value(pop: &Population, x: &[f64], alpha: f64, gamma: f64, theta: &WeightScheme) -> Result<f64> {
    check_len(pop, x)?;
    let mut total = 0.0;
    for (client, p) in pop.weighted() {
        let qa = client_surrogate_hessian(client, alpha, gamma, theta)?;
        total += p * 0.5 * qa.quadratic_form(&matrix::sub(x, &client.center))?;
    }
    Ok(total)
}

fn check_len(pop: &Population, x: &[f64]) -> Result<()> {
    if x.len() != pop.dim() {
        return Err(Error::DimensionMismatch { expected: pop.dim(), found: x.len() });
    }
    Ok(())
}

/// Recipe for a random population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub dim: usize,
    pub clients: usize,
    pub bounds: SpectrumBounds,
    /// When set, each client is backed by this many random examples.
    pub examples_per_client: Option<usize>,
    /// Uniform client weights instead of random ones.
    pub uniform_weights: bool,
}

/// Draws a random population satisfying the spec's bounds.
///
/// Each `A_i` gets a random sub-interval of `[μ, L]` as its spectrum (the
/// full interval in dimension 1 collapses to a random point), centers are
/// uniform in direction with radius uniform in `[0, C]`.
pub fn random_population(spec: &PopulationSpec, seed: u64) -> Result<Population> {
    if spec.clients == 0 {
        return Err(Error::InvalidInput("population needs at least one client".into()));
    }
    let mut stream = rng::seeded(seed);
    let bounds = spec.bounds;
    let mut clients = Vec::with_capacity(spec.clients);
    for _ in 0..spec.clients {
        let client = match spec.examples_per_client {
            None => {
                let (a, eig) = random_spectrum_matrix(spec.dim, &bounds, &mut stream)?;
                let c = random_center(spec.dim, bounds.c_radius, &mut stream);
                ClientModel::with_decomposition(a, c, eig)
            }
            Some(n) => random_example_client(spec.dim, n, &bounds, &mut stream)?,
        };
        clients.push(client);
    }
    let weights = if spec.uniform_weights {
        vec![1.0 / spec.clients as f64; spec.clients]
    } else {
        let raw: Vec<f64> = (0..spec.clients).map(|_| 0.1 + stream.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // Absorb rounding so the weights sum to one as closely as possible.
        let head: f64 = w[..w.len() - 1].iter().sum();
        let last = w.len() - 1;
        w[last] = 1.0 - head;
        w
    };
    Population::new(clients, weights, bounds)
}

fn random_spectrum_matrix(
    dim: usize,
    bounds: &SpectrumBounds,
    stream: &mut rng::Stream,
) -> Result<(SymmetricMatrix, EigenDecomposition)> {
    let (mu, ell) = (bounds.mu, bounds.ell);
    let mut draw = || mu + (ell - mu) * stream.gen::<f64>();
    let (lo, hi) = if dim == 1 {
        let v = draw();
        (v, v)
    } else {
        let (a, b) = (draw(), draw());
        (a.min(b), a.max(b))
    };
    let sub = SpectrumBounds::new(lo, hi, bounds.c_radius)?;
    matrix::random_spd_decomposed(dim, &sub, stream)
}

fn random_center(dim: usize, radius: f64, stream: &mut rng::Stream) -> Vec<f64> {
    let dir = rng::standard_normal_vec(stream, dim);
    let n = matrix::norm(&dir);
    let r = radius * stream.gen::<f64>();
    dir.iter().map(|v| v * r / n).collect()
}

fn random_example_client(dim: usize, n: usize, bounds: &SpectrumBounds, stream: &mut rng::Stream) -> Result<ClientModel> {
    if n == 0 {
        return Err(Error::InvalidInput("examples_per_client must be at least 1".into()));
    }
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let (b, _) = random_spectrum_matrix(dim, bounds, stream)?;
        let c = random_center(dim, bounds.c_radius, stream);
        examples.push(QuadraticExample::new(b, c)?);
    }
    let client = ClientModel::from_examples(examples)?;
    // c_i is linear in the example centers; shrink them if the matrix-weighted
    // average left the ball.
    let radius = matrix::norm(client.center());
    if radius > bounds.c_radius {
        let s = bounds.c_radius / radius * (1.0 - 1e-12);
        let examples = client
            .examples
            .unwrap_or_default()
            .into_iter()
            .map(|e| QuadraticExample { center: e.center.iter().map(|v| v * s).collect(), ..e })
            .collect();
        return ClientModel::from_examples(examples);
    }
    Ok(client)
}

/// Single client with `A = diag(values)` and center zero.
pub fn diagonal_client(values: &[f64]) -> Result<ClientModel> {
    ClientModel::new(SymmetricMatrix::diagonal(values), vec![0.0; values.len()])
}
