//! Client gradient weightings `Θ = (θ_1, θ_2, …)`.

use crate::error::{Error, Result};

/// Summation is exact and cheap for short schemes; longer geometric sums use
/// the closed form.
const SUMMATION_LIMIT: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// `Θ_{1:K} = (1, …, 1)`.
    FirstK(u64),
    /// `Θ_K = (0, …, 0, 1)`.
    KOnly(u64),
    /// Arbitrary nonnegative coefficients, last one positive.
    General(Vec<f64>),
}

/// Coefficients used by a client to combine its local gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme(Repr);

/// Which closed-form family a scheme belongs to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeFamily {
    FirstK,
    KOnly,
    General,
}

impl WeightScheme {
    /// `Θ_1`: a single gradient, no distortion.
    pub fn one() -> Self {
        Self(Repr::FirstK(1))
    }

    /// `Θ_{1:K}`, the FedAvg/Reptile weighting.
    pub fn first_k(k: u64) -> Result<Self> {
        check_size(k)?;
        Ok(Self(Repr::FirstK(k)))
    }

    /// `Θ_K`, the FOMAML-style weighting.
    pub fn k_only(k: u64) -> Result<Self> {
        check_size(k)?;
        if k == 1 {
            return Ok(Self::one());
        }
        Ok(Self(Repr::KOnly(k)))
    }

    /// `Θ_{2K+1}`, equivalent to MAML with `k` inner gradient steps.
    pub fn maml(k: u64) -> Result<Self> {
        Self::k_only(2 * k + 1)
    }

    /// Arbitrary coefficients. Trailing zeros are dropped and the two named
    /// families are recognised.
    pub fn from_coefficients(mut coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidInput("scheme coefficients must be finite and nonnegative".into()));
        }
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("scheme needs at least one positive coefficient".into()));
        }
        let k = coefficients.len() as u64;
        if coefficients.iter().all(|&c| c == 1.0) {
            return Self::first_k(k);
        }
        if coefficients[..coefficients.len() - 1].iter().all(|&c| c == 0.0) && coefficients[coefficients.len() - 1] == 1.0 {
            return Self::k_only(k);
        }
        Ok(Self(Repr::General(coefficients)))
    }

    /// `K(Θ)`, the largest index with a positive coefficient.
    pub fn size(&self) -> u64 {
        match &self.0 {
            Repr::FirstK(k) | Repr::KOnly(k) => *k,
            Repr::General(c) => c.len() as u64,
        }
    }

    /// `w(Θ) = Σ θ_k`.
    pub fn weight(&self) -> f64 {
        match &self.0 {
            Repr::FirstK(k) => *k as f64,
            Repr::KOnly(_) => 1.0,
            Repr::General(c) => c.iter().sum(),
        }
    }

    /// `θ_k` for 1-based `k`; zero outside the support.
    pub fn coefficient(&self, k: u64) -> f64 {
        if k == 0 || k > self.size() {
            return 0.0;
        }
        match &self.0 {
            Repr::FirstK(_) => 1.0,
            Repr::KOnly(size) => {
                if k == *size {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::General(c) => c[(k - 1) as usize],
        }
    }

    pub fn family(&self) -> SchemeFamily {
        match &self.0 {
            Repr::FirstK(_) => SchemeFamily::FirstK,
            Repr::KOnly(_) => SchemeFamily::KOnly,
            Repr::General(_) => SchemeFamily::General,
        }
    }

    /// Short label used in CSV output.
    pub fn tag(&self) -> &'static str {
        match &self.0 {
            Repr::FirstK(1) => "one",
            Repr::FirstK(_) => "first-k",
            Repr::KOnly(_) => "k-only",
            Repr::General(_) => "general",
        }
    }

    /// Dense coefficient vector (allocates `K(Θ)` entries).
    pub fn coefficients(&self) -> Vec<f64> {
        (1..=self.size()).map(|k| self.coefficient(k)).collect()
    }

    /// `Σ_k θ_k (1 − s)^{k−1}` where `s = γ(λ + α)`; the eigenvalue of the
    /// distortion matrix on an eigenvector of `A` with eigenvalue `λ`.
    pub fn polynomial_at_shift(&self, s: f64) -> f64 {
        let z = 1.0 - s;
        match &self.0 {
            Repr::FirstK(k) => {
                if s == 0.0 {
                    *k as f64
                } else if *k <= SUMMATION_LIMIT || s >= 1.0 {
                    geometric_sum(z, *k)
                } else {
                    -(*k as f64 * (-s).ln_1p()).exp_m1() / s
                }
            }
            Repr::KOnly(k) => power(z, k - 1, s),
            Repr::General(c) => c.iter().rev().fold(0.0, |acc, &t| acc * z + t),
        }
    }

    /// Natural log of [`Self::polynomial_at_shift`], computed without
    /// underflow for very long schemes. `None` if the value is not positive.
    pub fn ln_polynomial_at_shift(&self, s: f64) -> Option<f64> {
        match &self.0 {
            Repr::KOnly(k) if s < 1.0 => Some((*k - 1) as f64 * (-s).ln_1p()),
            Repr::FirstK(k) if s > 0.0 && s < 1.0 && *k > SUMMATION_LIMIT => {
                let numerator = -(*k as f64 * (-s).ln_1p()).exp_m1();
                Some(numerator.ln() - s.ln())
            }
            _ => {
                let v = self.polynomial_at_shift(s);
                (v > 0.0).then(|| v.ln())
            }
        }
    }

    /// Eigenvalue of `Q(α, γ, Θ)` for an eigenvalue `lambda` of `A`.
    pub fn distortion_eigenvalue(&self, lambda: f64, alpha: f64, gamma: f64) -> f64 {
        self.polynomial_at_shift(gamma * (lambda + alpha))
    }

    /// Eigenvalue of `Q(α, γ, Θ)·A` for an eigenvalue `lambda` of `A`.
    pub fn hessian_eigenvalue(&self, lambda: f64, alpha: f64, gamma: f64) -> f64 {
        self.distortion_eigenvalue(lambda, alpha, gamma) * lambda
    }
}

fn check_size(k: u64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("scheme size K must be at least 1".into()));
    }
    Ok(())
}

fn geometric_sum(z: f64, k: u64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..k {
        sum += term;
        term *= z;
    }
    sum
}

fn power(z: f64, e: u64, s: f64) -> f64 {
    if s > 0.0 && s < 1.0 {
        (e as f64 * (-s).ln_1p()).exp()
    } else if e <= i32::MAX as u64 {
        z.powi(e as i32)
    } else {
        z.powf(e as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn size_and_weight() {
        let t = WeightScheme::from_coefficients(vec![0.5, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.size(), 3);
        assert_eq!(t.weight(), 2.5);
        assert_eq!(t.family(), SchemeFamily::General);
        assert_eq!(WeightScheme::first_k(4).unwrap().weight(), 4.0);
        assert_eq!(WeightScheme::k_only(4).unwrap().weight(), 1.0);
        assert_eq!(WeightScheme::maml(3).unwrap().size(), 7);
    }

    #[test]
    fn recognises_families() {
        assert_eq!(WeightScheme::from_coefficients(vec![1.0; 3]).unwrap(), WeightScheme::first_k(3).unwrap());
        assert_eq!(WeightScheme::from_coefficients(vec![0.0, 0.0, 1.0]).unwrap(), WeightScheme::k_only(3).unwrap());
        assert_eq!(WeightScheme::k_only(1).unwrap(), WeightScheme::one());
    }

    #[test]
    fn rejects_invalid() {
        assert!(WeightScheme::from_coefficients(vec![0.0, 0.0]).is_err());
        assert!(WeightScheme::from_coefficients(vec![-1.0, 1.0]).is_err());
        assert!(WeightScheme::first_k(0).is_err());
    }

    #[test]
    fn polynomial_matches_direct_sum() {
        let schemes = [
            WeightScheme::first_k(3).unwrap(),
            WeightScheme::first_k(100).unwrap(),
            WeightScheme::k_only(7).unwrap(),
            WeightScheme::from_coefficients(vec![0.3, 0.0, 1.2, 0.7]).unwrap(),
        ];
        for t in &schemes {
            for &s in &[0.0, 1e-9, 0.01, 0.2, 0.9] {
                let direct: f64 = t
                    .coefficients()
                    .iter()
                    .enumerate()
                    .map(|(k, th)| th * (1.0_f64 - s).powi(k as i32))
                    .sum();
                assert_relative_eq!(t.polynomial_at_shift(s), direct, max_relative = 1e-12);
                if direct > 0.0 {
                    assert_relative_eq!(t.ln_polynomial_at_shift(s).unwrap(), direct.ln(), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn long_schemes_do_not_underflow_in_log_space() {
        let t = WeightScheme::k_only(1_000_000).unwrap();
        assert_eq!(t.polynomial_at_shift(0.01), 0.0);
        let ln = t.ln_polynomial_at_shift(0.01).unwrap();
        assert_relative_eq!(ln, 999_999.0 * (0.99f64).ln(), max_relative = 1e-14);
        let t = WeightScheme::first_k(1_000_000).unwrap();
        assert_relative_eq!(t.polynomial_at_shift(0.01), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn hessian_eigenvalue_example() {
        // A = 2, γ = 0.1, Θ_{1:3}: 1 + 0.8 + 0.64 = 2.44.
        let t = WeightScheme::first_k(3).unwrap();
        assert_relative_eq!(t.distortion_eigenvalue(2.0, 0.0, 0.1), 2.44, max_relative = 1e-15);
        assert_relative_eq!(t.hessian_eigenvalue(2.0, 0.0, 0.1), 4.88, max_relative = 1e-15);
    }
}
