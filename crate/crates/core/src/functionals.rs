//! Target functionals T(F) ∈ ℝᵏ evaluated exactly, analytically where the
//! family allows it and by root finding on the identification equation
//! otherwise. The lab treats these values as the ground truth that scoring
//! functions must recover by expected-score minimization.

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::quad::QuadratureConfig;
use crate::shapes::BaseFn;

/// Finitely supported measure μ = Σ p_m δ_{q_m} on (0, 1]; the associated
/// spectral risk measure is ν_μ(F) = Σ p_m ES_{q_m}(F).
///
/// Mass at 0 is rejected at construction: whether such a ν_μ is elicitable
/// is an open question, so it is not modeled here. Mass at 1 is legal for
/// ν_μ itself (ES_1 is the mean) but must be split off with
/// [`decompose_spectral_with_unit_mass`] before the quantile-augmented
/// functional or its score can be formed.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    pairs: Vec<(f64, f64)>,
}

impl SpectralMeasure {
    /// Builds a measure from (weight, point) pairs.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter(
                "spectral measure needs at least one point".into(),
            ));
        }
        for &(p, q) in &pairs {
            if !(q.is_finite() && q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "spectral point {q} outside (0,1]; mass at 0 is not modeled \
                     (elicitability of such measures is open)"
                )));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "spectral weight {p} must be positive"
                )));
            }
        }
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                if pairs[i].1 == pairs[j].1 {
                    return Err(Error::InvalidParameter(format!(
                        "spectral points must be pairwise distinct, {} repeats",
                        pairs[i].1
                    )));
                }
            }
        }
        let total: f64 = pairs.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "spectral weights sum to {total}, expected 1"
            )));
        }
        let pairs = pairs.into_iter().map(|(p, q)| (p / total, q)).collect();
        Ok(SpectralMeasure { pairs })
    }

    /// (weight, point) pairs in construction order.
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Output dimension of the quantile-augmented functional
    /// (F⁻¹(q_1), …, F⁻¹(q_{k-1}), ν_μ(F)).
    pub fn k(&self) -> usize {
        self.pairs.len() + 1
    }

    /// Total mass at the point 1.
    pub fn mass_at_one(&self) -> f64 {
        self.pairs
            .iter()
            .filter(|(_, q)| *q == 1.0)
            .map(|(p, _)| p)
            .sum()
    }
}

/// Splits the mass λ that μ places at 1 off the measure, returning the
/// renormalized remainder μ̃ on (0, 1) and λ, so that
/// ν_μ = (1 − λ)·ν_{μ̃} + λ·mean.
pub fn decompose_spectral_with_unit_mass(mu: &SpectralMeasure) -> Result<(SpectralMeasure, f64)> {
    let lambda = mu.mass_at_one();
    if lambda >= 1.0 {
        return Err(Error::InvalidParameter(
            "mu = delta_1 is the mean functional; use `mean` directly".into(),
        ));
    }
    let rest: Vec<(f64, f64)> = mu
        .pairs
        .iter()
        .filter(|(_, q)| *q < 1.0)
        .map(|&(p, q)| (p / (1.0 - lambda), q))
        .collect();
    Ok((SpectralMeasure::new(rest)?, lambda))
}

/// Which functional T : F → ℝᵏ to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionalSpec {
    Mean,
    MomentK(u32),
    RatioOfExpectations(BaseFn, BaseFn),
    Quantile(f64),
    Expectile(f64),
    MeanVariance,
    QuantileVector(Vec<f64>),
    ExpectileVector(Vec<f64>),
    VarEs(f64),
    SpectralWithQuantiles(SpectralMeasure),
}

impl FunctionalSpec {
    pub fn dim(&self) -> usize {
        match self {
            FunctionalSpec::Mean
            | FunctionalSpec::MomentK(_)
            | FunctionalSpec::RatioOfExpectations(..)
            | FunctionalSpec::Quantile(_)
            | FunctionalSpec::Expectile(_) => 1,
            FunctionalSpec::MeanVariance | FunctionalSpec::VarEs(_) => 2,
            FunctionalSpec::QuantileVector(v) | FunctionalSpec::ExpectileVector(v) => v.len(),
            FunctionalSpec::SpectralWithQuantiles(mu) => mu.k(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_level = |name: &str, a: f64| {
            if a > 0.0 && a < 1.0 && a.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} level must lie in (0,1), got {a}"
                )))
            }
        };
        match self {
            FunctionalSpec::Mean | FunctionalSpec::MeanVariance => Ok(()),
            FunctionalSpec::MomentK(k) => {
                if *k >= 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("moment order must be >= 1".into()))
                }
            }
            FunctionalSpec::RatioOfExpectations(..) => Ok(()),
            FunctionalSpec::Quantile(a) => check_level("quantile", *a),
            FunctionalSpec::Expectile(t) => check_level("expectile", *t),
            FunctionalSpec::VarEs(a) => check_level("var_es", *a),
            FunctionalSpec::QuantileVector(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidParameter("quantiles list is empty".into()));
                }
                v.iter().try_for_each(|&a| check_level("quantile", a))
            }
            FunctionalSpec::ExpectileVector(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidParameter("expectiles list is empty".into()));
                }
                v.iter().try_for_each(|&t| check_level("expectile", t))
            }
            FunctionalSpec::SpectralWithQuantiles(mu) => {
                if mu.mass_at_one() > 0.0 {
                    Err(Error::InvalidParameter(
                        "spectral measure places mass at 1; apply \
                         decompose_spectral_with_unit_mass first"
                            .into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Evaluates T(F). Quantile-bearing variants require a unique quantile
    /// at every requested level.
    pub fn eval(&self, d: &Distribution) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            FunctionalSpec::Mean => Ok(vec![d.mean()]),
            FunctionalSpec::MomentK(k) => Ok(vec![d.moment(*k)?]),
            FunctionalSpec::RatioOfExpectations(p, q) => {
                check_positive_on_support(d, *q)?;
                let den = base_expectation(d, *q)?;
                let num = base_expectation(d, *p)?;
                Ok(vec![num / den])
            }
            FunctionalSpec::Quantile(a) => Ok(vec![unique_quantile(d, *a)?]),
            FunctionalSpec::Expectile(t) => Ok(vec![expectile(d, *t)?]),
            FunctionalSpec::MeanVariance => Ok(vec![d.mean(), d.variance()?]),
            FunctionalSpec::QuantileVector(v) => {
                v.iter().map(|&a| unique_quantile(d, a)).collect()
            }
            FunctionalSpec::ExpectileVector(v) => v.iter().map(|&t| expectile(d, t)).collect(),
            FunctionalSpec::VarEs(a) => {
                let var = unique_quantile(d, *a)?;
                Ok(vec![var, expected_shortfall(d, *a)?])
            }
            FunctionalSpec::SpectralWithQuantiles(mu) => {
                let mut out = Vec::with_capacity(mu.k());
                for &(_, q) in mu.pairs() {
                    out.push(unique_quantile(d, q)?);
                }
                out.push(spectral_risk(d, mu)?);
                Ok(out)
            }
        }
    }
}

/// Free-function form of [`FunctionalSpec::eval`].
pub fn eval_functional(spec: &FunctionalSpec, d: &Distribution) -> Result<Vec<f64>> {
    spec.eval(d)
}

fn unique_quantile(d: &Distribution, alpha: f64) -> Result<f64> {
    if !d.has_unique_quantile(alpha) {
        return Err(Error::NonUniqueQuantile {
            family: d.family_name().into(),
            level: alpha,
        });
    }
    d.quantile(alpha)
}

/// E[f(Y)] for a catalog base function, gated on the moments it needs.
pub fn base_expectation(d: &Distribution, f: BaseFn) -> Result<f64> {
    match f {
        BaseFn::One => Ok(1.0),
        BaseFn::Identity => Ok(d.mean()),
        BaseFn::Square => d.second_moment(),
        BaseFn::ExpClip => {
            if !d.mgf_finite_at_one() {
                return Err(Error::DivergentIntegral(format!(
                    "E[exp(Y)] is infinite for {}",
                    d.family_name()
                )));
            }
            d.expect(|y| f.value(y), &QuadratureConfig::default())
        }
    }
}

/// Checks q(y) > 0 on the support of d (grid plus atoms), as the ratio
/// functional and the Bregman denominator require.
pub fn check_positive_on_support(d: &Distribution, q: BaseFn) -> Result<()> {
    let (lo, hi) = d.integration_range()?;
    let n = 41;
    let probe = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .chain(d.atoms().into_iter().map(|(loc, _)| loc));
    for y in probe {
        if q.value(y) <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "denominator {q} is not strictly positive on the support of {} (fails at y={y})",
                d.family_name()
            )));
        }
    }
    Ok(())
}

/// ES_α(F) = (1/α)∫₀^α F⁻¹(u) du, with α = 1 giving the mean.
///
/// When the α-quantile is unique this reduces to the partial-expectation
/// form (lpe(q) + q(α − F(q)))/α, which also covers an atom straddling α.
/// Otherwise it falls back to a 10000-node composite midpoint rule on the
/// quantile integral.
pub fn expected_shortfall(d: &Distribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "expected shortfall level must lie in (0,1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(d.mean());
    }
    if d.has_unique_quantile(alpha) {
        let q = d.quantile(alpha)?;
        Ok((d.lpe(q) + q * (alpha - d.cdf(q))) / alpha)
    } else {
        es_by_quantile_integral(d, alpha, 10_000)
    }
}

/// Composite midpoint rule on (1/α)∫₀^α F⁻¹(u) du.
pub fn es_by_quantile_integral(d: &Distribution, alpha: f64, nodes: usize) -> Result<f64> {
    let n = nodes.max(1);
    let h = alpha / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) * h;
        acc += d.quantile(u)?;
    }
    Ok(acc / n as f64)
}

/// Spectral risk measure ν_μ(F) = Σ p_m ES_{q_m}(F).
pub fn spectral_risk(d: &Distribution, mu: &SpectralMeasure) -> Result<f64> {
    mu.pairs()
        .iter()
        .map(|&(p, q)| expected_shortfall(d, q).map(|es| p * es))
        .sum()
}

/// Expected identification function of the τ-expectile at x,
/// V̄(x) = 2(1−τ)(xF(x) − lpe(x)) + 2τ(x(1 − F(x)) − (mean − lpe(x))).
pub fn expectile_expected_ident(d: &Distribution, tau: f64, x: f64) -> f64 {
    let f = d.cdf(x);
    let lpe = d.lpe(x);
    2.0 * (1.0 - tau) * (x * f - lpe) + 2.0 * tau * (x * (1.0 - f) - (d.mean() - lpe))
}

/// τ-expectile by bisection on the expected identification function, which
/// is continuous and strictly increasing in x.
pub fn expectile(d: &Distribution, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "expectile level must lie in (0,1), got {tau}"
        )));
    }
    let mut lo = d.quantile(0.001)?;
    let mut hi = d.quantile(0.999)?;
    let spread = (hi - lo).max(1e-6);
    for _ in 0..200 {
        if expectile_expected_ident(d, tau, lo) < 0.0 {
            break;
        }
        lo -= spread;
    }
    for _ in 0..200 {
        if expectile_expected_ident(d, tau, hi) > 0.0 {
            break;
        }
        hi += spread;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if expectile_expected_ident(d, tau, mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_normal() {
        let d = Distribution::normal(1.0, 2.0).unwrap();
        let t = FunctionalSpec::Mean.eval(&d).unwrap();
        assert_eq!(t, vec![1.0]);
    }

    #[test]
    fn var_es_of_standard_normal() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let t = FunctionalSpec::VarEs(0.05).eval(&d).unwrap();
        assert!((t[0] - (-1.644854)).abs() < 1e-5, "VaR {}", t[0]);
        assert!((t[1] - (-2.062713)).abs() < 1e-5, "ES {}", t[1]);
    }

    #[test]
    fn spectral_vector_on_uniform() {
        let mu = SpectralMeasure::new(vec![(0.5, 0.25), (0.5, 0.75)]).unwrap();
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        let t = FunctionalSpec::SpectralWithQuantiles(mu).eval(&d).unwrap();
        // For Uniform(0,1), ES_alpha = alpha/2, so nu = 0.5*0.125 + 0.5*0.375.
        assert!((t[0] - 0.25).abs() < 1e-9);
        assert!((t[1] - 0.75).abs() < 1e-9);
        assert!((t[2] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn expectile_quarter_on_uniform() {
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        let e = expectile(&d, 0.25).unwrap();
        assert!((e - 1.0 / (1.0 + 3f64.sqrt())).abs() < 1e-8, "got {e}");
    }

    #[test]
    fn expectile_half_is_the_mean() {
        let ds = [
            Distribution::normal(0.4, 1.3).unwrap(),
            Distribution::student_t(4.0, -0.7, 0.9).unwrap(),
            Distribution::lognormal(0.0, 0.5).unwrap(),
            Distribution::exponential(2.0).unwrap(),
            Distribution::uniform(-2.0, 5.0).unwrap(),
        ];
        for d in &ds {
            let e = expectile(d, 0.5).unwrap();
            assert!(
                (e - d.mean()).abs() < 1e-9,
                "{}: expectile(0.5)={e} mean={}",
                d.family_name(),
                d.mean()
            );
        }
    }

    #[test]
    fn decompose_unit_mass_examples() {
        let pure = SpectralMeasure::new(vec![(1.0, 0.5)]).unwrap();
        let (rest, lambda) = decompose_spectral_with_unit_mass(&pure).unwrap();
        assert_eq!(lambda, 0.0);
        assert_eq!(rest.pairs(), pure.pairs());

        let mixed = SpectralMeasure::new(vec![(0.5, 0.5), (0.5, 1.0)]).unwrap();
        let (rest, lambda) = decompose_spectral_with_unit_mass(&mixed).unwrap();
        assert_eq!(lambda, 0.5);
        assert_eq!(rest.pairs(), &[(1.0, 0.5)]);

        let unit = SpectralMeasure::new(vec![(1.0, 1.0)]).unwrap();
        assert!(decompose_spectral_with_unit_mass(&unit).is_err());
    }

    #[test]
    fn recombination_matches_direct_spectral_risk() {
        let mu = SpectralMeasure::new(vec![(0.5, 0.5), (0.5, 1.0)]).unwrap();
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        let direct = spectral_risk(&d, &mu).unwrap();
        assert!((direct - 0.375).abs() < 1e-10, "got {direct}");
        let (rest, lambda) = decompose_spectral_with_unit_mass(&mu).unwrap();
        let recombined = (1.0 - lambda) * spectral_risk(&d, &rest).unwrap() + lambda * d.mean();
        assert!((direct - recombined).abs() < 1e-12);
    }

    #[test]
    fn spectral_measure_rejects_mass_at_zero() {
        assert!(SpectralMeasure::new(vec![(1.0, 0.0)]).is_err());
        assert!(SpectralMeasure::new(vec![(0.5, 0.3), (0.5, 0.3)]).is_err());
        assert!(SpectralMeasure::new(vec![(0.6, 0.3), (0.6, 0.5)]).is_err());
    }

    #[test]
    fn quantile_functionals_demand_uniqueness() {
        let d = Distribution::two_point(0.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            FunctionalSpec::Quantile(0.5).eval(&d),
            Err(Error::NonUniqueQuantile { .. })
        ));
        assert!(FunctionalSpec::Quantile(0.3).eval(&d).is_ok());
    }

    #[test]
    fn es_integral_path_agrees_with_closed_form() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let closed = expected_shortfall(&d, 0.5).unwrap();
        assert!((closed - (-0.7978845608028654)).abs() < 1e-9);
        // The midpoint rule undercounts the steep quantile tail near u = 0,
        // so the fallback path is only ~1e-5 accurate on unbounded tails.
        let integral = es_by_quantile_integral(&d, 0.5, 10_000).unwrap();
        assert!((closed - integral).abs() < 2e-5, "diff {}", closed - integral);
    }

    #[test]
    fn es_handles_atoms() {
        // Atom straddles the level: ES_0.6 of P(Y=0)=0.5, P(Y=1)=0.5 is
        // (0.5*0 + 0.1*1)/0.6.
        let d = Distribution::two_point(0.0, 1.0, 0.5).unwrap();
        let es = expected_shortfall(&d, 0.6).unwrap();
        assert!((es - 0.1 / 0.6).abs() < 1e-4, "got {es}");
    }

    #[test]
    fn ratio_of_expectations_paths() {
        let d = Distribution::exponential(2.0).unwrap();
        let r = FunctionalSpec::RatioOfExpectations(BaseFn::Square, BaseFn::One)
            .eval(&d)
            .unwrap();
        assert!((r[0] - 0.5).abs() < 1e-12); // E[Y^2] = 2/rate^2
        let bad = FunctionalSpec::RatioOfExpectations(BaseFn::One, BaseFn::Identity)
            .eval(&Distribution::normal(0.0, 1.0).unwrap());
        assert!(bad.is_err(), "identity is not positive on all of R");
    }
}
