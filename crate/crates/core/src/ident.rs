//! Identification functions V(x, y) ∈ ℝᵏ whose expected value vanishes
//! exactly at the target functional, plus closed-form expectations and an
//! empirical orientation check.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::functionals::{
    base_expectation, check_positive_on_support, expectile_expected_ident, FunctionalSpec,
    SpectralMeasure,
};
use crate::shapes::BaseFn;

/// Catalog of strict identification functions.
#[derive(Clone, Debug, PartialEq)]
pub enum IdentSpec {
    /// V(x, y) = x·q(y) − p(y), identifying E[p(Y)]/E[q(Y)] when q > 0.
    RatioIdent { p: BaseFn, q: BaseFn },
    /// V(x, y) = 1{y ≤ x} − α.
    QuantileIdent { alpha: f64 },
    /// V(x, y) = 2|1{y ≤ x} − τ|(x − y).
    ExpectileIdent { tau: f64 },
    /// V₁ = 1{y ≤ x₁} − α, V₂ = x₂ − (1/α)·y·1{y ≤ x₁}.
    VarEsIdent { alpha: f64 },
    /// V_m = 1{y ≤ x_m} − q_m for each point, and
    /// V_k = x_k − Σ_m (p_m/q_m)·y·1{y ≤ x_m}.
    SpectralIdent { mu: SpectralMeasure },
    /// Concatenation of independent blocks acting on disjoint slices of x.
    Stacked(Vec<IdentSpec>),
}

fn check_level(name: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} level must lie in (0,1), got {a}"
        )))
    }
}

fn ind(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

impl IdentSpec {
    pub fn dim(&self) -> usize {
        match self {
            IdentSpec::RatioIdent { .. }
            | IdentSpec::QuantileIdent { .. }
            | IdentSpec::ExpectileIdent { .. } => 1,
            IdentSpec::VarEsIdent { .. } => 2,
            IdentSpec::SpectralIdent { mu } => mu.k(),
            IdentSpec::Stacked(parts) => parts.iter().map(IdentSpec::dim).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IdentSpec::RatioIdent { .. } => Ok(()),
            IdentSpec::QuantileIdent { alpha } => check_level("quantile", *alpha),
            IdentSpec::ExpectileIdent { tau } => check_level("expectile", *tau),
            IdentSpec::VarEsIdent { alpha } => check_level("var_es", *alpha),
            IdentSpec::SpectralIdent { mu } => {
                if mu.mass_at_one() > 0.0 {
                    Err(Error::InvalidParameter(
                        "spectral identification needs mu supported on (0,1); \
                         apply decompose_spectral_with_unit_mass first"
                            .into(),
                    ))
                } else {
                    Ok(())
                }
            }
            IdentSpec::Stacked(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter("empty stacked ident".into()));
                }
                parts.iter().try_for_each(IdentSpec::validate)
            }
        }
    }

    /// The functional this identification function identifies.
    pub fn natural_functional(&self) -> Result<FunctionalSpec> {
        let spec = match self {
            IdentSpec::RatioIdent { p, q } => FunctionalSpec::RatioOfExpectations(*p, *q),
            IdentSpec::QuantileIdent { alpha } => FunctionalSpec::Quantile(*alpha),
            IdentSpec::ExpectileIdent { tau } => FunctionalSpec::Expectile(*tau),
            IdentSpec::VarEsIdent { alpha } => FunctionalSpec::VarEs(*alpha),
            IdentSpec::SpectralIdent { mu } => FunctionalSpec::SpectralWithQuantiles(mu.clone()),
            IdentSpec::Stacked(parts) => {
                let quantiles: Option<Vec<f64>> = parts
                    .iter()
                    .map(|p| match p {
                        IdentSpec::QuantileIdent { alpha } => Some(*alpha),
                        _ => None,
                    })
                    .collect();
                if let Some(levels) = quantiles {
                    return Ok(FunctionalSpec::QuantileVector(levels));
                }
                let expectiles: Option<Vec<f64>> = parts
                    .iter()
                    .map(|p| match p {
                        IdentSpec::ExpectileIdent { tau } => Some(*tau),
                        _ => None,
                    })
                    .collect();
                if let Some(levels) = expectiles {
                    return Ok(FunctionalSpec::ExpectileVector(levels));
                }
                return Err(Error::InvalidParameter(
                    "mixed stacked ident has no single named functional; \
                     evaluate components separately"
                        .into(),
                ));
            }
        };
        Ok(spec)
    }

    /// T(F) for the identified functional, stacking mixed blocks as needed.
    pub fn natural_value(&self, d: &Distribution) -> Result<Vec<f64>> {
        match self {
            IdentSpec::Stacked(parts) => {
                let mut out = Vec::with_capacity(self.dim());
                for part in parts {
                    out.extend(part.natural_value(d)?);
                }
                Ok(out)
            }
            _ => self.natural_functional()?.eval(d),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }

    /// Pointwise V(x, y).
    pub fn identify(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        self.validate()?;
        self.check_dim(x)?;
        Ok(match self {
            IdentSpec::RatioIdent { p, q } => vec![x[0] * q.value(y) - p.value(y)],
            IdentSpec::QuantileIdent { alpha } => vec![ind(y <= x[0]) - alpha],
            IdentSpec::ExpectileIdent { tau } => {
                vec![2.0 * (ind(y <= x[0]) - tau).abs() * (x[0] - y)]
            }
            IdentSpec::VarEsIdent { alpha } => vec![
                ind(y <= x[0]) - alpha,
                x[1] - y * ind(y <= x[0]) / alpha,
            ],
            IdentSpec::SpectralIdent { mu } => {
                let k = mu.k();
                let mut v = Vec::with_capacity(k);
                let mut tail = x[k - 1];
                for (m, &(p, q)) in mu.pairs().iter().enumerate() {
                    let hit = ind(y <= x[m]);
                    v.push(hit - q);
                    tail -= p / q * y * hit;
                }
                v.push(tail);
                v
            }
            IdentSpec::Stacked(parts) => {
                let mut v = Vec::with_capacity(self.dim());
                let mut offset = 0;
                for part in parts {
                    let w = part.dim();
                    v.extend(part.identify(&x[offset..offset + w], y)?);
                    offset += w;
                }
                v
            }
        })
    }

    /// V̄(x, F) = E_F[V(x, Y)] in closed form via cdf and partial moments.
    pub fn expected_ident(&self, x: &[f64], d: &Distribution) -> Result<Vec<f64>> {
        self.validate()?;
        self.check_dim(x)?;
        Ok(match self {
            IdentSpec::RatioIdent { p, q } => {
                check_positive_on_support(d, *q)?;
                vec![x[0] * base_expectation(d, *q)? - base_expectation(d, *p)?]
            }
            IdentSpec::QuantileIdent { alpha } => vec![d.cdf(x[0]) - alpha],
            IdentSpec::ExpectileIdent { tau } => {
                vec![expectile_expected_ident(d, *tau, x[0])]
            }
            IdentSpec::VarEsIdent { alpha } => vec![
                d.cdf(x[0]) - alpha,
                x[1] - d.lpe(x[0]) / alpha,
            ],
            IdentSpec::SpectralIdent { mu } => {
                let k = mu.k();
                let mut v = Vec::with_capacity(k);
                let mut tail = x[k - 1];
                for (m, &(p, q)) in mu.pairs().iter().enumerate() {
                    v.push(d.cdf(x[m]) - q);
                    tail -= p / q * d.lpe(x[m]);
                }
                v.push(tail);
                v
            }
            IdentSpec::Stacked(parts) => {
                let mut v = Vec::with_capacity(self.dim());
                let mut offset = 0;
                for part in parts {
                    let w = part.dim();
                    v.extend(part.expected_ident(&x[offset..offset + w], d)?);
                    offset += w;
                }
                v
            }
        })
    }

    /// Whether orientation (vᵀV̄(t + sv) has the sign of s along every ray)
    /// is a theorem for this identification function. It holds for the
    /// scalar catalog entries and stacks of them; the joint (VaR, ES) and
    /// spectral functions violate it on mixed-sign rays, so for those the
    /// check is reported as empirical observation only.
    pub fn orientation_asserted(&self) -> bool {
        match self {
            IdentSpec::RatioIdent { .. }
            | IdentSpec::QuantileIdent { .. }
            | IdentSpec::ExpectileIdent { .. } => true,
            IdentSpec::VarEsIdent { .. } | IdentSpec::SpectralIdent { .. } => false,
            IdentSpec::Stacked(parts) => parts.iter().all(IdentSpec::orientation_asserted),
        }
    }
}

/// One directional sign failure found by [`check_orientation`].
#[derive(Clone, Debug, Serialize)]
pub struct OrientationViolation {
    pub ray: Vec<f64>,
    pub step: f64,
    pub value: f64,
}

/// Outcome of probing vᵀV̄(T(F) + sv, F) > 0 over rays v and steps s > 0.
#[derive(Clone, Debug, Serialize)]
pub struct OrientationReport {
    /// True when orientation is a theorem for this ident; a violation then
    /// indicates a numerical bug rather than a property of the functional.
    pub asserted: bool,
    pub rays: usize,
    pub steps_per_ray: usize,
    pub min_directional_value: f64,
    pub violations: Vec<OrientationViolation>,
}

impl OrientationReport {
    pub fn holds_empirically(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Step magnitudes as fractions of the distribution scale, covering local
/// and global behavior around the functional value.
const STEP_MAGNITUDES: [f64; 5] = [1e-3, 1e-2, 1e-1, 0.5, 1.0];

/// Probes sign(vᵀV̄(t + sv, F)) = sign(s) at t = T(F) along `rays` unit
/// vectors (the ± coordinate axes first, then seeded random directions)
/// and `steps` signed step sizes drawn from a fixed magnitude grid scaled
/// by the distribution. Deterministic across runs.
pub fn check_orientation(
    ident: &IdentSpec,
    d: &Distribution,
    t: &[f64],
    rays: usize,
    steps: usize,
) -> Result<OrientationReport> {
    ident.validate()?;
    ident.check_dim(t)?;
    let k = ident.dim();
    let scale = d.scale();

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(rays);
    for i in 0..k {
        for sign in [1.0, -1.0] {
            if directions.len() == rays {
                break;
            }
            let mut v = vec![0.0; k];
            v[i] = sign;
            directions.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0f_fee0);
    while directions.len() < rays {
        let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        v.iter_mut().for_each(|c| *c /= norm);
        directions.push(v);
    }

    let signed_steps: Vec<f64> = (0..steps)
        .map(|i| {
            let mag = STEP_MAGNITUDES[(i / 2) % STEP_MAGNITUDES.len()] * scale;
            if i % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let tol = 1e-9 * scale.max(1.0);

    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for ray in &directions {
        for &s in &signed_steps {
            let x: Vec<f64> = t.iter().zip(ray).map(|(ti, vi)| ti + s * vi).collect();
            let vbar = ident.expected_ident(&x, d)?;
            let w: f64 = ray.iter().zip(&vbar).map(|(vi, vb)| vi * vb).sum();
            let margin = s.signum() * w;
            worst = worst.min(margin);
            if margin <= tol {
                violations.push(OrientationViolation {
                    ray: ray.clone(),
                    step: s,
                    value: w,
                });
            }
        }
    }

    Ok(OrientationReport {
        asserted: ident.orientation_asserted(),
        rays: directions.len(),
        steps_per_ray: signed_steps.len(),
        min_directional_value: worst,
        violations,
    })
}

/// [`check_orientation`] with the functional value computed internally and
/// the default panel of 64 rays × 10 signed steps.
pub fn check_orientation_auto(ident: &IdentSpec, d: &Distribution) -> Result<OrientationReport> {
    let t = ident.natural_value(d)?;
    let rays = if ident.dim() == 1 { 2 } else { 64 };
    check_orientation(ident, d, &t, rays, 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_ident_values() {
        let v = IdentSpec::QuantileIdent { alpha: 0.05 };
        assert_eq!(v.identify(&[-1.0], -2.0).unwrap(), vec![0.95]);
        assert_eq!(v.identify(&[-1.0], 0.0).unwrap(), vec![-0.05]);
    }

    #[test]
    fn expectile_ident_values() {
        let v = IdentSpec::ExpectileIdent { tau: 0.25 };
        assert_eq!(v.identify(&[1.0], 0.0).unwrap(), vec![1.5]);
        assert_eq!(v.identify(&[0.0], 1.0).unwrap(), vec![-0.5]);
    }

    #[test]
    fn var_es_ident_values() {
        let v = IdentSpec::VarEsIdent { alpha: 0.05 };
        let out = v.identify(&[-1.6, -2.1], -3.0).unwrap();
        assert!((out[0] - 0.95).abs() < 1e-12);
        assert!((out[1] - 57.9).abs() < 1e-10);
        let out = v.identify(&[-1.6, -2.1], 0.0).unwrap();
        assert!((out[0] + 0.05).abs() < 1e-12);
        assert!((out[1] + 2.1).abs() < 1e-12);

        let v = IdentSpec::VarEsIdent { alpha: 0.5 };
        let out = v.identify(&[0.0, -1.0], -2.0).unwrap();
        assert_eq!(out, vec![0.5, 3.0]);
    }

    #[test]
    fn spectral_ident_values() {
        let mu = SpectralMeasure::new(vec![(0.3, 0.1), (0.7, 0.5)]).unwrap();
        let v = IdentSpec::SpectralIdent { mu };
        let out = v.identify(&[-2.0, 0.0, -1.0], -3.0).unwrap();
        assert!((out[0] - 0.9).abs() < 1e-12);
        assert!((out[1] - 0.5).abs() < 1e-12);
        // -1 - 3*(-3) - 1.4*(-3) = -1 + 9 + 4.2
        assert!((out[2] - 12.2).abs() < 1e-10);
    }

    #[test]
    fn expected_ident_vanishes_at_the_functional() {
        let d = Distribution::normal(0.3, 1.4).unwrap();
        let cases: Vec<IdentSpec> = vec![
            IdentSpec::QuantileIdent { alpha: 0.05 },
            IdentSpec::ExpectileIdent { tau: 0.3 },
            IdentSpec::RatioIdent {
                p: BaseFn::Square,
                q: BaseFn::One,
            },
            IdentSpec::VarEsIdent { alpha: 0.05 },
            IdentSpec::SpectralIdent {
                mu: SpectralMeasure::new(vec![(0.3, 0.1), (0.7, 0.5)]).unwrap(),
            },
            IdentSpec::Stacked(vec![
                IdentSpec::QuantileIdent { alpha: 0.1 },
                IdentSpec::QuantileIdent { alpha: 0.9 },
            ]),
        ];
        for ident in &cases {
            let t = ident.natural_value(&d).unwrap();
            let vbar = ident.expected_ident(&t, &d).unwrap();
            for (i, v) in vbar.iter().enumerate() {
                assert!(
                    v.abs() < 1e-8,
                    "{ident:?} component {i} at truth: {v}"
                );
            }
        }
    }

    #[test]
    fn expected_ident_matches_sample_average() {
        use rand::SeedableRng;
        let d = Distribution::exponential(1.5).unwrap();
        let ident = IdentSpec::VarEsIdent { alpha: 0.2 };
        let x = [0.2, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let y = d.sample(&mut rng);
            let v = ident.identify(&x, y).unwrap();
            acc[0] += v[0];
            acc[1] += v[1];
        }
        let vbar = ident.expected_ident(&x, &d).unwrap();
        assert!((acc[0] / n as f64 - vbar[0]).abs() < 5e-3);
        assert!((acc[1] / n as f64 - vbar[1]).abs() < 5e-3);
    }

    #[test]
    fn orientation_asserted_for_scalars_and_stacks() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let cases: Vec<IdentSpec> = vec![
            IdentSpec::QuantileIdent { alpha: 0.05 },
            IdentSpec::ExpectileIdent { tau: 0.3 },
            IdentSpec::RatioIdent {
                p: BaseFn::Square,
                q: BaseFn::One,
            },
            IdentSpec::Stacked(vec![
                IdentSpec::QuantileIdent { alpha: 0.25 },
                IdentSpec::ExpectileIdent { tau: 0.7 },
            ]),
        ];
        for ident in &cases {
            let report = check_orientation_auto(ident, &d).unwrap();
            assert!(report.asserted, "{ident:?}");
            assert!(
                report.holds_empirically(),
                "{ident:?}: {:?}",
                report.violations
            );
        }
    }

    #[test]
    fn var_es_orientation_is_empirical_and_fails_on_mixed_rays() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let ident = IdentSpec::VarEsIdent { alpha: 0.05 };
        let report = check_orientation_auto(&ident, &d).unwrap();
        assert!(!report.asserted);
        // Rays with v1 > 0 > v2 make the directional derivative negative at
        // small steps, so violations are expected, not a bug.
        assert!(!report.holds_empirically());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = IdentSpec::VarEsIdent { alpha: 0.05 };
        assert!(matches!(
            v.identify(&[1.0], 0.0),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }
}
