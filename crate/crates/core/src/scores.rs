//! Scoring functions S(x, y) for each family in scope, with typed shape
//! functions, action-domain enforcement, integrability gates against a
//! concrete distribution, and closed-form expected scores where the family
//! permits. The additive y-only term a(y) is fixed to 0 everywhere: it
//! never affects minimizers or score differences.

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::functionals::{base_expectation, expectile_expected_ident, FunctionalSpec, SpectralMeasure};
use crate::ident::IdentSpec;
use crate::quad::{integrate, QuadratureConfig};
use crate::shapes::{BaseFn, Growth, ShapeFn};

fn ind(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// Set of admissible forecast vectors for a score.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionDomain {
    /// All of ℝᵏ.
    Full(usize),
    /// A₀ = {x ∈ ℝ²: x₁ ≥ x₂}, the natural domain for (VaR, ES) scores.
    VarEsHalfSpace,
    /// {x₁ ≥ x₂ and x₂ > w·x₁}, where the S^W family is consistent.
    SWedge { w: f64 },
    /// ℝ × (0, ∞) for (mean, variance) forecasts.
    PositiveVariance,
    /// Concatenated blocks, each constrained separately.
    Product(Vec<ActionDomain>),
}

impl ActionDomain {
    pub fn dim(&self) -> usize {
        match self {
            ActionDomain::Full(k) => *k,
            ActionDomain::VarEsHalfSpace | ActionDomain::SWedge { .. } => 2,
            ActionDomain::PositiveVariance => 2,
            ActionDomain::Product(parts) => parts.iter().map(ActionDomain::dim).sum(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ActionDomain::Full(_) => true,
            ActionDomain::VarEsHalfSpace => x[0] >= x[1],
            ActionDomain::SWedge { w } => x[0] >= x[1] && x[1] > w * x[0],
            ActionDomain::PositiveVariance => x[1] > 0.0,
            ActionDomain::Product(parts) => {
                let mut offset = 0;
                parts.iter().all(|p| {
                    let w = p.dim();
                    let ok = p.contains(&x[offset..offset + w]);
                    offset += w;
                    ok
                })
            }
        }
    }

    pub fn description(&self) -> String {
        match self {
            ActionDomain::Full(k) => format!("R^{k}"),
            ActionDomain::VarEsHalfSpace => "{x1 >= x2}".into(),
            ActionDomain::SWedge { w } => format!("{{x1 >= x2, x2 > {w}*x1}}"),
            ActionDomain::PositiveVariance => "{x2 > 0}".into(),
            ActionDomain::Product(parts) => {
                let inner: Vec<String> = parts.iter().map(ActionDomain::description).collect();
                inner.join(" x ")
            }
        }
    }
}

/// How a SumScore combines its parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumMode {
    /// Parts act on disjoint slices of x; dimensions add.
    Concat,
    /// Parts score the same functional; all see the full x.
    Mixture,
}

/// Catalog of scoring-function families.
#[derive(Clone, Debug, PartialEq)]
pub enum ScoreSpec {
    /// (1{y ≤ x} − α)(G(x) − G(y)) with G increasing.
    QuantilePinball { alpha: f64, g: ShapeFn },
    /// |1{y ≤ x} − τ|(x − y)².
    ExpectileSquare { tau: f64 },
    /// −φ(x) + (x − y)φ′(x) with φ convex; scores the mean.
    BregmanMean { phi: ShapeFn },
    /// −φ(x)q(y) + (x·q(y) − p(y))φ′(x); scores E[p(Y)]/E[q(Y)].
    BregmanRatio { phi: ShapeFn, p: BaseFn, q: BaseFn },
    /// Sum of two Bregman blocks in the revealed coordinates
    /// (m, m² + v) for the (mean, variance) pair.
    MeanVarianceRevealed { phi1: ShapeFn, phi2: ShapeFn },
    /// (1{y≤x₁} − α)G₁(x₁) − 1{y≤x₁}G₁(y)
    ///  + 𝒢₂′(x₂)(x₂ − x₁ + (1/α)1{y≤x₁}(x₁ − y)) − 𝒢₂(x₂).
    /// `script_g2` stores 𝒢₂; the score uses both its value and derivative.
    /// `checked = false` skips the monotonicity/convexity flags, for
    /// deliberate negative controls.
    VarEs {
        alpha: f64,
        g1: ShapeFn,
        script_g2: ShapeFn,
        checked: bool,
    },
    /// Quantile parts Σ_r [(1{y≤x_r} − q_r)G_r(x_r) − 1{y≤x_r}G_r(y)] plus
    /// 𝒢_k′(x_k)(x_k + Σ_m (p_m/q_m)(1{y≤x_m}(x_m − y) − q_m x_m)) − 𝒢_k(x_k).
    Spectral {
        mu: SpectralMeasure,
        quantile_gs: Vec<ShapeFn>,
        script_gk: ShapeFn,
    },
    /// S^W(x, y) = α(x₂²/2 + W·x₁²/2 − x₁x₂)
    ///  + 1{y≤x₁}(−x₂(y − x₁) + W(y² − x₁²)/2).
    AcerbiSzekelyW { alpha: f64, w: f64 },
    /// Positive-weighted sum of parts.
    Sum {
        mode: SumMode,
        parts: Vec<(f64, ScoreSpec)>,
    },
    /// S(x, y) = ∫_{z₀}^{x} g(z)·V(z, y) dz for a scalar oriented ident V
    /// and strictly positive weight g, evaluated by adaptive quadrature.
    NumericOneDim {
        ident: Box<IdentSpec>,
        g: ShapeFn,
        z0: f64,
    },
    /// λ·S(x, y) + c·a(y), the equivalence-class transform. Same minimizers
    /// as the base score; useful for invariance tests and sweeps.
    Affine {
        base: Box<ScoreSpec>,
        lambda: f64,
        a: BaseFn,
        c: f64,
    },
}

fn check_level(family: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{family} level must lie in (0,1), got {a}"
        )))
    }
}

fn shape_requirement(family: &str, shape: ShapeFn, requirement: &str) -> Error {
    Error::ShapeRequirement {
        family: family.into(),
        shape: shape.to_string(),
        requirement: requirement.into(),
    }
}

impl ScoreSpec {
    pub fn pinball(alpha: f64, g: ShapeFn) -> Result<Self> {
        check_level("pinball", alpha)?;
        let g = g.validate()?;
        if !g.is_increasing() {
            return Err(shape_requirement("pinball", g, "G increasing"));
        }
        Ok(ScoreSpec::QuantilePinball { alpha, g })
    }

    pub fn expectile_square(tau: f64) -> Result<Self> {
        check_level("expectile", tau)?;
        Ok(ScoreSpec::ExpectileSquare { tau })
    }

    pub fn bregman_mean(phi: ShapeFn) -> Result<Self> {
        let phi = phi.validate()?;
        if !phi.is_convex() {
            return Err(shape_requirement("bregman", phi, "phi convex"));
        }
        Ok(ScoreSpec::BregmanMean { phi })
    }

    pub fn bregman_ratio(phi: ShapeFn, p: BaseFn, q: BaseFn) -> Result<Self> {
        let phi = phi.validate()?;
        if !phi.is_convex() {
            return Err(shape_requirement("bregman_ratio", phi, "phi convex"));
        }
        Ok(ScoreSpec::BregmanRatio { phi, p, q })
    }

    pub fn mean_variance_revealed(phi1: ShapeFn, phi2: ShapeFn) -> Result<Self> {
        for phi in [phi1, phi2] {
            let phi = phi.validate()?;
            if !phi.is_convex() {
                return Err(shape_requirement("mean_variance", phi, "phi convex"));
            }
        }
        Ok(ScoreSpec::MeanVarianceRevealed { phi1, phi2 })
    }

    pub fn var_es(alpha: f64, g1: ShapeFn, script_g2: ShapeFn) -> Result<Self> {
        check_level("var_es", alpha)?;
        let g1 = g1.validate()?;
        let script_g2 = script_g2.validate()?;
        if !g1.is_increasing() {
            return Err(shape_requirement("var_es", g1, "G1 increasing"));
        }
        if !(script_g2.is_increasing() && script_g2.is_convex()) {
            return Err(shape_requirement(
                "var_es",
                script_g2,
                "script G2 increasing and convex",
            ));
        }
        Ok(ScoreSpec::VarEs {
            alpha,
            g1,
            script_g2,
            checked: true,
        })
    }

    /// Skips the shape-flag checks; for negative controls that must fail
    /// the lab's consistency certificate.
    pub fn var_es_unchecked(alpha: f64, g1: ShapeFn, script_g2: ShapeFn) -> Result<Self> {
        check_level("var_es", alpha)?;
        Ok(ScoreSpec::VarEs {
            alpha,
            g1: g1.validate()?,
            script_g2: script_g2.validate()?,
            checked: false,
        })
    }

    pub fn spectral(mu: SpectralMeasure, quantile_gs: Vec<ShapeFn>, script_gk: ShapeFn) -> Result<Self> {
        if mu.mass_at_one() > 0.0 {
            return Err(Error::InvalidParameter(
                "spectral score needs mu supported on (0,1); \
                 apply decompose_spectral_with_unit_mass first"
                    .into(),
            ));
        }
        if quantile_gs.len() != mu.pairs().len() {
            return Err(Error::DimensionMismatch {
                expected: mu.pairs().len(),
                got: quantile_gs.len(),
            });
        }
        let script_gk = script_gk.validate()?;
        if !script_gk.is_convex() {
            return Err(shape_requirement("spectral", script_gk, "script Gk convex"));
        }
        let quantile_gs: Vec<ShapeFn> = quantile_gs
            .into_iter()
            .map(ShapeFn::validate)
            .collect::<Result<_>>()?;
        check_spectral_increasing(&mu, &quantile_gs, script_gk)?;
        Ok(ScoreSpec::Spectral {
            mu,
            quantile_gs,
            script_gk,
        })
    }

    pub fn acerbi_szekely_w(alpha: f64, w: f64) -> Result<Self> {
        check_level("as_w", alpha)?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "as_w needs W >= 0, got {w}"
            )));
        }
        Ok(ScoreSpec::AcerbiSzekelyW { alpha, w })
    }

    pub fn affine(base: ScoreSpec, lambda: f64, a: BaseFn, c: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "affine transform needs lambda > 0, got {lambda}"
            )));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "affine transform needs finite c, got {c}"
            )));
        }
        Ok(ScoreSpec::Affine {
            base: Box::new(base),
            lambda,
            a,
            c,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ScoreSpec::QuantilePinball { .. }
            | ScoreSpec::ExpectileSquare { .. }
            | ScoreSpec::BregmanMean { .. }
            | ScoreSpec::BregmanRatio { .. }
            | ScoreSpec::NumericOneDim { .. } => 1,
            ScoreSpec::MeanVarianceRevealed { .. }
            | ScoreSpec::VarEs { .. }
            | ScoreSpec::AcerbiSzekelyW { .. } => 2,
            ScoreSpec::Spectral { mu, .. } => mu.k(),
            ScoreSpec::Sum { mode, parts } => match mode {
                SumMode::Concat => parts.iter().map(|(_, s)| s.dim()).sum(),
                SumMode::Mixture => parts.first().map_or(0, |(_, s)| s.dim()),
            },
            ScoreSpec::Affine { base, .. } => base.dim(),
        }
    }

    /// Domain on which score evaluation is defined.
    pub fn action_domain(&self) -> ActionDomain {
        match self {
            ScoreSpec::QuantilePinball { .. }
            | ScoreSpec::ExpectileSquare { .. }
            | ScoreSpec::BregmanMean { .. }
            | ScoreSpec::BregmanRatio { .. }
            | ScoreSpec::NumericOneDim { .. } => ActionDomain::Full(1),
            ScoreSpec::MeanVarianceRevealed { .. } => ActionDomain::PositiveVariance,
            ScoreSpec::VarEs { .. } | ScoreSpec::AcerbiSzekelyW { .. } => {
                ActionDomain::VarEsHalfSpace
            }
            ScoreSpec::Spectral { mu, .. } => ActionDomain::Full(mu.k()),
            ScoreSpec::Sum { mode, parts } => match mode {
                SumMode::Concat => ActionDomain::Product(
                    parts.iter().map(|(_, s)| s.action_domain()).collect(),
                ),
                SumMode::Mixture => parts
                    .first()
                    .map_or(ActionDomain::Full(0), |(_, s)| s.action_domain()),
            },
            ScoreSpec::Affine { base, .. } => base.action_domain(),
        }
    }

    /// Domain on which strict consistency is certified. Smaller than the
    /// action domain only for the S^W family, whose consistency requires
    /// x₂ > W·x₁ (and ES_α(F) > W·VaR_α(F) on the distribution side).
    pub fn consistency_domain(&self) -> ActionDomain {
        match self {
            ScoreSpec::AcerbiSzekelyW { w, .. } => ActionDomain::SWedge { w: *w },
            ScoreSpec::Sum { mode, parts } => match mode {
                SumMode::Concat => ActionDomain::Product(
                    parts.iter().map(|(_, s)| s.consistency_domain()).collect(),
                ),
                SumMode::Mixture => parts
                    .first()
                    .map_or(ActionDomain::Full(0), |(_, s)| s.consistency_domain()),
            },
            ScoreSpec::Affine { base, .. } => base.consistency_domain(),
            _ => self.action_domain(),
        }
    }

    /// Whether the family's strictness flags all hold, i.e. the expected
    /// score has a unique minimum at the functional (on the consistency
    /// domain, for distributions meeting the integrability requirements).
    pub fn is_strict(&self) -> bool {
        match self {
            ScoreSpec::QuantilePinball { g, .. } => g.is_strictly_increasing(),
            ScoreSpec::ExpectileSquare { .. } => true,
            ScoreSpec::BregmanMean { phi } | ScoreSpec::BregmanRatio { phi, .. } => {
                phi.is_strictly_convex()
            }
            ScoreSpec::MeanVarianceRevealed { phi1, phi2 } => {
                phi1.is_strictly_convex() && phi2.is_strictly_convex()
            }
            ScoreSpec::VarEs {
                g1,
                script_g2,
                checked,
                ..
            } => {
                *checked
                    && g1.is_increasing()
                    && script_g2.is_strictly_increasing()
                    && script_g2.is_strictly_convex()
            }
            ScoreSpec::Spectral { script_gk, .. } => script_gk.is_strictly_convex(),
            ScoreSpec::AcerbiSzekelyW { .. } => true,
            ScoreSpec::Sum { parts, .. } => parts.iter().all(|(_, s)| s.is_strict()),
            ScoreSpec::NumericOneDim { g, .. } => g.is_strictly_positive(),
            ScoreSpec::Affine { base, .. } => base.is_strict(),
        }
    }

    /// Cheap parameter/flag validation (no grid work); run on every score
    /// evaluation so hand-built specs cannot bypass the family rules.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreSpec::QuantilePinball { alpha, g } => {
                check_level("pinball", *alpha)?;
                g.validate()?;
                if !g.is_increasing() {
                    return Err(shape_requirement("pinball", *g, "G increasing"));
                }
                Ok(())
            }
            ScoreSpec::ExpectileSquare { tau } => check_level("expectile", *tau),
            ScoreSpec::BregmanMean { phi } => {
                phi.validate()?;
                if !phi.is_convex() {
                    return Err(shape_requirement("bregman", *phi, "phi convex"));
                }
                Ok(())
            }
            ScoreSpec::BregmanRatio { phi, .. } => {
                phi.validate()?;
                if !phi.is_convex() {
                    return Err(shape_requirement("bregman_ratio", *phi, "phi convex"));
                }
                Ok(())
            }
            ScoreSpec::MeanVarianceRevealed { phi1, phi2 } => {
                for phi in [phi1, phi2] {
                    phi.validate()?;
                    if !phi.is_convex() {
                        return Err(shape_requirement("mean_variance", *phi, "phi convex"));
                    }
                }
                Ok(())
            }
            ScoreSpec::VarEs {
                alpha,
                g1,
                script_g2,
                checked,
            } => {
                check_level("var_es", *alpha)?;
                g1.validate()?;
                script_g2.validate()?;
                if *checked {
                    if !g1.is_increasing() {
                        return Err(shape_requirement("var_es", *g1, "G1 increasing"));
                    }
                    if !(script_g2.is_increasing() && script_g2.is_convex()) {
                        return Err(shape_requirement(
                            "var_es",
                            *script_g2,
                            "script G2 increasing and convex",
                        ));
                    }
                }
                Ok(())
            }
            ScoreSpec::Spectral {
                mu,
                quantile_gs,
                script_gk,
            } => {
                if mu.mass_at_one() > 0.0 {
                    return Err(Error::InvalidParameter(
                        "spectral score needs mu supported on (0,1)".into(),
                    ));
                }
                if quantile_gs.len() != mu.pairs().len() {
                    return Err(Error::DimensionMismatch {
                        expected: mu.pairs().len(),
                        got: quantile_gs.len(),
                    });
                }
                if !script_gk.is_convex() {
                    return Err(shape_requirement("spectral", *script_gk, "script Gk convex"));
                }
                Ok(())
            }
            ScoreSpec::AcerbiSzekelyW { alpha, w } => {
                check_level("as_w", *alpha)?;
                if !(w.is_finite() && *w >= 0.0) {
                    return Err(Error::InvalidParameter(format!("as_w needs W >= 0, got {w}")));
                }
                Ok(())
            }
            ScoreSpec::Sum { parts, mode } => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter("empty score sum".into()));
                }
                for (w, part) in parts {
                    if !(w.is_finite() && *w > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "sum weights must be positive, got {w}"
                        )));
                    }
                    part.validate()?;
                }
                if *mode == SumMode::Mixture {
                    let d0 = parts[0].1.dim();
                    if parts.iter().any(|(_, s)| s.dim() != d0) {
                        return Err(Error::InvalidParameter(
                            "mixture parts must share a dimension".into(),
                        ));
                    }
                }
                Ok(())
            }
            ScoreSpec::NumericOneDim { ident, g, z0 } => {
                ident.validate()?;
                if ident.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: ident.dim(),
                    });
                }
                if !ident.orientation_asserted() {
                    return Err(Error::Precondition(
                        "numeric one-dimensional scores need an oriented ident".into(),
                    ));
                }
                g.validate()?;
                if !g.is_strictly_positive() {
                    return Err(shape_requirement(
                        "numeric1d",
                        *g,
                        "g strictly positive (exp, softplus, or constant)",
                    ));
                }
                if !z0.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "numeric1d base point must be finite, got {z0}"
                    )));
                }
                Ok(())
            }
            ScoreSpec::Affine { base, lambda, c, .. } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "affine transform needs lambda > 0, got {lambda}"
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "affine transform needs finite c, got {c}"
                    )));
                }
                base.validate()
            }
        }
    }

    /// The functional this score elicits, when it has a single name.
    pub fn natural_functional(&self) -> Result<FunctionalSpec> {
        match self {
            ScoreSpec::QuantilePinball { alpha, .. } => Ok(FunctionalSpec::Quantile(*alpha)),
            ScoreSpec::ExpectileSquare { tau } => Ok(FunctionalSpec::Expectile(*tau)),
            ScoreSpec::BregmanMean { .. } => Ok(FunctionalSpec::Mean),
            ScoreSpec::BregmanRatio { p, q, .. } => {
                Ok(FunctionalSpec::RatioOfExpectations(*p, *q))
            }
            ScoreSpec::MeanVarianceRevealed { .. } => Ok(FunctionalSpec::MeanVariance),
            ScoreSpec::VarEs { alpha, .. } | ScoreSpec::AcerbiSzekelyW { alpha, .. } => {
                Ok(FunctionalSpec::VarEs(*alpha))
            }
            ScoreSpec::Spectral { mu, .. } => {
                Ok(FunctionalSpec::SpectralWithQuantiles(mu.clone()))
            }
            ScoreSpec::Sum { mode, parts } => match mode {
                SumMode::Mixture => parts[0].1.natural_functional(),
                SumMode::Concat => {
                    if parts.len() == 1 {
                        return parts[0].1.natural_functional();
                    }
                    let funcs: Vec<FunctionalSpec> = parts
                        .iter()
                        .map(|(_, s)| s.natural_functional())
                        .collect::<Result<_>>()?;
                    let quantiles: Option<Vec<f64>> = funcs
                        .iter()
                        .map(|f| match f {
                            FunctionalSpec::Quantile(a) => Some(*a),
                            _ => None,
                        })
                        .collect();
                    if let Some(levels) = quantiles {
                        return Ok(FunctionalSpec::QuantileVector(levels));
                    }
                    let expectiles: Option<Vec<f64>> = funcs
                        .iter()
                        .map(|f| match f {
                            FunctionalSpec::Expectile(t) => Some(*t),
                            _ => None,
                        })
                        .collect();
                    if let Some(levels) = expectiles {
                        return Ok(FunctionalSpec::ExpectileVector(levels));
                    }
                    Err(Error::InvalidParameter(
                        "mixed concatenation has no single named functional".into(),
                    ))
                }
            },
            ScoreSpec::NumericOneDim { ident, .. } => ident.natural_functional(),
            ScoreSpec::Affine { base, .. } => base.natural_functional(),
        }
    }

    /// The Table-1 identification function paired with this score.
    pub fn natural_ident(&self) -> Result<IdentSpec> {
        match self {
            ScoreSpec::QuantilePinball { alpha, .. } => {
                Ok(IdentSpec::QuantileIdent { alpha: *alpha })
            }
            ScoreSpec::ExpectileSquare { tau } => Ok(IdentSpec::ExpectileIdent { tau: *tau }),
            ScoreSpec::BregmanMean { .. } => Ok(IdentSpec::RatioIdent {
                p: BaseFn::Identity,
                q: BaseFn::One,
            }),
            ScoreSpec::BregmanRatio { p, q, .. } => Ok(IdentSpec::RatioIdent { p: *p, q: *q }),
            ScoreSpec::MeanVarianceRevealed { .. } => Err(Error::InvalidParameter(
                "no catalog identification function for (mean, variance); \
                 work in the revealed coordinates instead"
                    .into(),
            )),
            ScoreSpec::VarEs { alpha, .. } | ScoreSpec::AcerbiSzekelyW { alpha, .. } => {
                Ok(IdentSpec::VarEsIdent { alpha: *alpha })
            }
            ScoreSpec::Spectral { mu, .. } => Ok(IdentSpec::SpectralIdent { mu: mu.clone() }),
            ScoreSpec::Sum { mode, parts } => match mode {
                SumMode::Mixture => parts[0].1.natural_ident(),
                SumMode::Concat => {
                    if parts.len() == 1 {
                        return parts[0].1.natural_ident();
                    }
                    let idents: Vec<IdentSpec> = parts
                        .iter()
                        .map(|(_, s)| s.natural_ident())
                        .collect::<Result<_>>()?;
                    Ok(IdentSpec::Stacked(idents))
                }
            },
            ScoreSpec::NumericOneDim { ident, .. } => Ok((**ident).clone()),
            ScoreSpec::Affine { base, .. } => base.natural_ident(),
        }
    }

    /// Verifies that expected scores against d are finite: growth of every
    /// y-dependent term is matched against the distribution's moments (or
    /// mgf for exponential growth). Terms gated by 1{y ≤ x} only need the
    /// lower-tail growth of their shape.
    pub fn integrability_check(&self, d: &Distribution) -> Result<()> {
        match self {
            ScoreSpec::QuantilePinball { g, .. } => {
                require_growth(d, g.growth(), "pinball G(y) term")
            }
            ScoreSpec::ExpectileSquare { .. } => {
                require_growth(d, Growth::Quadratic, "expectile squared term")
            }
            ScoreSpec::BregmanMean { .. } => require_growth(d, Growth::Linear, "Bregman y term"),
            ScoreSpec::BregmanRatio { p, q, .. } => {
                require_growth(d, p.growth(), "Bregman ratio p(y) term")?;
                require_growth(d, q.growth(), "Bregman ratio q(y) term")
            }
            ScoreSpec::MeanVarianceRevealed { .. } => {
                require_growth(d, Growth::Quadratic, "mean-variance y^2 term")
            }
            ScoreSpec::VarEs { g1, .. } => {
                require_growth(d, g1.lower_tail_growth(), "VaR/ES G1(y) tail term")?;
                require_growth(d, Growth::Linear, "VaR/ES y term")
            }
            ScoreSpec::Spectral { quantile_gs, .. } => {
                for g in quantile_gs {
                    require_growth(d, g.lower_tail_growth(), "spectral G_r(y) tail term")?;
                }
                require_growth(d, Growth::Linear, "spectral y term")
            }
            ScoreSpec::AcerbiSzekelyW { w, .. } => {
                let g = if *w == 0.0 {
                    Growth::Linear
                } else {
                    Growth::Quadratic
                };
                require_growth(d, g, "S^W y terms")
            }
            ScoreSpec::Sum { parts, .. } => parts
                .iter()
                .try_for_each(|(_, s)| s.integrability_check(d)),
            ScoreSpec::NumericOneDim { ident, .. } => match ident.as_ref() {
                IdentSpec::QuantileIdent { .. } => Ok(()),
                IdentSpec::ExpectileIdent { .. } => {
                    require_growth(d, Growth::Linear, "expectile ident y term")
                }
                IdentSpec::RatioIdent { p, q } => {
                    require_growth(d, p.growth(), "ratio ident p(y) term")?;
                    require_growth(d, q.growth(), "ratio ident q(y) term")
                }
                other => Err(Error::Precondition(format!(
                    "numeric one-dimensional score built on unsupported ident {other:?}"
                ))),
            },
            ScoreSpec::Affine { base, a, .. } => {
                base.integrability_check(d)?;
                require_growth(d, a.growth(), "affine a(y) term")
            }
        }
    }

    /// S(x, y). Errors when x leaves the action domain or the spec violates
    /// its family's shape flags.
    pub fn score(&self, x: &[f64], y: f64) -> Result<f64> {
        self.validate()?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.action_domain().contains(x) {
            return Err(Error::DomainViolation {
                point: x.to_vec(),
                domain: self.action_domain().description(),
            });
        }
        self.score_unchecked(x, y)
    }

    pub(crate) fn score_unchecked(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(match self {
            ScoreSpec::QuantilePinball { alpha, g } => {
                (ind(y <= x[0]) - alpha) * (g.value(x[0]) - g.value(y))
            }
            ScoreSpec::ExpectileSquare { tau } => {
                let dxy = x[0] - y;
                (ind(y <= x[0]) - tau).abs() * dxy * dxy
            }
            ScoreSpec::BregmanMean { phi } => {
                -phi.value(x[0]) + (x[0] - y) * phi.derivative(x[0])
            }
            ScoreSpec::BregmanRatio { phi, p, q } => {
                let qy = q.value(y);
                -phi.value(x[0]) * qy + (x[0] * qy - p.value(y)) * phi.derivative(x[0])
            }
            ScoreSpec::MeanVarianceRevealed { phi1, phi2 } => {
                let m = x[0];
                let s = m * m + x[1];
                -phi1.value(m) + (m - y) * phi1.derivative(m) - phi2.value(s)
                    + (s - y * y) * phi2.derivative(s)
            }
            ScoreSpec::VarEs {
                alpha,
                g1,
                script_g2,
                ..
            } => {
                let hit = ind(y <= x[0]);
                (hit - alpha) * g1.value(x[0]) - hit * g1.value(y)
                    + script_g2.derivative(x[1])
                        * (x[1] - x[0] + hit * (x[0] - y) / alpha)
                    - script_g2.value(x[1])
            }
            ScoreSpec::Spectral {
                mu,
                quantile_gs,
                script_gk,
            } => {
                let k = mu.k();
                let xk = x[k - 1];
                let mut quantile_part = 0.0;
                let mut es_inner = xk;
                for (m, (&(p, q), g)) in mu.pairs().iter().zip(quantile_gs).enumerate() {
                    let hit = ind(y <= x[m]);
                    quantile_part += (hit - q) * g.value(x[m]) - hit * g.value(y);
                    es_inner += p / q * (hit * (x[m] - y) - q * x[m]);
                }
                quantile_part + script_gk.derivative(xk) * es_inner - script_gk.value(xk)
            }
            ScoreSpec::AcerbiSzekelyW { alpha, w } => {
                let (x1, x2) = (x[0], x[1]);
                alpha * (0.5 * x2 * x2 + 0.5 * w * x1 * x1 - x1 * x2)
                    + ind(y <= x1) * (-x2 * (y - x1) + 0.5 * w * (y * y - x1 * x1))
            }
            ScoreSpec::Sum { mode, parts } => {
                let mut total = 0.0;
                match mode {
                    SumMode::Concat => {
                        let mut offset = 0;
                        for (wgt, part) in parts {
                            let width = part.dim();
                            total += wgt * part.score(&x[offset..offset + width], y)?;
                            offset += width;
                        }
                    }
                    SumMode::Mixture => {
                        for (wgt, part) in parts {
                            total += wgt * part.score(x, y)?;
                        }
                    }
                }
                total
            }
            ScoreSpec::NumericOneDim { ident, g, z0 } => {
                let cfg = QuadratureConfig::default().with_breakpoints(&[y]);
                integrate(|z| g.value(z) * scalar_ident(ident, z, y), *z0, x[0], &cfg)?
            }
            ScoreSpec::Affine { base, lambda, a, c } => {
                lambda * base.score(x, y)? + c * a.value(y)
            }
        })
    }

    /// Closed-form expected score S̄(x, F) where the family and its shapes
    /// permit one (via cdf, partial moments, and base expectations), `None`
    /// when only quadrature over y can produce it. This path never
    /// integrates the score against the density, so it serves as an
    /// independent oracle for the quadrature path.
    pub fn expected_score_structural(
        &self,
        x: &[f64],
        d: &Distribution,
    ) -> Result<Option<f64>> {
        self.validate()?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.action_domain().contains(x) {
            return Err(Error::DomainViolation {
                point: x.to_vec(),
                domain: self.action_domain().description(),
            });
        }
        self.integrability_check(d)?;
        self.expected_structural_inner(x, d)
    }

    fn expected_structural_inner(&self, x: &[f64], d: &Distribution) -> Result<Option<f64>> {
        Ok(match self {
            ScoreSpec::QuantilePinball { alpha, g } => {
                let (Some(pe), Some(eg)) = (
                    shape_partial_expectation(d, *g, x[0])?,
                    shape_expectation(d, *g)?,
                ) else {
                    return Ok(None);
                };
                Some((d.cdf(x[0]) - alpha) * g.value(x[0]) - pe + alpha * eg)
            }
            ScoreSpec::ExpectileSquare { tau } => {
                let m2 = d.second_moment()?;
                let xf = x[0];
                let below = xf * xf * d.cdf(xf) - 2.0 * xf * d.lpe(xf) + d.spm(xf)?;
                let total = xf * xf - 2.0 * xf * d.mean() + m2;
                Some((1.0 - tau) * below + tau * (total - below))
            }
            ScoreSpec::BregmanMean { phi } => {
                Some(-phi.value(x[0]) + (x[0] - d.mean()) * phi.derivative(x[0]))
            }
            ScoreSpec::BregmanRatio { phi, p, q } => {
                let ep = base_expectation(d, *p)?;
                let eq = base_expectation(d, *q)?;
                Some(-phi.value(x[0]) * eq + (x[0] * eq - ep) * phi.derivative(x[0]))
            }
            ScoreSpec::MeanVarianceRevealed { phi1, phi2 } => {
                let m = x[0];
                let s = m * m + x[1];
                Some(
                    -phi1.value(m) + (m - d.mean()) * phi1.derivative(m) - phi2.value(s)
                        + (s - d.second_moment()?) * phi2.derivative(s),
                )
            }
            ScoreSpec::VarEs {
                alpha,
                g1,
                script_g2,
                ..
            } => {
                let Some(pe1) = shape_partial_expectation(d, *g1, x[0])? else {
                    return Ok(None);
                };
                let f1 = d.cdf(x[0]);
                Some(
                    (f1 - alpha) * g1.value(x[0]) - pe1
                        + script_g2.derivative(x[1])
                            * (x[1] - x[0] + (x[0] * f1 - d.lpe(x[0])) / alpha)
                        - script_g2.value(x[1]),
                )
            }
            ScoreSpec::Spectral {
                mu,
                quantile_gs,
                script_gk,
            } => {
                let k = mu.k();
                let xk = x[k - 1];
                let mut quantile_part = 0.0;
                let mut es_inner = xk;
                for (m, (&(p, q), g)) in mu.pairs().iter().zip(quantile_gs).enumerate() {
                    let Some(pe) = shape_partial_expectation(d, *g, x[m])? else {
                        return Ok(None);
                    };
                    let fm = d.cdf(x[m]);
                    quantile_part += (fm - q) * g.value(x[m]) - pe;
                    es_inner += p / q * (x[m] * fm - d.lpe(x[m]) - q * x[m]);
                }
                Some(quantile_part + script_gk.derivative(xk) * es_inner - script_gk.value(xk))
            }
            ScoreSpec::AcerbiSzekelyW { alpha, w } => {
                let (x1, x2) = (x[0], x[1]);
                let f1 = d.cdf(x1);
                let mut value = alpha * (0.5 * x2 * x2 + 0.5 * w * x1 * x1 - x1 * x2)
                    - x2 * (d.lpe(x1) - x1 * f1);
                if *w != 0.0 {
                    value += 0.5 * w * (d.spm(x1)? - x1 * x1 * f1);
                }
                Some(value)
            }
            ScoreSpec::Sum { mode, parts } => {
                let mut total = 0.0;
                match mode {
                    SumMode::Concat => {
                        let mut offset = 0;
                        for (wgt, part) in parts {
                            let width = part.dim();
                            match part
                                .expected_structural_inner(&x[offset..offset + width], d)?
                            {
                                Some(v) => total += wgt * v,
                                None => return Ok(None),
                            }
                            offset += width;
                        }
                    }
                    SumMode::Mixture => {
                        for (wgt, part) in parts {
                            match part.expected_structural_inner(x, d)? {
                                Some(v) => total += wgt * v,
                                None => return Ok(None),
                            }
                        }
                    }
                }
                Some(total)
            }
            ScoreSpec::NumericOneDim { ident, g, z0 } => {
                let vbar: Box<dyn Fn(f64) -> f64 + '_> = match ident.as_ref() {
                    IdentSpec::QuantileIdent { alpha } => {
                        let a = *alpha;
                        Box::new(move |z| d.cdf(z) - a)
                    }
                    IdentSpec::ExpectileIdent { tau } => {
                        let t = *tau;
                        Box::new(move |z| expectile_expected_ident(d, t, z))
                    }
                    IdentSpec::RatioIdent { p, q } => {
                        let ep = base_expectation(d, *p)?;
                        let eq = base_expectation(d, *q)?;
                        Box::new(move |z| z * eq - ep)
                    }
                    _ => return Ok(None),
                };
                let cfg = QuadratureConfig::default();
                Some(integrate(|z| g.value(z) * vbar(z), *z0, x[0], &cfg)?)
            }
            ScoreSpec::Affine { base, lambda, a, c } => {
                match base.expected_structural_inner(x, d)? {
                    Some(v) => Some(lambda * v + c * base_expectation(d, *a)?),
                    None => None,
                }
            }
        })
    }
}

/// Free-function form of [`ScoreSpec::score`].
pub fn score(spec: &ScoreSpec, x: &[f64], y: f64) -> Result<f64> {
    spec.score(x, y)
}

/// Builds a weighted sum of scores. Parts sharing one natural functional
/// combine as a mixture (same dimension, same argmin); otherwise they are
/// concatenated onto disjoint slices.
pub fn sum_score(parts: Vec<(f64, ScoreSpec)>) -> Result<ScoreSpec> {
    if parts.is_empty() {
        return Err(Error::InvalidParameter("empty score sum".into()));
    }
    for (w, part) in &parts {
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sum weights must be positive, got {w}"
            )));
        }
        part.validate()?;
    }
    let functionals: Vec<_> = parts
        .iter()
        .map(|(_, s)| s.natural_functional().ok())
        .collect();
    let mixture = functionals[0].is_some() && functionals.iter().all(|f| *f == functionals[0]);
    let mode = if mixture && parts.len() > 1 {
        SumMode::Mixture
    } else {
        SumMode::Concat
    };
    let spec = ScoreSpec::Sum { mode, parts };
    spec.validate()?;
    Ok(spec)
}

/// S(x, y) = ∫_{z₀}^{x} g(z)·V(z, y) dz for a scalar oriented identification
/// function and strictly positive weight g.
pub fn build_numeric_onedim(ident: IdentSpec, g: ShapeFn, z0: f64) -> Result<ScoreSpec> {
    let spec = ScoreSpec::NumericOneDim {
        ident: Box::new(ident),
        g,
        z0,
    };
    spec.validate()?;
    Ok(spec)
}

fn scalar_ident(ident: &IdentSpec, z: f64, y: f64) -> f64 {
    match ident {
        IdentSpec::QuantileIdent { alpha } => ind(y <= z) - alpha,
        IdentSpec::ExpectileIdent { tau } => 2.0 * (ind(y <= z) - tau).abs() * (z - y),
        IdentSpec::RatioIdent { p, q } => z * q.value(y) - p.value(y),
        other => other
            .identify(&[z], y)
            .map(|v| v[0])
            .unwrap_or(f64::NAN),
    }
}

fn require_growth(d: &Distribution, growth: Growth, context: &str) -> Result<()> {
    match growth {
        Growth::Exponential => {
            if d.mgf_finite_at_one() {
                Ok(())
            } else {
                Err(Error::DivergentIntegral(format!(
                    "{context}: E[exp(Y)] diverges for {}",
                    d.family_name()
                )))
            }
        }
        other => {
            let need = other.required_moment();
            if need == 0.0 || d.max_polynomial_moment() > need {
                Ok(())
            } else {
                Err(Error::MomentNotFinite {
                    family: d.family_name().into(),
                    order: need,
                })
            }
        }
    }
}

/// E[G(Y)] in closed form for polynomial catalog shapes.
fn shape_expectation(d: &Distribution, g: ShapeFn) -> Result<Option<f64>> {
    Ok(match g {
        ShapeFn::Zero => Some(0.0),
        ShapeFn::Constant(c) => Some(c),
        ShapeFn::Identity => Some(d.mean()),
        ShapeFn::SquareConvex => Some(d.second_moment()?),
        ShapeFn::NegSquareScaled(c) => Some(-0.5 * c * d.second_moment()?),
        ShapeFn::AlphaHalfSquare(a) => Some(0.5 * a * d.second_moment()?),
        _ => None,
    })
}

/// E[G(Y)·1{Y ≤ x}] in closed form for polynomial catalog shapes.
fn shape_partial_expectation(d: &Distribution, g: ShapeFn, x: f64) -> Result<Option<f64>> {
    Ok(match g {
        ShapeFn::Zero => Some(0.0),
        ShapeFn::Constant(c) => Some(c * d.cdf(x)),
        ShapeFn::Identity => Some(d.lpe(x)),
        ShapeFn::SquareConvex => Some(d.spm(x)?),
        ShapeFn::NegSquareScaled(c) => Some(-0.5 * c * d.spm(x)?),
        ShapeFn::AlphaHalfSquare(a) => Some(0.5 * a * d.spm(x)?),
        _ => None,
    })
}

/// The eq:increasing condition: every map
/// x_r ↦ x_r·(p_r/q_r)·G_k(x_k) + G_r(x_r) must be increasing, checked by
/// the derivative sign (p_r/q_r)·G_k(x_k) + G_r′(x_r) ≥ −1e−12 over a
/// 200-point grid per coordinate on [−40, 40]. The two grid minima are
/// independent, so the joint minimum separates.
fn check_spectral_increasing(
    mu: &SpectralMeasure,
    quantile_gs: &[ShapeFn],
    script_gk: ShapeFn,
) -> Result<()> {
    let n = 200;
    let grid = |i: usize| -40.0 + 80.0 * i as f64 / (n - 1) as f64;
    let min_gk = (0..n)
        .map(|i| script_gk.derivative(grid(i)))
        .fold(f64::INFINITY, f64::min);
    for (&(p, q), g) in mu.pairs().iter().zip(quantile_gs) {
        let min_slope = (0..n)
            .map(|i| g.derivative(grid(i)))
            .fold(f64::INFINITY, f64::min);
        let worst = p / q * min_gk + min_slope;
        if worst < -1e-12 {
            return Err(Error::ShapeRequirement {
                family: "spectral".into(),
                shape: g.to_string(),
                requirement: format!(
                    "x_r -> x_r (p_r/q_r) Gk(x_k) + G_r(x_r) increasing on the grid \
                     (worst slope {worst:.3e} at weight {p}, point {q})"
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinball_example() {
        let s = ScoreSpec::pinball(0.5, ShapeFn::Identity).unwrap();
        assert_eq!(s.score(&[1.0], 0.0).unwrap(), 0.5);
    }

    #[test]
    fn var_es_example() {
        let s = ScoreSpec::var_es(0.5, ShapeFn::Zero, ShapeFn::Exp).unwrap();
        assert_eq!(s.score(&[0.0, 0.0], 1.0).unwrap(), -1.0);
    }

    #[test]
    fn acerbi_szekely_example() {
        let s = ScoreSpec::acerbi_szekely_w(0.5, 0.0).unwrap();
        assert!((s.score(&[0.0, -1.0], -2.0).unwrap() - (-1.75)).abs() < 1e-12);
    }

    #[test]
    fn mean_variance_matches_squared_form_up_to_y_terms() {
        let s = ScoreSpec::mean_variance_revealed(ShapeFn::SquareConvex, ShapeFn::SquareConvex)
            .unwrap();
        let y = 0.7;
        let mut offsets = Vec::new();
        for m in [-1.0, 0.0, 0.5, 2.0] {
            for v in [0.5, 1.0, 3.0] {
                let direct = s.score(&[m, v], y).unwrap();
                let squared = (m - y).powi(2) + (m * m + v - y * y).powi(2);
                offsets.push(direct - squared);
            }
        }
        let spread = offsets.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - offsets.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(spread < 1e-10, "spread {spread}");
    }

    #[test]
    fn numeric_onedim_polynomial_examples() {
        let mean_ident = IdentSpec::RatioIdent {
            p: BaseFn::Identity,
            q: BaseFn::One,
        };
        let s = build_numeric_onedim(mean_ident, ShapeFn::Constant(2.0), 0.0).unwrap();
        assert!((s.score(&[3.0], 1.0).unwrap() - 3.0).abs() < 1e-9);

        let s = build_numeric_onedim(
            IdentSpec::ExpectileIdent { tau: 0.5 },
            ShapeFn::Constant(1.0),
            0.0,
        )
        .unwrap();
        assert!(s.score(&[2.0], 1.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn numeric_onedim_reproduces_pinball_up_to_y_term() {
        let numeric = build_numeric_onedim(
            IdentSpec::QuantileIdent { alpha: 0.3 },
            ShapeFn::Constant(1.0),
            0.0,
        )
        .unwrap();
        let pinball = ScoreSpec::pinball(0.3, ShapeFn::Identity).unwrap();
        let y = 0.4;
        let offsets: Vec<f64> = [-2.0, -0.5, 0.0, 0.4, 1.0, 3.0]
            .iter()
            .map(|&x| {
                numeric.score(&[x], y).unwrap() - pinball.score(&[x], y).unwrap()
            })
            .collect();
        let spread = offsets.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - offsets.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(spread < 1e-9, "spread {spread}");
    }

    #[test]
    fn sum_modes() {
        let p5 = ScoreSpec::pinball(0.5, ShapeFn::Identity).unwrap();
        let p9 = ScoreSpec::pinball(0.9, ShapeFn::Identity).unwrap();
        let concat = sum_score(vec![(1.0, p5.clone()), (1.0, p9.clone())]).unwrap();
        assert_eq!(concat.dim(), 2);
        let got = concat.score(&[0.0, 1.0], 0.5).unwrap();
        let want = p5.score(&[0.0], 0.5).unwrap() + p9.score(&[1.0], 0.5).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.3).abs() < 1e-12);

        let mixture = sum_score(vec![(0.5, p5.clone()), (0.5, p5.clone())]).unwrap();
        assert_eq!(mixture.dim(), 1);
        for x in [-1.0, 0.2, 2.0] {
            let a = mixture.score(&[x], 0.5).unwrap();
            let b = p5.score(&[x], 0.5).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn var_es_mixture_averages_parts() {
        use rand::Rng;
        use rand::SeedableRng;
        let a = ScoreSpec::var_es(0.1, ShapeFn::Zero, ShapeFn::Exp).unwrap();
        let b = ScoreSpec::var_es(0.1, ShapeFn::Zero, ShapeFn::Softplus).unwrap();
        let mixture = sum_score(vec![(0.5, a.clone()), (0.5, b.clone())]).unwrap();
        assert!(matches!(
            mixture,
            ScoreSpec::Sum {
                mode: SumMode::Mixture,
                ..
            }
        ));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x2 = rng.random::<f64>() * 4.0 - 2.0;
            let x1 = x2 + rng.random::<f64>() * 2.0;
            let y = rng.random::<f64>() * 6.0 - 3.0;
            let got = mixture.score(&[x1, x2], y).unwrap();
            let want =
                0.5 * a.score(&[x1, x2], y).unwrap() + 0.5 * b.score(&[x1, x2], y).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sw_decomposition_is_exact() {
        use rand::Rng;
        use rand::SeedableRng;
        for (alpha, w) in [(0.5, 0.0), (0.025, 1.5), (0.1, 2.0)] {
            let sw = ScoreSpec::acerbi_szekely_w(alpha, w).unwrap();
            let ve = ScoreSpec::var_es_unchecked(
                alpha,
                ShapeFn::NegSquareScaled(w),
                ShapeFn::AlphaHalfSquare(alpha),
            )
            .unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            for _ in 0..50 {
                let x2 = rng.random::<f64>() * 4.0 - 2.0;
                let x1 = x2 + rng.random::<f64>() * 3.0;
                let y = rng.random::<f64>() * 8.0 - 4.0;
                let diff = sw.score(&[x1, x2], y).unwrap() - ve.score(&[x1, x2], y).unwrap();
                assert!(diff.abs() < 1e-12, "alpha={alpha} w={w} diff={diff}");
            }
        }
    }

    #[test]
    fn shape_flags_are_enforced() {
        assert!(matches!(
            ScoreSpec::pinball(0.5, ShapeFn::NegSquareScaled(1.0)),
            Err(Error::ShapeRequirement { .. })
        ));
        assert!(matches!(
            ScoreSpec::var_es(0.05, ShapeFn::Zero, ShapeFn::NegSquareScaled(1.0)),
            Err(Error::ShapeRequirement { .. })
        ));
        assert!(ScoreSpec::var_es_unchecked(
            0.05,
            ShapeFn::Zero,
            ShapeFn::NegSquareScaled(1.0)
        )
        .is_ok());
        assert!(matches!(
            ScoreSpec::bregman_mean(ShapeFn::Atan),
            Err(Error::ShapeRequirement { .. })
        ));
    }

    #[test]
    fn spectral_increasing_condition_is_checked() {
        let mu = SpectralMeasure::new(vec![(0.3, 0.1), (0.7, 0.5)]).unwrap();
        assert!(ScoreSpec::spectral(
            mu.clone(),
            vec![ShapeFn::Identity, ShapeFn::Identity],
            ShapeFn::Exp
        )
        .is_ok());
        assert!(matches!(
            ScoreSpec::spectral(
                mu,
                vec![ShapeFn::NegSquareScaled(1.0), ShapeFn::Identity],
                ShapeFn::Exp
            ),
            Err(Error::ShapeRequirement { .. })
        ));
    }

    #[test]
    fn action_domain_is_enforced() {
        let s = ScoreSpec::var_es(0.05, ShapeFn::Zero, ShapeFn::Exp).unwrap();
        assert!(matches!(
            s.score(&[0.0, 1.0], 0.0),
            Err(Error::DomainViolation { .. })
        ));
        let mv = ScoreSpec::mean_variance_revealed(ShapeFn::SquareConvex, ShapeFn::SquareConvex)
            .unwrap();
        assert!(matches!(
            mv.score(&[0.0, -1.0], 0.0),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn structural_pinball_on_uniform() {
        let s = ScoreSpec::pinball(0.5, ShapeFn::Identity).unwrap();
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        let v = s.expected_score_structural(&[0.5], &d).unwrap().unwrap();
        assert!((v - 0.125).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn integrability_gate() {
        let heavy = Distribution::student_t(4.0, 0.0, 1.0).unwrap();
        let exp_pinball = ScoreSpec::pinball(0.1, ShapeFn::Exp).unwrap();
        assert!(exp_pinball.integrability_check(&heavy).is_err());
        assert!(exp_pinball
            .integrability_check(&Distribution::normal(0.0, 1.0).unwrap())
            .is_ok());
        // Exp-shaped G1 only feeds the lower tail, so heavy tails are fine.
        let ve = ScoreSpec::var_es(0.05, ShapeFn::Exp, ShapeFn::Exp).unwrap();
        assert!(ve.integrability_check(&heavy).is_ok());
        let mv = ScoreSpec::mean_variance_revealed(ShapeFn::SquareConvex, ShapeFn::SquareConvex)
            .unwrap();
        assert!(mv
            .integrability_check(&Distribution::student_t(1.5, 0.0, 1.0).unwrap())
            .is_err());
    }

    #[test]
    fn natural_pairings() {
        let s = ScoreSpec::pinball(0.2, ShapeFn::Identity).unwrap();
        assert_eq!(s.natural_functional().unwrap(), FunctionalSpec::Quantile(0.2));
        assert_eq!(
            s.natural_ident().unwrap(),
            IdentSpec::QuantileIdent { alpha: 0.2 }
        );
        let stack = sum_score(vec![
            (1.0, ScoreSpec::pinball(0.1, ShapeFn::Identity).unwrap()),
            (1.0, ScoreSpec::pinball(0.9, ShapeFn::Identity).unwrap()),
        ])
        .unwrap();
        assert_eq!(
            stack.natural_functional().unwrap(),
            FunctionalSpec::QuantileVector(vec![0.1, 0.9])
        );
        assert!(matches!(
            stack.natural_ident().unwrap(),
            IdentSpec::Stacked(_)
        ));
    }
}
