//! Typed catalog of shape functions used to build scoring functions.
//!
//! Every entry exposes its value, first derivative, and (where a closed form
//! exists) an antiderivative, together with monotonicity/convexity flags.
//! Score constructors check the flags against the requirements of their
//! family instead of trusting the caller.

use std::fmt;

/// Asymptotic growth class of a catalog entry, used to decide which
/// distributions can integrate it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Growth {
    Bounded,
    Linear,
    Quadratic,
    Exponential,
}

impl Growth {
    /// Polynomial moment order needed to integrate a function of this
    /// growth class; `Exponential` additionally needs a finite mgf.
    pub fn required_moment(self) -> f64 {
        match self {
            Growth::Bounded => 0.0,
            Growth::Linear => 1.0,
            Growth::Quadratic => 2.0,
            Growth::Exponential => f64::INFINITY,
        }
    }
}

/// A named shape function from the catalog.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeFn {
    /// z
    Identity,
    /// 0
    Zero,
    /// exp(z)
    Exp,
    /// ln(1 + exp(z))
    Softplus,
    /// z²
    SquareConvex,
    /// −c·z²/2, c ≥ 0
    NegSquareScaled(f64),
    /// arctan(z)
    Atan,
    /// z²/(1+|z|)
    PhiBounded,
    /// (α/2)·z², α ∈ (0,1)
    AlphaHalfSquare(f64),
    /// c, c > 0
    Constant(f64),
}

impl ShapeFn {
    /// Validates the parameter of parameterized entries.
    pub fn validate(self) -> crate::Result<Self> {
        match self {
            ShapeFn::NegSquareScaled(c) if !(c.is_finite() && c >= 0.0) => Err(
                crate::Error::InvalidParameter(format!("negsquare_scaled needs c >= 0, got {c}")),
            ),
            ShapeFn::AlphaHalfSquare(a) if !(a.is_finite() && a > 0.0 && a < 1.0) => {
                Err(crate::Error::InvalidParameter(format!(
                    "alpha_half_square needs alpha in (0,1), got {a}"
                )))
            }
            ShapeFn::Constant(c) if !(c.is_finite() && c > 0.0) => Err(
                crate::Error::InvalidParameter(format!("constant needs c > 0, got {c}")),
            ),
            other => Ok(other),
        }
    }

    pub fn value(self, z: f64) -> f64 {
        match self {
            ShapeFn::Identity => z,
            ShapeFn::Zero => 0.0,
            ShapeFn::Exp => z.exp(),
            ShapeFn::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            ShapeFn::SquareConvex => z * z,
            ShapeFn::NegSquareScaled(c) => -0.5 * c * z * z,
            ShapeFn::Atan => z.atan(),
            ShapeFn::PhiBounded => z * z / (1.0 + z.abs()),
            ShapeFn::AlphaHalfSquare(a) => 0.5 * a * z * z,
            ShapeFn::Constant(c) => c,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ShapeFn::Identity => 1.0,
            ShapeFn::Zero => 0.0,
            ShapeFn::Exp => z.exp(),
            ShapeFn::Softplus => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            ShapeFn::SquareConvex => 2.0 * z,
            ShapeFn::NegSquareScaled(c) => -c * z,
            ShapeFn::Atan => 1.0 / (1.0 + z * z),
            ShapeFn::PhiBounded => {
                let a = z.abs();
                z.signum() * (z * z + 2.0 * a) / ((1.0 + a) * (1.0 + a))
            }
            ShapeFn::AlphaHalfSquare(a) => a * z,
            ShapeFn::Constant(_) => 0.0,
        }
    }

    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            ShapeFn::Identity | ShapeFn::Zero | ShapeFn::Constant(_) => 0.0,
            ShapeFn::Exp => z.exp(),
            ShapeFn::Softplus => {
                let s = ShapeFn::Softplus.derivative(z);
                s * (1.0 - s)
            }
            ShapeFn::SquareConvex => 2.0,
            ShapeFn::NegSquareScaled(c) => -c,
            ShapeFn::Atan => -2.0 * z / ((1.0 + z * z) * (1.0 + z * z)),
            ShapeFn::PhiBounded => {
                let a = 1.0 + z.abs();
                2.0 / (a * a * a)
            }
            ShapeFn::AlphaHalfSquare(a) => a,
        }
    }

    /// Antiderivative vanishing at 0, where a closed form exists.
    pub fn antiderivative(self, z: f64) -> Option<f64> {
        match self {
            ShapeFn::Identity => Some(0.5 * z * z),
            ShapeFn::Zero => Some(0.0),
            ShapeFn::Exp => Some(z.exp() - 1.0),
            ShapeFn::Softplus => None,
            ShapeFn::SquareConvex => Some(z * z * z / 3.0),
            ShapeFn::NegSquareScaled(c) => Some(-c * z * z * z / 6.0),
            ShapeFn::Atan => Some(z * z.atan() - 0.5 * (1.0 + z * z).ln()),
            ShapeFn::PhiBounded => None,
            ShapeFn::AlphaHalfSquare(a) => Some(a * z * z * z / 6.0),
            ShapeFn::Constant(c) => Some(c * z),
        }
    }

    /// Weakly nondecreasing on all of ℝ.
    pub fn is_increasing(self) -> bool {
        matches!(
            self,
            ShapeFn::Identity
                | ShapeFn::Zero
                | ShapeFn::Exp
                | ShapeFn::Softplus
                | ShapeFn::Atan
                | ShapeFn::Constant(_)
        ) || matches!(self, ShapeFn::NegSquareScaled(c) if c == 0.0)
    }

    /// Strictly increasing on all of ℝ.
    pub fn is_strictly_increasing(self) -> bool {
        matches!(
            self,
            ShapeFn::Identity | ShapeFn::Exp | ShapeFn::Softplus | ShapeFn::Atan
        )
    }

    /// Weakly convex on all of ℝ.
    pub fn is_convex(self) -> bool {
        matches!(
            self,
            ShapeFn::Identity
                | ShapeFn::Zero
                | ShapeFn::Exp
                | ShapeFn::Softplus
                | ShapeFn::SquareConvex
                | ShapeFn::PhiBounded
                | ShapeFn::AlphaHalfSquare(_)
                | ShapeFn::Constant(_)
        ) || matches!(self, ShapeFn::NegSquareScaled(c) if c == 0.0)
    }

    /// Strictly convex on all of ℝ.
    pub fn is_strictly_convex(self) -> bool {
        matches!(
            self,
            ShapeFn::Exp
                | ShapeFn::Softplus
                | ShapeFn::SquareConvex
                | ShapeFn::PhiBounded
                | ShapeFn::AlphaHalfSquare(_)
        )
    }

    /// Strictly positive on all of ℝ.
    pub fn is_strictly_positive(self) -> bool {
        matches!(self, ShapeFn::Exp | ShapeFn::Softplus | ShapeFn::Constant(_))
    }

    pub fn growth(self) -> Growth {
        match self {
            ShapeFn::Zero | ShapeFn::Atan | ShapeFn::Constant(_) => Growth::Bounded,
            ShapeFn::Identity | ShapeFn::Softplus | ShapeFn::PhiBounded => Growth::Linear,
            ShapeFn::SquareConvex | ShapeFn::AlphaHalfSquare(_) => Growth::Quadratic,
            ShapeFn::NegSquareScaled(c) => {
                if c == 0.0 {
                    Growth::Bounded
                } else {
                    Growth::Quadratic
                }
            }
            ShapeFn::Exp => Growth::Exponential,
        }
    }

    /// Growth on the lower tail z → −∞ alone, which is what matters for
    /// integrability of indicator-gated terms like 1{y ≤ x}·G(y). Exp and
    /// softplus vanish there, so they are bounded despite their global
    /// growth.
    pub fn lower_tail_growth(self) -> Growth {
        match self {
            ShapeFn::Exp | ShapeFn::Softplus => Growth::Bounded,
            other => other.growth(),
        }
    }
}

impl fmt::Display for ShapeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeFn::Identity => write!(f, "identity"),
            ShapeFn::Zero => write!(f, "zero"),
            ShapeFn::Exp => write!(f, "exp"),
            ShapeFn::Softplus => write!(f, "softplus"),
            ShapeFn::SquareConvex => write!(f, "square_convex"),
            ShapeFn::NegSquareScaled(c) => write!(f, "negsquare_scaled({c})"),
            ShapeFn::Atan => write!(f, "atan"),
            ShapeFn::PhiBounded => write!(f, "phi_bounded"),
            ShapeFn::AlphaHalfSquare(a) => write!(f, "alpha_half_square({a})"),
            ShapeFn::Constant(c) => write!(f, "constant({c})"),
        }
    }
}

/// Base functions for ratios of expectations T(F) = E[p(Y)] / E[q(Y)]
/// and for the Bregman score's q(y) factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseFn {
    /// y
    Identity,
    /// y²
    Square,
    /// 1
    One,
    /// exp(min(y, 700)); the clip guards against f64 overflow, it does not
    /// relax the finite-mgf requirement.
    ExpClip,
}

impl BaseFn {
    pub fn value(self, y: f64) -> f64 {
        match self {
            BaseFn::Identity => y,
            BaseFn::Square => y * y,
            BaseFn::One => 1.0,
            BaseFn::ExpClip => y.min(700.0).exp(),
        }
    }

    pub fn growth(self) -> Growth {
        match self {
            BaseFn::One => Growth::Bounded,
            BaseFn::Identity => Growth::Linear,
            BaseFn::Square => Growth::Quadratic,
            BaseFn::ExpClip => Growth::Exponential,
        }
    }
}

impl fmt::Display for BaseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseFn::Identity => write!(f, "identity"),
            BaseFn::Square => write!(f, "square"),
            BaseFn::One => write!(f, "one"),
            BaseFn::ExpClip => write!(f, "exp_clip"),
        }
    }
}
