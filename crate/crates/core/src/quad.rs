//! Adaptive Gauss-Kronrod quadrature with caller-supplied breakpoints.
//!
//! Expected scores integrate piecewise-smooth integrands whose kinks sit at
//! known locations (indicator jumps at forecast coordinates, support edges,
//! atoms). Callers list those locations as breakpoints; the integrator
//! splits there first and then bisects the segment with the largest local
//! error estimate until the global estimate meets tolerance.

use crate::error::{Error, Result};

/// Tolerances and budget for one integration call.
#[derive(Clone, Debug)]
pub struct QuadratureConfig {
    /// Relative tolerance on the integral value.
    pub rel_tol: f64,
    /// Absolute floor so near-zero integrals terminate.
    pub abs_tol: f64,
    /// Maximum number of segment bisections before giving up.
    pub max_subdivisions: usize,
    /// Forced initial split points (kinks, atoms, support edges).
    pub breakpoints: Vec<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 4000,
            breakpoints: Vec::new(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Copy of this config with extra breakpoints appended.
    pub fn with_breakpoints(&self, extra: &[f64]) -> Self {
        let mut cfg = self.clone();
        cfg.breakpoints.extend_from_slice(extra);
        cfg
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> Result<Segment> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pair = if i == 7 {
            f(c)
        } else {
            f(c - x * h) + f(c + x * h)
        };
        if !pair.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite integrand near {c}"
            )));
        }
        kronrod += wk * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        } else if i == 7 {
            gauss += WG[3] * pair;
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * h,
        error: (kronrod - gauss).abs() * h,
    })
}

/// Integrates `f` over `[a, b]` (sign-flipped if `a > b`) to the configured
/// tolerance. Breakpoints strictly inside the interval force initial splits.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(
            "integration endpoints must be finite".into(),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = cfg
        .breakpoints
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut segments: Vec<Segment> = Vec::with_capacity(cuts.len() + 1);
    let mut left = lo;
    for cut in cuts.into_iter().chain(std::iter::once(hi)) {
        if cut > left {
            segments.push(gk15(&mut f, left, cut)?);
            left = cut;
        }
    }

    let mut splits = 0usize;
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(sign * total);
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::QuadratureFailure(format!(
                "error estimate {err:.3e} after {splits} subdivisions on [{lo}, {hi}]"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval at floating-point resolution; accept its value as-is.
            let mut spent = seg;
            spent.error = 0.0;
            segments.push(spent);
        } else {
            segments.push(gk15(&mut f, seg.a, mid)?);
            segments.push(gk15(&mut f, mid, seg.b)?);
        }
        splits += 1;
    }
}
