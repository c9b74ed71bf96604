//! Text literals for distributions, functionals, identification functions,
//! and scores: one grammar shared by CLI flags, config files, and report
//! output. Every Display impl here emits a literal that re-parses to an
//! equal value.

use std::fmt;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::functionals::{FunctionalSpec, SpectralMeasure};
use crate::ident::IdentSpec;
use crate::scores::{sum_score, ScoreSpec};
use crate::shapes::{BaseFn, ShapeFn};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Eq,
    Star,
    At,
    Semi,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Star => write!(f, "`*`"),
            Tok::At => write!(f, "`@`"),
            Tok::Semi => write!(f, "`;`"),
        }
    }
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            ',' => {
                toks.push((i, Tok::Comma));
                i += 1;
            }
            '=' => {
                toks.push((i, Tok::Eq));
                i += 1;
            }
            '*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            '@' => {
                toks.push((i, Tok::At));
                i += 1;
            }
            ';' => {
                toks.push((i, Tok::Semi));
                i += 1;
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(input[start..i].to_string())));
            }
            '0'..='9' | '.' | '-' | '+' => {
                let start = i;
                if matches!(c, '-' | '+') {
                    i += 1;
                }
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    i += 1;
                    if i < bytes.len() && matches!(bytes[i] as char, '-' | '+') {
                        i += 1;
                    }
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &input[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    input: input.to_string(),
                    at: start,
                    msg: format!("invalid number `{text}`"),
                })?;
                toks.push((start, Tok::Num(v)));
            }
            other => {
                return Err(Error::Parse {
                    input: input.to_string(),
                    at: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    input: &'a str,
    toks: Vec<(usize, Tok)>,
    i: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Result<Self> {
        Ok(Parser {
            input,
            toks: lex(input)?,
            i: 0,
        })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let at = self
            .toks
            .get(self.i)
            .map(|(p, _)| *p)
            .unwrap_or(self.input.len());
        Error::Parse {
            input: self.input.to_string(),
            at,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(_, t)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|(_, t)| t.clone());
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<()> {
        match self.peek() {
            Some(t) if t == want => {
                self.i += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {want}, found {t}"))),
            None => Err(self.err(format!("expected {want}, found end of input"))),
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(t) => {
                self.i -= 1;
                Err(self.err(format!("expected a name, found {t}")))
            }
            None => Err(self.err("expected a name, found end of input")),
        }
    }

    fn num(&mut self) -> Result<f64> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(v),
            Some(t) => {
                self.i -= 1;
                Err(self.err(format!("expected a number, found {t}")))
            }
            None => Err(self.err("expected a number, found end of input")),
        }
    }

    fn key(&mut self, name: &str) -> Result<()> {
        let got = self.ident()?;
        if got != name {
            self.i -= 1;
            return Err(self.err(format!("expected `{name}=`, found `{got}`")));
        }
        self.expect(&Tok::Eq)
    }

    fn finish(&self) -> Result<()> {
        if self.i == self.toks.len() {
            Ok(())
        } else {
            Err(self.err("trailing input"))
        }
    }

    fn distribution(&mut self) -> Result<Distribution> {
        let name = self.ident()?;
        self.expect(&Tok::LParen)?;
        let d = match name.as_str() {
            "normal" => {
                let mu = self.num()?;
                self.expect(&Tok::Comma)?;
                let sigma = self.num()?;
                Distribution::normal(mu, sigma)?
            }
            "student_t" => {
                let nu = self.num()?;
                let (mut loc, mut scale) = (0.0, 1.0);
                if self.eat(&Tok::Comma) {
                    loc = self.num()?;
                    self.expect(&Tok::Comma)?;
                    scale = self.num()?;
                }
                Distribution::student_t(nu, loc, scale)?
            }
            "lognormal" => {
                let mu = self.num()?;
                self.expect(&Tok::Comma)?;
                let sigma = self.num()?;
                Distribution::lognormal(mu, sigma)?
            }
            "uniform" => {
                let a = self.num()?;
                self.expect(&Tok::Comma)?;
                let b = self.num()?;
                Distribution::uniform(a, b)?
            }
            "exponential" => Distribution::exponential(self.num()?)?,
            "two_point" => {
                let y1 = self.num()?;
                self.expect(&Tok::Comma)?;
                let y2 = self.num()?;
                self.expect(&Tok::Comma)?;
                let p = self.num()?;
                Distribution::two_point(y1, y2, p)?
            }
            "mixture" => {
                let mut parts = Vec::new();
                loop {
                    let w = self.num()?;
                    self.expect(&Tok::Star)?;
                    parts.push((w, self.distribution()?));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                crate::dist::mix(parts)?
            }
            other => return Err(self.err(format!("unknown distribution `{other}`"))),
        };
        self.expect(&Tok::RParen)?;
        Ok(d)
    }

    fn shape(&mut self) -> Result<ShapeFn> {
        let name = self.ident()?;
        let shape = match name.as_str() {
            "identity" => ShapeFn::Identity,
            "zero" => ShapeFn::Zero,
            "exp" => ShapeFn::Exp,
            "softplus" => ShapeFn::Softplus,
            "square_convex" => ShapeFn::SquareConvex,
            "atan" => ShapeFn::Atan,
            "phi_bounded" => ShapeFn::PhiBounded,
            "negsquare_scaled" => {
                self.expect(&Tok::LParen)?;
                let c = self.num()?;
                self.expect(&Tok::RParen)?;
                ShapeFn::NegSquareScaled(c)
            }
            "alpha_half_square" => {
                self.expect(&Tok::LParen)?;
                let a = self.num()?;
                self.expect(&Tok::RParen)?;
                ShapeFn::AlphaHalfSquare(a)
            }
            "constant" => {
                self.expect(&Tok::LParen)?;
                let c = self.num()?;
                self.expect(&Tok::RParen)?;
                ShapeFn::Constant(c)
            }
            other => return Err(self.err(format!("unknown shape function `{other}`"))),
        };
        shape.validate()
    }

    fn base(&mut self) -> Result<BaseFn> {
        let name = self.ident()?;
        match name.as_str() {
            "identity" => Ok(BaseFn::Identity),
            "square" => Ok(BaseFn::Square),
            "one" => Ok(BaseFn::One),
            "exp_clip" => Ok(BaseFn::ExpClip),
            other => Err(self.err(format!("unknown base function `{other}`"))),
        }
    }

    fn measure(&mut self) -> Result<SpectralMeasure> {
        let mut pairs = Vec::new();
        loop {
            let w = self.num()?;
            self.expect(&Tok::At)?;
            pairs.push((w, self.num()?));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        SpectralMeasure::new(pairs)
    }

    fn level_list(&mut self) -> Result<Vec<f64>> {
        let mut out = vec![self.num()?];
        while self.eat(&Tok::Comma) {
            out.push(self.num()?);
        }
        Ok(out)
    }

    fn functional(&mut self) -> Result<FunctionalSpec> {
        let name = self.ident()?;
        let spec = match name.as_str() {
            "mean" => FunctionalSpec::Mean,
            "mean_variance" => FunctionalSpec::MeanVariance,
            "moment" => {
                self.expect(&Tok::LParen)?;
                let k = self.num()?;
                self.expect(&Tok::RParen)?;
                if k < 1.0 || k.fract() != 0.0 {
                    return Err(self.err(format!("moment order must be a positive integer, got {k}")));
                }
                FunctionalSpec::MomentK(k as u32)
            }
            "ratio" => {
                self.expect(&Tok::LParen)?;
                self.key("p")?;
                let p = self.base()?;
                self.expect(&Tok::Comma)?;
                self.key("q")?;
                let q = self.base()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::RatioOfExpectations(p, q)
            }
            "quantile" => {
                self.expect(&Tok::LParen)?;
                let a = self.num()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::Quantile(a)
            }
            "expectile" => {
                self.expect(&Tok::LParen)?;
                let t = self.num()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::Expectile(t)
            }
            "quantiles" => {
                self.expect(&Tok::LParen)?;
                let v = self.level_list()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::QuantileVector(v)
            }
            "expectiles" => {
                self.expect(&Tok::LParen)?;
                let v = self.level_list()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::ExpectileVector(v)
            }
            "var_es" => {
                self.expect(&Tok::LParen)?;
                let a = self.num()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::VarEs(a)
            }
            "spectral" => {
                self.expect(&Tok::LParen)?;
                let mu = self.measure()?;
                self.expect(&Tok::RParen)?;
                FunctionalSpec::SpectralWithQuantiles(mu)
            }
            other => return Err(self.err(format!("unknown functional `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn ident_spec(&mut self) -> Result<IdentSpec> {
        let name = self.ident()?;
        self.expect(&Tok::LParen)?;
        let spec = match name.as_str() {
            "ratio_ident" => {
                self.key("p")?;
                let p = self.base()?;
                self.expect(&Tok::Comma)?;
                self.key("q")?;
                let q = self.base()?;
                IdentSpec::RatioIdent { p, q }
            }
            "quantile_ident" => IdentSpec::QuantileIdent { alpha: self.num()? },
            "expectile_ident" => IdentSpec::ExpectileIdent { tau: self.num()? },
            "var_es_ident" => IdentSpec::VarEsIdent { alpha: self.num()? },
            "spectral_ident" => IdentSpec::SpectralIdent {
                mu: self.measure()?,
            },
            "stacked" => {
                let mut parts = vec![self.ident_spec()?];
                while self.eat(&Tok::Comma) {
                    parts.push(self.ident_spec()?);
                }
                IdentSpec::Stacked(parts)
            }
            other => return Err(self.err(format!("unknown identification function `{other}`"))),
        };
        self.expect(&Tok::RParen)?;
        spec.validate()?;
        Ok(spec)
    }

    fn score(&mut self) -> Result<ScoreSpec> {
        let name = self.ident()?;
        self.expect(&Tok::LParen)?;
        let spec = match name.as_str() {
            "pinball" => {
                let a = self.num()?;
                self.expect(&Tok::Comma)?;
                self.key("G")?;
                let g = self.shape()?;
                ScoreSpec::pinball(a, g)?
            }
            "expectile_square" => ScoreSpec::expectile_square(self.num()?)?,
            "bregman_mean" => {
                self.key("phi")?;
                ScoreSpec::bregman_mean(self.shape()?)?
            }
            "bregman_ratio" => {
                self.key("phi")?;
                let phi = self.shape()?;
                self.expect(&Tok::Comma)?;
                self.key("p")?;
                let p = self.base()?;
                self.expect(&Tok::Comma)?;
                self.key("q")?;
                let q = self.base()?;
                ScoreSpec::bregman_ratio(phi, p, q)?
            }
            "mean_variance" => {
                self.key("phi1")?;
                let phi1 = self.shape()?;
                self.expect(&Tok::Comma)?;
                self.key("phi2")?;
                let phi2 = self.shape()?;
                ScoreSpec::mean_variance_revealed(phi1, phi2)?
            }
            "var_es" | "var_es_unchecked" => {
                let a = self.num()?;
                self.expect(&Tok::Comma)?;
                self.key("G1")?;
                let g1 = self.shape()?;
                self.expect(&Tok::Comma)?;
                self.key("G2")?;
                let g2 = self.shape()?;
                if name == "var_es" {
                    ScoreSpec::var_es(a, g1, g2)?
                } else {
                    ScoreSpec::var_es_unchecked(a, g1, g2)?
                }
            }
            "spectral" => {
                let mu = self.measure()?;
                self.expect(&Tok::Semi)?;
                let n = mu.pairs().len();
                let mut gs = vec![ShapeFn::Identity; n];
                let mut gk = None;
                loop {
                    let key = self.ident()?;
                    self.expect(&Tok::Eq)?;
                    let shape = self.shape()?;
                    if key == "Gk" {
                        gk = Some(shape);
                    } else if let Some(r) = key
                        .strip_prefix('G')
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|r| (1..=n).contains(r))
                    {
                        gs[r - 1] = shape;
                    } else {
                        return Err(self.err(format!(
                            "expected `G1`..`G{n}` or `Gk`, found `{key}`"
                        )));
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                let gk = gk.ok_or_else(|| self.err("spectral score needs `Gk=`"))?;
                ScoreSpec::spectral(mu, gs, gk)?
            }
            "as_w" => {
                let a = self.num()?;
                self.expect(&Tok::Comma)?;
                self.key("W")?;
                ScoreSpec::acerbi_szekely_w(a, self.num()?)?
            }
            "sum" => {
                let mut parts = Vec::new();
                loop {
                    let w = self.num()?;
                    self.expect(&Tok::Star)?;
                    parts.push((w, self.score()?));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                sum_score(parts)?
            }
            "numeric1d" => {
                self.key("ident")?;
                let ident = self.ident_spec()?;
                self.expect(&Tok::Comma)?;
                self.key("g")?;
                let g = self.shape()?;
                self.expect(&Tok::Comma)?;
                self.key("z0")?;
                let z0 = self.num()?;
                crate::scores::build_numeric_onedim(ident, g, z0)?
            }
            "affine" => {
                self.key("base")?;
                let base = self.score()?;
                self.expect(&Tok::Comma)?;
                self.key("lambda")?;
                let lambda = self.num()?;
                self.expect(&Tok::Comma)?;
                self.key("a")?;
                let a = self.base()?;
                self.expect(&Tok::Comma)?;
                self.key("c")?;
                let c = self.num()?;
                ScoreSpec::affine(base, lambda, a, c)?
            }
            other => return Err(self.err(format!("unknown score family `{other}`"))),
        };
        self.expect(&Tok::RParen)?;
        Ok(spec)
    }
}

pub fn parse_distribution(input: &str) -> Result<Distribution> {
    let mut p = Parser::new(input)?;
    let d = p.distribution()?;
    p.finish()?;
    Ok(d)
}

pub fn parse_functional(input: &str) -> Result<FunctionalSpec> {
    let mut p = Parser::new(input)?;
    let f = p.functional()?;
    p.finish()?;
    Ok(f)
}

pub fn parse_ident(input: &str) -> Result<IdentSpec> {
    let mut p = Parser::new(input)?;
    let v = p.ident_spec()?;
    p.finish()?;
    Ok(v)
}

pub fn parse_score(input: &str) -> Result<ScoreSpec> {
    let mut p = Parser::new(input)?;
    let s = p.score()?;
    p.finish()?;
    Ok(s)
}

pub fn parse_shape(input: &str) -> Result<ShapeFn> {
    let mut p = Parser::new(input)?;
    let s = p.shape()?;
    p.finish()?;
    Ok(s)
}

pub fn parse_base(input: &str) -> Result<BaseFn> {
    let mut p = Parser::new(input)?;
    let b = p.base()?;
    p.finish()?;
    Ok(b)
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Normal { mu, sigma } => write!(f, "normal({mu},{sigma})"),
            Distribution::StudentT { nu, loc, scale } => {
                if *loc == 0.0 && *scale == 1.0 {
                    write!(f, "student_t({nu})")
                } else {
                    write!(f, "student_t({nu},{loc},{scale})")
                }
            }
            Distribution::Lognormal { mu, sigma } => write!(f, "lognormal({mu},{sigma})"),
            Distribution::Uniform { a, b } => write!(f, "uniform({a},{b})"),
            Distribution::Exponential { rate } => write!(f, "exponential({rate})"),
            Distribution::TwoPoint { y1, y2, p } => write!(f, "two_point({y1},{y2},{p})"),
            Distribution::FiniteMixture { components } => {
                write!(f, "mixture(")?;
                for (i, (w, d)) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{w}*{d}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for SpectralMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (w, q)) in self.pairs().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}@{q}")?;
        }
        Ok(())
    }
}

impl fmt::Display for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalSpec::Mean => write!(f, "mean"),
            FunctionalSpec::MomentK(k) => write!(f, "moment({k})"),
            FunctionalSpec::RatioOfExpectations(p, q) => write!(f, "ratio(p={p}, q={q})"),
            FunctionalSpec::Quantile(a) => write!(f, "quantile({a})"),
            FunctionalSpec::Expectile(t) => write!(f, "expectile({t})"),
            FunctionalSpec::MeanVariance => write!(f, "mean_variance"),
            FunctionalSpec::QuantileVector(v) => {
                write!(f, "quantiles(")?;
                write_levels(f, v)?;
                write!(f, ")")
            }
            FunctionalSpec::ExpectileVector(v) => {
                write!(f, "expectiles(")?;
                write_levels(f, v)?;
                write!(f, ")")
            }
            FunctionalSpec::VarEs(a) => write!(f, "var_es({a})"),
            FunctionalSpec::SpectralWithQuantiles(mu) => write!(f, "spectral({mu})"),
        }
    }
}

fn write_levels(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    for (i, a) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for IdentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdentSpec::RatioIdent { p, q } => write!(f, "ratio_ident(p={p}, q={q})"),
            IdentSpec::QuantileIdent { alpha } => write!(f, "quantile_ident({alpha})"),
            IdentSpec::ExpectileIdent { tau } => write!(f, "expectile_ident({tau})"),
            IdentSpec::VarEsIdent { alpha } => write!(f, "var_es_ident({alpha})"),
            IdentSpec::SpectralIdent { mu } => write!(f, "spectral_ident({mu})"),
            IdentSpec::Stacked(parts) => {
                write!(f, "stacked(")?;
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{part}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreSpec::QuantilePinball { alpha, g } => write!(f, "pinball({alpha}, G={g})"),
            ScoreSpec::ExpectileSquare { tau } => write!(f, "expectile_square({tau})"),
            ScoreSpec::BregmanMean { phi } => write!(f, "bregman_mean(phi={phi})"),
            ScoreSpec::BregmanRatio { phi, p, q } => {
                write!(f, "bregman_ratio(phi={phi}, p={p}, q={q})")
            }
            ScoreSpec::MeanVarianceRevealed { phi1, phi2 } => {
                write!(f, "mean_variance(phi1={phi1}, phi2={phi2})")
            }
            ScoreSpec::VarEs {
                alpha,
                g1,
                script_g2,
                checked,
            } => {
                let name = if *checked { "var_es" } else { "var_es_unchecked" };
                write!(f, "{name}({alpha}, G1={g1}, G2={script_g2})")
            }
            ScoreSpec::Spectral {
                mu,
                quantile_gs,
                script_gk,
            } => {
                write!(f, "spectral({mu}; ")?;
                for (r, g) in quantile_gs.iter().enumerate() {
                    write!(f, "G{}={g}, ", r + 1)?;
                }
                write!(f, "Gk={script_gk})")
            }
            ScoreSpec::AcerbiSzekelyW { alpha, w } => write!(f, "as_w({alpha}, W={w})"),
            ScoreSpec::Sum { parts, .. } => {
                write!(f, "sum(")?;
                for (i, (w, part)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{w}*{part}")?;
                }
                write!(f, ")")
            }
            ScoreSpec::NumericOneDim { ident, g, z0 } => {
                write!(f, "numeric1d(ident={ident}, g={g}, z0={z0})")
            }
            ScoreSpec::Affine { base, lambda, a, c } => {
                write!(f, "affine(base={base}, lambda={lambda}, a={a}, c={c})")
            }
        }
    }
}
