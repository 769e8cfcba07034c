//! Model formulas such as
//! `surv(entry, time, status) ~ age + tve(trt, degree = 0, knots = [4]) + (trt | site)`.
//!
//! The response takes 2 (`time, status`), 3 (`entry, time, status`) or 4
//! (`entry, time, upper, status`) positional columns, or named arguments
//! `entry=`, `time=`, `upper=`, `status=`.

use serde::{Deserialize, Serialize};

use crate::data::{CensoringStatus, Dataset, Schema};
use crate::error::{Error, Result};
use crate::model::{BaselineSpec, ModelSpec, RandomEffectSpec, ReTerm};
use crate::predictor::{TveForm, TveSpec};
use crate::spline::{default_knots, BasisKind, KnotVector, SplineConfig};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Tilde,
    Plus,
    Pipe,
    Equals,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '~' => Some(Tok::Tilde),
            '+' => Some(Tok::Plus),
            '|' => Some(Tok::Pipe),
            '=' => Some(Tok::Equals),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, i));
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::SyntaxError {
                position: start,
                message: format!("invalid number `{s}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_alphabetic() || c == '_' || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else {
            return Err(Error::SyntaxError {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub entry: Option<String>,
    pub time: String,
    pub upper: Option<String>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TveTerm {
    pub covariate: String,
    pub degree: Option<usize>,
    pub df: Option<usize>,
    pub knots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTerm {
    pub intercept: bool,
    pub slopes: Vec<String>,
    pub factor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    Covariate(String),
    Tve(TveTerm),
    Random(RandomTerm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaAst {
    pub response: Response,
    pub terms: Vec<Term>,
}

impl FormulaAst {
    /// Fixed-effect covariates in order of first mention; a `tve(x)` term
    /// implies `x`.
    pub fn covariates(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for t in &self.terms {
            let name = match t {
                Term::Covariate(x) => x,
                Term::Tve(t) => &t.covariate,
                Term::Random(_) => continue,
            };
            if !v.contains(name) {
                v.push(name.clone());
            }
        }
        v
    }

    pub fn factors(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for t in &self.terms {
            if let Term::Random(r) = t {
                if !v.contains(&r.factor) {
                    v.push(r.factor.clone());
                }
            }
        }
        v
    }

    /// Columns to read for this formula.
    pub fn schema(&self, id: Option<String>) -> Schema {
        Schema {
            entry: self.response.entry.clone(),
            time: self.response.time.clone(),
            upper: self.response.upper.clone(),
            status: self.response.status.clone(),
            covariates: self.covariates(),
            factors: self.factors(),
            id,
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::SyntaxError {
            position: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn is_call(&self) -> bool {
        matches!(self.toks.get(self.i + 1), Some((Tok::LParen, _)))
    }

    fn response(&mut self) -> Result<Response> {
        let name = self.ident("a `surv(...)` response")?;
        if !name.eq_ignore_ascii_case("surv") {
            if self.is_call() {
                return Err(Error::UnknownFunction(name));
            }
            return self.err("the response must be `surv(...)`");
        }
        self.expect(Tok::LParen, "`(`")?;
        let mut positional = Vec::new();
        let mut named: Vec<(String, String)> = Vec::new();
        loop {
            let a = self.ident("a column name")?;
            if *self.peek() == Tok::Equals {
                self.next();
                let v = self.ident("a column name")?;
                if !["entry", "time", "upper", "status"].contains(&a.as_str()) {
                    return self.err(format!("unknown response argument `{a}`"));
                }
                named.push((a, v));
            } else {
                positional.push(a);
            }
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                Tok::RParen => {
                    self.next();
                    break;
                }
                _ => return self.err("expected `,` or `)`"),
            }
        }
        let get = |k: &str| named.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone());
        let r = if !named.is_empty() {
            if !positional.is_empty() {
                return self.err("mix of named and positional response arguments");
            }
            match (get("time"), get("status")) {
                (Some(time), Some(status)) => Response {
                    entry: get("entry"),
                    time,
                    upper: get("upper"),
                    status,
                },
                _ => return self.err("the response needs `time` and `status`"),
            }
        } else {
            let mut p = positional.into_iter();
            match p.len() {
                2 => Response {
                    entry: None,
                    time: p.next().unwrap_or_default(),
                    upper: None,
                    status: p.next().unwrap_or_default(),
                },
                3 => Response {
                    entry: p.next(),
                    time: p.next().unwrap_or_default(),
                    upper: None,
                    status: p.next().unwrap_or_default(),
                },
                4 => Response {
                    entry: p.next(),
                    time: p.next().unwrap_or_default(),
                    upper: p.next(),
                    status: p.next().unwrap_or_default(),
                },
                n => return self.err(format!("the response takes 2 to 4 columns, found {n}")),
            }
        };
        Ok(r)
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.next();
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let pos = self.pos();
        let v = self.number()?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::SyntaxError {
                position: pos,
                message: format!("{what} must be a non-negative integer"),
            });
        }
        Ok(v as usize)
    }

    fn tve(&mut self) -> Result<TveTerm> {
        self.expect(Tok::LParen, "`(`")?;
        let mut t = TveTerm {
            covariate: self.ident("a covariate")?,
            degree: None,
            df: None,
            knots: None,
        };
        while *self.peek() == Tok::Comma {
            self.next();
            let key = self.ident("an option name")?;
            self.expect(Tok::Equals, "`=`")?;
            match key.as_str() {
                "degree" => t.degree = Some(self.count("degree")?),
                "df" => t.df = Some(self.count("df")?),
                "knots" => {
                    let mut k = Vec::new();
                    if *self.peek() == Tok::LBracket {
                        self.next();
                        if *self.peek() != Tok::RBracket {
                            k.push(self.number()?);
                            while *self.peek() == Tok::Comma {
                                self.next();
                                k.push(self.number()?);
                            }
                        }
                        self.expect(Tok::RBracket, "`]`")?;
                    } else {
                        k.push(self.number()?);
                    }
                    t.knots = Some(k);
                }
                _ => return self.err(format!("unknown tve option `{key}`")),
            }
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        if t.df.is_some() && t.knots.is_some() {
            return Err(Error::AmbiguousSplineOptions);
        }
        Ok(t)
    }

    fn random(&mut self) -> Result<RandomTerm> {
        self.expect(Tok::LParen, "`(`")?;
        let mut intercept = true;
        let mut slopes = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Num(1.0) => intercept = true,
                Tok::Num(0.0) => intercept = false,
                Tok::Ident(s) => slopes.push(s),
                _ => return self.err("expected `1`, `0` or a covariate"),
            }
            self.next();
            match self.peek() {
                Tok::Plus => {
                    self.next();
                }
                Tok::Pipe => {
                    self.next();
                    break;
                }
                _ => return self.err("expected `+` or `|`"),
            }
        }
        let factor = self.ident("a grouping factor")?;
        self.expect(Tok::RParen, "`)`")?;
        if !intercept && slopes.is_empty() {
            return self.err("random-effect term has no terms");
        }
        Ok(RandomTerm {
            intercept,
            slopes,
            factor,
        })
    }

    fn term(&mut self) -> Result<Option<Term>> {
        match self.peek().clone() {
            Tok::Num(1.0) => {
                self.next();
                Ok(None)
            }
            Tok::Num(_) => self.err("only `1` may appear as a constant term"),
            Tok::LParen => Ok(Some(Term::Random(self.random()?))),
            Tok::Ident(name) => {
                if self.is_call() {
                    self.next();
                    if name == "tve" {
                        Ok(Some(Term::Tve(self.tve()?)))
                    } else if name.eq_ignore_ascii_case("surv") {
                        Err(Error::DuplicateResponse)
                    } else {
                        Err(Error::UnknownFunction(name))
                    }
                } else {
                    self.next();
                    Ok(Some(Term::Covariate(name)))
                }
            }
            _ => self.err("expected a term"),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<FormulaAst> {
    let toks = lex(text)?;
    if toks.len() == 1 {
        return Err(Error::SyntaxError {
            position: 0,
            message: "empty formula".into(),
        });
    }
    if toks.iter().filter(|(t, _)| *t == Tok::Tilde).count() > 1 {
        return Err(Error::DuplicateResponse);
    }
    let mut p = Parser { toks, i: 0 };
    let response = p.response()?;
    match p.peek() {
        Tok::Tilde => {
            p.next();
        }
        Tok::Plus => return Err(Error::DuplicateResponse),
        _ => return p.err("expected `~`"),
    }
    let mut terms = Vec::new();
    loop {
        if let Some(t) = p.term()? {
            terms.push(t);
        }
        match p.peek() {
            Tok::Plus => {
                p.next();
            }
            Tok::End => break,
            _ => return p.err("expected `+` or end of formula"),
        }
    }
    Ok(FormulaAst { response, terms })
}

/// Spline options for a baseline or a time-varying effect.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplineOptions {
    pub degree: Option<usize>,
    pub df: Option<usize>,
    pub knots: Option<Vec<f64>>,
}

/// Baseline family code (as on the command line) with its spline options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub family: String,
    #[serde(default)]
    pub spline: SplineOptions,
}

impl BaselineOptions {
    pub fn new(family: &str) -> Self {
        BaselineOptions {
            family: family.into(),
            spline: SplineOptions::default(),
        }
    }
}

struct KnotSource {
    events: Vec<f64>,
    entries: Vec<f64>,
    all: Vec<f64>,
}

impl KnotSource {
    fn new(data: &Dataset) -> Self {
        KnotSource {
            events: data
                .records
                .iter()
                .filter(|r| r.status == CensoringStatus::Event)
                .map(|r| r.time)
                .collect(),
            entries: data.records.iter().map(|r| r.entry_time).collect(),
            all: data
                .records
                .iter()
                .flat_map(|r| [Some(r.time), r.upper_time])
                .flatten()
                .collect(),
        }
    }

    /// `drop` is how many basis columns beyond the internal knots the df count
    /// excludes (1 for M-splines, 0 when the first column is dropped).
    fn knots(&self, opts: &SplineOptions, degree: usize, default_df: usize, drop: usize) -> Result<KnotVector> {
        if opts.df.is_some() && opts.knots.is_some() {
            return Err(Error::AmbiguousSplineOptions);
        }
        let auto = default_knots(&self.events, 0, &self.entries, &self.all)?;
        if let Some(k) = &opts.knots {
            return KnotVector::new(auto.lower, k.clone(), auto.upper);
        }
        let df = opts.df.unwrap_or(default_df);
        let n_internal = df.checked_sub(degree + drop).ok_or_else(|| {
            Error::InvalidModel(format!("df {df} is too small for degree {degree}"))
        })?;
        default_knots(&self.events, n_internal, &self.entries, &self.all)
    }
}

/// Model specification for a parsed formula on a dataset read with
/// [`FormulaAst::schema`].
pub fn build_spec(ast: &FormulaAst, data: &Dataset, baseline: &BaselineOptions) -> Result<ModelSpec> {
    let covs = ast.covariates();
    let src = KnotSource::new(data);
    let spline = |kind: BasisKind, default_df: usize, drop: usize| -> Result<SplineConfig> {
        let degree = baseline.spline.degree.unwrap_or(3);
        Ok(SplineConfig {
            degree,
            knots: src.knots(&baseline.spline, degree, default_df, drop)?,
            basis_kind: kind,
        })
    };
    let base = match baseline.family.as_str() {
        "exp" => BaselineSpec::Exponential,
        "weibull" => BaselineSpec::Weibull,
        "gompertz" => BaselineSpec::Gompertz,
        "exp-aft" => BaselineSpec::ExponentialAft,
        "weibull-aft" => BaselineSpec::WeibullAft,
        "ms" => BaselineSpec::MSpline {
            spline: spline(BasisKind::MSpline, 6, 1)?,
        },
        "bs" => BaselineSpec::BSpline {
            spline: spline(BasisKind::BSpline, 5, 0)?,
        },
        other => return Err(Error::UnsupportedFamily(other.to_string())),
    };
    let mut spec = ModelSpec::new(base, covs.clone());
    spec.formula = Some(format_formula(ast));
    for t in &ast.terms {
        match t {
            Term::Tve(tv) => {
                let degree = tv.degree.unwrap_or(3);
                let opts = SplineOptions {
                    degree: Some(degree),
                    df: tv.df,
                    knots: tv.knots.clone(),
                };
                // df 3: no internal knots when cubic, three when piecewise constant
                let knots = src.knots(&opts, degree, 3, 0)?;
                spec.tve.push(TveSpec {
                    covariate_index: covs.iter().position(|c| c == &tv.covariate).unwrap_or(0),
                    form: if degree == 0 {
                        TveForm::PiecewiseConstant
                    } else {
                        TveForm::BsplineSmooth
                    },
                    spline: SplineConfig {
                        degree,
                        knots,
                        basis_kind: BasisKind::BSpline,
                    },
                });
            }
            Term::Random(r) => {
                let f = data
                    .factor_index(&r.factor)
                    .ok_or_else(|| Error::MissingColumn(r.factor.clone()))?;
                let mut terms = Vec::new();
                if r.intercept {
                    terms.push(ReTerm::Intercept);
                }
                for s in &r.slopes {
                    let q = covs.iter().position(|c| c == s).ok_or_else(|| {
                        Error::InvalidModel(format!("random slope on `{s}` needs `{s}` as a fixed effect"))
                    })?;
                    terms.push(ReTerm::Slope(q));
                }
                if let Some(existing) = spec.random_effects.iter_mut().find(|e| e.factor == r.factor) {
                    for t in terms {
                        if !existing.terms.contains(&t) {
                            existing.terms.push(t);
                        }
                    }
                } else {
                    spec.random_effects.push(RandomEffectSpec {
                        factor: r.factor.clone(),
                        terms,
                        levels: data.factor_levels[f].clone(),
                    });
                }
            }
            Term::Covariate(_) => {}
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Canonical text of a formula; parsing it yields the same AST.
pub fn format_formula(ast: &FormulaAst) -> String {
    let r = &ast.response;
    let cols = match (&r.entry, &r.upper) {
        (None, None) => vec![r.time.clone(), r.status.clone()],
        (Some(e), Some(u)) => vec![e.clone(), r.time.clone(), u.clone(), r.status.clone()],
        _ => {
            let mut cols = Vec::new();
            if let Some(e) = &r.entry {
                cols.push(format!("entry = {e}"));
            }
            cols.push(format!("time = {}", r.time));
            if let Some(u) = &r.upper {
                cols.push(format!("upper = {u}"));
            }
            cols.push(format!("status = {}", r.status));
            cols
        }
    };
    let terms: Vec<String> = ast
        .terms
        .iter()
        .map(|t| match t {
            Term::Covariate(x) => x.clone(),
            Term::Tve(t) => {
                let mut s = format!("tve({}", t.covariate);
                if let Some(d) = t.degree {
                    s += &format!(", degree = {d}");
                }
                if let Some(d) = t.df {
                    s += &format!(", df = {d}");
                }
                if let Some(k) = &t.knots {
                    s += &format!(", knots = [{}]", k.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(", "));
                }
                s + ")"
            }
            Term::Random(r) => {
                let mut parts = vec![if r.intercept { "1" } else { "0" }.to_string()];
                parts.extend(r.slopes.iter().cloned());
                format!("({} | {})", parts.join(" + "), r.factor)
            }
        })
        .collect();
    let rhs = if terms.is_empty() { "1".to_string() } else { terms.join(" + ") };
    format!("surv({}) ~ {rhs}", cols.join(", "))
}
