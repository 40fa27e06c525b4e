//! The scalar family `φ_r(t) = e^{rt} − e^{−rt}` (r > 0), finite linear
//! combinations of its members, and the coordinate-wise vector version.
//!
//! A nonzero combination `Σ αᵢ φ_{rᵢ}` with exponents sorted descending is
//! dominated by its leading term at both ends, so it tends to
//! `sign(α₁)·∞` at `+∞` and to `−sign(α₁)·∞` at `−∞`. The solver below
//! turns that into a bracket and bisects.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::factory::FunctionExpr;

/// Bracket half-width limit for [`scalar_solve`].
pub const BRACKET_CAP: f64 = 1152921504606846976.0; // 2^60

const MAX_BISECTIONS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("the zero span has no solution for target {0}")]
    NoSolution(f64),
    #[error("no bracket for target {target} within |t| <= {cap}")]
    BracketNotFound { target: f64, cap: f64 },
    #[error("bisection stalled at t = {best} with residual {residual} > tolerance {tol}")]
    ToleranceUnreachable { best: f64, residual: f64, tol: f64 },
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
}

fn check_exponent(r: f64) -> Result<(), PhiError> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(PhiError::Domain(format!("exponent {r} must be a positive real")))
    }
}

/// `e^{rt} − e^{−rt}`, evaluated as `2·sinh(rt)` to avoid cancellation
/// near zero. Overflows to `±∞`.
pub fn phi_eval(r: f64, t: f64) -> Result<f64, PhiError> {
    check_exponent(r)?;
    Ok(2.0 * (r * t).sinh())
}

/// Unique `t` with `φ_r(t) = y`: `arsinh(y/2) / r`.
pub fn phi_inverse(r: f64, y: f64) -> Result<f64, PhiError> {
    check_exponent(r)?;
    Ok((y / 2.0).asinh() / r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

/// `Σ αᵢ φ_{rᵢ}` with exponents strictly decreasing and no zero
/// coefficients. The empty span is the zero function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarSpan {
    terms: Vec<SpanTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infinity {
    Positive,
    Negative,
}

impl Infinity {
    fn from_sign(s: f64) -> Infinity {
        if s > 0.0 {
            Infinity::Positive
        } else {
            Infinity::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Infinity::Positive => 1.0,
            Infinity::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Asymptotics {
    Diverges {
        at_plus_infinity: Infinity,
        at_minus_infinity: Infinity,
    },
    ZeroFunction,
}

pub fn make_scalar_span(pairs: &[(f64, f64)]) -> Result<ScalarSpan, PhiError> {
    for &(a, r) in pairs {
        check_exponent(r)?;
        if !a.is_finite() {
            return Err(PhiError::Domain(format!("coefficient {a} is not finite")));
        }
    }
    let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
    sorted.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut terms: Vec<SpanTerm> = Vec::with_capacity(sorted.len());
    for (a, r) in sorted {
        match terms.last_mut() {
            // exact equality of stored exponents decides merging
            Some(last) if last.exponent == r => last.coefficient += a,
            _ => terms.push(SpanTerm {
                coefficient: a,
                exponent: r,
            }),
        }
    }
    terms.retain(|t| t.coefficient != 0.0);
    Ok(ScalarSpan { terms })
}

impl ScalarSpan {
    pub fn zero() -> Self {
        ScalarSpan { terms: Vec::new() }
    }

    pub fn basis(r: f64) -> Result<Self, PhiError> {
        make_scalar_span(&[(1.0, r)])
    }

    pub fn terms(&self) -> &[SpanTerm] {
        &self.terms
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.terms.iter().map(|t| (t.coefficient, t.exponent)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading(&self) -> Option<SpanTerm> {
        self.terms.first().copied()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coefficient * 2.0 * (term.exponent * t).sinh())
            .sum()
    }

    /// Like [`ScalarSpan::eval`], but overflowed sums (`∞ − ∞`) resolve to
    /// the infinity the leading term dictates.
    pub fn eval_signed(&self, t: f64) -> f64 {
        let v = self.eval(t);
        if v.is_nan() {
            match self.leading() {
                Some(lead) => lead.coefficient.signum() * t.signum() * f64::INFINITY,
                None => 0.0,
            }
        } else {
            v
        }
    }

    /// Upper bound on `|s'(x)|` over `|x| <= radius`.
    pub fn derivative_bound(&self, radius: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient.abs() * t.exponent * 2.0 * (t.exponent * radius).cosh())
            .sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coefficient * term.exponent * 2.0 * (term.exponent * t).cosh())
            .sum()
    }

    pub fn scale(&self, a: f64) -> ScalarSpan {
        make_scalar_span(
            &self
                .terms
                .iter()
                .map(|t| (a * t.coefficient, t.exponent))
                .collect::<Vec<_>>(),
        )
        .expect("exponents already validated")
    }

    pub fn add(&self, other: &ScalarSpan) -> ScalarSpan {
        let mut pairs = self.pairs();
        pairs.extend(other.pairs());
        make_scalar_span(&pairs).expect("exponents already validated")
    }
}

impl fmt::Display for ScalarSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| format!("{}·φ_{}", t.coefficient, t.exponent))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn classify_asymptotics(s: &ScalarSpan) -> Asymptotics {
    match s.leading() {
        None => Asymptotics::ZeroFunction,
        Some(lead) => Asymptotics::Diverges {
            at_plus_infinity: Infinity::from_sign(lead.coefficient),
            at_minus_infinity: Infinity::from_sign(-lead.coefficient),
        },
    }
}

/// Some `t` with `|s(t) − y| <= tol`.
///
/// Intervals `[0,1], [1,2], [2,4], …` and their mirror images are scanned
/// outward for a sign change of `s − y`, so roots close to the origin win;
/// the asymptotic classification guarantees a change before `|t|` reaches
/// [`BRACKET_CAP`].
pub fn scalar_solve(s: &ScalarSpan, y: f64, tol: f64) -> Result<f64, PhiError> {
    if !(tol > 0.0) {
        return Err(PhiError::Domain(format!("tolerance {tol} must be positive")));
    }
    if !y.is_finite() {
        return Err(PhiError::Domain(format!("target {y} is not finite")));
    }
    if s.is_zero() {
        return Err(PhiError::NoSolution(y));
    }
    let g = |t: f64| s.eval_signed(t) - y;
    let g0 = g(0.0);
    if g0.abs() <= tol {
        return Ok(0.0);
    }
    let (mut inner, mut outer) = (0.0f64, 1.0f64);
    let (mut g_right, mut g_left) = (g0, g0);
    while outer <= BRACKET_CAP {
        let gr = g(outer);
        if gr.abs() <= tol {
            return Ok(outer);
        }
        if gr.signum() != g_right.signum() {
            return bisect(&g, inner, outer, g_right, tol);
        }
        let gl = g(-outer);
        if gl.abs() <= tol {
            return Ok(-outer);
        }
        if gl.signum() != g_left.signum() {
            return bisect(&g, -outer, -inner, gl, tol);
        }
        g_right = gr;
        g_left = gl;
        inner = outer;
        outer *= 2.0;
    }
    Err(PhiError::BracketNotFound {
        target: y,
        cap: BRACKET_CAP,
    })
}

fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, tol: f64) -> Result<f64, PhiError> {
    let mut gb = g(b);
    for _ in 0..MAX_BISECTIONS {
        let m = a + (b - a) / 2.0;
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm.abs() <= tol {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    let (best, residual) = if ga.abs() <= gb.abs() { (a, ga.abs()) } else { (b, gb.abs()) };
    if residual <= tol {
        Ok(best)
    } else {
        Err(PhiError::ToleranceUnreachable { best, residual, tol })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorTerm {
    pub coefficient: f64,
    pub exponents: Vec<f64>,
}

/// `Σ λᵢ φ_{rᵢ}` with `φ_r = (φ_{r_1}, …, φ_{r_n})` acting coordinate-wise,
/// optionally pre-composed with a base surjection `R^m → R^n`.
#[derive(Debug, Clone)]
pub struct VectorSpanMember {
    terms: Vec<VectorTerm>,
    arity: usize,
    base: Option<Arc<FunctionExpr>>,
}

impl VectorSpanMember {
    pub fn new(arity: usize, terms: Vec<VectorTerm>) -> Result<Self, PhiError> {
        if arity == 0 {
            return Err(PhiError::Domain("codomain arity must be at least 1".into()));
        }
        for t in &terms {
            if t.exponents.len() != arity {
                return Err(PhiError::Arity {
                    expected: arity,
                    got: t.exponents.len(),
                });
            }
            if !t.coefficient.is_finite() {
                return Err(PhiError::Domain(format!(
                    "coefficient {} is not finite",
                    t.coefficient
                )));
            }
            for &r in &t.exponents {
                check_exponent(r)?;
            }
        }
        Ok(VectorSpanMember {
            terms,
            arity,
            base: None,
        })
    }

    /// The basis element `φ_r` itself.
    pub fn basis(exponents: Vec<f64>) -> Result<Self, PhiError> {
        let arity = exponents.len();
        VectorSpanMember::new(
            arity,
            vec![VectorTerm {
                coefficient: 1.0,
                exponents,
            }],
        )
    }

    pub fn zero(arity: usize) -> Self {
        VectorSpanMember {
            terms: Vec::new(),
            arity,
            base: None,
        }
    }

    pub fn terms(&self) -> &[VectorTerm] {
        &self.terms
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn base(&self) -> Option<&Arc<FunctionExpr>> {
        self.base.as_ref()
    }

    /// Attach a base surjection; the member then represents `(Σ λᵢ φ_{rᵢ}) ∘ f`.
    pub fn with_base(mut self, base: Arc<FunctionExpr>) -> Result<Self, PhiError> {
        if base.codomain() != self.arity {
            return Err(PhiError::Arity {
                expected: self.arity,
                got: base.codomain(),
            });
        }
        self.base = Some(base);
        Ok(self)
    }

    pub fn without_base(&self) -> Self {
        VectorSpanMember {
            terms: self.terms.clone(),
            arity: self.arity,
            base: None,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        VectorSpanMember {
            terms: self
                .terms
                .iter()
                .map(|t| VectorTerm {
                    coefficient: a * t.coefficient,
                    exponents: t.exponents.clone(),
                })
                .collect(),
            arity: self.arity,
            base: self.base.clone(),
        }
    }

    /// `Σ cᵢ · membersᵢ`; all members must share arity. The base (if any)
    /// of the first member is kept.
    pub fn linear_combination(parts: &[(f64, &VectorSpanMember)]) -> Result<Self, PhiError> {
        let arity = parts
            .first()
            .map(|(_, m)| m.arity)
            .ok_or_else(|| PhiError::Domain("empty combination".into()))?;
        let mut terms = Vec::new();
        for (c, m) in parts {
            if m.arity != arity {
                return Err(PhiError::Arity {
                    expected: arity,
                    got: m.arity,
                });
            }
            terms.extend(m.scale(*c).terms);
        }
        Ok(VectorSpanMember {
            terms,
            arity,
            base: parts[0].1.base.clone(),
        })
    }

    pub fn is_zero(&self) -> bool {
        component_reduce(self).iter().all(ScalarSpan::is_zero)
    }

    /// Apply the span map `R^n → R^n` (ignores the base).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, PhiError> {
        if x.len() != self.arity {
            return Err(PhiError::Arity {
                expected: self.arity,
                got: x.len(),
            });
        }
        Ok(component_reduce(self)
            .iter()
            .zip(x)
            .map(|(s, &xi)| s.eval(xi))
            .collect())
    }
}

impl PartialEq for VectorSpanMember {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity
            && self.terms == other.terms
            && match (&self.base, &other.base) {
                (None, None) => true,
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
    }
}

/// Coordinate `j` of `Σ λᵢ φ_{rᵢ}` is the scalar span `Σ λᵢ φ_{r_{i,j}}`.
pub fn component_reduce(v: &VectorSpanMember) -> Vec<ScalarSpan> {
    (0..v.arity)
        .map(|j| {
            let pairs: Vec<(f64, f64)> = v
                .terms
                .iter()
                .map(|t| (t.coefficient, t.exponents[j]))
                .collect();
            make_scalar_span(&pairs).expect("exponents validated at construction")
        })
        .collect()
}

/// Basis elements `φ_{(r,…,r)}` for each given exponent.
pub fn make_diagonal_family(exponents: &[f64], n: usize) -> Result<Vec<VectorSpanMember>, PhiError> {
    if n == 0 {
        return Err(PhiError::Domain("arity must be at least 1".into()));
    }
    let mut seen: Vec<f64> = Vec::with_capacity(exponents.len());
    for &r in exponents {
        check_exponent(r)?;
        if seen.iter().any(|&s| s.total_cmp(&r) == Ordering::Equal) {
            return Err(PhiError::Domain(format!("duplicate exponent {r}")));
        }
        seen.push(r);
    }
    exponents
        .iter()
        .map(|&r| VectorSpanMember::basis(vec![r; n]))
        .collect()
}
