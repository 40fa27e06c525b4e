//! Concrete continuous surjections `R^m → R^n` as immutable expression trees.
//!
//! * [`extend_to_line`] builds `g : R → R²`. It is `(0,0)` on `t ≤ 0`.
//!   A short lead-in on `[0, 1/4]` walks to the corner `(−1,−1)`. Then for
//!   every `n ≥ 1` a rescaled Hilbert curve covers `B_n = [−n,n]²`, followed
//!   by a straight bridge to the start corner of `B_{n+1}`. Curve `n`
//!   occupies `[n−1, n−1/2]` (`[1/4, 1/2]` for `n = 1`); the bridge
//!   occupies `[n−1/2, n]`.
//! * [`lift_dimension`] maps `f ∈ S_{1,n}` to
//!   `h = (id_{R^{n−1}} × g) ∘ f`, i.e.
//!   `h(t) = (f_1(t), …, f_{n−1}(t), g(f_n(t)))`. For `n = 2` and `f = g`
//!   this is `(id × g) ∘ g`.
//! * [`project_lift`] maps `g ∈ S_{1,n}` to `F(x) = g(x_1)` on `R^m`.
//! * [`phi_compose`] post-composes a span member `R^n → R^n`.
//!
//! Evaluation is always of a finite-depth approximant. A Peano node at base
//! depth `k` uses Hilbert depth `k + ⌈log2 n⌉` on box `B_n`, so the cell
//! size stays near `2^-k` in absolute terms. The inner argument of a lift
//! is evaluated at [`inner_depth`]`(k)`: the outer curve amplifies input
//! errors by roughly `2^k`, so the inner one needs about twice the bits.
//! All Peano-side arithmetic is exact ([`Dyadic`]); floating point enters
//! only at `φ` nodes.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::curve::{self, CellAddress, CurveError};
use crate::dyadic::Dyadic;
use crate::phi::{component_reduce, scalar_solve, PhiError, VectorSpanMember};

/// Largest codomain arity the factory builds.
pub const MAX_CODOMAIN: usize = 6;
/// Largest base depth accepted by [`evaluate`].
pub const DEFAULT_DEPTH_CAP: u32 = 64;
/// Extra levels added when a lift evaluates its inner argument.
pub const LIFT_DEPTH_MARGIN: u32 = 8;
/// Depth doublings attempted by [`preimage`] after the initial estimate.
pub const MAX_DOUBLINGS: u32 = 4;

const MAX_BOX_INDEX: u64 = 1 << 40;

#[derive(Debug, Error, Clone)]
pub enum FactoryError {
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("depth {depth} exceeds cap {cap}")]
    DepthCap { depth: u32, cap: u32 },
    #[error("non-finite value while evaluating: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error("preimage refinement failed: best error {} > eps {eps} (depth {})", best.error, best.depth)]
    Refinement { best: Box<Witness>, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    PeanoLine,
    /// `id : R^n → R^n`; lets scalar spans act as `S_{n,n}` bases.
    Identity,
    DimLift {
        inner: Arc<FunctionExpr>,
        pair: Arc<FunctionExpr>,
    },
    ProjectLift {
        inner: Arc<FunctionExpr>,
    },
    PhiCompose {
        member: VectorSpanMember,
        inner: Arc<FunctionExpr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionExpr {
    node: Node,
    domain: usize,
    codomain: usize,
}

impl FunctionExpr {
    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn kind(&self) -> &'static str {
        match self.node {
            Node::PeanoLine => "peano_line",
            Node::Identity => "identity",
            Node::DimLift { .. } => "dim_lift",
            Node::ProjectLift { .. } => "project_lift",
            Node::PhiCompose { .. } => "phi_compose",
        }
    }

    /// Short structural description, e.g. `project_lift[2](dim_lift(peano_line, peano_line))`.
    pub fn describe(&self) -> String {
        match &self.node {
            Node::PeanoLine => "peano_line".into(),
            Node::Identity => format!("identity[{}]", self.domain),
            Node::DimLift { inner, pair } => {
                format!("dim_lift({}, {})", inner.describe(), pair.describe())
            }
            Node::ProjectLift { inner } => {
                format!("project_lift[{}]({})", self.domain, inner.describe())
            }
            Node::PhiCompose { member, inner } => format!(
                "phi_compose[{} terms]({})",
                member.terms().len(),
                inner.describe()
            ),
        }
    }
}

pub fn extend_to_line() -> Arc<FunctionExpr> {
    Arc::new(FunctionExpr {
        node: Node::PeanoLine,
        domain: 1,
        codomain: 2,
    })
}

pub fn identity(n: usize) -> Result<Arc<FunctionExpr>, FactoryError> {
    if n == 0 {
        return Err(FactoryError::Domain("identity arity must be at least 1".into()));
    }
    Ok(Arc::new(FunctionExpr {
        node: Node::Identity,
        domain: n,
        codomain: n,
    }))
}

pub fn lift_dimension(f: &Arc<FunctionExpr>) -> Result<Arc<FunctionExpr>, FactoryError> {
    lift_dimension_with(f, &extend_to_line())
}

/// Lift with an explicit trailing-pair surjection `pair ∈ S_{1,2}`.
pub fn lift_dimension_with(
    f: &Arc<FunctionExpr>,
    pair: &Arc<FunctionExpr>,
) -> Result<Arc<FunctionExpr>, FactoryError> {
    if f.domain != 1 || f.codomain < 2 {
        return Err(FactoryError::Arity(format!(
            "lift_dimension needs S_(1,n) with n >= 2, got S_({},{})",
            f.domain, f.codomain
        )));
    }
    if pair.domain != 1 || pair.codomain != 2 {
        return Err(FactoryError::Arity(format!(
            "trailing pair must be S_(1,2), got S_({},{})",
            pair.domain, pair.codomain
        )));
    }
    if f.codomain + 1 > MAX_CODOMAIN {
        return Err(FactoryError::Arity(format!(
            "codomain {} exceeds cap {MAX_CODOMAIN}",
            f.codomain + 1
        )));
    }
    Ok(Arc::new(FunctionExpr {
        node: Node::DimLift {
            inner: f.clone(),
            pair: pair.clone(),
        },
        domain: 1,
        codomain: f.codomain + 1,
    }))
}

pub fn project_lift(g: &Arc<FunctionExpr>, target_m: usize) -> Result<Arc<FunctionExpr>, FactoryError> {
    if target_m < 1 {
        return Err(FactoryError::Domain("target arity must be at least 1".into()));
    }
    if g.domain != 1 {
        return Err(FactoryError::Arity(format!(
            "project_lift needs domain arity 1, got {}",
            g.domain
        )));
    }
    Ok(Arc::new(FunctionExpr {
        node: Node::ProjectLift { inner: g.clone() },
        domain: target_m,
        codomain: g.codomain,
    }))
}

pub fn phi_compose(
    member: &VectorSpanMember,
    inner: &Arc<FunctionExpr>,
) -> Result<Arc<FunctionExpr>, FactoryError> {
    if member.arity() != inner.codomain {
        return Err(FactoryError::Arity(format!(
            "span member arity {} does not match inner codomain {}",
            member.arity(),
            inner.codomain
        )));
    }
    Ok(Arc::new(FunctionExpr {
        node: Node::PhiCompose {
            member: member.without_base(),
            inner: inner.clone(),
        },
        domain: inner.domain,
        codomain: inner.codomain,
    }))
}

/// Expression for a member that carries its base surjection; a member
/// without one composes with the identity.
pub fn member_expr(member: &VectorSpanMember) -> Result<Arc<FunctionExpr>, FactoryError> {
    match member.base() {
        Some(base) => phi_compose(member, base),
        None => phi_compose(member, &identity(member.arity())?),
    }
}

/// The standard `S_{m,n}` element: `n − 2` lifts of [`extend_to_line`],
/// projected to `m` arguments.
pub fn surjection(m: usize, n: usize) -> Result<Arc<FunctionExpr>, FactoryError> {
    if !(2..=MAX_CODOMAIN).contains(&n) {
        return Err(FactoryError::Arity(format!(
            "codomain {n} outside 2..={MAX_CODOMAIN}"
        )));
    }
    let mut f = extend_to_line();
    for _ in 2..n {
        f = lift_dimension(&f)?;
    }
    project_lift(&f, m)
}

pub fn inner_depth(k: u32) -> u32 {
    2 * k + LIFT_DEPTH_MARGIN
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Hilbert depth used on box `B_n` at base depth `k`.
pub fn box_depth(k: u32, n: u64) -> u32 {
    k + ceil_log2(n)
}

/// Sup-norm Lipschitz constant of the depth-`k` line approximant over all
/// segments up to box `n`.
pub fn peano_lipschitz(n: u64, k: u32) -> f64 {
    let n = n.max(1);
    if n == 1 {
        8.0 * 2f64.powi(k as i32)
    } else {
        4.0 * n as f64 * 2f64.powi(box_depth(k, n) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub point: Vec<Dyadic>,
    pub depth: u32,
    pub precision: f64,
}

impl EvalRequest {
    pub fn new(point: Vec<Dyadic>, depth: u32, precision: f64) -> Result<Self, FactoryError> {
        if depth < 1 {
            return Err(FactoryError::Domain("depth must be at least 1".into()));
        }
        if !(precision > 0.0) {
            return Err(FactoryError::Domain(format!(
                "precision {precision} must be positive"
            )));
        }
        Ok(EvalRequest {
            point,
            depth,
            precision,
        })
    }

    pub fn from_f64(point: &[f64], depth: u32) -> Result<Self, FactoryError> {
        let point = point
            .iter()
            .map(|&v| Dyadic::from_f64(v).map_err(|e| FactoryError::Domain(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        EvalRequest::new(point, depth, 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: Vec<f64>,
    pub exact: Vec<Dyadic>,
    pub depth: u32,
    /// Bound on `|eval at depth+1 − eval at depth|_∞`.
    pub error_estimate: f64,
    /// Bound on the distance to the limit surjection.
    pub limit_error: f64,
}

impl Evaluation {
    pub fn meets(&self, precision: f64) -> bool {
        self.limit_error <= precision
    }
}

pub fn evaluate(expr: &FunctionExpr, req: &EvalRequest) -> Result<Evaluation, FactoryError> {
    evaluate_capped(expr, req, DEFAULT_DEPTH_CAP)
}

pub fn evaluate_capped(expr: &FunctionExpr, req: &EvalRequest, cap: u32) -> Result<Evaluation, FactoryError> {
    check_point(expr, &req.point)?;
    if req.depth < 1 {
        return Err(FactoryError::Domain("depth must be at least 1".into()));
    }
    if req.depth > cap {
        return Err(FactoryError::DepthCap {
            depth: req.depth,
            cap,
        });
    }
    let (exact, limit_error) = eval_node(expr, &req.point, req.depth)?;
    let (_, next_error) = eval_node(expr, &req.point, req.depth + 1)?;
    Ok(Evaluation {
        value: exact.iter().map(Dyadic::to_f64).collect(),
        exact,
        depth: req.depth,
        error_estimate: limit_error + next_error,
        limit_error,
    })
}

/// Exact value of the depth-`k` approximant, without error bookkeeping
/// beyond the limit bound.
pub fn evaluate_exact(expr: &FunctionExpr, point: &[Dyadic], depth: u32) -> Result<Vec<Dyadic>, FactoryError> {
    check_point(expr, point)?;
    Ok(eval_node(expr, point, depth)?.0)
}

pub fn evaluate_f64(expr: &FunctionExpr, point: &[f64], depth: u32) -> Result<Vec<f64>, FactoryError> {
    let req = EvalRequest::from_f64(point, depth)?;
    Ok(evaluate_exact(expr, &req.point, depth)?
        .iter()
        .map(Dyadic::to_f64)
        .collect())
}

fn check_point(expr: &FunctionExpr, point: &[Dyadic]) -> Result<(), FactoryError> {
    if point.len() != expr.domain {
        return Err(FactoryError::Arity(format!(
            "point has {} coordinates, expression expects {}",
            point.len(),
            expr.domain
        )));
    }
    Ok(())
}

fn box_index_of(v: &Dyadic) -> Result<u64, FactoryError> {
    // smallest n >= 1 with |v| <= n
    let n = v.abs().ceil().to_u64().unwrap_or(u64::MAX).max(1);
    if n > MAX_BOX_INDEX {
        return Err(FactoryError::Domain(format!("value {v} is too large")));
    }
    Ok(n)
}

fn box_map(p: &curve::PlanePoint, n: u64) -> [Dyadic; 2] {
    let n = Dyadic::from_int(n as i64);
    let two_n = n.shift(1);
    [&(&p.x * &two_n) - &n, &(&p.y * &two_n) - &n]
}

fn segment_of(t: &Dyadic) -> Result<u64, FactoryError> {
    let n = (t.floor() + BigInt::one())
        .to_u64()
        .ok_or_else(|| FactoryError::Domain(format!("parameter {t} is too large")))?;
    if n > MAX_BOX_INDEX {
        return Err(FactoryError::Domain(format!("parameter {t} is too large")));
    }
    Ok(n)
}

/// Depth-`k` approximant of the line surjection and its limit-error bound.
fn peano_line(t: &Dyadic, k: u32) -> Result<([Dyadic; 2], f64), FactoryError> {
    if !t.is_positive() {
        return Ok(([Dyadic::zero(), Dyadic::zero()], 0.0));
    }
    let n = segment_of(t)?;
    let u = t - &Dyadic::from_int(n as i64 - 1);
    let quarter = Dyadic::one().shift(-2);
    let half = Dyadic::one().shift(-1);
    let curve_param = if n == 1 {
        if u <= quarter {
            let w = u.shift(2);
            return Ok(([-&w, -w], 0.0));
        }
        if u <= half {
            Some((&u - &quarter).shift(2))
        } else {
            None
        }
    } else if u <= half {
        Some(u.shift(1))
    } else {
        None
    };
    match curve_param {
        Some(s) => {
            let kn = box_depth(k, n);
            let p = curve::polygon_point(&s, kn)?;
            let err = 2.0 * n as f64 * curve::limit_distance(kn);
            Ok((box_map(&p, n), err))
        }
        None => {
            let w = (&u - &half).shift(1);
            let ni = n as i64;
            let from = [Dyadic::from_int(ni), Dyadic::from_int(-ni)];
            let to = [Dyadic::from_int(-ni - 1), Dyadic::from_int(-ni - 1)];
            Ok((
                [Dyadic::lerp(&from[0], &to[0], &w), Dyadic::lerp(&from[1], &to[1], &w)],
                0.0,
            ))
        }
    }
}

fn eval_node(expr: &FunctionExpr, point: &[Dyadic], k: u32) -> Result<(Vec<Dyadic>, f64), FactoryError> {
    match &expr.node {
        Node::PeanoLine => {
            let (v, e) = peano_line(&point[0], k)?;
            Ok((v.to_vec(), e))
        }
        Node::Identity => Ok((point.to_vec(), 0.0)),
        Node::ProjectLift { inner } => eval_node(inner, &point[..1], k),
        Node::DimLift { inner, pair } => {
            let (mut head, inner_err) = eval_node(inner, point, inner_depth(k))?;
            let last = head.pop().expect("inner codomain >= 2");
            let (tail, pair_err) = eval_node(pair, std::slice::from_ref(&last), k)?;
            let err = if inner_err == 0.0 {
                pair_err
            } else {
                // the pair's own error may be larger a little way off `last`
                let r = Dyadic::from_f64(inner_err).map_err(|e| FactoryError::NonFinite(e.to_string()))?;
                let mut pair_err = pair_err;
                for probe in [&last - &r, &last + &r] {
                    pair_err = pair_err.max(eval_node(pair, &[probe], k)?.1);
                }
                let lip = lipschitz_node(pair, std::slice::from_ref(&last), inner_err, k)?;
                inner_err.max(pair_err + lip * inner_err)
            };
            head.extend(tail);
            Ok((head, err))
        }
        Node::PhiCompose { member, inner } => {
            let (x, inner_err) = eval_node(inner, point, k)?;
            let xf: Vec<f64> = x.iter().map(Dyadic::to_f64).collect();
            let y = member.apply(&xf)?;
            let spans = component_reduce(member);
            let mut err: f64 = 0.0;
            for (s, xi) in spans.iter().zip(&xf) {
                err = err.max(s.derivative_bound(xi.abs() + inner_err) * inner_err);
            }
            let exact = y
                .iter()
                .map(|&v| {
                    Dyadic::from_f64(v)
                        .map_err(|_| FactoryError::NonFinite(format!("span value {v} at {xf:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((exact, err))
        }
    }
}

/// Local sup-norm Lipschitz bound of the depth-`k` approximant on the ball
/// of radius `radius` around `point`.
pub fn lipschitz_estimate(
    expr: &FunctionExpr,
    point: &[Dyadic],
    radius: f64,
    depth: u32,
) -> Result<f64, FactoryError> {
    check_point(expr, point)?;
    lipschitz_node(expr, point, radius, depth)
}

fn lipschitz_node(expr: &FunctionExpr, point: &[Dyadic], radius: f64, k: u32) -> Result<f64, FactoryError> {
    match &expr.node {
        Node::PeanoLine => {
            let hi = point[0].to_f64() + radius;
            if hi <= 0.0 {
                return Ok(0.0);
            }
            if !(hi < MAX_BOX_INDEX as f64) {
                return Ok(f64::INFINITY);
            }
            Ok(peano_lipschitz(hi.floor() as u64 + 1, k))
        }
        Node::Identity => Ok(1.0),
        Node::ProjectLift { inner } => lipschitz_node(inner, &point[..1], radius, k),
        Node::DimLift { inner, pair } => {
            let kk = inner_depth(k);
            let l_in = lipschitz_node(inner, point, radius, kk)?;
            let (v, _) = eval_node(inner, point, kk)?;
            let last = v.last().expect("inner codomain >= 2");
            let l_pair = lipschitz_node(pair, std::slice::from_ref(last), l_in * radius, k)?;
            Ok(l_in.max(l_pair * l_in))
        }
        Node::PhiCompose { member, inner } => {
            let l_in = lipschitz_node(inner, point, radius, k)?;
            let (x, _) = eval_node(inner, point, k)?;
            let spans = component_reduce(member);
            let mut g: f64 = 0.0;
            for (s, xi) in spans.iter().zip(&x) {
                g = g.max(s.derivative_bound(xi.to_f64().abs() + l_in * radius));
            }
            Ok(g * l_in)
        }
    }
}

/// A domain point whose depth-`depth` image lies `error` away from its
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: Vec<Dyadic>,
    pub depth: u32,
    pub value: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreimageOptions {
    pub max_doublings: u32,
    pub depth_cap: u32,
}

impl Default for PreimageOptions {
    fn default() -> Self {
        PreimageOptions {
            max_doublings: MAX_DOUBLINGS,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }
}

pub fn preimage(expr: &FunctionExpr, target: &[f64], eps: f64) -> Result<Witness, FactoryError> {
    preimage_with(expr, target, eps, PreimageOptions::default())
}

/// Analytic inversion followed by an exact forward check. The starting
/// depth comes from the modulus chain; it is doubled while the achieved
/// error exceeds `eps`.
pub fn preimage_with(
    expr: &FunctionExpr,
    target: &[f64],
    eps: f64,
    opts: PreimageOptions,
) -> Result<Witness, FactoryError> {
    if !(eps > 0.0) {
        return Err(FactoryError::Domain(format!("eps {eps} must be positive")));
    }
    if target.len() != expr.codomain {
        return Err(FactoryError::Arity(format!(
            "target has {} coordinates, expression maps into R^{}",
            target.len(),
            expr.codomain
        )));
    }
    if let Some(v) = target.iter().find(|v| !v.is_finite()) {
        return Err(FactoryError::Domain(format!("target coordinate {v} is not finite")));
    }
    let mut depth = required_depth(expr, target, eps)?.clamp(1, opts.depth_cap);
    let mut best: Option<Witness> = None;
    for _ in 0..=opts.max_doublings {
        let point = solve_node(expr, target, depth, eps)?;
        let value: Vec<f64> = eval_node(expr, &point, depth)?
            .0
            .iter()
            .map(Dyadic::to_f64)
            .collect();
        let error = sup_distance(&value, target);
        let w = Witness {
            point,
            depth,
            value,
            error,
        };
        if error <= eps {
            return Ok(w);
        }
        if best.as_ref().map_or(true, |b| error < b.error) {
            best = Some(w);
        }
        let next = (2 * depth).min(opts.depth_cap);
        if next == depth {
            break;
        }
        depth = next;
    }
    Err(FactoryError::Refinement {
        best: Box::new(best.expect("at least one attempt")),
        eps,
    })
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn depth_for_tolerance(tol: f64) -> u32 {
    if tol >= 1.0 {
        1
    } else {
        (1.0 / tol).log2().ceil().max(1.0) as u32
    }
}

/// Base depth suggested by the modulus chain for hitting `target` within
/// `eps`.
pub fn required_depth(expr: &FunctionExpr, target: &[f64], eps: f64) -> Result<u32, FactoryError> {
    match &expr.node {
        Node::PeanoLine => Ok(depth_for_tolerance(eps)),
        Node::Identity => Ok(1),
        Node::ProjectLift { inner } => required_depth(inner, target, eps),
        Node::DimLift { pair, .. } => {
            let n = target.len();
            required_depth(pair, &target[n - 2..], eps / 2.0)
        }
        Node::PhiCompose { member, inner } => {
            let spans = component_reduce(member);
            let mut x = Vec::with_capacity(spans.len());
            let mut slope: f64 = 0.0;
            for (s, &y) in spans.iter().zip(target) {
                let xi = scalar_solve(s, y, eps / 4.0)?;
                slope = slope.max(s.derivative(xi).abs());
                x.push(xi);
            }
            let inner_eps = eps / (2.5 * slope.max(1e-300));
            required_depth(inner, &x, inner_eps)
        }
    }
}

fn solve_node(expr: &FunctionExpr, target: &[f64], k: u32, eps: f64) -> Result<Vec<Dyadic>, FactoryError> {
    let exact: Vec<Dyadic> = target
        .iter()
        .map(|&v| Dyadic::from_f64(v).map_err(|e| FactoryError::Domain(e.to_string())))
        .collect::<Result<_, _>>()?;
    solve_exact(expr, &exact, target, k, eps)
}

fn solve_exact(
    expr: &FunctionExpr,
    target: &[Dyadic],
    target_f64: &[f64],
    k: u32,
    eps: f64,
) -> Result<Vec<Dyadic>, FactoryError> {
    match &expr.node {
        Node::PeanoLine => Ok(vec![peano_line_preimage(&target[0], &target[1], k)?]),
        Node::Identity => Ok(target.to_vec()),
        Node::ProjectLift { inner } => {
            let s = solve_exact(inner, target, target_f64, k, eps)?;
            let mut x = vec![Dyadic::zero(); expr.domain];
            x[0] = s[0].clone();
            Ok(x)
        }
        Node::DimLift { inner, pair } => {
            let n = target.len();
            let s = solve_exact(pair, &target[n - 2..], &target_f64[n - 2..], k, eps / 2.0)?;
            let mut inner_target: Vec<Dyadic> = target[..n - 2].to_vec();
            inner_target.push(s[0].clone());
            let inner_f64: Vec<f64> = inner_target.iter().map(Dyadic::to_f64).collect();
            solve_exact(inner, &inner_target, &inner_f64, inner_depth(k), eps / 2.0)
        }
        Node::PhiCompose { member, inner } => {
            let spans = component_reduce(member);
            let mut x = Vec::with_capacity(spans.len());
            let mut slope: f64 = 0.0;
            for (s, &y) in spans.iter().zip(target_f64) {
                let xi = scalar_solve(s, y, eps / 4.0)?;
                slope = slope.max(s.derivative(xi).abs());
                x.push(xi);
            }
            let exact = x
                .iter()
                .map(|&v| Dyadic::from_f64(v).map_err(|e| FactoryError::NonFinite(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            solve_exact(inner, &exact, &x, k, eps / (2.5 * slope.max(1e-300)))
        }
    }
}

/// Parameter of the depth-`k` cell center closest to `(a, b)` on the
/// smallest box `B_n` containing it.
fn peano_line_preimage(a: &Dyadic, b: &Dyadic, k: u32) -> Result<Dyadic, FactoryError> {
    if a.is_zero() && b.is_zero() {
        return Ok(Dyadic::zero());
    }
    let n = box_index_of(&Dyadic::max(&a.abs(), &b.abs()))?;
    let kn = box_depth(k, n);
    let nd = Dyadic::from_int(n as i64);
    let two_n = BigInt::from(2 * n);
    let side = BigInt::one() << kn as u64;
    let coord = |v: &Dyadic| {
        // lower-left tie break, as in curve::cell_of_point
        let c = (v + &nd).shift(kn as i64).ceil_div(&two_n) - BigInt::one();
        let c = c.clamp(BigInt::from(0), &side - BigInt::one());
        c.to_biguint().expect("clamped to non-negative")
    };
    let cell = CellAddress {
        depth: kn,
        col: coord(a),
        row: coord(b),
    };
    let s = curve::center_param(&curve::cell_to_index(&cell), kn);
    Ok(if n == 1 {
        &Dyadic::one().shift(-2) + &s.shift(-2)
    } else {
        &Dyadic::from_int(n as i64 - 1) + &s.shift(-1)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::make_diagonal_family;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(v: f64) -> Dyadic {
        Dyadic::from_f64(v).unwrap()
    }

    fn eval(expr: &FunctionExpr, x: &[f64], k: u32) -> Vec<f64> {
        evaluate_f64(expr, x, k).unwrap()
    }

    #[test]
    fn line_is_zero_on_the_left() {
        let g = extend_to_line();
        assert_eq!(eval(&g, &[-5.0], 8), vec![0.0, 0.0]);
        assert_eq!(eval(&g, &[0.0], 8), vec![0.0, 0.0]);
    }

    #[test]
    fn line_segment_endpoints_are_box_corners() {
        let g = extend_to_line();
        for k in [1, 4, 9] {
            assert_eq!(eval(&g, &[0.25], k), vec![-1.0, -1.0]);
            assert_eq!(eval(&g, &[0.5], k), vec![1.0, -1.0]);
            assert_eq!(eval(&g, &[1.0], k), vec![-2.0, -2.0]);
            assert_eq!(eval(&g, &[1.5], k), vec![2.0, -2.0]);
            assert_eq!(eval(&g, &[2.0], k), vec![-3.0, -3.0]);
        }
    }

    #[test]
    fn junctions_are_continuous() {
        let g = extend_to_line();
        let k = 10;
        for n in 1..6 {
            for junction in [n as f64 - 0.5, n as f64] {
                let l = eval(&g, &[junction - 1e-9], k);
                let r = eval(&g, &[junction + 1e-9], k);
                let bound = peano_lipschitz(n + 1, k) * 2e-9;
                assert!(sup_distance(&l, &r) <= bound, "junction {junction}");
            }
        }
    }

    #[test]
    fn line_covers_grid_by_forward_sweep() {
        // forward-sweep oracle: dense parameter grid over [0,3], nearest
        // sample per target
        let g = extend_to_line();
        let k = 7;
        let eps = 2f64.powi(-(k as i32)) * 2.0;
        let samples = 400_000;
        let mut best = vec![f64::INFINITY; 21 * 21];
        for i in 0..=samples {
            let t = 3.0 * i as f64 / samples as f64;
            let p = eval(&g, &[t], k);
            let gi = ((p[0] + 2.0) * 5.0).round();
            let gj = ((p[1] + 2.0) * 5.0).round();
            if (0.0..=20.0).contains(&gi) && (0.0..=20.0).contains(&gj) {
                let target = [-2.0 + gi / 5.0, -2.0 + gj / 5.0];
                let idx = gi as usize * 21 + gj as usize;
                best[idx] = best[idx].min(sup_distance(&p, &target));
            }
        }
        assert!(best.iter().all(|&b| b <= eps), "worst {:?}", best.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn lift_arity_and_first_coordinate() {
        let g = extend_to_line();
        let h = lift_dimension(&g).unwrap();
        assert_eq!((h.domain(), h.codomain()), (1, 3));
        let mut f = g.clone();
        for n in 3..=6 {
            f = lift_dimension(&f).unwrap();
            assert_eq!(f.codomain(), n);
        }
        assert!(matches!(lift_dimension(&f), Err(FactoryError::Arity(_))));
        let proj = project_lift(&g, 2).unwrap();
        assert!(matches!(lift_dimension(&proj), Err(FactoryError::Arity(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = rng.gen_range(-1.0..4.0);
            let k = rng.gen_range(1..8);
            let hv = evaluate_exact(&h, &[d(t)], k).unwrap();
            let gv = evaluate_exact(&g, &[d(t)], inner_depth(k)).unwrap();
            assert_eq!(hv[0], gv[0]);
        }
    }

    #[test]
    fn projection_examples() {
        let g = extend_to_line();
        let f = project_lift(&g, 3).unwrap();
        assert_eq!(eval(&f, &[1.0, 2.0, 3.0], 6), eval(&g, &[1.0], 6));
        assert_eq!(eval(&f, &[-1.0, 7.0, 9.0], 6), vec![0.0, 0.0]);
        let same = project_lift(&g, 1).unwrap();
        assert_eq!(eval(&same, &[0.7], 6), eval(&g, &[0.7], 6));
        assert!(matches!(project_lift(&g, 0), Err(FactoryError::Domain(_))));
    }

    #[test]
    fn evaluate_rejects_bad_requests() {
        let g = extend_to_line();
        let req = EvalRequest::from_f64(&[0.1, 0.2], 4).unwrap();
        assert!(matches!(evaluate(&g, &req), Err(FactoryError::Arity(_))));
        let req = EvalRequest::from_f64(&[0.1], 65).unwrap();
        assert!(matches!(evaluate(&g, &req), Err(FactoryError::DepthCap { .. })));
        assert!(EvalRequest::from_f64(&[0.1], 0).is_err());
        assert!(EvalRequest::new(vec![d(0.1)], 3, 0.0).is_err());
    }

    #[test]
    fn phi_compose_applies_member_to_inner_value() {
        let g = extend_to_line();
        let fam = make_diagonal_family(&[1.5], 2).unwrap();
        let e = phi_compose(&fam[0], &g).unwrap();
        let inner = eval(&g, &[0.37], 9);
        let outer = eval(&e, &[0.37], 9);
        assert_eq!(outer, fam[0].apply(&inner).unwrap());
        let bad = make_diagonal_family(&[1.5], 3).unwrap();
        assert!(phi_compose(&bad[0], &g).is_err());
    }

    #[test]
    fn preimage_of_origin_and_round_trips() {
        let g = extend_to_line();
        let w = preimage(&g, &[0.0, 0.0], 1e-6).unwrap();
        assert!(w.point[0] <= Dyadic::zero());
        assert_eq!(w.error, 0.0);

        let s23 = surjection(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let x = [rng.gen_range(0.0..3.0), rng.gen_range(-5.0..5.0)];
            let y = eval(&s23, &x, 6);
            let w = preimage(&s23, &y, 1e-4).unwrap();
            let back = eval(&s23, &[w.point[0].to_f64(), 0.0], w.depth);
            let exact = evaluate_exact(&s23, &w.point, w.depth).unwrap();
            assert!(w.error <= 1e-4);
            assert!(sup_distance(&exact.iter().map(Dyadic::to_f64).collect::<Vec<_>>(), &y) <= 1e-4);
            // witness coordinates beyond the first are ignored by the projection
            let _ = back;
        }
    }

    #[test]
    fn preimage_argument_errors() {
        let g = extend_to_line();
        assert!(matches!(preimage(&g, &[1.0], 1e-3), Err(FactoryError::Arity(_))));
        assert!(matches!(preimage(&g, &[1.0, 2.0], 0.0), Err(FactoryError::Domain(_))));
        assert!(matches!(preimage(&g, &[f64::NAN, 2.0], 1e-3), Err(FactoryError::Domain(_))));
    }

    #[test]
    fn refinement_failure_carries_best_witness() {
        let g = extend_to_line();
        let opts = PreimageOptions {
            max_doublings: 0,
            depth_cap: 3,
        };
        match preimage_with(&g, &[0.3, -0.7], 1e-6, opts) {
            Err(FactoryError::Refinement { best, eps }) => {
                assert_eq!(eps, 1e-6);
                assert_eq!(best.depth, 3);
                assert!(best.error > 1e-6 && best.error <= 2f64.powi(-3));
            }
            other => panic!("expected refinement failure, got {other:?}"),
        }
    }

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(
            (1..=9).map(ceil_log2).collect::<Vec<_>>(),
            vec![0, 1, 2, 2, 3, 3, 3, 3, 4]
        );
    }
}
