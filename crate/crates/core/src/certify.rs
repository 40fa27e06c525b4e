//! Finite, re-checkable evidence: ε-coverage of grid boxes, degeneracy
//! detection for span members, and numerical-rank reports.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::factory::{self, FactoryError, FunctionExpr, Node, PreimageOptions};
use crate::phi::{component_reduce, ScalarSpan, VectorSpanMember};
use crate::rank::{numerical_rank, RankError, DEFAULT_RANK_TOL};

pub const DEFAULT_TARGET_BUDGET: u64 = 100_000;
/// Depth used when sampling family members for rank reports.
pub const DEFAULT_SAMPLE_DEPTH: u32 = 12;

#[derive(Debug, Error, Clone)]
pub enum CertifyError {
    #[error("invalid box: {0}")]
    Box(String),
    #[error("{targets} targets exceed budget {budget}")]
    Budget { targets: u128, budget: u64 },
    #[error("{0}; see detect_degenerate")]
    Degenerate(DegeneracyWitness),
    #[error("zero span member cannot be surjective")]
    ZeroMember,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("evaluation failed at sample point {index} ({point:?}): {source}")]
    Evaluation {
        index: usize,
        point: Vec<f64>,
        source: FactoryError,
    },
    #[error(transparent)]
    Factory(#[from] FactoryError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// A coordinate (1-based) whose reduced scalar span cancels to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegeneracyWitness {
    pub coordinate: usize,
}

impl std::fmt::Display for DegeneracyWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "degenerate member: coordinate {} reduces to the zero span", self.coordinate)
    }
}

pub fn detect_degenerate(v: &VectorSpanMember) -> Option<DegeneracyWitness> {
    component_reduce(v)
        .iter()
        .position(ScalarSpan::is_zero)
        .map(|j| DegeneracyWitness { coordinate: j + 1 })
}

/// First degenerate span member anywhere in the tree.
pub fn find_degenerate(expr: &FunctionExpr) -> Option<DegeneracyWitness> {
    match expr.node() {
        Node::PeanoLine | Node::Identity => None,
        Node::ProjectLift { inner } => find_degenerate(inner),
        Node::DimLift { inner, pair } => find_degenerate(inner).or_else(|| find_degenerate(pair)),
        Node::PhiCompose { member, inner } => detect_degenerate(member).or_else(|| find_degenerate(inner)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    bounds: Vec<(f64, f64)>,
    grid: usize,
}

impl BoxSpec {
    pub fn new(bounds: Vec<(f64, f64)>, grid: usize) -> Result<Self, CertifyError> {
        if bounds.is_empty() {
            return Err(CertifyError::Box("box needs at least one coordinate".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CertifyError::Box(format!(
                    "coordinate {}: need finite low < high, got ({lo}, {hi})",
                    i + 1
                )));
            }
        }
        if grid < 2 {
            return Err(CertifyError::Box(format!("grid {grid} must be at least 2")));
        }
        Ok(BoxSpec { bounds, grid })
    }

    pub fn cube(dim: usize, low: f64, high: f64, grid: usize) -> Result<Self, CertifyError> {
        BoxSpec::new(vec![(low, high); dim], grid)
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn target_count(&self) -> u128 {
        (self.grid as u128).saturating_pow(self.bounds.len() as u32)
    }

    pub fn check_budget(&self, budget: u64) -> Result<(), CertifyError> {
        let targets = self.target_count();
        if targets > budget as u128 {
            return Err(CertifyError::Budget { targets, budget });
        }
        Ok(())
    }

    /// Grid coordinate `j` of axis `(lo, hi)`; the endpoints are hit exactly.
    fn axis(&self, lo: f64, hi: f64, j: usize) -> f64 {
        if j + 1 == self.grid {
            hi
        } else {
            lo + (hi - lo) * j as f64 / (self.grid - 1) as f64
        }
    }

    /// Target `index` in row-major order, last coordinate fastest.
    pub fn target(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.bounds.len()];
        for (slot, &(lo, hi)) in out.iter_mut().zip(&self.bounds).rev() {
            *slot = self.axis(lo, hi, index % self.grid);
            index /= self.grid;
        }
        out
    }

    pub fn targets(&self) -> Vec<Vec<f64>> {
        (0..self.target_count() as usize).map(|i| self.target(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord {
    pub target: Vec<f64>,
    pub preimage: Vec<Dyadic>,
    pub depth: u32,
    pub value: Vec<f64>,
    pub error: f64,
    /// Why the preimage search stopped short, if it did.
    pub note: Option<String>,
}

impl TargetRecord {
    pub fn hit(&self, eps: f64) -> bool {
        self.note.is_none() && self.error <= eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateStatus {
    Certified,
    Failed { worst_target: Vec<f64>, worst_error: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCertificate {
    pub function_id: String,
    pub domain: usize,
    pub box_spec: BoxSpec,
    pub eps: f64,
    pub records: Vec<TargetRecord>,
    pub status: CertificateStatus,
}

impl CoverageCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == CertificateStatus::Certified
    }

    pub fn worst_error(&self) -> f64 {
        self.records.iter().map(|r| r.error).fold(0.0, f64::max)
    }

    pub fn hit_count(&self) -> usize {
        self.records.iter().filter(|r| r.hit(self.eps)).count()
    }

    pub fn max_depth(&self) -> u32 {
        self.records.iter().map(|r| r.depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub budget: u64,
    pub preimage: PreimageOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            budget: DEFAULT_TARGET_BUDGET,
            preimage: PreimageOptions::default(),
        }
    }
}

pub fn certify_surjective_on_box(
    expr: &FunctionExpr,
    box_spec: &BoxSpec,
    eps: f64,
) -> Result<CoverageCertificate, CertifyError> {
    certify_with(expr, box_spec, eps, CertifyOptions::default())
}

/// Certify `(Σ λᵢ φ_{rᵢ}) ∘ base`, or the bare span map when the member has
/// no base.
pub fn certify_member(
    member: &VectorSpanMember,
    box_spec: &BoxSpec,
    eps: f64,
    opts: CertifyOptions,
) -> Result<CoverageCertificate, CertifyError> {
    if member.is_zero() {
        return Err(CertifyError::ZeroMember);
    }
    if let Some(w) = detect_degenerate(member) {
        return Err(CertifyError::Degenerate(w));
    }
    let expr = factory::member_expr(member)?;
    certify_with(&expr, box_spec, eps, opts)
}

pub fn certify_with(
    expr: &FunctionExpr,
    box_spec: &BoxSpec,
    eps: f64,
    opts: CertifyOptions,
) -> Result<CoverageCertificate, CertifyError> {
    if !(eps > 0.0) {
        return Err(CertifyError::Argument(format!("eps {eps} must be positive")));
    }
    if box_spec.dimension() != expr.codomain() {
        return Err(CertifyError::Box(format!(
            "box has {} coordinates, expression maps into R^{}",
            box_spec.dimension(),
            expr.codomain()
        )));
    }
    box_spec.check_budget(opts.budget)?;
    if let Some(w) = find_degenerate(expr) {
        return Err(CertifyError::Degenerate(w));
    }

    let n = box_spec.target_count() as usize;
    let records: Vec<TargetRecord> = (0..n)
        .into_par_iter()
        .map(|i| {
            let target = box_spec.target(i);
            match factory::preimage_with(expr, &target, eps, opts.preimage) {
                Ok(w) => TargetRecord {
                    target,
                    preimage: w.point,
                    depth: w.depth,
                    value: w.value,
                    error: w.error,
                    note: None,
                },
                Err(FactoryError::Refinement { best, .. }) => TargetRecord {
                    target,
                    preimage: best.point,
                    depth: best.depth,
                    value: best.value,
                    error: best.error,
                    note: Some("refinement budget exhausted".into()),
                },
                Err(e) => TargetRecord {
                    target,
                    preimage: Vec::new(),
                    depth: 0,
                    value: Vec::new(),
                    error: f64::INFINITY,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();

    let status = match records
        .iter()
        .filter(|r| !r.hit(eps))
        .max_by(|a, b| a.error.total_cmp(&b.error))
    {
        None => CertificateStatus::Certified,
        Some(worst) => CertificateStatus::Failed {
            worst_target: worst.target.clone(),
            worst_error: worst.error,
        },
    };
    Ok(CoverageCertificate {
        function_id: expr.describe(),
        domain: expr.domain(),
        box_spec: box_spec.clone(),
        eps,
        records,
        status,
    })
}

/// Re-evaluate every stored witness by forward evaluation alone; returns
/// the achieved errors in record order (`∞` for records without a witness).
pub fn recheck(cert: &CoverageCertificate, expr: &FunctionExpr) -> Result<Vec<f64>, CertifyError> {
    cert.records
        .par_iter()
        .map(|r| {
            if r.preimage.is_empty() {
                return Ok(f64::INFINITY);
            }
            let v = factory::evaluate_exact(expr, &r.preimage, r.depth)?;
            let v: Vec<f64> = v.iter().map(Dyadic::to_f64).collect();
            Ok(factory::sup_distance(&v, &r.target))
        })
        .collect()
}

/// Something whose samples can be stacked into a rank matrix.
#[derive(Debug, Clone)]
pub enum FamilyFunction {
    Scalar(ScalarSpan),
    Member(VectorSpanMember),
    Expr(Arc<FunctionExpr>),
}

impl FamilyFunction {
    pub fn label(&self) -> String {
        match self {
            FamilyFunction::Scalar(s) => s.to_string(),
            FamilyFunction::Member(m) => {
                let terms: Vec<String> = m
                    .terms()
                    .iter()
                    .map(|t| format!("{}*phi{:?}", t.coefficient, t.exponents))
                    .collect();
                let body = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
                match m.base() {
                    Some(b) => format!("({body}) o {}", b.describe()),
                    None => body,
                }
            }
            FamilyFunction::Expr(e) => e.describe(),
        }
    }

    pub fn domain(&self) -> usize {
        match self {
            FamilyFunction::Scalar(_) => 1,
            FamilyFunction::Member(m) => m.base().map_or(m.arity(), |b| b.domain()),
            FamilyFunction::Expr(e) => e.domain(),
        }
    }

    pub fn sample(&self, x: &[f64], depth: u32) -> Result<Vec<f64>, FactoryError> {
        match self {
            FamilyFunction::Scalar(s) => {
                if x.len() != 1 {
                    return Err(FactoryError::Arity(format!(
                        "scalar span takes 1 argument, got {}",
                        x.len()
                    )));
                }
                Ok(vec![s.eval(x[0])])
            }
            FamilyFunction::Member(m) => {
                let inner = match m.base() {
                    Some(b) => factory::evaluate_f64(b, x, depth)?,
                    None => x.to_vec(),
                };
                Ok(m.apply(&inner)?)
            }
            FamilyFunction::Expr(e) => factory::evaluate_f64(e, x, depth),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub family: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub tol: f64,
    pub depth: u32,
    pub pivots: Vec<f64>,
}

impl IndependenceReport {
    pub fn full_rank(&self) -> bool {
        self.rank == self.rows
    }
}

/// Equispaced sample points `8j/count`, `j = 1..=count`, on `(0, 8]`.
///
/// The functions sampled are odd, so symmetric grids waste half their
/// points; staying clear of 0 and spreading to 8 keeps the pivots of a
/// ten-member `sinh` family well above `1e-8`.
pub fn default_sample_points(count: usize) -> Vec<Vec<f64>> {
    (1..=count).map(|j| vec![8.0 * j as f64 / count as f64]).collect()
}

/// Evaluation matrix with one row per function, flattened over output
/// coordinates, and its numerical rank.
pub fn independence_report(
    family: &[FamilyFunction],
    points: &[Vec<f64>],
    tol: f64,
    depth: u32,
) -> Result<IndependenceReport, CertifyError> {
    if points.len() < family.len() {
        return Err(CertifyError::Argument(format!(
            "{} sample points for {} functions",
            points.len(),
            family.len()
        )));
    }
    let mut rows = Vec::with_capacity(family.len());
    for f in family {
        let mut row = Vec::new();
        for (index, p) in points.iter().enumerate() {
            let v = f.sample(p, depth).map_err(|source| CertifyError::Evaluation {
                index,
                point: p.clone(),
                source,
            })?;
            row.extend(v);
        }
        rows.push(row);
    }
    let r = numerical_rank(&rows, tol)?;
    Ok(IndependenceReport {
        family: family.iter().map(FamilyFunction::label).collect(),
        points: points.to_vec(),
        rows: r.rows,
        cols: r.cols,
        rank: r.rank,
        tol,
        depth,
        pivots: r.pivots,
    })
}

pub fn independence_report_default(family: &[FamilyFunction]) -> Result<IndependenceReport, CertifyError> {
    let count = family.len().max(16);
    independence_report(family, &default_sample_points(count), DEFAULT_RANK_TOL, DEFAULT_SAMPLE_DEPTH)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionReport {
    /// `{Fᵢ ∘ f}` sampled at the domain points.
    pub composed: IndependenceReport,
    /// `{Fᵢ}` sampled at `f(points)`.
    pub image: IndependenceReport,
}

impl CompositionReport {
    pub fn ranks_equal(&self) -> bool {
        self.composed.rank == self.image.rank
    }
}

pub fn composition_preserves_rank(
    family: &[VectorSpanMember],
    base: &Arc<FunctionExpr>,
    points: &[Vec<f64>],
    tol: f64,
    depth: u32,
) -> Result<CompositionReport, CertifyError> {
    let composed: Vec<FamilyFunction> = family
        .iter()
        .map(|m| {
            factory::phi_compose(m, base)
                .map(FamilyFunction::Expr)
                .map_err(CertifyError::from)
        })
        .collect::<Result<_, _>>()?;
    let composed = independence_report(&composed, points, tol, depth)?;

    let mut images = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let y = factory::evaluate_f64(base, p, depth).map_err(|source| CertifyError::Evaluation {
            index,
            point: p.clone(),
            source,
        })?;
        images.push(y);
    }
    let bare: Vec<FamilyFunction> = family
        .iter()
        .map(|m| FamilyFunction::Member(m.without_base()))
        .collect();
    let image = independence_report(&bare, &images, tol, depth)?;
    Ok(CompositionReport { composed, image })
}
