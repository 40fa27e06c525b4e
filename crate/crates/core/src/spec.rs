//! Declarative TOML spec files and JSON reports.
//!
//! Reals are written as decimal strings on both sides. A spec looks like:
//!
//! ```toml
//! [base]
//! lifts = 1            # codomain 2 + lifts
//! project_arity = 2    # domain arity m
//! depth = 12
//!
//! [family]
//! exponents = ["1", "2", "3"]
//! coefficients = ["1", "-0.5", "2"]
//!
//! [certify]
//! low = "-5"
//! high = "5"
//! grid = 9
//! epsilon = "1e-3"
//! ```
//!
//! `base.expr` may replace the constructor chain with an explicit tree, and
//! `family.terms` may replace the diagonal exponents with arbitrary terms.

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::certify::{
    BoxSpec, CertificateStatus, CompositionReport, CoverageCertificate, IndependenceReport,
};
use crate::factory::{self, FactoryError, FunctionExpr, Node, MAX_CODOMAIN};
use crate::phi::{make_diagonal_family, PhiError, VectorSpanMember, VectorTerm};

pub const DEFAULT_SPEC_DEPTH: u32 = 12;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{0}")]
    Parse(String),
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

/// A real carried as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a real written as a decimal string, e.g. \"1e-3\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| E::custom(format!("`{v}` is not a decimal real")))?;
                if !x.is_finite() {
                    return Err(E::custom(format!("`{v}` is not finite")));
                }
                Ok(Real(x))
            }
        }
        d.deserialize_str(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coefficient: Real,
    pub exponents: Vec<Real>,
}

/// Serialized expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExprSpec {
    PeanoLine,
    Identity {
        arity: usize,
    },
    DimLift {
        child: Box<ExprSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pair: Option<Box<ExprSpec>>,
    },
    ProjectLift {
        arity: usize,
        child: Box<ExprSpec>,
    },
    PhiCompose {
        terms: Vec<TermSpec>,
        child: Box<ExprSpec>,
    },
}

impl ExprSpec {
    pub fn build(&self) -> Result<Arc<FunctionExpr>, FactoryError> {
        match self {
            ExprSpec::PeanoLine => Ok(factory::extend_to_line()),
            ExprSpec::Identity { arity } => factory::identity(*arity),
            ExprSpec::DimLift { child, pair } => {
                let f = child.build()?;
                match pair {
                    Some(p) => factory::lift_dimension_with(&f, &p.build()?),
                    None => factory::lift_dimension(&f),
                }
            }
            ExprSpec::ProjectLift { arity, child } => factory::project_lift(&child.build()?, *arity),
            ExprSpec::PhiCompose { terms, child } => {
                let inner = child.build()?;
                let member = member_from_terms(inner.codomain(), terms)?;
                factory::phi_compose(&member, &inner)
            }
        }
    }

    pub fn from_expr(expr: &FunctionExpr) -> ExprSpec {
        match expr.node() {
            Node::PeanoLine => ExprSpec::PeanoLine,
            Node::Identity => ExprSpec::Identity {
                arity: expr.domain(),
            },
            Node::DimLift { inner, pair } => ExprSpec::DimLift {
                child: Box::new(ExprSpec::from_expr(inner)),
                pair: match pair.node() {
                    Node::PeanoLine => None,
                    _ => Some(Box::new(ExprSpec::from_expr(pair))),
                },
            },
            Node::ProjectLift { inner } => ExprSpec::ProjectLift {
                arity: expr.domain(),
                child: Box::new(ExprSpec::from_expr(inner)),
            },
            Node::PhiCompose { member, inner } => ExprSpec::PhiCompose {
                terms: member
                    .terms()
                    .iter()
                    .map(|t| TermSpec {
                        coefficient: Real(t.coefficient),
                        exponents: t.exponents.iter().map(|&r| Real(r)).collect(),
                    })
                    .collect(),
                child: Box::new(ExprSpec::from_expr(inner)),
            },
        }
    }
}

fn member_from_terms(arity: usize, terms: &[TermSpec]) -> Result<VectorSpanMember, PhiError> {
    VectorSpanMember::new(
        arity,
        terms
            .iter()
            .map(|t| VectorTerm {
                coefficient: t.coefficient.0,
                exponents: t.exponents.iter().map(|r| r.0).collect(),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project_arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<ExprSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(Real, Real)>>,
    pub grid: usize,
    pub epsilon: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub base: BaseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// What a spec file resolves to.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub base: Arc<FunctionExpr>,
    /// Family members with the base attached.
    pub family: Vec<VectorSpanMember>,
    /// The member that is certified: the combination of the family (or
    /// `None` when the spec has no family).
    pub member: Option<VectorSpanMember>,
    pub depth: u32,
}

impl Pipeline {
    /// The function evaluated and certified.
    pub fn target_expr(&self) -> Result<Arc<FunctionExpr>, FactoryError> {
        match &self.member {
            Some(m) => factory::member_expr(m),
            None => Ok(self.base.clone()),
        }
    }
}

/// 1-based line of the first line that starts with `needle`, or 1.
fn line_of(text: &str, needle: &str) -> usize {
    text.lines()
        .position(|l| l.trim_start().starts_with(needle))
        .map_or(1, |i| i + 1)
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec types always serialize")
    }

    /// Build the pipeline; `text` is only used to anchor messages.
    pub fn resolve(&self, text: &str) -> Result<Pipeline, SpecError> {
        let invalid = |needle: &str, message: String| SpecError::Invalid {
            line: line_of(text, needle),
            message,
        };
        let depth = self.base.depth.unwrap_or(DEFAULT_SPEC_DEPTH);
        if depth < 1 || depth > factory::DEFAULT_DEPTH_CAP {
            return Err(invalid(
                "depth",
                format!("base.depth {depth} outside 1..={}", factory::DEFAULT_DEPTH_CAP),
            ));
        }
        let base = match &self.base.expr {
            Some(e) => {
                if self.base.lifts.is_some() || self.base.project_arity.is_some() {
                    return Err(invalid(
                        "[base]",
                        "base.expr cannot be combined with lifts/project_arity".into(),
                    ));
                }
                e.build().map_err(|err| invalid("expr", err.to_string()))?
            }
            None => {
                let lifts = self.base.lifts.unwrap_or(0);
                if lifts + 2 > MAX_CODOMAIN {
                    return Err(invalid(
                        "lifts",
                        format!("lifts = {lifts} exceeds codomain cap {MAX_CODOMAIN}"),
                    ));
                }
                let mut f = factory::extend_to_line();
                for _ in 0..lifts {
                    f = factory::lift_dimension(&f).map_err(|e| invalid("lifts", e.to_string()))?;
                }
                match self.base.project_arity {
                    Some(m) => factory::project_lift(&f, m)
                        .map_err(|e| invalid("project_arity", e.to_string()))?,
                    None => f,
                }
            }
        };

        let (family, member) = match &self.family {
            None => (Vec::new(), None),
            Some(fam) => self.resolve_family(fam, &base, text)?,
        };
        Ok(Pipeline {
            base,
            family,
            member,
            depth,
        })
    }

    fn resolve_family(
        &self,
        fam: &FamilySection,
        base: &Arc<FunctionExpr>,
        text: &str,
    ) -> Result<(Vec<VectorSpanMember>, Option<VectorSpanMember>), SpecError> {
        let invalid = |needle: &str, message: String| SpecError::Invalid {
            line: line_of(text, needle),
            message,
        };
        let n = base.codomain();
        let members: Vec<VectorSpanMember> = match (&fam.exponents, &fam.terms) {
            (Some(_), Some(_)) => {
                return Err(invalid("[family]", "give either exponents or terms, not both".into()))
            }
            (None, None) => return Err(invalid("[family]", "family needs exponents or terms".into())),
            (Some(exps), None) => {
                let exps: Vec<f64> = exps.iter().map(|r| r.0).collect();
                make_diagonal_family(&exps, n).map_err(|e| invalid("exponents", e.to_string()))?
            }
            (None, Some(terms)) => {
                if fam.coefficients.is_some() {
                    return Err(invalid(
                        "coefficients",
                        "coefficients go inside each term when terms are given".into(),
                    ));
                }
                terms
                    .iter()
                    .map(|t| {
                        VectorSpanMember::basis(t.exponents.iter().map(|r| r.0).collect())
                            .map_err(|e| invalid("exponents", e.to_string()))
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        if members.is_empty() {
            return Err(invalid("[family]", "family is empty".into()));
        }
        let coefficients: Vec<f64> = match (&fam.coefficients, &fam.terms) {
            (_, Some(terms)) => terms.iter().map(|t| t.coefficient.0).collect(),
            (Some(c), None) => {
                if c.len() != members.len() {
                    return Err(invalid(
                        "coefficients",
                        format!("{} coefficients for {} exponents", c.len(), members.len()),
                    ));
                }
                c.iter().map(|r| r.0).collect()
            }
            (None, None) => vec![1.0; members.len()],
        };
        let members: Vec<VectorSpanMember> = members
            .into_iter()
            .map(|m| {
                m.with_base(base.clone())
                    .map_err(|e| invalid("exponents", format!("{e} (base codomain is {n})")))
            })
            .collect::<Result<_, _>>()?;
        let parts: Vec<(f64, &VectorSpanMember)> = coefficients.iter().copied().zip(&members).collect();
        let combo = VectorSpanMember::linear_combination(&parts).map_err(|e| invalid("[family]", e.to_string()))?;
        Ok((members, Some(combo)))
    }

    pub fn box_spec(&self, text: &str, codomain: usize) -> Result<BoxSpec, SpecError> {
        let c = self.certify.as_ref().ok_or_else(|| SpecError::Invalid {
            line: 1,
            message: "spec has no [certify] section".into(),
        })?;
        let invalid = |needle: &str, message: String| SpecError::Invalid {
            line: line_of(text, needle),
            message,
        };
        let bounds = match (&c.bounds, c.low, c.high) {
            (Some(b), None, None) => b.iter().map(|(l, h)| (l.0, h.0)).collect(),
            (None, Some(l), Some(h)) => vec![(l.0, h.0); codomain],
            _ => {
                return Err(invalid(
                    "[certify]",
                    "certify needs either bounds or both low and high".into(),
                ))
            }
        };
        let b = BoxSpec::new(bounds, c.grid).map_err(|e| invalid("[certify]", e.to_string()))?;
        if b.dimension() != codomain {
            return Err(invalid(
                "bounds",
                format!("box has {} coordinates, pipeline maps into R^{codomain}", b.dimension()),
            ));
        }
        if !(c.epsilon.0 > 0.0) {
            return Err(invalid("epsilon", format!("epsilon {} must be positive", c.epsilon.0)));
        }
        Ok(b)
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn real_string(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| real_string(x)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub target: Vec<String>,
    pub preimage: Vec<String>,
    pub preimage_exact: Vec<String>,
    pub depth: u32,
    pub value: Vec<String>,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxRecord {
    pub bounds: Vec<[String; 2]>,
    pub grid: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateRecord {
    pub function_id: String,
    pub domain: usize,
    #[serde(rename = "box")]
    pub box_spec: BoxRecord,
    pub epsilon: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_target: Option<Vec<String>>,
    pub worst_error: String,
    pub targets: usize,
    pub hits: usize,
    pub max_depth: u32,
    pub witnesses: Vec<WitnessRecord>,
}

impl From<&CoverageCertificate> for CertificateRecord {
    fn from(c: &CoverageCertificate) -> Self {
        let (status, worst_target) = match &c.status {
            CertificateStatus::Certified => ("certified".to_string(), None),
            CertificateStatus::Failed { worst_target, .. } => ("failed".to_string(), Some(reals(worst_target))),
        };
        CertificateRecord {
            function_id: c.function_id.clone(),
            domain: c.domain,
            box_spec: BoxRecord {
                bounds: c
                    .box_spec
                    .bounds()
                    .iter()
                    .map(|&(l, h)| [real_string(l), real_string(h)])
                    .collect(),
                grid: c.box_spec.grid(),
            },
            epsilon: real_string(c.eps),
            status,
            worst_target,
            worst_error: real_string(c.worst_error()),
            targets: c.records.len(),
            hits: c.hit_count(),
            max_depth: c.max_depth(),
            witnesses: c
                .records
                .iter()
                .map(|r| WitnessRecord {
                    target: reals(&r.target),
                    preimage: r.preimage.iter().map(|d| real_string(d.to_f64())).collect(),
                    preimage_exact: r.preimage.iter().map(|d| d.to_exact_string()).collect(),
                    depth: r.depth,
                    value: reals(&r.value),
                    error: real_string(r.error),
                    note: r.note.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceRecord {
    pub family: Vec<String>,
    pub points: Vec<Vec<String>>,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub full_rank: bool,
    pub tol: String,
    pub depth: u32,
    pub pivots: Vec<String>,
}

impl From<&IndependenceReport> for IndependenceRecord {
    fn from(r: &IndependenceReport) -> Self {
        IndependenceRecord {
            family: r.family.clone(),
            points: r.points.iter().map(|p| reals(p)).collect(),
            rows: r.rows,
            cols: r.cols,
            rank: r.rank,
            full_rank: r.full_rank(),
            tol: real_string(r.tol),
            depth: r.depth,
            pivots: reals(&r.pivots),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionRecord {
    pub composed: IndependenceRecord,
    pub image: IndependenceRecord,
    pub ranks_equal: bool,
}

impl From<&CompositionReport> for CompositionRecord {
    fn from(r: &CompositionReport) -> Self {
        CompositionRecord {
            composed: (&r.composed).into(),
            image: (&r.image).into(),
            ranks_equal: r.ranks_equal(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub budget: u64,
    pub pipeline: String,
    pub certificate: CertificateRecord,
    pub independence: Option<IndependenceRecord>,
    pub composition: Option<CompositionRecord>,
    pub certified: bool,
    pub full_rank: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report always serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
[base]
lifts = 1
project_arity = 2
depth = 10

[family]
exponents = ["1", "2", "3"]
coefficients = ["1", "-0.5", "2"]

[certify]
low = "-5"
high = "5"
grid = 3
epsilon = "1e-3"
"#;

    #[test]
    fn parses_and_resolves() {
        let spec = SpecFile::parse(SPEC).unwrap();
        let p = spec.resolve(SPEC).unwrap();
        assert_eq!((p.base.domain(), p.base.codomain()), (2, 3));
        assert_eq!(p.family.len(), 3);
        assert_eq!(p.depth, 10);
        let e = p.target_expr().unwrap();
        assert_eq!(e.kind(), "phi_compose");
        let b = spec.box_spec(SPEC, 3).unwrap();
        assert_eq!(b.target_count(), 27);
    }

    #[test]
    fn unknown_keys_and_bad_reals_are_rejected() {
        let bad = SPEC.replace("depth = 10", "depth = 10\ncolour = 3");
        let err = SpecFile::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("colour"), "{err}");
        let bad = SPEC.replace("\"1e-3\"", "\"tiny\"");
        assert!(SpecFile::parse(&bad).is_err());
        let bad = SPEC.replace("\"1e-3\"", "0.001");
        assert!(SpecFile::parse(&bad).is_err());
    }

    #[test]
    fn semantic_errors_are_line_anchored() {
        let bad = SPEC.replace("coefficients = [\"1\", \"-0.5\", \"2\"]", "coefficients = [\"1\"]");
        let spec = SpecFile::parse(&bad).unwrap();
        match spec.resolve(&bad) {
            Err(SpecError::Invalid { line, .. }) => assert_eq!(line, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expr_tree_round_trips() {
        let base = factory::surjection(2, 4).unwrap();
        let fam = make_diagonal_family(&[1.5], 4).unwrap();
        let e = factory::phi_compose(&fam[0], &base).unwrap();
        let spec = ExprSpec::from_expr(&e);
        let text = toml::to_string(&BaseSection {
            expr: Some(spec.clone()),
            ..Default::default()
        })
        .unwrap();
        let back: BaseSection = toml::from_str(&text).unwrap();
        assert_eq!(back.expr.as_ref().unwrap(), &spec);
        assert_eq!(*back.expr.unwrap().build().unwrap(), *e);
    }

    #[test]
    fn real_strings_carry_17_digits() {
        assert_eq!(real_string(0.1), "1.0000000000000001e-1");
        assert_eq!(real_string(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
