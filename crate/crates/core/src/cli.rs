//! Command implementations behind the `surjkit` binary.
//!
//! Exit codes: 0 success, 1 not certified or rank deficient, 2 validation,
//! 3 resource (I/O, caps, budgets), 4 degenerate span member.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{
    self, composition_preserves_rank, default_sample_points, detect_degenerate, CertifyError,
    CertifyOptions, DEFAULT_TARGET_BUDGET,
};
use crate::curve::{self, CurveError};
use crate::dyadic::Dyadic;
use crate::factory::{self, EvalRequest, FactoryError};
use crate::rank::DEFAULT_RANK_TOL;
use crate::spec::{self, Report, SpecFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    NotCertified = 1,
    Validation = 2,
    Resource = 3,
    Degenerate = 4,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Outcome of a command: exit status plus what goes to stdout / stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit: Exit,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            exit: Exit::Ok,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(exit: Exit, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        stderr.push('\n');
        Outcome {
            exit,
            stdout: String::new(),
            stderr,
        }
    }
}

fn factory_exit(e: &FactoryError) -> Exit {
    match e {
        FactoryError::DepthCap { .. } | FactoryError::Refinement { .. } => Exit::Resource,
        _ => Exit::Validation,
    }
}

pub fn trace(depth: u32, out: &Path, max_depth: u32) -> Outcome {
    if depth < 1 {
        return Outcome::fail(Exit::Validation, "error: depth must be at least 1");
    }
    let points = match curve::curve_trace(depth, max_depth) {
        Ok(p) => p,
        Err(e @ CurveError::DepthCap { .. }) => return Outcome::fail(Exit::Resource, format!("error: {e}")),
        Err(e) => return Outcome::fail(Exit::Validation, format!("error: {e}")),
    };
    let cells = points.len() as f64;
    let mut csv = String::with_capacity(points.len() * 32);
    csv.push_str("t,x,y\n");
    for (i, p) in points.iter().enumerate() {
        let (x, y) = p.to_f64();
        let _ = writeln!(csv, "{},{},{}", i as f64 / cells, x, y);
    }
    if let Err(e) = fs::write(out, csv) {
        return Outcome::fail(Exit::Resource, format!("error: writing {}: {e}", out.display()));
    }
    Outcome::ok(format!("wrote {} rows to {}\n", points.len(), out.display()))
}

fn load_spec(path: &Path) -> Result<(SpecFile, String), Outcome> {
    let text = fs::read_to_string(path)
        .map_err(|e| Outcome::fail(Exit::Resource, format!("error: reading {}: {e}", path.display())))?;
    let spec = SpecFile::parse(&text)
        .map_err(|e| Outcome::fail(Exit::Validation, format!("error: {}: {e}", path.display())))?;
    Ok((spec, text))
}

pub fn parse_point(s: &str) -> Result<Vec<Dyadic>, String> {
    s.split(',')
        .map(|v| Dyadic::parse_exact_or_decimal(v).map_err(|e| format!("bad coordinate `{}`: {e}", v.trim())))
        .collect()
}

pub fn eval(spec_path: &Path, point: &str) -> Outcome {
    let (spec, text) = match load_spec(spec_path) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let pipeline = match spec.resolve(&text) {
        Ok(p) => p,
        Err(e) => return Outcome::fail(Exit::Validation, format!("error: {}: {e}", spec_path.display())),
    };
    let point = match parse_point(point) {
        Ok(p) => p,
        Err(e) => return Outcome::fail(Exit::Validation, format!("error: {e}")),
    };
    let expr = match pipeline.target_expr() {
        Ok(e) => e,
        Err(e) => return Outcome::fail(factory_exit(&e), format!("error: {e}")),
    };
    let result = EvalRequest::new(point, pipeline.depth, 1e-9).and_then(|req| factory::evaluate(&expr, &req));
    match result {
        Ok(ev) => {
            let values: Vec<String> = ev.value.iter().map(|v| v.to_string()).collect();
            Outcome::ok(format!(
                "{}\nerror_estimate {}\n",
                values.join(" "),
                spec::real_string(ev.error_estimate)
            ))
        }
        Err(e) => Outcome::fail(factory_exit(&e), format!("error: {e}")),
    }
}

/// Sample points for rank reports: the deterministic default, or a seeded
/// uniform draw on `(0, 8]`, embedded as `(x, 0, …, 0)`.
pub fn sample_points(count: usize, domain: usize, seed: Option<u64>) -> Vec<Vec<f64>> {
    let firsts: Vec<f64> = match seed {
        None => default_sample_points(count).into_iter().map(|p| p[0]).collect(),
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut v: Vec<f64> = (0..count).map(|_| 8.0 - rng.gen_range(0.0..8.0)).collect();
            v.sort_by(f64::total_cmp);
            v
        }
    };
    firsts
        .into_iter()
        .map(|x| {
            let mut p = vec![0.0; domain];
            p[0] = x;
            p
        })
        .collect()
}

pub fn certify(spec_path: &Path, report_path: &Path, budget: Option<u64>, seed: Option<u64>) -> Outcome {
    let (spec, text) = match load_spec(spec_path) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let invalid = |e: &dyn std::fmt::Display| Outcome::fail(Exit::Validation, format!("error: {}: {e}", spec_path.display()));
    let pipeline = match spec.resolve(&text) {
        Ok(p) => p,
        Err(e) => return invalid(&e),
    };
    if spec.certify.is_none() {
        return invalid(&"spec has no [certify] section");
    }
    let box_spec = match spec.box_spec(&text, pipeline.base.codomain()) {
        Ok(b) => b,
        Err(e) => return invalid(&e),
    };
    let section = spec.certify.as_ref().expect("checked above");
    let budget = budget.or(section.budget).unwrap_or(DEFAULT_TARGET_BUDGET);
    let eps = section.epsilon.0;

    if let Some(member) = &pipeline.member {
        if let Some(w) = detect_degenerate(member) {
            return Outcome {
                exit: Exit::Degenerate,
                stdout: format!("degeneracy witness: coordinate {}\n", w.coordinate),
                stderr: format!("error: {w}; refusing to certify\n"),
            };
        }
    }
    let expr = match pipeline.target_expr() {
        Ok(e) => e,
        Err(e) => return Outcome::fail(factory_exit(&e), format!("error: {e}")),
    };
    let opts = CertifyOptions {
        budget,
        ..Default::default()
    };
    let cert = match certify::certify_with(&expr, &box_spec, eps, opts) {
        Ok(c) => c,
        Err(e @ CertifyError::Budget { .. }) => return Outcome::fail(Exit::Resource, format!("error: {e}")),
        Err(CertifyError::Degenerate(w)) => {
            return Outcome {
                exit: Exit::Degenerate,
                stdout: format!("degeneracy witness: coordinate {}\n", w.coordinate),
                stderr: format!("error: {w}; refusing to certify\n"),
            }
        }
        Err(e) => return Outcome::fail(Exit::Validation, format!("error: {e}")),
    };

    let composition = if pipeline.family.len() >= 2 {
        let count = pipeline.family.len().max(16);
        let points = sample_points(count, pipeline.base.domain(), seed);
        match composition_preserves_rank(&pipeline.family, &pipeline.base, &points, DEFAULT_RANK_TOL, pipeline.depth) {
            Ok(c) => Some(c),
            Err(e) => return Outcome::fail(Exit::Validation, format!("error: rank report: {e}")),
        }
    } else {
        None
    };

    let certified = cert.is_certified();
    let full_rank = composition.as_ref().map_or(true, |c| c.composed.full_rank());
    let report = Report {
        tool: "surjkit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        budget,
        pipeline: expr.describe(),
        certificate: (&cert).into(),
        independence: composition.as_ref().map(|c| (&c.composed).into()),
        composition: composition.as_ref().map(Into::into),
        certified,
        full_rank,
    };
    if let Err(e) = fs::write(report_path, report.to_json()) {
        return Outcome::fail(Exit::Resource, format!("error: writing {}: {e}", report_path.display()));
    }

    let mut stdout = format!(
        "status: {} ({}/{} targets within {}, worst error {})\n",
        if certified { "certified" } else { "failed" },
        cert.hit_count(),
        cert.records.len(),
        spec::real_string(eps),
        spec::real_string(cert.worst_error()),
    );
    if let Some(c) = &composition {
        let _ = writeln!(
            stdout,
            "rank: {}/{} composed, {}/{} at image points",
            c.composed.rank, c.composed.rows, c.image.rank, c.image.rows
        );
    }
    let _ = writeln!(stdout, "report: {}", report_path.display());
    Outcome {
        exit: if certified && full_rank { Exit::Ok } else { Exit::NotCertified },
        stdout,
        stderr: String::new(),
    }
}
