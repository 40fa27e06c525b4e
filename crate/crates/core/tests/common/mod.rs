//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_bigint::BigInt;
use num_traits::Zero;
use surjkit::dyadic::Dyadic;
use surjkit::factory::{self, FunctionExpr, Node};
use surjkit::phi::component_reduce;

/// `e^{rt} − e^{−rt}` straight from `exp`.
pub fn phi_ref(r: f64, t: f64) -> f64 {
    (r * t).exp() - (-r * t).exp()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Cell {
    /// image distance at the midpoint
    key: f64,
    a: Dyadic,
    b: Dyadic,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.key.total_cmp(&other.key) == Ordering::Equal
    }
}

impl Eq for Cell {}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key)
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bound on `|f(t') − f(t)|_∞` for `|t' − t| ≤ h`, built only from the
/// curve's cell-nesting modulus (parameters inside two consecutive depth-j
/// cells stay inside those two cells) and derivative bounds of the span
/// maps. Identity nodes must have arity 1.
pub fn modulus(expr: &FunctionExpr, t: f64, h: f64, depth: u32) -> f64 {
    match expr.node() {
        Node::Identity => h,
        Node::PeanoLine => {
            let hi = t + h;
            if hi <= 0.0 {
                return 0.0;
            }
            let n = (hi.floor() + 1.0).max(1.0);
            let kn = depth + (n as u64).next_power_of_two().trailing_zeros();
            // curve parameter moves at most 4 per unit t
            let w = 8.0 * h;
            let j = if w >= 1.0 { 0 } else { ((1.0 / w).ln() / 4f64.ln()).floor() as u32 };
            let j = j.min(kn);
            let curve = 2.0 * 4.0 * n * 2f64.powi(-(j as i32));
            let linear = 4.0 * n * 2f64.powi(kn as i32) * 2.0 * h;
            curve.min(linear) + (4.0 * n + 2.0) * 2.0 * h
        }
        Node::ProjectLift { inner } => modulus(inner, t, h, depth),
        Node::DimLift { inner, pair } => {
            let kk = factory::inner_depth(depth);
            let w = modulus(inner, t, h, kk);
            let s = *factory::evaluate_f64(inner, &[t], kk).unwrap().last().unwrap();
            w.max(modulus(pair, s, w, depth))
        }
        Node::PhiCompose { member, inner } => {
            let w = modulus(inner, t, h, depth);
            let x = evaluate_first(inner, t, depth);
            component_reduce(member)
                .iter()
                .zip(&x)
                .map(|(s, xi)| s.derivative_bound(xi.abs() + w) * w)
                .fold(0.0, f64::max)
        }
    }
}

/// Evaluate at `(t, 0, …, 0)`.
pub fn evaluate_first(expr: &FunctionExpr, t: f64, depth: u32) -> Vec<f64> {
    evaluate_first_exact(expr, &Dyadic::from_f64(t).unwrap(), depth)
}

pub fn evaluate_first_exact(expr: &FunctionExpr, t: &Dyadic, depth: u32) -> Vec<f64> {
    let mut x = vec![Dyadic::zero(); expr.domain()];
    x[0] = t.clone();
    factory::evaluate_exact(expr, &x, depth)
        .unwrap()
        .iter()
        .map(Dyadic::to_f64)
        .collect()
}

/// Forward-sweep oracle over the first argument: best-first subdivision of
/// `[lo, hi]` into exact dyadic intervals, using forward evaluation at
/// `depth` and [`modulus`] to prune; the closest midpoint is split first.
/// Nested lifts need parameter resolution far below `f64` spacing, hence
/// the exact endpoints. Returns a parameter whose image is within `eps` of
/// `target`, or `None` if the search space is exhausted or `max_evals` is
/// hit.
pub fn forward_sweep(
    expr: &FunctionExpr,
    target: &[f64],
    eps: f64,
    lo: f64,
    hi: f64,
    depth: u32,
    max_evals: usize,
) -> Option<Dyadic> {
    let dist = |t: &Dyadic| sup(&evaluate_first_exact(expr, t, depth), target);
    let mut heap = BinaryHeap::new();
    heap.push(Cell {
        key: 0.0,
        a: Dyadic::from_f64(lo).unwrap(),
        b: Dyadic::from_f64(hi).unwrap(),
    });
    let mut evals = 0;
    while let Some(Cell { a, b, .. }) = heap.pop() {
        let m = (&a + &b).shift(-1);
        for (a, b) in [(a, m.clone()), (m, b)] {
            let c = (&a + &b).shift(-1);
            let d = dist(&c);
            evals += 1;
            if d <= eps {
                return Some(c);
            }
            if evals >= max_evals {
                return None;
            }
            let h = (&b - &a).shift(-1).to_f64();
            if d - modulus(expr, c.to_f64(), h, depth) <= eps {
                heap.push(Cell { key: d, a, b });
            }
        }
    }
    None
}

/// Exact rank of an `f64` matrix by fraction-free (Bareiss) elimination on
/// the scaled integer entries.
pub fn exact_rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let all: Vec<Dyadic> = rows.iter().flatten().map(|&v| Dyadic::from_f64(v).unwrap()).collect();
    let min_exp = all.iter().filter(|d| !d.is_zero()).map(Dyadic::exponent).min().unwrap_or(0);
    let to_int = |d: &Dyadic| -> BigInt {
        if d.is_zero() {
            BigInt::zero()
        } else {
            d.mantissa() << (d.exponent() - min_exp) as usize
        }
    };
    let n = rows[0].len();
    let mut a: Vec<Vec<BigInt>> = all.chunks(n).map(|c| c.iter().map(to_int).collect()).collect();
    let m = a.len();
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..n {
        if rank == m {
            break;
        }
        let Some(p) = (rank..m).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..m {
            for j in col + 1..n {
                let v = &a[rank][col] * &a[i][j] - &a[i][col] * &a[rank][j];
                a[i][j] = v / &prev;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}
