//! Expression evaluation.
//!
//! Evaluation flattens `add` and `mul`/`gmul` chains and accumulates them
//! left-to-right, so differently associated but equal chains produce
//! bit-identical results. Everything is pure `f64` arithmetic; given the same
//! binding and mollifier the result is bit-identical across runs and worker
//! schedules.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::rational::Rat;

use super::{BinOp, Expr, Node, UnaryOp};

/// A point to evaluate at: spatial coordinates plus the smoothing parameter.
#[derive(Debug, Clone, Copy)]
pub struct Binding<'a> {
    pub x: &'a [f64],
    pub eps: f64,
}

impl<'a> Binding<'a> {
    pub fn new(x: &'a [f64], eps: f64) -> Self {
        debug_assert!(eps > 0.0 && eps <= 1.0, "eps must lie in (0,1]");
        Binding { x, eps }
    }
}

/// Evaluation hooks for the mollifier family `rho_k`, its primitive and the
/// incomplete moments. Implemented by the embedding module's mollifier.
pub trait MollKernel: Sync {
    fn rho_k(&self, k: u32, t: f64) -> f64;
    fn primitive(&self, t: f64) -> f64;
    fn incomplete_moment(&self, j: u32, t: f64) -> f64;
    /// Stable identifier recorded in reports.
    fn fingerprint(&self) -> String;
}

/// Shared power semantics for evaluation and constant folding.
pub fn pow_value(base: f64, r: Rat) -> Result<f64> {
    if r.is_integer() {
        let n = r.num();
        if base == 0.0 && n < 0 {
            return Err(Error::Domain("zero raised to a negative power".into()));
        }
        if n.unsigned_abs() <= 1024 {
            Ok(base.powi(n as i32))
        } else {
            Ok(base.abs().powf(n as f64) * if base < 0.0 && n % 2 != 0 { -1.0 } else { 1.0 })
        }
    } else {
        if base < 0.0 {
            return Err(Error::Domain(
                "non-integer power of a negative base".into(),
            ));
        }
        if base == 0.0 {
            if r.num() < 0 {
                return Err(Error::Domain("zero raised to a negative power".into()));
            }
            return Ok(0.0);
        }
        Ok(base.powf(r.to_f64()))
    }
}

/// Threshold below which `exp(-1/u)` underflows to zero: for `u <= 1/709`
/// the value is below the smallest subnormal, so derivative formulas with
/// rational prefactors are short-circuited to an exact zero.
const FLAT_GUARD: f64 = 1.0 / 709.0;

const MAX_FLAT_DERIV: usize = 25;

fn bump_polys() -> &'static Vec<Vec<f64>> {
    // P_0 = 1, P_{k+1} = P_k'(1-t^2)^2 + 4kt P_k (1-t^2) - 2t P_k;
    // bump^{(k)}(t) = P_k(t) (1-t^2)^{-2k} exp(-1/(1-t^2)).
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        let one_minus_t2 = vec![1.0, 0.0, -1.0];
        let sq = poly_mul(&one_minus_t2, &one_minus_t2);
        for k in 0..MAX_FLAT_DERIV {
            let p = &polys[k];
            let mut next = poly_mul(&poly_deriv(p), &sq);
            let t_p = poly_mul(&[0.0, 1.0], p);
            next = poly_add(&next, &poly_scale(&poly_mul(&t_p, &one_minus_t2), 4.0 * k as f64));
            next = poly_add(&next, &poly_scale(&t_p, -2.0));
            polys.push(next);
        }
        polys
    })
}

fn posflat_polys() -> &'static Vec<Vec<f64>> {
    // Q_0 = 1, Q_{k+1}(u) = u^2 (Q_k(u) - Q_k'(u));
    // posflat^{(k)}(t) = Q_k(1/t) exp(-1/t) for t > 0.
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..MAX_FLAT_DERIV {
            let q = &polys[k];
            let diff = poly_add(q, &poly_scale(&poly_deriv(q), -1.0));
            let mut next = vec![0.0; diff.len() + 2];
            for (i, c) in diff.iter().enumerate() {
                next[i + 2] = *c;
            }
            polys.push(next);
        }
        polys
    })
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|c| c * s).collect()
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// k-th derivative of `exp(-1/(1-t^2))` (zero outside |t| < 1).
pub fn bump_deriv(k: u32, t: f64) -> f64 {
    let u = 1.0 - t * t;
    if u <= FLAT_GUARD {
        return 0.0;
    }
    let e = (-1.0 / u).exp();
    if k == 0 {
        return e;
    }
    let p = &bump_polys()[k as usize];
    poly_eval(p, t) * u.powi(-2 * k as i32) * e
}

/// k-th derivative of the one-sided flat function `exp(-1/t)` (zero for t <= 0).
pub fn posflat_deriv(k: u32, t: f64) -> f64 {
    if t <= FLAT_GUARD {
        return 0.0;
    }
    let e = (-1.0 / t).exp();
    if k == 0 {
        return e;
    }
    let q = &posflat_polys()[k as usize];
    poly_eval(q, 1.0 / t) * e
}

/// Constant folding for unary ops that need no mollifier.
pub(super) fn fold_unary(op: UnaryOp, c: f64) -> Option<f64> {
    let v = match op {
        UnaryOp::Neg => -c,
        UnaryOp::Sin => c.sin(),
        UnaryOp::Cos => c.cos(),
        UnaryOp::Exp => c.exp(),
        UnaryOp::Log => {
            if c <= 0.0 {
                return None;
            }
            c.ln()
        }
        UnaryOp::Sqrt => {
            if c < 0.0 {
                return None;
            }
            c.sqrt()
        }
        UnaryOp::Abs => c.abs(),
        UnaryOp::Bump(k) => bump_deriv(k, c),
        UnaryOp::PosFlat(k) => posflat_deriv(k, c),
        UnaryOp::Rho(_) | UnaryOp::RhoPrim | UnaryOp::IMom(_) => return None,
    };
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

impl Expr {
    /// Evaluate at a binding, resolving mollifier ops against `moll`.
    pub fn eval(&self, b: Binding<'_>, moll: Option<&dyn MollKernel>) -> Result<f64> {
        let v = self.eval_inner(b, moll)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.eval_error("non-finite value", b))
        }
    }

    fn eval_error(&self, reason: &str, b: Binding<'_>) -> Error {
        Error::Eval {
            reason: reason.to_string(),
            subexpr: self.to_string(),
            point: b.x.to_vec(),
            eps: b.eps,
        }
    }

    fn eval_inner(&self, b: Binding<'_>, moll: Option<&dyn MollKernel>) -> Result<f64> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Eps => Ok(b.eps),
            Node::Var(i) => b
                .x
                .get(*i as usize)
                .copied()
                .ok_or_else(|| self.eval_error("variable beyond binding dimension", b)),
            Node::Unary(op, e) => {
                let t = e.eval_inner(b, moll)?;
                match op {
                    UnaryOp::Neg => Ok(-t),
                    UnaryOp::Sin => Ok(t.sin()),
                    UnaryOp::Cos => Ok(t.cos()),
                    UnaryOp::Exp => Ok(t.exp()),
                    UnaryOp::Log => {
                        if t <= 0.0 {
                            Err(self.eval_error("log of non-positive argument", b))
                        } else {
                            Ok(t.ln())
                        }
                    }
                    UnaryOp::Sqrt => {
                        if t < 0.0 {
                            Err(self.eval_error("sqrt of negative argument", b))
                        } else {
                            Ok(t.sqrt())
                        }
                    }
                    UnaryOp::Abs => Ok(t.abs()),
                    UnaryOp::Bump(k) => Ok(bump_deriv(*k, t)),
                    UnaryOp::PosFlat(k) => Ok(posflat_deriv(*k, t)),
                    UnaryOp::Rho(k) => match moll {
                        Some(m) => Ok(m.rho_k(*k, t)),
                        None => Err(self.eval_error("mollifier op without handle", b)),
                    },
                    UnaryOp::RhoPrim => match moll {
                        Some(m) => Ok(m.primitive(t)),
                        None => Err(self.eval_error("mollifier op without handle", b)),
                    },
                    UnaryOp::IMom(j) => match moll {
                        Some(m) => Ok(m.incomplete_moment(*j, t)),
                        None => Err(self.eval_error("mollifier op without handle", b)),
                    },
                }
            }
            Node::Binary(op, lhs, rhs) => match op {
                BinOp::Add => {
                    let mut acc = 0.0;
                    let mut stack = vec![rhs, lhs];
                    let mut ordered = Vec::new();
                    while let Some(e) = stack.pop() {
                        if let Node::Binary(BinOp::Add, a, c) = e.node() {
                            stack.push(c);
                            stack.push(a);
                        } else {
                            ordered.push(e);
                        }
                    }
                    for e in ordered {
                        acc += e.eval_inner(b, moll)?;
                    }
                    Ok(acc)
                }
                BinOp::Sub => {
                    Ok(lhs.eval_inner(b, moll)? - rhs.eval_inner(b, moll)?)
                }
                BinOp::Mul | BinOp::GMul => {
                    // flatten mixed mul/gmul chains left-to-right; a guarded
                    // factor that is exactly zero short-circuits the rest
                    let mut stack = vec![rhs, lhs];
                    let mut ordered = Vec::new();
                    while let Some(e) = stack.pop() {
                        if let Node::Binary(BinOp::Mul | BinOp::GMul, a, c) = e.node() {
                            stack.push(c);
                            stack.push(a);
                        } else {
                            ordered.push(e);
                        }
                    }
                    let guarded = chain_has_gmul(self);
                    let mut acc = 1.0;
                    for e in ordered {
                        let v = e.eval_inner(b, moll)?;
                        if guarded && v == 0.0 {
                            return Ok(0.0);
                        }
                        acc *= v;
                    }
                    Ok(acc)
                }
                BinOp::Div => {
                    let num = lhs.eval_inner(b, moll)?;
                    let den = rhs.eval_inner(b, moll)?;
                    if den == 0.0 {
                        Err(self.eval_error("division by zero", b))
                    } else {
                        Ok(num / den)
                    }
                }
            },
            Node::Pow(base, r) => {
                let v = base.eval_inner(b, moll)?;
                pow_value(v, *r).map_err(|e| match e {
                    Error::Domain(reason) => self.eval_error(&reason, b),
                    other => other,
                })
            }
        }
    }
}

fn chain_has_gmul(e: &Expr) -> bool {
    match e.node() {
        Node::Binary(BinOp::GMul, _, _) => true,
        Node::Binary(BinOp::Mul, a, b) => chain_has_gmul(a) || chain_has_gmul(b),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(e: &Expr, x: &[f64], eps: f64) -> f64 {
        e.eval(Binding::new(x, eps), None).unwrap()
    }

    #[test]
    fn arithmetic_and_support() {
        // (x^2 + eps) at x=2, eps=0.5
        let e = Expr::add(Expr::powi(Expr::var(0), 2), Expr::eps());
        assert_eq!(ev(&e, &[2.0], 0.5), 4.5);

        // eps^-1 * bump((x-eps)/eps) at x=1, eps=0.25: argument 3 is outside support
        let arg = Expr::div(Expr::sub(Expr::var(0), Expr::eps()), Expr::eps());
        let u = Expr::mul(Expr::powi(Expr::eps(), -1), Expr::bump(arg));
        assert_eq!(ev(&u, &[1.0], 0.25), 0.0);
        // at x = eps the bump peaks: value bump(0)/eps = e^{-1}/eps
        let v = ev(&u, &[0.25], 0.25);
        assert!((v - (-1.0f64).exp() / 0.25).abs() < 1e-15);
    }

    #[test]
    fn bump_derivative_vanishes_at_edge_exactly() {
        for k in 0..8 {
            assert_eq!(bump_deriv(k, 1.0), 0.0);
            assert_eq!(bump_deriv(k, -1.0), 0.0);
            assert_eq!(bump_deriv(k, 2.0), 0.0);
        }
        // interior first derivative matches the closed form -2t/(1-t^2)^2 * bump
        let t: f64 = 0.3;
        let u = 1.0 - t * t;
        let expect = -2.0 * t / (u * u) * (-1.0 / u).exp();
        assert!((bump_deriv(1, t) - expect).abs() < 1e-16);
    }

    #[test]
    fn posflat_one_sided() {
        assert_eq!(posflat_deriv(0, -0.5), 0.0);
        assert_eq!(posflat_deriv(3, 0.0), 0.0);
        let t: f64 = 0.5;
        assert!((posflat_deriv(0, t) - (-2.0f64).exp()).abs() < 1e-18);
        // pf'(t) = exp(-1/t)/t^2
        let expect = (-2.0f64).exp() / (t * t);
        assert!((posflat_deriv(1, t) - expect).abs() < 1e-16);
    }

    #[test]
    fn add_chains_associate_bitwise() {
        let (a, b, c) = (
            Expr::constant(0.1),
            Expr::constant(0.2),
            Expr::constant(0.3),
        );
        let l = Expr::make(Node::Binary(
            BinOp::Add,
            Expr::make(Node::Binary(BinOp::Add, a.clone(), b.clone())),
            c.clone(),
        ));
        let r = Expr::make(Node::Binary(
            BinOp::Add,
            a,
            Expr::make(Node::Binary(BinOp::Add, b, c)),
        ));
        assert_eq!(ev(&l, &[], 1.0).to_bits(), ev(&r, &[], 1.0).to_bits());
    }

    #[test]
    fn gmul_masks_singular_right_factor() {
        // gmul(posflat(x), 1/x) at x = 0 must be exactly 0, not NaN
        let e = Expr::gmul(
            Expr::posflat(Expr::var(0)),
            Expr::div(Expr::constant(1.0), Expr::var(0)),
        );
        assert_eq!(ev(&e, &[0.0], 1.0), 0.0);
        assert_eq!(ev(&e, &[-1.0], 1.0), 0.0);
    }
}
