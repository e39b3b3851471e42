//! Expression trees over spatial variables `x1..xd` and the smoothing
//! parameter `eps`.
//!
//! Trees are immutable and cheaply shareable (`Arc` nodes); evaluation is a
//! pure function of the tree, the variable binding and the active mollifier,
//! so expressions may be evaluated concurrently without synchronization.
//!
//! The operator set is closed under symbolic differentiation:
//! `bump` and `posflat` carry a derivative order, the mollifier family obeys
//! `Rho' = rho0`, `rho_k' = rho_{k+1}`, and incomplete moments differentiate
//! into `t^j * rho0(t)`. Products created by the chain rule use the guarded
//! product `gmul`, whose left factor masks the right one at exact zeros; this
//! keeps derivatives of plateau-cutoff constructions evaluable on the whole
//! space.
//!
//! Domain tracking is conservative: `log`, `sqrt`, `abs`, a power with a
//! negative or non-integer exponent, or a division whose denominator depends
//! on a spatial variable all mark the tree as pierced (smooth only away from
//! the origin).

mod canon;
mod diff;
mod eval;
mod parse;
mod print;

pub use canon::simplify_zero;
pub use eval::{pow_value, Binding, MollKernel};
pub use parse::parse;

use std::sync::Arc;

use crate::rational::Rat;

/// Unary operators. `Bump(k)` and `PosFlat(k)` are the k-th derivatives of
/// the base bump `exp(-1/(1-t^2))` (zero for |t| >= 1) and of the one-sided
/// flat function `exp(-1/t)` (zero for t <= 0). `Rho(k)`, `RhoPrim` and
/// `IMom(j)` are resolved against the active mollifier at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Bump(u32),
    PosFlat(u32),
    Rho(u32),
    RhoPrim,
    IMom(u32),
}

/// Binary operators. `GMul` is the guarded product: if the left operand
/// evaluates to exactly zero the result is zero and the right operand is not
/// evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    GMul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(u32),
    Eps,
    Unary(UnaryOp, Expr),
    Binary(BinOp, Expr, Expr),
    /// Power with an exact rational exponent.
    Pow(Expr, Rat),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    pierced: bool,
    uses_moll: bool,
    uses_eps: bool,
    var_mask: u32,
}

/// Immutable expression handle.
#[derive(Debug, Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.node() == other.node()
    }
}

impl Expr {
    fn make(node: Node) -> Expr {
        let (pierced, uses_moll, uses_eps, var_mask) = flags_of(&node);
        Expr(Arc::new(Inner {
            node,
            pierced,
            uses_moll,
            uses_eps,
            var_mask,
        }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Conservative flag: not guaranteed smooth at arguments reaching zero.
    pub fn is_pierced(&self) -> bool {
        self.0.pierced
    }

    pub fn uses_mollifier(&self) -> bool {
        self.0.uses_moll
    }

    pub fn uses_eps(&self) -> bool {
        self.0.uses_eps
    }

    pub fn depends_on_space(&self) -> bool {
        self.0.var_mask != 0
    }

    pub fn depends_on_var(&self, axis: u32) -> bool {
        self.0.var_mask & (1 << axis) != 0
    }

    /// Smallest ambient dimension that accommodates every variable used.
    pub fn min_dimension(&self) -> usize {
        (32 - self.0.var_mask.leading_zeros()) as usize
    }

    // ---- constructors ------------------------------------------------

    pub fn constant(c: f64) -> Expr {
        debug_assert!(c.is_finite(), "non-finite constant");
        Expr::make(Node::Const(c))
    }

    pub fn var(i: u32) -> Expr {
        Expr::make(Node::Var(i))
    }

    pub fn eps() -> Expr {
        Expr::make(Node::Eps)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(v)
    }

    /// Sum with trivial folds (`0 + e -> e`, constants folded).
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expr::make(Node::Binary(BinOp::Add, a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (_, Some(0.0)) => a,
            (Some(0.0), _) => Expr::neg(b),
            _ => Expr::make(Node::Binary(BinOp::Sub, a, b)),
        }
    }

    /// Product with the documented trivial folds (`0 * e -> 0`, `1 * e -> e`).
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(0.0), _) | (_, Some(0.0)) => Expr::constant(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            _ => Expr::make(Node::Binary(BinOp::Mul, a, b)),
        }
    }

    /// Guarded product; see [`BinOp::GMul`].
    pub fn gmul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(0.0), _) | (_, Some(0.0)) => Expr::constant(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            _ => Expr::make(Node::Binary(BinOp::GMul, a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_const(1.0) {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if y != 0.0 {
                return Expr::constant(x / y);
            }
        }
        Expr::make(Node::Binary(BinOp::Div, a, b))
    }

    pub fn neg(e: Expr) -> Expr {
        match e.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Unary(UnaryOp::Neg, inner) => inner.clone(),
            _ => Expr::make(Node::Unary(UnaryOp::Neg, e)),
        }
    }

    pub fn pow(base: Expr, r: Rat) -> Expr {
        if r == Rat::ONE {
            return base;
        }
        if let Some(c) = base.as_const() {
            if let Ok(v) = pow_value(c, r) {
                return Expr::constant(v);
            }
        }
        Expr::make(Node::Pow(base, r))
    }

    pub fn powi(base: Expr, n: i64) -> Expr {
        Expr::pow(base, Rat::integer(n))
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(e);
        }
        if let Some(c) = e.as_const() {
            if let Some(v) = eval::fold_unary(op, c) {
                return Expr::constant(v);
            }
        }
        Expr::make(Node::Unary(op, e))
    }

    pub fn sin(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Sin, e)
    }
    pub fn cos(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Cos, e)
    }
    pub fn exp(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Exp, e)
    }
    pub fn log(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Log, e)
    }
    pub fn sqrt(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Sqrt, e)
    }
    pub fn abs(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Abs, e)
    }
    pub fn bump(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Bump(0), e)
    }
    pub fn posflat(e: Expr) -> Expr {
        Expr::unary(UnaryOp::PosFlat(0), e)
    }
    pub fn rho(k: u32, e: Expr) -> Expr {
        Expr::unary(UnaryOp::Rho(k), e)
    }
    pub fn rho_prim(e: Expr) -> Expr {
        Expr::unary(UnaryOp::RhoPrim, e)
    }
    pub fn imom(j: u32, e: Expr) -> Expr {
        Expr::unary(UnaryOp::IMom(j), e)
    }

    /// Replace `x_axis` by `repl` everywhere.
    pub fn substitute(&self, axis: u32, repl: &Expr) -> Expr {
        self.substitute_map(&|i| {
            if i == axis {
                Some(repl.clone())
            } else {
                None
            }
        })
    }

    /// Replace each spatial variable by the expression the map returns.
    pub fn substitute_map(&self, map: &dyn Fn(u32) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Eps => self.clone(),
            Node::Var(i) => map(*i).unwrap_or_else(|| self.clone()),
            Node::Unary(op, e) => Expr::unary(*op, e.substitute_map(map)),
            Node::Binary(op, a, b) => {
                let a2 = a.substitute_map(map);
                let b2 = b.substitute_map(map);
                match op {
                    BinOp::Add => Expr::add(a2, b2),
                    BinOp::Sub => Expr::sub(a2, b2),
                    BinOp::Mul => Expr::mul(a2, b2),
                    BinOp::GMul => Expr::gmul(a2, b2),
                    BinOp::Div => Expr::div(a2, b2),
                }
            }
            Node::Pow(base, r) => Expr::pow(base.substitute_map(map), *r),
        }
    }

    /// Canonical-form structural equivalence (`gmul` compares like `mul`).
    pub fn equivalent(&self, other: &Expr, dim: usize) -> bool {
        simplify_zero(&Expr::sub(self.clone(), other.clone()), dim)
    }
}

fn flags_of(node: &Node) -> (bool, bool, bool, u32) {
    match node {
        Node::Const(_) => (false, false, false, 0),
        Node::Var(i) => {
            assert!(*i < 32, "variable index out of range");
            (false, false, false, 1 << i)
        }
        Node::Eps => (false, false, true, 0),
        Node::Unary(op, e) => {
            let spatial = e.depends_on_space();
            let pierced = e.is_pierced()
                || (spatial && matches!(op, UnaryOp::Log | UnaryOp::Sqrt | UnaryOp::Abs));
            let moll = e.uses_mollifier()
                || matches!(op, UnaryOp::Rho(_) | UnaryOp::RhoPrim | UnaryOp::IMom(_));
            (pierced, moll, e.uses_eps(), e.0.var_mask)
        }
        Node::Binary(op, a, b) => {
            let pierced = a.is_pierced()
                || b.is_pierced()
                || (*op == BinOp::Div && b.depends_on_space());
            (
                pierced,
                a.uses_mollifier() || b.uses_mollifier(),
                a.uses_eps() || b.uses_eps(),
                a.0.var_mask | b.0.var_mask,
            )
        }
        Node::Pow(base, r) => {
            let pierced =
                base.is_pierced() || (base.depends_on_space() && (!r.is_integer() || r.num() < 0));
            (
                pierced,
                base.uses_mollifier(),
                base.uses_eps(),
                base.0.var_mask,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pierced_flag_follows_ops() {
        let x = Expr::var(0);
        assert!(!Expr::mul(x.clone(), x.clone()).is_pierced());
        assert!(Expr::abs(x.clone()).is_pierced());
        assert!(Expr::pow(x.clone(), Rat::new(1, 2)).is_pierced());
        assert!(Expr::powi(x.clone(), -1).is_pierced());
        // eps^-1 is smooth in x: eps never vanishes
        assert!(!Expr::powi(Expr::eps(), -1).is_pierced());
        assert!(!Expr::div(x.clone(), Expr::eps()).is_pierced());
        assert!(Expr::div(Expr::constant(1.0), x).is_pierced());
    }

    #[test]
    fn trivial_folds() {
        let x = Expr::var(0);
        assert_eq!(Expr::add(Expr::constant(0.0), x.clone()), x);
        assert_eq!(Expr::mul(Expr::constant(0.0), x.clone()).as_const(), Some(0.0));
        assert_eq!(Expr::pow(x.clone(), Rat::ONE), x);
        assert_eq!(Expr::neg(Expr::constant(2.0)).as_const(), Some(-2.0));
    }
}
