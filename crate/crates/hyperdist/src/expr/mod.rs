//! Expression language for omega-parametrized nets of smooth functions.
//!
//! The AST is closed under partial differentiation: anti-derivative and
//! bounded-integral nodes differentiate back into their bodies, and the bump
//! primitive differentiates into `bump_deriv` nodes with exact rational
//! prefactors. Expressions are immutable and cheaply clonable (`Arc`), carry
//! a structural hash plus free-coordinate/omega masks, and serialize to a
//! canonical prefix s-expression with 17-significant-digit constants so that
//! text round-trips are bit-exact.
//!
//! No simplifier beyond constant folding is applied.

pub mod bump;
mod diff;
mod eval;
mod parse;

pub use eval::{BatchBuffers, NoPrimitives, PrimitiveEvaluator};
pub use parse::parse;

use crate::error::ParseError;
use std::fmt;
use std::sync::Arc;

/// Node kinds of the expression AST.
#[derive(Debug, Clone)]
pub enum ExprKind {
    /// Literal real constant.
    Const(f64),
    /// Coordinate `x_{i+1}` (stored zero-based).
    Coord(usize),
    /// The asymptotic parameter.
    Omega,
    Sum(Expression, Expression),
    Product(Expression, Expression),
    Quotient(Expression, Expression),
    /// Integer power; negative exponents are reciprocals.
    IntPow(Expression, i32),
    Sin(Expression),
    Cos(Expression),
    Exp(Expression),
    /// `exp(-1/(1-u^2))` inside (-1,1), 0 outside.
    Bump(Expression),
    /// Exact k-th derivative of the bump, as a single kernel node.
    BumpDeriv(u32, Expression),
    /// `x_axis |-> integral_{lower}^{x_axis} body(t, x~) dt`; the axis
    /// coordinate inside `body` is the integration variable.
    Antideriv { body: Expression, axis: usize, lower: f64 },
    /// Bounded integral along `axis` with constant limits; the axis
    /// coordinate is integrated out, so the node does not depend on it.
    DefInt { body: Expression, axis: usize, lower: f64, upper: f64 },
    /// `ceil(omega^p)`, the mollifier-scale primitive.
    OmegaCeilPow(f64),
}

#[derive(Debug)]
struct Node {
    kind: ExprKind,
    hash: u64,
    /// Bitmask of free coordinates (zero-based).
    coord_mask: u64,
    omega_dep: bool,
    /// Contains antideriv/defint nodes (their evaluation carries the inner
    /// quadrature tolerance).
    has_integral: bool,
}

/// An immutable expression handle.
#[derive(Debug, Clone)]
pub struct Expression(Arc<Node>);

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv(h: u64, v: u64) -> u64 {
    let mut h = h;
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl Expression {
    fn make(kind: ExprKind) -> Self {
        let mut h = FNV_OFFSET;
        let mut mask = 0u64;
        let mut omega = false;
        let mut integral = false;
        {
            let mut tag = |t: u64| h = fnv(h, t);
            match &kind {
                ExprKind::Const(c) => {
                    tag(1);
                    h = fnv(h, c.to_bits());
                }
                ExprKind::Coord(i) => {
                    tag(2);
                    h = fnv(h, *i as u64);
                    mask |= 1u64 << i;
                }
                ExprKind::Omega => {
                    tag(3);
                    omega = true;
                }
                ExprKind::Sum(a, b) | ExprKind::Product(a, b) | ExprKind::Quotient(a, b) => {
                    tag(match &kind {
                        ExprKind::Sum(..) => 4,
                        ExprKind::Product(..) => 5,
                        _ => 6,
                    });
                    h = fnv(h, a.0.hash);
                    h = fnv(h, b.0.hash);
                    mask |= a.0.coord_mask | b.0.coord_mask;
                    omega = a.0.omega_dep || b.0.omega_dep;
                    integral = a.0.has_integral || b.0.has_integral;
                }
                ExprKind::IntPow(a, k) => {
                    tag(7);
                    h = fnv(h, a.0.hash);
                    h = fnv(h, *k as u64);
                    mask |= a.0.coord_mask;
                    omega = a.0.omega_dep;
                    integral = a.0.has_integral;
                }
                ExprKind::Sin(a) | ExprKind::Cos(a) | ExprKind::Exp(a) | ExprKind::Bump(a) => {
                    tag(match &kind {
                        ExprKind::Sin(_) => 8,
                        ExprKind::Cos(_) => 9,
                        ExprKind::Exp(_) => 10,
                        _ => 11,
                    });
                    h = fnv(h, a.0.hash);
                    mask |= a.0.coord_mask;
                    omega = a.0.omega_dep;
                    integral = a.0.has_integral;
                }
                ExprKind::BumpDeriv(k, a) => {
                    tag(12);
                    h = fnv(h, *k as u64);
                    h = fnv(h, a.0.hash);
                    mask |= a.0.coord_mask;
                    omega = a.0.omega_dep;
                    integral = a.0.has_integral;
                }
                ExprKind::Antideriv { body, axis, lower } => {
                    tag(13);
                    h = fnv(h, body.0.hash);
                    h = fnv(h, *axis as u64);
                    h = fnv(h, lower.to_bits());
                    // depends on x_axis (the upper limit) plus the body's
                    // other free coordinates
                    mask |= body.0.coord_mask | (1u64 << axis);
                    omega = body.0.omega_dep;
                    integral = true;
                }
                ExprKind::DefInt { body, axis, lower, upper } => {
                    tag(14);
                    h = fnv(h, body.0.hash);
                    h = fnv(h, *axis as u64);
                    h = fnv(h, lower.to_bits());
                    h = fnv(h, upper.to_bits());
                    // the axis coordinate is bound
                    mask |= body.0.coord_mask & !(1u64 << axis);
                    omega = body.0.omega_dep;
                    integral = true;
                }
                ExprKind::OmegaCeilPow(p) => {
                    tag(15);
                    h = fnv(h, p.to_bits());
                    omega = true;
                }
            }
        }
        Expression(Arc::new(Node {
            kind,
            hash: h,
            coord_mask: mask,
            omega_dep: omega,
            has_integral: integral,
        }))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    /// Does the expression reference coordinate `axis` (zero-based) freely?
    pub fn depends_on(&self, axis: usize) -> bool {
        self.0.coord_mask & (1u64 << axis) != 0
    }

    pub fn depends_on_omega(&self) -> bool {
        self.0.omega_dep
    }

    /// Does the tree contain antideriv or defint nodes?
    pub fn has_integral_nodes(&self) -> bool {
        self.0.has_integral
    }

    /// Largest referenced coordinate index plus one (0 when coordinate-free).
    pub fn min_dimension(&self) -> usize {
        64 - self.0.coord_mask.leading_zeros() as usize
    }

    // ----- constructors (with constant folding) -----

    pub fn constant(c: f64) -> Self {
        Expression::make(ExprKind::Const(c))
    }

    /// Coordinate by zero-based index.
    pub fn coord(i: usize) -> Self {
        assert!(i < 64, "coordinate index out of range");
        Expression::make(ExprKind::Coord(i))
    }

    pub fn omega() -> Self {
        Expression::make(ExprKind::Omega)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.0.kind {
            ExprKind::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn sum(a: Expression, b: Expression) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expression::constant(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expression::make(ExprKind::Sum(a, b)),
        }
    }

    pub fn product(a: Expression, b: Expression) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expression::constant(x * y),
            (Some(0.0), _) | (_, Some(0.0)) => Expression::constant(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            _ => Expression::make(ExprKind::Product(a, b)),
        }
    }

    pub fn quotient(num: Expression, den: Expression) -> Self {
        match (num.as_const(), den.as_const()) {
            (Some(0.0), _) => Expression::constant(0.0),
            (_, Some(1.0)) => num,
            (Some(x), Some(y)) if y != 0.0 => Expression::constant(x / y),
            _ => Expression::make(ExprKind::Quotient(num, den)),
        }
    }

    pub fn int_pow(base: Expression, k: i32) -> Self {
        match k {
            0 => Expression::constant(1.0),
            1 => base,
            _ => match base.as_const() {
                Some(c) if c != 0.0 || k > 0 => Expression::constant(c.powi(k)),
                _ => Expression::make(ExprKind::IntPow(base, k)),
            },
        }
    }

    pub fn sin(a: Expression) -> Self {
        match a.as_const() {
            Some(c) => Expression::constant(c.sin()),
            None => Expression::make(ExprKind::Sin(a)),
        }
    }

    pub fn cos(a: Expression) -> Self {
        match a.as_const() {
            Some(c) => Expression::constant(c.cos()),
            None => Expression::make(ExprKind::Cos(a)),
        }
    }

    pub fn exp(a: Expression) -> Self {
        match a.as_const() {
            Some(c) => Expression::constant(c.exp()),
            None => Expression::make(ExprKind::Exp(a)),
        }
    }

    pub fn bump(a: Expression) -> Self {
        match a.as_const() {
            Some(c) => Expression::constant(bump::bump(c)),
            None => Expression::make(ExprKind::Bump(a)),
        }
    }

    pub fn bump_deriv(k: u32, a: Expression) -> Self {
        if k == 0 {
            return Expression::bump(a);
        }
        match a.as_const() {
            Some(c) => Expression::constant(bump::bump_deriv(k as usize, c)),
            None => Expression::make(ExprKind::BumpDeriv(k, a)),
        }
    }

    pub fn antideriv(body: Expression, axis: usize, lower: f64) -> Self {
        Expression::make(ExprKind::Antideriv { body, axis, lower })
    }

    pub fn defint(body: Expression, axis: usize, lower: f64, upper: f64) -> Self {
        match body.as_const() {
            Some(c) => Expression::constant(c * (upper - lower)),
            None => Expression::make(ExprKind::DefInt { body, axis, lower, upper }),
        }
    }

    pub fn omega_ceil_pow(p: f64) -> Self {
        Expression::make(ExprKind::OmegaCeilPow(p))
    }

    pub fn neg(a: Expression) -> Self {
        Expression::product(Expression::constant(-1.0), a)
    }

    pub fn sub(a: Expression, b: Expression) -> Self {
        Expression::sum(a, Expression::neg(b))
    }

    /// Number of nodes in the tree (diagnostics).
    pub fn node_count(&self) -> usize {
        let mut n = 1;
        self.for_children(|c| n += c.node_count());
        n
    }

    fn for_children(&self, mut f: impl FnMut(&Expression)) {
        match &self.0.kind {
            ExprKind::Sum(a, b) | ExprKind::Product(a, b) | ExprKind::Quotient(a, b) => {
                f(a);
                f(b);
            }
            ExprKind::IntPow(a, _)
            | ExprKind::Sin(a)
            | ExprKind::Cos(a)
            | ExprKind::Exp(a)
            | ExprKind::Bump(a)
            | ExprKind::BumpDeriv(_, a) => f(a),
            ExprKind::Antideriv { body, .. } | ExprKind::DefInt { body, .. } => f(body),
            _ => {}
        }
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.hash != other.0.hash {
            return false;
        }
        match (&self.0.kind, &other.0.kind) {
            (ExprKind::Const(a), ExprKind::Const(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Coord(a), ExprKind::Coord(b)) => a == b,
            (ExprKind::Omega, ExprKind::Omega) => true,
            (ExprKind::Sum(a1, b1), ExprKind::Sum(a2, b2))
            | (ExprKind::Product(a1, b1), ExprKind::Product(a2, b2))
            | (ExprKind::Quotient(a1, b1), ExprKind::Quotient(a2, b2)) => a1 == a2 && b1 == b2,
            (ExprKind::IntPow(a1, k1), ExprKind::IntPow(a2, k2)) => k1 == k2 && a1 == a2,
            (ExprKind::Sin(a1), ExprKind::Sin(a2))
            | (ExprKind::Cos(a1), ExprKind::Cos(a2))
            | (ExprKind::Exp(a1), ExprKind::Exp(a2))
            | (ExprKind::Bump(a1), ExprKind::Bump(a2)) => a1 == a2,
            (ExprKind::BumpDeriv(k1, a1), ExprKind::BumpDeriv(k2, a2)) => k1 == k2 && a1 == a2,
            (
                ExprKind::Antideriv { body: b1, axis: x1, lower: l1 },
                ExprKind::Antideriv { body: b2, axis: x2, lower: l2 },
            ) => x1 == x2 && l1.to_bits() == l2.to_bits() && b1 == b2,
            (
                ExprKind::DefInt { body: b1, axis: x1, lower: l1, upper: u1 },
                ExprKind::DefInt { body: b2, axis: x2, lower: l2, upper: u2 },
            ) => {
                x1 == x2
                    && l1.to_bits() == l2.to_bits()
                    && u1.to_bits() == u2.to_bits()
                    && b1 == b2
            }
            (ExprKind::OmegaCeilPow(a), ExprKind::OmegaCeilPow(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Expression {}

// ----- canonical serialization -----

fn fmt_const(c: f64) -> String {
    // 17 significant digits: enough for bit-exact f64 round trips.
    format!("{:.16e}", c)
}

impl Expression {
    /// Canonical prefix s-expression, e.g. `(* (^ omega 2) (sin (* omega x1)))`.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.write_canonical(&mut s);
        s
    }

    fn write_canonical(&self, out: &mut String) {
        use std::fmt::Write;
        match &self.0.kind {
            ExprKind::Const(c) => out.push_str(&fmt_const(*c)),
            ExprKind::Coord(i) => {
                let _ = write!(out, "x{}", i + 1);
            }
            ExprKind::Omega => out.push_str("omega"),
            ExprKind::Sum(a, b) => Self::binary(out, "+", a, b),
            ExprKind::Product(a, b) => Self::binary(out, "*", a, b),
            ExprKind::Quotient(a, b) => Self::binary(out, "/", a, b),
            ExprKind::IntPow(a, k) => {
                out.push_str("(^ ");
                a.write_canonical(out);
                let _ = write!(out, " {k})");
            }
            ExprKind::Sin(a) => Self::unary(out, "sin", a),
            ExprKind::Cos(a) => Self::unary(out, "cos", a),
            ExprKind::Exp(a) => Self::unary(out, "exp", a),
            ExprKind::Bump(a) => Self::unary(out, "bump", a),
            ExprKind::BumpDeriv(k, a) => {
                let _ = write!(out, "(bump_deriv {k} ");
                a.write_canonical(out);
                out.push(')');
            }
            ExprKind::Antideriv { body, axis, lower } => {
                out.push_str("(antideriv ");
                body.write_canonical(out);
                let _ = write!(out, " {} {})", axis + 1, fmt_const(*lower));
            }
            ExprKind::DefInt { body, axis, lower, upper } => {
                out.push_str("(defint ");
                body.write_canonical(out);
                let _ = write!(out, " {} {} {})", axis + 1, fmt_const(*lower), fmt_const(*upper));
            }
            ExprKind::OmegaCeilPow(p) => {
                let _ = write!(out, "(omega_ceil_pow {})", fmt_const(*p));
            }
        }
    }

    fn binary(out: &mut String, op: &str, a: &Expression, b: &Expression) {
        out.push('(');
        out.push_str(op);
        out.push(' ');
        a.write_canonical(out);
        out.push(' ');
        b.write_canonical(out);
        out.push(')');
    }

    fn unary(out: &mut String, op: &str, a: &Expression) {
        out.push('(');
        out.push_str(op);
        out.push(' ');
        a.write_canonical(out);
        out.push(')');
    }

    /// Parse the canonical s-expression format (the inverse of [`canonical`]).
    ///
    /// [`canonical`]: Expression::canonical
    pub fn from_canonical(src: &str, dimension: usize) -> Result<Expression, ParseError> {
        let mut p = SexprParser { src, pos: 0, dim: dimension };
        let e = p.parse_expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(ParseError::Syntax { pos: p.pos, message: "trailing input".into() });
        }
        Ok(e)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

struct SexprParser<'a> {
    src: &'a str,
    pos: usize,
    dim: usize,
}

impl<'a> SexprParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() {
            let b = self.src.as_bytes()[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let pos = self.pos;
        let a = self.atom();
        a.parse::<f64>().map_err(|_| ParseError::Syntax {
            pos,
            message: format!("expected number, got `{a}`"),
        })
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos;
        let a = self.atom();
        a.parse::<i64>().map_err(|_| ParseError::Syntax {
            pos,
            message: format!("expected integer, got `{a}`"),
        })
    }

    fn axis(&mut self) -> Result<usize, ParseError> {
        let pos = self.pos;
        let v = self.integer()?;
        if v < 1 || v as usize > self.dim {
            return Err(ParseError::CoordinateOutOfRange {
                pos,
                index: v.max(0) as usize,
                dimension: self.dim,
            });
        }
        Ok(v as usize - 1)
    }

    fn expect(&mut self, ch: u8) -> Result<(), ParseError> {
        self.skip_ws();
        if self.pos < self.src.len() && self.src.as_bytes()[self.pos] == ch {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos: self.pos,
                message: format!("expected `{}`", ch as char),
            })
        }
    }

    fn parse_expr(&mut self) -> Result<Expression, ParseError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Err(ParseError::Syntax { pos: self.pos, message: "unexpected end".into() });
        }
        if self.src.as_bytes()[self.pos] == b'(' {
            self.pos += 1;
            self.skip_ws();
            let op_pos = self.pos;
            let op = self.atom().to_string();
            let e = match op.as_str() {
                "+" | "*" | "/" => {
                    let a = self.parse_expr()?;
                    let b = self.parse_expr()?;
                    match op.as_str() {
                        "+" => Expression::make(ExprKind::Sum(a, b)),
                        "*" => Expression::make(ExprKind::Product(a, b)),
                        _ => Expression::make(ExprKind::Quotient(a, b)),
                    }
                }
                "^" => {
                    let a = self.parse_expr()?;
                    self.skip_ws();
                    let k = self.integer()?;
                    Expression::make(ExprKind::IntPow(a, k as i32))
                }
                "sin" | "cos" | "exp" | "bump" => {
                    let a = self.parse_expr()?;
                    match op.as_str() {
                        "sin" => Expression::make(ExprKind::Sin(a)),
                        "cos" => Expression::make(ExprKind::Cos(a)),
                        "exp" => Expression::make(ExprKind::Exp(a)),
                        _ => Expression::make(ExprKind::Bump(a)),
                    }
                }
                "bump_deriv" => {
                    self.skip_ws();
                    let k = self.integer()?;
                    if k < 1 {
                        return Err(ParseError::Syntax {
                            pos: op_pos,
                            message: "bump_deriv order must be >= 1".into(),
                        });
                    }
                    let a = self.parse_expr()?;
                    Expression::make(ExprKind::BumpDeriv(k as u32, a))
                }
                "antideriv" => {
                    let body = self.parse_expr()?;
                    self.skip_ws();
                    let axis = self.axis()?;
                    self.skip_ws();
                    let lower = self.number()?;
                    Expression::make(ExprKind::Antideriv { body, axis, lower })
                }
                "defint" => {
                    let body = self.parse_expr()?;
                    self.skip_ws();
                    let axis = self.axis()?;
                    self.skip_ws();
                    let lower = self.number()?;
                    self.skip_ws();
                    let upper = self.number()?;
                    Expression::make(ExprKind::DefInt { body, axis, lower, upper })
                }
                "omega_ceil_pow" => {
                    self.skip_ws();
                    let p = self.number()?;
                    Expression::make(ExprKind::OmegaCeilPow(p))
                }
                other => {
                    return Err(ParseError::Syntax {
                        pos: op_pos,
                        message: format!("unknown operator `{other}`"),
                    })
                }
            };
            self.expect(b')')?;
            Ok(e)
        } else {
            let pos = self.pos;
            let a = self.atom();
            if a == "omega" {
                return Ok(Expression::omega());
            }
            if let Some(rest) = a.strip_prefix('x') {
                if let Ok(i) = rest.parse::<usize>() {
                    if i < 1 || i > self.dim {
                        return Err(ParseError::CoordinateOutOfRange {
                            pos,
                            index: i,
                            dimension: self.dim,
                        });
                    }
                    return Ok(Expression::coord(i - 1));
                }
            }
            a.parse::<f64>().map(Expression::constant).map_err(|_| ParseError::Syntax {
                pos,
                message: format!("unexpected atom `{a}`"),
            })
        }
    }
}

// ----- domains and net functions -----

/// An open box `(a_1,b_1) x ... x (a_n,b_n)`; entries may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    axes: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(axes: Vec<(f64, f64)>) -> Self {
        assert!(!axes.is_empty(), "domain needs at least one axis");
        for &(a, b) in &axes {
            assert!(a < b, "domain axis must satisfy a < b, got ({a}, {b})");
        }
        DomainBox { axes }
    }

    /// The whole of R^n.
    pub fn all(dimension: usize) -> Self {
        DomainBox::new(vec![(f64::NEG_INFINITY, f64::INFINITY); dimension])
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> (f64, f64) {
        self.axes[i]
    }

    pub fn axes(&self) -> &[(f64, f64)] {
        &self.axes
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.axes.len()
            && x.iter().zip(&self.axes).all(|(&xi, &(a, b))| xi > a && xi < b)
    }

    pub fn is_box_bounded(&self) -> bool {
        self.axes.iter().all(|&(a, b)| a.is_finite() && b.is_finite())
    }
}

/// An expression together with its open-box domain: the model of an element
/// of `*C^inf(Omega)`, evaluable at `(x, omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetFunction {
    expr: Expression,
    domain: DomainBox,
}

impl NetFunction {
    pub fn new(expr: Expression, domain: DomainBox) -> Self {
        assert!(
            expr.min_dimension() <= domain.dimension(),
            "expression references coordinate x{} beyond dimension {}",
            expr.min_dimension(),
            domain.dimension()
        );
        NetFunction { expr, domain }
    }

    pub fn expr(&self) -> &Expression {
        &self.expr
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn with_expr(&self, expr: Expression) -> Self {
        NetFunction::new(expr, self.domain.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_folding() {
        let x = Expression::coord(0);
        assert_eq!(Expression::sum(x.clone(), Expression::constant(0.0)), x);
        assert_eq!(
            Expression::product(Expression::constant(0.0), x.clone()).as_const(),
            Some(0.0)
        );
        assert_eq!(Expression::int_pow(x.clone(), 0).as_const(), Some(1.0));
        assert_eq!(Expression::int_pow(x.clone(), 1), x);
        assert_eq!(
            Expression::sin(Expression::constant(0.5)).as_const(),
            Some(0.5f64.sin())
        );
    }

    #[test]
    fn canonical_round_trip_simple() {
        let e = Expression::product(
            Expression::int_pow(Expression::omega(), 2),
            Expression::sin(Expression::product(Expression::omega(), Expression::coord(0))),
        );
        let s = e.canonical();
        assert_eq!(s, "(* (^ omega 2) (sin (* omega x1)))");
        let back = Expression::from_canonical(&s, 1).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn canonical_round_trip_exotic_nodes() {
        let body = Expression::product(
            Expression::bump_deriv(3, Expression::coord(0)),
            Expression::constant(0.1 + 0.2),
        );
        let e = Expression::sum(
            Expression::antideriv(body.clone(), 0, -0.5),
            Expression::defint(body, 0, -1.0, 1.0),
        );
        let e = Expression::product(e, Expression::omega_ceil_pow(0.5));
        let back = Expression::from_canonical(&e.canonical(), 1).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn coordinate_masks_respect_binding() {
        let body = Expression::product(Expression::coord(0), Expression::coord(1));
        let anti = Expression::antideriv(body.clone(), 0, 0.0);
        assert!(anti.depends_on(0));
        assert!(anti.depends_on(1));
        let def = Expression::defint(body, 0, 0.0, 1.0);
        assert!(!def.depends_on(0), "defint integrates the axis out");
        assert!(def.depends_on(1));
    }

    #[test]
    fn canonical_rejects_out_of_range_coordinate() {
        let err = Expression::from_canonical("(sin x3)", 2).unwrap_err();
        assert!(matches!(err, ParseError::CoordinateOutOfRange { index: 3, dimension: 2, .. }));
    }
}
