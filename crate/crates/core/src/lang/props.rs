//! CSL properties: typed formula trees lowered from parsed syntax.

use crate::error::{Error, Loc, Result};
use crate::lang::ast::*;
use crate::lang::parser::Parser;

/// Time interval on a path operator; `hi == None` is unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Expr,
    pub hi: Option<Expr>,
}

impl Interval {
    fn from_bound(tb: TimeBound) -> Interval {
        match tb {
            TimeBound::Unbounded => Interval {
                lo: Expr::Int(0),
                hi: None,
            },
            TimeBound::Le(t) | TimeBound::Lt(t) => Interval {
                lo: Expr::Int(0),
                hi: Some(t),
            },
            TimeBound::Ge(t) | TimeBound::Gt(t) => Interval { lo: t, hi: None },
            TimeBound::Range(a, b) => Interval { lo: a, hi: Some(b) },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next {
        interval: Interval,
        arg: CslFormula,
    },
    /// `F I phi` is `true U I phi`.
    Until {
        lhs: CslFormula,
        interval: Interval,
        rhs: CslFormula,
    },
}

/// A CSL state formula.
#[derive(Debug, Clone, PartialEq)]
pub enum CslFormula {
    True,
    False,
    /// Boolean expression over variables and labels.
    Atom(Expr),
    Not(Box<CslFormula>),
    And(Box<CslFormula>, Box<CslFormula>),
    Or(Box<CslFormula>, Box<CslFormula>),
    Prob {
        cmp: Cmp,
        bound: Expr,
        path: Box<PathFormula>,
    },
    Steady {
        cmp: Cmp,
        bound: Expr,
        arg: Box<CslFormula>,
    },
}

/// Numeric query (`=?` forms), possibly wrapped in arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    /// Closed arithmetic over constants.
    Value(Expr),
    Prob(Box<PathFormula>),
    Steady(Box<CslFormula>),
    Reward { name: String, horizon: Expr },
    Neg(Box<NumExpr>),
    Bin(BinOp, Box<NumExpr>, Box<NumExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyKind {
    State(CslFormula),
    Numeric(NumExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub text: String,
    pub kind: PropertyKind,
}

/// A properties file: constant definitions plus queries in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyFile {
    pub constants: Vec<ConstDecl>,
    pub properties: Vec<Property>,
}

fn has_query(e: &Expr) -> bool {
    match e {
        Expr::Csl(op) => match op.as_ref() {
            CslOp::Prob { bound, .. } | CslOp::Steady { bound, .. } => bound.is_none(),
            CslOp::Reward { .. } => true,
        },
        Expr::Unary(_, e) => has_query(e),
        Expr::Binary(_, l, r) => has_query(l) || has_query(r),
        Expr::Call(_, args) => args.iter().any(has_query),
        Expr::Ite(c, a, b) => has_query(c) || has_query(a) || has_query(b),
        _ => false,
    }
}

pub fn lower_state(e: &Expr) -> Result<CslFormula> {
    Ok(match e {
        Expr::Bool(true) => CslFormula::True,
        Expr::Bool(false) => CslFormula::False,
        Expr::Unary(UnOp::Not, inner) => CslFormula::Not(Box::new(lower_state(inner)?)),
        Expr::Binary(BinOp::And, l, r) => CslFormula::And(Box::new(lower_state(l)?), Box::new(lower_state(r)?)),
        Expr::Binary(BinOp::Or, l, r) => CslFormula::Or(Box::new(lower_state(l)?), Box::new(lower_state(r)?)),
        Expr::Binary(BinOp::Implies, l, r) => CslFormula::Or(
            Box::new(CslFormula::Not(Box::new(lower_state(l)?))),
            Box::new(lower_state(r)?),
        ),
        Expr::Csl(op) => match op.as_ref() {
            CslOp::Prob { bound: Some(b), path } => CslFormula::Prob {
                cmp: b.cmp,
                bound: b.value.clone(),
                path: Box::new(lower_path(path)?),
            },
            CslOp::Steady { bound: Some(b), arg } => CslFormula::Steady {
                cmp: b.cmp,
                bound: b.value.clone(),
                arg: Box::new(lower_state(arg)?),
            },
            _ => {
                return Err(Error::Type(format!(
                    "numeric query `{op}` used where a state formula is required"
                )))
            }
        },
        other if !other.has_csl() => CslFormula::Atom(other.clone()),
        other => {
            return Err(Error::Type(format!(
                "`{other}` mixes probabilistic operators into a plain expression"
            )))
        }
    })
}

fn lower_path(p: &PathSyntax) -> Result<PathFormula> {
    Ok(match p.clone() {
        PathSyntax::Next(tb, e) => PathFormula::Next {
            interval: Interval::from_bound(tb),
            arg: lower_state(&e)?,
        },
        PathSyntax::Eventually(tb, e) => PathFormula::Until {
            lhs: CslFormula::True,
            interval: Interval::from_bound(tb),
            rhs: lower_state(&e)?,
        },
        PathSyntax::Until(l, tb, r) => PathFormula::Until {
            lhs: lower_state(&l)?,
            interval: Interval::from_bound(tb),
            rhs: lower_state(&r)?,
        },
    })
}

fn lower_numeric(e: &Expr) -> Result<NumExpr> {
    Ok(match e {
        Expr::Csl(op) => match op.as_ref() {
            CslOp::Prob { bound: None, path } => NumExpr::Prob(Box::new(lower_path(path)?)),
            CslOp::Steady { bound: None, arg } => NumExpr::Steady(Box::new(lower_state(arg)?)),
            CslOp::Reward { name, horizon } => NumExpr::Reward {
                name: name.clone(),
                horizon: horizon.clone(),
            },
            _ => return Err(Error::Type(format!("bounded operator `{op}` used inside arithmetic"))),
        },
        Expr::Unary(UnOp::Neg, inner) => NumExpr::Neg(Box::new(lower_numeric(inner)?)),
        Expr::Binary(op @ (BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div), l, r) => {
            NumExpr::Bin(*op, Box::new(lower_numeric(l)?), Box::new(lower_numeric(r)?))
        }
        other if !other.has_csl() => NumExpr::Value(other.clone()),
        other => return Err(Error::Type(format!("unsupported numeric query form `{other}`"))),
    })
}

/// Types a parsed property expression.
pub fn lower(text: &str, e: &Expr) -> Result<Property> {
    let kind = if has_query(e) {
        PropertyKind::Numeric(lower_numeric(e)?)
    } else {
        PropertyKind::State(lower_state(e)?)
    };
    Ok(Property {
        text: text.to_string(),
        kind,
    })
}

fn shift(e: Error, line: usize) -> Error {
    match e {
        Error::Syntax { loc, msg } => Error::Syntax {
            loc: Loc {
                line: line + loc.line - 1,
                col: loc.col,
            },
            msg,
        },
        other => other,
    }
}

/// Parses a single query, e.g. `P=?[F<=129600 s=5]`.
pub fn parse_property(src: &str) -> Result<Property> {
    let mut p = Parser::new(src, true)?;
    let e = p.expr()?;
    if p.peek() == &crate::lang::lexer::Tok::Semi {
        p.advance();
    }
    if !p.at_eof() {
        return p.error("end of property");
    }
    lower(src.trim().trim_end_matches(';').trim(), &e)
}

/// Parses a properties file: one query per line, `//` comments, and
/// `const` lines that define constants used by the queries.
pub fn parse_properties(src: &str) -> Result<PropertyFile> {
    let mut out = PropertyFile::default();
    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let text = match raw.find("//") {
            Some(k) => &raw[..k],
            None => raw,
        }
        .trim();
        if text.is_empty() {
            continue;
        }
        if text.starts_with("const ") {
            let ast = crate::lang::parser::parse_model(text).map_err(|e| shift(e, line_no))?;
            out.constants.extend(ast.constants);
            continue;
        }
        out.properties.push(parse_property(text).map_err(|e| shift(e, line_no))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(src: &str) -> NumExpr {
        match parse_property(src).unwrap().kind {
            PropertyKind::Numeric(n) => n,
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn bounded_reachability() {
        match numeric("P=?[F<=129600 s=5]") {
            NumExpr::Prob(p) => match *p {
                PathFormula::Until { lhs, interval, rhs } => {
                    assert_eq!(lhs, CslFormula::True);
                    assert_eq!(interval.lo, Expr::Int(0));
                    assert_eq!(interval.hi, Some(Expr::Int(129600)));
                    assert!(matches!(rhs, CslFormula::Atom(_)));
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_until() {
        match numeric("P=?[!p2 U p1]") {
            NumExpr::Prob(p) => match *p {
                PathFormula::Until { lhs, interval, .. } => {
                    assert!(matches!(lhs, CslFormula::Not(_)));
                    assert_eq!(interval.hi, None);
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interval_forms() {
        for src in ["P=?[a U[1,2] b]", "P=?[X[0.5,3] b]", "P=?[F>=3 b]", "P=?[X b]"] {
            assert!(matches!(numeric(src), NumExpr::Prob(_)), "{src}");
        }
    }

    #[test]
    fn reward_ratio() {
        match numeric("(R{\"availability\"}=?[C<=T])/T") {
            NumExpr::Bin(BinOp::Div, l, r) => {
                assert!(matches!(*l, NumExpr::Reward { ref name, .. } if name == "availability"));
                assert_eq!(*r, NumExpr::Value(Expr::Ident("T".into())));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounded_operators_are_state_formulas() {
        let p = parse_property("P>=0.5 [ F<=10 s=5 ] & S<0.1 [ s=3 ]").unwrap();
        match p.kind {
            PropertyKind::State(CslFormula::And(l, r)) => {
                assert!(matches!(*l, CslFormula::Prob { cmp: Cmp::Ge, .. }));
                assert!(matches!(*r, CslFormula::Steady { cmp: Cmp::Lt, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_probability() {
        let p = parse_property("P=?[ F<=5 P>0.9 [ X up ] ]").unwrap();
        assert!(matches!(p.kind, PropertyKind::Numeric(NumExpr::Prob(_))));
    }

    #[test]
    fn query_inside_state_formula_rejected() {
        assert!(parse_property("!P=?[F s=1]").is_err());
    }

    #[test]
    fn properties_file_lines() {
        let src = "// reliability\nconst double T = 129600;\nP=?[F<=T s=5]\n\nR{\"num_replace\"}=?[C<=T] // count\n";
        let file = parse_properties(src).unwrap();
        assert_eq!(file.constants.len(), 1);
        assert_eq!(file.properties.len(), 2);
        assert_eq!(file.properties[1].text, "R{\"num_replace\"}=?[C<=T]");
    }

    #[test]
    fn property_error_reports_file_line() {
        let err = parse_properties("P=?[F<=1 s=5]\n\nP=?[F<=1 s=5\n").unwrap_err();
        match err {
            Error::Syntax { loc, .. } => assert_eq!(loc.line, 3),
            other => panic!("{other:?}"),
        }
    }
}
