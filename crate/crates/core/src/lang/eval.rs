use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lang::ast::{BinOp, ConstType, Expr, Func, ModelAst, UnOp, Value};

/// Name resolution for expression evaluation.
pub trait Env {
    fn lookup(&self, name: &str) -> Option<Value>;

    fn label(&self, name: &str) -> Option<bool> {
        let _ = name;
        None
    }
}

impl Env for BTreeMap<String, Value> {
    fn lookup(&self, name: &str) -> Option<Value> {
        self.get(name).copied()
    }
}

/// Environment with no bindings: only closed expressions evaluate.
pub struct Empty;

impl Env for Empty {
    fn lookup(&self, _: &str) -> Option<Value> {
        None
    }
}

fn type_err(op: &str, a: Value, b: Option<Value>) -> Error {
    match b {
        Some(b) => Error::Type(format!("cannot apply `{op}` to {a} and {b}")),
        None => Error::Type(format!("cannot apply `{op}` to {a}")),
    }
}

fn num(v: Value, op: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| type_err(op, v, None))
}

pub fn eval(e: &Expr, env: &dyn Env) -> Result<Value> {
    match e {
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Real(r) => Ok(Value::Real(*r)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Ident(name) => env
            .lookup(name)
            .ok_or_else(|| Error::Eval(format!("unresolved identifier `{name}`"))),
        Expr::Label(name) => env
            .label(name)
            .map(Value::Bool)
            .ok_or_else(|| Error::UnknownLabel(name.clone())),
        Expr::Unary(UnOp::Not, inner) => match eval(inner, env)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            v => Err(type_err("!", v, None)),
        },
        Expr::Unary(UnOp::Neg, inner) => match eval(inner, env)? {
            Value::Int(i) => Ok(Value::Int(-i)),
            Value::Real(r) => Ok(Value::Real(-r)),
            v => Err(type_err("-", v, None)),
        },
        Expr::Binary(op, l, r) => {
            // short-circuit so guards like `s>0 & 1/s > 0` behave
            match op {
                BinOp::And | BinOp::Or | BinOp::Implies => {
                    let lv = eval(l, env)?;
                    let lb = lv.as_bool().ok_or_else(|| type_err("boolean operator", lv, None))?;
                    let short = match op {
                        BinOp::And if !lb => Some(false),
                        BinOp::Or if lb => Some(true),
                        BinOp::Implies if !lb => Some(true),
                        _ => None,
                    };
                    if let Some(b) = short {
                        return Ok(Value::Bool(b));
                    }
                    let rv = eval(r, env)?;
                    rv.as_bool()
                        .map(Value::Bool)
                        .ok_or_else(|| type_err("boolean operator", rv, None))
                }
                _ => binary(*op, eval(l, env)?, eval(r, env)?),
            }
        }
        Expr::Call(func, args) => {
            let vals = args.iter().map(|a| eval(a, env)).collect::<Result<Vec<_>>>()?;
            call(*func, &vals)
        }
        Expr::Ite(c, a, b) => match eval(c, env)? {
            Value::Bool(true) => eval(a, env),
            Value::Bool(false) => eval(b, env),
            v => Err(type_err("?:", v, None)),
        },
        Expr::Csl(_) => Err(Error::Type(
            "probabilistic operator used inside a plain expression".to_string(),
        )),
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value> {
    use Value::*;
    let sym = match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        _ => "comparison",
    };
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul => match (a, b) {
            (Int(x), Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                };
                r.map(Int).ok_or_else(|| Error::Eval(format!("integer overflow in {x} {sym} {y}")))
            }
            _ => {
                let (x, y) = (num(a, sym)?, num(b, sym)?);
                Ok(Real(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    _ => x * y,
                }))
            }
        },
        BinOp::Div => Ok(Real(num(a, sym)? / num(b, sym)?)),
        BinOp::Eq | BinOp::Ne => {
            let eq = match (a, b) {
                (Bool(x), Bool(y)) => x == y,
                (Int(x), Int(y)) => x == y,
                (Bool(_), _) | (_, Bool(_)) => return Err(type_err("=", a, Some(b))),
                _ => num(a, "=")? == num(b, "=")?,
            };
            Ok(Bool(if op == BinOp::Eq { eq } else { !eq }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Int(x), Int(y)) => x.partial_cmp(&y),
                _ => num(a, "comparison")?.partial_cmp(&num(b, "comparison")?),
            };
            let ord = ord.ok_or_else(|| Error::Eval("comparison with NaN".to_string()))?;
            Ok(Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinOp::And | BinOp::Or | BinOp::Implies => unreachable!("handled by eval"),
    }
}

fn call(func: Func, args: &[Value]) -> Result<Value> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Type(format!("{}() takes {n} argument(s), got {}", func.name(), args.len())))
        }
    };
    let real = |v: Value| num(v, func.name());
    match func {
        Func::Min | Func::Max => {
            if args.is_empty() {
                return Err(Error::Type(format!("{}() needs arguments", func.name())));
            }
            if args.iter().all(|v| matches!(v, Value::Int(_))) {
                let ints = args.iter().map(|v| match v {
                    Value::Int(i) => *i,
                    _ => unreachable!(),
                });
                let r = if func == Func::Min { ints.min() } else { ints.max() };
                Ok(Value::Int(r.unwrap()))
            } else {
                let mut acc = real(args[0])?;
                for v in &args[1..] {
                    let x = real(*v)?;
                    acc = if func == Func::Min { acc.min(x) } else { acc.max(x) };
                }
                Ok(Value::Real(acc))
            }
        }
        Func::Ln => {
            arity(1)?;
            Ok(Value::Real(real(args[0])?.ln()))
        }
        Func::Log => {
            arity(2)?;
            Ok(Value::Real(real(args[0])?.log(real(args[1])?)))
        }
        Func::Exp => {
            arity(1)?;
            Ok(Value::Real(real(args[0])?.exp()))
        }
        Func::Pow => {
            arity(2)?;
            match (args[0], args[1]) {
                (Value::Int(b), Value::Int(e)) if (0..=u32::MAX as i64).contains(&e) => b
                    .checked_pow(e as u32)
                    .map(Value::Int)
                    .ok_or_else(|| Error::Eval(format!("integer overflow in pow({b}, {e})"))),
                (b, e) => Ok(Value::Real(real(b)?.powf(real(e)?))),
            }
        }
        Func::Floor | Func::Ceil => {
            arity(1)?;
            let x = real(args[0])?;
            let r = if func == Func::Floor { x.floor() } else { x.ceil() };
            if !r.is_finite() || r.abs() > i64::MAX as f64 {
                return Err(Error::Eval(format!("{}({x}) is not representable", func.name())));
            }
            Ok(Value::Int(r as i64))
        }
    }
}

/// Coerces a value to a declared constant type.
pub fn coerce(name: &str, ty: ConstType, v: Value) -> Result<Value> {
    match (ty, v) {
        (ConstType::Int, Value::Int(_)) | (ConstType::Double, Value::Real(_)) | (ConstType::Bool, Value::Bool(_)) => {
            Ok(v)
        }
        (ConstType::Double, Value::Int(i)) => Ok(Value::Real(i as f64)),
        (ConstType::Int, Value::Real(r)) if r.fract() == 0.0 && r.abs() < 9.0e15 => Ok(Value::Int(r as i64)),
        _ => Err(Error::Type(format!("constant `{name}` cannot hold {v}"))),
    }
}

/// Evaluates every constant whose definition is closed under the given
/// values. Constants left open (and anything depending on them) are absent
/// from the result.
pub fn resolve_constants(ast: &ModelAst) -> Result<BTreeMap<String, Value>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Todo,
        Active,
        Done,
    }
    let index: BTreeMap<&str, usize> = ast
        .constants
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let mut marks = vec![Mark::Todo; ast.constants.len()];
    let mut values = BTreeMap::new();

    fn visit(
        i: usize,
        ast: &ModelAst,
        index: &BTreeMap<&str, usize>,
        marks: &mut [Mark],
        values: &mut BTreeMap<String, Value>,
    ) -> Result<()> {
        match marks[i] {
            Mark::Done => return Ok(()),
            Mark::Active => return Err(Error::CyclicConstant(ast.constants[i].name.clone())),
            Mark::Todo => {}
        }
        marks[i] = Mark::Active;
        let decl = &ast.constants[i];
        if let Some(expr) = &decl.value {
            let mut deps = Vec::new();
            expr.for_each_ident(&mut |n| deps.push(n.to_string()));
            for d in &deps {
                if let Some(&j) = index.get(d.as_str()) {
                    visit(j, ast, index, marks, values)?;
                }
            }
            if deps.iter().all(|d| values.contains_key(d)) {
                let v = eval(expr, values)?;
                values.insert(decl.name.clone(), coerce(&decl.name, decl.ty, v)?);
            }
        }
        marks[i] = Mark::Done;
        Ok(())
    }

    for i in 0..ast.constants.len() {
        visit(i, ast, &index, &mut marks, &mut values)?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_expr_str;

    fn ev(src: &str) -> Value {
        eval(&parse_expr_str(src).unwrap(), &Empty).unwrap()
    }

    #[test]
    fn integer_and_real_arithmetic() {
        assert_eq!(ev("1 + 2 * 3"), Value::Int(7));
        assert_eq!(ev("7 / 2"), Value::Real(3.5));
        assert_eq!(ev("min(3, 1, 2)"), Value::Int(1));
        assert_eq!(ev("pow(2, 10)"), Value::Int(1024));
        assert_eq!(ev("floor(2.7)"), Value::Int(2));
    }

    #[test]
    fn failure_rate_expression() {
        match ev("-ln(0.8)/129600") {
            Value::Real(r) => assert!((r - 1.721_786_661e-6).abs() < 1e-15),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn booleans_short_circuit() {
        assert_eq!(ev("false & (1/0 > 1)"), Value::Bool(false));
        assert_eq!(ev("true | undefined_name = 3"), Value::Bool(true));
        assert_eq!(ev("false => false"), Value::Bool(true));
        assert_eq!(ev("3 > 2 ? 1 : 0"), Value::Int(1));
    }

    #[test]
    fn type_errors() {
        assert!(eval(&parse_expr_str("true + 1").unwrap(), &Empty).is_err());
        assert!(eval(&parse_expr_str("!3").unwrap(), &Empty).is_err());
    }
}
