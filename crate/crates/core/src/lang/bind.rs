use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lang::ast::{Expr, ModelAst, Update, Value};
use crate::lang::eval::{coerce, eval, resolve_constants};
use crate::lang::parser::check_var_range;

/// Constant overrides, `name → value`.
pub type Bindings = BTreeMap<String, Value>;

/// Applies constant overrides and folds every constant into the model.
///
/// The result has a literal value on every constant declaration and no
/// constant identifiers left in any expression.
pub fn bind_constants(ast: &ModelAst, overrides: &Bindings) -> Result<ModelAst> {
    let mut out = ast.clone();
    for (name, value) in overrides {
        let decl = out
            .constants
            .iter_mut()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::UnknownConstant(name.clone()))?;
        decl.value = Some(coerce(name, decl.ty, *value)?.to_expr());
    }
    let values = resolve_constants(&out)?;
    for c in &mut out.constants {
        let v = values
            .get(&c.name)
            .ok_or_else(|| Error::UnboundConstant(c.name.clone()))?;
        c.value = Some(v.to_expr());
    }

    let lookup = |n: &str| values.get(n).map(|v| v.to_expr());
    let sub = |e: &mut Expr| *e = e.substitute(&lookup);
    let sub_update = |u: &mut Update| {
        for (_, e) in &mut u.assignments {
            *e = e.substitute(&lookup);
        }
    };
    for v in out.globals.iter_mut().chain(out.modules.iter_mut().flat_map(|m| m.vars.iter_mut())) {
        sub(&mut v.lo);
        sub(&mut v.hi);
        sub(&mut v.init);
    }
    for m in &mut out.modules {
        for c in &mut m.commands {
            sub(&mut c.guard);
            for alt in &mut c.alternatives {
                sub(&mut alt.rate);
                sub_update(&mut alt.update);
            }
        }
    }
    for l in &mut out.labels {
        sub(&mut l.expr);
    }
    for r in &mut out.rewards {
        for item in &mut r.items {
            sub(&mut item.guard);
            sub(&mut item.value);
        }
    }

    for v in out.variables() {
        check_var_range(v, &values)?;
    }
    // state-independent rates can be checked now; the rest are checked per state
    for m in &out.modules {
        for (ci, c) in m.commands.iter().enumerate() {
            for alt in &c.alternatives {
                let mut closed = true;
                alt.rate.for_each_ident(&mut |_| closed = false);
                if closed {
                    let rate = eval(&alt.rate, &values)?
                        .as_f64()
                        .ok_or_else(|| Error::Type(format!("rate `{}` is not numeric", alt.rate)))?;
                    if !(rate > 0.0 && rate.is_finite()) {
                        return Err(Error::NonPositiveRate {
                            module: m.name.clone(),
                            command: ci + 1,
                            rate,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_model;

    const SRC: &str = r#"
        const double r = 0.8;
        const double MTBF = 129600;
        const double MTTR;
        const double lambda = -ln(r)/MTBF;
        module sat
          s : [0..1] init 0;
          [] s=0 -> lambda : (s'=1);
          [] s=1 -> 1/MTTR : (s'=0);
        endmodule
    "#;

    fn bindings(pairs: &[(&str, Value)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn override_recomputes_dependents() {
        let ast = parse_model(SRC).unwrap();
        let bound = bind_constants(&ast, &bindings(&[("r", Value::Real(0.5)), ("MTTR", Value::Real(0.1))])).unwrap();
        let lambda = bound.constant("lambda").unwrap().value.clone().unwrap();
        match lambda {
            Expr::Real(l) => assert!((l - 0.5f64.ln().abs() / 129600.0).abs() < 1e-18),
            other => panic!("{other:?}"),
        }
        // constants are folded into the commands
        assert_eq!(bound.modules[0].commands[1].alternatives[0].rate.to_string(), "1 / 0.1");
    }

    #[test]
    fn unknown_constant() {
        let ast = parse_model(SRC).unwrap();
        let err = bind_constants(&ast, &bindings(&[("zz", Value::Int(1))])).unwrap_err();
        assert_eq!(err.to_string(), "unknown constant \"zz\"");
    }

    #[test]
    fn open_constant_must_be_bound() {
        let ast = parse_model(SRC).unwrap();
        assert!(matches!(bind_constants(&ast, &Bindings::new()), Err(Error::UnboundConstant(n)) if n == "MTTR"));
    }

    #[test]
    fn nonpositive_rate_rejected() {
        let ast = parse_model(SRC).unwrap();
        let err = bind_constants(&ast, &bindings(&[("MTTR", Value::Real(-1.0))])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveRate { command: 2, .. }), "{err}");
        // r = 1 makes lambda zero
        let err = bind_constants(&ast, &bindings(&[("MTTR", Value::Int(24)), ("r", Value::Int(1))])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveRate { command: 1, .. }), "{err}");
    }

    #[test]
    fn int_constant_accepts_integral_real() {
        let ast = parse_model("const int n; module m x : [0..n] init 0; endmodule").unwrap();
        let bound = bind_constants(&ast, &bindings(&[("n", Value::Real(3.0))])).unwrap();
        assert_eq!(bound.modules[0].vars[0].hi, Expr::Int(3));
        assert!(bind_constants(&ast, &bindings(&[("n", Value::Real(2.5))])).is_err());
    }

    #[test]
    fn init_range_checked_after_binding() {
        let ast = parse_model("const int k;\nmodule m x : [0..k] init 3; endmodule").unwrap();
        assert!(bind_constants(&ast, &bindings(&[("k", Value::Int(2))])).is_err());
        assert!(bind_constants(&ast, &bindings(&[("k", Value::Int(3))])).is_ok());
    }
}
