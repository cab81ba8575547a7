//! CSL model checking over an explicit CTMC.

use std::cell::Cell;
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::ctmc::{BuiltModel, Ctmc};
use crate::error::{Error, Result};
use crate::fmt::format_sig;
use crate::lang::ast::{BinOp, ConstDecl, Expr, Value};
use crate::lang::eval::{coerce, eval};
use crate::lang::props::{CslFormula, Interval, NumExpr, PathFormula, Property, PropertyKind};
use crate::lang::Bindings;
use crate::numerics::{
    cumulative_reward_vector, solve_reachability, steady_state, transient_backward, NumericOptions, UniformizedChain,
};

/// Result of one property.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Boolean formula: satisfaction per state.
    Satisfaction(Vec<bool>),
    /// `=?` query: value per state.
    Numeric(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub text: String,
    pub outcome: Outcome,
    pub initial_state: usize,
    pub elapsed: Duration,
    pub tolerance: f64,
}

impl QueryResult {
    /// Value in the initial state; Boolean results map to 1 or 0.
    pub fn value(&self) -> f64 {
        match &self.outcome {
            Outcome::Numeric(v) => v[self.initial_state],
            Outcome::Satisfaction(b) => f64::from(u8::from(b[self.initial_state])),
        }
    }

    pub fn holds(&self) -> Option<bool> {
        match &self.outcome {
            Outcome::Satisfaction(b) => Some(b[self.initial_state]),
            Outcome::Numeric(_) => None,
        }
    }

    /// The initial-state value as printed: 6 significant digits unless `full`.
    pub fn value_text(&self, full: bool) -> String {
        match self.holds() {
            Some(b) => b.to_string(),
            None => format_sig(self.value(), if full { 17 } else { 6 }),
        }
    }

    pub fn render(&self, full: bool) -> String {
        format!("{}: {}", self.text, self.value_text(full))
    }
}

/// CSV table `query,value,tolerance,seconds`.
pub fn results_csv(results: &[QueryResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "value", "tolerance", "seconds"])?;
    for r in results {
        w.write_record([
            r.text.clone(),
            r.value_text(true),
            format_sig(r.tolerance, 3),
            format!("{:.6}", r.elapsed.as_secs_f64()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Evaluates properties against a built model.
pub struct Checker<'a> {
    model: &'a BuiltModel,
    consts: Bindings,
    opts: NumericOptions,
    tolerance: Cell<f64>,
}

impl<'a> Checker<'a> {
    pub fn new(model: &'a BuiltModel, opts: NumericOptions) -> Self {
        Checker {
            model,
            consts: model.ctmc.constants().clone(),
            opts,
            tolerance: Cell::new(0.0),
        }
    }

    /// Adds property-file constants; `overrides` supplies values for open ones.
    pub fn with_constants(mut self, decls: &[ConstDecl], overrides: &Bindings) -> Result<Self> {
        for d in decls {
            let v = match (overrides.get(&d.name), &d.value) {
                (Some(v), _) => *v,
                (None, Some(e)) => eval(e, &self.consts)?,
                (None, None) => return Err(Error::UnboundConstant(d.name.clone())),
            };
            self.consts.insert(d.name.clone(), coerce(&d.name, d.ty, v)?);
        }
        Ok(self)
    }

    fn ctmc(&self) -> &Ctmc {
        &self.model.ctmc
    }

    fn used(&self, tol: f64) {
        self.tolerance.set(self.tolerance.get().max(tol));
    }

    pub fn check(&self, prop: &Property) -> Result<QueryResult> {
        let start = Instant::now();
        self.tolerance.set(0.0);
        let outcome = match &prop.kind {
            PropertyKind::State(phi) => Outcome::Satisfaction(self.sat_states(phi)?),
            PropertyKind::Numeric(e) => Outcome::Numeric(self.numeric(e)?),
        };
        Ok(QueryResult {
            text: prop.text.clone(),
            outcome,
            initial_state: self.ctmc().initial_state(),
            elapsed: start.elapsed(),
            tolerance: self.tolerance.get(),
        })
    }

    fn scalar(&self, e: &Expr, what: &str) -> Result<f64> {
        eval(e, &self.consts)?
            .as_f64()
            .ok_or_else(|| Error::Type(format!("{what} `{e}` is not numeric")))
    }

    fn bound(&self, e: &Expr) -> Result<f64> {
        let p = self.scalar(e, "probability bound")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability bound {p} outside [0, 1]")));
        }
        Ok(p)
    }

    fn interval(&self, i: &Interval) -> Result<(f64, Option<f64>)> {
        let lo = self.scalar(&i.lo, "time bound")?;
        let hi = i.hi.as_ref().map(|h| self.scalar(h, "time bound")).transpose()?;
        if !(lo >= 0.0 && lo.is_finite()) {
            return Err(Error::Domain(format!("time bound {lo} must be finite and nonnegative")));
        }
        if let Some(h) = hi {
            if h.is_nan() || h < lo {
                return Err(Error::Domain(format!("empty time interval [{lo}, {h}]")));
            }
        }
        Ok((lo, hi))
    }

    /// States satisfying a state formula.
    pub fn sat_states(&self, phi: &CslFormula) -> Result<Vec<bool>> {
        let n = self.ctmc().num_states();
        Ok(match phi {
            CslFormula::True => vec![true; n],
            CslFormula::False => vec![false; n],
            CslFormula::Atom(e) => self.ctmc().satisfying(e, &self.consts)?,
            CslFormula::Not(a) => self.sat_states(a)?.into_iter().map(|b| !b).collect(),
            CslFormula::And(a, b) => zip_with(self.sat_states(a)?, self.sat_states(b)?, |x, y| x && y),
            CslFormula::Or(a, b) => zip_with(self.sat_states(a)?, self.sat_states(b)?, |x, y| x || y),
            CslFormula::Prob { cmp, bound, path } => {
                let p = self.bound(bound)?;
                self.path_probabilities(path)?
                    .into_iter()
                    .map(|v| cmp.holds(v, p))
                    .collect()
            }
            CslFormula::Steady { cmp, bound, arg } => {
                let p = self.bound(bound)?;
                vec![cmp.holds(self.steady_query(arg)?, p); n]
            }
        })
    }

    pub fn path_probabilities(&self, path: &PathFormula) -> Result<Vec<f64>> {
        match path {
            PathFormula::Next { interval, arg } => {
                let sat = self.sat_states(arg)?;
                let (a, b) = self.interval(interval)?;
                Ok(prob_next(self.ctmc(), &sat, a, b))
            }
            PathFormula::Until { lhs, interval, rhs } => {
                let (s1, s2) = (self.sat_states(lhs)?, self.sat_states(rhs)?);
                let (a, b) = self.interval(interval)?;
                self.prob_until(&s1, &s2, a, b)
            }
        }
    }

    /// Per-state probability of `phi1 U[a,b] phi2`; `b = None` is unbounded.
    pub fn prob_until(&self, sat1: &[bool], sat2: &[bool], a: f64, b: Option<f64>) -> Result<Vec<f64>> {
        let c = self.ctmc();
        let n = c.num_states();
        let reach = match b {
            None => {
                self.used(self.opts.tolerance);
                unbounded_until(c, sat1, sat2, &self.opts)?
            }
            Some(b) => {
                self.used(self.opts.eps);
                let absorbing: Vec<bool> = (0..n).map(|s| sat2[s] || !sat1[s]).collect();
                let target: Vec<f64> = sat2.iter().map(|&x| f64::from(u8::from(x))).collect();
                let u = UniformizedChain::with_absorbing(c, &absorbing);
                let v = transient_backward(&u, &target, b - a, &self.opts)?;
                if a == 0.0 {
                    return Ok(clamp(v));
                }
                v
            }
        };
        if a == 0.0 {
            return Ok(clamp(reach));
        }
        // stay in phi1 over [0, a], then satisfy the until from there
        self.used(self.opts.eps);
        let absorbing: Vec<bool> = sat1.iter().map(|&x| !x).collect();
        let u = UniformizedChain::with_absorbing(c, &absorbing);
        let start: Vec<f64> = (0..n).map(|s| if sat1[s] { reach[s] } else { 0.0 }).collect();
        Ok(clamp(transient_backward(&u, &start, a, &self.opts)?))
    }

    /// Long-run probability of being in a `phi` state.
    pub fn steady_query(&self, phi: &CslFormula) -> Result<f64> {
        let sat = self.sat_states(phi)?;
        self.used(self.opts.tolerance);
        let pi = steady_state(self.ctmc(), &self.opts)?;
        Ok(pi.iter().zip(&sat).filter(|(_, &s)| s).map(|(p, _)| p).sum())
    }

    /// Expected reward accumulated over `[0, t]`, per start state.
    pub fn reward_query(&self, name: &str, t: f64) -> Result<Vec<f64>> {
        let r = self.model.reward(name)?;
        self.used(self.opts.eps);
        cumulative_reward_vector(self.ctmc(), r, t, &self.opts)
    }

    fn numeric(&self, e: &NumExpr) -> Result<Vec<f64>> {
        let n = self.ctmc().num_states();
        Ok(match e {
            NumExpr::Value(x) => vec![self.scalar(x, "expression")?; n],
            NumExpr::Prob(path) => self.path_probabilities(path)?,
            NumExpr::Steady(phi) => vec![self.steady_query(phi)?; n],
            NumExpr::Reward { name, horizon } => {
                let t = self.scalar(horizon, "reward horizon")?;
                self.reward_query(name, t)?
            }
            NumExpr::Neg(x) => self.numeric(x)?.into_iter().map(|v| -v).collect(),
            NumExpr::Bin(op, l, r) => {
                let (l, r) = (self.numeric(l)?, self.numeric(r)?);
                let f: fn(f64, f64) -> f64 = match op {
                    BinOp::Add => |x, y| x + y,
                    BinOp::Sub => |x, y| x - y,
                    BinOp::Mul => |x, y| x * y,
                    BinOp::Div => |x, y| x / y,
                    other => return Err(Error::Type(format!("operator {other:?} in numeric query"))),
                };
                l.into_iter().zip(r).map(|(x, y)| f(x, y)).collect()
            }
        })
    }

    pub fn constants(&self) -> &BTreeMap<String, Value> {
        &self.consts
    }
}

fn zip_with(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

fn clamp(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// `P(X_I phi)` in closed form: jump into `phi` with the first jump time in `[a, b]`.
pub fn prob_next(c: &Ctmc, sat: &[bool], a: f64, b: Option<f64>) -> Vec<f64> {
    (0..c.num_states())
        .map(|s| {
            let e = c.exit_rate(s);
            if e == 0.0 {
                return 0.0;
            }
            let into: f64 = c.rate_matrix().row(s).filter(|&(t, _)| sat[t]).map(|(_, r)| r).sum();
            let window = (-e * a).exp() - b.map_or(0.0, |b| (-e * b).exp());
            into / e * window
        })
        .collect()
}

/// States that can reach `target` moving only through `through` states.
fn backward_reach(c: &Ctmc, through: &[bool], target: &[bool]) -> Vec<bool> {
    let n = c.num_states();
    let pred = c.rate_matrix().transpose();
    let mut seen = target.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for (s, _) in pred.row(t) {
            if !seen[s] && through[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

fn unbounded_until(c: &Ctmc, sat1: &[bool], sat2: &[bool], opts: &NumericOptions) -> Result<Vec<f64>> {
    let n = c.num_states();
    let only1: Vec<bool> = (0..n).map(|s| sat1[s] && !sat2[s]).collect();
    let some = backward_reach(c, &only1, sat2);
    let no: Vec<bool> = some.iter().map(|&x| !x).collect();
    let may_fail = backward_reach(c, &only1, &no);
    let yes: Vec<bool> = may_fail.iter().map(|&x| !x).collect();
    let maybe: Vec<bool> = (0..n).map(|s| !yes[s] && !no[s]).collect();
    solve_reachability(c, &maybe, &yes, opts)
}

/// Per-property outputs as text lines.
pub fn render_all(results: &[QueryResult], full: bool) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{}", r.render(full));
    }
    out
}
