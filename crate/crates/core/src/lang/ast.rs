//! Syntax trees for the modeling language and the property language.
//!
//! Expressions are shared: guards, rates, updates and reward values use the
//! same [`Expr`] type as atomic propositions in properties. Probabilistic,
//! steady-state and reward operators are [`Expr::Csl`] nodes, produced only by
//! the property parser.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    /// Parses a command-line style literal: `true`/`false`, an integer, or a real.
    pub fn parse(text: &str) -> Option<Value> {
        let t = text.trim();
        match t {
            "true" => return Some(Value::Bool(true)),
            "false" => return Some(Value::Bool(false)),
            _ => {}
        }
        if let Ok(i) = t.parse::<i64>() {
            return Some(Value::Int(i));
        }
        t.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Real)
    }

    pub fn to_expr(self) -> Expr {
        match self {
            Value::Int(i) => Expr::Int(i),
            Value::Real(r) => Expr::Real(r),
            Value::Bool(b) => Expr::Bool(b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Implies => "=>",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => PREC_IMPLIES,
            BinOp::Or => PREC_OR,
            BinOp::And => PREC_AND,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => PREC_REL,
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
        }
    }
}

pub(crate) const PREC_ITE: u8 = 0;
pub(crate) const PREC_IMPLIES: u8 = 1;
pub(crate) const PREC_OR: u8 = 2;
pub(crate) const PREC_AND: u8 = 3;
pub(crate) const PREC_NOT: u8 = 4;
pub(crate) const PREC_REL: u8 = 5;
pub(crate) const PREC_ADD: u8 = 6;
pub(crate) const PREC_MUL: u8 = 7;
pub(crate) const PREC_NEG: u8 = 8;
const PREC_PRIMARY: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Ln,
    Log,
    Exp,
    Pow,
    Floor,
    Ceil,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "ln" => Func::Ln,
            "log" => Func::Log,
            "exp" => Func::Exp,
            "pow" => Func::Pow,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Ln => "ln",
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Pow => "pow",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Ident(String),
    /// `"name"`, a reference to a model label (properties only).
    Label(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Csl(Box<CslOp>),
}

impl Expr {
    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ite(..) => PREC_ITE,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(UnOp::Not, _) => PREC_NOT,
            Expr::Unary(UnOp::Neg, _) => PREC_NEG,
            Expr::Int(i) if *i < 0 => PREC_NEG,
            Expr::Real(r) if *r < 0.0 => PREC_NEG,
            _ => PREC_PRIMARY,
        }
    }

    /// Visits every identifier in the expression (not descending into labels).
    pub fn for_each_ident(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Ident(name) => f(name),
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) | Expr::Label(_) => {}
            Expr::Unary(_, e) => e.for_each_ident(f),
            Expr::Binary(_, l, r) => {
                l.for_each_ident(f);
                r.for_each_ident(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_ident(f)),
            Expr::Ite(c, a, b) => {
                c.for_each_ident(f);
                a.for_each_ident(f);
                b.for_each_ident(f);
            }
            Expr::Csl(op) => op.for_each_expr(&mut |e| e.for_each_ident(f)),
        }
    }

    /// Returns a copy with identifiers replaced wherever `lookup` yields an expression.
    pub fn substitute(&self, lookup: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Ident(name) => lookup(name).unwrap_or_else(|| self.clone()),
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) | Expr::Label(_) => self.clone(),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.substitute(lookup))),
            Expr::Binary(op, l, r) => {
                Expr::Binary(*op, Box::new(l.substitute(lookup)), Box::new(r.substitute(lookup)))
            }
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|a| a.substitute(lookup)).collect()),
            Expr::Ite(c, a, b) => Expr::Ite(
                Box::new(c.substitute(lookup)),
                Box::new(a.substitute(lookup)),
                Box::new(b.substitute(lookup)),
            ),
            Expr::Csl(op) => Expr::Csl(Box::new(op.map_exprs(&|e| e.substitute(lookup)))),
        }
    }

    pub fn has_csl(&self) -> bool {
        match self {
            Expr::Csl(_) => true,
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) | Expr::Ident(_) | Expr::Label(_) => false,
            Expr::Unary(_, e) => e.has_csl(),
            Expr::Binary(_, l, r) => l.has_csl() || r.has_csl(),
            Expr::Call(_, args) => args.iter().any(Expr::has_csl),
            Expr::Ite(c, a, b) => c.has_csl() || a.has_csl() || b.has_csl(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let own = self.precedence();
        if own < min {
            write!(f, "(")?;
        }
        match self {
            Expr::Int(i) => write!(f, "{i}")?,
            Expr::Real(r) => write!(f, "{r:?}")?,
            Expr::Bool(b) => write!(f, "{b}")?,
            Expr::Ident(name) => write!(f, "{name}")?,
            Expr::Label(name) => write!(f, "\"{name}\"")?,
            Expr::Unary(UnOp::Not, e) => {
                write!(f, "!")?;
                e.fmt_prec(f, PREC_NOT)?;
            }
            Expr::Unary(UnOp::Neg, e) => {
                write!(f, "-")?;
                e.fmt_prec(f, PREC_NEG)?;
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let (lmin, rmin) = match op {
                    BinOp::Implies => (p + 1, p),
                    _ if p == PREC_REL => (p + 1, p + 1),
                    _ => (p, p + 1),
                };
                l.fmt_prec(f, lmin)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, rmin)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    a.fmt_prec(f, PREC_ITE)?;
                }
                write!(f, ")")?;
            }
            Expr::Ite(c, a, b) => {
                c.fmt_prec(f, PREC_IMPLIES)?;
                write!(f, " ? ")?;
                a.fmt_prec(f, PREC_ITE)?;
                write!(f, " : ")?;
                b.fmt_prec(f, PREC_ITE)?;
            }
            Expr::Csl(op) => write!(f, "{op}")?,
        }
        if own < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, PREC_ITE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Cmp::Lt => value < bound,
            Cmp::Le => value <= bound,
            Cmp::Gt => value > bound,
            Cmp::Ge => value >= bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// `⋈ p` on a P or S operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbBound {
    pub cmp: Cmp,
    pub value: Expr,
}

/// Time bound as written on `F`, `U` or `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeBound {
    Unbounded,
    Le(Expr),
    Lt(Expr),
    Ge(Expr),
    Gt(Expr),
    Range(Expr, Expr),
}

impl fmt::Display for TimeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeBound::Unbounded => Ok(()),
            TimeBound::Le(e) => write!(f, "<={e}"),
            TimeBound::Lt(e) => write!(f, "<{e}"),
            TimeBound::Ge(e) => write!(f, ">={e}"),
            TimeBound::Gt(e) => write!(f, ">{e}"),
            TimeBound::Range(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathSyntax {
    Next(TimeBound, Expr),
    /// `F bound phi`
    Eventually(TimeBound, Expr),
    Until(Expr, TimeBound, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CslOp {
    Prob {
        bound: Option<ProbBound>,
        path: PathSyntax,
    },
    Steady {
        bound: Option<ProbBound>,
        arg: Expr,
    },
    /// `R{"name"}=?[C<=horizon]`
    Reward { name: String, horizon: Expr },
}

impl CslOp {
    fn for_each_expr(&self, f: &mut impl FnMut(&Expr)) {
        let bound_exprs = |b: &TimeBound, f: &mut dyn FnMut(&Expr)| match b {
            TimeBound::Unbounded => {}
            TimeBound::Le(e) | TimeBound::Lt(e) | TimeBound::Ge(e) | TimeBound::Gt(e) => f(e),
            TimeBound::Range(a, b) => {
                f(a);
                f(b)
            }
        };
        match self {
            CslOp::Prob { bound, path } => {
                if let Some(b) = bound {
                    f(&b.value);
                }
                match path {
                    PathSyntax::Next(tb, e) | PathSyntax::Eventually(tb, e) => {
                        bound_exprs(tb, f);
                        f(e);
                    }
                    PathSyntax::Until(l, tb, r) => {
                        f(l);
                        bound_exprs(tb, f);
                        f(r);
                    }
                }
            }
            CslOp::Steady { bound, arg } => {
                if let Some(b) = bound {
                    f(&b.value);
                }
                f(arg);
            }
            CslOp::Reward { horizon, .. } => f(horizon),
        }
    }

    fn map_exprs(&self, f: &impl Fn(&Expr) -> Expr) -> CslOp {
        let map_bound = |b: &TimeBound| match b {
            TimeBound::Unbounded => TimeBound::Unbounded,
            TimeBound::Le(e) => TimeBound::Le(f(e)),
            TimeBound::Lt(e) => TimeBound::Lt(f(e)),
            TimeBound::Ge(e) => TimeBound::Ge(f(e)),
            TimeBound::Gt(e) => TimeBound::Gt(f(e)),
            TimeBound::Range(a, b) => TimeBound::Range(f(a), f(b)),
        };
        let map_pb = |b: &Option<ProbBound>| {
            b.as_ref().map(|b| ProbBound {
                cmp: b.cmp,
                value: f(&b.value),
            })
        };
        match self {
            CslOp::Prob { bound, path } => CslOp::Prob {
                bound: map_pb(bound),
                path: match path {
                    PathSyntax::Next(tb, e) => PathSyntax::Next(map_bound(tb), f(e)),
                    PathSyntax::Eventually(tb, e) => PathSyntax::Eventually(map_bound(tb), f(e)),
                    PathSyntax::Until(l, tb, r) => PathSyntax::Until(f(l), map_bound(tb), f(r)),
                },
            },
            CslOp::Steady { bound, arg } => CslOp::Steady {
                bound: map_pb(bound),
                arg: f(arg),
            },
            CslOp::Reward { name, horizon } => CslOp::Reward {
                name: name.clone(),
                horizon: f(horizon),
            },
        }
    }
}

fn fmt_pbound(b: &Option<ProbBound>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match b {
        None => write!(f, "=?"),
        Some(b) => write!(f, "{}{} ", b.cmp.symbol(), b.value),
    }
}

impl fmt::Display for CslOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CslOp::Prob { bound, path } => {
                write!(f, "P")?;
                fmt_pbound(bound, f)?;
                match path {
                    PathSyntax::Next(tb, e) => write!(f, "[ X{tb} {e} ]"),
                    PathSyntax::Eventually(tb, e) => write!(f, "[ F{tb} {e} ]"),
                    PathSyntax::Until(l, tb, r) => write!(f, "[ {l} U{tb} {r} ]"),
                }
            }
            CslOp::Steady { bound, arg } => {
                write!(f, "S")?;
                fmt_pbound(bound, f)?;
                write!(f, "[ {arg} ]")
            }
            CslOp::Reward { name, horizon } => write!(f, "R{{\"{name}\"}}=?[ C<={horizon} ]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
    Bool,
}

impl ConstType {
    fn keyword(self) -> &'static str {
        match self {
            ConstType::Int => "int",
            ConstType::Double => "double",
            ConstType::Bool => "bool",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: ConstType,
    /// `None` for a constant left open in the file and supplied per run (swept).
    pub value: Option<Expr>,
}

impl ConstDecl {
    pub fn is_swept(&self) -> bool {
        self.value.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub lo: Expr,
    pub hi: Expr,
    pub init: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    /// Simultaneous assignments `(x'=e) & (y'=f)`; empty means `true`.
    pub assignments: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub rate: Expr,
    pub update: Update,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub alternatives: Vec<Alternative>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    State,
    /// `[a] guard : v`; `None` is the unlabelled `[]` form.
    Transition(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub kind: RewardKind,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBlock {
    pub name: String,
    pub items: Vec<RewardItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDecl {
    pub name: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelAst {
    pub constants: Vec<ConstDecl>,
    pub globals: Vec<VarDecl>,
    pub modules: Vec<Module>,
    pub labels: Vec<LabelDecl>,
    pub rewards: Vec<RewardBlock>,
}

impl ModelAst {
    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn reward(&self, name: &str) -> Option<&RewardBlock> {
        self.rewards.iter().find(|r| r.name == name)
    }

    /// All variables in state-vector order: globals first, then module locals.
    pub fn variables(&self) -> impl Iterator<Item = &VarDecl> {
        self.globals
            .iter()
            .chain(self.modules.iter().flat_map(|m| m.vars.iter()))
    }

    pub fn actions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for m in &self.modules {
            for c in &m.commands {
                if let Some(a) = &c.action {
                    if !out.contains(&a.as_str()) {
                        out.push(a);
                    }
                }
            }
        }
        out
    }
}

fn fmt_var(v: &VarDecl, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{} : [{}..{}] init {};", v.name, v.lo, v.hi, v.init)
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignments.is_empty() {
            return write!(f, "true");
        }
        for (i, (name, e)) in self.assignments.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "({name}'={e})")?;
        }
        Ok(())
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} -> ", self.action.as_deref().unwrap_or(""), self.guard)?;
        for (i, alt) in self.alternatives.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            alt.rate.fmt_prec(f, PREC_IMPLIES)?;
            write!(f, " : {}", alt.update)?;
        }
        write!(f, ";")
    }
}

impl fmt::Display for ModelAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ctmc")?;
        if !self.constants.is_empty() {
            writeln!(f)?;
        }
        for c in &self.constants {
            match &c.value {
                Some(v) => writeln!(f, "const {} {} = {};", c.ty.keyword(), c.name, v)?,
                None => writeln!(f, "const {} {};", c.ty.keyword(), c.name)?,
            }
        }
        if !self.globals.is_empty() {
            writeln!(f)?;
        }
        for g in &self.globals {
            write!(f, "global ")?;
            fmt_var(g, f)?;
            writeln!(f)?;
        }
        for m in &self.modules {
            writeln!(f)?;
            writeln!(f, "module {}", m.name)?;
            for v in &m.vars {
                write!(f, "  ")?;
                fmt_var(v, f)?;
                writeln!(f)?;
            }
            if !m.vars.is_empty() && !m.commands.is_empty() {
                writeln!(f)?;
            }
            for c in &m.commands {
                writeln!(f, "  {c}")?;
            }
            writeln!(f, "endmodule")?;
        }
        if !self.labels.is_empty() {
            writeln!(f)?;
        }
        for l in &self.labels {
            writeln!(f, "label \"{}\" = {};", l.name, l.expr)?;
        }
        for r in &self.rewards {
            writeln!(f)?;
            writeln!(f, "rewards \"{}\"", r.name)?;
            for item in &r.items {
                write!(f, "  ")?;
                if let RewardKind::Transition(a) = &item.kind {
                    write!(f, "[{}] ", a.as_deref().unwrap_or(""))?;
                }
                item.guard.fmt_prec(f, PREC_IMPLIES)?;
                writeln!(f, " : {};", item.value)?;
            }
            writeln!(f, "endrewards")?;
        }
        Ok(())
    }
}
