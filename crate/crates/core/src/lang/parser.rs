use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Loc, Result};
use crate::lang::ast::*;
use crate::lang::eval::{eval, resolve_constants};
use crate::lang::lexer::{tokenize, Tok, Token};

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Accept `P`, `S`, `R` operators as primaries.
    csl: bool,
}

impl Parser {
    pub(crate) fn new(src: &str, csl: bool) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            csl,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn error<T>(&self, expected: &str) -> Result<T> {
        Err(Error::syntax(
            self.loc(),
            format!("expected {expected}, found {}", self.peek().describe()),
        ))
    }

    pub(crate) fn expect(&mut self, t: Tok) -> Result<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.error(&t.describe())
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    fn string(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error("quoted name"),
        }
    }

    // ---- expressions -------------------------------------------------

    pub(crate) fn expr(&mut self) -> Result<Expr> {
        self.expr_prec(PREC_ITE)
    }

    /// Parses an expression whose operators all bind at least as tightly as `min`.
    pub(crate) fn expr_prec(&mut self, min: u8) -> Result<Expr> {
        match min {
            PREC_ITE => {
                let c = self.expr_prec(PREC_IMPLIES)?;
                if self.eat(&Tok::Question) {
                    let a = self.expr_prec(PREC_ITE)?;
                    self.expect(Tok::Colon)?;
                    let b = self.expr_prec(PREC_ITE)?;
                    Ok(Expr::Ite(Box::new(c), Box::new(a), Box::new(b)))
                } else {
                    Ok(c)
                }
            }
            PREC_IMPLIES => {
                let l = self.expr_prec(PREC_OR)?;
                if self.eat(&Tok::Implies) {
                    let r = self.expr_prec(PREC_IMPLIES)?;
                    Ok(Expr::binary(BinOp::Implies, l, r))
                } else {
                    Ok(l)
                }
            }
            PREC_OR | PREC_AND | PREC_ADD | PREC_MUL => {
                let mut l = self.expr_prec(min + 1)?;
                loop {
                    let op = match (min, self.peek()) {
                        (PREC_OR, Tok::Or) => BinOp::Or,
                        (PREC_AND, Tok::And) => BinOp::And,
                        (PREC_ADD, Tok::Plus) => BinOp::Add,
                        (PREC_ADD, Tok::Minus) => BinOp::Sub,
                        (PREC_MUL, Tok::Star) => BinOp::Mul,
                        (PREC_MUL, Tok::Slash) => BinOp::Div,
                        _ => return Ok(l),
                    };
                    self.advance();
                    let r = self.expr_prec(min + 1)?;
                    l = Expr::binary(op, l, r);
                }
            }
            PREC_NOT => {
                if self.eat(&Tok::Not) {
                    Ok(Expr::not(self.expr_prec(PREC_NOT)?))
                } else {
                    self.expr_prec(PREC_REL)
                }
            }
            PREC_REL => {
                let l = self.expr_prec(PREC_ADD)?;
                let Some(op) = self.rel_op() else {
                    return Ok(l);
                };
                self.advance();
                let r = self.expr_prec(PREC_ADD)?;
                if self.rel_op().is_some() {
                    return self.error("parentheses around chained comparison");
                }
                Ok(Expr::binary(op, l, r))
            }
            PREC_NEG => {
                if self.eat(&Tok::Minus) {
                    Ok(Expr::Unary(UnOp::Neg, Box::new(self.expr_prec(PREC_NEG)?)))
                } else {
                    self.primary()
                }
            }
            _ => self.primary(),
        }
    }

    fn rel_op(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return None,
        })
    }

    fn primary(&mut self) -> Result<Expr> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Int(i))
            }
            Tok::Real(r) => {
                self.advance();
                Ok(Expr::Real(r))
            }
            Tok::Str(s) if self.csl => {
                self.advance();
                Ok(Expr::Label(s))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.csl {
                    if let Some(op) = self.csl_operator(&name)? {
                        return Ok(Expr::Csl(Box::new(op)));
                    }
                }
                self.advance();
                match name.as_str() {
                    "true" => return Ok(Expr::Bool(true)),
                    "false" => return Ok(Expr::Bool(false)),
                    _ => {}
                }
                if self.peek() == &Tok::LParen {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(Error::syntax(loc, format!("unknown function `{name}`")));
                    };
                    self.advance();
                    let mut args = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(func, args));
                }
                Ok(Expr::Ident(name))
            }
            _ => self.error("expression"),
        }
    }

    // ---- CSL operators -------------------------------------------------

    fn prob_bound_follows(&self) -> bool {
        matches!(
            (self.peek_at(1), self.peek_at(2)),
            (Tok::Eq, Tok::Question) | (Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge, _)
        )
    }

    fn csl_operator(&mut self, name: &str) -> Result<Option<CslOp>> {
        match name {
            "P" if self.prob_bound_follows() => {
                self.advance();
                let bound = self.prob_bound()?;
                self.expect(Tok::LBracket)?;
                let path = self.path()?;
                self.expect(Tok::RBracket)?;
                Ok(Some(CslOp::Prob { bound, path }))
            }
            "S" if self.prob_bound_follows() => {
                self.advance();
                let bound = self.prob_bound()?;
                self.expect(Tok::LBracket)?;
                let arg = self.expr()?;
                self.expect(Tok::RBracket)?;
                Ok(Some(CslOp::Steady { bound, arg }))
            }
            "R" if self.peek_at(1) == &Tok::LBrace => {
                self.advance();
                self.expect(Tok::LBrace)?;
                let name = self.string()?;
                self.expect(Tok::RBrace)?;
                self.expect(Tok::Eq)?;
                self.expect(Tok::Question)?;
                self.expect(Tok::LBracket)?;
                self.expect_keyword("C")?;
                self.expect(Tok::Le)?;
                let horizon = self.expr_prec(PREC_ADD)?;
                self.expect(Tok::RBracket)?;
                Ok(Some(CslOp::Reward { name, horizon }))
            }
            _ => Ok(None),
        }
    }

    fn prob_bound(&mut self) -> Result<Option<ProbBound>> {
        let cmp = match self.advance() {
            Tok::Eq => {
                self.expect(Tok::Question)?;
                return Ok(None);
            }
            Tok::Lt => Cmp::Lt,
            Tok::Le => Cmp::Le,
            Tok::Gt => Cmp::Gt,
            Tok::Ge => Cmp::Ge,
            _ => unreachable!("checked by prob_bound_follows"),
        };
        let value = self.expr_prec(PREC_ADD)?;
        Ok(Some(ProbBound { cmp, value }))
    }

    fn time_bound(&mut self) -> Result<TimeBound> {
        let tb = match self.peek() {
            Tok::Le => {
                self.advance();
                TimeBound::Le(self.expr_prec(PREC_ADD)?)
            }
            Tok::Lt => {
                self.advance();
                TimeBound::Lt(self.expr_prec(PREC_ADD)?)
            }
            Tok::Ge => {
                self.advance();
                TimeBound::Ge(self.expr_prec(PREC_ADD)?)
            }
            Tok::Gt => {
                self.advance();
                TimeBound::Gt(self.expr_prec(PREC_ADD)?)
            }
            Tok::LBracket => {
                self.advance();
                let a = self.expr()?;
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                self.expect(Tok::RBracket)?;
                TimeBound::Range(a, b)
            }
            _ => TimeBound::Unbounded,
        };
        Ok(tb)
    }

    fn path(&mut self) -> Result<PathSyntax> {
        if self.eat_keyword("X") {
            let tb = self.time_bound()?;
            return Ok(PathSyntax::Next(tb, self.expr()?));
        }
        if self.eat_keyword("F") {
            let tb = self.time_bound()?;
            return Ok(PathSyntax::Eventually(tb, self.expr()?));
        }
        let lhs = self.expr()?;
        if !self.eat_keyword("U") {
            return self.error("`U`, or a path formula starting with `F` or `X`");
        }
        let tb = self.time_bound()?;
        Ok(PathSyntax::Until(lhs, tb, self.expr()?))
    }

    // ---- model declarations -----------------------------------------

    fn var_decl(&mut self) -> Result<VarDecl> {
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        self.expect(Tok::LBracket)?;
        let lo = self.expr()?;
        self.expect(Tok::DotDot)?;
        let hi = self.expr()?;
        self.expect(Tok::RBracket)?;
        let init = if self.eat_keyword("init") {
            self.expr()?
        } else {
            lo.clone()
        };
        self.expect(Tok::Semi)?;
        Ok(VarDecl { name, lo, hi, init })
    }

    fn update(&mut self) -> Result<Update> {
        if self.eat_keyword("true") {
            return Ok(Update {
                assignments: Vec::new(),
            });
        }
        let mut assignments = Vec::new();
        loop {
            self.expect(Tok::LParen)?;
            let name = self.ident()?;
            self.expect(Tok::Prime)?;
            self.expect(Tok::Eq)?;
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            assignments.push((name, e));
            if !self.eat(&Tok::And) {
                break;
            }
        }
        Ok(Update { assignments })
    }

    fn action_label(&mut self) -> Result<Option<String>> {
        self.expect(Tok::LBracket)?;
        let a = match self.peek() {
            Tok::Ident(_) => Some(self.ident()?),
            _ => None,
        };
        self.expect(Tok::RBracket)?;
        Ok(a)
    }

    fn command(&mut self) -> Result<Command> {
        let action = self.action_label()?;
        let guard = self.expr()?;
        self.expect(Tok::Arrow)?;
        let mut alternatives = Vec::new();
        loop {
            let rate = self.expr_prec(PREC_IMPLIES)?;
            self.expect(Tok::Colon)?;
            let update = self.update()?;
            alternatives.push(Alternative { rate, update });
            if !self.eat(&Tok::Plus) {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(Command {
            action,
            guard,
            alternatives,
        })
    }
}

/// Source positions of declarations, kept beside the AST for validation messages.
#[derive(Default)]
struct Locs {
    consts: Vec<Loc>,
    globals: Vec<Loc>,
    modules: Vec<Loc>,
    vars: Vec<Vec<Loc>>,
    commands: Vec<Vec<Loc>>,
    labels: Vec<Loc>,
    rewards: Vec<Loc>,
    reward_items: Vec<Vec<Loc>>,
}

/// Parses a model file.
pub fn parse_model(src: &str) -> Result<ModelAst> {
    let mut p = Parser::new(src, false)?;
    let mut ast = ModelAst::default();
    let mut locs = Locs::default();
    if !p.eat_keyword("ctmc") {
        p.eat_keyword("stochastic");
    }
    while !p.at_eof() {
        let loc = p.loc();
        let kw = match p.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return p.error("declaration"),
        };
        match kw.as_str() {
            "const" => {
                p.advance();
                let ty = if p.eat_keyword("int") {
                    ConstType::Int
                } else if p.eat_keyword("double") || p.eat_keyword("rate") {
                    ConstType::Double
                } else if p.eat_keyword("bool") {
                    ConstType::Bool
                } else {
                    ConstType::Int
                };
                let loc = p.loc();
                let name = p.ident()?;
                let value = if p.eat(&Tok::Eq) { Some(p.expr()?) } else { None };
                p.expect(Tok::Semi)?;
                ast.constants.push(ConstDecl { name, ty, value });
                locs.consts.push(loc);
            }
            "global" => {
                p.advance();
                locs.globals.push(p.loc());
                ast.globals.push(p.var_decl()?);
            }
            "module" => {
                p.advance();
                let name = p.ident()?;
                let mut module = Module {
                    name,
                    vars: Vec::new(),
                    commands: Vec::new(),
                };
                let mut vlocs = Vec::new();
                let mut clocs = Vec::new();
                loop {
                    match p.peek() {
                        Tok::Ident(s) if s == "endmodule" => {
                            p.advance();
                            break;
                        }
                        Tok::Ident(_) => {
                            vlocs.push(p.loc());
                            module.vars.push(p.var_decl()?);
                        }
                        Tok::LBracket => {
                            clocs.push(p.loc());
                            module.commands.push(p.command()?);
                        }
                        _ => return p.error("variable declaration, command or `endmodule`"),
                    }
                }
                ast.modules.push(module);
                locs.modules.push(loc);
                locs.vars.push(vlocs);
                locs.commands.push(clocs);
            }
            "label" => {
                p.advance();
                let name = p.string()?;
                p.expect(Tok::Eq)?;
                let expr = p.expr()?;
                p.expect(Tok::Semi)?;
                ast.labels.push(LabelDecl { name, expr });
                locs.labels.push(loc);
            }
            "rewards" => {
                p.advance();
                let name = p.string()?;
                let mut items = Vec::new();
                let mut ilocs = Vec::new();
                while !p.eat_keyword("endrewards") {
                    ilocs.push(p.loc());
                    let kind = if p.peek() == &Tok::LBracket {
                        RewardKind::Transition(p.action_label()?)
                    } else {
                        RewardKind::State
                    };
                    let guard = p.expr_prec(PREC_IMPLIES)?;
                    p.expect(Tok::Colon)?;
                    let value = p.expr()?;
                    p.expect(Tok::Semi)?;
                    items.push(RewardItem { kind, guard, value });
                }
                ast.rewards.push(RewardBlock { name, items });
                locs.rewards.push(loc);
                locs.reward_items.push(ilocs);
            }
            _ => return p.error("`const`, `global`, `module`, `label` or `rewards`"),
        }
    }
    validate(&ast, &locs)?;
    Ok(ast)
}

/// Parses a standalone expression (used by tests and the command line).
pub fn parse_expr_str(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src, false)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error("end of expression");
    }
    Ok(e)
}

fn validate(ast: &ModelAst, locs: &Locs) -> Result<()> {
    // constants and variables share one namespace
    let mut names: BTreeMap<String, Loc> = BTreeMap::new();
    let mut declare = |name: &str, loc: Loc| -> Result<()> {
        if Func::from_name(name).is_some() || matches!(name, "true" | "false") {
            return Err(Error::semantic(loc, format!("`{name}` is reserved")));
        }
        if let Some(prev) = names.insert(name.to_string(), loc) {
            return Err(Error::semantic(
                loc,
                format!("duplicate identifier `{name}` (first declared at {prev})"),
            ));
        }
        Ok(())
    };
    for (c, loc) in ast.constants.iter().zip(&locs.consts) {
        declare(&c.name, *loc)?;
    }
    for (v, loc) in ast.globals.iter().zip(&locs.globals) {
        declare(&v.name, *loc)?;
    }
    for (m, vlocs) in ast.modules.iter().zip(&locs.vars) {
        for (v, loc) in m.vars.iter().zip(vlocs) {
            declare(&v.name, *loc)?;
        }
    }
    unique(ast.modules.iter().map(|m| m.name.as_str()), &locs.modules, "module")?;
    unique(ast.labels.iter().map(|l| l.name.as_str()), &locs.labels, "label")?;
    unique(ast.rewards.iter().map(|r| r.name.as_str()), &locs.rewards, "reward structure")?;

    let const_names: BTreeSet<&str> = ast.constants.iter().map(|c| c.name.as_str()).collect();
    let var_names: BTreeSet<&str> = ast.variables().map(|v| v.name.as_str()).collect();

    let check_idents = |e: &Expr, loc: Loc, allow_vars: bool| -> Result<()> {
        let mut bad = None;
        e.for_each_ident(&mut |n| {
            let ok = const_names.contains(n) || (allow_vars && var_names.contains(n));
            if !ok && bad.is_none() {
                bad = Some(n.to_string());
            }
        });
        match bad {
            None => Ok(()),
            Some(n) if var_names.contains(n.as_str()) => Err(Error::semantic(
                loc,
                format!("variable `{n}` used where only constants are allowed"),
            )),
            Some(n) => Err(Error::semantic(loc, format!("unknown identifier `{n}`"))),
        }
    };

    for (c, loc) in ast.constants.iter().zip(&locs.consts) {
        if let Some(v) = &c.value {
            check_idents(v, *loc, false)?;
        }
    }
    let all_vars: Vec<(&VarDecl, Loc)> = ast
        .globals
        .iter()
        .zip(locs.globals.iter().copied())
        .chain(
            ast.modules
                .iter()
                .zip(&locs.vars)
                .flat_map(|(m, l)| m.vars.iter().zip(l.iter().copied())),
        )
        .collect();
    for (v, loc) in &all_vars {
        check_idents(&v.lo, *loc, false)?;
        check_idents(&v.hi, *loc, false)?;
        check_idents(&v.init, *loc, false)?;
    }

    let globals: BTreeSet<&str> = ast.globals.iter().map(|g| g.name.as_str()).collect();
    for (m, clocs) in ast.modules.iter().zip(&locs.commands) {
        let own: BTreeSet<&str> = m.vars.iter().map(|v| v.name.as_str()).collect();
        for (c, loc) in m.commands.iter().zip(clocs) {
            check_idents(&c.guard, *loc, true)?;
            for alt in &c.alternatives {
                check_idents(&alt.rate, *loc, true)?;
                let mut seen = BTreeSet::new();
                for (name, e) in &alt.update.assignments {
                    check_idents(e, *loc, true)?;
                    if !own.contains(name.as_str()) && !globals.contains(name.as_str()) {
                        let why = if var_names.contains(name.as_str()) {
                            format!("module `{}` cannot update `{name}` owned by another module", m.name)
                        } else {
                            format!("update of unknown variable `{name}`")
                        };
                        return Err(Error::semantic(*loc, why));
                    }
                    if !seen.insert(name.as_str()) {
                        return Err(Error::semantic(*loc, format!("`{name}` assigned twice in one update")));
                    }
                }
            }
        }
    }
    for (l, loc) in ast.labels.iter().zip(&locs.labels) {
        check_idents(&l.expr, *loc, true)?;
    }
    let actions = ast.actions();
    for (r, ilocs) in ast.rewards.iter().zip(&locs.reward_items) {
        for (item, loc) in r.items.iter().zip(ilocs) {
            check_idents(&item.guard, *loc, true)?;
            check_idents(&item.value, *loc, true)?;
            if let RewardKind::Transition(Some(a)) = &item.kind {
                if !actions.contains(&a.as_str()) {
                    return Err(Error::semantic(
                        *loc,
                        format!("action `{a}` in rewards \"{}\" labels no command", r.name),
                    ));
                }
            }
        }
    }

    // acyclicity, plus range checks wherever constants are already known
    let consts = resolve_constants(ast).map_err(|e| match e {
        Error::CyclicConstant(n) => {
            let i = ast.constants.iter().position(|c| c.name == n).unwrap_or(0);
            Error::semantic(locs.consts.get(i).copied().unwrap_or_default(), format!("cyclic constant `{n}`"))
        }
        other => other,
    })?;
    for (v, loc) in &all_vars {
        check_var_range(v, &consts).map_err(|e| match e {
            Error::Domain(msg) => Error::semantic(*loc, msg),
            other => other,
        })?;
    }
    Ok(())
}

fn unique<'a>(names: impl Iterator<Item = &'a str>, locs: &[Loc], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (n, loc) in names.zip(locs) {
        if !seen.insert(n) {
            return Err(Error::semantic(*loc, format!("duplicate {what} `{n}`")));
        }
    }
    Ok(())
}

fn closed(e: &Expr, consts: &BTreeMap<String, Value>) -> bool {
    let mut ok = true;
    e.for_each_ident(&mut |n| ok &= consts.contains_key(n));
    ok
}

/// Checks `lo <= init <= hi` once the bounds are computable. Returns
/// `Error::Domain` on violation.
pub(crate) fn check_var_range(v: &VarDecl, consts: &BTreeMap<String, Value>) -> Result<()> {
    if !(closed(&v.lo, consts) && closed(&v.hi, consts) && closed(&v.init, consts)) {
        return Ok(());
    }
    let int = |e: &Expr| -> Result<i64> {
        match eval(e, consts)? {
            Value::Int(i) => Ok(i),
            other => Err(Error::Type(format!("variable `{}` bound {other} is not an integer", v.name))),
        }
    };
    let (lo, hi, init) = (int(&v.lo)?, int(&v.hi)?, int(&v.init)?);
    if lo > hi {
        return Err(Error::Domain(format!("empty range [{lo}..{hi}] for `{}`", v.name)));
    }
    if !(lo..=hi).contains(&init) {
        return Err(Error::Domain(format!(
            "initial value {init} of `{}` outside its range [{lo}..{hi}]",
            v.name
        )));
    }
    Ok(())
}
