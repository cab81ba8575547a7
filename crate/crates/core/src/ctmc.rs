//! Explicit continuous-time Markov chains built from guarded-command models.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::fmt::format_sig;
use crate::lang::ast::{Expr, ModelAst, RewardKind, Update, Value};
use crate::lang::bind::{bind_constants, Bindings};
use crate::lang::eval::{eval, resolve_constants, Env};

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triples; duplicates are summed.
    pub fn from_triples(n: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (r, c, v) in triples {
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_start.push(cols.len());
        }
        SparseMatrix {
            n,
            row_start,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_start[r]..self.row_start[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_start[r]..self.row_start[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    /// `out = u · M`
    pub fn left_mul(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (r, &ur) in u.iter().enumerate() {
            if ur == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += ur * v;
            }
        }
    }

    /// `out = M · v`
    pub fn right_mul(&self, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, x)| x * v[c]).sum();
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix::from_triples(
            self.n,
            (0..self.n).flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v))),
        )
    }
}

/// One outgoing rate entry of a state, tagged with its action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub target: usize,
    pub rate: f64,
    /// Index into [`Ctmc::actions`]; `None` for unlabelled commands.
    pub action: Option<usize>,
}

/// Nonnegative rewards on states (per hour) and transitions (per firing).
#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    pub state: Vec<f64>,
    /// Aligned with [`Ctmc::all_transitions`].
    pub transition: Vec<f64>,
}

impl RewardStructure {
    pub fn has_transition_rewards(&self) -> bool {
        self.transition.iter().any(|&v| v != 0.0)
    }

    /// Reward rate per state: state reward plus Σ rate × transition reward.
    pub fn rate_vector(&self, c: &Ctmc) -> Vec<f64> {
        (0..c.num_states())
            .map(|s| {
                let base = c.row_start[s];
                self.state[s]
                    + c.transitions(s)
                        .iter()
                        .enumerate()
                        .map(|(k, t)| t.rate * self.transition[base + k])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn transition_reward(&self, c: &Ctmc, source: usize, target: usize, action: Option<&str>) -> f64 {
        let base = c.row_start[source];
        c.transitions(source)
            .iter()
            .enumerate()
            .filter(|(_, t)| t.target == target && t.action.map(|a| c.actions[a].as_str()) == action)
            .map(|(k, _)| self.transition[base + k])
            .sum()
    }
}

/// Explicit CTMC: states, initial state, rate matrix and labelling.
#[derive(Debug, Clone)]
pub struct Ctmc {
    var_names: Vec<String>,
    /// Flattened valuations, `var_names.len()` values per state.
    valuations: Vec<i64>,
    n: usize,
    init: usize,
    row_start: Vec<usize>,
    transitions: Vec<Transition>,
    actions: Vec<String>,
    rates: SparseMatrix,
    exit: Vec<f64>,
    labels: BTreeMap<String, Expr>,
    constants: BTreeMap<String, Value>,
}

/// A built model: the chain plus its compiled reward structures.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub ctmc: Ctmc,
    pub rewards: Vec<RewardStructure>,
}

impl BuiltModel {
    pub fn reward(&self, name: &str) -> Result<&RewardStructure> {
        self.rewards
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownReward(name.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_states: 10_000_000,
        }
    }
}

struct StateEnv<'a> {
    index: &'a HashMap<String, usize>,
    vals: &'a [i64],
    consts: Option<&'a BTreeMap<String, Value>>,
    labels: Option<&'a BTreeMap<String, Expr>>,
}

impl Env for StateEnv<'_> {
    fn lookup(&self, name: &str) -> Option<Value> {
        match self.index.get(name) {
            Some(&i) => Some(Value::Int(self.vals[i])),
            None => self.consts.and_then(|c| c.get(name).copied()),
        }
    }

    fn label(&self, name: &str) -> Option<bool> {
        let expr = self.labels?.get(name)?;
        let inner = StateEnv {
            index: self.index,
            vals: self.vals,
            consts: self.consts,
            labels: None,
        };
        eval(expr, &inner).ok().and_then(Value::as_bool)
    }
}

fn as_bool(v: Value, what: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Type(format!("{what} evaluates to {v}, expected a boolean")))
}

fn as_num(v: Value, what: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Type(format!("{what} evaluates to {v}, expected a number")))
}

struct VarInfo {
    name: String,
    lo: i64,
    hi: i64,
}

struct Enabled<'a> {
    rate: f64,
    update: &'a Update,
    module: usize,
    command: usize,
}

/// Explores the reachable state space breadth-first from the initial valuation.
pub fn build_state_space(ast: &ModelAst) -> Result<BuiltModel> {
    build_state_space_with(ast, &Bindings::new(), BuildOptions::default())
}

pub fn build_state_space_with(ast: &ModelAst, bindings: &Bindings, opts: BuildOptions) -> Result<BuiltModel> {
    let ast = bind_constants(ast, bindings)?;
    let consts = resolve_constants(&ast)?;

    let mut vars = Vec::new();
    let mut init = Vec::new();
    for v in ast.variables() {
        let int = |e: &Expr| -> Result<i64> {
            match eval(e, &consts)? {
                Value::Int(i) => Ok(i),
                other => Err(Error::Type(format!("bound of `{}` is {other}, not an integer", v.name))),
            }
        };
        vars.push(VarInfo {
            name: v.name.clone(),
            lo: int(&v.lo)?,
            hi: int(&v.hi)?,
        });
        init.push(int(&v.init)?);
    }
    let index: HashMap<String, usize> = vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    let nvars = vars.len();

    let actions: Vec<String> = ast.actions().into_iter().map(String::from).collect();
    // modules whose alphabet contains each action
    let alphabet: Vec<Vec<usize>> = actions
        .iter()
        .map(|a| {
            (0..ast.modules.len())
                .filter(|&m| ast.modules[m].commands.iter().any(|c| c.action.as_deref() == Some(a)))
                .collect()
        })
        .collect();

    let mut valuations: Vec<i64> = init.clone();
    let mut lookup: HashMap<Vec<i64>, usize> = HashMap::new();
    lookup.insert(init, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut rows: Vec<Vec<Transition>> = Vec::new();

    while let Some(s) = queue.pop_front() {
        let src: Vec<i64> = valuations[s * nvars..(s + 1) * nvars].to_vec();
        let env = StateEnv {
            index: &index,
            vals: &src,
            consts: None,
            labels: None,
        };

        let mut unlabelled: Vec<Enabled> = Vec::new();
        let mut by_action: Vec<Vec<Vec<Enabled>>> = (0..actions.len())
            .map(|_| (0..ast.modules.len()).map(|_| Vec::new()).collect())
            .collect();
        for (mi, m) in ast.modules.iter().enumerate() {
            for (ci, c) in m.commands.iter().enumerate() {
                let what = || format!("guard of command {} in module {}", ci + 1, m.name);
                if !as_bool(eval(&c.guard, &env)?, &what())? {
                    continue;
                }
                for alt in &c.alternatives {
                    let rate = as_num(eval(&alt.rate, &env)?, "rate")?;
                    if !(rate > 0.0 && rate.is_finite()) {
                        return Err(Error::NonPositiveRate {
                            module: m.name.clone(),
                            command: ci + 1,
                            rate,
                        });
                    }
                    let en = Enabled {
                        rate,
                        update: &alt.update,
                        module: mi,
                        command: ci,
                    };
                    match &c.action {
                        None => unlabelled.push(en),
                        Some(a) => {
                            let ai = actions.iter().position(|x| x == a).expect("collected above");
                            by_action[ai][mi].push(en);
                        }
                    }
                }
            }
        }

        let mut row: Vec<(Vec<i64>, f64, Option<usize>)> = Vec::new();
        for en in &unlabelled {
            let mut target = src.clone();
            apply(&ast, &vars, &index, &env, en, &mut target, &mut Vec::new())?;
            row.push((target, en.rate, None));
        }
        for (ai, participants) in alphabet.iter().enumerate() {
            let lists: Vec<&Vec<Enabled>> = participants.iter().map(|&m| &by_action[ai][m]).collect();
            if lists.iter().any(|l| l.is_empty()) {
                continue;
            }
            // Cartesian product over participating modules
            let mut choice = vec![0usize; lists.len()];
            'product: loop {
                let mut target = src.clone();
                let mut written = Vec::new();
                let mut rate = 1.0;
                for (l, &k) in lists.iter().zip(&choice) {
                    let en = &l[k];
                    rate *= en.rate;
                    apply(&ast, &vars, &index, &env, en, &mut target, &mut written)?;
                }
                row.push((target, rate, Some(ai)));
                for d in (0..choice.len()).rev() {
                    choice[d] += 1;
                    if choice[d] < lists[d].len() {
                        continue 'product;
                    }
                    choice[d] = 0;
                }
                break;
            }
        }

        let mut out: Vec<Transition> = Vec::with_capacity(row.len());
        for (target, rate, action) in row {
            let t = match lookup.get(&target) {
                Some(&t) => t,
                None => {
                    let t = lookup.len();
                    if t >= opts.max_states {
                        return Err(Error::StateSpaceTooLarge {
                            cap: opts.max_states,
                            count: t + 1,
                        });
                    }
                    valuations.extend_from_slice(&target);
                    lookup.insert(target, t);
                    queue.push_back(t);
                    t
                }
            };
            out.push(Transition { target: t, rate, action });
        }
        // race semantics: parallel entries between the same pair add up
        out.sort_by(|a, b| (a.target, a.action).cmp(&(b.target, b.action)));
        let mut merged: Vec<Transition> = Vec::with_capacity(out.len());
        for t in out {
            match merged.last_mut() {
                Some(last) if last.target == t.target && last.action == t.action => last.rate += t.rate,
                _ => merged.push(t),
            }
        }
        debug_assert_eq!(rows.len(), s);
        rows.push(merged);
    }

    let labels: BTreeMap<String, Expr> = ast.labels.iter().map(|l| (l.name.clone(), l.expr.clone())).collect();
    let ctmc = Ctmc::assemble(
        vars.into_iter().map(|v| v.name).collect(),
        valuations,
        rows,
        actions,
        labels,
        consts,
    );
    let deadlocks = (0..ctmc.n).filter(|&s| ctmc.transitions(s).is_empty()).count();
    if deadlocks > 0 {
        warn!("{deadlocks} deadlock state(s) treated as absorbing");
    }

    let mut rewards = Vec::new();
    for block in &ast.rewards {
        let mut state = vec![0.0; ctmc.n];
        let mut transition = vec![0.0; ctmc.transitions.len()];
        for s in 0..ctmc.n {
            let env = ctmc.env(s, &index);
            for item in &block.items {
                let what = format!("guard in rewards \"{}\"", block.name);
                let applies_here = as_bool(eval(&item.guard, &env)?, &what)?;
                if !applies_here {
                    continue;
                }
                let value = as_num(eval(&item.value, &env)?, "reward value")?;
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::Domain(format!(
                        "reward \"{}\" has value {value} in state {s}; rewards must be finite and nonnegative",
                        block.name
                    )));
                }
                match &item.kind {
                    RewardKind::State => state[s] += value,
                    RewardKind::Transition(action) => {
                        let base = ctmc.row_start[s];
                        for (k, t) in ctmc.transitions(s).iter().enumerate() {
                            if t.action.map(|a| ctmc.actions[a].as_str()) == action.as_deref() {
                                transition[base + k] += value;
                            }
                        }
                    }
                }
            }
        }
        rewards.push(RewardStructure {
            name: block.name.clone(),
            state,
            transition,
        });
    }
    Ok(BuiltModel { ctmc, rewards })
}

fn apply(
    ast: &ModelAst,
    vars: &[VarInfo],
    index: &HashMap<String, usize>,
    env: &StateEnv,
    en: &Enabled,
    target: &mut [i64],
    written: &mut Vec<usize>,
) -> Result<()> {
    let module = &ast.modules[en.module];
    for (name, expr) in &en.update.assignments {
        let vi = index[name];
        let value = match eval(expr, env)? {
            Value::Int(i) => i,
            other => {
                return Err(Error::Type(format!(
                    "update of `{name}` in command {} of module {} evaluates to {other}",
                    en.command + 1,
                    module.name
                )))
            }
        };
        let v = &vars[vi];
        if !(v.lo..=v.hi).contains(&value) {
            return Err(Error::UpdateOutOfRange {
                var: name.clone(),
                value,
                lo: v.lo,
                hi: v.hi,
                module: module.name.clone(),
                command: en.command + 1,
            });
        }
        if written.contains(&vi) {
            return Err(Error::Eval(format!(
                "synchronised modules both update global `{name}`"
            )));
        }
        written.push(vi);
        target[vi] = value;
    }
    Ok(())
}

impl Ctmc {
    fn assemble(
        var_names: Vec<String>,
        valuations: Vec<i64>,
        rows: Vec<Vec<Transition>>,
        actions: Vec<String>,
        labels: BTreeMap<String, Expr>,
        constants: BTreeMap<String, Value>,
    ) -> Ctmc {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        let mut transitions = Vec::new();
        for r in rows {
            transitions.extend(r);
            row_start.push(transitions.len());
        }
        let rates = SparseMatrix::from_triples(
            n,
            (0..n).flat_map(|s| transitions[row_start[s]..row_start[s + 1]].iter().map(move |t| (s, t.target, t.rate))),
        );
        let exit = (0..n).map(|s| rates.row_sum(s)).collect();
        Ctmc {
            var_names,
            valuations,
            n,
            init: 0,
            row_start,
            transitions,
            actions,
            rates,
            exit,
            labels,
            constants,
        }
    }

    /// Chain over states `0..n` given directly by rate entries; the single
    /// variable `s` holds the state index.
    pub fn from_rates(n: usize, init: usize, entries: &[(usize, usize, f64, Option<&str>)]) -> Ctmc {
        assert!(init < n && n > 0);
        let mut actions: Vec<String> = Vec::new();
        let mut rows: Vec<Vec<Transition>> = vec![Vec::new(); n];
        for &(s, t, rate, action) in entries {
            assert!(s < n && t < n && rate > 0.0, "bad rate entry ({s}, {t}, {rate})");
            let action = action.map(|a| match actions.iter().position(|x| x == a) {
                Some(i) => i,
                None => {
                    actions.push(a.to_string());
                    actions.len() - 1
                }
            });
            rows[s].push(Transition { target: t, rate, action });
        }
        for row in &mut rows {
            row.sort_by(|a, b| (a.target, a.action).cmp(&(b.target, b.action)));
        }
        let mut c = Ctmc::assemble(
            vec!["s".to_string()],
            (0..n as i64).collect(),
            rows,
            actions,
            BTreeMap::new(),
            BTreeMap::new(),
        );
        c.init = init;
        c
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial_state(&self) -> usize {
        self.init
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn valuation(&self, s: usize) -> &[i64] {
        let k = self.var_names.len();
        &self.valuations[s * k..(s + 1) * k]
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_name(&self, t: &Transition) -> Option<&str> {
        t.action.map(|a| self.actions[a].as_str())
    }

    pub fn transitions(&self, s: usize) -> &[Transition] {
        &self.transitions[self.row_start[s]..self.row_start[s + 1]]
    }

    pub fn all_transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Rate matrix R with parallel entries summed (self-loops retained).
    pub fn rate_matrix(&self) -> &SparseMatrix {
        &self.rates
    }

    pub fn rate(&self, s: usize, t: usize) -> f64 {
        self.rates.get(s, t)
    }

    /// E(s) = Σ_j R(s, j); zero for absorbing states.
    pub fn exit_rate(&self, s: usize) -> f64 {
        self.exit[s]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.exit
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.exit[s] == 0.0
    }

    /// Embedded jump-chain probability R(s, t) / E(s).
    pub fn jump_probability(&self, s: usize, t: usize) -> f64 {
        if self.is_absorbing(s) {
            0.0
        } else {
            self.rate(s, t) / self.exit[s]
        }
    }

    /// Probability that the first jump out of `s` happens within `time` and goes to `t`.
    pub fn timed_jump_probability(&self, s: usize, t: usize, time: f64) -> f64 {
        let e = self.exit[s];
        if e == 0.0 || time <= 0.0 {
            return 0.0;
        }
        self.rate(s, t) / e * -(-e * time).exp_m1()
    }

    pub fn constants(&self) -> &BTreeMap<String, Value> {
        &self.constants
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.labels.contains_key(name)
    }

    fn env<'a>(&'a self, s: usize, index: &'a HashMap<String, usize>) -> StateEnv<'a> {
        StateEnv {
            index,
            vals: self.valuation(s),
            consts: Some(&self.constants),
            labels: Some(&self.labels),
        }
    }

    fn var_index(&self) -> HashMap<String, usize> {
        self.var_names.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect()
    }

    /// Evaluates an expression over variables, constants and labels in every state.
    pub fn evaluate(&self, expr: &Expr, extra: &BTreeMap<String, Value>) -> Result<Vec<Value>> {
        let mut consts = self.constants.clone();
        consts.extend(extra.iter().map(|(k, v)| (k.clone(), *v)));
        let index = self.var_index();
        let mut missing = None;
        expr.for_each_ident(&mut |n| {
            if !index.contains_key(n) && !consts.contains_key(n) && missing.is_none() {
                missing = Some(n.to_string());
            }
        });
        if let Some(n) = missing {
            return Err(Error::Eval(format!("unknown identifier `{n}`")));
        }
        check_labels(expr, &self.labels)?;
        (0..self.n)
            .map(|s| {
                let env = StateEnv {
                    index: &index,
                    vals: self.valuation(s),
                    consts: Some(&consts),
                    labels: Some(&self.labels),
                };
                eval(expr, &env)
            })
            .collect()
    }

    /// Satisfaction vector of a Boolean state expression.
    pub fn satisfying(&self, expr: &Expr, extra: &BTreeMap<String, Value>) -> Result<Vec<bool>> {
        self.evaluate(expr, extra)?
            .into_iter()
            .map(|v| as_bool(v, &format!("`{expr}`")))
            .collect()
    }

    /// Graphviz rendering of the state space.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ctmc {\n  node [shape=box];\n");
        for s in 0..self.n {
            let vals: Vec<String> = self
                .var_names
                .iter()
                .zip(self.valuation(s))
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            let style = if s == self.init { ", style=bold" } else { "" };
            let _ = writeln!(out, "  {s} [label=\"{s}: {}\"{style}];", vals.join(","));
        }
        for s in 0..self.n {
            for t in self.transitions(s) {
                let label = match self.action_name(t) {
                    Some(a) => format!("[{a}] {}", format_sig(t.rate, 6)),
                    None => format_sig(t.rate, 6),
                };
                let _ = writeln!(out, "  {s} -> {} [label=\"{label}\"];", t.target);
            }
        }
        out.push_str("}\n");
        out
    }

    /// `source,target,rate,action` rows, rates with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,target,rate,action\n");
        for s in 0..self.n {
            for t in self.transitions(s) {
                let _ = writeln!(
                    out,
                    "{s},{},{},{}",
                    t.target,
                    format_sig(t.rate, 17),
                    self.action_name(t).unwrap_or("")
                );
            }
        }
        out
    }
}

fn check_labels(expr: &Expr, labels: &BTreeMap<String, Expr>) -> Result<()> {
    match expr {
        Expr::Label(n) if !labels.contains_key(n) => Err(Error::UnknownLabel(n.clone())),
        Expr::Unary(_, e) => check_labels(e, labels),
        Expr::Binary(_, l, r) => {
            check_labels(l, labels)?;
            check_labels(r, labels)
        }
        Expr::Call(_, args) => args.iter().try_for_each(|a| check_labels(a, labels)),
        Expr::Ite(c, a, b) => {
            check_labels(c, labels)?;
            check_labels(a, labels)?;
            check_labels(b, labels)
        }
        _ => Ok(()),
    }
}
