use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::csl::Checker;
use crate::ctmc::build_state_space;
use crate::error::{Error, Result};
use crate::fmt::format_sig;
use crate::lang::ast::{ConstDecl, ModelAst, Value};
use crate::lang::bind::{bind_constants, Bindings};
use crate::lang::props::Property;
use crate::numerics::NumericOptions;

/// `name=lo:hi:step` (or `name=value` for a single point).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SweepSpec {
    /// `lo, lo+step, …` up to `hi` inclusive (with a 1e-9 step tolerance).
    pub fn points(&self) -> Vec<f64> {
        if self.lo == self.hi {
            return vec![self.lo];
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let x = self.lo + i as f64 * self.step;
                // strip accumulated binary noise such as 0.060000000000000005
                format_sig(x, 12).parse().expect("formatted float")
            })
            .collect()
    }
}

pub fn parse_sweep(src: &str) -> Result<SweepSpec> {
    let bad = |why: &str| Error::InvalidSweep(format!("`{src}`: {why}"));
    let (name, range) = src.split_once('=').ok_or_else(|| bad("expected name=lo:hi:step"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(bad("invalid parameter name"));
    }
    let nums: Vec<f64> = range
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad("bounds must be numbers")))
        .collect::<Result<_>>()?;
    let (lo, hi, step) = match nums[..] {
        [v] => (v, v, 1.0),
        [lo, hi, step] => (lo, hi, step),
        _ => return Err(bad("expected name=lo:hi:step")),
    };
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(bad("bounds must be finite"));
    }
    if lo > hi {
        return Err(bad("lower bound exceeds upper bound"));
    }
    if step <= 0.0 {
        return Err(bad("step must be positive"));
    }
    Ok(SweepSpec {
        name: name.to_string(),
        lo,
        hi,
        step,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub query: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub params: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Header `param1[,param2],query,value`.
    pub fn to_csv(&self, full: bool) -> Result<String> {
        let digits = if full { 17 } else { 6 };
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.params.clone();
        header.extend(["query".to_string(), "value".to_string()]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.params.iter().map(|p| format_sig(*p, 12)).collect();
            rec.push(r.query.clone());
            rec.push(format_sig(r.value, digits));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Values of one query in row order.
    pub fn column(&self, query: &str) -> Vec<(Vec<f64>, f64)> {
        self.rows
            .iter()
            .filter(|r| r.query == query)
            .map(|r| (r.params.clone(), r.value))
            .collect()
    }
}

/// Evaluates every query at every grid point of the sweeps (one or two
/// parameters). Parameters may name model constants or property constants.
/// Points run on up to `jobs` threads; rows come out sorted by parameter.
pub fn run_experiment_sweep(
    model: &ModelAst,
    prop_consts: &[ConstDecl],
    queries: &[Property],
    sweeps: &[SweepSpec],
    base: &Bindings,
    opts: &NumericOptions,
    jobs: usize,
) -> Result<SweepTable> {
    if sweeps.is_empty() || sweeps.len() > 2 {
        return Err(Error::InvalidSweep(format!("expected one or two sweep parameters, got {}", sweeps.len())));
    }
    if sweeps.len() == 2 && sweeps[0].name == sweeps[1].name {
        return Err(Error::InvalidSweep(format!("parameter `{}` swept twice", sweeps[0].name)));
    }
    let is_model = |n: &str| model.constant(n).is_some();
    let is_prop = |n: &str| prop_consts.iter().any(|c| c.name == n);
    for s in sweeps {
        if !is_model(&s.name) && !is_prop(&s.name) {
            return Err(Error::UnknownConstant(s.name.clone()));
        }
    }

    let mut grid: Vec<Vec<f64>> = vec![vec![]];
    for s in sweeps {
        let pts = s.points();
        grid = grid
            .into_iter()
            .flat_map(|g| pts.iter().map(move |&p| [g.clone(), vec![p]].concat()))
            .collect();
    }

    let eval_point = |point: &Vec<f64>| -> Result<Vec<SweepRow>> {
        let mut model_b: Bindings = base.iter().filter(|(k, _)| is_model(k)).map(|(k, v)| (k.clone(), *v)).collect();
        let mut prop_b: Bindings = base.iter().filter(|(k, _)| !is_model(k)).map(|(k, v)| (k.clone(), *v)).collect();
        for (s, &x) in sweeps.iter().zip(point) {
            let target = if is_model(&s.name) { &mut model_b } else { &mut prop_b };
            target.insert(s.name.clone(), Value::Real(x));
        }
        let built = build_state_space(&bind_constants(model, &model_b)?)?;
        let checker = Checker::new(&built, *opts).with_constants(prop_consts, &prop_b)?;
        queries
            .iter()
            .map(|q| {
                Ok(SweepRow {
                    params: point.clone(),
                    query: q.text.clone(),
                    value: checker.check(q)?.value(),
                })
            })
            .collect()
    };

    let results: Vec<Result<Vec<SweepRow>>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Eval(e.to_string()))?;
        pool.install(|| grid.par_iter().map(eval_point).collect())
    } else {
        grid.iter().map(eval_point).collect()
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let order: BTreeMap<&str, usize> = queries.iter().enumerate().map(|(i, q)| (q.text.as_str(), i)).collect();
    rows.sort_by(|a, b| {
        a.params
            .partial_cmp(&b.params)
            .expect("finite parameters")
            .then(order[a.query.as_str()].cmp(&order[b.query.as_str()]))
    });
    Ok(SweepTable {
        params: sweeps.iter().map(|s| s.name.clone()).collect(),
        rows,
    })
}
