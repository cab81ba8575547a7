//! Monte Carlo simulation of CTMC paths, used as an independent check on
//! the numerical engines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::csl::Checker;
use crate::ctmc::{BuiltModel, Ctmc, RewardStructure};
use crate::error::{Error, Result};
use crate::fmt::format_sig;
use crate::lang::ast::BinOp;
use crate::lang::props::{CslFormula, NumExpr, PathFormula, Property, PropertyKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub replications: u64,
    pub seed: u64,
    pub confidence: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replications: 100_000,
            seed: 1,
            confidence: 0.95,
        }
    }
}

/// Sample mean with a normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub replications: u64,
    pub seed: u64,
    pub confidence: f64,
    /// Number of successes, for indicator estimators.
    pub successes: Option<u64>,
}

impl Estimate {
    pub fn ci_low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low() <= x && x <= self.ci_high()
    }

    /// Clopper–Pearson interval for indicator estimators.
    pub fn exact_interval(&self) -> Option<(f64, f64)> {
        let k = self.successes? as f64;
        let n = self.replications as f64;
        let alpha = 1.0 - self.confidence;
        let lo = if k == 0.0 {
            0.0
        } else {
            Beta::new(k, n - k + 1.0).ok()?.inverse_cdf(alpha / 2.0)
        };
        let hi = if k == n {
            1.0
        } else {
            Beta::new(k + 1.0, n - k).ok()?.inverse_cdf(1.0 - alpha / 2.0)
        };
        Some((lo, hi))
    }

    /// Same replications, re-expressed at another confidence level.
    pub fn at_confidence(&self, confidence: f64) -> Estimate {
        let scale = z(confidence) / z(self.confidence);
        Estimate {
            half_width: self.half_width * scale,
            confidence,
            ..*self
        }
    }

    fn scaled(&self, k: f64) -> Estimate {
        Estimate {
            mean: self.mean * k,
            half_width: self.half_width * k.abs(),
            ..*self
        }
    }
}

fn z(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.5 + confidence / 2.0)
}

/// One sojourn of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: usize,
    pub entered: f64,
    pub duration: f64,
}

fn rng_for(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Index into `c.transitions(s)` of the transition that wins the race.
fn pick(c: &Ctmc, s: usize, rng: &mut ChaCha8Rng) -> usize {
    let ts = c.transitions(s);
    let mut u = rng.random::<f64>() * c.exit_rate(s);
    for (k, t) in ts.iter().enumerate() {
        u -= t.rate;
        if u < 0.0 {
            return k;
        }
    }
    ts.len() - 1
}

fn sojourn(c: &Ctmc, s: usize, rng: &mut ChaCha8Rng) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / c.exit_rate(s)
}

/// Samples one path up to `horizon`; the last segment is cut at the horizon.
pub fn simulate_path(c: &Ctmc, horizon: f64, seed: u64) -> Vec<Segment> {
    let mut rng = rng_for(seed, 0);
    let mut path = Vec::new();
    let (mut s, mut now) = (c.initial_state(), 0.0);
    loop {
        if c.is_absorbing(s) {
            path.push(Segment {
                state: s,
                entered: now,
                duration: horizon - now,
            });
            return path;
        }
        let d = sojourn(c, s, &mut rng);
        if now + d >= horizon {
            path.push(Segment {
                state: s,
                entered: now,
                duration: horizon - now,
            });
            return path;
        }
        path.push(Segment {
            state: s,
            entered: now,
            duration: d,
        });
        now += d;
        s = c.transitions(s)[pick(c, s, &mut rng)].target;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }
}

const CHUNK: u64 = 4096;

/// Runs `sample(rng)` once per replication, each on its own stream.
/// Chunks are merged in index order so the result does not depend on
/// thread scheduling.
fn replicate(cfg: &SimConfig, indicator: bool, sample: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> Result<Estimate> {
    if cfg.replications == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::Domain(format!("confidence {} outside (0, 1)", cfg.confidence)));
    }
    let chunks = cfg.replications.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut m = Moments::default();
            for rep in k * CHUNK..((k + 1) * CHUNK).min(cfg.replications) {
                m.push(sample(&mut rng_for(cfg.seed, rep)));
            }
            m
        })
        .collect();
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let n = m.n as f64;
    let mean = m.sum / n;
    let var = if m.n > 1 {
        ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        half_width: z(cfg.confidence) * (var / n).sqrt(),
        replications: m.n,
        seed: cfg.seed,
        confidence: cfg.confidence,
        successes: indicator.then(|| m.sum.round() as u64),
    })
}

/// What a transient estimate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransientMode {
    /// In a target state at time `t`.
    Occupancy,
    /// Target hit at some time in `[0, t]`.
    Reachability,
}

pub fn estimate_transient(c: &Ctmc, target: &[bool], t: f64, mode: TransientMode, cfg: &SimConfig) -> Result<Estimate> {
    estimate_until(c, &vec![true; c.num_states()], target, t, mode, cfg)
}

/// `phi1 U<=t phi2` (reachability mode) or occupancy of `phi2` at `t`.
fn estimate_until(
    c: &Ctmc,
    sat1: &[bool],
    sat2: &[bool],
    t: f64,
    mode: TransientMode,
    cfg: &SimConfig,
) -> Result<Estimate> {
    check_horizon(t)?;
    replicate(cfg, true, |rng| {
        let (mut s, mut now) = (c.initial_state(), 0.0);
        loop {
            if mode == TransientMode::Reachability {
                if sat2[s] {
                    return 1.0;
                }
                if !sat1[s] {
                    return 0.0;
                }
            }
            if c.is_absorbing(s) {
                break;
            }
            let d = sojourn(c, s, rng);
            if now + d > t {
                break;
            }
            now += d;
            s = c.transitions(s)[pick(c, s, rng)].target;
        }
        match mode {
            TransientMode::Occupancy if sat2[s] => 1.0,
            _ => 0.0,
        }
    })
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time bound {t} must be finite and nonnegative")));
    }
    Ok(())
}

/// State rewards times sojourn, plus transition rewards at jumps before `t`.
pub fn estimate_cumulative_reward(c: &Ctmc, rs: &RewardStructure, t: f64, cfg: &SimConfig) -> Result<Estimate> {
    check_horizon(t)?;
    let base: Vec<usize> = {
        let mut acc = 0;
        (0..c.num_states())
            .map(|s| {
                let b = acc;
                acc += c.transitions(s).len();
                b
            })
            .collect()
    };
    replicate(cfg, false, |rng| {
        let (mut s, mut now, mut total) = (c.initial_state(), 0.0, 0.0);
        loop {
            if c.is_absorbing(s) {
                return total + rs.state[s] * (t - now);
            }
            let d = sojourn(c, s, rng);
            if now + d >= t {
                return total + rs.state[s] * (t - now);
            }
            total += rs.state[s] * d;
            now += d;
            let k = pick(c, s, rng);
            total += rs.transition[base[s] + k];
            s = c.transitions(s)[k].target;
        }
    })
}

/// Estimates a numeric property. Supported forms: `P=?[phi1 U<=t phi2]`
/// (including `F<=t`), `R{"name"}=?[C<=t]`, and either scaled by a constant.
pub fn estimate_property(checker: &Checker, model: &BuiltModel, prop: &Property, cfg: &SimConfig) -> Result<Estimate> {
    let unsupported = || Error::Type(format!("`{}` cannot be simulated", prop.text));
    let PropertyKind::Numeric(e) = &prop.kind else {
        return Err(unsupported());
    };
    estimate_numeric(checker, model, e, cfg).and_then(|o| o.ok_or_else(unsupported))
}

fn estimate_numeric(checker: &Checker, model: &BuiltModel, e: &NumExpr, cfg: &SimConfig) -> Result<Option<Estimate>> {
    let c = &model.ctmc;
    let consts = checker.constants();
    let scalar = |x: &crate::lang::Expr| -> Result<f64> {
        crate::lang::eval::eval(x, consts)?
            .as_f64()
            .ok_or_else(|| Error::Type(format!("`{x}` is not numeric")))
    };
    Ok(match e {
        NumExpr::Prob(path) => match path.as_ref() {
            PathFormula::Until { lhs, interval, rhs } => {
                let lo = scalar(&interval.lo)?;
                let Some(hi) = &interval.hi else { return Ok(None) };
                if lo != 0.0 {
                    return Ok(None);
                }
                let (s1, s2) = (checker.sat_states(lhs)?, checker.sat_states(rhs)?);
                Some(estimate_until(c, &s1, &s2, scalar(hi)?, TransientMode::Reachability, cfg)?)
            }
            PathFormula::Next { .. } => None,
        },
        NumExpr::Reward { name, horizon } => {
            Some(estimate_cumulative_reward(c, model.reward(name)?, scalar(horizon)?, cfg)?)
        }
        NumExpr::Bin(op @ (BinOp::Div | BinOp::Mul), l, r) => match (l.as_ref(), r.as_ref()) {
            (inner, NumExpr::Value(k)) => {
                let k = scalar(k)?;
                let k = if *op == BinOp::Div { 1.0 / k } else { k };
                estimate_numeric(checker, model, inner, cfg)?.map(|est| est.scaled(k))
            }
            (NumExpr::Value(k), inner) if *op == BinOp::Mul => {
                let k = scalar(k)?;
                estimate_numeric(checker, model, inner, cfg)?.map(|est| est.scaled(k))
            }
            _ => None,
        },
        _ => None,
    })
}

/// Occupancy estimate of a state formula at time `t`.
pub fn estimate_occupancy(checker: &Checker, model: &BuiltModel, phi: &CslFormula, t: f64, cfg: &SimConfig) -> Result<Estimate> {
    let sat = checker.sat_states(phi)?;
    estimate_transient(&model.ctmc, &sat, t, TransientMode::Occupancy, cfg)
}

/// CSV table `query,estimate,ci_low,ci_high,replications,seed`.
pub fn estimates_csv(rows: &[(String, Estimate)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "estimate", "ci_low", "ci_high", "replications", "seed"])?;
    for (q, e) in rows {
        w.write_record([
            q.clone(),
            format_sig(e.mean, 17),
            format_sig(e.ci_low(), 17),
            format_sig(e.ci_high(), 17),
            e.replications.to_string(),
            e.seed.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
