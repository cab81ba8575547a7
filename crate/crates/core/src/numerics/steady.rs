use std::collections::VecDeque;

use crate::ctmc::{Ctmc, SparseMatrix};
use crate::error::{Error, Result};
use crate::numerics::NumericOptions;

fn reaches_all(m: &SparseMatrix) -> bool {
    let n = m.dim();
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    let mut count = 1;
    while let Some(s) = queue.pop_front() {
        for (t, r) in m.row(s) {
            if r > 0.0 && !seen[t] {
                seen[t] = true;
                count += 1;
                queue.push_back(t);
            }
        }
    }
    count == n
}

/// Every state reaches every other state.
pub fn is_irreducible(rates: &SparseMatrix) -> bool {
    rates.dim() > 0 && reaches_all(rates) && reaches_all(&rates.transpose())
}

/// Stationary distribution `πQ = 0, Σπ = 1` of an irreducible chain, by
/// Gauss–Seidel sweeps.
///
/// Converged when `‖πQ‖_∞ / q ≤ tolerance` on the uniformized scale (and
/// on the raw scale when `q > 1`), with `q` the largest exit rate.
pub fn steady_state(c: &Ctmc, opts: &NumericOptions) -> Result<Vec<f64>> {
    let rates = c.rate_matrix();
    if !is_irreducible(rates) {
        return Err(Error::NotIrreducible);
    }
    let n = rates.dim();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let incoming = rates.transpose();
    let exit: Vec<f64> = (0..n)
        .map(|s| rates.row(s).filter(|&(t, _)| t != s).map(|(_, r)| r).sum())
        .collect();
    let q = exit.iter().copied().fold(0.0, f64::max);
    let scale = q.max(1.0);

    let mut pi = vec![1.0 / n as f64; n];
    for sweep in 1..=opts.max_sweeps {
        let mut change = 0.0f64;
        for j in 0..n {
            let inflow: f64 = incoming.row(j).filter(|&(i, _)| i != j).map(|(i, r)| pi[i] * r).sum();
            let new = inflow / exit[j];
            change = change.max((new - pi[j]).abs() / new.max(f64::MIN_POSITIVE));
            pi[j] = new;
        }
        let sum: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= sum);

        let residual = (0..n)
            .map(|j| {
                let inflow: f64 = incoming.row(j).filter(|&(i, _)| i != j).map(|(i, r)| pi[i] * r).sum();
                (inflow - pi[j] * exit[j]).abs()
            })
            .fold(0.0f64, f64::max);
        if residual / scale <= opts.tolerance && change <= 1e-12 {
            log::debug!("steady state after {sweep} sweeps, residual {residual:e}");
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence {
        what: "steady-state Gauss-Seidel".into(),
        iterations: opts.max_sweeps,
    })
}
