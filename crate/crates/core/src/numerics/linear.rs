use crate::ctmc::Ctmc;
use crate::error::{Error, Result};
use crate::numerics::NumericOptions;

/// Solves `x = P x + b` on the `maybe` states of the embedded jump chain,
/// where `b` is the one-step probability of entering `yes`.
///
/// States outside `maybe` keep value 1 if in `yes` and 0 otherwise.
pub fn solve_reachability(c: &Ctmc, maybe: &[bool], yes: &[bool], opts: &NumericOptions) -> Result<Vec<f64>> {
    let n = c.num_states();
    let mut x: Vec<f64> = (0..n).map(|s| if yes[s] && !maybe[s] { 1.0 } else { 0.0 }).collect();
    let rows: Vec<usize> = (0..n).filter(|&s| maybe[s]).collect();
    if rows.is_empty() {
        return Ok(x);
    }
    let m = c.rate_matrix();
    for sweep in 1..=opts.max_sweeps {
        let mut change = 0.0f64;
        for &s in &rows {
            let e = c.exit_rate(s);
            let (mut self_rate, mut acc) = (0.0, 0.0);
            for (t, r) in m.row(s) {
                if t == s {
                    self_rate += r;
                } else {
                    acc += r * x[t];
                }
            }
            let new = acc / (e - self_rate);
            change = change.max((new - x[s]).abs());
            x[s] = new;
        }
        if change <= opts.tolerance {
            log::debug!("reachability solve after {sweep} sweeps");
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        what: "unbounded until Gauss-Seidel".into(),
        iterations: opts.max_sweeps,
    })
}
