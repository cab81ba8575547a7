use crate::ctmc::{Ctmc, RewardStructure, SparseMatrix};
use crate::error::{Error, Result};
use crate::numerics::{NumericOptions, PoissonWeights};

/// The uniformized DTMC `P̃ = I + Q/q` with `q = 1.02 · max exit rate`.
#[derive(Debug, Clone)]
pub struct UniformizedChain {
    q: f64,
    p: SparseMatrix,
}

impl UniformizedChain {
    pub fn new(c: &Ctmc) -> Self {
        Self::from_rates(c.rate_matrix(), None)
    }

    /// Uniformizes with the states in `absorbing` stripped of their outgoing rates.
    pub fn with_absorbing(c: &Ctmc, absorbing: &[bool]) -> Self {
        Self::from_rates(c.rate_matrix(), Some(absorbing))
    }

    pub fn from_rates(rates: &SparseMatrix, absorbing: Option<&[bool]>) -> Self {
        let n = rates.dim();
        let is_abs = |s: usize| absorbing.is_some_and(|a| a[s]);
        // self-loops do not change the law of the process
        let exit: Vec<f64> = (0..n)
            .map(|s| {
                if is_abs(s) {
                    0.0
                } else {
                    rates.row(s).filter(|&(t, _)| t != s).map(|(_, r)| r).sum()
                }
            })
            .collect();
        let max = exit.iter().copied().fold(0.0, f64::max);
        let q = if max > 0.0 { 1.02 * max } else { 1.0 };
        let entries = (0..n).flat_map(|s| {
            let diag = std::iter::once((s, s, 1.0 - exit[s] / q));
            let off = rates
                .row(s)
                .filter(move |&(t, _)| t != s && !is_abs(s))
                .map(move |(t, r)| (s, t, r / q));
            diag.chain(off).collect::<Vec<_>>()
        });
        UniformizedChain {
            q,
            p: SparseMatrix::from_triples(n, entries),
        }
    }

    pub fn rate(&self) -> f64 {
        self.q
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 || t.is_infinite() {
        return Err(Error::Domain(format!("time bound {t} must be finite and nonnegative")));
    }
    Ok(())
}

fn weights(q: f64, t: f64, opts: &NumericOptions) -> Result<PoissonWeights> {
    let w = PoissonWeights::new(q * t, opts.eps);
    if w.right > opts.max_iterations {
        return Err(Error::IterationCap {
            cap: opts.max_iterations,
            needed: w.right,
        });
    }
    Ok(w)
}

/// Evaluates `Σ_k coeff(k) · x_k` with `x_{k+1} = step(x_k)`, `k ≤ kmax`.
///
/// Once consecutive iterates differ by less than `eps / kmax` the iterate is
/// treated as stationary and the remaining coefficients are applied at once.
fn series(
    step: impl Fn(&[f64], &mut [f64]),
    start: &[f64],
    coeff: impl Fn(usize) -> f64,
    tail: impl Fn(usize) -> f64,
    kmax: usize,
    eps: f64,
) -> Vec<f64> {
    let n = start.len();
    let scale = start.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let threshold = eps * scale / kmax.max(1) as f64;
    let mut acc = vec![0.0; n];
    let mut x = start.to_vec();
    let mut next = vec![0.0; n];
    for k in 0..=kmax {
        let c = coeff(k);
        if c != 0.0 {
            acc.iter_mut().zip(&x).for_each(|(a, xi)| *a += c * xi);
        }
        if k == kmax {
            break;
        }
        step(&x, &mut next);
        let diff = x.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff < threshold {
            let rest = tail(k);
            acc.iter_mut().zip(&next).for_each(|(a, xi)| *a += rest * xi);
            break;
        }
        std::mem::swap(&mut x, &mut next);
    }
    acc
}

/// State distribution at time `t` from the initial state.
pub fn transient_distribution(c: &Ctmc, t: f64, opts: &NumericOptions) -> Result<Vec<f64>> {
    let mut start = vec![0.0; c.num_states()];
    start[c.initial_state()] = 1.0;
    transient_from(&UniformizedChain::new(c), &start, t, opts)
}

/// `π(t) = π(0) · e^{Qt}` for an arbitrary start distribution.
pub fn transient_from(u: &UniformizedChain, start: &[f64], t: f64, opts: &NumericOptions) -> Result<Vec<f64>> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(start.to_vec());
    }
    let w = weights(u.q, t, opts)?;
    Ok(series(
        |x, out| u.p.left_mul(x, out),
        start,
        |k| w.weight(k),
        |k| w.tail(k),
        w.right,
        opts.eps,
    ))
}

/// `e^{Qt} · v`: per-state expectation of `v` at time `t`.
pub fn transient_backward(u: &UniformizedChain, values: &[f64], t: f64, opts: &NumericOptions) -> Result<Vec<f64>> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(values.to_vec());
    }
    let w = weights(u.q, t, opts)?;
    Ok(series(
        |x, out| u.p.right_mul(x, out),
        values,
        |k| w.weight(k),
        |k| w.tail(k),
        w.right,
        opts.eps,
    ))
}

/// Expected reward accumulated over `[0, t]` from every start state.
///
/// Uses `∫_0^t e^{Qs} ds = Σ_k c_k P̃^k` with `c_k = (1/q) · P(N > k)`,
/// `N ~ Poisson(qt)`.
pub fn cumulative_reward_vector(
    c: &Ctmc,
    reward: &RewardStructure,
    t: f64,
    opts: &NumericOptions,
) -> Result<Vec<f64>> {
    check_time(t)?;
    let rho = reward.rate_vector(c);
    if t == 0.0 {
        return Ok(vec![0.0; c.num_states()]);
    }
    let u = UniformizedChain::new(c);
    let q = u.q;
    let w = weights(q, t, opts)?;
    // Σ_{j>k} c_j, split at the left truncation point
    let (left, right) = (w.left, w.right);
    let mut suffix = vec![0.0; right - left + 1];
    let mut acc = 0.0;
    for k in (left..=right).rev() {
        suffix[k - left] = acc;
        acc += w.tail(k);
    }
    let total = w.total();
    // the truncated window's mean is Σ_k P(N > k); rescale it to qt so the
    // coefficients integrate a constant reward exactly
    let scale = t / (left as f64 * total + acc);
    let coeff_tail = |k: usize| -> f64 {
        if k >= right {
            0.0
        } else if k < left {
            ((left - 1 - k) as f64 * total + acc) * scale
        } else {
            suffix[k - left] * scale
        }
    };
    Ok(series(
        |x, out| u.p.right_mul(x, out),
        &rho,
        |k| w.tail(k) * scale,
        coeff_tail,
        right,
        opts.eps,
    ))
}

/// Expected reward accumulated over `[0, t]` from the initial state.
pub fn cumulative_reward(c: &Ctmc, reward: &RewardStructure, t: f64, opts: &NumericOptions) -> Result<f64> {
    Ok(cumulative_reward_vector(c, reward, t, opts)?[c.initial_state()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn up_down(lambda: f64, mu: f64) -> Ctmc {
        Ctmc::from_rates(2, 0, &[(0, 1, lambda, Some("fail")), (1, 0, mu, Some("fix"))])
    }

    #[test]
    fn two_state_closed_form() {
        let (l, m) = (1.0, 3.0);
        let c = up_down(l, m);
        for &t in &[0.1, 0.5, 1.0, 5.0, 100.0] {
            let pi = transient_distribution(&c, t, &NumericOptions::default()).unwrap();
            let exact = m / (l + m) + l / (l + m) * (-(l + m) * t).exp();
            assert_abs_diff_eq!(pi[0], exact, epsilon = 1e-10);
            assert_abs_diff_eq!(pi[0] + pi[1], 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_reward_integrates_to_t() {
        let c = up_down(0.01, 0.03);
        let rs = RewardStructure {
            name: "one".into(),
            state: vec![1.0; 2],
            transition: vec![0.0; c.num_transitions()],
        };
        let opts = NumericOptions::default();
        for &t in &[1e-3, 1.0, 37.0, 1e5] {
            let v = cumulative_reward(&c, &rs, t, &opts).unwrap();
            assert!((v - t).abs() <= opts.eps * t, "{t}: {v}");
        }
    }

    #[test]
    fn zero_time_and_bad_time() {
        let c = up_down(1.0, 3.0);
        let opts = NumericOptions::default();
        assert_eq!(transient_distribution(&c, 0.0, &opts).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(transient_distribution(&c, -1.0, &opts), Err(Error::Domain(_))));
        assert!(matches!(transient_distribution(&c, f64::NAN, &opts), Err(Error::Domain(_))));
    }

    #[test]
    fn iteration_cap() {
        let c = up_down(1.0, 3.0);
        let opts = NumericOptions {
            max_iterations: 100,
            ..Default::default()
        };
        assert!(matches!(
            transient_distribution(&c, 1000.0, &opts),
            Err(Error::IterationCap { cap: 100, .. })
        ));
    }

    #[test]
    fn absorbing_chain() {
        // pure death: P(absorbed by t) = 1 - e^{-2t}
        let c = Ctmc::from_rates(2, 0, &[(0, 1, 2.0, None)]);
        let pi = transient_distribution(&c, 0.7, &NumericOptions::default()).unwrap();
        assert_abs_diff_eq!(pi[1], 1.0 - (-1.4f64).exp(), epsilon = 1e-10);
        // fully absorbing chain stays put
        let c = Ctmc::from_rates(1, 0, &[]);
        let pi = transient_distribution(&c, 3.0, &NumericOptions::default()).unwrap();
        assert_abs_diff_eq!(pi[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn self_loops_do_not_change_transients() {
        let plain = up_down(1.0, 3.0);
        let looped = Ctmc::from_rates(2, 0, &[(0, 1, 1.0, None), (0, 0, 50.0, None), (1, 0, 3.0, None)]);
        let opts = NumericOptions::default();
        let a = transient_distribution(&plain, 0.8, &opts).unwrap();
        let b = transient_distribution(&looped, 0.8, &opts).unwrap();
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
    }

    #[test]
    fn backward_agrees_with_forward() {
        let c = Ctmc::from_rates(
            3,
            0,
            &[(0, 1, 1.5, None), (1, 2, 0.5, None), (2, 0, 2.0, None), (1, 0, 0.25, None)],
        );
        let opts = NumericOptions::default();
        let u = UniformizedChain::new(&c);
        let v = [0.3, 1.0, 7.0];
        let back = transient_backward(&u, &v, 2.5, &opts).unwrap();
        for s in 0..3 {
            let mut start = vec![0.0; 3];
            start[s] = 1.0;
            let pi = transient_from(&u, &start, 2.5, &opts).unwrap();
            let fwd: f64 = pi.iter().zip(&v).map(|(p, x)| p * x).sum();
            assert_abs_diff_eq!(back[s], fwd, epsilon = 1e-9);
        }
    }

    #[test]
    fn cumulative_two_state() {
        let (l, m) = (1.0, 3.0);
        let c = up_down(l, m);
        let r = RewardStructure {
            name: "up".into(),
            state: vec![1.0, 0.0],
            transition: vec![0.0, 0.0],
        };
        let t = 2.0;
        let got = cumulative_reward(&c, &r, t, &NumericOptions::default()).unwrap();
        // ∫ π_0(s) ds in closed form
        let exact = m / (l + m) * t + l / (l + m).powi(2) * (1.0 - (-(l + m) * t).exp());
        assert_abs_diff_eq!(got, exact, epsilon = 1e-9);
    }

    #[test]
    fn cumulative_transition_counts() {
        // expected number of [fix] firings on [0,t] is μ ∫ π_1(s) ds
        let (l, m) = (2.0, 5.0);
        let c = up_down(l, m);
        let r = RewardStructure {
            name: "fixes".into(),
            state: vec![0.0, 0.0],
            transition: vec![0.0, 1.0],
        };
        let t = 40.0;
        let got = cumulative_reward(&c, &r, t, &NumericOptions::default()).unwrap();
        let occ1 = l / (l + m) * t - l / (l + m).powi(2) * (1.0 - (-(l + m) * t).exp());
        assert_abs_diff_eq!(got, m * occ1, epsilon = 1e-8);
    }

    #[test]
    fn long_horizon_uses_steady_detection() {
        let c = up_down(1.0, 3.0);
        let pi = transient_distribution(&c, 1e6, &NumericOptions::default()).unwrap();
        assert_abs_diff_eq!(pi[0], 0.75, epsilon = 1e-9);
        let r = RewardStructure {
            name: "up".into(),
            state: vec![1.0, 0.0],
            transition: vec![0.0, 0.0],
        };
        let acc = cumulative_reward(&c, &r, 1e6, &NumericOptions::default()).unwrap();
        let exact = 0.75 * 1e6 + 1.0 / 16.0 * (1.0 - (-4e6f64).exp());
        assert_abs_diff_eq!(acc / 1e6, exact / 1e6, epsilon = 1e-10);
    }
}
