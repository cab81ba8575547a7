use statrs::function::gamma::ln_gamma;

/// Truncated Poisson(λ) probabilities on `[left, right]`.
///
/// Weights start at the mode from the log-pmf and are extended by the ratio
/// recurrences, so no intermediate value under- or overflows. Each discarded
/// tail is bounded by `eps / 2`, and the retained window is renormalized to
/// unit mass since `ln Γ` loses relative precision for large rates.
#[derive(Debug, Clone)]
pub struct PoissonWeights {
    pub lambda: f64,
    pub left: usize,
    pub right: usize,
    weights: Vec<f64>,
    /// `tails[i] = Σ_{j > left + i} w_j` over the retained window.
    tails: Vec<f64>,
    total: f64,
}

impl PoissonWeights {
    pub fn new(lambda: f64, eps: f64) -> PoissonWeights {
        assert!(lambda >= 0.0 && lambda.is_finite(), "Poisson rate must be finite and nonnegative");
        assert!(eps > 0.0 && eps < 1.0);
        if lambda == 0.0 {
            return PoissonWeights::from_window(0.0, 0, vec![1.0]);
        }
        let mode = lambda.floor() as usize;
        let log_wm = -lambda + mode as f64 * lambda.ln() - ln_gamma(mode as f64 + 1.0);
        let wm = log_wm.exp();
        let half = eps / 2.0;

        let mut down = Vec::new();
        let mut k = mode;
        let mut w = wm;
        while k > 0 {
            // remaining left mass ≤ w_k · (k/λ) / (1 − k/λ) once k < λ
            let kf = k as f64;
            if kf < lambda && w * kf / (lambda - kf) <= half {
                break;
            }
            w *= kf / lambda;
            k -= 1;
            down.push(w);
        }
        let left = k;

        let mut up = Vec::new();
        let mut k = mode;
        let mut w = wm;
        loop {
            let r = lambda / (k as f64 + 1.0);
            if r < 1.0 && w * r / (1.0 - r) <= half {
                break;
            }
            w *= r;
            k += 1;
            up.push(w);
        }

        let mut weights: Vec<f64> = down.into_iter().rev().collect();
        weights.push(wm);
        weights.extend(up);
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        PoissonWeights::from_window(lambda, left, weights)
    }

    fn from_window(lambda: f64, left: usize, weights: Vec<f64>) -> PoissonWeights {
        let mut tails = vec![0.0; weights.len()];
        let mut acc = 0.0;
        for i in (0..weights.len()).rev() {
            tails[i] = acc;
            acc += weights[i];
        }
        PoissonWeights {
            lambda,
            left,
            right: left + weights.len() - 1,
            weights,
            tails,
            total: acc,
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k < self.left || k > self.right {
            0.0
        } else {
            self.weights[k - self.left]
        }
    }

    /// Σ_{j > k} w_j over the retained window.
    pub fn tail(&self, k: usize) -> f64 {
        if k < self.left {
            self.total
        } else if k > self.right {
            0.0
        } else {
            self.tails[k - self.left]
        }
    }

    /// Retained probability mass.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn window(&self) -> &[f64] {
        &self.weights
    }
}
