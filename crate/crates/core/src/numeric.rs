//! Small numerical helpers shared by the inference and scoring code.

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-12;

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log(sum(exp(xs)))`, computed without overflow. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max.is_infinite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes unnormalized log weights in place and returns the probabilities.
pub fn normalize_log_weights(log_weights: &mut [f64]) -> Vec<f64> {
    let z = log_sum_exp(log_weights);
    for w in log_weights.iter_mut() {
        *w -= z;
    }
    log_weights.iter().map(|w| w.exp()).collect()
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Mean and standard error of the mean (sample standard deviation over
/// `sqrt(n)`). A single observation has standard error 0.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
