//! Scalar math shared by the evaluator, sampler and trainer.
//!
//! Without `std` the transcendental functions come from `libm`.

#[cfg(feature = "std")]
#[inline]
pub fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(feature = "std")]
#[inline]
pub fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(not(feature = "std"))]
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(feature = "std")]
#[inline]
pub fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// `log(exp(a) + exp(b))` with `-inf` as the identity.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + ln(1.0 + exp(lo - hi))
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty slice or when every
/// term is `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let total: f64 = terms.iter().map(|&t| exp(t - max)).sum();
    max + ln(total)
}

/// Writes the log of the normalized exponentials of `logits` into `out`.
pub fn log_softmax_into(logits: &[f64], out: &mut [f64]) {
    let norm = log_sum_exp(logits);
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - norm;
    }
}
