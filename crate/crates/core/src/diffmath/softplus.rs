/// `ln(1 + e^r)`, evaluated as `max(r, 0) + ln(1 + e^{-|r|})` so it never overflows.
#[inline]
pub fn softplus(r: f64) -> f64 {
    r.max(0.0) + (-r.abs()).exp().ln_1p()
}

/// `(softplus(r), softplus'(r))` sharing a single exponential.
#[inline]
pub fn softplus_with_d1(r: f64) -> (f64, f64) {
    let e = (-r.abs()).exp();
    let inv = 1.0 / (1.0 + e);
    let d1 = if r >= 0.0 { inv } else { e * inv };
    (r.max(0.0) + e.ln_1p(), d1)
}

/// Logistic function, the derivative of [`softplus`].
#[inline]
pub fn softplus_d1(r: f64) -> f64 {
    if r >= 0.0 {
        1.0 / (1.0 + (-r).exp())
    } else {
        let e = r.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus_d2(r: f64) -> f64 {
    let s = softplus_d1(r);
    s * (1.0 - s)
}
