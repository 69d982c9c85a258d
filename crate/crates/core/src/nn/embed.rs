use crate::Scalar;

/// Time values in `[0, 1]` are stretched to this range before the sinusoids.
const TIME_SCALE: f64 = 1000.0;
const MAX_PERIOD: f64 = 10_000.0;

/// Sinusoidal embedding of a normalized time `tau` into `out` (`out.len()` even).
///
/// The first half holds sines, the second half cosines, over geometrically
/// spaced frequencies.
pub fn time_embedding_into<F: Scalar>(tau: F, out: &mut [F]) {
    let half = out.len() / 2;
    let u = tau.f64() * TIME_SCALE;
    for k in 0..half {
        let freq = (-(MAX_PERIOD.ln()) * k as f64 / half as f64).exp();
        let (s, c) = (u * freq).sin_cos();
        out[k] = F::of(s);
        out[half + k] = F::of(c);
    }
}

pub fn time_embedding<F: Scalar>(tau: F, dim: usize) -> Vec<F> {
    let mut out = vec![F::zero(); dim];
    time_embedding_into(tau, &mut out);
    out
}
