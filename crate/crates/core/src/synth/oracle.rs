//! Closed-form score, noise and velocity fields of a Gaussian mixture pushed
//! through `x = a x0 + b eps`.

use super::mixture::MixtureSpec;
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct Noised {
    log_weight: f64,
    mean: [f64; 2],
    /// Clean component mean and covariance.
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    log_det: f64,
}

/// Mixture marginal at one noise level.
#[derive(Debug, Clone)]
pub struct MixtureOracle {
    a: f64,
    b: f64,
    comps: Vec<Noised>,
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

impl MixtureOracle {
    /// Oracle for the marginal of `a x0 + b eps` with `x0` from `spec`, using
    /// the count proportions as mixture weights.
    pub fn new(spec: &MixtureSpec, a: f64, b: f64) -> Result<Self> {
        spec.validate()?;
        if spec.total() == 0 {
            return Err(Error::config("mixture has no mass"));
        }
        let classes: Vec<usize> = (0..spec.num_classes()).filter(|&k| spec.counts[k] > 0).collect();
        Self::build(spec, &classes, a, b)
    }

    /// Oracle for a single component, as seen by a model conditioned on `class`.
    pub fn for_class(spec: &MixtureSpec, class: usize, a: f64, b: f64) -> Result<Self> {
        spec.validate()?;
        if class >= spec.num_classes() {
            return Err(Error::input(format!("class {class} outside mixture")));
        }
        Self::build(spec, &[class], a, b)
    }

    fn build(spec: &MixtureSpec, classes: &[usize], a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(Error::input(format!("bad noise coefficients a={a}, b={b}")));
        }
        let props = spec.proportions();
        let total: f64 = classes.iter().map(|&k| props[k]).sum();
        let mut comps = Vec::with_capacity(classes.len());
        for &k in classes {
            let s = spec.covariance(k);
            let c = [
                [a * a * s[0][0] + b * b, a * a * s[0][1]],
                [a * a * s[1][0], a * a * s[1][1] + b * b],
            ];
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            if !(det > 0.0 && det.is_finite()) {
                return Err(Error::numeric(format!(
                    "component {k}: noised covariance is singular (det={det:e})"
                )));
            }
            let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
            let w = if classes.len() == 1 { 1.0 } else { props[k] / total };
            comps.push(Noised {
                log_weight: w.ln(),
                mean: [a * spec.means[k][0], a * spec.means[k][1]],
                mu: spec.means[k],
                sigma: s,
                inv,
                log_det: det.ln(),
            });
        }
        Ok(Self { a, b, comps })
    }

    fn log_terms(&self, x: [f64; 2]) -> Vec<f64> {
        self.comps
            .iter()
            .map(|c| {
                let d = [x[0] - c.mean[0], x[1] - c.mean[1]];
                let q = mat_vec(&c.inv, d);
                let maha = d[0] * q[0] + d[1] * q[1];
                c.log_weight - 0.5 * maha - 0.5 * c.log_det - (2.0 * std::f64::consts::PI).ln()
            })
            .collect()
    }

    /// Posterior component probabilities given `x`.
    pub fn responsibilities(&self, x: [f64; 2]) -> Vec<f64> {
        let logs = self.log_terms(x);
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    pub fn log_density(&self, x: [f64; 2]) -> f64 {
        let logs = self.log_terms(x);
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }

    pub fn density(&self, x: [f64; 2]) -> f64 {
        self.log_density(x).exp()
    }

    /// `grad log p(x)`.
    pub fn score(&self, x: [f64; 2]) -> [f64; 2] {
        let r = self.responsibilities(x);
        let mut out = [0.0; 2];
        for (c, w) in self.comps.iter().zip(r) {
            let g = mat_vec(&c.inv, [x[0] - c.mean[0], x[1] - c.mean[1]]);
            out[0] -= w * g[0];
            out[1] -= w * g[1];
        }
        out
    }

    /// `E[x0 | x]`.
    pub fn posterior_x0(&self, x: [f64; 2]) -> [f64; 2] {
        let r = self.responsibilities(x);
        let mut out = [0.0; 2];
        for (c, w) in self.comps.iter().zip(r) {
            let g = mat_vec(&c.inv, [x[0] - c.mean[0], x[1] - c.mean[1]]);
            let shift = mat_vec(&c.sigma, g);
            out[0] += w * (c.mu[0] + self.a * shift[0]);
            out[1] += w * (c.mu[1] + self.a * shift[1]);
        }
        out
    }

    /// `E[eps | x] = -b grad log p(x)`, the optimal noise prediction.
    pub fn eps_star(&self, x: [f64; 2]) -> [f64; 2] {
        let s = self.score(x);
        [-self.b * s[0], -self.b * s[1]]
    }

    /// `E[eps - x0 | x]`, the optimal velocity prediction.
    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let e = self.eps_star(x);
        let x0 = self.posterior_x0(x);
        [e[0] - x0[0], e[1] - x0[1]]
    }
}

/// Score and optimal noise prediction of the DDPM marginal at `alpha_bar`.
pub fn mixture_score_oracle(spec: &MixtureSpec, x: [f64; 2], alpha_bar: f64) -> Result<([f64; 2], [f64; 2])> {
    if !(alpha_bar > 0.0 && alpha_bar < 1.0) {
        return Err(Error::input(format!("alpha_bar must lie in (0, 1), got {alpha_bar}")));
    }
    let o = MixtureOracle::new(spec, alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt())?;
    Ok((o.score(x), o.eps_star(x)))
}

/// Optimal flow velocity at interpolation time `s`.
pub fn flow_velocity_oracle(spec: &MixtureSpec, x: [f64; 2], s: f64) -> Result<[f64; 2]> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::input(format!("flow time must lie in (0, 1], got {s}")));
    }
    Ok(MixtureOracle::new(spec, 1.0 - s, s)?.velocity(x))
}
