//! Exchangeable Archimedean copulas of dimension up to four.
//!
//! Everything is expressed through the generator φ (a Laplace transform),
//! its inverse and its derivatives up to order four, evaluated in log-space.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::bicop::{clamp_unit, BivariateCopula, CopulaFamily};
use crate::error::{domain, Error, Result};
use crate::special::log_add_exp;

pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchimedeanModel {
    family: CopulaFamily,
    theta: f64,
    d: usize,
    /// Gumbel only: coefficients of P_k(w) for k = 0..=4, P_k of degree k.
    gumbel_poly: [[f64; MAX_DIM + 1]; MAX_DIM + 1],
}

impl ArchimedeanModel {
    pub fn new(family: CopulaFamily, theta: f64, d: usize) -> Result<Self> {
        if family == CopulaFamily::Independence {
            return Err(Error::Invalid(
                "independence is not an Archimedean model here; use a vine with independence edges".into(),
            ));
        }
        if !(2..=MAX_DIM).contains(&d) {
            return domain(format!("Archimedean dimension must be 2..=4, got {d}"));
        }
        family.check_theta(theta)?;
        if family == CopulaFamily::Frank && theta < 0.0 && d > 2 {
            return domain("Frank Archimedean copulas of dimension > 2 require theta > 0");
        }
        let mut gumbel_poly = [[0.0; MAX_DIM + 1]; MAX_DIM + 1];
        if family == CopulaFamily::Gumbel {
            let a = 1.0 / theta;
            gumbel_poly[0][0] = 1.0;
            // P_{k+1} = αw P_k + k P_k − αw P_k'
            for k in 0..MAX_DIM {
                let p = gumbel_poly[k];
                let mut next = [0.0; MAX_DIM + 1];
                for (i, &c) in p.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    if i < MAX_DIM {
                        next[i + 1] += a * c;
                    }
                    next[i] += k as f64 * c;
                    // −αw · (i c w^{i−1}) = −α i c w^i
                    next[i] -= a * i as f64 * c;
                }
                gumbel_poly[k + 1] = next;
            }
        }
        Ok(Self { family, theta, d, gumbel_poly })
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> f64 {
        crate::bicop::tau_of_theta(self.family, self.theta).unwrap_or(f64::NAN)
    }

    /// Same family and parameter at another dimension.
    pub fn with_dim(&self, d: usize) -> Result<Self> {
        Self::new(self.family, self.theta, d)
    }

    /// Generator inverse t = φ⁻¹(u), for u ∈ (0, 1].
    fn gen_inv(&self, u: f64) -> f64 {
        let th = self.theta;
        if u >= 1.0 {
            return 0.0;
        }
        match self.family {
            CopulaFamily::Clayton => (-th * u.ln()).exp_m1(),
            CopulaFamily::Gumbel => (-u.ln()).powf(th),
            CopulaFamily::Frank => frank_gen_inv(th, u),
            CopulaFamily::Independence => -u.ln(),
        }
    }

    /// ln |(φ⁻¹)'(u)|.
    fn log_gen_inv_deriv(&self, u: f64) -> f64 {
        let th = self.theta;
        match self.family {
            CopulaFamily::Clayton => th.ln() - (th + 1.0) * u.ln(),
            CopulaFamily::Gumbel => th.ln() + (th - 1.0) * (-u.ln()).ln() - u.ln(),
            CopulaFamily::Frank => {
                if th > 0.0 {
                    th.ln() - (th * u).exp_m1().ln()
                } else {
                    (-th).ln() - (-(th * u).exp_m1()).ln()
                }
            }
            CopulaFamily::Independence => -u.ln(),
        }
    }

    /// Log of the generator-inverse sum and its "shape" argument:
    /// for Clayton returns ln(1 + s), otherwise ln s (Frank returns s itself).
    fn sum_stat(&self, us: &[f64]) -> f64 {
        let th = self.theta;
        match self.family {
            CopulaFamily::Clayton => {
                // ln(1 + Σ (u_j^{−θ} − 1)) = ln(Σ e^{x_j} − (k − 1))
                let xs: Vec<f64> = us.iter().filter(|&&u| u < 1.0).map(|u| -th * u.ln()).collect();
                if xs.is_empty() {
                    return 0.0;
                }
                let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if m < 1.0 {
                    xs.iter().map(|x| x.exp_m1()).sum::<f64>().ln_1p()
                } else {
                    let k = xs.len() as f64;
                    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() - (k - 1.0) * (-m).exp()).ln()
                }
            }
            CopulaFamily::Gumbel => {
                us.iter().filter(|&&u| u < 1.0).map(|u| th * (-u.ln()).ln()).fold(f64::NEG_INFINITY, log_add_exp)
            }
            _ => us.iter().map(|&u| self.gen_inv(u)).sum(),
        }
    }

    /// φ at the generator sum.
    fn gen_at(&self, stat: f64) -> f64 {
        let th = self.theta;
        match self.family {
            CopulaFamily::Clayton => (-stat / th).exp(),
            CopulaFamily::Gumbel => (-(stat / th).exp()).exp(),
            CopulaFamily::Frank => frank_gen(th, stat),
            CopulaFamily::Independence => (-stat).exp(),
        }
    }

    /// ln |φ^{(k)}| at the generator sum, k = 1..=4.
    fn log_gen_deriv(&self, k: usize, stat: f64) -> f64 {
        let th = self.theta;
        match self.family {
            CopulaFamily::Clayton => {
                let a = 1.0 / th;
                (0..k).map(|j| (a + j as f64).ln()).sum::<f64>() - (a + k as f64) * stat
            }
            CopulaFamily::Gumbel => {
                let ls = stat;
                let w = (ls / th).exp();
                let p = &self.gumbel_poly[k];
                let mut val = 0.0;
                for &c in p.iter().rev() {
                    val = val * w + c;
                }
                -w - k as f64 * ls + val.ln()
            }
            CopulaFamily::Frank => frank_log_gen_deriv(th, k, stat),
            CopulaFamily::Independence => -stat,
        }
    }

    fn check(&self, u: &[f64], min_len: usize) -> Result<()> {
        if u.len() < min_len || u.len() > self.d {
            return domain(format!("expected between {min_len} and {} coordinates, got {}", self.d, u.len()));
        }
        if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return domain(format!("coordinate {x} outside [0, 1]"));
        }
        Ok(())
    }

    /// C(u) = φ(Σ φ⁻¹(u_j)).
    pub fn acdf(&self, u: &[f64]) -> Result<f64> {
        self.check(u, 1)?;
        if u.contains(&0.0) {
            return Ok(0.0);
        }
        let us: Vec<f64> = u.iter().map(|&x| if x == 1.0 { 1.0 } else { clamp_unit(x) }).collect();
        if us.iter().all(|&x| x == 1.0) {
            return Ok(1.0);
        }
        if let Some(b) = self.negative_frank() {
            return b.cdf(us[0], *us.get(1).unwrap_or(&1.0));
        }
        Ok(self.gen_at(self.sum_stat(&us)))
    }

    /// Frank with θ < 0 is only a copula for d = 2 and its generator is not a
    /// Laplace transform; it is evaluated through the bivariate formulas.
    fn negative_frank(&self) -> Option<BivariateCopula> {
        (self.family == CopulaFamily::Frank && self.theta < 0.0)
            .then(|| BivariateCopula::new(self.family, self.theta).expect("validated theta"))
    }

    pub fn apdf(&self, u: &[f64]) -> Result<f64> {
        Ok(self.log_apdf(u)?.exp())
    }

    /// Log density at u (any length 2..=d; the model is exchangeable so a
    /// shorter vector is evaluated under the lower-dimensional margin).
    pub fn log_apdf(&self, u: &[f64]) -> Result<f64> {
        self.check(u, 2)?;
        if let Some(b) = self.negative_frank() {
            return b.log_pdf(u[0], u[1]);
        }
        let us: Vec<f64> = u.iter().map(|&x| clamp_unit(x)).collect();
        let stat = self.sum_stat(&us);
        let v = self.log_gen_deriv(us.len(), stat) + us.iter().map(|&x| self.log_gen_inv_deriv(x)).sum::<f64>();
        finite(v, "Archimedean density")
    }

    /// (−1)^{k−1} ∂^{k−1} C / ∂u_1 ⋯ ∂u_{k−1} with k = u.len(); the last
    /// coordinate may equal 0 or 1.
    pub fn acens_deriv(&self, u: &[f64]) -> Result<f64> {
        Ok(self.log_acens_deriv(u)?.exp())
    }

    pub fn log_acens_deriv(&self, u: &[f64]) -> Result<f64> {
        self.check(u, 2)?;
        let k = u.len();
        let last = u[k - 1];
        if last == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if let Some(b) = self.negative_frank() {
            return Ok(b.hfun(u[1], u[0])?.ln());
        }
        let mut us: Vec<f64> = u[..k - 1].iter().map(|&x| clamp_unit(x)).collect();
        us.push(if last == 1.0 { 1.0 } else { clamp_unit(last) });
        let stat = self.sum_stat(&us);
        let v = self.log_gen_deriv(k - 1, stat) + us[..k - 1].iter().map(|&x| self.log_gen_inv_deriv(x)).sum::<f64>();
        finite(v, "Archimedean censored derivative")
    }

    /// Draws n vectors of length d by the Marshall–Olkin frailty construction.
    pub fn asample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let th = self.theta;
        if let Some(b) = self.negative_frank() {
            let v: f64 = clamp_unit(rng.random());
            let p: f64 = rng.random();
            let u = b.hinv_clamped(p, v).expect("closed-form Frank inverse");
            return vec![clamp_unit(u), v];
        }
        let v = match self.family {
            CopulaFamily::Clayton => Gamma::new(1.0 / th, 1.0).expect("valid gamma").sample(rng),
            CopulaFamily::Gumbel => positive_stable(1.0 / th, rng),
            CopulaFamily::Frank => log_series(-(-th).exp_m1(), th, rng),
            CopulaFamily::Independence => 1.0,
        };
        (0..self.d)
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                let s = e / v;
                let u = match self.family {
                    CopulaFamily::Clayton => (-s.ln_1p() / th).exp(),
                    CopulaFamily::Gumbel => (-s.powf(1.0 / th)).exp(),
                    _ => frank_gen(th, s),
                };
                clamp_unit(u)
            })
            .collect()
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::Numeric(format!("{what} is not finite")))
    } else {
        Ok(v)
    }
}

/// Frank φ⁻¹(u) = −ln(expm1(−θu)/expm1(−θ)), written to avoid cancellation.
fn frank_gen_inv(th: f64, u: f64) -> f64 {
    if th > 0.0 {
        log1m_exp(-th) - log1m_exp(-th * u)
    } else {
        ((-th).exp_m1()).ln() - ((-th * u).exp_m1()).ln()
    }
}

/// ln(1 − e^x) for x < 0.
fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Frank φ(s) = −(1/θ) ln(1 − (1 − e^{−θ}) e^{−s}).
fn frank_gen(th: f64, s: f64) -> f64 {
    // 1 − c e^{−s} = −expm1(−s) + e^{−θ−s}
    let one_minus_z = -(-s).exp_m1() + (-th - s).exp();
    -one_minus_z.ln() / th
}

/// ln |φ^{(k)}(s)| for Frank with θ > 0: (1/θ) Li_{1−k}(z), z = c e^{−s}.
fn frank_log_gen_deriv(th: f64, k: usize, s: f64) -> f64 {
    let lz = log1m_exp(-th) - s;
    let z = lz.exp();
    let omz = -(-s).exp_m1() + (-th - s).exp();
    let lomz = omz.ln();
    let body = match k {
        1 => lz - lomz,
        2 => lz - 2.0 * lomz,
        3 => lz + z.ln_1p() - 3.0 * lomz,
        4 => lz + (1.0 + 4.0 * z + z * z).ln() - 4.0 * lomz,
        _ => unreachable!("generator derivatives are only needed up to order 4"),
    };
    body - th.ln()
}

/// One-sided α-stable variable with Laplace transform exp(−s^α) (Kanter).
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    let th: f64 = rng.random::<f64>() * std::f64::consts::PI;
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * th).sin().powf(alpha / (1.0 - alpha)) * ((1.0 - alpha) * th).sin()
        / th.sin().powf(1.0 / (1.0 - alpha));
    (a / e).powf((1.0 - alpha) / alpha)
}

/// Logarithmic-series variable with parameter p = 1 − e^{−θ} (Kemp's LK).
fn log_series<R: Rng + ?Sized>(p: f64, th: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u > p {
        return 1.0;
    }
    let v: f64 = rng.random();
    // q = 1 − (1 − p)^v = −expm1(−θ v)
    let q = -(-th * v).exp_m1();
    if u < q * q {
        (1.0 + u.ln() / q.ln()).floor()
    } else if u > q {
        1.0
    } else {
        2.0
    }
}
