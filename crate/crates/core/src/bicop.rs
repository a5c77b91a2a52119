//! One-parameter bivariate copula families.
//!
//! Conventions: `hfun(u, v)` is the conditional distribution of U given V = v,
//! i.e. ∂C(u, v)/∂v. All families here are exchangeable, so the derivative in
//! the first argument is obtained as `hfun(v, u)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::special::{debye1, log_add_exp};

/// Lower/upper clamp applied to copula-scale inputs.
pub const EPS: f64 = 1e-10;

/// Frank parameters closer to zero than this are evaluated as independence.
const FRANK_INDEP: f64 = 1e-5;

const HINV_MAX_ITER: usize = 100;
const HINV_TOL: f64 = 1e-10;

#[inline]
pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(EPS, 1.0 - EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CopulaFamily {
    Independence,
    Clayton,
    Gumbel,
    Frank,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 4] =
        [CopulaFamily::Independence, CopulaFamily::Clayton, CopulaFamily::Gumbel, CopulaFamily::Frank];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
        }
    }

    /// Single-letter code used in compact model strings ("CFG|FF|F").
    pub fn letter(self) -> char {
        match self {
            CopulaFamily::Independence => 'I',
            CopulaFamily::Clayton => 'C',
            CopulaFamily::Gumbel => 'G',
            CopulaFamily::Frank => 'F',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(CopulaFamily::Independence),
            'C' => Some(CopulaFamily::Clayton),
            'G' => Some(CopulaFamily::Gumbel),
            'F' => Some(CopulaFamily::Frank),
            _ => None,
        }
    }

    /// Number of free dependence parameters (0 or 1).
    pub fn n_params(self) -> usize {
        match self {
            CopulaFamily::Independence => 0,
            _ => 1,
        }
    }

    pub fn check_theta(self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match self {
                CopulaFamily::Independence => true,
                CopulaFamily::Clayton => theta > 0.0,
                CopulaFamily::Gumbel => theta >= 1.0,
                CopulaFamily::Frank => theta != 0.0,
            };
        if ok {
            Ok(())
        } else {
            domain(format!("theta = {theta} outside the {} range", self.name()))
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "independence" | "indep" | "i" => Ok(CopulaFamily::Independence),
            "clayton" | "c" => Ok(CopulaFamily::Clayton),
            "gumbel" | "g" => Ok(CopulaFamily::Gumbel),
            "frank" | "f" => Ok(CopulaFamily::Frank),
            _ => Err(Error::Invalid(format!("unknown copula family '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateCopula {
    family: CopulaFamily,
    theta: f64,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        domain(format!("{name} = {x} outside [0, 1]"))
    }
}

impl BivariateCopula {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        family.check_theta(theta)?;
        let theta = if family == CopulaFamily::Independence { 0.0 } else { theta };
        Ok(Self { family, theta })
    }

    pub fn independence() -> Self {
        Self { family: CopulaFamily::Independence, theta: 0.0 }
    }

    pub fn from_tau(family: CopulaFamily, tau: f64) -> Result<Self> {
        Self::new(family, theta_of_tau(family, tau)?)
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        tau_unchecked(self.family, self.theta)
    }

    /// The family actually used for evaluation (Frank near zero collapses
    /// to independence).
    #[inline]
    fn eff(&self) -> CopulaFamily {
        match self.family {
            CopulaFamily::Frank if self.theta.abs() < FRANK_INDEP => CopulaFamily::Independence,
            f => f,
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        Ok(self.cdf_clamped(u, v))
    }

    pub fn pdf(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.log_pdf(u, v)?.exp())
    }

    pub fn log_pdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        Ok(self.log_pdf_clamped(u, v))
    }

    /// h(u | v) = ∂C(u, v)/∂v.
    pub fn hfun(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        if u == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(1.0);
        }
        Ok(self.hfun_clamped(u, v))
    }

    /// Solves hfun(u, v) = p for u.
    pub fn hinv(&self, p: f64, v: f64) -> Result<f64> {
        check_unit("p", p)?;
        check_unit("v", v)?;
        if p == 0.0 {
            return Ok(0.0);
        }
        if p == 1.0 {
            return Ok(1.0);
        }
        self.hinv_clamped(p, v)
    }

    /// C(u, v) with both arguments clamped to [EPS, 1 - EPS].
    pub fn cdf_clamped(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let th = self.theta;
        match self.eff() {
            CopulaFamily::Independence => u * v,
            CopulaFamily::Clayton => {
                let la = clayton_log_a(th, u.ln(), v.ln());
                (-la / th).exp()
            }
            CopulaFamily::Gumbel => {
                let ls = gumbel_log_s(th, u, v);
                (-(ls / th).exp()).exp()
            }
            CopulaFamily::Frank => {
                let g = (-th).exp_m1();
                let a = (-th * u).exp_m1();
                let b = (-th * v).exp_m1();
                -(a * b / g).ln_1p() / th
            }
        }
    }

    /// log c(u, v) with both arguments clamped.
    pub fn log_pdf_clamped(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let th = self.theta;
        match self.eff() {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Clayton => {
                let (lu, lv) = (u.ln(), v.ln());
                let la = clayton_log_a(th, lu, lv);
                th.ln_1p() - (th + 1.0) * (lu + lv) - (1.0 / th + 2.0) * la
            }
            CopulaFamily::Gumbel => {
                let (lu, lv) = (u.ln(), v.ln());
                let (llu, llv) = ((-lu).ln(), (-lv).ln());
                let ls = log_add_exp(th * llu, th * llv);
                let a = (ls / th).exp();
                -a - lu - lv + (th - 1.0) * (llu + llv) + (1.0 / th - 2.0) * ls + (a + th - 1.0).ln()
            }
            CopulaFamily::Frank => {
                if th < 0.0 {
                    return frank_pos_log_pdf(-th, u, 1.0 - v);
                }
                frank_pos_log_pdf(th, u, v)
            }
        }
    }

    /// h(u | v) with both arguments clamped.
    pub fn hfun_clamped(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let th = self.theta;
        let h = match self.eff() {
            CopulaFamily::Independence => u,
            CopulaFamily::Clayton => {
                let (lu, lv) = (u.ln(), v.ln());
                let la = clayton_log_a(th, lu, lv);
                (-(th + 1.0) * lv - (1.0 / th + 1.0) * la).exp()
            }
            CopulaFamily::Gumbel => {
                let (lu, lv) = (u.ln(), v.ln());
                let llv = (-lv).ln();
                let ls = log_add_exp(th * (-lu).ln(), th * llv);
                let a = (ls / th).exp();
                (-a + (1.0 / th - 1.0) * ls + (th - 1.0) * llv - lv).exp()
            }
            CopulaFamily::Frank => {
                if th < 0.0 {
                    frank_pos_hfun(-th, u, 1.0 - v)
                } else {
                    frank_pos_hfun(th, u, v)
                }
            }
        };
        h.clamp(0.0, 1.0)
    }

    /// Inverse of the h-function in its first argument, arguments clamped.
    pub fn hinv_clamped(&self, p: f64, v: f64) -> Result<f64> {
        let (p, v) = (clamp_unit(p), clamp_unit(v));
        let th = self.theta;
        let u = match self.eff() {
            CopulaFamily::Independence => p,
            CopulaFamily::Clayton => {
                let lv = v.ln();
                let w = -th * lv;
                let z = -th / (th + 1.0) * p.ln() + w;
                let la =
                    if z < 1.0 { (z.exp_m1() - w.exp_m1()).ln_1p() } else { z + ((-z).exp() - (w - z).exp_m1()).ln() };
                (-la / th).exp()
            }
            CopulaFamily::Gumbel => gumbel_hinv(th, p, v)?,
            CopulaFamily::Frank => {
                if th < 0.0 {
                    frank_pos_hinv(-th, p, 1.0 - v)
                } else {
                    frank_pos_hinv(th, p, v)
                }
            }
        };
        if !u.is_finite() {
            return Err(Error::Numeric(format!(
                "h-inverse of {} ({th}) at p = {p}, v = {v} is not finite",
                self.family
            )));
        }
        Ok(u.clamp(0.0, 1.0))
    }
}

impl fmt::Display for BivariateCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            CopulaFamily::Independence => f.write_str("independence"),
            fam => write!(f, "{fam}({})", self.theta),
        }
    }
}

/// ln(u^-θ + v^-θ - 1) for Clayton, stable for small and large θ.
#[inline]
fn clayton_log_a(th: f64, lu: f64, lv: f64) -> f64 {
    let x = -th * lu;
    let y = -th * lv;
    let m = x.max(y);
    if m < 1.0 {
        (x.exp_m1() + y.exp_m1()).ln_1p()
    } else {
        m + ((x - m).exp() + (y - m).exp() - (-m).exp()).ln()
    }
}

/// ln((−ln u)^θ + (−ln v)^θ) for Gumbel.
#[inline]
fn gumbel_log_s(th: f64, u: f64, v: f64) -> f64 {
    log_add_exp(th * (-u.ln()).ln(), th * (-v.ln()).ln())
}

/// D = e^{−θu} + e^{−θv} − e^{−θ(u+v)} − e^{−θ}, θ > 0.
#[inline]
fn frank_d(th: f64, u: f64, v: f64) -> f64 {
    if th < 1.0 {
        let g = (-th).exp_m1();
        -g - (-th * u).exp_m1() * (-th * v).exp_m1()
    } else {
        let (eu, ev) = ((-th * u).exp(), (-th * v).exp());
        eu + ev - eu * ev - (-th).exp()
    }
}

#[inline]
fn frank_pos_log_pdf(th: f64, u: f64, v: f64) -> f64 {
    let d = frank_d(th, u, v);
    th.ln() + (-(-th).exp_m1()).ln() - th * (u + v) - 2.0 * d.ln()
}

#[inline]
fn frank_pos_hfun(th: f64, u: f64, v: f64) -> f64 {
    let d = frank_d(th, u, v);
    (-th * v).exp() * (-(-th * u).exp_m1()) / d
}

#[inline]
fn frank_pos_hinv(th: f64, p: f64, v: f64) -> f64 {
    if th >= 1.0 {
        // 1 + a = (e^{−θv}(1−p) + p e^{−θ}) / (e^{−θv}(1−p) + p), in logs
        let base = -th * v + (-p).ln_1p();
        let num = log_add_exp(base, p.ln() - th);
        let den = log_add_exp(base, p.ln());
        return (den - num) / th;
    }
    let g = (-th).exp_m1();
    let ev = (-th * v).exp();
    let b = (-th * v).exp_m1();
    let a = p * g / (ev - p * b);
    -a.ln_1p() / th
}

/// Gumbel h-inverse. Writing A = ((−ln u)^θ + (−ln v)^θ)^{1/θ}, the equation
/// h(u|v) = p becomes A + (θ−1) ln A = (θ−1) ln(−ln v) − ln v − ln p, which is
/// increasing in t = ln A and convex; solved by safeguarded Newton in t.
fn gumbel_hinv(th: f64, p: f64, v: f64) -> Result<f64> {
    let ly = (-v.ln()).ln();
    let rhs = (th - 1.0) * ly - v.ln() - p.ln();
    let g = |t: f64| t.exp() + (th - 1.0) * t - rhs;
    let mut lo = ly;
    if g(lo) >= 0.0 {
        return Ok(1.0);
    }
    let mut hi = ly.max(0.0) + 1.0;
    while g(hi) < 0.0 {
        lo = hi;
        hi += hi.abs().max(1.0);
    }
    let mut t = hi;
    let mut converged = false;
    for _ in 0..HINV_MAX_ITER {
        let f = g(t);
        if f.abs() <= 1e-15 * rhs.abs().max(1.0) {
            converged = true;
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - f / (t.exp() + th - 1.0);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
            t = next;
            converged = true;
            break;
        }
        t = next;
    }
    if !converged && hi - lo > HINV_TOL {
        return Err(Error::Numeric(format!("gumbel h-inverse did not converge (theta = {th}, p = {p}, v = {v})")));
    }
    // (−ln u)^θ = A^θ − (−ln v)^θ
    let x = ly.exp() * (th * (t - ly)).exp_m1().max(0.0).powf(1.0 / th);
    Ok((-x).exp())
}

fn tau_unchecked(family: CopulaFamily, theta: f64) -> f64 {
    match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Clayton => theta / (theta + 2.0),
        CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
        CopulaFamily::Frank => frank_tau(theta),
    }
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        return theta / 9.0 - theta.powi(3) / 900.0;
    }
    1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta
}

fn frank_dtau(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        return 1.0 / 9.0 - theta * theta / 300.0;
    }
    4.0 / (theta * theta) * (1.0 - 2.0 * debye1(theta) + theta / theta.exp_m1())
}

/// Kendall's τ of a family at parameter θ.
pub fn tau_of_theta(family: CopulaFamily, theta: f64) -> Result<f64> {
    family.check_theta(theta)?;
    Ok(tau_unchecked(family, theta))
}

/// Inverse of [`tau_of_theta`].
pub fn theta_of_tau(family: CopulaFamily, tau: f64) -> Result<f64> {
    let bad = || domain(format!("tau = {tau} not attainable by the {} family", family.name()));
    if !tau.is_finite() {
        return bad();
    }
    match family {
        CopulaFamily::Independence => {
            if tau == 0.0 {
                Ok(0.0)
            } else {
                bad()
            }
        }
        CopulaFamily::Clayton => {
            if tau > 0.0 && tau < 1.0 {
                Ok(2.0 * tau / (1.0 - tau))
            } else {
                bad()
            }
        }
        CopulaFamily::Gumbel => {
            if (0.0..1.0).contains(&tau) {
                Ok(1.0 / (1.0 - tau))
            } else {
                bad()
            }
        }
        CopulaFamily::Frank => {
            if tau == 0.0 || tau.abs() >= 1.0 {
                return bad();
            }
            // τ is odd in θ; solve for |τ|.
            let target = tau.abs();
            let mut lo = 0.0;
            let mut hi = 1.0;
            while frank_tau(hi) < target {
                lo = hi;
                hi *= 2.0;
                if hi > 1e8 {
                    return bad();
                }
            }
            let mut th = 0.5 * (lo + hi);
            for _ in 0..200 {
                let f = frank_tau(th) - target;
                if f.abs() < 1e-13 {
                    break;
                }
                if f > 0.0 {
                    hi = th;
                } else {
                    lo = th;
                }
                let mut next = th - f / frank_dtau(th);
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                th = next;
                if hi - lo < 1e-15 * hi {
                    break;
                }
            }
            Ok(th.copysign(tau))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{gauss_legendre, graded_unit_rule, integrate_adaptive};

    fn cop(f: CopulaFamily, th: f64) -> BivariateCopula {
        BivariateCopula::new(f, th).unwrap()
    }

    fn grid_models() -> Vec<BivariateCopula> {
        let mut v = vec![BivariateCopula::independence()];
        for th in [0.3, 2.0, 6.0] {
            v.push(cop(CopulaFamily::Clayton, th));
        }
        for th in [1.0, 1.4, 2.0, 4.0] {
            v.push(cop(CopulaFamily::Gumbel, th));
        }
        for th in [-8.0, -2.37, 0.5, 2.37, 5.76, 15.0] {
            v.push(cop(CopulaFamily::Frank, th));
        }
        v
    }

    const PTS: [f64; 6] = [0.01, 0.1, 0.3, 0.55, 0.8, 0.99];

    #[test]
    fn parameter_ranges() {
        assert!(BivariateCopula::new(CopulaFamily::Clayton, 0.0).is_err());
        assert!(BivariateCopula::new(CopulaFamily::Gumbel, 0.99).is_err());
        assert!(BivariateCopula::new(CopulaFamily::Frank, 0.0).is_err());
        assert!(BivariateCopula::new(CopulaFamily::Frank, -3.0).is_ok());
        assert!(BivariateCopula::new(CopulaFamily::Clayton, f64::NAN).is_err());
        assert_eq!("GUMBEL".parse::<CopulaFamily>().unwrap(), CopulaFamily::Gumbel);
        assert!("student".parse::<CopulaFamily>().is_err());
    }

    #[test]
    fn cdf_examples() {
        let ind = BivariateCopula::independence();
        assert!((ind.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-15);
        let c = cop(CopulaFamily::Clayton, 2.0);
        assert!((c.cdf(0.5, 0.5).unwrap() - 7f64.powf(-0.5)).abs() < 1e-12);
        for u in [0.0, 0.2, 0.9, 1.0] {
            assert_eq!(c.cdf(u, 1.0).unwrap(), u);
            assert_eq!(c.cdf(u, 0.0).unwrap(), 0.0);
        }
        assert!(c.cdf(1.2, 0.5).is_err());
        assert!(c.pdf(0.5, -0.1).is_err());
    }

    #[test]
    fn clayton_cdf_matches_integrated_density() {
        // C(u, v) = ∫_0^v ∫_0^u c, done as ∫_0^v h(u | t) dt and as the
        // graded tensor rule over the rectangle
        let c = cop(CopulaFamily::Clayton, 2.0);
        let via_h = integrate_adaptive(|t| c.hfun(0.5, t).unwrap(), 0.0, 0.5, 1e-13);
        assert!((via_h - 0.377964473).abs() < 1e-8, "{via_h}");
        let (x, w) = graded_unit_rule(16);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            for (xj, wj) in x.iter().zip(&w) {
                s += wi * wj * c.pdf(0.5 * xi, 0.5 * xj).unwrap();
            }
        }
        s *= 0.25;
        assert!((s - c.cdf(0.5, 0.5).unwrap()).abs() < 1e-6, "{s}");
    }

    #[test]
    fn hfun_examples() {
        let c = cop(CopulaFamily::Clayton, 2.0);
        let expected = 0.5f64.powi(-3) * 7f64.powf(-1.5);
        assert!((c.hfun(0.5, 0.5).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.431959).abs() < 1e-6);
        let ind = BivariateCopula::independence();
        assert_eq!(ind.hfun(0.37, 0.2).unwrap(), 0.37);
        for m in grid_models() {
            assert_eq!(m.hfun(0.0, 0.4).unwrap(), 0.0);
            assert_eq!(m.hfun(1.0, 0.4).unwrap(), 1.0);
        }
        // Gumbel θ = 2 at the diagonal point against a finite difference in v
        let g = cop(CopulaFamily::Gumbel, 2.0);
        let fd = (g.cdf(0.5, 0.5 + 1e-6).unwrap() - g.cdf(0.5, 0.5 - 1e-6).unwrap()) / 2e-6;
        assert!((g.hfun(0.5, 0.5).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn hfun_matches_finite_difference() {
        let step = 1e-6;
        for m in grid_models() {
            for &u in &PTS {
                for &v in &PTS {
                    let fd = (m.cdf(u, v + step).unwrap() - m.cdf(u, v - step).unwrap()) / (2.0 * step);
                    let h = m.hfun(u, v).unwrap();
                    let err = (h - fd).abs() / h.abs().max(1e-3);
                    assert!(err < 1e-4, "{m} u={u} v={v} h={h} fd={fd}");
                }
            }
        }
    }

    #[test]
    fn pdf_matches_mixed_finite_difference() {
        let s = 1e-4;
        for m in grid_models() {
            for &u in &PTS[1..5] {
                for &v in &PTS[1..5] {
                    let c = |a, b| m.cdf(a, b).unwrap();
                    let fd = (c(u + s, v + s) - c(u + s, v - s) - c(u - s, v + s) + c(u - s, v - s)) / (4.0 * s * s);
                    let p = m.pdf(u, v).unwrap();
                    // cdf round-off (~1e-16 / s²) dominates where the density is tiny
                    assert!((p - fd).abs() < 1e-3 * p.max(1e-3), "{m} u={u} v={v} pdf={p} fd={fd}");
                    let fd_h = (m.hfun(u + 1e-6, v).unwrap() - m.hfun(u - 1e-6, v).unwrap()) / 2e-6;
                    assert!((p - fd_h).abs() < 1e-5 * p.max(1e-3), "{m} u={u} v={v}");
                }
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let (x, w) = graded_unit_rule(16);
        assert!(x.len() >= 64);
        for m in grid_models() {
            let mut s = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                for (xj, wj) in x.iter().zip(&w) {
                    s += wi * wj * m.pdf(*xi, *xj).unwrap();
                }
            }
            assert!((s - 1.0).abs() < 1e-5, "{m}: {s}");
        }
    }

    #[test]
    fn hinv_round_trip() {
        for m in grid_models() {
            for &u in &PTS {
                for &v in &PTS {
                    let p = m.hfun(u, v).unwrap();
                    let back = m.hinv(p, v).unwrap();
                    // where h is flat the inverse is ill-conditioned; compare on the h scale
                    let ok = (back - u).abs() < 1e-8 || (m.hfun(back, v).unwrap() - p).abs() < 1e-10;
                    assert!(ok, "{m} u={u} v={v} back={back}");
                }
            }
        }
    }

    #[test]
    fn hinv_examples() {
        let c = cop(CopulaFamily::Clayton, 2.0);
        let p = c.hfun(0.3, 0.6).unwrap();
        assert!((c.hinv(p, 0.6).unwrap() - 0.3).abs() < 1e-9);
        let ind = BivariateCopula::independence();
        assert_eq!(ind.hinv(0.42, 0.9).unwrap(), 0.42);
        // bisection oracle for Frank θ = 5
        let f = cop(CopulaFamily::Frank, 5.0);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f.hfun(mid, 0.2).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((f.hinv(0.5, 0.2).unwrap() - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau_of_theta(CopulaFamily::Clayton, 2.0).unwrap(), 0.5);
        assert_eq!(tau_of_theta(CopulaFamily::Gumbel, 2.0).unwrap(), 0.5);
        assert!((tau_of_theta(CopulaFamily::Frank, 2.37).unwrap() - 0.25).abs() < 5e-3);
        assert!((theta_of_tau(CopulaFamily::Clayton, 0.25).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((theta_of_tau(CopulaFamily::Gumbel, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((theta_of_tau(CopulaFamily::Frank, 0.167).unwrap() - 1.53).abs() < 0.01);
        assert!(theta_of_tau(CopulaFamily::Clayton, -0.2).is_err());
        assert!(theta_of_tau(CopulaFamily::Frank, 1.0).is_err());
        assert!(tau_of_theta(CopulaFamily::Gumbel, 0.5).is_err());
    }

    #[test]
    fn frank_tau_matches_quadrature_of_density() {
        // τ = 4 E[C(U,V)] - 1 under the copula
        let (x, w) = gauss_legendre(96);
        for th in [-4.0, 2.37, 5.76] {
            let m = cop(CopulaFamily::Frank, th);
            let mut s = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                for (xj, wj) in x.iter().zip(&w) {
                    let (u, v) = (0.5 * (xi + 1.0), 0.5 * (xj + 1.0));
                    s += wi * wj * m.pdf(u, v).unwrap() * m.cdf(u, v).unwrap();
                }
            }
            let tau = 4.0 * 0.25 * s - 1.0;
            assert!((tau - m.tau()).abs() < 1e-6, "{th}: {tau} vs {}", m.tau());
        }
    }

    #[test]
    fn tau_round_trip() {
        for i in 1..10 {
            for sign in [-1.0, 1.0] {
                let tau = sign * i as f64 / 10.0;
                for f in [CopulaFamily::Clayton, CopulaFamily::Gumbel, CopulaFamily::Frank] {
                    if let Ok(th) = theta_of_tau(f, tau) {
                        assert!((tau_of_theta(f, th).unwrap() - tau).abs() < 1e-8, "{f} {tau}");
                    } else {
                        assert!(tau < 0.0 && f != CopulaFamily::Frank);
                    }
                }
            }
        }
    }

    #[test]
    fn near_zero_frank_is_independence() {
        let f = cop(CopulaFamily::Frank, 1e-7);
        assert_eq!(f.hfun(0.3, 0.8).unwrap(), 0.3);
        assert_eq!(f.log_pdf(0.3, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn extreme_inputs_stay_finite() {
        for m in [
            cop(CopulaFamily::Clayton, 100.0),
            cop(CopulaFamily::Clayton, 1e-6),
            cop(CopulaFamily::Gumbel, 60.0),
            cop(CopulaFamily::Frank, 100.0),
            cop(CopulaFamily::Frank, -100.0),
        ] {
            for u in [0.0, 1e-12, 0.5, 1.0 - 1e-12, 1.0] {
                for v in [0.0, 1e-12, 0.5, 1.0 - 1e-12, 1.0] {
                    assert!(m.log_pdf_clamped(u, v).is_finite(), "{m} {u} {v}");
                    let h = m.hfun_clamped(u, v);
                    assert!((0.0..=1.0).contains(&h), "{m} {u} {v}");
                    let back = m.hinv_clamped(h, v).unwrap();
                    assert!((0.0..=1.0).contains(&back));
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn model() -> impl Strategy<Value = BivariateCopula> {
            prop_oneof![
                (0.05f64..20.0).prop_map(|t| cop(CopulaFamily::Clayton, t)),
                (1.0f64..15.0).prop_map(|t| cop(CopulaFamily::Gumbel, t)),
                (-30.0f64..30.0).prop_filter("nonzero", |t| t.abs() > 1e-3).prop_map(|t| cop(CopulaFamily::Frank, t)),
            ]
        }

        proptest! {
            #[test]
            fn two_increasing(m in model(), a in 0.0f64..1.0, b in 0.0f64..1.0,
                              c in 0.0f64..1.0, d in 0.0f64..1.0) {
                let (u1, u2) = (a.min(b), a.max(b));
                let (v1, v2) = (c.min(d), c.max(d));
                let vol = m.cdf(u2, v2).unwrap() - m.cdf(u1, v2).unwrap()
                    - m.cdf(u2, v1).unwrap() + m.cdf(u1, v1).unwrap();
                prop_assert!(vol >= -1e-12, "{} {}", m, vol);
            }

            #[test]
            fn hfun_monotone_in_u(m in model(), a in 0.0f64..1.0, b in 0.0f64..1.0, v in 0.001f64..0.999) {
                let (u1, u2) = (a.min(b), a.max(b));
                prop_assert!(m.hfun(u1, v).unwrap() <= m.hfun(u2, v).unwrap() + 1e-14);
            }

            #[test]
            fn hinv_inverts_hfun(m in model(), p in 0.001f64..0.999, v in 0.001f64..0.999) {
                let u = m.hinv(p, v).unwrap();
                prop_assert!((m.hfun(u, v).unwrap() - p).abs() < 1e-8, "{} u={}", m, u);
            }
        }
    }
}
