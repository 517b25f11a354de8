//! Closed-form right-hand sides of the concentration and tail inequalities
//! and the constants derived from them.

use std::f64::consts::PI;
use std::fmt;

use num_rational::Rational64;

use crate::density::{density_constants, DensityConstants};
use crate::game::compute_probabilities;
use crate::{Error, Result};

/// Probability mass kept in the main part of every split.
pub const PROB_MAIN: f64 = 0.99;
/// Probability mass given up in every split.
pub const PROB_SLACK: f64 = 0.01;
/// Lower factor of the clock event `0.99 alpha tau_g < tau~_g`.
pub const SPLIT_LOW: f64 = PROB_MAIN;
/// Upper factor of the clock event `tau~_g < 1.01 alpha tau_g`.
pub const SPLIT_HIGH: f64 = 1.0 + PROB_SLACK;
/// Denominator of the clock Hoeffding exponent `alpha^2 j / (2 10^4)`.
pub const CLOCK_RATE_DENOM: f64 = 2.0e4;

/// `4 n exp(-lambda^2 / (2 N b^2 n))`: Hoeffding's inequality for the
/// maximum of partial sums of `N` independent centred vectors bounded by
/// `b`, with the factor 4 from the Levy-Kolmogorov reflection. May exceed 1.
pub fn hoeffding_bound(steps: u64, b: f64, n: usize, lambda: f64) -> f64 {
    let nf = n as f64;
    4.0 * nf * (-lambda * lambda / (2.0 * steps as f64 * b * b * nf)).exp()
}

/// `(2 / sqrt(2 pi)) int_l^inf exp(-s^2 / 2) ds = erfc(l / sqrt 2)`.
pub fn gaussian_tail(l: f64) -> f64 {
    if l == f64::INFINITY {
        return 0.0;
    }
    libm::erfc(l / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReflectionCheck {
    /// `P(max_{m <= N} S_m >= l)`.
    pub lhs: Rational64,
    /// `2 P(S_N >= l) - P(S_N = l)`.
    pub rhs: Rational64,
    pub equal: bool,
}

pub const MAX_REFLECTION_STEPS: u32 = 24;

/// Counts, over all `2^N` paths of a `+-1` walk, how many have running
/// maximum `>= l`, final value `>= l` and final value `== l`, for every
/// `l` in `0..=N`.
fn reflection_counts(steps: u32) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let n = steps as usize;
    let mut max_hist = vec![0u64; n + 1];
    let mut end_hist = vec![0u64; 2 * n + 1];
    for mask in 0u32..(1u32 << steps) {
        let mut s = 0i32;
        let mut m = 0i32;
        for i in 0..steps {
            s += if mask >> i & 1 == 1 { 1 } else { -1 };
            m = m.max(s);
        }
        max_hist[m as usize] += 1;
        end_hist[(s + steps as i32) as usize] += 1;
    }
    let at_least = |hist: &[u64], offset: usize| -> Vec<u64> {
        (0..=n).map(|l| hist[l + offset..].iter().sum()).collect()
    };
    let max_ge = at_least(&max_hist, 0);
    let end_ge = at_least(&end_hist, n);
    let end_eq = (0..=n).map(|l| end_hist[l + n]).collect();
    (max_ge, end_ge, end_eq)
}

/// Exact check of `P(max_{m <= N} S_m >= l) = 2 P(S_N >= l) - P(S_N = l)`
/// for the simple symmetric walk, by enumerating all paths.
pub fn reflection_identity_check(steps: u32, l: u32) -> Result<ReflectionCheck> {
    Ok(reflection_sweep(steps)?
        .into_iter()
        .nth(
            l.checked_sub(1)
                .ok_or_else(|| Error::param("l must be at least 1"))? as usize,
        )
        .ok_or_else(|| Error::param("l must not exceed N"))?)
}

/// The reflection check for every `l` in `1..=N`.
pub fn reflection_sweep(steps: u32) -> Result<Vec<ReflectionCheck>> {
    if steps < 1 {
        return Err(Error::param("N must be at least 1"));
    }
    if steps > MAX_REFLECTION_STEPS {
        return Err(Error::param(format!(
            "N = {steps} needs 2^{steps} paths; at most {MAX_REFLECTION_STEPS} steps are enumerated"
        )));
    }
    let (max_ge, end_ge, end_eq) = reflection_counts(steps);
    let total = 1i64 << steps;
    Ok((1..=steps as usize)
        .map(|l| {
            let lhs = Rational64::new(max_ge[l] as i64, total);
            let rhs = Rational64::new(2 * end_ge[l] as i64 - end_eq[l] as i64, total);
            ReflectionCheck {
                lhs,
                rhs,
                equal: lhs == rhs,
            }
        })
        .collect())
}

/// Grid step of [`sin_inequality_check`].
pub const SIN_GRID_STEP: f64 = 1e-4;

/// Smallest slack `(1 - h(m) z^2 / 6) - sin(z) / z` over a grid of step
/// `1e-4` on `[0, m]`, `h(z) = 2 (1 - cos z) / z^2`. A negative value is a
/// violation of `sin z / z <= 1 - h(m) z^2 / 6`.
pub fn sin_inequality_check(m: f64) -> Result<f64> {
    if !(m > 0.0 && m <= 2.0 * PI + 1e-12) {
        return Err(Error::param("m must lie in (0, 2 pi]"));
    }
    let hm = crate::density::h(m);
    let points = (m / SIN_GRID_STEP).floor() as usize;
    let slack = |z: f64| {
        let sinc = if z == 0.0 { 1.0 } else { z.sin() / z };
        (1.0 - hm * z * z / 6.0) - sinc
    };
    let mut worst = slack(m);
    for i in 0..=points {
        worst = worst.min(slack(i as f64 * SIN_GRID_STEP));
    }
    Ok(worst)
}

/// `nu_{n,p} = 2 sqrt((beta + 0.01 alpha) / (0.99 alpha))` from the clock
/// probability `alpha` and `beta = 1 - alpha`.
pub fn nu_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha must lie in (0, 1]"));
    }
    let beta = 1.0 - alpha;
    Ok(2.0 * ((beta + PROB_SLACK * alpha) / (PROB_MAIN * alpha)).sqrt())
}

pub fn nu_np(n: usize, p: f64) -> Result<f64> {
    let (alpha, _) = compute_probabilities(n, p)?;
    nu_from_alpha(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Empirical,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::Empirical => "empirical",
        })
    }
}

/// Constants of the cylinder estimate and the regularity argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityConstants {
    pub n: usize,
    pub p: f64,
    pub nu_np: f64,
    /// `nu_np / C` with the measured bottom-exit constant `C`.
    pub ctilde_np: f64,
    pub theta_np: f64,
    /// `theta_np / 2`.
    pub theta: f64,
    /// Measure density constant of the domain at the boundary point.
    pub c_density: f64,
    pub c_np_empirical: f64,
    pub cstar: f64,
    pub density: DensityConstants,
}

impl RegularityConstants {
    pub fn provenance(&self, field: &str) -> Provenance {
        match field {
            "ctilde_np" | "theta_np" | "theta" | "c_np_empirical" => Provenance::Empirical,
            _ => Provenance::Analytic,
        }
    }

    /// Flat `key = value` report.
    pub fn to_key_values(&self) -> String {
        let d = &self.density;
        let rows: [(&str, String); 17] = [
            ("n", self.n.to_string()),
            ("p", self.p.to_string()),
            ("nu_np", self.nu_np.to_string()),
            ("ctilde_np", self.ctilde_np.to_string()),
            ("theta_np", self.theta_np.to_string()),
            ("theta", self.theta.to_string()),
            ("c_density", self.c_density.to_string()),
            ("c_np_empirical", self.c_np_empirical.to_string()),
            ("cstar", self.cstar.to_string()),
            ("c_n", d.c_n.to_string()),
            ("c1_term", d.c1_term.to_string()),
            ("c2_term", d.c2_term.to_string()),
            ("c_one", d.c_one.to_string()),
            ("k0", d.k0.to_string()),
            ("cstar_max", d.cstar_max.to_string()),
            ("omega_n", d.omega_n.to_string()),
            ("first_zero", d.first_zero.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k} = {v}  # {}\n", self.provenance(k)));
        }
        out
    }
}

/// Fills in `nu`, `C~ = nu / C` and
/// `theta_np = omega_n c (C*/C1)^n (0.99/omega_n - C_n C*^n) gaussian_tail(C~ / 3)`.
/// `cstar` defaults to half of its admissible maximum.
pub fn compute_regularity_constants(
    n: usize,
    p: f64,
    c_density: f64,
    c_np_empirical: f64,
    cstar: Option<f64>,
) -> Result<RegularityConstants> {
    let density = density_constants(n)?;
    regularity_constants_with(n, p, c_density, c_np_empirical, cstar, density)
}

pub fn regularity_constants_with(
    n: usize,
    p: f64,
    c_density: f64,
    c_np_empirical: f64,
    cstar: Option<f64>,
    density: DensityConstants,
) -> Result<RegularityConstants> {
    if !(c_density > 0.0 && c_density <= 1.0) {
        return Err(Error::param("measure density constant must lie in (0, 1]"));
    }
    if !(c_np_empirical > 0.0) {
        return Err(Error::param("bottom-exit constant must be positive"));
    }
    if density.n != n {
        return Err(Error::param("density constants are for another dimension"));
    }
    let nu = nu_np(n, p)?;
    let cstar = cstar.unwrap_or(0.5 * density.cstar_max);
    let ni = n as i32;
    let ctilde = nu / c_np_empirical;
    let theta_np = density.omega_n
        * c_density
        * (cstar / density.c_one).powi(ni)
        * (PROB_MAIN / density.omega_n - density.c_n * cstar.powi(ni))
        * gaussian_tail(ctilde / 3.0);
    if !(theta_np > 0.0) {
        return Err(Error::Invariant(format!(
            "theta = {theta_np} is not positive; C* = {cstar} must stay below {}",
            density.cstar_max
        )));
    }
    Ok(RegularityConstants {
        n,
        p,
        nu_np: nu,
        ctilde_np: ctilde,
        theta_np,
        theta: 0.5 * theta_np,
        c_density,
        c_np_empirical,
        cstar,
        density,
    })
}

/// `sum_{j >= J} 8 exp(-gamma j)` with `gamma = alpha^2 / (2 10^4)`, in
/// closed form.
pub fn clock_hoeffding_series(alpha: f64, start: u64) -> f64 {
    let gamma = alpha * alpha / CLOCK_RATE_DENOM;
    8.0 * (-gamma * start as f64).exp() / -(-gamma).exp_m1()
}

/// `1 - 4 exp(-margin^2 / (2 a eps))`: Hoeffding lower bound for
/// `P(tau~_g >= a / eps)`.
pub fn vertical_hoeffding_lower(margin: f64, a: f64, eps: f64) -> f64 {
    1.0 - 4.0 * (-margin * margin / (2.0 * a * eps)).exp()
}

/// Explicit ingredients of the two clock estimates. The `O(eps)` slack of
/// the ceiling comes from a Berry-Esseen rate whose constant is left
/// unspecified; it is kept symbolic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockBounds {
    /// `sum_{j >= a/eps} 8 exp(-alpha^2 j / (2 10^4))`.
    pub hoeffding_series: f64,
    /// `4 exp(-min(t0, r - t0)^2 / (2 a eps))`.
    pub vertical_term: f64,
    /// `1 - hoeffding_series - vertical_term`, the explicit part of the
    /// `1 - O(eps)` lower bound for `P(tau_g - tau~_g >= a / eps)`.
    pub lower_eps1: f64,
    /// `1 - gaussian_tail(2 min(t0, r - t0) / sqrt d)`, ceiling for
    /// `P(tau~_g >= d / eps^2)` up to the symbolic slack.
    pub upper_eps2: f64,
}

impl ClockBounds {
    pub const SLACK: &'static str = "O(eps), Berry-Esseen constant unspecified";
}

pub fn lemma_a_clock_bounds(
    n: usize,
    p: f64,
    r: f64,
    t0: f64,
    eps: f64,
    a: f64,
    d: f64,
) -> Result<ClockBounds> {
    let (alpha, _) = compute_probabilities(n, p)?;
    if !(r > 0.0 && t0 > 0.0 && t0 < r && eps > 0.0 && a > 0.0 && d > 0.0) {
        return Err(Error::param("need 0 < t0 < r and eps, a, d > 0"));
    }
    let margin = t0.min(r - t0);
    let series = clock_hoeffding_series(alpha, (a / eps).ceil() as u64);
    let vertical = 1.0 - vertical_hoeffding_lower(margin, a, eps);
    Ok(ClockBounds {
        hoeffding_series: series,
        vertical_term: vertical,
        lower_eps1: 1.0 - series - vertical,
        upper_eps2: 1.0 - gaussian_tail(2.0 * margin / d.sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_small_cases() {
        let c = reflection_identity_check(2, 1).unwrap();
        assert_eq!(c.lhs, Rational64::new(1, 2));
        assert_eq!(c.rhs, Rational64::new(1, 2));
        assert!(c.equal);
        assert!(reflection_identity_check(1, 1).unwrap().equal);
        assert!(reflection_identity_check(3, 4).is_err());
        assert!(reflection_identity_check(25, 1).is_err());
    }

    #[test]
    fn gaussian_tail_values() {
        assert_eq!(gaussian_tail(0.0), 1.0);
        assert_eq!(gaussian_tail(f64::INFINITY), 0.0);
        for (l, v) in [
            (0.5, 0.617075077451973792724590778783),
            (1.0, 0.317310507862914102829534908736),
            (1.96, 0.0499957902964408724256473847911),
            (3.0, 0.00269979606326018905330362953519),
        ] {
            assert!((gaussian_tail(l) - v).abs() < 1e-14, "l = {l}");
        }
    }

    #[test]
    fn nu_examples() {
        let direct = 2.0 * ((2.0 / 3.0 + 0.01 / 3.0) / (0.99 / 3.0) as f64).sqrt();
        assert!((nu_np(2, 4.0).unwrap() - direct).abs() < 1e-14);
        assert!((nu_np(2, 4.0).unwrap() - 2.85).abs() < 1e-2);
        assert!((nu_from_alpha(1.0).unwrap() - 2.0 * (0.01f64 / 0.99).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn series_closed_form_matches_direct_sum() {
        let alpha = 1.0 / 3.0;
        let gamma = alpha * alpha / CLOCK_RATE_DENOM;
        let direct: f64 = (1000u64..5_000_000)
            .rev()
            .map(|j| 8.0 * (-gamma * j as f64).exp())
            .sum();
        let closed = clock_hoeffding_series(alpha, 1000);
        let rest = clock_hoeffding_series(alpha, 5_000_000);
        assert!(((direct + rest) - closed).abs() / closed < 1e-12);
    }
}
