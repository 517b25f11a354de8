//! Densities of sums of independent uniform vectors in the `eps`-ball.
//!
//! `f_k` denotes the density of `Z_1 + ... + Z_k` with `Z_i` uniform in
//! `B_eps(0)` of `R^n`. It is radial and nonincreasing in the radius. In one
//! dimension it is a rescaled Irwin-Hall density and is evaluated exactly;
//! in general it is obtained from the characteristic function
//! `phi(u) = Lambda_{n/2}(eps |u|)` by Fourier inversion, or sampled.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bounds::PROB_MAIN;
use crate::rng::{sample_ball, stream_rng};
use crate::special::{bessel_j, bessel_lambda, bessel_zeros, gamma_half, integrate};
use crate::{Error, Result};

/// Largest `k` accepted by the exact one-dimensional evaluator. The exact
/// arithmetic has no overflow; the cap only bounds the cost.
pub const MAX_EXACT_K: u32 = 400;

/// Default absolute accuracy of the inversion integrals.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-8;

/// Volume of the unit ball, `pi^{n/2} / Gamma(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half(n as u32 + 2)
}

/// Surface area of the unit sphere `S^{n-1}`, `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n as u32)
}

fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::param(format!("non-finite value {x}")))
}

/// Irwin-Hall density of the sum of `k` uniform variables on `(0, 1)`,
/// evaluated exactly:
/// `(1 / (k-1)!) sum_{j <= u} (-1)^j C(k, j) (u - j)^{k-1}` on `(0, k)`.
pub fn irwin_hall_density(k: u32, u: &BigRational) -> BigRational {
    let kk = BigRational::from_integer(BigInt::from(k));
    if k == 0 || *u <= BigRational::zero() || *u >= kk {
        return BigRational::zero();
    }
    // u = a / b; every term shares the denominator b^{k-1}.
    let a = u.numer();
    let b = u.denom();
    let top = u.floor().to_integer().to_u32().expect("0 < u < k");
    let mut binom = BigInt::one();
    let mut sum = BigInt::zero();
    for j in 0..=top {
        let base = a - b * BigInt::from(j);
        let term = &binom * num_traits::pow(base, (k - 1) as usize);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
    }
    let mut den = num_traits::pow(b.clone(), (k - 1) as usize);
    for i in 2..k {
        den *= BigInt::from(i);
    }
    BigRational::new(sum, den)
}

/// Exact `f_k(x)` in one dimension as a rational number, for rational
/// inputs.
pub fn density1d_exact_rational(k: u32, eps: &BigRational, x: &BigRational) -> BigRational {
    let two_eps = eps * BigRational::from_integer(BigInt::from(2));
    let u = (x + eps * BigRational::from_integer(BigInt::from(k))) / &two_eps;
    irwin_hall_density(k, &u) / two_eps
}

/// `f_k(x)` in one dimension. The alternating sum is carried out exactly on
/// the binary values of `x` and `eps` and rounded once at the end.
pub fn density1d_exact(k: u32, eps: f64, x: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::param("k must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    if k > MAX_EXACT_K {
        return Err(Error::param(format!(
            "k = {k} exceeds {MAX_EXACT_K} for exact evaluation; use inversion or Monte Carlo"
        )));
    }
    if x.abs() >= k as f64 * eps {
        return Ok(0.0);
    }
    let v = density1d_exact_rational(k, &rational(eps)?, &rational(x)?);
    v.to_f64()
        .ok_or_else(|| Error::Numeric("rational density not representable".into()))
}

/// The characteristic function of the uniform law on `B_eps(0)` at
/// frequency `|u| = s`: `Gamma(n/2 + 1) (2 / (eps s))^{n/2} J_{n/2}(eps s)`.
pub fn char_fn(n: usize, eps: f64, s: f64) -> f64 {
    bessel_lambda(n as i32, eps * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionResult {
    pub value: f64,
    /// Quadrature error estimate plus the analytic tail bound.
    pub error_bound: f64,
    /// Frequency cutoff (in units of `1 / eps`).
    pub cutoff: f64,
    pub tail_bound: f64,
}

/// Bound on `int_Z^inf |Lambda_{n/2}(z)|^k z^{n-1} dz`, the smaller of the
/// bound from `|J| <= 1` and, for `Z >= max(10, 2 nu^2)`, the bound from
/// the Bessel envelope `|J_nu(x)|^2 <= (2 / (pi x)) (1 + (mu - 1) / (4 Z^2))`
/// with `mu = 4 nu^2`.
pub fn inversion_tail_bound(n: usize, k: u32, z: f64) -> f64 {
    let nu = n as f64 / 2.0;
    let nf = n as f64;
    let kf = k as f64;
    let ln_g = gamma_half(n as u32 + 2).ln() + nu * 2f64.ln();
    let mut best = f64::INFINITY;
    if kf * nu > nf {
        let e = kf * nu - nf;
        best = (kf * ln_g - e * z.ln() - e.ln()).exp();
    }
    let e = kf * (nu + 0.5) - nf;
    if z >= 10f64.max(2.0 * nu * nu) && e > 0.0 {
        let mu = 4.0 * nu * nu;
        let env = (2.0 / PI) * (1.0 + (mu - 1.0) / (4.0 * z * z));
        let sharp = (kf * (ln_g + 0.5 * env.ln()) - e * z.ln() - e.ln()).exp();
        best = best.min(sharp);
    }
    best
}

const MAX_CUTOFF: f64 = 4.0e6;

/// `f_k` at distance `radius` from the origin by radial Fourier inversion:
/// `eps^{-n} (2 pi)^{-n} |S^{n-1}| int_0^inf Lambda_{n/2}(z)^k
/// Lambda_{n/2-1}(z radius / eps) z^{n-1} dz`.
///
/// The integral is cut at the first `Z` whose tail bound is below `tol / 2`
/// and integrated over panels of width `pi` with adaptive Kronrod rules.
pub fn density_inversion(
    n: usize,
    eps: f64,
    k: u32,
    radius: f64,
    tol: f64,
) -> Result<InversionResult> {
    if n < 1 || k < 1 || !(eps > 0.0) || !(radius >= 0.0) || !(tol > 0.0) {
        return Err(Error::param(
            "inversion needs n, k >= 1, eps > 0, radius >= 0, tol > 0",
        ));
    }
    let scale = unit_sphere_area(n) / ((2.0 * PI).powi(n as i32) * eps.powi(n as i32));
    let mut z = 16.0;
    let mut tail = scale * inversion_tail_bound(n, k, z);
    while tail > 0.5 * tol {
        if z >= MAX_CUTOFF {
            return Err(Error::Accuracy {
                requested: tol,
                achievable: tail,
            });
        }
        z *= 2.0;
        tail = scale * inversion_tail_bound(n, k, z);
    }
    let panels = (z / PI).ceil() as usize;
    let z = panels as f64 * PI;
    let rho = radius / eps;
    let m = n as i32;
    let f = |t: f64| {
        let mut v = bessel_lambda(m, t).powi(k as i32) * t.powi(m - 1);
        if rho > 0.0 {
            v *= bessel_lambda(m - 2, t * rho);
        }
        v
    };
    let panel_tol = 0.5 * tol / (scale * panels as f64);
    let parts: Vec<(f64, f64)> = (0..panels)
        .into_par_iter()
        .map(|i| integrate(&f, i as f64 * PI, (i + 1) as f64 * PI, panel_tol))
        .collect();
    let (mut value, mut err) = (0.0, 0.0);
    for (v, e) in parts {
        value += v;
        err += e;
    }
    Ok(InversionResult {
        value: scale * value,
        error_bound: scale * err + tail,
        cutoff: z,
        tail_bound: tail,
    })
}

/// `f_k(0)` by inversion.
pub fn density_origin_inversion(n: usize, eps: f64, k: u32, tol: f64) -> Result<InversionResult> {
    density_inversion(n, eps, k, 0.0, tol)
}

/// `h(z) = 2 (1 - cos z) / z^2`, with `h(0) = 1`.
pub fn h(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 12.0 + z2 * z2 / 360.0
    } else {
        2.0 * (1.0 - z.cos()) / (z * z)
    }
}

/// Upper bound for the one-dimensional `f_k(0)`:
/// `sqrt(3 / (2 pi h(1))) / (sqrt(k) eps) + 1 / (pi eps (k - 1))`.
pub fn density1d_origin_bound(k: u32, eps: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::param("the bound needs k >= 2"));
    }
    let kf = k as f64;
    Ok((3.0 / (2.0 * PI * h(1.0))).sqrt() / (kf.sqrt() * eps) + 1.0 / (PI * eps * (kf - 1.0)))
}

/// Positive zeros of `J_nu`, `nu = m / 2`, in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselTable {
    /// Twice the order.
    pub m: i32,
    pub zeros: Vec<f64>,
}

impl BesselTable {
    pub fn new(m: i32, count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::param("need at least one zero"));
        }
        Ok(BesselTable {
            m,
            zeros: bessel_zeros(m, count)?,
        })
    }

    pub fn nu(&self) -> f64 {
        self.m as f64 / 2.0
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    /// `sum_{l <= L} j_l^{-2}`.
    pub fn rayleigh_partial(&self) -> f64 {
        // Smallest terms first.
        self.zeros.iter().rev().map(|j| 1.0 / (j * j)).sum()
    }

    /// Integral estimate of the truncated tail from the zero asymptotics
    /// `j_l ~ (l + nu/2 - 1/4) pi`.
    pub fn rayleigh_tail(&self) -> f64 {
        let shift = 0.5 * self.nu() - 0.25;
        1.0 / (PI * PI * (self.len() as f64 + shift + 0.5))
    }

    /// Partial sum plus tail estimate; the exact value is `1 / (4 (nu + 1))`.
    pub fn rayleigh_sum(&self) -> f64 {
        self.rayleigh_partial() + self.rayleigh_tail()
    }

    /// Checks the stored zeros: `|J(z)| < 1e-12`, increasing, and the first
    /// one above `nu + 2`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (i, &z) in self.zeros.iter().enumerate() {
            let v = bessel_j(self.m, z);
            if v.abs() >= 1e-12 {
                return Err(format!("|J({z})| = {v:e} at zero {}", i + 1));
            }
            if i > 0 && z <= self.zeros[i - 1] {
                return Err(format!("zeros not increasing at {}", i + 1));
            }
        }
        if self.zeros[0] <= self.nu() + 2.0 {
            return Err("first zero below nu + 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductCheck {
    /// Truncated product `prod_{l <= L} (1 - z^2 / j_l^2)`.
    pub product: f64,
    /// `Lambda_nu(z) = Gamma(nu + 1) (2 / z)^nu J_nu(z)`.
    pub direct: f64,
    pub rel_err: f64,
}

/// Compares the truncated infinite product of `J_nu` with direct
/// evaluation, both normalised by `(z / 2)^nu / Gamma(nu + 1)`.
pub fn bessel_product_check_with(table: &BesselTable, z: f64) -> Result<ProductCheck> {
    let last = *table.zeros.last().expect("non-empty table");
    if z.abs() >= last {
        return Err(Error::param("z must be below the last tabulated zero"));
    }
    let product: f64 = table.zeros.iter().map(|j| 1.0 - (z / j).powi(2)).product();
    let direct = bessel_lambda(table.m, z.abs());
    let rel_err = if direct == 0.0 {
        product.abs()
    } else {
        ((product - direct) / direct).abs()
    };
    Ok(ProductCheck {
        product,
        direct,
        rel_err,
    })
}

pub fn bessel_product_check(m: i32, z: f64, count: usize) -> Result<ProductCheck> {
    bessel_product_check_with(&BesselTable::new(m, count)?, z)
}

/// Number of zeros used for the Rayleigh sums in the constants.
pub const RAYLEIGH_ZEROS: usize = 10_000;

/// Constants of the two-sided density estimates in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityConstants {
    pub n: usize,
    /// Constant of the Gaussian part of the origin bound.
    pub c1_term: f64,
    /// Constant of the tail part of the origin bound.
    pub c2_term: f64,
    /// `C_n = 2 max(c1_term, c2_term)`: `f_k(0) <= C_n (sqrt(k) eps)^{-n}`.
    pub c_n: f64,
    /// `sqrt(2 n ln(400 n))`, the smallest `C` with `4 n exp(-C^2 / (2n)) <= 0.01`.
    pub c_one: f64,
    /// Smallest `k > 2` with `q^k / (k - 2) <= k^{-n/2}`.
    pub k0: u32,
    /// `(0.99 / (omega_n C_n))^{1/n}`.
    pub cstar_max: f64,
    pub omega_n: f64,
    pub first_zero: f64,
    pub rayleigh_sum: f64,
}

pub fn density_constants(n: usize) -> Result<DensityConstants> {
    density_constants_with(n, RAYLEIGH_ZEROS)
}

pub fn density_constants_with(n: usize, zeros: usize) -> Result<DensityConstants> {
    if n < 1 {
        return Err(Error::param("dimension must be at least 1"));
    }
    let table = BesselTable::new(n as i32, zeros)?;
    let nf = n as f64;
    let half = nf / 2.0;
    let g = gamma_half(n as u32 + 2);
    let rayleigh = table.rayleigh_sum();
    let first = table.zeros[0];
    // n int_0^inf e^{-t^2} t^{n-1} dt = n Gamma(n/2) / 2.
    let moment = nf * gamma_half(n as u32) / 2.0;
    let c1 = moment / (g * PI.powf(half) * 2f64.powi(n as i32) * rayleigh.powf(half));
    let c2 = first.powi(n as i32) / (2f64.powi(n as i32 - 1) * g * PI.powf(half));
    let c_n = 2.0 * c1.max(c2);
    let c_one = (2.0 * nf * (400.0 * nf).ln()).sqrt();
    let q = (2.0 / first).powf(half) * g;
    let k0 = (3u32..)
        .find(|&k| {
            let kf = k as f64;
            q.powf(kf) / (kf - 2.0) <= kf.powf(-half)
        })
        .expect("q < 1 so the search terminates");
    let omega_n = unit_ball_volume(n);
    Ok(DensityConstants {
        n,
        c1_term: c1,
        c2_term: c2,
        c_n,
        c_one,
        k0,
        cstar_max: (PROB_MAIN / (omega_n * c_n)).powf(1.0 / nf),
        omega_n,
        first_zero: first,
        rayleigh_sum: rayleigh,
    })
}

impl DensityConstants {
    /// Lower bound `(1/C1)^n (0.99/omega_n - C_n C*^n) (sqrt(k) eps)^{-n}`
    /// for `f_k` at radius `C* sqrt(k) eps`.
    pub fn lower_bound(&self, eps: f64, k: u32, cstar: f64) -> f64 {
        let n = self.n as i32;
        (1.0 / self.c_one).powi(n)
            * (PROB_MAIN / self.omega_n - self.c_n * cstar.powi(n))
            * ((k as f64).sqrt() * eps).powi(-n)
    }

    pub fn upper_bound_at_origin(&self, eps: f64, k: u32) -> f64 {
        self.c_n * ((k as f64).sqrt() * eps).powi(-(self.n as i32))
    }
}

/// Number of samples per parallel chunk; chunk `i` uses its own stream.
const CHUNK: u64 = 1 << 15;

/// Radii `|Z_1 + ... + Z_k|` of `samples` independent sums, visited chunk
/// by chunk in a deterministic order.
fn for_each_sum_radius<T: Send>(
    n: usize,
    eps: f64,
    k: u32,
    samples: u64,
    seed: u64,
    stream: &str,
    init: impl Fn() -> T + Sync,
    visit: impl Fn(&mut T, f64) + Sync,
) -> Vec<T> {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream, c);
            let mut acc = init();
            let mut sum = vec![0.0; n];
            let mut z = vec![0.0; n];
            let todo = CHUNK.min(samples - c * CHUNK);
            for _ in 0..todo {
                sum.iter_mut().for_each(|s| *s = 0.0);
                for _ in 0..k {
                    sample_ball(&mut rng, eps, &mut z);
                    crate::point::add_assign(&mut sum, &z);
                }
                visit(&mut acc, crate::point::norm(&sum));
            }
            acc
        })
        .collect()
}

/// Volume of `{r_lo <= |x| < r_hi}` in `R^n`.
pub fn shell_volume(n: usize, r_lo: f64, r_hi: f64) -> f64 {
    let e = n as i32;
    unit_ball_volume(n) * (r_hi.powi(e) - r_lo.max(0.0).powi(e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundCheck {
    pub radius: f64,
    pub shell_width: f64,
    pub mc_value: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `mc_value >= bound - 3 std_error`.
    pub pass: bool,
}

/// Monte Carlo shell estimate of `f_k` at radius `C* sqrt(k) eps` compared
/// with the lower bound of [`DensityConstants::lower_bound`].
pub fn lower_bound_check(
    constants: &DensityConstants,
    eps: f64,
    k: u32,
    cstar: f64,
    samples: u64,
    seed: u64,
) -> Result<LowerBoundCheck> {
    if k < constants.k0 {
        return Err(Error::param(format!(
            "k = {k} is below k0 = {}",
            constants.k0
        )));
    }
    if !(cstar > 0.0 && cstar < constants.cstar_max.min(constants.c_one)) {
        return Err(Error::param(format!(
            "C* = {cstar} must lie in (0, min(cstar_max, C1)) = (0, {})",
            constants.cstar_max.min(constants.c_one)
        )));
    }
    if samples < 1 {
        return Err(Error::param("samples must be at least 1"));
    }
    let n = constants.n;
    let scale = (k as f64).sqrt() * eps;
    let radius = cstar * scale;
    let width = 0.05 * scale;
    let (lo, hi) = (radius - 0.5 * width, radius + 0.5 * width);
    let hits: u64 = for_each_sum_radius(
        n,
        eps,
        k,
        samples,
        seed,
        "lower-bound",
        || 0u64,
        |c, r| {
            if r >= lo && r < hi {
                *c += 1;
            }
        },
    )
    .into_iter()
    .sum();
    let vol = shell_volume(n, lo, hi);
    let p = hits as f64 / samples as f64;
    let mc_value = p / vol;
    let std_error = (p * (1.0 - p) / samples as f64).sqrt() / vol;
    let bound = constants.lower_bound(eps, k, cstar);
    Ok(LowerBoundCheck {
        radius,
        shell_width: width,
        mc_value,
        std_error,
        bound,
        pass: mc_value >= bound - 3.0 * std_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMethod {
    Exact1d,
    Inversion,
    MonteCarlo,
}

impl fmt::Display for ProfileMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileMethod::Exact1d => "exact1d",
            ProfileMethod::Inversion => "inversion",
            ProfileMethod::MonteCarlo => "monte_carlo",
        })
    }
}

/// `f_k` tabulated on a radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensityProfile {
    pub n: usize,
    pub eps: f64,
    pub k: u32,
    pub method: ProfileMethod,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Zero for exact values; Monte Carlo standard errors otherwise
    /// (infinite for empty bins); inversion error bounds.
    pub std_errors: Vec<f64>,
    /// Integral of the profile over `R^n`.
    pub mass_check: f64,
}

impl RadialDensityProfile {
    /// Largest increase between adjacent radii, in units of the combined
    /// standard error (exact profiles use the raw difference).
    pub fn worst_increase(&self) -> f64 {
        self.values
            .windows(2)
            .zip(self.std_errors.windows(2))
            .map(|(v, s)| {
                let d = v[1] - v[0];
                let se = s[0].hypot(s[1]);
                if se > 0.0 && se.is_finite() {
                    d / se
                } else {
                    d
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "radius,value,std_error,method")?;
        for ((r, v), s) in self.radii.iter().zip(&self.values).zip(&self.std_errors) {
            writeln!(w, "{r},{v},{s},{}", self.method)?;
        }
        Ok(())
    }
}

/// Exact one-dimensional profile. `mass_check` integrates the piecewise
/// polynomial exactly (Kronrod rule on each polynomial piece).
pub fn exact1d_profile(k: u32, eps: f64, radii: &[f64]) -> Result<RadialDensityProfile> {
    let values = radii
        .iter()
        .map(|&r| density1d_exact(k, eps, r))
        .collect::<Result<Vec<_>>>()?;
    let mut mass = 0.0;
    for j in 0..k {
        let a = (2.0 * j as f64 - k as f64) * eps;
        let b = a + 2.0 * eps;
        let f = |x: f64| density1d_exact(k, eps, x).unwrap_or(f64::NAN);
        mass += crate::special::gauss_kronrod15(&f, a, b).0;
    }
    Ok(RadialDensityProfile {
        n: 1,
        eps,
        k,
        method: ProfileMethod::Exact1d,
        radii: radii.to_vec(),
        values,
        std_errors: vec![0.0; radii.len()],
        mass_check: mass,
    })
}

/// Inversion profile; `mass_check` is the trapezoid rule of
/// `|S^{n-1}| f(r) r^{n-1}` over the given radii.
pub fn inversion_profile(
    n: usize,
    eps: f64,
    k: u32,
    radii: &[f64],
    tol: f64,
) -> Result<RadialDensityProfile> {
    let res = radii
        .iter()
        .map(|&r| density_inversion(n, eps, k, r, tol))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = res.iter().map(|r| r.value).collect();
    let area = unit_sphere_area(n);
    let g: Vec<f64> = radii
        .iter()
        .zip(&values)
        .map(|(r, v)| area * v * r.powi(n as i32 - 1))
        .collect();
    let mass = radii
        .windows(2)
        .zip(g.windows(2))
        .map(|(r, v)| 0.5 * (r[1] - r[0]) * (v[0] + v[1]))
        .sum();
    Ok(RadialDensityProfile {
        n,
        eps,
        k,
        method: ProfileMethod::Inversion,
        radii: radii.to_vec(),
        values,
        std_errors: res.iter().map(|r| r.error_bound).collect(),
        mass_check: mass,
    })
}

/// Histogram of `|Z_1 + ... + Z_k|` over `bins` equal shells of `[0, k eps]`
/// converted to density values by the shell volumes. Radii are bin centres.
pub fn mc_radial_profile(
    n: usize,
    eps: f64,
    k: u32,
    samples: u64,
    bins: usize,
    seed: u64,
) -> Result<RadialDensityProfile> {
    if samples < 10_000 || bins < 10 {
        return Err(Error::param("need at least 10^4 samples and 10 bins"));
    }
    if n < 1 || k < 1 || !(eps > 0.0) {
        return Err(Error::param("need n, k >= 1 and eps > 0"));
    }
    let outer = k as f64 * eps;
    let width = outer / bins as f64;
    let parts = for_each_sum_radius(
        n,
        eps,
        k,
        samples,
        seed,
        "profile",
        || vec![0u64; bins],
        |h, r| {
            let b = ((r / width) as usize).min(bins - 1);
            h[b] += 1;
        },
    );
    let mut counts = vec![0u64; bins];
    for p in parts {
        for (c, x) in counts.iter_mut().zip(p) {
            *c += x;
        }
    }
    let nf = samples as f64;
    let mut radii = Vec::with_capacity(bins);
    let mut values = Vec::with_capacity(bins);
    let mut errs = Vec::with_capacity(bins);
    for (i, &c) in counts.iter().enumerate() {
        let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
        let vol = shell_volume(n, lo, hi);
        let p = c as f64 / nf;
        radii.push(0.5 * (lo + hi));
        values.push(p / vol);
        errs.push(if c == 0 {
            f64::INFINITY
        } else {
            (p * (1.0 - p) / nf).sqrt() / vol
        });
    }
    Ok(RadialDensityProfile {
        n,
        eps,
        k,
        method: ProfileMethod::MonteCarlo,
        radii,
        values,
        std_errors: errs,
        mass_check: counts.iter().sum::<u64>() as f64 / nf,
    })
}

/// Raw bin counts of `|Z_1 + ... + Z_k|` over the given radius edges; used
/// to compare sampled radii with exact bin probabilities.
pub fn sum_radius_histogram(
    n: usize,
    eps: f64,
    k: u32,
    edges: &[f64],
    samples: u64,
    seed: u64,
) -> Vec<u64> {
    let bins = edges.len().saturating_sub(1);
    let parts = for_each_sum_radius(
        n,
        eps,
        k,
        samples,
        seed,
        "histogram",
        || vec![0u64; bins],
        |h, r| {
            let i = edges.partition_point(|&e| e <= r);
            if i >= 1 && i <= bins {
                h[i - 1] += 1;
            }
        },
    );
    let mut counts = vec![0u64; bins];
    for p in parts {
        for (c, x) in counts.iter_mut().zip(p) {
            *c += x;
        }
    }
    counts
}
