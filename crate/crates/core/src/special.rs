//! Bessel functions of half-integer multiple order, their zeros, gamma at
//! half-integers and adaptive Gauss-Kronrod quadrature.
//!
//! Orders are passed as `m = 2 nu` so that `J_{n/2}` for every dimension
//! `n` (and `J_{-1/2}`) is covered without floating comparisons.

use std::f64::consts::PI;

use crate::{Error, Result};

/// `Gamma(m / 2)` for `m >= 1`.
pub fn gamma_half(m: u32) -> f64 {
    assert!(m >= 1, "gamma_half needs m >= 1");
    let (mut g, mut a) = if m.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = m as f64 / 2.0;
    while a < target {
        g *= a;
        a += 1.0;
    }
    g
}

/// `Gamma(nu + 1)` for `nu = m / 2 >= -1/2`.
fn gamma_nu_plus_one(m: i32) -> f64 {
    gamma_half((m + 2) as u32)
}

fn check_order(m: i32) {
    assert!(
        m >= -1,
        "Bessel order m/2 must be at least -1/2, got m = {m}"
    );
}

/// Power series of the normalised function
/// `Lambda_nu(x) = Gamma(nu + 1) (2 / x)^nu J_nu(x)`, which equals 1 at 0.
pub fn lambda_series(m: i32, x: f64) -> f64 {
    check_order(m);
    let nu = m as f64 / 2.0;
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && k > 0.5 * x {
            return sum;
        }
        k += 1.0;
        if k > 500.0 {
            return sum;
        }
    }
}

/// `J_nu(x)` by its power series.
pub fn bessel_j_series(m: i32, x: f64) -> f64 {
    let nu = m as f64 / 2.0;
    if x == 0.0 {
        return match m {
            0 => 1.0,
            -1 => f64::INFINITY,
            _ => 0.0,
        };
    }
    (0.5 * x).powf(nu) / gamma_nu_plus_one(m) * lambda_series(m, x)
}

/// Hankel asymptotic expansion of `J_nu(x)` for large `x`.
pub fn bessel_j_asymptotic(m: i32, x: f64) -> f64 {
    let nu = m as f64 / 2.0;
    let mu = 4.0 * nu * nu;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..200 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        let size = a.abs();
        if size > prev {
            break;
        }
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
        if size < 1e-17 {
            break;
        }
        prev = size;
    }
    let phase = (0.5 * nu + 0.25) * PI;
    let (s, c) = x.sin_cos();
    let (sp, cp) = phase.sin_cos();
    let cos_chi = c * cp + s * sp;
    let sin_chi = s * cp - c * sp;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// `J_n(x)` for integer `n` from the trapezoid rule applied to
/// `(1 / 2 pi) int_0^{2 pi} cos(n t - x sin t) dt`, which converges
/// geometrically for a periodic integrand.
pub fn bessel_j_integral(n: u32, x: f64) -> f64 {
    let pts = x.ceil() as usize + n as usize + 40;
    let h = 2.0 * PI / pts as f64;
    let nf = n as f64;
    (0..pts)
        .map(|j| {
            let t = j as f64 * h;
            (nf * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / pts as f64
}

/// `J_{l + 1/2}(x)` by upward recurrence of the spherical Bessel functions,
/// stable for `x > l`.
fn bessel_j_spherical(m: i32, x: f64) -> f64 {
    let l = (m - 1) / 2;
    let (s, c) = x.sin_cos();
    let mut prev = c / x; // j_{-1}
    let mut cur = s / x; // j_0
    if l == -1 {
        cur = prev;
    } else {
        for i in 0..l {
            let next = (2 * i + 1) as f64 / x * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    (2.0 * x / PI).sqrt() * cur
}

/// Seam between the power series and the other evaluators.
pub const SERIES_LIMIT: f64 = 8.0;
/// Smallest argument handed to the asymptotic expansion (integer orders).
pub const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `J_nu(x)` for `nu = m / 2 >= -1/2` and `x >= 0`.
pub fn bessel_j(m: i32, x: f64) -> f64 {
    check_order(m);
    assert!(x >= 0.0, "bessel_j needs x >= 0");
    let nu = m as f64 / 2.0;
    if m % 2 != 0 {
        let l = ((m - 1) / 2) as f64;
        if x <= SERIES_LIMIT.max(l) {
            bessel_j_series(m, x)
        } else {
            bessel_j_spherical(m, x)
        }
    } else if x <= SERIES_LIMIT {
        bessel_j_series(m, x)
    } else if x >= ASYMPTOTIC_LIMIT.max(nu * nu) {
        bessel_j_asymptotic(m, x)
    } else {
        bessel_j_integral((m / 2) as u32, x)
    }
}

/// `Lambda_nu(x) = Gamma(nu + 1) (2 / x)^nu J_nu(x)`; equals 1 at `x = 0`.
pub fn bessel_lambda(m: i32, x: f64) -> f64 {
    check_order(m);
    if x <= SERIES_LIMIT {
        return lambda_series(m, x);
    }
    let nu = m as f64 / 2.0;
    gamma_nu_plus_one(m) * (2.0 / x).powf(nu) * bessel_j(m, x)
}

/// First `count` positive zeros of `J_{m/2}`, `m >= 0`.
///
/// Sign changes are located on a grid of step `0.25` starting at `nu`
/// (there is no zero below it) and then bisected to machine precision.
pub fn bessel_zeros(m: i32, count: usize) -> Result<Vec<f64>> {
    if m < 0 {
        return Err(Error::param(
            "zeros are tabulated for nonnegative orders only",
        ));
    }
    let nu = m as f64 / 2.0;
    let step = 0.25;
    let mut zeros = Vec::with_capacity(count);
    let mut a = nu.max(step);
    let mut fa = bessel_j(m, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_j(m, b);
        if fb == 0.0 {
            zeros.push(b);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(m, a, b, fa, zeros.len() + 1)?);
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

fn bisect(m: i32, mut a: f64, mut b: f64, mut fa: f64, index: usize) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = bessel_j(m, mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Err(Error::Numeric(format!(
        "zero {index} of J_{} did not converge",
        m as f64 / 2.0
    )))
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod rule with its embedded 7-point Gauss rule. Returns
/// `(kronrod, |kronrod - gauss|)`.
pub fn gauss_kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection with the 15-point Kronrod rule until the local error
/// estimate is below `tol`. Returns `(value, error_estimate)`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        tol: f64,
        whole: (f64, f64),
        depth: u32,
    ) -> (f64, f64) {
        if whole.1 <= tol || depth == 0 {
            return whole;
        }
        let m = 0.5 * (a + b);
        let left = gauss_kronrod15(f, a, m);
        let right = gauss_kronrod15(f, m, b);
        let l = rec(f, a, m, 0.5 * tol, left, depth - 1);
        let r = rec(f, m, b, 0.5 * tol, right, depth - 1);
        (l.0 + r.0, l.1 + r.1)
    }
    rec(f, a, b, tol, gauss_kronrod15(f, a, b), 30)
}
