//! Bessel functions of the first kind `J_nu` for integer and half-integer
//! order, with first-zero bracketing.
//!
//! The power series
//! `J_nu(x) = sum_m (-1)^m / (m! Gamma(m+nu+1)) (x/2)^(2m+nu)`
//! is used for `x <= 12`; beyond that Hankel's asymptotic expansion
//! `J_nu(x) ~ sqrt(2/(pi x)) [P(nu,x) cos chi - Q(nu,x) sin chi]`,
//! `chi = x - (nu/2 + 1/4) pi`. Orders are restricted to `nu = k/2` with
//! integer `k >= 0`, which covers `nu = d/2 - 1` for every lattice
//! dimension; Gamma values at integers and half-integers are computed by
//! exact recurrence from `Gamma(1) = 1` and `Gamma(1/2) = sqrt(pi)`.

use std::f64::consts::PI;

/// Order represented as `numerator / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfInt(pub u32);

impl HalfInt {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// `nu = d/2 - 1`; requires `d >= 2`.
    pub fn bessel_order_for_dim(d: usize) -> HalfInt {
        assert!(d >= 2);
        HalfInt(d as u32 - 2)
    }
}

/// `Gamma(x + nu + 1)` for integer `x >= 0` and half-integer `nu`, by
/// upward recurrence.
fn gamma_shifted(nu: HalfInt, m: u32) -> f64 {
    // argument is (2m + nu.0 + 2) / 2
    let twice_arg = 2 * m + nu.0 + 2;
    let mut val;
    let mut twice_x;
    if twice_arg % 2 == 0 {
        val = 1.0; // Gamma(1)
        twice_x = 2;
    } else {
        val = PI.sqrt(); // Gamma(1/2)
        twice_x = 1;
    }
    while twice_x < twice_arg {
        val *= twice_x as f64 / 2.0;
        twice_x += 2;
    }
    val
}

fn bessel_j_series(nu: HalfInt, x: f64) -> f64 {
    let v = nu.as_f64();
    let half = x / 2.0;
    let q = half * half;
    let mut term = half.powf(v) / gamma_shifted(nu, 0);
    let mut sum = term;
    for m in 1u32..200 {
        term *= -q / (m as f64 * (m as f64 + v));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

fn bessel_j_asymptotic(nu: HalfInt, x: f64) -> f64 {
    let v = nu.as_f64();
    let mu = 4.0 * v * v;
    let z = 8.0 * x;
    // c_j = c_{j-1} (mu - (2j-1)^2) / (j z); then
    // P = c_0 - c_2 + c_4 - ...,  Q = c_1 - c_3 + c_5 - ...
    let mut c = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    for j in 1u32..=14 {
        c *= (mu - ((2 * j - 1) as f64).powi(2)) / (j as f64 * z);
        if j % 2 == 1 {
            let s = if ((j - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            q += s * c;
        } else {
            let s = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
            p += s * c;
        }
        if c.abs() < 1e-18 {
            break;
        }
    }
    let chi = x - (v / 2.0 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_nu(x)` for `x >= 0`.
pub fn bessel_j(nu: HalfInt, x: f64) -> f64 {
    assert!(x >= 0.0, "argument must be nonnegative");
    if x <= 12.0 {
        bessel_j_series(nu, x)
    } else {
        bessel_j_asymptotic(nu, x)
    }
}

/// First positive zero `j_{nu,1}`, bracketed by a forward scan from 0 and
/// refined by 60 bisection steps.
pub fn first_zero(nu: HalfInt) -> f64 {
    let f = |x: f64| bessel_j(nu, x);
    // J_nu > 0 on (0, j_{nu,1}); scan for the first sign change
    let mut a = 0.25;
    let mut fa = f(a);
    let mut b;
    loop {
        b = a + 0.25;
        let fb = f(b);
        if fa > 0.0 && fb <= 0.0 {
            break;
        }
        a = b;
        fa = fb;
        assert!(b < 60.0, "no zero found while scanning");
    }
    let mut fa = f(a);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if (fa > 0.0) == (fm > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
