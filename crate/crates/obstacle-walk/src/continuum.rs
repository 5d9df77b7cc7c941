//! Continuum reference quantities for the unit ball: the principal
//! Dirichlet eigenvalue of `-(1/2d) Laplacian`, the localization radius,
//! and the radial limit profiles.
//!
//! The first eigenfunction of the Dirichlet Laplacian of the unit ball in
//! `R^d` is radial: `phi(r) ~ r^(1-d/2) J_(d/2-1)(j r)` with
//! `j = j_(d/2-1,1)`, and the eigenvalue of `-(1/2d) Laplacian` is
//! `mu_B = j^2 / (2d)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bessel::{bessel_j, first_zero, HalfInt};
use crate::lattice::{dist2_sq, Parity, Site};
use crate::quad::adaptive_gauss;

/// First two Dirichlet eigenvalues of `-(1/2d) Laplacian` on the unit ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuumBallSpectrum {
    pub d: usize,
    /// `mu_B = j_{d/2-1,1}^2 / (2d)`.
    pub mu1: f64,
    /// Second eigenvalue `j_{d/2,1}^2 / (2d)` (first angular mode).
    pub mu2: f64,
    pub bessel_order: f64,
    pub j_nu_1: f64,
}

impl ContinuumBallSpectrum {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2);
        let nu = HalfInt::bessel_order_for_dim(d);
        let j1 = first_zero(nu);
        let j2 = first_zero(HalfInt(nu.0 + 2));
        let two_d = (2 * d) as f64;
        ContinuumBallSpectrum {
            d,
            mu1: j1 * j1 / two_d,
            mu2: j2 * j2 / two_d,
            bessel_order: nu.as_f64(),
            j_nu_1: j1,
        }
    }
}

/// `mu_B` for dimension `d`.
pub fn mu_ball(d: usize) -> f64 {
    ContinuumBallSpectrum::new(d).mu1
}

/// Volume of the unit Euclidean ball in `R^d`: `pi^(d/2) / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // Gamma(d/2 + 1) by recurrence from Gamma(1) / Gamma(1/2)
    let mut gamma;
    let mut twice_x;
    if d % 2 == 0 {
        gamma = 1.0;
        twice_x = 2u32;
    } else {
        gamma = PI.sqrt();
        twice_x = 1u32;
    }
    let twice_target = d as u32 + 2;
    while twice_x < twice_target {
        gamma *= twice_x as f64 / 2.0;
        twice_x += 2;
    }
    PI.powf(d as f64 / 2.0) / gamma
}

/// Localization radius `floor((omega_d^{-1} d log_{1/p} n)^{1/d})`.
pub fn rho_n(n: f64, d: usize, p: f64) -> i64 {
    assert!(n >= 2.0 && d >= 2 && p > 0.0 && p < 1.0);
    let log_inv_p = n.ln() / (1.0 / p).ln();
    ((d as f64 * log_inv_p / unit_ball_volume(d)).powf(1.0 / d as f64)).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `phi_1`: L1-normalized first eigenfunction (endpoint profile).
    Phi1L1,
    /// `phi_2`: L2-normalized first eigenfunction.
    Phi2L2,
    /// `phi_2^2` (bulk profile).
    Phi2Squared,
}

/// A radial profile on `[0, 1]`, with the exact evaluator and a tabulation.
#[derive(Debug, Clone)]
pub struct ProfileTarget {
    pub kind: ProfileKind,
    pub d: usize,
    pub j_nu_1: f64,
    nu: HalfInt,
    /// Normalization constant applied to the raw radial shape.
    pub norm: f64,
    /// Tabulated values on a uniform grid over [0, 1].
    pub table: Vec<f64>,
}

const TABLE_LEN: usize = 4096;

/// Raw radial shape `r^(1-d/2) J_nu(j r)`, continuous at zero.
fn radial_shape(nu: HalfInt, d: usize, j: f64, r: f64) -> f64 {
    let v = nu.as_f64();
    if r == 0.0 {
        // limit r->0: (j/2)^nu / Gamma(nu+1) from the series leading term
        let mut gamma = if nu.0 % 2 == 0 { 1.0 } else { PI.sqrt() };
        let mut twice_x = if nu.0 % 2 == 0 { 2 } else { 1 };
        while twice_x < nu.0 + 2 {
            gamma *= twice_x as f64 / 2.0;
            twice_x += 2;
        }
        return (j / 2.0).powf(v) / gamma;
    }
    r.powf(1.0 - d as f64 / 2.0) * bessel_j(nu, j * r)
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Build the radial profile of the requested kind for dimension `d`,
/// normalized by adaptive quadrature of the radial integral with the
/// surface factor folded in analytically.
pub fn profile(kind: ProfileKind, d: usize) -> ProfileTarget {
    assert!(d >= 2);
    let nu = HalfInt::bessel_order_for_dim(d);
    let j = first_zero(nu);
    let surf = sphere_area(d);
    // L1 constant: integral over the ball of the raw shape
    let l1 = surf
        * adaptive_gauss(
            |r| radial_shape(nu, d, j, r) * r.powi(d as i32 - 1),
            0.0,
            1.0,
            1e-13,
        );
    // L2 constant: integral of the squared raw shape
    let l2_sq = surf
        * adaptive_gauss(
            |r| {
                let s = radial_shape(nu, d, j, r);
                s * s * r.powi(d as i32 - 1)
            },
            0.0,
            1.0,
            1e-13,
        );
    let norm = match kind {
        ProfileKind::Phi1L1 => 1.0 / l1,
        ProfileKind::Phi2L2 => 1.0 / l2_sq.sqrt(),
        ProfileKind::Phi2Squared => 1.0 / l2_sq,
    };
    let mut target = ProfileTarget {
        kind,
        d,
        j_nu_1: j,
        nu,
        norm,
        table: Vec::new(),
    };
    target.table = (0..TABLE_LEN)
        .map(|i| target.value_exact(i as f64 / (TABLE_LEN - 1) as f64))
        .collect();
    target
}

impl ProfileTarget {
    /// Exact evaluation at radius `r` (0 outside the unit ball).
    pub fn value_exact(&self, r: f64) -> f64 {
        if r > 1.0 {
            return 0.0;
        }
        let s = radial_shape(self.nu, self.d, self.j_nu_1, r);
        match self.kind {
            ProfileKind::Phi1L1 | ProfileKind::Phi2L2 => self.norm * s,
            ProfileKind::Phi2Squared => self.norm * s * s,
        }
    }

    /// Linear interpolation in the tabulation.
    pub fn value(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return if r == 1.0 { *self.table.last().unwrap() } else { 0.0 };
        }
        if r <= 0.0 {
            return self.table[0];
        }
        let pos = r * (TABLE_LEN - 1) as f64;
        let i = pos as usize;
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }
}

/// Discretize a profile target onto lattice sites around `center` at scale
/// `radius`: `x -> 2 radius^{-d} phi(|x - center| / radius)` on sites of
/// the stated parity class, `0` on the other class (the walk only charges
/// one class at a fixed time).
pub fn discretize_profile(
    target: &ProfileTarget,
    center: &[i64],
    radius: f64,
    parity: Parity,
) -> Vec<(Site, f64)> {
    assert!(radius >= 1.0);
    let d = target.d;
    let scale = 2.0 * radius.powi(-(d as i32));
    crate::lattice::euclidean_ball(center, radius)
        .into_iter()
        .map(|x| {
            let v = if Parity::of_site(&x) == parity {
                scale * target.value_exact(dist2_sq(&x, center).sqrt() / radius)
            } else {
                0.0
            };
            (x, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn mu_ball_d3_is_pi_squared_over_six() {
        // j_{1/2,1} = pi exactly
        assert!((mu_ball(3) - PI * PI / 6.0).abs() < 1e-10);
    }

    #[test]
    fn mu_ball_d2_and_d4_from_zero_bisection() {
        let j01 = 2.404825557695773;
        assert!((mu_ball(2) - j01 * j01 / 4.0).abs() < 1e-10);
        assert!((mu_ball(2) - 1.4458).abs() < 1e-4);
        let j11 = 3.831705970207512;
        assert!((mu_ball(4) - j11 * j11 / 8.0).abs() < 1e-10);
    }

    #[test]
    fn mu1_below_mu2() {
        for d in 2..=5 {
            let s = ContinuumBallSpectrum::new(d);
            assert!(s.mu1 < s.mu2);
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rho_n_closed_form_values() {
        // floor((2 log2(1e6) / pi)^(1/2)) = 3 and the 1e60 analogue = 11
        assert_eq!(rho_n(1e6, 2, 0.5), 3);
        assert_eq!(rho_n(1e60, 2, 0.5), 11);
        // tiny n where the argument is below 1: 2 log2(2) / pi < 1
        assert_eq!(rho_n(2.0, 2, 0.5), 0);
    }

    #[test]
    fn rho_n_monotone() {
        let mut prev = 0;
        for k in 1..=12 {
            let r = rho_n(10f64.powi(6 * k), 2, 0.5);
            assert!(r >= prev);
            prev = r;
        }
        assert!(rho_n(1e9, 3, 0.4) <= rho_n(1e9, 3, 0.2));
    }

    #[test]
    fn phi1_vanishes_at_boundary() {
        for d in 2..=4 {
            let p = profile(ProfileKind::Phi1L1, d);
            assert!(p.value_exact(1.0).abs() < 1e-12);
            // radial monotone nonincreasing on a grid
            let mut prev = f64::INFINITY;
            for i in 0..=100 {
                let v = p.value_exact(i as f64 / 100.0);
                assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn normalizations_via_second_quadrature_rule() {
        for d in 2..=4 {
            let p1 = profile(ProfileKind::Phi1L1, d);
            let surf = sphere_area(d);
            let l1 = surf
                * simpson(
                    |r| p1.value_exact(r) * r.powi(d as i32 - 1),
                    0.0,
                    1.0,
                    4000,
                );
            assert!((l1 - 1.0).abs() < 1e-8, "d={d}: L1 norm {l1}");
            let p2 = profile(ProfileKind::Phi2L2, d);
            let l2 = surf
                * simpson(
                    |r| {
                        let v = p2.value_exact(r);
                        v * v * r.powi(d as i32 - 1)
                    },
                    0.0,
                    1.0,
                    4000,
                );
            assert!((l2 - 1.0).abs() < 1e-8, "d={d}: L2^2 norm {l2}");
        }
    }

    #[test]
    fn phi1_l1_norm_by_monte_carlo() {
        // independent check of the L1 normalization: MC integration over
        // the unit ball in d=2
        let p = profile(ProfileKind::Phi1L1, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(424242);
        let n = 4_000_000usize;
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..n {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let r2 = x * x + y * y;
            if r2 <= 1.0 {
                acc += p.value_exact(r2.sqrt());
                count += 1;
            }
        }
        // square area 4, hit fraction estimates the ball measure
        let integral = acc / n as f64 * 4.0;
        let _ = count;
        assert!((integral - 1.0).abs() < 1e-3, "MC integral {integral}");
    }

    #[test]
    fn phi2_peak_value_d2() {
        // phi_2(0) = 1 / (sqrt(pi) J_1(j_{0,1})) in d = 2
        let p = profile(ProfileKind::Phi2L2, 2);
        let j1_at_zero = bessel_j(HalfInt(2), p.j_nu_1);
        let expected = 1.0 / (PI.sqrt() * j1_at_zero);
        assert!((p.value_exact(0.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn tabulated_interpolation_close_to_exact() {
        let p = profile(ProfileKind::Phi2Squared, 3);
        for i in 0..=997 {
            let r = i as f64 / 997.0;
            assert!((p.value(r) - p.value_exact(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn discretized_profile_sums_to_one_on_parity_class() {
        let p = profile(ProfileKind::Phi1L1, 2);
        let radius = 40.0;
        let vals = discretize_profile(&p, &[0, 0], radius, Parity::Even);
        let sum: f64 = vals.iter().map(|(_, v)| v).sum();
        assert!(
            (sum - 1.0).abs() < 5.0 / radius,
            "Riemann sum {sum} too far from 1"
        );
        // sites outside the ball are simply absent; reflection symmetry
        let map: std::collections::HashMap<Site, f64> =
            vals.iter().cloned().collect();
        for (x, v) in &vals {
            let refl = vec![-x[0], x[1]];
            assert_eq!(map.get(&refl), Some(v));
        }
    }
}
