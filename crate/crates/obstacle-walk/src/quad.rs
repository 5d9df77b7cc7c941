//! Adaptive Gauss-Legendre quadrature, plus a composite Simpson rule kept
//! around as an independent cross-check.

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the Legendre polynomial from the Chebyshev initial guess.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn fixed_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive Gauss-Legendre integral of `f` over `[a, b]`: a 20-point panel
/// is accepted when bisecting it changes the value by less than the local
/// tolerance share.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(20);
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
        nodes: &[f64],
        weights: &[f64],
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let left = fixed_gauss(f, a, mid, nodes, weights);
        let right = fixed_gauss(f, mid, b, nodes, weights);
        if (left + right - whole).abs() <= tol || depth >= 30 {
            return left + right;
        }
        recurse(f, a, mid, left, tol / 2.0, depth + 1, nodes, weights)
            + recurse(f, mid, b, right, tol / 2.0, depth + 1, nodes, weights)
    }
    let whole = fixed_gauss(&f, a, b, &nodes, &weights);
    recurse(&f, a, b, whole, tol, 0, &nodes, &weights)
}

/// Composite Simpson rule with `2n` panels; independent of the Gauss path.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let m = 2 * n;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
