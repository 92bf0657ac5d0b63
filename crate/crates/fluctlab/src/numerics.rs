//! Small shared numerical utilities: torus arithmetic, fixed-order summation,
//! Gauss-Legendre nodes, least-squares fits and a chi-square critical value.

/// Reduce a coordinate to the fundamental domain [0, 1).
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Reduce a coordinate to the symmetric fundamental domain [-1/2, 1/2).
#[inline]
pub fn wrap_sym(x: f64) -> f64 {
    let y = x - x.round();
    if y >= 0.5 {
        y - 1.0
    } else if y < -0.5 {
        y + 1.0
    } else {
        y
    }
}

/// Fixed-order pairwise (cascade) summation. Deterministic for a given index
/// order regardless of how the values were produced, and more accurate than a
/// naive left fold on long inputs.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let var = ss / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
///
/// Newton iteration on Legendre polynomials; plenty for the n <= 64 used here.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    let m = (n + 1) / 2;
    for i in 0..m {
        // Initial guess (Abramowitz-Stegun 25.4.30).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and derivative.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { p1 } else { p1 };
            pp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.push((x, w));
    }
    // Mirror to the full rule, then map [-1,1] -> [a,b].
    let mut full = Vec::with_capacity(n);
    for i in 0..n {
        let (x, w) = if i < m {
            let (x, w) = rule[i];
            (-x, w)
        } else {
            rule[n - 1 - i]
        };
        full.push((0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w));
    }
    full.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    full
}

/// Least-squares line fit y = slope*x + intercept; returns (slope, intercept, r2).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Upper critical value of the chi-square distribution with `dof` degrees of
/// freedom at upper-tail probability `alpha` (Wilson-Hilferty approximation;
/// adequate for the goodness-of-fit gates used in tests).
pub fn chi2_critical(dof: usize, alpha: f64) -> f64 {
    let z = match alpha {
        a if (a - 0.01).abs() < 1e-12 => 2.3263478740408408,
        a if (a - 0.05).abs() < 1e-12 => 1.6448536269514722,
        _ => panic!("chi2_critical: only alpha in {{0.01, 0.05}} tabulated"),
    };
    let k = dof as f64;
    let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
    k * t * t * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_reduces_to_fundamental_domains() {
        assert_eq!(wrap_unit(1.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert!((wrap_sym(0.75) - (-0.25)).abs() < 1e-15);
        assert!(wrap_sym(123.4999) < 0.5 && wrap_sym(123.4999) >= -0.5);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // 5-point rule is exact through degree 9.
        let rule = gauss_legendre(5, 0.0, 2.0);
        let val: f64 = rule.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((val - 2.0f64.powi(10) / 10.0).abs() < 1e-10);
        let mass: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((mass - 2.0).abs() < 1e-13);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.5, 3.5, 5.5, 7.5];
        let (s, b, r2) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_critical_matches_tables() {
        // chi2_{0.99, 39} ~ 62.43 (tables); Wilson-Hilferty is good to ~0.1.
        assert!((chi2_critical(39, 0.01) - 62.43).abs() < 0.3);
        assert!((chi2_critical(10, 0.05) - 18.31).abs() < 0.15);
    }
}
