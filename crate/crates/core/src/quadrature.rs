//! Quadrature on flat triangles and straight segments embedded in 3-space.
//!
//! Weights are normalized to sum to one; integrators multiply by the measure.

use crate::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl TriangleRule {
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            exact_degree: 1,
        }
    }

    /// Three interior points `(2/3, 1/6, 1/6)` and permutations.
    pub fn degree2() -> Self {
        let a = 2.0 / 3.0;
        let b = 1.0 / 6.0;
        Self {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            exact_degree: 2,
        }
    }

    /// Dunavant's 6-point rule.
    pub fn degree4() -> Self {
        let a1 = 0.445_948_490_915_964_886_318_329_253_883;
        let b1 = 1.0 - 2.0 * a1;
        let w1 = 0.223_381_589_678_011_465_944_790_930_230;
        let a2 = 0.091_576_213_509_770_743_459_571_463_402;
        let b2 = 1.0 - 2.0 * a2;
        let w2 = 0.109_951_743_655_321_867_388_542_403_103;
        Self {
            points: vec![[b1, a1, a1], [a1, b1, a1], [a1, a1, b1], [b2, a2, a2], [a2, b2, a2], [a2, a2, b2]],
            weights: vec![w1, w1, w1, w2, w2, w2],
            exact_degree: 4,
        }
    }

    /// Collapsed (Duffy) tensor Gauss rule exact for total degree `degree`.
    pub fn collapsed_gauss(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let gauss = EdgeRule::gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&u, &wu) in gauss.points.iter().zip(&gauss.weights) {
            for (&v, &wv) in gauss.points.iter().zip(&gauss.weights) {
                let x = u;
                let y = (1.0 - u) * v;
                points.push([1.0 - x - y, x, y]);
                // reference area 1/2 cancels the Jacobian normalization
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        Self {
            points,
            weights,
            exact_degree: 2 * n - 2,
        }
    }

    /// Cheapest shipped rule with at least the requested exactness.
    pub fn for_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2 => Self::degree2(),
            3 | 4 => Self::degree4(),
            d => Self::collapsed_gauss(d),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical quadrature points of the triangle `v`.
    pub fn map(&self, v: &[Vec3; 3]) -> impl Iterator<Item = Vec3> + '_ {
        let v = *v;
        self.points.iter().map(move |l| l[0] * v[0] + l[1] * v[1] + l[2] * v[2])
    }
}

impl EdgeRule {
    pub fn midpoint() -> Self {
        Self {
            points: vec![0.5],
            weights: vec![1.0],
            exact_degree: 1,
        }
    }

    /// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n > 0, "Gauss rule needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Newton on P_n starting from the Chebyshev-like guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self {
            points,
            weights,
            exact_degree: 2 * n - 1,
        }
    }

    pub fn gauss2() -> Self {
        Self::gauss_legendre(2)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = if n == 0 { 0.0 } else { n as f64 * (x * p1 - p0) / (x * x - 1.0) };
    (p, d)
}

pub fn triangle_area(v: &[Vec3; 3]) -> f64 {
    0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm()
}

/// `area * sum w_i f(x_i)`.
pub fn integrate_face<F: FnMut(&Vec3) -> f64>(mut f: F, v: &[Vec3; 3], rule: &TriangleRule) -> f64 {
    let area = triangle_area(v);
    let sum: f64 = rule.map(v).zip(&rule.weights).map(|(x, w)| w * f(&x)).sum();
    area * sum
}

/// `|E| * sum w_i f((1 - t_i) a + t_i b)`.
pub fn integrate_edge<F: FnMut(&Vec3) -> f64>(mut f: F, a: &Vec3, b: &Vec3, rule: &EdgeRule) -> f64 {
    let len = (b - a).norm();
    let sum: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&t, w)| w * f(&((1.0 - t) * a + t * b)))
        .sum();
    len * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_right() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::x(), Vec3::y()]
    }

    /// `int_T x^a y^b` over the unit right triangle: `a! b! / (a + b + 2)!`.
    fn monomial_integral(a: usize, b: usize) -> f64 {
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn shipped_examples() {
        let t = unit_right();
        assert_abs_diff_eq!(integrate_face(|_| 1.0, &t, &TriangleRule::degree2()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            integrate_face(|x| x[0] * x[0], &t, &TriangleRule::degree2()),
            1.0 / 12.0,
            epsilon = 1e-15
        );
        let x4 = |x: &Vec3| x[0].powi(4);
        assert_abs_diff_eq!(integrate_face(x4, &t, &TriangleRule::degree4()), 1.0 / 30.0, epsilon = 1e-14);
        assert!((integrate_face(x4, &t, &TriangleRule::degree2()) - 1.0 / 30.0).abs() > 1e-4);
    }

    #[test]
    fn edge_examples() {
        let (a, b) = (Vec3::zeros(), Vec3::x());
        let g = EdgeRule::gauss2();
        assert_abs_diff_eq!(integrate_edge(|_| 1.0, &a, &b, &g), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate_edge(|x| x[0], &a, &b, &g), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate_edge(|x| x[0].powi(3), &a, &b, &g), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn weights_are_normalized() {
        for d in 0..=12 {
            let r = TriangleRule::for_degree(d);
            assert!(r.exact_degree >= d);
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for p in &r.points {
                assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
            }
        }
        for n in 1..=10 {
            let r = EdgeRule::gauss_legendre(n);
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn monomial_exactness() {
        let t = unit_right();
        for rule in [
            TriangleRule::centroid(),
            TriangleRule::degree2(),
            TriangleRule::degree4(),
            TriangleRule::collapsed_gauss(8),
        ] {
            for a in 0..=rule.exact_degree {
                for b in 0..=(rule.exact_degree - a) {
                    let q = integrate_face(|x| x[0].powi(a as i32) * x[1].powi(b as i32), &t, &rule);
                    let exact = monomial_integral(a, b);
                    assert!((q - exact).abs() <= 1e-14 * exact.max(1e-3), "deg {a},{b}: {q} vs {exact}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn random_polynomial_exactness(coeffs in proptest::collection::vec(-1.0f64..1.0, 45), pick in 0usize..4) {
            let rule = [TriangleRule::centroid(), TriangleRule::degree2(), TriangleRule::degree4(), TriangleRule::collapsed_gauss(8)][pick].clone();
            let d = rule.exact_degree;
            let mut terms = Vec::new();
            let mut k = 0;
            for a in 0..=d {
                for b in 0..=(d - a) {
                    terms.push((a, b, coeffs[k]));
                    k += 1;
                }
            }
            let exact: f64 = terms.iter().map(|&(a, b, c)| c * monomial_integral(a, b)).sum();
            let scale: f64 = terms.iter().map(|&(a, b, c)| c.abs() * monomial_integral(a, b)).sum();
            let q = integrate_face(
                |x| terms.iter().map(|&(a, b, c)| c * x[0].powi(a as i32) * x[1].powi(b as i32)).sum(),
                &unit_right(),
                &rule,
            );
            prop_assert!((q - exact).abs() <= 1e-13 * scale.max(1e-12));
        }

        #[test]
        fn gauss_exactness(n in 1usize..8, seed in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let rule = EdgeRule::gauss_legendre(n);
            let d = rule.exact_degree;
            let exact: f64 = (0..=d).map(|k| seed[k] / (k as f64 + 1.0)).sum();
            let q = integrate_edge(
                |x| (0..=d).map(|k| seed[k] * x[0].powi(k as i32)).sum(),
                &Vec3::zeros(),
                &Vec3::x(),
                &rule,
            );
            prop_assert!((q - exact).abs() <= 1e-13);
        }
    }
}
