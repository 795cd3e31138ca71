//! Gauss rules on the unit interval and symmetric rules on triangles.

/// Gauss-Legendre rule mapped to `[0, 1]`; weights sum to one.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn gauss(n: usize) -> LineRule {
        let (x, w): (&[f64], &[f64]) = match n {
            1 => (&[0.0], &[2.0]),
            2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
            3 => (
                &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
                &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
            ),
            4 => (
                &[
                    -0.861_136_311_594_052_6,
                    -0.339_981_043_584_856_3,
                    0.339_981_043_584_856_3,
                    0.861_136_311_594_052_6,
                ],
                &[
                    0.347_854_845_137_453_9,
                    0.652_145_154_862_546_1,
                    0.652_145_154_862_546_1,
                    0.347_854_845_137_453_9,
                ],
            ),
            _ => panic!("no {n}-point Gauss rule"),
        };
        LineRule {
            points: x.iter().map(|&x| 0.5 * (x + 1.0)).collect(),
            weights: w.iter().map(|&w| 0.5 * w).collect(),
        }
    }

    /// `(s, weight)` pairs on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (a + t * h, w * h))
    }
}

/// Barycentric points with weights summing to one (multiply by the area).
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Symmetric rule exact for polynomials of total degree `degree` (<= 4).
    pub fn with_degree(degree: usize) -> TriangleRule {
        match degree {
            0 | 1 => TriangleRule {
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
            },
            2 => {
                let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
                TriangleRule {
                    points: vec![[b, a, a], [a, b, a], [a, a, b]],
                    weights: vec![1.0 / 3.0; 3],
                }
            }
            3 | 4 => {
                let (a1, w1) = (0.445_948_490_915_965, 0.223_381_589_678_011);
                let (a2, w2) = (0.091_576_213_509_771, 0.109_951_743_655_322);
                let orbit = |a: f64| {
                    let b = 1.0 - 2.0 * a;
                    [[b, a, a], [a, b, a], [a, a, b]]
                };
                let mut points = orbit(a1).to_vec();
                points.extend(orbit(a2));
                TriangleRule {
                    points,
                    weights: vec![w1, w1, w1, w2, w2, w2],
                }
            }
            _ => panic!("no triangle rule of degree {degree}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(i: i32, j: i32) -> f64 {
        // ∫_T x^i y^j over the unit reference triangle = i! j! / (i + j + 2)!
        let f = |n: i32| (1..=n).map(f64::from).product::<f64>();
        f(i) * f(j) / f(i + j + 2)
    }

    #[test]
    fn gauss_exactness() {
        for (n, deg) in [(2, 3), (4, 7)] {
            let r = LineRule::gauss(n);
            for p in 0..=deg {
                let q: f64 = r.on(0.0, 2.0).map(|(s, w)| w * s.powi(p)).sum();
                let exact = 2f64.powi(p + 1) / f64::from(p + 1);
                assert!((q - exact).abs() < 1e-13 * exact, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_exactness() {
        for deg in [1usize, 2, 4] {
            let r = TriangleRule::with_degree(deg);
            for i in 0..=deg as i32 {
                for j in 0..=(deg as i32 - i) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(b, w)| 0.5 * w * b[1].powi(i) * b[2].powi(j))
                        .sum();
                    let exact = monomial_integral(i, j);
                    assert!((q - exact).abs() < 1e-12, "deg={deg} i={i} j={j}");
                }
            }
        }
    }
}
