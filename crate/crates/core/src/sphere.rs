//! Antipodally closed quadratures on the unit sphere.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Nodes `α_q`, weights `w_q` summing to 4π, and the antipode map.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// `antipode[q]` is the index of `-α_q`.
    pub antipode: Vec<usize>,
    /// Largest total degree of polynomials integrated exactly.
    pub degree: usize,
}

/// Lebedev orders available through [`sphere_quadrature`].
pub const LEBEDEV_ORDERS: [usize; 5] = [6, 14, 26, 38, 50];

struct Builder {
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Builder {
    fn push_signed(&mut self, p: [f64; 3], w: f64) {
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    let q = [sx * p[0], sy * p[1], sz * p[2]];
                    if !self.nodes.contains(&q) {
                        self.nodes.push(q);
                        self.weights.push(w);
                    }
                }
            }
        }
    }

    fn a1(&mut self, w: f64) {
        for p in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            self.push_signed(p, w);
        }
    }

    fn a2(&mut self, w: f64) {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        for p in [[0.0, a, a], [a, 0.0, a], [a, a, 0.0]] {
            self.push_signed(p, w);
        }
    }

    fn a3(&mut self, w: f64) {
        let a = 1.0 / 3f64.sqrt();
        self.push_signed([a, a, a], w);
    }

    fn b(&mut self, l: f64, m: f64, w: f64) {
        for p in [[l, l, m], [l, m, l], [m, l, l]] {
            self.push_signed(p, w);
        }
    }

    fn c(&mut self, p: f64, q: f64, w: f64) {
        for v in [
            [p, q, 0.0],
            [q, p, 0.0],
            [p, 0.0, q],
            [q, 0.0, p],
            [0.0, p, q],
            [0.0, q, p],
        ] {
            self.push_signed(v, w);
        }
    }
}

/// Lebedev rule with the given number of points.
pub fn sphere_quadrature(order: usize) -> Result<SphereQuadrature> {
    let mut b = Builder {
        nodes: Vec::new(),
        weights: Vec::new(),
    };
    let degree = match order {
        6 => {
            b.a1(1.0 / 6.0);
            3
        }
        14 => {
            b.a1(1.0 / 15.0);
            b.a3(3.0 / 40.0);
            5
        }
        26 => {
            b.a1(1.0 / 21.0);
            b.a2(4.0 / 105.0);
            b.a3(9.0 / 280.0);
            7
        }
        38 => {
            b.a1(1.0 / 105.0);
            b.a3(9.0 / 280.0);
            b.c(0.4597008433809831, 0.8880738339771153, 1.0 / 35.0);
            9
        }
        50 => {
            b.a1(4.0 / 315.0);
            b.a2(64.0 / 2835.0);
            b.a3(27.0 / 1280.0);
            b.b(1.0 / 11f64.sqrt(), 3.0 / 11f64.sqrt(), 14641.0 / 725760.0);
            11
        }
        _ => return Err(Error::UnsupportedOrder(order)),
    };
    debug_assert_eq!(b.nodes.len(), order);
    let weights = b.weights.iter().map(|w| 4.0 * PI * w).collect();
    Ok(finish(b.nodes, weights, degree))
}

/// Product rule: Gauss–Legendre in `cos θ` times a uniform azimuth grid.
pub fn product_quadrature(n_mu: usize, n_phi: usize) -> Result<SphereQuadrature> {
    if n_mu == 0 || n_phi < 2 || n_phi % 2 == 1 {
        return Err(Error::UnsupportedOrder(n_mu * n_phi));
    }
    let (mu, wmu) = gauss_legendre(n_mu);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_mu * n_phi);
    let mut weights = Vec::with_capacity(n_mu * n_phi);
    // Upper half (and half of the equator) first; the rest by exact negation.
    for i in (n_mu / 2)..n_mu {
        let equator = n_mu % 2 == 1 && i == n_mu / 2;
        let st = (1.0 - mu[i] * mu[i]).sqrt();
        let m_end = if equator { n_phi / 2 } else { n_phi };
        for m in 0..m_end {
            let phi = (m as f64 + 0.5) * dphi;
            nodes.push([st * phi.cos(), st * phi.sin(), mu[i]]);
            weights.push(wmu[i] * dphi);
        }
    }
    let half = nodes.len();
    for q in 0..half {
        let p = nodes[q];
        nodes.push([-p[0], -p[1], -p[2]]);
        weights.push(weights[q]);
    }
    let degree = (2 * n_mu - 1).min(n_phi - 1);
    Ok(finish(nodes, weights, degree))
}

fn finish(nodes: Vec<[f64; 3]>, weights: Vec<f64>, degree: usize) -> SphereQuadrature {
    let antipode = nodes
        .iter()
        .map(|p| {
            nodes
                .iter()
                .position(|q| q[0] == -p[0] && q[1] == -p[1] && q[2] == -p[2])
                .expect("node set is closed under negation")
        })
        .collect();
    SphereQuadrature {
        nodes,
        weights,
        antipode,
        degree,
    }
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum over nodes, accumulated in antipodal pairs so that odd
    /// integrands cancel exactly.
    pub fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        let mut acc = 0.0;
        for (q, &p) in self.antipode.iter().enumerate() {
            if q < p {
                acc += self.weights[q] * f(self.nodes[q]) + self.weights[p] * f(self.nodes[p]);
            }
        }
        acc
    }

    /// Largest error over monomials `αx^a αy^b αz^c` with `a+b+c <= degree`.
    pub fn monomial_error(&self, degree: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let got = self.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32));
                    worst = worst.max((got - monomial_exact(a, b, c)).abs());
                }
            }
        }
        worst
    }
}

/// Exact surface integral of `x^a y^b z^c` over the unit sphere.
pub fn monomial_exact(a: usize, b: usize, c: usize) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let dfact = |n: i64| -> f64 {
        let mut acc = 1.0;
        let mut k = n;
        while k > 1 {
            acc *= k as f64;
            k -= 2;
        }
        acc
    };
    let (a, b, c) = (a as i64, b as i64, c as i64);
    4.0 * PI * dfact(a - 1) * dfact(b - 1) * dfact(c - 1) / dfact(a + b + c + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebedev_rules_are_exact_to_their_degree() {
        for order in LEBEDEV_ORDERS {
            let q = sphere_quadrature(order).unwrap();
            assert_eq!(q.len(), order);
            assert!((q.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-13);
            assert!(q.weights.iter().all(|w| *w > 0.0));
            assert!(q.monomial_error(q.degree) < 1e-13, "order {order}");
            assert!(q.monomial_error(q.degree + 1) > 1e-6, "order {order} degree too low");
        }
    }

    #[test]
    fn first_moments_vanish_exactly() {
        for order in LEBEDEV_ORDERS {
            let q = sphere_quadrature(order).unwrap();
            for a in 0..3 {
                assert_eq!(q.integrate(|p| p[a]), 0.0);
            }
            for (i, j) in q.antipode.iter().enumerate() {
                assert_eq!(q.antipode[*j], i);
            }
        }
    }

    #[test]
    fn product_rule_is_antipodal_and_exact() {
        let q = product_quadrature(5, 10).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-13);
        assert!(q.monomial_error(q.degree) < 1e-12);
        for a in 0..3 {
            assert_eq!(q.integrate(|p| p[a]), 0.0);
        }
    }

    #[test]
    fn unknown_order_is_rejected() {
        assert!(matches!(sphere_quadrature(7), Err(Error::UnsupportedOrder(7))));
    }
}
