//! Quadrature on the reference simplex by collapsing a tensor Gauss-Legendre
//! rule (Duffy transform). Any exactness degree up to [`MAX_DEGREE`] is
//! available in both dimensions.

use super::ElementError;

pub const MAX_DEGREE: usize = 30;

/// Points are barycentric coordinates on the reference simplex with vertices
/// `0, e_1, .., e_d`; weights sum to the simplex measure `1/d!`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    degree: usize,
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(dim: usize, degree: usize) -> Result<Self, ElementError> {
        if dim != 2 && dim != 3 {
            return Err(ElementError::Dimension(dim));
        }
        if degree > MAX_DEGREE {
            return Err(ElementError::QuadratureDegree(degree));
        }
        // The Jacobian (1-u)^{d-1} (1-v)^{d-2} raises the degree in the
        // outer collapsed directions.
        let npts = |extra: usize| (degree + extra + 2) / 2;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if dim == 2 {
            let (gu, wu) = gauss_legendre_unit(npts(1));
            let (gv, wv) = gauss_legendre_unit(npts(0));
            for (u, a) in gu.iter().zip(&wu) {
                for (v, b) in gv.iter().zip(&wv) {
                    let x = *u;
                    let y = v * (1.0 - u);
                    points.push([1.0 - x - y, x, y, 0.0]);
                    weights.push(a * b * (1.0 - u));
                }
            }
        } else {
            let (gu, wu) = gauss_legendre_unit(npts(2));
            let (gv, wv) = gauss_legendre_unit(npts(1));
            let (gw, ww) = gauss_legendre_unit(npts(0));
            for (u, a) in gu.iter().zip(&wu) {
                for (v, b) in gv.iter().zip(&wv) {
                    for (w, c) in gw.iter().zip(&ww) {
                        let x = *u;
                        let y = v * (1.0 - u);
                        let z = w * (1.0 - u) * (1.0 - v);
                        points.push([1.0 - x - y - z, x, y, z]);
                        weights.push(a * b * c * (1.0 - u).powi(2) * (1.0 - v));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            degree,
            points,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub(crate) fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = n.max(1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
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
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
