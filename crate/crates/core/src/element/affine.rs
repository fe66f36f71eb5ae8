use super::ElementError;
use crate::mesh::Point;

/// The affine map `x = p_0 + J xi` from the reference simplex onto a cell.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    dim: usize,
    origin: Point,
    jac: [[f64; 3]; 3],
    /// `J^{-T}`, row-major.
    inv_t: [[f64; 3]; 3],
    det: f64,
}

impl AffineMap {
    /// Builds the map from the first `dim + 1` cell vertices.
    pub fn new(dim: usize, points: &[Point]) -> Result<Self, ElementError> {
        if dim != 2 && dim != 3 {
            return Err(ElementError::Dimension(dim));
        }
        let mut jac = [[0.0; 3]; 3];
        for k in 0..dim {
            for i in 0..dim {
                jac[i][k] = points[k + 1][i] - points[0][i];
            }
        }
        let mut inv_t = [[0.0; 3]; 3];
        let det;
        if dim == 2 {
            det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-14 {
                return Err(ElementError::Degenerate(det));
            }
            // J^{-1} = [[d, -b], [-c, a]] / det, transposed.
            inv_t[0][0] = jac[1][1] / det;
            inv_t[0][1] = -jac[1][0] / det;
            inv_t[1][0] = -jac[0][1] / det;
            inv_t[1][1] = jac[0][0] / det;
        } else {
            let j = &jac;
            let cof = |r: usize, c: usize| {
                let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
                let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
                j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]
            };
            det = j[0][0] * cof(0, 0) + j[0][1] * cof(0, 1) + j[0][2] * cof(0, 2);
            if det.abs() < 1e-14 {
                return Err(ElementError::Degenerate(det));
            }
            // J^{-T} is the cofactor matrix over det.
            for (r, row) in inv_t.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = cof(r, c) / det;
                }
            }
        }
        Ok(Self {
            dim,
            origin: points[0],
            jac,
            inv_t,
            det,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jacobian(&self) -> &[[f64; 3]; 3] {
        &self.jac
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn abs_det(&self) -> f64 {
        self.det.abs()
    }

    /// Physical point of a barycentric reference point.
    pub fn map_bary(&self, bary: &[f64]) -> Point {
        let mut x = self.origin;
        for i in 0..self.dim {
            for k in 0..self.dim {
                x[i] += self.jac[i][k] * bary[k + 1];
            }
        }
        x
    }

    /// `J^{-T} g` for one reference gradient.
    #[inline]
    pub fn push_gradient(&self, g: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            for k in 0..self.dim {
                out[i] += self.inv_t[i][k] * g[k];
            }
        }
        out
    }

    pub fn push_gradients(&self, ref_grads: &[[f64; 3]]) -> Vec<[f64; 3]> {
        ref_grads.iter().map(|g| self.push_gradient(g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cell_leaves_gradients() {
        let pts = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let map = AffineMap::new(3, &pts).unwrap();
        let g = [0.3, -1.2, 2.5];
        assert_eq!(map.push_gradient(&g), g);
    }

    #[test]
    fn scaling_divides_gradients() {
        let s = 0.25;
        let pts = [
            [0.0, 0.0, 0.0],
            [s, 0.0, 0.0],
            [0.0, s, 0.0],
            [0.0, 0.0, 0.0],
        ];
        let map = AffineMap::new(2, &pts).unwrap();
        let out = map.push_gradient(&[1.0, -2.0, 0.0]);
        assert!((out[0] - 4.0).abs() < 1e-15 && (out[1] + 8.0).abs() < 1e-15);
        assert!((map.abs_det() - 2.0 * 0.5 * s * s).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0; 3]];
        assert!(matches!(
            AffineMap::new(2, &pts),
            Err(ElementError::Degenerate(_))
        ));
    }

    #[test]
    fn maps_reference_vertices_to_cell_vertices() {
        let pts = [
            [0.1, 0.2, 0.3],
            [0.9, 0.1, 0.4],
            [0.2, 0.8, 0.1],
            [0.3, 0.3, 1.1],
        ];
        let map = AffineMap::new(3, &pts).unwrap();
        for (k, p) in pts.iter().enumerate() {
            let mut b = [0.0; 4];
            b[k] = 1.0;
            let x = map.map_bary(&b);
            for i in 0..3 {
                assert!((x[i] - p[i]).abs() < 1e-15);
            }
        }
    }
}
