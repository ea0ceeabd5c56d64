//! Discrete-ordinates quadrature sets.
//!
//! A [`QuadratureSet`] stores the ordinates `Omega_k` (one component per
//! spatial axis), the weights `w_k`, and the angular domain measure. All the
//! matrices used by the solver (`M`, `Q^(j)`, `Q^(j),±`) are diagonal and are
//! kept as vectors.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct QuadratureSet {
    dim: usize,
    omega: [Vec<f64>; 2],
    weights: Vec<f64>,
    measure: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadratureSet {
    /// Slab-geometry rule: Gauss–Legendre in `mu` on `[-1, 1]`, `|D| = 2`.
    pub fn gauss_legendre_1d(n_points: usize) -> Result<Self> {
        if n_points < 2 || n_points % 2 != 0 {
            return Err(Error::InvalidQuadrature(format!(
                "1D rule needs an even number of points >= 2, got {n_points}"
            )));
        }
        let (mut mu, w) = gauss_legendre_nodes(n_points);
        // enforce exact +-mu symmetry
        for i in 0..n_points / 2 {
            let m = 0.5 * (mu[n_points - 1 - i] - mu[i]);
            mu[i] = -m;
            mu[n_points - 1 - i] = m;
        }
        let weights = (0..n_points)
            .map(|i| 0.5 * (w[i] + w[n_points - 1 - i]))
            .collect();
        Ok(QuadratureSet {
            dim: 1,
            omega: [mu, vec![0.0; n_points]],
            weights,
            measure: 2.0,
        })
    }

    /// Chebyshev–Legendre product rule projected onto the plane.
    ///
    /// Polar cosines are Gauss–Legendre points on `(0, 1)` (upper hemisphere),
    /// azimuths the `2 n_polar` midpoints `phi_b = (2b - 1) pi / (2 n_polar)`.
    /// The weights sum to `2 pi`.
    pub fn chebyshev_legendre_2d(n_polar: usize) -> Result<Self> {
        if n_polar < 2 {
            return Err(Error::InvalidQuadrature(format!(
                "need at least 2 polar nodes, got {n_polar}"
            )));
        }
        let (x, w) = gauss_legendre_nodes(n_polar);
        let n_az = 2 * n_polar;
        let dphi = PI / n_polar as f64;
        let count = n_polar * n_az;
        let mut ox = Vec::with_capacity(count);
        let mut oy = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for a in 0..n_polar {
            let mu = 0.5 * (x[a] + 1.0);
            let wa = 0.5 * w[a];
            let s = (1.0 - mu * mu).sqrt();
            for b in 1..=n_az {
                let phi = (2 * b - 1) as f64 * PI / (2 * n_polar) as f64;
                ox.push(s * phi.cos());
                oy.push(s * phi.sin());
                weights.push(wa * dphi);
            }
        }
        Ok(QuadratureSet {
            dim: 2,
            omega: [ox, oy],
            weights,
            measure: 2.0 * PI,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of ordinates `N_Omega`.
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }

    /// `|D_Omega|`.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Component `j` of every ordinate (the diagonal of `Q^(j)`).
    pub fn omega(&self, axis: usize) -> &[f64] {
        &self.omega[axis]
    }

    /// Diagonal of `M = diag(sqrt(w))`.
    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// Diagonal of `Q^(j),+` when `plus`, else of `Q^(j),-`.
    pub fn upwind(&self, axis: usize, plus: bool) -> Vec<f64> {
        self.omega[axis]
            .iter()
            .map(|&o| if plus { o.max(0.0) } else { o.min(0.0) })
            .collect()
    }

    pub fn abs_omega(&self, axis: usize) -> Vec<f64> {
        self.omega[axis].iter().map(|o| o.abs()).collect()
    }

    /// Quadrature average `(1/|D|) sum_k w_k f(Omega_k)`.
    pub fn average<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        (0..self.count()).map(|k| self.weights[k] * f(k)).sum::<f64>() / self.measure
    }

    /// `<Omega^(j) Omega^(l)>`.
    pub fn second_moment(&self, j: usize, l: usize) -> f64 {
        self.average(|k| self.omega[j][k] * self.omega[l][k])
    }

    /// `C_B^(j) = (1/|D|) w^T |Omega^(j)|`.
    pub fn c_b(&self, axis: usize) -> f64 {
        self.average(|k| self.omega[axis][k].abs())
    }

    #[cfg(test)]
    fn is_symmetric(&self, axis: usize) -> bool {
        let mut v: Vec<f64> = self.omega[axis].clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (0..v.len()).all(|i| (v[i] + v[v.len() - 1 - i]).abs() < 1e-14)
    }
}
