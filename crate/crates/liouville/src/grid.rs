//! Discretization of the flat unit torus [0,1)^2.
//!
//! Fields live at cell centers ((i+1/2)h, (j+1/2)h) with h = 1/n, so the
//! midpoint quadrature of the constant 1 is exactly 1 and the grid carries
//! the full symmetric frequency band (-n/2, n/2] for the spectral operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the torus, coordinates reduced modulo 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point {
            x: x.rem_euclid(1.0),
            y: y.rem_euclid(1.0),
        }
    }
}

/// Minimum over the 9 periodic images of the Euclidean distance.
/// Range [0, sqrt(2)/2].
pub fn torus_distance(p: Point, q: Point) -> f64 {
    let dx = axis_distance(p.x, q.x);
    let dy = axis_distance(p.y, q.y);
    (dx * dx + dy * dy).sqrt()
}

fn axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Uniform cell-centered grid on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    /// `n` must be a power of two, at least 32.
    pub fn new(n: usize) -> Result<Self> {
        if n < 32 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        Ok(TorusGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center of cell (i, j); values are stored row-major with j fastest.
    pub fn node(&self, i: usize, j: usize) -> Point {
        let h = self.spacing();
        Point::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
    }

    /// Index of the cell containing `p`; its center is the nearest node.
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let n = self.n as f64;
        let i = (p.x * n).floor() as usize % self.n;
        let j = (p.y * n).floor() as usize % self.n;
        (i, j)
    }

    /// Physical frequency for FFT bin index, in the band (-n/2, n/2].
    pub fn frequency(&self, idx: usize) -> i64 {
        if idx <= self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    /// Build a field by evaluating `f` at every node.
    pub fn field_from_fn(&self, f: impl Fn(Point) -> f64) -> ScalarField {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.n {
            for j in 0..self.n {
                values.push(f(self.node(i, j)));
            }
        }
        ScalarField { grid: *self, values }
    }

    pub fn constant_field(&self, c: f64) -> ScalarField {
        ScalarField {
            grid: *self,
            values: vec![c; self.len()],
        }
    }
}

/// A real field sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::CorruptField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    /// Value at the node nearest to `p`.
    pub fn sample(&self, p: Point) -> f64 {
        let (i, j) = self.grid.cell_of(p);
        self.at(i, j)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint quadrature: h^2 * sum of values. Since |Sigma| = 1 this is
    /// also the mean.
    pub fn integrate(&self) -> f64 {
        let h2 = self.grid.spacing() * self.grid.spacing();
        h2 * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.integrate()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &ScalarField, c: f64) {
        assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        self.shift(-m);
    }

    /// Pointwise L2 pairing: integral of u*v.
    pub fn l2_inner(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid);
        let h2 = self.grid.spacing() * self.grid.spacing();
        h2 * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_identity() {
        let p = Point::new(0.1, 0.1);
        assert_eq!(torus_distance(p, p), 0.0);
    }

    #[test]
    fn distance_periodic_wrap() {
        let d = torus_distance(Point::new(0.05, 0.5), Point::new(0.95, 0.5));
        assert!((d - 0.1).abs() < 1e-14);
    }

    #[test]
    fn distance_max_at_half_diagonal() {
        // brute-force min over the 9 images
        let p = Point::new(0.0, 0.0);
        let q = Point::new(0.5, 0.5);
        let mut brute = f64::INFINITY;
        for sx in -1..=1 {
            for sy in -1..=1 {
                let dx = q.x + sx as f64 - p.x;
                let dy = q.y + sy as f64 - p.y;
                brute = brute.min((dx * dx + dy * dy).sqrt());
            }
        }
        let d = torus_distance(p, q);
        assert!((d - brute).abs() < 1e-15);
        assert!((d - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn distance_is_a_metric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = Point::new(rng.gen(), rng.gen());
            let q = Point::new(rng.gen(), rng.gen());
            let r = Point::new(rng.gen(), rng.gen());
            let pq = torus_distance(p, q);
            let qp = torus_distance(q, p);
            assert!((pq - qp).abs() < 1e-15);
            assert!(pq <= torus_distance(p, r) + torus_distance(r, q) + 1e-12);
            assert!(pq <= std::f64::consts::SQRT_2 / 2.0 + 1e-15);
        }
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(TorusGrid::new(16).is_err());
        assert!(TorusGrid::new(48).is_err());
        assert!(TorusGrid::new(32).is_ok());
    }

    #[test]
    fn unit_area_quadrature() {
        let grid = TorusGrid::new(64).unwrap();
        let one = grid.constant_field(1.0);
        assert_eq!(one.integrate(), 1.0);
    }

    #[test]
    fn integrate_examples() {
        let grid = TorusGrid::new(64).unwrap();
        let five = grid.constant_field(5.0);
        assert!((five.integrate() - 5.0).abs() < 1e-14);

        let cosx = grid.field_from_fn(|p| (2.0 * std::f64::consts::PI * p.x).cos());
        assert!(cosx.integrate().abs() < 1e-14);
    }

    #[test]
    fn sample_nearest_node() {
        let grid = TorusGrid::new(32).unwrap();
        let f = grid.field_from_fn(|p| p.x + 10.0 * p.y);
        let p = grid.node(3, 5);
        assert_eq!(f.sample(p), f.at(3, 5));
    }
}
