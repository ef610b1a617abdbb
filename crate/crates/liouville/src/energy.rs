//! The energy functional
//! `J_rho(u) = 1/2 sum_ij a^{ij} int grad(u_i).grad(u_j)
//!             - sum_i rho_i (log int tilde_h_i e^{u_i} - mean(u_i))`,
//! its L2 gradient, the Euler-Lagrange residual of the system
//! `-Delta u_i = sum_j a_ij rho_j (tilde_h_j e^{u_j} / mass_j - 1)`,
//! and the mass normalization u -> v.
//!
//! All exponential integrals are computed in shifted form
//! `exp(s) * int tilde_h e^{u - s}` with s = max(u), so blow-up experiments
//! can push max(u) far past 700 without overflowing.

use serde::{Deserialize, Serialize};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};
use crate::lambda::RhoVector;
use crate::model::SingularModel;
use crate::spectral::{dirichlet_inner, laplacian};

/// N-component field on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemField {
    components: Vec<ScalarField>,
}

impl SystemField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::BadComponentCount(0));
        }
        let grid = components[0].grid();
        for c in &components[1..] {
            if c.grid() != grid {
                return Err(Error::GridMismatch(c.grid().n(), grid.n()));
            }
        }
        Ok(SystemField { components })
    }

    pub fn zeros(grid: TorusGrid, n_components: usize) -> Self {
        SystemField {
            components: (0..n_components).map(|_| grid.constant_field(0.0)).collect(),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.components[0].grid()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }

    pub fn add_scaled(&mut self, other: &SystemField, t: f64) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.add_scaled(b, t);
        }
    }

    pub fn subtract_means(&mut self) {
        for c in &mut self.components {
            c.subtract_mean();
        }
    }

    /// Componentwise L2 pairing summed over components.
    pub fn l2_inner(&self, other: &SystemField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.l2_inner(b))
            .sum()
    }

    /// Sum of the componentwise Dirichlet energies.
    pub fn dirichlet_energy(&self) -> Result<f64> {
        self.components
            .iter()
            .map(|c| dirichlet_inner(c, c))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub j: f64,
    /// 1/2 sum_ij a^{ij} int grad(u_i).grad(u_j)
    pub dirichlet_part: f64,
    /// rho_i (log int tilde_h_i e^{u_i} - mean(u_i)) per component
    pub entropy_parts: Vec<f64>,
    /// int tilde_h_i e^{u_i}; may round to +inf for extreme fields, the
    /// log-masses are always finite
    pub masses: Vec<f64>,
    pub log_masses: Vec<f64>,
}

fn check_shapes(model: &SingularModel, rho: &RhoVector, u: &SystemField) -> Result<()> {
    let n = model.component_count();
    if u.len() != n {
        return Err(Error::BadComponentCount(u.len()));
    }
    if rho.len() != n {
        return Err(Error::Config(format!(
            "rho has {} components, model has {n}",
            rho.len()
        )));
    }
    if u.grid() != model.grid() {
        return Err(Error::GridMismatch(u.grid().n(), model.grid().n()));
    }
    Ok(())
}

/// Shifted mass of one component: returns (log_mass, shift, shifted_integral)
/// with mass = exp(shift) * shifted_integral.
fn shifted_mass(tilde_h: &ScalarField, u: &ScalarField) -> Result<(f64, f64, f64)> {
    let shift = u.max();
    let h2 = u.grid().spacing().powi(2);
    let integral: f64 = tilde_h
        .values()
        .iter()
        .zip(u.values())
        .map(|(&h, &uv)| h * (uv - shift).exp())
        .sum::<f64>()
        * h2;
    if !integral.is_finite() || integral <= 0.0 {
        return Err(Error::CorruptField(format!(
            "shifted mass integral = {integral}"
        )));
    }
    Ok((shift + integral.ln(), shift, integral))
}

pub fn evaluate_j(model: &SingularModel, rho: &RhoVector, u: &SystemField) -> Result<EnergyReport> {
    check_shapes(model, rho, u)?;
    let n = model.component_count();
    let a = model.coupling();

    let mut dirichlet_part = 0.0;
    for i in 0..n {
        for j in i..n {
            let pair = dirichlet_inner(u.component(i), u.component(j))?;
            let w = if i == j { 0.5 } else { 1.0 };
            dirichlet_part += w * a.inv_entry(i, j) * pair;
        }
    }

    let mut entropy_parts = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    let mut log_masses = Vec::with_capacity(n);
    for i in 0..n {
        let (log_mass, _, _) = shifted_mass(model.tilde_h(i), u.component(i))?;
        let mean = u.component(i).mean();
        entropy_parts.push(rho.get(i) * (log_mass - mean));
        masses.push(log_mass.exp());
        log_masses.push(log_mass);
    }

    let j = dirichlet_part - entropy_parts.iter().sum::<f64>();
    Ok(EnergyReport {
        j,
        dirichlet_part,
        entropy_parts,
        masses,
        log_masses,
    })
}

/// Normalized density tilde_h_i e^{u_i} / mass_i, computed in shifted form.
fn unit_mass_density(tilde_h: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    let (_, shift, integral) = shifted_mass(tilde_h, u)?;
    let values: Vec<f64> = tilde_h
        .values()
        .iter()
        .zip(u.values())
        .map(|(&h, &uv)| h * (uv - shift).exp() / integral)
        .collect();
    ScalarField::from_values(u.grid(), values)
}

/// L2 gradient of J: g_i = sum_j a^{ij} (-Delta u_j)
///                         - rho_i (tilde_h_i e^{u_i} / mass_i - 1).
pub fn l2_gradient(model: &SingularModel, rho: &RhoVector, u: &SystemField) -> Result<SystemField> {
    check_shapes(model, rho, u)?;
    let n = model.component_count();
    let a = model.coupling();
    let neg_laps: Vec<ScalarField> = (0..n)
        .map(|j| {
            let mut l = laplacian(u.component(j));
            l.scale(-1.0);
            l
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut g = u.grid().constant_field(rho.get(i));
        let density = unit_mass_density(model.tilde_h(i), u.component(i))?;
        g.add_scaled(&density, -rho.get(i));
        for (j, nl) in neg_laps.iter().enumerate() {
            g.add_scaled(nl, a.inv_entry(i, j));
        }
        out.push(g);
    }
    SystemField::new(out)
}

/// Euler-Lagrange residual r_i = -Delta u_i
///   - sum_j a_ij rho_j (tilde_h_j e^{u_j} / mass_j - 1).
/// Equals the matrix action A * g on the L2 gradient.
pub fn el_residual(model: &SingularModel, rho: &RhoVector, u: &SystemField) -> Result<SystemField> {
    check_shapes(model, rho, u)?;
    let n = model.component_count();
    let a = model.coupling();
    let densities: Vec<ScalarField> = (0..n)
        .map(|j| unit_mass_density(model.tilde_h(j), u.component(j)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = laplacian(u.component(i));
        r.scale(-1.0);
        for j in 0..n {
            // RHS_j = a_ij rho_j (density_j - 1)
            r.add_scaled(&densities[j], -a.entry(i, j) * rho.get(j));
            r.shift(a.entry(i, j) * rho.get(j));
        }
        out.push(r);
    }
    SystemField::new(out)
}

/// v_i = u_i - log int tilde_h_i e^{u_i} + log rho_i, so that
/// int tilde_h_i e^{v_i} = rho_i.
pub fn normalize_v(model: &SingularModel, rho: &RhoVector, u: &SystemField) -> Result<SystemField> {
    check_shapes(model, rho, u)?;
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let (log_mass, _, _) = shifted_mass(model.tilde_h(i), u.component(i))?;
        let mut v = u.component(i).clone();
        v.shift(rho.get(i).ln() - log_mass);
        out.push(v);
    }
    SystemField::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Point, TorusGrid};
    use crate::model::{CouplingMatrix, SingularSource};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn toda_model(n: usize) -> SingularModel {
        SingularModel::new(
            TorusGrid::new(n).unwrap(),
            CouplingMatrix::new(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
            vec![SingularSource {
                point: Point::new(0.5, 0.5),
                alpha: vec![-0.5, 0.3],
            }],
        )
        .unwrap()
    }

    fn random_smooth(grid: TorusGrid, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
        let modes: Vec<(f64, f64, f64, f64)> = (0..8)
            .map(|_| {
                (
                    rng.gen_range(-3i64..=3) as f64,
                    rng.gen_range(-3i64..=3) as f64,
                    rng.gen_range(-amp..amp),
                    rng.gen_range(-amp..amp),
                )
            })
            .collect();
        grid.field_from_fn(|p| {
            modes
                .iter()
                .map(|&(k1, k2, a, b)| {
                    let ph = 2.0 * PI * (k1 * p.x + k2 * p.y);
                    a * ph.cos() + b * ph.sin()
                })
                .sum()
        })
    }

    fn random_system(model: &SingularModel, rng: &mut ChaCha8Rng, amp: f64) -> SystemField {
        SystemField::new(
            (0..model.component_count())
                .map(|_| random_smooth(model.grid(), rng, amp))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_field_regular_case() {
        let model = SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![1.0]]).unwrap(),
            vec![],
        )
        .unwrap();
        let rho = RhoVector::new(vec![7.0]).unwrap();
        let u = SystemField::zeros(model.grid(), 1);
        let report = evaluate_j(&model, &rho, &u).unwrap();
        assert!(report.j.abs() < 1e-12);
        assert!((report.masses[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let model = toda_model(64);
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let u = random_system(&model, &mut rng, 0.7);
            let j0 = evaluate_j(&model, &rho, &u).unwrap().j;
            let mut shifted = u.clone();
            shifted.component_mut(0).shift(rng.gen_range(-5.0..5.0));
            shifted.component_mut(1).shift(rng.gen_range(-5.0..5.0));
            let j1 = evaluate_j(&model, &rho, &shifted).unwrap().j;
            assert!((j0 - j1).abs() < 1e-10 * (1.0 + j0.abs()));
        }
    }

    #[test]
    fn report_parts_are_consistent() {
        let model = toda_model(64);
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_system(&model, &mut rng, 0.8);
        let report = evaluate_j(&model, &rho, &u).unwrap();
        let expect = report.dirichlet_part - report.entropy_parts.iter().sum::<f64>();
        assert_eq!(report.j, expect);
        assert!(report.masses.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = toda_model(64);
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_system(&model, &mut rng, 0.6);
        let g = l2_gradient(&model, &rho, &u).unwrap();
        let eps = 1e-4;
        for _ in 0..5 {
            let w = random_system(&model, &mut rng, 0.5);
            let mut up = u.clone();
            up.add_scaled(&w, eps);
            let mut um = u.clone();
            um.add_scaled(&w, -eps);
            let fd = (evaluate_j(&model, &rho, &up).unwrap().j
                - evaluate_j(&model, &rho, &um).unwrap().j)
                / (2.0 * eps);
            let pairing = g.l2_inner(&w);
            assert!(
                (fd - pairing).abs() < 1e-5 * (1.0 + pairing.abs()),
                "fd={fd} pairing={pairing}"
            );
        }
    }

    #[test]
    fn gradient_has_zero_mean() {
        let model = toda_model(64);
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = random_system(&model, &mut rng, 0.9);
        let g = l2_gradient(&model, &rho, &u).unwrap();
        for i in 0..2 {
            assert!(g.component(i).mean().abs() < 1e-10);
        }
    }

    #[test]
    fn residual_is_matrix_action_on_gradient() {
        let model = toda_model(64);
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let u = random_system(&model, &mut rng, 0.7);
        let g = l2_gradient(&model, &rho, &u).unwrap();
        let r = el_residual(&model, &rho, &u).unwrap();
        let a = model.coupling();
        let scale = 1.0 + r.component(0).max().abs();
        for i in 0..2 {
            assert!(r.component(i).mean().abs() < 1e-10);
            for idx in 0..model.grid().len() {
                let combo: f64 = (0..2)
                    .map(|j| a.entry(i, j) * g.component(j).values()[idx])
                    .sum();
                assert!((r.component(i).values()[idx] - combo).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn constants_solve_the_regular_system() {
        let model = SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
            vec![],
        )
        .unwrap();
        let rho = RhoVector::new(vec![2.0, 3.0]).unwrap();
        let mut u = SystemField::zeros(model.grid(), 2);
        u.component_mut(0).shift(1.5);
        let r = el_residual(&model, &rho, &u).unwrap();
        for i in 0..2 {
            assert!(r.component(i).values().iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn normalize_v_examples() {
        let model = SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![1.0]]).unwrap(),
            vec![],
        )
        .unwrap();
        let rho = RhoVector::new(vec![5.0]).unwrap();
        let u = SystemField::zeros(model.grid(), 1);
        let v = normalize_v(&model, &rho, &u).unwrap();
        assert!(v.component(0).values().iter().all(|x| (x - 5.0f64.ln()).abs() < 1e-12));

        // idempotence and mass constraint on a random field
        let model = toda_model(64);
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let u = random_system(&model, &mut rng, 1.0);
        let v = normalize_v(&model, &rho, &u).unwrap();
        for i in 0..2 {
            let h2 = model.grid().spacing().powi(2);
            let mass: f64 = model
                .tilde_h(i)
                .values()
                .iter()
                .zip(v.component(i).values())
                .map(|(&h, &x)| h * x.exp())
                .sum::<f64>()
                * h2;
            assert!((mass - rho.get(i)).abs() < 1e-10 * rho.get(i));
        }
        let vv = normalize_v(&model, &rho, &v).unwrap();
        for i in 0..2 {
            for (a, b) in vv.component(i).values().iter().zip(v.component(i).values()) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
