//! Coercivity classification via the quadratic
//! `Lambda_{I,x}(rho) = 8 pi sum_{i in I} (1 + alpha_i(x)) rho_i
//!                      - sum_{i,j in I} a_ij rho_i rho_j`
//! minimized over nonempty subsets I and over x. Because alpha_i(x) = 0 away
//! from the sources, the minimum over x is a finite minimum over the source
//! points plus one generic point.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::model::SingularModel;

/// Positive parameter vector (rho_1, ..., rho_N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoVector(Vec<f64>);

impl RhoVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &r) in values.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NonPositiveRho(i));
            }
        }
        Ok(RhoVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        RhoVector::new(self.0.iter().map(|r| t * r).collect())
    }

    fn norm_sq(&self) -> f64 {
        self.0.iter().map(|r| r * r).sum()
    }

    fn norm_l1(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Where the minimizing Lambda_{I,x} was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArgminPoint {
    /// Any point away from the sources (all alpha_i = 0 there).
    Generic,
    Source { index: usize, point: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Coercive,
    Critical,
    Unbounded,
}

/// Result of minimizing Lambda_{I,x} over subsets and candidate points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaReport {
    pub lambda: f64,
    /// 0-based component indices, sorted ascending.
    pub argmin_subset: Vec<usize>,
    pub argmin_point: ArgminPoint,
    pub classification: Classification,
    /// Half-width of the critical band around Lambda = 0.
    pub epsilon: f64,
    /// Whether the off-diagonal entries of A are all <= 0, i.e. whether the
    /// sharp threshold applies. At Lambda = 0 boundedness from below is
    /// guaranteed only in this regime; otherwise "critical" makes no
    /// boundedness claim.
    pub sharp_regime: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_subset_table: Option<Vec<LambdaTableRow>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaTableRow {
    pub subset: Vec<usize>,
    pub point: ArgminPoint,
    pub value: f64,
}

/// Relative tolerance for the critical band: Lambda is a smooth quadratic,
/// so only floating-point noise needs absorbing.
pub fn epsilon_lambda(model: &SingularModel, rho: &RhoVector) -> f64 {
    1e-9
        * (1.0
            + model.coupling().inf_norm() * rho.norm_sq()
            + 8.0 * PI * (1.0 + model.max_abs_alpha()) * rho.norm_l1())
}

fn check_rho(model: &SingularModel, rho: &RhoVector) -> Result<()> {
    if rho.len() != model.component_count() {
        return Err(Error::Config(format!(
            "rho has {} components, model has {}",
            rho.len(),
            model.component_count()
        )));
    }
    Ok(())
}

/// Exact evaluation of the quadratic for a subset (0-based indices) at x.
pub fn lambda_subset_at(
    model: &SingularModel,
    rho: &RhoVector,
    subset: &[usize],
    x: Point,
) -> Result<f64> {
    check_rho(model, rho)?;
    lambda_form_at(model, rho.values(), subset, x)
}

/// The bare quadratic form on arbitrary (possibly zero) coordinates: this is
/// also the left-hand side of the Pohozaev identity when fed sigma.
pub fn lambda_form_at(
    model: &SingularModel,
    values: &[f64],
    subset: &[usize],
    x: Point,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if values.len() != model.component_count() {
        return Err(Error::Config(format!(
            "value vector has {} components, model has {}",
            values.len(),
            model.component_count()
        )));
    }
    let alpha: Vec<f64> = (0..model.component_count())
        .map(|i| model.alpha_at(i, x))
        .collect();
    Ok(lambda_quadratic(model, values, subset, &alpha))
}

fn lambda_quadratic(
    model: &SingularModel,
    values: &[f64],
    subset: &[usize],
    alpha: &[f64],
) -> f64 {
    let a = model.coupling();
    let mut linear = 0.0;
    let mut quadratic = 0.0;
    for &i in subset {
        linear += (1.0 + alpha[i]) * values[i];
        for &j in subset {
            quadratic += a.entry(i, j) * values[i] * values[j];
        }
    }
    8.0 * PI * linear - quadratic
}

/// Enumerate nonempty subsets of {0..N-1} ordered by cardinality, then
/// lexicographically on the sorted element lists.
fn ordered_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

/// Candidate evaluation points: alpha_i(x) takes at most M + 1 distinct
/// profiles, one per source plus the generic one.
fn candidate_points(model: &SingularModel) -> Vec<(ArgminPoint, Vec<f64>)> {
    let n = model.component_count();
    let mut out: Vec<(ArgminPoint, Vec<f64>)> = model
        .sources()
        .iter()
        .enumerate()
        .map(|(m, s)| {
            (
                ArgminPoint::Source {
                    index: m,
                    point: s.point,
                },
                s.alpha.clone(),
            )
        })
        .collect();
    out.push((ArgminPoint::Generic, vec![0.0; n]));
    out
}

/// Minimize Lambda_{I,x} over all nonempty subsets and candidate points.
/// Ties go to the smallest subset, then lexicographic subset order, then
/// source index order with the generic point last.
pub fn lambda_min(model: &SingularModel, rho: &RhoVector) -> Result<LambdaReport> {
    lambda_min_with_table(model, rho, false)
}

pub fn lambda_min_with_table(
    model: &SingularModel,
    rho: &RhoVector,
    keep_table: bool,
) -> Result<LambdaReport> {
    check_rho(model, rho)?;
    let subsets = ordered_subsets(model.component_count());
    let candidates = candidate_points(model);
    let mut best: Option<(f64, Vec<usize>, ArgminPoint)> = None;
    let mut table = Vec::new();
    for subset in &subsets {
        for (point, alpha) in &candidates {
            let value = lambda_quadratic(model, rho.values(), subset, alpha);
            if keep_table {
                table.push(LambdaTableRow {
                    subset: subset.clone(),
                    point: point.clone(),
                    value,
                });
            }
            if best.as_ref().map_or(true, |(b, _, _)| value < *b) {
                best = Some((value, subset.clone(), point.clone()));
            }
        }
    }
    let (lambda, argmin_subset, argmin_point) = best.expect("at least one subset");
    let epsilon = epsilon_lambda(model, rho);
    let classification = if lambda > epsilon {
        Classification::Coercive
    } else if lambda < -epsilon {
        Classification::Unbounded
    } else {
        Classification::Critical
    };
    Ok(LambdaReport {
        lambda,
        argmin_subset,
        argmin_point,
        classification,
        epsilon,
        sharp_regime: model.coupling().off_diagonal_nonpositive(),
        per_subset_table: if keep_table { Some(table) } else { None },
    })
}

/// The critical vector rho^0 = (8 pi (1 + tilde_alpha_i) / a_ii)_i.
/// Only valid under non-positive off-diagonal coupling.
pub fn rho_critical(model: &SingularModel) -> Result<RhoVector> {
    let a = model.coupling();
    let n = a.size();
    for i in 0..n {
        for j in 0..n {
            if i != j && a.entry(i, j) > 0.0 {
                return Err(Error::PositiveOffDiagonal {
                    i,
                    j,
                    value: a.entry(i, j),
                });
            }
        }
    }
    RhoVector::new(
        (0..n)
            .map(|i| 8.0 * PI * (1.0 + model.tilde_alpha(i)) / a.entry(i, i))
            .collect(),
    )
}

/// One report per rho, order-preserving.
pub fn classify_region_sweep(
    model: &SingularModel,
    rho_grid: &[RhoVector],
) -> Result<Vec<LambdaReport>> {
    rho_grid.iter().map(|rho| lambda_min(model, rho)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::model::{CouplingMatrix, SingularSource};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_model() -> SingularModel {
        SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![1.0]]).unwrap(),
            vec![],
        )
        .unwrap()
    }

    fn toda_model() -> SingularModel {
        SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
            vec![],
        )
        .unwrap()
    }

    /// Independent brute force used as the oracle for lambda_min.
    pub(crate) fn brute_force_lambda(model: &SingularModel, rho: &RhoVector) -> f64 {
        let n = model.component_count();
        let a = model.coupling();
        let mut points: Vec<Vec<f64>> = model.sources().iter().map(|s| s.alpha.clone()).collect();
        points.push(vec![0.0; n]);
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            for alpha in &points {
                let mut val = 0.0;
                for i in 0..n {
                    if mask & (1 << i) == 0 {
                        continue;
                    }
                    val += 8.0 * PI * (1.0 + alpha[i]) * rho.get(i);
                    for j in 0..n {
                        if mask & (1 << j) != 0 {
                            val -= a.entry(i, j) * rho.get(i) * rho.get(j);
                        }
                    }
                }
                best = best.min(val);
            }
        }
        best
    }

    #[test]
    fn scalar_threshold_is_8pi() {
        let model = scalar_model();
        let rho = RhoVector::new(vec![8.0 * PI]).unwrap();
        let v = lambda_subset_at(&model, &rho, &[0], Point::new(0.1, 0.1)).unwrap();
        assert!(v.abs() < 1e-9);
        let report = lambda_min(&model, &rho).unwrap();
        assert_eq!(report.classification, Classification::Critical);
    }

    #[test]
    fn toda_interior_value() {
        let model = toda_model();
        let rho = RhoVector::new(vec![4.0 * PI, 4.0 * PI]).unwrap();
        let v = lambda_subset_at(&model, &rho, &[0, 1], Point::new(0.3, 0.3)).unwrap();
        // 64 pi^2 - 32 pi^2
        assert!((v - 32.0 * PI * PI).abs() < 1e-9);
        let report = lambda_min(&model, &rho).unwrap();
        assert!(report.lambda.abs() < report.epsilon);
        assert_eq!(report.argmin_subset, vec![0]);
        assert_eq!(report.classification, Classification::Critical);
    }

    #[test]
    fn empty_subset_rejected() {
        let model = scalar_model();
        let rho = RhoVector::new(vec![1.0]).unwrap();
        assert!(lambda_subset_at(&model, &rho, &[], Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn small_rho_is_positive() {
        let model = toda_model();
        let rho = RhoVector::new(vec![1e-6, 1e-6]).unwrap();
        for subset in [vec![0], vec![1], vec![0, 1]] {
            let v = lambda_subset_at(&model, &rho, &subset, Point::new(0.2, 0.8)).unwrap();
            assert!(v > 0.0);
        }
    }

    #[test]
    fn singular_point_dominates_minimum() {
        let model = SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![1.0]]).unwrap(),
            vec![SingularSource {
                point: Point::new(0.5, 0.5),
                alpha: vec![-0.5],
            }],
        )
        .unwrap();
        // rho^0 = 8 pi (1 - 0.5) = 4 pi; rho = 0.9 rho^0 should be coercive
        // with the singular point as argmin.
        let rho = RhoVector::new(vec![0.9 * 8.0 * PI * 0.5]).unwrap();
        let report = lambda_min(&model, &rho).unwrap();
        assert_eq!(report.classification, Classification::Coercive);
        assert!(matches!(report.argmin_point, ArgminPoint::Source { index: 0, .. }));
        let expect = 8.0 * PI * 0.5 * rho.get(0) - rho.get(0) * rho.get(0);
        assert!((report.lambda - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn rho_critical_examples() {
        let model = scalar_model();
        let rho0 = rho_critical(&model).unwrap();
        assert_eq!(rho0.get(0), 8.0 * PI);

        let toda_singular = SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
            vec![SingularSource {
                point: Point::new(0.25, 0.75),
                alpha: vec![-0.5, 0.0],
            }],
        )
        .unwrap();
        let rho0 = rho_critical(&toda_singular).unwrap();
        assert!((rho0.get(0) - 2.0 * PI).abs() < 1e-12);
        assert!((rho0.get(1) - 4.0 * PI).abs() < 1e-12);

        // boundary by construction
        let report = lambda_min(&toda_singular, &rho0).unwrap();
        assert_eq!(report.classification, Classification::Critical);
    }

    #[test]
    fn rho_critical_rejects_positive_off_diagonal() {
        let model = SingularModel::new(
            TorusGrid::new(32).unwrap(),
            CouplingMatrix::new(&[vec![2.0, 0.5], vec![0.5, 2.0]]).unwrap(),
            vec![],
        )
        .unwrap();
        assert!(matches!(
            rho_critical(&model),
            Err(Error::PositiveOffDiagonal { .. })
        ));
    }

    fn random_model(rng: &mut ChaCha8Rng, grid: TorusGrid) -> SingularModel {
        let n = rng.gen_range(1..=4usize);
        // random SPD: B B^T + eps I
        let rows = loop {
            let b: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
                }
                a[i][i] += 0.1;
            }
            break a;
        };
        let m = rng.gen_range(0..=3usize);
        let sources = (0..m)
            .map(|k| SingularSource {
                point: Point::new(0.1 + 0.27 * k as f64, rng.gen()),
                alpha: (0..n).map(|_| rng.gen_range(-0.9..2.0)).collect(),
            })
            .collect();
        SingularModel::new(grid, CouplingMatrix::new(&rows).unwrap(), sources).unwrap()
    }

    #[test]
    fn lambda_min_matches_brute_force() {
        let grid = TorusGrid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let model = random_model(&mut rng, grid);
            let rho = RhoVector::new(
                (0..model.component_count())
                    .map(|_| rng.gen_range(0.1..60.0))
                    .collect(),
            )
            .unwrap();
            let fast = lambda_min(&model, &rho).unwrap().lambda;
            let brute = brute_force_lambda(&model, &rho);
            assert!(
                (fast - brute).abs() <= 1e-12 * (1.0 + brute.abs()),
                "fast={fast} brute={brute}"
            );
        }
    }

    #[test]
    fn monotonicity_of_positive_region() {
        let grid = TorusGrid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 1000 {
            let model = random_model(&mut rng, grid);
            let rho = RhoVector::new(
                (0..model.component_count())
                    .map(|_| rng.gen_range(0.1..40.0))
                    .collect(),
            )
            .unwrap();
            if lambda_min(&model, &rho).unwrap().lambda <= 0.0 {
                continue;
            }
            let smaller = RhoVector::new(
                rho.values()
                    .iter()
                    .map(|&r| r * rng.gen_range(0.01..1.0f64))
                    .collect(),
            )
            .unwrap();
            assert!(lambda_min(&model, &smaller).unwrap().lambda > 0.0);
            checked += 1;
        }
    }

    #[test]
    fn nonpositive_off_diagonal_reduction() {
        // with nonpositive off-diagonal coupling, the singleton values
        // 8 pi (1 + tilde_alpha_i) rho_i - a_ii rho_i^2 control the minimum
        let grid = TorusGrid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let n = rng.gen_range(1..=4usize);
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = -rng.gen_range(0.0..0.3);
                    rows[i][j] = v;
                    rows[j][i] = v;
                }
                rows[i][i] = rng.gen_range(1.0..3.0);
            }
            let coupling = match CouplingMatrix::new(&rows) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let m = rng.gen_range(0..=2usize);
            let sources = (0..m)
                .map(|k| SingularSource {
                    point: Point::new(0.2 + 0.31 * k as f64, 0.4),
                    alpha: (0..n).map(|_| rng.gen_range(-0.9..1.5)).collect(),
                })
                .collect();
            let model = SingularModel::new(grid, coupling, sources).unwrap();
            let rho = RhoVector::new((0..n).map(|_| rng.gen_range(0.1..40.0)).collect()).unwrap();
            let full = lambda_min(&model, &rho).unwrap().lambda;
            let reduced = (0..n)
                .map(|i| {
                    8.0 * PI * (1.0 + model.tilde_alpha(i)) * rho.get(i)
                        - model.coupling().entry(i, i) * rho.get(i) * rho.get(i)
                })
                .fold(f64::INFINITY, f64::min);
            // singletons are among the candidate subsets
            assert!(
                full <= reduced + 1e-10 * (1.0 + reduced.abs()),
                "full={full} reduced={reduced}"
            );
            // with a_ij <= 0, Lambda_I >= sum of singleton values, so when
            // every singleton is positive the minimum is a singleton
            if reduced > 0.0 {
                assert!(
                    (full - reduced).abs() <= 1e-10 * (1.0 + reduced.abs()),
                    "full={full} reduced={reduced}"
                );
            }
        }
    }

    #[test]
    fn scale_structure_is_quadratic() {
        let model = toda_model();
        let rho = RhoVector::new(vec![3.0, 5.0]).unwrap();
        let x = Point::new(0.4, 0.4);
        let subset = vec![0, 1];
        let v1 = lambda_subset_at(&model, &rho, &subset, x).unwrap();
        let v2 = lambda_subset_at(&model, &rho.scaled(2.0).unwrap(), &subset, x).unwrap();
        // extract linear and quadratic parts from t = 1, 2 and predict t = 3
        let q = (2.0 * v1 - v2) / 2.0;
        let l = v1 + q;
        let v3 = lambda_subset_at(&model, &rho.scaled(3.0).unwrap(), &subset, x).unwrap();
        assert!((v3 - (3.0 * l - 9.0 * q)).abs() < 1e-9 * (1.0 + v3.abs()));
    }

    #[test]
    fn permutation_invariance() {
        // swapping components of rho, rows/columns of A and alpha entries
        // leaves Lambda unchanged
        let grid = TorusGrid::new(32).unwrap();
        let rows = [vec![2.0, -0.5], vec![-0.5, 1.0]];
        let swapped = [vec![1.0, -0.5], vec![-0.5, 2.0]];
        let src = |alpha: Vec<f64>| SingularSource {
            point: Point::new(0.3, 0.3),
            alpha,
        };
        let m1 = SingularModel::new(
            grid,
            CouplingMatrix::new(&rows).unwrap(),
            vec![src(vec![-0.4, 0.7])],
        )
        .unwrap();
        let m2 = SingularModel::new(
            grid,
            CouplingMatrix::new(&swapped).unwrap(),
            vec![src(vec![0.7, -0.4])],
        )
        .unwrap();
        let rho1 = RhoVector::new(vec![7.0, 11.0]).unwrap();
        let rho2 = RhoVector::new(vec![11.0, 7.0]).unwrap();
        let l1 = lambda_min(&m1, &rho1).unwrap().lambda;
        let l2 = lambda_min(&m2, &rho2).unwrap().lambda;
        assert!((l1 - l2).abs() < 1e-12 * (1.0 + l1.abs()));
    }

    #[test]
    fn sweep_preserves_order() {
        let model = scalar_model();
        let rhos: Vec<RhoVector> = [7.0, 8.0 * PI, 30.0]
            .iter()
            .map(|&r| RhoVector::new(vec![r]).unwrap())
            .collect();
        let reports = classify_region_sweep(&model, &rhos).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[0].classification, Classification::Coercive);
        assert_eq!(reports[1].classification, Classification::Critical);
        assert_eq!(reports[2].classification, Classification::Unbounded);
        assert!(classify_region_sweep(&model, &[]).unwrap().is_empty());
    }
}
