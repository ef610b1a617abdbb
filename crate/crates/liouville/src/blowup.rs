//! Non-compactness machinery: the log-cone test functions phi^{lambda,x}
//! and the derived family u^lambda, their energy asymptotics in log(lambda),
//! concentration-mass estimation sigma_i(x) with the threshold constants,
//! blow-up set detection, and the Pohozaev identity check
//! `Lambda_{{1..N},x}(sigma(x)) = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energy::SystemField;
use crate::error::{Error, Result};
use crate::grid::{torus_distance, Point, ScalarField, TorusGrid};
use crate::lambda::{lambda_form_at, RhoVector};
use crate::model::SingularModel;
use crate::spectral::dirichlet_inner;

/// The plateau B_{1/lambda} must span at least 8 cells, otherwise the O(1)
/// terms of the asymptotics drown in quadrature error.
fn check_resolution(grid: TorusGrid, lambda: f64) -> Result<()> {
    let max = grid.n() as f64 / 8.0;
    if !(lambda >= 1.0) || lambda > max {
        return Err(Error::ResolutionViolation { lambda, max });
    }
    Ok(())
}

/// phi_i = -2 (1 + alpha) log max{1, lambda d(., x)}: zero on B_{1/lambda}(x),
/// non-positive, radially decreasing in d.
pub fn phi_component(grid: TorusGrid, x: Point, lambda: f64, alpha_x: f64) -> Result<ScalarField> {
    check_resolution(grid, lambda)?;
    Ok(grid.field_from_fn(|p| {
        let d = torus_distance(p, x);
        -2.0 * (1.0 + alpha_x) * (lambda * d).max(1.0).ln()
    }))
}

/// Least-squares fit y = slope * log(lambda) + intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub max_deviation: f64,
}

pub fn fit_log_slope(lambdas: &[f64], values: &[f64]) -> Result<SlopeEstimate> {
    if lambdas.len() < 3 {
        return Err(Error::TooFewValues {
            need: 3,
            got: lambdas.len(),
        });
    }
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = values.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(values).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let max_deviation = xs
        .iter()
        .zip(values)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(SlopeEstimate {
        slope,
        intercept,
        max_deviation,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiAsymptotics {
    /// Fit of int grad(phi_i).grad(phi_j) against log(lambda); the predicted
    /// slope is 8 pi (1 + alpha_i)(1 + alpha_j).
    pub dirichlet: SlopeEstimate,
    /// Fit of mean(phi_i) against log(lambda); predicted slope -2 (1 + alpha_i).
    pub average: SlopeEstimate,
}

/// Measure the log(lambda) growth rates of the phi pair (alpha_i, alpha_j).
pub fn phi_asymptotics_check(
    grid: TorusGrid,
    x: Point,
    alpha_pair: (f64, f64),
    lambdas: &[f64],
) -> Result<PhiAsymptotics> {
    if lambdas.len() < 3 {
        return Err(Error::TooFewValues {
            need: 3,
            got: lambdas.len(),
        });
    }
    let mut dirichlet_values = Vec::with_capacity(lambdas.len());
    let mut mean_values = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let phi_i = phi_component(grid, x, lambda, alpha_pair.0)?;
        let phi_j = phi_component(grid, x, lambda, alpha_pair.1)?;
        dirichlet_values.push(dirichlet_inner(&phi_i, &phi_j)?);
        mean_values.push(phi_i.mean());
    }
    Ok(PhiAsymptotics {
        dirichlet: fit_log_slope(lambdas, &dirichlet_values)?,
        average: fit_log_slope(lambdas, &mean_values)?,
    })
}

/// The unboundedness family
/// `u_i^lambda = sum_{j in I} (a_ij rho_j / (4 pi (1 + alpha_j(x)))) phi_j^{lambda,x}`.
/// Components outside I pick up contributions only through a_ij.
pub fn u_lambda_family(
    model: &SingularModel,
    rho: &RhoVector,
    subset: &[usize],
    x: Point,
    lambda: f64,
) -> Result<SystemField> {
    check_resolution(model.grid(), lambda)?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = model.component_count();
    let a = model.coupling();
    let phis: Vec<(usize, ScalarField)> = subset
        .iter()
        .map(|&j| {
            let alpha_j = model.alpha_at(j, x);
            phi_component(model.grid(), x, lambda, alpha_j).map(|phi| (j, phi))
        })
        .collect::<Result<_>>()?;
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        let mut u_i = model.grid().constant_field(0.0);
        for (j, phi_j) in &phis {
            let alpha_j = model.alpha_at(*j, x);
            u_i.add_scaled(phi_j, a.entry(i, *j) * rho.get(*j) / (4.0 * PI * (1.0 + alpha_j)));
        }
        components.push(u_i);
    }
    SystemField::new(components)
}

/// Predicted log(lambda) growth rate of J(u^lambda): Lambda_{I,x}(rho)/(4 pi).
/// Negative exactly when the family demonstrates unboundedness.
pub fn energy_slope_prediction(
    model: &SingularModel,
    rho: &RhoVector,
    subset: &[usize],
    x: Point,
) -> Result<f64> {
    let lambda = crate::lambda::lambda_subset_at(model, rho, subset, x)?;
    Ok(lambda / (4.0 * PI))
}

/// Concentration-mass table around a point, with the threshold constants of
/// the compactness analysis. The sigma values are finite-radius surrogates
/// for the double limit r -> 0, n -> infinity; the full radius table is kept
/// so the trend stays visible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub x: Point,
    /// Strictly decreasing radii.
    pub radii: Vec<f64>,
    /// masses[i][k] = int_{B_{radii[k]}(x)} tilde_h_i e^{v_i}
    pub masses: Vec<Vec<f64>>,
    /// Mass at the smallest radius, per component.
    pub sigma: Vec<f64>,
    /// Whether the two smallest-radius masses agree to 2% of rho_i.
    pub sigma_converged: Vec<bool>,
    /// sigma_i^0 = 4 pi min{1, 1 + min_{j,m} alpha_jm} / sum_j a_ij^+
    pub sigma_threshold_global: Vec<f64>,
    /// sigma_i' = 4 pi min{1, 1 + min_m alpha_im} / a_ii
    pub sigma_threshold_single: Vec<f64>,
    /// Lambda_{{1..N},x}(sigma)
    pub pohozaev_residual: f64,
}

/// Quadrature of tilde_h_i e^{v_i} over shrinking balls around `x`.
/// `v` must already be normalized so its masses equal rho.
pub fn estimate_sigma(
    model: &SingularModel,
    rho: &RhoVector,
    v: &SystemField,
    x: Point,
    radii: &[f64],
) -> Result<ConcentrationReport> {
    let grid = model.grid();
    let h = grid.spacing();
    if radii.len() < 2 {
        return Err(Error::TooFewValues {
            need: 2,
            got: radii.len(),
        });
    }
    for w in radii.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Config("radii must be strictly decreasing".into()));
        }
    }
    let r_min = radii[radii.len() - 1];
    if r_min < 4.0 * h {
        return Err(Error::RadiusTooSmall(r_min, 4.0 * h));
    }

    let n_comp = model.component_count();
    let n = grid.n();
    let h2 = h * h;
    let mut masses = vec![vec![0.0; radii.len()]; n_comp];
    for gi in 0..n {
        for gj in 0..n {
            let d = torus_distance(grid.node(gi, gj), x);
            if d >= radii[0] {
                continue;
            }
            // number of radii containing this node (radii are decreasing)
            let count = radii.partition_point(|&r| d < r);
            for i in 0..n_comp {
                let contrib =
                    h2 * model.tilde_h(i).at(gi, gj) * v.component(i).at(gi, gj).exp();
                if !contrib.is_finite() {
                    return Err(Error::CorruptField(format!(
                        "non-finite mass contribution at node ({gi},{gj})"
                    )));
                }
                for k in 0..count {
                    masses[i][k] += contrib;
                }
            }
        }
    }

    let last = radii.len() - 1;
    let mut sigma = Vec::with_capacity(n_comp);
    let mut sigma_converged = Vec::with_capacity(n_comp);
    for i in 0..n_comp {
        let m_last = masses[i][last];
        let m_prev = masses[i][last - 1];
        sigma.push(m_last);
        sigma_converged.push((m_last - m_prev).abs() < 0.02 * rho.get(i));
    }

    // min over an empty source set is the smooth case: min{1, 1+alpha} = 1
    let global_min_alpha = model
        .sources()
        .iter()
        .flat_map(|s| s.alpha.iter().copied())
        .fold(0.0, f64::min);
    let a = model.coupling();
    let num_global = 4.0 * PI * (1.0 + global_min_alpha).min(1.0);
    let mut sigma_threshold_global = Vec::with_capacity(n_comp);
    let mut sigma_threshold_single = Vec::with_capacity(n_comp);
    for i in 0..n_comp {
        let pos_row_sum: f64 = (0..n_comp).map(|j| a.entry(i, j).max(0.0)).sum();
        sigma_threshold_global.push(num_global / pos_row_sum);
        let min_alpha_i = model
            .sources()
            .iter()
            .map(|s| s.alpha[i])
            .fold(0.0, f64::min);
        let num_single = 4.0 * PI * (1.0 + min_alpha_i).min(1.0);
        sigma_threshold_single.push(num_single / a.entry(i, i));
    }

    let full: Vec<usize> = (0..n_comp).collect();
    let pohozaev_residual = lambda_form_at(model, &sigma, &full, x)?;

    Ok(ConcentrationReport {
        x,
        radii: radii.to_vec(),
        masses,
        sigma,
        sigma_converged,
        sigma_threshold_global,
        sigma_threshold_single,
        pohozaev_residual,
    })
}

/// Lambda_{{1..N},x}(sigma): zero for the concentration values of a genuine
/// blow-up family. Shares the arithmetic path with the Lambda criterion.
pub fn pohozaev_check(model: &SingularModel, sigma: &[f64], x: Point) -> Result<f64> {
    let full: Vec<usize> = (0..model.component_count()).collect();
    lambda_form_at(model, sigma, &full, x)
}

/// The explicit planar Liouville bubble log(8 lambda^2 / (1 + lambda^2 |y|^2)^2)
/// transplanted to the torus through the periodic distance. Its plane mass is
/// exactly 8 pi.
pub fn synthetic_bubble(grid: TorusGrid, center: Point, lambda: f64) -> ScalarField {
    grid.field_from_fn(|p| {
        let d = torus_distance(p, center);
        (8.0 * lambda * lambda).ln() - 2.0 * (1.0 + lambda * lambda * d * d).ln()
    })
}

/// Per component, the cluster centers of the nodes where the last field of
/// the sequence exceeds the first field's sup by `threshold`. Clusters are
/// merged within radius 8h; an empty list means no blow-up was detected.
pub fn detect_blowup_set(
    sequence: &[SystemField],
    threshold: f64,
) -> Result<Vec<Vec<Point>>> {
    if sequence.len() < 2 {
        return Err(Error::TooFewValues {
            need: 2,
            got: sequence.len(),
        });
    }
    let first = &sequence[0];
    let last = &sequence[sequence.len() - 1];
    let grid = last.grid();
    let merge_radius = 8.0 * grid.spacing();
    let n = grid.n();
    let mut out = Vec::with_capacity(last.len());
    for i in 0..last.len() {
        let baseline = first.component(i).max();
        let mut candidates: Vec<(f64, Point)> = Vec::new();
        for gi in 0..n {
            for gj in 0..n {
                let v = last.component(i).at(gi, gj);
                if v > baseline + threshold {
                    candidates.push((v, grid.node(gi, gj)));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        // grow clusters transitively: a candidate joins a cluster if it is
        // within the merge radius of any existing member, and the cluster
        // center is its highest node (first inserted)
        let mut clusters: Vec<Vec<Point>> = Vec::new();
        for (_, p) in candidates {
            let mut joined: Vec<usize> = clusters
                .iter()
                .enumerate()
                .filter(|(_, c)| c.iter().any(|q| torus_distance(*q, p) <= merge_radius))
                .map(|(k, _)| k)
                .collect();
            match joined.len() {
                0 => clusters.push(vec![p]),
                1 => clusters[joined[0]].push(p),
                _ => {
                    // p bridges several clusters: merge them into the first
                    let keep = joined.remove(0);
                    for &k in joined.iter().rev() {
                        let moved = clusters.remove(k);
                        clusters[keep].extend(moved);
                    }
                    clusters[keep].push(p);
                }
            }
        }
        out.push(clusters.into_iter().map(|c| c[0]).collect());
    }
    Ok(out)
}
