//! Coercivity classification through the Lambda criterion: the regular Toda
//! system, then the same system with a conical singularity on one component.

use std::f64::consts::PI;

use liouville::*;

fn report(model: &SingularModel, rho: &RhoVector) {
    let r = lambda_min(model, rho).unwrap();
    println!(
        "  rho = {:?}\n  Lambda = {:.4}, argmin I = {:?} at {:?} -> {:?}",
        rho.values(),
        r.lambda,
        r.argmin_subset.iter().map(|i| i + 1).collect::<Vec<_>>(),
        r.argmin_point,
        r.classification
    );
}

fn main() {
    let grid = TorusGrid::new(64).unwrap();
    let toda = CouplingMatrix::new(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();

    let regular = SingularModel::new(grid, toda.clone(), vec![]).unwrap();
    println!("regular Toda (threshold 4 pi per component):");
    report(&regular, &RhoVector::new(vec![2.0 * PI, 2.0 * PI]).unwrap());
    report(&regular, &RhoVector::new(vec![4.0 * PI, 4.0 * PI]).unwrap());
    report(&regular, &RhoVector::new(vec![5.0 * PI, 2.0 * PI]).unwrap());
    println!("  rho0 = {:?}", rho_critical(&regular).unwrap().values());

    // a conical point with alpha_1 = -0.5 halves the first threshold
    let singular = SingularModel::new(
        grid,
        toda,
        vec![SingularSource {
            point: Point::new(0.5, 0.5),
            alpha: vec![-0.5, 0.0],
        }],
    )
    .unwrap();
    println!("with one source, alpha = (-0.5, 0):");
    report(&singular, &RhoVector::new(vec![3.0 * PI, 2.0 * PI]).unwrap());
    println!("  rho0 = {:?}", rho_critical(&singular).unwrap().values());
}
