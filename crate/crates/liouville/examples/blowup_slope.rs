//! The unboundedness mechanism made visible: J(u^lambda) along the log-cone
//! family grows like Lambda_{I,x}(rho)/(4 pi) * log(lambda), so a negative
//! Lambda drags the energy to -infinity while a positive one pushes it up.

use std::f64::consts::PI;

use liouville::blowup::fit_log_slope;
use liouville::*;

fn run(model: &SingularModel, rho: &RhoVector, x: Point, lambdas: &[f64]) {
    let energies: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let u = u_lambda_family(model, rho, &[0], x, l).unwrap();
            let j = evaluate_j(model, rho, &u).unwrap().j;
            println!("  lambda = {l:>4}: J(u^lambda) = {j:.4}");
            j
        })
        .collect();
    let fit = fit_log_slope(lambdas, &energies).unwrap();
    let predicted = lambda_subset_at(model, rho, &[0], x).unwrap() / (4.0 * PI);
    println!(
        "  slope {:.3} vs Lambda_I,x(rho)/(4 pi) = {:.3}\n",
        fit.slope, predicted
    );
}

fn main() {
    let model = SingularModel::new(
        TorusGrid::new(512).unwrap(),
        CouplingMatrix::new(&[vec![1.0]]).unwrap(),
        vec![],
    )
    .unwrap();
    let x = Point::new(0.5, 0.5);
    let lambdas = [8.0, 16.0, 32.0, 64.0];

    println!("supercritical rho = 1.5 * 8 pi (Lambda < 0, energy unbounded):");
    run(&model, &RhoVector::new(vec![12.0 * PI]).unwrap(), x, &lambdas);

    println!("subcritical rho = 0.9 * 8 pi (Lambda > 0, family gains energy):");
    run(&model, &RhoVector::new(vec![7.2 * PI]).unwrap(), x, &lambdas);
}
