//! Text-mode phase diagram of the Toda system over a (rho_1, rho_2) grid:
//! '+' coercive, '0' critical band, '-' unbounded. The coercive region is
//! the open square (0, 4 pi)^2.

use std::f64::consts::PI;

use liouville::*;

fn main() {
    let model = SingularModel::new(
        TorusGrid::new(32).unwrap(),
        CouplingMatrix::new(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
        vec![],
    )
    .unwrap();

    let steps = 24;
    let max = 6.0 * PI;
    let axis: Vec<f64> = (1..=steps).map(|k| max * k as f64 / steps as f64).collect();

    let mut grid_rows = Vec::new();
    for &r2 in axis.iter().rev() {
        let nodes: Vec<RhoVector> = axis
            .iter()
            .map(|&r1| RhoVector::new(vec![r1, r2]).unwrap())
            .collect();
        let row: String = classify_region_sweep(&model, &nodes)
            .unwrap()
            .into_iter()
            .map(|r| match r.classification {
                Classification::Coercive => '+',
                Classification::Critical => '0',
                Classification::Unbounded => '-',
            })
            .collect();
        grid_rows.push(row);
    }

    println!("rho_2");
    for row in &grid_rows {
        println!("  |{row}");
    }
    println!("  +{}> rho_1   (axis up to 6 pi; threshold 4 pi)", "-".repeat(steps));

    let rho0 = rho_critical(&model).unwrap();
    println!("rho0 = ({:.4}, {:.4}) = (4 pi, 4 pi)", rho0.get(0), rho0.get(1));
}
